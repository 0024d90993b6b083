//! Full-rank probability of the decoding matrix as a function of the number
//! of HDPC rows.
//!
//! The analytic side models the matrix as K binary LT rows over W LT columns
//! and P permanently inactive columns, plus H rows of uniform elements of a
//! field of order q. With p_W the probability that the LT part has rank W:
//!
//! - p_r = prod_{i=1..H} (1 - q^-i), the chance the H random rows are full rank
//! - p_K = p_W * prod_{i=1..P-H-1} (1 - 2^(i-P)), and its approximation
//!   p_W * (1 - 2^-H)
//! - p_N = p_W * (1 - 2^-H) * p_r
//!
//! Factors sit within 2^-H of one, so products are accumulated in
//! double-double arithmetic. The empirical side samples matrix families from
//! a [`MatrixFamilyRegistry`] and counts how often they reach full rank.

mod ddouble;
mod family;

pub use ddouble::DoubleDouble;
pub use family::{
    empirical_rank_profile, EmpiricalRank, IdentityBase, LdpcLtBase, MatrixFamily,
    MatrixFamilyRegistry, RandomSquare, UnknownFamily,
};

use thiserror::Error;

/// Field order of the octet alphabet.
pub const OCTET_FIELD_ORDER: u32 = 256;

/// P - H for standard parameters at K' = 101 (P = 15, H = 10); the default
/// when a table is generated over H with the LT part held fixed.
pub const DEFAULT_PI_EXCESS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("p_W must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("field order must be at least 2, got {0}")]
    FieldOrder(u32),
    #[error("need at least one trial")]
    NoTrials,
}

/// Inputs to the analytic formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankInputs {
    /// HDPC rows.
    pub h: u32,
    /// Field order of the HDPC entries.
    pub q: u32,
    /// Probability that the LT sub-matrix has rank W.
    pub p_w: f64,
    /// Permanently inactive columns.
    pub p: u32,
}

impl RankInputs {
    pub fn new(h: u32, q: u32, p_w: f64, p: u32) -> Result<Self, RankError> {
        if !(0.0..=1.0).contains(&p_w) {
            return Err(RankError::ProbabilityOutOfRange(p_w));
        }
        if q < 2 {
            return Err(RankError::FieldOrder(q));
        }
        Ok(RankInputs { h, q, p_w, p })
    }

    /// Inputs with P = H + `pi_excess`, i.e. with K - W held fixed.
    pub fn with_pi_excess(h: u32, q: u32, p_w: f64, pi_excess: u32) -> Result<Self, RankError> {
        Self::new(h, q, p_w, h + pi_excess)
    }
}

/// p_r for every H in 0..=max_h, built by the recurrence
/// p_r(H + 1) = p_r(H) * (1 - q^-(H+1)).
pub fn random_full_rank_profile(max_h: u32, q: u32) -> Vec<DoubleDouble> {
    let inv_q = DoubleDouble::recip(q as f64);
    let mut out = Vec::with_capacity(max_h as usize + 1);
    let mut acc = DoubleDouble::ONE;
    let mut q_pow = DoubleDouble::ONE;
    out.push(acc);
    for _ in 0..max_h {
        q_pow = q_pow * inv_q;
        acc = acc * q_pow.one_minus();
        out.push(acc);
    }
    out
}

/// p_r = prod_{i=1..H} (1 - q^-i), the probability that an H x H matrix of
/// uniform elements of GF(q) is invertible.
pub fn full_rank_prob_random_dd(h: u32, q: u32) -> DoubleDouble {
    random_full_rank_profile(h, q)[h as usize]
}

pub fn full_rank_prob_random(h: u32, q: u32) -> f64 {
    full_rank_prob_random_dd(h, q).to_f64()
}

/// All four quantities for one set of inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankProbabilities {
    pub p_r: DoubleDouble,
    pub p_k_exact: DoubleDouble,
    pub p_k_approx: DoubleDouble,
    pub p_n: DoubleDouble,
}

/// p_W * prod_{i=1..P-H-1} (1 - 2^(i-P)); an empty product when P <= H + 1.
fn p_k_exact(inputs: &RankInputs) -> DoubleDouble {
    let mut acc = DoubleDouble::from_f64(inputs.p_w);
    let p = i64::from(inputs.p);
    for i in 1..p - i64::from(inputs.h) {
        let e = (i - p).clamp(-1074, 0) as i32;
        acc = acc * DoubleDouble::from_f64(2f64.powi(e)).one_minus();
    }
    acc
}

fn p_k_approx(inputs: &RankInputs) -> DoubleDouble {
    let two_h = DoubleDouble::from_f64(2f64.powi(-(inputs.h.min(1074) as i32)));
    DoubleDouble::from_f64(inputs.p_w) * two_h.one_minus()
}

pub fn rank_probabilities(inputs: &RankInputs) -> RankProbabilities {
    let p_r = full_rank_prob_random_dd(inputs.h, inputs.q);
    let p_k_approx = p_k_approx(inputs);
    RankProbabilities {
        p_r,
        p_k_exact: p_k_exact(inputs),
        p_k_approx,
        p_n: p_k_approx * p_r,
    }
}

/// p_N = p_W (1 - 2^-H) prod_{i=1..H} (1 - q^-i). Zero at H = 0, where the
/// approximation of p_K degenerates.
pub fn combined_full_rank_prob(inputs: &RankInputs) -> f64 {
    rank_probabilities(inputs).p_n.to_f64()
}

/// One row per H in `hs`, with P = H + `pi_excess`.
pub fn rank_table(
    hs: impl IntoIterator<Item = u32>,
    q: u32,
    p_w: f64,
    pi_excess: u32,
) -> Result<Vec<(RankInputs, RankProbabilities)>, RankError> {
    hs.into_iter()
        .map(|h| {
            let inputs = RankInputs::with_pi_excess(h, q, p_w, pi_excess)?;
            Ok((inputs, rank_probabilities(&inputs)))
        })
        .collect()
}

pub const RANK_CSV_HEADER: [&str; 6] = ["H", "q", "p_r_exact", "p_K_exact", "p_K_approx", "p_N"];

/// Probabilities are written as the shortest decimal that reads back to the
/// same f64.
pub fn rank_csv(rows: &[(RankInputs, RankProbabilities)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RANK_CSV_HEADER).expect("in-memory write");
    for (i, p) in rows {
        w.write_record([
            i.h.to_string(),
            i.q.to_string(),
            p.p_r.to_f64().to_string(),
            p.p_k_exact.to_f64().to_string(),
            p.p_k_approx.to_f64().to_string(),
            p.p_n.to_f64().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

pub const EMPIRICAL_CSV_HEADER: [&str; 8] = [
    "family",
    "H",
    "trials",
    "full_rank",
    "fraction",
    "ci95",
    "predicted",
    "deficiency_histogram",
];

/// `predicted` is `NA` for families without a closed form; the histogram
/// lists trial counts for rank deficiency 0, 1, 2, ... separated by `;`.
pub fn empirical_csv(rows: &[EmpiricalRank]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EMPIRICAL_CSV_HEADER)
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.family.clone(),
            r.h.to_string(),
            r.trials.to_string(),
            r.full_rank.to_string(),
            format!("{:.8}", r.fraction()),
            format!("{:.8}", r.ci95()),
            r.predicted.map_or("NA".to_string(), |p| format!("{p:.8}")),
            r.deficiency
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values() {
        assert_eq!(full_rank_prob_random(0, 256), 1.0);
        assert_eq!(full_rank_prob_random(1, 256), 0.99609375);
        let p10 = full_rank_prob_random(10, 256);
        assert!(p10 > 0.9960 && p10 < 0.9961, "{p10}");
    }

    #[test]
    fn recurrence_holds_exactly() {
        let profile = random_full_rank_profile(64, 256);
        for h in 0..64u32 {
            let factor = DoubleDouble::from_f64(256f64.powi(-(h as i32 + 1))).one_minus();
            assert_eq!(
                profile[h as usize + 1],
                profile[h as usize] * factor,
                "H={h}"
            );
            assert_eq!(full_rank_prob_random_dd(h, 256), profile[h as usize]);
        }
    }

    #[test]
    fn p_r_strictly_decreases() {
        for q in [2, 3, 256] {
            let profile = random_full_rank_profile(64, q);
            // strict while q^-H is above the ~2^-104 resolution of the products
            let resolvable = (104.0 / (q as f64).log2()).floor() as usize;
            for (h, w) in profile.windows(2).enumerate() {
                assert!(w[1] <= w[0], "q={q} H={h}");
                assert!(h + 1 > resolvable || w[1] < w[0], "q={q} H={h}");
            }
            assert!(profile.iter().all(|p| p.to_f64() > 0.0));
        }
    }

    #[test]
    fn combined_examples() {
        let i = |h, p_w| RankInputs::with_pi_excess(h, 256, p_w, DEFAULT_PI_EXCESS).unwrap();
        assert_eq!(combined_full_rank_prob(&i(7, 0.0)), 0.0);
        assert_eq!(combined_full_rank_prob(&i(0, 1.0)), 0.0);
        assert!(combined_full_rank_prob(&i(12, 1.0)) > combined_full_rank_prob(&i(10, 1.0)));
        // p_N = p_K_approx * p_r
        let r = rank_probabilities(&i(3, 0.5));
        let want = 0.5 * (1.0 - 0.125) * full_rank_prob_random(3, 256);
        assert!((r.p_n.to_f64() - want).abs() < 1e-16);
    }

    #[test]
    fn p_n_strictly_increases_to_h_64() {
        let rows = rank_table(1..=64, 256, 1.0, DEFAULT_PI_EXCESS).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].1.p_n > w[0].1.p_n, "H={}", w[1].0.h);
        }
        // in plain f64 the tail of the sequence is flat
        let f: Vec<f64> = rows.iter().map(|r| r.1.p_n.to_f64()).collect();
        assert_eq!(f[62], f[63]);
    }

    #[test]
    fn exact_p_k_tends_to_the_approximation() {
        // prod_{j > H} (1 - 2^-j) = 1 - 2^-H + O(4^-H)
        for h in [4u32, 8, 16] {
            let inputs = RankInputs::new(h, 256, 1.0, h + 200).unwrap();
            let r = rank_probabilities(&inputs);
            let gap = (r.p_k_exact - r.p_k_approx).to_f64().abs();
            assert!(gap < 4f64.powi(-(h as i32)), "H={h} gap={gap}");
        }
        // P <= H + 1 leaves an empty product
        let r = rank_probabilities(&RankInputs::new(10, 256, 0.7, 11).unwrap());
        assert_eq!(r.p_k_exact.to_f64(), 0.7);
    }

    #[test]
    fn input_validation() {
        assert!(RankInputs::new(1, 256, 1.5, 1).is_err());
        assert!(RankInputs::new(1, 256, f64::NAN, 1).is_err());
        assert!(RankInputs::new(1, 1, 0.5, 1).is_err());
    }

    #[test]
    fn csv_shape() {
        let rows = rank_table([1, 2], 256, 1.0, DEFAULT_PI_EXCESS).unwrap();
        let csv = rank_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "H,q,p_r_exact,p_K_exact,p_K_approx,p_N");
        assert_eq!(
            lines[1],
            "1,256,0.99609375,0.59600830078125,0.5,0.498046875"
        );
        assert_eq!(lines.len(), 3);
    }
}
