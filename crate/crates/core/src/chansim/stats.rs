use statrs::distribution::{Binomial, DiscreteCDF};

/// z for a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Normal-approximation 95% half-width for a binomial proportion.
pub fn ci95_half_width(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let r = successes as f64 / trials as f64;
    Z95 * (r * (1.0 - r) / trials as f64).sqrt()
}

/// Exact one-sided sign test on paired outcomes.
///
/// `fewer` and `more` count the discordant pairs in which the candidate
/// failed alone and the baseline failed alone. Returns P(X <= fewer) for
/// X ~ Bin(fewer + more, 1/2), the p-value against "the candidate fails at
/// least as often as the baseline".
pub fn sign_test_p(fewer: u64, more: u64) -> f64 {
    let n = fewer + more;
    if n == 0 {
        return 1.0;
    }
    Binomial::new(0.5, n).expect("valid binomial").cdf(fewer)
}
