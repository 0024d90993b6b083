//! Code parameters for one source block.
//!
//! Standard parameters come straight from the RFC 6330 systematic index
//! table. A [`PrecodeProfile`] replaces the LDPC and HDPC row counts (S, H)
//! for a whole block according to its importance class. When S and H change,
//! K' and W stay at their table values, L = K' + S + H is recomputed and the
//! permanently inactivated column count P = L - W absorbs the growth.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::matrixgen::{self, InactivationSolver, Solver};
use crate::tables::{DEGREE_CDF, MAX_SOURCE_SYMBOLS, SYSTEMATIC_INDEX_TABLE, V0, V1, V2, V3};

/// Number of systematic indices tried past the table value before giving up.
const J_SEARCH_LIMIT: u32 = 1024;

/// Profiles shipped with the crate.
pub const DEFAULT_PROFILES: &str = include_str!("../profiles/default.conf");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("source block size K={0} outside supported range 1..={MAX_SOURCE_SYMBOLS}")]
    BlockSizeOutOfRange(u32),
    #[error("invalid precode profile for K={k}: {reason}")]
    InvalidProfile { k: u32, reason: String },
    #[error("no systematic index in {first}..{last} gives a full-rank constraint matrix for K={k}, S={s}, H={h}")]
    NoSystematicIndex {
        k: u32,
        s: u32,
        h: u32,
        first: u32,
        last: u32,
    },
    #[error("symbol size must be at least 1 byte")]
    ZeroSymbolSize,
    #[error("profile parse error on line {line}: {reason}")]
    ProfileSyntax { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ImportanceClass {
    /// More important bits.
    Mib,
    /// Less important bits.
    Lib,
}

impl ImportanceClass {
    pub const ALL: [ImportanceClass; 2] = [ImportanceClass::Mib, ImportanceClass::Lib];

    pub fn as_str(self) -> &'static str {
        match self {
            ImportanceClass::Mib => "MIB",
            ImportanceClass::Lib => "LIB",
        }
    }
}

impl fmt::Display for ImportanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImportanceClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MIB" => Ok(ImportanceClass::Mib),
            "LIB" => Ok(ImportanceClass::Lib),
            other => Err(format!(
                "unknown importance class {other:?} (expected MIB or LIB)"
            )),
        }
    }
}

/// Precode size for one importance class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecodeProfile {
    pub class: ImportanceClass,
    /// LDPC rows.
    pub s: u32,
    /// HDPC rows.
    pub h: u32,
}

/// Profiles keyed by (K, class).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileSet {
    entries: BTreeMap<(u32, ImportanceClass), PrecodeProfile>,
}

impl ProfileSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped profile set (K = 55, 101, 213).
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_PROFILES).expect("shipped profile file is well formed")
    }

    pub fn insert(&mut self, k: u32, profile: PrecodeProfile) {
        self.entries.insert((k, profile.class), profile);
    }

    pub fn get(&self, k: u32, class: ImportanceClass) -> Option<PrecodeProfile> {
        self.entries.get(&(k, class)).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<u32> {
        let mut ks: Vec<u32> = self.entries.keys().map(|(k, _)| *k).collect();
        ks.dedup();
        ks
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, PrecodeProfile)> + '_ {
        self.entries.iter().map(|((k, _), p)| (*k, *p))
    }

    /// Parses `K.CLASS = S,H` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ParamError> {
        let mut set = ProfileSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ParamError::ProfileSyntax {
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected K.CLASS = S,H".into()))?;
            let (k, class) = parse_profile_key(key.trim()).map_err(err)?;
            let (s, h) = value
                .split_once(',')
                .ok_or_else(|| err("expected S,H".into()))?;
            let s: u32 = s.trim().parse().map_err(|e| err(format!("S: {e}")))?;
            let h: u32 = h.trim().parse().map_err(|e| err(format!("H: {e}")))?;
            set.insert(k, PrecodeProfile { class, s, h });
        }
        Ok(set)
    }

    /// Inverse of [`ProfileSet::parse`].
    pub fn to_text(&self) -> String {
        self.iter()
            .map(|(k, p)| format!("{k}.{} = {},{}\n", p.class, p.s, p.h))
            .collect()
    }
}

/// Parses a `K.CLASS` key such as `101.MIB`.
pub fn parse_profile_key(key: &str) -> Result<(u32, ImportanceClass), String> {
    let (k, class) = key
        .split_once('.')
        .ok_or_else(|| format!("bad profile key {key:?}"))?;
    let k: u32 = k.trim().parse().map_err(|e| format!("K in {key:?}: {e}"))?;
    Ok((k, class.parse()?))
}

/// All parameters needed to build the constraint matrix of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    /// Source symbols in the block.
    pub k: u32,
    /// Extended (padded) source symbol count.
    pub k_prime: u32,
    /// LDPC rows.
    pub s: u32,
    /// HDPC rows.
    pub h: u32,
    /// LT columns.
    pub w: u32,
    /// Intermediate symbols, K' + S + H.
    pub l: u32,
    /// Permanently inactivated columns, L - W.
    pub p: u32,
    /// Smallest prime >= P.
    pub p1: u32,
    /// W - S.
    pub b: u32,
    /// Systematic index.
    pub j: u32,
    /// Symbol size in bytes.
    pub t: usize,
}

impl CodeParams {
    pub fn with_symbol_size(mut self, t: usize) -> Result<Self, ParamError> {
        if t == 0 {
            return Err(ParamError::ZeroSymbolSize);
        }
        self.t = t;
        Ok(self)
    }

    /// Internal symbol id for an encoding symbol id: padding symbols occupy
    /// K..K', so repair ESIs are shifted by K' - K.
    #[inline]
    pub fn isi(&self, esi: u32) -> u32 {
        if esi < self.k {
            esi
        } else {
            esi + (self.k_prime - self.k)
        }
    }

    /// Same derived values with a different (S, H) and the same J.
    fn with_precode(&self, s: u32, h: u32) -> Result<Self, ParamError> {
        let invalid = |reason: String| ParamError::InvalidProfile { k: self.k, reason };
        if s < 1 || h < 1 {
            return Err(invalid(format!("S={s} and H={h} must both be >= 1")));
        }
        if s >= self.w {
            return Err(invalid(format!("S={s} must be below W={}", self.w)));
        }
        let l = self.k_prime + s + h;
        if l <= self.w {
            return Err(invalid(format!(
                "P = L - W = {l} - {} must be >= 1",
                self.w
            )));
        }
        let p = l - self.w;
        Ok(CodeParams {
            s,
            h,
            l,
            p,
            p1: smallest_prime_at_least(p),
            b: self.w - s,
            ..*self
        })
    }
}

fn table_row(k: u32) -> Result<(u32, u32, u32, u32, u32), ParamError> {
    if k == 0 || k > MAX_SOURCE_SYMBOLS {
        return Err(ParamError::BlockSizeOutOfRange(k));
    }
    Ok(*SYSTEMATIC_INDEX_TABLE
        .iter()
        .find(|row| row.0 >= k)
        .expect("table covers K up to MAX_SOURCE_SYMBOLS"))
}

pub fn standard_params(k: u32) -> Result<CodeParams, ParamError> {
    let (k_prime, j, s, h, w) = table_row(k)?;
    let l = k_prime + s + h;
    let p = l - w;
    Ok(CodeParams {
        k,
        k_prime,
        s,
        h,
        w,
        l,
        p,
        p1: smallest_prime_at_least(p),
        b: w - s,
        j,
        t: 1,
    })
}

/// Parameters for a block whose precode size is given by `profile`.
///
/// The systematic index is the first J >= J(K') for which the constraint
/// matrix over ISIs 0..K' has full rank, so that the block can be encoded
/// systematically. For the standard (S, H) that is the table value.
pub fn pbpr_params(k: u32, profile: PrecodeProfile) -> Result<CodeParams, ParamError> {
    let std = standard_params(k)?;
    let base = std.with_precode(profile.s, profile.h)?;
    let isis: Vec<u32> = (0..base.k_prime).collect();
    let solver = InactivationSolver;
    for j in std.j..std.j + J_SEARCH_LIMIT {
        let candidate = CodeParams { j, ..base };
        let matrix = matrixgen::build_constraint_matrix(&candidate, &isis);
        if solver.rank(&matrix) == candidate.l as usize {
            return Ok(candidate);
        }
    }
    Err(ParamError::NoSystematicIndex {
        k,
        s: profile.s,
        h: profile.h,
        first: std.j,
        last: std.j + J_SEARCH_LIMIT - 1,
    })
}

/// LT tuple for one internal symbol id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tuple {
    pub d: u32,
    pub a: u32,
    pub b: u32,
    pub d1: u32,
    pub a1: u32,
    pub b1: u32,
}

/// The RFC 6330 pseudo-random generator Rand[y, i, m].
#[inline]
pub fn rand(y: u32, i: u32, m: u32) -> u32 {
    debug_assert!(m > 0);
    let x0 = (y.wrapping_add(i) & 0xff) as usize;
    let x1 = ((y >> 8).wrapping_add(i) & 0xff) as usize;
    let x2 = ((y >> 16).wrapping_add(i) & 0xff) as usize;
    let x3 = ((y >> 24).wrapping_add(i) & 0xff) as usize;
    (V0[x0] ^ V1[x1] ^ V2[x2] ^ V3[x3]) % m
}

/// Degree for a uniform draw `v` in [0, 2^20), capped at W - 2.
#[inline]
pub fn deg(v: u32, w: u32) -> u32 {
    debug_assert!(v < 1 << 20);
    let d = DEGREE_CDF[1..]
        .iter()
        .position(|&f| v < f)
        .expect("v below 2^20") as u32
        + 1;
    d.min(w - 2)
}

/// Tuple generator. `isi` is the internal symbol id, which equals the ESI
/// whenever K = K'.
pub fn tuple_gen(params: &CodeParams, isi: u32) -> Tuple {
    let w = params.w;
    let p1 = params.p1;
    let mut a_mul = 53591u32.wrapping_add(params.j.wrapping_mul(997));
    if a_mul.is_multiple_of(2) {
        a_mul += 1;
    }
    let b_add = 10267u32.wrapping_mul(params.j + 1);
    let y = b_add.wrapping_add(isi.wrapping_mul(a_mul));
    let v = rand(y, 0, 1 << 20);
    let d = deg(v, w);
    let a = 1 + rand(y, 1, w - 1);
    let b = rand(y, 2, w);
    let d1 = if d < 4 { 2 + rand(isi, 3, 2) } else { 2 };
    let a1 = 1 + rand(isi, 4, p1 - 1);
    let b1 = rand(isi, 5, p1);
    Tuple {
        d,
        a,
        b,
        d1,
        a1,
        b1,
    }
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2u32;
    while i * i <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

pub fn smallest_prime_at_least(n: u32) -> u32 {
    let mut x = n.max(2);
    while !is_prime(x) {
        x += 1;
    }
    x
}
