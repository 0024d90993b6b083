//! Octet arithmetic over GF(256) as used by RFC 6330.
//!
//! The field is built from the polynomial x^8 + x^4 + x^3 + x^2 + 1. Addition
//! is XOR, multiplication goes through log/antilog tables that are generated
//! from the polynomial at compile time. [`reference`] holds a table-free
//! carry-less multiplier that the tables are checked against.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign};

use thiserror::Error;

/// Low byte of the field polynomial x^8 + x^4 + x^3 + x^2 + 1.
pub const FIELD_POLY: u8 = 0x1d;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("symbol length mismatch: {dst} vs {src}")]
    LengthMismatch { dst: usize, src: usize },
}

const fn gen_exp(poly: u8) -> [u8; 510] {
    let mut exp = [0u8; 510];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        exp[i + 255] = x as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= 0x100 | poly as u16;
        }
        i += 1;
    }
    exp
}

const fn gen_log(exp: &[u8; 510]) -> [u8; 256] {
    let mut log = [0u8; 256];
    let mut i = 0;
    while i < 255 {
        log[exp[i] as usize] = i as u8;
        i += 1;
    }
    log
}

const fn gen_mul(exp: &[u8; 510], log: &[u8; 256]) -> [[u8; 256]; 256] {
    let mut table = [[0u8; 256]; 256];
    let mut a = 1;
    while a < 256 {
        let mut b = 1;
        while b < 256 {
            table[a][b] = exp[log[a] as usize + log[b] as usize];
            b += 1;
        }
        a += 1;
    }
    table
}

static OCT_EXP: [u8; 510] = gen_exp(FIELD_POLY);
static OCT_LOG: [u8; 256] = gen_log(&OCT_EXP);
static OCT_MUL: [[u8; 256]; 256] = gen_mul(&OCT_EXP, &OCT_LOG);

/// An element of GF(256).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
#[repr(transparent)]
pub struct Octet(pub u8);

impl Octet {
    pub const ZERO: Octet = Octet(0);
    pub const ONE: Octet = Octet(1);

    #[inline]
    pub const fn new(value: u8) -> Self {
        Octet(value)
    }

    #[inline]
    pub const fn byte(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// alpha^i, where alpha = 2 generates the multiplicative group.
    #[inline]
    pub fn alpha(i: usize) -> Octet {
        Octet(OCT_EXP[i % 255])
    }

    pub fn inv(self) -> Result<Octet, FieldError> {
        oct_inv(self)
    }
}

impl fmt::Debug for Octet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Octet({})", self.0)
    }
}

impl From<u8> for Octet {
    fn from(v: u8) -> Self {
        Octet(v)
    }
}

impl Add for Octet {
    type Output = Octet;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Octet) -> Octet {
        Octet(self.0 ^ rhs.0)
    }
}

impl AddAssign for Octet {
    #[inline]
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Octet) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Octet {
    type Output = Octet;
    #[inline]
    fn mul(self, rhs: Octet) -> Octet {
        oct_mul(self, rhs)
    }
}

impl MulAssign for Octet {
    #[inline]
    fn mul_assign(&mut self, rhs: Octet) {
        *self = oct_mul(*self, rhs);
    }
}

impl Div for Octet {
    type Output = Octet;
    /// Panics when dividing by zero.
    fn div(self, rhs: Octet) -> Octet {
        let inv = oct_inv(rhs).expect("division by zero octet");
        oct_mul(self, inv)
    }
}

#[inline]
pub fn oct_mul(a: Octet, b: Octet) -> Octet {
    Octet(OCT_MUL[a.0 as usize][b.0 as usize])
}

pub fn oct_inv(a: Octet) -> Result<Octet, FieldError> {
    if a.is_zero() {
        return Err(FieldError::ZeroInverse);
    }
    Ok(Octet(OCT_EXP[255 - OCT_LOG[a.0 as usize] as usize]))
}

/// Row of the multiplication table for a fixed scalar.
#[inline]
pub(crate) fn mul_row(beta: u8) -> &'static [u8; 256] {
    &OCT_MUL[beta as usize]
}

/// `dst ^= src`, elementwise.
#[inline]
pub fn add_assign_slice(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

/// `dst += beta * src`, elementwise.
#[inline]
pub fn fma_slice(dst: &mut [u8], src: &[u8], beta: Octet) {
    debug_assert_eq!(dst.len(), src.len());
    match beta.0 {
        0 => {}
        1 => add_assign_slice(dst, src),
        b => {
            let row = mul_row(b);
            for (d, s) in dst.iter_mut().zip(src) {
                *d ^= row[*s as usize];
            }
        }
    }
}

/// `v *= beta`, elementwise.
#[inline]
pub fn scale_slice(v: &mut [u8], beta: Octet) {
    match beta.0 {
        1 => {}
        0 => v.fill(0),
        b => {
            let row = mul_row(b);
            for x in v.iter_mut() {
                *x = row[*x as usize];
            }
        }
    }
}

/// Payload of one symbol: T octets.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct SymbolData(Vec<u8>);

impl SymbolData {
    pub fn new(bytes: Vec<u8>) -> Self {
        SymbolData(bytes)
    }

    pub fn zeros(len: usize) -> Self {
        SymbolData(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    /// In-place `self += beta * src`.
    pub fn fma_assign(&mut self, src: &SymbolData, beta: Octet) -> Result<(), FieldError> {
        if self.len() != src.len() {
            return Err(FieldError::LengthMismatch {
                dst: self.len(),
                src: src.len(),
            });
        }
        fma_slice(&mut self.0, &src.0, beta);
        Ok(())
    }
}

impl fmt::Debug for SymbolData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolData({:02x?})", self.0)
    }
}

impl From<Vec<u8>> for SymbolData {
    fn from(v: Vec<u8>) -> Self {
        SymbolData(v)
    }
}

impl From<&[u8]> for SymbolData {
    fn from(v: &[u8]) -> Self {
        SymbolData(v.to_vec())
    }
}

/// Returns `dst + beta * src`.
pub fn vec_fma(dst: &SymbolData, src: &SymbolData, beta: Octet) -> Result<SymbolData, FieldError> {
    let mut out = dst.clone();
    out.fma_assign(src, beta)?;
    Ok(out)
}

/// Table-free arithmetic used to validate the log/antilog tables.
pub mod reference {
    use super::FIELD_POLY;

    /// Carry-less product of `a` and `b`, reduced modulo the field polynomial.
    pub fn clmul_reduce(a: u8, b: u8) -> u8 {
        let mut acc: u16 = 0;
        for i in 0..8 {
            if b >> i & 1 == 1 {
                acc ^= (a as u16) << i;
            }
        }
        for bit in (8..15).rev() {
            if acc >> bit & 1 == 1 {
                acc ^= (0x100 | FIELD_POLY as u16) << (bit - 8);
            }
        }
        acc as u8
    }
}

/// A standalone copy of the exp/log tables, so consistency checks can run
/// against deliberately altered tables.
#[derive(Clone)]
pub struct OctetTables {
    pub exp: Vec<u8>,
    pub log: Vec<u8>,
}

impl OctetTables {
    /// The tables the arithmetic in this module uses.
    pub fn builtin() -> Self {
        OctetTables {
            exp: OCT_EXP.to_vec(),
            log: OCT_LOG.to_vec(),
        }
    }

    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    /// Compares every product against [`reference::clmul_reduce`] and checks
    /// that every nonzero element has an inverse. Returns the first mismatch.
    pub fn verify(&self) -> Result<(), String> {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                let got = self.mul(a, b);
                let want = reference::clmul_reduce(a, b);
                if got != want {
                    return Err(format!("{a} * {b}: table gives {got}, oracle gives {want}"));
                }
            }
        }
        for a in 1..=255u8 {
            if !(1..=255u8).any(|x| self.mul(a, x) == 1) {
                return Err(format!("{a} has no inverse"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spec_products() {
        assert_eq!(oct_mul(Octet(0), Octet(173)), Octet(0));
        assert_eq!(oct_mul(Octet(1), Octet(173)), Octet(173));
        assert_eq!(oct_mul(Octet(2), Octet(2)), Octet(4));
        assert_eq!(reference::clmul_reduce(2, 2), 4);
        // x^7 * x = x^8 = x^4 + x^3 + x^2 + 1
        assert_eq!(reference::clmul_reduce(0x80, 2), 0x1d);
    }

    #[test]
    fn table_matches_oracle_everywhere() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(
                    oct_mul(Octet(a), Octet(b)).0,
                    reference::clmul_reduce(a, b),
                    "{a} * {b}"
                );
            }
        }
        OctetTables::builtin().verify().unwrap();
    }

    #[test]
    fn inverses() {
        assert_eq!(oct_inv(Octet(1)), Ok(Octet(1)));
        assert_eq!(oct_inv(Octet(0)), Err(FieldError::ZeroInverse));
        // exhaustive scan for the inverse of 2
        let scanned = (1..=255u8)
            .find(|&x| reference::clmul_reduce(2, x) == 1)
            .unwrap();
        assert_eq!(oct_inv(Octet(2)).unwrap(), Octet(scanned));
        for a in 1..=255u8 {
            let inv = oct_inv(Octet(a)).unwrap();
            assert_eq!(oct_mul(Octet(a), inv), Octet::ONE);
        }
    }

    #[test]
    fn commutative_exhaustive() {
        for a in 0..=255u8 {
            for b in a..=255u8 {
                assert_eq!(oct_mul(Octet(a), Octet(b)), oct_mul(Octet(b), Octet(a)));
            }
        }
    }

    proptest! {
        #[test]
        fn associative(a: u8, b: u8, c: u8) {
            let (a, b, c) = (Octet(a), Octet(b), Octet(c));
            prop_assert_eq!((a * b) * c, a * (b * c));
        }

        #[test]
        fn distributive(a: u8, b: u8, c: u8) {
            let (a, b, c) = (Octet(a), Octet(b), Octet(c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
        }

        #[test]
        fn fma_matches_scalar_ops(d in proptest::collection::vec(any::<u8>(), 1..64), beta: u8, seed: u8) {
            let s: Vec<u8> = d.iter().map(|x| x.wrapping_mul(31).wrapping_add(seed)).collect();
            let out = vec_fma(&SymbolData::new(d.clone()), &SymbolData::new(s.clone()), Octet(beta)).unwrap();
            for i in 0..d.len() {
                prop_assert_eq!(out.as_bytes()[i], d[i] ^ reference::clmul_reduce(beta, s[i]));
            }
        }
    }

    #[test]
    fn fma_edge_cases() {
        let d = SymbolData::new(vec![1, 2, 3, 250]);
        let s = SymbolData::new(vec![9, 8, 7, 6]);
        assert_eq!(vec_fma(&d, &s, Octet(0)).unwrap(), d);
        assert_eq!(
            vec_fma(&d, &s, Octet(1)).unwrap().as_bytes(),
            &[1 ^ 9, 2 ^ 8, 3 ^ 7, 250 ^ 6]
        );
        assert!(vec_fma(&d, &d, Octet(1)).unwrap().is_zero());
        let short = SymbolData::new(vec![1]);
        assert_eq!(
            vec_fma(&d, &short, Octet(3)),
            Err(FieldError::LengthMismatch { dst: 4, src: 1 })
        );
    }

    #[test]
    fn corrupted_tables_fail_verification() {
        let mut t = OctetTables::builtin();
        t.exp[17] ^= 0x40;
        assert!(t.verify().is_err());
    }

    #[test]
    fn alpha_wraps() {
        assert_eq!(Octet::alpha(0), Octet::ONE);
        assert_eq!(Octet::alpha(1), Octet(2));
        assert_eq!(Octet::alpha(255), Octet::ONE);
        assert_eq!(Octet::alpha(8), Octet(0x1d));
    }
}
