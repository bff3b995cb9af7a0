//! Exact rational scalars, vectors and dense matrices.
//!
//! Every quantity in the gadget constructions lives here: powers `N^k` with
//! hundreds of thousands of bits, the small constants of the rank-3 gadget and
//! the thresholds the solver decides against. Nothing in this module touches
//! floating point.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExactError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("zero raised to the negative power {0}")]
    ZeroToNegativePower(i64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("malformed rational `{0}`")]
    Parse(String),
}

/// An arbitrary-precision rational number, always in lowest terms with a
/// positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

/// Canonical constructor: `num/den` reduced, sign carried by the numerator.
pub fn rat(num: i64, den: i64) -> Result<Rational, ExactError> {
    Rational::new(num, den)
}

impl Rational {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self, ExactError> {
        let den = den.into();
        if den.is_zero() {
            return Err(ExactError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(num.into(), den)))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn floor(&self) -> BigInt {
        self.0.numer().div_floor(self.0.denom())
    }

    pub fn ceil(&self) -> BigInt {
        -((-self.0.numer()).div_floor(self.0.denom()))
    }

    pub fn recip(&self) -> Result<Rational, ExactError> {
        if self.is_zero() {
            return Err(ExactError::ZeroDenominator);
        }
        Ok(Rational(self.0.recip()))
    }

    /// `self^exp` by repeated squaring; negative exponents invert first.
    pub fn pow_int(&self, exp: i64) -> Result<Rational, ExactError> {
        let base = if exp < 0 {
            if self.is_zero() {
                return Err(ExactError::ZeroToNegativePower(exp));
            }
            self.0.recip()
        } else {
            self.0.clone()
        };
        let mut e = exp.unsigned_abs();
        let mut acc = BigRational::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc *= &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(Rational(acc))
    }

    /// Bit length of numerator plus denominator; a cheap size measure.
    pub fn bits(&self) -> u64 {
        self.0.numer().bits() + self.0.denom().bits()
    }

    /// Encloses `self` in `[lo, hi] / 2^frac_bits`, or `None` when the scaled
    /// bounds overflow `i128`. `lo == hi` exactly when the value is representable.
    pub fn fixed_bounds(&self, frac_bits: u32) -> Option<(i128, i128)> {
        let scaled = self.0.numer() << frac_bits;
        let (q, r) = scaled.div_mod_floor(self.0.denom());
        let lo = q.to_i128()?;
        let hi = if r.is_zero() { lo } else { lo.checked_add(1)? };
        Some((lo, hi))
    }

    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Rational::from_integer(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits() > 256 {
            write!(f, "Rational(~{} bits)", self.bits())
        } else {
            write!(f, "{}", self)
        }
    }
}

impl FromStr for Rational {
    type Err = ExactError;

    /// Accepts `p/q` or a bare integer `p`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExactError::Parse(s.to_string());
        let int = |t: &str| -> Result<BigInt, ExactError> {
            let t = t.trim();
            let digits = t.strip_prefix('-').unwrap_or(t);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            t.parse::<BigInt>().map_err(|_| bad())
        };
        match s.split_once('/') {
            Some((p, q)) => {
                let q = int(q)?;
                if q.is_negative() {
                    return Err(bad());
                }
                Rational::new(int(p)?, q)
            }
            None => Ok(Rational::from_integer(int(s)?)),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

/// Panics on division by zero, like the integer types; use [`Rational::recip`]
/// where the divisor is not known to be nonzero.
impl Div<&Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "division of a rational by zero");
        Rational(&self.0 / &rhs.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |mut acc, x| {
            acc += x;
            acc
        })
    }
}

impl Sum<Rational> for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Exact inner product of two equal-length vectors.
pub fn dot(u: &[Rational], v: &[Rational]) -> Result<Rational, ExactError> {
    if u.len() != v.len() {
        return Err(ExactError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(u.iter()
        .zip(v)
        .filter(|(a, b)| !a.is_zero() && !b.is_zero())
        .map(|(a, b)| a * b)
        .sum())
}

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl ExactMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self, ExactError> {
        if entries.len() != rows * cols {
            return Err(ExactError::DimensionMismatch {
                left: entries.len(),
                right: rows * cols,
            });
        }
        Ok(ExactMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExactMatrix {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.entries[i * size + i] = Rational::one();
        }
        m
    }

    /// Builds a matrix from integer rows; all rows must share a length.
    pub fn from_int_rows(rows: &[Vec<i64>]) -> Result<Self, ExactError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(ExactError::DimensionMismatch {
                    left: row.len(),
                    right: cols,
                });
            }
            entries.extend(row.iter().map(|&x| Rational::from(x)));
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, rhs: &ExactMatrix) -> Result<ExactMatrix, ExactError> {
        if self.cols != rhs.rows {
            return Err(ExactError::DimensionMismatch {
                left: self.cols,
                right: rhs.rows,
            });
        }
        let mut entries = Vec::with_capacity(self.rows * rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let col: Vec<Rational> = (0..rhs.rows).map(|k| rhs.get(k, j).clone()).collect();
                entries.push(dot(self.row(i), &col)?);
            }
        }
        ExactMatrix::new(self.rows, rhs.cols, entries)
    }

    /// Exact rank over the rationals.
    ///
    /// Each row is first scaled to integers by the lcm of its denominators,
    /// then reduced by Bareiss fraction-free elimination: after `k` pivots every
    /// trailing entry is a `(k+1)`-minor of the scaled matrix, so the division by
    /// the previous pivot is exact and entries never exceed minor size. Pivots
    /// are the first nonzero entry of each column, rows scanned top-down.
    pub fn rank(&self) -> usize {
        let rows: Vec<Vec<BigInt>> = (0..self.rows).map(|r| integer_row(self.row(r))).collect();
        bareiss_rank(rows, self.cols)
    }
}

fn integer_row(row: &[Rational]) -> Vec<BigInt> {
    let lcm = row
        .iter()
        .fold(BigInt::one(), |acc, x| if x.denom().is_one() { acc } else { acc.lcm(x.denom()) });
    row.iter()
        .map(|x| {
            if x.is_zero() {
                BigInt::zero()
            } else if x.denom() == &lcm {
                x.numer().clone()
            } else {
                x.numer() * (&lcm / x.denom())
            }
        })
        .collect()
}

fn bareiss_rank(mut a: Vec<Vec<BigInt>>, cols: usize) -> usize {
    let nrows = a.len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if rank == nrows {
            break;
        }
        let Some(p) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let (top, rest) = a.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        let pivot = &pivot_row[col];
        for row in rest.iter_mut() {
            let factor = std::mem::take(&mut row[col]);
            for j in col + 1..cols {
                let mut v = &row[j] * pivot;
                if !factor.is_zero() && !pivot_row[j].is_zero() {
                    v -= &factor * &pivot_row[j];
                }
                if !v.is_zero() && !prev.is_one() {
                    debug_assert!((&v % &prev).is_zero(), "Bareiss division must be exact");
                    v /= &prev;
                }
                row[j] = v;
            }
        }
        prev = pivot.clone();
        rank += 1;
    }
    rank
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.is_integer() && self.0.numer() == &BigInt::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Rational::from(*other)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_construction() {
        assert_eq!(rat(2, 4).unwrap().to_string(), "1/2");
        assert_eq!(rat(3, -6).unwrap().to_string(), "-1/2");
        assert_eq!(rat(0, 7).unwrap().to_string(), "0/1");
        assert_eq!(rat(1, 0), Err(ExactError::ZeroDenominator));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(r("6/4"), rat(3, 2).unwrap());
        assert_eq!(r("-5"), Rational::from(-5));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("1/-2".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
        assert!("1.5".parse::<Rational>().is_err());
        assert!("+3".parse::<Rational>().is_err());
    }

    #[test]
    fn powers() {
        let ten = Rational::from(10);
        assert_eq!(ten.pow_int(3).unwrap(), Rational::from(1000));
        assert_eq!(ten.pow_int(-2).unwrap(), rat(1, 100).unwrap());
        assert_eq!(ten.pow_int(0).unwrap(), Rational::one());
        assert_eq!(
            Rational::zero().pow_int(-1),
            Err(ExactError::ZeroToNegativePower(-1))
        );
        assert_eq!(Rational::zero().pow_int(0).unwrap(), Rational::one());
    }

    #[test]
    fn large_power_matches_naive_product() {
        let b = Rational::from(48);
        let fast = b.pow_int(96).unwrap();
        let mut naive = Rational::one();
        for _ in 0..96 {
            naive = &naive * &b;
        }
        assert_eq!(fast, naive);
        assert_eq!(fast.numer().to_string().len(), 162);
    }

    #[test]
    fn dot_products() {
        let one = Rational::one();
        let zero = Rational::zero();
        assert_eq!(dot(&[one.clone(), zero.clone()], &[zero, one]).unwrap(), Rational::zero());
        let n = Rational::from(7);
        let u = [n.pow_int(3).unwrap(), n.pow_int(-3).unwrap()];
        let v = [n.pow_int(-3).unwrap(), n.pow_int(3).unwrap()];
        assert_eq!(dot(&u, &v).unwrap(), Rational::from(2));
        assert!(matches!(
            dot(&u, &v[..1]),
            Err(ExactError::DimensionMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn rank_basics() {
        assert_eq!(ExactMatrix::identity(3).rank(), 3);
        assert_eq!(ExactMatrix::zeros(2, 3).rank(), 0);
        assert_eq!(ExactMatrix::zeros(0, 0).rank(), 0);
        let m = ExactMatrix::from_int_rows(&[vec![1, 2, 3], vec![2, 4, 6], vec![0, 0, 1]]).unwrap();
        assert_eq!(m.rank(), 2);
        let half = ExactMatrix::new(2, 2, vec![r("1/2"), r("1/3"), r("3/2"), r("1")]).unwrap();
        assert_eq!(half.rank(), 1);
    }

    #[test]
    fn rank_skips_zero_columns() {
        let m = ExactMatrix::from_int_rows(&[
            vec![0, 1, 0, 2],
            vec![0, 2, 0, 4],
            vec![0, 0, 0, 3],
        ])
        .unwrap();
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn fixed_bounds_enclose() {
        assert_eq!(rat(3, 2).unwrap().fixed_bounds(4), Some((24, 24)));
        assert_eq!(rat(1, 3).unwrap().fixed_bounds(4), Some((5, 6)));
        assert_eq!(rat(-1, 3).unwrap().fixed_bounds(4), Some((-6, -5)));
        let huge = Rational::from(2).pow_int(200).unwrap();
        assert_eq!(huge.fixed_bounds(64), None);
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(rat(7, 2).unwrap().floor(), BigInt::from(3));
        assert_eq!(rat(7, 2).unwrap().ceil(), BigInt::from(4));
        assert_eq!(rat(-7, 2).unwrap().floor(), BigInt::from(-4));
        assert_eq!(rat(-7, 2).unwrap().ceil(), BigInt::from(-3));
        assert_eq!(Rational::from(5).ceil(), BigInt::from(5));
    }
}
