use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::measure::{log2_add, log2_rational};

/// A commutative semiring of probabilities: exact rationals or base-2 logarithms.
pub trait Weight: Clone + std::fmt::Debug {
    fn zero_weight() -> Self;
    fn one_weight() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// `self / other`, `other` nonzero.
    fn div(&self, other: &Self) -> Self;
    fn from_rational(q: &BigRational) -> Self;
    /// Like `from_rational`, with `log2 q` already known.
    fn from_cached(q: &BigRational, log2: f64) -> Self;
    /// `2^-n`.
    fn half_pow(n: usize) -> Self;
    fn is_zero_weight(&self) -> bool;
    fn scale_int(&self, k: u64) -> Self {
        self.mul(&Self::from_rational(&BigRational::from_integer(BigInt::from(k))))
    }
}

impl Weight for BigRational {
    fn zero_weight() -> Self {
        Zero::zero()
    }
    fn one_weight() -> Self {
        One::one()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn from_rational(q: &BigRational) -> Self {
        q.clone()
    }
    fn from_cached(q: &BigRational, _log2: f64) -> Self {
        q.clone()
    }
    fn half_pow(n: usize) -> Self {
        BigRational::new(BigInt::one(), BigInt::one() << n)
    }
    fn is_zero_weight(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// A probability stored as its base-2 logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Log2(pub f64);

impl Weight for Log2 {
    fn zero_weight() -> Self {
        Log2(f64::NEG_INFINITY)
    }
    fn one_weight() -> Self {
        Log2(0.0)
    }
    fn add(&self, other: &Self) -> Self {
        Log2(log2_add(self.0, other.0))
    }
    fn mul(&self, other: &Self) -> Self {
        Log2(self.0 + other.0)
    }
    fn div(&self, other: &Self) -> Self {
        Log2(self.0 - other.0)
    }
    fn from_rational(q: &BigRational) -> Self {
        Log2(log2_rational(q))
    }
    fn from_cached(_q: &BigRational, log2: f64) -> Self {
        Log2(log2)
    }
    fn half_pow(n: usize) -> Self {
        Log2(-(n as f64))
    }
    fn is_zero_weight(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
    fn scale_int(&self, k: u64) -> Self {
        if k == 0 {
            Log2(f64::NEG_INFINITY)
        } else {
            Log2(self.0 + (k as f64).log2())
        }
    }
}
