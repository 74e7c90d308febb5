use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::bitcodes::BitString;
use crate::error::Result;

/// A computable probability measure on binary words.
pub trait MeasureOracle {
    /// Rational approximation of `P(x)` within `eps`.
    fn prob(&self, x: &BitString, eps: &BigRational) -> Result<BigRational>;

    /// `log2 P(x)`, `-inf` for probability zero.
    fn log2_prob(&self, x: &BitString) -> Result<f64>;

    /// `log2 P(x[..n])` for each `n` in `checkpoints`.
    fn log2_prefix_probs(&self, x: &BitString, checkpoints: &[usize]) -> Result<Vec<f64>> {
        checkpoints
            .iter()
            .map(|&n| self.log2_prob(&x.prefix(n)))
            .collect()
    }
}

/// `log2` of a positive rational, accurate for values far outside the f64 range.
pub fn log2_rational(q: &BigRational) -> f64 {
    if q.is_zero() {
        return f64::NEG_INFINITY;
    }
    assert!(q.is_positive(), "log of a negative number");
    log2_bigint(q.numer()) - log2_bigint(q.denom())
}

pub fn log2_bigint(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().expect("finite").log2();
    }
    let shift = bits - 64;
    let top: BigInt = v >> shift;
    top.to_f64().expect("finite").log2() + shift as f64
}

/// Smallest integer `l` with `2^l >= 1/q`, for `0 < q <= 1`.
pub fn ceil_neg_log2(q: &BigRational) -> u64 {
    assert!(q.is_positive() && q <= &BigRational::one());
    let (n, d) = (q.numer(), q.denom());
    let guess = d.bits().saturating_sub(n.bits());
    let mut l = guess.saturating_sub(1);
    while (n << l) < *d {
        l += 1;
    }
    l
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"num/den"` or an integer string.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || crate::Error::Config(format!("not a rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| bad())?;
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            if b.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(a, b))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn format_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    sign * 2f64.powf(log2_rational(&q.abs()))
}

/// `log2(2^a + 2^b)`.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log_examples() {
        assert_eq!(ceil_neg_log2(&rational(1, 1)), 0);
        assert_eq!(ceil_neg_log2(&rational(1, 2)), 1);
        assert_eq!(ceil_neg_log2(&rational(3, 8)), 2);
        assert_eq!(ceil_neg_log2(&rational(1, 8)), 3);
        assert_eq!(ceil_neg_log2(&rational(1, 9)), 4);
    }

    #[test]
    fn huge_logs() {
        let q = BigRational::new(BigInt::one(), BigInt::one() << 5000usize);
        assert!((log2_rational(&q) + 5000.0).abs() < 1e-9);
        assert_eq!(parse_rational("3/12").unwrap(), rational(1, 4));
        assert_eq!(format_rational(&rational(2, 4)), "1/2");
        assert!(parse_rational("1/0").is_err());
    }
}
