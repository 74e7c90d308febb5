//! Krichevsky-Trofimov estimators, their mixture over Markov orders, and the code built on it.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::bitcodes::{int_code_len, write_int, BitReader, BitString};
use crate::coder::Coder;
use crate::error::{Error, Result};
use crate::measure::{ceil_neg_log2, log2_add, MeasureOracle};

/// Sequential add-half estimator for one Markov order.
#[derive(Debug, Clone)]
pub struct KtEstimator {
    order: usize,
    counts: HashMap<u64, [u64; 2]>,
    history: u64,
    seen: usize,
}

impl KtEstimator {
    pub fn new(order: usize) -> Self {
        assert!(order < 64, "orders up to 63 supported");
        KtEstimator {
            order,
            counts: HashMap::new(),
            history: 0,
            seen: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn context(&self) -> Option<u64> {
        (self.seen >= self.order).then(|| {
            if self.order == 0 {
                0
            } else {
                self.history & ((1u64 << self.order) - 1)
            }
        })
    }

    /// Probability of the next symbol as `(numerator, denominator)`.
    pub fn predict(&self, b: bool) -> (u64, u64) {
        match self.context() {
            None => (1, 2),
            Some(c) => {
                let [z, o] = self.counts.get(&c).copied().unwrap_or([0, 0]);
                let hit = if b { o } else { z };
                (2 * hit + 1, 2 * (z + o + 1))
            }
        }
    }

    pub fn update(&mut self, b: bool) {
        if let Some(c) = self.context() {
            self.counts.entry(c).or_insert([0, 0])[b as usize] += 1;
        }
        self.history = (self.history << 1) | b as u64;
        self.seen += 1;
    }
}

/// Exact KT probability of `x` under order `k`; the first `k` symbols get 1/2 each.
pub fn kt_prob(x: &BitString, k: usize) -> BigRational {
    let mut est = KtEstimator::new(k);
    let (mut num, mut den) = (BigUint::one(), BigUint::one());
    for &b in x.bits() {
        let (p, q) = est.predict(b);
        num *= p;
        den *= q;
        est.update(b);
    }
    BigRational::new(num.into(), den.into())
}

/// Integer weight table: `round(2^24 / ((k+2) log2(k+2)^2))`.
fn raw_weight(k: usize) -> u64 {
    let m = (k + 2) as f64;
    ((1u64 << 24) as f64 / (m * m.log2() * m.log2())).round() as u64
}

/// Mixture of KT estimators over orders `0..=kmax`.
#[derive(Debug, Clone)]
pub struct MixtureMeasure {
    kmax: usize,
    weights: Vec<BigRational>,
    log2_weights: Vec<f64>,
}

impl MixtureMeasure {
    pub fn new(kmax: usize) -> Self {
        let raw: Vec<u64> = (0..=kmax).map(raw_weight).collect();
        let total: u64 = raw.iter().sum();
        let weights: Vec<BigRational> = raw
            .iter()
            .map(|&w| BigRational::new(BigInt::from(w), BigInt::from(total)))
            .collect();
        let log2_weights = raw
            .iter()
            .map(|&w| (w as f64).log2() - (total as f64).log2())
            .collect();
        MixtureMeasure {
            kmax,
            weights,
            log2_weights,
        }
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn prob_exact(&self, x: &BitString) -> BigRational {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * kt_prob(x, k))
            .fold(BigRational::zero(), |a, b| a + b)
    }

    /// `rho(x b) / rho(x)`.
    pub fn pred(&self, x: &BitString, b: bool) -> BigRational {
        let mut xb = x.clone();
        xb.push(b);
        self.prob_exact(&xb) / self.prob_exact(x)
    }

    /// `log2 rho(x[..n])` for every `n` in `checkpoints`, by streaming in f64.
    pub fn log2_prefix_probs(&self, x: &BitString, checkpoints: &[usize]) -> Vec<f64> {
        let mut ests: Vec<KtEstimator> = (0..=self.kmax).map(KtEstimator::new).collect();
        let mut logs = vec![0f64; self.kmax + 1];
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut cps = checkpoints.iter().copied().peekable();
        let mix = |logs: &[f64]| {
            logs.iter()
                .zip(&self.log2_weights)
                .fold(f64::NEG_INFINITY, |acc, (l, w)| log2_add(acc, l + w))
        };
        for t in 0..=x.len() {
            while cps.peek() == Some(&t) {
                out.push(mix(&logs));
                cps.next();
            }
            if t == x.len() {
                break;
            }
            let b = x[t];
            for (est, l) in ests.iter_mut().zip(logs.iter_mut()) {
                let (p, q) = est.predict(b);
                *l += (p as f64).log2() - (q as f64).log2();
                est.update(b);
            }
        }
        assert!(cps.next().is_none(), "checkpoints must be ascending and <= len");
        out
    }

    /// Ideal code length `ceil(-log2 rho(x)) + 1`, exact.
    pub fn code_len(&self, x: &BitString) -> u64 {
        ceil_neg_log2(&self.prob_exact(x)) + 1
    }
}

impl MeasureOracle for MixtureMeasure {
    fn prob(&self, x: &BitString, _eps: &BigRational) -> Result<BigRational> {
        Ok(self.prob_exact(x))
    }

    fn log2_prob(&self, x: &BitString) -> Result<f64> {
        Ok(self.log2_prefix_probs(x, &[x.len()])[0])
    }
}

/// Exact running state of every order: `rho_k = num/den`, cumulative `F_k = cum/den`.
struct ExactRun<'a> {
    mix: &'a MixtureMeasure,
    ests: Vec<KtEstimator>,
    num: Vec<BigUint>,
    den: Vec<BigUint>,
    cum: Vec<BigUint>,
}

impl<'a> ExactRun<'a> {
    fn new(mix: &'a MixtureMeasure) -> Self {
        let m = mix.kmax + 1;
        ExactRun {
            mix,
            ests: (0..m).map(KtEstimator::new).collect(),
            num: vec![BigUint::one(); m],
            den: vec![BigUint::one(); m],
            cum: vec![BigUint::zero(); m],
        }
    }

    fn combine(&self, parts: impl Iterator<Item = (BigUint, BigUint)>) -> BigRational {
        parts
            .zip(&self.mix.weights)
            .map(|((n, d), w)| w * BigRational::new(n.into(), d.into()))
            .fold(BigRational::zero(), |a, b| a + b)
    }

    /// `F(x) + rho(x0)`: the boundary between the two children of the current prefix.
    fn split(&self) -> BigRational {
        self.combine((0..self.ests.len()).map(|k| {
            let (p, q) = self.ests[k].predict(false);
            (&self.cum[k] * q + &self.num[k] * p, &self.den[k] * q)
        }))
    }

    fn push(&mut self, b: bool) {
        for k in 0..self.ests.len() {
            let (p0, q) = self.ests[k].predict(false);
            let (p1, _) = self.ests[k].predict(b);
            self.cum[k] *= q;
            if b {
                self.cum[k] += &self.num[k] * p0;
            }
            self.num[k] *= p1;
            self.den[k] *= q;
            self.ests[k].update(b);
        }
    }

    fn low_and_prob(&self) -> (BigRational, BigRational) {
        let low = self.combine(
            self.cum
                .iter()
                .zip(&self.den)
                .map(|(c, d)| (c.clone(), d.clone())),
        );
        let p = self.combine(
            self.num
                .iter()
                .zip(&self.den)
                .map(|(n, d)| (n.clone(), d.clone())),
        );
        (low, p)
    }
}

/// Shannon-Fano-Elias code over the mixture measure, behind a length header.
#[derive(Debug, Clone)]
pub struct MixtureCoder {
    pub measure: MixtureMeasure,
}

impl MixtureCoder {
    pub fn new(kmax: usize) -> Self {
        MixtureCoder {
            measure: MixtureMeasure::new(kmax),
        }
    }

    /// The body of the codeword (without the length header).
    pub fn encode_body(&self, x: &BitString) -> BitString {
        let mut run = ExactRun::new(&self.measure);
        for &b in x.bits() {
            run.push(b);
        }
        let (low, p) = run.low_and_prob();
        let l = ceil_neg_log2(&p) + 1;
        let mid = low + p / BigInt::from(2);
        let scaled = (mid * BigRational::from_integer(BigInt::one() << l as usize)).floor();
        let v = scaled.to_integer();
        let mut out = BitString::with_capacity(l as usize);
        for i in (0..l).rev() {
            out.push(v.bit(i));
        }
        out
    }

    pub fn decode_body(&self, r: &mut BitReader<'_>, n: usize) -> Result<BitString> {
        let start = r.position();
        let mut run = ExactRun::new(&self.measure);
        let mut x = BitString::with_capacity(n);
        // value read so far: w / 2^m
        let mut w = BigInt::zero();
        let mut m = 0usize;
        let mut peek = r.clone();
        while x.len() < n {
            let split = run.split();
            loop {
                let scale = BigRational::from_integer(BigInt::one() << m);
                let lo = BigRational::from_integer(w.clone()) / &scale;
                let hi = BigRational::from_integer(&w + 1) / &scale;
                if split <= lo {
                    x.push(true);
                    run.push(true);
                    break;
                }
                if split >= hi {
                    x.push(false);
                    run.push(false);
                    break;
                }
                w = (w << 1) + peek.read_bit()? as u8;
                m += 1;
            }
        }
        let (_, p) = run.low_and_prob();
        let l = (ceil_neg_log2(&p) + 1) as usize;
        if m > l {
            return Err(Error::Malformed("mixture codeword longer than its length bound".into()));
        }
        r.read_bits(l)?;
        debug_assert_eq!(r.position(), start + l);
        Ok(x)
    }
}

impl Coder for MixtureCoder {
    fn name(&self) -> String {
        "mixture".into()
    }

    fn encode(&self, x: &BitString) -> BitString {
        let mut out = BitString::new();
        write_int(&mut out, x.len() as u64 + 1).expect("positive");
        out.append(&self.encode_body(x));
        out
    }

    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        let n = r.read_int()? - 1;
        let n = n.to_usize().ok_or_else(|| Error::Malformed("length overflow".into()))?;
        self.decode_body(r, n)
    }

    fn code_len(&self, x: &BitString) -> u64 {
        int_code_len(x.len() as u64 + 1) as u64 + self.measure.code_len(x)
    }

    /// Ideal lengths from the streaming estimate; equal to `code_len` except when
    /// `-log2 rho` lies within f64 rounding of an integer.
    fn prefix_code_lens(&self, x: &BitString, checkpoints: &[usize]) -> Vec<u64> {
        self.measure
            .log2_prefix_probs(x, checkpoints)
            .iter()
            .zip(checkpoints)
            .map(|(&l, &n)| int_code_len(n as u64 + 1) as u64 + (-l).ceil().max(0.0) as u64 + 1)
            .collect()
    }
}

/// `(1/t) log2(mu(x) / rho(x))`.
pub fn forecast_error<M: MeasureOracle + ?Sized>(
    x: &BitString,
    mu: &M,
    rho: &MixtureMeasure,
) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("forecast error of the empty word".into()));
    }
    let lm = mu.log2_prob(x)?;
    if lm == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability(x.len()));
    }
    Ok((lm - rho.log2_prob(x)?) / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::rational;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn kt_examples() {
        assert_eq!(kt_prob(&bs("0"), 0), rational(1, 2));
        assert_eq!(kt_prob(&bs("00"), 0), rational(3, 8));
        assert_eq!(kt_prob(&bs("01"), 0), rational(1, 8));
        assert_eq!(kt_prob(&bs(""), 3), rational(1, 1));
        // bootstrap symbols then the order-1 context "1" seen once before a 1
        assert_eq!(kt_prob(&bs("11"), 1), rational(1, 2) * rational(1, 2));
    }

    #[test]
    fn empty_word_has_probability_one() {
        assert_eq!(MixtureMeasure::new(8).prob_exact(&BitString::new()), rational(1, 1));
    }

    #[test]
    fn streaming_matches_exact() {
        let m = MixtureMeasure::new(4);
        let x = bs("0110100110010110100101100110100100010111");
        let cps: Vec<usize> = (0..=x.len()).collect();
        let fast = m.log2_prefix_probs(&x, &cps);
        for (&n, &f) in cps.iter().zip(&fast) {
            let exact = crate::measure::log2_rational(&m.prob_exact(&x.prefix(n)));
            assert!((f - exact).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn forecast_error_against_itself_is_zero() {
        let m = MixtureMeasure::new(8);
        let x = bs("011010011001011010010110");
        assert_eq!(forecast_error(&x, &m, &m).unwrap(), 0.0);
    }
}
