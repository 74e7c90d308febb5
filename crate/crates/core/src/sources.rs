//! Bernoulli and finite-order Markov sources with exact word probabilities.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitcodes::BitString;
use crate::coder::{ratio_curve, ratio_f64, Coder, RatioCurve};
use crate::error::{Error, Result};
use crate::lz::{BlockCoder, Lz78};
use crate::measure::{format_rational, log2_rational, parse_rational, to_f64, MeasureOracle};

/// Stationary Markov chain of order `k` over {0,1}.
///
/// Contexts are the last `k` symbols, oldest first, read as a big-endian integer.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSource {
    order: usize,
    /// Probability that the next symbol is 1, per context.
    p_one: Vec<BigRational>,
    stationary: Vec<BigRational>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovFile {
    pub order: usize,
    /// Context string (oldest symbol first) to `[P(0|ctx), P(1|ctx)]`.
    pub rows: BTreeMap<String, [String; 2]>,
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

impl MarkovSource {
    pub fn new(order: usize, p_one: Vec<BigRational>) -> Result<Self> {
        if order > 16 {
            return Err(Error::InvalidArgument("order above 16 not supported".into()));
        }
        if p_one.len() != 1 << order {
            return Err(Error::InvalidArgument(format!(
                "order {order} needs {} rows, got {}",
                1 << order,
                p_one.len()
            )));
        }
        if p_one
            .iter()
            .any(|p| p.is_negative() || p > &BigRational::one())
        {
            return Err(Error::InvalidArgument("transition probability outside [0,1]".into()));
        }
        let stationary = stationary_vector(order, &p_one)?;
        Ok(MarkovSource {
            order,
            p_one,
            stationary,
        })
    }

    pub fn bernoulli(p: BigRational) -> Result<Self> {
        Self::new(0, vec![p])
    }

    /// Symmetric chain that flips the previous symbol with probability `p`.
    pub fn flip(p: BigRational) -> Result<Self> {
        let stay = BigRational::one() - &p;
        Self::new(1, vec![p, stay])
    }

    pub fn from_file(f: &MarkovFile) -> Result<Self> {
        let mut p_one = vec![None; 1 << f.order];
        for (ctx, [p0, p1]) in &f.rows {
            if ctx.len() != f.order {
                return Err(Error::Config(format!("context {ctx:?} has wrong length")));
            }
            let c = if f.order == 0 {
                0
            } else {
                usize::from_str_radix(ctx, 2)
                    .map_err(|_| Error::Config(format!("bad context {ctx:?}")))?
            };
            let (p0, p1) = (parse_rational(p0)?, parse_rational(p1)?);
            if &p0 + &p1 != BigRational::one() {
                return Err(Error::Config(format!("row {ctx:?} does not sum to 1")));
            }
            p_one[c] = Some(p1);
        }
        let p_one = p_one
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Config("missing context rows".into()))?;
        Self::new(f.order, p_one)
    }

    pub fn to_file(&self) -> MarkovFile {
        let rows = self
            .p_one
            .iter()
            .enumerate()
            .map(|(c, p)| {
                let ctx = if self.order == 0 {
                    String::new()
                } else {
                    format!("{c:0width$b}", width = self.order)
                };
                let p0 = BigRational::one() - p;
                (ctx, [format_rational(&p0), format_rational(p)])
            })
            .collect();
        MarkovFile {
            order: self.order,
            rows,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stationary(&self) -> &[BigRational] {
        &self.stationary
    }

    pub fn p_one(&self) -> &[BigRational] {
        &self.p_one
    }

    fn mask(&self) -> usize {
        (1 << self.order) - 1
    }

    fn transition(&self, ctx: usize, b: bool) -> BigRational {
        if b {
            self.p_one[ctx].clone()
        } else {
            BigRational::one() - &self.p_one[ctx]
        }
    }

    /// Exact stationary probability of the word.
    pub fn prob(&self, x: &BitString) -> BigRational {
        let k = self.order;
        let bits = x.bits();
        if bits.len() < k {
            let head = bits.iter().fold(0usize, |a, &b| (a << 1) | b as usize);
            let free = k - bits.len();
            return (0..1usize << free)
                .map(|tail| &self.stationary[(head << free) | tail])
                .fold(BigRational::zero(), |a, b| a + b);
        }
        let mut ctx = bits[..k].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
        let mut p = self.stationary[ctx].clone();
        for &b in &bits[k..] {
            p *= self.transition(ctx, b);
            ctx = ((ctx << 1) | b as usize) & self.mask();
        }
        p
    }

    pub fn log2_prob_f64(&self, x: &BitString) -> f64 {
        let k = self.order;
        let bits = x.bits();
        if bits.len() < k {
            return log2_rational(&self.prob(x));
        }
        let logs: Vec<[f64; 2]> = self
            .p_one
            .iter()
            .map(|p| {
                let q = BigRational::one() - p;
                [log2_rational(&q), log2_rational(p)]
            })
            .collect();
        let mut ctx = bits[..k].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
        let mut l = log2_rational(&self.stationary[ctx]);
        for &b in &bits[k..] {
            l += logs[ctx][b as usize];
            ctx = ((ctx << 1) | b as usize) & self.mask();
        }
        l
    }

    pub fn entropy_rate(&self) -> f64 {
        self.stationary
            .iter()
            .zip(&self.p_one)
            .map(|(pi, p)| to_f64(pi) * binary_entropy(to_f64(p)))
            .sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> BitString {
        let k = self.order;
        let pi: Vec<f64> = self.stationary.iter().map(to_f64).collect();
        let p1: Vec<f64> = self.p_one.iter().map(to_f64).collect();
        let mut out = BitString::with_capacity(n);
        let mut u: f64 = rng.gen();
        let mut ctx = pi.len() - 1;
        for (c, &w) in pi.iter().enumerate() {
            if u < w {
                ctx = c;
                break;
            }
            u -= w;
        }
        for i in (0..k).rev() {
            if out.len() < n {
                out.push((ctx >> i) & 1 == 1);
            }
        }
        while out.len() < n {
            let b = rng.gen::<f64>() < p1[ctx];
            out.push(b);
            ctx = ((ctx << 1) | b as usize) & self.mask();
        }
        out
    }
}

impl MeasureOracle for MarkovSource {
    fn prob(&self, x: &BitString, _eps: &BigRational) -> Result<BigRational> {
        Ok(MarkovSource::prob(self, x))
    }

    fn log2_prob(&self, x: &BitString) -> Result<f64> {
        Ok(self.log2_prob_f64(x))
    }

    fn log2_prefix_probs(&self, x: &BitString, checkpoints: &[usize]) -> Result<Vec<f64>> {
        let k = self.order;
        let bits = x.bits();
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut cps = checkpoints.iter().peekable();
        while let Some(&&n) = cps.peek() {
            if n > k || n > bits.len() {
                break;
            }
            out.push(self.log2_prob_f64(&x.prefix(n)));
            cps.next();
        }
        if cps.peek().is_none() {
            return Ok(out);
        }
        let mut ctx = bits[..k].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
        let mut l = log2_rational(&self.stationary[ctx]);
        let logs: Vec<[f64; 2]> = self
            .p_one
            .iter()
            .map(|p| [log2_rational(&(BigRational::one() - p)), log2_rational(p)])
            .collect();
        for (i, &b) in bits.iter().enumerate().skip(k) {
            l += logs[ctx][b as usize];
            ctx = ((ctx << 1) | b as usize) & self.mask();
            while cps.peek() == Some(&&(i + 1)) {
                out.push(l);
                cps.next();
            }
        }
        Ok(out)
    }
}

pub fn bernoulli_prob(x: &BitString, p: &BigRational) -> BigRational {
    let ones = x.count_ones();
    let q = BigRational::one() - p;
    num_traits::pow(p.clone(), ones) * num_traits::pow(q, x.len() - ones)
}

/// Solves `pi P = pi`, `sum pi = 1` exactly over the `2^k` contexts.
fn stationary_vector(order: usize, p_one: &[BigRational]) -> Result<Vec<BigRational>> {
    let m = 1usize << order;
    let mask = m - 1;
    // rows of (P^T - I), last row replaced by the normalisation
    let mut a = vec![vec![BigRational::zero(); m + 1]; m];
    for c in 0..m {
        for b in [false, true] {
            let next = ((c << 1) | b as usize) & mask;
            let p = if b {
                p_one[c].clone()
            } else {
                BigRational::one() - &p_one[c]
            };
            a[next][c] += p;
        }
        a[c][c] -= BigRational::one();
    }
    a[m - 1].fill(BigRational::one());
    for col in 0..m {
        let pivot = (col..m)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::InvalidArgument("chain has no unique stationary law".into()))?;
        a.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..m {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *v -= &f * pv;
                }
            }
        }
    }
    let pi: Vec<BigRational> = a.into_iter().map(|row| row[m].clone()).collect();
    if pi.iter().any(|p| p.is_negative()) {
        return Err(Error::InvalidArgument("negative stationary mass".into()));
    }
    Ok(pi)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockResult {
    pub block: usize,
    pub final_ratio: f64,
    #[serde(skip)]
    pub curve: RatioCurve,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub entropy: f64,
    pub n: usize,
    pub coder: String,
    pub final_ratio: f64,
    pub blocks: Vec<BlockResult>,
    /// Block limits strictly decrease along the listed block lengths.
    pub blocks_decreasing: bool,
    #[serde(skip)]
    pub curve: RatioCurve,
}

/// Full-sequence and block-LZ78 ratio curves on one sampled sequence.
pub fn robustness_experiment<C: Coder + ?Sized>(
    source: &MarkovSource,
    x: &BitString,
    coder: &C,
    blocks: &[usize],
    stride: usize,
) -> Result<RobustnessReport> {
    let curve = ratio_curve(coder, x, stride)?;
    let final_ratio = ratio_f64(crate::coder::compression_ratio(coder, x)?);
    let mut results = Vec::new();
    for &nb in blocks {
        let bc = BlockCoder::new(nb, Lz78::new());
        let c = ratio_curve(&bc, x, stride)?;
        results.push(BlockResult {
            block: nb,
            final_ratio: ratio_f64(crate::coder::compression_ratio(&bc, x)?),
            curve: c,
        });
    }
    let blocks_decreasing = results
        .windows(2)
        .all(|w| w[1].final_ratio < w[0].final_ratio);
    Ok(RobustnessReport {
        entropy: source.entropy_rate(),
        n: x.len(),
        coder: coder.name(),
        final_ratio,
        blocks: results,
        blocks_decreasing,
        curve,
    })
}
