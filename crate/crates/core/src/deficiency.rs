//! Code-length surrogates for randomness deficiency, supermartingales built from
//! codes, and the bounded-increase subset selection.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::bitcodes::BitString;
use crate::coder::{stride_checkpoints, Coder};
use crate::cutstack::{Weight, Q};
use crate::error::{Error, Result};
use crate::measure::MeasureOracle;

/// `-log2 P(x) - L(x)`.
pub fn surrogate_deficiency<M, C>(x: &BitString, p: &M, code: &C) -> Result<f64>
where
    M: MeasureOracle + ?Sized,
    C: Coder + ?Sized,
{
    let lp = p.log2_prob(x)?;
    if lp == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability(x.len()));
    }
    Ok(-lp - code.code_len(x) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficiencyPoint {
    pub n: usize,
    pub neg_log_p: f64,
    pub code_bits: u64,
    pub deficiency: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeficiencyCurve {
    pub points: Vec<DeficiencyPoint>,
}

impl DeficiencyCurve {
    pub fn from_parts(checkpoints: &[usize], log_p: &[f64], bits: &[u64]) -> Self {
        let points = checkpoints
            .iter()
            .zip(log_p)
            .zip(bits)
            .map(|((&n, &lp), &b)| DeficiencyPoint {
                n,
                neg_log_p: -lp,
                code_bits: b,
                deficiency: -lp - b as f64,
            })
            .collect();
        DeficiencyCurve { points }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,neg_log_p,code_bits,deficiency\n");
        for p in &self.points {
            s += &format!("{},{:.6},{},{:.6}\n", p.n, p.neg_log_p, p.code_bits, p.deficiency);
        }
        s
    }

    pub fn max(&self) -> Option<f64> {
        self.points.iter().map(|p| p.deficiency).reduce(f64::max)
    }
}

/// Surrogate deficiency at prefix lengths `stride, 2*stride, ...` up to `l(omega)`.
pub fn deficiency_curve<M, C>(omega: &BitString, p: &M, code: &C, stride: usize) -> Result<DeficiencyCurve>
where
    M: MeasureOracle + ?Sized,
    C: Coder + ?Sized,
{
    if omega.is_empty() || stride == 0 {
        return Err(Error::InvalidArgument("empty sequence or zero stride".into()));
    }
    let cps = stride_checkpoints(omega.len(), stride);
    let lp = p.log2_prefix_probs(omega, &cps)?;
    if let Some(i) = lp.iter().position(|&l| l == f64::NEG_INFINITY) {
        return Err(Error::ZeroProbability(cps[i]));
    }
    let bits = code.prefix_code_lens(omega, &cps);
    Ok(DeficiencyCurve::from_parts(&cps, &lp, &bits))
}

/// A nonnegative function on words with `M(x) >= M(x0) P(0|x) + M(x1) P(1|x)`.
pub trait Supermartingale {
    fn value(&self, x: &[bool]) -> Q;
}

/// Which source words contribute their codewords to `Q(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodedSet {
    /// Every word of length at most `d`.
    UpTo(usize),
    /// Every word of length exactly `n`.
    Exactly(usize),
}

impl CodedSet {
    fn horizon(self) -> usize {
        match self {
            CodedSet::UpTo(d) | CodedSet::Exactly(d) => d,
        }
    }
}

fn node_index(x: &[bool]) -> usize {
    (1usize << x.len()) - 1 + x.iter().fold(0usize, |a, &b| (a << 1) | b as usize)
}

fn word_of(len: usize, v: usize) -> BitString {
    (0..len).rev().map(|i| (v >> i) & 1 == 1).collect()
}

/// `M(x) = Q(x) / P(x)` with `Q(x) = sum 2^{-l(code(y))}` over coded words `y` extending `x`.
pub struct CodeMartingale<F> {
    set: CodedSet,
    qhat: Vec<Q>,
    p: F,
}

impl<F: Fn(&[bool]) -> Q> CodeMartingale<F> {
    pub fn set(&self) -> CodedSet {
        self.set
    }

    pub fn horizon(&self) -> usize {
        self.set.horizon()
    }

    /// `Q(x)`, for `l(x)` up to the horizon.
    pub fn q(&self, x: &[bool]) -> Q {
        self.qhat[node_index(x)].clone()
    }
}

impl<F: Fn(&[bool]) -> Q> Supermartingale for CodeMartingale<F> {
    fn value(&self, x: &[bool]) -> Q {
        let p = (self.p)(x);
        if p.is_zero() {
            return Q::zero();
        }
        self.q(x) / p
    }
}

/// Builds the code supermartingale over the words of `set`; rejects codes that are not prefix-free there.
pub fn martingale_from_code<C, F>(code: &C, set: CodedSet, p: F) -> Result<CodeMartingale<F>>
where
    C: Coder + ?Sized,
    F: Fn(&[bool]) -> Q,
{
    let d = set.horizon();
    if d > 20 {
        return Err(Error::InvalidArgument("horizon above 20".into()));
    }
    let mut codewords = Vec::new();
    let mut own = vec![Q::zero(); (1usize << (d + 1)) - 1];
    for len in 0..=d {
        if matches!(set, CodedSet::Exactly(n) if n != len) {
            continue;
        }
        for v in 0..1usize << len {
            let w = word_of(len, v);
            let c = code.encode(&w);
            own[node_index(w.bits())] = Q::new(BigInt::one(), BigInt::one() << c.len());
            codewords.push(c);
        }
    }
    codewords.sort_by(|a, b| a.bits().cmp(b.bits()));
    if let Some(pair) = codewords.windows(2).find(|w| w[0].is_prefix_of(&w[1])) {
        return Err(Error::InvalidArgument(format!(
            "code is not prefix-free: {} is a prefix of {}",
            pair[0], pair[1]
        )));
    }
    let mut qhat = own;
    for len in (0..d).rev() {
        for v in 0..1usize << len {
            let i = (1usize << len) - 1 + v;
            let c0 = (1usize << (len + 1)) - 1 + 2 * v;
            let sum = &qhat[c0] + &qhat[c0 + 1];
            qhat[i] += sum;
        }
    }
    Ok(CodeMartingale { set, qhat, p })
}

/// A candidate member of the set handed to [`select_from`].
#[derive(Debug, Clone)]
pub struct Candidate<W> {
    pub word: BitString,
    pub prob: W,
    /// Martingale values at the checked prefixes of `word` (lengths from `l(x)` on).
    pub path: Vec<W>,
}

#[derive(Debug, Clone)]
pub struct Selection<W> {
    /// Indices of the kept candidates.
    pub kept: Vec<usize>,
    /// `M(x) / ((1 - mu) P(A|x))`.
    pub threshold: W,
    /// `P(A)`, summed over the minimal members.
    pub mass: W,
    pub kept_mass: W,
}

/// Indices of members not extending another member (first copy of duplicates).
fn minimal<W>(cands: &[Candidate<W>], subset: &[usize]) -> Vec<usize> {
    subset
        .iter()
        .copied()
        .filter(|&i| {
            !subset.iter().any(|&j| {
                j != i
                    && cands[j].word.is_prefix_of(&cands[i].word)
                    && (cands[j].word.len() < cands[i].word.len() || j < i)
            })
        })
        .collect()
}

fn mass_of<W: Weight>(cands: &[Candidate<W>], subset: &[usize]) -> W {
    minimal(cands, subset)
        .into_iter()
        .fold(W::zero_weight(), |acc, i| acc.add(&cands[i].prob))
}

/// Drops every candidate with a checked prefix whose martingale value exceeds
/// `M(x) / ((1 - mu) P(A|x))`.
pub fn select_from<W: Weight + PartialOrd>(
    x_prob: &W,
    x_value: &W,
    cands: &[Candidate<W>],
    mu: &Q,
) -> Result<Selection<W>> {
    if !mu.is_positive() || mu >= &Q::one() {
        return Err(Error::InvalidArgument("mu must lie in (0, 1)".into()));
    }
    let all: Vec<usize> = (0..cands.len()).collect();
    let mass = mass_of(cands, &all);
    if mass.is_zero_weight() {
        return Err(Error::ZeroProbability(0));
    }
    let cond = mass.div(x_prob);
    let threshold = x_value.div(&W::from_rational(&(Q::one() - mu)).mul(&cond));
    let kept: Vec<usize> = all
        .into_iter()
        .filter(|&i| cands[i].path.iter().all(|v| v <= &threshold))
        .collect();
    let kept_mass = mass_of(cands, &kept);
    Ok(Selection {
        kept,
        threshold,
        mass,
        kept_mass,
    })
}

/// [`select_from`] with every prefix `y^j`, `l(x) <= j <= l(y)`, checked in exact arithmetic.
pub fn select_subset<P, M>(x: &BitString, a: &[BitString], p: P, m: &M, mu: &Q) -> Result<Selection<Q>>
where
    P: Fn(&[bool]) -> Q,
    M: Supermartingale + ?Sized,
{
    let cands = a
        .iter()
        .map(|y| {
            if !x.is_prefix_of(y) {
                return Err(Error::InvalidArgument(format!("{y} does not extend {x}")));
            }
            Ok(Candidate {
                word: y.clone(),
                prob: p(y.bits()),
                path: (x.len()..=y.len()).map(|j| m.value(&y.bits()[..j])).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    select_from(&p(x.bits()), &m.value(x.bits()), &cands, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coder::VerbatimCoder;
    use crate::lz::Lz78;
    use crate::measure::rational;

    fn fair(x: &[bool]) -> Q {
        Q::new(BigInt::one(), BigInt::one() << x.len())
    }

    #[test]
    fn verbatim_martingale_is_constant() {
        let code = VerbatimCoder { header_bits: 7 };
        let m = martingale_from_code(&code, CodedSet::Exactly(6), fair).unwrap();
        let expect = Q::new(BigInt::one(), BigInt::one() << 7);
        for len in 0..=6 {
            for v in 0..1usize << len {
                assert_eq!(m.value(word_of(len, v).bits()), expect);
            }
        }
    }

    #[test]
    fn lz78_martingale_inequality() {
        let m = martingale_from_code(&Lz78::new(), CodedSet::UpTo(8), fair).unwrap();
        assert!(m.value(&[]) <= Q::one());
        for len in 0..8 {
            for v in 0..1usize << len {
                let x = word_of(len, v);
                let mut x0 = x.clone();
                x0.push(false);
                let mut x1 = x.clone();
                x1.push(true);
                let half = rational(1, 2);
                let next = m.value(x0.bits()) * &half + m.value(x1.bits()) * &half;
                assert!(m.value(x.bits()) >= next);
            }
        }
    }

    #[test]
    fn constant_martingale_keeps_everything() {
        struct One;
        impl Supermartingale for One {
            fn value(&self, _: &[bool]) -> Q {
                Q::one()
            }
        }
        let x: BitString = "0".parse().unwrap();
        let a: Vec<BitString> = ["00", "011", "0101"].iter().map(|s| s.parse().unwrap()).collect();
        let sel = select_subset(&x, &a, fair, &One, &rational(1, 2)).unwrap();
        assert_eq!(sel.kept, vec![0, 1, 2]);
    }
}
