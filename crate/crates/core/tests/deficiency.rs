use num_traits::{One, Zero};
use proptest::prelude::*;

use lzrobust::bitcodes::{BitReader, BitString};
use lzrobust::coder::Coder;
use lzrobust::cutstack::{Log2, Q};
use lzrobust::deficiency::{
    deficiency_curve, martingale_from_code, select_from, select_subset, surrogate_deficiency,
    Candidate, CodedSet, Supermartingale,
};
use lzrobust::lz::Lz78;
use lzrobust::measure::{log2_rational, rational, MeasureOracle};
use lzrobust::sources::{bernoulli_prob, MarkovSource};
use lzrobust::Result;

fn bern(p: Q) -> impl Fn(&[bool]) -> Q {
    move |x: &[bool]| bernoulli_prob(&BitString::from_bits(x.to_vec()), &p)
}

fn words(l: usize) -> impl Iterator<Item = BitString> {
    (0..1u32 << l).map(move |v| (0..l).map(|i| v >> i & 1 == 1).collect())
}

fn extend(x: &BitString, b: bool) -> BitString {
    let mut y = x.clone();
    y.push(b);
    y
}

#[test]
fn lz78_code_gives_a_supermartingale_to_depth_10() {
    for p in [rational(1, 2), rational(1, 5)] {
        let m = martingale_from_code(&Lz78::new(), CodedSet::UpTo(10), bern(p.clone())).unwrap();
        assert!(m.value(&[]) <= Q::one());
        let q1 = &p;
        let q0 = Q::one() - &p;
        for l in 0..10 {
            for x in words(l) {
                let next = m.value(extend(&x, false).bits()) * &q0 + m.value(extend(&x, true).bits()) * q1;
                assert!(m.value(x.bits()) >= next, "p={p} x={x}");
            }
        }
    }
}

#[test]
fn martingale_dominates_the_surrogate() {
    let p = rational(1, 5);
    let lz = Lz78::new();
    let m = martingale_from_code(&lz, CodedSet::UpTo(10), bern(p.clone())).unwrap();
    for l in 1..=10 {
        for x in words(l) {
            let d = -log2_rational(&bernoulli_prob(&x, &p)) - lz.code_len(&x) as f64;
            let log_m = log2_rational(&m.value(x.bits()));
            assert!(log_m >= d - 1e-9, "x={x} log M={log_m} d={d}");
        }
    }
}

/// Writes the word itself; two words where one extends the other collide.
struct Raw;

impl Coder for Raw {
    fn name(&self) -> String {
        "raw".into()
    }
    fn encode(&self, x: &BitString) -> BitString {
        x.clone()
    }
    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        Ok(BitString::from_bits(r.read_bits(r.remaining())?.to_vec()))
    }
}

#[test]
fn codes_that_are_not_prefix_free_are_rejected() {
    assert!(martingale_from_code(&Raw, CodedSet::UpTo(3), bern(rational(1, 2))).is_err());
    // words of a single length are fine
    let m = martingale_from_code(&Raw, CodedSet::Exactly(4), bern(rational(1, 2))).unwrap();
    assert_eq!(m.value(&[]), Q::one());
    assert!(martingale_from_code(&Lz78::new(), CodedSet::UpTo(21), bern(rational(1, 2))).is_err());
}

#[test]
fn selection_keeps_at_least_mu_of_the_mass() {
    let p = rational(1, 5);
    let m = martingale_from_code(&Lz78::new(), CodedSet::UpTo(10), bern(p.clone())).unwrap();
    let mu = rational(1, 2);
    for x in words(3) {
        let a: Vec<BitString> = words(5).map(|t| x.concat(&t)).collect();
        let sel = select_subset(&x, &a, bern(p.clone()), &m, &mu).unwrap();
        assert_eq!(sel.mass, bernoulli_prob(&x, &p));
        assert!(sel.kept_mass >= &mu * &sel.mass, "x={x}");
        let threshold = &sel.threshold;
        for &i in &sel.kept {
            for j in x.len()..=a[i].len() {
                assert!(&m.value(&a[i].bits()[..j]) <= threshold);
            }
        }
    }
}

#[test]
fn selection_rejects_foreign_words_and_bad_mu() {
    struct Flat;
    impl Supermartingale for Flat {
        fn value(&self, _: &[bool]) -> Q {
            Q::one()
        }
    }
    let x: BitString = "01".parse().unwrap();
    let a = vec!["10".parse().unwrap()];
    assert!(select_subset(&x, &a, bern(rational(1, 2)), &Flat, &rational(1, 2)).is_err());
    let a = vec!["011".parse().unwrap()];
    assert!(select_subset(&x, &a, bern(rational(1, 2)), &Flat, &Q::zero()).is_err());
    assert!(select_subset(&x, &a, bern(rational(1, 2)), &Flat, &Q::one()).is_err());
}

#[test]
fn a_spike_is_dropped() {
    let c = |w: &str, v: f64| Candidate {
        word: w.parse().unwrap(),
        prob: Log2(-(w.len() as f64)),
        path: vec![Log2(0.0), Log2(v)],
    };
    let cands = vec![c("00", 0.0), c("01", 5.0), c("10", 0.5), c("11", 0.9)];
    // P(A|x) = 1, so the threshold is M(x) / (1 - mu) = 2
    let sel = select_from(&Log2(0.0), &Log2(0.0), &cands, &rational(1, 2)).unwrap();
    assert_eq!(sel.kept, vec![0, 2, 3]);
    assert!((sel.threshold.0 - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn surrogate_matches_curve_endpoint(bits in prop::collection::vec(prop::bool::weighted(0.3), 1..2000), stride in 1usize..500) {
        let x = BitString::from_bits(bits);
        let src = MarkovSource::bernoulli(rational(3, 10)).unwrap();
        let lz = Lz78::new();
        let curve = deficiency_curve(&x, &src, &lz, stride).unwrap();
        prop_assert_eq!(curve.points.len(), x.len() / stride);
        prop_assume!(!curve.points.is_empty());
        let last = curve.points.last().unwrap();
        let y = x.prefix(last.n);
        prop_assert_eq!(last.n, x.len() / stride * stride);
        let d = surrogate_deficiency(&y, &src, &lz).unwrap();
        prop_assert!((last.deficiency - d).abs() < 1e-6);
        prop_assert!((src.log2_prob(&y).unwrap() + last.neg_log_p).abs() < 1e-6);
        prop_assert_eq!(curve.max().unwrap(), curve.points.iter().map(|p| p.deficiency).fold(f64::MIN, f64::max));
    }
}

#[test]
fn zero_probability_is_an_error() {
    let src = MarkovSource::bernoulli(Q::zero()).unwrap();
    let x: BitString = "0010".parse().unwrap();
    assert!(surrogate_deficiency(&x, &src, &Lz78::new()).is_err());
    assert!(deficiency_curve(&x, &src, &Lz78::new(), 0).is_err());
}
