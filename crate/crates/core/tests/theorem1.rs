use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lzrobust::cutstack::Q;
use lzrobust::measure::{to_f64, MeasureOracle};
use lzrobust::theorem1::{
    build_alpha, delta_mass, AlphaOptions, Construction, ConstructionParams, Mode, SegmentKind,
};
use lzrobust::BitString;

fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn faithful(stages: usize) -> Construction {
    Construction::build(ConstructionParams {
        stages,
        ..Default::default()
    })
    .unwrap()
}

fn small_empirical() -> Construction {
    Construction::build(ConstructionParams {
        mode: Mode::Empirical {
            h0: 16,
            folds: vec![2, 2, 4, 2],
        },
        stages: 4,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn delta_and_pi_masses_halve_and_complement() {
    let c = faithful(3);
    let r = q(1, 256);
    for (i, st) in c.stages().iter().enumerate() {
        let want = &r * q(2, 1) / Q::from_integer(BigInt::one() << i);
        assert_eq!(delta_mass(&r, i), want);
        assert_eq!(st.delta.support(), &want, "stage {i}");
        assert_eq!(st.pi.support() + st.delta.support(), Q::one());
        assert_eq!(st.delta.height(), Some(st.height));
        assert_eq!(st.pi.height(), Some(st.height));
    }
    let heights: Vec<usize> = c.stages().iter().map(|s| s.height).collect();
    assert_eq!(heights, vec![92, 184, 368, 368]);
}

#[test]
fn stage_measure_is_consistent() {
    let c = faithful(2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in 0..=2 {
        let empty = c.stage_prob(&BitString::new(), s).unwrap();
        assert_eq!(empty, Q::one());
        for len in [0, 1, 3, 8, 20] {
            let x: BitString = (0..len).map(|_| rng.gen_bool(0.1)).collect();
            let p = c.stage_prob(&x, s).unwrap();
            let split = c.stage_prob(&x.concat(&"0".parse().unwrap()), s).unwrap()
                + c.stage_prob(&x.concat(&"1".parse().unwrap()), s).unwrap();
            assert_eq!(p, split, "stage {s} x={x}");
        }
    }
}

#[test]
fn ones_have_probability_r() {
    let c = faithful(2);
    for s in 0..=2 {
        assert_eq!(c.stage_prob(&"1".parse().unwrap(), s).unwrap(), q(1, 256));
    }
    let p11 = to_f64(&c.stage_prob(&"11".parse().unwrap(), 2).unwrap());
    assert!(p11 < 1.0 / 256.0);
}

#[test]
fn measure_query_uses_a_deep_enough_stage() {
    let c = faithful(3);
    let eps = q(1, 10);
    assert_eq!(c.query_stage(1, &eps).unwrap(), 0);
    let s = c.query_stage(20, &eps).unwrap();
    assert!(19.0 / c.stage(s).unwrap().height as f64 <= 0.1);
    assert!(c.query_stage(10_000, &eps).is_err());
    let x: BitString = "0000100000".parse().unwrap();
    assert_eq!(c.prob(&x, &eps).unwrap(), c.stage_prob(&x, c.query_stage(10, &eps).unwrap()).unwrap());
}

#[test]
fn samples_are_deterministic_and_sparse() {
    let c = small_empirical();
    let s = c.stages().len() - 1;
    let n = c.last().height / 2;
    let a = c.sample_sequence(4, n, s).unwrap();
    assert_eq!(a, c.sample_sequence(4, n, s).unwrap());
    assert_eq!(a.len(), n);
    assert!(c.sample_sequence(4, c.last().height + 1, s).is_err());

    // ones arrive in whole Delta-blocks, so most windows are all zero
    let counts: Vec<usize> = (0..400).map(|seed| c.sample_sequence(seed, n, s).unwrap().count_ones()).collect();
    let freq = counts.iter().sum::<usize>() as f64 / (counts.len() * n) as f64;
    assert!(counts.iter().any(|&k| k > 0));
    assert!(freq < 0.05, "{freq}");
}

#[test]
fn alpha_extends_itself_stage_by_stage() {
    let c = small_empirical();
    let opts = AlphaOptions {
        candidates: 4,
        checkpoints: 4,
        ..Default::default()
    };
    let t = build_alpha(&c, 4, &opts).unwrap();
    assert_eq!(t.word.len(), c.last().height);
    assert_eq!(t.fragments.len(), 5);
    assert_eq!(t.fragments[0].kind, SegmentKind::Initial);
    for f in &t.fragments[1..] {
        let st = c.stage(f.k).unwrap();
        assert_eq!(f.end, st.height);
        assert_eq!(f.start, c.stage(f.k - 1).unwrap().height);
        let want = if f.k % 2 == 0 { SegmentKind::Incompressible } else { SegmentKind::Sparse };
        assert_eq!(f.kind, want);
        if f.kind == SegmentKind::Sparse {
            assert!(f.ones_frequency <= 2.0 / 256.0);
            assert!(f.kept <= f.candidates);
        }
    }
    let again = build_alpha(&c, 4, &opts).unwrap();
    assert_eq!(again.word, t.word);
    assert!(!t.to_json()["fragments"].as_array().unwrap().is_empty());
    assert!(build_alpha(&c, 5, &opts).is_err());
    assert!(t.fragments.iter().all(|f| f.deficiency.is_finite()));
}

