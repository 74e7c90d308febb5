use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lzrobust::cutstack::{
    completeness_check, copy_piece, explicit_well_distributedness, independent_cut_stack,
    overlap_measure, stack_gadgets, well_distributedness, Column, Gadget, Interval, Partition,
    SymbolicGadget, Q,
};
use lzrobust::theorem1::{Construction, ConstructionParams, Mode};
use lzrobust::BitString;

fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn words(l: usize) -> impl Iterator<Item = BitString> {
    (0..1u32 << l).map(move |v| (0..l).map(|i| v >> i & 1 == 1).collect())
}

/// A gadget whose levels are disjoint pieces of 1/32 cells, named by a random partition.
fn random_gadget(seed: u64) -> Gadget {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<i64> = (0..32).collect();
    cells.shuffle(&mut rng);
    let ones: Vec<Interval> = (0..32)
        .filter(|_| rng.gen_bool(0.5))
        .map(|k| Interval::new(q(k, 32), q(k + 1, 32)).unwrap())
        .collect();
    let partition = Partition::new(ones).unwrap();
    let mut cells = cells.into_iter();
    let cols = (0..rng.gen_range(1..=3))
        .map(|_| {
            let h = rng.gen_range(1..=4);
            let w = q(1, 32 * rng.gen_range(1..=4));
            let levels = (0..h)
                .map(|_| {
                    let a = q(cells.next().unwrap(), 32);
                    Interval::new(a.clone(), a + &w).unwrap()
                })
                .collect();
            Column::from_partition(levels, &partition).unwrap()
        })
        .collect();
    Gadget::new(cols).unwrap()
}

fn assert_same_names(sym: &SymbolicGadget, g: &Gadget, max_len: usize) {
    for l in 1..=max_len {
        for x in words(l) {
            assert_eq!(sym.name_measure(x.bits()), g.name_measure(&x), "x={x}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mfold_matches_explicit(seed in any::<u64>(), m in 1usize..=3) {
        let g = random_gadget(seed);
        let sym = SymbolicGadget::base(g.clone()).mfold(m).unwrap();
        let explicit = independent_cut_stack(&g, m).unwrap();
        assert_same_names(&sym, &explicit, 4);
        prop_assert_eq!(sym.width(), &explicit.width());
        prop_assert_eq!(sym.support(), &explicit.support());
        prop_assert_eq!(sym.materialize().unwrap().name_measure(&"0".parse().unwrap()),
            explicit.name_measure(&"0".parse().unwrap()));
    }

    #[test]
    fn wd_matches_explicit(seed in any::<u64>(), m in 1usize..=3) {
        let g = random_gadget(seed);
        let base = SymbolicGadget::base(g.clone());
        let sym = well_distributedness(&base, &base.mfold(m).unwrap(), 10_000).unwrap();
        let explicit = explicit_well_distributedness(&g, &independent_cut_stack(&g, m).unwrap()).unwrap();
        prop_assert_eq!(sym, explicit);
    }

    #[test]
    fn copies_and_stacks_match_explicit(seed in any::<u64>(), a in 0i64..4, b in 1i64..=4) {
        prop_assume!(a < b);
        let g = random_gadget(seed);
        let (lo, hi) = (q(a, 4), q(b, 4));
        let sym = SymbolicGadget::base(g.clone()).copy(lo.clone(), &hi - &lo).unwrap();
        let explicit = copy_piece(&g, &lo, &(&hi - &lo));
        assert_same_names(&sym, &explicit, 3);

        let halves = SymbolicGadget::base(g.clone()).cut_into_copies(&[q(1, 2), q(1, 2)]).unwrap();
        let stacked = SymbolicGadget::stack(&halves[0], &halves[1]).unwrap();
        let ex = stack_gadgets(&copy_piece(&g, &Q::zero(), &q(1, 2)), &copy_piece(&g, &q(1, 2), &q(1, 2))).unwrap();
        assert_same_names(&stacked, &ex, 4);
    }

    #[test]
    fn name_mass_is_conserved(seed in any::<u64>(), m in 1usize..=3, l in 1usize..=5) {
        let g = SymbolicGadget::base(random_gadget(seed)).mfold(m).unwrap();
        let total: Q = words(l).map(|x| g.name_measure(x.bits())).sum();
        let expect: Q = g
            .materialize()
            .unwrap()
            .columns()
            .iter()
            .map(|c| c.width() * Q::from_integer(BigInt::from((c.height() + 1).saturating_sub(l))))
            .sum();
        prop_assert_eq!(total, expect);
    }

    #[test]
    fn materialized_levels_are_disjoint(seed in any::<u64>(), m in 1usize..=3) {
        let g = SymbolicGadget::base(random_gadget(seed)).mfold(m).unwrap().materialize().unwrap();
        let ivs = g.intervals();
        for (i, a) in ivs.iter().enumerate() {
            for b in &ivs[i + 1..] {
                prop_assert!(a.overlap(b).is_zero());
            }
        }
        let total: Q = ivs.iter().map(|iv| iv.width()).sum();
        prop_assert_eq!(total, g.support());
    }
}

#[test]
fn stacking_adds_a_boundary_term() {
    // the names of a stack split into names inside each half plus names straddling the seam
    let g = random_gadget(7);
    let halves = SymbolicGadget::base(g).cut_into_copies(&[q(1, 2), q(1, 2)]).unwrap();
    let stacked = SymbolicGadget::stack(&halves[0], &halves[1]).unwrap();
    let l = 3;
    let inside: Q = words(l)
        .map(|x| halves[0].name_measure(x.bits()) + halves[1].name_measure(x.bits()))
        .sum();
    let total: Q = words(l).map(|x| stacked.name_measure(x.bits())).sum();
    let seam = stacked.width() * Q::from_integer(BigInt::from(l as i64 - 1));
    assert_eq!(total, inside + seam);
}

#[test]
fn overlap_of_a_gadget_with_itself_is_its_support() {
    let g = random_gadget(11);
    assert_eq!(overlap_measure(&g.intervals(), &g.intervals()), g.support());
}

#[test]
fn theorem1_stages_form_a_complete_sequence() {
    let c = Construction::build(ConstructionParams {
        mode: Mode::Empirical { h0: 8, folds: vec![2, 2, 3] },
        stages: 3,
        ..Default::default()
    })
    .unwrap();
    let seq: Vec<SymbolicGadget> = c.stages().iter().map(|s| s.phi.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rep = completeness_check(&seq, 200, &mut rng);
    assert!(rep.points_checked > 0);
    assert!(rep.ok(), "{rep:?}");
    assert!(rep.supports.iter().all(|s| s == &Q::one()));
}

#[test]
fn constant_sequence_is_not_complete() {
    let g = SymbolicGadget::base(random_gadget(3));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = completeness_check(&[g.clone(), g], 20, &mut rng);
    assert_eq!(rep.width_violations, vec![0]);
}

#[test]
fn shrinking_copy_loses_support() {
    let g = SymbolicGadget::base(random_gadget(3));
    let small = g.copy(Q::zero(), q(1, 2)).unwrap().mfold(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = completeness_check(&[g, small], 50, &mut rng);
    assert_eq!(rep.support_violations, vec![0]);
    assert!(!rep.extension_violations.is_empty());
}
