//! Cutting and stacking: exact-rational gadgets, their symbolic compositions, and name measures.

mod explicit;
mod symbolic;
mod weight;

use num_bigint::BigInt;
use num_traits::One;
use rand::Rng;

pub use explicit::{
    copy_piece, cut_into_copies, independent_cut_stack, overlap_measure, stack_columns, stack_gadgets,
    Column, Gadget, Interval, Partition, Q, EXPLICIT_CAP,
};
/// Brute-force well-distributedness over materialized columns.
pub use explicit::well_distributedness as explicit_well_distributedness;
pub use symbolic::{well_distributedness, ColumnClass, ColumnInfo, Location, SymbolicGadget};
pub use weight::{Log2, Weight};

use crate::error::Result;

/// Default bound on the number of column classes enumerated by symbolic queries.
pub const CLASS_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum RsSearch {
    Found { m: usize, value: Q },
    NotFound { best_m: usize, best_value: Q },
}

/// Smallest `M <= cap` with `wd(g, g^{*M}) < eps`.
pub fn find_rs(g: &SymbolicGadget, eps: &Q, cap: usize) -> Result<RsSearch> {
    find_rs_from(g, eps, 1, cap)
}

/// Like [`find_rs`], starting the sweep at `start`.
pub fn find_rs_from(g: &SymbolicGadget, eps: &Q, start: usize, cap: usize) -> Result<RsSearch> {
    let mut best: Option<(usize, Q)> = None;
    for m in start.max(1)..=cap {
        let u = g.mfold(m)?;
        let value = well_distributedness(g, &u, CLASS_CAP)?;
        if value < *eps {
            return Ok(RsSearch::Found { m, value });
        }
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((m, value));
        }
    }
    let (best_m, best_value) = best.unwrap_or((0, Q::from_integer(BigInt::from(2))));
    Ok(RsSearch::NotFound { best_m, best_value })
}

#[derive(Debug, Clone, Default)]
pub struct CompletenessReport {
    pub widths: Vec<Q>,
    pub supports: Vec<Q>,
    /// Indices `i` where the width of gadget `i+1` is not below that of gadget `i`.
    pub width_violations: Vec<usize>,
    /// Indices `i` where the support of gadget `i+1` lost mass.
    pub support_violations: Vec<usize>,
    /// Sampled points `(i, w)` where gadget `i+1` does not extend the map of gadget `i`.
    pub extension_violations: Vec<(usize, Q)>,
    pub points_checked: usize,
}

impl CompletenessReport {
    pub fn ok(&self) -> bool {
        self.width_violations.is_empty()
            && self.support_violations.is_empty()
            && self.extension_violations.is_empty()
    }
}

fn random_fraction<R: Rng + ?Sized>(rng: &mut R) -> Q {
    Q::new(BigInt::from(rng.gen::<u32>()), BigInt::one() << 32)
}

/// Checks a finite prefix of a gadget sequence for the completeness conditions,
/// spot-checking the extension property on `samples` points per consecutive pair.
pub fn completeness_check<R: Rng + ?Sized>(
    seq: &[SymbolicGadget],
    samples: usize,
    rng: &mut R,
) -> CompletenessReport {
    let mut rep = CompletenessReport {
        widths: seq.iter().map(|g| g.width().clone()).collect(),
        supports: seq.iter().map(|g| g.support().clone()).collect(),
        ..Default::default()
    };
    for (i, pair) in seq.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.width() >= prev.width() {
            rep.width_violations.push(i);
        }
        if next.support() < prev.support() {
            rep.support_violations.push(i);
        }
        for _ in 0..samples {
            let col = prev.column_at(&random_fraction(rng));
            if col.height < 2 {
                continue;
            }
            let level = rng.gen_range(0..col.height - 1);
            let iv = prev.level_interval(&col.cum, level);
            let w = &iv.left + random_fraction(rng) * iv.width();
            rep.points_checked += 1;
            let here = prev.step(&w);
            let there = next.locate(&w).and_then(|_| next.step(&w));
            if here.is_none() || here != there {
                rep.extension_violations.push((i, w));
            }
        }
    }
    rep
}
