//! The adversarial stationary measure: partition, height schedule, interleaved
//! gadget construction, the measure oracle and samplers.

mod alpha;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use alpha::{build_alpha, AlphaOptions, AlphaTrace, Fragment, SegmentKind};

use crate::bitcodes::BitString;
use crate::cutstack::{
    find_rs_from, well_distributedness, Column, Gadget, Interval, Log2, Partition, RsSearch,
    SymbolicGadget, Q,
};
use crate::error::{Error, Result};
use crate::measure::{format_rational, rational, MeasureOracle};

/// A nondecreasing unbounded function used as the deficiency speed.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigma {
    Identity,
    /// `ceil(log2(n + 1))`.
    Log,
    /// `table[n]`, undefined past the end.
    Table(Vec<u64>),
}

impl Sigma {
    pub fn eval(&self, n: u64) -> Option<u64> {
        match self {
            Sigma::Identity => Some(n),
            Sigma::Log => Some(64 - n.leading_zeros() as u64),
            Sigma::Table(t) => t.get(n as usize).copied(),
        }
    }

    pub fn table(values: Vec<u64>) -> Result<Self> {
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("sigma must be nondecreasing".into()));
        }
        Ok(Sigma::Table(values))
    }

    /// `id`, `log`, or a JSON array of values `sigma(0), sigma(1), ...`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "id" => Ok(Sigma::Identity),
            "log" => Ok(Sigma::Log),
            path => {
                let text = std::fs::read_to_string(path)?;
                let values: Vec<u64> =
                    serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                Sigma::table(values)
            }
        }
    }
}

/// Largest height the schedule may reach.
pub const MAX_HEIGHT: u64 = 1 << 40;

/// Heights `h_{-2}, h_{-1}, ..., h_count`: `h_{-2} = 1` and each `h_{i-1}` is the least
/// integer above `h_{i-2}` with `sigma(h_{i-1}) - sigma(h_{i-2}) > -log r + i + 13`.
pub fn heights_schedule(sigma: &Sigma, r: &Q, count: usize) -> Result<Vec<u64>> {
    if !r.is_positive() || r >= &Q::one() {
        return Err(Error::InvalidArgument("r must lie in (0, 1)".into()));
    }
    if let Sigma::Table(t) = sigma {
        if t.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("sigma must be nondecreasing".into()));
        }
    }
    // gap - i - 13 = k must satisfy k > log2(1/r), i.e. 2^k r > 1
    let exceeds = |k: i64| k >= 0 && r * Q::from_integer(BigInt::one() << k as usize) > Q::one();
    let mut hs = vec![1u64];
    for i in 0..=(count as i64 + 1) {
        let prev = *hs.last().expect("nonempty");
        let base = sigma.eval(prev).ok_or_else(|| range_exhausted(prev))?;
        let ok = |h: u64| -> Result<bool> {
            let v = sigma.eval(h).ok_or_else(|| range_exhausted(h))?;
            Ok(exceeds(v as i64 - base as i64 - i - 13))
        };
        let h = match sigma {
            Sigma::Table(_) => {
                let mut h = prev + 1;
                while !ok(h)? {
                    h += 1;
                }
                h
            }
            // monotone predicate: gallop, then bisect
            _ => {
                let (mut lo, mut step) = (prev, 1u64);
                let mut hi = prev + 1;
                while !ok(hi)? {
                    lo = hi;
                    step *= 2;
                    hi = prev + step;
                    if hi > MAX_HEIGHT {
                        return Err(Error::InvalidArgument(format!(
                            "height schedule passes {MAX_HEIGHT} at index {i}"
                        )));
                    }
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if ok(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        };
        hs.push(h);
    }
    Ok(hs)
}

fn range_exhausted(n: u64) -> Error {
    Error::InvalidArgument(format!("sigma table exhausted at {n}"))
}

/// `-3 r log2 r`.
pub fn entropy_upper_bound(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 0.25) {
        return Err(Error::InvalidArgument(format!("r = {r} outside (0, 1/4)")));
    }
    Ok(-3.0 * r * r.log2())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Heights from the schedule, `R_s` from the well-distributedness search.
    Faithful,
    /// Fixed initial half-height `h0` and fold counts `R_1, R_2, ...`.
    Empirical { h0: usize, folds: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct ConstructionParams {
    pub r: Q,
    pub sigma: Sigma,
    pub epsilon: Q,
    pub mode: Mode,
    pub stages: usize,
    pub rs_cap: usize,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        ConstructionParams {
            r: rational(1, 256),
            sigma: Sigma::Identity,
            epsilon: rational(1, 10),
            mode: Mode::Faithful,
            stages: 3,
            rs_cap: 64,
        }
    }
}

impl ConstructionParams {
    /// The desk-scale schedule: `H_0 = 2048` and folds `2, 2, 8, 2, 8, 2`, ending at height `2^21`.
    pub fn empirical() -> Self {
        ConstructionParams {
            sigma: Sigma::Log,
            mode: Mode::Empirical {
                h0: 1024,
                folds: vec![2, 2, 8, 2, 8, 2],
            },
            stages: 6,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let quarter = rational(1, 4);
        if !self.r.is_positive() || self.r >= quarter {
            return Err(Error::InvalidArgument("r must lie in (0, 1/4)".into()));
        }
        if !self.epsilon.is_positive() || self.epsilon >= quarter {
            return Err(Error::InvalidArgument("epsilon must lie in (0, 1/4)".into()));
        }
        let bound = entropy_upper_bound(crate::measure::to_f64(&self.r))?;
        if bound > crate::measure::to_f64(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "-3 r log r = {bound} exceeds epsilon"
            )));
        }
        if let Mode::Empirical { h0, folds } = &self.mode {
            if *h0 == 0 || folds.len() < self.stages || folds.contains(&0) {
                return Err(Error::InvalidArgument("empirical schedule too short".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StageState {
    pub s: usize,
    pub delta: SymbolicGadget,
    pub pi: SymbolicGadget,
    /// `Pi_{s-1} ∪ Delta''`, folded into `pi` (absent at stage 0).
    pub lambda: Option<SymbolicGadget>,
    pub phi: SymbolicGadget,
    /// Common column height of `pi` and `delta`.
    pub height: usize,
    pub folds: usize,
    /// `wd(lambda, pi)`; `None` at stage 0 or when too many column classes.
    pub wd: Option<Q>,
    /// `lambda(Delta'') / lambda(Pi_{s-1})`.
    pub gamma: Option<Q>,
}

impl StageState {
    /// The fraction of `lambda`-columns routed into `Delta''`.
    pub fn routing_fraction(&self) -> Option<Q> {
        self.gamma.as_ref().map(|g| g / (Q::one() + g))
    }
}

/// `(Delta_0, Pi_0)`: `Delta_0` is the `2 h0`-fold of the two one-level columns
/// `[1/2-r, 1/2)` and `[1/2, 1/2+r)`; `Pi_0` is one all-zero column cutting
/// `[0, 1/2-r)` and `[1/2+r, 1)` into `h0` levels each.
pub fn init_gadgets(r: &Q, h0: usize, partition: &Partition) -> Result<(SymbolicGadget, SymbolicGadget)> {
    if !r.is_positive() || r >= &rational(1, 4) {
        return Err(Error::InvalidArgument("r must lie in (0, 1/4)".into()));
    }
    if h0 == 0 {
        return Err(Error::InvalidArgument("h0 must be positive".into()));
    }
    let half = rational(1, 2);
    let lo = Interval::new(&half - r, half.clone())?;
    let hi = Interval::new(half.clone(), &half + r)?;
    let cols = vec![
        Column::from_partition(vec![lo], partition)?,
        Column::from_partition(vec![hi], partition)?,
    ];
    let delta = SymbolicGadget::base(Gadget::new(cols)?).mfold(2 * h0)?;

    let step = (&half - r) / Q::from_integer(BigInt::from(h0));
    let mut levels = Vec::with_capacity(2 * h0);
    for start in [Q::zero(), &half + r] {
        for j in 0..h0 {
            let a = &start + &step * Q::from_integer(BigInt::from(j));
            levels.push(Interval::new(a.clone(), a + &step)?);
        }
    }
    let pi = SymbolicGadget::base(Gadget::new(vec![Column::from_partition(levels, partition)?])?);
    Ok((delta, pi))
}

fn stage_zero(delta: SymbolicGadget, pi: SymbolicGadget) -> StageState {
    let height = pi.height().expect("uniform");
    StageState {
        s: 0,
        phi: SymbolicGadget::union(&pi, &delta),
        delta,
        pi,
        lambda: None,
        height,
        folds: 1,
        wd: None,
        gamma: None,
    }
}

/// Stage `s` from stage `s-1` with `folds` copies (`None`: search the smallest admissible
/// count at or above `min_folds` with well-distributedness below `1/s`).
/// Class budget for the diagnostic well-distributedness of fixed-fold stages.
pub const EMPIRICAL_CLASS_CAP: usize = 4_000;

pub fn construction_step(
    prev: &StageState,
    folds: Option<usize>,
    min_folds: usize,
    rs_cap: usize,
) -> Result<StageState> {
    let s = prev.s + 1;
    let half = rational(1, 2);
    let d1 = prev.delta.copy(Q::zero(), half.clone())?;
    let d2 = prev.delta.copy(half.clone(), half)?;
    let lambda = SymbolicGadget::union(&prev.pi, &d2);
    let eps = rational(1, s as i64);
    let (m, wd) = match folds {
        Some(m) => {
            let pi = lambda.mfold(m)?;
            let wd = match well_distributedness(&lambda, &pi, EMPIRICAL_CLASS_CAP) {
                Ok(v) => Some(v),
                Err(Error::TooManyClasses(_)) => None,
                Err(e) => return Err(e),
            };
            (m, wd)
        }
        None => match find_rs_from(&lambda, &eps, min_folds.max(1), rs_cap)? {
            RsSearch::Found { m, value } => (m, Some(value)),
            RsSearch::NotFound { best_m, best_value } => {
                return Err(Error::Stage {
                    stage: s,
                    reason: format!(
                        "no fold count up to {rs_cap} reaches wd < 1/{s}; best M = {best_m} with {}",
                        crate::measure::to_f64(&best_value)
                    ),
                })
            }
        },
    };
    let pi = lambda.mfold(m)?;
    let delta = d1.mfold(m)?;
    let gamma = d2.support() / prev.pi.support();
    Ok(StageState {
        s,
        phi: SymbolicGadget::union(&pi, &delta),
        height: pi.height().expect("uniform"),
        delta,
        pi,
        lambda: Some(lambda),
        folds: m,
        wd,
        gamma: Some(gamma),
    })
}

/// `gamma_s` in the form with `r` in the denominator, and in the form without it.
/// The second form is undefined for `s <= 2`.
pub fn gamma_forms(r: &Q, s: usize) -> (Q, Option<Q>) {
    let num = r / Q::from_integer(BigInt::one() << (s - 1));
    let four_over = Q::from_integer(BigInt::from(4)) / Q::from_integer(BigInt::one() << s);
    let printed = (s > 2).then(|| &num / (Q::one() - &four_over));
    (&num / (Q::one() - &four_over * r), printed)
}

#[derive(Debug, Clone)]
pub struct Construction {
    params: ConstructionParams,
    partition: Partition,
    heights: Option<Vec<u64>>,
    stages: Vec<StageState>,
}

impl Construction {
    pub fn build(params: ConstructionParams) -> Result<Self> {
        params.validate()?;
        let partition = Partition::theorem1(&params.r)?;
        let (heights, h0) = match &params.mode {
            Mode::Faithful => {
                let hs = heights_schedule(&params.sigma, &params.r, params.stages)?;
                let h0 = hs[2] as usize;
                (Some(hs), h0)
            }
            Mode::Empirical { h0, .. } => (None, *h0),
        };
        let (delta, pi) = init_gadgets(&params.r, h0, &partition)?;
        let mut stages = vec![stage_zero(delta, pi)];
        for s in 1..=params.stages {
            let prev = stages.last().expect("stage 0");
            let next = match (&params.mode, &heights) {
                (Mode::Empirical { folds, .. }, _) => {
                    construction_step(prev, Some(folds[s - 1]), 1, params.rs_cap)?
                }
                (Mode::Faithful, Some(hs)) => {
                    let h_s = hs[s + 2] as usize;
                    let min = (2 * h_s).div_ceil(prev.height);
                    construction_step(prev, None, min, params.rs_cap)?
                }
                (Mode::Faithful, None) => unreachable!("faithful mode has heights"),
            };
            stages.push(next);
        }
        Ok(Construction {
            params,
            partition,
            heights,
            stages,
        })
    }

    pub fn params(&self) -> &ConstructionParams {
        &self.params
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// `h_{-2}, h_{-1}, ...` in faithful mode.
    pub fn heights(&self) -> Option<&[u64]> {
        self.heights.as_deref()
    }

    pub fn stages(&self) -> &[StageState] {
        &self.stages
    }

    pub fn stage(&self, s: usize) -> Result<&StageState> {
        self.stages.get(s).ok_or_else(|| Error::Stage {
            stage: s,
            reason: format!("only {} stages built", self.stages.len() - 1),
        })
    }

    pub fn last(&self) -> &StageState {
        self.stages.last().expect("stage 0 always present")
    }

    /// `P_s(x)`, the measure obtained by stacking independent columns of `Pi_s ∪ Delta_s`
    /// forever. It differs from the limit measure by at most `(l(x)-1)/H_s`.
    pub fn stage_prob(&self, x: &BitString, s: usize) -> Result<Q> {
        self.stage(s)?.phi.closure::<Q>(x.bits(), true)
    }

    pub fn stage_log2_prob(&self, x: &BitString, s: usize) -> Result<f64> {
        Ok(self.stage(s)?.phi.closure::<Log2>(x.bits(), true)?.0)
    }

    /// Lower bound on `log2 P(x)` from trajectories starting at the bottom of a column of the last stage.
    pub fn aligned_log2_prob(&self, x: &BitString) -> Result<f64> {
        Ok(self.last().phi.aligned::<Log2>(x.bits())?.0)
    }

    /// Rational approximation of `P(x)` within `eps`, from the first stage whose
    /// top band `(l(x)-1)/H_s` is at most `eps`.
    pub fn measure_query(&self, x: &BitString, eps: &Q) -> Result<Q> {
        if !eps.is_positive() {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        self.stage_prob(x, self.query_stage(x.len(), eps)?)
    }

    /// First stage whose top band `(n-1)/H_s` is at most `eps`.
    pub fn query_stage(&self, n: usize, eps: &Q) -> Result<usize> {
        let band = Q::from_integer(BigInt::from(n.saturating_sub(1)));
        self.stages
            .iter()
            .position(|st| &band / Q::from_integer(BigInt::from(st.height)) <= *eps)
            .ok_or_else(|| Error::Stage {
                stage: self.stages.len(),
                reason: format!("tolerance needs a stage of height {}", (band / eps).ceil()),
            })
    }

    /// Word of length `n` read from a uniformly drawn point of the stage-`s` support,
    /// conditioned on the trajectory staying inside its column.
    pub fn sample_sequence(&self, seed: u64, n: usize, s: usize) -> Result<BitString> {
        let st = self.stage(s)?;
        if n > st.height {
            return Err(Error::TrajectoryOverflow {
                wanted: n,
                available: st.height,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let level = rng.gen_range(0..=st.height - n);
        st.phi.sample_window(&mut rng, level, n)
    }

    /// Diagnostics for each stage, one JSON object per stage.
    pub fn summary(&self) -> serde_json::Value {
        let stages: Vec<serde_json::Value> = self
            .stages
            .iter()
            .map(|st| {
                let mut o = serde_json::json!({
                    "stage": st.s,
                    "height": st.height,
                    "folds": st.folds,
                    "delta_mass": format_rational(st.delta.support()),
                    "pi_mass": format_rational(st.pi.support()),
                    "wd": st.wd.as_ref().map(format_rational),
                    "wd_f64": st.wd.as_ref().map(crate::measure::to_f64),
                });
                if st.s > 0 {
                    let (with_r, printed) = gamma_forms(&self.params.r, st.s);
                    o["gamma"] = st.gamma.as_ref().map(format_rational).into();
                    o["gamma_r_form"] = format_rational(&with_r).into();
                    o["gamma_printed_form"] = printed.as_ref().map(format_rational).into();
                }
                o
            })
            .collect();
        serde_json::json!({
            "r": format_rational(&self.params.r),
            "epsilon": format_rational(&self.params.epsilon),
            "mode": match &self.params.mode { Mode::Faithful => "faithful", Mode::Empirical { .. } => "empirical" },
            "heights": self.heights,
            "stages": stages,
        })
    }
}

impl MeasureOracle for Construction {
    fn prob(&self, x: &BitString, eps: &Q) -> Result<Q> {
        self.measure_query(x, eps)
    }

    /// Closure at the stage `measure_query` would use for the configured epsilon.
    fn log2_prob(&self, x: &BitString) -> Result<f64> {
        self.stage_log2_prob(x, self.query_stage(x.len(), &self.params.epsilon)?)
    }
}

/// Lower bound on the measure: windows starting at the bottom of a last-stage column.
/// Cheap for long words, where the full closure sums over every offset.
#[derive(Debug, Clone, Copy)]
pub struct AlignedMeasure<'a>(pub &'a Construction);

impl MeasureOracle for AlignedMeasure<'_> {
    fn prob(&self, x: &BitString, _eps: &Q) -> Result<Q> {
        self.0.last().phi.aligned::<Q>(x.bits())
    }

    fn log2_prob(&self, x: &BitString) -> Result<f64> {
        self.0.aligned_log2_prob(x)
    }
}

/// `2^{-s+1} r`.
pub fn delta_mass(r: &Q, s: usize) -> Q {
    if s == 0 {
        r * Q::from_integer(BigInt::from(2))
    } else {
        r / Q::from_integer(BigInt::one() << (s - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_schedule() {
        let hs = heights_schedule(&Sigma::Identity, &rational(1, 256), 2).unwrap();
        assert_eq!(&hs[..5], &[1, 23, 46, 70, 95]);
        let hs = heights_schedule(&Sigma::Identity, &rational(1, 2), 1).unwrap();
        assert_eq!(hs[1] - hs[0], 15);
        assert_eq!(hs[2] - hs[1], 16);
    }

    #[test]
    fn entropy_bound() {
        assert!((entropy_upper_bound(1.0 / 256.0).unwrap() - 0.09375).abs() < 1e-12);
        assert!(entropy_upper_bound(0.5).is_err());
    }

    #[test]
    fn gamma_closed_form() {
        let c = Construction::build(ConstructionParams {
            stages: 2,
            ..Default::default()
        })
        .unwrap();
        for s in 1..=2 {
            let st = c.stage(s).unwrap();
            assert_eq!(st.gamma.as_ref().unwrap(), &gamma_forms(&c.params.r, s).0);
            assert_eq!(st.delta.support(), &delta_mass(&c.params.r, s));
        }
    }
}
