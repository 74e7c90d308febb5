use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Construction;
use crate::bitcodes::BitString;
use crate::coder::Coder;
use crate::cutstack::{Log2, Q};
use crate::deficiency::{select_from, Candidate};
use crate::error::{Error, Result};
use crate::lz::Lz78;
use crate::measure::{rational, to_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Initial,
    Sparse,
    Incompressible,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fragment {
    pub k: usize,
    pub stage: usize,
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    /// The seeded-random block of an incompressible step.
    pub block: Option<(usize, usize)>,
    pub ones_frequency: f64,
    /// Surrogate deficiency `-log P - L_lz78` of the whole prefix at `end`.
    pub deficiency: f64,
    pub candidates: usize,
    pub kept: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct AlphaTrace {
    pub word: BitString,
    pub fragments: Vec<Fragment>,
}

impl AlphaTrace {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "length": self.word.len(),
            "fragments": self.fragments,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AlphaOptions {
    pub seed: u64,
    /// Candidate extensions drawn at each sparse step.
    pub candidates: usize,
    pub mu: Q,
    pub max_attempts: usize,
    /// Martingale checkpoints per candidate extension.
    pub checkpoints: usize,
    /// Minimum standalone LZ78 ratio of a random block.
    pub incompressible_ratio: f64,
    pub retries: usize,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            seed: 1,
            candidates: 8,
            mu: rational(1, 2),
            max_attempts: 4000,
            checkpoints: 16,
            incompressible_ratio: 0.8,
            retries: 16,
        }
    }
}

struct Scorer<'a> {
    c: &'a Construction,
    lz: Lz78,
}

impl Scorer<'_> {
    /// `log2 M(y^j) = -L(y^j) - log2 P(y^j)` at each checkpoint, plus `log2 P(y)`.
    fn path(&self, y: &BitString, cps: &[usize]) -> Result<(Vec<Log2>, Log2)> {
        let lens = self.lz.prefix_code_lens(y, cps);
        let mut out = Vec::with_capacity(cps.len());
        let mut last = Log2(0.0);
        for (&n, &l) in cps.iter().zip(&lens) {
            let lp = self.c.aligned_log2_prob(&y.prefix(n))?;
            out.push(Log2(-(l as f64) - lp));
            last = Log2(lp);
        }
        Ok((out, last))
    }

    fn deficiency(&self, y: &BitString) -> Result<f64> {
        let lp = self.c.aligned_log2_prob(y)?;
        Ok(-lp - self.lz.code_len(y) as f64)
    }
}

fn ones_frequency(x: &BitString) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.count_ones() as f64 / x.len() as f64
    }
}

/// Builds `alpha(0), ..., alpha(steps)` on an empirical-mode construction.
///
/// `alpha(k)` is a full column name of `Pi_k` whose first component is `alpha(k-1)`.
/// Odd steps fill the remaining components with sampled `Pi_{k-1} ∪ Delta''` names of
/// ones-frequency at most `2r`, picked by the bounded-increase selection; even steps
/// put a seeded-random `Delta''` block right after `alpha(k-1)`.
pub fn build_alpha(c: &Construction, steps: usize, opts: &AlphaOptions) -> Result<AlphaTrace> {
    if steps + 1 > c.stages().len() {
        return Err(Error::Stage {
            stage: steps,
            reason: format!("only {} stages built", c.stages().len() - 1),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scorer = Scorer { c, lz: Lz78::new() };
    let two_r = 2.0 * to_f64(&c.params().r);

    let mut alpha = c.stage(0)?.pi.sample_name(&mut rng);
    let mut fragments = vec![Fragment {
        k: 0,
        stage: 0,
        start: 0,
        end: alpha.len(),
        kind: SegmentKind::Initial,
        block: None,
        ones_frequency: ones_frequency(&alpha),
        deficiency: scorer.deficiency(&alpha)?,
        candidates: 1,
        kept: 1,
        attempts: 1,
    }];

    for k in 1..=steps {
        let st = c.stage(k)?;
        let prev_h = c.stage(k - 1)?.height;
        let lambda = st.lambda.as_ref().expect("stage >= 1");
        let start = alpha.len();
        let slots = st.folds - 1;
        if slots == 0 {
            return Err(Error::Stage {
                stage: k,
                reason: "a single fold leaves no room to extend".into(),
            });
        }
        let frag = if k % 2 == 0 {
            let mut attempts = 0;
            let block = loop {
                attempts += 1;
                let b: BitString = (0..prev_h).map(|_| rng.gen::<bool>()).collect();
                let ratio = scorer.lz.code_len(&b) as f64 / b.len() as f64;
                if ratio >= opts.incompressible_ratio {
                    break b;
                }
                if attempts >= opts.retries {
                    return Err(Error::Stage {
                        stage: k,
                        reason: format!("no random block with LZ78 ratio >= {}", opts.incompressible_ratio),
                    });
                }
            };
            let mut ext = block;
            for _ in 1..slots {
                ext.append(&lambda.sample_name(&mut rng));
            }
            alpha.append(&ext);
            Fragment {
                k,
                stage: k,
                start,
                end: alpha.len(),
                kind: SegmentKind::Incompressible,
                block: Some((start, start + prev_h)),
                ones_frequency: ones_frequency(&ext),
                deficiency: 0.0,
                candidates: 1,
                kept: 1,
                attempts,
            }
        } else {
            let mut exts = Vec::with_capacity(opts.candidates);
            let mut attempts = 0;
            while exts.len() < opts.candidates && attempts < opts.max_attempts {
                attempts += 1;
                let mut ext = BitString::with_capacity(slots * prev_h);
                for _ in 0..slots {
                    ext.append(&lambda.sample_name(&mut rng));
                }
                if ones_frequency(&ext) <= two_r {
                    exts.push(ext);
                }
            }
            if exts.is_empty() {
                return Err(Error::Stage {
                    stage: k,
                    reason: format!("no extension with ones-frequency <= 2r in {attempts} draws"),
                });
            }
            let ext_len = slots * prev_h;
            let cps: Vec<usize> = (1..=opts.checkpoints)
                .map(|i| start + (ext_len * i).div_ceil(opts.checkpoints))
                .collect();
            let (x_path, x_prob) = scorer.path(&alpha, &[start])?;
            let mut cands = Vec::with_capacity(exts.len());
            for ext in &exts {
                let y = alpha.concat(ext);
                let (path, prob) = scorer.path(&y, &cps)?;
                cands.push(Candidate { word: y, prob, path });
            }
            let sel = select_from(&x_prob, &x_path[0], &cands, &opts.mu)?;
            let pool: Vec<usize> = if sel.kept.is_empty() {
                (0..cands.len()).collect()
            } else {
                sel.kept.clone()
            };
            let best = pool
                .into_iter()
                .min_by(|&a, &b| {
                    let fa = cands[a].path.last().expect("checkpoints").0;
                    let fb = cands[b].path.last().expect("checkpoints").0;
                    fa.total_cmp(&fb)
                })
                .expect("nonempty pool");
            let ext = &exts[best];
            alpha.append(ext);
            Fragment {
                k,
                stage: k,
                start,
                end: alpha.len(),
                kind: SegmentKind::Sparse,
                block: None,
                ones_frequency: ones_frequency(ext),
                deficiency: 0.0,
                candidates: cands.len(),
                kept: sel.kept.len(),
                attempts,
            }
        };
        if alpha.len() != st.height {
            return Err(Error::Stage {
                stage: k,
                reason: format!("alpha has length {} but columns have height {}", alpha.len(), st.height),
            });
        }
        let mut frag = frag;
        frag.deficiency = scorer.deficiency(&alpha)?;
        fragments.push(frag);
    }
    Ok(AlphaTrace {
        word: alpha,
        fragments,
    })
}
