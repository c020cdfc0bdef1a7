//! Task-worker matching: every subset independently receives one worker drawn
//! from the exponential-mechanism distribution.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{BidProfile, Instance};
use crate::rng::{derive_seed, stream_rng};
use crate::scorefn::MatchingDistribution;

/// Full resamples allowed in [`MatchMode::Constrained`].
pub const CONSTRAINED_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Independent draws per subset; the exact product distribution.
    #[default]
    DpPure,
    /// Whole matchings are redrawn until every task is held by at least two
    /// distinct workers. Conditioning on that event leaves the product form,
    /// so privacy audits must not use this mode.
    Constrained,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::DpPure => "dp_pure",
            MatchMode::Constrained => "constrained",
        })
    }
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp_pure" | "dp-pure" | "pure" => Ok(MatchMode::DpPure),
            "constrained" => Ok(MatchMode::Constrained),
            other => Err(Error::Domain(format!("unknown match mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingPair {
    pub subset: usize,
    pub worker: usize,
    pub bid: f64,
}

/// One matching pair per subset, indexed by subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSet {
    pairs: Vec<MatchingPair>,
}

impl MatchingSet {
    /// Builds a matching from per-subset worker assignments, snapshotting bids.
    pub fn from_assignment(workers: &[usize], bids: &BidProfile) -> Result<Self> {
        let pairs = workers
            .iter()
            .enumerate()
            .map(|(subset, &worker)| {
                if worker >= bids.len() {
                    return Err(Error::Domain(format!(
                        "subset {subset} assigned to unknown worker {worker}"
                    )));
                }
                Ok(MatchingPair {
                    subset,
                    worker,
                    bid: bids.get(worker),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { pairs })
    }

    /// The instance's pinned matching, if it carries one.
    pub fn fixed(inst: &Instance, bids: &BidProfile) -> Result<Option<Self>> {
        let Some(fixed) = &inst.fixed_matching else {
            return Ok(None);
        };
        if fixed.len() != inst.l() || fixed.iter().enumerate().any(|(j, p)| p.subset != j) {
            return Err(Error::Domain(
                "fixed_matching must list subsets 0..l in order".into(),
            ));
        }
        let workers: Vec<usize> = fixed.iter().map(|p| p.worker).collect();
        Self::from_assignment(&workers, bids).map(Some)
    }

    pub fn pairs(&self) -> &[MatchingPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn workers(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.worker).collect()
    }

    /// Same assignment with bids refreshed from `bids`.
    pub fn rebid(&self, bids: &BidProfile) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| MatchingPair {
                    bid: bids.get(p.worker),
                    ..*p
                })
                .collect(),
        }
    }

    /// True if every task is held by subsets of at least two distinct workers.
    pub fn has_two_workers_per_task(&self, inst: &Instance) -> bool {
        let mut first: Vec<Option<usize>> = vec![None; inst.n];
        let mut twice = vec![false; inst.n];
        for pair in &self.pairs {
            for &t in &inst.subsets[pair.subset] {
                match first[t] {
                    None => first[t] = Some(pair.worker),
                    Some(w) if w != pair.worker => twice[t] = true,
                    _ => {}
                }
            }
        }
        twice.iter().all(|&b| b)
    }
}

/// Samples a matching. Subset `j` draws from its own stream keyed by the seed,
/// so the result does not depend on iteration order.
pub fn match_workers(
    inst: &Instance,
    bids: &BidProfile,
    dist: &MatchingDistribution,
    seed: u64,
    mode: MatchMode,
) -> Result<MatchingSet> {
    if dist.len() != inst.m() || bids.len() != inst.m() {
        return Err(Error::Domain(format!(
            "distribution over {} workers and {} bids for a roster of {}",
            dist.len(),
            bids.len(),
            inst.m()
        )));
    }
    let cumulative: Vec<f64> = dist
        .probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let draw = |attempt_seed: u64| -> Result<MatchingSet> {
        let workers: Vec<usize> = (0..inst.l())
            .map(|j| sample_index(&cumulative, stream_rng(attempt_seed, j as u64).random()))
            .collect();
        MatchingSet::from_assignment(&workers, bids)
    };

    match mode {
        MatchMode::DpPure => draw(seed),
        MatchMode::Constrained => {
            let support = dist.probs.iter().filter(|&&p| p > 0.0).count();
            if support < 2 && inst.n > 0 {
                return Err(Error::ConstraintExhausted { attempts: 0 });
            }
            for attempt in 0..CONSTRAINED_ATTEMPTS {
                let attempt_seed = if attempt == 0 {
                    seed
                } else {
                    derive_seed(seed, attempt as u64)
                };
                let candidate = draw(attempt_seed)?;
                if candidate.has_two_workers_per_task(inst) {
                    return Ok(candidate);
                }
            }
            Err(Error::ConstraintExhausted {
                attempts: CONSTRAINED_ATTEMPTS,
            })
        }
    }
}

/// Inverse-CDF lookup: the first index whose cumulative mass exceeds `u`.
fn sample_index(cumulative: &[f64], u: f64) -> usize {
    let i = cumulative.partition_point(|&c| c <= u);
    if i < cumulative.len() {
        return i;
    }
    // u landed in the rounding slack above the final cumulative value
    let last = cumulative.last().copied().unwrap_or(0.0);
    cumulative.iter().position(|&c| c == last).unwrap_or(0)
}

/// Log-probability that the matching phase produces exactly `outcome`.
pub fn outcome_log_probability(outcome: &MatchingSet, dist: &MatchingDistribution) -> f64 {
    outcome
        .pairs
        .iter()
        .map(|p| dist.log_probs[p.worker])
        .sum()
}

pub fn outcome_probability(outcome: &MatchingSet, dist: &MatchingDistribution) -> f64 {
    outcome_log_probability(outcome, dist).exp()
}
