//! Payment determination. Each winning pair is paid the larger of its bid
//! and the bid total of its replaced set: a greedy cover of the pair's subset
//! built only from other workers' matched pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{BidProfile, Instance};
use crate::matching::MatchingSet;
use crate::selection::{WinningPair, WinningSet};
use crate::taskset::TaskSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacedSet {
    /// Indices into the matching set, in pick order.
    pub pairs: Vec<usize>,
    pub cost: f64,
}

impl ReplacedSet {
    pub fn workers(&self, p: &MatchingSet) -> Vec<usize> {
        self.pairs.iter().map(|&i| p.pairs()[i].worker).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPayment {
    pub subset: usize,
    pub worker: usize,
    pub bid: f64,
    pub replaced: ReplacedSet,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentProfile {
    pub payments: Vec<f64>,
    pub breakdown: Vec<PairPayment>,
}

impl PaymentProfile {
    pub fn total(&self) -> f64 {
        self.payments.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityProfile {
    pub utilities: Vec<f64>,
}

pub fn replaced_set(inst: &Instance, p: &MatchingSet, winner: &WinningPair) -> Result<ReplacedSet> {
    let sets = inst.subset_sets();
    replaced_set_with(&sets, p, winner.subset, winner.worker)
}

fn replaced_set_with(sets: &[TaskSet], p: &MatchingSet, subset: usize, worker: usize) -> Result<ReplacedSet> {
    let mut copy = sets[subset].clone();
    let mut picked = Vec::new();
    let mut cost = 0.0;
    while !copy.is_empty() {
        // cost-effectiveness against what is left of the copy set
        let mut best: Option<(f64, usize)> = None;
        for (idx, pair) in p.pairs().iter().enumerate() {
            if pair.worker == worker {
                continue;
            }
            let overlap = sets[pair.subset].intersection_len(&copy);
            if overlap == 0 {
                continue;
            }
            let cf = pair.bid / overlap as f64;
            let wins = match best {
                None => true,
                Some((v, i)) => {
                    let cur = &p.pairs()[i];
                    cf.total_cmp(&v)
                        .then(pair.worker.cmp(&cur.worker))
                        .then(pair.subset.cmp(&cur.subset))
                        .is_lt()
                }
            };
            if wins {
                best = Some((cf, idx));
            }
        }
        let Some((_, idx)) = best else {
            return Err(Error::Irreplaceable { subset, worker });
        };
        let pair = &p.pairs()[idx];
        copy.subtract(&sets[pair.subset]);
        cost += pair.bid;
        picked.push(idx);
    }
    Ok(ReplacedSet { pairs: picked, cost })
}

pub fn determine_payments(
    inst: &Instance,
    p: &MatchingSet,
    s: &WinningSet,
    bids: &BidProfile,
) -> Result<PaymentProfile> {
    let sets = inst.subset_sets();
    let mut payments = vec![0.0; inst.m()];
    let mut breakdown = Vec::with_capacity(s.len());
    for w in &s.pairs {
        let replaced = replaced_set_with(&sets, p, w.subset, w.worker)?;
        let bid = bids.get(w.worker);
        let contribution = bid.max(replaced.cost);
        payments[w.worker] += contribution;
        breakdown.push(PairPayment {
            subset: w.subset,
            worker: w.worker,
            bid,
            replaced,
            contribution,
        });
    }
    Ok(PaymentProfile { payments, breakdown })
}

/// Per winning pair, contribution minus the worker's true cost; losers get 0.
pub fn utilities(pay: &PaymentProfile, inst: &Instance, s: &WinningSet) -> UtilityProfile {
    let mut utilities = vec![0.0; inst.m()];
    for (entry, w) in pay.breakdown.iter().zip(&s.pairs) {
        debug_assert_eq!(entry.worker, w.worker);
        utilities[w.worker] += entry.contribution - inst.workers[w.worker].cost;
    }
    UtilityProfile { utilities }
}
