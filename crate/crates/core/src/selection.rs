//! Winner selection: repeated greedy picks over the matching set until every
//! task is covered.
//!
//! Each round compares the best cost-effectiveness against the fair share of
//! the selection threshold over the still-uncovered tasks. When some pair is
//! within it the most cost-effective pair wins (type I); otherwise the
//! cheapest pair that still covers something new wins (type II).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::matching::{MatchingPair, MatchingSet};
use crate::oracle::{expected_opt_cost, ArrivalModel, ExpectationMode};
use crate::taskset::TaskSet;

/// Multiplier applied to the expected optimal cover cost.
pub const THRESHOLD_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionType {
    /// Minimum cost-effectiveness pick.
    I,
    /// Lowest bid pick.
    II,
}

impl fmt::Display for SelectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionType::I => "I",
            SelectionType::II => "II",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinningPair {
    pub subset: usize,
    pub worker: usize,
    pub bid: f64,
    /// Tasks this pair newly covered when it was selected.
    pub coverage: Vec<usize>,
    pub kind: SelectionType,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinningSet {
    pub pairs: Vec<WinningPair>,
    /// The selection threshold; absent for the baseline rules.
    pub threshold: Option<f64>,
}

impl WinningSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, subset: usize, worker: usize) -> bool {
        self.pairs.iter().any(|w| w.subset == subset && w.worker == worker)
    }

    /// Winning `(subset, worker)` pairs sorted by subset.
    pub fn sorted_pairs(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.pairs.iter().map(|w| (w.subset, w.worker)).collect();
        v.sort_unstable();
        v
    }

    pub fn is_winner(&self, worker: usize) -> bool {
        self.pairs.iter().any(|w| w.worker == worker)
    }

    /// Sum of `costs[worker]` over every winning pair.
    pub fn total_cost(&self, costs: &[f64]) -> f64 {
        self.pairs.iter().map(|w| costs[w.worker]).sum()
    }

    /// Expected cost charged to a random arrival set: a winner counts iff one
    /// of the arrivals falls in the tasks it newly covered.
    pub fn expected_attributed_cost(&self, costs: &[f64], n: usize, arrivals: ArrivalModel) -> f64 {
        self.pairs
            .iter()
            .map(|w| costs[w.worker] * arrivals.hit_probability(w.coverage.len(), n))
            .sum()
    }
}

/// How the selection threshold's expectation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub arrivals: ArrivalModel,
    pub mode: ExpectationMode,
    pub seed: u64,
}

impl ThresholdConfig {
    pub fn exact(k: usize) -> Self {
        Self {
            arrivals: ArrivalModel::new(k),
            mode: ExpectationMode::Exact,
            seed: 0,
        }
    }
}

pub fn selection_threshold(inst: &Instance, p: &MatchingSet, cfg: &ThresholdConfig) -> Result<f64> {
    let e = expected_opt_cost(inst, p, cfg.arrivals, cfg.mode, cfg.seed)?;
    Ok(THRESHOLD_FACTOR * e.value)
}

/// `bid / |subset ∩ uncovered|`, infinite when nothing new would be covered.
pub fn cost_effectiveness(bid: f64, subset: &TaskSet, uncovered: &TaskSet) -> f64 {
    match subset.intersection_len(uncovered) {
        0 => f64::INFINITY,
        c => bid / c as f64,
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Rule {
    Threshold(f64),
    MinCostEffectiveness,
    MinBid,
}

pub fn select_winners(inst: &Instance, p: &MatchingSet, threshold: f64) -> Result<WinningSet> {
    greedy(inst, p, Rule::Threshold(threshold))
}

/// Orders candidates by `key`, then lower worker id, then lower subset index.
fn better(a: (f64, &MatchingPair), b: (f64, &MatchingPair)) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.1.worker.cmp(&b.1.worker))
        .then(a.1.subset.cmp(&b.1.subset))
        == Ordering::Less
}

pub(crate) fn greedy(inst: &Instance, p: &MatchingSet, rule: Rule) -> Result<WinningSet> {
    let sets = inst.subset_sets();
    let mut uncovered = inst.universe();
    let mut available = vec![true; p.len()];
    let mut winners = Vec::new();

    while !uncovered.is_empty() {
        let mut best_cf: Option<(f64, usize)> = None;
        let mut best_bid: Option<(f64, usize)> = None;
        for (idx, pair) in p.pairs().iter().enumerate() {
            if !available[idx] {
                continue;
            }
            let cf = cost_effectiveness(pair.bid, &sets[pair.subset], &uncovered);
            if cf.is_infinite() {
                continue;
            }
            if best_cf.is_none_or(|(v, i)| better((cf, pair), (v, &p.pairs()[i]))) {
                best_cf = Some((cf, idx));
            }
            if best_bid.is_none_or(|(v, i)| better((pair.bid, pair), (v, &p.pairs()[i]))) {
                best_bid = Some((pair.bid, idx));
            }
        }
        let (Some((cf, cf_idx)), Some((_, bid_idx))) = (best_cf, best_bid) else {
            return Err(Error::Uncoverable {
                task: uncovered.first().unwrap_or(0),
            });
        };

        let (idx, kind) = match rule {
            Rule::Threshold(t) if cf <= t / uncovered.len() as f64 => (cf_idx, SelectionType::I),
            Rule::Threshold(_) => (bid_idx, SelectionType::II),
            Rule::MinCostEffectiveness => (cf_idx, SelectionType::I),
            Rule::MinBid => (bid_idx, SelectionType::II),
        };
        let pair = p.pairs()[idx];
        let gained = sets[pair.subset].intersection(&uncovered);
        uncovered.subtract(&gained);
        available[idx] = false;
        winners.push(WinningPair {
            subset: pair.subset,
            worker: pair.worker,
            bid: pair.bid,
            coverage: gained.to_vec(),
            kind,
            round: winners.len(),
        });
    }

    Ok(WinningSet {
        pairs: winners,
        threshold: match rule {
            Rule::Threshold(t) => Some(t),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instance::Worker;
    use approx::assert_abs_diff_eq;

    fn example() -> (Instance, MatchingSet) {
        let case = fixtures::load_golden("example2-k1").unwrap();
        let bids = case.instance.truthful_bids();
        let p = MatchingSet::fixed(&case.instance, &bids).unwrap().unwrap();
        (case.instance, p)
    }

    #[test]
    fn example_threshold() {
        let (inst, p) = example();
        let t = selection_threshold(&inst, &p, &ThresholdConfig::exact(1)).unwrap();
        assert_abs_diff_eq!(t, 125.44, epsilon = 1e-9);
    }

    #[test]
    fn example_threshold_monte_carlo() {
        let (inst, p) = example();
        let cfg = ThresholdConfig {
            arrivals: ArrivalModel::new(1),
            mode: ExpectationMode::MonteCarlo { samples: 100_000 },
            seed: 5,
        };
        let t = selection_threshold(&inst, &p, &cfg).unwrap();
        assert!((t - 125.44).abs() <= 1.3, "{t}");
    }

    #[test]
    fn single_pair_threshold() {
        let inst = Instance {
            n: 3,
            b_max: 5.0,
            subsets: vec![vec![0, 1, 2]],
            workers: vec![Worker { id: 0, cost: 2.0 }],
            fixed_matching: None,
        };
        let p = MatchingSet::from_assignment(&[0], &inst.truthful_bids()).unwrap();
        for k in 1..=3 {
            let t = selection_threshold(&inst, &p, &ThresholdConfig::exact(k)).unwrap();
            assert_abs_diff_eq!(t, 128.0, epsilon = 1e-12);
        }
        let s = select_winners(&inst, &p, 128.0).unwrap();
        assert_eq!(s.sorted_pairs(), vec![(0, 0)]);
    }

    #[test]
    fn cost_effectiveness_values() {
        let (inst, p) = example();
        let sets = inst.subset_sets();
        let all = inst.universe();
        assert_abs_diff_eq!(cost_effectiveness(p.pairs()[0].bid, &sets[0], &all), 0.7, epsilon = 1e-15);
        let rest = TaskSet::from_tasks(5, [2, 3, 4]);
        assert_abs_diff_eq!(cost_effectiveness(p.pairs()[3].bid, &sets[3], &rest), 1.3, epsilon = 1e-15);
        let none = TaskSet::from_tasks(5, [2]);
        assert!(cost_effectiveness(1.0, &sets[3], &none).is_infinite());
    }

    #[test]
    fn example_winners() {
        let (inst, p) = example();
        let s = select_winners(&inst, &p, 125.44).unwrap();
        let order: Vec<usize> = s.pairs.iter().map(|w| w.subset).collect();
        assert_eq!(order, vec![0, 3, 1]);
        assert!(s.pairs.iter().all(|w| w.kind == SelectionType::I));
        assert_eq!(s.sorted_pairs(), vec![(0, 0), (1, 1), (3, 3)]);
        assert_eq!(s.pairs[0].coverage, vec![0, 1]);
        assert_eq!(s.pairs[1].coverage, vec![3, 4]);
        assert_eq!(s.pairs[2].coverage, vec![2]);
        assert_eq!(s.threshold, Some(125.44));
    }

    #[test]
    fn zero_threshold_is_all_type_two() {
        let (inst, p) = example();
        let s = select_winners(&inst, &p, 0.0).unwrap();
        assert!(s.pairs.iter().all(|w| w.kind == SelectionType::II));
        assert_eq!(s.pairs[0].worker, 0);
    }

    #[test]
    fn uncoverable_matching() {
        let inst = Instance {
            n: 3,
            b_max: 5.0,
            subsets: vec![vec![0, 1], vec![1, 2]],
            workers: vec![Worker { id: 0, cost: 1.0 }],
            fixed_matching: None,
        };
        // only the first subset is offered
        let p = MatchingSet::from_assignment(&[0], &inst.truthful_bids()).unwrap();
        assert!(matches!(select_winners(&inst, &p, 10.0), Err(Error::Uncoverable { task: 2 })));
    }

    #[test]
    fn attributed_cost_on_example() {
        let (inst, p) = example();
        let s = select_winners(&inst, &p, 125.44).unwrap();
        // enumerate the five single arrivals directly
        let mut total = 0.0;
        for t in 0..5 {
            for w in &s.pairs {
                if w.coverage.contains(&t) {
                    total += inst.workers[w.worker].cost;
                }
            }
        }
        let direct = total / 5.0;
        let closed = s.expected_attributed_cost(&inst.costs(), 5, ArrivalModel::new(1));
        assert_abs_diff_eq!(direct, 1.96, epsilon = 1e-12);
        assert_abs_diff_eq!(closed, direct, epsilon = 1e-12);
    }
}
