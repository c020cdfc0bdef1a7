//! Exact minimum-cost covers over matched pairs, and the expected optimal
//! cost over random multisets of simultaneously arriving tasks.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::matching::MatchingSet;
use crate::rng::stream_rng;
use crate::taskset::TaskSet;

/// Largest number of distinct query tasks the bitmask solver accepts.
pub const MAX_EXACT_TASKS: usize = 24;
/// Largest matching the exhaustive cross-check enumerates.
pub const MAX_BRUTE_FORCE_PAIRS: usize = 20;
/// Largest number of arrival multisets enumerated exactly.
pub const MAX_ENUMERATED_MULTISETS: u128 = 1_000_000;

/// `k` tasks arrive at once, each drawn uniformly and independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub k: usize,
}

impl ArrivalModel {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    /// Probability that at least one arrival lands in a fixed set of `size`
    /// tasks out of `n`.
    pub fn hit_probability(&self, size: usize, n: usize) -> f64 {
        if size == 0 {
            return 0.0;
        }
        1.0 - (1.0 - size as f64 / n as f64).powi(self.k as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ExpectationMode {
    Exact,
    MonteCarlo { samples: usize },
    /// Exact when `n` fits the bitmask solver and the multiset count is within
    /// the enumeration cap, Monte Carlo otherwise.
    Auto { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub cost: f64,
    /// Indices (equivalently subset ids) of the chosen matching pairs.
    pub cover: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub value: f64,
    /// Present for Monte Carlo estimates.
    pub std_error: Option<f64>,
    pub samples: Option<usize>,
}

fn distinct_tasks(n: usize, arrivals: &[usize]) -> Result<Vec<usize>> {
    if let Some(&t) = arrivals.iter().find(|&&t| t >= n) {
        return Err(Error::Domain(format!("task {t} outside 0..{n}")));
    }
    let mut tasks = arrivals.to_vec();
    tasks.sort_unstable();
    tasks.dedup();
    Ok(tasks)
}

/// Minimum total bid of matched pairs covering the distinct tasks of
/// `arrivals`. Branch and bound over bitmasks of the query tasks with
/// memoised sub-results.
pub fn min_cover_cost(inst: &Instance, p: &MatchingSet, arrivals: &[usize]) -> Result<OracleResult> {
    let query = distinct_tasks(inst.n, arrivals)?;
    if query.is_empty() {
        return Ok(OracleResult {
            cost: 0.0,
            cover: Vec::new(),
        });
    }
    if query.len() > MAX_EXACT_TASKS {
        return Err(Error::SizeLimit {
            size: query.len(),
            limit: MAX_EXACT_TASKS,
        });
    }
    let position: HashMap<usize, usize> = query.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    // cheapest pair for every distinct nonzero mask
    let mut by_mask: HashMap<u32, (f64, usize)> = HashMap::new();
    for (idx, pair) in p.pairs().iter().enumerate() {
        let mask = inst.subsets[pair.subset]
            .iter()
            .filter_map(|t| position.get(t))
            .fold(0u32, |m, &i| m | (1 << i));
        if mask == 0 {
            continue;
        }
        let entry = by_mask.entry(mask).or_insert((pair.bid, idx));
        if pair.bid < entry.0 {
            *entry = (pair.bid, idx);
        }
    }
    let mut options: Vec<(u32, f64, usize)> = by_mask.into_iter().map(|(m, (b, i))| (m, b, i)).collect();
    options.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)));

    let full: u32 = if query.len() == 32 { u32::MAX } else { (1 << query.len()) - 1 };
    let reachable = options.iter().fold(0, |acc, o| acc | o.0);
    if reachable != full {
        let missing = (!reachable & full).trailing_zeros() as usize;
        return Err(Error::Uncoverable {
            task: query[missing],
        });
    }

    let mut solver = CoverSolver {
        options: &options,
        memo: HashMap::new(),
    };
    solver.solve(full);
    let mut cover = Vec::new();
    let mut rest = full;
    while rest != 0 {
        let (_, choice) = solver.memo[&rest];
        let (mask, _, idx) = options[choice.expect("covered remainder has a choice")];
        cover.push(idx);
        rest &= !mask;
    }
    cover.sort_unstable();
    // summed in pair order, independent of the search path
    let cost = cover.iter().map(|&i| p.pairs()[i].bid).sum();
    Ok(OracleResult { cost, cover })
}

struct CoverSolver<'a> {
    options: &'a [(u32, f64, usize)],
    memo: HashMap<u32, (f64, Option<usize>)>,
}

impl CoverSolver<'_> {
    fn solve(&mut self, rest: u32) -> f64 {
        if rest == 0 {
            return 0.0;
        }
        if let Some(&(cost, _)) = self.memo.get(&rest) {
            return cost;
        }
        // every cover must pick some pair holding the lowest remaining task
        let lowest = rest & rest.wrapping_neg();
        let mut best = (f64::INFINITY, None);
        for (i, &(mask, bid, _)) in self.options.iter().enumerate() {
            if mask & lowest == 0 {
                continue;
            }
            // options are sorted by bid, so nothing later can beat the incumbent
            if bid >= best.0 {
                break;
            }
            let total = bid + self.solve(rest & !mask);
            if total < best.0 {
                best = (total, Some(i));
            }
        }
        self.memo.insert(rest, best);
        best.0
    }
}

/// Exhaustive minimum over every sub-collection of `p`.
pub fn brute_force_min_cover(inst: &Instance, p: &MatchingSet, arrivals: &[usize]) -> Result<f64> {
    if p.len() > MAX_BRUTE_FORCE_PAIRS {
        return Err(Error::SizeLimit {
            size: p.len(),
            limit: MAX_BRUTE_FORCE_PAIRS,
        });
    }
    let query = TaskSet::from_tasks(inst.n, distinct_tasks(inst.n, arrivals)?);
    let sets = inst.subset_sets();
    let mut best = f64::INFINITY;
    for choice in 0u32..(1 << p.len()) {
        let mut covered = TaskSet::empty(inst.n);
        let mut cost = 0.0;
        for (idx, pair) in p.pairs().iter().enumerate() {
            if choice & (1 << idx) != 0 {
                covered.union_with(&sets[pair.subset]);
                cost += pair.bid;
            }
        }
        if query.is_subset(&covered) && cost < best {
            best = cost;
        }
    }
    if best.is_infinite() {
        let mut all = TaskSet::empty(inst.n);
        for pair in p.pairs() {
            all.union_with(&sets[pair.subset]);
        }
        let mut missing = query;
        missing.subtract(&all);
        return Err(Error::Uncoverable {
            task: missing.first().unwrap_or(0),
        });
    }
    Ok(best)
}

/// Number of size-`k` multisets over `n` items, `C(n+k-1, k)`, saturating.
pub fn multiset_count(n: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = match c.checked_mul(n as u128 + i - 1) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

/// Expected minimum cover cost `E[C_OPT(A)]` over `k` uniform arrivals.
pub fn expected_opt_cost(
    inst: &Instance,
    p: &MatchingSet,
    arrivals: ArrivalModel,
    mode: ExpectationMode,
    seed: u64,
) -> Result<Expectation> {
    match mode {
        ExpectationMode::Exact => exact_expectation(inst, p, arrivals),
        ExpectationMode::MonteCarlo { samples } => monte_carlo_expectation(inst, p, arrivals, samples, seed),
        ExpectationMode::Auto { samples } => {
            if inst.n <= MAX_EXACT_TASKS && multiset_count(inst.n, arrivals.k) <= MAX_ENUMERATED_MULTISETS {
                exact_expectation(inst, p, arrivals)
            } else {
                log::debug!(
                    "n={} k={} beyond exact enumeration; estimating with {samples} samples",
                    inst.n,
                    arrivals.k
                );
                monte_carlo_expectation(inst, p, arrivals, samples, seed)
            }
        }
    }
}

fn exact_expectation(inst: &Instance, p: &MatchingSet, arrivals: ArrivalModel) -> Result<Expectation> {
    let (n, k) = (inst.n, arrivals.k);
    let count = multiset_count(n, k);
    if count > MAX_ENUMERATED_MULTISETS {
        return Err(Error::EnumTooLarge {
            count,
            cap: MAX_ENUMERATED_MULTISETS,
        });
    }
    let log_fact: Vec<f64> = (0..=k)
        .scan(0.0, |acc, i| {
            if i > 0 {
                *acc += (i as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let log_total = k as f64 * (n as f64).ln();

    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut value = 0.0;
    let mut multiset = vec![0usize; k];
    loop {
        // multinomial weight k! / prod(c!) / n^k
        let mut log_w = log_fact[k] - log_total;
        let mut distinct = Vec::new();
        let mut run = 0;
        for i in 0..k {
            run += 1;
            if i + 1 == k || multiset[i + 1] != multiset[i] {
                log_w -= log_fact[run];
                distinct.push(multiset[i]);
                run = 0;
            }
        }
        let cost = match cache.get(&distinct) {
            Some(&c) => c,
            None => {
                let c = min_cover_cost(inst, p, &distinct)?.cost;
                cache.insert(distinct, c);
                c
            }
        };
        value += log_w.exp() * cost;

        // next nondecreasing sequence
        let Some(pos) = (0..k).rev().find(|&i| multiset[i] + 1 < n) else {
            break;
        };
        let next = multiset[pos] + 1;
        for slot in &mut multiset[pos..] {
            *slot = next;
        }
    }
    Ok(Expectation {
        value,
        std_error: None,
        samples: None,
    })
}

fn monte_carlo_expectation(
    inst: &Instance,
    p: &MatchingSet,
    arrivals: ArrivalModel,
    samples: usize,
    seed: u64,
) -> Result<Expectation> {
    if samples == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one sample".into()));
    }
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for s in 0..samples {
        let mut rng = stream_rng(seed, s as u64);
        let mut draw: Vec<usize> = (0..arrivals.k).map(|_| rng.random_range(0..inst.n)).collect();
        draw.sort_unstable();
        draw.dedup();
        let cost = match cache.get(&draw) {
            Some(&c) => c,
            None => {
                let c = min_cover_cost(inst, p, &draw)?.cost;
                cache.insert(draw, c);
                c
            }
        };
        sum += cost;
        sum_sq += cost * cost;
    }
    let count = samples as f64;
    let mean = sum / count;
    let var = if samples > 1 {
        ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(Expectation {
        value: mean,
        std_error: Some((var / count).sqrt()),
        samples: Some(samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instance::{BidProfile, Worker};
    use approx::assert_abs_diff_eq;

    fn example() -> (Instance, MatchingSet) {
        let case = fixtures::load_golden("example2-k1").unwrap();
        let bids = case.instance.truthful_bids();
        let p = MatchingSet::fixed(&case.instance, &bids).unwrap().unwrap();
        (case.instance, p)
    }

    #[test]
    fn empty_query() {
        let (inst, p) = example();
        let r = min_cover_cost(&inst, &p, &[]).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.cover.is_empty());
        assert_eq!(brute_force_min_cover(&inst, &p, &[]).unwrap(), 0.0);
    }

    #[test]
    fn example_covers() {
        let (inst, p) = example();
        // tasks are zero-based: tau_3 is task 2
        let r = min_cover_cost(&inst, &p, &[2]).unwrap();
        assert_abs_diff_eq!(r.cost, 1.8, epsilon = 1e-12);
        assert_eq!(r.cover, vec![1]);

        let r = min_cover_cost(&inst, &p, &[0, 4]).unwrap();
        assert_abs_diff_eq!(r.cost, 4.0, epsilon = 1e-12);
        assert_eq!(r.cover, vec![0, 3]);

        assert_abs_diff_eq!(brute_force_min_cover(&inst, &p, &[1, 4]).unwrap(), 3.3, epsilon = 1e-12);
        assert_eq!(min_cover_cost(&inst, &p, &[1, 4]).unwrap().cover, vec![5]);

        let all = [0, 1, 2, 3, 4];
        assert_abs_diff_eq!(brute_force_min_cover(&inst, &p, &all).unwrap(), 5.8, epsilon = 1e-12);
        assert_eq!(min_cover_cost(&inst, &p, &all).unwrap().cover, vec![0, 1, 3]);
    }

    #[test]
    fn duplicates_need_no_extra_cover() {
        let (inst, p) = example();
        let a = min_cover_cost(&inst, &p, &[4, 0, 4, 0]).unwrap();
        let b = min_cover_cost(&inst, &p, &[0, 4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uncoverable_query() {
        let inst = Instance {
            n: 3,
            b_max: 5.0,
            subsets: vec![vec![0, 1], vec![0, 1]],
            workers: vec![Worker { id: 0, cost: 1.0 }, Worker { id: 1, cost: 2.0 }],
            fixed_matching: None,
        };
        let p = MatchingSet::from_assignment(&[0, 1], &inst.truthful_bids()).unwrap();
        assert!(matches!(min_cover_cost(&inst, &p, &[2]), Err(Error::Uncoverable { task: 2 })));
        assert!(matches!(brute_force_min_cover(&inst, &p, &[1, 2]), Err(Error::Uncoverable { task: 2 })));
    }

    #[test]
    fn brute_force_size_limit() {
        let inst = Instance {
            n: 2,
            b_max: 5.0,
            subsets: vec![vec![0, 1]; 21],
            workers: vec![Worker { id: 0, cost: 1.0 }; 1],
            fixed_matching: None,
        };
        let p = MatchingSet::from_assignment(&[0; 21], &BidProfile::new(vec![1.0])).unwrap();
        assert!(matches!(
            brute_force_min_cover(&inst, &p, &[0]),
            Err(Error::SizeLimit { size: 21, limit: 20 })
        ));
    }

    #[test]
    fn expectation_single_arrival() {
        let (inst, p) = example();
        let e = expected_opt_cost(&inst, &p, ArrivalModel::new(1), ExpectationMode::Exact, 0).unwrap();
        assert_abs_diff_eq!(e.value, 1.96, epsilon = 1e-12);
    }

    #[test]
    fn expectation_two_arrivals_matches_ordered_enumeration() {
        let (inst, p) = example();
        let mut total = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                total += brute_force_min_cover(&inst, &p, &[a, b]).unwrap();
            }
        }
        let ordered = total / 25.0;
        assert_abs_diff_eq!(ordered, 2.752, epsilon = 1e-12);
        let e = expected_opt_cost(&inst, &p, ArrivalModel::new(2), ExpectationMode::Exact, 0).unwrap();
        assert_abs_diff_eq!(e.value, ordered, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let (inst, p) = example();
        let e = expected_opt_cost(
            &inst,
            &p,
            ArrivalModel::new(1),
            ExpectationMode::MonteCarlo { samples: 100_000 },
            17,
        )
        .unwrap();
        assert!((e.value - 1.96).abs() <= 0.02, "{}", e.value);
        assert!((e.value - 1.96).abs() <= 4.0 * e.std_error.unwrap());
        assert_eq!(e.samples, Some(100_000));
    }

    #[test]
    fn single_covering_pair() {
        let inst = Instance {
            n: 4,
            b_max: 5.0,
            subsets: vec![vec![0, 1, 2, 3]],
            workers: vec![Worker { id: 0, cost: 2.5 }],
            fixed_matching: None,
        };
        let p = MatchingSet::from_assignment(&[0], &inst.truthful_bids()).unwrap();
        for k in 1..=4 {
            let e = expected_opt_cost(&inst, &p, ArrivalModel::new(k), ExpectationMode::Exact, 0).unwrap();
            assert_abs_diff_eq!(e.value, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn enumeration_cap() {
        assert_eq!(multiset_count(3, 2), 6);
        assert_eq!(multiset_count(5, 2), 15);
        assert_eq!(multiset_count(120, 1), 120);
        let inst = Instance {
            n: 60,
            b_max: 5.0,
            subsets: vec![(0..60).collect()],
            workers: vec![Worker { id: 0, cost: 1.0 }],
            fixed_matching: None,
        };
        let p = MatchingSet::from_assignment(&[0], &inst.truthful_bids()).unwrap();
        assert!(matches!(
            expected_opt_cost(&inst, &p, ArrivalModel::new(5), ExpectationMode::Exact, 0),
            Err(Error::EnumTooLarge { .. })
        ));
        let auto = expected_opt_cost(&inst, &p, ArrivalModel::new(5), ExpectationMode::Auto { samples: 200 }, 0)
            .unwrap();
        assert_eq!(auto.samples, Some(200));
    }

    #[test]
    fn hit_probability() {
        let a = ArrivalModel::new(2);
        assert_abs_diff_eq!(a.hit_probability(1, 3), 5.0 / 9.0, epsilon = 1e-15);
        assert_eq!(a.hit_probability(0, 3), 0.0);
        assert_eq!(a.hit_probability(3, 3), 1.0);
    }
}
