//! Mechanical checks of the mechanism's guarantees: exact privacy-loss ratios
//! on small cases, bid-deviation sweeps, individual rationality and the
//! explicit competitive-ratio ceiling.

use serde::{Deserialize, Serialize};

use crate::auction::{run_auction, AuctionOutcome, Mechanism};
use crate::error::{Error, Result};
use crate::instance::{generate_instance, BidProfile, Instance, InstanceParams, B_MIN};
use crate::matching::{match_workers, outcome_log_probability, MatchMode, MatchingSet};
use crate::oracle::{expected_opt_cost, ArrivalModel, ExpectationMode};
use crate::rng::derive_seed;
use crate::scorefn::{matching_probabilities, ScoreKind};
use crate::selection::{select_winners, ThresholdConfig, THRESHOLD_FACTOR};

/// Largest `m^l` outcome space the exact privacy audit will enumerate.
pub const MAX_DP_OUTCOMES: u128 = 256;

/// Slack allowed on every audited inequality.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpAuditReport {
    pub epsilon: f64,
    pub kind: ScoreKind,
    pub m: usize,
    pub l: usize,
    pub profiles: usize,
    pub neighbor_pairs: usize,
    pub worst_ratio: f64,
    /// The profile pair attaining `worst_ratio`, as `(b, b')`.
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    /// `exp(ε(e−1)l/2)`, the gate.
    pub proven_bound: f64,
    /// `exp(εl/2)`, reported only.
    pub stated_bound: f64,
    pub pass: bool,
    pub within_stated: bool,
}

pub fn proven_dp_bound(epsilon: f64, l: usize) -> f64 {
    (epsilon * (std::f64::consts::E - 1.0) * l as f64 / 2.0).exp()
}

pub fn stated_dp_bound(epsilon: f64, l: usize) -> f64 {
    (epsilon * l as f64 / 2.0).exp()
}

/// Every profile whose bids are drawn from `{b_min, midpoint, b_max}`.
pub fn default_bid_grid(m: usize, b_max: f64) -> Vec<Vec<f64>> {
    let levels = [B_MIN, (B_MIN + b_max) / 2.0, b_max];
    let mut grid = vec![Vec::with_capacity(m)];
    for _ in 0..m {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                levels.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    grid
}

/// Single-coordinate replacements tried for a bid `b`.
pub fn neighbor_values(b: f64, b_max: f64) -> Vec<f64> {
    let mut vals = vec![
        B_MIN,
        (B_MIN + b_max) / 2.0,
        b_max,
        (b * 1.1).clamp(B_MIN, b_max),
        (b * 0.9).clamp(B_MIN, b_max),
    ];
    vals.retain(|&v| v != b);
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals
}

/// Enumerates all `m^l` matching outcomes for each grid profile and each
/// neighbor of it, and records the largest probability ratio in either
/// direction. An empty grid falls back to [`default_bid_grid`].
pub fn dp_exact_audit(
    inst: &Instance,
    kind: ScoreKind,
    epsilon: f64,
    bid_grid: &[Vec<f64>],
) -> Result<DpAuditReport> {
    let (m, l) = (inst.m(), inst.l());
    let outcomes = (m as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if m > 4 || l > 4 || outcomes > MAX_DP_OUTCOMES {
        return Err(Error::EnumTooLarge {
            count: outcomes,
            cap: MAX_DP_OUTCOMES,
        });
    }
    let fallback;
    let grid = if bid_grid.is_empty() {
        fallback = default_bid_grid(m, inst.b_max);
        &fallback[..]
    } else {
        bid_grid
    };

    let assignments = all_assignments(m, l);
    let mut worst = 1.0_f64;
    let mut worst_pair = None;
    let mut pairs = 0;
    for profile in grid {
        let b = BidProfile::new(profile.clone());
        b.check_range(inst.b_max)?;
        for i in 0..m {
            for v in neighbor_values(b.get(i), inst.b_max) {
                let b2 = b.with_bid(i, v);
                pairs += 1;
                let ratio = outcome_ratio(&assignments, &b, &b2, kind, epsilon, inst.b_max)?;
                if ratio > worst {
                    worst = ratio;
                    worst_pair = Some((b.bids().to_vec(), b2.bids().to_vec()));
                }
            }
        }
    }
    let proven_bound = proven_dp_bound(epsilon, l);
    let stated_bound = stated_dp_bound(epsilon, l);
    Ok(DpAuditReport {
        epsilon,
        kind,
        m,
        l,
        profiles: grid.len(),
        neighbor_pairs: pairs,
        worst_ratio: worst,
        worst_pair,
        proven_bound,
        stated_bound,
        pass: worst <= proven_bound * (1.0 + TOLERANCE),
        within_stated: worst <= stated_bound * (1.0 + TOLERANCE),
    })
}

/// Largest probability ratio, in either direction, that any outcome in
/// `assignments` has under `b` versus `b2`.
fn outcome_ratio(
    assignments: &[Vec<usize>],
    b: &BidProfile,
    b2: &BidProfile,
    kind: ScoreKind,
    epsilon: f64,
    b_max: f64,
) -> Result<f64> {
    let dist = matching_probabilities(b, kind, epsilon, b_max)?;
    let dist2 = matching_probabilities(b2, kind, epsilon, b_max)?;
    let mut worst = 1.0_f64;
    for a in assignments {
        let o1 = MatchingSet::from_assignment(a, b)?;
        let o2 = MatchingSet::from_assignment(a, b2)?;
        let diff = outcome_log_probability(&o1, &dist) - outcome_log_probability(&o2, &dist2);
        worst = worst.max(diff.abs().exp());
    }
    Ok(worst)
}

fn all_assignments(m: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(l)];
    for _ in 0..l {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..m).map(move |w| {
                    let mut next = prefix.clone();
                    next.push(w);
                    next
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub worker: usize,
    pub truthful_utility: f64,
    pub max_gain: f64,
    /// Bid attaining `max_gain`, if any deviation gained.
    pub best_deviation: Option<f64>,
    pub grid_size: usize,
    pub pass: bool,
}

pub fn bid_grid_points(grid_size: usize, b_max: f64) -> Vec<f64> {
    match grid_size {
        0 => vec![],
        1 => vec![B_MIN],
        g => (0..g)
            .map(|i| B_MIN + (b_max - B_MIN) * i as f64 / (g - 1) as f64)
            .collect(),
    }
}

/// Replays selection and payment on the fixed matching `p` with only
/// `worker`'s bid changed, over `grid_size` evenly spaced bids in
/// `[b_min, b_max]`. The threshold is recomputed from the deviated bids.
pub fn truthfulness_audit(
    inst: &Instance,
    p: &MatchingSet,
    worker: usize,
    grid_size: usize,
    mechanism: Mechanism,
    threshold: &ThresholdConfig,
) -> Result<TruthReport> {
    let truthful = inst.truthful_bids();
    let base = run_auction(inst, &p.rebid(&truthful), mechanism, threshold)?;
    let truthful_utility = base.utilities.utilities[worker];
    let mut max_gain = 0.0_f64;
    let mut best_deviation = None;
    for b in bid_grid_points(grid_size, inst.b_max) {
        let deviated = p.rebid(&truthful.with_bid(worker, b));
        let out = run_auction(inst, &deviated, mechanism, threshold)?;
        let gain = out.utilities.utilities[worker] - truthful_utility;
        if gain > max_gain {
            max_gain = gain;
            best_deviation = Some(b);
        }
    }
    Ok(TruthReport {
        worker,
        truthful_utility,
        max_gain,
        best_deviation,
        grid_size,
        pass: max_gain <= TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IrViolation {
    /// A winning pair paid less than the worker's true cost.
    Underpaid { subset: usize, worker: usize, contribution: f64, cost: f64 },
    NegativeUtility { worker: usize, utility: f64 },
    LoserUtility { worker: usize, utility: f64 },
}

/// Checks a truthful run: every winning contribution covers the true cost and
/// losers end with exactly zero utility.
pub fn ir_violations(inst: &Instance, out: &AuctionOutcome) -> Vec<IrViolation> {
    let mut v = Vec::new();
    for entry in &out.payments.breakdown {
        let cost = inst.workers[entry.worker].cost;
        if entry.contribution < cost - TOLERANCE {
            v.push(IrViolation::Underpaid {
                subset: entry.subset,
                worker: entry.worker,
                contribution: entry.contribution,
                cost,
            });
        }
    }
    for (worker, &utility) in out.utilities.utilities.iter().enumerate() {
        if out.winners.is_winner(worker) {
            if utility < -TOLERANCE {
                v.push(IrViolation::NegativeUtility { worker, utility });
            }
        } else if utility != 0.0 || out.payments.payments[worker] != 0.0 {
            v.push(IrViolation::LoserUtility { worker, utility });
        }
    }
    v
}

/// `64 ln n + 8 ln 2n + 16 ln l`.
pub fn ratio_ceiling(n: usize, l: usize) -> f64 {
    let (n, l) = (n as f64, l as f64);
    64.0 * n.ln() + 8.0 * (2.0 * n).ln() + 16.0 * l.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: usize,
    /// Mean over seeds of the winners' expected attributed cost.
    pub mechanism_cost: f64,
    /// Mean over seeds of the expected optimal cover cost.
    pub opt_cost: f64,
    pub ratio: f64,
    pub ceiling: f64,
    pub seeds: usize,
    pub pass: bool,
}

/// Expected attributed cost of the mechanism's winners and the expected
/// optimal cost on one matching.
pub fn ratio_sample(inst: &Instance, p: &MatchingSet, arrivals: ArrivalModel, mode: ExpectationMode, seed: u64) -> Result<(f64, f64)> {
    let opt = expected_opt_cost(inst, p, arrivals, mode, seed)?.value;
    let s = select_winners(inst, p, THRESHOLD_FACTOR * opt)?;
    Ok((s.expected_attributed_cost(&inst.costs(), inst.n, arrivals), opt))
}

fn ratio_report(inst_shape: (usize, usize, usize), k: usize, samples: &[(f64, f64)]) -> RatioReport {
    let (n, m, l) = inst_shape;
    let count = samples.len().max(1) as f64;
    let mechanism_cost = samples.iter().map(|s| s.0).sum::<f64>() / count;
    let opt_cost = samples.iter().map(|s| s.1).sum::<f64>() / count;
    let ratio = if opt_cost > 0.0 { mechanism_cost / opt_cost } else { 1.0 };
    let ceiling = ratio_ceiling(n, l);
    RatioReport {
        n,
        m,
        l,
        k,
        mechanism_cost,
        opt_cost,
        ratio,
        ceiling,
        seeds: samples.len(),
        pass: ratio <= ceiling * (1.0 + TOLERANCE),
    }
}

/// Ratio on a single instance: its pinned matching if it has one, otherwise
/// one sampled matching per seed.
pub fn ratio_audit_instance(
    inst: &Instance,
    kind: ScoreKind,
    epsilon: f64,
    k: usize,
    seeds: usize,
    base_seed: u64,
    match_mode: MatchMode,
) -> Result<RatioReport> {
    let arrivals = ArrivalModel::new(k);
    let bids = inst.truthful_bids();
    let samples = if let Some(p) = MatchingSet::fixed(inst, &bids)? {
        vec![ratio_sample(inst, &p, arrivals, ExpectationMode::Exact, base_seed)?]
    } else {
        let dist = matching_probabilities(&bids, kind, epsilon, inst.b_max)?;
        (0..seeds as u64)
            .map(|s| {
                let seed = derive_seed(base_seed, s);
                let p = match_workers(inst, &bids, &dist, seed, match_mode)?;
                ratio_sample(inst, &p, arrivals, ExpectationMode::Exact, seed)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ratio_report((inst.n, inst.m(), inst.l()), k, &samples))
}

/// Ratio over freshly generated instances, one per seed.
pub fn ratio_audit(
    params: &InstanceParams,
    kind: ScoreKind,
    epsilon: f64,
    k: usize,
    seeds: usize,
    base_seed: u64,
    match_mode: MatchMode,
) -> Result<RatioReport> {
    let arrivals = ArrivalModel::new(k);
    let samples = (0..seeds as u64)
        .map(|s| {
            let seed = derive_seed(base_seed, s);
            let inst = generate_instance(params, seed)?;
            let bids = inst.truthful_bids();
            let dist = matching_probabilities(&bids, kind, epsilon, inst.b_max)?;
            let p = match_workers(&inst, &bids, &dist, derive_seed(seed, 1), match_mode)?;
            ratio_sample(&inst, &p, arrivals, ExpectationMode::Exact, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratio_report((params.n, params.m, params.subset_count()), k, &samples))
}
