//! Problem instances: the task universe, the subset family, the worker roster
//! and the bid bound.

use std::fmt;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::taskset::TaskSet;

/// Lower bid bound. Bids and costs are normalised so that it is always 1.
pub const B_MIN: f64 = 1.0;

/// Maximum number of subset regenerations while repairing task coverage.
pub const REPAIR_ATTEMPTS: usize = 1_000;

/// Full redraws of the subsets before generation gives up.
pub const REDRAWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: usize,
    pub cost: f64,
}

/// Pins a subset to a worker, bypassing the randomized matching phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPair {
    pub subset: usize,
    pub worker: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub b_max: f64,
    pub subsets: Vec<Vec<usize>>,
    pub workers: Vec<Worker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_matching: Option<Vec<FixedPair>>,
}

impl Instance {
    pub fn m(&self) -> usize {
        self.workers.len()
    }

    pub fn l(&self) -> usize {
        self.subsets.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.workers.iter().map(|w| w.cost).collect()
    }

    /// The bid profile under truthful play (every bid equals the cost).
    pub fn truthful_bids(&self) -> BidProfile {
        BidProfile::new(self.costs())
    }

    pub fn subset_sets(&self) -> Vec<TaskSet> {
        self.subsets
            .iter()
            .map(|s| TaskSet::from_tasks(self.n, s.iter().copied()))
            .collect()
    }

    pub fn universe(&self) -> TaskSet {
        TaskSet::full(self.n)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_instance(self)
    }

    /// Returns `self` if valid, otherwise the list of violations as an error.
    pub fn checked(self) -> Result<Self> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidInstance(report.violations))
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Bids aligned with worker ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BidProfile(Vec<f64>);

impl BidProfile {
    pub fn new(bids: Vec<f64>) -> Self {
        Self(bids)
    }

    pub fn bids(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, worker: usize) -> f64 {
        self.0[worker]
    }

    /// A copy of the profile with one worker's bid replaced.
    pub fn with_bid(&self, worker: usize, bid: f64) -> Self {
        let mut bids = self.0.clone();
        bids[worker] = bid;
        Self(bids)
    }

    pub fn check_range(&self, b_max: f64) -> Result<()> {
        match self
            .0
            .iter()
            .position(|b| !(B_MIN..=b_max).contains(b))
        {
            Some(i) => Err(Error::Domain(format!(
                "bid {} of worker {i} outside [{B_MIN}, {b_max}]",
                self.0[i]
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyUniverse,
    BadBidBound { b_max: f64 },
    EmptySubset { subset: usize },
    TaskOutOfRange { subset: usize, task: usize },
    DuplicateTask { subset: usize, task: usize },
    UncoveredTask { task: usize },
    LowCoverage { task: usize, count: usize },
    TooManySubsets { l: usize, m: usize, n: usize },
    CostOutOfRange { worker: usize, cost: f64 },
    WorkerId { index: usize, id: usize },
    FixedMatching(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyUniverse => write!(f, "n=0"),
            Violation::BadBidBound { b_max } => write!(f, "b_max>1 fails (b_max={b_max})"),
            Violation::EmptySubset { subset } => write!(f, "subset {subset} is empty"),
            Violation::TaskOutOfRange { subset, task } => {
                write!(f, "subset {subset} holds out-of-range task {task}")
            }
            Violation::DuplicateTask { subset, task } => {
                write!(f, "subset {subset} lists task {task} twice")
            }
            Violation::UncoveredTask { task } => write!(f, "union≠T: task {task} uncovered"),
            Violation::LowCoverage { task, count } => {
                write!(f, "coverage<2: task {task} in {count} subset(s)")
            }
            Violation::TooManySubsets { l, m, n } => write!(f, "l<mn fails ({l} ≥ {m}·{n})"),
            Violation::CostOutOfRange { worker, cost } => {
                write!(f, "cost {cost} of worker {worker} outside [1, b_max]")
            }
            Violation::WorkerId { index, id } => {
                write!(f, "worker at index {index} has id {id}")
            }
            Violation::FixedMatching(msg) => write!(f, "fixed_matching: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    let n = inst.n;
    if n == 0 {
        violations.push(Violation::EmptyUniverse);
    }
    if inst.b_max.is_nan() || inst.b_max <= B_MIN {
        violations.push(Violation::BadBidBound { b_max: inst.b_max });
    }

    let mut coverage = vec![0usize; n];
    for (j, subset) in inst.subsets.iter().enumerate() {
        if subset.is_empty() {
            violations.push(Violation::EmptySubset { subset: j });
        }
        let mut seen = TaskSet::empty(n);
        for &t in subset {
            if t >= n {
                violations.push(Violation::TaskOutOfRange { subset: j, task: t });
            } else if seen.contains(t) {
                violations.push(Violation::DuplicateTask { subset: j, task: t });
            } else {
                seen.insert(t);
                coverage[t] += 1;
            }
        }
    }
    for (t, &count) in coverage.iter().enumerate() {
        if count == 0 {
            violations.push(Violation::UncoveredTask { task: t });
        }
        if count < 2 {
            violations.push(Violation::LowCoverage { task: t, count });
        }
    }

    let (l, m) = (inst.l(), inst.m());
    if l >= m.saturating_mul(n) {
        violations.push(Violation::TooManySubsets { l, m, n });
    }
    for (i, w) in inst.workers.iter().enumerate() {
        if w.id != i {
            violations.push(Violation::WorkerId { index: i, id: w.id });
        }
        if !(B_MIN..=inst.b_max).contains(&w.cost) {
            violations.push(Violation::CostOutOfRange {
                worker: i,
                cost: w.cost,
            });
        }
    }

    if let Some(fixed) = &inst.fixed_matching {
        if fixed.len() != l {
            violations.push(Violation::FixedMatching(format!(
                "{} pairs for {l} subsets",
                fixed.len()
            )));
        }
        for (j, pair) in fixed.iter().enumerate() {
            if pair.subset != j {
                violations.push(Violation::FixedMatching(format!(
                    "entry {j} names subset {}",
                    pair.subset
                )));
            }
            if pair.worker >= m {
                violations.push(Violation::FixedMatching(format!(
                    "entry {j} names unknown worker {}",
                    pair.worker
                )));
            }
        }
    }

    ValidationReport { violations }
}

/// Shape of one randomly generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub n: usize,
    pub m: usize,
    /// Number of subsets; the roster size `m` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub cost_range: [f64; 2],
    pub size_range: [usize; 2],
    pub b_max: f64,
}

impl InstanceParams {
    pub fn subset_count(&self) -> usize {
        self.l.unwrap_or(self.m)
    }

    /// Small instances whose subsets hold roughly a third to a half of the
    /// tasks, sized for exact cover computations.
    pub fn desk(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            l: None,
            cost_range: [1.0, 5.0],
            size_range: [n.div_ceil(3), n / 2],
            b_max: 5.0,
        }
    }

    fn check(&self) -> Result<()> {
        let [c_lo, c_hi] = self.cost_range;
        let [s_lo, s_hi] = self.size_range;
        if self.n == 0 || self.m == 0 || self.subset_count() == 0 {
            return Err(Error::Domain("n, m and l must be positive".into()));
        }
        if !(B_MIN <= c_lo && c_lo <= c_hi && c_hi <= self.b_max) || self.b_max <= B_MIN {
            return Err(Error::Domain(format!(
                "cost interval [{c_lo}, {c_hi}] not within [1, {}]",
                self.b_max
            )));
        }
        if s_lo == 0 || s_lo > s_hi {
            return Err(Error::Domain(format!(
                "bad subset-size interval [{s_lo}, {s_hi}]"
            )));
        }
        Ok(())
    }
}

/// Draws a random instance: uniform costs, uniform subset sizes and uniform
/// subset membership. Tasks left in fewer than two subsets are repaired by
/// redrawing one subset at a time so that it contains the deficient task.
/// When the repair budget runs out (the drawn sizes may simply be too small)
/// all subsets are drawn again, up to [`REDRAWS`] times.
pub fn generate_instance(params: &InstanceParams, seed: u64) -> Result<Instance> {
    params.check()?;
    let n = params.n;
    let l = params.subset_count();
    let [c_lo, c_hi] = params.cost_range;
    let [s_lo, s_hi] = params.size_range;

    let mut rng = stream_rng(seed, 0);
    let workers: Vec<Worker> = (0..params.m)
        .map(|id| Worker {
            id,
            cost: if c_lo == c_hi {
                c_lo
            } else {
                rng.random_range(c_lo..=c_hi)
            },
        })
        .collect();

    if l * s_hi.min(n) < 2 * n {
        return Err(Error::GenerationExhausted { attempts: 0 });
    }
    let mut rng = stream_rng(seed, 1);
    let mut attempts = 0;
    for _ in 0..REDRAWS {
        let sizes: Vec<usize> = (0..l).map(|_| rng.random_range(s_lo..=s_hi).min(n)).collect();
        if sizes.iter().sum::<usize>() < 2 * n {
            attempts += 1;
            continue;
        }
        let mut subsets: Vec<Vec<usize>> = sizes
            .iter()
            .map(|&size| sorted(index::sample(&mut rng, n, size).into_vec()))
            .collect();
        if repair(&mut subsets, n, &mut rng, &mut attempts) {
            let inst = Instance {
                n,
                b_max: params.b_max,
                subsets,
                workers,
                fixed_matching: None,
            };
            return inst.checked().map_err(|e| match e {
                Error::InvalidInstance(_) => Error::GenerationExhausted { attempts },
                other => other,
            });
        }
    }
    Err(Error::GenerationExhausted { attempts })
}

/// Redraws subsets until every task is covered twice; false when the repair
/// budget runs out.
fn repair(subsets: &mut [Vec<usize>], n: usize, rng: &mut impl Rng, attempts: &mut usize) -> bool {
    for _ in 0..=REPAIR_ATTEMPTS {
        let mut coverage = vec![0usize; n];
        for s in subsets.iter() {
            for &t in s {
                coverage[t] += 1;
            }
        }
        let Some(task) = coverage.iter().position(|&c| c < 2) else {
            return true;
        };
        *attempts += 1;
        let candidates: Vec<usize> = (0..subsets.len()).filter(|&j| !subsets[j].contains(&task)).collect();
        if candidates.is_empty() {
            return false;
        }
        let j = candidates[rng.random_range(0..candidates.len())];
        let size = subsets[j].len();
        let mut members: Vec<usize> = index::sample(rng, n - 1, size - 1)
            .into_iter()
            .map(|t| if t >= task { t + 1 } else { t })
            .collect();
        members.push(task);
        subsets[j] = sorted(members);
    }
    false
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}
