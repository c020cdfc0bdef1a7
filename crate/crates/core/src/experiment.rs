//! Seeded simulation sweeps over the four evaluation settings, with CSV,
//! summary, manifest and plot-script output.
//!
//! Every run draws one instance. Each score kind then samples its own matching,
//! both from the same uniform draws (a seed that depends on the run only, not
//! on the kind or ε), so kinds and ε values are compared on common random
//! numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auction::{select, settle, Mechanism};
use crate::error::{Error, Result};
use crate::instance::{generate_instance, InstanceParams};
use crate::matching::{match_workers, MatchMode, MatchingSet};
use crate::oracle::{ArrivalModel, ExpectationMode};
use crate::rng::derive_seed;
use crate::scorefn::{matching_probabilities, ScoreKind};
use crate::selection::ThresholdConfig;
use crate::stats;

pub const CSV_HEADER: [&str; 16] = [
    "setting", "mechanism", "score", "epsilon", "m", "n", "l", "k", "run_id", "seed",
    "social_cost", "total_payment", "winners", "match_ms", "select_ms", "pay_ms",
];

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_THRESHOLD_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    I,
    II,
    III,
    IV,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::I => "I",
            Setting::II => "II",
            Setting::III => "III",
            Setting::IV => "IV",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Setting::I),
            "II" | "2" => Ok(Setting::II),
            "III" | "3" => Ok(Setting::III),
            "IV" | "4" => Ok(Setting::IV),
            other => Err(Error::Domain(format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Desk,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::Domain(format!("unknown scale `{other}`"))),
        }
    }
}

/// Which matching the baselines run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// The linear-score matching drawn for the main mechanism.
    #[default]
    Shared,
    /// A fresh linear-score matching per baseline.
    Independent,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shared" => Ok(Protocol::Shared),
            "independent" => Ok(Protocol::Independent),
            other => Err(Error::Domain(format!("unknown protocol `{other}`"))),
        }
    }
}

/// One curve of a setting: fixed intervals, a list of `(m, n)` sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub label: String,
    pub cost_range: [f64; 2],
    pub size_range: [usize; 2],
    pub b_max: f64,
    pub points: Vec<(usize, usize)>,
}

impl ScenarioConfig {
    pub fn params(&self, m: usize, n: usize) -> InstanceParams {
        InstanceParams {
            n,
            m,
            l: None,
            cost_range: self.cost_range,
            size_range: self.size_range,
            b_max: self.b_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenarios: Vec<ScenarioConfig>,
    pub epsilons: Vec<f64>,
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    pub match_mode: MatchMode,
    pub protocol: Protocol,
    pub threshold: ExpectationMode,
    /// Record wall-clock phase times; otherwise the columns hold 0.
    pub timing: bool,
}

fn sweep(range: std::ops::RangeInclusive<usize>, step: usize) -> Vec<usize> {
    range.step_by(step).collect()
}

fn scenario(label: impl Into<String>, cost: [f64; 2], size: [usize; 2], b_max: f64, points: Vec<(usize, usize)>) -> ScenarioConfig {
    ScenarioConfig {
        label: label.into(),
        cost_range: cost,
        size_range: size,
        b_max,
        points,
    }
}

pub fn setting_scenarios(setting: Setting, scale: Scale) -> Vec<ScenarioConfig> {
    let (n_fixed, m_sweep, m_fixed, n_sweep, size, sizes) = match scale {
        Scale::Full => (
            120,
            sweep(60..=150, 5),
            80,
            sweep(80..=160, 5),
            [15, 20],
            [[10, 15], [15, 20], [20, 25]],
        ),
        Scale::Desk => (12, sweep(6..=15, 1), 8, sweep(12..=16, 1), [4, 6], [[3, 5], [4, 6], [5, 7]]),
    };
    let over_m = |ms: &[usize]| ms.iter().map(|&m| (m, n_fixed)).collect::<Vec<_>>();
    match setting {
        Setting::I => vec![scenario("I", [1.0, 5.0], size, 5.0, over_m(&m_sweep))],
        Setting::II => vec![scenario(
            "II",
            [1.0, 5.0],
            size,
            5.0,
            n_sweep.iter().map(|&n| (m_fixed, n)).collect(),
        )],
        Setting::III => [[1.0, 5.0], [5.0, 10.0], [10.0, 15.0]]
            .iter()
            .map(|&c| scenario(format!("III-c{}-{}", c[0], c[1]), c, size, 15.0, over_m(&m_sweep)))
            .collect(),
        Setting::IV => {
            // the smallest subset sizes need a few more workers to cover every task twice
            let ms: Vec<usize> = match scale {
                Scale::Full => m_sweep.clone(),
                Scale::Desk => sweep(8..=15, 1),
            };
            sizes
                .iter()
                .map(|&s| scenario(format!("IV-s{}-{}", s[0], s[1]), [1.0, 5.0], s, 5.0, over_m(&ms)))
                .collect()
        }
    }
}

impl ExperimentConfig {
    pub fn for_setting(setting: Setting, scale: Scale, runs: usize, seed: u64) -> Self {
        Self {
            name: format!("setting-{setting}-{}", match scale {
                Scale::Full => "full",
                Scale::Desk => "desk",
            }),
            scenarios: setting_scenarios(setting, scale),
            epsilons: vec![DEFAULT_EPSILON],
            k: 1,
            runs,
            seed,
            match_mode: MatchMode::Constrained,
            protocol: Protocol::Shared,
            threshold: ExpectationMode::Auto {
                samples: DEFAULT_THRESHOLD_SAMPLES,
            },
            timing: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Domain("runs must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Domain("every epsilon must be positive and finite".into()));
        }
        if self.scenarios.iter().any(|s| s.points.is_empty()) {
            return Err(Error::Domain("scenario without sweep points".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub setting: String,
    pub mechanism: Mechanism,
    pub score: ScoreKind,
    pub epsilon: f64,
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub run_id: usize,
    pub seed: u64,
    /// Winners' expected cost attributed to a random arrival set.
    pub social_cost: f64,
    pub total_payment: f64,
    pub winners: usize,
    pub match_ms: f64,
    pub select_ms: f64,
    pub pay_ms: f64,
}

impl RunRecord {
    pub fn total_ms(&self) -> f64 {
        self.match_ms + self.select_ms + self.pay_ms
    }
}

/// Seed of one run, independent of ε and of the mechanism.
pub fn run_seed(master: u64, scenario: usize, point: usize, run: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(master, scenario as u64), point as u64), run as u64)
}

struct Job<'a> {
    scenario: &'a ScenarioConfig,
    scenario_idx: usize,
    point_idx: usize,
    m: usize,
    n: usize,
    run: usize,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// All records of one run, in a fixed order: per ε, herald-lin, herald-log,
/// cone, cosy.
fn run_job(cfg: &ExperimentConfig, job: &Job<'_>) -> Result<Vec<RunRecord>> {
    let seed = run_seed(cfg.seed, job.scenario_idx, job.point_idx, job.run);
    let inst = generate_instance(&job.scenario.params(job.m, job.n), seed)?;
    let bids = inst.truthful_bids();
    let costs = inst.costs();
    let arrivals = ArrivalModel::new(cfg.k);
    let threshold = ThresholdConfig {
        arrivals,
        mode: cfg.threshold,
        seed: derive_seed(seed, 7),
    };
    let timed = |v: f64| if cfg.timing { v } else { 0.0 };

    let mut out = Vec::new();
    for &epsilon in &cfg.epsilons {
        let record = |mechanism, score, p: &MatchingSet, match_ms: f64| -> Result<RunRecord> {
            let t = Instant::now();
            let winners = select(&inst, p, mechanism, &threshold)?;
            let select_ms = ms(t);
            let t = Instant::now();
            let outcome = settle(&inst, p, mechanism, winners)?;
            let pay_ms = ms(t);
            Ok(RunRecord {
                setting: job.scenario.label.clone(),
                mechanism,
                score,
                epsilon,
                m: inst.m(),
                n: inst.n,
                l: inst.l(),
                k: cfg.k,
                run_id: job.run,
                seed,
                social_cost: outcome.winners.expected_attributed_cost(&costs, inst.n, arrivals),
                total_payment: outcome.payments.total(),
                winners: outcome.winners.len(),
                match_ms: timed(match_ms),
                select_ms: timed(select_ms),
                pay_ms: timed(pay_ms),
            })
        };

        let mut shared = None;
        for kind in ScoreKind::ALL {
            let t = Instant::now();
            let dist = matching_probabilities(&bids, kind, epsilon, inst.b_max)?;
            let p = match_workers(&inst, &bids, &dist, derive_seed(seed, 1), cfg.match_mode)?;
            let match_ms = ms(t);
            out.push(record(Mechanism::Herald, kind, &p, match_ms)?);
            if kind == ScoreKind::Linear {
                shared = Some((p, match_ms));
            }
        }
        let (shared_p, shared_ms) = shared.expect("linear kind is always run");
        for (i, mech) in [Mechanism::Cone, Mechanism::Cosy].into_iter().enumerate() {
            match cfg.protocol {
                Protocol::Shared => out.push(record(mech, ScoreKind::Linear, &shared_p, shared_ms)?),
                Protocol::Independent => {
                    let t = Instant::now();
                    let dist = matching_probabilities(&bids, ScoreKind::Linear, epsilon, inst.b_max)?;
                    let p = match_workers(&inst, &bids, &dist, derive_seed(seed, 3 + i as u64), cfg.match_mode)?;
                    let match_ms = ms(t);
                    out.push(record(mech, ScoreKind::Linear, &p, match_ms)?);
                }
            }
        }
    }
    Ok(out)
}

/// Runs every (scenario, point, run) job in parallel, capped by
/// `HERALD_THREADS`, and returns records in job order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_experiment_with(cfg, thread_cap())
}

/// [`run_experiment`] on a pool of exactly `threads` threads when given.
pub fn run_experiment_with(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<RunRecord>> {
    cfg.check()?;
    let jobs: Vec<Job<'_>> = cfg
        .scenarios
        .iter()
        .enumerate()
        .flat_map(|(scenario_idx, scenario)| {
            scenario.points.iter().enumerate().flat_map(move |(point_idx, &(m, n))| {
                (0..cfg.runs).map(move |run| Job {
                    scenario,
                    scenario_idx,
                    point_idx,
                    m,
                    n,
                    run,
                })
            })
        })
        .collect();
    let work = || -> Result<Vec<RunRecord>> {
        let nested: Vec<Vec<RunRecord>> = jobs.par_iter().map(|j| run_job(cfg, j)).collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    match threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// `HERALD_THREADS`, when set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("HERALD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&t: &usize| t > 0)
}

/// Same sweep once per ε; the instances and matching seeds are shared.
pub fn epsilon_sweep(base: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<RunRecord>> {
    let cfg = ExperimentConfig {
        epsilons: epsilons.to_vec(),
        ..base.clone()
    };
    run_experiment(&cfg)
}

pub fn run_setting(setting: Setting, scale: Scale, runs: usize, seed: u64) -> Result<Vec<RunRecord>> {
    run_experiment(&ExperimentConfig::for_setting(setting, scale, runs, seed))
}

/// Mean metrics of one sweep point and mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub mechanism: Mechanism,
    pub score: ScoreKind,
    pub epsilon: f64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub social_cost: f64,
    pub social_cost_sd: f64,
    pub total_payment: f64,
    pub total_payment_sd: f64,
    pub winners: f64,
    pub total_ms: f64,
}

/// Groups records in first-seen order and averages each group.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, Mechanism, ScoreKind, u64, usize, usize, usize)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.setting.clone(), r.mechanism, r.score, r.epsilon.to_bits(), r.m, r.n, r.k);
        let idx = match order.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        groups.entry(idx).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let pick = |f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let cost = pick(|r| r.social_cost);
            let pay = pick(|r| r.total_payment);
            let first = rs[0];
            SummaryRow {
                setting: first.setting.clone(),
                mechanism: first.mechanism,
                score: first.score,
                epsilon: first.epsilon,
                m: first.m,
                n: first.n,
                k: first.k,
                runs: rs.len(),
                social_cost: stats::mean(&cost),
                social_cost_sd: stats::std_dev(&cost),
                total_payment: stats::mean(&pay),
                total_payment_sd: stats::std_dev(&pay),
                winners: stats::mean(&pick(|r| r.winners as f64)),
                total_ms: stats::mean(&pick(RunRecord::total_ms)),
            }
        })
        .collect()
}

pub fn write_records(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.setting.clone(),
            r.mechanism.to_string(),
            r.score.to_string(),
            r.epsilon.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.l.to_string(),
            r.k.to_string(),
            r.run_id.to_string(),
            r.seed.to_string(),
            r.social_cost.to_string(),
            r.total_payment.to_string(),
            r.winners.to_string(),
            format!("{:.3}", r.match_ms),
            format!("{:.3}", r.select_ms),
            format!("{:.3}", r.pay_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or_default().to_string();
        let num = |i: usize| -> Result<f64> {
            f(i).parse().map_err(|_| Error::Domain(format!("bad number in column {i}: `{}`", f(i))))
        };
        let int = |i: usize| -> Result<usize> {
            f(i).parse().map_err(|_| Error::Domain(format!("bad integer in column {i}: `{}`", f(i))))
        };
        out.push(RunRecord {
            setting: f(0),
            mechanism: f(1).parse()?,
            score: f(2).parse()?,
            epsilon: num(3)?,
            m: int(4)?,
            n: int(5)?,
            l: int(6)?,
            k: int(7)?,
            run_id: int(8)?,
            seed: f(9).parse().map_err(|_| Error::Domain(format!("bad seed `{}`", f(9))))?,
            social_cost: num(10)?,
            total_payment: num(11)?,
            winners: int(12)?,
            match_ms: num(13)?,
            select_ms: num(14)?,
            pay_ms: num(15)?,
        });
    }
    Ok(out)
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub version: String,
}

impl Manifest {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        Ok(Self {
            config_sha256: config.hash()?,
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// Loads a manifest and rejects it if the stored hash does not match.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.config.hash()? != m.config_sha256 {
            return Err(Error::Domain("manifest hash does not match its config".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub runs_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub manifest: PathBuf,
    pub plot_script: Option<PathBuf>,
    pub records: usize,
}

/// Runs `cfg` and writes `runs.csv`, `summary.csv`, `manifest.json` and,
/// if asked, `plot.py` into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: impl AsRef<Path>, plot: bool) -> Result<ExperimentOutput> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let records = run_experiment(cfg)?;
    let runs_csv = dir.join("runs.csv");
    let summary_csv = dir.join("summary.csv");
    let manifest = dir.join("manifest.json");
    write_records(&runs_csv, &records)?;
    write_summary(&summary_csv, &summarize(&records))?;
    fs::write(&manifest, serde_json::to_string_pretty(&Manifest::new(cfg.clone())?)? + "\n")?;
    let plot_script = if plot {
        let path = dir.join("plot.py");
        fs::write(&path, PLOT_SCRIPT)?;
        Some(path)
    } else {
        None
    };
    Ok(ExperimentOutput {
        runs_csv,
        summary_csv,
        manifest,
        plot_script,
        records: records.len(),
    })
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots summary.csv next to this file. Needs matplotlib."""
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "summary.csv"))))
settings = sorted({r["setting"] for r in rows})
varying = "n" if len({r["n"] for r in rows}) > 1 else "m"

for metric in ("social_cost", "total_payment"):
    fig, ax = plt.subplots()
    curves = defaultdict(list)
    for r in rows:
        label = f'{r["setting"]} {r["mechanism"]}-{r["score"]} eps={r["epsilon"]}'
        curves[label].append((int(r[varying]), float(r[metric])))
    for label, pts in sorted(curves.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel(varying)
    ax.set_ylabel(metric.replace("_", " "))
    ax.legend(fontsize="small")
    fig.savefig(os.path.join(here, f"{metric}.png"), dpi=150)
"#;
