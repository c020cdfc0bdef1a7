//! `herald`: run auctions, experiment sweeps, oracle queries and audits from
//! the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use herald_core::audit::{self, DpAuditReport, IrViolation, TruthReport};
use herald_core::experiment::{
    self, ExperimentConfig, Manifest, Protocol, RunRecord, Scale, Setting, DEFAULT_THRESHOLD_SAMPLES,
};
use herald_core::instance::generate_instance;
use herald_core::matching::match_workers;
use herald_core::oracle::{expected_opt_cost, min_cover_cost};
use herald_core::rng::derive_seed;
use herald_core::scorefn::matching_probabilities;
use herald_core::{
    fixtures, run_auction, ArrivalModel, Error, ExpectationMode, Instance, InstanceParams, MatchMode, MatchingSet,
    Mechanism, Result, ScoreKind, ThresholdConfig,
};

#[derive(Parser)]
#[command(name = "herald", version, about = "Privacy-preserving reverse auctions for crowd sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one auction on an instance file and write its CSV record.
    Simulate(SimulateArgs),
    /// Sweep one evaluation setting, or rerun a manifest.
    Experiment(ExperimentArgs),
    /// Expected optimal cover cost of an instance's matching.
    Oracle(OracleArgs),
    /// Check a guarantee; exits with status 1 when the gate fails.
    Audit {
        #[command(subcommand)]
        kind: AuditCmd,
    },
    /// Draw a random instance.
    Generate(GenerateArgs),
    /// Reference cases.
    Fixture {
        #[command(subcommand)]
        cmd: FixtureCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
    Auto,
}

#[derive(Args, Clone)]
struct MatchArgs {
    /// Score function of the matching distribution: lin or log.
    #[arg(long, default_value = "lin")]
    score: ScoreKind,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// dp_pure or constrained; ignored when the instance pins its matching.
    #[arg(long, default_value = "constrained")]
    match_mode: MatchMode,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "herald")]
    mechanism: Mechanism,
    #[command(flatten)]
    matching: MatchArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_SAMPLES)]
    threshold_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record phase times instead of zeros.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    /// The same setting once per value of `--epsilons`.
    EpsSweep,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    sweep: Option<SweepKind>,
    #[arg(long, value_delimiter = ',', required_if_eq("sweep", "eps-sweep"))]
    epsilons: Option<Vec<f64>>,
    #[arg(long, required_unless_present = "manifest")]
    setting: Option<Setting>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "desk")]
    scale: Scale,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "shared")]
    protocol: Protocol,
    #[arg(long, default_value = "constrained")]
    match_mode: MatchMode,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_SAMPLES)]
    threshold_samples: usize,
    #[arg(long)]
    timing: bool,
    /// Also write a plot script next to the CSVs.
    #[arg(long)]
    plot: bool,
    /// Rerun the configuration stored in a manifest; other options are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.manifest {
            return Ok(Manifest::load(path)?.config);
        }
        let setting = self.setting.expect("clap requires --setting without --manifest");
        let mut cfg = ExperimentConfig::for_setting(setting, self.scale, self.runs, self.seed);
        cfg.k = self.k;
        if let Some(e) = self.epsilon {
            cfg.epsilons = vec![e];
        }
        if let (Some(SweepKind::EpsSweep), Some(eps)) = (self.sweep, &self.epsilons) {
            cfg.epsilons = eps.clone();
        }
        cfg.protocol = self.protocol;
        cfg.match_mode = self.match_mode;
        cfg.threshold = ExpectationMode::Auto {
            samples: self.threshold_samples,
        };
        cfg.timing = self.timing;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_SAMPLES)]
    samples: usize,
    /// Also solve the cover for this comma-separated arrival list.
    #[arg(long, value_delimiter = ',')]
    arrivals: Option<Vec<usize>>,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Subcommand)]
enum AuditCmd {
    /// Exact privacy-loss ratios over all matching outcomes (m, l ≤ 4).
    Dp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Audit one score kind; both when omitted.
        #[arg(long)]
        score: Option<ScoreKind>,
    },
    /// Bid-deviation sweep for every worker on a fixed matching.
    Truth {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long)]
        worker: Option<usize>,
        #[arg(long, default_value = "herald")]
        mechanism: Mechanism,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Individual rationality of every mechanism over several matchings.
    Ir {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Expected cost ratio against the explicit ceiling.
    Ratio {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[command(flatten)]
        matching: MatchArgs,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0])]
    costs: Vec<f64>,
    /// Subset-size interval; defaults to a third to a half of n.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5.0)]
    b_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FixtureCmd {
    List,
    /// Write a case's instance file.
    Export {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// The instance's pinned matching, or one sampled from its truthful bids.
fn matching_for(inst: &Instance, m: &MatchArgs) -> Result<MatchingSet> {
    let bids = inst.truthful_bids();
    if let Some(p) = MatchingSet::fixed(inst, &bids)? {
        return Ok(p);
    }
    let dist = matching_probabilities(&bids, m.score, m.epsilon, inst.b_max)?;
    match_workers(inst, &bids, &dist, m.seed, m.match_mode)
}

fn threshold(k: usize, samples: usize, seed: u64) -> ThresholdConfig {
    ThresholdConfig {
        arrivals: ArrivalModel::new(k),
        mode: ExpectationMode::Auto { samples },
        seed,
    }
}

/// Returns whether every gate passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Experiment(args) => {
            let cfg = args.config()?;
            let (out, plot) = (&args.out, args.plot);
            let output = experiment::run_to_dir(&cfg, out, plot)?;
            eprintln!(
                "{} records -> {} (config {})",
                output.records,
                output.runs_csv.display(),
                &cfg.hash()?[..12]
            );
            Ok(true)
        }
        Command::Oracle(a) => {
            let inst = Instance::load(&a.instance)?.checked()?;
            let p = matching_for(&inst, &a.matching)?;
            let mode = match a.mode {
                ModeArg::Exact => ExpectationMode::Exact,
                ModeArg::Mc => ExpectationMode::MonteCarlo { samples: a.samples },
                ModeArg::Auto => ExpectationMode::Auto { samples: a.samples },
            };
            let e = expected_opt_cost(&inst, &p, ArrivalModel::new(a.k), mode, a.matching.seed)?;
            let cover = a.arrivals.as_deref().map(|arr| min_cover_cost(&inst, &p, arr)).transpose()?;
            print_json(&serde_json::json!({ "expectation": e, "cover": cover }))?;
            Ok(true)
        }
        Command::Audit { kind } => run_audit(kind),
        Command::Generate(a) => {
            let n = a.n;
            let sizes = a.sizes.unwrap_or_else(|| vec![n.div_ceil(3), n / 2]);
            if a.costs.len() != 2 || sizes.len() != 2 {
                return Err(Error::Domain("--costs and --sizes take two values: lo,hi".into()));
            }
            let params = InstanceParams {
                n,
                m: a.m,
                l: None,
                cost_range: [a.costs[0], a.costs[1]],
                size_range: [sizes[0], sizes[1]],
                b_max: a.b_max,
            };
            generate_instance(&params, a.seed)?.save(&a.out)?;
            Ok(true)
        }
        Command::Fixture { cmd } => {
            match cmd {
                FixtureCmd::List => {
                    for name in fixtures::CASES {
                        println!("{name}");
                    }
                }
                FixtureCmd::Export { name, out } => fixtures::export_instance(&name, out)?,
            }
            Ok(true)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let inst = Instance::load(&a.instance)?.checked()?;
    let timer = std::time::Instant::now();
    let p = matching_for(&inst, &a.matching)?;
    let match_ms = timer.elapsed().as_secs_f64() * 1e3;
    let timer = std::time::Instant::now();
    let cfg = threshold(a.k, a.threshold_samples, derive_seed(a.matching.seed, 7));
    let out = run_auction(&inst, &p, a.mechanism, &cfg)?;
    let auction_ms = timer.elapsed().as_secs_f64() * 1e3;
    let arrivals = ArrivalModel::new(a.k);
    let record = RunRecord {
        setting: "instance".into(),
        mechanism: a.mechanism,
        score: a.matching.score,
        epsilon: a.matching.epsilon,
        m: inst.m(),
        n: inst.n,
        l: inst.l(),
        k: a.k,
        run_id: 0,
        seed: a.matching.seed,
        social_cost: out.winners.expected_attributed_cost(&inst.costs(), inst.n, arrivals),
        total_payment: out.payments.total(),
        winners: out.winners.len(),
        match_ms: if a.timing { match_ms } else { 0.0 },
        select_ms: if a.timing { auction_ms } else { 0.0 },
        pay_ms: 0.0,
    };
    if let Some(path) = &a.out {
        experiment::write_records(path, std::slice::from_ref(&record))?;
    }
    print_json(&out)?;
    Ok(true)
}

fn run_audit(cmd: AuditCmd) -> Result<bool> {
    match cmd {
        AuditCmd::Dp { instance, epsilon, score } => {
            let inst = Instance::load(&instance)?;
            let kinds = score.map(|k| vec![k]).unwrap_or(ScoreKind::ALL.to_vec());
            let reports = kinds
                .into_iter()
                .map(|kind| audit::dp_exact_audit(&inst, kind, epsilon, &[]))
                .collect::<Result<Vec<DpAuditReport>>>()?;
            print_json(&reports)?;
            for r in &reports {
                eprintln!(
                    "dp {}: worst ratio {:.6} vs proven bound {:.6} (stated {:.6}) over {} neighbor pairs: {}",
                    r.kind,
                    r.worst_ratio,
                    r.proven_bound,
                    r.stated_bound,
                    r.neighbor_pairs,
                    verdict(r.pass)
                );
            }
            Ok(reports.iter().all(|r| r.pass))
        }
        AuditCmd::Truth { instance, grid, worker, mechanism, k, matching } => {
            let inst = Instance::load(&instance)?.checked()?;
            let p = matching_for(&inst, &matching)?;
            let cfg = ThresholdConfig::exact(k);
            let workers: Vec<usize> = worker.map(|w| vec![w]).unwrap_or((0..inst.m()).collect());
            let reports = workers
                .into_iter()
                .map(|w| audit::truthfulness_audit(&inst, &p, w, grid, mechanism, &cfg))
                .collect::<Result<Vec<TruthReport>>>()?;
            print_json(&reports)?;
            let worst = reports.iter().map(|r| r.max_gain).fold(0.0, f64::max);
            let pass = reports.iter().all(|r| r.pass);
            eprintln!("truth: {} workers, max gain {worst:.3e}: {}", reports.len(), verdict(pass));
            Ok(pass)
        }
        AuditCmd::Ir { instance, seeds, k, matching } => {
            let inst = Instance::load(&instance)?.checked()?;
            let mut violations: Vec<(u64, Mechanism, IrViolation)> = Vec::new();
            let mut runs = 0;
            let fixed = inst.fixed_matching.is_some();
            for s in 0..if fixed { 1 } else { seeds as u64 } {
                let m = MatchArgs { seed: derive_seed(matching.seed, s), ..matching.clone() };
                let p = matching_for(&inst, &m)?;
                for mech in Mechanism::ALL {
                    let out = run_auction(&inst, &p, mech, &ThresholdConfig::exact(k))?;
                    runs += 1;
                    violations.extend(audit::ir_violations(&inst, &out).into_iter().map(|v| (m.seed, mech, v)));
                }
            }
            print_json(&serde_json::json!({ "runs": runs, "violations": violations }))?;
            eprintln!("ir: {runs} runs, {} violations: {}", violations.len(), verdict(violations.is_empty()));
            Ok(violations.is_empty())
        }
        AuditCmd::Ratio { instance, k, seeds, matching } => {
            let inst = Instance::load(&instance)?.checked()?;
            let r = audit::ratio_audit_instance(
                &inst,
                matching.score,
                matching.epsilon,
                k,
                seeds,
                matching.seed,
                matching.match_mode,
            )?;
            print_json(&r)?;
            eprintln!("ratio: {:.4} vs ceiling {:.2} over {} matchings: {}", r.ratio, r.ceiling, r.seeds, verdict(r.pass));
            Ok(r.pass)
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
