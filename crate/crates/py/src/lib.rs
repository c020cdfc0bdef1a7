//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists decoded from the same JSON the CLI prints.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use herald_core::audit;
use herald_core::experiment::{self, ExperimentConfig, Scale, Setting};
use herald_core::instance::generate_instance;
use herald_core::matching::match_workers;
use herald_core::oracle::{expected_opt_cost, min_cover_cost};
use herald_core::scorefn::matching_probabilities;
use herald_core::{
    fixtures, ArrivalModel, BidProfile, ExpectationMode, InstanceParams, MatchMode, MatchingSet, Mechanism,
    ScoreKind, ThresholdConfig,
};

fn py_err(e: herald_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = herald_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A crowd-sensing instance: tasks, task subsets, workers and the bid cap.
#[pyclass(name = "Instance", module = "herald")]
struct PyInstance {
    inner: herald_core::Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = herald_core::Instance::from_json(text).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = herald_core::Instance::load(path).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Random instance with uniform costs and subset sizes.
    #[staticmethod]
    #[pyo3(signature = (n, m, seed=0, costs=(1.0, 5.0), sizes=None, b_max=5.0))]
    fn generate(n: usize, m: usize, seed: u64, costs: (f64, f64), sizes: Option<(usize, usize)>, b_max: f64) -> PyResult<Self> {
        let (lo, hi) = sizes.unwrap_or((n.div_ceil(3), n / 2));
        let params = InstanceParams {
            n,
            m,
            l: None,
            cost_range: [costs.0, costs.1],
            size_range: [lo, hi],
            b_max,
        };
        let inner = generate_instance(&params, seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    /// Human-readable violations; empty when the instance is valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations.iter().map(|v| v.to_string()).collect()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.l()
    }

    #[getter]
    fn b_max(&self) -> f64 {
        self.inner.b_max
    }

    #[getter]
    fn costs(&self) -> Vec<f64> {
        self.inner.costs()
    }

    #[getter]
    fn subsets(&self) -> Vec<Vec<usize>> {
        self.inner.subsets.clone()
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, m={}, l={}, b_max={})", self.inner.n, self.inner.m(), self.inner.l(), self.inner.b_max)
    }
}

impl PyInstance {
    /// `workers` if given, else the pinned matching, else a sampled one.
    fn matching(&self, workers: Option<Vec<usize>>, score: &str, epsilon: f64, seed: u64, mode: &str) -> PyResult<MatchingSet> {
        let inst = &self.inner;
        let bids = inst.truthful_bids();
        if let Some(w) = workers {
            if w.len() != inst.l() {
                return Err(PyValueError::new_err(format!("expected {} workers, got {}", inst.l(), w.len())));
            }
            return MatchingSet::from_assignment(&w, &bids).map_err(py_err);
        }
        if let Some(p) = MatchingSet::fixed(inst, &bids).map_err(py_err)? {
            return Ok(p);
        }
        let dist = matching_probabilities(&bids, parse(score)?, epsilon, inst.b_max).map_err(py_err)?;
        match_workers(inst, &bids, &dist, seed, parse(mode)?).map_err(py_err)
    }
}

/// Names of the embedded reference cases.
#[pyfunction]
fn golden_cases() -> Vec<&'static str> {
    fixtures::CASES.to_vec()
}

/// A reference case as `(instance, expectations)`.
#[pyfunction]
fn load_golden(py: Python<'_>, name: &str) -> PyResult<(PyInstance, Py<PyAny>)> {
    let case = fixtures::load_golden(name).map_err(py_err)?;
    let expected = serde_json::json!({
        "k": case.k,
        "expected_opt_cost": case.expected_opt_cost,
        "threshold": case.threshold,
        "winners": case.winners,
        "payments": case.payments,
    });
    Ok((PyInstance { inner: case.instance }, to_py(py, &expected)?))
}

/// Matching probability of each bid.
#[pyfunction]
#[pyo3(signature = (bids, score="lin", epsilon=0.1, b_max=5.0))]
fn matching_distribution(bids: Vec<f64>, score: &str, epsilon: f64, b_max: f64) -> PyResult<Vec<f64>> {
    let d = matching_probabilities(&BidProfile::new(bids), parse(score)?, epsilon, b_max).map_err(py_err)?;
    Ok(d.probs)
}

/// Worker assigned to each subset.
#[pyfunction]
#[pyo3(signature = (instance, score="lin", epsilon=0.1, seed=0, mode="constrained"))]
fn sample_matching(instance: &PyInstance, score: &str, epsilon: f64, seed: u64, mode: &str) -> PyResult<Vec<usize>> {
    Ok(instance.matching(None, score, epsilon, seed, mode)?.workers())
}

/// Selection and payment under truthful bids.
#[pyfunction]
#[pyo3(signature = (instance, matching=None, mechanism="herald", k=1, score="lin", epsilon=0.1, seed=0, mode="constrained"))]
#[allow(clippy::too_many_arguments)]
fn run_auction(
    py: Python<'_>,
    instance: &PyInstance,
    matching: Option<Vec<usize>>,
    mechanism: &str,
    k: usize,
    score: &str,
    epsilon: f64,
    seed: u64,
    mode: &str,
) -> PyResult<Py<PyAny>> {
    let p = instance.matching(matching, score, epsilon, seed, mode)?;
    let cfg = ThresholdConfig {
        arrivals: ArrivalModel::new(k),
        mode: ExpectationMode::Auto {
            samples: experiment::DEFAULT_THRESHOLD_SAMPLES,
        },
        seed,
    };
    let mech: Mechanism = parse(mechanism)?;
    let out = herald_core::run_auction(&instance.inner, &p, mech, &cfg).map_err(py_err)?;
    to_py(py, &out)
}

/// Expected minimum cover cost for `k` uniform arrivals.
#[pyfunction]
#[pyo3(signature = (instance, matching=None, k=1, samples=None, seed=0))]
fn expected_opt(instance: &PyInstance, matching: Option<Vec<usize>>, k: usize, samples: Option<usize>, seed: u64) -> PyResult<f64> {
    let p = instance.matching(matching, "lin", 0.1, seed, "constrained")?;
    let mode = match samples {
        Some(samples) => ExpectationMode::MonteCarlo { samples },
        None => ExpectationMode::Exact,
    };
    let e = expected_opt_cost(&instance.inner, &p, ArrivalModel::new(k), mode, seed).map_err(py_err)?;
    Ok(e.value)
}

/// `(cost, subsets)` of the cheapest cover of `arrivals`.
#[pyfunction]
#[pyo3(signature = (instance, arrivals, matching=None))]
fn min_cover(instance: &PyInstance, arrivals: Vec<usize>, matching: Option<Vec<usize>>) -> PyResult<(f64, Vec<usize>)> {
    let p = instance.matching(matching, "lin", 0.1, 0, "constrained")?;
    let r = min_cover_cost(&instance.inner, &p, &arrivals).map_err(py_err)?;
    Ok((r.cost, r.cover))
}

#[pyfunction]
#[pyo3(signature = (instance, score="lin", epsilon=0.1))]
fn dp_audit(py: Python<'_>, instance: &PyInstance, score: &str, epsilon: f64) -> PyResult<Py<PyAny>> {
    let r = audit::dp_exact_audit(&instance.inner, parse::<ScoreKind>(score)?, epsilon, &[]).map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (instance, worker, matching=None, grid=50, mechanism="herald", k=1))]
fn truthfulness_audit(
    py: Python<'_>,
    instance: &PyInstance,
    worker: usize,
    matching: Option<Vec<usize>>,
    grid: usize,
    mechanism: &str,
    k: usize,
) -> PyResult<Py<PyAny>> {
    let p = instance.matching(matching, "lin", 0.1, 0, "constrained")?;
    let r = audit::truthfulness_audit(&instance.inner, &p, worker, grid, parse(mechanism)?, &ThresholdConfig::exact(k))
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
fn ratio_ceiling(n: usize, l: usize) -> f64 {
    audit::ratio_ceiling(n, l)
}

/// Run records of one evaluation setting, as dicts.
#[pyfunction]
#[pyo3(signature = (setting, runs=10, seed=0, scale="desk", epsilons=None, mode="constrained"))]
fn run_experiment(
    py: Python<'_>,
    setting: &str,
    runs: usize,
    seed: u64,
    scale: &str,
    epsilons: Option<Vec<f64>>,
    mode: &str,
) -> PyResult<Py<PyAny>> {
    let mut cfg = ExperimentConfig::for_setting(parse::<Setting>(setting)?, parse::<Scale>(scale)?, runs, seed);
    if let Some(e) = epsilons {
        cfg.epsilons = e;
    }
    cfg.match_mode = parse::<MatchMode>(mode)?;
    let records = py.detach(|| experiment::run_experiment(&cfg)).map_err(py_err)?;
    to_py(py, &records)
}

#[pymodule]
pub fn herald(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(golden_cases, m)?)?;
    m.add_function(wrap_pyfunction!(load_golden, m)?)?;
    m.add_function(wrap_pyfunction!(matching_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(sample_matching, m)?)?;
    m.add_function(wrap_pyfunction!(run_auction, m)?)?;
    m.add_function(wrap_pyfunction!(expected_opt, m)?)?;
    m.add_function(wrap_pyfunction!(min_cover, m)?)?;
    m.add_function(wrap_pyfunction!(dp_audit, m)?)?;
    m.add_function(wrap_pyfunction!(truthfulness_audit, m)?)?;
    m.add_function(wrap_pyfunction!(ratio_ceiling, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
