use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyModule>) -> R) -> R {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(herald);
        Python::initialize();
    });
    Python::attach(|py| {
        let m = py.import("herald").unwrap();
        f(py, &m)
    })
}

use herald::herald;

#[test]
fn golden_auction_through_python() {
    with_module(|_py, m| {
        let pair = m.call_method1("load_golden", ("example2-k1",)).unwrap();
        let inst = pair.get_item(0).unwrap();
        let out = m.call_method1("run_auction", (inst,)).unwrap();
        let t: f64 = out.get_item("threshold").unwrap().extract().unwrap();
        assert!((t - 125.44).abs() < 1e-9);
        let pay: Vec<f64> = out.get_item("payments").unwrap().get_item("payments").unwrap().extract().unwrap();
        for (a, b) in pay.iter().zip([4.6, 4.2, 0.0, 3.6, 0.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    });
}

#[test]
fn keyword_arguments_and_errors() {
    with_module(|py, m| {
        let kwargs = PyDict::new(py);
        kwargs.set_item("seed", 3).unwrap();
        let inst = m.getattr("Instance").unwrap().call_method("generate", (12, 8), Some(&kwargs)).unwrap();
        let problems: Vec<String> = inst.call_method0("validate").unwrap().extract().unwrap();
        assert!(problems.is_empty());
        let err = m.call_method1("run_auction", (inst, vec![0usize; 2])).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = m.call_method1("matching_distribution", (vec![1.0, 2.0], "cubic")).unwrap_err();
        assert!(err.to_string().contains("cubic"));
    });
}
