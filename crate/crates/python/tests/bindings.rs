use std::ffi::CString;
use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;

use mixavg_py::mixavg_module;

static INIT: Once = Once::new();

fn run(code: &str) -> PyResult<()> {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(mixavg_module);
        Python::initialize();
    });
    let code = CString::new(code).unwrap();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        py.run(&code, Some(&globals), None)
    })
}

#[test]
fn module_exposes_core_operations() {
    run(r#"
import mixavg
assert mixavg.adjusted_rand_index([0, 0, 1, 1], ["x", "x", "y", "y"]) == 1.0
w = mixavg.bma_weights([10.0, 10.0])
assert w == [0.5, 0.5], w
m, ari = mixavg.best_merge([0, 1, 2, 2], [0, 0, 1, 1])
assert ari == 1.0 and m[0] == m[1] != m[2], m
assert mixavg.harden([[0.1, 0.9]]) == [1]
assert "VVV" in mixavg.structures(fittable_only=True)
assert "EVE" not in mixavg.structures(fittable_only=True)
"#)
    .unwrap();
}

#[test]
fn fit_and_average_round_trip() {
    run(r#"
import json, math, mixavg
d = mixavg.simulate_separated(2, 2, 30, 12.0, seed=4)
assert (d.n, d.p) == (60, 2)
f = mixavg.em_fit(d, "VVV", 2, seed=1)
assert abs(f.bic - (-2 * f.loglik + f.rho * math.log(60))) < 1e-9
assert abs(sum(f.pi) - 1.0) < 1e-12
assert mixavg.adjusted_rand_index(f.classify(d), d.label_partition()) == 1.0
s = mixavg.run_sweep(d, structures=["EII", "VVV"], g_max=3, restarts=2)
assert len(s) == 6
r = mixavg.average(d, s)
assert json.loads(r.to_json())["n"] == 60
assert mixavg.Report.from_json(r.to_json()).window == r.window
assert r.ari("aap_case_ii") == 1.0
"#)
    .unwrap();
}

#[test]
fn errors_map_to_python_exceptions() {
    run(r#"
import mixavg
d = mixavg.Dataset([[0.0, 1.0], [2.0, 3.0], [5.0, 4.0]])
try:
    mixavg.em_fit(d, "XYZ", 1)
    raise SystemExit("unknown structure accepted")
except ValueError:
    pass
try:
    mixavg.run_sweep(d, g_min=5, g_max=6, restarts=1)
    raise SystemExit("empty sweep accepted")
except RuntimeError:
    pass
try:
    mixavg.Dataset([[1.0], [1.0, 2.0]])
    raise SystemExit("ragged rows accepted")
except ValueError:
    pass
"#)
    .unwrap();
}
