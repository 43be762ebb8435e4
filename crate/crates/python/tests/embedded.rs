use pyo3::prelude::*;
use pyo3::types::PyDict;

/// Runs the smoke script against the module registered in-process.
#[test]
fn smoke_script_passes() {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(cyclo_qcd_py::cyclo_qcd_py)(py);
        let sys = py.import("sys").unwrap();
        sys.getattr("modules")
            .unwrap()
            .set_item("cyclo_qcd_py", module)
            .unwrap();
        let script = include_str!("../python/smoke_test.py");
        let globals = PyDict::new(py);
        globals.set_item("__name__", "smoke").unwrap();
        let code = std::ffi::CString::new(format!("{script}\nmain()\n")).unwrap();
        py.run(&code, Some(&globals), None).unwrap();
    });
}
