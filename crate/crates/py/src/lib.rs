use pyo3::prelude::*;

#[pymodule]
fn iqsd_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
