use pyo3::prelude::*;

#[pymodule]
fn crane_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
