//! Python bindings for the rffgam pipeline (placeholder; filled in with the
//! full API surface once the core crate is complete).

use pyo3::prelude::*;

#[pymodule]
fn rffgam(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
