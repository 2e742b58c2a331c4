//! Python bindings for the OTDOA simulator.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use otdoa_core::campaign::{self, RunOptions};
use otdoa_core::deployment::Point;
use otdoa_core::lpp_session::{decode, encode, Direction};
use otdoa_core::positioner::{solve, TdoaProblem};
use otdoa_core::re_mapping::{map_subframe, ResourceGrid};
use otdoa_core::scenario::Scenario as CoreScenario;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed scenario.
#[pyclass(module = "otdoa")]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        CoreScenario::builtin(name)
            .map(|inner| Self { inner })
            .ok_or_else(|| PyKeyError::new_err(format!("no builtin scenario {name:?}")))
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        CoreScenario::parse(text).map(|inner| Self { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        CoreScenario::resolve(path).map(|inner| Self { inner }).map_err(value_error)
    }

    #[getter]
    fn techs(&self) -> Vec<String> {
        self.inner.tech.keys().cloned().collect()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.deployment().cells.len()
    }

    #[getter]
    fn n_drops(&self) -> usize {
        self.inner.campaign.n_drops
    }

    #[setter]
    fn set_n_drops(&mut self, n: usize) {
        self.inner.campaign.n_drops = n;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.campaign.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.campaign.seed = seed;
    }

    /// Cell site positions in metres, by cell id.
    fn cell_positions(&self) -> Vec<(f64, f64)> {
        self.inner
            .deployment()
            .cells
            .iter()
            .map(|c| (c.position.x, c.position.y))
            .collect()
    }

    /// `(abs_sf, band_index)` for every PRS subframe of one cell.
    fn schedule(&self, tech: &str, cell: u16) -> PyResult<Vec<(u16, u8)>> {
        let cc = self.inner.cell_config(tech, cell).map_err(value_error)?;
        Ok(cc.schedule.entries().iter().map(|e| (e.abs_sf, e.band)).collect())
    }

    /// `(symbol, subcarrier, re, im)` for every populated RE of one PRS subframe.
    #[pyo3(signature = (tech, cell, subframe=None))]
    fn grid(&self, tech: &str, cell: u16, subframe: Option<u16>) -> PyResult<Vec<(usize, usize, f64, f64)>> {
        let cc = self.inner.cell_config(tech, cell).map_err(value_error)?;
        let entry = match subframe {
            Some(sf) => cc.schedule.get(sf).copied(),
            None => cc.schedule.entries().first().copied(),
        }
        .ok_or_else(|| PyValueError::new_err("subframe carries no PRS"))?;
        let mut grid = ResourceGrid::for_config(&cc.config);
        map_subframe(&mut grid, &cc.config, entry.abs_sf, entry.band).map_err(value_error)?;
        Ok(grid.populated().map(|(l, k, v)| (l, k, v.re, v.im)).collect())
    }

    /// Run a campaign; returns per-technology summaries.
    #[pyo3(signature = (techs=None, quantize=true))]
    fn run(&self, py: Python<'_>, techs: Option<Vec<String>>, quantize: bool) -> PyResult<Vec<TechSummary>> {
        let techs = techs.unwrap_or_default();
        let opts = RunOptions { quantize_rstd: quantize };
        let report = py
            .detach(|| campaign::run_with(&self.inner, &techs, &opts))
            .map_err(value_error)?;
        Ok(report
            .techs
            .iter()
            .map(|t| TechSummary {
                name: t.name.clone(),
                errors_m: t.results.iter().map(|r| r.error_m).collect(),
                percentiles: t.percentiles.clone(),
                median_m: t.median_m(),
                fraction_within_target: t.fraction_within_target,
            })
            .collect())
    }

    /// `(direction, kind, wire bytes)` for every message of one session.
    #[pyo3(signature = (tech, drop=0))]
    fn transcript<'py>(&self, py: Python<'py>, tech: &str, drop: usize) -> PyResult<Vec<(String, String, Bound<'py, PyBytes>)>> {
        let (entries, _) = campaign::session_transcript(&self.inner, tech, drop).map_err(value_error)?;
        Ok(entries
            .iter()
            .map(|e| {
                let dir = match e.direction {
                    Direction::ServerToUe => "server->ue",
                    Direction::UeToServer => "ue->server",
                };
                (dir.to_string(), e.message.kind().to_string(), PyBytes::new(py, &e.bytes))
            })
            .collect())
    }
}

#[pyclass(module = "otdoa", get_all, frozen)]
struct TechSummary {
    name: String,
    errors_m: Vec<f64>,
    percentiles: Vec<(f64, f64)>,
    median_m: f64,
    fraction_within_target: f64,
}

#[pymethods]
impl TechSummary {
    fn __repr__(&self) -> String {
        format!("TechSummary({:?}, median_m={:.2}, n={})", self.name, self.median_m, self.errors_m.len())
    }
}

/// Decode an LPP message and encode it again.
#[pyfunction]
fn lpp_reencode<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let msg = decode(data).map_err(value_error)?;
    Ok(PyBytes::new(py, &encode(&msg)))
}

/// Decoded form of an LPP message, as its debug text.
#[pyfunction]
fn lpp_describe(data: &[u8]) -> PyResult<String> {
    decode(data).map(|m| format!("{m:?}")).map_err(value_error)
}

/// Solve a TDOA problem; returns `(x, y, converged, residual_s)`.
#[pyfunction]
#[pyo3(signature = (reference, neighbors, rstd_s, init=None))]
fn solve_tdoa(
    reference: (f64, f64),
    neighbors: Vec<(f64, f64)>,
    rstd_s: Vec<f64>,
    init: Option<(f64, f64)>,
) -> PyResult<(f64, f64, bool, f64)> {
    if neighbors.len() != rstd_s.len() {
        return Err(PyValueError::new_err("neighbors and rstd_s differ in length"));
    }
    let pt = |(x, y): (f64, f64)| Point::new(x, y);
    let problem = TdoaProblem::new(pt(reference), neighbors.into_iter().map(pt).collect(), rstd_s);
    let r = solve(&problem, pt(init.unwrap_or(reference))).map_err(value_error)?;
    Ok((r.estimate.x, r.estimate.y, r.converged, r.residual_norm))
}

#[pymodule]
fn otdoa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<TechSummary>()?;
    m.add_function(wrap_pyfunction!(lpp_reencode, m)?)?;
    m.add_function(wrap_pyfunction!(lpp_describe, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tdoa, m)?)?;
    Ok(())
}
