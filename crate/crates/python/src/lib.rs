//! Python bindings. Images and fields cross the boundary as row-major lists
//! of rows (`field[y][x]`).

use apexflow_core as core;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } | core::Error::Image { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn flatten(rows: &[Vec<f64>]) -> PyResult<(usize, usize, Vec<f64>)> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != w) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok((w, h, rows.concat()))
}

fn rows_of(w: usize, data: &[f64]) -> Vec<Vec<f64>> {
    data.chunks(w).map(<[f64]>::to_vec).collect()
}

/// Grayscale image with intensities in [0, 1].
#[pyclass(name = "Frame", frozen, from_py_object)]
#[derive(Clone)]
struct PyFrame(core::Frame);

#[pymethods]
impl PyFrame {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let (w, h, data) = flatten(&rows)?;
        core::Frame::new(w, h, data).map(PyFrame).map_err(to_py)
    }

    /// Loads an image file, converting to luma.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        core::dataio::read_frame(path.as_ref()).map(PyFrame).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.width(), self.0.data())
    }

    fn __repr__(&self) -> String {
        format!("Frame({}x{})", self.0.width(), self.0.height())
    }
}

/// Dense displacement field from a reference frame to a target frame.
#[pyclass(name = "FlowField", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFlowField(core::FlowField);

#[pymethods]
impl PyFlowField {
    #[new]
    fn new(u: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> PyResult<Self> {
        let (w, h, u) = flatten(&u)?;
        let (wv, hv, v) = flatten(&v)?;
        if (w, h) != (wv, hv) {
            return Err(PyValueError::new_err("u and v must have the same shape"));
        }
        core::FlowField::new(w, h, u, v).map(PyFlowField).map_err(to_py)
    }

    /// Reads a Middlebury `.flo` file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        core::dataio::read_flo(path).map(PyFlowField).map_err(to_py)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        core::dataio::write_flo(&self.0, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.width(), self.0.u())
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.width(), self.0.v())
    }

    /// `(magnitude, orientation)` fields.
    fn polar(&self) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (rho, theta) = core::kinematics::polar_decompose(&self.0).map_err(to_py)?;
        let w = self.0.width();
        Ok((rows_of(w, rho.values()), rows_of(w, theta.values())))
    }

    /// Optical strain magnitude field.
    fn strain(&self) -> PyResult<Vec<Vec<f64>>> {
        let eps = core::kinematics::strain_magnitude(&self.0).map_err(to_py)?;
        Ok(rows_of(self.0.width(), eps.values()))
    }

    fn __repr__(&self) -> String {
        format!("FlowField({}x{})", self.0.width(), self.0.height())
    }
}

/// Bi-WOOF layout and weighting.
#[pyclass(name = "BiwoofConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBiwoofConfig(core::BiwoofConfig);

#[pymethods]
impl PyBiwoofConfig {
    #[new]
    #[pyo3(signature = (blocks = 5, bins = 8, local = "flow", global_ = "strain", l1_normalize = false))]
    fn new(blocks: usize, bins: usize, local: &str, global_: &str, l1_normalize: bool) -> PyResult<Self> {
        let mut cfg = core::BiwoofConfig::new(blocks, bins, local.parse().map_err(to_py)?, global_.parse().map_err(to_py)?)
            .map_err(to_py)?;
        cfg.l1_normalize = l1_normalize;
        Ok(PyBiwoofConfig(cfg))
    }

    #[getter]
    fn feature_len(&self) -> usize {
        self.0.feature_len()
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!(
            "BiwoofConfig(blocks={}, bins={}, local='{}', global_='{}')",
            c.blocks, c.bins, c.local_weight, c.global_weight
        )
    }
}

/// TV-L1 flow from `reference` to `target`. `params` is an optional JSON
/// object overriding solver fields (lambda, theta, tau, n_scales, ...).
#[pyfunction]
#[pyo3(signature = (reference, target, params = None))]
fn estimate_flow(py: Python<'_>, reference: &PyFrame, target: &PyFrame, params: Option<&str>) -> PyResult<PyFlowField> {
    let params: core::TvL1Params = match params {
        Some(json) => serde_json::from_str(json).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => core::TvL1Params::default(),
    };
    let (a, b) = (reference.0.clone(), target.0.clone());
    py.detach(move || core::estimate_tvl1(&a, &b, &params))
        .map(PyFlowField)
        .map_err(to_py)
}

/// Bi-WOOF feature vector of a flow field.
#[pyfunction]
#[pyo3(signature = (flow, config = None))]
fn biwoof(flow: &PyFlowField, config: Option<&PyBiwoofConfig>) -> PyResult<Vec<f64>> {
    let cfg = config.map(|c| c.0).unwrap_or_default();
    core::descriptors::biwoof_from_flow(&flow.0, &cfg)
        .map(|f| f.into_inner())
        .map_err(to_py)
}

/// Spots the apex of a clip whose first frame is the onset. Returns the
/// apex index and the difference curve.
#[pyfunction]
#[pyo3(signature = (frames, blocks = 5))]
fn spot_apex(frames: Vec<PyFrame>, blocks: usize) -> PyResult<(usize, Vec<f64>)> {
    let n = frames.len();
    let frames: Vec<core::Frame> = frames.into_iter().map(|f| f.0).collect();
    let video = core::VideoSample::new(frames, 0, None, n.saturating_sub(1), 0, "", "clip").map_err(to_py)?;
    let (w, h) = video.dims();
    let grid = core::descriptors::block_partition(w, h, blocks).map_err(to_py)?;
    let spot = core::spot_apex(&video, &grid, &core::descriptors::LbpParams::default()).map_err(to_py)?;
    Ok((spot.apex, spot.curve.scores().to_vec()))
}

/// Micro-averaged `(precision, recall, f)` of a square confusion matrix.
#[pyfunction]
fn f_measure(confusion: Vec<Vec<u64>>) -> PyResult<(f64, f64, f64)> {
    let cm = core::ConfusionMatrix::from_rows(&confusion).map_err(to_py)?;
    core::eval::f_measure(&cm).map_err(to_py)
}

/// Cross-validated evaluation of a manifest. `config` is an optional JSON
/// pipeline configuration; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (manifest, config = None, jobs = 0))]
fn evaluate(py: Python<'_>, manifest: &str, config: Option<&str>, jobs: usize) -> PyResult<String> {
    let cfg: core::PipelineConfig = match config {
        Some(json) => serde_json::from_str(json).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => core::PipelineConfig::default(),
    };
    let manifest = manifest.to_string();
    py.detach(move || {
        let m = core::dataio::load_manifest(&manifest)?;
        let dataset = core::Dataset::from_manifest(&m, None, jobs)?;
        core::run_protocol(&dataset, &cfg, jobs)?.to_json()
    })
    .map_err(to_py)
}

#[pymodule]
fn apexflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrame>()?;
    m.add_class::<PyFlowField>()?;
    m.add_class::<PyBiwoofConfig>()?;
    m.add_function(wrap_pyfunction!(estimate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(biwoof, m)?)?;
    m.add_function(wrap_pyfunction!(spot_apex, m)?)?;
    m.add_function(wrap_pyfunction!(f_measure, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
