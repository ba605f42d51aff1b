//! Python bindings. Arrays cross the boundary as nested lists of floats;
//! configurations cross as JSON strings.

use glovepose::eval::{regression_metrics, split, FoldScheme};
use glovepose::model::{predict_stream, train, ModelBundle, ModelConfig, TrainOptions};
use glovepose::signal::{detect_taps, make_windows, select_color};
use glovepose::synth::{generate_session, read_dataset, write_dataset, DatasetFile, SubjectModel};
use glovepose::{nncore, Error};
use ndarray::{Array2, ArrayView2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.category());
    match e {
        Error::Io(_) => PyIOError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("ragged rows"));
    }
    Array2::from_shape_vec((rows.len(), cols), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(m: ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    text.map_or(Ok(T::default()), |t| serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string())))
}

/// Smooth L1 loss averaged over all elements.
#[pyfunction]
#[pyo3(signature = (pred, target, beta = 0.5))]
fn smooth_l1(pred: Vec<Vec<f64>>, target: Vec<Vec<f64>>, beta: f64) -> PyResult<f64> {
    nncore::smooth_l1(matrix(&pred)?.view(), matrix(&target)?.view(), beta).map_err(to_py)
}

/// Sample indices at which taps fire.
#[pyfunction]
#[pyo3(signature = (series, rest, threshold = 0.04))]
fn taps(series: Vec<f64>, rest: f64, threshold: f64) -> PyResult<Vec<usize>> {
    detect_taps(&series, rest, threshold).map_err(to_py)
}

/// Pinch colour for a thumb flag and index..pinky flags.
#[pyfunction]
fn color(thumb: bool, fingers: [bool; 4]) -> String {
    serde_json::to_value(select_color(thumb, fingers))
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Fold assignment of `n` items under `kfold<k>`; returns the fold of each item.
#[pyfunction]
#[pyo3(signature = (n, scheme = "kfold10", seed = 0))]
fn fold_assignments(n: usize, scheme: &str, seed: u64) -> PyResult<Vec<usize>> {
    let scheme: FoldScheme = scheme.parse().map_err(to_py)?;
    Ok(split(n, scheme, seed, None).map_err(to_py)?.assignments)
}

/// Per-joint RMSE (degrees) and R² (percent) as a JSON string.
#[pyfunction]
fn metrics(pred: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<String> {
    let m = regression_metrics(matrix(&pred)?.view(), matrix(&truth)?.view()).map_err(to_py)?;
    serde_json::to_string(&m).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A recording in the canonical dataset format.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: DatasetFile,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_dataset(path).map_err(to_py)?,
        })
    }

    /// Synthetic session of a nominal subject.
    #[staticmethod]
    #[pyo3(signature = (minutes, seed = 0, subject = 1))]
    fn synthetic(minutes: f64, seed: u64, subject: u32) -> PyResult<Self> {
        let s = SubjectModel::nominal(subject);
        Ok(Self {
            inner: generate_session(&s, 1, minutes, 1.0, 0.5, seed).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        write_dataset(path, &self.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    /// `N x 28` model inputs: 25 sensors and 3 wrist angles.
    fn features(&self) -> PyResult<Vec<Vec<f64>>> {
        let f = glovepose::signal::feature_matrix(&self.inner.frames()).map_err(to_py)?;
        Ok(rows(f.view()))
    }

    /// `N x 22` joint angles in degrees.
    fn angles(&self) -> PyResult<Vec<Vec<f64>>> {
        let a = self.inner.angles();
        Ok(rows(a.view()))
    }

    fn timestamps(&self) -> Vec<i64> {
        self.inner.rows.iter().map(|r| r.frame.timestamp_ms).collect()
    }
}

/// A trained pose regressor with its normalization statistics.
#[pyclass(name = "Model")]
struct PyModel {
    inner: ModelBundle,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelBundle::load(path).map_err(to_py)?,
        })
    }

    /// Trains on windows sliced from `dataset` with the given stride.
    /// `config` and `options` are JSON objects; missing keys take defaults.
    #[staticmethod]
    #[pyo3(signature = (dataset, stride = 1, config = None, options = None))]
    fn train(
        py: Python<'_>,
        dataset: &PyDataset,
        stride: usize,
        config: Option<&str>,
        options: Option<&str>,
    ) -> PyResult<Self> {
        let config: ModelConfig = from_json(config)?;
        let options: TrainOptions = from_json(options)?;
        let frames = dataset.inner.frames();
        let feats = glovepose::model::frame_features(&frames, config.baseline_window).map_err(to_py)?;
        let angles = dataset.inner.angles();
        let windows =
            make_windows(feats.view(), Some(angles.view()), config.window_length, stride).map_err(to_py)?;
        let inner = py.detach(|| train(&windows, &config, &options)).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    /// Angles for each raw `window_length x 28` window.
    fn predict(&self, windows: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        windows
            .iter()
            .map(|w| Ok(self.inner.forward_raw(matrix(w)?.view()).map_err(to_py)?.angles))
            .collect()
    }

    /// Streaming prediction over a dataset; one row per full window.
    fn predict_stream(&self, dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        let out = predict_stream(&dataset.inner.frames(), &self.inner).map_err(to_py)?;
        Ok(out.predictions.into_iter().map(|p| p.angles).collect())
    }

    fn param_hash(&self) -> String {
        self.inner.param_hash()
    }

    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.config).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn loss_curve(&self) -> Vec<f64> {
        self.inner.meta.loss_curve.iter().map(|e| e.loss).collect()
    }
}

#[pymodule]
fn glovepose_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(smooth_l1, m)?)?;
    m.add_function(wrap_pyfunction!(taps, m)?)?;
    m.add_function(wrap_pyfunction!(color, m)?)?;
    m.add_function(wrap_pyfunction!(fold_assignments, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add("WINDOW_LENGTH", glovepose::WINDOW_LENGTH)?;
    m.add("NUM_CHANNELS", glovepose::NUM_CHANNELS)?;
    m.add("NUM_JOINTS", glovepose::NUM_JOINTS)?;
    Ok(())
}
