//! Python bindings. Rasters cross the boundary as flat row-major lists;
//! configuration objects cross as JSON text with the same keys the CLI
//! accepts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tumorseg::fbb::{self, FbbParams};
use tumorseg::imgio;
use tumorseg::ocsvm::{self, Label};
use tumorseg::phantom::{generate as generate_phantom, PhantomSpec};
use tumorseg::pipeline;
use tumorseg::preprocess::{self, ConductionFn, DiffusionParams, Neighborhood};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Grayscale raster with intensities in [0, 255].
#[pyclass(name = "GrayImage", module = "tumorseg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyGrayImage(imgio::GrayImage);

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<f64>) -> PyResult<Self> {
        imgio::GrayImage::new(width, height, pixels).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load_pgm(path: &str) -> PyResult<Self> {
        imgio::load_gray_pgm(path).map(Self).map_err(py_err)
    }

    fn save_pgm(&self, path: &str) -> PyResult<()> {
        imgio::write_gray_pgm(&self.0, path).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn pixels(&self) -> Vec<f64> {
        self.0.pixels().to_vec()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if row >= self.0.height() || col >= self.0.width() {
            return Err(PyValueError::new_err("pixel out of range"));
        }
        Ok(self.0.get(row, col))
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.0.width(), self.0.height())
    }
}

#[pyclass(name = "BinaryMask", module = "tumorseg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyBinaryMask(imgio::BinaryMask);

#[pymethods]
impl PyBinaryMask {
    #[new]
    fn new(width: usize, height: usize, bits: Vec<bool>) -> PyResult<Self> {
        imgio::BinaryMask::new(width, height, bits).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load_pgm(path: &str) -> PyResult<Self> {
        imgio::load_mask_pgm(path).map(Self).map_err(py_err)
    }

    fn save_pgm(&self, path: &str) -> PyResult<()> {
        imgio::write_mask_pgm(&self.0, path).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn bits(&self) -> Vec<bool> {
        self.0.bits().to_vec()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    fn bounding_box(&self) -> Option<PyBoundingBox> {
        self.0.bounding_box().map(PyBoundingBox)
    }

    fn __repr__(&self) -> String {
        format!("BinaryMask({}x{}, {} set)", self.0.width(), self.0.height(), self.0.count())
    }
}

/// Inclusive rectangle.
#[pyclass(name = "BoundingBox", module = "tumorseg", frozen, from_py_object, eq)]
#[derive(Clone, PartialEq)]
pub struct PyBoundingBox(fbb::BoundingBox);

#[pymethods]
impl PyBoundingBox {
    #[new]
    fn new(row_min: usize, row_max: usize, col_min: usize, col_max: usize) -> PyResult<Self> {
        fbb::BoundingBox::new(row_min, row_max, col_min, col_max)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn row_min(&self) -> usize {
        self.0.row_min
    }

    #[getter]
    fn row_max(&self) -> usize {
        self.0.row_max
    }

    #[getter]
    fn col_min(&self) -> usize {
        self.0.col_min
    }

    #[getter]
    fn col_max(&self) -> usize {
        self.0.col_max
    }

    fn area(&self) -> usize {
        self.0.area()
    }

    fn iou(&self, other: &PyBoundingBox) -> f64 {
        self.0.iou(&other.0)
    }

    fn __repr__(&self) -> String {
        let b = self.0;
        format!("BoundingBox(rows {}..={}, cols {}..={})", b.row_min, b.row_max, b.col_min, b.col_max)
    }
}

/// Trained one-class SVM.
#[pyclass(name = "OcsvmModel", module = "tumorseg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyOcsvmModel(ocsvm::OcsvmModel);

fn feature(values: Vec<f64>) -> PyResult<ocsvm::FeatureVector> {
    ocsvm::FeatureVector::new(values).map_err(py_err)
}

#[pymethods]
impl PyOcsvmModel {
    /// Fits a model to positive samples (a list of equal-length lists).
    #[staticmethod]
    #[pyo3(signature = (samples, nu = 0.1, gamma = None, tolerance = 1e-6, seed = 0))]
    fn train(samples: Vec<Vec<f64>>, nu: f64, gamma: Option<f64>, tolerance: f64, seed: u64) -> PyResult<Self> {
        let samples = samples.into_iter().map(feature).collect::<PyResult<Vec<_>>>()?;
        let config = ocsvm::TrainConfig {
            nu,
            gamma,
            tolerance,
            seed,
            ..Default::default()
        };
        ocsvm::train(&samples, &config).map(Self).map_err(py_err)
    }

    /// `(score, is_tumor)`; scores at or above zero are inside the class.
    fn decide(&self, x: Vec<f64>) -> PyResult<(f64, bool)> {
        let d = self.0.decide(&feature(x)?).map_err(py_err)?;
        Ok((d.score, d.label == Label::Tumor))
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.0.nu
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.0.alphas.clone()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.0.feature_dim
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ocsvm::OcsvmModel::from_json(text).map(Self).map_err(py_err)
    }
}

/// Output of `segment`.
#[pyclass(name = "Segmentation", module = "tumorseg", frozen, get_all)]
pub struct PySegmentation {
    mask: PyBinaryMask,
    head_mask: PyBinaryMask,
    denoised: PyGrayImage,
    found: bool,
    bbox: Option<PyBoundingBox>,
    side: String,
    axis_col: f64,
    inside_dissimilarity: f64,
    model: Option<PyOcsvmModel>,
}

fn side_name(side: fbb::Side) -> String {
    match side {
        fbb::Side::Left => "left".into(),
        fbb::Side::Right => "right".into(),
    }
}

fn from_json_or_default<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        None => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(py_err),
    }
}

/// Integer Otsu threshold; pixels above it are foreground.
#[pyfunction]
fn otsu_threshold(image: &PyGrayImage) -> PyResult<u8> {
    preprocess::otsu_threshold(&image.0).map_err(py_err)
}

/// `(head_mask, threshold, stripped_image)`.
#[pyfunction]
fn skull_strip(image: &PyGrayImage) -> PyResult<(PyBinaryMask, u8, PyGrayImage)> {
    let r = preprocess::skull_strip(&image.0).map_err(py_err)?;
    Ok((PyBinaryMask(r.mask), r.threshold, PyGrayImage(r.stripped)))
}

#[pyfunction]
#[pyo3(signature = (image, lambda_ = 0.125, k = 15.0, iterations = 10, function = "exponential", neighborhood = 8))]
fn diffuse(
    image: &PyGrayImage,
    lambda_: f64,
    k: f64,
    iterations: usize,
    function: &str,
    neighborhood: u32,
) -> PyResult<PyGrayImage> {
    let function = match function {
        "exponential" => ConductionFn::Exponential,
        "rational" => ConductionFn::Rational,
        other => return Err(PyValueError::new_err(format!("unknown conduction function {other:?}"))),
    };
    let neighborhood = Neighborhood::from_count(neighborhood)
        .ok_or_else(|| PyValueError::new_err("neighborhood must be 4 or 8"))?;
    let params = DiffusionParams {
        lambda: lambda_,
        k,
        iterations,
        function,
        neighborhood,
    };
    preprocess::diffuse(&image.0, &params).map(PyGrayImage).map_err(py_err)
}

/// Bhattacharyya coefficient of two probability vectors.
#[pyfunction]
fn bhattacharyya(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let p = fbb::Histogram::from_probs(p).map_err(py_err)?;
    let q = fbb::Histogram::from_probs(q).map_err(py_err)?;
    fbb::bhattacharyya(&p, &q).map_err(py_err)
}

/// Bounding-box search; `params` is JSON with `bin_count`,
/// `detection_threshold`, `min_extent`, `histogram_sigma`.
#[pyfunction]
#[pyo3(signature = (image, mask, params = None))]
fn find_bounding_box<'py>(
    py: Python<'py>,
    image: &PyGrayImage,
    mask: &PyBinaryMask,
    params: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let params: FbbParams = from_json_or_default(params)?;
    let r = fbb::find_bounding_box(&image.0, &mask.0, &params).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("found", r.found)?;
    d.set_item("bbox", r.bbox.map(PyBoundingBox))?;
    d.set_item("candidate", r.candidate.map(PyBoundingBox))?;
    d.set_item("side", side_name(r.side))?;
    d.set_item("axis_col", r.axis_col)?;
    d.set_item("inside_dissimilarity", r.inside_dissimilarity)?;
    Ok(d)
}

/// Full pipeline; `config` is the JSON form of the pipeline configuration.
#[pyfunction]
#[pyo3(signature = (image, config = None))]
fn segment(py: Python<'_>, image: &PyGrayImage, config: Option<&str>) -> PyResult<PySegmentation> {
    let config: pipeline::PipelineConfig = from_json_or_default(config)?;
    let out = py
        .detach(|| pipeline::segment(&image.0, &config))
        .map_err(py_err)?;
    Ok(PySegmentation {
        mask: PyBinaryMask(out.mask),
        head_mask: PyBinaryMask(out.head.mask),
        denoised: PyGrayImage(out.denoised),
        found: out.fbb.found,
        bbox: out.fbb.bbox.map(PyBoundingBox),
        side: side_name(out.fbb.side),
        axis_col: out.fbb.axis_col,
        inside_dissimilarity: out.fbb.inside_dissimilarity,
        model: out.model.map(PyOcsvmModel),
    })
}

/// Confusion counts, accuracy and similarity index over `domain`.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    predicted: &PyBinaryMask,
    truth: &PyBinaryMask,
    domain: &PyBinaryMask,
) -> PyResult<Bound<'py, PyDict>> {
    let r = pipeline::evaluate(&predicted.0, &truth.0, &domain.0).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("tp", r.counts.tp)?;
    d.set_item("fp", r.counts.fp)?;
    d.set_item("fn", r.counts.fn_)?;
    d.set_item("tn", r.counts.tn)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("si", r.si)?;
    Ok(d)
}

/// `(image, head_truth, lesion_truth)` for a preset: "standard",
/// "symmetric" or "random".
#[pyfunction]
#[pyo3(signature = (preset = "standard", seed = 0))]
fn phantom(preset: &str, seed: u64) -> PyResult<(PyGrayImage, PyBinaryMask, PyBinaryMask)> {
    let spec = match preset {
        "standard" => PhantomSpec::standard(seed),
        "symmetric" => PhantomSpec::symmetric(seed),
        "random" => PhantomSpec::random_lesion(seed),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    let p = generate_phantom(&spec).map_err(py_err)?;
    Ok((PyGrayImage(p.image), PyBinaryMask(p.head_truth), PyBinaryMask(p.lesion_truth)))
}

#[pymodule]
#[pyo3(name = "tumorseg")]
fn tumorseg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyBinaryMask>()?;
    m.add_class::<PyBoundingBox>()?;
    m.add_class::<PyOcsvmModel>()?;
    m.add_class::<PySegmentation>()?;
    m.add_function(wrap_pyfunction!(otsu_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(skull_strip, m)?)?;
    m.add_function(wrap_pyfunction!(diffuse, m)?)?;
    m.add_function(wrap_pyfunction!(bhattacharyya, m)?)?;
    m.add_function(wrap_pyfunction!(find_bounding_box, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    Ok(())
}
