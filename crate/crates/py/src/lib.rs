//! Python bindings: images, sample sets, the inpainting pipeline and the
//! verification experiments. Reports are returned as plain dictionaries.

use nalgebra::DMatrix;
use patchfill::grouping::{build_groups, reference_image as reference_impl};
use patchfill::theory_lab;
use patchfill::{
    admm_inpaint_from, Boundary, Error, GroupingConfig, PatchConfig, PatchGroups, PatchLayout,
    ReferenceConfig, RngSeed,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Format { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_boundary(name: &str) -> PyResult<Boundary> {
    match name {
        "valid" => Ok(Boundary::Valid),
        "periodic" => Ok(Boundary::Periodic),
        "symmetric" => Ok(Boundary::Symmetric),
        _ => Err(PyValueError::new_err(format!(
            "boundary must be 'valid', 'periodic' or 'symmetric', got {name:?}"
        ))),
    }
}

/// Square grayscale image.
#[pyclass(name = "Image", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: patchfill::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let side = rows.len();
        if rows.iter().any(|r| r.len() != side) {
            return Err(PyValueError::new_err("image must be square"));
        }
        let inner = patchfill::Image::new(side, rows.concat()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.pixels().chunks(self.inner.side()).map(<[f64]>::to_vec).collect()
    }

    fn __getitem__(&self, idx: (usize, usize)) -> PyResult<f64> {
        let n = self.inner.side();
        if idx.0 >= n || idx.1 >= n {
            return Err(PyValueError::new_err("pixel index out of range"));
        }
        Ok(self.inner.get(idx.0, idx.1))
    }

    fn relative_error(&self, reference: &PyImage) -> f64 {
        self.inner.relative_error(&reference.inner)
    }

    fn __repr__(&self) -> String {
        format!("Image(side={})", self.inner.side())
    }
}

/// Multiset of observed pixel coordinates.
#[pyclass(name = "SampleSet", from_py_object)]
#[derive(Clone)]
struct PySampleSet {
    inner: patchfill::SampleSet,
}

#[pymethods]
impl PySampleSet {
    #[new]
    fn new(side: usize, draws: Vec<(usize, usize)>) -> PyResult<Self> {
        let inner = patchfill::SampleSet::new(side, draws).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn uniform(side: usize, m: usize, seed: u64) -> PyResult<Self> {
        let inner = patchfill::sample_uniform(side, m, RngSeed(seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn draws(&self) -> Vec<(usize, usize)> {
        self.inner.draws().to_vec()
    }

    fn distinct(&self) -> Vec<(usize, usize)> {
        self.inner.distinct().iter().copied().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn read_pgm(path: &str) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: patchfill::read_pgm(path).map_err(to_py)?,
    })
}

#[pyfunction]
fn write_pgm(path: &str, image: &PyImage) -> PyResult<()> {
    patchfill::write_pgm(path, &image.inner).map_err(to_py)
}

/// PSNR in dB with peak 255; `inf` for identical images.
#[pyfunction]
fn psnr(reference: &PyImage, test: &PyImage) -> PyResult<f64> {
    Ok(patchfill::psnr(&reference.inner, &test.inner).map_err(to_py)?.0)
}

#[pyfunction]
fn apply_mask(image: &PyImage, samples: &PySampleSet) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: patchfill::apply_mask(&image.inner, &samples.inner).map_err(to_py)?,
    })
}

#[pyfunction]
#[pyo3(signature = (observed, samples, max_iters=5000, tol=1e-7))]
fn reference_image(
    observed: &PyImage,
    samples: &PySampleSet,
    max_iters: usize,
    tol: f64,
) -> PyResult<PyImage> {
    let cfg = ReferenceConfig { max_iters, tol };
    Ok(PyImage {
        inner: reference_impl(&observed.inner, &samples.inner, &cfg).map_err(to_py)?,
    })
}

/// Full pipeline: reference image, block-matched groups, ADMM from the
/// reference. Returns `(recovered, reference, solve_report)`.
#[pyfunction]
#[pyo3(signature = (
    observed, samples, patch_n=8, boundary="valid", k_groups=256, group_size=40,
    search_radius=12, rho=1.0, max_iters=500, tol=1e-6, delta=0.0
))]
#[allow(clippy::too_many_arguments)]
fn inpaint<'py>(
    py: Python<'py>,
    observed: &PyImage,
    samples: &PySampleSet,
    patch_n: usize,
    boundary: &str,
    k_groups: usize,
    group_size: usize,
    search_radius: usize,
    rho: f64,
    max_iters: usize,
    tol: f64,
    delta: f64,
) -> PyResult<(PyImage, PyImage, Bound<'py, PyAny>)> {
    let y = &observed.inner;
    let s = &samples.inner;
    let pcfg = PatchConfig::new(y.side(), patch_n, parse_boundary(boundary)?).map_err(to_py)?;
    let gcfg = GroupingConfig {
        k_groups,
        group_size,
        search_radius,
    };
    let acfg = patchfill::AdmmConfig {
        rho,
        max_iters,
        tol_primal: tol,
        tol_dual: tol,
        delta,
        ..Default::default()
    };
    let (recovered, reference, report) = py
        .detach(|| -> patchfill::Result<_> {
            let reference = reference_impl(y, s, &ReferenceConfig::default())?;
            let groups = build_groups(&reference, &gcfg, &pcfg)?;
            let layout = PatchLayout::new(pcfg, groups)?;
            let (z, report) = admm_inpaint_from(y, s, &layout, &acfg, &reference)?;
            Ok((z, reference, report))
        })
        .map_err(to_py)?;
    Ok((
        PyImage { inner: recovered },
        PyImage { inner: reference },
        to_dict(py, &report)?,
    ))
}

#[pyfunction]
#[pyo3(signature = (n_side, components, seed=0, amplitude=(10.0, 50.0)))]
fn generate_synthetic(
    n_side: usize,
    components: usize,
    seed: u64,
    amplitude: (f64, f64),
) -> PyResult<PyImage> {
    let spec = theory_lab::SyntheticSpec {
        n_side,
        components,
        seed: RngSeed(seed),
        amplitude,
    };
    Ok(PyImage {
        inner: theory_lab::generate_synthetic(&spec).map_err(to_py)?,
    })
}

/// Singular-value thresholding of a dense matrix given as a list of rows.
#[pyfunction]
fn svt(matrix: Vec<Vec<f64>>, tau: f64) -> PyResult<Vec<Vec<f64>>> {
    let cols = matrix.first().map_or(0, Vec::len);
    if matrix.iter().any(|row| row.len() != cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let m = DMatrix::from_fn(matrix.len(), cols, |i, j| matrix[i][j]);
    let x = patchfill::solver::svt(&m, tau).map_err(to_py)?;
    Ok((0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect())
}

fn single_group_layout(side: usize, patch_n: usize, boundary: &str) -> PyResult<PatchLayout> {
    let cfg = PatchConfig::new(side, patch_n, parse_boundary(boundary)?).map_err(to_py)?;
    PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).map_err(to_py)
}

/// Golfing-scheme certificate with one group holding every patch.
#[pyfunction]
#[pyo3(signature = (image, patch_n, m, seed=0, boundary="valid"))]
fn golfing_certificate<'py>(
    py: Python<'py>,
    image: &PyImage,
    patch_n: usize,
    m: usize,
    seed: u64,
    boundary: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let layout = single_group_layout(image.inner.side(), patch_n, boundary)?;
    let rep = theory_lab::golfing_certificate(&image.inner, &layout, m, RngSeed(seed))
        .map_err(to_py)?;
    to_dict(py, &rep)
}

/// Per-pixel incoherence bounds with one group holding every patch.
#[pyfunction]
#[pyo3(signature = (image, patch_n, boundary="valid"))]
fn verify_lemma_bounds<'py>(
    py: Python<'py>,
    image: &PyImage,
    patch_n: usize,
    boundary: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let layout = single_group_layout(image.inner.side(), patch_n, boundary)?;
    let rep = theory_lab::verify_lemma_bounds(&image.inner, &layout).map_err(to_py)?;
    to_dict(py, &rep)
}

#[pymodule]
fn patchfill_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PySampleSet>()?;
    m.add_function(wrap_pyfunction!(read_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(write_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(apply_mask, m)?)?;
    m.add_function(wrap_pyfunction!(reference_image, m)?)?;
    m.add_function(wrap_pyfunction!(inpaint, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(svt, m)?)?;
    m.add_function(wrap_pyfunction!(golfing_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lemma_bounds, m)?)?;
    Ok(())
}
