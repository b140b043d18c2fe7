//! Python bindings. Numbers go in as anything whose `str()` is `p/q` or `p`
//! (ints, `fractions.Fraction`, strings) and come back as `Fraction`.

use affsel::conelift::{select_linear as core_select_linear, LinearConfig};
use affsel::instances::{generate as core_generate, Family, GenParams, InstanceFile};
use affsel::numerics::{parse_rational, Point, Rational, Scalar};
use affsel::oracle::{fm_feasible as core_fm_feasible, verify_domination, DominationKind};
use affsel::sandwich::{sandwich as core_sandwich, SandwichConfig, SandwichMode};
use affsel::subgradient::{
    select_subgradient as core_select_subgradient, SubgradientBackend, SubgradientConfig,
};
use affsel::{select_affine as core_select_affine, AffineConfig, BaseRule, Instance};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err(e: affsel::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rational(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    parse_rational(&obj.str()?.to_cow()?).map_err(err)
}

fn to_point(obj: &Bound<'_, PyAny>) -> PyResult<Point<Rational>> {
    obj.try_iter()?
        .map(|c| to_rational(&c?))
        .collect::<PyResult<_>>()
        .map(Point)
}

fn fraction<'py>(py: Python<'py>, r: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((r.render(),))
}

fn fractions<'py>(py: Python<'py>, rs: &[Rational]) -> PyResult<Bound<'py, PyList>> {
    let items = rs
        .iter()
        .map(|r| fraction(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, items)
}

/// A finite instance in exact arithmetic.
#[pyclass(name = "Instance", module = "affsel_py", frozen)]
struct PyInstance {
    inner: Instance<Rational>,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (n, x, y, f, y0=None))]
    fn new(
        n: usize,
        x: Vec<String>,
        y: &Bound<'_, PyAny>,
        f: &Bound<'_, PyAny>,
        y0: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let points = y
            .try_iter()?
            .map(|p| to_point(&p?))
            .collect::<PyResult<Vec<_>>>()?;
        let rows = f
            .try_iter()?
            .map(|row| {
                row?.try_iter()?
                    .map(|v| to_rational(&v?))
                    .collect::<PyResult<Vec<_>>>()
            })
            .collect::<PyResult<Vec<_>>>()?;
        let y0 = match y0 {
            Some(t) => Some(
                t.try_iter()?
                    .map(|p| to_point(&p?))
                    .collect::<PyResult<Vec<_>>>()?,
            ),
            None => None,
        };
        let inner = Instance::with_extras(n, x, points, rows, None, y0).map_err(err)?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = InstanceFile::parse(text)
            .and_then(|f| f.to_instance())
            .map_err(err)?;
        Ok(PyInstance { inner })
    }

    fn to_json(&self) -> String {
        InstanceFile::from_instance(&self.inner, None).to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn x(&self) -> Vec<String> {
        self.inner.x_ids.clone()
    }

    #[getter]
    fn y<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let pts = self
            .inner
            .y
            .iter()
            .map(|p| fractions(py, p.coords()))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, pts)
    }

    #[getter]
    fn f<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = self
            .inner
            .f
            .iter()
            .map(|r| fractions(py, r))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, rows)
    }

    fn __len__(&self) -> usize {
        self.inner.nx()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, |X|={}, |Y|={})",
            self.inner.n,
            self.inner.nx(),
            self.inner.y.len()
        )
    }
}

/// Seeded instance from one of the families `affine`, `meager`, `convex`.
#[pyfunction]
#[pyo3(signature = (family, seed, n, nx, ny, k=2, duplicates=0, zero_slack=false, origin_bump=false, shift=false))]
#[allow(clippy::too_many_arguments)]
fn generate(
    family: &str,
    seed: u64,
    n: usize,
    nx: usize,
    ny: usize,
    k: usize,
    duplicates: usize,
    zero_slack: bool,
    origin_bump: bool,
    shift: bool,
) -> PyResult<PyInstance> {
    let family = match family {
        "affine" => Family::Affine,
        "meager" => Family::Meager,
        "convex" => Family::Convex,
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    };
    let params = GenParams {
        seed,
        n,
        nx,
        ny,
        k,
        zero_slack,
        duplicates,
        origin_bump,
        shift,
    };
    let inner = core_generate(family, &params)
        .and_then(|f| f.to_instance())
        .map_err(err)?;
    Ok(PyInstance { inner })
}

fn sandwich_config(mode: &str, depth: u32) -> PyResult<SandwichConfig> {
    let mode = match mode {
        "midpoint" => SandwichMode::Midpoint,
        "staged" => SandwichMode::Staged,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown sandwich mode {other:?}"
            )))
        }
    };
    Ok(SandwichConfig { mode, depth })
}

fn affine_config(sandwich: &str, depth: u32, base: &str) -> PyResult<AffineConfig> {
    let base = match base {
        "novikov" => BaseRule::Novikov,
        "tight" => BaseRule::Tight,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown base rule {other:?}"
            )))
        }
    };
    Ok(AffineConfig {
        sandwich: sandwich_config(sandwich, depth)?,
        base,
        record_tables: false,
    })
}

/// Affine dominators: one dict `{"x", "B", "C"}` per parameter.
#[pyfunction]
#[pyo3(signature = (inst, sandwich="midpoint", depth=24, base="novikov"))]
fn select_affine<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    sandwich: &str,
    depth: u32,
    base: &str,
) -> PyResult<Bound<'py, PyList>> {
    let config = affine_config(sandwich, depth, base)?;
    let (sel, _) = core_select_affine(&inst.inner, &config).map_err(err)?;
    let out = (0..inst.inner.nx())
        .map(|x| {
            let d = PyDict::new(py);
            d.set_item("x", &inst.inner.x_ids[x])?;
            d.set_item("B", fractions(py, sel.b[x].coords())?)?;
            d.set_item("C", fraction(py, &sel.c[x])?)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, out)
}

/// Linear dominators: one dict `{"x", "A", "epsilon", "exact"}` per parameter.
#[pyfunction]
#[pyo3(signature = (inst, lambda_max_log2=20, doublings=3))]
fn select_linear<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    lambda_max_log2: u32,
    doublings: u32,
) -> PyResult<Bound<'py, PyList>> {
    let config = LinearConfig {
        lambda_max_log2,
        doublings,
        affine: AffineConfig::default(),
    };
    let sel = core_select_linear(&inst.inner, &config).map_err(err)?;
    let out = (0..inst.inner.nx())
        .map(|x| {
            let d = PyDict::new(py);
            d.set_item("x", &inst.inner.x_ids[x])?;
            d.set_item("A", fractions(py, sel.a[x].coords())?)?;
            d.set_item("epsilon", fraction(py, &sel.epsilon[x])?)?;
            d.set_item("exact", sel.exact[x])?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, out)
}

/// Subgradients at the base point: one dict `{"x", "p", "epsilon"}` per parameter.
#[pyfunction]
#[pyo3(signature = (inst, backend="exact", shift=false))]
fn select_subgradient<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    backend: &str,
    shift: bool,
) -> PyResult<Bound<'py, PyList>> {
    let backend = match backend {
        "exact" => SubgradientBackend::Exact,
        "cone" => SubgradientBackend::Cone,
        other => return Err(PyValueError::new_err(format!("unknown backend {other:?}"))),
    };
    let config = SubgradientConfig {
        backend,
        shift,
        linear: LinearConfig::default(),
    };
    let sel = core_select_subgradient(&inst.inner, &config).map_err(err)?;
    let out = (0..inst.inner.nx())
        .map(|x| {
            let d = PyDict::new(py);
            d.set_item("x", &inst.inner.x_ids[x])?;
            d.set_item("p", fractions(py, sel.p[x].coords())?)?;
            d.set_item("epsilon", fraction(py, &sel.epsilon[x])?)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, out)
}

/// Checks `f(x, y) <= coeffs[x]·y + offsets[x]` and returns `(passed, min_slacks)`.
#[pyfunction]
#[pyo3(signature = (inst, coeffs, offsets, kind="affine"))]
fn verify<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    coeffs: &Bound<'py, PyAny>,
    offsets: &Bound<'py, PyAny>,
    kind: &str,
) -> PyResult<(bool, Bound<'py, PyList>)> {
    let kind = match kind {
        "affine" => DominationKind::Affine,
        "linear" => DominationKind::Linear,
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    };
    let coeffs = coeffs
        .try_iter()?
        .map(|p| to_point(&p?))
        .collect::<PyResult<Vec<_>>>()?;
    let offsets = offsets
        .try_iter()?
        .map(|v| to_rational(&v?))
        .collect::<PyResult<Vec<_>>>()?;
    let rep = verify_domination(&inst.inner, &coeffs, &offsets, kind).map_err(err)?;
    let slacks = rep
        .per_x
        .iter()
        .map(|s| match &s.min_slack {
            Some(v) => fraction(py, v),
            None => Ok(py.None().into_bound(py)),
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((rep.passed, PyList::new(py, slacks)?))
}

/// Exact Fourier–Motzkin feasibility per parameter: `(feasible, witness or None)`.
#[pyfunction]
#[pyo3(signature = (inst, homogeneous=false))]
fn fm_feasible<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    homogeneous: bool,
) -> PyResult<Bound<'py, PyList>> {
    let results = core_fm_feasible(&inst.inner.y, &inst.inner.f, homogeneous).map_err(err)?;
    let out = results
        .iter()
        .map(|r| {
            let w = match &r.witness {
                Some(w) => fractions(py, w)?.into_any(),
                None => py.None().into_bound(py),
            };
            Ok((r.feasible, w))
        })
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, out)
}

/// A function between `u` and `l` (pointwise `u <= l`).
#[pyfunction]
#[pyo3(signature = (u, l, mode="midpoint", depth=24))]
fn sandwich<'py>(
    py: Python<'py>,
    u: &Bound<'py, PyAny>,
    l: &Bound<'py, PyAny>,
    mode: &str,
    depth: u32,
) -> PyResult<Bound<'py, PyList>> {
    let u = u
        .try_iter()?
        .map(|v| to_rational(&v?))
        .collect::<PyResult<Vec<_>>>()?;
    let l = l
        .try_iter()?
        .map(|v| to_rational(&v?))
        .collect::<PyResult<Vec<_>>>()?;
    let out = core_sandwich(&u, &l, sandwich_config(mode, depth)?).map_err(err)?;
    fractions(py, &out.values)
}

#[pymodule]
fn affsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(select_affine, m)?)?;
    m.add_function(wrap_pyfunction!(select_linear, m)?)?;
    m.add_function(wrap_pyfunction!(select_subgradient, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(fm_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich, m)?)?;
    Ok(())
}
