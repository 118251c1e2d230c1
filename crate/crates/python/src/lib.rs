//! Python bindings: attention validation, structure learning, confidence
//! scores, synthetic SCMs and the harness statistics.

use attncausal::attnmat::{self, AttentionMatrix};
use attncausal::citest::CiConfig;
use attncausal::confidence::{self, Filter};
use attncausal::discovery::{self, DiscoveryResult};
use attncausal::harness::{self, HeadScore, HeadScoreTable, NgramOptions, SequenceDataset};
use attncausal::io;
use attncausal::matrix::Matrix;
use attncausal::pag;
use attncausal::scmsim::{self, Scm, ScmParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).ok_or_else(|| PyValueError::new_err("ragged matrix"))
}

fn ci_config(alpha: f64, n_eff: Option<usize>, exact_threshold: Option<f64>, n: usize) -> PyResult<CiConfig> {
    let n_eff = n_eff.unwrap_or(n.max(5));
    let cfg = match exact_threshold {
        Some(t) => CiConfig {
            alpha,
            ..CiConfig::exact(t, n_eff).map_err(value_err)?
        },
        None => CiConfig::new(alpha, n_eff).map_err(value_err)?,
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// Lower-triangular, row-stochastic attention matrix.
#[pyclass(name = "AttentionMatrix", frozen, from_py_object)]
#[derive(Clone)]
struct PyAttention(AttentionMatrix);

#[pymethods]
impl PyAttention {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        attnmat::validate_attention(matrix(rows)?).map(Self).map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.0.matrix().to_rows()
    }

    /// D⁻¹A, the lower uni-triangular effect matrix.
    fn effect_matrix(&self) -> Vec<Vec<f64>> {
        attnmat::to_uni_triangular(&self.0).matrix().to_rows()
    }

    fn correlation(&self) -> PyResult<Vec<Vec<f64>>> {
        let c = attnmat::covariance(&attnmat::to_uni_triangular(&self.0));
        Ok(attnmat::correlation(&c).map_err(value_err)?.matrix().to_rows())
    }

    fn leading_block(&self, m: usize) -> PyResult<Self> {
        self.0.leading_block(m).map(Self).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("AttentionMatrix(n={})", self.0.n())
    }
}

/// Partial ancestral graph. Marks are "circle", "arrow" or "tail".
#[pyclass(name = "Pag", frozen, from_py_object)]
#[derive(Clone)]
struct PyPag(pag::Pag);

#[pymethods]
impl PyPag {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::pag_from_json(text).map(Self).map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    /// `(a, b, mark_at_a, mark_at_b)` with `a < b`.
    fn edges(&self) -> Vec<(usize, usize, &'static str, &'static str)> {
        self.0
            .edges()
            .into_iter()
            .map(|e| (e.a, e.b, e.mark_a.as_str(), e.mark_b.as_str()))
            .collect()
    }

    fn skeleton(&self) -> Vec<(usize, usize)> {
        self.0.skeleton()
    }

    fn sepset(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        self.0.sepset(a, b).map(<[usize]>::to_vec)
    }

    fn has_bidirected_edge(&self) -> bool {
        self.0.has_bidirected_edge()
    }

    fn to_json(&self) -> String {
        io::pag_to_json(&self.0)
    }

    #[pyo3(signature = (name = "pag"))]
    fn to_dot(&self, name: &str) -> String {
        io::pag_to_dot(&self.0, name)
    }

    /// Same skeleton and marks; sepsets are ignored.
    fn __eq__(&self, other: &Self) -> bool {
        pag::pag_equal(&self.0, &other.0)
    }

    fn __repr__(&self) -> String {
        format!("Pag(n={}, edges={})", self.0.n(), self.0.edge_count())
    }
}

#[pyclass(name = "DiscoveryResult", frozen)]
struct PyDiscovery(DiscoveryResult);

#[pymethods]
impl PyDiscovery {
    #[getter]
    fn pag(&self) -> PyPag {
        PyPag(self.0.pag.clone())
    }

    #[getter]
    fn tests_performed(&self) -> usize {
        self.0.trace.tests_performed
    }

    /// `(i, j, cond, p_value, independent)` per recorded test.
    fn records(&self) -> Vec<(usize, usize, Vec<usize>, f64, bool)> {
        self.0
            .trace
            .records
            .iter()
            .map(|r| (r.i, r.j, r.cond.clone(), r.p_value, r.independent))
            .collect()
    }

    fn trace_json(&self) -> String {
        io::trace_to_json(&self.0.trace)
    }

    /// Entropy-based structural confidence under one conditioning-size filter.
    #[pyo3(signature = (alpha = 0.01, filter = "all", bins = 10))]
    fn confidence(&self, alpha: f64, filter: &str, bins: usize) -> PyResult<(f64, f64, f64, bool)> {
        let f: Filter = filter.parse().map_err(value_err)?;
        let r = confidence::confidence_score(&self.0.trace, alpha, f, bins).map_err(value_err)?;
        Ok((r.r_score, r.h_ind, r.h_dep, r.degenerate))
    }
}

/// Learns a PAG from one head. `exact_threshold` switches to |ρ| thresholding.
#[pyfunction]
#[pyo3(signature = (attention, alpha = 0.01, n_eff = None, exact_threshold = None))]
fn learn_structure(
    py: Python<'_>,
    attention: &PyAttention,
    alpha: f64,
    n_eff: Option<usize>,
    exact_threshold: Option<f64>,
) -> PyResult<PyDiscovery> {
    let cfg = ci_config(alpha, n_eff, exact_threshold, attention.0.n())?;
    let a = attention.0.clone();
    py.detach(|| discovery::learn_structure(&a, &cfg))
        .map(PyDiscovery)
        .map_err(value_err)
}

/// Mean head confidence of a sequence.
#[pyfunction]
#[pyo3(signature = (heads, alpha = 0.01, n_eff = None, filter = "all", bins = 10))]
fn sequence_score(
    py: Python<'_>,
    heads: Vec<PyAttention>,
    alpha: f64,
    n_eff: Option<usize>,
    filter: &str,
    bins: usize,
) -> PyResult<f64> {
    let f: Filter = filter.parse().map_err(value_err)?;
    let n = heads.first().map_or(0, |h| h.0.n());
    let cfg = ci_config(alpha, n_eff, None, n)?;
    let heads: Vec<AttentionMatrix> = heads.into_iter().map(|h| h.0).collect();
    let results = py
        .detach(|| discovery::learn_all_heads(&heads, &cfg))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let s = confidence::sequence_score(&results, alpha, f, bins).map_err(value_err)?;
    Ok(s.score)
}

/// Linear-Gaussian SCM over a strictly lower-triangular weight matrix.
#[pyclass(name = "Scm", frozen)]
struct PyScm(Scm);

#[pymethods]
impl PyScm {
    #[new]
    #[pyo3(signature = (weights, latents = Vec::new()))]
    fn new(weights: Vec<Vec<f64>>, latents: Vec<usize>) -> PyResult<Self> {
        Scm::new(weights, latents).map(Self).map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, density, seed, latents = 0))]
    fn random(n: usize, density: f64, seed: u64, latents: usize) -> PyResult<Self> {
        let params = ScmParams::new(n, density).with_latents(latents);
        scmsim::random_scm(&params, seed).map(Self).map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn latents(&self) -> Vec<usize> {
        self.0.latents.clone()
    }

    fn weights(&self) -> Vec<Vec<f64>> {
        self.0.g.clone()
    }

    /// (I − G)⁻¹ over all nodes.
    fn effect_matrix(&self) -> Vec<Vec<f64>> {
        scmsim::effect_matrix(&self.0).matrix().to_rows()
    }

    /// Attention over the observed nodes.
    fn attention(&self) -> PyResult<PyAttention> {
        let m = scmsim::observed_effect_matrix(&self.0).map_err(value_err)?;
        attnmat::synthesize_attention(&m).map(PyAttention).map_err(value_err)
    }

    /// Ground-truth PAG over the observed nodes.
    fn oracle_pag(&self) -> PyPag {
        PyPag(scmsim::oracle_fci(&self.0.dag(), &self.0.latents))
    }

    fn d_separated(&self, i: usize, j: usize, z: Vec<usize>) -> PyResult<bool> {
        let n = self.0.n;
        if i >= n || j >= n || z.iter().any(|&v| v >= n) {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(scmsim::d_separated(&self.0.dag(), i, j, &z))
    }
}

/// Nearest-rank thresholds over `(sequence_id, head_index, r_score)` rows.
#[pyfunction]
fn percentile_thresholds(rows: Vec<(String, usize, f64)>, percentiles: Vec<f64>) -> PyResult<Vec<f64>> {
    let table = HeadScoreTable::new(
        rows.into_iter()
            .map(|(sequence_id, head_index, r_score)| HeadScore {
                sequence_id,
                head_index,
                r_score,
            })
            .collect(),
    )
    .map_err(value_err)?;
    harness::percentile_thresholds(&table, &percentiles).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (train, probe, ell, n, vocab_size, anchor_end = false, exclude_self = false))]
#[allow(clippy::too_many_arguments)]
fn ngram_occurrence_mean(
    train: Vec<Vec<u32>>,
    probe: Vec<Vec<u32>>,
    ell: usize,
    n: usize,
    vocab_size: u32,
    anchor_end: bool,
    exclude_self: bool,
) -> PyResult<f64> {
    let train = SequenceDataset::new(vocab_size, train).map_err(value_err)?;
    let probe = SequenceDataset::new(vocab_size, probe).map_err(value_err)?;
    let opts = NgramOptions {
        anchor_end,
        exclude_self,
    };
    harness::ngram_occurrence_mean(&train, &probe, ell, n, opts)
        .map(|r| r.mean)
        .map_err(value_err)
}

#[pymodule]
fn attncausal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAttention>()?;
    m.add_class::<PyPag>()?;
    m.add_class::<PyDiscovery>()?;
    m.add_class::<PyScm>()?;
    m.add_function(wrap_pyfunction!(learn_structure, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_score, m)?)?;
    m.add_function(wrap_pyfunction!(percentile_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(ngram_occurrence_mean, m)?)?;
    Ok(())
}
