//! Python bindings for the confidence-set library.
//!
//! Exposes the model loader, posterior-ranked enumeration, confidence-set
//! construction with randomized membership, and the entropy estimators.
//! Sequences cross the boundary as glyph strings; all errors surface as
//! `ValueError` with the library's message text.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use conffilt::confset::{build_confidence_set, randomized_membership};
use conffilt::entropy::{closed_form_rate, exact_block_conditional_entropy, smb_estimate};
use conffilt::inference::{enumerate_descending, posterior_log_prob};
use conffilt::models::{compile_trellis, sample_path, ModelSpec};

fn to_py_err(err: conffilt::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

const DEFAULT_CAP: usize = 1 << 20;
const DEFAULT_LIMIT: usize = 1 << 22;

/// A validated signal/channel model.
#[pyclass(frozen, module = "conffilt_py")]
struct Model {
    spec: ModelSpec,
}

#[pymethods]
impl Model {
    /// Parse and validate a model from JSON text.
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        Ok(Model {
            spec: ModelSpec::from_json(json).map_err(to_py_err)?,
        })
    }

    /// Load a model from a JSON file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Model {
            spec: ModelSpec::from_path(path).map_err(to_py_err)?,
        })
    }

    /// Signal alphabet glyphs.
    #[getter]
    fn input_alphabet(&self) -> Vec<String> {
        self.spec.input_alphabet().symbols().to_vec()
    }

    /// Observation alphabet glyphs (may include the erasure glyph).
    #[getter]
    fn output_alphabet(&self) -> Vec<String> {
        self.spec.output_alphabet().symbols().to_vec()
    }

    /// True when sampling needs a surrogate erasure probability.
    #[getter]
    fn needs_surrogate(&self) -> bool {
        self.spec.needs_surrogate()
    }

    /// Sample a (signal, observation) pair of length `t`.
    #[pyo3(signature = (t, seed, surrogate_pi=None))]
    fn sample_path(&self, t: usize, seed: u64, surrogate_pi: Option<f64>) -> PyResult<(String, String)> {
        let (x, z) = sample_path(&self.spec, t, seed, surrogate_pi).map_err(to_py_err)?;
        Ok((
            self.spec.input_alphabet().format_sequence(&x),
            self.spec.output_alphabet().format_sequence(&z),
        ))
    }

    /// log₂ P(x | z).
    fn log2_posterior(&self, z: &str, x: &str) -> PyResult<f64> {
        let z = self.spec.output_alphabet().parse_sequence(z).map_err(to_py_err)?;
        let x = self.spec.input_alphabet().parse_sequence(x).map_err(to_py_err)?;
        let trellis = compile_trellis(&self.spec, &z);
        posterior_log_prob(&trellis, &x).map_err(to_py_err)
    }

    /// All signal sequences consistent with `z`, most probable first,
    /// as (sequence, posterior) pairs.
    #[pyo3(signature = (z, limit=DEFAULT_LIMIT))]
    fn ranked(&self, z: &str, limit: usize) -> PyResult<Vec<(String, f64)>> {
        let z = self.spec.output_alphabet().parse_sequence(z).map_err(to_py_err)?;
        let trellis = compile_trellis(&self.spec, &z);
        let mut stream = enumerate_descending(&trellis, limit).map_err(to_py_err)?;
        let mut items = Vec::new();
        while let Some(item) = stream.next_item().map_err(to_py_err)? {
            items.push((
                self.spec.input_alphabet().format_sequence(&item.sequence),
                item.posterior,
            ));
        }
        Ok(items)
    }

    /// Build the γ-confidence set for an observation.
    #[pyo3(signature = (z, gamma, cap=DEFAULT_CAP, limit=DEFAULT_LIMIT))]
    fn confidence_set(&self, z: &str, gamma: f64, cap: usize, limit: usize) -> PyResult<ConfidenceSet> {
        let z_idx = self.spec.output_alphabet().parse_sequence(z).map_err(to_py_err)?;
        let trellis = compile_trellis(&self.spec, &z_idx);
        let mut stream = enumerate_descending(&trellis, limit).map_err(to_py_err)?;
        let set = build_confidence_set(&mut stream, gamma, cap).map_err(to_py_err)?;
        Ok(ConfidenceSet {
            set,
            spec: self.spec.clone(),
        })
    }

    /// Closed-form conditional entropy rate h(X|Z), when the model class
    /// admits one.
    fn entropy_closed_form(&self) -> PyResult<f64> {
        Ok(closed_form_rate(&self.spec).map_err(to_py_err)?.value)
    }

    /// Exact blockwise conditional entropy (1/n)·H(X₁..Xₙ | Z₁..Zₙ).
    fn entropy_exact_block(&self, n: usize) -> PyResult<f64> {
        Ok(exact_block_conditional_entropy(&self.spec, n)
            .map_err(to_py_err)?
            .value)
    }

    /// Monte-Carlo estimate of h(X|Z) from sampled paths; returns
    /// (value, std_error).
    #[pyo3(signature = (n, reps, seed, surrogate_pi=None))]
    fn entropy_smb(
        &self,
        n: usize,
        reps: usize,
        seed: u64,
        surrogate_pi: Option<f64>,
    ) -> PyResult<(f64, Option<f64>)> {
        let est = smb_estimate(&self.spec, n, reps, seed, surrogate_pi).map_err(to_py_err)?;
        Ok((est.value, est.std_error))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(|X|={}, |Z|={}, needs_surrogate={})",
            self.spec.input_alphabet().len(),
            self.spec.output_alphabet().len(),
            self.spec.needs_surrogate()
        )
    }
}

/// A built confidence set: deterministic core plus optional randomized
/// boundary member.
#[pyclass(frozen, module = "conffilt_py")]
struct ConfidenceSet {
    set: conffilt::confset::ConfidenceSet,
    spec: ModelSpec,
}

#[pymethods]
impl ConfidenceSet {
    /// Confidence level γ.
    #[getter]
    fn gamma(&self) -> f64 {
        self.set.gamma()
    }

    /// Core members as (sequence, posterior), most probable first.
    #[getter]
    fn core(&self) -> Vec<(String, f64)> {
        self.set
            .core()
            .iter()
            .map(|(x, p)| (self.spec.input_alphabet().format_sequence(x), *p))
            .collect()
    }

    /// Boundary member as (sequence, posterior, inclusion_prob), or None.
    #[getter]
    fn boundary(&self) -> Option<(String, f64, f64)> {
        self.set.boundary().map(|b| {
            (
                self.spec.input_alphabet().format_sequence(b.sequence()),
                b.posterior(),
                b.inclusion_prob(),
            )
        })
    }

    /// Total posterior mass of the core.
    #[getter]
    fn core_mass(&self) -> f64 {
        self.set.core_mass()
    }

    /// Core mass plus the boundary's randomized contribution; equals γ.
    #[getter]
    fn coverage_mass(&self) -> f64 {
        self.set.coverage_mass()
    }

    /// Expected cardinality |core| + inclusion probability.
    #[getter]
    fn expected_size(&self) -> f64 {
        self.set.expected_size()
    }

    /// Randomized membership of `x` given the uniform draw `u`.
    fn contains(&self, x: &str, u: f64) -> PyResult<bool> {
        let x = self.spec.input_alphabet().parse_sequence(x).map_err(to_py_err)?;
        randomized_membership(&self.set, &x, u).map_err(to_py_err)
    }

    /// Tab-separated text form, one member per line.
    fn serialize(&self) -> String {
        self.set.serialize(self.spec.input_alphabet())
    }

    fn __repr__(&self) -> String {
        format!(
            "ConfidenceSet(gamma={}, core={}, boundary={}, expected_size={})",
            self.set.gamma(),
            self.set.core().len(),
            self.set.boundary().is_some(),
            self.set.expected_size()
        )
    }
}

/// Derive the per-trial seed the experiment drivers use.
#[pyfunction]
fn derive_seed(base: u64, index: u64) -> u64 {
    conffilt::rng::derive_seed(base, index)
}

#[pymodule]
fn conffilt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<ConfidenceSet>()?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
