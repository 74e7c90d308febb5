//! Python bindings. Bit sequences cross the boundary as strings of `0` and `1`.
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lzcore::bitcodes::{decode_int as core_decode_int, encode_int as core_encode_int};
use lzcore::coder::{compression_ratio, ratio_curve as core_ratio_curve, ratio_f64};
use lzcore::deficiency::deficiency_curve;
use lzcore::harness::{make_coder, make_source, run_experiment as core_run_experiment, stream_rng, ExperimentConfig};
use lzcore::kt::MixtureMeasure;
use lzcore::measure::{format_rational, parse_rational, MeasureOracle};
use lzcore::theorem1::{build_alpha, AlignedMeasure, AlphaOptions, ConstructionParams, Mode, Sigma};
use lzcore::{BitString, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Malformed(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn bits(s: &str) -> PyResult<BitString> {
    s.parse().map_err(|_| PyValueError::new_err("expected a string of 0 and 1"))
}

/// Elias-delta codeword of `k >= 1`.
#[pyfunction]
fn encode_int(k: u64) -> PyResult<String> {
    Ok(core_encode_int(k).map_err(err)?.to_string())
}

/// `(k, consumed)` for the codeword at the front of `s`.
#[pyfunction]
fn decode_int(s: &str) -> PyResult<(u64, usize)> {
    core_decode_int(&bits(s)?).map_err(err)
}

#[pyclass(frozen)]
struct Coder {
    inner: Box<dyn lzcore::Coder>,
}

#[pymethods]
impl Coder {
    /// `lz78`, `lz78-coord`, `lzwin[:W|:inf]`, `block:N[:INNER]`, `mixture[:K]` or `verbatim`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Coder {
            inner: make_coder(spec).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    fn encode(&self, x: &str) -> PyResult<String> {
        Ok(self.inner.encode(&bits(x)?).to_string())
    }

    fn decode(&self, code: &str) -> PyResult<String> {
        Ok(self.inner.decode(&bits(code)?).map_err(err)?.to_string())
    }

    fn code_len(&self, x: &str) -> PyResult<u64> {
        Ok(self.inner.code_len(&bits(x)?))
    }

    fn ratio(&self, x: &str) -> PyResult<f64> {
        Ok(ratio_f64(compression_ratio(&self.inner, &bits(x)?).map_err(err)?))
    }

    /// `[(n, bits, ratio)]` at multiples of `stride`.
    fn ratio_curve(&self, x: &str, stride: usize) -> PyResult<Vec<(usize, u64, f64)>> {
        let c = core_ratio_curve(&self.inner, &bits(x)?, stride).map_err(err)?;
        Ok(c.points.iter().map(|p| (p.n, p.bits, ratio_f64(p.ratio))).collect())
    }

    fn __repr__(&self) -> String {
        format!("Coder({:?})", self.inner.name())
    }
}

#[pyclass(frozen)]
struct Source {
    inner: lzcore::sources::MarkovSource,
    spec: String,
}

#[pymethods]
impl Source {
    /// `bernoulli:P`, `flip:P`, `chain:P0,P1,...` or `markov:FILE`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Source {
            inner: make_source(spec).map_err(err)?,
            spec: spec.into(),
        })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn entropy_rate(&self) -> f64 {
        self.inner.entropy_rate()
    }

    /// Exact probability as a `num/den` string.
    fn prob(&self, x: &str) -> PyResult<String> {
        Ok(format_rational(&self.inner.prob(&bits(x)?)))
    }

    fn log2_prob(&self, x: &str) -> PyResult<f64> {
        Ok(self.inner.log2_prob_f64(&bits(x)?))
    }

    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> String {
        let mut rng = stream_rng(seed, &format!("source/{}", self.spec));
        self.inner.sample(&mut rng, n).to_string()
    }

    fn __repr__(&self) -> String {
        format!("Source({:?})", self.spec)
    }
}

#[pyclass(frozen)]
struct Construction {
    inner: lzcore::theorem1::Construction,
}

#[pymethods]
impl Construction {
    /// Empirical mode when `folds` is given, faithful otherwise.
    #[new]
    #[pyo3(signature = (r="1/256", sigma=None, stages=None, h0=1024, folds=None, epsilon="1/10"))]
    fn new(
        r: &str,
        sigma: Option<&str>,
        stages: Option<usize>,
        h0: usize,
        folds: Option<Vec<usize>>,
        epsilon: &str,
    ) -> PyResult<Self> {
        let (mode, default_sigma, n) = match folds {
            Some(f) => {
                let n = f.len();
                (Mode::Empirical { h0, folds: f }, "log", n)
            }
            None => (Mode::Faithful, "id", 3),
        };
        let params = ConstructionParams {
            r: parse_rational(r).map_err(err)?,
            sigma: Sigma::parse(sigma.unwrap_or(default_sigma)).map_err(err)?,
            epsilon: parse_rational(epsilon).map_err(err)?,
            mode,
            stages: stages.unwrap_or(n),
            ..Default::default()
        };
        Ok(Construction {
            inner: lzcore::theorem1::Construction::build(params).map_err(err)?,
        })
    }

    /// Common column height of each stage.
    fn heights(&self) -> Vec<usize> {
        self.inner.stages().iter().map(|s| s.height).collect()
    }

    /// `lambda(Delta_s)` as a `num/den` string.
    fn delta_mass(&self, s: usize) -> PyResult<String> {
        Ok(format_rational(self.inner.stage(s).map_err(err)?.delta.support()))
    }

    /// Stage measure `P_s(x)` as a `num/den` string.
    fn stage_prob(&self, x: &str, s: usize) -> PyResult<String> {
        Ok(format_rational(&self.inner.stage_prob(&bits(x)?, s).map_err(err)?))
    }

    fn log2_prob(&self, x: &str) -> PyResult<f64> {
        self.inner.log2_prob(&bits(x)?).map_err(err)
    }

    #[pyo3(signature = (seed, n, stage=None))]
    fn sample(&self, seed: u64, n: usize, stage: Option<usize>) -> PyResult<String> {
        let s = stage.unwrap_or(self.inner.stages().len() - 1);
        Ok(self.inner.sample_sequence(seed, n, s).map_err(err)?.to_string())
    }

    /// `(alpha, trace_json)` after `steps` extension steps.
    #[pyo3(signature = (steps=None, seed=1, candidates=8))]
    fn alpha(&self, steps: Option<usize>, seed: u64, candidates: usize) -> PyResult<(String, String)> {
        let opts = AlphaOptions {
            seed,
            candidates,
            ..Default::default()
        };
        let steps = steps.unwrap_or(self.inner.stages().len() - 1);
        let t = build_alpha(&self.inner, steps, &opts).map_err(err)?;
        Ok((t.word.to_string(), t.to_json().to_string()))
    }

    fn summary(&self) -> String {
        self.inner.summary().to_string()
    }
}

/// Per-symbol mixture log-loss `-log2 rho(x) / l(x)`.
#[pyfunction]
#[pyo3(signature = (x, kmax=8))]
fn mixture_log_loss(x: &str, kmax: usize) -> PyResult<f64> {
    let x = bits(x)?;
    if x.is_empty() {
        return Err(PyValueError::new_err("empty input"));
    }
    let lp = MixtureMeasure::new(kmax).log2_prob(&x).map_err(err)?;
    Ok(-lp / x.len() as f64)
}

/// `[(n, -log2 P, code bits, deficiency)]` for a source spec, or the aligned
/// measure of a construction.
#[pyfunction]
#[pyo3(signature = (x, stride, measure=None, construction=None, code="lz78"))]
fn deficiency(
    x: &str,
    stride: usize,
    measure: Option<&str>,
    construction: Option<&Construction>,
    code: &str,
) -> PyResult<Vec<(usize, f64, u64, f64)>> {
    let x = bits(x)?;
    let coder = make_coder(code).map_err(err)?;
    let curve = match (measure, construction) {
        (Some(spec), None) => deficiency_curve(&x, &make_source(spec).map_err(err)?, &coder, stride),
        (None, Some(c)) => deficiency_curve(&x, &AlignedMeasure(&c.inner), &coder, stride),
        _ => return Err(PyValueError::new_err("give exactly one of measure and construction")),
    }
    .map_err(err)?;
    Ok(curve
        .points
        .iter()
        .map(|p| (p.n, p.neg_log_p, p.code_bits, p.deficiency))
        .collect())
}

/// Runs an experiment config (JSON text) and returns the summary as JSON text.
#[pyfunction]
fn run_experiment(config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(err)?;
    Ok(core_run_experiment(&cfg).map_err(err)?.to_string())
}

#[pymodule]
fn lzrobust(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Coder>()?;
    m.add_class::<Source>()?;
    m.add_class::<Construction>()?;
    m.add_function(wrap_pyfunction!(encode_int, m)?)?;
    m.add_function(wrap_pyfunction!(decode_int, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_log_loss, m)?)?;
    m.add_function(wrap_pyfunction!(deficiency, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
