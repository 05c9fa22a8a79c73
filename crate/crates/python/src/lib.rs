use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use spoofsense_core::classifier::{self, MlpModel};
use spoofsense_core::metrics::{self, CostModel, ScoreSet};
use spoofsense_core::perturbation::utterance_perturbation;
use spoofsense_core::trials::{self, Category};
use spoofsense_core::{audio, entropy, f0, pipeline, store};
use spoofsense_core::{AudioBuffer, Error, FeatureKind, FeatureMatrix, RunConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingFeatureFile(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for Result<T, Error> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Mono audio with samples in [-1, 1].
#[pyclass(
    name = "AudioBuffer",
    module = "spoofsense",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyAudio(AudioBuffer);

#[pymethods]
impl PyAudio {
    #[new]
    fn new(samples: Vec<f64>, sample_rate: u32) -> PyResult<Self> {
        AudioBuffer::new(samples, sample_rate).py().map(Self)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.0.samples().to_vec()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.0.sample_rate()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.0.duration_secs()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "AudioBuffer(len={}, sample_rate={})",
            self.0.len(),
            self.0.sample_rate()
        )
    }
}

#[pyclass(name = "Config", module = "spoofsense", frozen, skip_from_py_object)]
#[derive(Clone, Default)]
struct PyConfig(RunConfig);

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        RunConfig::from_toml(text).py().map(Self)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        RunConfig::load(path).py().map(Self)
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.0.sample_rate
    }
}

fn cfg_or_default(c: Option<&PyConfig>) -> RunConfig {
    c.map(|c| c.0.clone()).unwrap_or_default()
}

/// Frames-by-dims feature matrix tagged with its kind and utterance.
#[pyclass(
    name = "FeatureMatrix",
    module = "spoofsense",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyFeature(FeatureMatrix);

#[pymethods]
impl PyFeature {
    #[new]
    fn new(kind: &str, rows: Vec<Vec<f64>>, hop: f64, utt_id: String) -> PyResult<Self> {
        let kind: FeatureKind = kind.parse().py()?;
        let frames = rows.len();
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(PyValueError::new_err("rows have unequal lengths"));
        }
        FeatureMatrix::new(kind, rows.concat(), frames, dims, hop, utt_id)
            .py()
            .map(Self)
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind().to_string()
    }

    #[getter]
    fn utt_id(&self) -> String {
        self.0.utt_id.clone()
    }

    #[getter]
    fn hop(&self) -> f64 {
        self.0.hop
    }

    #[getter]
    fn num_frames(&self) -> usize {
        self.0.num_frames()
    }

    #[getter]
    fn dims(&self) -> usize {
        self.0.dims()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    fn mean_row(&self) -> Vec<f64> {
        self.0.mean_row()
    }

    fn __repr__(&self) -> String {
        format!(
            "FeatureMatrix(kind={}, utt_id={:?}, frames={}, dims={})",
            self.0.kind(),
            self.0.utt_id,
            self.0.num_frames(),
            self.0.dims()
        )
    }
}

/// Trained countermeasure network.
#[pyclass(name = "Model", module = "spoofsense", frozen)]
struct PyModel(MlpModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        classifier::load_model(path).py().map(Self)
    }

    #[getter]
    fn layer_dims(&self) -> Vec<usize> {
        self.0.layer_dims()
    }

    /// Bona fide log-odds for one utterance vector.
    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        classifier::score(&self.0, &x).py()
    }
}

#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<PyAudio> {
    audio::read_wav(path).py().map(PyAudio)
}

#[pyfunction]
fn write_wav(path: PathBuf, buf: &PyAudio) -> PyResult<()> {
    audio::write_wav_pcm16(path, &buf.0).py()
}

#[pyfunction]
fn resample(buf: &PyAudio, rate: u32) -> PyResult<PyAudio> {
    audio::resample(&buf.0, rate).py().map(PyAudio)
}

#[pyfunction]
#[pyo3(signature = (buf, kind, config=None))]
fn extract(buf: &PyAudio, kind: &str, config: Option<&PyConfig>) -> PyResult<PyFeature> {
    let kind: FeatureKind = kind.parse().py()?;
    pipeline::extract_feature(&buf.0, kind, &cfg_or_default(config))
        .py()
        .map(PyFeature)
}

/// Per-frame F0 in Hz, 0 for unvoiced frames.
#[pyfunction]
#[pyo3(signature = (buf, config=None))]
fn estimate_f0(buf: &PyAudio, config: Option<&PyConfig>) -> PyResult<Vec<f64>> {
    Ok(f0::estimate_f0(&buf.0, &cfg_or_default(config).f0())
        .py()?
        .values)
}

/// `(jitter, shimmer, num_cycles)`.
#[pyfunction]
#[pyo3(signature = (buf, config=None))]
fn perturbation(buf: &PyAudio, config: Option<&PyConfig>) -> PyResult<(f64, f64, usize)> {
    let p = utterance_perturbation(&buf.0, &cfg_or_default(config).perturbation()).py()?;
    Ok((p.jitter, p.shimmer, p.num_cycles))
}

#[pyfunction]
#[pyo3(signature = (buf, config=None))]
fn utterance_pse(buf: &PyAudio, config: Option<&PyConfig>) -> PyResult<f64> {
    entropy::utterance_pse(&buf.0, &cfg_or_default(config).pse()).py()
}

#[pyfunction]
fn power_spectral_entropy(seq: Vec<f64>) -> PyResult<f64> {
    entropy::power_spectral_entropy(&seq).py()
}

/// `(eer, threshold)` for positive and negative score lists.
#[pyfunction]
fn eer(positives: Vec<f64>, negatives: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = metrics::eer(&ScoreSet::from_split(&positives, &negatives).py()?).py()?;
    Ok((r.eer, r.threshold))
}

/// `(min_tdcf, threshold)`; the cost model is read from a TOML file.
#[pyfunction]
fn min_tdcf(bonafide: Vec<f64>, spoof: Vec<f64>, cost_config: PathBuf) -> PyResult<(f64, f64)> {
    let text =
        std::fs::read_to_string(&cost_config).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let cost = CostModel::from_toml(&text).py()?;
    let r = metrics::min_tdcf(&ScoreSet::from_split(&bonafide, &spoof).py()?, &cost).py()?;
    Ok((r.min_tdcf_norm, r.threshold))
}

#[pyfunction]
fn cosine_score(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    trials::cosine_score(&a, &b).py()
}

/// `(utt_a, utt_b, label, category)` tuples for one category.
#[pyfunction]
fn build_pairs(
    manifest: PathBuf,
    category: &str,
) -> PyResult<Vec<(String, String, String, String)>> {
    let m = trials::load_manifest(manifest).py()?;
    let cat: Category = category.to_ascii_uppercase().parse().py()?;
    Ok(trials::build_pairs(&m, cat)
        .py()?
        .pairs
        .into_iter()
        .map(|p| {
            (
                p.utt_a,
                p.utt_b,
                p.label.name().to_string(),
                p.category.to_string(),
            )
        })
        .collect())
}

#[pyfunction]
fn read_feature(path: PathBuf) -> PyResult<PyFeature> {
    store::read_feature(path).py().map(PyFeature)
}

#[pyfunction]
fn write_feature(path: PathBuf, m: &PyFeature) -> PyResult<()> {
    store::write_feature(path, &m.0).py()
}

#[pymodule]
fn spoofsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAudio>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyFeature>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_f0, m)?)?;
    m.add_function(wrap_pyfunction!(perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(utterance_pse, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectral_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(eer, m)?)?;
    m.add_function(wrap_pyfunction!(min_tdcf, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_score, m)?)?;
    m.add_function(wrap_pyfunction!(build_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(read_feature, m)?)?;
    m.add_function(wrap_pyfunction!(write_feature, m)?)?;
    Ok(())
}
