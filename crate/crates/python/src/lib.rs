//! Python module `lsuss`: series, autoencoders, offline and streaming
//! segmentation, extractors and metrics.

use std::path::PathBuf;

use lsuss_core::arc::cac_from_profile;
use lsuss_core::autoenc::{self, build_arch, AeModel, ArchKind, FlatWindows, TrainConfig};
use lsuss_core::eval::{self, ExtractorKind, MaeWeighting};
use lsuss_core::extract::{ChangePointSet, CpSource, Extractor, DEFAULT_THRESHOLD};
use lsuss_core::io::{self, DelimitedOptions, SynthSpec};
use lsuss_core::matprof::{self, Direction};
use lsuss_core::pipeline::{self, Algorithm, Emission, FlossStream, LsussOnline};
use lsuss_core::series::{apply_scaler, fit_scaler, window_all, ScalerKind, ScalerParams, TimeSeries};
use lsuss_core::{Error, ErrorClass};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match (&e, e.class()) {
        (Error::Io { .. } | Error::MissingFile(_), _) => PyIOError::new_err(e.to_string()),
        (_, ErrorClass::Internal) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn scaler_path(model: &std::path::Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".scaler.json");
    PathBuf::from(s)
}

fn direction(forward_only: bool) -> Direction {
    if forward_only {
        Direction::ForwardOnly
    } else {
        Direction::Bidirectional
    }
}

/// Multichannel series; `channels[c][t]` is sample `t` of channel `c`.
#[pyclass(name = "TimeSeries", module = "lsuss", from_py_object)]
#[derive(Clone)]
struct PyTimeSeries {
    inner: TimeSeries,
}

#[pymethods]
impl PyTimeSeries {
    #[new]
    #[pyo3(signature = (channels, sample_rate_hz=None, channel_names=None))]
    fn new(channels: Vec<Vec<f64>>, sample_rate_hz: Option<f64>, channel_names: Option<Vec<String>>) -> PyResult<Self> {
        let mut ts = TimeSeries::from_channels(channels).map_err(to_py)?;
        if let Some(hz) = sample_rate_hz {
            ts = ts.with_sample_rate(hz).map_err(to_py)?;
        }
        if let Some(names) = channel_names {
            ts = ts.with_channel_names(names).map_err(to_py)?;
        }
        Ok(Self { inner: ts })
    }

    #[getter]
    fn nc(&self) -> usize {
        self.inner.nc()
    }

    #[getter]
    fn sample_rate_hz(&self) -> Option<f64> {
        self.inner.sample_rate_hz()
    }

    #[getter]
    fn channel_names(&self) -> Option<Vec<String>> {
        self.inner.channel_names().map(<[String]>::to_vec)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn channel(&self, c: usize) -> PyResult<Vec<f64>> {
        if c >= self.inner.nc() {
            return Err(PyValueError::new_err(format!("channel {c} out of range")));
        }
        Ok(self.inner.channel(c).to_vec())
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.channels().map(<[f64]>::to_vec).collect()
    }

    fn slice(&self, start: usize, end: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.slice(start, end).map_err(to_py)?,
        })
    }

    /// Scales with statistics fitted on this series.
    fn scaled(&self, kind: &str) -> PyResult<Self> {
        let p = fit_scaler(parse(kind)?, &self.inner);
        Ok(Self {
            inner: apply_scaler(&p, &self.inner).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("TimeSeries(nc={}, len={})", self.inner.nc(), self.inner.len())
    }
}

/// Reads a delimited series and its `.cps` labels.
#[pyfunction]
fn load_series(path: PathBuf) -> PyResult<(PyTimeSeries, Vec<usize>)> {
    let ls = io::load_delimited(&path, &DelimitedOptions::default()).map_err(to_py)?;
    Ok((PyTimeSeries { inner: ls.series }, ls.change_points.indices))
}

#[pyfunction]
fn save_series(path: PathBuf, series: &PyTimeSeries, change_points: Option<Vec<usize>>) -> PyResult<()> {
    io::write_delimited(&path, &series.inner).map_err(to_py)?;
    if let Some(cps) = change_points {
        io::write_labels(&io::labels_path(&path), &ChangePointSet::ground_truth(cps)).map_err(to_py)?;
    }
    Ok(())
}

/// Synthetic series from a preset (`two_regime`, `redundant_suite`) or a
/// SynthSpec JSON string.
#[pyfunction]
#[pyo3(signature = (preset="two_regime", seed=0, spec_json=None))]
fn synth(preset: &str, seed: u64, spec_json: Option<&str>) -> PyResult<(PyTimeSeries, Vec<usize>)> {
    let spec = match (spec_json, preset) {
        (Some(j), _) => SynthSpec {
            seed,
            ..serde_json::from_str(j).map_err(|e| PyValueError::new_err(e.to_string()))?
        },
        (None, "two_regime") => SynthSpec::two_regime(seed),
        (None, "redundant_suite") => SynthSpec::redundant_suite(seed),
        (None, other) => return Err(PyValueError::new_err(format!("unknown preset '{other}'"))),
    };
    let ls = io::generate_synthetic(&spec).map_err(to_py)?;
    Ok((PyTimeSeries { inner: ls.series }, ls.change_points.indices))
}

/// Z-normalized matrix profile of a univariate series: `(profile, index)`.
#[pyfunction]
#[pyo3(signature = (values, m, tc=None, forward_only=false))]
fn stamp(values: Vec<f64>, m: usize, tc: Option<usize>, forward_only: bool) -> PyResult<(Vec<f64>, Vec<i64>)> {
    let p = matprof::stamp(&values, m, tc, direction(forward_only)).map_err(to_py)?;
    Ok((p.profile, p.index))
}

/// Corrected arc curve of a univariate series.
#[pyfunction]
#[pyo3(signature = (values, m, tc=None, forward_only=false, seed=0))]
fn cac(values: Vec<f64>, m: usize, tc: Option<usize>, forward_only: bool, seed: u64) -> PyResult<Vec<f64>> {
    let p = matprof::stamp(&values, m, tc, direction(forward_only)).map_err(to_py)?;
    Ok(cac_from_profile(&p, m, seed).map_err(to_py)?.values)
}

#[pyfunction]
fn rea(curve: Vec<f64>, k: usize, nw: usize) -> PyResult<Vec<usize>> {
    Ok(Extractor::Rea { k }.apply(&curve, nw).map_err(to_py)?.indices)
}

#[pyfunction]
fn lrea(curve: Vec<f64>, k: usize, nw: usize, local_window: usize) -> PyResult<Vec<usize>> {
    Ok(Extractor::Lrea { k, local_window }.apply(&curve, nw).map_err(to_py)?.indices)
}

#[pyfunction]
#[pyo3(signature = (curve, nw, local_window, threshold=DEFAULT_THRESHOLD))]
fn ltea(curve: Vec<f64>, nw: usize, local_window: usize, threshold: f64) -> PyResult<Vec<usize>> {
    Ok(Extractor::Ltea { local_window, threshold }.apply(&curve, nw).map_err(to_py)?.indices)
}

#[pyfunction]
fn score_regimes(pred: Vec<usize>, gt: Vec<usize>, n: usize) -> PyResult<f64> {
    let pred = ChangePointSet::new(pred, CpSource::Imported, None);
    Ok(eval::score_regimes(&pred, &ChangePointSet::ground_truth(gt), n).map_err(to_py)?.value)
}

/// `weighting` is `literal` or `one_plus`.
#[pyfunction]
#[pyo3(signature = (pred, gt, n=None, weighting="literal"))]
fn prediction_loss_mae(pred: Vec<usize>, gt: Vec<usize>, n: Option<usize>, weighting: &str) -> PyResult<f64> {
    let w = match weighting {
        "literal" => MaeWeighting::Literal,
        "one_plus" => MaeWeighting::OnePlus,
        other => return Err(PyValueError::new_err(format!("unknown weighting '{other}'"))),
    };
    let pred = ChangePointSet::new(pred, CpSource::Imported, None);
    Ok(eval::prediction_loss_mae(&pred, &ChangePointSet::ground_truth(gt), n, w)
        .map_err(to_py)?
        .value)
}

/// Tied-weight autoencoder over `nc x nw` windows.
#[pyclass(name = "Autoencoder", module = "lsuss", skip_from_py_object)]
#[derive(Clone)]
struct PyAutoencoder {
    model: AeModel,
    scaler: Option<ScalerParams>,
}

#[pymethods]
impl PyAutoencoder {
    /// `arch` is `fc` or `conv`.
    #[new]
    #[pyo3(signature = (arch, nc, nw, seed=0))]
    fn new(arch: &str, nc: usize, nw: usize, seed: u64) -> PyResult<Self> {
        let arch = build_arch(parse::<ArchKind>(arch)?, nc, nw).map_err(to_py)?;
        Ok(Self {
            model: AeModel::new(arch, seed),
            scaler: None,
        })
    }

    /// Reads a model file and its `.scaler.json` sidecar when present.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let model = autoenc::load(&path).map_err(to_py)?;
        let sidecar = scaler_path(&path);
        let scaler = if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| to_py(Error::io(&sidecar, e)))?;
            Some(serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { model, scaler })
    }

    /// Writes the model and, after training, the scaler sidecar.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        autoenc::save(&self.model, &path).map_err(to_py)?;
        if let Some(s) = &self.scaler {
            io::write_json(&scaler_path(&path), s).map_err(to_py)?;
        }
        Ok(())
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.model.arch.latent_dim
    }

    #[getter]
    fn nw(&self) -> usize {
        self.model.arch.nw
    }

    #[getter]
    fn nc(&self) -> usize {
        self.model.arch.nc
    }

    /// Fits a scaler on the concatenated series, then trains on their
    /// windows. Returns `(initial_val_loss, best_val_loss, epochs_run)`.
    #[pyo3(signature = (series, epochs=100, learning_rate=1e-3, batch_size=64, patience=10, scaler="standard", train_step=1, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        py: Python<'_>,
        series: Vec<PyTimeSeries>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        patience: usize,
        scaler: &str,
        train_step: usize,
        seed: u64,
    ) -> PyResult<(f64, f64, usize)> {
        let kind: ScalerKind = parse(scaler)?;
        let parts: Vec<TimeSeries> = series.into_iter().map(|s| s.inner).collect();
        let nw = self.model.arch.nw;
        let model = &mut self.model;
        let (params, report) = py
            .detach(|| -> Result<_, Error> {
                let params = fit_scaler(kind, &TimeSeries::concat(&parts)?);
                let mut flat = Vec::new();
                for p in &parts {
                    flat.extend(window_all(&apply_scaler(&params, p)?, nw, train_step)?.to_flat());
                }
                let cfg = TrainConfig {
                    learning_rate,
                    batch_size,
                    max_epochs: epochs,
                    patience,
                    seed,
                    ..TrainConfig::default()
                };
                let dim = model.arch.nc * nw;
                let report = autoenc::train(model, &FlatWindows { data: &flat, dim }, &cfg)?;
                Ok((params, report))
            })
            .map_err(to_py)?;
        self.scaler = Some(params);
        Ok((report.initial_val_loss, report.best_val_loss, report.epochs_run))
    }

    /// Latent vector of one channel-major window.
    fn encode(&self, window: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.encode(&window).map_err(to_py)
    }
}

/// Pipeline settings. Passing `k` selects REA (or LREA with
/// `extractor="lrea"`); otherwise LTEA is used.
#[pyclass(name = "PipelineConfig", module = "lsuss", skip_from_py_object)]
#[derive(Clone)]
struct PyPipelineConfig {
    inner: pipeline::PipelineConfig,
}

#[pymethods]
impl PyPipelineConfig {
    #[new]
    #[pyo3(signature = (algorithm="lsuss", nw=100, tc=None, k=None, extractor=None, local_window=None, threshold=DEFAULT_THRESHOLD, scaler="standard", arch="fc", step=None, epsilon_batch=1, t_lim=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        algorithm: &str,
        nw: usize,
        tc: Option<usize>,
        k: Option<usize>,
        extractor: Option<&str>,
        local_window: Option<usize>,
        threshold: f64,
        scaler: &str,
        arch: &str,
        step: Option<usize>,
        epsilon_batch: usize,
        t_lim: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let local_window = local_window.unwrap_or(10 * nw);
        let kind = match extractor {
            Some(e) => parse::<ExtractorKind>(e)?,
            None if k.is_some() => ExtractorKind::Rea,
            None => ExtractorKind::Ltea,
        };
        let need_k = || k.ok_or_else(|| PyValueError::new_err("REA and LREA need k"));
        let extractor = match kind {
            ExtractorKind::Rea => Extractor::Rea { k: need_k()? },
            ExtractorKind::Lrea => Extractor::Lrea {
                k: need_k()?,
                local_window,
            },
            ExtractorKind::Ltea => Extractor::Ltea { local_window, threshold },
        };
        let inner = pipeline::PipelineConfig {
            algorithm: parse::<Algorithm>(algorithm)?,
            nw,
            tc,
            step,
            scaler: parse(scaler)?,
            arch: parse(arch)?,
            extractor,
            epsilon_batch,
            t_lim,
            seed,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: pipeline::PipelineConfig =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    fn __repr__(&self) -> String {
        format!("PipelineConfig({})", self.to_json())
    }
}

/// Offline segmentation: `(change_points, curve)`.
#[pyfunction]
#[pyo3(signature = (series, config, model=None))]
fn segment(
    py: Python<'_>,
    series: &PyTimeSeries,
    config: &PyPipelineConfig,
    model: Option<&PyAutoencoder>,
) -> PyResult<(Vec<usize>, Vec<f64>)> {
    let (ts, cfg) = (&series.inner, &config.inner);
    let (m, s) = match model {
        Some(a) => (Some(&a.model), a.scaler.as_ref()),
        None => (None, None),
    };
    let seg = py.detach(|| pipeline::run(ts, cfg, m, s)).map_err(to_py)?;
    Ok((seg.change_points.indices, seg.curve))
}

type StreamResult = (Vec<(usize, usize)>, Vec<f64>);

#[allow(clippy::large_enum_variant)]
enum Engine {
    Latent(LsussOnline),
    Floss(FlossStream),
}

/// Streaming segmenter (`lsuss_online` with a model, or `floss`).
#[pyclass(name = "StreamSegmenter", module = "lsuss")]
struct PyStreamSegmenter {
    engine: Engine,
}

fn pairs(e: Vec<Emission>) -> Vec<(usize, usize)> {
    e.into_iter().map(|e| (e.index, e.emitted_at)).collect()
}

#[pymethods]
impl PyStreamSegmenter {
    #[new]
    #[pyo3(signature = (config, nc, model=None))]
    fn new(config: &PyPipelineConfig, nc: usize, model: Option<&PyAutoencoder>) -> PyResult<Self> {
        let cfg = &config.inner;
        let engine = match cfg.algorithm {
            Algorithm::LsussOnline => {
                let a = model.ok_or_else(|| PyValueError::new_err("lsuss_online needs a model"))?;
                Engine::Latent(LsussOnline::new(cfg, a.model.clone(), a.scaler.clone()).map_err(to_py)?)
            }
            Algorithm::Floss => Engine::Floss(FlossStream::new(cfg, nc).map_err(to_py)?),
            other => return Err(PyValueError::new_err(format!("{} cannot stream", other.name()))),
        };
        Ok(Self { engine })
    }

    /// Appends one sample (one value per channel); returns new
    /// `(index, emitted_at)` pairs.
    fn push(&mut self, sample: Vec<f64>) -> PyResult<Vec<(usize, usize)>> {
        let e = match &mut self.engine {
            Engine::Latent(s) => s.push(&sample),
            Engine::Floss(s) => s.push(&sample),
        };
        Ok(pairs(e.map_err(to_py)?))
    }

    fn push_series(&mut self, series: &PyTimeSeries) -> PyResult<Vec<(usize, usize)>> {
        let e = match &mut self.engine {
            Engine::Latent(s) => s.push_series(&series.inner),
            Engine::Floss(s) => s.push_series(&series.inner),
        };
        Ok(pairs(e.map_err(to_py)?))
    }

    /// Ends the stream; returns every emission and the finalized CAC.
    fn finish(&mut self) -> PyResult<StreamResult> {
        let out = match &mut self.engine {
            Engine::Latent(s) => s.finish(),
            Engine::Floss(s) => s.finish(),
        }
        .map_err(to_py)?;
        Ok((pairs(out.emissions), out.cac))
    }

    fn emissions(&self) -> Vec<(usize, usize)> {
        let e = match &self.engine {
            Engine::Latent(s) => s.emissions(),
            Engine::Floss(s) => s.emissions(),
        };
        pairs(e.to_vec())
    }
}

#[pymodule]
fn lsuss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyAutoencoder>()?;
    m.add_class::<PyPipelineConfig>()?;
    m.add_class::<PyStreamSegmenter>()?;
    m.add_function(wrap_pyfunction!(load_series, m)?)?;
    m.add_function(wrap_pyfunction!(save_series, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(stamp, m)?)?;
    m.add_function(wrap_pyfunction!(cac, m)?)?;
    m.add_function(wrap_pyfunction!(rea, m)?)?;
    m.add_function(wrap_pyfunction!(lrea, m)?)?;
    m.add_function(wrap_pyfunction!(ltea, m)?)?;
    m.add_function(wrap_pyfunction!(score_regimes, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_loss_mae, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    Ok(())
}
