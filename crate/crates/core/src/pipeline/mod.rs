//! End-to-end segmenters from a raw series to change-points.

mod offline;
mod online;

use serde::{Deserialize, Serialize};

use crate::autoenc::{AeModel, ArchKind};
use crate::error::{Error, Result};
use crate::extract::{ChangePointSet, Extractor, DEFAULT_THRESHOLD};
use crate::series::{apply_scaler, fit_scaler_named, ScalerKind, ScalerParams, TimeSeries};

pub use offline::{multichannel_cac, run_floss, run_fluss, run_lfmd, run_lsuss};
pub use online::{Emission, FlossStream, LsussOnline, OnlineCac, StreamOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fluss,
    Floss,
    Lfmd,
    Lsuss,
    LsussOnline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fluss => "fluss",
            Algorithm::Floss => "floss",
            Algorithm::Lfmd => "lfmd",
            Algorithm::Lsuss => "lsuss",
            Algorithm::LsussOnline => "lsuss_online",
        }
    }

    /// Whether the algorithm encodes windows with an autoencoder.
    pub fn needs_model(self) -> bool {
        matches!(self, Algorithm::Lfmd | Algorithm::Lsuss | Algorithm::LsussOnline)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fluss" => Ok(Algorithm::Fluss),
            "floss" => Ok(Algorithm::Floss),
            "lfmd" => Ok(Algorithm::Lfmd),
            "lsuss" | "ls_uss" => Ok(Algorithm::Lsuss),
            "lsuss_online" | "ls_uss_online" => Ok(Algorithm::LsussOnline),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    pub nw: usize,
    pub tc: Option<usize>,
    /// LFMD window step; defaults to `nw`.
    pub step: Option<usize>,
    pub scaler: ScalerKind,
    pub arch: ArchKind,
    pub extractor: Extractor,
    pub epsilon_batch: usize,
    /// Batch length for the memory-bounded latent profile.
    pub t_lim: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Lsuss,
            nw: 100,
            tc: None,
            step: None,
            scaler: ScalerKind::Standard,
            arch: ArchKind::FullyConnected,
            extractor: Extractor::Ltea {
                local_window: 1000,
                threshold: DEFAULT_THRESHOLD,
            },
            epsilon_batch: 1,
            t_lim: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn step(&self) -> usize {
        self.step.unwrap_or(self.nw)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nw < 4 {
            return Err(Error::InvalidConfig(format!("window length nw must be at least 4, got {}", self.nw)));
        }
        if self.step == Some(0) {
            return Err(Error::InvalidConfig("step must be at least 1".into()));
        }
        if self.epsilon_batch == 0 {
            return Err(Error::InvalidConfig("epsilon batch must be at least 1".into()));
        }
        match self.tc {
            Some(0) => return Err(Error::InvalidConfig("tc must be at least 1".into())),
            None if matches!(
                self.algorithm,
                Algorithm::Floss | Algorithm::Lsuss | Algorithm::LsussOnline
            ) =>
            {
                return Err(Error::InvalidConfig(format!(
                    "{} requires a temporal constraint (tc)",
                    self.algorithm.name()
                )))
            }
            _ => {}
        }
        if let (Some(t_lim), Some(tc)) = (self.t_lim, self.tc) {
            if t_lim <= 2 * tc {
                return Err(Error::InvalidConfig(format!("t_lim {t_lim} must exceed 2 * tc = {}", 2 * tc)));
            }
        }
        if self.algorithm.needs_model() && self.arch == ArchKind::Convolutional && !self.nw.is_multiple_of(4) {
            return Err(Error::InvalidArch(format!(
                "convolutional autoencoder needs nw mod 4 == 0, got nw = {}",
                self.nw
            )));
        }
        match self.extractor {
            Extractor::Rea { k } | Extractor::Lrea { k, .. } if k == 0 => {
                return Err(Error::InvalidConfig("k must be at least 1".into()))
            }
            Extractor::Lrea { local_window, .. } | Extractor::Ltea { local_window, .. } if local_window < 2 => {
                return Err(Error::InvalidConfig("local window must be at least 2".into()))
            }
            Extractor::Ltea { threshold, .. } if threshold.is_nan() => {
                return Err(Error::InvalidConfig("threshold is NaN".into()))
            }
            _ => {}
        }
        if matches!(self.algorithm, Algorithm::LsussOnline) && !matches!(self.extractor, Extractor::Ltea { .. }) {
            return Err(Error::InvalidConfig("lsuss_online emits change-points with LTEA only".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Cac,
    LatentDistance,
}

/// Result of an offline run: the curve and its change-points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub curve: Vec<f64>,
    pub curve_kind: CurveKind,
    pub change_points: ChangePointSet,
}

/// Applies `fitted` when given, otherwise fits the configured scaler on
/// `ts` itself.
pub fn prepare(ts: &TimeSeries, kind: ScalerKind, fitted: Option<&ScalerParams>) -> Result<TimeSeries> {
    match fitted {
        Some(p) => apply_scaler(p, ts),
        None => apply_scaler(&fit_scaler_named(kind, ts, "self"), ts),
    }
}

pub(crate) fn require_model<'a>(cfg: &PipelineConfig, ts: &TimeSeries, model: Option<&'a AeModel>) -> Result<&'a AeModel> {
    let model = model.ok_or_else(|| {
        Error::InvalidConfig(format!("{} needs a trained autoencoder", cfg.algorithm.name()))
    })?;
    if model.arch.nc != ts.nc() || model.arch.nw != cfg.nw {
        return Err(Error::Shape(format!(
            "model built for {} channels x {} samples, run has {} channels x nw {}",
            model.arch.nc,
            model.arch.nw,
            ts.nc(),
            cfg.nw
        )));
    }
    Ok(model)
}

/// Runs any configured algorithm over a whole series. The online variant
/// replays the series as a stream and reports its final emissions.
pub fn run(
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    model: Option<&AeModel>,
    scaler: Option<&ScalerParams>,
) -> Result<Segmentation> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Fluss => run_fluss(ts, cfg),
        Algorithm::Floss => run_floss(ts, cfg),
        Algorithm::Lfmd => run_lfmd(ts, cfg, require_model(cfg, ts, model)?, scaler),
        Algorithm::Lsuss => run_lsuss(ts, cfg, require_model(cfg, ts, model)?, scaler),
        Algorithm::LsussOnline => {
            let model = require_model(cfg, ts, model)?;
            let mut engine = LsussOnline::new(cfg, model.clone(), scaler.cloned())?;
            engine.push_series(ts)?;
            let out = engine.finish()?;
            Ok(Segmentation {
                curve: out.cac,
                curve_kind: CurveKind::Cac,
                change_points: out.change_points,
            })
        }
    }
}
