//! Segmentation metrics and the grid-search harness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoenc::{AeModel, ArchKind};
use crate::error::{Error, Result};
use crate::extract::{ChangePointSet, Extractor};
use crate::pipeline::{self, PipelineConfig};
use crate::series::{ScalerKind, ScalerParams, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ScoreRegimes,
    PredictionLossMae,
}

/// How the count ratio weights the MAE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaeWeighting {
    /// `|1 - N_pred / N_GT| * MAE`.
    #[default]
    Literal,
    /// `(1 + |1 - N_pred / N_GT|) * MAE`.
    OnePlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub gt: usize,
    /// Nearest prediction, `None` when there are no predictions.
    pub pred: Option<usize>,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: Metric,
    pub value: f64,
    pub n: Option<usize>,
    pub n_gt: usize,
    pub n_pred: usize,
    pub pairing: Vec<Pairing>,
}

/// Nearest prediction for every ground-truth point; ties go to the earlier
/// prediction. Without predictions every point costs `penalty`.
fn pair(pred: &[usize], gt: &[usize], penalty: Option<usize>) -> Result<Vec<Pairing>> {
    gt.iter()
        .map(|&g| {
            if pred.is_empty() {
                let distance = penalty.ok_or_else(|| {
                    Error::InvalidArgument("no predictions and no series length for the penalty".into())
                })?;
                return Ok(Pairing { gt: g, pred: None, distance });
            }
            let at = pred.partition_point(|&p| p < g);
            let mut best = None::<usize>;
            for k in [at.wrapping_sub(1), at] {
                if let Some(&p) = pred.get(k) {
                    if best.is_none_or(|b| p.abs_diff(g) < b.abs_diff(g)) {
                        best = Some(p);
                    }
                }
            }
            let p = best.expect("non-empty");
            Ok(Pairing {
                gt: g,
                pred: Some(p),
                distance: p.abs_diff(g),
            })
        })
        .collect()
}

fn check_gt(gt: &ChangePointSet) -> Result<()> {
    if gt.is_empty() {
        return Err(Error::InvalidArgument("ground truth has no change-points".into()));
    }
    Ok(())
}

/// `sum |CP_pred - CP_actual| / (N_GT * n)` with nearest-prediction pairing.
pub fn score_regimes(pred: &ChangePointSet, gt: &ChangePointSet, n: usize) -> Result<EvalResult> {
    check_gt(gt)?;
    if n == 0 {
        return Err(Error::InvalidArgument("series length must be positive".into()));
    }
    let pairing = pair(&pred.indices, &gt.indices, Some(n))?;
    let total: usize = pairing.iter().map(|p| p.distance).sum();
    Ok(EvalResult {
        metric: Metric::ScoreRegimes,
        value: total as f64 / (gt.len() as f64 * n as f64),
        n: Some(n),
        n_gt: gt.len(),
        n_pred: pred.len(),
        pairing,
    })
}

/// Count-ratio weighted mean absolute error. `n` sets the penalty distance
/// for an empty prediction set.
pub fn prediction_loss_mae(
    pred: &ChangePointSet,
    gt: &ChangePointSet,
    n: Option<usize>,
    weighting: MaeWeighting,
) -> Result<EvalResult> {
    check_gt(gt)?;
    let pairing = pair(&pred.indices, &gt.indices, n)?;
    let mae = pairing.iter().map(|p| p.distance as f64).sum::<f64>() / gt.len() as f64;
    let ratio = (1.0 - pred.len() as f64 / gt.len() as f64).abs();
    let weight = match weighting {
        MaeWeighting::Literal => ratio,
        MaeWeighting::OnePlus => 1.0 + ratio,
    };
    Ok(EvalResult {
        metric: Metric::PredictionLossMae,
        value: weight * mae,
        n,
        n_gt: gt.len(),
        n_pred: pred.len(),
        pairing,
    })
}

/// Mean gap between consecutive change-points, pooled over all series and
/// rounded to the nearest integer.
pub fn local_window_from_train(sets: &[ChangePointSet]) -> Result<usize> {
    let gaps: Vec<usize> = sets
        .iter()
        .flat_map(|s| s.indices.windows(2).map(|w| w[1] - w[0]))
        .collect();
    if gaps.is_empty() {
        return Err(Error::InvalidArgument(
            "no training series has two or more change-points".into(),
        ));
    }
    Ok((gaps.iter().sum::<usize>() as f64 / gaps.len() as f64).round() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Rea,
    Lrea,
    Ltea,
}

impl std::str::FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rea" => Ok(ExtractorKind::Rea),
            "lrea" => Ok(ExtractorKind::Lrea),
            "ltea" => Ok(ExtractorKind::Ltea),
            other => Err(Error::InvalidConfig(format!("unknown extractor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridAxes {
    pub scaler: Vec<ScalerKind>,
    pub nw: Vec<usize>,
    pub tc: Vec<Option<usize>>,
    pub step: Vec<Option<usize>>,
    pub arch: Vec<ArchKind>,
    pub extractor: Vec<ExtractorKind>,
    pub threshold: Vec<f64>,
}

impl Default for GridAxes {
    fn default() -> Self {
        Self {
            scaler: vec![ScalerKind::Standard],
            nw: vec![100],
            tc: vec![None],
            step: vec![None],
            arch: vec![ArchKind::FullyConnected],
            extractor: vec![ExtractorKind::Rea],
            threshold: vec![-1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub axes: GridAxes,
    /// Evaluate at most this many configurations (in expansion order).
    pub budget: Option<usize>,
    pub seed: u64,
}

/// Canonical key of a configuration: its JSON encoding.
pub fn config_key(cfg: &PipelineConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

/// Cartesian product of the axes over `base`, in axis order, without
/// duplicates (thresholds only matter to LTEA). `local_window` feeds the
/// rolling extractors; `k` is a placeholder replaced per series.
pub fn expand_grid(base: &PipelineConfig, spec: &GridSpec, local_window: usize) -> Result<Vec<PipelineConfig>> {
    let a = &spec.axes;
    if a.scaler.is_empty()
        || a.nw.is_empty()
        || a.tc.is_empty()
        || a.step.is_empty()
        || a.arch.is_empty()
        || a.extractor.is_empty()
        || a.threshold.is_empty()
    {
        return Err(Error::InvalidArgument("grid has an empty axis".into()));
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &scaler in &a.scaler {
        for &nw in &a.nw {
            for &tc in &a.tc {
                for &step in &a.step {
                    for &arch in &a.arch {
                        for &ex in &a.extractor {
                            for &threshold in &a.threshold {
                                let extractor = match ex {
                                    ExtractorKind::Rea => Extractor::Rea { k: 1 },
                                    ExtractorKind::Lrea => Extractor::Lrea { k: 1, local_window },
                                    ExtractorKind::Ltea => Extractor::Ltea {
                                        local_window,
                                        threshold,
                                    },
                                };
                                let cfg = PipelineConfig {
                                    scaler,
                                    nw,
                                    tc,
                                    step,
                                    arch,
                                    extractor,
                                    seed: spec.seed,
                                    ..base.clone()
                                };
                                if seen.insert(config_key(&cfg)) {
                                    out.push(cfg);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if let Some(b) = spec.budget {
        out.truncate(b.max(1));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub rank: usize,
    pub config: PipelineConfig,
    pub metric: Metric,
    /// Mean metric over the split; `+inf` when the run failed.
    pub value: f64,
    pub error: Option<String>,
}

/// Evaluates every configuration (in parallel) and ranks them ascending by
/// value, ties broken by the configuration key.
pub fn grid_search<F>(configs: &[PipelineConfig], evaluate: F) -> Result<Vec<GridRecord>>
where
    F: Fn(&PipelineConfig) -> Result<f64> + Sync,
{
    if configs.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let mut records: Vec<(String, GridRecord)> = configs
        .par_iter()
        .map(|cfg| {
            let (value, error) = match evaluate(cfg) {
                Ok(v) if !v.is_nan() => (v, None),
                Ok(_) => (f64::INFINITY, Some("metric is NaN".to_string())),
                Err(e) => (f64::INFINITY, Some(e.to_string())),
            };
            (
                config_key(cfg),
                GridRecord {
                    rank: 0,
                    config: cfg.clone(),
                    metric: metric_for(cfg),
                    value,
                    error,
                },
            )
        })
        .collect();
    records.sort_by(|a, b| a.1.value.total_cmp(&b.1.value).then_with(|| a.0.cmp(&b.0)));
    Ok(records
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut r))| {
            r.rank = i + 1;
            r
        })
        .collect())
}

/// Offline extractors are scored with ScoreRegimes, LTEA with the
/// prediction loss.
pub fn metric_for(cfg: &PipelineConfig) -> Metric {
    match cfg.extractor {
        Extractor::Ltea { .. } => Metric::PredictionLossMae,
        _ => Metric::ScoreRegimes,
    }
}

/// Sets the change-point count of REA/LREA to the known ground-truth count.
pub fn with_known_k(cfg: &PipelineConfig, k: usize) -> PipelineConfig {
    let k = k.max(1);
    let extractor = match cfg.extractor {
        Extractor::Rea { .. } => Extractor::Rea { k },
        Extractor::Lrea { local_window, .. } => Extractor::Lrea { k, local_window },
        e => e,
    };
    PipelineConfig {
        extractor,
        ..cfg.clone()
    }
}

/// Runs `cfg` on one labeled series and scores it with the metric that
/// matches its extractor.
pub fn evaluate_series(
    ts: &TimeSeries,
    gt: &ChangePointSet,
    cfg: &PipelineConfig,
    model: Option<&AeModel>,
    scaler: Option<&ScalerParams>,
    weighting: MaeWeighting,
) -> Result<EvalResult> {
    let cfg = with_known_k(cfg, gt.len());
    let seg = pipeline::run(ts, &cfg, model, scaler)?;
    match metric_for(&cfg) {
        Metric::ScoreRegimes => score_regimes(&seg.change_points, gt, ts.len()),
        Metric::PredictionLossMae => prediction_loss_mae(&seg.change_points, gt, Some(ts.len()), weighting),
    }
}

/// Mean metric over labeled series.
pub fn evaluate_split(
    data: &[(&TimeSeries, &ChangePointSet)],
    cfg: &PipelineConfig,
    model: Option<&AeModel>,
    scaler: Option<&ScalerParams>,
    weighting: MaeWeighting,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("validation split is empty".into()));
    }
    let mut sum = 0.0;
    for (ts, gt) in data {
        sum += evaluate_series(ts, gt, cfg, model, scaler, weighting)?.value;
    }
    Ok(sum / data.len() as f64)
}
