use rayon::prelude::*;

use super::{prepare, require_model, CurveKind, PipelineConfig, Segmentation};
use crate::arc::cac_from_profile;
use crate::autoenc::AeModel;
use crate::error::{Error, Result};
use crate::extract::lfmd_extract;
use crate::lsmp::{batched_collapse, collapse, encode_all, euclidean, latent_exclusion};
use crate::matprof::{banded_profile, stamp, Direction, ProfilePair};
use crate::series::{window_all, ScalerParams, TimeSeries};

fn check_length(ts: &TimeSeries, nw: usize) -> Result<()> {
    if ts.len() < 2 * nw {
        return Err(Error::InsufficientData(format!(
            "series of length {} is shorter than 2 * nw = {}",
            ts.len(),
            2 * nw
        )));
    }
    Ok(())
}

/// Element-wise mean of per-channel CACs, summed in channel order.
pub fn multichannel_cac(profiles: &[ProfilePair], edge_guard: usize, seed: u64) -> Result<Vec<f64>> {
    let mut sum: Option<Vec<f64>> = None;
    for p in profiles {
        let c = cac_from_profile(p, edge_guard, seed)?;
        match sum.as_mut() {
            None => sum = Some(c.values),
            Some(s) => s.iter_mut().zip(&c.values).for_each(|(a, b)| *a += b),
        }
    }
    let mut sum = sum.ok_or_else(|| Error::InvalidArgument("no channels".into()))?;
    let nc = profiles.len() as f64;
    sum.iter_mut().for_each(|v| *v /= nc);
    Ok(sum)
}

fn channel_segmentation(
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    profile: impl Fn(&[f64]) -> Result<ProfilePair> + Sync,
) -> Result<Segmentation> {
    check_length(ts, cfg.nw)?;
    let profiles: Vec<ProfilePair> = ts
        .channels()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|ch| profile(ch))
        .collect::<Result<_>>()?;
    let curve = multichannel_cac(&profiles, cfg.nw, cfg.seed)?;
    let change_points = cfg.extractor.apply(&curve, cfg.nw)?;
    Ok(Segmentation {
        curve,
        curve_kind: CurveKind::Cac,
        change_points,
    })
}

/// Per-channel bidirectional matrix profiles, CAC averaged over channels.
pub fn run_fluss(ts: &TimeSeries, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate()?;
    channel_segmentation(ts, cfg, |ch| stamp(ch, cfg.nw, cfg.tc, Direction::Bidirectional))
}

/// FLUSS with forward-only arcs. Uses the banded direct kernel shared with
/// the streaming segmenter.
pub fn run_floss(ts: &TimeSeries, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate()?;
    channel_segmentation(ts, cfg, |ch| banded_profile(ch, cfg.nw, cfg.tc, Direction::ForwardOnly))
}

/// Latent distance between adjacent windows taken every `step` samples.
pub fn run_lfmd(
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    model: &AeModel,
    scaler: Option<&ScalerParams>,
) -> Result<Segmentation> {
    cfg.validate()?;
    let model = require_model(cfg, ts, Some(model))?;
    let scaled = prepare(ts, cfg.scaler, scaler)?;
    let subs = window_all(&scaled, cfg.nw, cfg.step())?;
    if subs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} window(s); LFMD needs two", subs.len())));
    }
    let latents: Vec<Vec<f64>> = (0..subs.len())
        .into_par_iter()
        .map(|i| model.encode(&subs.window(i)))
        .collect::<Result<_>>()?;
    let curve: Vec<f64> = latents.windows(2).map(|w| euclidean(&w[0], &w[1])).collect();
    let change_points = lfmd_extract(&curve, &cfg.extractor, cfg.nw, cfg.step(), cfg.nw)?;
    Ok(Segmentation {
        curve,
        curve_kind: CurveKind::LatentDistance,
        change_points,
    })
}

/// Latent-space matrix profile, tc-constrained CAC, then the extractor.
pub fn run_lsuss(
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    model: &AeModel,
    scaler: Option<&ScalerParams>,
) -> Result<Segmentation> {
    cfg.validate()?;
    let model = require_model(cfg, ts, Some(model))?;
    let tc = cfg.tc.expect("validated");
    let scaled = prepare(ts, cfg.scaler, scaler)?;
    let subs = window_all(&scaled, cfg.nw, 1)?;
    let set = encode_all(model, &subs)?;
    let excl = latent_exclusion(&set);
    let profile = match cfg.t_lim {
        Some(t_lim) => batched_collapse(&set, t_lim, tc, Direction::Bidirectional, excl)?.profile,
        None => collapse(&set, Some(tc), Direction::Bidirectional, excl)?,
    };
    let curve = cac_from_profile(&profile, cfg.nw, cfg.seed)?.values;
    let change_points = cfg.extractor.apply(&curve, cfg.nw)?;
    Ok(Segmentation {
        curve,
        curve_kind: CurveKind::Cac,
        change_points,
    })
}
