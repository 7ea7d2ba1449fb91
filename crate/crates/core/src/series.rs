//! Multichannel time series, sliding windows and per-channel scalers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to every scaler denominator.
pub const SCALE_EPS: f64 = 1e-12;

/// An `nc`-channel series of length `n`, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    data: Vec<f64>,
    nc: usize,
    n: usize,
    sample_rate_hz: Option<f64>,
    channel_names: Option<Vec<String>>,
}

impl TimeSeries {
    /// Builds a series from one vector per channel, rejecting NaN/Inf.
    pub fn from_channels(channels: Vec<Vec<f64>>) -> Result<Self> {
        let nc = channels.len();
        if nc == 0 {
            return Err(Error::Shape("a series needs at least one channel".into()));
        }
        let n = channels[0].len();
        if n == 0 {
            return Err(Error::Shape("a series needs at least one sample".into()));
        }
        let mut data = Vec::with_capacity(nc * n);
        for (c, ch) in channels.into_iter().enumerate() {
            if ch.len() != n {
                return Err(Error::Shape(format!(
                    "channel {c} has {} samples, channel 0 has {n}",
                    ch.len()
                )));
            }
            data.extend(ch);
        }
        Self::from_channel_major(data, nc)
    }

    /// Builds a series from a flat channel-major buffer of `nc * n` samples.
    pub fn from_channel_major(data: Vec<f64>, nc: usize) -> Result<Self> {
        if nc == 0 || data.is_empty() || !data.len().is_multiple_of(nc) {
            return Err(Error::Shape(format!(
                "{} samples cannot be split into {nc} non-empty channels",
                data.len()
            )));
        }
        let n = data.len() / nc;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: pos / n,
                sample: pos % n,
            });
        }
        Ok(Self {
            data,
            nc,
            n,
            sample_rate_hz: None,
            channel_names: None,
        })
    }

    /// Single-channel convenience constructor.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::from_channel_major(values, 1)
    }

    pub fn with_sample_rate(mut self, hz: f64) -> Result<Self> {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(Error::InvalidArgument(format!("sample rate {hz} must be positive")));
        }
        self.sample_rate_hz = Some(hz);
        Ok(self)
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.nc {
            return Err(Error::Shape(format!(
                "{} channel names for {} channels",
                names.len(),
                self.nc
            )));
        }
        self.channel_names = Some(names);
        Ok(self)
    }

    pub fn nc(&self) -> usize {
        self.nc
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample_rate_hz(&self) -> Option<f64> {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> Option<&[String]> {
        self.channel_names.as_deref()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn channels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_channel_major(&self) -> &[f64] {
        &self.data
    }

    pub fn sample(&self, c: usize, t: usize) -> f64 {
        self.data[c * self.n + t]
    }

    /// Samples `[start, end)` of every channel as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {end}) of a length-{} series",
                self.n
            )));
        }
        let data = self
            .channels()
            .flat_map(|ch| ch[start..end].iter().copied())
            .collect();
        let mut out = Self::from_channel_major(data, self.nc)?;
        out.sample_rate_hz = self.sample_rate_hz;
        out.channel_names = self.channel_names.clone();
        Ok(out)
    }

    /// Appends samples of another series with the same channel count.
    pub fn concat(parts: &[TimeSeries]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let nc = first.nc;
        if let Some(bad) = parts.iter().find(|p| p.nc != nc) {
            return Err(Error::Shape(format!(
                "cannot concatenate {}-channel and {nc}-channel series",
                bad.nc
            )));
        }
        let channels = (0..nc)
            .map(|c| parts.iter().flat_map(|p| p.channel(c).iter().copied()).collect())
            .collect();
        Self::from_channels(channels)
    }
}

/// All windows of length `m` taken every `step` samples from a series.
///
/// Windows are views; [`SubsequenceSet::copy_window`] materializes one in
/// channel-major `nc x m` layout.
#[derive(Debug, Clone, Copy)]
pub struct SubsequenceSet<'a> {
    source: &'a TimeSeries,
    m: usize,
    step: usize,
}

impl<'a> SubsequenceSet<'a> {
    pub fn source(&self) -> &'a TimeSeries {
        self.source
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        (self.source.len() - self.m) / self.step + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First sample covered by window `i`.
    pub fn start(&self, i: usize) -> usize {
        i * self.step
    }

    /// Channel `c` of window `i`.
    pub fn window_channel(&self, i: usize, c: usize) -> &'a [f64] {
        let s = self.start(i);
        &self.source.channel(c)[s..s + self.m]
    }

    /// Writes window `i` channel-major into `out` (length `nc * m`).
    pub fn copy_window(&self, i: usize, out: &mut [f64]) {
        for c in 0..self.source.nc() {
            out[c * self.m..(c + 1) * self.m].copy_from_slice(self.window_channel(i, c));
        }
    }

    pub fn window(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.source.nc() * self.m];
        self.copy_window(i, &mut out);
        out
    }

    /// Every window flattened into one `len * nc * m` buffer.
    pub fn to_flat(&self) -> Vec<f64> {
        let d = self.source.nc() * self.m;
        let mut out = vec![0.0; self.len() * d];
        for (i, chunk) in out.chunks_exact_mut(d).enumerate() {
            self.copy_window(i, chunk);
        }
        out
    }
}

pub fn window_all(ts: &TimeSeries, m: usize, step: usize) -> Result<SubsequenceSet<'_>> {
    if step < 1 {
        return Err(Error::InvalidArgument("window step must be at least 1".into()));
    }
    if m < 1 || m > ts.len() {
        return Err(Error::InvalidWindow(format!(
            "window length {m} for a series of length {}",
            ts.len()
        )));
    }
    Ok(SubsequenceSet { source: ts, m, step })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    None,
    Standard,
    MinMax,
    Robust,
}

impl ScalerKind {
    pub const ALL: [ScalerKind; 4] = [
        ScalerKind::None,
        ScalerKind::Standard,
        ScalerKind::MinMax,
        ScalerKind::Robust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalerKind::None => "none",
            ScalerKind::Standard => "standard",
            ScalerKind::MinMax => "minmax",
            ScalerKind::Robust => "robust",
        }
    }
}

impl std::str::FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ScalerKind::None),
            "standard" => Ok(ScalerKind::Standard),
            "minmax" | "min-max" | "min_max" => Ok(ScalerKind::MinMax),
            "robust" => Ok(ScalerKind::Robust),
            other => Err(Error::InvalidArgument(format!("unknown scaler '{other}'"))),
        }
    }
}

/// Per-channel affine statistics: `x -> (x - center) / max(spread, eps)`.
///
/// `center`/`spread` are mean/std (standard), min/(max-min) (minmax) or
/// median/IQR (robust).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub center: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub per_channel_stats: Vec<ChannelStats>,
    pub fitted_on: String,
}

impl ScalerParams {
    pub fn nc(&self) -> usize {
        self.per_channel_stats.len()
    }

    fn check(&self, ts: &TimeSeries) -> Result<()> {
        if self.kind != ScalerKind::None && self.nc() != ts.nc() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} channels applied to {} channels",
                self.nc(),
                ts.nc()
            )));
        }
        Ok(())
    }

    /// Scales one channel-major sample vector in place (streaming use).
    pub fn apply_sample(&self, sample: &mut [f64]) -> Result<()> {
        if self.kind == ScalerKind::None {
            return Ok(());
        }
        if sample.len() != self.nc() {
            return Err(Error::Shape(format!(
                "sample with {} channels for a {}-channel scaler",
                sample.len(),
                self.nc()
            )));
        }
        for (v, st) in sample.iter_mut().zip(&self.per_channel_stats) {
            *v = (*v - st.center) / st.spread.max(SCALE_EPS);
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64], mu: f64) -> f64 {
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Percentile `q` in `[0, 1]` of sorted data with linear interpolation.
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn channel_stats(kind: ScalerKind, xs: &[f64]) -> ChannelStats {
    match kind {
        ScalerKind::None => ChannelStats {
            center: 0.0,
            spread: 1.0,
        },
        ScalerKind::Standard => {
            let mu = mean(xs);
            ChannelStats {
                center: mu,
                spread: population_std(xs, mu),
            }
        }
        ScalerKind::MinMax => {
            let (lo, hi) = xs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            ChannelStats {
                center: lo,
                spread: hi - lo,
            }
        }
        ScalerKind::Robust => {
            let mut sorted = xs.to_vec();
            sorted.sort_by(f64::total_cmp);
            ChannelStats {
                center: percentile_sorted(&sorted, 0.5),
                spread: percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25),
            }
        }
    }
}

pub fn fit_scaler(kind: ScalerKind, train: &TimeSeries) -> ScalerParams {
    fit_scaler_named(kind, train, "train")
}

pub fn fit_scaler_named(kind: ScalerKind, train: &TimeSeries, fitted_on: &str) -> ScalerParams {
    ScalerParams {
        kind,
        per_channel_stats: train.channels().map(|ch| channel_stats(kind, ch)).collect(),
        fitted_on: fitted_on.to_string(),
    }
}

pub fn apply_scaler(params: &ScalerParams, ts: &TimeSeries) -> Result<TimeSeries> {
    params.check(ts)?;
    if params.kind == ScalerKind::None {
        return Ok(ts.clone());
    }
    let mut out = ts.clone();
    let n = ts.len();
    for (c, st) in params.per_channel_stats.iter().enumerate() {
        let denom = st.spread.max(SCALE_EPS);
        for v in &mut out.data[c * n..(c + 1) * n] {
            *v = (*v - st.center) / denom;
        }
    }
    Ok(out)
}

pub fn inverse_scaler(params: &ScalerParams, ts: &TimeSeries) -> Result<TimeSeries> {
    params.check(ts)?;
    if params.kind == ScalerKind::None {
        return Ok(ts.clone());
    }
    let mut out = ts.clone();
    let n = ts.len();
    for (c, st) in params.per_channel_stats.iter().enumerate() {
        let denom = st.spread.max(SCALE_EPS);
        for v in &mut out.data[c * n..(c + 1) * n] {
            *v = *v * denom + st.center;
        }
    }
    Ok(out)
}
