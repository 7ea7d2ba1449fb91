//! Change-point extraction from corrected arc curves and distance curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// REA/LTEA exclusion half-width in multiples of the window length.
pub const EXCLUSION_FACTOR: usize = 5;

/// Default LTEA threshold (one rolling standard deviation below the mean).
pub const DEFAULT_THRESHOLD: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpSource {
    Rea,
    Lrea,
    Ltea,
    LfmdMaxima,
    GroundTruth,
    /// Read back from a file; the producing extractor is unknown.
    Imported,
}

/// Sorted, duplicate-free change-point positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub indices: Vec<usize>,
    pub source: CpSource,
    pub k_requested: Option<usize>,
}

impl ChangePointSet {
    pub fn new(mut indices: Vec<usize>, source: CpSource, k_requested: Option<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self {
            indices,
            source,
            k_requested,
        }
    }

    pub fn ground_truth(indices: Vec<usize>) -> Self {
        Self::new(indices, CpSource::GroundTruth, None)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Whether every index lies in `[0, n)`.
    pub fn within(&self, n: usize) -> bool {
        self.indices.last().is_none_or(|&i| i < n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// `[i - w, i + w]`, for offline curves.
    Centered,
    /// `[i - 2w, i]`, using only values already seen.
    Trailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingScaleParams {
    pub local_window: usize,
    pub mode: ScaleMode,
    pub sigma_floor: f64,
}

impl RollingScaleParams {
    pub fn new(local_window: usize, mode: ScaleMode) -> Self {
        Self {
            local_window,
            mode,
            sigma_floor: 1e-12,
        }
    }

    pub fn centered(local_window: usize) -> Self {
        Self::new(local_window, ScaleMode::Centered)
    }

    pub fn trailing(local_window: usize) -> Self {
        Self::new(local_window, ScaleMode::Trailing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.local_window < 2 {
            return Err(Error::InvalidConfig(format!(
                "local window must be at least 2, got {}",
                self.local_window
            )));
        }
        if !(self.sigma_floor.is_finite() && self.sigma_floor > 0.0) {
            return Err(Error::InvalidConfig("sigma floor must be positive".into()));
        }
        Ok(())
    }

    /// Window `[lo, hi]` (inclusive, clipped) used for position `i`.
    pub fn window(&self, i: usize, len: usize) -> (usize, usize) {
        let w = self.local_window;
        match self.mode {
            ScaleMode::Centered => (i.saturating_sub(w), (i + w).min(len - 1)),
            ScaleMode::Trailing => (i.saturating_sub(2 * w), i),
        }
    }
}

/// Standardizes `values[i]` against the population mean and std of its
/// window; a window whose std does not exceed the floor maps to 0.
pub fn scale_point(values: &[f64], i: usize, params: &RollingScaleParams) -> f64 {
    let (lo, hi) = params.window(i, values.len());
    let win = &values[lo..=hi];
    let n = win.len() as f64;
    let mean = win.iter().sum::<f64>() / n;
    let var = win.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= params.sigma_floor {
        0.0
    } else {
        (values[i] - mean) / sd
    }
}

/// Rolling standardization of a whole curve.
pub fn scale_cac(cac: &[f64], params: &RollingScaleParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok((0..cac.len()).map(|i| scale_point(cac, i, params)).collect())
}

/// `k` successive global minima, each masking `|idx - loc| <= exclusion`.
/// Ties go to the smallest index.
pub fn masked_minima(curve: &[f64], k: usize, exclusion: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidConfig("the number of change-points k must be at least 1".into()));
    }
    let mut work = curve.to_vec();
    let mut found = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in work.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        let Some((loc, _)) = best else {
            return Err(Error::ExtractionExhausted {
                requested: k,
                found: found.len(),
            });
        };
        found.push(loc);
        let lo = loc.saturating_sub(exclusion);
        let hi = (loc + exclusion + 1).min(work.len());
        work[lo..hi].fill(f64::INFINITY);
    }
    Ok(found)
}

/// Regime extraction: the `k` lowest CAC valleys at least `5 nw` apart.
pub fn rea(cac: &[f64], k: usize, nw: usize) -> Result<ChangePointSet> {
    let found = masked_minima(cac, k, EXCLUSION_FACTOR * nw)?;
    Ok(ChangePointSet::new(found, CpSource::Rea, Some(k)))
}

/// REA on the rolling-standardized curve.
pub fn lrea(cac: &[f64], k: usize, nw: usize, params: &RollingScaleParams) -> Result<ChangePointSet> {
    let scaled = scale_cac(cac, params)?;
    let found = masked_minima(&scaled, k, EXCLUSION_FACTOR * nw)?;
    Ok(ChangePointSet::new(found, CpSource::Lrea, Some(k)))
}

/// Values above `threshold` become 1; valleys are maximal runs of values
/// other than 1. Returns `(argmin, min)` of every valley in time order.
pub fn threshold_valleys(scaled: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, f64)> = None;
    for (i, &v) in scaled.iter().enumerate() {
        let t = if v > threshold { 1.0 } else { v };
        if t == 1.0 {
            if let Some(c) = current.take() {
                out.push(c);
            }
        } else if current.is_none_or(|(_, b)| t < b) {
            current = Some((i, t));
        }
    }
    out.extend(current);
    out
}

/// Keeps candidates deepest-first, dropping any within `exclusion` of a
/// kept one.
fn exclude_by_depth(mut candidates: Vec<(usize, f64)>, exclusion: usize) -> Vec<usize> {
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<usize> = Vec::new();
    for (p, _) in candidates {
        if kept.iter().all(|&q| p.abs_diff(q) > exclusion) {
            kept.push(p);
        }
    }
    kept
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold.is_nan() {
        return Err(Error::InvalidConfig("LTEA threshold is NaN".into()));
    }
    Ok(())
}

/// Local threshold extraction; needs no change-point count.
pub fn ltea(cac: &[f64], params: &RollingScaleParams, threshold: f64, nw: usize) -> Result<ChangePointSet> {
    check_threshold(threshold)?;
    let scaled = scale_cac(cac, params)?;
    let valleys = threshold_valleys(&scaled, threshold);
    let kept = exclude_by_depth(valleys, EXCLUSION_FACTOR * nw);
    Ok(ChangePointSet::new(kept, CpSource::Ltea, None))
}

/// Which extractor to apply and its settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Extractor {
    Rea { k: usize },
    Lrea { k: usize, local_window: usize },
    Ltea { local_window: usize, threshold: f64 },
}

impl Extractor {
    pub fn name(&self) -> &'static str {
        match self {
            Extractor::Rea { .. } => "rea",
            Extractor::Lrea { .. } => "lrea",
            Extractor::Ltea { .. } => "ltea",
        }
    }

    pub fn apply(&self, cac: &[f64], nw: usize) -> Result<ChangePointSet> {
        match *self {
            Extractor::Rea { k } => rea(cac, k, nw),
            Extractor::Lrea { k, local_window } => lrea(cac, k, nw, &RollingScaleParams::centered(local_window)),
            Extractor::Ltea {
                local_window,
                threshold,
            } => ltea(cac, &RollingScaleParams::centered(local_window), threshold, nw),
        }
    }
}

/// Change-points from an LFMD adjacent-window distance curve.
///
/// Peaks of the curve become valleys of its negation; curve index `c` maps
/// to sample `c * step + m / 2`. Sample-unit exclusion and local window are
/// converted to curve units by dividing by `step`.
pub fn lfmd_extract(curve: &[f64], extractor: &Extractor, nw: usize, step: usize, m: usize) -> Result<ChangePointSet> {
    if step == 0 {
        return Err(Error::InvalidConfig("LFMD step must be at least 1".into()));
    }
    let neg: Vec<f64> = curve.iter().map(|v| -v).collect();
    let exclusion = (EXCLUSION_FACTOR * nw / step).max(1);
    let to_curve = |w: usize| (w / step).max(2);
    let picked = match *extractor {
        Extractor::Rea { k } => masked_minima(&neg, k, exclusion)?,
        Extractor::Lrea { k, local_window } => {
            let scaled = scale_cac(&neg, &RollingScaleParams::centered(to_curve(local_window)))?;
            masked_minima(&scaled, k, exclusion)?
        }
        Extractor::Ltea {
            local_window,
            threshold,
        } => {
            check_threshold(threshold)?;
            let scaled = scale_cac(&neg, &RollingScaleParams::centered(to_curve(local_window)))?;
            exclude_by_depth(threshold_valleys(&scaled, threshold), exclusion)
        }
    };
    let k = match *extractor {
        Extractor::Rea { k } | Extractor::Lrea { k, .. } => Some(k),
        Extractor::Ltea { .. } => None,
    };
    Ok(ChangePointSet::new(
        picked.into_iter().map(|c| c * step + m / 2).collect(),
        CpSource::LfmdMaxima,
        k,
    ))
}

/// Streaming LTEA over a curve whose prefix becomes final over time.
///
/// Scaling uses the trailing window, so a scaled value is final together
/// with its input. A valley is reported once it has closed (a later final
/// value lies above the threshold) and its argmin is at most the caller's
/// horizon. Exclusion is applied in time order against earlier emissions, so
/// nothing is ever retracted.
#[derive(Debug, Clone)]
pub struct OnlineLtea {
    params: RollingScaleParams,
    threshold: f64,
    exclusion: usize,
    processed: usize,
    current: Option<(usize, f64)>,
    closed: std::collections::VecDeque<usize>,
    emitted: Vec<usize>,
}

impl OnlineLtea {
    pub fn new(local_window: usize, threshold: f64, nw: usize) -> Result<Self> {
        check_threshold(threshold)?;
        let params = RollingScaleParams::trailing(local_window);
        params.validate()?;
        Ok(Self {
            params,
            threshold,
            exclusion: EXCLUSION_FACTOR * nw,
            processed: 0,
            current: None,
            closed: Default::default(),
            emitted: Vec::new(),
        })
    }

    pub fn emitted(&self) -> &[usize] {
        &self.emitted
    }

    /// Positions of `final_prefix` consumed so far.
    pub fn processed(&self) -> usize {
        self.processed
    }

    /// Consumes newly final values (`final_prefix` must extend the previous
    /// one) and returns change-points emitted by this call.
    pub fn advance(&mut self, final_prefix: &[f64], horizon: usize) -> Vec<usize> {
        for i in self.processed..final_prefix.len() {
            let v = scale_point(final_prefix, i, &self.params);
            let t = if v > self.threshold { 1.0 } else { v };
            if t == 1.0 {
                if let Some((p, _)) = self.current.take() {
                    self.closed.push_back(p);
                }
            } else if self.current.is_none_or(|(_, b)| t < b) {
                self.current = Some((i, t));
            }
        }
        self.processed = self.processed.max(final_prefix.len());
        let mut out = Vec::new();
        while let Some(&p) = self.closed.front() {
            if p > horizon {
                break;
            }
            self.closed.pop_front();
            if self.emitted.last().is_none_or(|&q| p - q > self.exclusion) {
                self.emitted.push(p);
                out.push(p);
            }
        }
        out
    }

    pub fn change_points(&self) -> ChangePointSet {
        ChangePointSet::new(self.emitted.clone(), CpSource::Ltea, None)
    }
}
