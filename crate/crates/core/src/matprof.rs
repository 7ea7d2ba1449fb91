//! Single-channel matrix profile: MASS distance profiles, STAMP and a
//! brute-force oracle.
//!
//! Conventions shared by every path in this crate:
//! - trivial-match exclusion radius `ceil(m / 4)`: `j` is excluded for
//!   `i` when `|i - j| < radius`;
//! - a window whose std is (numerically) zero is *flat*; two flat windows
//!   are at distance 0 and a flat/non-flat pair at `sqrt(m)`;
//! - row minima break ties toward the smallest neighbour index;
//! - positions without an admissible neighbour get `+inf` and
//!   [`NO_NEIGHBOR`].

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel stored in a profile index when no neighbour is admissible.
pub const NO_NEIGHBOR: i64 = -1;

/// Default cap on the brute-force oracle's series length.
pub const ORACLE_CAP: usize = 4096;

const FLAT_STD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Bidirectional,
    ForwardOnly,
}

pub fn exclusion_radius(m: usize) -> usize {
    m.div_ceil(4).max(1)
}

/// Whether `j` may serve as the neighbour of `i`.
#[inline]
pub fn admissible(i: usize, j: usize, exclusion: usize, tc: Option<usize>, direction: Direction) -> bool {
    let d = i.abs_diff(j);
    if d < exclusion {
        return false;
    }
    if let Some(tc) = tc {
        if d > tc {
            return false;
        }
    }
    direction == Direction::Bidirectional || j > i
}

/// Candidate neighbour range `[lo, hi)` for `i`, before the exclusion test.
#[inline]
pub(crate) fn candidate_range(i: usize, count: usize, tc: Option<usize>, direction: Direction) -> (usize, usize) {
    let (lo, hi) = match tc {
        Some(tc) => (i.saturating_sub(tc), (i + tc + 1).min(count)),
        None => (0, count),
    };
    match direction {
        Direction::Bidirectional => (lo, hi),
        Direction::ForwardOnly => ((i + 1).max(lo), hi),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    pub values: Vec<f64>,
    /// Origin window for self-joins, `None` for an external query.
    pub query_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePair {
    pub profile: Vec<f64>,
    pub index: Vec<i64>,
    pub m: usize,
    pub tc: Option<usize>,
    pub direction: Direction,
}

impl ProfilePair {
    pub fn empty(len: usize, m: usize, tc: Option<usize>, direction: Direction) -> Self {
        Self {
            profile: vec![f64::INFINITY; len],
            index: vec![NO_NEIGHBOR; len],
            m,
            tc,
            direction,
        }
    }

    pub fn len(&self) -> usize {
        self.profile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profile.is_empty()
    }
}

/// Mean and population std of every length-`m` window, computed per window
/// in two passes.
pub(crate) fn window_stats(series: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let count = series.len() + 1 - m;
    let mut means = Vec::with_capacity(count);
    let mut stds = Vec::with_capacity(count);
    for w in series.windows(m) {
        let (mu, sd) = single_window_stats(w);
        means.push(mu);
        stds.push(sd);
    }
    (means, stds)
}

#[inline]
pub(crate) fn single_window_stats(w: &[f64]) -> (f64, f64) {
    let m = w.len() as f64;
    let mu = w.iter().sum::<f64>() / m;
    let var = w.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m;
    (mu, var.sqrt())
}

#[inline]
pub(crate) fn is_flat(mu: f64, sd: f64) -> bool {
    sd <= FLAT_STD * (1.0 + mu.abs())
}

/// z-normalized distance from the centered dot product of two windows.
#[inline]
fn znorm_from_dot(centered_dot: f64, m: usize, mu_a: f64, sd_a: f64, mu_b: f64, sd_b: f64) -> f64 {
    match (is_flat(mu_a, sd_a), is_flat(mu_b, sd_b)) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (m as f64).sqrt(),
        (false, false) => {
            let mf = m as f64;
            let corr = centered_dot / (mf * sd_a * sd_b);
            (2.0 * mf * (1.0 - corr)).clamp(0.0, 4.0 * mf).sqrt()
        }
    }
}

/// z-normalized distance evaluated element by element.
#[inline]
fn znorm_direct(a: &[f64], b: &[f64], mu_a: f64, sd_a: f64, mu_b: f64, sd_b: f64) -> f64 {
    match (is_flat(mu_a, sd_a), is_flat(mu_b, sd_b)) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (a.len() as f64).sqrt(),
        (false, false) => a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = (x - mu_a) / sd_a - (y - mu_b) / sd_b;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Squared-distance slack, per unit of `m`, within which FFT row minima are
/// re-evaluated directly.
const REFINE_SLACK: f64 = 1e-8;

/// Something that can report a distance between two of its items; the
/// basis of every constrained nearest-neighbour collapse.
pub trait PairDistance: Sync {
    fn count(&self) -> usize;
    fn distance(&self, i: usize, j: usize) -> f64;
}

/// Row-by-row nearest admissible neighbour over an arbitrary pair distance.
///
/// Candidates are scanned in ascending index order with a strict `<`, so
/// ties resolve to the smallest index.
pub fn constrained_collapse<D: PairDistance + ?Sized>(
    items: &D,
    m: usize,
    tc: Option<usize>,
    direction: Direction,
    exclusion: usize,
) -> ProfilePair {
    let count = items.count();
    let rows: Vec<(f64, i64)> = (0..count)
        .into_par_iter()
        .map(|i| nearest_in_range(items, i, 0, count, tc, direction, exclusion))
        .collect();
    let (profile, index) = rows.into_iter().unzip();
    ProfilePair {
        profile,
        index,
        m,
        tc,
        direction,
    }
}

/// Nearest admissible neighbour of `i` among items `[lo, hi)`.
#[inline]
pub(crate) fn nearest_in_range<D: PairDistance + ?Sized>(
    items: &D,
    i: usize,
    lo: usize,
    hi: usize,
    tc: Option<usize>,
    direction: Direction,
    exclusion: usize,
) -> (f64, i64) {
    let (clo, chi) = candidate_range(i, hi, tc, direction);
    let mut best = (f64::INFINITY, NO_NEIGHBOR);
    for j in clo.max(lo)..chi {
        if i.abs_diff(j) < exclusion {
            continue;
        }
        let d = items.distance(i, j);
        if d < best.0 {
            best = (d, j as i64);
        }
    }
    best
}

/// Windows of a single channel with cached z-normalization statistics and
/// a direct (non-FFT) distance. Supports appending samples for streaming.
#[derive(Debug, Clone)]
pub struct ZNormWindows {
    series: Vec<f64>,
    m: usize,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl ZNormWindows {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidWindow(format!(
                "z-normalized windows need m >= 2, got {m}"
            )));
        }
        Ok(Self {
            series: Vec::new(),
            m,
            means: Vec::new(),
            stds: Vec::new(),
        })
    }

    pub fn from_series(series: &[f64], m: usize) -> Result<Self> {
        let mut w = Self::new(m)?;
        if m > series.len() {
            return Err(Error::InvalidWindow(format!(
                "window length {m} for a series of length {}",
                series.len()
            )));
        }
        w.series = series.to_vec();
        (w.means, w.stds) = window_stats(series, m);
        Ok(w)
    }

    /// Appends one sample; returns true when it completed a new window.
    pub fn push(&mut self, x: f64) -> bool {
        self.series.push(x);
        if self.series.len() >= self.m {
            let s = self.series.len() - self.m;
            let (mu, sd) = single_window_stats(&self.series[s..]);
            self.means.push(mu);
            self.stds.push(sd);
            true
        } else {
            false
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

impl PairDistance for ZNormWindows {
    fn count(&self) -> usize {
        self.means.len()
    }

    #[inline]
    fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.series[i..i + self.m], &self.series[j..j + self.m]);
        let (mu_a, mu_b) = (self.means[i], self.means[j]);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| (x - mu_a) * (y - mu_b)).sum();
        znorm_from_dot(dot, self.m, mu_a, self.stds[i], mu_b, self.stds[j])
    }
}

/// Matrix profile from direct window-pair distances, restricted to the
/// temporal constraint band. `O(n * tc * m)`; the streaming segmenters use
/// the same kernel so batch and stream agree bit for bit.
pub fn banded_profile(series: &[f64], m: usize, tc: Option<usize>, direction: Direction) -> Result<ProfilePair> {
    let w = ZNormWindows::from_series(series, m)?;
    Ok(constrained_collapse(&w, m, tc, direction, exclusion_radius(m)))
}

/// FFT sliding-dot-product engine for one series.
struct MassEngine {
    n: usize,
    m: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex<f64>>,
    means: Vec<f64>,
    stds: Vec<f64>,
    offset: f64,
}

impl MassEngine {
    fn new(series: &[f64], m: usize) -> Self {
        let n = series.len();
        let fft_len = (n + m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        // z-normalized distances ignore a global offset; removing it keeps
        // the FFT dot products well conditioned.
        let offset = series.iter().sum::<f64>() / n as f64;
        let mut spectrum = vec![Complex::new(0.0, 0.0); fft_len];
        for (s, x) in spectrum.iter_mut().zip(series) {
            s.re = x - offset;
        }
        forward.process(&mut spectrum);
        let (means, stds) = window_stats(series, m);
        Self {
            n,
            m,
            fft_len,
            forward,
            inverse,
            spectrum,
            means,
            stds,
            offset,
        }
    }

    fn count(&self) -> usize {
        self.n + 1 - self.m
    }

    /// Distance profile of `query` (length m) against every window.
    fn profile_into(&self, query: &[f64], buf: &mut Vec<Complex<f64>>, out: &mut [f64]) {
        let m = self.m;
        let (q_mu, q_sd) = single_window_stats(query);
        buf.clear();
        buf.resize(self.fft_len, Complex::new(0.0, 0.0));
        for (k, x) in query.iter().rev().enumerate() {
            buf[k].re = x - self.offset;
        }
        self.forward.process(buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(buf);
        let scale = 1.0 / self.fft_len as f64;
        let mf = m as f64;
        let qc = q_mu - self.offset;
        for (j, o) in out.iter_mut().enumerate() {
            let qt = buf[j + m - 1].re * scale;
            let centered = qt - mf * qc * (self.means[j] - self.offset);
            *o = znorm_from_dot(centered, m, q_mu, q_sd, self.means[j], self.stds[j]);
        }
    }
}

fn check_window(m: usize, n: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidWindow(format!(
            "z-normalization needs m >= 2, got {m}"
        )));
    }
    if m > n {
        return Err(Error::InvalidWindow(format!(
            "window length {m} for a series of length {n}"
        )));
    }
    Ok(())
}

/// MASS: z-normalized Euclidean distance from `query` to every window of
/// `series`, in `O(n log n)`.
pub fn mass_distance_profile(query: &[f64], series: &[f64]) -> Result<DistanceProfile> {
    let m = query.len();
    check_window(m, series.len())?;
    let engine = MassEngine::new(series, m);
    let mut out = vec![0.0; engine.count()];
    let mut buf = Vec::new();
    engine.profile_into(query, &mut buf, &mut out);
    Ok(DistanceProfile {
        values: out,
        query_index: None,
    })
}

/// STAMP: one MASS distance profile per window, reduced to its row
/// minimum over admissible neighbours. Candidates near the FFT minimum are
/// re-evaluated in the time domain, so small distances keep full precision. Rows run in parallel; each row's
/// reduction is sequential, so output does not depend on thread count.
pub fn stamp(series: &[f64], m: usize, tc: Option<usize>, direction: Direction) -> Result<ProfilePair> {
    check_window(m, series.len())?;
    if series.len() < 2 * m {
        return Err(Error::InvalidWindow(format!(
            "STAMP needs n >= 2m (n = {}, m = {m})",
            series.len()
        )));
    }
    let engine = MassEngine::new(series, m);
    let count = engine.count();
    let exclusion = exclusion_radius(m);
    let rows: Vec<(f64, i64)> = (0..count)
        .into_par_iter()
        .map_init(
            || (Vec::new(), vec![0.0; count]),
            |(buf, row), i| {
                engine.profile_into(&series[i..i + m], buf, row);
                let (lo, hi) = candidate_range(i, count, tc, direction);
                let mut coarse = f64::INFINITY;
                for (j, &d) in row.iter().enumerate().take(hi).skip(lo) {
                    if i.abs_diff(j) >= exclusion && d < coarse {
                        coarse = d;
                    }
                }
                if !coarse.is_finite() {
                    return (f64::INFINITY, NO_NEIGHBOR);
                }
                let cutoff = coarse * coarse + REFINE_SLACK * m as f64;
                let (mu, sd) = (engine.means[i], engine.stds[i]);
                let mut best = (f64::INFINITY, NO_NEIGHBOR);
                for (j, &d) in row.iter().enumerate().take(hi).skip(lo) {
                    if i.abs_diff(j) >= exclusion && d * d <= cutoff {
                        let exact = znorm_direct(
                            &series[i..i + m],
                            &series[j..j + m],
                            mu,
                            sd,
                            engine.means[j],
                            engine.stds[j],
                        );
                        if exact < best.0 {
                            best = (exact, j as i64);
                        }
                    }
                }
                best
            },
        )
        .collect();
    let (profile, index) = rows.into_iter().unzip();
    Ok(ProfilePair {
        profile,
        index,
        m,
        tc,
        direction,
    })
}

/// Test oracle: materializes the full distance matrix from explicitly
/// z-normalized windows. `O(n^2 m)`, refused above [`ORACLE_CAP`].
pub fn brute_force_mp(series: &[f64], m: usize, tc: Option<usize>, direction: Direction) -> Result<ProfilePair> {
    brute_force_mp_capped(series, m, tc, direction, ORACLE_CAP)
}

pub fn brute_force_mp_capped(
    series: &[f64],
    m: usize,
    tc: Option<usize>,
    direction: Direction,
    cap: usize,
) -> Result<ProfilePair> {
    let n = series.len();
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    check_window(m, n)?;
    let count = n + 1 - m;
    let normalized: Vec<Option<Vec<f64>>> = series
        .windows(m)
        .map(|w| {
            let (mu, sd) = single_window_stats(w);
            (!is_flat(mu, sd)).then(|| w.iter().map(|x| (x - mu) / sd).collect())
        })
        .collect();
    let dist = |a: usize, b: usize| -> f64 {
        match (&normalized[a], &normalized[b]) {
            (None, None) => 0.0,
            (Some(_), None) | (None, Some(_)) => (m as f64).sqrt(),
            (Some(x), Some(y)) => x
                .iter()
                .zip(y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt(),
        }
    };
    let exclusion = exclusion_radius(m);
    let mut out = ProfilePair::empty(count, m, tc, direction);
    for i in 0..count {
        let row: Vec<f64> = (0..count).map(|j| dist(i, j)).collect();
        for (j, &d) in row.iter().enumerate() {
            if admissible(i, j, exclusion, tc, direction) && d < out.profile[i] {
                out.profile[i] = d;
                out.index[i] = j as i64;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn naive_znorm(a: &[f64], b: &[f64]) -> f64 {
        let (ma, sa) = single_window_stats(a);
        let (mb, sb) = single_window_stats(b);
        a.iter()
            .zip(b)
            .map(|(x, y)| ((x - ma) / sa - (y - mb) / sb).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn mass_self_match_and_affine_invariance() {
        let s = noise(200, 1);
        let q: Vec<f64> = s[50..66].to_vec();
        let dp = mass_distance_profile(&q, &s).unwrap();
        assert!(dp.values[50] < 1e-6, "{}", dp.values[50]);
        let qa: Vec<f64> = q.iter().map(|x| 3.5 * x - 7.0).collect();
        let dp = mass_distance_profile(&qa, &s).unwrap();
        assert!(dp.values[50] < 1e-6);
    }

    #[test]
    fn mass_matches_naive() {
        let s = noise(256, 2);
        let q = noise(16, 3);
        let dp = mass_distance_profile(&q, &s).unwrap();
        assert_eq!(dp.values.len(), 256 - 16 + 1);
        for (j, v) in dp.values.iter().enumerate() {
            let e = naive_znorm(&q, &s[j..j + 16]);
            assert!((v - e).abs() <= 1e-8 * e.max(1e-3), "j={j}: {v} vs {e}");
        }
    }

    #[test]
    fn mass_window_errors() {
        assert!(matches!(
            mass_distance_profile(&[1.0], &[1.0, 2.0]),
            Err(Error::InvalidWindow(_))
        ));
        assert!(matches!(
            mass_distance_profile(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::InvalidWindow(_))
        ));
    }

    #[test]
    fn repeated_block_points_to_twin() {
        let block = noise(40, 4);
        let s: Vec<f64> = block.iter().chain(&block).copied().collect();
        let m = 8;
        let mp = stamp(&s, m, None, Direction::Bidirectional).unwrap();
        for i in 0..mp.len() {
            if i + 40 <= s.len() - m || i >= 40 {
                assert!(mp.profile[i] < 1e-6, "i={i}: {}", mp.profile[i]);
                let twin = if i + 40 <= s.len() - m { i + 40 } else { i - 40 };
                assert_eq!(mp.index[i], twin as i64);
            }
        }
    }

    #[test]
    fn stamp_equals_oracle_n300() {
        let s = noise(300, 5);
        let a = stamp(&s, 12, None, Direction::Bidirectional).unwrap();
        let b = brute_force_mp(&s, 12, None, Direction::Bidirectional).unwrap();
        assert_eq!(a.index, b.index);
        for (x, y) in a.profile.iter().zip(&b.profile) {
            assert!((x - y).abs() <= 1e-8 * y.max(1e-12));
        }
    }

    #[test]
    fn forward_only_points_forward() {
        let s = noise(200, 6);
        let mp = stamp(&s, 8, Some(30), Direction::ForwardOnly).unwrap();
        for (i, (&p, &j)) in mp.profile.iter().zip(&mp.index).enumerate() {
            if p.is_finite() {
                assert!(j > i as i64);
            } else {
                assert_eq!(j, NO_NEIGHBOR);
            }
        }
        // The last window has nothing ahead of it.
        assert_eq!(*mp.index.last().unwrap(), NO_NEIGHBOR);
        assert!(mp.profile.last().unwrap().is_infinite());
    }

    #[test]
    fn constant_series_profile_is_zero() {
        let s = vec![2.5; 64];
        let mp = brute_force_mp(&s, 4, None, Direction::Bidirectional).unwrap();
        assert!(mp.profile.iter().all(|&p| p == 0.0));
        let st = stamp(&s, 4, None, Direction::Bidirectional).unwrap();
        assert!(st.profile.iter().all(|&p| p == 0.0));
        assert_eq!(st.index, mp.index);
    }

    #[test]
    fn flat_vs_structured_window_is_sqrt_m() {
        let mut s = vec![0.0; 8];
        s.extend(noise(8, 7));
        let w = ZNormWindows::from_series(&s, 8).unwrap();
        assert!((w.distance(0, 8) - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn brute_force_tc_and_cap() {
        let s = noise(128, 8);
        let mp = brute_force_mp(&s, 8, Some(10), Direction::Bidirectional).unwrap();
        for (i, &j) in mp.index.iter().enumerate() {
            assert!(j >= 0 && (j - i as i64).abs() <= 10);
        }
        let st = stamp(&s, 8, Some(10), Direction::Bidirectional).unwrap();
        assert_eq!(st.index, mp.index);
        assert!(matches!(
            brute_force_mp_capped(&s, 8, None, Direction::Bidirectional, 100),
            Err(Error::OracleCap { n: 128, cap: 100 })
        ));
    }

    #[test]
    fn banded_matches_oracle() {
        let s = noise(300, 9);
        for dir in [Direction::Bidirectional, Direction::ForwardOnly] {
            let a = banded_profile(&s, 10, Some(40), dir).unwrap();
            let b = brute_force_mp(&s, 10, Some(40), dir).unwrap();
            assert_eq!(a.index, b.index);
            for (x, y) in a.profile.iter().zip(&b.profile) {
                assert!(x == y || (x - y).abs() <= 1e-9 * y);
            }
        }
    }

    #[test]
    fn stamp_needs_two_windows_worth() {
        assert!(stamp(&noise(15, 1), 8, None, Direction::Bidirectional).is_err());
    }

    #[test]
    fn streaming_windows_match_batch() {
        let s = noise(120, 10);
        let batch = ZNormWindows::from_series(&s, 9).unwrap();
        let mut stream = ZNormWindows::new(9).unwrap();
        for &x in &s {
            stream.push(x);
        }
        assert_eq!(stream.count(), batch.count());
        for i in (0..batch.count()).step_by(7) {
            for j in (0..batch.count()).step_by(5) {
                assert_eq!(stream.distance(i, j).to_bits(), batch.distance(i, j).to_bits());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn profile_bounds_and_exclusion(seed in 0u64..1000, mi in 0usize..3, n in 64usize..256) {
                let m = [4, 8, 16][mi];
                let s = noise(n, seed);
                let mp = stamp(&s, m, None, Direction::Bidirectional).unwrap();
                let r = exclusion_radius(m) as i64;
                for (i, (&p, &j)) in mp.profile.iter().zip(&mp.index).enumerate() {
                    prop_assert!(p >= 0.0 && p <= 2.0 * (m as f64).sqrt() + 1e-12);
                    prop_assert!((j - i as i64).abs() >= r);
                }
            }

            #[test]
            fn tc_never_decreases_profile(seed in 0u64..1000, tc in 4usize..40) {
                let s = noise(160, seed);
                let free = stamp(&s, 8, None, Direction::Bidirectional).unwrap();
                let cons = stamp(&s, 8, Some(tc), Direction::Bidirectional).unwrap();
                for (a, b) in cons.profile.iter().zip(&free.profile) {
                    prop_assert!(a >= b);
                }
            }
        }
    }
}
