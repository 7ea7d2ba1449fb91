//! Arc curves, idealized arc curves and the corrected arc curve.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matprof::{Direction, ProfilePair, NO_NEIGHBOR};

/// Denominator floor when dividing by the idealized arc curve.
pub const IAC_EPS: f64 = 1e-12;

/// Default number of Monte Carlo trials for the empirical IAC.
pub const DEFAULT_IAC_TRIALS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcCurve {
    pub counts: Vec<u64>,
    pub direction: Direction,
    pub tc: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IacKind {
    Parabolic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iac {
    pub values: Vec<f64>,
    pub kind: IacKind,
    pub direction: Direction,
    pub tc: Option<usize>,
    pub n_trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cac {
    pub values: Vec<f64>,
    pub direction: Direction,
    pub tc: Option<usize>,
}

impl Cac {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Counts, for every position `k`, the arcs `i -> index[i]` with
/// `min < k < max` (endpoints are not crossings). Sentinel entries add no arc.
pub fn arc_curve(index: &[i64]) -> Result<ArcCurve> {
    let len = index.len();
    let mut diff = vec![0i64; len + 1];
    for (i, &j) in index.iter().enumerate() {
        if j == NO_NEIGHBOR {
            continue;
        }
        if j < 0 || j as usize >= len {
            return Err(Error::InvalidIndex {
                position: i,
                index: j,
                len,
            });
        }
        add_arc(&mut diff, i, j as usize);
    }
    Ok(ArcCurve {
        counts: integrate(&diff, len),
        direction: Direction::Bidirectional,
        tc: None,
    })
}

/// Arc curve of a profile index, tagged with the profile's constraints.
pub fn arc_curve_of(profile: &ProfilePair) -> Result<ArcCurve> {
    let mut ac = arc_curve(&profile.index)?;
    ac.direction = profile.direction;
    ac.tc = profile.tc;
    Ok(ac)
}

#[inline]
fn add_arc(diff: &mut [i64], i: usize, j: usize) {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    if hi > lo + 1 {
        diff[lo + 1] += 1;
        diff[hi] -= 1;
    }
}

fn integrate(diff: &[i64], len: usize) -> Vec<u64> {
    let mut run = 0i64;
    diff[..len]
        .iter()
        .map(|d| {
            run += d;
            run as u64
        })
        .collect()
}

/// Closed-form idealized arc curve `2 i (L - i) / L`, peak `L/2` at the middle.
pub fn iac_parabolic(len: usize) -> Result<Iac> {
    if len < 3 {
        return Err(Error::InvalidArgument(format!("IAC length {len} < 3")));
    }
    let l = len as f64;
    Ok(Iac {
        values: (0..len).map(|i| 2.0 * i as f64 * (l - i as f64) / l).collect(),
        kind: IacKind::Parabolic,
        direction: Direction::Bidirectional,
        tc: None,
        n_trials: None,
    })
}

/// Admissible random-neighbour range for position `i` in a length-`len`
/// curve, excluding `i` itself. Returns `None` when nothing is admissible.
fn random_range(i: usize, len: usize, direction: Direction, tc: Option<usize>) -> Option<(usize, usize)> {
    let reach = tc.unwrap_or(len);
    let hi = (i + reach).min(len - 1);
    match direction {
        Direction::ForwardOnly => (hi > i).then_some((i + 1, hi)),
        Direction::Bidirectional => {
            let lo = i.saturating_sub(reach);
            (hi > lo).then_some((lo, hi))
        }
    }
}

/// The random neighbour of `i` in one trial. Every position consumes
/// exactly one 64-bit word of the trial's stream, so a position's draw
/// never depends on the curve length.
#[inline]
fn draw_neighbor(word: u64, i: usize, lo: usize, hi: usize, direction: Direction) -> usize {
    match direction {
        Direction::ForwardOnly => lo + bounded(word, hi - lo + 1),
        Direction::Bidirectional => {
            // Uniform over [lo, hi] \ {i}.
            let j = lo + bounded(word, hi - lo);
            if j >= i {
                j + 1
            } else {
                j
            }
        }
    }
}

#[inline]
fn bounded(word: u64, range: usize) -> usize {
    ((word as u128 * range as u128) >> 64) as usize
}

fn trial_rng(seed: u64, trial: usize, first_position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng.set_word_pos(2 * first_position as u128);
    rng
}

/// Arc-crossing counts at positions `[lo, hi)` for one Monte Carlo trial,
/// from random arcs whose sources can reach that range.
fn trial_counts(
    len: usize,
    lo: usize,
    hi: usize,
    direction: Direction,
    tc: Option<usize>,
    seed: u64,
    trial: usize,
) -> Vec<u64> {
    let (src_lo, src_hi) = match tc {
        Some(tc) => (
            lo.saturating_sub(tc),
            match direction {
                Direction::ForwardOnly => hi.min(len),
                Direction::Bidirectional => (hi + tc).min(len),
            },
        ),
        None => (0, len),
    };
    // Arcs from [src_lo, src_hi) land within `reach` of their source.
    let reach = tc.unwrap_or(len);
    let base = src_lo.saturating_sub(reach);
    let top = (src_hi + reach + 1).min(len);
    let mut rng = trial_rng(seed, trial, src_lo);
    let mut diff = vec![0i64; top - base + 1];
    for i in src_lo..src_hi {
        let word = rng.next_u64();
        if let Some((a, b)) = random_range(i, len, direction, tc) {
            add_arc(&mut diff, i - base, draw_neighbor(word, i, a, b, direction) - base);
        }
    }
    integrate(&diff, top - base)[lo - base..hi - base].to_vec()
}

/// Monte Carlo idealized arc curve over positions `[lo, hi)` of a
/// length-`len` curve. Trials run in parallel and are summed in trial order.
pub fn iac_empirical_range(
    len: usize,
    lo: usize,
    hi: usize,
    direction: Direction,
    tc: Option<usize>,
    n_trials: usize,
    seed: u64,
) -> Vec<f64> {
    let per_trial: Vec<Vec<u64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| trial_counts(len, lo, hi, direction, tc, seed, t))
        .collect();
    let mut sums = vec![0u64; hi - lo];
    for counts in &per_trial {
        for (s, c) in sums.iter_mut().zip(counts) {
            *s += c;
        }
    }
    sums.into_iter().map(|s| s as f64 / n_trials as f64).collect()
}

type IacKey = (usize, Direction, Option<usize>, usize, u64);

fn iac_cache() -> &'static Mutex<HashMap<IacKey, Arc<Iac>>> {
    static CACHE: OnceLock<Mutex<HashMap<IacKey, Arc<Iac>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Empirical idealized arc curve: every position points to a uniformly
/// random admissible neighbour; the per-position mean crossing count over
/// `n_trials` seeded trials. Cached by all of its arguments.
///
/// With a temporal constraint, position `k` only depends on arcs from
/// `[k - tc, k + tc]`, and every position's draw is fixed by
/// `(seed, trial, position)`; hence values at `k <= len - 1 - tc` do not
/// change when the curve grows.
pub fn iac_empirical(
    len: usize,
    direction: Direction,
    tc: Option<usize>,
    n_trials: usize,
    seed: u64,
) -> Result<Arc<Iac>> {
    if n_trials < 1 {
        return Err(Error::InvalidArgument("empirical IAC needs at least one trial".into()));
    }
    if len < 3 {
        return Err(Error::InvalidArgument(format!("IAC length {len} < 3")));
    }
    let key = (len, direction, tc, n_trials, seed);
    if let Some(hit) = iac_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let iac = Arc::new(Iac {
        values: iac_empirical_range(len, 0, len, direction, tc, n_trials, seed),
        kind: IacKind::Empirical,
        direction,
        tc,
        n_trials: Some(n_trials),
    });
    iac_cache().lock().unwrap().insert(key, iac.clone());
    Ok(iac)
}

/// The IAC used for a given constraint set: closed form for unconstrained
/// bidirectional arcs, empirical otherwise.
pub fn iac_for(len: usize, direction: Direction, tc: Option<usize>, seed: u64) -> Result<Arc<Iac>> {
    if direction == Direction::Bidirectional && tc.is_none() {
        Ok(Arc::new(iac_parabolic(len)?))
    } else {
        iac_empirical(len, direction, tc, DEFAULT_IAC_TRIALS, seed)
    }
}

#[inline]
pub fn cac_value(count: u64, iac: f64) -> f64 {
    (count as f64 / iac.max(IAC_EPS)).min(1.0)
}

/// Corrected arc curve `min(AC / IAC, 1)`, forced to 1 within
/// `edge_guard` positions of either end.
pub fn cac(ac: &ArcCurve, iac: &Iac, edge_guard: usize) -> Result<Cac> {
    let len = ac.counts.len();
    if iac.values.len() != len {
        return Err(Error::Shape(format!(
            "arc curve of length {len} with IAC of length {}",
            iac.values.len()
        )));
    }
    if ac.direction != iac.direction || ac.tc != iac.tc {
        return Err(Error::InvalidArgument(format!(
            "arc curve ({:?}, tc {:?}) and IAC ({:?}, tc {:?}) disagree",
            ac.direction, ac.tc, iac.direction, iac.tc
        )));
    }
    let values = ac
        .counts
        .iter()
        .zip(&iac.values)
        .enumerate()
        .map(|(i, (&c, &e))| {
            if i < edge_guard || i + edge_guard >= len {
                1.0
            } else {
                cac_value(c, e)
            }
        })
        .collect();
    Ok(Cac {
        values,
        direction: ac.direction,
        tc: ac.tc,
    })
}

/// Profile index to CAC in one step, with the matching IAC.
pub fn cac_from_profile(profile: &ProfilePair, edge_guard: usize, seed: u64) -> Result<Cac> {
    let ac = arc_curve_of(profile)?;
    let iac = iac_for(ac.counts.len(), profile.direction, profile.tc, seed)?;
    cac(&ac, &iac, edge_guard)
}
