//! Latent-space matrix profile: nearest neighbours among encoded windows,
//! computed in full, in memory-bounded overlapping batches, or online.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::autoenc::AeModel;
use crate::error::{Error, Result};
use crate::matprof::{
    exclusion_radius, nearest_in_range, DistanceProfile, Direction, PairDistance, ProfilePair, NO_NEIGHBOR,
};
use crate::series::SubsequenceSet;

/// Encoded windows, one latent vector per window, stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSet {
    dim: usize,
    data: Vec<f64>,
    m: usize,
    source_len: usize,
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl LatentSet {
    pub fn new(dim: usize, m: usize, source_len: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            data: Vec::new(),
            m,
            source_len,
        })
    }

    pub fn from_vectors(vectors: Vec<Vec<f64>>, m: usize, source_len: usize) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        let mut set = Self::new(dim, m, source_len)?;
        for v in &vectors {
            set.push(v)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape(format!(
                "latent vector of length {} in a set of dimension {}",
                v.len(),
                self.dim
            )));
        }
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite latent value at component {k} of vector {}",
                self.len()
            )));
        }
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Window length the vectors were encoded from.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Vectors `[start, end)` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> LatentSet {
        LatentSet {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            m: self.m,
            source_len: self.source_len,
        }
    }
}

impl PairDistance for LatentSet {
    fn count(&self) -> usize {
        self.len()
    }

    #[inline]
    fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.vector(i), self.vector(j))
    }
}

/// Encodes every window of a step-1 subsequence set.
pub fn encode_all(model: &AeModel, subs: &SubsequenceSet<'_>) -> Result<LatentSet> {
    if subs.step() != 1 {
        return Err(Error::InvalidArgument(format!(
            "latent profiles need step-1 windows, got step {}",
            subs.step()
        )));
    }
    let arch = &model.arch;
    if subs.source().nc() != arch.nc || subs.m() != arch.nw {
        return Err(Error::Shape(format!(
            "{}x{} windows for a model built for {}x{}",
            subs.source().nc(),
            subs.m(),
            arch.nc,
            arch.nw
        )));
    }
    let d = model.input_dim();
    let vectors: Vec<Vec<f64>> = (0..subs.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |buf, i| {
                subs.copy_window(i, buf);
                model.encode(buf)
            },
        )
        .collect::<Result<_>>()?;
    let mut set = LatentSet::new(model.latent_dim(), subs.m(), subs.source().len())?;
    for v in &vectors {
        set.push(v)?;
    }
    Ok(set)
}

/// Euclidean distances from `query` to vectors `[lo, hi)`.
pub fn latent_distance_profile(query: &[f64], set: &LatentSet, lo: usize, hi: usize) -> Result<DistanceProfile> {
    if lo > hi || hi > set.len() {
        return Err(Error::InvalidArgument(format!(
            "range [{lo}, {hi}) over a set of {} vectors",
            set.len()
        )));
    }
    if query.len() != set.dim() {
        return Err(Error::Shape(format!(
            "query of length {} against vectors of dimension {}",
            query.len(),
            set.dim()
        )));
    }
    let values = (lo..hi)
        .into_par_iter()
        .map(|j| euclidean(query, set.vector(j)))
        .collect();
    Ok(DistanceProfile {
        values,
        query_index: None,
    })
}

/// Default exclusion radius for a latent set built from length-`m` windows.
pub fn latent_exclusion(set: &LatentSet) -> usize {
    exclusion_radius(set.m())
}

/// Nearest admissible neighbour of every latent vector.
pub fn collapse(set: &LatentSet, tc: Option<usize>, direction: Direction, exclusion: usize) -> Result<ProfilePair> {
    let need = 2 * exclusion + 2;
    if set.len() < need {
        return Err(Error::InsufficientData(format!(
            "{} latent vectors, at least {need} needed for exclusion radius {exclusion}",
            set.len()
        )));
    }
    Ok(crate::matprof::constrained_collapse(
        set,
        set.m(),
        tc,
        direction,
        exclusion,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchedCollapse {
    pub profile: ProfilePair,
    pub batches: usize,
    /// Largest number of distance entries held at once.
    pub peak_entries: usize,
}

/// `(d, j)` beats `best` on distance, then on the smaller index.
#[inline]
fn better(d: f64, j: i64, best: (f64, i64)) -> bool {
    d < best.0 || (d == best.0 && j < best.1)
}

/// Rows of a batch band evaluated together.
const BAND_BLOCK: usize = 64;

/// Collapse over overlapping batches of `t_lim` vectors that advance by
/// `t_lim - (2 tc - 1)`, merging per-batch minima. Each batch recomputes its
/// in-band distances from scratch, a block of rows at a time, storing only
/// the upper half of the symmetric band (distances are bitwise symmetric);
/// the result equals [`collapse`].
pub fn batched_collapse(
    set: &LatentSet,
    t_lim: usize,
    tc: usize,
    direction: Direction,
    exclusion: usize,
) -> Result<BatchedCollapse> {
    if tc == 0 {
        return Err(Error::InvalidConfig("batched collapse needs tc >= 1".into()));
    }
    if t_lim <= 2 * tc {
        return Err(Error::InvalidConfig(format!(
            "t_lim = {t_lim} must exceed 2 tc = {}",
            2 * tc
        )));
    }
    let count = set.len();
    let need = 2 * exclusion + 2;
    if count < need {
        return Err(Error::InsufficientData(format!(
            "{count} latent vectors, at least {need} needed for exclusion radius {exclusion}"
        )));
    }
    let width = tc + 1;
    let first = exclusion.max(1);
    let advance = t_lim - (2 * tc - 1);
    let bidirectional = direction == Direction::Bidirectional;
    let mut out = ProfilePair::empty(count, set.m(), Some(tc), direction);
    let mut band: Vec<f64> = Vec::new();
    let mut best: Vec<(f64, i64)> = Vec::new();
    let mut peak = 0;
    let mut batches = 0;
    let mut start = 0;
    loop {
        let end = (start + t_lim).min(count);
        let rows = end - start;
        best.clear();
        best.resize(rows, (f64::INFINITY, NO_NEIGHBOR));
        for block in (0..rows).step_by(BAND_BLOCK) {
            let block_rows = BAND_BLOCK.min(rows - block);
            band.clear();
            band.resize(block_rows * width, f64::INFINITY);
            peak = peak.max(band.len());
            band.par_chunks_mut(width).enumerate().for_each(|(b, row)| {
                let i = start + block + b;
                let vi = set.vector(i);
                for (o, slot) in row.iter_mut().enumerate().take(width.min(end - i)).skip(first) {
                    *slot = euclidean(vi, set.vector(i + o));
                }
            });
            for b in 0..block_rows {
                let r = block + b;
                let i = start + r;
                let row = &band[b * width..(b + 1) * width];
                for o in first..width.min(end - i) {
                    let d = row[o];
                    if better(d, (i + o) as i64, best[r]) {
                        best[r] = (d, (i + o) as i64);
                    }
                    if bidirectional && better(d, i as i64, best[r + o]) {
                        best[r + o] = (d, i as i64);
                    }
                }
            }
        }
        for (r, &(d, j)) in best.iter().enumerate() {
            let i = start + r;
            if j != NO_NEIGHBOR && better(d, j, (out.profile[i], out.index[i])) {
                out.profile[i] = d;
                out.index[i] = j;
            }
        }
        batches += 1;
        if end == count {
            break;
        }
        start += advance;
    }
    Ok(BatchedCollapse {
        profile: out,
        batches,
        peak_entries: peak,
    })
}

/// Incrementally maintained latent profile.
///
/// Vectors are buffered until `batch_len` accumulate (ε-real-time), then
/// appended: each new vector `j` is offered as a candidate to every earlier
/// position it may serve and, when bidirectional, gets its own row over the
/// earlier positions. A position is final once `tc` newer vectors exist.
#[derive(Debug, Clone)]
pub struct LsmpState {
    dim: usize,
    m: usize,
    tc: usize,
    exclusion: usize,
    direction: Direction,
    batch_len: usize,
    pending: Vec<Vec<f64>>,
    recent: VecDeque<Vec<f64>>,
    profile: Vec<f64>,
    index: Vec<i64>,
}

impl LsmpState {
    pub fn new(dim: usize, m: usize, tc: usize, direction: Direction, batch_len: usize) -> Result<Self> {
        Self::with_exclusion(dim, m, tc, direction, batch_len, exclusion_radius(m))
    }

    pub fn with_exclusion(
        dim: usize,
        m: usize,
        tc: usize,
        direction: Direction,
        batch_len: usize,
        exclusion: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be positive".into()));
        }
        if tc == 0 {
            return Err(Error::InvalidConfig("online latent profile needs tc >= 1".into()));
        }
        if batch_len == 0 {
            return Err(Error::InvalidConfig("epsilon batch must be at least 1".into()));
        }
        Ok(Self {
            dim,
            m,
            tc,
            exclusion,
            direction,
            batch_len,
            pending: Vec::new(),
            recent: VecDeque::with_capacity(tc + 1),
            profile: Vec::new(),
            index: Vec::new(),
        })
    }

    pub fn tc(&self) -> usize {
        self.tc
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn batch_len(&self) -> usize {
        self.batch_len
    }

    /// Appended (non-pending) positions.
    pub fn len(&self) -> usize {
        self.profile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profile.is_empty()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Number of leading positions whose entries can no longer change.
    pub fn finalized(&self) -> usize {
        self.len().saturating_sub(self.tc)
    }

    pub fn finalized_profile(&self) -> (&[f64], &[i64]) {
        let f = self.finalized();
        (&self.profile[..f], &self.index[..f])
    }

    /// Every appended position, including provisional ones.
    pub fn provisional_profile(&self) -> (&[f64], &[i64]) {
        (&self.profile, &self.index)
    }

    pub fn to_profile_pair(&self, include_provisional: bool) -> ProfilePair {
        let n = if include_provisional { self.len() } else { self.finalized() };
        ProfilePair {
            profile: self.profile[..n].to_vec(),
            index: self.index[..n].to_vec(),
            m: self.m,
            tc: Some(self.tc),
            direction: self.direction,
        }
    }

    /// Buffers `vectors`, appending whole ε-batches as they fill. Returns the
    /// number of positions appended by this call.
    pub fn online_update<V: AsRef<[f64]>>(&mut self, vectors: &[V]) -> Result<usize> {
        let mut appended = 0;
        for v in vectors {
            let v = v.as_ref();
            if v.len() != self.dim {
                return Err(Error::Shape(format!(
                    "latent vector of length {} for a state of dimension {}",
                    v.len(),
                    self.dim
                )));
            }
            self.pending.push(v.to_vec());
            if self.pending.len() >= self.batch_len {
                appended += self.flush();
            }
        }
        Ok(appended)
    }

    /// Appends whatever is pending regardless of the batch length.
    pub fn flush(&mut self) -> usize {
        let batch = std::mem::take(&mut self.pending);
        let n = batch.len();
        for v in batch {
            self.append(v);
        }
        n
    }

    fn append(&mut self, v: Vec<f64>) {
        let j = self.len();
        let base = j - self.recent.len();
        let mut own = (f64::INFINITY, NO_NEIGHBOR);
        for (k, u) in self.recent.iter().enumerate() {
            let i = base + k;
            if j - i < self.exclusion {
                continue;
            }
            let d = euclidean(u, &v);
            if d < self.profile[i] {
                self.profile[i] = d;
                self.index[i] = j as i64;
            }
            if self.direction == Direction::Bidirectional && d < own.0 {
                own = (d, i as i64);
            }
        }
        self.profile.push(own.0);
        self.index.push(own.1);
        self.recent.push_back(v);
        if self.recent.len() > self.tc {
            self.recent.pop_front();
        }
    }
}

/// O(count^2) reference: scans the full distance matrix row by row.
pub fn collapse_oracle(set: &LatentSet, tc: Option<usize>, direction: Direction, exclusion: usize) -> ProfilePair {
    let count = set.len();
    let mut out = ProfilePair::empty(count, set.m(), tc, direction);
    for i in 0..count {
        let (d, j) = nearest_in_range(set, i, 0, count, tc, direction, exclusion);
        out.profile[i] = d;
        out.index[i] = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoenc::{build_arch, ArchKind};
    use crate::series::{window_all, TimeSeries};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(count: usize, dim: usize, seed: u64) -> LatentSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = (0..count)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        LatentSet::from_vectors(vectors, 8, count + 7).unwrap()
    }

    /// Full matrix, then per-row masked argmin; ties to the smallest index.
    fn matrix_oracle(set: &LatentSet, tc: Option<usize>, direction: Direction, excl: usize) -> (Vec<f64>, Vec<i64>) {
        let n = set.len();
        let mut full = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let s: f64 = set
                    .vector(i)
                    .iter()
                    .zip(set.vector(j))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                full[i][j] = s.sqrt();
            }
        }
        let mut p = vec![f64::INFINITY; n];
        let mut idx = vec![NO_NEIGHBOR; n];
        for i in 0..n {
            for j in 0..n {
                let d = i.abs_diff(j);
                let ok = d >= excl
                    && tc.is_none_or(|t| d <= t)
                    && (direction == Direction::Bidirectional || j > i);
                if ok && full[i][j] < p[i] {
                    p[i] = full[i][j];
                    idx[i] = j as i64;
                }
            }
        }
        (p, idx)
    }

    #[test]
    fn encode_all_counts_and_matches_single_encodes() {
        let chans = vec![(0..200).map(|t| (t as f64 * 0.1).sin()).collect::<Vec<_>>()];
        let ts = TimeSeries::from_channels(chans).unwrap();
        let subs = window_all(&ts, 50, 1).unwrap();
        let model = AeModel::new(build_arch(ArchKind::FullyConnected, 1, 50).unwrap(), 1);
        let set = encode_all(&model, &subs).unwrap();
        assert_eq!(set.len(), 151);
        assert_eq!(set.dim(), 5);
        for i in [0, 75, 150] {
            assert_eq!(set.vector(i), &model.encode(&subs.window(i)).unwrap()[..]);
        }
        let strided = window_all(&ts, 50, 2).unwrap();
        assert!(encode_all(&model, &strided).is_err());
        let wrong = window_all(&ts, 40, 1).unwrap();
        assert!(matches!(encode_all(&model, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn scalar_distance_profile() {
        let set = LatentSet::from_vectors(vec![vec![0.0], vec![3.0], vec![4.0]], 4, 6).unwrap();
        let dp = latent_distance_profile(&[0.0], &set, 0, 3).unwrap();
        assert_eq!(dp.values, vec![0.0, 3.0, 4.0]);
        assert!(latent_distance_profile(&[0.0], &set, 2, 4).is_err());
        let self_dp = latent_distance_profile(set.vector(1), &set, 0, 3).unwrap();
        assert_eq!(self_dp.values[1], 0.0);
    }

    #[test]
    fn distance_profile_matches_loop() {
        let set = random_set(100, 64, 3);
        let q = set.vector(17).to_vec();
        let dp = latent_distance_profile(&q, &set, 10, 90).unwrap();
        for (k, v) in dp.values.iter().enumerate() {
            let naive: f64 = q.iter().zip(set.vector(10 + k)).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((v - naive.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicates_find_each_other() {
        let mut set = random_set(60, 4, 9);
        let dup = set.vector(10).to_vec();
        set.data[30 * 4..31 * 4].copy_from_slice(&dup);
        let pp = collapse(&set, Some(25), Direction::Bidirectional, 2).unwrap();
        assert_eq!(pp.profile[10], 0.0);
        assert_eq!(pp.profile[30], 0.0);
        assert_eq!(pp.index[10], 30);
        assert_eq!(pp.index[30], 10);
    }

    #[test]
    fn collapse_matches_matrix_oracle() {
        for (seed, tc, dir) in [
            (1, None, Direction::Bidirectional),
            (2, Some(5), Direction::Bidirectional),
            (3, None, Direction::ForwardOnly),
            (4, Some(40), Direction::ForwardOnly),
        ] {
            let set = random_set(300, 6, seed);
            let pp = collapse(&set, tc, dir, 2).unwrap();
            let (p, i) = matrix_oracle(&set, tc, dir, 2);
            assert_eq!(pp.index, i);
            for (a, b) in pp.profile.iter().zip(&p) {
                assert!((a - b).abs() <= 1e-12 * b.max(1.0) || (a.is_infinite() && b.is_infinite()));
            }
            if let Some(t) = tc {
                assert!(pp
                    .index
                    .iter()
                    .enumerate()
                    .all(|(k, &j)| j == NO_NEIGHBOR || k.abs_diff(j as usize) <= t));
            }
            assert_eq!(collapse_oracle(&set, tc, dir, 2), pp);
        }
    }

    #[test]
    fn collapse_needs_enough_vectors() {
        let set = random_set(5, 2, 1);
        assert!(matches!(
            collapse(&set, None, Direction::Bidirectional, 2),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn batched_equals_full_collapse() {
        let set = random_set(700, 5, 11);
        for tc in [16, 64] {
            for t_lim in [2 * tc + 1, 4 * tc, 700] {
                for dir in [Direction::Bidirectional, Direction::ForwardOnly] {
                    let full = collapse(&set, Some(tc), dir, 2).unwrap();
                    let b = batched_collapse(&set, t_lim, tc, dir, 2).unwrap();
                    assert_eq!(b.profile, full, "tc {tc} t_lim {t_lim}");
                    assert!(b.peak_entries <= t_lim * (2 * tc + 1));
                }
            }
        }
    }

    #[test]
    fn batched_ties_resolve_like_collapse() {
        let vectors: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 3) as f64]).collect();
        let set = LatentSet::from_vectors(vectors, 4, 203).unwrap();
        let full = collapse(&set, Some(10), Direction::Bidirectional, 1).unwrap();
        let b = batched_collapse(&set, 21, 10, Direction::Bidirectional, 1).unwrap();
        assert_eq!(b.profile, full);
        assert!(b.batches > 1);
    }

    #[test]
    fn batched_single_batch_and_validation() {
        let set = random_set(100, 3, 2);
        let b = batched_collapse(&set, 500, 10, Direction::Bidirectional, 2).unwrap();
        assert_eq!(b.batches, 1);
        assert!(matches!(
            batched_collapse(&set, 20, 10, Direction::Bidirectional, 2),
            Err(Error::InvalidConfig(_))
        ));
    }

    fn stream(set: &LatentSet, chunk: usize, tc: usize, dir: Direction, batch_len: usize) -> LsmpState {
        let mut st = LsmpState::with_exclusion(set.dim(), 8, tc, dir, batch_len, 2).unwrap();
        let all: Vec<&[f64]> = set.vectors().collect();
        for part in all.chunks(chunk) {
            st.online_update(part).unwrap();
            assert!(st.len() - st.finalized() <= tc);
        }
        st.flush();
        st
    }

    #[test]
    fn online_stream_equals_collapse() {
        let set = random_set(400, 4, 5);
        let tc = 30;
        for dir in [Direction::ForwardOnly, Direction::Bidirectional] {
            let full = collapse(&set, Some(tc), dir, 2).unwrap();
            for chunk in [1, 7, tc, 400] {
                let st = stream(&set, chunk, tc, dir, 1);
                let pp = st.to_profile_pair(true);
                assert_eq!(pp.index, full.index);
                assert!(pp.profile.iter().zip(&full.profile).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }

    #[test]
    fn finalized_entries_never_change() {
        let set = random_set(300, 3, 8);
        let mut st = LsmpState::with_exclusion(3, 8, 20, Direction::ForwardOnly, 1, 2).unwrap();
        let mut seen: Vec<(f64, i64)> = Vec::new();
        for v in set.vectors() {
            st.online_update(&[v]).unwrap();
            let (p, i) = st.finalized_profile();
            for (k, old) in seen.iter().enumerate() {
                assert_eq!((p[k], i[k]), *old);
            }
            seen = p.iter().copied().zip(i.iter().copied()).collect();
        }
    }

    #[test]
    fn epsilon_batches_delay_but_do_not_change() {
        let set = random_set(250, 3, 4);
        let a = stream(&set, 3, 15, Direction::ForwardOnly, 1);
        let b = stream(&set, 3, 15, Direction::ForwardOnly, 64);
        assert_eq!(a.to_profile_pair(true), b.to_profile_pair(true));
        let mut st = LsmpState::new(3, 8, 15, Direction::ForwardOnly, 10).unwrap();
        let before = st.to_profile_pair(true);
        assert_eq!(st.online_update::<Vec<f64>>(&[]).unwrap(), 0);
        assert_eq!(st.to_profile_pair(true), before);
        st.online_update(&vec![vec![0.0; 3]; 9]).unwrap();
        assert_eq!(st.len(), 0);
        assert_eq!(st.pending_len(), 9);
    }

    #[test]
    fn forward_profile_dominates_bidirectional() {
        let set = random_set(200, 4, 6);
        let f = collapse(&set, Some(20), Direction::ForwardOnly, 2).unwrap();
        let b = collapse(&set, Some(20), Direction::Bidirectional, 2).unwrap();
        assert!(f.profile.iter().zip(&b.profile).all(|(x, y)| x >= y));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn batched_matches_collapse_prop(count in 40usize..400, tc in 2usize..20, extra in 1usize..50, seed in 0u64..1000) {
            let set = random_set(count, 3, seed);
            let t_lim = 2 * tc + extra;
            let full = collapse(&set, Some(tc), Direction::Bidirectional, 2).unwrap();
            let b = batched_collapse(&set, t_lim, tc, Direction::Bidirectional, 2).unwrap();
            prop_assert_eq!(b.profile, full);
        }

        #[test]
        fn online_matches_forward_collapse_prop(count in 20usize..300, tc in 3usize..30, chunk in 1usize..40, seed in 0u64..1000) {
            let set = random_set(count, 2, seed);
            let full = collapse(&set, Some(tc), Direction::ForwardOnly, 2).unwrap();
            let st = stream(&set, chunk, tc, Direction::ForwardOnly, 1);
            prop_assert_eq!(st.to_profile_pair(true), full);
        }
    }
}
