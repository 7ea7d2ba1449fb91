use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Algorithm, PipelineConfig};
use crate::arc::{cac_value, iac_empirical_range, DEFAULT_IAC_TRIALS};
use crate::autoenc::AeModel;
use crate::error::{Error, Result};
use crate::extract::{ChangePointSet, Extractor, OnlineLtea};
use crate::lsmp::LsmpState;
use crate::matprof::{exclusion_radius, Direction, PairDistance, ZNormWindows, NO_NEIGHBOR};
use crate::series::{ScalerParams, TimeSeries};

const IAC_BLOCK: usize = 2048;

/// Incrementally finalized forward-only CAC.
///
/// Position `k` is final once every arc that could cross it is final and it
/// lies outside the right edge guard of the current curve. Final values
/// equal those of the batch CAC over any longer prefix.
#[derive(Debug, Clone)]
pub struct OnlineCac {
    tc: usize,
    edge_guard: usize,
    seed: u64,
    diff: Vec<i64>,
    run: i64,
    arcs: usize,
    iac: Vec<f64>,
    values: Vec<f64>,
}

impl OnlineCac {
    pub fn new(tc: usize, edge_guard: usize, seed: u64) -> Self {
        Self {
            tc,
            edge_guard,
            seed,
            diff: Vec::new(),
            run: 0,
            arcs: 0,
            iac: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `final_index` is the finalized prefix of a forward-only profile index
    /// whose current length is `total`.
    pub fn advance(&mut self, final_index: &[i64], total: usize) -> Result<()> {
        for (i, &j) in final_index.iter().enumerate().skip(self.arcs) {
            if j == NO_NEIGHBOR {
                continue;
            }
            let j = usize::try_from(j)
                .ok()
                .filter(|&j| j > i && j <= i + self.tc)
                .ok_or_else(|| Error::Internal(format!("forward arc {i} -> {j} outside the constraint")))?;
            if self.diff.len() <= j {
                self.diff.resize(j + 1, 0);
            }
            if j > i + 1 {
                self.diff[i + 1] += 1;
                self.diff[j] -= 1;
            }
        }
        self.arcs = final_index.len();
        let upto = final_index.len().min(total.saturating_sub(self.edge_guard));
        while self.iac.len() < upto {
            let lo = self.iac.len();
            let hi = lo + IAC_BLOCK;
            self.iac.extend(iac_empirical_range(
                hi + self.tc + 1,
                lo,
                hi,
                Direction::ForwardOnly,
                Some(self.tc),
                DEFAULT_IAC_TRIALS,
                self.seed,
            ));
        }
        for k in self.values.len()..upto {
            self.run += self.diff.get(k).copied().unwrap_or(0);
            let v = if k < self.edge_guard {
                1.0
            } else {
                cac_value(self.run as u64, self.iac[k])
            };
            self.values.push(v);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    pub index: usize,
    /// Samples consumed when the change-point was emitted.
    pub emitted_at: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamOutput {
    /// Finalized CAC prefix.
    pub cac: Vec<f64>,
    pub change_points: ChangePointSet,
    pub emissions: Vec<Emission>,
    pub samples: usize,
}

/// Forward-only nearest-neighbour profiles grown one sample at a time.
trait StreamProfiles {
    fn nc(&self) -> usize;
    fn append(&mut self, sample: &[f64]) -> Result<()>;
    fn curves(&self) -> usize;
    /// Finalized index prefix and current profile length of curve `c`.
    fn finalized(&self, c: usize) -> (&[i64], usize);
}

struct Engine<P> {
    profiles: P,
    tc: usize,
    local_window: usize,
    epsilon: usize,
    scaler: Option<ScalerParams>,
    cacs: Vec<OnlineCac>,
    mean: Vec<f64>,
    ltea: OnlineLtea,
    pending: Vec<f64>,
    samples: usize,
    emissions: Vec<Emission>,
}

impl<P: StreamProfiles> Engine<P> {
    fn new(profiles: P, cfg: &PipelineConfig, scaler: Option<ScalerParams>) -> Result<Self> {
        let tc = cfg.tc.ok_or_else(|| Error::InvalidConfig("streaming needs tc".into()))?;
        let Extractor::Ltea {
            local_window,
            threshold,
        } = cfg.extractor
        else {
            return Err(Error::InvalidConfig("streaming emits change-points with LTEA only".into()));
        };
        if let Some(s) = &scaler {
            if s.kind != crate::series::ScalerKind::None && s.nc() != profiles.nc() {
                return Err(Error::Shape(format!(
                    "scaler for {} channels on a {}-channel stream",
                    s.nc(),
                    profiles.nc()
                )));
            }
        }
        let cacs = (0..profiles.curves()).map(|_| OnlineCac::new(tc, cfg.nw, cfg.seed)).collect();
        Ok(Self {
            profiles,
            tc,
            local_window,
            epsilon: cfg.epsilon_batch,
            scaler,
            cacs,
            mean: Vec::new(),
            ltea: OnlineLtea::new(local_window, threshold, cfg.nw)?,
            pending: Vec::new(),
            samples: 0,
            emissions: Vec::new(),
        })
    }

    fn push(&mut self, sample: &[f64]) -> Result<Vec<Emission>> {
        let nc = self.profiles.nc();
        if sample.len() != nc {
            return Err(Error::Shape(format!("sample with {} values for {nc} channels", sample.len())));
        }
        if let Some(channel) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel,
                sample: self.samples + self.pending.len() / nc,
            });
        }
        self.pending.extend_from_slice(sample);
        if self.pending.len() >= self.epsilon * nc {
            self.flush()
        } else {
            Ok(Vec::new())
        }
    }

    fn flush(&mut self) -> Result<Vec<Emission>> {
        let nc = self.profiles.nc();
        let batch = std::mem::take(&mut self.pending);
        for raw in batch.chunks_exact(nc) {
            let mut s = raw.to_vec();
            if let Some(p) = &self.scaler {
                p.apply_sample(&mut s)?;
            }
            self.profiles.append(&s)?;
            self.samples += 1;
        }
        for (c, cac) in self.cacs.iter_mut().enumerate() {
            let (idx, total) = self.profiles.finalized(c);
            cac.advance(idx, total)?;
        }
        let upto = self.cacs.iter().map(|c| c.values().len()).min().unwrap_or(0);
        let n = self.cacs.len() as f64;
        for k in self.mean.len()..upto {
            let mut s = self.cacs[0].values()[k];
            for c in &self.cacs[1..] {
                s += c.values()[k];
            }
            self.mean.push(s / n);
        }
        let Some(horizon) = (self.samples.saturating_sub(1)).checked_sub(self.tc + self.local_window) else {
            return Ok(Vec::new());
        };
        let at = self.samples;
        let out: Vec<Emission> = self
            .ltea
            .advance(&self.mean, horizon)
            .into_iter()
            .map(|index| Emission { index, emitted_at: at })
            .collect();
        self.emissions.extend_from_slice(&out);
        Ok(out)
    }

    fn output(&self) -> StreamOutput {
        StreamOutput {
            cac: self.mean.clone(),
            change_points: self.ltea.change_points(),
            emissions: self.emissions.clone(),
            samples: self.samples,
        }
    }
}

fn push_series<P: StreamProfiles>(engine: &mut Engine<P>, ts: &TimeSeries) -> Result<Vec<Emission>> {
    let mut out = Vec::new();
    let mut sample = vec![0.0; ts.nc()];
    for t in 0..ts.len() {
        for (c, v) in sample.iter_mut().enumerate() {
            *v = ts.sample(c, t);
        }
        out.extend(engine.push(&sample)?);
    }
    Ok(out)
}

struct LatentProfiles {
    model: AeModel,
    nw: usize,
    history: Vec<VecDeque<f64>>,
    window: Vec<f64>,
    state: LsmpState,
}

impl StreamProfiles for LatentProfiles {
    fn nc(&self) -> usize {
        self.history.len()
    }

    fn append(&mut self, sample: &[f64]) -> Result<()> {
        for (h, &v) in self.history.iter_mut().zip(sample) {
            h.push_back(v);
            if h.len() > self.nw {
                h.pop_front();
            }
        }
        if self.history[0].len() == self.nw {
            for (c, h) in self.history.iter().enumerate() {
                for (dst, &v) in self.window[c * self.nw..(c + 1) * self.nw].iter_mut().zip(h) {
                    *dst = v;
                }
            }
            let z = self.model.encode(&self.window)?;
            self.state.online_update(&[z])?;
        }
        Ok(())
    }

    fn curves(&self) -> usize {
        1
    }

    fn finalized(&self, _: usize) -> (&[i64], usize) {
        (self.state.finalized_profile().1, self.state.len())
    }
}

/// LS-USS Online: ε-batched latent profile with forward-only arcs,
/// incrementally finalized CAC and trailing-window LTEA.
///
/// Samples are scaled with `scaler` when given and used as-is otherwise.
/// A change-point is emitted once its valley has closed and it lies at
/// least `tc + local_window` samples behind the newest sample.
pub struct LsussOnline {
    engine: Engine<LatentProfiles>,
}

impl LsussOnline {
    pub fn new(cfg: &PipelineConfig, model: AeModel, scaler: Option<ScalerParams>) -> Result<Self> {
        let cfg = PipelineConfig {
            algorithm: Algorithm::LsussOnline,
            ..cfg.clone()
        };
        cfg.validate()?;
        if model.arch.nw != cfg.nw {
            return Err(Error::Shape(format!("model window {} but nw {}", model.arch.nw, cfg.nw)));
        }
        let tc = cfg.tc.expect("validated");
        let nc = model.arch.nc;
        let profiles = LatentProfiles {
            nw: cfg.nw,
            history: vec![VecDeque::with_capacity(cfg.nw + 1); nc],
            window: vec![0.0; nc * cfg.nw],
            state: LsmpState::new(model.latent_dim(), cfg.nw, tc, Direction::ForwardOnly, 1)?,
            model,
        };
        Ok(Self {
            engine: Engine::new(profiles, &cfg, scaler)?,
        })
    }

    /// Consumes one sample (one value per channel).
    pub fn push(&mut self, sample: &[f64]) -> Result<Vec<Emission>> {
        self.engine.push(sample)
    }

    pub fn push_series(&mut self, ts: &TimeSeries) -> Result<Vec<Emission>> {
        push_series(&mut self.engine, ts)
    }

    /// Processes any partial ε-batch.
    pub fn flush(&mut self) -> Result<Vec<Emission>> {
        self.engine.flush()
    }

    pub fn finish(&mut self) -> Result<StreamOutput> {
        self.engine.flush()?;
        Ok(self.engine.output())
    }

    pub fn samples(&self) -> usize {
        self.engine.samples
    }

    pub fn finalized_cac(&self) -> &[f64] {
        &self.engine.mean
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.engine.emissions
    }

    /// Forward-only profile including provisional positions.
    pub fn profile_state(&self) -> &LsmpState {
        &self.engine.profiles.state
    }
}

struct ZnormProfiles {
    tc: usize,
    exclusion: usize,
    channels: Vec<ZNormWindows>,
    profile: Vec<Vec<f64>>,
    index: Vec<Vec<i64>>,
}

impl StreamProfiles for ZnormProfiles {
    fn nc(&self) -> usize {
        self.channels.len()
    }

    fn append(&mut self, sample: &[f64]) -> Result<()> {
        for (c, w) in self.channels.iter_mut().enumerate() {
            if !w.push(sample[c]) {
                continue;
            }
            let j = w.count() - 1;
            let (prof, idx) = (&mut self.profile[c], &mut self.index[c]);
            if j >= self.exclusion {
                for i in j.saturating_sub(self.tc)..=j - self.exclusion {
                    let d = w.distance(i, j);
                    if d < prof[i] {
                        prof[i] = d;
                        idx[i] = j as i64;
                    }
                }
            }
            prof.push(f64::INFINITY);
            idx.push(NO_NEIGHBOR);
        }
        Ok(())
    }

    fn curves(&self) -> usize {
        self.channels.len()
    }

    fn finalized(&self, c: usize) -> (&[i64], usize) {
        let len = self.index[c].len();
        (&self.index[c][..len.saturating_sub(self.tc)], len)
    }
}

/// Streaming FLOSS: per-channel forward-only z-normalized profiles, CAC
/// averaged over channels, trailing-window LTEA. Input is not rescaled.
pub struct FlossStream {
    engine: Engine<ZnormProfiles>,
}

impl FlossStream {
    pub fn new(cfg: &PipelineConfig, nc: usize) -> Result<Self> {
        let cfg = PipelineConfig {
            algorithm: Algorithm::Floss,
            ..cfg.clone()
        };
        cfg.validate()?;
        if nc == 0 {
            return Err(Error::InvalidArgument("stream needs at least one channel".into()));
        }
        let tc = cfg.tc.expect("validated");
        let profiles = ZnormProfiles {
            tc,
            exclusion: exclusion_radius(cfg.nw),
            channels: (0..nc).map(|_| ZNormWindows::new(cfg.nw)).collect::<Result<_>>()?,
            profile: vec![Vec::new(); nc],
            index: vec![Vec::new(); nc],
        };
        Ok(Self {
            engine: Engine::new(profiles, &cfg, None)?,
        })
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<Vec<Emission>> {
        self.engine.push(sample)
    }

    pub fn push_series(&mut self, ts: &TimeSeries) -> Result<Vec<Emission>> {
        push_series(&mut self.engine, ts)
    }

    pub fn flush(&mut self) -> Result<Vec<Emission>> {
        self.engine.flush()
    }

    pub fn finish(&mut self) -> Result<StreamOutput> {
        self.engine.flush()?;
        Ok(self.engine.output())
    }

    pub fn finalized_cac(&self) -> &[f64] {
        &self.engine.mean
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.engine.emissions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arc::cac_from_profile;
    use crate::autoenc::{build_arch, ArchKind};
    use crate::extract::{scale_cac, threshold_valleys, RollingScaleParams};
    use crate::lsmp::{collapse, encode_all, latent_exclusion};
    use crate::matprof::banded_profile;
    use crate::pipeline::{prepare, run_floss};
    use crate::series::{fit_scaler, window_all, ScalerKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn regimes(nc: usize, n: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chans = (0..nc)
            .map(|c| {
                (0..n)
                    .map(|t| {
                        let period = [16.0, 9.0, 23.0][(t / 400) % 3] + c as f64;
                        (2.0 * std::f64::consts::PI * t as f64 / period).sin() + 0.05 * rng.random::<f64>()
                    })
                    .collect()
            })
            .collect();
        TimeSeries::from_channels(chans).unwrap()
    }

    fn cfg(eps: usize) -> PipelineConfig {
        PipelineConfig {
            algorithm: Algorithm::LsussOnline,
            nw: 16,
            tc: Some(120),
            extractor: Extractor::Ltea {
                local_window: 150,
                threshold: -1.0,
            },
            epsilon_batch: eps,
            seed: 3,
            ..PipelineConfig::default()
        }
    }

    fn model(nc: usize) -> AeModel {
        AeModel::new(build_arch(ArchKind::FullyConnected, nc, 16).unwrap(), 9)
    }

    #[test]
    fn online_cac_matches_batch_prefix() {
        let ts = regimes(2, 1300, 1);
        let scaler = fit_scaler(ScalerKind::Standard, &ts);
        let mut online = LsussOnline::new(&cfg(1), model(2), Some(scaler.clone())).unwrap();
        online.push_series(&ts).unwrap();
        let out = online.finish().unwrap();

        let scaled = prepare(&ts, ScalerKind::Standard, Some(&scaler)).unwrap();
        let set = encode_all(&model(2), &window_all(&scaled, 16, 1).unwrap()).unwrap();
        let p = collapse(&set, Some(120), Direction::ForwardOnly, latent_exclusion(&set)).unwrap();
        let batch = cac_from_profile(&p, 16, 3).unwrap().values;
        let f = out.cac.len();
        assert_eq!(f, set.len() - 120);
        assert_eq!(out.cac[..], batch[..f]);

        // Same trailing LTEA on the batch prefix.
        let mut reference = OnlineLtea::new(150, -1.0, 16).unwrap();
        reference.advance(&batch[..f], 1300 - 1 - 120 - 150);
        assert_eq!(out.change_points.indices, reference.emitted());
        assert!(!out.change_points.is_empty());
    }

    #[test]
    fn epsilon_batch_invariance() {
        let ts = regimes(1, 1300, 2);
        let run = |eps| {
            let mut o = LsussOnline::new(&cfg(eps), model(1), None).unwrap();
            o.push_series(&ts).unwrap();
            o.finish().unwrap()
        };
        let a = run(1);
        let b = run(64);
        let c = run(100);
        assert_eq!(a.cac, b.cac);
        assert_eq!(a.change_points, b.change_points);
        assert_eq!(a.change_points, c.change_points);
        for w in a.emissions.windows(2) {
            assert!(w[0].index < w[1].index && w[0].emitted_at <= w[1].emitted_at);
        }
    }

    #[test]
    fn intermediate_cac_matches_full_recompute() {
        let ts = regimes(1, 900, 4);
        let mut o = LsussOnline::new(&cfg(7), model(1), None).unwrap();
        let mut sample = [0.0];
        for t in 0..ts.len() {
            sample[0] = ts.sample(0, t);
            o.push(&sample).unwrap();
            if t % 97 == 0 && o.profile_state().len() > 40 {
                let p = o.profile_state().to_profile_pair(true);
                let full = cac_from_profile(&p, 16, 3).unwrap().values;
                let f = o.finalized_cac();
                assert_eq!(f, &full[..f.len()]);
            }
        }
    }

    #[test]
    fn no_emission_before_horizon() {
        let ts = regimes(1, 1300, 5);
        let mut o = LsussOnline::new(&cfg(1), model(1), None).unwrap();
        let mut sample = [0.0];
        for t in 0..ts.len() {
            sample[0] = ts.sample(0, t);
            for e in o.push(&sample).unwrap() {
                assert!(e.emitted_at >= 120 + 150);
                assert!(e.index + 120 + 150 < e.emitted_at);
            }
        }
    }

    #[test]
    fn prefix_determinism() {
        let ts = regimes(1, 1300, 6);
        let mut full = LsussOnline::new(&cfg(5), model(1), None).unwrap();
        full.push_series(&ts).unwrap();
        let mut part = LsussOnline::new(&cfg(5), model(1), None).unwrap();
        part.push_series(&ts.slice(0, 1000).unwrap()).unwrap();
        let cut: Vec<Emission> = full.emissions().iter().copied().filter(|e| e.emitted_at <= 1000).collect();
        assert_eq!(part.emissions(), &cut[..]);
    }

    #[test]
    fn floss_stream_equals_batch() {
        let ts = regimes(2, 1300, 7);
        let c = PipelineConfig {
            algorithm: Algorithm::Floss,
            ..cfg(13)
        };
        let mut s = FlossStream::new(&c, 2).unwrap();
        s.push_series(&ts).unwrap();
        let out = s.finish().unwrap();
        let batch = run_floss(&ts, &c).unwrap();
        assert_eq!(out.cac[..], batch.curve[..out.cac.len()]);
        assert_eq!(out.cac.len(), ts.len() - 16 + 1 - 120);
        let p = banded_profile(ts.channel(0), 16, Some(120), Direction::ForwardOnly).unwrap();
        assert!(p.index.iter().enumerate().all(|(i, &j)| j < 0 || j as usize > i));
    }

    #[test]
    fn streaming_ltea_valleys_are_closed() {
        let ts = regimes(1, 1300, 8);
        let mut o = LsussOnline::new(&cfg(1), model(1), None).unwrap();
        o.push_series(&ts).unwrap();
        let out = o.finish().unwrap();
        let scaled = scale_cac(&out.cac, &RollingScaleParams::trailing(150)).unwrap();
        let valleys: Vec<usize> = threshold_valleys(&scaled, -1.0).iter().map(|v| v.0).collect();
        assert!(out.change_points.indices.iter().all(|p| valleys.contains(p)));
    }

    #[test]
    fn rejects_bad_samples() {
        let mut o = LsussOnline::new(&cfg(1), model(2), None).unwrap();
        assert!(matches!(o.push(&[1.0]), Err(Error::Shape(_))));
        assert!(matches!(o.push(&[1.0, f64::NAN]), Err(Error::NonFinite { channel: 1, sample: 0 })));
    }
}
