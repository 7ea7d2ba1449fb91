use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LabeledSeries, Split};
use crate::error::{Error, Result};
use crate::extract::ChangePointSet;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegimeGenerator {
    /// `amp * sin(2 pi freq t + phase)`, `freq` in cycles per sample.
    Sine { freq: f64, amp: f64 },
    /// Unit-variance AR(1) process.
    Ar1 { phi: f64 },
    Noise { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub nc_informative: usize,
    pub nc_noise: usize,
    /// Copies of informative channels with fresh noise added.
    pub nc_redundant: usize,
    pub regime_count: usize,
    /// Inclusive range regime lengths are drawn from.
    pub regime_length_range: (usize, usize),
    /// Generator of regime `r` is `generators[r % len]`; a default pool is
    /// used when empty.
    pub generators: Vec<RegimeGenerator>,
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            nc_informative: 1,
            nc_noise: 0,
            nc_redundant: 0,
            regime_count: 2,
            regime_length_range: (500, 500),
            generators: Vec::new(),
            noise_level: 0.1,
            seed: 0,
        }
    }
}

const DEFAULT_POOL: [RegimeGenerator; 4] = [
    RegimeGenerator::Sine { freq: 0.05, amp: 1.0 },
    RegimeGenerator::Ar1 { phi: 0.9 },
    RegimeGenerator::Sine { freq: 0.11, amp: 1.5 },
    RegimeGenerator::Sine { freq: 0.025, amp: 0.7 },
];

impl SynthSpec {
    /// Two informative channels, two regimes of 500 samples.
    pub fn two_regime(seed: u64) -> Self {
        Self {
            nc_informative: 2,
            seed,
            ..Self::default()
        }
    }

    /// Three informative, three redundant and three noise channels, four
    /// regimes.
    pub fn redundant_suite(seed: u64) -> Self {
        Self {
            nc_informative: 3,
            nc_noise: 3,
            nc_redundant: 3,
            regime_count: 4,
            regime_length_range: (400, 700),
            noise_level: 0.2,
            seed,
            ..Self::default()
        }
    }

    pub fn nc(&self) -> usize {
        self.nc_informative + self.nc_redundant + self.nc_noise
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.regime_length_range;
        if self.regime_count < 2 {
            return Err(Error::InvalidConfig("regime_count must be at least 2".into()));
        }
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(format!("bad regime length range ({lo}, {hi})")));
        }
        if self.nc() == 0 {
            return Err(Error::InvalidConfig("synthetic series needs at least one channel".into()));
        }
        if self.nc_redundant > 0 && self.nc_informative == 0 {
            return Err(Error::InvalidConfig("redundant channels copy informative ones".into()));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(Error::InvalidConfig("noise_level must be finite and non-negative".into()));
        }
        for g in &self.generators {
            let ok = match *g {
                RegimeGenerator::Sine { freq, amp } => freq.is_finite() && amp.is_finite(),
                RegimeGenerator::Ar1 { phi } => phi.abs() < 1.0,
                RegimeGenerator::Noise { sigma } => sigma.is_finite() && sigma >= 0.0,
            };
            if !ok {
                return Err(Error::InvalidConfig(format!("invalid generator {g:?}")));
            }
        }
        Ok(())
    }
}

fn fill(out: &mut [f64], g: RegimeGenerator, channel: usize, rng: &mut ChaCha8Rng) {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    match g {
        RegimeGenerator::Sine { freq, amp } => {
            let f = freq * (1.0 + 0.15 * channel as f64);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            for (t, v) in out.iter_mut().enumerate() {
                *v = amp * (std::f64::consts::TAU * f * t as f64 + phase).sin();
            }
        }
        RegimeGenerator::Ar1 { phi } => {
            let scale = (1.0 - phi * phi).sqrt();
            let mut x = std_normal.sample(rng);
            for v in out.iter_mut() {
                x = phi * x + scale * std_normal.sample(rng);
                *v = x;
            }
        }
        RegimeGenerator::Noise { sigma } => {
            for v in out.iter_mut() {
                *v = sigma * std_normal.sample(rng);
            }
        }
    }
}

/// Seeded series whose informative channels switch generators at regime
/// boundaries. Noise channels are unit white noise throughout; redundant
/// channels copy informative channel `c mod nc_informative` plus fresh noise
/// at `noise_level`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<LabeledSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.regime_length_range;
    let lengths: Vec<usize> = (0..spec.regime_count).map(|_| rng.random_range(lo..=hi)).collect();
    let n: usize = lengths.iter().sum();
    let pool: &[RegimeGenerator] = if spec.generators.is_empty() {
        &DEFAULT_POOL
    } else {
        &spec.generators
    };
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut channels = Vec::with_capacity(spec.nc());
    for c in 0..spec.nc_informative {
        let mut ch = vec![0.0; n];
        let mut at = 0;
        for (r, &len) in lengths.iter().enumerate() {
            fill(&mut ch[at..at + len], pool[r % pool.len()], c, &mut rng);
            at += len;
        }
        for v in &mut ch {
            *v += spec.noise_level * noise.sample(&mut rng);
        }
        channels.push(ch);
    }
    for c in 0..spec.nc_redundant {
        let src = &channels[c % spec.nc_informative];
        let ch: Vec<f64> = src.iter().map(|v| v + spec.noise_level * noise.sample(&mut rng)).collect();
        channels.push(ch);
    }
    for _ in 0..spec.nc_noise {
        channels.push((0..n).map(|_| noise.sample(&mut rng)).collect());
    }
    let names = (0..spec.nc_informative)
        .map(|c| format!("informative_{c}"))
        .chain((0..spec.nc_redundant).map(|c| format!("redundant_{c}")))
        .chain((0..spec.nc_noise).map(|c| format!("noise_{c}")))
        .collect();
    let cps: Vec<usize> = lengths
        .iter()
        .scan(0, |acc, &l| {
            *acc += l;
            Some(*acc)
        })
        .take(spec.regime_count - 1)
        .collect();
    Ok(LabeledSeries {
        series: TimeSeries::from_channels(channels)?.with_channel_names(names)?,
        change_points: ChangePointSet::ground_truth(cps),
        split: Split::Test,
        subject_id: format!("synth_{}", spec.seed),
        labels_missing: false,
    })
}
