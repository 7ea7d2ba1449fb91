//! Acceptance suite. Every criterion runs in turn inside one test (the
//! heavier ones would otherwise compete for cores), prints a PASS/FAIL line
//! and the test fails if any criterion does.
//!
//! `cargo test -p lsuss-cli --test acceptance -- --nocapture`

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lsuss_core::arc::{arc_curve, cac, iac_empirical, iac_parabolic};
use lsuss_core::autoenc::{self, build_arch, gradient_check, train, Adam, AeModel, ArchKind, TrainConfig};
use lsuss_core::eval::{prediction_loss_mae, score_regimes, MaeWeighting};
use lsuss_core::extract::{lrea, ltea, rea, ChangePointSet, Extractor, RollingScaleParams};
use lsuss_core::io::{generate_synthetic, SynthSpec};
use lsuss_core::lsmp::{batched_collapse, collapse, latent_exclusion, LatentSet, LsmpState};
use lsuss_core::matprof::{brute_force_mp, stamp, Direction, ProfilePair, NO_NEIGHBOR};
use lsuss_core::pipeline::{run_fluss, run_lsuss, Algorithm, LsussOnline, PipelineConfig};
use lsuss_core::series::{apply_scaler, fit_scaler, window_all, ScalerKind, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(t0: Instant, budget: Duration) -> Result<(), String> {
    let took = t0.elapsed();
    ensure(took <= budget, || format!("took {took:.1?}, budget {budget:?}"))
}

fn random_walk(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x += rng.random::<f64>() - 0.5;
            x
        })
        .collect()
}

fn random_latents(count: usize, dim: usize, m: usize, seed: u64) -> LatentSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    LatentSet::from_vectors(vectors, m, count + m - 1).unwrap()
}

fn bit_equal(a: &ProfilePair, b: &ProfilePair) -> bool {
    a.index == b.index
        && a.profile.len() == b.profile.len()
        && a.profile.iter().zip(&b.profile).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn c1_stamp_matches_brute_force() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let m = [4, 8, 16][case % 3];
        let n = rng.random_range(4 * m..=1024);
        let tc = if case % 2 == 0 { None } else { Some(3 * m) };
        let series = random_walk(n, &mut rng);
        for dir in [Direction::Bidirectional, Direction::ForwardOnly] {
            let fast = stamp(&series, m, tc, dir).map_err(|e| e.to_string())?;
            let slow = brute_force_mp(&series, m, tc, dir).map_err(|e| e.to_string())?;
            ensure(fast.index == slow.index, || format!("case {case} (n {n}, m {m}, tc {tc:?}, {dir:?}): indices differ"))?;
            for (a, b) in fast.profile.iter().zip(&slow.profile) {
                if a.is_infinite() || b.is_infinite() {
                    ensure(a == b, || format!("case {case}: {a} vs {b}"))?;
                    continue;
                }
                worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    ensure(worst <= 1e-8, || format!("max relative error {worst:.3e}"))?;
    within_budget(t0, Duration::from_secs(60))?;
    Ok(format!("100 profiles, max relative error {worst:.2e}, {:.1?}", t0.elapsed()))
}

fn c2_batched_collapse_is_exact() -> Outcome {
    let set = random_latents(10_400, 8, 100, 2);
    let excl = latent_exclusion(&set);
    let tc = 500;
    let mut notes = Vec::new();
    for dir in [Direction::Bidirectional, Direction::ForwardOnly] {
        let full = collapse(&set, Some(tc), dir, excl).map_err(|e| e.to_string())?;
        for t_lim in [1001, 2600, 10_400] {
            let b = batched_collapse(&set, t_lim, tc, dir, excl).map_err(|e| e.to_string())?;
            ensure(bit_equal(&b.profile, &full), || format!("t_lim {t_lim} ({dir:?}) differs from the full collapse"))?;
            if dir == Direction::Bidirectional {
                notes.push(format!("t_lim {t_lim}: {} batches", b.batches));
            }
        }
    }
    Ok(notes.join(", "))
}

fn online_stream(set: &LatentSet, tc: usize, chunk: usize) -> ProfilePair {
    let mut st = LsmpState::new(set.dim(), set.m(), tc, Direction::ForwardOnly, 1).unwrap();
    let all: Vec<&[f64]> = set.vectors().collect();
    for part in all.chunks(chunk) {
        st.online_update(part).unwrap();
    }
    st.flush();
    st.to_profile_pair(true)
}

fn c3_online_matches_offline() -> Outcome {
    let tc = 60;
    let set = random_latents(1500, 4, 20, 3);
    let full = collapse(&set, Some(tc), Direction::ForwardOnly, latent_exclusion(&set)).map_err(|e| e.to_string())?;
    for chunk in [1, 7, tc] {
        ensure(bit_equal(&online_stream(&set, tc, chunk), &full), || format!("chunk {chunk} differs"))?;
    }

    let spec = SynthSpec {
        nc_informative: 2,
        regime_count: 4,
        regime_length_range: (600, 600),
        seed: 4,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let scaler = fit_scaler(ScalerKind::Standard, &data.series);
    let scaled = apply_scaler(&scaler, &data.series).map_err(|e| e.to_string())?;
    let mut model = AeModel::new(build_arch(ArchKind::FullyConnected, 2, 20).map_err(|e| e.to_string())?, 4);
    let cfg = TrainConfig {
        max_epochs: 10,
        batch_size: 32,
        seed: 4,
        ..TrainConfig::default()
    };
    train(&mut model, &window_all(&scaled, 20, 2).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
    let run = |eps: usize| {
        let cfg = PipelineConfig {
            algorithm: Algorithm::LsussOnline,
            nw: 20,
            tc: Some(150),
            extractor: Extractor::Ltea {
                local_window: 200,
                threshold: -1.0,
            },
            epsilon_batch: eps,
            ..PipelineConfig::default()
        };
        let mut s = LsussOnline::new(&cfg, model.clone(), Some(scaler.clone())).map_err(|e| e.to_string())?;
        s.push_series(&data.series).map_err(|e| e.to_string())?;
        s.finish().map_err(|e| e.to_string())
    };
    let one = run(1)?;
    let batched = run(64)?;
    let idx = |o: &lsuss_core::pipeline::StreamOutput| o.emissions.iter().map(|e| e.index).collect::<Vec<_>>();
    ensure(idx(&one) == idx(&batched), || format!("emissions {:?} vs {:?}", idx(&one), idx(&batched)))?;
    ensure(!one.emissions.is_empty(), || "no emissions to compare".into())?;
    Ok(format!("chunks 1/7/{tc} exact; {} emissions identical for epsilon 1 and 64", one.emissions.len()))
}

fn c4_arc_curves() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let len = rng.random_range(3..=512);
        let index: Vec<i64> = (0..len)
            .map(|_| {
                if rng.random::<f64>() < 0.05 {
                    NO_NEIGHBOR
                } else {
                    rng.random_range(0..len) as i64
                }
            })
            .collect();
        let ac = arc_curve(&index).map_err(|e| e.to_string())?;
        let oracle: Vec<u64> = (0..len)
            .map(|k| {
                index
                    .iter()
                    .enumerate()
                    .filter(|&(i, &j)| j != NO_NEIGHBOR && i.min(j as usize) < k && k < i.max(j as usize))
                    .count() as u64
            })
            .collect();
        ensure(ac.counts == oracle, || format!("case {case} (len {len}): arc curve differs from the oracle"))?;
        let iac = iac_parabolic(len).map_err(|e| e.to_string())?;
        let c = cac(&ac, &iac, rng.random_range(0..4)).map_err(|e| e.to_string())?;
        ensure(c.values.iter().all(|v| (0.0..=1.0).contains(v)), || format!("case {case}: CAC outside [0, 1]"))?;
    }
    let len = 400;
    let emp = iac_empirical(len, Direction::Bidirectional, None, 200, 4).map_err(|e| e.to_string())?;
    let peak = len as f64 / 2.0;
    let worst = emp
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - 2.0 * i as f64 * (len - i) as f64 / len as f64).abs() / peak)
        .fold(0.0, f64::max);
    ensure(worst < 0.05, || format!("empirical IAC off the parabola by {:.1}% of its peak", 100.0 * worst))?;
    Ok(format!("100 arc curves exact; empirical IAC within {:.2}% of the parabola peak", 100.0 * worst))
}

fn c5_gradients_and_adam() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut notes = Vec::new();
    for (kind, nc, nw) in [(ArchKind::FullyConnected, 3, 20), (ArchKind::Convolutional, 2, 16)] {
        let model = AeModel::new(build_arch(kind, nc, nw).map_err(|e| e.to_string())?, 7);
        let window: Vec<f64> = (0..nc * nw).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let r = gradient_check(&model, &window, 1e-4);
        ensure(r.passed, || format!("{kind:?}: max relative error {:.2e}", r.max_rel_error))?;
        notes.push(format!("{} {:.1e}", kind.name(), r.max_rel_error));
    }

    let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
    let (p0, target) = (0.8, -0.45);
    let g = p0 - target;
    let mut p = [p0];
    let mut opt = Adam::new(1, lr, b1, b2, eps);
    opt.step(&mut p, &[g]);
    let expected = p0 - lr * g / (g.abs() + eps);
    let err = (p[0] - expected).abs();
    ensure(err < 1e-6, || format!("Adam first step off by {err:.2e}"))?;
    Ok(format!("gradcheck {}; Adam first step error {err:.1e}", notes.join(", ")))
}

fn sinusoid(n: usize, nc: usize) -> TimeSeries {
    let chans = (0..nc)
        .map(|c| {
            (0..n)
                .map(|t| (t as f64 * 0.2 + c as f64).sin() + 0.5 * (t as f64 * 0.05).cos())
                .collect()
        })
        .collect();
    TimeSeries::from_channels(chans).unwrap()
}

fn c6_training_efficacy() -> Outcome {
    let ts = sinusoid(1200, 3);
    let subs = window_all(&ts, 24, 1).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<_, String> {
        let mut model = AeModel::new(build_arch(ArchKind::FullyConnected, 3, 24).map_err(|e| e.to_string())?, 1);
        let cfg = TrainConfig {
            max_epochs: 30,
            learning_rate: 5e-3,
            batch_size: 16,
            seed: 1,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &subs, &cfg).map_err(|e| e.to_string())?;
        let path = dir.path().join(name);
        autoenc::save(&model, &path).map_err(|e| e.to_string())?;
        Ok((report, std::fs::read(&path).map_err(|e| e.to_string())?))
    };
    let (report, a) = run("a.lsae")?;
    let (_, b) = run("b.lsae")?;
    let ratio = report.best_val_loss / report.initial_val_loss;
    ensure(ratio <= 0.5, || format!("validation loss only fell to {:.1}% of its initial value", 100.0 * ratio))?;
    ensure(a == b, || "model files differ between identical runs".into())?;
    Ok(format!(
        "validation loss {:.4} -> {:.4} ({:.1}%) over {} epochs; model files byte-identical",
        report.initial_val_loss,
        report.best_val_loss,
        100.0 * ratio,
        report.epochs_run
    ))
}

fn literal_rea(curve: &[f64], k: usize, nw: usize) -> Vec<usize> {
    let mut work = curve.to_vec();
    let mut out = Vec::new();
    for _ in 0..k {
        let mut p = None;
        for i in 0..work.len() {
            if work[i].is_finite() && p.is_none_or(|q: usize| work[i] < work[q]) {
                p = Some(i);
            }
        }
        let Some(p) = p else { break };
        out.push(p);
        for (i, v) in work.iter_mut().enumerate() {
            if i.abs_diff(p) <= 5 * nw {
                *v = f64::INFINITY;
            }
        }
    }
    out
}

fn literal_scale(curve: &[f64], w: usize) -> Vec<f64> {
    (0..curve.len())
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(curve.len() - 1);
            let win = &curve[lo..=hi];
            let mean = win.iter().sum::<f64>() / win.len() as f64;
            let sd = (win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / win.len() as f64).sqrt();
            if sd <= 1e-12 {
                0.0
            } else {
                (curve[i] - mean) / sd
            }
        })
        .collect()
}

fn literal_ltea(curve: &[f64], w: usize, threshold: f64, nw: usize) -> Vec<usize> {
    let scaled: Vec<f64> = literal_scale(curve, w)
        .into_iter()
        .map(|v| if v > threshold { 1.0 } else { v })
        .collect();
    let mut valleys: Vec<(usize, f64)> = Vec::new();
    let mut i = 0;
    while i < scaled.len() {
        if scaled[i] == 1.0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < scaled.len() && scaled[i] != 1.0 {
            i += 1;
        }
        let run = &scaled[start..i];
        let mut best = 0;
        for (j, v) in run.iter().enumerate() {
            if *v < run[best] {
                best = j;
            }
        }
        valleys.push((start + best, run[best]));
    }
    valleys.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let mut kept: Vec<usize> = Vec::new();
    for (p, _) in valleys {
        if kept.iter().all(|&q| p.abs_diff(q) > 5 * nw) {
            kept.push(p);
        }
    }
    kept
}

fn random_cac(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| 0.6 + 0.4 * rng.random::<f64>()).collect();
    for _ in 0..rng.random_range(1..6) {
        let at = rng.random_range(0..len);
        let depth = 0.2 + 0.5 * rng.random::<f64>();
        for (i, x) in v.iter_mut().enumerate() {
            let d = i.abs_diff(at) as f64 / 25.0;
            *x -= depth * (-d * d).exp();
        }
    }
    v.iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

fn c7_extractors() -> Outcome {
    let nw = 10;
    let mut curve = vec![1.0; 600];
    curve[100] = 0.1;
    curve[100 + 5 * nw] = 0.2;
    curve[100 + 5 * nw + 1] = 0.3;
    let got = rea(&curve, 2, nw).map_err(|e| e.to_string())?.indices;
    ensure(got == vec![100, 151], || format!("REA exclusion fixture gave {got:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let len = rng.random_range(300..1500);
        let c = random_cac(len, &mut rng);
        let k = rng.random_range(1..4);
        let w = rng.random_range(20..200);
        let found = rea(&c, k, nw).map_err(|e| e.to_string())?.indices;
        let mut oracle = literal_rea(&c, k, nw);
        oracle.sort_unstable();
        ensure(found == oracle, || format!("case {case}: REA {found:?} vs literal {oracle:?}"))?;
        ensure(found.windows(2).all(|p| p[1] - p[0] > 5 * nw), || format!("case {case}: REA points within 5 nw"))?;

        let params = RollingScaleParams::centered(w);
        let base = lrea(&c, k, nw, &params).map_err(|e| e.to_string())?.indices;
        let mut oracle = literal_rea(&literal_scale(&c, w), k, nw);
        oracle.sort_unstable();
        ensure(base == oracle, || format!("case {case}: LREA {base:?} vs literal {oracle:?}"))?;
        let (a, b) = (0.5 + 2.5 * rng.random::<f64>(), rng.random::<f64>() * 2.0 - 1.0);
        let moved: Vec<f64> = c.iter().map(|x| a * x + b).collect();
        let after = lrea(&moved, k, nw, &params).map_err(|e| e.to_string())?.indices;
        ensure(after == base, || format!("case {case}: LREA moved under x -> {a:.2} x + {b:.2}"))?;

        let threshold = -0.5 - 1.5 * rng.random::<f64>();
        let found = ltea(&c, &params, threshold, nw).map_err(|e| e.to_string())?.indices;
        let mut oracle = literal_ltea(&c, w, threshold, nw);
        oracle.sort_unstable();
        ensure(found == oracle, || format!("case {case}: LTEA {found:?} vs literal {oracle:?}"))?;
    }
    let flat = ltea(&vec![0.7; 500], &RollingScaleParams::centered(50), -1.0, nw).map_err(|e| e.to_string())?;
    ensure(flat.is_empty(), || "LTEA found valleys in a flat curve".into())?;
    let smooth: Vec<f64> = (0..500).map(|i| 0.5 + 0.01 * (i as f64 * 0.01).sin()).collect();
    let none = ltea(&smooth, &RollingScaleParams::centered(50), -5.0, nw).map_err(|e| e.to_string())?;
    ensure(none.is_empty(), || format!("LTEA below an unreachable threshold gave {:?}", none.indices))?;
    Ok("exclusion fixture, 50 random curves against literal REA/LREA/LTEA, affine invariance, empty LTEA".into())
}

fn c8_metrics() -> Outcome {
    let gt = ChangePointSet::ground_truth(vec![500, 1000]);
    let v = score_regimes(&gt, &gt, 1000).map_err(|e| e.to_string())?.value;
    ensure(v == 0.0, || format!("score of ground truth against itself is {v}"))?;
    let pred = ChangePointSet::ground_truth(vec![490, 980]);
    let v = score_regimes(&pred, &gt, 1000).map_err(|e| e.to_string())?.value;
    let worked = (10.0 + 20.0) / (2.0 * 1000.0);
    ensure((v - 0.015).abs() < 1e-12 && (v - worked).abs() < 1e-15, || format!("worked example gave {v}"))?;

    let mae = prediction_loss_mae(&pred, &gt, Some(1000), MaeWeighting::Literal).map_err(|e| e.to_string())?.value;
    ensure(mae == 0.0, || format!("literal MAE with equal counts is {mae}"))?;

    let gt3 = ChangePointSet::ground_truth(vec![100, 400, 700]);
    let pred1 = ChangePointSet::ground_truth(vec![380]);
    let plain = (280.0 + 20.0 + 320.0) / 3.0;
    let ratio: f64 = (1.0 - 1.0 / 3.0_f64).abs();
    let lit = prediction_loss_mae(&pred1, &gt3, Some(1000), MaeWeighting::Literal).map_err(|e| e.to_string())?.value;
    let one = prediction_loss_mae(&pred1, &gt3, Some(1000), MaeWeighting::OnePlus).map_err(|e| e.to_string())?.value;
    ensure((lit - ratio * plain).abs() < 1e-9, || format!("literal MAE {lit}, expected {}", ratio * plain))?;
    ensure((one - (1.0 + ratio) * plain).abs() < 1e-9, || format!("one-plus MAE {one}, expected {}", (1.0 + ratio) * plain))?;
    Ok(format!("self 0, worked example {v}, literal MAE 0 on equal counts, one-plus {one:.3}"))
}

fn c9_lsuss_beats_fluss() -> Outcome {
    let t0 = Instant::now();
    let nw = 20;
    let seeds = 20u64;
    let (mut wins, mut sum_f, mut sum_l) = (0, 0.0, 0.0);
    for seed in 0..seeds {
        let test = generate_synthetic(&SynthSpec::redundant_suite(seed)).map_err(|e| e.to_string())?;
        let train_set = generate_synthetic(&SynthSpec::redundant_suite(seed + 1000)).map_err(|e| e.to_string())?;
        let k = test.change_points.len();
        let n = test.series.len();
        let fcfg = PipelineConfig {
            algorithm: Algorithm::Fluss,
            nw,
            extractor: Extractor::Rea { k },
            seed,
            ..PipelineConfig::default()
        };
        let f = run_fluss(&test.series, &fcfg).map_err(|e| e.to_string())?;
        let fs = score_regimes(&f.change_points, &test.change_points, n).map_err(|e| e.to_string())?.value;

        let scaler = fit_scaler(ScalerKind::Standard, &train_set.series);
        let scaled = apply_scaler(&scaler, &train_set.series).map_err(|e| e.to_string())?;
        let mut model = AeModel::new(build_arch(ArchKind::Convolutional, test.series.nc(), nw).map_err(|e| e.to_string())?, seed);
        let tcfg = TrainConfig {
            max_epochs: 20,
            learning_rate: 1e-3,
            batch_size: 32,
            seed,
            ..TrainConfig::default()
        };
        train(&mut model, &window_all(&scaled, nw, 2).map_err(|e| e.to_string())?, &tcfg).map_err(|e| e.to_string())?;
        let lcfg = PipelineConfig {
            algorithm: Algorithm::Lsuss,
            nw,
            tc: Some(700),
            arch: ArchKind::Convolutional,
            extractor: Extractor::Rea { k },
            seed,
            ..PipelineConfig::default()
        };
        let l = run_lsuss(&test.series, &lcfg, &model, Some(&scaler)).map_err(|e| e.to_string())?;
        let ls = score_regimes(&l.change_points, &test.change_points, n).map_err(|e| e.to_string())?.value;
        if ls <= fs {
            wins += 1;
        }
        sum_f += fs;
        sum_l += ls;
    }
    let (mean_f, mean_l) = (sum_f / seeds as f64, sum_l / seeds as f64);
    let summary = format!(
        "LS-USS wins {wins}/{seeds}, mean score LS-USS {mean_l:.4} vs FLUSS {mean_f:.4}, {:.0?}",
        t0.elapsed()
    );
    ensure(wins as f64 >= 0.6 * seeds as f64 && mean_l < mean_f, || summary.clone())?;
    within_budget(t0, Duration::from_secs(600))?;
    Ok(summary)
}

fn lsuss_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lsuss"))
        .args(args)
        .env_remove("LSUSS_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("lsuss {}: {}", args[0], String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn c10_cli_chain() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (train_csv, test_csv) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    let (model, cps) = (dir.path().join("m.lsae"), dir.path().join("cps.txt"));
    lsuss_cli(&["synth", "--preset", "two-regime", "--seed", "101", "--out", p(&train_csv)])?;
    lsuss_cli(&["synth", "--preset", "two-regime", "--seed", "5", "--out", p(&test_csv)])?;
    lsuss_cli(&[
        "train", "--data", p(&train_csv), "--arch", "conv", "--nw", "20", "--epochs", "20", "--batch-size", "32",
        "--out", p(&model), "--seed", "3",
    ])?;
    lsuss_cli(&[
        "segment", "--data", p(&test_csv), "--algorithm", "lsuss", "--model", p(&model), "--tc", "400", "--k", "1",
        "--out", p(&cps),
    ])?;
    let gt = test_csv.with_extension("cps");
    let out = lsuss_cli(&["eval", "--pred", p(&cps), "--gt", p(&gt), "--data", p(&test_csv)])?;
    let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let score = v["value"].as_f64().ok_or("eval printed no value")?;
    ensure(score < 0.05, || format!("score {score}"))?;
    within_budget(t0, Duration::from_secs(120))?;
    Ok(format!("score {score:.4}, {:.1?}", t0.elapsed()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("STAMP equals brute force", c1_stamp_matches_brute_force),
        ("batched collapse is exact", c2_batched_collapse_is_exact),
        ("online profile equals offline", c3_online_matches_offline),
        ("arc curves and IAC", c4_arc_curves),
        ("gradients and Adam", c5_gradients_and_adam),
        ("training efficacy and determinism", c6_training_efficacy),
        ("extractors", c7_extractors),
        ("metrics", c8_metrics),
        ("LS-USS beats FLUSS on redundant channels", c9_lsuss_beats_fluss),
        ("CLI synth, train, segment, eval", c10_cli_chain),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                println!("criterion {n:>2} FAIL  {name}: {why}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
