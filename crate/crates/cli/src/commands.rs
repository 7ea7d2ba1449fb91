use std::collections::{HashMap, HashSet};
use std::path::Path;

use lsuss_core::autoenc::{self, build_arch, round_conv_window, AeModel, ArchKind, FlatWindows, TrainConfig, TrainReport};
use lsuss_core::eval::{
    config_key, evaluate_split, expand_grid, grid_search, local_window_from_train, prediction_loss_mae, score_regimes,
    GridSpec, MaeWeighting,
};
use lsuss_core::extract::{ChangePointSet, CpSource};
use lsuss_core::io::{
    generate_synthetic, labels_path, read_labels, write_change_points, write_curve, write_delimited, write_json,
    write_labels, Split, SynthSpec,
};
use lsuss_core::pipeline::{self, Algorithm, Emission, FlossStream, LsussOnline, PipelineConfig, StreamOutput};
use lsuss_core::series::{apply_scaler, fit_scaler_named, window_all, ScalerKind, ScalerParams, TimeSeries};
use lsuss_core::{Error, Result};

use crate::args::{
    Cli, Command, EvalArgs, EvalSplit, FitArgs, GlobalArgs, GridArgs, MetricArg, Preset, SegmentArgs, StreamArgs, SynthArgs,
    TrainArgs, WeightingArg,
};
use crate::config::{apply_overrides, echo, read_json, resolve_pipeline, resolve_unchecked};
use crate::data::{self, scaler_path};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Train(a) => train(g, a),
        Command::Segment(a) => segment(g, a),
        Command::Stream(a) => stream(g, a),
        Command::Eval(a) => eval(a),
        Command::Gridsearch(a) => gridsearch(g, a),
        Command::Synth(a) => synth(g, a),
    }
}

fn weighting(w: WeightingArg) -> MaeWeighting {
    match w {
        WeightingArg::Literal => MaeWeighting::Literal,
        WeightingArg::OnePlus => MaeWeighting::OnePlus,
    }
}

struct Fitted {
    model: AeModel,
    scaler: ScalerParams,
    report: TrainReport,
}

/// Fits the scaler on the concatenated training series and trains on the
/// windows of each series separately, so no window spans two recordings.
fn fit_model(
    series: &[&TimeSeries],
    arch: ArchKind,
    nw: usize,
    scaler: ScalerKind,
    fit: &FitArgs,
    seed: u64,
    overrides: &[String],
) -> Result<Fitted> {
    let parts: Vec<TimeSeries> = series.iter().map(|s| (*s).clone()).collect();
    let joined = TimeSeries::concat(&parts)?;
    let params = fit_scaler_named(scaler, &joined, "train");
    let arch = build_arch(arch, joined.nc(), nw)?;
    let dim = joined.nc() * nw;
    let mut flat = Vec::new();
    for s in &parts {
        if s.len() < nw {
            log::warn!("skipping a {}-sample training series shorter than nw = {nw}", s.len());
            continue;
        }
        let scaled = apply_scaler(&params, s)?;
        flat.extend(window_all(&scaled, nw, fit.train_step)?.to_flat());
    }
    if flat.len() < 2 * dim {
        return Err(Error::InsufficientData(format!(
            "need at least two training windows of {nw} samples"
        )));
    }
    let cfg = TrainConfig {
        learning_rate: fit.lr,
        batch_size: fit.batch_size,
        max_epochs: fit.epochs,
        patience: fit.patience,
        val_fraction: fit.val_fraction,
        seed,
        ..TrainConfig::default()
    };
    let cfg = apply_overrides(cfg, overrides)?;
    cfg.validate()?;
    echo("training config", &cfg);
    let mut model = AeModel::new(arch, seed);
    let report = autoenc::train(&mut model, &FlatWindows { data: &flat, dim }, &cfg)?;
    Ok(Fitted {
        model,
        scaler: params,
        report,
    })
}

fn train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    eprintln!("seed: {seed}");
    echo(
        "model",
        &serde_json::json!({"arch": a.arch, "nw": a.nw, "scaler": a.scaler, "data": a.data.data}),
    );
    let all = data::load(&a.data.data, a.data.format)?;
    let train: Vec<&TimeSeries> = data::select(&all, Split::Train).into_iter().map(|s| &s.series).collect();
    let f = fit_model(&train, a.arch, a.nw, a.scaler, &a.fit, seed, &g.overrides)?;
    autoenc::save(&f.model, &a.out)?;
    write_json(&scaler_path(&a.out), &f.scaler)?;
    let r = &f.report;
    println!("windows: {} train, {} val", r.n_train, r.n_val);
    println!("initial val loss: {:.6e}", r.initial_val_loss);
    println!("final train loss: {:.6e}", r.final_train_loss().unwrap_or(f64::NAN));
    println!("final val loss: {:.6e}", r.history.last().map_or(f64::NAN, |e| e.val_loss));
    println!("best val loss: {:.6e} (epoch {} of {})", r.best_val_loss, r.best_epoch, r.epochs_run);
    println!("model: {}", a.out.display());
    Ok(())
}

fn load_model(path: Option<&Path>) -> Result<(Option<AeModel>, Option<ScalerParams>)> {
    let Some(p) = path else {
        return Ok((None, None));
    };
    let model = autoenc::load(p)?;
    let sp = scaler_path(p);
    let scaler = if sp.exists() {
        Some(read_json::<ScalerParams>(&sp)?)
    } else {
        log::warn!("no scaler next to the model ({}); scaling on the input itself", sp.display());
        None
    };
    Ok((Some(model), scaler))
}

fn from_model(model: &Option<AeModel>, scaler: &Option<ScalerParams>) -> impl FnOnce(&mut PipelineConfig) {
    let arch = model.as_ref().map(|m| (m.arch.nw, m.arch.kind));
    let kind = scaler.as_ref().map(|s| s.kind);
    move |c: &mut PipelineConfig| {
        if let Some((nw, kind)) = arch {
            c.nw = nw;
            c.arch = kind;
        }
        if let Some(k) = kind {
            c.scaler = k;
        }
    }
}

/// The stored scaler, unless the run asks for a different kind.
fn matching_scaler(scaler: Option<ScalerParams>, cfg: &PipelineConfig) -> Option<ScalerParams> {
    scaler.filter(|s| {
        let same = s.kind == cfg.scaler;
        if !same {
            log::warn!("stored scaler is {:?} but the run asks for {:?}; refitting on the input", s.kind, cfg.scaler);
        }
        same
    })
}

fn segment(g: &GlobalArgs, a: &SegmentArgs) -> Result<()> {
    let ls = data::load_one(&a.data)?;
    let (model, scaler) = load_model(a.model.as_deref())?;
    let cfg = resolve_pipeline(g, &a.pipeline, from_model(&model, &scaler))?;
    eprintln!("seed: {}", cfg.seed);
    echo("config", &cfg);
    let scaler = matching_scaler(scaler, &cfg);
    let seg = pipeline::run(&ls.series, &cfg, model.as_ref(), scaler.as_ref())?;
    write_change_points(&a.out, &seg.change_points)?;
    if let Some(c) = &a.curve {
        write_curve(c, &seg.curve)?;
    }
    for i in &seg.change_points.indices {
        println!("{i}");
    }
    Ok(())
}

#[allow(clippy::large_enum_variant)]
enum Streamer {
    Latent(LsussOnline),
    Floss(FlossStream),
}

impl Streamer {
    fn push(&mut self, sample: &[f64]) -> Result<Vec<Emission>> {
        match self {
            Streamer::Latent(s) => s.push(sample),
            Streamer::Floss(s) => s.push(sample),
        }
    }

    fn finish(&mut self) -> Result<StreamOutput> {
        match self {
            Streamer::Latent(s) => s.finish(),
            Streamer::Floss(s) => s.finish(),
        }
    }

    fn emissions(&self) -> &[Emission] {
        match self {
            Streamer::Latent(s) => s.emissions(),
            Streamer::Floss(s) => s.emissions(),
        }
    }

    fn finalized_cac(&self) -> &[f64] {
        match self {
            Streamer::Latent(s) => s.finalized_cac(),
            Streamer::Floss(s) => s.finalized_cac(),
        }
    }
}

fn stream(g: &GlobalArgs, a: &StreamArgs) -> Result<()> {
    let ls = data::load_one(&a.data)?;
    let ts = &ls.series;
    let (model, scaler) = load_model(a.model.as_deref())?;
    let fill = from_model(&model, &scaler);
    let cfg = resolve_pipeline(g, &a.pipeline, |c| {
        c.algorithm = Algorithm::LsussOnline;
        fill(c);
    })?;
    eprintln!("seed: {}", cfg.seed);
    echo("config", &cfg);
    let mut s = match cfg.algorithm {
        Algorithm::LsussOnline => {
            let model = model
                .ok_or_else(|| Error::InvalidConfig("lsuss_online needs --model".into()))?;
            let scaler = matching_scaler(scaler, &cfg);
            Streamer::Latent(LsussOnline::new(&cfg, model, scaler)?)
        }
        Algorithm::Floss => Streamer::Floss(FlossStream::new(&cfg, ts.nc())?),
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} cannot stream; use lsuss_online or floss",
                other.name()
            )))
        }
    };
    let n = a.limit.map_or(ts.len(), |l| l.min(ts.len()));
    let mut sample = vec![0.0; ts.nc()];
    let mut printed = 0;
    for t in 0..n {
        for (c, v) in sample.iter_mut().enumerate() {
            *v = ts.sample(c, t);
        }
        for e in s.push(&sample)? {
            println!("{} {}", e.index, e.emitted_at);
            printed += 1;
        }
    }
    let (cps, cac) = if n < ts.len() {
        eprintln!("stopped after {n} of {} samples", ts.len());
        let idx: Vec<usize> = s.emissions().iter().map(|e| e.index).collect();
        (ChangePointSet::new(idx, CpSource::Ltea, None), s.finalized_cac().to_vec())
    } else {
        let out = s.finish()?;
        for e in &out.emissions[printed..] {
            println!("{} {}", e.index, e.emitted_at);
        }
        (out.change_points, out.cac)
    };
    if let Some(p) = &a.out {
        write_change_points(p, &cps)?;
    }
    if let Some(p) = &a.curve {
        write_curve(p, &cac)?;
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let n = match (a.n, &a.data) {
        (Some(n), _) => n,
        (None, Some(d)) => data::load_one(d)?.series.len(),
        (None, None) => return Err(Error::InvalidConfig("eval needs --n or --data".into())),
    };
    let gt = ChangePointSet::ground_truth(read_labels(&a.gt, n)?);
    let pred = ChangePointSet::new(read_labels(&a.pred, n)?, CpSource::Imported, None);
    let result = match a.metric {
        MetricArg::ScoreRegimes => score_regimes(&pred, &gt, n)?,
        MetricArg::PredictionLossMae => prediction_loss_mae(&pred, &gt, Some(n), weighting(a.weighting))?,
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    if let Some(p) = &a.out {
        write_json(p, &result)?;
    }
    Ok(())
}

type ModelKey = (ScalerKind, usize, ArchKind);

fn gridsearch(g: &GlobalArgs, a: &GridArgs) -> Result<()> {
    let all = data::load(&a.data.data, a.data.format)?;
    let train = data::select(&all, Split::Train);
    let val = data::select(
        &all,
        match a.eval_split {
            EvalSplit::Val => Split::Val,
            EvalSplit::Test => Split::Test,
        },
    );
    let mut spec: GridSpec = read_json(&a.grid)?;
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    eprintln!("seed: {}", spec.seed);
    let base = resolve_unchecked(g, &a.pipeline, |_| {})?;
    let train_gt: Vec<ChangePointSet> = train.iter().map(|s| s.change_points.clone()).collect();
    let local_window = local_window_from_train(&train_gt).unwrap_or_else(|e| {
        let w = 10 * spec.axes.nw.first().copied().unwrap_or(base.nw);
        log::warn!("local window from training labels unavailable ({e}); using {w}");
        w
    });
    eprintln!("local window: {local_window}");

    let mut seen = HashSet::new();
    let mut configs = Vec::new();
    for mut cfg in expand_grid(&base, &spec, local_window)? {
        if cfg.algorithm.needs_model() && cfg.arch == ArchKind::Convolutional && cfg.nw % 4 != 0 {
            let nw = round_conv_window(cfg.nw);
            log::warn!("convolutional grid cell: nw {} rounded down to {nw}", cfg.nw);
            cfg.nw = nw;
        }
        if seen.insert(config_key(&cfg)) {
            configs.push(cfg);
        }
    }
    echo("grid", &spec);
    eprintln!("{} configurations", configs.len());

    let mut models: HashMap<ModelKey, std::result::Result<(AeModel, ScalerParams), String>> = HashMap::new();
    if base.algorithm.needs_model() {
        let series: Vec<&TimeSeries> = train.iter().map(|s| &s.series).collect();
        for cfg in &configs {
            let key = (cfg.scaler, cfg.nw, cfg.arch);
            if models.contains_key(&key) {
                continue;
            }
            let fitted = fit_model(&series, cfg.arch, cfg.nw, cfg.scaler, &a.fit, spec.seed, &g.overrides)
                .map(|f| (f.model, f.scaler))
                .map_err(|e| e.to_string());
            models.insert(key, fitted);
        }
    }
    let pairs: Vec<(&TimeSeries, &ChangePointSet)> = val.iter().map(|s| (&s.series, &s.change_points)).collect();
    let w = weighting(a.weighting);
    let records = grid_search(&configs, |cfg: &PipelineConfig| {
        cfg.validate()?;
        match models.get(&(cfg.scaler, cfg.nw, cfg.arch)) {
            Some(Ok((m, s))) => evaluate_split(&pairs, cfg, Some(m), Some(s), w),
            Some(Err(msg)) => Err(Error::InvalidConfig(format!("model training failed: {msg}"))),
            None => evaluate_split(&pairs, cfg, None, None, w),
        }
    })?;
    write_json(&a.out, &records)?;
    for r in &records {
        println!("{} {:.6e} {}", r.rank, r.value, config_key(&r.config));
    }
    Ok(())
}

fn synth(g: &GlobalArgs, a: &SynthArgs) -> Result<()> {
    let mut spec = match (&a.spec, a.preset) {
        (Some(p), _) => read_json::<SynthSpec>(p)?,
        (None, Some(Preset::TwoRegime)) => SynthSpec::two_regime(0),
        (None, Some(Preset::RedundantSuite)) => SynthSpec::redundant_suite(0),
        (None, None) => SynthSpec::default(),
    };
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let spec = apply_overrides(spec, &g.overrides)?;
    eprintln!("seed: {}", spec.seed);
    echo("spec", &spec);
    let ls = generate_synthetic(&spec)?;
    write_delimited(&a.out, &ls.series)?;
    write_labels(&labels_path(&a.out), &ls.change_points)?;
    println!(
        "{} samples x {} channels, change-points {:?}",
        ls.series.len(),
        ls.series.nc(),
        ls.change_points.indices
    );
    Ok(())
}
