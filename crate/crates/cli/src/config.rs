use std::fs;
use std::path::Path;

use lsuss_core::extract::{Extractor, DEFAULT_THRESHOLD};
use lsuss_core::eval::ExtractorKind;
use lsuss_core::pipeline::PipelineConfig;
use lsuss_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::args::{GlobalArgs, PipelineArgs};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Applies `key=value` pairs to a serializable value. Dotted keys walk
/// nested objects; a value that is not valid JSON is taken as a string.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(base: T, overrides: &[String]) -> Result<T> {
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut v = serde_json::to_value(base)?;
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override '{o}' is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut v;
        for part in key.split('.') {
            let obj = slot
                .as_object_mut()
                .ok_or_else(|| Error::InvalidConfig(format!("override '{key}': '{part}' is not inside an object")))?;
            slot = obj.entry(part.to_string()).or_insert(Value::Null);
        }
        *slot = value;
    }
    serde_json::from_value(v).map_err(|e| Error::InvalidConfig(format!("after overrides: {e}")))
}

fn local_window_of(e: &Extractor) -> Option<usize> {
    match *e {
        Extractor::Rea { .. } => None,
        Extractor::Lrea { local_window, .. } | Extractor::Ltea { local_window, .. } => Some(local_window),
    }
}

/// Defaults, then `--config`, then `fallback` (values taken from a model),
/// then flags, then `--set`; validated.
pub fn resolve_pipeline(
    global: &GlobalArgs,
    args: &PipelineArgs,
    fallback: impl FnOnce(&mut PipelineConfig),
) -> Result<PipelineConfig> {
    let cfg = resolve_unchecked(global, args, fallback)?;
    cfg.validate()?;
    Ok(cfg)
}

/// As [`resolve_pipeline`] without validation, for grid bases that the
/// axes complete.
pub fn resolve_unchecked(
    global: &GlobalArgs,
    args: &PipelineArgs,
    fallback: impl FnOnce(&mut PipelineConfig),
) -> Result<PipelineConfig> {
    let from_file = global.config.is_some();
    let mut cfg: PipelineConfig = match &global.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    fallback(&mut cfg);
    if let Some(a) = args.algorithm {
        cfg.algorithm = a;
    }
    if let Some(nw) = args.nw {
        cfg.nw = nw;
    }
    if args.tc.is_some() {
        cfg.tc = args.tc;
    }
    if args.step.is_some() {
        cfg.step = args.step;
    }
    if let Some(s) = args.scaler {
        cfg.scaler = s;
    }
    if let Some(a) = args.arch {
        cfg.arch = a;
    }
    if let Some(e) = args.epsilon_batch {
        cfg.epsilon_batch = e;
    }
    if args.t_lim.is_some() {
        cfg.t_lim = args.t_lim;
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }

    let touched = args.k.is_some() || args.extractor.is_some() || args.local_window.is_some() || args.threshold.is_some();
    if touched || !from_file {
        let kind = args.extractor.unwrap_or(if args.k.is_some() {
            ExtractorKind::Rea
        } else {
            ExtractorKind::Ltea
        });
        let local_window = args
            .local_window
            .or_else(|| from_file.then(|| local_window_of(&cfg.extractor)).flatten())
            .unwrap_or(10 * cfg.nw);
        let threshold = match (args.threshold, cfg.extractor) {
            (Some(t), _) => t,
            (None, Extractor::Ltea { threshold, .. }) if from_file => threshold,
            _ => DEFAULT_THRESHOLD,
        };
        cfg.extractor = match kind {
            ExtractorKind::Rea | ExtractorKind::Lrea => {
                let k = args.k.ok_or_else(|| {
                    Error::InvalidConfig(format!("--extractor {kind:?} needs --k").to_lowercase())
                })?;
                if kind == ExtractorKind::Rea {
                    Extractor::Rea { k }
                } else {
                    Extractor::Lrea { k, local_window }
                }
            }
            ExtractorKind::Ltea => {
                if args.k.is_some() {
                    return Err(Error::InvalidConfig("--k does not apply to LTEA".into()));
                }
                Extractor::Ltea { local_window, threshold }
            }
        };
    }
    apply_overrides(cfg, &global.overrides)
}

/// Prints the resolved configuration to stderr.
pub fn echo<T: Serialize>(what: &str, value: &T) {
    match serde_json::to_string(value) {
        Ok(s) => eprintln!("resolved {what}: {s}"),
        Err(e) => eprintln!("resolved {what}: <unserializable: {e}>"),
    }
}
