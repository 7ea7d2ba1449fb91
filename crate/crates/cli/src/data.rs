use std::fs;
use std::path::{Path, PathBuf};

use lsuss_core::io::{load_delimited, load_emg_3dc, load_uci_har, DelimitedOptions, EmgVariant, LabeledSeries, Split};
use lsuss_core::{Error, Result};

use crate::args::DataFormat;

fn is_series_file(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e == "csv" || e == "tsv" || e == "txt")
}

fn has_prefixed_dir(root: &Path, prefix: &str) -> Result<bool> {
    Ok(fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .any(|e| e.path().is_dir() && e.file_name().to_string_lossy().starts_with(prefix)))
}

fn delimited_dir(dir: &Path, split: Split) -> Result<Vec<LabeledSeries>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_series_file(p))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let mut ls = load_delimited(f, &DelimitedOptions::default())?;
            ls.split = split;
            Ok(ls)
        })
        .collect()
}

/// Loads a dataset. A plain directory is split by its `train/`, `val/` and
/// `test/` subdirectories when present; otherwise every file is training
/// data. A single file is a test series.
pub fn load(path: &Path, format: DataFormat) -> Result<Vec<LabeledSeries>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let format = match format {
        DataFormat::Auto if path.is_file() => DataFormat::Delimited,
        DataFormat::Auto if has_prefixed_dir(path, "subject_")? => DataFormat::Uci,
        DataFormat::Auto if has_prefixed_dir(path, "participant_")? => {
            return Err(Error::InvalidConfig(
                "EMG layout detected; pass --format emg-artificial or emg-evaluation".into(),
            ))
        }
        f => f,
    };
    let out = match format {
        DataFormat::Uci => load_uci_har(path)?,
        DataFormat::EmgArtificial => load_emg_3dc(path, EmgVariant::Artificial)?,
        DataFormat::EmgEvaluation => load_emg_3dc(path, EmgVariant::Evaluation)?,
        _ if path.is_file() => vec![load_delimited(path, &DelimitedOptions::default())?],
        _ => {
            let named = [("train", Split::Train), ("val", Split::Val), ("test", Split::Test)];
            if named.iter().any(|(d, _)| path.join(d).is_dir()) {
                let mut out = Vec::new();
                for (d, split) in named {
                    if path.join(d).is_dir() {
                        out.extend(delimited_dir(&path.join(d), split)?);
                    }
                }
                out
            } else {
                delimited_dir(path, Split::Train)?
            }
        }
    };
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("no series found under {}", path.display())));
    }
    Ok(out)
}

/// Series of `split`, or every series when the split is empty.
pub fn select(all: &[LabeledSeries], split: Split) -> Vec<&LabeledSeries> {
    let picked: Vec<&LabeledSeries> = all.iter().filter(|s| s.split == split).collect();
    if picked.is_empty() {
        log::warn!("no {split:?} series; using all {} series", all.len());
        all.iter().collect()
    } else {
        picked
    }
}

/// A single series file.
pub fn load_one(path: &Path) -> Result<LabeledSeries> {
    if path.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "{} is a directory; this command takes one series file",
            path.display()
        )));
    }
    load_delimited(path, &DelimitedOptions::default())
}

/// Scaler fitted at training time, stored next to the model.
pub fn scaler_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".scaler.json");
    PathBuf::from(s)
}
