use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::delimited::{labels_path, read_labels, read_matrix, DelimitedOptions};
use super::{LabeledSeries, Split};
use crate::error::{Error, Result};
use crate::extract::ChangePointSet;
use crate::series::TimeSeries;

const UCI_FILES: [&str; 3] = ["gyro", "acc", "body_acc"];

pub const UCI_CHANNELS: usize = 9;
pub const UCI_SAMPLE_RATE_HZ: f64 = 50.0;
pub const EMG_CHANNELS: usize = 10;
pub const EMG_SAMPLE_RATE_HZ: f64 = 1000.0;
/// Gestures per evaluation session, each held for [`EMG_GESTURE_SECONDS`].
pub const EMG_SESSION_GESTURES: usize = 42;
pub const EMG_GESTURE_SECONDS: usize = 5;

/// Train and validation counts for `n` subjects under the reference ratio
/// `train : val : total`; both at least one, the rest is test.
pub fn split_sizes(n: usize, ratio: (usize, usize, usize)) -> (usize, usize) {
    let (tr, va, total) = ratio;
    let scaled = |k: usize| ((k * n) as f64 / total as f64).round() as usize;
    let train = scaled(tr).max(1).min(n);
    let val = scaled(va).max(1).min(n - train);
    (train, val)
}

/// Splits by position in the sorted id order: train, then validation, then
/// test.
pub fn assign_splits(n: usize, ratio: (usize, usize, usize)) -> Vec<Split> {
    let (train, val) = split_sizes(n, ratio);
    (0..n)
        .map(|i| {
            if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            }
        })
        .collect()
}

/// Subdirectories `<prefix><id>`, ordered numerically when every id is a
/// number and lexicographically otherwise.
fn prefixed_dirs(root: &Path, prefix: &str) -> Result<Vec<(String, PathBuf)>> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_prefix(prefix) {
            if entry.path().is_dir() {
                out.push((id.to_string(), entry.path()));
            }
        }
    }
    if out.iter().all(|(id, _)| id.parse::<u64>().is_ok()) {
        out.sort_by_key(|(id, _)| id.parse::<u64>().unwrap());
    } else {
        out.sort();
    }
    Ok(out)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

/// Change-points at label transitions, each label row covering `r` samples.
fn transitions(labels: &[String], r: usize) -> Vec<usize> {
    labels
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| (i + 1) * r)
        .collect()
}

fn uci_subject(dir: &Path) -> Result<(TimeSeries, Vec<usize>)> {
    let opts = DelimitedOptions {
        delimiter: None,
        has_header: Some(false),
    };
    let mut channels = Vec::with_capacity(UCI_CHANNELS);
    let mut names = Vec::with_capacity(UCI_CHANNELS);
    for f in UCI_FILES {
        let path = require(dir.join(format!("{f}.txt")))?;
        let m = read_matrix(&path, &opts)?;
        if m.nc() != 3 {
            return Err(Error::Parse {
                path,
                line: 1,
                message: format!("expected 3 axes, found {} columns", m.nc()),
            });
        }
        for (c, axis) in m.channels().zip(["x", "y", "z"]) {
            channels.push(c.to_vec());
            names.push(format!("{f}_{axis}"));
        }
    }
    let ts = TimeSeries::from_channels(channels)?.with_channel_names(names)?;
    let lp = require(dir.join("labels.txt"))?;
    let labels: Vec<String> = fs::read_to_string(&lp)
        .map_err(|e| Error::io(&lp, e))?
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    if labels.is_empty() || ts.len() % labels.len() != 0 {
        return Err(Error::Parse {
            path: lp,
            line: labels.len(),
            message: format!("{} labels do not evenly cover {} samples", labels.len(), ts.len()),
        });
    }
    let r = ts.len() / labels.len();
    Ok((ts, transitions(&labels, r)))
}

/// Loads `subject_<id>/` directories as 9-channel series (gyro, acc and body
/// acc, three axes each). Subjects are split 9 : 5 : 16 in sorted id order.
pub fn load_uci_har(root: &Path) -> Result<Vec<LabeledSeries>> {
    let subjects = prefixed_dirs(root, "subject_")?;
    if subjects.is_empty() {
        return Err(Error::MissingFile(root.join("subject_<id>")));
    }
    let splits = assign_splits(subjects.len(), (9, 5, 30));
    subjects
        .into_iter()
        .zip(splits)
        .map(|((id, dir), split)| {
            let (series, cps) = uci_subject(&dir)?;
            Ok(LabeledSeries {
                series: series.with_sample_rate(UCI_SAMPLE_RATE_HZ)?,
                change_points: ChangePointSet::ground_truth(cps),
                split,
                subject_id: format!("subject_{id}"),
                labels_missing: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmgVariant {
    /// Concatenated gesture blocks; change-points at the joints.
    Artificial,
    /// Continuous sessions with recorded transitions.
    Evaluation,
}

impl std::str::FromStr for EmgVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "artificial" => Ok(EmgVariant::Artificial),
            "evaluation" => Ok(EmgVariant::Evaluation),
            other => Err(Error::InvalidArgument(format!("unknown EMG variant '{other}'"))),
        }
    }
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() == want_dirs)
        .collect();
    out.sort();
    Ok(out)
}

fn check_emg(path: &Path, ts: &TimeSeries) -> Result<()> {
    if ts.nc() != EMG_CHANNELS {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected {EMG_CHANNELS} EMG channels, found {}", ts.nc()),
        });
    }
    Ok(())
}

fn artificial_session(dir: &Path) -> Result<(TimeSeries, Vec<usize>)> {
    let opts = DelimitedOptions::default();
    let blocks: Vec<PathBuf> = sorted_entries(dir, false)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "txt" || e == "csv"))
        .collect();
    if blocks.is_empty() {
        return Err(Error::MissingFile(dir.join("<block>.txt")));
    }
    let mut parts = Vec::with_capacity(blocks.len());
    let mut joints = Vec::with_capacity(blocks.len() - 1);
    let mut at = 0;
    for b in &blocks {
        let ts = read_matrix(b, &opts)?;
        check_emg(b, &ts)?;
        if at > 0 {
            joints.push(at);
        }
        at += ts.len();
        parts.push(ts);
    }
    Ok((TimeSeries::concat(&parts)?, joints))
}

/// Loads `participant_<id>/` directories. Participants are split in sorted
/// id order, 10 : 4 : 8 (artificial) or 6 : 5 : 9 (evaluation); all
/// sessions of a participant share its split.
pub fn load_emg_3dc(root: &Path, variant: EmgVariant) -> Result<Vec<LabeledSeries>> {
    let people = prefixed_dirs(root, "participant_")?;
    if people.is_empty() {
        return Err(Error::MissingFile(root.join("participant_<id>")));
    }
    let ratio = match variant {
        EmgVariant::Artificial => (10, 4, 22),
        EmgVariant::Evaluation => (6, 5, 20),
    };
    let splits = assign_splits(people.len(), ratio);
    let mut out = Vec::new();
    for ((id, dir), split) in people.into_iter().zip(splits) {
        match variant {
            EmgVariant::Artificial => {
                let sub = require(dir.join("artificial"))?;
                for session in sorted_entries(&sub, true)? {
                    let (series, joints) = artificial_session(&session)?;
                    out.push(LabeledSeries {
                        series: series.with_sample_rate(EMG_SAMPLE_RATE_HZ)?,
                        change_points: ChangePointSet::ground_truth(joints),
                        split,
                        subject_id: format!(
                            "participant_{id}/{}",
                            session.file_name().unwrap_or_default().to_string_lossy()
                        ),
                        labels_missing: false,
                    });
                }
            }
            EmgVariant::Evaluation => {
                let sub = require(dir.join("evaluation"))?;
                for file in sorted_entries(&sub, false)? {
                    if file.extension().is_none_or(|e| e != "txt" && e != "csv") {
                        continue;
                    }
                    let series = read_matrix(&file, &DelimitedOptions::default())?;
                    check_emg(&file, &series)?;
                    let cps = read_labels(&require(labels_path(&file))?, series.len())?;
                    out.push(LabeledSeries {
                        series: series.with_sample_rate(EMG_SAMPLE_RATE_HZ)?,
                        change_points: ChangePointSet::ground_truth(cps),
                        split,
                        subject_id: format!(
                            "participant_{id}/{}",
                            file.file_stem().unwrap_or_default().to_string_lossy()
                        ),
                        labels_missing: false,
                    });
                }
            }
        }
    }
    Ok(out)
}
