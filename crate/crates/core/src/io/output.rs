use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::delimited::write_lines;
use crate::error::{Error, Result};
use crate::eval::{Metric, Pairing};
use crate::extract::ChangePointSet;

/// Writes `index,value` rows under that header; values carry 17
/// significant digits.
pub fn write_curve(path: &Path, values: &[f64]) -> Result<()> {
    let rows = values.iter().enumerate().map(|(i, v)| format!("{i},{v:.16e}"));
    write_lines(path, std::iter::once("index,value".to_string()).chain(rows))
}

pub fn read_curve(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: msg,
    };
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (i, v) = line
            .split_once(',')
            .ok_or_else(|| parse(k + 1, "expected 'index,value'".into()))?;
        let i: usize = i.trim().parse().map_err(|_| parse(k + 1, format!("bad index '{i}'")))?;
        if i != out.len() {
            return Err(parse(k + 1, format!("index {i} out of sequence")));
        }
        out.push(v.trim().parse().map_err(|_| parse(k + 1, format!("bad value '{v}'")))?);
    }
    Ok(out)
}

/// One index per line.
pub fn write_change_points(path: &Path, cps: &ChangePointSet) -> Result<()> {
    write_lines(path, cps.indices.iter().map(|i| i.to_string()))
}

/// One evaluation outcome as stored in results files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: serde_json::Value,
    pub metric: Metric,
    pub value: f64,
    pub pairing: Vec<Pairing>,
}

/// Pretty-printed JSON with a trailing newline; field order follows the
/// type definitions, so repeated runs produce identical bytes.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_lines(path, std::iter::once(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let v: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.7311).sin().abs() / 3.0).chain([0.0, 1.0, 1e-300]).collect();
        write_curve(&p, &v).unwrap();
        let back = read_curve(&p).unwrap();
        assert_eq!(back.len(), v.len());
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert_eq!(back, v);
        assert!(fs::read_to_string(&p).unwrap().starts_with("index,value\n0,"));
    }

    #[test]
    fn results_json_is_strict_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let rec = vec![ResultRecord {
            config: serde_json::json!({"algorithm": "fluss", "nw": 20}),
            metric: Metric::ScoreRegimes,
            value: 0.015,
            pairing: vec![Pairing { gt: 100, pred: Some(90), distance: 10 }],
        }];
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        write_json(&a, &rec).unwrap();
        write_json(&b, &rec).unwrap();
        let bytes = fs::read(&a).unwrap();
        assert_eq!(bytes, fs::read(&b).unwrap());
        let parsed: Vec<ResultRecord> = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(parsed, rec);
        let raw: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        let obj = raw[0].as_object().unwrap();
        assert_eq!(obj.keys().collect::<Vec<_>>(), vec!["config", "metric", "pairing", "value"]);
        assert_eq!(raw[0]["metric"], "score_regimes");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("f");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(write_curve(&blocker.join("c.csv"), &[1.0]), Err(Error::Io { .. })));
    }
}
