use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{LabeledSeries, Split};
use crate::error::{Error, Result};
use crate::extract::ChangePointSet;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DelimitedOptions {
    /// Field separator; detected from the first row when `None` (tab, then
    /// comma, else runs of whitespace).
    pub delimiter: Option<u8>,
    /// Whether the first row names the channels; detected when `None` (a
    /// row with any non-numeric cell is a header).
    pub has_header: Option<bool>,
}

/// Companion label file: same stem, `.cps` suffix.
pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("cps")
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `(line number, cells)` for every non-blank row.
fn rows(path: &Path, text: &str, delimiter: Option<u8>) -> Result<Vec<(usize, Vec<String>)>> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = delimiter.or_else(|| {
        if first.contains('\t') {
            Some(b'\t')
        } else if first.contains(',') {
            Some(b',')
        } else {
            None
        }
    });
    let Some(d) = delimiter else {
        return Ok(text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_string).collect()))
            .collect());
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(d)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

/// Reads a rows-are-timesteps matrix. Returns the series (with channel names
/// when a header was present).
pub fn read_matrix(path: &Path, opts: &DelimitedOptions) -> Result<TimeSeries> {
    let text = read_text(path)?;
    let mut rows = rows(path, &text, opts.delimiter)?;
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    let header_row = match opts.has_header {
        Some(h) => h,
        None => rows[0].1.iter().any(|c| c.parse::<f64>().is_err()),
    };
    let names = header_row.then(|| rows.remove(0).1);
    let Some((_, first)) = rows.first() else {
        return Err(parse_error(path, 2, "header but no data rows"));
    };
    let nc = first.len();
    if let Some(names) = &names {
        if names.len() != nc {
            return Err(parse_error(path, 1, format!("header has {} names for {nc} columns", names.len())));
        }
    }
    let n = rows.len();
    let mut data = vec![0.0; nc * n];
    for (t, (line, cells)) in rows.iter().enumerate() {
        if cells.len() != nc {
            return Err(parse_error(path, *line, format!("expected {nc} columns, found {}", cells.len())));
        }
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, *line, format!("column {}: '{cell}' is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_error(path, *line, format!("column {}: non-finite value '{cell}'", c + 1)));
            }
            data[c * n + t] = v;
        }
    }
    let ts = TimeSeries::from_channel_major(data, nc)?;
    match names {
        Some(names) => ts.with_channel_names(names),
        None => Ok(ts),
    }
}

/// One change-point per line, each strictly inside `(0, n)`.
pub fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: usize = s
            .parse()
            .map_err(|_| parse_error(path, i + 1, format!("'{s}' is not a sample index")))?;
        if v == 0 || v >= n {
            return Err(parse_error(
                path,
                i + 1,
                format!("change-point {v} outside the series interior (0, {n})"),
            ));
        }
        out.push(v);
    }
    Ok(out)
}

/// A delimited series plus its `.cps` labels. A missing label file gives an
/// empty ground truth and sets `labels_missing`.
pub fn load_delimited(path: &Path, opts: &DelimitedOptions) -> Result<LabeledSeries> {
    let series = read_matrix(path, opts)?;
    let lp = labels_path(path);
    let (indices, labels_missing) = if lp.exists() {
        (read_labels(&lp, series.len())?, false)
    } else {
        log::warn!("no label file {}; ground truth left empty", lp.display());
        (Vec::new(), true)
    };
    Ok(LabeledSeries {
        series,
        change_points: ChangePointSet::ground_truth(indices),
        split: Split::Test,
        subject_id: path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        labels_missing,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

pub(super) fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut f = create(path)?;
    for l in lines {
        writeln!(f, "{l}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Comma-separated, one row per sample, header from the channel names
/// (`ch0, ch1, ...` when unnamed), 17 significant digits.
pub fn write_delimited(path: &Path, ts: &TimeSeries) -> Result<()> {
    let header = match ts.channel_names() {
        Some(names) => names.join(","),
        None => (0..ts.nc()).map(|c| format!("ch{c}")).collect::<Vec<_>>().join(","),
    };
    let body = (0..ts.len()).map(|t| {
        (0..ts.nc())
            .map(|c| format!("{:.16e}", ts.sample(c, t)))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, std::iter::once(header).chain(body))
}

pub fn write_labels(path: &Path, cps: &ChangePointSet) -> Result<()> {
    write_lines(path, cps.indices.iter().map(|i| i.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn shape_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "s.csv", "1,2\n3,4\n5,6\n");
        file(dir.path(), "s.cps", "1\n2\n");
        let ls = load_delimited(&p, &DelimitedOptions::default()).unwrap();
        assert_eq!((ls.series.nc(), ls.series.len()), (2, 3));
        assert_eq!(ls.series.channel(1), &[2.0, 4.0, 6.0]);
        assert_eq!(ls.change_points.indices, vec![1, 2]);
        assert!(!ls.labels_missing);
    }

    #[test]
    fn out_of_range_label_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "s.csv", "1,2\n3,4\n5,6\n");
        file(dir.path(), "s.cps", "1\n10\n");
        match load_delimited(&p, &DelimitedOptions::default()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("10"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_labels_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "s.tsv", "a\tb\n1\t2\n3\t4\n");
        let ls = load_delimited(&p, &DelimitedOptions::default()).unwrap();
        assert!(ls.labels_missing && ls.change_points.is_empty());
        assert_eq!(ls.series.channel_names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ls.series.len(), 2);
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = file(dir.path(), "r.csv", "1,2\n3\n");
        assert!(matches!(read_matrix(&ragged, &DelimitedOptions::default()), Err(Error::Parse { line: 2, .. })));
        let bad = file(dir.path(), "b.csv", "1,2\n3,x\n");
        assert!(matches!(read_matrix(&bad, &DelimitedOptions::default()), Err(Error::Parse { line: 2, .. })));
        let nan = file(dir.path(), "n.csv", "1,2\n3,NaN\n");
        assert!(matches!(read_matrix(&nan, &DelimitedOptions::default()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            read_matrix(&dir.path().join("none.csv"), &DelimitedOptions::default()),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn whitespace_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "w.txt", "  1.5  2e-3 -4\n\n0 0 1\n");
        let ts = read_matrix(&p, &DelimitedOptions::default()).unwrap();
        assert_eq!((ts.nc(), ts.len()), (3, 2));
        assert_eq!(ts.channel(1), &[2e-3, 0.0]);
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ts = TimeSeries::from_channels(vec![vec![0.1, 1.0 / 3.0, -2.5e-300], vec![1e10, 7.0, 0.0]]).unwrap();
        let p = dir.path().join("o.csv");
        write_delimited(&p, &ts).unwrap();
        write_labels(&labels_path(&p), &ChangePointSet::ground_truth(vec![1])).unwrap();
        let back = load_delimited(&p, &DelimitedOptions::default()).unwrap();
        assert_eq!(back.series.as_channel_major(), ts.as_channel_major());
        assert_eq!(back.change_points.indices, vec![1]);
    }
}
