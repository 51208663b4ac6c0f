//! Report and sample files.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use slerev::experiments::ExperimentReport;
use slerev::sampler::MapSample;

use crate::CliError;

/// Report as written to disk; `timestamp` is the only field that varies
/// between identical runs.
#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    timestamp: u64,
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Writes `<dir>/<name>.report.json` and returns its path.
pub fn write_report(report: &ExperimentReport, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(format!("{name}.report.json"));
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut text = serde_json::to_string_pretty(&ReportFile { timestamp, report })?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io(&path))?;
    Ok(path)
}

/// Header of the sample CSV: meta columns, extras, then `p{k}_re, p{k}_im`.
pub fn csv_header(points: usize, extra_names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["index", "label", "x", "t0"].iter().map(|s| s.to_string()).collect();
    h.extend(extra_names.iter().cloned());
    for k in 0..points {
        h.push(format!("p{k}_re"));
        h.push(format!("p{k}_im"));
    }
    h
}

/// Writes one row per sample. Floats use the shortest representation that
/// parses back to the same value. An empty batch is an error and creates no
/// file.
pub fn emit_csv(batch: &[MapSample<f64>], extra_names: &[String], path: &Path) -> Result<(), CliError> {
    let first = batch.first().ok_or(CliError::EmptyBatch)?;
    let points = first.values.len();
    if let Some(bad) = batch.iter().find(|s| s.values.len() != points || s.extras.len() != extra_names.len()) {
        return Err(CliError::Invalid(format!("sample {} does not match the batch layout", bad.meta.index)));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(csv_header(points, extra_names))?;
    let mut row = Vec::new();
    for s in batch {
        row.clear();
        row.push(s.meta.index.to_string());
        row.push(s.meta.label.clone());
        row.push(s.meta.x.to_string());
        row.push(s.meta.t0.to_string());
        row.extend(s.extras.iter().map(f64::to_string));
        for z in &s.values {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use slerev::num_complex::Complex;

    fn sample(i: u64) -> MapSample<f64> {
        let values = (0..13).map(|k| Complex::new(0.1 * k as f64 + 1.0 / 3.0, 1e-17 + i as f64)).collect();
        let mut m = MapSample::new(values, "x1->x2", 1.0, 1.0).with_index(i);
        m.extras = vec![std::f64::consts::PI];
        m
    }

    #[test]
    fn one_sample_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = sample(0);
        emit_csv(std::slice::from_ref(&s), &["u".to_string()], &path).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        assert_eq!(r.headers().unwrap().len(), 4 + 1 + 26);
        let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][1], "x1->x2");
        assert_eq!(rows[0][4].parse::<f64>().unwrap(), std::f64::consts::PI);
        for (k, z) in s.values.iter().enumerate() {
            assert_eq!(rows[0][5 + 2 * k].parse::<f64>().unwrap(), z.re);
            assert_eq!(rows[0][6 + 2 * k].parse::<f64>().unwrap(), z.im);
        }
    }

    #[test]
    fn empty_batch_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        assert!(matches!(emit_csv(&[], &[], &path), Err(CliError::EmptyBatch)));
        assert!(!path.exists());
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("s.csv");
        assert!(emit_csv(&[sample(0)], &["u".to_string()], &path).is_err());
    }
}
