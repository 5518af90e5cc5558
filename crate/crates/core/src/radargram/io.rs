//! CSV amplitude matrix plus JSON sidecar.
//!
//! `scan.csv` holds one header row of trace indices followed by one row per
//! time sample. `scan.json` carries the axis, spacing, id, labels and the
//! optional wall spec.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_finite, BScan, LabelSource, LabeledScan, StudClass, StudLabels, TimeAxis, WallLabels, WallSpec};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n_samples: usize,
    duration_ns: f64,
    trace_spacing_m: f64,
    scan_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stud_labels: Option<StudLabelsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_labels: Option<WallLabels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_spec: Option<WallSpec>,
}

/// Stud labels are stored as 0/1 integers to keep sidecars small.
#[derive(Debug, Serialize, Deserialize)]
struct StudLabelsJson {
    source: LabelSource,
    per_trace: Vec<u8>,
}

impl From<&StudLabels> for StudLabelsJson {
    fn from(l: &StudLabels) -> Self {
        Self { source: l.source, per_trace: l.per_trace.iter().map(|c| c.index() as u8).collect() }
    }
}

impl From<StudLabelsJson> for StudLabels {
    fn from(j: StudLabelsJson) -> Self {
        Self {
            source: j.source,
            per_trace: j.per_trace.into_iter().map(|v| StudClass::from_index(v as usize)).collect(),
        }
    }
}

/// Path of the JSON sidecar paired with a scan path.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn csv_path(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

/// Writes `path.csv` and `path.json`. Any extension on `path` is replaced.
pub fn save_bscan(record: &LabeledScan, path: &Path) -> Result<()> {
    let scan = &record.scan;
    check_finite(scan.amplitudes())?;
    record.validate()?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path(path))?));
    w.write_record((0..scan.n_traces()).map(|c| c.to_string()))?;
    for row in scan.amplitudes().rows() {
        // `Display` for f64 prints the shortest string that parses back exactly.
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;

    let sidecar = Sidecar {
        n_samples: scan.axis().n_samples(),
        duration_ns: scan.axis().duration_ns(),
        trace_spacing_m: scan.trace_spacing_m(),
        scan_id: scan.scan_id().to_string(),
        stud_labels: record.stud_labels.as_ref().map(Into::into),
        wall_labels: record.wall_labels.clone(),
        wall_spec: record.wall_spec.clone(),
    };
    let mut out = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut out, &sidecar)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_bscan(path: &Path) -> Result<LabeledScan> {
    let side_path = sidecar_path(path);
    if !side_path.exists() {
        return Err(Error::MissingSidecar(side_path));
    }
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(File::open(&side_path)?))?;
    let axis = TimeAxis::new(sidecar.n_samples, sidecar.duration_ns)?;

    let mut r = csv::Reader::from_reader(BufReader::new(File::open(csv_path(path))?));
    let n_traces = r.headers()?.len();
    let mut values = Vec::with_capacity(n_traces * sidecar.n_samples);
    let mut rows = 0usize;
    for record in r.records() {
        let record = record?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::ShapeMismatch(format!("unparseable value '{field}' at row {rows}, column {c}"))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != sidecar.n_samples {
        return Err(Error::ShapeMismatch(format!(
            "sidecar declares {} samples but CSV has {rows} rows",
            sidecar.n_samples
        )));
    }
    let amplitudes = Array2::from_shape_vec((rows, n_traces), values)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let scan = BScan::new(axis, amplitudes, sidecar.trace_spacing_m, sidecar.scan_id)?;

    let record = LabeledScan {
        scan,
        stud_labels: sidecar.stud_labels.map(Into::into),
        wall_labels: sidecar.wall_labels,
        wall_spec: sidecar.wall_spec,
    };
    record.validate()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radargram::WallClass;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> BScan {
        BScan::new(TimeAxis::new(2, 1.0).unwrap(), array![[0.0, 1.0], [1.0, 0.0]], 0.01, "T1").unwrap()
    }

    #[test]
    fn smallest_scan_writes_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t");
        save_bscan(&LabeledScan::unlabeled(tiny()), &p).unwrap();
        let text = std::fs::read_to_string(p.with_extension("csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), "0,1");
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p.with_extension("json")).unwrap()).unwrap();
        assert_eq!(side["n_samples"], 2);
    }

    #[test]
    fn random_scan_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Array2::from_shape_fn((655, 100), |_| rng.random_range(-1.0..1.0));
        let scan = BScan::new(TimeAxis::default(), m, 0.00635, "G3").unwrap();
        let record = LabeledScan {
            stud_labels: Some(StudLabels::from_flags(
                &(0..100).map(|i| i % 7 == 0).collect::<Vec<_>>(),
                LabelSource::SyntheticTruth,
            )),
            wall_labels: Some(WallLabels::uniform(WallClass::Interior, 100, LabelSource::SyntheticTruth)),
            wall_spec: Some(WallSpec::interior()),
            scan,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("G3.csv");
        save_bscan(&record, &p).unwrap();
        let back = load_bscan(&p).unwrap();
        let diff = (back.scan.amplitudes() - record.scan.amplitudes())
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-12);
        assert_eq!(back, record);
        assert_eq!(back.scan.axis().time_of_index(0).unwrap(), 0.0);
        assert!((back.scan.axis().time_of_index(654).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn row_count_mismatch_is_shape_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Array2::from_shape_fn((655, 4), |_| rng.random_range(-1.0..1.0));
        let scan = BScan::new(TimeAxis::default(), m, 0.01, "X").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        save_bscan(&LabeledScan::unlabeled(scan), &p).unwrap();
        let csv = std::fs::read_to_string(p.with_extension("csv")).unwrap();
        let truncated: Vec<&str> = csv.lines().take(655).collect();
        std::fs::write(p.with_extension("csv"), truncated.join("\n")).unwrap();
        let err = load_bscan(&p).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"), "{err}");
    }

    #[test]
    fn short_labels_are_rejected() {
        let m = Array2::zeros((655, 100));
        let scan = BScan::new(TimeAxis::default(), m, 0.01, "X").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        save_bscan(&LabeledScan::unlabeled(scan), &p).unwrap();
        let side = sidecar_path(&p);
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
        v["stud_labels"] = serde_json::json!({"source": "svd_derived", "per_trace": vec![0u8; 99]});
        std::fs::write(&side, v.to_string()).unwrap();
        let err = load_bscan(&p).unwrap_err();
        assert!(err.to_string().contains("label length"), "{err}");
    }

    #[test]
    fn missing_sidecar_and_ragged_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(p.with_extension("csv"), "0,1\n0,1\n").unwrap();
        assert!(matches!(load_bscan(&p), Err(Error::MissingSidecar(_))));

        save_bscan(&LabeledScan::unlabeled(tiny()), &p).unwrap();
        std::fs::write(p.with_extension("csv"), "0,1\n0,1\n0\n").unwrap();
        assert!(matches!(load_bscan(&p), Err(Error::Csv(_))));
    }

    #[test]
    fn nan_is_rejected_on_save() {
        let mut scan = tiny();
        // BScan::new refuses NaN, so poke it in behind the constructor.
        scan.amplitudes[[0, 0]] = f64::NAN;
        let dir = tempfile::tempdir().unwrap();
        let err = save_bscan(&LabeledScan::unlabeled(scan), &dir.path().join("n")).unwrap_err();
        assert!(err.to_string().contains("non-finite amplitude"));
    }
}
