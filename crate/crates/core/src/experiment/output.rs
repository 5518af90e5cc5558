use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{RunArtifacts, SelectionReport};
use crate::error::Result;
use crate::plot::{self, CurveRow, FeatureRow, ImportanceRow, PredictionRow, ShapRow};
use crate::radargram::WallClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Names and checksums of every file a command wrote, sorted by name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    /// Hashes the named files in `dir`.
    pub fn of_files(dir: &Path, names: &[String]) -> Result<Self> {
        let mut files = names
            .iter()
            .map(|n| {
                let data = std::fs::read(dir.join(n))?;
                let sha256 = Sha256::digest(&data).iter().map(|b| format!("{b:02x}")).collect();
                Ok(ManifestEntry { name: n.clone(), bytes: data.len() as u64, sha256 })
            })
            .collect::<Result<Vec<_>>>()?;
        files.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Self { files })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize)]
struct DepthRow {
    index: usize,
    time_ns: f64,
    wall_class: WallClass,
    shallow_m: Option<f64>,
    deep_m: Option<f64>,
    shallow_layer: Option<usize>,
    deep_layer: Option<usize>,
}

/// Writes the report, model, tables, figures and `manifest.json` to `dir`.
pub fn write_outputs(art: &RunArtifacts, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let r = &art.report;
    r.validate()?;
    let mut names: Vec<String> = Vec::new();
    let mut add = |n: &str| names.push(n.to_string());

    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(r)? + "\n")?;
    add("report.json");
    art.model.save(&dir.join("model.json"))?;
    add("model.json");

    let preds: Vec<PredictionRow> = r
        .predictions
        .iter()
        .map(|p| PredictionRow {
            scan_id: p.scan_id.clone(),
            trace: p.trace,
            truth: p.truth,
            predicted: p.predicted,
            probability: p.probability,
        })
        .collect();
    plot::write_csv(&dir.join("predictions.csv"), &preds)?;
    add("predictions.csv");
    std::fs::write(dir.join("bands.svg"), plot::bands_svg(&preds, "Predicted probability along each scan"))?;
    add("bands.svg");

    if let Some(h) = &art.history {
        plot::write_csv(&dir.join("history.csv"), h)?;
        add("history.csv");
    }

    let features: Vec<FeatureRow> = r.features.iter().map(|f| FeatureRow { index: f.index, time_ns: f.time_ns }).collect();
    plot::write_csv(&dir.join("features.csv"), &features)?;
    add("features.csv");
    let depths: Vec<DepthRow> = r
        .features
        .iter()
        .flat_map(|f| {
            f.depths.iter().map(move |d| DepthRow {
                index: f.index,
                time_ns: f.time_ns,
                wall_class: d.wall_class,
                shallow_m: d.interval.as_ref().map(|i| i.shallow.depth_m),
                deep_m: d.interval.as_ref().map(|i| i.deep.depth_m),
                shallow_layer: d.interval.as_ref().map(|i| i.shallow.layer),
                deep_layer: d.interval.as_ref().map(|i| i.deep.layer),
            })
        })
        .collect();
    plot::write_csv(&dir.join("depths.csv"), &depths)?;
    add("depths.csv");

    let scan = &art.example_scan.scan;
    let times: Vec<f64> = features.iter().map(|f| f.time_ns).collect();
    let title = format!("{} with selected feature times", scan.scan_id());
    std::fs::write(dir.join("heatmap.svg"), plot::heatmap_svg(scan.amplitudes().view(), scan.axis(), &times, &title))?;
    add("heatmap.svg");

    let axis = *scan.axis();
    match &r.selection {
        Some(SelectionReport::Agglomerate { curve, .. }) | Some(SelectionReport::Rfecv { result: crate::feature_select::RfecvResult { curve, .. } }) => {
            let rows: Vec<CurveRow> = curve
                .iter()
                .map(|c| CurveRow { n_features: c.n_features, mean_accuracy: c.mean_accuracy, std: c.std })
                .collect();
            plot::write_csv(&dir.join("curve.csv"), &rows)?;
            add("curve.csv");
            std::fs::write(dir.join("curve.svg"), plot::curve_svg(&rows, "Accuracy against feature count"))?;
            add("curve.svg");
        }
        Some(SelectionReport::Pfi { result, .. }) => {
            let mut rows: Vec<ImportanceRow> = result
                .importances
                .iter()
                .zip(&result.std)
                .enumerate()
                .map(|(feature, (&importance, &std))| ImportanceRow { feature, importance, std })
                .collect();
            plot::write_csv(&dir.join("importance.csv"), &rows)?;
            add("importance.csv");
            // The figure keeps the 20 most important features.
            rows.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.feature.cmp(&b.feature)));
            rows.truncate(20);
            std::fs::write(dir.join("importance.svg"), plot::bars_svg(&rows, Some(&axis), "Permutation importance"))?;
            add("importance.svg");
        }
        None => {}
    }

    if let Some(s) = &r.shap {
        let rows: Vec<ShapRow> = s
            .features
            .iter()
            .enumerate()
            .flat_map(|(f, &feature)| {
                s.rows.iter().enumerate().map(move |(k, &row)| ShapRow { feature, row, value: s.values[f][k], phi: s.phi[f][k] })
            })
            .collect();
        plot::write_csv(&dir.join("shap.csv"), &rows)?;
        add("shap.csv");
        std::fs::write(dir.join("shap.svg"), plot::shap_svg(&rows, Some(&axis), "Shapley values"))?;
        add("shap.svg");
    }

    let manifest = Manifest::of_files(dir, &names)?;
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}
