//! Static SVG figures and the CSV tables they are drawn from.
//!
//! Each figure is a plain string of SVG markup, so output is byte-stable for
//! identical inputs. Marks carry a `class` attribute (`feature`, `strip`,
//! `bar`, `curve`, `band`) so figures can be checked structurally.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radargram::TimeAxis;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// One point of an accuracy-versus-feature-count curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n_features: usize,
    pub mean_accuracy: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: usize,
    pub importance: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    pub feature: usize,
    pub row: usize,
    pub value: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub scan_id: String,
    pub trace: usize,
    pub truth: usize,
    pub predicted: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub index: usize,
    pub time_ns: f64,
}

/// Reads a headered CSV into typed rows.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    out.push('\n');
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
}

fn close(out: &mut String) {
    out.push_str("</svg>\n");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

/// Maps `v` in `[lo, hi]` onto `[a, b]`; a degenerate range maps to the middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        0.5 * (a + b)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Diverging blue-white-red colour for `v` in `[-1, 1]`.
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if v >= 0.0 {
        format!("#ff{0:02x}{0:02x}", fade(v))
    } else {
        format!("#{0:02x}{0:02x}ff", fade(-v))
    }
}

/// B-scan amplitudes (`samples × traces`) as a heatmap with time running
/// down, plus one horizontal line per feature time.
pub fn heatmap_svg(amplitudes: ArrayView2<'_, f64>, axis: &TimeAxis, feature_times_ns: &[f64], title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "trace", "time (ns)");
    let (ns, nt) = amplitudes.dim();
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    // Bin time so the figure stays small; colours are quantized so that
    // equal neighbours along a row merge into one rectangle.
    let bins = ns.clamp(1, 160);
    let per_bin = ns.div_ceil(bins);
    let rows = ns.div_ceil(per_bin);
    let peak = amplitudes.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let cw = pw / nt.max(1) as f64;
    let rh = ph / rows.max(1) as f64;
    out.push_str("<g class=\"heatmap\">\n");
    for r in 0..rows {
        let lo = r * per_bin;
        let hi = ((r + 1) * per_bin).min(ns);
        let level = |c: usize| {
            let mean = (lo..hi).map(|k| amplitudes[[k, c]]).sum::<f64>() / (hi - lo) as f64;
            ((mean / peak) * 16.0).round() as i32
        };
        let mut c = 0;
        while c < nt {
            let l = level(c);
            let mut end = c + 1;
            while end < nt && level(end) == l {
                end += 1;
            }
            if l != 0 {
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    MARGIN + c as f64 * cw,
                    MARGIN + r as f64 * rh,
                    (end - c) as f64 * cw,
                    rh,
                    diverging(l as f64 / 16.0)
                );
            }
            c = end;
        }
    }
    out.push_str("</g>\n");
    for &t in feature_times_ns {
        let y = scale(t, 0.0, axis.duration_ns(), MARGIN, H - MARGIN);
        let _ = writeln!(
            out,
            r#"<line class="feature" x1="{MARGIN}" x2="{:.2}" y1="{y:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="4 2"/>"#,
            W - MARGIN
        );
    }
    close(&mut out);
    out
}

/// Mean accuracy against feature count as one polyline, with ±std whiskers.
pub fn curve_svg(points: &[CurveRow], title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "number of features", "accuracy");
    let (xlo, xhi) = range(points.iter().map(|p| p.n_features as f64));
    let (ylo, yhi) = range(points.iter().flat_map(|p| [p.mean_accuracy - p.std, p.mean_accuracy + p.std]));
    let px = |v: f64| scale(v, xlo, xhi, MARGIN, W - MARGIN);
    let py = |v: f64| scale(v, ylo, yhi, H - MARGIN, MARGIN);
    let vertices: Vec<String> =
        points.iter().map(|p| format!("{:.2},{:.2}", px(p.n_features as f64), py(p.mean_accuracy))).collect();
    let _ = writeln!(out, r#"<polyline class="curve" points="{}" fill="none" stroke="steelblue"/>"#, vertices.join(" "));
    for p in points {
        let x = px(p.n_features as f64);
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}" stroke="steelblue"/>"#,
            py(p.mean_accuracy - p.std),
            py(p.mean_accuracy + p.std)
        );
    }
    close(&mut out);
    out
}

/// One horizontal bar per feature with a ±std whisker.
pub fn bars_svg(rows: &[ImportanceRow], axis: Option<&TimeAxis>, title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "importance", "feature");
    let (lo, hi) = range(rows.iter().flat_map(|r| [0.0, r.importance - r.std, r.importance + r.std]));
    let px = |v: f64| scale(v, lo, hi, MARGIN, W - MARGIN);
    let slot = (H - 2.0 * MARGIN) / rows.len().max(1) as f64;
    for (i, r) in rows.iter().enumerate() {
        let y = MARGIN + i as f64 * slot;
        let (a, b) = (px(0.0).min(px(r.importance)), px(0.0).max(px(r.importance)));
        let label = match axis.and_then(|a| a.time_of_index(r.feature).ok()) {
            Some(t) => format!("{t:.3} ns"),
            None => format!("#{}", r.feature),
        };
        let _ = writeln!(
            out,
            r#"<rect class="bar" x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="slategray"><title>{}</title></rect>"#,
            y + 0.1 * slot,
            b - a,
            0.8 * slot,
            escape(&label)
        );
        let yc = y + 0.5 * slot;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" x2="{:.2}" y1="{yc:.2}" y2="{yc:.2}" stroke="black"/>"#,
            px(r.importance - r.std),
            px(r.importance + r.std)
        );
    }
    close(&mut out);
    out
}

/// Beeswarm-style summary: one horizontal strip per feature, one dot per
/// explained row at its φ, coloured by the feature value.
pub fn shap_svg(rows: &[ShapRow], axis: Option<&TimeAxis>, title: &str) -> String {
    let mut features: Vec<usize> = rows.iter().map(|r| r.feature).collect();
    features.sort_unstable();
    features.dedup();
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "Shapley value", "feature");
    let (lo, hi) = range(rows.iter().map(|r| r.phi).chain([0.0]));
    let px = |v: f64| scale(v, lo, hi, MARGIN, W - MARGIN);
    let slot = (H - 2.0 * MARGIN) / features.len().max(1) as f64;
    let _ = writeln!(
        out,
        r#"<line x1="{0:.2}" x2="{0:.2}" y1="{MARGIN}" y2="{1}" stroke="gray"/>"#,
        px(0.0),
        H - MARGIN
    );
    for (i, f) in features.iter().enumerate() {
        let strip: Vec<&ShapRow> = rows.iter().filter(|r| r.feature == *f).collect();
        let (vlo, vhi) = range(strip.iter().map(|r| r.value));
        let label = match axis.and_then(|a| a.time_of_index(*f).ok()) {
            Some(t) => format!("{t:.3} ns"),
            None => format!("#{f}"),
        };
        let _ = writeln!(out, r#"<g class="strip" data-feature="{f}"><title>{}</title>"#, escape(&label));
        let yc = MARGIN + (i as f64 + 0.5) * slot;
        for (k, r) in strip.iter().enumerate() {
            // Deterministic vertical spread keeps dots from stacking.
            let spread = ((k * 37 % 17) as f64 / 16.0 - 0.5) * 0.6 * slot;
            let colour = diverging(scale(r.value, vlo, vhi, -1.0, 1.0));
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{colour}"/>"#,
                px(r.phi),
                yc + spread
            );
        }
        out.push_str("</g>\n");
    }
    close(&mut out);
    out
}

/// Class-1 probability along each scan, stacked one band per scan, with the
/// true label drawn as a shaded step underneath.
pub fn bands_svg(rows: &[PredictionRow], title: &str) -> String {
    let mut scans: Vec<&str> = Vec::new();
    for r in rows {
        if !scans.contains(&r.scan_id.as_str()) {
            scans.push(&r.scan_id);
        }
    }
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "trace", "P(class 1) per scan");
    let slot = (H - 2.0 * MARGIN) / scans.len().max(1) as f64;
    for (i, id) in scans.iter().enumerate() {
        let band: Vec<&PredictionRow> = rows.iter().filter(|r| r.scan_id == *id).collect();
        let n = band.iter().map(|r| r.trace).max().unwrap_or(0) + 1;
        let top = MARGIN + i as f64 * slot;
        let px = |t: usize| scale(t as f64, 0.0, (n.max(2) - 1) as f64, MARGIN, W - MARGIN);
        let py = |p: f64| top + (1.0 - p) * 0.9 * slot;
        let _ = writeln!(out, r#"<g class="band" data-scan="{}">"#, escape(id));
        for r in band.iter().filter(|r| r.truth == 1) {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="lightgray"/>"#,
                px(r.trace),
                (W - 2.0 * MARGIN) / n as f64,
                0.9 * slot
            );
        }
        let pts: Vec<String> = band.iter().map(|r| format!("{:.2},{:.2}", px(r.trace), py(r.probability))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="darkred"/>"#, pts.join(" "));
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" font-size="9">{}</text>"#, W - MARGIN + 4.0, top + 0.5 * slot, escape(id));
        out.push_str("</g>\n");
    }
    close(&mut out);
    out
}

/// Input tables recognised by [`plot_directory`] and the figure each yields.
pub const PLOT_INPUTS: [(&str, &str); 4] = [
    ("curve.csv", "curve.svg"),
    ("importance.csv", "importance.svg"),
    ("shap.csv", "shap.svg"),
    ("predictions.csv", "bands.svg"),
];

/// Draws every recognised CSV in `dir` into an SVG beside it. A heatmap is
/// drawn too when `scan` is given, with lines from `features.csv` if present.
pub fn plot_directory(
    dir: &Path,
    scan: Option<&crate::radargram::BScan>,
    axis: Option<&TimeAxis>,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, svg)?;
        written.push(p);
        Ok(())
    };
    for (input, output) in PLOT_INPUTS {
        let path = dir.join(input);
        if !path.exists() {
            continue;
        }
        let svg = match input {
            "curve.csv" => curve_svg(&read_csv(&path)?, "Accuracy against feature count"),
            "importance.csv" => bars_svg(&read_csv(&path)?, axis, "Feature importance"),
            "shap.csv" => shap_svg(&read_csv(&path)?, axis, "Shapley values"),
            _ => bands_svg(&read_csv(&path)?, "Predicted probability along each scan"),
        };
        emit(output, svg)?;
    }
    if let Some(scan) = scan {
        let fpath = dir.join("features.csv");
        let times: Vec<f64> = if fpath.exists() {
            read_csv::<FeatureRow>(&fpath)?.iter().map(|f| f.time_ns).collect()
        } else {
            Vec::new()
        };
        emit("heatmap.svg", heatmap_svg(scan.amplitudes().view(), scan.axis(), &times, scan.scan_id()))?;
    }
    if written.is_empty() {
        return Err(invalid(format!("nothing to plot in {}", dir.display())));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn three_point_curve_has_three_vertices() {
        let pts = [
            CurveRow { n_features: 1, mean_accuracy: 0.5, std: 0.1 },
            CurveRow { n_features: 5, mean_accuracy: 0.8, std: 0.0 },
            CurveRow { n_features: 9, mean_accuracy: 0.9, std: 0.05 },
        ];
        let svg = curve_svg(&pts, "c");
        let line = svg.lines().find(|l| l.contains("class=\"curve\"")).unwrap();
        let attr = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(attr.split_whitespace().count(), 3);
    }

    #[test]
    fn heatmap_without_features_has_no_lines() {
        let axis = TimeAxis::new(20, 1.0).unwrap();
        let a = Array2::from_shape_fn((20, 5), |(i, j)| ((i + j) as f64).sin());
        assert!(!heatmap_svg(a.view(), &axis, &[], "x").contains("class=\"feature\""));
        assert_eq!(heatmap_svg(a.view(), &axis, &[0.2, 0.5], "x").matches("class=\"feature\"").count(), 2);
    }

    #[test]
    fn one_strip_per_feature() {
        let rows: Vec<ShapRow> = (0..12)
            .map(|i| ShapRow { feature: [3, 8, 40][i % 3], row: i, value: i as f64, phi: 0.1 * i as f64 - 0.5 })
            .collect();
        assert_eq!(shap_svg(&rows, None, "s").matches("class=\"strip\"").count(), 3);
    }

    #[test]
    fn malformed_csv_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("curve.csv"), "n_features,mean_accuracy,std\nx,0.5,0.1\n").unwrap();
        assert!(plot_directory(dir.path(), None, None).is_err());
    }

    #[test]
    fn titles_are_escaped() {
        assert!(curve_svg(&[], "a<b").contains("a&lt;b"));
    }
}
