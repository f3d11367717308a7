use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{default_thresholds, distance_accuracy_curve, tdr, EvalError};
use crate::data::{Manifest, Point};

/// Version of the `report.json` layout.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub predicted: Point,
    pub ground_truth: Point,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    /// Fraction of samples within `threshold` pixels.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub threshold: f64,
    pub model_id: String,
    pub dataset_id: String,
    /// How the curve is to be read.
    pub curve_semantics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub config: ReportConfig,
    pub samples: Vec<ScoredSample>,
    pub tdr: f64,
    pub curve: Vec<CurvePoint>,
    /// Images with a prediction but no singular point in the ground truth.
    pub excluded_without_ground_truth: usize,
    /// Annotated images for which no prediction was supplied.
    pub missing_predictions: usize,
}

impl EvalReport {
    /// Scores `(id, predicted, ground truth)` triples in original-image pixels.
    pub fn from_results(
        results: Vec<(String, Point, Point)>,
        threshold: f64,
        model_id: impl Into<String>,
        dataset_id: impl Into<String>,
    ) -> Result<Self, EvalError> {
        let pairs: Vec<(Point, Point)> = results.iter().map(|(_, p, g)| (*p, *g)).collect();
        let tdr = tdr(&pairs, threshold)?;
        let mut thresholds = default_thresholds();
        if !thresholds.contains(&threshold) {
            thresholds.push(threshold);
            thresholds.sort_by(f64::total_cmp);
        }
        let curve = distance_accuracy_curve(&pairs, &thresholds)?;
        let samples = results
            .into_iter()
            .map(|(id, predicted, ground_truth)| ScoredSample {
                distance: predicted.distance(ground_truth),
                id,
                predicted,
                ground_truth,
            })
            .collect();
        Ok(Self {
            schema: REPORT_SCHEMA,
            config: ReportConfig {
                threshold,
                model_id: model_id.into(),
                dataset_id: dataset_id.into(),
                curve_semantics: "cumulative: accuracy at t is the fraction of samples with distance <= t".into(),
            },
            samples,
            tdr,
            curve,
            excluded_without_ground_truth: 0,
            missing_predictions: 0,
        })
    }

    /// Joins a prediction manifest against a ground-truth manifest by filename.
    pub fn from_manifests(
        predictions: &Manifest,
        truth: &Manifest,
        threshold: f64,
        model_id: impl Into<String>,
        dataset_id: impl Into<String>,
    ) -> Result<Self, EvalError> {
        let mut results = Vec::new();
        let mut excluded = 0;
        let mut missing = 0;
        for (id, entry) in truth.iter() {
            let pred = predictions.get(id).and_then(|e| e.point());
            match (entry.point(), pred) {
                (Some(gt), Some(p)) => results.push((id.to_owned(), p, gt)),
                (Some(_), None) => missing += 1,
                (None, _) => excluded += 1,
            }
        }
        let mut report = Self::from_results(results, threshold, model_id, dataset_id)?;
        report.excluded_without_ground_truth = excluded;
        report.missing_predictions = missing;
        Ok(report)
    }

    pub fn distances_csv(&self) -> String {
        let mut s = String::from("id,pred_x,pred_y,gt_x,gt_y,distance\n");
        for r in &self.samples {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.id, r.predicted.x, r.predicted.y, r.ground_truth.x, r.ground_truth.y, r.distance
            )
            .expect("string write");
        }
        s
    }

    /// A self-contained SVG line chart of the curve.
    pub fn curve_svg(&self) -> String {
        const W: f64 = 480.0;
        const H: f64 = 320.0;
        const M: f64 = 48.0;
        let t_max = self.curve.last().map_or(1.0, |c| c.threshold).max(1.0);
        let sx = |t: f64| M + t / t_max * (W - 2.0 * M);
        let sy = |a: f64| H - M - a * (H - 2.0 * M);
        let points: Vec<String> = self
            .curve
            .iter()
            .map(|c| format!("{:.2},{:.2}", sx(c.threshold), sy(c.accuracy)))
            .collect();
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<path d="M{M},{} V{} H{}" fill="none" stroke="black"/>"#,
            M,
            H - M,
            W - M
        )
        .unwrap();
        for (t, label) in [(0.0, "0"), (t_max / 2.0, &format!("{}", t_max / 2.0)), (t_max, &format!("{t_max}"))] {
            writeln!(s, r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{label}</text>"#, sx(t), H - M + 16.0).unwrap();
        }
        for a in [0.0, 0.5, 1.0] {
            writeln!(s, r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{a}</text>"#, M - 6.0, sy(a) + 4.0).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">distance threshold (px)</text>"#, W / 2.0, H - 10.0).unwrap();
        writeln!(
            s,
            r#"<text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">accuracy</text>"#,
            H / 2.0,
            H / 2.0
        )
        .unwrap();
        writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, points.join(" ")).unwrap();
        s.push_str("</svg>\n");
        s
    }
}

/// Writes `report.json`, `distances.csv` and `curve.svg` into `dir`, creating it if needed.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<(), EvalError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(dir.join("distances.csv"), report.distances_csv())?;
    fs::write(dir.join("curve.svg"), report.curve_svg())?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport, EvalError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ManifestEntry;

    fn sample_report() -> EvalReport {
        EvalReport::from_results(
            vec![
                ("a.png".into(), Point::new(112.0, 116.0), Point::new(100.0, 100.0)),
                ("b.png".into(), Point::new(10.5, 3.25), Point::new(10.5, 3.25)),
                ("c.png".into(), Point::new(0.0, 0.0), Point::new(30.0, 40.0)),
            ],
            20.0,
            "model-x",
            "set-y",
        )
        .unwrap()
    }

    #[test]
    fn tdr_equals_curve_at_threshold() {
        let r = sample_report();
        assert!((r.tdr - 2.0 / 3.0).abs() < 1e-12);
        let at = r.curve.iter().find(|c| c.threshold == 20.0).unwrap();
        assert_eq!(at.accuracy, r.tdr);
        assert_eq!(r.samples[2].distance, 50.0);
    }

    #[test]
    fn off_grid_threshold_is_added_to_the_curve() {
        let r = EvalReport::from_results(vec![("a".into(), Point::new(0.0, 0.0), Point::new(0.0, 12.5))], 12.5, "m", "d")
            .unwrap();
        assert_eq!(r.curve.len(), 42);
        assert_eq!(r.curve.iter().find(|c| c.threshold == 12.5).unwrap().accuracy, 1.0);
    }

    #[test]
    fn emitted_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_report();
        emit_report(&r, dir.path()).unwrap();
        assert_eq!(read_report(dir.path().join("report.json")).unwrap(), r);
        let csv = fs::read_to_string(dir.path().join("distances.csv")).unwrap();
        assert_eq!(csv.lines().count(), r.samples.len() + 1);
        let svg = fs::read_to_string(dir.path().join("curve.svg")).unwrap();
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = poly.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(pts.split(' ').count(), r.curve.len());
        assert!(svg.contains("distance threshold (px)") && svg.contains("accuracy"));
    }

    #[test]
    fn manifests_join_by_filename() {
        let mut truth = Manifest::new();
        truth.set("a.png", ManifestEntry::Point(Point::new(10.0, 10.0)));
        truth.set("b.png", ManifestEntry::Point(Point::new(50.0, 50.0)));
        truth.set("c.png", ManifestEntry::NoSingularPoint);
        truth.set("d.png", ManifestEntry::Point(Point::new(1.0, 1.0)));
        let mut pred = Manifest::new();
        pred.set("a.png", ManifestEntry::Point(Point::new(13.0, 14.0)));
        pred.set("b.png", ManifestEntry::Point(Point::new(80.0, 50.0)));
        pred.set("c.png", ManifestEntry::Point(Point::new(0.0, 0.0)));
        let r = EvalReport::from_manifests(&pred, &truth, 20.0, "m", "d").unwrap();
        assert_eq!(r.samples.len(), 2);
        assert_eq!(r.tdr, 0.5);
        assert_eq!(r.excluded_without_ground_truth, 1);
        assert_eq!(r.missing_predictions, 1);
        assert!(matches!(
            EvalReport::from_manifests(&Manifest::new(), &truth, 20.0, "m", "d"),
            Err(EvalError::Empty)
        ));
    }
}
