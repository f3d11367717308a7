//! Scoring: Euclidean hit test, true-detection rate, distance-vs-accuracy
//! curves and report files.

mod report;

use thiserror::Error;

use crate::data::{Point, Sample};
use crate::nn::{NetError, SpNet};
use crate::tensor::Tensor;

pub use report::{emit_report, read_report, CurvePoint, EvalReport, ReportConfig, ScoredSample, REPORT_SCHEMA};

/// The detection threshold in pixels.
pub const DEFAULT_THRESHOLD: f64 = 20.0;
/// Largest threshold on the default curve (thresholds run 0, 1, …, 40).
pub const CURVE_MAX_THRESHOLD: u32 = 40;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to score: no sample has both a prediction and a ground truth")]
    Empty,
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Whether `pred` lies within `threshold` pixels of `gt`, boundary included.
pub fn is_true_detection(pred: Point, gt: Point, threshold: f64) -> bool {
    pred.distance(gt) <= threshold
}

/// Fraction of `(pred, gt)` pairs that are true detections.
pub fn tdr(results: &[(Point, Point)], threshold: f64) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = results.iter().filter(|(p, g)| is_true_detection(*p, *g, threshold)).count();
    Ok(hits as f64 / results.len() as f64)
}

/// Thresholds `0, 1, …, 40` pixels.
pub fn default_thresholds() -> Vec<f64> {
    (0..=CURVE_MAX_THRESHOLD).map(f64::from).collect()
}

/// TDR at each threshold; cumulative, hence non-decreasing in the threshold.
pub fn distance_accuracy_curve(results: &[(Point, Point)], thresholds: &[f64]) -> Result<Vec<CurvePoint>, EvalError> {
    thresholds
        .iter()
        .map(|&t| {
            Ok(CurvePoint {
                threshold: t,
                accuracy: tdr(results, t)?,
            })
        })
        .collect()
}

/// End-to-end predictions for each sample, mapped back to original pixels.
pub fn predict_points(net: &SpNet, samples: &[Sample], batch_size: usize) -> Result<Vec<Point>, NetError> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let images: Vec<&Tensor> = chunk.iter().map(|s| &s.image).collect();
        let (_, detections) = net.forward(&Tensor::stack(&images)?)?;
        for (s, d) in chunk.iter().zip(detections) {
            out.push(s.to_original(Point::new(d.x as f64, d.y as f64)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn boundary_is_inclusive() {
        assert!(is_true_detection(p(112.0, 116.0), p(100.0, 100.0), 20.0));
        assert!(is_true_detection(p(100.0, 100.0), p(100.0, 100.0), 20.0));
        assert!(!is_true_detection(p(121.0, 100.0), p(100.0, 100.0), 20.0));
    }

    #[test]
    fn tdr_counts() {
        let exact = vec![(p(1.0, 2.0), p(1.0, 2.0)); 5];
        assert_eq!(tdr(&exact, 20.0).unwrap(), 1.0);
        let mixed = [
            (p(0.0, 0.0), p(3.0, 4.0)),
            (p(0.0, 0.0), p(0.0, 20.0)),
            (p(0.0, 0.0), p(0.0, 0.0)),
            (p(0.0, 0.0), p(30.0, 0.0)),
        ];
        assert_eq!(tdr(&mixed, 20.0).unwrap(), 0.75);
        assert!(matches!(tdr(&[], 20.0), Err(EvalError::Empty)));
    }

    #[test]
    fn curve_is_a_step_for_a_single_result() {
        let r = [(p(6.0, 8.0), p(0.0, 0.0))];
        let c = distance_accuracy_curve(&r, &default_thresholds()).unwrap();
        assert_eq!(c.len(), 41);
        for pt in &c {
            assert_eq!(pt.accuracy, if pt.threshold >= 10.0 { 1.0 } else { 0.0 });
        }
        let exact = [(p(5.0, 5.0), p(5.0, 5.0))];
        let c = distance_accuracy_curve(&exact, &default_thresholds()).unwrap();
        assert!(c.iter().all(|pt| pt.accuracy == 1.0));
    }

    fn point() -> impl Strategy<Value = Point> {
        (-500.0f64..500.0, -500.0f64..500.0).prop_map(|(x, y)| Point::new(x, y))
    }

    proptest! {
        #[test]
        fn hit_test_is_symmetric_and_translation_invariant(a in point(), b in point(), t in point(), thr in 0.0f64..60.0) {
            prop_assert_eq!(is_true_detection(a, b, thr), is_true_detection(b, a, thr));
            let shift = |q: Point| Point::new(q.x + t.x.round(), q.y + t.y.round());
            let (ia, ib) = (Point::new(a.x.round(), a.y.round()), Point::new(b.x.round(), b.y.round()));
            prop_assert_eq!(is_true_detection(ia, ib, thr), is_true_detection(shift(ia), shift(ib), thr));
        }

        #[test]
        fn curve_is_monotone_and_matches_tdr(pairs in proptest::collection::vec((point(), point()), 1..40)) {
            let c = distance_accuracy_curve(&pairs, &default_thresholds()).unwrap();
            for w in c.windows(2) {
                prop_assert!(w[0].accuracy <= w[1].accuracy);
            }
            prop_assert_eq!(c[20].accuracy, tdr(&pairs, 20.0).unwrap());
            prop_assert!(c.iter().all(|pt| (0.0..=1.0).contains(&pt.accuracy)));
        }
    }
}
