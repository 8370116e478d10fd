//! Segmentation quality against ground truth: IoU, greedy matching and
//! average precision.
//!
//! AP is the non-interpolated area under the precision/recall steps,
//! `sum_n (R_n - R_{n-1}) * P_n`, over detections ranked by score. The
//! headline AP averages over IoU thresholds 0.50, 0.55, ..., 0.95 and over
//! the classes that have ground truth. A 101-point interpolated variant is
//! reported alongside for comparison with other tools.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{BBox, BitMask, Category, ClassMode, Dataset};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvaluationError {
    #[error("IoU is undefined for two empty regions")]
    EmptyUnion,
    #[error("mask sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("frame sets differ: missing from predictions {missing_in_predictions:?}, missing from ground truth {missing_in_ground_truth:?}")]
    FrameMismatch {
        missing_in_predictions: Vec<u64>,
        missing_in_ground_truth: Vec<u64>,
    },
    #[error("predictions are {predictions:?} but ground truth is {ground_truth:?}")]
    ClassModeMismatch {
        predictions: ClassMode,
        ground_truth: ClassMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouMode {
    #[default]
    Mask,
    Box,
}

pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64, EvaluationError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(EvaluationError::SizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Err(EvaluationError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

pub fn box_iou(a: &BBox, b: &BBox) -> Result<f64, EvaluationError> {
    if a.area() == 0.0 && b.area() == 0.0 {
        return Err(EvaluationError::EmptyUnion);
    }
    Ok(a.iou(b))
}

/// Outcome for one detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    /// Index into the detection list.
    pub detection: usize,
    pub score: f64,
    pub ground_truth: Option<usize>,
    /// IoU with the claimed ground truth, or the best IoU with any ground
    /// truth still unclaimed at the detection's turn when unmatched.
    pub iou: f64,
    pub is_tp: bool,
}

/// Greedy matching of one frame and class. `ious[d][g]` is the IoU of
/// detection `d` and ground truth `g`. Detections go in descending score
/// (ties in input order); each claims the unclaimed ground truth of highest
/// IoU (ties to the lower index) if that IoU reaches `threshold`. Records are
/// returned in processing order.
pub fn match_detections(scores: &[f64], ious: &[Vec<f64>], n_ground_truth: usize, threshold: f64) -> Vec<MatchRecord> {
    let mut claimed = vec![false; n_ground_truth];
    rank_by_score(scores)
        .into_iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for g in (0..n_ground_truth).filter(|&g| !claimed[g]) {
                if best.is_none_or(|(_, b)| ious[d][g] > b) {
                    best = Some((g, ious[d][g]));
                }
            }
            match best {
                Some((g, iou)) if iou >= threshold => {
                    claimed[g] = true;
                    MatchRecord { detection: d, score: scores[d], ground_truth: Some(g), iou, is_tp: true }
                }
                _ => MatchRecord {
                    detection: d,
                    score: scores[d],
                    ground_truth: None,
                    iou: best.map_or(0.0, |b| b.1),
                    is_tp: false,
                },
            }
        })
        .collect()
}

/// Indices ordered by descending score, stable on ties.
fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Non-interpolated AP over `(score, is_tp)` pairs. `None` without ground
/// truth.
pub fn average_precision(records: &[(f64, bool)], n_ground_truth: usize) -> Option<f64> {
    if n_ground_truth == 0 {
        return None;
    }
    let scores: Vec<f64> = records.iter().map(|r| r.0).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for i in rank_by_score(&scores) {
        if records[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_ground_truth as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

/// 101-point interpolated AP (precision envelope sampled at recall
/// 0, 0.01, ..., 1).
pub fn interpolated_ap_101(records: &[(f64, bool)], n_ground_truth: usize) -> Option<f64> {
    if n_ground_truth == 0 {
        return None;
    }
    let scores: Vec<f64> = records.iter().map(|r| r.0).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(records.len());
    let mut precision = Vec::with_capacity(records.len());
    for i in rank_by_score(&scores) {
        if records[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_ground_truth as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let total: f64 = (0..=100)
        .map(|r| {
            let level = f64::from(r) / 100.0;
            let k = recall.partition_point(|&x| x < level);
            precision.get(k).copied().unwrap_or(0.0)
        })
        .sum();
    Some(total / 101.0)
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    #[serde(rename = "AP")]
    pub ap: Option<f64>,
    #[serde(rename = "AP50")]
    pub ap50: Option<f64>,
    #[serde(rename = "AP75")]
    pub ap75: Option<f64>,
    pub ground_truth: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedReport {
    #[serde(rename = "AP")]
    pub ap: Option<f64>,
    #[serde(rename = "AP50")]
    pub ap50: Option<f64>,
    #[serde(rename = "AP75")]
    pub ap75: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: IouMode,
    #[serde(rename = "AP")]
    pub ap: Option<f64>,
    #[serde(rename = "AP50")]
    pub ap50: Option<f64>,
    #[serde(rename = "AP75")]
    pub ap75: Option<f64>,
    pub per_class: BTreeMap<Category, ClassReport>,
    /// Keyed by threshold, formatted `"0.50"`.
    pub counts: BTreeMap<String, Counts>,
    pub interpolated_101: InterpolatedReport,
}

/// Records of one class at one threshold over all frames.
struct ClassRun {
    records: Vec<(f64, bool)>,
    n_ground_truth: usize,
    counts: Counts,
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Evaluates `predictions` against `ground_truth` frame by frame.
pub fn evaluate(predictions: &Dataset, ground_truth: &Dataset, mode: IouMode) -> Result<EvalReport, EvaluationError> {
    let pf: BTreeSet<u64> = predictions.frames().iter().map(|f| f.index).collect();
    let gf: BTreeSet<u64> = ground_truth.frames().iter().map(|f| f.index).collect();
    if pf != gf {
        return Err(EvaluationError::FrameMismatch {
            missing_in_predictions: gf.difference(&pf).copied().collect(),
            missing_in_ground_truth: pf.difference(&gf).copied().collect(),
        });
    }
    if predictions.class_mode() != ground_truth.class_mode() {
        return Err(EvaluationError::ClassModeMismatch {
            predictions: predictions.class_mode(),
            ground_truth: ground_truth.class_mode(),
        });
    }
    let classes = ground_truth.class_mode().categories();
    let thresholds = iou_thresholds();
    // runs[class][threshold]
    let mut runs: Vec<Vec<ClassRun>> = classes
        .iter()
        .map(|_| {
            thresholds
                .iter()
                .map(|_| ClassRun { records: Vec::new(), n_ground_truth: 0, counts: Counts::default() })
                .collect()
        })
        .collect();
    let mut totals = vec![(0usize, 0usize); classes.len()];

    for (pframe, gframe) in predictions.frames().iter().zip(ground_truth.frames()) {
        for (ci, &class) in classes.iter().enumerate() {
            let dets: Vec<_> = pframe.detections.iter().filter(|d| d.category() == class).collect();
            let gts: Vec<_> = gframe.detections.iter().filter(|d| d.category() == class).collect();
            totals[ci].0 += gts.len();
            totals[ci].1 += dets.len();
            let ious: Vec<Vec<f64>> = match mode {
                IouMode::Mask => {
                    let gm: Vec<BitMask> = gts.iter().map(|g| g.mask()).collect();
                    dets.iter()
                        .map(|d| {
                            let dm = d.mask();
                            gm.iter().map(|g| mask_iou(&dm, g).unwrap_or(0.0)).collect()
                        })
                        .collect()
                }
                IouMode::Box => dets
                    .iter()
                    .map(|d| gts.iter().map(|g| box_iou(&d.bbox(), &g.bbox()).unwrap_or(0.0)).collect())
                    .collect(),
            };
            let scores: Vec<f64> = dets.iter().map(|d| d.score()).collect();
            for (ti, &t) in thresholds.iter().enumerate() {
                let recs = match_detections(&scores, &ious, gts.len(), t);
                let tp = recs.iter().filter(|r| r.is_tp).count();
                let run = &mut runs[ci][ti];
                run.records.extend(recs.iter().map(|r| (r.score, r.is_tp)));
                run.n_ground_truth += gts.len();
                run.counts += Counts { tp, fp: recs.len() - tp, fn_: gts.len() - tp };
            }
        }
    }

    type ApFn = fn(&[(f64, bool)], usize) -> Option<f64>;
    let at = |ti: usize, f: ApFn| -> Vec<Option<f64>> {
        runs.iter().map(|r| f(&r[ti].records, r[ti].n_ground_truth)).collect()
    };
    let i50 = 0;
    let i75 = 5;
    let per_threshold: Vec<Vec<Option<f64>>> = (0..thresholds.len()).map(|ti| at(ti, average_precision)).collect();
    let per_threshold_101: Vec<Vec<Option<f64>>> =
        (0..thresholds.len()).map(|ti| at(ti, interpolated_ap_101)).collect();
    let headline = |table: &[Vec<Option<f64>>], ti: usize| mean(table[ti].iter().copied());
    let overall = |table: &[Vec<Option<f64>>]| mean((0..thresholds.len()).map(|ti| headline(table, ti)));

    let per_class = classes
        .iter()
        .enumerate()
        .map(|(ci, &class)| {
            (
                class,
                ClassReport {
                    ap: mean(per_threshold.iter().map(|row| row[ci])),
                    ap50: per_threshold[i50][ci],
                    ap75: per_threshold[i75][ci],
                    ground_truth: totals[ci].0,
                    detections: totals[ci].1,
                },
            )
        })
        .collect();
    let counts = thresholds
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let mut c = Counts::default();
            for r in &runs {
                c += r[ti].counts;
            }
            (format!("{t:.2}"), c)
        })
        .collect();
    Ok(EvalReport {
        mode,
        ap: overall(&per_threshold),
        ap50: headline(&per_threshold, i50),
        ap75: headline(&per_threshold, i75),
        per_class,
        counts,
        interpolated_101: InterpolatedReport {
            ap: overall(&per_threshold_101),
            ap50: headline(&per_threshold_101, i50),
            ap75: headline(&per_threshold_101, i75),
        },
    })
}
