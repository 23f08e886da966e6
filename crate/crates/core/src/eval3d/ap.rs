use serde::{Deserialize, Serialize};

use super::iou::{bev_iou, iou2d, iou3d};
use crate::pseudolabel::Box3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[serde(rename = "3d")]
    Box3d,
    Bev,
    Bbox2d,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Bbox2d, Metric::Bev, Metric::Box3d];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Box3d => "3d",
            Metric::Bev => "bev",
            Metric::Bbox2d => "bbox",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "3d" => Ok(Metric::Box3d),
            "bev" => Ok(Metric::Bev),
            "bbox" | "bbox2d" | "2d" => Ok(Metric::Bbox2d),
            other => Err(format!("unknown metric {other:?} (expected 3d, bev or bbox)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub metric: Metric,
    pub recall_points: u32,
}

impl MatchConfig {
    pub fn new(iou_threshold: f64, metric: Metric) -> Self {
        Self {
            iou_threshold,
            metric,
            recall_points: 40,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.iou_threshold > 0.0 && self.iou_threshold <= 1.0 && self.recall_points >= 1
    }
}

/// Fate of a prediction after matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    /// Matched an ignored ground truth, or itself ignored; excluded from the
    /// curve.
    Ignored,
}

/// Matching result of one image, mergeable across images.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageMatches {
    /// `(score, outcome)` per prediction in input order.
    pub predictions: Vec<(f64, Outcome)>,
    /// Ground truths that count toward recall.
    pub num_gt: usize,
}

/// Greedy matching in descending score order (ties keep input order).
///
/// Each prediction takes the unmatched counted ground truth with the highest
/// IoU at or above the threshold. Failing that, overlapping an ignored ground
/// truth makes it [`Outcome::Ignored`]; otherwise it is a false positive.
/// `iou(p, g)` gives the overlap of prediction `p` and ground truth `g`.
pub fn match_predictions<F>(
    scores: &[f64],
    gt_ignored: &[bool],
    pred_ignored: &[bool],
    threshold: f64,
    iou: F,
) -> ImageMatches
where
    F: Fn(usize, usize) -> f64,
{
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut taken = vec![false; gt_ignored.len()];
    let mut outcome = vec![Outcome::FalsePositive; scores.len()];
    for &p in &order {
        let mut best: Option<(usize, f64)> = None;
        let mut hits_ignored = false;
        for (g, &ignored) in gt_ignored.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let o = iou(p, g);
            if o < threshold {
                continue;
            }
            if ignored {
                hits_ignored = true;
            } else if best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        outcome[p] = if let Some((g, _)) = best {
            taken[g] = true;
            Outcome::TruePositive
        } else if hits_ignored || pred_ignored.get(p).copied().unwrap_or(false) {
            Outcome::Ignored
        } else {
            Outcome::FalsePositive
        };
    }
    ImageMatches {
        predictions: scores.iter().copied().zip(outcome).collect(),
        num_gt: gt_ignored.iter().filter(|i| !**i).count(),
    }
}

/// IoU between two boxes under `metric`; `Bbox2d` needs the 2D boxes.
pub fn metric_iou(
    metric: Metric,
    a: &Box3D,
    b: &Box3D,
    a_bbox: Option<&[f64; 4]>,
    b_bbox: Option<&[f64; 4]>,
) -> f64 {
    match metric {
        Metric::Box3d => iou3d(a, b),
        Metric::Bev => bev_iou(a, b),
        Metric::Bbox2d => match (a_bbox, b_bbox) {
            (Some(x), Some(y)) => iou2d(x, y),
            _ => 0.0,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Average precision in percent.
    pub ap: f64,
    /// Interpolated precision at recall i / recall_points, i = 1..=recall_points.
    pub precision_at_recall: Vec<f64>,
    /// Raw `(recall, precision)` after each counted prediction.
    pub curve: Vec<(f64, f64)>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub num_gt: usize,
    /// AP was set by convention because there was nothing to evaluate.
    pub vacuous: bool,
}

/// Builds the precision-recall curve over all images and averages the
/// interpolated precision at the sampled recall levels.
///
/// Predictions from all images are ranked together by score; ties keep image
/// order, then input order, so sharded matching merged in image order
/// reproduces the sequential result exactly.
pub fn accumulate(images: &[ImageMatches], recall_points: u32) -> EvalResult {
    let num_gt: usize = images.iter().map(|m| m.num_gt).sum();
    let mut ranked: Vec<(f64, bool)> = images
        .iter()
        .flat_map(|m| m.predictions.iter())
        .filter(|(_, o)| *o != Outcome::Ignored)
        .map(|&(s, o)| (s, o == Outcome::TruePositive))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut tp = 0usize;
    let mut prefix = Vec::with_capacity(ranked.len());
    for (k, &(_, hit)) in ranked.iter().enumerate() {
        tp += hit as usize;
        prefix.push((tp, k + 1));
    }
    let fp = ranked.len() - tp;
    let curve = prefix
        .iter()
        .map(|&(t, n)| {
            let recall = if num_gt == 0 { 0.0 } else { t as f64 / num_gt as f64 };
            (recall, t as f64 / n as f64)
        })
        .collect();

    let r = recall_points.max(1) as usize;
    if num_gt == 0 {
        let ap = if ranked.is_empty() { 100.0 } else { 0.0 };
        return EvalResult {
            ap,
            precision_at_recall: vec![ap / 100.0; r],
            curve,
            true_positives: tp,
            false_positives: fp,
            num_gt,
            vacuous: true,
        };
    }

    // Running max of precision from the tail, then the first prefix reaching
    // each recall level (integer test: tp * r >= i * num_gt).
    let mut best_from = vec![0.0; prefix.len() + 1];
    for k in (0..prefix.len()).rev() {
        let (t, n) = prefix[k];
        best_from[k] = (t as f64 / n as f64).max(best_from[k + 1]);
    }
    let mut precision_at_recall = Vec::with_capacity(r);
    let mut k = 0;
    for i in 1..=r {
        while k < prefix.len() && prefix[k].0 * r < i * num_gt {
            k += 1;
        }
        precision_at_recall.push(best_from[k]);
    }
    let sum: f64 = precision_at_recall.iter().sum();
    EvalResult {
        ap: 100.0 * sum / r as f64,
        precision_at_recall,
        curve,
        true_positives: tp,
        false_positives: fp,
        num_gt,
        vacuous: false,
    }
}

/// AP|R40 of one image's predictions against its ground truths.
pub fn ap_r40(preds: &[Box3D], gts: &[Box3D], cfg: &MatchConfig) -> EvalResult {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let matches = match_predictions(
        &scores,
        &vec![false; gts.len()],
        &[],
        cfg.iou_threshold,
        |p, g| metric_iou(cfg.metric, &preds[p], &gts[g], None, None),
    );
    accumulate(&[matches], cfg.recall_points)
}
