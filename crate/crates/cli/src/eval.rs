use std::collections::BTreeSet;
use std::fmt::Write as _;

use pseudo3d::dataio::{read_labels, KittiLabelRecord};
use pseudo3d::eval3d::{accumulate, match_predictions, metric_iou, Difficulty, ImageMatches, Metric};
use pseudo3d::PipelineConfig;
use serde::Serialize;

use crate::{config_echo, finish_config, label_files, CliError, EvalArgs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub metric: Metric,
    pub difficulty: Difficulty,
    pub ap: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub num_gt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: PipelineConfig,
    pub class: String,
    pub iou_threshold: f64,
    pub images: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn ap(&self, metric: Metric, difficulty: Difficulty) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.difficulty == difficulty)
            .map(|r| r.ap)
    }

    pub fn render(&self) -> String {
        let mut s = config_echo(&self.config);
        let _ = writeln!(
            s,
            "class {} iou {} images {}",
            self.class, self.iou_threshold, self.images
        );
        let _ = write!(s, "{:<8}", "metric");
        for d in Difficulty::ALL {
            let _ = write!(s, "{:>10}", d.name());
        }
        s.push('\n');
        let mut metrics: Vec<Metric> = Vec::new();
        for r in &self.rows {
            if !metrics.contains(&r.metric) {
                metrics.push(r.metric);
            }
        }
        for m in metrics {
            let _ = write!(s, "{:<8}", m.name());
            for d in Difficulty::ALL {
                match self.ap(m, d) {
                    Some(ap) => {
                        let _ = write!(s, "{ap:>10.2}");
                    }
                    None => {
                        let _ = write!(s, "{:>10}", "-");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Classes whose ground truths are ignored rather than counted as misses.
fn neighbor_class(class: &str) -> Option<&'static str> {
    match class {
        "Car" => Some("Van"),
        "Pedestrian" => Some("Person_sitting"),
        _ => None,
    }
}

fn default_iou(class: &str) -> f64 {
    if class == "Car" {
        0.7
    } else {
        0.5
    }
}

struct ImageLabels {
    gts: Vec<KittiLabelRecord>,
    preds: Vec<KittiLabelRecord>,
}

fn match_image(
    img: &ImageLabels,
    class: &str,
    metric: Metric,
    difficulty: Difficulty,
    threshold: f64,
) -> ImageMatches {
    let neighbor = neighbor_class(class);
    let gts: Vec<&KittiLabelRecord> = img
        .gts
        .iter()
        .filter(|g| g.kind == class || Some(g.kind.as_str()) == neighbor)
        .collect();
    let gt_ignored: Vec<bool> = gts
        .iter()
        .map(|g| g.kind != class || !difficulty.admits(g.bbox_height(), g.occluded, g.truncated))
        .collect();
    let preds: Vec<&KittiLabelRecord> = img.preds.iter().filter(|p| p.kind == class).collect();
    let pred_ignored: Vec<bool> = preds
        .iter()
        .map(|p| p.bbox_height() < difficulty.min_bbox_height())
        .collect();
    let pred_boxes: Vec<_> = preds.iter().map(|p| p.to_box()).collect();
    let gt_boxes: Vec<_> = gts.iter().map(|g| g.to_box()).collect();
    let scores: Vec<f64> = pred_boxes.iter().map(|b| b.score).collect();
    match_predictions(&scores, &gt_ignored, &pred_ignored, threshold, |p, g| {
        metric_iou(
            metric,
            &pred_boxes[p],
            &gt_boxes[g],
            Some(&preds[p].bbox),
            Some(&gts[g].bbox),
        )
    })
}

pub fn run_eval(args: &EvalArgs, cfg: PipelineConfig) -> Result<EvalReport, CliError> {
    let cfg = finish_config(cfg)?;
    let metrics: Vec<Metric> = if args.metric.eq_ignore_ascii_case("all") {
        Metric::ALL.to_vec()
    } else {
        vec![args.metric.parse().map_err(CliError::Usage)?]
    };
    let threshold = args.iou.unwrap_or_else(|| default_iou(&args.class));
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CliError::Usage(format!("--iou must be in (0, 1], got {threshold}")));
    }
    for (flag, dir) in [("--gt", &args.gt), ("--pred", &args.pred)] {
        if !dir.is_dir() {
            return Err(CliError::Data(format!("{flag}: {} is not a directory", dir.display())));
        }
    }
    let gt_files = label_files(&args.gt)?;
    if gt_files.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no ground-truth label files",
            args.gt.display()
        )));
    }
    let gt_ids: BTreeSet<&str> = gt_files.iter().map(|(id, _)| id.as_str()).collect();
    if let Some((id, path)) = label_files(&args.pred)?
        .into_iter()
        .find(|(id, _)| !gt_ids.contains(id.as_str()))
    {
        return Err(CliError::Data(format!(
            "{}: prediction for image {id} has no ground truth",
            path.display()
        )));
    }

    let mut images = Vec::with_capacity(gt_files.len());
    for (id, gt_path) in &gt_files {
        let pred_path = args.pred.join(format!("{id}.txt"));
        let preds = if pred_path.is_file() {
            read_labels(&pred_path)?
        } else {
            Vec::new()
        };
        images.push(ImageLabels {
            gts: read_labels(gt_path)?,
            preds,
        });
    }

    let mut rows = Vec::new();
    for &metric in &metrics {
        for difficulty in Difficulty::ALL {
            let matches: Vec<ImageMatches> = images
                .iter()
                .map(|img| match_image(img, &args.class, metric, difficulty, threshold))
                .collect();
            let r = accumulate(&matches, 40);
            rows.push(EvalRow {
                metric,
                difficulty,
                ap: r.ap,
                true_positives: r.true_positives,
                false_positives: r.false_positives,
                num_gt: r.num_gt,
            });
        }
    }
    let report = EvalReport {
        config: cfg,
        class: args.class.clone(),
        iou_threshold: threshold,
        images: images.len(),
        rows,
    };
    if let Some(p) = &args.out {
        crate::write_json(p, &report)?;
    }
    Ok(report)
}
