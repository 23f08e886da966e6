use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pseudo3d::dataio::{
    read_calib, read_depth, read_detections, write_labels_string, ImageDetections,
    KittiLabelRecord,
};
use pseudo3d::pseudolabel::{generate_pseudo_labels, Diagnostics, PriorTable, PseudoLabelSettings, Yaw};
use pseudo3d::PipelineConfig;
use rayon::prelude::*;
use serde::Serialize;

use crate::{config_echo, files_with_extension, finish_config, write_outputs, CliError, PseudolabelArgs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSummary {
    pub config: PipelineConfig,
    pub images: usize,
    pub detections: usize,
    pub below_threshold: usize,
    pub emitted: usize,
    pub dropped_no_depth: usize,
    pub conflicts: usize,
    pub out: PathBuf,
}

impl LabelSummary {
    pub fn render(&self) -> String {
        format!(
            "{}images {}\ndetections {}\nbelow_threshold {}\nemitted {}\ndropped_no_depth {}\nconflicts {}\n",
            config_echo(&self.config),
            self.images,
            self.detections,
            self.below_threshold,
            self.emitted,
            self.dropped_no_depth,
            self.conflicts
        )
    }
}

fn effective_config(args: &PseudolabelArgs, mut cfg: PipelineConfig) -> Result<PipelineConfig, CliError> {
    if let Some(s) = args.score_threshold {
        cfg.score_threshold = s;
    }
    if let Some(w) = args.depth_window {
        cfg.depth_window = w;
    }
    args.camera.apply(&mut cfg);
    finish_config(cfg)
}

fn read_all_detections(path: &Path) -> Result<Vec<ImageDetections>, CliError> {
    let files = if path.is_dir() {
        files_with_extension(path, "jsonl")?
            .into_iter()
            .map(|(_, p)| p)
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    let mut by_image: BTreeMap<String, ImageDetections> = BTreeMap::new();
    for file in files {
        for rec in read_detections(&file)?.images {
            if by_image.contains_key(&rec.image) {
                return Err(CliError::Data(format!(
                    "{}: image {:?} appears in more than one detection record",
                    file.display(),
                    rec.image
                )));
            }
            by_image.insert(rec.image.clone(), rec);
        }
    }
    Ok(by_image.into_values().collect())
}

struct Job<'a> {
    args: &'a PseudolabelArgs,
    cfg: &'a PipelineConfig,
    priors: PriorTable,
    settings: PseudoLabelSettings,
}

impl Job<'_> {
    fn label_image(&self, rec: &ImageDetections) -> Result<(String, Diagnostics), CliError> {
        let id = &rec.image;
        let context = |e: &dyn std::fmt::Display| CliError::Data(format!("image {id}: {e}"));
        let calib_path = self.args.calib.join(format!("{id}.txt"));
        if !calib_path.is_file() {
            return Err(CliError::Data(format!(
                "image {id}: missing calibration {}",
                calib_path.display()
            )));
        }
        let depth_path = self.args.depth.join(format!("{id}.depth"));
        if !depth_path.is_file() {
            return Err(CliError::Data(format!(
                "image {id}: missing depth raster {}",
                depth_path.display()
            )));
        }
        let raster = read_depth(&depth_path).map_err(|e| context(&e))?;
        let intr = read_calib(&calib_path)
            .and_then(|c| c.intrinsics(&self.cfg.camera, Some((raster.width(), raster.height()))))
            .map_err(|e| context(&e))?;
        let dets: Vec<_> = rec.detections.iter().map(|d| d.to_detection()).collect();
        let yaws = rec
            .detections
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.yaw
                    .map(Yaw::new)
                    .ok_or_else(|| CliError::Data(format!("image {id}: detection {i} has no yaw")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let output = generate_pseudo_labels(
            &dets,
            &raster,
            &yaws,
            &intr,
            &self.cfg.virtual_camera,
            &self.priors,
            &self.settings,
        )
        .map_err(|e| context(&e))?;
        let records: Vec<KittiLabelRecord> = output
            .labels
            .iter()
            .map(|l| KittiLabelRecord::from_box(&l.box3d, l.bbox_virtual, true))
            .collect();
        Ok((write_labels_string(&records), output.diagnostics))
    }
}

pub fn run_pseudolabel(args: &PseudolabelArgs, cfg: PipelineConfig) -> Result<LabelSummary, CliError> {
    let cfg = effective_config(args, cfg)?;
    for (flag, dir) in [("--depth", &args.depth), ("--calib", &args.calib)] {
        if !dir.is_dir() {
            return Err(CliError::Data(format!("{flag}: {} is not a directory", dir.display())));
        }
    }
    if !args.detections.exists() {
        return Err(CliError::Data(format!(
            "--detections: {} does not exist",
            args.detections.display()
        )));
    }
    let images = read_all_detections(&args.detections)?;
    let job = Job {
        args,
        cfg: &cfg,
        priors: cfg.prior_table(),
        settings: cfg.settings(),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Data(format!("worker pool: {e}")))?;
    let results: Vec<Result<(String, Diagnostics), CliError>> =
        pool.install(|| images.par_iter().map(|rec| job.label_image(rec)).collect());

    let mut files = Vec::with_capacity(images.len());
    let mut total = Diagnostics::default();
    for (rec, result) in images.iter().zip(results) {
        let (text, diag) = result?;
        total += diag;
        files.push((rec.image.clone(), text));
    }
    write_outputs(&args.out, &files)?;

    let summary = LabelSummary {
        config: cfg,
        images: images.len(),
        detections: total.detections,
        below_threshold: total.below_threshold,
        emitted: total.emitted,
        dropped_no_depth: total.dropped_no_depth,
        conflicts: total.conflicts,
        out: args.out.clone(),
    };
    if let Some(p) = &args.summary {
        crate::write_json(p, &summary)?;
    }
    Ok(summary)
}
