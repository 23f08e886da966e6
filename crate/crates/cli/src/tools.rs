use std::fmt::Write as _;
use std::path::PathBuf;

use pseudo3d::dataio::{read_calib, read_labels, write_labels_string, KittiLabelRecord};
use pseudo3d::eval3d::histogram_of;
use pseudo3d::geometry::{
    backproject, from_virtual, make_virtual_intrinsics, project, to_virtual, CameraIntrinsics,
    VirtualIntrinsics,
};
use pseudo3d::kernels::gradcheck::{run_suite, GradcheckOptions, GradcheckReport, KERNELS};
use pseudo3d::kernels::{outlier_filter, StdKind};
use pseudo3d::{Box3D, PipelineConfig};
use serde::Serialize;

use crate::{
    config_echo, finish_config, io_error, label_files, parse_std_kind, write_file, write_json, write_outputs,
    CliError, FilterArgs, GradcheckArgs, NormalizeArgs, StatsArgs,
};

#[derive(Serialize)]
struct GradcheckFile<'a> {
    config: &'a PipelineConfig,
    #[serde(flatten)]
    report: &'a GradcheckReport,
}

/// Runs the kernel suite; the summary is returned even when a kernel fails.
pub fn run_gradcheck(args: &GradcheckArgs, cfg: PipelineConfig) -> Result<(String, GradcheckReport), CliError> {
    let cfg = finish_config(cfg)?;
    if args.points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    if let Some(k) = &args.inject_fault {
        if !KERNELS.contains(&k.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown kernel {k:?}; expected one of {}",
                KERNELS.join(", ")
            )));
        }
    }
    let opts = GradcheckOptions {
        seed: args.seed,
        points: args.points,
        inject_fault: args.inject_fault.clone(),
        ..GradcheckOptions::default()
    };
    let report = run_suite(&opts);
    if let Some(p) = &args.report {
        write_json(p, &GradcheckFile { config: &cfg, report: &report })?;
    }
    let mut s = config_echo(&cfg);
    let _ = writeln!(s, "seed {} h {:e} tolerance {:e}", report.seed, report.h, report.tolerance);
    for k in &report.kernels {
        let _ = writeln!(
            s,
            "{:<17} points {:>4}  max_rel_err {:.3e}  {}",
            k.kernel,
            k.points,
            k.max_rel_err,
            if k.passed { "ok" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "{}", if report.passed { "all kernels passed" } else { "gradient check failed" });
    Ok((s, report))
}

pub fn run_stats(args: &StatsArgs, cfg: PipelineConfig) -> Result<String, CliError> {
    let cfg = finish_config(cfg)?;
    if !(args.bin_width > 0.0 && args.bin_width.is_finite()) {
        return Err(CliError::Usage(format!("--bin-width must be positive, got {}", args.bin_width)));
    }
    let files = label_files(&args.pred)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no label files", args.pred.display())));
    }
    let mut heights = Vec::new();
    for (_, path) in &files {
        heights.extend(
            read_labels(path)?
                .iter()
                .filter(|r| r.kind == args.class)
                .map(|r| r.dimensions[0]),
        );
    }
    let hist = histogram_of(&heights, args.bin_width).map_err(|e| {
        CliError::Data(format!("{}: class {}: {e}", args.pred.display(), args.class))
    })?;

    let mut columns = String::from("# bin_center count\n");
    for b in &hist.bins {
        let _ = writeln!(columns, "{:.6} {}", b.center(), b.count);
    }
    let mut s = config_echo(&cfg);
    let _ = writeln!(s, "class {} bin_width {}", args.class, hist.bin_width);
    let _ = writeln!(s, "count {}", hist.count);
    let _ = writeln!(s, "mean {:.6}", hist.mean);
    let _ = writeln!(s, "median {:.6}", hist.median);
    let _ = writeln!(s, "std {:.6}", hist.variance.sqrt());
    let _ = writeln!(s, "bins {}", hist.bins.len());
    match &args.out {
        Some(p) => write_file(p, &columns)?,
        None => s.push_str(&columns),
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub config: PipelineConfig,
    pub k: f64,
    pub std_kind: StdKind,
    pub median: f64,
    pub std: f64,
    pub tau: f64,
    pub losses: Vec<f64>,
    pub keep: Vec<bool>,
}

impl FilterReport {
    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    /// `index loss kept|dropped`, one line per loss.
    pub fn listing(&self) -> String {
        let mut s = String::from("# index loss status\n");
        for (i, (l, k)) in self.losses.iter().zip(&self.keep).enumerate() {
            let _ = writeln!(s, "{i} {l} {}", if *k { "kept" } else { "dropped" });
        }
        s
    }

    pub fn render(&self, with_listing: bool) -> String {
        let mut s = config_echo(&self.config);
        let _ = writeln!(
            s,
            "k {} median {} std {} tau {}\nkept {}\ndropped {}",
            self.k,
            self.median,
            self.std,
            self.tau,
            self.kept(),
            self.losses.len() - self.kept()
        );
        if with_listing {
            s.push_str(&self.listing());
        }
        s
    }
}

fn read_losses(path: &std::path::Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut losses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| {
            CliError::Data(format!("{}:{}: not a number: {t:?}", path.display(), i + 1))
        })?;
        if !v.is_finite() {
            return Err(CliError::Data(format!("{}:{}: loss is not finite", path.display(), i + 1)));
        }
        losses.push(v);
    }
    if losses.is_empty() {
        return Err(CliError::Data(format!("{}: no losses", path.display())));
    }
    Ok(losses)
}

pub fn run_filter(args: &FilterArgs, mut cfg: PipelineConfig) -> Result<FilterReport, CliError> {
    if let Some(k) = args.k {
        cfg.outlier_k = k;
    }
    if let Some(s) = &args.std {
        cfg.outlier_std = parse_std_kind(s)?;
    }
    let cfg = finish_config(cfg)?;
    let losses = read_losses(&args.losses)?;
    let f = outlier_filter(&losses, cfg.outlier_k, cfg.outlier_std)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = FilterReport {
        k: cfg.outlier_k,
        std_kind: cfg.outlier_std,
        median: f.median,
        std: f.std,
        tau: f.tau,
        losses,
        keep: f.keep,
        config: cfg,
    };
    if let Some(p) = &args.out {
        write_file(p, &report.listing())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizeSummary {
    pub config: PipelineConfig,
    pub inverse: bool,
    pub files: usize,
    pub boxes: usize,
    pub out: PathBuf,
}

impl NormalizeSummary {
    pub fn render(&self) -> String {
        format!(
            "{}direction {}\nfiles {}\nboxes {}\n",
            config_echo(&self.config),
            if self.inverse { "virtual-to-camera" } else { "camera-to-virtual" },
            self.files,
            self.boxes
        )
    }
}

fn scale_bbox(bbox: [f64; 4], vi: &VirtualIntrinsics, inverse: bool) -> [f64; 4] {
    let (sx, sy) = if inverse { (1.0 / vi.sx, 1.0 / vi.sy) } else { (vi.sx, vi.sy) };
    [bbox[0] * sx, bbox[1] * sy, bbox[2] * sx, bbox[3] * sy]
}

fn convert(
    rec: &KittiLabelRecord,
    intr: &CameraIntrinsics,
    cfg: &PipelineConfig,
    inverse: bool,
) -> Result<KittiLabelRecord, pseudo3d::geometry::GeometryError> {
    let spec = &cfg.virtual_camera;
    let vi = make_virtual_intrinsics(intr, spec)?;
    let b = rec.to_box();
    let c = b.center();
    let center = if inverse {
        let (u, v) = project(&c, &vi.as_camera())?;
        from_virtual(u, v, c.z, intr, spec)?
    } else {
        let (u, v) = project(&c, intr)?;
        let p = to_virtual(u, v, c.z, intr, spec)?;
        backproject(p.u, p.v, p.depth, &vi.as_camera())?
    };
    let moved = Box3D::from_center(b.class.clone(), center, [b.h, b.w, b.l], b.yaw, b.score);
    let mut out = KittiLabelRecord::from_box(&moved, scale_bbox(rec.bbox, &vi, inverse), rec.score.is_some());
    out.truncated = rec.truncated;
    out.occluded = rec.occluded;
    Ok(out)
}

pub fn run_normalize(args: &NormalizeArgs, mut cfg: PipelineConfig) -> Result<NormalizeSummary, CliError> {
    args.camera.apply(&mut cfg);
    let cfg = finish_config(cfg)?;
    let files = label_files(&args.labels)?;
    let mut outputs = Vec::with_capacity(files.len());
    let mut boxes = 0;
    for (id, path) in &files {
        let calib_path = args.calib.join(format!("{id}.txt"));
        if !calib_path.is_file() {
            return Err(CliError::Data(format!(
                "image {id}: missing calibration {}",
                calib_path.display()
            )));
        }
        let intr = read_calib(&calib_path)?.intrinsics(&cfg.camera, args.image_size)?;
        let records = read_labels(path)?
            .iter()
            .map(|r| convert(r, &intr, &cfg, args.inverse))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        boxes += records.len();
        outputs.push((id.clone(), write_labels_string(&records)));
    }
    write_outputs(&args.out, &outputs)?;
    Ok(NormalizeSummary {
        config: cfg,
        inverse: args.inverse,
        files: files.len(),
        boxes,
        out: args.out.clone(),
    })
}
