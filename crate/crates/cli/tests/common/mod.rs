//! Synthetic KITTI-like scenes for command tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pseudo3d::dataio::{write_depth, write_detections, DetectionEntry, DetectionFile, ImageDetections};
use pseudo3d::pseudolabel::DepthRaster;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const IMAGE_W: u32 = 1242;
pub const IMAGE_H: u32 = 375;
/// Rows of the depth raster with no valid depth.
pub const SKY_ROWS: u32 = 24;

pub struct Fixture {
    pub detections: PathBuf,
    pub depth: PathBuf,
    pub calib: PathBuf,
    pub ids: Vec<String>,
}

pub fn calib_text(fx: f64, fy: f64, cx: f64, cy: f64, size: Option<(u32, u32)>) -> String {
    let p = format!("{fx:.6e} 0.000000e+00 {cx:.6e} 0.000000e+00 0.000000e+00 {fy:.6e} {cy:.6e} 0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00");
    let mut s = String::new();
    for name in ["P0", "P1", "P2", "P3"] {
        let _ = writeln!(s, "{name}: {p}");
    }
    s.push_str("R0_rect: 1 0 0 0 1 0 0 0 1\n");
    s.push_str("Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n");
    if let Some((w, h)) = size {
        let _ = writeln!(s, "image_size: {w} {h}");
    }
    s
}

/// Half-resolution depth that falls off with image height, an invalid sky
/// band and scattered invalid pixels.
fn depth_raster(rng: &mut ChaCha8Rng) -> DepthRaster {
    let (w, h) = (IMAGE_W / 2, IMAGE_H / 2 + 1);
    let far = rng.random_range(40.0f32..70.0);
    let mut values = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let d = if y < SKY_ROWS {
                f32::NAN
            } else if rng.random_bool(0.02) {
                0.0
            } else {
                let t = (y - SKY_ROWS) as f32 / (h - SKY_ROWS) as f32;
                far * (1.0 - 0.9 * t) + 0.002 * x as f32
            };
            values.push(d);
        }
    }
    DepthRaster::from_values(w, h, values).unwrap()
}

fn detection(rng: &mut ChaCha8Rng, sky: bool) -> DetectionEntry {
    let class = ["Car", "Car", "Pedestrian", "Cyclist", "Van"][rng.random_range(0..5)];
    let (bw, bh) = match class {
        "Pedestrian" => (rng.random_range(15.0..60.0), rng.random_range(40.0..160.0)),
        "Cyclist" => (rng.random_range(25.0..90.0), rng.random_range(40.0..140.0)),
        _ => (rng.random_range(40.0..260.0), rng.random_range(25.0..150.0)),
    };
    let left = rng.random_range(0.0..(IMAGE_W as f64 - bw));
    let top = if sky {
        0.0
    } else {
        rng.random_range(60.0..(IMAGE_H as f64 - bh))
    };
    let bottom = if sky { 2.0 * SKY_ROWS as f64 - 10.0 } else { top + bh };
    let round = |v: f64| (v * 100.0).round() / 100.0;
    DetectionEntry {
        class: class.to_string(),
        bbox: [round(left), round(top), round(left + bw), round(bottom)],
        score: round(rng.random_range(0.02..1.0)),
        yaw: Some(round(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))),
    }
}

/// Writes `n` images of detections, depth and calibration under `root`.
pub fn write_fixture(root: &Path, n: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fx = Fixture {
        detections: root.join("detections"),
        depth: root.join("depth"),
        calib: root.join("calib"),
        ids: (0..n).map(|i| format!("{i:06}")).collect(),
    };
    for d in [&fx.detections, &fx.depth, &fx.calib] {
        std::fs::create_dir_all(d).unwrap();
    }
    let mut images = Vec::new();
    for id in &fx.ids {
        let f = rng.random_range(700.0..760.0);
        let size = rng.random_bool(0.5).then_some((IMAGE_W, IMAGE_H));
        let text = calib_text(f, f, 600.0 + rng.random_range(-10.0..10.0), 180.0, size);
        std::fs::write(fx.calib.join(format!("{id}.txt")), text).unwrap();
        let raster = if size.is_some() {
            depth_raster(&mut rng)
        } else {
            // Without an image_size line the raster size stands in for it.
            let half = depth_raster(&mut rng);
            upsample(&half)
        };
        write_depth(&raster, fx.depth.join(format!("{id}.depth"))).unwrap();

        let count = rng.random_range(0..9);
        let mut dets: Vec<DetectionEntry> = (0..count)
            .map(|_| {
                let sky = rng.random_bool(0.1);
                detection(&mut rng, sky)
            })
            .collect();
        if count >= 2 && rng.random_bool(0.5) {
            // A box overlapping the first one's center forces the grid search.
            let first = dets[0].bbox;
            let (cu, cv) = (0.5 * (first[0] + first[2]), 0.5 * (first[1] + first[3]));
            dets.push(DetectionEntry {
                class: "Pedestrian".into(),
                bbox: [cu - 12.0, cv - 30.0, cu + 12.0, cv + 30.0],
                score: 0.8,
                yaw: Some(0.3),
            });
        }
        images.push(ImageDetections::new(id.clone(), dets));
    }
    // Two shards exercise the directory reader.
    let (a, b) = images.split_at(n / 2);
    write_detections(&DetectionFile { images: b.to_vec() }, fx.detections.join("part-b.jsonl")).unwrap();
    write_detections(&DetectionFile { images: a.to_vec() }, fx.detections.join("part-a.jsonl")).unwrap();
    fx
}

fn upsample(half: &DepthRaster) -> DepthRaster {
    let (w, h) = (IMAGE_W, IMAGE_H);
    let mut values = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = ((x / 2).min(half.width() - 1), (y / 2).min(half.height() - 1));
            values.push(half.values()[(sy * half.width() + sx) as usize]);
        }
    }
    DepthRaster::from_values(w, h, values).unwrap()
}

/// Every file under `dir` keyed by name.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        out.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&p).unwrap(),
        );
    }
    out
}

pub fn label_line(kind: &str, bbox: [f64; 4], hwl: [f64; 3], xyz: [f64; 3], ry: f64, score: Option<f64>) -> String {
    let mut s = format!(
        "{kind} 0.00 0 0.00 {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2}",
        bbox[0], bbox[1], bbox[2], bbox[3], hwl[0], hwl[1], hwl[2], xyz[0], xyz[1], xyz[2], ry
    );
    if let Some(sc) = score {
        let _ = write!(s, " {sc:.4}");
    }
    s
}
