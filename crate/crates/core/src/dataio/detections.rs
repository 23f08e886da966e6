//! Detection interchange: JSON Lines, one image per line.
//!
//! ```text
//! {"version":1,"image":"000123","detections":[
//!     {"class":"Pedestrian","bbox":[712.4,143.0,810.7,307.9],"score":0.93,"yaw":-0.2}]}
//! ```
//!
//! `bbox` is `[left, top, right, bottom]` in pixels; `yaw` (radians) is
//! optional. Blank lines are ignored.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Result};
use crate::pseudolabel::{Detection2D, Yaw};

pub const DETECTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionEntry {
    pub class: String,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
}

impl DetectionEntry {
    pub fn to_detection(&self) -> Detection2D {
        Detection2D {
            class: self.class.clone(),
            left: self.bbox[0],
            top: self.bbox[1],
            right: self.bbox[2],
            bottom: self.bbox[3],
            score: self.score,
        }
    }

    pub fn yaw(&self) -> Option<Yaw> {
        self.yaw.map(Yaw::new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDetections {
    pub version: u32,
    pub image: String,
    pub detections: Vec<DetectionEntry>,
}

impl ImageDetections {
    pub fn new(image: impl Into<String>, detections: Vec<DetectionEntry>) -> Self {
        Self {
            version: DETECTION_SCHEMA_VERSION,
            image: image.into(),
            detections,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionFile {
    pub images: Vec<ImageDetections>,
}

fn check_record(rec: &ImageDetections) -> std::result::Result<(), String> {
    if rec.version != DETECTION_SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema version {} (expected {DETECTION_SCHEMA_VERSION})",
            rec.version
        ));
    }
    let id = &rec.image;
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
        return Err(format!("image id {id:?} is not a plain file stem"));
    }
    for (i, d) in rec.detections.iter().enumerate() {
        let [l, t, r, b] = d.bbox;
        if !d.bbox.iter().all(|v| v.is_finite()) || !(l < r && t < b) {
            return Err(format!(
                "detection {i}: bbox {:?} needs left < right and top < bottom",
                d.bbox
            ));
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(format!("detection {i}: score {} outside [0, 1]", d.score));
        }
        if d.yaw.is_some_and(|y| !y.is_finite()) {
            return Err(format!("detection {i}: yaw is not finite"));
        }
    }
    Ok(())
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetectionFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut images = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ImageDetections = serde_json::from_str(line)
            .map_err(|e| DataError::parse(path, i + 1, e.to_string()))?;
        check_record(&rec).map_err(|m| DataError::parse(path, i + 1, m))?;
        if !seen.insert(rec.image.clone()) {
            return Err(DataError::parse(path, i + 1, format!("duplicate image {:?}", rec.image)));
        }
        images.push(rec);
    }
    Ok(DetectionFile { images })
}

pub fn write_detections(file: &DetectionFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for rec in &file.images {
        out.push_str(&serde_json::to_string(rec).expect("detection records serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dets.jsonl");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn reads_records() {
        let (_d, p) = write(concat!(
            r#"{"version":1,"image":"000001","detections":[{"class":"Car","bbox":[1,2,30,40],"score":0.9,"yaw":0.5}]}"#,
            "\n\n",
            r#"{"version":1,"image":"000002","detections":[]}"#,
            "\n"
        ));
        let f = read_detections(&p).unwrap();
        assert_eq!(f.images.len(), 2);
        assert_eq!(f.images[0].detections[0].yaw, Some(0.5));
        assert_eq!(f.images[0].detections[0].to_detection().right, 30.0);
    }

    #[test]
    fn inverted_bbox_rejected() {
        let (_d, p) = write(r#"{"version":1,"image":"a","detections":[{"class":"Car","bbox":[30,2,1,40],"score":0.9}]}"#);
        assert!(matches!(read_detections(&p), Err(DataError::Parse { line: 1, .. })));
    }

    #[test]
    fn unknown_version_and_fields_rejected() {
        let (_d, p) = write(r#"{"version":2,"image":"a","detections":[]}"#);
        assert!(read_detections(&p).is_err());
        let (_d, p) = write(r#"{"version":1,"image":"a","detections":[],"extra":1}"#);
        assert!(read_detections(&p).is_err());
        let (_d, p) = write(r#"{"version":1,"image":"../a","detections":[]}"#);
        assert!(read_detections(&p).is_err());
    }

    #[test]
    fn duplicate_image_rejected() {
        let line = r#"{"version":1,"image":"a","detections":[]}"#;
        let (_d, p) = write(&format!("{line}\n{line}\n"));
        assert!(matches!(read_detections(&p), Err(DataError::Parse { line: 2, .. })));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.jsonl");
        let file = DetectionFile {
            images: vec![ImageDetections::new(
                "img7",
                vec![DetectionEntry { class: "Pedestrian".into(), bbox: [1.5, 2.0, 9.0, 30.25], score: 0.5, yaw: None }],
            )],
        };
        write_detections(&file, &p).unwrap();
        assert_eq!(read_detections(&p).unwrap(), file);
    }
}
