use std::fmt::Write as _;
use std::path::Path;

use super::{fixed, DataError, Result};
use crate::pseudolabel::Box3D;

/// One line of a KITTI object label file.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabelRecord {
    pub kind: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    /// `[left, top, right, bottom]`, pixels.
    pub bbox: [f64; 4],
    /// `[h, w, l]`, metres.
    pub dimensions: [f64; 3],
    /// Bottom-center `[x, y, z]`, camera frame.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabelRecord {
    pub fn to_box(&self) -> Box3D {
        let [h, w, l] = self.dimensions;
        let [x, y, z] = self.location;
        Box3D {
            class: self.kind.clone(),
            x,
            y,
            z,
            h,
            w,
            l,
            yaw: self.rotation_y,
            score: self.score.unwrap_or(1.0),
        }
    }

    /// Label for `b` with the observation angle derived from its position.
    pub fn from_box(b: &Box3D, bbox: [f64; 4], with_score: bool) -> Self {
        Self {
            kind: b.class.clone(),
            truncated: 0.0,
            occluded: 0,
            alpha: crate::geometry::normalize_angle(b.yaw - b.x.atan2(b.z)),
            bbox,
            dimensions: [b.h, b.w, b.l],
            location: [b.x, b.y, b.z],
            rotation_y: b.yaw,
            score: with_score.then_some(b.score),
        }
    }

    pub fn bbox_height(&self) -> f64 {
        self.bbox[3] - self.bbox[1]
    }

    /// Geometry at two decimals, score at four.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(96);
        s.push_str(&self.kind);
        let _ = write!(s, " {} {} {}", fixed(self.truncated, 2), self.occluded, fixed(self.alpha, 2));
        for v in self
            .bbox
            .iter()
            .chain(&self.dimensions)
            .chain(&self.location)
            .chain(std::iter::once(&self.rotation_y))
        {
            s.push(' ');
            s.push_str(&fixed(*v, 2));
        }
        if let Some(score) = self.score {
            s.push(' ');
            s.push_str(&fixed(score, 4));
        }
        s
    }
}

/// Parses one label line; `line` is only used for error positions.
pub fn parse_label_line(text: &str, path: &Path, line: usize) -> Result<KittiLabelRecord> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(DataError::parse(
            path,
            line,
            format!("expected 15 or 16 fields, found {}", fields.len()),
        ));
    }
    let num = |i: usize, name: &str| -> Result<f64> {
        let v: f64 = fields[i]
            .parse()
            .map_err(|_| DataError::parse(path, line, format!("field {} ({name}) is not a number: {:?}", i + 1, fields[i])))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DataError::parse(path, line, format!("field {} ({name}) is not finite", i + 1)))
        }
    };
    let occluded = fields[2].parse::<i32>().map_err(|_| {
        DataError::parse(path, line, format!("field 3 (occluded) is not an integer: {:?}", fields[2]))
    })?;
    Ok(KittiLabelRecord {
        kind: fields[0].to_string(),
        truncated: num(1, "truncated")?,
        occluded,
        alpha: num(3, "alpha")?,
        bbox: [num(4, "left")?, num(5, "top")?, num(6, "right")?, num(7, "bottom")?],
        dimensions: [num(8, "height")?, num(9, "width")?, num(10, "length")?],
        location: [num(11, "x")?, num(12, "y")?, num(13, "z")?],
        rotation_y: num(14, "rotation_y")?,
        score: if fields.len() == 16 { Some(num(15, "score")?) } else { None },
    })
}

/// Reads a label file; blank lines are skipped.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<KittiLabelRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label_line(l, path, i + 1))
        .collect()
}

pub fn write_labels_string(records: &[KittiLabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn write_labels(records: &[KittiLabelRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_labels_string(records)).map_err(|e| DataError::io(path, e))
}
