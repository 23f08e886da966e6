use crate::pseudolabel::Box3D;

/// Intersections below this area (m^2) count as empty.
pub const AREA_EPS: f64 = 1e-12;

pub type Point2 = [f64; 2];

/// Ground-plane footprint corners `(x, z)` in counter-clockwise order.
///
/// Length runs along the heading: a box with yaw `ry` has its length axis at
/// `(cos ry, -sin ry)` in the `(x, z)` plane, matching KITTI's rotation about
/// the downward y axis.
pub fn bev_corners(b: &Box3D) -> [Point2; 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hl, hw) = (0.5 * b.l, 0.5 * b.w);
    let along = [c * hl, -s * hl];
    let across = [s * hw, c * hw];
    let corner = |a: f64, w: f64| {
        [
            b.x + a * along[0] + w * across[0],
            b.z + a * along[1] + w * across[1],
        ]
    };
    let mut pts = [
        corner(1.0, 1.0),
        corner(-1.0, 1.0),
        corner(-1.0, -1.0),
        corner(1.0, -1.0),
    ];
    if signed_area(&pts) < 0.0 {
        pts.reverse();
    }
    pts
}

pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise
/// polygon `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (dc, dp) = (cross(a, b, cur), cross(a, b, prev));
            if dc >= 0.0 {
                if dp < 0.0 {
                    output.push(intersect(prev, cur, dp, dc));
                }
                output.push(cur);
            } else if dp >= 0.0 {
                output.push(intersect(prev, cur, dp, dc));
            }
        }
    }
    output
}

fn intersect(p: Point2, q: Point2, dp: f64, dq: f64) -> Point2 {
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Ground-plane intersection area of two boxes.
pub fn bev_intersection(a: &Box3D, b: &Box3D) -> f64 {
    let poly = clip_convex(&bev_corners(a), &bev_corners(b));
    if poly.len() < 3 {
        return 0.0;
    }
    let area = signed_area(&poly).abs();
    if area < AREA_EPS {
        0.0
    } else {
        area
    }
}

pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.w * a.l + b.w * b.l - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Overlap of the vertical extents `[y - h, y]`.
pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    (a.y.min(b.y) - (a.y - a.h).max(b.y - b.h)).max(0.0)
}

pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let dy = vertical_overlap(a, b);
    if dy == 0.0 {
        return 0.0;
    }
    let inter = bev_intersection(a, b) * dy;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Axis-aligned 2D IoU of `[left, top, right, bottom]` boxes.
pub fn iou2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let area = |r: &[f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}
