//! Catmull-Rom path smoothing with a per-span collision fallback.

use crate::planner::FreeSpace;
use nalgebra::Vector3;

/// Piecewise-linear path with arc-length lookup.
#[derive(Debug, Clone)]
pub struct Polyline {
    pub points: Vec<Vector3<f64>>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut s = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            s += (w[1] - w[0]).norm();
            cum.push(s);
        }
        Polyline { points, cum }
    }

    pub fn total_length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> Vector3<f64> {
        if self.points.len() == 1 || s <= 0.0 {
            return self.points[0];
        }
        let total = self.total_length();
        if s >= total {
            return *self.points.last().unwrap();
        }
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let seg_len = self.cum[i + 1] - self.cum[i];
        if seg_len < 1e-15 {
            return self.points[i];
        }
        let t = (s - self.cum[i]) / seg_len;
        self.points[i] + (self.points[i + 1] - self.points[i]) * t
    }

    /// Unit tangent of the segment containing arc length `s`; zero for
    /// degenerate paths.
    pub fn tangent_at(&self, s: f64) -> Vector3<f64> {
        if self.points.len() < 2 || self.total_length() < 1e-12 {
            return Vector3::zeros();
        }
        let s = s.clamp(0.0, self.total_length() - 1e-12);
        let mut i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        i = i.min(self.points.len() - 2);
        let d = self.points[i + 1] - self.points[i];
        let n = d.norm();
        if n < 1e-15 {
            Vector3::zeros()
        } else {
            d / n
        }
    }

    /// Vertices strictly between arc lengths s0 and s1.
    fn vertices_between(&self, s0: f64, s1: f64) -> Vec<Vector3<f64>> {
        self.cum
            .iter()
            .zip(&self.points)
            .filter(|(c, _)| **c > s0 + 1e-12 && **c < s1 - 1e-12)
            .map(|(_, p)| *p)
            .collect()
    }
}

/// Uniform Catmull-Rom interpolation between p1 and p2.
fn catmull_rom(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
    p3: &Vector3<f64>,
    t: f64,
) -> Vector3<f64> {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * ((p1 * 2.0)
        + (p2 - p0) * t
        + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
        + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
}

#[derive(Debug, Clone)]
pub struct SmoothParams {
    pub samples_per_segment: usize,
    pub clearance: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        SmoothParams {
            samples_per_segment: 8,
            clearance: 0.5,
        }
    }
}

/// Smooths a collision-free polyline with a Catmull-Rom spline through the
/// path endpoints and the midpoint of every segment, densified uniformly by
/// arc length. Corners between segments are cut, so the smoothed path in open
/// space is never longer than the input. Any smoothed span that would
/// collide is replaced by the original polyline portion, and the endpoints
/// are preserved exactly.
pub fn smooth_path(
    space: &FreeSpace,
    polyline: &[Vector3<f64>],
    params: &SmoothParams,
) -> Vec<Vector3<f64>> {
    // drop zero-length segments first
    let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(polyline.len());
    for p in polyline {
        if pts.last().map_or(true, |q: &Vector3<f64>| (p - q).norm() > 1e-12) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        return pts;
    }
    let path = Polyline::new(pts.clone());

    // knots: start, every segment midpoint, end (with their arc positions)
    let mut knots: Vec<(f64, Vector3<f64>)> = vec![(0.0, pts[0])];
    let mut s = 0.0;
    for w in pts.windows(2) {
        let len = (w[1] - w[0]).norm();
        knots.push((s + len / 2.0, (w[0] + w[1]) / 2.0));
        s += len;
    }
    knots.push((path.total_length(), *pts.last().unwrap()));

    let k = knots.len();
    let knot_at = |i: isize| -> Vector3<f64> {
        knots[i.clamp(0, k as isize - 1) as usize].1
    };

    let mut out: Vec<Vector3<f64>> = vec![pts[0]];
    for j in 0..k - 1 {
        let p0 = knot_at(j as isize - 1);
        let p1 = knot_at(j as isize);
        let p2 = knot_at(j as isize + 1);
        let p3 = knot_at(j as isize + 2);

        // oversample, then pick points uniform in arc length
        let oversample = params.samples_per_segment * 4;
        let mut dense = Vec::with_capacity(oversample + 1);
        for i in 0..=oversample {
            dense.push(catmull_rom(&p0, &p1, &p2, &p3, i as f64 / oversample as f64));
        }
        let dense_path = Polyline::new(dense);
        let mut span: Vec<Vector3<f64>> = Vec::with_capacity(params.samples_per_segment);
        for i in 1..=params.samples_per_segment {
            span.push(
                dense_path
                    .point_at(dense_path.total_length() * i as f64 / params.samples_per_segment as f64),
            );
        }

        // collision fallback: emit the original polyline portion instead
        let mut check = vec![*out.last().unwrap()];
        check.extend_from_slice(&span);
        if space.polyline_ok(&check, params.clearance) {
            out.extend_from_slice(&span);
        } else {
            let (s0, _) = knots[j];
            let (s1, p_end) = knots[j + 1];
            out.extend(path.vertices_between(s0, s1));
            out.push(p_end);
        }
    }
    // exact endpoint
    *out.last_mut().unwrap() = *pts.last().unwrap();
    out
}
