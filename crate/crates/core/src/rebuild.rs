//! Tube surface reconstruction from a centerline and per-face error maps.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{point_segment_distance, OrthonormalFrame, Point3, Vec3};
use crate::ingest::TriMesh;

#[derive(Debug, Error, PartialEq)]
pub enum RebuildError {
    #[error("centerline points {index} and {} coincide", index + 1)]
    DegenerateTangent { index: usize },
    #[error("need at least 2 centerline points")]
    TooFewPoints,
    #[error("need at least 3 sides, got {0}")]
    TooFewSides(usize),
}

/// Unit tangents by central differences. End tangents mirror their neighbor
/// across the end chord, which is exact on circular arcs.
pub fn polyline_tangents(points: &[Point3]) -> Result<Vec<Vec3>, RebuildError> {
    let n = points.len();
    if n < 2 {
        return Err(RebuildError::TooFewPoints);
    }
    let mut chords = Vec::with_capacity(n - 1);
    for (i, w) in points.windows(2).enumerate() {
        let d = w[1] - w[0];
        if !(d.norm() > 1e-12) {
            return Err(RebuildError::DegenerateTangent { index: i });
        }
        chords.push(d.normalize());
    }
    if n == 2 {
        return Ok(vec![chords[0], chords[0]]);
    }
    let mut t = vec![Vec3::zeros(); n];
    for i in 1..n - 1 {
        let d = points[i + 1] - points[i - 1];
        t[i] = if d.norm() > 1e-12 { d.normalize() } else { chords[i] };
    }
    let mirror = |c: &Vec3, t1: &Vec3| (c * (2.0 * c.dot(t1)) - t1).normalize();
    t[0] = mirror(&chords[0], &t[1]);
    t[n - 1] = mirror(&chords[n - 2], &t[n - 2]);
    Ok(t)
}

/// Tangent, `u` and `v` per point; each `u` is the previous one with the new
/// tangent projected out, so the frames do not twist.
pub fn rotation_minimizing_frames(points: &[Point3]) -> Result<Vec<[Vec3; 3]>, RebuildError> {
    let tangents = polyline_tangents(points)?;
    let mut out = Vec::with_capacity(points.len());
    let mut u = OrthonormalFrame::from_direction(tangents[0])
        .map_err(|_| RebuildError::DegenerateTangent { index: 0 })?
        .u;
    for (i, t) in tangents.iter().enumerate() {
        if i > 0 {
            let proj = u - t * u.dot(t);
            u = if proj.norm() > 1e-9 {
                proj.normalize()
            } else {
                OrthonormalFrame::from_direction(*t)
                    .map_err(|_| RebuildError::DegenerateTangent { index: i })?
                    .u
            };
        }
        out.push([*t, u, t.cross(&u)]);
    }
    Ok(out)
}

/// Sweeps a circle of radius `radius` along the centerline using
/// rotation-minimizing frames. Caps are left open.
pub fn sweep_tube(points: &[Point3], radius: f64, sides: usize) -> Result<TriMesh, RebuildError> {
    if sides < 3 {
        return Err(RebuildError::TooFewSides(sides));
    }
    let frames = rotation_minimizing_frames(points)?;
    let mut vertices = Vec::with_capacity(points.len() * sides);
    for (p, [_, u, v]) in points.iter().zip(&frames) {
        for k in 0..sides {
            let th = std::f64::consts::TAU * k as f64 / sides as f64;
            vertices.push(p + (u * th.cos() + v * th.sin()) * radius);
        }
    }
    let id = |i: usize, k: usize| i * sides + (k % sides);
    let mut faces = Vec::with_capacity(2 * sides * (points.len() - 1));
    for i in 0..points.len() - 1 {
        for k in 0..sides {
            faces.push([id(i, k), id(i, k + 1), id(i + 1, k)]);
            faces.push([id(i, k + 1), id(i + 1, k + 1), id(i + 1, k)]);
        }
    }
    Ok(TriMesh::new(vertices, faces))
}

/// Distance from `q` to the polyline, and whether the nearest point lies
/// within the polyline's span (not beyond either end).
pub fn polyline_distance(q: &Point3, points: &[Point3]) -> (f64, bool) {
    if points.len() == 1 {
        return ((q - points[0]).norm(), false);
    }
    let mut best = (f64::INFINITY, 0usize);
    for j in 0..points.len() - 1 {
        let (d, _) = point_segment_distance(q, &points[j], &points[j + 1]);
        if d < best.0 {
            best = (d, j);
        }
    }
    let last = points.len() - 2;
    let before = best.1 == 0 && (q - points[0]).dot(&(points[1] - points[0])) < 0.0;
    let after = best.1 == last && (q - points[last + 1]).dot(&(points[last + 1] - points[last])) > 0.0;
    (best.0, !(before || after))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    /// `(dist(M, centerline) - R)²` per face.
    pub values: Vec<f64>,
    /// Face projects inside the centerline span.
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    pub rms: f64,
}

impl ErrorStats {
    pub fn of<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (mut n, mut s, mut s2, mut mx) = (0usize, 0.0, 0.0, 0.0f64);
        for &v in values {
            n += 1;
            s += v;
            s2 += v * v;
            mx = mx.max(v);
        }
        let d = n.max(1) as f64;
        Self {
            count: n,
            mean: s / d,
            max: mx,
            rms: (s2 / d).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub all: ErrorStats,
    pub covered: ErrorStats,
}

impl ErrorMap {
    pub fn summary(&self) -> ErrorSummary {
        ErrorSummary {
            all: ErrorStats::of(&self.values),
            covered: ErrorStats::of(self.values.iter().zip(&self.covered).filter(|(_, c)| **c).map(|(v, _)| v)),
        }
    }
}

pub fn error_map(face_centers: &[Point3], centerline: &[Point3], radius: f64) -> Result<ErrorMap, RebuildError> {
    if centerline.is_empty() {
        return Err(RebuildError::TooFewPoints);
    }
    let (values, covered) = face_centers
        .par_iter()
        .map(|m| {
            let (d, c) = polyline_distance(m, centerline);
            ((d - radius) * (d - radius), c)
        })
        .unzip();
    Ok(ErrorMap { values, covered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    #[test]
    fn two_point_square_tube() {
        let m = sweep_tube(&[Point3::zeros(), Point3::new(0.0, 0.0, 5.0)], 1.0, 4).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 8);
        for v in &m.vertices {
            assert_abs_diff_eq!((v.x * v.x + v.y * v.y).sqrt(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn faces_point_outward() {
        let pts: Vec<Point3> = (0..5).map(|k| Point3::new(k as f64, 0.0, 0.0)).collect();
        let m = sweep_tube(&pts, 2.0, 12).unwrap();
        for f in 0..m.faces.len() {
            let [a, b, c] = m.corners(f);
            let n = (b - a).cross(&(c - a));
            let center = m.face_center(f);
            let radial = Vec3::new(0.0, center.y, center.z);
            assert!(n.dot(&radial) > 0.0);
        }
    }

    #[test]
    fn straight_many_points() {
        let d = Vec3::new(1.0, -2.0, 0.5).normalize();
        let pts: Vec<Point3> = (0..9).map(|k| Point3::new(3.0, 1.0, -2.0) + d * (k as f64 * 1.3)).collect();
        let m = sweep_tube(&pts, 2.5, 16).unwrap();
        for v in &m.vertices {
            let w = v - pts[0];
            assert_abs_diff_eq!((w - d * w.dot(&d)).norm(), 2.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn quarter_arc_lies_on_torus() {
        let pts: Vec<Point3> = (0..=20)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 / 20.0;
                Point3::new(20.0 * t.cos(), 20.0 * t.sin(), 0.0)
            })
            .collect();
        let m = sweep_tube(&pts, 5.0, 24).unwrap();
        for v in &m.vertices {
            let rho = (v.x * v.x + v.y * v.y).sqrt() - 20.0;
            assert_abs_diff_eq!((rho * rho + v.z * v.z).sqrt(), 5.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn interior_edges_shared_twice() {
        let pts: Vec<Point3> = (0..6)
            .map(|k| {
                let t = k as f64 * 0.3;
                Point3::new(10.0 * t.cos(), 10.0 * t.sin(), k as f64)
            })
            .collect();
        let sides = 10;
        let m = sweep_tube(&pts, 1.0, sides).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &m.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary = count.values().filter(|&&c| c == 1).count();
        assert_eq!(boundary, 2 * sides);
        assert!(count.values().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn degenerate_tangent() {
        let p = [Point3::zeros(), Point3::zeros(), Point3::x()];
        assert_eq!(sweep_tube(&p, 1.0, 8), Err(RebuildError::DegenerateTangent { index: 0 }));
    }

    #[test]
    fn error_map_of_own_sweep_is_zero() {
        let pts: Vec<Point3> = (0..=30)
            .map(|k| {
                let t = k as f64 * 0.05;
                Point3::new(15.0 * t.cos(), 15.0 * t.sin(), 0.0)
            })
            .collect();
        let m = sweep_tube(&pts, 3.0, 20).unwrap();
        let e = error_map(&m.vertices, &pts, 3.0).unwrap();
        // vertices sit exactly on rings; distance to the chord polyline is
        // at most R, and equals R wherever the ring plane is the bisector
        assert!(e.values.iter().all(|v| *v < 1e-2));
        let straight: Vec<Point3> = (0..4).map(|k| Point3::new(k as f64, 0.0, 0.0)).collect();
        let s = sweep_tube(&straight, 2.0, 12).unwrap();
        let e = error_map(&s.vertices, &straight, 2.0).unwrap();
        assert!(e.values.iter().all(|v| *v < 1e-9));
    }

    #[test]
    fn unit_offset_gives_unit_error() {
        let c = [Point3::zeros(), Point3::new(0.0, 0.0, 10.0)];
        let e = error_map(&[Point3::new(3.0, 0.0, 5.0)], &c, 2.0).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-12);
        assert!(e.covered[0]);
        let e = error_map(&[Point3::new(3.0, 0.0, -1.0)], &c, 2.0).unwrap();
        assert!(!e.covered[0]);
    }

    #[test]
    fn stats() {
        let s = ErrorStats::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.max, 3.0);
        assert_abs_diff_eq!(s.rms, 5f64.sqrt(), epsilon = 1e-15);
    }
}
