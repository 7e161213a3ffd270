//! Straight / circular-arc segmentation of a centerline polyline.
//!
//! The polyline is mapped to its tangent space (cumulative length against
//! cumulative turning). Runs of nearly zero turning are straight; remaining
//! runs are grown while their tangent-space midpoints stay close to a line,
//! which is the signature of constant curvature. Arcs are then fitted in 3D
//! and rejected (split and flagged) when they are not planar enough.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::geom::{Point3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("centerline points {index} and {} coincide", index + 1)]
    DuplicatePoint { index: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("points are collinear")]
    Collinear,
}

/// Tangent-space image of a polyline `C_0..C_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSpacePolygon {
    /// `l_i = |C_i C_{i+1}|`, one per edge.
    pub lengths: Vec<f64>,
    /// Turning angle at each vertex; the two end vertices hold 0.
    pub angles: Vec<f64>,
    /// `T_02, T_11, T_12, ..., T_n1`.
    pub t: Vec<[f64; 2]>,
    /// `M_i`, midpoint of `T_i2 T_(i+1)1`, one per edge.
    pub midpoints: Vec<[f64; 2]>,
}

impl TangentSpacePolygon {
    pub fn edge_count(&self) -> usize {
        self.lengths.len()
    }
}

fn turning_angle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn tangent_space_transform(points: &[Point3]) -> Result<TangentSpacePolygon, DecomposeError> {
    if points.len() < 3 {
        return Err(DecomposeError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() - 1;
    let edges: Vec<Vec3> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let mut lengths = Vec::with_capacity(n);
    for (i, e) in edges.iter().enumerate() {
        let l = e.norm();
        if !(l > 0.0) {
            return Err(DecomposeError::DuplicatePoint { index: i });
        }
        lengths.push(l);
    }
    let mut angles = vec![0.0; n + 1];
    for i in 1..n {
        angles[i] = turning_angle(&edges[i - 1], &edges[i]);
    }
    let mut t = Vec::with_capacity(2 * n);
    let mut midpoints = Vec::with_capacity(n);
    let mut prev2 = [0.0, 0.0];
    t.push(prev2);
    for i in 1..=n {
        let t1 = [prev2[0] + lengths[i - 1], prev2[1]];
        midpoints.push([0.5 * (prev2[0] + t1[0]), 0.5 * (prev2[1] + t1[1])]);
        t.push(t1);
        if i < n {
            let t2 = [t1[0], t1[1] + angles[i]];
            t.push(t2);
            prev2 = t2;
        }
    }
    Ok(TangentSpacePolygon {
        lengths,
        angles,
        t,
        midpoints,
    })
}

/// Total-least-squares line through 2D points: returns the slope angle and
/// the largest orthogonal deviation.
pub fn fit_line_2d(pts: &[[f64; 2]]) -> (f64, f64) {
    let k = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0] / k, y + p[1] / k));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (nx, ny) = (-theta.sin(), theta.cos());
    let dev = pts
        .iter()
        .map(|p| ((p[0] - mx) * nx + (p[1] - my) * ny).abs())
        .fold(0.0, f64::max);
    (theta, dev)
}

/// Slope of the midpoint line, an estimate of the curvature `1/r`.
pub fn midpoint_slope(tsp: &TangentSpacePolygon, edges: std::ops::RangeInclusive<usize>) -> f64 {
    fit_line_2d(&tsp.midpoints[edges]).0.tan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SegmentLabel {
    Straight,
    Arc,
}

/// A labeled range of centerline point indices, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRange {
    pub start: usize,
    pub end: usize,
    pub label: SegmentLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecomposeParams {
    pub alpha_flat: f64,
    pub nu: f64,
    pub min_len: usize,
    /// Largest RMS distance of points to a fitted arc or line.
    pub residual_threshold: f64,
    /// Adjacent straights closer than this angle are merged.
    pub straight_merge_angle: f64,
    /// Adjacent arcs whose radii differ by less than this fraction are merged.
    pub arc_radius_tolerance: f64,
}

impl DecomposeParams {
    pub fn new(gridstep: f64) -> Self {
        Self {
            alpha_flat: 0.05,
            nu: 0.15,
            min_len: 3,
            residual_threshold: 0.3 * gridstep,
            straight_merge_angle: 0.1,
            arc_radius_tolerance: 0.1,
        }
    }
}

/// Labels the polyline behind `tsp` into straight and arc runs.
pub fn detect_arcs_and_lines(tsp: &TangentSpacePolygon, alpha_flat: f64, nu: f64, min_len: usize) -> Vec<LabeledRange> {
    let n = tsp.edge_count();
    let mut flat_runs: Vec<(usize, usize)> = Vec::new();
    let mut v = 1;
    while v < n {
        if tsp.angles[v] <= alpha_flat {
            let a = v;
            while v + 1 < n && tsp.angles[v + 1] <= alpha_flat {
                v += 1;
            }
            flat_runs.push((a, v));
        }
        v += 1;
    }

    // edge ranges, inclusive
    let mut edge_ranges: Vec<(usize, usize, SegmentLabel)> = Vec::new();
    let push_arc = |lo: usize, hi: usize, out: &mut Vec<(usize, usize, SegmentLabel)>| {
        let mut s = lo;
        while s <= hi {
            let mut e = s;
            while e < hi && fit_line_2d(&tsp.midpoints[s..=e + 1]).1 <= nu {
                e += 1;
            }
            out.push((s, e, SegmentLabel::Arc));
            s = e + 1;
        }
    };
    match (flat_runs.first(), flat_runs.last()) {
        (Some(&(a0, _)), Some(&(_, bl))) => {
            if a0 >= 2 {
                push_arc(0, a0 - 2, &mut edge_ranges);
            }
            for (k, &(a, b)) in flat_runs.iter().enumerate() {
                edge_ranges.push((a - 1, b, SegmentLabel::Straight));
                if let Some(&(c, _)) = flat_runs.get(k + 1) {
                    if b + 1 + 2 <= c {
                        push_arc(b + 1, c - 2, &mut edge_ranges);
                    }
                }
            }
            if bl + 1 < n {
                push_arc(bl + 1, n - 1, &mut edge_ranges);
            }
        }
        _ => push_arc(0, n - 1, &mut edge_ranges),
    }

    let mut out: Vec<LabeledRange> = Vec::new();
    let mut pending_start: Option<usize> = None;
    for (lo, hi, label) in edge_ranges {
        let mut r = LabeledRange {
            start: lo,
            end: hi + 1,
            label,
        };
        if let Some(s) = pending_start.take() {
            r.start = s;
        }
        if r.end - r.start + 1 < min_len {
            match out.last_mut() {
                Some(prev) => prev.end = r.end,
                None => pending_start = Some(r.start),
            }
            continue;
        }
        out.push(r);
    }
    if let Some(s) = pending_start {
        // everything was short
        out.push(LabeledRange {
            start: s,
            end: n,
            label: SegmentLabel::Straight,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: Point3,
    pub radius: f64,
    pub axis: Vec3,
    pub angular_extent: f64,
    pub residual: f64,
}

fn covariance(points: &[Point3]) -> (Point3, SymmetricEigen<f64, nalgebra::U3>) {
    let k = points.len() as f64;
    let c = points.iter().fold(Point3::zeros(), |a, p| a + p) / k;
    let mut m = Matrix3::zeros();
    for p in points {
        let d = p - c;
        m += d * d.transpose();
    }
    (c, SymmetricEigen::new(m / k))
}

fn sorted_axes(eig: &SymmetricEigen<f64, nalgebra::U3>) -> ([f64; 3], [Vec3; 3]) {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    (
        idx.map(|i| eig.eigenvalues[i]),
        idx.map(|i| eig.eigenvectors.column(i).into_owned()),
    )
}

/// Plane fit, projection and algebraic (Kåsa) circle fit.
pub fn fit_circle_3d(points: &[Point3]) -> Result<CircleFit, DecomposeError> {
    if points.len() < 3 {
        return Err(DecomposeError::Collinear);
    }
    let (c, eig) = covariance(points);
    let (vals, vecs) = sorted_axes(&eig);
    if !(vals[1] > 1e-12 * vals[2].max(1e-300)) {
        return Err(DecomposeError::Collinear);
    }
    let normal = vecs[0].normalize();
    let e1 = vecs[2].normalize();
    let e2 = normal.cross(&e1);
    let proj: Vec<[f64; 2]> = points.iter().map(|p| [(p - c).dot(&e1), (p - c).dot(&e2)]).collect();
    let mut a = Matrix3::zeros();
    let mut b = Vec3::zeros();
    for q in &proj {
        let row = Vec3::new(q[0], q[1], 1.0);
        a += row * row.transpose();
        b -= row * (q[0] * q[0] + q[1] * q[1]);
    }
    let sol = a.lu().solve(&b).ok_or(DecomposeError::Collinear)?;
    let (cx, cy) = (-0.5 * sol[0], -0.5 * sol[1]);
    let r2 = cx * cx + cy * cy - sol[2];
    let spread = vals[2].sqrt();
    if !(r2 > 0.0) || !r2.is_finite() || r2.sqrt() > 1e6 * spread {
        return Err(DecomposeError::Collinear);
    }
    let radius = r2.sqrt();
    let center = c + e1 * cx + e2 * cy;

    let mut total = 0.0;
    let mut prev = (proj[0][1] - cy).atan2(proj[0][0] - cx);
    for q in &proj[1..] {
        let th = (q[1] - cy).atan2(q[0] - cx);
        let mut d = th - prev;
        d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        total += d;
        prev = th;
    }
    let axis = if total < 0.0 { -normal } else { normal };
    let angular_extent = total.abs().clamp(f64::MIN_POSITIVE, std::f64::consts::TAU);

    let residual = (points
        .iter()
        .map(|p| {
            let d = p - center;
            let h = d.dot(&normal);
            let rho = (d - normal * h).norm();
            h * h + (rho - radius) * (rho - radius)
        })
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok(CircleFit {
        center,
        radius,
        axis,
        angular_extent,
        residual,
    })
}

/// Least-squares 3D line: centroid, unit direction from first to last point,
/// and RMS orthogonal residual.
pub fn fit_line_3d(points: &[Point3]) -> (Point3, Vec3, f64) {
    let (c, eig) = covariance(points);
    let (_, vecs) = sorted_axes(&eig);
    let mut d = vecs[2].normalize();
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        if (last - first).dot(&d) < 0.0 {
            d = -d;
        }
    }
    let res = (points
        .iter()
        .map(|p| {
            let v = p - c;
            (v - d * v.dot(&d)).norm_squared()
        })
        .sum::<f64>()
        / points.len().max(1) as f64)
        .sqrt();
    (c, d, res)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    Straight {
        point: Point3,
        direction: Vec3,
    },
    Arc {
        center: Point3,
        radius: f64,
        axis: Vec3,
        angular_extent: f64,
    },
}

impl SegmentKind {
    pub fn label(&self) -> SegmentLabel {
        match self {
            SegmentKind::Straight { .. } => SegmentLabel::Straight,
            SegmentKind::Arc { .. } => SegmentLabel::Arc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    pub residual: f64,
    /// Raised when a constant-curvature run failed the planarity check and
    /// had to be split.
    pub flagged: bool,
}

impl Segment {
    pub fn new(start: usize, end: usize, kind: SegmentKind) -> Self {
        Self {
            start,
            end,
            kind,
            residual: 0.0,
            flagged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposition {
    pub segments: Vec<Segment>,
}

impl Decomposition {
    pub fn labels(&self) -> Vec<SegmentLabel> {
        self.segments.iter().map(|s| s.kind.label()).collect()
    }

    /// Shared indices between consecutive segments.
    pub fn junctions(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

fn straight_segment(points: &[Point3], start: usize, end: usize) -> Segment {
    let (point, direction, residual) = fit_line_3d(&points[start..=end]);
    Segment {
        start,
        end,
        kind: SegmentKind::Straight { point, direction },
        residual,
        flagged: false,
    }
}

fn arc_segment(points: &[Point3], start: usize, end: usize, params: &DecomposeParams, flagged: bool, out: &mut Vec<Segment>) {
    let pts = &points[start..=end];
    let (_, _, line_res) = fit_line_3d(pts);
    let fit = match fit_circle_3d(pts) {
        Ok(f) => f,
        Err(_) => {
            out.push(Segment {
                flagged,
                ..straight_segment(points, start, end)
            });
            return;
        }
    };
    if line_res <= params.residual_threshold {
        out.push(Segment {
            flagged,
            ..straight_segment(points, start, end)
        });
        return;
    }
    if fit.residual > params.residual_threshold && end - start + 1 >= 2 * params.min_len.max(2) {
        let mid = (start + end) / 2;
        arc_segment(points, start, mid, params, true, out);
        arc_segment(points, mid, end, params, true, out);
        return;
    }
    out.push(Segment {
        start,
        end,
        kind: SegmentKind::Arc {
            center: fit.center,
            radius: fit.radius,
            axis: fit.axis,
            angular_extent: fit.angular_extent,
        },
        residual: fit.residual,
        flagged: flagged || fit.residual > params.residual_threshold,
    });
}

fn try_merge(points: &[Point3], a: &Segment, b: &Segment, params: &DecomposeParams) -> Option<Segment> {
    match (a.kind, b.kind) {
        (SegmentKind::Straight { direction: da, .. }, SegmentKind::Straight { direction: db, .. }) => {
            let ang = da.dot(&db).clamp(-1.0, 1.0).acos();
            (ang <= params.straight_merge_angle).then(|| Segment {
                flagged: a.flagged || b.flagged,
                ..straight_segment(points, a.start, b.end)
            })
        }
        (SegmentKind::Arc { radius: ra, .. }, SegmentKind::Arc { radius: rb, .. }) => {
            if a.flagged || b.flagged || (ra - rb).abs() > params.arc_radius_tolerance * ra.max(rb) {
                return None;
            }
            let fit = fit_circle_3d(&points[a.start..=b.end]).ok()?;
            (fit.residual <= params.residual_threshold).then(|| Segment {
                start: a.start,
                end: b.end,
                kind: SegmentKind::Arc {
                    center: fit.center,
                    radius: fit.radius,
                    axis: fit.axis,
                    angular_extent: fit.angular_extent,
                },
                residual: fit.residual,
                flagged: false,
            })
        }
        _ => None,
    }
}

/// Full decomposition: tangent-space labeling, then 3D line and circle fits.
pub fn decompose_centerline(points: &[Point3], params: &DecomposeParams) -> Result<Decomposition, DecomposeError> {
    if points.len() == 2 {
        if points[0] == points[1] {
            return Err(DecomposeError::DuplicatePoint { index: 0 });
        }
        return Ok(Decomposition {
            segments: vec![straight_segment(points, 0, 1)],
        });
    }
    let tsp = tangent_space_transform(points)?;
    let ranges = detect_arcs_and_lines(&tsp, params.alpha_flat, params.nu, params.min_len);
    let mut segs = Vec::new();
    for r in ranges {
        match r.label {
            SegmentLabel::Straight => segs.push(straight_segment(points, r.start, r.end)),
            SegmentLabel::Arc => arc_segment(points, r.start, r.end, params, false, &mut segs),
        }
    }
    let mut merged: Vec<Segment> = Vec::with_capacity(segs.len());
    for s in segs {
        if let Some(prev) = merged.last() {
            if let Some(m) = try_merge(points, prev, &s, params) {
                *merged.last_mut().unwrap() = m;
                continue;
            }
        }
        merged.push(s);
    }
    Ok(Decomposition { segments: merged })
}
