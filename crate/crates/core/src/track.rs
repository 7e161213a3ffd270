//! Centerline tracking through cross-sectional patches of the accumulation image.

use serde::Serialize;
use thiserror::Error;

use crate::accumulate::AccumulationResult;
use crate::geom::{OrthonormalFrame, Point3, ScalarGrid3, Vec3, VectorGrid3, VoxelIndex};

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("no usable tracking seed (maxAcc {max_acc}, direction image empty at the seed)")]
    SeedInvalid { max_acc: u32 },
    #[error("invalid tracking parameters: {0}")]
    InvalidParams(String),
}

/// Ordered centerline points with unit tangents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Centerline {
    pub points: Vec<Point3>,
    pub directions: Vec<Vec3>,
    /// Accumulation voxel the tracking started from, if tracked.
    pub seed: Option<VoxelIndex>,
    pub closed: bool,
}

impl Centerline {
    pub fn from_parts(points: Vec<Point3>, directions: Vec<Vec3>) -> Self {
        Self {
            points,
            directions,
            seed: None,
            closed: false,
        }
    }

    /// Builds a centerline from points alone, with chord-based tangents.
    pub fn from_points(points: Vec<Point3>) -> Self {
        let n = points.len();
        let directions = (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n.saturating_sub(1)));
                let d = points[b] - points[a];
                if d.norm() > 0.0 {
                    d.normalize()
                } else {
                    Vec3::x()
                }
            })
            .collect();
        Self::from_parts(points, directions)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn length(&self) -> f64 {
        self.spacings().iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackParams {
    /// Distance between consecutive centerline points (default `R`).
    pub track_step: f64,
    /// Scan length used for the accumulation; the patch spans `2·accRadius`.
    pub acc_radius: f64,
    /// Fraction of the seed accumulation a point must reach to continue.
    pub inside_threshold: f64,
    /// Largest accepted angle between a step and the local tube direction.
    pub max_angle: f64,
}

impl TrackParams {
    pub fn new(radius: f64, acc_radius: f64) -> Self {
        Self {
            track_step: radius,
            acc_radius,
            inside_threshold: 0.5,
            max_angle: std::f64::consts::FRAC_PI_3,
        }
    }

    fn validate(&self) -> Result<(), TrackError> {
        if !(self.track_step > 0.0 && self.acc_radius > 0.0) {
            return Err(TrackError::InvalidParams(format!(
                "trackStep {} and accRadius {} must be positive",
                self.track_step, self.acc_radius
            )));
        }
        if !(self.inside_threshold >= 0.0 && self.max_angle > 0.0) {
            return Err(TrackError::InvalidParams("threshold/angle out of range".into()));
        }
        Ok(())
    }

    /// In-plane search radius that keeps every step within `1.5·trackStep`.
    pub fn max_offset(&self) -> f64 {
        (1.5f64.powi(2) - 1.0).sqrt() * self.track_step
    }
}

/// Square image sampled from the accumulation image in the plane spanned by
/// `frame.u`, `frame.v`, centered on `frame.center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub frame: OrthonormalFrame,
    pub size: usize,
    pub pixel: f64,
    /// Row-major; row follows `u`, column follows `v`.
    pub values: Vec<f64>,
}

impl Patch {
    fn half(&self) -> usize {
        self.size / 2
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn world(&self, row: usize, col: usize) -> Point3 {
        let m = self.half() as f64;
        self.frame
            .plane_point((row as f64 - m) * self.pixel, (col as f64 - m) * self.pixel)
    }

    /// Brightest pixel within `max_offset` of the center; ties go to the
    /// smallest `(row, col)`. `None` when every candidate is zero.
    pub fn argmax(&self, max_offset: Option<f64>) -> Option<(usize, usize)> {
        let m = self.half() as f64;
        let lim2 = max_offset.map(|r| (r / self.pixel).powi(2));
        let mut best: Option<(usize, usize)> = None;
        let mut best_v = 0.0;
        for r in 0..self.size {
            for c in 0..self.size {
                if let Some(l) = lim2 {
                    let (a, b) = (r as f64 - m, c as f64 - m);
                    if a * a + b * b > l + 1e-9 {
                        continue;
                    }
                }
                let v = self.at(r, c);
                if v > best_v {
                    best_v = v;
                    best = Some((r, c));
                }
            }
        }
        best
    }
}

/// Samples a `(2·ceil(half_side/gridstep) + 1)²` patch orthogonal to `dir`.
/// Pixels are one gridstep apart and trilinearly interpolated; samples
/// outside the domain read zero.
pub fn extract_patch(acc: &ScalarGrid3, center: Point3, dir: Vec3, side: f64) -> Patch {
    let h = acc.domain.gridstep;
    let size = 2 * ((0.5 * side / h) - 1e-9).ceil().max(0.0) as usize + 1;
    let frame = OrthonormalFrame::from_direction(dir)
        .expect("patch direction must be non-zero")
        .with_center(center);
    let mut patch = Patch {
        frame,
        size,
        pixel: h,
        values: vec![0.0; size * size],
    };
    for r in 0..size {
        for c in 0..size {
            let p = patch.world(r, c);
            patch.values[r * size + c] = acc.sample_trilinear(&p);
        }
    }
    patch
}

/// Unit tube direction near `p`. Falls back to the sign-aligned sum over the
/// 26-neighborhood when the voxel itself holds no direction.
fn direction_at(dir: &VectorGrid3, p: &Point3, reference: Option<Vec3>) -> Option<Vec3> {
    let v = dir.at_point(p);
    if v.norm() > 1e-12 {
        return Some(v.normalize());
    }
    let d = &dir.domain;
    let idx = d.digitize(p)?;
    let mut sum = Vec3::zeros();
    let mut refv = reference;
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let Some(q) = d.checked(idx[0] as i64 + dx, idx[1] as i64 + dy, idx[2] as i64 + dz) else {
                    continue;
                };
                let w = dir.get(q);
                if w.norm() <= 1e-12 {
                    continue;
                }
                let r = *refv.get_or_insert(w);
                sum += if w.dot(&r) < 0.0 { -w } else { w };
            }
        }
    }
    (sum.norm() > 1e-12).then(|| sum.normalize())
}

/// Continuation test: the local accumulation must reach
/// `inside_threshold · seed_value`, and the step `current - previous` must
/// deviate from the local tube direction by at most `max_angle`.
pub fn is_inside_tube(
    res: &AccumulationResult,
    current: &Point3,
    previous: &Point3,
    seed_value: f64,
    params: &TrackParams,
) -> bool {
    let step = current - previous;
    let len = step.norm();
    if !(len > 0.0) {
        return false;
    }
    if (res.acc.neighborhood_sum(current) as f64) < params.inside_threshold * seed_value {
        return false;
    }
    let Some(local) = direction_at(&res.dir, current, Some(step)) else {
        return false;
    };
    let cos = (step.dot(&local).abs() / len).min(1.0);
    cos.acos() <= params.max_angle + 1e-12
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalRun {
    pub points: Vec<Point3>,
    pub directions: Vec<Vec3>,
    /// The run came back within one trackStep of its start.
    pub looped: bool,
}

/// Follows the accumulation ridge from `start`, forward along the seed
/// direction when `in_front`, backward otherwise.
pub fn track_direction(
    res: &AccumulationResult,
    start: Point3,
    in_front: bool,
    params: &TrackParams,
) -> Result<DirectionalRun, TrackError> {
    params.validate()?;
    let seed_dir = direction_at(&res.dir, &start, None)
        .ok_or(TrackError::SeedInvalid { max_acc: res.max_acc })?;
    let seed_value = res.acc.neighborhood_sum(&start) as f64;
    let ts = params.track_step;
    let d = &res.acc.domain;
    let diag = d.gridstep * ((d.dims[0].pow(2) + d.dims[1].pow(2) + d.dims[2].pow(2)) as f64).sqrt();
    let max_points = (4.0 * diag / ts) as usize + 16;

    let mut last = if in_front { seed_dir } else { -seed_dir };
    let mut current = start;
    let mut previous = start - last * ts;
    let mut run = DirectionalRun {
        points: Vec::new(),
        directions: Vec::new(),
        looped: false,
    };
    loop {
        let mut dv = direction_at(&res.dir, &current, Some(last)).unwrap_or(last);
        if last.dot(&dv) < 0.0 {
            dv = -dv;
        }
        if !run.points.is_empty() && !is_inside_tube(res, &current, &previous, seed_value, params) {
            log::debug!(
                "stop at {current:?}: peak {} (seed {seed_value}), step {:?}, local dir {:?}",
                res.acc.neighborhood_sum(&current),
                current - previous,
                direction_at(&res.dir, &current, Some(current - previous))
            );
            break;
        }
        run.points.push(current);
        run.directions.push(dv);
        if run.points.len() >= max_points {
            log::warn!("tracking stopped after {max_points} points");
            break;
        }
        let center = current + dv * ts;
        if !d.contains(&center) {
            break;
        }
        let patch = extract_patch(&res.acc, center, dv, 2.0 * params.acc_radius);
        let Some((r, c)) = patch.argmax(Some(params.max_offset())) else {
            log::debug!("stop at {current:?}: empty patch");
            break;
        };
        let next = patch.world(r, c);
        if run.points.len() >= 3 && (next - start).norm() < ts {
            run.looped = true;
            break;
        }
        last = dv;
        previous = current;
        current = next;
    }
    Ok(run)
}

/// Tracks both ways from the accumulation maximum and joins the runs.
pub fn extract_centerline(res: &AccumulationResult, params: &TrackParams) -> Result<Centerline, TrackError> {
    if res.max_acc < 2 {
        return Err(TrackError::SeedInvalid { max_acc: res.max_acc });
    }
    let start = res.acc.domain.voxel_center(res.max_pt);
    let forward = track_direction(res, start, true, params)?;
    if forward.looped {
        return Ok(Centerline {
            points: forward.points,
            directions: forward.directions,
            seed: Some(res.max_pt),
            closed: true,
        });
    }
    let backward = track_direction(res, start, false, params)?;
    let mut points: Vec<Point3> = backward.points[1..].iter().rev().copied().collect();
    let mut directions: Vec<Vec3> = backward.directions[1..].iter().rev().map(|d| -d).collect();
    points.extend(forward.points);
    directions.extend(forward.directions);
    let closed = points.len() > 3 && (points[0] - points[points.len() - 1]).norm() < params.track_step;
    Ok(Centerline {
        points,
        directions,
        seed: Some(res.max_pt),
        closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::GridDomain;

    fn grid(n: usize) -> ScalarGrid3 {
        ScalarGrid3::zeros(GridDomain::new(Point3::zeros(), 1.0, [n, n, n]).unwrap())
    }

    #[test]
    fn uniform_patch() {
        let mut g = grid(20);
        g.values.iter_mut().for_each(|v| *v = 5);
        let p = extract_patch(&g, Point3::new(10.0, 10.0, 10.0), Vec3::new(0.3, 0.2, 0.9), 6.6);
        assert_eq!(p.size, 2 * 4 + 1);
        assert!(p.values.iter().all(|v| (v - 5.0).abs() < 1e-9));
    }

    #[test]
    fn patch_size_rule() {
        let g = grid(20);
        // accRadius = 3 exactly on a unit grid: size 2·3+1
        let p = extract_patch(&g, Point3::new(10.0, 10.0, 10.0), Vec3::z(), 6.0);
        assert_eq!(p.size, 7);
    }

    #[test]
    fn single_peak_is_center_pixel() {
        for dir in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut g = grid(20);
            let idx = [10, 10, 10];
            let lin = g.domain.linear(idx);
            g.values[lin] = 9;
            let c = g.domain.voxel_center(idx);
            let p = extract_patch(&g, c, dir, 6.6);
            let m = p.size / 2;
            assert_eq!(p.argmax(None), Some((m, m)));
        }
    }

    #[test]
    fn argmax_tie_break_and_empty() {
        let frame = OrthonormalFrame::from_direction(Vec3::z()).unwrap();
        let mut p = Patch {
            frame,
            size: 3,
            pixel: 1.0,
            values: vec![0.0; 9],
        };
        assert_eq!(p.argmax(None), None);
        p.values[5] = 2.0;
        p.values[7] = 2.0;
        assert_eq!(p.argmax(None), Some((1, 2)));
        // (1,2) lies 1 pixel from the center, (0,0) lies √2 away
        p.values[0] = 3.0;
        assert_eq!(p.argmax(Some(1.0)), Some((1, 2)));
    }

    fn line_result(len: usize) -> AccumulationResult {
        // synthetic ridge along z at (8.5, 8.5), with direction +z
        let d = GridDomain::new(Point3::zeros(), 1.0, [17, 17, len]).unwrap();
        let mut acc = ScalarGrid3::zeros(d);
        let mut dir = VectorGrid3::zeros(d);
        for k in 2..len - 2 {
            for (dx, v) in [(0i64, 10u32), (1, 4), (-1, 4)] {
                let idx = [(8 + dx) as usize, 8, k];
                let lin = d.linear(idx);
                acc.values[lin] = v;
                dir.values[lin] = Vec3::z() * 3.0;
            }
        }
        let max_pt = [8, 8, len / 2];
        AccumulationResult {
            max_acc: 10,
            max_pt,
            steps: acc.total(),
            acc,
            dir,
        }
    }

    #[test]
    fn tracks_a_synthetic_ridge() {
        let res = line_result(40);
        let params = TrackParams::new(3.0, 3.3);
        let c = extract_centerline(&res, &params).unwrap();
        assert!(!c.closed);
        for p in &c.points {
            assert!((p.x - 8.5).abs() < 1e-9 && (p.y - 8.5).abs() < 1e-9, "{p:?}");
        }
        let zs: Vec<f64> = c.points.iter().map(|p| p.z).collect();
        assert!(zs.windows(2).all(|w| w[1] > w[0]));
        assert!(zs[0] < 5.0 && *zs.last().unwrap() > 35.0, "{zs:?}");
        for s in c.spacings() {
            assert!(s >= 0.5 * 3.0 && s <= 1.5 * 3.0);
        }
    }

    #[test]
    fn seed_without_direction_is_invalid() {
        let mut res = line_result(40);
        res.dir.values.iter_mut().for_each(|v| *v = Vec3::zeros());
        let params = TrackParams::new(3.0, 3.3);
        assert_eq!(
            extract_centerline(&res, &params),
            Err(TrackError::SeedInvalid { max_acc: 10 })
        );
        res.max_acc = 1;
        assert!(matches!(extract_centerline(&res, &params), Err(TrackError::SeedInvalid { .. })));
    }

    #[test]
    fn inside_tube_predicate() {
        let res = line_result(40);
        let params = TrackParams::new(3.0, 3.3);
        let a = Point3::new(8.5, 8.5, 20.5);
        let b = Point3::new(8.5, 8.5, 17.5);
        assert!(is_inside_tube(&res, &a, &b, 10.0, &params));
        // far outside: no votes
        let far = Point3::new(2.5, 2.5, 20.5);
        assert!(!is_inside_tube(&res, &far, &b, 10.0, &params));
        // a step perpendicular to the ridge
        let side = Point3::new(5.5, 8.5, 20.5);
        assert!(!is_inside_tube(&res, &a, &side, 10.0, &params));
    }
}
