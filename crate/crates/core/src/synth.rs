//! Synthetic tubes with known centerlines, degradations, voxelization and
//! height-map rendering.

use std::collections::HashMap;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::SegmentLabel;
use crate::geom::{bounding_box, Point3, Vec3};
use crate::ingest::{HeightMap, TriMesh, VoxelSet};
use crate::rebuild::{polyline_distance, rotation_minimizing_frames};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("arc radius {arc} does not exceed tube radius {tube}")]
    SelfIntersecting { arc: f64, tube: f64 },
    #[error("invalid tube description: {0}")]
    InvalidShape(String),
    #[error("mesh is not closed: {odd} of {rows} rows have odd parity")]
    NotClosed { odd: usize, rows: usize },
    #[error("empty mesh")]
    EmptyMesh,
}

/// One piece of a tube centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Piece {
    Straight {
        length: f64,
    },
    /// Bends by `angle` on a circle of `radius`. The bend plane is first
    /// rotated by `plane_turn` about the current tangent.
    Arc {
        radius: f64,
        angle: f64,
        #[serde(default)]
        plane_turn: f64,
    },
}

impl Piece {
    pub fn length(&self) -> f64 {
        match *self {
            Piece::Straight { length } => length,
            Piece::Arc { radius, angle, .. } => radius * angle,
        }
    }

    pub fn label(&self) -> SegmentLabel {
        match self {
            Piece::Straight { .. } => SegmentLabel::Straight,
            Piece::Arc { .. } => SegmentLabel::Arc,
        }
    }
}

/// Ground-truth centerline of a generated tube.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TubeTruth {
    pub points: Vec<Point3>,
    pub tangents: Vec<Vec3>,
    /// Kind of the piece each point belongs to; a junction point takes the
    /// kind of the piece ending there.
    pub kinds: Vec<SegmentLabel>,
    /// Index of the last point of every piece but the final one.
    pub junctions: Vec<usize>,
}

struct PathSample {
    point: Point3,
    tangent: Vec3,
    u: Vec3,
    v: Vec3,
    kind: SegmentLabel,
}

fn validate(pieces: &[Piece], tube_radius: Option<f64>) -> Result<(), SynthError> {
    if pieces.is_empty() {
        return Err(SynthError::InvalidShape("no pieces".into()));
    }
    for p in pieces {
        match *p {
            Piece::Straight { length } if !(length > 0.0) => {
                return Err(SynthError::InvalidShape(format!("straight length {length}")));
            }
            Piece::Arc { radius, angle, .. } => {
                if !(radius > 0.0 && angle > 0.0) {
                    return Err(SynthError::InvalidShape(format!("arc radius {radius}, angle {angle}")));
                }
                if let Some(r) = tube_radius {
                    if radius <= r {
                        return Err(SynthError::SelfIntersecting { arc: radius, tube: r });
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Samples the path about every `step`, starting at the origin heading `+x`
/// with the first bend toward `+y`. The `(u, v)` frame is carried along
/// without twist.
fn sample_path(pieces: &[Piece], step: f64) -> (Vec<PathSample>, Vec<usize>) {
    let mut pos = Point3::zeros();
    let mut t = Vec3::x();
    let mut n = Vec3::y();
    let (mut u, mut v) = (Vec3::y(), Vec3::z());
    let mut out = vec![PathSample {
        point: pos,
        tangent: t,
        u,
        v,
        kind: pieces[0].label(),
    }];
    let mut junctions = Vec::new();
    for (pi, piece) in pieces.iter().enumerate() {
        let m = ((piece.length() / step).round() as usize).max(1);
        match *piece {
            Piece::Straight { length } => {
                let start = pos;
                for k in 1..=m {
                    pos = start + t * (length * k as f64 / m as f64);
                    out.push(PathSample {
                        point: pos,
                        tangent: t,
                        u,
                        v,
                        kind: SegmentLabel::Straight,
                    });
                }
            }
            Piece::Arc {
                radius,
                angle,
                plane_turn,
            } => {
                n = Rotation3::from_axis_angle(&Unit::new_normalize(t), plane_turn) * n;
                let axis = Unit::new_normalize(t.cross(&n));
                let center = pos + n * radius;
                let (t0, n0, u0, v0) = (t, n, u, v);
                for k in 1..=m {
                    let phi = angle * k as f64 / m as f64;
                    let rot = Rotation3::from_axis_angle(&axis, phi);
                    pos = center + rot * (-n0 * radius);
                    t = rot * t0;
                    n = rot * n0;
                    u = rot * u0;
                    v = rot * v0;
                    out.push(PathSample {
                        point: pos,
                        tangent: t,
                        u,
                        v,
                        kind: SegmentLabel::Arc,
                    });
                }
            }
        }
        if pi + 1 < pieces.len() {
            junctions.push(out.len() - 1);
        }
    }
    (out, junctions)
}

/// Ground-truth centerline sampled about every `step`.
pub fn centerline_truth(pieces: &[Piece], step: f64) -> Result<TubeTruth, SynthError> {
    validate(pieces, None)?;
    if !(step > 0.0) {
        return Err(SynthError::InvalidShape(format!("step {step}")));
    }
    let (samples, junctions) = sample_path(pieces, step);
    Ok(TubeTruth {
        points: samples.iter().map(|s| s.point).collect(),
        tangents: samples.iter().map(|s| s.tangent).collect(),
        kinds: samples.iter().map(|s| s.kind).collect(),
        junctions,
    })
}

#[derive(Debug, Clone)]
pub struct SynthTube {
    /// Open tube surface with outward-facing triangles.
    pub mesh: TriMesh,
    /// Centerline at the ring centers.
    pub truth: TubeTruth,
    pub radius: f64,
    pub sides: usize,
}

impl SynthTube {
    /// The same surface closed by two fan caps.
    pub fn capped(&self) -> TriMesh {
        let mut m = self.mesh.clone();
        let s = self.sides;
        let rings = self.truth.points.len();
        let a = m.vertices.len();
        m.vertices.push(self.truth.points[0]);
        m.vertices.push(*self.truth.points.last().unwrap());
        let last = (rings - 1) * s;
        for k in 0..s {
            let k1 = (k + 1) % s;
            m.faces.push([a, k1, k]);
            m.faces.push([a + 1, last + k, last + k1]);
        }
        m
    }
}

/// Generates a tube of radius `radius` around the piecewise centerline, with
/// rings and ring vertices spaced about `mesh_step` apart.
pub fn gen_tube(pieces: &[Piece], radius: f64, mesh_step: f64) -> Result<SynthTube, SynthError> {
    if !(radius > 0.0 && mesh_step > 0.0) {
        return Err(SynthError::InvalidShape(format!("radius {radius}, mesh step {mesh_step}")));
    }
    validate(pieces, Some(radius))?;
    let (samples, junctions) = sample_path(pieces, mesh_step);
    let sides = ((std::f64::consts::TAU * radius / mesh_step).round() as usize).max(3);
    let mut vertices = Vec::with_capacity(samples.len() * sides);
    for s in &samples {
        for k in 0..sides {
            let th = std::f64::consts::TAU * k as f64 / sides as f64;
            vertices.push(s.point + (s.u * th.cos() + s.v * th.sin()) * radius);
        }
    }
    let id = |i: usize, k: usize| i * sides + (k % sides);
    let mut faces = Vec::with_capacity(2 * sides * (samples.len() - 1));
    for i in 0..samples.len() - 1 {
        for k in 0..sides {
            faces.push([id(i, k), id(i, k + 1), id(i + 1, k)]);
            faces.push([id(i, k + 1), id(i + 1, k + 1), id(i + 1, k)]);
        }
    }
    Ok(SynthTube {
        mesh: TriMesh::new(vertices, faces),
        truth: TubeTruth {
            points: samples.iter().map(|s| s.point).collect(),
            tangents: samples.iter().map(|s| s.tangent).collect(),
            kinds: samples.iter().map(|s| s.kind).collect(),
            junctions,
        },
        radius,
        sides,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Degradation {
    /// Isotropic Gaussian displacement of every vertex.
    Noise { sigma: f64 },
    /// Keeps faces whose normal opposes the view direction.
    PartialScan { view_dir: Vec3 },
    /// Drops faces whose angle about the axis polyline falls in `[lo, hi]`
    /// (radians in `(-π, π]`, measured in the axis's twist-free frame).
    SectorRemoval { axis: Vec<Point3>, lo: f64, hi: f64 },
    /// Removes all faces within `radius` of `count` random face centers.
    Holes { count: usize, radius: f64 },
}

fn geometric_normal(mesh: &TriMesh, f: usize) -> Vec3 {
    let [a, b, c] = mesh.corners(f);
    (b - a).cross(&(c - a))
}

pub fn degrade(mesh: &TriMesh, mode: &Degradation, seed: u64) -> TriMesh {
    let mut out = mesh.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        Degradation::Noise { sigma } => {
            if *sigma == 0.0 {
                return out;
            }
            let normal = Normal::new(0.0, *sigma).expect("finite sigma");
            for v in &mut out.vertices {
                *v += Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
            }
            out.face_normals = None;
        }
        Degradation::PartialScan { view_dir } => {
            let normals: Vec<Vec3> = (0..mesh.faces.len()).map(|f| geometric_normal(mesh, f)).collect();
            out.retain_faces(|f| normals[f].dot(view_dir) < 0.0);
        }
        Degradation::SectorRemoval { axis, lo, hi } => {
            let Ok(frames) = rotation_minimizing_frames(axis) else {
                return out;
            };
            let drop: Vec<bool> = (0..mesh.faces.len())
                .map(|f| {
                    let c = mesh.face_center(f);
                    let j = nearest_vertex(axis, &c);
                    let [_, u, v] = frames[j];
                    let d = c - axis[j];
                    let a = d.dot(&v).atan2(d.dot(&u));
                    a >= *lo && a <= *hi
                })
                .collect();
            out.retain_faces(|f| !drop[f]);
        }
        Degradation::Holes { count, radius } => {
            if mesh.faces.is_empty() {
                return out;
            }
            let centers: Vec<Point3> = (0..mesh.faces.len()).map(|f| mesh.face_center(f)).collect();
            let holes: Vec<Point3> = (0..*count)
                .map(|_| centers[rng.random_range(0..centers.len())])
                .collect();
            out.retain_faces(|f| holes.iter().all(|h| (centers[f] - h).norm() > *radius));
        }
    }
    out
}

fn nearest_vertex(points: &[Point3], q: &Point3) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in points.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Fraction of rows allowed to have odd crossing parity.
pub const ODD_ROW_TOLERANCE: f64 = 0.001;

/// Interior voxels of a closed mesh. Voxel `(i, j, k)` spans
/// `[i·h, (i+1)·h] × ...` and is inside when its center is.
pub fn voxelize(mesh: &TriMesh, gridstep: f64) -> Result<VoxelSet, SynthError> {
    if mesh.faces.is_empty() {
        return Err(SynthError::EmptyMesh);
    }
    let h = gridstep;
    // rows are indexed by (j, k); the ray runs along +x at the voxel centers
    let mut rows: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.corners(f);
        let (ylo, yhi) = (a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y));
        let (zlo, zhi) = (a.z.min(b.z).min(c.z), a.z.max(b.z).max(c.z));
        let j0 = (ylo / h - 0.5).ceil() as i64;
        let j1 = (yhi / h - 0.5).floor() as i64;
        let k0 = (zlo / h - 0.5).ceil() as i64;
        let k1 = (zhi / h - 0.5).floor() as i64;
        for j in j0..=j1 {
            for k in k0..=k1 {
                rows.entry((j, k)).or_default().push(f);
            }
        }
    }
    let mut keys: Vec<(i64, i64)> = rows.keys().copied().collect();
    keys.sort_unstable();
    let mut odd = 0;
    let mut out = VoxelSet::new();
    for key in &keys {
        let (j, k) = *key;
        let (y, z) = ((j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
        let mut hits: Vec<f64> = rows[key]
            .iter()
            .filter_map(|&f| ray_x_hit(&mesh.corners(f), y, z))
            .collect();
        if hits.len() % 2 == 1 {
            odd += 1;
            continue;
        }
        hits.sort_by(f64::total_cmp);
        for pair in hits.chunks(2) {
            let i0 = (pair[0] / h - 0.5).ceil() as i64;
            let i1 = (pair[1] / h - 0.5).floor() as i64;
            for i in i0..=i1 {
                out.insert([i, j, k]);
            }
        }
    }
    if odd as f64 > ODD_ROW_TOLERANCE * keys.len() as f64 {
        return Err(SynthError::NotClosed { odd, rows: keys.len() });
    }
    Ok(out)
}

/// Crossing of the `+x` ray through `(·, y, z)` with a triangle. Points on a
/// shared edge are assigned to exactly one side by a top-left style rule.
fn ray_x_hit(tri: &[Point3; 3], y: f64, z: f64) -> Option<f64> {
    let p = tri.map(|v| (v.y, v.z));
    let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
    if area == 0.0 {
        return None;
    }
    let (order, s) = if area > 0.0 { ([0, 1, 2], area) } else { ([0, 2, 1], -area) };
    let mut w = [0.0; 3];
    for e in 0..3 {
        let a = p[order[e]];
        let b = p[order[(e + 1) % 3]];
        let ew = (b.0 - a.0) * (z - a.1) - (b.1 - a.1) * (y - a.0);
        let (dy, dz) = (b.0 - a.0, b.1 - a.1);
        let owns = dz > 0.0 || (dz == 0.0 && dy < 0.0);
        if ew < 0.0 || (ew == 0.0 && !owns) {
            return None;
        }
        // weight of the vertex opposite this edge
        w[(e + 2) % 3] = ew / s;
    }
    Some(w[0] * tri[order[0]].x + w[1] * tri[order[1]].x + w[2] * tri[order[2]].x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum ViewAxis {
    #[value(name = "+x")]
    PosX,
    #[value(name = "-x")]
    NegX,
    #[value(name = "+y")]
    PosY,
    #[value(name = "-y")]
    NegY,
    #[value(name = "+z")]
    PosZ,
    #[value(name = "-z")]
    NegZ,
}

impl ViewAxis {
    /// World point to `(image x, image y, height)`; a proper rotation, so
    /// the `+z` view leaves coordinates unchanged.
    pub fn to_view(self, p: &Point3) -> Point3 {
        match self {
            ViewAxis::PosX => Point3::new(p.y, p.z, p.x),
            ViewAxis::NegX => Point3::new(p.z, p.y, -p.x),
            ViewAxis::PosY => Point3::new(p.z, p.x, p.y),
            ViewAxis::NegY => Point3::new(p.x, p.z, -p.y),
            ViewAxis::PosZ => *p,
            ViewAxis::NegZ => Point3::new(p.y, p.x, -p.z),
        }
    }

    pub fn to_world(self, q: &Point3) -> Point3 {
        match self {
            ViewAxis::PosX => Point3::new(q.z, q.x, q.y),
            ViewAxis::NegX => Point3::new(-q.z, q.y, q.x),
            ViewAxis::PosY => Point3::new(q.y, q.z, q.x),
            ViewAxis::NegY => Point3::new(q.x, -q.z, q.y),
            ViewAxis::PosZ => *q,
            ViewAxis::NegZ => Point3::new(q.y, q.x, -q.z),
        }
    }
}

/// Top-surface height per pixel as seen from `view`, with pixels `resolution`
/// apart. Pixels the mesh does not cover get the minimum covered height.
/// The result lives in the view frame (see [`ViewAxis::to_view`]).
pub fn render_heightmap(mesh: &TriMesh, view: ViewAxis, resolution: f64) -> Result<HeightMap, SynthError> {
    if mesh.faces.is_empty() {
        return Err(SynthError::EmptyMesh);
    }
    if !(resolution > 0.0) {
        return Err(SynthError::InvalidShape(format!("resolution {resolution}")));
    }
    let verts: Vec<Point3> = mesh.vertices.iter().map(|p| view.to_view(p)).collect();
    let (lo, hi) = bounding_box(mesh.faces.iter().flatten().map(|&i| &verts[i])).ok_or(SynthError::EmptyMesh)?;
    let s = resolution;
    let width = ((hi.x - lo.x) / s).floor() as usize + 1;
    let height = ((hi.y - lo.y) / s).floor() as usize + 1;
    let mut z = vec![f64::NAN; width * height];
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| verts[i]);
        let area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        if area.abs() < 1e-300 {
            continue;
        }
        let i0 = ((a.x.min(b.x).min(c.x) - lo.x) / s).ceil().max(0.0) as usize;
        let i1 = (((a.x.max(b.x).max(c.x) - lo.x) / s).floor() as usize).min(width - 1);
        let j0 = ((a.y.min(b.y).min(c.y) - lo.y) / s).ceil().max(0.0) as usize;
        let j1 = (((a.y.max(b.y).max(c.y) - lo.y) / s).floor() as usize).min(height - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let (x, y) = (lo.x + i as f64 * s, lo.y + j as f64 * s);
                let w0 = ((b.x - x) * (c.y - y) - (c.x - x) * (b.y - y)) / area;
                let w1 = ((c.x - x) * (a.y - y) - (a.x - x) * (c.y - y)) / area;
                let w2 = 1.0 - w0 - w1;
                let tol = -1e-12;
                if w0 < tol || w1 < tol || w2 < tol {
                    continue;
                }
                let hz = w0 * a.z + w1 * b.z + w2 * c.z;
                let cell = &mut z[i + width * j];
                if cell.is_nan() || hz > *cell {
                    *cell = hz;
                }
            }
        }
    }
    let min = z.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
    let fill = if min.is_finite() { min } else { lo.z };
    z.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = fill);
    let mut hm = HeightMap::new(width, height, z, s);
    hm.origin = [lo.x, lo.y];
    Ok(hm)
}

/// Mean distance of mesh vertices to a polyline, minus `radius`; a quick
/// consistency probe for generated surfaces.
pub fn mean_radial_offset(mesh: &TriMesh, axis: &[Point3], radius: f64) -> f64 {
    let n = mesh.vertices.len().max(1) as f64;
    mesh.vertices
        .iter()
        .map(|v| polyline_distance(v, axis).0 - radius)
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn straight_cylinder_face_count() {
        let t = gen_tube(&[Piece::Straight { length: 20.0 }], 3.0, 1.0).unwrap();
        let expect = 20.0 * (2.0 * PI * 3.0) * 2.0;
        let got = t.mesh.faces.len() as f64;
        assert!((got - expect).abs() < 0.1 * expect, "{got} vs {expect}");
        assert_eq!(t.truth.points.len(), 21);
        assert!(t.truth.junctions.is_empty());
    }

    #[test]
    fn quarter_torus() {
        let r = 15.0;
        let t = gen_tube(
            &[Piece::Arc {
                radius: r,
                angle: FRAC_PI_2,
                plane_turn: 0.0,
            }],
            3.0,
            0.5,
        )
        .unwrap();
        // canonical pose: bend center at (0, r, 0), bend axis z
        for v in &t.mesh.vertices {
            let rho = (v.x * v.x + (v.y - r) * (v.y - r)).sqrt() - r;
            assert_abs_diff_eq!((rho * rho + v.z * v.z).sqrt(), 3.0, epsilon = 1e-6);
        }
        let end = *t.truth.points.last().unwrap();
        assert_abs_diff_eq!(end, Point3::new(r, r, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn self_intersecting_arc() {
        let e = gen_tube(
            &[Piece::Arc {
                radius: 2.0,
                angle: PI,
                plane_turn: 0.0,
            }],
            3.0,
            0.5,
        );
        assert_eq!(e.unwrap_err(), SynthError::SelfIntersecting { arc: 2.0, tube: 3.0 });
    }

    #[test]
    fn faces_wind_outward() {
        let t = gen_tube(
            &[
                Piece::Straight { length: 5.0 },
                Piece::Arc {
                    radius: 8.0,
                    angle: 1.0,
                    plane_turn: 0.7,
                },
            ],
            2.0,
            0.5,
        )
        .unwrap();
        for f in 0..t.mesh.faces.len() {
            let c = t.mesh.face_center(f);
            let j = nearest_vertex(&t.truth.points, &c);
            assert!(geometric_normal(&t.mesh, f).dot(&(c - t.truth.points[j])) > 0.0);
        }
    }

    #[test]
    fn junctions_and_kinds() {
        let pieces = [
            Piece::Straight { length: 10.0 },
            Piece::Arc {
                radius: 5.0,
                angle: FRAC_PI_2,
                plane_turn: 0.0,
            },
            Piece::Straight { length: 10.0 },
        ];
        let t = centerline_truth(&pieces, 1.0).unwrap();
        assert_eq!(t.junctions, vec![10, 18]);
        assert_eq!(t.kinds[10], SegmentLabel::Straight);
        assert_eq!(t.kinds[11], SegmentLabel::Arc);
        assert_eq!(t.kinds[18], SegmentLabel::Arc);
        assert_eq!(t.kinds[19], SegmentLabel::Straight);
        assert_abs_diff_eq!(t.tangents[18], Vec3::y(), epsilon = 1e-12);
        // G1: the tangent is continuous across every junction
        for &j in &t.junctions {
            let before = (t.points[j] - t.points[j - 1]).normalize();
            assert!(before.dot(&t.tangents[j]) > 0.99);
        }
    }

    #[test]
    fn plane_turn_leaves_the_plane() {
        let pieces = [
            Piece::Arc {
                radius: 5.0,
                angle: FRAC_PI_2,
                plane_turn: 0.0,
            },
            Piece::Arc {
                radius: 5.0,
                angle: FRAC_PI_2,
                plane_turn: FRAC_PI_2,
            },
        ];
        let t = centerline_truth(&pieces, 0.5).unwrap();
        assert!(t.points.iter().any(|p| p.z.abs() > 1.0));
    }

    #[test]
    fn partial_scan_keeps_half() {
        let t = gen_tube(&[Piece::Straight { length: 30.0 }], 3.0, 0.5).unwrap();
        let d = degrade(&t.mesh, &Degradation::PartialScan { view_dir: Vec3::new(0.0, 0.3, -1.0) }, 0);
        let frac = d.faces.len() as f64 / t.mesh.faces.len() as f64;
        assert!((0.4..=0.6).contains(&frac), "{frac}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let t = gen_tube(&[Piece::Straight { length: 5.0 }], 1.0, 0.5).unwrap();
        assert_eq!(degrade(&t.mesh, &Degradation::Noise { sigma: 0.0 }, 7), t.mesh);
    }

    #[test]
    fn noise_is_seeded() {
        let t = gen_tube(&[Piece::Straight { length: 5.0 }], 1.0, 0.5).unwrap();
        let a = degrade(&t.mesh, &Degradation::Noise { sigma: 0.1 }, 3);
        let b = degrade(&t.mesh, &Degradation::Noise { sigma: 0.1 }, 3);
        let c = degrade(&t.mesh, &Degradation::Noise { sigma: 0.1 }, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, t.mesh);
    }

    #[test]
    fn holes_remove_faces() {
        let t = gen_tube(&[Piece::Straight { length: 10.0 }], 2.0, 0.5).unwrap();
        let d = degrade(&t.mesh, &Degradation::Holes { count: 1, radius: 1.0 }, 11);
        assert!(d.faces.len() < t.mesh.faces.len());
    }

    #[test]
    fn sector_removal_drops_a_quarter() {
        let t = gen_tube(&[Piece::Straight { length: 10.0 }], 2.0, 0.25).unwrap();
        let d = degrade(
            &t.mesh,
            &Degradation::SectorRemoval {
                axis: t.truth.points.clone(),
                lo: -FRAC_PI_2 / 2.0,
                hi: FRAC_PI_2 / 2.0,
            },
            0,
        );
        let frac = d.faces.len() as f64 / t.mesh.faces.len() as f64;
        assert!((0.7..0.8).contains(&frac), "{frac}");
    }

    #[test]
    fn voxelized_cylinder_volume() {
        // axis along z so rays cross the lateral surface
        let t = gen_tube(&[Piece::Straight { length: 6.0 }], 1.0, 0.05).unwrap();
        let mut mesh = t.capped();
        for v in &mut mesh.vertices {
            *v = Point3::new(v.y, v.z, v.x) + Vec3::new(3.0, 3.0, 0.3);
        }
        let h = 0.25;
        let vox = voxelize(&mesh, h).unwrap();
        let expect = PI * 1.0 * 6.0 / (h * h * h);
        let got = vox.len() as f64;
        assert!((got - expect).abs() < 0.05 * expect, "{got} vs {expect}");
    }

    #[test]
    fn voxelized_along_ray_direction() {
        let t = gen_tube(&[Piece::Straight { length: 6.0 }], 1.0, 0.1).unwrap();
        let vox = voxelize(&t.capped(), 0.25).unwrap();
        let expect = PI * 6.0 / 0.25f64.powi(3);
        assert!((vox.len() as f64 - expect).abs() < 0.05 * expect);
    }

    #[test]
    fn open_mesh_is_not_closed() {
        let t = gen_tube(&[Piece::Straight { length: 6.0 }], 1.0, 0.1).unwrap();
        let mut mesh = t.capped();
        for v in &mut mesh.vertices {
            *v = Point3::new(v.y, v.z, v.x);
        }
        let half = degrade(&mesh, &Degradation::PartialScan { view_dir: Vec3::x() }, 0);
        assert!(matches!(voxelize(&half, 0.25), Err(SynthError::NotClosed { .. })));
    }

    fn sphere(r: f64, n: usize) -> TriMesh {
        let mut vertices = vec![Point3::new(0.0, 0.0, r)];
        for i in 1..n {
            let th = PI * i as f64 / n as f64;
            for k in 0..2 * n {
                let ph = PI * k as f64 / n as f64;
                vertices.push(Point3::new(r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()));
            }
        }
        vertices.push(Point3::new(0.0, 0.0, -r));
        let m = 2 * n;
        let ring = |i: usize, k: usize| 1 + (i - 1) * m + (k % m);
        let mut faces = Vec::new();
        for k in 0..m {
            faces.push([0, ring(1, k), ring(1, k + 1)]);
        }
        for i in 1..n - 1 {
            for k in 0..m {
                faces.push([ring(i, k), ring(i + 1, k), ring(i + 1, k + 1)]);
                faces.push([ring(i, k), ring(i + 1, k + 1), ring(i, k + 1)]);
            }
        }
        let south = vertices.len() - 1;
        for k in 0..m {
            faces.push([south, ring(n - 1, k + 1), ring(n - 1, k)]);
        }
        TriMesh::new(vertices, faces)
    }

    #[test]
    fn sphere_heightmap_apex() {
        let hm = render_heightmap(&sphere(4.0, 24), ViewAxis::PosZ, 0.25).unwrap();
        let (ci, cj) = (
            ((0.0 - hm.origin[0]) / hm.spacing).round() as usize,
            ((0.0 - hm.origin[1]) / hm.spacing).round() as usize,
        );
        assert!((hm.at(ci, cj) - 4.0).abs() < 0.25);
        assert!(hm.heights.iter().all(|h| h.is_finite()));
    }

    #[test]
    fn sphere_voxel_count() {
        let mut s = sphere(3.0, 40);
        s.translate(Vec3::new(0.1, 0.2, 0.3));
        let vox = voxelize(&s, 0.2).unwrap();
        let expect = 4.0 / 3.0 * PI * 27.0 / 0.008;
        assert!((vox.len() as f64 - expect).abs() < 0.03 * expect);
    }

    #[test]
    fn view_axes_are_rotations() {
        let p = Point3::new(1.0, 2.0, 3.0);
        for a in [ViewAxis::PosX, ViewAxis::NegX, ViewAxis::PosY, ViewAxis::NegY, ViewAxis::PosZ, ViewAxis::NegZ] {
            assert_eq!(a.to_world(&a.to_view(&p)), p);
            let e = [Vec3::x(), Vec3::y(), Vec3::z()].map(|v| a.to_view(&v));
            assert_abs_diff_eq!(e[0].cross(&e[1]).dot(&e[2]), 1.0);
        }
        assert_eq!(ViewAxis::NegZ.to_view(&p).z, -3.0);
    }
}
