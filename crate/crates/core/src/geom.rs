//! Geometric primitives and dense lattice containers shared by every stage.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// World-space vector. Points and directions share the same representation.
pub type Vec3 = Vector3<f64>;
/// World-space point.
pub type Point3 = Vector3<f64>;
/// Integer voxel coordinate `(i, j, k)` inside a [`GridDomain`].
pub type VoxelIndex = [usize; 3];

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("direction vector has (near) zero length")]
    ZeroDirection,
    #[error("invalid grid domain: {0}")]
    InvalidDomain(String),
    #[error("grid file: {0}")]
    GridFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Right-handed orthonormal frame `(u, v, w)` anchored at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthonormalFrame {
    pub center: Point3,
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
}

impl OrthonormalFrame {
    /// Builds the frame whose `w` axis is `dir` (normalized).
    ///
    /// `u` is `normalize(w × e)` where `e` is the canonical axis least aligned
    /// with `w` (smallest absolute component, ties resolved x, then y, then z),
    /// and `v = w × u`.
    pub fn from_direction(dir: Vec3) -> Result<Self, GeomError> {
        let n = dir.norm();
        if !(n > 1e-12) {
            return Err(GeomError::ZeroDirection);
        }
        let w = dir / n;
        let a = [w.x.abs(), w.y.abs(), w.z.abs()];
        let mut axis = 0;
        for i in 1..3 {
            if a[i] < a[axis] {
                axis = i;
            }
        }
        let mut e = Vec3::zeros();
        e[axis] = 1.0;
        let u = w.cross(&e).normalize();
        let v = w.cross(&u);
        Ok(Self {
            center: Point3::zeros(),
            u,
            v,
            w,
        })
    }

    pub fn with_center(mut self, center: Point3) -> Self {
        self.center = center;
        self
    }

    /// World position of the in-plane coordinate `(a, b)`.
    pub fn plane_point(&self, a: f64, b: f64) -> Point3 {
        self.center + self.u * a + self.v * b
    }
}

/// Axis-aligned digitization lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub origin: [f64; 3],
    pub gridstep: f64,
    pub dims: [usize; 3],
}

impl GridDomain {
    pub fn new(origin: Point3, gridstep: f64, dims: [usize; 3]) -> Result<Self, GeomError> {
        if !(gridstep > 0.0) || !gridstep.is_finite() {
            return Err(GeomError::InvalidDomain(format!("gridstep {gridstep}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GeomError::InvalidDomain(format!("dims {dims:?}")));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(GeomError::InvalidDomain("non-finite origin".into()));
        }
        Ok(Self {
            origin: [origin.x, origin.y, origin.z],
            gridstep,
            dims,
        })
    }

    /// Smallest domain covering the box `[lo, hi]` inflated by `margin` on every side.
    pub fn enclosing(lo: Point3, hi: Point3, margin: f64, gridstep: f64) -> Result<Self, GeomError> {
        let origin = lo - Vec3::repeat(margin);
        let extent = hi - lo + Vec3::repeat(2.0 * margin);
        let mut dims = [0usize; 3];
        for a in 0..3 {
            dims[a] = ((extent[a] / gridstep).ceil() as usize).max(1) + 1;
        }
        Self::new(origin, gridstep, dims)
    }

    pub fn origin(&self) -> Point3 {
        Point3::new(self.origin[0], self.origin[1], self.origin[2])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxel containing `p`: `floor((p - origin) / gridstep)` per axis.
    /// Points on a voxel boundary belong to the higher index.
    pub fn digitize(&self, p: &Point3) -> Option<VoxelIndex> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let g = ((p[a] - self.origin[a]) / self.gridstep).floor();
            if !(g >= 0.0) || g >= self.dims[a] as f64 {
                return None;
            }
            idx[a] = g as usize;
        }
        Some(idx)
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Point3 {
        Point3::new(
            self.origin[0] + self.gridstep * (idx[0] as f64 + 0.5),
            self.origin[1] + self.gridstep * (idx[1] as f64 + 0.5),
            self.origin[2] + self.gridstep * (idx[2] as f64 + 0.5),
        )
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.digitize(p).is_some()
    }

    /// x-fastest linear offset.
    #[inline]
    pub fn linear(&self, idx: VoxelIndex) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, lin: usize) -> VoxelIndex {
        let i = lin % self.dims[0];
        let r = lin / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    /// Signed-index lookup; `None` outside the lattice.
    #[inline]
    pub fn checked(&self, i: i64, j: i64, k: i64) -> Option<VoxelIndex> {
        if i < 0 || j < 0 || k < 0 {
            return None;
        }
        let idx = [i as usize, j as usize, k as usize];
        if idx[0] >= self.dims[0] || idx[1] >= self.dims[1] || idx[2] >= self.dims[2] {
            return None;
        }
        Some(idx)
    }
}

/// Dense grid of unsigned vote counts (the accumulation image).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid3 {
    pub domain: GridDomain,
    pub values: Vec<u32>,
}

impl ScalarGrid3 {
    pub fn zeros(domain: GridDomain) -> Self {
        Self {
            domain,
            values: vec![0; domain.len()],
        }
    }

    #[inline]
    pub fn get(&self, idx: VoxelIndex) -> u32 {
        self.values[self.domain.linear(idx)]
    }

    /// Count at the voxel containing `p`, zero outside the domain.
    pub fn at_point(&self, p: &Point3) -> u32 {
        self.domain.digitize(p).map_or(0, |i| self.get(i))
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }

    /// Trilinear interpolation between voxel centers; voxels outside the
    /// lattice contribute zero.
    pub fn sample_trilinear(&self, p: &Point3) -> f64 {
        let d = &self.domain;
        let mut base = [0i64; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let g = (p[a] - d.origin[a]) / d.gridstep - 0.5;
            let f = g.floor();
            base[a] = f as i64;
            frac[a] = g - f;
        }
        let mut acc = 0.0;
        for dz in 0..2 {
            let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
                for dx in 0..2 {
                    let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
                    let w = wx * wy * wz;
                    if w == 0.0 {
                        continue;
                    }
                    if let Some(idx) = d.checked(base[0] + dx, base[1] + dy, base[2] + dz) {
                        acc += w * self.get(idx) as f64;
                    }
                }
            }
        }
        acc
    }

    /// Largest count among the eight voxels surrounding `p` (the trilinear support).
    pub fn local_peak(&self, p: &Point3) -> u32 {
        let d = &self.domain;
        let mut base = [0i64; 3];
        for a in 0..3 {
            base[a] = ((p[a] - d.origin[a]) / d.gridstep - 0.5).floor() as i64;
        }
        let mut best = 0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    if let Some(idx) = d.checked(base[0] + dx, base[1] + dy, base[2] + dz) {
                        best = best.max(self.get(idx));
                    }
                }
            }
        }
        best
    }

    /// Sum of counts over the 3×3×3 voxels around the voxel containing `p`.
    /// Unlike a single voxel it barely depends on where the peak sits
    /// inside its voxel.
    pub fn neighborhood_sum(&self, p: &Point3) -> u64 {
        let d = &self.domain;
        let mut base = [0i64; 3];
        for a in 0..3 {
            base[a] = ((p[a] - d.origin[a]) / d.gridstep).floor() as i64;
        }
        let mut sum = 0u64;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(idx) = d.checked(base[0] + dx, base[1] + dy, base[2] + dz) {
                        sum += self.get(idx) as u64;
                    }
                }
            }
        }
        sum
    }
}

/// Dense grid of 3D vectors (the direction image).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid3 {
    pub domain: GridDomain,
    pub values: Vec<Vec3>,
}

impl VectorGrid3 {
    pub fn zeros(domain: GridDomain) -> Self {
        Self {
            domain,
            values: vec![Vec3::zeros(); domain.len()],
        }
    }

    #[inline]
    pub fn get(&self, idx: VoxelIndex) -> Vec3 {
        self.values[self.domain.linear(idx)]
    }

    pub fn at_point(&self, p: &Point3) -> Vec3 {
        self.domain.digitize(p).map_or(Vec3::zeros(), |i| self.get(i))
    }
}

/// JSON header written next to a raw grid payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub gridstep: f64,
    /// `"u32"` for count grids, `"f64x3"` for vector grids.
    pub dtype: String,
}

impl GridHeader {
    fn for_domain(domain: &GridDomain, dtype: &str) -> Self {
        Self {
            dims: domain.dims,
            origin: domain.origin,
            gridstep: domain.gridstep,
            dtype: dtype.to_string(),
        }
    }

    fn domain(&self) -> Result<GridDomain, GeomError> {
        GridDomain::new(
            Point3::new(self.origin[0], self.origin[1], self.origin[2]),
            self.gridstep,
            self.dims,
        )
    }
}

fn write_header(path: &Path, header: &GridHeader) -> Result<(), GeomError> {
    let text = serde_json::to_string_pretty(header).map_err(|e| GeomError::GridFormat(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read_header(path: &Path, dtype: &str) -> Result<GridHeader, GeomError> {
    let text = std::fs::read_to_string(path)?;
    let header: GridHeader =
        serde_json::from_str(&text).map_err(|e| GeomError::GridFormat(e.to_string()))?;
    if header.dtype != dtype {
        return Err(GeomError::GridFormat(format!(
            "expected dtype {dtype}, found {}",
            header.dtype
        )));
    }
    Ok(header)
}

fn read_payload(path: &Path, expected: usize) -> Result<Vec<u8>, GeomError> {
    let mut buf = Vec::with_capacity(expected);
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    if buf.len() != expected {
        return Err(GeomError::GridFormat(format!(
            "payload has {} bytes, header implies {expected}",
            buf.len()
        )));
    }
    Ok(buf)
}

impl ScalarGrid3 {
    /// Writes `header` (JSON) and `payload` (little-endian u32, x-fastest).
    pub fn write(&self, header: &Path, payload: &Path) -> Result<(), GeomError> {
        write_header(header, &GridHeader::for_domain(&self.domain, "u32"))?;
        let mut out = BufWriter::new(File::create(payload)?);
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(header: &Path, payload: &Path) -> Result<Self, GeomError> {
        let domain = read_header(header, "u32")?.domain()?;
        let bytes = read_payload(payload, domain.len() * 4)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { domain, values })
    }
}

impl VectorGrid3 {
    /// Writes `header` (JSON) and `payload` (little-endian f64 triples, x-fastest).
    pub fn write(&self, header: &Path, payload: &Path) -> Result<(), GeomError> {
        write_header(header, &GridHeader::for_domain(&self.domain, "f64x3"))?;
        let mut out = BufWriter::new(File::create(payload)?);
        for v in &self.values {
            for c in v.iter() {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(header: &Path, payload: &Path) -> Result<Self, GeomError> {
        let domain = read_header(header, "f64x3")?.domain()?;
        let bytes = read_payload(payload, domain.len() * 24)?;
        let values = bytes
            .chunks_exact(24)
            .map(|c| {
                let f = |o: usize| {
                    let mut b = [0u8; 8];
                    b.copy_from_slice(&c[o..o + 8]);
                    f64::from_le_bytes(b)
                };
                Vec3::new(f(0), f(8), f(16))
            })
            .collect();
        Ok(Self { domain, values })
    }
}

/// Component-wise bounding box of a point set. `None` when empty.
pub fn bounding_box<'a, I>(points: I) -> Option<(Point3, Point3)>
where
    I: IntoIterator<Item = &'a Point3>,
{
    let mut it = points.into_iter();
    let first = *it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
}

/// Distance from `p` to the segment `[a, b]`, and the segment parameter in `[0, 1]`.
pub fn point_segment_distance(p: &Point3, a: &Point3, b: &Point3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + ab * t - p).norm(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gram_is_identity(f: &OrthonormalFrame, tol: f64) -> bool {
        let m = [f.u, f.v, f.w];
        (0..3).all(|i| {
            (0..3).all(|j| {
                let expect = if i == j { 1.0 } else { 0.0 };
                (m[i].dot(&m[j]) - expect).abs() < tol
            })
        })
    }

    #[test]
    fn frame_for_z_axis_follows_construction() {
        let f = OrthonormalFrame::from_direction(Vec3::z()).unwrap();
        // e = x (tie between x and y resolved to x); u = z × x = y, v = z × y = -x
        assert_eq!(f.u, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(f.v, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(f.w, Vec3::z());
        assert!(gram_is_identity(&f, 1e-15));
    }

    #[test]
    fn frame_for_negative_z() {
        let w = Vec3::new(0.0, 0.0, -1.0);
        let f = OrthonormalFrame::from_direction(w).unwrap();
        assert_eq!(f.v, f.w.cross(&f.u));
        assert_eq!(f.u.dot(&f.v), 0.0);
        assert!(gram_is_identity(&f, 1e-15));
        assert_eq!(f.w, w);
    }

    #[test]
    fn frame_for_diagonal_is_orthonormal() {
        let w = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        let f = OrthonormalFrame::from_direction(w).unwrap();
        assert!(gram_is_identity(&f, 1e-12));
        assert_abs_diff_eq!(f.u.cross(&f.v), f.w, epsilon = 1e-12);
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(matches!(
            OrthonormalFrame::from_direction(Vec3::new(1e-13, 0.0, 0.0)),
            Err(GeomError::ZeroDirection)
        ));
    }

    #[test]
    fn digitize_examples() {
        let d = GridDomain::new(Point3::zeros(), 1.0, [2, 2, 2]).unwrap();
        assert_eq!(d.digitize(&Point3::new(0.1, 0.1, 0.1)), Some([0, 0, 0]));
        assert_eq!(d.digitize(&Point3::new(2.5, 0.0, 0.0)), None);
        let h = GridDomain::new(Point3::zeros(), 0.5, [4, 4, 4]).unwrap();
        assert_eq!(h.digitize(&Point3::new(1.0, 1.0, 1.0)), Some([2, 2, 2]));
    }

    #[test]
    fn trilinear_on_uniform_grid() {
        let d = GridDomain::new(Point3::new(-2.0, -2.0, -2.0), 1.0, [5, 5, 5]).unwrap();
        let mut g = ScalarGrid3::zeros(d);
        g.values.iter_mut().for_each(|v| *v = 5);
        assert_abs_diff_eq!(g.sample_trilinear(&Point3::new(0.13, -0.4, 0.7)), 5.0, epsilon = 1e-12);
        let c = d.voxel_center([2, 2, 2]);
        g.values.iter_mut().for_each(|v| *v = 0);
        let lin = d.linear([2, 2, 2]);
        g.values[lin] = 7;
        assert_abs_diff_eq!(g.sample_trilinear(&c), 7.0, epsilon = 1e-12);
        assert_eq!(g.local_peak(&(c + Vec3::new(0.3, 0.3, 0.3))), 7);
        assert_eq!(g.neighborhood_sum(&(c + Vec3::new(0.3, 0.3, 0.3))), g.total());
    }

    #[test]
    fn grid_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let d = GridDomain::new(Point3::new(0.5, -1.0, 2.0), 0.25, [3, 2, 4]).unwrap();
        let mut s = ScalarGrid3::zeros(d);
        for (i, v) in s.values.iter_mut().enumerate() {
            *v = i as u32 * 3;
        }
        s.write(&dir.path().join("a.json"), &dir.path().join("a.bin")).unwrap();
        let back = ScalarGrid3::read(&dir.path().join("a.json"), &dir.path().join("a.bin")).unwrap();
        assert_eq!(back, s);
        let bytes = std::fs::read(dir.path().join("a.bin")).unwrap();
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());

        let mut v = VectorGrid3::zeros(d);
        v.values[5] = Vec3::new(1.0, -2.0, 0.5);
        v.write(&dir.path().join("d.json"), &dir.path().join("d.bin")).unwrap();
        let back = VectorGrid3::read(&dir.path().join("d.json"), &dir.path().join("d.bin")).unwrap();
        assert_eq!(back, v);
        assert!(ScalarGrid3::read(&dir.path().join("d.json"), &dir.path().join("d.bin")).is_err());
    }

    proptest! {
        #[test]
        fn frame_is_deterministic_and_orthonormal(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let w = Vec3::new(x, y, z);
            prop_assume!(w.norm() > 1e-6);
            let a = OrthonormalFrame::from_direction(w).unwrap();
            let b = OrthonormalFrame::from_direction(w).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(gram_is_identity(&a, 1e-9));
        }

        #[test]
        fn digitize_inverts_voxel_center(i in 0usize..7, j in 0usize..5, k in 0usize..9,
                                         ox in -5.0f64..5.0, step in 0.05f64..3.0) {
            let d = GridDomain::new(Point3::new(ox, -ox, 0.5 * ox), step, [7, 5, 9]).unwrap();
            prop_assert_eq!(d.digitize(&d.voxel_center([i, j, k])), Some([i, j, k]));
            prop_assert_eq!(d.unlinear(d.linear([i, j, k])), [i, j, k]);
        }
    }
}
