//! Per-face centers, unit normals and areas, oriented toward the tube interior.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::accumulate::{compute_accumulation, AccumulationParams};
use crate::geom::{bounding_box, GridDomain, Point3, Vec3};
use crate::ingest::{TriMesh, VoxelSet};
use crate::spatial::PointHash;

#[derive(Debug, Error)]
pub enum NormalsError {
    #[error("face {0} is degenerate")]
    DegenerateFace(usize),
    #[error("input contains no faces or voxels")]
    EmptyInput,
}

/// Face centers with their unit normals and areas, in input face order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrientedFaceSet {
    pub centers: Vec<Point3>,
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
}

impl OrientedFaceSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn flipped(&self) -> Self {
        Self {
            centers: self.centers.clone(),
            normals: self.normals.iter().map(|n| -n).collect(),
            areas: self.areas.clone(),
        }
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        bounding_box(&self.centers)
    }
}

/// Normal, centroid and area of every mesh face from its edge cross product.
pub fn face_normals(mesh: &TriMesh) -> Result<OrientedFaceSet, NormalsError> {
    let mut out = OrientedFaceSet {
        centers: Vec::with_capacity(mesh.faces.len()),
        normals: Vec::with_capacity(mesh.faces.len()),
        areas: Vec::with_capacity(mesh.faces.len()),
    };
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.corners(f);
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        if !(norm > 2.0 * crate::ingest::MIN_FACE_AREA) {
            return Err(NormalsError::DegenerateFace(f));
        }
        out.centers.push((a + b + c) / 3.0);
        out.normals.push(cross / norm);
        out.areas.push(0.5 * norm);
    }
    Ok(out)
}

const FACET_DIRS: [([i64; 3], usize, f64); 6] = [
    ([-1, 0, 0], 0, -1.0),
    ([1, 0, 0], 0, 1.0),
    ([0, -1, 0], 1, -1.0),
    ([0, 1, 0], 1, 1.0),
    ([0, 0, -1], 2, -1.0),
    ([0, 0, 1], 2, 1.0),
];

/// Boundary facets of a voxel set (voxel faces adjacent to an empty voxel)
/// with their provisional outward axis normals and unit area.
pub fn boundary_facets(voxels: &VoxelSet) -> Result<OrientedFaceSet, NormalsError> {
    if voxels.is_empty() {
        return Err(NormalsError::EmptyInput);
    }
    let mut out = OrientedFaceSet::default();
    for p in voxels.iter() {
        for (d, axis, sign) in FACET_DIRS {
            let q = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
            if voxels.contains(&q) {
                continue;
            }
            let mut c = Point3::new(p[0] as f64 + 0.5, p[1] as f64 + 0.5, p[2] as f64 + 0.5);
            c[axis] += 0.5 * sign;
            let mut n = Vec3::zeros();
            n[axis] = sign;
            out.centers.push(c);
            out.normals.push(n);
            out.areas.push(1.0);
        }
    }
    Ok(out)
}

/// Inward facet normals of a voxel set, smoothed by local covariance analysis.
pub fn digital_surface_faces(voxels: &VoxelSet, radius: f64) -> Result<OrientedFaceSet, NormalsError> {
    Ok(estimate_digital_normals(&boundary_facets(voxels)?, radius))
}

fn covariance_normal(centers: &[Point3], me: usize, neighbors: &[usize]) -> Option<Vec3> {
    if neighbors.len() < 3 {
        return None;
    }
    let base = centers[me];
    // differences to the query facet are exact for lattice facets, which
    // makes the estimate bit-identical under integer translations
    let diffs: Vec<Vec3> = neighbors.iter().map(|&j| centers[j] - base).collect();
    let mean = diffs.iter().fold(Vec3::zeros(), |a, d| a + d) / diffs.len() as f64;
    let mut cov = Matrix3::zeros();
    for d in &diffs {
        let e = d - mean;
        cov += e * e.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    // rank < 2: neighbors do not span a plane
    if !(mid > 1e-9 * hi.max(1e-300)) || !(lo.is_finite()) {
        return None;
    }
    let n = eig.eigenvectors.column(order[0]).into_owned();
    let len = n.norm();
    (len > 0.0).then(|| n / len)
}

/// Replaces each provisional outward normal by the smallest-eigenvalue
/// direction of the covariance of facet centers within `radius`, oriented
/// like the provisional normal and then negated to point inward. Facets
/// whose neighborhood is degenerate keep the provisional direction (also
/// turned inward).
pub fn estimate_digital_normals(faces: &OrientedFaceSet, radius: f64) -> OrientedFaceSet {
    let hash = PointHash::new(&faces.centers, radius.max(1e-9));
    let normals = (0..faces.len())
        .into_par_iter()
        .map(|i| {
            let provisional = faces.normals[i];
            let nb = hash.within(&faces.centers[i], radius);
            let n = match covariance_normal(&faces.centers, i, &nb) {
                Some(n) if n.dot(&provisional) < 0.0 => -n,
                Some(n) => n,
                None => provisional,
            };
            -n
        })
        .collect();
    OrientedFaceSet {
        centers: faces.centers.clone(),
        normals,
        areas: faces.areas.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientMode {
    /// Probe both orientations with a coarse accumulation and keep the one
    /// concentrating more votes.
    Auto,
    Keep,
    Flip,
}

/// Outcome of [`orient_inward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Orientation {
    pub faces: OrientedFaceSet,
    pub flipped: bool,
    /// `(maxAcc as given, maxAcc flipped)` of the coarse probe, auto mode only.
    pub probe: Option<(u32, u32)>,
}

/// Chooses the normal orientation pointing into the tube.
///
/// `radius` and `gridstep` are the accumulation parameters of the real run;
/// the auto probe uses twice the gridstep.
pub fn orient_inward(
    faces: &OrientedFaceSet,
    mode: OrientMode,
    radius: f64,
    gridstep: f64,
) -> Result<Orientation, crate::accumulate::AccumulateError> {
    match mode {
        OrientMode::Keep => Ok(Orientation {
            faces: faces.clone(),
            flipped: false,
            probe: None,
        }),
        OrientMode::Flip => Ok(Orientation {
            faces: faces.flipped(),
            flipped: true,
            probe: None,
        }),
        OrientMode::Auto => {
            let params = AccumulationParams::new(radius, 2.0 * gridstep);
            let (lo, hi) = faces.bounds().ok_or(crate::accumulate::AccumulateError::EmptyInput)?;
            let domain = GridDomain::enclosing(lo, hi, params.acc_radius() + params.gridstep, params.gridstep)?;
            let flipped = faces.flipped();
            let keep_max = compute_accumulation(faces, &params, &domain)?.max_acc;
            let flip_max = compute_accumulation(&flipped, &params, &domain)?.max_acc;
            log::debug!("orientation probe: as-is {keep_max}, flipped {flip_max}");
            let flip = flip_max > keep_max;
            Ok(Orientation {
                faces: if flip { flipped } else { faces.clone() },
                flipped: flip,
                probe: Some((keep_max, flip_max)),
            })
        }
    }
}
