//! Accumulation of inward surface-normal scans into a vote image and a
//! principal-direction image.
//!
//! Every face launches a directional scan from its center along its inward
//! normal, advancing one gridstep per step while the distance to the center
//! stays below `accRadius = R + ε`. Each visited voxel gains one vote. From
//! the second visit onward the cross product of the previous and current
//! normals through that voxel is added (sign-aligned) to the direction image,
//! provided its norm exceeds `minNorm`. Peaks of the vote image lie on the
//! tube centerline and the direction image approximates its tangent there.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{GeomError, GridDomain, ScalarGrid3, Vec3, VectorGrid3, VoxelIndex};
use crate::normals::OrientedFaceSet;

#[derive(Debug, Error)]
pub enum AccumulateError {
    #[error("no faces to accumulate")]
    EmptyInput,
    #[error("invalid accumulation parameters: {0}")]
    InvalidParams(String),
    #[error("scan of face {face} starts outside the accumulation domain")]
    DomainTooSmall { face: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccumulationParams {
    /// Expected tube radius `R` (world units).
    pub radius: f64,
    /// Slack `ε` added to the radius for the scan length.
    pub epsilon: f64,
    /// Cross products with a norm at or below this are ignored.
    pub min_norm: f64,
    pub gridstep: f64,
}

impl AccumulationParams {
    /// Defaults: `ε = 0.1·R`, `minNorm = 0.1`.
    pub fn new(radius: f64, gridstep: f64) -> Self {
        Self {
            radius,
            epsilon: 0.1 * radius,
            min_norm: 0.1,
            gridstep,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn acc_radius(&self) -> f64 {
        self.radius + self.epsilon
    }

    pub fn validate(&self) -> Result<(), AccumulateError> {
        let bad = |m: String| Err(AccumulateError::InvalidParams(m));
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return bad(format!("radius {}", self.radius));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon {}", self.epsilon));
        }
        if !(self.min_norm > 0.0 && self.min_norm < 1.0) {
            return bad(format!("minNorm {} not in (0,1)", self.min_norm));
        }
        if !(self.gridstep > 0.0) || !self.gridstep.is_finite() {
            return bad(format!("gridstep {}", self.gridstep));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AccumulationResult {
    pub acc: ScalarGrid3,
    pub dir: VectorGrid3,
    pub max_acc: u32,
    pub max_pt: VoxelIndex,
    /// Number of scan steps performed (equals the sum of all votes).
    pub steps: u64,
}

/// Domain covering all face centers with an `accRadius + gridstep` margin.
pub fn default_domain(
    faces: &OrientedFaceSet,
    params: &AccumulationParams,
) -> Result<GridDomain, AccumulateError> {
    let (lo, hi) = faces.bounds().ok_or(AccumulateError::EmptyInput)?;
    Ok(GridDomain::enclosing(
        lo,
        hi,
        params.acc_radius() + params.gridstep,
        params.gridstep,
    )?)
}

struct Accumulator {
    acc: Vec<u32>,
    dir: Vec<Vec3>,
    /// Index of the last face whose scan passed through each voxel.
    last: Vec<u32>,
    max_acc: u32,
    max_lin: usize,
    steps: u64,
    min_norm: f64,
}

impl Accumulator {
    fn new(len: usize, min_norm: f64) -> Self {
        Self {
            // zeroed allocations stay unmapped until a scan touches them
            acc: vec![0; len],
            dir: bytemuck::zeroed_vec(len),
            last: vec![0; len],
            max_acc: 0,
            max_lin: 0,
            steps: 0,
            min_norm,
        }
    }

    #[inline]
    fn visit(&mut self, lin: usize, face: u32, normals: &[Vec3]) {
        let normal = &normals[face as usize];
        if self.acc[lin] != 0 {
            let main_axis = normals[self.last[lin] as usize].cross(normal);
            if main_axis.norm() > self.min_norm {
                // sign(0) counts as +1
                let s = if main_axis.dot(&self.dir[lin]) < 0.0 { -1.0 } else { 1.0 };
                self.dir[lin] += main_axis * s;
            }
        }
        self.last[lin] = face;
        self.acc[lin] += 1;
        self.steps += 1;
        if self.acc[lin] > self.max_acc {
            self.max_acc = self.acc[lin];
            self.max_lin = lin;
        }
    }
}

/// Linear voxel offsets visited by the scan of one face, in march order.
fn scan(domain: &GridDomain, center: &Vec3, normal: &Vec3, acc_radius: f64, out: &mut Vec<usize>) {
    let mut k = 0usize;
    loop {
        let p = center + normal * (k as f64 * domain.gridstep);
        if !((p - center).norm() < acc_radius) {
            break;
        }
        match domain.digitize(&p) {
            Some(idx) => out.push(domain.linear(idx)),
            None => break,
        }
        k += 1;
    }
}

/// Builds the accumulation and direction images.
///
/// Faces are processed in input order, which fixes the direction image
/// bit-for-bit. When the current rayon pool has more than one thread the
/// scans are traced in parallel and replayed sequentially, giving the same
/// result.
pub fn compute_accumulation(
    faces: &OrientedFaceSet,
    params: &AccumulationParams,
    domain: &GridDomain,
) -> Result<AccumulationResult, AccumulateError> {
    params.validate()?;
    if faces.is_empty() {
        return Err(AccumulateError::EmptyInput);
    }
    if faces.len() > u32::MAX as usize {
        return Err(AccumulateError::InvalidParams(format!("{} faces exceed the u32 index range", faces.len())));
    }
    if (domain.gridstep - params.gridstep).abs() > 1e-12 * params.gridstep {
        return Err(AccumulateError::InvalidParams(format!(
            "domain gridstep {} differs from parameter gridstep {}",
            domain.gridstep, params.gridstep
        )));
    }
    if let Some(face) = faces.centers.iter().position(|c| !domain.contains(c)) {
        return Err(AccumulateError::DomainTooSmall { face });
    }
    let normals: Vec<Vec3> = faces
        .normals
        .iter()
        .map(|n| {
            let l = n.norm();
            if l > 0.0 {
                n / l
            } else {
                *n
            }
        })
        .collect();
    let acc_radius = params.acc_radius();
    let mut state = Accumulator::new(domain.len(), params.min_norm);

    if rayon::current_num_threads() > 1 && faces.len() >= 4096 {
        const CHUNK: usize = 2048;
        let traced: Vec<(Vec<usize>, Vec<usize>)> = (0..faces.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut visits = Vec::new();
                let mut ends = Vec::with_capacity(chunk.len());
                for &f in chunk {
                    scan(domain, &faces.centers[f], &normals[f], acc_radius, &mut visits);
                    ends.push(visits.len());
                }
                (visits, ends)
            })
            .collect();
        for (c, (visits, ends)) in traced.iter().enumerate() {
            let mut start = 0;
            for (k, &end) in ends.iter().enumerate() {
                let f = (c * CHUNK + k) as u32;
                for &lin in &visits[start..end] {
                    state.visit(lin, f, &normals);
                }
                start = end;
            }
        }
    } else {
        let mut visits = Vec::new();
        for (f, (center, n)) in faces.centers.iter().zip(&normals).enumerate() {
            visits.clear();
            scan(domain, center, n, acc_radius, &mut visits);
            for &lin in &visits {
                state.visit(lin, f as u32, &normals);
            }
        }
    }

    Ok(AccumulationResult {
        acc: ScalarGrid3 {
            domain: *domain,
            values: state.acc,
        },
        dir: VectorGrid3 {
            domain: *domain,
            values: state.dir,
        },
        max_acc: state.max_acc,
        max_pt: domain.unlinear(state.max_lin),
        steps: state.steps,
    })
}
