//! Least-squares re-centering of centerline points on the input surface.
//!
//! Each point `C` is moved to the center of the radius-`R` circle best fitting
//! its associated surface points `M_j`, minimizing
//! `E(C) = Σ w_j (|C M_j| − R)²` by steepest descent. The descent direction is
//! the resultant of the elastic forces `P_j M_j`, where `P_j = C + R·u_j` is
//! the projection of `M_j` on the sphere of radius `R` around `C`; that sum is
//! exactly `−∇E / 2`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{Point3, Vec3};
use crate::normals::OrientedFaceSet;
use crate::spatial::PointHash;
use crate::track::Centerline;

#[derive(Debug, Error, PartialEq)]
pub enum RefineError {
    #[error("surface point coincides with the center")]
    CoincidentPoint,
    #[error("only {count} surface points associated with centerline point {index}")]
    TooFewPoints { index: usize, count: usize },
    #[error("invalid refinement parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineParams {
    /// Known tube radius `R`.
    pub radius: f64,
    pub acc_radius: f64,
    /// Thickness of the association slab around each point.
    pub track_step: f64,
    /// Stop once the energy decreases by less than this between iterations.
    pub epsilon_o: f64,
    pub max_iter: usize,
    /// Weight every force by its face area.
    pub area_weighting: bool,
    /// Initial step on the force, divided by the total weight.
    pub step_scale: f64,
    /// Association sphere radius as a multiple of
    /// `hypot(acc_radius, track_step / 2)`, the smallest sphere holding the
    /// whole slab of a tube of radius `acc_radius`.
    pub association_scale: f64,
}

impl RefineParams {
    pub fn new(radius: f64, acc_radius: f64, track_step: f64) -> Self {
        Self {
            radius,
            acc_radius,
            track_step,
            epsilon_o: 1e-3,
            max_iter: 1000,
            area_weighting: false,
            step_scale: 0.5,
            association_scale: 1.0,
        }
    }

    pub fn association_radius(&self) -> f64 {
        self.association_scale * self.acc_radius.hypot(0.5 * self.track_step)
    }

    fn validate(&self) -> Result<(), RefineError> {
        if !(self.radius > 0.0 && self.acc_radius > 0.0 && self.track_step > 0.0) {
            return Err(RefineError::InvalidParams("radius, accRadius and trackStep must be positive".into()));
        }
        if !(self.epsilon_o > 0.0) {
            return Err(RefineError::InvalidParams(format!("epsilon_o {}", self.epsilon_o)));
        }
        if !(self.step_scale > 0.0 && self.association_scale > 0.0) {
            return Err(RefineError::InvalidParams("step/association scale must be positive".into()));
        }
        Ok(())
    }
}

/// Surface points attached to one centerline point.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionAssociation {
    pub index: usize,
    pub points: Vec<Point3>,
    pub weights: Option<Vec<f64>>,
}

/// Energy, gradient and force at one center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEval {
    pub energy: f64,
    pub gradient: Vec3,
    pub force: Vec3,
}

/// Evaluates the fitting energy, its analytic gradient and the elastic force.
pub fn energy_and_gradient(
    center: &Point3,
    points: &[Point3],
    radius: f64,
    weights: Option<&[f64]>,
) -> Result<EnergyEval, RefineError> {
    let mut energy = 0.0;
    let mut gradient = Vec3::zeros();
    let mut force = Vec3::zeros();
    for (j, m) in points.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[j]);
        let cm = m - center;
        let d = cm.norm();
        if !(d > 1e-12) {
            return Err(RefineError::CoincidentPoint);
        }
        let u = cm / d;
        energy += w * (d - radius) * (d - radius);
        gradient += u * (2.0 * w * (radius - d));
        let p = center + u * radius;
        force += (m - p) * w;
    }
    Ok(EnergyEval {
        energy,
        gradient,
        force,
    })
}

fn energy_only(center: &Point3, points: &[Point3], radius: f64, weights: Option<&[f64]>) -> Option<f64> {
    let mut e = 0.0;
    for (j, m) in points.iter().enumerate() {
        let d = (m - center).norm();
        if !(d > 1e-12) {
            return None;
        }
        let w = weights.map_or(1.0, |w| w[j]);
        e += w * (d - radius) * (d - radius);
    }
    Some(e)
}

/// Fast association of surface points to centerline points.
pub struct SectionIndex<'a> {
    faces: &'a OrientedFaceSet,
    hash: PointHash<'a>,
    params: RefineParams,
}

impl<'a> SectionIndex<'a> {
    pub fn new(faces: &'a OrientedFaceSet, params: &RefineParams) -> Self {
        let reach = params.association_radius();
        Self {
            faces,
            hash: PointHash::new(&faces.centers, reach),
            params: *params,
        }
    }

    /// Face centers within the association sphere of `C_i` whose offset
    /// along the local tangent lies in `(−trackStep/2, +trackStep/2]`.
    pub fn section_points(&self, centerline: &Centerline, i: usize) -> Result<SectionAssociation, RefineError> {
        let c = centerline.points[i];
        let mut d = centerline.directions.get(i).copied().unwrap_or_else(Vec3::zeros);
        if !(d.norm() > 1e-12) {
            d = Centerline::from_points(centerline.points.clone()).directions[i];
        }
        let d = d.normalize();
        let half = 0.5 * self.params.track_step;
        let reach = self.params.association_radius();
        let idx: Vec<usize> = self
            .hash
            .within(&c, reach)
            .into_iter()
            .filter(|&j| {
                let s = (self.faces.centers[j] - c).dot(&d);
                s > -half && s <= half
            })
            .collect();
        if idx.len() < 3 {
            return Err(RefineError::TooFewPoints {
                index: i,
                count: idx.len(),
            });
        }
        Ok(SectionAssociation {
            index: i,
            points: idx.iter().map(|&j| self.faces.centers[j]).collect(),
            weights: self
                .params
                .area_weighting
                .then(|| idx.iter().map(|&j| self.faces.areas[j]).collect()),
        })
    }
}

/// Result of optimizing one center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFit {
    pub position: Point3,
    pub initial_energy: f64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Descends from `start` with step `step_scale / Σw` on the force, halving
/// the step whenever the energy would increase.
pub fn optimize_point(start: Point3, assoc: &SectionAssociation, params: &RefineParams) -> Result<PointFit, RefineError> {
    let w = assoc.weights.as_deref();
    let total_w: f64 = w.map_or(assoc.points.len() as f64, |w| w.iter().sum());
    let mut step = params.step_scale / total_w.max(1e-300);
    let mut c = start;
    let mut e = energy_and_gradient(&c, &assoc.points, params.radius, w)?.energy;
    let initial_energy = e;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let f = energy_and_gradient(&c, &assoc.points, params.radius, w)?.force;
        let mut accepted = None;
        while step > 1e-14 / total_w.max(1e-300) {
            let trial = c + f * step;
            match energy_only(&trial, &assoc.points, params.radius, w) {
                Some(et) if et <= e => {
                    accepted = Some((trial, et));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        iterations += 1;
        let Some((next, en)) = accepted else {
            converged = true;
            break;
        };
        let decrease = e - en;
        c = next;
        e = en;
        if decrease < params.epsilon_o {
            converged = true;
            break;
        }
    }
    Ok(PointFit {
        position: c,
        initial_energy,
        energy: e,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointStatus {
    Refined {
        associated: usize,
        iterations: usize,
        initial_energy: f64,
        energy: f64,
    },
    TooFewPoints {
        associated: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RefineReport {
    pub points: Vec<PointStatus>,
}

impl RefineReport {
    pub fn refined_count(&self) -> usize {
        self.points
            .iter()
            .filter(|s| matches!(s, PointStatus::Refined { .. }))
            .count()
    }
}

/// Re-centers every centerline point independently. Points with fewer than
/// three associated surface points are passed through unchanged.
pub fn optimize_centerline(
    centerline: &Centerline,
    faces: &OrientedFaceSet,
    params: &RefineParams,
) -> Result<(Centerline, RefineReport), RefineError> {
    params.validate()?;
    let index = SectionIndex::new(faces, params);
    let fits: Vec<(Point3, PointStatus)> = (0..centerline.len())
        .into_par_iter()
        .map(|i| {
            let c = centerline.points[i];
            match index.section_points(centerline, i) {
                Ok(assoc) => match optimize_point(c, &assoc, params) {
                    Ok(fit) => (
                        fit.position,
                        PointStatus::Refined {
                            associated: assoc.points.len(),
                            iterations: fit.iterations,
                            initial_energy: fit.initial_energy,
                            energy: fit.energy,
                        },
                    ),
                    Err(_) => (
                        c,
                        PointStatus::TooFewPoints {
                            associated: assoc.points.len(),
                        },
                    ),
                },
                Err(RefineError::TooFewPoints { count, .. }) => (c, PointStatus::TooFewPoints { associated: count }),
                Err(_) => (c, PointStatus::TooFewPoints { associated: 0 }),
            }
        })
        .collect();
    let mut out = centerline.clone();
    let mut report = RefineReport::default();
    for (i, (p, s)) in fits.into_iter().enumerate() {
        out.points[i] = p;
        report.points.push(s);
    }
    Ok((out, report))
}
