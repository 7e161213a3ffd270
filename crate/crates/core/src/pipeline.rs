//! End-to-end orchestration: surface elements, accumulation, tracking,
//! refinement, decomposition and reconstruction.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::accumulate::{compute_accumulation, default_domain, AccumulateError, AccumulationParams, AccumulationResult};
use crate::decompose::{decompose_centerline, DecomposeError, DecomposeParams, Decomposition};
use crate::ingest::{height_map_to_mesh, HeightMap, IngestError, TriMesh, VoxelSet};
use crate::normals::{digital_surface_faces, estimate_digital_normals, face_normals, orient_inward, NormalsError, OrientMode, OrientedFaceSet};
use crate::rebuild::{error_map, sweep_tube, ErrorMap, RebuildError};
use crate::refine::{optimize_centerline, RefineError, RefineParams, RefineReport};
use crate::track::{extract_centerline, Centerline, TrackError, TrackParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Normals(#[from] NormalsError),
    #[error(transparent)]
    Accumulate(#[from] AccumulateError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Rebuild(#[from] RebuildError),
}

impl PipelineError {
    /// Whether the failure comes from the input rather than a stage.
    pub fn is_input_error(&self) -> bool {
        matches!(self, PipelineError::Input(_) | PipelineError::Ingest(_) | PipelineError::Normals(NormalsError::EmptyInput))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NormalSource {
    /// Geometric face normals (mesh inputs).
    Faces,
    /// Local covariance estimate over face centers.
    Estimate,
}

/// Surface data the pipeline can start from.
#[derive(Debug, Clone)]
pub enum PipelineInput {
    Mesh(TriMesh),
    /// Lattice voxels; world position is lattice coordinate times `voxel_size`.
    Voxels { voxels: VoxelSet, voxel_size: f64 },
    HeightMap(HeightMap),
}

impl PipelineInput {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineInput::Mesh(_) => "mesh",
            PipelineInput::Voxels { .. } => "voxels",
            PipelineInput::HeightMap(_) => "heightmap",
        }
    }
}

/// Every tunable of a run; `None` picks the documented default.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub radius: f64,
    pub gridstep: Option<f64>,
    pub normals: NormalSource,
    pub orient: OrientMode,
    /// Neighborhood radius for normal estimation (default `R/2`).
    pub normal_radius: Option<f64>,
    pub epsilon_acc: Option<f64>,
    pub track_step: Option<f64>,
    pub inside_threshold: f64,
    pub max_angle: f64,
    pub epsilon_o: f64,
    pub max_iter: usize,
    pub area_weighting: bool,
    pub alpha_flat: f64,
    pub nu: f64,
    pub min_len: usize,
    pub sides: usize,
}

impl PipelineConfig {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            gridstep: None,
            normals: NormalSource::Faces,
            orient: OrientMode::Auto,
            normal_radius: None,
            epsilon_acc: None,
            track_step: None,
            inside_threshold: 0.5,
            max_angle: std::f64::consts::FRAC_PI_3,
            epsilon_o: 1e-3,
            max_iter: 1000,
            area_weighting: false,
            alpha_flat: 0.05,
            nu: 0.15,
            min_len: 3,
            sides: 24,
        }
    }

    pub fn accumulation_params(&self, gridstep: f64) -> AccumulationParams {
        let p = AccumulationParams::new(self.radius, gridstep);
        match self.epsilon_acc {
            Some(e) => p.with_epsilon(e),
            None => p,
        }
    }

    pub fn track_params(&self, acc_radius: f64) -> TrackParams {
        let mut p = TrackParams::new(self.radius, acc_radius);
        if let Some(s) = self.track_step {
            p.track_step = s;
        }
        p.inside_threshold = self.inside_threshold;
        p.max_angle = self.max_angle;
        p
    }

    pub fn refine_params(&self, acc_radius: f64, track_step: f64) -> RefineParams {
        let mut p = RefineParams::new(self.radius, acc_radius, track_step);
        p.epsilon_o = self.epsilon_o;
        p.max_iter = self.max_iter;
        p.area_weighting = self.area_weighting;
        p
    }

    pub fn decompose_params(&self, gridstep: f64) -> DecomposeParams {
        let mut p = DecomposeParams::new(gridstep);
        p.alpha_flat = self.alpha_flat;
        p.nu = self.nu;
        p.min_len = self.min_len;
        p
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(PipelineError::Input(format!("radius must be positive, got {}", self.radius)));
        }
        if let Some(h) = self.gridstep {
            if !(h > 0.0) || !h.is_finite() {
                return Err(PipelineError::Input(format!("gridstep must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Oriented surface elements ready for accumulation.
#[derive(Debug, Clone)]
pub struct PreparedFaces {
    pub faces: OrientedFaceSet,
    pub gridstep: f64,
    pub flipped: bool,
    pub voxel_count: Option<usize>,
}

fn auto_gridstep(input: &PipelineInput, mesh: Option<&TriMesh>) -> Option<f64> {
    match input {
        PipelineInput::Voxels { voxel_size, .. } => Some(*voxel_size),
        PipelineInput::HeightMap(hm) => Some(hm.spacing),
        PipelineInput::Mesh(_) => mesh.and_then(|m| m.median_face_size()),
    }
}

/// Converts the input into inward-oriented face centers and normals.
pub fn prepare_faces(input: &PipelineInput, cfg: &PipelineConfig) -> Result<PreparedFaces, PipelineError> {
    cfg.validate()?;
    let normal_radius = cfg.normal_radius.unwrap_or(0.5 * cfg.radius);
    let (faces, gridstep, voxel_count) = match input {
        PipelineInput::Voxels { voxels, voxel_size } => {
            if !(*voxel_size > 0.0) {
                return Err(PipelineError::Input(format!("voxel size {voxel_size}")));
            }
            let mut f = digital_surface_faces(voxels, normal_radius / voxel_size)?;
            for c in &mut f.centers {
                *c *= *voxel_size;
            }
            for a in &mut f.areas {
                *a *= voxel_size * voxel_size;
            }
            let h = cfg.gridstep.unwrap_or(*voxel_size);
            (f, h, Some(voxels.len()))
        }
        PipelineInput::Mesh(_) | PipelineInput::HeightMap(_) => {
            let converted;
            let mesh = match input {
                PipelineInput::Mesh(m) => m,
                PipelineInput::HeightMap(hm) => {
                    converted = height_map_to_mesh(hm)?;
                    &converted
                }
                PipelineInput::Voxels { .. } => unreachable!(),
            };
            if mesh.faces.is_empty() {
                return Err(PipelineError::Input("mesh has no faces".into()));
            }
            let f = face_normals(mesh)?;
            let f = match cfg.normals {
                NormalSource::Faces => f,
                // estimate returns the negated, sign-matched estimate
                NormalSource::Estimate => estimate_digital_normals(&f, normal_radius).flipped(),
            };
            let h = cfg
                .gridstep
                .or_else(|| auto_gridstep(input, Some(mesh)))
                .ok_or_else(|| PipelineError::Input("cannot derive a gridstep".into()))?;
            (f, h, None)
        }
    };
    let oriented = orient_inward(&faces, cfg.orient, cfg.radius, gridstep)?;
    Ok(PreparedFaces {
        faces: oriented.faces,
        gridstep,
        flipped: oriented.flipped,
        voxel_count,
    })
}

/// Wall-clock seconds per stage, in execution order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings(pub Vec<(String, f64)>);

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.0.push((stage.to_string(), t0.elapsed().as_secs_f64()));
        out
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.0.iter().find(|(s, _)| s == stage).map(|(_, t)| *t)
    }
}

pub struct PipelineResult {
    pub prepared: PreparedFaces,
    pub accumulation_params: AccumulationParams,
    pub accumulation: AccumulationResult,
    pub raw: Centerline,
    pub refined: Centerline,
    pub refine_report: RefineReport,
    pub decomposition: Decomposition,
    pub reconstruction: TriMesh,
    pub error_map: ErrorMap,
    pub timings: Timings,
}

pub fn accumulate(prepared: &PreparedFaces, cfg: &PipelineConfig) -> Result<(AccumulationParams, AccumulationResult), PipelineError> {
    let params = cfg.accumulation_params(prepared.gridstep);
    params.validate()?;
    let domain = default_domain(&prepared.faces, &params)?;
    log::info!(
        "accumulating {} faces on a {}x{}x{} grid",
        prepared.faces.len(),
        domain.dims[0],
        domain.dims[1],
        domain.dims[2]
    );
    let res = compute_accumulation(&prepared.faces, &params, &domain)?;
    Ok((params, res))
}

/// Runs every stage on `input`.
pub fn run_pipeline(input: &PipelineInput, cfg: &PipelineConfig) -> Result<PipelineResult, PipelineError> {
    let mut timings = Timings::default();
    let prepared = timings.time("normals", || prepare_faces(input, cfg))?;
    let (accumulation_params, accumulation) = timings.time("accumulate", || accumulate(&prepared, cfg))?;
    let acc_radius = accumulation_params.acc_radius();
    let tp = cfg.track_params(acc_radius);
    let raw = timings.time("centerline", || extract_centerline(&accumulation, &tp))?;
    log::info!("tracked {} centerline points", raw.len());
    let rp = cfg.refine_params(acc_radius, tp.track_step);
    let (refined, refine_report) = timings.time("refine", || optimize_centerline(&raw, &prepared.faces, &rp))?;
    let decomposition = timings.time("decompose", || {
        decompose_centerline(&refined.points, &cfg.decompose_params(prepared.gridstep))
    })?;
    let (reconstruction, error_map) = timings.time("reconstruct", || -> Result<_, PipelineError> {
        let mesh = sweep_tube(&refined.points, cfg.radius, cfg.sides)?;
        let em = error_map(&prepared.faces.centers, &refined.points, cfg.radius)?;
        Ok((mesh, em))
    })?;
    Ok(PipelineResult {
        prepared,
        accumulation_params,
        accumulation,
        raw,
        refined,
        refine_report,
        decomposition,
        reconstruction,
        error_map,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::SegmentLabel;
    use crate::synth::{gen_tube, Piece};

    #[test]
    fn straight_tube_end_to_end() {
        let t = gen_tube(&[Piece::Straight { length: 40.0 }], 4.0, 1.0).unwrap();
        let cfg = PipelineConfig::new(4.0);
        let r = run_pipeline(&PipelineInput::Mesh(t.mesh), &cfg).unwrap();
        assert!(r.prepared.flipped);
        assert!(r.refined.len() >= 6);
        for p in &r.refined.points {
            assert!((p.y * p.y + p.z * p.z).sqrt() < 0.5, "{p:?}");
        }
        assert_eq!(r.decomposition.labels(), vec![SegmentLabel::Straight]);
        assert!(r.timings.get("accumulate").is_some());
    }

    #[test]
    fn radius_must_be_positive() {
        let t = gen_tube(&[Piece::Straight { length: 10.0 }], 2.0, 1.0).unwrap();
        let e = run_pipeline(&PipelineInput::Mesh(t.mesh), &PipelineConfig::new(-1.0)).err().unwrap();
        assert!(e.is_input_error());
    }
}
