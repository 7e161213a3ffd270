//! Centerline extraction and straight/toric decomposition of tubular
//! surfaces.
//!
//! Inward surface normals vote into a 3D accumulation image whose ridge is
//! the tube axis. The ridge is tracked from its maximum, re-centered by a
//! least-squares circle fit on the surface, cut into straight and circular
//! pieces, and swept back into a tube for error analysis.
//!
//! The stages live in their own modules and can be used separately;
//! [`pipeline::run_pipeline`] chains them.

pub mod accumulate;
pub mod cli;
pub mod decompose;
pub mod geom;
pub mod ingest;
pub mod normals;
pub mod pipeline;
pub mod rebuild;
pub mod refine;
pub mod spatial;
pub mod synth;
pub mod track;

pub use geom::{Point3, Vec3};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, PipelineInput, PipelineResult};
