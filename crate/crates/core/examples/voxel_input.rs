//! Centerline of a binary volume.
//!
//! A capped bent tube is voxelized, then processed from its digital surface:
//! unit boundary facets whose normals are re-estimated from the local
//! surface shape.

use std::f64::consts::PI;

use tubeaxis::pipeline::NormalSource;
use tubeaxis::synth::{gen_tube, voxelize, Piece};
use tubeaxis::{run_pipeline, PipelineConfig, PipelineInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pieces = [
        Piece::Straight { length: 60.0 },
        Piece::Arc { radius: 25.0, angle: PI / 2.0, plane_turn: 0.0 },
        Piece::Straight { length: 60.0 },
    ];
    let tube = gen_tube(&pieces, 5.0, 0.5)?;
    let voxels = voxelize(&tube.capped(), 1.0)?;
    println!("{} voxels", voxels.len());

    let mut cfg = PipelineConfig::new(5.0);
    cfg.normals = NormalSource::Estimate;
    let input = PipelineInput::Voxels { voxels, voxel_size: 1.0 };
    let out = run_pipeline(&input, &cfg)?;
    println!(
        "{} boundary facets, gridstep {}, {} centerline points",
        out.prepared.faces.len(),
        out.prepared.gridstep,
        out.refined.len()
    );
    println!("segments {:?}", out.decomposition.labels());
    let stats = out.error_map.summary();
    println!("facet error against the rebuilt tube: RMS {:.3}", stats.covered.rms);
    Ok(())
}
