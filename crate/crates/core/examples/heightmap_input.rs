//! Centerline of a tube seen only from above.
//!
//! The tube is rendered as a height image from +z, turned back into a
//! surface and tracked. Only the upper half of the surface is visible, so
//! the votes come from one side of the axis.

use std::f64::consts::PI;

use tubeaxis::synth::{gen_tube, render_heightmap, Piece, ViewAxis};
use tubeaxis::rebuild::polyline_distance;
use tubeaxis::{run_pipeline, PipelineConfig, PipelineInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pieces = [
        Piece::Straight { length: 60.0 },
        Piece::Arc { radius: 25.0, angle: PI / 2.0, plane_turn: 0.0 },
        Piece::Straight { length: 60.0 },
    ];
    let tube = gen_tube(&pieces, 5.0, 0.5)?;
    let hm = render_heightmap(&tube.mesh, ViewAxis::PosZ, 1.0)?;
    println!("height map {}x{}", hm.width, hm.height);

    let out = run_pipeline(&PipelineInput::HeightMap(hm), &PipelineConfig::new(5.0))?;
    let d: Vec<f64> = out
        .refined
        .points
        .iter()
        .map(|p| polyline_distance(p, &tube.truth.points).0)
        .collect();
    let rms = (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt();
    println!("{} centerline points, RMS distance to the true axis {rms:.3}", d.len());
    Ok(())
}
