//! Splits the centerline of a bent pipe into straight and circular pieces.

use std::f64::consts::PI;

use tubeaxis::decompose::SegmentKind;
use tubeaxis::synth::{gen_tube, Piece};
use tubeaxis::{run_pipeline, PipelineConfig, PipelineInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = 5.0;
    let pieces = [
        Piece::Straight { length: 30.0 * r },
        Piece::Arc { radius: 5.0 * r, angle: PI / 2.0, plane_turn: 0.0 },
        Piece::Straight { length: 30.0 * r },
        Piece::Arc { radius: 5.0 * r, angle: PI, plane_turn: 0.0 },
        Piece::Straight { length: 30.0 * r },
    ];
    let tube = gen_tube(&pieces, r, 1.0)?;
    let mut cfg = PipelineConfig::new(r);
    cfg.gridstep = Some(1.0);
    let out = run_pipeline(&PipelineInput::Mesh(tube.mesh), &cfg)?;

    println!("{} centerline points", out.refined.len());
    for s in &out.decomposition.segments {
        match s.kind {
            SegmentKind::Straight { direction, .. } => println!(
                "straight {:>3}..{:<3} dir ({:+.3}, {:+.3}, {:+.3})",
                s.start, s.end, direction.x, direction.y, direction.z
            ),
            SegmentKind::Arc { radius, angular_extent, .. } => println!(
                "arc      {:>3}..{:<3} radius {:.2}, {:.1} deg{}",
                s.start,
                s.end,
                radius,
                angular_extent.to_degrees(),
                if s.flagged { " (flagged)" } else { "" }
            ),
        }
    }
    println!("junctions {:?}", out.decomposition.junctions());
    Ok(())
}
