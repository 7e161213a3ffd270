//! Rebuilds a tube around a tracked centerline and scores it per face.
//!
//! Writes the rebuilt surface to `rebuilt.off` in the system temp dir and
//! prints the error histogram.

use std::f64::consts::PI;

use tubeaxis::ingest::write_off;
use tubeaxis::rebuild::{error_map, sweep_tube};
use tubeaxis::synth::{gen_tube, Piece};
use tubeaxis::{run_pipeline, PipelineConfig, PipelineInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = 4.0;
    let pieces = [
        Piece::Straight { length: 40.0 },
        Piece::Arc { radius: 20.0, angle: PI / 2.0, plane_turn: PI / 4.0 },
        Piece::Straight { length: 40.0 },
    ];
    let tube = gen_tube(&pieces, r, 0.8)?;
    let out = run_pipeline(&PipelineInput::Mesh(tube.mesh.clone()), &PipelineConfig::new(r))?;

    let rebuilt = sweep_tube(&out.refined.points, r, 32)?;
    let path = std::env::temp_dir().join("rebuilt.off");
    write_off(&rebuilt, &path)?;
    println!("wrote {} ({} faces)", path.display(), rebuilt.faces.len());

    let centers: Vec<_> = (0..tube.mesh.faces.len()).map(|f| tube.mesh.face_center(f)).collect();
    let em = error_map(&centers, &out.refined.points, r)?;
    let s = em.summary();
    println!(
        "squared error over {} covered faces: mean {:.2e}, max {:.2e}, RMS {:.2e}",
        s.covered.count, s.covered.mean, s.covered.max, s.covered.rms
    );

    let edges = [1e-4, 1e-3, 1e-2, 1e-1];
    let mut bins = [0usize; 5];
    for (v, _) in em.values.iter().zip(&em.covered).filter(|(_, c)| **c) {
        bins[edges.iter().filter(|e| v >= e).count()] += 1;
    }
    println!("  < 1e-4: {}", bins[0]);
    for (k, e) in edges.iter().enumerate() {
        println!("  >= {e:.0e}: {}", bins[k + 1]);
    }
    Ok(())
}
