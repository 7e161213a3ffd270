//! Pulls a single off-axis point back onto the axis.
//!
//! Samples a ring of surface points of radius 3 around the z axis and
//! minimizes the squared deviation of their distances from the radius.

use tubeaxis::refine::{energy_and_gradient, optimize_point, RefineParams, SectionAssociation};
use tubeaxis::Point3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let radius = 3.0;
    let points: Vec<Point3> = (0..24)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 24.0;
            Point3::new(radius * t.cos(), radius * t.sin(), 0.2 * (k % 3) as f64 - 0.2)
        })
        .collect();
    let assoc = SectionAssociation { index: 0, weights: None, points };

    let start = Point3::new(0.9, -0.6, 0.0);
    let e0 = energy_and_gradient(&start, &assoc.points, radius, None)?;
    println!("start energy {:.4}, force ({:+.3}, {:+.3}, {:+.3})", e0.energy, e0.force.x, e0.force.y, e0.force.z);

    let mut params = RefineParams::new(radius, 1.1 * radius, radius);
    params.epsilon_o = 1e-12;
    let fit = optimize_point(start, &assoc, &params)?;
    println!(
        "after {} iterations: ({:+.5}, {:+.5}, {:+.5}), energy {:.2e}, converged {}",
        fit.iterations, fit.position.x, fit.position.y, fit.position.z, fit.energy, fit.converged
    );
    Ok(())
}
