//! Curvature from the tangent-space polygon.
//!
//! For a regular polygon inscribed in a circle of radius r the midpoint line
//! of the turning-angle graph has slope close to 1/r, and the error shrinks
//! by four each time the vertex count doubles.

use std::f64::consts::TAU;

use tubeaxis::decompose::{fit_circle_3d, midpoint_slope, tangent_space_transform};
use tubeaxis::Point3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = 10.0;
    let mut last_err = None;
    for n in [18, 36, 72, 144] {
        let pts: Vec<Point3> = (0..=n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                Point3::new(r * t.cos(), r * t.sin(), 0.0)
            })
            .collect();
        let tsp = tangent_space_transform(&pts)?;
        let slope = midpoint_slope(&tsp, 1..=tsp.edge_count() - 2);
        let err = (slope - 1.0 / r).abs();
        let ratio = last_err.map(|e: f64| e / err);
        last_err = Some(err);
        let fit = fit_circle_3d(&pts[..n / 2])?;
        println!(
            "N={n:<4} slope {slope:.6} (1/r = {:.6}) error {err:.2e}{}  circle fit r={:.6}",
            1.0 / r,
            ratio.map(|q| format!(" ratio {q:.2}")).unwrap_or_default(),
            fit.radius
        );
    }
    Ok(())
}
