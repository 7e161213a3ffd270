//! Looks inside the vote image.
//!
//! Accumulates a cylinder along x and prints one cross section of votes as
//! text, plus the principal direction stored at the peak.

use tubeaxis::accumulate::{compute_accumulation, default_domain, AccumulationParams};
use tubeaxis::normals::face_normals;
use tubeaxis::synth::{gen_tube, Piece};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tube = gen_tube(&[Piece::Straight { length: 40.0 }], 5.0, 1.0)?;
    // generated faces point outward; the scans must go inward
    let faces = face_normals(&tube.mesh)?.flipped();
    let params = AccumulationParams::new(5.0, 1.0);
    let domain = default_domain(&faces, &params)?;
    let res = compute_accumulation(&faces, &params, &domain)?;
    println!("grid {:?}, {} scan steps, maxAcc {}", domain.dims, res.steps, res.max_acc);

    let i = domain.dims[0] / 2;
    for k in (0..domain.dims[2]).rev() {
        let row: String = (0..domain.dims[1])
            .map(|j| match res.acc.get([i, j, k]) {
                0 => ' ',
                v if v * 4 < res.max_acc => '.',
                v if v * 2 < res.max_acc => ':',
                v if v < res.max_acc => '+',
                _ => '#',
            })
            .collect();
        println!("|{row}|");
    }
    let d = res.dir.get(res.max_pt);
    let d = d / d.norm();
    println!("direction at the peak ({:+.3}, {:+.3}, {:+.3})", d.x, d.y, d.z);
    Ok(())
}
