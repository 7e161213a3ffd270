use std::path::Path;

use super::{IngestError, TriMesh};
use crate::geom::Point3;

/// Regular grid of surface heights. Sample `(i, j)` sits at
/// `origin + (i·spacing, j·spacing)` with height `heights[i + width·j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub width: usize,
    pub height: usize,
    pub heights: Vec<f64>,
    pub spacing: f64,
    pub origin: [f64; 2],
}

impl HeightMap {
    pub fn new(width: usize, height: usize, heights: Vec<f64>, spacing: f64) -> Self {
        assert_eq!(heights.len(), width * height, "height array size mismatch");
        Self {
            width,
            height,
            heights,
            spacing,
            origin: [0.0, 0.0],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.heights[i + self.width * j]
    }
}

/// Triangulates the height field: each cell is split along the diagonal
/// `(i, j)` to `(i+1, j+1)`; faces are wound so that a flat map faces `+z`.
pub fn height_map_to_mesh(hm: &HeightMap) -> Result<TriMesh, IngestError> {
    if hm.width < 2 || hm.height < 2 {
        return Err(IngestError::TooSmall {
            width: hm.width,
            height: hm.height,
        });
    }
    let mut vertices = Vec::with_capacity(hm.width * hm.height);
    for j in 0..hm.height {
        for i in 0..hm.width {
            vertices.push(Point3::new(
                hm.origin[0] + i as f64 * hm.spacing,
                hm.origin[1] + j as f64 * hm.spacing,
                hm.at(i, j),
            ));
        }
    }
    let id = |i: usize, j: usize| i + hm.width * j;
    let mut faces = Vec::with_capacity(2 * (hm.width - 1) * (hm.height - 1));
    for j in 0..hm.height - 1 {
        for i in 0..hm.width - 1 {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Ok(TriMesh::new(vertices, faces))
}

/// Loads a P2/P5 PGM; height = gray value × `scale`, pixel spacing 1.
/// Row 0 of the image maps to `j = 0`.
pub fn load_pgm(path: &Path, scale: f64) -> Result<HeightMap, IngestError> {
    let img = image::ImageReader::open(path)
        .map_err(|e| IngestError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| IngestError::io(path, e))?
        .decode()
        .map_err(|e| IngestError::Image(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let heights = match img {
        image::DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 * scale).collect(),
        other => other
            .into_luma16()
            .pixels()
            .map(|p| p.0[0] as f64 * scale)
            .collect(),
    };
    Ok(HeightMap::new(w, h, heights, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normals::face_normals;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_two_by_two() {
        let hm = HeightMap::new(2, 2, vec![0.0; 4], 1.0);
        let mesh = height_map_to_mesh(&hm).unwrap();
        assert_eq!(mesh.faces.len(), 2);
        let f = face_normals(&mesh).unwrap();
        for n in &f.normals {
            assert_abs_diff_eq!(n.z.abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn three_by_three_face_count() {
        let hm = HeightMap::new(3, 3, vec![0.0; 9], 1.0);
        assert_eq!(height_map_to_mesh(&hm).unwrap().faces.len(), 8);
    }

    #[test]
    fn too_small() {
        let hm = HeightMap::new(1, 4, vec![0.0; 4], 1.0);
        assert!(matches!(height_map_to_mesh(&hm), Err(IngestError::TooSmall { .. })));
    }

    #[test]
    fn ramp_normals_match_plane() {
        let spacing = 0.7;
        let (w, h) = (4, 3);
        let heights = (0..w * h).map(|k| (k % w) as f64).collect();
        let mesh = height_map_to_mesh(&HeightMap::new(w, h, heights, spacing)).unwrap();
        let plane = Point3::new(-1.0, 0.0, spacing).normalize();
        for n in face_normals(&mesh).unwrap().normals {
            assert_abs_diff_eq!(n.dot(&plane).abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pgm_p2_and_p5() {
        let dir = tempfile::tempdir().unwrap();
        let p2 = dir.path().join("a.pgm");
        std::fs::write(&p2, "P2\n3 2\n255\n0 10 20\n30 40 255\n").unwrap();
        let hm = load_pgm(&p2, 0.5).unwrap();
        assert_eq!((hm.width, hm.height), (3, 2));
        assert_eq!(hm.at(1, 0), 5.0);
        assert_eq!(hm.at(2, 1), 127.5);

        let p5 = dir.path().join("b.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        std::fs::write(&p5, bytes).unwrap();
        let hm = load_pgm(&p5, 1.0).unwrap();
        assert_eq!(hm.heights, vec![1.0, 2.0, 3.0, 4.0]);
    }
}
