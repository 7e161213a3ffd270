//! Input loading (meshes, voxel lists, height maps) and artifact writing.

mod artifacts;
mod heightmap;
mod mesh_io;
mod volume;

pub use artifacts::{
    read_centerline_csv, write_artifacts, write_centerline_csv, write_centerline_obj,
    write_decomposition_csv, write_face_scalars_csv, ArtifactManifest, ArtifactSet,
};
pub use heightmap::{height_map_to_mesh, load_pgm, HeightMap};
pub use mesh_io::{load_mesh, parse_obj, parse_off, write_off, MeshFormat, MeshLoad};
pub use volume::{load_volume, parse_volume, write_volume, VolumeLoad, VoxelSet};

use std::path::PathBuf;

use thiserror::Error;

use crate::geom::{Point3, Vec3};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("height map too small: {width}x{height} (need at least 2x2)")]
    TooSmall { width: usize, height: usize },
    #[error("centerline is empty")]
    EmptyCenterline,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("image decode: {0}")]
    Image(String),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        IngestError::Parse {
            line,
            reason: reason.into(),
        }
    }
}

/// Indexed triangle surface.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
    /// Optional unit per-face normals supplied by the source.
    pub face_normals: Option<Vec<Vec3>>,
}

/// Faces whose area is at or below this are dropped at load time.
pub const MIN_FACE_AREA: f64 = 1e-12;

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            faces,
            face_normals: None,
        }
    }

    pub fn corners(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn face_center(&self, face: usize) -> Point3 {
        let [a, b, c] = self.corners(face);
        (a + b + c) / 3.0
    }

    /// Longest edge of a face ("face size").
    pub fn face_size(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    /// Median of the per-face longest edge, the default accumulation gridstep.
    pub fn median_face_size(&self) -> Option<f64> {
        if self.faces.is_empty() {
            return None;
        }
        let mut sizes: Vec<f64> = (0..self.faces.len()).map(|f| self.face_size(f)).collect();
        sizes.sort_by(f64::total_cmp);
        let n = sizes.len();
        Some(if n % 2 == 1 {
            sizes[n / 2]
        } else {
            0.5 * (sizes[n / 2 - 1] + sizes[n / 2])
        })
    }

    /// Drops faces with area `<= MIN_FACE_AREA`; returns the number removed.
    pub fn drop_degenerate(&mut self) -> usize {
        let keep: Vec<bool> = (0..self.faces.len())
            .map(|f| self.face_area(f) > MIN_FACE_AREA)
            .collect();
        let removed = keep.iter().filter(|k| !**k).count();
        if removed > 0 {
            let mut it = keep.iter();
            self.faces.retain(|_| *it.next().unwrap());
            if let Some(normals) = self.face_normals.as_mut() {
                let mut it = keep.iter();
                normals.retain(|_| *it.next().unwrap());
            }
        }
        removed
    }

    /// Reverses the winding (and supplied normals) of every face.
    pub fn flip_orientation(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
        if let Some(normals) = self.face_normals.as_mut() {
            normals.iter_mut().for_each(|n| *n = -*n);
        }
    }

    pub fn translate(&mut self, offset: Vec3) {
        self.vertices.iter_mut().for_each(|v| *v += offset);
    }

    /// Keeps the faces for which `keep(face_index)` is true.
    pub fn retain_faces<F: FnMut(usize) -> bool>(&mut self, mut keep: F) {
        let mask: Vec<bool> = (0..self.faces.len()).map(&mut keep).collect();
        let mut it = mask.iter();
        self.faces.retain(|_| *it.next().unwrap());
        if let Some(normals) = self.face_normals.as_mut() {
            let mut it = mask.iter();
            normals.retain(|_| *it.next().unwrap());
        }
    }
}
