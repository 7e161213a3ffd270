use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::IngestError;

/// Set of unit voxels on the integer lattice. Voxel `(i, j, k)` is the cube
/// `[i, i+1] × [j, j+1] × [k, k+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoxelSet {
    points: BTreeSet<[i64; 3]>,
}

impl VoxelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a voxel; returns false if it was already present.
    pub fn insert(&mut self, p: [i64; 3]) -> bool {
        self.points.insert(p)
    }

    pub fn contains(&self, p: &[i64; 3]) -> bool {
        self.points.contains(p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Voxels in lexicographic `(x, y, z)` order.
    pub fn iter(&self) -> impl Iterator<Item = &[i64; 3]> {
        self.points.iter()
    }
}

impl FromIterator<[i64; 3]> for VoxelSet {
    fn from_iter<T: IntoIterator<Item = [i64; 3]>>(iter: T) -> Self {
        Self {
            points: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VolumeLoad {
    pub voxels: VoxelSet,
    pub duplicates: usize,
}

/// Parses an ASCII `x y z` integer list, one voxel per line.
pub fn parse_volume(text: &str) -> Result<VolumeLoad, IngestError> {
    let mut voxels = VoxelSet::new();
    let mut duplicates = 0;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(IngestError::parse(i + 1, "expected three integers"));
        }
        let mut p = [0i64; 3];
        for (a, t) in toks.iter().enumerate() {
            p[a] = t
                .parse()
                .map_err(|_| IngestError::parse(i + 1, format!("non-integer token '{t}'")))?;
        }
        if !voxels.insert(p) {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("ignored {duplicates} duplicate voxels");
    }
    Ok(VolumeLoad { voxels, duplicates })
}

pub fn load_volume(path: &Path) -> Result<VolumeLoad, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_volume(&text)
}

pub fn write_volume(voxels: &VoxelSet, path: &Path) -> Result<(), IngestError> {
    let io = |e| IngestError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for p in voxels.iter() {
        writeln!(out, "{} {} {}", p[0], p[1], p[2]).map_err(io)?;
    }
    out.flush().map_err(io)
}
