use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{IngestError, TriMesh};
use crate::geom::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            _ => Err(IngestError::UnsupportedFormat(format!(
                "mesh extension '{ext}' (expected .off or .obj)"
            ))),
        }
    }
}

/// A loaded mesh together with load-time bookkeeping.
#[derive(Debug, Clone)]
pub struct MeshLoad {
    pub mesh: TriMesh,
    /// Faces removed because their area was `<= 1e-12`.
    pub dropped_degenerate: usize,
    /// Polygons with more than three corners that were fan-split.
    pub polygons_split: usize,
}

impl MeshLoad {
    fn finish(mut mesh: TriMesh, polygons_split: usize) -> Self {
        let dropped_degenerate = mesh.drop_degenerate();
        if dropped_degenerate > 0 {
            log::warn!("dropped {dropped_degenerate} degenerate faces");
        }
        log::info!(
            "loaded mesh: {} vertices, {} faces",
            mesh.vertices.len(),
            mesh.faces.len()
        );
        Self {
            mesh,
            dropped_degenerate,
            polygons_split,
        }
    }
}

pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<MeshLoad, IngestError> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

/// Fan triangulation `(0,1,2), (0,2,3), ...`.
fn fan(poly: &[usize], out: &mut Vec<[usize; 3]>) {
    for k in 1..poly.len() - 1 {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn number<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, IngestError> {
    tok.parse()
        .map_err(|_| IngestError::parse(line, format!("invalid {what} '{tok}'")))
}

pub fn parse_off(text: &str) -> Result<MeshLoad, IngestError> {
    // (line number, tokens) for every meaningful line
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
    });

    let (hline, mut header) = lines
        .next()
        .ok_or_else(|| IngestError::parse(1, "empty file"))?;
    if header[0] != "OFF" {
        return Err(IngestError::parse(hline, format!("expected 'OFF', found '{}'", header[0])));
    }
    header.remove(0);
    let (cline, counts) = if header.is_empty() {
        lines
            .next()
            .ok_or_else(|| IngestError::parse(hline + 1, "missing element counts"))?
    } else {
        (hline, header)
    };
    if counts.len() < 2 {
        return Err(IngestError::parse(cline, "expected vertex and face counts"));
    }
    let nv: usize = number(counts[0], cline, "vertex count")?;
    let nf: usize = number(counts[1], cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    let mut last_line = cline;
    for n in 0..nv {
        let (line, toks) = lines.next().ok_or_else(|| {
            IngestError::parse(last_line + 1, format!("expected {nv} vertices, found {n}"))
        })?;
        last_line = line;
        if toks.len() < 3 {
            return Err(IngestError::parse(line, "vertex needs three coordinates"));
        }
        let p = Point3::new(
            number(toks[0], line, "coordinate")?,
            number(toks[1], line, "coordinate")?,
            number(toks[2], line, "coordinate")?,
        );
        if !p.iter().all(|c| c.is_finite()) {
            return Err(IngestError::parse(line, "non-finite coordinate"));
        }
        vertices.push(p);
    }

    let mut faces = Vec::with_capacity(nf);
    let mut split = 0;
    for n in 0..nf {
        let (line, toks) = lines.next().ok_or_else(|| {
            IngestError::parse(last_line + 1, format!("expected {nf} faces, found {n}"))
        })?;
        last_line = line;
        let k: usize = number(toks[0], line, "polygon size")?;
        if k < 3 || toks.len() < k + 1 {
            return Err(IngestError::parse(line, format!("polygon of size {k} is malformed")));
        }
        let mut poly = Vec::with_capacity(k);
        for t in &toks[1..=k] {
            let idx: usize = number(t, line, "vertex index")?;
            if idx >= nv {
                return Err(IngestError::parse(line, format!("vertex index {idx} out of range")));
            }
            poly.push(idx);
        }
        if k > 3 {
            split += 1;
        }
        fan(&poly, &mut faces);
    }
    Ok(MeshLoad::finish(TriMesh::new(vertices, faces), split))
}

/// Parses the `v` / `f` subset of Wavefront OBJ. `l` and every other record
/// type are ignored.
pub fn parse_obj(text: &str) -> Result<MeshLoad, IngestError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut pending: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut split = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(IngestError::parse(line, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(
                    number(c[0], line, "coordinate")?,
                    number(c[1], line, "coordinate")?,
                    number(c[2], line, "coordinate")?,
                ));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in toks {
                    let head = t.split('/').next().unwrap_or("");
                    let idx: i64 = number(head, line, "vertex index")?;
                    if idx == 0 {
                        return Err(IngestError::parse(line, "OBJ indices are 1-based"));
                    }
                    // negative indices are relative to the vertices read so far
                    let resolved = if idx < 0 { vertices.len() as i64 + idx + 1 } else { idx };
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(IngestError::parse(line, "face needs at least three vertices"));
                }
                pending.push((line, poly));
            }
            _ => {}
        }
    }
    for (line, poly) in pending {
        let mut idx = Vec::with_capacity(poly.len());
        for p in poly {
            if p < 1 || p as usize > vertices.len() {
                return Err(IngestError::parse(line, format!("vertex index {p} out of range")));
            }
            idx.push(p as usize - 1);
        }
        if idx.len() > 3 {
            split += 1;
        }
        fan(&idx, &mut faces);
    }
    Ok(MeshLoad::finish(TriMesh::new(vertices, faces), split))
}

pub fn write_off(mesh: &TriMesh, path: &Path) -> Result<(), IngestError> {
    let io = |e| IngestError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "OFF").map_err(io)?;
    writeln!(out, "{} {} 0", mesh.vertices.len(), mesh.faces.len()).map_err(io)?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} {}", v.x, v.y, v.z).map_err(io)?;
    }
    for f in &mesh.faces {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2]).map_err(io)?;
    }
    out.flush().map_err(io)
}
