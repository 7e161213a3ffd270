use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{write_off, IngestError, TriMesh};
use crate::decompose::{Decomposition, SegmentKind};
use crate::geom::{Point3, Vec3};
use crate::track::Centerline;

/// Everything a pipeline run may persist.
#[derive(Debug, Clone, Default)]
pub struct ArtifactSet<'a> {
    pub centerline: Option<&'a Centerline>,
    /// File stem for the centerline files, defaults to `centerline`.
    pub centerline_name: Option<&'a str>,
    pub decomposition: Option<&'a Decomposition>,
    /// `(file stem, mesh, optional per-face scalar)`.
    pub meshes: Vec<(&'a str, &'a TriMesh, Option<&'a [f64]>)>,
}

/// Paths written by [`write_artifacts`], in write order.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ArtifactManifest {
    pub files: Vec<PathBuf>,
}

pub fn write_artifacts(set: &ArtifactSet<'_>, out_dir: &Path) -> Result<ArtifactManifest, IngestError> {
    std::fs::create_dir_all(out_dir).map_err(|e| IngestError::io(out_dir, e))?;
    let mut manifest = ArtifactManifest::default();
    if let Some(c) = set.centerline {
        let stem = set.centerline_name.unwrap_or("centerline");
        let obj = out_dir.join(format!("{stem}.obj"));
        write_centerline_obj(c, &obj)?;
        let csv = out_dir.join(format!("{stem}.csv"));
        write_centerline_csv(c, &csv)?;
        manifest.files.extend([obj, csv]);
    }
    if let Some(d) = set.decomposition {
        let p = out_dir.join("decomposition.csv");
        write_decomposition_csv(d, &p)?;
        manifest.files.push(p);
    }
    for (stem, mesh, scalars) in &set.meshes {
        let p = out_dir.join(format!("{stem}.off"));
        write_off(mesh, &p)?;
        manifest.files.push(p);
        if let Some(s) = scalars {
            let p = out_dir.join(format!("{stem}.csv"));
            write_face_scalars_csv(s, &p)?;
            manifest.files.push(p);
        }
    }
    Ok(manifest)
}

/// Centerline as an OBJ polyline: one `v` record per point and a single `l`
/// record through all of them.
pub fn write_centerline_obj(c: &Centerline, path: &Path) -> Result<(), IngestError> {
    if c.points.is_empty() {
        return Err(IngestError::EmptyCenterline);
    }
    let io = |e| IngestError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for p in &c.points {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z).map_err(io)?;
    }
    let idx: Vec<String> = (1..=c.points.len()).map(|i| i.to_string()).collect();
    writeln!(out, "l {}", idx.join(" ")).map_err(io)?;
    out.flush().map_err(io)
}

pub fn write_centerline_csv(c: &Centerline, path: &Path) -> Result<(), IngestError> {
    if c.points.is_empty() {
        return Err(IngestError::EmptyCenterline);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "x", "y", "z", "dx", "dy", "dz"])?;
    for (i, (p, d)) in c.points.iter().zip(&c.directions).enumerate() {
        w.write_record([
            i.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            d.x.to_string(),
            d.y.to_string(),
            d.z.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}

/// Reads a centerline written by [`write_centerline_csv`].
pub fn read_centerline_csv(path: &Path) -> Result<Centerline, IngestError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    let mut directions = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let f = |k: usize| -> Result<f64, IngestError> {
            rec.get(k)
                .ok_or_else(|| IngestError::parse(line, format!("missing column {k}")))?
                .trim()
                .parse()
                .map_err(|_| IngestError::parse(line, format!("column {k} is not a number")))
        };
        points.push(Point3::new(f(1)?, f(2)?, f(3)?));
        directions.push(Vec3::new(f(4)?, f(5)?, f(6)?));
    }
    if points.is_empty() {
        return Err(IngestError::EmptyCenterline);
    }
    Ok(Centerline::from_parts(points, directions))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_decomposition_csv(d: &Decomposition, path: &Path) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "startIdx", "endIdx", "kind", "cx", "cy", "cz", "radius", "ax", "ay", "az", "extent",
        "residual",
    ])?;
    for s in &d.segments {
        let (tag, c, radius, a, extent) = match &s.kind {
            SegmentKind::Straight { point, direction } => ("STRAIGHT", point, None, direction, None),
            SegmentKind::Arc {
                center,
                radius,
                axis,
                angular_extent,
            } => ("ARC", center, Some(*radius), axis, Some(*angular_extent)),
        };
        w.write_record([
            s.start.to_string(),
            s.end.to_string(),
            tag.to_string(),
            c.x.to_string(),
            c.y.to_string(),
            c.z.to_string(),
            fmt_opt(radius),
            a.x.to_string(),
            a.y.to_string(),
            a.z.to_string(),
            fmt_opt(extent),
            s.residual.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}

/// Sidecar CSV for a per-face scalar (`face,value`).
pub fn write_face_scalars_csv(values: &[f64], path: &Path) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["face", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}
