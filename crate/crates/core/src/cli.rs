//! Command-line front end. Every stage is a subcommand; `pipeline` runs
//! them all.
//!
//! Exit codes: 0 success, 1 input error (bad flags, unreadable input,
//! missing radius), 2 pipeline failure (for example an empty accumulation).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::accumulate::AccumulationResult;
use crate::decompose::{decompose_centerline, Decomposition, SegmentKind};
use crate::geom::{Point3, Vec3};
use crate::ingest::{
    load_mesh, load_pgm, load_volume, read_centerline_csv, write_centerline_csv, write_centerline_obj, write_decomposition_csv,
    write_face_scalars_csv, write_off, write_volume, TriMesh,
};
use crate::normals::OrientMode;
use crate::pipeline::{accumulate, prepare_faces, NormalSource, PipelineConfig, PipelineError, PipelineInput, PreparedFaces, Timings};
use crate::rebuild::{error_map, sweep_tube, ErrorMap};
use crate::refine::{optimize_centerline, RefineReport};
use crate::synth::{degrade, gen_tube, render_heightmap, voxelize, Degradation, Piece, SynthTube, ViewAxis};
use crate::track::{extract_centerline, Centerline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputType {
    Mesh,
    Voxels,
    Heightmap,
    Auto,
}

/// `auto` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gridstep {
    Auto,
    Value(f64),
}

impl FromStr for Gridstep {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Gridstep::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Gridstep::Value(v)),
            _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tubeaxis", version, about = "Tube centerline extraction and straight/toric decomposition")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Input surface: OFF/OBJ mesh, voxel list (.vox/.txt) or PGM height map.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = InputType::Auto)]
    pub input_type: InputType,
    /// Tube radius R in world units.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Accumulation voxel size, or `auto` (median face size / lattice spacing).
    #[arg(long, global = true, default_value = "auto")]
    pub gridstep: Gridstep,
    #[arg(long, global = true, value_enum, default_value_t = NormalSource::Faces)]
    pub normals: NormalSource,
    #[arg(long, global = true, value_enum, default_value_t = OrientMode::Auto)]
    pub orient: OrientMode,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the run summary (default: OUT_DIR/summary.json).
    #[arg(long, global = true)]
    pub json_summary: Option<PathBuf>,
    /// Worker threads; 1 runs every stage sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Lattice spacing of voxel and height-map inputs.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub spacing: f64,
    /// World height per gray level of PGM height maps.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub height_scale: f64,
    /// Existing centerline CSV for the refine, decompose, reconstruct and error-map stages.
    #[arg(long, global = true)]
    pub centerline: Option<PathBuf>,
    /// Normal estimation neighborhood (default R/2).
    #[arg(long, global = true)]
    pub normal_radius: Option<f64>,
    /// Scan slack ε beyond R (default 0.1·R).
    #[arg(long, global = true)]
    pub epsilon_acc: Option<f64>,
    /// Tracking step (default R).
    #[arg(long, global = true)]
    pub track_step: Option<f64>,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub inside_threshold: f64,
    /// Largest step angle to the local direction, radians.
    #[arg(long, global = true, default_value_t = std::f64::consts::FRAC_PI_3)]
    pub max_angle: f64,
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub epsilon_o: f64,
    #[arg(long, global = true, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, global = true)]
    pub area_weighting: bool,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha_flat: f64,
    #[arg(long, global = true, default_value_t = 0.15)]
    pub nu: f64,
    #[arg(long, global = true, default_value_t = 3)]
    pub min_len: usize,
    /// Ring resolution of reconstructed tubes.
    #[arg(long, global = true, default_value_t = 24)]
    pub sides: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Accumulation and direction images.
    Accumulate,
    /// Raw tracked centerline.
    Centerline,
    /// Least-squares re-centered centerline.
    Refine,
    /// Straight / arc segment table.
    Decompose,
    /// Tube mesh swept along the centerline.
    Reconstruct,
    /// Per-face squared distance error of the input against the centerline tube.
    ErrorMap,
    /// Synthetic tube with ground truth.
    Synth(SynthArgs),
    /// All stages.
    Pipeline,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Comma-separated pieces: `straight:L`, `arc:r:angleDeg[:planeTurnDeg]`.
    #[arg(long)]
    pub pieces: String,
    /// Ring and vertex spacing (default gridstep, or 1).
    #[arg(long)]
    pub mesh_step: Option<f64>,
    /// Degradations in order: `noise:sigma`, `partial:x,y,z`, `holes:count:radius`,
    /// `sector:loDeg:hiDeg`.
    #[arg(long)]
    pub degrade: Vec<String>,
    /// Close the tube ends.
    #[arg(long)]
    pub capped: bool,
    /// Also write the interior voxels at this gridstep (requires a closed tube).
    #[arg(long)]
    pub voxelize: Option<f64>,
    /// Also write a 16-bit PGM height map with this pixel spacing.
    #[arg(long)]
    pub heightmap: Option<f64>,
    #[arg(long, value_enum, default_value_t = ViewAxis::PosZ)]
    pub view: ViewAxis,
}

/// A CLI failure and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(m: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: m.to_string(),
        }
    }
    fn stage(m: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: m.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_input_error() {
            Failure::input(e)
        } else {
            Failure::stage(e)
        }
    }
}

fn io_fail(e: impl std::fmt::Display) -> Failure {
    Failure::input(e)
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.global.threads.max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn detect_type(path: &Path, given: InputType) -> Result<InputType, Failure> {
    if given != InputType::Auto {
        return Ok(given);
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "off" | "obj" => Ok(InputType::Mesh),
        "vox" | "txt" | "xyz" => Ok(InputType::Voxels),
        "pgm" | "pnm" => Ok(InputType::Heightmap),
        _ => Err(Failure::input(format!(
            "cannot infer the input type of {}; pass --input-type",
            path.display()
        ))),
    }
}

/// Run state shared by the subcommands.
struct Session<'a> {
    g: &'a GlobalArgs,
    summary: Map<String, Value>,
    timings: Timings,
    outputs: Vec<PathBuf>,
}

impl<'a> Session<'a> {
    fn new(g: &'a GlobalArgs, command: &str) -> Self {
        let mut summary = Map::new();
        summary.insert("command".into(), json!(command));
        Self {
            g,
            summary,
            timings: Timings::default(),
            outputs: Vec::new(),
        }
    }

    fn radius(&self) -> Result<f64, Failure> {
        match self.g.radius {
            Some(r) if r > 0.0 && r.is_finite() => Ok(r),
            Some(r) => Err(Failure::input(format!("--radius must be positive, got {r}"))),
            None => Err(Failure::input("--radius is required for this input\n\nUsage: tubeaxis --input <PATH> --radius <R> <COMMAND>")),
        }
    }

    fn config(&self) -> Result<PipelineConfig, Failure> {
        let g = self.g;
        let mut c = PipelineConfig::new(self.radius()?);
        c.gridstep = match g.gridstep {
            Gridstep::Auto => None,
            Gridstep::Value(v) => Some(v),
        };
        c.normals = g.normals;
        c.orient = g.orient;
        c.normal_radius = g.normal_radius;
        c.epsilon_acc = g.epsilon_acc;
        c.track_step = g.track_step;
        c.inside_threshold = g.inside_threshold;
        c.max_angle = g.max_angle;
        c.epsilon_o = g.epsilon_o;
        c.max_iter = g.max_iter;
        c.area_weighting = g.area_weighting;
        c.alpha_flat = g.alpha_flat;
        c.nu = g.nu;
        c.min_len = g.min_len;
        c.sides = g.sides;
        Ok(c)
    }

    fn load_input(&mut self) -> Result<PipelineInput, Failure> {
        let g = self.g;
        let path = g.input.as_ref().ok_or_else(|| Failure::input("--input is required"))?;
        let kind = detect_type(path, g.input_type)?;
        let input = self.timings.time("load", || -> Result<PipelineInput, Failure> {
            Ok(match kind {
                InputType::Mesh => {
                    let load = load_mesh(path, None).map_err(io_fail)?;
                    if load.dropped_degenerate > 0 {
                        log::warn!("dropped {} degenerate faces", load.dropped_degenerate);
                    }
                    PipelineInput::Mesh(load.mesh)
                }
                InputType::Voxels => {
                    let load = load_volume(path).map_err(io_fail)?;
                    if load.duplicates > 0 {
                        log::warn!("ignored {} duplicate voxels", load.duplicates);
                    }
                    PipelineInput::Voxels {
                        voxels: load.voxels,
                        voxel_size: g.spacing,
                    }
                }
                InputType::Heightmap => {
                    let mut hm = load_pgm(path, g.height_scale).map_err(io_fail)?;
                    hm.spacing = g.spacing;
                    PipelineInput::HeightMap(hm)
                }
                InputType::Auto => unreachable!(),
            })
        })?;
        self.summary.insert(
            "input".into(),
            json!({ "path": path.display().to_string(), "type": input.kind() }),
        );
        Ok(input)
    }

    fn prepare(&mut self) -> Result<(PipelineConfig, PreparedFaces), Failure> {
        let input = self.load_input()?;
        let cfg = self.config()?;
        let prepared = self.timings.time("normals", || prepare_faces(&input, &cfg))?;
        let mut counts = json!({ "faces": prepared.faces.len() });
        if let Some(v) = prepared.voxel_count {
            counts["voxels"] = json!(v);
        }
        self.summary.insert("counts".into(), counts);
        let mut params = serde_json::to_value(&cfg).unwrap_or(Value::Null);
        params["gridstep"] = json!(prepared.gridstep);
        params["seed"] = json!(self.g.seed);
        params["threads"] = json!(self.g.threads);
        params["normals_flipped"] = json!(prepared.flipped);
        self.summary.insert("parameters".into(), params);
        Ok((cfg, prepared))
    }

    fn accumulate(&mut self, cfg: &PipelineConfig, prepared: &PreparedFaces) -> Result<(f64, AccumulationResult), Failure> {
        let (params, res) = self.timings.time("accumulate", || accumulate(prepared, cfg))?;
        let d = res.acc.domain;
        self.summary.insert(
            "accumulation".into(),
            json!({
                "acc_radius": params.acc_radius(),
                "max_acc": res.max_acc,
                "max_pt": res.max_pt,
                "max_pt_world": vec3(&d.voxel_center(res.max_pt)),
                "steps": res.steps,
                "dims": d.dims,
                "origin": d.origin,
            }),
        );
        Ok((params.acc_radius(), res))
    }

    fn track(&mut self, cfg: &PipelineConfig, acc_radius: f64, res: &AccumulationResult) -> Result<Centerline, Failure> {
        let tp = cfg.track_params(acc_radius);
        let c = self
            .timings
            .time("centerline", || extract_centerline(res, &tp))
            .map_err(|e| Failure::from(PipelineError::from(e)))?;
        self.summary.insert(
            "centerline".into(),
            json!({ "points": c.len(), "length": c.length(), "closed": c.closed, "track_step": tp.track_step }),
        );
        Ok(c)
    }

    fn refine(
        &mut self,
        cfg: &PipelineConfig,
        prepared: &PreparedFaces,
        acc_radius: f64,
        raw: &Centerline,
    ) -> Result<(Centerline, RefineReport), Failure> {
        let tp = cfg.track_params(acc_radius);
        let rp = cfg.refine_params(acc_radius, tp.track_step);
        let (c, report) = self
            .timings
            .time("refine", || optimize_centerline(raw, &prepared.faces, &rp))
            .map_err(|e| Failure::from(PipelineError::from(e)))?;
        let shift: Vec<f64> = raw.points.iter().zip(&c.points).map(|(a, b)| (a - b).norm()).collect();
        self.summary.insert(
            "refine".into(),
            json!({
                "points": c.len(),
                "refined": report.refined_count(),
                "too_few_points": c.len() - report.refined_count(),
                "mean_shift": shift.iter().sum::<f64>() / shift.len().max(1) as f64,
            }),
        );
        Ok((c, report))
    }

    /// Centerline from `--centerline`, or the refined centerline of the input.
    fn refined_centerline(&mut self) -> Result<(Centerline, Option<(PipelineConfig, PreparedFaces)>), Failure> {
        if let Some(p) = &self.g.centerline {
            let c = read_centerline_csv(p).map_err(io_fail)?;
            if c.len() < 2 {
                return Err(Failure::input("centerline needs at least 2 points"));
            }
            self.summary.insert("centerline_input".into(), json!(p.display().to_string()));
            let ctx = if self.g.input.is_some() { Some(self.prepare()?) } else { None };
            return Ok((c, ctx));
        }
        let (cfg, prepared) = self.prepare()?;
        let (acc_radius, res) = self.accumulate(&cfg, &prepared)?;
        let raw = self.track(&cfg, acc_radius, &res)?;
        let (c, _) = self.refine(&cfg, &prepared, acc_radius, &raw)?;
        Ok((c, Some((cfg, prepared))))
    }

    fn gridstep_for_decompose(&self, ctx: &Option<(PipelineConfig, PreparedFaces)>) -> Result<f64, Failure> {
        match (self.g.gridstep, ctx) {
            (Gridstep::Value(v), _) => Ok(v),
            (Gridstep::Auto, Some((_, p))) => Ok(p.gridstep),
            (Gridstep::Auto, None) => Err(Failure::input("decomposing a centerline file needs --gridstep or --input")),
        }
    }

    fn decompose(&mut self, points: &[Point3], gridstep: f64) -> Result<Decomposition, Failure> {
        let mut dp = crate::decompose::DecomposeParams::new(gridstep);
        dp.alpha_flat = self.g.alpha_flat;
        dp.nu = self.g.nu;
        dp.min_len = self.g.min_len;
        let d = self
            .timings
            .time("decompose", || decompose_centerline(points, &dp))
            .map_err(|e| Failure::from(PipelineError::from(e)))?;
        self.summary.insert("decomposition".into(), decomposition_json(&d));
        Ok(d)
    }

    fn error_map(&mut self, faces: &[Point3], centerline: &[Point3], radius: f64) -> Result<ErrorMap, Failure> {
        let em = self
            .timings
            .time("error_map", || error_map(faces, centerline, radius))
            .map_err(|e| Failure::from(PipelineError::from(e)))?;
        self.summary.insert("error_map".into(), serde_json::to_value(em.summary()).unwrap_or(Value::Null));
        Ok(em)
    }

    fn out(&mut self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.g.out_dir)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", self.g.out_dir.display())))?;
        let p = self.g.out_dir.join(name);
        self.outputs.push(PathBuf::from(name));
        Ok(p)
    }

    fn write_centerline(&mut self, c: &Centerline, stem: &str) -> Result<(), Failure> {
        let obj = self.out(&format!("{stem}.obj"))?;
        write_centerline_obj(c, &obj).map_err(io_fail)?;
        let csv = self.out(&format!("{stem}.csv"))?;
        write_centerline_csv(c, &csv).map_err(io_fail)
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.summary.insert(
            "outputs".into(),
            json!(self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
        );
        let timings: Map<String, Value> = self.timings.0.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        self.summary.insert("timings".into(), Value::Object(timings));
        let path = match &self.g.json_summary {
            Some(p) => p.clone(),
            None => {
                std::fs::create_dir_all(&self.g.out_dir).map_err(io_fail)?;
                self.g.out_dir.join("summary.json")
            }
        };
        let text = serde_json::to_string_pretty(&Value::Object(self.summary)).map_err(io_fail)?;
        std::fs::write(&path, text + "\n").map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }
}

fn vec3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn decomposition_json(d: &Decomposition) -> Value {
    let segs: Vec<Value> = d
        .segments
        .iter()
        .map(|s| match s.kind {
            SegmentKind::Straight { point, direction } => json!({
                "start": s.start, "end": s.end, "kind": "straight",
                "point": vec3(&point), "direction": vec3(&direction),
                "residual": s.residual, "flagged": s.flagged,
            }),
            SegmentKind::Arc {
                center,
                radius,
                axis,
                angular_extent,
            } => json!({
                "start": s.start, "end": s.end, "kind": "arc",
                "center": vec3(&center), "radius": radius, "axis": vec3(&axis),
                "angular_extent": angular_extent,
                "residual": s.residual, "flagged": s.flagged,
            }),
        })
        .collect();
    json!({ "segments": segs })
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Accumulate => {
            let mut s = Session::new(g, "accumulate");
            let (cfg, prepared) = s.prepare()?;
            let (_, res) = s.accumulate(&cfg, &prepared)?;
            let (h, p) = (s.out("accumulation.json")?, s.out("accumulation.raw")?);
            res.acc.write(&h, &p).map_err(io_fail)?;
            let (h, p) = (s.out("directions.json")?, s.out("directions.raw")?);
            res.dir.write(&h, &p).map_err(io_fail)?;
            s.finish()
        }
        Command::Centerline => {
            let mut s = Session::new(g, "centerline");
            let (cfg, prepared) = s.prepare()?;
            let (acc_radius, res) = s.accumulate(&cfg, &prepared)?;
            let c = s.track(&cfg, acc_radius, &res)?;
            s.write_centerline(&c, "centerline_raw")?;
            s.finish()
        }
        Command::Refine => {
            let mut s = Session::new(g, "refine");
            let (cfg, prepared) = s.prepare()?;
            let (acc_radius, res) = s.accumulate(&cfg, &prepared)?;
            let raw = match &g.centerline {
                Some(p) => read_centerline_csv(p).map_err(io_fail)?,
                None => s.track(&cfg, acc_radius, &res)?,
            };
            let (c, _) = s.refine(&cfg, &prepared, acc_radius, &raw)?;
            s.write_centerline(&c, "centerline")?;
            s.finish()
        }
        Command::Decompose => {
            let mut s = Session::new(g, "decompose");
            let (c, ctx) = s.refined_centerline()?;
            let h = s.gridstep_for_decompose(&ctx)?;
            let d = s.decompose(&c.points, h)?;
            let p = s.out("decomposition.csv")?;
            write_decomposition_csv(&d, &p).map_err(io_fail)?;
            s.finish()
        }
        Command::Reconstruct => {
            let mut s = Session::new(g, "reconstruct");
            let r = s.radius()?;
            let (c, _) = s.refined_centerline()?;
            let mesh = s
                .timings
                .time("reconstruct", || sweep_tube(&c.points, r, g.sides))
                .map_err(|e| Failure::from(PipelineError::from(e)))?;
            let p = s.out("reconstruction.off")?;
            write_off(&mesh, &p).map_err(io_fail)?;
            s.finish()
        }
        Command::ErrorMap => {
            let mut s = Session::new(g, "error-map");
            let r = s.radius()?;
            if g.input.is_none() {
                return Err(Failure::input("error-map needs --input"));
            }
            let (c, ctx) = s.refined_centerline()?;
            let (_, prepared) = ctx.expect("input given");
            let em = s.error_map(&prepared.faces.centers, &c.points, r)?;
            let p = s.out("error_map.csv")?;
            write_face_scalars_csv(&em.values, &p).map_err(io_fail)?;
            s.finish()
        }
        Command::Pipeline => {
            let mut s = Session::new(g, "pipeline");
            let (cfg, prepared) = s.prepare()?;
            let (acc_radius, res) = s.accumulate(&cfg, &prepared)?;
            let raw = s.track(&cfg, acc_radius, &res)?;
            let (c, _) = s.refine(&cfg, &prepared, acc_radius, &raw)?;
            let d = s.decompose(&c.points, prepared.gridstep)?;
            let mesh = s
                .timings
                .time("reconstruct", || sweep_tube(&c.points, cfg.radius, cfg.sides))
                .map_err(|e| Failure::from(PipelineError::from(e)))?;
            let em = s.error_map(&prepared.faces.centers, &c.points, cfg.radius)?;
            s.write_centerline(&raw, "centerline_raw")?;
            s.write_centerline(&c, "centerline")?;
            let p = s.out("decomposition.csv")?;
            write_decomposition_csv(&d, &p).map_err(io_fail)?;
            let p = s.out("reconstruction.off")?;
            write_off(&mesh, &p).map_err(io_fail)?;
            let p = s.out("error_map.csv")?;
            write_face_scalars_csv(&em.values, &p).map_err(io_fail)?;
            s.finish()
        }
        Command::Synth(a) => synth(g, a),
    }
}

/// Parses the `--pieces` mini-language.
pub fn parse_pieces(s: &str) -> Result<Vec<Piece>, String> {
    s.split(',')
        .map(|tok| {
            let parts: Vec<&str> = tok.trim().split(':').collect();
            let num = |i: usize| -> Result<f64, String> {
                parts
                    .get(i)
                    .ok_or_else(|| format!("piece '{tok}' is missing a value"))?
                    .parse::<f64>()
                    .map_err(|e| format!("piece '{tok}': {e}"))
            };
            match parts[0] {
                "straight" | "s" if parts.len() == 2 => Ok(Piece::Straight { length: num(1)? }),
                "arc" | "a" if parts.len() == 3 || parts.len() == 4 => Ok(Piece::Arc {
                    radius: num(1)?,
                    angle: num(2)?.to_radians(),
                    plane_turn: if parts.len() == 4 { num(3)?.to_radians() } else { 0.0 },
                }),
                _ => Err(format!("cannot parse piece '{tok}'")),
            }
        })
        .collect()
}

/// Parses one `--degrade` entry.
pub fn parse_degradation(s: &str, tube: &SynthTube) -> Result<Degradation, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("degradation '{s}': {e}"));
    match (parts[0], parts.len()) {
        ("noise", 2) => Ok(Degradation::Noise { sigma: num(parts[1])? }),
        ("partial", 2) => {
            let v: Vec<f64> = parts[1].split(',').map(num).collect::<Result<_, _>>()?;
            if v.len() != 3 {
                return Err(format!("degradation '{s}': view direction needs 3 components"));
            }
            Ok(Degradation::PartialScan {
                view_dir: Vec3::new(v[0], v[1], v[2]),
            })
        }
        ("holes", 3) => Ok(Degradation::Holes {
            count: parts[1].parse().map_err(|e| format!("degradation '{s}': {e}"))?,
            radius: num(parts[2])?,
        }),
        ("sector", 3) => Ok(Degradation::SectorRemoval {
            axis: tube.truth.points.clone(),
            lo: num(parts[1])?.to_radians(),
            hi: num(parts[2])?.to_radians(),
        }),
        _ => Err(format!("cannot parse degradation '{s}'")),
    }
}

fn synth(g: &GlobalArgs, a: &SynthArgs) -> Result<(), Failure> {
    let mut s = Session::new(g, "synth");
    let r = s.radius()?;
    let pieces = parse_pieces(&a.pieces).map_err(Failure::input)?;
    let step = a.mesh_step.unwrap_or(match g.gridstep {
        Gridstep::Value(v) => v,
        Gridstep::Auto => 1.0,
    });
    let tube = s
        .timings
        .time("generate", || gen_tube(&pieces, r, step))
        .map_err(Failure::input)?;
    let mut mesh: TriMesh = if a.capped { tube.capped() } else { tube.mesh.clone() };
    for (k, d) in a.degrade.iter().enumerate() {
        let mode = parse_degradation(d, &tube).map_err(Failure::input)?;
        mesh = degrade(&mesh, &mode, g.seed.wrapping_add(k as u64));
    }
    let p = s.out("tube.off")?;
    write_off(&mesh, &p).map_err(io_fail)?;
    let p = s.out("truth.csv")?;
    write_truth_csv(&tube, &p).map_err(io_fail)?;
    let mut info = json!({
        "pieces": pieces,
        "radius": r,
        "mesh_step": step,
        "faces": mesh.faces.len(),
        "vertices": mesh.vertices.len(),
        "junctions": tube.truth.junctions,
    });
    if let Some(h) = a.voxelize {
        let vox = s
            .timings
            .time("voxelize", || voxelize(&mesh, h))
            .map_err(Failure::stage)?;
        let p = s.out("volume.vox")?;
        write_volume(&vox, &p).map_err(io_fail)?;
        info["voxels"] = json!(vox.len());
        info["voxel_size"] = json!(h);
    }
    if let Some(res) = a.heightmap {
        let hm = s
            .timings
            .time("heightmap", || render_heightmap(&mesh, a.view, res))
            .map_err(Failure::stage)?;
        let min = hm.heights.iter().copied().fold(f64::INFINITY, f64::min);
        let gray: Vec<u16> = hm
            .heights
            .iter()
            .map(|h| ((h - min) / g.height_scale).round().clamp(0.0, u16::MAX as f64) as u16)
            .collect();
        // binary PGM, 16-bit big-endian samples
        let mut bytes = format!("P5\n{} {}\n65535\n", hm.width, hm.height).into_bytes();
        bytes.extend(gray.iter().flat_map(|v| v.to_be_bytes()));
        let p = s.out("heightmap.pgm")?;
        std::fs::write(&p, bytes).map_err(io_fail)?;
        info["heightmap"] = json!({
            "width": hm.width, "height": hm.height, "spacing": hm.spacing,
            "origin": hm.origin, "min_height": min, "height_scale": g.height_scale,
            "view": a.view,
        });
    }
    s.summary.insert("synth".into(), info);
    s.finish()
}

fn write_truth_csv(tube: &SynthTube, path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "x", "y", "z", "kind", "junction"])?;
    for (i, p) in tube.truth.points.iter().enumerate() {
        let kind = match tube.truth.kinds[i] {
            crate::decompose::SegmentLabel::Straight => "STRAIGHT",
            crate::decompose::SegmentLabel::Arc => "ARC",
        };
        let j = tube.truth.junctions.contains(&i) as u8;
        w.write_record([i.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string(), kind.into(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
