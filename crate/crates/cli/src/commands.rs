use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dtofkit::io;
use dtofkit::metrics::{abs_error_map, evaluate, EdgeWeightParams, DEFAULT_KAPPA};
use dtofkit::projection::project_dtof_frame;
use dtofkit::refine::{
    fit_scale_shift, refine, AffinityField, AggregationWeights, FitOptions, WeightSet,
    DEFAULT_ITERATIONS,
};
use dtofkit::simulation::{preprocess_hypersim, simulate_dtof, SimConfig, SimSeed, SimStats};
use dtofkit::{DepthMap, Field};

use crate::error::{CliError, CliResult};
use crate::manifest::{sibling, FileDigest, RunManifest};

/// Environment variable naming a directory of `<profile>.json` files that
/// take precedence over the built-in profiles.
pub const PROFILE_DIR_ENV: &str = "DTOFKIT_PROFILE_DIR";

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate a sparse dToF frame from dense ground truth.
    Simulate(SimulateArgs),
    /// Project a real dToF frame into the RGB image plane.
    Project(ProjectArgs),
    /// Score a dense prediction against ground truth.
    Evaluate(EvaluateArgs),
    /// Refine a dense depth map with multi-kernel affinity propagation.
    Refine(RefineArgs),
    /// Align monocular inverse depth to sparse metric depth.
    Fit(FitArgs),
    /// Re-run a command from its manifest and check the outputs match.
    Replay(ReplayArgs),
    /// List simulation profiles, or print one as JSON.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Ground-truth depth (.png in mm or .pfm in m), or a directory of them.
    #[arg(long)]
    pub gt: PathBuf,
    /// RGB image, or a directory with one image per GT stem.
    #[arg(long)]
    pub rgb: Option<PathBuf>,
    /// Non-Lambertian probability map (.pfm or grayscale image), or a directory.
    #[arg(long)]
    pub materials: Option<PathBuf>,
    /// Simulator configuration JSON.
    #[arg(long, conflicts_with = "profile")]
    pub config: Option<PathBuf>,
    /// Named profile (built-in: zju-l5, phone).
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frame index for a single-file run; batch runs derive it from the file stem.
    #[arg(long, default_value_t = 0)]
    pub frame: u64,
    /// Sparse output (.png or .csv), or an output directory in batch mode.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for batch mode.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Halve scenes whose depth is mostly beyond 6 m before simulating.
    #[arg(long)]
    pub hypersim: bool,
    /// Sparse file format in batch mode.
    #[arg(long, default_value = "png", value_parser = ["png", "csv"])]
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    /// dToF frame CSV with header `row,col,depth_m`.
    #[arg(long)]
    pub dtof: PathBuf,
    /// Camera rig JSON.
    #[arg(long)]
    pub rig: PathBuf,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    /// Grid rows, when the CSV does not reach the last row.
    #[arg(long, requires = "grid_cols")]
    pub grid_rows: Option<usize>,
    #[arg(long, requires = "grid_rows")]
    pub grid_cols: Option<usize>,
    /// Sparse output (.png or .csv).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Ignore GT deeper than this many meters.
    #[arg(long)]
    pub max_depth: Option<f64>,
    /// Edge-weight temperature.
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    pub kappa: f64,
    /// Multiply the weighted error by 1/|P| on top of the weight normalization.
    #[arg(long)]
    pub literal_prefactor: bool,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Absolute error as a 16-bit millimeter PNG.
    #[arg(long)]
    pub error_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RefineArgs {
    /// Initial dense depth (.pfm or .png).
    #[arg(long)]
    pub depth: PathBuf,
    /// Raw affinity volume (.bin with .bin.json sidecar); repeat per kernel.
    #[arg(long = "affinity", required = true)]
    pub affinities: Vec<PathBuf>,
    /// Aggregation weights JSON with `tau` and `sigma`.
    #[arg(long)]
    pub agg: PathBuf,
    /// Propagation steps per kernel (even).
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iters: usize,
    /// Refined depth (.pfm or .png).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Monocular inverse depth (.pfm).
    #[arg(long)]
    pub dinv: PathBuf,
    /// Sparse metric depth (.png or .csv).
    #[arg(long)]
    pub sparse: PathBuf,
    /// Aligned metric depth (.pfm or .png).
    #[arg(long)]
    pub out: PathBuf,
    /// Refit once after dropping residuals beyond 2 MAD.
    #[arg(long)]
    pub robust: bool,
    #[arg(long, default_value_t = FitOptions::default().inverse_floor)]
    pub inverse_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    pub name: Option<String>,
}

/// Files touched by one command plus what a manifest needs beyond the args.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub config: Option<SimConfig>,
    pub manifest_path: Option<PathBuf>,
}

/// Runs a command and, for commands that produce files, writes its manifest.
pub fn run(cmd: &Command) -> CliResult<()> {
    let start = Instant::now();
    let record = match cmd {
        Command::Replay(a) => return replay(&a.manifest),
        Command::Profile(a) => return print_profile(a.name.as_deref()),
        _ => execute(cmd, None)?,
    };
    let Some(manifest_path) = record.manifest_path.clone() else {
        return Ok(());
    };
    let digests = |paths: &[PathBuf]| -> CliResult<Vec<FileDigest>> {
        paths.iter().map(|p| FileDigest::of(p)).collect()
    };
    RunManifest {
        schema_version: dtofkit::SCHEMA_VERSION,
        command: cmd.clone(),
        seed: record.seed,
        config: record.config,
        inputs: digests(&record.inputs)?,
        outputs: digests(&record.outputs)?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
    .write(&manifest_path)
}

/// Runs a file-producing command. `config` overrides profile lookup.
pub fn execute(cmd: &Command, config: Option<&SimConfig>) -> CliResult<RunRecord> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a, config),
        Command::Project(a) => cmd_project(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Replay(_) | Command::Profile(_) => Err(CliError::Usage(
            "command cannot be nested in a manifest".into(),
        )),
    }
}

/// Re-runs the manifest's command and compares output digests.
pub fn replay(manifest_path: &Path) -> CliResult<()> {
    let manifest = RunManifest::read(manifest_path)?;
    for input in &manifest.inputs {
        let now = FileDigest::of(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Validation(format!(
                "input {} changed since the recorded run",
                input.path.display()
            )));
        }
    }
    execute(&manifest.command, manifest.config.as_ref())?;
    let mismatched: Vec<String> = manifest
        .outputs
        .iter()
        .map(|o| Ok((o, FileDigest::of(&o.path)?)))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .filter(|(old, new)| old.sha256 != new.sha256)
        .map(|(old, _)| old.path.display().to_string())
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::Validation(format!(
            "replay did not reproduce: {}",
            mismatched.join(", ")
        )));
    }
    println!("reproduced {} output file(s)", manifest.outputs.len());
    Ok(())
}

/// Looks a profile up in the user profile directory first, then built-ins.
pub fn resolve_profile(name: &str) -> CliResult<SimConfig> {
    if let Ok(dir) = std::env::var(PROFILE_DIR_ENV) {
        let path = Path::new(&dir).join(format!("{name}.json"));
        if path.is_file() {
            return load_config(&path);
        }
    }
    SimConfig::profile(name).ok_or_else(|| {
        CliError::Validation(format!(
            "unknown profile {name:?} (built-in: {})",
            SimConfig::builtin_profile_names().join(", ")
        ))
    })
}

fn load_config(path: &Path) -> CliResult<SimConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    SimConfig::from_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn print_profile(name: Option<&str>) -> CliResult<()> {
    match name {
        Some(n) => println!("{}", resolve_profile(n)?.to_json()),
        None => {
            for n in SimConfig::builtin_profile_names() {
                println!("{n}");
            }
            if let Ok(dir) = std::env::var(PROFILE_DIR_ENV) {
                let mut user: Vec<String> = fs::read_dir(&dir)?
                    .filter_map(|e| e.ok())
                    .map(|e| e.path())
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .filter_map(|p| p.file_stem()?.to_str().map(String::from))
                    .collect();
                user.sort();
                for n in user {
                    println!("{n} ({dir})");
                }
            }
        }
    }
    Ok(())
}

fn with_path<T>(path: &Path, r: dtofkit::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let inner = CliError::from(e);
        let msg = format!("{}: {}", path.display(), inner);
        match inner {
            CliError::Usage(_) => CliError::Usage(msg),
            CliError::Io(_) => CliError::Io(msg),
            CliError::Validation(_) => CliError::Validation(msg),
            CliError::Numeric(_) => CliError::Numeric(msg),
        }
    })
}

/// Stable frame index for a batch file, independent of file order.
pub fn frame_id(stem: &str) -> u64 {
    let digest = Sha256::digest(stem.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn find_companion(dir: &Path, stem: &str, exts: &[&str], what: &str) -> CliResult<PathBuf> {
    exts.iter()
        .map(|e| dir.join(format!("{stem}.{e}")))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            CliError::Io(format!(
                "no {what} for {stem:?} in {} (tried {})",
                dir.display(),
                exts.join(", ")
            ))
        })
}

const RGB_EXTS: &[&str] = &["png", "jpg", "jpeg"];
const MATERIAL_EXTS: &[&str] = &["pfm", "png"];

struct FrameJob {
    gt: PathBuf,
    rgb: Option<PathBuf>,
    materials: Option<PathBuf>,
    out: PathBuf,
    frame: u64,
}

fn simulate_frame(
    job: &FrameJob,
    cfg: &SimConfig,
    seed: u64,
    hypersim: bool,
) -> CliResult<SimStats> {
    let mut gt = with_path(&job.gt, io::read_depth(&job.gt))?;
    if hypersim {
        gt = preprocess_hypersim(&gt);
    }
    let rgb = job
        .rgb
        .as_ref()
        .map(|p| with_path(p, io::read_rgb(p)))
        .transpose()?;
    let materials = job
        .materials
        .as_ref()
        .map(|p| with_path(p, io::read_material_map(p)))
        .transpose()?;
    for (w, h, what) in rgb.iter().map(|i| (i.width(), i.height(), "rgb")).chain(
        materials
            .iter()
            .map(|m| (m.width(), m.height(), "materials")),
    ) {
        if (w, h) != (gt.width(), gt.height()) {
            return Err(CliError::Validation(format!(
                "{what} is {w}x{h} but ground truth is {}x{}",
                gt.width(),
                gt.height()
            )));
        }
    }
    let sim = simulate_dtof(
        &gt,
        rgb.as_ref(),
        materials.as_ref(),
        cfg,
        SimSeed::with_frame(seed, job.frame),
    )?;
    with_path(&job.out, io::write_sparse(&job.out, &sim.sparse))?;
    io::write_json(&sibling(&job.out, "stats.json"), &sim.stats)?;
    Ok(sim.stats)
}

pub fn cmd_simulate(args: &SimulateArgs, config: Option<&SimConfig>) -> CliResult<RunRecord> {
    let cfg = match (config, &args.config, &args.profile) {
        (Some(c), _, _) => c.clone(),
        (None, Some(path), _) => load_config(path)?,
        (None, None, Some(name)) => resolve_profile(name)?,
        (None, None, None) => {
            return Err(CliError::Usage("pass --config or --profile".into()));
        }
    };
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }

    let batch = args.gt.is_dir();
    let jobs = if batch {
        batch_jobs(args)?
    } else {
        vec![FrameJob {
            gt: args.gt.clone(),
            rgb: args.rgb.clone(),
            materials: args.materials.clone(),
            out: args.out.clone(),
            frame: args.frame,
        }]
    };

    let run_one = |job: &FrameJob| simulate_frame(job, &cfg, args.seed, args.hypersim);
    let results: Vec<CliResult<SimStats>> = if args.jobs > 1 && jobs.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", args.jobs)))?;
        pool.install(|| jobs.par_iter().map(run_one).collect())
    } else {
        jobs.iter().map(run_one).collect()
    };

    let mut record = RunRecord {
        seed: Some(args.seed),
        config: Some(cfg),
        manifest_path: Some(if batch {
            args.out.join("manifest.json")
        } else {
            sibling(&args.out, "manifest.json")
        }),
        ..RunRecord::default()
    };
    let mut points = 0;
    for (job, result) in jobs.iter().zip(results) {
        points += result?.output_points;
        record.inputs.push(job.gt.clone());
        record.inputs.extend(job.rgb.iter().cloned());
        record.inputs.extend(job.materials.iter().cloned());
        record.outputs.push(job.out.clone());
        record.outputs.push(sibling(&job.out, "stats.json"));
    }
    if let Some(path) = &args.config {
        record.inputs.push(path.clone());
    }
    println!(
        "simulated {} frame(s), {points} point(s) -> {}",
        jobs.len(),
        args.out.display()
    );
    Ok(record)
}

fn batch_jobs(args: &SimulateArgs) -> CliResult<Vec<FrameJob>> {
    let dir_arg = |p: &Option<PathBuf>, flag: &str| -> CliResult<Option<PathBuf>> {
        match p {
            Some(p) if !p.is_dir() => Err(CliError::Usage(format!(
                "--{flag} must be a directory when --gt is a directory"
            ))),
            other => Ok(other.clone()),
        }
    };
    let rgb_dir = dir_arg(&args.rgb, "rgb")?;
    let mat_dir = dir_arg(&args.materials, "materials")?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;

    let mut gts: Vec<PathBuf> = fs::read_dir(&args.gt)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && has_ext(p, &["png", "pfm"]))
        .collect();
    gts.sort();
    if gts.is_empty() {
        return Err(CliError::Io(format!(
            "no .png or .pfm ground truth in {}",
            args.gt.display()
        )));
    }
    gts.into_iter()
        .map(|gt| {
            let stem = gt
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CliError::Io(format!("bad file name {}", gt.display())))?
                .to_string();
            Ok(FrameJob {
                rgb: rgb_dir
                    .as_ref()
                    .map(|d| find_companion(d, &stem, RGB_EXTS, "rgb image"))
                    .transpose()?,
                materials: mat_dir
                    .as_ref()
                    .map(|d| find_companion(d, &stem, MATERIAL_EXTS, "material map"))
                    .transpose()?,
                out: args.out.join(format!("{stem}.{}", args.format)),
                frame: frame_id(&stem),
                gt,
            })
        })
        .collect()
}

pub fn cmd_project(args: &ProjectArgs) -> CliResult<RunRecord> {
    let dims = args.grid_rows.zip(args.grid_cols);
    let grid = with_path(&args.dtof, io::read_dtof_csv(&args.dtof, dims))?;
    let rig = with_path(&args.rig, io::read_rig(&args.rig))?;
    let (sparse, stats) = project_dtof_frame(&grid, &rig, args.width, args.height)?;
    with_path(&args.out, io::write_sparse(&args.out, &sparse))?;
    let stats_path = sibling(&args.out, "stats.json");
    io::write_json(&stats_path, &stats)?;
    println!(
        "projected {} of {} cell(s) -> {}",
        sparse.len(),
        stats.valid_cells,
        args.out.display()
    );
    Ok(RunRecord {
        inputs: vec![args.dtof.clone(), args.rig.clone()],
        outputs: vec![args.out.clone(), stats_path],
        manifest_path: Some(sibling(&args.out, "manifest.json")),
        ..RunRecord::default()
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<RunRecord> {
    let params = EdgeWeightParams {
        kappa: args.kappa,
        literal_prefactor: args.literal_prefactor,
    };
    params.validate()?;
    let pred = with_path(&args.pred, io::read_depth(&args.pred))?;
    let gt = with_path(&args.gt, io::read_depth(&args.gt))?;
    let report = evaluate(&pred, &gt, args.max_depth, &params)?;
    io::write_json(&args.out, &report)?;
    let mut outputs = vec![args.out.clone()];
    if let Some(path) = &args.error_map {
        let err = abs_error_map(&pred, &gt)?;
        with_path(
            path,
            io::write_error_png(path, gt.width(), gt.height(), &err),
        )?;
        outputs.push(path.clone());
    }
    println!(
        "rel {:.4}  rmse {:.4}  delta1 {:.4}  ewmae {:.4} over {} px",
        report.rel, report.rmse, report.delta1, report.ewmae, report.valid_count
    );
    Ok(RunRecord {
        inputs: vec![args.pred.clone(), args.gt.clone()],
        outputs,
        manifest_path: Some(sibling(&args.out, "manifest.json")),
        ..RunRecord::default()
    })
}

/// One set of mixing weights: inline numbers, or a raw per-pixel volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Global(Vec<f64>),
    PerPixel { volume: PathBuf },
}

/// Aggregation JSON; volume paths are relative to the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationSpec {
    #[serde(default = "dtofkit::default_schema_version")]
    pub schema_version: u32,
    pub tau: WeightSpec,
    pub sigma: WeightSpec,
}

fn load_weights(spec: &WeightSpec, base: &Path, inputs: &mut Vec<PathBuf>) -> CliResult<WeightSet> {
    Ok(match spec {
        WeightSpec::Global(v) => WeightSet::Global(v.clone()),
        WeightSpec::PerPixel { volume } => {
            let path = base.join(volume);
            let vol = with_path(&path, io::read_volume(&path))?;
            inputs.push(path.clone());
            inputs.push(io::sidecar_path(&path));
            WeightSet::PerPixel(vol)
        }
    })
}

pub fn cmd_refine(args: &RefineArgs) -> CliResult<RunRecord> {
    let initial = with_path(&args.depth, io::read_field(&args.depth))?;
    let mut inputs = vec![args.depth.clone(), args.agg.clone()];
    let mut affinities = Vec::with_capacity(args.affinities.len());
    for path in &args.affinities {
        let vol = with_path(path, io::read_volume(path))?;
        let k = (vol.channels() as f64).sqrt().round() as usize;
        if k * k != vol.channels() {
            return Err(CliError::Validation(format!(
                "{}: {} channels is not a square kernel",
                path.display(),
                vol.channels()
            )));
        }
        affinities.push(with_path(path, AffinityField::from_raw(k, &vol))?);
        inputs.push(path.clone());
        inputs.push(io::sidecar_path(path));
    }
    let spec: AggregationSpec = with_path(&args.agg, io::read_json(&args.agg))?;
    dtofkit::check_schema_version(spec.schema_version)?;
    let base = args.agg.parent().unwrap_or(Path::new("."));
    let tau = load_weights(&spec.tau, base, &mut inputs)?;
    let sigma = load_weights(&spec.sigma, base, &mut inputs)?;
    let agg = with_path(&args.agg, AggregationWeights::new(tau, sigma))?;

    let out = refine(&initial, &affinities, &agg, args.iters)?;
    write_dense(&args.out, &out)?;
    println!(
        "refined {}x{} with {} kernel(s), T = {} -> {}",
        out.width(),
        out.height(),
        affinities.len(),
        args.iters,
        args.out.display()
    );
    Ok(RunRecord {
        inputs,
        outputs: vec![args.out.clone()],
        manifest_path: Some(sibling(&args.out, "manifest.json")),
        ..RunRecord::default()
    })
}

/// Writes a dense field: PFM keeps every value, PNG keeps positive depths.
fn write_dense(path: &Path, field: &Field) -> CliResult<()> {
    let r = if has_ext(path, &["pfm"]) {
        io::write_pfm(path, field)
    } else {
        io::write_depth(path, &field.to_depth_map())
    };
    with_path(path, r)
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<RunRecord> {
    let d_inv = with_path(&args.dinv, io::read_field(&args.dinv))?;
    let sparse = with_path(
        &args.sparse,
        io::read_sparse(&args.sparse, Some((d_inv.width(), d_inv.height()))),
    )?;
    let opts = FitOptions {
        robust: args.robust,
        inverse_floor: args.inverse_floor,
    };
    let (fit, aligned): (_, DepthMap) = fit_scale_shift(&d_inv, &sparse, &opts)?;
    with_path(&args.out, io::write_depth(&args.out, &aligned))?;
    let fit_path = sibling(&args.out, "fit.json");
    io::write_json(&fit_path, &fit)?;
    println!(
        "s = {:.6}  t = {:.6}  rms = {:.3e} over {} point(s)",
        fit.scale, fit.shift, fit.residual_rms, fit.points_used
    );
    Ok(RunRecord {
        inputs: vec![args.dinv.clone(), args.sparse.clone()],
        outputs: vec![args.out.clone(), fit_path],
        manifest_path: Some(sibling(&args.out, "manifest.json")),
        ..RunRecord::default()
    })
}
