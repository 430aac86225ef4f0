use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mdfkit::demo::{run_demo, DemoMode, DemoScene};
use mdfkit::field::{intersection_penalty, sample_grid, AnalyticScene, GridSpec, SampledMdfGrid};
use mdfkit::meshing::{extract_all, load_obj, save_obj, write_ply, TriangleMesh};
use mdfkit::metrics::{
    evaluate, MetricParams, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TAU, DEFAULT_VOXEL_RES,
};
use mdfkit::projection::{count_modified, project_grid, Method};
use mdfkit::{MdfError, Vec3};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mdfkit",
    version,
    about = "Multi-object distance field pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an analytic scene on a regular grid.
    Sample {
        #[arg(long)]
        scene: PathBuf,
        /// Lattice points per axis, NX,NY,NZ.
        #[arg(long, value_parser = parse_dims)]
        dims: [usize; 3],
        /// x0,y0,z0,x1,y1,z1; defaults to the scene bounds padded by 10%.
        #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
        bbox: Option<[f64; 6]>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project every lattice vector onto the constraint set.
    Project {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "shift_all")]
        method: Method,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one mesh per object as `<out>_obj<k>.obj`.
    Mesh {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write binary PLY files.
        #[arg(long)]
        ply: bool,
    },
    /// Evaluate meshes given as OBJ files or as a `<prefix>` of `<prefix>_obj<k>.obj`.
    Eval {
        #[arg(required = true)]
        pred: Vec<PathBuf>,
        /// Ground-truth prefix or files, matched to predictions by position.
        #[arg(long, num_args = 1..)]
        gt: Vec<PathBuf>,
        /// Box whose volume normalizes IV; defaults to the predictions' bounds.
        #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
        bbox: Option<[f64; 6]>,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in scene through the whole pipeline.
    Demo {
        name: String,
        #[arg(long, default_value = "vanilla")]
        mode: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Also compare projected meshes against the vanilla ones.
        #[arg(long)]
        compare: bool,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the grid and meshes under this prefix.
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_VOXEL_RES)]
    voxel_res: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl MetricArgs {
    fn params(&self) -> MetricParams {
        MetricParams {
            n_samples: self.samples,
            tau: self.tau,
            voxel_res: self.voxel_res,
            seed: self.seed,
        }
    }
}

fn parse_list<const N: usize, T: std::str::FromStr>(s: &str) -> Result<[T; N], String> {
    let parts: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("cannot parse '{p}'")))
        .collect::<Result<_, _>>()?;
    let n = parts.len();
    parts
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated values, got {n}"))
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let dims = parse_list::<3, usize>(s)?;
    if dims.iter().any(|&d| d < 2) {
        return Err(format!("every dimension must be at least 2, got {dims:?}"));
    }
    Ok(dims)
}

fn parse_bbox(s: &str) -> Result<[f64; 6], String> {
    parse_list::<6, f64>(s)
}

fn bbox_corners(b: [f64; 6]) -> (Vec3, Vec3) {
    (Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]))
}

fn mesh_path(prefix: &Path, k: usize, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!("_obj{k}.{ext}"));
    PathBuf::from(s)
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn write_meshes(meshes: &[TriangleMesh], prefix: &Path, ply: bool) -> anyhow::Result<()> {
    for m in meshes {
        if m.is_empty() {
            log::warn!("object {} has an empty surface", m.object_index);
        }
        let path = mesh_path(prefix, m.object_index, "obj");
        save_obj(m, &path).with_context(|| format!("writing {}", path.display()))?;
        if ply {
            let path = mesh_path(prefix, m.object_index, "ply");
            let f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_ply(m, BufWriter::new(f))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct InputFile {
    path: String,
    sha256: String,
}

fn hashed(path: &Path) -> anyhow::Result<InputFile> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputFile {
        path: path.display().to_string(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    })
}

/// Expands `inputs` into mesh files: existing files as given, otherwise
/// `<prefix>_obj0.obj`, `<prefix>_obj1.obj`, ... until the first gap.
fn mesh_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_file() {
            files.push(input.clone());
            continue;
        }
        let found: Vec<PathBuf> = (0..)
            .map(|k| mesh_path(input, k, "obj"))
            .take_while(|p| p.is_file())
            .collect();
        if found.is_empty() {
            bail!(MdfError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: no such file or mesh prefix", input.display()),
            )));
        }
        files.extend(found);
    }
    Ok(files)
}

fn load_meshes(files: &[PathBuf]) -> anyhow::Result<Vec<TriangleMesh>> {
    files
        .iter()
        .enumerate()
        .map(|(k, f)| load_obj(f, k).with_context(|| format!("reading {}", f.display())))
        .collect()
}

#[derive(Serialize)]
struct Provenance {
    predictions: Vec<InputFile>,
    ground_truth: Vec<InputFile>,
    parameters: MetricParams,
    /// Wall-clock time of the run; the only field that varies between identical runs.
    timestamp: String,
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    report: &'a mdfkit::metrics::EvalReport,
    provenance: Provenance,
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sample {
            scene,
            dims,
            bbox,
            out,
        } => {
            let scene = AnalyticScene::load(&scene)
                .with_context(|| format!("reading {}", scene.display()))?;
            let (lo, hi) = match bbox {
                Some(b) => bbox_corners(b),
                None => {
                    let (lo, hi) = scene.bounds();
                    let pad = (hi - lo) * 0.1;
                    (lo - pad, hi + pad)
                }
            };
            let spec = GridSpec::new(dims, lo, hi)?;
            let grid = sample_grid(&scene, &spec)?;
            grid.save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} ({}x{}x{}, {} objects)",
                out.display(),
                dims[0],
                dims[1],
                dims[2],
                grid.channels()
            );
        }
        Command::Project {
            grid,
            method,
            eps,
            out,
        } => {
            let input = SampledMdfGrid::load(&grid)
                .with_context(|| format!("reading {}", grid.display()))?;
            let projected = project_grid(&input, method, eps)?;
            projected
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{} points modified", count_modified(&input, &projected));
            if input.channels() >= 2 {
                println!("penalty before: {:e}", intersection_penalty(&input)?);
                println!("penalty after: {:e}", intersection_penalty(&projected)?);
            }
        }
        Command::Mesh { grid, out, ply } => {
            let grid = SampledMdfGrid::load(&grid)
                .with_context(|| format!("reading {}", grid.display()))?;
            let meshes = extract_all(&grid);
            write_meshes(&meshes, &out, ply)?;
            for m in &meshes {
                println!(
                    "object {}: {} vertices, {} triangles",
                    m.object_index,
                    m.vertices.len(),
                    m.triangles.len()
                );
            }
        }
        Command::Eval {
            pred,
            gt,
            bbox,
            metrics,
            out,
        } => {
            let pred_files = mesh_files(&pred)?;
            let gt_files = if gt.is_empty() {
                Vec::new()
            } else {
                mesh_files(&gt)?
            };
            let pred_meshes = load_meshes(&pred_files)?;
            let gt_meshes = load_meshes(&gt_files)?;
            let reference = bbox.map(|b| {
                let (lo, hi) = bbox_corners(b);
                let e = hi - lo;
                e.x * e.y * e.z
            });
            let params = metrics.params();
            let gt_arg = (!gt_meshes.is_empty()).then_some(gt_meshes.as_slice());
            let report = evaluate(&pred_meshes, gt_arg, &params, reference)?;
            let provenance = Provenance {
                predictions: pred_files
                    .iter()
                    .map(|p| hashed(p))
                    .collect::<anyhow::Result<_>>()?,
                ground_truth: gt_files
                    .iter()
                    .map(|p| hashed(p))
                    .collect::<anyhow::Result<_>>()?,
                parameters: params,
                timestamp: timestamp(),
            };
            write_json(
                &EvalOutput {
                    report: &report,
                    provenance,
                },
                out.as_deref(),
            )?;
        }
        Command::Demo {
            name,
            mode,
            eps,
            metrics,
            compare,
            out,
            save,
        } => {
            let scene: DemoScene = name.parse()?;
            let mode: DemoMode = mode.parse()?;
            let run = run_demo(scene, mode, eps, &metrics.params(), compare)?;
            if let Some(prefix) = save {
                let mut grid_path = prefix.as_os_str().to_owned();
                grid_path.push(".mdfg");
                run.grid.save(PathBuf::from(grid_path))?;
                write_meshes(&run.meshes, &prefix, false)?;
            }
            write_json(&run.report, out.as_deref())?;
        }
    }
    Ok(())
}

/// 2 for bad input or I/O, 1 for failures inside a computation.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<MdfError>() {
        Some(MdfError::Io(_) | MdfError::Format { .. } | MdfError::Validation(_)) => 2,
        Some(_) => 1,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 1,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("MDFKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("MDFKIT_THREADS must be a count, got '{raw}'"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
