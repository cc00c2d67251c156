//! `cowcl`: centerline graphs, features and variants from CoW masks.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 input parse error,
//! 3 pipeline stage or write error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use cow_centerline::evaluator::{evaluate, EvalCase};
use cow_centerline::pipeline::export::{export_feature_json, export_node_json, export_variant_json, export_vtk_polydata, parse_node_json};
use cow_centerline::pipeline::{
    connect, load_mask, load_skeleton, prepare_mask, process_mask, skeletonize, write_bundle, write_skeleton, Modality,
    Mode, PipelineConfig, PipelineError,
};
use cow_centerline::util::atomic_write;
use cow_centerline::volume_io::{euclidean_distance_field, read_nifti_file, Volume};

#[derive(Parser, Debug)]
#[command(name = "cowcl", version, about = "Circle-of-Willis centerline graphs, morphometry and variants")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    modality: Option<Modality>,
    /// Working spacing in mm.
    #[arg(long, global = true)]
    spacing: Option<f64>,
    #[arg(long, global = true)]
    bulge_size: Option<f64>,
    #[arg(long, global = true)]
    w1: Option<f64>,
    #[arg(long, global = true)]
    w2: Option<f64>,
    /// Smoothing window (odd).
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Input {
    #[arg(long)]
    mask: PathBuf,
    /// External skeleton; switches to external-skeleton mode.
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Thin and prune a mask; writes skeleton.nii.
    Skeletonize {
        #[arg(long)]
        mask: PathBuf,
    },
    /// Label and reconnect a skeleton; writes skeleton.nii.
    Connect {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        skeleton: PathBuf,
    },
    /// Writes graph.vtk and nodes.json.
    Graph(Input),
    /// Writes features.json.
    Features(Input),
    /// Writes variants.json.
    Variants(Input),
    /// Full bundle. Several masks run in parallel, each into
    /// <outdir>/<mask stem>/.
    Pipeline {
        #[arg(long, required = true, num_args = 1..)]
        mask: Vec<PathBuf>,
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// Worker threads for several masks (0: one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Compare predicted and reference bundles, paired in order; prints the
    /// report as JSON.
    Eval {
        #[arg(long = "pred", required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        #[arg(long = "ref", required = true, num_args = 1..)]
        reference: Vec<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// An error with its exit code.
struct Failure(u8, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Parse(_) => 2,
            PipelineError::Config(_) => 1,
            PipelineError::Stage { .. } | PipelineError::Io { .. } => 3,
        };
        Failure(code, e.to_string())
    }
}

fn config(o: &Overrides) -> Result<PipelineConfig, Failure> {
    let mut c = match &o.config {
        Some(p) => PipelineConfig::from_file(p).map_err(|e| Failure(1, format!("config: {e}")))?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = o.modality {
        c.modality = m;
    }
    if let Some(s) = o.spacing {
        c.target_spacing = s;
    }
    if let Some(b) = o.bulge_size {
        c.bulge_size = b;
    }
    if let Some(w) = o.w1 {
        c.w1 = w;
    }
    if let Some(w) = o.w2 {
        c.w2 = w;
    }
    if let Some(w) = o.window {
        c.window = w;
    }
    if let Some(d) = &o.outdir {
        c.outdir = d.clone();
    }
    c.validate().map_err(|e| Failure(1, format!("config: {e}")))?;
    Ok(c)
}

fn outdir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure(3, format!("create {}: {e}", dir.display())))
}

fn write_err(path: PathBuf) -> impl FnOnce(std::io::Error) -> Failure {
    move |e| Failure(3, format!("write {}: {e}", path.display()))
}

fn run_case(cfg: &PipelineConfig, input: &Input) -> Result<cow_centerline::pipeline::CaseResult, Failure> {
    let mut cfg = cfg.clone();
    let skel = match &input.skeleton {
        Some(p) => {
            cfg.mode = Mode::ExternalSkeleton;
            Some(load_skeleton(p)?)
        }
        None => None,
    };
    let mask = load_mask(&input.mask)?;
    log::info!("processing {}", input.mask.display());
    let r = process_mask(&mask, skel.as_ref(), &cfg)?;
    for d in &r.diagnostics {
        log::warn!("{}: {d}", input.mask.display());
    }
    Ok(r)
}

fn stem(p: &Path) -> String {
    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".gz").trim_end_matches(".nii").to_string()
}

fn read_bundle(dir: &Path) -> Result<EvalCase, Failure> {
    let parse = |what: &str, e: String| Failure(2, format!("{}: {what}: {e}", dir.display()));
    let text = |name: &str| std::fs::read_to_string(dir.join(name)).ok();
    let mut case = EvalCase::default();
    if let Some(t) = text("nodes.json") {
        case.pred_nodes = parse_node_json(&t).map_err(|e| parse("nodes.json", e))?;
    }
    if let Some(t) = text("variants.json") {
        case.pred_variants = Some(serde_json::from_str(&t).map_err(|e| parse("variants.json", e.to_string()))?);
    }
    if let Some(t) = text("features.json") {
        case.pred_features = Some(serde_json::from_str(&t).map_err(|e| parse("features.json", e.to_string()))?);
    }
    let skel = dir.join("skeleton.nii");
    if skel.exists() {
        let v = read_nifti_file(&skel).map_err(|e| parse("skeleton.nii", e.to_string()))?;
        let data: Vec<u8> = v.to_rounded_i64().into_iter().map(|x| u8::from(x != 0)).collect();
        case.pred_skeleton = Some(Volume::new(v.grid().clone(), data).map_err(|e| parse("skeleton.nii", e.to_string()))?);
    }
    Ok(case)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = config(&cli.opts)?;
    let dir = cfg.outdir.clone();
    match cli.cmd {
        Command::Skeletonize { mask } => {
            let m = prepare_mask(&load_mask(&mask)?, &cfg);
            let field = euclidean_distance_field(&m.binary());
            let s = skeletonize(&m, &field, &cfg);
            outdir(&dir)?;
            write_skeleton(&s, &dir.join("skeleton.nii"))?;
        }
        Command::Connect { mask, skeleton } => {
            let m = prepare_mask(&load_mask(&mask)?, &cfg);
            let s = load_skeleton(&skeleton)?;
            let field = euclidean_distance_field(&m.binary());
            let r = connect(&s, &m, &field, &cfg).map_err(|e| Failure(3, format!("connect_all: {e}")))?;
            log::info!("{} bridges", r.bridges.len());
            outdir(&dir)?;
            write_skeleton(&r.skeleton, &dir.join("skeleton.nii"))?;
        }
        Command::Graph(input) => {
            let r = run_case(&cfg, &input)?;
            outdir(&dir)?;
            let p = dir.join("graph.vtk");
            export_vtk_polydata(&r.graph, &p).map_err(write_err(p))?;
            let p = dir.join("nodes.json");
            export_node_json(&r.nodes.nodes, &p).map_err(write_err(p))?;
        }
        Command::Features(input) => {
            let r = run_case(&cfg, &input)?;
            outdir(&dir)?;
            let p = dir.join("features.json");
            export_feature_json(&r.features, &p).map_err(write_err(p))?;
        }
        Command::Variants(input) => {
            let r = run_case(&cfg, &input)?;
            outdir(&dir)?;
            let p = dir.join("variants.json");
            export_variant_json(&r.variants, &p).map_err(write_err(p))?;
        }
        Command::Pipeline { mask, skeleton, threads } => {
            let batch = mask.len() > 1;
            let one = |m: &PathBuf| -> Result<(), Failure> {
                let out = if batch { dir.join(stem(m)) } else { dir.clone() };
                let input = Input {
                    mask: m.clone(),
                    skeleton: skeleton.clone(),
                };
                let r = run_case(&cfg, &input)?;
                outdir(&out)?;
                write_bundle(&r, &out)?;
                Ok(())
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Failure(3, format!("thread pool: {e}")))?;
            let results: Vec<Result<(), Failure>> = pool.install(|| mask.par_iter().map(one).collect());
            let mut worst: Option<Failure> = None;
            for (m, r) in mask.iter().zip(results) {
                if let Err(f) = r {
                    eprintln!("{}: {}", m.display(), f.1);
                    if worst.as_ref().is_none_or(|w| f.0 > w.0) {
                        worst = Some(f);
                    }
                }
            }
            if let Some(Failure(code, _)) = worst {
                return Err(Failure(code, String::new()));
            }
        }
        Command::Eval { pred, reference, out } => {
            if pred.len() != reference.len() {
                return Err(Failure(1, format!("{} --pred vs {} --ref bundles", pred.len(), reference.len())));
            }
            let mut cases = Vec::new();
            for (p, r) in pred.iter().zip(&reference) {
                let mut c = read_bundle(p)?;
                let rc = read_bundle(r)?;
                c.ref_nodes = rc.pred_nodes;
                c.ref_variants = rc.pred_variants;
                c.ref_features = rc.pred_features;
                c.ref_skeleton = rc.pred_skeleton;
                cases.push(c);
            }
            let report = evaluate(&cases).map_err(|e| Failure(1, format!("eval: {e}")))?;
            let mut text = serde_json::to_string_pretty(&report).expect("serializable report");
            text.push('\n');
            match out {
                Some(p) => atomic_write(&p, text.as_bytes()).map_err(write_err(p))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
