//! `vsig`: Volterra signatures of piecewise-linear paths from the command
//! line.
//!
//! Subcommands: `gen-paths` (sample path generator), `quad` (triangular
//! higher-order scheme), `fft` (FFT-accelerated variant), `fssk` (exact
//! state-space recursion), `sigkernel` (Goursat signature kernel),
//! `validate` (convergence/scaling/oracle harness), `bench` (op-count and
//! wall-time tables). Exit codes: 2 parse, 3 validation, 4 numeric failure,
//! with a machine-readable error object on stderr.

mod io;
mod manifest;
mod validate;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use manifest::{sha256_hex, RunManifest, Tolerances};
use std::path::PathBuf;
use std::time::Instant;
use vsig_core::counter::OpCounter;
use vsig_core::fssk::{run_fssk, FsskData, FsskOptions};
use vsig_core::kernel::MatrixKernelSpec;
use vsig_core::paths;
use vsig_core::quad::{run_scheme, ExponentSet, QuadOptions};
use vsig_core::sigkernel::{run_goursat, GoursatOptions, GoursatScheme, StaticLift};

#[derive(Parser)]
#[command(name = "vsig", version, about = "Volterra signature computations")]
struct Cli {
    /// cap the worker thread count for batched work
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate sample paths (d = 3, unit-speed spherical derivatives)
    GenPaths(GenPathsArgs),
    /// Higher-order triangular scheme
    Quad(SchemeArgs),
    /// FFT-accelerated scheme (uniform grids, convolution kernels)
    Fft(SchemeArgs),
    /// Exact state-space recursion
    Fssk(FsskArgs),
    /// Volterra signature kernel via the Goursat system
    Sigkernel(SigkernelArgs),
    /// Validation harness (convergence | scaling | oracle)
    Validate(validate::ValidateArgs),
    /// Operation-count and wall-time tables
    Bench(validate::BenchArgs),
}

#[derive(Args)]
struct GenPathsArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// number of paths
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// segments per path
    #[arg(long, default_value_t = 32)]
    segments: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SchemeArgs {
    /// input path CSV (`t,x1,...,xd`)
    #[arg(long)]
    path: PathBuf,
    /// kernel spec JSON
    #[arg(long)]
    kernel: PathBuf,
    /// truncation level N
    #[arg(long, default_value_t = 4)]
    trunc: usize,
    /// fractional scheme order (0, 1 or 2); orders >= 1 need --beta
    #[arg(long, default_value_t = 0)]
    order: usize,
    /// fractional exponent β for --order 1/2
    #[arg(long)]
    beta: Option<f64>,
    /// explicit exponent list (overrides --order)
    #[arg(long, value_delimiter = ',')]
    exponents: Option<Vec<f64>>,
    /// interpolation nodes for --exponents (default equispaced)
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<f64>>,
    /// readout times τ_j (quad only; one per grid point)
    #[arg(long, value_delimiter = ',')]
    readouts: Option<Vec<f64>>,
    /// output file for the tensor series
    #[arg(long)]
    out: PathBuf,
    /// write the flat binary layout instead of JSON
    #[arg(long)]
    bin: bool,
    /// manifest path (default: `<out>.manifest.json`)
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct FsskArgs {
    #[arg(long)]
    path: PathBuf,
    /// FsskData JSON (jordan+b or prony form)
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, default_value_t = 4)]
    trunc: usize,
    /// contour quadrature nodes per conjugate half
    #[arg(long, default_value_t = vsig_core::fssk::DEFAULT_MQUAD)]
    mquad: usize,
    #[arg(long, value_delimiter = ',')]
    readouts: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bin: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SigkernelArgs {
    /// first path CSV
    #[arg(long = "path-x")]
    path_x: PathBuf,
    /// second path CSV
    #[arg(long = "path-w")]
    path_w: PathBuf,
    /// FsskData JSON
    #[arg(long)]
    kernel: PathBuf,
    /// finite-difference scheme
    #[arg(long, default_value = "pc", value_parser = ["pc", "exp", "naive"])]
    scheme: String,
    /// dyadic refinement level λ
    #[arg(long, default_value_t = 0)]
    dyadic: usize,
    /// static Gram tables JSON: gram[r][p][i][j]
    #[arg(long = "static-gram")]
    static_gram: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// include the full η grid in the output
    #[arg(long)]
    dump_grid: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Error classification for exit codes.
fn classify(err: &anyhow::Error) -> (i32, &'static str) {
    use vsig_core::kernel::KernelError;
    use vsig_core::SchemeError;
    for cause in err.chain() {
        if let Some(se) = cause.downcast_ref::<SchemeError>() {
            return match se {
                SchemeError::Kernel(KernelError::BadParameter(_)) => (3, "validation"),
                SchemeError::Kernel(KernelError::Special(_)) => (4, "numeric"),
                SchemeError::Kernel(_) => (3, "validation"),
                SchemeError::SingularNodes(_) => (4, "numeric"),
                SchemeError::Tensor(_) => (4, "numeric"),
                _ => (3, "validation"),
            };
        }
        if let Some(ke) = cause.downcast_ref::<KernelError>() {
            return match ke {
                KernelError::Special(_) => (4, "numeric"),
                _ => (3, "validation"),
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
            || cause.downcast_ref::<std::num::ParseFloatError>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return (2, "parse");
        }
    }
    (3, "validation")
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let jobs = cli.jobs;
    let result = match cli.command {
        Command::GenPaths(args) => gen_paths(args, jobs),
        Command::Quad(args) => scheme_cmd(args, jobs, false),
        Command::Fft(args) => scheme_cmd(args, jobs, true),
        Command::Fssk(args) => fssk_cmd(args, jobs),
        Command::Sigkernel(args) => sigkernel_cmd(args, jobs),
        Command::Validate(args) => validate::validate_cmd(args),
        Command::Bench(args) => validate::bench_cmd(args),
    };
    if let Err(err) = result {
        let (code, kind) = classify(&err);
        let msg = serde_json::json!({
            "error": { "kind": kind, "message": format!("{err:#}") }
        });
        eprintln!("{msg}");
        std::process::exit(code);
    }
}

fn gen_paths(args: GenPathsArgs, jobs: Option<usize>) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&args.out_dir)?;
    let generated = paths::generate(args.seed, args.count, args.segments);
    let mut params = Vec::new();
    for (i, (p, path)) in generated.iter().enumerate() {
        let file = args.out_dir.join(format!("path_{i:03}.csv"));
        io::write_path_csv(&file, path)?;
        params.push(serde_json::json!({
            "file": file.to_string_lossy(),
            "params": p,
        }));
    }
    let mut man = RunManifest::new("gen-paths");
    man.seed = Some(args.seed);
    man.count = Some(args.count);
    man.segments = Some(args.segments);
    man.fine_factor = Some(paths::FINE_FACTOR);
    man.jobs = jobs;
    man.extra.insert("paths".into(), serde_json::Value::Array(params));
    man.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    man.output_file = args.out_dir.to_string_lossy().into_owned();
    man.write(&args.out_dir.join("gen_paths.manifest.json"))?;
    Ok(())
}

fn exponent_set(args: &SchemeArgs) -> Result<ExponentSet> {
    if let Some(exps) = &args.exponents {
        return Ok(match &args.nodes {
            Some(nodes) => ExponentSet::new(exps.clone(), nodes.clone())?,
            None => ExponentSet::equispaced(exps.clone())?,
        });
    }
    Ok(match args.order {
        0 => ExponentSet::order0(),
        1 => ExponentSet::fractional_order1(
            args.beta.context("--order 1 requires --beta")?,
        )?,
        2 => ExponentSet::fractional_order2(
            args.beta.context("--order 2 requires --beta")?,
        )?,
        o => anyhow::bail!("unsupported --order {o}; use 0, 1, 2 or --exponents"),
    })
}

fn read_json_file(file: &std::path::Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(file).with_context(|| format!("cannot read {}", file.display()))?;
    // syntax errors are parse failures; schema errors surface later as
    // validation failures
    serde_json::from_slice::<serde_json::Value>(&bytes)
        .with_context(|| format!("{} is not valid JSON", file.display()))?;
    Ok(bytes)
}

fn scheme_cmd(args: SchemeArgs, jobs: Option<usize>, use_fft: bool) -> Result<()> {
    let started = Instant::now();
    let path = io::read_path_csv(&args.path)?;
    let kernel_bytes = read_json_file(&args.kernel)?;
    let spec = MatrixKernelSpec::from_json(std::str::from_utf8(&kernel_bytes)?)?;
    let es = exponent_set(&args)?;
    let counter = OpCounter::new();

    let mut man = RunManifest::new(if use_fft { "fft" } else { "quad" });
    man.path_file = Some(args.path.to_string_lossy().into_owned());
    man.kernel_file = Some(args.kernel.to_string_lossy().into_owned());
    man.kernel_sha256 = Some(sha256_hex(&kernel_bytes));
    man.grid = Some(RunManifest::grid_of(&path));
    man.trunc = Some(args.trunc);
    man.exponents = Some(es.exponents.clone());
    man.nodes = Some(es.nodes.clone());
    man.readouts = args.readouts.clone();
    man.binary_output = args.bin;
    man.jobs = jobs;
    man.extra.insert(
        "node_matrix_condition".into(),
        serde_json::json!(es.condition),
    );

    let outputs = if use_fft {
        if args.readouts.is_some() {
            anyhow::bail!("--readouts is supported by `quad` only");
        }
        let run = vsig_core::fft::run_fft_scheme(&path, &spec, args.trunc, &es, Some(&counter))?;
        man.extra.insert("padded_len".into(), serde_json::json!(run.padded_len));
        man.extra.insert("fft_transforms".into(), serde_json::json!(run.transforms));
        man.extra.insert(
            "fft_plan_reuse".into(),
            serde_json::json!(run.transforms.saturating_sub(2)),
        );
        run.outputs
    } else {
        let opts = QuadOptions {
            exponents: es,
            readouts: args.readouts.clone(),
            eval_path: vsig_core::quad::EvalPath::Auto,
        };
        let run = run_scheme(&path, &spec, args.trunc, &opts, Some(&counter))?;
        man.extra.insert("weight_tables".into(), serde_json::json!(run.weight_tables));
        match run.readout_outputs {
            Some(r) => r,
            None => run.outputs,
        }
    };

    io::write_tensor_series(&args.out, &outputs, args.bin)?;
    man.op_count = counter.get();
    man.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    man.output_file = args.out.to_string_lossy().into_owned();
    let man_path = args
        .manifest
        .unwrap_or_else(|| args.out.with_extension("manifest.json"));
    man.write(&man_path)?;
    Ok(())
}

fn fssk_cmd(args: FsskArgs, jobs: Option<usize>) -> Result<()> {
    let started = Instant::now();
    let path = io::read_path_csv(&args.path)?;
    let kernel_bytes = read_json_file(&args.kernel)?;
    let data = FsskData::from_json(std::str::from_utf8(&kernel_bytes)?)?;
    let counter = OpCounter::new();
    let opts = FsskOptions {
        mquad: args.mquad,
        readouts: args.readouts.clone(),
    };
    let run = run_fssk(&path, &data, args.trunc, &opts, Some(&counter))?;
    io::write_tensor_series(&args.out, &run.outputs, args.bin)?;

    let mut man = RunManifest::new("fssk");
    man.path_file = Some(args.path.to_string_lossy().into_owned());
    man.kernel_file = Some(args.kernel.to_string_lossy().into_owned());
    man.kernel_sha256 = Some(sha256_hex(&kernel_bytes));
    man.grid = Some(RunManifest::grid_of(&path));
    man.trunc = Some(args.trunc);
    man.mquad = Some(args.mquad);
    man.readouts = args.readouts.clone();
    man.binary_output = args.bin;
    man.jobs = jobs;
    man.tolerances = Tolerances::with_mquad(args.mquad);
    man.op_count = run.recursion_ops;
    man.extra.insert("precomp_ops".into(), serde_json::json!(run.precomp_ops));
    man.extra.insert("table_cache_entries".into(), serde_json::json!(run.cache_entries));
    man.extra.insert("state_dim".into(), serde_json::json!(data.state_dim()));
    man.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    man.output_file = args.out.to_string_lossy().into_owned();
    let man_path = args
        .manifest
        .unwrap_or_else(|| args.out.with_extension("manifest.json"));
    man.write(&man_path)?;
    Ok(())
}

fn sigkernel_cmd(args: SigkernelArgs, jobs: Option<usize>) -> Result<()> {
    let started = Instant::now();
    let x = io::read_path_csv(&args.path_x)?;
    let w = io::read_path_csv(&args.path_w)?;
    let kernel_bytes = read_json_file(&args.kernel)?;
    let data = FsskData::from_json(std::str::from_utf8(&kernel_bytes)?)?;
    let gram_tables: Option<Vec<Vec<Vec<Vec<f64>>>>> = match &args.static_gram {
        Some(file) => Some(serde_json::from_str(
            &std::fs::read_to_string(file)
                .with_context(|| format!("cannot read {}", file.display()))?,
        )?),
        None => None,
    };
    let lift = match &gram_tables {
        Some(tables) => StaticLift::Gram(tables),
        None => StaticLift::Linear,
    };
    let scheme = match args.scheme.as_str() {
        "pc" => GoursatScheme::PredictorCorrector,
        "exp" => GoursatScheme::ExpIntegrator,
        _ => GoursatScheme::Naive,
    };
    let counter = OpCounter::new();
    let run = run_goursat(
        &x,
        &w,
        &data,
        &lift,
        &GoursatOptions { scheme, dyadic: args.dyadic },
        Some(&counter),
    )?;
    let mut out = serde_json::json!({
        "kappa": run.kappa,
        "grid_dims": [run.grid.js + 1, run.grid.jt + 1],
        "op_count": run.ops,
    });
    if args.dump_grid {
        let eta_rows: Vec<Vec<f64>> = (0..=run.grid.js)
            .map(|i| (0..=run.grid.jt).map(|j| run.grid.eta[run.grid.idx(i, j)]).collect())
            .collect();
        out["eta"] = serde_json::json!(eta_rows);
    }
    std::fs::write(&args.out, serde_json::to_string_pretty(&out)?)?;

    let mut man = RunManifest::new("sigkernel");
    man.path_file = Some(args.path_x.to_string_lossy().into_owned());
    man.path_file_w = Some(args.path_w.to_string_lossy().into_owned());
    man.kernel_file = Some(args.kernel.to_string_lossy().into_owned());
    man.kernel_sha256 = Some(sha256_hex(&kernel_bytes));
    man.scheme = Some(args.scheme.clone());
    man.dyadic = Some(args.dyadic);
    man.static_gram = args.static_gram.as_ref().map(|p| p.to_string_lossy().into_owned());
    man.jobs = jobs;
    man.op_count = run.ops;
    man.extra.insert("kappa".into(), serde_json::json!(run.kappa));
    man.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    man.output_file = args.out.to_string_lossy().into_owned();
    let man_path = args
        .manifest
        .unwrap_or_else(|| args.out.with_extension("manifest.json"));
    man.write(&man_path)?;
    Ok(())
}
