//! The validation harness: convergence slopes, op-count scaling, and
//! oracle agreement, emitted as plot-ready CSV plus a JSON summary.

use anyhow::{Context, Result};
use clap::Args;
use std::path::PathBuf;
use vsig_core::counter::OpCounter;
use vsig_core::fssk::{run_fssk, FsskData, FsskOptions, JordanBlock, JordanForm};
use vsig_core::kernel::{MatrixKernelSpec, ScalarKernel};
use vsig_core::mat::RealMat;
use vsig_core::oracles;
use vsig_core::paths::{self, Path};
use vsig_core::quad::{run_scheme, ExponentSet, QuadOptions};
use vsig_core::sigkernel::{run_goursat, GoursatOptions, GoursatScheme, StaticLift};
use vsig_core::tensor::TruncatedTensor;

#[derive(Args)]
pub struct ValidateArgs {
    /// suite: convergence | scaling | oracle
    #[arg(long, value_parser = ["convergence", "scaling", "oracle"])]
    suite: String,
    /// fractional exponents for the convergence suite
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.1])]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    segments: usize,
    #[arg(long, default_value_t = 6)]
    trunc: usize,
    /// number of sample paths
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// dyadic levels 0..=lmax
    #[arg(long, default_value_t = 4)]
    lmax: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV report output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    /// comma-separated segment counts
    #[arg(long, value_delimiter = ',', default_values_t = [16, 32, 64])]
    segments: Vec<usize>,
    /// comma-separated truncation levels
    #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5])]
    trunc: Vec<usize>,
    #[arg(long, default_value_t = 0.6)]
    beta: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Least-squares slope of `log2(err)` against `-λ` over the last `take`
/// levels.
pub fn fitted_slope(errors: &[f64], take: usize) -> f64 {
    let n = errors.len();
    let lo = n.saturating_sub(take);
    let pts: Vec<(f64, f64)> = (lo..n).map(|i| (i as f64, errors[i].log2())).collect();
    let k = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    -(k * sxy - sx * sy) / (k * sxx - sx * sx)
}

/// Factorially adjusted max deviation against a reference, level-wise.
fn err_of(a: &TruncatedTensor, b: &TruncatedTensor) -> f64 {
    a.factorially_adjusted_distance(b)
}

/// Richardson reference for the fractional convergence experiments: the
/// order-2 scheme (FFT-accelerated, uniform grids) extrapolated between
/// dyadic levels `lref` and `lref+1` with the observed leading rate `1+β`.
pub fn richardson_reference(
    path: &Path,
    beta: f64,
    trunc: usize,
    lref: usize,
) -> Result<TruncatedTensor> {
    let spec = MatrixKernelSpec::scalar(ScalarKernel::Fractional { beta }, path.dim())?;
    let es = ExponentSet::fractional_order2(beta)?;
    let coarse = vsig_core::fft::run_fft_scheme(&path.dyadic_refine(lref), &spec, trunc, &es, None)?;
    let fine =
        vsig_core::fft::run_fft_scheme(&path.dyadic_refine(lref + 1), &spec, trunc, &es, None)?;
    let w = 2f64.powf(1.0 + beta);
    let mut ref_t = fine.outputs.last().unwrap().clone();
    ref_t.scale(w / (w - 1.0));
    ref_t.axpy(-1.0 / (w - 1.0), coarse.outputs.last().unwrap())?;
    Ok(ref_t)
}

/// Per-level worst-case errors of the order-0/1 schemes against the
/// Richardson reference, maximized over a path batch.
pub fn convergence_errors(
    beta: f64,
    segments: usize,
    trunc: usize,
    count: usize,
    lmax: usize,
    seed: u64,
) -> Result<[Vec<f64>; 2]> {
    let spec = MatrixKernelSpec::scalar(ScalarKernel::Fractional { beta }, 3)?;
    let mut errs = [vec![0.0f64; lmax + 1], vec![0.0f64; lmax + 1]];
    for (_, path) in paths::generate(seed, count, segments) {
        let reference = richardson_reference(&path, beta, trunc, lmax)?;
        for (oi, es) in [
            ExponentSet::order0(),
            ExponentSet::fractional_order1(beta)?,
        ]
        .into_iter()
        .enumerate()
        {
            for lam in 0..=lmax {
                let run = vsig_core::fft::run_fft_scheme(
                    &path.dyadic_refine(lam),
                    &spec,
                    trunc,
                    &es,
                    None,
                )?;
                let e = err_of(run.outputs.last().unwrap(), &reference);
                if e > errs[oi][lam] {
                    errs[oi][lam] = e;
                }
            }
        }
    }
    Ok(errs)
}

pub fn validate_cmd(args: ValidateArgs) -> Result<()> {
    let mut csv = String::new();
    let mut summary = serde_json::Map::new();
    match args.suite.as_str() {
        "convergence" => {
            csv.push_str("beta,order,lambda,error\n");
            for &beta in &args.beta {
                let errs = convergence_errors(
                    beta,
                    args.segments,
                    args.trunc,
                    args.count,
                    args.lmax,
                    args.seed,
                )?;
                for (order, levels) in errs.iter().enumerate() {
                    for (lam, e) in levels.iter().enumerate() {
                        csv.push_str(&format!("{beta},{order},{lam},{e}\n"));
                    }
                    let slope = fitted_slope(levels, 3);
                    let target = if order == 0 { beta } else { 1.0 + beta };
                    summary.insert(
                        format!("slope_beta{beta}_order{order}"),
                        serde_json::json!({ "fitted": slope, "target": target }),
                    );
                }
            }
        }
        "scaling" => {
            csv.push_str("family,metric,low,high,ratio\n");
            for row in scaling_table(args.seed)? {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.0, row.1, row.2, row.3, row.4
                ));
                summary.insert(format!("{}_{}", row.0, row.1), serde_json::json!(row.4));
            }
        }
        "oracle" => {
            csv.push_str("check,value,reference,abs_diff\n");
            for (name, value, reference) in oracle_table(args.seed)? {
                csv.push_str(&format!(
                    "{name},{value},{reference},{}\n",
                    (value - reference).abs()
                ));
                summary.insert(name, serde_json::json!((value - reference).abs()));
            }
        }
        other => anyhow::bail!("unknown suite {other}"),
    }
    std::fs::write(&args.out, &csv).with_context(|| format!("cannot write {}", args.out.display()))?;
    let summary_path = args.out.with_extension("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

type ScalingRow = (&'static str, &'static str, usize, usize, f64);

/// Op-count ratios under problem-size doubling, per scheme family.
pub fn scaling_table(seed: u64) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    let beta = 0.6;
    // quad: J -> 2J quadruples
    {
        let spec = MatrixKernelSpec::scalar(ScalarKernel::Fractional { beta }, 3)?;
        let es = ExponentSet::fractional_order1(beta)?;
        let mut ops = [0u64; 2];
        for (k, segs) in [32usize, 64].into_iter().enumerate() {
            let (_, path) = paths::generate(seed, 1, segs).pop().unwrap();
            let counter = OpCounter::new();
            run_scheme(
                &path,
                &spec,
                4,
                &QuadOptions::with_exponents(es.clone()),
                Some(&counter),
            )?;
            ops[k] = counter.get();
        }
        rows.push(("quad", "double_J", 32, 64, ops[1] as f64 / ops[0] as f64));
    }
    // fft: J -> 2J multiplies by ~2·log factor
    {
        let spec = MatrixKernelSpec::scalar(ScalarKernel::Fractional { beta }, 3)?;
        let es = ExponentSet::fractional_order1(beta)?;
        let mut ops = [0u64; 2];
        for (k, segs) in [64usize, 128].into_iter().enumerate() {
            let (_, path) = paths::generate(seed, 1, segs).pop().unwrap();
            let counter = OpCounter::new();
            vsig_core::fft::run_fft_scheme(&path, &spec, 4, &es, Some(&counter))?;
            ops[k] = counter.get();
        }
        rows.push(("fft", "double_J", 64, 128, ops[1] as f64 / ops[0] as f64));
    }
    // fssk: J -> 2J doubles; R -> 2R quadruples
    {
        let data_r = |r: usize| FsskData {
            jordan: JordanForm::new(
                (0..r)
                    .map(|i| JordanBlock::Real { lambda: 0.3 + 0.2 * i as f64, size: 1 })
                    .collect(),
            )
            .unwrap(),
            b: vec![
                (0..r).map(|i| 1.0 / (1.0 + i as f64)).collect(),
                (0..r).map(|i| 0.5 - 0.05 * i as f64).collect(),
            ],
            a_mats: vec![RealMat::identity(3), {
                let mut a = RealMat::identity(3);
                a.scale(0.5);
                a
            }],
        };
        let mut ops = [0u64; 2];
        for (k, segs) in [16usize, 32].into_iter().enumerate() {
            let (_, path) = paths::generate(seed + 1, 1, segs).pop().unwrap();
            let counter = OpCounter::new();
            run_fssk(&path, &data_r(3), 4, &FsskOptions::default(), Some(&counter))?;
            ops[k] = counter.get();
        }
        rows.push(("fssk", "double_J", 16, 32, ops[1] as f64 / ops[0] as f64));
        let mut ops = [0u64; 2];
        for (k, r) in [3usize, 6].into_iter().enumerate() {
            let (_, path) = paths::generate(seed + 1, 1, 16).pop().unwrap();
            let counter = OpCounter::new();
            run_fssk(&path, &data_r(r), 4, &FsskOptions::default(), Some(&counter))?;
            ops[k] = counter.get();
        }
        rows.push(("fssk", "double_R", 3, 6, ops[1] as f64 / ops[0] as f64));
    }
    // goursat: doubling both grid sides quadruples
    {
        let data = FsskData {
            jordan: JordanForm::new(vec![
                JordanBlock::Real { lambda: 0.5, size: 1 },
                JordanBlock::Rotation { a: 0.2, omega: 1.0, size: 1 },
            ])?,
            b: vec![vec![1.0, 0.3, 0.1], vec![0.2, 0.5, 0.0]],
            a_mats: vec![RealMat::identity(3), RealMat::identity(3)],
        };
        let (_, x) = paths::generate(seed + 2, 1, 8).pop().unwrap();
        let (_, w) = paths::generate(seed + 3, 1, 8).pop().unwrap();
        let mut ops = [0u64; 2];
        for (k, lam) in [1usize, 2].into_iter().enumerate() {
            let counter = OpCounter::new();
            run_goursat(
                &x,
                &w,
                &data,
                &StaticLift::Linear,
                &GoursatOptions { scheme: GoursatScheme::PredictorCorrector, dyadic: lam },
                Some(&counter),
            )?;
            ops[k] = counter.get();
        }
        rows.push(("goursat", "double_both", 16, 32, ops[1] as f64 / ops[0] as f64));
    }
    Ok(rows)
}

/// Brute-force/simplex-quadrature agreement checks on tiny instances.
pub fn oracle_table(seed: u64) -> Result<Vec<(String, f64, f64)>> {
    let mut rows = Vec::new();
    let beta = 0.6;
    let kernels = vec![ScalarKernel::Fractional { beta }];
    // simplex weights against closed forms
    let k1 = oracles::simplex_quadrature_weight(&kernels, &[1], 0.0, 0.7, 1.1, 1e-10)?;
    let closed = vsig_core::kernel::kappa(&kernels[0], 1, 0.0, 0.7, 1.1)?;
    rows.push(("simplex_w1_vs_closed".into(), k1, closed));
    let k2 = oracles::simplex_quadrature_weight(&kernels, &[1, 1], 0.0, 0.7, 1.1, 1e-8)?;
    let closed = vsig_core::kernel::kappa(&kernels[0], 2, 0.0, 0.7, 1.1)?;
    rows.push(("simplex_w2_vs_closed".into(), k2, closed));
    // brute force vs refined order-2 scheme on J=2
    let (_, path3) = paths::generate(seed, 1, 2).pop().unwrap();
    let a_mats = vec![RealMat::identity(3)];
    let brute = oracles::brute_force_vsig(&path3, &kernels, &a_mats, 2, 2)?;
    let spec = MatrixKernelSpec::scalar(kernels[0].clone(), 3)?;
    let es = ExponentSet::fractional_order2(beta)?;
    let run = run_scheme(
        &path3.dyadic_refine(4),
        &spec,
        2,
        &QuadOptions::with_exponents(es),
        None,
    )?;
    let d = brute.factorially_adjusted_distance(run.outputs.last().unwrap());
    rows.push(("bruteforce_vs_order2_l4".into(), d, 0.0));
    Ok(rows)
}

pub fn bench_cmd(args: BenchArgs) -> Result<()> {
    let mut csv = String::from("command,segments,trunc,ops,wall_ms\n");
    for &segs in &args.segments {
        for &n in &args.trunc {
            let (_, path) = paths::generate(args.seed, 1, segs).pop().unwrap();
            let spec = MatrixKernelSpec::scalar(ScalarKernel::Fractional { beta: args.beta }, 3)?;
            let es = ExponentSet::fractional_order1(args.beta)?;
            {
                let counter = OpCounter::new();
                let t = std::time::Instant::now();
                run_scheme(
                    &path,
                    &spec,
                    n,
                    &QuadOptions::with_exponents(es.clone()),
                    Some(&counter),
                )?;
                csv.push_str(&format!(
                    "quad,{segs},{n},{},{:.3}\n",
                    counter.get(),
                    t.elapsed().as_secs_f64() * 1e3
                ));
            }
            {
                let counter = OpCounter::new();
                let t = std::time::Instant::now();
                vsig_core::fft::run_fft_scheme(&path, &spec, n, &es, Some(&counter))?;
                csv.push_str(&format!(
                    "fft,{segs},{n},{},{:.3}\n",
                    counter.get(),
                    t.elapsed().as_secs_f64() * 1e3
                ));
            }
            {
                let data = FsskData {
                    jordan: JordanForm::new(vec![JordanBlock::Real { lambda: 1.0, size: 1 }])?,
                    b: vec![vec![1.0]],
                    a_mats: vec![RealMat::identity(3)],
                };
                let counter = OpCounter::new();
                let t = std::time::Instant::now();
                run_fssk(&path, &data, n, &FsskOptions::default(), Some(&counter))?;
                csv.push_str(&format!(
                    "fssk,{segs},{n},{},{:.3}\n",
                    counter.get(),
                    t.elapsed().as_secs_f64() * 1e3
                ));
            }
        }
    }
    std::fs::write(&args.out, &csv)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
