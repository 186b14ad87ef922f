//! Volterra signature kernel via the Goursat PDE system.
//!
//! For finite-state-space kernels the inner product
//! `κ(x,w) = ⟨VSig(x), VSig(w)⟩` solves a coupled two-parameter system in
//! `R^{R×R}`,
//!
//! ```text
//!   ∂²_{st} K = -ηγ + Λ K Λᵀ + ∂_s Ψ + ∂_t Φ,
//!   ∂_s Ψ = -Λ Ψ + γη,      ∂_t Φ = -Φ Λᵀ + γη,      η = 1 + 1ᵀK1,
//! ```
//!
//! discretized cellwise on the two path grids. Three explicit schemes are
//! provided: a naive first-order stencil, an exponential-integrator variant
//! for the auxiliary equations, and the predictor–corrector scheme that
//! re-averages the source terms through the `φ_2` operators.
//!
//! The per-cell coefficient `γ_{i,j} = bᵀ G_{i,j} b` is built from second
//! differences of the static kernel over the cell corners and therefore
//! absorbs the cell measure `Δs Δt`; the transport operators are
//! `E = e^{-ΔΛ}`, `P = φ_1(-ΔΛ)`, `Q = φ_2(-ΔΛ)` applied blockwise.

use crate::counter::OpCounter;
use crate::fssk::{BlockDiagMat, FsskData, JordanForm};
use crate::mat::RealMat;
use crate::paths::Path;
use crate::SchemeError;

/// Exponential transport operators for one step width.
pub struct TransportOps {
    pub e: BlockDiagMat,
    pub p: BlockDiagMat,
    pub q: BlockDiagMat,
}

/// `φ_1(-ΔΛ)` or `φ_2(-ΔΛ)`, blockwise (`φ_1(z) = (e^z-1)/z`,
/// `φ_2(z) = (e^z-z-1)/z²` with the removable singularities at 0).
pub fn phi12_matrix(jordan: &JordanForm, delta: f64, which: usize) -> BlockDiagMat {
    assert!(which == 1 || which == 2);
    jordan.phi_matrix(which, delta)
}

impl TransportOps {
    pub fn new(jordan: &JordanForm, delta: f64) -> Self {
        TransportOps {
            e: jordan.exp_neg(delta),
            p: phi12_matrix(jordan, delta, 1),
            q: phi12_matrix(jordan, delta, 2),
        }
    }
}

/// Supplier of static-kernel evaluations `k_stat^{r,p}(x_{s_i}, w_{t_j})`.
pub enum StaticLift<'a> {
    /// the linear default `⟨A_r x, A_p w⟩`
    Linear,
    /// user-supplied Gram tables: `gram[r][p][i][j] = k_stat^{r,p}(x_i, w_j)`
    Gram(&'a [Vec<Vec<Vec<f64>>>]),
}

/// Per-cell coefficients `γ_{i,j} = Σ_{a,b} G^{a,b}_{i,j} b_a b_bᵀ` from
/// second differences of the static kernel over cell corners.
pub fn gamma_cells(
    x: &Path,
    w: &Path,
    data: &FsskData,
    lift: &StaticLift,
) -> Result<Vec<Vec<RealMat>>, SchemeError> {
    let q = data.q();
    let r = data.state_dim();
    let (js, jt) = (x.segments(), w.segments());
    // G^{ab}_{ij}
    let mut g = vec![vec![vec![0.0; q * q]; jt]; js];
    match lift {
        StaticLift::Linear => {
            for i in 0..js {
                let dx = x.increment(i + 1);
                let ax: Vec<Vec<f64>> = data.a_mats.iter().map(|m| m.mul_vec(&dx)).collect();
                for j in 0..jt {
                    let dw = w.increment(j + 1);
                    let aw: Vec<Vec<f64>> = data.a_mats.iter().map(|m| m.mul_vec(&dw)).collect();
                    for a in 0..q {
                        for b in 0..q {
                            g[i][j][a * q + b] =
                                ax[a].iter().zip(&aw[b]).map(|(u, v)| u * v).sum();
                        }
                    }
                }
            }
        }
        StaticLift::Gram(tables) => {
            if tables.len() != q || tables.iter().any(|t| t.len() != q) {
                return Err(SchemeError::Invalid("Gram table must be q×q".into()));
            }
            for (a, row) in tables.iter().enumerate() {
                for (b, tab) in row.iter().enumerate() {
                    if tab.len() != js + 1 || tab.iter().any(|r| r.len() != jt + 1) {
                        return Err(SchemeError::Invalid(format!(
                            "Gram table ({a},{b}) must be (J_s+1)×(J_t+1)"
                        )));
                    }
                    for i in 0..js {
                        for j in 0..jt {
                            g[i][j][a * q + b] =
                                tab[i + 1][j + 1] - tab[i][j + 1] - tab[i + 1][j] + tab[i][j];
                        }
                    }
                }
            }
        }
    }
    // γ_{ij} = Σ_{a,b} G^{ab} b_a b_bᵀ
    let mut out = Vec::with_capacity(js);
    for gi in g {
        let mut row = Vec::with_capacity(jt);
        for cell in gi {
            let mut gamma = RealMat::zeros(r, r);
            for a in 0..q {
                for b in 0..q {
                    let c = cell[a * q + b];
                    if c == 0.0 {
                        continue;
                    }
                    for (n, &ba) in data.b[a].iter().enumerate() {
                        if ba == 0.0 {
                            continue;
                        }
                        for (mm, &bb) in data.b[b].iter().enumerate() {
                            gamma.data[n * r + mm] += c * ba * bb;
                        }
                    }
                }
            }
            row.push(gamma);
        }
        out.push(row);
    }
    Ok(out)
}

/// Finite-difference variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoursatScheme {
    PredictorCorrector,
    ExpIntegrator,
    Naive,
}

/// Two-parameter lattice of matrix states for the Goursat sweep.
pub struct GoursatGrid {
    pub js: usize,
    pub jt: usize,
    pub state_dim: usize,
    pub k: Vec<RealMat>,
    pub psi: Vec<RealMat>,
    pub phi: Vec<RealMat>,
    pub eta: Vec<f64>,
}

impl GoursatGrid {
    fn new(js: usize, jt: usize, r: usize) -> Self {
        let n = (js + 1) * (jt + 1);
        GoursatGrid {
            js,
            jt,
            state_dim: r,
            k: vec![RealMat::zeros(r, r); n],
            psi: vec![RealMat::zeros(r, r); n],
            phi: vec![RealMat::zeros(r, r); n],
            eta: vec![1.0; n],
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.jt + 1) + j
    }

    /// Terminal kernel value `κ ≈ η_{J_s, J_t}`.
    pub fn terminal(&self) -> f64 {
        self.eta[self.idx(self.js, self.jt)]
    }
}

fn eta_of(k: &RealMat) -> f64 {
    1.0 + k.data.iter().sum::<f64>()
}

struct CellIn<'a> {
    k_sw: &'a RealMat,
    k_e: &'a RealMat,
    k_n: &'a RealMat,
    psi_n: &'a RealMat,
    phi_e: &'a RealMat,
    eta_sw: f64,
    eta_e: f64,
    eta_n: f64,
}

struct CellOut {
    k: RealMat,
    psi: RealMat,
    phi: RealMat,
    eta: f64,
}

/// `Λ M Λᵀ` through the Jordan structure.
fn sandwich(jordan: &JordanForm, m: &RealMat) -> RealMat {
    let r = m.rows;
    let mut tmp = RealMat::zeros(r, r);
    jordan.lambda_mul_left(m, &mut tmp);
    let mut out = RealMat::zeros(r, r);
    jordan.lambda_mul_right_t(&tmp, &mut out);
    out
}

/// One predictor–corrector cell update.
#[allow(clippy::too_many_arguments)]
fn pc_cell(
    jordan: &JordanForm,
    input: &CellIn,
    gamma: &RealMat,
    ts: &TransportOps,
    tt: &TransportOps,
    ds: f64,
    dt: f64,
) -> CellOut {
    let half_l = |a: &RealMat, b: &RealMat| {
        let mut s = sandwich(jordan, a);
        s.add_scaled(1.0, &sandwich(jordan, b));
        s.scale(0.5 * ds * dt);
        s
    };
    // predictor
    let mut h0 = gamma.clone();
    h0.scale(0.5 * (input.eta_sw + input.eta_n));
    let mut j0 = gamma.clone();
    j0.scale(0.5 * (input.eta_sw + input.eta_e));
    let mut psi_p = ts.e.mul_dense(input.psi_n);
    psi_p.add_scaled(1.0, &ts.p.mul_dense(&h0));
    let mut phi_p = tt.e.dense_mul_t(input.phi_e);
    phi_p.add_scaled(1.0, &tt.p.dense_mul_t(&j0));
    // K predictor
    let mut k_p = input.k_e.clone();
    k_p.add_scaled(1.0, input.k_n);
    k_p.add_scaled(-1.0, input.k_sw);
    k_p.add_scaled(1.0, &half_l(input.k_e, input.k_n));
    k_p.add_scaled(-0.5 * (input.eta_e + input.eta_n), gamma);
    k_p.add_scaled(1.0, &psi_p);
    k_p.add_scaled(-1.0, input.psi_n);
    k_p.add_scaled(1.0, &phi_p);
    k_p.add_scaled(-1.0, input.phi_e);
    let eta_p = eta_of(&k_p);
    // corrector
    let mut h1 = gamma.clone();
    h1.scale(0.5 * (input.eta_e + eta_p));
    let mut j1 = gamma.clone();
    j1.scale(0.5 * (input.eta_n + eta_p));
    let mut psi = ts.e.mul_dense(input.psi_n);
    psi.add_scaled(1.0, &ts.p.mul_dense(&h0));
    let mut dh = h1;
    dh.add_scaled(-1.0, &h0);
    psi.add_scaled(1.0, &ts.q.mul_dense(&dh));
    let mut phi = tt.e.dense_mul_t(input.phi_e);
    phi.add_scaled(1.0, &tt.p.dense_mul_t(&j0));
    let mut dj = j1;
    dj.add_scaled(-1.0, &j0);
    phi.add_scaled(1.0, &tt.q.dense_mul_t(&dj));
    // corrected K
    let mut k = input.k_e.clone();
    k.add_scaled(1.0, input.k_n);
    k.add_scaled(-1.0, input.k_sw);
    let mut lsum = sandwich(jordan, input.k_sw);
    lsum.add_scaled(1.0, &sandwich(jordan, input.k_e));
    lsum.add_scaled(1.0, &sandwich(jordan, input.k_n));
    lsum.add_scaled(1.0, &sandwich(jordan, &k_p));
    lsum.scale(0.25 * ds * dt);
    k.add_scaled(1.0, &lsum);
    k.add_scaled(
        -0.25 * (input.eta_sw + input.eta_e + input.eta_n + eta_p),
        gamma,
    );
    k.add_scaled(1.0, &psi);
    k.add_scaled(-1.0, input.psi_n);
    k.add_scaled(1.0, &phi);
    k.add_scaled(-1.0, input.phi_e);
    let eta = eta_of(&k);
    CellOut { k, psi, phi, eta }
}

/// First-order stencils: the naive discretization and the
/// exponential-integrator variant for the auxiliary equations.
#[allow(clippy::too_many_arguments)]
fn first_order_cell(
    jordan: &JordanForm,
    input: &CellIn,
    gamma: &RealMat,
    ts: &TransportOps,
    tt: &TransportOps,
    ds: f64,
    dt: f64,
    exponential: bool,
) -> CellOut {
    let (psi, phi) = if exponential {
        let mut psi = ts.e.mul_dense(input.psi_n);
        let mut src = gamma.clone();
        src.scale(input.eta_n);
        psi.add_scaled(1.0, &ts.p.mul_dense(&src));
        let mut phi = tt.e.dense_mul_t(input.phi_e);
        let mut src = gamma.clone();
        src.scale(input.eta_e);
        phi.add_scaled(1.0, &tt.p.dense_mul_t(&src));
        (psi, phi)
    } else {
        // Ψ ← Ψ - Δs Λ Ψ + γ η_n;  Φ ← Φ - Δt Φ Λᵀ + γ η_e
        let mut psi = input.psi_n.clone();
        let mut lpsi = RealMat::zeros(psi.rows, psi.cols);
        jordan.lambda_mul_left(input.psi_n, &mut lpsi);
        psi.add_scaled(-ds, &lpsi);
        psi.add_scaled(input.eta_n, gamma);
        let mut phi = input.phi_e.clone();
        let mut phil = RealMat::zeros(phi.rows, phi.cols);
        jordan.lambda_mul_right_t(input.phi_e, &mut phil);
        phi.add_scaled(-dt, &phil);
        phi.add_scaled(input.eta_e, gamma);
        (psi, phi)
    };
    let mut k = input.k_e.clone();
    k.add_scaled(1.0, input.k_n);
    k.add_scaled(-1.0, input.k_sw);
    let mut lsum = sandwich(jordan, input.k_e);
    lsum.add_scaled(1.0, &sandwich(jordan, input.k_n));
    lsum.scale(0.5 * ds * dt);
    k.add_scaled(1.0, &lsum);
    k.add_scaled(-0.5 * (input.eta_e + input.eta_n), gamma);
    k.add_scaled(1.0, &psi);
    k.add_scaled(-1.0, input.psi_n);
    k.add_scaled(1.0, &phi);
    k.add_scaled(-1.0, input.phi_e);
    let eta = eta_of(&k);
    CellOut { k, psi, phi, eta }
}

pub struct GoursatOptions {
    pub scheme: GoursatScheme,
    /// dyadic refinement level: every cell split `2^λ × 2^λ`
    pub dyadic: usize,
}

impl Default for GoursatOptions {
    fn default() -> Self {
        GoursatOptions {
            scheme: GoursatScheme::PredictorCorrector,
            dyadic: 0,
        }
    }
}

pub struct GoursatRun {
    pub grid: GoursatGrid,
    pub kappa: f64,
    pub ops: u64,
}

/// Solve the Goursat system on the (refined) grids by the anti-diagonal
/// wavefront sweep and return the terminal kernel value.
pub fn run_goursat(
    x: &Path,
    w: &Path,
    data: &FsskData,
    lift: &StaticLift,
    opts: &GoursatOptions,
    counter: Option<&OpCounter>,
) -> Result<GoursatRun, SchemeError> {
    data.validate()?;
    x.validate()?;
    w.validate()?;
    let r = data.state_dim();
    let pieces = 1usize << opts.dyadic;
    let gamma_coarse = gamma_cells(x, w, data, lift)?;
    let (js0, jt0) = (x.segments(), w.segments());
    let (js, jt) = (js0 * pieces, jt0 * pieces);
    let scale = 1.0 / (pieces * pieces) as f64;

    // per-cell widths after refinement (global index -> coarse cell)
    let ds: Vec<f64> = (0..js)
        .map(|i| (x.times[i / pieces + 1] - x.times[i / pieces]) / pieces as f64)
        .collect();
    let dt: Vec<f64> = (0..jt)
        .map(|j| (w.times[j / pieces + 1] - w.times[j / pieces]) / pieces as f64)
        .collect();

    // transports per distinct width
    let mut ts_cache: Vec<(u64, TransportOps)> = Vec::new();
    let mut tt_cache: Vec<(u64, TransportOps)> = Vec::new();
    let lookup = |cache: &mut Vec<(u64, TransportOps)>, jordan: &JordanForm, d: f64| -> usize {
        let key = d.to_bits() & !0xFF;
        if let Some(pos) = cache.iter().position(|(k, _)| *k == key) {
            return pos;
        }
        cache.push((key, TransportOps::new(jordan, d)));
        cache.len() - 1
    };
    let ts_idx: Vec<usize> = ds.iter().map(|&d| lookup(&mut ts_cache, &data.jordan, d)).collect();
    let tt_idx: Vec<usize> = dt.iter().map(|&d| lookup(&mut tt_cache, &data.jordan, d)).collect();

    let mut grid = GoursatGrid::new(js, jt, r);
    let mut ops = 0u64;
    let rho = data.jordan.rho() as u64;
    // anti-diagonal wavefronts: cells (i,j) with i+j = m depend only on
    // wavefronts < m
    for wave in 0..(js + jt - 1) {
        let lo = wave.saturating_sub(jt - 1);
        let hi = wave.min(js - 1);
        for i in lo..=hi {
            let j = wave - i;
            let mut gamma = gamma_coarse[i / pieces][j / pieces].clone();
            gamma.scale(scale);
            let input = CellIn {
                k_sw: &grid.k[i * (jt + 1) + j],
                k_e: &grid.k[(i + 1) * (jt + 1) + j],
                k_n: &grid.k[i * (jt + 1) + j + 1],
                psi_n: &grid.psi[i * (jt + 1) + j + 1],
                phi_e: &grid.phi[(i + 1) * (jt + 1) + j],
                eta_sw: grid.eta[i * (jt + 1) + j],
                eta_e: grid.eta[(i + 1) * (jt + 1) + j],
                eta_n: grid.eta[i * (jt + 1) + j + 1],
            };
            let out = match opts.scheme {
                GoursatScheme::PredictorCorrector => pc_cell(
                    &data.jordan,
                    &input,
                    &gamma,
                    &ts_cache[ts_idx[i]].1,
                    &tt_cache[tt_idx[j]].1,
                    ds[i],
                    dt[j],
                ),
                GoursatScheme::ExpIntegrator => first_order_cell(
                    &data.jordan,
                    &input,
                    &gamma,
                    &ts_cache[ts_idx[i]].1,
                    &tt_cache[tt_idx[j]].1,
                    ds[i],
                    dt[j],
                    true,
                ),
                GoursatScheme::Naive => first_order_cell(
                    &data.jordan,
                    &input,
                    &gamma,
                    &ts_cache[ts_idx[i]].1,
                    &tt_cache[tt_idx[j]].1,
                    ds[i],
                    dt[j],
                    false,
                ),
            };
            let id = (i + 1) * (jt + 1) + j + 1;
            grid.k[id] = out.k;
            grid.psi[id] = out.psi;
            grid.phi[id] = out.phi;
            grid.eta[id] = out.eta;
            // one cell update: Θ(R ρ_Λ) transports + Θ(R²) arithmetic
            ops += 6 * r as u64 * rho + 12 * (r * r) as u64;
        }
    }
    if let Some(c) = counter {
        c.add(ops);
    }
    let kappa = grid.terminal();
    Ok(GoursatRun { grid, kappa, ops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fssk::JordanBlock;
    use crate::paths;
    use crate::quad::classical_signature;
    use approx::assert_abs_diff_eq;

    fn classical_data(d: usize) -> FsskData {
        FsskData {
            jordan: JordanForm::new(vec![JordanBlock::Real { lambda: 0.0, size: 1 }]).unwrap(),
            b: vec![vec![1.0]],
            a_mats: vec![RealMat::identity(d)],
        }
    }

    #[test]
    fn phi12_scalar_values() {
        let jf = JordanForm::new(vec![JordanBlock::Real { lambda: 1.0, size: 1 }]).unwrap();
        // z = -Δλ = -1: φ_1 = 1 - e^{-1}
        let p = phi12_matrix(&jf, 1.0, 1);
        assert_abs_diff_eq!(p.to_dense().get(0, 0), 1.0 - (-1.0f64).exp(), epsilon = 1e-14);
        // Δ -> 0: φ_1 -> 1, φ_2 -> 1/2
        let jf0 = JordanForm::new(vec![JordanBlock::Real { lambda: 0.7, size: 1 }]).unwrap();
        let p = phi12_matrix(&jf0, 1e-12, 1);
        assert_abs_diff_eq!(p.to_dense().get(0, 0), 1.0, epsilon = 1e-10);
        let q = phi12_matrix(&jf0, 1e-12, 2);
        assert_abs_diff_eq!(q.to_dense().get(0, 0), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn phi12_jordan_chain_matches_dense_series_oracle() {
        let jf = JordanForm::new(vec![JordanBlock::Real { lambda: 0.8, size: 2 }]).unwrap();
        let delta = 0.6;
        let p = phi12_matrix(&jf, delta, 1).to_dense();
        // dense oracle: φ_1(B) = Σ B^i/(i+1)! on the dense -ΔΛ
        let mut b = jf.dense_lambda();
        b.scale(-delta);
        let mut term = RealMat::identity(2);
        let mut sum = RealMat::identity(2);
        let mut fact = 1.0; // (i+1)!
        for i in 1..60 {
            term = term.matmul(&b);
            fact *= (i + 1) as f64;
            let mut t = term.clone();
            t.scale(1.0 / fact);
            sum.add_scaled(1.0, &t);
        }
        for (a, bb) in p.data.iter().zip(&sum.data) {
            assert_abs_diff_eq!(a, bb, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_cells_constant_paths_vanish() {
        let data = classical_data(2);
        let x = Path::new(vec![0.0, 0.5, 1.0], vec![vec![1.0, 1.0]; 3]).unwrap();
        let gamma = gamma_cells(&x, &x, &data, &StaticLift::Linear).unwrap();
        for row in &gamma {
            for cell in row {
                assert_eq!(cell.max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn gamma_cells_linear_lift_is_increment_product() {
        let data = classical_data(2);
        let x = Path::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 2.0]],
        )
        .unwrap();
        let w = Path::new(
            vec![0.0, 1.0],
            vec![vec![1.0, 1.0], vec![0.0, 3.0]],
        )
        .unwrap();
        let gamma = gamma_cells(&x, &w, &data, &StaticLift::Linear).unwrap();
        // cell (0,0): <Δx_1, Δw_1> = 1*(-1) + 2*2 = 3
        assert_abs_diff_eq!(gamma[0][0].get(0, 0), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn gram_lift_matches_linear_lift() {
        let data = classical_data(2);
        let (_, x) = paths::generate(3, 1, 4).pop().unwrap();
        let (_, w) = paths::generate(4, 1, 4).pop().unwrap();
        let x = Path::new(x.times.clone(), x.values.iter().map(|v| v[..2].to_vec()).collect()).unwrap();
        let w = Path::new(w.times.clone(), w.values.iter().map(|v| v[..2].to_vec()).collect()).unwrap();
        // Gram table of the linear kernel
        let tab: Vec<Vec<f64>> = x
            .values
            .iter()
            .map(|xi| {
                w.values
                    .iter()
                    .map(|wj| xi.iter().zip(wj).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let tables = vec![vec![tab]];
        let ga = gamma_cells(&x, &w, &data, &StaticLift::Linear).unwrap();
        let gb = gamma_cells(&x, &w, &data, &StaticLift::Gram(&tables)).unwrap();
        for (ra, rb) in ga.iter().zip(&gb) {
            for (ca, cb) in ra.iter().zip(rb) {
                for (u, v) in ca.data.iter().zip(&cb.data) {
                    assert_abs_diff_eq!(u, v, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_gamma_keeps_eta_one() {
        let data = classical_data(2);
        let x = Path::new(vec![0.0, 0.5, 1.0], vec![vec![0.3, -0.4]; 3]).unwrap();
        for scheme in [
            GoursatScheme::PredictorCorrector,
            GoursatScheme::ExpIntegrator,
            GoursatScheme::Naive,
        ] {
            let run = run_goursat(
                &x,
                &x,
                &data,
                &StaticLift::Linear,
                &GoursatOptions { scheme, dyadic: 1 },
                None,
            )
            .unwrap();
            assert_eq!(run.kappa, 1.0);
            assert!(run.grid.k.iter().all(|m| m.max_abs() == 0.0));
        }
    }

    #[test]
    fn boundary_rows_stay_at_initial_values() {
        let data = classical_data(3);
        let (_, x) = paths::generate(9, 1, 6).pop().unwrap();
        let (_, w) = paths::generate(10, 1, 6).pop().unwrap();
        let run = run_goursat(
            &x,
            &w,
            &data,
            &StaticLift::Linear,
            &GoursatOptions::default(),
            None,
        )
        .unwrap();
        let g = &run.grid;
        for i in 0..=g.js {
            assert_eq!(g.k[g.idx(i, 0)].max_abs(), 0.0);
            assert_eq!(g.phi[g.idx(i, 0)].max_abs(), 0.0);
            assert_eq!(g.eta[g.idx(i, 0)], 1.0);
        }
        for j in 0..=g.jt {
            assert_eq!(g.k[g.idx(0, j)].max_abs(), 0.0);
            assert_eq!(g.psi[g.idx(0, j)].max_abs(), 0.0);
            assert_eq!(g.eta[g.idx(0, j)], 1.0);
        }
    }

    #[test]
    fn classical_reduction_converges_to_signature_inner_product() {
        // R=q=1, Λ=0, b=1, A=I: κ must approach ⟨Sig(x), Sig(w)⟩
        let data = classical_data(3);
        let (_, x) = paths::generate(14, 1, 8).pop().unwrap();
        let (_, w) = paths::generate(15, 1, 8).pop().unwrap();
        let id = RealMat::identity(3);
        let sx = classical_signature(&x, &id, 10);
        let sw = classical_signature(&w, &id, 10);
        let kref = sx.dot(&sw);
        let mut prev = f64::INFINITY;
        for lam in 0..3 {
            let run = run_goursat(
                &x,
                &w,
                &data,
                &StaticLift::Linear,
                &GoursatOptions { scheme: GoursatScheme::PredictorCorrector, dyadic: lam },
                None,
            )
            .unwrap();
            let err = (run.kappa - kref).abs();
            assert!(err < prev, "error must decrease: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 1e-6, "final error {prev}");
    }

    #[test]
    fn kernel_is_symmetric_in_its_arguments() {
        let data = FsskData {
            jordan: JordanForm::new(vec![
                JordanBlock::Real { lambda: 0.5, size: 1 },
                JordanBlock::Rotation { a: 0.3, omega: 2.0, size: 1 },
            ])
            .unwrap(),
            b: vec![vec![1.0, 0.5, 0.0], vec![0.2, 0.0, 1.0]],
            a_mats: vec![RealMat::identity(3), {
                let mut a = RealMat::zeros(3, 3);
                a.set(0, 1, 1.0);
                a.set(1, 0, -0.5);
                a.set(2, 2, 0.7);
                a
            }],
        };
        let (_, x) = paths::generate(20, 1, 6).pop().unwrap();
        let (_, w) = paths::generate(21, 1, 6).pop().unwrap();
        let opts = GoursatOptions { scheme: GoursatScheme::PredictorCorrector, dyadic: 2 };
        let ab = run_goursat(&x, &w, &data, &StaticLift::Linear, &opts, None).unwrap();
        let ba = run_goursat(&w, &x, &data, &StaticLift::Linear, &opts, None).unwrap();
        assert_abs_diff_eq!(ab.kappa, ba.kappa, epsilon = 1e-10 * ab.kappa.abs().max(1.0));
    }
}
