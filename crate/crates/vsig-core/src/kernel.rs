//! Scalar kernel families and their Volterra weight tensors.
//!
//! A matrix kernel is declared as `K(t,s) = Σ_p k_p(t,s) A_p` with analytic
//! scalar components. For each family this module evaluates the scalar
//! weights `κ^{n,τ}_{s,t}`, their densities `κ̇`, and the word-indexed
//! coefficient tensors `𝒦^{w,τ}_{s,t}` consumed by the schemes, stored in
//! the normalized form `𝒦/(t-s)^{|w|}` (an extra `(t-s)^ρ` for the
//! ρ-decorated variants).

use crate::fssk::{self, FsskData, JordanBlock, JordanForm};
use crate::mat::RealMat;
use crate::multiindex::MultiIndexSet;
use crate::quadrature;
use crate::special::{gamma_fn, ln_gamma, lower_inc_gamma, reg_inc_beta, varphi_n, SpecialError};
use crate::tensor::{TruncatedTensor, Word};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("({s}, {t}, {tau}) violates s <= t <= tau")]
    BadSimplex { s: f64, t: f64, tau: f64 },
    #[error("invalid kernel parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("unsupported kernel/decoration combination: {0}")]
    Unsupported(String),
    #[error("kernel weights are not permutation-symmetric; use the word-indexed coefficient path")]
    NotSymmetric,
    #[error("piecewise-constant kernel: [{s}, {t}] crosses a kernel grid cell")]
    CrossesCell { s: f64, t: f64 },
    #[error(transparent)]
    Scheme(#[from] Box<crate::SchemeError>),
}

/// Analytic scalar kernel families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarKernel {
    /// `k ≡ c`
    Constant { c: f64 },
    /// `k(δ) = α e^{-λδ}`
    Exponential { alpha: f64, lambda: f64 },
    /// `k(δ) = δ^{β-1}/Γ(β)`
    Fractional { beta: f64 },
    /// `k(δ) = α e^{-λδ} δ^{β-1}/Γ(β)`
    Gamma { alpha: f64, beta: f64, lambda: f64 },
    /// `k(t,s) = b_i^j` on cell `s ∈ [t_{i-1}, t_i)`, `τ ∈ (t_{j-1}, t_j]`
    PiecewiseConstant { grid: Vec<f64>, coeffs: Vec<Vec<f64>> },
    /// `k(δ) = 1ᵀ e^{-Λδ} b`
    StateSpace { jordan: JordanForm, b: Vec<f64> },
}

impl ScalarKernel {
    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            ScalarKernel::Constant { c } => {
                if !c.is_finite() {
                    return Err(KernelError::BadParameter("constant c must be finite".into()));
                }
            }
            ScalarKernel::Exponential { alpha, lambda } => {
                if *alpha <= 0.0 || *lambda < 0.0 {
                    return Err(KernelError::BadParameter(
                        "exponential kernel needs α > 0, λ >= 0".into(),
                    ));
                }
            }
            ScalarKernel::Fractional { beta } => {
                if *beta <= 0.0 {
                    return Err(KernelError::BadParameter("fractional kernel needs β > 0".into()));
                }
            }
            ScalarKernel::Gamma { alpha, beta, lambda } => {
                if *alpha <= 0.0 || *beta <= 0.0 || *lambda <= 0.0 {
                    return Err(KernelError::BadParameter(
                        "Gamma kernel needs α, β, λ > 0".into(),
                    ));
                }
            }
            ScalarKernel::PiecewiseConstant { grid, coeffs } => {
                let j = grid.len().saturating_sub(1);
                if j == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(KernelError::BadParameter(
                        "piecewise-constant grid must be strictly increasing".into(),
                    ));
                }
                if coeffs.len() != j || coeffs.iter().any(|row| row.len() != j) {
                    return Err(KernelError::BadParameter(format!(
                        "piecewise-constant coefficient table must be {j}×{j}"
                    )));
                }
            }
            ScalarKernel::StateSpace { jordan, b } => {
                jordan.validate().map_err(Box::new)?;
                if b.len() != jordan.dim() {
                    return Err(KernelError::BadParameter("state-space b length != R".into()));
                }
                if jordan.min_spectral_real() < 0.0 {
                    return Err(KernelError::BadParameter(
                        "state-space kernel needs spec(Λ) ⊂ [0,∞)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pointwise evaluation `k(t, s)`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let d = t - s;
        match self {
            ScalarKernel::Constant { c } => *c,
            ScalarKernel::Exponential { alpha, lambda } => alpha * (-lambda * d).exp(),
            ScalarKernel::Fractional { beta } => d.powf(beta - 1.0) / gamma_fn(*beta),
            ScalarKernel::Gamma { alpha, beta, lambda } => {
                alpha * (-lambda * d).exp() * d.powf(beta - 1.0) / gamma_fn(*beta)
            }
            ScalarKernel::PiecewiseConstant { grid, coeffs } => {
                let i = cell_of_s(grid, s);
                let j = cell_of_tau(grid, t);
                coeffs[i][j]
            }
            ScalarKernel::StateSpace { jordan, b } => {
                jordan.exp_neg(d).mul_vec(b).iter().sum()
            }
        }
    }

    /// Convolution form (`k(t,s) = k(t-s)`)?
    pub fn is_convolution(&self) -> bool {
        !matches!(self, ScalarKernel::PiecewiseConstant { .. })
    }
}

/// s-cell index: `s ∈ [t_{i-1}, t_i)` (last cell closed).
///
/// The same half-open convention is used for the look-ahead argument,
/// matching the indicator definition of the kernel itself: a boundary
/// look-ahead `τ = t_j` belongs to the cell on its right. This makes the
/// left-point scheme exact, since the interpolated upper-parameter maps
/// are right-continuous at kernel grid points.
fn cell_of_s(grid: &[f64], s: f64) -> usize {
    let j = grid.len() - 1;
    for i in 0..j {
        if s < grid[i + 1] {
            return i;
        }
    }
    j - 1
}

fn cell_of_tau(grid: &[f64], tau: f64) -> usize {
    cell_of_s(grid, tau)
}

// ---------------------------------------------------------------------------
// scalar weights κ, κ̇
// ---------------------------------------------------------------------------

fn check_simplex(s: f64, t: f64, tau: f64) -> Result<(), KernelError> {
    if s <= t && t <= tau + 1e-14 * tau.abs().max(1.0) {
        Ok(())
    } else {
        Err(KernelError::BadSimplex { s, t, tau })
    }
}

/// `κ̇^{n,τ}_{s,t}` in closed form per family.
pub fn kappa_dot(k: &ScalarKernel, n: usize, s: f64, t: f64, tau: f64) -> Result<f64, KernelError> {
    check_simplex(s, t, tau)?;
    assert!(n >= 1);
    if n == 1 {
        return Ok(k.eval(tau, s));
    }
    let d = t - s;
    if d == 0.0 {
        return Ok(0.0);
    }
    let g = tau - s;
    match k {
        ScalarKernel::Constant { c } => {
            Ok(c.powi(n as i32) * d.powi(n as i32 - 1) / factorial(n - 1))
        }
        ScalarKernel::Exponential { alpha, lambda } => Ok((-lambda * g).exp()
            * alpha.powi(n as i32)
            * d.powi(n as i32 - 1)
            / factorial(n - 1)),
        ScalarKernel::Fractional { beta } => {
            let nb = n as f64 * beta;
            let ix = reg_inc_beta(d / g, (n - 1) as f64 * beta, *beta)?;
            Ok(g.powf(nb - 1.0) * ix / gamma_fn(nb))
        }
        ScalarKernel::Gamma { alpha, beta, lambda } => {
            let nb = n as f64 * beta;
            let ix = reg_inc_beta(d / g, (n - 1) as f64 * beta, *beta)?;
            Ok(alpha.powi(n as i32) * (-lambda * g).exp() * g.powf(nb - 1.0) * ix / gamma_fn(nb))
        }
        ScalarKernel::PiecewiseConstant { grid, coeffs } => {
            let i = same_cell(grid, s, t)?;
            let j = cell_of_tau(grid, tau);
            Ok(d.powi(n as i32 - 1) / factorial(n - 1)
                * coeffs[i][i].powi(n as i32 - 1)
                * coeffs[i][j])
        }
        ScalarKernel::StateSpace { jordan, b } => {
            // 1ᵀ φ_{n-1}(t-s) E(τ-t) b with φ via the contour tables
            let table = fssk::eval_phi_psi(d, jordan, std::slice::from_ref(b), n - 1, fssk::DEFAULT_MQUAD)
                .map_err(Box::new)?;
            let phim = table.phi_mat_q1(n - 1); // δ^{-(n-1)} Φ^{1^{n-1}}
            let eb = jordan.exp_neg(tau - t).mul_vec(b);
            let mut acc = 0.0;
            for r in 0..jordan.dim() {
                for c in 0..jordan.dim() {
                    acc += phim.get(r, c) * eb[c];
                }
            }
            Ok(acc * d.powi(n as i32 - 1))
        }
    }
}

/// `κ^{n,τ}_{s,t} = ∫_s^t κ̇^{n,τ}_{u,t} du` in closed or semi-closed form.
pub fn kappa(k: &ScalarKernel, n: usize, s: f64, t: f64, tau: f64) -> Result<f64, KernelError> {
    check_simplex(s, t, tau)?;
    assert!(n >= 1);
    let d = t - s;
    if d == 0.0 {
        return Ok(0.0);
    }
    let g = tau - s;
    match k {
        ScalarKernel::Constant { c } => Ok(c.powi(n as i32) * d.powi(n as i32) / factorial(n)),
        ScalarKernel::Exponential { alpha, lambda } => Ok((-lambda * g).exp()
            * alpha.powi(n as i32)
            * d.powi(n as i32)
            * varphi_n(lambda * d, n)),
        ScalarKernel::Fractional { beta } => {
            let nb = n as f64 * beta;
            let ix = reg_inc_beta(d / g, (n - 1) as f64 * beta + 1.0, *beta)?;
            Ok(g.powf(nb) * ix / gamma_fn(nb + 1.0))
        }
        ScalarKernel::Gamma { alpha, beta, lambda } => {
            if n == 1 {
                // α λ^{-β} [γ(β, λ(τ-s)) - γ(β, λ(τ-t))]/Γ(β)
                let lo = lower_inc_gamma(*beta, lambda * (tau - t))?;
                let hi = lower_inc_gamma(*beta, lambda * g)?;
                return Ok(alpha * lambda.powf(-beta) * (hi - lo) / gamma_fn(*beta));
            }
            if (tau - t).abs() <= 1e-15 * tau.abs().max(1.0) {
                // diagonal closed form: λ^{-nβ} α^n γ(nβ, λ(t-s))/Γ(nβ)
                let nb = n as f64 * beta;
                return Ok(lambda.powf(-nb) * alpha.powi(n as i32)
                    * lower_inc_gamma(nb, lambda * d)?
                    / gamma_fn(nb));
            }
            // semi-explicit integral over the off-diagonal part
            let nb1 = (n - 1) as f64 * beta;
            let pre = lambda.powf(-nb1) * alpha.powi(n as i32 - 1) / gamma_fn(nb1);
            let kern = |u: f64| {
                alpha
                    * (-lambda * (tau - u)).exp()
                    * (tau - u).powf(beta - 1.0)
                    / gamma_fn(*beta)
                    * lower_inc_gamma(nb1, lambda * (u - s)).unwrap_or(f64::NAN)
            };
            let (val, _) = quadrature::integrate(kern, s, t, 1e-11);
            Ok(pre * val)
        }
        ScalarKernel::PiecewiseConstant { grid, coeffs } => {
            let i = same_cell(grid, s, t)?;
            let j = cell_of_tau(grid, tau);
            Ok(d.powi(n as i32) / factorial(n) * coeffs[i][i].powi(n as i32 - 1) * coeffs[i][j])
        }
        ScalarKernel::StateSpace { jordan, b } => {
            let table = fssk::eval_phi_psi(d, jordan, std::slice::from_ref(b), n - 1, fssk::DEFAULT_MQUAD)
                .map_err(Box::new)?;
            let psin = table.psi_row_q1(n); // δ^{-n} 1ᵀΨ^{1^{n-1}}
            let eb = jordan.exp_neg(tau - t).mul_vec(b);
            Ok(psin.iter().zip(&eb).map(|(a, b)| a * b).sum::<f64>() * d.powi(n as i32))
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn same_cell(grid: &[f64], s: f64, t: f64) -> Result<usize, KernelError> {
    let i = cell_of_s(grid, s);
    let tol = 1e-12 * grid[grid.len() - 1].abs().max(1.0);
    if t > grid[i + 1] + tol {
        return Err(KernelError::CrossesCell { s, t });
    }
    Ok(i)
}

// ---------------------------------------------------------------------------
// matrix kernel specs
// ---------------------------------------------------------------------------

/// `K(t,s) = Σ_p k_p(t,s) A_p`.
#[derive(Debug, Clone)]
pub struct MatrixKernelSpec {
    pub components: Vec<(ScalarKernel, RealMat)>,
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    components: Vec<ComponentJson>,
}

#[derive(Serialize, Deserialize)]
struct ComponentJson {
    kernel: ScalarKernel,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

impl MatrixKernelSpec {
    pub fn new(components: Vec<(ScalarKernel, RealMat)>) -> Result<Self, KernelError> {
        if components.is_empty() {
            return Err(KernelError::BadParameter("need q >= 1 components".into()));
        }
        let (m, d) = (components[0].1.rows, components[0].1.cols);
        for (k, a) in &components {
            k.validate()?;
            if (a.rows, a.cols) != (m, d) {
                return Err(KernelError::BadParameter("A matrices must share shape".into()));
            }
        }
        Ok(MatrixKernelSpec { components })
    }

    /// Scalar kernel acting as `k · I_d`.
    pub fn scalar(kernel: ScalarKernel, dim: usize) -> Result<Self, KernelError> {
        Self::new(vec![(kernel, RealMat::identity(dim))])
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components[0].1.rows
    }

    pub fn input_dim(&self) -> usize {
        self.components[0].1.cols
    }

    pub fn is_convolution(&self) -> bool {
        self.components.iter().all(|(k, _)| k.is_convolution())
    }

    /// All supported families have permutation-symmetric weights
    /// (convolution form or piecewise constant).
    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Transformed increments `y_p = A_p Δx`.
    pub fn apply_maps(&self, dx: &[f64]) -> Vec<Vec<f64>> {
        self.components.iter().map(|(_, a)| a.mul_vec(dx)).collect()
    }

    pub fn from_json(s: &str) -> Result<Self, KernelError> {
        let parsed: SpecJson = serde_json::from_str(s)
            .map_err(|e| KernelError::BadParameter(format!("bad KernelSpec JSON: {e}")))?;
        Self::new(
            parsed
                .components
                .into_iter()
                .map(|c| (c.kernel, RealMat::from_rows(&c.a)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let components = self
            .components
            .iter()
            .map(|(k, a)| ComponentJson {
                kernel: k.clone(),
                a: (0..a.rows).map(|i| a.data[i * a.cols..(i + 1) * a.cols].to_vec()).collect(),
            })
            .collect();
        serde_json::to_string(&SpecJson { components }).expect("serialization cannot fail")
    }

    /// View the components as one combined finite-state-space kernel, when
    /// all components are exponential or state-space.
    pub fn as_state_space(&self) -> Option<(JordanForm, Vec<Vec<f64>>)> {
        let mut blocks = Vec::new();
        let mut dims = Vec::new();
        for (k, _) in &self.components {
            match k {
                ScalarKernel::Exponential { lambda, .. } => {
                    blocks.push(JordanBlock::Real { lambda: *lambda, size: 1 });
                    dims.push(1);
                }
                ScalarKernel::StateSpace { jordan, .. } => {
                    dims.push(jordan.dim());
                    blocks.extend(jordan.blocks.iter().cloned());
                }
                _ => return None,
            }
        }
        let jordan = JordanForm { blocks };
        let r = jordan.dim();
        let mut bs = Vec::with_capacity(self.q());
        let mut off = 0;
        for (idx, (k, _)) in self.components.iter().enumerate() {
            let mut b = vec![0.0; r];
            match k {
                ScalarKernel::Exponential { alpha, .. } => b[off] = *alpha,
                ScalarKernel::StateSpace { b: bk, .. } => {
                    b[off..off + dims[idx]].copy_from_slice(bk)
                }
                _ => unreachable!(),
            }
            bs.push(b);
            off += dims[idx];
        }
        Some((jordan, bs))
    }

    /// Promote to full state-space kernel data (for the exact recursion).
    pub fn to_fssk_data(&self) -> Option<FsskData> {
        let (jordan, b) = self.as_state_space()?;
        Some(FsskData {
            jordan,
            b,
            a_mats: self.components.iter().map(|(_, a)| a.clone()).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// symmetric α tables and coefficient tensors
// ---------------------------------------------------------------------------

/// Normalized symmetric weights `α_p(ℓ) = 𝒦^{w(ℓ)p,τ}_{s,t} (t-s)^{-|ℓ|-1}`
/// for all `|ℓ| <= max_ell`, with a `(t-s)^ρ` decoration factor removed as
/// well when `ρ > 0`.
#[derive(Debug, Clone)]
pub struct SymmetricAlpha {
    pub q: usize,
    pub max_ell: usize,
    pub rho: f64,
    /// `alpha[|ℓ|][rank][p]`
    pub alpha: Vec<Vec<Vec<f64>>>,
}

impl SymmetricAlpha {
    pub fn mset(&self) -> MultiIndexSet {
        MultiIndexSet::new(self.q, self.max_ell)
    }
}

enum FamilyClass {
    /// every component is `c_p · k_{β_p}` (constant = β 1, amplitude c)
    Fractional { betas: Vec<f64>, amps: Vec<f64> },
    /// every component is exponential/state-space: combined (Λ, b_p)
    StateSpace { jordan: JordanForm, b: Vec<Vec<f64>> },
    /// all components piecewise constant on a shared grid
    PiecewiseConstant { grid: Vec<f64>, coeffs: Vec<Vec<Vec<f64>>> },
    /// scalar Gamma kernel (evaluated through κ directly)
    GammaScalar,
}

fn classify(spec: &MatrixKernelSpec) -> Result<FamilyClass, KernelError> {
    let all_frac = spec.components.iter().all(|(k, _)| {
        matches!(k, ScalarKernel::Fractional { .. } | ScalarKernel::Constant { .. })
    });
    if all_frac {
        let mut betas = Vec::new();
        let mut amps = Vec::new();
        for (k, _) in &spec.components {
            match k {
                ScalarKernel::Fractional { beta } => {
                    betas.push(*beta);
                    amps.push(1.0);
                }
                ScalarKernel::Constant { c } => {
                    betas.push(1.0);
                    amps.push(*c);
                }
                _ => unreachable!(),
            }
        }
        return Ok(FamilyClass::Fractional { betas, amps });
    }
    if let Some((jordan, b)) = spec.as_state_space() {
        return Ok(FamilyClass::StateSpace { jordan, b });
    }
    let all_pcws = spec
        .components
        .iter()
        .all(|(k, _)| matches!(k, ScalarKernel::PiecewiseConstant { .. }));
    if all_pcws {
        let mut grid: Option<Vec<f64>> = None;
        let mut coeffs = Vec::new();
        for (k, _) in &spec.components {
            if let ScalarKernel::PiecewiseConstant { grid: g, coeffs: c } = k {
                match &grid {
                    None => grid = Some(g.clone()),
                    Some(g0) if g0 == g => {}
                    _ => {
                        return Err(KernelError::Unsupported(
                            "piecewise-constant components must share one grid".into(),
                        ))
                    }
                }
                coeffs.push(c.clone());
            }
        }
        return Ok(FamilyClass::PiecewiseConstant { grid: grid.unwrap(), coeffs });
    }
    if spec.q() == 1 && matches!(spec.components[0].0, ScalarKernel::Gamma { .. }) {
        return Ok(FamilyClass::GammaScalar);
    }
    Err(KernelError::Unsupported(
        "no closed weight formula for this combination of scalar components; \
         supported: all fractional/constant, all exponential/state-space, \
         all piecewise-constant on one grid, or a single Gamma kernel"
            .into(),
    ))
}

/// Symmetric weight table for the shuffle-recursive scheme subroutines.
///
/// `rho = 0` gives the plain weights; `rho > 0` appends the lower-boundary
/// decoration kernel `k_ρ(t,s) = (t-s)^ρ` (fractional/constant families only).
pub fn symmetric_alpha(
    spec: &MatrixKernelSpec,
    s: f64,
    t: f64,
    tau: f64,
    max_ell: usize,
    rho: f64,
) -> Result<SymmetricAlpha, KernelError> {
    check_simplex(s, t, tau)?;
    if !spec.is_symmetric() {
        return Err(KernelError::NotSymmetric);
    }
    let q = spec.q();
    let mset = MultiIndexSet::new(q, max_ell);
    let d = t - s;
    let g = tau - s;
    let mut alpha: Vec<Vec<Vec<f64>>> = (0..=max_ell)
        .map(|deg| vec![vec![0.0; q]; mset.at_degree(deg).len()])
        .collect();
    if d == 0.0 {
        return Ok(SymmetricAlpha { q, max_ell, rho, alpha });
    }
    match classify(spec)? {
        FamilyClass::Fractional { betas, amps } => {
            // Undecorated: the plain weight
            //   𝒦^{w p,τ} = (Π amps) I_x(Σ_w β + 1, β_p) g^{Σβ+β_p} / Γ(Σβ+β_p+1).
            // Decorated (ρ > 0): the scheme consumes
            //   ∫_u^v (s-u)^ρ 𝒦̇^{wp,τ}_{s,v} ds,
            // i.e. the *dotted* weight of the word extended by the
            // lower-boundary kernel k_ρ = Γ(ρ+1) k_{ρ+1}:
            //   Γ(ρ+1) (Π amps) I_x(ρ+1+Σ_w β, β_p) g^{ρ+Σβ+β_p} / Γ(ρ+1+Σβ+β_p).
            let decorated = rho > 0.0;
            let (b0, amp0) = if decorated { (rho + 1.0, gamma_fn(rho + 1.0)) } else { (0.0, 1.0) };
            let x = d / g;
            for deg in 0..=max_ell {
                for (rank, ell) in mset.at_degree(deg).iter().enumerate() {
                    let mut bsum = b0;
                    let mut amp = amp0;
                    for (p, &lp) in ell.iter().enumerate() {
                        bsum += lp as f64 * betas[p];
                        amp *= amps[p].powi(lp as i32);
                    }
                    for p in 0..q {
                        let first = if decorated { bsum } else { bsum + 1.0 };
                        let btot = bsum + betas[p];
                        let (pow_g, ln_norm) = if decorated {
                            (btot - 1.0, ln_gamma(btot))
                        } else {
                            (btot, ln_gamma(btot + 1.0))
                        };
                        let ix = if x == 1.0 {
                            1.0
                        } else {
                            reg_inc_beta(x, first, betas[p])?
                        };
                        let val = amp * amps[p] * ix * (g.ln() * pow_g - ln_norm).exp();
                        // normalize by d^{|w|} (and d^ρ when decorated)
                        let w_len = deg as f64 + 1.0;
                        alpha[deg][rank][p] = val / d.powf(w_len + rho);
                    }
                }
            }
        }
        FamilyClass::StateSpace { jordan, b } => {
            if rho != 0.0 {
                return Err(KernelError::Unsupported(
                    "ρ-decorated weights are closed-form for fractional/constant \
                     components only; exponential/state-space kernels support ρ = 0"
                        .into(),
                ));
            }
            let table = fssk::eval_phi_psi(d, &jordan, &b, max_ell, fssk::DEFAULT_MQUAD)
                .map_err(Box::new)?;
            let gap = tau - t;
            let ebs: Vec<Vec<f64>> = if gap == 0.0 {
                b.clone()
            } else {
                let e = jordan.exp_neg(gap);
                b.iter().map(|bp| e.mul_vec(bp)).collect()
            };
            for deg in 0..=max_ell {
                for rank in 0..mset.at_degree(deg).len() {
                    let psi = &table.psi[deg][rank];
                    for p in 0..q {
                        alpha[deg][rank][p] =
                            psi.iter().zip(&ebs[p]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
        }
        FamilyClass::PiecewiseConstant { grid, coeffs } => {
            if rho != 0.0 {
                return Err(KernelError::Unsupported(
                    "ρ-decorated weights are closed-form for fractional/constant \
                     components only; piecewise-constant kernels support ρ = 0"
                        .into(),
                ));
            }
            let i = same_cell(&grid, s, t)?;
            let j = cell_of_tau(&grid, tau);
            for deg in 0..=max_ell {
                for (rank, ell) in mset.at_degree(deg).iter().enumerate() {
                    let mut prod = 1.0;
                    for (p, &lp) in ell.iter().enumerate() {
                        prod *= coeffs[p][i][i].powi(lp as i32);
                    }
                    let n = deg + 1;
                    for p in 0..q {
                        alpha[deg][rank][p] = prod * coeffs[p][i][j] / factorial(n);
                    }
                }
            }
        }
        FamilyClass::GammaScalar => {
            if rho != 0.0 {
                return Err(KernelError::Unsupported(
                    "ρ-decorated weights are closed-form for fractional/constant \
                     components only; the Gamma kernel supports ρ = 0"
                        .into(),
                ));
            }
            let k = &spec.components[0].0;
            for deg in 0..=max_ell {
                let n = deg + 1;
                alpha[deg][0][0] = kappa(k, n, s, t, tau)? / d.powi(n as i32);
            }
        }
    }
    Ok(SymmetricAlpha { q, max_ell, rho, alpha })
}

/// Kernel weight tensor over the component alphabet: word coefficient
/// `𝒦^{w,τ}_{s,t}/(t-s)^{|w|+ρ}`, metadata included.
#[derive(Debug, Clone)]
pub struct CoeffTensor {
    pub tensor: TruncatedTensor,
    pub s: f64,
    pub t: f64,
    pub tau: f64,
    pub rho: f64,
}

/// All word coefficients `|w| <= trunc`, expanded from the symmetric table
/// (every supported family is permutation-symmetric in all but the last
/// letter).
pub fn coeff_tensor(
    spec: &MatrixKernelSpec,
    s: f64,
    t: f64,
    tau: f64,
    trunc: usize,
    rho: f64,
) -> Result<CoeffTensor, KernelError> {
    let q = spec.q();
    let alpha = symmetric_alpha(spec, s, t, tau, trunc.saturating_sub(1), rho)?;
    let mset = alpha.mset();
    let mut tensor = TruncatedTensor::zero(q, trunc);
    for n in 1..=trunc {
        let lvl = tensor.level_mut(n);
        for (idx, slot) in lvl.iter_mut().enumerate() {
            let w = Word::from_index(idx, n, q);
            let prefix_freq = MultiIndexSet::frequencies(&w.0[..n - 1], q);
            let rank = mset.rank(&prefix_freq).expect("prefix enumerated");
            let p = w.0[n - 1] - 1;
            *slot = alpha.alpha[n - 1][rank][p];
        }
    }
    Ok(CoeffTensor { tensor, s, t, tau, rho })
}
