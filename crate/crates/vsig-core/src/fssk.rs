//! Exact Volterra signatures for finite-state-space kernels.
//!
//! Scalar kernels of exponential-polynomial-trigonometric type can be
//! written as `k_p(t,s) = 1ᵀ e^{-Λ(t-s)} b_p` with `-Λ` in real Jordan
//! normal form. For such kernels the signature weights factorize into
//! matrix products of two coefficient families,
//!
//! ```text
//!   Φ^w(δ)  (matrix)    and    1ᵀ Ψ^w(δ)  (row),
//! ```
//!
//! evaluated here by quadrature of their Laplace contour representations on
//! an optimized parabolic contour. The signature itself is then produced by
//! a single sweep of the state recursion
//!
//! ```text
//!   Z^p_j = Z^p_{j-1}.E(δ_j) + (1ᵀ.F + Σ_l Z^l_{j-1}.G^l) ⊗ y_j^p ,
//! ```
//!
//! with a linear readout `1 + Σ_p Z^p.E(τ-t)b_p`.

use crate::counter::{cost, OpCounter};
use crate::mat::RealMat;
use crate::multiindex::MultiIndexSet;
use crate::paths::Path;
use crate::tensor::TruncatedTensor;
use crate::tmatrix::TensorMatrix;
use crate::SchemeError;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

// ---------------------------------------------------------------------------
// real Jordan form
// ---------------------------------------------------------------------------

/// One diagonal block of `-Λ` in real Jordan normal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum JordanBlock {
    /// `J_size(-lambda)`: eigenvalue `-lambda`, chain length `size`.
    #[serde(rename = "real")]
    Real { lambda: f64, size: usize },
    /// `J_size(-a, omega)`: complex pair `-a ± iω`, `size` 2×2 cells.
    #[serde(rename = "rot")]
    Rotation { a: f64, omega: f64, size: usize },
}

impl JordanBlock {
    pub fn dim(&self) -> usize {
        match self {
            JordanBlock::Real { size, .. } => *size,
            JordanBlock::Rotation { size, .. } => 2 * size,
        }
    }
}

/// `Λ ∈ R^{R×R}` with `-Λ` in real Jordan normal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanForm {
    pub blocks: Vec<JordanBlock>,
}

/// Block-diagonal dense matrix (transport operators, `E(δ)`, `φ_i(-δΛ)`).
#[derive(Debug, Clone)]
pub struct BlockDiagMat {
    pub dim: usize,
    /// (row/col offset, dense block)
    pub blocks: Vec<(usize, RealMat)>,
}

impl JordanForm {
    pub fn new(blocks: Vec<JordanBlock>) -> Result<Self, SchemeError> {
        let jf = JordanForm { blocks };
        jf.validate()?;
        Ok(jf)
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    /// Structural validation. Duplicate eigenvalues across blocks are
    /// allowed (Λ = 0 in dimension R >= 2 needs them, and multi-component
    /// kernels may share rates); canonical-form uniqueness is only enforced
    /// where it matters, in [`prony_to_jordan`].
    pub fn validate(&self) -> Result<(), SchemeError> {
        if self.blocks.is_empty() {
            return Err(SchemeError::Invalid("Jordan form needs >= 1 block".into()));
        }
        for b in &self.blocks {
            match b {
                JordanBlock::Real { lambda, size } => {
                    if *size == 0 {
                        return Err(SchemeError::Invalid("zero-size Jordan block".into()));
                    }
                    if !lambda.is_finite() {
                        return Err(SchemeError::Invalid("non-finite eigenvalue".into()));
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    if *size == 0 {
                        return Err(SchemeError::Invalid("zero-size Jordan block".into()));
                    }
                    if !a.is_finite() || !omega.is_finite() {
                        return Err(SchemeError::Invalid("non-finite rotation parameters".into()));
                    }
                    if *omega <= 0.0 {
                        return Err(SchemeError::Invalid("rotation block needs ω > 0".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest real part in `spec(Λ)`.
    pub fn min_spectral_real(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                JordanBlock::Real { lambda, .. } => *lambda,
                JordanBlock::Rotation { a, .. } => *a,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum of squared block dimensions (`ρ_Λ` in the cost analysis).
    pub fn rho(&self) -> usize {
        self.blocks.iter().map(|b| b.dim() * b.dim()).sum()
    }

    /// `E(δ) = e^{-Λδ}` evaluated blockwise in closed form.
    pub fn exp_neg(&self, delta: f64) -> BlockDiagMat {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for b in &self.blocks {
            let dim = b.dim();
            let mut blk = RealMat::zeros(dim, dim);
            match b {
                JordanBlock::Real { lambda, size } => {
                    let e = (-lambda * delta).exp();
                    let mut pw = e; // e^{-λδ} δ^k / k!
                    for k in 0..*size {
                        for r in 0..size - k {
                            blk.set(r, r + k, pw);
                        }
                        pw *= delta / (k + 1) as f64;
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    let e = (-a * delta).exp();
                    let (s, c) = (omega * delta).sin_cos();
                    // 2x2 cell on the k-th superdiagonal: e^{-aδ} δ^k/k! · Rot(ωδ)
                    let mut pw = e;
                    for k in 0..*size {
                        for r in 0..size - k {
                            let (i0, j0) = (2 * r, 2 * (r + k));
                            blk.set(i0, j0, pw * c);
                            blk.set(i0, j0 + 1, -pw * s);
                            blk.set(i0 + 1, j0, pw * s);
                            blk.set(i0 + 1, j0 + 1, pw * c);
                        }
                        pw *= delta / (k + 1) as f64;
                    }
                }
            }
            blocks.push((off, blk));
            off += dim;
        }
        BlockDiagMat { dim: off, blocks }
    }

    /// The dense matrix `Λ` itself (for oracles and small problems).
    pub fn dense_lambda(&self) -> RealMat {
        let r = self.dim();
        let mut out = RealMat::zeros(r, r);
        let mut off = 0;
        for b in &self.blocks {
            match b {
                JordanBlock::Real { lambda, size } => {
                    // -Λ block = J(-λ): diag -λ, superdiag +1  =>  Λ: diag λ, superdiag -1
                    for k in 0..*size {
                        out.set(off + k, off + k, *lambda);
                        if k + 1 < *size {
                            out.set(off + k, off + k + 1, -1.0);
                        }
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    for k in 0..*size {
                        let i0 = off + 2 * k;
                        out.set(i0, i0, *a);
                        out.set(i0, i0 + 1, *omega);
                        out.set(i0 + 1, i0, -*omega);
                        out.set(i0 + 1, i0 + 1, *a);
                        if k + 1 < *size {
                            out.set(i0, i0 + 2, -1.0);
                            out.set(i0 + 1, i0 + 3, -1.0);
                        }
                    }
                }
            }
            off += b.dim();
        }
        out
    }

    /// Solve `(ζ I + δΛ) u = rhs` by blockwise back substitution.
    pub fn solve_shifted(&self, zeta: Complex64, delta: f64, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut u = rhs.to_vec();
        let mut off = 0;
        for b in &self.blocks {
            match b {
                JordanBlock::Real { lambda, size } => {
                    // diag ζ + δλ, superdiag -δ
                    let d = zeta + delta * lambda;
                    let mm = *size;
                    u[off + mm - 1] /= d;
                    for k in (0..mm - 1).rev() {
                        let v = u[off + k] + delta * u[off + k + 1];
                        u[off + k] = v / d;
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    // diag cell [[p, q], [-q, p]] with p = ζ+δa, q = δω; superdiag -δ I₂
                    let p = zeta + delta * a;
                    let q = delta * omega;
                    let det = p * p + q * q;
                    let mm = *size;
                    let solve_cell = |r1: Complex64, r2: Complex64| {
                        ((p * r1 - q * r2) / det, (q * r1 + p * r2) / det)
                    };
                    let base = off + 2 * (mm - 1);
                    let (x1, x2) = solve_cell(u[base], u[base + 1]);
                    u[base] = x1;
                    u[base + 1] = x2;
                    for k in (0..mm - 1).rev() {
                        let base = off + 2 * k;
                        let r1 = u[base] + delta * u[base + 2];
                        let r2 = u[base + 1] + delta * u[base + 3];
                        let (x1, x2) = solve_cell(r1, r2);
                        u[base] = x1;
                        u[base + 1] = x2;
                    }
                }
            }
            off += b.dim();
        }
        u
    }

    /// Solve `(ζ I + δΛ)ᵀ r = rhs` by blockwise forward substitution.
    pub fn solve_shifted_t(&self, zeta: Complex64, delta: f64, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut u = rhs.to_vec();
        let mut off = 0;
        for b in &self.blocks {
            match b {
                JordanBlock::Real { lambda, size } => {
                    let d = zeta + delta * lambda;
                    let mm = *size;
                    u[off] /= d;
                    for k in 1..mm {
                        let v = u[off + k] + delta * u[off + k - 1];
                        u[off + k] = v / d;
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    // transposed diag cell [[p, -q], [q, p]]; subdiag -δ I₂
                    let p = zeta + delta * a;
                    let q = delta * omega;
                    let det = p * p + q * q;
                    let mm = *size;
                    let solve_cell_t = |r1: Complex64, r2: Complex64| {
                        ((p * r1 + q * r2) / det, (-q * r1 + p * r2) / det)
                    };
                    let (x1, x2) = solve_cell_t(u[off], u[off + 1]);
                    u[off] = x1;
                    u[off + 1] = x2;
                    for k in 1..mm {
                        let base = off + 2 * k;
                        let r1 = u[base] + delta * u[base - 2];
                        let r2 = u[base + 1] + delta * u[base - 1];
                        let (x1, x2) = solve_cell_t(r1, r2);
                        u[base] = x1;
                        u[base + 1] = x2;
                    }
                }
            }
            off += b.dim();
        }
        u
    }

    /// `out += Λ · m` using the bidiagonal block structure, `O(R²)`.
    pub fn lambda_mul_left(&self, m: &RealMat, out: &mut RealMat) {
        let r = self.dim();
        debug_assert_eq!(m.rows, r);
        let cols = m.cols;
        let mut off = 0;
        for b in &self.blocks {
            match b {
                JordanBlock::Real { lambda, size } => {
                    for k in 0..*size {
                        let row = off + k;
                        for j in 0..cols {
                            let mut v = lambda * m.get(row, j);
                            if k + 1 < *size {
                                v -= m.get(row + 1, j);
                            }
                            out.data[row * cols + j] += v;
                        }
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    for k in 0..*size {
                        let r0 = off + 2 * k;
                        for j in 0..cols {
                            let m0 = m.get(r0, j);
                            let m1 = m.get(r0 + 1, j);
                            let mut v0 = a * m0 + omega * m1;
                            let mut v1 = -omega * m0 + a * m1;
                            if k + 1 < *size {
                                v0 -= m.get(r0 + 2, j);
                                v1 -= m.get(r0 + 3, j);
                            }
                            out.data[r0 * cols + j] += v0;
                            out.data[(r0 + 1) * cols + j] += v1;
                        }
                    }
                }
            }
            off += b.dim();
        }
    }

    /// `out += m · Λᵀ`, `O(R²)`.
    pub fn lambda_mul_right_t(&self, m: &RealMat, out: &mut RealMat) {
        // (m Λᵀ)_{ij} = Σ_k m_{ik} Λ_{jk}: column view of lambda_mul_left.
        let r = self.dim();
        debug_assert_eq!(m.cols, r);
        let rows = m.rows;
        let mut off = 0;
        for b in &self.blocks {
            match b {
                JordanBlock::Real { lambda, size } => {
                    for k in 0..*size {
                        let col = off + k;
                        for i in 0..rows {
                            let mut v = lambda * m.get(i, col);
                            if k + 1 < *size {
                                v -= m.get(i, col + 1);
                            }
                            out.data[i * r + col] += v;
                        }
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    for k in 0..*size {
                        let c0 = off + 2 * k;
                        for i in 0..rows {
                            let m0 = m.get(i, c0);
                            let m1 = m.get(i, c0 + 1);
                            let mut v0 = a * m0 + omega * m1;
                            let mut v1 = -omega * m0 + a * m1;
                            if k + 1 < *size {
                                v0 -= m.get(i, c0 + 2);
                                v1 -= m.get(i, c0 + 3);
                            }
                            out.data[i * r + c0] += v0;
                            out.data[i * r + c0 + 1] += v1;
                        }
                    }
                }
            }
            off += b.dim();
        }
    }

    /// `φ_p(-δΛ)` evaluated blockwise by the (entire) matrix power series
    /// `Σ_i B^i/(i+p)!`.
    pub fn phi_matrix(&self, p: usize, delta: f64) -> BlockDiagMat {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for b in &self.blocks {
            let dim = b.dim();
            // local dense copy of -δΛ
            let mut local = RealMat::zeros(dim, dim);
            match b {
                JordanBlock::Real { lambda, size } => {
                    for k in 0..*size {
                        local.set(k, k, -delta * lambda);
                        if k + 1 < *size {
                            local.set(k, k + 1, delta);
                        }
                    }
                }
                JordanBlock::Rotation { a, omega, size } => {
                    for k in 0..*size {
                        let i0 = 2 * k;
                        local.set(i0, i0, -delta * a);
                        local.set(i0, i0 + 1, -delta * omega);
                        local.set(i0 + 1, i0, delta * omega);
                        local.set(i0 + 1, i0 + 1, -delta * a);
                        if k + 1 < *size {
                            local.set(i0, i0 + 2, delta);
                            local.set(i0 + 1, i0 + 3, delta);
                        }
                    }
                }
            }
            blocks.push((off, phi_series(&local, p)));
            off += dim;
        }
        BlockDiagMat { dim: off, blocks }
    }
}

/// `φ_p(B) = Σ_{i>=0} B^i / (i+p)!` for a small dense block.
fn phi_series(b: &RealMat, p: usize) -> RealMat {
    let n = b.rows;
    let mut fact = 1.0;
    for k in 1..=p {
        fact *= k as f64;
    }
    let mut term = RealMat::identity(n);
    term.scale(1.0 / fact);
    let mut sum = term.clone();
    for i in 1..200 {
        term = term.matmul(b);
        term.scale(1.0 / (i + p) as f64);
        sum.add_scaled(1.0, &term);
        if term.max_abs() <= 1e-18 * sum.max_abs().max(1e-300) {
            break;
        }
    }
    sum
}

impl BlockDiagMat {
    pub fn to_dense(&self) -> RealMat {
        let mut out = RealMat::zeros(self.dim, self.dim);
        for (off, blk) in &self.blocks {
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    out.set(off + i, off + j, blk.get(i, j));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (off, blk) in &self.blocks {
            for i in 0..blk.rows {
                let mut acc = 0.0;
                for j in 0..blk.cols {
                    acc += blk.get(i, j) * v[off + j];
                }
                out[off + i] = acc;
            }
        }
        out
    }

    /// `self · m` for dense `m`, block-aware (`Θ(R ρ_Λ)` per column set).
    pub fn mul_dense(&self, m: &RealMat) -> RealMat {
        debug_assert_eq!(m.rows, self.dim);
        let mut out = RealMat::zeros(self.dim, m.cols);
        for (off, blk) in &self.blocks {
            for i in 0..blk.rows {
                for k in 0..blk.cols {
                    let a = blk.get(i, k);
                    if a == 0.0 {
                        continue;
                    }
                    let src = (off + k) * m.cols;
                    let dst = (off + i) * m.cols;
                    for j in 0..m.cols {
                        out.data[dst + j] += a * m.data[src + j];
                    }
                }
            }
        }
        out
    }

    /// `m · selfᵀ` for dense `m`.
    pub fn dense_mul_t(&self, m: &RealMat) -> RealMat {
        debug_assert_eq!(m.cols, self.dim);
        let mut out = RealMat::zeros(m.rows, self.dim);
        for (off, blk) in &self.blocks {
            for i in 0..m.rows {
                for k in 0..blk.cols {
                    let src = m.get(i, off + k);
                    if src == 0.0 {
                        continue;
                    }
                    for j in 0..blk.rows {
                        // (m Bᵀ)_{i, off+j} += m_{i, off+k} B_{j,k}
                        out.data[i * self.dim + off + j] += src * blk.get(j, k);
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Prony scalar form
// ---------------------------------------------------------------------------

/// Scalar exponential-polynomial-trigonometric kernel parameters:
/// `k(δ) = Σ_r e^{-λ_r δ} Σ_ℓ δ^{ℓ-1}/(ℓ-1)! α_{r,ℓ}`
/// `      + Σ_r e^{-a_r δ} Σ_ℓ δ^{ℓ-1}/(ℓ-1)! (β_{r,ℓ} cos ω_r δ + d_{r,ℓ} sin ω_r δ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PronyForm {
    #[serde(default)]
    pub real_terms: Vec<PronyRealTerm>,
    #[serde(default)]
    pub osc_terms: Vec<PronyOscTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PronyRealTerm {
    pub lambda: f64,
    /// `alpha[ℓ-1] = α_{r,ℓ}`, degree = alpha.len()
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PronyOscTerm {
    pub a: f64,
    pub omega: f64,
    pub cos_coeff: Vec<f64>,
    pub sin_coeff: Vec<f64>,
}

impl PronyForm {
    /// Evaluate the scalar kernel at lag `δ` directly from the parameters.
    pub fn eval(&self, delta: f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.real_terms {
            let e = (-t.lambda * delta).exp();
            let mut pw = 1.0;
            for (l, &a) in t.alpha.iter().enumerate() {
                acc += e * pw * a;
                pw *= delta / (l + 1) as f64;
            }
        }
        for t in &self.osc_terms {
            let e = (-t.a * delta).exp();
            let (s, c) = (t.omega * delta).sin_cos();
            let mut pw = 1.0;
            for l in 0..t.cos_coeff.len().max(t.sin_coeff.len()) {
                let bc = t.cos_coeff.get(l).copied().unwrap_or(0.0);
                let bs = t.sin_coeff.get(l).copied().unwrap_or(0.0);
                acc += e * pw * (bc * c + bs * s);
                pw *= delta / (l + 1) as f64;
            }
        }
        acc
    }
}

/// Telescoped construction of `(Λ, b)` with `1ᵀ e^{-Λδ} b` reproducing the
/// declared Prony form. Rates must be pairwise distinct (merge terms that
/// share one).
pub fn prony_to_jordan(form: &PronyForm) -> Result<(JordanForm, Vec<f64>), SchemeError> {
    for i in 0..form.real_terms.len() {
        for j in i + 1..form.real_terms.len() {
            if form.real_terms[i].lambda == form.real_terms[j].lambda {
                return Err(SchemeError::Invalid(format!(
                    "duplicate rate {} across real Prony terms",
                    form.real_terms[i].lambda
                )));
            }
        }
    }
    for i in 0..form.osc_terms.len() {
        for j in i + 1..form.osc_terms.len() {
            if (form.osc_terms[i].a, form.osc_terms[i].omega)
                == (form.osc_terms[j].a, form.osc_terms[j].omega)
            {
                return Err(SchemeError::Invalid(
                    "duplicate (a, ω) pair across oscillatory Prony terms".into(),
                ));
            }
        }
    }
    let mut blocks = Vec::new();
    let mut b = Vec::new();
    for t in &form.real_terms {
        let m = t.alpha.len();
        if m == 0 {
            return Err(SchemeError::Invalid("real Prony term of degree 0".into()));
        }
        blocks.push(JordanBlock::Real {
            lambda: t.lambda,
            size: m,
        });
        for l in 0..m {
            let next = t.alpha.get(l + 1).copied().unwrap_or(0.0);
            b.push(t.alpha[l] - next);
        }
    }
    for t in &form.osc_terms {
        let m = t.cos_coeff.len().max(t.sin_coeff.len());
        if m == 0 {
            return Err(SchemeError::Invalid("oscillatory Prony term of degree 0".into()));
        }
        blocks.push(JordanBlock::Rotation {
            a: t.a,
            omega: t.omega,
            size: m,
        });
        let beta = |l: usize| t.cos_coeff.get(l).copied().unwrap_or(0.0);
        let del = |l: usize| t.sin_coeff.get(l).copied().unwrap_or(0.0);
        for j in 1..=2 * m {
            let l = j.div_ceil(2) - 1; // ℓ-1, zero based
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let bb = beta(l) - beta(l + 1);
            let dd = del(l) - del(l + 1);
            b.push(0.5 * (bb + sign * dd));
        }
    }
    let jf = JordanForm::new(blocks)?;
    Ok((jf, b))
}

// ---------------------------------------------------------------------------
// kernel data and Φ/Ψ coefficient tables
// ---------------------------------------------------------------------------

/// Finite-state-space kernel data: `K(t,s) = Σ_p (1ᵀ e^{-Λ(t-s)} b_p) A_p`.
#[derive(Debug, Clone)]
pub struct FsskData {
    pub jordan: JordanForm,
    /// q vectors of length R
    pub b: Vec<Vec<f64>>,
    /// q matrices mapping R^d -> R^m
    pub a_mats: Vec<RealMat>,
}

impl FsskData {
    pub fn q(&self) -> usize {
        self.b.len()
    }

    pub fn state_dim(&self) -> usize {
        self.jordan.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.a_mats[0].rows
    }

    pub fn input_dim(&self) -> usize {
        self.a_mats[0].cols
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        self.jordan.validate()?;
        let r = self.jordan.dim();
        if self.b.is_empty() || self.b.len() != self.a_mats.len() {
            return Err(SchemeError::Invalid(
                "need matching, nonempty b and A collections".into(),
            ));
        }
        for v in &self.b {
            if v.len() != r {
                return Err(SchemeError::Invalid("b vector length != R".into()));
            }
        }
        let (m, d) = (self.a_mats[0].rows, self.a_mats[0].cols);
        for a in &self.a_mats {
            if (a.rows, a.cols) != (m, d) {
                return Err(SchemeError::Invalid("A matrices must share shape".into()));
            }
        }
        if self.jordan.min_spectral_real() < 0.0 {
            return Err(SchemeError::Invalid(
                "contour quadrature requires spec(Λ) ⊂ [0,∞)".into(),
            ));
        }
        Ok(())
    }

    /// Scalar component `k_p(δ) = 1ᵀ E(δ) b_p`.
    pub fn scalar_component(&self, p: usize, delta: f64) -> f64 {
        self.jordan.exp_neg(delta).mul_vec(&self.b[p]).iter().sum()
    }
}

/// JSON schema for [`FsskData`]; also accepts the Prony scalar form.
#[derive(Serialize, Deserialize)]
pub struct FsskDataJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jordan: Option<JordanForm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prony: Option<PronyForm>,
    /// q × R
    pub b: Option<Vec<Vec<f64>>>,
    /// q × m × d
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
}

impl FsskData {
    pub fn from_json(s: &str) -> Result<Self, SchemeError> {
        let parsed: FsskDataJson =
            serde_json::from_str(s).map_err(|e| SchemeError::Invalid(format!("bad FsskData JSON: {e}")))?;
        let a_mats: Vec<RealMat> = parsed.a.iter().map(|m| RealMat::from_rows(m)).collect();
        let (jordan, b) = match (parsed.jordan, parsed.prony, parsed.b) {
            (Some(j), None, Some(b)) => (j, b),
            (None, Some(p), b_opt) => {
                let (j, b1) = prony_to_jordan(&p)?;
                let b = match b_opt {
                    Some(b) => b,
                    None => vec![b1; a_mats.len()],
                };
                (j, b)
            }
            _ => {
                return Err(SchemeError::Invalid(
                    "provide either jordan+b or prony (+optional b)".into(),
                ))
            }
        };
        let data = FsskData { jordan, b, a_mats };
        data.validate()?;
        Ok(data)
    }

    pub fn to_json(&self) -> String {
        let a = self
            .a_mats
            .iter()
            .map(|m| {
                (0..m.rows)
                    .map(|i| m.data[i * m.cols..(i + 1) * m.cols].to_vec())
                    .collect()
            })
            .collect();
        serde_json::to_string(&FsskDataJson {
            jordan: Some(self.jordan.clone()),
            prony: None,
            b: Some(self.b.clone()),
            a,
        })
        .expect("serialization cannot fail")
    }
}

/// Normalized coefficient families from the contour quadrature:
/// `psi[|ℓ|][rank]` ≈ `δ^{-|ℓ|-1} 1ᵀ Ψ^{w(ℓ)}(δ)` (rows of length R) and
/// `phi[|ℓ|][rank][p]` ≈ `δ^{-|ℓ|-1} Φ^{p w(ℓ)}(δ)` (R×R matrices).
#[derive(Debug, Clone)]
pub struct PhiPsiTable {
    pub q: usize,
    pub state_dim: usize,
    pub max_ell: usize,
    pub delta: f64,
    pub psi: Vec<Vec<Vec<f64>>>,
    pub phi: Vec<Vec<Vec<RealMat>>>,
}

/// Default number of contour nodes (per conjugate half); the quadrature
/// error decays like `2.85^{-m}`, so 24 nodes reach ~1e-15.
pub const DEFAULT_MQUAD: usize = 24;

/// Contour-quadrature evaluation of the normalized `Φ`/`Ψ` families on the
/// optimized parabolic contour.
pub fn eval_phi_psi(
    delta: f64,
    jordan: &JordanForm,
    b: &[Vec<f64>],
    max_ell: usize,
    mquad: usize,
) -> Result<PhiPsiTable, SchemeError> {
    if delta <= 0.0 {
        return Err(SchemeError::Invalid("eval_phi_psi needs δ > 0".into()));
    }
    if jordan.min_spectral_real() < 0.0 {
        return Err(SchemeError::Invalid(
            "contour quadrature requires spec(Λ) ⊂ [0,∞)".into(),
        ));
    }
    let r = jordan.dim();
    let q = b.len();
    let mset = MultiIndexSet::new(q, max_ell);
    let mut psi: Vec<Vec<Vec<f64>>> = (0..=max_ell)
        .map(|d| vec![vec![0.0; r]; mset.at_degree(d).len()])
        .collect();
    let mut phi: Vec<Vec<Vec<RealMat>>> = (0..=max_ell)
        .map(|d| vec![vec![RealMat::zeros(r, r); q]; mset.at_degree(d).len()])
        .collect();

    let ones = vec![Complex64::new(1.0, 0.0); r];
    for j in 1..=mquad {
        let theta = (2 * j - 1) as f64 * std::f64::consts::PI / (2 * mquad) as f64;
        let zeta = Complex64::new(
            2.0 * mquad as f64 * (0.1309 - 0.1194 * theta * theta),
            2.0 * mquad as f64 * 0.25 * theta,
        );
        let w = zeta.exp() * Complex64::new(0.25, 0.2388 * theta);
        let wt = w / zeta;
        let rrow = jordan.solve_shifted_t(zeta, delta, &ones);
        let us: Vec<Vec<Complex64>> = (0..q)
            .map(|p| {
                let rhs: Vec<Complex64> = b[p].iter().map(|&x| Complex64::new(x, 0.0)).collect();
                jordan.solve_shifted(zeta, delta, &rhs)
            })
            .collect();
        let betas: Vec<Complex64> = (0..q)
            .map(|p| {
                rrow.iter()
                    .zip(&b[p])
                    .map(|(ri, &bi)| ri * bi)
                    .sum::<Complex64>()
            })
            .collect();
        for d in 0..=max_ell {
            for (rank, ell) in mset.at_degree(d).iter().enumerate() {
                let mut gamma = Complex64::new(1.0, 0.0);
                for (p, &lp) in ell.iter().enumerate() {
                    for _ in 0..lp {
                        gamma *= betas[p];
                    }
                }
                let wt_g = wt * gamma;
                for (dst, ri) in psi[d][rank].iter_mut().zip(&rrow) {
                    *dst += 2.0 * (wt_g * ri).re;
                }
                let w_g = w * gamma;
                for p in 0..q {
                    let blk = &mut phi[d][rank][p];
                    for (i, ui) in us[p].iter().enumerate() {
                        let c = w_g * ui;
                        for (k, rk) in rrow.iter().enumerate() {
                            blk.data[i * r + k] += 2.0 * (c * rk).re;
                        }
                    }
                }
            }
        }
    }
    Ok(PhiPsiTable {
        q,
        state_dim: r,
        max_ell,
        delta,
        psi,
        phi,
    })
}

impl PhiPsiTable {
    /// `ψ̂_n = δ^{-n} 1ᵀΨ^{1^{n-1}}(δ)` in the scalar-kernel case.
    pub fn psi_row_q1(&self, n: usize) -> &[f64] {
        &self.psi[n - 1][0]
    }

    /// `φ̂_n = δ^{-n} Φ^{1^n}(δ)` in the scalar-kernel case (`n >= 1`).
    pub fn phi_mat_q1(&self, n: usize) -> &RealMat {
        &self.phi[n - 1][0][0]
    }
}

// ---------------------------------------------------------------------------
// state recursion
// ---------------------------------------------------------------------------

/// Recursion state: one row `Z^p ∈ (T^N)^{1×R}` per kernel component.
#[derive(Debug, Clone)]
pub struct FsskState {
    pub z: Vec<TensorMatrix>,
    pub time_index: usize,
}

impl FsskState {
    pub fn new(q: usize, r: usize, m: usize, trunc: usize) -> Self {
        FsskState {
            z: vec![TensorMatrix::zero(1, r, m, trunc); q],
            time_index: 0,
        }
    }
}

/// Shuffle-recursive evaluation of `f̂ = 1ᵀF_δ(y)` (row) and
/// `Ĝ^p = G^p_δ(y)` (matrices); the multivariate counterpart of the scalar
/// Horner update.
pub fn eval_fg(
    ys: &[Vec<f64>],
    trunc: usize,
    table: &PhiPsiTable,
    counter: Option<&OpCounter>,
) -> (Vec<TruncatedTensor>, Vec<TensorMatrix>) {
    let q = table.q;
    let r = table.state_dim;
    let m = ys[0].len();
    let mset = MultiIndexSet::new(q, trunc.saturating_sub(1));
    let maxd = trunc.saturating_sub(1);

    // capped storage: F(ℓ) carries levels <= trunc-1-|ℓ|
    // f_tab[d][rank] : Vec over R columns of capped tensors
    let mut f_tab: Vec<Vec<Vec<TruncatedTensor>>> = (0..=maxd)
        .map(|d| {
            vec![vec![TruncatedTensor::zero(m, maxd - d); r]; mset.at_degree(d).len()]
        })
        .collect();
    let mut g_tab: Vec<Vec<Vec<Vec<TruncatedTensor>>>> = (0..=maxd)
        .map(|d| {
            let cap = maxd - d;
            vec![vec![vec![TruncatedTensor::zero(m, cap); r * r]; q]; mset.at_degree(d).len()]
        })
        .collect();

    let mut ops = 0u64;
    for d in (0..=maxd).rev() {
        let ranks = mset.at_degree(d).len();
        for rank in 0..ranks {
            let ell = &mset.at_degree(d)[rank];
            let ell_fact = MultiIndexSet::factorial(ell);
            // seed with the table coefficients at level 0
            {
                let psi_row = &table.psi[d][rank];
                for (col, tncol) in f_tab[d][rank].iter_mut().enumerate() {
                    tncol.level_mut(0)[0] = psi_row[col] / ell_fact;
                }
                if d <= maxd.saturating_sub(1) || maxd == 0 {
                    // Φ̂ used only for |ℓ| <= trunc-2; the table may stop there
                }
                if d < table.phi.len() && d + 1 < trunc.max(1) {
                    for p in 0..q {
                        let blk = &table.phi[d][rank][p];
                        for e in 0..r * r {
                            g_tab[d][rank][p][e].level_mut(0)[0] = blk.data[e] / ell_fact;
                        }
                    }
                }
            }
            if d == maxd {
                continue;
            }
            // descend: add (X(ℓ+1_r) ⧢ y_r)(ℓ_r+1)/(|ℓ|+1)
            for letter in 0..q {
                let up = mset.rank_plus_one(d, rank, letter);
                let coeff = (ell[letter] as f64 + 1.0) / (d as f64 + 1.0);
                let y = &ys[letter];
                let cap = maxd - d;
                // F tables
                for col in 0..r {
                    let (src, dst) = {
                        let (lo, hi) = f_tab.split_at_mut(d + 1);
                        (&hi[0][up][col], &mut lo[d][rank][col])
                    };
                    for k in 0..cap.min(src.trunc() + 1) {
                        let blk = TruncatedTensor::shuffle_level_by_vector(src.level(k), k, m, y);
                        let dst_lvl = dst.level_mut(k + 1);
                        for (t, &v) in dst_lvl.iter_mut().zip(&blk) {
                            *t += coeff * v;
                        }
                        ops += cost::shuffle_level(m, k);
                    }
                }
                // G tables
                for p in 0..q {
                    for e in 0..r * r {
                        let (src, dst) = {
                            let (lo, hi) = g_tab.split_at_mut(d + 1);
                            (&hi[0][up][p][e], &mut lo[d][rank][p][e])
                        };
                        for k in 0..cap.min(src.trunc() + 1) {
                            let blk =
                                TruncatedTensor::shuffle_level_by_vector(src.level(k), k, m, y);
                            let dst_lvl = dst.level_mut(k + 1);
                            for (t, &v) in dst_lvl.iter_mut().zip(&blk) {
                                *t += coeff * v;
                            }
                            ops += cost::shuffle_level(m, k);
                        }
                    }
                }
            }
        }
    }
    if let Some(c) = counter {
        c.add(ops);
    }

    // pad the degree-0 results out to full truncation
    let f_row: Vec<TruncatedTensor> = (0..r)
        .map(|col| pad_to(&f_tab[0][0][col], trunc))
        .collect();
    let g_mats: Vec<TensorMatrix> = (0..q)
        .map(|p| {
            let mut gm = TensorMatrix::zero(r, r, m, trunc);
            for i in 0..r {
                for j in 0..r {
                    *gm.get_mut(i, j) = pad_to(&g_tab[0][0][p][i * r + j], trunc);
                }
            }
            gm
        })
        .collect();
    (f_row, g_mats)
}

fn pad_to(t: &TruncatedTensor, trunc: usize) -> TruncatedTensor {
    let mut out = TruncatedTensor::zero(t.dim(), trunc);
    for n in 0..=t.trunc().min(trunc) {
        out.level_mut(n).copy_from_slice(t.level(n));
    }
    out
}

/// One state update `Z^p ← Z^p.E(δ) + (f̂ + Σ_l Z^l.Ĝ^l) ⊗ y_p`.
pub fn state_step(
    state: &mut FsskState,
    ys: &[Vec<f64>],
    e_mat: &BlockDiagMat,
    f_row: &[TruncatedTensor],
    g_mats: &[TensorMatrix],
    counter: Option<&OpCounter>,
) {
    let q = state.z.len();
    let r = e_mat.dim;
    let (m, trunc) = (f_row[0].dim(), f_row[0].trunc());
    // B = f̂ + Σ_l Z^l.Ĝ^l
    let mut bb: Vec<TruncatedTensor> = f_row.to_vec();
    let mut ops = 0u64;
    for l in 0..q {
        let prod = state.z[l].dot(&g_mats[l]).expect("shapes agree");
        ops += (r * r) as u64 * cost::truncated_product(m, trunc);
        for (dst, src) in bb.iter_mut().zip(prod.entries()) {
            dst.axpy(1.0, src).expect("shapes agree");
        }
    }
    // Z^p = Z^p.E + B ⊗ y_p
    let e_dense = e_mat.to_dense();
    for p in 0..q {
        let mut znew = state.z[p].dot_real(&e_dense.data, r, r);
        ops += (r * r) as u64 * cost::storage(m, trunc);
        let ypt = TruncatedTensor::from_vector(&ys[p], trunc);
        for col in 0..r {
            znew
                .get_mut(0, col)
                .add_truncated_product(1.0, &bb[col], &ypt)
                .expect("shapes agree");
        }
        ops += r as u64 * cost::truncated_product(m, trunc);
        state.z[p] = znew;
    }
    if let Some(c) = counter {
        c.add(ops);
    }
    state.time_index += 1;
}

/// Scalar-kernel Horner state update
/// `Z ← 1ᵀ.Σ_{n>=1} ψ̂_n (Δx)^{⊗n} + Z.Σ_{n=0}^{N-1} φ̂_n (Δx)^{⊗n}`,
/// fused per level: with `φ̂_N := 0`,
///
/// ```text
///   X ← ψ̂_n + Z^{(0)}.φ̂_n;  X ← (X ⊗ Δx) + Z^{(k)}.φ̂_{n-k}, k = 1..=n;
///   Ẑ^{(n)} ← X,
/// ```
///
/// so the last addition contributes the pure transport `Z^{(n)}.φ̂_0`.
pub fn state_step_q1_horner(
    z: &TensorMatrix,
    dx: &[f64],
    psi_rows: &[Vec<f64>],
    phi_mats: &[RealMat],
    counter: Option<&OpCounter>,
) -> TensorMatrix {
    let r = z.cols();
    let (m, trunc) = (z.get(0, 0).dim(), z.get(0, 0).trunc());
    debug_assert_eq!(psi_rows.len(), trunc + 1, "ψ̂_n for n = 1..=N (index 0 unused)");
    debug_assert_eq!(phi_mats.len(), trunc, "φ̂_n for n = 0..N");
    let mut out = TensorMatrix::zero(1, r, m, trunc);
    let mut ops = 0u64;

    // row · matrix at a fixed tensor level: rows of coefficients per column
    let row_dot_mat = |level_rows: &[Vec<f64>], mat: &RealMat| -> Vec<Vec<f64>> {
        let width = level_rows[0].len();
        let mut res = vec![vec![0.0; width]; r];
        for c in 0..r {
            let dst = &mut res[c];
            for l in 0..r {
                let a = mat.get(l, c);
                if a == 0.0 {
                    continue;
                }
                for (t, &v) in dst.iter_mut().zip(&level_rows[l]) {
                    *t += a * v;
                }
            }
        }
        res
    };

    let z_level = |k: usize| -> Vec<Vec<f64>> {
        (0..r).map(|c| z.get(0, c).level(k).to_vec()).collect()
    };

    // level 0: Ẑ^{(0)} = Z^{(0)}.φ̂_0
    let z0 = z_level(0);
    let lvl0 = row_dot_mat(&z0, &phi_mats[0]);
    for c in 0..r {
        out.get_mut(0, c).level_mut(0)[0] = lvl0[c][0];
    }
    ops += (r * r) as u64;

    for n in 1..=trunc {
        // X = ψ̂_n + Z^{(0)}.φ̂_n  (φ̂_N := 0)
        let mut x: Vec<Vec<f64>> = (0..r).map(|c| vec![psi_rows[n][c]]).collect();
        if n < trunc {
            let add = row_dot_mat(&z0, &phi_mats[n]);
            for (col, a) in x.iter_mut().zip(add) {
                col[0] += a[0];
            }
            ops += (r * r) as u64;
        }
        for k in 1..=n {
            let zk = z_level(k);
            let zphi = row_dot_mat(&zk, &phi_mats[n - k]);
            ops += (r * r) as u64 * zk[0].len() as u64;
            for (col, add) in x.iter_mut().zip(zphi) {
                let mut next = vec![0.0; col.len() * m];
                TruncatedTensor::concat_vector(col, dx, &mut next);
                for (t, v) in next.iter_mut().zip(add) {
                    *t += v;
                }
                *col = next;
            }
            ops += 2 * r as u64 * (m as u64).pow(k as u32);
        }
        for c in 0..r {
            out.get_mut(0, c).level_mut(n).copy_from_slice(&x[c]);
        }
    }
    if let Some(c) = counter {
        c.add(ops);
    }
    out
}

/// Readout `1 + Σ_p Z^p.(E(τ-t) b_p)`.
pub fn readout(
    state: &FsskState,
    gap: f64,
    jordan: &JordanForm,
    b: &[Vec<f64>],
    counter: Option<&OpCounter>,
) -> Result<TruncatedTensor, SchemeError> {
    if gap < 0.0 {
        return Err(SchemeError::Invalid("readout needs τ >= t".into()));
    }
    let (m, trunc) = (state.z[0].get(0, 0).dim(), state.z[0].get(0, 0).trunc());
    let mut out = TruncatedTensor::unit(m, trunc);
    let r = jordan.dim();
    for (p, zp) in state.z.iter().enumerate() {
        let eb = if gap == 0.0 {
            b[p].clone()
        } else {
            jordan.exp_neg(gap).mul_vec(&b[p])
        };
        let contrib = zp.dot_real_vector(&eb);
        out.axpy(1.0, &contrib[0])?;
        if let Some(c) = counter {
            c.add(r as u64 * cost::storage(m, trunc));
        }
    }
    Ok(out)
}

/// Options for [`run_fssk`].
#[derive(Debug, Clone)]
pub struct FsskOptions {
    pub mquad: usize,
    /// Readout look-ahead times; `None` = diagonal `τ_j = t_j`.
    pub readouts: Option<Vec<f64>>,
}

impl Default for FsskOptions {
    fn default() -> Self {
        FsskOptions {
            mquad: DEFAULT_MQUAD,
            readouts: None,
        }
    }
}

/// Report from an FSSK run.
pub struct FsskRun {
    /// `v_j ≈ π_{≤N} VSig^{τ_j}_{t_0,t_j}`, `j = 0..=J`.
    pub outputs: Vec<TruncatedTensor>,
    pub recursion_ops: u64,
    pub precomp_ops: u64,
    /// distinct interval lengths hit in the table cache
    pub cache_entries: usize,
}

/// Quantize an interval length at ~1e-14 relative for table caching.
fn delta_key(delta: f64) -> u64 {
    delta.to_bits() & !0xFF
}

/// Exact Volterra signature of a piecewise-linear path for a
/// finite-state-space kernel, by the linear-time state recursion.
pub fn run_fssk(
    path: &Path,
    data: &FsskData,
    trunc: usize,
    opts: &FsskOptions,
    counter: Option<&OpCounter>,
) -> Result<FsskRun, SchemeError> {
    data.validate()?;
    path.validate()?;
    if path.dim() != data.input_dim() {
        return Err(SchemeError::DimensionMismatch {
            got: path.dim(),
            want: data.input_dim(),
        });
    }
    let jj = path.segments();
    let q = data.q();
    let r = data.state_dim();
    let m = data.ambient_dim();
    if let Some(taus) = &opts.readouts {
        if taus.len() != jj + 1 {
            return Err(SchemeError::Invalid("need one readout time per grid point".into()));
        }
    }

    let precomp = OpCounter::new();
    let mut tables: HashMap<u64, (PhiPsiTable, BlockDiagMat)> = HashMap::new();
    let mut state = FsskState::new(q, r, m, trunc);
    let mut outputs = Vec::with_capacity(jj + 1);
    let tau0 = opts.readouts.as_ref().map(|t| t[0] - path.times[0]).unwrap_or(0.0);
    outputs.push(readout(&state, tau0, &data.jordan, &data.b, counter)?);

    for j in 1..=jj {
        let delta = path.times[j] - path.times[j - 1];
        let key = delta_key(delta);
        if let std::collections::hash_map::Entry::Vacant(slot) = tables.entry(key) {
            let table = eval_phi_psi(delta, &data.jordan, &data.b, trunc.saturating_sub(1), opts.mquad)?;
            precomp.add(opts.mquad as u64 * (q as u64 + 1) * r as u64);
            precomp.add((table.psi.iter().map(|d| d.len()).sum::<usize>() as u64)
                * (opts.mquad as u64)
                * (r as u64 * r as u64 + r as u64));
            let e_mat = data.jordan.exp_neg(delta);
            precomp.add(data.jordan.rho() as u64);
            slot.insert((table, e_mat));
        }
        let (table, e_mat) = &tables[&key];
        let dx = path.increment(j);
        let ys: Vec<Vec<f64>> = data.a_mats.iter().map(|a| a.mul_vec(&dx)).collect();
        if q == 1 {
            // Horner path: ψ̂_n rows (n=1..=N), φ̂_n matrices (n=0..N)
            let mut psi_rows = vec![vec![0.0; r]];
            for n in 1..=trunc {
                psi_rows.push(table.psi_row_q1(n).to_vec());
            }
            let mut phi_mats = vec![e_mat.to_dense()];
            for n in 1..trunc {
                phi_mats.push(table.phi_mat_q1(n).clone());
            }
            state.z[0] = state_step_q1_horner(&state.z[0], &ys[0], &psi_rows, &phi_mats, counter);
            state.time_index = j;
        } else {
            let (f_row, g_mats) = eval_fg(&ys, trunc, table, counter);
            state_step(&mut state, &ys, e_mat, &f_row, &g_mats, counter);
        }
        let gap = opts
            .readouts
            .as_ref()
            .map(|t| t[j] - path.times[j])
            .unwrap_or(0.0);
        outputs.push(readout(&state, gap, &data.jordan, &data.b, counter)?);
    }
    Ok(FsskRun {
        outputs,
        recursion_ops: counter.map(|c| c.get()).unwrap_or(0),
        precomp_ops: precomp.get(),
        cache_entries: tables.len(),
    })
}
