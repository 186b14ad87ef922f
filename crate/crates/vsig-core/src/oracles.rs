//! Slow, independent reference implementations used by tests, the
//! acceptance suite, and the `validate`/`bench` commands.
//!
//! Everything here works from pointwise kernel evaluations, plain
//! quadrature, dense linear algebra and tensor-algebra primitives — never
//! from the weight formulas or recursions of the fast paths — so agreement
//! constitutes independent verification. Hard size guards keep these from
//! ever being mistaken for production routes.

use crate::fssk::FsskData;
use crate::kernel::ScalarKernel;
use crate::mat::RealMat;
use crate::paths::Path;
use crate::quadrature::{de_integrate, de_integrate2, integrate_capped};
use crate::tensor::{TruncatedTensor, Word};
use crate::SchemeError;

/// Quadrature tolerances by nesting depth (1-D, 2-D, 3-D).
const DEPTH_TOL: [f64; 3] = [1e-10, 1e-8, 1e-6];

fn guard(cond: bool, what: &str) -> Result<(), SchemeError> {
    if cond {
        Ok(())
    } else {
        Err(SchemeError::Invalid(format!("oracle size guard exceeded: {what}")))
    }
}

// ---------------------------------------------------------------------------
// simplex quadrature for word weights
// ---------------------------------------------------------------------------

/// `k̄(gap)` for a convolution kernel (stable for tiny gaps).
fn conv_eval(k: &ScalarKernel, gap: f64) -> f64 {
    debug_assert!(k.is_convolution());
    k.eval(gap, 0.0)
}

/// `𝒦^{w,τ}_{s,t}` for convolution kernels as a function of
/// `(width, gap) = (t-s, τ-t)`:
/// `𝒦^{wp} = ∫_0^{width} k̄_p(gap + (width-v)) 𝒦^{w}(v, 0) dv`, `𝒦^∅ = 1`.
fn simplex_conv_rec(kernels: &[ScalarKernel], word: &[usize], width: f64, gap: f64, tol: f64) -> f64 {
    if word.is_empty() {
        return 1.0;
    }
    let (head, last) = word.split_at(word.len() - 1);
    let k = &kernels[last[0] - 1];
    let (val, _) = de_integrate2(
        |_, da, db| conv_eval(k, gap + db) * simplex_conv_rec(kernels, head, da, 0.0, tol / 20.0),
        0.0,
        width,
        tol,
    );
    val
}

/// `𝒦̇^{w,τ}_{s,t}` for convolution kernels:
/// `𝒦̇^{p}` = `k̄_p(gap + width)`,
/// `𝒦̇^{wp} = ∫_0^{width} k̄_p(gap + (width-v)) 𝒦̇^{w}(v, 0) dv`.
fn dot_conv_rec(kernels: &[ScalarKernel], word: &[usize], width: f64, gap: f64, tol: f64) -> f64 {
    if word.len() == 1 {
        return conv_eval(&kernels[word[0] - 1], gap + width);
    }
    let (head, last) = word.split_at(word.len() - 1);
    let k = &kernels[last[0] - 1];
    let (val, _) = de_integrate2(
        |_, da, db| conv_eval(k, gap + db) * dot_conv_rec(kernels, head, da, 0.0, tol / 20.0),
        0.0,
        width,
        tol,
    );
    val
}

/// Absolute-coordinate fallback for non-convolution kernels (bounded
/// integrands, e.g. piecewise constant).
fn simplex_abs_rec(kernels: &[ScalarKernel], word: &[usize], s: f64, t: f64, tau: f64, tol: f64) -> f64 {
    if word.is_empty() {
        return 1.0;
    }
    let (head, last) = word.split_at(word.len() - 1);
    let k = &kernels[last[0] - 1];
    let (val, _) = de_integrate2(
        |u, _, _| k.eval(tau, u) * simplex_abs_rec(kernels, head, s, u, u, tol / 20.0),
        s,
        t,
        tol,
    );
    val
}

fn dot_abs_rec(kernels: &[ScalarKernel], word: &[usize], s: f64, t: f64, tau: f64, tol: f64) -> f64 {
    if word.len() == 1 {
        return kernels[word[0] - 1].eval(tau, s);
    }
    let (head, last) = word.split_at(word.len() - 1);
    let k = &kernels[last[0] - 1];
    let (val, _) = de_integrate2(
        |u, _, _| k.eval(tau, u) * dot_abs_rec(kernels, head, s, u, u, tol / 20.0),
        s,
        t,
        tol,
    );
    val
}

/// `𝒦^{w,τ}_{s,t}` by the defining nested simplex integral.
pub fn simplex_quadrature_weight(
    kernels: &[ScalarKernel],
    word: &[usize],
    s: f64,
    t: f64,
    tau: f64,
    tol: f64,
) -> Result<f64, SchemeError> {
    guard(word.len() <= 3, "simplex quadrature needs |w| <= 3")?;
    for &p in word {
        if p < 1 || p > kernels.len() {
            return Err(SchemeError::Invalid(format!("letter {p} out of range")));
        }
    }
    if kernels.iter().all(|k| k.is_convolution()) {
        Ok(simplex_conv_rec(kernels, word, t - s, tau - t, tol))
    } else {
        Ok(simplex_abs_rec(kernels, word, s, t, tau, tol))
    }
}

/// `𝒦̇^{w,τ}_{s,t}` by nested quadrature.
pub fn simplex_quadrature_weight_dot(
    kernels: &[ScalarKernel],
    word: &[usize],
    s: f64,
    t: f64,
    tau: f64,
    tol: f64,
) -> Result<f64, SchemeError> {
    guard(word.len() <= 3, "simplex quadrature needs |w| <= 3")?;
    if kernels.iter().all(|k| k.is_convolution()) {
        Ok(dot_conv_rec(kernels, word, t - s, tau - t, tol))
    } else {
        Ok(dot_abs_rec(kernels, word, s, t, tau, tol))
    }
}

// ---------------------------------------------------------------------------
// brute-force weighted-monomial expansion
// ---------------------------------------------------------------------------

/// Direct summation of the full Chen breakdown: over the number of active
/// cells `k`, cell tuples `i_1 < … < i_k`, and word compositions, with
/// weights evaluated by nested quadrature. Tiny instances only.
pub fn brute_force_vsig(
    path: &Path,
    kernels: &[ScalarKernel],
    a_mats: &[RealMat],
    trunc: usize,
    target: usize,
) -> Result<TruncatedTensor, SchemeError> {
    let jj = path.segments();
    let q = kernels.len();
    guard(jj <= 4 && trunc <= 3 && q <= 2, "brute force needs J<=4, N<=3, q<=2")?;
    let m = a_mats[0].rows;
    let j = target.min(jj);
    let tau = path.times[j];
    let mut out = TruncatedTensor::unit(m, trunc);
    // velocities per cell
    let vels: Vec<Vec<f64>> = (1..=jj)
        .map(|i| {
            let h = path.times[i] - path.times[i - 1];
            path.increment(i).iter().map(|x| x / h).collect()
        })
        .collect();
    for n in 1..=trunc {
        for k in 1..=n.min(j) {
            for tuple in subsets(j, k) {
                for parts in compositions(n, k) {
                    for words in word_tuples(&parts, q) {
                        let weight = word_tuple_weight(path, kernels, &tuple, &words, tau);
                        if weight == 0.0 {
                            continue;
                        }
                        // (A v_{i_1})^{w_1} ⊗ ⋯ ⊗ (A v_{i_k})^{w_k}
                        let mut mono = vec![1.0];
                        for (l, w) in words.iter().enumerate() {
                            for &p in w {
                                let av = a_mats[p - 1].mul_vec(&vels[tuple[l] - 1]);
                                let mut next = vec![0.0; mono.len() * m];
                                TruncatedTensor::concat_vector(&mono, &av, &mut next);
                                mono = next;
                            }
                        }
                        for (dst, &v) in out.level_mut(n).iter_mut().zip(&mono) {
                            *dst += weight * v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// All increasing k-tuples from `1..=j`.
fn subsets(j: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(j: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..=j {
            cur.push(v);
            rec(j, k, v + 1, cur, out);
            cur.pop();
        }
    }
    rec(j, k, 1, &mut cur, &mut out);
    out
}

/// All compositions of `n` into `k` parts `>= 1`.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            if n >= 1 {
                cur.push(n);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for v in 1..=n.saturating_sub(k - 1) {
            cur.push(v);
            rec(n - v, k - 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, &mut cur, &mut out);
    out
}

/// All tuples of words with prescribed lengths over `q` letters.
fn word_tuples(parts: &[usize], q: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![Vec::new()];
    for &len in parts {
        let mut next = Vec::new();
        for prefix in &out {
            for idx in 0..q.pow(len as u32) {
                let mut t = prefix.clone();
                t.push(Word::from_index(idx, len, q).0);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// `𝒦^{(w_1,…,w_k)}_{i_1,…,i_k,τ}`: the k-dimensional product-domain
/// integral of `∏ 𝒦̇^{w_l, r_{l+1}}_{r_l, t_{i_l}}` with `r_{k+1} = τ`,
/// each dotted factor itself by nested quadrature. Endpoint distances are
/// threaded through the nesting so the singular fractional factors stay
/// accurate.
fn word_tuple_weight(
    path: &Path,
    kernels: &[ScalarKernel],
    tuple: &[usize],
    words: &[Vec<usize>],
    tau: f64,
) -> f64 {
    let convolution = kernels.iter().all(|k| k.is_convolution());
    // rec(l, gap_l): integrate r_l over its cell; gap_l = r_{l+1} - t_{i_l}
    // is the accurate look-ahead distance supplied by the enclosing level.
    fn rec(
        path: &Path,
        kernels: &[ScalarKernel],
        tuple: &[usize],
        words: &[Vec<usize>],
        level: usize,
        gap: f64,
        tol: f64,
        convolution: bool,
    ) -> f64 {
        if level == 0 {
            return 1.0;
        }
        let l = level - 1;
        let i = tuple[l];
        let (a, b) = (path.times[i - 1], path.times[i]);
        let (val, _) = de_integrate2(
            |r, da, db| {
                let dotw = if convolution {
                    dot_conv_rec(kernels, &words[l], db, gap, tol / 20.0)
                } else {
                    dot_abs_rec(kernels, &words[l], r, b, b + gap, tol / 20.0)
                };
                if level == 1 {
                    return dotw;
                }
                // gap for the next level down: r_l - t_{i_{l-1}}
                let below = tuple[l - 1];
                let next_gap = (a - path.times[below]) + da;
                dotw * rec(path, kernels, tuple, words, l, next_gap, tol, convolution)
            },
            a,
            b,
            tol,
        );
        val
    }
    let depth = tuple.len() + words.iter().map(|w| w.len().saturating_sub(1)).max().unwrap_or(0);
    let tol = DEPTH_TOL[depth.clamp(1, 3) - 1];
    let k = tuple.len();
    let top_gap = tau - path.times[tuple[k - 1]];
    rec(path, kernels, tuple, words, k, top_gap, tol, convolution)
}

// ---------------------------------------------------------------------------
// explicit Euler on the state ODE
// ---------------------------------------------------------------------------

/// Dyadically refined explicit Euler iterate of the tensor-algebra state
/// ODE; terminal readout `1 + Σ_ℓ Ẑ^ℓ`.
pub fn euler_state_ode(
    path: &Path,
    data: &FsskData,
    trunc: usize,
    refinement: usize,
) -> Result<TruncatedTensor, SchemeError> {
    guard(refinement <= 12, "Euler refinement needs p <= 12")?;
    data.validate()?;
    let r = data.state_dim();
    let m = data.ambient_dim();
    let q = data.q();
    let lambda = data.jordan.dense_lambda();
    let sub = 1usize << refinement;
    let mut z: Vec<TruncatedTensor> = vec![TruncatedTensor::zero(m, trunc); r];
    for j in 1..=path.segments() {
        let dt = (path.times[j] - path.times[j - 1]) / sub as f64;
        let dx = path.increment(j);
        // Σ_α b_{α,ℓ} A_α Δx / 2^p  per state row ℓ
        let mut drive: Vec<Vec<f64>> = vec![vec![0.0; m]; r];
        for alpha in 0..q {
            let a_dx = data.a_mats[alpha].mul_vec(&dx);
            for (l, row) in drive.iter_mut().enumerate() {
                let b = data.b[alpha][l] / sub as f64;
                for (dst, &v) in row.iter_mut().zip(&a_dx) {
                    *dst += b * v;
                }
            }
        }
        for _ in 0..sub {
            // 1 + Σ_r Ẑ^r
            let mut total = TruncatedTensor::unit(m, trunc);
            for zl in &z {
                total.axpy(1.0, zl)?;
            }
            let mut znew = Vec::with_capacity(r);
            for l in 0..r {
                let mut next = z[l].clone();
                for (rr, zr) in z.iter().enumerate() {
                    let c = lambda.get(l, rr);
                    if c != 0.0 {
                        next.axpy(-dt * c, zr)?;
                    }
                }
                let inc = TruncatedTensor::from_vector(&drive[l], trunc);
                next.add_truncated_product(1.0, &total, &inc)?;
                znew.push(next);
            }
            z = znew;
        }
    }
    let mut out = TruncatedTensor::unit(m, trunc);
    for zl in &z {
        out.axpy(1.0, zl)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Adams–Bashforth–Moulton product integration
// ---------------------------------------------------------------------------

/// Product-integration weights for the Adams predictor–corrector scheme on
/// a uniform grid with a convolution kernel: `ω^L`, `ω^R` depend only on the
/// lag, and `ω^E = ω^L + ω^R` exactly.
pub struct AdamsWeights {
    pub h: f64,
    /// `left[g-1] = ω^L at lag g`, g = 1..=J
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl AdamsWeights {
    pub fn build(kernel: &ScalarKernel, h: f64, lags: usize) -> Result<Self, SchemeError> {
        if !kernel.is_convolution() {
            return Err(SchemeError::Invalid(
                "Adams weights assume a convolution kernel".into(),
            ));
        }
        let mut left = Vec::with_capacity(lags);
        let mut right = Vec::with_capacity(lags);
        for g in 1..=lags {
            let base = (g - 1) as f64 * h;
            // ω^L = (1/h²)∫_0^h (h-u) k̄(gh-u) du, substitute v = h-u
            let (l, _) = de_integrate(|v| v * kernel.eval(base + v, 0.0), 0.0, h, 1e-12);
            let (rr, _) = de_integrate(|v| (h - v) * kernel.eval(base + v, 0.0), 0.0, h, 1e-12);
            left.push(l / (h * h));
            right.push(rr / (h * h));
        }
        Ok(AdamsWeights { h, left, right })
    }

    pub fn omega_l(&self, i: usize, j: usize) -> f64 {
        self.left[j - i - 1]
    }

    pub fn omega_r(&self, i: usize, j: usize) -> f64 {
        self.right[j - i - 1]
    }

    pub fn omega_e(&self, i: usize, j: usize) -> f64 {
        self.omega_l(i, j) + self.omega_r(i, j)
    }
}

/// Fractional Adams–Bashforth–Moulton predictor–corrector iteration for the
/// fundamental Volterra equation (scalar convolution kernels, uniform grid).
pub fn adams_pc_vsig(
    path: &Path,
    kernel: &ScalarKernel,
    trunc: usize,
) -> Result<Vec<TruncatedTensor>, SchemeError> {
    let h = path.uniform_step()?;
    let jj = path.segments();
    let m = path.dim();
    let w = AdamsWeights::build(kernel, h, jj)?;
    let mut outputs: Vec<TruncatedTensor> = vec![TruncatedTensor::unit(m, trunc)];
    for j in 1..=jj {
        // predictor
        let mut pred = TruncatedTensor::unit(m, trunc);
        for i in 0..j {
            let dx = TruncatedTensor::from_vector(&path.increment(i + 1), trunc);
            pred.add_truncated_product(w.omega_e(i, j), &outputs[i], &dx)?;
        }
        // corrector, with the predictor standing in for the unknown endpoint
        let mut corr = TruncatedTensor::unit(m, trunc);
        for i in 0..j {
            let dx = TruncatedTensor::from_vector(&path.increment(i + 1), trunc);
            corr.add_truncated_product(w.omega_l(i, j), &outputs[i], &dx)?;
            let vnext = if i + 2 <= j { &outputs[i + 1] } else { &pred };
            corr.add_truncated_product(w.omega_r(i, j), vnext, &dx)?;
        }
        outputs.push(corr);
    }
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// dense matrix exponential and Fréchet-derivative stencils
// ---------------------------------------------------------------------------

/// Dense `e^A` by scaling-and-squaring with a Taylor core.
pub fn dense_expm(a: &RealMat) -> RealMat {
    let n = a.rows;
    let norm = a.max_abs() * n as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let mut t = a.clone();
    t.scale(1.0 / f64::powi(2.0, s as i32));
    let mut term = RealMat::identity(n);
    let mut sum = RealMat::identity(n);
    for k in 1..120 {
        term = term.matmul(&t);
        term.scale(1.0 / k as f64);
        sum.add_scaled(1.0, &term);
        if term.max_abs() < 1e-18 * sum.max_abs().max(1e-300) {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

/// `Σ_σ Φ^{σ(w)}(t)` by mixed finite differences of
/// `exp(t(-Λ + Σ h_i C_{p_i}))` at `h = 0` (directions `C_p = b_p 1ᵀ`).
pub fn frechet_phi_sum(
    data: &FsskData,
    word: &[usize],
    t: f64,
    h: f64,
) -> RealMat {
    let r = data.state_dim();
    let n = word.len();
    let lambda = data.jordan.dense_lambda();
    let cs: Vec<RealMat> = word
        .iter()
        .map(|&p| {
            let mut c = RealMat::zeros(r, r);
            for (i, &bi) in data.b[p - 1].iter().enumerate() {
                for jj in 0..r {
                    c.set(i, jj, bi);
                }
            }
            c
        })
        .collect();
    let f = |hs: &[f64]| -> RealMat {
        let mut arg = lambda.clone();
        arg.scale(-t);
        for (hi, c) in hs.iter().zip(&cs) {
            arg.add_scaled(t * hi, c);
        }
        dense_expm(&arg)
    };
    // central mixed difference: Σ over sign patterns of ∏ signs · f(signs·h) / (2h)^n
    let mut acc = RealMat::zeros(r, r);
    for mask in 0..(1usize << n) {
        let mut hs = vec![0.0; n];
        let mut sign = 1.0;
        for (i, hi) in hs.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *hi = h;
            } else {
                *hi = -h;
                sign = -sign;
            }
        }
        acc.add_scaled(sign, &f(&hs));
    }
    acc.scale(1.0 / (2.0 * h).powi(n as i32));
    acc
}

/// `(1/n!) dⁿ/dhⁿ exp(t(-Λ + hC))` at `h = 0` with 5-point central stencils
/// (`n <= 3`), the scalar-kernel Fréchet oracle for `φ_n`.
pub fn frechet_phi_q1(data: &FsskData, n: usize, t: f64, h: f64) -> RealMat {
    assert!((1..=3).contains(&n));
    let r = data.state_dim();
    let lambda = data.jordan.dense_lambda();
    let mut c = RealMat::zeros(r, r);
    for (i, &bi) in data.b[0].iter().enumerate() {
        for jj in 0..r {
            c.set(i, jj, bi);
        }
    }
    let f = |hv: f64| -> RealMat {
        let mut arg = lambda.clone();
        arg.scale(-t);
        arg.add_scaled(t * hv, &c);
        dense_expm(&arg)
    };
    let stencil: &[(f64, f64)] = match n {
        1 => &[(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)],
        2 => &[
            (-2.0, -1.0 / 12.0),
            (-1.0, 16.0 / 12.0),
            (0.0, -30.0 / 12.0),
            (1.0, 16.0 / 12.0),
            (2.0, -1.0 / 12.0),
        ],
        _ => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
    };
    let mut acc = RealMat::zeros(r, r);
    for &(k, wgt) in stencil {
        acc.add_scaled(wgt, &f(k * h));
    }
    acc.scale(1.0 / h.powi(n as i32));
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    acc.scale(1.0 / fact);
    acc
}

/// `Φ^w(δ)` by direct numerical integration of the defining convolution
/// recursion (a): `Φ^{wp}(δ) = ∫_0^δ Φ^w(u) C_p E(δ-u) du`, for tests of
/// the contour tables at small word lengths.
pub fn phi_by_ode_quadrature(data: &FsskData, word: &[usize], delta: f64, tol: f64) -> RealMat {
    let r = data.state_dim();
    if word.is_empty() {
        return data.jordan.exp_neg(delta).to_dense();
    }
    let (head, last) = word.split_at(word.len() - 1);
    let p = last[0] - 1;
    let mut out = RealMat::zeros(r, r);
    for row in 0..r {
        for col in 0..r {
            let (val, _) = integrate_capped(
                |u| {
                    let inner = phi_by_ode_quadrature(data, head, u, tol * 4.0);
                    let e = data.jordan.exp_neg(delta - u).to_dense();
                    // (inner · C_p · e)_{row,col} with C_p = b_p 1ᵀ:
                    // Σ_a inner[row,a] b_p[a] · Σ_b e[b,col]... C_p[a,b] = b_p[a]
                    let left: f64 = (0..r).map(|a| inner.get(row, a) * data.b[p][a]).sum();
                    let right: f64 = (0..r).map(|b| e.get(b, col)).sum();
                    left * right
                },
                0.0,
                delta,
                tol,
                200,
            );
            out.set(row, col, val);
        }
    }
    out
}
