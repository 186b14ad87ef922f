//! The general higher-order approximative Volterra signature scheme.
//!
//! For each cell `[t_c, t_{c+1}]` the upper-parameter map
//! `u ↦ VSig^{t_c+u}_{0,t_c}` is interpolated in a set of fractional powers
//! `ℬ = {ρ_0=0 < ρ_1 < …}` at nodes `θ_a h_c`; the interpolation
//! coefficients feed weighted local tensor updates built from the kernel
//! weight tables, and a final triangular pass produces the diagonal values
//! `v_j ≈ π_{≤N} VSig^{t_j}_{t_0,t_j}`.
//!
//! Local evaluations dispatch on the kernel: a fused Horner pass for scalar
//! kernels, the shuffle-recursive multi-index pass for symmetric weights
//! with `q > 1`, and a brute-force word summation otherwise.

use crate::counter::{cost, OpCounter};
use crate::kernel::{coeff_tensor, symmetric_alpha, MatrixKernelSpec, SymmetricAlpha};
use crate::multiindex::MultiIndexSet;
use crate::paths::Path;
use crate::tensor::TruncatedTensor;
use crate::SchemeError;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Mutex;

// ---------------------------------------------------------------------------
// exponent sets
// ---------------------------------------------------------------------------

/// Exponents `ℬ` and interpolation nodes, with the factorized inverse of the
/// node matrix `(θ_a^{ρ_b})`.
#[derive(Debug, Clone)]
pub struct ExponentSet {
    pub exponents: Vec<f64>,
    pub nodes: Vec<f64>,
    /// row-major inverse of the node matrix
    inv: Vec<f64>,
    pub condition: f64,
}

impl ExponentSet {
    pub fn new(exponents: Vec<f64>, nodes: Vec<f64>) -> Result<Self, SchemeError> {
        let k = exponents.len();
        if k == 0 || nodes.len() != k {
            return Err(SchemeError::Invalid(
                "need matching nonempty exponent and node lists".into(),
            ));
        }
        if exponents[0] != 0.0 {
            return Err(SchemeError::Invalid("exponent set must start at ρ_0 = 0".into()));
        }
        if exponents.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SchemeError::Invalid("exponents must be strictly increasing".into()));
        }
        if nodes[0] != 0.0 {
            return Err(SchemeError::Invalid("first interpolation node must be θ_0 = 0".into()));
        }
        for i in 0..k {
            for j in i + 1..k {
                if nodes[i] == nodes[j] {
                    return Err(SchemeError::Invalid("interpolation nodes must be distinct".into()));
                }
            }
        }
        let mat: Vec<f64> = nodes
            .iter()
            .flat_map(|&th| {
                exponents.iter().map(move |&rho| {
                    if rho == 0.0 {
                        1.0
                    } else {
                        th.powf(rho)
                    }
                })
            })
            .collect();
        let inv = invert(&mat, k).ok_or(SchemeError::SingularNodes(f64::INFINITY))?;
        let norm = |m: &[f64]| -> f64 {
            (0..k)
                .map(|i| m[i * k..(i + 1) * k].iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let condition = norm(&mat) * norm(&inv);
        if !condition.is_finite() || condition > 1e14 {
            return Err(SchemeError::SingularNodes(condition));
        }
        Ok(ExponentSet {
            exponents,
            nodes,
            inv,
            condition,
        })
    }

    /// `ℬ = {0}`: the left-point scheme (exact for piecewise-constant kernels).
    pub fn order0() -> Self {
        Self::new(vec![0.0], vec![0.0]).expect("static set is valid")
    }

    /// `ℬ = {0, β, 1}` with nodes `{0, 1/2, 1}`.
    pub fn fractional_order1(beta: f64) -> Result<Self, SchemeError> {
        Self::new(vec![0.0, beta, 1.0], vec![0.0, 0.5, 1.0])
    }

    /// `ℬ = {0, β, 1, 1+β, 2}` with nodes `{0, 1/4, 1/2, 3/4, 1}`.
    pub fn fractional_order2(beta: f64) -> Result<Self, SchemeError> {
        Self::new(
            vec![0.0, beta, 1.0, 1.0 + beta, 2.0],
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
        )
    }

    /// Arbitrary exponents with equispaced nodes `θ_a = a/(|ℬ|-1)`.
    pub fn equispaced(exponents: Vec<f64>) -> Result<Self, SchemeError> {
        let k = exponents.len();
        let nodes = (0..k)
            .map(|a| if k == 1 { 0.0 } else { a as f64 / (k - 1) as f64 })
            .collect();
        Self::new(exponents, nodes)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry of the inverse node matrix (row = exponent, column = node).
    pub fn inv_entry(&self, row: usize, col: usize) -> f64 {
        self.inv[row * self.len() + col]
    }

    /// Componentwise solve for the normalized coefficients
    /// `D_ρ = C_ρ h^ρ` from interpolation values at the nodes:
    /// `Σ_ρ θ_a^ρ D_ρ = F̂^{θ_a}`. Uses the closed-form expressions for the
    /// order-1 fractional layout, the general inverse otherwise.
    pub fn solve_normalized(&self, fhat: &[TruncatedTensor]) -> Vec<TruncatedTensor> {
        debug_assert_eq!(fhat.len(), self.len());
        if let Some(sol) = self.solve_closed_form_order1(fhat) {
            return sol;
        }
        self.solve_general(fhat)
    }

    /// Unnormalized coefficients `C_ρ = D_ρ h^{-ρ}` for a cell of width `h`.
    pub fn solve(&self, fhat: &[TruncatedTensor], h: f64) -> Vec<TruncatedTensor> {
        let mut sol = self.solve_normalized(fhat);
        for (c, &rho) in sol.iter_mut().zip(&self.exponents) {
            if rho != 0.0 {
                c.scale(h.powf(-rho));
            }
        }
        sol
    }

    fn solve_general(&self, fhat: &[TruncatedTensor]) -> Vec<TruncatedTensor> {
        let k = self.len();
        let (m, trunc) = (fhat[0].dim(), fhat[0].trunc());
        (0..k)
            .map(|row| {
                let mut acc = TruncatedTensor::zero(m, trunc);
                for (a, f) in fhat.iter().enumerate() {
                    acc.axpy(self.inv[row * k + a], f).expect("shapes agree");
                }
                acc
            })
            .collect()
    }

    fn is_order1_fractional(&self) -> Option<f64> {
        if self.len() == 3
            && self.exponents[2] == 1.0
            && self.nodes == [0.0, 0.5, 1.0]
            && self.exponents[1] > 0.0
            && self.exponents[1] < 1.0
        {
            Some(self.exponents[1])
        } else {
            None
        }
    }

    fn solve_closed_form_order1(&self, fhat: &[TruncatedTensor]) -> Option<Vec<TruncatedTensor>> {
        let beta = self.is_order1_fractional()?;
        let denom = 2f64.powf(-beta) - 0.5;
        if denom.abs() < 1e-12 {
            return None; // β ≈ 1 degeneracy: fall back to the general solve
        }
        let (m, trunc) = (fhat[0].dim(), fhat[0].trunc());
        let mut d_half = fhat[1].clone();
        d_half.axpy(-1.0, &fhat[0]).ok()?;
        let mut d_one = fhat[2].clone();
        d_one.axpy(-1.0, &fhat[0]).ok()?;
        let mut c_beta = TruncatedTensor::zero(m, trunc);
        c_beta.axpy(1.0 / denom, &d_half).ok()?;
        c_beta.axpy(-0.5 / denom, &d_one).ok()?;
        let mut c_one = TruncatedTensor::zero(m, trunc);
        c_one.axpy(2f64.powf(-beta) / denom, &d_one).ok()?;
        c_one.axpy(-1.0 / denom, &d_half).ok()?;
        Some(vec![fhat[0].clone(), c_beta, c_one])
    }
}

fn invert(mat: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = mat.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap()
        })?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let d = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[row * n + j] -= f * a[col * n + j];
                inv[row * n + j] -= f * inv[col * n + j];
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// local evaluations
// ---------------------------------------------------------------------------

/// `v ⊗_N ℰ` by the shuffle-recursive pass over symmetric weights.
pub fn eval_vte_words(
    v: &TruncatedTensor,
    ys: &[Vec<f64>],
    alpha: &SymmetricAlpha,
    counter: Option<&OpCounter>,
) -> TruncatedTensor {
    let e = assemble_e_symmetric(v.dim(), v.trunc(), ys, alpha, counter);
    if let Some(c) = counter {
        c.add(cost::truncated_product(v.dim(), v.trunc()));
    }
    v.truncated_product(&e).expect("shapes agree")
}

/// The shuffle polynomial `ℰ = Σ_p (Σ_ℓ α_p(ℓ)/ℓ! y^{⧢ℓ}) ⊗ y_p`.
pub fn assemble_e_symmetric(
    m: usize,
    trunc: usize,
    ys: &[Vec<f64>],
    alpha: &SymmetricAlpha,
    counter: Option<&OpCounter>,
) -> TruncatedTensor {
    let q = alpha.q;
    let maxd = trunc.saturating_sub(1).min(alpha.max_ell);
    let mset = MultiIndexSet::new(q, maxd);
    let mut ops = 0u64;
    // E_p(ℓ) carries levels <= maxd - |ℓ|, filled by the descending recursion
    let mut tables: Vec<Vec<Vec<TruncatedTensor>>> = (0..=maxd)
        .map(|d| vec![vec![TruncatedTensor::zero(m, maxd - d); q]; mset.at_degree(d).len()])
        .collect();
    for d in (0..=maxd).rev() {
        for rank in 0..mset.at_degree(d).len() {
            let ell = &mset.at_degree(d)[rank];
            let ell_fact = MultiIndexSet::factorial(ell);
            for p in 0..q {
                tables[d][rank][p].level_mut(0)[0] = alpha.alpha[d][rank][p] / ell_fact;
            }
            if d == maxd {
                continue;
            }
            for letter in 0..q {
                let up = mset.rank_plus_one(d, rank, letter);
                let coeff = (ell[letter] as f64 + 1.0) / (d as f64 + 1.0);
                let y = &ys[letter];
                for p in 0..q {
                    let (src, dst) = {
                        let (lo, hi) = tables.split_at_mut(d + 1);
                        (&hi[0][up][p], &mut lo[d][rank][p])
                    };
                    for k in 0..(maxd - d).min(src.trunc() + 1) {
                        let blk = TruncatedTensor::shuffle_level_by_vector(src.level(k), k, m, y);
                        for (t, &vsrc) in dst.level_mut(k + 1).iter_mut().zip(&blk) {
                            *t += coeff * vsrc;
                        }
                        ops += cost::shuffle_level(m, k);
                    }
                }
            }
        }
    }
    let mut e = TruncatedTensor::zero(m, trunc);
    for p in 0..q {
        let sp = &tables[0][0][p];
        // e += S_p ⊗ y_p
        for k in 0..=sp.trunc() {
            if k + 1 > trunc {
                break;
            }
            let src = sp.level(k);
            let dst = e.level_mut(k + 1);
            for (i, &si) in src.iter().enumerate() {
                if si == 0.0 {
                    continue;
                }
                for (j, &yj) in ys[p].iter().enumerate() {
                    dst[i * m + j] += si * yj;
                }
            }
            ops += cost::concat_vector(m, k);
        }
    }
    if let Some(c) = counter {
        c.add(ops);
    }
    e
}

/// `v ⊗_N ℰ` by the fused Horner pass (scalar kernels `q = 1`).
pub fn eval_vte_horner(
    v: &TruncatedTensor,
    y: &[f64],
    alpha: &SymmetricAlpha,
    counter: Option<&OpCounter>,
) -> TruncatedTensor {
    debug_assert_eq!(alpha.q, 1);
    let trunc = v.trunc();
    let mut beta = vec![0.0; trunc + 1];
    for (n, b) in beta.iter_mut().enumerate().skip(1) {
        if n - 1 <= alpha.max_ell {
            *b = alpha.alpha[n - 1][0][0];
        }
    }
    if let Some(c) = counter {
        c.add(cost::horner_vte(v.dim(), trunc));
    }
    v.horner_vte(y, &beta).expect("shapes agree")
}

/// Brute-force word summation over a full coefficient tensor: the dispatch
/// fallback for weights without the permutation symmetry.
pub fn eval_vte_bruteforce(
    v: &TruncatedTensor,
    ys: &[Vec<f64>],
    coeffs: &TruncatedTensor,
    counter: Option<&OpCounter>,
) -> TruncatedTensor {
    let (m, trunc) = (v.dim(), v.trunc());
    let q = coeffs.dim();
    let mut e = TruncatedTensor::zero(m, trunc);
    let mut ops = 0u64;
    // iterate words levelwise, extending the previous level's monomials
    let mut monomials: Vec<Vec<f64>> = vec![vec![1.0]];
    for n in 1..=trunc {
        let mut next = Vec::with_capacity(monomials.len() * q);
        let lvl = coeffs.level(n);
        let dst = e.level_mut(n);
        for (idx, prev) in monomials.iter().enumerate() {
            for p in 0..q {
                let mut mono = vec![0.0; prev.len() * m];
                TruncatedTensor::concat_vector(prev, &ys[p], &mut mono);
                ops += cost::concat_vector(m, n - 1);
                let c = lvl[idx * q + p];
                if c != 0.0 {
                    for (t, &v) in dst.iter_mut().zip(&mono) {
                        *t += c * v;
                    }
                }
                next.push(mono);
            }
        }
        monomials = next;
    }
    if let Some(c) = counter {
        c.add(ops + cost::truncated_product(m, trunc));
    }
    v.truncated_product(&e).expect("shapes agree")
}

// ---------------------------------------------------------------------------
// weight cache
// ---------------------------------------------------------------------------

fn qbits(x: f64) -> u64 {
    x.to_bits() & !0xFF
}

/// Cache of symmetric weight tables keyed by the analytic arguments; for
/// convolution kernels the key depends only on `(t-s, τ-t, ρ)`, so uniform
/// grids collapse to one entry per lag.
pub struct WeightEngine<'a> {
    spec: &'a MatrixKernelSpec,
    max_ell: usize,
    convolution: bool,
    cache: Mutex<HashMap<(u64, u64, u64, u64), std::sync::Arc<SymmetricAlpha>>>,
}

impl<'a> WeightEngine<'a> {
    pub fn new(spec: &'a MatrixKernelSpec, max_ell: usize) -> Self {
        WeightEngine {
            spec,
            max_ell,
            convolution: spec.is_convolution(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn table(
        &self,
        s: f64,
        t: f64,
        tau: f64,
        rho: f64,
    ) -> Result<std::sync::Arc<SymmetricAlpha>, SchemeError> {
        let key = if self.convolution {
            (qbits(t - s), qbits(tau - t), qbits(rho), 0)
        } else {
            (qbits(s), qbits(t), qbits(tau), qbits(rho))
        };
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let table = symmetric_alpha(self.spec, s, t, tau, self.max_ell, rho)?;
        let arc = std::sync::Arc::new(table);
        self.cache.lock().unwrap().insert(key, arc.clone());
        Ok(arc)
    }

    pub fn entries(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

// ---------------------------------------------------------------------------
// the scheme driver
// ---------------------------------------------------------------------------

/// Which local evaluation subroutine to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    /// decide from the kernel: `q = 1` → Horner, symmetric → shuffle pass,
    /// otherwise brute-force word summation
    Auto,
    Horner,
    ShuffleWords,
    BruteForce,
}

#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub exponents: ExponentSet,
    /// optional readout times `τ_j >= t_j`, one per grid point
    pub readouts: Option<Vec<f64>>,
    pub eval_path: EvalPath,
}

impl QuadOptions {
    pub fn order0() -> Self {
        QuadOptions {
            exponents: ExponentSet::order0(),
            readouts: None,
            eval_path: EvalPath::Auto,
        }
    }

    pub fn with_exponents(exponents: ExponentSet) -> Self {
        QuadOptions {
            exponents,
            readouts: None,
            eval_path: EvalPath::Auto,
        }
    }
}

pub struct SchemeRun {
    /// `v_j ≈ π_{≤N} VSig^{t_j}_{t_0,t_j}`
    pub outputs: Vec<TruncatedTensor>,
    /// `ṽ_j ≈ π_{≤N} VSig^{τ_j}_{t_0,t_j}` when readout times were given
    pub readout_outputs: Option<Vec<TruncatedTensor>>,
    pub ops: u64,
    pub weight_tables: usize,
}

struct Dispatcher<'a> {
    spec: &'a MatrixKernelSpec,
    engine: WeightEngine<'a>,
    path_kind: EvalPath,
    trunc: usize,
}

impl<'a> Dispatcher<'a> {
    fn new(spec: &'a MatrixKernelSpec, trunc: usize, requested: EvalPath) -> Self {
        let path_kind = match requested {
            EvalPath::Auto => {
                if spec.q() == 1 {
                    EvalPath::Horner
                } else if spec.is_symmetric() {
                    EvalPath::ShuffleWords
                } else {
                    eprintln!(
                        "vsig: kernel weights lack permutation symmetry; \
                         falling back to brute-force word summation (cost grows like q^N)"
                    );
                    EvalPath::BruteForce
                }
            }
            other => other,
        };
        Dispatcher {
            spec,
            engine: WeightEngine::new(spec, trunc.saturating_sub(1)),
            path_kind,
            trunc,
        }
    }

    fn eval(
        &self,
        v: &TruncatedTensor,
        ys: &[Vec<f64>],
        s: f64,
        t: f64,
        tau: f64,
        rho: f64,
        counter: Option<&OpCounter>,
    ) -> Result<TruncatedTensor, SchemeError> {
        match self.path_kind {
            EvalPath::Horner => {
                let table = self.engine.table(s, t, tau, rho)?;
                Ok(eval_vte_horner(v, &ys[0], &table, counter))
            }
            EvalPath::ShuffleWords => {
                let table = self.engine.table(s, t, tau, rho)?;
                Ok(eval_vte_words(v, ys, &table, counter))
            }
            EvalPath::BruteForce => {
                let ct = coeff_tensor(self.spec, s, t, tau, self.trunc, rho)?;
                Ok(eval_vte_bruteforce(v, ys, &ct.tensor, counter))
            }
            EvalPath::Auto => unreachable!("resolved in new()"),
        }
    }
}

/// Run the higher-order scheme on a piecewise-linear path.
pub fn run_scheme(
    path: &Path,
    spec: &MatrixKernelSpec,
    trunc: usize,
    opts: &QuadOptions,
    counter: Option<&OpCounter>,
) -> Result<SchemeRun, SchemeError> {
    path.validate()?;
    if path.dim() != spec.input_dim() {
        return Err(SchemeError::DimensionMismatch {
            got: path.dim(),
            want: spec.input_dim(),
        });
    }
    if let Some(taus) = &opts.readouts {
        if taus.len() != path.times.len() {
            return Err(SchemeError::Invalid("need one readout time per grid point".into()));
        }
        for (tau, t) in taus.iter().zip(&path.times) {
            if tau < t {
                return Err(SchemeError::Invalid("readout times must satisfy τ_j >= t_j".into()));
            }
        }
    }
    let jj = path.segments();
    let m = spec.ambient_dim();
    let es = &opts.exponents;
    let nb = es.len();
    let dispatcher = Dispatcher::new(spec, trunc, opts.eval_path);

    // transformed increments per cell
    let ys: Vec<Vec<Vec<f64>>> = (1..=jj)
        .map(|j| spec.apply_maps(&path.increment(j)))
        .collect();

    // coefficient stage: sequential over cells
    let mut coeff: Vec<Vec<TruncatedTensor>> = Vec::with_capacity(jj);
    for c in 0..jj {
        let hc = path.times[c + 1] - path.times[c];
        let mut fhats = Vec::with_capacity(nb);
        for a in 0..nb {
            let tau = path.times[c] + es.nodes[a] * hc;
            let mut fhat = TruncatedTensor::unit(m, trunc);
            for (b, cb) in coeff.iter().enumerate().take(c) {
                for (ir, &rho) in es.exponents.iter().enumerate() {
                    let contrib = dispatcher.eval(
                        &cb[ir],
                        &ys[b],
                        path.times[b],
                        path.times[b + 1],
                        tau,
                        rho,
                        counter,
                    )?;
                    fhat.axpy(1.0, &contrib)?;
                }
            }
            fhats.push(fhat);
        }
        if let Some(cnt) = counter {
            cnt.add((nb * nb) as u64 * cost::storage(m, trunc));
        }
        let solved = es.solve_normalized(&fhats);
        // scheme-state invariant: the ρ = 0 coefficient interpolates a
        // group-like value at θ = 0, the others vanish at level 0
        debug_assert!((solved[0].level(0)[0] - 1.0).abs() < 1e-9);
        debug_assert!(solved[1..].iter().all(|c| c.level(0)[0].abs() < 1e-9));
        coeff.push(solved);
    }

    // readout stage: parallel over j, deterministic (independent outputs,
    // fixed in-j summation order)
    let compute_output = |j: usize, tau: f64| -> Result<TruncatedTensor, SchemeError> {
        let mut v = TruncatedTensor::unit(m, trunc);
        for c in 0..j {
            for (ir, &rho) in es.exponents.iter().enumerate() {
                let contrib = dispatcher.eval(
                    &coeff[c][ir],
                    &ys[c],
                    path.times[c],
                    path.times[c + 1],
                    tau,
                    rho,
                    counter,
                )?;
                v.axpy(1.0, &contrib)?;
            }
        }
        Ok(v)
    };

    let mut outputs = vec![TruncatedTensor::unit(m, trunc)];
    let rest: Result<Vec<_>, _> = (1..=jj)
        .into_par_iter()
        .map(|j| compute_output(j, path.times[j]))
        .collect();
    outputs.extend(rest?);

    let readout_outputs = match &opts.readouts {
        None => None,
        Some(taus) => {
            let vals: Result<Vec<_>, _> = (0..=jj)
                .into_par_iter()
                .map(|j| {
                    if taus[j] == path.times[j] {
                        Ok(outputs[j].clone())
                    } else {
                        compute_output(j, taus[j])
                    }
                })
                .collect();
            Some(vals?)
        }
    };

    Ok(SchemeRun {
        outputs,
        readout_outputs,
        ops: counter.map(|c| c.get()).unwrap_or(0),
        weight_tables: dispatcher.engine.entries(),
    })
}

/// Classical truncated signature of the transformed path `A·x` by
/// Chen/Horner steps; the reference object for constant-kernel reductions.
pub fn classical_signature(path: &Path, a_map: &crate::mat::RealMat, trunc: usize) -> TruncatedTensor {
    let m = a_map.rows;
    let mut sig = TruncatedTensor::unit(m, trunc);
    let mut beta = vec![0.0; trunc + 1];
    let mut fact = 1.0;
    for (n, b) in beta.iter_mut().enumerate().skip(1) {
        fact *= n as f64;
        *b = 1.0 / fact;
    }
    for j in 1..=path.segments() {
        let y = a_map.mul_vec(&path.increment(j));
        let incr = sig.horner_vte(&y, &beta).expect("shapes agree");
        sig.axpy(1.0, &incr).expect("shapes agree");
    }
    sig
}
