//! FFT acceleration of the higher-order scheme for convolution kernels on
//! uniform grids.
//!
//! On a uniform grid the local weight tensors depend only on the lag
//! `j - i`, so both the coefficient interpolation values and the final
//! readouts are causal convolutions in the lag variable, evaluated here by
//! zero-padded FFTs of length `L = 2^k >= 2J`, batched over tensor
//! coordinates (two real sequences per complex transform).

use crate::counter::{cost, OpCounter};
use crate::kernel::MatrixKernelSpec;
use crate::multiindex::MultiIndexSet;
use crate::paths::Path;
use crate::quad::{ExponentSet, WeightEngine};
use crate::tensor::TruncatedTensor;
use crate::SchemeError;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Reusable forward/inverse complex plans of one padded length.
pub struct FftPlanSet {
    pub len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub transforms: std::cell::Cell<usize>,
}

impl FftPlanSet {
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "padded length must be a power of two");
        let mut planner = FftPlanner::new();
        FftPlanSet {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            transforms: std::cell::Cell::new(0),
        }
    }

    /// Smallest valid padded length for `j` sources.
    pub fn padded_len(j: usize) -> usize {
        (2 * j).next_power_of_two()
    }

    fn run_fwd(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        self.transforms.set(self.transforms.get() + 1);
    }

    fn run_inv(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
        self.transforms.set(self.transforms.get() + 1);
    }

    /// Forward transform of the zero-padded causal lag kernel
    /// `(0, w[0], w[1], …)`: entry `g` of `w` is the weight at lag `g+1`.
    pub fn transform_lag_kernel(&self, w: &[f64]) -> Vec<Complex64> {
        assert!(w.len() < self.len);
        let mut buf = vec![Complex64::default(); self.len];
        for (k, &v) in w.iter().enumerate() {
            buf[k + 1].re = v;
        }
        self.run_fwd(&mut buf);
        buf
    }

    /// Real-input round trip (for plan validation).
    pub fn roundtrip_error(&self, data: &[f64]) -> f64 {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(self.len, Complex64::default());
        self.run_fwd(&mut buf);
        self.run_inv(&mut buf);
        data.iter()
            .zip(&buf)
            .fold(0.0f64, |m, (&x, z)| m.max((x - z.re).abs().max(z.im.abs())))
    }
}

/// Causal convolution `out[j] = Σ_{i<j} ω(j-i) G_i` for a batch of real
/// coordinate sequences, given the transformed lag kernel. `sources[c]` is
/// the sequence of coordinate `c`; outputs have length `out_len`.
///
/// Two real sequences are packed into one complex transform and separated
/// by conjugate symmetry.
pub fn causal_convolve(
    plans: &FftPlanSet,
    w_hat: &[Complex64],
    sources: &[Vec<f64>],
    out_len: usize,
    counter: Option<&OpCounter>,
) -> Vec<Vec<f64>> {
    let l = plans.len;
    debug_assert_eq!(w_hat.len(), l);
    let mut out = Vec::with_capacity(sources.len());
    let mut ops = 0u64;
    let mut idx = 0;
    while idx < sources.len() {
        let a = &sources[idx];
        let b = sources.get(idx + 1);
        let mut buf = vec![Complex64::default(); l];
        for (k, &x) in a.iter().enumerate() {
            buf[k].re = x;
        }
        if let Some(b) = b {
            for (k, &x) in b.iter().enumerate() {
                buf[k].im = x;
            }
        }
        plans.run_fwd(&mut buf);
        ops += cost::fft(l);
        // split packed spectra, multiply, recombine
        let mut y = vec![Complex64::default(); l];
        for k in 0..l {
            let zk = buf[k];
            let zc = buf[(l - k) % l].conj();
            let ak = 0.5 * (zk + zc);
            let bk = Complex64::new(0.0, -0.5) * (zk - zc);
            y[k] = (ak + Complex64::new(0.0, 1.0) * bk) * w_hat[k];
        }
        ops += 12 * l as u64;
        plans.run_inv(&mut y);
        ops += cost::fft(l);
        out.push(y[..out_len].iter().map(|z| z.re).collect());
        if b.is_some() {
            out.push(y[..out_len].iter().map(|z| z.im).collect());
        }
        idx += 2;
    }
    if let Some(c) = counter {
        c.add(ops);
    }
    out
}

/// Lag-indexed scheme weights: for node `a`, exponent index `ir` and source
/// term `sid` (letter pair `(ℓ, p)` at local order `r`), the transformed
/// sequence of `α` values over lags.
pub struct LagWeights {
    /// `hat[a][ir][sid]`, each of padded length `L`
    pub hat: Vec<Vec<Vec<Vec<Complex64>>>>,
    /// `(r, degree-rank of ℓ, p)` per source id
    pub source_terms: Vec<(usize, usize, usize)>,
    pub padded_len: usize,
}

pub struct FftRun {
    pub outputs: Vec<TruncatedTensor>,
    pub ops: u64,
    pub padded_len: usize,
    pub transforms: usize,
}

/// FFT-accelerated higher-order scheme. Requires a uniform grid and a
/// convolution kernel; output matches [`crate::quad::run_scheme`] with the
/// same exponents and nodes up to FFT rounding.
pub fn run_fft_scheme(
    path: &Path,
    spec: &MatrixKernelSpec,
    trunc: usize,
    es: &ExponentSet,
    counter: Option<&OpCounter>,
) -> Result<FftRun, SchemeError> {
    path.validate()?;
    if path.dim() != spec.input_dim() {
        return Err(SchemeError::DimensionMismatch {
            got: path.dim(),
            want: spec.input_dim(),
        });
    }
    if !spec.is_convolution() {
        return Err(SchemeError::Invalid(
            "the FFT scheme requires a convolution kernel".into(),
        ));
    }
    let h = path.uniform_step()?;
    let jj = path.segments();
    let q = spec.q();
    let m = spec.ambient_dim();
    let nb = es.len();
    let l = FftPlanSet::padded_len(jj);
    let plans = FftPlanSet::new(l);
    let t0 = path.times[0];

    // shuffle-polynomial source monomials per cell:
    // mono[i][d][rank] = y^{⧢ℓ}/ℓ! as a degree-d block (q=1: y^{⊗d})
    let mset = MultiIndexSet::new(q, trunc.saturating_sub(1));
    let ys: Vec<Vec<Vec<f64>>> = (1..=jj)
        .map(|j| spec.apply_maps(&path.increment(j)))
        .collect();
    let mut mono: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(jj);
    for y in &ys {
        let mut per_deg: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]]];
        for d in 1..trunc {
            let ranks = mset.at_degree(d).len();
            let mut blocks = vec![vec![0.0; m.pow(d as u32)]; ranks];
            for (rank, ell) in mset.at_degree(d).iter().enumerate() {
                // M(ℓ) = Σ_r 1_{ℓ_r>0} M(ℓ-1_r) ⊗ y_r
                for (r, &lr) in ell.iter().enumerate() {
                    if lr == 0 {
                        continue;
                    }
                    let mut down = ell.clone();
                    down[r] -= 1;
                    let down_rank = mset.rank(&down).expect("enumerated");
                    let prev = &per_deg[d - 1][down_rank];
                    let dst = &mut blocks[rank];
                    for (i, &pi) in prev.iter().enumerate() {
                        if pi == 0.0 {
                            continue;
                        }
                        for (jy, &yj) in y[r].iter().enumerate() {
                            dst[i * m + jy] += pi * yj;
                        }
                    }
                }
            }
            per_deg.push(blocks);
        }
        mono.push(per_deg);
    }
    if let Some(c) = counter {
        // source monomial construction
        c.add(jj as u64 * (1..trunc).map(|d| (m as u64).pow(d as u32 + 1)).sum::<u64>());
    }

    // source terms: (r, rank of ℓ with |ℓ| = r-1, p)
    let mut source_terms = Vec::new();
    for r in 1..=trunc {
        if r - 1 > mset.max_degree() && r > 1 {
            break;
        }
        for rank in 0..mset.at_degree(r - 1).len() {
            for p in 0..q {
                source_terms.push((r, rank, p));
            }
        }
    }

    // lag weights: α_p(ℓ) at look-ahead gap (g + θ_a)h, g = 0..J-1
    let engine = WeightEngine::new(spec, trunc.saturating_sub(1));
    let mut hat: Vec<Vec<Vec<Vec<Complex64>>>> = Vec::with_capacity(nb);
    for a in 0..nb {
        let mut per_rho = Vec::with_capacity(nb);
        for &rho in &es.exponents {
            let mut tables = Vec::with_capacity(jj);
            for g in 0..jj {
                let tau = t0 + h * (1.0 + g as f64 + es.nodes[a]);
                tables.push(engine.table(t0, t0 + h, tau, rho)?);
            }
            let per_sid: Vec<Vec<Complex64>> = source_terms
                .iter()
                .map(|&(r, rank, p)| {
                    let w: Vec<f64> = (0..jj).map(|g| tables[g].alpha[r - 1][rank][p]).collect();
                    plans.transform_lag_kernel(&w)
                })
                .collect();
            if let Some(c) = counter {
                c.add(source_terms.len() as u64 * cost::fft(l));
            }
            per_rho.push(per_sid);
        }
        hat.push(per_rho);
    }
    let lag = LagWeights {
        hat,
        source_terms,
        padded_len: l,
    };
    let (hat, source_terms) = (&lag.hat, &lag.source_terms);

    // coefficient arrays D[ir][n]: flattened (J, m^n), level-by-level
    let mut dcoef: Vec<Vec<Vec<f64>>> = (0..nb)
        .map(|ir| {
            (0..=trunc)
                .map(|n| {
                    let width = m.pow(n as u32);
                    let mut block = vec![0.0; jj * width];
                    if n == 0 && es.exponents[ir] == 0.0 {
                        for c in 0..jj {
                            block[c] = 1.0;
                        }
                    }
                    block
                })
                .collect()
        })
        .collect();

    let mut outputs: Vec<TruncatedTensor> =
        vec![TruncatedTensor::unit(m, trunc); jj + 1];

    for n in 1..=trunc {
        let width = m.pow(n as u32);
        // build per-(ir, sid) source batches and convolve once per node
        // (the sources do not depend on the node a, only the weights do)
        let mut fhat: Vec<Vec<f64>> = vec![vec![0.0; jj * width]; nb];
        for ir in 0..nb {
            for (sid, &(r, rank, p)) in source_terms.iter().enumerate() {
                if r > n {
                    continue;
                }
                // G_i = π_{n-r} D_{i,ir} ⊗ (M_ℓ(y_i) ⊗ y_i^p), coordinate-major
                let lo_width = m.pow((n - r) as u32);
                let blk_width = m.pow((r - 1) as u32);
                let mut sources: Vec<Vec<f64>> = vec![vec![0.0; jj]; width];
                let dlo = &dcoef[ir][n - r];
                let mut any = false;
                for i in 0..jj {
                    let mblk = &mono[i][r - 1][rank];
                    let yp = &ys[i][p];
                    for lo in 0..lo_width {
                        let dval = dlo[i * lo_width + lo];
                        if dval == 0.0 {
                            continue;
                        }
                        any = true;
                        for (bidx, &mb) in mblk.iter().enumerate() {
                            if mb == 0.0 {
                                continue;
                            }
                            let co = dval * mb;
                            let base = (lo * blk_width + bidx) * m;
                            for (jy, &yj) in yp.iter().enumerate() {
                                sources[base + jy][i] = co * yj;
                            }
                        }
                    }
                }
                if let Some(c) = counter {
                    c.add(jj as u64 * width as u64);
                }
                if !any {
                    continue;
                }
                for a in 0..nb {
                    let conv =
                        causal_convolve(&plans, &hat[a][ir][sid], &sources, jj + 1, counter);
                    if a < nb {
                        // coefficient stage uses out[c], c = 0..J-1
                        for (cidx, seq) in conv.iter().enumerate() {
                            for c in 0..jj {
                                fhat[a][c * width + cidx] += seq[c];
                            }
                        }
                    }
                    // readout stage: node 0 bank, out[j], j = 1..J
                    if a == 0 {
                        for (cidx, seq) in conv.iter().enumerate() {
                            for j in 1..=jj {
                                outputs[j].level_mut(n)[cidx] += seq[j];
                            }
                        }
                    }
                }
            }
        }
        // componentwise interpolation solve per cell:
        // D_{c,ir}^{(n)} = Σ_a inv[ir][a] (δ_{n0}... + F̂-sum); level-0 of F̂
        // is handled by initialization, here n >= 1 so the unit drops out.
        for c in 0..jj {
            for ir in 0..nb {
                let dst = &mut dcoef[ir][n][c * width..(c + 1) * width];
                for a in 0..nb {
                    let w = es.inv_entry(ir, a);
                    if w == 0.0 {
                        continue;
                    }
                    let src = &fhat[a][c * width..(c + 1) * width];
                    for (dv, &sv) in dst.iter_mut().zip(src) {
                        *dv += w * sv;
                    }
                }
            }
        }
        if let Some(c) = counter {
            c.add((jj * nb * nb * width) as u64);
        }
    }

    Ok(FftRun {
        outputs,
        ops: counter.map(|c| c.get()).unwrap_or(0),
        padded_len: l,
        transforms: plans.transforms.get(),
    })
}
