//! Dense truncated tensor algebra `T^N(R^m)`.
//!
//! An element is stored level-major: for each degree `n = 0..=N` a
//! contiguous block of `m^n` coefficients in lexicographic word order, the
//! word `i_1…i_n` (letters `1..=m`) sitting at index
//! `Σ_k (i_k − 1)·m^{n−k}` of its block. Level 0 is the scalar unit slot,
//! so the algebra unit is `(1, 0, …)`.

use serde::{Deserialize, Serialize};

/// Errors raised by tensor-algebra operations.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TensorError {
    #[error("operands live in different algebras: T^{n1}(R^{m1}) vs T^{n2}(R^{m2})")]
    ShapeMismatch {
        m1: usize,
        n1: usize,
        m2: usize,
        n2: usize,
    },
    #[error("degree {0} exceeds truncation level {1}")]
    DegreeOverflow(usize, usize),
    #[error("letter {0} outside alphabet 1..={1}")]
    BadLetter(usize, usize),
    #[error("non-finite coefficient produced")]
    NonFinite,
    #[error("malformed serialization: {0}")]
    Malformed(String),
}

/// A word over the alphabet `{1..q}`; the empty word is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lexicographic index of the word within its level block.
    pub fn index(&self, m: usize) -> Result<usize, TensorError> {
        let mut idx = 0;
        for &l in &self.0 {
            if l < 1 || l > m {
                return Err(TensorError::BadLetter(l, m));
            }
            idx = idx * m + (l - 1);
        }
        Ok(idx)
    }

    /// Inverse of [`Word::index`] for a word of length `n`.
    pub fn from_index(mut idx: usize, n: usize, m: usize) -> Self {
        let mut letters = vec![1usize; n];
        for k in (0..n).rev() {
            letters[k] = idx % m + 1;
            idx /= m;
        }
        Word(letters)
    }
}

/// Number of coefficients in levels `0..=n`, i.e. `Σ_{k<=n} m^k`.
pub fn storage_len(m: usize, n: usize) -> usize {
    let mut total = 0usize;
    let mut pw = 1usize;
    for _ in 0..=n {
        total += pw;
        pw *= m;
    }
    total
}

/// Element of `T^N(R^m)` with dense level-major coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    m: usize,
    trunc: usize,
    data: Vec<f64>,
}

impl TruncatedTensor {
    /// The zero tensor.
    pub fn zero(m: usize, trunc: usize) -> Self {
        assert!(m >= 1, "ambient dimension must be >= 1");
        TruncatedTensor {
            m,
            trunc,
            data: vec![0.0; storage_len(m, trunc)],
        }
    }

    /// The multiplicative unit `(1, 0, …)`.
    pub fn unit(m: usize, trunc: usize) -> Self {
        let mut t = Self::zero(m, trunc);
        t.data[0] = 1.0;
        t
    }

    /// Degree-1 embedding of a vector.
    pub fn from_vector(v: &[f64], trunc: usize) -> Self {
        let mut t = Self::zero(v.len(), trunc);
        if trunc >= 1 {
            t.level_mut(1).copy_from_slice(v);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn level_offset(&self, n: usize) -> usize {
        storage_len(self.m, n) - self.m.pow(n as u32)
    }

    /// Coefficients of degree `n`, a block of `m^n` values.
    pub fn level(&self, n: usize) -> &[f64] {
        let off = self.level_offset(n);
        &self.data[off..off + self.m.pow(n as u32)]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let off = self.level_offset(n);
        let len = self.m.pow(n as u32);
        &mut self.data[off..off + len]
    }

    /// Coefficient at a word (any length `<= N`).
    pub fn coeff(&self, w: &Word) -> Result<f64, TensorError> {
        if w.len() > self.trunc {
            return Err(TensorError::DegreeOverflow(w.len(), self.trunc));
        }
        Ok(self.level(w.len())[w.index(self.m)?])
    }

    pub fn set_coeff(&mut self, w: &Word, value: f64) -> Result<(), TensorError> {
        if w.len() > self.trunc {
            return Err(TensorError::DegreeOverflow(w.len(), self.trunc));
        }
        let idx = w.index(self.m)?;
        self.level_mut(w.len())[idx] = value;
        Ok(())
    }

    fn check_shape(&self, other: &Self) -> Result<(), TensorError> {
        if self.m != other.m || self.trunc != other.trunc {
            return Err(TensorError::ShapeMismatch {
                m1: self.m,
                n1: self.trunc,
                m2: other.m,
                n2: other.trunc,
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<(), TensorError> {
        self.check_shape(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    /// Dilation `D_{a,b}`: level `n >= 1` scaled by `b·a^{n−1}`, level 0 kept.
    pub fn scale_levels(&self, a: f64, b: f64) -> Self {
        let mut out = self.clone();
        let mut factor = b;
        for n in 1..=self.trunc {
            for x in out.level_mut(n) {
                *x *= factor;
            }
            factor *= a;
        }
        out
    }

    /// Truncated concatenation product `self ⊗_N other`.
    pub fn truncated_product(&self, other: &Self) -> Result<Self, TensorError> {
        self.check_shape(other)?;
        let mut out = Self::zero(self.m, self.trunc);
        out.add_truncated_product(1.0, self, other)?;
        Ok(out)
    }

    /// `self += a * (x ⊗_N y)`; the workhorse behind the schemes.
    pub fn add_truncated_product(
        &mut self,
        a: f64,
        x: &Self,
        y: &Self,
    ) -> Result<(), TensorError> {
        x.check_shape(y)?;
        self.check_shape(x)?;
        let m = self.m;
        for n in 0..=self.trunc {
            let out_off = self.level_offset(n);
            for r in 0..=n {
                let xl = x.level(r);
                let yl = y.level(n - r);
                let ylen = m.pow((n - r) as u32);
                for (i, &xi) in xl.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let axi = a * xi;
                    let base = out_off + i * ylen;
                    for (j, &yj) in yl.iter().enumerate() {
                        self.data[base + j] += axi * yj;
                    }
                }
            }
        }
        Ok(())
    }

    /// Right concatenation with a vector: maps level `n` into level `n+1`,
    /// dropping the old top level. Used by Horner-style recursions.
    pub fn concat_vector(level: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), level.len() * y.len());
        for (i, &xi) in level.iter().enumerate() {
            let base = i * y.len();
            for (j, &yj) in y.iter().enumerate() {
                out[base + j] = xi * yj;
            }
        }
    }

    /// Tensor exponential `Σ_n v^{⊗n}/n!`.
    pub fn tensor_exp(v: &[f64], trunc: usize) -> Self {
        let m = v.len();
        let mut out = Self::unit(m, trunc);
        for n in 1..=trunc {
            // previous level already holds v^{⊗(n-1)}/(n-1)!
            let (lo, hi) = split_levels(&mut out, n);
            let prev = level_slice(lo, m, n - 1);
            Self::concat_vector(prev, v, hi);
            for x in hi.iter_mut() {
                *x /= n as f64;
            }
        }
        out
    }

    /// Shuffle of a homogeneous degree-`k` block with a single vector,
    /// producing a degree-`k+1` block: `y` is inserted at every position.
    pub fn shuffle_level_by_vector(level: &[f64], k: usize, m: usize, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(level.len(), m.pow(k as u32));
        debug_assert_eq!(y.len(), m);
        let mut out = vec![0.0; m.pow((k + 1) as u32)];
        // position r: output index (a, i, b) with a in m^r, i in m, b in m^{k-r}
        for r in 0..=k {
            let alen = m.pow(r as u32);
            let blen = m.pow((k - r) as u32);
            for a in 0..alen {
                let in_base = a * blen;
                for (i, &yi) in y.iter().enumerate() {
                    let out_base = (a * m + i) * blen;
                    for b in 0..blen {
                        out[out_base + b] += level[in_base + b] * yi;
                    }
                }
            }
        }
        out
    }

    /// Shuffle with a vector on a full tensor: every level `k <= N-1` of
    /// `self` contributes to level `k+1` of the output.
    pub fn shuffle_by_vector(&self, y: &[f64]) -> Result<Self, TensorError> {
        if y.len() != self.m {
            return Err(TensorError::ShapeMismatch {
                m1: self.m,
                n1: self.trunc,
                m2: y.len(),
                n2: self.trunc,
            });
        }
        let mut out = Self::zero(self.m, self.trunc);
        for k in 0..self.trunc {
            let blk = Self::shuffle_level_by_vector(self.level(k), k, self.m, y);
            out.level_mut(k + 1).copy_from_slice(&blk);
        }
        Ok(out)
    }

    /// Fused evaluation of `self ⊗_N E` where `π_n E = β_n y^{⊗n}`
    /// (`β_0 = 0`), one Horner pass per output level.
    pub fn horner_vte(&self, y: &[f64], beta: &[f64]) -> Result<Self, TensorError> {
        if y.len() != self.m {
            return Err(TensorError::ShapeMismatch {
                m1: self.m,
                n1: self.trunc,
                m2: y.len(),
                n2: self.trunc,
            });
        }
        debug_assert!(beta.len() >= self.trunc + 1);
        let m = self.m;
        let mut out = Self::zero(m, self.trunc);
        let mut w = Vec::new();
        let mut w2 = Vec::new();
        for n in 1..=self.trunc {
            // W <- v^{(0)} β_n; W <- (W⊗y) + v^{(k)} β_{n−k}; out^{(n)} = W⊗y
            w.clear();
            w.push(self.level(0)[0] * beta[n]);
            for k in 1..n {
                w2.resize(w.len() * m, 0.0);
                Self::concat_vector(&w, y, &mut w2);
                let vk = self.level(k);
                let b = beta[n - k];
                for (t, &v) in w2.iter_mut().zip(vk) {
                    *t += v * b;
                }
                std::mem::swap(&mut w, &mut w2);
            }
            let out_lvl = out.level_mut(n);
            Self::concat_vector(&w, y, out_lvl);
        }
        Ok(out)
    }

    /// Max-norm over one level.
    pub fn level_max_norm(&self, n: usize) -> f64 {
        self.level(n).iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Max over levels of `n! · max |Δ coefficient|` against `other`.
    pub fn factorially_adjusted_distance(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        let mut fact = 1.0;
        for n in 0..=self.trunc {
            if n > 0 {
                fact *= n as f64;
            }
            let d = self
                .level(n)
                .iter()
                .zip(other.level(n))
                .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()));
            worst = worst.max(fact * d);
        }
        worst
    }

    /// Euclidean inner product of the coefficient vectors.
    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

fn split_levels(t: &mut TruncatedTensor, n: usize) -> (&[f64], &mut [f64]) {
    let off = storage_len(t.m, n) - t.m.pow(n as u32);
    let len = t.m.pow(n as u32);
    let (lo, hi) = t.data.split_at_mut(off);
    (lo, &mut hi[..len])
}

fn level_slice(data: &[f64], m: usize, n: usize) -> &[f64] {
    let off = storage_len(m, n) - m.pow(n as u32);
    &data[off..off + m.pow(n as u32)]
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TensorJson {
    m: usize,
    #[serde(rename = "N")]
    trunc: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    pub fn to_json(&self) -> String {
        let levels = (0..=self.trunc).map(|n| self.level(n).to_vec()).collect();
        serde_json::to_string(&TensorJson {
            m: self.m,
            trunc: self.trunc,
            levels,
        })
        .expect("tensor serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, TensorError> {
        let parsed: TensorJson =
            serde_json::from_str(s).map_err(|e| TensorError::Malformed(e.to_string()))?;
        let mut t = Self::zero(parsed.m, parsed.trunc);
        for (n, lvl) in parsed.levels.iter().enumerate() {
            if n > parsed.trunc || lvl.len() != parsed.m.pow(n as u32) {
                return Err(TensorError::Malformed(format!(
                    "level {n} has {} coefficients",
                    lvl.len()
                )));
            }
            t.level_mut(n).copy_from_slice(lvl);
        }
        Ok(t)
    }

    /// Flat little-endian layout: `u32 m`, `u32 N`, then all coefficients.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.data.len());
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&(self.trunc as u32).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, TensorError> {
        if bytes.len() < 8 {
            return Err(TensorError::Malformed("truncated header".into()));
        }
        let m = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let trunc = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if m == 0 {
            return Err(TensorError::Malformed("m = 0".into()));
        }
        let want = storage_len(m, trunc);
        if bytes.len() != 8 + 8 * want {
            return Err(TensorError::Malformed(format!(
                "expected {} coefficient bytes, got {}",
                8 * want,
                bytes.len() - 8
            )));
        }
        let mut t = Self::zero(m, trunc);
        for (i, chunk) in bytes[8..].chunks_exact(8).enumerate() {
            t.data[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(t)
    }
}
