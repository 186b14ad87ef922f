//! Explicit floating-point operation counters.
//!
//! The scheme drivers tally multiply-add counts analytically per high-level
//! operation (tensor product, shuffle update, FFT, cell update). Counts are
//! shape-dependent only, hence deterministic across runs and threads, and
//! cheap enough to keep always on.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Shared multiply-add tally.
#[derive(Debug, Clone, Default)]
pub struct OpCounter {
    muladds: Arc<AtomicU64>,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.muladds.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.muladds.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.muladds.store(0, Ordering::Relaxed);
    }
}

/// Analytic multiply-add counts for the core kernels.
pub mod cost {
    /// `Σ_{k<=n} m^k`.
    pub fn storage(m: usize, n: usize) -> u64 {
        crate::tensor::storage_len(m, n) as u64
    }

    /// Truncated product `x ⊗_N y`: `Σ_n (n+1) m^n` multiply-adds.
    pub fn truncated_product(m: usize, trunc: usize) -> u64 {
        (0..=trunc)
            .map(|n| (n as u64 + 1) * (m as u64).pow(n as u32))
            .sum()
    }

    /// Concatenation of a degree-`k` block with a vector.
    pub fn concat_vector(m: usize, k: usize) -> u64 {
        (m as u64).pow(k as u32 + 1)
    }

    /// Shuffle of a degree-`k` block with a vector: `(k+1) m^{k+1}`.
    pub fn shuffle_level(m: usize, k: usize) -> u64 {
        (k as u64 + 1) * (m as u64).pow(k as u32 + 1)
    }

    /// Fused Horner pass producing all levels `1..=N`.
    pub fn horner_vte(m: usize, trunc: usize) -> u64 {
        // level n: n concatenations/updates on blocks of size up to m^n
        (1..=trunc)
            .map(|n| (1..=n).map(|k| 2 * (m as u64).pow(k as u32)).sum::<u64>())
            .sum()
    }

    /// Complex radix-2 FFT of length `l`: ~5 l log2 l real flops.
    pub fn fft(l: usize) -> u64 {
        let lg = usize::BITS - l.leading_zeros() - 1;
        5 * l as u64 * lg as u64
    }
}
