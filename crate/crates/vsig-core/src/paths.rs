//! Piecewise-linear paths and the sample-path generator used by the
//! validation experiments.

use crate::SchemeError;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// A piecewise-linear path: values at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    /// one row of `d` coordinates per time point
    pub values: Vec<Vec<f64>>,
}

impl Path {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, SchemeError> {
        let p = Path { times, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if self.times.len() < 2 || self.times.len() != self.values.len() {
            return Err(SchemeError::BadGrid);
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SchemeError::BadGrid);
        }
        let d = self.values[0].len();
        if d == 0 || self.values.iter().any(|v| v.len() != d) {
            return Err(SchemeError::BadGrid);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    /// Increment over segment `j` (1-based endpoint: `x_{t_j} - x_{t_{j-1}}`).
    pub fn increment(&self, j: usize) -> Vec<f64> {
        self.values[j]
            .iter()
            .zip(&self.values[j - 1])
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Uniform-grid step, if the grid is uniform to relative 1e-12.
    pub fn uniform_step(&self) -> Result<f64, SchemeError> {
        let h = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            let step = w[1] - w[0];
            if (step - h).abs() > 1e-12 * h.abs().max(1.0) {
                return Err(SchemeError::NonUniformGrid(step, h));
            }
        }
        Ok(h)
    }

    /// Dyadic refinement: insert `2^level - 1` equispaced points into every
    /// segment. The refined path is the same function of time.
    pub fn dyadic_refine(&self, level: usize) -> Path {
        let pieces = 1usize << level;
        if pieces == 1 {
            return self.clone();
        }
        let d = self.dim();
        let mut times = Vec::with_capacity(self.segments() * pieces + 1);
        let mut values = Vec::with_capacity(self.segments() * pieces + 1);
        times.push(self.times[0]);
        values.push(self.values[0].clone());
        for j in 1..=self.segments() {
            let (t0, t1) = (self.times[j - 1], self.times[j]);
            for k in 1..pieces {
                let frac = k as f64 / pieces as f64;
                times.push(t0 + frac * (t1 - t0));
                let mut v = vec![0.0; d];
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi = self.values[j - 1][i] + frac * (self.values[j][i] - self.values[j - 1][i]);
                }
                values.push(v);
            }
            times.push(t1);
            values.push(self.values[j].clone());
        }
        Path { times, values }
    }
}

/// Parameters behind one generated sample path (recorded in manifests).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SamplePathParams {
    pub nu: f64,
    pub a_theta: f64,
    pub a_phi: f64,
    pub phases: [f64; 4],
}

fn uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + u * (hi - lo)
}

/// Fine-grid oversampling factor of the generator.
pub const FINE_FACTOR: usize = 16;

/// Draw the spherical-harmonic parameters for one path.
pub fn sample_params(rng: &mut ChaCha12Rng) -> SamplePathParams {
    SamplePathParams {
        nu: uniform(rng, 1.25, 3.75),
        a_theta: uniform(rng, 0.2, 1.0),
        a_phi: uniform(rng, 0.15, 0.65),
        phases: [
            uniform(rng, 0.0, 2.0 * std::f64::consts::PI),
            uniform(rng, 0.0, 2.0 * std::f64::consts::PI),
            uniform(rng, 0.0, 2.0 * std::f64::consts::PI),
            uniform(rng, 0.0, 2.0 * std::f64::consts::PI),
        ],
    }
}

/// Build the d=3 path for given parameters: the unit-speed derivative is
/// sampled on a fine grid of `FINE_FACTOR · segments` midpoints, cumulatively
/// summed, and subsampled to `segments + 1` points on `[0, 1]`.
pub fn path_from_params(params: &SamplePathParams, segments: usize) -> Path {
    let pi = std::f64::consts::PI;
    let n = FINE_FACTOR * segments;
    let mut x = vec![0.0f64; 3];
    let mut values = Vec::with_capacity(segments + 1);
    values.push(x.clone());
    let dt = 1.0 / n as f64;
    for k in 0..n {
        let t = (k as f64 + 0.5) * dt;
        let theta = 2.0 * pi * params.nu * t
            + params.a_theta * (2.0 * pi * t + params.phases[0]).sin()
            + 0.35 * params.a_theta * (6.0 * pi * t + params.phases[2]).sin();
        let phi = 0.5 * pi
            + params.a_phi * (4.0 * pi * t + params.phases[1]).sin()
            + 0.25 * params.a_phi * (8.0 * pi * t + params.phases[3]).sin();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        x[0] += ct * sp * dt;
        x[1] += st * sp * dt;
        x[2] += cp * dt;
        if (k + 1) % FINE_FACTOR == 0 {
            values.push(x.clone());
        }
    }
    let times = (0..=segments).map(|j| j as f64 / segments as f64).collect();
    Path { times, values }
}

/// Generate `count` sample paths with `segments` segments each from a seed.
pub fn generate(seed: u64, count: usize, segments: usize) -> Vec<(SamplePathParams, Path)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let params = sample_params(&mut rng);
            let path = path_from_params(&params, segments);
            (params, path)
        })
        .collect()
}
