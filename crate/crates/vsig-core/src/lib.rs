//! Truncated Volterra signatures of piecewise-linear paths under
//! matrix-valued memory kernels.
//!
//! A path `x : [0,T] -> R^d` together with a kernel
//! `K(t,s) = Σ_p k_p(t,s) A_p` defines a family of kernel-weighted iterated
//! integrals indexed by a start time `s`, an end time `t` and a look-ahead
//! time `τ`, with values in the truncated tensor algebra `T^N(R^m)`. This
//! crate computes them three ways:
//!
//! * [`quad`] — a higher-order triangular recursion for general analytic
//!   kernel families (constant, exponential, fractional, Gamma, piecewise
//!   constant, state space), with configurable fractional exponent sets;
//! * [`fft`] — the same scheme accelerated by FFT lag convolutions for
//!   convolution kernels on uniform grids;
//! * [`fssk`] — an exact state-space recursion for kernels of
//!   exponential-polynomial-trigonometric type, in linear time.
//!
//! [`sigkernel`] evaluates the associated signature kernel
//! `κ(x,w) = ⟨VSig(x), VSig(w)⟩` through a Goursat PDE system without ever
//! forming tensors, and [`oracles`] holds slow reference implementations
//! (simplex quadrature, brute-force word sums, Euler and Adams schemes)
//! used to pin every fast path down in tests.

pub mod counter;
pub mod fft;
pub mod fssk;
pub mod kernel;
pub mod mat;
pub mod multiindex;
pub mod oracles;
pub mod paths;
pub mod quad;
pub mod quadrature;
pub mod sigkernel;
pub mod special;
pub mod tensor;
pub mod tmatrix;

pub use counter::OpCounter;
pub use kernel::{CoeffTensor, KernelError, MatrixKernelSpec, ScalarKernel};
pub use tensor::{TensorError, TruncatedTensor, Word};

/// Error type shared by the scheme drivers.
#[derive(Debug, thiserror::Error)]
pub enum SchemeError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("grid must be strictly increasing with at least two points")]
    BadGrid,
    #[error("uniform grid required: step {0} deviates from {1}")]
    NonUniformGrid(f64, f64),
    #[error("interpolation node matrix is singular (condition {0:.3e})")]
    SingularNodes(f64),
    #[error("path has {got} coordinates, kernel expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("{0}")]
    Invalid(String),
}
