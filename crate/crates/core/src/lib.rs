//! Heterogeneous matrix-multiplication scheduling engine.
//!
//! The crate is organized around five layers:
//!
//! - [`matrix`]: dense row-major storage with explicit leading dimension,
//!   zero-copy rectangular views and quadrant splitting.
//! - [`kernel`]: the classic triple-loop multiply (the correctness oracle
//!   for everything else) and a 32x32-tiled host kernel.
//! - [`fastmm`]: Winograd-variant fast multiplication (7 recursive
//!   products, 15 additions) with dynamic peeling for odd sizes.
//! - [`engine`]: compute-engine descriptors, capacity estimation, and
//!   per-engine MM queues that run the three-phase
//!   copy-in / kernel / copy-out-and-add protocol. Accelerators are
//!   simulated: numerics are real, timing comes from a linear
//!   performance model.
//! - [`scheduler`]: recursive decomposition with threshold-based leaf
//!   dispatch onto the CPU, a single accelerator, or a balanced pair of
//!   accelerators, with a complete decision trace.
//! - [`bench`]: size sweeps, GFLOPS accounting, and CSV output for the
//!   `hetmm` command-line harness.
//!
//! All numeric code is generic over the scalar type via [`Scalar`];
//! single precision is the default throughout, double precision is used
//! as a referee in tests.

pub mod bench;
pub mod engine;
pub mod fastmm;
pub mod kernel;
pub mod matrix;
pub mod scalar;
pub mod scheduler;

mod error;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::Error;
pub use scalar::Scalar;

/// Single-precision matrix, the default element type.
pub type MatrixF32 = matrix::Matrix<f32>;
/// Double-precision matrix, used as a higher-precision referee.
pub type MatrixF64 = matrix::Matrix<f64>;
