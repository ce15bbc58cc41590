//! Structure-preserving physics-informed neural networks for stiff 1-D
//! time-dependent PDEs with periodic boundary conditions.
//!
//! The network output is wrapped as `ũ = ψ + φ·u_nn`, which satisfies the
//! initial condition identically for any parameters, and the spatial input is
//! lifted to truncated Fourier features so `ũ` is exactly periodic. Training
//! then minimizes a single PDE-residual loss over Latin-hypercube collocation
//! points, first with Adam, then with L-BFGS. A Fourier pseudospectral
//! ETDRK4 solver provides self-converged reference solutions for error
//! reporting.
//!
//! Module map:
//!
//! - [`jet`] / [`tape`]: six-slot Taylor jets `(u, u_t, u_x .. u_xxxx)` and a
//!   reverse-mode tape for parameter gradients of any taped scalar.
//! - [`model`]: periodic embedding, dense network, hard-constraint wrapper.
//! - [`problems`]: the benchmark PDE catalog (Burgers, Allen-Cahn I/II,
//!   Cahn-Hilliard, Kuramoto-Sivashinsky, Gray-Scott,
//!   Belousov-Zhabotinsky, nonlinear Schrödinger).
//! - [`sampling`]: Latin hypercube collocation sets and mini-batch plans.
//! - [`training`]: residual losses, Adam, L-BFGS, and the two-stage loop.
//! - [`refsolver`]: ETDRK4 exponential integrator on a Fourier grid, with
//!   self-convergence ladders and conservation checks.
//! - [`metrics`]: relative L₂/L₁/L∞ error reports against a reference grid.
//! - [`pipeline`]: end-to-end runs (reference → train → evaluate → export)
//!   shared by the CLI and the runnable examples.
//!
//! See `examples/` for one runnable program per capability, and the `spinn`
//! binary for the same flows behind a command-line interface.

pub mod config;
pub mod error;
pub mod jet;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod problems;
pub mod refsolver;
pub mod sampling;
pub mod tape;
pub mod training;

pub use error::{Error, Result};
pub use jet::{Jet, Jet4};
pub use model::SpModel;
pub use problems::{catalog, Domain, PdeProblem};
pub use refsolver::GridSolution;
pub use tape::Tape;
