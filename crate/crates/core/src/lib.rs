//! Simulation and verification toolkit for critical branching random walks
//! on Z^d.
//!
//! * [`distributions`]: offspring and jump laws with hypothesis checks.
//! * [`green`]: lattice Green functions by two independent methods.
//! * [`brw`]: streaming depth-first sampler and per-sample visit statistics.
//! * [`oracle`]: exact small-scale computations (fixed-point brackets,
//!   exhaustive tree enumeration).
//! * [`experiments`]: Monte Carlo campaigns, scaling fits and sweeps.
//! * [`check`]: the executable acceptance suite shared by the CLI and tests.

pub mod brw;
pub mod check;
pub mod distributions;
pub mod experiments;
pub mod green;
pub mod lattice;
pub mod oracle;
pub mod point;
pub mod rng;
pub mod sampling;
