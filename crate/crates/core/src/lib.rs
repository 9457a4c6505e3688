//! Simulation and verification toolkit for the spatially homogeneous
//! Einstein–scalar-field system with cosmological constant on Bianchi type I
//! spacetime.
//!
//! The crate integrates the reduced first-order system in the variables
//! `u = ȧ/a`, `v = ḃ/b`, `ρ`, `ψ = φ̇²/2`, `φ`, monitors the Hamiltonian
//! constraint and the exact first integrals along trajectories, reconstructs
//! the metric scale factors, and mechanically checks the local-existence
//! (Picard contraction) and global-existence (monotonicity plus Riccati
//! comparison) properties on concrete runs.

pub mod bounds;
pub mod conserved;
pub mod constraint;
pub mod core_types;
pub mod ensemble;
pub mod evolution;
pub mod picard;
pub mod reconstruct;
pub mod sampling;

/// 8π, the coupling constant kept explicit throughout (geometric units).
pub const EIGHT_PI: f64 = 8.0 * std::f64::consts::PI;

pub use core_types::{
    from_physical, DataError, ExtendedState, InitialData, ReducedState, SampleDiagnostics,
    TerminationReason, Tolerances, Trajectory, TrajectoryMeta,
};
pub use evolution::{integrate, rhs, Derivative, EvolutionError, Method, SolverConfig};
