//! Numerical laboratory for the L²-critical nonlinear Schrödinger equation
//! `i u_t + Δu − |u|^{4/d} u = 0` on the rescaled torus `T^d_λ = R^d / λZ^d`, `d = 1, 2`.
//!
//! The crate bundles
//! * Fourier analysis on `T^d_λ` with the normalized counting measure `(dk)_λ`
//!   ([`lattice`], [`field`]),
//! * a Strang split-step integrator with conservation monitors ([`solver`]),
//! * the I-operator, first and second modified energies and the calculus of
//!   multilinear forms on the hyperplanes `Γ_n` ([`imethod`], [`multilinear`]),
//! * exact lattice-point kernels behind the bilinear Strichartz constants
//!   ([`counting`]) and an empirical Strichartz bench ([`strichartz`]),
//! * the batch experiment drivers used by the command line tool ([`experiments`]).

pub mod counting;
pub mod error;
pub mod experiments;
pub mod field;
pub mod imethod;
pub mod lattice;
pub mod multilinear;
pub mod solver;
pub mod strichartz;

pub use error::{LabError, Result};
pub use field::{FrequencyMultiplier, SpaceTimeField, SpectralField};
pub use lattice::{FrequencyIndex, TorusLattice};

pub use num_complex::Complex64;
