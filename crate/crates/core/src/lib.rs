//! Time-dependent expectation values and position-momentum / position-velocity
//! uncertainties for a two-dimensional Gaussian wave packet evolving under the
//! gapped-graphene Dirac Hamiltonian.
//!
//! Every observable can be computed by two independent routes: Gaussian-weighted
//! 2D quadrature of analytic integrand kernels ([`quad`], [`model`]) and a
//! Hermite-polynomial triple-sum series ([`series`]). The [`analysis`] module
//! assembles uncertainties, spectral weights, long/short-time limits and the
//! critical gap values at which the graphene uncertainty products cross the
//! free-Hamiltonian baselines.
//!
//! Units throughout: lengths in nm, times in fs, wavevectors in 1/nm. The Fermi
//! velocity defaults to 1 nm/fs. Momentum uncertainties are reported in units of
//! hbar/nm, so uncertainty products are in units of hbar; hbar itself never
//! appears.

pub mod analysis;
pub mod model;
pub mod quad;
pub mod series;
pub mod special;

pub use model::{
    free_baseline, ConjugatePair, ExpectationResult, Method, ModelError, Observable,
    PacketConfig, SplitKernel,
};
pub use quad::{QuadError, QuadResult, QuadSettings};
