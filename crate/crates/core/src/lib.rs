//! Numerical laboratory for the Holstein-Hubbard model on finite bipartite
//! graphs: electrons with (possibly longer-range) Coulomb repulsion, coupled
//! linearly to dispersionless local phonons.
//!
//! The crate builds the model in the four guises used in its analysis and
//! cross-checks them against each other:
//!
//! - the original Hamiltonian H on occupation-number bases ([`model::assemble_h`]),
//! - the Lang-Firsov dressed Ĥ_M with phase-modulated hopping
//!   ([`model::lang_firsov`]),
//! - the hole-particle transformed ℍ_M ([`model::hole_particle`]) and its
//!   field-deformed cousin ℍ(h) ([`model::h_field`]),
//! - the fiberwise Hilbert-Schmidt representation over the phonon coordinate
//!   space, where positivity w.r.t. the canonical cone of PSD fibers is exactly
//!   checkable ([`cone`]).
//!
//! On top of these sit ground-state sector reports ([`spectral`]), exact
//! finite-temperature traces with Duhamel two-point functions and the charge
//! susceptibility bound ([`thermal`]), and a Brownian-bridge path-integral
//! estimator of the semigroup kernel with a strong product-integral propagator
//! ([`pathintegral`]).
//!
//! Conventions used throughout:
//!
//! - vertices are dense indices 0..|Λ|−1; the sublattice sign γ(x) = ±1 comes
//!   from two-coloring with +1 on the lowest-indexed vertex of each component;
//! - fermionic basis states are bit masks with site-index-ordered creation
//!   strings, so c_x picks up (−1)^{#occupied sites below x};
//! - phonon energy is normal-ordered: ω₀Σ b†b on occupation bases, and
//!   ½Σ(−∇² + ω₀²q²) − ω₀|Λ|/2 on the discretized coordinate grid.

pub mod cone;
pub mod convergence;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod pathintegral;
pub mod rng;
pub mod sparse;
pub mod spectral;
pub mod thermal;

pub use cone::{ConeField, GridHamiltonian};
pub use fock::{BosonBasisOcc, FermionBasis, QGrid, SpinSectorBasis};
pub use lattice::{FermionicGraph, LatticeGraph};
pub use model::{Coupling, CouplingGrid, CouplingSpec, EffectiveCoulomb, SectorSpec};
pub use sparse::{BasisTag, CooMatrix, CsrMatrix, SparseHermitian};
pub use spectral::GroundStateReport;
pub use thermal::ThermalState;

/// Complex scalar used everywhere; identical to `faer::c64`.
pub type C64 = num_complex::Complex64;
