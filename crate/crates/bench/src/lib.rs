//! Shared fixtures for the kernel benchmarks.

use hhlab_core::fock::BosonBasisOcc;
use hhlab_core::lattice::LatticeGraph;
use hhlab_core::model::{assemble_h, CouplingSpec, ElectronBasis, SectorSpec};
use hhlab_core::sparse::SparseHermitian;

/// The 4-ring M = 0 Hamiltonian at the standard laboratory point.
pub fn ring_hamiltonian(n_max: usize) -> SparseHermitian {
    let graph = LatticeGraph::hypercubic(2, 1);
    let couplings = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
    let sector = SectorSpec::new(&graph, 0).unwrap();
    let phonons = BosonBasisOcc::new(4, n_max);
    assemble_h(
        &graph,
        &couplings,
        &ElectronBasis::Sector(sector.electron_basis()),
        &phonons,
        false,
    )
    .unwrap()
}
