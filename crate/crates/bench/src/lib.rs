//! Fixtures shared by the benchmarks.

use binlattice::lattice::{build_hamiltonian, shifted_resonance_epsilon};
use binlattice::linalg::eig_hermitian;
use binlattice::{HermitianMatrix, LatticeParams, SpectralDecomposition};

/// Twelve-site lattice at order `m` with V = F = 0.9 and the shifted resonance.
pub fn resonant_lattice(m: u32) -> LatticeParams {
    LatticeParams::new(12, 0.9, 0.9, shifted_resonance_epsilon(m, 0.9, 0.9)).unwrap().with_order(m)
}

pub fn hamiltonian(m: u32) -> HermitianMatrix {
    build_hamiltonian(&resonant_lattice(m)).unwrap()
}

pub fn spectrum(m: u32) -> SpectralDecomposition {
    eig_hermitian(&hamiltonian(m))
}
