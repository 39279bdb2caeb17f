//! Floquet matrix of the semiclassical Rabi model `H(t) = (Ω/2)σ_z + λ cos(ωt) σ_x`
//! restricted to one parity sector, and an elementwise comparison against the
//! binary-lattice Hamiltonian.
//!
//! In the Fourier basis `|s, k⟩` (spin `s = ±`, photon block `k`) the drive
//! couples `|s, k⟩ ↔ |−s, k±1⟩`, so the parity `s·(−1)^k` is conserved. The
//! sector with `s = (−1)^k` ordered by `k` is a tridiagonal chain with
//! diagonal `kω + (−1)^k Ω/2`: the lattice diagonal with `n = k`, `F = ω`,
//! `ε = Ω`. The other sector carries `−Ω`. Basis phases are chosen so the
//! block coupling enters as `−c·λ`, matching the `−V` hopping sign.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, to_rabi_params, LatticeParams, RabiParams};
use crate::linalg::HermitianMatrix;

/// Sector states required beyond the compared window on each side.
pub const TRUNCATION_MARGIN: i64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingFactor {
    /// Block coupling λ/2, the textbook value for a `λ cos ωt` drive.
    Half,
    /// Block coupling λ.
    Full,
}

impl CouplingFactor {
    pub fn value(self) -> f64 {
        match self {
            CouplingFactor::Half => 0.5,
            CouplingFactor::Full => 1.0,
        }
    }
}

/// Parity sector. `Odd` (spin `s = (−1)^k`) maps onto `+ε`, `Even` onto `−ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Odd,
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetBlockSpec {
    pub params: RabiParams,
    pub k_min: i64,
    /// Inclusive.
    pub k_max: i64,
    pub coupling_factor: CouplingFactor,
    pub sector: Sector,
}

impl FloquetBlockSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.k_min >= self.k_max {
            return Err(Error::InvalidParameter {
                name: "k_max",
                reason: format!("need k_min < k_max, got [{}, {}]", self.k_min, self.k_max),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    fn spin(&self, k: i64) -> f64 {
        let s = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        match self.sector {
            Sector::Odd => s,
            Sector::Even => -s,
        }
    }
}

pub fn build_rabi_floquet(spec: &FloquetBlockSpec) -> Result<HermitianMatrix> {
    spec.validate()?;
    let RabiParams { omega, splitting, lambda } = spec.params;
    let n = spec.dim();
    let coupling = -spec.coupling_factor.value() * lambda;
    let mut h = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let k = spec.k_min + i as i64;
        h[[i, i]] = k as f64 * omega + 0.5 * splitting * spec.spin(k);
        if i + 1 < n {
            h[[i, i + 1]] = coupling;
            h[[i + 1, i]] = coupling;
        }
    }
    HermitianMatrix::from_real(&h)
}

/// Max elementwise deviation between the Floquet rows `k_start..k_start+window`
/// of `spec` and lattice rows `0..window`, after removing the mean diagonal
/// offset.
pub fn equivalence_deviation(
    spec: &FloquetBlockSpec,
    lattice: &LatticeParams,
    window: usize,
    k_start: i64,
) -> Result<f64> {
    if window < 1 || window > lattice.n_sites {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("need 1 <= window <= {}, got {window}", lattice.n_sites),
        });
    }
    let k_end = k_start + window as i64 - 1;
    let have = (k_start - spec.k_min).min(spec.k_max - k_end);
    if have < TRUNCATION_MARGIN {
        return Err(Error::TruncationTooSmall { needed: TRUNCATION_MARGIN, have });
    }
    let floquet = build_rabi_floquet(spec)?;
    let h = build_hamiltonian(lattice)?;
    let off = (k_start - spec.k_min) as usize;

    let offset = (0..window).map(|i| floquet.get(off + i, off + i).re - h.get(i, i).re).sum::<f64>() / window as f64;
    let mut worst = 0.0f64;
    for i in 0..window {
        for j in 0..window {
            let shift = if i == j { offset } else { 0.0 };
            worst = worst.max((floquet.get(off + i, off + j) - h.get(i, j) - shift).norm());
        }
    }
    Ok(worst)
}

/// Builds the Floquet matrix from `to_rabi_params(p)` with the minimum
/// truncation margin and compares the first `window` lattice rows.
pub fn lattice_equivalence_check(p: &LatticeParams, window: usize, factor: CouplingFactor) -> Result<f64> {
    p.validate()?;
    let k_start = p.site_origin as i64;
    let spec = FloquetBlockSpec {
        params: to_rabi_params(p),
        k_min: k_start - TRUNCATION_MARGIN,
        k_max: k_start + window as i64 - 1 + TRUNCATION_MARGIN,
        coupling_factor: factor,
        sector: Sector::Odd,
    };
    equivalence_deviation(&spec, p, window, k_start)
}

/// Determines which block-coupling convention reproduces the lattice exactly,
/// using a weak-coupling probe (ω = Ω = 1, λ = 0.05, 12 sites).
pub fn pin_coupling_factor() -> Result<CouplingFactor> {
    let probe = LatticeParams::new(12, 0.05, 1.0, 1.0)?;
    let half = lattice_equivalence_check(&probe, 12, CouplingFactor::Half)?;
    let full = lattice_equivalence_check(&probe, 12, CouplingFactor::Full)?;
    match (half < 1e-12, full < 1e-12) {
        (true, false) => Ok(CouplingFactor::Half),
        (false, true) => Ok(CouplingFactor::Full),
        _ => Err(Error::ConventionUnresolved { half, full }),
    }
}
