//! The static-forced binary lattice and its closed-form resonance quantities.
//!
//! Site `n` (array index `i`, label `n = i + site_origin`) carries on-site
//! energy `n·F + (ε/2)(−1)ⁿ`; neighbours couple with `−V`. Even labels are
//! A-type (+ε/2), odd labels B-type (−ε/2).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub n_sites: usize,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub epsilon: f64,
    /// Intended resonance order; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_m: Option<u32>,
    /// Label of array index 0. Shifts the on-site parity and adds a uniform
    /// `site_origin·F` offset.
    #[serde(default)]
    pub site_origin: u32,
}

impl LatticeParams {
    pub fn new(n_sites: usize, v: f64, f: f64, epsilon: f64) -> Result<Self> {
        let p = Self { n_sites, v, f, epsilon, order_m: None, site_origin: 0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_order(mut self, m: u32) -> Self {
        self.order_m = Some(m);
        self
    }

    pub fn with_origin(mut self, origin: u32) -> Self {
        self.site_origin = origin;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParameter {
                name: "n_sites",
                reason: format!("need >= 2, got {}", self.n_sites),
            });
        }
        if !(self.f > 0.0) || !self.f.is_finite() {
            return Err(Error::InvalidParameter { name: "F", reason: format!("must be positive, got {}", self.f) });
        }
        if !(self.v >= 0.0) || !self.v.is_finite() {
            return Err(Error::InvalidParameter { name: "V", reason: format!("must be non-negative, got {}", self.v) });
        }
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter { name: "epsilon", reason: "must be finite".into() });
        }
        Ok(())
    }

    pub fn label(&self, index: usize) -> i64 {
        index as i64 + self.site_origin as i64
    }

    pub fn check_site(&self, index: usize) -> Result<()> {
        if index >= self.n_sites {
            return Err(Error::SiteOutOfRange { site: index, n_sites: self.n_sites });
        }
        Ok(())
    }

    /// (−1)ⁿ for the label of `index`.
    pub fn parity(&self, index: usize) -> f64 {
        if self.label(index).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn onsite_energy(&self, index: usize) -> f64 {
        self.label(index) as f64 * self.f + 0.5 * self.epsilon * self.parity(index)
    }

    /// Whether `index` sits on the raised sublattice under the current ε sign.
    /// A raised site is resonant with the partner `2m+1` sites to its right.
    pub fn is_raised(&self, index: usize) -> bool {
        self.epsilon * self.parity(index) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    /// Drive frequency ω.
    pub omega: f64,
    /// Level splitting Ω.
    #[serde(rename = "Omega")]
    pub splitting: f64,
    /// Coupling λ.
    pub lambda: f64,
}

impl RabiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must be positive, got {}", self.omega),
            });
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be non-negative, got {}", self.lambda),
            });
        }
        Ok(())
    }
}

pub fn build_hamiltonian(p: &LatticeParams) -> Result<HermitianMatrix> {
    p.validate()?;
    let n = p.n_sites;
    let mut h = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        h[[i, i]] = p.onsite_energy(i);
        if i + 1 < n {
            h[[i, i + 1]] = -p.v;
            h[[i + 1, i]] = -p.v;
        }
    }
    HermitianMatrix::from_real(&h)
}

/// ε = (2m+1)F
pub fn bare_resonance_epsilon(m: u32, f: f64) -> f64 {
    (2 * m + 1) as f64 * f
}

/// Bloch–Siegert displacement of the m-th order anticrossing.
pub fn bs_correction(m: u32, v: f64, f: f64) -> f64 {
    let base = v * v / f;
    if m == 0 {
        base
    } else {
        let m = m as f64;
        (2.0 * m + 1.0) / (m * (m + 1.0)) * base
    }
}

/// (2m+1)F − δ
pub fn shifted_resonance_epsilon(m: u32, v: f64, f: f64) -> f64 {
    bare_resonance_epsilon(m, f) - bs_correction(m, v, f)
}

pub fn flip_epsilon(p: &LatticeParams) -> LatticeParams {
    LatticeParams { epsilon: -p.epsilon, ..*p }
}

/// F ↔ ω, ε ↔ Ω, V ↔ λ
pub fn to_rabi_params(p: &LatticeParams) -> RabiParams {
    RabiParams { omega: p.f, splitting: p.epsilon, lambda: p.v }
}

/// Inverse of [`to_rabi_params`] for a chain of `n_sites`.
pub fn from_rabi_params(r: &RabiParams, n_sites: usize) -> Result<LatticeParams> {
    LatticeParams::new(n_sites, r.lambda, r.omega, r.splitting)
}
