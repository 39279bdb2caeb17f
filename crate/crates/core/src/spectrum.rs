//! Level gaps, the jump period `T = 2π/Δ_min`, and the numerical anticrossing
//! locator used to check the perturbative Bloch–Siegert shift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{bare_resonance_epsilon, bs_correction, build_hamiltonian, LatticeParams};
use crate::linalg::{eig_hermitian, SpectralDecomposition};
use crate::optimize::scan_then_golden;

/// Relative distinctness tolerance, in units of the spectral range.
pub const DEFAULT_DISTINCT_TOL: f64 = 1e-9;
const PRESCAN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMode {
    Global,
    PairRestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub delta_min: f64,
    /// Eigenvalue indices (ascending order) realizing the gap.
    pub pair_indices: (usize, usize),
    pub period: f64,
    pub mode: GapMode,
    /// Set when eigenvector selection for a pair-restricted gap was not clear cut.
    #[serde(default)]
    pub ambiguous: bool,
}

impl GapReport {
    fn new(delta_min: f64, pair_indices: (usize, usize), mode: GapMode, ambiguous: bool) -> Self {
        Self { delta_min, pair_indices, period: 2.0 * PI / delta_min, mode, ambiguous }
    }
}

/// Smallest gap between consecutive eigenvalues that differ by more than
/// `distinct_tol` (absolute). `None` picks `1e-9 × spectral range`.
pub fn delta_min(spec: &SpectralDecomposition, distinct_tol: Option<f64>) -> Result<GapReport> {
    let tol = distinct_tol.unwrap_or(DEFAULT_DISTINCT_TOL * spec.spectral_range());
    let ev = spec.eigenvalues();
    let best = ev
        .windows(2)
        .into_iter()
        .enumerate()
        .map(|(k, w)| (k, w[1] - w[0]))
        .filter(|&(_, gap)| gap > tol)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((k, gap)) => Ok(GapReport::new(gap, (k, k + 1), GapMode::Global, false)),
        None => Err(Error::NoDistinctPair { tolerance: tol }),
    }
}

/// Gap between the two eigenvectors carrying the most combined intensity on
/// sites `a` and `b`.
pub fn delta_min_pair(spec: &SpectralDecomposition, site_a: usize, site_b: usize) -> Result<GapReport> {
    let n = spec.dim();
    for s in [site_a, site_b] {
        if s >= n {
            return Err(Error::SiteOutOfRange { site: s, n_sites: n });
        }
    }
    let q = spec.eigenvectors();
    let mut weights: Vec<(usize, f64)> = (0..n)
        .map(|k| {
            let w = q[[site_a, k]].norm_sqr() + if site_b != site_a { q[[site_b, k]].norm_sqr() } else { 0.0 };
            (k, w)
        })
        .collect();
    weights.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let (i, j) = (weights[0].0, weights[1].0);
    let ambiguous = n > 2 && weights[2].1 >= 0.99 * weights[1].1;
    let pair = (i.min(j), i.max(j));
    let ev = spec.eigenvalues();
    let gap = (ev[pair.1] - ev[pair.0]).abs();
    Ok(GapReport::new(gap, pair, GapMode::PairRestricted, ambiguous))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anticrossing {
    pub epsilon_star: f64,
    pub gap_at_star: f64,
}

/// Minimizes the pair-restricted gap between `site_a` and `site_b` over
/// ε ∈ [(2m+1)F − w, (2m+1)F + w]. Everything in `base` except ε is used.
pub fn locate_anticrossing(
    base: &LatticeParams,
    m: u32,
    site_a: usize,
    site_b: usize,
    search_halfwidth: f64,
) -> Result<Anticrossing> {
    base.validate()?;
    base.check_site(site_a)?;
    base.check_site(site_b)?;
    let shift = bs_correction(m, base.v, base.f);
    if !(search_halfwidth > 0.0) || search_halfwidth < 2.0 * shift {
        return Err(Error::InvalidParameter {
            name: "search_halfwidth",
            reason: format!("need >= 2·δ = {:.6e} and > 0, got {search_halfwidth}", 2.0 * shift),
        });
    }
    let center = bare_resonance_epsilon(m, base.f);
    let (lo, hi) = (center - search_halfwidth, center + search_halfwidth);
    let gap_at = |eps: f64| -> f64 {
        let h = build_hamiltonian(&base.with_epsilon(eps)).expect("validated params");
        delta_min_pair(&eig_hermitian(&h), site_a, site_b).map(|g| g.delta_min).unwrap_or(f64::INFINITY)
    };
    let tol = 1e-8 * base.f;
    let found = scan_then_golden(gap_at, lo, hi, PRESCAN_POINTS, tol);
    if found.on_grid_edge() || found.x - lo < tol || hi - found.x < tol {
        return Err(Error::WindowTooSmall { at: found.x });
    }
    Ok(Anticrossing { epsilon_star: found.x, gap_at_star: found.value })
}

/// Default search half-width: the minimum the locator accepts, with a floor
/// for weak coupling.
pub fn default_search_halfwidth(m: u32, v: f64, f: f64) -> f64 {
    (2.0 * bs_correction(m, v, f)).max(0.05 * f)
}
