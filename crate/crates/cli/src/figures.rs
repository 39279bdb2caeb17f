//! Operating points of the reproduced figures and the period-law scan.

use binlattice::dynamics::{evolve_intensity_spectral, extract_period, uniform_grid};
use binlattice::lattice::build_hamiltonian;
use binlattice::linalg::eig_hermitian;
use binlattice::spectrum::{default_search_halfwidth, delta_min, delta_min_pair, locate_anticrossing};
use binlattice::LatticeParams;
use serde::Serialize;

use crate::error::CliResult;

pub const SCAN_ORDERS: [u32; 4] = [0, 1, 2, 3];
/// V/F for each entry of [`SCAN_ORDERS`].
pub const SCAN_COUPLING_RATIOS: [f64; 4] = [0.2, 0.6, 1.0, 1.0];
pub const SCAN_FORCES: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const N_SITES: usize = 12;
/// Figure site numbering starts at 1.
pub const FIGURE_ORIGIN: u32 = 1;
pub const SCAN_INPUT_LABEL: i64 = 4;
/// Simulated periods per scan point.
pub const SCAN_PERIODS: f64 = 4.0;
pub const SCAN_STEPS: usize = 2048;

/// A resonant lattice with its input site and resonant partner (array indices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub name: String,
    pub params: LatticeParams,
    pub input: usize,
    pub partner: usize,
}

/// Partner of `input` for positive ε.
pub fn raised_partner(params: &LatticeParams, input: usize, m: u32) -> Option<usize> {
    let step = 2 * m as i64 + 1;
    let t = if params.with_epsilon(1.0).is_raised(input) { input as i64 + step } else { input as i64 - step };
    (0..params.n_sites as i64).contains(&t).then_some(t as usize)
}

/// Scan-grid lattice at order `m` and force `f`, ε at the located anticrossing.
pub fn scan_lattice(
    m: u32,
    f: f64,
    ratio: f64,
    n_sites: usize,
    origin: u32,
    input: usize,
) -> CliResult<OperatingPoint> {
    let base = LatticeParams::new(n_sites, ratio * f, f, 0.0)?.with_origin(origin).with_order(m);
    base.check_site(input)?;
    let partner = raised_partner(&base, input, m)
        .ok_or(binlattice::Error::SiteOutOfRange { site: input + 2 * m as usize + 1, n_sites })?;
    let eps = locate_anticrossing(&base, m, input, partner, default_search_halfwidth(m, base.v, f))?.epsilon_star;
    Ok(OperatingPoint { name: format!("scan m={m} F={f}"), params: base.with_epsilon(eps), input, partner })
}

/// The 24 scan points followed by the two cascade lattices.
pub fn figure_operating_points() -> CliResult<Vec<OperatingPoint>> {
    let input = (SCAN_INPUT_LABEL - FIGURE_ORIGIN as i64) as usize;
    let mut out = Vec::new();
    for (k, &m) in SCAN_ORDERS.iter().enumerate() {
        for &f in &SCAN_FORCES {
            out.push(scan_lattice(m, f, SCAN_COUPLING_RATIOS[k], N_SITES, FIGURE_ORIGIN, input)?);
        }
    }
    for (name, m, ratio, chain) in [("cascade m=1", 1u32, 0.25, (1usize, 4usize)), ("cascade m=0", 0, 0.05, (6, 5))] {
        let base = LatticeParams::new(N_SITES, ratio, 1.0, 0.0)?.with_origin(FIGURE_ORIGIN).with_order(m);
        let eps =
            locate_anticrossing(&base, m, chain.0, chain.1, default_search_halfwidth(m, ratio, 1.0))?.epsilon_star;
        out.push(OperatingPoint {
            name: name.into(),
            params: base.with_epsilon(eps),
            input: chain.0,
            partner: chain.1,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub m: u32,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub epsilon_star: f64,
    pub delta_min_global: f64,
    pub delta_min_pair: f64,
    pub t_theory: f64,
    pub t_fitted: f64,
    pub rel_error: f64,
    /// `ok`, or the reason the point failed.
    pub status: String,
}

impl ScanRow {
    fn failed(m: u32, f: f64, v: f64, reason: String) -> Self {
        Self {
            m,
            f,
            v,
            epsilon_star: f64::NAN,
            delta_min_global: f64::NAN,
            delta_min_pair: f64::NAN,
            t_theory: f64::NAN,
            t_fitted: f64::NAN,
            rel_error: f64::NAN,
            status: reason,
        }
    }
}

/// Locates ε*, computes both gaps, simulates [`SCAN_PERIODS`] periods from the
/// input site and fits the period of the input-site trace. Failures are
/// recorded in `status`.
pub fn scan_point(m: u32, f: f64, ratio: f64, n_sites: usize, origin: u32, input: usize) -> ScanRow {
    let v = ratio * f;
    let point = match scan_lattice(m, f, ratio, n_sites, origin, input) {
        Ok(p) => p,
        Err(e) => return ScanRow::failed(m, f, v, e.to_string()),
    };
    let spec = match build_hamiltonian(&point.params) {
        Ok(h) => eig_hermitian(&h),
        Err(e) => return ScanRow::failed(m, f, v, e.to_string()),
    };
    let (global, pair) = match (delta_min(&spec, None), delta_min_pair(&spec, point.input, point.partner)) {
        (Ok(g), Ok(p)) => (g, p),
        (Err(e), _) | (_, Err(e)) => return ScanRow::failed(m, f, v, e.to_string()),
    };
    let mut row = ScanRow {
        m,
        f,
        v,
        epsilon_star: point.params.epsilon,
        delta_min_global: global.delta_min,
        delta_min_pair: pair.delta_min,
        t_theory: global.period,
        t_fitted: f64::NAN,
        rel_error: f64::NAN,
        status: "ok".into(),
    };
    let grid = uniform_grid(SCAN_PERIODS * global.period, SCAN_STEPS);
    let fit = evolve_intensity_spectral(&spec, point.input, &grid)
        .and_then(|map| extract_period(&map.trace(point.input), &grid));
    match fit {
        Ok(est) => {
            row.t_fitted = est.period;
            row.rel_error = (est.period - global.period).abs() / global.period;
        }
        Err(e) => row.status = format!("fit failed: {e}"),
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_period_matches_gap() {
        let row = scan_point(0, 1.0, 0.2, 12, 1, 3);
        assert_eq!(row.status, "ok");
        assert!((row.t_theory - 2.0 * std::f64::consts::PI / row.delta_min_global).abs() < 1e-12);
        assert!(row.rel_error < 0.02);
    }

    #[test]
    fn figure_input_resonates_rightward() {
        let p = LatticeParams::new(12, 0.2, 1.0, 1.0).unwrap().with_origin(1);
        for m in 0..4 {
            assert_eq!(raised_partner(&p, 3, m), Some(3 + 2 * m as usize + 1));
        }
    }
}
