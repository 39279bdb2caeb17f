//! Site-resolved intensity maps, period extraction and the jump fidelity.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::linalg::{eig_hermitian, HermitianMatrix, SpectralDecomposition, StateVector, C64};
use crate::optimize::{golden_section, scan_then_golden};

/// Row sums of every map must equal one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;
const TRANSFER_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Right => 1,
            Direction::Left => -1,
        }
    }

    /// Partner of `site` a jump of order `m` away, if it lies in `0..n_sites`.
    pub fn partner(self, site: usize, m: u32, n_sites: usize) -> Option<usize> {
        let t = site as i64 + self.sign() * (2 * m as i64 + 1);
        (0..n_sites as i64).contains(&t).then_some(t as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Lattice(LatticeParams),
    Protocol(String),
    Unspecified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub times: Vec<f64>,
    pub n_sites: usize,
    /// `times.len() × n_sites`
    pub intensities: Array2<f64>,
    pub input_site: usize,
    pub source: MapSource,
}

impl IntensityMap {
    pub fn with_source(mut self, source: MapSource) -> Self {
        self.source = source;
        self
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn trace(&self, site: usize) -> Vec<f64> {
        self.intensities.column(site).to_vec()
    }

    /// Largest |Σ_n I_n(t) − 1| over all rows.
    pub fn max_row_sum_error(&self) -> f64 {
        self.intensities.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Index of the grid time closest to `t` (earlier row wins ties).
    pub fn nearest_row(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&x| x < t);
        if idx == 0 {
            0
        } else if idx == self.times.len() {
            idx - 1
        } else if (self.times[idx] - t).abs() < (t - self.times[idx - 1]).abs() {
            idx
        } else {
            idx - 1
        }
    }

    /// Σ_n n·I_n for row `row` (array indices).
    pub fn centroid(&self, row: usize) -> f64 {
        self.intensities.row(row).iter().enumerate().map(|(n, &i)| n as f64 * i).sum()
    }

    /// Appends rows of `other`, shifting its times by `offset` and dropping its
    /// first row when `skip_first`.
    pub fn append(&mut self, other: &IntensityMap, offset: f64, skip_first: bool) {
        let start = usize::from(skip_first);
        let extra = other.rows() - start;
        let mut grown = Array2::zeros((self.rows() + extra, self.n_sites));
        grown.slice_mut(ndarray::s![..self.rows(), ..]).assign(&self.intensities);
        grown.slice_mut(ndarray::s![self.rows().., ..]).assign(&other.intensities.slice(ndarray::s![start.., ..]));
        self.intensities = grown;
        self.times.extend(other.times[start..].iter().map(|t| t + offset));
    }

    /// Intensities clamped to [0, 1] for serialization.
    pub fn clamped(&self) -> Array2<f64> {
        self.intensities.mapv(|x| x.clamp(0.0, 1.0))
    }
}

pub(crate) fn intensities_from(spec: &SpectralDecomposition, psi0: &StateVector, times: &[f64]) -> Array2<f64> {
    let coeffs = spec.project(psi0.amplitudes().view());
    let mut out = Array2::zeros((times.len(), spec.dim()));
    for (k, &t) in times.iter().enumerate() {
        let psi = spec.evolve_coefficients(&coeffs, t);
        out.row_mut(k).assign(&psi.mapv(|z| z.norm_sqr()));
    }
    out
}

/// |⟨n| e^{−iHt} |input⟩|² on each grid time.
pub fn evolve_intensity(h: &HermitianMatrix, input_site: usize, t_grid: &[f64]) -> Result<IntensityMap> {
    let spec = eig_hermitian(h);
    evolve_intensity_spectral(&spec, input_site, t_grid)
}

pub fn evolve_intensity_spectral(
    spec: &SpectralDecomposition,
    input_site: usize,
    t_grid: &[f64],
) -> Result<IntensityMap> {
    let psi0 = StateVector::basis(spec.dim(), input_site)?;
    check_grid(t_grid)?;
    Ok(IntensityMap {
        times: t_grid.to_vec(),
        n_sites: spec.dim(),
        intensities: intensities_from(spec, &psi0, t_grid),
        input_site,
        source: MapSource::Unspecified,
    })
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => Err(Error::InvalidParameter { name: "t_grid", reason: "empty".into() }),
        Some(&t0) if t0 != 0.0 => {
            Err(Error::InvalidParameter { name: "t_grid", reason: format!("must start at 0, starts at {t0}") })
        }
        _ if t_grid.windows(2).any(|w| !(w[1] >= w[0])) => {
            Err(Error::InvalidParameter { name: "t_grid", reason: "must be ascending".into() })
        }
        _ => Ok(()),
    }
}

/// `n + 1` uniform samples on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub period: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
    pub fft_seed_period: f64,
}

/// FFT peak pick followed by a least-squares fit of `A·cos(2πt/T + φ) + C`.
///
/// For each trial `T` the linear parameters are solved exactly, so the fit is
/// a one-dimensional minimization of the residual over `T`, bracketed by the
/// FFT bins adjacent to the peak.
pub fn extract_period(trace: &[f64], times: &[f64]) -> Result<PeriodEstimate> {
    let n = trace.len();
    if n != times.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: n });
    }
    if n < 16 {
        return Err(Error::InvalidParameter { name: "trace", reason: format!("need at least 16 samples, got {n}") });
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.iter().enumerate().any(|(k, &t)| (t - times[0] - k as f64 * dt).abs() > 1e-6 * dt) {
        return Err(Error::NonUniformGrid);
    }

    let mean = trace.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = trace.iter().map(|&x| C64::new(x - mean, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mags: Vec<f64> = buf[1..=half].iter().map(|z| z.norm()).collect();
    let (peak_idx, peak) =
        mags.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2];
    let scale = trace.iter().fold(0.0f64, |a, &x| a.max(x.abs())) * n as f64;
    if !(peak > 3.0 * floor) || peak <= 1e-10 * scale {
        return Err(Error::NoOscillation { peak, floor });
    }
    let bin = peak_idx + 1;
    if bin < 3 {
        return Err(Error::TooFewCycles { cycles: bin });
    }

    let span = n as f64 * dt;
    let seed = span / bin as f64;
    let t_rel: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
    let rss = |period: f64| fit_linear(trace, &t_rel, period).1;
    let lo = span / (bin as f64 + 1.0);
    let hi = span / (bin as f64 - 1.0);
    let best = scan_then_golden(rss, lo, hi, 33, 1e-12 * seed);
    let period = best.x;
    let ([a, b, c], sum_sq) = fit_linear(trace, &t_rel, period);
    Ok(PeriodEstimate {
        period,
        amplitude: (a * a + b * b).sqrt(),
        phase: (-b).atan2(a),
        offset: c,
        residual_rms: (sum_sq / n as f64).sqrt(),
        fft_seed_period: seed,
    })
}

/// Least squares for `a·cos(ωt) + b·sin(ωt) + c` at fixed period; returns the
/// coefficients and the residual sum of squares.
fn fit_linear(y: &[f64], t: &[f64], period: f64) -> ([f64; 3], f64) {
    let w = 2.0 * PI / period;
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (&yi, &ti) in y.iter().zip(t) {
        let row = [(w * ti).cos(), (w * ti).sin(), 1.0];
        for r in 0..3 {
            aty[r] += row[r] * yi;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let coef = solve3(ata, aty);
    let rss = y
        .iter()
        .zip(t)
        .map(|(&yi, &ti)| {
            let model = coef[0] * (w * ti).cos() + coef[1] * (w * ti).sin() + coef[2];
            (yi - model).powi(2)
        })
        .sum();
    (coef, rss)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        if a[col][col] == 0.0 {
            continue;
        }
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = if a[r][r] == 0.0 { 0.0 } else { (b[r] - s) / a[r][r] };
    }
    x
}

/// Jump fidelity: the minimum over cycles `ℓ < cycles` of
/// `I_target((2ℓ+1)T/2) / I_in(0)` and `I_in(ℓT) / I_in(0)`, sampled at the
/// nearest grid row.
pub fn jump_fidelity(
    map: &IntensityMap,
    j_in: usize,
    m: u32,
    direction: Direction,
    period: f64,
    cycles: usize,
) -> Result<f64> {
    if j_in >= map.n_sites {
        return Err(Error::SiteOutOfRange { site: j_in, n_sites: map.n_sites });
    }
    let target = direction.partner(j_in, m, map.n_sites).ok_or(Error::SiteOutOfRange {
        site: (j_in as i64 + direction.sign() * (2 * m as i64 + 1)).max(0) as usize,
        n_sites: map.n_sites,
    })?;
    if cycles == 0 || !(period > 0.0) {
        return Err(Error::InvalidParameter {
            name: "cycles",
            reason: "need at least one cycle of positive period".into(),
        });
    }
    let i0 = map.intensities[[0, j_in]];
    if !(i0 > 0.0) {
        return Err(Error::InvalidParameter { name: "j_in", reason: "input site carries no initial intensity".into() });
    }
    let slack = if map.rows() > 1 { 0.5 * map.horizon() / (map.rows() - 1) as f64 } else { 0.0 };
    let sample = |site: usize, t: f64| -> Result<f64> {
        if t > map.horizon() + slack {
            return Err(Error::BeyondHorizon { time: t, horizon: map.horizon() });
        }
        Ok(map.intensities[[map.nearest_row(t), site]])
    };
    let mut worst = f64::INFINITY;
    for l in 0..cycles {
        let half = sample(target, (2 * l + 1) as f64 * period / 2.0)?;
        let back = sample(j_in, l as f64 * period)?;
        worst = worst.min(half / i0).min(back / i0);
    }
    Ok(worst)
}

/// Whole cycles of `period` inside the map.
pub fn default_cycles(map: &IntensityMap, period: f64) -> usize {
    (map.horizon() / period + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPeak {
    pub t_star: f64,
    pub intensity: f64,
    /// The coarse maximum sat on the horizon; the true peak may lie beyond it.
    pub at_boundary: bool,
}

/// Time in `(0, horizon]` maximizing the target intensity from a localized
/// input on `source`.
pub fn transfer_max(h: &HermitianMatrix, source: usize, target: usize, horizon: f64) -> Result<TransferPeak> {
    let spec = eig_hermitian(h);
    let psi0 = StateVector::basis(spec.dim(), source)?;
    transfer_max_from(&spec, &psi0, target, horizon)
}

/// As [`transfer_max`], from an arbitrary initial state.
pub fn transfer_max_from(
    spec: &SpectralDecomposition,
    psi0: &StateVector,
    target: usize,
    horizon: f64,
) -> Result<TransferPeak> {
    if target >= spec.dim() {
        return Err(Error::SiteOutOfRange { site: target, n_sites: spec.dim() });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter { name: "horizon", reason: format!("must be positive, got {horizon}") });
    }
    let coeffs = spec.project(psi0.amplitudes().view());
    let at = |t: f64| spec.evolve_coefficients(&coeffs, t)[target].norm_sqr();
    let step = horizon / TRANSFER_GRID as f64;
    let node = |k: usize| if k == TRANSFER_GRID { horizon } else { step * k as f64 };
    let (mut best_k, mut best) = (1, f64::NEG_INFINITY);
    for k in 1..=TRANSFER_GRID {
        let v = at(node(k));
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let lo = node(best_k - 1).max(step * 1e-3);
    let hi = node((best_k + 1).min(TRANSFER_GRID));
    let refined = golden_section(|t| -at(t), lo, hi, 1e-6 * node(best_k));
    let (t_star, intensity) = if -refined.value > best { (refined.x, -refined.value) } else { (node(best_k), best) };
    Ok(TransferPeak { t_star, intensity, at_boundary: best_k == TRANSFER_GRID })
}

/// Intensities of a state at a single time.
pub fn intensities_at(spec: &SpectralDecomposition, psi0: &StateVector, t: f64) -> Array1<f64> {
    let coeffs = spec.project(psi0.amplitudes().view());
    spec.evolve_coefficients(&coeffs, t).mapv(|z| z.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{bs_correction, build_hamiltonian};
    use crate::spectrum::{default_search_halfwidth, delta_min, locate_anticrossing};

    fn flop() -> HermitianMatrix {
        build_hamiltonian(&LatticeParams::new(2, 0.5, 1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn single_time_row_is_the_input() {
        let map = evolve_intensity(&flop(), 1, &[0.0]).unwrap();
        assert!(map.intensities[[0, 0]].abs() < 1e-15);
        assert!((map.intensities[[0, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flop_trace_is_sine_squared() {
        let grid = uniform_grid(2.0 * PI, 400);
        let map = evolve_intensity(&flop(), 0, &grid).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            assert!((map.intensities[[k, 1]] - (0.5 * t).sin().powi(2)).abs() < 1e-13);
        }
        assert!(map.max_row_sum_error() < 1e-13);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(evolve_intensity(&flop(), 2, &[0.0]), Err(Error::SiteOutOfRange { .. })));
        assert!(evolve_intensity(&flop(), 0, &[0.1, 0.2]).is_err());
        assert!(evolve_intensity(&flop(), 0, &[0.0, 0.2, 0.1]).is_err());
    }

    #[test]
    fn m2_resonance_oscillates_between_4_and_9() {
        let (v, f) = (0.9, 0.9);
        let base = LatticeParams::new(12, v, f, 0.0).unwrap();
        let eps = locate_anticrossing(&base, 2, 4, 9, default_search_halfwidth(2, v, f)).unwrap().epsilon_star;
        let h = build_hamiltonian(&base.with_epsilon(eps)).unwrap();
        let t = delta_min(&eig_hermitian(&h), None).unwrap().period;
        let map = evolve_intensity(&h, 4, &uniform_grid(t, 512)).unwrap();
        let half = map.nearest_row(t / 2.0);
        let row = map.intensities.row(half);
        let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 9);
        // 4 and 9 together dominate every sample
        for r in map.intensities.rows() {
            assert!(r[4] + r[9] > 0.5);
        }
    }

    #[test]
    fn synthetic_cosine_period() {
        let times = uniform_grid(50.0, 5000);
        let trace: Vec<f64> = times.iter().map(|t| (2.0 * PI * t / 5.0).cos()).collect();
        let est = extract_period(&trace, &times).unwrap();
        assert!((est.period - 5.0).abs() < 1e-3, "{est:?}");
        assert!(est.residual_rms < 1e-6);
        assert!((est.amplitude - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flop_period_is_two_pi() {
        let grid = uniform_grid(8.0 * PI, 2048);
        let map = evolve_intensity(&flop(), 0, &grid).unwrap();
        let est = extract_period(&map.trace(1), &grid).unwrap();
        assert!((est.period - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn flat_trace_has_no_oscillation() {
        let times = uniform_grid(10.0, 200);
        let trace = vec![0.3; times.len()];
        assert!(matches!(extract_period(&trace, &times), Err(Error::NoOscillation { .. })));
    }

    #[test]
    fn too_few_cycles_rejected() {
        let times = uniform_grid(10.0, 1000);
        let trace: Vec<f64> = times.iter().map(|t| (2.0 * PI * t / 6.0).cos()).collect();
        assert!(matches!(extract_period(&trace, &times), Err(Error::TooFewCycles { .. })));
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let mut times = uniform_grid(10.0, 100);
        times[50] += 0.03;
        let trace: Vec<f64> = times.iter().map(|t| t.cos()).collect();
        assert!(matches!(extract_period(&trace, &times), Err(Error::NonUniformGrid)));
    }

    #[test]
    fn perfect_flop_fidelity() {
        let grid = uniform_grid(4.0 * PI, 2048);
        let map = evolve_intensity(&flop(), 0, &grid).unwrap();
        let f = jump_fidelity(&map, 0, 0, Direction::Right, 2.0 * PI, 2).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fidelity_rejects_missing_target_and_horizon() {
        let grid = uniform_grid(4.0 * PI, 256);
        let map = evolve_intensity(&flop(), 0, &grid).unwrap();
        assert!(jump_fidelity(&map, 0, 0, Direction::Left, 2.0 * PI, 1).is_err());
        assert!(matches!(jump_fidelity(&map, 0, 0, Direction::Right, 2.0 * PI, 3), Err(Error::BeyondHorizon { .. })));
    }

    #[test]
    fn detuned_m2_fidelity_collapses() {
        let (v, f) = (0.9, 0.9);
        let base = LatticeParams::new(12, v, f, 0.0).unwrap();
        let eps = locate_anticrossing(&base, 2, 4, 9, default_search_halfwidth(2, v, f)).unwrap().epsilon_star;
        let fid = |e: f64| {
            let h = build_hamiltonian(&base.with_epsilon(e)).unwrap();
            let t = delta_min(&eig_hermitian(&h), None).unwrap().period;
            let map = evolve_intensity(&h, 4, &uniform_grid(4.0 * t, 2048)).unwrap();
            jump_fidelity(&map, 4, 2, Direction::Right, t, 4).unwrap()
        };
        let on = fid(eps);
        let off = fid(eps + 5.0 * bs_correction(2, v, f));
        assert!(off < 0.2, "off = {off}");
        assert!(on - off > 0.5, "on = {on}, off = {off}");
    }

    #[test]
    fn flop_transfer_peak() {
        let p = transfer_max(&flop(), 0, 1, 2.0 * PI).unwrap();
        assert!((p.t_star - PI).abs() < 1e-5);
        assert!((p.intensity - 1.0).abs() < 1e-12);
        assert!(!p.at_boundary);
    }

    #[test]
    fn short_horizon_flags_boundary() {
        let p = transfer_max(&flop(), 0, 1, 1.0).unwrap();
        assert!(p.at_boundary);
    }

    #[test]
    fn m0_stage_transfer_time() {
        let eps = crate::lattice::shifted_resonance_epsilon(0, 0.05, 1.0);
        let h = build_hamiltonian(&LatticeParams::new(12, 0.05, 1.0, eps).unwrap()).unwrap();
        let p = transfer_max(&h, 7, 6, 50.0).unwrap();
        assert!((p.t_star - 31.0).abs() < 3.1, "{p:?}");
        assert!(p.intensity > 0.98);
    }

    #[test]
    fn time_reversal_restores_input() {
        let h = build_hamiltonian(&LatticeParams::new(12, 0.3, 0.7, 2.0).unwrap()).unwrap();
        let spec = eig_hermitian(&h);
        let psi0 = StateVector::basis(12, 5).unwrap();
        let forward = crate::linalg::apply(&crate::linalg::propagator(&spec, 13.7), &psi0).unwrap();
        let back = crate::linalg::apply(&crate::linalg::propagator(&spec, -13.7), &forward).unwrap();
        let i = back.intensities();
        for n in 0..12 {
            assert!((i[n] - if n == 5 { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }

    #[test]
    fn nearest_row_picks_closest() {
        let map = IntensityMap {
            times: vec![0.0, 1.0, 2.0],
            n_sites: 1,
            intensities: Array2::ones((3, 1)),
            input_site: 0,
            source: MapSource::Unspecified,
        };
        assert_eq!(map.nearest_row(0.4), 0);
        assert_eq!(map.nearest_row(0.6), 1);
        assert_eq!(map.nearest_row(7.0), 2);
        assert_eq!(map.nearest_row(-1.0), 0);
    }
}
