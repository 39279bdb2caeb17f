//! Rectangular Mach–Zehnder mesh compilation.
//!
//! Each MZI acts on adjacent channels `(top, top + 1)` as
//! `T(θ, φ) = B·diag(e^{iθ}, 1)·B·diag(e^{iφ}, 1)` with the balanced coupler
//! `B = [[1, i], [i, 1]]/√2`, which evaluates to
//! `i·e^{iθ/2}·[[e^{iφ} sin(θ/2), cos(θ/2)], [e^{iφ} cos(θ/2), −sin(θ/2)]]`.
//! `θ = π` is the bar state (`T(π, π) = I`), `θ = π/2` the balanced splitter.
//! A program applies its settings in list order, then the output phase screen.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{UnitaryMatrix, C64};

const TAU: f64 = 2.0 * PI;
/// Input unitarity tolerance for decomposition.
pub const INPUT_TOLERANCE: f64 = 1e-8;
const HALF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziSetting {
    pub layer: usize,
    pub top_channel: usize,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshProgram {
    pub n_channels: usize,
    pub layout: Layout,
    pub quantization_step: Option<f64>,
    pub settings: Vec<MziSetting>,
    pub output_phases: Vec<f64>,
}

impl MeshProgram {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_channels;
        if n < 2 {
            return Err(Error::DimensionTooSmall { min: 2, got: n });
        }
        if self.settings.len() != n * (n - 1) / 2 {
            return Err(Error::DimensionMismatch { expected: n * (n - 1) / 2, got: self.settings.len() });
        }
        if self.output_phases.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.output_phases.len() });
        }
        if let Some(s) = self.settings.iter().find(|s| s.top_channel + 1 >= n) {
            return Err(Error::SiteOutOfRange { site: s.top_channel, n_sites: n - 1 });
        }
        Ok(())
    }

    /// Number of layers in use.
    pub fn depth(&self) -> usize {
        self.settings.iter().map(|s| s.layer + 1).max().unwrap_or(0)
    }

    /// All-bar program with zero output phases.
    pub fn identity(n_channels: usize) -> Self {
        let mut settings = Vec::with_capacity(n_channels * (n_channels - 1) / 2);
        let mut layer = 0;
        while settings.len() < n_channels * (n_channels - 1) / 2 {
            let mut top = layer % 2;
            while top + 1 < n_channels && settings.len() < n_channels * (n_channels - 1) / 2 {
                settings.push(MziSetting { layer, top_channel: top, theta: PI, phi: PI });
                top += 2;
            }
            layer += 1;
        }
        Self {
            n_channels,
            layout: Layout::Rectangular,
            quantization_step: None,
            settings,
            output_phases: vec![0.0; n_channels],
        }
    }
}

/// 2×2 transfer matrix of one MZI.
pub fn mzi_matrix(theta: f64, phi: f64) -> [[C64; 2]; 2] {
    let pre = C64::i() * C64::from_polar(1.0, theta / 2.0);
    let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    let e = C64::from_polar(1.0, phi);
    [[pre * e * s, pre * c], [pre * e * c, -pre * s]]
}

/// Balanced coupler.
pub fn coupler() -> [[C64; 2]; 2] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let q = C64::new(0.0, FRAC_1_SQRT_2);
    [[h, q], [q, h]]
}

fn wrap(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn inv2(t: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [[t[0][0].conj(), t[1][0].conj()], [t[0][1].conj(), t[1][1].conj()]]
}

fn mul2(a: [[C64; 2]; 2], b: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Columns `(a, a+1)` of `u` ← columns times `t`.
fn right_mul(u: &mut Array2<C64>, a: usize, t: [[C64; 2]; 2]) {
    for r in 0..u.nrows() {
        let (x, y) = (u[[r, a]], u[[r, a + 1]]);
        u[[r, a]] = x * t[0][0] + y * t[1][0];
        u[[r, a + 1]] = x * t[0][1] + y * t[1][1];
    }
}

/// Rows `(a, a+1)` of `u` ← `t` times rows.
fn left_mul(u: &mut Array2<C64>, a: usize, t: [[C64; 2]; 2]) {
    for c in 0..u.ncols() {
        let (x, y) = (u[[a, c]], u[[a + 1, c]]);
        u[[a, c]] = t[0][0] * x + t[0][1] * y;
        u[[a + 1, c]] = t[1][0] * x + t[1][1] * y;
    }
}

/// `a` is at round-off level relative to `b` (or both vanish).
fn negligible(a: C64, b: C64) -> bool {
    a.norm() <= 1e-14 * b.norm()
}

/// (θ, φ) such that right-multiplying by `T(θ, φ)†` zeroes `x` in a row
/// `(x, y)` on the MZI's columns.
fn null_from_right(x: C64, y: C64) -> (f64, f64) {
    match (negligible(x, y), negligible(y, x)) {
        (true, _) => (PI, PI),
        (false, true) => (0.0, 0.0),
        _ => {
            let ratio = -y / x;
            (2.0 * ratio.norm().atan(), wrap(-ratio.arg()))
        }
    }
}

/// (θ, φ) such that left-multiplying by `T(θ, φ)` zeroes `y` in a column
/// `(x, y)` on the MZI's rows.
fn null_from_left(x: C64, y: C64) -> (f64, f64) {
    match (negligible(y, x), negligible(x, y)) {
        (true, _) => (PI, PI),
        (false, true) => (0.0, 0.0),
        _ => (2.0 * (x.norm() / y.norm()).atan(), wrap(y.arg() - x.arg())),
    }
}

/// Writes `m = diag(e^{iα}, e^{iβ})·T(θ, φ)`; returns `(θ, φ, α, β)`.
fn split_phase_screen(m: [[C64; 2]; 2]) -> (f64, f64, f64, f64) {
    let theta = 2.0 * m[0][0].norm().atan2(m[0][1].norm());
    // phases of entries at round-off level are meaningless; pick the bar/cross defaults
    let phi = if negligible(m[0][1], m[0][0]) {
        PI
    } else if negligible(m[0][0], m[0][1]) {
        0.0
    } else {
        wrap(m[0][0].arg() - m[0][1].arg())
    };
    let d = mul2(m, inv2(mzi_matrix(theta, phi)));
    (theta, phi, d[0][0].arg(), d[1][1].arg())
}

/// Rectangular nulling decomposition of an `N×N` unitary into `N(N−1)/2` MZIs.
pub fn mesh_decompose(u: &UnitaryMatrix) -> Result<MeshProgram> {
    let n = u.dim();
    if n < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: n });
    }
    let defect = u.unitarity_defect();
    if defect > INPUT_TOLERANCE {
        return Err(Error::NotUnitary { defect, tolerance: INPUT_TOLERANCE });
    }
    let mut w = u.entries().clone();
    let mut right: Vec<(usize, f64, f64)> = Vec::new();
    let mut left: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..n - 1 {
        if i % 2 == 0 {
            for j in 0..=i {
                let (r, a) = (n - 1 - j, i - j);
                let (theta, phi) = null_from_right(w[[r, a]], w[[r, a + 1]]);
                right_mul(&mut w, a, inv2(mzi_matrix(theta, phi)));
                right.push((a, theta, phi));
            }
        } else {
            for j in 1..=i + 1 {
                let (r, c) = (n + j - i - 2, j - 1);
                let (theta, phi) = null_from_left(w[[r - 1, c]], w[[r, c]]);
                left_mul(&mut w, r - 1, mzi_matrix(theta, phi));
                left.push((r - 1, theta, phi));
            }
        }
    }

    // w is now diagonal; commute the inverted left MZIs through it
    let mut diag: Vec<C64> = (0..n).map(|k| w[[k, k]] / w[[k, k]].norm()).collect();
    let mut commuted = Vec::with_capacity(left.len());
    for &(top, theta, phi) in left.iter().rev() {
        let local = [[diag[top], C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), diag[top + 1]]];
        let (t2, p2, alpha, beta) = split_phase_screen(mul2(inv2(mzi_matrix(theta, phi)), local));
        diag[top] = C64::from_polar(1.0, alpha);
        diag[top + 1] = C64::from_polar(1.0, beta);
        commuted.push((top, t2, p2));
    }

    let mut next_free = vec![0usize; n];
    let mut settings = Vec::with_capacity(n * (n - 1) / 2);
    for &(top, theta, phi) in right.iter().chain(commuted.iter()) {
        let layer = next_free[top].max(next_free[top + 1]);
        next_free[top] = layer + 1;
        next_free[top + 1] = layer + 1;
        settings.push(MziSetting { layer, top_channel: top, theta, phi: wrap(phi) });
    }
    let output_phases = diag.iter().map(|z| wrap(z.arg())).collect();
    Ok(MeshProgram { n_channels: n, layout: Layout::Rectangular, quantization_step: None, settings, output_phases })
}

/// Multiplies the MZI transfer matrices in program order, then the output phases.
pub fn mesh_reconstruct(p: &MeshProgram) -> Result<UnitaryMatrix> {
    p.validate()?;
    let n = p.n_channels;
    let mut u = Array2::from_diag_elem(n, C64::new(1.0, 0.0));
    for s in &p.settings {
        left_mul(&mut u, s.top_channel, mzi_matrix(s.theta, s.phi));
    }
    for (k, &ph) in p.output_phases.iter().enumerate() {
        let z = C64::from_polar(1.0, ph);
        u.row_mut(k).mapv_inplace(|x| x * z);
    }
    UnitaryMatrix::new(u)
}

/// Nearest multiple of `step`, halves rounded away from zero.
fn round_to_step(x: f64, step: f64) -> f64 {
    let q = x / step;
    q.signum() * (q.abs() + 0.5 + HALF_TOLERANCE).floor() * step
}

/// Snaps a phase in `[0, upper]` (or `[0, upper)` when `periodic`) to the grid.
fn snap(x: f64, step: f64, upper: f64, periodic: bool) -> f64 {
    let y = round_to_step(x, step);
    if periodic {
        let turns = upper / step;
        if y >= upper - 1e-12 {
            return if (turns - turns.round()).abs() < HALF_TOLERANCE { 0.0 } else { y - step };
        }
        y
    } else if y > upper + 1e-12 {
        y - step
    } else {
        y
    }
}

/// Rounds every phase to the nearest multiple of `step` (radians).
pub fn quantize_program(p: &MeshProgram, step: f64) -> Result<MeshProgram> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter { name: "step", reason: format!("must be positive, got {step}") });
    }
    let mut q = p.clone();
    for s in &mut q.settings {
        s.theta = snap(s.theta, step, PI, false);
        s.phi = snap(s.phi, step, TAU, true);
    }
    for ph in &mut q.output_phases {
        *ph = snap(*ph, step, TAU, true);
    }
    q.quantization_step = Some(step);
    Ok(q)
}

/// Max elementwise deviation between `u` and the program's unitary, after
/// removing the global phase at `u`'s largest-magnitude entry.
pub fn program_error(u: &UnitaryMatrix, p: &MeshProgram) -> Result<f64> {
    if u.dim() != p.n_channels {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: p.n_channels });
    }
    let r = mesh_reconstruct(p)?;
    let (a, b) = (u.entries(), r.entries());
    let (idx, _) =
        a.indexed_iter().fold(((0, 0), -1.0), |best, (ij, z)| if z.norm() > best.1 { (ij, z.norm()) } else { best });
    let align =
        if b[idx].norm() == 0.0 { C64::new(1.0, 0.0) } else { C64::from_polar(1.0, a[idx].arg() - b[idx].arg()) };
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y * align).norm()).fold(0.0, f64::max))
}

/// Haar-random unitary from a seeded complex Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> UnitaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Array2::from_shape_fn((n, n), |_| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    // modified Gram–Schmidt on the columns
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = (0..n).map(|i| g[[i, k]].conj() * g[[i, j]]).sum();
            for i in 0..n {
                let v = g[[i, k]];
                g[[i, j]] -= proj * v;
            }
        }
        let norm = (0..n).map(|i| g[[i, j]].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            g[[i, j]] /= norm;
        }
    }
    UnitaryMatrix::new(g).expect("Gram–Schmidt output is unitary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, shifted_resonance_epsilon, LatticeParams};
    use crate::linalg::{eig_hermitian, propagator};
    use crate::spectrum::delta_min;

    fn product(t: [[C64; 2]; 2], u: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
        mul2(t, u)
    }

    #[test]
    fn mzi_matches_coupler_product() {
        for (theta, phi) in [(0.3, 1.1), (PI, 0.0), (2.0, 5.9)] {
            let inner = [[C64::from_polar(1.0, theta), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
            let outer = [[C64::from_polar(1.0, phi), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
            let direct = product(product(product(coupler(), inner), coupler()), outer);
            let closed = mzi_matrix(theta, phi);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((direct[i][j] - closed[i][j]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn bar_state_is_identity() {
        let t = mzi_matrix(PI, PI);
        assert!((t[0][0] - 1.0).norm() < 1e-15 && (t[1][1] - 1.0).norm() < 1e-15);
        assert!(t[0][1].norm() < 1e-15 && t[1][0].norm() < 1e-15);
    }

    #[test]
    fn identity_compiles_to_bar_states() {
        let p = mesh_decompose(&UnitaryMatrix::identity(4)).unwrap();
        assert_eq!(p.settings.len(), 6);
        for s in &p.settings {
            assert!((s.theta - PI).abs() < 1e-12);
        }
        assert!(p.output_phases.iter().all(|&x| x.min(TAU - x) < 1e-12));
        assert_eq!(p.depth(), 4);
    }

    #[test]
    fn balanced_splitter_is_half_pi() {
        let b = coupler();
        let u = UnitaryMatrix::new(Array2::from_shape_fn((2, 2), |(i, j)| b[i][j])).unwrap();
        let p = mesh_decompose(&u).unwrap();
        assert_eq!(p.settings.len(), 1);
        assert!((p.settings[0].theta - PI / 2.0).abs() < 1e-12);
        assert!(program_error(&u, &p).unwrap() < 1e-12);
    }

    #[test]
    fn all_bar_program_is_identity() {
        let p = MeshProgram::identity(5);
        p.validate().unwrap();
        let id = UnitaryMatrix::identity(5);
        assert!(program_error(&id, &p).unwrap() < 1e-15);
        assert!(mesh_reconstruct(&p).unwrap().entries().iter().zip(id.entries()).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn cross_state_swaps_channels() {
        let mut p = MeshProgram::identity(4);
        let k = p.settings.iter().position(|s| s.top_channel == 1).unwrap();
        p.settings[k].theta = 0.0;
        let u = mesh_reconstruct(&p).unwrap();
        let e = u.entries();
        assert!((e[[2, 1]].norm() - 1.0).abs() < 1e-15 && (e[[1, 2]].norm() - 1.0).abs() < 1e-15);
        assert!((e[[0, 0]].norm() - 1.0).abs() < 1e-15 && (e[[3, 3]].norm() - 1.0).abs() < 1e-15);
        assert!(e[[1, 1]].norm() < 1e-15);
    }

    #[test]
    fn random_round_trip() {
        for seed in 0..20 {
            let u = random_unitary(12, seed);
            let p = mesh_decompose(&u).unwrap();
            assert_eq!(p.settings.len(), 66);
            assert_eq!(p.depth(), 12);
            for s in &p.settings {
                assert!((0.0..=PI).contains(&s.theta) && (0.0..TAU).contains(&s.phi));
            }
            assert!(program_error(&u, &p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn lattice_propagator_round_trip() {
        let h = build_hamiltonian(&LatticeParams::new(12, 0.05, 1.0, shifted_resonance_epsilon(0, 0.05, 1.0)).unwrap())
            .unwrap();
        let spec = eig_hermitian(&h);
        let t = delta_min(&spec, None).unwrap().period;
        let u = propagator(&spec, t / 2.0);
        let p = mesh_decompose(&u).unwrap();
        assert!(program_error(&u, &p).unwrap() < 1e-10);
    }

    #[test]
    fn non_unitary_rejected() {
        let mut e = UnitaryMatrix::identity(3).into_entries();
        e[[0, 0]] = C64::new(1.0 + 1e-6, 0.0);
        let u = UnitaryMatrix::with_tolerance(e, 1e-3).unwrap();
        assert!(matches!(mesh_decompose(&u), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn rounding_rule() {
        let step = 0.01 * PI;
        assert!((round_to_step(0.015 * PI, step) - 0.02 * PI).abs() < 1e-15);
        assert!((round_to_step(-0.015 * PI, step) + 0.02 * PI).abs() < 1e-15);
        assert!((round_to_step(0.0149 * PI, step) - 0.01 * PI).abs() < 1e-15);
    }

    #[test]
    fn quantized_grid_is_fixed_point() {
        let p = quantize_program(&mesh_decompose(&random_unitary(6, 3)).unwrap(), 0.01 * PI).unwrap();
        let again = quantize_program(&p, 0.01 * PI).unwrap();
        assert_eq!(p, again);
        for s in &p.settings {
            for x in [s.theta, s.phi] {
                let k = x / (0.01 * PI);
                assert!((k - k.round()).abs() < 1e-12);
            }
            assert!(s.phi < TAU && s.theta <= PI);
        }
    }

    #[test]
    fn quantization_only_hurts() {
        for seed in 0..5 {
            let u = random_unitary(12, 100 + seed);
            let p = mesh_decompose(&u).unwrap();
            let exact = program_error(&u, &p).unwrap();
            let coarse = program_error(&u, &quantize_program(&p, 0.01 * PI).unwrap()).unwrap();
            assert!(coarse >= exact);
        }
    }
}
