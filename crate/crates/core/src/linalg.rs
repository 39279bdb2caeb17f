//! Dense Hermitian eigendecomposition and spectral propagators.
//!
//! Everything here works on small dense matrices (dim up to ~128). The
//! eigensolver is a cyclic complex Jacobi iteration with a fixed sweep order,
//! so results are bit-reproducible for a given input. A classical RK4
//! integrator is kept alongside as an independent check on the spectral path.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

fn require_square(m: &Array2<C64>) -> Result<usize> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Max elementwise deviation of `m` from the identity.
pub fn identity_defect(m: &Array2<C64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), z)| {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            (z - target).norm()
        })
        .fold(0.0, f64::max)
}

pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Max elementwise |a - b|.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: Array2<C64>,
}

impl HermitianMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let dim = require_square(&entries)?;
        if dim < 2 {
            return Err(Error::DimensionTooSmall { min: 2, got: dim });
        }
        let mut worst = (0, 0, 0.0f64);
        for i in 0..dim {
            for j in i..dim {
                let defect = (entries[[i, j]] - entries[[j, i]].conj()).norm();
                if defect > worst.2 {
                    worst = (i, j, defect);
                }
            }
        }
        if worst.2 > HERMITIAN_TOL {
            return Err(Error::NotHermitian { row: worst.0, col: worst.1, defect: worst.2 });
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: &Array2<f64>) -> Result<Self> {
        Self::new(entries.mapv(|x| C64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[[i, j]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Array1<C64>) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales to unit norm. Fails only for the zero vector.
    pub fn normalized(amplitudes: Array1<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Ok(Self { amplitudes: amplitudes.mapv(|z| z / norm) })
    }

    /// Localized excitation on `site`.
    pub fn basis(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::SiteOutOfRange { site, n_sites: dim });
        }
        let mut amplitudes = Array1::zeros(dim);
        amplitudes[site] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn intensities(&self) -> Array1<f64> {
        self.amplitudes.mapv(|z| z.norm_sqr())
    }

    pub fn max_deviation(&self, other: &StateVector) -> f64 {
        self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: Array2<C64>,
}

impl UnitaryMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        Self::with_tolerance(entries, UNITARY_TOL)
    }

    pub fn with_tolerance(entries: Array2<C64>, tolerance: f64) -> Result<Self> {
        require_square(&entries)?;
        let defect = unitarity_defect(&entries);
        if !(defect <= tolerance) {
            return Err(Error::NotUnitary { defect, tolerance });
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: Array2::eye(dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: adjoint(&self.entries) }
    }

    pub fn compose(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Self { entries: self.entries.dot(&rhs.entries) })
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.entries)
    }
}

/// ‖U†U − I‖_max
pub fn unitarity_defect(m: &Array2<C64>) -> f64 {
    identity_defect(&adjoint(m).dot(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Column `k` is the eigenvector of `eigenvalues()[k]`.
    pub fn eigenvectors(&self) -> &Array2<C64> {
        &self.eigenvectors
    }

    pub fn spectral_range(&self) -> f64 {
        let n = self.eigenvalues.len();
        self.eigenvalues[n - 1] - self.eigenvalues[0]
    }

    /// Q·diag(λ)·Q†
    pub fn reconstruct(&self) -> Array2<C64> {
        let scaled = &self.eigenvectors * &self.eigenvalues.mapv(|l| C64::new(l, 0.0));
        scaled.dot(&adjoint(&self.eigenvectors))
    }

    /// Amplitudes ⟨k|ψ⟩ of `psi` in the eigenbasis.
    pub fn project(&self, psi: ArrayView1<C64>) -> Array1<C64> {
        adjoint(&self.eigenvectors).dot(&psi)
    }

    /// Evolves eigenbasis amplitudes by `t` and maps back to the site basis.
    pub fn evolve_coefficients(&self, coefficients: &Array1<C64>, t: f64) -> Array1<C64> {
        let phased: Array1<C64> =
            coefficients.iter().zip(self.eigenvalues.iter()).map(|(c, &l)| c * C64::from_polar(1.0, -l * t)).collect();
        self.eigenvectors.dot(&phased)
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending; each eigenvector is rotated so its
/// largest-magnitude component is real and positive (first index wins ties).
pub fn eig_hermitian(h: &HermitianMatrix) -> SpectralDecomposition {
    let n = h.dim();
    let mut a = h.entries().clone();
    let mut v: Array2<C64> = Array2::eye(n);

    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].re.total_cmp(&a[[j, j]].re).then(i.cmp(&j)));

    let eigenvalues: Array1<f64> = order.iter().map(|&k| a[[k, k]].re).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 0..n {
            if v[[r, k]].norm() > v[[pivot, k]].norm() * (1.0 + 1e-12) {
                pivot = r;
            }
        }
        let phase = v[[pivot, k]].conj() / v[[pivot, k]].norm();
        for r in 0..n {
            eigenvectors[[r, col]] = v[[r, k]] * phase;
        }
    }
    SpectralDecomposition { eigenvalues, eigenvectors }
}

/// One Jacobi rotation zeroing a[p][q]: A ← J†AJ, V ← VJ with
/// J = [[c, s·e^{iα}], [−s·e^{−iα}, c]] on the (p, q) plane.
fn rotate(a: &mut Array2<C64>, v: &mut Array2<C64>, p: usize, q: usize) {
    let apq = a[[p, q]];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[[p, p]].re;
    let aqq = a[[q, q]].re;
    if mag <= 1e-300 || mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[[p, q]] = C64::new(0.0, 0.0);
        a[[q, p]] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let sp = phase * s; // s·e^{iα}
    let n = a.nrows();

    for k in 0..n {
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        a[[k, p]] = akp * c - akq * sp.conj();
        a[[k, q]] = akp * sp + akq * c;
    }
    for k in 0..n {
        let apk = a[[p, k]];
        let aqk = a[[q, k]];
        a[[p, k]] = apk * c - aqk * sp;
        a[[q, k]] = apk * sp.conj() + aqk * c;
    }
    a[[p, q]] = C64::new(0.0, 0.0);
    a[[q, p]] = C64::new(0.0, 0.0);
    a[[p, p]] = C64::new(a[[p, p]].re, 0.0);
    a[[q, q]] = C64::new(a[[q, q]].re, 0.0);

    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = vkp * c - vkq * sp.conj();
        v[[k, q]] = vkp * sp + vkq * c;
    }
}

/// U(t) = Q·diag(e^{−iλt})·Q†
pub fn propagator(spec: &SpectralDecomposition, t: f64) -> UnitaryMatrix {
    let phases = spec.eigenvalues.mapv(|l| C64::from_polar(1.0, -l * t));
    let scaled = &spec.eigenvectors * &phases;
    UnitaryMatrix { entries: scaled.dot(&adjoint(&spec.eigenvectors)) }
}

/// U·ψ, renormalized so round-off in U does not accumulate in the norm.
pub fn apply(u: &UnitaryMatrix, psi: &StateVector) -> Result<StateVector> {
    if u.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: psi.dim() });
    }
    StateVector::normalized(u.entries.dot(&psi.amplitudes))
}

#[derive(Debug, Clone)]
pub struct Integrated {
    pub state: StateVector,
    /// ‖ψ‖ before the final renormalization; its distance from 1 is the
    /// integrator's norm drift.
    pub raw_norm: f64,
    pub steps: u64,
    pub step_size: f64,
}

/// Classical RK4 for i dψ/dt = Hψ with a fixed step no larger than `dt`.
///
/// H is time independent, so one RK4 step is a fixed linear map M. M is built
/// by running the four stages on each basis vector, and the n-step evolution
/// M^n is formed by binary exponentiation. The result is the same discrete
/// trajectory as stepping n times.
pub fn integrate_schrodinger(h: &HermitianMatrix, psi0: &StateVector, t_final: f64, dt: f64) -> Result<Integrated> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_final",
            reason: format!("must be non-negative, got {t_final}"),
        });
    }
    if dt > t_final {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("step {dt} exceeds t_final {t_final}") });
    }
    if h.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi0.dim() });
    }
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as u64;
    let step_size = t_final / steps as f64;
    let step = rk4_step_operator(h, step_size);
    let total = matrix_power(&step, steps);
    let evolved = total.dot(psi0.amplitudes());
    let raw_norm = evolved.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(Integrated { state: StateVector::normalized(evolved)?, raw_norm, steps, step_size })
}

/// One RK4 step ψ ↦ ψ + (k1 + 2k2 + 2k3 + k4)/6 with k = −i·h·H·(·).
pub fn rk4_step(h: &HermitianMatrix, step: f64, psi: &Array1<C64>) -> Array1<C64> {
    let f = |x: &Array1<C64>| h.entries().dot(x).mapv(|z| z * C64::new(0.0, -step));
    let k1 = f(psi);
    let k2 = f(&(psi + &k1.mapv(|z| z * 0.5)));
    let k3 = f(&(psi + &k2.mapv(|z| z * 0.5)));
    let k4 = f(&(psi + &k3));
    psi + &((k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z / 6.0))
}

fn rk4_step_operator(h: &HermitianMatrix, step: f64) -> Array2<C64> {
    let n = h.dim();
    let mut m = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = C64::new(1.0, 0.0);
        m.column_mut(j).assign(&rk4_step(h, step, &e));
    }
    m
}

fn matrix_power(m: &Array2<C64>, mut exp: u64) -> Array2<C64> {
    let mut result: Array2<C64> = Array2::eye(m.nrows());
    let mut base = m.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = result.dot(&base);
        }
        exp >>= 1;
        if exp > 0 {
            base = base.dot(&base);
        }
    }
    result
}
