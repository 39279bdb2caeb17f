use std::f64::consts::PI;

use binlattice::dynamics::{evolve_intensity, uniform_grid};
use binlattice::lattice::{build_hamiltonian, shifted_resonance_epsilon};
use binlattice::linalg::{apply, eig_hermitian, integrate_schrodinger, max_abs_diff, propagator};
use binlattice::mesh::{mesh_decompose, program_error, quantize_program, random_unitary};
use binlattice::spectrum::delta_min;
use binlattice::{HermitianMatrix, LatticeParams, StateVector, C64};
use ndarray::Array2;
use proptest::prelude::*;

fn hermitian(dim: usize, raw: &[(f64, f64)]) -> HermitianMatrix {
    let mut m = Array2::<C64>::zeros((dim, dim));
    let mut it = raw.iter().cycle();
    for i in 0..dim {
        m[[i, i]] = C64::new(it.next().unwrap().0, 0.0);
        for j in i + 1..dim {
            let &(re, im) = it.next().unwrap();
            m[[i, j]] = C64::new(re, im);
            m[[j, i]] = C64::new(re, -im);
        }
    }
    HermitianMatrix::new(m).unwrap()
}

fn lattice() -> impl Strategy<Value = LatticeParams> {
    (2usize..16, 0.0f64..1.5, 0.05f64..1.5, -4.0f64..4.0, 0u32..2)
        .prop_map(|(n, v, f, e, o)| LatticeParams::new(n, v, f, e).unwrap().with_origin(o))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigendecomposition_invariants(dim in 2usize..10, raw in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 60)) {
        let h = hermitian(dim, &raw);
        let spec = eig_hermitian(&h);
        let ev = spec.eigenvalues();
        for w in ev.as_slice().unwrap().windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        let scale = spec.spectral_range().max(1.0);
        prop_assert!(max_abs_diff(&spec.reconstruct(), h.entries()) < 1e-10 * scale);
        let q = spec.eigenvectors();
        let qtq = q.t().mapv(|z| z.conj()).dot(q);
        prop_assert!(max_abs_diff(&qtq, &Array2::from_diag_elem(dim, C64::new(1.0, 0.0))) < 1e-10);
    }

    #[test]
    fn propagators_are_unitary_and_compose(p in lattice(), t1 in -20.0f64..20.0, t2 in -20.0f64..20.0) {
        let spec = eig_hermitian(&build_hamiltonian(&p).unwrap());
        let (a, b) = (propagator(&spec, t1), propagator(&spec, t2));
        prop_assert!(a.unitarity_defect() < 1e-10);
        let ab = a.compose(&b).unwrap();
        prop_assert!(max_abs_diff(ab.entries(), propagator(&spec, t1 + t2).entries()) < 1e-10);
    }

    #[test]
    fn intensity_rows_are_normalized(p in lattice(), horizon in 0.1f64..200.0, site in 0usize..16) {
        let site = site % p.n_sites;
        let map = evolve_intensity(&build_hamiltonian(&p).unwrap(), site, &uniform_grid(horizon, 64)).unwrap();
        prop_assert!(map.max_row_sum_error() < 1e-12);
        prop_assert!(map.intensities.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn round_trip_any_size(n in 2usize..14, seed in any::<u64>()) {
        let u = random_unitary(n, seed);
        let prog = mesh_decompose(&u).unwrap();
        prop_assert_eq!(prog.settings.len(), n * (n - 1) / 2);
        prop_assert!(program_error(&u, &prog).unwrap() < 1e-10);
    }
}

#[test]
fn hundred_seeded_unitaries_round_trip() {
    let worst = (0..100u64)
        .map(|seed| {
            let u = random_unitary(12, seed);
            program_error(&u, &mesh_decompose(&u).unwrap()).unwrap()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn quantization_error_shrinks_with_step() {
    for seed in [7u64, 8, 9] {
        let u = random_unitary(12, seed);
        let prog = mesh_decompose(&u).unwrap();
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|s| program_error(&u, &quantize_program(&prog, s * PI).unwrap()).unwrap())
            .collect();
        assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
    }
}

#[test]
fn integrator_agrees_with_spectral_on_m2_lattice() {
    let p = LatticeParams::new(12, 0.9, 0.9, shifted_resonance_epsilon(2, 0.9, 0.9)).unwrap();
    let h = build_hamiltonian(&p).unwrap();
    let psi0 = StateVector::basis(12, 4).unwrap();
    let exact = apply(&propagator(&eig_hermitian(&h), 10.0), &psi0).unwrap();
    let rk = integrate_schrodinger(&h, &psi0, 10.0, 1e-3).unwrap();
    assert!(rk.state.max_deviation(&exact) < 1e-8);
}

#[test]
fn time_reversal_on_figure_lattice() {
    let p = LatticeParams::new(12, 0.18, 0.9, shifted_resonance_epsilon(0, 0.18, 0.9)).unwrap();
    let spec = eig_hermitian(&build_hamiltonian(&p).unwrap());
    let t = 3.0 * delta_min(&spec, None).unwrap().period;
    let psi0 = StateVector::basis(12, 4).unwrap();
    let back = apply(&propagator(&spec, -t), &apply(&propagator(&spec, t), &psi0).unwrap()).unwrap();
    assert!(back.max_deviation(&psi0) < 1e-10);
}
