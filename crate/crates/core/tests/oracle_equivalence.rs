use nalgebra::DVector;
use num_complex::Complex64;

use quench_core::fock_oracle::{convergence_sweep, FockOracle, TruncatedSystem};
use quench_core::structure_map::{BogoliubovMap, CVector};
use quench_core::synthetic::{run_case, standard_suite, EQUIVALENCE_TOL};
use quench_core::visibility::{overlap_at, ThermalSpec};

#[test]
fn synthetic_suite_agrees() {
    for case in standard_suite() {
        let o = run_case(&case).unwrap();
        assert!(o.converged, "{}: oracle not converged in n_max", o.name);
        assert!(
            o.max_deviation < EQUIVALENCE_TOL,
            "{}: deviation {:.3e}",
            o.name,
            o.max_deviation
        );
    }
}

#[test]
fn identity_map_is_exact_in_both() {
    let map = BogoliubovMap::identity(DVector::from_vec(vec![1.0, 1.3])).unwrap();
    let z = CVector::zeros(2);
    let occ = DVector::from_vec(vec![0.2, 0.05]);
    let times = [0.0, 1.0, 4.0];
    let sys = TruncatedSystem::new(&map, vec![16, 12]).unwrap();
    let o = FockOracle::new(sys).unwrap().overlap(&occ, &z, &z, &times).unwrap();
    let th = ThermalSpec::per_mode(vec![0.2, 0.05]).unwrap();
    for (t, v) in times.iter().zip(o) {
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((overlap_at(&map, &z, &z, &th, *t).unwrap() - 1.0).norm() < 1e-13);
    }
}

#[test]
fn cold_mode_reduction_against_oracle() {
    let case = standard_suite().into_iter().find(|c| c.name == "mixed-2mode-one-cold").unwrap();
    let warm = DVector::from_vec(vec![0.25, 1e-7]);
    let report = convergence_sweep(&case.map, &case.n_max, &warm, &case.kappa, &case.kappa_prime, &case.times);
    assert!(report.converged);
    let cold = ThermalSpec::per_mode(vec![0.25, 0.0]).unwrap();
    for (t, o) in case.times.iter().zip(report.best().unwrap()) {
        let c = overlap_at(&case.map, &case.kappa, &case.kappa_prime, &cold, *t).unwrap();
        assert!((c - o).norm() < 1e-6, "t={}: {} vs {}", t, c, o);
    }
}

#[test]
fn convergence_is_demonstrated_not_assumed() {
    let case = standard_suite().into_iter().find(|c| c.name == "squeezed-1mode-thermal").unwrap();
    let occ = DVector::from_vec(case.occupations.clone());
    // Too small a cutoff must show up as non-convergence or a tail error.
    let report = convergence_sweep(&case.map, &[4, 5, 6], &occ, &case.kappa, &case.kappa_prime, &case.times);
    assert!(!report.converged);
}
