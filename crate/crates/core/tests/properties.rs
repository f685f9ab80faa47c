mod common;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use quench_core::structure_map::{BogoliubovMap, CVector};
use quench_core::synthetic::rotation;
use quench_core::visibility::{overlap_at, ThermalSpec};
use quench_core::QuenchModel;

use common::{at_temperature, model, scenario, trace};

fn map_from(wg: &[f64], we: &[f64], t: DMatrix<f64>, beta: &[f64]) -> BogoliubovMap {
    BogoliubovMap::from_link(
        DVector::from_column_slice(wg),
        DVector::from_column_slice(we),
        t,
        DVector::from_column_slice(beta),
    )
    .unwrap()
}

/// Three-mode map with random frequencies, mixing angles and displacements.
fn arb_map() -> impl Strategy<Value = BogoliubovMap> {
    (
        prop::collection::vec(0.3f64..2.0, 3),
        prop::collection::vec(0.3f64..2.0, 3),
        prop::collection::vec(-0.8f64..0.8, 3),
        prop::collection::vec(-1.5f64..1.5, 3),
    )
        .prop_map(|(wg, we, ang, beta)| {
            let t = rotation(3, &[(0, 1, ang[0]), (1, 2, ang[1]), (0, 2, ang[2])]);
            map_from(&wg, &we, t, &beta)
        })
}

fn arb_occ() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], 3)
}

fn abs_overlap(map: &BogoliubovMap, occ: &[f64], t: f64) -> f64 {
    let z = CVector::zeros(map.dim());
    overlap_at(map, &z, &z, &ThermalSpec::per_mode(occ.to_vec()).unwrap(), t)
        .unwrap()
        .norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn symplectic_identities(g in prop_oneof![0.01f64..0.3, -0.3f64..-0.03], delta in 0.0f64..0.03) {
        let m = QuenchModel::build(&scenario(g, delta), false);
        prop_assume!(m.is_ok());
        let m = m.unwrap();
        prop_assert!(m.map.symplectic_defect() < 1e-9);
        prop_assert!(m.map.uv_asymmetry() < 1e-9);
    }

    #[test]
    fn overlap_is_bounded(map in arb_map(), occ in arb_occ(), t in 0.0f64..40.0,
                          k in prop::collection::vec(-0.3f64..0.3, 6)) {
        let kappa = CVector::from_iterator(3, k[..3].iter().map(|x| Complex64::new(0.0, *x)));
        let kappa_p = CVector::from_iterator(3, k[3..].iter().map(|x| Complex64::new(0.0, *x)));
        let o = overlap_at(&map, &kappa, &kappa_p, &ThermalSpec::per_mode(occ).unwrap(), t).unwrap();
        prop_assert!(o.norm() <= 1.0 + 1e-10, "|O| = {}", o.norm());
    }

    #[test]
    fn unity_at_zero_without_recoil(map in arb_map(), occ in arb_occ()) {
        let z = CVector::zeros(3);
        let o = overlap_at(&map, &z, &z, &ThermalSpec::per_mode(occ).unwrap(), 0.0).unwrap();
        prop_assert!((o - 1.0).norm() < 1e-10, "O(0) = {}", o);
    }

    /// Flipping the sign of a ground mode flips a row of T and an entry of
    /// β; flipping an excited mode flips a column of T.
    #[test]
    fn sign_flip_invariance(wg in prop::collection::vec(0.3f64..2.0, 3), we in prop::collection::vec(0.3f64..2.0, 3),
                            ang in prop::collection::vec(-0.8f64..0.8, 3), beta in prop::collection::vec(-1.5f64..1.5, 3),
                            occ in arb_occ(), j in 0usize..3, k in 0usize..3, t in 0.0f64..30.0) {
        let tm = rotation(3, &[(0, 1, ang[0]), (1, 2, ang[1]), (0, 2, ang[2])]);
        let a = map_from(&wg, &we, tm.clone(), &beta);
        let mut t2 = tm;
        t2.row_mut(j).neg_mut();
        t2.column_mut(k).neg_mut();
        let mut b2 = beta.clone();
        b2[j] = -b2[j];
        let b = map_from(&wg, &we, t2, &b2);
        prop_assert!((abs_overlap(&a, &occ, t) - abs_overlap(&b, &occ, t)).abs() < 1e-10);
    }

    #[test]
    fn reorder_invariance(wg in prop::collection::vec(0.3f64..2.0, 3), we in prop::collection::vec(0.3f64..2.0, 3),
                          ang in prop::collection::vec(-0.8f64..0.8, 3), beta in prop::collection::vec(-1.5f64..1.5, 3),
                          occ in arb_occ(), t in 0.0f64..30.0) {
        let tm = rotation(3, &[(0, 1, ang[0]), (1, 2, ang[1]), (0, 2, ang[2])]);
        let a = map_from(&wg, &we, tm.clone(), &beta);
        let p = [2usize, 0, 1];
        let q = [1usize, 2, 0];
        let tp = DMatrix::from_fn(3, 3, |r, c| tm[(p[r], q[c])]);
        let b = map_from(
            &p.map(|i| wg[i]),
            &q.map(|i| we[i]),
            tp,
            &p.map(|i| beta[i]),
        );
        let occ_p: Vec<f64> = p.iter().map(|i| occ[*i]).collect();
        prop_assert!((abs_overlap(&a, &occ, t) - abs_overlap(&b, &occ_p, t)).abs() < 1e-10);
    }

    #[test]
    fn cold_mode_reduction(map in arb_map(), occ in arb_occ(), j in 0usize..3, t in 0.0f64..30.0) {
        let mut cold = occ.clone();
        cold[j] = 0.0;
        let mut warm = occ;
        warm[j] = 1e-7;
        let z = CVector::zeros(3);
        let a = overlap_at(&map, &z, &z, &ThermalSpec::per_mode(cold).unwrap(), t).unwrap();
        let b = overlap_at(&map, &z, &z, &ThermalSpec::per_mode(warm).unwrap(), t).unwrap();
        prop_assert!((a - b).norm() < 1e-6, "{} vs {}", a, b);
    }
}

/// Time-averaged visibility falls as the crystal gets hotter.
#[test]
fn monotone_temperature_damping() {
    for g in [0.02, -0.005, -0.1] {
        let m = model(g, 0.025);
        let means: Vec<f64> = [0.0, 10.0, 50.0, 100.0]
            .iter()
            .map(|t| {
                let tr = trace(&m, at_temperature(*t), 20.0);
                tr.visibility.iter().sum::<f64>() / tr.len() as f64
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "g={}: {:?}", g, means);
    }
}

/// Scaling every occupation up never raises |O| at fixed time for a pure
/// frequency change (no displacement, no mixing).
#[test]
fn single_mode_damping_is_pointwise() {
    let map = map_from(&[1.0], &[1.7], DMatrix::identity(1, 1), &[0.0]);
    for i in 0..50 {
        let t = 0.3 * i as f64;
        let mut last = f64::INFINITY;
        for n in [0.0, 0.1, 0.5, 2.0, 8.0] {
            let v = abs_overlap(&map, &[n], t);
            assert!(v <= last + 1e-12, "t={} n={}: {} > {}", t, n, v, last);
            last = v;
        }
    }
}
