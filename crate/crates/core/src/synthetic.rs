//! Few-mode synthetic maps on which the closed form is checked against the
//! Fock-space oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::fock_oracle::{convergence_sweep, ConvergenceReport};
use crate::structure_map::{BogoliubovMap, CVector};
use crate::visibility::{overlap_at, ThermalSpec};

pub const EQUIVALENCE_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub name: &'static str,
    pub map: BogoliubovMap,
    pub occupations: Vec<f64>,
    pub kappa: CVector,
    pub kappa_prime: CVector,
    pub times: Vec<f64>,
    pub n_max: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub modes: usize,
    pub max_deviation: f64,
    pub converged: bool,
    pub convergence: ConvergenceReport,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        self.converged && self.max_deviation < EQUIVALENCE_TOL
    }
}

/// Orthogonal matrix from a product of plane rotations.
pub fn rotation(n: usize, angles: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    for &(i, j, a) in angles {
        let mut r = DMatrix::identity(n, n);
        r[(i, i)] = a.cos();
        r[(j, j)] = a.cos();
        r[(i, j)] = -a.sin();
        r[(j, i)] = a.sin();
        m = r * m;
    }
    m
}

fn imag(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|x| Complex64::new(0.0, *x)))
}

fn map(wg: &[f64], we: &[f64], t: DMatrix<f64>, beta: &[f64]) -> BogoliubovMap {
    BogoliubovMap::from_link(
        DVector::from_column_slice(wg),
        DVector::from_column_slice(we),
        t,
        DVector::from_column_slice(beta),
    )
    .expect("synthetic map is valid")
}

/// The standard suite: one to three modes, thermal and vacuum, with and
/// without recoil-like displacements.
pub fn standard_suite() -> Vec<SyntheticCase> {
    let times = vec![0.0, 0.5, 1.0, 2.0, 3.7];
    let one = map(&[1.0], &[2.0], DMatrix::identity(1, 1), &[0.3]);
    let two = map(
        &[1.0, 1.4],
        &[1.2, 1.3],
        rotation(2, &[(0, 1, 0.4)]),
        &[0.25, -0.15],
    );
    let three = map(
        &[1.0, 1.25, 1.6],
        &[1.1, 1.2, 1.7],
        rotation(3, &[(0, 1, 0.3), (1, 2, -0.2), (0, 2, 0.15)]),
        &[0.1, -0.08, 0.05],
    );
    vec![
        SyntheticCase {
            name: "identity-2mode-thermal",
            map: BogoliubovMap::identity(DVector::from_vec(vec![1.0, 1.5])).unwrap(),
            occupations: vec![0.3, 0.1],
            kappa: CVector::zeros(2),
            kappa_prime: CVector::zeros(2),
            times: times.clone(),
            n_max: vec![18, 22, 26],
        },
        SyntheticCase {
            name: "displaced-1mode-hot",
            map: map(&[1.0], &[0.6], DMatrix::identity(1, 1), &[1.0]),
            occupations: vec![1.0],
            kappa: imag(&[0.3]),
            kappa_prime: imag(&[-0.2]),
            times: times.clone(),
            n_max: vec![80, 110, 140],
        },
        SyntheticCase {
            name: "squeezed-1mode-thermal",
            map: one.clone(),
            occupations: vec![0.5],
            kappa: CVector::zeros(1),
            kappa_prime: CVector::zeros(1),
            times: vec![0.5, 1.0, 2.0],
            n_max: vec![60, 90, 120],
        },
        SyntheticCase {
            name: "squeezed-1mode-vacuum-recoil",
            map: one.clone(),
            occupations: vec![0.0],
            kappa: imag(&[0.2]),
            kappa_prime: imag(&[-0.1]),
            times: times.clone(),
            n_max: vec![40, 60, 80],
        },
        SyntheticCase {
            name: "squeezed-1mode-thermal-recoil",
            map: one,
            occupations: vec![0.3],
            kappa: imag(&[0.15]),
            kappa_prime: imag(&[0.15]),
            times: times.clone(),
            n_max: vec![60, 90, 120],
        },
        SyntheticCase {
            name: "mixed-2mode-vacuum",
            map: two.clone(),
            occupations: vec![0.0, 0.0],
            kappa: CVector::zeros(2),
            kappa_prime: CVector::zeros(2),
            times: times.clone(),
            n_max: vec![14, 18, 22],
        },
        SyntheticCase {
            name: "mixed-2mode-thermal-recoil",
            map: two.clone(),
            occupations: vec![0.2, 0.1],
            kappa: imag(&[0.1, -0.05]),
            kappa_prime: imag(&[0.1, 0.05]),
            times: times.clone(),
            n_max: vec![18, 24, 30],
        },
        SyntheticCase {
            name: "mixed-2mode-one-cold",
            map: two,
            occupations: vec![0.25, 0.0],
            kappa: CVector::zeros(2),
            kappa_prime: CVector::zeros(2),
            times: times.clone(),
            n_max: vec![18, 24, 30],
        },
        SyntheticCase {
            name: "mixed-3mode-vacuum-recoil",
            map: three.clone(),
            occupations: vec![0.0, 0.0, 0.0],
            kappa: imag(&[0.05, 0.03, -0.02]),
            kappa_prime: imag(&[0.05, -0.03, 0.02]),
            times: times.clone(),
            n_max: vec![6, 8, 10],
        },
        SyntheticCase {
            name: "mixed-3mode-thermal",
            map: three,
            occupations: vec![0.03, 0.02, 0.01],
            kappa: CVector::zeros(3),
            kappa_prime: CVector::zeros(3),
            times,
            n_max: vec![6, 8, 10],
        },
    ]
}

/// Runs the oracle sweep and compares its best value with the closed form.
pub fn run_case(case: &SyntheticCase) -> Result<CaseOutcome> {
    let occ = DVector::from_vec(case.occupations.clone());
    let report = convergence_sweep(&case.map, &case.n_max, &occ, &case.kappa, &case.kappa_prime, &case.times);
    let thermal = ThermalSpec::per_mode(case.occupations.clone())?;
    let mut max_dev: f64 = if report.values.is_empty() { f64::INFINITY } else { 0.0 };
    if let Some(best) = report.best() {
        for (t, o) in case.times.iter().zip(best) {
            let c = overlap_at(&case.map, &case.kappa, &case.kappa_prime, &thermal, *t)?;
            max_dev = max_dev.max((c - o).norm());
        }
    }
    Ok(CaseOutcome {
        name: case.name.to_string(),
        modes: case.map.dim(),
        max_deviation: max_dev,
        converged: report.converged,
        convergence: report,
    })
}
