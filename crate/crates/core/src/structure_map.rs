//! Linear map between the phonon bases of the two structures: mode-link
//! matrix, Bogoliubov coefficients, phase-space displacements, the squeezing
//! matrix A and its normalization Z. Also the photon-recoil displacements.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::crystal::{CrystalStructure, ModeBasis};
use crate::error::{QuenchError, Result};

pub type CVector = DVector<Complex64>;

pub const U_CONDITION_LIMIT: f64 = 1e12;
pub const A_ASYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BogoliubovMap {
    /// Ground-structure mode frequencies (dimensionless).
    pub omega_g: DVector<f64>,
    /// Excited-structure mode frequencies (dimensionless).
    pub omega_e: DVector<f64>,
    /// r^e − r^g in the packed coordinate order.
    pub d_g: DVector<f64>,
    /// T_jl = Σ_k M^g_kj M^e_kl.
    pub t: DMatrix<f64>,
    /// Displacement in ground mode coordinates.
    pub d_mode: DVector<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub beta_g: DVector<f64>,
    pub beta_e: DVector<f64>,
    pub a: DMatrix<f64>,
    pub z: f64,
    pub u_condition: f64,
}

impl BogoliubovMap {
    pub fn dim(&self) -> usize {
        self.omega_g.len()
    }

    /// Map from a mode-link matrix and ground-basis displacements, without
    /// any reference to positions. Used for synthetic few-mode systems.
    pub fn from_link(
        omega_g: DVector<f64>,
        omega_e: DVector<f64>,
        t: DMatrix<f64>,
        beta_g: DVector<f64>,
    ) -> Result<Self> {
        let n = omega_g.len();
        if omega_e.len() != n || t.nrows() != n || t.ncols() != n || beta_g.len() != n {
            return Err(QuenchError::Dimension("inconsistent map inputs".into()));
        }
        if omega_g.iter().chain(omega_e.iter()).any(|w| !(*w > 0.0)) {
            return Err(QuenchError::InvalidScenario("mode frequencies must be positive".into()));
        }
        let (u, v) = bogoliubov_coefficients(&omega_g, &omega_e, &t);
        // β^e_j = −Σ_k (u_kj + v_kj) β^g_k
        let beta_e = -((&u + &v).transpose() * &beta_g);

        let sv = u.clone().svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        if !cond.is_finite() || cond > U_CONDITION_LIMIT {
            return Err(QuenchError::SingularU(cond));
        }
        let a = squeezing_matrix(&u, &v)?;
        let rho = SymmetricEigen::new(a.clone()).eigenvalues.amax();
        if rho >= 1.0 {
            return Err(QuenchError::SpectralRadius(rho));
        }
        let one_minus = DMatrix::identity(n, n) - &a * &a;
        let z = one_minus.determinant().powf(0.25);

        Ok(BogoliubovMap {
            omega_g,
            omega_e,
            d_g: DVector::zeros(n),
            d_mode: DVector::zeros(n),
            t,
            u,
            v,
            beta_g,
            beta_e,
            a,
            z,
            u_condition: cond,
        })
    }

    /// Identity map on `n` modes with the given frequencies.
    pub fn identity(omega: DVector<f64>) -> Result<Self> {
        let n = omega.len();
        Self::from_link(omega.clone(), omega, DMatrix::identity(n, n), DVector::zeros(n))
    }

    /// Largest deviation from u uᵀ − v vᵀ = 1.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.dim();
        (&self.u * self.u.transpose() - &self.v * self.v.transpose() - DMatrix::identity(n, n))
            .amax()
    }

    /// Largest asymmetry of u vᵀ.
    pub fn uv_asymmetry(&self) -> f64 {
        let uv = &self.u * self.v.transpose();
        (&uv - uv.transpose()).amax()
    }

    /// Residuals of the two reciprocal β relations.
    pub fn beta_relation_residuals(&self) -> (f64, f64) {
        let r1 = &self.beta_e + (&self.u + &self.v).transpose() * &self.beta_g;
        let r2 = &self.beta_g + (&self.u - &self.v) * &self.beta_e;
        (r1.amax(), r2.amax())
    }
}

/// u_jk, v_jk = T_jk/2 [√(ω^e_k/ω^g_j) ± √(ω^g_j/ω^e_k)].
pub fn bogoliubov_coefficients(
    omega_g: &DVector<f64>,
    omega_e: &DVector<f64>,
    t: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = omega_g.len();
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let r = (omega_e[k] / omega_g[j]).sqrt();
            u[(j, k)] = 0.5 * t[(j, k)] * (r + 1.0 / r);
            v[(j, k)] = 0.5 * t[(j, k)] * (r - 1.0 / r);
        }
    }
    (u, v)
}

/// A = u⁻¹ v by a linear solve, symmetrized.
fn squeezing_matrix(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = u.clone().lu();
    let a = lu
        .solve(v)
        .ok_or(QuenchError::SingularU(f64::INFINITY))?;
    let asym = (&a - a.transpose()).amax();
    if asym > A_ASYMMETRY_TOL {
        return Err(QuenchError::AsymmetricA(asym));
    }
    Ok(0.5 * (&a + a.transpose()))
}

/// Full map between two converged structures. `hbar` is ħ in the internal
/// units.
pub fn build_map(
    basis_g: &ModeBasis,
    basis_e: &ModeBasis,
    struct_g: &CrystalStructure,
    struct_e: &CrystalStructure,
    hbar: f64,
) -> Result<BogoliubovMap> {
    let n = basis_g.dim();
    if basis_e.dim() != n || struct_g.positions.len() != n || struct_e.positions.len() != n {
        return Err(QuenchError::Dimension("bases and structures disagree".into()));
    }
    let mg = &basis_g.mode_matrix;
    let me = &basis_e.mode_matrix;
    let t = mg.transpose() * me;
    let d_g = &struct_e.positions - &struct_g.positions;
    let d_mode = mg.transpose() * &d_g;
    let beta_g = DVector::from_iterator(
        n,
        (0..n).map(|j| (basis_g.frequencies[j] / (2.0 * hbar)).sqrt() * d_mode[j]),
    );
    let mut map = BogoliubovMap::from_link(
        basis_g.frequencies.clone(),
        basis_e.frequencies.clone(),
        t,
        beta_g,
    )?;
    map.d_g = d_g;
    map.d_mode = d_mode;
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoilGeometry {
    None,
    Copropagating,
    Orthogonal,
    Counterpropagating,
    Explicit,
}

impl RecoilGeometry {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoilGeometry::None => "none",
            RecoilGeometry::Copropagating => "copropagating",
            RecoilGeometry::Orthogonal => "orthogonal",
            RecoilGeometry::Counterpropagating => "counterpropagating",
            RecoilGeometry::Explicit => "explicit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => RecoilGeometry::None,
            "copropagating" => RecoilGeometry::Copropagating,
            "orthogonal" => RecoilGeometry::Orthogonal,
            "counterpropagating" => RecoilGeometry::Counterpropagating,
            "explicit" => RecoilGeometry::Explicit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pulse {
    First,
    Second,
}

/// Effective wave vectors (1/m, components along x and y) of the two pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoilSpec {
    pub geometry: RecoilGeometry,
    pub k_first: [f64; 2],
    pub k_second: [f64; 2],
    pub target_ion: usize,
}

impl RecoilSpec {
    pub fn none(target_ion: usize) -> Self {
        RecoilSpec {
            geometry: RecoilGeometry::None,
            k_first: [0.0; 2],
            k_second: [0.0; 2],
            target_ion,
        }
    }

    /// Raman presets: both pulses carry the same effective wave vector along
    /// +y, with |k| = 0, √2 k₀ or 2 k₀ where k₀ = 2π/λ.
    pub fn preset(geometry: RecoilGeometry, wavelength: f64, target_ion: usize) -> Result<Self> {
        let k0 = 2.0 * PI / wavelength;
        let mag = match geometry {
            RecoilGeometry::None | RecoilGeometry::Copropagating => 0.0,
            RecoilGeometry::Orthogonal => 2f64.sqrt() * k0,
            RecoilGeometry::Counterpropagating => 2.0 * k0,
            RecoilGeometry::Explicit => {
                return Err(QuenchError::InvalidScenario(
                    "explicit recoil needs wave vectors".into(),
                ))
            }
        };
        Ok(RecoilSpec {
            geometry,
            k_first: [0.0, mag],
            k_second: [0.0, mag],
            target_ion,
        })
    }

    pub fn explicit(k_first: [f64; 2], k_second: [f64; 2], target_ion: usize) -> Result<Self> {
        if k_first.iter().chain(k_second.iter()).any(|k| !k.is_finite()) {
            return Err(QuenchError::InvalidScenario("wave vectors must be finite".into()));
        }
        Ok(RecoilSpec {
            geometry: RecoilGeometry::Explicit,
            k_first,
            k_second,
            target_ion,
        })
    }
}

/// κ_j = i √(ħ/(2 ω^e_j)) K_j, with K_j the projection of the wave vector on
/// the target ion's rows of M^e. Wave vectors are scaled to the internal
/// length unit by `length_scale` (meters).
pub fn recoil_displacement(
    spec: &RecoilSpec,
    basis_e: &ModeBasis,
    pulse: Pulse,
    hbar: f64,
    length_scale: f64,
) -> Result<CVector> {
    let dim = basis_e.dim();
    let n = dim / 2;
    if spec.target_ion >= n {
        return Err(QuenchError::InvalidScenario(format!(
            "target ion {} out of range",
            spec.target_ion
        )));
    }
    let k = match pulse {
        Pulse::First => spec.k_first,
        Pulse::Second => spec.k_second,
    };
    if matches!(spec.geometry, RecoilGeometry::None | RecoilGeometry::Copropagating) {
        return Ok(CVector::zeros(dim));
    }
    let (kx, ky) = (k[0] * length_scale, k[1] * length_scale);
    let m = &basis_e.mode_matrix;
    Ok(CVector::from_iterator(
        dim,
        (0..dim).map(|j| {
            let proj = kx * m[(spec.target_ion, j)] + ky * m[(n + spec.target_ion, j)];
            Complex64::new(0.0, (hbar / (2.0 * basis_e.frequencies[j])).sqrt() * proj)
        }),
    ))
}

/// λ^e_j = Σ_l (λ^g_l u_lj + λ^g_l* v_lj).
pub fn basis_change(lambda_g: &CVector, map: &BogoliubovMap) -> CVector {
    evolve_lambda(lambda_g, map, 0.0)
}

/// φ[λ^g] = 2 Im Σ_j λ^g_j β^g_j.
pub fn displacement_phase(lambda_g: &CVector, map: &BogoliubovMap) -> f64 {
    2.0 * lambda_g
        .iter()
        .zip(map.beta_g.iter())
        .map(|(l, b)| l * *b)
        .sum::<Complex64>()
        .im
}

/// λ^e_j(t) = Σ_k (λ^g_k e^{−iω^g_k t} u_kj + λ^g_k* e^{+iω^g_k t} v_kj).
pub fn evolve_lambda(lambda_g: &CVector, map: &BogoliubovMap, t: f64) -> CVector {
    let n = map.dim();
    let rotated = CVector::from_iterator(
        n,
        (0..n).map(|k| lambda_g[k] * Complex64::from_polar(1.0, -map.omega_g[k] * t)),
    );
    CVector::from_iterator(
        n,
        (0..n).map(|j| {
            (0..n)
                .map(|k| rotated[k] * map.u[(k, j)] + rotated[k].conj() * map.v[(k, j)])
                .sum()
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_mode(beta: f64) -> BogoliubovMap {
        BogoliubovMap::from_link(
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![2.0]),
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![beta]),
        )
        .unwrap()
    }

    #[test]
    fn identity_map() {
        let m = BogoliubovMap::identity(DVector::from_vec(vec![0.3, 1.0, 1.7])).unwrap();
        assert_eq!(m.u, DMatrix::identity(3, 3));
        assert_eq!(m.v.amax(), 0.0);
        assert_eq!(m.a.amax(), 0.0);
        assert_eq!(m.beta_e.amax(), 0.0);
        assert_eq!(m.z, 1.0);
    }

    #[test]
    fn single_mode_coefficients() {
        let m = one_mode(0.0);
        let s8 = 8f64.sqrt();
        assert_abs_diff_eq!(m.u[(0, 0)], 3.0 / s8, epsilon = 1e-15);
        assert_abs_diff_eq!(m.v[(0, 0)], 1.0 / s8, epsilon = 1e-15);
        assert_abs_diff_eq!(m.a[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.z, (8.0f64 / 9.0).powf(0.25), epsilon = 1e-14);
        assert_abs_diff_eq!(m.z, 0.970_98, epsilon = 1e-5);
    }

    #[test]
    fn beta_relations_single_mode() {
        let m = one_mode(0.3);
        let (r1, r2) = m.beta_relation_residuals();
        assert!(r1 < 1e-12 && r2 < 1e-12);
        // β^e = −(u+v) β^g = −√2 · 0.3
        assert_abs_diff_eq!(m.beta_e[0], -2f64.sqrt() * 0.3, epsilon = 1e-14);
    }

    #[test]
    fn phase_examples() {
        let zero = BogoliubovMap::identity(DVector::from_vec(vec![1.0])).unwrap();
        let lam = CVector::from_vec(vec![Complex64::new(0.4, -1.2)]);
        assert_eq!(displacement_phase(&lam, &zero), 0.0);

        let m = one_mode(0.5);
        let real = CVector::from_vec(vec![Complex64::new(0.7, 0.0)]);
        assert_eq!(displacement_phase(&real, &m), 0.0);
        let i = CVector::from_vec(vec![Complex64::new(0.0, 1.0)]);
        assert_abs_diff_eq!(displacement_phase(&i, &m), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn evolve_lambda_examples() {
        let m = one_mode(0.0);
        let lam = CVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        // t = 0 is the static basis change: λ(u + v) = √2 for real λ
        let e0 = evolve_lambda(&lam, &m, 0.0);
        assert_abs_diff_eq!(e0[0].re, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(e0, basis_change(&lam, &m));
        // t = π, ω_g = 1: e^{∓iπ} = −1 ⇒ −(u + v)
        let ep = evolve_lambda(&lam, &m, PI);
        assert_abs_diff_eq!(ep[0].re, -2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(ep[0].im, 0.0, epsilon = 1e-14);
        // t = π/2: −i u + i v = −i (u − v) = −i/√2
        let eh = evolve_lambda(&lam, &m, PI / 2.0);
        assert_abs_diff_eq!(eh[0].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eh[0].im, -1.0 / 2f64.sqrt(), epsilon = 1e-14);

        let id = BogoliubovMap::identity(DVector::from_vec(vec![0.7, 1.3])).unwrap();
        let lam2 = CVector::from_vec(vec![Complex64::new(0.2, 0.1), Complex64::new(-0.5, 0.3)]);
        let ev = evolve_lambda(&lam2, &id, 2.0);
        for k in 0..2 {
            let expect = lam2[k] * Complex64::from_polar(1.0, -id.omega_g[k] * 2.0);
            assert_abs_diff_eq!((ev[k] - expect).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn frequency_scaling_leaves_coefficients() {
        let og = DVector::from_vec(vec![0.3, 1.1]);
        let oe = DVector::from_vec(vec![0.45, 1.2]);
        let th = 0.3f64;
        let t = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let (u1, v1) = bogoliubov_coefficients(&og, &oe, &t);
        let (u2, v2) = bogoliubov_coefficients(&(&og * 3.7), &(&oe * 3.7), &t);
        assert!((u1 - u2).amax() < 1e-14 && (v1 - v2).amax() < 1e-14);
    }
}
