//! Closed-form thermal overlap.
//!
//! The overlap is Z² e^{E(λ)}/√det Ω averaged over the Gaussian P function of
//! the thermal state, where E is quadratic in (λ, λ*). The exponent is built
//! by composing affine maps, reduced to real coordinates on the hot modes and
//! integrated analytically.

use nalgebra::DVector;
use num_complex::Complex64;

use super::algebra::{to_real_imag, Affine, CMatrix, CVector, Quadratic};
use crate::error::{QuenchError, Result};
use crate::structure_map::BogoliubovMap;

/// Occupations below this are treated as exactly zero: the mode is left out
/// of the λ integration.
pub const EPS_COLD: f64 = 1e-8;
/// Condition numbers of Ω and of the scaled 𝒳 above this raise an error.
pub const CONDITION_LIMIT: f64 = 1e13;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Every intermediate of the overlap at one time, kept for inspection.
///
/// Vectors indexed over the λ integration use the real coordinates
/// w = (Re λ_hot, Im λ_hot); in those coordinates the integrand is
/// exp(𝒞 + i φ̃ + 𝓛ᵀw − wᵀ𝒳w) times the Gaussian normalization.
#[derive(Debug, Clone)]
pub struct KernelParts {
    pub t: f64,
    pub omega: CMatrix,
    /// s at λ = 0.
    pub s: CVector,
    /// ∂s/∂(λ, λ*).
    pub s_lambda: CMatrix,
    pub g_zeta: Complex64,
    pub g_zeta_prime: Complex64,
    pub phi_tilde: f64,
    /// G(ζ) + G(ζ′)* + ¼ sᵀΩ⁻¹s at λ = 0.
    pub c: Complex64,
    /// Linear coefficients from the two G terms.
    pub l_i: CVector,
    /// Linear coefficients from the phase.
    pub l_j: CVector,
    /// Linear coefficients from ¼ sᵀΩ⁻¹s.
    pub l_k: CVector,
    pub l: CVector,
    /// Quadratic form of the integrand including the thermal block 𝒯.
    pub x: CMatrix,
    /// 𝒯 = diag(1/n̄) on the hot modes, repeated for real and imaginary parts.
    pub thermal_block: CMatrix,
    pub integration_mask: Vec<bool>,
    pub occupations: DVector<f64>,
    pub z: f64,
    pub omega_condition: f64,
}

impl KernelParts {
    pub fn hot_modes(&self) -> Vec<usize> {
        hot_indices(&self.integration_mask)
    }
}

fn hot_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(j, &h)| h.then_some(j))
        .collect()
}

/// Result of evaluating the closed form at one time.
#[derive(Debug, Clone, Copy)]
pub struct OverlapSample {
    pub value: Complex64,
    /// √det Ω · √det 𝒳̃ with principal eigenvalue roots; the only factor
    /// that carries a branch choice.
    pub det_root: Complex64,
    pub omega_condition: f64,
    pub x_condition: f64,
}

fn condition(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Product of principal square roots of the eigenvalues of `m`.
///
/// Evaluated without an eigensolver: along M(s) = I + s(M − I) every
/// eigenvalue moves on the segment from 1 to μ, which never meets the
/// negative real axis unless μ does. Following arg det M(s) continuously
/// from s = 0 therefore yields Σ Arg μ exactly.
pub fn principal_det_root(m: &CMatrix) -> Result<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Ok(re(1.0));
    }
    let id = CMatrix::identity(n, n);
    let det_at = |s: f64| (&id + (m - &id) * re(s)).lu().determinant();
    let mut s: f64 = 0.0;
    let mut h: f64 = 1.0 / 16.0;
    let mut prev = re(1.0);
    let mut arg = 0.0;
    while s < 1.0 {
        let step = h.min(1.0 - s);
        let d = det_at(s + step);
        if d == re(0.0) || !d.is_finite() {
            return Err(QuenchError::IllConditioned {
                what: "determinant continuation",
                condition: f64::INFINITY,
            });
        }
        let delta = (d / prev).arg();
        if delta.abs() > std::f64::consts::FRAC_PI_4 && step > 1e-6 {
            h = step / 2.0;
            continue;
        }
        arg += delta;
        prev = d;
        s += step;
        if delta.abs() < std::f64::consts::FRAC_PI_8 {
            h = (h * 2.0).min(0.25);
        }
    }
    Ok(Complex64::from_polar(prev.norm().sqrt(), 0.5 * arg))
}

fn constant(c: CVector, m: usize) -> Affine {
    Affine::constant(c, m)
}

fn complexify(v: &DVector<f64>) -> CVector {
    v.map(re)
}

fn complexify_mat(m: &nalgebra::DMatrix<f64>) -> CMatrix {
    m.map(re)
}

fn g_form(gamma: &Affine, a: &CMatrix, m: usize) -> Quadratic {
    let gc = gamma.conj();
    Quadratic::bilinear(&gc, a, &gc)
        .scale(re(0.5))
        .add(&Quadratic::bilinear(&gc, &CMatrix::identity(m, m), gamma).scale(re(-0.5)))
}

fn s_form(gamma: &Affine, a: &CMatrix) -> Affine {
    gamma.conj().apply(a).sub(gamma)
}

/// φ_θ(κ, λ^e) = Im[Σ λ^e β^e + κ λ^e* + κ β^e].
fn theta_phase(kappa: &CVector, le: &Affine, beta_e: &CVector, m: usize) -> Quadratic {
    let k = constant(kappa.clone(), m);
    let b = constant(beta_e.clone(), m);
    let mut q = Quadratic::dot(le, &b).add(&Quadratic::dot(&k, &le.conj()));
    q.c += kappa.dot(beta_e);
    q.imag()
}

/// Assembles all parts of the overlap at time `t` (internal units).
pub fn assemble_kernel(
    map: &BogoliubovMap,
    kappa: &CVector,
    kappa_prime: &CVector,
    occupations: &DVector<f64>,
    t: f64,
) -> Result<KernelParts> {
    let m = map.dim();
    if kappa.len() != m || kappa_prime.len() != m || occupations.len() != m {
        return Err(QuenchError::Dimension(format!(
            "kernel inputs must have {} modes",
            m
        )));
    }
    if !t.is_finite() {
        return Err(QuenchError::BadGrid("non-finite time".into()));
    }
    if occupations.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
        return Err(QuenchError::InvalidScenario(
            "occupations must be finite and non-negative".into(),
        ));
    }

    let u_t = complexify_mat(&map.u.transpose());
    let v_t = complexify_mat(&map.v.transpose());
    let a = complexify_mat(&map.a);
    let beta_g = complexify(&map.beta_g);
    let beta_e = complexify(&map.beta_e);
    let phase_g = CVector::from_iterator(m, map.omega_g.iter().map(|w| Complex64::from_polar(1.0, -w * t)));
    let phase_e = CVector::from_iterator(m, map.omega_e.iter().map(|w| Complex64::from_polar(1.0, -w * t)));

    let lam = Affine::lambda(&CVector::repeat(m, re(1.0)));
    let lam_t = Affine::lambda(&phase_g);
    let to_e = |l: &Affine| l.apply(&u_t).add(&l.conj().apply(&v_t));
    let le = to_e(&lam);
    let le_t = to_e(&lam_t);

    let theta = constant(kappa + &beta_e, m).add(&le);
    let theta_p = constant(kappa_prime + &beta_e, m).add(&le_t);

    let bg = constant(beta_g, m);
    let phi = Quadratic::dot(&bg, &lam)
        .imag()
        .scale(re(2.0))
        .add(&Quadratic::dot(&bg, &lam_t).imag().scale(re(-2.0)))
        .add(&theta_phase(kappa, &le, &beta_e, m))
        .add(&theta_phase(kappa_prime, &le_t, &beta_e, m).scale(re(-1.0)));

    let g_theta = g_form(&theta, &a, m);
    let g_theta_p = g_form(&theta_p, &a, m);
    let g_total = g_theta.add(&g_theta_p.conj());

    let s_th = s_form(&theta, &a);
    let s_thp = s_form(&theta_p, &a).conj().scale_rows(&phase_e);
    let s_plus = s_th.add(&s_thp);
    let s_minus = s_th.sub(&s_thp).scale(-I);
    let s = Affine::stack(&s_plus, &s_minus);

    let mut omega = CMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for k in 0..m {
            let at = a[(j, k)] * phase_e[j] * phase_e[k];
            let ap = (at + a[(j, k)]) * 0.5;
            let am = (at - a[(j, k)]) * 0.5;
            let id = if j == k { re(1.0) } else { re(0.0) };
            omega[(j, k)] = id - ap;
            omega[(j, m + k)] = -I * am;
            omega[(m + j, k)] = -I * am;
            omega[(m + j, m + k)] = id + ap;
        }
    }
    let omega_condition = condition(&omega);
    if omega_condition > CONDITION_LIMIT {
        return Err(QuenchError::IllConditioned {
            what: "Omega",
            condition: omega_condition,
        });
    }
    let omega_inv = omega.clone().try_inverse().ok_or(QuenchError::IllConditioned {
        what: "Omega",
        condition: f64::INFINITY,
    })?;
    let s_quad = Quadratic::bilinear(&s, &omega_inv, &s).scale(re(0.25));

    let mask: Vec<bool> = occupations.iter().map(|n| *n > EPS_COLD).collect();
    let hot = hot_indices(&mask);
    let (l_i, _) = to_real_imag(&g_total, &hot);
    let (l_j, _) = to_real_imag(&phi.scale(I), &hot);
    let (l_k, _) = to_real_imag(&s_quad, &hot);

    let exponent = phi.scale(I).add(&g_total).add(&s_quad);
    let (l, h_w) = to_real_imag(&exponent, &hot);
    let nh = hot.len();
    let mut thermal_block = CMatrix::zeros(2 * nh, 2 * nh);
    for (a_idx, &j) in hot.iter().enumerate() {
        let inv = re(1.0 / occupations[j]);
        thermal_block[(a_idx, a_idx)] = inv;
        thermal_block[(nh + a_idx, nh + a_idx)] = inv;
    }
    let x = &thermal_block - h_w;

    Ok(KernelParts {
        t,
        omega,
        s: s.c.clone(),
        s_lambda: s.lin.clone(),
        g_zeta: g_theta.c,
        g_zeta_prime: g_theta_p.c,
        phi_tilde: phi.c.re,
        c: exponent.c - I * phi.c,
        l_i,
        l_j,
        l_k,
        l,
        x,
        thermal_block,
        integration_mask: mask,
        occupations: occupations.clone(),
        z: map.z,
        omega_condition,
    })
}

/// Integrates the assembled kernel over the hot modes.
///
/// The integral is done in variables scaled by √n̄ so that 𝒳̃ = D𝒳D stays
/// O(1) however small the occupations are.
pub fn evaluate(parts: &KernelParts) -> Result<OverlapSample> {
    let hot = parts.hot_modes();
    let nh = hot.len();
    let mut value = re(parts.z * parts.z) * (I * parts.phi_tilde + parts.c).exp();
    let mut det_root = principal_det_root(&parts.omega)?;
    let mut x_condition = 1.0;
    if nh > 0 {
        let d = CVector::from_iterator(
            2 * nh,
            (0..2 * nh).map(|a| re(parts.occupations[hot[a % nh]].sqrt())),
        );
        let mut xs = parts.x.clone();
        for r in 0..2 * nh {
            for c in 0..2 * nh {
                xs[(r, c)] *= d[r] * d[c];
            }
        }
        let ls = parts.l.component_mul(&d);
        x_condition = condition(&xs);
        if x_condition > CONDITION_LIMIT {
            return Err(QuenchError::IllConditioned {
                what: "thermal integration matrix",
                condition: x_condition,
            });
        }
        let sol = xs.clone().lu().solve(&ls).ok_or(QuenchError::IllConditioned {
            what: "thermal integration matrix",
            condition: f64::INFINITY,
        })?;
        value *= (ls.dot(&sol) * 0.25).exp();
        det_root *= principal_det_root(&xs)?;
    }
    Ok(OverlapSample {
        value: value / det_root,
        det_root,
        omega_condition: parts.omega_condition,
        x_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn one_mode(beta: f64) -> BogoliubovMap {
        BogoliubovMap::from_link(
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 2.0),
            DMatrix::identity(1, 1),
            DVector::from_element(1, beta),
        )
        .unwrap()
    }

    #[test]
    fn identity_map_kills_sources() {
        let map = BogoliubovMap::identity(DVector::from_vec(vec![1.0, 1.7])).unwrap();
        let z = CVector::zeros(2);
        let p = assemble_kernel(&map, &z, &z, &DVector::from_element(2, 0.3), 1.3).unwrap();
        assert!(p.s.norm() < 1e-15);
        assert!(p.g_zeta.norm() < 1e-15 && p.g_zeta_prime.norm() < 1e-15);
        assert!(p.c.norm() < 1e-15);
        assert!(p.l.norm() < 1e-15);
        assert!(p.phi_tilde.abs() < 1e-15);
        assert!((&p.omega - CMatrix::identity(4, 4)).norm() < 1e-15);
        let o = evaluate(&p).unwrap();
        assert!((o.value - re(1.0)).norm() < 1e-13);
    }

    #[test]
    fn omega_at_time_zero_is_block_diagonal() {
        let map = one_mode(0.0);
        let z = CVector::zeros(1);
        let p = assemble_kernel(&map, &z, &z, &DVector::zeros(1), 0.0).unwrap();
        let a = map.a[(0, 0)];
        assert!((p.omega[(0, 0)] - re(1.0 - a)).norm() < 1e-15);
        assert!((p.omega[(1, 1)] - re(1.0 + a)).norm() < 1e-15);
        assert!(p.omega[(0, 1)].norm() < 1e-15 && p.omega[(1, 0)].norm() < 1e-15);
        // Z²/√det Ω = (1−A²)^{1/2}/(1−A²)^{1/2}
        let o = evaluate(&p).unwrap();
        assert!((o.value - re(1.0)).norm() < 1e-14);
    }

    #[test]
    fn thermal_block_only_on_hot_modes() {
        let map = BogoliubovMap::identity(DVector::from_vec(vec![1.0, 1.5, 2.0])).unwrap();
        let z = CVector::zeros(3);
        let occ = DVector::from_vec(vec![0.5, 0.0, 2.0]);
        let p = assemble_kernel(&map, &z, &z, &occ, 0.4).unwrap();
        assert_eq!(p.integration_mask, vec![true, false, true]);
        assert_eq!(p.x.nrows(), 4);
        assert!((p.thermal_block[(0, 0)] - re(2.0)).norm() < 1e-15);
        assert!((p.thermal_block[(3, 3)] - re(0.5)).norm() < 1e-15);
    }

    #[test]
    fn linear_parts_add_up() {
        let map = one_mode(0.3);
        let k = CVector::from_element(1, Complex64::new(0.0, 0.1));
        let p = assemble_kernel(&map, &k, &k, &DVector::from_element(1, 0.5), 1.0).unwrap();
        assert!((&p.l_i + &p.l_j + &p.l_k - &p.l).norm() < 1e-14);
    }

    #[test]
    fn continuation_matches_eigenvalue_roots() {
        let mut seed = 7u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in [1, 2, 4, 6] {
            for _ in 0..20 {
                let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(3.0 * rnd(), 3.0 * rnd()));
                let ev = m.clone().eigenvalues().unwrap();
                if ev.iter().any(|e| e.re < 0.0 && e.im.abs() < 1e-3) {
                    continue;
                }
                let direct: Complex64 = ev.iter().map(|e| e.sqrt()).product();
                let r = principal_det_root(&m).unwrap();
                assert!((r - direct).norm() < 1e-9 * direct.norm().max(1.0), "{} vs {}", r, direct);
            }
        }
    }

    #[test]
    fn principal_root_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(4.0, 0.0),
            Complex64::new(0.0, 1.0),
        ]));
        let r = principal_det_root(&m).unwrap();
        let expect = Complex64::new(2.0, 0.0) * Complex64::new(0.0, 1.0).sqrt();
        assert!((r - expect).norm() < 1e-14);
    }
}
