//! Brute-force overlap in a truncated Fock space.
//!
//! Independent of the Gaussian machinery: the excited-structure ladder
//! operators are assembled from the ground ones, H_e is diagonalized
//! densely, the recoil operator is exponentiated by its Taylor series, and
//! the trace over the thermal mixture is taken state by state.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QuenchError, Result};
use crate::structure_map::{BogoliubovMap, CVector};

pub const MAX_MODES: usize = 3;
pub const DIMENSION_CAP: usize = 250_000;
/// Dense diagonalization is the binding limit in practice.
pub const DENSE_CAP: usize = 6_000;
pub const TAIL_LIMIT: f64 = 1e-10;
pub const CONVERGENCE_TOL: f64 = 1e-7;
/// Thermal weights below this (relative) are skipped in the trace.
const WEIGHT_CUTOFF: f64 = 1e-15;

/// Tensor-product Fock space with per-mode cutoffs and the map whose
/// coefficients define the excited-structure operators.
#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    pub n_max: Vec<usize>,
    pub map: BogoliubovMap,
    /// Classical energies added to the Hamiltonians; they only shift the
    /// global phase, which the oracle removes.
    pub e0_g: f64,
    pub e0_e: f64,
    strides: Vec<usize>,
    dim: usize,
}

impl TruncatedSystem {
    pub fn new(map: &BogoliubovMap, n_max: Vec<usize>) -> Result<Self> {
        let m = map.dim();
        if m == 0 || m > MAX_MODES {
            return Err(QuenchError::Dimension(format!(
                "oracle handles 1 to {} modes, got {}",
                MAX_MODES, m
            )));
        }
        if n_max.len() != m {
            return Err(QuenchError::Dimension(format!(
                "{} cutoffs for {} modes",
                n_max.len(),
                m
            )));
        }
        let mut dim: usize = 1;
        for &n in &n_max {
            dim = dim.checked_mul(n + 1).unwrap_or(usize::MAX);
        }
        if dim > DIMENSION_CAP {
            return Err(QuenchError::OracleDimension { dim, cap: DIMENSION_CAP });
        }
        let mut strides = vec![1; m];
        for j in (0..m.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * (n_max[j + 1] + 1);
        }
        Ok(TruncatedSystem {
            n_max,
            map: map.clone(),
            e0_g: 0.0,
            e0_e: 0.0,
            strides,
            dim,
        })
    }

    pub fn uniform(map: &BogoliubovMap, n_max: usize) -> Result<Self> {
        Self::new(map, vec![n_max; map.dim()])
    }

    pub fn n_modes(&self) -> usize {
        self.n_max.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Occupation of mode j in basis state `idx`.
    pub fn quanta(&self, idx: usize, j: usize) -> usize {
        (idx / self.strides[j]) % (self.n_max[j] + 1)
    }

    /// out += c · a_j x
    fn add_lower<T>(&self, j: usize, c: T, x: &[T], out: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Mul<T, Output = T> + std::ops::AddAssign,
    {
        let s = self.strides[j];
        for idx in 0..self.dim {
            let n = self.quanta(idx, j);
            if n < self.n_max[j] {
                // a|n+1⟩ = √(n+1)|n⟩
                out[idx] += c * x[idx + s] * ((n + 1) as f64).sqrt();
            }
        }
    }

    /// out += c · a_j† x
    fn add_raise<T>(&self, j: usize, c: T, x: &[T], out: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Mul<T, Output = T> + std::ops::AddAssign,
    {
        let s = self.strides[j];
        for idx in 0..self.dim {
            let n = self.quanta(idx, j);
            if n > 0 {
                out[idx] += c * x[idx - s] * (n as f64).sqrt();
            }
        }
    }

    pub fn lower(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_lower(j, 1.0, x, &mut out);
        out
    }

    pub fn raise(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_raise(j, 1.0, x, &mut out);
        out
    }

    /// b_j x with b_j = Σ_k u_kj a_k + v_kj a_k† + β^e_j.
    fn apply_b<T>(&self, j: usize, x: &[T], dagger: bool) -> Vec<T>
    where
        T: Copy
            + Default
            + From<f64>
            + std::ops::Mul<f64, Output = T>
            + std::ops::Mul<T, Output = T>
            + std::ops::AddAssign,
    {
        let mut out: Vec<T> = x.iter().map(|v| *v * self.map.beta_e[j]).collect();
        for k in 0..self.n_modes() {
            let u = T::from(self.map.u[(k, j)]);
            let v = T::from(self.map.v[(k, j)]);
            if dagger {
                self.add_raise(k, u, x, &mut out);
                self.add_lower(k, v, x, &mut out);
            } else {
                self.add_lower(k, u, x, &mut out);
                self.add_raise(k, v, x, &mut out);
            }
        }
        out
    }

    /// Largest deviation of [a_j, a_j†] from the identity on states below
    /// the top level of mode j.
    pub fn commutator_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_modes() {
            for idx in 0..self.dim {
                if self.quanta(idx, j) == self.n_max[j] {
                    continue;
                }
                let mut e = vec![0.0; self.dim];
                e[idx] = 1.0;
                let aad = self.lower(j, &self.raise(j, &e));
                let ada = self.raise(j, &self.lower(j, &e));
                for (r, (p, q)) in aad.iter().zip(ada.iter()).enumerate() {
                    let target = if r == idx { 1.0 } else { 0.0 };
                    worst = worst.max((p - q - target).abs());
                }
            }
        }
        worst
    }

    /// Energy of basis state `idx` under H_g = Σ ω_j(a†a + ½) + E₀^g.
    pub fn ground_energy(&self, idx: usize) -> f64 {
        self.e0_g
            + (0..self.n_modes())
                .map(|j| self.map.omega_g[j] * (self.quanta(idx, j) as f64 + 0.5))
                .sum::<f64>()
    }

    fn ground_reference(&self) -> f64 {
        self.e0_g + 0.5 * self.map.omega_g.sum()
    }

    fn excited_reference(&self) -> f64 {
        self.e0_e + 0.5 * self.map.omega_e.sum()
    }
}

/// (H_g, H_e) as dense matrices. H_e = Σ ω^e_j (b_j†b_j + ½) + E₀^e is
/// assembled column by column from operator applications.
pub fn build_hamiltonians(system: &TruncatedSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = system.dim();
    if d > DENSE_CAP {
        return Err(QuenchError::OracleDimension { dim: d, cap: DENSE_CAP });
    }
    let hg = DMatrix::from_diagonal(&DVector::from_iterator(d, (0..d).map(|i| system.ground_energy(i))));
    let cols: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|c| {
            let mut e = vec![0.0; d];
            e[c] = 1.0;
            let mut col = vec![0.0; d];
            col[c] = system.excited_reference();
            for j in 0..system.n_modes() {
                let bx = system.apply_b(j, &e, false);
                let bdbx = system.apply_b(j, &bx, true);
                for (o, v) in col.iter_mut().zip(bdbx) {
                    *o += system.map.omega_e[j] * v;
                }
            }
            col
        })
        .collect();
    let mut he = DMatrix::zeros(d, d);
    for (c, col) in cols.iter().enumerate() {
        he.set_column(c, &DVector::from_column_slice(col));
    }
    Ok((hg, he))
}

/// Thermal weights of the Fock states, normalized; errors if the truncated
/// mass misses more than TAIL_LIMIT.
pub fn thermal_weights(system: &TruncatedSystem, occupations: &DVector<f64>) -> Result<Vec<f64>> {
    let m = system.n_modes();
    if occupations.len() != m {
        return Err(QuenchError::Dimension("occupation count".into()));
    }
    if occupations.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
        return Err(QuenchError::InvalidScenario("occupations must be finite and non-negative".into()));
    }
    let single = |j: usize, n: usize| {
        let nb = occupations[j];
        if nb == 0.0 {
            if n == 0 { 1.0 } else { 0.0 }
        } else {
            (nb / (1.0 + nb)).powi(n as i32) / (1.0 + nb)
        }
    };
    let mut kept = 1.0;
    for j in 0..m {
        kept *= (0..=system.n_max[j]).map(|n| single(j, n)).sum::<f64>();
    }
    let tail = 1.0 - kept;
    if tail > TAIL_LIMIT {
        return Err(QuenchError::TruncationTail { tail, limit: TAIL_LIMIT });
    }
    Ok((0..system.dim())
        .map(|idx| (0..m).map(|j| single(j, system.quanta(idx, j))).product::<f64>() / kept)
        .collect())
}

/// Diagonalized system ready for repeated overlap evaluations.
pub struct FockOracle {
    pub system: TruncatedSystem,
    /// Eigenvalues of H_e.
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl FockOracle {
    pub fn new(system: TruncatedSystem) -> Result<Self> {
        let (_, he) = build_hamiltonians(&system)?;
        let eig = SymmetricEigen::new(he);
        Ok(FockOracle {
            system,
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// exp(Σ κ_j b_j† − κ_j* b_j) applied to a vector, by Taylor series.
    pub fn recoil(&self, kappa: &CVector, x: &[Complex64]) -> Vec<Complex64> {
        let sys = &self.system;
        let gen = |y: &[Complex64]| -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); sys.dim()];
            for j in 0..sys.n_modes() {
                if kappa[j] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let bd = sys.apply_b(j, y, true);
                let b = sys.apply_b(j, y, false);
                for i in 0..out.len() {
                    out[i] += kappa[j] * bd[i] - kappa[j].conj() * b[i];
                }
            }
            out
        };
        let mut sum = x.to_vec();
        let mut term = x.to_vec();
        for k in 1..400 {
            term = gen(&term).into_iter().map(|v| v / k as f64).collect();
            let norm: f64 = term.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for (s, t) in sum.iter_mut().zip(term.iter()) {
                *s += t;
            }
            if norm < 1e-17 {
                break;
            }
        }
        sum
    }

    /// Tr{R_{κ′}† U_e R_κ ρ₀ U_g†} with both Hamiltonians measured from
    /// their vibrational ground energies.
    pub fn overlap(
        &self,
        occupations: &DVector<f64>,
        kappa: &CVector,
        kappa_prime: &CVector,
        times: &[f64],
    ) -> Result<Vec<Complex64>> {
        let sys = &self.system;
        let m = sys.n_modes();
        if kappa.len() != m || kappa_prime.len() != m {
            return Err(QuenchError::Dimension("recoil vector length".into()));
        }
        let p = thermal_weights(sys, occupations)?;
        let pmax = p.iter().cloned().fold(0.0, f64::max);
        let states: Vec<usize> = (0..sys.dim()).filter(|&n| p[n] > WEIGHT_CUTOFF * pmax).collect();
        let vt = self.vectors.transpose();
        let ref_g = sys.ground_reference();
        let ref_e = sys.excited_reference();
        let eps: Vec<f64> = self.energies.iter().map(|e| e - ref_e).collect();
        let zero = Complex64::new(0.0, 0.0);

        let contributions: Vec<Vec<Complex64>> = states
            .par_iter()
            .map(|&n| {
                let mut e = vec![zero; sys.dim()];
                e[n] = Complex64::new(1.0, 0.0);
                let to_eigen = |v: Vec<Complex64>| -> Vec<Complex64> {
                    let re = DVector::from_iterator(v.len(), v.iter().map(|c| c.re));
                    let im = DVector::from_iterator(v.len(), v.iter().map(|c| c.im));
                    let (r, i) = (&vt * re, &vt * im);
                    r.iter().zip(i.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect()
                };
                let b = to_eigen(self.recoil(kappa, &e));
                let bp = to_eigen(self.recoil(kappa_prime, &e));
                let c: Vec<Complex64> = b.iter().zip(bp.iter()).map(|(x, y)| y.conj() * x).collect();
                let eg = sys.ground_energy(n) - ref_g;
                times
                    .iter()
                    .map(|&t| {
                        let s: Complex64 = c
                            .iter()
                            .zip(eps.iter())
                            .map(|(ck, ek)| ck * Complex64::from_polar(1.0, -ek * t))
                            .sum();
                        s * Complex64::from_polar(p[n], eg * t)
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![zero; times.len()];
        for c in contributions {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Largest deviation of U_e(t)†U_e(t) from the identity.
    pub fn unitarity_defect(&self, t: f64) -> f64 {
        let d = self.system.dim();
        let phases = DVector::from_iterator(d, self.energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)));
        let v = self.vectors.map(|x| Complex64::new(x, 0.0));
        let u = &v * DMatrix::from_diagonal(&phases) * v.transpose();
        let prod = u.adjoint() * &u;
        (prod - DMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// One-shot oracle evaluation at a single time.
pub fn oracle_overlap(
    system: &TruncatedSystem,
    occupations: &DVector<f64>,
    kappa: &CVector,
    kappa_prime: &CVector,
    t: f64,
) -> Result<Complex64> {
    Ok(FockOracle::new(system.clone())?.overlap(occupations, kappa, kappa_prime, &[t])?[0])
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub n_max: Vec<usize>,
    pub times: Vec<f64>,
    /// Re/Im of the overlap per cutoff and time.
    pub values: Vec<Vec<(f64, f64)>>,
    /// max_t |𝒪_{N_{i+1}} − 𝒪_{N_i}|
    pub differences: Vec<f64>,
    pub converged: bool,
    pub failures: Vec<String>,
}

impl ConvergenceReport {
    /// Overlaps at the largest cutoff that succeeded.
    pub fn best(&self) -> Option<Vec<Complex64>> {
        self.values
            .last()
            .map(|v| v.iter().map(|(r, i)| Complex64::new(*r, *i)).collect())
    }
}

/// Runs the oracle at increasing uniform cutoffs and reports successive
/// differences. Failures are recorded, not raised.
pub fn convergence_sweep(
    map: &BogoliubovMap,
    n_max: &[usize],
    occupations: &DVector<f64>,
    kappa: &CVector,
    kappa_prime: &CVector,
    times: &[f64],
) -> ConvergenceReport {
    let mut report = ConvergenceReport {
        n_max: Vec::new(),
        times: times.to_vec(),
        values: Vec::new(),
        differences: Vec::new(),
        converged: false,
        failures: Vec::new(),
    };
    let mut prev: Option<Vec<Complex64>> = None;
    for &n in n_max {
        let result = TruncatedSystem::uniform(map, n)
            .and_then(FockOracle::new)
            .and_then(|o| o.overlap(occupations, kappa, kappa_prime, times));
        match result {
            Ok(vals) => {
                if let Some(p) = &prev {
                    let d = p.iter().zip(vals.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    report.differences.push(d);
                }
                report.n_max.push(n);
                report.values.push(vals.iter().map(|c| (c.re, c.im)).collect());
                prev = Some(vals);
            }
            Err(e) => report.failures.push(format!("n_max={}: {}", n, e)),
        }
    }
    report.converged = report.failures.is_empty()
        && report.differences.last().is_some_and(|d| *d < CONVERGENCE_TOL);
    report
}
