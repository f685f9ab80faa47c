//! Classical equilibrium structures of the planar crystal and their normal
//! modes.
//!
//! Coordinates are packed as a 2N vector: all axial (x) coordinates first,
//! then all transverse (y) coordinates, ions sorted by axial position.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::params::{DipoleGeometry, TrapScenario};

pub const GRADIENT_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const MAX_HALVINGS: usize = 40;
/// Lowest admissible mode frequency, in units of the axial frequency.
pub const VALIDITY_BOUND: f64 = 0.05;
/// Minimum transverse-pattern correlation for a mode to count as the soft mode.
pub const SOFT_MODE_CORRELATION: f64 = 0.9;

const KICK: f64 = 1e-3;
const MIN_SEPARATION: f64 = 1e-9;
const LINEAR_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InternalState {
    Ground,
    Excited,
}

impl InternalState {
    pub fn as_str(self) -> &'static str {
        match self {
            InternalState::Ground => "g",
            InternalState::Excited => "e",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureLabel {
    Linear,
    ZigzagUp,
    ZigzagDown,
}

impl StructureLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureLabel::Linear => "linear",
            StructureLabel::ZigzagUp => "zigzag-up",
            StructureLabel::ZigzagDown => "zigzag-down",
        }
    }

    pub fn is_zigzag(self) -> bool {
        !matches!(self, StructureLabel::Linear)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceInfo {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Energy after every accepted step, starting with the seed.
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrystalStructure {
    pub internal_state: InternalState,
    pub positions: DVector<f64>,
    pub classical_energy: f64,
    pub structure_label: StructureLabel,
    pub convergence: ConvergenceInfo,
}

impl CrystalStructure {
    pub fn n_ions(&self) -> usize {
        self.positions.len() / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        self.positions[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.positions[self.n_ions() + i]
    }

    /// Largest transverse excursion.
    pub fn transverse_amplitude(&self) -> f64 {
        let n = self.n_ions();
        self.positions.rows(n, n).amax()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeBasis {
    pub internal_state: InternalState,
    /// Dimensionless angular frequencies, ascending.
    pub frequencies: DVector<f64>,
    /// Columns are normalized mode vectors in the packed coordinate order.
    pub mode_matrix: DMatrix<f64>,
    pub soft_mode_index: usize,
    pub soft_mode_correlation: f64,
    /// Set when no mode reached the correlation threshold and the lowest mode
    /// was taken instead.
    pub soft_mode_fallback: bool,
}

impl ModeBasis {
    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    pub fn soft_frequency(&self) -> f64 {
        self.frequencies[self.soft_mode_index]
    }

    pub fn min_frequency(&self) -> f64 {
        self.frequencies.min()
    }
}

/// Energy, analytic gradient and Hessian of the dimensionless potential.
pub fn total_potential(
    positions: &DVector<f64>,
    scenario: &TrapScenario,
    state: InternalState,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let dim = positions.len();
    if dim % 2 != 0 || dim / 2 != scenario.n_ions {
        return Err(QuenchError::Dimension(format!(
            "{} coordinates for {} ions",
            dim, scenario.n_ions
        )));
    }
    let n = dim / 2;
    let rho2 = scenario.transverse_ratio().powi(2);
    let mut energy = 0.0;
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);

    for i in 0..n {
        let (x, y) = (positions[i], positions[n + i]);
        energy += 0.5 * (x * x + rho2 * y * y);
        grad[i] += x;
        grad[n + i] += rho2 * y;
        hess[(i, i)] += 1.0;
        hess[(n + i, n + i)] += rho2;
    }

    if state == InternalState::Excited {
        let c = scenario.central_ion();
        let k = scenario.dipole_curvature();
        let y = positions[n + c];
        energy += 0.5 * k * y * y;
        grad[n + c] += k * y;
        hess[(n + c, n + c)] += k;
        if scenario.dipole_geometry == DipoleGeometry::IsotropicPlanar {
            let x = positions[c];
            energy += 0.5 * k * x * x;
            grad[c] += k * x;
            hess[(c, c)] += k;
        }
    }

    for i in 0..n {
        for j in (i + 1)..n {
            let d = [positions[i] - positions[j], positions[n + i] - positions[n + j]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            let r = r2.sqrt();
            if r < MIN_SEPARATION {
                return Err(QuenchError::CoincidentIons(i, j));
            }
            let inv_r3 = 1.0 / (r2 * r);
            let inv_r5 = inv_r3 / r2;
            energy += 1.0 / r;
            let idx_i = [i, n + i];
            let idx_j = [j, n + j];
            for a in 0..2 {
                grad[idx_i[a]] -= d[a] * inv_r3;
                grad[idx_j[a]] += d[a] * inv_r3;
                for b in 0..2 {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    let h = (3.0 * d[a] * d[b]) * inv_r5 - delta * inv_r3;
                    hess[(idx_i[a], idx_i[b])] += h;
                    hess[(idx_j[a], idx_j[b])] += h;
                    hess[(idx_i[a], idx_j[b])] -= h;
                    hess[(idx_j[a], idx_i[b])] -= h;
                }
            }
        }
    }
    Ok((energy, grad, hess))
}

/// Evenly spaced axial guess, roughly matching the central spacing of a
/// harmonic chain.
fn linear_ansatz(n: usize) -> DVector<f64> {
    let spacing = 2.0 * (n as f64).powf(-0.56);
    let mut p = DVector::zeros(2 * n);
    for i in 0..n {
        p[i] = spacing * (i as f64 - (n as f64 - 1.0) / 2.0);
    }
    p
}

/// Newton iterations with eigenvalue-modulus regularization and a
/// backtracking line search.
fn newton_minimize(
    start: DVector<f64>,
    scenario: &TrapScenario,
    state: InternalState,
) -> Result<(DVector<f64>, f64, ConvergenceInfo)> {
    let mut x = start;
    let (mut e, mut g, mut h) = total_potential(&x, scenario, state)?;
    let mut history = vec![e];
    for it in 0..MAX_NEWTON_ITERATIONS {
        let gnorm = g.norm();
        if gnorm < GRADIENT_TOL {
            return Ok((
                x,
                e,
                ConvergenceInfo {
                    iterations: it,
                    gradient_norm: gnorm,
                    energy_history: history,
                },
            ));
        }
        let eig = SymmetricEigen::new(h.clone());
        let proj = eig.eigenvectors.transpose() * &g;
        let scaled = DVector::from_iterator(
            proj.len(),
            proj.iter()
                .zip(eig.eigenvalues.iter())
                .map(|(p, l)| -p / l.abs().max(1e-8)),
        );
        let step = &eig.eigenvectors * scaled;
        let slope = g.dot(&step);

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &x + alpha * &step;
            if let Ok((e_new, g_new, h_new)) = total_potential(&trial, scenario, state) {
                let armijo = e_new <= e + 1e-4 * alpha * slope;
                // Close to the minimum the energy change drops below round-off.
                let flat = e_new <= e + 4.0 * f64::EPSILON * e.abs() && g_new.norm() < gnorm;
                if armijo || flat {
                    x = trial;
                    e = e_new.min(e);
                    g = g_new;
                    h = h_new;
                    history.push(e);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(QuenchError::NonConvergence {
                iterations: it,
                gradient_norm: gnorm,
            });
        }
    }
    let gnorm = g.norm();
    if gnorm < GRADIENT_TOL {
        return Ok((
            x,
            e,
            ConvergenceInfo {
                iterations: MAX_NEWTON_ITERATIONS,
                gradient_norm: gnorm,
                energy_history: history,
            },
        ));
    }
    Err(QuenchError::NonConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
        gradient_norm: gnorm,
    })
}

fn min_eigen(h: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(h.clone());
    let (k, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    (lmin, eig.eigenvectors.column(k).into_owned())
}

/// Sign of the alternating transverse pattern (+,−,+,…) centred on the middle
/// ion; positive means the central ion sits on the +y side.
fn zigzag_projection(positions: &DVector<f64>) -> f64 {
    let n = positions.len() / 2;
    let c = n / 2;
    (0..n)
        .map(|j| {
            let s = if (j as isize - c as isize) % 2 == 0 { 1.0 } else { -1.0 };
            s * positions[n + j]
        })
        .sum()
}

fn label_of(positions: &DVector<f64>) -> StructureLabel {
    let n = positions.len() / 2;
    if positions.rows(n, n).amax() < LINEAR_TOL {
        StructureLabel::Linear
    } else if zigzag_projection(positions) >= 0.0 {
        StructureLabel::ZigzagUp
    } else {
        StructureLabel::ZigzagDown
    }
}

/// Transverse overlap between two configurations.
fn transverse_overlap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() / 2;
    a.rows(n, n).dot(&b.rows(n, n))
}

/// Classical minimum for the given internal state.
///
/// Without a seed the search starts from a linear chain and, for g < 0,
/// kicks it along the zigzag eigenvector so that the central ion moves to
/// +y. With a seed the search starts at the seed and lands on the minimum
/// whose transverse pattern overlaps it most.
pub fn find_equilibrium(
    scenario: &TrapScenario,
    state: InternalState,
    seed: Option<&CrystalStructure>,
) -> Result<CrystalStructure> {
    scenario.validate()?;
    let n = scenario.n_ions;
    let (mut x, mut e, mut info) = match seed {
        Some(s) => {
            if s.positions.len() != 2 * n {
                return Err(QuenchError::Dimension("seed has wrong ion count".into()));
            }
            newton_minimize(s.positions.clone(), scenario, state)?
        }
        None => {
            let (lin, e, info) = newton_minimize(linear_ansatz(n), scenario, state)?;
            let g_below = crate::params::to_dimensionless(scenario)
                .map(|(g, _)| g < 0.0)
                .unwrap_or(false);
            let (_, _, h) = total_potential(&lin, scenario, state)?;
            let (lmin, _) = min_eigen(&h);
            if g_below || lmin < 0.0 {
                let v = zigzag_eigenvector(&lin, &h);
                let start = &lin + KICK * v;
                let (x2, e2, mut info2) = newton_minimize(start, scenario, state)?;
                let mut hist = info.energy_history.clone();
                hist.append(&mut info2.energy_history);
                info2.energy_history = hist;
                info2.iterations += info.iterations;
                (x2, e2, info2)
            } else {
                (lin, e, info)
            }
        }
    };

    let (_, _, h) = total_potential(&x, scenario, state)?;
    let (lmin, vmin) = min_eigen(&h);
    if lmin < 0.0 {
        // Stationary but unstable: escape along the unstable direction,
        // towards the seed pattern if there is one.
        let mut dir = vmin;
        let reference = seed.map(|s| s.positions.clone());
        let sign = match &reference {
            Some(r) if transverse_overlap(&dir, r) < 0.0 => -1.0,
            Some(_) => 1.0,
            None if zigzag_projection(&dir) < 0.0 => -1.0,
            None => 1.0,
        };
        dir *= sign;
        let (x2, e2, mut info2) = newton_minimize(&x + KICK * dir, scenario, state)?;
        let mut hist = info.energy_history.clone();
        hist.append(&mut info2.energy_history);
        info2.energy_history = hist;
        info2.iterations += info.iterations;
        x = x2;
        e = e2;
        info = info2;
        let (_, _, h) = total_potential(&x, scenario, state)?;
        let (lmin, _) = min_eigen(&h);
        if lmin < 0.0 {
            return Err(QuenchError::SaddlePoint { min_eigenvalue: lmin });
        }
    }

    // keep the axial ordering
    for i in 1..n {
        if x[i] <= x[i - 1] {
            return Err(QuenchError::NonConvergence {
                iterations: info.iterations,
                gradient_norm: info.gradient_norm,
            });
        }
    }

    Ok(CrystalStructure {
        internal_state: state,
        structure_label: label_of(&x),
        positions: x,
        classical_energy: e,
        convergence: info,
    })
}

/// Lowest transverse eigenvector of the Hessian, oriented so that the central
/// ion moves to +y.
fn zigzag_eigenvector(positions: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let n = positions.len() / 2;
    let block = h.view((n, n), (n, n)).into_owned();
    let (_, v) = min_eigen(&block);
    let mut full = DVector::zeros(2 * n);
    full.rows_mut(n, n).copy_from(&v);
    let c = n / 2;
    if full[n + c] < 0.0 || (full[n + c] == 0.0 && zigzag_projection(&full) < 0.0) {
        full = -full;
    }
    full
}

/// Eigendecomposition of the Hessian at a converged minimum.
pub fn normal_modes(structure: &CrystalStructure, scenario: &TrapScenario) -> Result<ModeBasis> {
    let (_, _, h) = total_potential(&structure.positions, scenario, structure.internal_state)?;
    basis_from_hessian(h, structure.internal_state)
}

/// Builds a mode basis from a Hessian: ascending frequencies, columns with
/// their largest-magnitude component positive.
pub fn basis_from_hessian(h: DMatrix<f64>, state: InternalState) -> Result<ModeBasis> {
    let dim = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lmin = eig.eigenvalues[order[0]];
    if lmin <= 0.0 {
        return Err(QuenchError::SaddlePoint { min_eigenvalue: lmin });
    }
    let mut freqs = DVector::zeros(dim);
    let mut m = DMatrix::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        freqs[col] = eig.eigenvalues[k].sqrt();
        let mut v = eig.eigenvectors.column(k).into_owned();
        let mut best = 0;
        for i in 1..dim {
            // strict comparison keeps the lowest index on ties
            if v[i].abs() > v[best].abs() + 1e-12 {
                best = i;
            }
        }
        if v[best] < 0.0 {
            v = -v;
        }
        m.set_column(col, &v);
    }
    let mut basis = ModeBasis {
        internal_state: state,
        frequencies: freqs,
        mode_matrix: m,
        soft_mode_index: 0,
        soft_mode_correlation: 0.0,
        soft_mode_fallback: false,
    };
    let (idx, corr, fallback) = soft_mode_search(&basis);
    basis.soft_mode_index = idx;
    basis.soft_mode_correlation = corr;
    basis.soft_mode_fallback = fallback;
    if fallback {
        log::warn!(
            "no mode correlates above {SOFT_MODE_CORRELATION} with the zigzag pattern; using the lowest mode"
        );
    }
    Ok(basis)
}

/// Correlation of a mode's transverse part with the alternating pattern.
pub fn zigzag_correlation(basis: &ModeBasis, mode: usize) -> f64 {
    let dim = basis.dim();
    let n = dim / 2;
    let c = n / 2;
    let col = basis.mode_matrix.column(mode);
    let mut dot = 0.0;
    let mut norm = 0.0;
    for j in 0..n {
        let s = if (j as isize - c as isize) % 2 == 0 { 1.0 } else { -1.0 };
        let y = col[n + j];
        dot += s * y;
        norm += y * y;
    }
    if norm == 0.0 {
        0.0
    } else {
        dot.abs() / (norm.sqrt() * (n as f64).sqrt())
    }
}

fn soft_mode_search(basis: &ModeBasis) -> (usize, f64, bool) {
    // modes are stored in ascending frequency, so the first hit is the lowest
    for k in 0..basis.dim() {
        let c = zigzag_correlation(basis, k);
        if c > SOFT_MODE_CORRELATION {
            return (k, c, false);
        }
    }
    let lowest = (0..basis.dim())
        .min_by(|&a, &b| basis.frequencies[a].total_cmp(&basis.frequencies[b]))
        .unwrap_or(0);
    (lowest, zigzag_correlation(basis, lowest), true)
}

/// Index of the soft (zigzag) mode.
pub fn soft_mode_index(basis: &ModeBasis) -> usize {
    soft_mode_search(basis).0
}

/// Rejects structures whose lowest mode sits too close to the instability
/// for the harmonic treatment.
pub fn check_validity(basis: &ModeBasis, allow_near_critical: bool) -> Result<()> {
    let w = basis.min_frequency();
    if w < VALIDITY_BOUND && !allow_near_critical {
        return Err(QuenchError::NearCritical {
            min_frequency: w,
            bound: VALIDITY_BOUND,
        });
    }
    Ok(())
}

/// ν_c/ν_x for an N-ion chain, by bisection on the lowest transverse
/// curvature of the linear chain.
pub fn critical_ratio_numeric(n_ions: usize) -> Result<f64> {
    use crate::params::IonSpecies;
    let probe = |ratio: f64| TrapScenario {
        n_ions,
        nu_x: 1.0,
        nu_y: ratio,
        nu_dip: 0.0,
        dipole_geometry: DipoleGeometry::TransverseOnly,
        species: IonSpecies::beryllium9(),
    };
    let hi_ratio = 2.0 * n_ions as f64;
    let s = probe(hi_ratio);
    s.validate()?;
    let (lin, _, _) = newton_minimize(linear_ansatz(n_ions), &s, InternalState::Ground)?;
    let soft_curvature = |ratio: f64| -> Result<f64> {
        let (_, _, h) = total_potential(&lin, &probe(ratio), InternalState::Ground)?;
        let block = h.view((n_ions, n_ions), (n_ions, n_ions)).into_owned();
        Ok(min_eigen(&block).0)
    };
    let (mut lo, mut hi) = (1e-3, hi_ratio);
    if soft_curvature(hi)? <= 0.0 || soft_curvature(lo)? >= 0.0 {
        return Err(QuenchError::NonConvergence {
            iterations: 0,
            gradient_norm: f64::NAN,
        });
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if soft_curvature(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::IonSpecies;
    use approx::assert_abs_diff_eq;

    fn scen(n: usize, g: f64, d: f64) -> TrapScenario {
        TrapScenario::from_dimensionless(
            n,
            1e6,
            g,
            d,
            DipoleGeometry::TransverseOnly,
            IonSpecies::beryllium9(),
        )
        .unwrap()
    }

    #[test]
    fn two_ion_force_balance() {
        // x = 1/(4x²) ⇒ x = 2^{-2/3}
        let a = 2f64.powf(-2.0 / 3.0);
        let s = TrapScenario {
            n_ions: 2,
            ..scen(3, 0.02, 0.0)
        };
        let p = DVector::from_vec(vec![-a, a, 0.0, 0.0]);
        let (_, g, _) = total_potential(&p, &s, InternalState::Ground).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn three_ion_linear_force_balance() {
        let a = (5.0f64 / 4.0).cbrt();
        let s = scen(3, 0.02, 0.0);
        let p = DVector::from_vec(vec![-a, 0.0, a, 0.0, 0.0, 0.0]);
        let (_, g, _) = total_potential(&p, &s, InternalState::Ground).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn far_apart_ions_are_harmonic() {
        // one ion off-centre, partners far enough that Coulomb is negligible
        let s = scen(3, 0.02, 0.0);
        let rho2 = s.transverse_ratio().powi(2);
        let p = DVector::from_vec(vec![-1e7, 0.3, 1e7, 0.0, -0.2, 0.0]);
        let (e, g, h) = total_potential(&p, &s, InternalState::Ground).unwrap();
        let trap = 0.5 * (2e14 + 0.09 + rho2 * 0.04);
        assert!((e - trap).abs() < 1e-6 * trap);
        assert_abs_diff_eq!(g[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(g[4], -0.2 * rho2, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(4, 4)], rho2, epsilon = 1e-12);
    }

    #[test]
    fn coincident_ions_rejected() {
        let s = scen(3, 0.02, 0.0);
        let p = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            total_potential(&p, &s, InternalState::Ground),
            Err(QuenchError::CoincidentIons(0, 1))
        ));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let s = scen(3, -0.1, 0.025);
        let p = DVector::from_vec(vec![-1.1, 0.05, 1.0, -0.2, 0.3, -0.1]);
        for state in [InternalState::Ground, InternalState::Excited] {
            let (_, g, h) = total_potential(&p, &s, state).unwrap();
            let eps = 1e-6;
            for k in 0..6 {
                let mut pp = p.clone();
                pp[k] += eps;
                let mut pm = p.clone();
                pm[k] -= eps;
                let (ep, gp, _) = total_potential(&pp, &s, state).unwrap();
                let (em, gm, _) = total_potential(&pm, &s, state).unwrap();
                assert_abs_diff_eq!((ep - em) / (2.0 * eps), g[k], epsilon = 1e-8);
                for l in 0..6 {
                    assert_abs_diff_eq!((gp[l] - gm[l]) / (2.0 * eps), h[(l, k)], epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn linear_above_critical_point() {
        let s = scen(3, 0.02, 0.0);
        let st = find_equilibrium(&s, InternalState::Ground, None).unwrap();
        assert_eq!(st.structure_label, StructureLabel::Linear);
        assert!(st.transverse_amplitude() < 1e-12);
        let a = (5.0f64 / 4.0).cbrt();
        assert_abs_diff_eq!(st.x(0), -a, epsilon = 1e-10);
        assert_abs_diff_eq!(st.x(2), a, epsilon = 1e-10);
    }

    #[test]
    fn zigzag_below_critical_point() {
        let s = scen(3, -0.1, 0.0);
        let st = find_equilibrium(&s, InternalState::Ground, None).unwrap();
        assert_eq!(st.structure_label, StructureLabel::ZigzagUp);
        assert!(st.y(1) > 0.0);
        assert!(st.y(0) < 0.0 && st.y(2) < 0.0);
    }

    #[test]
    fn energy_history_is_non_increasing() {
        for g in [-0.1, -0.005, 0.02] {
            let st = find_equilibrium(&scen(3, g, 0.0), InternalState::Ground, None).unwrap();
            for w in st.convergence.energy_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
    }

    #[test]
    fn mode_sign_convention_and_soft_mode_tie_break() {
        // two degenerate modes: the tie on frequency keeps the lower index
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 4.0, 4.0, 9.0, 9.0]));
        let b = basis_from_hessian(h, InternalState::Ground).unwrap();
        for k in 0..6 {
            let col = b.mode_matrix.column(k);
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
        // no transverse zigzag content anywhere ⇒ lowest mode, flagged
        assert_eq!(b.soft_mode_index, 0);
        assert!(b.soft_mode_fallback);
    }

    #[test]
    fn negative_curvature_is_a_saddle() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        assert!(matches!(
            basis_from_hessian(h, InternalState::Ground),
            Err(QuenchError::SaddlePoint { .. })
        ));
    }

    #[test]
    fn validity_guard() {
        let s = scen(3, 0.0005, 0.0);
        let st = find_equilibrium(&s, InternalState::Ground, None).unwrap();
        let b = normal_modes(&st, &s).unwrap();
        assert!(matches!(check_validity(&b, false), Err(QuenchError::NearCritical { .. })));
        assert!(check_validity(&b, true).is_ok());
    }
}
