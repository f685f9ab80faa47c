//! Thermal overlap 𝒪(t), visibility traces and the Ramsey probability.

mod algebra;
mod kernel;

pub use algebra::{to_real_imag, Affine, CMatrix, Quadratic};
pub use kernel::{
    assemble_kernel, evaluate, principal_det_root, KernelParts, OverlapSample, CONDITION_LIMIT,
    EPS_COLD,
};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::FRAC_PI_2;

use crate::crystal::ModeBasis;
use crate::error::{QuenchError, Result};
use crate::model::QuenchModel;
use crate::params::{constants, TrapScenario, UnitSystem};
use crate::structure_map::{BogoliubovMap, CVector, RecoilSpec};

/// Largest admissible time step times the largest mode frequency.
pub const GRID_DENSITY: f64 = 0.05;

/// Bose–Einstein occupation for angular frequency `omega` (rad/s) at
/// temperature `temperature` (K).
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = constants::HBAR * omega / (constants::K_B * temperature);
    1.0 / x.exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThermalSource {
    /// One temperature (K) for every mode.
    GlobalTemperature(f64),
    /// One temperature (K) per ground mode.
    ModeTemperatures(Vec<f64>),
    /// Occupations given directly.
    PerModeOverride(Vec<f64>),
}

/// Mean occupations of the ground modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub occupations: DVector<f64>,
    pub source: ThermalSource,
}

impl ThermalSpec {
    pub fn resolve(source: &ThermalSource, basis_g: &ModeBasis, units: &UnitSystem) -> Result<Self> {
        let dim = basis_g.dim();
        let omega_si = |j: usize| units.angular_to_si(basis_g.frequencies[j]);
        let occ = match source {
            ThermalSource::GlobalTemperature(t) => {
                check_temperature(*t)?;
                DVector::from_iterator(dim, (0..dim).map(|j| thermal_occupation(omega_si(j), *t)))
            }
            ThermalSource::ModeTemperatures(ts) => {
                if ts.len() != dim {
                    return Err(QuenchError::Dimension(format!(
                        "{} mode temperatures for {} modes",
                        ts.len(),
                        dim
                    )));
                }
                for t in ts {
                    check_temperature(*t)?;
                }
                DVector::from_iterator(dim, (0..dim).map(|j| thermal_occupation(omega_si(j), ts[j])))
            }
            ThermalSource::PerModeOverride(n) => {
                if n.len() != dim {
                    return Err(QuenchError::Dimension(format!(
                        "{} occupations for {} modes",
                        n.len(),
                        dim
                    )));
                }
                return Self::per_mode(n.clone());
            }
        };
        Ok(ThermalSpec {
            occupations: occ,
            source: source.clone(),
        })
    }

    pub fn per_mode(occupations: Vec<f64>) -> Result<Self> {
        if occupations.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
            return Err(QuenchError::InvalidScenario(
                "occupations must be finite and non-negative".into(),
            ));
        }
        Ok(ThermalSpec {
            occupations: DVector::from_vec(occupations.clone()),
            source: ThermalSource::PerModeOverride(occupations),
        })
    }

    pub fn vacuum(dim: usize) -> Self {
        ThermalSpec {
            occupations: DVector::zeros(dim),
            source: ThermalSource::PerModeOverride(vec![0.0; dim]),
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(QuenchError::InvalidScenario(format!("invalid temperature {}", t)))
    }
}

/// Closed-form overlap at one (dimensionless) time.
pub fn overlap_at(
    map: &BogoliubovMap,
    kappa: &CVector,
    kappa_prime: &CVector,
    thermal: &ThermalSpec,
    t: f64,
) -> Result<Complex64> {
    let parts = assemble_kernel(map, kappa, kappa_prime, &thermal.occupations, t)?;
    Ok(evaluate(&parts)?.value)
}

/// Overlap for the vibrational ground state of the ground structure.
pub fn overlap_zero_t(
    map: &BogoliubovMap,
    kappa: &CVector,
    kappa_prime: &CVector,
    t: f64,
) -> Result<Complex64> {
    overlap_at(map, kappa, kappa_prime, &ThermalSpec::vacuum(map.dim()), t)
}

/// P_g = ½(1 + Re[e^{iφ} 𝒪]).
pub fn ramsey_probability(overlap: Complex64, phi: f64) -> f64 {
    let p = 0.5 * (1.0 + (Complex64::from_polar(1.0, phi) * overlap).re);
    p.clamp(0.0, 1.0)
}

/// Sorted sample times in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t: Vec<f64>,
}

impl TimeGrid {
    /// `n_samples` equally spaced points on [0, t_max].
    pub fn uniform(t_max: f64, n_samples: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(QuenchError::BadGrid(format!("t_max must be positive, got {}", t_max)));
        }
        if n_samples < 2 {
            return Err(QuenchError::BadGrid("need at least two samples".into()));
        }
        let dt = t_max / (n_samples - 1) as f64;
        Ok(TimeGrid {
            t: (0..n_samples).map(|i| i as f64 * dt).collect(),
        })
    }

    /// Smallest sample count on [0, t_max] that meets the density rule.
    pub fn min_samples(t_max: f64, max_omega: f64) -> usize {
        ((t_max * max_omega / GRID_DENSITY).ceil() as usize + 1).max(2)
    }

    pub fn auto(t_max: f64, max_omega: f64) -> Result<Self> {
        Self::uniform(t_max, Self::min_samples(t_max, max_omega))
    }

    pub fn from_times(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(QuenchError::BadGrid("empty grid".into()));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(QuenchError::BadGrid("non-finite time".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QuenchError::BadGrid("times must be strictly increasing".into()));
        }
        Ok(TimeGrid { t })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn max_spacing(&self) -> f64 {
        self.t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn check_density(&self, max_omega: f64) -> Result<()> {
        let limit = GRID_DENSITY / max_omega;
        let dt = self.max_spacing();
        if dt > limit * (1.0 + 1e-9) {
            return Err(QuenchError::BadGrid(format!(
                "spacing {:.4e} exceeds {:.4e} = {}/max frequency",
                dt, limit, GRID_DENSITY
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub max_omega_condition: f64,
    pub max_x_condition: f64,
    /// Samples where the determinant root had to be negated to stay
    /// continuous.
    pub branch_flips: usize,
    pub max_branch_step: f64,
    pub max_visibility: f64,
    pub min_visibility: f64,
    pub hot_modes: usize,
}

#[derive(Debug, Clone)]
pub struct VisibilityTrace {
    pub t_seconds: Vec<f64>,
    pub t_dimensionless: Vec<f64>,
    pub overlap: Vec<Complex64>,
    pub visibility: Vec<f64>,
    pub fingerprint: String,
    pub diagnostics: TraceDiagnostics,
}

impl VisibilityTrace {
    pub fn len(&self) -> usize {
        self.overlap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overlap.is_empty()
    }

    pub fn ramsey_probability(&self, phi: f64) -> Vec<f64> {
        self.overlap.iter().map(|o| ramsey_probability(*o, phi)).collect()
    }
}

fn hash_inputs(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Overlap on a grid, with the determinant branch followed continuously from
/// t = 0. `seconds_per_unit` converts grid times to seconds.
pub fn trace_from_map(
    map: &BogoliubovMap,
    kappa: &CVector,
    kappa_prime: &CVector,
    thermal: &ThermalSpec,
    grid: &TimeGrid,
    seconds_per_unit: f64,
) -> Result<VisibilityTrace> {
    let max_omega = map.omega_g.max().max(map.omega_e.max());
    grid.check_density(max_omega)?;
    if grid.t[0] < 0.0 {
        return Err(QuenchError::BadGrid("negative times".into()));
    }
    let samples: Vec<OverlapSample> = grid
        .t
        .par_iter()
        .map(|&t| evaluate(&assemble_kernel(map, kappa, kappa_prime, &thermal.occupations, t)?))
        .collect::<Result<_>>()?;

    let mut diag = TraceDiagnostics {
        min_visibility: f64::INFINITY,
        hot_modes: thermal.occupations.iter().filter(|n| **n > EPS_COLD).count(),
        ..Default::default()
    };
    // Reference for the branch: the principal root at t = 0, which is the
    // correct one there.
    let reference = evaluate(&assemble_kernel(map, kappa, kappa_prime, &thermal.occupations, 0.0)?)?;
    let mut prev = reference.det_root;
    let mut overlap = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let step = (s.det_root / prev).arg().abs();
        let (value, root) = if step <= FRAC_PI_2 {
            (s.value, s.det_root)
        } else if (-s.det_root / prev).arg().abs() <= FRAC_PI_2 {
            diag.branch_flips += 1;
            (-s.value, -s.det_root)
        } else {
            return Err(QuenchError::BranchTracking { index: i, jump: step });
        };
        diag.max_branch_step = diag.max_branch_step.max((root / prev).arg().abs());
        diag.max_omega_condition = diag.max_omega_condition.max(s.omega_condition);
        diag.max_x_condition = diag.max_x_condition.max(s.x_condition);
        prev = root;
        overlap.push(value);
    }
    let visibility: Vec<f64> = overlap.iter().map(|o| o.norm()).collect();
    for v in &visibility {
        diag.max_visibility = diag.max_visibility.max(*v);
        diag.min_visibility = diag.min_visibility.min(*v);
    }
    if diag.max_visibility > 1.0 + 1e-9 {
        log::warn!("visibility exceeds one: {:.3e}", diag.max_visibility - 1.0);
    }
    let fingerprint = hash_inputs(&[
        format!("{:?}", map.omega_g.as_slice()),
        format!("{:?}", map.omega_e.as_slice()),
        format!("{:?}", map.u.as_slice()),
        format!("{:?}", map.v.as_slice()),
        format!("{:?}", map.beta_g.as_slice()),
        format!("{:?}", kappa.as_slice()),
        format!("{:?}", kappa_prime.as_slice()),
        format!("{:?}", thermal.occupations.as_slice()),
        format!("{:?}", grid.t),
        format!("{:?}", seconds_per_unit),
    ]);
    Ok(VisibilityTrace {
        t_seconds: grid.t.iter().map(|t| t * seconds_per_unit).collect(),
        t_dimensionless: grid.t.clone(),
        overlap,
        visibility,
        fingerprint,
        diagnostics: diag,
    })
}

/// Trace for an already built model.
pub fn model_trace(
    model: &QuenchModel,
    thermal: &ThermalSource,
    recoil: &RecoilSpec,
    grid: &TimeGrid,
) -> Result<VisibilityTrace> {
    let spec = model.thermal(thermal)?;
    let (k1, k2) = model.recoil(recoil)?;
    let mut trace = trace_from_map(&model.map, &k1, &k2, &spec, grid, model.units.time_to_si(1.0))?;
    trace.fingerprint = hash_inputs(&[
        format!("{:?}", model.scenario),
        format!("{:?}", thermal),
        format!("{:?}", recoil),
        trace.fingerprint.clone(),
    ]);
    Ok(trace)
}

/// Full pipeline: structures, modes, map, then the overlap on the grid.
pub fn visibility_trace(
    scenario: &TrapScenario,
    thermal: &ThermalSource,
    recoil: &RecoilSpec,
    grid: &TimeGrid,
    allow_near_critical: bool,
) -> Result<VisibilityTrace> {
    let model = QuenchModel::build(scenario, allow_near_critical)?;
    model_trace(&model, thermal, recoil, grid)
}
