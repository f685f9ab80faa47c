//! Physical constants, ion species, trap scenarios and the dimensionless
//! quench parametrization (g, Δ).
//!
//! Internally everything runs in units where lengths are measured in
//! ℓ = (q²/(4πε₀ m ω_x²))^{1/3}, angular frequencies in units of the axial
//! angular frequency ω_x = 2π ν_x and time in 1/ω_x. In these units the
//! classical potential has no free constants and ħ becomes the small number
//! [`UnitSystem::hbar`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::crystal;
use crate::error::{QuenchError, Result};

/// CODATA 2018 values.
pub mod constants {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const K_B: f64 = 1.380_649e-23;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
}

use constants::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub label: String,
    /// kg
    pub mass: f64,
    /// Coulomb
    pub charge: f64,
    /// Wavelength of the driving transition, meters.
    pub transition_wavelength: f64,
}

impl IonSpecies {
    pub fn new(label: &str, mass: f64, charge: f64, transition_wavelength: f64) -> Result<Self> {
        let s = IonSpecies {
            label: label.to_string(),
            mass,
            charge,
            transition_wavelength,
        };
        s.validate()?;
        Ok(s)
    }

    /// ⁹Be⁺ driven on the 313 nm Raman transition.
    pub fn beryllium9() -> Self {
        IonSpecies {
            label: "Be9+".into(),
            mass: 9.012_183_06 * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            charge: ELEMENTARY_CHARGE,
            transition_wavelength: 313e-9,
        }
    }

    /// ⁴⁰Ca⁺ on the 397 nm line.
    pub fn calcium40() -> Self {
        IonSpecies {
            label: "Ca40+".into(),
            mass: 39.962_590_863 * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            charge: ELEMENTARY_CHARGE,
            transition_wavelength: 397e-9,
        }
    }

    pub fn by_label(label: &str) -> Option<Self> {
        match label {
            "Be9+" | "9Be+" | "Be" => Some(Self::beryllium9()),
            "Ca40+" | "40Ca+" | "Ca" => Some(Self::calcium40()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.mass) || !ok(self.charge) || !ok(self.transition_wavelength) {
            return Err(QuenchError::InvalidScenario(format!(
                "species {} needs positive mass, charge and wavelength",
                self.label
            )));
        }
        Ok(())
    }
}

/// Which coordinates of the central ion feel the state-dependent dipole
/// potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DipoleGeometry {
    #[default]
    TransverseOnly,
    IsotropicPlanar,
}

impl DipoleGeometry {
    pub fn as_str(self) -> &'static str {
        match self {
            DipoleGeometry::TransverseOnly => "transverse-only",
            DipoleGeometry::IsotropicPlanar => "isotropic-planar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "transverse-only" => Some(DipoleGeometry::TransverseOnly),
            "isotropic-planar" => Some(DipoleGeometry::IsotropicPlanar),
            _ => None,
        }
    }
}

/// Trap and quench parameters. Frequencies are ordinary frequencies ν = ω/2π
/// in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapScenario {
    pub n_ions: usize,
    pub nu_x: f64,
    pub nu_y: f64,
    pub nu_dip: f64,
    pub dipole_geometry: DipoleGeometry,
    pub species: IonSpecies,
}

impl TrapScenario {
    pub fn new(
        n_ions: usize,
        nu_x: f64,
        nu_y: f64,
        nu_dip: f64,
        dipole_geometry: DipoleGeometry,
        species: IonSpecies,
    ) -> Result<Self> {
        let s = TrapScenario {
            n_ions,
            nu_x,
            nu_y,
            nu_dip,
            dipole_geometry,
            species,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds a scenario from the dimensionless pair (g, Δ).
    pub fn from_dimensionless(
        n_ions: usize,
        nu_x: f64,
        g: f64,
        delta: f64,
        dipole_geometry: DipoleGeometry,
        species: IonSpecies,
    ) -> Result<Self> {
        validate_count(n_ions)?;
        if !(nu_x.is_finite() && nu_x > 0.0) {
            return Err(QuenchError::InvalidScenario("nu_x must be positive".into()));
        }
        if g <= -1.0 || !g.is_finite() {
            return Err(QuenchError::InvalidScenario(format!("g = {g} must exceed -1")));
        }
        if delta < 0.0 || !delta.is_finite() {
            return Err(QuenchError::InvalidScenario(format!("delta = {delta} must be >= 0")));
        }
        let nu_c = critical_frequency_for(n_ions, nu_x)?;
        let (nu_y, nu_dip) = from_dimensionless(nu_c, g, delta);
        Self::new(n_ions, nu_x, nu_y, nu_dip, dipole_geometry, species)
    }

    pub fn validate(&self) -> Result<()> {
        validate_count(self.n_ions)?;
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.nu_x) || !pos(self.nu_y) {
            return Err(QuenchError::InvalidScenario(
                "trap frequencies must be positive".into(),
            ));
        }
        if !(self.nu_dip.is_finite() && self.nu_dip >= 0.0) {
            return Err(QuenchError::InvalidScenario("nu_dip must be >= 0".into()));
        }
        self.species.validate()
    }

    /// Index of the central ion after sorting by axial coordinate.
    pub fn central_ion(&self) -> usize {
        self.n_ions / 2
    }

    /// ν_y/ν_x.
    pub fn transverse_ratio(&self) -> f64 {
        self.nu_y / self.nu_x
    }

    /// (ν_dip/ν_x)², the extra curvature the central ion sees in |e⟩.
    pub fn dipole_curvature(&self) -> f64 {
        (self.nu_dip / self.nu_x).powi(2)
    }

    pub fn units(&self) -> UnitSystem {
        UnitSystem::new(&self.species, self.nu_x)
    }
}

fn validate_count(n: usize) -> Result<()> {
    if n < 2 || n % 2 == 0 {
        return Err(QuenchError::InvalidScenario(format!(
            "n_ions = {n}: need an odd number of ions, at least 3"
        )));
    }
    Ok(())
}

/// ν_c = √(12/5) ν_x, valid for three ions only.
pub fn critical_frequency_analytic(n_ions: usize, nu_x: f64) -> Result<f64> {
    if n_ions != 3 {
        return Err(QuenchError::UnsupportedAnalyticN(n_ions));
    }
    Ok((12.0f64 / 5.0).sqrt() * nu_x)
}

/// Critical transverse frequency: analytic for N = 3, bisection on the
/// soft-mode curvature of the linear chain otherwise.
pub fn critical_frequency(scenario: &TrapScenario) -> Result<f64> {
    critical_frequency_for(scenario.n_ions, scenario.nu_x)
}

pub fn critical_frequency_for(n_ions: usize, nu_x: f64) -> Result<f64> {
    if n_ions == 3 {
        critical_frequency_analytic(n_ions, nu_x)
    } else {
        Ok(crystal::critical_ratio_numeric(n_ions)? * nu_x)
    }
}

/// (g, Δ) of a scenario.
pub fn to_dimensionless(scenario: &TrapScenario) -> Result<(f64, f64)> {
    let nu_c = critical_frequency(scenario)?;
    let nc2 = nu_c * nu_c;
    Ok((
        (scenario.nu_y * scenario.nu_y - nc2) / nc2,
        scenario.nu_dip * scenario.nu_dip / nc2,
    ))
}

/// Inverse of [`to_dimensionless`]: returns (ν_y, ν_dip).
pub fn from_dimensionless(nu_c: f64, g: f64, delta: f64) -> (f64, f64) {
    (nu_c * (1.0 + g).sqrt(), nu_c * delta.sqrt())
}

/// Scales linking the dimensionless problem to SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// ℓ in meters.
    pub length_scale: f64,
    /// Angular axial frequency, rad/s.
    pub frequency_scale: f64,
    /// m ω_x² ℓ², Joule.
    pub energy_scale: f64,
    /// ħ / (m ℓ² ω_x).
    pub hbar: f64,
}

impl UnitSystem {
    pub fn new(species: &IonSpecies, nu_x: f64) -> Self {
        let omega = 2.0 * PI * nu_x;
        let m = species.mass;
        let q = species.charge;
        let length = (q * q / (4.0 * PI * EPSILON_0 * m * omega * omega)).cbrt();
        UnitSystem {
            length_scale: length,
            frequency_scale: omega,
            energy_scale: m * omega * omega * length * length,
            hbar: HBAR / (m * length * length * omega),
        }
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length_scale
    }

    pub fn length_from_si(&self, x: f64) -> f64 {
        x / self.length_scale
    }

    /// Dimensionless angular frequency to rad/s.
    pub fn angular_to_si(&self, w: f64) -> f64 {
        w * self.frequency_scale
    }

    pub fn angular_from_si(&self, w: f64) -> f64 {
        w / self.frequency_scale
    }

    /// Dimensionless angular frequency to ordinary frequency in Hz.
    pub fn to_hz(&self, w: f64) -> f64 {
        w * self.frequency_scale / (2.0 * PI)
    }

    pub fn time_to_si(&self, t: f64) -> f64 {
        t / self.frequency_scale
    }

    pub fn time_from_si(&self, t: f64) -> f64 {
        t * self.frequency_scale
    }

    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy_scale
    }
}
