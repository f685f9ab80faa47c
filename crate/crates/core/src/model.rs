//! Everything derived from a scenario before any time evolution: both
//! structures, both mode bases and the map between them.

use nalgebra::DVector;
use serde::Serialize;

use crate::crystal::{
    check_validity, find_equilibrium, normal_modes, CrystalStructure, InternalState, ModeBasis,
};
use crate::error::{QuenchError, Result};
use crate::params::{TrapScenario, UnitSystem};
use crate::structure_map::{build_map, recoil_displacement, BogoliubovMap, CVector, Pulse, RecoilSpec};
use crate::visibility::{ThermalSource, ThermalSpec};

#[derive(Debug, Clone, Serialize)]
pub struct QuenchModel {
    pub scenario: TrapScenario,
    pub units: UnitSystem,
    pub structure_g: CrystalStructure,
    pub structure_e: CrystalStructure,
    pub basis_g: ModeBasis,
    pub basis_e: ModeBasis,
    pub map: BogoliubovMap,
}

impl QuenchModel {
    pub fn build(scenario: &TrapScenario, allow_near_critical: bool) -> Result<Self> {
        scenario.validate()?;
        let structure_g = find_equilibrium(scenario, InternalState::Ground, None)?;
        let structure_e = find_equilibrium(scenario, InternalState::Excited, Some(&structure_g))?;
        let basis_g = normal_modes(&structure_g, scenario)?;
        let basis_e = normal_modes(&structure_e, scenario)?;
        check_validity(&basis_g, allow_near_critical)?;
        check_validity(&basis_e, allow_near_critical)?;
        let units = scenario.units();
        let map = build_map(&basis_g, &basis_e, &structure_g, &structure_e, units.hbar)?;
        Ok(QuenchModel {
            scenario: scenario.clone(),
            units,
            structure_g,
            structure_e,
            basis_g,
            basis_e,
            map,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Dimensionless |ω_soft^e − ω_soft^g|.
    pub fn beat_frequency(&self) -> f64 {
        crate::spectrum::beat_frequency(&self.basis_g, &self.basis_e)
    }

    pub fn max_frequency(&self) -> f64 {
        self.basis_g.frequencies.max().max(self.basis_e.frequencies.max())
    }

    /// Recoil displacements (κ, κ′) of the two pulses in the excited basis.
    pub fn recoil(&self, spec: &RecoilSpec) -> Result<(CVector, CVector)> {
        let h = self.units.hbar;
        let l = self.units.length_scale;
        Ok((
            recoil_displacement(spec, &self.basis_e, Pulse::First, h, l)?,
            recoil_displacement(spec, &self.basis_e, Pulse::Second, h, l)?,
        ))
    }

    pub fn thermal(&self, source: &ThermalSource) -> Result<ThermalSpec> {
        ThermalSpec::resolve(source, &self.basis_g, &self.units)
    }

    /// Ground-basis occupations at a global temperature (Kelvin).
    pub fn occupations_at(&self, temperature: f64) -> Result<DVector<f64>> {
        if !(temperature >= 0.0) {
            return Err(QuenchError::InvalidScenario("temperature must be >= 0".into()));
        }
        Ok(self.thermal(&ThermalSource::GlobalTemperature(temperature))?.occupations)
    }
}
