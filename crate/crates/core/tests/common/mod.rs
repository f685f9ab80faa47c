#![allow(dead_code)]

use quench_core::params::{DipoleGeometry, IonSpecies, TrapScenario};
use quench_core::structure_map::RecoilSpec;
use quench_core::visibility::{model_trace, ThermalSource, TimeGrid, VisibilityTrace};
use quench_core::QuenchModel;

/// Be⁺, three ions, ν_x = 1 MHz, transverse-only dipole.
pub fn scenario(g: f64, delta: f64) -> TrapScenario {
    TrapScenario::from_dimensionless(3, 1e6, g, delta, DipoleGeometry::TransverseOnly, IonSpecies::beryllium9())
        .unwrap()
}

pub fn model(g: f64, delta: f64) -> QuenchModel {
    QuenchModel::build(&scenario(g, delta), false).unwrap()
}

/// Trace on the automatic grid up to `t_max_us`.
pub fn trace(model: &QuenchModel, thermal: ThermalSource, t_max_us: f64) -> VisibilityTrace {
    let grid = TimeGrid::auto(model.units.time_from_si(t_max_us * 1e-6), model.max_frequency()).unwrap();
    model_trace(model, &thermal, &RecoilSpec::none(1), &grid).unwrap()
}

pub fn at_temperature(t_uk: f64) -> ThermalSource {
    ThermalSource::GlobalTemperature(t_uk * 1e-6)
}

/// Root-mean-square difference over the samples with t ≤ `until_s`.
pub fn rms_distance(a: &VisibilityTrace, b: &VisibilityTrace, until_s: f64) -> f64 {
    let n = a.t_seconds.iter().take_while(|t| **t <= until_s).count();
    let s: f64 = (0..n).map(|i| (a.visibility[i] - b.visibility[i]).powi(2)).sum();
    (s / n as f64).sqrt()
}

/// Interior local maxima above `threshold` as (index, value).
pub fn local_maxima(v: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > threshold)
        .map(|i| (i, v[i]))
        .collect()
}

/// Be⁺, three ions, ν_x = 1 MHz, from trap frequencies in Hz.
pub fn scenario_raw(nu_y: f64, nu_dip: f64) -> TrapScenario {
    TrapScenario::new(3, 1e6, nu_y, nu_dip, DipoleGeometry::TransverseOnly, IonSpecies::beryllium9()).unwrap()
}
