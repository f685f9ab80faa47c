mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use quench_core::crystal::{find_equilibrium, normal_modes, InternalState, StructureLabel};
use quench_core::params::{critical_frequency_analytic, from_dimensionless, to_dimensionless};
use quench_core::tables::reference;
use quench_core::visibility::thermal_occupation;

use common::{model, scenario, scenario_raw};

const H: f64 = 6.626_070_15e-34;
const KB: f64 = 1.380_649e-23;

fn ground(g: f64) -> (quench_core::crystal::CrystalStructure, Vec<f64>) {
    let s = scenario(g, 0.0);
    let eq = find_equilibrium(&s, InternalState::Ground, None).unwrap();
    let b = normal_modes(&eq, &s).unwrap();
    let u = s.units();
    (eq, b.frequencies.iter().map(|w| u.to_hz(*w) * 1e-6).collect())
}

/// ν for which the Bose-Einstein occupation at `t_uk` equals `n`.
fn invert_occupation(n: f64, t_uk: f64) -> f64 {
    KB * t_uk * 1e-6 * (1.0 + 1.0 / n).ln() / H
}

#[test]
fn critical_frequency_and_conversion_table() {
    let nu_c = critical_frequency_analytic(3, 1e6).unwrap();
    assert_relative_eq!(nu_c, 1.549e6, max_relative = 5e-4);
    let t = reference();
    for (g, nu_y) in &t.transverse {
        let (y, _) = from_dimensionless(nu_c, *g, 0.0);
        assert_relative_eq!(y * 1e-6, *nu_y, max_relative = 5e-3);
        let (g_back, _) = to_dimensionless(&scenario_raw(nu_y * 1e6, 0.0)).unwrap();
        assert!((g_back - g).abs() < 5e-3, "g {} from {} MHz gave {}", g, nu_y, g_back);
    }
    for (d, nu_dip) in &t.dipole {
        let (_, dip) = from_dimensionless(nu_c, 0.0, *d);
        assert_relative_eq!(dip * 1e-3, *nu_dip, max_relative = 5e-3);
    }
}

#[test]
fn linear_block_frequencies() {
    let (_, f) = ground(0.02);
    for (c, r) in f.iter().zip(reference().modes_for(0.02)) {
        assert_relative_eq!(*c, r.frequency_mhz, max_relative = 1e-3);
    }
}

#[test]
fn deep_zigzag_block_frequencies() {
    let (_, f) = ground(-0.1);
    for (c, r) in f.iter().zip(reference().modes_for(-0.1)) {
        assert_relative_eq!(*c, r.frequency_mhz, max_relative = 1e-3);
    }
}

#[test]
fn shallow_zigzag_block_frequencies() {
    let (_, f) = ground(-0.005);
    let rows = reference().modes_for(-0.005);
    for (c, r) in f.iter().zip(&rows).skip(1) {
        assert_relative_eq!(*c, r.frequency_mhz, max_relative = 1e-3);
    }
    // The printed soft-mode frequency does not fit its own occupations; those
    // occupations do fit the computed frequency.
    let soft = &rows[0];
    assert!((f[0] - soft.frequency_mhz).abs() / soft.frequency_mhz > 1e-2);
    for (temp, n) in reference().temperatures_uk.iter().zip(&soft.occupations) {
        let nu = invert_occupation(*n, *temp) * 1e-6;
        assert_relative_eq!(nu, f[0], max_relative = 2e-3);
    }
}

#[test]
fn occupation_cells() {
    let t = reference();
    for g in t.g_values() {
        let (_, f) = ground(g);
        for (row, nu) in t.modes_for(g).iter().zip(&f) {
            for (c, temp) in t.temperatures_uk.iter().enumerate() {
                let n = thermal_occupation(2.0 * PI * nu * 1e6, temp * 1e-6);
                if row.flagged.contains(&c) {
                    assert!((n - 9.02).abs() < 0.01, "Bose-Einstein gives {}", n);
                    assert!((n - row.occupations[c]).abs() > 8.0);
                    eprintln!(
                        "note: published n = {} at {} uK for {} MHz; Bose-Einstein gives {:.4}",
                        row.occupations[c], temp, row.frequency_mhz, n
                    );
                } else {
                    assert!((n - row.occupations[c]).abs() < 1e-2, "g={} {} MHz {} uK: {}", g, nu, temp, n);
                }
            }
        }
    }
}

#[test]
fn structure_labels() {
    let lin = model(0.02, 0.025);
    assert_eq!(lin.structure_g.structure_label, StructureLabel::Linear);
    assert_eq!(lin.structure_e.structure_label, StructureLabel::Linear);
    let cross = model(-0.005, 0.025);
    assert!(cross.structure_g.structure_label.is_zigzag());
    assert_eq!(cross.structure_e.structure_label, StructureLabel::Linear);
    let zz = model(-0.1, 0.025);
    assert!(zz.structure_g.structure_label.is_zigzag());
    assert!(zz.structure_e.structure_label.is_zigzag());
}

/// Energy of the symmetric three-ion zigzag (outer ions at (±a, −b/2),
/// central ion at (0, b)) in units where the axial curvature is one.
fn zigzag_energy(a: f64, b: f64, rho2: f64) -> f64 {
    let trap = 0.5 * (2.0 * a * a + rho2 * (b * b + 2.0 * (b / 2.0).powi(2)));
    let side = (a * a + (1.5 * b).powi(2)).sqrt();
    trap + 2.0 / side + 1.0 / (2.0 * a)
}

/// Two-parameter minimization by Newton's method with central differences.
fn zigzag_oracle(rho2: f64) -> (f64, f64) {
    let (mut a, mut b) = (1.0, 0.5);
    let h = 1e-5;
    for _ in 0..100 {
        let e = |a: f64, b: f64| zigzag_energy(a, b, rho2);
        let ga = (e(a + h, b) - e(a - h, b)) / (2.0 * h);
        let gb = (e(a, b + h) - e(a, b - h)) / (2.0 * h);
        let haa = (e(a + h, b) - 2.0 * e(a, b) + e(a - h, b)) / (h * h);
        let hbb = (e(a, b + h) - 2.0 * e(a, b) + e(a, b - h)) / (h * h);
        let hab = (e(a + h, b + h) - e(a + h, b - h) - e(a - h, b + h) + e(a - h, b - h)) / (4.0 * h * h);
        let det = haa * hbb - hab * hab;
        a -= (hbb * ga - hab * gb) / det;
        b -= (haa * gb - hab * ga) / det;
    }
    (a, b.abs())
}

#[test]
fn zigzag_amplitude_matches_reduced_minimization() {
    let s = scenario(-0.1, 0.0);
    let eq = find_equilibrium(&s, InternalState::Ground, None).unwrap();
    let rho2 = s.transverse_ratio().powi(2);
    let (a, b) = zigzag_oracle(rho2);
    let mut xs: Vec<f64> = (0..3).map(|i| eq.x(i)).collect();
    xs.sort_by(f64::total_cmp);
    assert!((xs[2] - a).abs() < 1e-6, "{} vs {}", xs[2], a);
    let central = (0..3).min_by(|i, j| eq.x(*i).abs().total_cmp(&eq.x(*j).abs())).unwrap();
    assert!((eq.y(central).abs() - b).abs() < 1e-6, "{} vs {}", eq.y(central), b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Linear three-ion chain: axial 1, √3, √(29/5); transverse √(ρ²),
    /// √(ρ² − 1), √(ρ² − 12/5).
    #[test]
    fn linear_chain_spectrum(g in 0.01f64..1.0) {
        let s = scenario(g, 0.0);
        let eq = find_equilibrium(&s, InternalState::Ground, None).unwrap();
        prop_assert_eq!(eq.structure_label, StructureLabel::Linear);
        let b = normal_modes(&eq, &s).unwrap();
        let rho2 = s.transverse_ratio().powi(2);
        let mut expect = vec![1.0, 3f64.sqrt(), 5.8f64.sqrt(), rho2.sqrt(), (rho2 - 1.0).sqrt(), (rho2 - 2.4).sqrt()];
        expect.sort_by(f64::total_cmp);
        for (c, e) in b.frequencies.iter().zip(&expect) {
            prop_assert!((c - e).abs() < 1e-8, "{} vs {}", c, e);
        }
        let outer = (1.25f64).cbrt();
        let mut xs: Vec<f64> = (0..3).map(|i| eq.x(i)).collect();
        xs.sort_by(f64::total_cmp);
        prop_assert!((xs[2] - outer).abs() < 1e-9 && (xs[0] + outer).abs() < 1e-9);
    }
}
