//! The subcommands. Each one derives its outputs in memory; writing and
//! verification are left to [`crate::output`].

use std::fmt::Write as _;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde_json::{json, Value};

use quench_core::crystal::{find_equilibrium, normal_modes, zigzag_correlation, InternalState};
use quench_core::params::{to_dimensionless, DipoleGeometry, IonSpecies, TrapScenario};
use quench_core::spectrum::{find_peaks, log_spectrum, nearest_named};
use quench_core::structure_map::RecoilGeometry;
use quench_core::synthetic::{run_case, standard_suite, EQUIVALENCE_TOL};
use quench_core::tables::reference;
use quench_core::visibility::{
    model_trace, overlap_at, thermal_occupation, ThermalSource, ThermalSpec, TimeGrid, VisibilityTrace,
};
use quench_core::{ErrorClass, QuenchModel};

use crate::config::{ScenarioConfig, ThermalConfig};
use crate::error::{CliError, CliResult};
use crate::output::{f, CommandOutput, Csv, OutputFile};

pub const TRACE_HEADER: [&str; 6] = [
    "t_seconds",
    "t_dimensionless",
    "re_overlap",
    "im_overlap",
    "visibility",
    "ramsey_probability",
];
pub const SPECTRUM_HEADER: [&str; 4] = ["omega_rad_per_s", "re_S", "im_S", "abs_S"];
pub const PEAK_HEADER: [&str; 6] = [
    "omega_rad_per_s",
    "omega_dimensionless",
    "abs_S",
    "prominence",
    "nearest_named",
    "distance_bins",
];

/// Relative tolerance on published frequencies and absolute tolerance on
/// published occupations.
pub const TABLE_FREQ_TOL: f64 = 1e-3;
pub const TABLE_OCC_TOL: f64 = 1e-2;

fn model_record(model: &QuenchModel) -> Value {
    let (g, delta) = to_dimensionless(&model.scenario).unwrap_or((f64::NAN, f64::NAN));
    let (r1, r2) = model.map.beta_relation_residuals();
    json!({
        "g": g,
        "delta": delta,
        "model": model,
        "summary": {
            "structure_ground": model.structure_g.structure_label.as_str(),
            "structure_excited": model.structure_e.structure_label.as_str(),
            "soft_frequency_ground": model.basis_g.soft_frequency(),
            "soft_frequency_excited": model.basis_e.soft_frequency(),
            "beat_frequency": model.beat_frequency(),
            "z": model.map.z,
            "u_condition": model.map.u_condition,
            "symplectic_defect": model.map.symplectic_defect(),
            "uv_asymmetry": model.map.uv_asymmetry(),
            "beta_relation_residuals": [r1, r2],
        }
    })
}

/// One run of the visibility pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPoint {
    /// (parameter, value) pairs naming the output file.
    pub labels: Vec<(String, String)>,
    pub g: Option<f64>,
    pub delta: Option<f64>,
    pub recoil: Option<RecoilGeometry>,
    pub thermal: ThermalSource,
}

impl RunPoint {
    pub fn stem(&self, name: &str) -> String {
        let mut s = name.to_string();
        for (k, v) in &self.labels {
            let _ = write!(s, "__{}={}", k, v);
        }
        s
    }
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| f(*x)).collect::<Vec<_>>().join("_")
}

fn thermal_points(cfg: &ScenarioConfig) -> Vec<(String, String, ThermalSource)> {
    let sw = &cfg.sweep;
    let micro = |v: &[f64]| v.iter().map(|t| t * 1e-6).collect::<Vec<_>>();
    if !sw.temperature_uk.is_empty() {
        return sw
            .temperature_uk
            .iter()
            .map(|t| ("temperature_uK".into(), f(*t), ThermalSource::GlobalTemperature(t * 1e-6)))
            .collect();
    }
    if !sw.per_mode_occupations.is_empty() {
        return sw
            .per_mode_occupations
            .iter()
            .map(|n| ("per_mode_occupations".into(), joined(n), ThermalSource::PerModeOverride(n.clone())))
            .collect();
    }
    if !sw.mode_temperatures_uk.is_empty() {
        return sw
            .mode_temperatures_uk
            .iter()
            .map(|t| ("mode_temperatures_uK".into(), joined(t), ThermalSource::ModeTemperatures(micro(t))))
            .collect();
    }
    base_thermal_points(cfg)
}

fn base_thermal_points(cfg: &ScenarioConfig) -> Vec<(String, String, ThermalSource)> {
    match &cfg.thermal {
        ThermalConfig::Temperatures(ts) => ts
            .iter()
            .map(|t| ("temperature_uK".into(), f(*t), ThermalSource::GlobalTemperature(t * 1e-6)))
            .collect(),
        ThermalConfig::PerModeOccupations(n) => vec![(
            "per_mode_occupations".into(),
            joined(n),
            ThermalSource::PerModeOverride(n.clone()),
        )],
        ThermalConfig::ModeTemperatures(t) => vec![(
            "mode_temperatures_uK".into(),
            joined(t),
            ThermalSource::ModeTemperatures(t.iter().map(|x| x * 1e-6).collect()),
        )],
    }
}

/// Points of the configured scenario, one per thermal entry; sweep axes are
/// ignored.
pub fn base_points(cfg: &ScenarioConfig) -> Vec<RunPoint> {
    base_thermal_points(cfg)
        .into_iter()
        .map(|(k, v, th)| RunPoint {
            labels: vec![(k, v)],
            g: None,
            delta: None,
            recoil: None,
            thermal: th,
        })
        .collect()
}

/// Cartesian product of the sweep axes, in the order g, Δ, recoil geometry,
/// thermal state. Axes that are not listed take the scenario's value and do
/// not appear in file names, except the thermal state, which always does.
pub fn sweep_points(cfg: &ScenarioConfig) -> Vec<RunPoint> {
    let sw = &cfg.sweep;
    let gs: Vec<Option<f64>> = if sw.g.is_empty() { vec![None] } else { sw.g.iter().map(|x| Some(*x)).collect() };
    let ds: Vec<Option<f64>> = if sw.delta.is_empty() {
        vec![None]
    } else {
        sw.delta.iter().map(|x| Some(*x)).collect()
    };
    let rs: Vec<Option<RecoilGeometry>> = if sw.recoil_geometry.is_empty() {
        vec![None]
    } else {
        sw.recoil_geometry.iter().map(|x| Some(*x)).collect()
    };
    let ths = thermal_points(cfg);
    let mut out = Vec::new();
    for g in &gs {
        for d in &ds {
            for r in &rs {
                for (k, v, th) in &ths {
                    let mut labels = Vec::new();
                    if let Some(g) = g {
                        labels.push(("g".to_string(), f(*g)));
                    }
                    if let Some(d) = d {
                        labels.push(("delta".to_string(), f(*d)));
                    }
                    if let Some(r) = r {
                        labels.push(("recoil_geometry".to_string(), r.as_str().to_string()));
                    }
                    labels.push((k.clone(), v.clone()));
                    out.push(RunPoint {
                        labels,
                        g: *g,
                        delta: *d,
                        recoil: *r,
                        thermal: th.clone(),
                    });
                }
            }
        }
    }
    out
}

pub fn time_grid(cfg: &ScenarioConfig, model: &QuenchModel) -> CliResult<TimeGrid> {
    let t_max = model.units.time_from_si(cfg.t_max_us * 1e-6);
    let grid = match cfg.n_samples {
        None => TimeGrid::auto(t_max, model.max_frequency())?,
        Some(n) => TimeGrid::uniform(t_max, n)?,
    };
    grid.check_density(model.max_frequency())?;
    Ok(grid)
}

pub struct PointResult {
    pub model: QuenchModel,
    pub trace: VisibilityTrace,
    pub occupations: Vec<f64>,
}

pub fn run_point(cfg: &ScenarioConfig, p: &RunPoint, allow_near_critical: bool) -> CliResult<PointResult> {
    let scenario = cfg.scenario_with(p.g, p.delta)?;
    let model = QuenchModel::build(&scenario, allow_near_critical)?;
    let grid = time_grid(cfg, &model)?;
    let recoil = cfg.recoil_spec(p.recoil)?;
    let occupations = model.thermal(&p.thermal)?.occupations.as_slice().to_vec();
    let trace = model_trace(&model, &p.thermal, &recoil, &grid)?;
    Ok(PointResult {
        model,
        trace,
        occupations,
    })
}

pub fn trace_csv(trace: &VisibilityTrace, phase: f64, fingerprint: &str) -> Vec<u8> {
    let mut csv = Csv::new("visibility", fingerprint, &TRACE_HEADER);
    let p = trace.ramsey_probability(phase);
    for i in 0..trace.len() {
        csv.row(&[
            f(trace.t_seconds[i]),
            f(trace.t_dimensionless[i]),
            f(trace.overlap[i].re),
            f(trace.overlap[i].im),
            f(trace.visibility[i]),
            f(p[i]),
        ]);
    }
    csv.into_bytes()
}

fn point_record(cfg: &ScenarioConfig, p: &RunPoint, r: &PointResult, stem: &str) -> CliResult<Value> {
    let recoil = cfg.recoil_spec(p.recoil)?;
    let (k1, k2) = r.model.recoil(&recoil)?;
    let t = &r.trace.t_dimensionless;
    Ok(json!({
        "stem": stem,
        "labels": p.labels,
        "thermal_source": p.thermal,
        "occupations": r.occupations,
        "recoil": recoil,
        "kappa": k1.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
        "kappa_prime": k2.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
        "grid": {
            "n_samples": t.len(),
            "t_max_dimensionless": t.last().copied().unwrap_or(0.0),
            "t_max_seconds": r.trace.t_seconds.last().copied().unwrap_or(0.0),
            "max_spacing": TimeGrid { t: t.clone() }.max_spacing(),
        },
        "trace_fingerprint": r.trace.fingerprint,
        "diagnostics": r.trace.diagnostics,
        "model": model_record(&r.model),
    }))
}

fn run_all(cfg: &ScenarioConfig, points: &[RunPoint], allow: bool) -> Vec<CliResult<PointResult>> {
    points.par_iter().map(|p| run_point(cfg, p, allow)).collect()
}

pub fn cmd_equilibrium(cfg: &ScenarioConfig, allow: bool) -> CliResult<CommandOutput> {
    let fp = cfg.fingerprint();
    let scenario = cfg.scenario()?;
    let model = QuenchModel::build(&scenario, allow)?;
    let mut csv = Csv::new(
        "equilibrium",
        &fp,
        &[
            "state",
            "structure",
            "ion",
            "x_dimensionless",
            "y_dimensionless",
            "x_m",
            "y_m",
            "energy_dimensionless",
            "energy_j",
        ],
    );
    let mut summary = String::new();
    for s in [&model.structure_g, &model.structure_e] {
        let _ = writeln!(
            summary,
            "{} state: {} (energy {} = {} J, |y| max {})",
            s.internal_state.as_str(),
            s.structure_label.as_str(),
            f(s.classical_energy),
            f(model.units.energy_to_si(s.classical_energy)),
            f(s.transverse_amplitude()),
        );
        for i in 0..s.n_ions() {
            let (x, y) = (s.x(i), s.y(i));
            let (xs, ys) = (model.units.length_to_si(x), model.units.length_to_si(y));
            let _ = writeln!(summary, "  ion {}: x = {} ({} m), y = {} ({} m)", i, f(x), f(xs), f(y), f(ys));
            csv.row(&[
                s.internal_state.as_str().into(),
                s.structure_label.as_str().into(),
                i.to_string(),
                f(x),
                f(y),
                f(xs),
                f(ys),
                f(s.classical_energy),
                f(model.units.energy_to_si(s.classical_energy)),
            ]);
        }
    }
    Ok(CommandOutput {
        command: "equilibrium",
        stem: cfg.name.clone(),
        files: vec![OutputFile {
            name: format!("{}__equilibrium.csv", cfg.name),
            bytes: csv.into_bytes(),
        }],
        record: json!({ "model": model_record(&model) }),
        summary,
        failure: None,
    })
}

pub fn cmd_modes(cfg: &ScenarioConfig, allow: bool) -> CliResult<CommandOutput> {
    let fp = cfg.fingerprint();
    let model = QuenchModel::build(&cfg.scenario()?, allow)?;
    let sources = base_thermal_points(cfg);
    let mut header: Vec<String> = [
        "state",
        "mode",
        "omega_dimensionless",
        "frequency_2pi_mhz",
        "soft_mode",
        "zigzag_correlation",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut occupations = Vec::new();
    for (k, v, src) in &sources {
        header.push(format!("n_bar__{}={}", k, v));
        occupations.push(model.thermal(src)?.occupations);
    }
    let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new("modes", &fp, &hdr);
    let mut summary = String::new();
    for basis in [&model.basis_g, &model.basis_e] {
        let _ = writeln!(summary, "{} state modes (2pi MHz):", basis.internal_state.as_str());
        for j in 0..basis.dim() {
            let w = basis.frequencies[j];
            let mhz = model.units.to_hz(w) * 1e-6;
            let soft = j == basis.soft_mode_index;
            let mut row = vec![
                basis.internal_state.as_str().to_string(),
                j.to_string(),
                f(w),
                f(mhz),
                soft.to_string(),
                f(zigzag_correlation(basis, j)),
            ];
            let mut line = format!("  {} {:.4}{}", j, mhz, if soft { " soft" } else { "" });
            for occ in &occupations {
                if basis.internal_state == InternalState::Ground {
                    row.push(f(occ[j]));
                    let _ = write!(line, "  n={:.4}", occ[j]);
                } else {
                    row.push(String::new());
                }
            }
            csv.row(&row);
            let _ = writeln!(summary, "{}", line);
        }
    }
    Ok(CommandOutput {
        command: "modes",
        stem: cfg.name.clone(),
        files: vec![OutputFile {
            name: format!("{}__modes.csv", cfg.name),
            bytes: csv.into_bytes(),
        }],
        record: json!({
            "model": model_record(&model),
            "occupations": occupations.iter().map(|o| o.as_slice().to_vec()).collect::<Vec<_>>(),
        }),
        summary,
        failure: None,
    })
}

/// One compared cell of the embedded mode table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TableCell {
    pub g: f64,
    pub mode: usize,
    /// "frequency" or "occupation".
    pub quantity: &'static str,
    pub temperature_uk: Option<f64>,
    pub published: f64,
    pub computed: f64,
    /// Occupation implied by the published frequency of the same row.
    pub from_published_frequency: Option<f64>,
    pub within_tolerance: bool,
    pub flagged: bool,
}

impl TableCell {
    pub fn delta(&self) -> f64 {
        self.computed - self.published
    }
}

/// Ground-state frequencies and occupations for every block of the embedded
/// table, computed for Be⁺ at ν_x = 1 MHz.
pub fn table2_cells() -> CliResult<Vec<TableCell>> {
    let t = reference();
    let mut cells = Vec::new();
    for g in t.g_values() {
        let scenario = TrapScenario::from_dimensionless(
            3,
            1e6,
            g,
            0.0,
            DipoleGeometry::TransverseOnly,
            IonSpecies::beryllium9(),
        )?;
        let s = find_equilibrium(&scenario, InternalState::Ground, None)?;
        let basis = normal_modes(&s, &scenario)?;
        let units = scenario.units();
        let rows = t.modes_for(g);
        if rows.len() != basis.dim() {
            return Err(CliError::Numerical(format!("table block g={} has {} rows", g, rows.len())));
        }
        for (j, row) in rows.iter().enumerate() {
            let nu = units.to_hz(basis.frequencies[j]);
            let rel = (nu * 1e-6 - row.frequency_mhz).abs() / row.frequency_mhz;
            cells.push(TableCell {
                g,
                mode: j,
                quantity: "frequency",
                temperature_uk: None,
                published: row.frequency_mhz,
                computed: nu * 1e-6,
                from_published_frequency: None,
                within_tolerance: rel < TABLE_FREQ_TOL,
                flagged: false,
            });
            for (c, temp) in t.temperatures_uk.iter().enumerate() {
                let n = thermal_occupation(2.0 * PI * nu, temp * 1e-6);
                let n_pub = thermal_occupation(2.0 * PI * row.frequency_mhz * 1e6, temp * 1e-6);
                cells.push(TableCell {
                    g,
                    mode: j,
                    quantity: "occupation",
                    temperature_uk: Some(*temp),
                    published: row.occupations[c],
                    computed: n,
                    from_published_frequency: Some(n_pub),
                    within_tolerance: (n - row.occupations[c]).abs() < TABLE_OCC_TOL,
                    flagged: row.flagged.contains(&c),
                });
            }
        }
    }
    Ok(cells)
}

pub fn cmd_check_table2(fingerprint: &str) -> CliResult<CommandOutput> {
    let cells = table2_cells()?;
    let mut csv = Csv::new(
        "table2-check",
        fingerprint,
        &[
            "g",
            "mode",
            "quantity",
            "temperature_uK",
            "published",
            "computed",
            "delta",
            "from_published_frequency",
            "within_tolerance",
            "flagged",
        ],
    );
    let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
    for c in &cells {
        csv.row(&[
            f(c.g),
            c.mode.to_string(),
            c.quantity.into(),
            opt(c.temperature_uk),
            f(c.published),
            f(c.computed),
            f(c.delta()),
            opt(c.from_published_frequency),
            c.within_tolerance.to_string(),
            c.flagged.to_string(),
        ]);
    }
    let describe = |c: &TableCell| {
        let at = c.temperature_uk.map(|t| format!(" at {} uK", t)).unwrap_or_default();
        let implied = c
            .from_published_frequency
            .map(|n| format!(", published frequency implies {:.4}", n))
            .unwrap_or_default();
        format!(
            "  g={} mode {} {}{}: published {}, computed {:.6}, delta {:+.3e}{}",
            c.g,
            c.mode,
            c.quantity,
            at,
            c.published,
            c.computed,
            c.delta(),
            implied
        )
    };
    let regular: Vec<&TableCell> = cells.iter().filter(|c| !c.flagged).collect();
    let ok = regular.iter().filter(|c| c.within_tolerance).count();
    let mut summary = format!(
        "table check: {}/{} cells within tolerance (frequency {} relative, occupation {} absolute)\n",
        ok,
        regular.len(),
        TABLE_FREQ_TOL,
        TABLE_OCC_TOL
    );
    for c in regular.iter().filter(|c| !c.within_tolerance) {
        let _ = writeln!(summary, "{}", describe(c));
    }
    summary.push_str("flagged cells (printed value inconsistent with its own row):\n");
    for c in cells.iter().filter(|c| c.flagged) {
        let _ = writeln!(summary, "{}", describe(c));
    }
    Ok(CommandOutput {
        command: "table2-check",
        stem: "table2".into(),
        files: vec![OutputFile {
            name: "table2__check.csv".into(),
            bytes: csv.into_bytes(),
        }],
        record: json!({ "cells": cells }),
        summary,
        failure: None,
    })
}

fn collect_runs(
    cfg: &ScenarioConfig,
    points: &[RunPoint],
    results: Vec<CliResult<PointResult>>,
    mut per_point: impl FnMut(&str, &PointResult, &mut Vec<OutputFile>, &mut String) -> CliResult<()>,
) -> CliResult<(Vec<OutputFile>, Vec<Value>, Vec<(String, CliError)>, String)> {
    let mut files = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut summary = String::new();
    for (p, r) in points.iter().zip(results) {
        let stem = p.stem(&cfg.name);
        match r.and_then(|r| {
            per_point(&stem, &r, &mut files, &mut summary)?;
            point_record(cfg, p, &r, &stem)
        }) {
            Ok(rec) => records.push(rec),
            Err(e) => {
                let _ = writeln!(summary, "{}: FAILED ({}): {}", stem, e.class().as_str(), e);
                failures.push((stem, e));
            }
        }
    }
    Ok((files, records, failures, summary))
}

fn trace_line(stem: &str, r: &PointResult) -> String {
    let d = &r.trace.diagnostics;
    format!(
        "{}: {} samples, visibility in [{:.4}, {:.4}], branch flips {}, max cond {:.2e}",
        stem,
        r.trace.len(),
        d.min_visibility,
        d.max_visibility,
        d.branch_flips,
        d.max_omega_condition.max(d.max_x_condition)
    )
}

pub fn cmd_visibility(cfg: &ScenarioConfig, allow: bool) -> CliResult<CommandOutput> {
    let fp = cfg.fingerprint();
    let points = base_points(cfg);
    let results = run_all(cfg, &points, allow);
    let (files, runs, mut failures, summary) = collect_runs(cfg, &points, results, |stem, r, files, s| {
        files.push(OutputFile {
            name: format!("{}.csv", stem),
            bytes: trace_csv(&r.trace, cfg.ramsey_phase, &fp),
        });
        let _ = writeln!(s, "{}", trace_line(stem, r));
        Ok(())
    })?;
    if let Some((_, e)) = failures.drain(..).next() {
        return Err(e);
    }
    Ok(CommandOutput {
        command: "visibility",
        stem: cfg.name.clone(),
        files,
        record: json!({ "ramsey_phase": cfg.ramsey_phase, "runs": runs }),
        summary,
        failure: None,
    })
}

pub fn cmd_spectrum(cfg: &ScenarioConfig, allow: bool) -> CliResult<CommandOutput> {
    let fp = cfg.fingerprint();
    let points = base_points(cfg);
    let results = run_all(cfg, &points, allow);
    let mut extra = Vec::new();
    let (files, runs, mut failures, summary) = collect_runs(cfg, &points, results, |stem, r, files, s| {
        let spec = log_spectrum(&r.trace, cfg.spectrum.floor, cfg.spectrum.window)?;
        let mut csv = Csv::new("spectrum", &fp, &SPECTRUM_HEADER);
        for (w, v) in spec.frequencies_si.iter().zip(&spec.values) {
            csv.row(&[f(*w), f(v.re), f(v.im), f(v.norm())]);
        }
        files.push(OutputFile {
            name: format!("{}__spectrum.csv", stem),
            bytes: csv.into_bytes(),
        });
        let soft_e = r.model.basis_e.soft_frequency();
        let beat = r.model.beat_frequency();
        let peaks = find_peaks(&spec, cfg.spectrum.min_prominence);
        let mut pcsv = Csv::new("peaks", &fp, &PEAK_HEADER);
        let _ = writeln!(
            s,
            "{}: bin {:.4e} rad/s, {} clamped samples, {} peaks",
            stem,
            r.model.units.angular_to_si(spec.bin_width()),
            spec.clamped,
            peaks.len()
        );
        for pk in &peaks {
            let (name, dist) = nearest_named(pk.frequency, soft_e, beat, cfg.spectrum.max_harmonic);
            let bins = dist / spec.bin_width();
            pcsv.row(&[
                f(pk.frequency_si),
                f(pk.frequency),
                f(pk.height),
                f(pk.prominence),
                name.clone(),
                f(bins),
            ]);
            let _ = writeln!(
                s,
                "  {:.4e} rad/s  |S| {:.3e}  near {} ({:.2} bins)",
                pk.frequency_si, pk.height, name, bins
            );
        }
        files.push(OutputFile {
            name: format!("{}__peaks.csv", stem),
            bytes: pcsv.into_bytes(),
        });
        extra.push(json!({
            "stem": stem,
            "floor": spec.floor_used,
            "window": spec.window_kind.as_str(),
            "clamped": spec.clamped,
            "bin_width_dimensionless": spec.bin_width(),
            "omega_soft_excited": soft_e,
            "omega_beat": beat,
            "peaks": peaks,
        }));
        Ok(())
    })?;
    if let Some((_, e)) = failures.drain(..).next() {
        return Err(e);
    }
    Ok(CommandOutput {
        command: "spectrum",
        stem: cfg.name.clone(),
        files,
        record: json!({ "runs": runs, "spectra": extra }),
        summary,
        failure: None,
    })
}

pub fn cmd_sweep(cfg: &ScenarioConfig, allow: bool) -> CliResult<CommandOutput> {
    let fp = cfg.fingerprint();
    let points = sweep_points(cfg);
    let results = run_all(cfg, &points, allow);
    let (mut files, runs, failures, summary) = collect_runs(cfg, &points, results, |stem, r, files, s| {
        files.push(OutputFile {
            name: format!("{}.csv", stem),
            bytes: trace_csv(&r.trace, cfg.ramsey_phase, &fp),
        });
        let _ = writeln!(s, "{}", trace_line(stem, r));
        Ok(())
    })?;
    let mut manifest = Csv::new("sweep-manifest", &fp, &["run", "status", "error_class", "message"]);
    for p in &points {
        let stem = p.stem(&cfg.name);
        match failures.iter().find(|(s, _)| *s == stem) {
            Some((_, e)) => manifest.row(&[
                stem.clone(),
                "failed".into(),
                e.class().as_str().into(),
                format!("\"{}\"", e.to_string().replace('"', "'")),
            ]),
            None => manifest.row(&[stem.clone(), "ok".into(), String::new(), String::new()]),
        }
    }
    files.push(OutputFile {
        name: format!("{}__sweep_manifest.csv", cfg.name),
        bytes: manifest.into_bytes(),
    });
    let n_failed = failures.len();
    let failure = failures.into_iter().next().map(|(stem, e)| {
        let class = e.class();
        let msg = format!("{} of {} sweep runs failed; first: {}: {}", n_failed, points.len(), stem, e);
        match class {
            ErrorClass::Config => CliError::Config(msg),
            ErrorClass::Numerical => CliError::Numerical(msg),
            ErrorClass::Oracle => CliError::Oracle(msg),
        }
    });
    Ok(CommandOutput {
        command: "sweep",
        stem: cfg.name.clone(),
        files,
        record: json!({ "ramsey_phase": cfg.ramsey_phase, "points": points.len(), "failed": n_failed, "runs": runs }),
        summary,
        failure,
    })
}

/// Closed form with one mode at n̄ = 0 against the same mode at n̄ = 1e-7,
/// where the thermal integral is carried out for it.
pub fn cold_mode_reduction_deviation() -> CliResult<f64> {
    let case = standard_suite()
        .into_iter()
        .find(|c| c.name == "mixed-2mode-one-cold")
        .expect("suite contains the cold-mode case");
    let cold = ThermalSpec::per_mode(vec![0.25, 0.0])?;
    let warm = ThermalSpec::per_mode(vec![0.25, 1e-7])?;
    let mut dev: f64 = 0.0;
    for t in [0.0, 0.5, 1.0, 2.0, 3.7, 11.0] {
        let a = overlap_at(&case.map, &case.kappa, &case.kappa_prime, &cold, t)?;
        let b = overlap_at(&case.map, &case.kappa, &case.kappa_prime, &warm, t)?;
        dev = dev.max((a - b).norm());
    }
    Ok(dev)
}

pub const COLD_REDUCTION_TOL: f64 = 1e-6;

pub fn cmd_oracle_check(fingerprint: &str) -> CliResult<CommandOutput> {
    let suite = standard_suite();
    let outcomes: Vec<_> = suite.par_iter().map(run_case).collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(
        "oracle-check",
        fingerprint,
        &["case", "modes", "max_deviation", "converged", "passed"],
    );
    let mut summary = String::new();
    let mut worst: f64 = 0.0;
    let mut all_ok = true;
    for o in &outcomes {
        worst = worst.max(o.max_deviation);
        all_ok &= o.passed();
        csv.row(&[
            o.name.clone(),
            o.modes.to_string(),
            f(o.max_deviation),
            o.converged.to_string(),
            o.passed().to_string(),
        ]);
        let _ = writeln!(
            summary,
            "{:32} modes {}  max |closed - oracle| {:.3e}  converged {}  {}",
            o.name,
            o.modes,
            o.max_deviation,
            o.converged,
            if o.passed() { "ok" } else { "FAIL" }
        );
    }
    let cold = cold_mode_reduction_deviation()?;
    let cold_ok = cold < COLD_REDUCTION_TOL;
    csv.row(&[
        "cold-mode-reduction".into(),
        "2".into(),
        f(cold),
        "true".into(),
        cold_ok.to_string(),
    ]);
    let _ = writeln!(
        summary,
        "{:32} modes 2  max |n=0 - n=1e-7| {:.3e}  {}",
        "cold-mode-reduction",
        cold,
        if cold_ok { "ok" } else { "FAIL" }
    );
    let _ = writeln!(summary, "max deviation {:.3e} (tolerance {:.0e})", worst, EQUIVALENCE_TOL);
    let failure = if all_ok && cold_ok {
        None
    } else {
        Some(CliError::Oracle(format!(
            "oracle equivalence failed: max deviation {:.3e}, cold-mode reduction {:.3e}",
            worst, cold
        )))
    };
    Ok(CommandOutput {
        command: "oracle-check",
        stem: "oracle".into(),
        files: vec![OutputFile {
            name: "oracle__check.csv".into(),
            bytes: csv.into_bytes(),
        }],
        record: json!({ "outcomes": outcomes, "cold_mode_reduction": cold, "max_deviation": worst }),
        summary,
        failure,
    })
}
