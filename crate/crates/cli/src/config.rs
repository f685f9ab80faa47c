//! Scenario configuration: `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Lists are comma separated; the sweep
//! section separates list-valued entries with `;`.
//!
//! [`ScenarioConfig::to_text`] writes a canonical form that parses back to
//! the same value and re-serializes to the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use quench_core::params::{DipoleGeometry, IonSpecies, TrapScenario};
use quench_core::spectrum::{Window, DEFAULT_FLOOR};
use quench_core::structure_map::{RecoilGeometry, RecoilSpec};

use crate::error::{CliError, CliResult};

/// Shortest text that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    let plain = format!("{}", x);
    let sci = format!("{:e}", x);
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transverse {
    NuY(f64),
    G(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dipole {
    NuDip(f64),
    Delta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThermalConfig {
    /// μK, one output per entry.
    Temperatures(Vec<f64>),
    PerModeOccupations(Vec<f64>),
    /// μK, one per ground mode in ascending frequency order.
    ModeTemperatures(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseConvention {
    /// Both pulses transfer the same momentum.
    Same,
    /// The second pulse transfers the opposite momentum.
    Reversed,
}

impl PulseConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            PulseConvention::Same => "same",
            PulseConvention::Reversed => "reversed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "same" => Some(PulseConvention::Same),
            "reversed" => Some(PulseConvention::Reversed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoilConfig {
    pub geometry: RecoilGeometry,
    pub wavelength_nm: f64,
    pub pulse_convention: PulseConvention,
    /// 1/m, only for the explicit geometry.
    pub k_first: Option<[f64; 2]>,
    pub k_second: Option<[f64; 2]>,
    /// Defaults to the central ion.
    pub target_ion: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub floor: f64,
    pub window: Window,
    pub min_prominence: f64,
    pub max_harmonic: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepConfig {
    pub temperature_uk: Vec<f64>,
    pub g: Vec<f64>,
    pub delta: Vec<f64>,
    pub recoil_geometry: Vec<RecoilGeometry>,
    pub per_mode_occupations: Vec<Vec<f64>>,
    pub mode_temperatures_uk: Vec<Vec<f64>>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.temperature_uk.is_empty()
            && self.g.is_empty()
            && self.delta.is_empty()
            && self.recoil_geometry.is_empty()
            && self.per_mode_occupations.is_empty()
            && self.mode_temperatures_uk.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub species: String,
    pub n_ions: usize,
    pub nu_x_hz: f64,
    pub transverse: Transverse,
    pub dipole: Dipole,
    pub dipole_geometry: DipoleGeometry,
    pub thermal: ThermalConfig,
    pub recoil: RecoilConfig,
    pub t_max_us: f64,
    /// `None` picks the smallest grid that satisfies the density rule.
    pub n_samples: Option<usize>,
    pub ramsey_phase: f64,
    pub spectrum: SpectrumConfig,
    pub output_directory: Option<String>,
    pub sweep: SweepConfig,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "scenario",
        &[
            "name",
            "species",
            "n_ions",
            "nu_x_hz",
            "nu_y_hz",
            "g",
            "nu_dip_hz",
            "delta",
            "dipole_geometry",
        ],
    ),
    (
        "thermal",
        &["temperature_uK", "per_mode_occupations", "mode_temperatures_uK"],
    ),
    (
        "recoil",
        &["geometry", "wavelength_nm", "pulse_convention", "k_first", "k_second", "target_ion"],
    ),
    ("time", &["t_max_us", "n_samples"]),
    ("ramsey", &["phase"]),
    ("spectrum", &["floor", "window", "min_prominence", "max_harmonic"]),
    ("output", &["directory"]),
    (
        "sweep",
        &[
            "temperature_uK",
            "g",
            "delta",
            "recoil_geometry",
            "per_mode_occupations",
            "mode_temperatures_uK",
        ],
    ),
];

struct Entries {
    map: BTreeMap<(String, String), (String, usize)>,
}

impl Entries {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::config(format!("line {}: {}", line, msg))
}

fn num(v: &(String, usize)) -> CliResult<f64> {
    let x: f64 = v.0.parse().map_err(|_| err(v.1, format!("not a number: {:?}", v.0)))?;
    if !x.is_finite() {
        return Err(err(v.1, "value must be finite"));
    }
    Ok(x)
}

fn list_of(s: &str, line: usize) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| num(&(p.trim().to_string(), line)))
        .collect()
}

fn list(v: &(String, usize)) -> CliResult<Vec<f64>> {
    let out = list_of(&v.0, v.1)?;
    if out.is_empty() {
        return Err(err(v.1, "empty list"));
    }
    Ok(out)
}

fn lists(v: &(String, usize)) -> CliResult<Vec<Vec<f64>>> {
    v.0.split(';').map(|p| list_of(p, v.1)).collect()
}

fn pair(v: &(String, usize)) -> CliResult<[f64; 2]> {
    let l = list(v)?;
    if l.len() != 2 {
        return Err(err(v.1, "expected two components"));
    }
    Ok([l[0], l[1]])
}

fn uint(v: &(String, usize)) -> CliResult<usize> {
    v.0.parse().map_err(|_| err(v.1, format!("not a non-negative integer: {:?}", v.0)))
}

fn exclusive<T>(
    a: Option<(String, usize)>,
    b: Option<(String, usize)>,
    names: (&str, &str),
    fa: impl Fn(f64) -> T,
    fb: impl Fn(f64) -> T,
) -> CliResult<T> {
    match (a, b) {
        (Some(x), None) => Ok(fa(num(&x)?)),
        (None, Some(y)) => Ok(fb(num(&y)?)),
        (Some(_), Some(y)) => Err(err(y.1, format!("{} and {} are mutually exclusive", names.0, names.1))),
        (None, None) => Err(CliError::config(format!(
            "exactly one of {} or {} is required",
            names.0, names.1
        ))),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = Entries { map: BTreeMap::new() };
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|(s, _)| *s == name)
                        .map(|(s, _)| *s)
                        .ok_or_else(|| err(line_no, format!("unknown section [{}]", name)))?,
                );
                continue;
            }
            let sec = section.ok_or_else(|| err(line_no, "key outside any section"))?;
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, "expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            let known = SECTIONS.iter().find(|(s, _)| *s == sec).unwrap().1;
            if !known.contains(&k) {
                return Err(err(line_no, format!("unknown key {} in [{}]", k, sec)));
            }
            if entries
                .map
                .insert((sec.to_string(), k.to_string()), (v.to_string(), line_no))
                .is_some()
            {
                return Err(err(line_no, format!("duplicate key {}", k)));
            }
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut e: Entries) -> CliResult<Self> {
        let name = e
            .take("scenario", "name")
            .map(|v| v.0)
            .ok_or_else(|| CliError::config("scenario name is required"))?;
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(CliError::config(format!(
                "scenario name {:?} must be non-empty and use only letters, digits, '-', '_' or '.'",
                name
            )));
        }
        let species = e.take("scenario", "species").map(|v| v.0).unwrap_or_else(|| "Be9+".into());
        if IonSpecies::by_label(&species).is_none() {
            return Err(CliError::config(format!("unknown species {:?}", species)));
        }
        let n_ions = match e.take("scenario", "n_ions") {
            Some(v) => uint(&v)?,
            None => 3,
        };
        let nu_x_hz = match e.take("scenario", "nu_x_hz") {
            Some(v) => num(&v)?,
            None => 1e6,
        };
        let transverse = exclusive(
            e.take("scenario", "nu_y_hz"),
            e.take("scenario", "g"),
            ("nu_y_hz", "g"),
            Transverse::NuY,
            Transverse::G,
        )?;
        let dipole = exclusive(
            e.take("scenario", "nu_dip_hz"),
            e.take("scenario", "delta"),
            ("nu_dip_hz", "delta"),
            Dipole::NuDip,
            Dipole::Delta,
        )?;
        let dipole_geometry = match e.take("scenario", "dipole_geometry") {
            Some(v) => DipoleGeometry::parse(&v.0)
                .ok_or_else(|| err(v.1, format!("unknown dipole geometry {:?}", v.0)))?,
            None => DipoleGeometry::TransverseOnly,
        };

        let t = e.take("thermal", "temperature_uK");
        let p = e.take("thermal", "per_mode_occupations");
        let m = e.take("thermal", "mode_temperatures_uK");
        let thermal = match (t, p, m) {
            (None, None, None) => ThermalConfig::Temperatures(vec![0.0]),
            (Some(t), None, None) => ThermalConfig::Temperatures(list(&t)?),
            (None, Some(p), None) => ThermalConfig::PerModeOccupations(list(&p)?),
            (None, None, Some(m)) => ThermalConfig::ModeTemperatures(list(&m)?),
            _ => {
                return Err(CliError::config(
                    "temperature_uK, per_mode_occupations and mode_temperatures_uK are mutually exclusive",
                ))
            }
        };

        let geometry = match e.take("recoil", "geometry") {
            Some(v) => RecoilGeometry::parse(&v.0)
                .ok_or_else(|| err(v.1, format!("unknown recoil geometry {:?}", v.0)))?,
            None => RecoilGeometry::None,
        };
        let wavelength_nm = match e.take("recoil", "wavelength_nm") {
            Some(v) => num(&v)?,
            None => IonSpecies::by_label(&species).unwrap().transition_wavelength * 1e9,
        };
        let pulse_convention = match e.take("recoil", "pulse_convention") {
            Some(v) => PulseConvention::parse(&v.0)
                .ok_or_else(|| err(v.1, format!("unknown pulse convention {:?}", v.0)))?,
            None => PulseConvention::Same,
        };
        let k_first = e.take("recoil", "k_first").map(|v| pair(&v)).transpose()?;
        let k_second = e.take("recoil", "k_second").map(|v| pair(&v)).transpose()?;
        let target_ion = e.take("recoil", "target_ion").map(|v| uint(&v)).transpose()?;

        let t_max_us = match e.take("time", "t_max_us") {
            Some(v) => num(&v)?,
            None => 60.0,
        };
        let n_samples = match e.take("time", "n_samples") {
            Some(v) if v.0 == "auto" => None,
            Some(v) => Some(uint(&v)?),
            None => None,
        };
        let ramsey_phase = match e.take("ramsey", "phase") {
            Some(v) => num(&v)?,
            None => 0.0,
        };
        let spectrum = SpectrumConfig {
            floor: match e.take("spectrum", "floor") {
                Some(v) => num(&v)?,
                None => DEFAULT_FLOOR,
            },
            window: match e.take("spectrum", "window") {
                Some(v) => Window::parse(&v.0).ok_or_else(|| err(v.1, format!("unknown window {:?}", v.0)))?,
                None => Window::Rectangular,
            },
            min_prominence: match e.take("spectrum", "min_prominence") {
                Some(v) => num(&v)?,
                None => 1e-3,
            },
            max_harmonic: match e.take("spectrum", "max_harmonic") {
                Some(v) => uint(&v)?,
                None => 6,
            },
        };
        let output_directory = e.take("output", "directory").map(|v| v.0);

        let mut sweep = SweepConfig::default();
        if let Some(v) = e.take("sweep", "temperature_uK") {
            sweep.temperature_uk = list(&v)?;
        }
        if let Some(v) = e.take("sweep", "g") {
            sweep.g = list(&v)?;
        }
        if let Some(v) = e.take("sweep", "delta") {
            sweep.delta = list(&v)?;
        }
        if let Some(v) = e.take("sweep", "recoil_geometry") {
            sweep.recoil_geometry = v
                .0
                .split(',')
                .map(|s| {
                    RecoilGeometry::parse(s.trim())
                        .filter(|g| *g != RecoilGeometry::Explicit)
                        .ok_or_else(|| err(v.1, format!("sweepable recoil geometry expected, got {:?}", s.trim())))
                })
                .collect::<CliResult<_>>()?;
        }
        if let Some(v) = e.take("sweep", "per_mode_occupations") {
            sweep.per_mode_occupations = lists(&v)?;
        }
        if let Some(v) = e.take("sweep", "mode_temperatures_uK") {
            sweep.mode_temperatures_uk = lists(&v)?;
        }
        debug_assert!(e.map.is_empty());

        let cfg = ScenarioConfig {
            name,
            species,
            n_ions,
            nu_x_hz,
            transverse,
            dipole,
            dipole_geometry,
            thermal,
            recoil: RecoilConfig {
                geometry,
                wavelength_nm,
                pulse_convention,
                k_first,
                k_second,
                target_ion,
            },
            t_max_us,
            n_samples,
            ramsey_phase,
            spectrum,
            output_directory,
            sweep,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Constraints that do not need the physics pipeline.
    pub fn check(&self) -> CliResult<()> {
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("{} must be positive", what)))
            }
        };
        positive(self.nu_x_hz, "nu_x_hz")?;
        positive(self.t_max_us, "t_max_us")?;
        positive(self.spectrum.floor, "spectrum floor")?;
        positive(self.recoil.wavelength_nm, "wavelength_nm")?;
        if let Some(n) = self.n_samples {
            if n < 2 {
                return Err(CliError::config("n_samples must be at least 2"));
            }
        }
        let nonneg = |v: &[f64], what: &str| {
            if v.iter().all(|x| *x >= 0.0) {
                Ok(())
            } else {
                Err(CliError::config(format!("{} must be non-negative", what)))
            }
        };
        match &self.thermal {
            ThermalConfig::Temperatures(t) => nonneg(t, "temperatures")?,
            ThermalConfig::PerModeOccupations(n) => nonneg(n, "occupations")?,
            ThermalConfig::ModeTemperatures(t) => nonneg(t, "mode temperatures")?,
        }
        nonneg(&self.sweep.temperature_uk, "sweep temperatures")?;
        nonneg(&self.sweep.delta, "sweep delta")?;
        for v in self.sweep.per_mode_occupations.iter().chain(&self.sweep.mode_temperatures_uk) {
            nonneg(v, "sweep occupations and temperatures")?;
        }
        let explicit = self.recoil.geometry == RecoilGeometry::Explicit;
        let has_k = self.recoil.k_first.is_some() || self.recoil.k_second.is_some();
        if explicit && self.recoil.k_first.is_none() {
            return Err(CliError::config("explicit recoil needs k_first"));
        }
        if !explicit && has_k {
            return Err(CliError::config("k_first/k_second are only allowed with geometry = explicit"));
        }
        if let Some(t) = self.recoil.target_ion {
            if t >= self.n_ions {
                return Err(CliError::config(format!("target_ion {} out of range", t)));
            }
        }
        let thermal_axes = [
            !self.sweep.temperature_uk.is_empty(),
            !self.sweep.per_mode_occupations.is_empty(),
            !self.sweep.mode_temperatures_uk.is_empty(),
        ];
        if thermal_axes.iter().filter(|x| **x).count() > 1 {
            return Err(CliError::config(
                "a sweep may vary only one of temperature_uK, per_mode_occupations, mode_temperatures_uK",
            ));
        }
        if !self.sweep.g.is_empty() && matches!(self.transverse, Transverse::NuY(_)) {
            return Err(CliError::config("sweeping g requires the scenario to be given by g"));
        }
        if !self.sweep.delta.is_empty() && matches!(self.dipole, Dipole::NuDip(_)) {
            return Err(CliError::config("sweeping delta requires the scenario to be given by delta"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{} = {}", k, v);
        };
        s.push_str("[scenario]\n");
        kv(&mut s, "name", self.name.clone());
        kv(&mut s, "species", self.species.clone());
        kv(&mut s, "n_ions", self.n_ions.to_string());
        kv(&mut s, "nu_x_hz", fmt_f64(self.nu_x_hz));
        match self.transverse {
            Transverse::NuY(x) => kv(&mut s, "nu_y_hz", fmt_f64(x)),
            Transverse::G(x) => kv(&mut s, "g", fmt_f64(x)),
        }
        match self.dipole {
            Dipole::NuDip(x) => kv(&mut s, "nu_dip_hz", fmt_f64(x)),
            Dipole::Delta(x) => kv(&mut s, "delta", fmt_f64(x)),
        }
        kv(&mut s, "dipole_geometry", self.dipole_geometry.as_str().into());

        s.push_str("\n[thermal]\n");
        match &self.thermal {
            ThermalConfig::Temperatures(t) => kv(&mut s, "temperature_uK", fmt_list(t)),
            ThermalConfig::PerModeOccupations(n) => kv(&mut s, "per_mode_occupations", fmt_list(n)),
            ThermalConfig::ModeTemperatures(t) => kv(&mut s, "mode_temperatures_uK", fmt_list(t)),
        }

        s.push_str("\n[recoil]\n");
        kv(&mut s, "geometry", self.recoil.geometry.as_str().into());
        kv(&mut s, "wavelength_nm", fmt_f64(self.recoil.wavelength_nm));
        kv(&mut s, "pulse_convention", self.recoil.pulse_convention.as_str().into());
        if let Some(k) = self.recoil.k_first {
            kv(&mut s, "k_first", fmt_list(&k));
        }
        if let Some(k) = self.recoil.k_second {
            kv(&mut s, "k_second", fmt_list(&k));
        }
        if let Some(t) = self.recoil.target_ion {
            kv(&mut s, "target_ion", t.to_string());
        }

        s.push_str("\n[time]\n");
        kv(&mut s, "t_max_us", fmt_f64(self.t_max_us));
        kv(
            &mut s,
            "n_samples",
            self.n_samples.map_or_else(|| "auto".to_string(), |n| n.to_string()),
        );

        s.push_str("\n[ramsey]\n");
        kv(&mut s, "phase", fmt_f64(self.ramsey_phase));

        s.push_str("\n[spectrum]\n");
        kv(&mut s, "floor", fmt_f64(self.spectrum.floor));
        kv(&mut s, "window", self.spectrum.window.as_str().into());
        kv(&mut s, "min_prominence", fmt_f64(self.spectrum.min_prominence));
        kv(&mut s, "max_harmonic", self.spectrum.max_harmonic.to_string());

        if let Some(d) = &self.output_directory {
            s.push_str("\n[output]\n");
            kv(&mut s, "directory", d.clone());
        }

        if !self.sweep.is_empty() {
            let sw = &self.sweep;
            s.push_str("\n[sweep]\n");
            let joined = |v: &[Vec<f64>]| v.iter().map(|x| fmt_list(x)).collect::<Vec<_>>().join("; ");
            if !sw.temperature_uk.is_empty() {
                kv(&mut s, "temperature_uK", fmt_list(&sw.temperature_uk));
            }
            if !sw.g.is_empty() {
                kv(&mut s, "g", fmt_list(&sw.g));
            }
            if !sw.delta.is_empty() {
                kv(&mut s, "delta", fmt_list(&sw.delta));
            }
            if !sw.recoil_geometry.is_empty() {
                let names: Vec<&str> = sw.recoil_geometry.iter().map(|g| g.as_str()).collect();
                kv(&mut s, "recoil_geometry", names.join(", "));
            }
            if !sw.per_mode_occupations.is_empty() {
                kv(&mut s, "per_mode_occupations", joined(&sw.per_mode_occupations));
            }
            if !sw.mode_temperatures_uk.is_empty() {
                kv(&mut s, "mode_temperatures_uK", joined(&sw.mode_temperatures_uk));
            }
        }
        s
    }

    /// sha256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn species(&self) -> IonSpecies {
        IonSpecies::by_label(&self.species).expect("species checked at parse time")
    }

    pub fn scenario(&self) -> CliResult<TrapScenario> {
        self.scenario_with(None, None)
    }

    /// Scenario with g and/or Δ replaced.
    pub fn scenario_with(&self, g: Option<f64>, delta: Option<f64>) -> CliResult<TrapScenario> {
        let nu_c = quench_core::params::critical_frequency_for(self.n_ions, self.nu_x_hz)?;
        let nu_y = match (g, self.transverse) {
            (Some(g), _) | (None, Transverse::G(g)) => {
                if g <= -1.0 {
                    return Err(CliError::config(format!("g = {} must exceed -1", g)));
                }
                nu_c * (1.0 + g).sqrt()
            }
            (None, Transverse::NuY(v)) => v,
        };
        let nu_dip = match (delta, self.dipole) {
            (Some(d), _) | (None, Dipole::Delta(d)) => {
                if d < 0.0 {
                    return Err(CliError::config(format!("delta = {} must be >= 0", d)));
                }
                nu_c * d.sqrt()
            }
            (None, Dipole::NuDip(v)) => v,
        };
        Ok(TrapScenario::new(
            self.n_ions,
            self.nu_x_hz,
            nu_y,
            nu_dip,
            self.dipole_geometry,
            self.species(),
        )?)
    }

    pub fn recoil_spec(&self, geometry: Option<RecoilGeometry>) -> CliResult<RecoilSpec> {
        let target = self.recoil.target_ion.unwrap_or(self.n_ions / 2);
        let geometry = geometry.unwrap_or(self.recoil.geometry);
        let mut spec = match geometry {
            RecoilGeometry::Explicit => {
                let k1 = self.recoil.k_first.expect("checked at parse time");
                let k2 = self.recoil.k_second.unwrap_or(k1);
                RecoilSpec::explicit(k1, k2, target)?
            }
            g => RecoilSpec::preset(g, self.recoil.wavelength_nm * 1e-9, target)?,
        };
        if self.recoil.pulse_convention == PulseConvention::Reversed {
            spec.k_second = [-spec.k_second[0], -spec.k_second[1]];
        }
        Ok(spec)
    }

    /// Output directory: the command-line override, then the config, then
    /// the working directory. Created if missing and probed for writes.
    pub fn output_dir(&self, override_dir: Option<&Path>) -> CliResult<PathBuf> {
        let dir = match (override_dir, &self.output_directory) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => PathBuf::from(d),
            (None, None) => PathBuf::from("."),
        };
        ensure_writable(&dir)?;
        Ok(dir)
    }
}

pub fn ensure_writable(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let probe = dir.join(".quench-write-probe");
    std::fs::write(&probe, b"").map_err(|e| CliError::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[scenario]\nname = a\ng = 0.02\ndelta = 0.025\n";

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.species, "Be9+");
        assert_eq!(c.n_ions, 3);
        assert_eq!(c.thermal, ThermalConfig::Temperatures(vec![0.0]));
        assert_eq!(c.t_max_us, 60.0);
        assert_eq!(c.n_samples, None);
        assert_eq!(c.ramsey_phase, 0.0);
        assert!((c.recoil.wavelength_nm - 313.0).abs() < 1e-9);
    }

    #[test]
    fn canonical_text_is_stable() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        let t = c.to_text();
        let c2 = ScenarioConfig::parse(&t).unwrap();
        assert_eq!(c, c2);
        assert_eq!(c2.to_text(), t);
    }

    #[test]
    fn float_format_is_exact() {
        for x in [1e-12, 0.1 + 0.2, 1e6, -0.005, 123456.789, 2.5e-300, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1e-12), "1e-12");
        assert_eq!(fmt_f64(1e6), "1e6");
        assert_eq!(fmt_f64(0.025), "0.025");
    }

    #[test]
    fn exclusive_fields() {
        let both = "[scenario]\nname = a\ng = 0.02\nnu_y_hz = 1.5e6\ndelta = 0.01\n";
        assert!(matches!(ScenarioConfig::parse(both), Err(CliError::Config(_))));
        let neither = "[scenario]\nname = a\ndelta = 0.01\n";
        assert!(ScenarioConfig::parse(neither).is_err());
        let thermal = format!("{}[thermal]\ntemperature_uK = 1\nper_mode_occupations = 0, 0, 0, 0, 0, 0\n", MINIMAL);
        assert!(ScenarioConfig::parse(&thermal).is_err());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(ScenarioConfig::parse(&format!("{}colour = red\n", MINIMAL)).is_err());
        assert!(ScenarioConfig::parse(&format!("{}g = 0.1\n", MINIMAL)).is_err());
        assert!(ScenarioConfig::parse("[nope]\n").is_err());
        assert!(ScenarioConfig::parse("name = a\n").is_err());
    }

    #[test]
    fn scenario_conversion() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        let s = c.scenario().unwrap();
        let nu_c = (12.0f64 / 5.0).sqrt() * 1e6;
        assert!((s.nu_y - nu_c * 1.02f64.sqrt()).abs() < 1e-6);
        assert!((s.nu_dip - nu_c * 0.025f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn reversed_pulses_flip_second_vector() {
        let text = format!("{}[recoil]\ngeometry = counterpropagating\npulse_convention = reversed\n", MINIMAL);
        let c = ScenarioConfig::parse(&text).unwrap();
        let r = c.recoil_spec(None).unwrap();
        assert_eq!(r.k_first[1], -r.k_second[1]);
        assert!(r.k_first[1] > 0.0);
    }
}
