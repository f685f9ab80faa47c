//! Embedded published reference values (transverse and dipole frequency
//! conversions, mode frequencies and occupations for three ions).

use std::sync::OnceLock;

const SOURCE: &str = include_str!("../data/reference_tables.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub g: f64,
    /// ω/(2π) in MHz.
    pub frequency_mhz: f64,
    pub occupations: Vec<f64>,
    /// Column indices whose printed value is flagged as inconsistent.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTables {
    pub version: u32,
    /// (g, ν_y/MHz)
    pub transverse: Vec<(f64, f64)>,
    /// (Δ, ν_dip/kHz)
    pub dipole: Vec<(f64, f64)>,
    /// Temperatures (μK) of the occupation columns.
    pub temperatures_uk: Vec<f64>,
    pub modes: Vec<ModeRow>,
}

impl ReferenceTables {
    pub fn modes_for(&self, g: f64) -> Vec<&ModeRow> {
        self.modes.iter().filter(|r| r.g == g).collect()
    }

    pub fn g_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.modes {
            if !out.contains(&r.g) {
                out.push(r.g);
            }
        }
        out
    }
}

fn num(s: &str, line: usize) -> f64 {
    s.parse()
        .unwrap_or_else(|_| panic!("reference table line {}: bad number {:?}", line, s))
}

fn parse(src: &str) -> ReferenceTables {
    let mut t = ReferenceTables {
        version: 0,
        transverse: Vec::new(),
        dipole: Vec::new(),
        temperatures_uk: Vec::new(),
        modes: Vec::new(),
    };
    let mut section = "";
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name {
                "transverse" => "transverse",
                "dipole" => "dipole",
                "occupations" => "occupations",
                other => panic!("unknown section {}", other),
            };
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "version" => t.version = v.trim().parse().expect("version"),
                "temperatures" => {
                    t.temperatures_uk = v.split_whitespace().map(|x| num(x, i + 1)).collect()
                }
                other => panic!("unknown key {}", other),
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        match section {
            "transverse" => t.transverse.push((num(cols[0], i + 1), num(cols[1], i + 1))),
            "dipole" => t.dipole.push((num(cols[0], i + 1), num(cols[1], i + 1))),
            "occupations" => {
                let mut flagged = Vec::new();
                let occupations = cols[2..]
                    .iter()
                    .enumerate()
                    .map(|(c, x)| match x.strip_suffix('!') {
                        Some(v) => {
                            flagged.push(c);
                            num(v, i + 1)
                        }
                        None => num(x, i + 1),
                    })
                    .collect();
                t.modes.push(ModeRow {
                    g: num(cols[0], i + 1),
                    frequency_mhz: num(cols[1], i + 1),
                    occupations,
                    flagged,
                });
            }
            _ => panic!("data outside a section on line {}", i + 1),
        }
    }
    t
}

pub fn reference() -> &'static ReferenceTables {
    static TABLES: OnceLock<ReferenceTables> = OnceLock::new();
    TABLES.get_or_init(|| parse(SOURCE))
}
