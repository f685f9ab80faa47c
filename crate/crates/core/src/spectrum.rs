//! Spectrum of the logarithmic visibility and peak picking.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::crystal::ModeBasis;
use crate::error::{QuenchError, Result};
use crate::visibility::VisibilityTrace;

pub const DEFAULT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rectangular" | "none" => Some(Window::Rectangular),
            "hann" => Some(Window::Hann),
            _ => None,
        }
    }
}

/// One-sided S_ln(ω_n) for n = 0 … K/2, ω_n = 2πn/T.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Internal units.
    pub frequencies: Vec<f64>,
    /// rad/s.
    pub frequencies_si: Vec<f64>,
    pub values: Vec<Complex64>,
    pub floor_used: f64,
    /// [0, T] in internal units.
    pub window: (f64, f64),
    pub window_kind: Window,
    /// Number of samples clamped at the floor.
    pub clamped: usize,
    /// Intervals in the trapezoid rule.
    pub intervals: usize,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / (self.window.1 - self.window.0)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Σ |S_n|² over the full two-sided spectrum.
    pub fn power(&self) -> f64 {
        let k = self.intervals;
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| {
                let mult = if n == 0 || (k % 2 == 0 && n == k / 2) { 1.0 } else { 2.0 };
                mult * v.norm_sqr()
            })
            .sum()
    }
}

/// Trapezoid-rule S_ln(ω_n) = (1/T) ∫₀ᵀ ln 𝒱(t) e^{−iω_n t} dt on a uniform
/// grid, with 𝒱 clamped below at `floor`.
pub fn log_spectrum(trace: &VisibilityTrace, floor: f64, window: Window) -> Result<Spectrum> {
    if !(floor > 0.0) {
        return Err(QuenchError::BadGrid(format!("floor must be positive, got {}", floor)));
    }
    let t = &trace.t_dimensionless;
    if t.len() < 3 {
        return Err(QuenchError::BadGrid("need at least three samples".into()));
    }
    let k = t.len() - 1;
    let span = t[k] - t[0];
    let dt = span / k as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(QuenchError::BadGrid("spectrum needs a uniform grid".into()));
    }
    let mut clamped = 0;
    let f: Vec<f64> = trace
        .visibility
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if *v < floor {
                clamped += 1;
            }
            let w = match window {
                Window::Rectangular => 1.0,
                Window::Hann => 0.5 * (1.0 - (2.0 * PI * i as f64 / k as f64).cos()),
            };
            w * v.max(floor).ln()
        })
        .collect();

    let mut buf: Vec<Complex64> = f[..k].iter().map(|x| Complex64::new(*x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(k).process(&mut buf);
    let edge = 0.5 * (f[k] - f[0]);
    let n_out = k / 2 + 1;
    // The window need not start at t = 0; shift the phase accordingly.
    let values = (0..n_out)
        .map(|n| {
            let w = 2.0 * PI * n as f64 / span;
            (buf[n] + edge) / k as f64 * Complex64::from_polar(1.0, -w * t[0])
        })
        .collect();
    let span_si = trace.t_seconds[k] - trace.t_seconds[0];
    Ok(Spectrum {
        frequencies: (0..n_out).map(|n| 2.0 * PI * n as f64 / span).collect(),
        frequencies_si: (0..n_out).map(|n| 2.0 * PI * n as f64 / span_si).collect(),
        values,
        floor_used: floor,
        window: (t[0], t[k]),
        window_kind: window,
        clamped,
        intervals: k,
    })
}

/// |ω_soft^e − ω_soft^g| in the units of the bases.
pub fn beat_frequency(basis_g: &ModeBasis, basis_e: &ModeBasis) -> f64 {
    (basis_e.soft_frequency() - basis_g.soft_frequency()).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub frequency: f64,
    pub frequency_si: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Interior local maxima of |S| with topographic prominence of at least
/// `min_prominence`, highest first. The zero-frequency bin is never a peak.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let mag = spectrum.magnitudes();
    let n = mag.len();
    let mut peaks = Vec::new();
    if n < 3 || mag.iter().any(|m| !m.is_finite()) {
        return peaks;
    }
    let mut i = 1;
    while i < n - 1 {
        if mag[i] > mag[i - 1] {
            // plateau handling: walk to the end of equal values
            let mut j = i;
            while j + 1 < n && mag[j + 1] == mag[i] {
                j += 1;
            }
            if j < n - 1 && mag[j + 1] < mag[i] {
                let peak = (i + j) / 2;
                let h = mag[peak];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if mag[k] > h {
                        break;
                    }
                    left_min = left_min.min(mag[k]);
                }
                let mut right_min = h;
                for &m in &mag[j + 1..] {
                    if m > h {
                        break;
                    }
                    right_min = right_min.min(m);
                }
                let prominence = h - left_min.max(right_min);
                if prominence >= min_prominence && prominence > 0.0 {
                    peaks.push(Peak {
                        index: peak,
                        frequency: spectrum.frequencies[peak],
                        frequency_si: spectrum.frequencies_si[peak],
                        height: h,
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    peaks
}

/// Labels a frequency with the closest of ω_soft^e, 2ω_soft^e and k·ω_beat
/// (k = 1 … `max_harmonic`). Returns the label and the distance.
pub fn nearest_named(frequency: f64, soft_e: f64, beat: f64, max_harmonic: usize) -> (String, f64) {
    let mut named = vec![
        ("omega_soft_e".to_string(), soft_e),
        ("2*omega_soft_e".to_string(), 2.0 * soft_e),
    ];
    if beat > 0.0 {
        for k in 1..=max_harmonic {
            named.push((format!("{}*omega_beat", k), k as f64 * beat));
        }
    }
    named
        .into_iter()
        .map(|(l, w)| (l, (frequency - w).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::visibility::TraceDiagnostics;

    fn trace_of(f: impl Fn(f64) -> f64, t_max: f64, n: usize) -> VisibilityTrace {
        let t: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| f(*x)).collect();
        VisibilityTrace {
            t_seconds: t.iter().map(|x| x * 1e-6).collect(),
            overlap: v.iter().map(|x| Complex64::new(*x, 0.0)).collect(),
            visibility: v,
            t_dimensionless: t,
            fingerprint: String::new(),
            diagnostics: TraceDiagnostics::default(),
        }
    }

    #[test]
    fn unit_visibility_is_flat_zero() {
        let s = log_spectrum(&trace_of(|_| 1.0, 50.0, 1001), DEFAULT_FLOOR, Window::Rectangular).unwrap();
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
        assert!(find_peaks(&s, 1e-12).is_empty());
    }

    #[test]
    fn single_tone_pair() {
        // 40 full periods of ω₀ = 2π·40/T
        let tt = 100.0;
        let w0 = 2.0 * PI * 40.0 / tt;
        let a = 0.3;
        let s = log_spectrum(&trace_of(|t| (a * (w0 * t).cos()).exp(), tt, 8001), DEFAULT_FLOOR, Window::Rectangular)
            .unwrap();
        assert!((s.values[40].re - a / 2.0).abs() < 1e-6);
        let p = find_peaks(&s, 1e-3);
        assert_eq!(p.len(), 1);
        assert!((p[0].frequency - w0).abs() <= s.bin_width());
        assert!((p[0].frequency_si - w0 * 1e6).abs() <= s.bin_width() * 1e6 * 1.000001);
    }

    #[test]
    fn two_tones_found() {
        let tt = 200.0;
        let (w1, w2) = (0.37, 1.13);
        let s = log_spectrum(
            &trace_of(|t| (0.2 * (w1 * t).cos() - 0.1 * (w2 * t).sin()).exp(), tt, 20001),
            DEFAULT_FLOOR,
            Window::Hann,
        )
        .unwrap();
        let p = find_peaks(&s, 0.01);
        assert_eq!(p.len(), 2);
        assert!((p[0].frequency - w1).abs() <= s.bin_width());
        assert!((p[1].frequency - w2).abs() <= s.bin_width());
    }

    #[test]
    fn parseval_and_floor() {
        let tt = 80.0;
        let tr = trace_of(|t| (0.4 * (0.9 * t).sin() - 0.3).exp() * 0.5, tt, 4001);
        let s = log_spectrum(&tr, 1e-12, Window::Rectangular).unwrap();
        let k = s.intervals;
        let mean_sq: f64 = tr.visibility[..k].iter().map(|v| v.ln().powi(2)).sum::<f64>() / k as f64;
        // trapezoid edge term makes this approximate
        assert!((s.power() - mean_sq).abs() < 1e-3 * mean_sq);
        let s2 = log_spectrum(&tr, 1e-9, Window::Rectangular).unwrap();
        assert_eq!(s.values, s2.values);
    }

    #[test]
    fn rejects_bad_input() {
        let mut tr = trace_of(|_| 1.0, 10.0, 11);
        assert!(log_spectrum(&tr, 0.0, Window::Rectangular).is_err());
        tr.t_dimensionless[3] += 0.3;
        assert!(log_spectrum(&tr, 1e-12, Window::Rectangular).is_err());
    }

    #[test]
    fn naming() {
        let (l, d) = nearest_named(0.155, 0.3, 0.077, 4);
        assert_eq!(l, "2*omega_beat");
        assert!(d < 0.01);
    }
}
