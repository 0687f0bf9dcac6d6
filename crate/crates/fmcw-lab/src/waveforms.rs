//! Victim waveform configuration, chirp/frame synthesis and closed-form
//! radar metrics.
//!
//! Signals are complex baseband relative to the carrier `f_c`; the carrier
//! only enters through the wavelength in phase and Doppler terms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::C;

/// Relative slack used when checking integer sample counts and ratios.
const RATIO_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("sweep time B/S = {active:.6e} s exceeds chirp period {period:.6e} s")]
    SweepTooLong { active: f64, period: f64 },
    #[error("{n} chirps of {period:.6e} s do not fit in frame period {frame:.6e} s")]
    FrameTooShort { n: usize, period: f64, frame: f64 },
    #[error("sim_rate {sim_rate} Hz is below the sweep bandwidth {bandwidth} Hz (aliased sweep)")]
    AliasedSweep { sim_rate: f64, bandwidth: f64 },
    #[error("f_samp {f_samp} Hz exceeds sim_rate {sim_rate} Hz")]
    IfRateTooHigh { f_samp: f64, sim_rate: f64 },
    #[error("sim_rate / f_samp = {0} is not an integer")]
    NonIntegerDecimation(f64),
    #[error("n_chirps must be at least 1")]
    NoChirps,
    #[error("expected {expected} per-chirp phases, got {got}")]
    PhaseCount { expected: usize, got: usize },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// Victim waveform parameters. All quantities in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    /// Carrier frequency, Hz.
    pub f_c: f64,
    /// Sweep bandwidth, Hz.
    pub bandwidth: f64,
    /// Chirp slope, Hz/s.
    pub slope: f64,
    /// Chirp period, s.
    pub t_chirp: f64,
    pub n_chirps: usize,
    /// Frame period, s.
    pub t_frame: f64,
    /// IF (ADC) complex sample rate, Hz.
    pub f_samp: f64,
    /// Waveform simulation sample rate, Hz.
    pub sim_rate: f64,
}

/// Names accepted by [`RadarConfig::preset`].
pub const PRESETS: [&str; 5] = ["table2-A", "table2-B", "table2-C", "table2-D", "table4"];

impl RadarConfig {
    /// Built-in victim configurations. The four 77 GHz presets run at 33
    /// frames/s; the 1.5 GHz desk-scale preset uses a 150 ms frame.
    pub fn preset(name: &str) -> Result<RadarConfig, WaveformError> {
        let mhz: f64 = 1e6;
        let mhz_per_us: f64 = 1e12;
        let us: f64 = 1e-6;
        let frame_33hz = 1.0 / 33.0;
        let (f_c, b, s, t, n, t_frame, f_samp, sim_rate) = match name {
            "table2-A" => (77e9, 27.81 * mhz, 1.15 * mhz_per_us, 24.11 * us, 128, frame_33hz, 4.0 * mhz, 28.0 * mhz),
            "table2-B" => (77e9, 96.31 * mhz, 4.04 * mhz_per_us, 23.85 * us, 256, frame_33hz, 8.0 * mhz, 104.0 * mhz),
            "table2-C" => (77e9, 1001.51 * mhz, 47.85 * mhz_per_us, 20.93 * us, 256, frame_33hz, 70.0 * mhz, 1050.0 * mhz),
            "table2-D" => (77e9, 3935.0 * mhz, 187.96 * mhz_per_us, 21.63 * us, 256, frame_33hz, 280.0 * mhz, 4200.0 * mhz),
            "table4" => (1.5e9, 25.0 * mhz, 0.05 * mhz_per_us, 501.12 * us, 256, 0.150, 0.5 * mhz, 25.0 * mhz),
            other => return Err(WaveformError::UnknownPreset(other.to_string())),
        };
        // A sweep listed slightly longer than its period is clipped to fill it.
        let bandwidth = b.min(s * t);
        Ok(RadarConfig {
            f_c,
            bandwidth,
            slope: s,
            t_chirp: t,
            n_chirps: n,
            t_frame,
            f_samp,
            sim_rate,
        })
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        for (name, v) in [
            ("f_c", self.f_c),
            ("bandwidth", self.bandwidth),
            ("slope", self.slope),
            ("t_chirp", self.t_chirp),
            ("t_frame", self.t_frame),
            ("f_samp", self.f_samp),
            ("sim_rate", self.sim_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(WaveformError::NonPositive(name));
            }
        }
        if self.n_chirps == 0 {
            return Err(WaveformError::NoChirps);
        }
        let active = self.t_active();
        if active > self.t_chirp * (1.0 + RATIO_EPS) {
            return Err(WaveformError::SweepTooLong {
                active,
                period: self.t_chirp,
            });
        }
        if self.n_chirps as f64 * self.t_chirp > self.t_frame * (1.0 + RATIO_EPS) {
            return Err(WaveformError::FrameTooShort {
                n: self.n_chirps,
                period: self.t_chirp,
                frame: self.t_frame,
            });
        }
        self.validate_rates()
    }

    fn validate_rates(&self) -> Result<(), WaveformError> {
        if self.sim_rate < self.bandwidth * (1.0 - RATIO_EPS) {
            return Err(WaveformError::AliasedSweep {
                sim_rate: self.sim_rate,
                bandwidth: self.bandwidth,
            });
        }
        if self.f_samp > self.sim_rate * (1.0 + RATIO_EPS) {
            return Err(WaveformError::IfRateTooHigh {
                f_samp: self.f_samp,
                sim_rate: self.sim_rate,
            });
        }
        let ratio = self.sim_rate / self.f_samp;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(WaveformError::NonIntegerDecimation(ratio));
        }
        Ok(())
    }

    /// Active sweep duration B/S, s.
    pub fn t_active(&self) -> f64 {
        self.bandwidth / self.slope
    }

    pub fn lambda(&self) -> f64 {
        C / self.f_c
    }

    /// Integer decimation factor sim_rate / f_samp.
    pub fn decimation(&self) -> usize {
        (self.sim_rate / self.f_samp).round() as usize
    }

    /// IF samples per chirp: floor(T_active * f_samp).
    pub fn if_samples(&self) -> usize {
        floor_count(self.t_active() * self.f_samp)
    }

    /// Sim-rate samples consumed by one chirp's IF block.
    pub fn sim_block_len(&self) -> usize {
        self.if_samples() * self.decimation()
    }

    /// Range FFT length: next power of two >= IF samples per chirp.
    pub fn range_fft_len(&self) -> usize {
        self.if_samples().max(1).next_power_of_two()
    }

    /// Sample index at which chirp `n` starts in a frame sampled at `rate`.
    pub fn chirp_start_index(&self, n: usize, rate: f64) -> usize {
        (n as f64 * self.t_chirp * rate).round() as usize
    }

    /// Number of samples with t = k/rate inside the active sweep.
    pub fn active_len(&self, rate: f64) -> usize {
        ceil_count(self.t_active() * rate)
    }

    /// Range covered by one range-FFT bin, m.
    pub fn range_bin_m(&self) -> f64 {
        self.f_samp / self.range_fft_len() as f64 * C / (2.0 * self.slope)
    }
}

fn floor_count(x: f64) -> usize {
    (x + RATIO_EPS * x.max(1.0)).floor() as usize
}

fn ceil_count(x: f64) -> usize {
    if !x.is_finite() {
        return usize::MAX;
    }
    (x - RATIO_EPS * x.max(1.0)).ceil().max(0.0) as usize
}

/// Closed-form performance figures of a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarMetrics {
    pub d_res: f64,
    pub d_max: f64,
    pub v_res: f64,
    pub v_max: f64,
    pub lambda: f64,
}

pub fn derived_metrics(cfg: &RadarConfig) -> Result<RadarMetrics, WaveformError> {
    cfg.validate()?;
    let lambda = cfg.lambda();
    Ok(RadarMetrics {
        d_res: C / (2.0 * cfg.bandwidth),
        d_max: cfg.f_samp * C / (2.0 * cfg.slope),
        v_res: lambda / (2.0 * cfg.n_chirps as f64 * cfg.t_chirp),
        v_max: lambda / (4.0 * cfg.t_chirp),
        lambda,
    })
}

/// Uniformly sampled complex samples; sample k sits at `t0 + k / rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct IQBuffer {
    pub samples: Vec<Complex64>,
    pub rate: f64,
    pub t0: f64,
}

impl IQBuffer {
    pub fn new(samples: Vec<Complex64>, rate: f64, t0: f64) -> Self {
        assert!(rate > 0.0, "sample rate must be positive");
        IQBuffer { samples, rate, t0 }
    }

    pub fn zeros(len: usize, rate: f64, t0: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], rate, t0)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.samples {
            *s *= a;
        }
    }

    /// Mean |x|^2.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// One chirp period at `sim_rate`: the sweep exp(j(pi S t^2 + extra_phase))
/// for t < T_active followed by silence until T_chirp.
pub fn synth_chirp(cfg: &RadarConfig, extra_phase: f64) -> Result<IQBuffer, WaveformError> {
    cfg.validate()?;
    let rate = cfg.sim_rate;
    let len = cfg.chirp_start_index(1, rate);
    let mut buf = IQBuffer::zeros(len, rate, 0.0);
    write_chirp(&mut buf.samples, cfg, rate, extra_phase);
    Ok(buf)
}

fn write_chirp(out: &mut [Complex64], cfg: &RadarConfig, rate: f64, phase: f64) {
    let active = cfg.active_len(rate).min(out.len());
    for (k, s) in out[..active].iter_mut().enumerate() {
        let t = k as f64 / rate;
        *s = Complex64::from_polar(1.0, PI * cfg.slope * t * t + phase);
    }
}

/// `N_chirps` chirps back to back, chirp n starting at sample
/// round(n T_chirp sim_rate) and carrying `per_chirp_phases[n]`.
pub fn synth_frame(cfg: &RadarConfig, per_chirp_phases: &[f64]) -> Result<IQBuffer, WaveformError> {
    cfg.validate()?;
    if per_chirp_phases.len() != cfg.n_chirps {
        return Err(WaveformError::PhaseCount {
            expected: cfg.n_chirps,
            got: per_chirp_phases.len(),
        });
    }
    let rate = cfg.sim_rate;
    let total = cfg.chirp_start_index(cfg.n_chirps, rate);
    let mut buf = IQBuffer::zeros(total, rate, 0.0);
    for (n, &phase) in per_chirp_phases.iter().enumerate() {
        let start = cfg.chirp_start_index(n, rate);
        let end = cfg.chirp_start_index(n + 1, rate);
        write_chirp(&mut buf.samples[start..end], cfg, rate, phase);
    }
    Ok(buf)
}
