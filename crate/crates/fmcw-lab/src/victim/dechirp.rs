use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use super::PipelineError;
use crate::channel::Target;
use crate::waveforms::{IQBuffer, RadarConfig};
use crate::C;

/// Dechirped frame: one row per chirp, `cols` IF samples at `f_samp`.
#[derive(Debug, Clone, PartialEq)]
pub struct IFMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major (chirp, sample).
    pub data: Vec<Complex64>,
    pub cfg: RadarConfig,
}

impl IFMatrix {
    pub fn zeros(cfg: &RadarConfig) -> Self {
        let (rows, cols) = (cfg.n_chirps, cfg.if_samples());
        IFMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
            cfg: *cfg,
        }
    }

    pub fn row(&self, l: usize) -> &[Complex64] {
        &self.data[l * self.cols..(l + 1) * self.cols]
    }

    pub fn row_mut(&mut self, l: usize) -> &mut [Complex64] {
        &mut self.data[l * self.cols..(l + 1) * self.cols]
    }
}

/// Decimates one block by keeping the DFT bins in [0, f_out) and
/// transforming back at the output rate. The passband is therefore the
/// one-sided IF band that the range axis covers.
pub struct BrickwallDecimator {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    n_in: usize,
    n_out: usize,
    scratch: Vec<Complex64>,
}

impl BrickwallDecimator {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        assert!(n_out <= n_in && n_out > 0);
        let mut planner = FftPlanner::new();
        BrickwallDecimator {
            fwd: planner.plan_fft_forward(n_in),
            inv: planner.plan_fft_inverse(n_out),
            n_in,
            n_out,
            scratch: vec![Complex64::new(0.0, 0.0); n_in],
        }
    }

    /// `block.len()` must equal `n_in`; writes `n_out` samples.
    pub fn process(&mut self, block: &[Complex64], out: &mut [Complex64]) {
        self.scratch.copy_from_slice(block);
        self.fwd.process(&mut self.scratch);
        out.copy_from_slice(&self.scratch[..self.n_out]);
        self.inv.process(out);
        let s = 1.0 / self.n_in as f64;
        for v in out.iter_mut() {
            *v *= s;
        }
    }
}

/// Mixes each chirp's active sweep (x conj(y)) and decimates to `f_samp`.
pub fn dechirp(tx: &IQBuffer, rx: &IQBuffer, cfg: &RadarConfig) -> Result<IFMatrix, PipelineError> {
    cfg.validate()?;
    for b in [tx, rx] {
        if (b.rate - cfg.sim_rate).abs() > 1e-9 * cfg.sim_rate {
            return Err(PipelineError::RateMismatch {
                expected: cfg.sim_rate,
                got: b.rate,
            });
        }
    }
    if (tx.t0 - rx.t0).abs() > 0.5 / cfg.sim_rate {
        return Err(PipelineError::Misaligned { tx: tx.t0, rx: rx.t0 });
    }
    let block = cfg.sim_block_len();
    let needed = cfg.chirp_start_index(cfg.n_chirps - 1, cfg.sim_rate) + block;
    let got = tx.len().min(rx.len());
    if got < needed {
        return Err(PipelineError::TooShort { needed, got });
    }
    let mut ifm = IFMatrix::zeros(cfg);
    let mut dec = BrickwallDecimator::new(block, ifm.cols);
    let mut mixed = vec![Complex64::new(0.0, 0.0); block];
    for l in 0..cfg.n_chirps {
        let s = cfg.chirp_start_index(l, cfg.sim_rate);
        for (k, m) in mixed.iter_mut().enumerate() {
            *m = tx.samples[s + k] * rx.samples[s + k].conj();
        }
        dec.process(&mixed, ifm.row_mut(l));
    }
    Ok(ifm)
}

/// Closed-form IF tone frequency and chirp-to-chirp phase of a target.
pub fn analytic_if_oracle(target: &Target, cfg: &RadarConfig) -> (f64, f64) {
    let f_if = 2.0 * cfg.slope * target.d0 / C;
    let phi = 4.0 * PI * target.v * cfg.t_chirp / cfg.lambda();
    (f_if, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::synth_frame;
    use approx::assert_relative_eq;

    fn small() -> RadarConfig {
        RadarConfig {
            f_c: 1.5e9,
            bandwidth: 2.5e6,
            slope: 5e10,
            t_chirp: 60e-6,
            n_chirps: 4,
            t_frame: 1e-3,
            f_samp: 500e3,
            sim_rate: 25e6,
        }
    }

    #[test]
    fn config_c_tone_at_thirty_metres() {
        let cfg = crate::waveforms::RadarConfig::preset("table2-C").unwrap();
        let t = Target { d0: 30.0, v: 0.0, rcs: 0.0 };
        let (f, phi) = analytic_if_oracle(&t, &cfg);
        assert_relative_eq!(f / 1e6, 9.577, epsilon = 5e-4);
        assert_eq!(phi, 0.0);
    }

    #[test]
    fn v_max_gives_pi() {
        let cfg = small();
        let v_max = cfg.lambda() / (4.0 * cfg.t_chirp);
        let t = Target { d0: 1.0, v: v_max, rcs: 0.0 };
        assert_relative_eq!(analytic_if_oracle(&t, &cfg).1, PI, epsilon = 1e-12);
    }

    #[test]
    fn identical_buffers_give_dc() {
        let cfg = small();
        let tx = synth_frame(&cfg, &[0.0; 4]).unwrap();
        let ifm = dechirp(&tx, &tx, &cfg).unwrap();
        assert_eq!(ifm.cols, 25);
        for v in &ifm.data {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn decimator_keeps_in_band_tone_and_drops_out_of_band() {
        let n_in = 500;
        let n_out = 10;
        let mut dec = BrickwallDecimator::new(n_in, n_out);
        let rate_in = 50.0;
        let tone = |f: f64| -> Vec<Complex64> {
            (0..n_in)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 / rate_in))
                .collect()
        };
        let mut out = vec![Complex64::new(0.0, 0.0); n_out];
        // 0.3 Hz lies on a bin inside [0, 1) Hz output band.
        dec.process(&tone(0.3), &mut out);
        for (m, v) in out.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, 2.0 * PI * 0.3 * m as f64);
            assert!((v - expected).norm() < 1e-9);
        }
        dec.process(&tone(5.0), &mut out);
        assert!(out.iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn misaligned_and_wrong_rate_rejected() {
        let cfg = small();
        let tx = synth_frame(&cfg, &[0.0; 4]).unwrap();
        let mut rx = tx.clone();
        rx.t0 = 1e-6;
        assert!(matches!(dechirp(&tx, &rx, &cfg), Err(PipelineError::Misaligned { .. })));
        let mut rx = tx.clone();
        rx.rate = 1e6;
        assert!(matches!(dechirp(&tx, &rx, &cfg), Err(PipelineError::RateMismatch { .. })));
    }
}
