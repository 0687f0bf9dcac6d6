//! Free-space propagation, point-target reflection, thermal noise and
//! superposition.
//!
//! Sign convention: positive radial velocity means the range is increasing
//! (receding). Delays use a nearest-sample envelope shift plus the exact
//! carrier phase exp(-j 2 pi f_c t_d), evaluated per sample.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::rng;
use crate::waveforms::{IQBuffer, RadarConfig};
use crate::C;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("range must be positive, got {0} m")]
    NonPositiveRange(f64),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
}

/// Point scatterer. `d0` is the range at t = 0 of the buffer it reflects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub d0: f64,
    /// Radial velocity, m/s, positive = receding.
    pub v: f64,
    /// Radar cross-section, dBsm.
    pub rcs: f64,
}

/// Transmit/receive chain figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    /// Transmitter output power, dBm.
    pub tx_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub noise_figure: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            tx_power: 5.0,
            tx_gain: 36.0,
            rx_gain: 42.0,
            noise_figure: 5.0,
        }
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_lin(dbm - 30.0)
}

impl LinkBudget {
    /// Effective radiated power P_t G_t, W.
    pub fn eirp_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power + self.tx_gain)
    }
}

/// Two-way radar equation, W at the receiver output.
pub fn two_way_power(budget: &LinkBudget, lambda: f64, rcs_dbsm: f64, range: f64) -> f64 {
    budget.eirp_watts() * db_to_lin(budget.rx_gain) * lambda * lambda * db_to_lin(rcs_dbsm)
        / ((4.0 * PI).powi(3) * range.powi(4))
}

/// One-way Friis link from a transmitter of EIRP `eirp_watts` into a
/// receiver with gain `rx_gain_db`, W.
pub fn one_way_power(eirp_watts: f64, rx_gain_db: f64, lambda: f64, range: f64) -> f64 {
    eirp_watts * db_to_lin(rx_gain_db) * lambda * lambda / (4.0 * PI * range).powi(2)
}

/// Thermal noise kTB at the receiver input, dBm.
pub fn thermal_floor_dbm(bandwidth: f64) -> f64 {
    -174.0 + 10.0 * bandwidth.log10()
}

/// Noise power after the receive gain and noise figure, W.
pub fn noise_power(bandwidth: f64, budget: &LinkBudget) -> f64 {
    dbm_to_watts(thermal_floor_dbm(bandwidth) + budget.rx_gain + budget.noise_figure)
}

fn delayed(
    tx: &IQBuffer,
    amplitude: f64,
    f_c: f64,
    delay_at: impl Fn(f64) -> f64,
) -> IQBuffer {
    let rate = tx.rate;
    let mut out = IQBuffer::zeros(tx.len(), rate, tx.t0);
    for (k, y) in out.samples.iter_mut().enumerate() {
        let t = k as f64 / rate;
        let td = delay_at(t);
        let shift = (td * rate).round() as i64;
        let src = k as i64 - shift;
        if src < 0 || src as usize >= tx.len() {
            continue;
        }
        let carrier = Complex64::from_polar(amplitude, -2.0 * PI * f_c * td);
        *y = tx.samples[src as usize] * carrier;
    }
    out
}

/// Echo of `tx` off `target`: two-way delay 2 d(t)/c with
/// d(t) = d0 + v t (t measured from `tx.t0`), radar-equation amplitude.
pub fn reflect_and_propagate(
    tx: &IQBuffer,
    target: &Target,
    cfg: &RadarConfig,
    budget: &LinkBudget,
) -> Result<IQBuffer, ChannelError> {
    if !(target.d0 > 0.0) {
        return Err(ChannelError::NonPositiveRange(target.d0));
    }
    let amp = two_way_power(budget, cfg.lambda(), target.rcs, target.d0).sqrt();
    let (d0, v) = (target.d0, target.v);
    Ok(delayed(tx, amp, cfg.f_c, |t| 2.0 * (d0 + v * t) / C))
}

/// One-way path over `distance` with closing rate `rel_velocity`
/// (positive = opening). `tx` is normalised to the EIRP of `budget`;
/// the receiver gain is `budget.rx_gain`.
pub fn one_way_propagate(
    tx: &IQBuffer,
    distance: f64,
    rel_velocity: f64,
    cfg: &RadarConfig,
    budget: &LinkBudget,
) -> Result<IQBuffer, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::NonPositiveRange(distance));
    }
    let amp = one_way_power(budget.eirp_watts(), budget.rx_gain, cfg.lambda(), distance).sqrt();
    Ok(delayed(tx, amp, cfg.f_c, |t| (distance + rel_velocity * t) / C))
}

/// Adds circular complex Gaussian noise of total power
/// `noise_power(bandwidth, budget)`.
pub fn add_thermal_noise(buf: &IQBuffer, bandwidth: f64, budget: &LinkBudget, seed: u64) -> IQBuffer {
    let mut r = rng::stream(seed, 0);
    let mut out = buf.clone();
    add_noise_in_place(&mut out.samples, noise_power(bandwidth, budget), &mut r);
    out
}

pub fn add_noise_in_place<R: Rng + ?Sized>(samples: &mut [Complex64], power: f64, rng: &mut R) {
    let sigma = (power / 2.0).sqrt();
    for s in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(sigma * re, sigma * im);
    }
}

pub const RCS_MEAN_DBSM: f64 = 15.0;
pub const RCS_VARIANCE_DBSM2: f64 = 5.0;

pub fn sample_rcs(seed: u64) -> f64 {
    sample_rcs_with(&mut rng::stream(seed, 0))
}

pub fn sample_rcs_with<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Normal::new(RCS_MEAN_DBSM, RCS_VARIANCE_DBSM2.sqrt())
        .expect("valid normal")
        .sample(rng)
}

/// Samplewise sum on the common grid; the output spans the union of the
/// inputs and each input is placed at round((t0_i - t0_min) rate).
pub fn superpose(buffers: &[IQBuffer]) -> Result<IQBuffer, ChannelError> {
    let Some(first) = buffers.first() else {
        return Ok(IQBuffer::zeros(0, 1.0, 0.0));
    };
    let rate = first.rate;
    for b in buffers {
        if (b.rate - rate).abs() > 1e-9 * rate {
            return Err(ChannelError::RateMismatch(rate, b.rate));
        }
    }
    let t0 = buffers.iter().map(|b| b.t0).fold(f64::INFINITY, f64::min);
    let offsets: Vec<usize> = buffers
        .iter()
        .map(|b| ((b.t0 - t0) * rate).round() as usize)
        .collect();
    let len = buffers
        .iter()
        .zip(&offsets)
        .map(|(b, o)| o + b.len())
        .max()
        .unwrap_or(0);
    let mut out = IQBuffer::zeros(len, rate, t0);
    for (b, &o) in buffers.iter().zip(&offsets) {
        for (dst, src) in out.samples[o..o + b.len()].iter_mut().zip(&b.samples) {
            *dst += src;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> RadarConfig {
        RadarConfig {
            f_c: 77e9,
            bandwidth: 2.5e6,
            slope: 5e10,
            t_chirp: 20.93e-6,
            n_chirps: 4,
            t_frame: 1e-3,
            f_samp: 500e3,
            sim_rate: 25e6,
        }
    }

    fn tone(len: usize, rate: f64, f: f64) -> IQBuffer {
        IQBuffer::new(
            (0..len)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 / rate))
                .collect(),
            rate,
            0.0,
        )
    }

    #[test]
    fn delay_of_75_metres() {
        let td = 2.0 * 75.0 / C;
        assert_relative_eq!(td * 1e9, 500.346, epsilon = 1e-3);
        let dd = 15.0 / C;
        assert_relative_eq!(dd * 1e9, 50.035, epsilon = 1e-3);
    }

    #[test]
    fn echo_is_shifted_by_nearest_sample() {
        let c = cfg();
        let mut tx = IQBuffer::zeros(200, c.sim_rate, 0.0);
        tx.samples[10] = Complex64::new(1.0, 0.0);
        let t = Target { d0: 75.0, v: 0.0, rcs: 15.0 };
        let rx = reflect_and_propagate(&tx, &t, &c, &LinkBudget::default()).unwrap();
        // 500.35 ns at 25 MHz = 12.5 samples -> rounds to 13
        let k = rx.samples.iter().position(|s| s.norm() > 0.0).unwrap();
        assert_eq!(k, 10 + 13);
    }

    #[test]
    fn stationary_target_keeps_carrier_phase() {
        let c = cfg();
        let tx = IQBuffer::new(vec![Complex64::new(1.0, 0.0); 2000], c.sim_rate, 0.0);
        let t = Target { d0: 30.0, v: 0.0, rcs: 10.0 };
        let rx = reflect_and_propagate(&tx, &t, &c, &LinkBudget::default()).unwrap();
        let n = (c.t_chirp * c.sim_rate).round() as usize;
        let dphi = (rx.samples[100 + n] * rx.samples[100].conj()).arg();
        assert!(dphi.abs() < 1e-12);
    }

    #[test]
    fn receding_target_chirp_to_chirp_phase() {
        // IF = x conj(y) advances by 4 pi v T / lambda for v > 0.
        let c = cfg();
        let tx = IQBuffer::new(vec![Complex64::new(1.0, 0.0); 2000], c.sim_rate, 0.0);
        let t = Target { d0: 30.0, v: 10.0, rcs: 10.0 };
        let rx = reflect_and_propagate(&tx, &t, &c, &LinkBudget::default()).unwrap();
        let k0 = 100;
        let k1 = k0 + (c.t_chirp * c.sim_rate).round() as usize;
        let if0 = tx.samples[k0] * rx.samples[k0].conj();
        let if1 = tx.samples[k1] * rx.samples[k1].conj();
        let dt = (k1 - k0) as f64 / c.sim_rate;
        let expected = 4.0 * PI * 10.0 * dt / c.lambda();
        assert_relative_eq!((if1 * if0.conj()).arg(), expected, epsilon = 1e-9);
        // Nominal figure with T_chirp = 20.93 us.
        assert_relative_eq!(4.0 * PI * 10.0 * 20.93e-6 / c.lambda(), 0.6755, epsilon = 1e-4);
    }

    #[test]
    fn linearity_in_input() {
        let c = cfg();
        let tx = tone(500, c.sim_rate, 1e6);
        let mut tx2 = tx.clone();
        tx2.scale(2.5);
        let t = Target { d0: 12.0, v: 3.0, rcs: 5.0 };
        let b = LinkBudget::default();
        let a = reflect_and_propagate(&tx, &t, &c, &b).unwrap();
        let a2 = reflect_and_propagate(&tx2, &t, &c, &b).unwrap();
        for (x, y) in a.samples.iter().zip(&a2.samples) {
            assert!((x * 2.5 - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn non_positive_range_rejected() {
        let c = cfg();
        let tx = tone(10, c.sim_rate, 0.0);
        let b = LinkBudget::default();
        let t = Target { d0: 0.0, v: 0.0, rcs: 0.0 };
        assert!(reflect_and_propagate(&tx, &t, &c, &b).is_err());
        assert!(one_way_propagate(&tx, -1.0, 0.0, &c, &b).is_err());
    }

    #[test]
    fn one_way_doubling_costs_six_db() {
        let p1 = one_way_power(1.0, 0.0, 0.2, 10.0);
        let p2 = one_way_power(1.0, 0.0, 0.2, 20.0);
        assert_relative_eq!(lin_to_db(p2 / p1), -6.0206, epsilon = 1e-4);
    }

    #[test]
    fn one_way_without_motion_has_no_drift() {
        let c = cfg();
        let tx = IQBuffer::new(vec![Complex64::new(1.0, 0.0); 3000], c.sim_rate, 0.0);
        let rx = one_way_propagate(&tx, 15.0, 0.0, &c, &LinkBudget::default()).unwrap();
        let drift = (rx.samples[2500] * rx.samples[100].conj()).arg();
        assert!(drift.abs() < 1e-12);
    }

    #[test]
    fn thermal_floor_at_25_mhz() {
        assert_relative_eq!(thermal_floor_dbm(25e6), -100.0206, epsilon = 1e-4);
    }

    #[test]
    fn noise_is_reproducible_and_calibrated() {
        let buf = IQBuffer::zeros(1_000_000, 25e6, 0.0);
        let b = LinkBudget::default();
        let a = add_thermal_noise(&buf, 25e6, &b, 9);
        let a2 = add_thermal_noise(&buf, 25e6, &b, 9);
        assert_eq!(a, a2);
        let p = noise_power(25e6, &b);
        assert!((a.mean_power() / p - 1.0).abs() < 0.01);
    }

    #[test]
    fn rcs_moments() {
        let mut r = rng::stream(3, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_rcs_with(&mut r)).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((m - 15.0).abs() < 0.05, "mean {m}");
        assert!((var - 5.0).abs() < 0.2, "variance {var}");
        assert_eq!(sample_rcs(11), sample_rcs(11));
    }

    #[test]
    fn superpose_identity_and_cancellation() {
        let a = tone(64, 1e6, 1e4);
        assert_eq!(superpose(&[a.clone()]).unwrap(), a);
        let mut neg = a.clone();
        neg.scale(-1.0);
        let z = superpose(&[a, neg]).unwrap();
        assert!(z.samples.iter().all(|s| s.norm() < 1e-15));
    }

    #[test]
    fn superpose_two_path_interference() {
        // Two copies of a tone offset by `lag` samples: |1 + e^{-j w lag}|.
        let rate = 1e6;
        let f = 37e3;
        let lag = 3usize;
        let a = tone(200, rate, f);
        let mut b = a.clone();
        b.t0 = lag as f64 / rate;
        let s = superpose(&[a, b]).unwrap();
        assert_eq!(s.len(), 203);
        let w = 2.0 * PI * f / rate;
        let expected = (2.0 + 2.0 * (w * lag as f64).cos()).sqrt();
        for k in lag..200 {
            assert_relative_eq!(s.samples[k].norm(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn superpose_rejects_rate_mismatch() {
        let a = tone(4, 1e6, 0.0);
        let b = tone(4, 2e6, 0.0);
        assert!(matches!(superpose(&[a, b]), Err(ChannelError::RateMismatch(..))));
    }
}
