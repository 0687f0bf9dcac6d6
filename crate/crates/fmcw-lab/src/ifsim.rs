//! Closed-form signal synthesis on the scenario clock.
//!
//! The victim's IF is produced directly at `f_samp`: an echo delayed by
//! t_d mixes to A exp(j(2 pi S t_d u - pi S t_d^2 + 2 pi f_c t_d)) and an
//! attack chirp mixes to exp(j(pi S u^2 - pi S_a w^2 - phase + 2 pi f_c tau)).
//! A component contributes only while its instantaneous IF frequency lies
//! in [0, f_samp), the band the victim's decimator keeps. The
//! full-waveform path at `sim_rate` is kept alongside as the oracle.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use crate::attacks::AttackPlan;
use crate::channel::{
    add_noise_in_place, noise_power, one_way_propagate, reflect_and_propagate, superpose, ChannelError, LinkBudget,
    Target,
};
use crate::victim::{dechirp, IFMatrix, PipelineError};
use crate::waveforms::{synth_frame, IQBuffer, RadarConfig, WaveformError};
use crate::C;

/// Straight-line radial motion, d(t) = d0 + v t on the scenario clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub d0: f64,
    pub v: f64,
}

impl Path {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.d0 + self.v * t
    }
}

impl From<&Target> for Path {
    fn from(t: &Target) -> Self {
        Path { d0: t.d0, v: t.v }
    }
}

/// Noise power per IF sample once the decimator has kept f_samp of the
/// sim_rate band.
pub fn victim_if_noise_power(cfg: &RadarConfig, budget: &LinkBudget) -> f64 {
    noise_power(cfg.sim_rate, budget) * cfg.f_samp / cfg.sim_rate
}

/// Adds the echo of a point target moving along `path`.
pub fn add_target_if(ifm: &mut IFMatrix, frame_start: f64, path: Path, amplitude: f64) {
    let cfg = ifm.cfg;
    let (s, f_c, fs) = (cfg.slope, cfg.f_c, cfg.f_samp);
    for l in 0..ifm.rows {
        let c0 = frame_start + l as f64 * cfg.t_chirp;
        for (m, out) in ifm.row_mut(l).iter_mut().enumerate() {
            let u = m as f64 / fs;
            let td = 2.0 * path.at(c0 + u) / C;
            let f_if = s * td;
            if u < td || !(0.0..fs).contains(&f_if) {
                continue;
            }
            let ph = 2.0 * PI * s * td * u - PI * s * td * td + 2.0 * PI * f_c * td;
            *out += Complex64::from_polar(amplitude, ph);
        }
    }
}

/// Adds attack chirps that reach the victim over `path` (attacker range on
/// the scenario clock), scaled by the one-way link amplitude `link_amp`.
pub fn add_attack_if(ifm: &mut IFMatrix, frame_start: f64, plan: &AttackPlan, path: Path, link_amp: f64) {
    let cfg = ifm.cfg;
    let (s, f_c, fs) = (cfg.slope, cfg.f_c, cfg.f_samp);
    let win = ifm.cols as f64 / fs;
    for l in 0..ifm.rows {
        let c0 = frame_start + l as f64 * cfg.t_chirp;
        let tau0 = path.at(c0) / C;
        for ch in &plan.chirps {
            let (a0, a1) = (ch.emit_start + tau0, ch.end() + tau0);
            if a1 < c0 - 1e-6 || a0 > c0 + win + 1e-6 {
                continue;
            }
            let amp = ch.amplitude * link_amp;
            for (m, out) in ifm.row_mut(l).iter_mut().enumerate() {
                let u = m as f64 / fs;
                let t = c0 + u;
                let tau = path.at(t) / C;
                let w = t - tau - ch.emit_start;
                if !(w >= 0.0 && w < ch.duration) {
                    continue;
                }
                let f_if = s * u - ch.slope * w;
                if !(0.0..fs).contains(&f_if) {
                    continue;
                }
                let ph = PI * s * u * u - PI * ch.slope * w * w - ch.phase + 2.0 * PI * f_c * tau;
                *out += Complex64::from_polar(amp, ph);
            }
        }
    }
}

pub fn add_if_noise<R: Rng + ?Sized>(ifm: &mut IFMatrix, power: f64, rng: &mut R) {
    add_noise_in_place(&mut ifm.data, power, rng);
}

/// What the attacker's receiver records of a victim frame: the victim's
/// chirps one-way delayed over `path`, downconverted to the victim start
/// frequency and visible while their frequency lies in [0, rate).
#[allow(clippy::too_many_arguments)]
pub fn attacker_capture<R: Rng + ?Sized>(
    cfg: &RadarConfig,
    frame_start: f64,
    path: Path,
    amplitude: f64,
    lo_phase: f64,
    t0: f64,
    len: usize,
    rate: f64,
    noise: f64,
    rng: &mut R,
) -> IQBuffer {
    let mut buf = IQBuffer::zeros(len, rate, t0);
    let t_active = cfg.t_active();
    for (k, out) in buf.samples.iter_mut().enumerate() {
        let t = t0 + k as f64 / rate;
        let tau = path.at(t) / C;
        let e = t - tau - frame_start;
        if e < 0.0 {
            continue;
        }
        let l = (e / cfg.t_chirp).floor();
        if l >= cfg.n_chirps as f64 {
            continue;
        }
        let w = e - l * cfg.t_chirp;
        if w >= t_active || cfg.slope * w >= rate {
            continue;
        }
        *out = Complex64::from_polar(amplitude, PI * cfg.slope * w * w - 2.0 * PI * cfg.f_c * tau + lo_phase);
    }
    add_noise_in_place(&mut buf.samples, noise, rng);
    buf
}

#[derive(Debug, thiserror::Error)]
pub enum FullPathError {
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Attack leg for [`full_waveform_if`].
pub struct AttackLeg<'a> {
    pub plan: &'a AttackPlan,
    pub path: Path,
    /// Attacker transmitter with the victim's receive gain.
    pub budget: LinkBudget,
}

/// Sample-rate simulation of one frame: synthesize the victim frame,
/// reflect it off each target, add the attack over its one-way path and
/// thermal noise, then dechirp. Slow; used as the oracle for the closed
/// forms above.
pub fn full_waveform_if<R: Rng + ?Sized>(
    cfg: &RadarConfig,
    frame_start: f64,
    targets: &[Target],
    victim_budget: &LinkBudget,
    attack: Option<AttackLeg<'_>>,
    noisy: bool,
    rng: &mut R,
) -> Result<IFMatrix, FullPathError> {
    let mut tx = synth_frame(cfg, &vec![0.0; cfg.n_chirps])?;
    tx.t0 = frame_start;
    let mut parts = Vec::new();
    for t in targets {
        let d = Path::from(t).at(frame_start);
        if d <= 0.0 {
            continue;
        }
        let local = Target { d0: d, v: t.v, rcs: t.rcs };
        parts.push(reflect_and_propagate(&tx, &local, cfg, victim_budget)?);
    }
    if let Some(a) = attack {
        let emitted = a.plan.render(cfg.sim_rate, frame_start, tx.len());
        parts.push(one_way_propagate(&emitted, a.path.at(frame_start), a.path.v, cfg, &a.budget)?);
    }
    let mut rx = if parts.is_empty() {
        IQBuffer::zeros(tx.len(), cfg.sim_rate, frame_start)
    } else {
        superpose(&parts)?
    };
    rx.samples.resize(tx.len(), Complex64::new(0.0, 0.0));
    if noisy {
        add_noise_in_place(&mut rx.samples, noise_power(cfg.sim_rate, victim_budget), rng);
    }
    Ok(dechirp(&tx, &rx, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::two_way_power;
    use crate::victim::analytic_if_oracle;

    fn small() -> RadarConfig {
        RadarConfig {
            f_c: 1.5e9,
            bandwidth: 25e6,
            slope: 5e10,
            t_chirp: 501.12e-6,
            n_chirps: 8,
            t_frame: 0.01,
            f_samp: 500e3,
            sim_rate: 25e6,
        }
    }

    #[test]
    fn closed_form_tone_matches_oracle_frequency() {
        let cfg = small();
        let tgt = Target { d0: 120.0, v: 0.0, rcs: 15.0 };
        let mut ifm = IFMatrix::zeros(&cfg);
        add_target_if(&mut ifm, 0.0, Path::from(&tgt), 1.0);
        let (f_if, _) = analytic_if_oracle(&tgt, &cfg);
        let row = ifm.row(0);
        // Phase step between samples well after the delay.
        let dphi = (row[100] * row[99].conj()).arg();
        assert!((dphi - 2.0 * PI * f_if / cfg.f_samp).abs() < 1e-9);
    }

    #[test]
    fn closed_form_agrees_with_full_waveform() {
        let cfg = small();
        let b = LinkBudget::default();
        let tgt = Target { d0: 90.0, v: 7.0, rcs: 15.0 };
        let start = 0.0123;
        let full = full_waveform_if(&cfg, start, &[tgt], &b, None, false, &mut crate::rng::stream(0, 0)).unwrap();
        let mut ana = IFMatrix::zeros(&cfg);
        let amp = two_way_power(&b, cfg.lambda(), tgt.rcs, Path::from(&tgt).at(start)).sqrt();
        add_target_if(&mut ana, start, Path::from(&tgt), amp);
        let num: f64 = full.data.iter().zip(&ana.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = ana.data.iter().map(|a| a.norm_sqr()).sum();
        // Nearest-sample envelope shifts and brick-wall edge ripple only.
        assert!(num / den < 0.05, "relative error power {}", num / den);
    }

    #[test]
    fn attacker_capture_sees_band_limited_chirps() {
        let cfg = small();
        let path = Path { d0: 30.0, v: 0.0 };
        let rate = 25e6;
        let buf = attacker_capture(&cfg, 1e-3, path, 1.0, 0.0, 0.9e-3, 30_000, rate, 0.0, &mut crate::rng::stream(0, 0));
        let arrive = 1e-3 + 30.0 / C;
        let k = ((arrive - 0.9e-3) * rate).ceil() as usize;
        assert_eq!(buf.samples[k - 1], Complex64::new(0.0, 0.0));
        assert!((buf.samples[k + 1].norm() - 1.0).abs() < 1e-12);
        // The whole 25 MHz sweep fits in the band, so the chirp ends at T_active.
        let end = ((arrive + cfg.t_active() - 0.9e-3) * rate).ceil() as usize;
        assert_eq!(buf.samples[end + 1], Complex64::new(0.0, 0.0));
        assert!((buf.samples[end - 2].norm() - 1.0).abs() < 1e-12);
    }
}
