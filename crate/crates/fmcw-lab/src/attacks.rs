//! Attack chirp synthesis from a victim estimate.
//!
//! Every attack is a list of [`AttackChirp`]s on the attacker's clock. The
//! victim mixes x conj(y), so a chirp emitted with phase -phi shows up in
//! the victim's IF with +phi; the phases below are stored already negated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::channel::{one_way_power, two_way_power, LinkBudget, RCS_MEAN_DBSM};
use crate::estimation::{frame_start_residual, VictimEstimate};
use crate::waveforms::IQBuffer;
use crate::C;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("cannot spoof {d_spoof} m from {d_atk} m away: delay would be negative")]
    NegativeDelay { d_spoof: f64, d_atk: f64 },
    #[error("victim estimate is incomplete ({0})")]
    IncompleteEstimate(&'static str),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpoofTarget {
    pub d_spoof: f64,
    pub v_spoof: f64,
}

/// Attacker-to-victim geometry. `v_atk` is the victim's radial velocity
/// relative to the attacker, positive = opening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerState {
    pub d_atk: f64,
    pub v_atk: f64,
}

/// False-negative smear parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnConfig {
    pub range_smear: f64,
    pub velocity_spread: f64,
    /// Lower edge of the velocity spread, m/s.
    pub v0: f64,
    /// Velocity increment per chirp, m/s.
    pub delta_v: f64,
}

impl FnConfig {
    /// Spread centred on `v_center`, stepped evenly over `n_chirps`.
    pub fn centered(v_center: f64, range_smear: f64, velocity_spread: f64, n_chirps: usize) -> Self {
        FnConfig {
            range_smear,
            velocity_spread,
            v0: v_center - velocity_spread / 2.0,
            delta_v: velocity_spread / n_chirps.max(1) as f64,
        }
    }
}

/// One emitted chirp: a(t) = amplitude * exp(j(pi slope w^2 + phase)) for
/// w = t - emit_start in [0, duration).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackChirp {
    pub emit_start: f64,
    pub slope: f64,
    pub phase: f64,
    /// Fraction of the attacker's full-power amplitude, in [0, 1].
    pub amplitude: f64,
    pub duration: f64,
}

impl AttackChirp {
    #[inline]
    pub fn value_at(&self, t: f64) -> Option<Complex64> {
        let w = t - self.emit_start;
        (w >= 0.0 && w < self.duration).then(|| Complex64::from_polar(self.amplitude, PI * self.slope * w * w + self.phase))
    }

    pub fn end(&self) -> f64 {
        self.emit_start + self.duration
    }
}

/// Attack chirps for one victim frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub chirps: Vec<AttackChirp>,
    /// Set when the requested power exceeded the transmitter.
    pub clamped: bool,
}

impl AttackPlan {
    pub fn merge(mut self, other: AttackPlan) -> AttackPlan {
        self.chirps.extend(other.chirps);
        self.chirps.sort_by(|a, b| a.emit_start.total_cmp(&b.emit_start));
        self.clamped |= other.clamped;
        self
    }

    /// Samples the emitted waveform on `len` samples from `t0` at `rate`.
    pub fn render(&self, rate: f64, t0: f64, len: usize) -> IQBuffer {
        let mut buf = IQBuffer::zeros(len, rate, t0);
        for c in &self.chirps {
            let k0 = (((c.emit_start - t0) * rate).floor().max(0.0)) as usize;
            let k1 = ((((c.end() - t0) * rate).ceil().max(0.0)) as usize).min(len);
            for k in k0..k1 {
                if let Some(v) = c.value_at(t0 + k as f64 / rate) {
                    buf.samples[k] += v;
                }
            }
        }
        buf
    }

    /// Earliest emission start and latest end.
    pub fn span(&self) -> Option<(f64, f64)> {
        let s = self.chirps.iter().map(|c| c.emit_start).fold(f64::INFINITY, f64::min);
        let e = self.chirps.iter().map(|c| c.end()).fold(f64::NEG_INFINITY, f64::max);
        (s <= e).then_some((s, e))
    }
}

fn check_estimate(est: &VictimEstimate) -> Result<(), AttackError> {
    if !(est.s_est > 0.0) {
        return Err(AttackError::IncompleteEstimate("slope"));
    }
    if !(est.t_chirp_est > 0.0) {
        return Err(AttackError::IncompleteEstimate("chirp period"));
    }
    if !(est.carrier_hz > 0.0) {
        return Err(AttackError::IncompleteEstimate("carrier"));
    }
    Ok(())
}

fn lambda(est: &VictimEstimate) -> f64 {
    C / est.carrier_hz
}

/// Extra delay t_d' = (2 d_spoof - d_atk)/c and the Doppler phase of
/// chirp n, (4 pi / lambda)(v_spoof - v_atk/2) T n.
pub fn compute_attack_delay_doppler(
    spoof: &SpoofTarget,
    atk: &AttackerState,
    est: &VictimEstimate,
    n: usize,
) -> Result<(f64, f64), AttackError> {
    check_estimate(est)?;
    let t_d = delay_for(spoof.d_spoof, atk)?;
    let phi = 4.0 * PI / lambda(est) * (spoof.v_spoof - atk.v_atk / 2.0) * est.t_chirp_est * n as f64;
    Ok((t_d, phi))
}

fn delay_for(d: f64, atk: &AttackerState) -> Result<f64, AttackError> {
    if !(atk.d_atk > 0.0) {
        return Err(AttackError::NonPositive("d_atk"));
    }
    if 2.0 * d < atk.d_atk {
        return Err(AttackError::NegativeDelay {
            d_spoof: d,
            d_atk: atk.d_atk,
        });
    }
    Ok((2.0 * d - atk.d_atk) / C)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    pub value: f64,
    pub clamped: bool,
}

/// Amplitude that makes the one-way attack arrive with the power of a
/// 15 dBsm reflector at `d_spoof`. Attacker and victim share `budget`.
pub fn attack_amplitude(
    spoof: &SpoofTarget,
    atk: &AttackerState,
    budget: &LinkBudget,
    lambda: f64,
) -> Result<Amplitude, AttackError> {
    if !(spoof.d_spoof > 0.0) {
        return Err(AttackError::NonPositive("d_spoof"));
    }
    if !(atk.d_atk > 0.0) {
        return Err(AttackError::NonPositive("d_atk"));
    }
    let need = two_way_power(budget, lambda, RCS_MEAN_DBSM, spoof.d_spoof);
    let have = one_way_power(budget.eirp_watts(), budget.rx_gain, lambda, atk.d_atk);
    let a = (need / have).sqrt();
    Ok(if a >= 1.0 {
        Amplitude { value: 1.0, clamped: true }
    } else {
        Amplitude { value: a, clamped: false }
    })
}

/// Emission time of chirp n for a victim frame predicted to be observed at
/// `frame_start` (attacker clock).
fn emit_time(frame_start: f64, atk: &AttackerState, est: &VictimEstimate, n: usize, t_d: f64) -> f64 {
    frame_start - atk.d_atk / C + n as f64 * est.t_chirp_est + t_d
}

pub fn fp_chirp(
    n: usize,
    est: &VictimEstimate,
    spoof: &SpoofTarget,
    atk: &AttackerState,
    budget: &LinkBudget,
    frame_start: f64,
) -> Result<(AttackChirp, bool), AttackError> {
    let (t_d, phi) = compute_attack_delay_doppler(spoof, atk, est, n)?;
    let amp = attack_amplitude(spoof, atk, budget, lambda(est))?;
    Ok((
        AttackChirp {
            emit_start: emit_time(frame_start, atk, est, n, t_d),
            slope: est.s_est,
            phase: -phi,
            amplitude: amp.value,
            duration: est.t_chirp_est,
        },
        amp.clamped,
    ))
}

pub fn fp_frame(
    est: &VictimEstimate,
    spoof: &SpoofTarget,
    atk: &AttackerState,
    budget: &LinkBudget,
    frame_start: f64,
    n_chirps: usize,
) -> Result<AttackPlan, AttackError> {
    let mut chirps = Vec::with_capacity(n_chirps);
    let mut clamped = false;
    for n in 0..n_chirps {
        let (c, cl) = fp_chirp(n, est, spoof, atk, budget, frame_start)?;
        chirps.push(c);
        clamped |= cl;
    }
    Ok(AttackPlan { chirps, clamped })
}

/// Slope S' = S + 2 S smear / (c T) that spreads the victim's IF tone over
/// `range_smear` metres.
pub fn fn_slope_offset(est: &VictimEstimate, range_smear: f64) -> f64 {
    est.s_est + 2.0 * est.s_est * range_smear / (C * est.t_chirp_est)
}

/// Doppler phases from the recurrence
/// phi_{n+1} = 4 pi ((v0 + n dv) - v_atk/2) T / lambda + phi_n, phi_0 = 0.
pub fn fn_phases(fncfg: &FnConfig, atk: &AttackerState, est: &VictimEstimate, n_chirps: usize) -> Vec<f64> {
    let k = 4.0 * PI * est.t_chirp_est / lambda(est);
    let mut out = Vec::with_capacity(n_chirps);
    let mut phi = 0.0;
    for n in 0..n_chirps {
        out.push(phi);
        phi += k * ((fncfg.v0 + n as f64 * fncfg.delta_v) - atk.v_atk / 2.0);
    }
    out
}

/// Full-power smeared chirps whose range smear ends at `d_far` and whose
/// velocity spread follows `fncfg`.
fn smear_frame(
    est: &VictimEstimate,
    d_far: f64,
    atk: &AttackerState,
    fncfg: &FnConfig,
    frame_start: f64,
    n_chirps: usize,
) -> Result<AttackPlan, AttackError> {
    check_estimate(est)?;
    let t_d = delay_for(d_far, atk)?;
    let slope = fn_slope_offset(est, fncfg.range_smear);
    let phases = fn_phases(fncfg, atk, est, n_chirps);
    let chirps = phases
        .iter()
        .enumerate()
        .map(|(n, &phi)| AttackChirp {
            emit_start: emit_time(frame_start, atk, est, n, t_d),
            slope,
            phase: -phi,
            amplitude: 1.0,
            duration: est.t_chirp_est,
        })
        .collect();
    Ok(AttackPlan { chirps, clamped: false })
}

/// False-negative chirp train centred on `target`. The mismatched slope
/// pulls the IF tone down over the chirp, so the delay is aimed at the far
/// edge `d + smear/2` to centre the smear on the target. Near targets get
/// the smear [0, smear] instead: negative ranges fall outside the victim's
/// IF band, and a chirp that leaves the band part-way is easier to spot in
/// the time domain.
pub fn fn_frame(
    est: &VictimEstimate,
    target: &SpoofTarget,
    atk: &AttackerState,
    fncfg: &FnConfig,
    frame_start: f64,
    n_chirps: usize,
) -> Result<AttackPlan, AttackError> {
    if fncfg.range_smear < 0.0 {
        return Err(AttackError::NonPositive("range_smear"));
    }
    let far = (target.d_spoof + fncfg.range_smear / 2.0).max(fncfg.range_smear);
    smear_frame(est, far, atk, fncfg, frame_start, n_chirps)
}

/// Single chirp of [`fn_frame`].
pub fn fn_chirp(
    n: usize,
    est: &VictimEstimate,
    target: &SpoofTarget,
    atk: &AttackerState,
    fncfg: &FnConfig,
    frame_start: f64,
) -> Result<AttackChirp, AttackError> {
    Ok(fn_frame(est, target, atk, fncfg, frame_start, n + 1)?.chirps[n])
}

/// FN on the real target plus FP at the fake location.
#[allow(clippy::too_many_arguments)]
pub fn translation_frame(
    est: &VictimEstimate,
    real: &SpoofTarget,
    fake: &SpoofTarget,
    atk: &AttackerState,
    fncfg: &FnConfig,
    budget: &LinkBudget,
    frame_start: f64,
    n_chirps: usize,
) -> Result<AttackPlan, AttackError> {
    let f = fn_frame(est, real, atk, fncfg, frame_start, n_chirps)?;
    let p = fp_frame(est, fake, atk, budget, frame_start, n_chirps)?;
    Ok(f.merge(p))
}

/// Fraction of the jam span added beyond each range edge.
pub const JAM_TAPER_GUARD: f64 = 0.5;

/// Wide smear covering ranges [0, range_span] and velocities
/// +-velocity_span/2. Both range edges are pushed out by half a span,
/// since a tapered range window all but ignores the first and last parts
/// of the sweep, and by 3 residual sigmas of frame-start scatter (c sigma
/// / 2 each) so an early or late victim frame is still covered.
pub fn jam_frame(
    est: &VictimEstimate,
    range_span: f64,
    velocity_span: f64,
    atk: &AttackerState,
    frame_start: f64,
    n_chirps: usize,
) -> Result<AttackPlan, AttackError> {
    if !(range_span > 0.0) {
        return Err(AttackError::NonPositive("range_span"));
    }
    if velocity_span < 0.0 {
        return Err(AttackError::NonPositive("velocity_span"));
    }
    let margin = JAM_TAPER_GUARD * range_span + frame_start_residual(est).map(|s| 3.0 * s * C / 2.0).unwrap_or(0.0);
    let fncfg = FnConfig::centered(0.0, range_span + 2.0 * margin, velocity_span, n_chirps);
    smear_frame(est, range_span + margin, atk, &fncfg, frame_start, n_chirps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn est(s: f64, t: f64, f_c: f64) -> VictimEstimate {
        VictimEstimate {
            s_est: s,
            t_chirp_est: t,
            t_frame_est: 0.15,
            frame_starts: vec![0.0, 0.15],
            n_frames_observed: 2,
            sample_rate: 25e6,
            carrier_hz: f_c,
            flags: vec![],
        }
    }

    fn desk() -> VictimEstimate {
        est(5e10, 501.12e-6, 1.5e9)
    }

    #[test]
    fn delay_example() {
        let atk = AttackerState { d_atk: 15.0, v_atk: 0.0 };
        let sp = SpoofTarget { d_spoof: 75.0, v_spoof: 0.0 };
        let (t_d, _) = compute_attack_delay_doppler(&sp, &atk, &desk(), 3).unwrap();
        assert_relative_eq!(t_d * 1e9, 450.31, epsilon = 0.01);
        let sp = SpoofTarget { d_spoof: 7.5, v_spoof: 0.0 };
        assert_eq!(compute_attack_delay_doppler(&sp, &atk, &desk(), 0).unwrap().0, 0.0);
        let sp = SpoofTarget { d_spoof: 7.0, v_spoof: 0.0 };
        assert!(matches!(
            compute_attack_delay_doppler(&sp, &atk, &desk(), 0),
            Err(AttackError::NegativeDelay { .. })
        ));
    }

    #[test]
    fn half_attacker_velocity_cancels_doppler() {
        let atk = AttackerState { d_atk: 15.0, v_atk: 6.0 };
        let sp = SpoofTarget { d_spoof: 75.0, v_spoof: 3.0 };
        for n in 0..10 {
            assert_eq!(compute_attack_delay_doppler(&sp, &atk, &desk(), n).unwrap().1, 0.0);
        }
        let plan = fp_frame(&desk(), &sp, &atk, &LinkBudget::default(), 0.1, 8).unwrap();
        for w in plan.chirps.windows(2) {
            assert_eq!(w[0].phase, w[1].phase);
            assert_eq!(w[0].slope, w[1].slope);
            assert_relative_eq!(w[1].emit_start - w[0].emit_start, 501.12e-6, max_relative = 1e-9);
        }
    }

    #[test]
    fn doubling_range_quarters_amplitude() {
        let atk = AttackerState { d_atk: 50.0, v_atk: 0.0 };
        let b = LinkBudget::default();
        let a1 = attack_amplitude(&SpoofTarget { d_spoof: 60.0, v_spoof: 0.0 }, &atk, &b, 0.2).unwrap();
        let a2 = attack_amplitude(&SpoofTarget { d_spoof: 120.0, v_spoof: 0.0 }, &atk, &b, 0.2).unwrap();
        assert!(!a1.clamped && !a2.clamped);
        assert_relative_eq!(a1.value / a2.value, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn clamp_at_transmitter_limit() {
        let atk = AttackerState { d_atk: 100.0, v_atk: 0.0 };
        let b = LinkBudget::default();
        // Equal power when d^4 = sigma d_atk^2 / (4 pi).
        let d_eq = (10f64.powf(1.5) * 1e4 / (4.0 * PI)).powf(0.25);
        let a = attack_amplitude(&SpoofTarget { d_spoof: d_eq * 0.999, v_spoof: 0.0 }, &atk, &b, 0.2).unwrap();
        assert!(a.clamped && a.value == 1.0);
        let a = attack_amplitude(&SpoofTarget { d_spoof: d_eq * 1.001, v_spoof: 0.0 }, &atk, &b, 0.2).unwrap();
        assert!(!a.clamped && a.value < 1.0);
    }

    #[test]
    fn config_c_slope_offset() {
        let e = est(47.85e12, 20.93e-6, 77e9);
        let ds = fn_slope_offset(&e, 2.0) - e.s_est;
        assert_relative_eq!(ds / 1e12, 0.0305, epsilon = 5e-4);
        assert_relative_eq!(fn_slope_offset(&e, 1e-12), e.s_est, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_fn_is_fp() {
        let e = desk();
        let atk = AttackerState { d_atk: 20.0, v_atk: -4.0 };
        let tgt = SpoofTarget { d_spoof: 80.0, v_spoof: -5.0 };
        let fncfg = FnConfig::centered(tgt.v_spoof, 0.0, 0.0, 16);
        let f = fn_frame(&e, &tgt, &atk, &fncfg, 0.2, 16).unwrap();
        let p = fp_frame(&e, &tgt, &atk, &LinkBudget::default(), 0.2, 16).unwrap();
        for (a, b) in f.chirps.iter().zip(&p.chirps) {
            assert_eq!(a.slope, b.slope);
            assert_relative_eq!(a.emit_start, b.emit_start, max_relative = 1e-15);
            assert_relative_eq!(a.phase, b.phase, epsilon = 1e-9);
        }
    }

    #[test]
    fn tiny_jam_is_fp_at_its_far_edge() {
        let e = desk();
        let atk = AttackerState { d_atk: 1e-4, v_atk: 2.0 };
        let j = jam_frame(&e, 1e-3, 0.0, &atk, 0.2, 8).unwrap();
        let sp = SpoofTarget { d_spoof: 1e-3 * (1.0 + JAM_TAPER_GUARD), v_spoof: 0.0 };
        let p = fp_frame(&e, &sp, &atk, &LinkBudget::default(), 0.2, 8).unwrap();
        for (a, b) in j.chirps.iter().zip(&p.chirps) {
            assert_relative_eq!(a.slope, b.slope, max_relative = 1e-6);
            assert_relative_eq!(a.emit_start, b.emit_start, max_relative = 1e-15);
            assert_relative_eq!(a.phase, b.phase, epsilon = 1e-9);
        }
    }

    #[test]
    fn recurrence_spreads_velocity() {
        let e = desk();
        let atk = AttackerState { d_atk: 20.0, v_atk: 0.0 };
        let cfg = FnConfig::centered(-5.0, 100.0, 20.0, 256);
        assert_relative_eq!(cfg.v0, -15.0);
        assert_relative_eq!(cfg.delta_v * 256.0, 20.0);
        let ph = fn_phases(&cfg, &atk, &e, 256);
        assert_eq!(ph[0], 0.0);
        // Step n is the velocity v0 + n dv expressed as a phase increment.
        for n in [0usize, 100, 254] {
            let v = (ph[n + 1] - ph[n]) / (4.0 * PI * e.t_chirp_est / (C / 1.5e9));
            assert_relative_eq!(v, -15.0 + n as f64 * cfg.delta_v, epsilon = 1e-9);
        }
    }

    #[test]
    fn render_places_chirps() {
        let c = AttackChirp {
            emit_start: 1e-6,
            slope: 1e12,
            phase: 0.5,
            amplitude: 0.25,
            duration: 2e-6,
        };
        let plan = AttackPlan { chirps: vec![c], clamped: false };
        let b = plan.render(10e6, 0.0, 50);
        assert_eq!(b.samples[9], Complex64::new(0.0, 0.0));
        assert!((b.samples[10] - Complex64::from_polar(0.25, 0.5)).norm() < 1e-12);
        assert!(b.samples[29].norm() > 0.2);
        assert_eq!(b.samples[30], Complex64::new(0.0, 0.0));
    }
}
