//! Black-box estimation of a victim's chirp slope, chirp period and frame
//! period from a band-limited capture of its transmissions.
//!
//! Per frame: power detector, STFT, peak tracks, least-squares line fits,
//! then two refinements (cross-correlation of the frame head and a
//! quadratic fit to the dechirped phase of every chirp). Across frames the
//! per-chirp values are IQR-filtered and averaged.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::stats::{iqr_mean, median, ols};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("no frame detected")]
    NoFrameDetected,
    #[error("buffer holds {got} samples, need at least {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("track needs at least 3 points with distinct times")]
    Degenerate,
    #[error("need at least {needed} frame starts, got {got}")]
    InsufficientFrames { needed: usize, got: usize },
    #[error("no chirps found in the captured frame")]
    NoChirps,
}

/// Tunables of the estimator. Defaults follow a 25 MHz capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// STFT window and hop, s.
    pub window_s: f64,
    /// Power detector averaging length, samples.
    pub detect_len: usize,
    pub detect_margin_db: f64,
    /// Extra windows that must stay above threshold.
    pub detect_hold: usize,
    /// Column peak must exceed the column median by this much.
    pub prominence_db: f64,
    /// ...and the median of the whole spectrogram by this much.
    pub floor_margin_db: f64,
    pub max_gap_cols: usize,
    pub min_track_points: usize,
    /// Samples analysed after the detected frame start, s.
    pub capture_s: f64,
    pub xcorr_span_s: f64,
    pub xcorr_max_lag: usize,
    pub xcorr_min_ratio: f64,
    pub phase_iters: usize,
    /// Lower band edge relative to the victim start frequency, Hz.
    pub f_low: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            window_s: 2e-6,
            detect_len: 16,
            detect_margin_db: 10.0,
            detect_hold: 2,
            prominence_db: 6.0,
            floor_margin_db: 12.0,
            max_gap_cols: 2,
            min_track_points: 3,
            capture_s: 2.1e-3,
            xcorr_span_s: 10e-6,
            xcorr_max_lag: 64,
            xcorr_min_ratio: 3.0,
            phase_iters: 3,
            f_low: 0.0,
        }
    }
}

/// Mean power of `samples`, dB.
fn power_db(samples: &[Complex64]) -> f64 {
    let p: f64 = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    10.0 * p.log10()
}

/// Noise floor guess for a recording with unknown receiver noise: the
/// 10th percentile of `len`-sample mean powers, dB.
pub fn estimate_noise_floor_db(buf: &[Complex64], len: usize) -> f64 {
    let mut p: Vec<f64> = buf.chunks_exact(len).map(power_db).collect();
    if p.is_empty() {
        return f64::NEG_INFINITY;
    }
    p.sort_by(f64::total_cmp);
    p[p.len() / 10]
}

/// First sample of the first `detect_len` window whose mean power clears
/// `noise_floor_db + detect_margin_db` and stays clear for `detect_hold`
/// further windows.
pub fn detect_frame_start(
    stream: &[Complex64],
    noise_floor_db: f64,
    cfg: &EstimatorConfig,
) -> Result<usize, EstimationError> {
    let w = cfg.detect_len;
    if stream.len() < w {
        return Err(EstimationError::TooShort {
            needed: w,
            got: stream.len(),
        });
    }
    let thr = 10f64.powf((noise_floor_db + cfg.detect_margin_db) / 10.0);
    let thr_sum = thr * w as f64;
    let pw: Vec<f64> = stream.iter().map(|s| s.norm_sqr()).collect();
    let mut sum: f64 = pw[..w].iter().sum();
    let window_sum = |end: usize| -> f64 { pw[end - w..end].iter().sum() };
    for end in w..=stream.len() {
        if end > w {
            sum += pw[end - 1] - pw[end - 1 - w];
        }
        // Re-sum exactly before deciding so drift never triggers a detection.
        if sum > thr_sum && window_sum(end) > thr_sum {
            let held = (1..=cfg.detect_hold)
                .map(|h| end + h * w)
                .take_while(|&e| e <= stream.len())
                .all(|e| window_sum(e) > thr_sum);
            if held {
                let first = (end - w..end).find(|&k| pw[k] > thr).unwrap_or(end - w);
                return Ok(first);
            }
        }
    }
    Err(EstimationError::NoFrameDetected)
}

/// Short-time spectrum, dB, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_bins: usize,
    pub n_cols: usize,
    pub db: Vec<f64>,
    pub window_len: usize,
    pub rate: f64,
    pub t0: f64,
}

impl Spectrogram {
    pub fn column(&self, k: usize) -> &[f64] {
        &self.db[k * self.n_bins..(k + 1) * self.n_bins]
    }

    pub fn hop(&self) -> f64 {
        self.window_len as f64 / self.rate
    }

    /// Centre time of column `k`.
    pub fn col_time(&self, k: usize) -> f64 {
        self.t0 + (k as f64 * self.window_len as f64 + (self.window_len as f64 - 1.0) / 2.0) / self.rate
    }

    /// Frequency of bin `j`; bins cover [0, rate).
    pub fn bin_freq(&self, j: usize) -> f64 {
        j as f64 * self.rate / self.n_bins as f64
    }
}

/// Hann-windowed STFT with hop equal to the window.
pub fn spectrogram(samples: &[Complex64], rate: f64, t0: f64, window_s: f64) -> Result<Spectrogram, EstimationError> {
    let w = ((window_s * rate).round() as usize).max(2);
    if samples.len() < w {
        return Err(EstimationError::TooShort {
            needed: w,
            got: samples.len(),
        });
    }
    let n_cols = samples.len() / w;
    let win = crate::victim::hann_window(w);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(w);
    let mut db = Vec::with_capacity(n_cols * w);
    let mut buf = vec![Complex64::new(0.0, 0.0); w];
    for k in 0..n_cols {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = samples[k * w + i] * win[i];
        }
        fft.process(&mut buf);
        db.extend(buf.iter().map(|x| 10.0 * x.norm_sqr().log10()));
    }
    Ok(Spectrogram {
        n_bins: w,
        n_cols,
        db,
        window_len: w,
        rate,
        t0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpTrack {
    /// (time s, frequency Hz), time-sorted.
    pub points: Vec<(f64, f64)>,
    pub fitted_slope: f64,
    pub fitted_start: f64,
}

impl ChirpTrack {
    fn new(points: Vec<(f64, f64)>) -> Self {
        ChirpTrack {
            points,
            fitted_slope: f64::NAN,
            fitted_start: f64::NAN,
        }
    }
}

/// Groups column peaks into rising ramps.
pub fn extract_chirp_tracks(spec: &Spectrogram, cfg: &EstimatorConfig) -> Vec<ChirpTrack> {
    let global = median(&spec.db).unwrap_or(f64::NEG_INFINITY);
    let mut tracks = Vec::new();
    let mut cur: Vec<(f64, f64)> = Vec::new();
    let mut last_col = 0usize;
    let flush = |cur: &mut Vec<(f64, f64)>, tracks: &mut Vec<ChirpTrack>| {
        if cur.len() >= cfg.min_track_points {
            tracks.push(ChirpTrack::new(std::mem::take(cur)));
        } else {
            cur.clear();
        }
    };
    for k in 0..spec.n_cols {
        let col = spec.column(k);
        let (j, peak) = col
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty column");
        let med = median(col).expect("non-empty column");
        if !(peak >= med + cfg.prominence_db && peak >= global + cfg.floor_margin_db) {
            continue;
        }
        let f = spec.bin_freq(j);
        let t = spec.col_time(k);
        if let Some(&(_, f_prev)) = cur.last() {
            let gap = k - last_col - 1;
            if f_prev - f > spec.rate / 2.0 || gap > cfg.max_gap_cols {
                flush(&mut cur, &mut tracks);
            }
        }
        cur.push((t, f));
        last_col = k;
    }
    flush(&mut cur, &mut tracks);
    tracks
}

/// Least-squares line through a track; returns (slope, start time) with the
/// start at the band's lower edge `f_low`.
pub fn fit_chirp(track: &ChirpTrack, f_low: f64) -> Result<(f64, f64), EstimationError> {
    if track.points.len() < 3 {
        return Err(EstimationError::Degenerate);
    }
    let (t, f): (Vec<f64>, Vec<f64>) = track.points.iter().copied().unzip();
    let fit = ols(&t, &f).ok_or(EstimationError::Degenerate)?;
    if fit.slope == 0.0 {
        return Err(EstimationError::Degenerate);
    }
    Ok((fit.slope, (f_low - fit.intercept) / fit.slope))
}

/// Cross-correlates the first `xcorr_span_s` after `coarse` with a
/// reference chirp of slope `slope`. Returns the refined start and whether
/// the correlation peak was convincing; low confidence keeps `coarse`.
pub fn refine_frame_start(
    samples: &[Complex64],
    rate: f64,
    t0: f64,
    slope: f64,
    coarse: f64,
    cfg: &EstimatorConfig,
) -> (f64, bool) {
    let n_ref = (cfg.xcorr_span_s * rate).round() as usize;
    let reference: Vec<Complex64> = (0..n_ref)
        .map(|m| {
            let u = m as f64 / rate;
            Complex64::from_polar(1.0, PI * slope * u * u)
        })
        .collect();
    let k0 = ((coarse - t0) * rate).round() as isize;
    let max_lag = cfg.xcorr_max_lag as isize;
    let mut mags = Vec::with_capacity(2 * cfg.xcorr_max_lag + 1);
    for lag in -max_lag..=max_lag {
        let start = k0 + lag;
        if start < 0 || start as usize + n_ref > samples.len() {
            mags.push(0.0);
            continue;
        }
        let s = start as usize;
        let acc: Complex64 = samples[s..s + n_ref]
            .iter()
            .zip(&reference)
            .map(|(x, r)| x * r.conj())
            .sum();
        mags.push(acc.norm());
    }
    let (imax, &peak) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty lag range");
    let rms = (mags.iter().map(|m| m * m).sum::<f64>() / mags.len() as f64).sqrt();
    if !(peak > cfg.xcorr_min_ratio * rms) {
        return (coarse, false);
    }
    // Parabolic interpolation around the peak.
    let mut frac = 0.0;
    if imax > 0 && imax + 1 < mags.len() {
        let (a, b, c) = (mags[imax - 1], mags[imax], mags[imax + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            frac = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    let lag = imax as f64 - max_lag as f64 + frac;
    (t0 + (k0 as f64 + lag) / rate, true)
}

/// Dechirps one chirp with the current (slope, start) guess and fits a
/// quadratic to the unwrapped residual phase over (start, end). Returns the
/// corrected pair, or `None` when the fit is not trustworthy.
pub fn refine_chirp_phase(
    samples: &[Complex64],
    rate: f64,
    t0: f64,
    slope: f64,
    start: f64,
    end: f64,
) -> Option<(f64, f64)> {
    const BLOCK: usize = 4;
    let margin = 2e-6;
    let lo = ((start + margin - t0) * rate).ceil().max(0.0) as usize;
    let hi = (((end - margin - t0) * rate).floor().max(0.0) as usize).min(samples.len());
    if hi <= lo || hi - lo < 32 * BLOCK {
        return None;
    }
    let mut blocks: Vec<(f64, Complex64)> = Vec::with_capacity((hi - lo) / BLOCK);
    let mut k = lo;
    while k + BLOCK <= hi {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut ub = 0.0;
        for i in k..k + BLOCK {
            let u = t0 + i as f64 / rate - start;
            acc += samples[i] * Complex64::from_polar(1.0, -PI * slope * u * u);
            ub += u;
        }
        blocks.push((ub / BLOCK as f64, acc / BLOCK as f64));
        k += BLOCK;
    }
    // Longest run of blocks carrying the chirp.
    let mags: Vec<f64> = blocks.iter().map(|b| b.1.norm()).collect();
    let med = median(&mags)?;
    let (mut best, mut run_start) = ((0, 0), 0);
    for i in 0..=mags.len() {
        if i == mags.len() || mags[i] < 0.5 * med {
            if i - run_start > best.1 - best.0 {
                best = (run_start, i);
            }
            run_start = i + 1;
        }
    }
    let run = &blocks[best.0..best.1];
    if run.len() < 32 {
        return None;
    }
    let mut theta = Vec::with_capacity(run.len());
    let mut prev = run[0].1.arg();
    let mut offset = 0.0;
    for (_, z) in run {
        let a = z.arg();
        let d = a - prev;
        if d > PI {
            offset -= 2.0 * PI;
        } else if d < -PI {
            offset += 2.0 * PI;
        }
        prev = a;
        theta.push(a + offset);
    }
    let u: Vec<f64> = run.iter().map(|b| b.0).collect();
    let (qa, qb, qc) = quad_fit(&u, &theta)?;
    let resid = u
        .iter()
        .zip(&theta)
        .map(|(&x, &y)| (y - (qa * x * x + qb * x + qc)).powi(2))
        .sum::<f64>()
        / u.len() as f64;
    let new_slope = slope + qa / PI;
    let shift = -qb / (2.0 * PI * new_slope);
    if !(resid.sqrt() < 0.5) || (qa / PI).abs() > 0.02 * slope.abs() || shift.abs() > 10e-6 {
        return None;
    }
    Some((new_slope, start + shift))
}

/// Least squares y = a x^2 + b x + c, solved on standardised x.
fn quad_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    if !(sx > 0.0) {
        return None;
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mx) / sx).collect();
    // Normal equations for [z^2, z, 1].
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&zi, &yi) in z.iter().zip(y) {
        let phi = [zi * zi, zi, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            r[i] += phi[i] * yi;
        }
    }
    let [al, be, ga] = solve3(m, r)?;
    let a = al / (sx * sx);
    let b = be / sx - 2.0 * al * mx / (sx * sx);
    let c = ga - be * mx / sx + al * mx * mx / (sx * sx);
    Some((a, b, c))
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Fitted chirps of one observed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFit {
    /// (slope Hz/s, start s) per chirp, start-sorted.
    pub chirps: Vec<(f64, f64)>,
    pub frame_start: f64,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VictimEstimate {
    pub s_est: f64,
    pub t_chirp_est: f64,
    /// Zero until two frames have been seen.
    pub t_frame_est: f64,
    /// Observed frame starts on the attacker's clock, increasing.
    pub frame_starts: Vec<f64>,
    pub n_frames_observed: usize,
    pub sample_rate: f64,
    /// Victim start frequency the capture was tuned to, Hz.
    pub carrier_hz: f64,
    pub flags: Vec<String>,
}

impl VictimEstimate {
    /// Frame index of every start, counted in estimated frame periods from
    /// the first so a missed frame does not bend the regression.
    pub fn frame_indices(&self) -> Vec<f64> {
        let s0 = self.frame_starts.first().copied().unwrap_or(0.0);
        if !(self.t_frame_est > 0.0) {
            return (0..self.frame_starts.len()).map(|i| i as f64).collect();
        }
        self.frame_starts
            .iter()
            .map(|s| ((s - s0) / self.t_frame_est).round())
            .collect()
    }
}

/// Rounds each difference to a whole number of periods around the median
/// so a skipped chirp or frame still yields a period sample.
fn period_samples(diffs: &[f64]) -> Vec<f64> {
    let Some(base) = median(diffs) else {
        return Vec::new();
    };
    if !(base > 0.0) {
        return Vec::new();
    }
    diffs
        .iter()
        .filter_map(|&d| {
            let k = (d / base).round();
            (k >= 1.0).then(|| d / k)
        })
        .collect()
}

/// IQR-filtered means over all fitted chirps and frame starts.
pub fn aggregate_estimates(
    frames: &[FrameFit],
    sample_rate: f64,
    carrier_hz: f64,
) -> Result<VictimEstimate, EstimationError> {
    if frames.is_empty() {
        return Err(EstimationError::InsufficientFrames { needed: 1, got: 0 });
    }
    let slopes: Vec<f64> = frames.iter().flat_map(|f| f.chirps.iter().map(|c| c.0)).collect();
    let s_est = iqr_mean(&slopes).ok_or(EstimationError::NoChirps)?;
    let diffs: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.chirps.windows(2).map(|w| w[1].1 - w[0].1))
        .collect();
    let t_chirp_est = iqr_mean(&period_samples(&diffs)).unwrap_or(0.0);
    let starts: Vec<f64> = frames.iter().map(|f| f.frame_start).collect();
    let fdiffs: Vec<f64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
    let t_frame_est = iqr_mean(&period_samples(&fdiffs)).unwrap_or(0.0);
    let mut flags = Vec::new();
    let n_low = frames.iter().filter(|f| f.low_confidence).count();
    if n_low > 0 {
        flags.push(format!("{n_low} frame start(s) kept their coarse estimate"));
    }
    if t_chirp_est == 0.0 {
        flags.push("chirp period unavailable".to_string());
    }
    Ok(VictimEstimate {
        s_est,
        t_chirp_est,
        t_frame_est,
        frame_starts: starts,
        n_frames_observed: frames.len(),
        sample_rate,
        carrier_hz,
        flags,
    })
}

/// Start of the frame `k` periods after the last observed one, from an
/// ordinary least-squares line through (index, start).
pub fn predict_next_frame(est: &VictimEstimate, k: usize) -> Result<f64, EstimationError> {
    let n = est.frame_starts.len();
    if n < 2 {
        return Err(EstimationError::InsufficientFrames { needed: 2, got: n });
    }
    let idx = est.frame_indices();
    let fit = ols(&idx, &est.frame_starts).ok_or(EstimationError::InsufficientFrames { needed: 2, got: n })?;
    Ok(fit.eval(idx[n - 1] + k as f64))
}

/// Residual standard deviation of the frame starts about their OLS line.
pub fn frame_start_residual(est: &VictimEstimate) -> Result<f64, EstimationError> {
    let n = est.frame_starts.len();
    if n < 3 {
        return Err(EstimationError::InsufficientFrames { needed: 3, got: n });
    }
    let idx = est.frame_indices();
    let fit = ols(&idx, &est.frame_starts).ok_or(EstimationError::InsufficientFrames { needed: 3, got: n })?;
    let ssr: f64 = idx
        .iter()
        .zip(&est.frame_starts)
        .map(|(&i, &s)| (s - fit.eval(i)).powi(2))
        .sum();
    Ok((ssr / (n as f64 - 2.0)).sqrt())
}

/// Flags frame-start randomisation when the residual spread exceeds
/// max(3 sample periods, 0.5 us).
pub fn detect_randomization(est: &VictimEstimate) -> Result<bool, EstimationError> {
    let n = est.frame_starts.len();
    if n < 5 {
        return Err(EstimationError::InsufficientFrames { needed: 5, got: n });
    }
    let limit = (3.0 / est.sample_rate).max(0.5e-6);
    Ok(frame_start_residual(est)? > limit)
}

/// Frame-by-frame estimator state.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub cfg: EstimatorConfig,
    pub sample_rate: f64,
    pub carrier_hz: f64,
    pub frames: Vec<FrameFit>,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig, sample_rate: f64, carrier_hz: f64) -> Self {
        Estimator {
            cfg,
            sample_rate,
            carrier_hz,
            frames: Vec::new(),
        }
    }

    /// Analyses one capture holding the head of a frame (`t0` is the time
    /// of sample 0 on the attacker's clock) and records its fit.
    pub fn observe(&mut self, samples: &[Complex64], t0: f64, noise_floor_db: f64) -> Result<&FrameFit, EstimationError> {
        let fit = analyse_frame(samples, self.sample_rate, t0, noise_floor_db, &self.cfg, self.prior_slope())?;
        self.frames.push(fit);
        Ok(self.frames.last().expect("just pushed"))
    }

    fn prior_slope(&self) -> Option<f64> {
        let s: Vec<f64> = self.frames.iter().flat_map(|f| f.chirps.iter().map(|c| c.0)).collect();
        iqr_mean(&s)
    }

    pub fn estimate(&self) -> Result<VictimEstimate, EstimationError> {
        aggregate_estimates(&self.frames, self.sample_rate, self.carrier_hz)
    }
}

/// Detector, spectrogram, tracks, fits and refinements for one frame.
pub fn analyse_frame(
    samples: &[Complex64],
    rate: f64,
    t0: f64,
    noise_floor_db: f64,
    cfg: &EstimatorConfig,
    prior_slope: Option<f64>,
) -> Result<FrameFit, EstimationError> {
    let k0 = detect_frame_start(samples, noise_floor_db, cfg)?;
    let w = ((cfg.window_s * rate).round() as usize).max(2);
    let from = k0.saturating_sub(2 * w);
    let to = (k0 + (cfg.capture_s * rate).round() as usize).min(samples.len());
    let seg = &samples[from..to];
    let seg_t0 = t0 + from as f64 / rate;
    let spec = spectrogram(seg, rate, seg_t0, cfg.window_s)?;
    let detect_t = t0 + k0 as f64 / rate;

    let mut coarse: Vec<(f64, f64, f64)> = Vec::new(); // slope, start, end
    for tr in extract_chirp_tracks(&spec, cfg) {
        if let Ok((s, st)) = fit_chirp(&tr, cfg.f_low) {
            let end = tr.points.last().expect("fitted track").0 + spec.hop() / 2.0;
            if s > 0.0 && st > detect_t - 5e-6 {
                coarse.push((s, st, end));
            }
        }
    }
    if coarse.is_empty() {
        return Err(EstimationError::NoChirps);
    }
    let frame_slope = prior_slope.unwrap_or_else(|| median(&coarse.iter().map(|c| c.0).collect::<Vec<_>>()).expect("non-empty"));

    let seg_end = seg_t0 + seg.len() as f64 / rate;
    let mut low_confidence = false;
    let mut chirps = Vec::with_capacity(coarse.len());
    for (i, &(s, st, end)) in coarse.iter().enumerate() {
        let mut start = st;
        if i == 0 {
            let (r, ok) = refine_frame_start(seg, rate, seg_t0, frame_slope, st, cfg);
            start = r;
            low_confidence = !ok;
        }
        let mut slope = s;
        let end = end.min(seg_end);
        for _ in 0..cfg.phase_iters {
            match refine_chirp_phase(seg, rate, seg_t0, slope, start, end) {
                Some((ns, nt)) => {
                    slope = ns;
                    start = nt;
                }
                None => break,
            }
        }
        chirps.push((slope, start));
    }
    chirps.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(FrameFit {
        frame_start: chirps[0].1,
        chirps,
        low_confidence,
    })
}

/// Splits a recording into per-frame segments wherever the detector power
/// stays below threshold for longer than `min_gap_s`. Returns
/// (first sample, one-past-last sample) pairs.
pub fn segment_frames(
    samples: &[Complex64],
    rate: f64,
    noise_floor_db: f64,
    min_gap_s: f64,
    cfg: &EstimatorConfig,
) -> Vec<(usize, usize)> {
    let w = cfg.detect_len;
    let thr = 10f64.powf((noise_floor_db + cfg.detect_margin_db) / 10.0);
    let gap_windows = ((min_gap_s * rate) / w as f64).ceil() as usize;
    let active: Vec<bool> = samples
        .chunks_exact(w)
        .map(|c| c.iter().map(|s| s.norm_sqr()).sum::<f64>() / w as f64 > thr)
        .collect();
    let mut out = Vec::new();
    let mut seg_start: Option<usize> = None;
    let mut last_active = 0;
    for (i, &a) in active.iter().enumerate() {
        if a {
            if seg_start.is_none() {
                seg_start = Some(i);
            }
            last_active = i;
        } else if let Some(s) = seg_start {
            if i - last_active > gap_windows {
                out.push((s, last_active + 1));
                seg_start = None;
            }
        }
    }
    if let Some(s) = seg_start {
        out.push((s, last_active + 1));
    }
    let lead = 4 * w;
    out.into_iter()
        .map(|(a, b)| ((a * w).saturating_sub(lead), (b * w).min(samples.len())))
        .collect()
}
