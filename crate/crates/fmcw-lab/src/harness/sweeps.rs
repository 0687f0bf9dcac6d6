//! Monte-Carlo sweeps over randomized geometry. Trial `i` draws everything
//! from a stream keyed by mix(seed, i), so results are independent of the
//! order trials run in and of the thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::config::{AttackSpec, ScenarioConfig, VictimSpec};
use super::scenario::{crossover_range, run_scenario, FrameRecord, ScenarioResult};
use super::HarnessError;
use crate::channel::{sample_rcs_with, Target};
use crate::par::map_indexed;
use crate::rng::{ids, mix, stream};
use crate::stats::{ecdf, mean, percentile};
use crate::waveforms::RadarConfig;

/// Width of the PD/PFA range bins, m.
pub const BIN_WIDTH_M: f64 = 5.0;
pub const N_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// FP attacks on an empty scene; spoofing accuracy.
    Accuracy,
    /// none / fp / fn on one random target; PD and PFA per range bin.
    Pdpfa,
    /// Translation of a real target to a fake velocity.
    Translation,
    /// Paired none / fn runs with IF kurtosis and map-median recording.
    Stealth,
    /// Jam against the configured (typically jittered) victim.
    Jam,
    /// Randomized victims; chirp, slope and frame-start estimation errors.
    Estimation,
}

impl SweepMode {
    pub const ALL: [SweepMode; 6] = [
        SweepMode::Accuracy,
        SweepMode::Pdpfa,
        SweepMode::Translation,
        SweepMode::Stealth,
        SweepMode::Jam,
        SweepMode::Estimation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Accuracy => "accuracy",
            SweepMode::Pdpfa => "pdpfa",
            SweepMode::Translation => "translation",
            SweepMode::Stealth => "stealth",
            SweepMode::Jam => "jam",
            SweepMode::Estimation => "estimation",
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SweepMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown sweep mode {s:?} (expected one of accuracy, pdpfa, translation, stealth, jam, estimation)"))
    }
}

/// Count and fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
    pub rate: Option<f64>,
}

impl Rate {
    pub fn new(hits: usize, total: usize) -> Rate {
        Rate {
            hits,
            total,
            rate: (total > 0).then(|| hits as f64 / total as f64),
        }
    }

    fn add(&mut self, hit: bool) {
        *self = Rate::new(self.hits + hit as usize, self.total + 1);
    }
}

impl Default for Rate {
    fn default() -> Self {
        Rate::new(0, 0)
    }
}

/// Absolute-error statistics. The trimmed figures drop values above the
/// 95th percentile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mean: Option<f64>,
    pub p90: Option<f64>,
    pub p95: Option<f64>,
    pub trimmed_mean: Option<f64>,
    pub trimmed_p90: Option<f64>,
}

impl ErrorStats {
    pub fn from_values(xs: &[f64]) -> ErrorStats {
        let p95 = percentile(xs, 95.0);
        let kept: Vec<f64> = match p95 {
            Some(cut) => xs.iter().copied().filter(|&x| x <= cut).collect(),
            None => Vec::new(),
        };
        ErrorStats {
            n: xs.len(),
            mean: mean(xs),
            p90: percentile(xs, 90.0),
            p95,
            trimmed_mean: mean(&kept),
            trimmed_p90: percentile(&kept, 90.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofStats {
    /// Attack frames (planned or skipped) whose spoof landed in the gate.
    pub success: Rate,
    pub range_error_m: ErrorStats,
    pub velocity_error_mps: ErrorStats,
}

/// Spoofing accuracy pooled over the attack frames of `results`. Frames
/// the attacker had to skip count as failures.
pub fn spoof_accuracy_report(results: &[ScenarioResult]) -> SpoofStats {
    let (rs, vs, success) = spoof_errors(results);
    SpoofStats {
        success,
        range_error_m: ErrorStats::from_values(&rs),
        velocity_error_mps: ErrorStats::from_values(&vs),
    }
}

fn spoof_errors(results: &[ScenarioResult]) -> (Vec<f64>, Vec<f64>, Rate) {
    let (mut rs, mut vs, mut success) = (Vec::new(), Vec::new(), Rate::default());
    for f in results.iter().flat_map(|r| &r.frames).filter(|f| f.attacked || f.skipped) {
        let ok = f.outcome.spoof_success == Some(true);
        success.add(ok);
        if let (true, Some(e)) = (ok, f.outcome.spoof_error) {
            rs.push(e.range_m);
            vs.push(e.velocity_mps);
        }
    }
    (rs, vs, success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lo_m: f64,
    pub hi_m: f64,
    pub pd: Rate,
    pub pfa: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdPfaSummary {
    pub attack: String,
    pub pd: Rate,
    pub pfa: Rate,
    /// PD over frames with the target inside `nominal_region_m`.
    pub pd_nominal: Rate,
    /// PD over nominal-region frames beyond the trial's crossover range.
    pub pd_beyond_crossover: Rate,
    pub bins: Vec<BinStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealthStats {
    /// [1st, 99th] percentile of the no-attack per-chirp IF kurtosis.
    pub kurtosis_band: Option<[f64; 2]>,
    /// FN-attacked chirps whose kurtosis lies in the band.
    pub fn_kurtosis_in_band: Rate,
    /// Per-frame rise of the off-target map median, fn minus none, dB.
    pub median_rise_db: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JamStats {
    pub randomization_flagged: Rate,
    pub pd: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationStats {
    /// Trials whose attacker produced a usable estimate.
    pub completed: Rate,
    pub t_chirp_error_s: ErrorStats,
    pub slope_rel_error: ErrorStats,
    pub prediction_error_s: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: SweepMode,
    pub seed: u64,
    pub trials: usize,
    /// Range interval where the victim's CFAR can test a target, m.
    pub nominal_region_m: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spoof: Option<SpoofStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pdpfa: Vec<PdPfaSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stealth: Option<StealthStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jam: Option<JamStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationStats>,
}

/// One scenario run. Ranges are taken at the middle of the first attack
/// frame; `eval_frames` are the frames from `attack_start_frame` on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub attack: String,
    pub target_range_m: Option<f64>,
    pub target_velocity_mps: Option<f64>,
    pub rcs_dbsm: Option<f64>,
    pub attacker_range_m: Option<f64>,
    pub attacker_velocity_mps: Option<f64>,
    pub crossover_m: Option<f64>,
    pub spoof_range_m: Option<f64>,
    pub spoof_velocity_mps: Option<f64>,
    pub eval_frames: usize,
    pub skipped_frames: usize,
    pub detected_frames: usize,
    pub fp_frames: usize,
    pub spoof_hits: usize,
    pub translation_hits: usize,
    pub mean_range_error_m: Option<f64>,
    pub mean_velocity_error_mps: Option<f64>,
    pub max_prediction_error_s: Option<f64>,
    pub randomization_detected: Option<bool>,
    pub t_chirp_error_s: Option<f64>,
    pub slope_rel_error: Option<f64>,
}

/// Empirical CDF of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    pub metric: String,
    pub points: Vec<(f64, f64)>,
}

impl Cdf {
    fn of(metric: &str, xs: &[f64]) -> Cdf {
        Cdf {
            metric: metric.to_string(),
            points: ecdf(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub summary: Summary,
    pub rows: Vec<TrialRow>,
    pub cdfs: Vec<Cdf>,
}

/// Range where every CFAR training window fits: from one full reach past
/// the first testable bin to 150 m or the last testable bin.
pub fn nominal_region(radar: &RadarConfig, base: &ScenarioConfig) -> [f64; 2] {
    let rb = radar.range_bin_m();
    let reach = base.cfar.reach_r();
    let last = radar.range_fft_len().saturating_sub(reach + 1) as f64 * rb;
    [(reach + 1) as f64 * rb, last.min(N_BINS as f64 * BIN_WIDTH_M)]
}

fn trial_rng(seed: u64, i: usize) -> (u64, ChaCha8Rng) {
    let s = mix(seed, i as u64);
    (s, stream(s, ids::TRIAL))
}

/// Middle of frame `k` on the nominal (unjittered) schedule.
fn frame_mid(radar: &RadarConfig, k: usize) -> f64 {
    (k - 1) as f64 * radar.t_frame + radar.n_chirps as f64 * radar.t_chirp / 2.0
}

/// A target that passes (d, v) at time t.
fn through(d: f64, v: f64, rcs: f64, t: f64) -> Target {
    Target { d0: d - v * t, v, rcs }
}

struct Draw {
    seed: u64,
    cfg: ScenarioConfig,
    target: Option<(f64, f64, f64)>,
    crossover: Option<f64>,
}

impl Draw {
    /// Base config re-seeded, with a random attacker.
    fn new(base: &ScenarioConfig, radar: &RadarConfig, rng: &mut ChaCha8Rng, seed: u64) -> Draw {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.victim = VictimSpec::Explicit(*radar);
        cfg.targets.clear();
        cfg.attacker.d_atk = rng.random_range(20.0..=100.0);
        cfg.attacker.v_atk = rng.random_range(-10.0..=10.0);
        Draw {
            seed,
            cfg,
            target: None,
            crossover: None,
        }
    }

    fn with_target(mut self, radar: &RadarConfig, d: f64, v: f64, rcs: f64) -> Draw {
        let t = frame_mid(radar, self.cfg.attack_start_frame);
        self.cfg.targets = vec![through(d, v, rcs, t)];
        self.target = Some((d, v, rcs));
        let d_atk = self.cfg.attacker.d_atk + self.cfg.attacker.v_atk * t;
        self.crossover = Some(crossover_range(rcs, d_atk, &self.cfg.victim_budget, &self.cfg.attacker.budget));
        self
    }

    fn run(&self, i: usize, attack: AttackSpec, start: usize) -> Result<(TrialRow, ScenarioResult), HarnessError> {
        let mut cfg = self.cfg.clone();
        cfg.attack = attack;
        let res = run_scenario(&cfg)?;
        let t = frame_mid(&cfg.radar()?, start);
        let mut row = TrialRow {
            trial: i,
            seed: self.seed,
            attack: attack.name().to_string(),
            target_range_m: self.target.map(|x| x.0),
            target_velocity_mps: self.target.map(|x| x.1),
            rcs_dbsm: self.target.map(|x| x.2),
            attacker_range_m: Some(cfg.attacker.d_atk + cfg.attacker.v_atk * t),
            attacker_velocity_mps: Some(cfg.attacker.v_atk),
            crossover_m: self.crossover,
            ..TrialRow::default()
        };
        if let AttackSpec::Fp { d_spoof, v_spoof } | AttackSpec::Translation { d_fake: d_spoof, v_fake: v_spoof, .. } = attack {
            row.spoof_range_m = Some(d_spoof);
            row.spoof_velocity_mps = Some(v_spoof);
        }
        fill_counts(&mut row, &res, start);
        Ok((row, res))
    }
}

fn eval_frames(res: &ScenarioResult, start: usize) -> impl Iterator<Item = &FrameRecord> {
    res.frames.iter().filter(move |f| f.index >= start)
}

fn detected(f: &FrameRecord) -> Option<bool> {
    f.outcome.fn_flags.first().map(|&missed| !missed)
}

fn fill_counts(row: &mut TrialRow, res: &ScenarioResult, start: usize) {
    let (mut rs, mut vs, mut pred) = (Vec::new(), Vec::new(), Vec::new());
    for f in eval_frames(res, start) {
        row.eval_frames += 1;
        row.skipped_frames += f.skipped as usize;
        row.detected_frames += (detected(f) == Some(true)) as usize;
        row.fp_frames += f.outcome.fp_event as usize;
        if f.outcome.spoof_success == Some(true) {
            row.spoof_hits += 1;
            if detected(f) == Some(false) {
                row.translation_hits += 1;
            }
            if let Some(e) = f.outcome.spoof_error {
                rs.push(e.range_m);
                vs.push(e.velocity_mps);
            }
        }
        if let Some(p) = f.prediction_error {
            pred.push(p.abs());
        }
    }
    row.mean_range_error_m = mean(&rs);
    row.mean_velocity_error_mps = mean(&vs);
    row.max_prediction_error_s = pred.into_iter().reduce(f64::max);
    row.randomization_detected = res.randomization_detected;
}

type TrialOut = Result<Vec<(TrialRow, ScenarioResult)>, HarnessError>;

fn collect(outs: Vec<TrialOut>) -> Result<Vec<Vec<(TrialRow, ScenarioResult)>>, HarnessError> {
    outs.into_iter().collect()
}

/// Runs `trials` randomized scenarios derived from `base`. Frame counts,
/// jitter, budgets and detector settings come from `base`; the geometry
/// is drawn per trial.
pub fn run_sweep(base: &ScenarioConfig, mode: SweepMode, trials: usize) -> Result<SweepReport, HarnessError> {
    base.validate()?;
    let radar = base.radar()?;
    let start = base.attack_start_frame;
    let mut summary = Summary {
        mode,
        seed: base.seed,
        trials,
        nominal_region_m: nominal_region(&radar, base),
        spoof: None,
        pdpfa: Vec::new(),
        translation: None,
        stealth: None,
        jam: None,
        estimation: None,
    };
    let mut cdfs = Vec::new();

    let trial = |i: usize| -> TrialOut {
        let (seed, mut rng) = trial_rng(base.seed, i);
        let draw = Draw::new(base, &radar, &mut rng, seed);
        match mode {
            SweepMode::Accuracy => {
                let d = rng.random_range(60.0..=200.0);
                let v = rng.random_range(-25.0..=25.0);
                Ok(vec![draw.run(i, AttackSpec::Fp { d_spoof: d, v_spoof: v }, start)?])
            }
            SweepMode::Pdpfa => {
                let (d, v) = (rng.random_range(5.0..=143.0), rng.random_range(-35.0..=35.0));
                let rcs = sample_rcs_with(&mut rng);
                let (sd, sv) = (rng.random_range(60.0..=200.0), rng.random_range(-25.0..=25.0));
                let draw = draw.with_target(&radar, d, v, rcs);
                let fnspec = AttackSpec::Fn {
                    target: 0,
                    range_smear: None,
                    velocity_spread: None,
                };
                Ok(vec![
                    draw.run(i, AttackSpec::None, start)?,
                    draw.run(i, AttackSpec::Fp { d_spoof: sd, v_spoof: sv }, start)?,
                    draw.run(i, fnspec, start)?,
                ])
            }
            SweepMode::Translation => {
                let (d, v) = (rng.random_range(80.0..=140.0), rng.random_range(-20.0..=20.0));
                let rcs = sample_rcs_with(&mut rng);
                let dd = rng.random_range(-10.0..=10.0);
                let dv = rng.random_range(15.0..=25.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let (smear, spread) = match base.attack {
                    AttackSpec::Translation {
                        range_smear,
                        velocity_spread,
                        ..
                    } => (range_smear, velocity_spread),
                    _ => (None, None),
                };
                let attack = AttackSpec::Translation {
                    target: 0,
                    d_fake: d + dd,
                    v_fake: v + dv,
                    range_smear: smear,
                    velocity_spread: spread,
                };
                Ok(vec![draw.with_target(&radar, d, v, rcs).run(i, attack, start)?])
            }
            SweepMode::Stealth => {
                let (d, v) = (rng.random_range(80.0..=140.0), rng.random_range(-20.0..=20.0));
                let rcs = sample_rcs_with(&mut rng);
                let mut draw = draw.with_target(&radar, d, v, rcs);
                draw.cfg.record_stealth = true;
                let fnspec = match base.attack {
                    a @ AttackSpec::Fn { .. } => a,
                    _ => AttackSpec::Fn {
                        target: 0,
                        range_smear: None,
                        velocity_spread: None,
                    },
                };
                Ok(vec![draw.run(i, AttackSpec::None, start)?, draw.run(i, fnspec, start)?])
            }
            SweepMode::Jam => {
                let (d, v) = (rng.random_range(75.0..=145.0), rng.random_range(-35.0..=35.0));
                let rcs = sample_rcs_with(&mut rng);
                let jam = match base.attack {
                    a @ AttackSpec::Jam { .. } => a,
                    _ => AttackSpec::Jam {
                        range_span: 1000.0,
                        velocity_span: 200.0,
                    },
                };
                Ok(vec![draw.with_target(&radar, d, v, rcs).run(i, jam, start)?])
            }
            SweepMode::Estimation => {
                let victim = random_victim(&mut rng);
                let mut draw = draw;
                draw.cfg.victim = VictimSpec::Explicit(victim);
                draw.cfg.n_frames = start;
                let (row, res) = draw.run(i, AttackSpec::Fp { d_spoof: 100.0, v_spoof: 0.0 }, start)?;
                Ok(vec![(estimation_row(row, &res, &victim), res)])
            }
        }
    };
    let per_trial = collect(map_indexed(trials, trial))?;
    let rows: Vec<TrialRow> = per_trial.iter().flatten().map(|(r, _)| r.clone()).collect();

    match mode {
        SweepMode::Accuracy => {
            let results: Vec<ScenarioResult> = per_trial.into_iter().flatten().map(|(_, r)| r).collect();
            let (rs, vs, _) = spoof_errors(&results);
            cdfs.push(Cdf::of("range_error_m", &rs));
            cdfs.push(Cdf::of("velocity_error_mps", &vs));
            summary.spoof = Some(spoof_accuracy_report(&results));
        }
        SweepMode::Pdpfa => {
            for (slot, attack) in ["none", "fp", "fn"].into_iter().enumerate() {
                let runs: Vec<(&TrialRow, &ScenarioResult)> =
                    per_trial.iter().map(|t| (&t[slot].0, &t[slot].1)).collect();
                summary.pdpfa.push(pd_pfa(attack, &runs, start, summary.nominal_region_m));
            }
        }
        SweepMode::Translation => {
            let mut r = Rate::default();
            for (_, res) in per_trial.iter().flatten() {
                for f in res.frames.iter().filter(|f| f.attacked || f.skipped) {
                    r.add(detected(f) == Some(false) && f.outcome.spoof_success == Some(true));
                }
            }
            summary.translation = Some(r);
        }
        SweepMode::Stealth => {
            let s = stealth(&per_trial, start);
            cdfs.push(Cdf::of("kurtosis_none", &s.1));
            cdfs.push(Cdf::of("kurtosis_fn", &s.2));
            cdfs.push(Cdf::of("median_rise_db", &s.3));
            summary.stealth = Some(s.0);
        }
        SweepMode::Jam => {
            let (mut flagged, mut pd) = (Rate::default(), Rate::default());
            for (_, res) in per_trial.iter().flatten() {
                flagged.add(res.randomization_detected == Some(true));
                for f in eval_frames(res, start) {
                    if let Some(d) = detected(f) {
                        pd.add(d);
                    }
                }
            }
            summary.jam = Some(JamStats {
                randomization_flagged: flagged,
                pd,
            });
        }
        SweepMode::Estimation => {
            let done: Vec<&TrialRow> = rows.iter().filter(|r| r.t_chirp_error_s.is_some()).collect();
            // Failed trials enter the percentiles as unbounded errors.
            let pad = |xs: Vec<f64>| -> Vec<f64> {
                let miss = rows.len() - xs.len();
                xs.into_iter().chain(std::iter::repeat_n(f64::INFINITY, miss)).collect()
            };
            let tc = pad(done.iter().filter_map(|r| r.t_chirp_error_s.map(f64::abs)).collect());
            let sl = pad(done.iter().filter_map(|r| r.slope_rel_error.map(f64::abs)).collect());
            let pr = pad(rows.iter().filter_map(|r| r.max_prediction_error_s).collect());
            for (name, xs) in [("t_chirp_error_s", &tc), ("slope_rel_error", &sl), ("prediction_error_s", &pr)] {
                let finite: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
                cdfs.push(Cdf::of(name, &finite));
            }
            summary.estimation = Some(EstimationStats {
                completed: Rate::new(done.len(), rows.len()),
                t_chirp_error_s: ErrorStats::from_values(&tc),
                slope_rel_error: ErrorStats::from_values(&sl),
                prediction_error_s: ErrorStats::from_values(&pr),
            });
        }
    }
    Ok(SweepReport { summary, rows, cdfs })
}

fn pd_pfa(attack: &str, runs: &[(&TrialRow, &ScenarioResult)], start: usize, nominal: [f64; 2]) -> PdPfaSummary {
    let mut bins: Vec<BinStat> = (0..N_BINS)
        .map(|b| BinStat {
            lo_m: b as f64 * BIN_WIDTH_M,
            hi_m: (b + 1) as f64 * BIN_WIDTH_M,
            pd: Rate::default(),
            pfa: Rate::default(),
        })
        .collect();
    let (mut pd, mut pfa, mut pd_nom, mut pd_far) = (Rate::default(), Rate::default(), Rate::default(), Rate::default());
    for (row, res) in runs {
        for f in eval_frames(res, start) {
            pfa.add(f.outcome.fp_event);
            let Some(truth) = f.truth.first() else { continue };
            let hit = detected(f) == Some(true);
            pd.add(hit);
            let b = (truth.range_m / BIN_WIDTH_M).floor();
            if b >= 0.0 && (b as usize) < N_BINS {
                bins[b as usize].pd.add(hit);
                bins[b as usize].pfa.add(f.outcome.fp_event);
            }
            if truth.range_m >= nominal[0] && truth.range_m <= nominal[1] {
                pd_nom.add(hit);
                if row.crossover_m.is_some_and(|x| truth.range_m > x) {
                    pd_far.add(hit);
                }
            }
        }
    }
    PdPfaSummary {
        attack: attack.to_string(),
        pd,
        pfa,
        pd_nominal: pd_nom,
        pd_beyond_crossover: pd_far,
        bins,
    }
}

fn stealth(per_trial: &[Vec<(TrialRow, ScenarioResult)>], start: usize) -> (StealthStats, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut k_none, mut k_fn, mut rise) = (Vec::new(), Vec::new(), Vec::new());
    for t in per_trial {
        let (none, fna) = (&t[0].1, &t[1].1);
        for (a, b) in eval_frames(none, start).zip(eval_frames(fna, start)) {
            k_none.extend(&a.chirp_kurtosis);
            if b.attacked {
                k_fn.extend(&b.chirp_kurtosis);
                if let (Some(x), Some(y)) = (a.offbox_median_db, b.offbox_median_db) {
                    rise.push(y - x);
                }
            }
        }
    }
    let band = percentile(&k_none, 1.0).zip(percentile(&k_none, 99.0)).map(|(lo, hi)| [lo, hi]);
    let in_band = match band {
        Some([lo, hi]) => k_fn.iter().filter(|&&k| k >= lo && k <= hi).count(),
        None => 0,
    };
    let stats = StealthStats {
        kurtosis_band: band,
        fn_kurtosis_in_band: Rate::new(in_band, k_fn.len()),
        median_rise_db: ErrorStats::from_values(&rise),
    };
    (stats, k_none, k_fn, rise)
}

/// Victim with slope in [0.05, 0.53] MHz/us, period in [50, 500] us, an
/// active sweep of 70-95% of the period and 32 chirps at 33 frames/s.
pub fn random_victim<R: Rng + ?Sized>(rng: &mut R) -> RadarConfig {
    let slope = rng.random_range(0.05e12..=0.53e12);
    let t_chirp = rng.random_range(50e-6..=500e-6);
    let bandwidth = slope * t_chirp * rng.random_range(0.7..=0.95);
    let f_samp = 0.5e6;
    RadarConfig {
        f_c: 1.5e9,
        bandwidth,
        slope,
        t_chirp,
        n_chirps: 32,
        t_frame: 1.0 / 33.0,
        f_samp,
        sim_rate: f_samp * (bandwidth / f_samp).ceil(),
    }
}

fn estimation_row(mut row: TrialRow, res: &ScenarioResult, victim: &RadarConfig) -> TrialRow {
    let snap = res.frames.last().and_then(|f| f.estimate);
    if let Some(e) = snap.filter(|e| e.t_chirp_est > 0.0) {
        row.t_chirp_error_s = Some(e.t_chirp_est - victim.t_chirp);
        row.slope_rel_error = Some((e.s_est - victim.slope) / victim.slope);
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{ClusterSummary, Outcome, Point};
    use crate::waveforms::RadarMetrics;

    fn frame(k: usize, err: Option<(f64, f64)>) -> FrameRecord {
        FrameRecord {
            index: k,
            start: 0.0,
            attacked: true,
            skipped: false,
            clusters: Vec::<ClusterSummary>::new(),
            truth: Vec::new(),
            spoof: Some(Point {
                range_m: 100.0,
                velocity_mps: 0.0,
            }),
            outcome: Outcome {
                fn_flags: Vec::new(),
                fn_event: false,
                fp_event: true,
                spoof_success: Some(err.is_some()),
                spoof_error: err.map(|(r, v)| Point {
                    range_m: r,
                    velocity_mps: v,
                }),
            },
            estimate: None,
            prediction_error: None,
            clamped: false,
            chirp_kurtosis: Vec::new(),
            offbox_median_db: None,
        }
    }

    fn result(frames: Vec<FrameRecord>) -> ScenarioResult {
        ScenarioResult {
            attack: "fp".into(),
            metrics: RadarMetrics {
                d_res: 6.0,
                d_max: 1500.0,
                v_res: 0.78,
                v_max: 100.0,
                lambda: 0.2,
            },
            frames,
            randomization_detected: None,
            estimation_errors: Vec::new(),
        }
    }

    #[test]
    fn perfect_results_give_zero_error_and_full_success() {
        let r = result((1..=5).map(|k| frame(k, Some((0.0, 0.0)))).collect());
        let s = spoof_accuracy_report(&[r.clone(), r]);
        assert_eq!(s.success, Rate::new(10, 10));
        assert_eq!(s.range_error_m.mean, Some(0.0));
        assert_eq!(s.velocity_error_mps.p90, Some(0.0));
    }

    #[test]
    fn percentiles_match_hand_computation() {
        // Errors 1..=10 m: p90 by linear interpolation at rank 8.1 is 9.1.
        let mut frames: Vec<FrameRecord> = (1..=10).map(|k| frame(k, Some((k as f64, 0.1 * k as f64)))).collect();
        frames.push(frame(11, None));
        let s = spoof_accuracy_report(&[result(frames)]);
        assert_eq!(s.success, Rate::new(10, 11));
        assert!((s.range_error_m.p90.unwrap() - 9.1).abs() < 1e-12);
        assert!((s.range_error_m.mean.unwrap() - 5.5).abs() < 1e-12);
        // p95 = 9.55 drops only the 10 m error.
        assert!((s.range_error_m.trimmed_mean.unwrap() - 5.0).abs() < 1e-12);
        assert!((s.velocity_error_mps.p90.unwrap() - 0.91).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_give_an_empty_report() {
        let base = ScenarioConfig::new(RadarConfig::preset("table4").unwrap(), 1);
        let r = run_sweep(&base, SweepMode::Pdpfa, 0).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.summary.pdpfa.len(), 3);
        assert!(r.summary.pdpfa.iter().all(|p| p.pd.total == 0 && p.pd.rate.is_none()));
    }

    #[test]
    fn modes_round_trip_through_names() {
        for m in SweepMode::ALL {
            assert_eq!(m.name().parse::<SweepMode>().unwrap(), m);
        }
        assert!("bogus".parse::<SweepMode>().is_err());
    }

    #[test]
    fn random_victims_validate() {
        let mut rng = stream(5, 0);
        for _ in 0..200 {
            let v = random_victim(&mut rng);
            v.validate().unwrap();
            assert!((0.7..=0.95 + 1e-9).contains(&(v.t_active() / v.t_chirp)));
        }
    }

    #[test]
    fn nominal_region_of_desk_victim() {
        let radar = RadarConfig::preset("table4").unwrap();
        let base = ScenarioConfig::new(radar, 1);
        let [lo, hi] = nominal_region(&radar, &base);
        assert!((lo - 13.0 * radar.range_bin_m()).abs() < 1e-9);
        assert_eq!(hi, 150.0);
    }

    #[test]
    fn accuracy_sweep_is_deterministic() {
        let mut base = ScenarioConfig::new(RadarConfig::preset("table4").unwrap(), 11);
        base.n_frames = 7;
        let a = run_sweep(&base, SweepMode::Accuracy, 2).unwrap();
        let b = run_sweep(&base, SweepMode::Accuracy, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        assert_ne!(a.rows[0].seed, a.rows[1].seed);
    }
}
