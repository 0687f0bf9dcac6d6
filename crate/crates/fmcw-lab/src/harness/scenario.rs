use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::config::{AttackSpec, ScenarioConfig, SignalPath};
use super::HarnessError;
use crate::attacks::{
    fn_frame, fp_frame, jam_frame, translation_frame, AttackError, AttackPlan, AttackerState, FnConfig, SpoofTarget,
};
use crate::channel::{lin_to_db, noise_power, one_way_power, two_way_power, LinkBudget};
use crate::estimation::{detect_randomization, predict_next_frame, Estimator, VictimEstimate};
use crate::ifsim::{
    add_attack_if, add_if_noise, add_target_if, attacker_capture, full_waveform_if, victim_if_noise_power, AttackLeg,
    Path,
};
use crate::rng::{ids, stream};
use crate::stats::kurtosis;
use crate::victim::{process_if_windowed, CfarConfig, Cluster, IFMatrix, RangeDopplerMap};
use crate::waveforms::{derived_metrics, IQBuffer, RadarConfig, RadarMetrics};
use crate::C;

/// Range and radial velocity of a point, true or detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub range_m: f64,
    pub velocity_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub peak_db: f64,
    pub size: usize,
}

impl From<&Cluster> for ClusterSummary {
    fn from(c: &Cluster) -> Self {
        ClusterSummary {
            range_m: c.range_m,
            velocity_mps: c.velocity_mps,
            peak_db: c.peak_db,
            size: c.members.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Outcome {
    /// Per truth target: nothing detected inside its gate.
    pub fn_flags: Vec<bool>,
    pub fn_event: bool,
    pub fp_event: bool,
    pub spoof_success: Option<bool>,
    /// |centroid - commanded| of the nearest in-gate cluster.
    pub spoof_error: Option<Point>,
}

fn in_gate(c: &ClusterSummary, p: &Point, m: &RadarMetrics) -> bool {
    (c.range_m - p.range_m).abs() <= 3.0 * m.d_res && (c.velocity_mps - p.velocity_mps).abs() <= 3.0 * m.v_res
}

/// Gate rule: a truth target is missed when no cluster lies within
/// 3 d_res and 3 v_res of it; a cluster outside the gate of every truth
/// target is a false positive; a spoof succeeds when a cluster lies within
/// the gate of the commanded location.
pub fn match_outcomes(
    clusters: &[ClusterSummary],
    truth: &[Point],
    spoof: Option<&Point>,
    metrics: &RadarMetrics,
) -> Outcome {
    let fn_flags: Vec<bool> = truth.iter().map(|t| !clusters.iter().any(|c| in_gate(c, t, metrics))).collect();
    let fp_event = clusters.iter().any(|c| !truth.iter().any(|t| in_gate(c, t, metrics)));
    let (spoof_success, spoof_error) = match spoof {
        None => (None, None),
        Some(s) => {
            let norm = |c: &ClusterSummary| {
                ((c.range_m - s.range_m) / metrics.d_res).powi(2) + ((c.velocity_mps - s.velocity_mps) / metrics.v_res).powi(2)
            };
            let best = clusters
                .iter()
                .filter(|c| in_gate(c, s, metrics))
                .min_by(|a, b| norm(a).total_cmp(&norm(b)));
            (
                Some(best.is_some()),
                best.map(|c| Point {
                    range_m: (c.range_m - s.range_m).abs(),
                    velocity_mps: (c.velocity_mps - s.velocity_mps).abs(),
                }),
            )
        }
    };
    Outcome {
        fn_event: fn_flags.iter().any(|&f| f),
        fn_flags,
        fp_event,
        spoof_success,
        spoof_error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSnapshot {
    pub s_est: f64,
    pub t_chirp_est: f64,
    pub t_frame_est: f64,
    pub n_frames_observed: usize,
}

impl From<&VictimEstimate> for EstimateSnapshot {
    fn from(e: &VictimEstimate) -> Self {
        EstimateSnapshot {
            s_est: e.s_est,
            t_chirp_est: e.t_chirp_est,
            t_frame_est: e.t_frame_est,
            n_frames_observed: e.n_frames_observed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// 1-based.
    pub index: usize,
    /// Victim frame start on the scenario clock, s.
    pub start: f64,
    pub attacked: bool,
    /// An attack frame the attacker could not serve.
    pub skipped: bool,
    pub clusters: Vec<ClusterSummary>,
    /// Targets at mid-frame.
    pub truth: Vec<Point>,
    /// Commanded fake location, for fp and translation.
    pub spoof: Option<Point>,
    pub outcome: Outcome,
    /// The attacker's estimate after this frame.
    pub estimate: Option<EstimateSnapshot>,
    /// Predicted minus actual arrival of the frame at the attacker, s.
    pub prediction_error: Option<f64>,
    pub clamped: bool,
    /// Per-chirp kurtosis of the pooled I and Q samples.
    pub chirp_kurtosis: Vec<f64>,
    /// Median map power outside +-5 m x +-5 m/s of the first target, dB.
    pub offbox_median_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub attack: String,
    pub metrics: RadarMetrics,
    pub frames: Vec<FrameRecord>,
    pub randomization_detected: Option<bool>,
    /// Reasons the attacker failed to observe a frame.
    pub estimation_errors: Vec<String>,
}

impl ScenarioResult {
    pub fn attack_frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.frames.iter().filter(|f| f.attacked)
    }
}

/// Victim frame starts: (k - 1) T_frame plus Gaussian jitter.
pub fn frame_starts(cfg: &ScenarioConfig, radar: &RadarConfig) -> Vec<f64> {
    let sigma = cfg.victim_jitter_3sigma / 3.0;
    let mut rng = stream(cfg.seed, ids::JITTER);
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    (0..cfg.n_frames)
        .map(|k| k as f64 * radar.t_frame + normal.as_ref().map_or(0.0, |n| n.sample(&mut rng)))
        .collect()
}

/// Range smear and velocity spread that cover 1.5 CFAR windows.
pub fn default_smear(radar: &RadarConfig, cfar: &CfarConfig) -> (f64, f64) {
    let m = derived_metrics(radar).expect("validated radar");
    let rb = radar.range_bin_m();
    let vb = m.v_res;
    (
        1.5 * (2 * cfar.reach_r() + 1) as f64 * rb,
        1.5 * (2 * cfar.reach_d() + 1) as f64 * vb,
    )
}

/// Equal-power range: where a `rcs_dbsm` echo matches the attacker's
/// one-way signal at the victim.
pub fn crossover_range(rcs_dbsm: f64, d_atk: f64, victim: &LinkBudget, attacker: &LinkBudget) -> f64 {
    let sigma = 10f64.powf(rcs_dbsm / 10.0);
    (sigma * d_atk * d_atk * victim.eirp_watts() / (4.0 * PI * attacker.eirp_watts())).powf(0.25)
}

struct Attacker<'a> {
    cfg: &'a ScenarioConfig,
    radar: RadarConfig,
    path: Path,
    est: Estimator,
    last_observed: Option<usize>,
    errors: Vec<String>,
}

impl<'a> Attacker<'a> {
    /// Records the head of frame `k` and feeds it to the estimator.
    fn observe(&mut self, k: usize, frame_start: f64) {
        let buf = self.capture(k, frame_start);
        let floor = lin_to_db(noise_power(buf.rate, &self.cfg.attacker.budget));
        match self.est.observe(&buf.samples, buf.t0, floor) {
            Ok(_) => self.last_observed = Some(k),
            Err(e) => self.errors.push(format!("frame {k}: {e}")),
        }
    }

    fn capture(&self, k: usize, frame_start: f64) -> IQBuffer {
        let a = &self.cfg.attacker;
        let mut rng = stream(self.cfg.seed, ids::ATTACKER_NOISE + k as u64);
        let lead = rng.random_range(30e-6..70e-6);
        let lo_phase = rng.random::<f64>() * 2.0 * PI;
        let d = self.path.at(frame_start);
        let t0 = frame_start + d / C - lead;
        let len = ((lead + self.cfg.estimator.capture_s + 0.1e-3) * a.sample_rate).round() as usize;
        let amp = one_way_power(
            self.cfg.victim_budget.eirp_watts(),
            a.budget.rx_gain,
            self.radar.lambda(),
            d,
        )
        .sqrt();
        let noise = noise_power(a.sample_rate, &a.budget);
        attacker_capture(&self.radar, frame_start, self.path, amp, lo_phase, t0, len, a.sample_rate, noise, &mut rng)
    }

    /// Plan for frame `k`, or None when the estimate cannot support it.
    fn plan(&self, k: usize, actual_start: f64) -> Option<(AttackPlan, Option<Point>, f64)> {
        let est = self.est.estimate().ok()?;
        if !(est.t_chirp_est > 0.0 && est.t_frame_est > 0.0) {
            return None;
        }
        let last = self.last_observed?;
        let p = predict_next_frame(&est, k - last).ok()?;
        let pred_err = p - (actual_start + self.path.at(actual_start) / C);
        let atk = AttackerState {
            d_atk: self.path.at(p),
            v_atk: self.path.v,
        };
        let n = self.radar.n_chirps;
        let t_mid = p - atk.d_atk / C + n as f64 * est.t_chirp_est / 2.0;
        let since = (k - self.cfg.attack_start_frame) as f64 * est.t_frame_est;
        let budget = &self.cfg.attacker.budget;
        let (smear0, spread0) = default_smear(&self.radar, &self.cfg.cfar);
        let real = |i: usize| {
            let t = &self.cfg.targets[i];
            SpoofTarget {
                d_spoof: Path::from(t).at(t_mid),
                v_spoof: t.v,
            }
        };
        let moving = |d: f64, v: f64| SpoofTarget {
            d_spoof: d + v * since,
            v_spoof: v,
        };
        let as_point = |s: &SpoofTarget| Point {
            range_m: s.d_spoof,
            velocity_mps: s.v_spoof,
        };
        let r: Result<(AttackPlan, Option<Point>), AttackError> = match self.cfg.attack {
            AttackSpec::None => return None,
            AttackSpec::Fp { d_spoof, v_spoof } => {
                let s = moving(d_spoof, v_spoof);
                fp_frame(&est, &s, &atk, budget, p, n).map(|pl| (pl, Some(as_point(&s))))
            }
            AttackSpec::Fn {
                target,
                range_smear,
                velocity_spread,
            } => {
                let t = real(target);
                let f = FnConfig::centered(t.v_spoof, range_smear.unwrap_or(smear0), velocity_spread.unwrap_or(spread0), n);
                fn_frame(&est, &t, &atk, &f, p, n).map(|pl| (pl, None))
            }
            AttackSpec::Translation {
                target,
                d_fake,
                v_fake,
                range_smear,
                velocity_spread,
            } => {
                let t = real(target);
                let s = moving(d_fake, v_fake);
                let f = FnConfig::centered(t.v_spoof, range_smear.unwrap_or(smear0), velocity_spread.unwrap_or(spread0), n);
                translation_frame(&est, &t, &s, &atk, &f, budget, p, n).map(|pl| (pl, Some(as_point(&s))))
            }
            AttackSpec::Jam {
                range_span,
                velocity_span,
            } => jam_frame(&est, range_span, velocity_span, &atk, p, n).map(|pl| (pl, None)),
        };
        r.ok().map(|(pl, s)| (pl, s, pred_err))
    }
}

fn median_outside_db(map: &RangeDopplerMap, around: &Point, half_r: f64, half_v: f64) -> Option<f64> {
    let mut v = Vec::with_capacity(map.power.len());
    for r in 0..map.n_range {
        let dr = (map.range_of(r as f64) - around.range_m).abs();
        for d in 0..map.n_doppler {
            let dv = (map.velocity_of(d as f64) - around.velocity_mps).abs();
            if dr > half_r || dv > half_v {
                v.push(map.at(r, d));
            }
        }
    }
    if v.is_empty() {
        return None;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    Some(lin_to_db(*m))
}

/// Runs the frame loop: victim transmits, targets reflect, the attacker
/// senses frames before `attack_start_frame` and attacks from it onward,
/// the victim processes the superposition.
/// The attacker's recordings of frames 1 .. attack_start_frame, as fed to
/// its estimator during [`run_scenario`].
pub fn attacker_recordings(cfg: &ScenarioConfig) -> Result<Vec<IQBuffer>, HarnessError> {
    cfg.validate()?;
    let radar = cfg.radar()?;
    let attacker = Attacker {
        cfg,
        radar,
        path: Path {
            d0: cfg.attacker.d_atk,
            v: cfg.attacker.v_atk,
        },
        est: Estimator::new(cfg.estimator, cfg.attacker.sample_rate, radar.f_c),
        last_observed: None,
        errors: Vec::new(),
    };
    let starts = frame_starts(cfg, &radar);
    Ok((1..cfg.attack_start_frame).map(|k| attacker.capture(k, starts[k - 1])).collect())
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    cfg.validate()?;
    let radar = cfg.radar()?;
    let metrics = derived_metrics(&radar)?;
    let starts = frame_starts(cfg, &radar);
    let active = cfg.attack != AttackSpec::None;
    let atk_path = Path {
        d0: cfg.attacker.d_atk,
        v: cfg.attacker.v_atk,
    };
    let mut attacker = Attacker {
        cfg,
        radar,
        path: atk_path,
        est: Estimator::new(cfg.estimator, cfg.attacker.sample_rate, radar.f_c),
        last_observed: None,
        errors: Vec::new(),
    };
    let lambda = radar.lambda();
    let t_half = radar.n_chirps as f64 * radar.t_chirp / 2.0;
    let mut frames = Vec::with_capacity(cfg.n_frames);

    for (i, &f0) in starts.iter().enumerate() {
        let k = i + 1;
        let attack_frame = active && k >= cfg.attack_start_frame;
        let planned = if attack_frame { attacker.plan(k, f0) } else { None };

        let mut rng = stream(cfg.seed, ids::VICTIM_NOISE + k as u64);
        let ifm = match cfg.signal_path {
            SignalPath::Analytic => {
                let mut ifm = IFMatrix::zeros(&radar);
                for t in &cfg.targets {
                    let p = Path::from(t);
                    let d = p.at(f0);
                    if d > 0.0 {
                        add_target_if(&mut ifm, f0, p, two_way_power(&cfg.victim_budget, lambda, t.rcs, d).sqrt());
                    }
                }
                if let Some((plan, _, _)) = &planned {
                    let amp = one_way_power(
                        cfg.attacker.budget.eirp_watts(),
                        cfg.victim_budget.rx_gain,
                        lambda,
                        atk_path.at(f0),
                    )
                    .sqrt();
                    add_attack_if(&mut ifm, f0, plan, atk_path, amp);
                }
                add_if_noise(&mut ifm, victim_if_noise_power(&radar, &cfg.victim_budget), &mut rng);
                ifm
            }
            SignalPath::Full => {
                let leg = planned.as_ref().map(|(plan, _, _)| AttackLeg {
                    plan,
                    path: atk_path,
                    budget: LinkBudget {
                        rx_gain: cfg.victim_budget.rx_gain,
                        ..cfg.attacker.budget
                    },
                });
                full_waveform_if(&radar, f0, &cfg.targets, &cfg.victim_budget, leg, true, &mut rng)?
            }
        };
        let out = process_if_windowed(&ifm, &cfg.windows, &cfg.cfar, &cfg.dbscan)?;
        let clusters: Vec<ClusterSummary> = out.clusters.iter().map(ClusterSummary::from).collect();
        let truth: Vec<Point> = cfg
            .targets
            .iter()
            .map(|t| Point {
                range_m: Path::from(t).at(f0 + t_half),
                velocity_mps: t.v,
            })
            .filter(|p| p.range_m > 0.0)
            .collect();
        let spoof = planned.as_ref().and_then(|p| p.1);
        let outcome = match_outcomes(&clusters, &truth, spoof.as_ref(), &metrics);

        let (chirp_kurtosis, offbox_median_db) = if cfg.record_stealth {
            let k = (0..ifm.rows)
                .filter_map(|l| kurtosis(&ifm.row(l).iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>()))
                .collect();
            let off = truth.first().and_then(|t| median_outside_db(&out.map, t, 5.0, 5.0));
            (k, off)
        } else {
            (Vec::new(), None)
        };

        if active && k < cfg.attack_start_frame {
            attacker.observe(k, f0);
        }
        frames.push(FrameRecord {
            index: k,
            start: f0,
            attacked: planned.is_some(),
            skipped: attack_frame && planned.is_none(),
            clusters,
            truth,
            spoof,
            outcome,
            estimate: if active {
                attacker.est.estimate().ok().as_ref().map(EstimateSnapshot::from)
            } else {
                None
            },
            prediction_error: planned.as_ref().map(|p| p.2),
            clamped: planned.as_ref().is_some_and(|p| p.0.clamped),
            chirp_kurtosis,
            offbox_median_db,
        });
    }

    let randomization_detected = if active {
        attacker.est.estimate().ok().and_then(|e| detect_randomization(&e).ok())
    } else {
        None
    };
    Ok(ScenarioResult {
        attack: cfg.attack.name().to_string(),
        metrics,
        frames,
        randomization_detected,
        estimation_errors: attacker.errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Target;

    fn metrics() -> RadarMetrics {
        RadarMetrics {
            d_res: 6.0,
            d_max: 1500.0,
            v_res: 0.8,
            v_max: 100.0,
            lambda: 0.2,
        }
    }

    fn cl(r: f64, v: f64) -> ClusterSummary {
        ClusterSummary {
            range_m: r,
            velocity_mps: v,
            peak_db: 0.0,
            size: 3,
        }
    }

    fn pt(r: f64, v: f64) -> Point {
        Point {
            range_m: r,
            velocity_mps: v,
        }
    }

    #[test]
    fn cluster_on_target_is_clean() {
        let o = match_outcomes(&[cl(100.0, 2.0)], &[pt(100.0, 2.0)], None, &metrics());
        assert!(!o.fn_event && !o.fp_event);
        assert_eq!(o.spoof_success, None);
    }

    #[test]
    fn displaced_cluster_is_both_fn_and_fp() {
        let o = match_outcomes(&[cl(124.0, 2.0)], &[pt(100.0, 2.0)], None, &metrics());
        assert!(o.fn_event && o.fp_event);
        assert_eq!(o.fn_flags, vec![true]);
    }

    #[test]
    fn spoof_error_uses_nearest_in_gate_cluster() {
        let o = match_outcomes(&[cl(85.0, 1.0), cl(81.0, 0.5)], &[], Some(&pt(80.0, 0.0)), &metrics());
        assert_eq!(o.spoof_success, Some(true));
        let e = o.spoof_error.unwrap();
        assert!((e.range_m - 1.0).abs() < 1e-12 && (e.velocity_mps - 0.5).abs() < 1e-12);
        let miss = match_outcomes(&[cl(120.0, 0.0)], &[], Some(&pt(80.0, 0.0)), &metrics());
        assert_eq!(miss.spoof_success, Some(false));
        assert!(miss.spoof_error.is_none());
    }

    #[test]
    fn crossover_matches_power_balance() {
        let b = LinkBudget::default();
        let lambda = 0.2;
        let d = crossover_range(15.0, 100.0, &b, &b);
        let two = two_way_power(&b, lambda, 15.0, d);
        let one = one_way_power(b.eirp_watts(), b.rx_gain, lambda, 100.0);
        assert!((two / one - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_attack_single_target_every_frame() {
        let mut cfg = ScenarioConfig::new(RadarConfig::preset("table2-C").unwrap(), 7);
        cfg.targets = vec![Target {
            d0: 50.0,
            v: -5.0,
            rcs: 15.0,
        }];
        cfg.n_frames = 3;
        cfg.attack_start_frame = 3;
        let r = run_scenario(&cfg).unwrap();
        assert_eq!(r.frames.len(), 3);
        for f in &r.frames {
            assert_eq!(f.clusters.len(), 1, "frame {}: {:?}", f.index, f.clusters);
            assert!(!f.outcome.fn_event && !f.outcome.fp_event);
            assert!(f.estimate.is_none());
        }
    }

    #[test]
    fn attack_off_ignores_attack_parameters() {
        let mut a = ScenarioConfig::new(RadarConfig::preset("table4").unwrap(), 11);
        a.targets = vec![Target {
            d0: 100.0,
            v: 3.0,
            rcs: 15.0,
        }];
        a.n_frames = 2;
        a.attack_start_frame = 2;
        let mut b = a.clone();
        b.attacker.d_atk = 77.0;
        b.attacker.v_atk = -4.0;
        assert_eq!(run_scenario(&a).unwrap(), run_scenario(&b).unwrap());
    }
}
