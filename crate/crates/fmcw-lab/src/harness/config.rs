use serde::{Deserialize, Serialize};
use std::path::Path as FsPath;

use super::HarnessError;
use crate::channel::{LinkBudget, Target};
use crate::estimation::EstimatorConfig;
use crate::victim::{CfarConfig, DbscanParams, MapWindows, Window};
use crate::waveforms::RadarConfig;

/// Victim waveform: a preset name or explicit fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VictimSpec {
    Preset(String),
    Explicit(RadarConfig),
}

impl VictimSpec {
    pub fn resolve(&self) -> Result<RadarConfig, HarnessError> {
        let cfg = match self {
            VictimSpec::Preset(name) => RadarConfig::preset(name)?,
            VictimSpec::Explicit(c) => *c,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Attacker geometry on the scenario clock, its radio, and what it knows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    /// Range to the victim at t = 0, m.
    pub d_atk: f64,
    /// Radial velocity relative to the victim, m/s, positive = opening.
    #[serde(default)]
    pub v_atk: f64,
    #[serde(default)]
    pub budget: LinkBudget,
    /// Receiver complex sample rate, Hz.
    #[serde(default = "default_attacker_rate")]
    pub sample_rate: f64,
}

fn default_attacker_rate() -> f64 {
    25e6
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            d_atk: 50.0,
            v_atk: 0.0,
            budget: LinkBudget::default(),
            sample_rate: default_attacker_rate(),
        }
    }
}

/// Attack and its parameters. `target` indexes the scenario's target list.
/// Unset smear/spread values are derived from the victim's CFAR window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum AttackSpec {
    None,
    Fp {
        d_spoof: f64,
        v_spoof: f64,
    },
    Fn {
        #[serde(default)]
        target: usize,
        #[serde(default)]
        range_smear: Option<f64>,
        #[serde(default)]
        velocity_spread: Option<f64>,
    },
    Translation {
        #[serde(default)]
        target: usize,
        d_fake: f64,
        v_fake: f64,
        #[serde(default)]
        range_smear: Option<f64>,
        #[serde(default)]
        velocity_spread: Option<f64>,
    },
    Jam {
        #[serde(default = "default_jam_range")]
        range_span: f64,
        #[serde(default = "default_jam_velocity")]
        velocity_span: f64,
    },
}

fn default_jam_range() -> f64 {
    1000.0
}

fn default_jam_velocity() -> f64 {
    200.0
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec::None
    }
}

impl AttackSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::None => "none",
            AttackSpec::Fp { .. } => "fp",
            AttackSpec::Fn { .. } => "fn",
            AttackSpec::Translation { .. } => "translation",
            AttackSpec::Jam { .. } => "jam",
        }
    }
}

/// How the victim's IF is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalPath {
    /// Closed-form IF at f_samp.
    #[default]
    Analytic,
    /// Sample-rate waveform simulation and dechirp.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub victim: VictimSpec,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub attacker: AttackerConfig,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(default = "default_frames")]
    pub n_frames: usize,
    /// 1-based index of the first attacked frame.
    #[serde(default = "default_attack_start")]
    pub attack_start_frame: usize,
    pub seed: u64,
    /// 3 sigma of the Gaussian frame-start jitter, s.
    #[serde(default)]
    pub victim_jitter_3sigma: f64,
    #[serde(default)]
    pub victim_budget: LinkBudget,
    #[serde(default = "desk_cfar")]
    pub cfar: CfarConfig,
    #[serde(default = "desk_windows")]
    pub windows: MapWindows,
    #[serde(default)]
    pub dbscan: DbscanParams,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub signal_path: SignalPath,
    /// Record IF kurtosis and the off-target map median per frame.
    #[serde(default)]
    pub record_stealth: bool,
}

/// Scenario map tapers. At 1.5 GHz the echo of a near target sits up to
/// ~150 dB above the map noise, so Hann range sidelobes and rectangular
/// doppler sidelobes would both cross the CFAR threshold. Kaiser(12) is
/// not enough below ~8 m: zero padding samples its far sidelobes off the
/// lobe grid, and the resulting ripple trips the CFAR every ~40 bins.
pub fn desk_windows() -> MapWindows {
    MapWindows {
        range: Window::Kaiser(16.0),
        doppler: Window::Hann,
    }
}

/// Scenario CFAR: the default geometry at pfa 1e-6. Tapered maps have
/// correlated neighbouring cells, so single noise alarms at 1e-5 grow into
/// min_pts-sized clusters in about 1% of frames.
pub fn desk_cfar() -> CfarConfig {
    CfarConfig {
        pfa: 1e-6,
        ..CfarConfig::default()
    }
}

fn default_frames() -> usize {
    7
}

fn default_attack_start() -> usize {
    6
}

impl ScenarioConfig {
    /// A scenario on `victim` with defaults everywhere else.
    pub fn new(victim: RadarConfig, seed: u64) -> Self {
        ScenarioConfig {
            victim: VictimSpec::Explicit(victim),
            targets: Vec::new(),
            attacker: AttackerConfig::default(),
            attack: AttackSpec::None,
            n_frames: default_frames(),
            attack_start_frame: default_attack_start(),
            seed,
            victim_jitter_3sigma: 0.0,
            victim_budget: LinkBudget::default(),
            cfar: desk_cfar(),
            windows: desk_windows(),
            dbscan: DbscanParams::default(),
            estimator: EstimatorConfig::default(),
            signal_path: SignalPath::Analytic,
            record_stealth: false,
        }
    }

    pub fn radar(&self) -> Result<RadarConfig, HarnessError> {
        self.victim.resolve()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        self.radar()?;
        self.cfar.validate().map_err(|e| HarnessError::Invalid(format!("cfar: {e}")))?;
        if self.n_frames == 0 {
            return bad("n_frames must be at least 1".into());
        }
        if self.attack_start_frame == 0 || self.attack_start_frame > self.n_frames {
            return bad(format!(
                "attack_start_frame ({}) must lie in 1..=n_frames ({})",
                self.attack_start_frame, self.n_frames
            ));
        }
        if !(self.victim_jitter_3sigma >= 0.0) {
            return bad("victim_jitter_3sigma must be non-negative".into());
        }
        if !(self.dbscan.eps > 0.0) || self.dbscan.min_pts == 0 {
            return bad("dbscan: eps must be positive and min_pts at least 1".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.d0.is_finite() && t.v.is_finite() && t.rcs.is_finite()) {
                return bad(format!("targets[{i}] has a non-finite field"));
            }
        }
        if self.attack != AttackSpec::None {
            if !(self.attacker.d_atk > 0.0) {
                return bad("attacker.d_atk must be positive".into());
            }
            if !(self.attacker.sample_rate > 0.0) {
                return bad("attacker.sample_rate must be positive".into());
            }
        }
        match self.attack {
            AttackSpec::Fn { target, .. } | AttackSpec::Translation { target, .. } if target >= self.targets.len() => {
                bad(format!("attack.target {target} but only {} target(s)", self.targets.len()))
            }
            AttackSpec::Jam { range_span, .. } if !(range_span > 0.0) => bad("attack.range_span must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Parses and validates JSON, expanding a preset into explicit fields.
    pub fn from_json(text: &str) -> Result<ScenarioConfig, HarnessError> {
        let mut cfg: ScenarioConfig = serde_json::from_str(text).map_err(HarnessError::Parse)?;
        cfg.validate()?;
        cfg.victim = VictimSpec::Explicit(cfg.radar()?);
        Ok(cfg)
    }
}

pub fn load_scenario(path: impl AsRef<FsPath>) -> Result<ScenarioConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_json(&text)
}
