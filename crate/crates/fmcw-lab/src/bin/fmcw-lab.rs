use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;

use fmcw_lab::attacks::{fn_frame, fp_frame, jam_frame, translation_frame, AttackPlan, AttackerState, FnConfig, SpoofTarget};
use fmcw_lab::channel::LinkBudget;
use fmcw_lab::estimation::{estimate_noise_floor_db, predict_next_frame, segment_frames, Estimator, EstimatorConfig, VictimEstimate};
use fmcw_lab::harness::{
    attacker_recordings, load_scenario, read_iq, read_summary, render_summary, run_scenario, run_sweep, write_iq,
    write_report, SweepMode,
};

#[derive(Parser)]
#[command(name = "fmcw-lab", version, about = "FMCW radar attack laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and print its result as JSON.
    Simulate {
        scenario: PathBuf,
        /// Write the result here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the attacker's pre-attack recordings as
        /// frame_<k>.iq into this directory.
        #[arg(long)]
        capture_dir: Option<PathBuf>,
    },
    /// Estimate victim parameters from one or more IQ recordings.
    Estimate {
        #[arg(required = true)]
        captures: Vec<PathBuf>,
        /// Victim start frequency the recordings were tuned to, Hz.
        #[arg(long)]
        carrier_hz: f64,
        /// Quiet time that separates two frames inside one recording, s.
        #[arg(long, default_value_t = 1e-3)]
        min_gap_s: f64,
        /// Receiver noise power per sample, dB. Guessed from each
        /// recording when absent.
        #[arg(long)]
        noise_floor_db: Option<f64>,
        /// Estimator tunables as JSON.
        #[arg(long)]
        estimator: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Synthesise an attack frame from an estimate and write it as IQ.
    Attack {
        estimate: PathBuf,
        attack: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Monte-Carlo sweep over a base scenario.
    Sweep {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = SweepMode::Accuracy)]
        mode: SweepMode,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the summary of a sweep directory.
    Report { dir: PathBuf },
}

/// Attack request for the `attack` subcommand. Ranges and velocities are
/// as the victim should see them at the attacked frame.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackRequest {
    attack: AttackKind,
    d_atk: f64,
    #[serde(default)]
    v_atk: f64,
    #[serde(default)]
    budget: LinkBudget,
    n_chirps: usize,
    /// Frames after the last observed one.
    #[serde(default = "one")]
    frames_ahead: usize,
    #[serde(default = "default_rate")]
    sample_rate: f64,
}

fn one() -> usize {
    1
}

fn default_rate() -> f64 {
    25e6
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum AttackKind {
    Fp {
        d_spoof: f64,
        v_spoof: f64,
    },
    Fn {
        d_target: f64,
        v_target: f64,
        range_smear: f64,
        velocity_spread: f64,
    },
    Translation {
        d_target: f64,
        v_target: f64,
        d_fake: f64,
        v_fake: f64,
        range_smear: f64,
        velocity_spread: f64,
    },
    Jam {
        range_span: f64,
        velocity_span: f64,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn emit_json<T: serde::Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(scenario: &Path, output: Option<&Path>, capture_dir: Option<&Path>) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    if let Some(dir) = capture_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (i, buf) in attacker_recordings(&cfg)?.iter().enumerate() {
            write_iq(dir.join(format!("frame_{}.iq", i + 1)), buf)?;
        }
    }
    emit_json(&run_scenario(&cfg)?, output)
}

/// Noise guess: the quieter of the 10th-percentile window power and the
/// first 20 us. A single-frame recording is mostly chirp, so only its
/// lead-in shows the noise.
fn guess_floor_db(samples: &[Complex64], rate: f64, len: usize) -> f64 {
    let head = &samples[..((20e-6 * rate) as usize).max(1).min(samples.len())];
    if head.is_empty() {
        return f64::NEG_INFINITY;
    }
    let lead = 10.0 * (head.iter().map(|s| s.norm_sqr()).sum::<f64>() / head.len() as f64).log10();
    estimate_noise_floor_db(samples, len).min(lead)
}

fn estimate(
    captures: &[PathBuf],
    carrier_hz: f64,
    min_gap_s: f64,
    floor_db: Option<f64>,
    cfg: EstimatorConfig,
) -> Result<VictimEstimate> {
    let mut est: Option<Estimator> = None;
    for path in captures {
        let buf = read_iq(path).with_context(|| format!("cannot read {}", path.display()))?;
        let e = est.get_or_insert_with(|| Estimator::new(cfg, buf.rate, carrier_hz));
        if e.sample_rate != buf.rate {
            bail!("{} is sampled at {} Hz, earlier recordings at {} Hz", path.display(), buf.rate, e.sample_rate);
        }
        let floor = floor_db.unwrap_or_else(|| guess_floor_db(&buf.samples, buf.rate, cfg.detect_len));
        let segments = segment_frames(&buf.samples, buf.rate, floor, min_gap_s, &cfg);
        if segments.is_empty() {
            eprintln!("{}: no frame found", path.display());
        }
        for (a, b) in segments {
            // Keep the quiet lead-in: the detector needs it to find the start.
            let a = a.saturating_sub(cfg.detect_len * 4);
            let t0 = buf.t0 + a as f64 / buf.rate;
            if let Err(err) = e.observe(&buf.samples[a..b], t0, floor) {
                eprintln!("{} at t = {t0:.6} s: {err}", path.display());
            }
        }
    }
    Ok(est.expect("at least one capture").estimate()?)
}

fn attack(estimate: &Path, request: &Path, output: &Path) -> Result<()> {
    let est: VictimEstimate = read_json(estimate)?;
    let req: AttackRequest = read_json(request)?;
    let p = predict_next_frame(&est, req.frames_ahead)?;
    let atk = AttackerState {
        d_atk: req.d_atk,
        v_atk: req.v_atk,
    };
    let n = req.n_chirps;
    let fncfg = |v: f64, smear: f64, spread: f64| FnConfig::centered(v, smear, spread, n);
    let at = |d: f64, v: f64| SpoofTarget { d_spoof: d, v_spoof: v };
    let plan: AttackPlan = match req.attack {
        AttackKind::Fp { d_spoof, v_spoof } => fp_frame(&est, &at(d_spoof, v_spoof), &atk, &req.budget, p, n)?,
        AttackKind::Fn {
            d_target,
            v_target,
            range_smear,
            velocity_spread,
        } => fn_frame(&est, &at(d_target, v_target), &atk, &fncfg(v_target, range_smear, velocity_spread), p, n)?,
        AttackKind::Translation {
            d_target,
            v_target,
            d_fake,
            v_fake,
            range_smear,
            velocity_spread,
        } => translation_frame(
            &est,
            &at(d_target, v_target),
            &at(d_fake, v_fake),
            &atk,
            &fncfg(v_target, range_smear, velocity_spread),
            &req.budget,
            p,
            n,
        )?,
        AttackKind::Jam {
            range_span,
            velocity_span,
        } => jam_frame(&est, range_span, velocity_span, &atk, p, n)?,
    };
    if plan.clamped {
        eprintln!("warning: requested power exceeds the transmitter, amplitudes clamped");
    }
    let Some((start, end)) = plan.span() else {
        bail!("attack plan is empty");
    };
    let len = ((end - start) * req.sample_rate).ceil() as usize + 1;
    write_iq(output, &plan.render(req.sample_rate, start, len))?;
    eprintln!(
        "{} chirps, {:.6} s to {:.6} s, {} samples at {} Hz",
        plan.chirps.len(),
        start,
        end,
        len,
        req.sample_rate
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Simulate {
            scenario,
            output,
            capture_dir,
        } => simulate(&scenario, output.as_deref(), capture_dir.as_deref()),
        Cmd::Estimate {
            captures,
            carrier_hz,
            min_gap_s,
            noise_floor_db,
            estimator,
            output,
        } => {
            let cfg = match estimator {
                Some(p) => read_json(&p)?,
                None => EstimatorConfig::default(),
            };
            emit_json(&estimate(&captures, carrier_hz, min_gap_s, noise_floor_db, cfg)?, output.as_deref())
        }
        Cmd::Attack {
            estimate,
            attack: request,
            output,
        } => attack(&estimate, &request, &output),
        Cmd::Sweep {
            scenario,
            trials,
            mode,
            seed,
            output,
        } => {
            let mut base = load_scenario(&scenario)?;
            if let Some(s) = seed {
                base.seed = s;
            }
            let report = run_sweep(&base, mode, trials)?;
            write_report(&output, &report)?;
            print!("{}", render_summary(&report.summary));
            Ok(())
        }
        Cmd::Report { dir } => {
            print!("{}", render_summary(&read_summary(&dir)?));
            Ok(())
        }
    }
}
