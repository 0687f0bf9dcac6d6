//! Sweep reports on disk: `summary.json`, `trials.csv` (one row per
//! scenario run) and `cdf_<metric>.csv`. Floats use Rust's shortest
//! round-trip formatting, so equal reports are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use super::sweeps::{Rate, Summary, SweepReport, TrialRow};
use super::HarnessError;

pub const TRIALS_HEADER: &str = "trial,seed,attack,target_range_m,target_velocity_mps,rcs_dbsm,attacker_range_m,\
attacker_velocity_mps,crossover_m,spoof_range_m,spoof_velocity_mps,eval_frames,skipped_frames,detected_frames,\
fp_frames,spoof_hits,translation_hits,mean_range_error_m,mean_velocity_error_mps,max_prediction_error_s,\
randomization_detected,t_chirp_error_s,slope_rel_error";

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn trial_csv_line(r: &TrialRow) -> String {
    [
        r.trial.to_string(),
        r.seed.to_string(),
        r.attack.clone(),
        opt(r.target_range_m),
        opt(r.target_velocity_mps),
        opt(r.rcs_dbsm),
        opt(r.attacker_range_m),
        opt(r.attacker_velocity_mps),
        opt(r.crossover_m),
        opt(r.spoof_range_m),
        opt(r.spoof_velocity_mps),
        r.eval_frames.to_string(),
        r.skipped_frames.to_string(),
        r.detected_frames.to_string(),
        r.fp_frames.to_string(),
        r.spoof_hits.to_string(),
        r.translation_hits.to_string(),
        opt(r.mean_range_error_m),
        opt(r.mean_velocity_error_mps),
        opt(r.max_prediction_error_s),
        opt(r.randomization_detected),
        opt(r.t_chirp_error_s),
        opt(r.slope_rel_error),
    ]
    .join(",")
}

pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut s = String::from(TRIALS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&trial_csv_line(r));
        s.push('\n');
    }
    s
}

pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("value,fraction\n");
    for (v, f) in points {
        let _ = writeln!(s, "{v},{f}");
    }
    s
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes the report into `dir`, creating it if needed.
pub fn write_report(dir: impl AsRef<Path>, report: &SweepReport) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut json = serde_json::to_string_pretty(&report.summary).map_err(HarnessError::Parse)?;
    json.push('\n');
    write(&dir.join("summary.json"), &json)?;
    write(&dir.join("trials.csv"), &trials_csv(&report.rows))?;
    for c in &report.cdfs {
        write(&dir.join(format!("cdf_{}.csv", c.metric)), &cdf_csv(&c.points))?;
    }
    Ok(())
}

pub fn read_summary(dir: impl AsRef<Path>) -> Result<Summary, HarnessError> {
    let path = dir.as_ref().join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(HarnessError::Parse)
}

fn rate(r: &Rate) -> String {
    match r.rate {
        Some(x) => format!("{:.3} ({}/{})", x, r.hits, r.total),
        None => "n/a (0 frames)".to_string(),
    }
}

fn num(x: Option<f64>, scale: f64, unit: &str) -> String {
    x.map(|v| format!("{:.3} {unit}", v * scale)).unwrap_or_else(|| "n/a".into())
}

/// Plain-text rendering of a summary.
pub fn render_summary(s: &Summary) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "mode {}  seed {}  trials {}", s.mode, s.seed, s.trials);
    let _ = writeln!(
        o,
        "nominal detection region {:.1}-{:.1} m",
        s.nominal_region_m[0], s.nominal_region_m[1]
    );
    if let Some(sp) = &s.spoof {
        let _ = writeln!(o, "spoof success        {}", rate(&sp.success));
        let _ = writeln!(
            o,
            "range error          mean {}  p90 {}  trimmed mean {}",
            num(sp.range_error_m.mean, 1.0, "m"),
            num(sp.range_error_m.p90, 1.0, "m"),
            num(sp.range_error_m.trimmed_mean, 1.0, "m")
        );
        let _ = writeln!(
            o,
            "velocity error       mean {}  p90 {}  trimmed mean {}",
            num(sp.velocity_error_mps.mean, 1.0, "m/s"),
            num(sp.velocity_error_mps.p90, 1.0, "m/s"),
            num(sp.velocity_error_mps.trimmed_mean, 1.0, "m/s")
        );
    }
    for p in &s.pdpfa {
        let _ = writeln!(
            o,
            "[{}] PD {}  PFA {}  PD nominal {}  PD beyond crossover {}",
            p.attack,
            rate(&p.pd),
            rate(&p.pfa),
            rate(&p.pd_nominal),
            rate(&p.pd_beyond_crossover)
        );
        for b in p.bins.iter().filter(|b| b.pd.total > 0) {
            let _ = writeln!(
                o,
                "    {:>5.1}-{:<5.1} m  PD {}  PFA {}",
                b.lo_m,
                b.hi_m,
                rate(&b.pd),
                rate(&b.pfa)
            );
        }
    }
    if let Some(t) = &s.translation {
        let _ = writeln!(o, "translation (real missed and fake in gate) {}", rate(t));
    }
    if let Some(st) = &s.stealth {
        let band = st
            .kurtosis_band
            .map(|[a, b]| format!("[{a:.4}, {b:.4}]"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(o, "no-attack kurtosis band {band}; FN chirps in band {}", rate(&st.fn_kurtosis_in_band));
        let _ = writeln!(
            o,
            "off-target median rise  mean {}  p90 {}",
            num(st.median_rise_db.mean, 1.0, "dB"),
            num(st.median_rise_db.p90, 1.0, "dB")
        );
    }
    if let Some(j) = &s.jam {
        let _ = writeln!(o, "randomization flagged {}", rate(&j.randomization_flagged));
        let _ = writeln!(o, "target PD under jamming {}", rate(&j.pd));
    }
    if let Some(e) = &s.estimation {
        let _ = writeln!(o, "estimates completed {}", rate(&e.completed));
        let _ = writeln!(o, "p95 |T_chirp error| {}", num(e.t_chirp_error_s.p95, 1e9, "ns"));
        let _ = writeln!(o, "p95 |slope error|   {}", num(e.slope_rel_error.p95, 100.0, "%"));
        let _ = writeln!(o, "p95 |prediction|    {}", num(e.prediction_error_s.p95, 1e6, "us"));
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::sweeps::{run_sweep, SweepMode};
    use crate::waveforms::RadarConfig;

    #[test]
    fn header_matches_row_width() {
        let cols = TRIALS_HEADER.split(',').count();
        assert_eq!(trial_csv_line(&TrialRow::default()).split(',').count(), cols);
        assert_eq!(cols, 23);
    }

    #[test]
    fn reports_round_trip_and_repeat_byte_for_byte() {
        let mut base = ScenarioConfig::new(RadarConfig::preset("table4").unwrap(), 3);
        base.n_frames = 7;
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        write_report(&a, &run_sweep(&base, SweepMode::Accuracy, 2).unwrap()).unwrap();
        write_report(&b, &run_sweep(&base, SweepMode::Accuracy, 2).unwrap()).unwrap();
        for f in ["summary.json", "trials.csv", "cdf_range_error_m.csv", "cdf_velocity_error_mps.csv"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
        let s = read_summary(&a).unwrap();
        assert_eq!(s.mode, SweepMode::Accuracy);
        assert!(render_summary(&s).contains("spoof success"));
        let csv = std::fs::read_to_string(a.join("trials.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn missing_summary_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let e = read_summary(dir.path()).unwrap_err();
        assert!(e.to_string().contains("summary.json"), "{e}");
    }
}
