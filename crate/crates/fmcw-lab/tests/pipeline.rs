//! Cross-checks between independent routes through the crate: the
//! waveform-level signal path against the closed-form IF path, the saved
//! attacker recordings against the in-scenario estimator, and the CLI
//! against the library.

use std::process::Command;

use fmcw_lab::channel::{lin_to_db, noise_power, Target};
use fmcw_lab::estimation::Estimator;
use fmcw_lab::harness::{
    attacker_recordings, read_iq, run_scenario, AttackSpec, ScenarioConfig, ScenarioResult, SignalPath,
};
use fmcw_lab::waveforms::{derived_metrics, RadarConfig};

fn fp_scene(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(RadarConfig::preset("table4").unwrap(), seed);
    cfg.targets = vec![Target {
        d0: 118.0,
        v: 4.0,
        rcs: 10.0,
    }];
    cfg.attacker.d_atk = 45.0;
    cfg.attack = AttackSpec::Fp {
        d_spoof: 92.0,
        v_spoof: -9.0,
    };
    cfg
}

/// Cluster positions of every attacked frame, sorted by range.
fn attacked_clusters(r: &ScenarioResult) -> Vec<Vec<(f64, f64)>> {
    r.attack_frames()
        .map(|f| {
            let mut c: Vec<(f64, f64)> = f.clusters.iter().map(|c| (c.range_m, c.velocity_mps)).collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            c
        })
        .collect()
}

#[test]
fn full_waveform_path_matches_analytic_path_under_fp_attack() {
    let analytic = fp_scene(11);
    let mut full = analytic.clone();
    full.signal_path = SignalPath::Full;
    let (a, f) = (run_scenario(&analytic).unwrap(), run_scenario(&full).unwrap());
    let m = derived_metrics(&analytic.radar().unwrap()).unwrap();
    let (ca, cf) = (attacked_clusters(&a), attacked_clusters(&f));
    assert_eq!(ca.len(), 2);
    assert_eq!(ca.iter().map(Vec::len).collect::<Vec<_>>(), cf.iter().map(Vec::len).collect::<Vec<_>>());
    for (x, y) in ca.iter().flatten().zip(cf.iter().flatten()) {
        assert!((x.0 - y.0).abs() <= m.d_res, "range {x:?} vs {y:?}");
        assert!((x.1 - y.1).abs() <= m.v_res, "velocity {x:?} vs {y:?}");
    }
    for r in [&a, &f] {
        assert!(r.attack_frames().all(|fr| fr.outcome.spoof_success == Some(true)));
    }
}

#[test]
fn saved_recordings_reproduce_the_scenario_estimate() {
    let cfg = fp_scene(12);
    let result = run_scenario(&cfg).unwrap();
    let radar = cfg.radar().unwrap();
    let floor = lin_to_db(noise_power(cfg.attacker.sample_rate, &cfg.attacker.budget));
    let mut est = Estimator::new(cfg.estimator, cfg.attacker.sample_rate, radar.f_c);
    let recs = attacker_recordings(&cfg).unwrap();
    assert_eq!(recs.len(), cfg.attack_start_frame - 1);
    for buf in &recs {
        est.observe(&buf.samples, buf.t0, floor).unwrap();
    }
    let e = est.estimate().unwrap();
    let snap = result.frames[cfg.attack_start_frame - 2].estimate.unwrap();
    assert_eq!(e.s_est, snap.s_est);
    assert_eq!(e.t_chirp_est, snap.t_chirp_est);
    assert_eq!(e.t_frame_est, snap.t_frame_est);
    assert!((e.t_chirp_est - radar.t_chirp).abs() < 40e-9);
}

#[test]
fn frames_are_conserved_and_attack_off_ignores_attacker() {
    let mut cfg = fp_scene(13);
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(r.frames.len(), cfg.n_frames);
    assert_eq!(r.attack_frames().count(), cfg.n_frames - cfg.attack_start_frame + 1);

    cfg.attack = AttackSpec::None;
    let quiet = run_scenario(&cfg).unwrap();
    cfg.attacker.d_atk = 300.0;
    cfg.attacker.v_atk = -7.0;
    cfg.attacker.budget.tx_power += 20.0;
    assert_eq!(quiet, run_scenario(&cfg).unwrap());
    assert_eq!(quiet.attack_frames().count(), 0);
}

fn cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_fmcw-lab")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "fmcw-lab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let scenario = p("scenario.json");
    std::fs::write(&scenario, serde_json::to_string(&fp_scene(14)).unwrap()).unwrap();

    cli(&["simulate", &scenario, "-o", &p("result.json"), "--capture-dir", &p("cap")]);
    let result: ScenarioResult = serde_json::from_str(&std::fs::read_to_string(p("result.json")).unwrap()).unwrap();
    assert_eq!(result, run_scenario(&fp_scene(14)).unwrap());

    let caps: Vec<String> = (1..=5).map(|k| p(&format!("cap/frame_{k}.iq"))).collect();
    let mut args = vec!["estimate", "--carrier-hz", "1.5e9", "-o"];
    let est_path = p("estimate.json");
    args.push(&est_path);
    args.extend(caps.iter().map(String::as_str));
    cli(&args);
    let est: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&est_path).unwrap()).unwrap();
    assert_eq!(est["n_frames_observed"], 5);
    assert!((est["t_chirp_est"].as_f64().unwrap() - 501.12e-6).abs() < 40e-9);
    assert!((est["t_frame_est"].as_f64().unwrap() - 0.15).abs() < 1e-6);

    let attack = p("attack.json");
    std::fs::write(
        &attack,
        r#"{"attack": {"type": "fp", "d_spoof": 90, "v_spoof": -8}, "d_atk": 45, "n_chirps": 4}"#,
    )
    .unwrap();
    cli(&["attack", &est_path, &attack, "-o", &p("attack.iq")]);
    let iq = read_iq(p("attack.iq")).unwrap();
    assert_eq!(iq.rate, 25e6);
    assert!((iq.t0 - 0.75).abs() < 1e-5, "t0 {}", iq.t0);
    assert!(iq.samples.iter().any(|s| s.norm() > 0.0));

    let printed = cli(&["sweep", &scenario, "--trials", "2", "--mode", "accuracy", "-o", &p("sweep")]);
    assert_eq!(cli(&["report", &p("sweep")]), printed);
    assert!(printed.contains("spoof success"));
}

#[test]
fn cli_rejects_unknown_scenario_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"victim": "table4", "seed": 1, "colour": "red"}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fmcw-lab"))
        .args(["simulate", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}
