//! Scenario configuration, the frame-by-frame simulation loop, Monte-Carlo
//! sweeps and their reports.

pub mod config;
pub mod iq;
pub mod report;
pub mod scenario;
pub mod sweeps;

pub use config::{load_scenario, AttackSpec, AttackerConfig, ScenarioConfig, SignalPath, VictimSpec};
pub use iq::{read_iq, write_iq, IqError};
pub use scenario::{attacker_recordings, match_outcomes, run_scenario, ClusterSummary, FrameRecord, Outcome, Point, ScenarioResult};
pub use report::{read_summary, render_summary, write_report};
pub use sweeps::{run_sweep, spoof_accuracy_report, SweepMode, SweepReport, Summary, TrialRow};

use thiserror::Error;

use crate::ifsim::FullPathError;
use crate::victim::PipelineError;
use crate::waveforms::WaveformError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    FullPath(#[from] FullPathError),
    #[error(transparent)]
    Iq(#[from] IqError),
}
