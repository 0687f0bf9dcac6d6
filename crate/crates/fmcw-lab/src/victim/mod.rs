//! Victim receive chain: dechirp, Range-Doppler, CA-CFAR, DBSCAN.

mod cfar;
mod dbscan;
mod dechirp;
mod range_doppler;

pub use cfar::{ca_cfar, CfarConfig, DetectionPoint};
pub use dbscan::{dbscan_cluster, Cluster, DbscanParams};
pub use dechirp::{analytic_if_oracle, dechirp, BrickwallDecimator, IFMatrix};
pub use range_doppler::{range_doppler, range_doppler_windowed, MapWindows, RangeDopplerMap, Window};
pub(crate) use range_doppler::hann as hann_window;

use thiserror::Error;

use crate::waveforms::{synth_frame, IQBuffer, RadarConfig, WaveformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error("buffer rate {got} Hz, expected sim_rate {expected} Hz")]
    RateMismatch { expected: f64, got: f64 },
    #[error("tx and rx buffers are not aligned (t0 {tx} s vs {rx} s)")]
    Misaligned { tx: f64, rx: f64 },
    #[error("buffer holds {got} samples, frame needs {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("CFAR window {window_r}x{window_d} exceeds map {map_r}x{map_d}")]
    WindowTooLarge {
        window_r: usize,
        window_d: usize,
        map_r: usize,
        map_d: usize,
    },
    #[error("invalid CFAR configuration: {0}")]
    BadCfar(&'static str),
}

/// Everything the victim derives from one frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub map: RangeDopplerMap,
    pub detections: Vec<DetectionPoint>,
    pub clusters: Vec<Cluster>,
}

/// Steps 3-5 on an already dechirped frame.
pub fn process_if(
    ifm: &IFMatrix,
    cfar: &CfarConfig,
    dbscan: &DbscanParams,
) -> Result<FrameOutput, PipelineError> {
    process_if_windowed(ifm, &MapWindows::default(), cfar, dbscan)
}

/// [`process_if`] with explicit map tapers.
pub fn process_if_windowed(
    ifm: &IFMatrix,
    windows: &MapWindows,
    cfar: &CfarConfig,
    dbscan: &DbscanParams,
) -> Result<FrameOutput, PipelineError> {
    let map = range_doppler_windowed(ifm, windows);
    let detections = ca_cfar(&map, cfar)?;
    let clusters = dbscan_cluster(&detections, dbscan, &map);
    Ok(FrameOutput {
        map,
        detections,
        clusters,
    })
}

/// Full chain on a received frame sampled at `sim_rate` and starting at the
/// victim's frame start.
pub fn process_frame(
    rx: &IQBuffer,
    cfg: &RadarConfig,
    cfar: &CfarConfig,
    dbscan: &DbscanParams,
) -> Result<Vec<Cluster>, PipelineError> {
    let mut tx = synth_frame(cfg, &vec![0.0; cfg.n_chirps])?;
    tx.t0 = rx.t0;
    let ifm = dechirp(&tx, rx, cfg)?;
    Ok(process_if(&ifm, cfar, dbscan)?.clusters)
}
