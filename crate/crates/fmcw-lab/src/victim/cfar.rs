use serde::{Deserialize, Serialize};

use super::{PipelineError, RangeDopplerMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    pub train_r: usize,
    pub train_d: usize,
    pub guard_r: usize,
    pub guard_d: usize,
    pub pfa: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig {
            train_r: 8,
            train_d: 4,
            guard_r: 4,
            guard_d: 2,
            pfa: 1e-5,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.train_r == 0 || self.train_d == 0 {
            return Err(PipelineError::BadCfar("training cells per side must be >= 1"));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(PipelineError::BadCfar("pfa must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Half-width of the full window along range.
    pub fn reach_r(&self) -> usize {
        self.train_r + self.guard_r
    }

    pub fn reach_d(&self) -> usize {
        self.train_d + self.guard_d
    }

    pub fn n_training(&self) -> usize {
        let outer = (2 * self.reach_r() + 1) * (2 * self.reach_d() + 1);
        let inner = (2 * self.guard_r + 1) * (2 * self.guard_d + 1);
        outer - inner
    }

    /// Threshold multiplier for cell averaging over exponential noise.
    pub fn alpha(&self) -> f64 {
        let n = self.n_training() as f64;
        n * (self.pfa.powf(-1.0 / n) - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionPoint {
    pub range_bin: usize,
    pub doppler_bin: usize,
    /// Linear power of the cell.
    pub power: f64,
}

impl DetectionPoint {
    pub fn db(&self) -> f64 {
        10.0 * self.power.log10()
    }
}

/// Sum of `w` consecutive entries starting at each position, computed
/// directly so a strong cell never leaks into neighbours through
/// cancellation.
fn run_sums(row: &[f64], w: usize, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = row[i..i + w].iter().sum();
    }
}

/// Two-dimensional cell-averaging CFAR. Only cells whose full training
/// window fits inside the map are tested; the doppler axis is not wrapped.
pub fn ca_cfar(map: &RangeDopplerMap, c: &CfarConfig) -> Result<Vec<DetectionPoint>, PipelineError> {
    c.validate()?;
    let (wr, wd) = (2 * c.reach_r() + 1, 2 * c.reach_d() + 1);
    let (nr, nd) = (map.n_range, map.n_doppler);
    if wr > nr || wd > nd {
        return Err(PipelineError::WindowTooLarge {
            window_r: wr,
            window_d: wd,
            map_r: nr,
            map_d: nd,
        });
    }
    let alpha = c.alpha();
    let n_train = c.n_training() as f64;
    let (rr, rd) = (c.reach_r(), c.reach_d());
    let side = c.train_d;
    let nfull = nd - wd + 1;

    // full[r][j]: sum over doppler j..j+wd; left/right[r][j]: the training
    // strip either side of the guard band for a cell at doppler j + rd.
    let mut full = vec![0.0; nr * nfull];
    let mut side_sum = vec![0.0; nr * (nd - side + 1)];
    for r in 0..nr {
        let row = &map.power[r * nd..(r + 1) * nd];
        run_sums(row, wd, &mut full[r * nfull..(r + 1) * nfull]);
        let ns = nd - side + 1;
        run_sums(row, side, &mut side_sum[r * ns..(r + 1) * ns]);
    }
    let ns = nd - side + 1;

    let mut out = Vec::new();
    for r in rr..nr - rr {
        for d in rd..nd - rd {
            let j = d - rd;
            let mut noise = 0.0;
            for q in (r - rr)..(r - c.guard_r) {
                noise += full[q * nfull + j];
            }
            for q in (r + c.guard_r + 1)..=(r + rr) {
                noise += full[q * nfull + j];
            }
            let right = d + c.guard_d + 1;
            for q in (r - c.guard_r)..=(r + c.guard_r) {
                noise += side_sum[q * ns + j] + side_sum[q * ns + right];
            }
            let p = map.at(r, d);
            if p * n_train > alpha * noise {
                out.push(DetectionPoint {
                    range_bin: r,
                    doppler_bin: d,
                    power: p,
                });
            }
        }
    }
    Ok(out)
}
