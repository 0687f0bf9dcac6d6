use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use super::IFMatrix;

/// Power |X|^2 over (range bin, doppler bin), stored range-major. Doppler
/// bins are centre-shifted so bin `n_doppler / 2` is zero velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub n_range: usize,
    pub n_doppler: usize,
    pub power: Vec<f64>,
    pub range_bin_m: f64,
    pub velocity_bin_mps: f64,
}

impl RangeDopplerMap {
    #[inline]
    pub fn at(&self, r: usize, d: usize) -> f64 {
        self.power[r * self.n_doppler + d]
    }

    pub fn db(&self, r: usize, d: usize) -> f64 {
        10.0 * self.at(r, d).log10()
    }

    pub fn range_of(&self, bin: f64) -> f64 {
        bin * self.range_bin_m
    }

    pub fn velocity_of(&self, bin: f64) -> f64 {
        (bin - (self.n_doppler / 2) as f64) * self.velocity_bin_mps
    }

    /// Nearest range bin for a range in metres (may exceed the map).
    pub fn range_bin_of(&self, range_m: f64) -> isize {
        (range_m / self.range_bin_m).round() as isize
    }

    /// Doppler bin for a velocity, wrapped into the unambiguous interval.
    pub fn doppler_bin_of(&self, v: f64) -> usize {
        let n = self.n_doppler as isize;
        let k = (v / self.velocity_bin_mps).round() as isize + n / 2;
        k.rem_euclid(n) as usize
    }

    /// Location of the strongest cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &p) in self.power.iter().enumerate() {
            if p > best.1 {
                best = (i, p);
            }
        }
        (best.0 / self.n_doppler, best.0 % self.n_doppler)
    }

    /// Writes the map in dB as CSV, one line per range bin.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in 0..self.n_range {
            let row: Vec<String> = (0..self.n_doppler).map(|d| format!("{:.3}", self.db(r, d))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Symmetric Hann window of length n.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    Window::Hann.coefficients(n)
}

/// Taper applied before an FFT axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rect,
    #[default]
    Hann,
    /// 4-term Blackman-Harris, -92 dB sidelobes.
    BlackmanHarris,
    /// Kaiser window with shape parameter beta.
    Kaiser(f64),
}

impl Window {
    /// Symmetric coefficients of length n.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        if n <= 1 || self == Window::Rect {
            return vec![1.0; n];
        }
        if let Window::Kaiser(beta) = self {
            let norm = bessel_i0(beta);
            return (0..n)
                .map(|k| {
                    let x = 2.0 * k as f64 / (n - 1) as f64 - 1.0;
                    bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()) / norm
                })
                .collect();
        }
        let a: &[f64] = match self {
            Window::Rect | Window::Kaiser(_) => unreachable!(),
            Window::Hann => &[0.5, 0.5],
            Window::BlackmanHarris => &[0.35875, 0.48829, 0.14128, 0.01168],
        };
        (0..n)
            .map(|k| {
                let x = 2.0 * PI * k as f64 / (n - 1) as f64;
                a.iter()
                    .enumerate()
                    .map(|(i, &c)| if i % 2 == 0 { c } else { -c } * (i as f64 * x).cos())
                    .sum()
            })
            .collect()
    }
}

/// Tapers for the two map axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapWindows {
    pub range: Window,
    pub doppler: Window,
}

impl Default for MapWindows {
    /// Hann on range, none on doppler.
    fn default() -> Self {
        MapWindows {
            range: Window::Hann,
            doppler: Window::Rect,
        }
    }
}

/// Modified Bessel function of the first kind, order 0 (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Hann-windowed, zero-padded range FFT per chirp, then an unwindowed FFT
/// across chirps with the zero-velocity bin moved to the centre.
pub fn range_doppler(ifm: &IFMatrix) -> RangeDopplerMap {
    range_doppler_windowed(ifm, &MapWindows::default())
}

/// [`range_doppler`] with explicit tapers on both axes.
pub fn range_doppler_windowed(ifm: &IFMatrix, windows: &MapWindows) -> RangeDopplerMap {
    let cfg = &ifm.cfg;
    let n_range = cfg.range_fft_len();
    let n_dop = ifm.rows;
    let mut planner = FftPlanner::<f64>::new();
    let fft_r = planner.plan_fft_forward(n_range);
    let fft_d = planner.plan_fft_forward(n_dop);
    let win = windows.range.coefficients(ifm.cols);
    let dwin = windows.doppler.coefficients(n_dop);

    // cube[l][r]: range spectra per chirp.
    let mut cube = vec![Complex64::new(0.0, 0.0); n_dop * n_range];
    for l in 0..n_dop {
        let dst = &mut cube[l * n_range..(l + 1) * n_range];
        for (k, (x, w)) in ifm.row(l).iter().zip(&win).enumerate() {
            dst[k] = x * (w * dwin[l]);
        }
        fft_r.process(dst);
    }

    let mut power = vec![0.0; n_range * n_dop];
    let mut col = vec![Complex64::new(0.0, 0.0); n_dop];
    let half = n_dop / 2;
    for r in 0..n_range {
        for l in 0..n_dop {
            col[l] = cube[l * n_range + r];
        }
        fft_d.process(&mut col);
        for (k, x) in col.iter().enumerate() {
            let shifted = (k + half) % n_dop;
            power[r * n_dop + shifted] = x.norm_sqr();
        }
    }

    RangeDopplerMap {
        n_range,
        n_doppler: n_dop,
        power,
        range_bin_m: cfg.range_bin_m(),
        velocity_bin_mps: cfg.lambda() / (2.0 * n_dop as f64 * cfg.t_chirp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::RadarConfig;
    use crate::C;
    use approx::assert_relative_eq;

    fn tone_matrix(cfg: &RadarConfig, f_if: f64, phi: f64) -> IFMatrix {
        let mut ifm = IFMatrix::zeros(cfg);
        for l in 0..ifm.rows {
            for (k, v) in ifm.row_mut(l).iter_mut().enumerate() {
                let t = k as f64 / cfg.f_samp;
                *v = Complex64::from_polar(1.0, 2.0 * PI * f_if * t + phi * l as f64);
            }
        }
        ifm
    }

    #[test]
    fn window_shapes() {
        for w in [Window::Hann, Window::BlackmanHarris, Window::Kaiser(12.0)] {
            let c = w.coefficients(101);
            assert!((c[50] - 1.0).abs() < 1e-12, "{w:?}");
            assert!((0..101).all(|k| (c[k] - c[100 - k]).abs() < 1e-12));
            assert!(c[0] < 1e-3);
        }
        assert_eq!(Window::Kaiser(0.0).coefficients(5), vec![1.0; 5]);
        assert_eq!(Window::Rect.coefficients(3), vec![1.0; 3]);
    }

    #[test]
    fn kaiser_far_sidelobes_stay_below_100_db() {
        let cfg = RadarConfig::preset("table4").unwrap();
        let f_if = 10.3 * cfg.f_samp / cfg.range_fft_len() as f64;
        let w = MapWindows {
            range: Window::Kaiser(12.0),
            doppler: Window::Hann,
        };
        let map = range_doppler_windowed(&tone_matrix(&cfg, f_if, 0.0), &w);
        let (r, d) = map.argmax();
        let peak = map.db(r, d);
        assert!((r + 12..map.n_range - 12).all(|k| map.db(k, d) < peak - 100.0));
    }

    #[test]
    fn config_c_tone_lands_on_expected_bins() {
        let cfg = RadarConfig::preset("table2-C").unwrap();
        let f_if = 2.0 * cfg.slope * 30.0 / C;
        let map = range_doppler(&tone_matrix(&cfg, f_if, 0.0));
        let n_fft = cfg.range_fft_len() as f64;
        let expected_r = (f_if * n_fft / cfg.f_samp).round() as usize;
        assert_eq!(map.argmax(), (expected_r, cfg.n_chirps / 2));
    }

    #[test]
    fn doppler_phase_maps_to_ten_mps() {
        let cfg = RadarConfig::preset("table2-C").unwrap();
        let phi = 4.0 * PI * 10.0 * cfg.t_chirp / cfg.lambda();
        assert_relative_eq!(phi, 0.6755, epsilon = 5e-4);
        let map = range_doppler(&tone_matrix(&cfg, 1e6, phi));
        let (_, d) = map.argmax();
        assert!((map.velocity_of(d as f64) - 10.0).abs() <= map.velocity_bin_mps);
    }

    #[test]
    fn zero_matrix_is_minus_infinity() {
        let cfg = RadarConfig::preset("table4").unwrap();
        let map = range_doppler(&IFMatrix::zeros(&cfg));
        assert!((0..map.n_range).all(|r| (0..map.n_doppler).all(|d| map.db(r, d) == f64::NEG_INFINITY)));
    }

    #[test]
    fn velocity_wraps_past_v_max() {
        let cfg = RadarConfig::preset("table4").unwrap();
        let v_max = cfg.lambda() / (4.0 * cfg.t_chirp);
        let map0 = range_doppler(&tone_matrix(&cfg, 1e5, 0.0));
        let dv = 3.0 * map0.velocity_bin_mps;
        let phi = |v: f64| 4.0 * PI * v * cfg.t_chirp / cfg.lambda();
        let above = range_doppler(&tone_matrix(&cfg, 1e5, phi(v_max + dv))).argmax().1;
        let below = range_doppler(&tone_matrix(&cfg, 1e5, phi(-v_max + dv))).argmax().1;
        assert_eq!(above, below);
        assert_relative_eq!(map0.velocity_of(above as f64), -v_max + dv, epsilon = 1e-9);
    }

    #[test]
    fn axes_match_resolution_figures() {
        let cfg = RadarConfig::preset("table4").unwrap();
        let map = range_doppler(&IFMatrix::zeros(&cfg));
        assert_eq!((map.n_range, map.n_doppler), (256, 256));
        assert_relative_eq!(map.velocity_of(0.0), -cfg.lambda() / (4.0 * cfg.t_chirp), epsilon = 1e-12);
        assert_relative_eq!(map.range_bin_m, 5.855, epsilon = 1e-3);
    }

    #[test]
    fn csv_has_one_line_per_range_bin() {
        let cfg = RadarConfig::preset("table4").unwrap();
        let map = range_doppler(&tone_matrix(&cfg, 1e5, 0.0));
        let mut out = Vec::new();
        map.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), map.n_range);
        assert_eq!(text.lines().next().unwrap().split(',').count(), map.n_doppler);
    }
}
