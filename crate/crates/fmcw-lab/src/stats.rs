//! Small statistics helpers shared by estimation and reporting.

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Percentile with linear interpolation between order statistics
/// (`p` in [0, 100]). Input need not be sorted.
pub fn percentile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(percentile_sorted(&v, p))
}

pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(xs: &[f64]) -> Option<f64> {
    percentile(xs, 50.0)
}

/// Keeps samples inside [Q1 - 1.5 IQR, Q3 + 1.5 IQR], re-deriving the
/// fences until nothing more is removed. Fewer than four samples are
/// returned unchanged.
pub fn iqr_filter(xs: &[f64]) -> Vec<f64> {
    let mut cur = xs.to_vec();
    loop {
        if cur.len() < 4 {
            return cur;
        }
        let mut v = cur.clone();
        v.sort_by(f64::total_cmp);
        let q1 = percentile_sorted(&v, 25.0);
        let q3 = percentile_sorted(&v, 75.0);
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let next: Vec<f64> = cur.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
        if next.len() == cur.len() {
            return cur;
        }
        cur = next;
    }
}

/// Mean after the IQR outlier filter.
pub fn iqr_mean(xs: &[f64]) -> Option<f64> {
    mean(&iqr_filter(xs))
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// `None` when fewer than two points or all `x` are equal.
pub fn ols(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Pearson kurtosis (normal = 3).
pub fn kurtosis(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - m) * (x - m);
        m2 += d;
        m4 += d * d;
    }
    let n = xs.len() as f64;
    m2 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        None
    } else {
        Some(m4 / (m2 * m2))
    }
}

/// Empirical CDF as (value, fraction <= value) pairs, sorted ascending.
pub fn ecdf(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| (*x, (i + 1) as f64 / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iqr_drops_textbook_outlier() {
        let kept = iqr_filter(&[10.0, 10.0, 10.0, 10.0, 100.0]);
        assert_eq!(kept, vec![10.0; 4]);
        assert_eq!(iqr_mean(&[10.0, 10.0, 10.0, 10.0, 100.0]), Some(10.0));
    }

    #[test]
    fn short_input_skips_filter() {
        assert_eq!(iqr_mean(&[1.0, 2.0, 100.0]), Some(103.0 / 3.0));
    }

    #[test]
    fn percentile_matches_hand_interpolation() {
        let xs = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&xs, 50.0), Some(3.0));
        // position 0.9 * 4 = 3.6 -> 4 + 0.6 * (5 - 4)
        assert!((percentile(&xs, 90.0).unwrap() - 4.6).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept + 2.0).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn kurtosis_of_two_level_signal_is_one() {
        let xs = [1.0, -1.0, 1.0, -1.0];
        assert!((kurtosis(&xs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ecdf_ends_at_one() {
        let c = ecdf(&[3.0, 1.0, 2.0]);
        assert_eq!(c.last().unwrap().1, 1.0);
        assert!(c.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }
}
