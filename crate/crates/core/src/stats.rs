//! Exponential decay fits and small sample statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("fit needs at least 3 points in the window, got {0}")]
    TooFewPoints(usize),
    #[error("value {value} at t = {time} is not strictly positive")]
    NonPositive { time: f64, value: f64 },
    #[error("window [{0}, {1}) does not lie inside the series")]
    BadWindow(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares through `(x, y)` points; `None` for fewer than two
/// points or a degenerate abscissa.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// `value ≈ intercept · exp(-rate · t)` fitted in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Set when the log-values are constant; `r2` is then reported as 0.
    pub flat: bool,
    /// Half-open index range `[start, end)` used by the fit.
    pub window: (usize, usize),
    /// Standard error of `rate` propagated from per-point standard errors,
    /// when those were supplied.
    pub rate_se: Option<f64>,
}

fn check_window(
    times: &[f64],
    values: &[f64],
    window: (usize, usize),
) -> Result<Vec<(f64, f64)>, FitError> {
    let (a, b) = window;
    if a > b || b > times.len() || b > values.len() {
        return Err(FitError::BadWindow(a, b));
    }
    if b - a < 3 {
        return Err(FitError::TooFewPoints(b - a));
    }
    (a..b)
        .map(|i| {
            if values[i] > 0.0 && values[i].is_finite() {
                Ok((times[i], values[i].ln()))
            } else {
                Err(FitError::NonPositive {
                    time: times[i],
                    value: values[i],
                })
            }
        })
        .collect()
}

/// Least-squares line through `(t, log value)` over `window`.
pub fn fit_decay_rate(
    times: &[f64],
    values: &[f64],
    window: (usize, usize),
) -> Result<DecayFit, FitError> {
    let pts = check_window(times, values, window)?;
    let fit = linear_fit(&pts).ok_or(FitError::TooFewPoints(pts.len()))?;
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    Ok(DecayFit {
        rate: -fit.slope,
        intercept: fit.intercept.exp(),
        r2: if flat { 0.0 } else { fit.r2 },
        flat,
        window,
        rate_se: None,
    })
}

/// Same fit, plus the rate's standard error propagated from the per-point
/// standard errors `ses` (delta method: `se(log v) ≈ se(v)/v`).
pub fn fit_decay_rate_with_errors(
    times: &[f64],
    values: &[f64],
    ses: &[f64],
    window: (usize, usize),
) -> Result<DecayFit, FitError> {
    let mut fit = fit_decay_rate(times, values, window)?;
    let (a, b) = window;
    let n = (b - a) as f64;
    let mt = times[a..b].iter().sum::<f64>() / n;
    let sxx: f64 = times[a..b].iter().map(|t| (t - mt).powi(2)).sum();
    // slope = Σ (t_i - mt) y_i / sxx, so var = Σ (t_i - mt)² var(y_i) / sxx²
    let var: f64 = (a..b)
        .map(|i| {
            let rel = ses[i] / values[i];
            (times[i] - mt).powi(2) * rel * rel
        })
        .sum::<f64>()
        / (sxx * sxx);
    fit.rate_se = Some(var.sqrt());
    Ok(fit)
}

/// Longest run of indices starting at the first index with `times[i] ≥ t_min`
/// on which `|value| > factor · se`. Returns `None` when that run is shorter
/// than three points.
pub fn signal_window(
    times: &[f64],
    values: &[f64],
    ses: &[f64],
    t_min: f64,
    factor: f64,
) -> Option<(usize, usize)> {
    let start = times.iter().position(|&t| t >= t_min)?;
    let mut end = start;
    while end < values.len() && values[end].abs() > factor * ses[end] && values[end] != 0.0 {
        end += 1;
    }
    (end - start >= 3).then_some((start, end))
}

/// A `(time, value)` series with its fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub fit: Option<DecayFit>,
    /// Why no fit was produced, if none was.
    pub note: Option<String>,
}

impl DecaySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, std_errors: Vec<f64>) -> Self {
        DecaySeries {
            times,
            values,
            std_errors,
            fit: None,
            note: None,
        }
    }

    /// Fit over an explicit index window.
    pub fn fit_window(mut self, window: (usize, usize)) -> Self {
        match fit_decay_rate_with_errors(&self.times, &self.values, &self.std_errors, window) {
            Ok(f) => self.fit = Some(f),
            Err(e) => self.note = Some(e.to_string()),
        }
        self
    }

    /// Fit over the points with `t0 ≤ t ≤ t1`.
    pub fn fit_time_window(self, t0: f64, t1: f64) -> Self {
        let a = self.times.iter().position(|&t| t >= t0 - 1e-12).unwrap_or(self.times.len());
        let b = self
            .times
            .iter()
            .rposition(|&t| t <= t1 + 1e-12)
            .map_or(0, |i| i + 1)
            .max(a);
        self.fit_window((a, b))
    }

    /// Fit over the automatically selected above-noise window.
    pub fn fit_auto(mut self, t_min: f64, noise_factor: f64) -> Self {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        match signal_window(&self.times, &abs, &self.std_errors, t_min, noise_factor) {
            Some(w) => {
                match fit_decay_rate_with_errors(&self.times, &abs, &self.std_errors, w) {
                    Ok(f) => self.fit = Some(f),
                    Err(e) => self.note = Some(e.to_string()),
                }
            }
            None => {
                let t = self
                    .times
                    .iter()
                    .zip(&abs)
                    .zip(&self.std_errors)
                    .find(|((t, v), s)| **t >= t_min && **v <= noise_factor * **s)
                    .map(|((t, _), _)| *t);
                self.note = Some(match t {
                    Some(t) => format!("decayed below noise floor by t = {t}"),
                    None => "fewer than 3 points in the fit window".into(),
                });
            }
        }
        self
    }
}

/// Running mean / variance accumulator (Welford), combined in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 1.0 {
            0.0
        } else {
            (self.variance() / self.n).sqrt()
        }
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_exponential_recovered() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_decay_rate(&t, &v, (0, 10)).unwrap();
        assert!((f.rate - 0.7).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(!f.flat);
    }

    #[test]
    fn constant_series_is_flat() {
        let t: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let v = vec![2.0; 5];
        let f = fit_decay_rate(&t, &v, (0, 5)).unwrap();
        assert_eq!(f.rate, 0.0);
        assert_eq!(f.r2, 0.0);
        assert!(f.flat);
    }

    #[test]
    fn zero_in_window_is_an_error() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 0.5, 0.0, 0.1];
        assert!(matches!(
            fit_decay_rate(&t, &v, (0, 4)),
            Err(FitError::NonPositive { .. })
        ));
        assert!(fit_decay_rate(&t, &v, (0, 2)).is_err());
        assert_eq!(fit_decay_rate(&t, &v, (0, 9)), Err(FitError::BadWindow(0, 9)));
    }

    #[test]
    fn propagated_error_shrinks_with_point_errors() {
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (-0.3 * t).exp()).collect();
        let se1: Vec<f64> = v.iter().map(|v| 0.02 * v).collect();
        let se2: Vec<f64> = se1.iter().map(|s| s / 2f64.sqrt()).collect();
        let a = fit_decay_rate_with_errors(&t, &v, &se1, (0, 8)).unwrap();
        let b = fit_decay_rate_with_errors(&t, &v, &se2, (0, 8)).unwrap();
        let ratio = b.rate_se.unwrap() / a.rate_se.unwrap();
        assert!((ratio - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn signal_window_stops_at_noise() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let v = [1.0, 0.5, 0.25, 0.12, 0.01, 0.3];
        let s = [0.01; 6];
        assert_eq!(signal_window(&t, &v, &s, 0.0, 3.0), Some((0, 4)));
        assert_eq!(signal_window(&t, &v, &s, 1.0, 3.0), Some((1, 4)));
        assert_eq!(signal_window(&t, &v, &s, 2.5, 3.0), None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(xs in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            let m = Moments::from_slice(&xs);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((m.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
            prop_assert!((m.variance() - var).abs() <= 1e-7 * (1.0 + var));
        }

        #[test]
        fn fit_recovers_any_rate(rate in -2.0f64..2.0, c in 0.1f64..10.0) {
            let t: Vec<f64> = (0..6).map(|i| i as f64 * 0.3).collect();
            let v: Vec<f64> = t.iter().map(|t| c * (-rate * t).exp()).collect();
            let f = fit_decay_rate(&t, &v, (0, 6)).unwrap();
            prop_assert!((f.rate - rate).abs() < 1e-10);
        }
    }
}
