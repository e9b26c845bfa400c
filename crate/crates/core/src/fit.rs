//! Least-squares slopes in log-log coordinates with confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Confidence level of reported slope intervals.
pub const CONFIDENCE: f64 = 0.95;

/// Ordinary least-squares fit `log y = slope · log x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Fitted exponent.
    pub slope: f64,
    /// Intercept (of the first group, for pooled fits).
    pub intercept: f64,
    /// Standard error of the slope (`None` without residual degrees of freedom).
    pub stderr: Option<f64>,
    /// Two-sided [`CONFIDENCE`] interval for the slope.
    pub ci: Option<[f64; 2]>,
    /// Number of points used.
    pub points: usize,
}

/// Fits a single power law through `(x_i, y_i)`, all strictly positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    common_slope_fit(&[(x.to_vec(), y.to_vec())])
}

/// Fits one common exponent to several power-law groups, each with its own
/// prefactor (within-group centring, then pooled regression).
pub fn common_slope_fit(groups: &[(Vec<f64>, Vec<f64>)]) -> Result<SlopeFit> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut points = 0;
    let mut centred = Vec::new();
    let mut first_means = None;
    for (x, y) in groups {
        if x.len() != y.len() {
            return Err(Error::invalid("fit: x and y lengths differ"));
        }
        if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("fit: log-log data must be positive and finite"));
        }
        if x.len() < 2 {
            return Err(Error::invalid("fit: every group needs at least two points"));
        }
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let mx = lx.iter().sum::<f64>() / lx.len() as f64;
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        first_means.get_or_insert((mx, my));
        for (a, b) in lx.iter().zip(&ly) {
            sxx += (a - mx) * (a - mx);
            sxy += (a - mx) * (b - my);
            centred.push((a - mx, b - my));
        }
        points += x.len();
    }
    if groups.is_empty() || sxx == 0.0 {
        return Err(Error::invalid("fit: abscissae are degenerate"));
    }
    let slope = sxy / sxx;
    let (mx, my) = first_means.expect("at least one group");
    let dof = points as i64 - groups.len() as i64 - 1;
    let (stderr, ci) = if dof > 0 {
        let rss: f64 = centred.iter().map(|(a, b)| (b - slope * a).powi(2)).sum();
        let se = (rss / dof as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof as f64)
            .map_err(|e| Error::invalid(format!("fit: {e}")))?
            .inverse_cdf(0.5 + CONFIDENCE / 2.0);
        (Some(se), Some([slope - t * se, slope + t * se]))
    } else {
        (None, None)
    };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        stderr,
        ci,
        points,
    })
}

/// Geometric sequence from `start` to `stop` (inclusive) with `per_decade`
/// points per factor of ten.
pub fn geometric_sequence(start: f64, stop: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0) || per_decade == 0 {
        return Err(Error::invalid("geometric sequence needs positive endpoints and density"));
    }
    let decades = (stop / start).log10();
    let steps = (decades.abs() * per_decade as f64).round() as usize;
    if steps == 0 {
        return Ok(vec![start]);
    }
    Ok((0..=steps)
        .map(|k| start * 10f64.powf(decades * k as f64 / steps as f64))
        .collect())
}

/// True when `values` is strictly decreasing with (relatively) constant ratio.
pub fn is_geometric_decreasing(values: &[f64]) -> bool {
    if values.len() < 2 {
        return !values.is_empty() && values[0] > 0.0;
    }
    if values.iter().any(|v| !(*v > 0.0)) || values.windows(2).any(|w| w[1] >= w[0]) {
        return false;
    }
    let r0 = values[1] / values[0];
    values.windows(2).all(|w| ((w[1] / w[0]) / r0 - 1.0).abs() < 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        let [lo, hi] = f.ci.unwrap();
        assert!(lo <= 1.5 && 1.5 <= hi && hi - lo < 1e-9);
    }

    #[test]
    fn pooled_groups_share_slope() {
        let x = vec![0.1, 0.01, 0.001];
        let g1: Vec<f64> = x.iter().map(|v: &f64| 2.0 * v * v).collect();
        let g2: Vec<f64> = x.iter().map(|v: &f64| 7.0 * v * v).collect();
        let f = common_slope_fit(&[(x.clone(), g1), (x, g2)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_fit_has_interval() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let y = [1.0, 2.2, 3.9, 8.4, 15.5];
        let f = loglog_fit(&x, &y).unwrap();
        let [lo, hi] = f.ci.unwrap();
        assert!(lo < f.slope && f.slope < hi);
        assert!((f.slope - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(loglog_fit(&[1.0], &[1.0]).is_err());
        assert!(loglog_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn geometric_defaults() {
        let d = geometric_sequence(1e-1, 1e-5, 2).unwrap();
        assert_eq!(d.len(), 9);
        assert!((d[8] - 1e-5).abs() < 1e-18);
        assert!(is_geometric_decreasing(&d));
        assert!(!is_geometric_decreasing(&[1.0, 0.5, 0.3]));
        assert!(!is_geometric_decreasing(&[1.0, 2.0]));
    }
}
