//! Replication statistics and power-law fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Sample mean with a two-sided 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Two-sided 95% t quantile with `dof` degrees of freedom.
pub fn t_quantile_95(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64).map(|t| t.inverse_cdf(0.975)).unwrap_or(f64::NAN)
}

/// Mean and 95% interval; a single observation yields a zero-width interval.
pub fn mean_ci(xs: &[f64]) -> Result<MeanCi> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(MeanCi { mean, ci_lo: mean, ci_hi: mean, std_error: 0.0, n });
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let half = t_quantile_95(n - 1) * se;
    Ok(MeanCi { mean, ci_lo: mean - half, ci_hi: mean + half, std_error: se, n })
}

/// Least-squares line through `(ln T, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub n_points: usize,
}

impl SlopeFit {
    /// 95% interval on the slope.
    pub fn slope_ci(&self) -> (f64, f64) {
        let half = t_quantile_95(self.n_points.saturating_sub(2).max(1)) * self.stderr;
        (self.slope - half, self.slope + half)
    }
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositive(if x > 0.0 { y } else { x }));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("log-log fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, stderr, n_points: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> Vec<f64> {
        (0..7).map(|k| 10f64.powf(2.0 + 0.5 * k as f64)).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = grid().into_iter().map(|t| (t, 3.0 * t.powf(-0.5))).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
        let pts: Vec<(f64, f64)> = grid().into_iter().map(|t| (t, 2.0)).collect();
        assert!(fit_loglog_slope(&pts).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts: Vec<(f64, f64)> = grid().into_iter().map(|t| (t, t.recip() * f64::exp(noise.sample(&mut rng)))).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::NonPositive(_))));
    }

    #[test]
    fn t_interval() {
        // t_{0.975, 9} = 2.262157...
        assert!((t_quantile_95(9) - 2.262_157_162_8).abs() < 1e-6);
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ci = mean_ci(&xs).unwrap();
        assert_eq!(ci.mean, 5.5);
        let se = (55.0f64 / 6.0 / 10.0).sqrt();
        assert!((ci.ci_hi - 5.5 - 2.262_157_162_8 * se).abs() < 1e-6);
        let one = mean_ci(&[4.0]).unwrap();
        assert_eq!((one.ci_lo, one.ci_hi), (4.0, 4.0));
        assert!(mean_ci(&[]).is_err());
    }
}
