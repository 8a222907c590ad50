//! Monte-Carlo estimates of the expected dual objective and its parts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::StationaryMarket;

/// Expected dual objective, expenditure, gain and loss at one multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualEstimates {
    pub multiplier: f64,
    pub psi0: f64,
    pub expenditure: f64,
    pub gain: f64,
    /// `expenditure - gain`.
    pub loss: f64,
    pub se_psi0: f64,
    pub se_expenditure: f64,
    pub se_gain: f64,
    pub se_loss: f64,
    pub n_samples: usize,
}

/// A fixed set of draws `(v, d_hi, d_lo)` reused across multipliers so that
/// differences between multipliers are not blurred by sampling noise.
#[derive(Debug, Clone)]
pub struct DualSamples {
    market: StationaryMarket,
    valuation: Vec<f64>,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

#[derive(Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean_se(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

impl DualSamples {
    pub fn draw<R: Rng + ?Sized>(market: &StationaryMarket, n_samples: usize, rng: &mut R) -> Result<Self> {
        market.validate()?;
        let mut s = Self { market: market.clone(), valuation: Vec::new(), hi: Vec::new(), lo: Vec::new() };
        s.extend(n_samples, rng);
        Ok(s)
    }

    pub fn extend<R: Rng + ?Sized>(&mut self, extra: usize, rng: &mut R) {
        for _ in 0..extra {
            self.valuation.push(self.market.valuation.sample(rng));
            let d = self.market.competing.sample(rng);
            self.hi.push(d.hi);
            self.lo.push(d.lo);
        }
    }

    pub fn len(&self) -> usize {
        self.valuation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valuation.is_empty()
    }

    /// Estimates at multiplier `mu` with the unconstrained bid `delta v / mu`.
    pub fn evaluate(&self, mu: f64) -> Result<DualEstimates> {
        if !(mu > 0.0) {
            return Err(invalid(format!("multiplier must be positive, got {mu}")));
        }
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let delta = self.market.time_saving;
        let (mut psi, mut z, mut g, mut l) = (Moments::default(), Moments::default(), Moments::default(), Moments::default());
        for k in 0..n {
            let (v, hi, lo) = (self.valuation[k], self.hi[k], self.lo[k]);
            let value = delta * v;
            let bid = value / mu;
            let spend = if value > mu * hi { hi } else { 0.0 };
            let gain = self.market.gain(bid, hi, lo);
            psi.push(v - mu * gain - (value - mu * hi).max(0.0));
            z.push(spend);
            g.push(gain);
            l.push(spend - gain);
        }
        let (psi0, se_psi0) = psi.mean_se(n);
        let (expenditure, se_expenditure) = z.mean_se(n);
        let (gain, se_gain) = g.mean_se(n);
        let (_, se_loss) = l.mean_se(n);
        Ok(DualEstimates {
            multiplier: mu,
            psi0,
            expenditure,
            gain,
            loss: expenditure - gain,
            se_psi0,
            se_expenditure,
            se_gain,
            se_loss,
            n_samples: n,
        })
    }
}

/// Estimates the dual quantities at `mu` from `n_samples` fresh draws.
pub fn estimate_dual_point<R: Rng + ?Sized>(
    mu: f64,
    market: &StationaryMarket,
    n_samples: usize,
    rng: &mut R,
) -> Result<DualEstimates> {
    if n_samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n_samples });
    }
    DualSamples::draw(market, n_samples, rng)?.evaluate(mu)
}

/// Bracket, tolerance and sample budget of the stationary multiplier search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSearch {
    pub lo: f64,
    pub hi: f64,
    /// Final bracket width.
    pub tol: f64,
    pub initial_samples: usize,
    pub max_samples: usize,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self { lo: 0.1, hi: 1000.0, tol: 1e-4, initial_samples: 20_000, max_samples: 2_000_000 }
    }
}

/// Root of the expected loss found by [`find_stationary_multiplier`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryRoot {
    pub multiplier: f64,
    pub at_root: DualEstimates,
}

/// Bisection on the sample-average loss with common random numbers.
///
/// Whenever the loss at the midpoint is within two standard errors of zero
/// the sample is doubled (up to `max_samples`) before deciding which half
/// to keep, so the final bracket straddles the root of a low-noise estimate.
pub fn find_stationary_multiplier<R: Rng + ?Sized>(
    market: &StationaryMarket,
    search: &RootSearch,
    rng: &mut R,
) -> Result<StationaryRoot> {
    if !(search.lo > 0.0 && search.lo < search.hi && search.tol > 0.0) {
        return Err(invalid(format!("invalid search bracket {search:?}")));
    }
    let mut samples = DualSamples::draw(market, search.initial_samples.max(2), rng)?;
    let loss_lo = samples.evaluate(search.lo)?.loss;
    let loss_hi = samples.evaluate(search.hi)?.loss;
    if loss_lo == 0.0 && loss_hi == 0.0 {
        return Err(Error::DegenerateLoss);
    }
    if !(loss_lo > 0.0 && loss_hi < 0.0) {
        return Err(Error::NoSignChange { lo: search.lo, hi: search.hi, loss_lo, loss_hi });
    }

    let (mut lo, mut hi) = (search.lo, search.hi);
    for _ in 0..500 {
        if hi - lo <= search.tol {
            break;
        }
        let mid = if hi > 2.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let est = samples.evaluate(mid)?;
        if est.loss.abs() < 2.0 * est.se_loss && samples.len() < search.max_samples {
            let extra = samples.len().min(search.max_samples - samples.len());
            samples.extend(extra, rng);
            if samples.evaluate(lo)?.loss <= 0.0 {
                lo = search.lo;
            }
            if samples.evaluate(hi)?.loss >= 0.0 {
                hi = search.hi;
            }
            continue;
        }
        if est.loss > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let multiplier = 0.5 * (lo + hi);
    Ok(StationaryRoot { multiplier, at_root: samples.evaluate(multiplier)? })
}

/// Smallest decrease rate `-(L(b) - L(a)) / (b - a)` over consecutive grid
/// points; an empirical stand-in for the strong monotonicity constant.
pub fn estimate_monotonicity(samples: &DualSamples, grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: grid.len() });
    }
    let losses: Vec<f64> = grid.iter().map(|&mu| samples.evaluate(mu).map(|e| e.loss)).collect::<Result<_>>()?;
    Ok(grid
        .windows(2)
        .zip(losses.windows(2))
        .map(|(m, l)| -(l[1] - l[0]) / (m[1] - m[0]))
        .fold(f64::INFINITY, f64::min))
}

/// On a symmetric population the stationary profile lies on the hyperplane
/// of constant multiplier sum, so every agent ends at the initial mean.
pub fn symmetric_stationary_profile(initial_multipliers: &[f64]) -> Vec<f64> {
    let n = initial_multipliers.len();
    let mean = initial_multipliers.iter().sum::<f64>() / n.max(1) as f64;
    vec![mean; n]
}

/// Per-agent mean of several multiplier profiles, such as the final
/// profiles of long runs.
pub fn mean_profile(profiles: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = profiles.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let n = first.len();
    if profiles.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch("profiles differ in length".into()));
    }
    Ok((0..n).map(|i| profiles.iter().map(|p| p[i]).sum::<f64>() / profiles.len() as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{CompetingBidModel, ValuationModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_market(share: f64, setter: bool) -> StationaryMarket {
        StationaryMarket {
            valuation: ValuationModel::unit_uniform(),
            competing: CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: setter },
            gain_share: share,
            time_saving: 5.0,
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_valuation() {
        let m = StationaryMarket { valuation: ValuationModel::Constant { value: 0.0 }, ..uniform_market(0.1, false) };
        let e = estimate_dual_point(3.0, &m, 10_000, &mut rng(1)).unwrap();
        assert_eq!(e.expenditure, 0.0);
        assert!((e.psi0 + 3.0 * e.gain).abs() < 1e-12);
        assert!((e.loss + e.gain).abs() < 1e-15);
    }

    #[test]
    fn huge_multiplier_never_wins() {
        let m = uniform_market(0.1, false);
        let e = estimate_dual_point(1e9, &m, 10_000, &mut rng(1)).unwrap();
        assert!(e.expenditure < 1e-6);
        assert!((e.psi0 - (0.5 - 1e9 * e.gain)).abs() < 0.05 + 1e-6 * 1e9 * e.gain);
    }

    /// Closed form of E[d 1{5v > mu d}] for v, d ~ U[0, 1].
    fn uniform_expenditure(mu: f64) -> f64 {
        if mu >= 5.0 {
            25.0 / (6.0 * mu * mu)
        } else {
            0.5 - mu / 15.0
        }
    }

    /// Midpoint-rule quadrature of the same double integral.
    fn quadrature_expenditure(mu: f64) -> f64 {
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let v = (i as f64 + 0.5) * h;
            for j in 0..n {
                let d = (j as f64 + 0.5) * h;
                if 5.0 * v > mu * d {
                    total += d;
                }
            }
        }
        total * h * h
    }

    #[test]
    fn expenditure_matches_quadrature() {
        for mu in [2.0, 5.0, 9.0] {
            assert!((quadrature_expenditure(mu) - uniform_expenditure(mu)).abs() < 1e-3);
        }
        let e = estimate_dual_point(5.0, &uniform_market(0.1, false), 200_000, &mut rng(4)).unwrap();
        assert!((e.expenditure - uniform_expenditure(5.0)).abs() < 3.0 * e.se_expenditure, "{e:?}");
        assert!((e.loss - (e.expenditure - e.gain)).abs() == 0.0);
    }

    #[test]
    fn standard_errors_shrink_like_root_n() {
        let m = uniform_market(0.1, true);
        let se: Vec<f64> = [1_000usize, 10_000, 100_000]
            .iter()
            .map(|&n| estimate_dual_point(4.0, &m, n, &mut rng(n as u64)).unwrap().se_loss)
            .collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            let expected = 10f64.sqrt();
            assert!(ratio > expected / 1.5 && ratio < expected * 1.5, "{se:?}");
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            estimate_dual_point(1.0, &uniform_market(0.1, true), 1, &mut rng(1)),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn point_mass_root() {
        // v = 1, d = 0.5, no gains beyond the floor price: the agent wins iff
        // 5 / mu > 0.5, so the loss is 0.5 - 0.05 below mu = 10 and -0.05 above.
        let m = StationaryMarket {
            valuation: ValuationModel::Constant { value: 1.0 },
            competing: CompetingBidModel::IidPair { marginal: ValuationModel::Constant { value: 0.5 }, price_setter_allowed: false },
            gain_share: 0.1,
            time_saving: 5.0,
        };
        let root = find_stationary_multiplier(&m, &RootSearch { tol: 1e-6, ..RootSearch::default() }, &mut rng(3)).unwrap();
        assert!((root.multiplier - 10.0).abs() < 1e-6, "{root:?}");
    }

    #[test]
    fn zero_prices_are_degenerate() {
        let m = StationaryMarket {
            competing: CompetingBidModel::IidPair { marginal: ValuationModel::Constant { value: 0.0 }, price_setter_allowed: true },
            ..uniform_market(0.1, true)
        };
        assert_eq!(find_stationary_multiplier(&m, &RootSearch::default(), &mut rng(1)), Err(Error::DegenerateLoss));
    }

    #[test]
    fn uniform_root_matches_closed_form() {
        // Without price setting the gain is 0.1 E[d] = 0.05 for every mu, and
        // 25 / (6 mu^2) = 0.05 gives mu = sqrt(250 / 3).
        let root = find_stationary_multiplier(&uniform_market(0.1, false), &RootSearch::default(), &mut rng(8)).unwrap();
        let exact = (250.0f64 / 3.0).sqrt();
        assert!((root.multiplier - exact).abs() / exact < 0.01, "{root:?}");
    }

    #[test]
    fn no_sign_change_reported() {
        let err = find_stationary_multiplier(
            &uniform_market(0.1, false),
            &RootSearch { lo: 20.0, hi: 1000.0, ..RootSearch::default() },
            &mut rng(1),
        );
        assert!(matches!(err, Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn monotonicity_is_positive_on_decreasing_loss() {
        let s = DualSamples::draw(&uniform_market(0.1, false), 50_000, &mut rng(2)).unwrap();
        let lam = estimate_monotonicity(&s, &[4.0, 6.0, 8.0, 10.0, 12.0]).unwrap();
        assert!(lam > 0.0);
    }

    #[test]
    fn profiles() {
        assert_eq!(symmetric_stationary_profile(&[5.0, 6.0, 5.0, 6.0]), vec![5.5; 4]);
        assert_eq!(mean_profile(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(), vec![2.0, 3.0]);
        assert!(mean_profile(&[]).is_err());
    }
}
