//! Assignment of agents to parallel auctions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-agent distribution over the `M` auctions held each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatchingModel {
    /// Every agent picks an auction uniformly at random.
    UniformRandom,
    /// Agent `i` always joins auction `assignment[i]`.
    Fixed { assignment: Vec<usize> },
    /// Row `i` is agent `i`'s distribution over auctions.
    Custom { probabilities: Vec<Vec<f64>> },
}

const ROW_TOL: f64 = 1e-12;

impl MatchingModel {
    pub fn validate(&self, n_agents: usize, n_auctions: usize) -> Result<()> {
        if n_auctions == 0 {
            return Err(Error::InvalidConfig("need at least one auction".into()));
        }
        match self {
            MatchingModel::UniformRandom => Ok(()),
            MatchingModel::Fixed { assignment } => {
                if assignment.len() != n_agents {
                    return Err(Error::DimensionMismatch(format!(
                        "assignment has {} entries for {} agents",
                        assignment.len(),
                        n_agents
                    )));
                }
                if let Some(&m) = assignment.iter().find(|&&m| m >= n_auctions) {
                    return Err(Error::DimensionMismatch(format!("auction index {m} out of range 0..{n_auctions}")));
                }
                Ok(())
            }
            MatchingModel::Custom { probabilities } => {
                if probabilities.len() != n_agents {
                    return Err(Error::DimensionMismatch(format!(
                        "probability matrix has {} rows for {} agents",
                        probabilities.len(),
                        n_agents
                    )));
                }
                for (i, row) in probabilities.iter().enumerate() {
                    if row.len() != n_auctions {
                        return Err(Error::DimensionMismatch(format!(
                            "row {i} has {} entries for {n_auctions} auctions",
                            row.len()
                        )));
                    }
                    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                        return Err(Error::InvalidConfig(format!("row {i} has a negative or non-finite entry")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_TOL {
                        return Err(Error::InvalidConfig(format!("row {i} sums to {sum}, expected 1")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Dense `N x M` matrix of participation probabilities.
    pub fn probability_matrix(&self, n_agents: usize, n_auctions: usize) -> Result<Vec<Vec<f64>>> {
        self.validate(n_agents, n_auctions)?;
        Ok(match self {
            MatchingModel::UniformRandom => vec![vec![1.0 / n_auctions as f64; n_auctions]; n_agents],
            MatchingModel::Fixed { assignment } => assignment
                .iter()
                .map(|&m| {
                    let mut row = vec![0.0; n_auctions];
                    row[m] = 1.0;
                    row
                })
                .collect(),
            MatchingModel::Custom { probabilities } => probabilities.clone(),
        })
    }
}

/// Pairwise matching probabilities `a[i][j] = sum_m pi[i][m] * pi[j][m]`.
///
/// The diagonal is set to zero. Each off-diagonal pair is computed once and
/// mirrored, so the matrix is exactly symmetric.
pub fn matching_probabilities(model: &MatchingModel, n_agents: usize, n_auctions: usize) -> Result<Vec<Vec<f64>>> {
    let pi = model.probability_matrix(n_agents, n_auctions)?;
    let mut a = vec![vec![0.0; n_agents]; n_agents];
    for i in 0..n_agents {
        for j in (i + 1)..n_agents {
            let v: f64 = pi[i].iter().zip(&pi[j]).map(|(p, q)| p * q).sum();
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    Ok(a)
}

/// Draws auction assignments for one agent per call.
#[derive(Debug, Clone)]
pub struct Matcher {
    n_auctions: usize,
    rule: Rule,
}

#[derive(Debug, Clone)]
enum Rule {
    Uniform,
    Fixed(Vec<usize>),
    Cumulative(Vec<Vec<f64>>),
}

impl Matcher {
    pub fn new(model: &MatchingModel, n_agents: usize, n_auctions: usize) -> Result<Self> {
        model.validate(n_agents, n_auctions)?;
        let rule = match model {
            _ if n_auctions == 1 => Rule::Fixed(vec![0; n_agents]),
            MatchingModel::UniformRandom => Rule::Uniform,
            MatchingModel::Fixed { assignment } => Rule::Fixed(assignment.clone()),
            MatchingModel::Custom { probabilities } => Rule::Cumulative(
                probabilities
                    .iter()
                    .map(|row| {
                        let mut acc = 0.0;
                        row.iter()
                            .map(|p| {
                                acc += p;
                                acc
                            })
                            .collect()
                    })
                    .collect(),
            ),
        };
        Ok(Self { n_auctions, rule })
    }

    pub fn n_auctions(&self) -> usize {
        self.n_auctions
    }

    /// Whether drawing an assignment consumes randomness.
    pub fn is_random(&self) -> bool {
        !matches!(self.rule, Rule::Fixed(_))
    }

    #[inline]
    pub fn assign<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> usize {
        match &self.rule {
            Rule::Uniform => rng.random_range(0..self.n_auctions),
            Rule::Fixed(a) => a[agent],
            Rule::Cumulative(c) => {
                let row = &c[agent];
                let u: f64 = rng.random::<f64>() * row[row.len() - 1];
                row.iter().position(|&x| u < x).unwrap_or(row.len() - 1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_three_agents_two_auctions() {
        let a = matching_probabilities(&MatchingModel::UniformRandom, 3, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((a[i][j] - 0.5).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn uniform_norm_scales_like_n_over_m() {
        let (n, m) = (100usize, 10usize);
        let a = matching_probabilities(&MatchingModel::UniformRandom, n, m).unwrap();
        assert!((a[0][1] - 1.0 / m as f64).abs() < 1e-15);
        let norm: f64 = a[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        let scaled = (n as f64).sqrt() * norm;
        let expected = ((n * (n - 1)) as f64).sqrt() / m as f64;
        assert!((scaled - expected).abs() < 1e-12);
        assert!((scaled - n as f64 / m as f64).abs() / (n as f64 / m as f64) < 0.01);
    }

    #[test]
    fn fixed_shared_auction() {
        let model = MatchingModel::Fixed { assignment: vec![0, 0, 0, 0] };
        let a = matching_probabilities(&model, 4, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a[i][j], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn custom_symmetric_and_bounded() {
        let model = MatchingModel::Custom {
            probabilities: vec![vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0], vec![0.1, 0.1, 0.8]],
        };
        let a = matching_probabilities(&model, 3, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i][j], a[j][i]);
                assert!((0.0..=1.0).contains(&a[i][j]));
            }
        }
        assert!((a[0][2] - (0.02 + 0.03 + 0.4)).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            matching_probabilities(&MatchingModel::Fixed { assignment: vec![0, 1] }, 3, 2),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            matching_probabilities(&MatchingModel::Fixed { assignment: vec![0, 1, 2] }, 3, 2),
            Err(Error::DimensionMismatch(_))
        ));
        let bad = MatchingModel::Custom { probabilities: vec![vec![0.5, 0.4]; 2] };
        assert!(bad.validate(2, 2).is_err());
    }

    #[test]
    fn custom_sampler_frequencies() {
        let model = MatchingModel::Custom { probabilities: vec![vec![0.2, 0.3, 0.5]] };
        let m = Matcher::new(&model, 1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[m.assign(0, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 4.0 * sd);
        }
    }
}
