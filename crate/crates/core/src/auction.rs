//! Clearing of the multi-winner second-price karma auction.
//!
//! In each auction the `capacity` highest bidders win and all of them pay the
//! next highest bid. The total price collected across all parallel auctions
//! is split evenly over the whole population. Ties are broken by a random
//! per-round priority supplied by the caller.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::CompetingBidModel;
use crate::error::{invalid, Error, Result};
use crate::params::MechanismParams;

/// Bids and auction assignments of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundBids {
    pub bids: Vec<f64>,
    /// Auction index of each agent.
    pub assignment: Vec<usize>,
}

/// Result of clearing one round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodOutcome {
    pub winners: Vec<bool>,
    /// Price (the first losing bid) of each auction, 0 when under-filled.
    pub price_per_auction: Vec<f64>,
    pub payments: Vec<f64>,
    /// Gain received by every agent; redistribution is uniform.
    pub gain: f64,
    /// Lowest bid among others that still wins, per agent.
    pub competing_hi: Vec<f64>,
    /// Highest losing bid among others, per agent.
    pub competing_lo: Vec<f64>,
    /// Literal cost `v (1 - x delta)`, filled by [`PeriodOutcome::settle_costs`].
    pub costs: Vec<f64>,
    /// Saved value `x delta v`, filled by [`PeriodOutcome::settle_costs`].
    pub saved: Vec<f64>,
}

impl PeriodOutcome {
    fn reset(&mut self, n: usize, m: usize) {
        self.winners.clear();
        self.winners.resize(n, false);
        self.payments.clear();
        self.payments.resize(n, 0.0);
        self.competing_hi.clear();
        self.competing_hi.resize(n, 0.0);
        self.competing_lo.clear();
        self.competing_lo.resize(n, 0.0);
        self.price_per_auction.clear();
        self.price_per_auction.resize(m, 0.0);
        self.costs.clear();
        self.saved.clear();
        self.gain = 0.0;
    }

    /// Per-agent gains as a vector (all entries equal).
    pub fn gains(&self) -> Vec<f64> {
        vec![self.gain; self.winners.len()]
    }

    pub fn settle_costs(&mut self, valuations: &[f64], time_saving: f64) {
        self.costs.clear();
        self.saved.clear();
        for (&v, &x) in valuations.iter().zip(&self.winners) {
            let (c, s) = cost_and_saved(v, x, time_saving);
            self.costs.push(c);
            self.saved.push(s);
        }
    }
}

/// Literal cost and saved value of one round.
#[inline]
pub fn cost_and_saved(valuation: f64, won: bool, time_saving: f64) -> (f64, f64) {
    let saved = if won { time_saving * valuation } else { 0.0 };
    (valuation - saved, saved)
}

/// Reusable buffers for clearing rounds without allocating.
#[derive(Debug, Clone, Default)]
pub struct Clearing {
    pools: Vec<Vec<usize>>,
}

impl Clearing {
    pub fn new() -> Self {
        Self::default()
    }

    /// Clears all auctions of one round into `out`.
    ///
    /// `priority` breaks ties between equal bids: the larger priority ranks
    /// first. All slices must have the population length and every
    /// assignment must be below `n_auctions`.
    pub fn clear(
        &mut self,
        bids: &[f64],
        assignment: &[usize],
        priority: &[u64],
        capacity: usize,
        n_auctions: usize,
        out: &mut PeriodOutcome,
    ) {
        let n = bids.len();
        debug_assert_eq!(assignment.len(), n);
        debug_assert_eq!(priority.len(), n);
        out.reset(n, n_auctions);
        if self.pools.len() < n_auctions {
            self.pools.resize_with(n_auctions, Vec::new);
        }
        for pool in &mut self.pools[..n_auctions] {
            pool.clear();
        }
        for (i, &m) in assignment.iter().enumerate() {
            self.pools[m].push(i);
        }

        let ranks_first = |a: &usize, b: &usize| -> Ordering {
            bids[*b].total_cmp(&bids[*a]).then_with(|| priority[*b].cmp(&priority[*a]))
        };

        let mut total_price = 0.0;
        for m in 0..n_auctions {
            let pool = &mut self.pools[m];
            // Only the top capacity + 2 positions matter for prices and
            // competing bids.
            let head = (capacity + 2).min(pool.len());
            if pool.len() > head {
                pool.select_nth_unstable_by(head - 1, ranks_first);
            }
            pool[..head].sort_unstable_by(ranks_first);
            let sorted = |r: usize| pool.get(r).filter(|_| r < head).map_or(0.0, |&i| bids[i]);

            let price = sorted(capacity);
            out.price_per_auction[m] = price;
            total_price += price;

            for (r, &i) in pool.iter().enumerate() {
                let won = r < capacity;
                out.winners[i] = won;
                if won {
                    out.payments[i] = price;
                    out.competing_hi[i] = sorted(capacity);
                    out.competing_lo[i] = sorted(capacity + 1);
                } else {
                    out.competing_hi[i] = sorted(capacity - 1);
                    out.competing_lo[i] = if r == capacity { sorted(capacity + 1) } else { sorted(capacity) };
                }
            }
        }
        out.gain = capacity as f64 / n as f64 * total_price;
    }
}

/// Clears one round and returns a freshly allocated outcome.
pub fn clear_auction<R: Rng + ?Sized>(
    bids: &RoundBids,
    params: &MechanismParams,
    tie_stream: &mut R,
) -> Result<PeriodOutcome> {
    let n = params.n_agents;
    if bids.bids.len() != n || bids.assignment.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} bids and assignments, got {} and {}",
            bids.bids.len(),
            bids.assignment.len()
        )));
    }
    if let Some(&m) = bids.assignment.iter().find(|&&m| m >= params.n_auctions) {
        return Err(Error::DimensionMismatch(format!("auction index {m} out of range")));
    }
    if bids.bids.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(invalid("bids must be finite and nonnegative"));
    }
    let priority: Vec<u64> = (0..n).map(|_| tie_stream.random()).collect();
    let mut out = PeriodOutcome::default();
    Clearing::new().clear(&bids.bids, &bids.assignment, &priority, params.capacity, params.n_auctions, &mut out);
    Ok(out)
}

/// Monte-Carlo estimate of the extra gain a loser could capture by setting
/// the price, `gain_share * E[d_hi - d_lo]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualGain {
    pub estimate: f64,
    pub std_error: f64,
}

pub fn residual_gain<R: Rng + ?Sized>(
    model: &CompetingBidModel,
    gain_share: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<ResidualGain> {
    model.validate()?;
    match model {
        CompetingBidModel::IidPair { price_setter_allowed: false, .. } => {
            Ok(ResidualGain { estimate: 0.0, std_error: 0.0 })
        }
        CompetingBidModel::Empirical { pairs } => {
            let mean = pairs.iter().map(|p| p[0] - p[1]).sum::<f64>() / pairs.len() as f64;
            Ok(ResidualGain { estimate: gain_share * mean, std_error: 0.0 })
        }
        CompetingBidModel::IidPair { .. } => {
            if n_samples < 2 {
                return Err(Error::TooFewSamples { needed: 2, got: n_samples });
            }
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..n_samples {
                let d = model.sample(rng);
                let gap = d.hi - d.lo;
                sum += gap;
                sum_sq += gap * gap;
            }
            let n = n_samples as f64;
            let mean = sum / n;
            let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(ResidualGain { estimate: gain_share * mean, std_error: gain_share * (var / n).sqrt() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValuationModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mech(n: usize, gamma: usize, m: usize) -> MechanismParams {
        MechanismParams { n_agents: n, capacity: gamma, n_auctions: m, time_saving: 5.0, horizon: 1 }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn second_price_single_winner() {
        let bids = RoundBids { bids: vec![0.9, 0.5, 0.3, 0.1], assignment: vec![0; 4] };
        let out = clear_auction(&bids, &mech(4, 1, 1), &mut rng()).unwrap();
        assert_eq!(out.winners, vec![true, false, false, false]);
        assert_eq!(out.price_per_auction, vec![0.5]);
        assert_eq!(out.payments, vec![0.5, 0.0, 0.0, 0.0]);
        assert!((out.gain - 0.125).abs() < 1e-15);
        assert_eq!(out.competing_hi, vec![0.5, 0.9, 0.9, 0.9]);
        assert_eq!(out.competing_lo, vec![0.3, 0.3, 0.5, 0.5]);
    }

    #[test]
    fn two_auctions_with_padding() {
        let bids = RoundBids { bids: vec![0.8, 0.2, 0.6], assignment: vec![0, 0, 1] };
        let out = clear_auction(&bids, &mech(3, 1, 2), &mut rng()).unwrap();
        assert_eq!(out.price_per_auction, vec![0.2, 0.0]);
        assert_eq!(out.winners, vec![true, false, true]);
        assert!((out.gain - 0.2 / 3.0).abs() < 1e-15);
        assert_eq!((out.competing_hi[2], out.competing_lo[2]), (0.0, 0.0));
        assert_eq!((out.competing_hi[1], out.competing_lo[1]), (0.8, 0.0));
    }

    #[test]
    fn five_winners_gain() {
        let mut bids: Vec<f64> = (0..50).map(|i| i as f64 / 1000.0).collect();
        bids[45..].fill(0.9);
        bids[44] = 0.4;
        let out = clear_auction(&RoundBids { bids, assignment: vec![0; 50] }, &mech(50, 5, 1), &mut rng()).unwrap();
        assert_eq!(out.price_per_auction[0], 0.4);
        assert!((out.gain - 0.04).abs() < 1e-15);
    }

    #[test]
    fn dimension_checks() {
        let bids = RoundBids { bids: vec![0.1, 0.2], assignment: vec![0, 0] };
        assert!(clear_auction(&bids, &mech(3, 1, 1), &mut rng()).is_err());
        let bids = RoundBids { bids: vec![0.1, 0.2, 0.3], assignment: vec![0, 0, 2] };
        assert!(clear_auction(&bids, &mech(3, 1, 2), &mut rng()).is_err());
    }

    #[test]
    fn ties_split_evenly() {
        let k = 4;
        let trials = 10_000;
        let bids = RoundBids { bids: vec![0.7, 0.7, 0.7, 0.7, 0.1], assignment: vec![0; 5] };
        let mut r = rng();
        let mut counts = [0usize; 5];
        for _ in 0..trials {
            let out = clear_auction(&bids, &mech(5, 1, 1), &mut r).unwrap();
            for (c, w) in counts.iter_mut().zip(&out.winners) {
                *c += *w as usize;
            }
        }
        let p = 1.0 / k as f64;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        for c in &counts[..k] {
            assert!((*c as f64 / trials as f64 - p).abs() < 3.0 * sd, "{counts:?}");
        }
        assert_eq!(counts[4], 0);
    }

    #[test]
    fn costs_are_literal() {
        assert_eq!(cost_and_saved(0.5, true, 5.0), (-2.0, 2.5));
        assert_eq!(cost_and_saved(0.5, false, 5.0), (0.5, 0.0));
    }

    #[test]
    fn residual_gain_cases() {
        let no_setter = CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: false };
        let r = residual_gain(&no_setter, 0.1, 1000, &mut rng()).unwrap();
        assert_eq!(r.estimate, 0.0);

        let emp = CompetingBidModel::Empirical { pairs: vec![[0.5, 0.3], [0.9, 0.9]] };
        let r = residual_gain(&emp, 0.1, 1, &mut rng()).unwrap();
        assert!((r.estimate - 0.01).abs() < 1e-15);
    }

    #[test]
    fn residual_gain_uniform_order_statistics() {
        // Adjacent order statistics of 49 uniforms are 1/50 apart on average.
        let mut r = rng();
        let pairs: Vec<[f64; 2]> = (0..20_000)
            .map(|_| {
                let mut xs: Vec<f64> = (0..49).map(|_| r.random::<f64>()).collect();
                xs.sort_by(|a, b| b.total_cmp(a));
                [xs[4], xs[5]]
            })
            .collect();
        let est = residual_gain(&CompetingBidModel::Empirical { pairs }, 0.1, 0, &mut r).unwrap().estimate;
        assert!((est - 0.002).abs() < 0.0002, "{est}");
    }

    proptest! {
        #[test]
        fn clearing_invariants(
            bids in prop::collection::vec(0.0f64..10.0, 2..30),
            gamma_frac in 0.0f64..1.0,
            m in 1usize..4,
            seed in any::<u64>(),
        ) {
            let n = bids.len();
            let gamma = 1 + ((n - 1) as f64 * gamma_frac) as usize;
            let gamma = gamma.min(n - 1);
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let assignment: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
            let out = clear_auction(&RoundBids { bids: bids.clone(), assignment: assignment.clone() }, &mech(n, gamma, m), &mut r).unwrap();

            let total_paid: f64 = out.payments.iter().sum();
            let mut expected_paid = 0.0;
            for a in 0..m {
                let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == a).collect();
                let winners = members.iter().filter(|&&i| out.winners[i]).count();
                prop_assert_eq!(winners, gamma.min(members.len()));
                expected_paid += winners as f64 * out.price_per_auction[a];
                for &i in &members {
                    if out.winners[i] {
                        prop_assert!(out.payments[i] <= bids[i]);
                        prop_assert!(bids[i] >= out.competing_hi[i]);
                    } else {
                        prop_assert!(bids[i] <= out.competing_hi[i]);
                    }
                    prop_assert!(out.competing_lo[i] <= out.competing_hi[i]);
                }
            }
            prop_assert!((total_paid - expected_paid).abs() < 1e-9);
            let full = (0..m).all(|a| assignment.iter().filter(|&&x| x == a).count() > gamma);
            if full {
                prop_assert!((total_paid - n as f64 * out.gain).abs() < 1e-9 * (1.0 + total_paid));
            }
        }

        #[test]
        fn raising_a_bid_keeps_winning(
            bids in prop::collection::vec(0.0f64..10.0, 3..20),
            who in any::<prop::sample::Index>(),
            raise in 0.0f64..5.0,
        ) {
            let n = bids.len();
            let gamma = n / 2;
            prop_assume!(gamma >= 1);
            let mut sorted = bids.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
            let i = who.index(n);
            let priority = vec![0u64; n];
            let assignment = vec![0usize; n];
            let mut clearing = Clearing::new();
            let mut before = PeriodOutcome::default();
            clearing.clear(&bids, &assignment, &priority, gamma, 1, &mut before);
            let mut raised = bids.clone();
            raised[i] += raise;
            let mut after = PeriodOutcome::default();
            clearing.clear(&raised, &assignment, &priority, gamma, 1, &mut after);
            if before.winners[i] {
                prop_assert!(after.winners[i]);
            }
        }
    }
}
