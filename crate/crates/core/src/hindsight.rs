//! Hindsight-optimal benchmarks on a realized sample path.
//!
//! With full knowledge of valuations and competing bids, an agent choosing
//! which rounds to win faces a knapsack problem: winning round `t` saves
//! `delta v_t` and costs `d_t` karma, and the total spend may not exceed the
//! budget plus the largest gains it could have collected. The relaxation
//! with `x_t` in `[0, 1]` is a fractional knapsack solved greedily; its dual
//! is a concave piecewise-linear function of one multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A realized path and the budget available to the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HindsightInstance {
    pub valuations: Vec<f64>,
    /// Lowest winning competing bid of each round.
    pub competing: Vec<f64>,
    pub time_saving: f64,
    /// Initial budget, `rho T`.
    pub budget: f64,
    /// Share of each round's competing bid that may be earned back, 0 without redistribution.
    pub gain_share: f64,
}

/// Optimal fractional plan with its supporting dual multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HindsightSolution {
    pub fractional_plan: Vec<f64>,
    /// `sum_t v_t (1 - x_t delta)`.
    pub cost: f64,
    pub dual_multiplier: f64,
    pub dual_value: f64,
}

/// Maximizer of the dual function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    /// `+inf` when the budget is zero.
    pub multiplier: f64,
    pub value: f64,
    /// Set when the supremum is only approached as the multiplier grows without bound.
    pub degenerate: bool,
}

/// Largest horizon accepted by [`solve_exact_01`].
pub const MAX_EXACT_HORIZON: usize = 22;

impl HindsightInstance {
    pub fn validate(&self) -> Result<()> {
        if self.valuations.len() != self.competing.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} valuations vs {} competing bids",
                self.valuations.len(),
                self.competing.len()
            )));
        }
        if self.valuations.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let bad = |x: &f64| !(x.is_finite() && *x >= 0.0);
        if self.valuations.iter().any(bad) || self.competing.iter().any(bad) {
            return Err(invalid("valuations and competing bids must be finite and nonnegative"));
        }
        if bad(&self.budget) || bad(&self.time_saving) {
            return Err(invalid("budget and time saving must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.gain_share) {
            return Err(invalid(format!("gain share must lie in [0, 1], got {}", self.gain_share)));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.valuations.len()
    }

    /// Budget including the maximal gains: `budget + gain_share * sum_t d_t`.
    pub fn effective_budget(&self) -> f64 {
        self.budget + self.gain_share * self.competing.iter().sum::<f64>()
    }

    /// Cost of winning nothing, `sum_t v_t`.
    pub fn baseline_cost(&self) -> f64 {
        self.valuations.iter().sum()
    }

    /// Dual function `sum v - mu B - sum (delta v - mu d)^+`.
    pub fn dual_function(&self, mu: f64) -> f64 {
        let b = self.effective_budget();
        let penalty = if b == 0.0 { 0.0 } else { mu * b };
        self.baseline_cost()
            - penalty
            - self
                .valuations
                .iter()
                .zip(&self.competing)
                .map(|(&v, &d)| (self.time_saving * v - mu * d).max(0.0))
                .sum::<f64>()
    }

    fn ratio(&self, t: usize) -> f64 {
        self.time_saving * self.valuations[t] / self.competing[t]
    }

    /// Rounds with a positive price, by decreasing value per unit of karma;
    /// equal ratios keep their original order.
    fn priced_by_ratio(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.horizon()).filter(|&t| self.competing[t] > 0.0).collect();
        order.sort_by(|&a, &b| self.ratio(b).total_cmp(&self.ratio(a)));
        order
    }
}

/// Solves the relaxed problem by the greedy fractional knapsack.
pub fn solve_fractional(inst: &HindsightInstance) -> Result<HindsightSolution> {
    inst.validate()?;
    let t_len = inst.horizon();
    let mut plan = vec![0.0; t_len];
    for t in 0..t_len {
        if inst.competing[t] == 0.0 {
            plan[t] = 1.0;
        }
    }
    let mut remaining = inst.effective_budget();
    let mut multiplier = 0.0;
    for t in inst.priced_by_ratio() {
        let d = inst.competing[t];
        if d <= remaining {
            plan[t] = 1.0;
            remaining -= d;
        } else {
            plan[t] = remaining / d;
            multiplier = inst.ratio(t);
            break;
        }
    }
    let cost = inst
        .valuations
        .iter()
        .zip(&plan)
        .map(|(&v, &x)| v * (1.0 - x * inst.time_saving))
        .sum();
    Ok(HindsightSolution { fractional_plan: plan, cost, dual_multiplier: multiplier, dual_value: inst.dual_function(multiplier) })
}

/// Relaxed benchmark without redistribution: budget `rho T` only.
pub fn hindsight_a(valuations: Vec<f64>, competing: Vec<f64>, time_saving: f64, budget: f64) -> Result<HindsightSolution> {
    solve_fractional(&HindsightInstance { valuations, competing, time_saving, budget, gain_share: 0.0 })
}

/// Maximizes the dual function over its breakpoints in `O(T log T)`.
pub fn solve_dual(inst: &HindsightInstance) -> Result<DualSolution> {
    inst.validate()?;
    let delta = inst.time_saving;
    let budget = inst.effective_budget();
    let free_value: f64 = inst
        .valuations
        .iter()
        .zip(&inst.competing)
        .filter(|(_, &d)| d == 0.0)
        .map(|(&v, _)| delta * v)
        .sum();
    let base = inst.baseline_cost() - free_value;
    if budget == 0.0 {
        return Ok(DualSolution { multiplier: f64::INFINITY, value: base, degenerate: true });
    }

    let order = inst.priced_by_ratio();
    // At mu = 0 every priced round contributes its full saved value.
    let mut best = DualSolution { multiplier: 0.0, value: inst.dual_function(0.0), degenerate: false };
    let (mut value_above, mut price_above) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mu = inst.ratio(order[i]);
        let f = base - mu * budget - (value_above - mu * price_above);
        if f > best.value {
            best = DualSolution { multiplier: mu, value: f, degenerate: false };
        }
        while i < order.len() && inst.ratio(order[i]) == mu {
            value_above += delta * inst.valuations[order[i]];
            price_above += inst.competing[order[i]];
            i += 1;
        }
    }
    Ok(best)
}

/// Exact optimum over binary plans by meet-in-the-middle enumeration.
pub fn solve_exact_01(inst: &HindsightInstance) -> Result<f64> {
    inst.validate()?;
    let t_len = inst.horizon();
    if t_len > MAX_EXACT_HORIZON {
        return Err(Error::HorizonTooLarge { horizon: t_len, max: MAX_EXACT_HORIZON });
    }
    let budget = inst.effective_budget();
    let cap = budget + 1e-12 * (1.0 + budget);
    let half = t_len / 2;
    let subsets = |range: std::ops::Range<usize>| -> Vec<(f64, f64)> {
        let items: Vec<(f64, f64)> =
            range.map(|t| (inst.competing[t], inst.time_saving * inst.valuations[t])).collect();
        (0u32..1 << items.len())
            .map(|mask| {
                items.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).fold((0.0, 0.0), |(w, s), (_, it)| {
                    (w + it.0, s + it.1)
                })
            })
            .collect()
    };
    let left = subsets(0..half);
    let mut right = subsets(half..t_len);
    right.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best_right = Vec::with_capacity(right.len());
    let mut run = f64::NEG_INFINITY;
    for &(_, s) in &right {
        run = run.max(s);
        best_right.push(run);
    }
    let mut best = 0.0f64;
    for &(w, s) in &left {
        if w > cap {
            continue;
        }
        let fit = right.partition_point(|r| r.0 <= cap - w);
        if fit > 0 {
            best = best.max(s + best_right[fit - 1]);
        }
    }
    Ok(inst.baseline_cost() - best)
}
