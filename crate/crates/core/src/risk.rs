//! Risk cost functions and the two-tailed CVaR risk measurement.
//!
//! Every completed action is priced by a total cost combining battery risk
//! and end-to-end delay risk. An agent's costs are kept in a sorted ledger;
//! its risk measurement η is the mean of the lowest and highest α/2 percent
//! of that ledger. The reward for an action is read off a fixed table keyed
//! by how η moved and by its sign afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the zero and equality tests on η.
pub const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskParams {
    /// Exponent on the battery drain (g).
    pub energy_growth: f64,
    /// Exponent on the deadline gap of fire tasks (s).
    pub fire_growth: f64,
    /// Exponent on the deadline gap of all other tasks (w).
    pub other_growth: f64,
    /// Weight of the energy cost in the total cost (Γ).
    pub energy_scale: f64,
    /// Total tail mass α in percent, split evenly between both tails.
    pub alpha_percent: f64,
    /// Weight of the worst agent's reward in the mixed reward (β).
    pub beta: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams {
            energy_growth: 2.0,
            fire_growth: 8.0,
            other_growth: 1.0,
            energy_scale: 1.0,
            alpha_percent: 2.0,
            beta: 0.75,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("energy_growth", self.energy_growth),
            ("fire_growth", self.fire_growth),
            ("other_growth", self.other_growth),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::config(format!("risk.{name} must be >= 1")));
            }
        }
        if !(self.alpha_percent > 0.0 && self.alpha_percent <= 100.0) {
            return Err(Error::config("risk.alpha_percent must lie in (0, 100]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("risk.beta must lie in [0, 1]"));
        }
        if !(self.energy_scale.is_finite() && self.energy_scale >= 0.0) {
            return Err(Error::config("risk.energy_scale must be finite and >= 0"));
        }
        Ok(())
    }
}

/// `(1 − remaining)^g`.
pub fn energy_cost(remaining: f64, params: &RiskParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&remaining) {
        return Err(Error::contract(format!(
            "remaining energy {remaining} outside [0, 1]"
        )));
    }
    Ok((1.0 - remaining).powf(params.energy_growth))
}

/// Signed deadline-gap cost: negative when the deadline was met with slack,
/// zero on the deadline, positive when late. The magnitude grows with the
/// gap to the power `s` for fire tasks and `w` otherwise.
pub fn delay_cost(delay: f64, deadline: f64, is_fire: bool, params: &RiskParams) -> f64 {
    let exponent = if is_fire {
        params.fire_growth
    } else {
        params.other_growth
    };
    let magnitude = (deadline - delay).abs().powf(exponent);
    if delay < deadline {
        -magnitude
    } else if delay > deadline {
        magnitude
    } else {
        0.0
    }
}

/// `Γ · energy + delay`.
pub fn total_cost(energy_cost: f64, delay_cost: f64, params: &RiskParams) -> f64 {
    params.energy_scale * energy_cost + delay_cost
}

/// Tail size used for `n` costs: `max(1, ⌊(α/2)% · n⌋)`, capped at `n`.
pub fn tail_size(n: usize, alpha_percent: f64) -> usize {
    let raw = (alpha_percent * n as f64 / 200.0 + 1e-9).floor() as usize;
    raw.max(1).min(n.max(1))
}

/// An agent's costs in ascending order, plus its most recent η transition.
#[derive(Debug, Clone, Default)]
pub struct RiskLedger {
    costs: Vec<f64>,
    last_transition: Option<(f64, f64)>,
}

impl RiskLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Inserts a cost and returns the `(η before, η after)` pair.
    pub fn record(&mut self, cost: f64, params: &RiskParams) -> (f64, f64) {
        let before = self.risk_measure(params);
        let at = self.costs.partition_point(|&c| c <= cost);
        self.costs.insert(at, cost);
        let after = self.risk_measure(params);
        self.last_transition = Some((before, after));
        (before, after)
    }

    /// `(η before, η after)` of the latest recorded action, if any.
    pub fn last_transition(&self) -> Option<(f64, f64)> {
        self.last_transition
    }

    /// Two-tailed CVaR: mean of the `m` lowest and `m` highest costs. Zero
    /// while the ledger is empty.
    pub fn risk_measure(&self, params: &RiskParams) -> f64 {
        risk_measure(&self.costs, params.alpha_percent)
    }

    pub fn clear(&mut self) {
        self.costs.clear();
        self.last_transition = None;
    }
}

/// η over an ascending slice of costs.
pub fn risk_measure(sorted_costs: &[f64], alpha_percent: f64) -> f64 {
    let n = sorted_costs.len();
    if n == 0 {
        return 0.0;
    }
    let m = tail_size(n, alpha_percent);
    let low: f64 = sorted_costs[..m].iter().sum();
    let high: f64 = sorted_costs[n - m..].iter().sum();
    (low + high) / (2 * m) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Negative,
    Zero,
    Positive,
}

fn sign(x: f64) -> Sign {
    if x.abs() <= ZERO_TOLERANCE {
        Sign::Zero
    } else if x < 0.0 {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

/// Reward for moving η from `eta_before` to `eta_after`.
///
/// | η after vs before | η after < 0 | = 0 | > 0 |
/// |-------------------|------------:|----:|----:|
/// | decreased         | 20          | 10  | 1   |
/// | unchanged         | 5           | 2   | −5  |
/// | increased         | 1           | −1  | −10 |
pub fn reward_value(eta_after: f64, eta_before: f64) -> i32 {
    let diff = eta_after - eta_before;
    let moved = if diff.abs() <= ZERO_TOLERANCE {
        std::cmp::Ordering::Equal
    } else if diff < 0.0 {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    };
    use std::cmp::Ordering::*;
    match (moved, sign(eta_after)) {
        (Less, Sign::Negative) => 20,
        (Less, Sign::Zero) => 10,
        (Less, Sign::Positive) => 1,
        (Equal, Sign::Negative) => 5,
        (Equal, Sign::Zero) => 2,
        (Equal, Sign::Positive) => -5,
        (Greater, Sign::Negative) => 1,
        (Greater, Sign::Zero) => -1,
        (Greater, Sign::Positive) => -10,
    }
}
