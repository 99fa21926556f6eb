use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::{CompletionOutcome, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqlRewardParams {
    /// Battery-fraction threshold `e` of the energy tiers.
    pub energy_threshold: f64,
    /// Penalty when the MEC, the receiver, another UAV, or nothing could
    /// have met the deadline, in that order.
    pub violation_penalties: [f64; 4],
}

impl Default for DqlRewardParams {
    fn default() -> Self {
        DqlRewardParams {
            energy_threshold: 0.01,
            violation_penalties: [-40.0, -20.0, -10.0, -1.0],
        }
    }
}

impl DqlRewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_threshold > 0.0 && self.energy_threshold.is_finite()) {
            return Err(Error::config("dql.energy_threshold must be > 0"));
        }
        if self.violation_penalties.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("dql.violation_penalties must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrsParams {
    /// Energy weight `W` of the reward.
    pub weight: f64,
    /// Delay normalizer.
    pub delay_norm: f64,
    /// Actions whose predicted risk is below this bound are acceptable.
    pub risk_threshold: f64,
}

impl Default for DrsParams {
    fn default() -> Self {
        DrsParams {
            weight: 0.5,
            delay_norm: 15.0,
            risk_threshold: 0.0,
        }
    }
}

impl DrsParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::config("drs.weight must lie in [0, 1]"));
        }
        if !(self.delay_norm > 0.0 && self.delay_norm.is_finite()) {
            return Err(Error::config("drs.delay_norm must be > 0"));
        }
        if !self.risk_threshold.is_finite() {
            return Err(Error::config("drs.risk_threshold must be finite"));
        }
        Ok(())
    }
}

/// Inputs of the DQL and DRS reward schemes for one executed action.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardContext {
    pub receiver: usize,
    pub action: usize,
    pub num_uav: usize,
    pub violated: bool,
    /// Battery fraction of the destination, `None` for a MEC server.
    pub destination_battery: Option<f64>,
    /// Highest battery fraction over all UAVs.
    pub max_battery: f64,
    /// Decision-time violation estimate per destination.
    pub estimated_violation: Vec<bool>,
    /// Mean end-to-end delay of the destination after this task.
    pub destination_mean_delay: f64,
}

impl RewardContext {
    pub fn from_outcome(o: &CompletionOutcome) -> Self {
        let action = o.destination();
        let num_uav = o.battery.len();
        RewardContext {
            receiver: o.agent,
            action,
            num_uav,
            violated: o.violated(),
            destination_battery: o.battery.get(action).copied(),
            max_battery: o.battery.iter().copied().fold(0.0, f64::max),
            estimated_violation: o.estimated_violation.clone(),
            destination_mean_delay: o.destination_mean_delay,
        }
    }
}

/// Slack on the tier boundaries, which are inclusive.
const TIER_TOLERANCE: f64 = 1e-12;

/// Energy tier of the destination: 2 within `e` of the best UAV, 0 at least
/// `2e` below it, 1 in between. MEC servers are always tier 2.
pub fn energy_tier(destination_battery: Option<f64>, max_battery: f64, e: f64) -> f64 {
    let Some(level) = destination_battery else {
        return 2.0;
    };
    let gap = level - max_battery;
    if gap >= -e - TIER_TOLERANCE {
        2.0
    } else if gap <= -2.0 * e + TIER_TOLERANCE {
        0.0
    } else {
        1.0
    }
}

/// Whether `dest` is predicted to miss the deadline, from the decision-time
/// snapshot: uplink + relay + destination CPU delay + processing time.
pub fn counterfactual_violation(snapshot: &Snapshot, dest: usize) -> bool {
    snapshot.estimated_violation(dest)
}

/// Penalty magnitude level of a violation, by which alternative would have
/// met the deadline.
pub fn violation_level(ctx: &RewardContext, penalties: &[f64; 4]) -> f64 {
    let ok = |n: usize| !ctx.estimated_violation[n];
    let n = ctx.estimated_violation.len();
    if (ctx.num_uav..n).any(ok) {
        penalties[0]
    } else if ok(ctx.receiver) {
        penalties[1]
    } else if (0..ctx.num_uav).any(|j| j != ctx.receiver && j != ctx.action && ok(j)) {
        penalties[2]
    } else {
        penalties[3]
    }
}

/// `(tier − 1) + (1 − v) + level · v`.
pub fn dql_reward(ctx: &RewardContext, p: &DqlRewardParams) -> f64 {
    let tier = energy_tier(ctx.destination_battery, ctx.max_battery, p.energy_threshold);
    let v = f64::from(u8::from(ctx.violated));
    (tier - 1.0) + (1.0 - v) + violation_level(ctx, &p.violation_penalties) * v
}

/// `(−[W·(tier − 1) − (1 − W)/Θ · Δ], risk)` where the risk is the negated
/// violation level on a violation and −1 otherwise.
pub fn drs_reward_and_risk(ctx: &RewardContext, dql: &DqlRewardParams, p: &DrsParams) -> (f64, f64) {
    let tier = energy_tier(ctx.destination_battery, ctx.max_battery, dql.energy_threshold);
    let reward =
        -(p.weight * (tier - 1.0) - (1.0 - p.weight) / p.delay_norm * ctx.destination_mean_delay);
    let risk = if ctx.violated {
        -violation_level(ctx, &dql.violation_penalties)
    } else {
        -1.0
    };
    (reward, risk)
}

/// `(1 − β)·RV_c + β·RV_m`. Without a worst-agent value the mixture
/// collapses to `RV_c`.
pub fn rq_reward(rv_current: f64, rv_worst: Option<f64>, beta: f64) -> f64 {
    let rv_m = rv_worst.unwrap_or(rv_current);
    // Same as (1 − β)·RV_c + β·RV_m, without leaving [RV_c, RV_m] by rounding.
    rv_current + beta * (rv_m - rv_current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::rules::tests::snapshot;

    fn ctx(violated: bool, estimated: [bool; 5], dest_battery: Option<f64>) -> RewardContext {
        RewardContext {
            receiver: 0,
            action: 1,
            num_uav: 4,
            violated,
            destination_battery: dest_battery,
            max_battery: 0.98,
            estimated_violation: estimated.to_vec(),
            destination_mean_delay: 0.6,
        }
    }

    #[test]
    fn dql_reward_cases() {
        let p = DqlRewardParams::default();
        assert_eq!(dql_reward(&ctx(false, [false; 5], Some(0.975)), &p), 2.0);
        let mec_ok = [true, true, true, true, false];
        assert_eq!(dql_reward(&ctx(true, mec_ok, Some(0.965)), &p), -40.0);
        assert_eq!(dql_reward(&ctx(true, [true; 5], Some(0.965)), &p), -1.0);
        let local_ok = [false, true, true, true, true];
        assert_eq!(dql_reward(&ctx(true, local_ok, Some(0.965)), &p), -20.0);
        let other_ok = [true, true, false, true, true];
        assert_eq!(dql_reward(&ctx(true, other_ok, Some(0.965)), &p), -10.0);
        // Only the chosen UAV itself would have made it: inevitable.
        let self_ok = [true, false, true, true, true];
        assert_eq!(dql_reward(&ctx(true, self_ok, Some(0.965)), &p), -1.0);
    }

    #[test]
    fn energy_tiers() {
        assert_eq!(energy_tier(Some(0.98), 0.98, 0.01), 2.0);
        assert_eq!(energy_tier(Some(0.97), 0.98, 0.01), 2.0);
        assert_eq!(energy_tier(Some(0.965), 0.98, 0.01), 1.0);
        assert_eq!(energy_tier(Some(0.96), 0.98, 0.01), 0.0);
        assert_eq!(energy_tier(Some(0.5), 0.98, 0.01), 0.0);
        assert_eq!(energy_tier(None, 0.98, 0.01), 2.0);
    }

    #[test]
    fn counterfactual_cases() {
        let s = snapshot(&[0.0; 5], &[1.0; 4], 0);
        // 0.05 uplink + 0.1 relay + 0.05 processing.
        assert!((s.estimated_delay(4) - 0.2).abs() < 1e-12);
        assert!(!counterfactual_violation(&s, 4));
        let s = snapshot(&[0.0, 0.0, 0.0, 0.0, 2.0], &[1.0; 4], 0);
        assert!(counterfactual_violation(&s, 4));
        let mut s = snapshot(&[50.0; 5], &[1.0; 4], 0);
        s.deadline = f64::INFINITY;
        assert!((0..5).all(|n| !counterfactual_violation(&s, n)));
    }

    #[test]
    fn drs_cases() {
        let dql = DqlRewardParams::default();
        let w1 = DrsParams { weight: 1.0, ..DrsParams::default() };
        let (r, risk) = drs_reward_and_risk(&ctx(false, [false; 5], Some(0.965)), &dql, &w1);
        assert_eq!(r, -0.0);
        assert_eq!(risk, -1.0);
        let mec_ok = [true, true, true, true, false];
        let (_, risk) = drs_reward_and_risk(&ctx(true, mec_ok, Some(0.965)), &dql, &w1);
        assert_eq!(risk, 40.0);
        let half = DrsParams::default();
        let (r, _) = drs_reward_and_risk(&ctx(false, [false; 5], Some(0.98)), &dql, &half);
        assert!((r - (-(0.5 * 1.0 - 0.5 / 15.0 * 0.6))).abs() < 1e-12);
    }

    #[test]
    fn rq_mixture() {
        assert_eq!(rq_reward(20.0, Some(-10.0), 0.75), -2.5);
        assert_eq!(rq_reward(20.0, Some(-10.0), 0.0), 20.0);
        assert_eq!(rq_reward(5.0, None, 0.75), 5.0);
    }

    #[test]
    fn defaults_validate() {
        DqlRewardParams::default().validate().unwrap();
        DrsParams::default().validate().unwrap();
        assert!(DrsParams { weight: 1.5, ..DrsParams::default() }.validate().is_err());
        assert!(DqlRewardParams { energy_threshold: 0.0, ..DqlRewardParams::default() }
            .validate()
            .is_err());
    }
}
