//! Offloading policies: round robin, QHEF, and three deep learners.

mod agents;
mod rewards;
mod rules;
mod state;

use std::fmt;
use std::str::FromStr;

pub use agents::{drs_choice, Agent, LearnerKind, LearningPolicy};
pub use rewards::{
    counterfactual_violation, dql_reward, drs_reward_and_risk, energy_tier, rq_reward,
    violation_level, DqlRewardParams, DrsParams, RewardContext,
};
pub use rules::{qhef_decide, rr_decide, Qhef, RoundRobin};
pub use state::ObservedState;

use crate::error::{Error, Result};
use crate::model::{Scenario, ScenarioConfig};
use crate::rng::SimRng;
use crate::simcore::{CompletionOutcome, LedgerSnapshot, OffloadingPolicy, Snapshot};

/// A destination node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffloadDecision {
    pub action: usize,
}

impl OffloadDecision {
    pub fn new(action: usize, num_nodes: usize) -> Result<Self> {
        if action >= num_nodes {
            return Err(Error::contract(format!(
                "action {action} outside 0..{num_nodes}"
            )));
        }
        Ok(OffloadDecision { action })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    RoundRobin,
    Qhef,
    Learner(LearnerKind),
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::RoundRobin,
        PolicyKind::Qhef,
        PolicyKind::Learner(LearnerKind::Dql),
        PolicyKind::Learner(LearnerKind::Drs),
        PolicyKind::Learner(LearnerKind::Rq),
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RoundRobin => "rr",
            PolicyKind::Qhef => "qhef",
            PolicyKind::Learner(k) => k.name(),
        }
    }

    pub fn learner(self) -> Option<LearnerKind> {
        match self {
            PolicyKind::Learner(k) => Some(k),
            _ => None,
        }
    }

    /// A rule-based policy, or untrained learners initialized from `seed`.
    pub fn build(self, scenario: &Scenario, seed: u64) -> AnyPolicy {
        match self {
            PolicyKind::RoundRobin => AnyPolicy::RoundRobin(RoundRobin::default()),
            PolicyKind::Qhef => AnyPolicy::Qhef(Qhef),
            PolicyKind::Learner(k) => AnyPolicy::Learner(LearningPolicy::new(k, scenario, seed)),
        }
    }
}

/// Any of the five policies, by value.
#[derive(Debug, Clone)]
pub enum AnyPolicy {
    RoundRobin(RoundRobin),
    Qhef(Qhef),
    Learner(LearningPolicy),
}

impl AnyPolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            AnyPolicy::RoundRobin(_) => PolicyKind::RoundRobin,
            AnyPolicy::Qhef(_) => PolicyKind::Qhef,
            AnyPolicy::Learner(l) => PolicyKind::Learner(l.kind()),
        }
    }

    fn inner(&mut self) -> &mut dyn OffloadingPolicy {
        match self {
            AnyPolicy::RoundRobin(p) => p,
            AnyPolicy::Qhef(p) => p,
            AnyPolicy::Learner(p) => p,
        }
    }
}

impl From<LearningPolicy> for AnyPolicy {
    fn from(p: LearningPolicy) -> Self {
        AnyPolicy::Learner(p)
    }
}

impl OffloadingPolicy for AnyPolicy {
    fn name(&self) -> &str {
        self.kind().name()
    }

    fn begin_episode(&mut self, cfg: &ScenarioConfig) {
        self.inner().begin_episode(cfg);
    }

    fn decide(&mut self, ctx: &Snapshot, rng: &mut SimRng) -> usize {
        self.inner().decide(ctx, rng)
    }

    fn on_completion(&mut self, outcome: &CompletionOutcome) -> Option<LedgerSnapshot> {
        self.inner().on_completion(outcome)
    }

    fn end_episode(&mut self) {
        self.inner().end_episode();
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown policy {s:?}; expected rr, qhef, dql, drs or rq")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("sarsa".parse::<PolicyKind>().is_err());
        assert!(OffloadDecision::new(5, 5).is_err());
        assert_eq!(OffloadDecision::new(4, 5).unwrap().action, 4);
    }
}
