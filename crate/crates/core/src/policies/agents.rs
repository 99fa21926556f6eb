//! Per-UAV deep Q-learning agents behind the offloading interface.
//!
//! Rewards are only known once a task completes, so an agent's decisions are
//! held in an episode memory and turned into transitions when the episode
//! ends: each decision's successor state is the same agent's next decision
//! state, and its last decision of the episode is terminal.

use rayon::prelude::*;

use super::rewards::{drs_reward_and_risk, dql_reward, rq_reward, RewardContext};
use super::state::ObservedState;
use crate::error::{Error, Result};
use crate::model::{Scenario, ScenarioConfig, TaskId};
use crate::neural::{
    epsilon_greedy, masked_argmax, td_update, Bootstrap, QNetwork, ReplayBuffer, Signal,
    Transition,
};
use crate::risk::{delay_cost, energy_cost, reward_value, total_cost, RiskLedger};
use crate::rng::{name_tag, purpose, stream, SimRng};
use crate::simcore::{CompletionOutcome, LedgerSnapshot, OffloadingPolicy, Snapshot};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    /// Deep Q-learning with the energy-tier and violation-level reward.
    Dql,
    /// Deep risk-sensitive learning with separate reward and risk networks.
    Drs,
    /// Risk quantification: rewards from the two-tailed CVaR ledger.
    Rq,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Dql => "dql",
            LearnerKind::Drs => "drs",
            LearnerKind::Rq => "rq",
        }
    }
}

#[derive(Debug, Clone)]
struct Step {
    state: Vec<f32>,
    action: usize,
    reward: Option<f64>,
    risk: f64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub net: QNetwork,
    target: QNetwork,
    /// Risk-value network, DRS only.
    pub risk_net: Option<QNetwork>,
    risk_target: Option<QNetwork>,
    buffer: ReplayBuffer,
    replay_rng: SimRng,
    updates: u64,
    ledger: RiskLedger,
    memory: Vec<Step>,
    /// Sum of rewards of every finished episode, in order.
    pub reward_trace: Vec<f64>,
}

impl Agent {
    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn ledger(&self) -> &RiskLedger {
        &self.ledger
    }

    fn sync_targets(&mut self) {
        self.target = self.net.clone();
        self.risk_target.clone_from(&self.risk_net);
    }

    fn gradient_step(&mut self, scenario: &Scenario) -> Result<()> {
        let cfg = &scenario.train;
        if self.buffer.len() < cfg.batch_size {
            return Ok(());
        }
        let batch = self.buffer.sample(cfg.batch_size, &mut self.replay_rng);
        td_update(&mut self.net, &self.target, &batch, cfg, Signal::Reward, Bootstrap::Max)?;
        if let (Some(net), Some(target)) = (self.risk_net.as_mut(), self.risk_target.as_ref()) {
            td_update(net, target, &batch, cfg, Signal::Risk, Bootstrap::Min)?;
        }
        self.updates += 1;
        if self.updates % cfg.target_sync_interval as u64 == 0 {
            self.sync_targets();
        }
        Ok(())
    }

    fn finish_episode(&mut self, store: bool) {
        let memory = std::mem::take(&mut self.memory);
        let total: f64 = memory.iter().filter_map(|s| s.reward).sum();
        self.reward_trace.push(total);
        if !store {
            return;
        }
        for (i, step) in memory.iter().enumerate() {
            let Some(reward) = step.reward else { continue };
            let next = memory.get(i + 1);
            self.buffer.push(Transition {
                state: step.state.clone(),
                action: step.action,
                reward,
                risk: step.risk,
                next_state: next.map(|n| n.state.clone()).unwrap_or_default(),
                terminal: next.is_none(),
            });
        }
    }
}

/// DQL, DRS or RQ: one independently trained agent per UAV.
#[derive(Debug, Clone)]
pub struct LearningPolicy {
    kind: LearnerKind,
    scenario: Scenario,
    agents: Vec<Agent>,
    epsilon: f64,
    training: bool,
    /// `(agent, memory index)` of every decided task, by task id.
    pending: Vec<Option<(usize, usize)>>,
}

impl LearningPolicy {
    /// Fresh agents with weights drawn from `seed`.
    pub fn new(kind: LearnerKind, scenario: &Scenario, seed: u64) -> Self {
        let cfg = &scenario.scenario;
        let inputs = ObservedState::encoded_len(cfg.task_types.len(), cfg.num_uav, cfg.num_nodes());
        let sizes = scenario.train.layer_sizes(inputs, cfg.num_nodes());
        let tag = name_tag(kind.name());
        let agents = (0..cfg.num_uav as u64)
            .map(|j| {
                let mut init = stream(seed, &[purpose::INIT, tag, j]);
                let net = QNetwork::new(&sizes, &mut init);
                let risk_net = (kind == LearnerKind::Drs).then(|| QNetwork::new(&sizes, &mut init));
                Agent {
                    target: net.clone(),
                    net,
                    risk_target: risk_net.clone(),
                    risk_net,
                    buffer: ReplayBuffer::new(scenario.train.replay_capacity),
                    replay_rng: stream(seed, &[purpose::REPLAY, tag, j]),
                    updates: 0,
                    ledger: RiskLedger::new(),
                    memory: Vec::new(),
                    reward_trace: Vec::new(),
                }
            })
            .collect();
        LearningPolicy {
            kind,
            scenario: scenario.clone(),
            agents,
            epsilon: 0.0,
            training: false,
            pending: Vec::new(),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    /// While training, finished episodes are stored in the replay buffers.
    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    /// Adds externally recorded transitions to an agent's buffer.
    pub fn extend_buffer(&mut self, agent: usize, transitions: impl IntoIterator<Item = Transition>) {
        for t in transitions {
            self.agents[agent].buffer.push(t);
        }
    }

    /// `steps` gradient steps for every agent; agents update in parallel.
    pub fn learn(&mut self, steps: usize) -> Result<()> {
        let scenario = &self.scenario;
        self.agents.par_iter_mut().try_for_each(|a| {
            for _ in 0..steps {
                a.gradient_step(scenario)?;
            }
            Ok::<_, Error>(())
        })
    }

    /// Named networks for checkpointing: `uav{j}` and, for DRS, `uav{j}_risk`.
    pub fn networks(&self) -> Vec<(String, &QNetwork)> {
        let mut out = Vec::new();
        for (j, a) in self.agents.iter().enumerate() {
            out.push((format!("uav{j}"), &a.net));
            if let Some(r) = &a.risk_net {
                out.push((format!("uav{j}_risk"), r));
            }
        }
        out
    }

    /// Replaces the network called `name` (see [`Self::networks`]).
    pub fn load_network(&mut self, name: &str, net: QNetwork) -> Result<()> {
        let (idx, risk) = match name.strip_suffix("_risk") {
            Some(base) => (base, true),
            None => (name, false),
        };
        let j: usize = idx
            .strip_prefix("uav")
            .and_then(|s| s.parse().ok())
            .filter(|&j| j < self.agents.len())
            .ok_or_else(|| Error::contract(format!("no network called {name}")))?;
        let agent = &mut self.agents[j];
        let slot = if risk {
            agent
                .risk_net
                .as_mut()
                .ok_or_else(|| Error::contract(format!("{} has no risk network", self.kind.name())))?
        } else {
            &mut agent.net
        };
        if slot.layer_sizes() != net.layer_sizes() {
            return Err(Error::contract(format!(
                "network {name} has layers {:?}, expected {:?}",
                net.layer_sizes(),
                slot.layer_sizes()
            )));
        }
        *slot = net;
        agent.sync_targets();
        Ok(())
    }

    /// Records a decision taken by another policy, so that this policy's
    /// reward scheme prices it as if it had chosen `action` itself.
    pub fn observe(&mut self, ctx: &Snapshot, action: usize) {
        let state = ObservedState::from_snapshot(ctx).encode();
        self.remember(ctx, &state, action);
    }

    fn remember(&mut self, ctx: &Snapshot, state: &[f64], action: usize) {
        let agent = ctx.receiver;
        let id = ctx.task.0 as usize;
        if self.pending.len() <= id {
            self.pending.resize(id + 1, None);
        }
        let memory = &mut self.agents[agent].memory;
        self.pending[id] = Some((agent, memory.len()));
        memory.push(Step {
            state: state.iter().map(|&x| x as f32).collect(),
            action,
            reward: None,
            risk: 0.0,
        });
    }

    fn choose(&self, agent: &Agent, state: &[f64], mask: &[bool], rng: &mut SimRng) -> usize {
        let q = agent.net.forward(state);
        let Some(risk_net) = &agent.risk_net else {
            return epsilon_greedy(&q, self.epsilon, rng, mask);
        };
        let feasible: Vec<usize> = (0..q.len()).filter(|&i| mask[i]).collect();
        if feasible.len() > 1 && self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon {
            return feasible[rng.random_range(0..feasible.len())];
        }
        drs_choice(&q, &risk_net.forward(state), mask, self.scenario.drs.risk_threshold)
    }

    fn rq_step(&mut self, o: &CompletionOutcome) -> Result<(f64, LedgerSnapshot)> {
        let p = &self.scenario.risk;
        let delay = match o.task.completed_at {
            Some(_) => o.task.delay.total(),
            None => (o.at - o.task.created_at).max(o.task.delay.total()),
        };
        let energy = energy_cost(o.battery[o.agent].clamp(0.0, 1.0), p)?;
        let cost = total_cost(energy, delay_cost(delay, o.deadline, o.is_fire, p), p);
        let (before, after) = self.agents[o.agent].ledger.record(cost, p);
        let rv_c = f64::from(reward_value(after, before));
        let worst = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.ledger.is_empty())
            .map(|(j, a)| (j, a.ledger.risk_measure(p)))
            .fold(None::<(usize, f64)>, |best, (j, eta)| match best {
                Some((_, b)) if b >= eta => best,
                _ => Some((j, eta)),
            })
            .map(|(j, _)| j);
        let rv_m = match worst {
            Some(j) if j != o.agent => self.agents[j]
                .ledger
                .last_transition()
                .map(|(b, a)| f64::from(reward_value(a, b))),
            _ => None,
        };
        Ok((
            rq_reward(rv_c, rv_m, p.beta),
            LedgerSnapshot {
                agent: o.agent,
                n: self.agents[o.agent].ledger.len(),
                eta_before: before,
                eta_after: after,
            },
        ))
    }
}

/// Lexicographic DRS rule: best reward among actions predicted to be below
/// the risk threshold, else the least risky action.
pub fn drs_choice(reward_q: &[f64], risk_q: &[f64], mask: &[bool], threshold: f64) -> usize {
    let safe: Vec<bool> = mask
        .iter()
        .zip(risk_q)
        .map(|(&ok, &r)| ok && r < threshold)
        .collect();
    if let Some(a) = masked_argmax(reward_q, &safe) {
        return a;
    }
    let neg: Vec<f64> = risk_q.iter().map(|r| -r).collect();
    masked_argmax(&neg, mask).expect("at least one action must be feasible")
}

impl OffloadingPolicy for LearningPolicy {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn begin_episode(&mut self, _cfg: &ScenarioConfig) {
        self.pending.clear();
        for a in &mut self.agents {
            a.ledger.clear();
            a.memory.clear();
        }
    }

    fn decide(&mut self, ctx: &Snapshot, rng: &mut SimRng) -> usize {
        let state = ObservedState::from_snapshot(ctx).encode();
        let action = self.choose(&self.agents[ctx.receiver], &state, &ctx.available, rng);
        self.remember(ctx, &state, action);
        action
    }

    fn on_completion(&mut self, o: &CompletionOutcome) -> Option<LedgerSnapshot> {
        let TaskId(id) = o.task.id;
        let (agent, idx) = self.pending.get(id as usize).copied().flatten()?;
        let ctx = RewardContext::from_outcome(o);
        let (reward, risk, ledger) = match self.kind {
            LearnerKind::Dql => (dql_reward(&ctx, &self.scenario.dql), 0.0, None),
            LearnerKind::Drs => {
                let (r, c) = drs_reward_and_risk(&ctx, &self.scenario.dql, &self.scenario.drs);
                (r, c, None)
            }
            LearnerKind::Rq => {
                let (r, snap) = self
                    .rq_step(o)
                    .expect("battery fractions handed to the cost function lie in [0, 1]");
                (r, 0.0, Some(snap))
            }
        };
        let step = &mut self.agents[agent].memory[idx];
        step.reward = Some(reward);
        step.risk = risk;
        ledger
    }

    fn end_episode(&mut self) {
        let store = self.training;
        for a in &mut self.agents {
            a.finish_episode(store);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::{run, RunSeeds};

    #[test]
    fn drs_rule_cases() {
        let all = [true; 5];
        let q = [0.1, 0.9, 0.3, 0.2, 0.5];
        assert_eq!(drs_choice(&q, &[-1.0; 5], &all, 0.0), 1);
        assert_eq!(drs_choice(&q, &[1.0, 1.0, -1.0, 1.0, 1.0], &all, 0.0), 2);
        assert_eq!(drs_choice(&q, &[9.0, 3.0, 7.0, 5.0, 4.0], &all, 0.0), 1);
        assert_eq!(drs_choice(&[5.0, -3.0, 0.0, 1.0, 2.0], &[9.0, 3.0, 7.0, 5.0, 4.0], &all, 0.0), 1);
    }

    #[test]
    fn episode_builds_chained_transitions() {
        let s = Scenario::paper_default();
        let mut p = LearningPolicy::new(LearnerKind::Dql, &s, 1);
        p.set_training(true);
        p.set_epsilon(1.0);
        let out = run(&s.scenario, &mut p, RunSeeds::same(4)).unwrap();
        let stored: usize = p.agents().iter().map(|a| a.buffer().len()).sum();
        assert_eq!(stored, out.decisions.len());
        for a in p.agents() {
            let ts: Vec<_> = a.buffer().iter().collect();
            for w in ts.windows(2) {
                assert!(!w[0].terminal);
                assert_eq!(w[0].next_state, w[1].state);
            }
            if let Some(last) = ts.last() {
                assert!(last.terminal);
            }
            assert_eq!(a.reward_trace.len(), 1);
        }
    }

    #[test]
    fn rq_ledgers_fill_and_reset() {
        let s = Scenario::paper_default();
        let mut p = LearningPolicy::new(LearnerKind::Rq, &s, 1);
        let out = run(&s.scenario, &mut p, RunSeeds::same(9)).unwrap();
        let recorded: usize = p.agents().iter().map(|a| a.ledger().len()).sum();
        assert_eq!(recorded, out.completions.len());
        for r in &p.agents()[0].reward_trace {
            assert!(r.is_finite());
        }
        p.begin_episode(&s.scenario);
        assert!(p.agents().iter().all(|a| a.ledger().is_empty()));
    }

    #[test]
    fn checkpoint_names_round_trip() {
        let s = Scenario::paper_default();
        let mut p = LearningPolicy::new(LearnerKind::Drs, &s, 1);
        let names: Vec<String> = p.networks().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 8);
        let other = LearningPolicy::new(LearnerKind::Drs, &s, 2);
        for (name, net) in other.networks() {
            p.load_network(&name, net.clone()).unwrap();
        }
        assert_eq!(p.agents()[3].risk_net, other.agents()[3].risk_net);
        assert!(p.load_network("uav9", other.agents()[0].net.clone()).is_err());
    }
}
