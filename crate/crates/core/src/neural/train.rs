use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{QNetwork, Regression};
use super::replay::Transition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub episodes: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Gradient steps between target-network syncs; 1 disables the target.
    pub target_sync_interval: usize,
    pub hidden_layers: Vec<usize>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    /// Gradient steps per agent after each collected episode.
    pub updates_per_episode: usize,
    /// Multiplier applied to rewards before they enter TD targets. Positive
    /// scaling leaves the greedy policy unchanged.
    pub reward_scale: f64,
    /// Optional global gradient-norm cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_grad_norm: Option<f64>,
    /// Gradient steps run right after an offline dataset fills the buffers.
    pub offline_pretrain_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            discount: 0.85,
            episodes: 10_000,
            batch_size: 32,
            replay_capacity: 100_000,
            target_sync_interval: 500,
            hidden_layers: vec![64, 64],
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            updates_per_episode: 4,
            reward_scale: 0.05,
            max_grad_norm: None,
            offline_pretrain_steps: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("train.discount must lie in [0, 1)"));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::config(format!("train.{name} must lie in [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return Err(Error::config("train.epsilon_decay_fraction must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync_interval == 0 {
            return Err(Error::config(
                "train.batch_size, replay_capacity and target_sync_interval must be positive",
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::config("train.hidden_layers entries must be positive"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("train.reward_scale must be > 0"));
        }
        if let Some(n) = self.max_grad_norm {
            if !(n > 0.0) {
                return Err(Error::config("train.max_grad_norm must be > 0"));
            }
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_decay_fraction` of the episodes, flat afterwards.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let horizon = self.epsilon_decay_fraction * self.episodes as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let progress = episode as f64 / horizon;
        if progress >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress
    }

    pub fn layer_sizes(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        std::iter::once(inputs)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(outputs))
            .collect()
    }
}

/// How the next state's value enters the TD target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// Reward maximization.
    Max,
    /// Cost minimization.
    Min,
}

/// Which scalar of a transition is being learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward,
    Risk,
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// TD target `r + discount · best_a′ target(s′, a′)`, or `r` when terminal.
pub fn td_target(
    target_net: &QNetwork,
    t: &Transition,
    cfg: &TrainConfig,
    signal: Signal,
    bootstrap: Bootstrap,
) -> f64 {
    let r = cfg.reward_scale
        * match signal {
            Signal::Reward => t.reward,
            Signal::Risk => t.risk,
        };
    if t.terminal || cfg.discount == 0.0 {
        return r;
    }
    let next = target_net.forward(&widen(&t.next_state));
    let best = match bootstrap {
        Bootstrap::Max => next.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Bootstrap::Min => next.iter().copied().fold(f64::INFINITY, f64::min),
    };
    r + cfg.discount * best
}

/// One SGD step on the mean squared TD error of `batch`. Returns the batch
/// loss measured before the step.
pub fn td_update(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &TrainConfig,
    signal: Signal,
    bootstrap: Bootstrap,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("td_update needs a non-empty batch"));
    }
    let inputs: Vec<Vec<f64>> = batch.iter().map(|t| widen(&t.state)).collect();
    let targets: Vec<f64> = batch
        .iter()
        .map(|t| td_target(target_net, t, cfg, signal, bootstrap))
        .collect();
    let examples: Vec<Regression<'_>> = inputs
        .iter()
        .zip(batch)
        .zip(&targets)
        .map(|((input, t), &target)| Regression {
            input,
            action: t.action,
            target,
        })
        .collect();
    let (loss, grads) = net.loss_and_gradient(&examples);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite TD loss {loss}")));
    }
    net.apply_gradients(grads, cfg.learning_rate, cfg.max_grad_norm);
    if !net.is_finite() {
        return Err(Error::Numeric("network weights became non-finite".into()));
    }
    Ok(loss)
}

/// Lowest-index argmax of `values` over the `mask`ed entries. NaN counts as
/// −∞.
pub fn masked_argmax(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&v, &ok)) in values.iter().zip(mask).enumerate() {
        if !ok {
            continue;
        }
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// ε-greedy choice over already computed Q-values.
pub fn epsilon_greedy(q: &[f64], epsilon: f64, rng: &mut impl Rng, mask: &[bool]) -> usize {
    let feasible: Vec<usize> = (0..q.len()).filter(|&i| mask[i]).collect();
    assert!(!feasible.is_empty(), "at least one action must be feasible");
    if feasible.len() == 1 {
        return feasible[0];
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return feasible[rng.random_range(0..feasible.len())];
    }
    masked_argmax(q, mask).expect("feasible set is non-empty")
}

/// ε-greedy action for `state` under `net`.
pub fn select_action(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    rng: &mut impl Rng,
    mask: &[bool],
) -> usize {
    epsilon_greedy(&net.forward(state), epsilon, rng, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cfg() -> TrainConfig {
        TrainConfig {
            reward_scale: 1.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn myopic_target_is_reward() {
        let net = QNetwork::new(&[2, 3, 2], &mut stream(1, &[]));
        let t = Transition {
            state: vec![0.1, 0.2],
            action: 1,
            reward: 3.5,
            risk: 0.0,
            next_state: vec![1.0, -1.0],
            terminal: false,
        };
        let c = TrainConfig { discount: 0.0, ..cfg() };
        assert_eq!(td_target(&net, &t, &c, Signal::Reward, Bootstrap::Max), 3.5);
    }

    #[test]
    fn one_by_one_network_takes_the_closed_form_step() {
        // q = w·x + b, loss = (q − r)², ∂/∂w = 2(q − r)x, ∂/∂b = 2(q − r).
        let mut net = QNetwork::zeros(&[1, 1]);
        net.layers_mut()[0].weights[0] = 0.4;
        net.layers_mut()[0].biases[0] = -0.1;
        let target = net.clone();
        let (w, b, x, r, lr) = (0.4, -0.1, 2.0, 1.5, 0.05);
        let t = Transition {
            state: vec![x as f32],
            action: 0,
            reward: r,
            risk: 0.0,
            next_state: vec![0.0],
            terminal: true,
        };
        let c = TrainConfig { learning_rate: lr, ..cfg() };
        let loss = td_update(&mut net, &target, &[&t], &c, Signal::Reward, Bootstrap::Max).unwrap();
        let q = w * x + b;
        assert!((loss - (q - r) * (q - r)).abs() < 1e-12);
        let l = &net.layers()[0];
        assert!((l.weights[0] - (w - lr * 2.0 * (q - r) * x)).abs() < 1e-12);
        assert!((l.biases[0] - (b - lr * 2.0 * (q - r))).abs() < 1e-12);
    }

    #[test]
    fn non_finite_loss_is_a_numeric_error() {
        let mut net = QNetwork::zeros(&[1, 1]);
        let target = net.clone();
        let t = Transition {
            state: vec![1.0],
            action: 0,
            reward: f64::INFINITY,
            risk: 0.0,
            next_state: vec![0.0],
            terminal: true,
        };
        let err = td_update(&mut net, &target, &[&t], &cfg(), Signal::Reward, Bootstrap::Max)
            .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(td_update(&mut net, &target, &[], &cfg(), Signal::Reward, Bootstrap::Max).is_err());
    }

    #[test]
    fn greedy_and_forced_choices() {
        let q = [0.1, 0.9, 0.3, 0.2, 0.5];
        let all = [true; 5];
        let mut rng = stream(0, &[]);
        assert_eq!(epsilon_greedy(&q, 0.0, &mut rng, &all), 1);
        let only_four = [false, false, false, false, true];
        for eps in [0.0, 0.5, 1.0] {
            assert_eq!(epsilon_greedy(&q, eps, &mut rng, &only_four), 4);
        }
        assert_eq!(masked_argmax(&[1.0, 1.0, 0.5], &[true; 3]), Some(0));
        assert_eq!(masked_argmax(&[f64::NAN, 0.0], &[true; 2]), Some(1));
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let c = TrainConfig { episodes: 100, ..TrainConfig::default() };
        assert_eq!(c.epsilon(0), 1.0);
        assert!((c.epsilon(40) - 0.525).abs() < 1e-12);
        assert!((c.epsilon(80) - 0.05).abs() < 1e-12);
        assert_eq!(c.epsilon(99), 0.05);
    }

    #[test]
    fn argmax_is_invariant_to_positive_scaling() {
        let mut rng = stream(8, &[]);
        for _ in 0..200 {
            let q: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            let k = rng.random_range(0.01..100.0);
            let scaled: Vec<f64> = q.iter().map(|v| v * k).collect();
            assert_eq!(masked_argmax(&q, &[true; 5]), masked_argmax(&scaled, &[true; 5]));
        }
    }
}
