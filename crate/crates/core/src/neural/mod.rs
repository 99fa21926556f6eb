//! Feedforward Q-approximator, replay buffer and temporal-difference training.

mod network;
mod replay;
mod train;

pub use network::{Dense, Gradients, QNetwork, Regression};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    epsilon_greedy, masked_argmax, select_action, td_target, td_update, Bootstrap, Signal,
    TrainConfig,
};
