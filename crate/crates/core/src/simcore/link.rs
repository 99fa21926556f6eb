use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NodeRole;

/// Parametric per-hop transmission delays (seconds) with uniform
/// multiplicative jitter in `[1 − j, 1 + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDelayModel {
    pub iot_uav_delay: f64,
    pub uav_uav_delay: f64,
    /// Also used between two MEC servers.
    pub uav_mec_delay: f64,
    pub jitter_fraction: f64,
}

impl Default for LinkDelayModel {
    fn default() -> Self {
        LinkDelayModel {
            iot_uav_delay: 0.05,
            uav_uav_delay: 0.05,
            uav_mec_delay: 0.1,
            jitter_fraction: 0.1,
        }
    }
}

impl LinkDelayModel {
    pub fn validate(&self) -> Result<()> {
        for v in [self.iot_uav_delay, self.uav_uav_delay, self.uav_mec_delay] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config("link delays must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.jitter_fraction) {
            return Err(Error::config("jitter_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Base delay between two compute nodes; zero from a node to itself.
    pub fn base_delay(&self, from: (usize, NodeRole), to: (usize, NodeRole)) -> f64 {
        if from.0 == to.0 {
            return 0.0;
        }
        match (from.1, to.1) {
            (NodeRole::Uav, NodeRole::Uav) => self.uav_uav_delay,
            _ => self.uav_mec_delay,
        }
    }

    /// Row-major `|J⁺| × |J⁺|` matrix of base delays, UAVs first.
    pub fn matrix(&self, num_uav: usize, num_mec: usize) -> Vec<f64> {
        let n = num_uav + num_mec;
        let role = |i: usize| if i < num_uav { NodeRole::Uav } else { NodeRole::Mec };
        let mut m = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                m.push(self.base_delay((a, role(a)), (b, role(b))));
            }
        }
        m
    }

    /// Applies jitter given a uniform draw `u ∈ [0, 1)`.
    pub fn jittered(&self, base: f64, u: f64) -> f64 {
        base * (1.0 + self.jitter_fraction * (2.0 * u - 1.0))
    }

    pub fn sample(&self, base: f64, rng: &mut impl Rng) -> f64 {
        self.jittered(base, rng.random::<f64>())
    }
}
