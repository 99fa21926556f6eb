use rand::Rng;
use serde::{Deserialize, Serialize};

/// One experience. States are stored in single precision to keep a full
/// buffer small; they are widened again before every forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f64,
    /// Secondary signal (the risk cost for the risk-sensitive learner).
    #[serde(default)]
    pub risk: f64,
    pub next_state: Vec<f32>,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with FIFO eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn t(r: f64) -> Transition {
        Transition {
            state: vec![r as f32],
            action: 0,
            reward: r,
            risk: 0.0,
            next_state: vec![],
            terminal: true,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(f64::from(i)));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter().map(|x| x.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.push(t(f64::from(i)));
        }
        let a: Vec<f64> = b.sample(10, &mut stream(3, &[])).iter().map(|x| x.reward).collect();
        let c: Vec<f64> = b.sample(10, &mut stream(3, &[])).iter().map(|x| x.reward).collect();
        assert_eq!(a, c);
        assert!(b.sample(4, &mut stream(3, &[])).len() == 4);
        assert!(ReplayBuffer::new(2).sample(4, &mut stream(3, &[])).is_empty());
    }
}
