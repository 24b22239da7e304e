use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for terminal states; time-limit truncation is not terminal.
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array1<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let dim = items
            .first()
            .map(|t| t.state.len())
            .ok_or(Error::EmptyBuffer { have: 0, need: 1 })?;
        let n = items.len();
        let mut b = Batch {
            states: Array2::zeros((n, dim)),
            actions: Array1::zeros(n),
            rewards: Array1::zeros(n),
            next_states: Array2::zeros((n, dim)),
            dones: Array1::zeros(n),
        };
        for (i, t) in items.iter().enumerate() {
            if t.state.len() != dim || t.next_state.len() != dim {
                return Err(Error::Dimension("transitions have mixed state sizes".into()));
            }
            for j in 0..dim {
                b.states[[i, j]] = t.state[j];
                b.next_states[[i, j]] = t.next_state[j];
            }
            b.actions[i] = t.action;
            b.rewards[i] = t.reward;
            b.dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(b)
    }
}

/// Fixed-capacity ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
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
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample of distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if batch_size == 0 || self.items.len() < batch_size {
            return Err(Error::EmptyBuffer {
                have: self.items.len(),
                need: batch_size.max(1),
            });
        }
        let picks: Vec<&Transition> = index::sample(rng, self.items.len(), batch_size)
            .into_iter()
            .map(|i| &self.items[i])
            .collect();
        Batch::from_transitions(&picks)
    }
}
