use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discrete::DiscreteState;
use crate::env::ActionId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: DiscreteState,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: DiscreteState,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("replay buffer holds {available} transitions, batch of {requested} requested")]
pub struct UnderfullBuffer {
    pub available: usize,
    pub requested: usize,
}

/// Bounded FIFO of transitions; the oldest entry is evicted first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

/// Uniform sample of `batch` distinct transitions.
pub fn replay_sample<R: Rng>(buf: &ReplayBuffer, batch: usize, rng: &mut R) -> Result<Vec<Transition>, UnderfullBuffer> {
    if buf.len() < batch {
        return Err(UnderfullBuffer {
            available: buf.len(),
            requested: batch,
        });
    }
    Ok(sample(rng, buf.len(), batch).into_iter().map(|i| buf.items[i]).collect())
}
