use rand::seq::index;
use rand::Rng;

use crate::env::{ActionIndex, STATE_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Normalized observation before the action.
    pub state: [f64; STATE_DIM],
    pub action: ActionIndex,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
    pub done: bool,
}

/// Fixed-capacity ring buffer; once full, the oldest transition is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
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

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample of `batch` distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch == 0 || batch > self.items.len() {
            return Err(Error::domain(format!(
                "cannot sample {batch} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok(index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition {
            state: [0.0; STATE_DIM],
            action: ActionIndex::new(0).unwrap(),
            reward: r,
            next_state: [0.0; STATE_DIM],
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for r in 0..5 {
            buf.push(t(r as f64));
            assert!(buf.len() <= 3);
        }
        let rewards: Vec<f64> = buf.iter().map(|x| x.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_requires_enough_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReplayBuffer::new(10);
        buf.push(t(1.0));
        assert!(buf.sample(2, &mut rng).is_err());
        buf.push(t(2.0));
        let s = buf.sample(2, &mut rng).unwrap();
        assert_ne!(s[0].reward, s[1].reward);
    }
}
