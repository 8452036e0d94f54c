use super::TrainingTarget;
use crate::rng::RngStream;

pub const DEFAULT_CAPACITY: usize = 5000;
pub const DEFAULT_BATCH_SIZE: usize = 16;

/// Fixed-capacity FIFO of training targets.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<TrainingTarget>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
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

    /// Total number of pushes, including evicted targets.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Append, evicting the oldest target once full.
    pub fn push(&mut self, target: TrainingTarget) {
        if self.items.len() < self.capacity {
            self.items.push(target);
        } else {
            self.items[self.next] = target;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Oldest-first view of the contents.
    pub fn iter(&self) -> impl Iterator<Item = &TrainingTarget> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample with replacement, or `None` while fewer than
    /// `batch_size` targets are stored.
    pub fn sample(&self, rng: &mut RngStream, batch_size: usize) -> Option<Vec<&TrainingTarget>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return None;
        }
        Some((0..batch_size).map(|_| &self.items[rng.index(self.items.len())]).collect())
    }
}
