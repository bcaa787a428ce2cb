use std::sync::Arc;

use rand::Rng;

/// Stored transition. Observations are raw encodings shared between
/// consecutive entries; augmentation is recomputed at replay time.
#[derive(Debug, Clone)]
pub struct ReplayEntry {
    pub obs: Arc<[f64]>,
    pub action: usize,
    pub reward: f64,
    pub cost: u8,
    pub next_obs: Arc<[f64]>,
    pub terminal: bool,
    pub truncated: bool,
    /// Appended features of `obs` / `next_obs`, tagged with the snapshot
    /// version they were computed with.
    pub(crate) extra: Option<(u64, Vec<f64>)>,
    pub(crate) next_extra: Option<(u64, Vec<f64>)>,
}

impl ReplayEntry {
    pub fn new(
        obs: Arc<[f64]>,
        action: usize,
        reward: f64,
        cost: u8,
        next_obs: Arc<[f64]>,
        terminal: bool,
        truncated: bool,
    ) -> Self {
        Self {
            obs,
            action,
            reward,
            cost,
            next_obs,
            terminal,
            truncated,
            extra: None,
            next_extra: None,
        }
    }
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: Vec<ReplayEntry>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: ReplayEntry) {
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
        } else {
            self.entries[self.next] = entry;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        out.extend((0..n).map(|_| rng.gen_range(0..self.entries.len())));
    }

    pub fn get(&self, i: usize) -> &ReplayEntry {
        &self.entries[i]
    }

    pub(crate) fn get_mut(&mut self, i: usize) -> &mut ReplayEntry {
        &mut self.entries[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(v: f64) -> ReplayEntry {
        let o: Arc<[f64]> = vec![v].into();
        ReplayEntry::new(o.clone(), 0, v, 0, o, false, false)
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(entry(i as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }
}
