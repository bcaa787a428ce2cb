use std::collections::VecDeque;

use rand::Rng;

use super::label::SafetyLabel;
use crate::error::{Error, Result};
use crate::mdp::Trajectory;

/// Bounded first-in-first-out store of labelled observations.
#[derive(Debug, Clone, PartialEq)]
pub struct S2CBuffer {
    entries: VecDeque<(Vec<f64>, SafetyLabel)>,
    capacity: usize,
}

impl S2CBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            entries: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Appends one entry, evicting the oldest when full.
    pub fn push(&mut self, obs: Vec<f64>, label: SafetyLabel) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((obs, label));
    }

    /// Appends every visited state of `traj` with its label, in order.
    pub fn ingest(&mut self, traj: &Trajectory, labels: &[SafetyLabel]) -> Result<()> {
        if labels.len() != traj.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for a trajectory of {} states",
                labels.len(),
                traj.len()
            )));
        }
        for (t, &label) in traj.transitions.iter().zip(labels) {
            self.push(t.obs.clone(), label);
        }
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<(&[f64], SafetyLabel)> {
        self.entries.get(i).map(|(o, l)| (o.as_slice(), *l))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], SafetyLabel)> {
        self.entries.iter().map(|(o, l)| (o.as_slice(), *l))
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (&[f64], SafetyLabel) {
        let i = rng.gen_range(0..self.entries.len());
        let (o, l) = &self.entries[i];
        (o, *l)
    }
}
