use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Trajectory;

/// Steps-to-cost of a visited state: the number of actions taken from it
/// before the trajectory entered an unsafe state, capped at the safety
/// horizon. The cap doubles as the "safe within the horizon" value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SafetyLabel(u32);

impl SafetyLabel {
    pub fn new(delta: u32, horizon: u32) -> Result<Self> {
        if (1..=horizon).contains(&delta) {
            Ok(Self(delta))
        } else {
            Err(Error::InvalidInput(format!(
                "steps-to-cost {delta} outside [1, {horizon}]"
            )))
        }
    }

    pub fn delta(self) -> u32 {
        self.0
    }
}

/// Labels every visited state of a finished trajectory (the unsafe state a
/// failing trajectory ends in is not itself labelled).
///
/// States more than `horizon` actions before the failure, and every state of
/// a trajectory that never failed (goal or truncation), get `horizon`.
pub fn label_trajectory(traj: &Trajectory, horizon: u32) -> Result<Vec<SafetyLabel>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("safety horizon must be positive".into()));
    }
    if !traj.is_complete() {
        return Err(Error::Contract(
            "cannot label an unfinished trajectory".into(),
        ));
    }
    traj.validate()?;
    let n = traj.len();
    let labels = (0..n)
        .map(|t| {
            let delta = if traj.failed {
                u32::try_from(n - t).unwrap_or(u32::MAX).min(horizon)
            } else {
                horizon
            };
            SafetyLabel(delta)
        })
        .collect();
    Ok(labels)
}

/// Number of output bins for a horizon split into `bin_width`-step bins.
pub fn num_bins(horizon: u32, bin_width: u32) -> usize {
    (horizon / bin_width) as usize
}

/// `ceil(delta / w) - 1`; the safe value `delta = horizon` lands in the last
/// bin.
pub fn bin_index(delta: u32, bin_width: u32, horizon: u32) -> Result<usize> {
    if bin_width == 0 || !horizon.is_multiple_of(bin_width) {
        return Err(Error::InvalidInput(format!(
            "bin width {bin_width} does not divide horizon {horizon}"
        )));
    }
    if !(1..=horizon).contains(&delta) {
        return Err(Error::InvalidInput(format!(
            "steps-to-cost {delta} outside [1, {horizon}]"
        )));
    }
    Ok(delta.div_ceil(bin_width) as usize - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::tests::traj_from;
    use crate::mdp::Transition;
    use proptest::prelude::*;

    fn deltas(labels: &[SafetyLabel]) -> Vec<u32> {
        labels.iter().map(|l| l.delta()).collect()
    }

    fn failing(n: usize) -> Trajectory {
        let mut costs = vec![0u8; n];
        costs[n - 1] = 1;
        traj_from(&vec![0.0; n], &costs)
    }

    fn safe(n: usize, truncated: bool) -> Trajectory {
        let mut t = traj_from(&vec![0.0; n], &vec![0; n]);
        if truncated {
            let last = t.transitions.last_mut().unwrap();
            last.terminal = false;
            last.truncated = true;
        } else {
            t.succeeded = true;
        }
        t
    }

    #[test]
    fn five_step_failure() {
        let l = label_trajectory(&failing(5), 40).unwrap();
        assert_eq!(deltas(&l), vec![5, 4, 3, 2, 1]);
    }

    #[test]
    fn success_gets_horizon() {
        let l = label_trajectory(&safe(12, false), 40).unwrap();
        assert_eq!(deltas(&l), vec![40; 12]);
        let l = label_trajectory(&safe(100, true), 40).unwrap();
        assert_eq!(deltas(&l), vec![40; 100]);
    }

    #[test]
    fn long_failure_is_clipped() {
        let l = deltas(&label_trajectory(&failing(60), 40).unwrap());
        assert_eq!(l[..20], [40; 20]);
        assert_eq!(l[20..], (1..=40).rev().collect::<Vec<_>>()[..]);
    }

    #[test]
    fn unfinished_trajectory_rejected() {
        let mut t = failing(3);
        t.failed = false;
        t.transitions.last_mut().unwrap().terminal = false;
        assert!(matches!(label_trajectory(&t, 10), Err(Error::Contract(_))));
        let empty = Trajectory::new();
        assert!(label_trajectory(&empty, 10).is_err());
    }

    #[test]
    fn bin_examples() {
        assert_eq!(bin_index(1, 4, 40).unwrap(), 0);
        assert_eq!(bin_index(4, 4, 40).unwrap(), 0);
        assert_eq!(bin_index(5, 4, 40).unwrap(), 1);
        assert_eq!(bin_index(40, 4, 40).unwrap(), 9);
        for d in 1..=40 {
            assert_eq!(bin_index(d, 1, 40).unwrap(), d as usize - 1);
        }
        assert!(bin_index(0, 4, 40).is_err());
        assert!(bin_index(41, 4, 40).is_err());
        assert!(bin_index(3, 3, 40).is_err());
        assert_eq!(num_bins(40, 4), 10);
    }

    #[test]
    fn label_rejects_invalid_trajectory() {
        let mut t = failing(3);
        t.transitions[0] = Transition {
            terminal: true,
            ..t.transitions[0].clone()
        };
        assert!(label_trajectory(&t, 10).is_err());
    }

    proptest! {
        #[test]
        fn failing_labels_count_down(n in 1usize..150, horizon in 1u32..60) {
            let l = deltas(&label_trajectory(&failing(n), horizon).unwrap());
            prop_assert_eq!(l.len(), n);
            prop_assert_eq!(*l.last().unwrap(), 1);
            for w in l.windows(2) {
                if w[0] < horizon {
                    prop_assert_eq!(w[0], w[1] + 1);
                } else {
                    prop_assert!(w[1] <= horizon);
                }
            }
        }

        #[test]
        fn bins_are_total_and_monotone(w in 1u32..9, k in 1u32..12) {
            let horizon = w * k;
            let mut prev = 0;
            for d in 1..=horizon {
                let b = bin_index(d, w, horizon).unwrap();
                prop_assert!(b < num_bins(horizon, w));
                prop_assert!(b >= prev);
                prop_assert_eq!(b, bin_index(d, w, horizon).unwrap());
                prev = b;
            }
            prop_assert_eq!(prev, num_bins(horizon, w) - 1);
        }
    }
}
