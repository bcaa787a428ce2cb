mod common;

use common::{corridor_cells, corridor_convergence, corridor_env, walk_into_water};
use proptest::prelude::*;
use srpl_core::s2c::{label_trajectory, S2CBuffer, SafetyLabel};

#[test]
fn corridor_rollouts_label_walking_distance() {
    let env = corridor_env();
    for (p, d) in corridor_cells() {
        let traj = walk_into_water(&env, p);
        assert_eq!(traj.len(), d as usize, "start {p:?}");
        let labels = label_trajectory(&traj, 8).unwrap();
        assert_eq!(labels[0].delta(), d.min(8));
    }
}

#[test]
fn corridor_modes_match_bins() {
    let r = corridor_convergence(0, 5_000);
    assert!(r.all_match(), "after {} steps: {:?}", r.train_steps, r.modes);
    assert_eq!(r.modes.len(), 8);
}

#[derive(Debug, Clone)]
enum Op {
    Push(u8),
    Clear,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        20 => any::<u8>().prop_map(Op::Push),
        1 => Just(Op::Clear),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fifo_matches_reference(capacity in 1usize..16, ops in prop::collection::vec(op(), 0..80)) {
        let mut buf = S2CBuffer::new(capacity);
        let mut reference: Vec<(f64, u32)> = Vec::new();
        for (i, o) in ops.into_iter().enumerate() {
            match o {
                Op::Push(v) => {
                    let label = u32::from(v % 8) + 1;
                    buf.push(vec![f64::from(v), i as f64], SafetyLabel::new(label, 8).unwrap());
                    reference.push((i as f64, label));
                    if reference.len() > capacity {
                        reference.remove(0);
                    }
                }
                Op::Clear => {
                    buf.clear();
                    reference.clear();
                }
            }
            let got: Vec<(f64, u32)> = buf.iter().map(|(obs, l)| (obs[1], l.delta())).collect();
            prop_assert_eq!(&got, &reference);
        }
    }
}
