use mmpd_core::arena::{NUM_ACTIONS, OBS_DIM};
use mmpd_core::learner::nn::soft_update;
use mmpd_core::learner::{
    masked_softmax, Mlp, PolicyParams, ReplayBuffer, SacConfig, Skill, Transition,
};
use mmpd_core::store::{load_checkpoint, save_checkpoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn softmax_is_a_distribution(
        logits in prop::array::uniform7(-50.0f64..50.0),
        skill in prop::sample::select(vec![Skill::Any, Skill::GunOnly, Skill::BombOnly]),
    ) {
        let mask = skill.mask();
        let (p, logp) = masked_softmax(&logits, &mask);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for a in 0..NUM_ACTIONS {
            if mask[a] {
                prop_assert!(p[a] > 0.0 || logits.iter().cloned().fold(f64::MIN, f64::max) - logits[a] > 700.0);
                prop_assert!(logp[a] <= 0.0);
            } else {
                prop_assert_eq!(p[a], 0.0);
            }
        }
    }

    #[test]
    fn soft_update_interpolates_exactly(seed in any::<u64>(), tau in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [3, 4, 2];
        let online = Mlp::new(&sizes, 1.0, &mut rng);
        let target0 = Mlp::new(&sizes, 1.0, &mut rng);
        let mut target = target0.clone();
        soft_update(&mut target, &online, tau).unwrap();
        for ((t, t0), o) in target.params().zip(target0.params()).zip(online.params()) {
            prop_assert_eq!(*t, (1.0 - tau) * t0 + tau * o);
        }
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), hidden in 1usize..6) {
        let cfg = SacConfig { hidden_sizes: vec![hidden], ..SacConfig::default() };
        let params = PolicyParams::new(&cfg, Skill::BombOnly, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt.json");
        save_checkpoint(&params, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        for (a, b) in params.agents.iter().zip(&back.agents) {
            for (x, y) in a.critic2.params().zip(b.critic2.params()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(params, back);
    }

    #[test]
    fn replay_never_exceeds_capacity(cap in 1usize..50, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..pushes {
            buf.push(Transition {
                state: [i as f64; OBS_DIM],
                actions: [0, 1],
                reward: i as f64,
                next_state: [0.0; OBS_DIM],
                done: false,
            });
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        let newest = buf.iter().map(|t| t.reward as usize).max();
        prop_assert_eq!(newest, pushes.checked_sub(1));
    }
}
