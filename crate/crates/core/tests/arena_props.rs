use mmpd_core::arena::{self, ArenaConfig, Outcome, Weapon, WhiteAction, NUM_WHITES, RED_ID};
use proptest::prelude::*;

fn actions() -> impl Strategy<Value = Vec<[u8; 2]>> {
    prop::collection::vec([0u8..7, 0u8..7], 1..300)
}

fn decode(a: [u8; 2]) -> [WhiteAction; NUM_WHITES] {
    a.map(|i| WhiteAction::from_index(i as usize).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_respect_invariants(seed in any::<u64>(), plan in actions()) {
        let cfg = ArenaConfig::default();
        let mut s = arena::reset(&cfg, seed).unwrap();
        let red_pos = s.red.pos;
        let mut removed = 0;
        let mut last_gun_hit: [Option<u32>; NUM_WHITES] = [None; NUM_WHITES];
        for a in plan {
            if s.is_terminal(&cfg) {
                prop_assert!(arena::step(&s, decode(a), &cfg).is_err());
                break;
            }
            let before = s.red.hp;
            let r = arena::step(&s, decode(a), &cfg).unwrap();
            prop_assert!(r.reward.is_finite());
            prop_assert_eq!(r.done, r.outcome != Outcome::Ongoing);
            prop_assert_eq!(r.next_state.red.pos, red_pos);
            prop_assert!(r.next_state.tick <= cfg.max_ticks);
            for w in &r.next_state.white {
                prop_assert!((0.0..=cfg.arena_size_m).contains(&w.pos[0]));
                prop_assert!((0.0..=cfg.arena_size_m).contains(&w.pos[1]));
            }
            let dealt: u32 = r.events.iter().filter(|e| e.target == RED_ID).map(|e| e.damage).sum();
            prop_assert_eq!(before - r.next_state.red.hp, dealt);
            removed += dealt;
            for e in r.events.iter().filter(|e| e.weapon == Weapon::Gun) {
                if let Some(t) = last_gun_hit[e.shooter] {
                    prop_assert!(s.tick - t >= cfg.gun_cooldown_ticks);
                }
                last_gun_hit[e.shooter] = Some(s.tick);
            }
            for v in arena::observe(&r.next_state, &cfg) {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
            s = r.next_state;
        }
        prop_assert_eq!(cfg.red_hp - s.red.hp, removed);
    }

    #[test]
    fn stepping_is_deterministic(seed in any::<u64>(), plan in actions()) {
        let cfg = ArenaConfig::default();
        let run = || {
            let mut s = arena::reset(&cfg, seed).unwrap();
            let mut rewards = Vec::new();
            for a in &plan {
                if s.is_terminal(&cfg) {
                    break;
                }
                let r = arena::step(&s, decode(*a), &cfg).unwrap();
                rewards.push(r.reward.to_bits());
                s = r.next_state;
            }
            (s, rewards)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn red_controller_never_exceeds_turn_rate(seed in any::<u64>(), heading in 0.0f64..360.0) {
        let cfg = ArenaConfig::default();
        let mut s = arena::reset(&cfg, seed).unwrap();
        s.red.heading_deg = heading;
        let cmd = arena::red_controller(&s, &cfg);
        prop_assert!(cmd.turn_delta_deg.abs() <= cfg.red_turn_deg_per_tick + 1e-12);
    }
}
