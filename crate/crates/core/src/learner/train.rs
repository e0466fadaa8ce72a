use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{self, ArenaConfig, Outcome, WhiteAction, NUM_ACTIONS, NUM_WHITES};
use crate::error::Result;
use crate::seed::{derive_seed, derive_seed_indexed};

use super::replay::{ReplayBuffer, Transition};
use super::sac::{Batch, SacLearner, Scratch};
use super::{masked_softmax, sample_categorical, PolicyParams, SacConfig, Skill};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub episode: usize,
    /// Environment steps completed when the episode ended.
    pub env_steps: u64,
    pub episode_return: f64,
    pub length: u32,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub episodes: Vec<EpisodeStat>,
}

impl TrainingCurve {
    /// Win rate over the last `n` episodes (all of them if fewer).
    pub fn recent_win_rate(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|e| e.outcome == Outcome::Win).count() as f64 / tail.len() as f64
    }
}

/// Extension point called after every fresh environment transition has been
/// stored. The diversity trainer uses it to inject relabeled transitions.
pub trait StepHook {
    fn after_env_step(
        &mut self,
        steps_done: u64,
        params: &PolicyParams,
        replay: &mut ReplayBuffer,
    ) -> Result<()>;
}

pub struct NoHook;

impl StepHook for NoHook {
    fn after_env_step(&mut self, _: u64, _: &PolicyParams, _: &mut ReplayBuffer) -> Result<()> {
        Ok(())
    }
}

/// Plain joint training of both agents on the task reward.
pub fn train_baseline(
    sac: &SacConfig,
    arena: &ArenaConfig,
    seed: u64,
    env_steps: u64,
) -> Result<(PolicyParams, TrainingCurve)> {
    train_with_hook(sac, arena, Skill::Any, seed, env_steps, &mut NoHook)
}

fn random_allowed_action(mask: &[bool; NUM_ACTIONS], rng: &mut ChaCha8Rng) -> usize {
    let allowed: Vec<usize> = (0..NUM_ACTIONS).filter(|&a| mask[a]).collect();
    allowed[rng.gen_range(0..allowed.len())]
}

/// Off-policy training loop: sampled rollouts of both agents fill the replay
/// buffer; after warmup, every `env_steps_per_update` steps each agent takes
/// `updates_per_round` SAC steps on uniformly drawn batches.
pub fn train_with_hook(
    sac: &SacConfig,
    arena_cfg: &ArenaConfig,
    skill: Skill,
    seed: u64,
    env_steps: u64,
    hook: &mut dyn StepHook,
) -> Result<(PolicyParams, TrainingCurve)> {
    sac.validate()?;
    arena_cfg.validate()?;
    let mut params = PolicyParams::new(sac, skill, seed);
    let mut curve = TrainingCurve::default();
    if env_steps == 0 {
        return Ok((params, curve));
    }
    let mask = params.mask();
    let mut learner = SacLearner::new(&params);
    let mut replay = ReplayBuffer::new(sac.replay_capacity);
    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "act"));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "replay"));
    let mut scratch = Scratch::default();
    let mut batch = Batch::default();

    let mut episode = 0usize;
    let mut state = arena::reset(arena_cfg, derive_seed_indexed(seed, "episode", 0))?;
    let mut episode_return = 0.0;

    for step in 0..env_steps {
        let obs = arena::observe(&state, arena_cfg);
        let mut actions = [WhiteAction::Stay; NUM_WHITES];
        for (k, a) in actions.iter_mut().enumerate() {
            let idx = if (step as usize) < sac.warmup_steps {
                random_allowed_action(&mask, &mut act_rng)
            } else {
                let logits = params.agents[k].actor.forward(&obs)?;
                let (p, _) = masked_softmax(&logits, &mask);
                sample_categorical(&p, &mut act_rng)
            };
            *a = WhiteAction::from_index(idx)?;
        }
        let result = arena::step(&state, actions, arena_cfg)?;
        episode_return += result.reward;
        replay.push(Transition {
            state: obs,
            actions: actions.map(|a| a as u8),
            reward: result.reward,
            next_state: arena::observe(&result.next_state, arena_cfg),
            done: result.done,
        });
        if result.done {
            curve.episodes.push(EpisodeStat {
                episode,
                env_steps: step + 1,
                episode_return,
                length: result.next_state.tick,
                outcome: result.outcome,
            });
            if episode % 200 == 0 {
                log::debug!(
                    "seed {seed} step {} episode {episode} return {episode_return:.2} recent win rate {:.2}",
                    step + 1,
                    curve.recent_win_rate(100)
                );
            }
            episode += 1;
            episode_return = 0.0;
            state = arena::reset(
                arena_cfg,
                derive_seed_indexed(seed, "episode", episode as u64),
            )?;
        } else {
            state = result.next_state;
        }

        let done_steps = step + 1;
        hook.after_env_step(done_steps, &params, &mut replay)?;

        if done_steps as usize >= sac.warmup_steps
            && done_steps % sac.env_steps_per_update as u64 == 0
        {
            for _ in 0..sac.updates_per_round {
                for agent in 0..NUM_WHITES {
                    batch.fill(replay.sample(sac.batch_size, &mut sample_rng));
                    learner.update(&mut params, &batch, agent, &mut scratch)?;
                }
            }
        }
    }
    Ok((params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SacConfig {
        SacConfig {
            warmup_steps: 50,
            batch_size: 16,
            hidden_sizes: vec![8],
            ..SacConfig::default()
        }
    }

    #[test]
    fn zero_budget_returns_initial_params() {
        let (p, curve) = train_baseline(&small(), &ArenaConfig::default(), 3, 0).unwrap();
        assert_eq!(p, PolicyParams::new(&small(), Skill::Any, 3));
        assert!(curve.episodes.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let a = train_baseline(&small(), &ArenaConfig::default(), 5, 600).unwrap();
        let b = train_baseline(&small(), &ArenaConfig::default(), 5, 600).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, PolicyParams::new(&small(), Skill::Any, 5));
    }
}
