//! Episode rollouts of a joint policy, producing transitions and per-tick logs.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{self, ArenaConfig, AttackEvent, Outcome, WhiteAction, NUM_WHITES};
use crate::error::{Error, Result};
use crate::learner::{act, ActMode, PolicyParams, Transition};
use crate::seed::derive_seed_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    /// White positions after this tick's movement.
    pub positions: [[f64; 2]; NUM_WHITES],
    pub actions: [u8; NUM_WHITES],
    pub red_heading_deg: f64,
    pub red_hp: u32,
    pub reward: f64,
    pub events: Vec<AttackEvent>,
}

/// One logged episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub start: [[f64; 2]; NUM_WHITES],
    pub records: Vec<TickRecord>,
    pub outcome: Outcome,
}

impl TrajectoryLog {
    /// Positions of white `agent`, starting with its spawn point.
    pub fn agent_path(&self, agent: usize) -> Vec<[f64; 2]> {
        std::iter::once(self.start[agent])
            .chain(self.records.iter().map(|r| r.positions[agent]))
            .collect()
    }

    pub fn episode_return(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn actions(&self) -> impl Iterator<Item = [u8; NUM_WHITES]> + '_ {
        self.records.iter().map(|r| r.actions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub log: TrajectoryLog,
}

/// Seed of the `index`-th evaluation episode derived from a base seed.
pub fn episode_seed(base: u64, index: usize) -> u64 {
    derive_seed_indexed(base, "eval-episode", index as u64)
}

/// Runs one episode to termination: greedy when `rng` is `None`, sampled otherwise.
pub fn run_episode(
    params: &PolicyParams,
    config: &ArenaConfig,
    seed: u64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Episode> {
    let mut state = arena::reset(config, seed)?;
    let start = [state.white[0].pos, state.white[1].pos];
    let mut transitions = Vec::new();
    let mut records = Vec::new();
    loop {
        let obs = arena::observe(&state, config);
        let mut idx = [0u8; NUM_WHITES];
        for (k, a) in idx.iter_mut().enumerate() {
            let mode = match rng.as_deref_mut() {
                Some(r) => ActMode::Sample(r),
                None => ActMode::Greedy,
            };
            *a = act(params, k, &obs, mode)? as u8;
        }
        let actions = [
            WhiteAction::from_index(idx[0] as usize)?,
            WhiteAction::from_index(idx[1] as usize)?,
        ];
        let r = arena::step(&state, actions, config)?;
        transitions.push(Transition {
            state: obs,
            actions: idx,
            reward: r.reward,
            next_state: arena::observe(&r.next_state, config),
            done: r.done,
        });
        records.push(TickRecord {
            tick: r.next_state.tick,
            positions: [r.next_state.white[0].pos, r.next_state.white[1].pos],
            actions: idx,
            red_heading_deg: r.next_state.red.heading_deg,
            red_hp: r.next_state.red.hp,
            reward: r.reward,
            events: r.events,
        });
        if r.done {
            return Ok(Episode {
                transitions,
                log: TrajectoryLog {
                    seed,
                    start,
                    records,
                    outcome: r.outcome,
                },
            });
        }
        state = r.next_state;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub win_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

/// Greedy evaluation over `episodes` seeded episodes.
pub fn evaluate(
    params: &PolicyParams,
    config: &ArenaConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    let logs = greedy_logs(params, config, episodes, seed)?;
    Ok(summarize(&logs))
}

pub fn greedy_logs(
    params: &PolicyParams,
    config: &ArenaConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<TrajectoryLog>> {
    (0..episodes)
        .map(|i| run_episode(params, config, episode_seed(seed, i), None).map(|e| e.log))
        .collect()
}

pub fn summarize(logs: &[TrajectoryLog]) -> EvalReport {
    let n = logs.len().max(1) as f64;
    EvalReport {
        episodes: logs.len(),
        win_rate: logs.iter().filter(|l| l.outcome == Outcome::Win).count() as f64 / n,
        mean_return: logs.iter().map(TrajectoryLog::episode_return).sum::<f64>() / n,
        mean_length: logs.iter().map(|l| l.records.len() as f64).sum::<f64>() / n,
    }
}

/// Re-simulates a logged episode from its seed and logged actions and checks
/// that every position and reward is reproduced bit-for-bit.
pub fn replay_matches(log: &TrajectoryLog, config: &ArenaConfig) -> Result<bool> {
    let mut state = arena::reset(config, log.seed)?;
    if [state.white[0].pos, state.white[1].pos] != log.start {
        return Ok(false);
    }
    for rec in &log.records {
        let actions = [
            WhiteAction::from_index(rec.actions[0] as usize)?,
            WhiteAction::from_index(rec.actions[1] as usize)?,
        ];
        let r = arena::step(&state, actions, config)?;
        let positions = [r.next_state.white[0].pos, r.next_state.white[1].pos];
        if positions != rec.positions
            || r.reward.to_bits() != rec.reward.to_bits()
            || r.next_state.red.hp != rec.red_hp
            || r.events != rec.events
        {
            return Ok(false);
        }
        state = r.next_state;
    }
    if !state.is_terminal(config) && !log.records.is_empty() {
        return Err(Error::usage("logged episode ends before a terminal state"));
    }
    Ok(true)
}
