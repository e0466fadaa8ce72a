//! Independent discrete soft actor-critic, one learner per white agent, all
//! observing the shared global state vector.

pub mod nn;
pub mod replay;
pub mod sac;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{WhiteAction, NUM_ACTIONS, NUM_WHITES, OBS_DIM};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub use nn::{Mlp, OptimizerKind};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{LossReport, SacLearner};
pub use train::{train_baseline, EpisodeStat, TrainingCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub alpha: f64,
    /// Fresh environment steps between update rounds.
    pub env_steps_per_update: usize,
    /// Gradient steps per agent in each update round.
    pub updates_per_round: usize,
    pub warmup_steps: usize,
    pub hidden_sizes: Vec<usize>,
    pub grad_clip_norm: f64,
    pub optimizer: OptimizerKind,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 6e-4,
            tau: 0.005,
            batch_size: 64,
            replay_capacity: 100_000,
            alpha: 0.05,
            env_steps_per_update: 1,
            updates_per_round: 1,
            warmup_steps: 2_000,
            hidden_sizes: vec![64, 64],
            grad_clip_norm: 10.0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl SacConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            v.push(format!("sac.gamma must lie in [0, 1) (got {})", self.gamma));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            v.push(format!(
                "sac.learning_rate must be positive (got {})",
                self.learning_rate
            ));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            v.push(format!("sac.tau must lie in (0, 1] (got {})", self.tau));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            v.push(format!("sac.alpha must be positive (got {})", self.alpha));
        }
        if !(self.grad_clip_norm.is_finite() && self.grad_clip_norm > 0.0) {
            v.push(format!(
                "sac.grad_clip_norm must be positive (got {})",
                self.grad_clip_norm
            ));
        }
        for (name, value) in [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("env_steps_per_update", self.env_steps_per_update),
            ("updates_per_round", self.updates_per_round),
        ] {
            if value == 0 {
                v.push(format!("sac.{name} must be positive"));
            }
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            v.push("sac.hidden_sizes entries must be positive".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend(&self.hidden_sizes);
        s.push(NUM_ACTIONS);
        s
    }
}

/// Hard action restriction for the skill baselines. Excluded actions never
/// receive probability mass, are never sampled and never win the argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    #[default]
    Any,
    GunOnly,
    BombOnly,
}

impl Skill {
    pub fn allows(self, action: usize) -> bool {
        match self {
            Skill::Any => true,
            Skill::GunOnly => action != WhiteAction::FireBomb.index(),
            Skill::BombOnly => action != WhiteAction::FireGun.index(),
        }
    }

    pub fn mask(self) -> [bool; NUM_ACTIONS] {
        std::array::from_fn(|a| self.allows(a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
}

impl AgentParams {
    fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let actor = Mlp::new(sizes, 0.01, rng);
        let critic1 = Mlp::new(sizes, 1.0, rng);
        let critic2 = Mlp::new(sizes, 1.0, rng);
        Self {
            actor,
            target1: critic1.clone(),
            target2: critic2.clone(),
            critic1,
            critic2,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.target1,
            &self.target2,
        ]
        .iter()
        .all(|n| n.is_finite())
    }
}

/// A joint policy: one actor and twin critics (plus targets) per white agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub agents: Vec<AgentParams>,
    pub alpha: f64,
    pub skill: Skill,
    pub config: SacConfig,
}

impl PolicyParams {
    pub fn new(config: &SacConfig, skill: Skill, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "init"));
        let sizes = config.layer_sizes();
        Self {
            agents: (0..NUM_WHITES)
                .map(|_| AgentParams::new(&sizes, &mut rng))
                .collect(),
            alpha: config.alpha,
            skill,
            config: config.clone(),
        }
    }

    pub fn agent(&self, agent: usize) -> Result<&AgentParams> {
        self.agents.get(agent).ok_or_else(|| {
            Error::usage(format!(
                "agent index {agent} outside 0..{}",
                self.agents.len()
            ))
        })
    }

    pub fn mask(&self) -> [bool; NUM_ACTIONS] {
        self.skill.mask()
    }

    /// Invariant check used after loading: shapes line up and every parameter is finite.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.agents.len() != NUM_WHITES {
            v.push(format!(
                "policy must have {NUM_WHITES} agents (got {})",
                self.agents.len()
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            v.push(format!("alpha must be positive (got {})", self.alpha));
        }
        let sizes = self.config.layer_sizes();
        for (k, a) in self.agents.iter().enumerate() {
            for (name, net) in [
                ("actor", &a.actor),
                ("critic1", &a.critic1),
                ("critic2", &a.critic2),
                ("target1", &a.target1),
                ("target2", &a.target2),
            ] {
                if net.sizes() != sizes {
                    v.push(format!(
                        "agent {k} {name} has sizes {:?}, expected {sizes:?}",
                        net.sizes()
                    ));
                }
                for l in &net.layers {
                    if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                        v.push(format!("agent {k} {name} has inconsistent layer shapes"));
                    }
                }
            }
            if !a.is_finite() {
                v.push(format!("agent {k} has non-finite parameters"));
            }
        }
        v
    }
}

/// Masked softmax of a logit row, returning `(probabilities, log-probabilities)`.
/// Masked entries get probability 0 and log-probability 0.
pub fn masked_softmax(
    logits: &[f64],
    mask: &[bool; NUM_ACTIONS],
) -> ([f64; NUM_ACTIONS], [f64; NUM_ACTIONS]) {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut exps = [0.0; NUM_ACTIONS];
    let mut sum = 0.0;
    for a in 0..NUM_ACTIONS {
        if mask[a] {
            exps[a] = (logits[a] - max).exp();
            sum += exps[a];
        }
    }
    let log_sum = sum.ln();
    let mut probs = [0.0; NUM_ACTIONS];
    let mut logp = [0.0; NUM_ACTIONS];
    for a in 0..NUM_ACTIONS {
        if mask[a] {
            probs[a] = exps[a] / sum;
            logp[a] = logits[a] - max - log_sum;
        }
    }
    (probs, logp)
}

pub fn policy_distribution(
    params: &PolicyParams,
    agent: usize,
    state: &[f64],
) -> Result<[f64; NUM_ACTIONS]> {
    let logits = params.agent(agent)?.actor.forward(state)?;
    Ok(masked_softmax(&logits, &params.mask()).0)
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Lowest-index maximizer.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub enum ActMode<'a> {
    Greedy,
    Sample(&'a mut ChaCha8Rng),
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn act(params: &PolicyParams, agent: usize, state: &[f64], mode: ActMode<'_>) -> Result<usize> {
    let probs = policy_distribution(params, agent, state)?;
    Ok(match mode {
        ActMode::Greedy => argmax(&probs),
        ActMode::Sample(rng) => sample_categorical(&probs, rng),
    })
}

/// Greedy joint action for both agents.
pub fn greedy_actions(params: &PolicyParams, state: &[f64]) -> Result<[u8; NUM_WHITES]> {
    let mut out = [0u8; NUM_WHITES];
    for (k, a) in out.iter_mut().enumerate() {
        *a = act(params, k, state, ActMode::Greedy)? as u8;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let (p, _) = masked_softmax(&[0.0; 7], &Skill::Any.mask());
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
        assert!((entropy(&p) - 7f64.ln()).abs() < 1e-12);
        assert!((7f64.ln() - 1.945910).abs() < 1e-6);
    }

    #[test]
    fn softmax_saturates() {
        let mut logits = [0.0; 7];
        logits[0] = 10.0;
        let (p, _) = masked_softmax(&logits, &Skill::Any.mask());
        // e^10 / (e^10 + 6)
        assert!((p[0] - 0.999_727_6).abs() < 1e-7, "{}", p[0]);
        assert!(p[0] > 0.9997);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masked_actions_get_no_mass() {
        let mut logits = [0.0; 7];
        logits[WhiteAction::FireBomb.index()] = 50.0;
        let (p, lp) = masked_softmax(&logits, &Skill::GunOnly.mask());
        assert_eq!(p[WhiteAction::FireBomb.index()], 0.0);
        assert_eq!(lp[WhiteAction::FireBomb.index()], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(argmax(&p), WhiteAction::FireBomb.index());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_ne!(
                sample_categorical(&p, &mut rng),
                WhiteAction::FireBomb.index()
            );
        }
    }

    #[test]
    fn greedy_tie_breaks_to_lowest_index() {
        let mut p = [0.05; 7];
        p[2] = 0.35;
        p[5] = 0.35;
        assert_eq!(argmax(&p), 2);
        assert_eq!(argmax(&[0.9, 0.02, 0.02, 0.02, 0.02, 0.01, 0.01]), 0);
    }

    #[test]
    fn greedy_on_constructed_tie_logits() {
        let mut params = PolicyParams::new(&SacConfig::default(), Skill::Any, 0);
        let last = params.agents[0].actor.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases = vec![0.0, 0.0, 3.0, 0.0, 0.0, 3.0, 0.0];
        assert_eq!(
            act(&params, 0, &[0.1; OBS_DIM], ActMode::Greedy).unwrap(),
            2
        );
    }

    #[test]
    fn sampling_is_reproducible() {
        let params = PolicyParams::new(&SacConfig::default(), Skill::Any, 3);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| act(&params, 1, &[0.2; OBS_DIM], ActMode::Sample(&mut rng)).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn bad_agent_index_is_usage_error() {
        let params = PolicyParams::new(&SacConfig::default(), Skill::Any, 3);
        assert!(matches!(
            policy_distribution(&params, 2, &[0.0; OBS_DIM]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn distribution_is_valid_on_random_states() {
        let params = PolicyParams::new(&SacConfig::default(), Skill::Any, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s: Vec<f64> = (0..OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = policy_distribution(&params, 0, &s).unwrap();
            assert!(p.iter().all(|&v| v > 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation_lists_violations() {
        let c = SacConfig {
            gamma: 1.0,
            batch_size: 0,
            ..SacConfig::default()
        };
        match c.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }
}
