//! Discrete SAC losses and their analytic gradients.
//!
//! For agent `k` with twin critics and targets:
//!
//! ```text
//! y      = r + γ(1 − done) Σ_a π(a|s′) (min(Q̄1, Q̄2)(s′, a) − α ln π(a|s′))
//! L_Qi   = mean_b (Qi(s, a_k) − y)²
//! L_π    = mean_b Σ_a π(a|s) (α ln π(a|s) − min(Q1, Q2)(s, a))
//! ```
//!
//! The other agent is treated as part of the environment.

use crate::arena::{NUM_ACTIONS, NUM_WHITES, OBS_DIM};
use crate::error::{Error, Result};

use super::nn::{soft_update, Mlp, Optimizer, Tape};
use super::replay::Transition;
use super::{masked_softmax, AgentParams, PolicyParams};

/// Column-major view of a transition batch.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub len: usize,
    pub states: Vec<f64>,
    pub next_states: Vec<f64>,
    pub actions: Vec<[u8; NUM_WHITES]>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a, I>(items: I) -> Self
    where
        I: IntoIterator<Item = &'a Transition>,
    {
        let mut b = Batch::default();
        b.fill(items);
        b
    }

    pub fn fill<'a, I>(&mut self, items: I)
    where
        I: IntoIterator<Item = &'a Transition>,
    {
        self.states.clear();
        self.next_states.clear();
        self.actions.clear();
        self.rewards.clear();
        self.dones.clear();
        for t in items {
            self.states.extend_from_slice(&t.state);
            self.next_states.extend_from_slice(&t.next_state);
            self.actions.push(t.actions);
            self.rewards.push(t.reward);
            self.dones.push(t.done);
        }
        self.len = self.rewards.len();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub entropy: f64,
    pub mean_q: f64,
}

/// Reusable forward tapes, so the hot loop does not reallocate.
#[derive(Debug, Default)]
pub struct Scratch {
    a: Tape,
    b: Tape,
    c: Tape,
}

/// Soft Bellman targets `y` for one agent.
pub fn critic_targets(
    agent: &AgentParams,
    alpha: f64,
    gamma: f64,
    mask: &[bool; NUM_ACTIONS],
    batch: &Batch,
    scratch: &mut Scratch,
) -> Vec<f64> {
    let n = batch.len;
    agent
        .actor
        .forward_batch(&batch.next_states, n, &mut scratch.a);
    agent
        .target1
        .forward_batch(&batch.next_states, n, &mut scratch.b);
    agent
        .target2
        .forward_batch(&batch.next_states, n, &mut scratch.c);
    let logits = scratch.a.output();
    let q1 = scratch.b.output();
    let q2 = scratch.c.output();
    (0..n)
        .map(|i| {
            if batch.dones[i] {
                return batch.rewards[i];
            }
            let row = i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS;
            let (p, lp) = masked_softmax(&logits[row.clone()], mask);
            let mut v = 0.0;
            for a in 0..NUM_ACTIONS {
                if mask[a] {
                    v += p[a] * (q1[row.start + a].min(q2[row.start + a]) - alpha * lp[a]);
                }
            }
            batch.rewards[i] + gamma * v
        })
        .collect()
}

/// Mean squared TD error of `Q(s, a_agent)` against fixed targets. Gradients are
/// accumulated into `grads`; the full Q table of the batch is left in `tape`.
pub fn critic_loss_grad(
    critic: &Mlp,
    batch: &Batch,
    agent: usize,
    targets: &[f64],
    grads: &mut Mlp,
    tape: &mut Tape,
) -> f64 {
    let n = batch.len;
    critic.forward_batch(&batch.states, n, tape);
    let q = tape.output();
    let mut grad_out = vec![0.0; n * NUM_ACTIONS];
    let mut loss = 0.0;
    for i in 0..n {
        let idx = i * NUM_ACTIONS + batch.actions[i][agent] as usize;
        let err = q[idx] - targets[i];
        loss += err * err;
        grad_out[idx] = 2.0 * err / n as f64;
    }
    critic.backward(tape, &grad_out, grads);
    loss / n as f64
}

/// Expected-form actor loss for fixed `q_min` (`batch × actions`). Returns
/// `(loss, mean entropy)` and accumulates gradients into `grads`.
///
/// With `f_a = α ln π_a − Q_a`, the per-row gradient w.r.t. logit `j` is
/// `π_j (f_j − Σ_a π_a f_a)`; the entropy term's own logit dependence cancels.
#[allow(clippy::too_many_arguments)]
pub fn actor_loss_grad(
    actor: &Mlp,
    alpha: f64,
    mask: &[bool; NUM_ACTIONS],
    states: &[f64],
    n: usize,
    q_min: &[f64],
    grads: &mut Mlp,
    tape: &mut Tape,
) -> (f64, f64) {
    actor.forward_batch(states, n, tape);
    let logits = tape.output();
    let mut grad_out = vec![0.0; n * NUM_ACTIONS];
    let mut loss = 0.0;
    let mut ent = 0.0;
    for i in 0..n {
        let row = i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS;
        let (p, lp) = masked_softmax(&logits[row.clone()], mask);
        let mut f = [0.0; NUM_ACTIONS];
        let mut expected = 0.0;
        for a in 0..NUM_ACTIONS {
            if mask[a] {
                f[a] = alpha * lp[a] - q_min[row.start + a];
                expected += p[a] * f[a];
                ent -= p[a] * lp[a];
            }
        }
        loss += expected;
        for a in 0..NUM_ACTIONS {
            grad_out[row.start + a] = p[a] * (f[a] - expected) / n as f64;
        }
    }
    actor.backward(tape, &grad_out, grads);
    (loss / n as f64, ent / n as f64)
}

/// Optimizer state for every trainable network of a joint policy.
#[derive(Debug, Clone)]
pub struct SacLearner {
    // per agent: actor, critic1, critic2
    optimizers: Vec<[Optimizer; 3]>,
    scratch_grads: Vec<Mlp>,
}

impl SacLearner {
    pub fn new(params: &PolicyParams) -> Self {
        let cfg = &params.config;
        let opt =
            |net: &Mlp| Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.grad_clip_norm, net);
        let optimizers = params
            .agents
            .iter()
            .map(|a| [opt(&a.actor), opt(&a.critic1), opt(&a.critic2)])
            .collect();
        let sizes = params.agents[0].actor.sizes();
        Self {
            optimizers,
            scratch_grads: (0..3).map(|_| Mlp::zeros(&sizes)).collect(),
        }
    }

    /// One discrete-SAC gradient step for `agent` on `batch`, followed by a
    /// soft update of its target critics.
    pub fn update(
        &mut self,
        params: &mut PolicyParams,
        batch: &Batch,
        agent: usize,
        scratch: &mut Scratch,
    ) -> Result<LossReport> {
        if batch.len == 0 {
            return Err(Error::usage("sac update needs a nonempty batch"));
        }
        if agent >= params.agents.len() {
            return Err(Error::usage(format!("agent index {agent} out of range")));
        }
        debug_assert_eq!(batch.states.len(), batch.len * OBS_DIM);
        let mask = params.mask();
        let alpha = params.alpha;
        let gamma = params.config.gamma;
        let tau = params.config.tau;
        let n = batch.len;
        let ap = &mut params.agents[agent];

        let targets = critic_targets(ap, alpha, gamma, &mask, batch, scratch);

        let [g_actor, g1, g2] = &mut self.scratch_grads[..] else {
            unreachable!()
        };
        g1.fill(0.0);
        g2.fill(0.0);
        let l1 = critic_loss_grad(&ap.critic1, batch, agent, &targets, g1, &mut scratch.b);
        let l2 = critic_loss_grad(&ap.critic2, batch, agent, &targets, g2, &mut scratch.c);
        // pre-step critic values drive the actor step
        let q_min: Vec<f64> = scratch
            .b
            .output()
            .iter()
            .zip(scratch.c.output())
            .map(|(a, b)| a.min(*b))
            .collect();

        g_actor.fill(0.0);
        let (la, ent) = actor_loss_grad(
            &ap.actor,
            alpha,
            &mask,
            &batch.states,
            n,
            &q_min,
            g_actor,
            &mut scratch.a,
        );

        if !(l1.is_finite() && l2.is_finite() && la.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite loss for agent {agent}: critic1={l1} critic2={l2} actor={la} entropy={ent}"
            )));
        }
        let [o_actor, o1, o2] = &mut self.optimizers[agent];
        let n1 = o1.step(&mut ap.critic1, g1);
        let n2 = o2.step(&mut ap.critic2, g2);
        let na = o_actor.step(&mut ap.actor, g_actor);
        if !(n1.is_finite() && n2.is_finite() && na.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient norm for agent {agent}: critic1={n1} critic2={n2} actor={na}"
            )));
        }
        soft_update(&mut ap.target1, &ap.critic1, tau)?;
        soft_update(&mut ap.target2, &ap.critic2, tau)?;

        Ok(LossReport {
            critic1: l1,
            critic2: l2,
            actor: la,
            entropy: ent,
            mean_q: q_min.iter().sum::<f64>() / q_min.len() as f64,
        })
    }
}
