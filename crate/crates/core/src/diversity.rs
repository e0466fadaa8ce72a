//! Penalty relabeling of known-policy transitions and the iterative
//! multi-policy generation loop built on it.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{ArenaConfig, Outcome, NUM_WHITES};
use crate::error::{Error, Result};
use crate::learner::train::{train_with_hook, StepHook};
use crate::learner::{
    act, ActMode, PolicyParams, ReplayBuffer, SacConfig, Skill, TrainingCurve, Transition,
};
use crate::metrics::disagreement_rates;
use crate::rollout::{evaluate, run_episode, EvalReport};
use crate::seed::{derive_seed, derive_seed_indexed};
use crate::store::{ExperimentConfig, PolicyMetadata, Registry};

/// Set of agents forced to differ from known policies. Stored 0-based,
/// serialized as 1-based agent numbers (`[1]`, `[1, 2]`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AgentSelection(BTreeSet<usize>);

impl AgentSelection {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        Self((0..NUM_WHITES).collect())
    }

    /// From 0-based indices.
    pub fn new(indices: &[usize]) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|&&k| k >= NUM_WHITES) {
            return Err(Error::usage(format!(
                "agent index {bad} outside 0..{NUM_WHITES}"
            )));
        }
        Ok(Self(indices.iter().copied().collect()))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.0.contains(&agent)
    }

    /// 0-based indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn numbers(&self) -> Vec<usize> {
        self.iter().map(|k| k + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for AgentSelection {
    type Error = String;

    fn try_from(numbers: Vec<usize>) -> std::result::Result<Self, String> {
        let mut set = BTreeSet::new();
        for n in numbers {
            if n == 0 || n > NUM_WHITES {
                return Err(format!("agent number {n} outside 1..={NUM_WHITES}"));
            }
            set.insert(n - 1);
        }
        Ok(Self(set))
    }
}

impl From<AgentSelection> for Vec<usize> {
    fn from(s: AgentSelection) -> Self {
        s.numbers()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    /// Subtracted from a known transition's reward when the new policy matches it.
    pub penalty: f64,
    /// Demonstration transitions drawn from each known policy per round.
    pub relabel_batch_size: usize,
    /// Fresh environment steps per relabeling round.
    pub round_env_steps: usize,
    /// Upper bound on relabeled / (relabeled + fresh) transitions inserted per round.
    pub mixing_ratio: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            relabel_batch_size: 128,
            round_env_steps: 256,
            mixing_ratio: 0.5,
        }
    }
}

impl PenaltyConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            v.push(format!(
                "penalty.penalty must be finite and >= 0 (got {})",
                self.penalty
            ));
        }
        if self.relabel_batch_size == 0 {
            v.push("penalty.relabel_batch_size must be positive".into());
        }
        if self.round_env_steps == 0 {
            v.push("penalty.round_env_steps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mixing_ratio) {
            v.push(format!(
                "penalty.mixing_ratio must lie in [0, 1] (got {})",
                self.mixing_ratio
            ));
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

    /// Most relabeled transitions that may join `fresh` fresh ones.
    pub fn relabel_cap(&self, fresh: usize) -> usize {
        if self.mixing_ratio >= 1.0 {
            usize::MAX
        } else {
            (self.mixing_ratio * fresh as f64 / (1.0 - self.mixing_ratio)).floor() as usize
        }
    }
}

/// One policy to train: which agents must differ, from which known policies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleEntry {
    /// Policy id; defaults to `pi<n>` with `n` the 1-based schedule position.
    pub id: Option<String>,
    pub agents: AgentSelection,
    pub known: Vec<String>,
    pub skill: Skill,
    /// Training seed; defaults to one derived from the run seed and position.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiversitySchedule(pub Vec<ScheduleEntry>);

impl DiversitySchedule {
    pub fn ids(&self) -> Vec<String> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, e)| e.id.clone().unwrap_or_else(|| format!("pi{}", i + 1)))
            .collect()
    }

    pub fn entry_seed(&self, index: usize, run_seed: u64) -> u64 {
        self.0[index]
            .seed
            .unwrap_or_else(|| derive_seed_indexed(run_seed, "schedule", index as u64))
    }

    /// Checks references in order; `available` lists policies that already exist
    /// outside the schedule (e.g. a registered baseline).
    pub fn violations(&self, available: &[String]) -> Vec<String> {
        let mut v = Vec::new();
        if self.0.is_empty() {
            v.push("schedule must contain at least one entry".into());
        }
        let mut seen: BTreeSet<String> = available.iter().cloned().collect();
        let mut own = BTreeSet::new();
        for (i, (entry, id)) in self.0.iter().zip(self.ids()).enumerate() {
            let n = i + 1;
            if id.is_empty()
                || !id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                v.push(format!(
                    "schedule[{n}] id {id:?} must be nonempty and use [A-Za-z0-9_-]"
                ));
            }
            if !own.insert(id.clone()) {
                v.push(format!("schedule[{n}] id {id:?} is used twice"));
            }
            if entry.agents.is_empty() != entry.known.is_empty() {
                v.push(format!(
                    "schedule[{n}] must list both agents and known policies, or neither"
                ));
            }
            for k in &entry.known {
                if !seen.contains(k) {
                    v.push(format!("schedule[{n}] references unknown policy id {k:?}"));
                }
            }
            seen.insert(id);
        }
        v
    }

    pub fn validate(&self, available: &[String]) -> Result<()> {
        let v = self.violations(available);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoProvenance {
    pub seed: u64,
    pub episodes: usize,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstrations {
    pub transitions: Vec<Transition>,
    pub provenance: DemoProvenance,
}

/// A trained joint policy together with the greedy demonstrations that
/// later policies are pushed away from.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownPolicy {
    pub id: String,
    pub params: PolicyParams,
    pub demonstrations: Vec<Transition>,
    pub provenance: DemoProvenance,
    pub report: Option<DiversityReport>,
}

fn demo_seed(seed: u64, episode: usize) -> u64 {
    derive_seed_indexed(seed, "demo-episode", episode as u64)
}

pub fn collect_demonstrations(
    params: &PolicyParams,
    arena: &ArenaConfig,
    episodes: usize,
    seed: u64,
) -> Result<Demonstrations> {
    if episodes == 0 {
        return Err(Error::usage("demonstrations need at least one episode"));
    }
    let mut transitions = Vec::new();
    let mut outcomes = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let ep = run_episode(params, arena, demo_seed(seed, i), None)?;
        transitions.extend(ep.transitions);
        outcomes.push(ep.log.outcome);
    }
    Ok(Demonstrations {
        transitions,
        provenance: DemoProvenance {
            seed,
            episodes,
            outcomes,
        },
    })
}

/// True when the greedy action of ANY selected agent equals the stored one.
pub fn matches_known(
    params: &PolicyParams,
    transition: &Transition,
    agents: &AgentSelection,
) -> Result<bool> {
    if agents.is_empty() {
        return Err(Error::usage("agent selection must be nonempty"));
    }
    for l in agents.iter() {
        if act(params, l, &transition.state, ActMode::Greedy)? == transition.actions[l] as usize {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Penalized copies of the matched transitions, in input order.
pub fn relabel_known_batch(
    params: &PolicyParams,
    batch: &[Transition],
    agents: &AgentSelection,
    penalty: &PenaltyConfig,
) -> Result<Vec<Transition>> {
    if !(penalty.penalty.is_finite() && penalty.penalty >= 0.0) {
        return Err(Error::usage(format!(
            "penalty must be finite and >= 0 (got {})",
            penalty.penalty
        )));
    }
    let mut out = Vec::new();
    for t in batch {
        if matches_known(params, t, agents)? {
            out.push(Transition {
                reward: t.reward - penalty.penalty,
                ..t.clone()
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelabelCounters {
    pub fresh: u64,
    pub rounds: u64,
    /// Demonstration transitions examined.
    pub examined: u64,
    /// Examined transitions the current policy matched.
    pub matched: u64,
    /// Penalized transitions actually inserted (after the mixing cap).
    pub inserted: u64,
    /// Largest inserted / (inserted + fresh) fraction of any round.
    pub max_round_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownDisagreement {
    pub known: String,
    /// Greedy disagreement rate on the known policy's demonstration states, per agent.
    pub per_agent: [f64; NUM_WHITES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub agents: AgentSelection,
    pub skill: Skill,
    pub seed: u64,
    pub env_steps: u64,
    pub disagreement: Vec<KnownDisagreement>,
    pub eval: EvalReport,
    pub counters: RelabelCounters,
    pub curve: TrainingCurve,
}

impl DiversityReport {
    /// Worst (lowest) disagreement of `agent` over all known policies.
    pub fn min_disagreement(&self, agent: usize) -> Option<f64> {
        self.disagreement
            .iter()
            .map(|d| d.per_agent[agent])
            .reduce(f64::min)
    }
}

struct RelabelHook<'a> {
    known: &'a [KnownPolicy],
    agents: &'a AgentSelection,
    penalty: &'a PenaltyConfig,
    rng: ChaCha8Rng,
    round_fresh: usize,
    counters: RelabelCounters,
}

impl StepHook for RelabelHook<'_> {
    fn after_env_step(
        &mut self,
        steps_done: u64,
        params: &PolicyParams,
        replay: &mut ReplayBuffer,
    ) -> Result<()> {
        self.counters.fresh += 1;
        self.round_fresh += 1;
        if self.agents.is_empty() || steps_done % self.penalty.round_env_steps as u64 != 0 {
            return Ok(());
        }
        let cap = self.penalty.relabel_cap(self.round_fresh);
        let mut inserted = 0usize;
        for m in self.known {
            let batch: Vec<Transition> = (0..self.penalty.relabel_batch_size)
                .map(|_| m.demonstrations[self.rng.gen_range(0..m.demonstrations.len())].clone())
                .collect();
            let relabeled = relabel_known_batch(params, &batch, self.agents, self.penalty)?;
            self.counters.examined += batch.len() as u64;
            self.counters.matched += relabeled.len() as u64;
            for t in relabeled {
                if inserted >= cap {
                    break;
                }
                replay.push(t);
                inserted += 1;
            }
        }
        let fraction = inserted as f64 / (inserted + self.round_fresh) as f64;
        self.counters.max_round_fraction = self.counters.max_round_fraction.max(fraction);
        self.counters.inserted += inserted as u64;
        self.counters.rounds += 1;
        self.round_fresh = 0;
        Ok(())
    }
}

/// Everything one diversity training run needs.
#[derive(Debug, Clone)]
pub struct DiversityJob<'a> {
    pub known: &'a [KnownPolicy],
    pub agents: AgentSelection,
    pub penalty: &'a PenaltyConfig,
    pub sac: &'a SacConfig,
    pub arena: &'a ArenaConfig,
    pub skill: Skill,
    pub seed: u64,
    pub env_steps: u64,
    pub eval_episodes: usize,
}

/// Trains a new joint policy on fresh rollouts mixed with penalized copies of
/// known transitions it would reproduce.
pub fn train_diverse_policy(job: &DiversityJob<'_>) -> Result<(PolicyParams, DiversityReport)> {
    if job.agents.is_empty() && !job.known.is_empty() {
        return Err(Error::config(
            "known policies given without an agent selection",
        ));
    }
    if let Some(m) = job.known.iter().find(|m| m.demonstrations.is_empty()) {
        return Err(Error::config(format!(
            "known policy {:?} has no demonstrations",
            m.id
        )));
    }
    job.penalty.validate()?;
    let mut hook = RelabelHook {
        known: job.known,
        agents: &job.agents,
        penalty: job.penalty,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(job.seed, "relabel")),
        round_fresh: 0,
        counters: RelabelCounters::default(),
    };
    let (params, curve) = train_with_hook(
        job.sac,
        job.arena,
        job.skill,
        job.seed,
        job.env_steps,
        &mut hook,
    )?;
    let disagreement = job
        .known
        .iter()
        .map(|m| {
            Ok(KnownDisagreement {
                known: m.id.clone(),
                per_agent: disagreement_rates(&params, &m.demonstrations)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eval = evaluate(
        &params,
        job.arena,
        job.eval_episodes,
        derive_seed(job.seed, "eval"),
    )?;
    log::info!(
        "trained policy seed {} agents {:?}: eval win rate {:.2}, disagreement {:?}",
        job.seed,
        job.agents.numbers(),
        eval.win_rate,
        disagreement.iter().map(|d| d.per_agent).collect::<Vec<_>>()
    );
    let report = DiversityReport {
        agents: job.agents.clone(),
        skill: job.skill,
        seed: job.seed,
        env_steps: job.env_steps,
        disagreement,
        eval,
        counters: hook.counters,
        curve,
    };
    Ok((params, report))
}

/// Runs the schedule in order. Policies already present in `registry` under
/// the same id and metadata are loaded instead of retrained; new ones are
/// saved as soon as they finish.
pub fn run_mmpd(
    schedule: &DiversitySchedule,
    config: &ExperimentConfig,
    seed: u64,
    mut registry: Option<&mut Registry>,
) -> Result<Vec<KnownPolicy>> {
    let available: Vec<String> = registry.as_deref().map(|r| r.ids()).unwrap_or_default();
    let ids = schedule.ids();
    let external: Vec<String> = available
        .iter()
        .filter(|a| !ids.contains(a))
        .cloned()
        .collect();
    schedule.validate(&external)?;
    config.validate()?;

    let mut pool: BTreeMap<String, KnownPolicy> = BTreeMap::new();
    let mut out = Vec::with_capacity(schedule.0.len());
    for (i, (entry, id)) in schedule.0.iter().zip(ids).enumerate() {
        let entry_seed = schedule.entry_seed(i, seed);
        let meta = PolicyMetadata {
            seed: entry_seed,
            entry: entry.clone(),
            env_steps: config.train_steps,
            config_hash: config.hash(),
        };
        if let Some(reg) = registry.as_deref() {
            if reg.contains(&id) {
                let existing = reg.metadata(&id)?;
                if existing != meta {
                    return Err(Error::config(format!(
                        "registry already holds a different policy {id:?}; remove it or choose another id"
                    )));
                }
                log::info!("policy {id} already trained, loading");
                let policy = reg.load_policy(&id)?;
                pool.insert(id, policy.clone());
                out.push(policy);
                continue;
            }
        }
        let mut known = Vec::with_capacity(entry.known.len());
        for k in &entry.known {
            match pool.get(k) {
                Some(p) => known.push(p.clone()),
                None => {
                    let reg = registry
                        .as_deref()
                        .ok_or_else(|| Error::config(format!("unknown policy id {k:?}")))?;
                    let p = reg.load_policy(k)?;
                    pool.insert(k.clone(), p.clone());
                    known.push(p);
                }
            }
        }
        log::info!("training policy {id} ({}/{})", i + 1, schedule.0.len());
        let (params, report) = train_diverse_policy(&DiversityJob {
            known: &known,
            agents: entry.agents.clone(),
            penalty: &config.penalty,
            sac: &config.sac,
            arena: &config.arena,
            skill: entry.skill,
            seed: entry_seed,
            env_steps: config.train_steps,
            eval_episodes: config.eval_episodes,
        })?;
        let demos = collect_demonstrations(
            &params,
            &config.arena,
            config.demo_episodes,
            derive_seed(entry_seed, "demo"),
        )?;
        let policy = KnownPolicy {
            id: id.clone(),
            params,
            demonstrations: demos.transitions,
            provenance: demos.provenance,
            report: Some(report),
        };
        if let Some(reg) = registry.as_deref_mut() {
            reg.save_policy(&policy, &meta)?;
        }
        pool.insert(id, policy.clone());
        out.push(policy);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::OBS_DIM;
    use crate::learner::greedy_actions;
    use proptest::prelude::*;

    fn params() -> PolicyParams {
        PolicyParams::new(
            &SacConfig {
                hidden_sizes: vec![8],
                ..SacConfig::default()
            },
            Skill::Any,
            4,
        )
    }

    fn transition(state: [f64; OBS_DIM], actions: [u8; 2], reward: f64) -> Transition {
        Transition {
            state,
            actions,
            reward,
            next_state: state,
            done: false,
        }
    }

    fn other(a: u8) -> u8 {
        (a + 1) % 7
    }

    #[test]
    fn selection_serializes_one_based() {
        let s = AgentSelection::new(&[0]).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1]");
        let back: AgentSelection = serde_json::from_str("[2,1]").unwrap();
        assert_eq!(back, AgentSelection::all());
        assert!(serde_json::from_str::<AgentSelection>("[3]").is_err());
        assert!(AgentSelection::new(&[2]).is_err());
    }

    #[test]
    fn match_rule_penalizes_any_selected_match() {
        let p = params();
        let s = [0.3; OBS_DIM];
        let g = greedy_actions(&p, &s).unwrap();
        let one = AgentSelection::new(&[0]).unwrap();
        let both = AgentSelection::all();
        assert!(matches_known(&p, &transition(s, g, 0.0), &one).unwrap());
        assert!(!matches_known(&p, &transition(s, [other(g[0]), g[1]], 0.0), &one).unwrap());
        assert!(matches_known(&p, &transition(s, [other(g[0]), g[1]], 0.0), &both).unwrap());
        assert!(
            !matches_known(&p, &transition(s, [other(g[0]), other(g[1])], 0.0), &both).unwrap()
        );
        assert!(matches!(
            matches_known(&p, &transition(s, g, 0.0), &AgentSelection::none()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn relabel_example() {
        let p = params();
        let one = AgentSelection::new(&[0]).unwrap();
        let states = [[0.1; OBS_DIM], [0.5; OBS_DIM], [0.9; OBS_DIM]];
        let g: Vec<_> = states
            .iter()
            .map(|s| greedy_actions(&p, s).unwrap())
            .collect();
        let batch = vec![
            transition(states[0], g[0], 1.0),
            transition(states[1], [other(g[1][0]), g[1][1]], 0.0),
            transition(states[2], g[2], -0.5),
        ];
        let out = relabel_known_batch(&p, &batch, &one, &PenaltyConfig::default()).unwrap();
        assert_eq!(
            out.iter().map(|t| t.reward).collect::<Vec<_>>(),
            vec![0.0, -1.5]
        );
        assert_eq!(out[0].state, states[0]);
        assert_eq!(out[1].actions, g[2]);

        let zero = PenaltyConfig {
            penalty: 0.0,
            ..PenaltyConfig::default()
        };
        let out = relabel_known_batch(&p, &batch, &one, &zero).unwrap();
        assert_eq!(out, vec![batch[0].clone(), batch[2].clone()]);

        let none = relabel_known_batch(&p, &batch[1..2], &one, &PenaltyConfig::default()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn self_match_on_own_demonstrations() {
        let p = params();
        let demos = collect_demonstrations(&p, &ArenaConfig::default(), 2, 9).unwrap();
        assert_eq!(demos.provenance.outcomes.len(), 2);
        assert!(demos.transitions.len() <= 2 * 240);
        for t in &demos.transitions {
            assert!(matches_known(&p, t, &AgentSelection::all()).unwrap());
            assert!(t.reward.is_finite());
        }
        assert_eq!(
            demos,
            collect_demonstrations(&p, &ArenaConfig::default(), 2, 9).unwrap()
        );
    }

    #[test]
    fn schedule_validation() {
        let full: DiversitySchedule = serde_json::from_str(
            r#"[{"id":"base"},{"id":"l1","agents":[1],"known":["base"]},{"id":"l2","agents":[1,2],"known":["base"]}]"#,
        )
        .unwrap();
        assert!(full.validate(&[]).is_ok());
        let bad: DiversitySchedule =
            serde_json::from_str(r#"[{},{"agents":[1],"known":["nope"]}]"#).unwrap();
        let v = bad.violations(&[]);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("nope"));
        assert!(bad.validate(&["nope".into()]).is_ok());
        assert_eq!(bad.ids(), vec!["pi1", "pi2"]);
        let dup: DiversitySchedule = serde_json::from_str(r#"[{"id":"a"},{"id":"a"}]"#).unwrap();
        assert!(dup.validate(&[]).is_err());
        assert!(DiversitySchedule::default().validate(&[]).is_err());
    }

    #[test]
    fn relabel_cap_respects_ratio() {
        let p = PenaltyConfig::default();
        assert_eq!(p.relabel_cap(256), 256);
        let third = PenaltyConfig {
            mixing_ratio: 0.25,
            ..p.clone()
        };
        assert_eq!(third.relabel_cap(256), 85);
        let zero = PenaltyConfig {
            mixing_ratio: 0.0,
            ..p
        };
        assert_eq!(zero.relabel_cap(256), 0);
    }

    proptest! {
        #[test]
        fn relabel_only_lowers_rewards(
            rewards in prop::collection::vec(-3.0f64..3.0, 1..20),
            flips in prop::collection::vec(any::<bool>(), 20),
            penalty in 0.0f64..4.0,
        ) {
            let p = params();
            let sel = AgentSelection::new(&[0]).unwrap();
            let batch: Vec<Transition> = rewards.iter().enumerate().map(|(i, &r)| {
                let s = [i as f64 / 20.0; OBS_DIM];
                let g = greedy_actions(&p, &s).unwrap();
                let a = if flips[i] { [other(g[0]), g[1]] } else { g };
                Transition { state: s, actions: a, reward: r, next_state: [0.5; OBS_DIM], done: i % 3 == 0 }
            }).collect();
            let cfg = PenaltyConfig { penalty, ..PenaltyConfig::default() };
            let out = relabel_known_batch(&p, &batch, &sel, &cfg).unwrap();
            let kept: Vec<&Transition> = batch.iter().enumerate().filter(|(i, _)| !flips[*i]).map(|(_, t)| t).collect();
            prop_assert_eq!(out.len(), kept.len());
            for (o, t) in out.iter().zip(kept) {
                prop_assert_eq!(o.state, t.state);
                prop_assert_eq!(o.actions, t.actions);
                prop_assert_eq!(o.next_state, t.next_state);
                prop_assert_eq!(o.done, t.done);
                prop_assert_eq!(o.reward, t.reward - penalty);
            }
        }
    }
}
