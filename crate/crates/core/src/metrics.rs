//! Policy and trajectory difference measures: MMD over moment-matched
//! action-agreement features, and discrete Fréchet distance between paths.

use serde::{Deserialize, Serialize};

use crate::arena::{ArenaConfig, NUM_WHITES};
use crate::diversity::KnownPolicy;
use crate::error::{Error, Result};
use crate::learner::{greedy_actions, PolicyParams, Transition};
use crate::rollout::greedy_logs;

/// Default demonstration window length for one feature vector.
pub const DEFAULT_CHUNK: usize = 32;

/// Binary agreement vector of one demonstration window, laid out t-major,
/// agent-minor: entry `t * K + k` is 1 iff the evaluated policy's greedy
/// action for agent `k` equals the stored reference action at step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementFeatures(pub Vec<f64>);

impl AgreementFeatures {
    pub fn disagreement_rate(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        1.0 - self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

pub fn agreement_features(
    chunk: &[Transition],
    chunk_len: usize,
    evaluated: &PolicyParams,
) -> Result<AgreementFeatures> {
    if chunk.len() < chunk_len {
        return Err(Error::usage(format!(
            "agreement window needs {chunk_len} transitions, got {}",
            chunk.len()
        )));
    }
    let mut out = Vec::with_capacity(chunk_len * NUM_WHITES);
    for t in &chunk[..chunk_len] {
        let greedy = greedy_actions(evaluated, &t.state)?;
        for k in 0..NUM_WHITES {
            out.push(if greedy[k] == t.actions[k] { 1.0 } else { 0.0 });
        }
    }
    Ok(AgreementFeatures(out))
}

/// Features for every complete, non-overlapping window of `demos`.
pub fn chunked_features(
    demos: &[Transition],
    chunk_len: usize,
    evaluated: &PolicyParams,
) -> Result<Vec<AgreementFeatures>> {
    if chunk_len == 0 {
        return Err(Error::usage("chunk length must be positive"));
    }
    demos
        .chunks_exact(chunk_len)
        .map(|c| agreement_features(c, chunk_len, evaluated))
        .collect()
}

pub fn gaussian_kernel(u: &[f64], v: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::usage(format!(
            "kernel bandwidth must be positive (got {sigma})"
        )));
    }
    if u.len() != v.len() {
        return Err(Error::usage(format!(
            "kernel inputs differ in length: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    Ok((-squared_distance(u, v) / (2.0 * sigma * sigma)).exp())
}

fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub mmd: f64,
    pub sigma: f64,
    pub samples_p: usize,
    pub samples_q: usize,
    pub disagreement_p: Vec<f64>,
    pub disagreement_q: Vec<f64>,
}

/// Median of pooled pairwise Euclidean distances; 1.0 when that median is 0.
pub fn median_bandwidth(samples: &[&[f64]]) -> f64 {
    let mut d = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            d.push(squared_distance(samples[i], samples[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Biased (V-statistic) MMD estimate with a Gaussian kernel:
/// `sqrt(max(0, mean k(x,x′) − 2 mean k(x,y) + mean k(y,y′)))`, diagonal terms included.
pub fn mmd(
    p: &[AgreementFeatures],
    q: &[AgreementFeatures],
    sigma: Option<f64>,
) -> Result<MmdReport> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::usage("mmd needs nonempty sample sets"));
    }
    let dim = p[0].0.len();
    if p.iter().chain(q).any(|f| f.0.len() != dim) {
        return Err(Error::usage("mmd samples differ in length"));
    }
    let sigma = match sigma {
        Some(s) => s,
        None => {
            let pooled: Vec<&[f64]> = p.iter().chain(q).map(|f| f.0.as_slice()).collect();
            median_bandwidth(&pooled)
        }
    };
    let mean_kernel = |a: &[AgreementFeatures], b: &[AgreementFeatures]| -> Result<f64> {
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += gaussian_kernel(&x.0, &y.0, sigma)?;
            }
        }
        Ok(s / (a.len() * b.len()) as f64)
    };
    let kxx = mean_kernel(p, p)?;
    let kyy = mean_kernel(q, q)?;
    let kxy = mean_kernel(p, q)?;
    let value = (kxx - 2.0 * kxy + kyy).max(0.0).sqrt();
    Ok(MmdReport {
        mmd: value,
        sigma,
        samples_p: p.len(),
        samples_q: q.len(),
        disagreement_p: p.iter().map(AgreementFeatures::disagreement_rate).collect(),
        disagreement_q: q.iter().map(AgreementFeatures::disagreement_rate).collect(),
    })
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Discrete Fréchet distance (Eiter–Mannila coupling recursion), filled row by row.
pub fn frechet_distance(p: &[[f64; 2]], q: &[[f64; 2]]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::usage("Fréchet distance of an empty trajectory"));
    }
    let m = q.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            let d = euclid(pi, qj);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub episodes: usize,
    pub seed: u64,
    pub chunk_len: usize,
    /// Fixed kernel bandwidth so MMD values of different policy pairs are comparable.
    /// `None` selects the median heuristic per call.
    pub sigma: Option<f64>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            episodes: 20,
            seed: 0,
            chunk_len: DEFAULT_CHUNK,
            sigma: Some(((DEFAULT_CHUNK * NUM_WHITES) as f64).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub format_version: u64,
    pub policy_a: String,
    pub policy_b: String,
    pub episodes: usize,
    pub seed: u64,
    /// Mean Fréchet distance per agent over seed-paired episodes.
    pub frechet_mean: [f64; NUM_WHITES],
    pub frechet_per_episode: Vec<[f64; NUM_WHITES]>,
    pub mmd: MmdReport,
    /// Fraction of `a`'s demonstration states where `b`'s greedy action differs, per agent.
    pub disagreement: [f64; NUM_WHITES],
    pub mean_disagreement: f64,
}

impl ComparisonReport {
    pub const FORMAT_VERSION: u64 = 1;

    pub fn csv_header() -> &'static str {
        "policy_a,policy_b,agent,frechet_mean,mmd,sigma,disagreement"
    }

    /// One row per agent (agents numbered from 1).
    pub fn csv_rows(&self) -> Vec<String> {
        (0..NUM_WHITES)
            .map(|k| {
                format!(
                    "{},{},{},{},{},{},{}",
                    self.policy_a,
                    self.policy_b,
                    k + 1,
                    self.frechet_mean[k],
                    self.mmd.mmd,
                    self.mmd.sigma,
                    self.disagreement[k]
                )
            })
            .collect()
    }
}

/// Per-agent rate at which `params`' greedy actions differ from the stored
/// actions of `demos`.
pub fn disagreement_rates(
    params: &PolicyParams,
    demos: &[Transition],
) -> Result<[f64; NUM_WHITES]> {
    let mut diff = [0usize; NUM_WHITES];
    for t in demos {
        let g = greedy_actions(params, &t.state)?;
        for k in 0..NUM_WHITES {
            if g[k] != t.actions[k] {
                diff[k] += 1;
            }
        }
    }
    let n = demos.len().max(1) as f64;
    Ok(diff.map(|d| d as f64 / n))
}

/// Rolls both policies out greedily from identical episode seeds and compares
/// their per-agent paths, plus action-level MMD on `a`'s demonstrations.
pub fn compare_policies(
    a: &KnownPolicy,
    b: &KnownPolicy,
    arena: &ArenaConfig,
    options: &CompareOptions,
) -> Result<ComparisonReport> {
    let logs_a = greedy_logs(&a.params, arena, options.episodes, options.seed)?;
    let logs_b = greedy_logs(&b.params, arena, options.episodes, options.seed)?;
    let mut per_episode = Vec::with_capacity(options.episodes);
    for (la, lb) in logs_a.iter().zip(&logs_b) {
        let mut row = [0.0; NUM_WHITES];
        for (k, v) in row.iter_mut().enumerate() {
            *v = frechet_distance(&la.agent_path(k), &lb.agent_path(k))?;
        }
        per_episode.push(row);
    }
    let n = per_episode.len().max(1) as f64;
    let mut frechet_mean = [0.0; NUM_WHITES];
    for row in &per_episode {
        for k in 0..NUM_WHITES {
            frechet_mean[k] += row[k] / n;
        }
    }

    let demos = &a.demonstrations;
    let chunk = options.chunk_len.min(demos.len()).max(1);
    let reference = chunked_features(demos, chunk, &a.params)?;
    let evaluated = chunked_features(demos, chunk, &b.params)?;
    let mmd = mmd(&reference, &evaluated, options.sigma)?;
    let disagreement = disagreement_rates(&b.params, demos)?;
    Ok(ComparisonReport {
        format_version: ComparisonReport::FORMAT_VERSION,
        policy_a: a.id.clone(),
        policy_b: b.id.clone(),
        episodes: options.episodes,
        seed: options.seed,
        frechet_mean,
        frechet_per_episode: per_episode,
        mmd,
        disagreement,
        mean_disagreement: disagreement.iter().sum::<f64>() / NUM_WHITES as f64,
    })
}
