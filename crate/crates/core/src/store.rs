//! On-disk formats: checkpoints, demonstrations, trajectory logs, the policy
//! registry and experiment configs. Everything is JSON or JSON Lines and
//! carries a `format_version`.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::{DeserializeOwned, IgnoredAny};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arena::ArenaConfig;
use crate::diversity::{
    DemoProvenance, DiversityReport, DiversitySchedule, KnownPolicy, PenaltyConfig, ScheduleEntry,
};
use crate::error::{Error, Result};
use crate::learner::{PolicyParams, SacConfig, Transition};
use crate::metrics::{CompareOptions, ComparisonReport};
use crate::rollout::TrajectoryLog;

pub const FORMAT_VERSION: u64 = 1;

pub const CONFIG_FILE: &str = "config.json";
pub const REGISTRY_FILE: &str = "registry.json";

/// Byte offset of a 1-based (line, column) position as reported by serde_json.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

fn parse_error(path: &Path, text: &str, base: usize, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: base + byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

#[derive(Deserialize)]
struct SyntaxProbe {
    #[allow(dead_code)]
    format_version: Option<IgnoredAny>,
}

/// Parses a versioned JSON document: syntax first, then the version, then the body,
/// so a wrong version never yields a partially loaded value.
fn parse_versioned<T: DeserializeOwned>(path: &Path, text: &str, base: usize) -> Result<T> {
    serde_json::from_str::<SyntaxProbe>(text).map_err(|e| parse_error(path, text, base, e))?;
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| parse_error(path, text, base, e))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: probe.format_version,
            supported: FORMAT_VERSION,
        });
    }
    serde_json::from_str(text).map_err(|e| parse_error(path, text, base, e))
}

/// Writes to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("in-memory values serialize")
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    format_version: u64,
    params: T,
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<()> {
    let doc = Checkpoint {
        format_version: FORMAT_VERSION,
        params,
    };
    write_atomic(path, to_json(&doc).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    let text = read_text(path)?;
    let doc: Checkpoint<PolicyParams> = parse_versioned(path, &text, 0)?;
    let v = doc.params.violations();
    if !v.is_empty() {
        return Err(Error::Config(
            v.into_iter()
                .map(|m| format!("{}: {m}", path.display()))
                .collect(),
        ));
    }
    Ok(doc.params)
}

fn line_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("in-memory values serialize");
    s.push('\n');
    s
}

/// Reads a JSON Lines file whose every nonempty line is a versioned record.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for line in BufReader::new(file).split(b'\n') {
        let raw = line.map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            offset: offset + e.utf8_error().valid_up_to(),
            message: "invalid UTF-8".into(),
        })?;
        if !text.trim().is_empty() {
            out.push(parse_versioned(path, &text, offset)?);
        }
        offset += text.len() + 1;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine<T> {
    format_version: u64,
    #[serde(flatten)]
    log: T,
}

/// Appends one episode as a single JSON line.
pub fn append_trajectory(log: &TrajectoryLog, path: &Path) -> Result<()> {
    append_trajectories(std::slice::from_ref(log), path)
}

/// Appends several episodes; an empty slice leaves the file untouched.
pub fn append_trajectories(logs: &[TrajectoryLog], path: &Path) -> Result<()> {
    if logs.is_empty() {
        return Ok(());
    }
    let mut buf = String::new();
    for log in logs {
        buf.push_str(&line_json(&TrajectoryLine {
            format_version: FORMAT_VERSION,
            log,
        }));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryLog>> {
    let lines: Vec<TrajectoryLine<TrajectoryLog>> = read_jsonl(path)?;
    Ok(lines.into_iter().map(|l| l.log).collect())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DemoLine<P, T> {
    Header {
        format_version: u64,
        id: String,
        provenance: P,
    },
    Transition {
        format_version: u64,
        #[serde(flatten)]
        transition: T,
    },
}

pub fn save_demonstrations(
    id: &str,
    provenance: &DemoProvenance,
    demos: &[Transition],
    path: &Path,
) -> Result<()> {
    let mut buf = line_json(&DemoLine::<_, &Transition>::Header {
        format_version: FORMAT_VERSION,
        id: id.to_string(),
        provenance,
    });
    for t in demos {
        buf.push_str(&line_json(&DemoLine::<&DemoProvenance, _>::Transition {
            format_version: FORMAT_VERSION,
            transition: t,
        }));
    }
    write_atomic(path, buf.as_bytes())
}

pub fn load_demonstrations(path: &Path) -> Result<(DemoProvenance, Vec<Transition>)> {
    let lines: Vec<DemoLine<DemoProvenance, Transition>> = read_jsonl(path)?;
    let mut iter = lines.into_iter();
    let provenance = match iter.next() {
        Some(DemoLine::Header { provenance, .. }) => provenance,
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                offset: 0,
                message: "missing demonstrations header line".into(),
            })
        }
    };
    let mut transitions = Vec::new();
    for line in iter {
        match line {
            DemoLine::Transition { transition, .. } if transition.is_valid() => {
                transitions.push(transition)
            }
            _ => {
                return Err(Error::config(format!(
                    "{}: invalid demonstration record {}",
                    path.display(),
                    transitions.len() + 1
                )))
            }
        }
    }
    Ok((provenance, transitions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetadata {
    pub seed: u64,
    pub entry: ScheduleEntry,
    pub env_steps: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub checkpoint: String,
    pub demonstrations: String,
    pub report: Option<String>,
    pub metadata: PolicyMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegistryIndex {
    format_version: u64,
    policies: BTreeMap<String, RegistryEntry>,
}

#[derive(Serialize, Deserialize)]
struct ReportDoc<T> {
    format_version: u64,
    report: T,
}

/// Index of trained policies inside one experiment directory.
#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
    index: RegistryIndex,
}

impl Registry {
    /// Opens (creating if needed) the experiment directory at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let path = root.join(REGISTRY_FILE);
        let index = if path.exists() {
            parse_versioned(&path, &read_text(&path)?, 0)?
        } else {
            RegistryIndex {
                format_version: FORMAT_VERSION,
                policies: BTreeMap::new(),
            }
        };
        Ok(Self { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ids(&self) -> Vec<String> {
        self.index.policies.keys().cloned().collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.policies.contains_key(id)
    }

    fn entry(&self, id: &str) -> Result<&RegistryEntry> {
        self.index.policies.get(id).ok_or_else(|| {
            Error::config(format!(
                "unknown policy id {id:?} in {} (known: {})",
                self.root.display(),
                self.ids().join(", ")
            ))
        })
    }

    pub fn metadata(&self, id: &str) -> Result<PolicyMetadata> {
        Ok(self.entry(id)?.metadata.clone())
    }

    pub fn trajectory_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.traj.jsonl"))
    }

    pub fn load_params(&self, id: &str) -> Result<PolicyParams> {
        load_checkpoint(&self.root.join(&self.entry(id)?.checkpoint))
    }

    pub fn load_report(&self, id: &str) -> Result<Option<DiversityReport>> {
        match &self.entry(id)?.report {
            None => Ok(None),
            Some(file) => {
                let path = self.root.join(file);
                let doc: ReportDoc<DiversityReport> =
                    parse_versioned(&path, &read_text(&path)?, 0)?;
                Ok(Some(doc.report))
            }
        }
    }

    pub fn load_policy(&self, id: &str) -> Result<KnownPolicy> {
        let entry = self.entry(id)?;
        let params = load_checkpoint(&self.root.join(&entry.checkpoint))?;
        let (provenance, demonstrations) =
            load_demonstrations(&self.root.join(&entry.demonstrations))?;
        if demonstrations.is_empty() {
            return Err(Error::config(format!(
                "policy {id:?} has an empty demonstration buffer"
            )));
        }
        Ok(KnownPolicy {
            id: id.to_string(),
            params,
            demonstrations,
            provenance,
            report: self.load_report(id)?,
        })
    }

    /// Writes the policy's files, then publishes it by rewriting the index.
    pub fn save_policy(&mut self, policy: &KnownPolicy, metadata: &PolicyMetadata) -> Result<()> {
        let id = &policy.id;
        let entry = RegistryEntry {
            checkpoint: format!("{id}.ckpt.json"),
            demonstrations: format!("{id}.demos.jsonl"),
            report: policy.report.as_ref().map(|_| format!("{id}.report.json")),
            metadata: metadata.clone(),
        };
        save_checkpoint(&policy.params, &self.root.join(&entry.checkpoint))?;
        save_demonstrations(
            id,
            &policy.provenance,
            &policy.demonstrations,
            &self.root.join(&entry.demonstrations),
        )?;
        if let (Some(report), Some(file)) = (&policy.report, &entry.report) {
            let doc = ReportDoc {
                format_version: FORMAT_VERSION,
                report,
            };
            write_atomic(&self.root.join(file), to_json(&doc).as_bytes())?;
        }
        let mut index = self.index.clone();
        index.policies.insert(id.clone(), entry);
        write_atomic(&self.root.join(REGISTRY_FILE), to_json(&index).as_bytes())?;
        self.index = index;
        Ok(())
    }

    /// Writes `compare/<a>__<b>.json` and `.csv`; returns both paths.
    pub fn save_comparison(&self, report: &ComparisonReport) -> Result<(PathBuf, PathBuf)> {
        let dir = self.root.join("compare");
        let stem = format!("{}__{}", report.policy_a, report.policy_b);
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        write_atomic(&json, to_json(report).as_bytes())?;
        let mut text = format!(
            "# format_version={FORMAT_VERSION}\n{}\n",
            ComparisonReport::csv_header()
        );
        for row in report.csv_rows() {
            text.push_str(&row);
            text.push('\n');
        }
        write_atomic(&csv, text.as_bytes())?;
        Ok((json, csv))
    }
}

/// Everything a run needs besides the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u64,
    pub arena: ArenaConfig,
    pub sac: SacConfig,
    pub penalty: PenaltyConfig,
    pub schedule: DiversitySchedule,
    /// Environment steps per trained policy.
    pub train_steps: u64,
    /// Greedy episodes recorded as demonstrations of each trained policy.
    pub demo_episodes: usize,
    pub eval_episodes: usize,
    pub compare: CompareOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            arena: ArenaConfig::default(),
            sac: SacConfig::default(),
            penalty: PenaltyConfig::default(),
            schedule: DiversitySchedule::default(),
            train_steps: 150_000,
            demo_episodes: 50,
            eval_episodes: 100,
            compare: CompareOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.format_version != FORMAT_VERSION {
            v.push(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        v.extend(self.arena.violations());
        v.extend(self.sac.violations());
        v.extend(self.penalty.violations());
        if !self.schedule.0.is_empty() {
            v.extend(self.schedule.violations(&[]));
        }
        if self.demo_episodes == 0 {
            v.push("demo_episodes must be positive".into());
        }
        if self.eval_episodes == 0 {
            v.push("eval_episodes must be positive".into());
        }
        if self.compare.episodes == 0 {
            v.push("compare.episodes must be positive".into());
        }
        if self.compare.chunk_len == 0 {
            v.push("compare.chunk_len must be positive".into());
        }
        if let Some(s) = self.compare.sigma {
            if !(s.is_finite() && s > 0.0) {
                v.push(format!("compare.sigma must be positive (got {s})"));
            }
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

    /// Short hash of the settings that influence training, used to key resumable runs.
    pub fn hash(&self) -> String {
        let training = (
            self.format_version,
            &self.arena,
            &self.sac,
            &self.penalty,
            self.train_steps,
            self.demo_episodes,
            self.eval_episodes,
        );
        let digest = Sha256::digest(serde_json::to_vec(&training).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Parses and validates an experiment config; missing keys take defaults,
/// unknown keys are rejected, and every violated invariant is reported.
pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = read_text(path)?;
    parse_experiment_config(path, &text)
}

pub fn parse_experiment_config(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = if text.trim().is_empty() {
        ExperimentConfig::default()
    } else {
        serde_json::from_str(text).map_err(|e| parse_error(path, text, 0, e))?
    };
    if cfg.format_version > FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: cfg.format_version,
            supported: FORMAT_VERSION,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::Skill;

    fn small() -> SacConfig {
        SacConfig {
            hidden_sizes: vec![5],
            ..SacConfig::default()
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        let mut p = PolicyParams::new(&small(), Skill::GunOnly, 3);
        p.agents[0].actor.layers[0].weights[0] = 0.1 + 0.2;
        p.agents[1].critic1.layers[1].biases[0] = -1.0e-300;
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        for (a, b) in p.agents.iter().zip(&q.agents) {
            for (x, y) in a.actor.params().zip(b.actor.params()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(p, q);
    }

    #[test]
    fn truncated_checkpoint_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        save_checkpoint(&PolicyParams::new(&small(), Skill::Any, 0), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, text.len() / 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn future_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        save_checkpoint(&PolicyParams::new(&small(), Skill::Any, 0), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replacen(
            "\"format_version\": 1",
            "\"format_version\": 2",
            1,
        );
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Version { found: 2, .. })
        ));
        assert!(matches!(
            load_checkpoint(&dir.path().join("none.json")),
            Err(Error::Missing(_))
        ));
    }

    #[test]
    fn byte_offsets_count_lines() {
        let text = "ab\ncde\nf";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 2), 4);
        assert_eq!(byte_offset(text, 3, 1), 7);
    }

    #[test]
    fn empty_config_is_default() {
        let cfg = parse_experiment_config(Path::new("c.json"), "{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(
            parse_experiment_config(Path::new("c.json"), "").unwrap(),
            cfg
        );
        let round: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn config_errors_are_aggregated() {
        let text =
            r#"{"arena":{"gun_range_m":-1},"sac":{"gamma":1.5},"penalty":{"mixing_ratio":2}}"#;
        match parse_experiment_config(Path::new("c.json"), text) {
            Err(Error::Config(v)) => {
                assert!(v.iter().any(|m| m.contains("gun_range_m")), "{v:?}");
                assert!(v.iter().any(|m| m.contains("gamma")), "{v:?}");
                assert!(v.iter().any(|m| m.contains("mixing_ratio")), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
        let typo = parse_experiment_config(Path::new("c.json"), r#"{"arena":{"gun_rnage_m":3}}"#);
        assert!(matches!(typo, Err(Error::Parse { .. })));
        let sched = r#"{"schedule":[{"id":"a"},{"agents":[1],"known":["b"]}]}"#;
        match parse_experiment_config(Path::new("c.json"), sched) {
            Err(Error::Config(v)) => assert!(v[0].contains("\"b\"")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.train_steps += 1;
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let mut c = a.clone();
        c.compare.episodes += 1;
        assert_eq!(a.hash(), c.hash());
    }
}
