//! Effective configuration: command-line flags over a TOML file over defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tpnav::bench::IsplAveraging;
use tpnav::orchestrator::{EpisodeConfig, StepCounting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Averaging {
    WithinTask,
    Flat,
}

impl From<Averaging> for IsplAveraging {
    fn from(a: Averaging) -> Self {
        match a {
            Averaging::WithinTask => IsplAveraging::WithinTask,
            Averaging::Flat => IsplAveraging::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Counting {
    Primitive,
    Waypoints,
}

/// On-disk form. Every key is optional; `episode` mirrors `EpisodeConfig`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    backend: Option<BackendKind>,
    threads: Option<usize>,
    ispl_averaging: Option<Averaging>,
    episode: Option<Value>,
}

/// Flags shared by `run` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub ispl_averaging: Option<Averaging>,
    /// Base seed for perception noise.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps_dis: Option<f64>,
    #[arg(long)]
    pub len_max: Option<usize>,
    #[arg(long)]
    pub n_tolerance: Option<usize>,
    #[arg(long)]
    pub tau_obs: Option<f64>,
    #[arg(long)]
    pub slow_interval: Option<usize>,
    #[arg(long)]
    pub burst_len: Option<usize>,
    #[arg(long, value_enum)]
    pub step_counting: Option<Counting>,
    #[arg(long)]
    pub approach_margin: Option<f64>,
    #[arg(long)]
    pub frontier_goal_radius: Option<f64>,
    #[arg(long)]
    pub optimistic_unknown: Option<bool>,
    /// Turn the feedback corrector off.
    #[arg(long)]
    pub no_corrector: bool,
    /// Any episode field by dotted path, e.g. `noise.jitter=0.02`.
    /// Values parse as JSON, falling back to a string.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Effective {
    pub backend: BackendKind,
    pub threads: usize,
    pub ispl_averaging: IsplAveraging,
    pub episode: EpisodeConfig,
}

/// Overlay `from` onto `into`, rejecting keys `into` does not have.
fn merge(into: &mut Value, from: Value, at: &str) -> Result<()> {
    match (into, from) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                let slot = a.get_mut(&k).with_context(|| format!("unknown episode field {path}"))?;
                merge(slot, v, &path)?;
            }
        }
        (slot, v) => *slot = v,
    }
    Ok(())
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cur.as_object_mut().with_context(|| format!("{path}: {part} is not a table"))?;
        if i + 1 == parts.len() {
            if !map.contains_key(*part) {
                bail!("unknown episode field {path}");
            }
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map.get_mut(*part).with_context(|| format!("unknown episode field {path}"))?;
    }
    Ok(())
}

impl RunFlags {
    fn overrides(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("seed", self.seed.map(Value::from));
        put("eps_dis", self.eps_dis.map(Value::from));
        put("len_max", self.len_max.map(Value::from));
        put("n_tolerance", self.n_tolerance.map(Value::from));
        put("tau_obs", self.tau_obs.map(Value::from));
        put("slow_interval", self.slow_interval.map(Value::from));
        put("burst_len", self.burst_len.map(Value::from));
        put(
            "step_counting",
            self.step_counting.map(|c| {
                serde_json::to_value(match c {
                    Counting::Primitive => StepCounting::Primitive,
                    Counting::Waypoints => StepCounting::Waypoints,
                })
                .expect("enum serializes")
            }),
        );
        put("approach_margin", self.approach_margin.map(Value::from));
        put("frontier_goal_radius", self.frontier_goal_radius.map(Value::from));
        put("optimistic_unknown", self.optimistic_unknown.map(Value::from));
        if self.no_corrector {
            m.insert("corrector".into(), serde_json::json!({ "enabled": false }));
        }
        Value::Object(m)
    }

    pub fn resolve(&self) -> Result<Effective> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let mut episode = serde_json::to_value(EpisodeConfig::default()).expect("defaults serialize");
        if let Some(e) = file.episode {
            if !e.is_object() {
                bail!("[episode] must be a table");
            }
            merge(&mut episode, e, "")?;
        }
        merge(&mut episode, self.overrides(), "")?;
        for kv in &self.set {
            let (path, raw) = kv.split_once('=').with_context(|| format!("--set {kv}: expected PATH=VALUE"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut episode, path.trim(), value)?;
        }
        let episode: EpisodeConfig = serde_json::from_value(episode).context("episode configuration")?;
        episode.validate()?;
        Ok(Effective {
            backend: self.backend.or(file.backend).unwrap_or(BackendKind::Oracle),
            threads: self.threads.or(file.threads).unwrap_or(0),
            ispl_averaging: self.ispl_averaging.or(file.ispl_averaging).map_or(IsplAveraging::default(), Into::into),
            episode,
        })
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "threads = 2\n[episode]\nlen_max = 120\ntau_obs = 0.3\n[episode.corrector]\nenabled = false\n")
            .unwrap();
        let flags = RunFlags { config: Some(path), len_max: Some(80), ..Default::default() };
        let e = flags.resolve().unwrap();
        assert_eq!(e.episode.len_max, 80);
        assert_eq!(e.episode.tau_obs, 0.3);
        assert!(!e.episode.corrector.enabled);
        assert_eq!(e.episode.eps_dis, 1.5);
        assert_eq!(e.threads, 2);
        assert_eq!(e.backend, BackendKind::Oracle);
    }

    #[test]
    fn set_reaches_nested_fields() {
        let flags = RunFlags { set: vec!["noise.jitter=0.02".into(), "corrector.loop_window=8".into()], ..Default::default() };
        let e = flags.resolve().unwrap();
        assert_eq!(e.episode.corrector.loop_window, 8);
        assert_eq!(e.episode.noise.jitter, 0.02);
        let unknown = RunFlags { set: vec!["noise.nope=1".into()], ..Default::default() };
        assert!(unknown.resolve().is_err());
    }

    #[test]
    fn unknown_file_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "colour = \"red\"\n").unwrap();
        assert!(RunFlags { config: Some(path.clone()), ..Default::default() }.resolve().is_err());
        std::fs::write(&path, "[episode]\nlen_maxx = 3\n").unwrap();
        assert!(RunFlags { config: Some(path.clone()), ..Default::default() }.resolve().is_err());
        std::fs::write(&path, "[episode.corrector]\nenable = false\n").unwrap();
        assert!(RunFlags { config: Some(path), ..Default::default() }.resolve().is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunFlags { tau_obs: Some(-1.0), ..Default::default() }.resolve().is_err());
    }
}
