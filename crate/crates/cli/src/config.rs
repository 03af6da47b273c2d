//! Sweep configuration files (TOML or JSON) and their merge with flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nsmpi::harness::{MdpSource, SweepConfig};
use nsmpi::{FiniteMdp, MParameter};
use serde::Deserialize;

/// An `m` grid entry: an integer or a token such as `"inf"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MEntry {
    Count(usize),
    Token(String),
}

impl MEntry {
    fn resolve(&self) -> Result<MParameter> {
        match self {
            MEntry::Count(m) => Ok(MParameter::Finite(*m)),
            MEntry::Token(t) => t.parse().map_err(|e| anyhow::anyhow!("{e}")),
        }
    }
}

/// Every field is optional; anything missing falls back to the dynamic
/// location defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub source: Option<String>,
    pub n: Option<usize>,
    pub mdp: Option<PathBuf>,
    pub states: Option<usize>,
    pub actions: Option<usize>,
    pub branching: Option<usize>,
    pub sparsity: Option<f64>,
    pub garnet_seed: Option<u64>,
    pub ells: Option<Vec<usize>>,
    pub ms: Option<Vec<MEntry>>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub iterations: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub timing: Option<bool>,
    pub out: Option<PathBuf>,
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        Ok(parsed)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: SweepFile) -> SweepFile {
        SweepFile {
            source: over.source.or(self.source),
            n: over.n.or(self.n),
            mdp: over.mdp.or(self.mdp),
            states: over.states.or(self.states),
            actions: over.actions.or(self.actions),
            branching: over.branching.or(self.branching),
            sparsity: over.sparsity.or(self.sparsity),
            garnet_seed: over.garnet_seed.or(self.garnet_seed),
            ells: over.ells.or(self.ells),
            ms: over.ms.or(self.ms),
            epsilon: over.epsilon.or(self.epsilon),
            gamma: over.gamma.or(self.gamma),
            iterations: over.iterations.or(self.iterations),
            runs: over.runs.or(self.runs),
            seed: over.seed.or(self.seed),
            budget: over.budget.or(self.budget),
            timing: over.timing.or(self.timing),
            out: over.out.or(self.out),
        }
    }

    pub fn resolve(&self) -> Result<SweepConfig> {
        let defaults = SweepConfig::dynloc_default();
        let source = match self.source.as_deref().unwrap_or("dynloc") {
            "dynloc" => MdpSource::Dynloc { n: self.n.unwrap_or(8) },
            "tight" => MdpSource::Tight,
            "garnet" => MdpSource::Garnet {
                num_states: self.states.unwrap_or(20),
                num_actions: self.actions.unwrap_or(4),
                branching: self.branching.unwrap_or(3),
                reward_sparsity: self.sparsity.unwrap_or(0.0),
                seed: self.garnet_seed.unwrap_or(0),
            },
            "file" => {
                let Some(path) = &self.mdp else {
                    bail!("source \"file\" needs an MDP path");
                };
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                MdpSource::Loaded(FiniteMdp::from_json(&text).with_context(|| format!("parsing {}", path.display()))?)
            }
            other => bail!("unknown source {other:?} (expected dynloc, tight, garnet or file)"),
        };
        let ms = match &self.ms {
            Some(entries) => entries.iter().map(MEntry::resolve).collect::<Result<Vec<_>>>()?,
            None => defaults.ms.clone(),
        };
        let gamma = match (&source, self.gamma) {
            (MdpSource::Loaded(mdp), None) => mdp.discount(),
            (_, g) => g.unwrap_or(defaults.gamma),
        };
        let config = SweepConfig {
            source,
            ells: self.ells.clone().unwrap_or(defaults.ells),
            ms,
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            gamma,
            iterations: self.iterations.unwrap_or(defaults.iterations),
            runs: self.runs.unwrap_or(defaults.runs),
            base_seed: self.seed.unwrap_or(defaults.base_seed),
            fixed_budget: self.budget,
            timing: self.timing.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }
}
