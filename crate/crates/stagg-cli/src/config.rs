//! Run configuration: one TOML tree covering the dataset, graph, model,
//! experiment grid, solver limits, and output location. Every run records
//! the resolved configuration verbatim next to its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use stagg_core::autoencoder::{Activation, ArchitectureConfig, BlockKind, LossWeights};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub affinity: AffinitySection,
    #[serde(default)]
    pub architecture: ArchitectureSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub experiments: ExperimentsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Instance directory (CSV tables + manifest.json).
    pub instance: String,
    /// Time-series dataset manifest (TOML).
    pub manifest: String,
    /// Aggregation periods per day; defaults to the coarsest class
    /// resolution.
    #[serde(default)]
    pub aggregation_resolution: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinitySection {
    /// "auto" or a positive number.
    #[serde(default = "default_sigma")]
    pub sigma: toml::Value,
    #[serde(default = "default_metric")]
    pub metric: String,
}

fn default_sigma() -> toml::Value {
    toml::Value::String("auto".into())
}

fn default_metric() -> String {
    "euclidean".into()
}

impl Default for AffinitySection {
    fn default() -> Self {
        AffinitySection {
            sigma: default_sigma(),
            metric: default_metric(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    /// Pooled group count |N'|.
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "default_pool_hidden")]
    pub pool_hidden: Vec<usize>,
    #[serde(default)]
    pub feature_hidden: Vec<usize>,
    #[serde(default = "default_block")]
    pub feature_block: String,
    #[serde(default)]
    pub decoder_hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: String,
    #[serde(default = "default_one_hot")]
    pub one_hot: bool,
}

fn default_latent() -> usize {
    4
}
fn default_groups() -> usize {
    6
}
fn default_pool_hidden() -> Vec<usize> {
    vec![16]
}
fn default_block() -> String {
    "graphconv".into()
}
fn default_activation() -> String {
    "tanh".into()
}
fn default_one_hot() -> bool {
    true
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        ArchitectureSection {
            latent_dim: default_latent(),
            groups: default_groups(),
            pool_hidden: default_pool_hidden(),
            feature_hidden: vec![],
            feature_block: default_block(),
            decoder_hidden: vec![],
            activation: default_activation(),
            one_hot: default_one_hot(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_plateau_window")]
    pub plateau_window: usize,
    #[serde(default = "default_plateau_tol")]
    pub plateau_rel_tol: f64,
}

fn default_epochs() -> usize {
    500
}
fn default_lr() -> f64 {
    1e-3
}
fn default_plateau_window() -> usize {
    50
}
fn default_plateau_tol() -> f64 {
    1e-6
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            seed: 0,
            plateau_window: default_plateau_window(),
            plateau_rel_tol: default_plateau_tol(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    /// Reconstruction weight per node class; missing classes default to 1.
    #[serde(default)]
    pub class_alphas: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentsSection {
    #[serde(default = "default_spatial")]
    pub spatial: Vec<String>,
    #[serde(default = "default_temporal")]
    pub temporal: Vec<String>,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    #[serde(default = "default_pca_dim")]
    pub pca_dim: usize,
    /// (class, feature) pairs for the two latent-clustering feature sets.
    #[serde(default = "default_a1")]
    pub a1_features: Vec<(String, String)>,
    #[serde(default = "default_a2")]
    pub a2_features: Vec<(String, String)>,
    /// Whether the spatial vote is weighted by temporal cluster weights.
    #[serde(default)]
    pub weighted_vote: bool,
}

fn default_spatial() -> Vec<String> {
    ["label", "pl", "prl", "phl", "prhl"]
        .map(String::from)
        .to_vec()
}
fn default_temporal() -> Vec<String> {
    ["raw", "pca", "a1", "a2"].map(String::from).to_vec()
}
fn default_k_list() -> Vec<usize> {
    vec![5, 10, 20, 40]
}
fn default_pca_dim() -> usize {
    4
}
fn default_a1() -> Vec<(String, String)> {
    vec![("power".into(), "demand".into())]
}
fn default_a2() -> Vec<(String, String)> {
    vec![
        ("power".into(), "demand".into()),
        ("gas".into(), "demand".into()),
        ("power".into(), "cf".into()),
    ]
}

impl Default for ExperimentsSection {
    fn default() -> Self {
        ExperimentsSection {
            spatial: default_spatial(),
            temporal: default_temporal(),
            k_list: default_k_list(),
            pca_dim: default_pca_dim(),
            a1_features: default_a1(),
            a2_features: default_a2(),
            weighted_vote: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_iter_limit")]
    pub iter_limit: u64,
    #[serde(default = "default_node_limit")]
    pub node_limit: u64,
    #[serde(default = "default_time_limit")]
    pub time_limit_seconds: f64,
}

fn default_gap() -> f64 {
    0.01
}
fn default_iter_limit() -> u64 {
    1_000_000
}
fn default_node_limit() -> u64 {
    100_000
}
fn default_time_limit() -> f64 {
    300.0
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            gap: default_gap(),
            iter_limit: default_iter_limit(),
            node_limit: default_node_limit(),
            time_limit_seconds: default_time_limit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
        }
    }
}

/// Synthetic-instance generator parameters (used by `stagg synth`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_synth_power")]
    pub power_nodes: usize,
    #[serde(default = "default_synth_gas")]
    pub gas_nodes: usize,
    #[serde(default = "default_synth_days")]
    pub days: usize,
    #[serde(default = "default_synth_hpd")]
    pub hours_per_day: usize,
    #[serde(default = "default_synth_communities")]
    pub communities: usize,
    #[serde(default = "default_synth_archetypes")]
    pub archetypes: usize,
    #[serde(default = "default_synth_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub candidate_pipeline: bool,
}

fn default_synth_power() -> usize {
    6
}
fn default_synth_gas() -> usize {
    2
}
fn default_synth_days() -> usize {
    12
}
fn default_synth_hpd() -> usize {
    3
}
fn default_synth_communities() -> usize {
    2
}
fn default_synth_archetypes() -> usize {
    3
}
fn default_synth_noise() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            power_nodes: default_synth_power(),
            gas_nodes: default_synth_gas(),
            days: default_synth_days(),
            hours_per_day: default_synth_hpd(),
            communities: default_synth_communities(),
            archetypes: default_synth_archetypes(),
            noise: default_synth_noise(),
            seed: 0,
            candidate_pipeline: default_true(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("config {} does not validate", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.architecture.latent_dim == 0 || self.architecture.groups == 0 {
            bail!("architecture.latent_dim and architecture.groups must be positive");
        }
        match self.architecture.feature_block.as_str() {
            "graphconv" | "dense" => {}
            other => bail!("architecture.feature_block {:?} is not graphconv|dense", other),
        }
        match self.architecture.activation.as_str() {
            "relu" | "tanh" | "identity" => {}
            other => bail!("architecture.activation {:?} is not relu|tanh|identity", other),
        }
        match &self.affinity.sigma {
            toml::Value::String(s) if s == "auto" => {}
            toml::Value::Float(f) if *f > 0.0 => {}
            toml::Value::Integer(i) if *i > 0 => {}
            other => bail!("affinity.sigma must be \"auto\" or a positive number, got {:?}", other),
        }
        if self.affinity.metric != "euclidean" {
            bail!("affinity.metric {:?} is not supported (euclidean)", self.affinity.metric);
        }
        for spatial in &self.experiments.spatial {
            match spatial.as_str() {
                "label" | "identity" | "pl" | "prl" | "phl" | "prhl" => {}
                other => bail!("unknown spatial method {:?}", other),
            }
        }
        for temporal in &self.experiments.temporal {
            match temporal.as_str() {
                "raw" | "pca" | "a1" | "a2" | "identity" => {}
                other => bail!("unknown temporal method {:?}", other),
            }
        }
        if self.experiments.k_list.is_empty() {
            bail!("experiments.k_list must not be empty");
        }
        if !(0.0..1.0).contains(&self.solver.gap) {
            bail!("solver.gap must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn sigma(&self) -> stagg_core::graph::Sigma {
        match &self.affinity.sigma {
            toml::Value::Float(f) => stagg_core::graph::Sigma::Fixed(*f),
            toml::Value::Integer(i) => stagg_core::graph::Sigma::Fixed(*i as f64),
            _ => stagg_core::graph::Sigma::Auto,
        }
    }

    pub fn architecture_config(&self, seed: u64) -> ArchitectureConfig {
        ArchitectureConfig {
            latent_dim: self.architecture.latent_dim,
            groups: self.architecture.groups,
            pool_hidden: self.architecture.pool_hidden.clone(),
            feature_hidden: self.architecture.feature_hidden.clone(),
            feature_block: match self.architecture.feature_block.as_str() {
                "dense" => BlockKind::Dense,
                _ => BlockKind::GraphConv,
            },
            decoder_hidden: self.architecture.decoder_hidden.clone(),
            activation: match self.architecture.activation.as_str() {
                "relu" => Activation::Relu,
                "identity" => Activation::Identity,
                _ => Activation::Tanh,
            },
            epochs: self.training.epochs,
            learning_rate: self.training.learning_rate,
            seed,
            plateau_window: self.training.plateau_window,
            plateau_rel_tol: self.training.plateau_rel_tol,
        }
    }

    /// Expand a spatial preset name to its loss-weight triple.
    pub fn loss_weights(&self, preset: &str, classes: &[String]) -> Result<LossWeights> {
        let alphas: Vec<f64> = classes
            .iter()
            .map(|c| self.loss.class_alphas.get(c).copied().unwrap_or(1.0))
            .collect();
        let mut weights = match preset {
            "pl" => LossWeights::pl(classes.len()),
            "prl" => LossWeights::prl(classes.len()),
            "phl" => LossWeights::phl(classes.len()),
            "prhl" => LossWeights::prhl(classes.len()),
            other => bail!("preset {:?} has no loss weights", other),
        };
        weights.class_alphas = alphas;
        Ok(weights)
    }

    pub fn solver_options(&self) -> stagg_opt::branch_bound::SolverOptions {
        stagg_opt::branch_bound::SolverOptions {
            gap_tol: self.solver.gap,
            iter_limit: self.solver.iter_limit,
            node_limit: self.solver.node_limit,
            time_limit: Some(std::time::Duration::from_secs_f64(
                self.solver.time_limit_seconds,
            )),
        }
    }

    /// Resolve a path relative to the config file location.
    pub fn resolve(&self, config_dir: &Path, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            config_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let config: RunConfig = toml::from_str(
            r#"
[dataset]
instance = "instance"
manifest = "dataset/manifest.toml"
"#,
        )
        .unwrap();
        config.validate().unwrap();
        assert_eq!(config.experiments.k_list, vec![5, 10, 20, 40]);
        assert_eq!(config.solver.gap, 0.01);
        assert!(config.architecture.one_hot);
        let w = config.loss_weights("pl", &["power".into(), "gas".into()]).unwrap();
        assert_eq!((w.alpha_r, w.alpha_p, w.alpha_h), (0.0, 1.0, 0.0));
        let w = config.loss_weights("prhl", &["power".into()]).unwrap();
        assert_eq!((w.alpha_r, w.alpha_p, w.alpha_h), (1.0, 1.0, 1.0));
    }

    #[test]
    fn schema_violations_are_reported() {
        let bad: Result<RunConfig, _> = toml::from_str(
            r#"
[dataset]
instance = "i"
manifest = "m"
unknown_field = 3
"#,
        );
        assert!(bad.is_err());

        let config: RunConfig = toml::from_str(
            r#"
[dataset]
instance = "i"
manifest = "m"

[experiments]
spatial = ["bogus"]
"#,
        )
        .unwrap();
        assert!(config.validate().is_err());
    }
}
