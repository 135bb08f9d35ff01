//! Declarative pipeline configuration: one TOML file drives every stage.
//!
//! Relative paths are resolved against the directory containing the config
//! file, so a fixture directory is relocatable as a unit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use migration_core::corpus::CorpusConfig;
use migration_core::textscore::ToxicityMode;

use crate::UsageError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stage derives its randomness from this value.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory for all stage artifacts.
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    pub textscore: TextScoreSection,
    pub graphsim: GraphSimSection,
    #[serde(default)]
    pub econometrics: EconometricsSection,
    #[serde(default)]
    pub boost: BoostSection,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    /// Line-delimited JSON post files (mainstream and fringe records mixed).
    pub inputs: Vec<PathBuf>,
    /// Ban time, UTC seconds since epoch.
    pub ban_time: i64,
    pub focal_community: String,
    #[serde(default = "default_min_pre_ban_posts")]
    pub min_pre_ban_posts: u32,
    #[serde(default = "default_min_post_ban_posts")]
    pub min_post_ban_mainstream_posts: u32,
    #[serde(default = "default_min_fringe_posts")]
    pub min_fringe_posts: u32,
    #[serde(default = "default_pre_ban_window")]
    pub pre_ban_window_secs: i64,
}

fn default_min_pre_ban_posts() -> u32 {
    10
}

fn default_min_post_ban_posts() -> u32 {
    10
}

fn default_min_fringe_posts() -> u32 {
    5
}

fn default_pre_ban_window() -> i64 {
    migration_core::corpus::SIX_MONTHS_SECS
}

impl CorpusSection {
    pub fn to_corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            ban_time: self.ban_time,
            focal_community: self.focal_community.clone(),
            min_pre_ban_posts: self.min_pre_ban_posts,
            min_post_ban_mainstream_posts: self.min_post_ban_mainstream_posts,
            min_fringe_posts: self.min_fringe_posts,
            pre_ban_window: self.pre_ban_window_secs,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextScoreSection {
    pub valence_lexicon: PathBuf,
    #[serde(default)]
    pub booster_lexicon: Option<PathBuf>,
    #[serde(default)]
    pub negator_lexicon: Option<PathBuf>,
    pub anger_lexicon: PathBuf,
    pub anxiety_lexicon: PathBuf,
    #[serde(default = "default_toxicity_mode")]
    pub toxicity_mode: ToxicityMode,
    #[serde(default)]
    pub toxicity_endpoint: Option<String>,
    #[serde(default)]
    pub offensive_lexicon: Option<PathBuf>,
    #[serde(default = "default_squash_scale")]
    pub squash_scale: f64,
    #[serde(default = "default_rate_limit")]
    pub request_rate_limit: f64,
    #[serde(default = "default_ngram_order")]
    pub ngram_order: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing_constant: f64,
}

fn default_toxicity_mode() -> ToxicityMode {
    ToxicityMode::Lexicon
}

fn default_squash_scale() -> f64 {
    10.0
}

fn default_rate_limit() -> f64 {
    10.0
}

fn default_ngram_order() -> usize {
    2
}

fn default_smoothing() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSimSection {
    /// The community treated as the focal one's polar opposite in the graph.
    pub polar_community: String,
    #[serde(default = "default_relevance_min_users")]
    pub relevance_min_users: u32,
    #[serde(default = "default_relevance_min_posts")]
    pub relevance_min_posts: u32,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_walks_per_node")]
    pub walks_per_node: usize,
    #[serde(default = "default_walk_length")]
    pub walk_length: usize,
    #[serde(default = "default_unit")]
    pub return_param: f64,
    #[serde(default = "default_unit")]
    pub inout_param: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_negative_samples")]
    pub negative_samples: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Optional reference ranking (one community per line, best first) used
    /// for a Spearman sanity check of the learned similarity ordering.
    #[serde(default)]
    pub reference_ranking: Option<PathBuf>,
}

fn default_relevance_min_users() -> u32 {
    10
}

fn default_relevance_min_posts() -> u32 {
    5
}

fn default_dimension() -> usize {
    128
}

fn default_walks_per_node() -> usize {
    10
}

fn default_walk_length() -> usize {
    80
}

fn default_unit() -> f64 {
    1.0
}

fn default_window() -> usize {
    10
}

fn default_negative_samples() -> usize {
    5
}

fn default_epochs() -> usize {
    5
}

fn default_learning_rate() -> f64 {
    0.025
}

impl GraphSimSection {
    pub fn to_walk_config(&self, seed: u64) -> migration_core::graphsim::WalkConfig {
        migration_core::graphsim::WalkConfig {
            dimension: self.dimension,
            walks_per_node: self.walks_per_node,
            walk_length: self.walk_length,
            return_param: self.return_param,
            inout_param: self.inout_param,
            window: self.window,
            negative_samples: self.negative_samples,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconometricsSection {
    /// Standardize feature columns before fitting.
    #[serde(default = "default_standardize")]
    pub standardize: bool,
    /// Features to export marginal-effect curves for (canonical short names).
    #[serde(default = "default_margin_features")]
    pub margin_features: Vec<String>,
    /// Number of grid points per marginal-effect curve.
    #[serde(default = "default_margin_points")]
    pub margin_grid_points: usize,
}

fn default_standardize() -> bool {
    true
}

fn default_margin_features() -> Vec<String> {
    ["tox", "emo", "ang", "anx", "div", "eng", "ppb", "apb", "sen", "dvi"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_margin_points() -> usize {
    41
}

impl Default for EconometricsSection {
    fn default() -> Self {
        EconometricsSection {
            standardize: default_standardize(),
            margin_features: default_margin_features(),
            margin_grid_points: default_margin_points(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostSection {
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    #[serde(default = "default_gbdt_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// Majority-class rows kept per minority row in stage-1 training.
    #[serde(default = "default_unit")]
    pub downsample_ratio: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Train stage 2 on ground-truth migrated rows instead of stage-1
    /// positives.
    #[serde(default)]
    pub stage2_on_truth: bool,
    /// Candidate stage thresholds tried on each validation split.
    #[serde(default = "default_threshold_grid")]
    pub threshold_grid: Vec<f64>,
    /// External prediction tables (user<TAB>label) to score alongside.
    #[serde(default)]
    pub external_predictions: Vec<ExternalPredictions>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalPredictions {
    pub name: String,
    pub path: PathBuf,
}

fn default_n_trees() -> usize {
    100
}

fn default_gbdt_learning_rate() -> f64 {
    0.1
}

fn default_max_depth() -> usize {
    3
}

fn default_min_leaf() -> usize {
    20
}

fn default_folds() -> usize {
    5
}

fn default_threshold_grid() -> Vec<f64> {
    vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
}

impl Default for BoostSection {
    fn default() -> Self {
        BoostSection {
            n_trees: default_n_trees(),
            learning_rate: default_gbdt_learning_rate(),
            max_depth: default_max_depth(),
            min_leaf: default_min_leaf(),
            downsample_ratio: default_unit(),
            folds: default_folds(),
            stage2_on_truth: false,
            threshold_grid: default_threshold_grid(),
            external_predictions: Vec::new(),
        }
    }
}

impl BoostSection {
    pub fn to_two_step_params(&self, seed: u64) -> migration_core::boost::TwoStepParams {
        migration_core::boost::TwoStepParams {
            gbdt: migration_core::boost::GbdtParams {
                n_trees: self.n_trees,
                learning_rate: self.learning_rate,
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
                seed,
            },
            downsample_ratio: self.downsample_ratio,
            stage1_threshold: 0.5,
            stage2_threshold: 0.5,
            stage2_on_truth: self.stage2_on_truth,
        }
    }
}

impl PipelineConfig {
    /// Load the config, resolve relative paths against its directory, and
    /// apply any command-line overrides.
    pub fn load(
        path: &Path,
        seed_override: Option<u64>,
        output_override: Option<&Path>,
    ) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        // Canonicalize so the hash of the resolved config does not depend on
        // how the config path was spelled on the command line.
        let mut base = path.parent().unwrap_or_else(|| Path::new("."));
        if base.as_os_str().is_empty() {
            base = Path::new(".");
        }
        let base = base
            .canonicalize()
            .map_err(|e| UsageError(format!("cannot resolve {}: {e}", base.display())))?;
        config.resolve_paths(&base);
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        if let Some(out) = output_override {
            config.output_dir = out.to_path_buf();
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.output_dir);
        for input in &mut self.corpus.inputs {
            resolve(input);
        }
        resolve(&mut self.textscore.valence_lexicon);
        if let Some(p) = &mut self.textscore.booster_lexicon {
            resolve(p);
        }
        if let Some(p) = &mut self.textscore.negator_lexicon {
            resolve(p);
        }
        resolve(&mut self.textscore.anger_lexicon);
        resolve(&mut self.textscore.anxiety_lexicon);
        if let Some(p) = &mut self.textscore.offensive_lexicon {
            resolve(p);
        }
        if let Some(p) = &mut self.graphsim.reference_ranking {
            resolve(p);
        }
        for external in &mut self.boost.external_predictions {
            resolve(&mut external.path);
        }
    }

    /// Paths that must exist before any stage runs.
    pub fn check_input_paths(&self, stage: &str) -> Result<(), UsageError> {
        let mut required: Vec<&Path> = Vec::new();
        match stage {
            "ingest" | "similarity" => {
                required.extend(self.corpus.inputs.iter().map(|p| p.as_path()));
            }
            "features" => {
                required.push(&self.textscore.valence_lexicon);
                required.push(&self.textscore.anger_lexicon);
                required.push(&self.textscore.anxiety_lexicon);
                if let Some(p) = &self.textscore.booster_lexicon {
                    required.push(p);
                }
                if let Some(p) = &self.textscore.negator_lexicon {
                    required.push(p);
                }
                if let Some(p) = &self.textscore.offensive_lexicon {
                    required.push(p);
                }
            }
            "classify" => {
                required.extend(
                    self.boost.external_predictions.iter().map(|e| e.path.as_path()),
                );
            }
            _ => {}
        }
        for path in required {
            if !path.exists() {
                return Err(UsageError(format!("input path does not exist: {}", path.display())));
            }
        }
        Ok(())
    }

    /// Stable hash of the full configuration; stamped into every sidecar.
    ///
    /// The output directory is excluded so runs into different directories
    /// with otherwise equal configs produce identical artifacts.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes =
            serde_json::to_vec(&canonical).expect("pipeline config serializes to JSON");
        crate::artifacts::sha256_hex(&bytes)
    }
}
