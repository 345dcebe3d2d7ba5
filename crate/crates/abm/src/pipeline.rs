//! The end-to-end pipeline behind the CLI: a TOML configuration resolved
//! into a content hash, eight stages that each read and write artifacts in
//! the output directory, and compatibility checks so artifacts from
//! different configurations never silently mix.
//!
//! The two prediction tasks differ in shape: outcome rows are one per
//! episode (the initial state, labeled success or failure), strategy rows
//! are one per step of each successful episode. All four trees are scored
//! on the same held-out real test episodes.
//!
//! Every artifact except the `.meta.json` sidecars is byte-deterministic in
//! the configuration: running twice with one seed produces identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behavior::{outcome_label, outcome_label_name, strategy_label_name, strategy_labels};
use crate::env::{EnvConfig, Gridworld, Status};
use crate::error::{Error, Result};
use crate::features::{self, FEATURE_COUNT};
use crate::model::EnsembleModel;
use crate::planner::Mpc;
use crate::rollout::{
    collect_random_policy, collect_real, imagine, transitions_from_episodes, Episode, EpisodeSet,
    ImagineInit,
};
use crate::seeding::{derive_seed, short_hash};
use crate::tree::{group_split, metrics, Dataset, Metrics, Tree, TreeArtifact, TreeParams};

/// Dynamics-model settings: ensemble size, smoothing, and how many
/// random-policy episodes to learn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub k: usize,
    pub alpha: f64,
    pub n_explore: usize,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig { k: 5, alpha: 1.0, n_explore: 500 }
    }
}

/// Planner settings: lookahead depth and the sequence budget it must fit in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub horizon: u32,
    pub budget: u64,
}

impl Default for PlannerConfig {
    fn default() -> PlannerConfig {
        PlannerConfig { horizon: 5, budget: 4096 }
    }
}

/// Episode counts, the held-out fraction, and the master seed everything is
/// derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_real: usize,
    pub n_imagined: usize,
    pub test_fraction: f64,
    pub master_seed: Option<u64>,
}

impl Default for DataConfig {
    fn default() -> DataConfig {
        DataConfig { n_real: 2000, n_imagined: 2000, test_fraction: 0.2, master_seed: None }
    }
}

/// Per-task tree growth settings.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSection {
    pub outcome: TreeParams,
    pub strategy: TreeParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> OutputConfig {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

/// The whole pipeline configuration. Every field has a default; only the
/// master seed must come from somewhere — the file or the command line.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub env: EnvConfig,
    pub model: ModelConfig,
    pub planner: PlannerConfig,
    pub data: DataConfig,
    pub tree: TreeSection,
    pub output: OutputConfig,
}

impl PipelineConfig {
    /// Read a TOML file, or start from defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    /// Apply command-line overrides and validate. After this the master seed
    /// is fixed.
    pub fn resolve(mut self, cli_seed: Option<u64>, cli_out: Option<&Path>) -> Result<PipelineConfig> {
        if let Some(seed) = cli_seed {
            self.data.master_seed = Some(seed);
        }
        if let Some(out) = cli_out {
            self.output.dir = out.to_path_buf();
        }
        if self.data.master_seed.is_none() {
            return Err(Error::Config(
                "no master seed: set data.master_seed in the config or pass --seed".into(),
            ));
        }
        self.env.validate()?;
        Mpc::new(self.planner.horizon, self.planner.budget)?;
        if self.model.k == 0 {
            return Err(Error::Config("model.k must be at least 1".into()));
        }
        if !(self.model.alpha > 0.0) {
            return Err(Error::Config("model.alpha must be positive".into()));
        }
        if self.model.n_explore == 0 {
            return Err(Error::Config("model.n_explore must be at least 1".into()));
        }
        if self.data.n_real < 2 {
            return Err(Error::Config("data.n_real must be at least 2 to split".into()));
        }
        if self.data.n_imagined == 0 {
            return Err(Error::Config("data.n_imagined must be at least 1".into()));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "data.test_fraction must lie strictly between 0 and 1, got {}",
                self.data.test_fraction
            )));
        }
        Ok(self)
    }

    pub fn master_seed(&self) -> u64 {
        self.data.master_seed.expect("config was resolved")
    }

    /// Content hash of everything that shapes results. The output directory
    /// is deliberately excluded: the same experiment in two directories is
    /// the same experiment.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct HashView<'a> {
            env: &'a EnvConfig,
            model: &'a ModelConfig,
            planner: &'a PlannerConfig,
            data: &'a DataConfig,
            tree: &'a TreeSection,
        }
        let view = HashView {
            env: &self.env,
            model: &self.model,
            planner: &self.planner,
            data: &self.data,
            tree: &self.tree,
        };
        let text = toml::to_string(&view).expect("config serializes");
        short_hash(text.as_bytes())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output.dir.join(name)
    }
}

pub const EXPLORE_FILE: &str = "explore.jsonl";
pub const MODEL_FILE: &str = "model.txt";
pub const REAL_FILE: &str = "real.jsonl";
pub const IMAGINED_FILE: &str = "imagined.jsonl";
pub const FEATURES_REAL_FILE: &str = "features_real.csv";
pub const FEATURES_IMAGINED_FILE: &str = "features_imagined.csv";
pub const OUTCOME_REAL_FILE: &str = "outcome_real.csv";
pub const OUTCOME_IMAGINED_FILE: &str = "outcome_imagined.csv";
pub const STRATEGY_REAL_FILE: &str = "strategy_real.csv";
pub const STRATEGY_IMAGINED_FILE: &str = "strategy_imagined.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const TREE_OUTCOME_REAL_FILE: &str = "tree_outcome_real.json";
pub const TREE_OUTCOME_IMAGINED_FILE: &str = "tree_outcome_imagined.json";
pub const TREE_STRATEGY_REAL_FILE: &str = "tree_strategy_real.json";
pub const TREE_STRATEGY_IMAGINED_FILE: &str = "tree_strategy_imagined.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";

/// The pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    TrainModel,
    Collect,
    Imagine,
    Featurize,
    Label,
    FitTree,
    Evaluate,
    ExportDot,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::TrainModel,
        Stage::Collect,
        Stage::Imagine,
        Stage::Featurize,
        Stage::Label,
        Stage::FitTree,
        Stage::Evaluate,
        Stage::ExportDot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::TrainModel => "train-model",
            Stage::Collect => "collect",
            Stage::Imagine => "imagine",
            Stage::Featurize => "featurize",
            Stage::Label => "label",
            Stage::FitTree => "fit-tree",
            Stage::Evaluate => "evaluate",
            Stage::ExportDot => "export-dot",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Run every stage in order. A failure aborts with the stage's name and
/// cause; artifacts written by completed stages stay valid, and anything a
/// later re-run can't trust is caught by the per-artifact config-hash and
/// dependency checks.
pub fn run_all(config: &PipelineConfig) -> Result<()> {
    for stage in Stage::ALL {
        run_stage(config, stage)?;
    }
    Ok(())
}

/// Run one stage, reading whatever earlier artifacts it needs from disk.
/// Failures name the stage alongside the cause.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<()> {
    let result = match stage {
        Stage::TrainModel => stage_train_model(config),
        Stage::Collect => stage_collect(config),
        Stage::Imagine => stage_imagine(config),
        Stage::Featurize => stage_featurize(config),
        Stage::Label => stage_label(config),
        Stage::FitTree => stage_fit_tree(config),
        Stage::Evaluate => stage_evaluate(config),
        Stage::ExportDot => stage_export_dot(config),
    };
    result.map_err(|e| e.in_stage(stage.name()))
}

fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact { stage: producer, path: path.to_path_buf() })
    }
}

fn check_hash(artifact: &Path, found: &str, config: &PipelineConfig) -> Result<()> {
    let current = config.hash();
    if found == current {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} was produced under config {found}, current config is {current}; \
             re-run the pipeline from train-model",
            artifact.display()
        )))
    }
}

fn load_model(config: &PipelineConfig) -> Result<EnsembleModel> {
    let path = config.path(MODEL_FILE);
    require(&path, "train-model")?;
    let (model, hash) = EnsembleModel::load(&path)?;
    check_hash(&path, &hash, config)?;
    Ok(model)
}

fn load_set(config: &PipelineConfig, name: &str, producer: &'static str) -> Result<EpisodeSet> {
    let path = config.path(name);
    require(&path, producer)?;
    let set = EpisodeSet::load(&path)?;
    check_hash(&path, &set.config_hash, config)?;
    Ok(set)
}

fn stage_train_model(config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&config.output.dir).map_err(|e| Error::io(&config.output.dir, e))?;
    let gw = Gridworld::new(config.env.clone())?;
    let hash = config.hash();
    let explore_seed = derive_seed(config.master_seed(), "explore", 0);
    let set = collect_random_policy(&gw, config.model.n_explore, explore_seed, &hash)?;
    set.save(&config.path(EXPLORE_FILE))?;
    let transitions = transitions_from_episodes(&set);
    let model_seed = derive_seed(config.master_seed(), "model", 0);
    let model = EnsembleModel::fit(
        &transitions,
        config.model.k,
        config.model.alpha,
        config.env.grid_size,
        model_seed,
    )?;
    model.save(&config.path(MODEL_FILE), &hash)?;
    println!(
        "train-model: fitted {}-member ensemble on {} transitions from {} exploration episodes",
        config.model.k,
        transitions.len(),
        set.episodes.len()
    );
    Ok(())
}

fn stage_collect(config: &PipelineConfig) -> Result<()> {
    let gw = Gridworld::new(config.env.clone())?;
    let model = load_model(config)?;
    let mpc = Mpc::new(config.planner.horizon, config.planner.budget)?;
    let seed = derive_seed(config.master_seed(), "collect", 0);
    let set = collect_real(&gw, &model, &mpc, config.data.n_real, seed, &config.hash())?;
    set.save(&config.path(REAL_FILE))?;
    let reached = set.episodes.iter().filter(|e| e.status == Status::GoalReached).count();
    println!(
        "collect: {} planner episodes in the true environment, {} reached the goal",
        set.episodes.len(),
        reached
    );
    Ok(())
}

fn stage_imagine(config: &PipelineConfig) -> Result<()> {
    let gw = Gridworld::new(config.env.clone())?;
    let model = load_model(config)?;
    let mpc = Mpc::new(config.planner.horizon, config.planner.budget)?;
    let seed = derive_seed(config.master_seed(), "imagine", 0);
    let set = imagine(
        &gw,
        &model,
        &mpc,
        config.data.n_imagined,
        ImagineInit::Random,
        seed,
        &config.hash(),
    )?;
    set.save(&config.path(IMAGINED_FILE))?;
    let reached = set.episodes.iter().filter(|e| e.status == Status::GoalReached).count();
    println!(
        "imagine: {} model-sampled episodes, {} reached the goal",
        set.episodes.len(),
        reached
    );
    Ok(())
}

fn feature_header(label_column: Option<&str>) -> String {
    let mut header = String::from("episode_id,t");
    for name in features::schema().names() {
        header.push(',');
        header.push_str(name);
    }
    if let Some(label) = label_column {
        header.push(',');
        header.push_str(label);
    }
    header
}

fn push_feature_row(out: &mut String, ep: &Episode, t: usize, label: Option<u32>) {
    out.push_str(&ep.seed.to_string());
    out.push(',');
    out.push_str(&ep.steps[t].state.t.to_string());
    for value in features::extract(&ep.steps[t].state) {
        out.push(',');
        out.push_str(&format!("{value}"));
    }
    if let Some(label) = label {
        out.push(',');
        out.push_str(&label.to_string());
    }
    out.push('\n');
}

fn write_features_csv(path: &Path, set: &EpisodeSet, hash: &str) -> Result<()> {
    let mut out = format!("# config_hash={hash} schema={}\n", features::schema().hash());
    out.push_str(&feature_header(None));
    out.push('\n');
    for ep in &set.episodes {
        for t in 0..ep.len() {
            push_feature_row(&mut out, ep, t, None);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Which states of an episode become labeled rows.
#[derive(Clone, Copy, PartialEq)]
enum LabeledRows {
    /// One row per episode, from its initial state. The outcome task asks
    /// what the starting configuration predicts.
    InitialOnly,
    /// One row per step. The strategy task tracks behavior as it unfolds.
    EveryStep,
}

fn write_labeled_csv(
    path: &Path,
    set: &EpisodeSet,
    hash: &str,
    label_column: &str,
    successful_only: bool,
    rows: LabeledRows,
    labeler: impl Fn(&Episode) -> Vec<u32>,
) -> Result<()> {
    let mut out = format!("# config_hash={hash} schema={}\n", features::schema().hash());
    out.push_str(&feature_header(Some(label_column)));
    out.push('\n');
    for ep in &set.episodes {
        if successful_only && ep.status != Status::GoalReached {
            continue;
        }
        let labels = labeler(ep);
        debug_assert_eq!(labels.len(), ep.len());
        let last = match rows {
            LabeledRows::InitialOnly => 1,
            LabeledRows::EveryStep => ep.len(),
        };
        for t in 0..last {
            push_feature_row(&mut out, ep, t, Some(labels[t]));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a labeled CSV back into a dataset, verifying its config and schema
/// stamps and its header.
fn read_labeled_csv(
    config: &PipelineConfig,
    name: &str,
    label_column: &str,
    producer: &'static str,
) -> Result<Dataset> {
    let path = config.path(name);
    require(&path, producer)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse { path: path.clone(), line, msg };
    let mut lines = text.lines().enumerate();
    let (_, stamp) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let expected_stamp =
        format!("# config_hash={} schema={}", config.hash(), features::schema().hash());
    if stamp != expected_stamp {
        return Err(Error::Config(format!(
            "{} carries stamp {stamp:?}, expected {expected_stamp:?}; \
             re-run the pipeline from train-model",
            path.display()
        )));
    }
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing header".into()))?;
    let expected_header = feature_header(Some(label_column));
    if header != expected_header {
        return Err(parse_err(2, format!("unexpected header {header:?}")));
    }
    let mut data = Dataset::new(FEATURE_COUNT);
    let mut row = Vec::with_capacity(FEATURE_COUNT);
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let mut fields = line.split(',');
        let episode_id: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad episode_id".into()))?;
        let _t: u32 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad t".into()))?;
        row.clear();
        for _ in 0..FEATURE_COUNT {
            let value: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(line_no, "missing feature value".into()))?;
            row.push(value);
        }
        let label: u32 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad label".into()))?;
        if fields.next().is_some() {
            return Err(parse_err(line_no, "trailing fields".into()));
        }
        data.push_row(&row, label, episode_id);
    }
    Ok(data)
}

fn stage_featurize(config: &PipelineConfig) -> Result<()> {
    let hash = config.hash();
    let real = load_set(config, REAL_FILE, "collect")?;
    write_features_csv(&config.path(FEATURES_REAL_FILE), &real, &hash)?;
    let n_real: usize = real.episodes.iter().map(|e| e.len()).sum();
    drop(real);
    let imagined = load_set(config, IMAGINED_FILE, "imagine")?;
    write_features_csv(&config.path(FEATURES_IMAGINED_FILE), &imagined, &hash)?;
    let n_imagined: usize = imagined.episodes.iter().map(|e| e.len()).sum();
    println!("featurize: {n_real} real and {n_imagined} imagined step rows, {FEATURE_COUNT} features each");
    Ok(())
}

fn stage_label(config: &PipelineConfig) -> Result<()> {
    let hash = config.hash();
    for (set_name, producer, outcome_file, strategy_file) in [
        (REAL_FILE, "collect", OUTCOME_REAL_FILE, STRATEGY_REAL_FILE),
        (IMAGINED_FILE, "imagine", OUTCOME_IMAGINED_FILE, STRATEGY_IMAGINED_FILE),
    ] {
        let producer: &'static str = producer;
        let set = load_set(config, set_name, producer)?;
        write_labeled_csv(
            &config.path(outcome_file),
            &set,
            &hash,
            "outcome",
            false,
            LabeledRows::InitialOnly,
            |ep| vec![outcome_label(ep); ep.len()],
        )?;
        write_labeled_csv(
            &config.path(strategy_file),
            &set,
            &hash,
            "strategy",
            true,
            LabeledRows::EveryStep,
            strategy_labels,
        )?;
        let successful = set.episodes.iter().filter(|e| e.status == Status::GoalReached).count();
        println!(
            "label: {} -> one outcome row for each of {} episodes, strategy rows for {} successful",
            set_name,
            set.episodes.len(),
            successful
        );
    }
    Ok(())
}

/// The persisted train/test partition of real episodes.
#[derive(Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub test_fraction: f64,
    pub train_episodes: Vec<u64>,
    pub test_episodes: Vec<u64>,
}

fn fit_and_save(
    config: &PipelineConfig,
    data: &Dataset,
    rows: &[usize],
    params: &TreeParams,
    task: &str,
    trained_on: &str,
    file: &str,
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "no training rows for the {trained_on} {task} tree; \
             the {trained_on} episode set has no qualifying episodes"
        )));
    }
    let tree = Tree::fit(data, rows, params)?;
    let artifact =
        TreeArtifact::from_tree(&tree, task, trained_on, &config.hash(), &features::schema().hash());
    artifact.save(&config.path(file))?;
    println!(
        "fit-tree: {trained_on} {task} tree, {} rows, depth {}, {} leaves",
        rows.len(),
        tree.depth(),
        tree.n_leaves()
    );
    Ok(())
}

fn stage_fit_tree(config: &PipelineConfig) -> Result<()> {
    let split_seed = derive_seed(config.master_seed(), "split", 0);

    let outcome_real = read_labeled_csv(config, OUTCOME_REAL_FILE, "outcome", "label")?;
    let split = group_split(&outcome_real, config.data.test_fraction, split_seed)?;
    let split_file = SplitFile {
        seed: split_seed,
        test_fraction: config.data.test_fraction,
        train_episodes: split.train_groups.clone(),
        test_episodes: split.test_groups.clone(),
    };
    let split_path = config.path(SPLIT_FILE);
    let text = serde_json::to_string_pretty(&split_file).expect("split serializes");
    fs::write(&split_path, text).map_err(|e| Error::io(&split_path, e))?;
    println!(
        "fit-tree: split {} real episodes into {} train / {} test",
        split.train_groups.len() + split.test_groups.len(),
        split.train_groups.len(),
        split.test_groups.len()
    );

    fit_and_save(
        config,
        &outcome_real,
        &split.train_rows,
        &config.tree.outcome,
        "outcome",
        "real",
        TREE_OUTCOME_REAL_FILE,
    )?;
    drop(outcome_real);

    let train_groups: BTreeSet<u64> = split.train_groups.iter().copied().collect();
    let strategy_real = read_labeled_csv(config, STRATEGY_REAL_FILE, "strategy", "label")?;
    let rows: Vec<usize> =
        (0..strategy_real.len()).filter(|&i| train_groups.contains(&strategy_real.group(i))).collect();
    fit_and_save(
        config,
        &strategy_real,
        &rows,
        &config.tree.strategy,
        "strategy",
        "real",
        TREE_STRATEGY_REAL_FILE,
    )?;
    drop(strategy_real);

    let outcome_imagined = read_labeled_csv(config, OUTCOME_IMAGINED_FILE, "outcome", "label")?;
    let rows: Vec<usize> = (0..outcome_imagined.len()).collect();
    fit_and_save(
        config,
        &outcome_imagined,
        &rows,
        &config.tree.outcome,
        "outcome",
        "imagined",
        TREE_OUTCOME_IMAGINED_FILE,
    )?;
    drop(outcome_imagined);

    let strategy_imagined = read_labeled_csv(config, STRATEGY_IMAGINED_FILE, "strategy", "label")?;
    let rows: Vec<usize> = (0..strategy_imagined.len()).collect();
    fit_and_save(
        config,
        &strategy_imagined,
        &rows,
        &config.tree.strategy,
        "strategy",
        "imagined",
        TREE_STRATEGY_IMAGINED_FILE,
    )
}

fn load_tree(
    config: &PipelineConfig,
    file: &str,
    task: &str,
    trained_on: &str,
) -> Result<Tree> {
    let path = config.path(file);
    require(&path, "fit-tree")?;
    let artifact = TreeArtifact::load(&path)?;
    check_hash(&path, &artifact.config_hash, config)?;
    if artifact.schema_hash != features::schema().hash() {
        return Err(Error::Config(format!(
            "{} was built for a different feature schema",
            path.display()
        )));
    }
    if artifact.task != task || artifact.trained_on != trained_on {
        return Err(Error::Data(format!(
            "{} holds a {} tree trained on {} data, expected {task} on {trained_on}",
            path.display(),
            artifact.task,
            artifact.trained_on
        )));
    }
    Ok(artifact.tree())
}

/// Everything `evaluate` measures, exactly as serialized to `report.json`.
#[derive(Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub datasets: DatasetSummary,
    pub n_test_episodes: usize,
    pub n_outcome_test_rows: usize,
    pub n_strategy_test_rows: usize,
    pub results: ReportResults,
    pub strategy_frequencies: StrategyFrequencies,
    pub dot_files: Vec<String>,
}

/// Per-source episode counts and success rates.
#[derive(Serialize, Deserialize)]
pub struct DatasetSummary {
    pub real: SetSummary,
    pub imagined: SetSummary,
}

#[derive(Serialize, Deserialize)]
pub struct SetSummary {
    pub episodes: usize,
    pub success_rate: f64,
}

fn set_summary(outcome_rows: &Dataset) -> SetSummary {
    let successes = outcome_rows.labels().iter().filter(|&&l| l == 1).count();
    SetSummary {
        episodes: outcome_rows.len(),
        success_rate: successes as f64 / outcome_rows.len() as f64,
    }
}

/// The four accuracy pairs: each task's tree, trained on real or imagined
/// episodes, always measured on the held-out real test episodes.
#[derive(Serialize, Deserialize)]
pub struct ReportResults {
    pub outcome_real: Metrics,
    pub outcome_imagined: Metrics,
    pub strategy_real: Metrics,
    pub strategy_imagined: Metrics,
}

/// How often each strategy label occurs on the test split, actually and as
/// each strategy tree predicts.
#[derive(Serialize, Deserialize)]
pub struct StrategyFrequencies {
    pub actual: BTreeMap<String, f64>,
    pub real_tree: BTreeMap<String, f64>,
    pub imagined_tree: BTreeMap<String, f64>,
}

fn frequency_map(labels: &[u32]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(l, c)| (strategy_label_name(l).to_string(), c as f64 / labels.len() as f64))
        .collect()
}

fn stage_evaluate(config: &PipelineConfig) -> Result<()> {
    let split_path = config.path(SPLIT_FILE);
    require(&split_path, "fit-tree")?;
    let text = fs::read_to_string(&split_path).map_err(|e| Error::io(&split_path, e))?;
    let split: SplitFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: split_path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if split.seed != derive_seed(config.master_seed(), "split", 0) {
        return Err(Error::Config(format!(
            "{} was produced under a different master seed; re-run fit-tree",
            split_path.display()
        )));
    }
    let test: BTreeSet<u64> = split.test_episodes.iter().copied().collect();

    let evaluate_pair = |data: &Dataset, real_tree: &Tree, imagined_tree: &Tree| -> Result<(Metrics, Metrics, Vec<u32>, Vec<u32>, Vec<u32>)> {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| test.contains(&data.group(i))).collect();
        let actual: Vec<u32> = rows.iter().map(|&i| data.label(i)).collect();
        let predicted_real = real_tree.predict(data, &rows);
        let predicted_imagined = imagined_tree.predict(data, &rows);
        let m_real = metrics(&predicted_real, &actual)?;
        let m_imagined = metrics(&predicted_imagined, &actual)?;
        Ok((m_real, m_imagined, actual, predicted_real, predicted_imagined))
    };

    let outcome_data = read_labeled_csv(config, OUTCOME_REAL_FILE, "outcome", "label")?;
    let t_or = load_tree(config, TREE_OUTCOME_REAL_FILE, "outcome", "real")?;
    let t_oi = load_tree(config, TREE_OUTCOME_IMAGINED_FILE, "outcome", "imagined")?;
    let (outcome_real, outcome_imagined, outcome_actual, _, _) =
        evaluate_pair(&outcome_data, &t_or, &t_oi)?;
    let n_outcome_test_rows = outcome_actual.len();
    let real_summary = set_summary(&outcome_data);
    drop(outcome_data);
    let imagined_summary =
        set_summary(&read_labeled_csv(config, OUTCOME_IMAGINED_FILE, "outcome", "label")?);

    let strategy_data = read_labeled_csv(config, STRATEGY_REAL_FILE, "strategy", "label")?;
    let t_sr = load_tree(config, TREE_STRATEGY_REAL_FILE, "strategy", "real")?;
    let t_si = load_tree(config, TREE_STRATEGY_IMAGINED_FILE, "strategy", "imagined")?;
    let (strategy_real, strategy_imagined, strategy_actual, strategy_pred_real, strategy_pred_imagined) =
        evaluate_pair(&strategy_data, &t_sr, &t_si)?;
    drop(strategy_data);

    let report = Report {
        config_hash: config.hash(),
        datasets: DatasetSummary { real: real_summary, imagined: imagined_summary },
        n_test_episodes: split.test_episodes.len(),
        n_outcome_test_rows,
        n_strategy_test_rows: strategy_actual.len(),
        results: ReportResults { outcome_real, outcome_imagined, strategy_real, strategy_imagined },
        strategy_frequencies: StrategyFrequencies {
            actual: frequency_map(&strategy_actual),
            real_tree: frequency_map(&strategy_pred_real),
            imagined_tree: frequency_map(&strategy_pred_imagined),
        },
        dot_files: [
            TREE_OUTCOME_REAL_FILE,
            TREE_OUTCOME_IMAGINED_FILE,
            TREE_STRATEGY_REAL_FILE,
            TREE_STRATEGY_IMAGINED_FILE,
        ]
        .iter()
        .map(|f| Path::new(f).with_extension("dot").to_string_lossy().into_owned())
        .collect(),
    };

    let json_path = config.path(REPORT_JSON_FILE);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

    let mut txt = String::new();
    txt.push_str("behavior model report\n");
    txt.push_str(&format!("config {}\n\n", report.config_hash));
    txt.push_str(&format!(
        "episodes: {} real (success rate {:.4}), {} imagined (success rate {:.4})\n\n",
        report.datasets.real.episodes,
        report.datasets.real.success_rate,
        report.datasets.imagined.episodes,
        report.datasets.imagined.success_rate
    ));
    txt.push_str("task     trained-on    accuracy  balanced\n");
    for (task, on, m) in [
        ("outcome", "real", &report.results.outcome_real),
        ("outcome", "imagined", &report.results.outcome_imagined),
        ("strategy", "real", &report.results.strategy_real),
        ("strategy", "imagined", &report.results.strategy_imagined),
    ] {
        txt.push_str(&format!(
            "{task:<8} {on:<12}    {:.4}    {:.4}\n",
            m.accuracy, m.balanced_accuracy
        ));
    }
    txt.push_str(&format!(
        "\nheld-out real test episodes: {} ({} outcome rows, {} strategy rows)\n",
        report.n_test_episodes, report.n_outcome_test_rows, report.n_strategy_test_rows
    ));
    txt.push_str(&format!("tree renderings: {}\n", report.dot_files.join(", ")));
    txt.push_str("\nstrategy label frequencies on the test split\n");
    txt.push_str(&format!("{:<40} {:>7} {:>10} {:>14}\n", "label", "actual", "real-tree", "imagined-tree"));
    let names: BTreeSet<&String> = report
        .strategy_frequencies
        .actual
        .keys()
        .chain(report.strategy_frequencies.real_tree.keys())
        .chain(report.strategy_frequencies.imagined_tree.keys())
        .collect();
    for name in names {
        let f = |m: &BTreeMap<String, f64>| m.get(name).copied().unwrap_or(0.0);
        txt.push_str(&format!(
            "{name:<40} {:>7.4} {:>10.4} {:>14.4}\n",
            f(&report.strategy_frequencies.actual),
            f(&report.strategy_frequencies.real_tree),
            f(&report.strategy_frequencies.imagined_tree)
        ));
    }
    let txt_path = config.path(REPORT_TEXT_FILE);
    fs::write(&txt_path, &txt).map_err(|e| Error::io(&txt_path, e))?;

    for (task, on, m) in [
        ("outcome", "real", &report.results.outcome_real),
        ("outcome", "imagined", &report.results.outcome_imagined),
        ("strategy", "real", &report.results.strategy_real),
        ("strategy", "imagined", &report.results.strategy_imagined),
    ] {
        println!(
            "evaluate: {task} tree trained on {on}: accuracy {:.4}, balanced {:.4}",
            m.accuracy, m.balanced_accuracy
        );
    }
    Ok(())
}

fn stage_export_dot(config: &PipelineConfig) -> Result<()> {
    let names: Vec<String> = features::schema().names().map(String::from).collect();
    for (file, task, trained_on) in [
        (TREE_OUTCOME_REAL_FILE, "outcome", "real"),
        (TREE_OUTCOME_IMAGINED_FILE, "outcome", "imagined"),
        (TREE_STRATEGY_REAL_FILE, "strategy", "real"),
        (TREE_STRATEGY_IMAGINED_FILE, "strategy", "imagined"),
    ] {
        let tree = load_tree(config, file, task, trained_on)?;
        let class_name: Box<dyn Fn(u32) -> String> = if task == "outcome" {
            Box::new(|l| outcome_label_name(l).to_string())
        } else {
            Box::new(|l| strategy_label_name(l).to_string())
        };
        let dot = tree.to_dot(&names, class_name.as_ref());
        let dot_path = config.path(file).with_extension("dot");
        fs::write(&dot_path, dot).map_err(|e| Error::io(&dot_path, e))?;
        println!("export-dot: {} -> {}", file, dot_path.display());
    }
    Ok(())
}
