//! Experiment orchestration: load data, rank features with each method,
//! slice top/bottom fractions, retrain fresh reduced networks on the slices,
//! and report test accuracies.

mod ablation;
mod mask;
mod report;

pub use ablation::{
    ablation_constraints, ablation_step_counter, AblationArm, ConstraintAblationReport,
    ConstraintArm, StepAblationReport,
};
pub use mask::export_mask;
pub use report::{
    experiment_markdown, write_json, CellReport, DatasetSummary, ExperimentReport, MethodReport,
    RandomReport, RandomRun, SwpaDetails,
};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    load_delimited, load_idx, normalize, split, synth, Dataset, Delimiter, LabelSource,
    NormalizeMode, SplitDataset,
};
use crate::dropin::PenaltyConfig;
use crate::error::{Error, Result};
use crate::nn::{train, Activation, Network, NetworkSpec, TrainConfig};
use crate::rng::{derive_seed, tags};
use crate::selectors::{
    pfi_rank, random_rank, sbs_rank_with_mode, swpa_run, FeatureRanking, Method, SbsMode,
    SwpaConfig,
};

/// The halving architecture: hidden sizes `[d/2, d/4]` between the input and
/// a `classes`-wide output.
pub fn build_network_spec(d_in: usize, classes: usize) -> Result<NetworkSpec> {
    if classes < 2 {
        return Err(Error::config("need at least 2 classes"));
    }
    if d_in < classes {
        return Err(Error::config(format!(
            "input dim {d_in} below class count {classes}"
        )));
    }
    let h1 = d_in / 2;
    let h2 = d_in / 4;
    if h2 < 1 {
        return Err(Error::config(format!(
            "input dim {d_in} too small for the halving architecture"
        )));
    }
    NetworkSpec::new(vec![d_in, h1, h2, classes], Activation::Relu)
}

/// Fraction of `a` that also appears in `b`. Both sets must be the same
/// size.
pub fn feature_similarity(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::config(format!(
            "similarity needs equal nonempty sets, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let set: std::collections::HashSet<usize> = b.iter().copied().collect();
    let hits = a.iter().filter(|j| set.contains(j)).count();
    Ok(hits as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelimiterConfig {
    Comma,
    Whitespace,
}

impl Default for DelimiterConfig {
    fn default() -> Self {
        DelimiterConfig::Comma
    }
}

impl From<DelimiterConfig> for Delimiter {
    fn from(d: DelimiterConfig) -> Delimiter {
        match d {
            DelimiterConfig::Comma => Delimiter::Comma,
            DelimiterConfig::Whitespace => Delimiter::Whitespace,
        }
    }
}

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    /// IDX binary image/label pair.
    Idx { images: PathBuf, labels: PathBuf },
    /// Delimited numeric text; labels in the last column unless a separate
    /// label file is given.
    Delimited {
        features: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        delimiter: DelimiterConfig,
    },
    /// Synthetic ten-class digit images at MNIST geometry.
    SyntheticDigits {
        rows: usize,
        #[serde(default = "default_digit_noise")]
        noise: f64,
    },
    /// Synthetic binary dataset where the label is the majority sign of the
    /// informative columns.
    SyntheticSignal {
        rows: usize,
        features: usize,
        informative: Vec<usize>,
    },
}

fn default_digit_noise() -> f64 {
    0.2
}

impl DatasetConfig {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DatasetConfig::Idx { images, labels } => load_idx(images, labels),
            DatasetConfig::Delimited {
                features,
                labels,
                delimiter,
            } => {
                let source = match labels {
                    Some(path) => LabelSource::File(path.clone()),
                    None => LabelSource::LastColumn,
                };
                load_delimited(features, source, (*delimiter).into())
            }
            DatasetConfig::SyntheticDigits { rows, noise } => {
                synth::grid_digits(*rows, *noise, derive_seed(seed, &[tags::DATASET]))
            }
            DatasetConfig::SyntheticSignal {
                rows,
                features,
                informative,
            } => synth::signal_noise(
                *rows,
                *features,
                informative,
                derive_seed(seed, &[tags::DATASET]),
            ),
        }
    }
}

/// Epoch-budget presets. `Desk` caps the budget so the protocol finishes on
/// a workstation; `Paper` keeps the full-scale budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    fn apply(self, cfg: &mut TrainConfig) {
        if let Preset::Desk = self {
            cfg.max_epochs = cfg.max_epochs.min(500);
            cfg.patience = cfg.patience.min(50).min(cfg.max_epochs);
        }
    }
}

/// Everything a full experiment needs. Field defaults follow the evaluation
/// protocol: fraction 0.1, four pruning steps, ten permutation trials, ten
/// random baseline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_swpa_steps")]
    pub swpa_steps: usize,
    /// Drop-in penalties for the SWPA runs.
    #[serde(default)]
    pub penalty: Option<PenaltyConfig>,
    #[serde(default = "default_pfi_trials")]
    pub pfi_trials: usize,
    #[serde(default = "default_random_runs")]
    pub random_runs: usize,
    #[serde(default)]
    pub sbs_mode: SbsMode,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub normalize: NormalizeMode,
    #[serde(default)]
    pub subsample_rows: Option<usize>,
    #[serde(default)]
    pub preset: Option<Preset>,
    /// Grid shape for PGM mask export; must multiply to the feature count.
    #[serde(default)]
    pub mask_grid: Option<(usize, usize)>,
    #[serde(default)]
    pub seed: u64,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Swpa, Method::Sbs, Method::Pfi, Method::Random]
}

fn default_fraction() -> f64 {
    0.1
}

fn default_swpa_steps() -> usize {
    4
}

fn default_pfi_trials() -> usize {
    10
}

fn default_random_runs() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("experiment config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 0.5) {
            return Err(Error::config(format!(
                "fraction {} must lie in (0, 0.5]",
                self.fraction
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one method is required"));
        }
        if self.swpa_steps == 0 {
            return Err(Error::config("swpa_steps must be >= 1"));
        }
        if self.pfi_trials == 0 || self.random_runs == 0 {
            return Err(Error::config("pfi_trials and random_runs must be >= 1"));
        }
        self.train.validate()?;
        if let Some(p) = &self.penalty {
            p.validate()?;
        }
        Ok(())
    }

    /// Training protocol with the preset caps and the experiment seed
    /// applied.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = self.seed;
        t.penalty = None;
        if let Some(p) = self.preset {
            p.apply(&mut t);
        }
        t
    }
}

/// Prepared data plus the summary that goes into the report.
pub(crate) struct PreparedData {
    pub splits: SplitDataset,
    pub summary: DatasetSummary,
}

pub(crate) fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let mut ds = cfg.dataset.load(cfg.seed)?;
    if let Some(rows) = cfg.subsample_rows {
        ds = ds.subsample(rows, derive_seed(cfg.seed, &[tags::SUBSAMPLE]))?;
    }
    let (splits, warnings) = split(&ds, (0.6, 0.2, 0.2), derive_seed(cfg.seed, &[tags::SPLIT]))?;
    let splits = normalize(splits, cfg.normalize);
    let summary = DatasetSummary {
        rows: ds.n(),
        features: ds.feature_count(),
        classes: ds.class_count(),
        split_sizes: [splits.train.n(), splits.val.n(), splits.test.n()],
        warnings,
    };
    Ok(PreparedData { splits, summary })
}

/// Train a fresh reduced network on the given feature subset and score it on
/// the test split. Divergence is recorded in the cell, not propagated.
pub(crate) fn retrain_cell(
    splits: &SplitDataset,
    columns: &[usize],
    train_cfg: &TrainConfig,
    cell_seed: u64,
) -> CellReport {
    let attempt = || -> Result<CellReport> {
        let sub = splits.select_columns(columns)?;
        let spec = build_network_spec(sub.feature_count(), sub.class_count())?;
        let net = Network::new(spec, derive_seed(cell_seed, &[tags::INIT]));
        let result = train(net, &sub, &train_cfg.reseeded(cell_seed))?;
        let test_accuracy = result.best_network.accuracy(sub.test.x(), sub.test.y())?;
        Ok(CellReport {
            test_accuracy: Some(test_accuracy),
            best_val_accuracy: Some(result.best_val_accuracy),
            epochs_run: result.epochs_run,
            history: result.history,
            error: None,
        })
    };
    attempt().unwrap_or_else(|e| CellReport {
        test_accuracy: None,
        best_val_accuracy: None,
        epochs_run: 0,
        history: Vec::new(),
        error: Some(e.to_string()),
    })
}

fn method_index(method: Method) -> u64 {
    match method {
        Method::Swpa => 0,
        Method::Sbs => 1,
        Method::Pfi => 2,
        Method::Random => 3,
    }
}

/// Produce the ranking for one method. SWPA runs its own protocol; SBS and
/// PFI rank through `base_net`, the network trained on the full feature set.
fn rank_with(
    method: Method,
    cfg: &ExperimentConfig,
    data: &SplitDataset,
    spec_full: &NetworkSpec,
    base_net: Option<&Network>,
) -> Result<(FeatureRanking, Option<SwpaDetails>)> {
    match method {
        Method::Swpa => {
            let swpa_cfg = SwpaConfig {
                steps: cfg.swpa_steps,
                selection_factor: cfg.fraction,
                train: cfg.effective_train(),
                penalty: cfg.penalty.clone(),
            };
            let out = swpa_run(data, spec_full, &swpa_cfg)?;
            Ok((
                out.ranking,
                Some(SwpaDetails {
                    layer: out.layer,
                    rounds: out.rounds,
                }),
            ))
        }
        Method::Sbs => {
            let net = base_net.expect("base network trained for sbs");
            Ok((sbs_rank_with_mode(data, net, cfg.sbs_mode)?, None))
        }
        Method::Pfi => {
            let net = base_net.expect("base network trained for pfi");
            Ok((
                pfi_rank(data, net, cfg.pfi_trials, derive_seed(cfg.seed, &[tags::PFI]))?,
                None,
            ))
        }
        Method::Random => unreachable!("random baseline handled separately"),
    }
}

/// Run the full protocol for every configured method.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let prepared = prepare_data(cfg)?;
    let data = &prepared.splits;
    let d = data.feature_count();
    let classes = data.class_count();
    let selected = (cfg.fraction * d as f64).floor() as usize;
    if selected == 0 {
        return Err(Error::config(format!(
            "fraction {} of {d} features selects nothing",
            cfg.fraction
        )));
    }
    if let Some((h, w)) = cfg.mask_grid {
        if h * w != d {
            return Err(Error::config(format!(
                "mask grid {h}x{w} does not cover {d} features"
            )));
        }
    }
    let spec_full = build_network_spec(d, classes)?;
    // Validate the reduced geometry up front so retrain cells cannot fail on
    // configuration.
    build_network_spec(selected, classes)?;
    let train_cfg = cfg.effective_train();

    let needs_base = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::Sbs | Method::Pfi));
    let base_net = if needs_base {
        let seed = derive_seed(cfg.seed, &[tags::BASE_TRAIN]);
        let net = Network::new(spec_full.clone(), derive_seed(seed, &[tags::INIT]));
        Some(train(net, data, &train_cfg.reseeded(seed))?.best_network)
    } else {
        None
    };

    let mut methods = Vec::new();
    for &method in &cfg.methods {
        if method == Method::Random {
            continue;
        }
        let (ranking, swpa) = rank_with(method, cfg, data, &spec_full, base_net.as_ref())?;
        let (top_indices, bottom_indices) = ranking.top_bottom(cfg.fraction)?;
        methods.push(MethodReport {
            method,
            ranking,
            top_indices,
            bottom_indices,
            top: CellReport::pending(),
            bottom: CellReport::pending(),
            swpa,
        });
    }

    // Retrain cells in parallel; each owns a seed stream keyed by
    // (method, slice) so the schedule cannot affect results.
    let cell_tasks: Vec<(usize, bool, Vec<usize>)> = methods
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            [
                (i, true, m.top_indices.clone()),
                (i, false, m.bottom_indices.clone()),
            ]
        })
        .collect();
    let cells: Vec<(usize, bool, CellReport)> = cell_tasks
        .into_par_iter()
        .map(|(i, is_top, columns)| {
            let method = methods[i].method;
            let cell_seed = derive_seed(
                cfg.seed,
                &[tags::RETRAIN, method_index(method), u64::from(is_top)],
            );
            (i, is_top, retrain_cell(data, &columns, &train_cfg, cell_seed))
        })
        .collect();
    for (i, is_top, cell) in cells {
        if is_top {
            methods[i].top = cell;
        } else {
            methods[i].bottom = cell;
        }
    }

    let random = if cfg.methods.contains(&Method::Random) {
        let runs: Vec<RandomRun> = (0..cfg.random_runs)
            .into_par_iter()
            .map(|r| {
                let ranking =
                    random_rank(d, derive_seed(cfg.seed, &[tags::RANDOM_RANK, r as u64]))?;
                let (indices, _) = ranking.top_bottom(cfg.fraction)?;
                let cell_seed = derive_seed(
                    cfg.seed,
                    &[tags::RETRAIN, method_index(Method::Random), r as u64],
                );
                Ok(RandomRun {
                    run: r,
                    indices: indices.clone(),
                    cell: retrain_cell(data, &indices, &train_cfg, cell_seed),
                })
            })
            .collect::<Result<_>>()?;
        let accs: Vec<f64> = runs.iter().filter_map(|r| r.cell.test_accuracy).collect();
        let (worst, average) = if accs.is_empty() {
            (None, None)
        } else {
            (
                Some(accs.iter().copied().fold(f64::INFINITY, f64::min)),
                Some(accs.iter().sum::<f64>() / accs.len() as f64),
            )
        };
        Some(RandomReport {
            worst,
            average,
            runs,
        })
    } else {
        None
    };

    let mut echoed = cfg.clone();
    echoed.train = train_cfg;
    let diverged = methods
        .iter()
        .flat_map(|m| [&m.top, &m.bottom])
        .chain(random.iter().flat_map(|r| r.runs.iter().map(|run| &run.cell)))
        .any(|c| c.error.is_some());
    Ok(ExperimentReport {
        config: echoed,
        dataset: prepared.summary,
        selected_count: selected,
        methods,
        random,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_spec_matches_architecture_tables() {
        let full = build_network_spec(784, 10).unwrap();
        assert_eq!(full.layer_sizes, vec![784, 392, 196, 10]);
        let reduced = build_network_spec(78, 10).unwrap();
        assert_eq!(reduced.layer_sizes, vec![78, 39, 19, 10]);
        let isolet = build_network_spec(61, 26).unwrap();
        assert_eq!(isolet.layer_sizes, vec![61, 30, 15, 26]);
        let har = build_network_spec(56, 6).unwrap();
        assert_eq!(har.layer_sizes, vec![56, 28, 14, 6]);
    }

    #[test]
    fn network_spec_rejects_degenerate_dims() {
        assert!(build_network_spec(3, 2).is_err()); // floor(3/4) = 0
        assert!(build_network_spec(10, 1).is_err());
        assert!(build_network_spec(4, 10).is_err());
    }

    #[test]
    fn similarity_basic_values() {
        assert_eq!(feature_similarity(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(feature_similarity(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(
            feature_similarity(&[1, 2, 3, 4], &[3, 4, 5, 6]).unwrap(),
            0.5
        );
        assert!(feature_similarity(&[1], &[1, 2]).is_err());
        assert!(feature_similarity(&[], &[]).is_err());
    }

    pub(super) fn tiny_experiment(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetConfig::SyntheticSignal {
                rows: 260,
                features: 10,
                informative: vec![1, 4],
            },
            methods: vec![Method::Swpa, Method::Sbs, Method::Pfi, Method::Random],
            fraction: 0.2,
            swpa_steps: 2,
            penalty: None,
            pfi_trials: 3,
            random_runs: 3,
            sbs_mode: SbsMode::MeanThenAbs,
            train: TrainConfig {
                max_epochs: 60,
                patience: 10,
                learning_rate: 0.05,
                momentum: 0.9,
                batch_size: 32,
                seed: 0,
                penalty: None,
            },
            normalize: NormalizeMode::None,
            subsample_rows: None,
            preset: None,
            mask_grid: None,
            seed,
        }
    }

    #[test]
    fn experiment_slices_are_disjoint_and_sized() {
        let report = run_experiment(&tiny_experiment(3)).unwrap();
        assert_eq!(report.selected_count, 2);
        assert_eq!(report.methods.len(), 3);
        for m in &report.methods {
            assert_eq!(m.top_indices.len(), 2);
            assert_eq!(m.bottom_indices.len(), 2);
            assert!(m.top_indices.iter().all(|t| !m.bottom_indices.contains(t)));
            assert!(m.top.test_accuracy.is_some(), "{:?}", m.top.error);
            assert!(m.bottom.test_accuracy.is_some());
        }
        let random = report.random.unwrap();
        assert_eq!(random.runs.len(), 3);
        assert!(random.worst.unwrap() <= random.average.unwrap());
        assert!(!report.diverged);
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&tiny_experiment(9)).unwrap();
        let b = run_experiment(&tiny_experiment(9)).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn experiment_rejects_empty_selection() {
        let mut cfg = tiny_experiment(1);
        cfg.fraction = 0.05; // floor(0.5) = 0
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn mask_grid_must_cover_features() {
        let mut cfg = tiny_experiment(1);
        cfg.mask_grid = Some((3, 3));
        assert!(run_experiment(&cfg).is_err());
    }
}
