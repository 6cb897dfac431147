//! Stepwise weight pruning: train a network with a drop-in layer, repeatedly
//! prune the smallest-magnitude drop-in weights, and rank features by how
//! long they survived and how large their weights ended up.

use serde::{Deserialize, Serialize};

use crate::data::SplitDataset;
use crate::dropin::{DropInLayer, PenaltyConfig};
use crate::error::{Error, Result};
use crate::nn::{train, Network, NetworkSpec, TrainConfig};
use crate::rng::{derive_seed, tags};
use crate::selectors::{FeatureRanking, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwpaConfig {
    /// Number of pruning steps `n`; the run trains `n + 1` times.
    pub steps: usize,
    /// Fraction `f` of features kept at the end.
    pub selection_factor: f64,
    pub train: TrainConfig,
    /// Penalties on the drop-in weights during every training round.
    pub penalty: Option<PenaltyConfig>,
}

impl Default for SwpaConfig {
    fn default() -> Self {
        SwpaConfig {
            steps: 4,
            selection_factor: 0.1,
            train: TrainConfig::default(),
            penalty: None,
        }
    }
}

impl SwpaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("step counter must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.selection_factor) {
            return Err(Error::config(format!(
                "selection factor {} must lie in [0, 1]",
                self.selection_factor
            )));
        }
        self.train.validate()?;
        if let Some(p) = &self.penalty {
            p.validate()?;
        }
        Ok(())
    }
}

/// Survivor count and per-step prune counts for a `(d, f, n)` schedule.
///
/// `floor((d - floor(f*d)) / n)` features are pruned at each of the first
/// `n - 1` steps and the remainder at the last step, so exactly
/// `floor(f*d)` features survive.
pub fn swpa_schedule(d: usize, f: f64, n: usize) -> Result<(usize, Vec<usize>)> {
    if n == 0 {
        return Err(Error::config("step counter must be >= 1"));
    }
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::config(format!("selection factor {f} must lie in [0, 1]")));
    }
    let survivors = (f * d as f64).floor() as usize;
    if survivors == 0 {
        return Err(Error::config(format!(
            "selection factor {f} keeps zero of {d} features"
        )));
    }
    let total = d - survivors;
    let base = total / n;
    let mut schedule = vec![base; n];
    schedule[n - 1] = total - base * (n - 1);
    Ok((survivors, schedule))
}

/// One pruning round of a SWPA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwpaRound {
    /// Training round index, starting at 1. Rounds >= 2 prune first.
    pub round: usize,
    /// Features pruned before this round, in ascending magnitude order.
    pub pruned: Vec<usize>,
    /// `|weight|` of each pruned feature at pruning time.
    pub pruned_magnitudes: Vec<f64>,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
}

/// Full result of a SWPA run: the ranking, the final drop-in state, and the
/// per-round record.
#[derive(Debug, Clone)]
pub struct SwpaOutcome {
    pub ranking: FeatureRanking,
    pub layer: DropInLayer,
    pub rounds: Vec<SwpaRound>,
    pub network: Network,
}

/// Run the full pruning protocol and return just the ranking.
pub fn swpa_rank(
    data: &SplitDataset,
    spec: &NetworkSpec,
    cfg: &SwpaConfig,
) -> Result<FeatureRanking> {
    Ok(swpa_run(data, spec, cfg)?.ranking)
}

/// Run the full pruning protocol.
///
/// Round 1 trains the freshly initialized network (drop-in weights start at
/// 1). Each later round prunes its scheduled share of the smallest
/// drop-in magnitudes and trains again, continuing from the best checkpoint
/// of the previous round. The ranking places survivors above pruned
/// features; survivors order by final `|weight|`, pruned features by
/// (pruning round, `|weight|` at pruning time), earlier-pruned ranking lower.
pub fn swpa_run(data: &SplitDataset, spec: &NetworkSpec, cfg: &SwpaConfig) -> Result<SwpaOutcome> {
    cfg.validate()?;
    let d = data.feature_count();
    if spec.input_dim() != d {
        return Err(Error::shape(format!(
            "network spec expects {} inputs, data has {d} features",
            spec.input_dim()
        )));
    }
    let n = cfg.steps;
    let (_, schedule) = swpa_schedule(d, cfg.selection_factor, n)?;

    let mut net = Network::with_dropin(
        spec.clone(),
        derive_seed(cfg.train.seed, &[tags::SWPA_ROUND, tags::INIT]),
    );
    let mut rounds = Vec::with_capacity(n + 1);
    // Pruned features in removal order: worst first within each round.
    let mut pruned_order: Vec<(usize, f64)> = Vec::with_capacity(d);

    for round in 1..=n + 1 {
        let mut pruned = Vec::new();
        let mut pruned_magnitudes = Vec::new();
        if round > 1 {
            let k = schedule[round - 2];
            let before: Vec<f64> = net.dropin().expect("drop-in present").weights().to_vec();
            pruned = net.prune_dropin(k)?;
            pruned_magnitudes = pruned.iter().map(|&j| before[j].abs()).collect();
            pruned_order.extend(pruned.iter().zip(&pruned_magnitudes).map(|(&j, &m)| (j, m)));
        }

        let mut round_cfg = cfg.train.reseeded(derive_seed(
            cfg.train.seed,
            &[tags::SWPA_ROUND, round as u64],
        ));
        round_cfg.penalty = cfg.penalty.clone();
        let result = train(net, data, &round_cfg)?;
        rounds.push(SwpaRound {
            round,
            pruned,
            pruned_magnitudes,
            best_val_accuracy: result.best_val_accuracy,
            epochs_run: result.epochs_run,
        });
        net = result.best_network;
    }

    let layer = net.dropin().expect("drop-in present").clone();
    let mut survivors: Vec<(usize, f64)> = layer
        .active_indices()
        .into_iter()
        .map(|j| (j, layer.weights()[j].abs()))
        .collect();
    survivors.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    // Scores are rank positions in the worst-to-best order, which encodes
    // the pruning history exactly.
    let mut scores = vec![0.0; d];
    for (pos, (j, _)) in pruned_order.iter().chain(survivors.iter()).enumerate() {
        scores[*j] = pos as f64;
    }
    let ranking = FeatureRanking::new(
        Method::Swpa,
        scores,
        serde_json::json!({
            "steps": n,
            "selection_factor": cfg.selection_factor,
            "seed": cfg.train.seed,
            "penalty": cfg.penalty,
        }),
    )?;
    Ok(SwpaOutcome {
        ranking,
        layer,
        rounds,
        network: net,
    })
}
