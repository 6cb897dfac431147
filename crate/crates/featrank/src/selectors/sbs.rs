//! Sensitivity-based selection: rank features by the input gradient of each
//! training instance's true-class probability, averaged over the train split.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SplitDataset;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::selectors::{FeatureRanking, Method};

/// How per-instance gradients aggregate into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbsMode {
    /// `|mean(gradient)|` per feature — the default. Signed gradients can
    /// cancel across instances.
    MeanThenAbs,
    /// `mean(|gradient|)` per feature, offered for experimentation.
    AbsThenMean,
}

impl Default for SbsMode {
    fn default() -> Self {
        SbsMode::MeanThenAbs
    }
}

/// Rank features by absolute mean input gradient over the train split.
pub fn sbs_rank(data: &SplitDataset, net: &Network) -> Result<FeatureRanking> {
    sbs_rank_with_mode(data, net, SbsMode::MeanThenAbs)
}

pub fn sbs_rank_with_mode(
    data: &SplitDataset,
    net: &Network,
    mode: SbsMode,
) -> Result<FeatureRanking> {
    if !net.params_finite() {
        return Err(Error::config(
            "network parameters are not finite; rank with a successfully trained network",
        ));
    }
    let d = data.feature_count();
    if net.input_dim() != d {
        return Err(Error::shape(format!(
            "network expects {} inputs, data has {d} features",
            net.input_dim()
        )));
    }
    if net.output_dim() != data.class_count() {
        return Err(Error::shape(format!(
            "network has {} outputs, data has {} classes",
            net.output_dim(),
            data.class_count()
        )));
    }

    let train = &data.train;
    let n = train.n();
    // Deterministic parallel fold: fixed chunks, partial sums combined in
    // chunk order.
    let chunk_rows = 256usize;
    let ranges: Vec<(usize, usize)> = (0..n)
        .step_by(chunk_rows)
        .map(|start| (start, (start + chunk_rows).min(n)))
        .collect();
    let partials: Vec<Result<Vec<f64>>> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = vec![0.0; d];
            for i in start..end {
                let g = net.input_gradient(train.x().row(i), train.y()[i])?;
                match mode {
                    SbsMode::MeanThenAbs => {
                        for (a, &gv) in acc.iter_mut().zip(&g) {
                            *a += gv;
                        }
                    }
                    SbsMode::AbsThenMean => {
                        for (a, &gv) in acc.iter_mut().zip(&g) {
                            *a += gv.abs();
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();

    let mut totals = vec![0.0; d];
    for partial in partials {
        let partial = partial?;
        for (t, v) in totals.iter_mut().zip(partial) {
            *t += v;
        }
    }
    let scores: Vec<f64> = totals
        .into_iter()
        .map(|t| {
            let mean = t / n as f64;
            match mode {
                SbsMode::MeanThenAbs => mean.abs(),
                SbsMode::AbsThenMean => mean,
            }
        })
        .collect();

    FeatureRanking::new(
        Method::Sbs,
        scores,
        serde_json::json!({ "mode": mode, "split": "train" }),
    )
}
