//! Permutation feature importance: the mean validation-accuracy drop over
//! `c` random permutations of each feature column. The model stays fixed;
//! only the evaluation matrix changes.

use rayon::prelude::*;

use crate::data::SplitDataset;
use crate::error::{Error, Result};
use crate::nn::{Evaluator, Network};
use crate::rng::{derive_seed, rng_from_seed, shuffled_indices, tags};
use crate::selectors::{FeatureRanking, Method};

/// Score every feature as `(1/c) * sum_t [A(X,Y) - A(X_perm,Y)]` on the
/// validation split.
///
/// The permutation for `(dim, trial)` is a Fisher-Yates shuffle of the row
/// indices drawn from `derive_seed(seed, [PFI, dim, trial])`; that stream
/// definition is part of the contract so results can be reproduced
/// externally. Feature columns are evaluated in parallel; each trial
/// materializes the permuted matrix explicitly.
pub fn pfi_rank(
    data: &SplitDataset,
    net: &Network,
    trials: usize,
    seed: u64,
) -> Result<FeatureRanking> {
    if trials == 0 {
        return Err(Error::config("permutation trials must be >= 1"));
    }
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
    let x = data.val.x();
    let y = data.val.y();
    let n = x.rows();
    let baseline = net.accuracy(x, y)?;

    // Chunk the feature loop so each worker reuses one permuted-matrix
    // buffer and evaluator across its columns.
    let chunk_dims = 8usize;
    let ranges: Vec<(usize, usize)> = (0..d)
        .step_by(chunk_dims)
        .map(|start| (start, (start + chunk_dims).min(d)))
        .collect();
    let partials: Vec<Result<Vec<f64>>> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let mut scratch = x.clone();
            let mut eval = Evaluator::new(net);
            let mut scores = Vec::with_capacity(end - start);
            for dim in start..end {
                let mut total = 0.0;
                for trial in 0..trials {
                    let mut rng =
                        rng_from_seed(derive_seed(seed, &[tags::PFI, dim as u64, trial as u64]));
                    let perm = shuffled_indices(n, &mut rng);
                    for (i, &src) in perm.iter().enumerate() {
                        scratch.set(i, dim, x.get(src, dim));
                    }
                    total += baseline - eval.accuracy(net, &scratch, y)?;
                }
                // Restore the column for the next dim.
                for i in 0..n {
                    scratch.set(i, dim, x.get(i, dim));
                }
                scores.push(total / trials as f64);
            }
            Ok(scores)
        })
        .collect();

    let mut scores = Vec::with_capacity(d);
    for partial in partials {
        scores.extend(partial?);
    }
    FeatureRanking::new(
        Method::Pfi,
        scores,
        serde_json::json!({ "trials": trials, "seed": seed, "split": "validation" }),
    )
}
