//! Feature ranking methods: drop-in weight pruning (SWPA), input-gradient
//! sensitivity (SBS), permutation importance (PFI), and a random baseline.

mod pfi;
mod sbs;
mod swpa;

pub use pfi::pfi_rank;
pub use sbs::{sbs_rank, sbs_rank_with_mode, SbsMode};
pub use swpa::{swpa_rank, swpa_run, swpa_schedule, SwpaConfig, SwpaOutcome, SwpaRound};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Swpa,
    Sbs,
    Pfi,
    Random,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Swpa => "swpa",
            Method::Sbs => "sbs",
            Method::Pfi => "pfi",
            Method::Random => "random",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "swpa" => Ok(Method::Swpa),
            "sbs" => Ok(Method::Sbs),
            "pfi" => Ok(Method::Pfi),
            "random" => Ok(Method::Random),
            other => Err(Error::config(format!(
                "unknown method {other:?}, expected swpa|sbs|pfi|random"
            ))),
        }
    }
}

/// Per-feature importance scores; higher means more important.
///
/// `ordering` lists feature indices from most to least important under a
/// total order of (score descending, index ascending), so top and bottom
/// slices are always disjoint and deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: Method,
    pub params: serde_json::Value,
    pub scores: Vec<f64>,
    ordering: Vec<usize>,
}

impl FeatureRanking {
    pub fn new(method: Method, scores: Vec<f64>, params: serde_json::Value) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::config("a ranking needs at least one feature"));
        }
        if !scores.iter().all(|s| s.is_finite()) {
            return Err(Error::config("ranking scores must be finite"));
        }
        let mut ordering: Vec<usize> = (0..scores.len()).collect();
        ordering.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(FeatureRanking {
            method,
            params,
            scores,
            ordering,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Feature indices from most to least important.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// The `floor(f*d)` highest and lowest ranked features. The bottom slice
    /// is returned worst-first. Requires `0 < f <= 0.5`, which also makes the
    /// two slices disjoint.
    pub fn top_bottom(&self, f: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        top_bottom(self, f)
    }

    /// Parse a ranking from its JSON form, recomputing the ordering.
    pub fn from_json(text: &str) -> Result<FeatureRanking> {
        let raw: FeatureRanking = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("ranking JSON: {e}")))?;
        FeatureRanking::new(raw.method, raw.scores, raw.params)
    }
}

/// Slice the top and bottom `floor(f*d)` features of a ranking.
pub fn top_bottom(ranking: &FeatureRanking, f: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(f > 0.0 && f <= 0.5) {
        return Err(Error::config(format!(
            "slice fraction {f} must lie in (0, 0.5]"
        )));
    }
    let d = ranking.len();
    let m = (f * d as f64).floor() as usize;
    if m == 0 {
        return Err(Error::config(format!(
            "fraction {f} of {d} features selects nothing"
        )));
    }
    let top = ranking.ordering[..m].to_vec();
    let bottom: Vec<usize> = ranking.ordering[d - m..].iter().rev().copied().collect();
    Ok((top, bottom))
}

/// Scores are a seeded uniform shuffle of `1..=d`.
pub fn random_rank(d: usize, seed: u64) -> Result<FeatureRanking> {
    if d == 0 {
        return Err(Error::config("a ranking needs at least one feature"));
    }
    use rand::seq::SliceRandom;
    let mut scores: Vec<f64> = (1..=d).map(|v| v as f64).collect();
    let mut rng = rng_from_seed(seed);
    scores.shuffle(&mut rng);
    FeatureRanking::new(Method::Random, scores, serde_json::json!({ "seed": seed }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_sorts_by_score_then_index() {
        let r = FeatureRanking::new(
            Method::Random,
            vec![0.5, 2.0, 0.5, -1.0],
            serde_json::Value::Null,
        )
        .unwrap();
        assert_eq!(r.ordering(), &[1, 0, 2, 3]);
    }

    #[test]
    fn top_bottom_identity_permutation() {
        let scores: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let r = FeatureRanking::new(Method::Random, scores, serde_json::Value::Null).unwrap();
        let (top, bottom) = r.top_bottom(0.25).unwrap();
        assert_eq!(top, vec![7, 6]);
        assert_eq!(bottom, vec![0, 1]);
    }

    #[test]
    fn top_bottom_sizes_match_table_counts() {
        for (d, expect) in [(561usize, 56usize), (617, 61), (784, 78)] {
            let scores: Vec<f64> = (0..d).map(|v| v as f64).collect();
            let r = FeatureRanking::new(Method::Random, scores, serde_json::Value::Null).unwrap();
            let (top, bottom) = r.top_bottom(0.1).unwrap();
            assert_eq!(top.len(), expect, "d={d}");
            assert_eq!(bottom.len(), expect);
            assert!(top.iter().all(|t| !bottom.contains(t)));
        }
    }

    #[test]
    fn top_bottom_rejects_empty_slice() {
        let r =
            FeatureRanking::new(Method::Random, vec![1.0, 2.0], serde_json::Value::Null).unwrap();
        assert!(r.top_bottom(0.1).is_err()); // floor(0.2) = 0
        assert!(r.top_bottom(0.0).is_err());
        assert!(r.top_bottom(0.6).is_err());
    }

    #[test]
    fn random_rank_is_seeded() {
        let a = random_rank(10, 3).unwrap();
        let b = random_rank(10, 3).unwrap();
        assert_eq!(a, b);
        let c = random_rank(10, 4).unwrap();
        assert_ne!(a.scores, c.scores);

        let single = random_rank(1, 0).unwrap();
        assert_eq!(single.scores, vec![1.0]);
    }

    #[test]
    fn random_rank_top1_is_roughly_uniform() {
        // Binomial(1000, 1/10) has mean 100 and sd ~9.5; a +/-40 band is
        // a generous > 4-sigma bound.
        let mut counts = [0usize; 10];
        for seed in 0..1000 {
            let r = random_rank(10, seed).unwrap();
            counts[r.ordering()[0]] += 1;
        }
        for (feat, &c) in counts.iter().enumerate() {
            assert!(
                (60..=140).contains(&c),
                "feature {feat} won top-1 {c} times"
            );
        }
    }

    #[test]
    fn ranking_json_round_trip() {
        let r = FeatureRanking::new(
            Method::Sbs,
            vec![0.25, 1.5, 0.125],
            serde_json::json!({"mode": "mean_then_abs"}),
        )
        .unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"ordering\""));
        let back = FeatureRanking::from_json(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn from_json_rejects_bad_scores() {
        let text = r#"{"method":"sbs","params":null,"scores":[],"ordering":[]}"#;
        assert!(FeatureRanking::from_json(text).is_err());
    }
}
