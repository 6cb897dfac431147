//! Dataset ingestion, label handling, normalization, and the train/val/test
//! split.

mod delimited;
mod idx;
pub mod synth;

pub use delimited::{load_delimited, save_delimited, Delimiter, LabelSource};
pub use idx::load_idx;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dense2D;
use crate::rng::{rng_from_seed, shuffled_indices};

/// Feature matrix plus integer class labels in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Dense2D,
    y: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    /// Construct with `class_count` inferred as `max(y) + 1`. Every class in
    /// `[0, class_count)` must appear at least once.
    pub fn new(x: Dense2D, y: Vec<usize>) -> Result<Self> {
        let class_count = y.iter().max().map_or(0, |&m| m + 1);
        let ds = Dataset::with_class_count(x, y, class_count)?;
        let mut seen = vec![false; ds.class_count];
        for &label in &ds.y {
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::config(format!(
                "class {} never appears among {} classes",
                missing, ds.class_count
            )));
        }
        Ok(ds)
    }

    /// Construct with an explicit class count. Labels must lie in
    /// `[0, class_count)` but classes may be absent, as happens in the
    /// sub-datasets a split produces.
    pub fn with_class_count(x: Dense2D, y: Vec<usize>, class_count: usize) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::config("dataset needs at least one row"));
        }
        if x.rows() != y.len() {
            return Err(Error::shape(format!(
                "{} feature rows against {} labels",
                x.rows(),
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&label| label >= class_count) {
            return Err(Error::config(format!(
                "label {} out of range for {} classes",
                bad, class_count
            )));
        }
        if !x.is_finite() {
            return Err(Error::config("feature matrix contains non-finite values"));
        }
        Ok(Dataset { x, y, class_count })
    }

    #[inline]
    pub fn x(&self) -> &Dense2D {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[usize] {
        &self.y
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn feature_count(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Restrict to the given feature columns, keeping labels.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            x: self.x.select_columns(columns)?,
            y: self.y.clone(),
            class_count: self.class_count,
        })
    }

    /// Seeded uniform subsample of `rows` rows without replacement.
    pub fn subsample(&self, rows: usize, seed: u64) -> Result<Dataset> {
        if rows == 0 || rows > self.n() {
            return Err(Error::config(format!(
                "cannot subsample {} of {} rows",
                rows,
                self.n()
            )));
        }
        let mut rng = rng_from_seed(seed);
        let idx = shuffled_indices(self.n(), &mut rng);
        let keep = &idx[..rows];
        Ok(Dataset {
            x: self.x.select_rows(keep)?,
            y: keep.iter().map(|&i| self.y[i]).collect(),
            class_count: self.class_count,
        })
    }
}

/// Disjoint train/validation/test partition with shared feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl SplitDataset {
    pub fn feature_count(&self) -> usize {
        self.train.feature_count()
    }

    pub fn class_count(&self) -> usize {
        self.train.class_count()
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<SplitDataset> {
        Ok(SplitDataset {
            train: self.train.select_columns(columns)?,
            val: self.val.select_columns(columns)?,
            test: self.test.select_columns(columns)?,
        })
    }
}

/// Seeded shuffle followed by contiguous cuts at `floor(r0*n)` and
/// `floor((r0+r1)*n)`. Returns the split plus warnings for classes that are
/// absent from the train portion (not fatal).
pub fn split(
    ds: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(SplitDataset, Vec<String>)> {
    let (r0, r1, r2) = ratios;
    if !(r0 > 0.0 && r1 > 0.0 && r2 > 0.0) || ((r0 + r1 + r2) - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split ratios ({r0}, {r1}, {r2}) must be positive and sum to 1"
        )));
    }
    let n = ds.n();
    let cut1 = (r0 * n as f64).floor() as usize;
    let cut2 = ((r0 + r1) * n as f64).floor() as usize;
    if cut1 == 0 || cut2 <= cut1 || cut2 >= n {
        return Err(Error::config(format!(
            "split of {n} rows at ({r0}, {r1}, {r2}) leaves an empty part"
        )));
    }

    let mut rng = rng_from_seed(seed);
    let order = shuffled_indices(n, &mut rng);
    let take = |range: &[usize]| -> Result<Dataset> {
        Ok(Dataset {
            x: ds.x.select_rows(range)?,
            y: range.iter().map(|&i| ds.y[i]).collect(),
            class_count: ds.class_count,
        })
    };
    let splits = SplitDataset {
        train: take(&order[..cut1])?,
        val: take(&order[cut1..cut2])?,
        test: take(&order[cut2..])?,
    };

    let mut warnings = Vec::new();
    let mut seen = vec![false; ds.class_count()];
    for &label in splits.train.y() {
        seen[label] = true;
    }
    for (class, &present) in seen.iter().enumerate() {
        if !present {
            warnings.push(format!("class {class} is absent from the train split"));
        }
    }
    Ok((splits, warnings))
}

/// Feature normalization modes. Statistics always come from the train split
/// and are applied to all three splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMode {
    None,
    MinMax,
    ZScore,
}

impl Default for NormalizeMode {
    fn default() -> Self {
        NormalizeMode::None
    }
}

/// Apply per-feature normalization with train-split statistics.
///
/// Min-max maps the train range to `[0, 1]`; z-score centers and scales by
/// the population standard deviation. Features with zero range or zero
/// variance on the train split map to 0 everywhere.
pub fn normalize(splits: SplitDataset, mode: NormalizeMode) -> SplitDataset {
    match mode {
        NormalizeMode::None => splits,
        NormalizeMode::MinMax => {
            let d = splits.feature_count();
            let train = splits.train.x();
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for i in 0..train.rows() {
                for (j, &v) in train.row(i).iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            apply_affine(splits, &|j, v| {
                let range = hi[j] - lo[j];
                if range == 0.0 {
                    0.0
                } else {
                    (v - lo[j]) / range
                }
            })
        }
        NormalizeMode::ZScore => {
            let d = splits.feature_count();
            let train = splits.train.x();
            let n = train.rows() as f64;
            let mut mean = vec![0.0; d];
            for i in 0..train.rows() {
                for (j, &v) in train.row(i).iter().enumerate() {
                    mean[j] += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= n;
            }
            let mut var = vec![0.0; d];
            for i in 0..train.rows() {
                for (j, &v) in train.row(i).iter().enumerate() {
                    var[j] += (v - mean[j]) * (v - mean[j]);
                }
            }
            let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
            apply_affine(splits, &|j, v| {
                if std[j] == 0.0 {
                    0.0
                } else {
                    (v - mean[j]) / std[j]
                }
            })
        }
    }
}

fn apply_affine(mut splits: SplitDataset, f: &dyn Fn(usize, f64) -> f64) -> SplitDataset {
    for part in [&mut splits.train, &mut splits.val, &mut splits.test] {
        let cols = part.x.cols();
        for (idx, v) in part.x.data_mut().iter_mut().enumerate() {
            *v = f(idx % cols, *v);
        }
    }
    splits
}
