//! Elementwise multiplicative input layer with magnitude pruning.
//!
//! The layer holds one weight per input feature, all initialized to 1, so the
//! base network sees `o_j = w_j * x_j`. Pruning a weight to zero deletes the
//! corresponding feature. Two optional penalties act on the active weights
//! during training: an l1 term and a negative weight-variance term that pushes
//! the weights apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature multiplicative weights plus an active mask.
///
/// Invariant: masked-out positions hold weight exactly 0 and are never
/// updated again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropInLayer {
    weights: Vec<f64>,
    mask: Vec<bool>,
}

impl DropInLayer {
    /// Fresh layer over `d` features: all weights 1, all positions active.
    pub fn new(d: usize) -> Self {
        DropInLayer {
            weights: vec![1.0; d],
            mask: vec![true; d],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_active(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.mask[j]).collect()
    }

    /// Update an active weight. Masked positions are left untouched so the
    /// prune-is-permanent invariant cannot be violated by the optimizer.
    pub(crate) fn nudge_weight(&mut self, j: usize, delta: f64) {
        if self.mask[j] {
            self.weights[j] += delta;
        }
    }

    /// Elementwise product `w_j * x_j`; masked positions yield exactly 0.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::shape(format!(
                "input of length {} against drop-in layer of length {}",
                x.len(),
                self.len()
            )));
        }
        Ok(x.iter()
            .zip(self.weights.iter().zip(&self.mask))
            .map(|(&xi, (&wi, &mi))| if mi { wi * xi } else { 0.0 })
            .collect())
    }

    /// Zero out the `k` active weights of smallest absolute value and mask
    /// them permanently. Ties break toward the lowest feature index. Returns
    /// the pruned indices in the order they were removed (ascending
    /// magnitude at pruning time).
    pub fn prune_smallest(&mut self, k: usize) -> Result<Vec<usize>> {
        let active = self.active_count();
        if k > active {
            return Err(Error::config(format!(
                "cannot prune {} of {} active weights",
                k, active
            )));
        }
        let mut order: Vec<usize> = self.active_indices();
        order.sort_by(|&a, &b| {
            self.weights[a]
                .abs()
                .total_cmp(&self.weights[b].abs())
                .then(a.cmp(&b))
        });
        let pruned: Vec<usize> = order.into_iter().take(k).collect();
        for &j in &pruned {
            self.weights[j] = 0.0;
            self.mask[j] = false;
        }
        Ok(pruned)
    }

    /// `lambda * sum(|w_j|)` over active positions.
    pub fn l1_penalty(&self, lambda: f64) -> f64 {
        lambda
            * self
                .weights
                .iter()
                .zip(&self.mask)
                .filter(|(_, &m)| m)
                .map(|(w, _)| w.abs())
                .sum::<f64>()
    }

    /// `-gamma * Var[sigmoid(20*w - 0.5)]` over active positions, the
    /// formula taken literally. Population variance. Requires at least two
    /// active weights.
    pub fn wvl_penalty(&self, gamma: f64) -> Result<f64> {
        self.wvl_penalty_impl(gamma, false)
    }

    /// Variant of [`wvl_penalty`](Self::wvl_penalty) with the sigmoid
    /// centered at 0.5: `-gamma * Var[sigmoid(20*(w - 0.5))]`.
    pub fn wvl_penalty_centered(&self, gamma: f64) -> Result<f64> {
        self.wvl_penalty_impl(gamma, true)
    }

    fn wvl_penalty_impl(&self, gamma: f64, centered: bool) -> Result<f64> {
        let s = self.wvl_sigmoids(centered)?;
        if gamma == 0.0 {
            return Ok(0.0);
        }
        let m = s.len() as f64;
        let mean = s.iter().sum::<f64>() / m;
        let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        Ok(-gamma * var)
    }

    fn wvl_sigmoids(&self, centered: bool) -> Result<Vec<f64>> {
        let active = self.active_count();
        if active < 2 {
            return Err(Error::config(format!(
                "weight variance penalty needs at least 2 active weights, have {}",
                active
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&w, _)| {
                let z = if centered { 20.0 * (w - 0.5) } else { 20.0 * w - 0.5 };
                sigmoid(z)
            })
            .collect())
    }

    /// Accumulate `d(l1)/d(w_j)` into `grad` for active positions.
    /// Subgradient at w = 0 is taken as 0.
    pub(crate) fn accumulate_l1_gradient(&self, lambda: f64, grad: &mut [f64]) {
        for j in 0..self.len() {
            if self.mask[j] {
                grad[j] += lambda * self.weights[j].signum_or_zero();
            }
        }
    }

    /// Accumulate `d(wvl)/d(w_j)` into `grad` for active positions.
    pub(crate) fn accumulate_wvl_gradient(
        &self,
        gamma: f64,
        centered: bool,
        grad: &mut [f64],
    ) -> Result<()> {
        let s = self.wvl_sigmoids(centered)?;
        if gamma == 0.0 {
            return Ok(());
        }
        let m = s.len() as f64;
        let mean = s.iter().sum::<f64>() / m;
        let mut si = s.iter();
        for j in 0..self.len() {
            if self.mask[j] {
                let sj = *si.next().expect("one sigmoid per active weight");
                // d(-g*Var)/dw = -g * 2/m * (s - mean) * 20 * s * (1 - s)
                grad[j] += -gamma * (2.0 / m) * (sj - mean) * 20.0 * sj * (1.0 - sj);
            }
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Coefficients and switches for the drop-in penalties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// l1 coefficient.
    pub lambda: f64,
    /// Weight-variance coefficient.
    pub gamma: f64,
    pub enable_l1: bool,
    pub enable_wvl: bool,
    /// Use `sigmoid(20*(w - 0.5))` instead of the default `sigmoid(20*w - 0.5)`.
    pub wvl_centered: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda: 1.0,
            gamma: 10.0,
            enable_l1: false,
            enable_wvl: false,
            wvl_centered: false,
        }
    }
}

impl PenaltyConfig {
    pub fn l1_only() -> Self {
        PenaltyConfig {
            enable_l1: true,
            ..Default::default()
        }
    }

    pub fn wvl_only() -> Self {
        PenaltyConfig {
            enable_wvl: true,
            ..Default::default()
        }
    }

    pub fn l1_and_wvl() -> Self {
        PenaltyConfig {
            enable_l1: true,
            enable_wvl: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.gamma < 0.0 {
            return Err(Error::config("penalty coefficients must be >= 0"));
        }
        Ok(())
    }

    /// Total penalty value on the active weights of `layer`.
    pub fn value(&self, layer: &DropInLayer) -> Result<f64> {
        let mut total = 0.0;
        if self.enable_l1 {
            total += layer.l1_penalty(self.lambda);
        }
        if self.enable_wvl {
            total += if self.wvl_centered {
                layer.wvl_penalty_centered(self.gamma)?
            } else {
                layer.wvl_penalty(self.gamma)?
            };
        }
        Ok(total)
    }

    /// Accumulate the penalty gradient w.r.t. the drop-in weights into `grad`.
    pub(crate) fn accumulate_gradient(&self, layer: &DropInLayer, grad: &mut [f64]) -> Result<()> {
        if self.enable_l1 {
            layer.accumulate_l1_gradient(self.lambda, grad);
        }
        if self.enable_wvl {
            layer.accumulate_wvl_gradient(self.gamma, self.wvl_centered, grad)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_layer_is_identity() {
        let layer = DropInLayer::new(3);
        let x = vec![0.5, -2.0, 7.0];
        assert_eq!(layer.apply(&x).unwrap(), x);
    }

    #[test]
    fn masked_positions_yield_zero() {
        let mut layer = DropInLayer::new(3);
        layer.weights = vec![2.0, 0.0, -1.0];
        layer.mask = vec![true, false, true];
        assert_eq!(layer.apply(&[3.0, 5.0, 7.0]).unwrap(), vec![6.0, 0.0, -7.0]);

        let mut all_off = DropInLayer::new(2);
        all_off.prune_smallest(2).unwrap();
        assert_eq!(all_off.apply(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn apply_checks_length() {
        let layer = DropInLayer::new(3);
        assert!(layer.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn prune_removes_smallest_magnitudes() {
        let mut layer = DropInLayer::new(4);
        layer.weights = vec![0.5, -0.1, 0.3, 0.2];
        let pruned = layer.prune_smallest(2).unwrap();
        assert_eq!(pruned, vec![1, 3]);
        assert_eq!(layer.mask(), &[true, false, true, false]);
        assert_eq!(layer.weights(), &[0.5, 0.0, 0.3, 0.0]);
    }

    #[test]
    fn prune_zero_is_identity() {
        let mut layer = DropInLayer::new(3);
        layer.weights = vec![0.4, 0.2, 0.9];
        let before = layer.clone();
        assert!(layer.prune_smallest(0).unwrap().is_empty());
        assert_eq!(layer, before);
    }

    #[test]
    fn prune_ties_break_to_lowest_index() {
        let mut layer = DropInLayer::new(3);
        layer.weights = vec![0.2, -0.2, 0.5];
        let pruned = layer.prune_smallest(1).unwrap();
        assert_eq!(pruned, vec![0]);
    }

    #[test]
    fn prune_rejects_excess() {
        let mut layer = DropInLayer::new(2);
        layer.prune_smallest(1).unwrap();
        assert!(layer.prune_smallest(2).is_err());
    }

    #[test]
    fn active_magnitudes_dominate_pruned_at_prune_time() {
        let mut layer = DropInLayer::new(6);
        layer.weights = vec![0.9, -0.05, 0.4, -0.6, 0.02, 0.3];
        layer.prune_smallest(3).unwrap();
        let pruned_max = 0.3_f64; // |0.02|, |-0.05|, |0.3| were removed
        for j in layer.active_indices() {
            assert!(layer.weights()[j].abs() >= pruned_max);
        }
    }

    #[test]
    fn l1_penalty_values() {
        let mut layer = DropInLayer::new(3);
        assert_eq!(layer.l1_penalty(1.0), 3.0);

        layer.weights = vec![0.0, 0.0, 0.0];
        assert_eq!(layer.l1_penalty(1.0), 0.0);

        let mut layer = DropInLayer::new(2);
        layer.weights = vec![0.5, -0.25];
        assert_eq!(layer.l1_penalty(2.0), 1.5);
    }

    #[test]
    fn l1_counts_active_positions_only() {
        let mut layer = DropInLayer::new(3);
        layer.weights = vec![1.0, 4.0, 1.0];
        layer.prune_smallest(2).unwrap();
        assert_eq!(layer.l1_penalty(1.0), 4.0);
    }

    #[test]
    fn wvl_zero_when_weights_equal() {
        let layer = DropInLayer::new(4);
        assert_eq!(layer.wvl_penalty(10.0).unwrap(), 0.0);
    }

    #[test]
    fn wvl_matches_precomputed_value() {
        // Var over {sigmoid(-0.5), sigmoid(19.5)} evaluated at high precision.
        let mut layer = DropInLayer::new(2);
        layer.weights = vec![0.0, 1.0];
        let got = layer.wvl_penalty(10.0).unwrap();
        assert!((got - (-0.9686390369242327)).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn wvl_centered_variant_matches_precomputed_value() {
        let mut layer = DropInLayer::new(2);
        layer.weights = vec![0.0, 1.0];
        let got = layer.wvl_penalty_centered(10.0).unwrap();
        assert!((got - (-2.4995460419226405)).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn wvl_gamma_zero_is_zero() {
        let mut layer = DropInLayer::new(3);
        layer.weights = vec![0.1, 0.9, 0.4];
        assert_eq!(layer.wvl_penalty(0.0).unwrap(), 0.0);
    }

    #[test]
    fn wvl_needs_two_active_weights() {
        let mut layer = DropInLayer::new(2);
        layer.prune_smallest(1).unwrap();
        assert!(layer.wvl_penalty(10.0).is_err());
    }

    fn finite_diff_penalty(cfg: &PenaltyConfig, layer: &DropInLayer, j: usize, h: f64) -> f64 {
        let mut plus = layer.clone();
        plus.weights[j] += h;
        let mut minus = layer.clone();
        minus.weights[j] -= h;
        (cfg.value(&plus).unwrap() - cfg.value(&minus).unwrap()) / (2.0 * h)
    }

    #[test]
    fn penalty_gradients_match_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(42);
        for case in 0..20 {
            let d = 5;
            let mut layer = DropInLayer::new(d);
            for w in layer.weights.iter_mut() {
                *w = rng.random_range(0.05..1.5);
            }
            if case % 3 == 0 {
                layer.prune_smallest(2).unwrap();
            }
            let cfg = PenaltyConfig {
                lambda: 1.0,
                gamma: 10.0,
                enable_l1: case % 2 == 0,
                enable_wvl: true,
                wvl_centered: case % 5 == 0,
            };
            let mut grad = vec![0.0; d];
            cfg.accumulate_gradient(&layer, &mut grad).unwrap();
            for j in 0..d {
                if !layer.is_active(j) {
                    assert_eq!(grad[j], 0.0);
                    continue;
                }
                let fd = finite_diff_penalty(&cfg, &layer, j, 1e-6);
                let diff = (grad[j] - fd).abs();
                let denom = fd.abs().max(grad[j].abs());
                assert!(
                    diff <= 1e-7 || diff / denom < 1e-4,
                    "case {case} j {j}: analytic {} vs fd {}",
                    grad[j],
                    fd
                );
            }
        }
    }
}
