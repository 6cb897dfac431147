//! Dense feedforward classifier with manual forward and backward passes.
//!
//! The network is a plain MLP: affine layers with an elementwise activation
//! on hidden layers and a softmax over the final logits. An optional drop-in
//! layer multiplies the input elementwise before the first affine layer and
//! trains jointly with the rest of the parameters.

mod train;

pub use train::{train, EpochStats, TrainConfig, TrainResult};

use serde::{Deserialize, Serialize};

use crate::dropin::{DropInLayer, PenaltyConfig};
use crate::error::{Error, Result};
use crate::linalg::Dense2D;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Layer geometry: input dimension first, class count last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config(
                "a network needs at least an input and an output layer",
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("all layer sizes must be >= 1"));
        }
        Ok(NetworkSpec {
            layer_sizes,
            activation,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight matrices.
    #[inline]
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// Parameter gradients in the same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Dense2D>,
    pub biases: Vec<Vec<f64>>,
    pub dropin: Option<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .weights
                .iter()
                .map(|w| Dense2D::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            dropin: net.dropin.as_ref().map(|d| vec![0.0; d.len()]),
        }
    }

    fn clear(&mut self) {
        for w in &mut self.weights {
            w.data_mut().fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
        if let Some(d) = &mut self.dropin {
            d.fill(0.0);
        }
    }
}

/// Feedforward network with parameters, momentum buffers, and an optional
/// drop-in input layer.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    dropin: Option<DropInLayer>,
    weights: Vec<Dense2D>,
    biases: Vec<Vec<f64>>,
    vel_weights: Vec<Dense2D>,
    vel_biases: Vec<Vec<f64>>,
    vel_dropin: Option<Vec<f64>>,
}

impl Network {
    /// He-style uniform initialization of the affine layers from `seed`;
    /// biases start at zero.
    pub fn new(spec: NetworkSpec, seed: u64) -> Network {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::with_capacity(spec.depth());
        let mut biases = Vec::with_capacity(spec.depth());
        for l in 0..spec.depth() {
            let fan_in = spec.layer_sizes[l];
            let fan_out = spec.layer_sizes[l + 1];
            let limit = (6.0 / fan_in as f64).sqrt();
            let mut w = Dense2D::zeros(fan_in, fan_out);
            for v in w.data_mut() {
                *v = rng.random_range(-limit..limit);
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        let vel_weights = weights
            .iter()
            .map(|w| Dense2D::zeros(w.rows(), w.cols()))
            .collect();
        let vel_biases = biases.iter().map(|b| vec![0.0; b.len()]).collect();
        Network {
            spec,
            dropin: None,
            weights,
            biases,
            vel_weights,
            vel_biases,
            vel_dropin: None,
        }
    }

    /// Like [`new`](Self::new) but with a fresh all-ones drop-in layer in
    /// front of the first affine layer. The drop-in weights are excluded
    /// from random initialization.
    pub fn with_dropin(spec: NetworkSpec, seed: u64) -> Network {
        let d = spec.input_dim();
        let mut net = Network::new(spec, seed);
        net.dropin = Some(DropInLayer::new(d));
        net.vel_dropin = Some(vec![0.0; d]);
        net
    }

    /// Assemble from explicit parameters, validating shapes.
    pub fn from_parts(
        spec: NetworkSpec,
        weights: Vec<Dense2D>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Network> {
        if weights.len() != spec.depth() || biases.len() != spec.depth() {
            return Err(Error::shape(format!(
                "expected {} weight matrices and bias vectors",
                spec.depth()
            )));
        }
        for l in 0..spec.depth() {
            if weights[l].rows() != spec.layer_sizes[l] || weights[l].cols() != spec.layer_sizes[l + 1]
            {
                return Err(Error::shape(format!(
                    "weights[{l}] is {}x{}, expected {}x{}",
                    weights[l].rows(),
                    weights[l].cols(),
                    spec.layer_sizes[l],
                    spec.layer_sizes[l + 1]
                )));
            }
            if biases[l].len() != spec.layer_sizes[l + 1] {
                return Err(Error::shape(format!(
                    "biases[{l}] has length {}, expected {}",
                    biases[l].len(),
                    spec.layer_sizes[l + 1]
                )));
            }
        }
        let vel_weights = weights
            .iter()
            .map(|w| Dense2D::zeros(w.rows(), w.cols()))
            .collect();
        let vel_biases = biases.iter().map(|b| vec![0.0; b.len()]).collect();
        Ok(Network {
            spec,
            dropin: None,
            weights,
            biases,
            vel_weights,
            vel_biases,
            vel_dropin: None,
        })
    }

    #[inline]
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    #[inline]
    pub fn dropin(&self) -> Option<&DropInLayer> {
        self.dropin.as_ref()
    }

    #[inline]
    pub fn weights(&self) -> &[Dense2D] {
        &self.weights
    }

    #[inline]
    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Mutable parameter access for perturbation-style tests. Shapes must be
    /// preserved.
    pub fn weights_mut(&mut self) -> &mut [Dense2D] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    /// Overwrite an active drop-in weight. Masked positions are permanent
    /// zeros and cannot be written.
    pub fn set_dropin_weight(&mut self, j: usize, v: f64) -> Result<()> {
        let layer = self
            .dropin
            .as_mut()
            .ok_or_else(|| Error::config("network has no drop-in layer"))?;
        if j >= layer.len() {
            return Err(Error::shape(format!(
                "drop-in index {j} out of range for {}",
                layer.len()
            )));
        }
        if !layer.is_active(j) {
            return Err(Error::config(format!("drop-in weight {j} is pruned")));
        }
        layer.nudge_weight(j, v - layer.weights()[j]);
        Ok(())
    }

    /// Prune the `k` smallest-magnitude active drop-in weights, zeroing
    /// their momentum so they can never move again.
    pub fn prune_dropin(&mut self, k: usize) -> Result<Vec<usize>> {
        let layer = self
            .dropin
            .as_mut()
            .ok_or_else(|| Error::config("network has no drop-in layer"))?;
        let pruned = layer.prune_smallest(k)?;
        if let Some(vel) = &mut self.vel_dropin {
            for &j in &pruned {
                vel[j] = 0.0;
            }
        }
        Ok(pruned)
    }

    /// Input dimensionality expected by [`forward`](Self::forward).
    #[inline]
    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn params_finite(&self) -> bool {
        self.weights.iter().all(Dense2D::is_finite)
            && self
                .biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
            && self
                .dropin
                .as_ref()
                .map_or(true, |d| d.weights().iter().all(|v| v.is_finite()))
    }

    /// Class probabilities for a batch, one row per input row.
    pub fn forward(&self, batch: &Dense2D) -> Result<Dense2D> {
        let mut ws = Workspace::new(self, batch.rows());
        self.forward_cached(batch, &mut ws)?;
        let mut probs = Dense2D::zeros(batch.rows(), self.output_dim());
        for i in 0..batch.rows() {
            softmax_row(ws.logits.row(i), probs.row_mut(i));
        }
        Ok(probs)
    }

    /// Fraction of rows whose argmax probability matches the label. Ties
    /// break toward the lowest class index.
    pub fn accuracy(&self, x: &Dense2D, y: &[usize]) -> Result<f64> {
        Evaluator::new(self).accuracy(self, x, y)
    }

    /// Gradient of the softmax probability of `target_class` with respect to
    /// every input feature, for a single sample.
    pub fn input_gradient(&self, x: &[f64], target_class: usize) -> Result<Vec<f64>> {
        let d = self
            .dropin
            .as_ref()
            .map_or(self.input_dim(), DropInLayer::len);
        if x.len() != d {
            return Err(Error::shape(format!(
                "input of length {} against input dim {d}",
                x.len()
            )));
        }
        if target_class >= self.output_dim() {
            return Err(Error::shape(format!(
                "target class {target_class} out of range for {} classes",
                self.output_dim()
            )));
        }
        let batch = Dense2D::from_vec(1, d, x.to_vec())?;
        let mut ws = Workspace::new(self, 1);
        self.forward_cached(&batch, &mut ws)?;

        // d p_t / d z_k = p_t * (delta_tk - p_k)
        let mut probs = vec![0.0; self.output_dim()];
        softmax_row(ws.logits.row(0), &mut probs);
        let pt = probs[target_class];
        for (k, g) in ws.dlogits.row_mut(0).iter_mut().enumerate() {
            let delta = if k == target_class { 1.0 } else { 0.0 };
            *g = pt * (delta - probs[k]);
        }

        let mut grads = Gradients::zeros_like(self);
        self.backward_cached(&batch, &mut ws, &mut grads, true)?;

        // Chain through the drop-in multiplication to reach the raw input.
        let da0 = ws.dacts[0].row(0);
        let grad = match &self.dropin {
            Some(layer) => da0
                .iter()
                .zip(layer.weights())
                .map(|(&g, &w)| g * w)
                .collect(),
            None => da0.to_vec(),
        };
        Ok(grad)
    }

    /// Mean cross-entropy of a batch plus any drop-in penalty.
    pub fn batch_loss(
        &self,
        x: &Dense2D,
        y: &[usize],
        penalty: Option<&PenaltyConfig>,
    ) -> Result<f64> {
        let mut ws = Workspace::new(self, x.rows());
        self.forward_cached(x, &mut ws)?;
        let loss = self.loss_and_logit_grad(y, &mut ws)?;
        Ok(loss + self.penalty_value(penalty)?)
    }

    /// Mean cross-entropy plus penalties, together with gradients for every
    /// parameter. The gradient of a masked drop-in weight is exactly 0.
    pub fn batch_gradients(
        &self,
        x: &Dense2D,
        y: &[usize],
        penalty: Option<&PenaltyConfig>,
    ) -> Result<(f64, Gradients)> {
        let mut ws = Workspace::new(self, x.rows());
        let mut grads = Gradients::zeros_like(self);
        let loss = self.loss_grads_into(x, y, penalty, &mut ws, &mut grads)?;
        Ok((loss, grads))
    }

    fn penalty_value(&self, penalty: Option<&PenaltyConfig>) -> Result<f64> {
        match (penalty, &self.dropin) {
            (Some(cfg), Some(layer)) => cfg.value(layer),
            _ => Ok(0.0),
        }
    }

    /// One fused forward/backward pass reusing `ws` and `grads` buffers.
    pub(crate) fn loss_grads_into(
        &self,
        x: &Dense2D,
        y: &[usize],
        penalty: Option<&PenaltyConfig>,
        ws: &mut Workspace,
        grads: &mut Gradients,
    ) -> Result<f64> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!(
                "{} rows against {} labels",
                x.rows(),
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= self.output_dim()) {
            return Err(Error::shape(format!(
                "label {bad} out of range for {} classes",
                self.output_dim()
            )));
        }
        self.forward_cached(x, ws)?;
        let mut loss = self.loss_and_logit_grad(y, ws)?;
        grads.clear();
        self.backward_cached(x, ws, grads, false)?;
        if let (Some(cfg), Some(layer)) = (penalty, &self.dropin) {
            loss += cfg.value(layer)?;
            let grad = grads.dropin.as_mut().expect("dropin gradient buffer");
            cfg.accumulate_gradient(layer, grad)?;
        }
        Ok(loss)
    }

    /// Forward pass caching every activation; `ws.logits` holds the final
    /// affine outputs.
    fn forward_cached(&self, batch: &Dense2D, ws: &mut Workspace) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        if batch.rows() != ws.batch {
            *ws = Workspace::new(self, batch.rows());
        }
        let act = self.spec.activation;

        match &self.dropin {
            Some(layer) => {
                let w = layer.weights();
                for i in 0..batch.rows() {
                    for ((o, &xv), &wv) in ws.acts[0]
                        .row_mut(i)
                        .iter_mut()
                        .zip(batch.row(i))
                        .zip(w)
                    {
                        *o = xv * wv;
                    }
                }
            }
            None => ws.acts[0].data_mut().copy_from_slice(batch.data()),
        }

        let depth = self.spec.depth();
        for l in 0..depth {
            let (inputs, rest) = ws.acts.split_at_mut(l + 1);
            let out = if l + 1 < depth {
                &mut rest[0]
            } else {
                &mut ws.logits
            };
            affine_into(&inputs[l], &self.weights[l], &self.biases[l], out);
            if l + 1 < depth {
                for v in out.data_mut() {
                    *v = act.apply(*v);
                }
            }
        }
        Ok(())
    }

    /// Computes the mean cross-entropy from cached logits and writes the
    /// softmax-cross-entropy gradient `(p - onehot)/B` into `ws.dlogits`.
    fn loss_and_logit_grad(&self, y: &[usize], ws: &mut Workspace) -> Result<f64> {
        let b = ws.batch as f64;
        let mut loss = 0.0;
        for i in 0..ws.batch {
            let z = ws.logits.row(i);
            let dz = ws.dlogits.row_mut(i);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (&zi, d) in z.iter().zip(dz.iter_mut()) {
                let e = (zi - max).exp();
                *d = e;
                sum += e;
            }
            let lse = max + sum.ln();
            loss += lse - z[y[i]];
            for (k, d) in dz.iter_mut().enumerate() {
                let p = *d / sum;
                let onehot = if k == y[i] { 1.0 } else { 0.0 };
                *d = (p - onehot) / b;
            }
        }
        Ok(loss / b)
    }

    /// Backpropagate from `ws.dlogits` into `grads`, accumulating. When
    /// `need_input_grad` is set, `ws.dacts[0]` receives the gradient with
    /// respect to the post-drop-in input.
    fn backward_cached(
        &self,
        raw_batch: &Dense2D,
        ws: &mut Workspace,
        grads: &mut Gradients,
        need_input_grad: bool,
    ) -> Result<()> {
        let depth = self.spec.depth();
        let act = self.spec.activation;
        let want_da0 = need_input_grad || self.dropin.is_some();
        let batch = ws.batch;
        ws.ensure_backward_buffers(self);

        for l in (0..depth).rev() {
            let (dacts_lo, dacts_hi) = ws.dacts.split_at_mut(l + 1);
            let upstream: &Dense2D = if l + 1 == depth {
                &ws.dlogits
            } else {
                &dacts_hi[0]
            };

            // dW[l] += acts[l]^T · upstream ; db[l] += column sums
            let inputs = &ws.acts[l];
            let dw = &mut grads.weights[l];
            for i in 0..batch {
                let grow = upstream.row(i);
                for (k, &a) in inputs.row(i).iter().enumerate() {
                    if a != 0.0 {
                        for (dwv, &g) in dw.row_mut(k).iter_mut().zip(grow) {
                            *dwv += a * g;
                        }
                    }
                }
                for (dbv, &g) in grads.biases[l].iter_mut().zip(grow) {
                    *dbv += g;
                }
            }

            if l == 0 && !want_da0 {
                break;
            }

            // dacts[l] = upstream · W[l]^T, then activation derivative for
            // hidden layers.
            let w = &self.weights[l];
            let dst_mat = &mut dacts_lo[l];
            for i in 0..batch {
                let grow = upstream.row(i);
                let dst = dst_mat.row_mut(i);
                for (k, d) in dst.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (&g, &wv) in grow.iter().zip(w.row(k)) {
                        acc += g * wv;
                    }
                    *d = acc;
                }
            }
            if l > 0 {
                for (d, &a) in dst_mat.data_mut().iter_mut().zip(ws.acts[l].data()) {
                    *d *= act.grad_from_output(a);
                }
            }
        }

        if let Some(layer) = &self.dropin {
            let grad = grads.dropin.as_mut().expect("dropin gradient buffer");
            let da0 = &ws.dacts[0];
            for i in 0..ws.batch {
                for (j, (&g, &xv)) in da0.row(i).iter().zip(raw_batch.row(i)).enumerate() {
                    if layer.is_active(j) {
                        grad[j] += g * xv;
                    }
                }
            }
        }
        Ok(())
    }

    /// Momentum-SGD update: `v = momentum*v + g; p -= lr*v`.
    pub(crate) fn sgd_step(&mut self, grads: &Gradients, lr: f64, momentum: f64) {
        for l in 0..self.weights.len() {
            for ((w, v), &g) in self.weights[l]
                .data_mut()
                .iter_mut()
                .zip(self.vel_weights[l].data_mut())
                .zip(grads.weights[l].data())
            {
                *v = momentum * *v + g;
                *w -= lr * *v;
            }
            for ((b, v), &g) in self.biases[l]
                .iter_mut()
                .zip(self.vel_biases[l].iter_mut())
                .zip(grads.biases[l].iter())
            {
                *v = momentum * *v + g;
                *b -= lr * *v;
            }
        }
        if let (Some(layer), Some(vel), Some(grad)) =
            (&mut self.dropin, &mut self.vel_dropin, &grads.dropin)
        {
            for j in 0..layer.len() {
                if layer.is_active(j) {
                    vel[j] = momentum * vel[j] + grad[j];
                    layer.nudge_weight(j, -lr * vel[j]);
                }
            }
        }
    }
}

/// Reusable per-batch buffers.
pub(crate) struct Workspace {
    batch: usize,
    /// `acts[0]` is the post-drop-in input; `acts[l]` for `l >= 1` are hidden
    /// activations.
    acts: Vec<Dense2D>,
    logits: Dense2D,
    dlogits: Dense2D,
    /// Allocated on first backward pass.
    dacts: Vec<Dense2D>,
}

impl Workspace {
    pub(crate) fn new(net: &Network, batch: usize) -> Workspace {
        let sizes = &net.spec.layer_sizes;
        let hidden = sizes.len() - 1;
        let acts = (0..hidden)
            .map(|l| Dense2D::zeros(batch, sizes[l]))
            .collect();
        Workspace {
            batch,
            acts,
            logits: Dense2D::zeros(batch, net.output_dim()),
            dlogits: Dense2D::zeros(batch, net.output_dim()),
            dacts: Vec::new(),
        }
    }

    fn ensure_backward_buffers(&mut self, net: &Network) {
        let sizes = &net.spec.layer_sizes;
        let hidden = sizes.len() - 1;
        if self.dacts.len() != hidden || self.dacts.first().map(Dense2D::rows) != Some(self.batch) {
            self.dacts = (0..hidden)
                .map(|l| Dense2D::zeros(self.batch, sizes[l]))
                .collect();
        }
    }
}

/// Reusable evaluation state for repeated accuracy calls on matrices that
/// change between calls (permutation importance hammers this path).
pub(crate) struct Evaluator {
    buf: Dense2D,
    ws: Workspace,
    chunk: usize,
}

impl Evaluator {
    const CHUNK: usize = 512;

    pub(crate) fn new(net: &Network) -> Evaluator {
        Evaluator {
            buf: Dense2D::zeros(Self::CHUNK, net.input_dim()),
            ws: Workspace::new(net, Self::CHUNK),
            chunk: Self::CHUNK,
        }
    }

    /// Argmax accuracy over logits, which equals argmax over probabilities,
    /// ties included. Rows are staged through a fixed-size buffer; stale rows
    /// beyond the live range are computed but ignored, which cannot affect
    /// the live rows because every forward operation is row-independent.
    pub(crate) fn accuracy(&mut self, net: &Network, x: &Dense2D, y: &[usize]) -> Result<f64> {
        if x.rows() == 0 {
            return Err(Error::config("accuracy of an empty dataset is undefined"));
        }
        if x.rows() != y.len() {
            return Err(Error::shape(format!(
                "{} rows against {} labels",
                x.rows(),
                y.len()
            )));
        }
        if x.cols() != net.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                x.cols(),
                net.input_dim()
            )));
        }
        if self.buf.cols() != net.input_dim() || self.ws.logits.cols() != net.output_dim() {
            *self = Evaluator::new(net);
        }
        let mut correct = 0usize;
        let mut row = 0;
        while row < x.rows() {
            let take = self.chunk.min(x.rows() - row);
            for i in 0..take {
                self.buf.row_mut(i).copy_from_slice(x.row(row + i));
            }
            net.forward_cached(&self.buf, &mut self.ws)?;
            for i in 0..take {
                if argmax(self.ws.logits.row(i)) == y[row + i] {
                    correct += 1;
                }
            }
            row += take;
        }
        Ok(correct as f64 / x.rows() as f64)
    }
}

/// `out[i,:] = x[i,:] · w + b`, skipping zero inputs (pruned features and
/// inactive ReLU units).
fn affine_into(x: &Dense2D, w: &Dense2D, b: &[f64], out: &mut Dense2D) {
    for i in 0..x.rows() {
        let orow = out.row_mut(i);
        orow.copy_from_slice(b);
        for (k, &c) in x.row(i).iter().enumerate() {
            if c != 0.0 {
                for (o, &wv) in orow.iter_mut().zip(w.row(k)) {
                    *o += c * wv;
                }
            }
        }
    }
}

fn softmax_row(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (&zi, o) in z.iter().zip(out.iter_mut()) {
        let e = (zi - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// First index of the maximum value; ties go to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}
