//! Shared-trunk policy/value MLP with hand-written backpropagation.
//!
//! Parameters live in one flat vector so the optimizer can treat them
//! uniformly. Each dense layer stores its weights input-major
//! (`w[i * fan_out + j]`) followed by its bias.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TrainingTarget;
use crate::error::{contract, Result};
use crate::rng::RngStream;

/// Floor applied to predicted probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;
/// Output heads start at this fraction of the trunk's init range, so the
/// initial policy is close to uniform and the initial value close to 0.
pub const HEAD_INIT_SCALE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub action_count: usize,
}

impl NetShape {
    pub fn new(input_dim: usize, hidden: Vec<usize>, action_count: usize) -> Result<Self> {
        if input_dim == 0 || action_count == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(contract(
                "network needs positive input/action sizes and at least one nonempty hidden layer",
            ));
        }
        Ok(Self {
            input_dim,
            hidden,
            action_count,
        })
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.action_count));
        dims.push((fan_in, 1));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layer {
    offset: usize,
    fan_in: usize,
    fan_out: usize,
}

impl Layer {
    fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias(&self) -> Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn all(&self) -> Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out + self.fan_out
    }
}

fn layout(shape: &NetShape) -> Vec<Layer> {
    let mut offset = 0;
    shape
        .dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let layer = Layer {
                offset,
                fan_in,
                fan_out,
            };
            offset += fan_in * fan_out + fan_out;
            layer
        })
        .collect()
}

/// Network weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    shape: NetShape,
    layers: Vec<Layer>,
    data: Vec<f64>,
}

/// Gradient of the training loss, laid out like [`NetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<f64>);

/// Mean losses over a minibatch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub policy: f64,
    pub value: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.policy + self.value
    }
}

impl NetParams {
    /// ReLU trunk with fan-in scaled uniform (He) initialization; heads
    /// start near zero. Biases start at zero.
    pub fn init(shape: NetShape, rng: &mut RngStream) -> Self {
        let layers = layout(&shape);
        let mut data = vec![0.0; shape.param_count()];
        let heads = layers.len() - 2;
        for (ix, layer) in layers.iter().enumerate() {
            let mut limit = (6.0 / layer.fan_in as f64).sqrt();
            if ix >= heads {
                limit *= HEAD_INIT_SCALE;
            }
            for w in &mut data[layer.weights()] {
                *w = rng.uniform_range(-limit, limit);
            }
        }
        Self {
            shape,
            layers,
            data,
        }
    }

    pub fn from_flat(shape: NetShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.param_count() {
            return Err(contract(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                data.len()
            )));
        }
        let layers = layout(&shape);
        Ok(Self {
            shape,
            layers,
            data,
        })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn policy_head_range(&self) -> Range<usize> {
        self.layers[self.layers.len() - 2].all()
    }

    pub fn value_head_range(&self) -> Range<usize> {
        self.layers[self.layers.len() - 1].all()
    }

    /// Zero both output heads: uniform policy and zero value everywhere.
    pub fn zero_heads(&mut self) {
        let p = self.policy_head_range();
        let v = self.value_head_range();
        self.data[p].fill(0.0);
        self.data[v].fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|w| w.is_finite())
    }

    /// Policy distribution and value for one input.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, f64)> {
        if input.len() != self.shape.input_dim {
            return Err(contract(format!(
                "network expects {} inputs, got {}",
                self.shape.input_dim,
                input.len()
            )));
        }
        let trunk = self.layers.len() - 2;
        let mut h = input.to_vec();
        for layer in &self.layers[..trunk] {
            h = self.dense(layer, &h);
            for v in &mut h {
                *v = v.max(0.0);
            }
        }
        let logits = self.dense(&self.layers[trunk], &h);
        let value = self.dense(&self.layers[trunk + 1], &h)[0];
        Ok((softmax(&logits), value))
    }

    fn dense(&self, layer: &Layer, x: &[f64]) -> Vec<f64> {
        let mut y = self.data[layer.bias()].to_vec();
        let w = &self.data[layer.weights()];
        for (xi, row) in x.iter().zip(w.chunks_exact(layer.fan_out)) {
            if *xi != 0.0 {
                for (yj, wij) in y.iter_mut().zip(row) {
                    *yj += xi * wij;
                }
            }
        }
        y
    }

    /// Mean combined loss `L_pi + L_V` over the batch.
    pub fn loss(&self, batch: &[&TrainingTarget]) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(contract("loss of an empty batch"));
        }
        let mut sum = LossBreakdown::default();
        for t in batch {
            let (p, v) = self.forward(&t.state_obs)?;
            sum.policy += policy_loss(&p, &t.policy_target);
            sum.value += value_loss(v, t.value_target);
        }
        let n = batch.len() as f64;
        Ok(LossBreakdown {
            policy: sum.policy / n,
            value: sum.value / n,
        })
    }

    /// Analytic gradient of the mean combined loss over `batch`.
    ///
    /// The cross-entropy gradient w.r.t. the logits is `p - t`; the log
    /// clamp is ignored, which only matters for probabilities below
    /// [`LOG_CLAMP`].
    pub fn gradients(&self, batch: &[&TrainingTarget]) -> Result<(Gradients, LossBreakdown)> {
        let n = batch.len();
        if n == 0 {
            return Err(contract("gradient of an empty batch"));
        }
        let (din, na) = (self.shape.input_dim, self.shape.action_count);
        for t in batch {
            if t.state_obs.len() != din || t.policy_target.len() != na {
                return Err(contract("training target does not match the network shape"));
            }
        }
        let trunk = self.layers.len() - 2;

        // Forward pass, keeping post-activation outputs of every trunk layer.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(trunk + 1);
        acts.push(batch.iter().flat_map(|t| t.state_obs.iter().copied()).collect());
        for layer in &self.layers[..trunk] {
            let mut out = self.dense_batch(layer, &acts[acts.len() - 1], n);
            for v in &mut out {
                *v = v.max(0.0);
            }
            acts.push(out);
        }
        let h = &acts[trunk];
        let policy_layer = self.layers[trunk];
        let value_layer = self.layers[trunk + 1];
        let logits = self.dense_batch(&policy_layer, h, n);
        let values = self.dense_batch(&value_layer, h, n);

        let scale = 1.0 / n as f64;
        let mut losses = LossBreakdown::default();
        let mut d_logits = vec![0.0; n * na];
        let mut d_values = vec![0.0; n];
        for (b, t) in batch.iter().enumerate() {
            let p = softmax(&logits[b * na..(b + 1) * na]);
            losses.policy += policy_loss(&p, &t.policy_target) * scale;
            let target_mass: f64 = t.policy_target.iter().sum();
            for a in 0..na {
                d_logits[b * na + a] = (p[a] * target_mass - t.policy_target[a]) * scale;
            }
            let err = values[b] - t.value_target;
            losses.value += err * err * scale;
            d_values[b] = 2.0 * err * scale;
        }

        let mut grads = vec![0.0; self.data.len()];
        self.backprop_layer(&policy_layer, h, &d_logits, n, &mut grads);
        self.backprop_layer(&value_layer, h, &d_values, n, &mut grads);
        let mut d_h = self.input_grad(&policy_layer, &d_logits, n);
        for (dh, dv) in d_h.iter_mut().zip(self.input_grad(&value_layer, &d_values, n)) {
            *dh += dv;
        }

        for l in (0..trunk).rev() {
            let layer = self.layers[l];
            for (d, a) in d_h.iter_mut().zip(&acts[l + 1]) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            self.backprop_layer(&layer, &acts[l], &d_h, n, &mut grads);
            if l > 0 {
                d_h = self.input_grad(&layer, &d_h, n);
            }
        }
        Ok((Gradients(grads), losses))
    }

    /// `Y = X W + b` for a row-major `n x fan_in` input.
    fn dense_batch(&self, layer: &Layer, x: &[f64], n: usize) -> Vec<f64> {
        let (k, m) = (layer.fan_in, layer.fan_out);
        let bias = &self.data[layer.bias()];
        let mut y: Vec<f64> = (0..n).flat_map(|_| bias.iter().copied()).collect();
        let w = &self.data[layer.weights()];
        // SAFETY: slices hold n*k, k*m and n*m elements with the given strides.
        unsafe {
            matrixmultiply::dgemm(
                n,
                k,
                m,
                1.0,
                x.as_ptr(),
                k as isize,
                1,
                w.as_ptr(),
                m as isize,
                1,
                1.0,
                y.as_mut_ptr(),
                m as isize,
                1,
            );
        }
        y
    }

    /// Accumulate `dW = X^T dY` and `db = sum_rows dY` into `grads`.
    fn backprop_layer(&self, layer: &Layer, x: &[f64], dy: &[f64], n: usize, grads: &mut [f64]) {
        let (k, m) = (layer.fan_in, layer.fan_out);
        let dw = &mut grads[layer.weights()];
        // SAFETY: x is n*k (read transposed), dy is n*m, dw is k*m.
        unsafe {
            matrixmultiply::dgemm(
                k,
                n,
                m,
                1.0,
                x.as_ptr(),
                1,
                k as isize,
                dy.as_ptr(),
                m as isize,
                1,
                1.0,
                dw.as_mut_ptr(),
                m as isize,
                1,
            );
        }
        let db = &mut grads[layer.bias()];
        for row in dy.chunks_exact(m) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
    }

    /// `dX = dY W^T`.
    fn input_grad(&self, layer: &Layer, dy: &[f64], n: usize) -> Vec<f64> {
        let (k, m) = (layer.fan_in, layer.fan_out);
        let w = &self.data[layer.weights()];
        let mut dx = vec![0.0; n * k];
        // SAFETY: dy is n*m, w is k*m (read transposed), dx is n*k.
        unsafe {
            matrixmultiply::dgemm(
                n,
                m,
                k,
                1.0,
                dy.as_ptr(),
                m as isize,
                1,
                w.as_ptr(),
                1,
                m as isize,
                0.0,
                dx.as_mut_ptr(),
                k as isize,
                1,
            );
        }
        dx
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy `-sum_a target[a] * ln(predicted[a])`.
pub fn policy_loss(predicted: &[f64], target: &[f64]) -> f64 {
    -predicted
        .iter()
        .zip(target)
        .map(|(p, t)| t * p.max(LOG_CLAMP).ln())
        .sum::<f64>()
}

pub fn value_loss(predicted: f64, target: f64) -> f64 {
    (predicted - target) * (predicted - target)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn small_net(seed: u64) -> NetParams {
        NetParams::init(NetShape::new(3, vec![8, 6], 4).unwrap(), &mut RngStream::new(seed))
    }

    #[test]
    fn param_count_matches_layout() {
        let shape = NetShape::new(4, vec![256, 256], 2).unwrap();
        assert_eq!(shape.param_count(), (4 * 256 + 256) + (256 * 256 + 256) + (256 * 2 + 2) + 257);
    }

    #[test]
    fn zero_heads_give_uniform_policy_and_zero_value() {
        let mut net = small_net(1);
        net.zero_heads();
        let (p, v) = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn forward_is_deterministic_and_normalized() {
        let net = small_net(2);
        let a = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let b = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(a, b);
        assert!((a.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        assert!(small_net(3).forward(&[1.0]).is_err());
    }

    #[test]
    fn batch_forward_agrees_with_single() {
        let net = small_net(4);
        let targets: Vec<TrainingTarget> = (0..5)
            .map(|i| TrainingTarget {
                state_obs: vec![i as f64 * 0.1, -0.5, 1.0],
                policy_target: vec![0.25; 4],
                value_target: 1.0,
            })
            .collect();
        let refs: Vec<&TrainingTarget> = targets.iter().collect();
        let (_, batch_loss) = net.gradients(&refs).unwrap();
        let single = net.loss(&refs).unwrap();
        assert!((batch_loss.policy - single.policy).abs() < 1e-12);
        assert!((batch_loss.value - single.value).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_fixtures() {
        assert!(policy_loss(&[1.0, 0.0], &[1.0, 0.0]).abs() < 1e-12);
        assert!((policy_loss(&[0.5, 0.5], &[0.5, 0.5]) - LN_2).abs() < 1e-15);
        assert!((policy_loss(&[0.5, 0.5], &[0.75, 0.25]) - LN_2).abs() < 1e-15);
        // log(0) is clamped.
        assert!(policy_loss(&[0.0, 1.0], &[1.0, 0.0]).is_finite());
    }

    #[test]
    fn squared_error_fixtures() {
        assert_eq!(value_loss(1.0, 1.0), 0.0);
        assert_eq!(value_loss(0.0, 2.0), 4.0);
    }

    #[test]
    fn perfect_value_prediction_has_zero_value_head_gradient() {
        let net = small_net(5);
        let obs = vec![0.2, 0.4, -0.1];
        let (p, v) = net.forward(&obs).unwrap();
        let t = TrainingTarget {
            state_obs: obs,
            policy_target: p,
            value_target: v,
        };
        let (g, _) = net.gradients(&[&t]).unwrap();
        assert!(g.0[net.value_head_range()].iter().all(|x| x.abs() < 1e-15));
        // Matching policy too: the whole gradient vanishes.
        assert!(g.0.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let net = small_net(6);
        let t = TrainingTarget {
            state_obs: vec![0.5, -0.3, 0.9],
            policy_target: vec![0.1, 0.2, 0.3, 0.4],
            value_target: 2.0,
        };
        let (one, _) = net.gradients(&[&t]).unwrap();
        let (two, _) = net.gradients(&[&t, &t]).unwrap();
        for (a, b) in one.0.iter().zip(&two.0) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn entropy_bounds() {
        assert!((entropy(&[0.2; 5]) - 5f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(
            logits in prop::collection::vec(-30.0f64..30.0, 2..8),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn value_loss_nonnegative(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            prop_assert!(value_loss(a, b) >= 0.0);
        }
    }
}
