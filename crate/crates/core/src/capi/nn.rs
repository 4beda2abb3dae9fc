//! A multilayer perceptron with a ReLU trunk, a scalar value head and an
//! optional linear policy head, trained with Adam. Parameters live in one
//! flat vector so optimizer state, checkpoints and gradient checks treat them
//! uniformly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Layer {
    offset: usize,
    inputs: usize,
    outputs: usize,
}

impl Layer {
    fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        let n = self.inputs * self.outputs;
        ArrayView2::from_shape((self.inputs, self.outputs), &params[self.offset..self.offset + n]).expect("layer shape")
    }

    fn bias<'a>(&self, params: &'a [f64]) -> ArrayView1<'a, f64> {
        let start = self.offset + self.inputs * self.outputs;
        ArrayView1::from(&params[start..start + self.outputs])
    }

    fn size(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    fn apply(&self, params: &[f64], x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights(params)) + &self.bias(params)
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    fn backward(
        &self,
        params: &[f64],
        input: &ArrayView2<f64>,
        d_out: &Array2<f64>,
        grad: &mut [f64],
        need_input: bool,
    ) -> Option<Array2<f64>> {
        let gw = input.t().dot(d_out);
        let gb = d_out.sum_axis(Axis(0));
        let n = self.inputs * self.outputs;
        for (g, x) in grad[self.offset..self.offset + n].iter_mut().zip(gw.iter()) {
            *g += x;
        }
        for (g, x) in grad[self.offset + n..self.offset + n + self.outputs]
            .iter_mut()
            .zip(gb.iter())
        {
            *g += x;
        }
        need_input.then(|| d_out.dot(&self.weights(params).t()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    trunk: Vec<Layer>,
    value_head: Layer,
    policy_head: Option<Layer>,
    params: Vec<f64>,
}

/// Activations kept for the backward pass.
pub struct Forward {
    /// Input of every trunk layer, then the trunk output.
    activations: Vec<Array2<f64>>,
    pub value: Array1<f64>,
    pub logits: Option<Array2<f64>>,
}

impl Mlp {
    /// Weights start uniform in `±sqrt(6 / fan_in)`, biases at zero.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: &[usize], policy_outputs: usize, rng: &mut R) -> Self {
        let mut offset = 0;
        let mut layer = |inputs: usize, outputs: usize| {
            let l = Layer {
                offset,
                inputs,
                outputs,
            };
            offset += l.size();
            l
        };
        let mut trunk = Vec::new();
        let mut width = inputs;
        for &h in hidden {
            trunk.push(layer(width, h));
            width = h;
        }
        let value_head = layer(width, 1);
        let policy_head = (policy_outputs > 0).then(|| layer(width, policy_outputs));
        let mut params = vec![0.0; offset];
        for l in trunk.iter().chain([&value_head]).chain(policy_head.iter()) {
            let bound = (6.0 / l.inputs as f64).sqrt();
            for w in &mut params[l.offset..l.offset + l.inputs * l.outputs] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Self {
            trunk,
            value_head,
            policy_head,
            params,
        }
    }

    pub fn inputs(&self) -> usize {
        self.trunk.first().map_or(self.value_head.inputs, |l| l.inputs)
    }

    pub fn policy_outputs(&self) -> usize {
        self.policy_head.map_or(0, |l| l.outputs)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn trunk_output(&self, x: ArrayView2<f64>, keep: bool) -> (Array2<f64>, Vec<Array2<f64>>) {
        let mut kept = Vec::new();
        let mut a = x.to_owned();
        for l in &self.trunk {
            let mut z = l.apply(&self.params, &a.view());
            z.mapv_inplace(|v| v.max(0.0));
            if keep {
                kept.push(std::mem::replace(&mut a, z));
            } else {
                a = z;
            }
        }
        (a, kept)
    }

    /// Raw value-head outputs for a batch of rows.
    pub fn values(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let (h, _) = self.trunk_output(x, false);
        self.value_head
            .apply(&self.params, &h.view())
            .index_axis_move(Axis(1), 0)
    }

    /// Raw policy-head outputs for a batch of rows.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let head = self.policy_head.expect("network has a policy head");
        let (h, _) = self.trunk_output(x, false);
        head.apply(&self.params, &h.view())
    }

    pub fn forward(&self, x: ArrayView2<f64>, with_policy: bool) -> Forward {
        let (h, mut activations) = self.trunk_output(x, true);
        let value = self
            .value_head
            .apply(&self.params, &h.view())
            .index_axis_move(Axis(1), 0);
        let logits = match (with_policy, self.policy_head) {
            (true, Some(head)) => Some(head.apply(&self.params, &h.view())),
            _ => None,
        };
        activations.push(h);
        Forward {
            activations,
            value,
            logits,
        }
    }

    /// Gradient of a loss with respect to all parameters, given its gradient
    /// with respect to the raw value outputs and (optionally) the logits.
    pub fn backward(&self, fwd: &Forward, d_value: &Array1<f64>, d_logits: Option<&Array2<f64>>) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let h = fwd.activations.last().expect("trunk output");
        let d_value = d_value.view().insert_axis(Axis(1)).to_owned();
        let mut d_h = self
            .value_head
            .backward(&self.params, &h.view(), &d_value, &mut grad, true)
            .expect("input gradient");
        if let (Some(head), Some(d_logits)) = (self.policy_head, d_logits) {
            d_h += &head
                .backward(&self.params, &h.view(), d_logits, &mut grad, true)
                .expect("input gradient");
        }
        for (k, l) in self.trunk.iter().enumerate().rev() {
            // ReLU: the layer output is the next activation.
            let out = &fwd.activations[k + 1];
            d_h.zip_mut_with(out, |d, &o| {
                if o <= 0.0 {
                    *d = 0.0;
                }
            });
            d_h = match l.backward(&self.params, &fwd.activations[k].view(), &d_h, &mut grad, k > 0) {
                Some(d) => d,
                None => break,
            };
        }
        grad
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(5, &[7, 3], 4, &mut rng);
        assert_eq!(net.params().len(), 6 * 7 + 8 * 3 + 4 + 4 * 4);
        let x = Array2::zeros((2, 5));
        let fwd = net.forward(x.view(), true);
        assert_eq!(fwd.value.len(), 2);
        assert_eq!(fwd.logits.unwrap().dim(), (2, 4));
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = vec![3.0, -2.0];
        for _ in 0..500 {
            let g = vec![2.0 * p[0], 2.0 * p[1]];
            adam.step(&mut p, &g);
        }
        assert!(p[0].abs() < 1e-2 && p[1].abs() < 1e-2);
    }
}
