//! Minimal dense network with tanh hidden units and a linear output layer,
//! trained by backpropagation with Adam. Everything is plain `f64` math so
//! training is bit-reproducible for a fixed seed.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected network. `weights[l]` is row-major with shape
/// `(sizes[l+1], sizes[l])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Scaled-uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output layers");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
            biases.push((0..fan_out).map(|_| rng.random_range(-bound..bound)).collect());
        }
        Self { sizes: sizes.to_vec(), weights, biases }
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Single forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let last = self.layer_count() - 1;
        let mut cur = x.to_vec();
        for l in 0..=last {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = self.biases[l][o];
                for (w, v) in row.iter().zip(&cur) {
                    acc += w * v;
                }
                next[o] = if l == last { acc } else { acc.tanh() };
            }
            cur = next;
        }
        cur
    }

    /// Mean squared error over a batch, averaged over batch and output
    /// dimensions, with gradients accumulated into `grad`.
    ///
    /// `inputs` is row-major `(batch, input_dim)`, `targets` row-major
    /// `(batch, output_dim)`.
    pub fn loss_and_grad(
        &self,
        inputs: &[f64],
        targets: &[f64],
        batch: usize,
        grad: &mut Gradients,
        ws: &mut Workspace,
    ) -> f64 {
        let last = self.layer_count() - 1;
        let out_dim = self.output_dim();
        debug_assert_eq!(inputs.len(), batch * self.input_dim());
        debug_assert_eq!(targets.len(), batch * out_dim);
        ws.ensure(&self.sizes, batch);
        grad.zero();

        // Forward, keeping activations per layer; acts[0] is the input.
        ws.acts[0][..inputs.len()].copy_from_slice(inputs);
        for l in 0..=last {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (lower, upper) = ws.acts.split_at_mut(l + 1);
            let prev = &lower[l];
            let next = &mut upper[0];
            for b in 0..batch {
                let xin = &prev[b * n_in..(b + 1) * n_in];
                let xout = &mut next[b * n_out..(b + 1) * n_out];
                for o in 0..n_out {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    let mut acc = self.biases[l][o];
                    for (w, v) in row.iter().zip(xin) {
                        acc += w * v;
                    }
                    xout[o] = if l == last { acc } else { acc.tanh() };
                }
            }
        }

        // Loss and output delta.
        let norm = 1.0 / (batch * out_dim) as f64;
        let mut loss = 0.0;
        {
            let pred = &ws.acts[last + 1];
            let delta = &mut ws.delta[last];
            for i in 0..batch * out_dim {
                let e = pred[i] - targets[i];
                loss += e * e;
                delta[i] = 2.0 * e * norm;
            }
            loss *= norm;
        }

        // Backward.
        for l in (0..=last).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let gw = &mut grad.weights[l];
            let gb = &mut grad.biases[l];
            for b in 0..batch {
                let xin = &ws.acts[l][b * n_in..(b + 1) * n_in];
                let dl = &ws.delta[l][b * n_out..(b + 1) * n_out];
                for o in 0..n_out {
                    let d = dl[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (g, v) in row.iter_mut().zip(xin) {
                        *g += d * v;
                    }
                }
            }
            if l > 0 {
                let (lower, upper) = ws.delta.split_at_mut(l);
                let dl_prev = &mut lower[l - 1];
                let dl = &upper[0];
                for b in 0..batch {
                    let dprev = &mut dl_prev[b * n_in..(b + 1) * n_in];
                    let dcur = &dl[b * n_out..(b + 1) * n_out];
                    let act = &ws.acts[l][b * n_in..(b + 1) * n_in];
                    for (i, dp) in dprev.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for o in 0..n_out {
                            acc += dcur[o] * self.weights[l][o * n_in + i];
                        }
                        *dp = acc * (1.0 - act[i] * act[i]);
                    }
                }
            }
        }
        loss
    }

    /// Loss only (no gradients); used for validation.
    pub fn batch_loss(&self, inputs: &[f64], targets: &[f64], batch: usize) -> f64 {
        let out_dim = self.output_dim();
        let mut loss = 0.0;
        for b in 0..batch {
            let pred = self.forward(&inputs[b * self.input_dim()..(b + 1) * self.input_dim()]);
            for o in 0..out_dim {
                let e = pred[o] - targets[b * out_dim + o];
                loss += e * e;
            }
        }
        loss / (batch * out_dim) as f64
    }
}

/// Gradient buffers matching an [`Mlp`]'s shape.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }
}

/// Reusable activation and delta buffers.
#[derive(Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    batch: usize,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, sizes: &[usize], batch: usize) {
        if self.acts.len() == sizes.len() && self.batch == batch {
            return;
        }
        self.acts = sizes.iter().map(|&s| vec![0.0; s * batch]).collect();
        self.delta = sizes[1..].iter().map(|&s| vec![0.0; s * batch]).collect();
        self.batch = batch;
    }
}

/// Adam state over the same parameter shapes.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(mlp: &Mlp, learning_rate: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon,
            step: 0,
            m_w: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn apply(&mut self, mlp: &mut Mlp, grad: &Gradients) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let lr = self.learning_rate;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for l in 0..mlp.weights.len() {
            update(&mut mlp.weights[l], &grad.weights[l], &mut self.m_w[l], &mut self.v_w[l]);
            update(&mut mlp.biases[l], &grad.biases[l], &mut self.m_b[l], &mut self.v_b[l]);
        }
    }
}

/// Central finite-difference gradient of the batch loss with respect to
/// every parameter; the independent check for the backpropagation path.
pub fn finite_difference_grad(
    mlp: &Mlp,
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
    h: f64,
) -> Gradients {
    let mut fd = Gradients::like(mlp);
    let mut probe = mlp.clone();
    for l in 0..mlp.weights.len() {
        for i in 0..mlp.weights[l].len() {
            let orig = probe.weights[l][i];
            probe.weights[l][i] = orig + h;
            let up = probe.batch_loss(inputs, targets, batch);
            probe.weights[l][i] = orig - h;
            let down = probe.batch_loss(inputs, targets, batch);
            probe.weights[l][i] = orig;
            fd.weights[l][i] = (up - down) / (2.0 * h);
        }
        for i in 0..mlp.biases[l].len() {
            let orig = probe.biases[l][i];
            probe.biases[l][i] = orig + h;
            let up = probe.batch_loss(inputs, targets, batch);
            probe.biases[l][i] = orig - h;
            let down = probe.batch_loss(inputs, targets, batch);
            probe.biases[l][i] = orig;
            fd.biases[l][i] = (up - down) / (2.0 * h);
        }
    }
    fd
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_batch(
        rng: &mut rand_chacha::ChaCha8Rng,
        batch: usize,
        in_dim: usize,
        out_dim: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let inputs = (0..batch * in_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = (0..batch * out_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        (inputs, targets)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..10 {
            let sizes = match trial % 3 {
                0 => vec![3, 8, 2],
                1 => vec![4, 6, 6, 1],
                _ => vec![2, 5, 4, 3, 2],
            };
            let mlp = Mlp::init(&sizes, &mut rng);
            let batch = 4;
            let (inputs, targets) = random_batch(&mut rng, batch, sizes[0], *sizes.last().unwrap());
            let mut grad = Gradients::like(&mlp);
            let mut ws = Workspace::new();
            mlp.loss_and_grad(&inputs, &targets, batch, &mut grad, &mut ws);
            let fd = finite_difference_grad(&mlp, &inputs, &targets, batch, 1e-6);
            for l in 0..mlp.weights.len() {
                for (a, b) in grad.weights[l].iter().zip(&fd.weights[l]) {
                    let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
                    assert!(rel < 1e-5, "weight grad mismatch: {a} vs {b} (rel {rel})");
                }
                for (a, b) in grad.biases[l].iter().zip(&fd.biases[l]) {
                    let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
                    assert!(rel < 1e-5, "bias grad mismatch: {a} vs {b} (rel {rel})");
                }
            }
        }
    }

    #[test]
    fn loss_and_grad_forward_agrees_with_single_forward() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::init(&[3, 7, 2], &mut rng);
        let (inputs, targets) = random_batch(&mut rng, 5, 3, 2);
        let mut grad = Gradients::like(&mlp);
        let mut ws = Workspace::new();
        let loss = mlp.loss_and_grad(&inputs, &targets, 5, &mut grad, &mut ws);
        assert!((loss - mlp.batch_loss(&inputs, &targets, 5)).abs() < 1e-12);
    }

    #[test]
    fn adam_reduces_loss_on_a_fixed_batch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::init(&[2, 16, 1], &mut rng);
        let (inputs, targets) = random_batch(&mut rng, 16, 2, 1);
        let mut grad = Gradients::like(&mlp);
        let mut ws = Workspace::new();
        let mut adam = Adam::new(&mlp, 1e-2, 1e-8);
        let first = mlp.loss_and_grad(&inputs, &targets, 16, &mut grad, &mut ws);
        for _ in 0..500 {
            mlp.loss_and_grad(&inputs, &targets, 16, &mut grad, &mut ws);
            adam.apply(&mut mlp, &grad);
        }
        let last = mlp.batch_loss(&inputs, &targets, 16);
        assert!(last < first / 10.0, "{first} -> {last}");
    }

    #[test]
    fn init_is_deterministic() {
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        assert_eq!(Mlp::init(&[3, 4, 1], &mut a), Mlp::init(&[3, 4, 1], &mut b));
    }
}
