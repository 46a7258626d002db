//! Small fully connected networks with hand-written reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Multi-layer perceptron `x W + b` with a shared hidden activation and a
/// linear (or tanh) output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub hidden: Activation,
    pub output: Activation,
}

/// Layer outputs kept for the backward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Cache {
    acts: Vec<Array2<f64>>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

impl Mlp {
    /// Uniform fan-in initialisation `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn new<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((pair[0], pair[1]), |_| rng.gen_range(-bound..bound)));
            biases.push(Array1::from_shape_fn(pair[1], |_| rng.gen_range(-bound..bound)));
        }
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            hidden,
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.dot(w) + b;
            self.activation(i).apply(&mut z);
            h = z;
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Cache {
        let mut acts = vec![x.to_owned()];
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[i].dot(w) + b;
            self.activation(i).apply(&mut z);
            acts.push(z);
        }
        Cache { acts }
    }

    /// Gradients of a loss whose derivative with respect to the network
    /// output is `grad_out`; also returns the gradient with respect to the input.
    pub fn backward(&self, cache: &Cache, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let n = self.weights.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut delta = grad_out.clone();
        for i in (0..n).rev() {
            let act = self.activation(i);
            let y = &cache.acts[i + 1];
            delta.zip_mut_with(y, |d, &yv| *d *= act.grad_from_output(yv));
            gw.push(cache.acts[i].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[i].t());
        }
        gw.reverse();
        gb.reverse();
        (Grads { weights: gw, biases: gb }, delta)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters in layer order: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter count mismatch");
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = flat[k];
                k += 1;
            }
            for v in b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Polyak averaging `self = (1 - tau) self + tau source`.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.weights.iter_mut().zip(&source.weights) {
            t.zip_mut_with(s, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
        for (t, s) in self.biases.iter_mut().zip(&source.biases) {
            t.zip_mut_with(s, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, g: &Grads) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..net.weights.len() {
            ndarray::Zip::from(&mut net.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&g.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut net.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&g.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Adam for a single scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAdam {
    pub lr: f64,
    t: i32,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        ScalarAdam { lr, t: 0, m: 0.0, v: 0.0 }
    }

    pub fn step(&mut self, p: &mut f64, g: f64) {
        self.t += 1;
        self.m = 0.9 * self.m + 0.1 * g;
        self.v = 0.999 * self.v + 0.001 * g * g;
        let mh = self.m / (1.0 - 0.9f64.powi(self.t));
        let vh = self.v / (1.0 - 0.999f64.powi(self.t));
        *p -= self.lr * mh / (vh.sqrt() + 1e-8);
    }
}

/// Largest relative error between reverse-mode and central-difference
/// gradients of `sum(output * proj)` over all parameters.
pub fn gradient_check(net: &Mlp, input: ArrayView2<f64>, h: f64) -> f64 {
    let out_dim = net.output_dim();
    // Fixed, asymmetric projection so that every output contributes.
    let proj = Array2::from_shape_fn((input.nrows(), out_dim), |(r, c)| 1.0 + 0.1 * (r as f64) - 0.37 * (c as f64));
    let loss = |n: &Mlp| (n.forward(input) * &proj).sum();
    let cache = net.forward_cached(input);
    let (g, _) = net.backward(&cache, &proj);
    let analytic = g.flatten();
    let base = net.flatten();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat(&p);
        let up = loss(&probe);
        p[i] = base[i] - h;
        probe.set_flat(&p);
        let down = loss(&probe);
        let numeric = (up - down) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn linear_net_gradient_is_exact() {
        let net = Mlp::new(&[3, 2], Activation::Identity, Activation::Identity, &mut rng());
        let x = array![[0.3, -1.2, 0.5], [1.0, 0.1, -0.4]];
        assert!(gradient_check(&net, x.view(), 1e-5) < 1e-9);
    }

    #[test]
    fn tanh_net_gradient_matches_finite_differences() {
        let mut r = rng();
        let net = Mlp::new(&[13, 64, 64, 4], Activation::Tanh, Activation::Identity, &mut r);
        let x = Array2::from_shape_fn((2, 13), |_| r.gen_range(-1.0..1.0));
        assert!(gradient_check(&net, x.view(), 1e-5) < 1e-4);
    }

    #[test]
    fn zero_weight_net_gradients() {
        let mut net = Mlp::new(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut rng());
        let n = net.param_count();
        net.set_flat(&vec![0.0; n]);
        let x = array![[0.5, -2.0]];
        let cache = net.forward_cached(x.view());
        let (g, gin) = net.backward(&cache, &array![[1.0]]);
        // Hidden activations are zero, so only the output bias has gradient.
        assert_eq!(g.biases[1], array![1.0]);
        assert!(g.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(g.biases[0].iter().all(|&v| v == 0.0));
        assert!(gin.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut r = rng();
        let net = Mlp::new(&[4, 16, 1], Activation::Tanh, Activation::Identity, &mut r);
        let x = array![[0.2, -0.3, 0.7, 0.1]];
        let cache = net.forward_cached(x.view());
        let (_, gin) = net.backward(&cache, &array![[1.0]]);
        for j in 0..4 {
            let mut up = x.clone();
            up[[0, j]] += 1e-6;
            let mut dn = x.clone();
            dn[[0, j]] -= 1e-6;
            let num = (net.forward(up.view())[[0, 0]] - net.forward(dn.view())[[0, 0]]) / 2e-6;
            assert!((num - gin[[0, j]]).abs() < 1e-7);
        }
    }

    #[test]
    fn soft_update_is_exact_polyak() {
        let mut r = rng();
        let src = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut r);
        let mut tgt = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut r);
        let before = tgt.flatten();
        tgt.soft_update(&src, 0.005);
        for ((t, b), s) in tgt.flatten().iter().zip(before).zip(src.flatten()) {
            assert_eq!(*t, 0.995 * b + 0.005 * s);
        }
    }

    #[test]
    fn adam_with_zero_lr_keeps_weights() {
        let mut r = rng();
        let mut net = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut r);
        let before = net.clone();
        let mut opt = Adam::new(&net, 0.0);
        let cache = net.forward_cached(array![[1.0, 2.0]].view());
        let (g, _) = net.backward(&cache, &array![[1.0]]);
        opt.step(&mut net, &g);
        assert_eq!(net, before);
    }

    #[test]
    fn flatten_round_trip() {
        let mut net = Mlp::new(&[3, 5, 2], Activation::Relu, Activation::Tanh, &mut rng());
        let flat: Vec<f64> = (0..net.param_count()).map(|i| i as f64 * 0.01).collect();
        net.set_flat(&flat);
        assert_eq!(net.flatten(), flat);
    }
}
