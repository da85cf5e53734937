//! Feed-forward network with rectifier hidden layers and identity output.

use crate::core::SplitRng;
use crate::scalar::Real;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default clip applied to externally supplied logit gradients.
pub const LOGIT_GRAD_CLIP: f64 = 5e-4;

/// Checkpoint format version.
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer<R> {
    /// Row-major `out_dim x in_dim`.
    weights: Vec<R>,
    bias: Vec<R>,
    in_dim: usize,
    out_dim: usize,
}

impl<R: Real> Layer<R> {
    fn apply(&self, input: &[R], out: &mut Vec<R>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                acc += *w * *x;
            }
            out.push(acc);
        }
    }
}

/// Weights of the safety classification model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<R> {
    version: u32,
    layers: Vec<Layer<R>>,
}

/// Per-layer parameter gradients, same shapes as the model.
#[derive(Debug, Clone)]
pub struct MlpGradients<R> {
    weights: Vec<Vec<R>>,
    biases: Vec<Vec<R>>,
}

impl<R: Real> MlpGradients<R> {
    fn zeros_like(mlp: &Mlp<R>) -> Self {
        MlpGradients {
            weights: mlp
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.weights.len()])
                .collect(),
            biases: mlp
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.bias.len()])
                .collect(),
        }
    }

    pub fn add(&mut self, other: &MlpGradients<R>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: R) {
        for v in self.weights.iter_mut().flatten() {
            *v *= factor;
        }
        for v in self.biases.iter_mut().flatten() {
            *v *= factor;
        }
    }
}

/// One training example: an input and the virtual gradient of the loss with
/// respect to its logits.
pub struct TrainSample<'a, R> {
    pub input: &'a [R],
    pub logit_grad: Vec<R>,
}

impl<R: Real> Mlp<R> {
    /// He-initialized network; `dims` runs input → hidden… → output.
    pub fn new(dims: &[usize], rng: &mut SplitRng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::validation("network needs at least two dims"));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let scale = (2.0 / in_dim as f64).sqrt();
                Layer {
                    weights: (0..in_dim * out_dim)
                        .map(|_| R::of((rng.gen::<f64>() * 2.0 - 1.0) * scale))
                        .collect(),
                    bias: vec![R::zero(); out_dim],
                    in_dim,
                    out_dim,
                }
            })
            .collect();
        Ok(Mlp {
            version: CHECKPOINT_VERSION,
            layers,
        })
    }

    /// Network with explicit weights (row-major) and biases, for fixtures.
    pub fn from_parts(parts: Vec<(Vec<R>, Vec<R>)>, dims: &[usize]) -> Result<Self> {
        if parts.len() + 1 != dims.len() {
            return Err(Error::validation("one (weights, bias) pair per layer"));
        }
        let layers = parts
            .into_iter()
            .zip(dims.windows(2))
            .map(|((weights, bias), w)| {
                if weights.len() != w[0] * w[1] || bias.len() != w[1] {
                    return Err(Error::validation("layer shape mismatch"));
                }
                Ok(Layer {
                    weights,
                    bias,
                    in_dim: w[0],
                    out_dim: w[1],
                })
            })
            .collect::<Result<_>>()?;
        Ok(Mlp {
            version: CHECKPOINT_VERSION,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Logits for one input.
    pub fn forward(&self, input: &[R]) -> Result<Vec<R>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if idx != last {
                for v in next.iter_mut() {
                    *v = v.max(R::zero());
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Exact reverse-mode gradients of `logit_grad . logits` with respect to
    /// every parameter.
    pub fn backward(&self, input: &[R], logit_grad: &[R]) -> Result<MlpGradients<R>> {
        self.check_input(input)?;
        if logit_grad.len() != self.output_dim() {
            return Err(Error::Dimension {
                expected: self.output_dim(),
                got: logit_grad.len(),
                context: "logit gradient length",
            });
        }
        // forward pass keeping post-activation values per layer
        let mut activations: Vec<Vec<R>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.apply(activations.last().unwrap(), &mut out);
            if idx != last {
                for v in out.iter_mut() {
                    *v = v.max(R::zero());
                }
            }
            activations.push(out);
        }
        // reverse pass
        let mut grads = MlpGradients::zeros_like(self);
        let mut upstream = logit_grad.to_vec();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let inputs = &activations[idx];
            let outputs = &activations[idx + 1];
            // rectifier mask applies to hidden layers only
            if idx != last {
                for (g, &o) in upstream.iter_mut().zip(outputs) {
                    if o <= R::zero() {
                        *g = R::zero();
                    }
                }
            }
            for o in 0..layer.out_dim {
                grads.biases[idx][o] += upstream[o];
                let row = &mut grads.weights[idx][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &x) in row.iter_mut().zip(inputs) {
                    *g += upstream[o] * x;
                }
            }
            let mut downstream = vec![R::zero(); layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (d, &w) in downstream.iter_mut().zip(row) {
                    *d += upstream[o] * w;
                }
            }
            upstream = downstream;
        }
        Ok(grads)
    }

    /// One gradient-descent step on a batch of virtual logit gradients.
    ///
    /// Per-sample logit gradients are clipped componentwise to ±`clip` and a
    /// squared-logit regularizer (`reg` times the batch mean) is added, so
    /// the effective per-sample gradient is `clip(g) + reg·2·logits/batch`.
    pub fn train_step(
        &mut self,
        batch: &[TrainSample<'_, R>],
        lr: R,
        reg: R,
        clip: R,
    ) -> Result<()> {
        if lr <= R::zero() {
            return Err(Error::validation("learning rate must be positive"));
        }
        if batch.is_empty() {
            return Ok(());
        }
        let batch_size = R::of_usize(batch.len());
        let mut total = MlpGradients::zeros_like(self);
        for sample in batch {
            let logits = self.forward(sample.input)?;
            let effective: Vec<R> = sample
                .logit_grad
                .iter()
                .zip(&logits)
                .map(|(&g, &phi)| {
                    g.max(-clip).min(clip) + reg * R::of(2.0) * phi / batch_size
                })
                .collect();
            total.add(&self.backward(sample.input, &effective)?);
        }
        for (layer, (wg, bg)) in self
            .layers
            .iter_mut()
            .zip(total.weights.iter().zip(&total.biases))
        {
            for (w, g) in layer.weights.iter_mut().zip(wg) {
                *w -= lr * *g;
            }
            for (b, g) in layer.bias.iter_mut().zip(bg) {
                *b -= lr * *g;
            }
        }
        Ok(())
    }

    /// Product of layer Frobenius norms: an upper bound on the network's
    /// Lipschitz constant (rectifiers are 1-Lipschitz).
    pub fn lipschitz_upper_bound(&self) -> R {
        self.layers
            .iter()
            .map(|l| {
                l.weights
                    .iter()
                    .map(|&w| w * w)
                    .fold(R::zero(), |a, b| a + b)
                    .sqrt()
            })
            .fold(R::one(), |a, b| a * b)
    }

    /// Versioned JSON checkpoint.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mlp: Mlp<R> = serde_json::from_str(&text)?;
        if mlp.version != CHECKPOINT_VERSION {
            return Err(Error::validation(format!(
                "unsupported checkpoint version {}",
                mlp.version
            )));
        }
        Ok(mlp)
    }

    fn check_input(&self, input: &[R]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.len(),
                context: "network input",
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::seeded_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn zero_network_zero_logits() {
        let mlp = Mlp::from_parts(
            vec![(vec![0.0; 6], vec![0.0; 2]), (vec![0.0; 4], vec![0.0; 2])],
            &[3, 2, 2],
        )
        .unwrap();
        assert_eq!(mlp.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let mlp = Mlp::from_parts(vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0])], &[2, 2])
            .unwrap();
        assert_eq!(mlp.forward(&[0.7, -1.3]).unwrap(), vec![0.7, -1.3]);
    }

    #[test]
    fn fixed_2_2_2_network_hand_computed() {
        // hidden = relu(W1 x + b1), logits = W2 hidden + b2
        let mlp = Mlp::from_parts(
            vec![
                (vec![1.0, 2.0, -1.0, 1.0], vec![0.5, -0.5]),
                (vec![1.0, -1.0, 2.0, 0.5], vec![0.0, 1.0]),
            ],
            &[2, 2, 2],
        )
        .unwrap();
        // x = (1, 1): z1 = (1+2+0.5, -1+1-0.5) = (3.5, -0.5), h = (3.5, 0)
        // logits = (3.5 - 0, 7.0 + 0 + 1) = (3.5, 8.0)
        let logits = mlp.forward(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(logits[0], 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(logits[1], 8.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_logit_gradient_zero_parameter_gradients() {
        let mut rng = seeded_rng(3);
        let mlp: Mlp<f64> = Mlp::new(&[4, 8, 3], &mut rng).unwrap();
        let g = mlp.backward(&[0.1, -0.2, 0.3, 0.4], &[0.0, 0.0, 0.0]).unwrap();
        assert!(g.weights.iter().flatten().all(|&v| v == 0.0));
        assert!(g.biases.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_logit_gradient() {
        let mut rng = seeded_rng(5);
        let mlp: Mlp<f64> = Mlp::new(&[3, 6, 2], &mut rng).unwrap();
        let x = [0.5, -0.4, 1.2];
        let g1 = [0.3, -0.7];
        let g2 = [-1.1, 0.2];
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let back_sum = mlp.backward(&x, &sum).unwrap();
        let mut back_parts = mlp.backward(&x, &g1).unwrap();
        back_parts.add(&mlp.backward(&x, &g2).unwrap());
        for (a, b) in back_sum.weights.iter().flatten().zip(back_parts.weights.iter().flatten())
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    /// Backward matches central finite differences on random small nets.
    /// Inputs that leave a hidden unit near its rectifier kink are skipped;
    /// the loss is not differentiable there.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeded_rng(9);
        let mut checked = 0;
        while checked < 100 {
            let dims = [
                rng.gen_range(2..4),
                rng.gen_range(2..5),
                rng.gen_range(2..4),
            ];
            let mlp: Mlp<f64> = Mlp::new(&dims, &mut rng).unwrap();
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if near_kink(&mlp, &x) {
                continue;
            }
            let g: Vec<f64> = (0..dims[2]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let grads = mlp.backward(&x, &g).unwrap();
            let scalar = |m: &Mlp<f64>| -> f64 {
                m.forward(&x)
                    .unwrap()
                    .iter()
                    .zip(&g)
                    .map(|(l, gg)| l * gg)
                    .sum()
            };
            let h = 1e-6;
            for layer in 0..mlp.layers.len() {
                for w_idx in 0..mlp.layers[layer].weights.len() {
                    let mut up = mlp.clone();
                    let mut dn = mlp.clone();
                    up.layers[layer].weights[w_idx] += h;
                    dn.layers[layer].weights[w_idx] -= h;
                    let fd = (scalar(&up) - scalar(&dn)) / (2.0 * h);
                    let a = grads.weights[layer][w_idx];
                    let scale = fd.abs().max(a.abs()).max(1e-4);
                    assert!((a - fd).abs() / scale <= 1e-5, "{a} vs {fd}");
                }
                for b_idx in 0..mlp.layers[layer].bias.len() {
                    let mut up = mlp.clone();
                    let mut dn = mlp.clone();
                    up.layers[layer].bias[b_idx] += h;
                    dn.layers[layer].bias[b_idx] -= h;
                    let fd = (scalar(&up) - scalar(&dn)) / (2.0 * h);
                    let a = grads.biases[layer][b_idx];
                    let scale = fd.abs().max(a.abs()).max(1e-4);
                    assert!((a - fd).abs() / scale <= 1e-5, "{a} vs {fd}");
                }
            }
            checked += 1;
        }
    }

    fn near_kink(mlp: &Mlp<f64>, x: &[f64]) -> bool {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = mlp.layers.len() - 1;
        for (idx, layer) in mlp.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if idx != last {
                if next.iter().any(|v| v.abs() < 1e-3) {
                    return true;
                }
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        false
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut rng = seeded_rng(13);
        let mut mlp: Mlp<f64> = Mlp::new(&[2, 4, 2], &mut rng).unwrap();
        let before = mlp.clone();
        let batch = [TrainSample {
            input: &[0.4, -0.9],
            logit_grad: vec![0.0, 0.0],
        }];
        mlp.train_step(&batch, 0.1, 0.0, LOGIT_GRAD_CLIP).unwrap();
        assert_eq!(mlp, before);
    }

    #[test]
    fn single_parameter_descent_step() {
        // one weight, input 1: logits = w, gradient g shrinks w by lr·g
        let mut mlp = Mlp::from_parts(vec![(vec![2.0], vec![0.0])], &[1, 1]).unwrap();
        let batch = [TrainSample {
            input: &[1.0],
            logit_grad: vec![0.5],
        }];
        // clip large enough not to bite, no regularization, bias also moves
        mlp.train_step(&batch, 0.1, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(mlp.layers[0].weights[0], 2.0 - 0.1 * 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mlp.layers[0].bias[0], -0.05, epsilon = 1e-12);
    }

    #[test]
    fn clip_limits_received_gradients() {
        let mut mlp = Mlp::from_parts(vec![(vec![1.0], vec![0.0])], &[1, 1]).unwrap();
        let batch = [TrainSample {
            input: &[1.0],
            logit_grad: vec![1000.0],
        }];
        mlp.train_step(&batch, 1.0, 0.0, 5e-4).unwrap();
        assert_abs_diff_eq!(mlp.layers[0].weights[0], 1.0 - 5e-4, epsilon = 1e-12);
    }

    /// Squared-error logit gradients on a separable toy problem drive the
    /// loss down over 100 steps.
    #[test]
    fn training_reduces_toy_loss() {
        let mut rng = seeded_rng(17);
        let mut mlp: Mlp<f64> = Mlp::new(&[2, 8, 2], &mut rng).unwrap();
        let data: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 0.0], vec![1.0, -1.0]),
            (vec![0.9, 0.2], vec![1.0, -1.0]),
            (vec![0.0, 1.0], vec![-1.0, 1.0]),
            (vec![0.1, 0.8], vec![-1.0, 1.0]),
        ];
        let loss = |m: &Mlp<f64>| -> f64 {
            data.iter()
                .map(|(x, t)| {
                    m.forward(x)
                        .unwrap()
                        .iter()
                        .zip(t)
                        .map(|(l, tt)| (l - tt) * (l - tt))
                        .sum::<f64>()
                })
                .sum()
        };
        let initial = loss(&mlp);
        for _ in 0..100 {
            let batch: Vec<TrainSample<f64>> = data
                .iter()
                .map(|(x, t)| {
                    let logits = mlp.forward(x).unwrap();
                    TrainSample {
                        input: x,
                        logit_grad: logits
                            .iter()
                            .zip(t)
                            .map(|(l, tt)| 2.0 * (l - tt))
                            .collect(),
                    }
                })
                .collect();
            mlp.train_step(&batch, 0.02, 0.0, 10.0).unwrap();
        }
        let final_loss = loss(&mlp);
        assert!(
            final_loss < initial * 0.5,
            "loss {initial} -> {final_loss}"
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = seeded_rng(19);
        let mlp: Mlp<f64> = Mlp::new(&[3, 5, 2], &mut rng).unwrap();
        let dir = std::env::temp_dir().join(format!("safelayer-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mlp.json");
        mlp.save(&path).unwrap();
        let loaded: Mlp<f64> = Mlp::load(&path).unwrap();
        assert_eq!(mlp, loaded);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn lipschitz_bound_dominates_sampled_ratios() {
        let mut rng = seeded_rng(21);
        let mlp: Mlp<f64> = Mlp::new(&[3, 6, 2], &mut rng).unwrap();
        let bound = mlp.lipschitz_upper_bound();
        for _ in 0..200 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fa = mlp.forward(&a).unwrap();
            let fb = mlp.forward(&b).unwrap();
            let num: f64 = fa
                .iter()
                .zip(&fb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let den: f64 = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if den > 1e-9 {
                assert!(num / den <= bound * (1.0 + 1e-9));
            }
        }
    }
}
