use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use super::ModelGradients;
use crate::error::{Error, Result};
use crate::numcore::{Matrix, ParameterVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!(
                "unknown activation `{other}` (expected relu or tanh)"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

/// Architecture of a fully connected classifier: input width, hidden widths,
/// number of classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output widths, got {layer_widths:?}"
            )));
        }
        if layer_widths.contains(&0) {
            return Err(Error::Config(format!("layer widths must be positive: {layer_widths:?}")));
        }
        if *layer_widths.last().unwrap() < 2 {
            return Err(Error::Config("a classifier needs at least 2 classes".into()));
        }
        Ok(Self {
            layer_widths,
            activation,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }
}

/// Evaluator bound to an [`MlpSpec`].
///
/// Weights of layer `l` live in segment `w{l}` as an `out × in` row-major
/// block, biases in `b{l}`.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    // (weight offset, bias offset, in, out) per layer
    layout: Vec<(usize, usize, usize, usize)>,
    total: usize,
}

struct Trace {
    // pre-activations and activations per layer; acts[0] is the input
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Self {
        let mut layout = Vec::with_capacity(spec.num_layers());
        let mut off = 0;
        for w in spec.layer_widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let w_off = off;
            off += fan_in * fan_out;
            let b_off = off;
            off += fan_out;
            layout.push((w_off, b_off, fan_in, fan_out));
        }
        Self {
            spec,
            layout,
            total: off,
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.total
    }

    /// Glorot-uniform weights and zero biases from `MlpSpec::seed`.
    pub fn init(&self) -> ParameterVector {
        let mut r = rng::stream(self.spec.seed, 0x1417);
        let parts = self
            .layout
            .iter()
            .enumerate()
            .flat_map(|(l, &(_, _, fan_in, fan_out))| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w: Vec<f64> = (0..fan_in * fan_out)
                    .map(|_| r.random_range(-limit..limit))
                    .collect();
                [(format!("w{l}"), w), (format!("b{l}"), vec![0.0; fan_out])]
            })
            .collect();
        ParameterVector::from_segments(parts).expect("layer names are unique")
    }

    pub fn zeros(&self) -> ParameterVector {
        let parts = self
            .layout
            .iter()
            .enumerate()
            .flat_map(|(l, &(_, _, fan_in, fan_out))| {
                [
                    (format!("w{l}"), vec![0.0; fan_in * fan_out]),
                    (format!("b{l}"), vec![0.0; fan_out]),
                ]
            })
            .collect();
        ParameterVector::from_segments(parts).expect("layer names are unique")
    }

    fn check_params(&self, theta: &ParameterVector) -> Result<()> {
        if theta.total_len() != self.total {
            return Err(Error::Shape(format!(
                "MLP {:?} has {} parameters, got {}",
                self.spec.layer_widths,
                self.total,
                theta.total_len()
            )));
        }
        Ok(())
    }

    fn check_batch(&self, features: &Matrix, labels: Option<&[usize]>) -> Result<()> {
        if features.cols() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "MLP expects {} features, batch has {}",
                self.spec.input_dim(),
                features.cols()
            )));
        }
        if let Some(labels) = labels {
            if labels.len() != features.rows() {
                return Err(Error::Shape(format!(
                    "{} feature rows but {} labels",
                    features.rows(),
                    labels.len()
                )));
            }
            let classes = self.spec.classes();
            if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
                return Err(Error::Data(format!(
                    "label {bad} out of range for {classes} classes"
                )));
            }
        }
        Ok(())
    }

    fn forward(&self, p: &[f64], x: &[f64]) -> Trace {
        let n = self.layout.len();
        let mut pre = Vec::with_capacity(n);
        let mut acts = Vec::with_capacity(n + 1);
        acts.push(x.to_vec());
        for (l, &(w_off, b_off, fan_in, fan_out)) in self.layout.iter().enumerate() {
            let input = &acts[l];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &p[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                    p[b_off + o] + crate::numcore::dot(row, input)
                })
                .collect();
            let a = if l + 1 == n {
                z.clone()
            } else {
                z.iter().map(|&v| self.spec.activation.apply(v)).collect()
            };
            pre.push(z);
            acts.push(a);
        }
        Trace { pre, acts }
    }

    /// Cross-entropy of `logits` against `label`, and `softmax − onehot`.
    fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        let mut d: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
        d[label] -= 1.0;
        (lse - logits[label], d)
    }

    /// Adds `∂loss/∂θ` for one example into `grad`.
    fn backward(&self, p: &[f64], trace: &Trace, mut delta: Vec<f64>, grad: &mut [f64]) {
        for l in (0..self.layout.len()).rev() {
            let (w_off, b_off, fan_in, fan_out) = self.layout[l];
            let input = &trace.acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                grad[b_off + o] += d;
                if d != 0.0 {
                    let g_row = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                    for (g, a) in g_row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &p[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (pv, w) in prev.iter_mut().zip(row) {
                    *pv += d * w;
                }
            }
            let act = self.spec.activation;
            for (i, pv) in prev.iter_mut().enumerate() {
                *pv *= act.derivative(trace.pre[l - 1][i], trace.acts[l][i]);
            }
            delta = prev;
        }
    }

    /// Mean cross-entropy loss and its gradient over a labeled batch.
    ///
    /// Per-example gradient rows are returned when `want_per_example` is set.
    /// Summation runs in example order, so results are bit-reproducible.
    pub fn loss_and_grads(
        &self,
        theta: &ParameterVector,
        features: &Matrix,
        labels: &[usize],
        want_per_example: bool,
    ) -> Result<ModelGradients> {
        self.check_params(theta)?;
        self.check_batch(features, Some(labels))?;
        let b = features.rows();
        let p = theta.values();
        let mut sum_grad = vec![0.0; self.total];
        let mut per_example = want_per_example.then(|| Vec::with_capacity(b * self.total));
        let mut loss_sum = 0.0;
        let mut scratch = vec![0.0; self.total];
        for (i, &label) in labels.iter().enumerate() {
            let trace = self.forward(p, features.row(i));
            let (loss, delta) = Self::cross_entropy(trace.acts.last().unwrap(), label);
            loss_sum += loss;
            match per_example.as_mut() {
                Some(rows) => {
                    scratch.iter_mut().for_each(|g| *g = 0.0);
                    self.backward(p, &trace, delta, &mut scratch);
                    for (s, g) in sum_grad.iter_mut().zip(&scratch) {
                        *s += g;
                    }
                    rows.extend_from_slice(&scratch);
                }
                None => self.backward(p, &trace, delta, &mut sum_grad),
            }
        }
        let inv = 1.0 / b as f64;
        let batch_grad: Vec<f64> = sum_grad.iter().map(|g| g * inv).collect();
        let mean_loss = loss_sum * inv;
        if !mean_loss.is_finite() || batch_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("MLP loss or gradient is not finite".into()));
        }
        let per_example_grads = per_example
            .map(|rows| Matrix::new(b, self.total, rows))
            .transpose()?;
        Ok(ModelGradients {
            batch_grad,
            per_example_grads,
            mean_loss,
            batch_size: b,
        })
    }

    pub fn loss(&self, theta: &ParameterVector, features: &Matrix, labels: &[usize]) -> Result<f64> {
        self.check_params(theta)?;
        self.check_batch(features, Some(labels))?;
        let p = theta.values();
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let trace = self.forward(p, features.row(i));
                Self::cross_entropy(trace.acts.last().unwrap(), y).0
            })
            .sum();
        Ok(total / labels.len() as f64)
    }

    pub fn predict(&self, theta: &ParameterVector, features: &Matrix) -> Result<Vec<usize>> {
        self.check_params(theta)?;
        self.check_batch(features, None)?;
        let p = theta.values();
        Ok((0..features.rows())
            .map(|i| {
                let trace = self.forward(p, features.row(i));
                let logits = trace.acts.last().unwrap();
                logits
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &z)| {
                        if z > best.1 {
                            (k, z)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect())
    }

    pub fn accuracy(&self, theta: &ParameterVector, features: &Matrix, labels: &[usize]) -> Result<f64> {
        let preds = self.predict(theta, features)?;
        let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_gradient, relative_l2_error, DEFAULT_FD_STEP};

    fn random_batch(b: usize, dim: usize, classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let x = Matrix::new(b, dim, (0..b * dim).map(|_| r.random_range(-1.0..1.0)).collect())
            .unwrap();
        let y = (0..b).map(|_| r.random_range(0..classes)).collect();
        (x, y)
    }

    #[test]
    fn zero_weights_give_uniform_loss() {
        let mlp = Mlp::new(MlpSpec::new(vec![3, 5, 4], Activation::Relu, 1).unwrap());
        let theta = mlp.zeros();
        let (x, y) = random_batch(1, 3, 4, 2);
        let g = mlp.loss_and_grads(&theta, &x, &y, false).unwrap();
        assert!((g.mean_loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_examples_have_identical_rows() {
        let mlp = Mlp::new(MlpSpec::new(vec![2, 6, 3], Activation::Tanh, 4).unwrap());
        let theta = mlp.init();
        let x = Matrix::new(5, 2, [0.3, -0.7].repeat(5)).unwrap();
        let y = vec![2; 5];
        let g = mlp.loss_and_grads(&theta, &x, &y, true).unwrap();
        let rows = g.per_example_grads.unwrap();
        for r in 1..5 {
            assert_eq!(rows.row(r), rows.row(0));
        }
        for (a, b) in g.batch_grad.iter().zip(rows.row(0)) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn batch_grad_is_mean_of_rows() {
        let mlp = Mlp::new(MlpSpec::new(vec![3, 7, 5, 3], Activation::Relu, 9).unwrap());
        let theta = mlp.init();
        let (x, y) = random_batch(6, 3, 3, 10);
        let g = mlp.loss_and_grads(&theta, &x, &y, true).unwrap();
        let rows = g.per_example_grads.as_ref().unwrap();
        for j in 0..mlp.param_count() {
            let mean: f64 = (0..6).map(|r| rows.get(r, j)).sum::<f64>() / 6.0;
            assert!((mean - g.batch_grad[j]).abs() <= 1e-10);
        }
        let plain = mlp.loss_and_grads(&theta, &x, &y, false).unwrap();
        assert_eq!(plain.per_example_grads, None);
        assert!(relative_l2_error(&plain.batch_grad, &g.batch_grad) < 1e-14);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for (seed, act) in [(1, Activation::Tanh), (2, Activation::Relu), (3, Activation::Tanh)] {
            let mlp = Mlp::new(MlpSpec::new(vec![4, 8, 6, 3], act, seed).unwrap());
            let theta = mlp.init();
            let (x, y) = random_batch(4, 4, 3, seed + 100);
            let g = mlp.loss_and_grads(&theta, &x, &y, false).unwrap();
            let fd = finite_diff_gradient(
                |p| mlp.loss(p, &x, &y).unwrap(),
                &theta,
                DEFAULT_FD_STEP,
            )
            .unwrap();
            let err = relative_l2_error(&g.batch_grad, &fd);
            assert!(err <= 1e-5, "{act}: relative error {err}");
        }
    }

    #[test]
    fn shape_and_label_errors() {
        let mlp = Mlp::new(MlpSpec::new(vec![2, 3], Activation::Relu, 0).unwrap());
        let theta = mlp.init();
        let x = Matrix::zeros(2, 3);
        assert!(matches!(
            mlp.loss_and_grads(&theta, &x, &[0, 1], false),
            Err(Error::Shape(_))
        ));
        let x = Matrix::zeros(2, 2);
        assert!(matches!(
            mlp.loss_and_grads(&theta, &x, &[0, 3], false),
            Err(Error::Data(_))
        ));
        let short = ParameterVector::flat(vec![0.0; 2]);
        assert!(matches!(
            mlp.loss_and_grads(&short, &x, &[0, 1], false),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![3], Activation::Relu, 0).is_err());
        assert!(MlpSpec::new(vec![3, 1], Activation::Relu, 0).is_err());
        assert!(MlpSpec::new(vec![3, 0, 2], Activation::Relu, 0).is_err());
        assert!("sigmoid".parse::<Activation>().is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = Mlp::new(MlpSpec::new(vec![3, 4, 2], Activation::Relu, 5).unwrap()).init();
        let b = Mlp::new(MlpSpec::new(vec![3, 4, 2], Activation::Relu, 5).unwrap()).init();
        let c = Mlp::new(MlpSpec::new(vec![3, 4, 2], Activation::Relu, 6).unwrap()).init();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.segments().len(), 4);
        assert_eq!(a.segment("b0").unwrap(), &[0.0; 4]);
    }
}
