use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Dataset, Provenance, FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Fully connected layer. `weights` is row-major, one row per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    fn forward(&self, x: &[f64], z: &mut Vec<f64>, a: &mut Vec<f64>) {
        z.clear();
        a.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let s = row.iter().zip(x).fold(self.biases[o], |s, (w, v)| s + w * v);
            z.push(s);
            a.push(self.activation.apply(s));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub learning_rate: f64,
    /// Records per gradient step; `None` means full batch.
    pub batch_size: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            inputs: FEATURES,
            hidden: vec![16, 8],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Sigmoid,
            learning_rate: 0.05,
            batch_size: Some(32),
        }
    }
}

/// Feed-forward network with a single output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub layers: Vec<Layer>,
}

impl RegressionModel {
    /// Glorot-uniform weights and zero biases, drawn from `seed`.
    pub fn new(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![config.inputs];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let activation = if i == last {
                    config.output_activation
                } else {
                    config.hidden_activation
                };
                let mut layer = Layer::zeros(w[0], w[1], activation);
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                for v in &mut layer.weights {
                    *v = rng.gen_range(-limit..limit);
                }
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Self {
        assert!(!layers.is_empty(), "model needs at least one layer");
        for w in layers.windows(2) {
            assert_eq!(w[0].outputs, w[1].inputs, "layer sizes do not chain");
        }
        assert_eq!(layers.last().unwrap().outputs, 1, "model must have one output");
        Self { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(&l.weights);
            out.extend(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&p[at..at + n]);
            at += n;
            let n = l.biases.len();
            l.biases.copy_from_slice(&p[at..at + n]);
            at += n;
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let (mut z, mut a) = (Vec::new(), x.to_vec());
        let mut next = Vec::new();
        for l in &self.layers {
            l.forward(&a, &mut z, &mut next);
            std::mem::swap(&mut a, &mut next);
        }
        a[0]
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// [`params`](Self::params).
    pub fn loss_and_gradient<X: AsRef<[f64]>>(&self, xs: &[X], ys: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(xs.len(), ys.len());
        let n = xs.len() as f64;
        let mut grad = vec![0.0; self.param_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |at, l| {
                let o = *at;
                *at += l.weights.len() + l.biases.len();
                Some(o)
            })
            .collect();
        let mut zs: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let x = x.as_ref();
            for i in 0..self.layers.len() {
                let (before, after) = acts.split_at_mut(i);
                let input = if i == 0 { x } else { &before[i - 1] };
                self.layers[i].forward(input, &mut zs[i], &mut after[0]);
            }
            let out = acts.last().unwrap()[0];
            let err = out - y;
            loss += err * err;

            let mut delta = vec![2.0 * err / n];
            for i in (0..self.layers.len()).rev() {
                let l = &self.layers[i];
                for (d, (z, a)) in delta.iter_mut().zip(zs[i].iter().zip(&acts[i])) {
                    *d *= l.activation.derivative(*z, *a);
                }
                let input = if i == 0 { x } else { &acts[i - 1] };
                let g = &mut grad[offsets[i]..];
                for (o, d) in delta.iter().enumerate() {
                    for (j, v) in input.iter().enumerate() {
                        g[o * l.inputs + j] += d * v;
                    }
                    g[l.weights.len() + o] += d;
                }
                if i > 0 {
                    let mut prev = vec![0.0; l.inputs];
                    for (o, d) in delta.iter().enumerate() {
                        for (j, p) in prev.iter_mut().enumerate() {
                            *p += l.weights[o * l.inputs + j] * d;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (loss / n, grad)
    }
}

/// Mean of squared differences.
pub(crate) fn mse(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    sum / predictions.len() as f64
}

/// Mean squared error of `model` on `ds`. NaN for an empty dataset.
pub fn evaluate(model: &RegressionModel, ds: &Dataset) -> f64 {
    let preds: Vec<f64> = ds.records.iter().map(|r| model.predict(&r.features())).collect();
    mse(&preds, &ds.targets())
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` over all
/// parameters, where the numeric gradient is a central difference with
/// step `epsilon`. Pairs with both magnitudes below `1e-10` count as exact.
pub fn gradient_check<X: AsRef<[f64]>>(
    model: &RegressionModel,
    xs: &[X],
    ys: &[f64],
    epsilon: f64,
) -> f64 {
    assert!(epsilon > 0.0 && epsilon <= 1e-3, "epsilon must be in (0, 1e-3]");
    let (_, analytic) = model.loss_and_gradient(xs, ys);
    let base = model.params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, &g) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + epsilon;
        probe.set_params(&p);
        let up = probe.loss_and_gradient(xs, ys).0;
        p[k] = base[k] - epsilon;
        probe.set_params(&p);
        let down = probe.loss_and_gradient(xs, ys).0;
        let numeric = (up - down) / (2.0 * epsilon);
        let scale = g.abs().max(numeric.abs());
        if scale > 1e-10 {
            worst = worst.max((g - numeric).abs() / scale);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub seed: u64,
    /// Training loss after each epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub mse_train: f64,
    pub mse_val: f64,
    /// Filled in by callers that hold a test set.
    pub mse_test: Option<f64>,
    pub sizes: SplitSizes,
}

/// Gradient descent on mean squared error. With a batch size, records are
/// reshuffled every epoch and the last batch may be short.
pub fn train(
    config: &ModelConfig,
    train: &Dataset,
    val: &Dataset,
    epochs: usize,
    seed: u64,
) -> Result<(RegressionModel, TrainReport), AnalyticsError> {
    if epochs == 0 {
        return Err(AnalyticsError::NoEpochs);
    }
    if train.is_empty() {
        return Err(AnalyticsError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(AnalyticsError::EmptySplit("validation"));
    }
    if train.provenance != Provenance::Scaled || val.provenance != Provenance::Scaled {
        return Err(AnalyticsError::NotScaled);
    }
    let xs = train.inputs();
    let ys = train.targets();
    let mut model = RegressionModel::new(config, seed);
    let mut params = model.params();
    let batch = config.batch_size.unwrap_or(xs.len()).clamp(1, xs.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0fb_a7c4);
    let mut report = TrainReport {
        epochs,
        seed,
        train_loss: Vec::with_capacity(epochs),
        val_loss: Vec::with_capacity(epochs),
        mse_train: f64::NAN,
        mse_val: f64::NAN,
        mse_test: None,
        sizes: SplitSizes {
            train: train.len(),
            val: val.len(),
            test: 0,
        },
    };
    for epoch in 1..=epochs {
        if batch < xs.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let bx: Vec<_> = chunk.iter().map(|&i| xs[i]).collect();
            let by: Vec<_> = chunk.iter().map(|&i| ys[i]).collect();
            let (_, grad) = model.loss_and_gradient(&bx, &by);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
            model.set_params(&params);
        }
        let (lt, lv) = (evaluate(&model, train), evaluate(&model, val));
        if !(lt.is_finite() && lv.is_finite()) {
            return Err(AnalyticsError::NonFiniteLoss { epoch });
        }
        report.train_loss.push(lt);
        report.val_loss.push(lv);
        log::trace!("epoch {epoch}: train {lt:.6} val {lv:.6}");
    }
    report.mse_train = *report.train_loss.last().unwrap();
    report.mse_val = *report.val_loss.last().unwrap();
    Ok((model, report))
}
