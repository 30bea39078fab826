//! Feedforward neural-network surrogate: a plain multilayer perceptron with
//! ReLU hidden layers and an identity output, trained with mini-batch Adam on
//! mean-squared error.
//!
//! Everything is implemented directly on dense `f64` matrices with samples as
//! columns. Training is strictly sequential over batches and seeded, so a
//! fixed `(data, config)` pair reproduces the final parameters bit-for-bit.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{split, Dataset};
use crate::numerics::{seed_domain, Rng};
use crate::{Error, Result};

/// Fraction of rows used for training in the repeated-trial protocol.
pub const TRAIN_FRACTION: f64 = 0.8;

/// A fully-connected network. `weights[l]` maps layer `l` activations to
/// layer `l+1` pre-activations (`dims[l+1] × dims[l]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub seed: u64,
}

/// Adam training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, train_size: usize) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > train_size {
            return Err(Error::InvalidParameter(format!(
                "batch_size must lie in 1..={train_size}, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Test-set error summary, averaged over trials. All MSEs are in the
/// dataset's normalized units; group MSEs average over that group's columns
/// only, the total over all columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse_total: f64,
    pub mse_coords: f64,
    pub mse_forces: f64,
    pub mse_freqs: f64,
    pub trials: usize,
    pub per_trial_total: Vec<f64>,
    pub per_trial_coords: Vec<f64>,
    pub per_trial_forces: Vec<f64>,
    pub per_trial_freqs: Vec<f64>,
    /// Mean wall-clock seconds per training run.
    pub train_time_s: f64,
    /// Mean wall-clock seconds per test-set evaluation.
    pub test_time_s: f64,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

impl MlpModel {
    /// Random initialization: uniform weights in `±√(6/fan_in)` (He-style
    /// scaling for ReLU), zero biases. Draws happen layer by layer in
    /// column-major entry order from one seeded stream.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs at least input and output layers".into(),
            ));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(
                "layer dimensions must be positive".into(),
            ));
        }
        let mut rng = Rng::new(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for l in 0..layer_dims.len() - 1 {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let entries: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            weights.push(DMatrix::from_vec(fan_out, fan_in, entries));
            biases.push(DVector::zeros(fan_out));
        }
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            seed,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn n_parameters(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.len())
            .chain(self.biases.iter().map(|b| b.len()))
            .sum()
    }

    fn check_finite(&self) -> Result<()> {
        let finite = self
            .weights
            .iter()
            .all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "model parameters must be finite".into(),
            ))
        }
    }

    /// Forward pass with samples as columns (`n_inputs × batch` in,
    /// `n_outputs × batch` out). ReLU on hidden layers, identity output.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.nrows() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                context: "forward input rows",
                expected: self.n_inputs(),
                got: inputs.nrows(),
            });
        }
        let mut z = inputs.clone();
        for l in 0..self.n_layers() {
            let mut a = &self.weights[l] * z;
            for mut col in a.column_iter_mut() {
                col += &self.biases[l];
            }
            z = if l + 1 < self.n_layers() {
                a.map(relu)
            } else {
                a
            };
        }
        Ok(z)
    }

    pub fn forward(&self, input: &DVector<f64>) -> Result<DVector<f64>> {
        let out = self.forward_batch(&DMatrix::from_column_slice(input.len(), 1, input.as_slice()))?;
        Ok(out.column(0).into_owned())
    }

    pub fn to_json_string(&self, train_config: Option<&TrainConfig>) -> Result<String> {
        self.check_finite()?;
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(
            self,
            train_config,
        ))?)
    }

    pub fn save(&self, path: &Path, train_config: Option<&TrainConfig>) -> Result<()> {
        let mut text = self.to_json_string(train_config)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Loads a model file, returning the model and the training configuration
    /// it was produced with (when recorded).
    pub fn load(path: &Path) -> Result<(Self, Option<TrainConfig>)> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        file.into_model(path)
    }
}

/// On-disk model schema; weight matrices are stored row-major.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: String,
    output_activation: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
}

impl ModelFile {
    fn from_model(m: &MlpModel, cfg: Option<&TrainConfig>) -> Self {
        ModelFile {
            layer_dims: m.layer_dims.clone(),
            weights: m
                .weights
                .iter()
                .map(|w| w.transpose().as_slice().to_vec())
                .collect(),
            biases: m.biases.iter().map(|b| b.as_slice().to_vec()).collect(),
            hidden_activation: "relu".into(),
            output_activation: "identity".into(),
            seed: m.seed,
            train_config: cfg.copied(),
        }
    }

    fn into_model(self, path: &Path) -> Result<(MlpModel, Option<TrainConfig>)> {
        let bad = |reason: String| Error::Parse {
            path: path.display().to_string(),
            reason,
        };
        if self.hidden_activation != "relu" || self.output_activation != "identity" {
            return Err(bad(format!(
                "unsupported activations {}/{}",
                self.hidden_activation, self.output_activation
            )));
        }
        let n_layers = self.layer_dims.len().saturating_sub(1);
        if self.weights.len() != n_layers || self.biases.len() != n_layers || n_layers == 0 {
            return Err(bad("layer count mismatch".into()));
        }
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (rows, cols) = (self.layer_dims[l + 1], self.layer_dims[l]);
            if self.weights[l].len() != rows * cols || self.biases[l].len() != rows {
                return Err(bad(format!("layer {l} has wrong parameter counts")));
            }
            weights.push(DMatrix::from_row_slice(rows, cols, &self.weights[l]));
            biases.push(DVector::from_column_slice(&self.biases[l]));
        }
        let model = MlpModel {
            layer_dims: self.layer_dims,
            weights,
            biases,
            seed: self.seed,
        };
        model.check_finite().map_err(|_| bad("non-finite parameters".into()))?;
        Ok((model, self.train_config))
    }
}

/// Mean-squared-error loss and its gradients for one batch (samples as
/// columns). The loss averages over both batch columns and output rows.
pub fn loss_and_gradients(
    model: &MlpModel,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> Result<(f64, Vec<DMatrix<f64>>, Vec<DVector<f64>>)> {
    if targets.nrows() != model.n_outputs() || targets.ncols() != inputs.ncols() {
        return Err(Error::DimensionMismatch {
            context: "loss targets",
            expected: model.n_outputs() * inputs.ncols(),
            got: targets.nrows() * targets.ncols(),
        });
    }
    let n_layers = model.n_layers();
    // Forward, keeping post-activation values of every layer.
    let mut activations: Vec<DMatrix<f64>> = Vec::with_capacity(n_layers + 1);
    activations.push(inputs.clone());
    for l in 0..n_layers {
        let mut a = &model.weights[l] * activations.last().unwrap();
        for mut col in a.column_iter_mut() {
            col += &model.biases[l];
        }
        activations.push(if l + 1 < n_layers { a.map(relu) } else { a });
    }
    let predictions = activations.last().unwrap();
    let diff = predictions - targets;
    let denom = (targets.nrows() * targets.ncols()) as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / denom;

    // Backward. `delta` is dL/d(pre-activation) of the current layer; a
    // ReLU's pre-activation is negative exactly where its output is zero, so
    // the stored activations suffice to mask the gradient.
    let mut grad_w = vec![DMatrix::zeros(0, 0); n_layers];
    let mut grad_b = vec![DVector::zeros(0); n_layers];
    let mut delta = diff * (2.0 / denom);
    for l in (0..n_layers).rev() {
        grad_w[l] = &delta * activations[l].transpose();
        grad_b[l] = DVector::from_fn(delta.nrows(), |r, _| delta.row(r).sum());
        if l > 0 {
            let mut back = model.weights[l].transpose() * delta;
            back.zip_apply(&activations[l], |g, z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = back;
        }
    }
    Ok((loss, grad_w, grad_b))
}

struct Adam {
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
    step: u64,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        Adam {
            m_w: model.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            v_w: model.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            m_b: model.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            v_b: model.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            step: 0,
        }
    }

    fn update(
        &mut self,
        model: &mut MlpModel,
        grad_w: &[DMatrix<f64>],
        grad_b: &[DVector<f64>],
        cfg: &TrainConfig,
    ) {
        self.step += 1;
        let bc1 = 1.0 - cfg.adam_beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.adam_beta2.powi(self.step as i32);
        for l in 0..model.n_layers() {
            let apply = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = cfg.adam_beta1 * *m + (1.0 - cfg.adam_beta1) * g;
                *v = cfg.adam_beta2 * *v + (1.0 - cfg.adam_beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            };
            for (i, g) in grad_w[l].iter().enumerate() {
                apply(
                    &mut model.weights[l][i],
                    &mut self.m_w[l][i],
                    &mut self.v_w[l][i],
                    *g,
                );
            }
            for (i, g) in grad_b[l].iter().enumerate() {
                apply(
                    &mut model.biases[l][i],
                    &mut self.m_b[l][i],
                    &mut self.v_b[l][i],
                    *g,
                );
            }
        }
    }
}

/// Transposes dataset rows into sample-as-column matrices.
fn to_columns(d: &Dataset) -> (DMatrix<f64>, DMatrix<f64>) {
    (d.inputs.transpose(), d.outputs.transpose())
}

/// Trains a fresh network on the dataset: layer dims are
/// `[n_inputs, hidden..., n_outputs]`. Initialization and the per-epoch batch
/// shuffles derive from `cfg.seed`; given identical data and config the
/// returned parameters are bit-identical.
pub fn train(data: &Dataset, hidden: &[usize], cfg: &TrainConfig) -> Result<MlpModel> {
    cfg.validate(data.len())?;
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(data.n_inputs());
    dims.extend_from_slice(hidden);
    dims.push(data.n_outputs());

    let mut model = MlpModel::init(&dims, Rng::derive(cfg.seed, seed_domain::INIT, 0))?;
    let mut shuffle_rng = Rng::new(Rng::derive(cfg.seed, seed_domain::SHUFFLE, 0));
    let mut adam = Adam::new(&model);
    let (x, y) = to_columns(data);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select_columns(batch.iter());
            let yb = y.select_columns(batch.iter());
            let (loss, grad_w, grad_b) = loss_and_gradients(&model, &xb, &yb)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            adam.update(&mut model, &grad_w, &grad_b, cfg);
        }
    }
    model.check_finite()?;
    Ok(model)
}

fn group_mse(diff: &DMatrix<f64>, range: std::ops::Range<usize>) -> f64 {
    if range.is_empty() {
        return 0.0;
    }
    let cols = range.len();
    let mut sum = 0.0;
    // `diff` has samples as columns and output channels as rows.
    for r in range {
        sum += diff.row(r).iter().map(|d| d * d).sum::<f64>();
    }
    sum / (cols * diff.ncols()) as f64
}

/// Test-set mean squared error of a trained model, total and per output
/// group, in the dataset's normalized units.
pub fn evaluate(model: &MlpModel, test: &Dataset) -> Result<EvalReport> {
    if model.n_outputs() != test.n_outputs() || model.n_inputs() != test.n_inputs() {
        return Err(Error::DimensionMismatch {
            context: "evaluation layout",
            expected: test.n_inputs() + test.n_outputs(),
            got: model.n_inputs() + model.n_outputs(),
        });
    }
    let started = Instant::now();
    let (x, y) = to_columns(test);
    let diff = model.forward_batch(&x)? - y;
    let layout = test.layout;
    let mse_total = group_mse(&diff, 0..layout.total());
    let mse_coords = group_mse(&diff, layout.coord_range());
    let mse_forces = group_mse(&diff, layout.force_range());
    let mse_freqs = group_mse(&diff, layout.freq_range());
    let test_time_s = started.elapsed().as_secs_f64();
    Ok(EvalReport {
        mse_total,
        mse_coords,
        mse_forces,
        mse_freqs,
        trials: 1,
        per_trial_total: vec![mse_total],
        per_trial_coords: vec![mse_coords],
        per_trial_forces: vec![mse_forces],
        per_trial_freqs: vec![mse_freqs],
        train_time_s: 0.0,
        test_time_s,
    })
}

/// The repeated-trial protocol: each trial re-splits the fixed dataset
/// (80-20) and retrains from a fresh initialization, with both seeds derived
/// from `cfg.seed` and the trial index; reported MSEs and wall-clock times
/// are means over trials.
pub fn run_trials(
    data: &Dataset,
    hidden: &[usize],
    cfg: &TrainConfig,
    trials: usize,
) -> Result<EvalReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut report = EvalReport {
        mse_total: 0.0,
        mse_coords: 0.0,
        mse_forces: 0.0,
        mse_freqs: 0.0,
        trials,
        per_trial_total: Vec::with_capacity(trials),
        per_trial_coords: Vec::with_capacity(trials),
        per_trial_forces: Vec::with_capacity(trials),
        per_trial_freqs: Vec::with_capacity(trials),
        train_time_s: 0.0,
        test_time_s: 0.0,
    };
    for trial in 0..trials {
        let split_seed = Rng::derive(cfg.seed, seed_domain::SPLIT, trial as u64);
        let trial_cfg = TrainConfig {
            seed: Rng::derive(cfg.seed, seed_domain::TRIAL, trial as u64),
            ..*cfg
        };
        let (train_set, test_set) = split(data, TRAIN_FRACTION, split_seed)?;
        let started = Instant::now();
        let model = train(&train_set, hidden, &trial_cfg)?;
        report.train_time_s += started.elapsed().as_secs_f64();
        let eval = evaluate(&model, &test_set)?;
        report.test_time_s += eval.test_time_s;
        report.per_trial_total.push(eval.mse_total);
        report.per_trial_coords.push(eval.mse_coords);
        report.per_trial_forces.push(eval.mse_forces);
        report.per_trial_freqs.push(eval.mse_freqs);
    }
    let n = trials as f64;
    report.mse_total = report.per_trial_total.iter().sum::<f64>() / n;
    report.mse_coords = report.per_trial_coords.iter().sum::<f64>() / n;
    report.mse_forces = report.per_trial_forces.iter().sum::<f64>() / n;
    report.mse_freqs = report.per_trial_freqs.iter().sum::<f64>() / n;
    report.train_time_s /= n;
    report.test_time_s /= n;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{OutputLayout, Scales};
    use approx::assert_relative_eq;

    /// A synthetic dataset with the given output builder.
    fn synthetic(n: usize, seed: u64, layout: OutputLayout, f: impl Fn(f64, f64) -> Vec<f64>) -> Dataset {
        let mut rng = Rng::new(seed);
        let mut inputs = DMatrix::zeros(n, 2);
        let mut outputs = DMatrix::zeros(n, layout.total());
        for i in 0..n {
            let (u, v) = (rng.uniform01(), rng.uniform01());
            inputs[(i, 0)] = u;
            inputs[(i, 1)] = v;
            for (j, y) in f(u, v).into_iter().enumerate() {
                outputs[(i, j)] = y;
            }
        }
        Dataset {
            inputs,
            outputs,
            layout,
            scales: Scales::default(),
            seed,
            structure_fingerprint: "synthetic".into(),
            provenance: None,
        }
    }

    #[test]
    fn forward_zero_and_identity() {
        let mut model = MlpModel::init(&[3, 4, 2], 1).unwrap();
        for w in &mut model.weights {
            w.fill(0.0);
        }
        let out = model.forward(&DVector::from_vec(vec![1.0, -2.0, 3.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0]);

        let identity = MlpModel {
            layer_dims: vec![3, 3],
            weights: vec![DMatrix::identity(3, 3)],
            biases: vec![DVector::zeros(3)],
            seed: 0,
        };
        let input = DVector::from_vec(vec![0.5, -1.5, 2.0]);
        // Single layer means identity output activation: negatives pass.
        assert_eq!(identity.forward(&input).unwrap(), input);
    }

    #[test]
    fn forward_matches_hand_computation() {
        let model = MlpModel {
            layer_dims: vec![2, 2, 1],
            weights: vec![
                DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 0.75, 0.1]),
                DMatrix::from_row_slice(1, 2, &[2.0, -1.0]),
            ],
            biases: vec![DVector::from_vec(vec![0.1, -0.2]), DVector::from_vec(vec![0.05])],
            seed: 0,
        };
        // Hidden pre-activations (0.1, 0.75) stay positive.
        let out = model.forward(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_relative_eq!(out[0], 2.0 * 0.1 - 0.75 + 0.05, epsilon = 1e-15);
        // Both hidden units clipped by the rectifier.
        let out = model.forward(&DVector::from_vec(vec![-1.0, 0.0])).unwrap();
        assert_relative_eq!(out[0], 0.05, epsilon = 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = MlpModel::init(&[4, 8, 8, 3], 7).unwrap();
        let mut rng = Rng::new(13);
        let x = DMatrix::from_fn(4, 16, |_, _| rng.uniform(-1.0, 1.0));
        let y = DMatrix::from_fn(3, 16, |_, _| rng.uniform(-1.0, 1.0));
        let (_, grad_w, grad_b) = loss_and_gradients(&model, &x, &y).unwrap();

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let mut probe = model.clone();
        for l in 0..probe.n_layers() {
            for i in 0..probe.weights[l].len() {
                let orig = probe.weights[l][i];
                probe.weights[l][i] = orig + h;
                let (lp, _, _) = loss_and_gradients(&probe, &x, &y).unwrap();
                probe.weights[l][i] = orig - h;
                let (lm, _, _) = loss_and_gradients(&probe, &x, &y).unwrap();
                probe.weights[l][i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let g = grad_w[l][i];
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            }
            for i in 0..probe.biases[l].len() {
                let orig = probe.biases[l][i];
                probe.biases[l][i] = orig + h;
                let (lp, _, _) = loss_and_gradients(&probe, &x, &y).unwrap();
                probe.biases[l][i] = orig - h;
                let (lm, _, _) = loss_and_gradients(&probe, &x, &y).unwrap();
                probe.biases[l][i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let g = grad_b[l][i];
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            }
        }
        assert!(worst <= 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn constant_targets_reach_tiny_loss() {
        let layout = OutputLayout {
            coords: 1,
            forces: 1,
            frequencies: 1,
        };
        let data = synthetic(64, 5, layout, |_, _| vec![0.3, -0.2, 0.7]);
        let cfg = TrainConfig {
            seed: 9,
            ..TrainConfig::default()
        };
        let model = train(&data, &[8], &cfg).unwrap();
        let report = evaluate(&model, &data).unwrap();
        assert!(
            report.mse_total <= 1e-6,
            "constant fit MSE {}",
            report.mse_total
        );
    }

    #[test]
    fn linear_map_smoke_test() {
        let layout = OutputLayout {
            coords: 1,
            forces: 1,
            frequencies: 0,
        };
        let data = synthetic(500, 17, layout, |u, v| {
            vec![0.8 * u - 0.3 * v + 0.1, -0.5 * u + 0.6 * v]
        });
        let cfg = TrainConfig {
            seed: 3,
            ..TrainConfig::default()
        };
        let (train_set, test_set) = split(&data, TRAIN_FRACTION, 101).unwrap();
        let model = train(&train_set, &[64, 64, 64], &cfg).unwrap();
        let report = evaluate(&model, &test_set).unwrap();
        assert!(
            report.mse_total <= 1e-4,
            "linear map test MSE {}",
            report.mse_total
        );
        assert_eq!(report.mse_freqs, 0.0);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let layout = OutputLayout {
            coords: 2,
            forces: 0,
            frequencies: 0,
        };
        let data = synthetic(40, 23, layout, |u, v| vec![u * v, u - v]);
        let cfg = TrainConfig {
            epochs: 5,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = train(&data, &[16, 16], &cfg).unwrap();
        let b = train(&data, &[16, 16], &cfg).unwrap();
        for l in 0..a.n_layers() {
            for (wa, wb) in a.weights[l].iter().zip(b.weights[l].iter()) {
                assert_eq!(wa.to_bits(), wb.to_bits());
            }
            for (ba, bb) in a.biases[l].iter().zip(b.biases[l].iter()) {
                assert_eq!(ba.to_bits(), bb.to_bits());
            }
        }
        let other = train(
            &data,
            &[16, 16],
            &TrainConfig {
                seed: 78,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a.weights[0], other.weights[0]);
    }

    #[test]
    fn divergence_is_reported() {
        let layout = OutputLayout {
            coords: 1,
            forces: 0,
            frequencies: 0,
        };
        // Adam caps each parameter step near the learning rate, so the rate
        // must be absurd enough for two stacked layers to overflow f64.
        let data = synthetic(64, 31, layout, |u, v| vec![u + v]);
        let cfg = TrainConfig {
            learning_rate: 1e160,
            epochs: 3,
            seed: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&data, &[8, 8], &cfg),
            Err(Error::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn zero_model_mse_equals_mean_squared_targets() {
        let layout = OutputLayout {
            coords: 1,
            forces: 2,
            frequencies: 1,
        };
        let data = synthetic(30, 41, layout, |u, v| vec![u, v, u + v, u - v]);
        let mut model = MlpModel::init(&[2, 4, 4], 1).unwrap();
        for w in &mut model.weights {
            w.fill(0.0);
        }
        let report = evaluate(&model, &data).unwrap();
        let mean_sq = |range: std::ops::Range<usize>| {
            let mut sum = 0.0;
            for i in 0..data.len() {
                for c in range.clone() {
                    sum += data.outputs[(i, c)] * data.outputs[(i, c)];
                }
            }
            sum / (data.len() * range.len()) as f64
        };
        assert_relative_eq!(report.mse_coords, mean_sq(0..1), epsilon = 1e-14);
        assert_relative_eq!(report.mse_forces, mean_sq(1..3), epsilon = 1e-14);
        assert_relative_eq!(report.mse_freqs, mean_sq(3..4), epsilon = 1e-14);
        assert_relative_eq!(report.mse_total, mean_sq(0..4), epsilon = 1e-14);
    }

    #[test]
    fn single_trial_matches_manual_protocol() {
        let layout = OutputLayout {
            coords: 1,
            forces: 1,
            frequencies: 0,
        };
        let data = synthetic(50, 59, layout, |u, v| vec![u, v]);
        let cfg = TrainConfig {
            epochs: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let report = run_trials(&data, &[8], &cfg, 1).unwrap();

        let split_seed = Rng::derive(cfg.seed, seed_domain::SPLIT, 0);
        let trial_cfg = TrainConfig {
            seed: Rng::derive(cfg.seed, seed_domain::TRIAL, 0),
            ..cfg
        };
        let (train_set, test_set) = split(&data, TRAIN_FRACTION, split_seed).unwrap();
        let model = train(&train_set, &[8], &trial_cfg).unwrap();
        let manual = evaluate(&model, &test_set).unwrap();
        assert_eq!(report.mse_total, manual.mse_total);
        assert_eq!(report.per_trial_total, vec![manual.mse_total]);
    }

    #[test]
    fn trial_means_are_arithmetic_means() {
        let layout = OutputLayout {
            coords: 2,
            forces: 0,
            frequencies: 0,
        };
        let data = synthetic(50, 61, layout, |u, v| vec![u * u, v]);
        let cfg = TrainConfig {
            epochs: 3,
            seed: 15,
            ..TrainConfig::default()
        };
        let report = run_trials(&data, &[8], &cfg, 3).unwrap();
        assert_eq!(report.trials, 3);
        assert_eq!(report.per_trial_total.len(), 3);
        assert_relative_eq!(
            report.mse_total,
            report.per_trial_total.iter().sum::<f64>() / 3.0,
            epsilon = 1e-15
        );
        // Distinct splits/initializations give distinct trial errors.
        assert_ne!(report.per_trial_total[0], report.per_trial_total[1]);
    }

    #[test]
    fn model_json_round_trip() {
        let model = MlpModel::init(&[3, 5, 2], 99).unwrap();
        let cfg = TrainConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path, Some(&cfg)).unwrap();
        let (back, back_cfg) = MlpModel::load(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_cfg, Some(cfg));
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(MlpModel::init(&[4], 0).is_err());
        assert!(MlpModel::init(&[4, 0, 2], 0).is_err());
    }
}
