//! Self-contained differentiable models with mini-batch SGD.
//!
//! Two architectures are supported: multinomial logistic regression and a
//! small dense network with tanh hidden layers. Both share one parameter
//! layout: per layer a row-major `(fan_in + 1) x fan_out` block whose last
//! row is the bias. All arithmetic is `f64` with fixed iteration order, so
//! every operation here is bit-reproducible for a given seed.

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::DataContainer;
use crate::error::{FedError, Result};
use crate::seeding;

const INIT_WEIGHT_RANGE: f64 = 0.05;

/// Flat model parameters plus their per-layer `(rows, cols)` shape,
/// `rows = fan_in + 1` (bias row included). The unit exchanged between
/// server and clients; immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    shape: Vec<(usize, usize)>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, shape: Vec<(usize, usize)>) -> Result<Self> {
        let expected: usize = shape.iter().map(|&(r, c)| r * c).sum();
        if values.len() != expected {
            return Err(FedError::Shape(format!(
                "{} values do not fill shape {shape:?} ({expected} slots)",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(FedError::Argument(format!(
                "parameter values must be finite, found {bad}"
            )));
        }
        Ok(Self { values, shape })
    }

    pub fn zeros(shape: Vec<(usize, usize)>) -> Self {
        let len = shape.iter().map(|&(r, c)| r * c).sum();
        Self {
            values: vec![0.0; len],
            shape,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &[(usize, usize)] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Serialized size under the fixed 8-byte-per-value encoding.
    pub fn byte_size(&self) -> u64 {
        self.values.len() as u64 * 8
    }
}

/// Model architectures available to experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticRegression,
    Mlp,
}

/// Architecture description from which the parameter shape is derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn logistic_regression(input_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::LogisticRegression,
            input_dim,
            hidden_dims: Vec::new(),
            num_classes,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim,
            hidden_dims,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(FedError::Argument("input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(FedError::Argument("num_classes must be at least 2".into()));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(FedError::Argument("hidden dims must be positive".into()));
        }
        if self.kind == ModelKind::LogisticRegression && !self.hidden_dims.is_empty() {
            return Err(FedError::Argument(
                "logistic regression takes no hidden layers".into(),
            ));
        }
        Ok(())
    }

    /// Logical `(fan_in, fan_out)` per layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend_from_slice(&self.hidden_dims);
        widths.push(self.num_classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Storage shape per layer: `(fan_in + 1, fan_out)`.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layer_dims().iter().map(|&(i, o)| (i + 1, o)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(r, c)| r * c).sum()
    }
}

/// Local training hyper-parameters. `batch_size` of `None` means full batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
}

/// Evaluation result on one dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
    pub sample_count: usize,
}

/// Draws initial parameters: weights uniform in `[-0.05, 0.05]`, biases
/// zero. Deterministic for a fixed `(spec, seed)` pair.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    let mut rng = seeding::rng_from(seed);
    let shapes = spec.layer_shapes();
    let mut values = Vec::with_capacity(spec.param_count());
    for &(rows, cols) in &shapes {
        for row in 0..rows {
            for _ in 0..cols {
                if row + 1 == rows {
                    values.push(0.0); // bias row
                } else {
                    values.push(rng.random_range(-INIT_WEIGHT_RANGE..=INIT_WEIGHT_RANGE));
                }
            }
        }
    }
    ParamVector::new(values, shapes).expect("freshly drawn parameters are well-formed")
}

fn check_compat(params: &ParamVector, spec: &ModelSpec) -> Result<()> {
    if params.shape() != spec.layer_shapes().as_slice() {
        return Err(FedError::Shape(format!(
            "parameter shape {:?} does not match spec shape {:?}",
            params.shape(),
            spec.layer_shapes()
        )));
    }
    Ok(())
}

fn check_data(spec: &ModelSpec, data: &DataContainer) -> Result<()> {
    if data.is_empty() {
        return Err(FedError::EmptyDataset);
    }
    if data.feature_dim() != spec.input_dim {
        return Err(FedError::Shape(format!(
            "data has {} features, model expects {}",
            data.feature_dim(),
            spec.input_dim
        )));
    }
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= spec.num_classes) {
        return Err(FedError::Argument(format!(
            "label {bad} out of range for model with {} classes",
            spec.num_classes
        )));
    }
    Ok(())
}

/// `values` slice of one layer given the per-layer shapes.
fn layer_slices<'a>(values: &'a [f64], shapes: &[(usize, usize)]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(shapes.len());
    let mut off = 0;
    for &(r, c) in shapes {
        out.push(&values[off..off + r * c]);
        off += r * c;
    }
    out
}

/// Affine map of a batch: `out[r][j] = sum_i x[r][i] w[i][j] + w[fan_in][j]`.
fn affine(x: &[f64], rows: usize, fan_in: usize, weights: &[f64], fan_out: usize) -> Vec<f64> {
    let bias = &weights[fan_in * fan_out..];
    let mut out = vec![0.0; rows * fan_out];
    for r in 0..rows {
        let xr = &x[r * fan_in..(r + 1) * fan_in];
        let or = &mut out[r * fan_out..(r + 1) * fan_out];
        or.copy_from_slice(bias);
        for (i, &xi) in xr.iter().enumerate() {
            let wrow = &weights[i * fan_out..(i + 1) * fan_out];
            for (o, &w) in or.iter_mut().zip(wrow) {
                *o += xi * w;
            }
        }
    }
    out
}

fn tanh_inplace(v: &mut [f64]) {
    for x in v {
        *x = x.tanh();
    }
}

/// Row-wise softmax into probabilities (max-shifted for stability).
fn softmax_rows(logits: &mut [f64], rows: usize, classes: usize) {
    for r in 0..rows {
        let row = &mut logits[r * classes..(r + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Activations after every layer for a batch: `acts[0]` is the input,
/// `acts[last]` the output logits (pre-softmax).
fn forward_layers(
    values: &[f64],
    spec: &ModelSpec,
    features: &[f64],
    rows: usize,
) -> Vec<Vec<f64>> {
    let shapes = spec.layer_shapes();
    let layers = layer_slices(values, &shapes);
    let dims = spec.layer_dims();
    let mut acts: Vec<Vec<f64>> = vec![features.to_vec()];
    for (l, (&(fan_in, fan_out), weights)) in dims.iter().zip(&layers).enumerate() {
        let mut z = affine(acts[l].as_slice(), rows, fan_in, weights, fan_out);
        if l + 1 < dims.len() {
            tanh_inplace(&mut z);
        }
        acts.push(z);
    }
    acts
}

/// Class-probability matrix (`rows x num_classes`, each row summing to 1)
/// for a batch of feature rows.
pub fn forward(
    params: &ParamVector,
    spec: &ModelSpec,
    features: &[f64],
    rows: usize,
) -> Result<Vec<f64>> {
    check_compat(params, spec)?;
    if features.len() != rows * spec.input_dim {
        return Err(FedError::Shape(format!(
            "feature buffer holds {} values, expected {} rows x {}",
            features.len(),
            rows,
            spec.input_dim
        )));
    }
    let mut logits = forward_layers(params.values(), spec, features, rows)
        .pop()
        .expect("at least one layer");
    softmax_rows(&mut logits, rows, spec.num_classes);
    Ok(logits)
}

/// Gradient of mean cross-entropy over a batch, laid out like the parameter
/// vector. Backpropagation through the tanh hidden layers.
fn batch_gradient(
    values: &[f64],
    spec: &ModelSpec,
    features: &[f64],
    labels: &[usize],
    grad: &mut [f64],
) {
    let rows = labels.len();
    let classes = spec.num_classes;
    let shapes = spec.layer_shapes();
    let dims = spec.layer_dims();
    let acts = forward_layers(values, spec, features, rows);

    // delta at the output: (softmax - onehot) / rows
    let mut delta = acts.last().expect("layers present").clone();
    softmax_rows(&mut delta, rows, classes);
    for (r, &label) in labels.iter().enumerate() {
        delta[r * classes + label] -= 1.0;
    }
    let inv_n = 1.0 / rows as f64;
    for d in &mut delta {
        *d *= inv_n;
    }

    grad.fill(0.0);
    let layer_offsets: Vec<usize> = shapes
        .iter()
        .scan(0usize, |off, &(r, c)| {
            let cur = *off;
            *off += r * c;
            Some(cur)
        })
        .collect();

    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        let input = &acts[l];
        let off = layer_offsets[l];
        let g = &mut grad[off..off + (fan_in + 1) * fan_out];
        for r in 0..rows {
            let dr = &delta[r * fan_out..(r + 1) * fan_out];
            let xr = &input[r * fan_in..(r + 1) * fan_in];
            for (i, &xi) in xr.iter().enumerate() {
                let grow = &mut g[i * fan_out..(i + 1) * fan_out];
                for (gv, &dv) in grow.iter_mut().zip(dr) {
                    *gv += xi * dv;
                }
            }
            let gbias = &mut g[fan_in * fan_out..];
            for (gv, &dv) in gbias.iter_mut().zip(dr) {
                *gv += dv;
            }
        }
        if l > 0 {
            // push delta through the weights and the tanh derivative
            let weights = &values[off..off + (fan_in + 1) * fan_out];
            let mut prev = vec![0.0; rows * fan_in];
            for r in 0..rows {
                let dr = &delta[r * fan_out..(r + 1) * fan_out];
                let pr = &mut prev[r * fan_in..(r + 1) * fan_in];
                for (i, pv) in pr.iter_mut().enumerate() {
                    let wrow = &weights[i * fan_out..(i + 1) * fan_out];
                    let mut s = 0.0;
                    for (&w, &dv) in wrow.iter().zip(dr) {
                        s += w * dv;
                    }
                    let a = input[r * fan_in + i];
                    *pv = s * (1.0 - a * a);
                }
            }
            delta = prev;
        }
    }
}

/// Analytic gradient of the mean cross-entropy loss over a whole container,
/// laid out like the parameter vector. The quantity `evaluate` differentiates.
pub fn loss_gradient(
    params: &ParamVector,
    spec: &ModelSpec,
    data: &DataContainer,
) -> Result<Vec<f64>> {
    check_compat(params, spec)?;
    check_data(spec, data)?;
    let mut grad = vec![0.0; params.len()];
    batch_gradient(params.values(), spec, data.features(), data.labels(), &mut grad);
    Ok(grad)
}

/// Runs `cfg.epochs` of seeded mini-batch SGD on cross-entropy loss and
/// returns the new parameters with the sample count. The input parameters
/// are never modified; batches are shuffle-then-slice per epoch with the
/// final short batch kept.
pub fn train(
    params: &ParamVector,
    spec: &ModelSpec,
    data: &DataContainer,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ParamVector, usize)> {
    check_compat(params, spec)?;
    check_data(spec, data)?;
    if cfg.epochs == 0 {
        return Err(FedError::Argument("epochs must be at least 1".into()));
    }
    if cfg.batch_size == Some(0) {
        return Err(FedError::Argument("batch_size must be positive".into()));
    }
    let n = data.len();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut rng = seeding::rng_from(seed);
    let mut values = params.values().to_vec();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; values.len()];
    let mut bx = Vec::with_capacity(batch * spec.input_dim);
    let mut by = Vec::with_capacity(batch);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(data.row(i));
                by.push(data.label(i));
            }
            batch_gradient(&values, spec, &bx, &by, &mut grad);
            for (v, g) in values.iter_mut().zip(&grad) {
                *v -= cfg.learning_rate * g;
            }
        }
    }
    let out = ParamVector::new(values, spec.layer_shapes())
        .map_err(|_| FedError::Argument("training diverged to non-finite parameters".into()))?;
    Ok((out, n))
}

/// Accuracy (fraction of argmax-correct rows, ties to the lowest class) and
/// mean cross-entropy loss over a container.
pub fn evaluate(params: &ParamVector, spec: &ModelSpec, data: &DataContainer) -> Result<Metrics> {
    check_compat(params, spec)?;
    check_data(spec, data)?;
    let n = data.len();
    let classes = spec.num_classes;
    let logits = forward_layers(params.values(), spec, data.features(), n)
        .pop()
        .expect("at least one layer");
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for r in 0..n {
        let row = &logits[r * classes..(r + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum_exp = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let label = data.label(r);
        loss_sum += log_sum_exp - row[label];
        let argmax = row
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (c, &v)| {
                if v > best.1 {
                    (c, v)
                } else {
                    best
                }
            })
            .0;
        if argmax == label {
            correct += 1;
        }
    }
    Ok(Metrics {
        accuracy: correct as f64 / n as f64,
        loss: loss_sum / n as f64,
        sample_count: n,
    })
}
