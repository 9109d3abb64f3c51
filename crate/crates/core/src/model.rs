//! Shared-representation uplift network.
//!
//! Input = numeric features followed by one embedding per categorical column.
//! A representation MLP maps the input to `phi`; a treated head and a control
//! head each map `phi` to either ZILN parameters `(p-logit, mu, sigma-raw)`
//! or a single scalar. Both heads run for every sample.
//!
//! Parameters live in one flat `Vec<f64>` described by a [`ParamLayout`]:
//! weights are `fan_in x fan_out`, row-major, and a layer computes
//! `out = in . W + b`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureSchema, SampleRecord};
use crate::error::{Error, Result};

/// Exponent cap used when turning ZILN parameters into a mean.
pub const MEAN_EXPONENT_CAP: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    Ziln,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseModel {
    Tar,
    CfrMmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    libm::expm1(z)
                }
            }
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    libm::exp(z)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub representation_layers: Vec<usize>,
    pub head_layers: Vec<usize>,
    pub head_mode: HeadMode,
    pub base_model: BaseModel,
    pub activation: Activation,
    pub sigma_floor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 10,
            representation_layers: vec![64, 32],
            head_layers: vec![16],
            head_mode: HeadMode::Ziln,
            base_model: BaseModel::Tar,
            activation: Activation::Elu,
            sigma_floor: 1e-4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::InvalidConfig("embedding_dim must be at least 1".into()));
        }
        if self.representation_layers.is_empty() {
            return Err(Error::InvalidConfig("at least one representation layer is required".into()));
        }
        if self.representation_layers.iter().chain(&self.head_layers).any(|&w| w == 0) {
            return Err(Error::InvalidConfig("layer widths must be at least 1".into()));
        }
        if !(self.sigma_floor > 0.0) || !self.sigma_floor.is_finite() {
            return Err(Error::InvalidConfig("sigma_floor must be positive".into()));
        }
        Ok(())
    }

    /// Outputs per head: 3 for ZILN, 1 for a scalar head.
    pub fn head_outputs(&self) -> usize {
        match self.head_mode {
            HeadMode::Ziln => 3,
            HeadMode::Mse => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Embedding,
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub kind: TensorKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    weight: usize,
    bias: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    tensors: Vec<TensorSpec>,
    embeddings: Vec<(usize, usize)>,
    representation: Vec<Dense>,
    treated: Vec<Dense>,
    control: Vec<Dense>,
    numeric_dim: usize,
    embedding_dim: usize,
    input_dim: usize,
    representation_dim: usize,
    head_outputs: usize,
    config: ModelConfig,
    len: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig, schema: &FeatureSchema) -> Result<Self> {
        config.validate()?;
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |tensors: &mut Vec<TensorSpec>, name: String, kind, rows, cols| {
            tensors.push(TensorSpec { name, kind, rows, cols, offset });
            offset += rows * cols;
            offset - rows * cols
        };

        let mut embeddings = Vec::new();
        for col in &schema.categorical_columns {
            if col.is_empty() {
                return Err(Error::InvalidSchema(format!("column {:?} has no vocabulary", col.name)));
            }
            let at = push(&mut tensors, format!("embedding.{}", col.name), TensorKind::Embedding, col.len(), config.embedding_dim);
            embeddings.push((at, col.len()));
        }

        let mut stack = |tensors: &mut Vec<TensorSpec>, prefix: &str, fan_in: usize, widths: &[usize]| {
            let mut layers = Vec::new();
            let mut fan_in = fan_in;
            for (i, &w) in widths.iter().enumerate() {
                let weight = push(tensors, format!("{prefix}.{i}.weight"), TensorKind::Weight, fan_in, w);
                let bias = push(tensors, format!("{prefix}.{i}.bias"), TensorKind::Bias, 1, w);
                layers.push(Dense { weight, bias, fan_in, fan_out: w });
                fan_in = w;
            }
            layers
        };

        let numeric_dim = schema.numeric_columns.len();
        let input_dim = numeric_dim + schema.categorical_columns.len() * config.embedding_dim;
        if input_dim == 0 {
            return Err(Error::InvalidSchema("schema has no feature columns".into()));
        }
        let representation = stack(&mut tensors, "representation", input_dim, &config.representation_layers);
        let representation_dim = *config.representation_layers.last().expect("validated non-empty");
        let mut head_widths = config.head_layers.clone();
        head_widths.push(config.head_outputs());
        let treated = stack(&mut tensors, "treated_head", representation_dim, &head_widths);
        let control = stack(&mut tensors, "control_head", representation_dim, &head_widths);
        let len = tensors.last().map_or(0, |t| t.offset + t.len());

        Ok(Self {
            tensors,
            embeddings,
            representation,
            treated,
            control,
            numeric_dim,
            embedding_dim: config.embedding_dim,
            input_dim,
            representation_dim,
            head_outputs: config.head_outputs(),
            config: config.clone(),
            len,
        })
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn representation_dim(&self) -> usize {
        self.representation_dim
    }

    pub fn head_outputs(&self) -> usize {
        self.head_outputs
    }

    /// Human-readable location of flat parameter `index`.
    pub fn path_of(&self, index: usize) -> String {
        match self.tensors.iter().find(|t| t.range().contains(&index)) {
            Some(t) => {
                let local = index - t.offset;
                format!("{}[{}, {}]", t.name, local / t.cols, local % t.cols)
            }
            None => format!("<out of range {index}>"),
        }
    }

    fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let c = &self.config;
        if c.embedding_dim != config.embedding_dim
            || c.representation_layers != config.representation_layers
            || c.head_layers != config.head_layers
            || c.head_mode != config.head_mode
        {
            return Err(Error::ShapeMismatch("model config differs from the parameter layout".into()));
        }
        Ok(())
    }
}

/// All trainable values: embeddings, representation layers, both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layout: ParamLayout,
    values: Vec<f64>,
}

/// Derivatives with the same flat layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }
}

impl ModelParams {
    pub fn from_values(config: &ModelConfig, schema: &FeatureSchema, values: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(config, schema)?;
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("non-finite value at {}", layout.path_of(i))));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn config(&self) -> &ModelConfig {
        &self.layout.config
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&TensorSpec, &[f64])> {
        self.layout.tensors.iter().map(move |t| (t, &self.values[t.range()]))
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| &self.values[t.range()])
    }

    /// Sum of squares of weights and embeddings (biases excluded).
    pub fn penalized_sq_norm(&self) -> f64 {
        self.layout
            .tensors
            .iter()
            .filter(|t| t.kind != TensorKind::Bias)
            .flat_map(|t| &self.values[t.range()])
            .map(|v| v * v)
            .sum()
    }

    /// Add `2 * lambda * theta` for every penalized parameter.
    pub fn add_l2_gradient(&self, lambda: f64, grads: &mut Gradients) {
        for t in self.layout.tensors.iter().filter(|t| t.kind != TensorKind::Bias) {
            for i in t.range() {
                grads.values[i] += 2.0 * lambda * self.values[i];
            }
        }
    }

    /// Overwrite the control head with a copy of the treated head.
    pub fn mirror_heads(&mut self) {
        for (t, c) in self.layout.treated.clone().iter().zip(self.layout.control.clone().iter()) {
            let w = t.fan_in * t.fan_out;
            self.values.copy_within(t.weight..t.weight + w, c.weight);
            self.values.copy_within(t.bias..t.bias + t.fan_out, c.bias);
        }
    }
}

/// Xavier-uniform weights and embeddings, zero biases.
pub fn init_model(config: &ModelConfig, schema: &FeatureSchema, seed: u64) -> Result<ModelParams> {
    let layout = ParamLayout::new(config, schema)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut values = vec![0.0; layout.len()];
    for t in layout.tensors() {
        if t.kind == TensorKind::Bias {
            continue;
        }
        let bound = libm::sqrt(6.0 / (t.rows + t.cols) as f64);
        for v in &mut values[t.range()] {
            *v = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    Ok(ModelParams { layout, values })
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)))
}

/// Zero-inflated lognormal parameters of one head for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZilnParams {
    /// Purchase probability, `sigmoid(logit)`.
    pub p: f64,
    pub mu: f64,
    pub sigma: f64,
    pub logit: f64,
}

/// Partial derivatives of a scalar with respect to `(logit, mu, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZilnGrad {
    pub logit: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl ZilnParams {
    pub fn from_raw(logit: f64, mu: f64, sigma_raw: f64, sigma_floor: f64) -> Self {
        Self { p: sigmoid(logit), mu, sigma: softplus(sigma_raw) + sigma_floor, logit }
    }

    pub fn from_probability(p: f64, mu: f64, sigma: f64) -> Self {
        Self { p, mu, sigma, logit: libm::log(p) - libm::log1p(-p) }
    }

    /// Distribution mean `p * exp(mu + sigma^2 / 2)`, exponent capped at
    /// [`MEAN_EXPONENT_CAP`].
    pub fn mean(&self) -> f64 {
        self.mean_with_grad().0
    }

    pub fn mean_with_grad(&self) -> (f64, ZilnGrad) {
        let e = self.mu + 0.5 * self.sigma * self.sigma;
        if e >= MEAN_EXPONENT_CAP {
            let m = libm::exp(MEAN_EXPONENT_CAP);
            return (self.p * m, ZilnGrad { logit: self.p * (1.0 - self.p) * m, mu: 0.0, sigma: 0.0 });
        }
        let m = libm::exp(e);
        let y = self.p * m;
        (y, ZilnGrad { logit: self.p * (1.0 - self.p) * m, mu: y, sigma: y * self.sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeadOutput {
    Ziln(ZilnParams),
    Scalar(f64),
}

impl HeadOutput {
    /// Point prediction: the ZILN mean, or the scalar itself.
    pub fn point(&self) -> f64 {
        predict_response(self)
    }
}

pub fn predict_response(head: &HeadOutput) -> f64 {
    match head {
        HeadOutput::Ziln(z) => z.mean(),
        HeadOutput::Scalar(v) => *v,
    }
}

#[derive(Debug, Clone)]
struct LayerTrace {
    pre: Vec<f64>,
    out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    n: usize,
    representation_dim: usize,
    head_outputs: usize,
    pub treated: Vec<HeadOutput>,
    pub control: Vec<HeadOutput>,
    input: Vec<f64>,
    categorical: Vec<Vec<u32>>,
    representation_trace: Vec<LayerTrace>,
    treated_trace: Vec<LayerTrace>,
    control_trace: Vec<LayerTrace>,
}

impl ForwardOutput {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn representation_dim(&self) -> usize {
        self.representation_dim
    }

    /// `phi` for sample `i`.
    pub fn representation(&self, i: usize) -> &[f64] {
        let phi = &self.representation_trace.last().expect("non-empty").out;
        &phi[i * self.representation_dim..(i + 1) * self.representation_dim]
    }

    /// Raw (pre-link) outputs of the treated or control head for sample `i`.
    pub fn raw_head(&self, treated: bool, i: usize) -> &[f64] {
        let trace = if treated { &self.treated_trace } else { &self.control_trace };
        let out = &trace.last().expect("non-empty").pre;
        &out[i * self.head_outputs..(i + 1) * self.head_outputs]
    }
}

fn dense_forward(values: &[f64], layer: &Dense, input: &[f64], n: usize) -> Vec<f64> {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let w = &values[layer.weight..layer.weight + fi * fo];
    let b = &values[layer.bias..layer.bias + fo];
    let mut out = vec![0.0; n * fo];
    for s in 0..n {
        let row = &mut out[s * fo..(s + 1) * fo];
        row.copy_from_slice(b);
        for (i, &x) in input[s * fi..(s + 1) * fi].iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, w) in row.iter_mut().zip(&w[i * fo..(i + 1) * fo]) {
                *o += x * w;
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the gradient w.r.t. the
/// layer input.
fn dense_backward(values: &[f64], grads: &mut [f64], layer: &Dense, input: &[f64], d_pre: &[f64], n: usize) -> Vec<f64> {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let w = &values[layer.weight..layer.weight + fi * fo];
    let mut d_in = vec![0.0; n * fi];
    for s in 0..n {
        let g = &d_pre[s * fo..(s + 1) * fo];
        let x = &input[s * fi..(s + 1) * fi];
        for (o, gv) in g.iter().enumerate() {
            grads[layer.bias + o] += gv;
        }
        for i in 0..fi {
            let wr = &w[i * fo..(i + 1) * fo];
            let gw = &mut grads[layer.weight + i * fo..layer.weight + (i + 1) * fo];
            let mut acc = 0.0;
            for o in 0..fo {
                gw[o] += x[i] * g[o];
                acc += wr[o] * g[o];
            }
            d_in[s * fi + i] = acc;
        }
    }
    d_in
}

fn run_stack(
    values: &[f64],
    layers: &[Dense],
    input: &[f64],
    n: usize,
    activation: Activation,
    activate_last: bool,
    stage: &'static str,
) -> Result<Vec<LayerTrace>> {
    let mut traces: Vec<LayerTrace> = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let x = traces.last().map_or(input, |t| &t.out);
        let pre = dense_forward(values, layer, x, n);
        let out = if activate_last || i + 1 < layers.len() {
            pre.iter().map(|&z| activation.apply(z)).collect()
        } else {
            pre.clone()
        };
        if out.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::NonFinite { stage, layer: i });
        }
        traces.push(LayerTrace { pre, out });
    }
    Ok(traces)
}

fn backprop_stack(
    values: &[f64],
    grads: &mut [f64],
    layers: &[Dense],
    traces: &[LayerTrace],
    input: &[f64],
    d_out: Vec<f64>,
    n: usize,
    activation: Activation,
    activate_last: bool,
) -> Vec<f64> {
    let mut d = d_out;
    for i in (0..layers.len()).rev() {
        if activate_last || i + 1 < layers.len() {
            for (g, &z) in d.iter_mut().zip(&traces[i].pre) {
                *g *= activation.derivative(z);
            }
        }
        let x = if i == 0 { input } else { &traces[i - 1].out };
        d = dense_backward(values, grads, &layers[i], x, &d, n);
    }
    d
}

/// Evaluate both heads for every record in `batch`.
pub fn forward(params: &ModelParams, config: &ModelConfig, batch: &[&SampleRecord]) -> Result<ForwardOutput> {
    let layout = &params.layout;
    layout.check_config(config)?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = batch.len();
    let values = &params.values;
    let mut input = Vec::with_capacity(n * layout.input_dim);
    let mut categorical = Vec::with_capacity(n);
    for (s, r) in batch.iter().enumerate() {
        if r.numeric.len() != layout.numeric_dim || r.categorical.len() != layout.embeddings.len() {
            return Err(Error::SchemaMismatch { index: s, reason: "feature count differs from the model".into() });
        }
        input.extend_from_slice(&r.numeric);
        for (c, (&idx, &(offset, vocab))) in r.categorical.iter().zip(&layout.embeddings).enumerate() {
            if idx as usize >= vocab {
                return Err(Error::CategoryOutOfRange {
                    column: format!("#{c}"),
                    index: idx,
                    size: vocab,
                });
            }
            let row = offset + idx as usize * layout.embedding_dim;
            input.extend_from_slice(&values[row..row + layout.embedding_dim]);
        }
        categorical.push(r.categorical.clone());
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: "input", layer: 0 });
    }

    let act = config.activation;
    let rep = run_stack(values, &layout.representation, &input, n, act, true, "representation")?;
    let phi = &rep.last().expect("non-empty").out;
    let treated_trace = run_stack(values, &layout.treated, phi, n, act, false, "treated_head")?;
    let control_trace = run_stack(values, &layout.control, phi, n, act, false, "control_head")?;

    let k = layout.head_outputs;
    let decode = |trace: &[LayerTrace]| -> Vec<HeadOutput> {
        let raw = &trace.last().expect("non-empty").pre;
        raw.chunks(k)
            .map(|r| match config.head_mode {
                HeadMode::Ziln => HeadOutput::Ziln(ZilnParams::from_raw(r[0], r[1], r[2], config.sigma_floor)),
                HeadMode::Mse => HeadOutput::Scalar(r[0]),
            })
            .collect()
    };
    let treated = decode(&treated_trace);
    let control = decode(&control_trace);
    Ok(ForwardOutput {
        n,
        representation_dim: layout.representation_dim,
        head_outputs: k,
        treated,
        control,
        input,
        categorical,
        representation_trace: rep,
        treated_trace,
        control_trace,
    })
}

/// Gradient of `sigma = softplus(raw) + floor` w.r.t. `raw`.
pub(crate) fn sigma_raw_derivative(raw: f64) -> f64 {
    sigmoid(raw)
}

/// Back-propagate head-output gradients (w.r.t. the raw head outputs, laid
/// out `n x head_outputs`) and an optional extra gradient on `phi`
/// (`n x representation_dim`) into parameter gradients.
pub fn backward(
    params: &ModelParams,
    config: &ModelConfig,
    out: &ForwardOutput,
    d_treated_raw: &[f64],
    d_control_raw: &[f64],
    d_representation: Option<&[f64]>,
) -> Result<Gradients> {
    let layout = &params.layout;
    layout.check_config(config)?;
    let n = out.n;
    let expected = n * layout.head_outputs;
    for len in [d_treated_raw.len(), d_control_raw.len()] {
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
    }
    let values = &params.values;
    let mut grads = vec![0.0; layout.len()];
    let act = config.activation;
    let phi = &out.representation_trace.last().expect("non-empty").out;

    let mut d_phi = backprop_stack(values, &mut grads, &layout.treated, &out.treated_trace, phi, d_treated_raw.to_vec(), n, act, false);
    let d_phi_c = backprop_stack(values, &mut grads, &layout.control, &out.control_trace, phi, d_control_raw.to_vec(), n, act, false);
    for (a, b) in d_phi.iter_mut().zip(&d_phi_c) {
        *a += b;
    }
    if let Some(extra) = d_representation {
        if extra.len() != d_phi.len() {
            return Err(Error::DimensionMismatch { expected: d_phi.len(), got: extra.len() });
        }
        for (a, b) in d_phi.iter_mut().zip(extra) {
            *a += b;
        }
    }
    let d_input = backprop_stack(values, &mut grads, &layout.representation, &out.representation_trace, &out.input, d_phi, n, act, true);

    let dim = layout.embedding_dim;
    for s in 0..n {
        let row = &d_input[s * layout.input_dim..(s + 1) * layout.input_dim];
        for (c, &(offset, _)) in layout.embeddings.iter().enumerate() {
            let at = offset + out.categorical[s][c] as usize * dim;
            let src = &row[layout.numeric_dim + c * dim..layout.numeric_dim + (c + 1) * dim];
            for (g, v) in grads[at..at + dim].iter_mut().zip(src) {
                *g += v;
            }
        }
    }

    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(layout.path_of(i)));
    }
    Ok(Gradients { values: grads })
}

/// Predicted uplift `mean(treated head) - mean(control head)` per record.
pub fn predict_uplift(params: &ModelParams, config: &ModelConfig, records: &[SampleRecord]) -> Result<Vec<f64>> {
    Ok(predict_both(params, config, records)?.into_iter().map(|(t, c)| t - c).collect())
}

/// Point predictions `(treated, control)` per record, evaluated in chunks.
pub fn predict_both(params: &ModelParams, config: &ModelConfig, records: &[SampleRecord]) -> Result<Vec<(f64, f64)>> {
    let mut result = Vec::with_capacity(records.len());
    for chunk in records.chunks(1024) {
        let refs: Vec<&SampleRecord> = chunk.iter().collect();
        let out = forward(params, config, &refs)?;
        result.extend(out.treated.iter().zip(&out.control).map(|(t, c)| (t.point(), c.point())));
    }
    Ok(result)
}
