//! Dense ReLU networks with hand-written backpropagation.
//!
//! Hidden layers use ReLU (subgradient 0 at 0), the output layer is linear.
//! Batches are row-major `n x features` matrices. Gradients are returned for
//! the scalar `sum(output * grad_out)`, so callers pass `dLoss/dOutput`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{OrisError, Result};

const CHECKPOINT_MAGIC: &str = "oris-densenet";
const CHECKPOINT_VERSION: u32 = 1;

/// One affine layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
    // bumped on every parameter mutation so stale traces are detectable
    version: u64,
}

/// Activations cached by [`DenseNet::forward_trace`].
#[derive(Debug, Clone)]
pub struct Trace {
    version: u64,
    // inputs[i] feeds layer i; pre[i] is its pre-activation
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.pre.last().expect("a network has at least one layer")
    }
}

/// Parameter-shaped gradient (or moment) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0, |m, &g| m.max(g.abs()))
    }
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases. `sizes` lists every layer width
    /// including input and output, e.g. `[in, 256, 256, 2]`.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(OrisError::Invalid(format!("bad layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..=bound));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(DenseNet { layers, version: 0 })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(OrisError::Invalid("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(OrisError::Shape {
                    expected: l.outputs(),
                    actual: l.bias.len(),
                });
            }
            if let Some(next) = layers.get(i + 1) {
                if next.inputs() != l.outputs() {
                    return Err(OrisError::Shape {
                        expected: l.outputs(),
                        actual: next.inputs(),
                    });
                }
            }
        }
        Ok(DenseNet { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access to the parameters; invalidates outstanding traces.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_size() {
            return Err(OrisError::Shape {
                expected: self.input_size(),
                actual: width,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let mut h = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.weights.dot(&h) + &l.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            h = z;
        }
        Ok(h.to_vec())
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.weights.t()) + &l.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            h = z;
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: Array2<f64>) -> Result<Trace> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.weights.t()) + &l.bias;
            inputs.push(h);
            if i < last {
                h = z.mapv(relu);
            } else {
                h = Array2::zeros((0, 0));
            }
            pre.push(z);
        }
        Ok(Trace {
            version: self.version,
            inputs,
            pre,
        })
    }

    /// Gradients of `sum(output * grad_out)` with respect to every parameter.
    pub fn backward(&self, trace: &Trace, grad_out: &Array2<f64>) -> Result<Gradients> {
        if trace.version != self.version || trace.inputs.len() != self.layers.len() {
            return Err(OrisError::StaleCache);
        }
        let out = trace.output();
        if grad_out.dim() != out.dim() {
            return Err(OrisError::Shape {
                expected: out.len(),
                actual: grad_out.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let weights = delta.t().dot(&trace.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Dense { weights, bias });
            if i > 0 {
                let mut upstream = delta.dot(&l.weights);
                Zip::from(&mut upstream)
                    .and(&trace.pre[i - 1])
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
                delta = upstream;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn blend_from(&mut self, source: &DenseNet, tau: f64) -> Result<()> {
        if self.sizes() != source.sizes() {
            return Err(OrisError::Invalid(format!(
                "cannot blend {:?} into {:?}",
                source.sizes(),
                self.sizes()
            )));
        }
        for (t, s) in self.layers_mut().iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weights)
                .and(&s.weights)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
            Zip::from(&mut t.bias)
                .and(&s.bias)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let sizes = self.sizes();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(
            s,
            "sizes {}",
            sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
        );
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(s, "layer {i} weights");
            for row in l.weights.rows() {
                push_row(&mut s, row.iter());
            }
            let _ = writeln!(s, "layer {i} bias");
            push_row(&mut s, l.bias.iter());
        }
        s.push_str("end\n");
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: String| OrisError::Checkpoint(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut expect = |what: &str| lines.next().ok_or_else(|| bad(format!("truncated before {what}")));

        let header = expect("header")?;
        let version = header
            .strip_prefix(CHECKPOINT_MAGIC)
            .map(str::trim)
            .ok_or_else(|| bad(format!("not a network checkpoint: {header:?}")))?;
        if version != CHECKPOINT_VERSION.to_string() {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let sizes_line = expect("sizes")?;
        let sizes: Vec<usize> = sizes_line
            .strip_prefix("sizes ")
            .ok_or_else(|| bad(format!("expected sizes, got {sizes_line:?}")))?
            .split_whitespace()
            .map(|v| v.parse().map_err(|e| bad(format!("bad size {v:?}: {e}"))))
            .collect::<Result<_>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(bad(format!("bad layer sizes {sizes:?}")));
        }

        let mut layers = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let tag = expect("weights tag")?;
            if tag != format!("layer {i} weights") {
                return Err(bad(format!("expected layer {i} weights, got {tag:?}")));
            }
            let mut weights = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_out {
                weights.extend(parse_row(expect("weight row")?, fan_in)?);
            }
            let tag = expect("bias tag")?;
            if tag != format!("layer {i} bias") {
                return Err(bad(format!("expected layer {i} bias, got {tag:?}")));
            }
            let bias = parse_row(expect("bias row")?, fan_out)?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((fan_out, fan_in), weights)
                    .map_err(|e| bad(e.to_string()))?,
                bias: Array1::from(bias),
            });
        }
        if expect("end")? != "end" {
            return Err(bad("missing end marker".into()));
        }
        DenseNet::from_layers(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint()).map_err(|e| OrisError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| OrisError::io(path, e))?;
        Self::from_checkpoint(&text)
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

fn push_row<'a>(s: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            s.push(' ');
        }
        first = false;
        // 17 significant digits round-trip every f64 exactly
        let _ = write!(s, "{v:.16e}");
    }
    s.push('\n');
}

fn parse_row(line: &str, width: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split_whitespace()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| OrisError::Checkpoint(format!("bad value {v:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if row.len() != width {
        return Err(OrisError::Checkpoint(format!(
            "expected {width} values, found {}",
            row.len()
        )));
    }
    Ok(row)
}

/// Huber loss with unit threshold: `(loss, dloss/dpred)`.
pub fn smooth_l1(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl Adam {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(OrisError::Shape {
                expected: net.layers.len(),
                actual: grads.layers.len(),
            });
        }
        for (g, p) in grads.layers.iter().zip(&net.layers) {
            if g.weights.dim() != p.weights.dim() || g.bias.len() != p.bias.len() {
                return Err(OrisError::Shape {
                    expected: p.weights.len() + p.bias.len(),
                    actual: g.weights.len() + g.bias.len(),
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };
        let layers = net.layers_mut();
        for (((p, g), m), v) in layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            Zip::from(&mut p.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut p.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}
