//! A small fully connected network with tanh hidden layers, a sigmoid or
//! softmax head, hand-written reverse-mode gradients and Adam.
//!
//! Networks here have a handful of layers of width 20-30 and a scalar input,
//! so everything is plain `Vec<f64>` with row-major weights.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Head outputs are clamped to `[OUTPUT_CLAMP, 1 - OUTPUT_CLAMP]` before they
/// reach any logarithm or power.
pub const OUTPUT_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    #[serde(rename = "sigmoid-scalar")]
    Sigmoid,
    #[serde(rename = "softmax-pair")]
    Softmax,
}

impl Head {
    fn width(self) -> usize {
        match self {
            Head::Sigmoid => 1,
            Head::Softmax => 2,
        }
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)),
        );
    }
}

/// Multi-layer perceptron. `sizes` lists every layer width including input
/// and output, so `[1, 20, 20, 20, 1]` has three hidden layers (`depth` 3).
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    head: Head,
    init_seed: u64,
    train_seed: Option<u64>,
    // changes whenever parameters change; traces record it
    stamp: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.head == other.head && self.layers == other.layers
    }
}

fn validate_sizes(sizes: &[usize], head: Head) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::invalid(format!("bad layer sizes {sizes:?}")));
    }
    let last = *sizes.last().unwrap();
    if last != head.width() {
        return Err(Error::invalid(format!(
            "{head:?} head needs final width {}, got {last}",
            head.width()
        )));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases, drawn from the stream `(seed, "init")`.
    pub fn new(sizes: &[usize], head: Head, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes, head)?;
        net.init_seed = seed;
        let mut rng = rng::stream(seed, "init");
        for layer in &mut net.layers {
            let bound = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], head: Head) -> Result<Self> {
        validate_sizes(sizes, head)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            head,
            init_seed: 0,
            train_seed: None,
            stamp: fresh_stamp(),
        })
    }

    /// `[1, hidden..., 1]` with a sigmoid head.
    pub fn controller(hidden: &[usize], seed: u64) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::once(1)
            .chain(hidden.iter().copied())
            .chain([1])
            .collect();
        Self::new(&sizes, Head::Sigmoid, seed)
    }

    /// `[1, hidden..., 2]` with a softmax head.
    pub fn detector(hidden: &[usize], seed: u64) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::once(1)
            .chain(hidden.iter().copied())
            .chain([2])
            .collect();
        Self::new(&sizes, Head::Softmax, seed)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn train_seed(&self) -> Option<u64> {
        self.train_seed
    }

    pub fn set_train_seed(&mut self, seed: u64) {
        self.train_seed = Some(seed);
    }

    /// Hidden-layer count.
    pub fn depth(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn locate(&self, mut i: usize) -> (usize, bool, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            if i < l.weights.len() {
                return (li, true, i);
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return (li, false, i);
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat parameter order: layer by layer, weights then bias.
    pub fn param(&self, i: usize) -> f64 {
        let (l, is_w, j) = self.locate(i);
        if is_w {
            self.layers[l].weights[j]
        } else {
            self.layers[l].bias[j]
        }
    }

    pub fn set_param(&mut self, i: usize, value: f64) {
        let (l, is_w, j) = self.locate(i);
        if is_w {
            self.layers[l].weights[j] = value;
        } else {
            self.layers[l].bias[j] = value;
        }
        self.stamp = fresh_stamp();
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.stamp = fresh_stamp();
        &mut self.layers
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Runs the network and records what [`Mlp::backward`] needs.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Trace)> {
        let mut trace = Trace::default();
        self.forward_into(x, &mut trace)?;
        Ok((trace.output.clone(), trace))
    }

    /// As [`Mlp::forward`] but reusing `trace`'s buffers.
    pub fn forward_into(&self, x: &[f64], trace: &mut Trace) -> Result<()> {
        if x.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.sizes[0],
                actual: x.len(),
            });
        }
        let n = self.layers.len();
        trace.acts.resize_with(n, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        let mut z = std::mem::take(&mut trace.logits);
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&trace.acts[i], &mut z);
            if i + 1 < n {
                let next = &mut trace.acts[i + 1];
                next.clear();
                next.extend(z.iter().map(|v| v.tanh()));
            }
        }
        trace.output.clear();
        trace.clamped.clear();
        match self.head {
            Head::Sigmoid => trace.output.push(sigmoid(z[0])),
            Head::Softmax => {
                let m = z[0].max(z[1]);
                let (e0, e1) = ((z[0] - m).exp(), (z[1] - m).exp());
                let s = e0 + e1;
                trace.output.extend([e0 / s, e1 / s]);
            }
        }
        for y in &mut trace.output {
            let c = y.clamp(OUTPUT_CLAMP, 1.0 - OUTPUT_CLAMP);
            trace.clamped.push(c != *y);
            *y = c;
        }
        trace.logits = z;
        trace.stamp = self.stamp;
        Ok(())
    }

    /// Convenience forward pass without keeping the trace.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Gradients of `sum_i upstream[i] * output[i]` with respect to every parameter.
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<Gradients> {
        let mut g = Gradients::zeros_like(self);
        self.accumulate_backward(trace, upstream, &mut g)?;
        Ok(g)
    }

    /// As [`Mlp::backward`] but adds into `grads`.
    pub fn accumulate_backward(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        if trace.stamp != self.stamp || trace.acts.len() != self.layers.len() {
            return Err(Error::StaleTrace);
        }
        let width = self.head.width();
        if upstream.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: upstream.len(),
            });
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: grads.layers.len(),
            });
        }
        let y = &trace.output;
        let up: Vec<f64> = upstream
            .iter()
            .zip(&trace.clamped)
            .map(|(u, &c)| if c { 0.0 } else { *u })
            .collect();
        let mut delta: Vec<f64> = match self.head {
            Head::Sigmoid => vec![up[0] * y[0] * (1.0 - y[0])],
            Head::Softmax => {
                let dot = up[0] * y[0] + up[1] * y[1];
                vec![y[0] * (up[0] - dot), y[1] * (up[1] - dot)]
            }
        };
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let a = &trace.acts[li];
            let (gw, gb) = &mut grads.layers[li];
            for (o, d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, ai) in row.iter_mut().zip(a) {
                    *g += d * ai;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, ai) in prev.iter_mut().zip(a) {
                    *p *= 1.0 - ai * ai;
                }
                delta = prev;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_sizes: self.sizes.clone(),
            head: self.head,
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.bias.clone()).collect(),
            init_seed: self.init_seed,
            train_seed: self.train_seed,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut net = Self::zeros(&ck.layer_sizes, ck.head)?;
        if ck.weights.len() != net.layers.len() || ck.biases.len() != net.layers.len() {
            return Err(Error::invalid(
                "checkpoint layer count disagrees with layer_sizes",
            ));
        }
        for ((layer, w), b) in net.layers.iter_mut().zip(&ck.weights).zip(&ck.biases) {
            if w.len() != layer.weights.len() || b.len() != layer.bias.len() {
                return Err(Error::invalid(
                    "checkpoint array shape disagrees with layer_sizes",
                ));
            }
            layer.weights.clone_from(w);
            layer.bias.clone_from(b);
        }
        if !net.is_finite() {
            return Err(Error::invalid("checkpoint holds non-finite parameters"));
        }
        net.init_seed = ck.init_seed;
        net.train_seed = ck.train_seed;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_checkpoint())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&read_json(path)?)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// On-disk parameter format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub head: Head,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub init_seed: u64,
    pub train_seed: Option<u64>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    stamp: u64,
    /// Input to each layer.
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
    output: Vec<f64>,
    clamped: Vec<bool>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Per-parameter gradient (or Adam moment) buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    /// `(weights, bias)` per layer.
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    /// Same flat order as [`Mlp::param`].
    pub fn get(&self, i: usize) -> f64 {
        *self.values().nth(i).expect("gradient index out of range")
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.values_mut().for_each(|v| *v *= s);
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.values_mut().for_each(|v| *v = value);
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn same_shape(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|((w, b), l)| w.len() == l.weights.len() && b.len() == l.bias.len())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {lr} must be positive"
            )));
        }
        Ok(Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        })
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.same_shape(net) || !self.m.same_shape(net) {
            return Err(Error::invalid("gradient shape does not match the network"));
        }
        if let Some(layer) = grads
            .layers
            .iter()
            .position(|(w, b)| w.iter().chain(b).any(|g| !g.is_finite()))
        {
            return Err(Error::NonFiniteGradient { layer });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[li];
            let (mw, mb) = &mut self.m.layers[li];
            let (vw, vb) = &mut self.v.layers[li];
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let g = gw.iter().chain(gb);
            let m = mw.iter_mut().chain(mb.iter_mut());
            let v = vw.iter_mut().chain(vb.iter_mut());
            for (((p, g), m), v) in params.zip(g).zip(m).zip(v) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        net.stamp = fresh_stamp();
        Ok(())
    }
}
