use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::activation::Activation;
use crate::math::{powi, sqrt};
use crate::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Layer sizes `c_0, ..., c_m` with `m >= 1` and every `c_l > 0`. Layer 0 is
/// the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need an input and at least one further layer, got {} layer(s)",
                layer_sizes.len()
            )));
        }
        if let Some(l) = layer_sizes.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArchitecture(format!("layer {l} is empty")));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of non-input layers, `m`.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        self.layer_sizes[self.depth()]
    }

    /// Total number of non-input nodes.
    pub fn hidden_and_output_nodes(&self) -> usize {
        self.layer_sizes[1..].iter().sum()
    }

    /// Offset of layer `l >= 1` inside a flat layer-major state vector that
    /// holds every non-input node.
    pub fn state_offset(&self, layer: usize) -> usize {
        self.layer_sizes[1..layer].iter().sum()
    }
}

/// Weights `W^l` (shape `c_l x c_{l-1}`) and biases `beta^l`, stored for
/// `l = 1..=m` at index `l - 1`. `W^l[(i, j)]` is the weight of the edge from
/// node `j` of layer `l-1` to node `i` of layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Parameters {
    pub fn zeros(arch: &Architecture) -> Self {
        let s = arch.layer_sizes();
        Self {
            weights: (1..s.len()).map(|l| Matrix::zeros(s[l], s[l - 1])).collect(),
            biases: (1..s.len()).map(|l| vec![0.0; s[l]]).collect(),
        }
    }

    /// Gaussian weights scaled by `1/sqrt(c_{l-1})` and unit-Gaussian biases.
    pub fn random_gaussian(arch: &Architecture, rng: &mut crate::Rng) -> Self {
        let mut p = Self::zeros(arch);
        let s = arch.layer_sizes();
        for l in 1..s.len() {
            let scale = 1.0 / sqrt(s[l - 1] as f64);
            for w in p.weights[l - 1].as_mut_slice() {
                let z: f64 = StandardNormal.sample(rng);
                *w = scale * z;
            }
            for b in &mut p.biases[l - 1] {
                *b = StandardNormal.sample(rng);
            }
        }
        p
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let s = arch.layer_sizes();
        if self.weights.len() != arch.depth() || self.biases.len() != arch.depth() {
            return Err(Error::DimensionMismatch {
                what: "number of parameter layers",
                expected: arch.depth(),
                got: self.weights.len().min(self.biases.len()),
            });
        }
        for l in 1..s.len() {
            let w = &self.weights[l - 1];
            if w.rows() != s[l] || w.cols() != s[l - 1] {
                return Err(Error::InvalidParameter(format!(
                    "W^{l} has shape {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    s[l],
                    s[l - 1]
                )));
            }
            if self.biases[l - 1].len() != s[l] {
                return Err(Error::DimensionMismatch {
                    what: "bias vector",
                    expected: s[l],
                    got: self.biases[l - 1].len(),
                });
            }
        }
        if !self.all_finite() {
            return Err(Error::InvalidParameter("non-finite weight or bias".into()));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .flat_map(|w| w.as_slice())
            .chain(self.biases.iter().flatten())
            .all(|v| v.is_finite())
    }
}

/// Pre-activations `z^l` for `l = 1..=m` (index `l-1`) and activations
/// `a^l` for `l = 0..=m` (index `l`, with `a^0` the input).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    /// `phi'(z^l)`, filled alongside the forward pass.
    pub(crate) slopes: Vec<Vec<f64>>,
}

impl ForwardResult {
    /// The network output `a^m`.
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradients of the quadratic cost, indexed like [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub deltas: Vec<Vec<f64>>,
    pub grad_biases: Vec<Vec<f64>>,
    pub grad_weights: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros(arch: &Architecture) -> Self {
        let p = Parameters::zeros(arch);
        Self {
            deltas: p.biases.clone(),
            grad_biases: p.biases,
            grad_weights: p.weights,
        }
    }
}

/// `C = 1/2 sum_i (output_i - target_i)^2`.
pub fn quadratic_cost(output: &[f64], target: &[f64]) -> Result<f64> {
    check_len("cost target", output.len(), target.len())?;
    Ok(0.5 * output.iter().zip(target).map(|(a, t)| (a - t) * (a - t)).sum::<f64>())
}

/// Gradient of [`quadratic_cost`] with respect to the output, `a^m - tau`.
pub fn quadratic_cost_gradient(output: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_len("cost target", output.len(), target.len())?;
    Ok(output.iter().zip(target).map(|(a, t)| a - t).collect())
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// A feed-forward network with fixed parameters and activation.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwiredNetwork {
    arch: Architecture,
    params: Parameters,
    activation: Activation,
}

impl HardwiredNetwork {
    pub fn new(arch: Architecture, params: Parameters, activation: Activation) -> Result<Self> {
        params.check(&arch)?;
        activation.validate()?;
        Ok(Self {
            arch,
            params,
            activation,
        })
    }

    /// Network with [`Parameters::random_gaussian`] initialisation.
    pub fn random(arch: Architecture, activation: Activation, rng: &mut crate::Rng) -> Result<Self> {
        let params = Parameters::random_gaussian(&arch, rng);
        Self::new(arch, params, activation)
    }

    /// Random architecture with `1..=max_layers` non-input layers of
    /// `1..=max_nodes` nodes each, Gaussian parameters.
    pub fn random_small(
        max_layers: usize,
        max_nodes: usize,
        activation: Activation,
        rng: &mut crate::Rng,
    ) -> Result<Self> {
        let depth = rng.random_range(1..=max_layers.max(1));
        let sizes = (0..=depth).map(|_| rng.random_range(1..=max_nodes.max(1))).collect();
        Self::random(Architecture::new(sizes)?, activation, rng)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self, layer: usize, i: usize, j: usize) -> f64 {
        self.params.weights[layer - 1][(i, j)]
    }

    pub fn bias(&self, layer: usize, i: usize) -> f64 {
        self.params.biases[layer - 1][i]
    }

    /// Replace the parameters, keeping architecture and activation.
    pub fn with_parameters(&self, params: Parameters) -> Result<Self> {
        Self::new(self.arch.clone(), params, self.activation)
    }

    /// `rho_i^l(a_prev) = sum_j W^l_ij a_prev_j + beta^l_i`.
    pub fn pre_activation(&self, layer: usize, node: usize, a_prev: &[f64]) -> Result<f64> {
        self.check_node(layer, node)?;
        check_len(
            "previous-layer vector",
            self.arch.layer_sizes()[layer - 1],
            a_prev.len(),
        )?;
        Ok(self.rho(layer, node, a_prev))
    }

    #[inline]
    fn rho(&self, layer: usize, node: usize, a_prev: &[f64]) -> f64 {
        let row = self.params.weights[layer - 1].row(node);
        let mut acc = 0.0;
        for (w, a) in row.iter().zip(a_prev) {
            acc += w * a;
        }
        acc + self.params.biases[layer - 1][node]
    }

    fn check_node(&self, layer: usize, node: usize) -> Result<()> {
        if layer == 0 || layer > self.arch.depth() {
            return Err(Error::InvalidParameter(format!(
                "layer {layer} outside 1..={}",
                self.arch.depth()
            )));
        }
        if node >= self.arch.layer_sizes()[layer] {
            return Err(Error::InvalidParameter(format!(
                "node {node} outside layer {layer} of size {}",
                self.arch.layer_sizes()[layer]
            )));
        }
        Ok(())
    }

    /// Activation-system right-hand side `h + rho x - (q-1) x^q` for one
    /// node. Only defined for activations with an ODE form.
    pub fn activation_ode_rhs(&self, layer: usize, node: usize, a_prev: &[f64], x: f64) -> Result<f64> {
        let (h, q) = self.activation.require_ode_form()?;
        let rho = self.pre_activation(layer, node, a_prev)?;
        Ok(activation_ode(h, q, rho, x))
    }

    /// The whole layered activation system. `state` holds every non-input
    /// node, layer-major; layer `l` reads its forcing from layer `l-1` of
    /// `state` (or from `input` when `l = 1`).
    pub fn activation_system_rhs(&self, input: &[f64], state: &[f64], out: &mut [f64]) -> Result<()> {
        let (h, q) = self.activation.require_ode_form()?;
        check_len("input vector", self.arch.input_size(), input.len())?;
        let n = self.arch.hidden_and_output_nodes();
        check_len("state vector", n, state.len())?;
        check_len("derivative buffer", n, out.len())?;
        let sizes = self.arch.layer_sizes();
        for l in 1..sizes.len() {
            let off = self.arch.state_offset(l);
            let prev: &[f64] = if l == 1 {
                input
            } else {
                let p = self.arch.state_offset(l - 1);
                &state[p..p + sizes[l - 1]]
            };
            for i in 0..sizes[l] {
                let rho = self.rho(l, i, prev);
                out[off + i] = activation_ode(h, q, rho, state[off + i]);
            }
        }
        Ok(())
    }

    /// Forward pass `a^0 = d`, `z^l = W^l a^{l-1} + beta^l`, `a^l = phi(z^l)`.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardResult> {
        check_len("input vector", self.arch.input_size(), input.len())?;
        let depth = self.arch.depth();
        let mut pre = Vec::with_capacity(depth);
        let mut act = Vec::with_capacity(depth + 1);
        let mut slopes = Vec::with_capacity(depth);
        act.push(input.to_vec());
        for l in 1..=depth {
            let size = self.arch.layer_sizes()[l];
            let mut z = Vec::with_capacity(size);
            let mut a = Vec::with_capacity(size);
            let mut s = Vec::with_capacity(size);
            for i in 0..size {
                let zi = self.rho(l, i, &act[l - 1]);
                let (ai, si) = self.activation.value_and_derivative(zi)?;
                z.push(zi);
                a.push(ai);
                s.push(si);
            }
            pre.push(z);
            act.push(a);
            slopes.push(s);
        }
        Ok(ForwardResult {
            pre_activations: pre,
            activations: act,
            slopes,
        })
    }

    /// Gradients of the quadratic cost at one example.
    pub fn backprop(&self, input: &[f64], target: &[f64]) -> Result<Gradients> {
        let fr = self.forward(input)?;
        let mut g = Gradients::zeros(&self.arch);
        self.accumulate_gradients(&fr, target, 1.0, &mut g)?;
        Ok(g)
    }

    /// Add `scale` times this example's gradients into `acc`. `acc.deltas`
    /// is overwritten with the unscaled deltas of this example.
    pub fn accumulate_gradients(
        &self,
        fr: &ForwardResult,
        target: &[f64],
        scale: f64,
        acc: &mut Gradients,
    ) -> Result<()> {
        let depth = self.arch.depth();
        let grad_out = quadratic_cost_gradient(fr.output(), target)?;
        // delta^m = grad_a C (.) phi'(z^m)
        acc.deltas[depth - 1] = grad_out.iter().zip(&fr.slopes[depth - 1]).map(|(g, s)| g * s).collect();
        for l in (1..depth).rev() {
            // delta^l = (W^{l+1})^T delta^{l+1} (.) phi'(z^l)
            let w_next = &self.params.weights[l];
            let mut back = vec![0.0; self.arch.layer_sizes()[l]];
            for (k, dk) in acc.deltas[l].iter().enumerate() {
                if *dk == 0.0 {
                    continue;
                }
                for (b, w) in back.iter_mut().zip(w_next.row(k)) {
                    *b += w * dk;
                }
            }
            for (b, s) in back.iter_mut().zip(&fr.slopes[l - 1]) {
                *b *= s;
            }
            acc.deltas[l - 1] = back;
        }
        for l in 1..=depth {
            let delta = &acc.deltas[l - 1];
            let a_prev = &fr.activations[l - 1];
            for (gb, d) in acc.grad_biases[l - 1].iter_mut().zip(delta) {
                *gb += scale * d;
            }
            let gw = &mut acc.grad_weights[l - 1];
            for (i, d) in delta.iter().enumerate() {
                let sd = scale * d;
                if sd == 0.0 {
                    continue;
                }
                for (g, a) in gw.row_mut(i).iter_mut().zip(a_prev) {
                    // inputs are mostly zero pixels
                    if *a != 0.0 {
                        *g += sd * a;
                    }
                }
            }
        }
        Ok(())
    }

    /// In-place SGD step `p <- p - lr * grad`.
    pub fn apply_gradient(&mut self, grads: &Gradients, learning_rate: f64) {
        for (w, g) in self.params.weights.iter_mut().zip(&grads.grad_weights) {
            for (wv, gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wv -= learning_rate * gv;
            }
        }
        for (b, g) in self.params.biases.iter_mut().zip(&grads.grad_biases) {
            for (bv, gv) in b.iter_mut().zip(g) {
                *bv -= learning_rate * gv;
            }
        }
    }
}

/// `h + rho x - (q-1) x^q`.
#[inline]
pub fn activation_ode(h: f64, q: u32, rho: f64, x: f64) -> f64 {
    h + rho * x - f64::from(q - 1) * powi(x, q)
}
