use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{Activation, HeadBlock, LayerBlock, Layout, NetworkSpec};
use crate::error::{Error, Result};
use crate::real::{sigmoid, softplus, Real};

/// Floor added to the softplus variance head.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Per-output Gaussian mean and variance. For batches the vectors are laid out
/// row-major, `samples x outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrediction<T> {
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

impl<T: Real> GaussianPrediction<T> {
    pub fn new(mean: Vec<T>, variance: Vec<T>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::dims(mean.len(), variance.len(), "mean/variance length"));
        }
        if let Some(v) = variance.iter().find(|v| !(**v > T::zero())) {
            return Err(Error::Domain(format!("non-positive variance {v}")));
        }
        Ok(Self { mean, variance })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn std_dev(&self) -> Vec<T> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

/// Supervised samples stored contiguously. Each input is `seq_len * input_dim`
/// values in time-major order; each target is `target_len` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples<T> {
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
    pub input_len: usize,
    pub target_len: usize,
}

impl<T: Real> Samples<T> {
    pub fn new(inputs: Vec<T>, targets: Vec<T>, input_len: usize, target_len: usize) -> Result<Self> {
        if input_len == 0 || target_len == 0 {
            return Err(Error::Config("sample widths must be positive".into()));
        }
        if !inputs.len().is_multiple_of(input_len) || !targets.len().is_multiple_of(target_len) {
            return Err(Error::dims(input_len, inputs.len() % input_len, "ragged sample buffer"));
        }
        if inputs.len() / input_len != targets.len() / target_len {
            return Err(Error::dims(
                inputs.len() / input_len,
                targets.len() / target_len,
                "input/target sample count",
            ));
        }
        Ok(Self {
            inputs,
            targets,
            input_len,
            target_len,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_len
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.input_len..(i + 1) * self.input_len]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.target_len..(i + 1) * self.target_len]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_len);
        let mut targets = Vec::with_capacity(indices.len() * self.target_len);
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            targets.extend_from_slice(self.target(i));
        }
        Self {
            inputs,
            targets,
            input_len: self.input_len,
            target_len: self.target_len,
        }
    }

    /// Splits off the trailing `fraction` of samples as a validation set.
    pub fn split_tail(&self, fraction: f64) -> Result<(Self, Self)> {
        let n = self.len();
        let n_valid = ((n as f64) * fraction).round() as usize;
        let n_valid = n_valid.clamp(1, n.saturating_sub(1));
        if n < 2 {
            return Err(Error::Config("need at least two samples to split".into()));
        }
        let train: Vec<usize> = (0..n - n_valid).collect();
        let valid: Vec<usize> = (n - n_valid..n).collect();
        Ok((self.select(&train), self.select(&valid)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layout: Layout,
    weights: Vec<T>,
}

/// Forward activations for one sample, kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub(crate) struct Cache<T> {
    /// Node outputs, index 0 = input.
    h: Vec<Vec<T>>,
    /// Combined inputs, index d = input of node d (index 0 unused).
    z: Vec<Vec<T>>,
    /// Dense pre-activations, or LSTM gate activations `[i f g o]` per step.
    aux: Vec<Vec<T>>,
    /// LSTM cell states per step.
    cell: Vec<Vec<T>>,
    pub mean: Vec<T>,
    pub raw_var: Vec<T>,
}

impl<T: Real> Network<T> {
    /// Builds a network with scaled-uniform weights and zero biases.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let mut weights = vec![T::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [T], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in w.iter_mut() {
                *x = T::lit(rng.random_range(-limit..limit));
            }
        };
        for proj in layout.projections.iter().flatten() {
            let n = proj.rows * proj.cols;
            fill(&mut weights[proj.offset..proj.offset + n], proj.cols, proj.rows);
        }
        for block in &layout.layers {
            match *block {
                LayerBlock::Dense { w, rows, cols, .. } => {
                    fill(&mut weights[w..w + rows * cols], cols, rows);
                }
                LayerBlock::Recurrent {
                    w, u, hidden, cols, ..
                } => {
                    fill(&mut weights[w..w + 4 * hidden * cols], cols, hidden);
                    fill(&mut weights[u..u + 4 * hidden * hidden], hidden, hidden);
                }
                LayerBlock::Identity => {}
            }
        }
        let head = layout.head;
        let n = head.outputs * head.cols;
        fill(&mut weights[head.w_mean..head.w_mean + n], head.cols, head.outputs);
        fill(&mut weights[head.w_var..head.w_var + n], head.cols, head.outputs);
        Ok(Self {
            spec,
            layout,
            weights,
        })
    }

    pub fn from_weights(spec: NetworkSpec, weights: Vec<T>) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        if weights.len() != layout.total {
            return Err(Error::dims(layout.total, weights.len(), "weight vector length"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("non-finite weight".into()));
        }
        Ok(Self {
            spec,
            layout,
            weights,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    /// Mean and variance for every sample in `inputs` (row-major, `n x input_len`).
    pub fn forward_gaussian(&self, inputs: &[T]) -> Result<GaussianPrediction<T>> {
        let len = self.spec.input_len();
        if !inputs.len().is_multiple_of(len) {
            return Err(Error::dims(len, inputs.len() % len, "input batch width"));
        }
        let n = inputs.len() / len;
        let outputs = self.spec.output_dim;
        let mut mean = Vec::with_capacity(n * outputs);
        let mut variance = Vec::with_capacity(n * outputs);
        let mut cache = Cache::default();
        for x in inputs.chunks_exact(len) {
            self.forward_cached(x, &mut cache)?;
            mean.extend_from_slice(&cache.mean);
            variance.extend(cache.raw_var.iter().map(|&r| head_variance(r)));
        }
        Ok(GaussianPrediction { mean, variance })
    }

    pub(crate) fn forward_cached(&self, x: &[T], cache: &mut Cache<T>) -> Result<()> {
        let spec = &self.spec;
        if x.len() != spec.input_len() {
            return Err(Error::dims(spec.input_len(), x.len(), "network input"));
        }
        let steps = spec.seq_len;
        let head_node = spec.head_node();
        cache.h.resize(head_node, Vec::new());
        cache.z.resize(head_node + 1, Vec::new());
        cache.aux.resize(head_node, Vec::new());
        cache.cell.resize(head_node, Vec::new());
        cache.h[0].clear();
        cache.h[0].extend_from_slice(x);

        for node in 1..=head_node {
            self.combine_inputs(node, cache);
            if node == head_node {
                break;
            }
            let z = std::mem::take(&mut cache.z[node]);
            let mut h = std::mem::take(&mut cache.h[node]);
            let mut aux = std::mem::take(&mut cache.aux[node]);
            let mut cell = std::mem::take(&mut cache.cell[node]);
            let layer = self.spec.layers[node - 1];
            match self.layout.layers[node - 1] {
                LayerBlock::Dense { w, b, rows, cols } => {
                    dense_forward(
                        &self.weights[w..w + rows * cols],
                        &self.weights[b..b + rows],
                        layer.activation,
                        steps,
                        &z,
                        &mut aux,
                        &mut h,
                    );
                }
                LayerBlock::Recurrent {
                    w,
                    u,
                    b,
                    hidden,
                    cols,
                } => {
                    lstm_forward(
                        &self.weights[w..w + 4 * hidden * cols],
                        &self.weights[u..u + 4 * hidden * hidden],
                        &self.weights[b..b + 4 * hidden],
                        hidden,
                        steps,
                        &z,
                        &mut aux,
                        &mut cell,
                        &mut h,
                    );
                }
                LayerBlock::Identity => {
                    h.clear();
                    h.extend_from_slice(&z);
                }
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow { layer: node });
            }
            cache.z[node] = z;
            cache.h[node] = h;
            cache.aux[node] = aux;
            cache.cell[node] = cell;
        }

        let head = self.layout.head;
        let input = &cache.z[head_node];
        cache.mean.clear();
        cache.raw_var.clear();
        cache.mean.extend_from_slice(&self.weights[head.b_mean..head.b_mean + head.outputs]);
        cache.raw_var.extend_from_slice(&self.weights[head.b_var..head.b_var + head.outputs]);
        matvec_add(&self.weights[head.w_mean..], head.outputs, head.cols, input, &mut cache.mean);
        matvec_add(&self.weights[head.w_var..], head.outputs, head.cols, input, &mut cache.raw_var);
        if cache.mean.iter().chain(&cache.raw_var).any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { layer: head_node });
        }
        Ok(())
    }

    fn combine_inputs(&self, node: usize, cache: &mut Cache<T>) {
        let mut z = std::mem::take(&mut cache.z[node]);
        z.clear();
        z.extend_from_slice(&cache.h[node - 1]);
        let rows = self.spec.in_width(node);
        for (k, edge) in self.spec.skips.iter().enumerate() {
            if edge.to != node {
                continue;
            }
            let src = &cache.h[edge.from];
            match self.layout.projections[k] {
                None => {
                    for (a, &b) in z.iter_mut().zip(src) {
                        *a += b;
                    }
                }
                Some(p) => {
                    let w = &self.weights[p.offset..p.offset + p.rows * p.cols];
                    for t in 0..self.spec.seq_len {
                        matvec_add(
                            w,
                            rows,
                            p.cols,
                            &src[t * p.cols..(t + 1) * p.cols],
                            &mut z[t * rows..(t + 1) * rows],
                        );
                    }
                }
            }
        }
        cache.z[node] = z;
    }

    /// Accumulates into `grad` the gradient for one cached sample, given the
    /// loss derivatives with respect to the head's mean and raw-variance outputs.
    pub(crate) fn backward(
        &self,
        cache: &Cache<T>,
        d_mean: &[T],
        d_raw: &[T],
        grad: &mut [T],
    ) -> Result<()> {
        let spec = &self.spec;
        let steps = spec.seq_len;
        let head_node = spec.head_node();
        let mut g_h: Vec<Vec<T>> = (0..head_node)
            .map(|node| vec![T::zero(); cache.h[node].len()])
            .collect();

        let head: HeadBlock = self.layout.head;
        let input = &cache.z[head_node];
        let mut g_z = vec![T::zero(); head.cols];
        outer_add(&mut grad[head.w_mean..], head.outputs, head.cols, d_mean, input);
        outer_add(&mut grad[head.w_var..], head.outputs, head.cols, d_raw, input);
        add_into(&mut grad[head.b_mean..head.b_mean + head.outputs], d_mean);
        add_into(&mut grad[head.b_var..head.b_var + head.outputs], d_raw);
        matvec_t_add(&self.weights[head.w_mean..], head.outputs, head.cols, d_mean, &mut g_z);
        matvec_t_add(&self.weights[head.w_var..], head.outputs, head.cols, d_raw, &mut g_z);
        check_block(&grad[head.w_mean..head.b_var + head.outputs], head_node)?;
        self.distribute(head_node, &g_z, cache, &mut g_h, grad)?;

        for node in (1..head_node).rev() {
            let g_out = std::mem::take(&mut g_h[node]);
            let z = &cache.z[node];
            let mut g_z = vec![T::zero(); z.len()];
            let layer = spec.layers[node - 1];
            match self.layout.layers[node - 1] {
                LayerBlock::Dense { w, b, rows, cols } => {
                    dense_backward(
                        &self.weights[w..w + rows * cols],
                        layer.activation,
                        steps,
                        z,
                        &cache.aux[node],
                        &g_out,
                        grad,
                        w,
                        b,
                        &mut g_z,
                    );
                    check_block(&grad[w..b + rows], node)?;
                }
                LayerBlock::Recurrent {
                    w,
                    u,
                    b,
                    hidden,
                    cols,
                } => {
                    lstm_backward(
                        &self.weights,
                        (w, u, b),
                        hidden,
                        cols,
                        steps,
                        z,
                        &cache.aux[node],
                        &cache.cell[node],
                        &cache.h[node],
                        &g_out,
                        grad,
                        &mut g_z,
                    );
                    check_block(&grad[w..b + 4 * hidden], node)?;
                }
                LayerBlock::Identity => g_z.copy_from_slice(&g_out),
            }
            self.distribute(node, &g_z, cache, &mut g_h, grad)?;
        }
        Ok(())
    }

    /// Routes the gradient of node `node`'s combined input back to its sources.
    fn distribute(
        &self,
        node: usize,
        g_z: &[T],
        cache: &Cache<T>,
        g_h: &mut [Vec<T>],
        grad: &mut [T],
    ) -> Result<()> {
        add_into(&mut g_h[node - 1], g_z);
        let rows = self.spec.in_width(node);
        for (k, edge) in self.spec.skips.iter().enumerate() {
            if edge.to != node {
                continue;
            }
            match self.layout.projections[k] {
                None => add_into(&mut g_h[edge.from], g_z),
                Some(p) => {
                    let src = &cache.h[edge.from];
                    for t in 0..self.spec.seq_len {
                        let g = &g_z[t * rows..(t + 1) * rows];
                        let x = &src[t * p.cols..(t + 1) * p.cols];
                        outer_add(&mut grad[p.offset..], p.rows, p.cols, g, x);
                        matvec_t_add(
                            &self.weights[p.offset..],
                            p.rows,
                            p.cols,
                            g,
                            &mut g_h[edge.from][t * p.cols..(t + 1) * p.cols],
                        );
                    }
                    check_block(&grad[p.offset..p.offset + p.rows * p.cols], node)?;
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn head_variance<T: Real>(raw: T) -> T {
    softplus(raw) + T::lit(VARIANCE_FLOOR)
}

fn check_block<T: Real>(block: &[T], layer: usize) -> Result<()> {
    if block.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { layer })
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (a, &b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

/// `out += W x` for row-major `W` of shape `rows x cols`.
fn matvec_add<T: Real>(w: &[T], rows: usize, cols: usize, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += crate::real::dot(row, x);
    }
}

/// `out += W^T g`.
fn matvec_t_add<T: Real>(w: &[T], rows: usize, cols: usize, g: &[T], out: &mut [T]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += wv * gr;
        }
    }
}

/// `G += g x^T`.
fn outer_add<T: Real>(gw: &mut [T], rows: usize, cols: usize, g: &[T], x: &[T]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == T::zero() {
            continue;
        }
        let row = &mut gw[r * cols..(r + 1) * cols];
        for (o, &xv) in row.iter_mut().zip(x) {
            *o += gr * xv;
        }
    }
}

fn activate<T: Real>(a: Activation, x: T) -> T {
    match a {
        Activation::Relu => x.max(T::zero()),
        Activation::Tanh => x.tanh(),
        Activation::Linear => x,
    }
}

/// Derivative given the pre-activation `x` and activation output `y`.
fn activate_grad<T: Real>(a: Activation, x: T, y: T) -> T {
    match a {
        Activation::Relu => {
            if x > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Activation::Tanh => T::one() - y * y,
        Activation::Linear => T::one(),
    }
}

fn dense_forward<T: Real>(
    w: &[T],
    b: &[T],
    act: Activation,
    steps: usize,
    z: &[T],
    pre: &mut Vec<T>,
    h: &mut Vec<T>,
) {
    let rows = b.len();
    let cols = z.len() / steps;
    pre.clear();
    h.clear();
    for t in 0..steps {
        let start = pre.len();
        pre.extend_from_slice(b);
        matvec_add(w, rows, cols, &z[t * cols..(t + 1) * cols], &mut pre[start..]);
    }
    h.extend(pre.iter().map(|&x| activate(act, x)));
}

#[allow(clippy::too_many_arguments)]
fn dense_backward<T: Real>(
    w: &[T],
    act: Activation,
    steps: usize,
    z: &[T],
    pre: &[T],
    g_out: &[T],
    grad: &mut [T],
    w_off: usize,
    b_off: usize,
    g_z: &mut [T],
) {
    let rows = pre.len() / steps;
    let cols = z.len() / steps;
    let mut g_pre = vec![T::zero(); rows];
    for t in 0..steps {
        for r in 0..rows {
            let x = pre[t * rows + r];
            let y = activate(act, x);
            g_pre[r] = g_out[t * rows + r] * activate_grad(act, x, y);
        }
        outer_add(&mut grad[w_off..], rows, cols, &g_pre, &z[t * cols..(t + 1) * cols]);
        add_into(&mut grad[b_off..b_off + rows], &g_pre);
        matvec_t_add(w, rows, cols, &g_pre, &mut g_z[t * cols..(t + 1) * cols]);
    }
}

#[allow(clippy::too_many_arguments)]
fn lstm_forward<T: Real>(
    w: &[T],
    u: &[T],
    b: &[T],
    hidden: usize,
    steps: usize,
    z: &[T],
    gates: &mut Vec<T>,
    cell: &mut Vec<T>,
    h: &mut Vec<T>,
) {
    let cols = z.len() / steps;
    let g4 = 4 * hidden;
    gates.clear();
    cell.clear();
    h.clear();
    let mut a = vec![T::zero(); g4];
    let zeros = vec![T::zero(); hidden];
    for t in 0..steps {
        a.copy_from_slice(b);
        matvec_add(w, g4, cols, &z[t * cols..(t + 1) * cols], &mut a);
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &h[(t - 1) * hidden..t * hidden],
                &cell[(t - 1) * hidden..t * hidden],
            )
        };
        matvec_add(u, g4, hidden, h_prev, &mut a);
        let mut c_new = Vec::with_capacity(hidden);
        let mut h_new = Vec::with_capacity(hidden);
        for j in 0..hidden {
            let i = sigmoid(a[j]);
            let f = sigmoid(a[hidden + j]);
            let g = a[2 * hidden + j].tanh();
            let o = sigmoid(a[3 * hidden + j]);
            let c = f * c_prev[j] + i * g;
            c_new.push(c);
            h_new.push(o * c.tanh());
            a[j] = i;
            a[hidden + j] = f;
            a[2 * hidden + j] = g;
            a[3 * hidden + j] = o;
        }
        gates.extend_from_slice(&a);
        cell.extend_from_slice(&c_new);
        h.extend_from_slice(&h_new);
    }
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward<T: Real>(
    weights: &[T],
    (w_off, u_off, b_off): (usize, usize, usize),
    hidden: usize,
    cols: usize,
    steps: usize,
    z: &[T],
    gates: &[T],
    cell: &[T],
    h: &[T],
    g_out: &[T],
    grad: &mut [T],
    g_z: &mut [T],
) {
    let g4 = 4 * hidden;
    let w = &weights[w_off..w_off + g4 * cols];
    let u = &weights[u_off..u_off + g4 * hidden];
    let mut dh_next = vec![T::zero(); hidden];
    let mut dc_next = vec![T::zero(); hidden];
    let mut da = vec![T::zero(); g4];
    let zeros = vec![T::zero(); hidden];
    for t in (0..steps).rev() {
        let gt = &gates[t * g4..(t + 1) * g4];
        let c = &cell[t * hidden..(t + 1) * hidden];
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &h[(t - 1) * hidden..t * hidden],
                &cell[(t - 1) * hidden..t * hidden],
            )
        };
        for j in 0..hidden {
            let (i, f, g, o) = (gt[j], gt[hidden + j], gt[2 * hidden + j], gt[3 * hidden + j]);
            let tc = c[j].tanh();
            let dh = g_out[t * hidden + j] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (T::one() - tc * tc) + dc_next[j];
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev[j];
            dc_next[j] = dc * f;
            da[j] = di * i * (T::one() - i);
            da[hidden + j] = df * f * (T::one() - f);
            da[2 * hidden + j] = dg * (T::one() - g * g);
            da[3 * hidden + j] = d_o * o * (T::one() - o);
        }
        outer_add(&mut grad[w_off..], g4, cols, &da, &z[t * cols..(t + 1) * cols]);
        outer_add(&mut grad[u_off..], g4, hidden, &da, h_prev);
        add_into(&mut grad[b_off..b_off + g4], &da);
        matvec_t_add(w, g4, cols, &da, &mut g_z[t * cols..(t + 1) * cols]);
        dh_next.iter_mut().for_each(|x| *x = T::zero());
        matvec_t_add(u, g4, hidden, &da, &mut dh_next);
    }
}
