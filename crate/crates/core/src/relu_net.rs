//! Feedforward ReLU networks with sparse weights, sparse concatenation and
//! the explicit constructions that emulate the reduced Richardson iteration.
//!
//! A network is a list of affine layers; ReLU acts after every layer but the
//! last. Weights are stored in compressed rows holding only nonzeros, so
//! `size` is the exact count of nonzero weights and biases.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::richardson::choose_k;
use crate::{Error, Result};

/// One affine map `x -> W x + b` with `W` in compressed-row form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    /// Builds a layer from `(row, col, value)` triplets; duplicates are summed
    /// and zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if bias.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: bias.len(),
            });
        }
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= rows || j >= cols) {
            return Err(Error::InvalidInput(format!(
                "weight ({i},{j}) outside a {rows}x{cols} layer"
            )));
        }
        if triplets.iter().any(|t| !t.2.is_finite()) || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut k = 0;
        while k < triplets.len() {
            let (i, j, mut v) = triplets[k];
            k += 1;
            while k < triplets.len() && triplets[k].0 == i && triplets[k].1 == j {
                v += triplets[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            bias,
        })
    }

    pub fn from_dense(w: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        let mut t = Vec::new();
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                t.push((i, j, w[(i, j)]));
            }
        }
        Self::from_triplets(w.nrows(), w.ncols(), t, b.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight_nnz(&self) -> usize {
        self.values.len()
    }

    pub fn bias_nnz(&self) -> usize {
        self.bias.iter().filter(|b| **b != 0.0).count()
    }

    /// Stored `(row, col, value)` triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            w[(i, j)] = v;
        }
        w
    }

    fn apply(&self, x: &[f64], relu: bool) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let mut s = self.bias[i];
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.values[k] * x[self.col_idx[k]];
                }
                if relu {
                    s.max(0.0)
                } else {
                    s
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.row_ptr.len() == self.rows + 1
            && self.row_ptr[0] == 0
            && self.row_ptr.windows(2).all(|w| w[0] <= w[1])
            && self.row_ptr[self.rows] == self.values.len()
            && self.col_idx.len() == self.values.len()
            && self.bias.len() == self.rows
            && self.col_idx.iter().all(|&j| j < self.cols)
            && self.values.iter().all(|v| *v != 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Parse("malformed layer".into()))
        }
    }
}

/// `Phi = ((W_1, b_1), ..., (W_L, b_L))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    layers: Vec<Layer>,
}

impl NeuralNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("a network needs at least one layer".into()));
        }
        for (l, w) in layers.windows(2).enumerate() {
            if w[1].cols != w[0].rows {
                return Err(Error::InvalidInput(format!(
                    "layer {} expects width {} but layer {l} produces {}",
                    l + 1,
                    w[1].cols,
                    w[0].rows
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Nonzero weights plus nonzero biases.
    pub fn size(&self) -> usize {
        self.layers.iter().map(|l| l.weight_nnz() + l.bias_nnz()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    /// Hidden widths `n_1, ..., n_{L-1}`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.apply(&h, l < last);
        }
        Ok(h)
    }

    /// Realization over a batch, in parallel, in input order.
    pub fn realize_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|x| self.realize(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&NetDoc::from(self))?)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, &NetDoc::from(self))?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<NetDoc>(s)?.into_net()
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        serde_json::from_reader::<_, NetDoc>(r)?.into_net()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    activation: String,
    #[serde(flatten)]
    layer: Layer,
}

#[derive(Serialize, Deserialize)]
struct NetDoc {
    layers: Vec<LayerDoc>,
}

impl From<&NeuralNet> for NetDoc {
    fn from(net: &NeuralNet) -> Self {
        let last = net.layers.len() - 1;
        NetDoc {
            layers: net
                .layers
                .iter()
                .enumerate()
                .map(|(l, layer)| LayerDoc {
                    activation: if l < last { "relu" } else { "identity" }.into(),
                    layer: layer.clone(),
                })
                .collect(),
        }
    }
}

impl NetDoc {
    fn into_net(self) -> Result<NeuralNet> {
        let last = self.layers.len().saturating_sub(1);
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, d) in self.layers.into_iter().enumerate() {
            let want = if l < last { "relu" } else { "identity" };
            if d.activation != want {
                return Err(Error::Parse(format!("layer {l} has activation {}", d.activation)));
            }
            d.layer.validate()?;
            layers.push(d.layer);
        }
        NeuralNet::new(layers)
    }
}

/// Net realizing `x -> x` with `L` layers, via `x = ReLU(x) - ReLU(-x)`.
pub fn identity_net(n: usize, depth: usize) -> Result<NeuralNet> {
    if depth == 0 || n == 0 {
        return Err(Error::InvalidInput("identity net needs n >= 1 and depth >= 1".into()));
    }
    if depth == 1 {
        let t = (0..n).map(|i| (i, i, 1.0)).collect();
        return NeuralNet::new(vec![Layer::from_triplets(n, n, t, vec![0.0; n])?]);
    }
    let mut layers = Vec::with_capacity(depth);
    let first = (0..n).flat_map(|i| [(i, i, 1.0), (n + i, i, -1.0)]).collect();
    layers.push(Layer::from_triplets(2 * n, n, first, vec![0.0; 2 * n])?);
    for _ in 1..depth - 1 {
        let mid = (0..2 * n).map(|i| (i, i, 1.0)).collect();
        layers.push(Layer::from_triplets(2 * n, 2 * n, mid, vec![0.0; 2 * n])?);
    }
    let last = (0..n).flat_map(|i| [(i, i, 1.0), (i, n + i, -1.0)]).collect();
    layers.push(Layer::from_triplets(n, 2 * n, last, vec![0.0; n])?);
    NeuralNet::new(layers)
}

/// Sparse concatenation `phi1 ⊙ phi2`, realizing `phi1 ∘ phi2`.
///
/// The last layer of `phi2` and the first layer of `phi1` are joined through
/// the two-layer identity `z = ReLU(z) - ReLU(-z)`, so depths add and the size
/// is at most twice the sum of the sizes.
pub fn sparse_concat(phi1: &NeuralNet, phi2: &NeuralNet) -> Result<NeuralNet> {
    if phi2.output_dim() != phi1.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: phi1.input_dim(),
            found: phi2.output_dim(),
        });
    }
    let n = phi2.output_dim();
    let mut layers: Vec<Layer> = phi2.layers[..phi2.layers.len() - 1].to_vec();
    let last2 = &phi2.layers[phi2.layers.len() - 1];
    let mut t = Vec::with_capacity(2 * last2.weight_nnz());
    for (i, j, v) in last2.triplets() {
        t.push((i, j, v));
        t.push((n + i, j, -v));
    }
    let bias: Vec<f64> = last2.bias.iter().copied().chain(last2.bias.iter().map(|b| -b)).collect();
    layers.push(Layer::from_triplets(2 * n, last2.cols, t, bias)?);
    let first1 = &phi1.layers[0];
    let mut t = Vec::with_capacity(2 * first1.weight_nnz());
    for (i, j, v) in first1.triplets() {
        t.push((i, j, v));
        t.push((i, n + j, -v));
    }
    layers.push(Layer::from_triplets(first1.rows, 2 * n, t, first1.bias.clone())?);
    layers.extend(phi1.layers[1..].iter().cloned());
    NeuralNet::new(layers)
}

/// Number of sawtooth levels `m` for a product accurate to `epsilon` on
/// `[-z, z]^2`: the squaring error `z^2 4^-(m+1)` stays below `epsilon / 2`.
pub fn sawtooth_levels(epsilon: f64, z: f64) -> usize {
    let m = ((2.0 * z * z / epsilon).log2() - 2.0) / 2.0;
    (m.ceil() as i64).max(1) as usize
}

/// Approximate product `(x, y) -> xy` on `[-z, z]^2` to accuracy `epsilon`.
///
/// Uses `xy = z^2 (u^2 - w^2)` with `u = |x+y|/(2z)`, `w = |x-y|/(2z)`, and
/// the sawtooth squaring `t^2 ≈ t - sum_s g_s(t)/4^s`. The two branches are
/// symmetric, so a zero factor gives exactly zero.
pub fn product_net(epsilon: f64, z: f64) -> Result<NeuralNet> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(z >= 1.0 && z.is_finite()) {
        return Err(Error::InvalidInput(format!("box bound z must be >= 1, got {z}")));
    }
    let m = sawtooth_levels(epsilon, z);
    let s = 1.0 / (2.0 * z);
    let mut layers = Vec::with_capacity(m + 2);
    // |x+y|/(2z) and |x-y|/(2z) as sums of two ReLUs each.
    layers.push(Layer::from_triplets(
        4,
        2,
        vec![
            (0, 0, s),
            (0, 1, s),
            (1, 0, -s),
            (1, 1, -s),
            (2, 0, s),
            (2, 1, -s),
            (3, 0, -s),
            (3, 1, s),
        ],
        vec![0.0; 4],
    )?);
    // Hidden units [h0, h1, h2, acc] of branch b sit at 2r + b, where
    // g = 2 h0 - 4 h1 + 2 h2 is the hat function of the previous level.
    // Interleaving the branches makes the output sum cancel exactly when
    // both branches agree.
    let at = |r: usize, b: usize| 2 * r + b;
    let mut t = Vec::new();
    let mut bias = vec![0.0; 8];
    for b in 0..2 {
        let i = 2 * b;
        for (r, shift) in [(0, 0.0), (1, -0.5), (2, -1.0), (3, 0.0)] {
            t.push((at(r, b), i, 1.0));
            t.push((at(r, b), i + 1, 1.0));
            bias[at(r, b)] = shift;
        }
    }
    layers.push(Layer::from_triplets(8, 4, t, bias)?);
    let hat = [(0usize, 2.0), (1, -4.0), (2, 2.0)];
    let mut scale = 1.0;
    for _ in 1..m {
        scale /= 4.0;
        let mut t = Vec::new();
        let mut bias = vec![0.0; 8];
        for b in 0..2 {
            for (r, shift) in [(0, 0.0), (1, -0.5), (2, -1.0)] {
                for &(c, w) in &hat {
                    t.push((at(r, b), at(c, b), w));
                }
                bias[at(r, b)] = shift;
            }
            t.push((at(3, b), at(3, b), 1.0));
            for &(c, w) in &hat {
                t.push((at(3, b), at(c, b), -w * scale));
            }
        }
        layers.push(Layer::from_triplets(8, 8, t, bias)?);
    }
    scale /= 4.0;
    let z2 = z * z;
    let mut t = Vec::new();
    for (b, sign) in [(0usize, 1.0), (1, -1.0)] {
        t.push((0, at(3, b), sign * z2));
        for &(c, w) in &hat {
            t.push((0, at(c, b), -sign * z2 * w * scale));
        }
    }
    layers.push(Layer::from_triplets(1, 8, t, vec![0.0])?);
    NeuralNet::new(layers)
}

/// A bank of independent products evaluated side by side, plus identity
/// channels, followed by an output layer that sums products into outputs.
struct ProductBank<'a> {
    template: &'a NeuralNet,
    input_dim: usize,
    output_dim: usize,
    /// `(left input, right input, output)`.
    products: Vec<(usize, usize, usize)>,
    /// `(input, output)` copied exactly.
    carries: Vec<(usize, usize)>,
    output_bias: Vec<f64>,
}

impl ProductBank<'_> {
    fn build(&self) -> Result<NeuralNet> {
        let t = self.template;
        let depth = t.depth();
        debug_assert!(depth >= 3);
        let np = self.products.len();
        let nc = self.carries.len();
        let widths: Vec<usize> = t.layers.iter().map(|l| l.rows).collect();
        let mut layers = Vec::with_capacity(depth);
        // First layer: route the two inputs of every product; split carries.
        let l0 = &t.layers[0];
        let rows0 = np * widths[0] + 2 * nc;
        let mut trip = Vec::with_capacity(np * l0.weight_nnz() + 2 * nc);
        let mut bias = vec![0.0; rows0];
        for (p, &(a, b, _)) in self.products.iter().enumerate() {
            let off = p * widths[0];
            for (i, j, v) in l0.triplets() {
                trip.push((off + i, if j == 0 { a } else { b }, v));
            }
            bias[off..off + widths[0]].copy_from_slice(&l0.bias);
        }
        let cb = np * widths[0];
        for (c, &(src, _)) in self.carries.iter().enumerate() {
            trip.push((cb + 2 * c, src, 1.0));
            trip.push((cb + 2 * c + 1, src, -1.0));
        }
        layers.push(Layer::from_triplets(rows0, self.input_dim, trip, bias)?);
        for l in 1..depth - 1 {
            let layer = &t.layers[l];
            let (wr, wc) = (widths[l], widths[l - 1]);
            let rows = np * wr + 2 * nc;
            let cols = np * wc + 2 * nc;
            let mut trip = Vec::with_capacity(np * layer.weight_nnz() + 2 * nc);
            let mut bias = vec![0.0; rows];
            for p in 0..np {
                for (i, j, v) in layer.triplets() {
                    trip.push((p * wr + i, p * wc + j, v));
                }
                bias[p * wr..(p + 1) * wr].copy_from_slice(&layer.bias);
            }
            for c in 0..2 * nc {
                trip.push((np * wr + c, np * wc + c, 1.0));
            }
            layers.push(Layer::from_triplets(rows, cols, trip, bias)?);
        }
        let last = &t.layers[depth - 1];
        let wc = widths[depth - 2];
        let cols = np * wc + 2 * nc;
        let mut trip = Vec::with_capacity(np * last.weight_nnz() + 2 * nc);
        let mut bias = self.output_bias.clone();
        for (p, &(_, _, o)) in self.products.iter().enumerate() {
            for (_, j, v) in last.triplets() {
                trip.push((o, p * wc + j, v));
            }
            bias[o] += last.bias[0];
        }
        for (c, &(_, dst)) in self.carries.iter().enumerate() {
            trip.push((dst, np * wc + 2 * c, 1.0));
            trip.push((dst, np * wc + 2 * c + 1, -1.0));
        }
        layers.push(Layer::from_triplets(self.output_dim, cols, trip, bias)?);
        NeuralNet::new(layers)
    }
}

/// Per-entry product tolerance so that an `n x n` matrix-vector product meets
/// `epsilon` in the Euclidean norm.
pub fn entry_tolerance(n: usize, epsilon: f64) -> f64 {
    epsilon / (n as f64).powf(1.5)
}

/// `(vec(A), x) -> A x` for `n x n` matrices (`vec` is column-major:
/// entry `(i, j)` sits at `i + n j`), accurate to `epsilon` in `l2` when
/// `|A_ij| <= 1` and `|x_j| <= z`.
pub fn matvec_net(n: usize, epsilon: f64, z: f64) -> Result<NeuralNet> {
    step_bank(n, epsilon, z, &vec![0.0; n], false)
}

fn step_bank(n: usize, epsilon: f64, z: f64, g: &[f64], carry: bool) -> Result<NeuralNet> {
    if n == 0 || g.len() != n {
        return Err(Error::InvalidInput("step networks need n >= 1 and |g| = n".into()));
    }
    let template = product_net(entry_tolerance(n, epsilon), z.max(1.0))?;
    let nn = n * n;
    let (output_dim, out_off) = if carry { (nn + n, nn) } else { (n, 0) };
    let products = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i + n * j, nn + j, out_off + i)))
        .collect();
    let carries = if carry { (0..nn).map(|k| (k, k)).collect() } else { Vec::new() };
    let mut output_bias = vec![0.0; output_dim];
    output_bias[out_off..].copy_from_slice(g);
    ProductBank {
        template: &template,
        input_dim: nn + n,
        output_dim,
        products,
        carries,
        output_bias,
    }
    .build()
}

/// One Richardson step `(vec(A), x) -> A x + g`, accurate to `eps_step` for
/// `|x_j| <= z_tilde` and `|A_ij| <= 1`.
pub fn build_phi_step(n: usize, z_tilde: f64, eps_step: f64, g: &[f64]) -> Result<NeuralNet> {
    step_bank(n, eps_step, z_tilde, g, false)
}

/// Like [`build_phi_step`] but also passes `vec(A)` through:
/// `(vec(A), x) -> (vec(A), A x + g)`.
pub fn build_phi_step_ext(n: usize, z_tilde: f64, eps_step: f64, g: &[f64]) -> Result<NeuralNet> {
    step_bank(n, eps_step, z_tilde, g, true)
}

/// Depth-one net `vec(A) -> (vec(A), e1)`.
pub fn init_net(n: usize) -> Result<NeuralNet> {
    let nn = n * n;
    let mut bias = vec![0.0; nn + n];
    bias[nn] = 1.0;
    let t = (0..nn).map(|k| (k, k, 1.0)).collect();
    NeuralNet::new(vec![Layer::from_triplets(nn + n, nn, t, bias)?])
}

/// Box bound `2 + alpha/(alpha - beta)` for the iterates.
pub fn z_tilde(alpha: f64, beta: f64) -> f64 {
    2.0 + alpha / (alpha - beta)
}

/// Parameters of an unrolled iterator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IteratorSpec {
    /// Basis size `N + 1`.
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Target accuracy of the unrolled iterator.
    pub epsilon: f64,
}

impl IteratorSpec {
    /// Per-step accuracy `(1 - beta/alpha) epsilon`.
    pub fn eps_step(&self) -> f64 {
        (1.0 - self.beta / self.alpha) * self.epsilon
    }

    pub fn z_box(&self) -> f64 {
        z_tilde(self.alpha, self.beta).max(1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta >= 0.0 && self.beta < self.alpha) {
            return Err(Error::InvalidInput(format!(
                "need 0 <= beta < alpha, got alpha={}, beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("basis size must be >= 1".into()));
        }
        Ok(())
    }
}

/// K-fold unrolled Richardson iterator `vec(A) -> c^(K)` from `c^(0) = e1`
/// with `g = e1`. `K = 0` gives the constant net `e1`.
pub fn build_phi_it(spec: &IteratorSpec) -> Result<NeuralNet> {
    spec.validate()?;
    let n = spec.n;
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    if spec.k == 0 {
        return NeuralNet::new(vec![Layer::from_triplets(n, n * n, Vec::new(), e1)?]);
    }
    let (z, eps) = (spec.z_box(), spec.eps_step());
    let ext = build_phi_step_ext(n, z, eps, &e1)?;
    let step = build_phi_step(n, z, eps, &e1)?;
    let mut net = init_net(n)?;
    for _ in 1..spec.k {
        net = sparse_concat(&ext, &net)?;
    }
    sparse_concat(&step, &net)
}

/// The same iterator evaluated by reusing one step's layers `K` times.
#[derive(Debug, Clone)]
pub struct RecurrentIterator {
    n: usize,
    k: usize,
    ext: NeuralNet,
    step: NeuralNet,
}

impl RecurrentIterator {
    pub fn new(spec: &IteratorSpec) -> Result<Self> {
        spec.validate()?;
        let mut e1 = vec![0.0; spec.n];
        e1[0] = 1.0;
        let (z, eps) = (spec.z_box(), spec.eps_step());
        Ok(Self {
            n: spec.n,
            k: spec.k,
            ext: build_phi_step_ext(spec.n, z, eps, &e1)?,
            step: build_phi_step(spec.n, z, eps, &e1)?,
        })
    }

    pub fn realize(&self, vec_a: &[f64]) -> Result<Vec<f64>> {
        let nn = self.n * self.n;
        if vec_a.len() != nn {
            return Err(Error::DimensionMismatch {
                expected: nn,
                found: vec_a.len(),
            });
        }
        let mut c = vec![0.0; self.n];
        c[0] = 1.0;
        if self.k == 0 {
            return Ok(c);
        }
        let mut state: Vec<f64> = vec_a.iter().copied().chain(c).collect();
        for _ in 1..self.k {
            state = self.ext.realize(&state)?;
        }
        self.step.realize(&state)
    }
}

/// Affine net `y -> vec(I - (alpha B_a0)^-1 sum_k y_k D_k)`.
///
/// `e[k]` holds `(alpha B_a0)^-1 D_k`, so the weight of channel `k` on output
/// `i + n j` is `-e[k][(i, j)]` and the bias is `vec(I)`.
pub fn build_phi_input(e: &[DMatrix<f64>]) -> Result<NeuralNet> {
    let m = e.len();
    let n = e.first().map(|d| d.nrows()).unwrap_or(0);
    if m == 0 || n == 0 || e.iter().any(|d| d.nrows() != n || d.ncols() != n) {
        return Err(Error::InvalidInput("need M >= 1 square matrices of equal size".into()));
    }
    let mut t = Vec::with_capacity(m * n * n);
    for (k, d) in e.iter().enumerate() {
        for j in 0..n {
            for i in 0..n {
                t.push((i + n * j, k, -d[(i, j)]));
            }
        }
    }
    let mut bias = vec![0.0; n * n];
    for i in 0..n {
        bias[i + n * i] = 1.0;
    }
    NeuralNet::new(vec![Layer::from_triplets(n * n, m, t, bias)?])
}

/// Per-channel `y -> a_min + |y| = a_min + ReLU(y) + ReLU(-y)`.
pub fn abs_shift_net(m: usize, a_min: f64) -> Result<NeuralNet> {
    let first = (0..m).flat_map(|i| [(i, i, 1.0), (m + i, i, -1.0)]).collect();
    let second = (0..m).flat_map(|i| [(i, i, 1.0), (i, m + i, 1.0)]).collect();
    NeuralNet::new(vec![
        Layer::from_triplets(2 * m, m, first, vec![0.0; 2 * m])?,
        Layer::from_triplets(m, 2 * m, second, vec![a_min; m])?,
    ])
}

/// Depth, size and certificates of a composed approximator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetBuildReport {
    pub depth: usize,
    pub size: usize,
    /// `(part, size)` of the constituents before concatenation.
    pub parts: Vec<(String, usize)>,
    pub epsilon: f64,
    pub k: usize,
    /// Accuracy of the unrolled iterator.
    pub eps_it: f64,
    pub eps_step: f64,
    pub z_box: f64,
    pub sawtooth_levels: usize,
    pub alpha: f64,
    /// The `beta` used in the step count and tolerances.
    pub beta: f64,
    pub f_dual_norm: f64,
}

/// Iterator accuracy `(alpha - beta) epsilon / (2 sqrt(n) ||f||)` with `n = N + 1`.
pub fn eps_it_for(alpha: f64, beta: f64, n: usize, f_dual_norm: f64, epsilon: f64) -> f64 {
    (alpha - beta) * epsilon / (2.0 * (n as f64).sqrt() * f_dual_norm)
}

/// `Phi_app = Phi_it ⊙ Phi_input`.
pub fn build_phi_app(
    phi_input: &NeuralNet,
    alpha: f64,
    beta: f64,
    f_dual_norm: f64,
    epsilon: f64,
) -> Result<(NeuralNet, NetBuildReport)> {
    let nn = phi_input.output_dim();
    let n = (nn as f64).sqrt().round() as usize;
    if n * n != nn {
        return Err(Error::InvalidInput(format!("input net width {nn} is not a square")));
    }
    let k = choose_k(alpha, beta, f_dual_norm, epsilon)?;
    let eps_it = eps_it_for(alpha, beta, n, f_dual_norm, epsilon);
    let spec = IteratorSpec {
        n,
        k,
        alpha,
        beta,
        epsilon: eps_it,
    };
    let it = build_phi_it(&spec)?;
    let app = sparse_concat(&it, phi_input)?;
    let report = NetBuildReport {
        depth: app.depth(),
        size: app.size(),
        parts: vec![
            ("input".into(), phi_input.size()),
            ("iterator".into(), it.size()),
        ],
        epsilon,
        k,
        eps_it,
        eps_step: spec.eps_step(),
        z_box: spec.z_box(),
        sawtooth_levels: sawtooth_levels(entry_tolerance(n, spec.eps_step()), spec.z_box()),
        alpha,
        beta,
        f_dual_norm,
    };
    Ok((app, report))
}

/// Column-major `vec`.
pub fn vec_matrix(a: &DMatrix<f64>) -> Vec<f64> {
    a.as_slice().to_vec()
}

pub fn unvec(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v)
}

pub fn to_dvector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}
