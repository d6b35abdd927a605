//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Each operation appends a node holding its forward value and the indices of
//! its inputs; `backward` walks the tape once in reverse, accumulating
//! gradients. The op set is exactly what the CNN and ViT backbones need —
//! dense and batched matrix products, NHWC convolution, the usual pointwise
//! nonlinearities, layer norm, softmax, a `gather` that covers every pure
//! data-movement step (transpose, head split/merge, crop, patch rearrange)
//! with scatter-add as its adjoint, and fused loss kernels.
//!
//! Tensors are flat `Vec<R>`s; the dimensions an op needs are stored on the
//! node itself, so there is no separate shape system to keep consistent.

use std::sync::Arc;

use super::real::Real;

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorRef(pub(crate) usize);

enum Op<R: Real> {
    /// Input or parameter; `tracked` decides whether gradients accumulate.
    Leaf { tracked: bool },
    Add(TensorRef, TensorRef),
    Mul(TensorRef, TensorRef),
    Scale(TensorRef, R),
    /// x: rows × dim, bias: dim, broadcast over rows.
    AddBias { x: TensorRef, bias: TensorRef, dim: usize },
    /// a: m × k, b: k × n.
    Matmul { a: TensorRef, b: TensorRef, m: usize, k: usize, n: usize },
    /// Batched matmul, a: batch × m × k, b: batch × k × n.
    Bmm { a: TensorRef, b: TensorRef, batch: usize, m: usize, k: usize, n: usize },
    /// NHWC convolution with same padding, square odd kernel.
    /// w layout: [ky][kx][cin][cout].
    Conv2d { x: TensorRef, w: TensorRef, n: usize, h: usize, wd: usize, cin: usize, cout: usize, ksize: usize },
    Relu(TensorRef),
    Gelu(TensorRef),
    Tanh(TensorRef),
    /// Per-row normalization over the trailing `dim` entries.
    LayerNorm { x: TensorRef, gamma: TensorRef, beta: TensorRef, dim: usize },
    /// Row-wise softmax over `cols` entries.
    Softmax { x: TensorRef, cols: usize },
    /// out[i] = x[map[i]]; adjoint is scatter-add. Covers crops, transposes,
    /// head splits, patch rearranges, broadcast-by-index.
    Gather { x: TensorRef, map: Arc<Vec<usize>> },
    /// Row-wise concatenation: out row = a row (cols_a) then b row (cols_b).
    ConcatCols { a: TensorRef, b: TensorRef, cols_a: usize, cols_b: usize },
    /// Mean over the hw axis of an (n, hw, c) tensor → (n, c).
    SpatialMean { x: TensorRef, hw: usize, c: usize },
    /// Per-row −Σ t·log softmax(z); targets are constants.
    SoftmaxCrossEntropy { logits: TensorRef, targets: TensorRef, cols: usize },
    /// Elementwise (pred − target)²; targets are constants.
    SquaredError { pred: TensorRef, target: TensorRef },
    /// Scalar inv_n · Σ w·x; weights are constants.
    WeightedMean { x: TensorRef, weights: TensorRef, inv_n: R },
}

struct Node<R: Real> {
    value: Vec<R>,
    op: Op<R>,
}

pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
}

const LN_EPS: f64 = 1e-5;

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Tape { nodes: Vec::new() }
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Vec<R>, op: Op<R>) -> TensorRef {
        self.nodes.push(Node { value, op });
        TensorRef(self.nodes.len() - 1)
    }

    pub fn value(&self, t: TensorRef) -> &[R] {
        &self.nodes[t.0].value
    }

    pub fn len(&self, t: TensorRef) -> usize {
        self.nodes[t.0].value.len()
    }

    /// Untracked input: gradients are not accumulated through it.
    pub fn constant(&mut self, value: Vec<R>) -> TensorRef {
        self.push(value, Op::Leaf { tracked: false })
    }

    /// Tracked leaf (parameter): `backward` produces a gradient for it.
    pub fn param(&mut self, value: Vec<R>) -> TensorRef {
        self.push(value, Op::Leaf { tracked: true })
    }

    pub fn add(&mut self, a: TensorRef, b: TensorRef) -> TensorRef {
        debug_assert_eq!(self.len(a), self.len(b));
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x + y)
            .collect();
        self.push(value, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: TensorRef, b: TensorRef) -> TensorRef {
        debug_assert_eq!(self.len(a), self.len(b));
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x * y)
            .collect();
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: TensorRef, s: R) -> TensorRef {
        let value = self.nodes[a.0].value.iter().map(|&x| x * s).collect();
        self.push(value, Op::Scale(a, s))
    }

    pub fn add_bias(&mut self, x: TensorRef, bias: TensorRef) -> TensorRef {
        let dim = self.len(bias);
        debug_assert_eq!(self.len(x) % dim, 0);
        let value = self.nodes[x.0]
            .value
            .iter()
            .enumerate()
            .map(|(i, &v)| v + self.nodes[bias.0].value[i % dim])
            .collect();
        self.push(value, Op::AddBias { x, bias, dim })
    }

    pub fn matmul(&mut self, a: TensorRef, b: TensorRef, m: usize, k: usize, n: usize) -> TensorRef {
        debug_assert_eq!(self.len(a), m * k);
        debug_assert_eq!(self.len(b), k * n);
        let mut out = vec![R::ZERO; m * n];
        matmul_acc(
            &self.nodes[a.0].value,
            &self.nodes[b.0].value,
            &mut out,
            m,
            k,
            n,
        );
        self.push(out, Op::Matmul { a, b, m, k, n })
    }

    pub fn bmm(
        &mut self,
        a: TensorRef,
        b: TensorRef,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
    ) -> TensorRef {
        debug_assert_eq!(self.len(a), batch * m * k);
        debug_assert_eq!(self.len(b), batch * k * n);
        let mut out = vec![R::ZERO; batch * m * n];
        for i in 0..batch {
            matmul_acc(
                &self.nodes[a.0].value[i * m * k..(i + 1) * m * k],
                &self.nodes[b.0].value[i * k * n..(i + 1) * k * n],
                &mut out[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
        self.push(out, Op::Bmm { a, b, batch, m, k, n })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv2d(
        &mut self,
        x: TensorRef,
        w: TensorRef,
        n: usize,
        h: usize,
        wd: usize,
        cin: usize,
        cout: usize,
        ksize: usize,
    ) -> TensorRef {
        debug_assert_eq!(self.len(x), n * h * wd * cin);
        debug_assert_eq!(self.len(w), ksize * ksize * cin * cout);
        debug_assert_eq!(ksize % 2, 1, "same padding needs an odd kernel");
        let mut out = vec![R::ZERO; n * h * wd * cout];
        conv2d_forward(
            &self.nodes[x.0].value,
            &self.nodes[w.0].value,
            &mut out,
            n,
            h,
            wd,
            cin,
            cout,
            ksize,
        );
        self.push(out, Op::Conv2d { x, w, n, h, wd, cin, cout, ksize })
    }

    pub fn relu(&mut self, a: TensorRef) -> TensorRef {
        let value = self.nodes[a.0]
            .value
            .iter()
            .map(|&x| if x > R::ZERO { x } else { R::ZERO })
            .collect();
        self.push(value, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: TensorRef) -> TensorRef {
        let value = self.nodes[a.0].value.iter().map(|&x| gelu(x)).collect();
        self.push(value, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: TensorRef) -> TensorRef {
        let value = self.nodes[a.0].value.iter().map(|&x| x.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    pub fn layer_norm(
        &mut self,
        x: TensorRef,
        gamma: TensorRef,
        beta: TensorRef,
        dim: usize,
    ) -> TensorRef {
        debug_assert_eq!(self.len(x) % dim, 0);
        debug_assert_eq!(self.len(gamma), dim);
        debug_assert_eq!(self.len(beta), dim);
        let rows = self.len(x) / dim;
        let mut out = vec![R::ZERO; rows * dim];
        let eps = R::from_f64(LN_EPS);
        for r in 0..rows {
            let row = &self.nodes[x.0].value[r * dim..(r + 1) * dim];
            let (mean, inv_std) = row_moments(row, eps);
            for (i, &v) in row.iter().enumerate() {
                out[r * dim + i] = (v - mean) * inv_std * self.nodes[gamma.0].value[i]
                    + self.nodes[beta.0].value[i];
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, dim })
    }

    pub fn softmax(&mut self, x: TensorRef, cols: usize) -> TensorRef {
        debug_assert_eq!(self.len(x) % cols, 0);
        let rows = self.len(x) / cols;
        let mut out = vec![R::ZERO; rows * cols];
        for r in 0..rows {
            let row = &self.nodes[x.0].value[r * cols..(r + 1) * cols];
            softmax_row(row, &mut out[r * cols..(r + 1) * cols]);
        }
        self.push(out, Op::Softmax { x, cols })
    }

    pub fn gather(&mut self, x: TensorRef, map: Arc<Vec<usize>>) -> TensorRef {
        let value = map.iter().map(|&i| self.nodes[x.0].value[i]).collect();
        self.push(value, Op::Gather { x, map })
    }

    pub fn concat_cols(
        &mut self,
        a: TensorRef,
        b: TensorRef,
        cols_a: usize,
        cols_b: usize,
    ) -> TensorRef {
        debug_assert_eq!(self.len(a) % cols_a, 0);
        let rows = self.len(a) / cols_a;
        debug_assert_eq!(self.len(b), rows * cols_b);
        let mut value = Vec::with_capacity(rows * (cols_a + cols_b));
        for r in 0..rows {
            value.extend_from_slice(&self.nodes[a.0].value[r * cols_a..(r + 1) * cols_a]);
            value.extend_from_slice(&self.nodes[b.0].value[r * cols_b..(r + 1) * cols_b]);
        }
        self.push(value, Op::ConcatCols { a, b, cols_a, cols_b })
    }

    pub fn spatial_mean(&mut self, x: TensorRef, hw: usize, c: usize) -> TensorRef {
        debug_assert_eq!(self.len(x) % (hw * c), 0);
        let n = self.len(x) / (hw * c);
        let mut out = vec![R::ZERO; n * c];
        let inv = R::from_f64(1.0 / hw as f64);
        for b in 0..n {
            for p in 0..hw {
                for ch in 0..c {
                    let v = self.nodes[x.0].value[(b * hw + p) * c + ch];
                    out[b * c + ch] += v * inv;
                }
            }
        }
        self.push(out, Op::SpatialMean { x, hw, c })
    }

    /// Per-row cross entropy of softmax(logits) against target distributions.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: TensorRef,
        targets: TensorRef,
        cols: usize,
    ) -> TensorRef {
        debug_assert_eq!(self.len(logits), self.len(targets));
        let rows = self.len(logits) / cols;
        let mut out = vec![R::ZERO; rows];
        for r in 0..rows {
            let z = &self.nodes[logits.0].value[r * cols..(r + 1) * cols];
            let t = &self.nodes[targets.0].value[r * cols..(r + 1) * cols];
            let lse = log_sum_exp(z);
            let mut ce = R::ZERO;
            for i in 0..cols {
                ce += t[i] * (lse - z[i]);
            }
            out[r] = ce;
        }
        self.push(out, Op::SoftmaxCrossEntropy { logits, targets, cols })
    }

    pub fn squared_error(&mut self, pred: TensorRef, target: TensorRef) -> TensorRef {
        debug_assert_eq!(self.len(pred), self.len(target));
        let value = self.nodes[pred.0]
            .value
            .iter()
            .zip(&self.nodes[target.0].value)
            .map(|(&p, &t)| (p - t) * (p - t))
            .collect();
        self.push(value, Op::SquaredError { pred, target })
    }

    /// Scalar `inv_n · Σ weights·x`.
    pub fn weighted_mean(&mut self, x: TensorRef, weights: TensorRef, inv_n: R) -> TensorRef {
        debug_assert_eq!(self.len(x), self.len(weights));
        let mut acc = R::ZERO;
        for (&v, &w) in self.nodes[x.0].value.iter().zip(&self.nodes[weights.0].value) {
            acc += v * w;
        }
        self.push(vec![acc * inv_n], Op::WeightedMean { x, weights, inv_n })
    }

    /// Gradients of the scalar at `loss` with respect to every node; entries
    /// are `None` for nodes the loss does not depend on (and for untracked
    /// leaves' ancestors, trivially). Index by `TensorRef.0`.
    pub fn backward(&self, loss: TensorRef) -> Vec<Option<Vec<R>>> {
        assert_eq!(self.len(loss), 1, "backward starts from a scalar");
        let mut grads: Vec<Option<Vec<R>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![R::ONE]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf { .. } => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, a.0, &g, |gi, _| gi);
                    accumulate(&mut grads, b.0, &g, |gi, _| gi);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate(&mut grads, a.0, &g, |gi, idx| gi * bv[idx]);
                    accumulate(&mut grads, b.0, &g, |gi, idx| gi * av[idx]);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads, a.0, &g, |gi, _| gi * s);
                }
                Op::AddBias { x, bias, dim } => {
                    accumulate(&mut grads, x.0, &g, |gi, _| gi);
                    let gb = grads[bias.0].get_or_insert_with(|| vec![R::ZERO; *dim]);
                    for (i, &gi) in g.iter().enumerate() {
                        gb[i % dim] += gi;
                    }
                }
                Op::Matmul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga = grads[a.0].get_or_insert_with(|| vec![R::ZERO; m * k]);
                    matmul_grad_a(&g, bv, ga, m, k, n);
                    let gb = grads[b.0].get_or_insert_with(|| vec![R::ZERO; k * n]);
                    matmul_grad_b(av, &g, gb, m, k, n);
                }
                Op::Bmm { a, b, batch, m, k, n } => {
                    let (batch, m, k, n) = (*batch, *m, *k, *n);
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga = grads[a.0].get_or_insert_with(|| vec![R::ZERO; batch * m * k]);
                    for i in 0..batch {
                        matmul_grad_a(
                            &g[i * m * n..(i + 1) * m * n],
                            &bv[i * k * n..(i + 1) * k * n],
                            &mut ga[i * m * k..(i + 1) * m * k],
                            m,
                            k,
                            n,
                        );
                    }
                    let gb = grads[b.0].get_or_insert_with(|| vec![R::ZERO; batch * k * n]);
                    for i in 0..batch {
                        matmul_grad_b(
                            &av[i * m * k..(i + 1) * m * k],
                            &g[i * m * n..(i + 1) * m * n],
                            &mut gb[i * k * n..(i + 1) * k * n],
                            m,
                            k,
                            n,
                        );
                    }
                }
                Op::Conv2d { x, w, n, h, wd, cin, cout, ksize } => {
                    let (n, h, wd, cin, cout, ksize) = (*n, *h, *wd, *cin, *cout, *ksize);
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    let gx = grads[x.0].get_or_insert_with(|| vec![R::ZERO; n * h * wd * cin]);
                    conv2d_grad_x(&g, wv, gx, n, h, wd, cin, cout, ksize);
                    let gw =
                        grads[w.0].get_or_insert_with(|| vec![R::ZERO; ksize * ksize * cin * cout]);
                    conv2d_grad_w(xv, &g, gw, n, h, wd, cin, cout, ksize);
                }
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    accumulate(&mut grads, a.0, &g, |gi, idx| {
                        if av[idx] > R::ZERO {
                            gi
                        } else {
                            R::ZERO
                        }
                    });
                }
                Op::Gelu(a) => {
                    let av = &self.nodes[a.0].value;
                    accumulate(&mut grads, a.0, &g, |gi, idx| gi * gelu_grad(av[idx]));
                }
                Op::Tanh(a) => {
                    let yv = &self.nodes[i].value;
                    accumulate(&mut grads, a.0, &g, |gi, idx| {
                        gi * (R::ONE - yv[idx] * yv[idx])
                    });
                }
                Op::LayerNorm { x, gamma, beta, dim } => {
                    let dim = *dim;
                    let rows = self.len(*x) / dim;
                    let xv = &self.nodes[x.0].value;
                    let gammav = &self.nodes[gamma.0].value;
                    let eps = R::from_f64(LN_EPS);
                    {
                        let gx = grads[x.0].get_or_insert_with(|| vec![R::ZERO; rows * dim]);
                        for r in 0..rows {
                            let row = &xv[r * dim..(r + 1) * dim];
                            let grow = &g[r * dim..(r + 1) * dim];
                            let (mean, inv_std) = row_moments(row, eps);
                            // dL/dxhat_i = g_i·gamma_i; then the standard
                            // layer-norm backward in terms of xhat.
                            let inv_dim = R::from_f64(1.0 / dim as f64);
                            let mut sum_gh = R::ZERO;
                            let mut sum_gh_xhat = R::ZERO;
                            for j in 0..dim {
                                let xhat = (row[j] - mean) * inv_std;
                                let gh = grow[j] * gammav[j];
                                sum_gh += gh;
                                sum_gh_xhat += gh * xhat;
                            }
                            for j in 0..dim {
                                let xhat = (row[j] - mean) * inv_std;
                                let gh = grow[j] * gammav[j];
                                gx[r * dim + j] +=
                                    inv_std * (gh - inv_dim * sum_gh - xhat * inv_dim * sum_gh_xhat);
                            }
                        }
                    }
                    {
                        let gg = grads[gamma.0].get_or_insert_with(|| vec![R::ZERO; dim]);
                        for r in 0..rows {
                            let row = &xv[r * dim..(r + 1) * dim];
                            let (mean, inv_std) = row_moments(row, eps);
                            for j in 0..dim {
                                gg[j] += g[r * dim + j] * (row[j] - mean) * inv_std;
                            }
                        }
                    }
                    let gb = grads[beta.0].get_or_insert_with(|| vec![R::ZERO; dim]);
                    for r in 0..rows {
                        for j in 0..dim {
                            gb[j] += g[r * dim + j];
                        }
                    }
                }
                Op::Softmax { x, cols } => {
                    let cols = *cols;
                    let yv = &self.nodes[i].value;
                    let rows = yv.len() / cols;
                    let gx = grads[x.0].get_or_insert_with(|| vec![R::ZERO; rows * cols]);
                    for r in 0..rows {
                        let y = &yv[r * cols..(r + 1) * cols];
                        let grow = &g[r * cols..(r + 1) * cols];
                        let mut dot = R::ZERO;
                        for j in 0..cols {
                            dot += y[j] * grow[j];
                        }
                        for j in 0..cols {
                            gx[r * cols + j] += y[j] * (grow[j] - dot);
                        }
                    }
                }
                Op::Gather { x, map } => {
                    let gx = grads[x.0].get_or_insert_with(|| vec![R::ZERO; self.len(*x)]);
                    for (j, &src) in map.iter().enumerate() {
                        gx[src] += g[j];
                    }
                }
                Op::ConcatCols { a, b, cols_a, cols_b } => {
                    let (ca, cb) = (*cols_a, *cols_b);
                    let rows = self.len(*a) / ca;
                    let ga = grads[a.0].get_or_insert_with(|| vec![R::ZERO; rows * ca]);
                    for r in 0..rows {
                        for j in 0..ca {
                            ga[r * ca + j] += g[r * (ca + cb) + j];
                        }
                    }
                    let gb = grads[b.0].get_or_insert_with(|| vec![R::ZERO; rows * cb]);
                    for r in 0..rows {
                        for j in 0..cb {
                            gb[r * cb + j] += g[r * (ca + cb) + ca + j];
                        }
                    }
                }
                Op::SpatialMean { x, hw, c } => {
                    let (hw, c) = (*hw, *c);
                    let n = self.len(*x) / (hw * c);
                    let inv = R::from_f64(1.0 / hw as f64);
                    let gx = grads[x.0].get_or_insert_with(|| vec![R::ZERO; n * hw * c]);
                    for b in 0..n {
                        for p in 0..hw {
                            for ch in 0..c {
                                gx[(b * hw + p) * c + ch] += g[b * c + ch] * inv;
                            }
                        }
                    }
                }
                Op::SoftmaxCrossEntropy { logits, targets, cols } => {
                    let cols = *cols;
                    let zv = &self.nodes[logits.0].value;
                    let tv = &self.nodes[targets.0].value;
                    let rows = zv.len() / cols;
                    let gz = grads[logits.0].get_or_insert_with(|| vec![R::ZERO; rows * cols]);
                    let mut sm = vec![R::ZERO; cols];
                    for r in 0..rows {
                        let z = &zv[r * cols..(r + 1) * cols];
                        let t = &tv[r * cols..(r + 1) * cols];
                        softmax_row(z, &mut sm);
                        // d ce / d z = (softmax(z)·Σt − t); targets are
                        // distributions so Σt = 1, but keep the general form.
                        let mut tsum = R::ZERO;
                        for j in 0..cols {
                            tsum += t[j];
                        }
                        for j in 0..cols {
                            gz[r * cols + j] += g[r] * (sm[j] * tsum - t[j]);
                        }
                    }
                }
                Op::SquaredError { pred, target } => {
                    let pv = &self.nodes[pred.0].value;
                    let tv = &self.nodes[target.0].value;
                    let two = R::from_f64(2.0);
                    accumulate(&mut grads, pred.0, &g, |gi, idx| {
                        gi * two * (pv[idx] - tv[idx])
                    });
                }
                Op::WeightedMean { x, weights, inv_n } => {
                    let inv_n = *inv_n;
                    let wv = &self.nodes[weights.0].value;
                    let gx = grads[x.0].get_or_insert_with(|| vec![R::ZERO; wv.len()]);
                    for (j, &w) in wv.iter().enumerate() {
                        gx[j] += g[0] * inv_n * w;
                    }
                }
            }
            grads[i] = Some(g);
        }
        // Drop gradients of untracked leaves so callers only see parameters
        // (and intermediates, which they address by TensorRef if needed).
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { tracked: false } = node.op {
                grads[i] = None;
            }
        }
        grads
    }
}

fn accumulate<R: Real>(
    grads: &mut [Option<Vec<R>>],
    target: usize,
    g: &[R],
    f: impl Fn(R, usize) -> R,
) {
    let slot = grads[target].get_or_insert_with(|| vec![R::ZERO; g.len()]);
    for (idx, &gi) in g.iter().enumerate() {
        slot[idx] += f(gi, idx);
    }
}

/// out += a·b for row-major a (m×k), b (k×n).
fn matmul_acc<R: Real>(a: &[R], b: &[R], out: &mut [R], m: usize, k: usize, n: usize) {
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

/// ga += g·bᵀ for g (m×n), b (k×n).
fn matmul_grad_a<R: Real>(g: &[R], b: &[R], ga: &mut [R], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = R::ZERO;
            for j in 0..n {
                acc += grow[j] * brow[j];
            }
            ga[i * k + p] += acc;
        }
    }
}

/// gb += aᵀ·g for a (m×k), g (m×n).
fn matmul_grad_b<R: Real>(a: &[R], g: &[R], gb: &mut [R], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let gbrow = &mut gb[p * n..(p + 1) * n];
            for j in 0..n {
                gbrow[j] += av * grow[j];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv2d_forward<R: Real>(
    x: &[R],
    w: &[R],
    out: &mut [R],
    n: usize,
    h: usize,
    wd: usize,
    cin: usize,
    cout: usize,
    ksize: usize,
) {
    let pad = ksize / 2;
    for b in 0..n {
        for oy in 0..h {
            for ox in 0..wd {
                let orow = &mut out[((b * h + oy) * wd + ox) * cout..][..cout];
                for ky in 0..ksize {
                    let iy = oy + ky;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..ksize {
                        let ix = ox + kx;
                        if ix < pad || ix - pad >= wd {
                            continue;
                        }
                        let ix = ix - pad;
                        let xrow = &x[((b * h + iy) * wd + ix) * cin..][..cin];
                        let wbase = (ky * ksize + kx) * cin * cout;
                        for ci in 0..cin {
                            let xv = xrow[ci];
                            let wrow = &w[wbase + ci * cout..][..cout];
                            for co in 0..cout {
                                orow[co] += xv * wrow[co];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv2d_grad_x<R: Real>(
    g: &[R],
    w: &[R],
    gx: &mut [R],
    n: usize,
    h: usize,
    wd: usize,
    cin: usize,
    cout: usize,
    ksize: usize,
) {
    let pad = ksize / 2;
    for b in 0..n {
        for oy in 0..h {
            for ox in 0..wd {
                let grow = &g[((b * h + oy) * wd + ox) * cout..][..cout];
                for ky in 0..ksize {
                    let iy = oy + ky;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..ksize {
                        let ix = ox + kx;
                        if ix < pad || ix - pad >= wd {
                            continue;
                        }
                        let ix = ix - pad;
                        let gxrow = &mut gx[((b * h + iy) * wd + ix) * cin..][..cin];
                        let wbase = (ky * ksize + kx) * cin * cout;
                        for ci in 0..cin {
                            let wrow = &w[wbase + ci * cout..][..cout];
                            let mut acc = R::ZERO;
                            for co in 0..cout {
                                acc += grow[co] * wrow[co];
                            }
                            gxrow[ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv2d_grad_w<R: Real>(
    x: &[R],
    g: &[R],
    gw: &mut [R],
    n: usize,
    h: usize,
    wd: usize,
    cin: usize,
    cout: usize,
    ksize: usize,
) {
    let pad = ksize / 2;
    for b in 0..n {
        for oy in 0..h {
            for ox in 0..wd {
                let grow = &g[((b * h + oy) * wd + ox) * cout..][..cout];
                for ky in 0..ksize {
                    let iy = oy + ky;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..ksize {
                        let ix = ox + kx;
                        if ix < pad || ix - pad >= wd {
                            continue;
                        }
                        let ix = ix - pad;
                        let xrow = &x[((b * h + iy) * wd + ix) * cin..][..cin];
                        let wbase = (ky * ksize + kx) * cin * cout;
                        for ci in 0..cin {
                            let xv = xrow[ci];
                            let gwrow = &mut gw[wbase + ci * cout..][..cout];
                            for co in 0..cout {
                                gwrow[co] += xv * grow[co];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn row_moments<R: Real>(row: &[R], eps: R) -> (R, R) {
    let inv_dim = R::from_f64(1.0 / row.len() as f64);
    let mut mean = R::ZERO;
    for &v in row {
        mean += v;
    }
    mean *= inv_dim;
    let mut var = R::ZERO;
    for &v in row {
        var += (v - mean) * (v - mean);
    }
    var *= inv_dim;
    (mean, R::ONE / (var + eps).sqrt())
}

fn softmax_row<R: Real>(z: &[R], out: &mut [R]) {
    let mut m = z[0];
    for &v in z.iter() {
        m = m.max(v);
    }
    let mut sum = R::ZERO;
    for (o, &v) in out.iter_mut().zip(z.iter()) {
        let e = (v - m).exp();
        *o = e;
        sum += e;
    }
    let inv = R::ONE / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

fn log_sum_exp<R: Real>(z: &[R]) -> R {
    let mut m = z[0];
    for &v in z.iter() {
        m = m.max(v);
    }
    let mut sum = R::ZERO;
    for &v in z.iter() {
        sum += (v - m).exp();
    }
    m + sum.ln()
}

/// tanh-form GELU (the usual transformer approximation).
fn gelu<R: Real>(x: R) -> R {
    let c = R::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let a = R::from_f64(0.044715);
    let half = R::from_f64(0.5);
    half * x * (R::ONE + (c * (x + a * x * x * x)).tanh())
}

fn gelu_grad<R: Real>(x: R) -> R {
    let c = R::from_f64(0.797_884_560_802_865_4);
    let a = R::from_f64(0.044715);
    let half = R::from_f64(0.5);
    let three = R::from_f64(3.0);
    let inner = c * (x + a * x * x * x);
    let t = inner.tanh();
    let sech2 = R::ONE - t * t;
    half * (R::ONE + t) + half * x * sech2 * c * (R::ONE + three * a * x * x)
}
