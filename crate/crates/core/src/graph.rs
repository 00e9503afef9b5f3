//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters are
//! borrowed from a [`ParamStore`] rather than copied, so a graph is cheap to
//! build per example and many graphs can run concurrently against the same
//! frozen store. [`Graph::backward`] walks the tape in reverse and returns
//! gradients for every parameter that took part in the pass.
//!
//! The op set is deliberately small: it covers the transformer encoder,
//! the convolutional head, the recurrent baseline and the losses. Ops that
//! would be expensive as compositions (attention, layer norm, valid
//! convolution) are fused and carry their own backward rules.

use std::collections::HashMap;

use crate::params::{Gradients, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{matmul, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Constant,
    Param(ParamId),
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Gelu(Var),
    Tanh(Var),
    Sigmoid(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, rstd: Vec<T> },
    Gather { table: Var, ids: Vec<usize> },
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<T> },
    Stack(Vec<Var>),
    Concat(Vec<Var>),
    Conv { input: Var, kernel: Var, bias: Var },
    MaxLast { x: Var, argmax: Vec<usize> },
    Row { x: Var, index: usize },
    Slice { x: Var, start: usize },
    Reshape(Var),
    Sum(Var),
    BceWithLogits { logit: Var, target: T },
}

struct Node<T> {
    op: Op<T>,
    /// `None` for parameters, whose value lives in the store.
    value: Option<Tensor<T>>,
}

pub struct Graph<'s, T: Scalar> {
    store: Option<&'s ParamStore<T>>,
    nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'s, T: Scalar> Graph<'s, T> {
    pub fn new(store: &'s ParamStore<T>) -> Self {
        Self { store: Some(store), nodes: Vec::new(), param_vars: HashMap::new() }
    }

    /// A graph with no parameter store; only constants can be leaves.
    pub fn detached() -> Self {
        Self { store: None, nodes: Vec::new(), param_vars: HashMap::new() }
    }

    pub fn store(&self) -> Option<&'s ParamStore<T>> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.expect("parameter node without store").get(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Constant, value)
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same var.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        assert!(self.store.is_some(), "param() on a detached graph");
        self.nodes.push(Node { op: Op::Param(id), value: None });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    /// `x·wᵀ + b` with `x: [n, in]` (or `[in]`), `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (xv, wv) = (self.value(x), self.value(w));
        let (out_dim, in_dim) = (wv.shape()[0], wv.shape()[1]);
        assert_eq!(xv.last_dim(), in_dim, "linear input width");
        let n = xv.rows();
        let mut y = vec![T::zero(); n * out_dim];
        matmul(xv.data(), false, wv.data(), true, n, in_dim, out_dim, &mut y, false);
        if let Some(b) = b {
            let bv = self.value(b).data();
            assert_eq!(bv.len(), out_dim, "linear bias width");
            for row in y.chunks_mut(out_dim) {
                for (yi, &bi) in row.iter_mut().zip(bv) {
                    *yi += bi;
                }
            }
        }
        let shape = if xv.rank() == 1 { vec![out_dim] } else { vec![n, out_dim] };
        self.push(Op::Linear { x, w, b }, Tensor::from_vec(&shape, y))
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "elementwise operands differ in size");
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(av.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = self.zip_with(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let y = self.zip_with(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), y)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let y = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), y)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = self.value(a).map(|x| x.max(T::zero()));
        self.push(Op::Relu(a), y)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let y = self.value(a).map(|x| x * normal_cdf(x));
        self.push(Op::Gelu(a), y)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).map(T::tanh);
        self.push(Op::Tanh(a), y)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), y)
    }

    /// Normalizes over the trailing dimension.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Var {
        let xv = self.value(x);
        let d = xv.last_dim();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        assert_eq!(g.len(), d);
        assert_eq!(b.len(), d);
        let rows = xv.rows();
        let dn = T::lit(d as f64);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut rstd = vec![T::zero(); rows];
        let mut y = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                y[r * d + j] = h * g[j] + b[j];
            }
        }
        let shape = xv.shape().to_vec();
        self.push(Op::LayerNorm { x, gamma, beta, xhat, rstd }, Tensor::from_vec(&shape, y))
    }

    /// Row lookup: `table: [V, H]` → `[ids.len(), H]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let tv = self.value(table);
        let h = tv.last_dim();
        let mut y = Vec::with_capacity(ids.len() * h);
        for &i in ids {
            y.extend_from_slice(tv.row(i));
        }
        self.push(Op::Gather { table, ids: ids.to_vec() }, Tensor::from_vec(&[ids.len(), h], y))
    }

    /// Multi-head scaled dot-product attention over `[L, H]` projections.
    /// Keys with `key_mask[j] == false` receive zero attention weight.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, key_mask: &[bool], heads: usize) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (l, h) = (qv.rows(), qv.last_dim());
        assert_eq!(key_mask.len(), l, "attention mask length");
        assert_eq!(h % heads, 0, "hidden size divisible by heads");
        let d = h / heads;
        let scale = T::one() / T::lit(d as f64).sqrt();
        let mut probs = vec![T::zero(); heads * l * l];
        let mut ctx = vec![T::zero(); l * h];
        let hs = h as isize;
        for head in 0..heads {
            let off = head * d;
            let p = &mut probs[head * l * l..(head + 1) * l * l];
            // scores = q_h · k_hᵀ
            T::gemm(l, d, l, scale, &qv.data()[off..], (hs, 1), &kv.data()[off..], (1, hs), T::zero(), p, (l as isize, 1));
            for row in p.chunks_mut(l) {
                let max = row
                    .iter()
                    .zip(key_mask)
                    .filter(|(_, &m)| m)
                    .map(|(&s, _)| s)
                    .fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for (s, &m) in row.iter_mut().zip(key_mask) {
                    *s = if m { (*s - max).exp() } else { T::zero() };
                    total += *s;
                }
                if total > T::zero() {
                    for s in row.iter_mut() {
                        *s /= total;
                    }
                }
            }
            T::gemm(l, l, d, T::one(), p, (l as isize, 1), &vv.data()[off..], (hs, 1), T::zero(), &mut ctx[off..], (hs, 1));
        }
        let shape = qv.shape().to_vec();
        self.push(Op::Attention { q, k, v, heads, probs }, Tensor::from_vec(&shape, ctx))
    }

    /// Stacks same-shaped tensors along a new leading axis.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let inner = self.value(parts[0]).shape().to_vec();
        let mut data = Vec::with_capacity(inner.iter().product::<usize>() * parts.len());
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.shape(), &inner[..], "stack operands differ in shape");
            data.extend_from_slice(pv.data());
        }
        let mut shape = vec![parts.len()];
        shape.extend(inner);
        self.push(Op::Stack(parts.to_vec()), Tensor::from_vec(&shape, data))
    }

    /// Flattens and concatenates into a rank-1 tensor.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let n = data.len();
        self.push(Op::Concat(parts.to_vec()), Tensor::from_vec(&[n], data))
    }

    /// Valid (unpadded) convolution whose kernel spans the full embedding
    /// width: `input: [C, L, H]`, `kernel: [F, C, w, H]`, `bias: [F]` →
    /// `[F, L − w + 1]`.
    pub fn conv(&mut self, input: Var, kernel: Var, bias: Var) -> Var {
        let (xv, kv, bv) = (self.value(input), self.value(kernel), self.value(bias));
        let (c, l, h) = dims3(xv.shape());
        let ks = kv.shape();
        assert_eq!(ks.len(), 4, "conv kernel rank");
        let (f, w) = (ks[0], ks[2]);
        assert_eq!((ks[1], ks[3]), (c, h), "conv kernel channels/width");
        assert!(w >= 1 && w <= l, "conv width {w} exceeds length {l}");
        let p = l - w + 1;
        let mut y = vec![T::zero(); f * p];
        for (fi, row) in y.chunks_mut(p).enumerate() {
            row.fill(bv.data()[fi]);
        }
        let k_row = (c * w * h) as isize;
        for ci in 0..c {
            let kern = &kv.data()[ci * w * h..];
            let slab = &xv.data()[ci * l * h..(ci + 1) * l * h];
            // windows[r, p] = slab[p·H + r]
            T::gemm(f, w * h, p, T::one(), kern, (k_row, 1), slab, (1, h as isize), T::one(), &mut y, (p as isize, 1));
        }
        self.push(Op::Conv { input, kernel, bias }, Tensor::from_vec(&[f, p], y))
    }

    /// Max over the trailing axis; ties resolve to the first position.
    pub fn max_last(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let rows = xv.rows();
        let mut argmax = Vec::with_capacity(rows);
        let mut y = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            argmax.push(best);
            y.push(row[best]);
        }
        let shape = xv.shape()[..xv.rank() - 1].to_vec();
        let shape = if shape.is_empty() { vec![1] } else { shape };
        self.push(Op::MaxLast { x, argmax }, Tensor::from_vec(&shape, y))
    }

    pub fn row(&mut self, x: Var, index: usize) -> Var {
        let xv = self.value(x);
        let r = xv.row(index).to_vec();
        let n = r.len();
        self.push(Op::Row { x, index }, Tensor::from_vec(&[n], r))
    }

    /// Contiguous slice of the flattened tensor.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let s = self.value(x).data()[start..start + len].to_vec();
        self.push(Op::Slice { x, start }, Tensor::from_vec(&[len], s))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let y = self.value(x).clone().reshaped(shape);
        self.push(Op::Reshape(x), y)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    /// Numerically stable binary cross-entropy on a single logit.
    pub fn bce_with_logits(&mut self, logit: Var, target: T) -> Var {
        let z = self.value(logit).data()[0];
        let loss = z.max(T::zero()) - z * target + (T::one() + (-z.abs()).exp()).ln();
        self.push(Op::BceWithLogits { logit, target }, Tensor::scalar(loss))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Backward<T> {
        assert_eq!(self.value(output).len(), 1, "backward from a non-scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=output.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant | Op::Param(_) => {
                    grads[idx] = Some(gy);
                    continue;
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (out_dim, in_dim) = (wv.shape()[0], wv.shape()[1]);
                    let n = xv.rows();
                    let mut dx = vec![T::zero(); n * in_dim];
                    matmul(gy.data(), false, wv.data(), false, n, out_dim, in_dim, &mut dx, false);
                    acc(&mut grads, *x, xv.shape(), dx);
                    let mut dw = vec![T::zero(); out_dim * in_dim];
                    matmul(gy.data(), true, xv.data(), false, out_dim, n, in_dim, &mut dw, false);
                    acc(&mut grads, *w, wv.shape(), dw);
                    if let Some(b) = b {
                        let mut db = vec![T::zero(); out_dim];
                        for row in gy.data().chunks(out_dim) {
                            for (d, &g) in db.iter_mut().zip(row) {
                                *d += g;
                            }
                        }
                        acc(&mut grads, *b, &[out_dim], db);
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, gy.shape(), gy.data().to_vec());
                    acc(&mut grads, *b, gy.shape(), gy.data().to_vec());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let da = gy.data().iter().zip(bv.data()).map(|(&g, &y)| g * y).collect();
                    let db = gy.data().iter().zip(av.data()).map(|(&g, &x)| g * x).collect();
                    acc(&mut grads, *a, av.shape(), da);
                    acc(&mut grads, *b, bv.shape(), db);
                }
                Op::Scale(a, c) => {
                    let da = gy.data().iter().map(|&g| g * *c).collect();
                    acc(&mut grads, *a, gy.shape(), da);
                }
                Op::Relu(a) => {
                    let xv = self.value(*a);
                    let da = gy
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                        .collect();
                    acc(&mut grads, *a, xv.shape(), da);
                }
                Op::Gelu(a) => {
                    let xv = self.value(*a);
                    let da = gy
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(&g, &x)| g * (normal_cdf(x) + x * normal_pdf(x)))
                        .collect();
                    acc(&mut grads, *a, xv.shape(), da);
                }
                Op::Tanh(a) | Op::Sigmoid(a) => {
                    let yv = node.value.as_ref().expect("activation value");
                    let is_tanh = matches!(node.op, Op::Tanh(_));
                    let da = gy
                        .data()
                        .iter()
                        .zip(yv.data())
                        .map(|(&g, &y)| if is_tanh { g * (T::one() - y * y) } else { g * y * (T::one() - y) })
                        .collect();
                    acc(&mut grads, *a, yv.shape(), da);
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let g = self.value(*gamma).data();
                    let d = g.len();
                    let dn = T::lit(d as f64);
                    let mut dgamma = vec![T::zero(); d];
                    let mut dbeta = vec![T::zero(); d];
                    let mut dx = vec![T::zero(); xhat.len()];
                    for (r, &rs) in rstd.iter().enumerate() {
                        let gy_row = &gy.data()[r * d..(r + 1) * d];
                        let xh = &xhat[r * d..(r + 1) * d];
                        let mut mean_dxh = T::zero();
                        let mut mean_dxh_xh = T::zero();
                        for j in 0..d {
                            dgamma[j] += gy_row[j] * xh[j];
                            dbeta[j] += gy_row[j];
                            let dxh = gy_row[j] * g[j];
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xh[j];
                        }
                        mean_dxh /= dn;
                        mean_dxh_xh /= dn;
                        for j in 0..d {
                            let dxh = gy_row[j] * g[j];
                            dx[r * d + j] = rs * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                        }
                    }
                    acc(&mut grads, *x, gy.shape(), dx);
                    acc(&mut grads, *gamma, &[d], dgamma);
                    acc(&mut grads, *beta, &[d], dbeta);
                }
                Op::Gather { table, ids } => {
                    let tv = self.value(*table);
                    let h = tv.last_dim();
                    let mut dt = vec![T::zero(); tv.len()];
                    for (r, &i) in ids.iter().enumerate() {
                        for j in 0..h {
                            dt[i * h + j] += gy.data()[r * h + j];
                        }
                    }
                    acc(&mut grads, *table, tv.shape(), dt);
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let (l, h) = (qv.rows(), qv.last_dim());
                    let d = h / heads;
                    let scale = T::one() / T::lit(d as f64).sqrt();
                    let hs = h as isize;
                    let ls = l as isize;
                    let mut dq = vec![T::zero(); l * h];
                    let mut dk = vec![T::zero(); l * h];
                    let mut dv = vec![T::zero(); l * h];
                    let mut dp = vec![T::zero(); l * l];
                    for head in 0..*heads {
                        let off = head * d;
                        let p = &probs[head * l * l..(head + 1) * l * l];
                        let gctx = &gy.data()[off..];
                        // dP = dctx_h · v_hᵀ
                        T::gemm(l, d, l, T::one(), gctx, (hs, 1), &vv.data()[off..], (1, hs), T::zero(), &mut dp, (ls, 1));
                        // dv_h = Pᵀ · dctx_h
                        T::gemm(l, l, d, T::one(), p, (1, ls), gctx, (hs, 1), T::one(), &mut dv[off..], (hs, 1));
                        // dS = P ⊙ (dP − rowsum(P ⊙ dP))
                        for i in 0..l {
                            let pr = &p[i * l..(i + 1) * l];
                            let dr = &mut dp[i * l..(i + 1) * l];
                            let dot: T = pr.iter().zip(dr.iter()).map(|(&a, &b)| a * b).sum();
                            for (dj, &pj) in dr.iter_mut().zip(pr) {
                                *dj = pj * (*dj - dot);
                            }
                        }
                        T::gemm(l, l, d, scale, &dp, (ls, 1), &kv.data()[off..], (hs, 1), T::one(), &mut dq[off..], (hs, 1));
                        T::gemm(l, l, d, scale, &dp, (1, ls), &qv.data()[off..], (hs, 1), T::one(), &mut dk[off..], (hs, 1));
                    }
                    let shape = qv.shape().to_vec();
                    acc(&mut grads, *q, &shape, dq);
                    acc(&mut grads, *k, &shape, dk);
                    acc(&mut grads, *v, &shape, dv);
                }
                Op::Stack(parts) | Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pv = self.value(p);
                        let n = pv.len();
                        acc(&mut grads, p, pv.shape(), gy.data()[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::Conv { input, kernel, bias } => {
                    let (xv, kv) = (self.value(*input), self.value(*kernel));
                    let (c, l, h) = dims3(xv.shape());
                    let (f, w) = (kv.shape()[0], kv.shape()[2]);
                    let p = l - w + 1;
                    let wh = w * h;
                    let k_row = (c * wh) as isize;
                    let mut dk = vec![T::zero(); kv.len()];
                    let mut dx = vec![T::zero(); xv.len()];
                    let mut tmp = vec![T::zero(); wh * p];
                    for ci in 0..c {
                        let slab = &xv.data()[ci * l * h..(ci + 1) * l * h];
                        // dK_c = dY · windowsᵀ, windowsᵀ[p, r] = slab[p·H + r]
                        T::gemm(f, p, wh, T::one(), gy.data(), (p as isize, 1), slab, (h as isize, 1), T::one(), &mut dk[ci * wh..], (k_row, 1));
                        // dwindows = K_cᵀ · dY, scattered back onto overlapping rows
                        T::gemm(wh, f, p, T::one(), &kv.data()[ci * wh..], (1, k_row), gy.data(), (p as isize, 1), T::zero(), &mut tmp, (p as isize, 1));
                        let dslab = &mut dx[ci * l * h..(ci + 1) * l * h];
                        for r in 0..wh {
                            for pos in 0..p {
                                dslab[pos * h + r] += tmp[r * p + pos];
                            }
                        }
                    }
                    let db = gy.data().chunks(p).map(|row| row.iter().copied().sum()).collect();
                    acc(&mut grads, *input, xv.shape(), dx);
                    acc(&mut grads, *kernel, kv.shape(), dk);
                    acc(&mut grads, *bias, &[f], db);
                }
                Op::MaxLast { x, argmax } => {
                    let xv = self.value(*x);
                    let d = xv.last_dim();
                    let mut dx = vec![T::zero(); xv.len()];
                    for (r, &j) in argmax.iter().enumerate() {
                        dx[r * d + j] = gy.data()[r];
                    }
                    acc(&mut grads, *x, xv.shape(), dx);
                }
                Op::Row { x, index } => {
                    let xv = self.value(*x);
                    let d = xv.last_dim();
                    let mut dx = vec![T::zero(); xv.len()];
                    dx[index * d..(index + 1) * d].copy_from_slice(gy.data());
                    acc(&mut grads, *x, xv.shape(), dx);
                }
                Op::Slice { x, start } => {
                    let xv = self.value(*x);
                    let mut dx = vec![T::zero(); xv.len()];
                    dx[*start..*start + gy.len()].copy_from_slice(gy.data());
                    acc(&mut grads, *x, xv.shape(), dx);
                }
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    acc(&mut grads, *x, &shape, gy.data().to_vec());
                }
                Op::Sum(x) => {
                    let xv = self.value(*x);
                    acc(&mut grads, *x, xv.shape(), vec![gy.data()[0]; xv.len()]);
                }
                Op::BceWithLogits { logit, target } => {
                    let z = self.value(*logit).data()[0];
                    let dz = gy.data()[0] * (sigmoid(z) - *target);
                    acc(&mut grads, *logit, &[1], vec![dz]);
                }
            }
            // Interior gradients are no longer needed once propagated.
        }

        let n_params = self.store.map_or(0, ParamStore::len);
        let mut params = Gradients::new(n_params);
        for (&id, &v) in &self.param_vars {
            if let Some(g) = &grads[v.0] {
                params.accumulate(id, g);
            }
        }
        Backward { nodes: grads, params }
    }
}

/// Result of a reverse pass.
pub struct Backward<T> {
    nodes: Vec<Option<Tensor<T>>>,
    params: Gradients<T>,
}

impl<T: Scalar> Backward<T> {
    /// Gradient with respect to a leaf (constant or parameter) var.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].as_ref()
    }

    pub fn params(&self) -> &Gradients<T> {
        &self.params
    }

    pub fn into_params(self) -> Gradients<T> {
        self.params
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, shape: &[usize], g: Vec<T>) {
    match &mut grads[v.0] {
        Some(t) => {
            for (a, b) in t.data_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(Tensor::from_vec(shape, g)),
    }
}

fn dims3(shape: &[usize]) -> (usize, usize, usize) {
    assert_eq!(shape.len(), 3, "expected a rank-3 tensor, got {shape:?}");
    (shape[0], shape[1], shape[2])
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x / T::lit(std::f64::consts::SQRT_2)).gauss_erf())
}

fn normal_pdf<T: Scalar>(x: T) -> T {
    T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-(x * x) / T::lit(2.0)).exp()
}
