//! Reverse-mode tape over [`Tensor`] values.
//!
//! Ops compute their forward value eagerly when the node is created and
//! record enough state to replay the chain rule. `backward` walks the tape
//! in reverse and accumulates gradients per node. Shape mismatches are
//! programming errors and panic with both shapes; non-finite outputs poison
//! the graph with the name of the first offending op so the training loop
//! can abort with a usable diagnostic.

use super::tensor::Tensor;

pub type NodeId = usize;

enum Op {
    Leaf,
    /// a[n,k] * b[k,m]
    Matmul { a: NodeId, b: NodeId },
    /// a[n,k] * b[m,k]^T
    MatmulNt { a: NodeId, b: NodeId },
    /// x[n,k] * w[k,m] + row-broadcast bias[1,m]
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    /// Row-wise masked softmax; mask applies per column for every row.
    SoftmaxRows { x: NodeId, mask: Vec<bool> },
    /// Row-wise layer norm with per-row cached normalization state.
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    /// Inverted dropout; mask entries are 0.0 or 1/(1-p).
    Dropout { x: NodeId, mask: Vec<f64> },
    /// Horizontal concatenation of same-height parts.
    ConcatCols { parts: Vec<NodeId> },
    /// Vertical stack of parts sharing a column count.
    StackRows { parts: Vec<NodeId> },
    /// Single-row view of x.
    Row { x: NodeId, index: usize },
    /// Gather rows of a table by id.
    EmbedLookup { table: NodeId, ids: Vec<usize> },
    /// Sliding windows of `width` consecutive rows, flattened; a sequence
    /// shorter than the window yields one zero-padded window.
    Windows { x: NodeId, width: usize },
    /// Column-wise max over rows with cached argmax (first max wins).
    MaxOverRows { x: NodeId, argmax: Vec<usize> },
    Mean { x: NodeId },
    /// Binary cross entropy of probabilities p[n,1] against targets,
    /// averaged over rows, with p clamped to [CLAMP, 1-CLAMP].
    Bce { p: NodeId, targets: Vec<f64> },
    /// Zero out rows whose keep flag is false.
    MaskRows { x: NodeId, keep: Vec<bool> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Matmul { .. } => "matmul",
            Op::MatmulNt { .. } => "matmul_nt",
            Op::Affine { .. } => "affine",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::Relu { .. } => "relu",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Tanh { .. } => "tanh",
            Op::SoftmaxRows { .. } => "softmax_rows",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Dropout { .. } => "dropout",
            Op::ConcatCols { .. } => "concat_cols",
            Op::StackRows { .. } => "stack_rows",
            Op::Row { .. } => "row",
            Op::EmbedLookup { .. } => "embedding_lookup",
            Op::Windows { .. } => "windows",
            Op::MaxOverRows { .. } => "max_over_rows",
            Op::Mean { .. } => "mean",
            Op::Bce { .. } => "binary_cross_entropy",
            Op::MaskRows { .. } => "mask_rows",
        }
    }
}

/// Probability clamp for the cross-entropy loss.
pub const BCE_CLAMP: f64 = 1e-7;

const LAYER_NORM_EPS: f64 = 1e-5;

pub struct Graph {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    poisoned: Option<String>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            values: Vec::new(),
            ops: Vec::new(),
            poisoned: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id]
    }

    /// First op that produced a non-finite value, if any.
    pub fn poisoned(&self) -> Option<&str> {
        self.poisoned.as_deref()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        if self.poisoned.is_none() && !value.all_finite() {
            self.poisoned = Some(format!("{} (node {})", op.name(), self.values.len()));
        }
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (n, k) = self.values[a].shape();
        let (k2, m) = self.values[b].shape();
        assert_eq!(k, k2, "matmul shapes {}x{} and {}x{}", n, k, k2, m);
        let mut out = Tensor::zeros(n, m);
        {
            let av = self.values[a].data();
            let bv = self.values[b].data();
            let ov = out.data_mut();
            for i in 0..n {
                for kk in 0..k {
                    let aik = av[i * k + kk];
                    if aik == 0.0 {
                        continue;
                    }
                    let brow = &bv[kk * m..(kk + 1) * m];
                    let orow = &mut ov[i * m..(i + 1) * m];
                    for j in 0..m {
                        orow[j] += aik * brow[j];
                    }
                }
            }
        }
        self.push(out, Op::Matmul { a, b })
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (n, k) = self.values[a].shape();
        let (m, k2) = self.values[b].shape();
        assert_eq!(k, k2, "matmul_nt shapes {}x{} and {}x{}", n, k, m, k2);
        let mut out = Tensor::zeros(n, m);
        {
            let av = self.values[a].data();
            let bv = self.values[b].data();
            let ov = out.data_mut();
            for i in 0..n {
                let arow = &av[i * k..(i + 1) * k];
                for j in 0..m {
                    let brow = &bv[j * k..(j + 1) * k];
                    let mut acc = 0.0;
                    for kk in 0..k {
                        acc += arow[kk] * brow[kk];
                    }
                    ov[i * m + j] = acc;
                }
            }
        }
        self.push(out, Op::MatmulNt { a, b })
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let (n, k) = self.values[x].shape();
        let (k2, m) = self.values[w].shape();
        let bs = self.values[b].shape();
        assert_eq!(k, k2, "affine shapes {}x{} and {}x{}", n, k, k2, m);
        assert_eq!(bs, (1, m), "affine bias shape {}x{}, want 1x{}", bs.0, bs.1, m);
        let mut out = Tensor::zeros(n, m);
        {
            let xv = self.values[x].data();
            let wv = self.values[w].data();
            let bv = self.values[b].data();
            let ov = out.data_mut();
            for i in 0..n {
                let orow = &mut ov[i * m..(i + 1) * m];
                orow.copy_from_slice(bv);
                for kk in 0..k {
                    let xik = xv[i * k + kk];
                    if xik == 0.0 {
                        continue;
                    }
                    let wrow = &wv[kk * m..(kk + 1) * m];
                    for j in 0..m {
                        orow[j] += xik * wrow[j];
                    }
                }
            }
        }
        self.push(out, Op::Affine { x, w, b })
    }

    fn zip_elementwise(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        let sa = self.values[a].shape();
        let sb = self.values[b].shape();
        assert_eq!(
            sa, sb,
            "{} shapes {}x{} and {}x{}",
            op.name(),
            sa.0,
            sa.1,
            sb.0,
            sb.1
        );
        let data = self.values[a]
            .data()
            .iter()
            .zip(self.values[b].data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(Tensor::from_vec(sa.0, sa.1, data), op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elementwise(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elementwise(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elementwise(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let (n, m) = self.values[x].shape();
        let data = self.values[x].data().iter().map(|&v| v * c).collect();
        self.push(Tensor::from_vec(n, m, data), Op::Scale { x, c })
    }

    fn map_elementwise(&mut self, x: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let (n, m) = self.values[x].shape();
        let data = self.values[x].data().iter().map(|&v| f(v)).collect();
        self.push(Tensor::from_vec(n, m, data), op)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.map_elementwise(x, |v| v.max(0.0), Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.map_elementwise(x, sigmoid_scalar, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.map_elementwise(x, f64::tanh, Op::Tanh { x })
    }

    /// Masked row-wise softmax: masked columns get exactly 0, unmasked
    /// entries of each row sum to 1. Row max is subtracted for stability.
    pub fn softmax_rows(&mut self, x: NodeId, mask: &[bool]) -> NodeId {
        let (n, m) = self.values[x].shape();
        assert_eq!(mask.len(), m, "softmax mask length {} for {} columns", mask.len(), m);
        assert!(
            mask.iter().any(|&k| k),
            "softmax over a fully masked sequence"
        );
        let mut out = Tensor::zeros(n, m);
        {
            let xv = self.values[x].data();
            let ov = out.data_mut();
            for i in 0..n {
                let row = &xv[i * m..(i + 1) * m];
                let mut max = f64::NEG_INFINITY;
                for j in 0..m {
                    if mask[j] && row[j] > max {
                        max = row[j];
                    }
                }
                let mut sum = 0.0;
                let orow = &mut ov[i * m..(i + 1) * m];
                for j in 0..m {
                    if mask[j] {
                        let e = (row[j] - max).exp();
                        orow[j] = e;
                        sum += e;
                    }
                }
                for j in 0..m {
                    if mask[j] {
                        orow[j] /= sum;
                    }
                }
            }
        }
        self.push(
            out,
            Op::SoftmaxRows {
                x,
                mask: mask.to_vec(),
            },
        )
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let (n, m) = self.values[x].shape();
        assert_eq!(self.values[gain].shape(), (1, m), "layer_norm gain shape");
        assert_eq!(self.values[bias].shape(), (1, m), "layer_norm bias shape");
        let mut out = Tensor::zeros(n, m);
        let mut xhat = vec![0.0; n * m];
        let mut inv_std = vec![0.0; n];
        {
            let xv = self.values[x].data();
            let gv = self.values[gain].data();
            let bv = self.values[bias].data();
            let ov = out.data_mut();
            for i in 0..n {
                let row = &xv[i * m..(i + 1) * m];
                let mean = row.iter().sum::<f64>() / m as f64;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
                let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                inv_std[i] = inv;
                for j in 0..m {
                    let xh = (row[j] - mean) * inv;
                    xhat[i * m + j] = xh;
                    ov[i * m + j] = xh * gv[j] + bv[j];
                }
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    /// Inverted dropout. Identity (returns `x` unchanged) when not training
    /// or when p is zero.
    pub fn dropout(&mut self, x: NodeId, p: f64, training: bool, rng: &mut impl rand::Rng) -> NodeId {
        assert!((0.0..1.0).contains(&p), "dropout rate {} outside [0,1)", p);
        if !training || p == 0.0 {
            return x;
        }
        let (n, m) = self.values[x].shape();
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..n * m)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = self.values[x]
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &k)| v * k)
            .collect();
        self.push(Tensor::from_vec(n, m, data), Op::Dropout { x, mask })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of zero parts");
        let n = self.values[parts[0]].rows();
        let total: usize = parts
            .iter()
            .map(|&p| {
                assert_eq!(
                    self.values[p].rows(),
                    n,
                    "concat_cols row mismatch: {} vs {}",
                    self.values[p].rows(),
                    n
                );
                self.values[p].cols()
            })
            .sum();
        let mut out = Tensor::zeros(n, total);
        {
            let mut offset = 0;
            for &p in parts {
                let part = &self.values[p];
                let m = part.cols();
                for i in 0..n {
                    out.data_mut()[i * total + offset..i * total + offset + m]
                        .copy_from_slice(part.row(i));
                }
                offset += m;
            }
        }
        self.push(
            out,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        )
    }

    pub fn stack_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "stack of zero parts");
        let m = self.values[parts[0]].cols();
        let total: usize = parts
            .iter()
            .map(|&p| {
                assert_eq!(
                    self.values[p].cols(),
                    m,
                    "stack_rows col mismatch: {} vs {}",
                    self.values[p].cols(),
                    m
                );
                self.values[p].rows()
            })
            .sum();
        let mut data = Vec::with_capacity(total * m);
        for &p in parts {
            data.extend_from_slice(self.values[p].data());
        }
        self.push(
            Tensor::from_vec(total, m, data),
            Op::StackRows {
                parts: parts.to_vec(),
            },
        )
    }

    pub fn row(&mut self, x: NodeId, index: usize) -> NodeId {
        let (n, _) = self.values[x].shape();
        assert!(index < n, "row {} of a {}-row tensor", index, n);
        let data = self.values[x].row(index).to_vec();
        self.push(Tensor::row_vector(data), Op::Row { x, index })
    }

    pub fn embedding_lookup(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let (v, d) = self.values[table].shape();
        assert!(!ids.is_empty(), "embedding lookup with no ids");
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < v, "embedding id {} out of table range {}", id, v);
            data.extend_from_slice(self.values[table].row(id));
        }
        self.push(
            Tensor::from_vec(ids.len(), d, data),
            Op::EmbedLookup {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    /// Sliding windows of `width` consecutive rows, each flattened to one
    /// output row. A sequence shorter than the window produces exactly one
    /// window padded with zero rows at the tail.
    pub fn windows(&mut self, x: NodeId, width: usize) -> NodeId {
        assert!(width >= 1, "window width must be at least 1");
        let (n, m) = self.values[x].shape();
        let out_rows = n.saturating_sub(width - 1).max(1);
        let mut out = Tensor::zeros(out_rows, width * m);
        {
            let xv = self.values[x].data();
            let ov = out.data_mut();
            for i in 0..out_rows {
                for w in 0..width {
                    let src = i + w;
                    if src < n {
                        ov[i * width * m + w * m..i * width * m + (w + 1) * m]
                            .copy_from_slice(&xv[src * m..(src + 1) * m]);
                    }
                }
            }
        }
        self.push(out, Op::Windows { x, width })
    }

    /// Column-wise max over all rows; ties resolve to the first row.
    pub fn max_over_rows(&mut self, x: NodeId) -> NodeId {
        let (n, m) = self.values[x].shape();
        assert!(n >= 1, "max over zero rows");
        let mut out = Tensor::zeros(1, m);
        let mut argmax = vec![0usize; m];
        {
            let xv = self.values[x].data();
            let ov = out.data_mut();
            for j in 0..m {
                let mut best = xv[j];
                let mut best_i = 0;
                for i in 1..n {
                    let v = xv[i * m + j];
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                ov[j] = best;
                argmax[j] = best_i;
            }
        }
        self.push(out, Op::MaxOverRows { x, argmax })
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let len = self.values[x].len() as f64;
        let v = self.values[x].data().iter().sum::<f64>() / len;
        self.push(Tensor::scalar(v), Op::Mean { x })
    }

    /// Batch-averaged binary cross entropy of probabilities against 0/1
    /// targets with clamping to [BCE_CLAMP, 1-BCE_CLAMP].
    pub fn binary_cross_entropy(&mut self, p: NodeId, targets: &[f64]) -> NodeId {
        let (n, m) = self.values[p].shape();
        assert_eq!(m, 1, "bce expects a column of probabilities, got {}x{}", n, m);
        assert_eq!(targets.len(), n, "bce targets length {} for {} rows", targets.len(), n);
        for &t in targets {
            assert!(t == 0.0 || t == 1.0, "bce target {} outside {{0,1}}", t);
        }
        let mut acc = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let pc = self.values[p].data()[i].clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            acc -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        }
        let v = acc / n as f64;
        self.push(
            Tensor::scalar(v),
            Op::Bce {
                p,
                targets: targets.to_vec(),
            },
        )
    }

    /// Zero rows whose keep flag is false.
    pub fn mask_rows(&mut self, x: NodeId, keep: &[bool]) -> NodeId {
        let (n, m) = self.values[x].shape();
        assert_eq!(keep.len(), n, "mask_rows keep length {} for {} rows", keep.len(), n);
        let mut out = self.values[x].clone();
        for i in 0..n {
            if !keep[i] {
                out.data_mut()[i * m..(i + 1) * m].fill(0.0);
            }
        }
        self.push(
            out,
            Op::MaskRows {
                x,
                keep: keep.to_vec(),
            },
        )
    }

    /// Run reverse-mode accumulation from a scalar output node. Returns one
    /// gradient slot per node (None for nodes the output does not depend on).
    pub fn backward(&mut self, output: NodeId) -> Gradients {
        assert_eq!(
            self.values[output].shape(),
            (1, 1),
            "backward from a non-scalar node"
        );
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.values.len()];
        grads[output] = Some(vec![1.0]);
        for id in (0..=output).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.accumulate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    fn grad_slot<'a>(
        grads: &'a mut [Option<Vec<f64>>],
        values: &[Tensor],
        id: NodeId,
    ) -> &'a mut Vec<f64> {
        grads[id].get_or_insert_with(|| vec![0.0; values[id].len()])
    }

    #[allow(clippy::needless_range_loop)]
    fn accumulate(&self, id: NodeId, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let values = &self.values;
        match &self.ops[id] {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (n, k) = values[*a].shape();
                let m = values[*b].cols();
                {
                    let bv = values[*b].data();
                    let da = Self::grad_slot(grads, values, *a);
                    for i in 0..n {
                        for kk in 0..k {
                            let grow = &g[i * m..(i + 1) * m];
                            let brow = &bv[kk * m..(kk + 1) * m];
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += grow[j] * brow[j];
                            }
                            da[i * k + kk] += acc;
                        }
                    }
                }
                {
                    let av = values[*a].data();
                    let db = Self::grad_slot(grads, values, *b);
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for kk in 0..k {
                            let aik = av[i * k + kk];
                            if aik == 0.0 {
                                continue;
                            }
                            let drow = &mut db[kk * m..(kk + 1) * m];
                            for j in 0..m {
                                drow[j] += aik * grow[j];
                            }
                        }
                    }
                }
            }
            Op::MatmulNt { a, b } => {
                let (n, k) = values[*a].shape();
                let m = values[*b].rows();
                {
                    let bv = values[*b].data();
                    let da = Self::grad_slot(grads, values, *a);
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for j in 0..m {
                            let gij = grow[j];
                            if gij == 0.0 {
                                continue;
                            }
                            let brow = &bv[j * k..(j + 1) * k];
                            let darow = &mut da[i * k..(i + 1) * k];
                            for kk in 0..k {
                                darow[kk] += gij * brow[kk];
                            }
                        }
                    }
                }
                {
                    let av = values[*a].data();
                    let db = Self::grad_slot(grads, values, *b);
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        let arow = &av[i * k..(i + 1) * k];
                        for j in 0..m {
                            let gij = grow[j];
                            if gij == 0.0 {
                                continue;
                            }
                            let dbrow = &mut db[j * k..(j + 1) * k];
                            for kk in 0..k {
                                dbrow[kk] += gij * arow[kk];
                            }
                        }
                    }
                }
            }
            Op::Affine { x, w, b } => {
                let (n, k) = values[*x].shape();
                let m = values[*w].cols();
                {
                    let wv = values[*w].data();
                    let dx = Self::grad_slot(grads, values, *x);
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for kk in 0..k {
                            let wrow = &wv[kk * m..(kk + 1) * m];
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += grow[j] * wrow[j];
                            }
                            dx[i * k + kk] += acc;
                        }
                    }
                }
                {
                    let xv = values[*x].data();
                    let dw = Self::grad_slot(grads, values, *w);
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for kk in 0..k {
                            let xik = xv[i * k + kk];
                            if xik == 0.0 {
                                continue;
                            }
                            let drow = &mut dw[kk * m..(kk + 1) * m];
                            for j in 0..m {
                                drow[j] += xik * grow[j];
                            }
                        }
                    }
                }
                {
                    let db = Self::grad_slot(grads, values, *b);
                    for i in 0..n {
                        for j in 0..m {
                            db[j] += g[i * m + j];
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                let da = Self::grad_slot(grads, values, *a);
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d += gv;
                }
                let db = Self::grad_slot(grads, values, *b);
                for (d, &gv) in db.iter_mut().zip(g) {
                    *d += gv;
                }
            }
            Op::Sub { a, b } => {
                let da = Self::grad_slot(grads, values, *a);
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d += gv;
                }
                let db = Self::grad_slot(grads, values, *b);
                for (d, &gv) in db.iter_mut().zip(g) {
                    *d -= gv;
                }
            }
            Op::Mul { a, b } => {
                {
                    let bv = values[*b].data().to_vec();
                    let da = Self::grad_slot(grads, values, *a);
                    for i in 0..g.len() {
                        da[i] += g[i] * bv[i];
                    }
                }
                {
                    let av = values[*a].data().to_vec();
                    let db = Self::grad_slot(grads, values, *b);
                    for i in 0..g.len() {
                        db[i] += g[i] * av[i];
                    }
                }
            }
            Op::Scale { x, c } => {
                let dx = Self::grad_slot(grads, values, *x);
                for (d, &gv) in dx.iter_mut().zip(g) {
                    *d += gv * c;
                }
            }
            Op::Relu { x } => {
                let out = values[id].data();
                let dx = Self::grad_slot(grads, values, *x);
                for i in 0..g.len() {
                    if out[i] > 0.0 {
                        dx[i] += g[i];
                    }
                }
            }
            Op::Sigmoid { x } => {
                let out = values[id].data();
                let dx = Self::grad_slot(grads, values, *x);
                for i in 0..g.len() {
                    dx[i] += g[i] * out[i] * (1.0 - out[i]);
                }
            }
            Op::Tanh { x } => {
                let out = values[id].data();
                let dx = Self::grad_slot(grads, values, *x);
                for i in 0..g.len() {
                    dx[i] += g[i] * (1.0 - out[i] * out[i]);
                }
            }
            Op::SoftmaxRows { x, mask } => {
                let (n, m) = values[id].shape();
                let s = values[id].data();
                let dx = Self::grad_slot(grads, values, *x);
                for i in 0..n {
                    let srow = &s[i * m..(i + 1) * m];
                    let grow = &g[i * m..(i + 1) * m];
                    let mut dot = 0.0;
                    for j in 0..m {
                        if mask[j] {
                            dot += grow[j] * srow[j];
                        }
                    }
                    for j in 0..m {
                        if mask[j] {
                            dx[i * m + j] += srow[j] * (grow[j] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (n, m) = values[id].shape();
                let gv = values[*gain].data().to_vec();
                {
                    let dx = Self::grad_slot(grads, values, *x);
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        let xrow = &xhat[i * m..(i + 1) * m];
                        let mut mean_gg = 0.0;
                        let mut mean_ggx = 0.0;
                        for j in 0..m {
                            let gg = grow[j] * gv[j];
                            mean_gg += gg;
                            mean_ggx += gg * xrow[j];
                        }
                        mean_gg /= m as f64;
                        mean_ggx /= m as f64;
                        for j in 0..m {
                            let gg = grow[j] * gv[j];
                            dx[i * m + j] += inv_std[i] * (gg - mean_gg - xrow[j] * mean_ggx);
                        }
                    }
                }
                {
                    let dgain = Self::grad_slot(grads, values, *gain);
                    for i in 0..n {
                        for j in 0..m {
                            dgain[j] += g[i * m + j] * xhat[i * m + j];
                        }
                    }
                }
                {
                    let dbias = Self::grad_slot(grads, values, *bias);
                    for i in 0..n {
                        for j in 0..m {
                            dbias[j] += g[i * m + j];
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                let dx = Self::grad_slot(grads, values, *x);
                for i in 0..g.len() {
                    dx[i] += g[i] * mask[i];
                }
            }
            Op::ConcatCols { parts } => {
                let n = values[id].rows();
                let total = values[id].cols();
                let mut offset = 0;
                for &p in parts {
                    let m = values[p].cols();
                    let dp = Self::grad_slot(grads, values, p);
                    for i in 0..n {
                        for j in 0..m {
                            dp[i * m + j] += g[i * total + offset + j];
                        }
                    }
                    offset += m;
                }
            }
            Op::StackRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = values[p].len();
                    let dp = Self::grad_slot(grads, values, p);
                    for i in 0..len {
                        dp[i] += g[offset + i];
                    }
                    offset += len;
                }
            }
            Op::Row { x, index } => {
                let m = values[id].cols();
                let dx = Self::grad_slot(grads, values, *x);
                for j in 0..m {
                    dx[index * m + j] += g[j];
                }
            }
            Op::EmbedLookup { table, ids } => {
                let d = values[id].cols();
                let dt = Self::grad_slot(grads, values, *table);
                for (r, &tid) in ids.iter().enumerate() {
                    for j in 0..d {
                        dt[tid * d + j] += g[r * d + j];
                    }
                }
            }
            Op::Windows { x, width } => {
                let (n, m) = values[*x].shape();
                let out_rows = values[id].rows();
                let dx = Self::grad_slot(grads, values, *x);
                for i in 0..out_rows {
                    for w in 0..*width {
                        let src = i + w;
                        if src < n {
                            for j in 0..m {
                                dx[src * m + j] += g[i * width * m + w * m + j];
                            }
                        }
                    }
                }
            }
            Op::MaxOverRows { x, argmax } => {
                let m = values[id].cols();
                let dx = Self::grad_slot(grads, values, *x);
                for j in 0..m {
                    dx[argmax[j] * m + j] += g[j];
                }
            }
            Op::Mean { x } => {
                let len = values[*x].len();
                let dx = Self::grad_slot(grads, values, *x);
                let gv = g[0] / len as f64;
                for d in dx.iter_mut() {
                    *d += gv;
                }
            }
            Op::Bce { p, targets } => {
                let n = targets.len();
                let pv = values[*p].data().to_vec();
                let dp = Self::grad_slot(grads, values, *p);
                let gv = g[0] / n as f64;
                for i in 0..n {
                    let raw = pv[i];
                    if raw <= BCE_CLAMP || raw >= 1.0 - BCE_CLAMP {
                        continue;
                    }
                    let t = targets[i];
                    dp[i] += gv * (-t / raw + (1.0 - t) / (1.0 - raw));
                }
            }
            Op::MaskRows { x, keep } => {
                let m = values[id].cols();
                let dx = Self::grad_slot(grads, values, *x);
                for (i, &k) in keep.iter().enumerate() {
                    if k {
                        for j in 0..m {
                            dx[i * m + j] += g[i * m + j];
                        }
                    }
                }
            }
        }
    }
}

/// Per-node gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the backward output w.r.t. node `id`; zeros if the
    /// output does not depend on it.
    pub fn of(&self, id: NodeId, graph: &Graph) -> Vec<f64> {
        self.grads[id]
            .clone()
            .unwrap_or_else(|| vec![0.0; graph.value(id).len()])
    }
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }

    #[test]
    fn softmax_uniform_on_zeros() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row_vector(vec![0.0, 0.0, 0.0]));
        let s = g.softmax_rows(x, &[true, true, true]);
        for &v in g.value(s).data() {
            assert_close(v, 1.0 / 3.0, 1e-12);
        }
    }

    #[test]
    fn softmax_mask_zeroes_and_normalizes() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(2, 3, vec![5.0, 1.0, 2.0, -1.0, 0.0, 3.0]));
        let s = g.softmax_rows(x, &[true, false, true]);
        let out = g.value(s);
        for i in 0..2 {
            assert_eq!(out.at(i, 1), 0.0);
            assert_close(out.at(i, 0) + out.at(i, 2), 1.0, 1e-9);
        }
    }

    #[test]
    #[should_panic(expected = "fully masked")]
    fn softmax_all_masked_panics() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row_vector(vec![1.0, 2.0]));
        g.softmax_rows(x, &[false, false]);
    }

    #[test]
    fn relu_definition() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row_vector(vec![-2.0, 3.0]));
        let y = g.relu(x);
        assert_eq!(g.value(y).data(), &[0.0, 3.0]);
    }

    #[test]
    fn affine_identity_case() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(2, 2, vec![1.5, -0.5, 2.0, 4.0]));
        let w = g.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let b = g.leaf(Tensor::row_vector(vec![0.0, 0.0]));
        let y = g.affine(x, w, b);
        assert_eq!(g.value(y).data(), g.value(x).data());
    }

    #[test]
    #[should_panic(expected = "affine shapes")]
    fn affine_shape_mismatch_panics() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(2, 3));
        let w = g.leaf(Tensor::zeros(2, 2));
        let b = g.leaf(Tensor::zeros(1, 2));
        g.affine(x, w, b);
    }

    #[test]
    fn dropout_eval_is_bitwise_identity() {
        let mut g = Graph::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = g.leaf(Tensor::row_vector(vec![0.3, -1.7, 2.2]));
        let y = g.dropout(x, 0.5, false, &mut rng);
        assert_eq!(x, y);
        let z = g.dropout(x, 0.0, true, &mut rng);
        assert_eq!(x, z);
    }

    #[test]
    fn dropout_training_scales_kept_entries() {
        let mut g = Graph::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = g.leaf(Tensor::row_vector(vec![1.0; 1000]));
        let y = g.dropout(x, 0.25, true, &mut rng);
        let kept: Vec<f64> = g.value(y).data().iter().copied().filter(|&v| v != 0.0).collect();
        for &v in &kept {
            assert_close(v, 1.0 / 0.75, 1e-12);
        }
        let frac = kept.len() as f64 / 1000.0;
        assert!((frac - 0.75).abs() < 0.06, "kept fraction {}", frac);
    }

    #[test]
    fn windows_shorter_than_width_pads_tail() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let w = g.windows(x, 3);
        assert_eq!(g.value(w).shape(), (1, 6));
        assert_eq!(g.value(w).data(), &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn max_over_rows_first_tie_wins_and_routes_grad() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(2, 2, vec![5.0, 1.0, 5.0, 2.0]));
        let m = g.max_over_rows(x);
        let s = g.mean(m);
        let grads = g.backward(s);
        let dx = grads.of(x, &g);
        assert_eq!(g.value(m).data(), &[5.0, 2.0]);
        assert_eq!(dx, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn bce_half_is_ln2() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::from_vec(1, 1, vec![0.5]));
        let l0 = g.binary_cross_entropy(p, &[0.0]);
        let l1 = g.binary_cross_entropy(p, &[1.0]);
        assert_close(g.value(l0).item(), std::f64::consts::LN_2, 1e-12);
        assert_close(g.value(l1).item(), std::f64::consts::LN_2, 1e-12);
    }

    #[test]
    fn bce_fixed_batch_value() {
        // -(ln 0.9 + ln 0.8)/2
        let mut g = Graph::new();
        let p = g.leaf(Tensor::from_vec(2, 1, vec![0.9, 0.2]));
        let l = g.binary_cross_entropy(p, &[1.0, 0.0]);
        assert_close(g.value(l).item(), 0.164252033486018, 1e-12);
    }

    #[test]
    #[should_panic(expected = "outside {0,1}")]
    fn bce_bad_target_panics() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::from_vec(1, 1, vec![0.5]));
        g.binary_cross_entropy(p, &[0.5]);
    }

    #[test]
    fn poisoning_names_first_bad_op() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row_vector(vec![1e308]));
        let y = g.scale(x, 10.0);
        let _ = y;
        assert!(g.poisoned().unwrap().starts_with("scale"));
    }

    #[test]
    fn matmul_known_product() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = g.leaf(Tensor::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]));
        let c = g.matmul(a, b);
        assert_eq!(g.value(c).data(), &[19.0, 22.0, 43.0, 50.0]);
        let d = g.matmul_nt(a, b);
        assert_eq!(g.value(d).data(), &[17.0, 23.0, 39.0, 53.0]);
    }
}
