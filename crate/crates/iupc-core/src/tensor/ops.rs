//! Differentiable operations over [`Tensor`].
//!
//! Each op computes its forward value eagerly and registers a closure that
//! maps the output gradient back onto the inputs. Saved values needed by a
//! rule (a softmax output, an input snapshot) are captured by clone; graphs
//! here are per-batch and desk-scale, so clarity wins over buffer reuse.

use super::{Result, Tensor, TensorError};

fn matrix_dims(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    let shape = t.shape();
    if shape.len() != 2 {
        return Err(TensorError::NotAMatrix { op, shape });
    }
    Ok((shape[0], shape[1]))
}

fn raw_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += aip * brow[j];
            }
        }
    }
    out
}

fn raw_transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

/// How a binary elementwise op lines its operands up.
enum Pairing {
    Equal,
    ScalarLeft,
    ScalarRight,
}

fn pairing(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Pairing> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa == sb {
        Ok(Pairing::Equal)
    } else if a.numel() == 1 {
        Ok(Pairing::ScalarLeft)
    } else if b.numel() == 1 {
        Ok(Pairing::ScalarRight)
    } else {
        Err(TensorError::ShapeMismatch {
            op,
            lhs: sa,
            rhs: sb,
        })
    }
}

impl Tensor {
    /// Matrix product `[m×k] × [k×n] -> [m×n]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k) = matrix_dims(self, "matmul")?;
        let (k2, n) = matrix_dims(rhs, "matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let a = self.data();
        let b = rhs.data();
        let out = raw_matmul(&a, &b, m, k, n);
        Ok(Tensor::from_op(
            vec![m, n],
            out,
            vec![self.clone(), rhs.clone()],
            Box::new(move |g, inputs| {
                // dA = G·Bᵀ, dB = Aᵀ·G
                let bt = raw_transpose(&b, k, n);
                inputs[0].accumulate_grad(&raw_matmul(g, &bt, m, n, k));
                let at = raw_transpose(&a, m, k);
                inputs[1].accumulate_grad(&raw_matmul(&at, g, k, m, n));
            }),
        ))
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = matrix_dims(self, "transpose")?;
        let out = raw_transpose(&self.data(), m, n);
        Ok(Tensor::from_op(
            vec![n, m],
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                inputs[0].accumulate_grad(&raw_transpose(g, n, m));
            }),
        ))
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        let a = self.data();
        let b = rhs.data();
        match pairing("add", self, rhs)? {
            Pairing::Equal => {
                let out = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                Ok(Tensor::from_op(
                    self.shape(),
                    out,
                    vec![self.clone(), rhs.clone()],
                    Box::new(|g, inputs| {
                        inputs[0].accumulate_grad(g);
                        inputs[1].accumulate_grad(g);
                    }),
                ))
            }
            Pairing::ScalarLeft => {
                let out = b.iter().map(|y| a[0] + y).collect();
                Ok(Tensor::from_op(
                    rhs.shape(),
                    out,
                    vec![self.clone(), rhs.clone()],
                    Box::new(|g, inputs| {
                        inputs[0].accumulate_grad(&[g.iter().sum()]);
                        inputs[1].accumulate_grad(g);
                    }),
                ))
            }
            Pairing::ScalarRight => {
                let out = a.iter().map(|x| x + b[0]).collect();
                Ok(Tensor::from_op(
                    self.shape(),
                    out,
                    vec![self.clone(), rhs.clone()],
                    Box::new(|g, inputs| {
                        inputs[0].accumulate_grad(g);
                        inputs[1].accumulate_grad(&[g.iter().sum()]);
                    }),
                ))
            }
        }
    }

    /// Equal-shape subtraction.
    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape() != rhs.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let out = self
            .data()
            .iter()
            .zip(&rhs.data())
            .map(|(x, y)| x - y)
            .collect();
        Ok(Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone(), rhs.clone()],
            Box::new(|g, inputs| {
                inputs[0].accumulate_grad(g);
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                inputs[1].accumulate_grad(&neg);
            }),
        ))
    }

    /// Elementwise product (equal shapes, or scalar with tensor).
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        let a = self.data();
        let b = rhs.data();
        match pairing("mul", self, rhs)? {
            Pairing::Equal => {
                let out = a.iter().zip(&b).map(|(x, y)| x * y).collect();
                Ok(Tensor::from_op(
                    self.shape(),
                    out,
                    vec![self.clone(), rhs.clone()],
                    Box::new(move |g, inputs| {
                        let da: Vec<f64> = g.iter().zip(&b).map(|(gi, y)| gi * y).collect();
                        inputs[0].accumulate_grad(&da);
                        let db: Vec<f64> = g.iter().zip(&a).map(|(gi, x)| gi * x).collect();
                        inputs[1].accumulate_grad(&db);
                    }),
                ))
            }
            Pairing::ScalarLeft => {
                let out = b.iter().map(|y| a[0] * y).collect();
                Ok(Tensor::from_op(
                    rhs.shape(),
                    out,
                    vec![self.clone(), rhs.clone()],
                    Box::new(move |g, inputs| {
                        let da: f64 = g.iter().zip(&b).map(|(gi, y)| gi * y).sum();
                        inputs[0].accumulate_grad(&[da]);
                        let db: Vec<f64> = g.iter().map(|gi| gi * a[0]).collect();
                        inputs[1].accumulate_grad(&db);
                    }),
                ))
            }
            Pairing::ScalarRight => {
                let out = a.iter().map(|x| x * b[0]).collect();
                Ok(Tensor::from_op(
                    self.shape(),
                    out,
                    vec![self.clone(), rhs.clone()],
                    Box::new(move |g, inputs| {
                        let da: Vec<f64> = g.iter().map(|gi| gi * b[0]).collect();
                        inputs[0].accumulate_grad(&da);
                        let db: f64 = g.iter().zip(&a).map(|(gi, x)| gi * x).sum();
                        inputs[1].accumulate_grad(&[db]);
                    }),
                ))
            }
        }
    }

    /// Multiply by a compile-time constant.
    pub fn scale(&self, c: f64) -> Tensor {
        let out = self.data().iter().map(|x| x * c).collect();
        Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let dx: Vec<f64> = g.iter().map(|gi| gi * c).collect();
                inputs[0].accumulate_grad(&dx);
            }),
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|&x| sigmoid_scalar(x)).collect();
        let saved = out.clone();
        Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let dx: Vec<f64> = g
                    .iter()
                    .zip(&saved)
                    .map(|(gi, s)| gi * s * (1.0 - s))
                    .collect();
                inputs[0].accumulate_grad(&dx);
            }),
        )
    }

    pub fn tanh(&self) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x.tanh()).collect();
        let saved = out.clone();
        Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let dx: Vec<f64> = g.iter().zip(&saved).map(|(gi, t)| gi * (1.0 - t * t)).collect();
                inputs[0].accumulate_grad(&dx);
            }),
        )
    }

    pub fn relu(&self) -> Tensor {
        let x = self.data();
        let out: Vec<f64> = x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let dx: Vec<f64> = g
                    .iter()
                    .zip(&x)
                    .map(|(gi, &v)| if v > 0.0 { *gi } else { 0.0 })
                    .collect();
                inputs[0].accumulate_grad(&dx);
            }),
        )
    }

    /// GELU, tanh approximation: `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
    pub fn gelu(&self) -> Tensor {
        let x = self.data();
        let out: Vec<f64> = x.iter().map(|&v| gelu_scalar(v)).collect();
        Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let dx: Vec<f64> = g
                    .iter()
                    .zip(&x)
                    .map(|(gi, &v)| gi * gelu_derivative(v))
                    .collect();
                inputs[0].accumulate_grad(&dx);
            }),
        )
    }

    /// Numerically stable softmax along `axis` (max-subtracted).
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "softmax",
                axis,
                shape,
            });
        }
        let x = self.data();
        let (outer, dim, inner) = lane_layout(&shape, axis);
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |d: usize| (o * dim + d) * inner + i;
                let mut max = f64::NEG_INFINITY;
                for d in 0..dim {
                    max = max.max(x[idx(d)]);
                }
                let mut sum = 0.0;
                for d in 0..dim {
                    let e = (x[idx(d)] - max).exp();
                    out[idx(d)] = e;
                    sum += e;
                }
                for d in 0..dim {
                    out[idx(d)] /= sum;
                }
            }
        }
        let saved = out.clone();
        Ok(Tensor::from_op(
            shape,
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                // dx = s ⊙ (g − ⟨g, s⟩) per lane
                let mut dx = vec![0.0; g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |d: usize| (o * dim + d) * inner + i;
                        let mut dot = 0.0;
                        for d in 0..dim {
                            dot += g[idx(d)] * saved[idx(d)];
                        }
                        for d in 0..dim {
                            dx[idx(d)] = saved[idx(d)] * (g[idx(d)] - dot);
                        }
                    }
                }
                inputs[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Normalize the last axis to zero mean / unit variance, then apply the
    /// per-feature affine `gain`/`bias` (both of shape `[h]`).
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
        let shape = self.shape();
        let h = *shape.last().unwrap();
        if gain.shape() != [h] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm gain",
                lhs: shape,
                rhs: gain.shape(),
            });
        }
        if bias.shape() != [h] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm bias",
                lhs: shape,
                rhs: bias.shape(),
            });
        }
        if h == 1 && eps == 0.0 {
            return Err(TensorError::DegenerateNorm);
        }
        let x = self.data();
        let gn = gain.data();
        let bn = bias.data();
        let rows = x.len() / h;
        let mut out = vec![0.0; x.len()];
        let mut normed = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &x[r * h..(r + 1) * h];
            let mean = row.iter().sum::<f64>() / h as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for c in 0..h {
                let nh = (row[c] - mean) * inv;
                normed[r * h + c] = nh;
                out[r * h + c] = nh * gn[c] + bn[c];
            }
        }
        Ok(Tensor::from_op(
            self.shape(),
            out,
            vec![self.clone(), gain.clone(), bias.clone()],
            Box::new(move |g, inputs| {
                let mut dgain = vec![0.0; h];
                let mut dbias = vec![0.0; h];
                let mut dx = vec![0.0; g.len()];
                for r in 0..rows {
                    let gr = &g[r * h..(r + 1) * h];
                    let nr = &normed[r * h..(r + 1) * h];
                    let mut mean_dxh = 0.0;
                    let mut mean_dxh_nh = 0.0;
                    for c in 0..h {
                        dgain[c] += gr[c] * nr[c];
                        dbias[c] += gr[c];
                        let dxh = gr[c] * gn[c];
                        mean_dxh += dxh;
                        mean_dxh_nh += dxh * nr[c];
                    }
                    mean_dxh /= h as f64;
                    mean_dxh_nh /= h as f64;
                    for c in 0..h {
                        let dxh = gr[c] * gn[c];
                        dx[r * h + c] = inv_std[r] * (dxh - mean_dxh - nr[c] * mean_dxh_nh);
                    }
                }
                inputs[0].accumulate_grad(&dx);
                inputs[1].accumulate_grad(&dgain);
                inputs[2].accumulate_grad(&dbias);
            }),
        ))
    }

    /// Mean negative log-softmax probability of the gold classes.
    ///
    /// `self` is `[B×C]` logits; `labels` are 0-based class indices.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor> {
        let (b, c) = matrix_dims(self, "cross_entropy")?;
        if labels.len() != b {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy labels",
                lhs: vec![b, c],
                rhs: vec![labels.len()],
            });
        }
        for (i, &label) in labels.iter().enumerate() {
            if label >= c {
                return Err(TensorError::LabelOutOfRange {
                    label,
                    num_classes: c,
                    index: i,
                });
            }
        }
        let x = self.data();
        let mut probs = vec![0.0; x.len()];
        let mut total = 0.0;
        for r in 0..b {
            let row = &x[r * c..(r + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                probs[r * c + j] = e;
                sum += e;
            }
            for j in 0..c {
                probs[r * c + j] /= sum;
            }
            // loss_r = log-sum-exp − logit[gold], computed in shifted space
            total += sum.ln() - (row[labels[r]] - max);
        }
        let loss = total / b as f64;
        let labels = labels.to_vec();
        Ok(Tensor::from_op(
            vec![1],
            vec![loss],
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let scale = g[0] / b as f64;
                let mut dx = vec![0.0; probs.len()];
                for r in 0..b {
                    for j in 0..c {
                        let onehot = if j == labels[r] { 1.0 } else { 0.0 };
                        dx[r * c + j] = scale * (probs[r * c + j] - onehot);
                    }
                }
                inputs[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Gather rows of an embedding table: `[V×h]` gathered by `ids` -> `[len×h]`.
    /// Duplicate ids accumulate gradient into the same row.
    pub fn lookup_rows(&self, ids: &[usize]) -> Result<Tensor> {
        let (v, h) = matrix_dims(self, "lookup_rows")?;
        if ids.is_empty() {
            return Err(TensorError::EmptyInput { op: "lookup_rows" });
        }
        for &id in ids {
            if id >= v {
                return Err(TensorError::IdOutOfRange { id, rows: v });
            }
        }
        let table = self.data();
        let mut out = Vec::with_capacity(ids.len() * h);
        for &id in ids {
            out.extend_from_slice(&table[id * h..(id + 1) * h]);
        }
        let ids = ids.to_vec();
        Ok(Tensor::from_op(
            vec![ids.len(), h],
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let mut dt = vec![0.0; v * h];
                for (r, &id) in ids.iter().enumerate() {
                    for c in 0..h {
                        dt[id * h + c] += g[r * h + c];
                    }
                }
                inputs[0].accumulate_grad(&dt);
            }),
        ))
    }

    /// Contiguous row slice of a matrix.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Tensor> {
        let (m, n) = matrix_dims(self, "slice_rows")?;
        if len == 0 || start + len > m {
            return Err(TensorError::RangeOutOfBounds {
                op: "slice_rows",
                start,
                len,
                dim: m,
                which: "rows",
            });
        }
        let out = self.data()[start * n..(start + len) * n].to_vec();
        Ok(Tensor::from_op(
            vec![len, n],
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let mut dx = vec![0.0; m * n];
                dx[start * n..(start + len) * n].copy_from_slice(g);
                inputs[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Contiguous column slice of a matrix.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Tensor> {
        let (m, n) = matrix_dims(self, "slice_cols")?;
        if len == 0 || start + len > n {
            return Err(TensorError::RangeOutOfBounds {
                op: "slice_cols",
                start,
                len,
                dim: n,
                which: "cols",
            });
        }
        let x = self.data();
        let mut out = Vec::with_capacity(m * len);
        for r in 0..m {
            out.extend_from_slice(&x[r * n + start..r * n + start + len]);
        }
        Ok(Tensor::from_op(
            vec![m, len],
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let mut dx = vec![0.0; m * n];
                for r in 0..m {
                    dx[r * n + start..r * n + start + len]
                        .copy_from_slice(&g[r * len..(r + 1) * len]);
                }
                inputs[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Tile a `[1×n]` row into `[count×n]`; the gradient sums back over rows.
    pub fn repeat_rows(&self, count: usize) -> Result<Tensor> {
        let (m, n) = matrix_dims(self, "repeat_rows")?;
        if m != 1 || count == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "repeat_rows",
                lhs: self.shape(),
                rhs: vec![count, n],
            });
        }
        let row = self.data();
        let mut out = Vec::with_capacity(count * n);
        for _ in 0..count {
            out.extend_from_slice(&row);
        }
        Ok(Tensor::from_op(
            vec![count, n],
            out,
            vec![self.clone()],
            Box::new(move |g, inputs| {
                let mut dx = vec![0.0; n];
                for r in 0..count {
                    for c in 0..n {
                        dx[c] += g[r * n + c];
                    }
                }
                inputs[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum_all(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(
            vec![1],
            vec![total],
            vec![self.clone()],
            Box::new(move |g, inputs| {
                inputs[0].accumulate_grad(&vec![g[0]; n]);
            }),
        )
    }
}

/// Stack matrices with equal column counts vertically.
pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::EmptyInput { op: "concat_rows" });
    }
    let (_, n) = matrix_dims(&parts[0], "concat_rows")?;
    let mut rows = Vec::with_capacity(parts.len());
    let mut out = Vec::new();
    for p in parts {
        let (m, pn) = matrix_dims(p, "concat_rows")?;
        if pn != n {
            return Err(TensorError::ShapeMismatch {
                op: "concat_rows",
                lhs: parts[0].shape(),
                rhs: p.shape(),
            });
        }
        rows.push(m);
        out.extend_from_slice(&p.data());
    }
    let total: usize = rows.iter().sum();
    Ok(Tensor::from_op(
        vec![total, n],
        out,
        parts.to_vec(),
        Box::new(move |g, inputs| {
            let mut offset = 0;
            for (p, &m) in inputs.iter().zip(&rows) {
                p.accumulate_grad(&g[offset..offset + m * n]);
                offset += m * n;
            }
        }),
    ))
}

/// Stack matrices with equal row counts side by side.
pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::EmptyInput { op: "concat_cols" });
    }
    let (m, _) = matrix_dims(&parts[0], "concat_cols")?;
    let mut widths = Vec::with_capacity(parts.len());
    let mut datas = Vec::with_capacity(parts.len());
    for p in parts {
        let (pm, pn) = matrix_dims(p, "concat_cols")?;
        if pm != m {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                lhs: parts[0].shape(),
                rhs: p.shape(),
            });
        }
        widths.push(pn);
        datas.push(p.data());
    }
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(m * total);
    for r in 0..m {
        for (d, &w) in datas.iter().zip(&widths) {
            out.extend_from_slice(&d[r * w..(r + 1) * w]);
        }
    }
    let widths_bw = widths.clone();
    Ok(Tensor::from_op(
        vec![m, total],
        out,
        parts.to_vec(),
        Box::new(move |g, inputs| {
            let mut col = 0;
            for (p, &w) in inputs.iter().zip(&widths_bw) {
                let mut dp = vec![0.0; m * w];
                for r in 0..m {
                    dp[r * w..(r + 1) * w].copy_from_slice(&g[r * total + col..r * total + col + w]);
                }
                p.accumulate_grad(&dp);
                col += w;
            }
        }),
    ))
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GELU_COEFF: f64 = 0.044715;

fn gelu_scalar(x: f64) -> f64 {
    let u = (2.0 / std::f64::consts::PI).sqrt() * (x + GELU_COEFF * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let u = k * (x + GELU_COEFF * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_COEFF * x * x)
}

/// Split `shape` into (outer, axis dim, inner) strides around `axis`.
fn lane_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let dim = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, dim, inner)
}

#[cfg(test)]
mod tests {
    use super::super::{concat_cols, concat_rows, Tensor, TensorError};

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::param(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_passes_through() {
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let m = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(eye.matmul(&m).unwrap().data(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_one_by_one() {
        let a = t(&[1, 1], &[2.0]);
        let b = t(&[1, 1], &[3.0]);
        assert_eq!(a.matmul(&b).unwrap().data(), vec![6.0]);
    }

    #[test]
    fn matmul_projector_zeroes_second_row() {
        let p = t(&[2, 2], &[1.0, 0.0, 0.0, 0.0]);
        let m = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(p.matmul(&m).unwrap().data(), vec![5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 2], &[0.0; 4]);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn softmax_uniform_input() {
        let x = t(&[3], &[0.0, 0.0, 0.0]);
        let s = x.softmax(0).unwrap().data();
        for v in s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_closed_form_ln2() {
        let x = t(&[2], &[0.0, 2.0_f64.ln()]);
        let s = x.softmax(0).unwrap().data();
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_invalid_axis_errors() {
        let x = t(&[3], &[0.0; 3]);
        assert!(matches!(
            x.softmax(1).unwrap_err(),
            TensorError::InvalidAxis { .. }
        ));
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let x = t(&[2], &[1000.0, -1000.0]);
        let s = x.softmax(0).unwrap().data();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let x = t(&[1], &[0.0]);
        assert_eq!(x.sigmoid().data(), vec![0.5]);
    }

    #[test]
    fn mul_by_zero_annihilates() {
        let a = t(&[3], &[1.0, 2.0, 3.0]);
        let z = t(&[3], &[0.0, 0.0, 0.0]);
        assert_eq!(a.mul(&z).unwrap().data(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn incompatible_elementwise_shapes_error() {
        let a = t(&[3], &[0.0; 3]);
        let b = t(&[2], &[0.0; 2]);
        assert!(a.add(&b).is_err());
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn layer_norm_constant_row_maps_to_zero() {
        let x = t(&[1, 4], &[1.0, 1.0, 1.0, 1.0]);
        let gain = t(&[4], &[1.0; 4]);
        let bias = t(&[4], &[0.0; 4]);
        let y = x.layer_norm(&gain, &bias, 1e-12).unwrap().data();
        for v in y {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_preserves_already_normalized_pair() {
        let x = t(&[1, 2], &[-1.0, 1.0]);
        let gain = t(&[2], &[1.0, 1.0]);
        let bias = t(&[2], &[0.0, 0.0]);
        let y = x.layer_norm(&gain, &bias, 1e-12).unwrap().data();
        assert!((y[0] + 1.0).abs() < 1e-9);
        assert!((y[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn layer_norm_output_statistics_on_random_rows() {
        // Direct statistic computation as the oracle.
        let mut seed = 0x12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) * 4.0 - 2.0
        };
        let h = 16;
        let rows = 8;
        let data: Vec<f64> = (0..rows * h).map(|_| next()).collect();
        let x = t(&[rows, h], &data);
        let gain = t(&[h], &vec![1.0; h]);
        let bias = t(&[h], &vec![0.0; h]);
        let y = x.layer_norm(&gain, &bias, 1e-13).unwrap().data();
        for r in 0..rows {
            let row = &y[r * h..(r + 1) * h];
            let mean = row.iter().sum::<f64>() / h as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            assert!(mean.abs() < 1e-6, "row {r} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "row {r} var {var}");
        }
    }

    #[test]
    fn layer_norm_single_feature_zero_eps_is_rejected() {
        let x = t(&[2, 1], &[1.0, 2.0]);
        let gain = t(&[1], &[1.0]);
        let bias = t(&[1], &[0.0]);
        assert!(matches!(
            x.layer_norm(&gain, &bias, 0.0).unwrap_err(),
            TensorError::DegenerateNorm
        ));
    }

    #[test]
    fn cross_entropy_uniform_two_class() {
        let logits = t(&[1, 2], &[0.0, 0.0]);
        let loss = logits.cross_entropy(&[0]).unwrap().item();
        assert!((loss - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturated_logits_stay_finite() {
        let logits = t(&[1, 2], &[1000.0, -1000.0]);
        let loss = logits.cross_entropy(&[0]).unwrap().item();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_uniform_five_class_batch() {
        let logits = t(&[2, 5], &[0.0; 10]);
        let loss = logits.cross_entropy(&[1, 4]).unwrap().item();
        assert!((loss - 5.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_names_offending_sample() {
        let logits = t(&[2, 3], &[0.0; 6]);
        let err = logits.cross_entropy(&[0, 7]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sample 1"), "{msg}");
        assert!(msg.contains('7'), "{msg}");
    }

    #[test]
    fn lookup_rows_duplicates_accumulate() {
        let table = t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let picked = table.lookup_rows(&[1, 1, 2]).unwrap();
        assert_eq!(picked.data(), vec![3.0, 4.0, 3.0, 4.0, 5.0, 6.0]);
        picked.sum_all().backward().unwrap();
        assert_eq!(table.grad().unwrap(), vec![0.0, 0.0, 2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn slicing_and_concat_round_trip() {
        let m = t(&[2, 4], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let left = m.slice_cols(0, 2).unwrap();
        let right = m.slice_cols(2, 2).unwrap();
        let back = concat_cols(&[left, right]).unwrap();
        assert_eq!(back.data(), m.data());

        let top = m.slice_rows(0, 1).unwrap();
        let bottom = m.slice_rows(1, 1).unwrap();
        let stacked = concat_rows(&[top, bottom]).unwrap();
        assert_eq!(stacked.data(), m.data());
    }

    #[test]
    fn repeat_rows_gradient_sums_over_copies() {
        let row = t(&[1, 3], &[1.0, 2.0, 3.0]);
        let tiled = row.repeat_rows(4).unwrap();
        assert_eq!(tiled.shape(), vec![4, 3]);
        tiled.sum_all().backward().unwrap();
        assert_eq!(row.grad().unwrap(), vec![4.0, 4.0, 4.0]);
    }

    #[test]
    fn scalar_broadcast_add_and_mul() {
        let s = Tensor::param(&[1], vec![2.0]).unwrap();
        let v = t(&[3], &[1.0, 2.0, 3.0]);
        assert_eq!(s.mul(&v).unwrap().data(), vec![2.0, 4.0, 6.0]);
        assert_eq!(v.add(&s).unwrap().data(), vec![3.0, 4.0, 5.0]);
        let loss = s.mul(&v).unwrap().sum_all();
        loss.backward().unwrap();
        assert_eq!(s.grad().unwrap(), vec![6.0]);
        assert_eq!(v.grad().unwrap(), vec![2.0, 2.0, 2.0]);
    }
}
