use std::sync::Arc;

use super::kernels::{axpy, matmul, matmul_grad_a, matmul_grad_b, sigmoid};
use super::{Real, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    Swish(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, rstd: Vec<T> },
    Concat(Vec<Var>),
    RowBlock { x: Var, start: usize },
    Gather { x: Var, index: Arc<[u32]> },
    SegmentSum { x: Var, index: Arc<[u32]> },
    ColAffine { x: Var, scale: Arc<[T]> },
    WeightedSse { x: Var, target: Arc<[T]>, row_w: Arc<[T]>, col_w: Arc<[T]>, coef: T },
    SumAll(Vec<Var>),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a computation for reverse-mode differentiation. Values are
/// computed eagerly; [`Tape::backward`] replays the record in reverse.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every recorded value that needed one.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    /// Removes and returns the gradient, substituting zeros when `v` did not
    /// influence the output.
    pub fn take(&mut self, v: Var, shape: &[usize]) -> Tensor<T> {
        self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn mismatch<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A trainable input; gradients flow to it.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A fixed input; no gradient is computed for it.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
        if tb.shape().len() != 2 || tb.rows() != k {
            return Err(mismatch("matmul", ta, tb));
        }
        let mut out = Tensor::zeros(&[n, m]);
        matmul(ta.data(), tb.data(), out.data_mut(), n, k, m);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, TensorError> {
        let (tx, tb) = (self.value(x), self.value(b));
        let c = tx.cols();
        if tb.len() != c {
            return Err(mismatch("add_bias", tx, tb));
        }
        let mut out = tx.clone();
        for row in out.data_mut().chunks_exact_mut(c) {
            for (o, &bv) in row.iter_mut().zip(tb.data()) {
                *o = *o + bv;
            }
        }
        let rg = self.rg(&[x, b]);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    fn zip_with(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(ta.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_with(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_with(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let out = self.value(x).map(|v| v * c);
        let rg = self.rg(&[x]);
        self.push(out, Op::Scale(x, c), rg)
    }

    pub fn swish(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * sigmoid(v));
        let rg = self.rg(&[x]);
        self.push(out, Op::Swish(x), rg)
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Result<Var, TensorError> {
        let (tx, tg, tb) = (self.value(x), self.value(gamma), self.value(beta));
        let d = tx.cols();
        if tg.len() != d {
            return Err(mismatch("layer_norm", tx, tg));
        }
        if tb.len() != d {
            return Err(mismatch("layer_norm", tx, tb));
        }
        let inv_d = T::one() / T::of(d as f64);
        let mut out = tx.clone();
        let mut rstd = Vec::with_capacity(tx.rows());
        for row in out.data_mut().chunks_exact_mut(d) {
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let r = T::one() / (var + eps).sqrt();
            for ((o, &g), &b) in row.iter_mut().zip(tg.data()).zip(tb.data()) {
                *o = (*o - mean) * r * g + b;
            }
            rstd.push(r);
        }
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, rstd }, rg))
    }

    /// Concatenates along columns; all inputs need the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let n = self.value(parts[0]).rows();
        for &p in parts {
            if self.value(p).rows() != n {
                return Err(mismatch("concat_cols", self.value(parts[0]), self.value(p)));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::from_vec(&[n, total], out)?, Op::Concat(parts.to_vec()), rg))
    }

    /// Rows `start..end` of a matrix.
    pub fn row_block(&mut self, x: Var, start: usize, end: usize) -> Result<Var, TensorError> {
        let tx = self.value(x);
        if end > tx.rows() || start > end {
            return Err(TensorError::IndexOutOfRange {
                index: end,
                rows: tx.rows(),
            });
        }
        let c = tx.cols();
        let out = Tensor::from_vec(&[end - start, c], tx.data()[start * c..end * c].to_vec())?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::RowBlock { x, start }, rg))
    }

    /// out[e] = x[index[e]]
    pub fn gather_rows(&mut self, x: Var, index: Arc<[u32]>) -> Result<Var, TensorError> {
        let tx = self.value(x);
        let (rows, c) = (tx.rows(), tx.cols());
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            let i = i as usize;
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { index: i, rows });
            }
            out.extend_from_slice(tx.row(i));
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::from_vec(&[index.len(), c], out)?, Op::Gather { x, index }, rg))
    }

    /// out[r] = Σ_{e : index[e] = r} x[e], summed in edge order.
    pub fn segment_sum(&mut self, x: Var, index: Arc<[u32]>, n_out: usize) -> Result<Var, TensorError> {
        let tx = self.value(x);
        if tx.rows() != index.len() {
            return Err(TensorError::ShapeMismatch {
                op: "segment_sum",
                left: tx.shape().to_vec(),
                right: vec![index.len()],
            });
        }
        let c = tx.cols();
        let mut out = Tensor::zeros(&[n_out, c]);
        let od = out.data_mut();
        for (e, &r) in index.iter().enumerate() {
            let r = r as usize;
            if r >= n_out {
                return Err(TensorError::IndexOutOfRange { index: r, rows: n_out });
            }
            axpy(T::one(), tx.row(e), &mut od[r * c..(r + 1) * c]);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::SegmentSum { x, index }, rg))
    }

    /// Per-column affine map y[i,j] = x[i,j]·scale[j] + shift[j] with fixed coefficients.
    pub fn col_affine(&mut self, x: Var, scale: Arc<[T]>, shift: &[T]) -> Result<Var, TensorError> {
        let tx = self.value(x);
        let c = tx.cols();
        if scale.len() != c || shift.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: "col_affine",
                left: tx.shape().to_vec(),
                right: vec![scale.len(), shift.len()],
            });
        }
        let mut out = tx.clone();
        for row in out.data_mut().chunks_exact_mut(c) {
            for ((o, &s), &b) in row.iter_mut().zip(scale.iter()).zip(shift) {
                *o = *o * s + b;
            }
        }
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::ColAffine { x, scale }, rg))
    }

    /// coef · Σ_i Σ_j row_w[i]·col_w[j]·(x[i,j] − target[i,j])², as a one-element tensor.
    pub fn weighted_sse(
        &mut self,
        x: Var,
        target: Arc<[T]>,
        row_w: Arc<[T]>,
        col_w: Arc<[T]>,
        coef: T,
    ) -> Result<Var, TensorError> {
        let tx = self.value(x);
        let (n, c) = (tx.rows(), tx.cols());
        if target.len() != tx.len() || row_w.len() != n || col_w.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: "weighted_sse",
                left: tx.shape().to_vec(),
                right: vec![target.len(), row_w.len(), col_w.len()],
            });
        }
        let mut total = T::zero();
        for i in 0..n {
            let mut row = T::zero();
            for j in 0..c {
                let d = tx.data()[i * c + j] - target[i * c + j];
                row = row + col_w[j] * d * d;
            }
            total = total + row_w[i] * row;
        }
        let rg = self.rg(&[x]);
        Ok(self.push(
            Tensor::scalar(coef * total),
            Op::WeightedSse {
                x,
                target,
                row_w,
                col_w,
                coef,
            },
            rg,
        ))
    }

    /// Elementwise sum of equally shaped values.
    pub fn sum_all(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let mut out = self.value(parts[0]).clone();
        for &p in &parts[1..] {
            let tp = self.value(p);
            if tp.shape() != out.shape() {
                return Err(mismatch("sum_all", &out, tp));
            }
            axpy(T::one(), tp.data(), out.data_mut());
        }
        let rg = self.rg(parts);
        Ok(self.push(out, Op::SumAll(parts.to_vec()), rg))
    }

    /// Reverse pass from a one-element output, seeded with 1.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), T::one()));
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
        }
        Gradients { grads }
    }

    fn acc<'a>(&self, grads: &'a mut [Option<Tensor<T>>], v: Var) -> Option<&'a mut [T]> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.nodes[v.0].value.shape()));
        }
        slot.as_mut().map(|t| t.data_mut())
    }

    fn backprop_node(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                if let Some(da) = self.acc(grads, *a) {
                    matmul_grad_a(gd, tb.data(), da, n, k, m);
                }
                if let Some(db) = self.acc(grads, *b) {
                    matmul_grad_b(ta.data(), gd, db, n, k, m);
                }
            }
            Op::AddBias(x, b) => {
                if let Some(dx) = self.acc(grads, *x) {
                    axpy(T::one(), gd, dx);
                }
                if let Some(db) = self.acc(grads, *b) {
                    for row in gd.chunks_exact(db.len()) {
                        axpy(T::one(), row, db);
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(da) = self.acc(grads, *a) {
                    axpy(T::one(), gd, da);
                }
                if let Some(db) = self.acc(grads, *b) {
                    axpy(T::one(), gd, db);
                }
            }
            Op::Sub(a, b) => {
                if let Some(da) = self.acc(grads, *a) {
                    axpy(T::one(), gd, da);
                }
                if let Some(db) = self.acc(grads, *b) {
                    axpy(-T::one(), gd, db);
                }
            }
            Op::Scale(x, c) => {
                if let Some(dx) = self.acc(grads, *x) {
                    axpy(*c, gd, dx);
                }
            }
            Op::Swish(x) => {
                let tx = self.value(*x);
                if let Some(dx) = self.acc(grads, *x) {
                    for ((d, &v), &gv) in dx.iter_mut().zip(tx.data()).zip(gd) {
                        let s = sigmoid(v);
                        *d = *d + gv * s * (T::one() + v * (T::one() - s));
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, rstd } => {
                let (tx, tg) = (self.value(*x), self.value(*gamma));
                let d = tx.cols();
                let inv_d = T::one() / T::of(d as f64);
                let mut xhat = vec![T::zero(); d];
                let mut dxhat = vec![T::zero(); d];
                let mut dgamma = vec![T::zero(); d];
                let mut dbeta = vec![T::zero(); d];
                let mut dx_all = self.nodes[x.0].requires_grad.then(|| vec![T::zero(); tx.len()]);
                for (i, (xr, gr)) in tx.data().chunks_exact(d).zip(gd.chunks_exact(d)).enumerate() {
                    let mean = xr.iter().copied().sum::<T>() * inv_d;
                    let r = rstd[i];
                    let mut m1 = T::zero();
                    let mut m2 = T::zero();
                    for j in 0..d {
                        xhat[j] = (xr[j] - mean) * r;
                        dgamma[j] = dgamma[j] + gr[j] * xhat[j];
                        dbeta[j] = dbeta[j] + gr[j];
                        dxhat[j] = gr[j] * tg.data()[j];
                        m1 = m1 + dxhat[j];
                        m2 = m2 + dxhat[j] * xhat[j];
                    }
                    if let Some(dx) = dx_all.as_mut() {
                        let (m1, m2) = (m1 * inv_d, m2 * inv_d);
                        for j in 0..d {
                            dx[i * d + j] = r * (dxhat[j] - m1 - xhat[j] * m2);
                        }
                    }
                }
                if let (Some(src), Some(dx)) = (dx_all, self.acc(grads, *x)) {
                    axpy(T::one(), &src, dx);
                }
                if let Some(dg) = self.acc(grads, *gamma) {
                    axpy(T::one(), &dgamma, dg);
                }
                if let Some(db) = self.acc(grads, *beta) {
                    axpy(T::one(), &dbeta, db);
                }
            }
            Op::Concat(parts) => {
                let total = g.cols();
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if let Some(dp) = self.acc(grads, p) {
                        for (drow, grow) in dp.chunks_exact_mut(w).zip(gd.chunks_exact(total)) {
                            axpy(T::one(), &grow[off..off + w], drow);
                        }
                    }
                    off += w;
                }
            }
            Op::RowBlock { x, start } => {
                let c = g.cols();
                if let Some(dx) = self.acc(grads, *x) {
                    axpy(T::one(), gd, &mut dx[start * c..start * c + gd.len()]);
                }
            }
            Op::Gather { x, index } => {
                let c = g.cols();
                if let Some(dx) = self.acc(grads, *x) {
                    for (e, &src) in index.iter().enumerate() {
                        let s = src as usize;
                        axpy(T::one(), &gd[e * c..(e + 1) * c], &mut dx[s * c..(s + 1) * c]);
                    }
                }
            }
            Op::SegmentSum { x, index } => {
                let c = g.cols();
                if let Some(dx) = self.acc(grads, *x) {
                    for (e, &r) in index.iter().enumerate() {
                        let r = r as usize;
                        axpy(T::one(), &gd[r * c..(r + 1) * c], &mut dx[e * c..(e + 1) * c]);
                    }
                }
            }
            Op::ColAffine { x, scale } => {
                let c = scale.len();
                if let Some(dx) = self.acc(grads, *x) {
                    for (drow, grow) in dx.chunks_exact_mut(c).zip(gd.chunks_exact(c)) {
                        for ((d, &gv), &s) in drow.iter_mut().zip(grow).zip(scale.iter()) {
                            *d = *d + gv * s;
                        }
                    }
                }
            }
            Op::WeightedSse {
                x,
                target,
                row_w,
                col_w,
                coef,
            } => {
                let tx = self.value(*x);
                let c = col_w.len();
                let k = T::of(2.0) * *coef * gd[0];
                if let Some(dx) = self.acc(grads, *x) {
                    for (i, (drow, (xrow, trow))) in dx
                        .chunks_exact_mut(c)
                        .zip(tx.data().chunks_exact(c).zip(target.chunks_exact(c)))
                        .enumerate()
                    {
                        let kr = k * row_w[i];
                        for j in 0..c {
                            drow[j] = drow[j] + kr * col_w[j] * (xrow[j] - trow[j]);
                        }
                    }
                }
            }
            Op::SumAll(parts) => {
                for &p in parts {
                    if let Some(dp) = self.acc(grads, p) {
                        axpy(T::one(), gd, dp);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Build<T> = dyn Fn(&mut Tape<T>, &[Var]) -> Var;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn eval<T: Real>(inputs: &[Tensor<T>], f: &Build<T>) -> (T, Vec<Tensor<T>>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let mut g = tape.backward(out);
        let grads = vars.iter().zip(inputs).map(|(&v, t)| g.take(v, t.shape())).collect();
        (tape.value(out).data()[0], grads)
    }

    /// Largest relative error between reverse-mode and central differences.
    fn check<T: Real>(inputs: &[Tensor<f64>], f: &Build<T>, h: f64) -> f64 {
        let cast: Vec<Tensor<T>> = inputs.iter().map(|t| t.cast()).collect();
        let (_, grads) = eval(&cast, f);
        let mut worst = 0.0f64;
        for (i, t) in inputs.iter().enumerate() {
            for k in 0..t.len() {
                let mut plus = cast.clone();
                let mut minus = cast.clone();
                plus[i].data_mut()[k] = T::of(t.data()[k] + h);
                minus[i].data_mut()[k] = T::of(t.data()[k] - h);
                let fd = (eval(&plus, f).0.as_f64() - eval(&minus, f).0.as_f64()) / (2.0 * h);
                let an = grads[i].data()[k].as_f64();
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-2);
                worst = worst.max(rel);
            }
        }
        worst
    }

    /// Reduces any value to a scalar with a non-trivial weighting.
    fn reduce<T: Real>(tape: &mut Tape<T>, v: Var) -> Var {
        let t = tape.value(v);
        let (n, c) = (t.rows(), t.cols());
        let target: Arc<[T]> = (0..n * c).map(|k| T::of(0.1 * k as f64 - 0.3)).collect();
        let rw: Arc<[T]> = (0..n).map(|k| T::of(1.0 + 0.5 * k as f64)).collect();
        let cw: Arc<[T]> = (0..c).map(|k| T::of(0.7 + 0.2 * k as f64)).collect();
        tape.weighted_sse(v, target, rw, cw, T::of(0.37)).unwrap()
    }

    fn cases<T: Real>() -> Vec<(&'static str, Vec<Vec<usize>>, Box<Build<T>>)> {
        let idx: Arc<[u32]> = vec![2, 0, 2, 1, 0].into();
        let idx2 = idx.clone();
        vec![
            (
                "matmul",
                vec![vec![3, 4], vec![4, 2]],
                Box::new(|t: &mut Tape<T>, v: &[Var]| {
                    let y = t.matmul(v[0], v[1]).unwrap();
                    reduce(t, y)
                }),
            ),
            (
                "add_bias_swish",
                vec![vec![3, 4], vec![4]],
                Box::new(|t: &mut Tape<T>, v: &[Var]| {
                    let y = t.add_bias(v[0], v[1]).unwrap();
                    let y = t.swish(y);
                    reduce(t, y)
                }),
            ),
            (
                "add_sub_scale_sum",
                vec![vec![2, 3], vec![2, 3]],
                Box::new(|t: &mut Tape<T>, v: &[Var]| {
                    let a = t.add(v[0], v[1]).unwrap();
                    let b = t.sub(v[0], v[1]).unwrap();
                    let b = t.scale(b, T::of(-1.5));
                    let c = t.sum_all(&[a, b, v[0]]).unwrap();
                    reduce(t, c)
                }),
            ),
            (
                "layer_norm",
                vec![vec![3, 5], vec![5], vec![5]],
                Box::new(|t: &mut Tape<T>, v: &[Var]| {
                    let y = t.layer_norm(v[0], v[1], v[2], T::of(1e-5)).unwrap();
                    reduce(t, y)
                }),
            ),
            (
                "concat_row_block",
                vec![vec![3, 2], vec![3, 3], vec![6, 2]],
                Box::new(|t: &mut Tape<T>, v: &[Var]| {
                    let c = t.concat_cols(&[v[0], v[1]]).unwrap();
                    let w = t.row_block(v[2], 1, 6).unwrap();
                    let y = t.matmul(c, w).unwrap();
                    reduce(t, y)
                }),
            ),
            (
                "gather_segment_sum",
                vec![vec![3, 2]],
                Box::new(move |t: &mut Tape<T>, v: &[Var]| {
                    let g = t.gather_rows(v[0], idx.clone()).unwrap();
                    let s = t.segment_sum(g, idx2.clone(), 4).unwrap();
                    reduce(t, s)
                }),
            ),
            (
                "col_affine",
                vec![vec![4, 3]],
                Box::new(|t: &mut Tape<T>, v: &[Var]| {
                    let s: Arc<[T]> = vec![T::of(2.0), T::of(-0.5), T::of(3.0)].into();
                    let y = t.col_affine(v[0], s, &[T::of(1.0), T::of(0.0), T::of(-2.0)]).unwrap();
                    reduce(t, y)
                }),
            ),
        ]
    }

    #[test]
    fn gradients_match_finite_differences_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (name, shapes, f) in cases::<f64>() {
            for _ in 0..5 {
                let inputs: Vec<_> = shapes.iter().map(|s| random(&mut rng, s)).collect();
                let err = check(&inputs, f.as_ref(), 1e-5);
                assert!(err < 1e-4, "{name}: {err}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (name, shapes, f) in cases::<f32>() {
            let inputs: Vec<_> = shapes.iter().map(|s| random(&mut rng, s)).collect();
            let err = check(&inputs, f.as_ref(), 1e-2);
            assert!(err < 1e-2, "{name}: {err}");
        }
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::full(&[2, 2], 1.0));
        let w = tape.param(Tensor::full(&[2, 1], 0.5));
        let y = tape.matmul(x, w).unwrap();
        let s = reduce(&mut tape, y);
        let g = tape.backward(s);
        assert!(g.get(x).is_none());
        assert!(g.get(w).is_some());
    }
}
