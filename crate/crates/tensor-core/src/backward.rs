use std::collections::{HashMap, HashSet};

use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::ops::elementwise::{gelu_grad_scalar, sigmoid_scalar};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Gradients accumulated by a backward pass, keyed by tensor identity.
/// Leaf variables keep their entries; intermediate entries are dropped as
/// soon as they have been propagated.
pub struct Gradients<T: Scalar> {
    map: HashMap<u64, Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, t: &Tensor<T>) -> Option<&[T]> {
        self.map.get(&t.id().0).map(|v| v.as_slice())
    }

    pub fn take(&mut self, t: &Tensor<T>) -> Option<Vec<T>> {
        self.map.remove(&t.id().0)
    }
}

fn acc_entry<'a, T: Scalar>(
    grads: &'a mut HashMap<u64, Vec<T>>,
    t: &Tensor<T>,
) -> Option<&'a mut [T]> {
    if !t.tracked() {
        return None;
    }
    Some(
        grads
            .entry(t.id().0)
            .or_insert_with(|| vec![T::zero(); t.numel()])
            .as_mut_slice(),
    )
}

impl<T: Scalar> Tensor<T> {
    /// Reverse-mode pass from a scalar loss. Returns the gradient of the
    /// loss with respect to every reachable leaf variable; variables that do
    /// not participate in the graph simply have no entry (gradient zero).
    pub fn backward(&self) -> Result<Gradients<T>> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape().to_vec()));
        }
        // Iterative post-order DFS: parents appear before consumers.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !seen.insert(node.id().0) {
                continue;
            }
            stack.push((node.clone(), true));
            if let Some(op) = node.op() {
                for p in op.parents() {
                    if p.tracked() && !seen.contains(&p.id().0) {
                        stack.push(((*p).clone(), false));
                    }
                }
            }
        }

        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.id().0, vec![T::one()]);
        for node in order.iter().rev() {
            let Some(op) = node.op() else {
                continue; // leaf: keep its accumulated gradient
            };
            let Some(g) = grads.remove(&node.id().0) else {
                continue;
            };
            apply_backward(op, node, &g, &mut grads);
        }
        Ok(Gradients { map: grads })
    }
}

fn apply_backward<T: Scalar>(
    op: &Op<T>,
    node: &Tensor<T>,
    g: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    match op {
        Op::Add(a, b) => {
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            if let Some(db) = acc_entry(grads, b) {
                for (d, &gv) in db.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
        }
        Op::Sub(a, b) => {
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            if let Some(db) = acc_entry(grads, b) {
                for (d, &gv) in db.iter_mut().zip(g) {
                    *d = *d - gv;
                }
            }
        }
        Op::Mul(a, b) => {
            if let Some(da) = acc_entry(grads, a) {
                for ((d, &gv), &bv) in da.iter_mut().zip(g).zip(b.data()) {
                    *d = *d + gv * bv;
                }
            }
            if let Some(db) = acc_entry(grads, b) {
                for ((d, &gv), &av) in db.iter_mut().zip(g).zip(a.data()) {
                    *d = *d + gv * av;
                }
            }
        }
        Op::Neg(a) => {
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d - gv;
                }
            }
        }
        Op::AddScalar(a, _) => {
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
        }
        Op::MulScalar(a, c) => {
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d + gv * *c;
                }
            }
        }
        Op::MulScalarTensor(a, s) => {
            let c = s.data()[0];
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d + gv * c;
                }
            }
            if let Some(ds) = acc_entry(grads, s) {
                let mut acc = T::zero();
                for (&gv, &av) in g.iter().zip(a.data()) {
                    acc = acc + gv * av;
                }
                ds[0] = ds[0] + acc;
            }
        }
        Op::Abs(a) => {
            if let Some(da) = acc_entry(grads, a) {
                for ((d, &gv), &av) in da.iter_mut().zip(g).zip(a.data()) {
                    let s = if av > T::zero() {
                        T::one()
                    } else if av < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    };
                    *d = *d + gv * s;
                }
            }
        }
        Op::LeakyRelu(a, slope) => {
            if let Some(da) = acc_entry(grads, a) {
                for ((d, &gv), &av) in da.iter_mut().zip(g).zip(a.data()) {
                    let f = if av >= T::zero() { T::one() } else { *slope };
                    *d = *d + gv * f;
                }
            }
        }
        Op::Gelu(a) => {
            if let Some(da) = acc_entry(grads, a) {
                for ((d, &gv), &av) in da.iter_mut().zip(g).zip(a.data()) {
                    *d = *d + gv * gelu_grad_scalar(av);
                }
            }
        }
        Op::Softplus(a) => {
            if let Some(da) = acc_entry(grads, a) {
                for ((d, &gv), &av) in da.iter_mut().zip(g).zip(a.data()) {
                    *d = *d + gv * sigmoid_scalar(av);
                }
            }
        }
        Op::Rsqrt(a) => {
            if let Some(da) = acc_entry(grads, a) {
                let half = T::from_f64_c(0.5);
                for ((d, &gv), &yv) in da.iter_mut().zip(g).zip(node.data()) {
                    *d = *d - gv * half * yv * yv * yv;
                }
            }
        }
        Op::Softmax { input, axis } => {
            if let Some(da) = acc_entry(grads, input) {
                let shape = node.shape();
                let n = shape[*axis];
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[*axis + 1..].iter().product();
                let y = node.data();
                for o in 0..outer {
                    for j in 0..inner {
                        let idx = |i: usize| (o * n + i) * inner + j;
                        let mut dot = T::zero();
                        for i in 0..n {
                            dot = dot + g[idx(i)] * y[idx(i)];
                        }
                        for i in 0..n {
                            let ii = idx(i);
                            da[ii] = da[ii] + y[ii] * (g[ii] - dot);
                        }
                    }
                }
            }
        }
        Op::LayerNorm { x, gain, bias, eps } => {
            backward_layernorm(x, gain, bias, *eps, g, grads);
        }
        Op::Matmul(a, b) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            if let Some(da) = acc_entry(grads, a) {
                // da[i,kk] += sum_j g[i,j] * b[kk,j]
                let bd = b.data();
                for i in 0..m {
                    let g_row = &g[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let b_row = &bd[kk * n..(kk + 1) * n];
                        let mut acc = T::zero();
                        for (gv, bv) in g_row.iter().zip(b_row) {
                            acc = acc + *gv * *bv;
                        }
                        da[i * k + kk] = da[i * k + kk] + acc;
                    }
                }
            }
            if let Some(db) = acc_entry(grads, b) {
                // db[kk,j] += sum_i a[i,kk] * g[i,j]
                let ad = a.data();
                for i in 0..m {
                    let g_row = &g[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let a_ik = ad[i * k + kk];
                        if a_ik == T::zero() {
                            continue;
                        }
                        let db_row = &mut db[kk * n..(kk + 1) * n];
                        for (d, &gv) in db_row.iter_mut().zip(g_row) {
                            *d = *d + a_ik * gv;
                        }
                    }
                }
            }
        }
        Op::Transpose(a) => {
            if let Some(da) = acc_entry(grads, a) {
                let (m, n) = (a.shape()[0], a.shape()[1]);
                // node is n x m; g follows node's layout
                for i in 0..m {
                    for j in 0..n {
                        da[i * n + j] = da[i * n + j] + g[j * m + i];
                    }
                }
            }
        }
        Op::Reshape(a) => {
            if let Some(da) = acc_entry(grads, a) {
                for (d, &gv) in da.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
        }
        Op::L2NormCols(a, eps) => {
            if let Some(da) = acc_entry(grads, a) {
                let (m, n) = (a.shape()[0], a.shape()[1]);
                let x = a.data();
                let y = node.data();
                for j in 0..n {
                    let mut sq = T::zero();
                    for i in 0..m {
                        let v = x[i * n + j];
                        sq = sq + v * v;
                    }
                    let norm = sq.sqrt();
                    if norm > *eps {
                        let mut dot = T::zero();
                        for i in 0..m {
                            dot = dot + g[i * n + j] * y[i * n + j];
                        }
                        for i in 0..m {
                            let ii = i * n + j;
                            da[ii] = da[ii] + (g[ii] - y[ii] * dot) / norm;
                        }
                    } else {
                        for i in 0..m {
                            let ii = i * n + j;
                            da[ii] = da[ii] + g[ii] / *eps;
                        }
                    }
                }
            }
        }
        Op::Conv2d { x, w, stride, pad } => {
            backward_conv2d(x, w, *stride, *pad, node, g, grads);
        }
        Op::DepthwiseConv2d { x, w, pad } => {
            backward_depthwise(x, w, *pad, g, grads);
        }
        Op::AddBiasChannel(x, bias) => {
            if let Some(dx) = acc_entry(grads, x) {
                for (d, &gv) in dx.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            if let Some(db) = acc_entry(grads, bias) {
                let (b, c, h, w) = match *x.shape() {
                    [b, c, h, w] => (b, c, h, w),
                    _ => unreachable!(),
                };
                let hw = h * w;
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let mut acc = T::zero();
                        for &gv in &g[base..base + hw] {
                            acc = acc + gv;
                        }
                        db[ci] = db[ci] + acc;
                    }
                }
            }
        }
        Op::AddBiasRow(x, bias) => {
            if let Some(dx) = acc_entry(grads, x) {
                for (d, &gv) in dx.iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            if let Some(db) = acc_entry(grads, bias) {
                let n = bias.numel();
                let b = x.numel() / n;
                for bi in 0..b {
                    for j in 0..n {
                        db[j] = db[j] + g[bi * n + j];
                    }
                }
            }
        }
        Op::ScaleChannels(x, s) => {
            let (b, c, h, w) = match *x.shape() {
                [b, c, h, w] => (b, c, h, w),
                _ => unreachable!(),
            };
            let hw = h * w;
            if let Some(dx) = acc_entry(grads, x) {
                let sv = s.data();
                for bi in 0..b {
                    for ci in 0..c {
                        let f = sv[bi * c + ci];
                        let base = (bi * c + ci) * hw;
                        for (d, &gv) in dx[base..base + hw].iter_mut().zip(&g[base..base + hw]) {
                            *d = *d + gv * f;
                        }
                    }
                }
            }
            if let Some(ds) = acc_entry(grads, s) {
                let xv = x.data();
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let mut acc = T::zero();
                        for (&gv, &xvv) in g[base..base + hw].iter().zip(&xv[base..base + hw]) {
                            acc = acc + gv * xvv;
                        }
                        ds[bi * c + ci] = ds[bi * c + ci] + acc;
                    }
                }
            }
        }
        Op::SliceChannels { x, start, len } => {
            if let Some(dx) = acc_entry(grads, x) {
                let (b, c, h, w) = match *x.shape() {
                    [b, c, h, w] => (b, c, h, w),
                    _ => unreachable!(),
                };
                let hw = h * w;
                for bi in 0..b {
                    let dst = (bi * c + start) * hw;
                    let src = bi * len * hw;
                    for i in 0..len * hw {
                        dx[dst + i] = dx[dst + i] + g[src + i];
                    }
                }
            }
        }
        Op::ConcatChannels(a, b) => {
            let (bn, c1, h, w) = match *a.shape() {
                [bn, c1, h, w] => (bn, c1, h, w),
                _ => unreachable!(),
            };
            let c2 = b.shape()[1];
            let hw = h * w;
            if let Some(da) = acc_entry(grads, a) {
                for bi in 0..bn {
                    let src = bi * (c1 + c2) * hw;
                    let dst = bi * c1 * hw;
                    for i in 0..c1 * hw {
                        da[dst + i] = da[dst + i] + g[src + i];
                    }
                }
            }
            if let Some(db) = acc_entry(grads, b) {
                for bi in 0..bn {
                    let src = bi * (c1 + c2) * hw + c1 * hw;
                    let dst = bi * c2 * hw;
                    for i in 0..c2 * hw {
                        db[dst + i] = db[dst + i] + g[src + i];
                    }
                }
            }
        }
        Op::SliceBatch { x, index } => {
            if let Some(dx) = acc_entry(grads, x) {
                let per = g.len();
                for i in 0..per {
                    dx[index * per + i] = dx[index * per + i] + g[i];
                }
            }
        }
        Op::ConcatBatch(parts) => {
            let mut offset = 0usize;
            for p in parts {
                let n = p.numel();
                if let Some(dp) = acc_entry(grads, p) {
                    for (d, &gv) in dp.iter_mut().zip(&g[offset..offset + n]) {
                        *d = *d + gv;
                    }
                }
                offset += n;
            }
        }
        Op::RepeatBatch(x, batch) => {
            if let Some(dx) = acc_entry(grads, x) {
                let per = x.numel();
                for bi in 0..*batch {
                    for i in 0..per {
                        dx[i] = dx[i] + g[bi * per + i];
                    }
                }
            }
        }
        Op::UpsampleNearest2(x) => {
            if let Some(dx) = acc_entry(grads, x) {
                let (b, c, h, w) = match *x.shape() {
                    [b, c, h, w] => (b, c, h, w),
                    _ => unreachable!(),
                };
                let (h2, w2) = (2 * h, 2 * w);
                for bc in 0..b * c {
                    let src = bc * h2 * w2;
                    let dst = bc * h * w;
                    for y in 0..h2 {
                        for xo in 0..w2 {
                            let di = dst + (y / 2) * w + xo / 2;
                            dx[di] = dx[di] + g[src + y * w2 + xo];
                        }
                    }
                }
            }
        }
        Op::DownsampleArea(x, tau) => {
            if let Some(dx) = acc_entry(grads, x) {
                let (b, c, h, w) = match *x.shape() {
                    [b, c, h, w] => (b, c, h, w),
                    _ => unreachable!(),
                };
                let (ho, wo) = (h / tau, w / tau);
                let inv = T::one() / T::from_f64_c((tau * tau) as f64);
                for bc in 0..b * c {
                    let src = bc * ho * wo;
                    let dst = bc * h * w;
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let gv = g[src + oy * wo + ox] * inv;
                            for dy in 0..*tau {
                                let row = dst + (oy * tau + dy) * w + ox * tau;
                                for dxx in 0..*tau {
                                    dx[row + dxx] = dx[row + dxx] + gv;
                                }
                            }
                        }
                    }
                }
            }
        }
        Op::Sum(x) => {
            if let Some(dx) = acc_entry(grads, x) {
                let gv = g[0];
                for d in dx.iter_mut() {
                    *d = *d + gv;
                }
            }
        }
        Op::Mean(x) => {
            if let Some(dx) = acc_entry(grads, x) {
                let gv = g[0] / T::from_f64_c(x.numel() as f64);
                for d in dx.iter_mut() {
                    *d = *d + gv;
                }
            }
        }
    }
}

fn backward_layernorm<T: Scalar>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
    eps: T,
    g: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (b, c, h, w) = match *x.shape() {
        [b, c, h, w] => (b, c, h, w),
        _ => unreachable!(),
    };
    let hw = h * w;
    let n = T::from_f64_c(c as f64);
    let xd = x.data();
    let gd = gain.data();

    let needs_x = x.tracked();
    let needs_gain = gain.tracked();
    let needs_bias = bias.tracked();

    let mut dx = if needs_x {
        Some(vec![T::zero(); xd.len()])
    } else {
        None
    };
    let mut dgain = if needs_gain {
        Some(vec![T::zero(); c])
    } else {
        None
    };
    let mut dbias = if needs_bias {
        Some(vec![T::zero(); c])
    } else {
        None
    };

    let mut xhat = vec![T::zero(); c];
    for bi in 0..b {
        for p in 0..hw {
            let base = bi * c * hw + p;
            let mut mean = T::zero();
            for ci in 0..c {
                mean = mean + xd[base + ci * hw];
            }
            mean = mean / n;
            let mut var = T::zero();
            for ci in 0..c {
                let d = xd[base + ci * hw] - mean;
                var = var + d * d;
            }
            var = var / n;
            let inv_std = T::one() / (var + eps).sqrt();
            for (ci, xh) in xhat.iter_mut().enumerate() {
                *xh = (xd[base + ci * hw] - mean) * inv_std;
            }
            let mut sum_gg = T::zero();
            let mut sum_ggx = T::zero();
            for ci in 0..c {
                let gg = gd[ci] * g[base + ci * hw];
                sum_gg = sum_gg + gg;
                sum_ggx = sum_ggx + gg * xhat[ci];
            }
            if let Some(dx) = dx.as_mut() {
                for ci in 0..c {
                    let gg = gd[ci] * g[base + ci * hw];
                    let v = (gg - sum_gg / n - xhat[ci] * sum_ggx / n) * inv_std;
                    dx[base + ci * hw] = dx[base + ci * hw] + v;
                }
            }
            if let Some(dgain) = dgain.as_mut() {
                for ci in 0..c {
                    dgain[ci] = dgain[ci] + g[base + ci * hw] * xhat[ci];
                }
            }
            if let Some(dbias) = dbias.as_mut() {
                for ci in 0..c {
                    dbias[ci] = dbias[ci] + g[base + ci * hw];
                }
            }
        }
    }

    if let (Some(dx), Some(acc)) = (dx, acc_entry(grads, x)) {
        for (a, d) in acc.iter_mut().zip(dx) {
            *a = *a + d;
        }
    }
    if let (Some(dgain), Some(acc)) = (dgain, acc_entry(grads, gain)) {
        for (a, d) in acc.iter_mut().zip(dgain) {
            *a = *a + d;
        }
    }
    if let (Some(dbias), Some(acc)) = (dbias, acc_entry(grads, bias)) {
        for (a, d) in acc.iter_mut().zip(dbias) {
            *a = *a + d;
        }
    }
}

fn backward_conv2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    pad: usize,
    node: &Tensor<T>,
    g: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (b, cin, h, wd) = match *x.shape() {
        [b, cin, h, wd] => (b, cin, h, wd),
        _ => unreachable!(),
    };
    let (cout, _, k, _) = match *w.shape() {
        [cout, cin_w, k, k2] => (cout, cin_w, k, k2),
        _ => unreachable!(),
    };
    let (ho, wo) = (node.shape()[2], node.shape()[3]);

    let needs_x = x.tracked();
    let needs_w = w.tracked();
    let mut dx = if needs_x {
        Some(vec![T::zero(); x.numel()])
    } else {
        None
    };
    let mut dw = if needs_w {
        Some(vec![T::zero(); w.numel()])
    } else {
        None
    };

    let xd = x.data();
    let wv = w.data();
    // ox range keeping ix = ox*stride + kx - pad inside [0, wd)
    let ox_range = |kx: usize| -> (usize, usize) {
        let lo = if kx >= pad {
            0
        } else {
            (pad - kx).div_ceil(stride)
        };
        let hi = if wd + pad > kx {
            (((wd + pad - kx - 1) / stride) + 1).min(wo)
        } else {
            0
        };
        (lo.min(hi), hi)
    };
    for bi in 0..b {
        for co in 0..cout {
            let g_base = (bi * cout + co) * ho * wo;
            for ci in 0..cin {
                let x_base = (bi * cin + ci) * h * wd;
                let w_base = (co * cin + ci) * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let wval = wv[w_base + ky * k + kx];
                        let mut dw_acc = T::zero();
                        let (ox_lo, ox_hi) = ox_range(kx);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in 0..ho {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let x_row = x_base + iy as usize * wd;
                            let g_row = g_base + oy * wo;
                            if stride == 1 {
                                // ox_lo + kx >= pad by construction
                                let base = x_row + ox_lo + kx - pad;
                                let len = ox_hi - ox_lo;
                                let gs = &g[g_row + ox_lo..g_row + ox_hi];
                                if let Some(dx) = dx.as_mut() {
                                    let ds = &mut dx[base..base + len];
                                    for (d, &gv) in ds.iter_mut().zip(gs) {
                                        *d = *d + gv * wval;
                                    }
                                }
                                let xs = &xd[base..base + len];
                                for (&gv, &xv) in gs.iter().zip(xs) {
                                    dw_acc = dw_acc + gv * xv;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    let ix = ox * stride + kx - pad;
                                    let gv = g[g_row + ox];
                                    if let Some(dx) = dx.as_mut() {
                                        dx[x_row + ix] = dx[x_row + ix] + gv * wval;
                                    }
                                    dw_acc = dw_acc + gv * xd[x_row + ix];
                                }
                            }
                        }
                        if let Some(dw) = dw.as_mut() {
                            dw[w_base + ky * k + kx] = dw[w_base + ky * k + kx] + dw_acc;
                        }
                    }
                }
            }
        }
    }

    if let (Some(dx), Some(acc)) = (dx, acc_entry(grads, x)) {
        for (a, d) in acc.iter_mut().zip(dx) {
            *a = *a + d;
        }
    }
    if let (Some(dw), Some(acc)) = (dw, acc_entry(grads, w)) {
        for (a, d) in acc.iter_mut().zip(dw) {
            *a = *a + d;
        }
    }
}

fn backward_depthwise<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    pad: usize,
    g: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (b, c, h, wd) = match *x.shape() {
        [b, c, h, wd] => (b, c, h, wd),
        _ => unreachable!(),
    };
    let k = w.shape()[2];

    let needs_x = x.tracked();
    let needs_w = w.tracked();
    let mut dx = if needs_x {
        Some(vec![T::zero(); x.numel()])
    } else {
        None
    };
    let mut dw = if needs_w {
        Some(vec![T::zero(); w.numel()])
    } else {
        None
    };

    let xd = x.data();
    let wv = w.data();
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * h * wd;
            let w_base = ci * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let wval = wv[w_base + ky * k + kx];
                    let mut dw_acc = T::zero();
                    let ox_lo = pad.saturating_sub(kx);
                    let ox_hi = (wd + pad).saturating_sub(kx).min(wd);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let len = ox_hi - ox_lo;
                    for oy in 0..h {
                        let iy = (oy + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let x_row = base + iy as usize * wd;
                        let g_row = base + oy * wd;
                        let src = x_row + ox_lo + kx - pad;
                        let gs = &g[g_row + ox_lo..g_row + ox_hi];
                        if let Some(dx) = dx.as_mut() {
                            let ds = &mut dx[src..src + len];
                            for (d, &gv) in ds.iter_mut().zip(gs) {
                                *d = *d + gv * wval;
                            }
                        }
                        let xs = &xd[src..src + len];
                        for (&gv, &xv) in gs.iter().zip(xs) {
                            dw_acc = dw_acc + gv * xv;
                        }
                    }
                    if let Some(dw) = dw.as_mut() {
                        dw[w_base + ky * k + kx] = dw[w_base + ky * k + kx] + dw_acc;
                    }
                }
            }
        }
    }

    if let (Some(dx), Some(acc)) = (dx, acc_entry(grads, x)) {
        for (a, d) in acc.iter_mut().zip(dx) {
            *a = *a + d;
        }
    }
    if let (Some(dw), Some(acc)) = (dw, acc_entry(grads, w)) {
        for (a, d) in acc.iter_mut().zip(dw) {
            *a = *a + d;
        }
    }
}
