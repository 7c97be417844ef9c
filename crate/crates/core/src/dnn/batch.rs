//! Minibatch forward and backward passes as matrix products. Rows `0..n`
//! hold the `ab` orderings and rows `n..2n` the flipped `ba` orderings.

use rand::Rng;

use crate::math::{log_loss, sigmoid, PROB_CLAMP};
use crate::signal::{FeatureVector12, PairSample};

use super::head::{head_backward, head_logit};
use super::layers::dropout_mask;
use super::model::{DnnModel, Mode};

/// `C (m×n) = beta*C + A (m×k) * B (k×n)`, all row-major unless the strides say otherwise.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize, beta: f64, c: &mut [f64]) {
    assert!(c.len() >= m * n);
    // SAFETY: the strides index within `a`, `b` and `c`, whose lengths the
    // callers size from the same dimensions.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

#[derive(Debug, Clone, Default)]
pub struct BatchWorkspace {
    rows: usize,
    /// `inputs[l]` is the `rows × n_in(l)` input of layer `l`; the last is the embedding.
    inputs: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    mask: Vec<Vec<f64>>,
    x_hat: Vec<Vec<f64>>,
    inv_std: Vec<Vec<f64>>,
    grad_out: Vec<Vec<f64>>,
    dz: Vec<f64>,
}

impl BatchWorkspace {
    fn ensure(&mut self, sizes: &[usize], rows: usize) {
        if self.rows == rows && self.inputs.len() == sizes.len() {
            return;
        }
        self.rows = rows;
        let outs = || sizes[1..].iter().map(|&n| vec![0.0; rows * n]).collect::<Vec<_>>();
        self.inputs = sizes.iter().map(|&n| vec![0.0; rows * n]).collect();
        self.z = outs();
        self.a = outs();
        self.mask = outs();
        self.x_hat = outs();
        self.inv_std = sizes[1..].iter().map(|_| vec![0.0; rows]).collect();
        self.grad_out = sizes.iter().map(|&n| vec![0.0; rows * n]).collect();
        self.dz = vec![0.0; rows * sizes.iter().max().unwrap()];
    }
}

impl DnnModel {
    /// Tower pass over all rows of `ws.inputs[0]`.
    fn batch_forward<R: Rng>(&self, params: &[f64], mode: Mode, rng: &mut R, ws: &mut BatchWorkspace) {
        let cfg = &self.config;
        let rows = ws.rows;
        let last = self.layout.layers.len() - 1;
        for (l, s) in self.layout.layers.iter().enumerate() {
            let (n_in, n_out) = (s.n_in, s.n_out);
            let w = &params[s.w..s.w + n_in * n_out];
            let b = &params[s.b..s.b + n_out];
            let z = &mut ws.z[l];
            for row in z.chunks_exact_mut(n_out) {
                row.copy_from_slice(b);
            }
            gemm(rows, n_in, n_out, &ws.inputs[l], n_in as isize, 1, w, 1, n_in as isize, 1.0, z);
            let act = cfg.activation;
            for (a, &zv) in ws.a[l].iter_mut().zip(z.iter()) {
                *a = act.apply(zv);
            }
            if mode == Mode::Train && l < last {
                dropout_mask(cfg.dropout_rate, &mut ws.mask[l], rng);
            } else {
                ws.mask[l].fill(1.0);
            }
            let (before, after) = ws.inputs.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            for (i, ((o, a), m)) in out.chunks_exact_mut(n_out).zip(ws.a[l].chunks_exact(n_out)).zip(ws.mask[l].chunks_exact(n_out)).enumerate() {
                for ((ov, av), mv) in o.iter_mut().zip(a).zip(m) {
                    *ov = av * mv;
                }
                if let Some((g, off)) = s.ln {
                    let n = n_out as f64;
                    let mean = o.iter().sum::<f64>() / n;
                    let var = o.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv = 1.0 / (var + cfg.layer_norm_eps).sqrt();
                    ws.inv_std[l][i] = inv;
                    let xh = &mut ws.x_hat[l][i * n_out..(i + 1) * n_out];
                    for j in 0..n_out {
                        xh[j] = (o[j] - mean) * inv;
                        o[j] = params[g + j] * xh[j] + params[off + j];
                    }
                }
                if s.residual {
                    for (ov, iv) in o.iter_mut().zip(&input[i * n_in..(i + 1) * n_in]) {
                        *ov += iv;
                    }
                }
            }
        }
    }

    /// Backward from `ws.grad_out[last]`; accumulates into `grad`.
    fn batch_backward(&self, params: &[f64], ws: &mut BatchWorkspace, grad: &mut [f64]) {
        let rows = ws.rows;
        let act = self.config.activation;
        for l in (0..self.layout.layers.len()).rev() {
            let s = &self.layout.layers[l];
            let (n_in, n_out) = (s.n_in, s.n_out);
            let (lower, upper) = ws.grad_out.split_at_mut(l + 1);
            let dout = &upper[0];
            let dx = &mut lower[l];
            let dz = &mut ws.dz[..rows * n_out];
            for i in 0..rows {
                let r = i * n_out..(i + 1) * n_out;
                let d = &dout[r.clone()];
                let dzr = &mut dz[r.clone()];
                match s.ln {
                    Some((g, off)) => {
                        let xh = &ws.x_hat[l][r.clone()];
                        let n = n_out as f64;
                        let (mut m1, mut m2) = (0.0, 0.0);
                        for j in 0..n_out {
                            grad[g + j] += d[j] * xh[j];
                            grad[off + j] += d[j];
                            let dxh = d[j] * params[g + j];
                            m1 += dxh;
                            m2 += dxh * xh[j];
                        }
                        m1 /= n;
                        m2 /= n;
                        let inv = ws.inv_std[l][i];
                        for j in 0..n_out {
                            dzr[j] = inv * (d[j] * params[g + j] - m1 - xh[j] * m2);
                        }
                    }
                    None => dzr.copy_from_slice(d),
                }
                let (a, z, m) = (&ws.a[l][r.clone()], &ws.z[l][r.clone()], &ws.mask[l][r]);
                for j in 0..n_out {
                    dzr[j] *= m[j] * act.derivative(z[j], a[j]);
                }
            }
            // dW += dZᵀ X
            let (gw, gb) = grad[s.w..s.b + n_out].split_at_mut(n_in * n_out);
            gemm(n_out, rows, n_in, dz, 1, n_out as isize, &ws.inputs[l], n_in as isize, 1, 1.0, gw);
            for row in dz.chunks_exact(n_out) {
                for (g, v) in gb.iter_mut().zip(row) {
                    *g += v;
                }
            }
            if l > 0 {
                let w = &params[s.w..s.w + n_in * n_out];
                let beta = if s.residual { 1.0 } else { 0.0 };
                if s.residual {
                    dx.copy_from_slice(dout);
                }
                gemm(rows, n_out, n_in, dz, n_out as isize, 1, w, n_in as isize, 1, beta, dx);
            }
        }
    }

    /// Mean weighted BCE over `batch` (indices into `fvs`/`samples`), with its
    /// gradient added into `grad`.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_loss_and_grad<R: Rng>(
        &self,
        params: &[f64],
        fvs: &[FeatureVector12],
        samples: &[PairSample],
        batch: &[usize],
        mode: Mode,
        rng: &mut R,
        ws: &mut BatchWorkspace,
        grad: &mut [f64],
    ) -> f64 {
        let n = batch.len();
        let d_in = self.config.layer_sizes[0];
        ws.ensure(&self.config.layer_sizes, 2 * n);
        for (k, &i) in batch.iter().enumerate() {
            ws.inputs[0][k * d_in..(k + 1) * d_in].copy_from_slice(fvs[i].as_slice());
            ws.inputs[0][(n + k) * d_in..(n + k + 1) * d_in].copy_from_slice(fvs[i].flip().as_slice());
        }
        self.batch_forward(params, mode, rng, ws);

        let kind = self.config.head_kind;
        let head = self.head_params(params);
        let d = self.config.embedding_dim();
        let hs = self.layout.head;
        let scale = 1.0 / n as f64;
        let last = self.layout.layers.len();
        let mut loss = 0.0;
        let (emb, dh) = (&ws.inputs[last], &mut ws.grad_out[last]);
        dh.fill(0.0);
        let (dh_ab, dh_ba) = dh.split_at_mut(n * d);
        for (k, &i) in batch.iter().enumerate() {
            let s = &samples[i];
            let h1 = &emb[k * d..(k + 1) * d];
            let h2 = &emb[(n + k) * d..(n + k + 1) * d];
            let p = sigmoid(head_logit(kind, head, h1, h2));
            loss += log_loss(p, s.label, s.weight);
            let clamped = p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP;
            let dlogit = if clamped { 0.0 } else { scale * s.weight * (p - s.label as f64) };
            head_backward(
                kind,
                head,
                h1,
                h2,
                dlogit,
                &mut grad[hs..hs + self.layout.head_len],
                &mut dh_ab[k * d..(k + 1) * d],
                &mut dh_ba[k * d..(k + 1) * d],
            );
        }
        self.batch_backward(params, ws, grad);
        loss * scale
    }
}
