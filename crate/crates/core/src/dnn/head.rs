//! Scoring heads combining the two tower embeddings `h1 = tower(ab)` and
//! `h2 = tower(ba)` into a logit. Head parameters are laid out as the head
//! matrix (or score vector) followed by the scalar `w`.

use crate::math::sigmoid;

use super::config::HeadKind;

/// Norms below this get `NORM_EPS` added before dividing.
pub const NORM_EPS: f64 = 1e-12;

pub fn head_param_len(kind: HeadKind, dim: usize) -> usize {
    match kind {
        HeadKind::SkewBilinear | HeadKind::PaperLiteral => dim * dim + 1,
        HeadKind::ScoreDifference => dim + 1,
    }
}

struct Unit {
    v: Vec<f64>,
    norm: f64,
    denom: f64,
}

fn unit(h: &[f64]) -> Unit {
    let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = if norm < NORM_EPS { norm + NORM_EPS } else { norm };
    Unit { v: h.iter().map(|x| x / denom).collect(), norm, denom }
}

/// Backward of `ĥ = h / denom(‖h‖)`.
fn unit_backward(h: &[f64], u: &Unit, dhat: &[f64], dh: &mut [f64]) {
    let dot: f64 = h.iter().zip(dhat).map(|(a, b)| a * b).sum();
    for i in 0..h.len() {
        dh[i] += dhat[i] / u.denom;
        if u.norm > 0.0 {
            dh[i] -= h[i] * dot / (u.norm * u.denom * u.denom);
        }
    }
}

fn mat_vec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(n)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn mat_t_vec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    out.fill(0.0);
    for (row, &xi) in m.chunks_exact(n).zip(x) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += r * xi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unscaled similarity `s(ĥ1, ĥ2)`; the logit is `w * s`.
fn similarity(kind: HeadKind, params: &[f64], u1: &[f64], u2: &[f64]) -> f64 {
    let n = u1.len();
    let mut t = vec![0.0; n];
    match kind {
        HeadKind::SkewBilinear => {
            let m = &params[..n * n];
            // ĥ1ᵀ M ĥ2 - ĥ2ᵀ M ĥ1
            mat_vec(m, u2, &mut t);
            let a = dot(u1, &t);
            mat_vec(m, u1, &mut t);
            a - dot(u2, &t)
        }
        HeadKind::ScoreDifference => {
            let u = &params[..n];
            dot(u, u1) - dot(u, u2)
        }
        HeadKind::PaperLiteral => {
            let a = &params[..n * n];
            let mut t2 = vec![0.0; n];
            mat_vec(a, u1, &mut t);
            mat_vec(a, u2, &mut t2);
            dot(&t, &t2)
        }
    }
}

pub fn head_logit(kind: HeadKind, params: &[f64], h1: &[f64], h2: &[f64]) -> f64 {
    let w = *params.last().unwrap();
    w * similarity(kind, params, &unit(h1).v, &unit(h2).v)
}

pub fn head_probability(kind: HeadKind, params: &[f64], h1: &[f64], h2: &[f64]) -> f64 {
    sigmoid(head_logit(kind, params, h1, h2))
}

/// Accumulates gradients of `dlogit * logit` into `dparams`, `dh1` and `dh2`.
#[allow(clippy::too_many_arguments)]
pub fn head_backward(
    kind: HeadKind,
    params: &[f64],
    h1: &[f64],
    h2: &[f64],
    dlogit: f64,
    dparams: &mut [f64],
    dh1: &mut [f64],
    dh2: &mut [f64],
) {
    let n = h1.len();
    let (u1, u2) = (unit(h1), unit(h2));
    let w = *params.last().unwrap();
    let s = similarity(kind, params, &u1.v, &u2.v);
    *dparams.last_mut().unwrap() += dlogit * s;
    let ds = dlogit * w;
    let mut du1 = vec![0.0; n];
    let mut du2 = vec![0.0; n];
    match kind {
        HeadKind::SkewBilinear => {
            let m = &params[..n * n];
            for i in 0..n {
                for j in 0..n {
                    dparams[i * n + j] += ds * (u1.v[i] * u2.v[j] - u2.v[i] * u1.v[j]);
                }
            }
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            mat_vec(m, &u2.v, &mut a);
            mat_t_vec(m, &u2.v, &mut b);
            for i in 0..n {
                du1[i] = ds * (a[i] - b[i]);
            }
            mat_vec(m, &u1.v, &mut a);
            mat_t_vec(m, &u1.v, &mut b);
            for i in 0..n {
                du2[i] = ds * (b[i] - a[i]);
            }
        }
        HeadKind::ScoreDifference => {
            let u = &params[..n];
            for i in 0..n {
                dparams[i] += ds * (u1.v[i] - u2.v[i]);
                du1[i] = ds * u[i];
                du2[i] = -ds * u[i];
            }
        }
        HeadKind::PaperLiteral => {
            let a = &params[..n * n];
            let (mut a1, mut a2) = (vec![0.0; n], vec![0.0; n]);
            mat_vec(a, &u1.v, &mut a1);
            mat_vec(a, &u2.v, &mut a2);
            // s = (A ĥ1)·(A ĥ2): dA = ds (A ĥ2 ĥ1ᵀ + A ĥ1 ĥ2ᵀ)
            for i in 0..n {
                for j in 0..n {
                    dparams[i * n + j] += ds * (a2[i] * u1.v[j] + a1[i] * u2.v[j]);
                }
            }
            mat_t_vec(a, &a2, &mut du1);
            mat_t_vec(a, &a1, &mut du2);
            du1.iter_mut().for_each(|v| *v *= ds);
            du2.iter_mut().for_each(|v| *v *= ds);
        }
    }
    unit_backward(h1, &u1, &du1, dh1);
    unit_backward(h2, &u2, &du2, dh2);
}
