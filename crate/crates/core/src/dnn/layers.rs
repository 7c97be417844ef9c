//! Forward and backward passes of the individual layer types, on flat slices.
//!
//! Dense weights are row-major `[out][in]`. Backward functions accumulate
//! (`+=`) into their gradient outputs.

use super::config::Activation;

/// `z = W x + b`.
pub fn dense_forward(w: &[f64], b: &[f64], x: &[f64], z: &mut [f64]) {
    let n_in = x.len();
    debug_assert_eq!(w.len(), n_in * z.len());
    for (o, (zo, row)) in z.iter_mut().zip(w.chunks_exact(n_in)).enumerate() {
        *zo = b[o] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
    }
}

/// Given `dz`, accumulates `dW += dz xᵀ`, `db += dz` and, if requested, `dx += Wᵀ dz`.
pub fn dense_backward(
    w: &[f64],
    x: &[f64],
    dz: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[o] += g;
        let row = o * n_in..(o + 1) * n_in;
        for (dwi, xi) in dw[row.clone()].iter_mut().zip(x) {
            *dwi += g * xi;
        }
        if let Some(dx) = dx.as_deref_mut() {
            for (dxi, wi) in dx.iter_mut().zip(&w[row]) {
                *dxi += g * wi;
            }
        }
    }
}

pub fn activation_forward(act: Activation, z: &[f64], a: &mut [f64]) {
    for (ai, &zi) in a.iter_mut().zip(z) {
        *ai = act.apply(zi);
    }
}

/// `dz = da ⊙ act'(z)` (overwrites `dz`).
pub fn activation_backward(act: Activation, z: &[f64], a: &[f64], da: &[f64], dz: &mut [f64]) {
    for i in 0..z.len() {
        dz[i] = da[i] * act.derivative(z[i], a[i]);
    }
}

/// Inverted-dropout mask: each unit is kept with probability `1 - rate` and
/// scaled by `1 / (1 - rate)`, so the expected activation is unchanged.
pub fn dropout_mask<R: rand::Rng>(rate: f64, mask: &mut [f64], rng: &mut R) {
    if rate == 0.0 {
        mask.fill(1.0);
        return;
    }
    let keep = 1.0 / (1.0 - rate);
    for m in mask.iter_mut() {
        *m = if rng.random::<f64>() < rate { 0.0 } else { keep };
    }
}

/// Normalizes `x` to zero mean and unit variance over its units, then applies
/// `gain` and `offset`. Writes the normalized values to `x_hat` and returns
/// `1 / sqrt(var + eps)`.
pub fn layer_norm_forward(
    x: &[f64],
    gain: &[f64],
    offset: &[f64],
    eps: f64,
    x_hat: &mut [f64],
    out: &mut [f64],
) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    for i in 0..x.len() {
        x_hat[i] = (x[i] - mean) * inv_std;
        out[i] = gain[i] * x_hat[i] + offset[i];
    }
    inv_std
}

/// Backward of [`layer_norm_forward`]:
/// `dx = inv_std * (dx̂ - mean(dx̂) - x̂ * mean(dx̂ ⊙ x̂))` with `dx̂ = dout ⊙ gain`.
pub fn layer_norm_backward(
    dout: &[f64],
    x_hat: &[f64],
    inv_std: f64,
    gain: &[f64],
    dgain: &mut [f64],
    doffset: &mut [f64],
    dx: &mut [f64],
) {
    let n = dout.len() as f64;
    let mut mean_dxh = 0.0;
    let mut mean_dxh_xh = 0.0;
    for i in 0..dout.len() {
        dgain[i] += dout[i] * x_hat[i];
        doffset[i] += dout[i];
        let dxh = dout[i] * gain[i];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * x_hat[i];
    }
    mean_dxh /= n;
    mean_dxh_xh /= n;
    for i in 0..dout.len() {
        let dxh = dout[i] * gain[i];
        dx[i] = inv_std * (dxh - mean_dxh - x_hat[i] * mean_dxh_xh);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Central difference of a scalar function of one vector.
    fn numeric_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                up[i] += h;
                let mut dn = x.to_vec();
                dn[i] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())), "{x} vs {y}");
        }
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (mut xh, mut out) = (vec![0.0; 64], vec![0.0; 64]);
        layer_norm_forward(&x, &[1.0; 64], &[0.0; 64], 1e-10, &mut xh, &mut out);
        let mean = xh.iter().sum::<f64>() / 64.0;
        let var = xh.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 64.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dense_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n_in, n_out) = (5, 4);
        let w = rand_vec(&mut rng, n_in * n_out);
        let b = rand_vec(&mut rng, n_out);
        let x = rand_vec(&mut rng, n_in);
        let r = rand_vec(&mut rng, n_out); // loss = r · z
        let loss_x = |x: &[f64]| {
            let mut z = vec![0.0; n_out];
            dense_forward(&w, &b, x, &mut z);
            z.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let loss_w = |w: &[f64]| {
            let mut z = vec![0.0; n_out];
            dense_forward(w, &b, &x, &mut z);
            z.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let (mut dw, mut db, mut dx) = (vec![0.0; w.len()], vec![0.0; n_out], vec![0.0; n_in]);
        dense_backward(&w, &x, &r, &mut dw, &mut db, Some(&mut dx));
        assert_close(&dx, &numeric_grad(&loss_x, &x), 1e-8);
        assert_close(&dw, &numeric_grad(&loss_w, &w), 1e-8);
        assert_close(&db, &r, 0.0);
    }

    #[test]
    fn activation_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Keep away from the ReLU kink.
        let z: Vec<f64> = rand_vec(&mut rng, 8).into_iter().map(|v| if v.abs() < 0.05 { 0.3 } else { v }).collect();
        let r = rand_vec(&mut rng, 8);
        for act in [Activation::Relu, Activation::LeakyRelu, Activation::Tanh] {
            let loss = |z: &[f64]| z.iter().zip(&r).map(|(zi, ri)| act.apply(*zi) * ri).sum::<f64>();
            let mut a = vec![0.0; 8];
            activation_forward(act, &z, &mut a);
            let mut dz = vec![0.0; 8];
            activation_backward(act, &z, &a, &r, &mut dz);
            assert_close(&dz, &numeric_grad(&loss, &z), 1e-8);
        }
    }

    #[test]
    fn dropout_mask_statistics_and_fixed_mask_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut mask = vec![0.0; 20_000];
        dropout_mask(0.5, &mut mask, &mut rng);
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.03);
        dropout_mask(0.0, &mut mask[..4], &mut rng);
        assert_eq!(&mask[..4], &[1.0; 4]);
        // With the mask fixed, dropout is the linear map a -> a ⊙ mask.
        let m = [2.0, 0.0, 2.0, 0.0];
        let r = [0.3, -0.7, 1.1, 0.4];
        let loss = |a: &[f64]| a.iter().zip(&m).zip(&r).map(|((a, m), r)| a * m * r).sum::<f64>();
        let analytic: Vec<f64> = m.iter().zip(&r).map(|(m, r)| m * r).collect();
        assert_close(&analytic, &numeric_grad(&loss, &[0.1, 0.2, 0.3, 0.4]), 1e-9);
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 7;
        let x = rand_vec(&mut rng, n);
        let gain: Vec<f64> = rand_vec(&mut rng, n).iter().map(|v| 1.0 + 0.5 * v).collect();
        let offset = rand_vec(&mut rng, n);
        let r = rand_vec(&mut rng, n);
        let eps = 1e-10;
        let run = |x: &[f64], g: &[f64]| {
            let (mut xh, mut out) = (vec![0.0; n], vec![0.0; n]);
            layer_norm_forward(x, g, &offset, eps, &mut xh, &mut out);
            out.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let (mut xh, mut out) = (vec![0.0; n], vec![0.0; n]);
        let inv = layer_norm_forward(&x, &gain, &offset, eps, &mut xh, &mut out);
        let (mut dg, mut doff, mut dx) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        layer_norm_backward(&r, &xh, inv, &gain, &mut dg, &mut doff, &mut dx);
        assert_close(&dx, &numeric_grad(&|x| run(x, &gain), &x), 1e-7);
        assert_close(&dg, &numeric_grad(&|g| run(&x, g), &gain), 1e-8);
        assert_close(&doff, &r, 0.0);
    }
}
