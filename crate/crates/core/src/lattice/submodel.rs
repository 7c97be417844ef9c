use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

/// A lattice over a subset of the calibrated features, evaluated by
/// multilinear interpolation. Parameters are stored row-major with the last
/// subset dimension varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSubmodel {
    pub feature_subset: Vec<usize>,
    pub vertices_per_dim: Vec<usize>,
    pub params: Vec<f64>,
    /// Output head: `sigmoid(scale * interpolate(u) + bias)`.
    pub scale: f64,
    pub bias: f64,
}

/// Reusable buffers for one interpolation; keeps the inner training loop allocation free.
#[derive(Debug, Clone, Default)]
pub struct InterpScratch {
    /// Reduction tree stored level after level: the 2^n corner values, then
    /// 2^(n-1) partial results, down to the single output.
    values: Vec<f64>,
    adjoint: Vec<f64>,
    corner_index: Vec<usize>,
    frac: Vec<f64>,
    strides: Vec<usize>,
    /// Corner offsets from the cell's base vertex, valid for `offsets_for`.
    offsets: Vec<usize>,
    offsets_for: Vec<usize>,
}

impl LatticeSubmodel {
    pub fn new(feature_subset: Vec<usize>, vertices_per_dim: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let sub = LatticeSubmodel { feature_subset, vertices_per_dim, params, scale: 1.0, bias: 0.0 };
        sub.validate()?;
        Ok(sub)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_subset.len() != self.vertices_per_dim.len() {
            return Err(FusionError::Config("subset and vertex dims differ in length".into()));
        }
        if self.vertices_per_dim.iter().any(|&v| v < 2) {
            return Err(FusionError::Config("each lattice dimension needs at least 2 vertices".into()));
        }
        if self.params.len() != self.vertex_count() {
            return Err(FusionError::Config(format!(
                "lattice has {} params but {} vertices",
                self.params.len(),
                self.vertex_count()
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.vertices_per_dim.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices_per_dim.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims()];
        for d in (0..self.dims().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * self.vertices_per_dim[d + 1];
        }
        strides
    }

    /// Flat parameter index of a vertex given its per-dimension coordinates.
    pub fn vertex_index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(self.strides()).map(|(c, s)| c * s).sum()
    }

    pub fn interpolate(&self, u: &[f64]) -> f64 {
        let mut scratch = InterpScratch::default();
        self.interpolate_with(u, &mut scratch)
    }

    /// Multilinear interpolation at `u ∈ [0,1]^n` (components are clamped).
    pub fn interpolate_with(&self, u: &[f64], scratch: &mut InterpScratch) -> f64 {
        let n = self.dims();
        assert_eq!(u.len(), n);
        scratch.strides.clear();
        scratch.strides.resize(n, 1);
        for d in (0..n.saturating_sub(1)).rev() {
            scratch.strides[d] = scratch.strides[d + 1] * self.vertices_per_dim[d + 1];
        }
        scratch.frac.clear();
        let mut base = 0;
        for d in 0..n {
            let cells = (self.vertices_per_dim[d] - 1) as f64;
            let s = u[d].clamp(0.0, 1.0) * cells;
            let cell = (s.floor() as usize).min(self.vertices_per_dim[d] - 2);
            scratch.frac.push(s - cell as f64);
            base += cell * scratch.strides[d];
        }

        // Corner c takes the upper vertex in dimension d when bit (n - 1 - d) is set,
        // so adjacent entries differ in the last dimension and the tree reduces
        // dimensions from last to first.
        let corners = 1usize << n;
        if scratch.offsets_for != scratch.strides {
            let offsets = &mut scratch.offsets;
            offsets.clear();
            offsets.push(0);
            for &stride in &scratch.strides {
                let len = offsets.len();
                offsets.resize(2 * len, 0);
                for i in (0..len).rev() {
                    let v = offsets[i];
                    offsets[2 * i] = v;
                    offsets[2 * i + 1] = v + stride;
                }
            }
            scratch.offsets_for.clone_from(&scratch.strides);
        }
        scratch.corner_index.clear();
        scratch.corner_index.extend(scratch.offsets.iter().map(|&o| base + o));
        let idx = &scratch.corner_index;
        let values = &mut scratch.values;
        values.clear();
        values.extend(idx.iter().map(|&i| self.params[i]));
        values.resize(2 * corners - 1, 0.0);
        let (mut off, mut len) = (0, corners);
        for level in 0..n {
            let f = scratch.frac[n - 1 - level];
            let (src, dst) = values[off..].split_at_mut(len);
            for (out, p) in dst.iter_mut().zip(src.chunks_exact(2)) {
                *out = (1.0 - f) * p[0] + f * p[1];
            }
            off += len;
            len /= 2;
        }
        values[off]
    }

    /// Backpropagates `upstream = dL/d(output)` through the most recent
    /// [`interpolate_with`](Self::interpolate_with) call on `scratch`,
    /// accumulating into `dparams` (length = vertex count) and `du` (length = dims).
    pub fn backward(&self, scratch: &mut InterpScratch, upstream: f64, dparams: &mut [f64], du: &mut [f64]) {
        let n = self.dims();
        let corners = 1usize << n;
        let adjoint = &mut scratch.adjoint;
        adjoint.resize(2 * corners - 1, 0.0);
        adjoint[2 * corners - 2] = upstream;
        // Level l starts at 2^(n+1) - 2^(n+1-l) and holds 2^(n-l) entries.
        for level in (0..n).rev() {
            let d = n - 1 - level;
            let f = scratch.frac[d];
            let len = corners >> level;
            let off = 2 * corners - 2 * len;
            let (lower, upper) = adjoint[off..].split_at_mut(len);
            let vals = &scratch.values[off..off + len];
            let mut dfrac = 0.0;
            for ((out, p), &g) in lower.chunks_exact_mut(2).zip(vals.chunks_exact(2)).zip(&upper[..len / 2]) {
                out[0] = (1.0 - f) * g;
                out[1] = f * g;
                dfrac += (p[1] - p[0]) * g;
            }
            du[d] += dfrac * (self.vertices_per_dim[d] - 1) as f64;
        }
        for (&idx, &g) in scratch.corner_index.iter().zip(&adjoint[..corners]) {
            dparams[idx] += g;
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force multilinear interpolation: sums every surrounding vertex
    /// weighted by the product of its per-dimension weights.
    pub(crate) fn oracle_interpolate(sub: &LatticeSubmodel, u: &[f64]) -> f64 {
        let n = sub.dims();
        let mut cell = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for d in 0..n {
            let v = sub.vertices_per_dim[d];
            let s = u[d].clamp(0.0, 1.0) * (v - 1) as f64;
            cell[d] = (s.floor() as usize).min(v - 2);
            frac[d] = s - cell[d] as f64;
        }
        let mut total = 0.0;
        for mask in 0..(1u32 << n) {
            let mut w = 1.0;
            let mut coords = cell.clone();
            for d in 0..n {
                if mask & (1 << d) != 0 {
                    w *= frac[d];
                    coords[d] += 1;
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            total += w * sub.params[sub.vertex_index(&coords)];
        }
        total
    }

    pub(crate) fn random_submodel(rng: &mut ChaCha8Rng) -> LatticeSubmodel {
        let langid_dims = rng.random_range(0..=2);
        let mut verts = vec![3; langid_dims];
        verts.extend(std::iter::repeat_n(2, 8 - langid_dims));
        let size: usize = verts.iter().product();
        let params = (0..size).map(|_| rng.random_range(-3.0..3.0)).collect();
        LatticeSubmodel::new((0..8).collect(), verts, params).unwrap()
    }

    #[test]
    fn table_sizes() {
        let sizes: Vec<usize> = [0usize, 1, 2]
            .iter()
            .map(|&k| {
                let mut v = vec![3; k];
                v.extend(std::iter::repeat_n(2, 8 - k));
                v.iter().product()
            })
            .collect();
        assert_eq!(sizes, vec![256, 3 * 128, 9 * 64]);
        assert!(LatticeSubmodel::new(vec![0, 1], vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn vertices_reproduce_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sub = random_submodel(&mut rng);
        let mut coords = vec![0usize; 8];
        for _ in 0..200 {
            for d in 0..8 {
                coords[d] = rng.random_range(0..sub.vertices_per_dim[d]);
            }
            let u: Vec<f64> = coords
                .iter()
                .zip(&sub.vertices_per_dim)
                .map(|(&c, &v)| c as f64 / (v - 1) as f64)
                .collect();
            assert_eq!(sub.interpolate(&u), sub.params[sub.vertex_index(&coords)]);
        }
    }

    #[test]
    fn constant_params_give_constant_output() {
        let sub = LatticeSubmodel::new((0..8).collect(), vec![3, 2, 2, 2, 2, 2, 2, 3], vec![0.37; 9 * 64]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let u: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            assert!((sub.interpolate(&u) - 0.37).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let sub = random_submodel(&mut rng);
            let u: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            assert!((sub.interpolate(&u) - oracle_interpolate(&sub, &u)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_along_each_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sub = random_submodel(&mut rng);
        for d in 0..8 {
            // Three points inside one cell of dimension d are collinear.
            let mut u: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            let cells = (sub.vertices_per_dim[d] - 1) as f64;
            let lo = (u[d] * cells).floor().min(cells - 1.0) / cells;
            let width = 1.0 / cells;
            let ys: Vec<f64> = [0.1, 0.4, 0.9]
                .iter()
                .map(|&a| {
                    u[d] = lo + a * width;
                    sub.interpolate(&u)
                })
                .collect();
            let slope1 = (ys[1] - ys[0]) / 0.3;
            let slope2 = (ys[2] - ys[1]) / 0.5;
            assert!((slope1 - slope2).abs() < 1e-9, "dim {d}: {slope1} vs {slope2}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sub = random_submodel(&mut rng);
        let u: Vec<f64> = (0..8).map(|_| rng.random_range(0.05..0.95)).collect();
        let mut scratch = InterpScratch::default();
        sub.interpolate_with(&u, &mut scratch);
        let mut dparams = vec![0.0; sub.params.len()];
        let mut du = vec![0.0; 8];
        sub.backward(&mut scratch, 1.0, &mut dparams, &mut du);

        let h = 1e-6;
        for d in 0..8 {
            // Stay inside the cell so the function is smooth.
            let mut up = u.clone();
            up[d] += h;
            let mut dn = u.clone();
            dn[d] -= h;
            let fd = (sub.interpolate(&up) - sub.interpolate(&dn)) / (2.0 * h);
            assert!((fd - du[d]).abs() < 1e-6 * (1.0 + fd.abs()), "du[{d}] {} vs {fd}", du[d]);
        }
        // The output is linear in params, so the parameter gradient is the vertex weight.
        for (i, &g) in dparams.iter().enumerate() {
            let mut s2 = sub.clone();
            s2.params[i] += 1.0;
            let w = s2.interpolate(&u) - sub.interpolate(&u);
            assert!((w - g).abs() < 1e-12);
        }
    }
}
