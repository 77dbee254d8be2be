//! Small fixed-size vector helpers and reproducible reductions.

use rayon::prelude::*;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Unit basis vector `e_axis`.
pub fn unit(axis: usize) -> Vec3 {
    let mut e = ZERO3;
    e[axis] = 1.0;
    e
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn axpy(a: Vec3, s: f64, x: Vec3) -> Vec3 {
    [a[0] + s * x[0], a[1] + s * x[1], a[2] + s * x[2]]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Returns `a / |a|`, or `None` for the zero vector.
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n > 0.0).then(|| scale(a, 1.0 / n))
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

pub fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest absolute antisymmetric part `max |m[i][j] - m[j][i]|`.
pub fn asymmetry(m: &Mat3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((m[i][j] - m[j][i]).abs());
        }
    }
    worst
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat3) -> Vec3 {
    let a = nalgebra::Matrix3::from_fn(|i, j| 0.5 * (m[i][j] + m[j][i]));
    let eig = nalgebra::SymmetricEigen::new(a);
    let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Fixed block length of the reproducible reductions. Partial sums are
/// formed per block and combined in index order, so the result does not
/// depend on the rayon thread count.
pub const REDUCTION_BLOCK: usize = 4096;

/// Reproducible parallel sum of `f(i)` over `0..n`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks = n.div_ceil(REDUCTION_BLOCK);
    let partial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * REDUCTION_BLOCK;
            let hi = (lo + REDUCTION_BLOCK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

/// Reproducible parallel dot product.
pub fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(REDUCTION_BLOCK)
        .zip(b.par_chunks(REDUCTION_BLOCK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Reproducible parallel sum of a slice.
pub fn sum_slice(a: &[f64]) -> f64 {
    let partial: Vec<f64> = a.par_chunks(REDUCTION_BLOCK).map(|x| x.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

/// Reproducible sum of 3-vector dot products `sum_i a_i . b_i`.
pub fn dot_fields(a: &[Vec3], b: &[Vec3]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |i| dot(a[i], b[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = [[2.5, 0.0, 0.0], [0.0, 1.6, 0.0], [0.0, 0.0, 2.5]];
        let ev = sym_eigenvalues(&m);
        assert!((ev[0] - 1.6).abs() < 1e-14);
        assert!((ev[2] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn reduction_is_blocked_deterministically() {
        let v: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let a = sum_slice(&v);
        let b = sum_indexed(v.len(), |i| v[i]);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
