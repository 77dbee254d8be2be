//! Jacobi-preconditioned conjugate gradients for the SPD (or periodic,
//! constant-nullspace) cell systems.

use crate::linalg::{dot_slices, sum_slice};
use crate::{Error, Result};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgOptions {
    /// Target relative residual `|b - Ax| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Periodic systems: keep iterates in the zero-mean subspace.
    pub zero_mean: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// True relative residual of the returned solution.
    pub residual: f64,
}

fn project_mean(v: &mut [f64]) {
    let mean = sum_slice(v) / v.len() as f64;
    v.par_iter_mut().for_each(|x| *x -= mean);
}

/// Solves `A x = b` starting from zero. `apply(x, y)` writes `y = A x`.
/// Entries with `pinned[i]` are held at zero.
pub fn pcg<F>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    pinned: Option<&[bool]>,
    opts: PcgOptions,
) -> Result<(Vec<f64>, SolveStats)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot_slices(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let inv_diag: Vec<f64> = diag
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if pinned.is_some_and(|p| p[i]) || d == 0.0 {
                0.0
            } else {
                1.0 / d
            }
        })
        .collect();
    let precondition = |r: &[f64], z: &mut [f64]| {
        z.par_iter_mut()
            .zip(r.par_iter())
            .zip(inv_diag.par_iter())
            .for_each(|((z, r), d)| *z = r * d);
        if opts.zero_mean {
            project_mean(z);
        }
    };

    let mut r = b.to_vec();
    if let Some(p) = pinned {
        r.iter_mut().zip(p).for_each(|(r, &p)| {
            if p {
                *r = 0.0
            }
        });
    }
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot_slices(&r, &z);
    let mut iterations = 0;
    let mut residual = 1.0;

    while iterations < opts.max_iter {
        apply(&p, &mut q);
        let pq = dot_slices(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(q.par_iter()).for_each(|(r, q)| *r -= alpha * q);
        iterations += 1;
        residual = dot_slices(&r, &r).sqrt() / b_norm;
        if residual <= opts.tol {
            // guard against drift of the recursive residual
            apply(&x, &mut q);
            r.par_iter_mut()
                .zip(b.par_iter())
                .zip(q.par_iter())
                .for_each(|((r, b), q)| *r = b - q);
            if let Some(pm) = pinned {
                r.iter_mut().zip(pm).for_each(|(r, &p)| {
                    if p {
                        *r = 0.0
                    }
                });
            }
            if opts.zero_mean {
                project_mean(&mut r);
            }
            residual = dot_slices(&r, &r).sqrt() / b_norm;
            if residual <= opts.tol {
                break;
            }
            precondition(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot_slices(&r, &z);
            continue;
        }
        precondition(&r, &mut z);
        let rz_new = dot_slices(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(p, z)| *p = z + beta * *p);
    }
    if residual > opts.tol {
        return Err(Error::NonConvergence {
            iterations,
            residual,
            target: opts.tol,
        });
    }
    if opts.zero_mean {
        project_mean(&mut x);
    }
    Ok((x, SolveStats { iterations, residual }))
}
