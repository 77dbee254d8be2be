//! Periodic cell problems on `Q = [0,1]^3`.
//!
//! Exchange correctors `phi_j` minimize `<a |e_j + grad phi|^2>` over
//! zero-mean periodic fields and give `A_hom`. Magnetostatic correctors
//! `w_k` solve the periodic Poisson problem with source `div(M_s e_k)` and
//! give `B[k][l] = <grad w_k . grad w_l>`.
//!
//! Exchange correctors use cell-centered unknowns with harmonic face
//! coefficients. Magnetostatic correctors use corner unknowns: every grid
//! edge along `e_k` then lies inside a column of voxels, which makes the
//! discrete `B` exact for laminates.

mod field;
mod model;
mod pcg;
mod stencil;
mod tiled;

use rayon::prelude::*;

use crate::linalg::{dot_slices, Mat3};
use crate::material::UnitCellMaterial;
use crate::{Error, Result};

pub use field::ScalarCellField;
pub use model::{homogenize, AnisotropyAverage, Diagnostics, HomogenizedModel, PhaseAnisotropy, UniaxialAverage};
pub use pcg::{pcg, PcgOptions, SolveStats};
pub use tiled::{dirichlet_cell_value, periodic_tiled_value, tangential_corrector_check};

pub(crate) use stencil::FaceGrid;

/// Default relative residual of all cell solves.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Iteration cap per unit of linear resolution.
pub const ITERATIONS_PER_N: usize = 50;

/// Solved corrector with its solver statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Solved {
    pub field: ScalarCellField,
    pub stats: SolveStats,
}

/// The three exchange correctors of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorSet {
    pub phi: [ScalarCellField; 3],
    pub residual_norms: [f64; 3],
    pub iterations: [usize; 3],
}

/// The three magnetostatic correctors of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DemagCorrectorSet {
    pub w: [ScalarCellField; 3],
    pub residual_norms: [f64; 3],
    pub iterations: [usize; 3],
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} outside (0, 1e-2]")));
    }
    Ok(())
}

fn check_axis(j: usize) -> Result<()> {
    if j > 2 {
        return Err(Error::InvalidArgument(format!("axis index {j} outside 0..3")));
    }
    Ok(())
}

pub(crate) fn options(n: usize, tol: f64, zero_mean: bool) -> PcgOptions {
    PcgOptions {
        tol,
        max_iter: ITERATIONS_PER_N * n,
        zero_mean,
    }
}

fn exchange_grid(cell: &UnitCellMaterial) -> FaceGrid {
    let n = cell.resolution();
    FaceGrid::harmonic([n; 3], 1.0 / n as f64, &cell.a_field())
}

/// Solves for the zero-mean corrector `phi_j`.
pub fn solve_exchange_corrector(cell: &UnitCellMaterial, j: usize, tol: f64) -> Result<Solved> {
    check_tol(tol)?;
    check_axis(j)?;
    let n = cell.resolution();
    let grid = exchange_grid(cell);
    let mut source: [Option<&[f64]>; 3] = [None; 3];
    source[j] = Some(&grid.coeff[j]);
    let b = grid.rhs(source);
    let (x, stats) = pcg(
        |x, y| grid.apply(x, y, None),
        &grid.diagonal(),
        &b,
        None,
        options(n, tol, true),
    )?;
    Ok(Solved {
        field: ScalarCellField::new(n, x, true)?,
        stats,
    })
}

pub fn solve_exchange_correctors(cell: &UnitCellMaterial, tol: f64) -> Result<CorrectorSet> {
    let solved = (0..3)
        .into_par_iter()
        .map(|j| solve_exchange_corrector(cell, j, tol))
        .collect::<Result<Vec<_>>>()?;
    let [a, b, c]: [Solved; 3] = solved.try_into().expect("three correctors");
    Ok(CorrectorSet {
        residual_norms: [a.stats.residual, b.stats.residual, c.stats.residual],
        iterations: [a.stats.iterations, b.stats.iterations, c.stats.iterations],
        phi: [a.field, b.field, c.field],
    })
}

fn check_resolution(cell: &UnitCellMaterial, fields: &[ScalarCellField]) -> Result<()> {
    for f in fields {
        if f.resolution() != cell.resolution() {
            return Err(Error::ResolutionMismatch {
                expected: cell.resolution(),
                got: f.resolution(),
            });
        }
    }
    Ok(())
}

/// Symmetric bilinear face sum `h^3 sum_d sum_f c_f (g_d + D_d u / h)(g'_d + D_d v / h)`
/// for constant shifts `g`, `g'`, normalized by the grid volume.
pub(crate) fn face_form(grid: &FaceGrid, u: &[f64], gu: [f64; 3], v: &[f64], gv: [f64; 3]) -> f64 {
    let n = grid.len();
    let inv_h = 1.0 / grid.h;
    let total: f64 = (0..3)
        .map(|d| {
            crate::linalg::sum_indexed(n, |i| {
                let du = gu[d] + grid.diff(u, i, d) * inv_h;
                let dv = gv[d] + grid.diff(v, i, d) * inv_h;
                grid.coeff[d][i] * du * dv
            })
        })
        .sum();
    total / n as f64
}

/// `A_hom[j][l] = <a (e_j + grad phi_j) . (e_l + grad phi_l)>`, symmetrized.
pub fn assemble_a_hom(cell: &UnitCellMaterial, correctors: &CorrectorSet) -> Result<Mat3> {
    check_resolution(cell, &correctors.phi)?;
    let grid = exchange_grid(cell);
    let mut a = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in j..3 {
            let v = face_form(
                &grid,
                correctors.phi[j].values(),
                crate::linalg::unit(j),
                correctors.phi[l].values(),
                crate::linalg::unit(l),
            );
            a[j][l] = v;
            a[l][j] = v;
        }
    }
    Ok(a)
}

/// Saturation averaged over the four voxels around each grid edge.
/// `out[i]` belongs to the edge from corner `i` to corner `i + e_k`.
fn edge_saturation(cell: &UnitCellMaterial, k: usize) -> Vec<f64> {
    let n = cell.resolution();
    let ms = cell.ms_field();
    let (p, q) = match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    (0..n * n * n)
        .into_par_iter()
        .map(|idx| {
            let c = [idx % n, (idx / n) % n, idx / (n * n)];
            let mut s = 0.0;
            for dp in [0, n - 1] {
                for dq in [0, n - 1] {
                    let mut v = c;
                    v[p] = (v[p] + dp) % n;
                    v[q] = (v[q] + dq) % n;
                    s += ms[(v[2] * n + v[1]) * n + v[0]];
                }
            }
            0.25 * s
        })
        .collect()
}

/// Solves for the zero-mean magnetostatic corrector `w_k`, sampled at voxel
/// corners.
pub fn solve_demag_corrector(cell: &UnitCellMaterial, k: usize, tol: f64) -> Result<Solved> {
    check_tol(tol)?;
    check_axis(k)?;
    let n = cell.resolution();
    let grid = FaceGrid::uniform([n; 3], 1.0 / n as f64, 1.0);
    let edge = edge_saturation(cell, k);
    let mut source: [Option<&[f64]>; 3] = [None; 3];
    source[k] = Some(&edge);
    let b = grid.rhs(source);
    let (x, stats) = pcg(
        |x, y| grid.apply(x, y, None),
        &grid.diagonal(),
        &b,
        None,
        options(n, tol, true),
    )?;
    Ok(Solved {
        field: ScalarCellField::with_offset(n, x, true, 0.0)?,
        stats,
    })
}

pub fn solve_demag_correctors(cell: &UnitCellMaterial, tol: f64) -> Result<DemagCorrectorSet> {
    let solved = (0..3)
        .into_par_iter()
        .map(|k| solve_demag_corrector(cell, k, tol))
        .collect::<Result<Vec<_>>>()?;
    let [a, b, c]: [Solved; 3] = solved.try_into().expect("three correctors");
    Ok(DemagCorrectorSet {
        residual_norms: [a.stats.residual, b.stats.residual, c.stats.residual],
        iterations: [a.stats.iterations, b.stats.iterations, c.stats.iterations],
        w: [a.field, b.field, c.field],
    })
}

/// `B[k][l] = <grad w_k . grad w_l>`.
pub fn assemble_b_demag(cell: &UnitCellMaterial, w: &[ScalarCellField; 3]) -> Result<Mat3> {
    check_resolution(cell, w)?;
    let n = cell.resolution();
    let grid = FaceGrid::uniform([n; 3], 1.0 / n as f64, 1.0);
    let mut b = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in k..3 {
            let v = face_form(&grid, w[k].values(), [0.0; 3], w[l].values(), [0.0; 3]);
            b[k][l] = v;
            b[l][k] = v;
        }
    }
    Ok(b)
}

/// `sum_i (A xi_i) . xi_i` with `xi_i` the rows of `xi`.
pub fn g_hom_density(a: &Mat3, xi: &Mat3) -> f64 {
    xi.iter()
        .map(|row| crate::linalg::dot(crate::linalg::mat_vec(a, *row), *row))
        .sum()
}

/// Periodic cell energy `<a |xi + grad psi|^2>` of an arbitrary trial field,
/// used to check minimality of the correctors.
pub fn exchange_cell_energy(cell: &UnitCellMaterial, xi: [f64; 3], psi: &ScalarCellField) -> Result<f64> {
    check_resolution(cell, std::slice::from_ref(psi))?;
    let grid = exchange_grid(cell);
    Ok(face_form(&grid, psi.values(), xi, psi.values(), xi))
}

/// Discrete Euler-Lagrange residual `|K phi - b| / |b|` of an exchange
/// corrector; zero forcing reports `|K phi|`.
pub fn exchange_residual(cell: &UnitCellMaterial, j: usize, phi: &ScalarCellField) -> Result<f64> {
    check_axis(j)?;
    check_resolution(cell, std::slice::from_ref(phi))?;
    let grid = exchange_grid(cell);
    let mut source: [Option<&[f64]>; 3] = [None; 3];
    source[j] = Some(&grid.coeff[j]);
    let b = grid.rhs(source);
    let mut r = vec![0.0; b.len()];
    grid.apply(phi.values(), &mut r, None);
    r.iter_mut().zip(&b).for_each(|(r, b)| *r -= b);
    let bn = dot_slices(&b, &b).sqrt();
    let rn = dot_slices(&r, &r).sqrt();
    Ok(if bn > 0.0 { rn / bn } else { rn })
}

#[cfg(test)]
mod tests;
