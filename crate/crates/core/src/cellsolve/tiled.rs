//! Cell problems on the tiled cube `Q_t = [0,t]^3` and the tangential
//! decoupling check.

use crate::linalg::{dot, norm, Mat3, Vec3};
use crate::material::UnitCellMaterial;
use crate::{Error, Result};

use super::{check_tol, face_form, options, pcg, FaceGrid};

fn tiled_grid(cell: &UnitCellMaterial, t: usize) -> Result<FaceGrid> {
    if t == 0 {
        return Err(Error::InvalidArgument("tiling factor must be positive".into()));
    }
    let n = cell.resolution();
    let m = t * n;
    let a = cell.a_field();
    let tiled: Vec<f64> = (0..m * m * m)
        .map(|idx| {
            let (i, j, k) = (idx % m, (idx / m) % m, idx / (m * m));
            a[cell.index(i, j, k)]
        })
        .collect();
    Ok(FaceGrid::harmonic([m; 3], 1.0 / n as f64, &tiled))
}

/// Minimizes `sum_rows <a |xi_i + grad phi_i|^2>_{Q_t}` with `phi_i` either
/// periodic on `Q_t` or vanishing on the voxel layer at the faces of `Q_t`.
fn tiled_value(cell: &UnitCellMaterial, xi: &Mat3, t: usize, tol: f64, dirichlet: bool) -> Result<f64> {
    check_tol(tol)?;
    let grid = tiled_grid(cell, t)?;
    let m = grid.dims[0];
    let pinned: Option<Vec<bool>> = dirichlet.then(|| {
        (0..grid.len())
            .map(|idx| idx % m == 0 || (idx / m) % m == 0 || idx / (m * m) == 0)
            .collect()
    });
    let diag = grid.diagonal();
    let mut total = 0.0;
    for row in xi {
        if row.iter().all(|&g| g == 0.0) {
            continue;
        }
        let sources: [Vec<f64>; 3] = [0, 1, 2].map(|d| grid.coeff[d].iter().map(|c| c * row[d]).collect());
        let mut b = grid.rhs([Some(&sources[0]), Some(&sources[1]), Some(&sources[2])]);
        if let Some(p) = &pinned {
            b.iter_mut().zip(p).for_each(|(b, &p)| {
                if p {
                    *b = 0.0
                }
            });
        }
        let (phi, _) = pcg(
            |x, y| grid.apply(x, y, pinned.as_deref()),
            &diag,
            &b,
            pinned.as_deref(),
            options(m, tol, !dirichlet),
        )?;
        total += face_form(&grid, &phi, *row, &phi, *row);
    }
    Ok(total)
}

/// Discrete `inf` over fields vanishing on the boundary of `Q_t` of
/// `(1/|Q_t|) int a |xi + grad phi|^2`.
///
/// The boundary layer is the voxel plane with index 0 along each axis, so the
/// constraint set for `t` contains the periodic extension of the one for any
/// divisor of `t`; the values are therefore non-increasing along `1, 2, 4`.
pub fn dirichlet_cell_value(cell: &UnitCellMaterial, xi: &Mat3, t: usize, tol: f64) -> Result<f64> {
    tiled_value(cell, xi, t, tol, true)
}

/// Same functional with `Q_t`-periodic fields. Equals `g_hom(xi)` for every `t`.
pub fn periodic_tiled_value(cell: &UnitCellMaterial, xi: &Mat3, t: usize, tol: f64) -> Result<f64> {
    tiled_value(cell, xi, t, tol, false)
}

/// Solves the unconstrained vector corrector for a tangent `xi` (`xi^T s = 0`)
/// and returns `|phi . s|_{L^2} / max(1, |phi|_{L^2})`.
pub fn tangential_corrector_check(cell: &UnitCellMaterial, s: Vec3, xi: &Mat3, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if (norm(s) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "direction |s| = {} is not unit",
            norm(s)
        )));
    }
    for j in 0..3 {
        let c = (0..3).map(|i| xi[i][j] * s[i]).sum::<f64>();
        if c.abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "xi^T s has component {c:e} along axis {j}"
            )));
        }
    }
    let grid = tiled_grid(cell, 1)?;
    let n = grid.dims[0];
    let diag = grid.diagonal();
    let mut phi = Vec::with_capacity(3);
    for row in xi {
        let sources: [Vec<f64>; 3] = [0, 1, 2].map(|d| grid.coeff[d].iter().map(|c| c * row[d]).collect());
        let b = grid.rhs([Some(&sources[0]), Some(&sources[1]), Some(&sources[2])]);
        let (x, _) = pcg(|x, y| grid.apply(x, y, None), &diag, &b, None, options(n, tol, true))?;
        phi.push(x);
    }
    let len = grid.len() as f64;
    let along: Vec<f64> = (0..grid.len())
        .map(|i| dot([phi[0][i], phi[1][i], phi[2][i]], s))
        .collect();
    let along_norm = (crate::linalg::dot_slices(&along, &along) / len).sqrt();
    let full_norm = (phi.iter().map(|p| crate::linalg::dot_slices(p, p)).sum::<f64>() / len).sqrt();
    Ok(along_norm / full_norm.max(1.0))
}
