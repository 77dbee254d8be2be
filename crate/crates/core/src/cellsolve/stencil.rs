//! Face-coefficient stencils on periodic box grids.
//!
//! Unknowns live at voxel centers (or, for the magnetostatic correctors, at
//! voxel corners; the algebra is identical). `coeff[d][i]` weights the face
//! between voxel `i` and its periodic neighbor `i + e_d`. The discrete
//! functional is
//!
//! ```text
//! E(phi) = sum_d sum_faces c_f (Delta_d phi_f + h s_f / c_f)^2
//! ```
//!
//! whose Euler-Lagrange system is `K phi = b` with
//! `(K phi)_i = sum_faces c_f (phi_i - phi_nbr)` and
//! `b_i = h sum_d (s_d(i) - s_d(i - e_d))`.

use rayon::prelude::*;

pub(crate) struct FaceGrid {
    pub dims: [usize; 3],
    /// Grid spacing in cell units.
    pub h: f64,
    pub coeff: [Vec<f64>; 3],
}

impl FaceGrid {
    pub fn new(dims: [usize; 3], h: f64, coeff: [Vec<f64>; 3]) -> Self {
        let n = dims.iter().product::<usize>();
        debug_assert!(coeff.iter().all(|c| c.len() == n));
        FaceGrid { dims, h, coeff }
    }

    /// Harmonic face averages of a voxel coefficient field.
    pub fn harmonic(dims: [usize; 3], h: f64, a: &[f64]) -> Self {
        let coeff = [0, 1, 2].map(|d| {
            (0..a.len())
                .map(|i| {
                    let (l, r) = (a[i], a[neighbor(dims, i, d, true)]);
                    if l == r {
                        l
                    } else {
                        2.0 * l * r / (l + r)
                    }
                })
                .collect()
        });
        FaceGrid::new(dims, h, coeff)
    }

    pub fn uniform(dims: [usize; 3], h: f64, value: f64) -> Self {
        let n = dims.iter().product::<usize>();
        FaceGrid::new(dims, h, [vec![value; n], vec![value; n], vec![value; n]])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                (0..3)
                    .map(|d| self.coeff[d][i] + self.coeff[d][neighbor(self.dims, i, d, false)])
                    .sum()
            })
            .collect()
    }

    /// `y = K x`; pinned rows are set to zero.
    pub fn apply(&self, x: &[f64], y: &mut [f64], pinned: Option<&[bool]>) {
        let [nx, ny, nz] = self.dims;
        let plane = nx * ny;
        let c = &self.coeff;
        y.par_chunks_mut(plane).enumerate().for_each(|(k, out)| {
            let kp = (k + 1) % nz;
            let km = (k + nz - 1) % nz;
            for j in 0..ny {
                let jp = (j + 1) % ny;
                let jm = (j + ny - 1) % ny;
                for i in 0..nx {
                    let ip = (i + 1) % nx;
                    let im = (i + nx - 1) % nx;
                    let id = k * plane + j * nx + i;
                    if pinned.is_some_and(|p| p[id]) {
                        out[j * nx + i] = 0.0;
                        continue;
                    }
                    let xi = x[id];
                    let ixp = k * plane + j * nx + ip;
                    let ixm = k * plane + j * nx + im;
                    let iyp = k * plane + jp * nx + i;
                    let iym = k * plane + jm * nx + i;
                    let izp = kp * plane + j * nx + i;
                    let izm = km * plane + j * nx + i;
                    out[j * nx + i] = c[0][id] * (xi - x[ixp])
                        + c[0][ixm] * (xi - x[ixm])
                        + c[1][id] * (xi - x[iyp])
                        + c[1][iym] * (xi - x[iym])
                        + c[2][id] * (xi - x[izp])
                        + c[2][izm] * (xi - x[izm]);
                }
            }
        });
    }

    /// Right-hand side for per-face sources `s_d` (`None` = zero source).
    pub fn rhs(&self, source: [Option<&[f64]>; 3]) -> Vec<f64> {
        let mut b = vec![0.0; self.len()];
        for (d, s) in source.iter().enumerate() {
            let Some(s) = s else { continue };
            b.par_iter_mut().enumerate().for_each(|(i, b)| {
                *b += self.h * (s[i] - s[neighbor(self.dims, i, d, false)]);
            });
        }
        b
    }

    /// `x[i + e_d] - x[i]` on the face `(i, i + e_d)`.
    #[inline]
    pub fn diff(&self, x: &[f64], i: usize, d: usize) -> f64 {
        x[neighbor(self.dims, i, d, true)] - x[i]
    }
}

/// Periodic neighbor of flat index `i` along axis `d`.
#[inline]
pub(crate) fn neighbor(dims: [usize; 3], i: usize, d: usize, forward: bool) -> usize {
    let [nx, ny, _] = dims;
    let mut c = [i % nx, (i / nx) % ny, i / (nx * ny)];
    let n = dims[d];
    c[d] = if forward { (c[d] + 1) % n } else { (c[d] + n - 1) % n };
    (c[2] * ny + c[1]) * nx + c[0]
}
