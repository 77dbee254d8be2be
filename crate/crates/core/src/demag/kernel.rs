//! Demagnetizing tensor between two uniformly magnetized rectangular cells.
//!
//! Near offsets use Newell's closed-form volume averages (the exact
//! cell-to-cell interaction); far offsets switch to the point-dipole tensor,
//! where the closed form loses digits to cancellation. For cubic cells the
//! dipole error is fourth order in `pitch / distance`.

use std::f64::consts::PI;

/// Newell auxiliary function for the diagonal entries. Even in each argument.
pub(crate) fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut s = (2.0 * x2 - y2 - z2) * r / 6.0;
    if x2 + z2 > 0.0 {
        s += 0.5 * y * (z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if x2 + y2 > 0.0 {
        s += 0.5 * z * (y2 - x2) * (z / (x2 + y2).sqrt()).asinh();
    }
    if x * r > 0.0 {
        s -= x * y * z * (y * z / (x * r)).atan();
    }
    s
}

/// Newell auxiliary function for the off-diagonal entries. Odd in `x` and
/// `y`, even in `z`.
pub(crate) fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let sign = x.signum() * y.signum();
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut s = -x * y * r / 3.0;
    s += x * y * z * (z / (x2 + y2).sqrt()).asinh();
    s += y / 6.0 * (3.0 * z2 - y2) * (x / (y2 + z2).sqrt()).asinh();
    s += x / 6.0 * (3.0 * z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    if z > 0.0 {
        s -= z * z2 / 6.0 * (x * y / (z * r)).atan();
        s -= 0.5 * z * y2 * (x * z / (y * r)).atan();
        s -= 0.5 * z * x2 * (y * z / (x * r)).atan();
    }
    sign * s
}

const STENCIL: [(f64, f64); 3] = [(-1.0, -1.0), (0.0, 2.0), (1.0, -1.0)];

/// Second difference of `fun` in every direction, i.e. the 27-point
/// combination `sum w_a w_b w_c fun(x + a dx, y + b dy, z + c dz)`.
fn stencil(fun: fn(f64, f64, f64) -> f64, p: [f64; 3], d: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for (a, wa) in STENCIL {
        for (b, wb) in STENCIL {
            for (c, wc) in STENCIL {
                s += wa * wb * wc * fun(p[0] + a * d[0], p[1] + b * d[1], p[2] + c * d[2]);
            }
        }
    }
    s
}

/// Tensor entries in the order `xx, yy, zz, xy, xz, yz`.
pub type TensorEntries = [f64; 6];

/// Newell tensor at cell offset `r` for cells of size `d`.
pub fn newell_tensor(r: [f64; 3], d: [f64; 3]) -> TensorEntries {
    let vol = d[0] * d[1] * d[2];
    let c = 1.0 / (4.0 * PI * vol);
    let [x, y, z] = r;
    let [dx, dy, dz] = d;
    [
        c * stencil(newell_f, [x, y, z], [dx, dy, dz]),
        c * stencil(newell_f, [y, x, z], [dy, dx, dz]),
        c * stencil(newell_f, [z, y, x], [dz, dy, dx]),
        c * stencil(newell_g, [x, y, z], [dx, dy, dz]),
        c * stencil(newell_g, [x, z, y], [dx, dz, dy]),
        c * stencil(newell_g, [y, z, x], [dy, dz, dx]),
    ]
}

/// Point-dipole tensor `V / (4 pi r^3) (I - 3 r r^T / r^2)`.
pub fn dipole_tensor(r: [f64; 3], d: [f64; 3]) -> TensorEntries {
    let vol = d[0] * d[1] * d[2];
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let c = vol / (4.0 * PI * r2 * r2 * r2.sqrt());
    [
        c * (r2 - 3.0 * r[0] * r[0]),
        c * (r2 - 3.0 * r[1] * r[1]),
        c * (r2 - 3.0 * r[2] * r[2]),
        -3.0 * c * r[0] * r[1],
        -3.0 * c * r[0] * r[2],
        -3.0 * c * r[1] * r[2],
    ]
}

/// Offsets (in units of the largest pitch) beyond which the dipole tensor
/// replaces the closed form.
pub const FAR_FIELD_CELLS: f64 = 24.0;

/// Demagnetizing tensor at integer cell offset `(a, b, c)`.
pub fn cell_tensor(offset: [i64; 3], d: [f64; 3]) -> TensorEntries {
    let r = [
        offset[0] as f64 * d[0],
        offset[1] as f64 * d[1],
        offset[2] as f64 * d[2],
    ];
    let dmax = d[0].max(d[1]).max(d[2]);
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    if r2 > (FAR_FIELD_CELLS * dmax).powi(2) {
        dipole_tensor(r, d)
    } else {
        newell_tensor(r, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_term_of_cube_is_one_third() {
        let n = newell_tensor([0.0; 3], [1.0; 3]);
        for v in &n[..3] {
            assert!((v - 1.0 / 3.0).abs() < 1e-13, "{v}");
        }
        for v in &n[3..] {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn trace_identity_for_flat_cell() {
        let n = newell_tensor([0.0; 3], [1.0, 2.0, 0.25]);
        assert!((n[0] + n[1] + n[2] - 1.0).abs() < 1e-12);
        // thin along z
        assert!(n[2] > n[0] && n[0] > n[1]);
    }

    #[test]
    fn off_center_trace_vanishes() {
        for off in [[1.0, 0.0, 0.0], [1.0, 2.0, 0.0], [3.0, 1.0, 2.0]] {
            let n = newell_tensor(off, [1.0; 3]);
            assert!((n[0] + n[1] + n[2]).abs() < 1e-12, "{off:?} {n:?}");
        }
    }

    #[test]
    fn newell_approaches_dipole() {
        for cells in [8.0, 16.0, 24.0] {
            let r = [cells * 0.8, cells * 0.5, cells * 0.33];
            let a = newell_tensor(r, [1.0; 3]);
            let b = dipole_tensor(r, [1.0; 3]);
            let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                let rel = (x - y).abs() / scale;
                assert!(rel < 2e-4, "{cells}: {x} vs {y} ({rel:e})");
            }
        }
    }

    #[test]
    fn off_diagonal_sign_matches_dipole() {
        let a = newell_tensor([2.0, 3.0, 1.0], [1.0; 3]);
        let b = dipole_tensor([2.0, 3.0, 1.0], [1.0; 3]);
        for k in 3..6 {
            assert_eq!(a[k].signum(), b[k].signum());
        }
    }
}
