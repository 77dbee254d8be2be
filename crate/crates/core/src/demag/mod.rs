//! Open-boundary stray field `h_d[m] = grad u_m`, `Laplace u_m = -div(m chi)`,
//! of a voxelized moment density.
//!
//! The field is the discrete convolution of the moment with the cell-averaged
//! demagnetizing tensor, `h_i = -sum_j N(i - j) m_j`, evaluated by FFT after
//! zero-padding every axis to twice its length. Kernels are cached per grid.

mod fft;
mod grid;
pub mod kernel;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

pub use grid::{DomainGrid, VectorDomainField};

use crate::linalg::{dot_fields, Vec3};
use crate::{Error, Result};
use fft::Fft3;

/// Default ceiling on the stray-field working set.
pub const DEFAULT_MEMORY_BUDGET_MIB: usize = 4096;

static MEMORY_BUDGET_MIB: AtomicUsize = AtomicUsize::new(DEFAULT_MEMORY_BUDGET_MIB);

/// Sets the memory ceiling checked before building a kernel.
pub fn set_memory_budget_mib(mib: usize) {
    MEMORY_BUDGET_MIB.store(mib, Ordering::Relaxed);
}

pub fn memory_budget_mib() -> usize {
    MEMORY_BUDGET_MIB.load(Ordering::Relaxed)
}

/// Estimated bytes for one padded grid: six real kernel spectra, three
/// complex moment buffers and one transpose scratch.
fn working_set_bytes(res: [usize; 3]) -> usize {
    let padded: usize = res.iter().map(|n| 2 * n).product();
    padded * (6 * 8 + 4 * 16)
}

/// FFT-ready demagnetizing kernel for one grid.
pub struct DemagKernel {
    resolution: [usize; 3],
    pitch: [f64; 3],
    padded: [usize; 3],
    /// Real spectra of `xx, yy, zz, xy, xz, yz`. The tensor has definite
    /// parity along every axis, so these transforms are real.
    spectra: [Vec<f64>; 6],
    forward: Fft3,
    inverse: Fft3,
}

impl DemagKernel {
    pub fn build(grid: &DomainGrid) -> Self {
        let res = grid.resolution();
        let pitch = grid.pitch();
        let padded = res.map(|n| 2 * n);
        let [px, py, pz] = padded;
        let total = px * py * pz;
        let [nx, ny, nz] = res;

        // nonnegative-offset octant
        let octant: Vec<[f64; 6]> = (0..nx * ny * nz)
            .into_par_iter()
            .map(|idx| {
                let a = idx % nx;
                let b = (idx / nx) % ny;
                let c = idx / (nx * ny);
                kernel::cell_tensor([a as i64, b as i64, c as i64], pitch)
            })
            .collect();

        let signed = |o: usize, n: usize, p: usize| -> Option<(usize, f64)> {
            if o < n {
                Some((o, if o == 0 { 0.0 } else { 1.0 }))
            } else if o > p - n {
                Some((p - o, -1.0))
            } else {
                None
            }
        };

        let forward = Fft3::new(padded, FftDirection::Forward);
        let inverse = Fft3::new(padded, FftDirection::Inverse);

        let spectra: Vec<Vec<f64>> = (0..6)
            .map(|comp| {
                let mut buf = vec![Complex64::default(); total];
                buf.par_chunks_mut(px * py).enumerate().for_each(|(oz, plane)| {
                    let Some((c, sz)) = signed(oz, nz, pz) else { return };
                    for oy in 0..py {
                        let Some((b, sy)) = signed(oy, ny, py) else { continue };
                        for ox in 0..px {
                            let Some((a, sx)) = signed(ox, nx, px) else { continue };
                            let t = octant[(c * ny + b) * nx + a];
                            // parity: diagonal even, xy odd in x,y, xz odd in x,z, yz odd in y,z
                            let sign = |s: f64| if s == 0.0 { 0.0 } else { s };
                            let v = match comp {
                                0..=2 => t[comp],
                                3 => sign(sx) * sign(sy) * t[3],
                                4 => sign(sx) * sign(sz) * t[4],
                                _ => sign(sy) * sign(sz) * t[5],
                            };
                            plane[oy * px + ox] = Complex64::new(v, 0.0);
                        }
                    }
                });
                forward.process(&mut buf);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect();
        let spectra: [Vec<f64>; 6] = spectra.try_into().expect("six components");

        DemagKernel {
            resolution: res,
            pitch,
            padded,
            spectra,
            forward,
            inverse,
        }
    }

    pub fn matches(&self, grid: &DomainGrid) -> bool {
        self.resolution == grid.resolution() && self.pitch == grid.pitch()
    }

    /// `h = -N * moment` on the unpadded grid.
    pub fn apply(&self, moment: &[Vec3]) -> Vec<Vec3> {
        let [nx, ny, nz] = self.resolution;
        let [px, py, _] = self.padded;
        assert_eq!(moment.len(), nx * ny * nz);
        let total = self.forward.len();

        let mut bufs: Vec<Vec<Complex64>> = (0..3)
            .into_par_iter()
            .map(|c| {
                let mut b = vec![Complex64::default(); total];
                for k in 0..nz {
                    for j in 0..ny {
                        let src = (k * ny + j) * nx;
                        let dst = (k * py + j) * px;
                        for i in 0..nx {
                            b[dst + i] = Complex64::new(moment[src + i][c], 0.0);
                        }
                    }
                }
                b
            })
            .collect();
        for b in bufs.iter_mut() {
            self.forward.process(b);
        }
        {
            let [bx, by, bz] = &mut bufs[..] else { unreachable!() };
            let s = &self.spectra;
            bx.par_iter_mut()
                .zip(by.par_iter_mut())
                .zip(bz.par_iter_mut())
                .enumerate()
                .for_each(|(q, ((x, y), z))| {
                    let (mx, my, mz) = (*x, *y, *z);
                    let (xx, yy, zz, xy, xz, yz) = (s[0][q], s[1][q], s[2][q], s[3][q], s[4][q], s[5][q]);
                    *x = -(mx * xx + my * xy + mz * xz);
                    *y = -(mx * xy + my * yy + mz * yz);
                    *z = -(mx * xz + my * yz + mz * zz);
                });
        }
        for b in bufs.iter_mut() {
            self.inverse.process(b);
        }
        let norm = 1.0 / total as f64;
        let mut out = vec![[0.0; 3]; nx * ny * nz];
        out.par_chunks_mut(nx * ny).enumerate().for_each(|(k, plane)| {
            for j in 0..ny {
                for i in 0..nx {
                    let q = (k * py + j) * px + i;
                    plane[j * nx + i] = [bufs[0][q].re * norm, bufs[1][q].re * norm, bufs[2][q].re * norm];
                }
            }
        });
        out
    }
}

type CacheKey = ([usize; 3], [u64; 3]);
const CACHE_CAPACITY: usize = 4;

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<DemagKernel>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<DemagKernel>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached kernel for `grid`, checked against the memory budget.
pub fn kernel_for(grid: &DomainGrid) -> Result<Arc<DemagKernel>> {
    let needed = working_set_bytes(grid.resolution());
    let budget = memory_budget_mib();
    if needed > budget << 20 {
        return Err(Error::MemoryBudget {
            voxels: grid.len(),
            needed_mib: needed >> 20,
            budget_mib: budget,
        });
    }
    let key = (grid.resolution(), grid.pitch().map(f64::to_bits));
    let mut map = cache().lock().expect("kernel cache poisoned");
    if let Some(k) = map.get(&key) {
        return Ok(Arc::clone(k));
    }
    if map.len() >= CACHE_CAPACITY {
        map.clear();
    }
    let kernel = Arc::new(DemagKernel::build(grid));
    map.insert(key, Arc::clone(&kernel));
    Ok(kernel)
}

/// Stray field of the full moment `M(x) m(x)` (magnitude included).
pub fn stray_field(moment: &VectorDomainField) -> Result<VectorDomainField> {
    let kernel = kernel_for(moment.grid())?;
    let h = kernel.apply(moment.values());
    VectorDomainField::new(*moment.grid(), h)
}

/// `-(mu0 / 2) sum h_d[moment] . moment * voxel volume`.
pub fn magnetostatic_energy(moment: &VectorDomainField, mu0: f64) -> Result<f64> {
    let h = stray_field(moment)?;
    Ok(self_energy(h.values(), moment.values(), moment.grid(), mu0))
}

pub(crate) fn self_energy(h: &[Vec3], moment: &[Vec3], grid: &DomainGrid, mu0: f64) -> f64 {
    -0.5 * mu0 * dot_fields(h, moment) * grid.voxel_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn uniform(grid: DomainGrid, m: Vec3) -> VectorDomainField {
        VectorDomainField::new(grid, vec![m; grid.len()]).unwrap()
    }

    #[test]
    fn zero_moment_zero_field() {
        let g = DomainGrid::cube(1.0, 4);
        let h = stray_field(&VectorDomainField::zeros(g)).unwrap();
        assert!(h.values().iter().all(|v| v.iter().all(|c| *c == 0.0)));
        assert_eq!(magnetostatic_energy(&VectorDomainField::zeros(g), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_voxel_self_field() {
        let g = DomainGrid::cube(1.0, 1);
        let h = stray_field(&uniform(g, [0.0, 0.0, 1.0])).unwrap();
        assert!((h.values()[0][2] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cube_average_at_16() {
        let g = DomainGrid::cube(1.0, 16);
        let h = stray_field(&uniform(g, [0.0, 0.0, 1.0])).unwrap();
        let avg = -h.values().iter().map(|v| v[2]).sum::<f64>() / g.len() as f64;
        assert!((avg - 1.0 / 3.0).abs() < 1e-6, "{avg}");
    }

    #[test]
    fn reciprocity_small() {
        let g = DomainGrid::new([1.0, 0.5, 0.75], [6, 3, 5]).unwrap();
        let f = |s: f64| {
            VectorDomainField::new(
                g,
                (0..g.len())
                    .map(|i| {
                        let x = i as f64 * s;
                        [x.sin(), (1.3 * x).cos(), (0.7 * x).sin()]
                    })
                    .collect(),
            )
            .unwrap()
        };
        let (u, v) = (f(0.37), f(1.91));
        let hu = stray_field(&u).unwrap();
        let hv = stray_field(&v).unwrap();
        let a: f64 = hu.values().iter().zip(v.values()).map(|(h, m)| dot(*h, *m)).sum();
        let b: f64 = hv.values().iter().zip(u.values()).map(|(h, m)| dot(*h, *m)).sum();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{a} {b}");
    }

    #[test]
    fn budget_is_enforced() {
        let g = DomainGrid::cube(1.0, 4096);
        assert!(matches!(kernel_for(&g), Err(Error::MemoryBudget { .. })));
    }
}
