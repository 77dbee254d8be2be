//! Fine-scale and homogenized Gibbs-Landau energies on sphere-valued fields.
//!
//! Fine scale, for a cell sampled at period `eps`:
//!
//! ```text
//! G_eps(m) = sum_faces a_f |D m / h|^2 V + sum_x phi_an(x/eps, m) V
//!          - (mu0/2) sum_x h_d[M m] . M m V - mu0 sum_x h_a . M m V
//! ```
//!
//! Homogenized:
//!
//! ```text
//! G_hom(m) = sum_x sum_i (A_hom grad m_i) . grad m_i V + sum_x <phi_an>(m) V
//!          + (mu0/2) [ -<M>^2 sum_x h_d[m] . m + sum_x (B m) . m ] V
//!          - mu0 <M> sum_x h_a . m V
//! ```
//!
//! Differences are taken on interior faces only; `Omega` is not periodic
//! and no boundary condition is imposed on `m`. Face coefficients of the
//! fine exchange are harmonic averages of the adjacent voxels.

mod field;
mod minimize;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cellsolve::{AnisotropyAverage, HomogenizedModel};
use crate::demag::{kernel_for, DemagKernel, DomainGrid};
use crate::linalg::{add, axpy, dot, dot_fields, mat_vec, scale, sub, sum_indexed, Mat3, Vec3, ZERO3};
use crate::material::{periods_per_axis, sample_to_domain, AnisotropySpec, UnitCellMaterial};
use crate::{Error, Result};

pub use field::{MagnetizationField, UNIT_TOL};
pub use minimize::{minimize, MinimizeOptions, MinimizeResult};

pub(crate) use field::random_direction;

/// Smallest number of domain voxels per period accepted by the fine energy.
pub const MIN_VOXELS_PER_PERIOD: usize = 4;

/// Spatially constant applied field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppliedField {
    pub h_a: Vec3,
}

impl AppliedField {
    pub fn new(h_a: Vec3) -> Result<Self> {
        if h_a.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("applied field must be finite".into()));
        }
        Ok(AppliedField { h_a })
    }

    pub const ZERO: AppliedField = AppliedField { h_a: ZERO3 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Fine { epsilon: f64 },
    Homogenized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub anisotropy: f64,
    pub magnetostatic: f64,
    pub zeeman: f64,
    pub total: f64,
    pub provenance: Provenance,
}

/// Which energy terms an [`Evaluator`] includes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub exchange: bool,
    pub anisotropy: bool,
    pub magnetostatic: bool,
    pub zeeman: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        exchange: true,
        anisotropy: true,
        magnetostatic: true,
        zeeman: true,
    };
    pub const NONE: Terms = Terms {
        exchange: false,
        anisotropy: false,
        magnetostatic: false,
        zeeman: false,
    };
}

/// Energy functional selector.
#[derive(Clone, Copy, Debug)]
pub enum EnergyModel<'a> {
    Fine { cell: &'a UnitCellMaterial, epsilon: f64 },
    Homogenized(&'a HomogenizedModel),
}

/// `kappa * (1 - (u.m)^2)` or `kappa * sum_i [(u_i.m)^2 - (u_i.m)^4]`.
pub fn anisotropy_density(spec: &AnisotropySpec, m: Vec3) -> f64 {
    spec.density(m)
}

enum Kind {
    Fine {
        epsilon: f64,
        /// Forward-face exchange coefficients; zero on the domain boundary.
        faces: [Vec<f64>; 3],
        ms: Vec<f64>,
        phase: Vec<u16>,
        specs: Vec<AnisotropySpec>,
    },
    Homogenized {
        a: Mat3,
        b: Mat3,
        mean_ms: f64,
        anisotropy: AnisotropyAverage,
    },
}

/// An energy functional prepared for one domain grid.
///
/// [`Evaluator::energy`] and [`Evaluator::gradient`] accept arbitrary
/// vectors, not only unit ones, so the gradient can be checked against
/// finite differences of the same expression.
pub struct Evaluator {
    grid: DomainGrid,
    kind: Kind,
    kernel: Option<Arc<DemagKernel>>,
    terms: Terms,
    mu0: f64,
    h_a: Vec3,
}

impl Evaluator {
    pub fn new(model: EnergyModel<'_>, grid: &DomainGrid, h_a: AppliedField, mu0: f64) -> Result<Self> {
        if !(mu0.is_finite() && mu0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("mu0 = {mu0} must be nonnegative")));
        }
        let kind = match model {
            EnergyModel::Fine { cell, epsilon } => fine_kind(cell, epsilon, grid)?,
            EnergyModel::Homogenized(model) => {
                let finite = model
                    .a_hom
                    .iter()
                    .chain(&model.b_demag)
                    .flatten()
                    .all(|v| v.is_finite())
                    && model.mean_ms.is_finite();
                if !finite {
                    return Err(Error::Validation("homogenized model has non-finite entries".into()));
                }
                Kind::Homogenized {
                    a: model.a_hom,
                    b: model.b_demag,
                    mean_ms: model.mean_ms,
                    anisotropy: model.anisotropy.clone(),
                }
            }
        };
        Ok(Evaluator {
            grid: *grid,
            kind,
            kernel: None,
            terms: Terms::ALL,
            mu0,
            h_a: AppliedField::new(h_a.h_a)?.h_a,
        })
        .and_then(Evaluator::with_kernel)
    }

    fn with_kernel(mut self) -> Result<Self> {
        let needs = self.terms.magnetostatic
            && match &self.kind {
                Kind::Fine { ms, .. } => ms.iter().any(|&m| m != 0.0),
                Kind::Homogenized { mean_ms, .. } => *mean_ms != 0.0,
            };
        self.kernel = if needs { Some(kernel_for(&self.grid)?) } else { None };
        Ok(self)
    }

    /// Restricts evaluation to a subset of the terms.
    pub fn with_terms(mut self, terms: Terms) -> Result<Self> {
        self.terms = terms;
        self.with_kernel()
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            Kind::Fine { epsilon, .. } => Provenance::Fine { epsilon },
            Kind::Homogenized { .. } => Provenance::Homogenized,
        }
    }

    fn check_len(&self, m: &[Vec3]) -> Result<()> {
        if m.len() != self.grid.len() {
            return Err(Error::ResolutionMismatch {
                expected: self.grid.len(),
                got: m.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, m: &[Vec3]) -> Result<EnergyBreakdown> {
        self.check_len(m)?;
        let t = self.terms;
        let exchange = if t.exchange { self.exchange(m) } else { 0.0 };
        let anisotropy = if t.anisotropy { self.anisotropy(m) } else { 0.0 };
        let magnetostatic = if t.magnetostatic { self.magnetostatic(m) } else { 0.0 };
        let zeeman = if t.zeeman { self.zeeman(m) } else { 0.0 };
        Ok(EnergyBreakdown {
            exchange,
            anisotropy,
            magnetostatic,
            zeeman,
            total: exchange + anisotropy + magnetostatic + zeeman,
            provenance: self.provenance(),
        })
    }

    /// Euclidean gradient of the total with respect to the voxel values.
    pub fn gradient(&self, m: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check_len(m)?;
        let mut g = vec![ZERO3; m.len()];
        let t = self.terms;
        if t.exchange {
            self.exchange_gradient(m, &mut g);
        }
        if t.anisotropy {
            self.anisotropy_gradient(m, &mut g);
        }
        if t.magnetostatic {
            self.magnetostatic_gradient(m, &mut g);
        }
        if t.zeeman {
            self.zeeman_gradient(&mut g);
        }
        Ok(g)
    }

    fn neighbor(&self, i: usize, d: usize) -> usize {
        i + self.grid.stride(d)
    }

    /// Forward-face coefficient along `d` at voxel `i` (zero on the boundary).
    fn face_coeff(&self, i: usize, d: usize) -> f64 {
        match &self.kind {
            Kind::Fine { faces, .. } => faces[d][i],
            Kind::Homogenized { a, .. } => {
                if self.grid.coords(i)[d] + 1 < self.grid.resolution()[d] {
                    a[d][d]
                } else {
                    0.0
                }
            }
        }
    }

    fn has_face(&self, i: usize, d: usize, forward: bool) -> bool {
        let c = self.grid.coords(i)[d];
        if forward {
            c + 1 < self.grid.resolution()[d]
        } else {
            c > 0
        }
    }

    fn exchange(&self, m: &[Vec3]) -> f64 {
        let inv_h2 = self.grid.pitch().map(|h| 1.0 / (h * h));
        let faces = sum_indexed(m.len(), |i| {
            (0..3)
                .map(|d| {
                    let c = self.face_coeff(i, d);
                    if c == 0.0 {
                        return 0.0;
                    }
                    let e = sub(m[self.neighbor(i, d)], m[i]);
                    c * dot(e, e) * inv_h2[d]
                })
                .sum()
        });
        let cross = match &self.kind {
            Kind::Homogenized { a, .. } if has_off_diagonal(a) => sum_indexed(m.len(), |i| {
                let g = self.centered_gradient(m, i);
                let mut s = 0.0;
                for d in 0..3 {
                    for e in 0..3 {
                        if d != e {
                            s += a[d][e] * dot(g[d], g[e]);
                        }
                    }
                }
                s
            }),
            _ => 0.0,
        };
        (faces + cross) * self.grid.voxel_volume()
    }

    /// Averaged one-sided differences; a missing boundary face counts as zero.
    fn centered_gradient(&self, m: &[Vec3], i: usize) -> [Vec3; 3] {
        let h = self.grid.pitch();
        [0, 1, 2].map(|d| {
            let s = self.grid.stride(d);
            let mut g = ZERO3;
            if self.has_face(i, d, true) {
                g = add(g, sub(m[i + s], m[i]));
            }
            if self.has_face(i, d, false) {
                g = add(g, sub(m[i], m[i - s]));
            }
            scale(g, 0.5 / h[d])
        })
    }

    fn exchange_gradient(&self, m: &[Vec3], g: &mut [Vec3]) {
        let v = self.grid.voxel_volume();
        let inv_h2 = self.grid.pitch().map(|h| 1.0 / (h * h));
        g.par_iter_mut().enumerate().for_each(|(i, gi)| {
            for d in 0..3 {
                let s = self.grid.stride(d);
                let cp = self.face_coeff(i, d);
                if cp != 0.0 {
                    *gi = axpy(*gi, 2.0 * v * cp * inv_h2[d], sub(m[i], m[i + s]));
                }
                if self.has_face(i, d, false) {
                    let cm = self.face_coeff(i - s, d);
                    *gi = axpy(*gi, 2.0 * v * cm * inv_h2[d], sub(m[i], m[i - s]));
                }
            }
        });
        let Kind::Homogenized { a, .. } = &self.kind else {
            return;
        };
        if !has_off_diagonal(a) {
            return;
        }
        // H_d = sum_{e != d} A_de G_e, then g += 2 V sum_d G_d^T H_d
        let hfield: Vec<[Vec3; 3]> = (0..m.len())
            .into_par_iter()
            .map(|i| {
                let gr = self.centered_gradient(m, i);
                [0, 1, 2].map(|d| {
                    (0..3)
                        .filter(|&e| e != d)
                        .fold(ZERO3, |acc, e| axpy(acc, a[d][e], gr[e]))
                })
            })
            .collect();
        let h = self.grid.pitch();
        g.par_iter_mut().enumerate().for_each(|(j, gj)| {
            for d in 0..3 {
                let s = self.grid.stride(d);
                let w = v / h[d];
                let fwd = self.has_face(j, d, true);
                let back = self.has_face(j, d, false);
                let own = (back as i32 - fwd as i32) as f64;
                let mut acc = scale(hfield[j][d], own);
                if back {
                    acc = add(acc, hfield[j - s][d]);
                }
                if fwd {
                    acc = sub(acc, hfield[j + s][d]);
                }
                *gj = axpy(*gj, w, acc);
            }
        });
    }

    fn anisotropy(&self, m: &[Vec3]) -> f64 {
        let v = self.grid.voxel_volume();
        match &self.kind {
            Kind::Fine { phase, specs, .. } => sum_indexed(m.len(), |i| specs[phase[i] as usize].density(m[i])) * v,
            Kind::Homogenized { anisotropy, .. } => sum_indexed(m.len(), |i| anisotropy.density(m[i])) * v,
        }
    }

    fn anisotropy_gradient(&self, m: &[Vec3], g: &mut [Vec3]) {
        let v = self.grid.voxel_volume();
        g.par_iter_mut().enumerate().for_each(|(i, gi)| {
            let d = match &self.kind {
                Kind::Fine { phase, specs, .. } => specs[phase[i] as usize].density_gradient(m[i]),
                Kind::Homogenized { anisotropy, .. } => anisotropy.density_gradient(m[i]),
            };
            *gi = axpy(*gi, v, d);
        });
    }

    /// Moment fed to the stray-field solver and its prefactor in the energy.
    fn demag_input(&self, m: &[Vec3]) -> (Vec<Vec3>, f64) {
        match &self.kind {
            Kind::Fine { ms, .. } => (m.par_iter().zip(ms).map(|(v, s)| scale(*v, *s)).collect(), 1.0),
            Kind::Homogenized { mean_ms, .. } => (m.to_vec(), mean_ms * mean_ms),
        }
    }

    fn magnetostatic(&self, m: &[Vec3]) -> f64 {
        let v = self.grid.voxel_volume();
        let self_term = match &self.kernel {
            Some(kernel) => {
                let (moment, weight) = self.demag_input(m);
                let h = kernel.apply(&moment);
                -weight * dot_fields(&h, &moment)
            }
            None => 0.0,
        };
        let corrector = match &self.kind {
            Kind::Homogenized { b, .. } => sum_indexed(m.len(), |i| dot(mat_vec(b, m[i]), m[i])),
            Kind::Fine { .. } => 0.0,
        };
        0.5 * self.mu0 * (self_term + corrector) * v
    }

    fn magnetostatic_gradient(&self, m: &[Vec3], g: &mut [Vec3]) {
        let v = self.grid.voxel_volume();
        if let Some(kernel) = &self.kernel {
            let (moment, weight) = self.demag_input(m);
            let h = kernel.apply(&moment);
            let c = -self.mu0 * weight * v;
            match &self.kind {
                Kind::Fine { ms, .. } => g
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(i, gi)| *gi = axpy(*gi, c * ms[i], h[i])),
                Kind::Homogenized { .. } => g.par_iter_mut().zip(&h).for_each(|(gi, hi)| *gi = axpy(*gi, c, *hi)),
            }
        }
        if let Kind::Homogenized { b, .. } = &self.kind {
            let c = self.mu0 * v;
            g.par_iter_mut()
                .zip(m)
                .for_each(|(gi, mi)| *gi = axpy(*gi, c, mat_vec(b, *mi)));
        }
    }

    fn zeeman(&self, m: &[Vec3]) -> f64 {
        let v = self.grid.voxel_volume();
        let s = match &self.kind {
            Kind::Fine { ms, .. } => sum_indexed(m.len(), |i| ms[i] * dot(self.h_a, m[i])),
            Kind::Homogenized { mean_ms, .. } => mean_ms * sum_indexed(m.len(), |i| dot(self.h_a, m[i])),
        };
        -self.mu0 * s * v
    }

    fn zeeman_gradient(&self, g: &mut [Vec3]) {
        let c = -self.mu0 * self.grid.voxel_volume();
        g.par_iter_mut().enumerate().for_each(|(i, gi)| {
            let ms = match &self.kind {
                Kind::Fine { ms, .. } => ms[i],
                Kind::Homogenized { mean_ms, .. } => *mean_ms,
            };
            *gi = axpy(*gi, c * ms, self.h_a);
        });
    }
}

fn has_off_diagonal(a: &Mat3) -> bool {
    a[0][1] != 0.0 || a[0][2] != 0.0 || a[1][2] != 0.0 || a[1][0] != 0.0 || a[2][0] != 0.0 || a[2][1] != 0.0
}

fn fine_kind(cell: &UnitCellMaterial, epsilon: f64, grid: &DomainGrid) -> Result<Kind> {
    let periods = periods_per_axis(grid, epsilon)?;
    if let Some(d) = (0..3).find(|&d| periods[d] < MIN_VOXELS_PER_PERIOD) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} is resolved by {} voxels along axis {d}; at least {MIN_VOXELS_PER_PERIOD} required",
            periods[d]
        )));
    }
    let coeffs = sample_to_domain(cell, grid, epsilon)?;
    let res = grid.resolution();
    let faces = [0, 1, 2].map(|d| {
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if grid.coords(i)[d] + 1 >= res[d] {
                    return 0.0;
                }
                let (l, r) = (coeffs.a[i], coeffs.a[i + grid.stride(d)]);
                if l == r {
                    l
                } else {
                    2.0 * l * r / (l + r)
                }
            })
            .collect()
    });
    Ok(Kind::Fine {
        epsilon,
        faces,
        ms: coeffs.m_s,
        phase: coeffs.phase,
        specs: cell.phases().iter().map(|p| p.anisotropy.clone()).collect(),
    })
}

/// `G_eps(m)` with the cell sampled at period `epsilon`.
pub fn energy_fine(
    cell: &UnitCellMaterial,
    epsilon: f64,
    m: &MagnetizationField,
    h_a: AppliedField,
    mu0: f64,
) -> Result<EnergyBreakdown> {
    Evaluator::new(EnergyModel::Fine { cell, epsilon }, m.grid(), h_a, mu0)?.energy(m.values())
}

/// `G_hom(m)`.
pub fn energy_hom(
    model: &HomogenizedModel,
    m: &MagnetizationField,
    h_a: AppliedField,
    mu0: f64,
) -> Result<EnergyBreakdown> {
    Evaluator::new(EnergyModel::Homogenized(model), m.grid(), h_a, mu0)?.energy(m.values())
}

/// Euclidean (unprojected) gradient of the selected discrete energy.
pub fn energy_gradient(
    model: EnergyModel<'_>,
    m: &MagnetizationField,
    h_a: AppliedField,
    mu0: f64,
) -> Result<Vec<Vec3>> {
    Evaluator::new(model, m.grid(), h_a, mu0)?.gradient(m.values())
}

/// `V sum_faces |D m / h|^2`, the discrete Dirichlet energy.
pub fn dirichlet_energy(m: &MagnetizationField) -> f64 {
    let model = HomogenizedModel::isotropic(1.0, 0.0, AnisotropySpec::None);
    Evaluator::new(EnergyModel::Homogenized(&model), m.grid(), AppliedField::ZERO, 0.0)
        .and_then(|e| {
            e.with_terms(Terms {
                exchange: true,
                ..Terms::NONE
            })
        })
        .and_then(|e| e.energy(m.values()))
        .map(|b| b.exchange)
        .expect("isotropic exchange evaluation cannot fail")
}
