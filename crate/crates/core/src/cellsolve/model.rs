use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{add, scale, Mat3, Vec3, ZERO3};
use crate::material::{cell_averages, AnisotropySpec, UnitCellMaterial};
use crate::{Error, Result};

use super::{
    assemble_a_hom, assemble_b_demag, check_tol, solve_demag_correctors, solve_exchange_correctors, CorrectorSet,
    DemagCorrectorSet,
};

/// One phase's contribution to the averaged anisotropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnisotropy {
    pub fraction: f64,
    pub spec: AnisotropySpec,
}

/// `<kappa>` and `<kappa u (x) u>` for cells without cubic phases. The
/// averaged density is `<kappa> - m . <kappa u u> m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniaxialAverage {
    pub mean_kappa: f64,
    pub mean_kappa_uu: Mat3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyAverage {
    pub phases: Vec<PhaseAnisotropy>,
    pub uniaxial: Option<UniaxialAverage>,
}

impl AnisotropyAverage {
    pub fn from_cell(cell: &UnitCellMaterial) -> Self {
        let phases: Vec<PhaseAnisotropy> = cell
            .phase_fractions()
            .into_iter()
            .zip(cell.phases())
            .filter(|(f, p)| *f > 0.0 && !matches!(p.anisotropy, AnisotropySpec::None))
            .map(|(fraction, p)| PhaseAnisotropy {
                fraction,
                spec: p.anisotropy.clone(),
            })
            .collect();
        let uniaxial = phases
            .iter()
            .all(|p| matches!(p.spec, AnisotropySpec::Uniaxial { .. }))
            .then(|| {
                let mut avg = UniaxialAverage {
                    mean_kappa: 0.0,
                    mean_kappa_uu: [[0.0; 3]; 3],
                };
                for p in &phases {
                    if let AnisotropySpec::Uniaxial { kappa, axis } = p.spec {
                        avg.mean_kappa += p.fraction * kappa;
                        for (r, row) in avg.mean_kappa_uu.iter_mut().enumerate() {
                            for (c, v) in row.iter_mut().enumerate() {
                                *v += p.fraction * kappa * axis[r] * axis[c];
                            }
                        }
                    }
                }
                avg
            });
        AnisotropyAverage { phases, uniaxial }
    }

    /// `<phi_an(., m)>_Q`.
    pub fn density(&self, m: Vec3) -> f64 {
        self.phases.iter().map(|p| p.fraction * p.spec.density(m)).sum()
    }

    pub fn density_gradient(&self, m: Vec3) -> Vec3 {
        self.phases
            .iter()
            .fold(ZERO3, |g, p| add(g, scale(p.spec.density_gradient(m), p.fraction)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub resolution: usize,
    pub tol: f64,
    pub exchange_residuals: [f64; 3],
    pub exchange_iterations: [usize; 3],
    pub demag_residuals: [f64; 3],
    pub demag_iterations: [usize; 3],
}

/// Effective coefficients of one cell. Serializes with a fixed field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedModel {
    pub a_hom: Mat3,
    pub b_demag: Mat3,
    pub mean_ms: f64,
    pub anisotropy: AnisotropyAverage,
    pub diagnostics: Diagnostics,
}

impl HomogenizedModel {
    pub fn from_parts(
        cell: &UnitCellMaterial,
        exchange: &CorrectorSet,
        demag: &DemagCorrectorSet,
        tol: f64,
    ) -> Result<Self> {
        Ok(HomogenizedModel {
            a_hom: assemble_a_hom(cell, exchange)?,
            b_demag: assemble_b_demag(cell, &demag.w)?,
            mean_ms: cell_averages(cell).mean_ms,
            anisotropy: AnisotropyAverage::from_cell(cell),
            diagnostics: Diagnostics {
                resolution: cell.resolution(),
                tol,
                exchange_residuals: exchange.residual_norms,
                exchange_iterations: exchange.iterations,
                demag_residuals: demag.residual_norms,
                demag_iterations: demag.iterations,
            },
        })
    }

    /// Model of a single-phase material with the given constants.
    pub fn isotropic(a: f64, ms: f64, anisotropy: AnisotropySpec) -> Self {
        HomogenizedModel {
            a_hom: [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]],
            b_demag: [[0.0; 3]; 3],
            mean_ms: ms,
            anisotropy: AnisotropyAverage {
                uniaxial: None,
                phases: vec![PhaseAnisotropy {
                    fraction: 1.0,
                    spec: anisotropy,
                }],
            },
            diagnostics: Diagnostics {
                resolution: 0,
                tol: 0.0,
                exchange_residuals: [0.0; 3],
                exchange_iterations: [0; 3],
                demag_residuals: [0.0; 3],
                demag_iterations: [0; 3],
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Solves all six cell problems and assembles the model.
pub fn homogenize(cell: &UnitCellMaterial, tol: f64) -> Result<HomogenizedModel> {
    check_tol(tol)?;
    let (exchange, demag) = rayon::join(
        || solve_exchange_correctors(cell, tol),
        || solve_demag_correctors(cell, tol),
    );
    HomogenizedModel::from_parts(cell, &exchange?, &demag?, tol)
}
