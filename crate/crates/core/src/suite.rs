//! Cell-level verification suite: boundary-condition ladder on tiled cubes,
//! tangential decoupling, and the structural invariants of the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cellsolve::{
    dirichlet_cell_value, g_hom_density, homogenize, periodic_tiled_value, tangential_corrector_check, HomogenizedModel,
};
use crate::energy::random_direction;
use crate::linalg::{asymmetry, frobenius, sym_eigenvalues, Mat3};
use crate::material::{cell_averages, UnitCellMaterial};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub resolution: usize,
    pub tol: f64,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub tol: f64,
    pub seed: u64,
    /// Random `(s, xi)` pairs for the tangential check.
    pub pairs: usize,
    /// Cells finer than this are resampled before the tiled solves, which
    /// run on `4 N` voxels per axis.
    pub max_tiled_resolution: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: 1e-8,
            seed: 0,
            pairs: 5,
            max_tiled_resolution: 16,
        }
    }
}

/// A tangent pair: unit `s` and `xi` with `xi^T s = 0`.
pub fn random_tangent_pair(rng: &mut impl Rng) -> ([f64; 3], Mat3) {
    let s = random_direction(rng);
    let mut xi = [[0.0; 3]; 3];
    for row in xi.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    // project every column onto the plane orthogonal to s
    for j in 0..3 {
        let c: f64 = (0..3).map(|i| xi[i][j] * s[i]).sum();
        for i in 0..3 {
            xi[i][j] -= c * s[i];
        }
    }
    (s, xi)
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

/// Structural checks on an assembled model.
pub fn model_invariants(cell: &UnitCellMaterial, model: &HomogenizedModel) -> Vec<Check> {
    let tol = model.diagnostics.tol;
    let avg = cell_averages(cell);
    let a = &model.a_hom;
    let ev = sym_eigenvalues(a);
    let delta = 10.0 * tol * avg.mean_a;
    let b = &model.b_demag;
    let bev = sym_eigenvalues(b);
    let trace_b = b[0][0] + b[1][1] + b[2][2];
    let constant_ms = cell.phases().iter().all(|p| p.m_s == cell.phases()[0].m_s)
        || cell.phase_fractions().iter().filter(|f| **f > 0.0).count() == 1;
    vec![
        check(
            "a_hom_symmetric",
            asymmetry(a) <= 1e-10 * frobenius(a),
            format!("asymmetry {:.3e}", asymmetry(a)),
        ),
        check(
            "voigt_reuss",
            avg.harm_a - delta <= ev[0] && ev[2] <= avg.mean_a + delta,
            format!(
                "harm_a {:.6} <= [{:.6}, {:.6}] <= mean_a {:.6}",
                avg.harm_a, ev[0], ev[2], avg.mean_a
            ),
        ),
        check(
            "b_demag_psd",
            bev[0] >= -1e-10 * trace_b.abs().max(f64::MIN_POSITIVE) && (!constant_ms || frobenius(b) <= tol),
            format!("eigenvalues {bev:?}"),
        ),
    ]
}

/// Runs the full suite on a cell.
pub fn verify_cell(cell: &UnitCellMaterial, opts: VerifyOptions) -> Result<VerifyReport> {
    let model = homogenize(cell, opts.tol)?;
    let mut checks = model_invariants(cell, &model);

    let coarse = (cell.resolution() > opts.max_tiled_resolution)
        .then(|| cell.resample(opts.max_tiled_resolution))
        .transpose()?;
    let (tiled_cell, tiled_a) = match &coarse {
        Some(c) => (c, homogenize(c, opts.tol)?.a_hom),
        None => (cell, model.a_hom),
    };
    let xi = [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
    let periodic = periodic_tiled_value(tiled_cell, &xi, 1, opts.tol)?;
    let values = [1, 2, 4]
        .iter()
        .map(|&t| dirichlet_cell_value(tiled_cell, &xi, t, opts.tol))
        .collect::<Result<Vec<_>>>()?;
    let slack = 10.0 * opts.tol * periodic.max(1.0);
    let monotone = values.windows(2).all(|w| w[1] <= w[0] + slack);
    let bounded = values.iter().all(|&v| v >= periodic - slack);
    checks.push(check(
        "dirichlet_ladder",
        monotone && bounded,
        format!("t = 1, 2, 4: {values:?}; periodic value {periodic}"),
    ));
    checks.push(check(
        "periodic_value_matches_model",
        (periodic - g_hom_density(&tiled_a, &xi)).abs() <= slack,
        format!("periodic {periodic}"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.pairs {
        let (s, xi) = random_tangent_pair(&mut rng);
        worst = worst.max(tangential_corrector_check(cell, s, &xi, opts.tol)?);
    }
    checks.push(check(
        "tangential_defect",
        worst <= 10.0 * opts.tol,
        format!("largest defect {worst:.3e} over {} pairs", opts.pairs),
    ));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        resolution: cell.resolution(),
        tol: opts.tol,
        seed: opts.seed,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{make_structured, Axis, Geometry, Phase};

    #[test]
    fn tangent_pairs_satisfy_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (s, xi) = random_tangent_pair(&mut rng);
            for j in 0..3 {
                let c: f64 = (0..3).map(|i| xi[i][j] * s[i]).sum();
                assert!(c.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn laminate_passes() {
        let cell = make_structured(
            &Geometry::Laminate {
                normal: Axis::X,
                fractions: vec![0.5, 0.5],
            },
            vec![Phase::new(1.0, 1.0), Phase::new(4.0, 0.0)],
            8,
        )
        .unwrap();
        let report = verify_cell(&cell, VerifyOptions::default()).unwrap();
        assert!(report.pass, "{report:#?}");
    }
}
