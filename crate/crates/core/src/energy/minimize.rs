use rayon::prelude::*;

use crate::linalg::{axpy, dot, norm, normalize, scale, sub, Vec3};
use crate::Result;

use super::{Evaluator, MagnetizationField};

/// Projected gradient descent parameters.
///
/// The step is applied to the gradient divided by the voxel volume, so
/// `step_size` does not depend on the grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MinimizeOptions {
    pub steps: usize,
    pub step_size: f64,
    /// Stop when `|E_k - E_{k+1}| <= rel_tol * |E_k|`.
    pub rel_tol: f64,
}

impl MinimizeOptions {
    pub fn new(steps: usize, step_size: f64) -> Self {
        MinimizeOptions {
            steps,
            step_size,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    pub field: MagnetizationField,
    /// Total energy of every accepted iterate, starting with `m0`.
    pub trace: Vec<f64>,
    pub accepted_steps: usize,
}

/// Halvings of the step before giving up on an iteration.
const MAX_BACKTRACK: usize = 60;

/// `m <- normalize(m - tau (g - (g.m) m))` with backtracking on increase.
/// Returns the best iterate found; the trace is non-increasing.
pub fn minimize(eval: &Evaluator, m0: &MagnetizationField, opts: MinimizeOptions) -> Result<MinimizeResult> {
    let grid = *m0.grid();
    let inv_v = 1.0 / grid.voxel_volume();
    let mut m = m0.values().to_vec();
    let mut energy = eval.energy(&m)?.total;
    let mut trace = vec![energy];
    let mut tau = opts.step_size;
    let mut accepted = 0;

    for _ in 0..opts.steps {
        let g = eval.gradient(&m)?;
        let tangent: Vec<Vec3> = g
            .par_iter()
            .zip(&m)
            .map(|(g, m)| scale(sub(*g, scale(*m, dot(*g, *m))), inv_v))
            .collect();
        if tangent.iter().all(|t| norm(*t) == 0.0) {
            break;
        }
        let mut step = None;
        for _ in 0..MAX_BACKTRACK {
            let candidate: Vec<Vec3> = m
                .par_iter()
                .zip(&tangent)
                .map(|(m, t)| normalize(axpy(*m, -tau, *t)).unwrap_or(*m))
                .collect();
            let e = eval.energy(&candidate)?.total;
            if e <= energy {
                step = Some((candidate, e));
                break;
            }
            tau *= 0.5;
        }
        let Some((candidate, e)) = step else { break };
        let change = (energy - e).abs();
        let scale_e = energy.abs().max(f64::MIN_POSITIVE);
        m = candidate;
        energy = e;
        trace.push(e);
        accepted += 1;
        if change <= opts.rel_tol * scale_e {
            break;
        }
    }
    Ok(MinimizeResult {
        field: MagnetizationField::new(grid, m)?,
        trace,
        accepted_steps: accepted,
    })
}
