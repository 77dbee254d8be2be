use serde::{Deserialize, Serialize};

use super::{Axis, Phase, UnitCellMaterial};
use crate::linalg::Vec3;
use crate::{Error, Result};

/// Test geometries realized by voxel-center membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Layers stacked along `normal`; phase `p` occupies the slab between the
    /// cumulative fractions `F_{p-1} <= y < F_p`.
    Laminate { normal: Axis, fractions: Vec<f64> },
    /// Two-phase checkerboard of period one, constant along `invariant`.
    Checkerboard { invariant: Axis },
    /// Phase 1 inside a (periodically wrapped) ball, phase 0 outside.
    SphereInclusion { radius: f64, center: Vec3 },
}

fn center_coord(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

pub fn make_structured(geometry: &Geometry, phases: Vec<Phase>, n: usize) -> Result<UnitCellMaterial> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("resolution {n} must be at least 2")));
    }
    let map: Vec<u16> = match geometry {
        Geometry::Laminate { normal, fractions } => {
            if fractions.len() != phases.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} fractions for {} phases",
                    fractions.len(),
                    phases.len()
                )));
            }
            if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
                return Err(Error::InvalidArgument("fractions must be nonnegative".into()));
            }
            let total: f64 = fractions.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("fractions sum to {total}, not 1")));
            }
            let mut cumulative = Vec::with_capacity(fractions.len());
            let mut acc = 0.0;
            for f in fractions {
                acc += f;
                cumulative.push(acc);
            }
            let last = fractions.len() - 1;
            let layer = |c: usize| -> u16 {
                let y = center_coord(c, n);
                cumulative.iter().position(|&b| y < b).unwrap_or(last) as u16
            };
            let axis = normal.index();
            voxels(n, |ijk| layer(ijk[axis]))
        }
        Geometry::Checkerboard { invariant } => {
            require_two(&phases)?;
            let inv = invariant.index();
            let (a, b) = match inv {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let half = |c: usize| (2.0 * center_coord(c, n)).floor() as usize;
            voxels(n, |ijk| ((half(ijk[a]) + half(ijk[b])) % 2) as u16)
        }
        Geometry::SphereInclusion { radius, center } => {
            require_two(&phases)?;
            if !(*radius > 0.0 && *radius <= 0.5) {
                return Err(Error::InvalidArgument(format!("radius {radius} outside (0, 0.5]")));
            }
            let r2 = radius * radius;
            voxels(n, |ijk| {
                let mut d2 = 0.0;
                for d in 0..3 {
                    let mut dx = center_coord(ijk[d], n) - center[d];
                    dx -= dx.round();
                    d2 += dx * dx;
                }
                u16::from(d2 <= r2)
            })
        }
    };
    UnitCellMaterial::new(n, phases, map)
}

fn require_two(phases: &[Phase]) -> Result<()> {
    if phases.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "geometry needs exactly 2 phases, got {}",
            phases.len()
        )));
    }
    Ok(())
}

fn voxels(n: usize, f: impl Fn([usize; 3]) -> u16) -> Vec<u16> {
    let mut map = Vec::with_capacity(n.pow(3));
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                map.push(f([i, j, k]));
            }
        }
    }
    map
}
