use super::UnitCellMaterial;
use crate::demag::DomainGrid;
use crate::{Error, Result};

/// Coefficient fields of `a_ex(x/eps)`, `M_s(x/eps)` and the phase index on
/// the domain voxels, in domain flat order.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainCoefficients {
    pub phase: Vec<u16>,
    pub a: Vec<f64>,
    pub m_s: Vec<f64>,
}

const ALIGN_TOL: f64 = 1e-9;

/// Domain voxels per period `eps` along each axis, or an error when `eps` is
/// not an integer multiple of the pitch.
pub fn periods_per_axis(domain: &DomainGrid, epsilon: f64) -> Result<[usize; 3]> {
    check_epsilon(epsilon)?;
    let pitch = domain.pitch();
    let mut out = [0; 3];
    for d in 0..3 {
        out[d] = aligned_period(pitch[d], epsilon).ok_or_else(|| Error::Misaligned {
            epsilon,
            reason: format!("eps / pitch along axis {d} is {}", epsilon / pitch[d]),
        })?;
    }
    Ok(out)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    Ok(())
}

fn aligned_period(pitch: f64, epsilon: f64) -> Option<usize> {
    let ratio = epsilon / pitch;
    let p = ratio.round();
    (p >= 1.0 && (ratio - p).abs() <= ALIGN_TOL * ratio.max(1.0)).then_some(p as usize)
}

/// Cell index along one axis for every domain index along that axis.
///
/// Aligned grids use exact integer arithmetic on the voxel centers; other
/// grids fall back to nearest-voxel lookup of `frac(x / eps)`.
pub(crate) fn axis_lookup(domain_n: usize, pitch: f64, epsilon: f64, cell_n: usize) -> Vec<usize> {
    match aligned_period(pitch, epsilon) {
        Some(p) => (0..domain_n).map(|i| ((2 * (i % p) + 1) * cell_n) / (2 * p)).collect(),
        None => (0..domain_n)
            .map(|i| {
                let y = ((i as f64 + 0.5) * pitch / epsilon).fract();
                ((y * cell_n as f64).floor() as usize).min(cell_n - 1)
            })
            .collect(),
    }
}

/// Periodic lookup `x -> cell(x / eps mod 1)` on every domain voxel center.
pub fn sample_to_domain(cell: &UnitCellMaterial, domain: &DomainGrid, epsilon: f64) -> Result<DomainCoefficients> {
    check_epsilon(epsilon)?;
    let n = cell.resolution();
    let [nx, ny, nz] = domain.resolution();
    let pitch = domain.pitch();
    let lx = axis_lookup(nx, pitch[0], epsilon, n);
    let ly = axis_lookup(ny, pitch[1], epsilon, n);
    let lz = axis_lookup(nz, pitch[2], epsilon, n);
    let mut phase = Vec::with_capacity(domain.len());
    for &ck in &lz {
        for &cj in &ly {
            for &ci in &lx {
                phase.push(cell.voxel_map()[cell.index(ci, cj, ck)]);
            }
        }
    }
    let a = phase.iter().map(|&p| cell.phases()[p as usize].a_ex).collect();
    let m_s = phase.iter().map(|&p| cell.phases()[p as usize].m_s).collect();
    Ok(DomainCoefficients { phase, a, m_s })
}
