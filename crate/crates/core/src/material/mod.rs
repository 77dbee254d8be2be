//! Voxelized Q-periodic composite materials.
//!
//! A [`UnitCellMaterial`] is a table of [`Phase`]s plus an `N^3` map of phase
//! indices over the unit cell `Q = [0,1]^3`. Voxel `(i, j, k)` has flat index
//! `(k * N + j) * N + i` (k slowest, i fastest) everywhere in the crate, and
//! every lookup is taken modulo `N`.

mod file;
mod generate;
pub(crate) mod sample;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, Vec3};
use crate::{Error, Result};

pub use file::{
    load_cell, load_cell_unvalidated, parse_cell, parse_cell_at, parse_cell_unvalidated, save_cell, write_cell,
};
pub use generate::{make_structured, Geometry};
pub use sample::{periods_per_axis, sample_to_domain, DomainCoefficients};

/// Tolerance on unit norms and orthogonality of anisotropy frames.
pub const FRAME_TOL: f64 = 1e-12;

/// Cartesian axis of the unit cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Axis::ALL.get(i).copied()
    }
}

/// Crystal anisotropy of one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum AnisotropySpec {
    #[default]
    None,
    /// `kappa * (1 - (u.m)^2)`
    Uniaxial { kappa: f64, axis: Vec3 },
    /// `kappa * sum_i [(u_i.m)^2 - (u_i.m)^4]`
    Cubic { kappa: f64, axes: [Vec3; 3] },
}

impl AnisotropySpec {
    pub fn kappa(&self) -> f64 {
        match self {
            AnisotropySpec::None => 0.0,
            AnisotropySpec::Uniaxial { kappa, .. } | AnisotropySpec::Cubic { kappa, .. } => *kappa,
        }
    }

    /// Energy density at direction `m`. `m` is not renormalized, so the
    /// expression is a polynomial in the components of `m`.
    pub fn density(&self, m: Vec3) -> f64 {
        match self {
            AnisotropySpec::None => 0.0,
            AnisotropySpec::Uniaxial { kappa, axis } => {
                let c = dot(*axis, m);
                kappa * (1.0 - c * c)
            }
            AnisotropySpec::Cubic { kappa, axes } => {
                let mut s = 0.0;
                for u in axes {
                    let c2 = dot(*u, m).powi(2);
                    s += c2 - c2 * c2;
                }
                kappa * s
            }
        }
    }

    /// Euclidean gradient of [`density`](Self::density) with respect to `m`.
    pub fn density_gradient(&self, m: Vec3) -> Vec3 {
        match self {
            AnisotropySpec::None => [0.0; 3],
            AnisotropySpec::Uniaxial { kappa, axis } => {
                let c = dot(*axis, m);
                crate::linalg::scale(*axis, -2.0 * kappa * c)
            }
            AnisotropySpec::Cubic { kappa, axes } => {
                let mut g = [0.0; 3];
                for u in axes {
                    let c = dot(*u, m);
                    g = crate::linalg::axpy(g, kappa * (2.0 * c - 4.0 * c * c * c), *u);
                }
                g
            }
        }
    }

    /// Largest deviation of the easy-axis frame from unit / orthonormal.
    pub fn frame_defect(&self) -> f64 {
        match self {
            AnisotropySpec::None => 0.0,
            AnisotropySpec::Uniaxial { axis, .. } => (norm(*axis) - 1.0).abs(),
            AnisotropySpec::Cubic { axes, .. } => {
                let mut worst: f64 = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((dot(axes[i], axes[j]) - target).abs());
                    }
                }
                worst
            }
        }
    }
}

/// Material constants of one constituent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub a_ex: f64,
    #[serde(rename = "M_s")]
    pub m_s: f64,
    #[serde(default)]
    pub anisotropy: AnisotropySpec,
}

impl Phase {
    pub fn new(a_ex: f64, m_s: f64) -> Self {
        Phase {
            a_ex,
            m_s,
            anisotropy: AnisotropySpec::None,
        }
    }

    pub fn with_anisotropy(mut self, anisotropy: AnisotropySpec) -> Self {
        self.anisotropy = anisotropy;
        self
    }
}

/// A voxel-piecewise-constant Q-periodic material.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitCellMaterial {
    resolution: usize,
    phases: Vec<Phase>,
    voxel_map: Vec<u16>,
}

impl UnitCellMaterial {
    /// Builds a cell, checking the map length and that every index names a
    /// phase. Physical hypotheses are checked by [`validate`].
    pub fn new(resolution: usize, phases: Vec<Phase>, voxel_map: Vec<u16>) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        if phases.is_empty() {
            return Err(Error::InvalidArgument("at least one phase is required".into()));
        }
        if phases.len() > u16::MAX as usize + 1 {
            return Err(Error::InvalidArgument("too many phases".into()));
        }
        let expected = resolution.pow(3);
        if voxel_map.len() != expected {
            return Err(Error::ResolutionMismatch {
                expected,
                got: voxel_map.len(),
            });
        }
        if let Some((voxel, &index)) = voxel_map.iter().enumerate().find(|(_, &p)| p as usize >= phases.len()) {
            return Err(Error::UnknownPhase {
                index: index as usize,
                voxel,
                phases: phases.len(),
            });
        }
        Ok(UnitCellMaterial {
            resolution,
            phases,
            voxel_map,
        })
    }

    /// Single-phase cell.
    pub fn homogeneous(phase: Phase, resolution: usize) -> Result<Self> {
        Self::new(resolution, vec![phase], vec![0; resolution.pow(3)])
    }

    /// Runs [`validate`] and turns a failing report into an error.
    pub fn validated(self) -> Result<Self> {
        let report = validate(&self);
        if report.pass {
            Ok(self)
        } else {
            Err(Error::Validation(report.summary()))
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn voxel_count(&self) -> usize {
        self.voxel_map.len()
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn voxel_map(&self) -> &[u16] {
        &self.voxel_map
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.resolution;
        ((k % n) * n + (j % n)) * n + (i % n)
    }

    #[inline]
    pub fn phase_at(&self, i: usize, j: usize, k: usize) -> &Phase {
        &self.phases[self.voxel_map[self.index(i, j, k)] as usize]
    }

    /// Per-voxel exchange coefficient.
    pub fn a_field(&self) -> Vec<f64> {
        self.voxel_map.iter().map(|&p| self.phases[p as usize].a_ex).collect()
    }

    /// Per-voxel saturation magnetization.
    pub fn ms_field(&self) -> Vec<f64> {
        self.voxel_map.iter().map(|&p| self.phases[p as usize].m_s).collect()
    }

    /// Volume fraction of each phase.
    pub fn phase_fractions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.phases.len()];
        for &p in &self.voxel_map {
            counts[p as usize] += 1;
        }
        let total = self.voxel_map.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    /// Nearest-voxel resampling onto an `n^3` grid.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n == self.resolution {
            return Ok(self.clone());
        }
        if n == 0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        let src = self.resolution;
        let map1 = |i: usize| ((2 * i + 1) * src) / (2 * n);
        let mut map = Vec::with_capacity(n.pow(3));
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    map.push(self.voxel_map[self.index(map1(i), map1(j), map1(k))]);
                }
            }
        }
        Self::new(n, self.phases.clone(), map)
    }

    /// The same cell with its axes relabeled: axis `d` of the result is axis
    /// `perm[d]` of `self`. Anisotropy frames are permuted accordingly.
    pub fn permute_axes(&self, perm: [usize; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p] {
                return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        let n = self.resolution;
        let mut map = Vec::with_capacity(n.pow(3));
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let new = [i, j, k];
                    let mut old = [0; 3];
                    for d in 0..3 {
                        old[perm[d]] = new[d];
                    }
                    map.push(self.voxel_map[self.index(old[0], old[1], old[2])]);
                }
            }
        }
        let pv = |v: Vec3| [v[perm[0]], v[perm[1]], v[perm[2]]];
        let phases = self
            .phases
            .iter()
            .map(|p| {
                let anisotropy = match &p.anisotropy {
                    AnisotropySpec::None => AnisotropySpec::None,
                    AnisotropySpec::Uniaxial { kappa, axis } => AnisotropySpec::Uniaxial {
                        kappa: *kappa,
                        axis: pv(*axis),
                    },
                    AnisotropySpec::Cubic { kappa, axes } => AnisotropySpec::Cubic {
                        kappa: *kappa,
                        axes: [pv(axes[0]), pv(axes[1]), pv(axes[2])],
                    },
                };
                Phase {
                    anisotropy,
                    ..p.clone()
                }
            })
            .collect();
        Self::new(n, phases, map)
    }
}

/// One failed hypothesis in a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub phase: usize,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    NonFinite,
    NonPositiveExchange,
    NegativeSaturation,
    NegativeKappa,
    FrameDefect,
}

/// Material diagnostics: bounds of the exchange coefficient, saturation and
/// anisotropy strength over all phases, plus every violated hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Lower exchange bound `c_ex`.
    pub c_ex: f64,
    /// Upper exchange bound `C_ex`.
    pub big_c_ex: f64,
    /// Saturation bound `C_s`.
    pub c_s: f64,
    /// Anisotropy bound `C_an`: `max kappa`, which dominates both families.
    pub c_an: f64,
    pub issues: Vec<Issue>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        if self.pass {
            return "ok".into();
        }
        self.issues
            .iter()
            .map(|i| i.message.as_str())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks the exchange, anisotropy and saturation hypotheses phase by phase.
pub fn validate(cell: &UnitCellMaterial) -> ValidationReport {
    let mut issues = Vec::new();
    let mut c_ex = f64::INFINITY;
    let mut big_c_ex: f64 = 0.0;
    let mut c_s: f64 = 0.0;
    let mut c_an: f64 = 0.0;
    for (idx, p) in cell.phases.iter().enumerate() {
        let mut push = |kind, message: String| {
            issues.push(Issue {
                phase: idx,
                kind,
                message: format!("phase {idx}: {message}"),
            })
        };
        let finite = p.a_ex.is_finite()
            && p.m_s.is_finite()
            && p.anisotropy.kappa().is_finite()
            && p.anisotropy.frame_defect().is_finite();
        if !finite {
            push(IssueKind::NonFinite, "non-finite material constant".into());
            continue;
        }
        c_ex = c_ex.min(p.a_ex);
        big_c_ex = big_c_ex.max(p.a_ex);
        c_s = c_s.max(p.m_s.abs());
        c_an = c_an.max(p.anisotropy.kappa().abs());
        if p.a_ex <= 0.0 {
            push(
                IssueKind::NonPositiveExchange,
                format!("a_ex = {} must be positive", p.a_ex),
            );
        }
        if p.m_s < 0.0 {
            push(
                IssueKind::NegativeSaturation,
                format!("M_s = {} must be nonnegative", p.m_s),
            );
        }
        if p.anisotropy.kappa() < 0.0 {
            push(
                IssueKind::NegativeKappa,
                format!("kappa = {} must be nonnegative", p.anisotropy.kappa()),
            );
        }
        let defect = p.anisotropy.frame_defect();
        if defect > FRAME_TOL {
            push(
                IssueKind::FrameDefect,
                format!("anisotropy frame defect {defect:.3e} exceeds {FRAME_TOL:e}"),
            );
        }
    }
    if !c_ex.is_finite() {
        c_ex = 0.0;
    }
    let pass = issues.is_empty();
    ValidationReport {
        c_ex,
        big_c_ex,
        c_s,
        c_an,
        issues,
        pass,
    }
}

/// Voxel averages over the unit cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAverages {
    pub mean_a: f64,
    pub harm_a: f64,
    pub mean_ms: f64,
    pub mean_ms_sq: f64,
}

pub fn cell_averages(cell: &UnitCellMaterial) -> CellAverages {
    let n = cell.voxel_count() as f64;
    let fractions = cell.phase_fractions();
    let mut mean_a = 0.0;
    let mut inv_a = 0.0;
    let mut mean_ms = 0.0;
    let mut mean_ms_sq = 0.0;
    for (p, f) in cell.phases.iter().zip(&fractions) {
        if *f == 0.0 {
            continue;
        }
        mean_a += f * p.a_ex;
        inv_a += f / p.a_ex;
        mean_ms += f * p.m_s;
        mean_ms_sq += f * p.m_s * p.m_s;
    }
    debug_assert!(n > 0.0);
    CellAverages {
        mean_a,
        harm_a: 1.0 / inv_a,
        mean_ms,
        mean_ms_sq,
    }
}
