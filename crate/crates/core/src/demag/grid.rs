use serde::{Deserialize, Serialize};

use crate::linalg::Vec3;
use crate::{Error, Result};

/// Box `[0, extent_x] x [0, extent_y] x [0, extent_z]` split into voxels.
/// Flat index is `(k * ny + j) * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGrid {
    extent: [f64; 3],
    resolution: [usize; 3],
}

impl DomainGrid {
    pub fn new(extent: [f64; 3], resolution: [usize; 3]) -> Result<Self> {
        if extent.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidArgument(format!("extent {extent:?} must be positive")));
        }
        if resolution.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution:?} must be positive"
            )));
        }
        Ok(DomainGrid { extent, resolution })
    }

    /// Cube of side `side` with `n` voxels per axis.
    ///
    /// # Panics
    /// If `side <= 0` or `n == 0`.
    pub fn cube(side: f64, n: usize) -> Self {
        Self::new([side; 3], [n; 3]).expect("valid cube")
    }

    pub fn extent(&self) -> [f64; 3] {
        self.extent
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn pitch(&self) -> [f64; 3] {
        [
            self.extent[0] / self.resolution[0] as f64,
            self.extent[1] / self.resolution[1] as f64,
            self.extent[2] / self.resolution[2] as f64,
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        let p = self.pitch();
        p[0] * p[1] * p[2]
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution[1] + j) * self.resolution[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Position of the center of voxel `idx`.
    pub fn center(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let p = self.pitch();
        [
            (c[0] as f64 + 0.5) * p[0],
            (c[1] as f64 + 0.5) * p[1],
            (c[2] as f64 + 0.5) * p[2],
        ]
    }

    /// Stride of the flat index along axis `d`.
    pub fn stride(&self, d: usize) -> usize {
        match d {
            0 => 1,
            1 => self.resolution[0],
            _ => self.resolution[0] * self.resolution[1],
        }
    }
}

/// A 3-vector per domain voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorDomainField {
    grid: DomainGrid,
    values: Vec<Vec3>,
}

impl VectorDomainField {
    pub fn new(grid: DomainGrid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ResolutionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite value at voxel {i}")));
        }
        Ok(VectorDomainField { grid, values })
    }

    pub fn zeros(grid: DomainGrid) -> Self {
        VectorDomainField {
            grid,
            values: vec![[0.0; 3]; grid.len()],
        }
    }

    pub fn from_fn(grid: DomainGrid, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }
}
