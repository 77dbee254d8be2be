use serde::{Deserialize, Serialize};

use crate::linalg::{sum_slice, Vec3};
use crate::{Error, Result};

/// Scalar Q-periodic field on an `N^3` grid.
///
/// Exchange correctors are sampled at voxel centers `(i + 1/2) / N`;
/// magnetostatic correctors at voxel corners `i / N` (see
/// [`ScalarCellField::node_offset`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarCellField {
    resolution: usize,
    values: Vec<f64>,
    zero_mean: bool,
    node_offset: f64,
}

impl ScalarCellField {
    pub fn new(resolution: usize, values: Vec<f64>, zero_mean: bool) -> Result<Self> {
        Self::with_offset(resolution, values, zero_mean, 0.5)
    }

    pub(crate) fn with_offset(resolution: usize, values: Vec<f64>, zero_mean: bool, node_offset: f64) -> Result<Self> {
        if resolution == 0 || values.len() != resolution.pow(3) {
            return Err(Error::ResolutionMismatch {
                expected: resolution.pow(3),
                got: values.len(),
            });
        }
        let field = ScalarCellField {
            resolution,
            values,
            zero_mean,
            node_offset,
        };
        if zero_mean {
            let max = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if field.mean().abs() > 1e-10 * max.max(f64::MIN_POSITIVE) {
                return Err(Error::Validation(format!(
                    "field declared zero-mean has mean {:e}",
                    field.mean()
                )));
            }
        }
        Ok(field)
    }

    pub fn zeros(resolution: usize) -> Self {
        ScalarCellField {
            resolution,
            values: vec![0.0; resolution.pow(3)],
            zero_mean: true,
            node_offset: 0.5,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero_mean(&self) -> bool {
        self.zero_mean
    }

    /// Position of sample `i` along an axis, in units of `1/N`.
    pub fn node_offset(&self) -> f64 {
        self.node_offset
    }

    pub fn mean(&self) -> f64 {
        sum_slice(&self.values) / self.values.len() as f64
    }

    /// `L^2(Q)` norm.
    pub fn l2_norm(&self) -> f64 {
        crate::linalg::dot_slices(&self.values, &self.values).sqrt() / (self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic trilinear interpolation at `y` (any real coordinates).
    pub fn sample(&self, y: Vec3) -> f64 {
        let n = self.resolution;
        let mut idx = [[0usize; 2]; 3];
        let mut w = [[0.0; 2]; 3];
        for d in 0..3 {
            let u = y[d] * n as f64 - self.node_offset;
            let f = u.floor();
            let t = u - f;
            let i0 = (f as i64).rem_euclid(n as i64) as usize;
            idx[d] = [i0, (i0 + 1) % n];
            w[d] = [1.0 - t, t];
        }
        let mut s = 0.0;
        for (c, wz) in idx[2].iter().zip(w[2]) {
            for (b, wy) in idx[1].iter().zip(w[1]) {
                for (a, wx) in idx[0].iter().zip(w[0]) {
                    s += wx * wy * wz * self.values[(c * n + b) * n + a];
                }
            }
        }
        s
    }
}
