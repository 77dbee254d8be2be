//! In-place 3D complex FFT on a flat `(k * ny + j) * nx + i` buffer, built
//! from rustfft 1D transforms along each axis.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub(crate) struct Fft3 {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<f64>>; 3],
}

/// Lines handed to one rayon task along the contiguous axis.
const LINES_PER_TASK: usize = 64;

impl Fft3 {
    pub fn new(dims: [usize; 3], direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| planner.plan_fft(n, direction));
        Fft3 { dims, plans }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len());
        let [nx, ny, nz] = self.dims;

        let px = &self.plans[0];
        buf.par_chunks_mut(nx * LINES_PER_TASK).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); px.get_inplace_scratch_len()];
            px.process_with_scratch(chunk, &mut scratch);
        });

        let py = &self.plans[1];
        buf.par_chunks_mut(nx * ny).for_each(|plane| {
            let mut t = vec![Complex64::default(); nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    t[i * ny + j] = plane[j * nx + i];
                }
            }
            let mut scratch = vec![Complex64::default(); py.get_inplace_scratch_len()];
            py.process_with_scratch(&mut t, &mut scratch);
            for j in 0..ny {
                for i in 0..nx {
                    plane[j * nx + i] = t[i * ny + j];
                }
            }
        });

        if nz > 1 {
            let pz = &self.plans[2];
            let plane = nx * ny;
            let mut t = vec![Complex64::default(); buf.len()];
            {
                let src: &[Complex64] = buf;
                t.par_chunks_mut(nz * LINES_PER_TASK)
                    .enumerate()
                    .for_each(|(task, chunk)| {
                        let first = task * LINES_PER_TASK;
                        for (l, line) in chunk.chunks_mut(nz).enumerate() {
                            let col = first + l;
                            for (k, v) in line.iter_mut().enumerate() {
                                *v = src[k * plane + col];
                            }
                        }
                        let mut scratch = vec![Complex64::default(); pz.get_inplace_scratch_len()];
                        pz.process_with_scratch(chunk, &mut scratch);
                    });
            }
            let t = &t;
            buf.par_chunks_mut(plane).enumerate().for_each(|(k, p)| {
                for (col, v) in p.iter_mut().enumerate() {
                    *v = t[col * nz + k];
                }
            });
        }
    }
}
