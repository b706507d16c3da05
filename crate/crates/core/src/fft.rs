//! 3D complex transforms behind a small provider trait.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{PimError, Result};
use crate::model::C64;

/// 3D complex-to-complex transform on row-major data (last axis contiguous).
/// `inverse` is normalized so that `inverse(forward(x)) == x`.
pub trait SpectralTransformProvider: Send + Sync {
    fn forward(&self, data: &mut [C64], dims: [usize; 3]) -> Result<()>;
    fn inverse(&self, data: &mut [C64], dims: [usize; 3]) -> Result<()>;
}

/// Provider backed by rustfft; handles any length.
pub struct RustFftProvider {
    planner: Mutex<FftPlanner<f64>>,
}

impl Default for RustFftProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl RustFftProvider {
    pub fn new() -> Self {
        Self {
            planner: Mutex::new(FftPlanner::new()),
        }
    }

    fn plan(&self, n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
        let mut p = self.planner.lock().unwrap_or_else(|e| e.into_inner());
        p.plan_fft(n, dir)
    }

    fn run(&self, data: &mut [C64], dims: [usize; 3], dir: FftDirection) -> Result<()> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(PimError::InvalidInput(format!(
                "transform buffer of {} values does not match dims {dims:?}",
                data.len()
            )));
        }
        let [nx, ny, nz] = dims;
        if nz > 1 {
            let fft = self.plan(nz, dir);
            data.par_chunks_mut(nz * ny.max(1)).for_each(|slab| {
                let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(slab, &mut scratch);
            });
        }
        if ny > 1 {
            let fft = self.plan(ny, dir);
            data.par_chunks_mut(ny * nz).for_each(|slab| {
                let mut line = vec![C64::new(0.0, 0.0); ny];
                let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for k in 0..nz {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = slab[j * nz + k];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        slab[j * nz + k] = *v;
                    }
                }
            });
        }
        if nx > 1 {
            let fft = self.plan(nx, dir);
            let plane = ny * nz;
            let mut block = vec![C64::new(0.0, 0.0); nx * nz];
            let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            // one y row at a time: gather nz lines of length nx, contiguous per line
            for j in 0..ny {
                for i in 0..nx {
                    for k in 0..nz {
                        block[k * nx + i] = data[i * plane + j * nz + k];
                    }
                }
                fft.process_with_scratch(&mut block, &mut scratch);
                for i in 0..nx {
                    for k in 0..nz {
                        data[i * plane + j * nz + k] = block[k * nx + i];
                    }
                }
            }
        }
        Ok(())
    }
}

impl SpectralTransformProvider for RustFftProvider {
    fn forward(&self, data: &mut [C64], dims: [usize; 3]) -> Result<()> {
        self.run(data, dims, FftDirection::Forward)
    }

    fn inverse(&self, data: &mut [C64], dims: [usize; 3]) -> Result<()> {
        self.run(data, dims, FftDirection::Inverse)?;
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}
