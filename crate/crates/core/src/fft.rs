//! Cached 3D complex FFTs over row-major `(x, y, z)` cubes.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared plan for an `n^3` cube.
pub fn plan(n: usize) -> Arc<Fft3> {
    let mut map = cache().lock().expect("fft cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft3 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl Fft3 {
    /// Forward transform carrying the `1/N^3` factor.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    /// Unnormalized forward transform.
    pub fn forward_raw(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "fft buffer size mismatch");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // z lines are contiguous
        fft.process_with_scratch(data, &mut scratch);

        // y lines: transpose each x-slab (y,z) -> (z,y)
        let mut slab = vec![Complex64::default(); n * n];
        for ix in 0..n {
            let base = ix * n * n;
            for iy in 0..n {
                for iz in 0..n {
                    slab[iz * n + iy] = data[base + iy * n + iz];
                }
            }
            fft.process_with_scratch(&mut slab, &mut scratch);
            for iy in 0..n {
                for iz in 0..n {
                    data[base + iy * n + iz] = slab[iz * n + iy];
                }
            }
        }

        // x lines: for each y, gather the (x,z) plane as (z,x)
        for iy in 0..n {
            for ix in 0..n {
                let base = ix * n * n + iy * n;
                for iz in 0..n {
                    slab[iz * n + ix] = data[base + iz];
                }
            }
            fft.process_with_scratch(&mut slab, &mut scratch);
            for ix in 0..n {
                let base = ix * n * n + iy * n;
                for iz in 0..n {
                    data[base + iz] = slab[iz * n + ix];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_direct_dft_sum() {
        let n = 8;
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        plan(n).forward(&mut fast);
        for &(kx, ky, kz) in &[(0usize, 0usize, 0usize), (1, 2, 3), (7, 0, 5), (4, 4, 4)] {
            let mut acc = Complex64::default();
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        let phase = -2.0 * PI * ((kx * x + ky * y + kz * z) as f64) / n as f64;
                        acc += data[(x * n + y) * n + z] * Complex64::from_polar(1.0, phase);
                    }
                }
            }
            acc /= (n * n * n) as f64;
            let got = fast[(kx * n + ky) * n + kz];
            assert!((got - acc).norm() < 1e-13, "mode {kx},{ky},{kz}");
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let n = 16;
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 1.3).sin(), 0.0))
            .collect();
        let mut x = data.clone();
        let p = plan(n);
        p.forward(&mut x);
        p.inverse(&mut x);
        for (a, b) in x.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
