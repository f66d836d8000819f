use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Periodic torus `[0, L]^3` sampled on `N^3` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_per_axis: usize,
    pub box_length: f64,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
}

fn default_dealias() -> f64 {
    2.0 / 3.0
}

impl GridSpec {
    pub fn new(n_per_axis: usize, box_length: f64) -> Result<Self> {
        Self::with_dealias(n_per_axis, box_length, default_dealias())
    }

    pub fn with_dealias(n_per_axis: usize, box_length: f64, dealias_fraction: f64) -> Result<Self> {
        let g = GridSpec {
            n_per_axis,
            box_length,
            dealias_fraction,
        };
        g.validate()?;
        Ok(g)
    }

    /// The default `2π` box.
    pub fn cube(n_per_axis: usize) -> Result<Self> {
        Self::new(n_per_axis, 2.0 * PI)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_per_axis;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_per_axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::Config(format!(
                "box_length must be positive, got {}",
                self.box_length
            )));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "dealias_fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        Ok(())
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n_per_axis * self.n_per_axis * self.n_per_axis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Fundamental angular wavenumber `2π/L`.
    pub fn xi_unit(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Signed integer wavenumber for array index `i`, in `(-N/2, N/2]`.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.n_per_axis;
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Angular wavenumbers per axis index.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let unit = self.xi_unit();
        (0..self.n_per_axis)
            .map(|i| unit * self.signed_index(i) as f64)
            .collect()
    }

    /// Wavenumbers for odd-order derivatives: the Nyquist entry is zeroed so
    /// that derivatives of real fields stay real.
    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.n_per_axis / 2] = 0.0;
        k
    }

    #[inline]
    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n_per_axis + iy) * self.n_per_axis + iz
    }

    /// Flat index of the mode `-k` for the mode stored at `(ix, iy, iz)`.
    #[inline]
    pub fn mirror(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.n_per_axis;
        self.flat((n - ix) % n, (n - iy) % n, (n - iz) % n)
    }

    /// Spherical 2/3-style truncation mask; Nyquist planes are always removed.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let n = self.n_per_axis;
        let cutoff = self.dealias_fraction * (n / 2) as f64;
        let cutoff2 = cutoff * cutoff;
        let mut mask = vec![false; self.len()];
        for ix in 0..n {
            let kx = self.signed_index(ix);
            for iy in 0..n {
                let ky = self.signed_index(iy);
                for iz in 0..n {
                    let kz = self.signed_index(iz);
                    let nyq = [ix, iy, iz].contains(&(n / 2));
                    let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                    mask[self.flat(ix, iy, iz)] = !nyq && k2 <= cutoff2 * (1.0 + 1e-12);
                }
            }
        }
        mask
    }

    /// The same index lattice on a box shrunk by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<GridSpec> {
        GridSpec::with_dealias(
            self.n_per_axis,
            self.box_length / lambda,
            self.dealias_fraction,
        )
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Integrity(format!(
                "grid mismatch: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolution() {
        assert!(GridSpec::cube(4).is_err());
        assert!(GridSpec::cube(12).is_err());
        assert!(GridSpec::cube(8).is_ok());
        assert!(GridSpec::with_dealias(16, 1.0, 0.0).is_err());
        assert!(GridSpec::with_dealias(16, -1.0, 0.5).is_err());
    }

    #[test]
    fn signed_indices_cover_half_open_range() {
        let g = GridSpec::cube(8).unwrap();
        let k: Vec<i64> = (0..8).map(|i| g.signed_index(i)).collect();
        assert_eq!(k, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn mask_is_symmetric_and_drops_nyquist() {
        let g = GridSpec::cube(16).unwrap();
        let m = g.dealias_mask();
        for ix in 0..16 {
            for iy in 0..16 {
                for iz in 0..16 {
                    assert_eq!(m[g.flat(ix, iy, iz)], m[g.mirror(ix, iy, iz)]);
                }
            }
        }
        assert!(!m[g.flat(8, 0, 0)]);
        assert!(m[g.flat(5, 0, 0)]);
        assert!(!m[g.flat(6, 0, 0)]);
    }
}
