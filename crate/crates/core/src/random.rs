//! Seeded random ensembles of smooth, mean-free, divergence-free fields.
//!
//! Draws are made per integer wavevector in a fixed order over the cube
//! `[-K, K]^3`, so the same `(ensemble, seed)` produces the same continuum
//! field on every grid that resolves it.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::field::{ScalarField, VectorField};
use crate::grid::GridSpec;
use crate::ops::leray_project;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    /// Spectral decay exponent: amplitudes scale like `|ξ|^{-alpha}`.
    pub alpha: f64,
    /// Largest integer wavevector magnitude drawn.
    pub k_max: f64,
}

impl Default for Ensemble {
    fn default() -> Self {
        Ensemble {
            alpha: 2.0,
            k_max: 2.5,
        }
    }
}

impl Ensemble {
    /// Band limit `N/6`: products of two members are resolved exactly by
    /// the 2/3 dealias mask.
    pub fn low_mode(grid: &GridSpec) -> Self {
        Ensemble {
            alpha: 2.0,
            k_max: grid.n_per_axis as f64 / 6.0,
        }
    }
}

/// SplitMix64 finalizer; derives independent substream seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn representative(k: [i64; 3]) -> bool {
    k[0] > 0 || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] > 0)))
}

fn index_of(grid: &GridSpec, k: [i64; 3]) -> Option<usize> {
    let n = grid.n_per_axis as i64;
    if k.iter().any(|&c| c.abs() >= n / 2) {
        return None;
    }
    let w = |c: i64| c.rem_euclid(n) as usize;
    Some(grid.flat(w(k[0]), w(k[1]), w(k[2])))
}

/// Calls `f(k, rng)` for every representative wavevector within `k_max`.
fn for_each_drawn_mode(ens: &Ensemble, seed: u64, mut f: impl FnMut([i64; 3], &mut ChaCha8Rng)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kk = ens.k_max.floor() as i64;
    let kmax2 = ens.k_max * ens.k_max;
    for kx in -kk..=kk {
        for ky in -kk..=kk {
            for kz in -kk..=kk {
                let k = [kx, ky, kz];
                let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                if !representative(k) || k2 > kmax2 * (1.0 + 1e-12) {
                    continue;
                }
                f(k, &mut rng);
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Leray-projected complex Gaussian field with `|ξ|^{-α}` amplitudes.
pub fn random_solenoidal(grid: &GridSpec, ens: &Ensemble, seed: u64) -> VectorField {
    let mut comps = [
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
    ];
    let unit = grid.xi_unit();
    for_each_drawn_mode(ens, seed, |k, rng| {
        let draws = [gaussian(rng), gaussian(rng), gaussian(rng)];
        let (Some(i), Some(im)) = (index_of(grid, k), index_of(grid, [-k[0], -k[1], -k[2]])) else {
            return;
        };
        let knorm = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt() * unit;
        let amp = knorm.powf(-ens.alpha);
        for c in 0..3 {
            comps[c][i] = draws[c] * amp;
            comps[c][im] = (draws[c] * amp).conj();
        }
    });
    let f = VectorField::from_coeffs(*grid, comps).expect("sized by construction");
    leray_project(&f)
}

/// Mean-free real Gaussian scalar field with `|ξ|^{-α}` amplitudes.
pub fn random_scalar(grid: &GridSpec, ens: &Ensemble, seed: u64) -> ScalarField {
    let mut c = vec![Complex64::default(); grid.len()];
    let unit = grid.xi_unit();
    for_each_drawn_mode(ens, seed, |k, rng| {
        let z = gaussian(rng);
        let (Some(i), Some(im)) = (index_of(grid, k), index_of(grid, [-k[0], -k[1], -k[2]])) else {
            return;
        };
        let knorm = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt() * unit;
        let amp = knorm.powf(-ens.alpha);
        c[i] = z * amp;
        c[im] = (z * amp).conj();
    });
    ScalarField::from_coeffs(*grid, c).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::divergence;

    #[test]
    fn members_are_real_solenoidal_and_mean_free() {
        let g = GridSpec::cube(16).unwrap();
        let f = random_solenoidal(&g, &Ensemble::default(), 3);
        assert!(f.hermitian_defect() == 0.0);
        assert!(f.mean_magnitude() == 0.0);
        assert!(divergence(&f).coeffs().iter().all(|c| c.norm() < 1e-15));
        assert!(f.max_abs_coeff() > 0.0);
    }

    #[test]
    fn same_seed_same_continuum_field_across_grids() {
        let e = Ensemble::default();
        let a = random_solenoidal(&GridSpec::cube(16).unwrap(), &e, 42);
        let b = random_solenoidal(&GridSpec::cube(32).unwrap(), &e, 42);
        let ga = *a.grid();
        let gb = *b.grid();
        for kx in -2i64..=2 {
            for ky in -2i64..=2 {
                for kz in -2i64..=2 {
                    let ia = index_of(&ga, [kx, ky, kz]).unwrap();
                    let ib = index_of(&gb, [kx, ky, kz]).unwrap();
                    for c in 0..3 {
                        assert_eq!(a.comp(c)[ia], b.comp(c)[ib]);
                    }
                }
            }
        }
        assert_eq!(a, random_solenoidal(&ga, &e, 42));
        assert_ne!(a, random_solenoidal(&ga, &e, 43));
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
