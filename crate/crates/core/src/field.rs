//! Spectral storage for real scalar and vector fields on the periodic torus.
//!
//! Coefficients are indexed by the integer wavevector `k ∈ (−N/2, N/2]^3`,
//! stored in row-major `(x, y, z)` order. The forward transform carries the
//! `1/N^3` factor so a smooth field has resolution-independent coefficients.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;

/// Imaginary residue (relative to the field magnitude) tolerated when
/// returning to physical space.
pub const IMAG_TOLERANCE: f64 = 1e-12;

/// Real samples of one component, row-major `(x, y, z)`.
pub type Samples = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    comps: [Vec<Complex64>; 3],
}

// ---------------------------------------------------------------------------
// batched transforms (two real fields per complex FFT)

/// Inverse transforms of Hermitian spectra, two per FFT.
pub(crate) fn physical_batch(grid: &GridSpec, specs: &[&[Complex64]]) -> Vec<Samples> {
    let plan = fft::plan(grid.n_per_axis);
    let mut out = Vec::with_capacity(specs.len());
    for pair in specs.chunks(2) {
        let mut buf: Vec<Complex64> = match pair {
            [a, b] => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| x + Complex64::i() * y)
                .collect(),
            [a] => a.to_vec(),
            _ => unreachable!(),
        };
        plan.inverse(&mut buf);
        out.push(buf.iter().map(|c| c.re).collect());
        if pair.len() == 2 {
            out.push(buf.iter().map(|c| c.im).collect());
        }
    }
    out
}

/// Forward transforms of real samples, two per FFT, split back into exactly
/// Hermitian spectra.
pub(crate) fn spectral_batch(grid: &GridSpec, reals: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let plan = fft::plan(grid.n_per_axis);
    let n = grid.n_per_axis;
    let mut out = Vec::with_capacity(reals.len());
    for pair in reals.chunks(2) {
        let mut buf: Vec<Complex64> = match pair {
            [a, b] => a
                .iter()
                .zip(b.iter())
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect(),
            [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            _ => unreachable!(),
        };
        plan.forward(&mut buf);
        let mut first = vec![Complex64::default(); buf.len()];
        let mut second = vec![Complex64::default(); buf.len()];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let i = grid.flat(ix, iy, iz);
                    let zm = buf[grid.mirror(ix, iy, iz)].conj();
                    first[i] = 0.5 * (buf[i] + zm);
                    second[i] = Complex64::new(0.0, -0.5) * (buf[i] - zm);
                }
            }
        }
        out.push(first);
        if pair.len() == 2 {
            out.push(second);
        }
    }
    out
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::Config(format!(
            "array of length {len} does not match grid of {} points",
            grid.len()
        )));
    }
    Ok(())
}

fn checked_inverse(grid: &GridSpec, spec: &[Complex64]) -> Result<Samples> {
    let mut buf = spec.to_vec();
    fft::plan(grid.n_per_axis).inverse(&mut buf);
    let re_max = buf.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let im_max = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    let scale = re_max.max(f64::MIN_POSITIVE);
    if im_max > IMAG_TOLERANCE * scale && im_max > f64::MIN_POSITIVE {
        return Err(Error::Integrity(format!(
            "Hermitian symmetry violated: imaginary residue {im_max:.3e} vs magnitude {re_max:.3e}"
        )));
    }
    Ok(buf.into_iter().map(|c| c.re).collect())
}

fn l2_from_coeffs(grid: &GridSpec, c: &[Complex64]) -> f64 {
    let s: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    (s * grid.box_length.powi(3)).sqrt()
}

/// Largest Hermitian-symmetry defect `|c(−k) − conj c(k)|` in a spectrum.
pub fn hermitian_defect(grid: &GridSpec, c: &[Complex64]) -> f64 {
    let n = grid.n_per_axis;
    let mut worst = 0.0f64;
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let d = c[grid.mirror(ix, iy, iz)] - c[grid.flat(ix, iy, iz)].conj();
                worst = worst.max(d.norm());
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            coeffs: vec![Complex64::default(); grid.len()],
            grid,
        }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, coeffs.len())?;
        Ok(ScalarField { grid, coeffs })
    }

    pub fn to_spectral(samples: &[f64], grid: GridSpec) -> Result<Self> {
        check_len(&grid, samples.len())?;
        let mut c = spectral_batch(&grid, &[samples]);
        Ok(ScalarField {
            grid,
            coeffs: c.pop().expect("one spectrum"),
        })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let samples = sample_points(&grid).map(f).collect::<Vec<_>>();
        Self::to_spectral(&samples, grid).expect("sized by construction")
    }

    pub fn to_physical(&self) -> Result<Samples> {
        checked_inverse(&self.grid, &self.coeffs)
    }

    pub(crate) fn physical(&self) -> Samples {
        physical_batch(&self.grid, &[&self.coeffs]).pop().unwrap()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn l2_norm(&self) -> f64 {
        l2_from_coeffs(&self.grid, &self.coeffs)
    }

    pub fn strip_mean(&mut self) {
        self.coeffs[0] = Complex64::default();
    }

    pub fn scaled(&self, a: f64) -> Self {
        ScalarField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        ScalarField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn dealiased(mut self) -> Self {
        apply_mask(&self.grid, &mut self.coeffs);
        self
    }

    /// Same coefficients reinterpreted on another grid of equal resolution.
    pub fn regrid(&self, grid: GridSpec) -> Result<Self> {
        if grid.n_per_axis != self.grid.n_per_axis {
            return Err(Error::Config("regrid requires equal resolution".into()));
        }
        Ok(ScalarField {
            grid,
            coeffs: self.coeffs.clone(),
        })
    }
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![Complex64::default(); grid.len()];
        VectorField {
            comps: [z.clone(), z.clone(), z],
            grid,
        }
    }

    pub fn from_coeffs(grid: GridSpec, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        for c in &comps {
            check_len(&grid, c.len())?;
        }
        Ok(VectorField { grid, comps })
    }

    /// Forward transform of three real component arrays.
    pub fn to_spectral(samples: &[Samples], grid: GridSpec) -> Result<Self> {
        if samples.len() != 3 {
            return Err(Error::Config(format!(
                "vector field needs 3 components, got {}",
                samples.len()
            )));
        }
        for s in samples {
            check_len(&grid, s.len())?;
        }
        let refs: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
        let mut c = spectral_batch(&grid, &refs).into_iter();
        Ok(VectorField {
            grid,
            comps: [c.next().unwrap(), c.next().unwrap(), c.next().unwrap()],
        })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut s = [
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
        ];
        for x in sample_points(&grid) {
            let v = f(x);
            for c in 0..3 {
                s[c].push(v[c]);
            }
        }
        Self::to_spectral(&s, grid).expect("sized by construction")
    }

    /// Inverse transform; fails when the spectrum is not Hermitian to
    /// within [`IMAG_TOLERANCE`].
    pub fn to_physical(&self) -> Result<[Samples; 3]> {
        Ok([
            checked_inverse(&self.grid, &self.comps[0])?,
            checked_inverse(&self.grid, &self.comps[1])?,
            checked_inverse(&self.grid, &self.comps[2])?,
        ])
    }

    /// Unchecked inverse transform (two components per FFT).
    pub(crate) fn physical(&self) -> [Samples; 3] {
        let mut it = physical_batch(&self.grid, &[&self.comps[0], &self.comps[1], &self.comps[2]])
            .into_iter();
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn comps(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    pub fn comps_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.comps
    }

    pub fn into_comps(self) -> [Vec<Complex64>; 3] {
        self.comps
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .map(|c| l2_from_coeffs(&self.grid, c).powi(2))
            .sum();
        s.sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| hermitian_defect(&self.grid, c))
            .fold(0.0, f64::max)
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.comps.iter().map(|c| c[0].norm()).fold(0.0, f64::max)
    }

    pub fn strip_mean(&mut self) {
        for c in &mut self.comps {
            c[0] = Complex64::default();
        }
    }

    pub fn map_coeffs(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        VectorField {
            grid: self.grid,
            comps: [
                self.comps[0].iter().map(|&z| f(z)).collect(),
                self.comps[1].iter().map(|&z| f(z)).collect(),
                self.comps[2].iter().map(|&z| f(z)).collect(),
            ],
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map_coeffs(|z| z * a)
    }

    fn zip_with(&self, other: &VectorField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let z = |c: usize| {
            self.comps[c]
                .iter()
                .zip(&other.comps[c])
                .map(|(&a, &b)| f(a, b))
                .collect::<Vec<_>>()
        };
        VectorField {
            grid: self.grid,
            comps: [z(0), z(1), z(2)],
        }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + a * x`
    pub fn axpy(&self, a: f64, x: &VectorField) -> Self {
        self.zip_with(x, |s, v| s + v * a)
    }

    pub fn add_assign_scaled(&mut self, a: f64, x: &VectorField) {
        for c in 0..3 {
            for (s, v) in self.comps[c].iter_mut().zip(&x.comps[c]) {
                *s += v * a;
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        for c in &mut self.comps {
            apply_mask(&self.grid, c);
        }
        self
    }

    /// Same coefficients on another grid of equal resolution.
    pub fn regrid(&self, grid: GridSpec) -> Result<Self> {
        if grid.n_per_axis != self.grid.n_per_axis {
            return Err(Error::Config("regrid requires equal resolution".into()));
        }
        Ok(VectorField {
            grid,
            comps: self.comps.clone(),
        })
    }
}

pub(crate) fn apply_mask(grid: &GridSpec, c: &mut [Complex64]) {
    let mask = grid.dealias_mask();
    for (z, keep) in c.iter_mut().zip(mask) {
        if !keep {
            *z = Complex64::default();
        }
    }
}

/// Physical coordinates of every sample, in storage order.
pub fn sample_points(grid: &GridSpec) -> impl Iterator<Item = [f64; 3]> + '_ {
    let n = grid.n_per_axis;
    let h = grid.spacing();
    (0..grid.len()).map(move |i| {
        let iz = i % n;
        let iy = (i / n) % n;
        let ix = i / (n * n);
        [ix as f64 * h, iy as f64 * h, iz as f64 * h]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_samples(grid: &GridSpec, seed: u64) -> Vec<Samples> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3)
            .map(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_samples_give_zero_coeffs() {
        let g = GridSpec::cube(8).unwrap();
        let z = vec![vec![0.0; g.len()]; 3];
        let f = VectorField::to_spectral(&z, g).unwrap();
        assert!(f.is_zero());
        let back = f.to_physical().unwrap();
        assert!(back.iter().all(|c| c.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn cosine_has_two_modes_matching_direct_dft() {
        let g = GridSpec::new(8, 3.0).unwrap();
        let l = g.box_length;
        let f = VectorField::from_fn(g, |x| [(2.0 * PI * x[0] / l).cos(), 0.0, 0.0]);
        // direct DFT sum oracle for k = (1,0,0)
        let h = g.spacing();
        let mut acc = Complex64::default();
        for ix in 0..8 {
            let x = ix as f64 * h;
            acc += (2.0 * PI * x / l).cos() * Complex64::from_polar(1.0, -2.0 * PI * ix as f64 / 8.0);
        }
        acc /= 8.0;
        for (i, z) in f.comp(0).iter().enumerate() {
            if i == g.flat(1, 0, 0) || i == g.flat(7, 0, 0) {
                assert!((z - acc).norm() < 1e-14);
                assert!((z.re - 0.5).abs() < 1e-14);
            } else {
                assert!(z.norm() < 1e-14, "spurious mode at {i}");
            }
        }
        assert!(f.comp(1).iter().all(|z| z.norm() < 1e-15));
        let back = f.to_physical().unwrap();
        for (x, v) in sample_points(&g).zip(&back[0]) {
            assert!((v - (2.0 * PI * x[0] / l).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn random_samples_are_hermitian_and_round_trip() {
        for n in [8, 16, 32] {
            let g = GridSpec::cube(n).unwrap();
            let s = random_samples(&g, n as u64);
            let f = VectorField::to_spectral(&s, g).unwrap();
            assert!(f.hermitian_defect() < 1e-15);
            let back = f.to_physical().unwrap();
            let scale = s.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            for (a, b) in back.iter().flatten().zip(s.iter().flatten()) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn non_hermitian_spectrum_is_rejected() {
        let g = GridSpec::cube(8).unwrap();
        let mut c = vec![Complex64::default(); g.len()];
        c[g.flat(1, 0, 0)] = Complex64::new(1.0, 0.0);
        let f = VectorField::from_coeffs(g, [c.clone(), c.clone(), c]).unwrap();
        assert!(matches!(f.to_physical(), Err(Error::Integrity(_))));
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let g = GridSpec::cube(8).unwrap();
        let bad = vec![vec![0.0; 10]; 3];
        assert!(matches!(VectorField::to_spectral(&bad, g), Err(Error::Config(_))));
        let two = vec![vec![0.0; g.len()]; 2];
        assert!(matches!(VectorField::to_spectral(&two, g), Err(Error::Config(_))));
    }

    #[test]
    fn parseval_matches_physical_l2() {
        let g = GridSpec::new(16, 2.0).unwrap();
        let s = random_samples(&g, 3);
        let f = VectorField::to_spectral(&s, g).unwrap();
        let direct: f64 = s.iter().flatten().map(|x| x * x).sum::<f64>() * g.cell_volume();
        assert!((f.l2_norm() - direct.sqrt()).abs() < 1e-12 * direct.sqrt());
    }
}
