//! Littlewood-Paley decomposition and Morrey / Besov-Morrey norms of
//! sampled fields.
//!
//! The radial profile is built from the `C^∞` transition `exp(-1/x)`:
//! `χ = 1` on `|ξ| ≤ 3/4`, `χ = 0` on `|ξ| ≥ 4/3`, `ψ = χ` and
//! `φ(ξ) = χ(ξ/2) − χ(ξ)`, so `supp φ ⊂ {3/4 ≤ |ξ| ≤ 8/3}` and every
//! truncated sum of dyadic bands telescopes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{physical_batch, ScalarField, VectorField};
use crate::grid::GridSpec;

pub const INNER_RADIUS: f64 = 3.0 / 4.0;
pub const OUTER_RADIUS: f64 = 4.0 / 3.0;

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Radial cutoff: 1 on `[0, 3/4]`, 0 on `[4/3, ∞)`.
pub fn chi(r: f64) -> f64 {
    if r <= INNER_RADIUS {
        return 1.0;
    }
    if r >= OUTER_RADIUS {
        return 0.0;
    }
    let s = (r - INNER_RADIUS) / (OUTER_RADIUS - INNER_RADIUS);
    let a = smooth_step(1.0 - s);
    let b = smooth_step(s);
    a / (a + b)
}

/// Low-frequency profile `ψ`.
pub fn psi(r: f64) -> f64 {
    chi(r)
}

/// Annular profile `φ`.
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// `φ_j(ξ) = φ(2^{-j} ξ)`, written so consecutive bands share evaluations.
pub fn phi_j(j: i32, r: f64) -> f64 {
    chi(r * 2f64.powi(-j - 1)) - chi(r * 2f64.powi(-j))
}

fn radii_of(grid: &GridSpec) -> Vec<f64> {
    let k = grid.wavenumbers();
    let mut out = Vec::with_capacity(grid.len());
    for &kx in &k {
        for &ky in &k {
            for &kz in &k {
                out.push((kx * kx + ky * ky + kz * kz).sqrt());
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct LpPartition {
    grid: GridSpec,
    pub j_min: i32,
    pub j_max: i32,
    multipliers: Arc<Vec<Vec<f64>>>,
}

impl PartialEq for LpPartition {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.j_min == other.j_min && self.j_max == other.j_max
    }
}

impl LpPartition {
    /// Chooses the band range so the truncated sum `Σ φ_j` equals one on
    /// every nonzero grid frequency.
    pub fn build(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let xi_min = grid.xi_unit();
        let half = (grid.n_per_axis / 2) as f64;
        let xi_max = xi_min * half * 3f64.sqrt();
        // Σ_{a..b} φ_j = χ(2^{-b-1}ξ) − χ(2^{-a}ξ): need |ξ| ≤ (3/2)2^b and |ξ| ≥ (4/3)2^a
        let j_min = (xi_min / OUTER_RADIUS).log2().floor() as i32;
        let j_max = (xi_max / (2.0 * INNER_RADIUS)).log2().ceil() as i32;
        // a full annulus must fit between the smallest and largest frequencies
        if xi_max / xi_min < (8.0 / 3.0) / INNER_RADIUS {
            return Err(Error::Config(format!(
                "grid {} too small to host a full dyadic annulus",
                grid.n_per_axis
            )));
        }
        let radii = radii_of(grid);
        let multipliers = (j_min..=j_max)
            .map(|j| radii.iter().map(|&r| phi_j(j, r)).collect())
            .collect();
        Ok(LpPartition {
            grid: *grid,
            j_min,
            j_max,
            multipliers: Arc::new(multipliers),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bands(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    pub fn band_count(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    /// `|ξ|` for every stored mode.
    pub fn radii(&self) -> Vec<f64> {
        radii_of(&self.grid)
    }

    /// `φ_j(ξ)` on every stored mode.
    pub fn band_multiplier(&self, j: i32) -> Result<&[f64]> {
        self.check_band(j)?;
        Ok(&self.multipliers[(j - self.j_min) as usize])
    }

    fn check_band(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::Domain(format!(
                "band {j} outside resolvable range [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        Ok(())
    }
}

/// `F^{-1}[φ_j F u]`
pub fn lp_block(u: &VectorField, j: i32, part: &LpPartition) -> Result<VectorField> {
    let m = part.band_multiplier(j)?;
    Ok(u.map_indexed(|i, z| z * m[i]))
}

/// Bandpassed pieces of a field; their sum rebuilds the mean-free part.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub j_min: i32,
    pub blocks: Vec<VectorField>,
}

impl BlockDecomposition {
    pub fn new(u: &VectorField, part: &LpPartition) -> Result<Self> {
        let blocks = part
            .bands()
            .map(|j| lp_block(u, j, part))
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockDecomposition { j_min: part.j_min, blocks })
    }

    pub fn block(&self, j: i32) -> Option<&VectorField> {
        let i = j - self.j_min;
        if i < 0 {
            return None;
        }
        self.blocks.get(i as usize)
    }

    pub fn reconstruct(&self) -> Option<VectorField> {
        let mut it = self.blocks.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, b| acc.add(b)))
    }
}

impl VectorField {
    pub(crate) fn map_indexed(&self, f: impl Fn(usize, Complex64) -> Complex64) -> VectorField {
        let c = self.comps();
        let m = |k: usize| c[k].iter().enumerate().map(|(i, &z)| f(i, z)).collect::<Vec<_>>();
        VectorField::from_coeffs(*self.grid(), [m(0), m(1), m(2)]).expect("sized by construction")
    }
}

// ---------------------------------------------------------------------------
// Morrey

/// How the supremum over balls is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorreyPolicy {
    /// Ball centers sit on every `center_stride`-th grid point per axis.
    pub center_stride: usize,
    /// Smallest dyadic radius, in grid cells.
    pub min_radius_cells: usize,
}

impl Default for MorreyPolicy {
    fn default() -> Self {
        MorreyPolicy {
            center_stride: 2,
            min_radius_cells: 2,
        }
    }
}

impl MorreyPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.center_stride == 0 || self.min_radius_cells == 0 {
            return Err(Error::Config("Morrey policy strides must be positive".into()));
        }
        Ok(())
    }

    /// Ball radii in cells: `N/2, N/4, …, ≥ min_radius_cells`, plus `None`
    /// for the ball of radius `√3 L/2` that covers the whole torus.
    pub fn radii_cells(&self, grid: &GridSpec) -> Vec<Option<usize>> {
        let mut out = vec![None];
        let mut r = grid.n_per_axis / 2;
        while r >= self.min_radius_cells.max(1) {
            out.push(Some(r));
            r /= 2;
        }
        out
    }

    /// Physical radii, covering ball first.
    pub fn radii(&self, grid: &GridSpec) -> Vec<f64> {
        self.radii_cells(grid)
            .into_iter()
            .map(|r| match r {
                None => 0.5 * 3f64.sqrt() * grid.box_length,
                Some(c) => c as f64 * grid.spacing(),
            })
            .collect()
    }
}

type KernelCache = Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>;

/// Real DFT of the periodic ball indicator of radius `r_cells`.
fn ball_kernel(n: usize, r_cells: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<KernelCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("kernel cache").get(&(n, r_cells)) {
        return k.clone();
    }
    let r2 = (r_cells * r_cells) as i64;
    let d = |i: usize| -> i64 {
        let i = i as i64;
        let n = n as i64;
        i.min(n - i)
    };
    let mut buf = vec![Complex64::default(); n * n * n];
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let dist2 = d(ix).pow(2) + d(iy).pow(2) + d(iz).pow(2);
                if dist2 <= r2 {
                    buf[(ix * n + iy) * n + iz] = Complex64::new(1.0, 0.0);
                }
            }
        }
    }
    fft::plan(n).forward_raw(&mut buf);
    let k = Arc::new(buf.into_iter().map(|c| c.re).collect::<Vec<_>>());
    cache.lock().expect("kernel cache").insert((n, r_cells), k.clone());
    k
}

fn abs_pow(x: f64, q: f64) -> f64 {
    let a = x.abs();
    if q == 2.0 {
        a * a
    } else if q == 1.0 {
        a
    } else if q == 3.0 {
        a * a * a
    } else {
        a.powf(q)
    }
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(q >= 1.0 && q <= p && p.is_finite()) {
        return Err(Error::Domain(format!(
            "Morrey exponents need 1 <= q <= p < inf, got p={p}, q={q}"
        )));
    }
    Ok(())
}

/// Largest ball sum of `|f|^q` per radius for up to two real arrays at once.
/// Returns one `Vec` (indexed like `policy.radii_cells`) per input.
fn ball_sum_maxima(grid: &GridSpec, arrays: &[&[f64]], policy: &MorreyPolicy) -> Vec<Vec<f64>> {
    debug_assert!(!arrays.is_empty() && arrays.len() <= 2);
    let n = grid.n_per_axis;
    let radii = policy.radii_cells(grid);
    let mut out = vec![Vec::with_capacity(radii.len()); arrays.len()];
    let mut z: Vec<Complex64> = (0..grid.len())
        .map(|i| Complex64::new(arrays[0][i], arrays.get(1).map_or(0.0, |a| a[i])))
        .collect();
    let totals: Vec<f64> = arrays.iter().map(|a| a.iter().sum()).collect();
    let plan = fft::plan(n);
    plan.forward_raw(&mut z);
    let norm = 1.0 / grid.len() as f64;
    let stride = policy.center_stride.max(1);
    // Sampling the convolution on the stride lattice folds its spectrum onto
    // an (n/stride)^3 grid, so only a small inverse transform is needed.
    let m = if n.is_multiple_of(stride) { n / stride } else { 0 };
    let small = (m > 0).then(|| fft::plan(m));
    let mut w = vec![Complex64::default(); if m > 0 { m * m * m } else { grid.len() }];
    for r in radii {
        let Some(rc) = r else {
            for (o, t) in out.iter_mut().zip(&totals) {
                o.push(*t);
            }
            continue;
        };
        let k = ball_kernel(n, rc);
        let mut best = [f64::NEG_INFINITY; 2];
        if let Some(small) = &small {
            w.iter_mut().for_each(|c| *c = Complex64::default());
            for ix in 0..n {
                for iy in 0..n {
                    let src = grid.flat(ix, iy, 0);
                    let dst = ((ix % m) * m + iy % m) * m;
                    for iz in 0..n {
                        w[dst + iz % m] += z[src + iz] * k[src + iz];
                    }
                }
            }
            small.inverse(&mut w);
            for v in &w {
                best[0] = best[0].max(v.re * norm);
                best[1] = best[1].max(v.im * norm);
            }
        } else {
            for ((wi, zi), ki) in w.iter_mut().zip(&z).zip(k.iter()) {
                *wi = zi * ki;
            }
            plan.inverse(&mut w);
            for ix in (0..n).step_by(stride) {
                for iy in (0..n).step_by(stride) {
                    for iz in (0..n).step_by(stride) {
                        let v = w[grid.flat(ix, iy, iz)];
                        best[0] = best[0].max(v.re * norm);
                        best[1] = best[1].max(v.im * norm);
                    }
                }
            }
        }
        for (o, b) in out.iter_mut().zip(best) {
            o.push(b);
        }
    }
    out
}

fn morrey_from_maxima(grid: &GridSpec, maxima: &[f64], p: f64, q: f64, policy: &MorreyPolicy) -> f64 {
    let vol = grid.cell_volume();
    let expo = 3.0 / p - 3.0 / q;
    policy
        .radii(grid)
        .iter()
        .zip(maxima)
        .map(|(&r, &s)| r.powf(expo) * (s.max(0.0) * vol).powf(1.0 / q))
        .fold(0.0, f64::max)
}

/// Discrete Morrey norm of one real sample array:
/// `max_{x₀,R} R^{3/p−3/q} (Σ_{|x−x₀|≤R} |u|^q h³)^{1/q}`.
pub fn morrey_norm_samples(grid: &GridSpec, samples: &[f64], p: f64, q: f64, policy: &MorreyPolicy) -> Result<f64> {
    check_exponents(p, q)?;
    policy.validate()?;
    if samples.len() != grid.len() {
        return Err(Error::Config("sample array does not match grid".into()));
    }
    let pw: Vec<f64> = samples.iter().map(|&x| abs_pow(x, q)).collect();
    let maxima = ball_sum_maxima(grid, &[&pw], policy);
    Ok(morrey_from_maxima(grid, &maxima[0], p, q, policy))
}

/// Morrey norm of a vector field: max over components.
pub fn morrey_norm(u: &VectorField, p: f64, q: f64, policy: &MorreyPolicy) -> Result<f64> {
    check_exponents(p, q)?;
    policy.validate()?;
    let g = *u.grid();
    let phys = u.physical();
    let mut best = 0.0f64;
    for s in &phys {
        best = best.max(morrey_norm_samples(&g, s, p, q, policy)?);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Besov-Morrey

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Summability {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "inf")]
    Infinity,
}

/// Index tuple `(s, p, q, r)` of a homogeneous Besov-Morrey norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub r: Summability,
    #[serde(default)]
    pub morrey: MorreyPolicy,
}

impl Default for NormSpec {
    /// `p = 3, q = 2, r = 1` at the critical index `s = 3/p − 1 = 0`.
    fn default() -> Self {
        NormSpec::critical(3.0, 2.0)
    }
}

impl NormSpec {
    /// The scaling-critical index `s = 3/p − 1` with `r = 1`.
    pub fn critical(p: f64, q: f64) -> Self {
        NormSpec {
            s: 3.0 / p - 1.0,
            p,
            q,
            r: Summability::One,
            morrey: MorreyPolicy::default(),
        }
    }

    pub fn with_s(&self, s: f64) -> Self {
        NormSpec { s, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponents(self.p, self.q)?;
        if !self.s.is_finite() {
            return Err(Error::Config("regularity index must be finite".into()));
        }
        self.morrey.validate()
    }

    /// Same `(p, q, r)` and Morrey policy; `s` may differ.
    pub fn same_family(&self, other: &NormSpec) -> bool {
        self.p == other.p && self.q == other.q && self.r == other.r && self.morrey == other.morrey
    }
}

/// Morrey norms of every dyadic block of one field. The regularity index
/// only reweights these, so one profile serves every `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    pub j_min: i32,
    pub values: Vec<f64>,
}

impl BandProfile {
    pub fn besov(&self, s: f64, r: Summability) -> f64 {
        let weighted = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| 2f64.powf(s * (self.j_min + i as i32) as f64) * v);
        match r {
            Summability::One => weighted.sum(),
            Summability::Infinity => weighted.fold(0.0, f64::max),
        }
    }

    pub fn zeros(j_min: i32, len: usize) -> Self {
        BandProfile {
            j_min,
            values: vec![0.0; len],
        }
    }
}

/// Band profile of a field given by its component spectra. Empty blocks are
/// skipped; nonempty blocks are transformed two per FFT.
pub fn band_profile(
    comps: &[&[Complex64]],
    part: &LpPartition,
    p: f64,
    q: f64,
    policy: &MorreyPolicy,
) -> Result<BandProfile> {
    check_exponents(p, q)?;
    policy.validate()?;
    let g = *part.grid();
    for c in comps {
        if c.len() != g.len() {
            return Err(Error::Integrity("spectrum does not match partition grid".into()));
        }
    }
    let mut profile = BandProfile::zeros(part.j_min, part.band_count());
    // (band slot, block spectrum) for nonzero blocks
    let mut items: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for (slot, m) in part.multipliers.iter().enumerate() {
        for c in comps {
            let block: Vec<Complex64> = c.iter().zip(m).map(|(z, &w)| z * w).collect();
            if block.iter().any(|z| z.re != 0.0 || z.im != 0.0) {
                items.push((slot, block));
            }
        }
    }
    for pair in items.chunks(2) {
        let specs: Vec<&[Complex64]> = pair.iter().map(|(_, b)| b.as_slice()).collect();
        let phys = physical_batch(&g, &specs);
        let pw: Vec<Vec<f64>> = phys
            .iter()
            .map(|a| a.iter().map(|&x| abs_pow(x, q)).collect())
            .collect();
        let refs: Vec<&[f64]> = pw.iter().map(|v| v.as_slice()).collect();
        let maxima = ball_sum_maxima(&g, &refs, policy);
        for ((slot, _), mx) in pair.iter().zip(&maxima) {
            let v = morrey_from_maxima(&g, mx, p, q, policy);
            profile.values[*slot] = profile.values[*slot].max(v);
        }
    }
    Ok(profile)
}

pub fn vector_profile(u: &VectorField, part: &LpPartition, spec: &NormSpec) -> Result<BandProfile> {
    part.grid().check_same(u.grid())?;
    let c = u.comps();
    band_profile(&[&c[0], &c[1], &c[2]], part, spec.p, spec.q, &spec.morrey)
}

/// `‖{2^{sj} ‖φ_j * u‖_{M^p_q}}‖_{ℓ^r}` over the resolvable bands.
pub fn besov_morrey_norm(u: &VectorField, spec: &NormSpec, part: &LpPartition) -> Result<f64> {
    spec.validate()?;
    Ok(vector_profile(u, part, spec)?.besov(spec.s, spec.r))
}

pub fn besov_morrey_norm_scalar(u: &ScalarField, spec: &NormSpec, part: &LpPartition) -> Result<f64> {
    spec.validate()?;
    part.grid().check_same(u.grid())?;
    Ok(band_profile(&[u.coeffs()], part, spec.p, spec.q, &spec.morrey)?.besov(spec.s, spec.r))
}

/// Discrete `L^p` norm `(Σ |u|^p h³)^{1/p}`, max over components.
pub fn lp_norm(u: &VectorField, p: f64) -> f64 {
    let g = *u.grid();
    u.physical()
        .iter()
        .map(|c| (c.iter().map(|&x| abs_pow(x, p)).sum::<f64>() * g.cell_volume()).powf(1.0 / p))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_solenoidal, Ensemble};

    #[test]
    fn profile_supports() {
        for i in 0..=4000 {
            let r = i as f64 * 1e-3;
            let v = phi(r);
            if !(INNER_RADIUS..=8.0 / 3.0).contains(&r) {
                assert_eq!(v, 0.0, "phi({r}) = {v}");
            }
            assert!((0.0..=1.0).contains(&v));
            if r > OUTER_RADIUS {
                assert_eq!(psi(r), 0.0);
            }
        }
    }

    #[test]
    fn partition_identities_on_grid() {
        for n in [8, 16, 32] {
            for l in [2.0 * std::f64::consts::PI, 1.0, 7.5] {
                let g = GridSpec::new(n, l).unwrap();
                let part = LpPartition::build(&g).unwrap();
                for (idx, &r) in part.radii().iter().enumerate() {
                    if idx == 0 {
                        continue;
                    }
                    let sum: f64 = part.bands().map(|j| phi_j(j, r)).sum();
                    assert!((sum - 1.0).abs() < 1e-12, "n={n} r={r} sum={sum}");
                }
                for &r in &part.radii() {
                    let inh = psi(r) + (0..=part.j_max.max(0)).map(|j| phi_j(j, r)).sum::<f64>();
                    assert!((inh - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn distant_bands_do_not_overlap() {
        let g = GridSpec::cube(32).unwrap();
        let part = LpPartition::build(&g).unwrap();
        for &r in &part.radii() {
            for j in part.bands() {
                for k in part.bands() {
                    if (j - k).abs() >= 2 {
                        assert_eq!(phi_j(j, r) * phi_j(k, r), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn band_out_of_range_is_domain_error() {
        let g = GridSpec::cube(16).unwrap();
        let part = LpPartition::build(&g).unwrap();
        let u = VectorField::zeros(g);
        assert!(matches!(lp_block(&u, part.j_max + 1, &part), Err(Error::Domain(_))));
        assert!(lp_block(&u, part.j_min, &part).unwrap().is_zero());
    }

    #[test]
    fn blocks_reconstruct_mean_free_field() {
        let g = GridSpec::cube(16).unwrap();
        let part = LpPartition::build(&g).unwrap();
        let u = random_solenoidal(&g, &Ensemble { alpha: 1.0, k_max: 7.0 }, 5);
        let rec = BlockDecomposition::new(&u, &part).unwrap().reconstruct().unwrap();
        assert!(rec.sub(&u).l2_norm() < 1e-10 * u.l2_norm());
    }

    #[test]
    fn single_mode_lives_in_at_most_two_bands() {
        let g = GridSpec::cube(32).unwrap();
        let part = LpPartition::build(&g).unwrap();
        // |ξ| = 4 = 2^2
        let u = VectorField::from_fn(g, |x| [0.0, 0.0, (4.0 * x[0]).cos()]);
        let live: Vec<i32> = part
            .bands()
            .filter(|&j| lp_block(&u, j, &part).unwrap().max_abs_coeff() > 1e-12)
            .collect();
        assert!(!live.is_empty() && live.len() <= 2, "{live:?}");
        for j in &live {
            assert!(INNER_RADIUS * 2f64.powi(*j) <= 4.0 && 4.0 <= 8.0 / 3.0 * 2f64.powi(*j));
        }
    }

    /// Direct scan over centers and cells.
    fn brute_force_morrey(g: &GridSpec, s: &[f64], p: f64, q: f64, policy: &MorreyPolicy) -> f64 {
        let n = g.n_per_axis as i64;
        let d = |a: i64, b: i64| {
            let t = (a - b).rem_euclid(n);
            t.min(n - t)
        };
        let mut best = 0.0f64;
        for (rc, r) in policy.radii_cells(g).into_iter().zip(policy.radii(g)) {
            let mut sup = 0.0f64;
            for cx in (0..n).step_by(policy.center_stride) {
                for cy in (0..n).step_by(policy.center_stride) {
                    for cz in (0..n).step_by(policy.center_stride) {
                        let mut acc = 0.0;
                        for x in 0..n {
                            for y in 0..n {
                                for z in 0..n {
                                    let inside = match rc {
                                        None => true,
                                        Some(rc) => {
                                            let rc = rc as i64;
                                            d(x, cx).pow(2) + d(y, cy).pow(2) + d(z, cz).pow(2) <= rc * rc
                                        }
                                    };
                                    if inside {
                                        acc += s[g.flat(x as usize, y as usize, z as usize)].abs().powf(q);
                                    }
                                }
                            }
                        }
                        sup = sup.max(acc);
                    }
                }
            }
            best = best.max(r.powf(3.0 / p - 3.0 / q) * (sup * g.cell_volume()).powf(1.0 / q));
        }
        best
    }

    #[test]
    fn morrey_matches_brute_force_scan() {
        let g = GridSpec::new(8, 2.5).unwrap();
        let u = random_solenoidal(&g, &Ensemble { alpha: 0.5, k_max: 3.0 }, 9);
        let s = &u.to_physical().unwrap()[0];
        for stride in [1, 2, 3] {
            let policy = MorreyPolicy {
                center_stride: stride,
                min_radius_cells: 1,
            };
            for (p, q) in [(3.0, 2.0), (4.0, 1.5), (2.0, 2.0)] {
                let fast = morrey_norm_samples(&g, s, p, q, &policy).unwrap();
                let slow = brute_force_morrey(&g, s, p, q, &policy);
                assert!((fast - slow).abs() < 1e-12 * slow, "stride {stride}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn morrey_degenerates_to_lp_and_constants() {
        let g = GridSpec::new(16, 3.0).unwrap();
        let policy = MorreyPolicy::default();
        let c = 1.7;
        let s = vec![c; g.len()];
        for p in [1.0, 2.0, 3.0, 4.5] {
            let m = morrey_norm_samples(&g, &s, p, p, &policy).unwrap();
            let want = c * g.box_length.powf(3.0 / p);
            assert!((m - want).abs() < 1e-9 * want);
        }
        assert!(matches!(
            morrey_norm_samples(&g, &s, 2.0, 3.0, &policy),
            Err(Error::Domain(_))
        ));
        assert_eq!(morrey_norm_samples(&g, &vec![0.0; g.len()], 3.0, 2.0, &policy).unwrap(), 0.0);
    }

    #[test]
    fn besov_norm_is_zero_on_zero_field() {
        let g = GridSpec::cube(16).unwrap();
        let part = LpPartition::build(&g).unwrap();
        let v = besov_morrey_norm(&VectorField::zeros(g), &NormSpec::default(), &part).unwrap();
        assert_eq!(v, 0.0);
    }
}
