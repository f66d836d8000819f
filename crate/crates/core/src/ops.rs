//! Fourier-multiplier operators and dealiased pseudo-spectral products.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{physical_batch, spectral_batch, ScalarField, VectorField};
use crate::grid::GridSpec;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Visit every mode with its derivative wavevector `ξ` (Nyquist zeroed).
fn for_each_mode(grid: &GridSpec, mut f: impl FnMut(usize, [f64; 3])) {
    let k = grid.derivative_wavenumbers();
    let n = grid.n_per_axis;
    let mut idx = 0;
    for &kx in &k {
        for &ky in &k {
            for &kz in k.iter().take(n) {
                f(idx, [kx, ky, kz]);
                idx += 1;
            }
        }
    }
}

/// `i ξ · f̂(k)`
pub fn divergence(f: &VectorField) -> ScalarField {
    let g = *f.grid();
    let c = f.comps();
    let mut out = vec![Complex64::default(); g.len()];
    for_each_mode(&g, |i, xi| {
        out[i] = I * (xi[0] * c[0][i] + xi[1] * c[1][i] + xi[2] * c[2][i]);
    });
    ScalarField::from_coeffs(g, out).expect("sized by construction")
}

/// `i ξ × f̂(k)`
pub fn curl(f: &VectorField) -> VectorField {
    let g = *f.grid();
    let c = f.comps();
    let mut out = [
        vec![Complex64::default(); g.len()],
        vec![Complex64::default(); g.len()],
        vec![Complex64::default(); g.len()],
    ];
    for_each_mode(&g, |i, xi| {
        let v = [c[0][i], c[1][i], c[2][i]];
        out[0][i] = I * (xi[1] * v[2] - xi[2] * v[1]);
        out[1][i] = I * (xi[2] * v[0] - xi[0] * v[2]);
        out[2][i] = I * (xi[0] * v[1] - xi[1] * v[0]);
    });
    VectorField::from_coeffs(g, out).expect("sized by construction")
}

/// `i ξ φ̂(k)`
pub fn gradient(phi: &ScalarField) -> VectorField {
    let g = *phi.grid();
    let c = phi.coeffs();
    let mut out = [
        vec![Complex64::default(); g.len()],
        vec![Complex64::default(); g.len()],
        vec![Complex64::default(); g.len()],
    ];
    for_each_mode(&g, |i, xi| {
        for a in 0..3 {
            out[a][i] = I * xi[a] * c[i];
        }
    });
    VectorField::from_coeffs(g, out).expect("sized by construction")
}

/// Leray projector `f̂ − ξ (ξ·f̂)/|ξ|^2`; the zero mode maps to zero.
pub fn leray_project(f: &VectorField) -> VectorField {
    let g = *f.grid();
    let mut out = f.clone();
    let comps = out.comps_mut();
    for_each_mode(&g, |i, xi| {
        if i == 0 {
            for c in comps.iter_mut() {
                c[i] = Complex64::default();
            }
            return;
        }
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            return;
        }
        let dot = (xi[0] * comps[0][i] + xi[1] * comps[1][i] + xi[2] * comps[2][i]) / k2;
        for a in 0..3 {
            comps[a][i] -= xi[a] * dot;
        }
    });
    out
}

/// Inverse curl on divergence-free fields, symbol `i |ξ|^{-2} ξ ×`.
pub fn curl_inv(j: &VectorField) -> VectorField {
    let g = *j.grid();
    let c = j.comps();
    let mut out = [
        vec![Complex64::default(); g.len()],
        vec![Complex64::default(); g.len()],
        vec![Complex64::default(); g.len()],
    ];
    for_each_mode(&g, |i, xi| {
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            return;
        }
        let v = [c[0][i], c[1][i], c[2][i]];
        let s = I / k2;
        out[0][i] = s * (xi[1] * v[2] - xi[2] * v[1]);
        out[1][i] = s * (xi[2] * v[0] - xi[0] * v[2]);
        out[2][i] = s * (xi[0] * v[1] - xi[1] * v[0]);
    });
    VectorField::from_coeffs(g, out).expect("sized by construction")
}

/// `-|ξ|^2 f̂`
pub fn laplacian(f: &VectorField) -> VectorField {
    let g = *f.grid();
    let k = g.wavenumbers();
    let n = g.n_per_axis;
    let mut out = f.clone();
    for c in out.comps_mut().iter_mut() {
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let k2 = k[ix] * k[ix] + k[iy] * k[iy] + k[iz] * k[iz];
                    c[g.flat(ix, iy, iz)] *= -k2;
                }
            }
        }
    }
    out
}

/// Per-mode heat factors `exp(−κ |ξ|^2 t)`.
pub fn heat_factors(grid: &GridSpec, t: f64, kappa: f64) -> Vec<f64> {
    let k = grid.wavenumbers();
    let n = grid.n_per_axis;
    let mut out = Vec::with_capacity(grid.len());
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let k2 = k[ix] * k[ix] + k[iy] * k[iy] + k[iz] * k[iz];
                out.push((-kappa * k2 * t).exp());
            }
        }
    }
    out
}

pub(crate) fn apply_factors(f: &VectorField, factors: &[f64]) -> VectorField {
    let mut out = f.clone();
    for c in out.comps_mut().iter_mut() {
        for (z, &m) in c.iter_mut().zip(factors) {
            *z *= m;
        }
    }
    out
}

/// Heat semigroup `e^{κ t Δ}`.
pub fn heat_propagate(f: &VectorField, t: f64, kappa: f64) -> Result<VectorField> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("heat propagation time must be >= 0, got {t}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("diffusivity must be positive, got {kappa}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(apply_factors(f, &heat_factors(f.grid(), t, kappa)))
}

// ---------------------------------------------------------------------------
// products

/// Divergence of a tensor given by spectral entries `t[i][j]`:
/// `out_i = Σ_j i ξ_j t_ij`.
fn tensor_div_spectral(grid: &GridSpec, t: [[&[Complex64]; 3]; 3]) -> VectorField {
    let mut out = [
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
    ];
    for_each_mode(grid, |idx, xi| {
        for i in 0..3 {
            out[i][idx] = I * (xi[0] * t[i][0][idx] + xi[1] * t[i][1][idx] + xi[2] * t[i][2][idx]);
        }
    });
    VectorField::from_coeffs(*grid, out).expect("sized by construction")
}

pub(crate) fn dealiased_spectra(grid: &GridSpec, reals: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let mask = grid.dealias_mask();
    let mut out = spectral_batch(grid, reals);
    for s in &mut out {
        for (z, &keep) in s.iter_mut().zip(&mask) {
            if !keep {
                *z = Complex64::default();
            }
        }
    }
    out
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Dealiased pointwise product of two scalar fields.
pub fn product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let g = *a.grid();
    let pa = a.physical();
    let pb = b.physical();
    let p = mul(&pa, &pb);
    let mut s = dealiased_spectra(&g, &[&p]);
    ScalarField::from_coeffs(g, s.pop().unwrap()).expect("sized by construction")
}

/// `div(v ⊗ w)`, i.e. `out_i = ∂_j (v_i w_j)`, with the dealias mask applied
/// to every product.
pub fn tensor_divergence(v: &VectorField, w: &VectorField) -> VectorField {
    let g = *v.grid();
    let pv = v.physical();
    let pw = w.physical();
    tensor_divergence_physical(&g, &pv, &pw)
}

pub(crate) fn tensor_divergence_physical(g: &GridSpec, pv: &[Vec<f64>; 3], pw: &[Vec<f64>; 3]) -> VectorField {
    let prods: Vec<Vec<f64>> = (0..9).map(|k| mul(&pv[k / 3], &pw[k % 3])).collect();
    let refs: Vec<&[f64]> = prods.iter().map(|p| p.as_slice()).collect();
    let s = dealiased_spectra(g, &refs);
    tensor_div_spectral(
        g,
        [
            [&s[0], &s[1], &s[2]],
            [&s[3], &s[4], &s[5]],
            [&s[6], &s[7], &s[8]],
        ],
    )
}

/// Upper-triangle index pairs of a symmetric 3×3 tensor.
pub(crate) const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
/// Strictly upper index pairs of an antisymmetric 3×3 tensor.
pub(crate) const ANTISYM_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Entries `½(v_i w_j + w_i v_j)` over `SYM_PAIRS`.
pub(crate) fn sym_products(pv: &[Vec<f64>; 3], pw: &[Vec<f64>; 3]) -> Vec<Vec<f64>> {
    SYM_PAIRS
        .iter()
        .map(|&(i, j)| {
            pv[i]
                .iter()
                .zip(&pw[j])
                .zip(pw[i].iter().zip(&pv[j]))
                .map(|((a, b), (c, d))| 0.5 * (a * b + c * d))
                .collect()
        })
        .collect()
}

/// Entries `v_i w_j − w_i v_j` over `ANTISYM_PAIRS`.
pub(crate) fn antisym_products(pv: &[Vec<f64>; 3], pw: &[Vec<f64>; 3]) -> Vec<Vec<f64>> {
    ANTISYM_PAIRS
        .iter()
        .map(|&(i, j)| {
            pv[i]
                .iter()
                .zip(&pw[j])
                .zip(pw[i].iter().zip(&pv[j]))
                .map(|((a, b), (c, d))| a * b - c * d)
                .collect()
        })
        .collect()
}

/// Divergence of a symmetric tensor given by its dealiased spectral entries.
pub(crate) fn sym_div_spectral(g: &GridSpec, s: &[Vec<Complex64>]) -> VectorField {
    tensor_div_spectral(
        g,
        [
            [&s[0], &s[1], &s[2]],
            [&s[1], &s[3], &s[4]],
            [&s[2], &s[4], &s[5]],
        ],
    )
}

/// Divergence of an antisymmetric tensor given by its dealiased spectral
/// entries.
pub(crate) fn antisym_div_spectral(g: &GridSpec, s: &[Vec<Complex64>]) -> VectorField {
    let zero = vec![Complex64::default(); g.len()];
    let neg: Vec<Vec<Complex64>> = s.iter().map(|v| v.iter().map(|z| -z).collect()).collect();
    tensor_div_spectral(
        g,
        [
            [&zero, &s[0], &s[1]],
            [&neg[0], &zero, &s[2]],
            [&neg[1], &neg[2], &zero],
        ],
    )
}

/// `½ (div(v⊗w) + div(w⊗v))` from physical samples (six products).
pub(crate) fn sym_divergence_physical(g: &GridSpec, pv: &[Vec<f64>; 3], pw: &[Vec<f64>; 3]) -> VectorField {
    let prods = sym_products(pv, pw);
    let refs: Vec<&[f64]> = prods.iter().map(|p| p.as_slice()).collect();
    sym_div_spectral(g, &dealiased_spectra(g, &refs))
}

/// `div(v⊗w) − div(w⊗v)` from physical samples (three products).
pub(crate) fn antisym_divergence_physical(g: &GridSpec, pv: &[Vec<f64>; 3], pw: &[Vec<f64>; 3]) -> VectorField {
    let prods = antisym_products(pv, pw);
    let refs: Vec<&[f64]> = prods.iter().map(|p| p.as_slice()).collect();
    antisym_div_spectral(g, &dealiased_spectra(g, &refs))
}

/// Dealiased physical-space cross product `a × b`.
pub fn cross(a: &VectorField, b: &VectorField) -> VectorField {
    let g = *a.grid();
    let pa = a.physical();
    let pb = b.physical();
    cross_physical(&g, &pa, &pb)
}

pub(crate) fn cross_physical(g: &GridSpec, pa: &[Vec<f64>; 3], pb: &[Vec<f64>; 3]) -> VectorField {
    let c: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            (0..g.len())
                .map(|x| pa[j][x] * pb[k][x] - pa[k][x] * pb[j][x])
                .collect()
        })
        .collect();
    let mut s = dealiased_spectra(g, &[&c[0], &c[1], &c[2]]).into_iter();
    VectorField::from_coeffs(*g, [s.next().unwrap(), s.next().unwrap(), s.next().unwrap()])
        .expect("sized by construction")
}

/// Advective derivative `(w·∇) v` assembled in physical space from spectral
/// gradients of `v`, then dealiased.
pub fn advect(w: &VectorField, v: &VectorField) -> VectorField {
    let g = *v.grid();
    let pw = w.physical();
    let grads: Vec<VectorField> = (0..3)
        .map(|i| {
            let s = ScalarField::from_coeffs(g, v.comp(i).to_vec()).expect("sized");
            gradient(&s)
        })
        .collect();
    let specs: Vec<&[Complex64]> = grads.iter().flat_map(|gr| gr.comps().iter().map(|c| c.as_slice())).collect();
    let dv = physical_batch(&g, &specs);
    let out: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            (0..g.len())
                .map(|x| pw[0][x] * dv[3 * i][x] + pw[1][x] * dv[3 * i + 1][x] + pw[2][x] * dv[3 * i + 2][x])
                .collect()
        })
        .collect();
    let mut s = dealiased_spectra(&g, &[&out[0], &out[1], &out[2]]).into_iter();
    VectorField::from_coeffs(g, [s.next().unwrap(), s.next().unwrap(), s.next().unwrap()])
        .expect("sized by construction")
}

/// Dealiased `|v|^2` as a scalar field.
pub fn magnitude_squared(v: &VectorField) -> ScalarField {
    let g = *v.grid();
    let p = v.physical();
    let m: Vec<f64> = (0..g.len())
        .map(|x| p[0][x] * p[0][x] + p[1][x] * p[1][x] + p[2][x] * p[2][x])
        .collect();
    let mut s = dealiased_spectra(&g, &[&m]);
    ScalarField::from_coeffs(g, s.pop().unwrap()).expect("sized by construction")
}

/// Total pressure `Λ = φ + |B|^2/2` and kinematic pressure `φ`, both in the
/// mean-free gauge.
#[derive(Debug, Clone)]
pub struct Pressure {
    pub lambda: ScalarField,
    pub phi: ScalarField,
}

/// Recovers `Λ` from `∇Λ = F − P F` with `F = div(B⊗B) − div(u⊗u)`.
pub fn recover_pressure(u: &VectorField, b: &VectorField) -> Pressure {
    let g = *u.grid();
    let force = tensor_divergence(b, b).sub(&tensor_divergence(u, u));
    let c = force.comps();
    let mut lam = vec![Complex64::default(); g.len()];
    for_each_mode(&g, |i, xi| {
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            return;
        }
        lam[i] = -I * (xi[0] * c[0][i] + xi[1] * c[1][i] + xi[2] * c[2][i]) / k2;
    });
    let lambda = ScalarField::from_coeffs(g, lam).expect("sized by construction");
    let mut phi = lambda.sub(&magnitude_squared(b).scaled(0.5));
    phi.strip_mean();
    Pressure { lambda, phi }
}
