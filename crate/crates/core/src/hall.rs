//! The extended `(u, B, J)` Hall-MHD nonlinearity and a residual check
//! against the original two-field form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::GridSpec;
use crate::ops::{
    advect, antisym_div_spectral, antisym_divergence_physical, antisym_products, cross, curl, curl_inv,
    dealiased_spectra, divergence, laplacian, leray_project, sym_div_spectral, sym_divergence_physical,
};

/// Relative divergence tolerance accepted by [`ExtendedState::new`].
pub const DIV_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub mu: f64,
    pub nu: f64,
    pub h: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams { mu: 1.0, nu: 1.0, h: 1.0 }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("nu", self.nu), ("h", self.h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Diffusivity of slot `i` (0 = u, 1 = B, 2 = J).
    pub fn kappa(&self, slot: usize) -> f64 {
        if slot == 0 {
            self.mu
        } else {
            self.nu
        }
    }
}

/// `Θ = (u, B, J)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub u: VectorField,
    pub b: VectorField,
    pub j: VectorField,
}

fn divergence_defect(f: &VectorField) -> f64 {
    let g = f.grid();
    let scale = f.l2_norm() * g.xi_unit() * g.n_per_axis as f64;
    let d = divergence(f).l2_norm();
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

impl ExtendedState {
    /// Checked constructor: equal grids, solenoidal and mean-free slots.
    pub fn new(u: VectorField, b: VectorField, j: VectorField) -> Result<Self> {
        u.grid().check_same(b.grid())?;
        u.grid().check_same(j.grid())?;
        let s = ExtendedState { u, b, j };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn from_parts(u: VectorField, b: VectorField, j: VectorField) -> Self {
        ExtendedState { u, b, j }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in ["u", "b", "j"].iter().zip(self.fields()) {
            let d = divergence_defect(f);
            if d > DIV_TOLERANCE {
                return Err(Error::Integrity(format!("{name} is not divergence-free (defect {d:.3e})")));
            }
            if f.mean_magnitude() > 1e-12 * f.max_abs_coeff().max(f64::MIN_POSITIVE) {
                return Err(Error::Integrity(format!("{name} has a nonzero mean")));
            }
        }
        Ok(())
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let z = VectorField::zeros(grid);
        ExtendedState {
            u: z.clone(),
            b: z.clone(),
            j: z,
        }
    }

    /// `(u, B, curl B)` with `u, B` projected and mean-stripped.
    pub fn consistent(u: &VectorField, b: &VectorField) -> Result<Self> {
        u.grid().check_same(b.grid())?;
        let mut u = leray_project(u);
        let mut b = leray_project(b);
        u.strip_mean();
        b.strip_mean();
        let j = curl(&b);
        ExtendedState::new(u, b, j)
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn fields(&self) -> [&VectorField; 3] {
        [&self.u, &self.b, &self.j]
    }

    pub fn map(&self, f: impl Fn(usize, &VectorField) -> VectorField) -> Self {
        ExtendedState {
            u: f(0, &self.u),
            b: f(1, &self.b),
            j: f(2, &self.j),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(&VectorField, &VectorField) -> VectorField) -> Self {
        ExtendedState {
            u: f(&self.u, &other.u),
            b: f(&self.b, &other.b),
            j: f(&self.j, &other.j),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a.sub(b))
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|_, f| f.scaled(a))
    }

    /// `self + a x`
    pub fn axpy(&self, a: f64, x: &Self) -> Self {
        self.zip_map(x, |s, xx| s.axpy(a, xx))
    }

    pub fn is_zero(&self) -> bool {
        self.fields().iter().all(|f| f.is_zero())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.fields().iter().map(|f| f.max_abs_coeff()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.fields().iter().map(|f| f.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Largest relative divergence defect over the three slots.
    pub fn divergence_defect(&self) -> f64 {
        self.fields().iter().map(|f| divergence_defect(f)).fold(0.0, f64::max)
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.fields().iter().map(|f| f.mean_magnitude()).fold(0.0, f64::max)
    }

    pub fn regrid(&self, grid: GridSpec) -> Result<Self> {
        Ok(ExtendedState {
            u: self.u.regrid(grid)?,
            b: self.b.regrid(grid)?,
            j: self.j.regrid(grid)?,
        })
    }
}

/// `Π_a(v, w) = ½ P (div(v⊗w) + div(w⊗v))`
pub fn pi_a(v: &VectorField, w: &VectorField) -> VectorField {
    let g = *v.grid();
    leray_project(&sym_divergence_physical(&g, &v.physical(), &w.physical()))
}

/// `Π_b(v, w) = div(v⊗w) − div(w⊗v)`
pub fn pi_b(v: &VectorField, w: &VectorField) -> VectorField {
    let g = *v.grid();
    antisym_divergence_physical(&g, &v.physical(), &w.physical())
}

/// `Π(Φ, Ψ)`: with `W = hΨ₃ − Ψ₁`, returns
/// `(Π_a(Φ₂,Ψ₂) − Π_a(Φ₁,Ψ₁), Π_b(Φ₂, W), ∇×Π_b(curl⁻¹Φ₃, W))`.
/// The B and J slots are re-projected to remove dealiasing residue.
pub fn extended_rhs(phi: &ExtendedState, psi: &ExtendedState, params: &PhysicalParams) -> ExtendedState {
    let g = *phi.grid();
    let a = curl_inv(&phi.j);
    let same = std::ptr::eq(phi, psi) || phi == psi;
    let p_phi = crate::field::physical_batch(
        &g,
        &[
            phi.u.comp(0),
            phi.u.comp(1),
            phi.u.comp(2),
            phi.b.comp(0),
            phi.b.comp(1),
            phi.b.comp(2),
            a.comp(0),
            a.comp(1),
            a.comp(2),
        ],
    );
    let p_psi = if same {
        None
    } else {
        Some(crate::field::physical_batch(
            &g,
            &[
                psi.u.comp(0),
                psi.u.comp(1),
                psi.u.comp(2),
                psi.b.comp(0),
                psi.b.comp(1),
                psi.b.comp(2),
                psi.j.comp(0),
                psi.j.comp(1),
                psi.j.comp(2),
            ],
        ))
    };
    let three = |v: &[Vec<f64>], k: usize| -> [Vec<f64>; 3] { [v[k].clone(), v[k + 1].clone(), v[k + 2].clone()] };
    let phi1 = three(&p_phi, 0);
    let phi2 = three(&p_phi, 3);
    let a_phys = three(&p_phi, 6);
    let (psi1, psi2, psi3) = match &p_psi {
        Some(p) => (three(p, 0), three(p, 3), three(p, 6)),
        None => {
            let j = crate::field::physical_batch(&g, &[psi.j.comp(0), psi.j.comp(1), psi.j.comp(2)]);
            (phi1.clone(), phi2.clone(), [j[0].clone(), j[1].clone(), j[2].clone()])
        }
    };
    let w: [Vec<f64>; 3] = std::array::from_fn(|c| {
        psi3[c]
            .iter()
            .zip(&psi1[c])
            .map(|(j, u)| params.h * j - u)
            .collect()
    });

    // symmetric part: ½(Φ₂⊗Ψ₂ + Ψ₂⊗Φ₂) − ½(Φ₁⊗Ψ₁ + Ψ₁⊗Φ₁)
    let s_b = crate::ops::sym_products(&phi2, &psi2);
    let s_u = crate::ops::sym_products(&phi1, &psi1);
    let sym: Vec<Vec<f64>> = s_b
        .iter()
        .zip(&s_u)
        .map(|(x, y)| x.iter().zip(y).map(|(a, b)| a - b).collect())
        .collect();
    let ab = antisym_products(&phi2, &w);
    let ac = antisym_products(&a_phys, &w);
    let mut refs: Vec<&[f64]> = sym.iter().map(|v| v.as_slice()).collect();
    refs.extend(ab.iter().map(|v| v.as_slice()));
    refs.extend(ac.iter().map(|v| v.as_slice()));
    let spec = dealiased_spectra(&g, &refs);
    let first = leray_project(&sym_div_spectral(&g, &spec[0..6]));
    let second = antisym_div_spectral(&g, &spec[6..9]);
    let third = curl(&antisym_div_spectral(&g, &spec[9..12]));
    ExtendedState::from_parts(first, leray_project(&second), leray_project(&third))
}

/// `(μΔu, νΔB, νΔJ)`
pub fn linear_part(theta: &ExtendedState, params: &PhysicalParams) -> ExtendedState {
    theta.map(|slot, f| laplacian(f).scaled(params.kappa(slot)))
}

/// `Δ_{μ,ν}Θ + Π(Θ, Θ)`
pub fn extended_time_derivative(theta: &ExtendedState, params: &PhysicalParams) -> ExtendedState {
    linear_part(theta, params).add(&extended_rhs(theta, theta, params))
}

/// Residual of the original two-field equations
///
/// `∂ₜu + P((u·∇)u) − μΔu − P(J×B)` and `∂ₜB − ∇×((u − hJ)×B) − νΔB`
///
/// evaluated with `J = ∇×B` and the supplied time derivative. Each residual
/// is divided by the sum of the L² norms of its terms; the larger is
/// returned.
pub fn original_rhs_residual(theta: &ExtendedState, dtheta_dt: &ExtendedState, params: &PhysicalParams) -> f64 {
    let u = &theta.u;
    let b = &theta.b;
    let j = curl(b);
    let adv = leray_project(&advect(u, u));
    let lorentz = leray_project(&cross(&j, b));
    let visc_u = laplacian(u).scaled(params.mu);
    let r_u = dtheta_dt.u.add(&adv).sub(&visc_u).sub(&lorentz);
    let scale_u = dtheta_dt.u.l2_norm() + adv.l2_norm() + visc_u.l2_norm() + lorentz.l2_norm();

    let drift = u.axpy(-params.h, &j);
    let induction = curl(&cross(&drift, b));
    let visc_b = laplacian(b).scaled(params.nu);
    let r_b = dtheta_dt.b.sub(&induction).sub(&visc_b);
    let scale_b = dtheta_dt.b.l2_norm() + induction.l2_norm() + visc_b.l2_norm();

    let rel = |r: f64, s: f64| if s == 0.0 { r } else { r / s };
    rel(r_u.l2_norm(), scale_u).max(rel(r_b.l2_norm(), scale_b))
}
