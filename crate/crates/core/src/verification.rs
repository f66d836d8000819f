//! Empirical constants of the norm estimates, and structural probes of
//! computed solutions: current consistency, scaling covariance, continuous
//! dependence and the size of the contraction ball.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::GridSpec;
use crate::hall::ExtendedState;
use crate::lp::{band_profile, vector_profile, BandProfile, LpPartition, NormSpec};
use crate::ops::{curl, curl_inv, product, tensor_divergence};
use crate::random::{derive_seed, random_scalar, random_solenoidal, Ensemble};
use crate::solver::{
    bilinear_constant, duhamel_bilinear, duhamel_integrate, heat_trajectory, picard_global, Normalization, SolverConfig,
};
use crate::trajectory::{ProfileSeries, Trajectory, TrajectoryNorms};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LemmaId {
    /// `‖div(v⊗w)‖_{3/p−1} ≤ C ‖v‖_{3/p} ‖w‖_{3/p}`
    DivVw,
    /// `‖div((curl⁻¹v)⊗w)‖_{3/p} ≤ C (‖v‖_{3/p−1}‖w‖_{3/p−1}‖v‖_{3/p+1}‖w‖_{3/p+1})^{1/2}`
    DivCurlinvW,
    /// `‖div(v⊗curl⁻¹w)‖_{3/p} ≤ C ‖v‖_{3/p+1} ‖w‖_{3/p−1}`
    DivVCurlinv,
    /// `‖uv‖_{3/p} ≤ C ‖u‖_{3/p} ‖v‖_{3/p}`
    Algebra,
    /// `‖e^{tΔ}u₀‖_{L∞(N^s)} + ‖e^{tΔ}u₀‖_{L¹(N^{s+2})} ≤ C ‖u₀‖_{N^s}`
    Heat,
    /// `‖z‖_{L∞(N^s)} + ‖z‖_{L¹(N^{s+2})} ≤ C ‖f‖_{L¹(N^s)}`
    Duhamel,
    /// `‖y‖²_{L²(N^{s+1})} ≤ C ‖y‖_{L∞(N^s)} ‖y‖_{L¹(N^{s+2})}`
    Interp,
}

impl LemmaId {
    pub const ALL: [LemmaId; 7] = [
        LemmaId::DivVw,
        LemmaId::DivCurlinvW,
        LemmaId::DivVCurlinv,
        LemmaId::Algebra,
        LemmaId::Heat,
        LemmaId::Duhamel,
        LemmaId::Interp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LemmaId::DivVw => "DIV_VW",
            LemmaId::DivCurlinvW => "DIV_CURLINV_W",
            LemmaId::DivVCurlinv => "DIV_V_CURLINV",
            LemmaId::Algebra => "ALGEBRA",
            LemmaId::Heat => "HEAT",
            LemmaId::Duhamel => "DUHAMEL",
            LemmaId::Interp => "INTERP",
        }
    }

    fn is_temporal(&self) -> bool {
        matches!(self, LemmaId::Heat | LemmaId::Duhamel | LemmaId::Interp)
    }
}

/// Sampling parameters for [`estimate_constant_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateOptions {
    pub ensemble: Ensemble,
    /// Horizon of the time-dependent lemmas.
    pub t_final: f64,
    pub n_steps: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            ensemble: Ensemble::default(),
            t_final: 1.0,
            n_steps: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub lemma_id: LemmaId,
    pub samples: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub grid: GridSpec,
    pub spec: NormSpec,
    pub seed: u64,
    pub options: EstimateOptions,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

struct Sampler<'a> {
    grid: GridSpec,
    part: &'a LpPartition,
    spec: &'a NormSpec,
    opts: &'a EstimateOptions,
}

impl Sampler<'_> {
    fn profile(&self, f: &VectorField) -> Result<BandProfile> {
        vector_profile(f, self.part, self.spec)
    }

    fn n(&self, p: &BandProfile, s: f64) -> f64 {
        p.besov(s, self.spec.r)
    }

    fn solver_cfg(&self) -> SolverConfig {
        SolverConfig {
            t_final: self.opts.t_final,
            n_steps: self.opts.n_steps,
            norm: *self.spec,
            ..SolverConfig::default()
        }
    }

    fn velocity_state(&self, u: VectorField) -> ExtendedState {
        let z = VectorField::zeros(self.grid);
        ExtendedState::from_parts(u, z.clone(), z)
    }

    /// One ratio, or `None` for a degenerate draw.
    fn sample(&self, lemma: LemmaId, seed: u64) -> Result<Option<f64>> {
        let g = &self.grid;
        let e = &self.opts.ensemble;
        let v = random_solenoidal(g, e, derive_seed(seed, 0));
        let w = random_solenoidal(g, e, derive_seed(seed, 1));
        let s0 = 3.0 / self.spec.p;
        match lemma {
            LemmaId::DivVw | LemmaId::DivCurlinvW | LemmaId::DivVCurlinv => pair_ratio(lemma, &v, &w, self.part, self.spec),
            LemmaId::Algebra => {
                let a = random_scalar(g, e, derive_seed(seed, 2));
                let b = random_scalar(g, e, derive_seed(seed, 3));
                let sp = |f: &crate::field::ScalarField| band_profile(&[f.coeffs()], self.part, self.spec.p, self.spec.q, &self.spec.morrey);
                let num = self.n(&sp(&product(&a, &b))?, s0);
                Ok(ratio(num, self.n(&sp(&a)?, s0) * self.n(&sp(&b)?, s0)))
            }
            LemmaId::Heat | LemmaId::Interp => {
                let cfg = self.solver_cfg();
                let y = heat_trajectory(&self.velocity_state(v.clone()), &cfg)?;
                let norms = ProfileSeries::new(&y, self.part, self.spec)?.norms(self.spec).u;
                if lemma == LemmaId::Heat {
                    Ok(ratio(norms.x_norm, self.n(&self.profile(&v)?, self.spec.s)))
                } else {
                    Ok(ratio(norms.l2_mid * norms.l2_mid, norms.linf_low * norms.l1_high))
                }
            }
            LemmaId::Duhamel => {
                // a decaying, time-dependent source
                let cfg = self.solver_cfg();
                let f = heat_trajectory(&self.velocity_state(w), &SolverConfig {
                    params: crate::hall::PhysicalParams { mu: 0.5, nu: 0.5, h: 1.0 },
                    ..cfg
                })?;
                let z = duhamel_integrate(f.states(), f.dt(), &cfg.params);
                let z = Trajectory::from_parts(*g, f.times().to_vec(), z);
                let zn = ProfileSeries::new(&z, self.part, self.spec)?.norms(self.spec).u.x_norm;
                let fs = ProfileSeries::new(&f, self.part, self.spec)?;
                let f_l1 = crate::trajectory::trapezoid(f.dt(), &fs.instant(self.spec.s, self.spec));
                Ok(ratio(zn, f_l1))
            }
        }
    }
}

/// Ratio of one of the vector bilinear estimates for a given pair.
pub fn pair_ratio(lemma: LemmaId, v: &VectorField, w: &VectorField, part: &LpPartition, spec: &NormSpec) -> Result<Option<f64>> {
    let n = |f: &VectorField| vector_profile(f, part, spec);
    let b = |p: &BandProfile, s: f64| p.besov(s, spec.r);
    let s0 = 3.0 / spec.p;
    let (pv, pw) = (n(v)?, n(w)?);
    Ok(match lemma {
        LemmaId::DivVw => ratio(b(&n(&tensor_divergence(v, w))?, s0 - 1.0), b(&pv, s0) * b(&pw, s0)),
        LemmaId::DivCurlinvW => {
            let den = (b(&pv, s0 - 1.0) * b(&pw, s0 - 1.0) * b(&pv, s0 + 1.0) * b(&pw, s0 + 1.0)).sqrt();
            ratio(b(&n(&tensor_divergence(&curl_inv(v), w))?, s0), den)
        }
        LemmaId::DivVCurlinv => ratio(b(&n(&tensor_divergence(v, &curl_inv(w)))?, s0), b(&pv, s0 + 1.0) * b(&pw, s0 - 1.0)),
        other => return Err(Error::Config(format!("{} is not a vector bilinear estimate", other.name()))),
    })
}

/// Largest observed ratio with default sampling options.
pub fn estimate_constant(lemma: LemmaId, n_samples: usize, grid: &GridSpec, spec: &NormSpec, seed: u64) -> Result<EstimateReport> {
    estimate_constant_with(lemma, n_samples, grid, spec, seed, &EstimateOptions::default())
}

pub fn estimate_constant_with(
    lemma: LemmaId,
    n_samples: usize,
    grid: &GridSpec,
    spec: &NormSpec,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    spec.validate()?;
    if lemma.is_temporal() && opts.n_steps < 2 {
        return Err(Error::Config("time-dependent estimates need n_steps >= 2".into()));
    }
    let part = LpPartition::build(grid)?;
    let sampler = Sampler {
        grid: *grid,
        part: &part,
        spec,
        opts,
    };
    let ratios = (0..n_samples)
        .into_par_iter()
        .map(|i| sampler.sample(lemma, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    let max_ratio = kept.iter().copied().fold(0.0, f64::max);
    let mean_ratio = if kept.is_empty() {
        0.0
    } else {
        kept.iter().sum::<f64>() / kept.len() as f64
    };
    if !max_ratio.is_finite() {
        return Err(Error::Integrity(format!("{} produced a non-finite ratio", lemma.name())));
    }
    Ok(EstimateReport {
        lemma_id: lemma,
        samples: kept.len(),
        skipped: n_samples - kept.len(),
        max_ratio,
        mean_ratio,
        grid: *grid,
        spec: *spec,
        seed,
        options: *opts,
    })
}

// ---------------------------------------------------------------------------
// current consistency

/// Floor for the denominator of the relative consistency defect.
pub const CONSISTENCY_FLOOR: f64 = 1e-300;

/// `e(t_k) = ‖∇×B − J‖_{N^{3/p−2}} / max(‖J‖_{N^{3/p−2}}, ε)` at every node.
pub fn check_j_consistency(traj: &Trajectory, spec: &NormSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let part = LpPartition::build(traj.grid())?;
    let s = 3.0 / spec.p - 2.0;
    traj.states()
        .iter()
        .map(|st| {
            let defect = vector_profile(&curl(&st.b).sub(&st.j), &part, spec)?.besov(s, spec.r);
            let j = vector_profile(&st.j, &part, spec)?.besov(s, spec.r);
            Ok(if defect == 0.0 { 0.0 } else { defect / j.max(CONSISTENCY_FLOOR) })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// Distance to the heat flow of the first node.
    Heat,
    /// Residual of the integral equation `Θ = y + B(Θ, Θ)`.
    Mild,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub kind: ResidualKind,
    pub original_residual: f64,
    pub rescaled_residual: f64,
    /// `rescaled / original`, or 0 when both vanish.
    pub ratio: f64,
    pub rescaled_grid: GridSpec,
    pub rescaled_t_final: f64,
}

/// `Θ ↦ λΘ(λx, λ²t)` realized on the same index lattice over a box of
/// length `L/λ`.
pub fn rescale_trajectory(traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    if !(lambda >= 1.0 && lambda.log2().fract() == 0.0) {
        return Err(Error::Config(format!(
            "scaling factor {lambda} must be a power of two for grid-matched rescaling"
        )));
    }
    let g = traj.grid().rescaled(lambda)?;
    let times: Vec<f64> = traj.times().iter().map(|t| t / (lambda * lambda)).collect();
    let states = traj
        .states()
        .iter()
        .map(|s| s.regrid(g).map(|r| r.scaled(lambda)))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times, states)
}

/// The trajectory in units with `μ = h = 1`, and the matching config.
fn normalized(traj: &Trajectory, cfg: &SolverConfig) -> Result<(Trajectory, SolverConfig)> {
    let nz = Normalization::new(&cfg.params);
    let local = nz.config(&SolverConfig {
        t_final: traj.final_time(),
        n_steps: traj.len() - 1,
        ..*cfg
    });
    let states = traj.states().iter().map(|s| nz.forward(s)).collect::<Result<Vec<_>>>()?;
    Ok((Trajectory::new(local.times(), states)?, local))
}

fn normalized_norms(traj: &Trajectory, cfg: &SolverConfig) -> Result<TrajectoryNorms> {
    let (t, local) = normalized(traj, cfg)?;
    let part = LpPartition::build(t.grid())?;
    Ok(ProfileSeries::new(&t, &part, &local.norm)?.norms(&local.norm))
}

fn residual_of(traj: &Trajectory, kind: ResidualKind, cfg: &SolverConfig) -> Result<f64> {
    let (traj, local) = normalized(traj, cfg)?;
    let part = LpPartition::build(traj.grid())?;
    let y = heat_trajectory(&traj.states()[0], &local)?;
    let defect = match kind {
        ResidualKind::Heat => traj.sub(&y),
        ResidualKind::Mild => traj.sub(&y).sub(&duhamel_bilinear(&traj, &traj, &local)?),
    };
    let x = |t: &Trajectory| -> Result<f64> { Ok(ProfileSeries::new(t, &part, &local.norm)?.norms(&local.norm).total.x_norm) };
    let d = x(&defect)?;
    Ok(if d == 0.0 { 0.0 } else { d / x(&traj)? })
}

/// Residual before and after the scaling map, with the same physical
/// parameters.
pub fn check_scaling(traj: &Trajectory, lambda: f64, cfg: &SolverConfig, kind: ResidualKind) -> Result<ScalingReport> {
    if traj.len() < 2 {
        return Err(Error::Config("scaling check needs at least two nodes".into()));
    }
    let scaled = rescale_trajectory(traj, lambda)?;
    let original_residual = residual_of(traj, kind, cfg)?;
    let rescaled_residual = residual_of(&scaled, kind, cfg)?;
    let ratio = if rescaled_residual == 0.0 {
        0.0
    } else {
        rescaled_residual / original_residual
    };
    Ok(ScalingReport {
        lambda,
        kind,
        original_residual,
        rescaled_residual,
        ratio,
        rescaled_grid: *scaled.grid(),
        rescaled_t_final: scaled.final_time(),
    })
}

// ---------------------------------------------------------------------------
// continuous dependence

/// Largest relative `‖∇×B₀ − J₀‖` accepted as consistent data.
pub const CONSISTENT_DATA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessPoint {
    pub epsilon: f64,
    /// `‖Φ‖_{L∞(N^{3/p−1})}` with `Φ` the difference of the two solutions.
    pub difference: f64,
    /// `difference / ε`; zero when `ε = 0`.
    pub ratio: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub base_converged: bool,
    pub seed: u64,
    pub points: Vec<UniquenessPoint>,
}

impl UniquenessReport {
    /// Max over min of the nonzero ratios.
    pub fn spread(&self) -> f64 {
        let r: Vec<f64> = self.points.iter().filter(|p| p.epsilon > 0.0).map(|p| p.ratio).collect();
        let hi = r.iter().copied().fold(0.0, f64::max);
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        if r.is_empty() || lo == 0.0 {
            0.0
        } else {
            hi / lo
        }
    }
}

fn require_consistent(theta: &ExtendedState) -> Result<()> {
    let defect = curl(&theta.b).sub(&theta.j).l2_norm();
    if defect > CONSISTENT_DATA_TOLERANCE * theta.j.l2_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain("probe requires consistent data with J = curl B".into()));
    }
    Ok(())
}

/// Solves from `θ₀` and from `θ₀ + ε δ` for each `ε`, where `δ` is a random
/// consistent perturbation of unit critical norm.
pub fn uniqueness_sweep(theta0: &ExtendedState, epsilons: &[f64], cfg: &SolverConfig, seed: u64) -> Result<UniquenessReport> {
    require_consistent(theta0)?;
    let g = *theta0.grid();
    let part = LpPartition::build(&g)?;
    let e = Ensemble::default();
    let du = random_solenoidal(&g, &e, derive_seed(seed, 0));
    let db = random_solenoidal(&g, &e, derive_seed(seed, 1));
    let delta = ExtendedState::consistent(&du, &db)?;
    let size: f64 = delta
        .fields()
        .iter()
        .map(|f| crate::lp::besov_morrey_norm(f, &cfg.norm, &part))
        .sum::<Result<f64>>()?;
    let delta = delta.scaled(1.0 / size);

    let base = picard_global(theta0, cfg)?;
    if !base.converged() {
        return Err(Error::NonConvergence("base run of the uniqueness probe did not converge".into()));
    }
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps == 0.0 {
            let again = picard_global(theta0, cfg)?;
            let same = again.traj == base.traj;
            points.push(UniquenessPoint {
                epsilon: 0.0,
                difference: if same { 0.0 } else { f64::INFINITY },
                ratio: 0.0,
                converged: again.converged(),
            });
            continue;
        }
        let run = picard_global(&theta0.axpy(eps, &delta), cfg)?;
        let difference = normalized_norms(&run.traj.sub(&base.traj), cfg)?.total.linf_low;
        points.push(UniquenessPoint {
            epsilon: eps,
            difference,
            ratio: difference / eps,
            converged: run.converged(),
        });
    }
    Ok(UniquenessReport {
        base_converged: true,
        seed,
        points,
    })
}

pub fn uniqueness_probe(theta0: &ExtendedState, perturbation_scale: f64, cfg: &SolverConfig, seed: u64) -> Result<UniquenessReport> {
    uniqueness_sweep(theta0, &[perturbation_scale], cfg, seed)
}

// ---------------------------------------------------------------------------
// contraction

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub k_emp: f64,
    /// `1 / (4 K_emp)`
    pub radius: f64,
    pub samples: usize,
    pub skipped: usize,
    pub t_final: f64,
    pub n_steps: usize,
    pub seed: u64,
}

/// Empirical operator norm of the Duhamel bilinear map and the resulting
/// Picard radius.
pub fn contraction_probe(cfg: &SolverConfig, grid: &GridSpec, spec: &NormSpec, n_samples: usize, seed: u64) -> Result<ContractionReport> {
    let cfg = SolverConfig { norm: *spec, ..*cfg };
    let k = bilinear_constant(grid, &cfg, n_samples, seed)?;
    Ok(ContractionReport {
        k_emp: k.k_emp,
        radius: k.radius,
        samples: k.samples,
        skipped: k.skipped,
        t_final: cfg.t_final,
        n_steps: cfg.n_steps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_are_finite_and_reproducible() {
        let g = GridSpec::cube(16).unwrap();
        let spec = NormSpec::default();
        for lemma in LemmaId::ALL {
            let a = estimate_constant(lemma, 3, &g, &spec, 7).unwrap();
            assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0, "{lemma:?}");
            assert_eq!(a.samples, 3);
            let b = estimate_constant(lemma, 3, &g, &spec, 7).unwrap();
            assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
        }
        let interp = estimate_constant(LemmaId::Interp, 3, &g, &spec, 1).unwrap();
        assert!(interp.max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn div_vw_single_shell_oracle() {
        // v = (sin z, 0, 0), w = (0, 0, sin x): div(v⊗w) = (sin x cos z, 0, 0)
        // sits on the shell |ξ| = √2, the factors on |ξ| = 1, so each norm is
        // a weighted sum of Morrey norms of a single trigonometric product.
        let g = GridSpec::cube(16).unwrap();
        let spec = NormSpec::default();
        let part = LpPartition::build(&g).unwrap();
        let v = VectorField::from_fn(g, |x| [x[2].sin(), 0.0, 0.0]);
        let w = VectorField::from_fn(g, |x| [0.0, 0.0, x[0].sin()]);
        let d = VectorField::from_fn(g, |x| [x[0].sin() * x[2].cos(), 0.0, 0.0]);
        let m = |f: &VectorField| crate::lp::morrey_norm(f, spec.p, spec.q, &spec.morrey).unwrap();
        let weight = |r: f64, s: f64| part.bands().map(|j| 2f64.powf(s * j as f64) * crate::lp::phi_j(j, r)).sum::<f64>();
        let s0 = 3.0 / spec.p;
        let expect = weight(2f64.sqrt(), s0 - 1.0) * m(&d) / (weight(1.0, s0) * m(&v) * weight(1.0, s0) * m(&w));
        let got = pair_ratio(LemmaId::DivVw, &v, &w, &part, &spec).unwrap().unwrap();
        assert!((got / expect - 1.0).abs() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn degenerate_samples_are_skipped() {
        let g = GridSpec::cube(16).unwrap();
        let spec = NormSpec::default();
        let opts = EstimateOptions {
            ensemble: Ensemble { alpha: 2.0, k_max: 0.5 },
            ..EstimateOptions::default()
        };
        let r = estimate_constant_with(LemmaId::DivVw, 2, &g, &spec, 1, &opts).unwrap();
        assert_eq!(r.samples, 0);
        assert_eq!(r.skipped, 2);
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn heat_flow_is_consistent_and_detector_fires() {
        let g = GridSpec::cube(16).unwrap();
        let e = Ensemble::default();
        let s = ExtendedState::consistent(&random_solenoidal(&g, &e, 1), &random_solenoidal(&g, &e, 2)).unwrap();
        let cfg = SolverConfig { n_steps: 4, ..SolverConfig::default() };
        let y = heat_trajectory(&s, &cfg).unwrap();
        let e0 = check_j_consistency(&y, &cfg.norm).unwrap();
        assert!(e0.iter().all(|&x| x < 1e-12), "{e0:?}");

        let bad = ExtendedState::new(s.u.clone(), s.b.clone(), s.j.scaled(2.0)).unwrap();
        let y = heat_trajectory(&bad, &cfg).unwrap();
        let e1 = check_j_consistency(&y, &cfg.norm).unwrap();
        assert!((e1[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn heat_flow_scaling_is_exact() {
        let g = GridSpec::cube(16).unwrap();
        let e = Ensemble::default();
        let s = ExtendedState::consistent(&random_solenoidal(&g, &e, 3), &random_solenoidal(&g, &e, 4)).unwrap();
        let cfg = SolverConfig { n_steps: 4, ..SolverConfig::default() };
        let y = heat_trajectory(&s, &cfg).unwrap();
        let r = check_scaling(&y, 2.0, &cfg, ResidualKind::Heat).unwrap();
        assert!(r.rescaled_residual < 1e-10);
        assert_eq!(r.rescaled_grid.box_length, g.box_length / 2.0);
        assert!(check_scaling(&y, 3.0, &cfg, ResidualKind::Heat).is_err());
        let z = Trajectory::zeros(g, 0.5, 4);
        assert_eq!(check_scaling(&z, 2.0, &cfg, ResidualKind::Mild).unwrap().rescaled_residual, 0.0);
    }

    #[test]
    fn uniqueness_probe_refuses_inconsistent_data() {
        let g = GridSpec::cube(8).unwrap();
        let e = Ensemble::default();
        let s = ExtendedState::consistent(&random_solenoidal(&g, &e, 3), &random_solenoidal(&g, &e, 4)).unwrap();
        let bad = ExtendedState::new(s.u.clone(), s.b.clone(), s.j.scaled(1.5)).unwrap();
        let cfg = SolverConfig { n_steps: 4, ..SolverConfig::default() };
        assert!(matches!(uniqueness_probe(&bad, 1e-3, &cfg, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn uniqueness_zero_perturbation_is_deterministic() {
        let g = GridSpec::cube(16).unwrap();
        let e = Ensemble::default();
        let s = ExtendedState::consistent(&random_solenoidal(&g, &e, 5).scaled(0.05), &random_solenoidal(&g, &e, 6).scaled(0.05)).unwrap();
        let cfg = SolverConfig { n_steps: 4, t_final: 0.25, ..SolverConfig::default() };
        let r = uniqueness_sweep(&s, &[0.0, 1e-3], &cfg, 2).unwrap();
        assert_eq!(r.points[0].difference, 0.0);
        assert!(r.points[1].ratio > 0.0 && r.points[1].ratio < 100.0);
    }
}
