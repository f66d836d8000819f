//! Mild solutions of the extended system: heat flow, the Duhamel operator,
//! global and local Picard iteration, smallness gates and an exponential
//! Euler reference integrator.
//!
//! Picard solves run in units where `μ = h = 1`: with
//! `(ũ, B̃)(x, t) = (h/μ)(u, B)(hx, h²t/μ)` the box shrinks to `L/h`, the
//! horizon becomes `μT/h²` and the resistivity `ν/μ`. Results are mapped
//! back; reported norms stay in normalized units.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hall::{extended_rhs, ExtendedState, PhysicalParams};
use crate::lp::{LpPartition, NormSpec};
use crate::ops::{apply_factors, heat_factors};
use crate::random::{derive_seed, random_solenoidal, Ensemble};
use crate::trajectory::{uniform_times, ProfileSeries, Trajectory, TrajectoryNorms};

/// Iterates whose X norm exceeds this multiple of the first are declared
/// divergent.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Half-width of the band around a threshold reported as marginal.
pub const MARGINAL_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub params: PhysicalParams,
    pub t_final: f64,
    /// Number of uniform time steps; the trajectory has `n_steps + 1` nodes.
    pub n_steps: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Smallness threshold for the gates; calibrated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip)]
    pub norm: NormSpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            params: PhysicalParams::default(),
            t_final: 0.5,
            n_steps: 16,
            picard_tol: 1e-10,
            picard_max_iter: 60,
            delta: None,
            norm: NormSpec::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config("t_final must be positive".into()));
        }
        if self.n_steps < 2 {
            return Err(Error::Config("n_steps must be at least 2".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config("picard_tol must be positive".into()));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::Config("picard_max_iter must be positive".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config("delta must be positive".into()));
            }
        }
        self.norm.validate()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_times(self.t_final, self.n_steps)
    }
}

// ---------------------------------------------------------------------------
// normalization

/// The change of variables to `μ = h = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mu: f64,
    pub h: f64,
}

impl Normalization {
    pub fn new(params: &PhysicalParams) -> Self {
        Normalization {
            mu: params.mu,
            h: params.h,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.mu == 1.0 && self.h == 1.0
    }

    pub fn params(&self, p: &PhysicalParams) -> PhysicalParams {
        PhysicalParams {
            mu: 1.0,
            nu: p.nu / self.mu,
            h: 1.0,
        }
    }

    pub fn grid(&self, g: &GridSpec) -> Result<GridSpec> {
        g.rescaled(self.h)
    }

    pub fn time(&self, t: f64) -> f64 {
        t * self.mu / (self.h * self.h)
    }

    /// Slot amplitudes `(h/μ, h/μ, h²/μ)`.
    fn factors(&self) -> [f64; 3] {
        let v = self.h / self.mu;
        [v, v, v * self.h]
    }

    pub fn forward(&self, theta: &ExtendedState) -> Result<ExtendedState> {
        if self.is_identity() {
            return Ok(theta.clone());
        }
        let g = self.grid(theta.grid())?;
        let f = self.factors();
        theta.regrid(g).map(|s| s.map(|slot, v| v.scaled(f[slot])))
    }

    pub fn backward(&self, theta: &ExtendedState, original: &GridSpec) -> Result<ExtendedState> {
        if self.is_identity() {
            return Ok(theta.clone());
        }
        let f = self.factors();
        theta.regrid(*original).map(|s| s.map(|slot, v| v.scaled(1.0 / f[slot])))
    }

    pub fn config(&self, cfg: &SolverConfig) -> SolverConfig {
        SolverConfig {
            params: self.params(&cfg.params),
            t_final: self.time(cfg.t_final),
            ..*cfg
        }
    }
}

// ---------------------------------------------------------------------------
// heat flow and Duhamel

/// Per-slot propagators `e^{dt κ Δ}`.
struct Propagator {
    factors: [Vec<f64>; 2],
}

impl Propagator {
    fn new(grid: &GridSpec, dt: f64, params: &PhysicalParams) -> Self {
        Propagator {
            factors: [heat_factors(grid, dt, params.mu), heat_factors(grid, dt, params.nu)],
        }
    }

    fn apply(&self, s: &ExtendedState) -> ExtendedState {
        s.map(|slot, f| apply_factors(f, &self.factors[(slot > 0) as usize]))
    }
}

/// `Θ^L(t_k) = (e^{μ t_k Δ}u₀, e^{ν t_k Δ}B₀, e^{ν t_k Δ}J₀)`
pub fn heat_trajectory(theta0: &ExtendedState, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let g = *theta0.grid();
    let times = cfg.times();
    let states = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                theta0.clone()
            } else {
                Propagator::new(&g, t, &cfg.params).apply(theta0)
            }
        })
        .collect();
    Ok(Trajectory::from_parts(g, times, states))
}

/// Trapezoid approximation of `∫₀^{t_k} e^{(t_k−τ)Δ_{μ,ν}} f(τ) dτ` on
/// uniform nodes, via `I_k = E(I_{k−1} + dt/2 f_{k−1}) + dt/2 f_k`.
pub fn duhamel_integrate(sources: &[ExtendedState], dt: f64, params: &PhysicalParams) -> Vec<ExtendedState> {
    let Some(first) = sources.first() else {
        return Vec::new();
    };
    let g = *first.grid();
    let prop = Propagator::new(&g, dt, params);
    let half = 0.5 * dt;
    let mut out = Vec::with_capacity(sources.len());
    let mut acc = ExtendedState::zeros(g);
    out.push(acc.clone());
    for k in 1..sources.len() {
        acc = prop.apply(&acc.axpy(half, &sources[k - 1])).axpy(half, &sources[k]);
        out.push(acc.clone());
    }
    out
}

/// `B(Φ, Ψ)(t) = ∫₀ᵗ e^{(t−τ)Δ_{μ,ν}} Π(Φ, Ψ)(τ) dτ`
pub fn duhamel_bilinear(phi: &Trajectory, psi: &Trajectory, cfg: &SolverConfig) -> Result<Trajectory> {
    phi.check_compatible(psi)?;
    let sources: Vec<ExtendedState> = phi
        .states()
        .par_iter()
        .zip(psi.states().par_iter())
        .map(|(a, b)| extended_rhs(a, b, &cfg.params))
        .collect();
    let states = duhamel_integrate(&sources, phi.dt(), &cfg.params);
    Ok(Trajectory::from_parts(*phi.grid(), phi.times().to_vec(), states))
}

// ---------------------------------------------------------------------------
// Picard

/// Norms of one Picard iterate and its distance to the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub linf_low: f64,
    pub l1_high: f64,
    pub l2_mid: f64,
    pub x_norm: f64,
    /// `‖Θ^{k} − Θ^{k−1}‖_X / ‖Θ^{k}‖_X`
    pub residual: f64,
    /// `‖Θ^{k} − Θ^{k−1}‖_X / ‖Θ^{k−1} − Θ^{k−2}‖_X`
    pub contraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Solution in the caller's units.
    pub traj: Trajectory,
    /// Heat flow `y` in the caller's units.
    pub heat: Trajectory,
    pub iterates: usize,
    pub termination: Termination,
    /// `‖Θ − y − B(Θ,Θ)‖_X / ‖Θ‖_X` at the last iterate.
    pub residual: f64,
    pub heat_norms: TrajectoryNorms,
    pub norms: TrajectoryNorms,
    pub history: Vec<IterationRecord>,
}

impl PicardOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

struct Normalized {
    norm: Normalization,
    cfg: SolverConfig,
    theta0: ExtendedState,
    part: LpPartition,
    original_grid: GridSpec,
    original_cfg: SolverConfig,
}

impl Normalized {
    fn new(theta0: &ExtendedState, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        theta0.validate()?;
        let norm = Normalization::new(&cfg.params);
        let theta_n = norm.forward(theta0)?;
        let part = LpPartition::build(theta_n.grid())?;
        Ok(Normalized {
            norm,
            cfg: norm.config(cfg),
            theta0: theta_n,
            part,
            original_grid: *theta0.grid(),
            original_cfg: *cfg,
        })
    }

    fn norms(&self, traj: &Trajectory) -> Result<TrajectoryNorms> {
        Ok(ProfileSeries::new(traj, &self.part, &self.cfg.norm)?.norms(&self.cfg.norm))
    }

    fn x(&self, traj: &Trajectory) -> Result<f64> {
        Ok(self.norms(traj)?.total.x_norm)
    }

    fn back(&self, traj: &Trajectory) -> Result<Trajectory> {
        if self.norm.is_identity() {
            return Ok(traj.clone());
        }
        let states = traj
            .states()
            .iter()
            .map(|s| self.norm.backward(s, &self.original_grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory::from_parts(self.original_grid, self.original_cfg.times(), states))
    }
}

fn relative(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Shared Picard loop. `step` maps the current unknown to the next one;
/// `total` turns the unknown into the full solution for the stopping rule.
fn iterate(
    ctx: &Normalized,
    start: Trajectory,
    reference_norm: f64,
    step: impl Fn(&Trajectory) -> Result<Trajectory>,
    total: impl Fn(&Trajectory) -> Trajectory,
) -> Result<(Trajectory, Termination, Vec<IterationRecord>)> {
    let mut current = start;
    let mut history = Vec::new();
    let mut prev_diff: Option<f64> = None;
    for k in 1..=ctx.cfg.picard_max_iter {
        let next = step(&current)?;
        let diff = ctx.x(&next.sub(&current))?;
        let full = ctx.norms(&total(&next))?.total;
        let residual = relative(diff, full.x_norm);
        history.push(IterationRecord {
            iter: k,
            linf_low: full.linf_low,
            l1_high: full.l1_high,
            l2_mid: full.l2_mid,
            x_norm: full.x_norm,
            residual,
            contraction: prev_diff.map(|p| relative(diff, p)),
        });
        prev_diff = Some(diff);
        current = next;
        if !full.x_norm.is_finite() || full.x_norm > DIVERGENCE_FACTOR * reference_norm.max(f64::MIN_POSITIVE) {
            return Ok((current, Termination::Diverged, history));
        }
        if residual <= ctx.cfg.picard_tol {
            return Ok((current, Termination::Converged, history));
        }
    }
    Ok((current, Termination::MaxIterations, history))
}

/// `Θ^{k+1} = y + B(Θ^k, Θ^k)` from `Θ⁰ = y`, stopping on relative X-norm
/// change below `picard_tol`.
pub fn picard_global(theta0: &ExtendedState, cfg: &SolverConfig) -> Result<PicardOutcome> {
    let ctx = Normalized::new(theta0, cfg)?;
    let y = heat_trajectory(&ctx.theta0, &ctx.cfg)?;
    let heat_norms = ctx.norms(&y)?;
    let (theta, termination, history) = iterate(
        &ctx,
        y.clone(),
        heat_norms.total.x_norm,
        |t| Ok(y.add(&duhamel_bilinear(t, t, &ctx.cfg)?)),
        |t| t.clone(),
    )?;
    let norms = ctx.norms(&theta)?;
    let defect = theta.sub(&y).sub(&duhamel_bilinear(&theta, &theta, &ctx.cfg)?);
    let residual = relative(ctx.x(&defect)?, norms.total.x_norm);
    Ok(PicardOutcome {
        traj: ctx.back(&theta)?,
        heat: ctx.back(&y)?,
        iterates: history.len(),
        termination,
        residual,
        heat_norms,
        norms,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    /// `Θ = Θ^L + Θ̃` in the caller's units.
    pub traj: Trajectory,
    pub theta_l: Trajectory,
    pub tilde: Trajectory,
    /// `‖L(Θ̃)‖_X / ‖Θ̃‖_X` at the last iterate.
    pub m_emp: f64,
    pub iterates: usize,
    pub termination: Termination,
    /// `‖Θ̃ − ỹ − L(Θ̃) − B(Θ̃,Θ̃)‖_X / ‖Θ‖_X`
    pub residual: f64,
    pub norms: TrajectoryNorms,
    pub history: Vec<IterationRecord>,
}

impl LocalOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// `L(Φ) = B(Φ, Θ^L) + B(Θ^L, Φ)`
pub fn linear_operator(phi: &Trajectory, theta_l: &Trajectory, cfg: &SolverConfig) -> Result<Trajectory> {
    Ok(duhamel_bilinear(phi, theta_l, cfg)?.add(&duhamel_bilinear(theta_l, phi, cfg)?))
}

/// Splits `Θ = Θ^L + Θ̃` and iterates
/// `Θ̃^{k+1} = ỹ + L(Θ̃^k) + B(Θ̃^k, Θ̃^k)` with `ỹ = B(Θ^L, Θ^L)`.
pub fn picard_local(theta0: &ExtendedState, cfg: &SolverConfig) -> Result<LocalOutcome> {
    let ctx = Normalized::new(theta0, cfg)?;
    let theta_l = heat_trajectory(&ctx.theta0, &ctx.cfg)?;
    let y_tilde = duhamel_bilinear(&theta_l, &theta_l, &ctx.cfg)?;
    let next = |t: &Trajectory| -> Result<Trajectory> {
        Ok(y_tilde
            .add(&linear_operator(t, &theta_l, &ctx.cfg)?)
            .add(&duhamel_bilinear(t, t, &ctx.cfg)?))
    };
    let reference = ctx.x(&theta_l)?;
    let zero = theta_l.scaled(0.0);
    let (tilde, termination, history) = iterate(&ctx, zero, reference, next, |t| theta_l.add(t))?;
    let total = theta_l.add(&tilde);
    let norms = ctx.norms(&total)?;
    let l_tilde = linear_operator(&tilde, &theta_l, &ctx.cfg)?;
    let m_emp = relative(ctx.x(&l_tilde)?, ctx.x(&tilde)?);
    let defect = tilde
        .sub(&y_tilde)
        .sub(&l_tilde)
        .sub(&duhamel_bilinear(&tilde, &tilde, &ctx.cfg)?);
    let residual = relative(ctx.x(&defect)?, norms.total.x_norm);
    Ok(LocalOutcome {
        traj: ctx.back(&total)?,
        theta_l: ctx.back(&theta_l)?,
        tilde: ctx.back(&tilde)?,
        m_emp: if m_emp.is_finite() { m_emp } else { 0.0 },
        iterates: history.len(),
        termination,
        residual,
        norms,
        history,
    })
}

// ---------------------------------------------------------------------------
// bilinear constant and smallness

/// Empirical bound on the Duhamel operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearConstant {
    pub k_emp: f64,
    /// `1 / (4 K_emp)`
    pub radius: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// Heat flow of a random consistent state; a generic smooth element of `X`.
pub(crate) fn random_heat_trajectory(
    grid: &GridSpec,
    cfg: &SolverConfig,
    ens: &Ensemble,
    seed: u64,
) -> Result<Trajectory> {
    let u = random_solenoidal(grid, ens, derive_seed(seed, 0));
    let b = random_solenoidal(grid, ens, derive_seed(seed, 1));
    heat_trajectory(&ExtendedState::consistent(&u, &b)?, cfg)
}

/// `K_emp = max ‖B(Φ,Ψ)‖_X / (‖Φ‖_X ‖Ψ‖_X)` over heat flows of random
/// states, evaluated in the units `cfg` describes.
pub fn bilinear_constant(grid: &GridSpec, cfg: &SolverConfig, n_samples: usize, seed: u64) -> Result<BilinearConstant> {
    cfg.validate()?;
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let part = LpPartition::build(grid)?;
    let x = |t: &Trajectory| -> Result<f64> { Ok(ProfileSeries::new(t, &part, &cfg.norm)?.norms(&cfg.norm).total.x_norm) };
    let ens = Ensemble::default();
    let mut k_emp = 0.0f64;
    let mut skipped = 0;
    for i in 0..n_samples {
        let s = derive_seed(seed, i as u64);
        let phi = random_heat_trajectory(grid, cfg, &ens, derive_seed(s, 0))?;
        let psi = random_heat_trajectory(grid, cfg, &ens, derive_seed(s, 1))?;
        let den = x(&phi)? * x(&psi)?;
        if den == 0.0 {
            skipped += 1;
            continue;
        }
        k_emp = k_emp.max(x(&duhamel_bilinear(&phi, &psi, cfg)?)? / den);
    }
    let radius = if k_emp > 0.0 { 1.0 / (4.0 * k_emp) } else { f64::INFINITY };
    Ok(BilinearConstant {
        k_emp,
        radius,
        samples: n_samples - skipped,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Pass,
    Marginal,
    Fail,
}

impl Gate {
    /// `value < threshold`, marginal within `±MARGINAL_BAND` of it.
    pub fn evaluate(value: f64, threshold: f64) -> Gate {
        if value == 0.0 {
            return Gate::Pass;
        }
        if (value - threshold).abs() <= MARGINAL_BAND * threshold {
            Gate::Marginal
        } else if value < threshold {
            Gate::Pass
        } else {
            Gate::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub u0_norm: f64,
    pub b0_norm: f64,
    /// `h ‖J₀‖`, normalized units (`h = 1`).
    pub hj0_norm: f64,
    pub triple_norm: f64,
    pub delta: f64,
    pub heat_x_norm: f64,
    pub k_emp: f64,
    /// Surrogate `‖L(ỹ)‖_X / ‖ỹ‖_X` with `ỹ = B(Θ^L, Θ^L)`.
    pub m_emp: f64,
    /// `(1 − M)² / (4K)`, zero when `M ≥ 1`.
    pub radius: f64,
    /// `h‖J₀‖ < δ`
    pub local_gate: Gate,
    /// `‖u₀‖ + ‖B₀‖ + h‖J₀‖ < δ`
    pub global_gate: Gate,
    /// `‖y‖_X` against the admissibility radius.
    pub picard_gate: Gate,
    pub spec: NormSpec,
}

/// Samples drawn for `K_emp` inside [`smallness_report`].
pub const SMALLNESS_PROBE_SAMPLES: usize = 4;

/// Critical norms of the data against `δ` and the measured Picard radius.
/// When `cfg.delta` is unset, `δ` is half the admissibility radius.
pub fn smallness_report(theta0: &ExtendedState, cfg: &SolverConfig, seed: u64) -> Result<SmallnessReport> {
    let ctx = Normalized::new(theta0, cfg)?;
    let lp = |f| crate::lp::besov_morrey_norm(f, &ctx.cfg.norm, &ctx.part);
    let u0 = lp(&ctx.theta0.u)?;
    let b0 = lp(&ctx.theta0.b)?;
    let hj0 = ctx.cfg.params.h * lp(&ctx.theta0.j)?;
    let triple = u0 + b0 + hj0;
    let y = heat_trajectory(&ctx.theta0, &ctx.cfg)?;
    let heat_x = ctx.x(&y)?;
    let k = bilinear_constant(ctx.theta0.grid(), &ctx.cfg, SMALLNESS_PROBE_SAMPLES, seed)?;
    let y_tilde = duhamel_bilinear(&y, &y, &ctx.cfg)?;
    let m_emp = relative(ctx.x(&linear_operator(&y_tilde, &y, &ctx.cfg)?)?, ctx.x(&y_tilde)?);
    let m_emp = if m_emp.is_finite() { m_emp } else { 0.0 };
    let radius = if m_emp >= 1.0 {
        0.0
    } else {
        (1.0 - m_emp).powi(2) * k.radius
    };
    let delta = cfg.delta.unwrap_or(0.5 * radius);
    Ok(SmallnessReport {
        u0_norm: u0,
        b0_norm: b0,
        hj0_norm: hj0,
        triple_norm: triple,
        delta,
        heat_x_norm: heat_x,
        k_emp: k.k_emp,
        m_emp,
        radius,
        local_gate: Gate::evaluate(hj0, delta),
        global_gate: Gate::evaluate(triple, delta),
        picard_gate: Gate::evaluate(heat_x, radius),
        spec: ctx.cfg.norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCalibration {
    /// Largest tested amplitude of the direction that converged.
    pub amplitude: f64,
    /// Critical triple norm of the data at that amplitude.
    pub radius: f64,
    pub delta: f64,
    pub solves: usize,
}

/// Bisects the amplitude of `direction` at which `picard_global` stops
/// converging; `δ` is half the critical norm at the boundary.
pub fn calibrate_delta(direction: &ExtendedState, cfg: &SolverConfig, bisection_steps: usize) -> Result<DeltaCalibration> {
    let ctx = Normalized::new(direction, cfg)?;
    let lp = |f| crate::lp::besov_morrey_norm(f, &ctx.cfg.norm, &ctx.part);
    let unit = lp(&ctx.theta0.u)? + lp(&ctx.theta0.b)? + ctx.cfg.params.h * lp(&ctx.theta0.j)?;
    if unit == 0.0 {
        return Err(Error::Domain("cannot calibrate along a zero direction".into()));
    }
    let mut solves = 0;
    let mut converges = |a: f64| -> Result<bool> {
        solves += 1;
        Ok(picard_global(&direction.scaled(a), cfg)?.converged())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut found_hi = false;
    for _ in 0..40 {
        if converges(hi)? {
            lo = hi;
            hi *= 2.0;
        } else {
            found_hi = true;
            break;
        }
    }
    if !found_hi {
        return Err(Error::NonConvergence("no divergent amplitude found while calibrating".into()));
    }
    for _ in 0..bisection_steps {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let radius = lo * unit;
    Ok(DeltaCalibration {
        amplitude: lo,
        radius,
        delta: 0.5 * radius,
        solves,
    })
}

// ---------------------------------------------------------------------------
// reference integrator

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Full,
    Off,
}

/// Exponential Euler:
/// `Θ_{k+1} = e^{dt Δ_{μ,ν}} Θ_k + dt e^{dt Δ_{μ,ν}} Π(Θ_k, Θ_k)`.
pub fn march_reference(theta0: &ExtendedState, cfg: &SolverConfig) -> Result<Trajectory> {
    march_reference_with(theta0, cfg, Nonlinearity::Full)
}

pub fn march_reference_with(theta0: &ExtendedState, cfg: &SolverConfig, nl: Nonlinearity) -> Result<Trajectory> {
    cfg.validate()?;
    let g = *theta0.grid();
    let dt = cfg.dt();
    let prop = Propagator::new(&g, dt, &cfg.params);
    let mut states = Vec::with_capacity(cfg.n_steps + 1);
    let mut cur = theta0.clone();
    states.push(cur.clone());
    for _ in 0..cfg.n_steps {
        cur = match nl {
            Nonlinearity::Full => prop.apply(&cur.axpy(dt, &extended_rhs(&cur, &cur, &cfg.params))),
            Nonlinearity::Off => prop.apply(&cur),
        };
        states.push(cur.clone());
    }
    Ok(Trajectory::from_parts(g, cfg.times(), states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::ops::curl;

    fn small_state(g: &GridSpec, seed: u64, amp: f64) -> ExtendedState {
        let e = Ensemble::default();
        let u = random_solenoidal(g, &e, seed).scaled(amp);
        let b = random_solenoidal(g, &e, seed + 1).scaled(amp);
        ExtendedState::consistent(&u, &b).unwrap()
    }

    fn cfg(n_steps: usize, t: f64) -> SolverConfig {
        SolverConfig {
            t_final: t,
            n_steps,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn heat_trajectory_basics() {
        let g = GridSpec::cube(8).unwrap();
        let c = cfg(4, 0.4);
        assert!(heat_trajectory(&ExtendedState::zeros(g), &c).unwrap().is_zero());
        let s = small_state(&g, 1, 1.0);
        let tr = heat_trajectory(&s, &c).unwrap();
        assert_eq!(tr.states()[0], s);

        // single mode: amplitude e^{-μ|ξ|²t}
        let u = VectorField::from_fn(g, |x| [0.0, x[0].sin(), 0.0]);
        let z = VectorField::zeros(g);
        let st = ExtendedState::new(u.clone(), z.clone(), z).unwrap();
        let p = PhysicalParams { mu: 0.3, nu: 1.0, h: 1.0 };
        let tr = heat_trajectory(&st, &SolverConfig { params: p, ..c }).unwrap();
        let i = g.flat(1, 0, 0);
        for (t, s) in tr.times().iter().zip(tr.states()) {
            let want = u.comp(1)[i] * (-0.3 * t).exp();
            assert!((s.u.comp(1)[i] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn duhamel_zero_and_manufactured_order() {
        let g = GridSpec::cube(8).unwrap();
        let c = cfg(8, 1.0);
        let z = Trajectory::zeros(g, 1.0, 8);
        let s = heat_trajectory(&small_state(&g, 2, 1.0), &c).unwrap();
        assert!(duhamel_bilinear(&z, &s, &c).unwrap().is_zero());
        assert!(duhamel_bilinear(&s, &z, &c).unwrap().is_zero());
        assert!(duhamel_bilinear(&s, &s, &c).unwrap().states()[0].is_zero());

        // frozen source on the mode |ξ|² = 2, κ = 0.7
        let f = VectorField::from_fn(g, |x| [0.0, 0.0, (x[0] + x[1]).cos()]);
        let src = ExtendedState::from_parts(f.clone(), VectorField::zeros(g), VectorField::zeros(g));
        let p = PhysicalParams { mu: 0.7, nu: 1.0, h: 1.0 };
        let a = 0.7 * 2.0;
        let err = |n: usize| {
            let out = duhamel_integrate(&vec![src.clone(); n + 1], 1.0 / n as f64, &p);
            let exact = f.scaled((1.0 - (-a * 1.0f64).exp()) / a);
            out[n].u.sub(&exact).l2_norm() / exact.l2_norm()
        };
        let (e1, e2) = (err(8), err(16));
        assert!((3.0..5.0).contains(&(e1 / e2)), "{e1} {e2}");
    }

    #[test]
    fn picard_zero_data() {
        let g = GridSpec::cube(16).unwrap();
        let out = picard_global(&ExtendedState::zeros(g), &cfg(4, 0.5)).unwrap();
        assert!(out.converged());
        assert_eq!(out.iterates, 1);
        assert!(out.traj.is_zero());
        let loc = picard_local(&ExtendedState::zeros(g), &cfg(4, 0.5)).unwrap();
        assert!(loc.tilde.is_zero() && loc.converged());
    }

    #[test]
    fn picard_small_data_converges_and_local_agrees() {
        let g = GridSpec::cube(16).unwrap();
        let c = cfg(8, 0.5);
        let s = small_state(&g, 3, 0.05);
        let glob = picard_global(&s, &c).unwrap();
        assert!(glob.converged(), "{:?}", glob.history);
        assert!(glob.residual < 1e-8);
        for r in glob.history.iter().filter_map(|r| r.contraction) {
            assert!(r < 1.0);
        }
        let loc = picard_local(&s, &c).unwrap();
        assert!(loc.converged());
        let part = LpPartition::build(&g).unwrap();
        let d = crate::trajectory::x_norm(&glob.traj.sub(&loc.traj), &c.norm, &part).unwrap();
        let n = crate::trajectory::x_norm(&glob.traj, &c.norm, &part).unwrap();
        assert!(d / n < 10.0 * c.picard_tol, "{}", d / n);
        assert!(loc.m_emp > 0.0 && loc.m_emp.is_finite());
        let (div, mean) = glob.traj.structure_defects();
        assert!(div < 1e-9 && mean < 1e-12);
    }

    #[test]
    fn normalization_round_trip() {
        let g = GridSpec::cube(16).unwrap();
        let p = PhysicalParams { mu: 0.5, nu: 0.8, h: 2.0 };
        let n = Normalization::new(&p);
        let s = small_state(&g, 4, 1.0);
        let f = n.forward(&s).unwrap();
        assert_eq!(f.grid().box_length, g.box_length / 2.0);
        assert!((f.u.comp(0)[g.flat(1, 0, 0)] - s.u.comp(0)[g.flat(1, 0, 0)] * 4.0).norm() < 1e-14);
        // J stays the curl of B after rescaling
        assert!(curl(&f.b).sub(&f.j).l2_norm() < 1e-12 * f.j.l2_norm());
        let back = n.backward(&f, &g).unwrap();
        assert!(back.sub(&s).l2_norm() < 1e-14 * s.l2_norm());
    }

    #[test]
    fn normalized_solve_matches_reference_in_physical_units() {
        let g = GridSpec::cube(16).unwrap();
        let p = PhysicalParams { mu: 0.5, nu: 0.8, h: 2.0 };
        let c = SolverConfig { params: p, ..cfg(8, 0.2) };
        let s = small_state(&g, 5, 0.02);
        let out = picard_global(&s, &c).unwrap();
        assert!(out.converged());
        // the exponential Euler march in physical units approaches it
        let e = |n: usize| {
            let c2 = SolverConfig { n_steps: n, ..c };
            let m = march_reference(&s, &c2).unwrap();
            let last = m.states().last().unwrap();
            let glob = picard_global(&s, &c2).unwrap();
            last.sub(glob.traj.states().last().unwrap()).l2_norm()
        };
        let (e1, e2) = (e(8), e(16));
        assert!(e2 < e1 && e1 / e2 > 1.5, "{e1} {e2}");
    }

    #[test]
    fn march_without_nonlinearity_is_heat_flow() {
        let g = GridSpec::cube(8).unwrap();
        let c = SolverConfig {
            params: PhysicalParams { mu: 0.4, nu: 0.9, h: 1.0 },
            ..cfg(5, 0.5)
        };
        let s = small_state(&g, 6, 1.0);
        let m = march_reference_with(&s, &c, Nonlinearity::Off).unwrap();
        let h = heat_trajectory(&s, &c).unwrap();
        for (a, b) in m.states().iter().zip(h.states()) {
            assert!(a.sub(b).l2_norm() <= 1e-12 * s.l2_norm());
        }
        assert!(march_reference(&ExtendedState::zeros(g), &c).unwrap().is_zero());
    }

    #[test]
    fn gates() {
        assert_eq!(Gate::evaluate(0.0, 0.0), Gate::Pass);
        assert_eq!(Gate::evaluate(1.0, 2.0), Gate::Pass);
        assert_eq!(Gate::evaluate(2.0, 2.0), Gate::Marginal);
        assert_eq!(Gate::evaluate(2.09, 2.0), Gate::Marginal);
        assert_eq!(Gate::evaluate(3.0, 2.0), Gate::Fail);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { n_steps: 1, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { picard_tol: 0.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { delta: Some(-1.0), ..SolverConfig::default() }.validate().is_err());
    }
}
