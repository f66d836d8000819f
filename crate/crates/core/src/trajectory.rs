//! Uniformly sampled time histories of extended states and their discrete
//! space-time norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hall::ExtendedState;
use crate::lp::{vector_profile, BandProfile, LpPartition, NormSpec};

/// Relative tolerance on the spacing of time nodes.
const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: GridSpec,
    times: Vec<f64>,
    states: Vec<ExtendedState>,
}

/// Uniform nodes `0, T/n, …, T`.
pub fn uniform_times(t_final: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|k| t_final * k as f64 / n_steps as f64).collect()
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<ExtendedState>) -> Result<Self> {
        if times.len() != states.len() || states.is_empty() {
            return Err(Error::Config("trajectory needs one state per time node".into()));
        }
        let grid = *states[0].grid();
        for s in &states {
            grid.check_same(s.grid())?;
        }
        if times[0] != 0.0 {
            return Err(Error::Config("trajectory must start at t = 0".into()));
        }
        if times.len() > 1 {
            let dt = times[1] - times[0];
            if !(dt > 0.0) {
                return Err(Error::Config("time nodes must increase".into()));
            }
            for w in times.windows(2) {
                if ((w[1] - w[0]) - dt).abs() > STEP_TOLERANCE * dt {
                    return Err(Error::Config("time nodes must be uniformly spaced".into()));
                }
            }
        }
        Ok(Trajectory { grid, times, states })
    }

    pub(crate) fn from_parts(grid: GridSpec, times: Vec<f64>, states: Vec<ExtendedState>) -> Self {
        debug_assert_eq!(times.len(), states.len());
        Trajectory { grid, times, states }
    }

    pub fn zeros(grid: GridSpec, t_final: f64, n_steps: usize) -> Self {
        let times = uniform_times(t_final, n_steps);
        let states = vec![ExtendedState::zeros(grid); times.len()];
        Trajectory { grid, times, states }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[ExtendedState] {
        &self.states
    }

    pub fn into_states(self) -> Vec<ExtendedState> {
        self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > STEP_TOLERANCE * self.dt())
        {
            return Err(Error::Integrity("trajectories have different time grids".into()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&ExtendedState) -> ExtendedState) -> Self {
        Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
        }
    }

    fn zip_map(&self, other: &Trajectory, f: impl Fn(&ExtendedState, &ExtendedState) -> ExtendedState) -> Self {
        assert_eq!(self.len(), other.len(), "trajectory lengths differ");
        Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            states: self.states.iter().zip(&other.states).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Trajectory) -> Self {
        self.zip_map(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Trajectory) -> Self {
        self.zip_map(other, |a, b| a.sub(b))
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|s| s.scaled(a))
    }

    pub fn is_zero(&self) -> bool {
        self.states.iter().all(|s| s.is_zero())
    }

    /// Largest divergence defect and mean magnitude over all nodes.
    pub fn structure_defects(&self) -> (f64, f64) {
        self.states.iter().fold((0.0f64, 0.0f64), |(d, m), s| {
            (d.max(s.divergence_defect()), m.max(s.mean_magnitude()))
        })
    }
}

/// Composite trapezoid rule on uniform nodes.
pub fn trapezoid(dt: f64, values: &[f64]) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Discrete `X` norm components of one field or a sum over fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpaceTimeNorms {
    pub linf_low: f64,
    pub l1_high: f64,
    pub l2_mid: f64,
    pub x_norm: f64,
}

impl SpaceTimeNorms {
    fn plus(self, o: SpaceTimeNorms) -> SpaceTimeNorms {
        SpaceTimeNorms {
            linf_low: self.linf_low + o.linf_low,
            l1_high: self.l1_high + o.l1_high,
            l2_mid: self.l2_mid + o.l2_mid,
            x_norm: self.x_norm + o.x_norm,
        }
    }
}

/// Per-field norms and their sum over `(u, B, J)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryNorms {
    pub u: SpaceTimeNorms,
    pub b: SpaceTimeNorms,
    pub j: SpaceTimeNorms,
    pub total: SpaceTimeNorms,
}

/// Band profiles of every field at every node.
#[derive(Debug, Clone)]
pub struct ProfileSeries {
    pub dt: f64,
    pub profiles: Vec<[BandProfile; 3]>,
}

impl ProfileSeries {
    pub fn new(traj: &Trajectory, part: &LpPartition, spec: &NormSpec) -> Result<Self> {
        spec.validate()?;
        part.grid().check_same(traj.grid())?;
        let profiles = traj
            .states()
            .iter()
            .map(|s| {
                Ok([
                    vector_profile(&s.u, part, spec)?,
                    vector_profile(&s.b, part, spec)?,
                    vector_profile(&s.j, part, spec)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProfileSeries { dt: traj.dt(), profiles })
    }

    /// Norms with `s` for the supremum and `s + 2` for the integral.
    pub fn norms(&self, spec: &NormSpec) -> TrajectoryNorms {
        let field = |slot: usize| {
            let at = |s: f64| -> Vec<f64> { self.profiles.iter().map(|p| p[slot].besov(s, spec.r)).collect() };
            let low = at(spec.s);
            let mid = at(spec.s + 1.0);
            let high = at(spec.s + 2.0);
            let linf_low = low.iter().cloned().fold(0.0, f64::max);
            let l1_high = trapezoid(self.dt, &high);
            let l2_mid = trapezoid(self.dt, &mid.iter().map(|m| m * m).collect::<Vec<_>>()).sqrt();
            SpaceTimeNorms {
                linf_low,
                l1_high,
                l2_mid,
                x_norm: linf_low + l1_high,
            }
        };
        let (u, b, j) = (field(0), field(1), field(2));
        TrajectoryNorms {
            u,
            b,
            j,
            total: u.plus(b).plus(j),
        }
    }

    /// `s`-index norm of each node, summed over the three fields.
    pub fn instant(&self, s: f64, spec: &NormSpec) -> Vec<f64> {
        self.profiles
            .iter()
            .map(|p| p.iter().map(|b| b.besov(s, spec.r)).sum())
            .collect()
    }
}

/// Discrete `L^∞(N^s) + L¹(N^{s+2})` norms of a trajectory, with the
/// `L²(N^{s+1})` interpolant.
pub fn spacetime_norms(
    traj: &Trajectory,
    spec_low: &NormSpec,
    spec_high: &NormSpec,
    part: &LpPartition,
) -> Result<TrajectoryNorms> {
    if traj.len() < 2 {
        return Err(Error::Config("space-time norms need at least two time nodes".into()));
    }
    if !spec_low.same_family(spec_high) || (spec_high.s - spec_low.s - 2.0).abs() > 1e-12 {
        return Err(Error::Config("high-index norm must be the low index shifted by 2".into()));
    }
    Ok(ProfileSeries::new(traj, part, spec_low)?.norms(spec_low))
}

/// Summed `X` norm with `spec` as the low index.
pub fn x_norm(traj: &Trajectory, spec: &NormSpec, part: &LpPartition) -> Result<f64> {
    Ok(spacetime_norms(traj, spec, &spec.with_s(spec.s + 2.0), part)?.total.x_norm)
}
