//! Batch jobs: configuration, initial data and the artifact-writing runner.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::GridSpec;
use crate::hall::ExtendedState;
use crate::io;
use crate::lp::{lp_norm, vector_profile, BandProfile, LpPartition, NormSpec};
use crate::ops::{curl, divergence};
use crate::random::{derive_seed, random_solenoidal, Ensemble};
use crate::solver::{
    heat_trajectory, picard_global, picard_local, smallness_report, IterationRecord, SolverConfig, Termination,
};
use crate::trajectory::{Trajectory, TrajectoryNorms};
use crate::verification::{
    check_j_consistency, check_scaling, contraction_probe, estimate_constant_with, uniqueness_sweep, ContractionReport,
    EstimateOptions, LemmaId, ResidualKind, ScalingReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    SolveGlobal,
    SolveLocal,
    Estimate,
    Consistency,
    Scaling,
    Uniqueness,
    Contraction,
    NormReport,
}

impl JobKind {
    pub fn name(&self) -> &'static str {
        match self {
            JobKind::SolveGlobal => "solve_global",
            JobKind::SolveLocal => "solve_local",
            JobKind::Estimate => "estimate",
            JobKind::Consistency => "consistency",
            JobKind::Scaling => "scaling",
            JobKind::Uniqueness => "uniqueness",
            JobKind::Contraction => "contraction",
            JobKind::NormReport => "norm_report",
        }
    }
}

pub const PRESETS: [&str; 3] = ["random", "taylor_green", "orszag_tang"];

/// A named generator, or a nine-component field container on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialData {
    Preset(PresetSpec),
    File(FileSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub preset: String,
    #[serde(default)]
    pub seed: u64,
    pub amplitude: f64,
    /// Spectrum of the `random` preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Ensemble>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    /// Relative paths resolve against the config file's directory.
    pub file: PathBuf,
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        if let InitialData::Preset(p) = self {
            if !PRESETS.contains(&p.preset.as_str()) {
                return Err(Error::Config(format!(
                    "unknown preset {:?}; expected one of {PRESETS:?}",
                    p.preset
                )));
            }
            if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) {
                return Err(Error::Config("amplitude must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateJob {
    pub lemma: LemmaId,
    pub n_samples: usize,
    #[serde(default)]
    pub options: EstimateOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingJob {
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessJob {
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionJob {
    pub n_samples: usize,
    #[serde(default = "default_t_sweep")]
    pub t_sweep: Vec<f64>,
}

fn default_t_sweep() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: JobKind,
    /// Seed of the job's own sampling (estimates, probes).
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub norm: NormSpec,
    pub initial_data: InitialData,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write every `snapshot_stride`-th node; 0 writes the endpoints only.
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionJob>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The solver settings with the experiment's norm.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            norm: self.norm,
            ..self.solver
        }
    }

    /// Replaces the job seed and the seed of a preset generator.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let InitialData::Preset(p) = &mut self.initial_data {
            p.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.norm.validate()?;
        self.solver_config().validate()?;
        self.initial_data.validate()?;
        let missing = |what: &str| Err(Error::Config(format!("{} job requires a \"{what}\" section", self.kind.name())));
        match self.kind {
            JobKind::Estimate => match &self.estimate {
                None => return missing("estimate"),
                Some(e) if e.n_samples == 0 => return Err(Error::Config("estimate.n_samples must be positive".into())),
                _ => {}
            },
            JobKind::Scaling => match &self.scaling {
                None => return missing("scaling"),
                Some(s) if !(s.lambda >= 1.0 && s.lambda.log2().fract() == 0.0) => {
                    return Err(Error::Config("scaling.lambda must be a power of two".into()))
                }
                _ => {}
            },
            JobKind::Uniqueness => match &self.uniqueness {
                None => return missing("uniqueness"),
                Some(u) if u.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) => {
                    return Err(Error::Config("uniqueness.epsilons must be non-negative".into()))
                }
                _ => {}
            },
            JobKind::Contraction => match &self.contraction {
                None => return missing("contraction"),
                Some(c) if c.n_samples == 0 || c.t_sweep.iter().any(|t| !(*t > 0.0)) => {
                    return Err(Error::Config("contraction needs n_samples > 0 and positive horizons".into()))
                }
                _ => {}
            },
            _ => {}
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// initial data

fn trig_field(grid: &GridSpec, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> VectorField {
    let k = 2.0 * PI / grid.box_length;
    VectorField::from_fn(*grid, |x| f(k * x[0], k * x[1], k * x[2]))
}

/// Builds consistent data from a preset: `J₀ = ∇×B₀`, projected and
/// mean-free.
pub fn generate_initial_data(spec: &PresetSpec, grid: &GridSpec) -> Result<ExtendedState> {
    InitialData::Preset(spec.clone()).validate()?;
    grid.validate()?;
    if spec.amplitude == 0.0 {
        return Ok(ExtendedState::zeros(*grid));
    }
    let (u, b) = match spec.preset.as_str() {
        "random" => {
            let e = spec.ensemble.unwrap_or_default();
            (
                random_solenoidal(grid, &e, derive_seed(spec.seed, 0)),
                random_solenoidal(grid, &e, derive_seed(spec.seed, 1)),
            )
        }
        "taylor_green" => (
            trig_field(grid, |x, y, z| [x.sin() * y.cos() * z.cos(), -x.cos() * y.sin() * z.cos(), 0.0]),
            trig_field(grid, |x, y, z| [0.0, y.sin() * z.cos() * x.cos(), -y.cos() * z.sin() * x.cos()]),
        ),
        "orszag_tang" => (
            trig_field(grid, |x, y, _| [-2.0 * y.sin(), 2.0 * x.sin(), 0.0]),
            trig_field(grid, |x, y, z| {
                [-2.0 * (2.0 * y).sin() + z.sin(), 2.0 * x.sin() + z.sin(), x.sin() + y.sin()]
            }),
        ),
        other => return Err(Error::Config(format!("unknown preset {other:?}"))),
    };
    ExtendedState::consistent(&u.scaled(spec.amplitude), &b.scaled(spec.amplitude))
}

pub fn load_initial_data(data: &InitialData, grid: &GridSpec, base_dir: &Path) -> Result<ExtendedState> {
    match data {
        InitialData::Preset(p) => generate_initial_data(p, grid),
        InitialData::File(f) => {
            let path = base_dir.join(&f.file);
            let s = io::read_state(&path)?;
            if s.grid().n_per_axis != grid.n_per_axis || s.grid().box_length != grid.box_length {
                return Err(Error::Config(format!("{} does not match the configured grid", path.display())));
            }
            s.regrid(*grid)
        }
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub kind: JobKind,
    pub termination: Termination,
    pub converged: bool,
    pub iterates: usize,
    pub residual: f64,
    /// Largest `‖Θ^{k+1}−Θ^k‖ / ‖Θ^k−Θ^{k−1}‖` over the iteration.
    pub max_contraction: Option<f64>,
    pub norms: TrajectoryNorms,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat_norms: Option<TrajectoryNorms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_emp: Option<f64>,
    pub max_j_defect: f64,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub heat_max: f64,
    pub solution_max: f64,
    pub heat: Vec<f64>,
    pub solution: Vec<f64>,
    pub solver_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingJobReport {
    pub heat: ScalingReport,
    pub mild: ScalingReport,
    pub solver_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSweep {
    pub probes: Vec<ContractionReport>,
    /// Whether the radius is non-increasing along the sorted horizons.
    pub radius_monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldNorms {
    pub besov_morrey: f64,
    pub profile: BandProfile,
    pub lp: f64,
    pub l2: f64,
    pub divergence_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub spec: NormSpec,
    pub u: FieldNorms,
    pub b: FieldNorms,
    pub j: FieldNorms,
    /// `‖∇×B − J‖_{L²} / ‖J‖_{L²}`
    pub j_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Failure<'a> {
    class: &'a str,
    exit_code: i32,
    message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: JobKind,
    pub status: String,
    pub exit_code: i32,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub initial_data_sha256: Option<String>,
    pub artifacts: Vec<String>,
}

// ---------------------------------------------------------------------------
// runner

/// Where a job reads relative inputs from and writes its artifacts to.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub base_dir: PathBuf,
}

impl RunOptions {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        RunOptions {
            output_dir: cfg.output_dir.clone(),
            base_dir: PathBuf::from("."),
        }
    }
}

struct Artifacts {
    root: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn path(&mut self, rel: &str) -> PathBuf {
        self.written.push(rel.to_string());
        self.root.join(rel)
    }

    fn json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<()> {
        let p = self.path(rel);
        io::write_json(&p, v)
    }

    fn series(&mut self, history: &[IterationRecord]) -> Result<()> {
        let p = self.path("series.csv");
        io::write_bytes(&p, &io::series_csv(history)?)
    }

    fn state(&mut self, rel: &str, s: &ExtendedState, t: Option<f64>) -> Result<()> {
        let p = self.path(rel);
        self.written.push(rel.replace(".bin", ".json"));
        io::write_state(&p, s, t)
    }

    fn snapshots(&mut self, traj: &Trajectory, stride: usize) -> Result<()> {
        let last = traj.len() - 1;
        for (k, (t, s)) in traj.times().iter().zip(traj.states()).enumerate() {
            let keep = if stride == 0 { k == 0 || k == last } else { k % stride == 0 || k == last };
            if keep {
                self.state(&format!("fields/theta_{k:04}.bin"), s, Some(*t))?;
            }
        }
        Ok(())
    }
}

/// Outcome of [`run`]: the exit code and the manifest that was written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub error: Option<String>,
}

/// Executes the job and writes `manifest.json`, `series.csv`,
/// `reports/*.json` and `fields/*.bin`. Failures are recorded in
/// `failure.json`; only an unwritable output directory returns `Err`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let config_bytes = io::to_json_bytes(cfg)?;
    let mut art = Artifacts {
        root: opts.output_dir.clone(),
        written: Vec::new(),
    };
    std::fs::create_dir_all(&art.root).map_err(Error::Io)?;
    let mut data_digest = None;
    let result = cfg.validate().and_then(|_| execute(cfg, opts, &mut art, &mut data_digest));
    let result = result.and_then(|_| validate_artifacts(&art.root, &art.written));
    let (status, exit_code, error) = match &result {
        Ok(()) => ("ok".to_string(), 0, None),
        Err(e) => (e.class().to_string(), e.exit_code(), Some(e.to_string())),
    };
    if let Err(e) = &result {
        io::write_json(
            &art.root.join("failure.json"),
            &Failure {
                class: e.class(),
                exit_code: e.exit_code(),
                message: e.to_string(),
            },
        )?;
        art.written.push("failure.json".into());
    }
    art.written.sort();
    art.written.dedup();
    let manifest = Manifest {
        tool: "hallmhd".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.kind,
        status,
        exit_code,
        config: cfg.clone(),
        config_sha256: io::sha256_hex(&config_bytes),
        initial_data_sha256: data_digest,
        artifacts: art.written.clone(),
    };
    io::write_json(&art.root.join("manifest.json"), &manifest)?;
    Ok(RunOutcome {
        exit_code,
        manifest,
        error,
    })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn nonconvergence(what: &str, termination: Termination, residual: f64) -> Error {
    Error::NonConvergence(format!("{what} ended with {termination:?} at residual {residual:e}"))
}

fn execute(cfg: &ExperimentConfig, opts: &RunOptions, art: &mut Artifacts, digest: &mut Option<String>) -> Result<()> {
    let solver = cfg.solver_config();
    let need_data = cfg.kind != JobKind::Estimate && cfg.kind != JobKind::Contraction;
    let theta0 = if need_data {
        let s = load_initial_data(&cfg.initial_data, &cfg.grid, &opts.base_dir)?;
        *digest = Some(io::state_digest(&s));
        art.state("fields/initial.bin", &s, Some(0.0))?;
        Some(s)
    } else {
        None
    };
    let mut history: Vec<IterationRecord> = Vec::new();
    match cfg.kind {
        JobKind::SolveGlobal => {
            let theta0 = theta0.as_ref().unwrap();
            art.json("reports/smallness.json", &smallness_report(theta0, &solver, cfg.seed)?)?;
            let out = picard_global(theta0, &solver)?;
            history = out.history.clone();
            let report = SolveReport {
                kind: cfg.kind,
                termination: out.termination,
                converged: out.converged(),
                iterates: out.iterates,
                residual: out.residual,
                max_contraction: out.history.iter().filter_map(|r| r.contraction).reduce(f64::max),
                norms: out.norms,
                heat_norms: Some(out.heat_norms),
                m_emp: None,
                max_j_defect: max_of(&check_j_consistency(&out.traj, &cfg.norm)?),
                history: out.history.clone(),
            };
            art.json("reports/solve.json", &report)?;
            art.snapshots(&out.traj, cfg.snapshot_stride)?;
            art.series(&history)?;
            if !out.converged() {
                return Err(nonconvergence("global Picard iteration", out.termination, out.residual));
            }
            return Ok(());
        }
        JobKind::SolveLocal => {
            let theta0 = theta0.as_ref().unwrap();
            art.json("reports/smallness.json", &smallness_report(theta0, &solver, cfg.seed)?)?;
            let out = picard_local(theta0, &solver)?;
            history = out.history.clone();
            let report = SolveReport {
                kind: cfg.kind,
                termination: out.termination,
                converged: out.converged(),
                iterates: out.iterates,
                residual: out.residual,
                max_contraction: out.history.iter().filter_map(|r| r.contraction).reduce(f64::max),
                norms: out.norms,
                heat_norms: None,
                m_emp: Some(out.m_emp),
                max_j_defect: max_of(&check_j_consistency(&out.traj, &cfg.norm)?),
                history: out.history.clone(),
            };
            art.json("reports/solve.json", &report)?;
            art.snapshots(&out.traj, cfg.snapshot_stride)?;
            art.series(&history)?;
            if !out.converged() {
                return Err(nonconvergence("local Picard iteration", out.termination, out.residual));
            }
            return Ok(());
        }
        JobKind::Estimate => {
            let job = cfg.estimate.as_ref().unwrap();
            let r = estimate_constant_with(job.lemma, job.n_samples, &cfg.grid, &cfg.norm, cfg.seed, &job.options)?;
            art.json("reports/estimate.json", &r)?;
        }
        JobKind::Consistency => {
            let theta0 = theta0.as_ref().unwrap();
            let heat = check_j_consistency(&heat_trajectory(theta0, &solver)?, &cfg.norm)?;
            let out = picard_global(theta0, &solver)?;
            history = out.history.clone();
            let solution = check_j_consistency(&out.traj, &cfg.norm)?;
            art.json(
                "reports/consistency.json",
                &ConsistencyReport {
                    heat_max: max_of(&heat),
                    solution_max: max_of(&solution),
                    heat,
                    solution,
                    solver_residual: out.residual,
                },
            )?;
            if !out.converged() {
                art.series(&history)?;
                return Err(nonconvergence("global Picard iteration", out.termination, out.residual));
            }
        }
        JobKind::Scaling => {
            let theta0 = theta0.as_ref().unwrap();
            let lambda = cfg.scaling.as_ref().unwrap().lambda;
            let heat = heat_trajectory(theta0, &solver)?;
            let out = picard_global(theta0, &solver)?;
            history = out.history.clone();
            if !out.converged() {
                art.series(&history)?;
                return Err(nonconvergence("global Picard iteration", out.termination, out.residual));
            }
            art.json(
                "reports/scaling.json",
                &ScalingJobReport {
                    heat: check_scaling(&heat, lambda, &solver, ResidualKind::Heat)?,
                    mild: check_scaling(&out.traj, lambda, &solver, ResidualKind::Mild)?,
                    solver_residual: out.residual,
                },
            )?;
        }
        JobKind::Uniqueness => {
            let theta0 = theta0.as_ref().unwrap();
            let eps = &cfg.uniqueness.as_ref().unwrap().epsilons;
            art.json("reports/uniqueness.json", &uniqueness_sweep(theta0, eps, &solver, cfg.seed)?)?;
        }
        JobKind::Contraction => {
            let job = cfg.contraction.as_ref().unwrap();
            let mut horizons = job.t_sweep.clone();
            horizons.sort_by(f64::total_cmp);
            let probes = horizons
                .iter()
                .map(|&t| {
                    let c = SolverConfig { t_final: t, ..solver };
                    contraction_probe(&c, &cfg.grid, &cfg.norm, job.n_samples, cfg.seed)
                })
                .collect::<Result<Vec<_>>>()?;
            let radius_monotone = probes.windows(2).all(|w| w[1].radius <= w[0].radius);
            art.json("reports/contraction.json", &ContractionSweep { probes, radius_monotone })?;
        }
        JobKind::NormReport => {
            let theta0 = theta0.as_ref().unwrap();
            art.json("reports/norms.json", &norm_report(theta0, &cfg.norm)?)?;
        }
    }
    art.series(&history)
}

pub fn norm_report(theta: &ExtendedState, spec: &NormSpec) -> Result<NormReport> {
    let part = LpPartition::build(theta.grid())?;
    let field = |f: &VectorField| -> Result<FieldNorms> {
        let profile = vector_profile(f, &part, spec)?;
        Ok(FieldNorms {
            besov_morrey: profile.besov(spec.s, spec.r),
            profile,
            lp: lp_norm(f, spec.p),
            l2: f.l2_norm(),
            divergence_defect: divergence(f).l2_norm(),
        })
    };
    let jn = theta.j.l2_norm();
    let d = curl(&theta.b).sub(&theta.j).l2_norm();
    Ok(NormReport {
        spec: *spec,
        u: field(&theta.u)?,
        b: field(&theta.b)?,
        j: field(&theta.j)?,
        j_defect: if d == 0.0 { 0.0 } else { d / jn.max(f64::MIN_POSITIVE) },
    })
}

/// Re-reads every artifact and checks its structure.
pub fn validate_artifacts(root: &Path, rel: &[String]) -> Result<()> {
    for r in rel {
        let p = root.join(r);
        let bytes = io::read_bytes(&p)?;
        let bad = |m: String| Error::Integrity(format!("artifact {r}: {m}"));
        if r.ends_with(".json") {
            let v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
            if !v.is_object() {
                return Err(bad("not a JSON object".into()));
            }
        } else if r.ends_with(".csv") {
            let text = String::from_utf8(bytes).map_err(|e| bad(e.to_string()))?;
            let mut lines = text.lines();
            if lines.next() != Some(io::SERIES_HEADER.join(",").as_str()) {
                return Err(bad("unexpected header".into()));
            }
            for l in lines {
                if l.split(',').count() != io::SERIES_HEADER.len() || l.split(',').any(|c| c.parse::<f64>().is_err()) {
                    return Err(bad(format!("malformed row {l:?}")));
                }
            }
        } else if r.ends_with(".bin") {
            io::decode_container(&bytes).map_err(|e| bad(e.to_string()))?;
        }
    }
    Ok(())
}
