//! Running configured experiments and writing their CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use lrwave::farfield::{angle_grid, cross_section, effective_source, SourceGrid};
use lrwave::grid::{
    build_ecs_axis, build_symmetric_axis, catalog as fields, sample_field, sample_supported, separable_perturbation_cp,
    EcsAxis, WaveNumberField,
};
use lrwave::kron_linalg::{svd, DEFAULT_FULL_SOLVE_CAP};
use lrwave::report::SolveReport;
use lrwave::solver2d::{alternate_with, random_initial_v, svd_initial_v, AlternateOptions, Helmholtz2D, LowRankWave2D};
use lrwave::solver3d::{run_with, Helmholtz3D, Init, RunOptions, Version};
use lrwave::tensor::{cp_als, unfold, CpAlsOptions, CpTensor, DenseTensor, TuckerTensor};
use lrwave::{CMat, C64, ONE};

use crate::catalog;
use crate::config::{ExperimentConfig, InitKind, Layout, Perturbation, SourceTag};
use crate::CliError;

/// A discretized problem together with what post-processing needs.
pub struct Built {
    pub axis: EcsAxis,
    pub field: WaveNumberField,
    pub f: DenseTensor,
    pub problem: Problem,
}

pub enum Problem {
    Plane(Helmholtz2D),
    Space(Helmholtz3D),
}

pub enum Solution {
    Plane(LowRankWave2D),
    Space(TuckerTensor),
}

impl Solution {
    fn to_dense(&self) -> DenseTensor {
        match self {
            Solution::Plane(w) => DenseTensor::from_matrix(&w.to_dense()),
            Solution::Space(t) => t.to_dense(),
        }
    }

    /// Normalized singular values per unfolding (one list in 2D).
    fn singular_values(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let lists = match self {
            Solution::Plane(w) => vec![svd(&w.r)?.s],
            Solution::Space(t) => (0..3).map(|m| Ok(svd(&unfold(&t.core, m)?)?.s)).collect::<Result<_, CliError>>()?,
        };
        Ok(lists.into_iter().map(normalized).collect())
    }
}

fn normalized(s: Vec<f64>) -> Vec<f64> {
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().map(|v| v / top).collect(),
        _ => s,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseTime {
    pub phase: String,
    pub seconds: f64,
}

/// Serializable mirror of a solver report plus the config that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub residual_history: Vec<f64>,
    pub phases: Vec<PhaseTime>,
    pub final_ranks: Vec<usize>,
    pub converged: bool,
    pub stop_reason: String,
    pub config: ExperimentConfig,
    pub library_version: String,
}

impl RunReport {
    fn new(rep: &SolveReport, cfg: &ExperimentConfig) -> Self {
        Self {
            residual_history: rep.residual_history.clone(),
            phases: rep.phases.iter().map(|(p, s)| PhaseTime { phase: p.clone(), seconds: *s }).collect(),
            final_ranks: rep.final_ranks.clone(),
            converged: rep.converged,
            stop_reason: format!("{:?}", rep.stop_reason),
            config: cfg.clone(),
            library_version: lrwave::VERSION.to_string(),
        }
    }

    fn add_phase(&mut self, phase: &str, seconds: f64) {
        self.phases.push(PhaseTime { phase: phase.to_string(), seconds });
    }
}

fn axis(cfg: &ExperimentConfig) -> Result<EcsAxis, CliError> {
    let g = &cfg.grid;
    Ok(match g.layout(cfg.problem.kind) {
        Layout::Symmetric => build_symmetric_axis(g.interior_points, g.extent, g.rotation_angle, g.ecs_fraction)?,
        Layout::Quadrant => build_ecs_axis(g.interior_points, g.extent, g.rotation_angle, g.ecs_fraction)?,
    })
}

fn perturbation_fn(p: Perturbation) -> fn(&[C64]) -> C64 {
    fn none(_: &[C64]) -> C64 {
        lrwave::ZERO
    }
    fn ridge(x: &[C64]) -> C64 {
        -fields::exp_ridge(x)
    }
    match p {
        Perturbation::None => none,
        Perturbation::GaussWell => fields::gaussian,
        Perturbation::ExpRidge => ridge,
        Perturbation::TemkinPoet => catalog::temkin_poet_well,
    }
}

/// CP form of `k²`: the background term plus either the exact separable
/// Gaussian or a CP-ALS fit of the sampled perturbation.
fn wave_number_cp(cfg: &ExperimentConfig, axes: &[&EcsAxis], field: &WaveNumberField) -> Result<CpTensor, CliError> {
    let k0_sq = field.constant_part;
    let exact = separable_perturbation_cp(axes, k0_sq, ONE, |x| (-x * x).exp())?;
    let Some(s) = cfg.wavenumber.cp_rank else {
        return Ok(exact);
    };
    let samples = field.variation.scale(k0_sq);
    let fit = cp_als(&samples, s, &CpAlsOptions { seed: cfg.solver.seed, ..Default::default() })?.cp;
    // Background term first, then the fitted terms.
    let mut weights = vec![exact.weights[0]];
    weights.extend_from_slice(&fit.weights);
    let factors = (0..3)
        .map(|m| {
            let (bg, f) = (&exact.factors[m], &fit.factors[m]);
            let mut out = CMat::zeros(bg.nrows(), 1 + f.ncols());
            out.column_mut(0).copy_from(&bg.column(0));
            out.columns_mut(1, f.ncols()).copy_from(f);
            out
        })
        .collect();
    Ok(CpTensor::new(weights, factors)?)
}

pub fn build(cfg: &ExperimentConfig) -> Result<Built, CliError> {
    cfg.validate()?;
    let ax = axis(cfg)?;
    let dim = cfg.problem.kind.dim();
    let axes: Vec<&EcsAxis> = vec![&ax; dim];
    let k0_sq = C64::from(cfg.wavenumber.background);
    let pert = cfg.wavenumber.perturbation(cfg.problem.kind);
    let field = match pert {
        Perturbation::None => WaveNumberField::constant(&axes, k0_sq),
        p => WaveNumberField::from_perturbation(&axes, k0_sq, perturbation_fn(p))?,
    };
    let f = match cfg.problem.source() {
        SourceTag::NegGauss => sample_field(&axes, fields::neg_gaussian)?,
        SourceTag::GroundState => sample_supported(&axes, catalog::ground_state_source)?,
        SourceTag::Zero => DenseTensor::zeros(&vec![ax.len(); dim]),
    };
    let problem = if dim == 2 {
        let mut p = Helmholtz2D::from_axes(&ax, &ax, &field, &f)?;
        if pert == Perturbation::GaussWell {
            p = p.with_separable_k(separable_perturbation_cp(&axes, k0_sq, ONE, |x| (-x * x).exp())?)?;
        }
        Problem::Plane(p)
    } else {
        let cp = if field.is_constant() { None } else { Some(wave_number_cp(cfg, &axes, &field)?) };
        Problem::Space(Helmholtz3D::from_axes([&ax, &ax, &ax], &field, cp, f.clone())?)
    };
    Ok(Built { axis: ax, field, f, problem })
}

fn alternate_options(cfg: &ExperimentConfig) -> AlternateOptions {
    AlternateOptions { max_iters: cfg.solver.max_iters, tol: cfg.solver.tol, ..Default::default() }
}

fn run_options(cfg: &ExperimentConfig) -> Result<RunOptions, CliError> {
    let r = cfg.ranks();
    let version = Version::from_number(cfg.solver.version.unwrap_or(1))?;
    let mut o = RunOptions::new(version, [r[0], r[1], r[2]]);
    o.max_iters = cfg.solver.max_iters;
    o.tol = cfg.solver.tol;
    o.init = match cfg.solver.init {
        InitKind::Source => Init::Hosvd,
        InitKind::Random => Init::Random(cfg.solver.seed),
    };
    Ok(o)
}

/// Runs the configured solver, calling `observe` with the dense iterate
/// after every iteration when given.
fn solve(
    built: &Built,
    cfg: &ExperimentConfig,
    mut observe: Option<&mut dyn FnMut(DenseTensor)>,
) -> Result<(Solution, SolveReport), CliError> {
    match &built.problem {
        Problem::Plane(p) => {
            let r = cfg.ranks()[0];
            let v0 = match cfg.solver.init {
                InitKind::Source => svd_initial_v(p, r)?,
                InitKind::Random => random_initial_v(p.m(), r, cfg.solver.seed),
            };
            let (w, rep) = alternate_with(p, r, &v0, &alternate_options(cfg), |_, w| {
                if let Some(f) = observe.as_mut() {
                    f(DenseTensor::from_matrix(&w.to_dense()));
                }
            })?;
            Ok((Solution::Plane(w), rep))
        }
        Problem::Space(p) => {
            let opts = run_options(cfg)?;
            let (t, rep) = run_with(p, &opts, |_, t| {
                if let Some(f) = observe.as_mut() {
                    f(t.to_dense());
                }
            })?;
            Ok((Solution::Space(t), rep))
        }
    }
}

/// Everything a solve produced, before it is written out.
pub struct ExperimentOutput {
    pub report: RunReport,
    pub singular_values: Vec<Vec<f64>>,
    /// `(angle, normalized cross section)`, 2D only.
    pub cross_section: Option<Vec<(f64, f64)>>,
    pub files: Vec<PathBuf>,
}

fn far_field(built: &Built, cfg: &ExperimentConfig, u: &DenseTensor) -> Result<Vec<(f64, f64)>, CliError> {
    let axes = [&built.axis, &built.axis];
    let grid = SourceGrid::from_axes(&axes)?;
    let g = effective_source(&grid, &built.field, &built.f, u)?;
    let angles = angle_grid(cfg.output.angles);
    let k0 = cfg.wavenumber.background.sqrt();
    let values = cross_section(&grid, &g, k0, &angles, cfg.output.far_radius)?;
    Ok(angles.into_iter().zip(values).collect())
}

/// Solves the configured problem and writes the requested CSVs plus
/// `run_meta.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let built = build(cfg)?;
    let (sol, rep) = solve(&built, cfg, None)?;
    let mut report = RunReport::new(&rep, cfg);

    let t0 = Instant::now();
    let singular_values = sol.singular_values()?;
    report.add_phase("singular_values", t0.elapsed().as_secs_f64());
    let cross_section = if cfg.problem.kind.dim() == 2 && cfg.output.cross_section {
        let t0 = Instant::now();
        let cs = far_field(&built, cfg, &sol.to_dense())?;
        report.add_phase("cross_section", t0.elapsed().as_secs_f64());
        Some(cs)
    } else {
        None
    };

    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    if cfg.output.residuals {
        let rows = report.residual_history.iter().enumerate().map(|(i, r)| vec![(i + 1).to_string(), fmt(*r)]);
        files.push(write_csv(dir, "residuals.csv", &["iter", "residual"], rows)?);
    }
    if cfg.output.singular_values {
        files.push(write_csv(dir, "singular_values.csv", &["mode", "index", "ratio"], singular_rows(&singular_values))?);
    }
    if cfg.output.runtime {
        let rank = rank_label(&report.final_ranks);
        let rows = report.phases.iter().map(|p| vec![p.phase.clone(), fmt(p.seconds), rank.clone()]);
        files.push(write_csv(dir, "runtime.csv", &["phase", "seconds", "rank"], rows)?);
    }
    if let Some(cs) = &cross_section {
        let rows = cs.iter().map(|(a, v)| vec![fmt(*a), fmt(*v)]);
        files.push(write_csv(dir, "cross_section.csv", &["angle", "value"], rows)?);
    }
    files.push(write_json(dir, "run_meta.json", &report)?);
    Ok(ExperimentOutput { report, singular_values, cross_section, files })
}

/// Iterates against a full-grid solve of the same problem.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    /// Relative Frobenius error after each iteration.
    pub errors: Vec<f64>,
    /// Largest `σ_{r+1}/σ₁` of the full solution over the unfoldings.
    pub svd_tail: f64,
    pub full_singular_values: Vec<Vec<f64>>,
    pub iterate_singular_values: Vec<Vec<f64>>,
    pub report: RunReport,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

impl OracleReport {
    /// Largest `|σᵢ(iterate) − σᵢ(full)|/σ₁` over the computed ranks.
    pub fn singular_value_gap(&self) -> f64 {
        self.full_singular_values
            .iter()
            .zip(&self.iterate_singular_values)
            .flat_map(|(full, it)| full.iter().zip(it).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

fn relative(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let nb = b.norm();
    let d = (a - b).norm();
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}

/// Unnormalized singular values of each unfolding.
fn unfolding_spectra(t: &DenseTensor) -> Result<Vec<Vec<f64>>, CliError> {
    let modes = if t.order() == 2 { 1 } else { t.order() };
    (0..modes).map(|m| Ok(svd(&unfold(t, m)?)?.s)).collect()
}

/// Runs the configured solve next to a full-grid solve and writes
/// `error.csv` and `oracle_singular_values.csv`.
pub fn compare_with_oracle(cfg: &ExperimentConfig) -> Result<OracleReport, CliError> {
    let built = build(cfg)?;
    let full = match &built.problem {
        Problem::Plane(p) => DenseTensor::from_matrix(&p.full_solve(DEFAULT_FULL_SOLVE_CAP)?),
        Problem::Space(p) => p.full_solve(DEFAULT_FULL_SOLVE_CAP)?,
    };
    let mut errors = Vec::new();
    let (sol, rep) = solve(&built, cfg, Some(&mut |u: DenseTensor| errors.push(relative(&u, &full))))?;
    let last = relative(&sol.to_dense(), &full);
    // The closing core solve of version 2 happens after the last callback.
    match errors.last_mut() {
        Some(e) => *e = last,
        None => errors.push(last),
    }

    let ranks = cfg.ranks();
    let spectra = unfolding_spectra(&full)?;
    let svd_tail = spectra
        .iter()
        .zip(&ranks)
        .map(|(s, &r)| if s.is_empty() || s[0] == 0.0 { 0.0 } else { s.get(r).copied().unwrap_or(0.0) / s[0] })
        .fold(0.0, f64::max);
    let iterate = unfolding_spectra(&sol.to_dense())?;
    let full_singular_values: Vec<Vec<f64>> = spectra.iter().map(|s| normalized(s.clone())).collect();
    // Iterate values relative to the full σ₁ so the two lists are comparable.
    let iterate_singular_values: Vec<Vec<f64>> = iterate
        .iter()
        .zip(&spectra)
        .zip(&ranks)
        .map(|((it, s), &r)| {
            let top = s.first().copied().filter(|v| *v > 0.0).unwrap_or(1.0);
            it.iter().take(r).map(|v| v / top).collect()
        })
        .collect();

    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let rows = errors.iter().enumerate().map(|(i, e)| vec![(i + 1).to_string(), fmt(*e), fmt(svd_tail)]);
    let mut files = vec![write_csv(dir, "error.csv", &["iter", "relative_error", "svd_tail"], rows)?];
    let mut rows = Vec::new();
    for (m, (full_s, it)) in full_singular_values.iter().zip(&iterate_singular_values).enumerate() {
        for (i, v) in full_s.iter().enumerate() {
            let iter_value = it.get(i).map(|x| fmt(*x)).unwrap_or_default();
            rows.push(vec![(m + 1).to_string(), (i + 1).to_string(), fmt(*v), iter_value]);
        }
    }
    files.push(write_csv(dir, "oracle_singular_values.csv", &["mode", "index", "full", "iterate"], rows)?);
    Ok(OracleReport {
        errors,
        svd_tail,
        full_singular_values,
        iterate_singular_values,
        report: RunReport::new(&rep, cfg),
        files,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    /// Sweep version for 3D runs.
    pub version: Option<u32>,
    pub rank: usize,
    pub iterations: usize,
    pub final_residual: f64,
    /// Median seconds per phase over the repetitions, plus `total`.
    pub phases: Vec<PhaseTime>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub repeats: usize,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runtime-versus-rank sweep. Each `(version, rank)` point is solved
/// `repeats` times and every phase reports its median. Versions are ignored
/// for 2D problems; an empty list keeps the configured version.
pub fn sweep(cfg: &ExperimentConfig, ranks: &[usize], versions: &[u32], repeats: usize) -> Result<SweepReport, CliError> {
    if ranks.is_empty() {
        return Err(CliError::Config { field: "ranks".into(), reason: "no ranks given".into() });
    }
    if repeats == 0 {
        return Err(CliError::Config { field: "repeats".into(), reason: "must be at least 1".into() });
    }
    let built = build(cfg)?;
    let versions: Vec<Option<u32>> = if cfg.problem.kind.dim() == 2 {
        vec![None]
    } else if versions.is_empty() {
        vec![cfg.solver.version]
    } else {
        versions.iter().map(|&v| Some(v)).collect()
    };
    let mut points = Vec::new();
    for &version in &versions {
        for &r in ranks {
            let mut point_cfg = cfg.clone();
            point_cfg.solver.ranks = vec![r];
            point_cfg.solver.version = version;
            point_cfg.validate()?;
            let mut samples: Vec<SolveReport> = Vec::new();
            for _ in 0..repeats {
                samples.push(solve(&built, &point_cfg, None)?.1);
            }
            let mut phases: Vec<PhaseTime> = samples[0]
                .phases
                .iter()
                .map(|(name, _)| PhaseTime {
                    phase: name.clone(),
                    seconds: median(samples.iter().map(|s| s.phase_seconds(name)).collect()),
                })
                .collect();
            phases.push(PhaseTime {
                phase: "total".into(),
                seconds: median(samples.iter().map(|s| s.solve_seconds()).collect()),
            });
            let last = &samples[0];
            points.push(SweepPoint {
                version,
                rank: r,
                iterations: last.iterations(),
                final_residual: last.final_residual().unwrap_or(f64::NAN),
                phases,
            });
        }
    }

    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let label = |v: Option<u32>| v.map(|v| v.to_string()).unwrap_or_default();
    let rows = points.iter().flat_map(|p| {
        p.phases.iter().map(move |ph| vec![label(p.version), p.rank.to_string(), ph.phase.clone(), fmt(ph.seconds)])
    });
    let mut files = vec![write_csv(dir, "runtime.csv", &["version", "rank", "phase", "seconds"], rows)?];
    let rows = points
        .iter()
        .map(|p| vec![label(p.version), p.rank.to_string(), p.iterations.to_string(), fmt(p.final_residual)]);
    files.push(write_csv(dir, "sweep_summary.csv", &["version", "rank", "iterations", "final_residual"], rows)?);
    Ok(SweepReport { points, repeats, files })
}

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest representation that parses back to the same value.
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn rank_label(ranks: &[usize]) -> String {
    ranks.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("x")
}

fn singular_rows(lists: &[Vec<f64>]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (m, s) in lists.iter().enumerate() {
        for (i, v) in s.iter().enumerate() {
            rows.push(vec![(m + 1).to_string(), (i + 1).to_string(), fmt(*v)]);
        }
    }
    rows
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    w.write_record(header).map_err(|e| CliError::io(&path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e))?;
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1e-300, 123456.789, 2.0f64.sqrt()] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn zero_singular_values_stay_zero() {
        assert_eq!(normalized(vec![0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(normalized(vec![2.0, 1.0]), vec![1.0, 0.5]);
    }
}
