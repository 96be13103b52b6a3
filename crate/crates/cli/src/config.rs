//! Experiment configuration files.
//!
//! A config is TOML with four required sections (`problem`, `grid`,
//! `wavenumber`, `solver`) and an optional `output` section. Unknown keys are
//! rejected. The README lists the schema.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub wavenumber: WaveNumberSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "2d-const")]
    Const2d,
    #[serde(rename = "2d-var")]
    Var2d,
    #[serde(rename = "3d-const")]
    Const3d,
    #[serde(rename = "3d-var")]
    Var3d,
    #[serde(rename = "temkin-poet")]
    TemkinPoet,
}

impl ProblemKind {
    pub fn dim(self) -> usize {
        match self {
            Self::Const3d | Self::Var3d => 3,
            _ => 2,
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(self, Self::Const2d | Self::Const3d)
    }
}

/// Right-hand sides from the fixed catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    /// `−e^{−|x|²}`.
    NegGauss,
    /// `−ρ₁ρ₂ e^{−ρ₁−ρ₂}`, a product of hydrogen-like radial orbitals.
    GroundState,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    /// Defaults to `ground-state` for Temkin-Poet and `neg-gauss` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceTag>,
}

impl ProblemSection {
    pub fn source(&self) -> SourceTag {
        self.source.unwrap_or(match self.kind {
            ProblemKind::TemkinPoet => SourceTag::GroundState,
            _ => SourceTag::NegGauss,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// `[−L, L]` per axis, scaled at both ends.
    Symmetric,
    /// `[0, b]` per axis with a Dirichlet wall at the origin.
    Quadrant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Interior points per axis.
    pub interior_points: usize,
    /// Half-width `L` (symmetric) or box size `b` (quadrant).
    pub extent: f64,
    /// Complex rotation angle in radians, in `(0, π/2)`.
    pub rotation_angle: f64,
    /// Exterior points as a fraction of the interior count.
    pub ecs_fraction: f64,
    /// Defaults to quadrant for Temkin-Poet, symmetric otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
}

impl GridSection {
    pub fn layout(&self, kind: ProblemKind) -> Layout {
        self.layout.unwrap_or(if kind == ProblemKind::TemkinPoet { Layout::Quadrant } else { Layout::Symmetric })
    }
}

/// Perturbations of `k²` from the fixed catalog; the background is added.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    None,
    /// `+e^{−|x|²}`.
    GaussWell,
    /// `−e^{−|x−y|}` (2D only).
    ExpRidge,
    /// `1/ρ₁ + 1/ρ₂ − 1/max(ρ₁, ρ₂)`, minus the s-wave model potential.
    TemkinPoet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveNumberSection {
    /// Real background `k0²` (the energy for Temkin-Poet).
    pub background: f64,
    /// Defaults from the problem kind: none, gauss-well, or temkin-poet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    /// 3D only: fit the perturbation by CP-ALS with this many terms instead
    /// of using its exact separable form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_rank: Option<usize>,
}

impl WaveNumberSection {
    pub fn perturbation(&self, kind: ProblemKind) -> Perturbation {
        self.perturbation.unwrap_or(match kind {
            ProblemKind::Const2d | ProblemKind::Const3d => Perturbation::None,
            ProblemKind::Var2d | ProblemKind::Var3d => Perturbation::GaussWell,
            ProblemKind::TemkinPoet => Perturbation::TemkinPoet,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Leading singular vectors (2D) or truncated HOSVD (3D) of the source.
    Source,
    /// Seeded random orthonormal bases.
    Random,
}

fn default_max_iters() -> usize {
    10
}

fn default_tol() -> f64 {
    1e-6
}

fn default_init() -> InitKind {
    InitKind::Source
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// 3D sweep version 1, 2 or 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    /// One rank (2D) or three multilinear ranks (3D); a single value is
    /// repeated for 3D.
    pub ranks: Vec<usize>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_init")]
    pub init: InitKind,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

fn default_angles() -> usize {
    45
}

fn default_far_radius() -> f64 {
    1000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub residuals: bool,
    #[serde(default = "yes")]
    pub singular_values: bool,
    #[serde(default = "yes")]
    pub runtime: bool,
    /// Ignored for 3D problems.
    #[serde(default = "yes")]
    pub cross_section: bool,
    #[serde(default = "default_angles")]
    pub angles: usize,
    /// Radius at which the far-field amplitude is extracted.
    #[serde(default = "default_far_radius")]
    pub far_radius: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            residuals: true,
            singular_values: true,
            runtime: true,
            cross_section: true,
            angles: default_angles(),
            far_radius: default_far_radius(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config { field: field.to_string(), reason: reason.into() }
}

impl ExperimentConfig {
    /// Parses and validates a config.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Multilinear ranks as used by the solver: `[r]` in 2D, `[r1, r2, r3]`
    /// in 3D.
    pub fn ranks(&self) -> Vec<usize> {
        match (self.problem.kind.dim(), self.solver.ranks.as_slice()) {
            (3, [r]) => vec![*r; 3],
            (_, r) => r.to_vec(),
        }
    }

    /// Grid size per axis, interior plus layers.
    pub fn points_per_axis(&self) -> usize {
        let m = self.grid.interior_points;
        let ext = lrwave::grid::exterior_count(m, self.grid.ecs_fraction);
        match self.grid.layout(self.problem.kind) {
            Layout::Symmetric => m + 2 * ext,
            Layout::Quadrant => m + ext,
        }
    }

    /// Field-level checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<(), CliError> {
        let kind = self.problem.kind;
        let g = &self.grid;
        if g.interior_points < 2 {
            return Err(invalid("grid.interior_points", "need at least 2 interior points"));
        }
        if !(g.extent.is_finite() && g.extent > 0.0) {
            return Err(invalid("grid.extent", format!("{} is not a positive length", g.extent)));
        }
        if !(g.rotation_angle > 0.0 && g.rotation_angle < FRAC_PI_2) {
            return Err(invalid("grid.rotation_angle", format!("{} rad is outside (0, π/2)", g.rotation_angle)));
        }
        if !(g.ecs_fraction > 0.0 && g.ecs_fraction <= 1.0) {
            return Err(invalid("grid.ecs_fraction", format!("{} is outside (0, 1]", g.ecs_fraction)));
        }
        let w = &self.wavenumber;
        if !(w.background.is_finite() && w.background > 0.0) {
            return Err(invalid("wavenumber.background", "background k0² must be positive"));
        }
        let pert = w.perturbation(kind);
        match (kind, pert) {
            (ProblemKind::Const2d | ProblemKind::Const3d, p) if p != Perturbation::None => {
                return Err(invalid("wavenumber.perturbation", format!("{kind:?} takes no perturbation")));
            }
            (ProblemKind::Var2d | ProblemKind::Var3d, Perturbation::None) => {
                return Err(invalid("wavenumber.perturbation", "variable problems need a perturbation"));
            }
            (ProblemKind::Var3d, Perturbation::ExpRidge | Perturbation::TemkinPoet) => {
                return Err(invalid("wavenumber.perturbation", "only gauss-well is available in 3D"));
            }
            (_, Perturbation::TemkinPoet) if g.layout(kind) != Layout::Quadrant => {
                return Err(invalid("grid.layout", "the Temkin-Poet potential needs the quadrant layout"));
            }
            _ => {}
        }
        if let Some(s) = w.cp_rank {
            if kind != ProblemKind::Var3d {
                return Err(invalid("wavenumber.cp_rank", "CP fitting applies to 3d-var only"));
            }
            if s == 0 {
                return Err(invalid("wavenumber.cp_rank", "must be at least 1"));
            }
        }
        if self.problem.source() == SourceTag::GroundState && g.layout(kind) != Layout::Quadrant {
            return Err(invalid("problem.source", "ground-state needs the quadrant layout"));
        }

        let s = &self.solver;
        let n = self.points_per_axis();
        match kind.dim() {
            2 => {
                if s.version.is_some() {
                    return Err(invalid("solver.version", "versions apply to 3D problems only"));
                }
                if s.ranks.len() != 1 {
                    return Err(invalid("solver.ranks", "2D problems take a single rank"));
                }
            }
            _ => {
                match s.version {
                    Some(1..=3) => {}
                    Some(v) => return Err(invalid("solver.version", format!("{v} is not one of 1, 2, 3"))),
                    None => return Err(invalid("solver.version", "3D problems need a version (1, 2 or 3)")),
                }
                if s.ranks.len() != 1 && s.ranks.len() != 3 {
                    return Err(invalid("solver.ranks", "3D problems take one or three ranks"));
                }
            }
        }
        let ranks = self.ranks();
        if ranks.iter().any(|&r| r == 0 || r > n) {
            return Err(invalid("solver.ranks", format!("{ranks:?} must lie in 1..={n} for {n} points per axis")));
        }
        if ranks.len() == 3 {
            for m in 0..3 {
                let others: usize = (0..3).filter(|&k| k != m).map(|k| ranks[k]).product();
                if ranks[m] > others {
                    return Err(invalid("solver.ranks", format!("{ranks:?}: each rank must not exceed the product of the others")));
                }
            }
        }
        if s.max_iters == 0 {
            return Err(invalid("solver.max_iters", "must be at least 1"));
        }
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(invalid("solver.tol", "must be positive"));
        }
        let o = &self.output;
        if o.angles == 0 {
            return Err(invalid("output.angles", "must be at least 1"));
        }
        if !(o.far_radius.is_finite() && o.far_radius > 0.0) {
            return Err(invalid("output.far_radius", "must be positive"));
        }
        Ok(())
    }
}
