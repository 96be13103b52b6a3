//! Named analytic expressions and the shipped experiment presets.

use lrwave::{C64, ZERO};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Minus the s-wave (Temkin-Poet) potential on the radial quadrant:
/// `1/ρ₁ + 1/ρ₂ − 1/max(ρ₁, ρ₂)`. Only sampled on the real interior.
pub fn temkin_poet_well(x: &[C64]) -> C64 {
    let (a, b) = (x[0].re, x[1].re);
    if a <= 0.0 || b <= 0.0 {
        return ZERO;
    }
    C64::from(1.0 / a + 1.0 / b - 1.0 / a.max(b))
}

/// `−ρ₁ρ₂ e^{−ρ₁−ρ₂}`.
pub fn ground_state_source(x: &[C64]) -> C64 {
    -(x[0] * x[1]) * (-(x[0] + x[1])).exp()
}

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

impl Preset {
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_toml(self.toml)
    }
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "svd-decay-e2",
        description: "k² = 2 − e^{−|x−y|} on the quadrant [0, 10]², M = 200; run `oracle` for the singular values",
        toml: r#"
[problem]
kind = "2d-var"

[grid]
interior_points = 200
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333
layout = "quadrant"

[wavenumber]
background = 2.0
perturbation = "exp-ridge"

[solver]
ranks = [40]

[output]
directory = "out/svd-decay-e2"
cross_section = false
"#,
    },
    Preset {
        name: "svd-decay-e16",
        description: "as svd-decay-e2 at E = 16",
        toml: r#"
[problem]
kind = "2d-var"

[grid]
interior_points = 200
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333
layout = "quadrant"

[wavenumber]
background = 16.0
perturbation = "exp-ridge"

[solver]
ranks = [40]

[output]
directory = "out/svd-decay-e16"
cross_section = false
"#,
    },
    Preset {
        name: "var2d",
        description: "k² = 2 + e^{−x²−y²}, f = −e^{−x²−y²} on [−10, 10]², M = 200, rank 12",
        toml: r#"
[problem]
kind = "2d-var"

[grid]
interior_points = 200
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333

[wavenumber]
background = 2.0

[solver]
ranks = [12]
tol = 1e-5

[output]
directory = "out/var2d"
"#,
    },
    Preset {
        name: "const2d",
        description: "k² = 2, f = −e^{−x²−y²} on [−10, 10]², M = 200, rank 12",
        toml: r#"
[problem]
kind = "2d-const"

[grid]
interior_points = 200
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333

[wavenumber]
background = 2.0

[solver]
ranks = [12]

[output]
directory = "out/const2d"
"#,
    },
    Preset {
        name: "const3d",
        description: "k² = 4, f = −e^{−|x|²} on [−10, 10]³, M = 24, ranks 16, version 3 (sweep versions 1-3 with `sweep`)",
        toml: r#"
[problem]
kind = "3d-const"

[grid]
interior_points = 24
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333

[wavenumber]
background = 4.0

[solver]
version = 3
ranks = [16]
tol = 1e-10

[output]
directory = "out/const3d"
"#,
    },
    Preset {
        name: "var3d",
        description: "k² = 2 + e^{−|x|²} on [−10, 10]³, M = 24, ranks 8, version 3, exact separable K",
        toml: r#"
[problem]
kind = "3d-var"

[grid]
interior_points = 24
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333

[wavenumber]
background = 2.0

[solver]
version = 3
ranks = [8]
tol = 1e-10

[output]
directory = "out/var3d"
"#,
    },
    Preset {
        name: "var3d-cp",
        description: "as var3d with the perturbation fitted by CP-ALS with 4 terms",
        toml: r#"
[problem]
kind = "3d-var"

[grid]
interior_points = 24
extent = 10.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333

[wavenumber]
background = 2.0
cp_rank = 4

[solver]
version = 3
ranks = [8]
tol = 1e-10

[output]
directory = "out/var3d-cp"
"#,
    },
    Preset {
        name: "temkin-poet",
        description: "s-wave model at energy 1 on the quadrant [0, 20]², M = 200, rank 16",
        toml: r#"
[problem]
kind = "temkin-poet"

[grid]
interior_points = 200
extent = 20.0
rotation_angle = 0.5235987755982988
ecs_fraction = 0.3333333333333333

[wavenumber]
background = 1.0

[solver]
ranks = [16]

[output]
directory = "out/temkin-poet"
"#,
    },
];
