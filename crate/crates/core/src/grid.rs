//! Exterior-complex-scaled axes, second-difference matrices and field
//! sampling on tensor grids.

use std::f64::consts::FRAC_PI_2;

use crate::error::{param, Error, Result};
use crate::kron_linalg::Tridiagonal;
use crate::tensor::{CpTensor, DenseTensor};
use crate::{C64, ZERO};

/// Where the absorbing layers go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisLayout {
    /// Interior `(a, b]` with a Dirichlet wall at `a` and complex scaling
    /// beyond `b`. Interior nodes are `a + (j+1)h`, `h = (b−a)/M`.
    Quadrant,
    /// Interior `[a, b]` including both endpoints, `h = (b−a)/(M−1)`, with
    /// complex scaling beyond both ends.
    Symmetric,
}

/// Parameters of one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisParams {
    pub interior_count: usize,
    pub domain_start: f64,
    pub domain_end: f64,
    pub rotation_angle: f64,
    pub ecs_fraction: f64,
    pub layout: AxisLayout,
}

/// One coordinate axis: real interior nodes plus complex-rotated exterior
/// nodes. Node order is left exterior (symmetric layout only), interior,
/// right exterior.
#[derive(Clone, Debug, PartialEq)]
pub struct EcsAxis {
    params: AxisParams,
    nodes: Vec<C64>,
    step: f64,
    exterior_count: usize,
    interior_offset: usize,
    left_wall: C64,
    right_wall: C64,
}

/// `max(1, ⌈fraction·M⌉)`, tolerant to representation error in `fraction`.
pub fn exterior_count(interior_count: usize, fraction: f64) -> usize {
    let raw = fraction * interior_count as f64;
    ((raw - 1e-9).ceil().max(1.0)) as usize
}

impl EcsAxis {
    pub fn new(params: AxisParams) -> Result<Self> {
        let AxisParams { interior_count: m, domain_start: a, domain_end: b, rotation_angle: theta, ecs_fraction, layout } =
            params.clone();
        if m < 2 {
            return Err(param("interior_count", format!("need at least 2 interior nodes, got {m}")));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(param("domain_end", format!("domain [{a}, {b}] is empty or not finite")));
        }
        if !(theta.is_finite() && theta > 0.0 && theta < FRAC_PI_2) {
            return Err(param("rotation_angle", format!("{theta} is outside (0, π/2)")));
        }
        if !(ecs_fraction.is_finite() && ecs_fraction >= 0.0) {
            return Err(param("ecs_fraction", format!("{ecs_fraction} must be finite and nonnegative")));
        }
        let e = exterior_count(m, ecs_fraction);
        let ray = C64::from_polar(1.0, theta);
        let (step, interior): (f64, Vec<f64>) = match layout {
            AxisLayout::Quadrant => {
                let h = (b - a) / m as f64;
                (h, (0..m).map(|j| if j + 1 == m { b } else { a + (j + 1) as f64 * h }).collect())
            }
            AxisLayout::Symmetric => {
                let h = (b - a) / (m - 1) as f64;
                (h, (0..m).map(|j| if j + 1 == m { b } else { a + j as f64 * h }).collect())
            }
        };
        let mut nodes = Vec::with_capacity(m + 2 * e);
        let (offset, left_wall) = match layout {
            AxisLayout::Quadrant => (0, C64::from(a)),
            AxisLayout::Symmetric => {
                for t in (1..=e).rev() {
                    nodes.push(a - ray * (t as f64 * step));
                }
                (e, a - ray * ((e + 1) as f64 * step))
            }
        };
        nodes.extend(interior.iter().map(|&x| C64::from(x)));
        for t in 1..=e {
            nodes.push(b + ray * (t as f64 * step));
        }
        let right_wall = b + ray * ((e + 1) as f64 * step);
        Ok(Self { params, nodes, step, exterior_count: e, interior_offset: offset, left_wall, right_wall })
    }

    pub fn params(&self) -> &AxisParams {
        &self.params
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interior_count(&self) -> usize {
        self.params.interior_count
    }

    /// Interior spacing `h`; exterior steps have the same modulus.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn rotation_angle(&self) -> f64 {
        self.params.rotation_angle
    }

    /// Coordinate `b` where the right rotation starts.
    pub fn ecs_start(&self) -> f64 {
        self.params.domain_end
    }

    pub fn domain_start(&self) -> f64 {
        self.params.domain_start
    }

    /// Exterior nodes per scaled side.
    pub fn exterior_count(&self) -> usize {
        self.exterior_count
    }

    pub fn layout(&self) -> AxisLayout {
        self.params.layout
    }

    /// Index range of the real interior nodes.
    pub fn interior_range(&self) -> std::ops::Range<usize> {
        self.interior_offset..self.interior_offset + self.params.interior_count
    }

    /// Whether node `i` lies strictly inside the real support interval.
    pub fn in_open_support(&self, i: usize) -> bool {
        let z = self.nodes[i];
        self.interior_range().contains(&i) && z.re > self.params.domain_start && z.re < self.params.domain_end
    }

    /// Contour end points carrying the homogeneous Dirichlet condition.
    pub fn walls(&self) -> (C64, C64) {
        (self.left_wall, self.right_wall)
    }
}

/// Quadrant axis on `[0, b]` with a Dirichlet wall at the origin.
pub fn build_ecs_axis(interior_count: usize, domain_end: f64, rotation_angle: f64, ecs_fraction: f64) -> Result<EcsAxis> {
    EcsAxis::new(AxisParams {
        interior_count,
        domain_start: 0.0,
        domain_end,
        rotation_angle,
        ecs_fraction,
        layout: AxisLayout::Quadrant,
    })
}

/// Symmetric axis on `[−L, L]` scaled at both ends.
pub fn build_symmetric_axis(interior_count: usize, half_width: f64, rotation_angle: f64, ecs_fraction: f64) -> Result<EcsAxis> {
    EcsAxis::new(AxisParams {
        interior_count,
        domain_start: -half_width,
        domain_end: half_width,
        rotation_angle,
        ecs_fraction,
        layout: AxisLayout::Symmetric,
    })
}

/// Three-point second difference on the complex contour, with the wall
/// values outside the grid taken as zero.
pub fn second_derivative(axis: &EcsAxis) -> Tridiagonal {
    let n = axis.len();
    let (lw, rw) = axis.walls();
    let z = |j: isize| -> C64 {
        if j < 0 {
            lw
        } else if j as usize >= n {
            rw
        } else {
            axis.nodes[j as usize]
        }
    };
    let mut lower = Vec::with_capacity(n - 1);
    let mut diag = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n - 1);
    for j in 0..n as isize {
        let hl = z(j) - z(j - 1);
        let hr = z(j + 1) - z(j);
        let s = hl + hr;
        if j > 0 {
            lower.push(2.0 / (hl * s));
        }
        diag.push(-2.0 / (hl * hr));
        if (j as usize) + 1 < n {
            upper.push(2.0 / (hr * s));
        }
    }
    Tridiagonal::new(lower, diag, upper).expect("band lengths are consistent")
}

/// Samples `f` at every node tuple of the tensor grid spanned by `axes`.
pub fn sample_field(axes: &[&EcsAxis], f: impl Fn(&[C64]) -> C64) -> Result<DenseTensor> {
    if !(2..=3).contains(&axes.len()) {
        return Err(param("axes", format!("grids of dimension 2 or 3 are supported, got {}", axes.len())));
    }
    let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let mut bad: Option<Vec<usize>> = None;
    let mut coords = vec![ZERO; axes.len()];
    let t = DenseTensor::from_fn(&shape, |idx| {
        for (k, &i) in idx.iter().enumerate() {
            coords[k] = axes[k].nodes[i];
        }
        let v = f(&coords);
        if !(v.re.is_finite() && v.im.is_finite()) && bad.is_none() {
            bad = Some(idx.to_vec());
        }
        v
    });
    match bad {
        Some(index) => Err(Error::Sampling { index }),
        None => Ok(t),
    }
}

/// Like [`sample_field`], but exactly zero at every node where any coordinate
/// lies outside the open support interval of its axis.
pub fn sample_supported(axes: &[&EcsAxis], f: impl Fn(&[C64]) -> C64) -> Result<DenseTensor> {
    let inside = |idx: &[usize]| idx.iter().enumerate().all(|(k, &i)| axes[k].in_open_support(i));
    let mut t = sample_field(axes, |x| {
        // Keep the exterior from ever evaluating f (it may blow up there).
        if x.iter().any(|z| z.im != 0.0) {
            ZERO
        } else {
            f(x)
        }
    })?;
    let shape = t.shape().to_vec();
    let mut idx = vec![0usize; shape.len()];
    for v in t.data_mut().iter_mut() {
        if !inside(&idx) {
            *v = ZERO;
        }
        for (k, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < shape[k] {
                break;
            }
            *i = 0;
        }
    }
    Ok(t)
}

/// Exact CP form of `k0² + amplitude·Π g(xₘ)` with the product zeroed outside
/// the open support, i.e. the field built by
/// [`WaveNumberField::from_perturbation`] from a separable perturbation.
pub fn separable_perturbation_cp(axes: &[&EcsAxis], k0_sq: C64, amplitude: C64, g: impl Fn(C64) -> C64) -> Result<CpTensor> {
    let ones: Vec<Vec<C64>> = axes.iter().map(|a| vec![C64::from(1.0); a.len()]).collect();
    let bumps: Vec<Vec<C64>> = axes
        .iter()
        .map(|a| (0..a.len()).map(|i| if a.in_open_support(i) { g(a.nodes()[i]) } else { ZERO }).collect())
        .collect();
    CpTensor::from_terms(&[(k0_sq, ones), (amplitude, bumps)])
}

/// Wave-number field `k² = k0²(1 + χ)` with `χ` supported inside the real box.
#[derive(Clone, Debug)]
pub struct WaveNumberField {
    pub constant_part: C64,
    pub variation: DenseTensor,
    pub support_bound: f64,
}

impl WaveNumberField {
    /// Builds the field from the absolute perturbation `k0²·χ`.
    pub fn from_perturbation(axes: &[&EcsAxis], k0_sq: C64, perturbation: impl Fn(&[C64]) -> C64) -> Result<Self> {
        if k0_sq == ZERO {
            return Err(param("k0_sq", "background wave number must be nonzero"));
        }
        let p = sample_supported(axes, perturbation)?;
        Ok(Self { constant_part: k0_sq, variation: p.scale(1.0 / k0_sq), support_bound: axes[0].ecs_start() })
    }

    pub fn constant(axes: &[&EcsAxis], k0_sq: C64) -> Self {
        let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        Self { constant_part: k0_sq, variation: DenseTensor::zeros(&shape), support_bound: axes[0].ecs_start() }
    }

    pub fn is_constant(&self) -> bool {
        self.variation.data().iter().all(|v| *v == ZERO)
    }

    /// Grid samples of `k²`.
    pub fn k_squared(&self) -> DenseTensor {
        let c = self.constant_part;
        self.variation.map(|chi| c * (1.0 + chi))
    }

    /// Real background wave number `k0` (principal root).
    pub fn k0(&self) -> C64 {
        self.constant_part.sqrt()
    }
}

/// Named analytic fields, continued onto the complex contour.
pub mod catalog {
    use crate::C64;

    /// `e^{−Σ xᵢ²}`.
    pub fn gaussian(x: &[C64]) -> C64 {
        (-x.iter().map(|z| z * z).sum::<C64>()).exp()
    }

    /// `−e^{−Σ xᵢ²}`, the standard source.
    pub fn neg_gaussian(x: &[C64]) -> C64 {
        -gaussian(x)
    }

    /// `e^{−|x−y|}` with `|·|` continued as `sqrt((x−y)²)`.
    pub fn exp_ridge(x: &[C64]) -> C64 {
        let d = x[0] - x[1];
        (-(d * d).sqrt()).exp()
    }
}
