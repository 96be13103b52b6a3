//! Scattered wave outside the computational box and angular cross sections.
//!
//! Rewriting `−Δu − k0²(1 + χ)u = f` as `(−Δ − k0²)u = f + k0²χu` gives a
//! source `g` supported in the real box, so `u(x) = ∫ G(x, y) g(y) dy` with
//! the free outgoing Green's function. Quadrant layouts add mirror images so
//! that `u` vanishes on the Dirichlet axes.

use std::f64::consts::PI;

use crate::error::{param, Error, Result};
use crate::grid::{AxisLayout, EcsAxis, WaveNumberField};
use crate::special::{green_2d, green_3d};
use crate::tensor::DenseTensor;
use crate::{C64, ZERO};

/// Real quadrature nodes carrying the source, one list per axis, with the
/// closed box they live in.
#[derive(Clone, Debug)]
pub struct SourceGrid {
    pub nodes: Vec<Vec<f64>>,
    /// Grid index of each node along its axis.
    pub indices: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Axes whose lower wall is a Dirichlet line through the origin.
    pub mirrored: Vec<bool>,
}

impl SourceGrid {
    /// Nodes in the open support of each axis (the real interior box).
    pub fn from_axes(axes: &[&EcsAxis]) -> Result<Self> {
        let bounds: Vec<(f64, f64)> = axes.iter().map(|a| (a.domain_start(), a.ecs_start())).collect();
        Self::with_box(axes, &bounds)
    }

    /// Nodes strictly inside a sub-box `(lo, hi)` per axis.
    pub fn with_box(axes: &[&EcsAxis], bounds: &[(f64, f64)]) -> Result<Self> {
        if axes.len() != bounds.len() || !(2..=3).contains(&axes.len()) {
            return Err(Error::Shape(format!("{} axes with {} bounds", axes.len(), bounds.len())));
        }
        let mut g = Self { nodes: vec![], indices: vec![], weights: vec![], lower: vec![], upper: vec![], mirrored: vec![] };
        for (a, &(lo, hi)) in axes.iter().zip(bounds) {
            if !(lo < hi) || lo < a.domain_start() || hi > a.ecs_start() {
                return Err(param("bounds", format!("({lo}, {hi}) is not inside the real box of an axis")));
            }
            let idx: Vec<usize> = (0..a.len()).filter(|&i| a.in_open_support(i) && a.nodes()[i].re > lo && a.nodes()[i].re < hi).collect();
            g.nodes.push(idx.iter().map(|&i| a.nodes()[i].re).collect());
            g.weights.push(vec![a.step(); idx.len()]);
            g.indices.push(idx);
            g.lower.push(lo);
            g.upper.push(hi);
            g.mirrored.push(a.layout() == AxisLayout::Quadrant);
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(m, &v)| v >= self.lower[m] && v <= self.upper[m])
    }
}

/// `g = f + k0²·χ·u` on the source grid nodes; zero elsewhere.
pub fn effective_source(grid: &SourceGrid, field: &WaveNumberField, f: &DenseTensor, u: &DenseTensor) -> Result<DenseTensor> {
    if f.shape() != u.shape() || f.shape() != field.variation.shape() || f.order() != grid.dim() {
        return Err(Error::Shape(format!(
            "source {:?}, solution {:?} and field {:?} disagree",
            f.shape(),
            u.shape(),
            field.variation.shape()
        )));
    }
    let k0_sq = field.constant_part;
    let mut g = DenseTensor::zeros(f.shape());
    for_each_node(grid, |idx, _, _| {
        let v = f.get(idx) + k0_sq * field.variation.get(idx) * u.get(idx);
        g.set(idx, v);
    });
    Ok(g)
}

/// Visits every source node with its grid index, coordinates and weight.
fn for_each_node(grid: &SourceGrid, mut visit: impl FnMut(&[usize], &[f64], f64)) {
    let d = grid.dim();
    let counts: Vec<usize> = grid.nodes.iter().map(|n| n.len()).collect();
    if counts.iter().any(|&c| c == 0) {
        return;
    }
    let mut pos = vec![0usize; d];
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for m in 0..d {
            idx[m] = grid.indices[m][pos[m]];
            x[m] = grid.nodes[m][pos[m]];
            w *= grid.weights[m][pos[m]];
        }
        visit(&idx, &x, w);
        let mut m = 0;
        loop {
            pos[m] += 1;
            if pos[m] < counts[m] {
                break;
            }
            pos[m] = 0;
            m += 1;
            if m == d {
                return;
            }
        }
    }
}

/// Green's function with mirror images across the mirrored axes.
fn green_with_images(grid: &SourceGrid, k0: f64, x: &[f64], y: &[f64]) -> C64 {
    let d = grid.dim();
    let mirrored: Vec<usize> = (0..d).filter(|&m| grid.mirrored[m]).collect();
    let mut total = ZERO;
    for mask in 0..(1usize << mirrored.len()) {
        let mut r2 = 0.0;
        let mut sign = 1.0;
        for m in 0..d {
            let flip = mirrored.iter().position(|&q| q == m).is_some_and(|b| mask >> b & 1 == 1);
            let ym = if flip { -y[m] } else { y[m] };
            if flip {
                sign = -sign;
            }
            r2 += (x[m] - ym).powi(2);
        }
        let r = r2.sqrt();
        total += sign * if d == 2 { green_2d(k0, r) } else { green_3d(k0, r) };
    }
    total
}

/// `u(x) = Σ w·G(x, y)·g(y)` over the source grid, for `x` outside its box.
pub fn evaluate_exterior(grid: &SourceGrid, g: &DenseTensor, x: &[f64], k0: f64) -> Result<C64> {
    if x.len() != grid.dim() {
        return Err(Error::Shape(format!("{}D point for a {}D source", x.len(), grid.dim())));
    }
    if !(k0 > 0.0) {
        return Err(param("k0", "background wave number must be real and positive"));
    }
    if grid.contains(x) {
        return Err(Error::Domain(format!("evaluation point {x:?} lies inside the source box")));
    }
    let mut sum = ZERO;
    for_each_node(grid, |idx, y, w| {
        let gy = g.get(idx);
        if gy != ZERO {
            sum += gy * w * green_with_images(grid, k0, x, y);
        }
    });
    Ok(sum)
}

/// Far-field amplitudes `A(α) = u(ρ cos α, ρ sin α)·√ρ·e^{−i k0 ρ}` in 2D.
pub fn far_amplitudes(grid: &SourceGrid, g: &DenseTensor, k0: f64, angles: &[f64], rho: f64) -> Result<Vec<C64>> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported("cross sections are computed for 2D problems only".into()));
    }
    let phase = C64::new(0.0, -k0 * rho).exp() * rho.sqrt();
    angles
        .iter()
        .map(|&a| {
            if !(a > 0.0 && a < PI / 2.0) {
                return Err(param("angles", format!("{a} is outside (0, π/2)")));
            }
            Ok(evaluate_exterior(grid, g, &[rho * a.cos(), rho * a.sin()], k0)? * phase)
        })
        .collect()
}

/// Relative cross section `|A(α)|²`, normalized to unit maximum (all zeros
/// when the amplitude vanishes).
pub fn cross_section(grid: &SourceGrid, g: &DenseTensor, k0: f64, angles: &[f64], rho: f64) -> Result<Vec<f64>> {
    let amp = far_amplitudes(grid, g, k0, angles, rho)?;
    let s: Vec<f64> = amp.iter().map(|a| a.norm_sqr()).collect();
    let max = s.iter().cloned().fold(0.0, f64::max);
    Ok(if max > 0.0 { s.iter().map(|v| v / max).collect() } else { s })
}

/// `n` equally spaced angles strictly inside `(0, π/2)`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| PI / 2.0 * i as f64 / (n + 1) as f64).collect()
}
