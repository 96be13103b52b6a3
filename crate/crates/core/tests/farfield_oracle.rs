//! Exterior evaluation against a full-grid solve on a larger box.

use std::f64::consts::PI;

use lrwave::farfield::{effective_source, evaluate_exterior, SourceGrid};
use lrwave::grid::{build_symmetric_axis, sample_field, WaveNumberField};
use lrwave::kron_linalg::DEFAULT_FULL_SOLVE_CAP;
use lrwave::solver2d::Helmholtz2D;
use lrwave::C64;

#[test]
fn narrow_gaussian_matches_larger_box_solve() {
    let k0 = 1.0;
    // At k0 = 1 a π/6 layer reflects at the 1e-3 level; π/4 with half the
    // interior width leaves the O(h²) dispersion (~1e-3 at h = 0.05) dominant.
    let ax = build_symmetric_axis(320, 8.0, PI / 4.0, 0.5).unwrap();
    let axes = [&ax, &ax];
    let field = WaveNumberField::constant(&axes, C64::from(k0 * k0));
    let f = sample_field(&axes, |x| -(-(x[0] * x[0] + x[1] * x[1]) / 0.25).exp()).unwrap();
    let p = Helmholtz2D::from_axes(&ax, &ax, &field, &f).unwrap();
    let u = p.full_solve(DEFAULT_FULL_SOLVE_CAP).unwrap();

    let grid = SourceGrid::with_box(&axes, &[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
    let zero = lrwave::tensor::DenseTensor::zeros(f.shape());
    let g = effective_source(&grid, &field, &f, &zero).unwrap();
    let nodes = ax.nodes();
    for (xi, yi) in [(5.0, 1.0), (-4.0, 3.0), (0.0, 6.0)] {
        let i = nodes.iter().position(|z| z.im == 0.0 && (z.re - xi).abs() < 0.6 * ax.step()).unwrap();
        let j = nodes.iter().position(|z| z.im == 0.0 && (z.re - yi).abs() < 0.6 * ax.step()).unwrap();
        let x = [nodes[i].re, nodes[j].re];
        let far = evaluate_exterior(&grid, &g, &x, k0).unwrap();
        let rel = (far - u[(i, j)]).norm() / u[(i, j)].norm();
        println!("x = {x:?}: integral {far:.6e}, grid {:.6e}, rel {rel:.2e}", u[(i, j)]);
        assert!(rel <= 1e-3, "relative difference {rel:.2e} at {x:?}");
    }
}
