//! Alternating low-rank solver for the 2D problem
//! `−Dxx A − A Dyyᵀ − K∘A = F`, with `A ≈ U Rᴴ Vᴴ`.
//!
//! Each half-step fixes one orthonormal factor and solves the Galerkin system
//! for the other. The reduced systems are assembled in interleaved ordering
//! (rank index fastest), which makes them banded with bandwidth `r`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{second_derivative, EcsAxis, WaveNumberField};
use crate::kron_linalg::{
    full_solve, matmul, matmul_adj, thin_qr, unvec, vec, BandedMatrix, Factor, KronSumOperator, Tridiagonal,
};
use crate::report::{stagnated, SolveReport, StopReason, PHASE_FACTOR, PHASE_QR, PHASE_RESIDUAL};
use crate::rng::random_orthonormal;
use crate::tensor::{CpTensor, DenseTensor};
use crate::{CMat, CVec, ONE};

/// Discretized 2D Helmholtz problem.
#[derive(Clone, Debug)]
pub struct Helmholtz2D {
    pub dxx: Tridiagonal,
    pub dyy: Tridiagonal,
    /// Grid samples of `k²`.
    pub k: CMat,
    pub f: CMat,
    /// Optional separable form of `k`, used to build the coupling blocks.
    pub separable_k: Option<CpTensor>,
}

impl Helmholtz2D {
    pub fn new(dxx: Tridiagonal, dyy: Tridiagonal, k: CMat, f: CMat) -> Result<Self> {
        let shape = (dxx.dim(), dyy.dim());
        if k.shape() != shape || f.shape() != shape {
            return Err(Error::Shape(format!(
                "grid is {}x{} but K is {:?} and F is {:?}",
                shape.0,
                shape.1,
                k.shape(),
                f.shape()
            )));
        }
        Ok(Self { dxx, dyy, k, f, separable_k: None })
    }

    /// Problem on the tensor grid of two axes.
    pub fn from_axes(ax: &EcsAxis, ay: &EcsAxis, field: &WaveNumberField, f: &DenseTensor) -> Result<Self> {
        Self::new(second_derivative(ax), second_derivative(ay), field.k_squared().to_matrix()?, f.to_matrix()?)
    }

    /// Attaches a separable form of `K`; it must reproduce the dense samples.
    pub fn with_separable_k(mut self, cp: CpTensor) -> Result<Self> {
        if cp.factors.len() != 2 || cp.dims() != [self.n(), self.m()] {
            return Err(Error::Shape("separable K must be an order-2 CP of the grid shape".into()));
        }
        let dense = cp.to_dense().to_matrix()?;
        let err = (&dense - &self.k).norm() / self.k.norm().max(f64::MIN_POSITIVE);
        if err > 1e-10 {
            return Err(Error::Shape(format!("separable K deviates from the samples by {err:.2e}")));
        }
        self.separable_k = Some(cp);
        Ok(self)
    }

    /// Rows (x extent).
    pub fn n(&self) -> usize {
        self.dxx.dim()
    }

    /// Columns (y extent).
    pub fn m(&self) -> usize {
        self.dyy.dim()
    }

    /// `L(A) = −Dxx A − A Dyyᵀ − K∘A`.
    pub fn apply(&self, a: &CMat) -> CMat {
        -(self.dxx.mul_left(a) + self.dyy.mul_right_transpose(a) + self.k.component_mul(a))
    }

    /// The same operator as a Kronecker sum acting on `vec(A)`.
    pub fn operator(&self) -> KronSumOperator {
        let (n, m) = (self.n(), self.m());
        let mut op = KronSumOperator::new(vec![n, m]);
        op.add_term(-ONE, vec![Factor::Tridiagonal(self.dxx.clone()), Factor::Identity(m)]).expect("shapes");
        op.add_term(-ONE, vec![Factor::Identity(n), Factor::Tridiagonal(self.dyy.clone())]).expect("shapes");
        op.add_diagonal(&(-vec(&self.k))).expect("shapes");
        op
    }

    /// Full-grid reference solution.
    pub fn full_solve(&self, cap: usize) -> Result<CMat> {
        let x = full_solve(&self.operator(), &vec(&self.f), cap)?;
        unvec(&x, self.n(), self.m())
    }
}

/// Low-rank wave `A = U Rᴴ Vᴴ`.
#[derive(Clone, Debug)]
pub struct LowRankWave2D {
    pub u: CMat,
    pub v: CMat,
    pub r: CMat,
}

impl LowRankWave2D {
    pub fn zero(n: usize, m: usize, rank: usize) -> Self {
        Self { u: CMat::zeros(n, rank), v: CMat::zeros(m, rank), r: CMat::zeros(rank, rank) }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> CMat {
        matmul(&matmul(&self.u, &self.r.adjoint()), &self.v.adjoint())
    }
}

// ---------------------------------------------------------------------------
// Reduced systems

/// `K·P` for a matrix `P`, from the separable form when present.
fn k_times(p: &Helmholtz2D, w: &CMat) -> CMat {
    match &p.separable_k {
        Some(cp) => {
            let (x, y) = (&cp.factors[0], &cp.factors[1]);
            let mut t = matmul(&y.transpose(), w);
            for (s, mut row) in t.row_iter_mut().enumerate() {
                row *= cp.weights[s];
            }
            matmul(x, &t)
        }
        None => matmul(&p.k, w),
    }
}

/// `Pᵀ·K` for a matrix `P`.
fn k_left(p: &Helmholtz2D, w: &CMat) -> CMat {
    match &p.separable_k {
        Some(cp) => {
            let (x, y) = (&cp.factors[0], &cp.factors[1]);
            let mut t = matmul(&w.transpose(), x);
            for (s, mut col) in t.column_iter_mut().enumerate() {
                col *= cp.weights[s];
            }
            matmul(&t, &y.transpose())
        }
        None => matmul(&w.transpose(), &p.k),
    }
}

/// Pairwise products `W(:, a + r·b) = X(:, a) ∘ Y(:, b)`.
fn pair_products(x: &CMat, y: &CMat) -> CMat {
    let (n, r) = x.shape();
    let mut w = CMat::zeros(n, r * r);
    for b in 0..r {
        for a in 0..r {
            w.column_mut(a + r * b).copy_from(&x.column(a).component_mul(&y.column(b)));
        }
    }
    w
}

fn check_basis(name: &'static str, basis: &CMat, n: usize) -> Result<()> {
    if basis.nrows() != n {
        return Err(Error::Shape(format!("{name} has {} rows, grid needs {n}", basis.nrows())));
    }
    Ok(())
}

/// Reduced operator for `U` given `V`, in ordering `a + r·i`:
/// `(Vᵀ ⊗ I) L (V̄ ⊗ I)`.
pub fn u_system(p: &Helmholtz2D, v: &CMat) -> Result<BandedMatrix> {
    let (n, m) = (p.n(), p.m());
    check_basis("V", v, m)?;
    let r = v.ncols();
    // X(a, b) = (Vᴴ Ayᵀ V)(b, a) with Ay = −Dyy.
    let ay_t_v = p.dyy.transpose().mul_left(v).map(|z| -z);
    let x = matmul_adj(v, &ay_t_v).transpose();
    let kb = k_times(p, &pair_products(v, &v.map(|z| z.conj())));
    let mut sys = BandedMatrix::zeros(n * r, r, r);
    for i in 0..n {
        for a in 0..r {
            let row = a + r * i;
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                sys.add(row, a + r * j, -p.dxx.get(i, j))?;
            }
            for b in 0..r {
                sys.add(row, b + r * i, x[(a, b)] - kb[(i, a + r * b)])?;
            }
        }
    }
    Ok(sys)
}

/// Reduced operator for `Z = Vᴴ` given `U`, in ordering `a + r·j`:
/// `(I ⊗ Uᴴ) L (I ⊗ U)`.
pub fn v_system(p: &Helmholtz2D, u: &CMat) -> Result<BandedMatrix> {
    let (n, m) = (p.n(), p.m());
    check_basis("U", u, n)?;
    let r = u.ncols();
    let ax_u = p.dxx.mul_left(u).map(|z| -z);
    let y = matmul_adj(u, &ax_u);
    let kb = k_left(p, &pair_products(&u.map(|z| z.conj()), u));
    let mut sys = BandedMatrix::zeros(m * r, r, r);
    for j in 0..m {
        for a in 0..r {
            let row = a + r * j;
            for l in j.saturating_sub(1)..(j + 2).min(m) {
                sys.add(row, a + r * l, -p.dyy.get(j, l))?;
            }
            for b in 0..r {
                sys.add(row, b + r * j, y[(a, b)] - kb[(a + r * b, j)])?;
            }
        }
    }
    Ok(sys)
}

fn solve_system(sys: BandedMatrix, rhs: CVec, context: impl Fn() -> String) -> Result<CVec> {
    let lu = sys.factor().map_err(|e| match e {
        Error::Singular { pivot, .. } => Error::Singular { context: context(), pivot },
        other => other,
    })?;
    lu.solve(&rhs)
}

/// Solves for `U` with `V` fixed, for an arbitrary projected right-hand side
/// `G` (`n×r`, normally `F V`).
fn solve_u_rhs(p: &Helmholtz2D, v: &CMat, g: &CMat) -> Result<CMat> {
    let (n, r) = (p.n(), v.ncols());
    if r == 0 {
        return Ok(CMat::zeros(n, 0));
    }
    let sys = u_system(p, v)?;
    let rhs = vec(&g.transpose());
    let x = solve_system(sys, rhs, || format!("U-solve at rank {r}"))?;
    Ok(unvec(&x, r, n)?.transpose())
}

/// Solves for `Z = Vᴴ` with `U` fixed and projected right-hand side `G`
/// (`r×m`, normally `Uᴴ F`).
fn solve_z_rhs(p: &Helmholtz2D, u: &CMat, g: &CMat) -> Result<CMat> {
    let (m, r) = (p.m(), u.ncols());
    if r == 0 {
        return Ok(CMat::zeros(0, m));
    }
    let sys = v_system(p, u)?;
    let x = solve_system(sys, vec(g), || format!("V-solve at rank {r}"))?;
    unvec(&x, r, m)
}

/// Galerkin solve for `U` given orthonormal `V`.
pub fn solve_for_u(p: &Helmholtz2D, v: &CMat) -> Result<CMat> {
    check_basis("V", v, p.m())?;
    solve_u_rhs(p, v, &matmul(&p.f, v))
}

/// Galerkin solve for `V` given orthonormal `U`; returns `V` with
/// `A = U Vᴴ`.
pub fn solve_for_v(p: &Helmholtz2D, u: &CMat) -> Result<CMat> {
    check_basis("U", u, p.n())?;
    Ok(solve_z_rhs(p, u, &matmul_adj(u, &p.f))?.adjoint())
}

/// Residual `R = F − L(A)` and its Frobenius norm.
pub fn residual(p: &Helmholtz2D, wave: &LowRankWave2D) -> (CMat, f64) {
    let a = wave.to_dense();
    let r = &p.f - p.apply(&a);
    let nrm = r.norm();
    (r, nrm)
}

/// `‖F − L(A)‖ / ‖F‖`, with `0/0` read as 0.
pub fn relative_residual(p: &Helmholtz2D, wave: &LowRankWave2D) -> f64 {
    let (_, r) = residual(p, wave);
    let f = p.f.norm();
    if r == 0.0 {
        0.0
    } else {
        r / f
    }
}

/// Which factor a projector keeps fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `P_U`: column basis `U` fixed (the V-solve).
    Left,
    /// `P_V`: row basis `V` fixed (the U-solve).
    Right,
}

/// Applies `P_V = I − L(V̄⊗I)[(Vᵀ⊗I)L(V̄⊗I)]⁻¹(Vᵀ⊗I)` (side `Right`) or
/// `P_U = I − L(I⊗U)[(I⊗Uᴴ)L(I⊗U)]⁻¹(I⊗Uᴴ)` (side `Left`) to `x`.
pub fn projector_apply(p: &Helmholtz2D, side: Side, basis: &CMat, x: &CVec) -> Result<CVec> {
    let (n, m) = (p.n(), p.m());
    if x.len() != n * m {
        return Err(Error::Shape(format!("vector of length {} for a {n}x{m} grid", x.len())));
    }
    if basis.ncols() == 0 {
        return Ok(x.clone());
    }
    let xm = unvec(x, n, m)?;
    let lifted = match side {
        Side::Right => {
            check_basis("V", basis, m)?;
            let u = solve_u_rhs(p, basis, &matmul(&xm, basis))?;
            matmul(&u, &basis.adjoint())
        }
        Side::Left => {
            check_basis("U", basis, n)?;
            let z = solve_z_rhs(p, basis, &matmul_adj(basis, &xm))?;
            matmul(basis, &z)
        }
    };
    Ok(x - p.operator().apply(&vec(&lifted))?)
}

// ---------------------------------------------------------------------------
// Alternating iteration

/// Stopping controls for [`alternate`].
#[derive(Clone, Debug)]
pub struct AlternateOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Stop when the residual changes by less than `stagnation_tol` (relative)
    /// over `stagnation_window` iterations. Zero window disables the rule.
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
}

impl Default for AlternateOptions {
    fn default() -> Self {
        Self { max_iters: 10, tol: 1e-6, stagnation_window: 3, stagnation_tol: 1e-3 }
    }
}

/// Seeded random orthonormal starting basis.
pub fn random_initial_v(m: usize, r: usize, seed: u64) -> CMat {
    random_orthonormal(m, r, seed)
}

/// Leading right singular vectors of `F` as a starting basis.
pub fn svd_initial_v(p: &Helmholtz2D, r: usize) -> Result<CMat> {
    crate::tensor::leading_left_singular(&p.f.adjoint(), r)
}

/// Alternating solve (QR of `V`, then repeated U-solve, QR, V-solve, QR).
pub fn alternate(
    p: &Helmholtz2D,
    r: usize,
    initial_v: &CMat,
    opts: &AlternateOptions,
) -> Result<(LowRankWave2D, SolveReport)> {
    alternate_with(p, r, initial_v, opts, |_, _| {})
}

/// [`alternate`] with a callback receiving each iterate.
pub fn alternate_with(
    p: &Helmholtz2D,
    r: usize,
    initial_v: &CMat,
    opts: &AlternateOptions,
    mut observe: impl FnMut(usize, &LowRankWave2D),
) -> Result<(LowRankWave2D, SolveReport)> {
    let (n, m) = (p.n(), p.m());
    if r == 0 || r > n.min(m) {
        return Err(crate::error::param("r", format!("rank {r} outside 1..={}", n.min(m))));
    }
    if !(opts.tol > 0.0) {
        return Err(crate::error::param("tol", "tolerance must be positive"));
    }
    if initial_v.shape() != (m, r) {
        return Err(Error::Shape(format!("initial V is {:?}, expected ({m}, {r})", initial_v.shape())));
    }
    let mut report = SolveReport::new(vec![r]);
    let mut v = report.time(PHASE_QR, || thin_qr(initial_v))?.q;
    let mut wave = LowRankWave2D::zero(n, m, r);
    for iter in 1..=opts.max_iters {
        let u = report.time(PHASE_FACTOR, || solve_for_u(p, &v)).map_err(|e| tag_iter(e, iter))?;
        let u = report.time(PHASE_QR, || thin_qr(&u))?.q;
        let vz = report.time(PHASE_FACTOR, || solve_for_v(p, &u)).map_err(|e| tag_iter(e, iter))?;
        let qr = report.time(PHASE_QR, || thin_qr(&vz))?;
        v = qr.q.clone();
        wave = LowRankWave2D { u, v: qr.q, r: qr.r };
        let t0 = Instant::now();
        let res = relative_residual(p, &wave);
        report.add_time(PHASE_RESIDUAL, t0.elapsed().as_secs_f64());
        report.residual_history.push(res);
        observe(iter, &wave);
        if res <= opts.tol {
            report.converged = true;
            report.stop_reason = StopReason::Converged;
            break;
        }
        if opts.stagnation_window > 0 && stagnated(&report.residual_history, opts.stagnation_window, opts.stagnation_tol) {
            report.stop_reason = StopReason::Stagnated;
            break;
        }
    }
    Ok((wave, report))
}

fn tag_iter(e: Error, iter: usize) -> Error {
    match e {
        Error::Singular { context, pivot } => Error::Singular { context: format!("{context}, iteration {iter}"), pivot },
        other => other,
    }
}

/// Symmetric part diagnostic `‖A − Aᵀ‖ / ‖A‖`.
pub fn asymmetry(a: &CMat) -> f64 {
    (a - a.transpose()).norm() / a.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{C64, ZERO};
    use crate::kron_linalg::{kron, DEFAULT_FULL_SOLVE_CAP};
    use crate::rng::{random_cmat, random_cvec};

    fn small_problem(n: usize, seed: u64) -> Helmholtz2D {
        let ax = crate::grid::build_symmetric_axis(n - 2 * ((n as f64 / 5.0).ceil() as usize).max(1), 3.0, 0.5, 0.2).unwrap();
        let n = ax.len();
        let d = second_derivative(&ax);
        let k = CMat::from_fn(n, n, |i, j| C64::new(2.0 + 0.3 * ((i * 7 + j * 3) % 5) as f64 / 5.0, 0.0));
        let f = random_cmat(n, n, seed);
        Helmholtz2D::new(d.clone(), d, k, f).unwrap()
    }

    #[test]
    fn operator_matches_matrix_form() {
        let p = small_problem(8, 1);
        let a = random_cmat(p.n(), p.m(), 2);
        let want = vec(&p.apply(&a));
        let got = p.operator().apply(&vec(&a)).unwrap();
        assert!((&got - &want).norm() < 1e-12 * want.norm());
        let dense = p.operator().assemble_dense(4096).unwrap();
        assert!((dense * vec(&a) - want).norm() < 1e-12 * got.norm());
    }

    #[test]
    fn full_rank_u_solve_is_full_solve() {
        let p = small_problem(12, 3);
        let n = p.n();
        let full = p.full_solve(DEFAULT_FULL_SOLVE_CAP).unwrap();
        let u = solve_for_u(&p, &CMat::identity(n, n)).unwrap();
        assert!((&u - &full).norm() < 1e-8 * full.norm());
        let v = solve_for_v(&p, &CMat::identity(n, n)).unwrap();
        assert!((v.adjoint() - &full).norm() < 1e-8 * full.norm());
    }

    #[test]
    fn zero_rhs_gives_zero_factors() {
        let mut p = small_problem(10, 4);
        p.f = CMat::zeros(p.n(), p.m());
        let v = random_orthonormal(p.m(), 3, 5);
        assert_eq!(solve_for_u(&p, &v).unwrap().norm(), 0.0);
        assert_eq!(solve_for_v(&p, &v).unwrap().norm(), 0.0);
        let (wave, rep) = alternate(&p, 3, &v, &AlternateOptions::default()).unwrap();
        assert_eq!(rep.iterations(), 1);
        assert!(rep.converged);
        assert_eq!(rep.residual_history[0], 0.0);
        assert_eq!(wave.to_dense().norm(), 0.0);
    }

    #[test]
    fn sine_basis_decouples_columns() {
        // Real Dirichlet grid: the sine vectors diagonalize Dyy.
        let n = 20;
        let h = 1.0 / (n + 1) as f64;
        let c = |v: f64| C64::from(v);
        let d = Tridiagonal::new(vec![c(1.0 / (h * h)); n - 1], vec![c(-2.0 / (h * h)); n], vec![c(1.0 / (h * h)); n - 1]).unwrap();
        let k0 = 3.0;
        let p = Helmholtz2D::new(d.clone(), d.clone(), CMat::from_element(n, n, c(k0)), random_cmat(n, n, 6)).unwrap();
        let r = 4;
        let s = (2.0 / (n + 1) as f64).sqrt();
        let v = CMat::from_fn(n, r, |j, a| c(s * (std::f64::consts::PI * ((a + 1) * (j + 1)) as f64 * h).sin()));
        let u = solve_for_u(&p, &v).unwrap();
        let fv = &p.f * &v;
        for a in 0..r {
            let lam = -(2.0 / (h * h)) * ((std::f64::consts::PI * (a + 1) as f64 * h).cos() - 1.0);
            let col = d.affine(c(-1.0), c(lam - k0)).solve(&fv.column(a).into_owned()).unwrap();
            assert!((u.column(a) - &col).norm() < 1e-10 * col.norm());
        }
    }

    #[test]
    fn galerkin_annihilation() {
        let p = small_problem(16, 7);
        let v = random_orthonormal(p.m(), 4, 8);
        let u = solve_for_u(&p, &v).unwrap();
        let (r, _) = residual(&p, &LowRankWave2D { u: u.clone(), v: v.clone(), r: CMat::identity(4, 4) });
        assert!((&r * &v).norm() <= 1e-9 * p.f.norm());
        let uq = thin_qr(&u).unwrap().q;
        let vv = solve_for_v(&p, &uq).unwrap();
        let (r, _) = residual(&p, &LowRankWave2D { u: uq.clone(), v: vv, r: CMat::identity(4, 4) });
        assert!((uq.adjoint() * &r).norm() <= 1e-9 * p.f.norm());
    }

    #[test]
    fn separable_k_matches_dense_path() {
        let ax = crate::grid::build_symmetric_axis(14, 4.0, 0.5, 0.2).unwrap();
        let n = ax.len();
        let field = WaveNumberField::from_perturbation(&[&ax, &ax], C64::from(2.0), crate::grid::catalog::gaussian).unwrap();
        let f = crate::grid::sample_field(&[&ax, &ax], crate::grid::catalog::neg_gaussian).unwrap();
        let p = Helmholtz2D::from_axes(&ax, &ax, &field, &f).unwrap();
        let ones = vec![ONE; n];
        let g: Vec<C64> = (0..n).map(|i| if ax.in_open_support(i) { (-(ax.nodes()[i] * ax.nodes()[i])).exp() } else { ZERO }).collect();
        let cp = CpTensor::from_terms(&[(C64::from(2.0), vec![ones.clone(), ones]), (ONE, vec![g.clone(), g])]).unwrap();
        let ps = p.clone().with_separable_k(cp).unwrap();
        let v = random_orthonormal(n, 3, 9);
        let a = solve_for_u(&p, &v).unwrap();
        let b = solve_for_u(&ps, &v).unwrap();
        assert!((&a - &b).norm() < 1e-10 * a.norm());
        let a = solve_for_v(&p, &v).unwrap();
        let b = solve_for_v(&ps, &v).unwrap();
        assert!((&a - &b).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn reduced_systems_match_dense_projection() {
        let p = small_problem(10, 10);
        let (n, r) = (p.n(), 3);
        let v = random_orthonormal(n, r, 11);
        let l = p.operator().assemble_dense(4096).unwrap();
        let vt = kron(&v.transpose(), &CMat::identity(n, n));
        let vb = kron(&v.map(|z| z.conj()), &CMat::identity(n, n));
        let want = &vt * &l * &vb; // ordering i + n·a
        let sys = u_system(&p, &v).unwrap().to_dense(); // ordering a + r·i
        for a in 0..r {
            for i in 0..n {
                for b in 0..r {
                    for j in 0..n {
                        let d = want[(i + n * a, j + n * b)] - sys[(a + r * i, b + r * j)];
                        assert!(d.norm() < 1e-10 * want.norm());
                    }
                }
            }
        }
    }

    #[test]
    fn projectors_are_idempotent() {
        for (n, r) in [(16usize, 2usize), (16, 4)] {
            let p = small_problem(n, 12);
            let nn = p.n();
            let basis = random_orthonormal(nn, r, 13);
            let x = random_cvec(nn * nn, 14);
            for side in [Side::Left, Side::Right] {
                let px = projector_apply(&p, side, &basis, &x).unwrap();
                let ppx = projector_apply(&p, side, &basis, &px).unwrap();
                assert!((&ppx - &px).norm() <= 1e-9 * x.norm(), "{side:?}");
            }
            let empty = CMat::zeros(nn, 0);
            assert_eq!(projector_apply(&p, Side::Right, &empty, &x).unwrap(), x);
        }
    }

    #[test]
    fn residual_identity_after_u_solve() {
        let p = small_problem(16, 15);
        let r = 3;
        let v = random_orthonormal(p.m(), r, 16);
        let u = solve_for_u(&p, &v).unwrap();
        let (res, _) = residual(&p, &LowRankWave2D { u, v: v.clone(), r: CMat::identity(r, r) });
        let pf = projector_apply(&p, Side::Right, &v, &vec(&p.f)).unwrap();
        assert!((vec(&res) - pf).norm() <= 1e-9 * p.f.norm());
    }

    #[test]
    fn exact_solution_has_tiny_residual() {
        let p = small_problem(12, 19);
        let full = p.full_solve(DEFAULT_FULL_SOLVE_CAP).unwrap();
        let n = p.n();
        let wave = LowRankWave2D { u: full, v: CMat::identity(n, n), r: CMat::identity(n, n) };
        let (_, nrm) = residual(&p, &wave);
        assert!(nrm <= 1e-8 * p.f.norm(), "{nrm:.2e}");
    }

    #[test]
    fn zero_wave_residual_is_rhs() {
        let p = small_problem(8, 17);
        let (r, nrm) = residual(&p, &LowRankWave2D::zero(p.n(), p.m(), 2));
        assert_eq!(r, p.f);
        assert!((nrm - p.f.norm()).abs() < 1e-14);
    }

    #[test]
    fn alternate_rejects_bad_input() {
        let p = small_problem(8, 18);
        let v = random_orthonormal(p.m(), 2, 1);
        assert!(alternate(&p, 0, &v, &AlternateOptions::default()).is_err());
        assert!(alternate(&p, 3, &v, &AlternateOptions::default()).is_err());
        assert!(alternate(&p, 2, &v, &AlternateOptions { tol: 0.0, ..Default::default() }).is_err());
    }
}
