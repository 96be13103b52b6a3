//! Tucker-format alternating solvers for the 3D problem
//! `−Dxx ×₁ M − Dyy ×₂ M − Dzz ×₃ M − K∘M = F`.
//!
//! Bases `Wₘ` (see [`TuckerTensor::bases`]) are orthonormal, and the solution
//! is `M = G ×₁ W₁ ×₂ W₂ ×₃ W₃`. For mode `i` the two other modes are called
//! `j < k`, and unfoldings follow the `tensor` module convention, so
//! `M₍ᵢ₎ = Wᵢ G₍ᵢ₎ (W_k ⊗ W_j)ᵀ`.
//!
//! Three sweeps are available:
//! * version 1 solves for `Xᵢ = Wᵢ G₍ᵢ₎` (`nᵢ·r_j·r_k` unknowns) in every mode;
//! * version 2 solves for `Wᵢ Rᵢ` only (`nᵢ·rᵢ` unknowns) after projecting on
//!   the row space of `G₍ᵢ₎`, and solves for the core once at the end;
//! * version 3 uses the version-2 solve on the first two modes of the sweep
//!   and the version-1 solve on the last, which also refreshes the core.

use std::time::Instant;

use nalgebra::linalg::Schur;

use crate::error::{param, Error, Result};
use crate::grid::{second_derivative, EcsAxis, WaveNumberField};
use crate::kron_linalg::{
    full_solve, kron, matmul, matmul_adj, pivoted_qr_basis, thin_qr, unvec, vec, BandedMatrix, BlockTridiagonal,
    DenseLu, Factor, KronSumOperator, Tridiagonal,
};
use crate::report::{stagnated, SolveReport, StopReason, PHASE_CORE, PHASE_FACTOR, PHASE_QR, PHASE_RESIDUAL, PHASE_SETUP};
use crate::rng::{random_cmat, random_orthonormal};
use crate::tensor::{fold, hosvd, ttm, CpTensor, DenseTensor, TuckerTensor};
use crate::{CMat, CVec, C64, ONE, ZERO};

/// Largest core (`r₁r₂r₃`) assembled densely by [`solve_core`] by default.
pub const DEFAULT_CORE_CAP: usize = 4096;
/// Largest grid (`n₁n₂n₃`) for which residuals are materialized by default.
pub const DEFAULT_RESIDUAL_CAP: usize = 8_000_000;

/// Wave number of a 3D problem.
#[derive(Clone, Debug)]
pub enum WaveNumber3D {
    Constant(C64),
    /// Grid samples of `k²` and a CP form of them. The samples define the
    /// operator; the reduced systems are built from the CP form.
    Variable { samples: DenseTensor, cp: CpTensor },
}

/// Discretized 3D Helmholtz problem.
#[derive(Clone, Debug)]
pub struct Helmholtz3D {
    /// Second-difference matrices per axis.
    pub d: [Tridiagonal; 3],
    pub wavenumber: WaveNumber3D,
    pub f: DenseTensor,
}

/// The two modes other than `i`, in increasing order.
fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl Helmholtz3D {
    pub fn new(d: [Tridiagonal; 3], wavenumber: WaveNumber3D, f: DenseTensor) -> Result<Self> {
        let dims = [d[0].dim(), d[1].dim(), d[2].dim()];
        if f.shape() != dims {
            return Err(Error::Shape(format!("F has shape {:?}, grid is {dims:?}", f.shape())));
        }
        if let WaveNumber3D::Variable { samples, cp } = &wavenumber {
            if samples.shape() != dims || cp.dims() != dims {
                return Err(Error::Shape(format!(
                    "wave number samples {:?} / CP {:?} do not match grid {dims:?}",
                    samples.shape(),
                    cp.dims()
                )));
            }
        }
        Ok(Self { d, wavenumber, f })
    }

    /// Problem on a tensor grid. A non-constant field needs its CP form.
    pub fn from_axes(axes: [&EcsAxis; 3], field: &WaveNumberField, cp: Option<CpTensor>, f: DenseTensor) -> Result<Self> {
        let d = [second_derivative(axes[0]), second_derivative(axes[1]), second_derivative(axes[2])];
        let wavenumber = if field.is_constant() {
            WaveNumber3D::Constant(field.constant_part)
        } else {
            let cp = cp.ok_or_else(|| param("cp", "a space-dependent wave number needs a CP form"))?;
            WaveNumber3D::Variable { samples: field.k_squared(), cp }
        };
        Self::new(d, wavenumber, f)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.d[0].dim(), self.d[1].dim(), self.d[2].dim()]
    }

    /// `−Dₘ`, the positive part of the operator along mode `m`.
    fn a(&self, m: usize) -> Tridiagonal {
        self.d[m].affine(-ONE, ZERO)
    }

    /// `L(M)` on a dense tensor.
    pub fn apply(&self, m: &DenseTensor) -> DenseTensor {
        let dims = self.dims();
        let mut out = vec![ZERO; m.len()];
        for (mode, d) in self.d.iter().enumerate() {
            let y = crate::kron_linalg::apply_along_mode(m.data(), &dims, mode, &Factor::Tridiagonal(d.clone()));
            out.iter_mut().zip(y).for_each(|(o, v)| *o -= v);
        }
        match &self.wavenumber {
            WaveNumber3D::Constant(k) => out.iter_mut().zip(m.data()).for_each(|(o, v)| *o -= k * v),
            WaveNumber3D::Variable { samples, .. } => {
                out.iter_mut().zip(m.data()).zip(samples.data()).for_each(|((o, v), k)| *o -= k * v)
            }
        }
        DenseTensor::from_vec(&dims, out).expect("shape preserved")
    }

    /// The operator as a Kronecker sum on `vec(M)`.
    pub fn operator(&self) -> KronSumOperator {
        let dims = self.dims();
        let mut op = KronSumOperator::new(dims.to_vec());
        for m in 0..3 {
            let mut factors: Vec<Factor> = dims.iter().map(|&n| Factor::Identity(n)).collect();
            factors[m] = Factor::Tridiagonal(self.d[m].clone());
            op.add_term(-ONE, factors).expect("shapes");
        }
        let diag = match &self.wavenumber {
            WaveNumber3D::Constant(k) => CVec::from_element(dims.iter().product(), -k),
            WaveNumber3D::Variable { samples, .. } => CVec::from_iterator(samples.len(), samples.data().iter().map(|k| -k)),
        };
        op.add_diagonal(&diag).expect("shapes");
        op
    }

    /// Full-grid reference solution.
    pub fn full_solve(&self, cap: usize) -> Result<DenseTensor> {
        let x = full_solve(&self.operator(), &CVec::from_column_slice(self.f.data()), cap)?;
        DenseTensor::from_vec(&self.dims(), x.as_slice().to_vec())
    }

    fn cp(&self) -> Option<&CpTensor> {
        match &self.wavenumber {
            WaveNumber3D::Constant(_) => None,
            WaveNumber3D::Variable { cp, .. } => Some(cp),
        }
    }
}

// ---------------------------------------------------------------------------
// Small projected pieces

/// `Wᴴ T W` for a tridiagonal `T`.
fn project_tridiagonal(t: &Tridiagonal, w: &CMat) -> CMat {
    matmul_adj(w, &t.mul_left(w))
}

/// `Wᴴ diag(v) W`.
fn project_diagonal(v: &[C64], w: &CMat) -> CMat {
    let mut dw = w.clone();
    for (i, mut row) in dw.row_iter_mut().enumerate() {
        row *= v[i];
    }
    matmul_adj(w, &dw)
}

/// `Y·(P_k ⊗ P_j)ᵀ` for `Y` with `r_j·r_k` columns (column index `a + r_j·b`).
fn right_pair(y: &CMat, pj: &CMat, pk: &CMat) -> CMat {
    let t = DenseTensor::from_vec(&[y.nrows(), pj.ncols(), pk.ncols()], y.as_slice().to_vec()).expect("layout");
    let t = ttm(&ttm(&t, pj, 1).expect("shape"), pk, 2).expect("shape");
    CMat::from_column_slice(y.nrows(), pj.nrows() * pk.nrows(), t.data())
}

/// `(P_k ⊗ P_j)·Y` for `Y` with `r_j·r_k` rows.
fn left_pair(y: &CMat, pj: &CMat, pk: &CMat) -> CMat {
    let t = DenseTensor::from_vec(&[pj.ncols(), pk.ncols(), y.ncols()], y.as_slice().to_vec()).expect("layout");
    let t = ttm(&ttm(&t, pj, 0).expect("shape"), pk, 1).expect("shape");
    CMat::from_column_slice(pj.nrows() * pk.nrows(), y.ncols(), t.data())
}

/// `Qᵀ (P_k ⊗ P_j) Q̄`.
fn compress_pair(q: &CMat, pj: &CMat, pk: &CMat) -> CMat {
    matmul(&q.transpose(), &left_pair(&q.map(|z| z.conj()), pj, pk))
}

/// The K-operator of one mode: `Σₛ σₛ (Π_k,ₛ ⊗ Π_j,ₛ) ⊗ diag(vᵢ,ₛ)` on
/// `vec(Xᵢ)`, where `Πₘ,ₛ = Wₘᴴ diag(vₘ,ₛ) Wₘ`. Acting on `Xᵢ` it is
/// `Σₛ σₛ diag(vᵢ,ₛ) Xᵢ (Π_k,ₛ ⊗ Π_j,ₛ)ᵀ`, the projection of `K∘M`.
#[derive(Clone, Debug)]
pub struct KOperator {
    pub mode: usize,
    pub weights: Vec<C64>,
    /// CP vectors of the free mode.
    pub free: Vec<CVec>,
    /// `(Π_j, Π_k)` per term.
    pub projected: Vec<(CMat, CMat)>,
}

impl KOperator {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    fn sizes(&self) -> (usize, usize, usize) {
        let n = self.free.first().map_or(0, |v| v.len());
        let (rj, rk) = self.projected.first().map_or((0, 0), |(pj, pk)| (pj.nrows(), pk.nrows()));
        (n, rj, rk)
    }

    /// Action on `Xᵢ` (`nᵢ × r_j·r_k`).
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let (n, rj, rk) = self.sizes();
        if self.rank() > 0 && x.shape() != (n, rj * rk) {
            return Err(Error::Shape(format!("K-operator expects {n}x{}, got {:?}", rj * rk, x.shape())));
        }
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for s in 0..self.rank() {
            let mut y = right_pair(x, &self.projected[s].0, &self.projected[s].1);
            for (l, mut row) in y.row_iter_mut().enumerate() {
                row *= self.weights[s] * self.free[s][l];
            }
            out += y;
        }
        Ok(out)
    }

    /// Diagonal block for grid row `l` in interleaved ordering:
    /// `Σₛ σₛ vᵢ,ₛ(l) (Π_k,ₛ ⊗ Π_j,ₛ)`.
    pub fn block(&self, l: usize) -> CMat {
        let (_, rj, rk) = self.sizes();
        let mut out = CMat::zeros(rj * rk, rj * rk);
        for s in 0..self.rank() {
            let c = self.weights[s] * self.free[s][l];
            if c == ZERO {
                continue;
            }
            let (pj, pk) = &self.projected[s];
            for b in 0..rk {
                for bb in 0..rk {
                    let ck = c * pk[(b, bb)];
                    if ck == ZERO {
                        continue;
                    }
                    let mut blk = out.view_mut((b * rj, bb * rj), (rj, rj));
                    blk.zip_apply(pj, |o, p| *o += ck * p);
                }
            }
        }
        out
    }

    /// Dense matrix on `vec(Xᵢ)` (oracle use).
    pub fn to_dense(&self) -> CMat {
        let (n, rj, rk) = self.sizes();
        let mut out = CMat::zeros(n * rj * rk, n * rj * rk);
        for s in 0..self.rank() {
            let (pj, pk) = &self.projected[s];
            let d = CMat::from_diagonal(&self.free[s]);
            out += kron(&kron(pk, pj), &d) * self.weights[s];
        }
        out
    }
}

/// K-operator of `mode` for the current bases.
pub fn build_k_operator(cp: &CpTensor, bases: &[CMat], mode: usize) -> Result<KOperator> {
    if cp.factors.len() != 3 || bases.len() != 3 || mode > 2 {
        return Err(Error::Shape("K-operators need an order-3 CP, three bases and a mode in 0..3".into()));
    }
    let (j, k) = others(mode);
    for m in 0..3 {
        if cp.factors[m].nrows() != bases[m].nrows() {
            return Err(Error::Shape(format!(
                "CP factor {m} has {} rows, basis has {}",
                cp.factors[m].nrows(),
                bases[m].nrows()
            )));
        }
    }
    let mut op = KOperator { mode, weights: cp.weights.clone(), free: vec![], projected: vec![] };
    for s in 0..cp.rank() {
        op.free.push(cp.factors[mode].column(s).into_owned());
        let vj: Vec<C64> = cp.factors[j].column(s).iter().copied().collect();
        let vk: Vec<C64> = cp.factors[k].column(s).iter().copied().collect();
        op.projected.push((project_diagonal(&vj, &bases[j]), project_diagonal(&vk, &bases[k])));
    }
    Ok(op)
}

/// All three K-operators.
pub fn build_k_operators(cp: &CpTensor, bases: &[CMat]) -> Result<[KOperator; 3]> {
    Ok([build_k_operator(cp, bases, 0)?, build_k_operator(cp, bases, 1)?, build_k_operator(cp, bases, 2)?])
}

// ---------------------------------------------------------------------------
// Factor and core solves

fn check_bases(p: &Helmholtz3D, bases: &[CMat]) -> Result<()> {
    let dims = p.dims();
    if bases.len() != 3 || (0..3).any(|m| bases[m].nrows() != dims[m]) {
        return Err(Error::Shape(format!("bases do not match grid {dims:?}")));
    }
    Ok(())
}

/// `unfold_i(T ×_j W_jᴴ ×_k W_kᴴ)`.
fn project_others(t: &DenseTensor, bases: &[CMat], mode: usize) -> Result<CMat> {
    let (j, k) = others(mode);
    let t = ttm(t, &bases[j].adjoint(), j)?;
    let t = ttm(&t, &bases[k].adjoint(), k)?;
    t.unfold(mode)
}

/// `I ⊗ B_j + B_k ⊗ I` with `Bₘ = Wₘᴴ Aₘ Wₘ`.
fn coupling(p: &Helmholtz3D, bases: &[CMat], mode: usize) -> CMat {
    let (j, k) = others(mode);
    let bj = project_tridiagonal(&p.a(j), &bases[j]);
    let bk = project_tridiagonal(&p.a(k), &bases[k]);
    let (rj, rk) = (bj.nrows(), bk.nrows());
    kron(&CMat::identity(rk, rk), &bj) + kron(&bk, &CMat::identity(rj, rj))
}

/// Reduced operator of the full mode-`i` solve in interleaved ordering
/// (column index of `Xᵢ` fastest): block tridiagonal with blocks of size
/// `r_j·r_k`.
pub fn v1_system(p: &Helmholtz3D, bases: &[CMat], mode: usize) -> Result<BlockTridiagonal> {
    check_bases(p, bases)?;
    let n = p.dims()[mode];
    let c = coupling(p, bases, mode);
    let kop = p.cp().map(|cp| build_k_operator(cp, bases, mode)).transpose()?;
    let a = p.a(mode);
    let big = c.nrows();
    let mut diag = Vec::with_capacity(n);
    for l in 0..n {
        let mut blk = c.clone();
        let shift = a.get(l, l)
            - match &p.wavenumber {
                WaveNumber3D::Constant(k) => *k,
                WaveNumber3D::Variable { .. } => ZERO,
            };
        for t in 0..big {
            blk[(t, t)] += shift;
        }
        if let Some(kop) = &kop {
            blk -= kop.block(l);
        }
        diag.push(blk);
    }
    let lower = (0..n.saturating_sub(1)).map(|l| a.get(l + 1, l)).collect();
    let upper = (0..n.saturating_sub(1)).map(|l| a.get(l, l + 1)).collect();
    Ok(BlockTridiagonal { diag, lower, upper })
}

fn solve_v1_rhs(p: &Helmholtz3D, bases: &[CMat], mode: usize, rhs: &CMat) -> Result<CMat> {
    let n = p.dims()[mode];
    if rhs.iter().all(|z| *z == ZERO) {
        return Ok(CMat::zeros(n, rhs.ncols()));
    }
    let sys = v1_system(p, bases, mode)?;
    let x = sys.solve(&vec(&rhs.transpose()), &format!("mode-{mode} factor solve"))?;
    Ok(unvec(&x, rhs.ncols(), n)?.transpose())
}

/// Full mode-`i` solve: `Xᵢ = Wᵢ G₍ᵢ₎` (`nᵢ × r_j·r_k`) with the other two
/// bases of `t` held fixed.
pub fn solve_factor_v1(p: &Helmholtz3D, t: &TuckerTensor, mode: usize) -> Result<CMat> {
    let bases = t.bases();
    check_bases(p, &bases)?;
    let rhs = project_others(&p.f, &bases, mode)?;
    solve_v1_rhs(p, &bases, mode, &rhs)
}

/// New basis from the first `r` columns of `X` and the matching core
/// unfolding `Wᴴ X`. A rank-deficient leading block falls back to
/// column-pivoted QR over all columns.
pub fn factor_update_from_x(x: &CMat, r: usize) -> Result<(CMat, CMat)> {
    if r == 0 || r > x.ncols() || r > x.nrows() {
        return Err(param("r", format!("rank {r} for a {}x{} solve", x.nrows(), x.ncols())));
    }
    if x.iter().all(|z| *z == ZERO) {
        return Err(Error::RankCollapse("factor solve returned zero; cannot orthonormalize".into()));
    }
    let qr = thin_qr(&x.columns(0, r).into_owned())?;
    let w = if qr.rank_deficient { pivoted_qr_basis(x, r)?.0 } else { qr.q };
    let g = matmul_adj(&w, x);
    Ok((w, g))
}

/// Row basis `Q` of the core unfolding: `G₍ᵢ₎ᴴ = Q R̃`.
fn core_row_basis(core: &DenseTensor, mode: usize) -> Result<CMat> {
    let g = core.unfold(mode)?;
    if g.ncols() < g.nrows() {
        return Err(param("ranks", format!("mode-{mode} rank {} exceeds the product of the others {}", g.nrows(), g.ncols())));
    }
    Ok(thin_qr(&g.adjoint())?.q)
}

/// Projected mode-`i` system for `Xᵢ = Wᵢ Rᵢ` (`nᵢ·rᵢ` unknowns, interleaved
/// ordering, bandwidth `rᵢ`), its right-hand side and the row basis `Q`.
pub fn v2_system(p: &Helmholtz3D, t: &TuckerTensor, mode: usize) -> Result<(BandedMatrix, CMat, CMat)> {
    let bases = t.bases();
    check_bases(p, &bases)?;
    let (j, k) = others(mode);
    let n = p.dims()[mode];
    let q = core_row_basis(&t.core, mode)?;
    let r = q.ncols();
    let bj = project_tridiagonal(&p.a(j), &bases[j]);
    let bk = project_tridiagonal(&p.a(k), &bases[k]);
    let (rj, rk) = (bj.nrows(), bk.nrows());
    // Qᵀ (I⊗B_j + B_k⊗I) Q̄
    let chat = compress_pair(&q, &bj, &CMat::identity(rk, rk)) + compress_pair(&q, &CMat::identity(rj, rj), &bk);
    let khat: Vec<(C64, CVec, CMat)> = match p.cp() {
        None => vec![],
        Some(cp) => {
            let kop = build_k_operator(cp, &bases, mode)?;
            (0..kop.rank())
                .map(|s| (kop.weights[s], kop.free[s].clone(), compress_pair(&q, &kop.projected[s].0, &kop.projected[s].1)))
                .collect()
        }
    };
    let k_const = match &p.wavenumber {
        WaveNumber3D::Constant(k) => *k,
        WaveNumber3D::Variable { .. } => ZERO,
    };
    let a = p.a(mode);
    let mut sys = BandedMatrix::zeros(n * r, r, r);
    for l in 0..n {
        let mut blk = chat.clone();
        for (w, v, m) in &khat {
            let c = w * v[l];
            if c != ZERO {
                blk.zip_apply(m, |b, x| *b -= c * x);
            }
        }
        for e in 0..r {
            blk[(e, e)] += a.get(l, l) - k_const;
        }
        for aa in 0..r {
            let row = aa + r * l;
            for b in 0..r {
                sys.add(row, b + r * l, blk[(aa, b)])?;
            }
            if l > 0 {
                sys.add(row, aa + r * (l - 1), a.get(l, l - 1))?;
            }
            if l + 1 < n {
                sys.add(row, aa + r * (l + 1), a.get(l, l + 1))?;
            }
        }
    }
    let rhs = matmul(&project_others(&p.f, &bases, mode)?, &q);
    Ok((sys, rhs, q))
}

/// Projected mode-`i` solve: returns `Xᵢ = Wᵢ Rᵢ` (`nᵢ × rᵢ`) and the row
/// basis `Q` with `G₍ᵢ₎ = Rᵢ Qᴴ`.
pub fn solve_factor_v2(p: &Helmholtz3D, t: &TuckerTensor, mode: usize) -> Result<(CMat, CMat)> {
    let (sys, rhs, q) = v2_system(p, t, mode)?;
    let (n, r) = (p.dims()[mode], q.ncols());
    if rhs.iter().all(|z| *z == ZERO) {
        return Ok((CMat::zeros(n, r), q));
    }
    let lu = sys.factor().map_err(|e| match e {
        Error::Singular { pivot, .. } => Error::Singular { context: format!("mode-{mode} projected factor solve"), pivot },
        other => other,
    })?;
    let x = lu.solve(&vec(&rhs.transpose()))?;
    Ok((unvec(&x, r, n)?.transpose(), q))
}

/// Galerkin system for the core with all bases fixed:
/// `G ×₁ B₁ + G ×₂ B₂ + G ×₃ B₃ − (K∘·)` projected, on standard `vec(G)`.
pub fn core_operator(p: &Helmholtz3D, bases: &[CMat]) -> Result<KronSumOperator> {
    check_bases(p, bases)?;
    let b: Vec<CMat> = (0..3).map(|m| project_tridiagonal(&p.a(m), &bases[m])).collect();
    let ranks: Vec<usize> = bases.iter().map(|w| w.ncols()).collect();
    let mut op = KronSumOperator::new(ranks.clone());
    for m in 0..3 {
        let mut f: Vec<Factor> = ranks.iter().map(|&r| Factor::Identity(r)).collect();
        f[m] = Factor::Dense(b[m].clone());
        op.add_term(ONE, f)?;
    }
    match &p.wavenumber {
        WaveNumber3D::Constant(k) => op.add_diagonal(&CVec::from_element(ranks.iter().product(), -k))?,
        WaveNumber3D::Variable { cp, .. } => {
            for s in 0..cp.rank() {
                let f = (0..3)
                    .map(|m| {
                        let v: Vec<C64> = cp.factors[m].column(s).iter().copied().collect();
                        Factor::Dense(project_diagonal(&v, &bases[m]))
                    })
                    .collect();
                op.add_term(-cp.weights[s], f)?;
            }
        }
    }
    Ok(op)
}

fn project_all(t: &DenseTensor, bases: &[CMat]) -> Result<DenseTensor> {
    let mut g = t.clone();
    for (m, w) in bases.iter().enumerate() {
        g = ttm(&g, &w.adjoint(), m)?;
    }
    Ok(g)
}

/// Core solve with all bases fixed. Constant `k` uses a Schur-based
/// triangular Kronecker-sum solve (`O(r⁴)`); a variable `k` assembles the
/// dense `r₁r₂r₃` system, refused above `cap` unknowns.
pub fn solve_core(p: &Helmholtz3D, bases: &[CMat], cap: usize) -> Result<DenseTensor> {
    check_bases(p, bases)?;
    let ranks: Vec<usize> = bases.iter().map(|w| w.ncols()).collect();
    let rhs = project_all(&p.f, bases)?;
    if rhs.data().iter().all(|z| *z == ZERO) {
        return Ok(DenseTensor::zeros(&ranks));
    }
    match &p.wavenumber {
        WaveNumber3D::Constant(k) => {
            let b: Vec<CMat> = (0..3).map(|m| project_tridiagonal(&p.a(m), &bases[m])).collect();
            schur_core_solve(&b, *k, &rhs)
        }
        WaveNumber3D::Variable { .. } => {
            let size: usize = ranks.iter().product();
            if size > cap {
                return Err(Error::DimensionCap {
                    requested: size,
                    cap,
                    hint: "lower the ranks or raise the core cap; version 3 avoids this solve",
                });
            }
            let dense = core_operator(p, bases)?.assemble_dense(cap)?;
            let lu = DenseLu::new(&dense, "core solve")?;
            let x = lu.solve(&CVec::from_column_slice(rhs.data()));
            DenseTensor::from_vec(&ranks, x.as_slice().to_vec())
        }
    }
}

/// Solves `Σₘ G ×ₘ Bₘ − k·G = H` through complex Schur forms of the `Bₘ`.
fn schur_core_solve(b: &[CMat], k: C64, h: &DenseTensor) -> Result<DenseTensor> {
    let mut z = Vec::with_capacity(3);
    let mut tri = Vec::with_capacity(3);
    for bm in b {
        let (q, t) = Schur::try_new(bm.clone(), 1e-14, 10_000)
            .ok_or_else(|| Error::Singular { context: "Schur form of a projected derivative".into(), pivot: f64::NAN })?
            .unpack();
        let scale = t.norm().max(f64::MIN_POSITIVE);
        let below: f64 = (0..t.nrows()).flat_map(|i| (0..i).map(move |j| (i, j))).map(|ij| t[ij].norm()).fold(0.0, f64::max);
        if below > 1e-10 * scale {
            return Err(Error::Unsupported(format!("Schur form not triangular (subdiagonal {below:.1e})")));
        }
        z.push(q);
        tri.push(t);
    }
    let mut ht = h.clone();
    for (m, q) in z.iter().enumerate() {
        ht = ttm(&ht, &q.adjoint(), m)?;
    }
    let [r1, r2, r3] = [tri[0].nrows(), tri[1].nrows(), tri[2].nrows()];
    let (t1, t2, t3) = (&tri[0], &tri[1], &tri[2]);
    let scale = t1.norm() + t2.norm() + t3.norm() + k.norm();
    let idx = |a: usize, b: usize, c: usize| a + r1 * (b + r2 * c);
    let mut g = vec![ZERO; r1 * r2 * r3];
    let rhs = ht.data();
    for c in (0..r3).rev() {
        for bb in (0..r2).rev() {
            for a in (0..r1).rev() {
                let mut s = rhs[idx(a, bb, c)];
                for a2 in a + 1..r1 {
                    s -= t1[(a, a2)] * g[idx(a2, bb, c)];
                }
                for b2 in bb + 1..r2 {
                    s -= t2[(bb, b2)] * g[idx(a, b2, c)];
                }
                for c2 in c + 1..r3 {
                    s -= t3[(c, c2)] * g[idx(a, bb, c2)];
                }
                let d = t1[(a, a)] + t2[(bb, bb)] + t3[(c, c)] - k;
                if d.norm() <= 1e-14 * scale {
                    return Err(Error::Singular { context: format!("core solve at ({a}, {bb}, {c})"), pivot: d.norm() });
                }
                g[idx(a, bb, c)] = s / d;
            }
        }
    }
    let mut out = DenseTensor::from_vec(&[r1, r2, r3], g)?;
    for (m, q) in z.iter().enumerate() {
        out = ttm(&out, q, m)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Residuals

/// Dense residual `R = F − L(M)` and its Frobenius norm.
pub fn residual_tensor(p: &Helmholtz3D, t: &TuckerTensor) -> (DenseTensor, f64) {
    let r = &p.f - &p.apply(&t.to_dense());
    let nrm = r.norm();
    (r, nrm)
}

/// `‖F − L(M)‖` without forming `M`, from Gram matrices of the Tucker terms
/// of `L(M)`. The `K` term uses the CP form. Cancellation limits the relative
/// accuracy to about `1e-8`.
pub fn residual_norm_lowrank(p: &Helmholtz3D, t: &TuckerTensor) -> Result<f64> {
    let w = t.bases();
    check_bases(p, &w)?;
    // Terms c·(G ×₁ P₁ ×₂ P₂ ×₃ P₃) whose sum is L(M).
    let mut terms: Vec<(C64, [CMat; 3])> = Vec::new();
    for m in 0..3 {
        let mut f = [w[0].clone(), w[1].clone(), w[2].clone()];
        f[m] = p.a(m).mul_left(&w[m]);
        terms.push((ONE, f));
    }
    match &p.wavenumber {
        WaveNumber3D::Constant(k) => terms.push((-k, [w[0].clone(), w[1].clone(), w[2].clone()])),
        WaveNumber3D::Variable { cp, .. } => {
            for s in 0..cp.rank() {
                let f = std::array::from_fn(|m| {
                    let mut dw = w[m].clone();
                    for (i, mut row) in dw.row_iter_mut().enumerate() {
                        row *= cp.factors[m][(i, s)];
                    }
                    dw
                });
                terms.push((-cp.weights[s], f));
            }
        }
    }
    let g = &t.core;
    let mut ll = ZERO;
    for (ca, pa) in &terms {
        for (cb, pb) in &terms {
            let mut x = g.clone();
            for m in 0..3 {
                x = ttm(&x, &matmul_adj(&pa[m], &pb[m]), m)?;
            }
            ll += ca.conj() * cb * g.inner(&x);
        }
    }
    let mut fl = ZERO;
    for (c, pm) in &terms {
        let mut x = p.f.clone();
        for m in 0..3 {
            x = ttm(&x, &pm[m].adjoint(), m)?;
        }
        fl += c * x.inner(g);
    }
    let ff = p.f.norm().powi(2);
    Ok((ff - 2.0 * fl.re + ll.re).max(0.0).sqrt())
}

/// `‖F − L(M)‖/‖F‖` (0 when both vanish), dense up to `dense_cap` grid points.
pub fn relative_residual(p: &Helmholtz3D, t: &TuckerTensor, dense_cap: usize) -> Result<f64> {
    let r = if p.f.len() <= dense_cap { residual_tensor(p, t).1 } else { residual_norm_lowrank(p, t)? };
    Ok(if r == 0.0 { 0.0 } else { r / p.f.norm() })
}

// ---------------------------------------------------------------------------
// Projectors

/// Applies the projector of the mode-`free_mode` solve (`P₂₃`, `P₁₃` or
/// `P₁₂` for free modes 0, 1, 2) with the other two bases taken from `t`:
/// `x − vec L(M)`, where `M` is the Galerkin solution for right-hand side `x`.
pub fn projector_apply_3d(p: &Helmholtz3D, t: &TuckerTensor, free_mode: usize, x: &CVec) -> Result<CVec> {
    let dims = p.dims();
    if free_mode > 2 {
        return Err(param("free_mode", format!("mode {free_mode} of a 3D problem")));
    }
    if x.len() != dims.iter().product::<usize>() {
        return Err(Error::Shape(format!("vector of length {} for grid {dims:?}", x.len())));
    }
    let bases = t.bases();
    check_bases(p, &bases)?;
    let (j, k) = others(free_mode);
    if bases[j].ncols() == 0 || bases[k].ncols() == 0 {
        return Ok(x.clone());
    }
    let xt = DenseTensor::from_vec(&dims, x.as_slice().to_vec())?;
    let rhs = project_others(&xt, &bases, free_mode)?;
    let sol = solve_v1_rhs(p, &bases, free_mode, &rhs)?;
    let mut shape = [bases[0].ncols(), bases[1].ncols(), bases[2].ncols()];
    shape[free_mode] = dims[free_mode];
    let m = fold(&sol, free_mode, &shape)?;
    let m = ttm(&ttm(&m, &bases[j], j)?, &bases[k], k)?;
    Ok(x - p.operator().apply(&CVec::from_column_slice(m.data()))?)
}

/// Dense tensor from a mode-`i` solve, `fold(Xᵢ) ×_j W_j ×_k W_k`.
pub fn lift_factor_solution(t: &TuckerTensor, mode: usize, x: &CMat) -> Result<DenseTensor> {
    let bases = t.bases();
    let (j, k) = others(mode);
    let mut shape = [bases[0].ncols(), bases[1].ncols(), bases[2].ncols()];
    shape[mode] = x.nrows();
    let m = fold(x, mode, &shape)?;
    ttm(&ttm(&m, &bases[j], j)?, &bases[k], k)
}

// ---------------------------------------------------------------------------
// Alternating sweeps

/// Which sweep [`run`] performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Version {
    V1,
    V2,
    V3,
}

impl Version {
    pub fn from_number(v: u32) -> Result<Self> {
        match v {
            1 => Ok(Self::V1),
            2 => Ok(Self::V2),
            3 => Ok(Self::V3),
            _ => Err(param("version", format!("{v} is not one of 1, 2, 3"))),
        }
    }
}

/// Starting point of a run.
#[derive(Clone, Debug)]
pub enum Init {
    /// Truncated HOSVD of the right-hand side.
    Hosvd,
    /// Seeded random orthonormal bases and core.
    Random(u64),
    Given(TuckerTensor),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub version: Version,
    pub ranks: [usize; 3],
    pub max_iters: usize,
    /// Early exit once the relative residual drops to `tol`; 0 runs all sweeps.
    pub tol: f64,
    pub init: Init,
    /// Sweep order; version 3 uses the projected solve on the first two.
    pub mode_order: [usize; 3],
    pub core_cap: usize,
    pub residual_cap: usize,
    /// Stagnation window (0 disables) and relative tolerance.
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
}

impl RunOptions {
    pub fn new(version: Version, ranks: [usize; 3]) -> Self {
        Self {
            version,
            ranks,
            max_iters: 10,
            tol: 0.0,
            init: Init::Hosvd,
            mode_order: [0, 1, 2],
            core_cap: DEFAULT_CORE_CAP,
            residual_cap: DEFAULT_RESIDUAL_CAP,
            stagnation_window: 0,
            stagnation_tol: 1e-3,
        }
    }
}

fn initial_guess(p: &Helmholtz3D, opts: &RunOptions) -> Result<TuckerTensor> {
    let dims = p.dims();
    let t = match &opts.init {
        Init::Hosvd => hosvd(&p.f, &opts.ranks)?,
        Init::Random(seed) => {
            let bases = (0..3).map(|m| random_orthonormal(dims[m], opts.ranks[m], seed.wrapping_add(m as u64))).collect();
            let r = opts.ranks;
            let core = random_cmat(r[0], r[1] * r[2], seed.wrapping_add(3));
            TuckerTensor::from_bases(DenseTensor::from_vec(&r, core.as_slice().to_vec())?, bases)?
        }
        Init::Given(t) => t.clone(),
    };
    if t.dims() != dims || t.ranks() != opts.ranks {
        return Err(Error::Shape(format!("initial guess has dims {:?} and ranks {:?}", t.dims(), t.ranks())));
    }
    // Orthonormalize in case the guess was not.
    let mut bases = t.bases();
    let mut core = t.core.clone();
    for (m, w) in bases.iter_mut().enumerate() {
        let qr = thin_qr(w)?;
        core = ttm(&core, &qr.r, m)?;
        *w = qr.q;
    }
    TuckerTensor::from_bases(core, bases)
}

fn validate(p: &Helmholtz3D, opts: &RunOptions) -> Result<()> {
    let dims = p.dims();
    for m in 0..3 {
        let r = opts.ranks[m];
        let (j, k) = others(m);
        if r == 0 || r > dims[m] || r > opts.ranks[j] * opts.ranks[k] {
            return Err(param("ranks", format!("{:?} is not a valid multilinear rank for grid {dims:?}", opts.ranks)));
        }
    }
    let mut order = opts.mode_order;
    order.sort_unstable();
    if order != [0, 1, 2] {
        return Err(param("mode_order", format!("{:?} is not a permutation of the modes", opts.mode_order)));
    }
    if !(opts.tol >= 0.0) {
        return Err(param("tol", "tolerance must be nonnegative"));
    }
    if p.cp().is_some() && opts.version == Version::V2 {
        let size: usize = opts.ranks.iter().product();
        if size > opts.core_cap {
            return Err(Error::DimensionCap {
                requested: size,
                cap: opts.core_cap,
                hint: "version 2 with a variable wave number needs a dense core solve; use version 3",
            });
        }
    }
    Ok(())
}

fn full_mode_update(p: &Helmholtz3D, t: &mut TuckerTensor, mode: usize, rep: &mut SolveReport) -> Result<()> {
    let x = rep.time(PHASE_FACTOR, || solve_factor_v1(p, t, mode))?;
    let (w, g) = rep.time(PHASE_QR, || factor_update_from_x(&x, t.ranks()[mode]))?;
    let mut bases = t.bases();
    bases[mode] = w;
    let core = fold(&g, mode, &t.ranks())?;
    *t = TuckerTensor::from_bases(core, bases)?;
    Ok(())
}

fn projected_mode_update(p: &Helmholtz3D, t: &mut TuckerTensor, mode: usize, rep: &mut SolveReport) -> Result<()> {
    let (x, q) = rep.time(PHASE_FACTOR, || solve_factor_v2(p, t, mode))?;
    if x.iter().all(|z| *z == ZERO) {
        return Err(Error::RankCollapse(format!("mode-{mode} projected solve returned zero")));
    }
    let qr = rep.time(PHASE_QR, || thin_qr(&x))?;
    let mut bases = t.bases();
    bases[mode] = qr.q;
    let core = fold(&matmul(&qr.r, &q.adjoint()), mode, &t.ranks())?;
    *t = TuckerTensor::from_bases(core, bases)?;
    Ok(())
}

/// Alternating Tucker solve. The report holds one residual per sweep; for
/// version 2 the last entry is taken after the closing core solve.
pub fn run(p: &Helmholtz3D, opts: &RunOptions) -> Result<(TuckerTensor, SolveReport)> {
    run_with(p, opts, |_, _| {})
}

/// [`run`] with a callback receiving the iterate after each sweep.
pub fn run_with(
    p: &Helmholtz3D,
    opts: &RunOptions,
    mut observe: impl FnMut(usize, &TuckerTensor),
) -> Result<(TuckerTensor, SolveReport)> {
    validate(p, opts)?;
    let mut rep = SolveReport::new(opts.ranks.to_vec());
    let mut t = rep.time(PHASE_SETUP, || initial_guess(p, opts))?;
    if p.f.data().iter().all(|z| *z == ZERO) {
        t.core = DenseTensor::zeros(&opts.ranks);
        rep.residual_history.push(0.0);
        rep.converged = true;
        rep.stop_reason = StopReason::Converged;
        return Ok((t, rep));
    }
    for iter in 1..=opts.max_iters {
        for (pos, &mode) in opts.mode_order.iter().enumerate() {
            let projected = match opts.version {
                Version::V1 => false,
                Version::V2 => true,
                Version::V3 => pos < 2,
            };
            let step = if projected {
                projected_mode_update(p, &mut t, mode, &mut rep)
            } else {
                full_mode_update(p, &mut t, mode, &mut rep)
            };
            step.map_err(|e| tag_iter(e, iter))?;
        }
        let t0 = Instant::now();
        let res = relative_residual(p, &t, opts.residual_cap)?;
        rep.add_time(PHASE_RESIDUAL, t0.elapsed().as_secs_f64());
        rep.residual_history.push(res);
        observe(iter, &t);
        if opts.tol > 0.0 && res <= opts.tol {
            rep.converged = true;
            rep.stop_reason = StopReason::Converged;
            break;
        }
        if opts.stagnation_window > 0 && stagnated(&rep.residual_history, opts.stagnation_window, opts.stagnation_tol) {
            rep.stop_reason = StopReason::Stagnated;
            break;
        }
    }
    if opts.version == Version::V2 {
        let bases = t.bases();
        let core = rep.time(PHASE_CORE, || solve_core(p, &bases, opts.core_cap))?;
        t = TuckerTensor::from_bases(core, bases)?;
        let t0 = Instant::now();
        let res = relative_residual(p, &t, opts.residual_cap)?;
        rep.add_time(PHASE_RESIDUAL, t0.elapsed().as_secs_f64());
        // The closing core solve is part of the last sweep.
        match rep.residual_history.last_mut() {
            Some(last) => *last = res,
            None => rep.residual_history.push(res),
        }
        if opts.tol > 0.0 && res <= opts.tol {
            rep.converged = true;
            rep.stop_reason = StopReason::Converged;
        }
    }
    Ok((t, rep))
}

fn tag_iter(e: Error, iter: usize) -> Error {
    match e {
        Error::Singular { context, pivot } => Error::Singular { context: format!("{context}, sweep {iter}"), pivot },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_symmetric_axis, catalog, sample_field, separable_perturbation_cp};
    use crate::kron_linalg::DEFAULT_FULL_SOLVE_CAP;
    use crate::rng::random_cvec;

    fn tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let n: usize = shape.iter().product();
        DenseTensor::from_vec(shape, random_cvec(n, seed).as_slice().to_vec()).unwrap()
    }

    pub(super) fn problem(m: usize, variable: bool) -> Helmholtz3D {
        let ax = build_symmetric_axis(m, 3.0, 0.5, 0.25).unwrap();
        let axes = [&ax, &ax, &ax];
        let f = sample_field(&axes, catalog::neg_gaussian).unwrap();
        let k0 = C64::from(2.0);
        if variable {
            let field = WaveNumberField::from_perturbation(&axes, k0, catalog::gaussian).unwrap();
            let cp = separable_perturbation_cp(&axes, k0, ONE, |x| (-x * x).exp()).unwrap();
            Helmholtz3D::from_axes(axes, &field, Some(cp), f).unwrap()
        } else {
            Helmholtz3D::from_axes(axes, &WaveNumberField::constant(&axes, k0), None, f).unwrap()
        }
    }

    fn random_tucker(dims: [usize; 3], ranks: [usize; 3], seed: u64) -> TuckerTensor {
        let bases = (0..3).map(|m| random_orthonormal(dims[m], ranks[m], seed + m as u64)).collect();
        TuckerTensor::from_bases(tensor(&ranks, seed + 9), bases).unwrap()
    }

    #[test]
    fn separable_cp_matches_field_samples() {
        for variable in [true] {
            let p = problem(6, variable);
            if let WaveNumber3D::Variable { samples, cp } = &p.wavenumber {
                assert!((&cp.to_dense() - samples).norm() < 1e-13 * samples.norm());
            }
        }
    }

    #[test]
    fn apply_matches_kron_operator() {
        for variable in [false, true] {
            let p = problem(6, variable);
            let x = tensor(&p.dims(), 1);
            let a = p.apply(&x);
            let b = p.operator().apply(&CVec::from_column_slice(x.data())).unwrap();
            assert!((CVec::from_column_slice(a.data()) - b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn k_operator_matches_dense_projection() {
        let p = problem(4, true);
        let dims = p.dims();
        let cp = CpTensor::new(
            vec![C64::new(1.0, 0.5), C64::new(-0.3, 0.0), C64::new(0.2, 0.1)],
            (0..3).map(|m| random_cmat(dims[m], 3, 20 + m as u64)).collect(),
        )
        .unwrap();
        let t = random_tucker(dims, [2, 2, 2], 30);
        let w = t.bases();
        let kdiag = CMat::from_diagonal(&CVec::from_column_slice(cp.to_dense().data()));
        for mode in 0..3 {
            let op = build_k_operator(&cp, &w, mode).unwrap();
            // Dense: unfold_i(K∘M) (W̄_k ⊗ W̄_j) as a map of Xᵢ.
            let x = random_cmat(dims[mode], 4, 40 + mode as u64);
            let m = lift_factor_solution(&t, mode, &x).unwrap();
            let km = CVec::from_column_slice(m.data());
            let km = DenseTensor::from_vec(&dims, (&kdiag * km).as_slice().to_vec()).unwrap();
            let want = project_others(&km, &w, mode).unwrap();
            let got = op.apply(&x).unwrap();
            assert!((&got - &want).norm() < 1e-10 * want.norm(), "mode {mode}");
            let dense = op.to_dense() * vec(&x);
            assert!((dense - vec(&want)).norm() < 1e-10 * want.norm());
        }
    }

    #[test]
    fn constant_cp_k_operator_is_scaling() {
        let p = problem(4, false);
        let dims = p.dims();
        let cp = CpTensor::from_terms(&[(C64::from(4.0), dims.iter().map(|&n| vec![ONE; n]).collect())]).unwrap();
        let t = random_tucker(dims, [2, 3, 2], 50);
        let op = build_k_operator(&cp, &t.bases(), 1).unwrap();
        let x = random_cmat(dims[1], 4, 51);
        assert!((op.apply(&x).unwrap() - &x * C64::from(4.0)).norm() < 1e-12 * x.norm());
        let zero = CpTensor { weights: vec![ZERO], factors: cp.factors.clone() };
        assert_eq!(build_k_operator(&zero, &t.bases(), 1).unwrap().apply(&x).unwrap().norm(), 0.0);
    }

    #[test]
    fn v1_system_matches_dense_galerkin() {
        for variable in [false, true] {
            let p = problem(4, variable);
            let dims = p.dims();
            let t = random_tucker(dims, [2, 2, 3], 60);
            let w = t.bases();
            let lop = p.operator().assemble_dense(4096).unwrap();
            for mode in 0..3 {
                let (j, k) = others(mode);
                let r = w[j].ncols() * w[k].ncols();
                let sys = v1_system(&p, &w, mode).unwrap().to_dense();
                // Column (ℓ, c) of the dense Galerkin matrix.
                for c in 0..r {
                    for l in 0..dims[mode] {
                        let mut x = CMat::zeros(dims[mode], r);
                        x[(l, c)] = ONE;
                        let m = lift_factor_solution(&t, mode, &x).unwrap();
                        let lm = DenseTensor::from_vec(&dims, (&lop * CVec::from_column_slice(m.data())).as_slice().to_vec()).unwrap();
                        let want = project_others(&lm, &w, mode).unwrap();
                        for l2 in 0..dims[mode] {
                            for c2 in 0..r {
                                let d = sys[(c2 + r * l2, c + r * l)] - want[(l2, c2)];
                                assert!(d.norm() < 1e-10 * (1.0 + want.norm()), "mode {mode}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn identity_bases_reproduce_full_solve() {
        for variable in [false, true] {
            let p = problem(4, variable);
            let dims = p.dims();
            let full = p.full_solve(DEFAULT_FULL_SOLVE_CAP).unwrap();
            let eye: Vec<CMat> = dims.iter().map(|&n| CMat::identity(n, n)).collect();
            let t = TuckerTensor::from_bases(DenseTensor::zeros(&dims), eye.clone()).unwrap();
            for mode in 0..3 {
                let x = solve_factor_v1(&p, &t, mode).unwrap();
                let m = lift_factor_solution(&t, mode, &x).unwrap();
                assert!((&m - &full).norm() < 1e-8 * full.norm());
            }
            let core = solve_core(&p, &eye, 4096).unwrap();
            assert!((&core - &full).norm() < 1e-8 * full.norm());
        }
    }

    #[test]
    fn schur_core_solve_matches_dense() {
        let p = problem(6, false);
        let t = random_tucker(p.dims(), [3, 4, 2], 70);
        let w = t.bases();
        let g = solve_core(&p, &w, 4096).unwrap();
        let op = core_operator(&p, &w).unwrap();
        let rhs = project_all(&p.f, &w).unwrap();
        let lg = op.apply(&CVec::from_column_slice(g.data())).unwrap();
        assert!((lg - CVec::from_column_slice(rhs.data())).norm() < 1e-10 * rhs.norm());
    }

    #[test]
    fn zero_rhs_solves_are_zero() {
        let mut p = problem(4, true);
        p.f = DenseTensor::zeros(&p.dims());
        let t = random_tucker(p.dims(), [2, 2, 2], 80);
        assert_eq!(solve_factor_v1(&p, &t, 0).unwrap().norm(), 0.0);
        assert_eq!(solve_factor_v2(&p, &t, 1).unwrap().0.norm(), 0.0);
        assert_eq!(solve_core(&p, &t.bases(), 4096).unwrap().norm(), 0.0);
        for v in [Version::V1, Version::V2, Version::V3] {
            let (m, rep) = run(&p, &RunOptions::new(v, [2, 2, 2])).unwrap();
            assert_eq!(rep.residual_history, vec![0.0]);
            assert_eq!(m.to_dense().norm(), 0.0);
        }
    }

    #[test]
    fn factor_update_contract() {
        let w = random_orthonormal(10, 3, 90);
        let g = random_cmat(3, 6, 91);
        let x = &w * &g;
        let (w2, g2) = factor_update_from_x(&x, 3).unwrap();
        assert!((&w2 * &g2 - &x).norm() < 1e-10 * x.norm());
        assert!((w2.adjoint() * &w2 - CMat::identity(3, 3)).norm() < 1e-12);
        assert!(matches!(factor_update_from_x(&CMat::zeros(10, 6), 3), Err(Error::RankCollapse(_))));
        // Leading block rank deficient: first three columns repeat one vector.
        let mut y = x.clone();
        for c in 1..3 {
            let col = y.column(0).into_owned();
            y.column_mut(c).copy_from(&col);
        }
        let (w3, g3) = factor_update_from_x(&y, 3).unwrap();
        assert!((&w3 * &g3 - &y).norm() < 1e-10 * y.norm());
    }

    #[test]
    fn v2_is_v1_projected_on_core_rows() {
        for variable in [false, true] {
            let p = problem(4, variable);
            let t = random_tucker(p.dims(), [2, 2, 2], 100);
            for mode in 0..3 {
                // v1 with the same unknowns restricted to span(Q̄ᵀ): compare
                // through the Galerkin equations rather than raw solutions.
                let (x2, q) = solve_factor_v2(&p, &t, mode).unwrap();
                let w = t.bases();
                let rhs = project_others(&p.f, &w, mode).unwrap();
                let sys = v1_system(&p, &w, mode).unwrap().to_dense();
                let xfull = &x2 * q.adjoint();
                let r = xfull.ncols();
                let lx = unvec(&(sys * vec(&xfull.transpose())), r, xfull.nrows()).unwrap().transpose();
                let res = (lx - &rhs) * &q;
                assert!(res.norm() < 1e-10 * rhs.norm(), "mode {mode}");
            }
        }
    }

    #[test]
    fn v2_bandwidth_is_rank() {
        let p = problem(6, true);
        let t = random_tucker(p.dims(), [3, 3, 3], 110);
        let (sys, _, _) = v2_system(&p, &t, 0).unwrap();
        assert!(sys.measured_bandwidth() <= 3);
    }

    #[test]
    fn galerkin_annihilation_per_mode() {
        for variable in [false, true] {
            let p = problem(6, variable);
            let t = random_tucker(p.dims(), [2, 2, 2], 120);
            let w = t.bases();
            for mode in 0..3 {
                let x = solve_factor_v1(&p, &t, mode).unwrap();
                let m = lift_factor_solution(&t, mode, &x).unwrap();
                let r = &p.f - &p.apply(&m);
                let c = project_others(&r, &w, mode).unwrap();
                assert!(c.norm() <= 1e-9 * p.f.norm());
            }
        }
    }

    #[test]
    fn projectors_3d_idempotent_and_give_residual() {
        for variable in [false, true] {
            let p = problem(4, variable);
            let t = random_tucker(p.dims(), [2, 2, 2], 125);
            let fv = CVec::from_column_slice(p.f.data());
            let x = random_cvec(fv.len(), 126);
            for mode in 0..3 {
                let px = projector_apply_3d(&p, &t, mode, &x).unwrap();
                let ppx = projector_apply_3d(&p, &t, mode, &px).unwrap();
                assert!((&ppx - &px).norm() <= 1e-9 * x.norm());
                let m = lift_factor_solution(&t, mode, &solve_factor_v1(&p, &t, mode).unwrap()).unwrap();
                let r = &p.f - &p.apply(&m);
                let pf = projector_apply_3d(&p, &t, mode, &fv).unwrap();
                assert!((CVec::from_column_slice(r.data()) - pf).norm() <= 1e-9 * fv.norm());
            }
        }
    }

    #[test]
    fn lowrank_residual_norm_matches_dense() {
        for variable in [false, true] {
            let p = problem(4, variable);
            let t = random_tucker(p.dims(), [2, 3, 2], 130);
            let dense = residual_tensor(&p, &t).1;
            let low = residual_norm_lowrank(&p, &t).unwrap();
            assert!((dense - low).abs() <= 1e-10 * dense, "{dense} vs {low}");
        }
    }

    #[test]
    fn zero_tucker_residual_is_rhs() {
        let p = problem(4, false);
        let mut t = random_tucker(p.dims(), [2, 2, 2], 140);
        t.core = DenseTensor::zeros(&[2, 2, 2]);
        let (r, nrm) = residual_tensor(&p, &t);
        assert_eq!(r, p.f);
        assert!((nrm - p.f.norm()).abs() < 1e-14);
    }

    #[test]
    fn versions_reduce_the_residual() {
        let p = problem(6, false);
        for v in [Version::V1, Version::V2, Version::V3] {
            let (t, rep) = run(&p, &RunOptions { max_iters: 10, ..RunOptions::new(v, [3, 3, 3]) }).unwrap();
            assert!(t.orthonormality_defect() < 1e-10);
            let h = &rep.residual_history;
            assert!(h[h.len() - 1] < 0.5 * h[0] && h[h.len() - 1] < 0.2, "{v:?}: {h:?}");
        }
    }

    #[test]
    fn run_rejects_bad_options() {
        let p = problem(4, false);
        assert!(run(&p, &RunOptions::new(Version::V1, [0, 2, 2])).is_err());
        assert!(run(&p, &RunOptions::new(Version::V1, [5, 2, 2])).is_err());
        assert!(run(&p, &RunOptions { mode_order: [0, 0, 1], ..RunOptions::new(Version::V3, [2, 2, 2]) }).is_err());
        assert!(Version::from_number(4).is_err());
    }
}
