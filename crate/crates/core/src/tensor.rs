//! Dense tensors, Tucker and CP formats.
//!
//! Tensors are stored column-major (first index fastest). Modes are 0-based.
//! The mode-`k` unfolding has the mode-`k` fibers as columns, with the
//! remaining indices ordered smaller mode fastest.
//!
//! Two mode products are provided. [`ttm`] is the plain one,
//! `unfold_k(T ×ₖ M) = M · T₍ₖ₎`. [`mode_product`] conjugates the matrix,
//! `unfold_k = M̄ · T₍ₖ₎`, which is the convention of the stored Tucker
//! factors: a [`TuckerTensor`] with factors `Uᵢ` reconstructs as
//! `G ×₁ Ū₁ ×₂ Ū₂ ×₃ Ū₃` in plain products, so that
//! `M₍₁₎ = Ū₁ G₍₁₎ (U₃ ⊗ U₂)ᴴ`.

use std::ops::{Add, Sub};

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};
use crate::kron_linalg::{matmul, svd};
use crate::rng::{complex_gaussian, rng};
use crate::{CMat, C64, ONE, ZERO};

/// Dense complex tensor of any order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![ZERO; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!("{} entries for shape {shape:?}", data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        Self { shape: shape.to_vec(), data }
    }

    /// Order-2 tensor viewing a matrix.
    pub fn from_matrix(m: &CMat) -> Self {
        Self { shape: vec![m.nrows(), m.ncols()], data: m.as_slice().to_vec() }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.order() != 2 {
            return Err(Error::Shape(format!("order-{} tensor is not a matrix", self.order())));
        }
        Ok(CMat::from_column_slice(self.shape[0], self.shape[1], &self.data))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        let mut off = 0;
        for k in (0..self.shape.len()).rev() {
            off = off * self.shape[k] + idx[k];
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩ = Σ conj(self)·other`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn axpy(&mut self, a: C64, x: &Self) {
        assert_eq!(self.shape, x.shape);
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    /// Mode-`k` unfolding.
    pub fn unfold(&self, k: usize) -> Result<CMat> {
        if k >= self.order() {
            return Err(Error::Shape(format!("mode {k} of an order-{} tensor", self.order())));
        }
        let n = self.shape[k];
        let lo: usize = self.shape[..k].iter().product();
        let hi: usize = self.shape[k + 1..].iter().product();
        let mut m = CMat::zeros(n, lo * hi);
        for h in 0..hi {
            for i in 0..n {
                let src = (h * n + i) * lo;
                for l in 0..lo {
                    m[(i, h * lo + l)] = self.data[src + l];
                }
            }
        }
        Ok(m)
    }
}

impl Add for &DenseTensor {
    type Output = DenseTensor;
    fn add(self, rhs: &DenseTensor) -> DenseTensor {
        assert_eq!(self.shape, rhs.shape);
        DenseTensor { shape: self.shape.clone(), data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &DenseTensor {
    type Output = DenseTensor;
    fn sub(self, rhs: &DenseTensor) -> DenseTensor {
        assert_eq!(self.shape, rhs.shape);
        DenseTensor { shape: self.shape.clone(), data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

/// Mode-`k` unfolding (free-function form of [`DenseTensor::unfold`]).
pub fn unfold(t: &DenseTensor, k: usize) -> Result<CMat> {
    t.unfold(k)
}

/// Inverse of [`unfold`].
pub fn fold(m: &CMat, k: usize, shape: &[usize]) -> Result<DenseTensor> {
    if k >= shape.len() {
        return Err(Error::Shape(format!("mode {k} of an order-{} shape", shape.len())));
    }
    let n = shape[k];
    let lo: usize = shape[..k].iter().product();
    let hi: usize = shape[k + 1..].iter().product();
    if m.nrows() != n || m.ncols() != lo * hi {
        return Err(Error::Shape(format!(
            "cannot fold a {}x{} matrix along mode {k} into {shape:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![ZERO; n * lo * hi];
    for h in 0..hi {
        for i in 0..n {
            let dst = (h * n + i) * lo;
            for l in 0..lo {
                data[dst + l] = m[(i, h * lo + l)];
            }
        }
    }
    DenseTensor::from_vec(shape, data)
}

/// Plain tensor-times-matrix: `unfold_k(result) = m · unfold_k(t)`.
pub fn ttm(t: &DenseTensor, m: &CMat, k: usize) -> Result<DenseTensor> {
    if k >= t.order() || m.ncols() != t.shape[k] {
        return Err(Error::Shape(format!(
            "cannot multiply mode {k} of shape {:?} by a {}x{} matrix",
            t.shape,
            m.nrows(),
            m.ncols()
        )));
    }
    let n = t.shape[k];
    let p = m.nrows();
    let lo: usize = t.shape[..k].iter().product();
    let hi: usize = t.shape[k + 1..].iter().product();
    let mut shape = t.shape.clone();
    shape[k] = p;
    if lo == 1 {
        let x = CMat::from_column_slice(n, hi, &t.data);
        let y = matmul(m, &x);
        return DenseTensor::from_vec(&shape, y.as_slice().to_vec());
    }
    let mt = m.transpose();
    let mut data = Vec::with_capacity(lo * p * hi);
    for h in 0..hi {
        let slice = CMat::from_column_slice(lo, n, &t.data[h * lo * n..(h + 1) * lo * n]);
        data.extend_from_slice(matmul(&slice, &mt).as_slice());
    }
    DenseTensor::from_vec(&shape, data)
}

/// Conjugating mode product: `unfold_k(result) = m̄ · unfold_k(t)`.
pub fn mode_product(t: &DenseTensor, m: &CMat, k: usize) -> Result<DenseTensor> {
    ttm(t, &m.map(|v| v.conj()), k)
}

/// Elementwise product.
pub fn hadamard(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!("hadamard of shapes {:?} and {:?}", a.shape, b.shape)));
    }
    Ok(DenseTensor { shape: a.shape.clone(), data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect() })
}

// ---------------------------------------------------------------------------
// Tucker

/// Tucker tensor `G` with factors `Uᵢ`; see the module docs for the
/// conjugation convention.
#[derive(Clone, Debug)]
pub struct TuckerTensor {
    pub core: DenseTensor,
    pub factors: Vec<CMat>,
}

impl TuckerTensor {
    pub fn new(core: DenseTensor, factors: Vec<CMat>) -> Result<Self> {
        if core.order() != factors.len() {
            return Err(Error::Shape(format!("order-{} core with {} factors", core.order(), factors.len())));
        }
        for (k, u) in factors.iter().enumerate() {
            if u.ncols() != core.shape[k] {
                return Err(Error::Shape(format!("factor {k} has {} columns, core needs {}", u.ncols(), core.shape[k])));
            }
        }
        Ok(Self { core, factors })
    }

    /// Builds from bases `Wᵢ = Ūᵢ`, i.e. the dense tensor is `G ×ₖ Wₖ` in
    /// plain products.
    pub fn from_bases(core: DenseTensor, bases: Vec<CMat>) -> Result<Self> {
        Self::new(core, bases.into_iter().map(|w| w.map(|v| v.conj())).collect())
    }

    /// `Wᵢ = Ūᵢ`, the bases spanning the columns of each unfolding.
    pub fn bases(&self) -> Vec<CMat> {
        self.factors.iter().map(|u| u.map(|v| v.conj())).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape.clone()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = self.core.clone();
        for (k, u) in self.factors.iter().enumerate() {
            t = mode_product(&t, u, k).expect("factor shapes checked on construction");
        }
        t
    }

    /// Largest `‖UᵢᴴUᵢ − I‖_F` over the factors.
    pub fn orthonormality_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(|u| (u.adjoint() * u - CMat::identity(u.ncols(), u.ncols())).norm())
            .fold(0.0, f64::max)
    }
}

/// Dense reconstruction of a Tucker tensor.
pub fn tucker_to_dense(t: &TuckerTensor) -> DenseTensor {
    t.to_dense()
}

/// Leading `r` left singular vectors of `m`, completed to an orthonormal set
/// if `m` has fewer than `r` columns.
pub(crate) fn leading_left_singular(m: &CMat, r: usize) -> Result<CMat> {
    let s = svd(m)?;
    if s.u.ncols() >= r {
        return Ok(s.u.columns(0, r).into_owned());
    }
    let mut cols: Vec<_> = s.u.column_iter().map(|c| c.into_owned()).collect();
    let n = m.nrows();
    for e in 0..n {
        if cols.len() == r {
            break;
        }
        let mut v = nalgebra::DVector::<C64>::zeros(n);
        v[e] = ONE;
        for c in &cols {
            let p = c.dotc(&v);
            v.axpy(-p, c, ONE);
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / C64::from(nv));
        }
    }
    Ok(CMat::from_columns(&cols))
}

/// Truncated higher-order SVD.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerTensor> {
    if ranks.len() != t.order() {
        return Err(Error::Shape(format!("{} ranks for an order-{} tensor", ranks.len(), t.order())));
    }
    let mut bases = Vec::with_capacity(ranks.len());
    for (k, &r) in ranks.iter().enumerate() {
        if r == 0 || r > t.shape[k] {
            return Err(param("ranks", format!("rank {r} for mode {k} of extent {}", t.shape[k])));
        }
        bases.push(leading_left_singular(&t.unfold(k)?, r)?);
    }
    let mut core = t.clone();
    for (k, w) in bases.iter().enumerate() {
        core = ttm(&core, &w.adjoint(), k)?;
    }
    TuckerTensor::from_bases(core, bases)
}

// ---------------------------------------------------------------------------
// CP

/// Canonical polyadic tensor `Σᵢ σᵢ vᵢ⁽¹⁾ ∘ … ∘ vᵢ⁽ᵈ⁾`. Column `i` of
/// `factors[j]` is the unit vector `vᵢ⁽ʲ⁾`.
#[derive(Clone, Debug)]
pub struct CpTensor {
    pub weights: Vec<C64>,
    pub factors: Vec<CMat>,
}

impl CpTensor {
    /// Normalizes columns into the weights and sorts by decreasing `|σ|`.
    pub fn new(weights: Vec<C64>, factors: Vec<CMat>) -> Result<Self> {
        let s = weights.len();
        if factors.is_empty() || factors.iter().any(|f| f.ncols() != s) {
            return Err(Error::Shape(format!("CP factors do not all have {s} columns")));
        }
        let mut weights = weights;
        let mut factors = factors;
        for f in factors.iter_mut() {
            for (i, mut col) in f.column_iter_mut().enumerate() {
                let nrm = col.norm();
                if nrm > 0.0 {
                    col /= C64::from(nrm);
                    weights[i] *= nrm;
                }
            }
        }
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| weights[b].norm().partial_cmp(&weights[a].norm()).unwrap_or(std::cmp::Ordering::Equal));
        let weights = order.iter().map(|&i| weights[i]).collect();
        let factors = factors.iter().map(|f| CMat::from_fn(f.nrows(), s, |r, c| f[(r, order[c])])).collect();
        Ok(Self { weights, factors })
    }

    /// Exact CP from separable terms `(weight, [v⁽¹⁾, …, v⁽ᵈ⁾])`.
    pub fn from_terms(terms: &[(C64, Vec<Vec<C64>>)]) -> Result<Self> {
        let d = terms.first().map(|t| t.1.len()).ok_or_else(|| param("terms", "at least one term"))?;
        let dims: Vec<usize> = terms[0].1.iter().map(|v| v.len()).collect();
        let mut factors: Vec<CMat> = dims.iter().map(|&n| CMat::zeros(n, terms.len())).collect();
        for (i, (_, vs)) in terms.iter().enumerate() {
            if vs.len() != d || vs.iter().zip(&dims).any(|(v, &n)| v.len() != n) {
                return Err(Error::Shape("CP terms have inconsistent shapes".into()));
            }
            for (j, v) in vs.iter().enumerate() {
                for (r, &x) in v.iter().enumerate() {
                    factors[j][(r, i)] = x;
                }
            }
        }
        Self::new(terms.iter().map(|t| t.0).collect(), factors)
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn to_dense(&self) -> DenseTensor {
        let dims = self.dims();
        let mut out = DenseTensor::zeros(&dims);
        for (i, &w) in self.weights.iter().enumerate() {
            let mut t = DenseTensor { shape: vec![1], data: vec![w] };
            for f in &self.factors {
                t = outer(&t, f.column(i).as_slice());
            }
            out.axpy(ONE, &DenseTensor { shape: dims.clone(), data: t.data });
        }
        out
    }

    /// Appends `extra` unit columns with zero weight, so that ALS started
    /// from the result can only improve on `self`.
    pub fn padded(&self, extra: usize, seed: u64) -> Self {
        let mut g = rng(seed);
        let s = self.rank();
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let mut m = CMat::zeros(f.nrows(), s + extra);
                m.columns_mut(0, s).copy_from(f);
                for c in s..s + extra {
                    let col = random_unit(f.nrows(), &mut g);
                    m.column_mut(c).copy_from(&col);
                }
                m
            })
            .collect();
        let mut weights = self.weights.clone();
        weights.extend(std::iter::repeat_n(ZERO, extra));
        Self { weights, factors }
    }
}

fn random_unit(n: usize, g: &mut ChaCha8Rng) -> nalgebra::DVector<C64> {
    let v = nalgebra::DVector::from_fn(n, |_, _| complex_gaussian(g));
    let nrm = v.norm();
    v / C64::from(nrm)
}

/// `t ∘ v` as a tensor of one higher order (the new mode is slowest).
fn outer(t: &DenseTensor, v: &[C64]) -> DenseTensor {
    let mut data = Vec::with_capacity(t.len() * v.len());
    for &x in v {
        data.extend(t.data.iter().map(|&a| a * x));
    }
    let mut shape = t.shape.clone();
    if shape == [1] {
        shape.clear();
    }
    shape.push(v.len());
    DenseTensor { shape, data }
}

pub fn cp_to_dense(c: &CpTensor) -> DenseTensor {
    c.to_dense()
}

/// Options for [`cp_als`].
#[derive(Clone, Debug)]
pub struct CpAlsOptions {
    pub max_iters: usize,
    /// Stop once the relative error changes by less than `tol` between sweeps.
    pub tol: f64,
    pub seed: u64,
    pub init: Option<CpTensor>,
}

impl Default for CpAlsOptions {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-10, seed: 7, init: None }
    }
}

/// Outcome of [`cp_als`].
#[derive(Clone, Debug)]
pub struct CpAlsResult {
    pub cp: CpTensor,
    /// Relative reconstruction error after each sweep.
    pub error_history: Vec<f64>,
    /// False when `max_iters` was reached before the error settled.
    pub converged: bool,
}

impl CpAlsResult {
    pub fn relative_error(&self) -> f64 {
        self.error_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Khatri-Rao product of all factors except `skip`, ordered so that it
/// matches the mode-`skip` unfolding.
fn khatri_rao_except(factors: &[CMat], skip: usize) -> CMat {
    let s = factors[0].ncols();
    let rows: usize = factors.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, f)| f.nrows()).product();
    let mut out = CMat::zeros(rows, s);
    for c in 0..s {
        let mut col = vec![ONE];
        for (k, f) in factors.iter().enumerate() {
            if k == skip {
                continue;
            }
            let mut next = Vec::with_capacity(col.len() * f.nrows());
            for r in 0..f.nrows() {
                let x = f[(r, c)];
                next.extend(col.iter().map(|&a| a * x));
            }
            col = next;
        }
        out.column_mut(c).copy_from_slice(&col);
    }
    out
}

/// Moore-Penrose inverse of a Hermitian positive semidefinite matrix.
fn psd_pinv(m: &CMat) -> Result<CMat> {
    let s = svd(m)?;
    let cut = s.s.first().copied().unwrap_or(0.0) * 1e-14 * m.nrows() as f64;
    let mut vs = s.v.clone();
    for (k, mut col) in vs.column_iter_mut().enumerate() {
        let f = if s.s[k] > cut { 1.0 / s.s[k] } else { 0.0 };
        col *= C64::from(f);
    }
    Ok(matmul(&vs, &s.u.adjoint()))
}

/// Rank-`s` CP decomposition by alternating least squares.
///
/// Each sweep solves the least-squares problem for one factor matrix with the
/// others fixed, so the relative error is non-increasing up to rounding.
pub fn cp_als(t: &DenseTensor, s: usize, opts: &CpAlsOptions) -> Result<CpAlsResult> {
    if s == 0 {
        return Err(param("s", "CP rank must be at least 1"));
    }
    let d = t.order();
    let dims = t.shape.clone();
    let tnorm = t.norm();
    if tnorm == 0.0 {
        let cp = CpTensor { weights: vec![ZERO; s], factors: dims.iter().map(|&n| CMat::zeros(n, s)).collect() };
        return Ok(CpAlsResult { cp, error_history: vec![0.0], converged: true });
    }
    let (mut weights, mut factors) = match &opts.init {
        Some(init) => {
            if init.rank() != s || init.dims() != dims {
                return Err(Error::Shape("CP initial guess does not match rank or shape".into()));
            }
            (init.weights.clone(), init.factors.clone())
        }
        None => {
            let mut g = rng(opts.seed);
            let f: Vec<CMat> = dims
                .iter()
                .map(|&n| {
                    let mut m = CMat::zeros(n, s);
                    for c in 0..s {
                        m.column_mut(c).copy_from(&random_unit(n, &mut g));
                    }
                    m
                })
                .collect();
            (vec![ONE; s], f)
        }
    };
    let unfoldings: Vec<CMat> = (0..d).map(|k| t.unfold(k)).collect::<Result<_>>()?;
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        for k in 0..d {
            let kr = khatri_rao_except(&factors, k);
            let mut gram = CMat::from_element(s, s, ONE);
            for (j, f) in factors.iter().enumerate() {
                if j != k {
                    gram.component_mul_assign(&(f.adjoint() * f));
                }
            }
            // Least-squares factor: T₍ₖ₎ conj(KR) conj(Γ)⁺, weights included.
            let rhs = matmul(&unfoldings[k], &kr.map(|v| v.conj()));
            let raw = matmul(&rhs, &psd_pinv(&gram.map(|v| v.conj()))?);
            for c in 0..s {
                let nrm = raw.column(c).norm();
                if nrm > 0.0 {
                    factors[k].column_mut(c).copy_from(&(raw.column(c) / C64::from(nrm)));
                }
                weights[c] = C64::from(nrm);
            }
        }
        let cp = CpTensor { weights: weights.clone(), factors: factors.clone() };
        let err = (&cp.to_dense() - t).norm() / tnorm;
        let prev = history.last().copied();
        history.push(err);
        let settled = match prev {
            Some(p) => (p - err).abs() <= opts.tol * p.max(f64::MIN_POSITIVE),
            None => false,
        };
        if settled || err <= opts.tol {
            converged = true;
            break;
        }
    }
    let cp = CpTensor::new(weights, factors)?;
    Ok(CpAlsResult { cp, error_history: history, converged })
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<DenseTensor>();
    check::<TuckerTensor>();
    check::<CpTensor>();
    check::<DMatrix<C64>>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kron_linalg::kron;
    use crate::rng::{random_cmat, random_orthonormal};

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let n: usize = shape.iter().product();
        DenseTensor::from_vec(shape, random_cmat(n, 1, seed).as_slice().to_vec()).unwrap()
    }

    #[test]
    fn order_two_unfolding_is_the_matrix() {
        let m = random_cmat(3, 4, 1);
        let t = DenseTensor::from_matrix(&m);
        assert_eq!(t.unfold(0).unwrap(), m);
        assert_eq!(t.unfold(1).unwrap(), m.transpose());
    }

    #[test]
    fn unfolding_shapes_and_roundtrip() {
        let t = DenseTensor::from_vec(&[2, 2, 2], (1..=8).map(|v| C64::from(v as f64)).collect()).unwrap();
        let m = t.unfold(0).unwrap();
        assert_eq!(m.shape(), (2, 4));
        assert_eq!(m[(1, 0)], C64::from(2.0));
        let t3 = random_tensor(&[3, 4, 5], 2);
        for k in 0..3 {
            assert_eq!(fold(&t3.unfold(k).unwrap(), k, &[3, 4, 5]).unwrap(), t3);
        }
        assert!(t3.unfold(3).is_err());
        assert!(fold(&CMat::zeros(3, 3), 0, &[3, 4, 5]).is_err());
    }

    #[test]
    fn tucker_unfolding_identity() {
        let core = random_tensor(&[2, 3, 2], 3);
        let u: Vec<CMat> = [(3, 2), (4, 3), (5, 2)].iter().enumerate().map(|(k, &(n, r))| random_orthonormal(n, r, 10 + k as u64)).collect();
        let tk = TuckerTensor::new(core.clone(), u.clone()).unwrap();
        let dense = tk.to_dense();
        let conj = |m: &CMat| m.map(|v| v.conj());
        let want = conj(&u[0]) * core.unfold(0).unwrap() * kron(&u[2], &u[1]).adjoint();
        assert!((dense.unfold(0).unwrap() - &want).norm() < 1e-12 * want.norm());
        let want2 = conj(&u[1]) * core.unfold(1).unwrap() * kron(&u[2], &u[0]).adjoint();
        assert!((dense.unfold(1).unwrap() - &want2).norm() < 1e-12 * want2.norm());
        let want3 = conj(&u[2]) * core.unfold(2).unwrap() * kron(&u[1], &u[0]).adjoint();
        assert!((dense.unfold(2).unwrap() - &want3).norm() < 1e-12 * want3.norm());
    }

    #[test]
    fn tucker_dense_matches_triple_sum() {
        let core = random_tensor(&[3, 3, 3], 4);
        let u: Vec<CMat> = (0..3).map(|k| random_cmat(3, 3, 20 + k)).collect();
        let dense = TuckerTensor::new(core.clone(), u.clone()).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut s = ZERO;
                    for a in 0..3 {
                        for b in 0..3 {
                            for c in 0..3 {
                                s += core.get(&[a, b, c]) * u[0][(i, a)].conj() * u[1][(j, b)].conj() * u[2][(k, c)].conj();
                            }
                        }
                    }
                    assert!((dense.get(&[i, j, k]) - s).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tucker_trivial_cases() {
        let zero = TuckerTensor::new(DenseTensor::zeros(&[2, 2, 2]), (0..3).map(|k| random_orthonormal(4, 2, k)).collect()).unwrap();
        assert_eq!(zero.to_dense().norm(), 0.0);
        let g = C64::new(2.0, -1.0);
        let e1 = CMat::from_fn(3, 1, |i, _| if i == 0 { ONE } else { ZERO });
        let t = TuckerTensor::new(DenseTensor::from_vec(&[1, 1, 1], vec![g]).unwrap(), vec![e1.clone(), e1.clone(), e1]).unwrap();
        let d = t.to_dense();
        assert_eq!(d.get(&[0, 0, 0]), g);
        assert!((d.norm() - g.norm()).abs() < 1e-15);
    }

    #[test]
    fn mode_product_conjugates() {
        let t = DenseTensor::from_matrix(&random_cmat(3, 4, 5));
        let m = random_cmat(2, 3, 6);
        let out = mode_product(&t, &m, 0).unwrap().to_matrix().unwrap();
        let want = m.map(|v| v.conj()) * t.to_matrix().unwrap();
        assert!((out - want).norm() < 1e-13);
        assert_eq!(mode_product(&t, &CMat::identity(3, 3), 0).unwrap(), t);
        assert!(ttm(&t, &m, 1).is_err());
    }

    #[test]
    fn mode_products_commute() {
        let t = random_tensor(&[3, 3, 3], 7);
        let a = random_cmat(3, 3, 8);
        let b = random_cmat(3, 3, 9);
        let x = mode_product(&mode_product(&t, &a, 0).unwrap(), &b, 2).unwrap();
        let y = mode_product(&mode_product(&t, &b, 2).unwrap(), &a, 0).unwrap();
        assert!((&x - &y).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn hadamard_properties() {
        let a = random_tensor(&[3, 4, 2], 11);
        let ones = a.map(|_| ONE);
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        assert_eq!(hadamard(&a, &DenseTensor::zeros(&[3, 4, 2])).unwrap().norm(), 0.0);
        let b = random_tensor(&[3, 4, 2], 12);
        let z = hadamard(&a, &b).unwrap();
        for k in 0..3 {
            let lhs = z.unfold(k).unwrap();
            let rhs = a.unfold(k).unwrap().component_mul(&b.unfold(k).unwrap());
            assert!((lhs - rhs).norm() < 1e-14);
        }
        assert!(hadamard(&a, &DenseTensor::zeros(&[2, 4, 3])).is_err());
    }

    #[test]
    fn hosvd_exact_cases() {
        let u = |n, s| random_cmat(n, 1, s);
        let (a, b, c) = (u(4, 1), u(5, 2), u(3, 3));
        let t = DenseTensor::from_fn(&[4, 5, 3], |i| a[i[0]] * b[i[1]] * c[i[2]]);
        let h = hosvd(&t, &[1, 1, 1]).unwrap();
        assert!((&h.to_dense() - &t).norm() < 1e-12 * t.norm());
        let r = random_tensor(&[3, 4, 2], 5);
        let full = hosvd(&r, &[3, 4, 2]).unwrap();
        assert!((&full.to_dense() - &r).norm() < 1e-12 * r.norm());
        assert!(full.orthonormality_defect() < 1e-10);
        assert!(hosvd(&r, &[4, 1, 1]).is_err());
    }

    #[test]
    fn hosvd_error_within_truncation_bound() {
        let t = random_tensor(&[6, 6, 6], 6);
        let ranks = [3, 3, 3];
        let h = hosvd(&t, &ranks).unwrap();
        let err = (&h.to_dense() - &t).norm();
        let mut tail = 0.0;
        let mut best_single: f64 = 0.0;
        for k in 0..3 {
            let s = svd(&t.unfold(k).unwrap()).unwrap().s;
            let e: f64 = s[ranks[k]..].iter().map(|x| x * x).sum();
            tail += e;
            best_single = best_single.max(e.sqrt());
        }
        assert!(err <= tail.sqrt() * (1.0 + 1e-12));
        assert!(err <= 3f64.sqrt() * best_single * (1.0 + 1e-12) * 3f64.sqrt());
    }

    #[test]
    fn cp_rank_one_recovered() {
        let (a, b, c) = (random_cmat(5, 1, 1), random_cmat(4, 1, 2), random_cmat(6, 1, 3));
        let t = DenseTensor::from_fn(&[5, 4, 6], |i| a[i[0]] * b[i[1]] * c[i[2]]);
        let res = cp_als(&t, 1, &CpAlsOptions::default()).unwrap();
        assert!(res.relative_error() < 1e-10);
        let rec = res.cp.to_dense();
        assert!((&rec - &t).norm() < 1e-10 * t.norm());
        for f in &res.cp.factors {
            assert!((f.column(0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cp_rejects_rank_zero() {
        assert!(cp_als(&DenseTensor::zeros(&[2, 2, 2]), 0, &CpAlsOptions::default()).is_err());
    }

    #[test]
    fn cp_error_history_monotone() {
        let t = random_tensor(&[5, 5, 5], 9);
        let res = cp_als(&t, 4, &CpAlsOptions { max_iters: 60, tol: 0.0, ..Default::default() }).unwrap();
        for w in res.error_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", w);
        }
    }

    #[test]
    fn cp_from_terms_matches_sum() {
        let x: Vec<C64> = (0..4).map(|i| C64::from(i as f64 + 1.0)).collect();
        let y: Vec<C64> = (0..3).map(|i| C64::new(0.5, i as f64)).collect();
        let ones4 = vec![ONE; 4];
        let ones3 = vec![ONE; 3];
        let cp = CpTensor::from_terms(&[(C64::from(2.0), vec![ones4.clone(), ones3.clone()]), (ONE, vec![x.clone(), y.clone()])]).unwrap();
        let d = cp.to_dense();
        for i in 0..4 {
            for j in 0..3 {
                assert!((d.get(&[i, j]) - (C64::from(2.0) + x[i] * y[j])).norm() < 1e-13);
            }
        }
        assert!(cp.weights[0].norm() >= cp.weights[1].norm());
    }

    #[test]
    fn padded_cp_keeps_value() {
        let cp = CpTensor::from_terms(&[(ONE, vec![vec![ONE; 3], vec![ONE; 2], vec![ONE; 2]])]).unwrap();
        let p = cp.padded(2, 1);
        assert_eq!(p.rank(), 3);
        assert!((&p.to_dense() - &cp.to_dense()).norm() < 1e-15);
    }
}
