//! Complex linear-algebra kernels: vec identities, Kronecker-sum operators,
//! dense/banded/block direct solvers, QR and SVD.
//!
//! Heavy dense kernels (LU, SVD, large products) and the sparse LU behind
//! [`full_solve`] are delegated to `faer`; the structured solvers are local.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef};

use crate::error::{param, Error, Result};
use crate::{CMat, CVec, C64, ONE, ZERO};

/// Default cap on the dimension of explicitly assembled dense operators.
pub const DEFAULT_DENSE_CAP: usize = 4096;
/// Default cap on the number of unknowns accepted by [`full_solve`].
pub const DEFAULT_FULL_SOLVE_CAP: usize = 600_000;

// ---------------------------------------------------------------------------
// faer bridge

pub(crate) fn faer_ref(m: &CMat) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

pub(crate) fn from_faer(m: MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Matrix product `a · b`, dispatched to `faer` for anything non-trivial.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < 4096 {
        return a * b;
    }
    from_faer((faer_ref(a) * faer_ref(b)).as_ref())
}

/// `aᴴ · b`.
pub fn matmul_adj(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows(), "matmul_adj: inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < 4096 {
        return a.adjoint() * b;
    }
    from_faer((faer_ref(a).adjoint() * faer_ref(b)).as_ref())
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// vec identities

/// Column-major stacking of the columns of `m`.
pub fn vec(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if rows * cols != v.len() {
        return Err(Error::Shape(format!(
            "cannot reshape a vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// Dense Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (p, q) = b.shape();
    CMat::from_fn(a.nrows() * p, a.ncols() * q, |i, j| a[(i / p, j / q)] * b[(i % p, j % q)])
}

// ---------------------------------------------------------------------------
// Tridiagonal matrices

/// Complex tridiagonal matrix. `lower[i]` is entry `(i+1, i)` and `upper[i]`
/// is entry `(i, i+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<C64>,
    pub diag: Vec<C64>,
    pub upper: Vec<C64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<C64>, diag: Vec<C64>, upper: Vec<C64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::Shape(format!(
                "tridiagonal bands of length {}/{}/{}",
                lower.len(),
                n,
                upper.len()
            )));
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn identity(n: usize) -> Self {
        Self { lower: vec![ZERO; n - 1], diag: vec![ONE; n], upper: vec![ZERO; n - 1] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.lower[j]
        } else if j == i + 1 {
            self.upper[i]
        } else {
            ZERO
        }
    }

    pub fn transpose(&self) -> Self {
        Self { lower: self.upper.clone(), diag: self.diag.clone(), upper: self.lower.clone() }
    }

    /// `alpha · self + shift · I`.
    pub fn affine(&self, alpha: C64, shift: C64) -> Self {
        Self {
            lower: self.lower.iter().map(|&v| alpha * v).collect(),
            diag: self.diag.iter().map(|&v| alpha * v + shift).collect(),
            upper: self.upper.iter().map(|&v| alpha * v).collect(),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `self · x` for a matrix `x`.
    pub fn mul_left(&self, x: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(x.nrows(), n);
        let mut out = CMat::zeros(n, x.ncols());
        for (cin, mut cout) in x.column_iter().zip(out.column_iter_mut()) {
            for i in 0..n {
                let mut s = self.diag[i] * cin[i];
                if i > 0 {
                    s += self.lower[i - 1] * cin[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * cin[i + 1];
                }
                cout[i] = s;
            }
        }
        out
    }

    /// `x · selfᵀ`.
    pub fn mul_right_transpose(&self, x: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(x.ncols(), n);
        let mut out = CMat::zeros(x.nrows(), n);
        for j in 0..n {
            let mut col = out.column_mut(j);
            col.axpy(self.diag[j], &x.column(j), ZERO);
            if j > 0 {
                col.axpy(self.lower[j - 1], &x.column(j - 1), ONE);
            }
            if j + 1 < n {
                col.axpy(self.upper[j], &x.column(j + 1), ONE);
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// Nonzero pattern as `(row, col, value)` triples.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                out.push((i, i - 1, self.lower[i - 1]));
            }
            out.push((i, i, self.diag[i]));
            if i + 1 < n {
                out.push((i, i + 1, self.upper[i]));
            }
        }
        out
    }

    /// Direct solve via the banded LU (partial pivoting).
    pub fn solve(&self, b: &CVec) -> Result<CVec> {
        let n = self.dim();
        let mut band = BandedMatrix::zeros(n, 1, 1);
        for (i, j, v) in self.entries() {
            band.set(i, j, v)?;
        }
        band.factor()?.solve(b)
    }
}

// ---------------------------------------------------------------------------
// Kronecker-sum operators

/// One Kronecker factor of an operator term.
#[derive(Clone, Debug)]
pub enum Factor {
    Identity(usize),
    Tridiagonal(Tridiagonal),
    Dense(CMat),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Tridiagonal(t) => t.dim(),
            Factor::Dense(m) => m.nrows(),
        }
    }

    fn is_square(&self) -> bool {
        match self {
            Factor::Dense(m) => m.is_square(),
            _ => true,
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Factor::Identity(n) => CMat::identity(*n, *n),
            Factor::Tridiagonal(t) => t.to_dense(),
            Factor::Dense(m) => m.clone(),
        }
    }

    fn entries(&self) -> Vec<(usize, usize, C64)> {
        match self {
            Factor::Identity(n) => (0..*n).map(|i| (i, i, ONE)).collect(),
            Factor::Tridiagonal(t) => t.entries(),
            Factor::Dense(m) => {
                let mut out = Vec::with_capacity(m.len());
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != ZERO {
                            out.push((i, j, m[(i, j)]));
                        }
                    }
                }
                out
            }
        }
    }
}

/// Applies `factor` along `mode` of a column-major tensor with shape `dims`.
pub(crate) fn apply_along_mode(x: &[C64], dims: &[usize], mode: usize, factor: &Factor) -> Vec<C64> {
    let n = dims[mode];
    let lo: usize = dims[..mode].iter().product();
    let hi: usize = dims[mode + 1..].iter().product();
    match factor {
        Factor::Identity(_) => x.to_vec(),
        Factor::Tridiagonal(t) => {
            let mut out = vec![ZERO; x.len()];
            for h in 0..hi {
                let base = h * n * lo;
                for i in 0..n {
                    let row = base + i * lo;
                    for l in 0..lo {
                        let mut s = t.diag[i] * x[row + l];
                        if i > 0 {
                            s += t.lower[i - 1] * x[row - lo + l];
                        }
                        if i + 1 < n {
                            s += t.upper[i] * x[row + lo + l];
                        }
                        out[row + l] = s;
                    }
                }
            }
            out
        }
        Factor::Dense(m) => {
            let mut out = vec![ZERO; x.len()];
            for h in 0..hi {
                let base = h * n * lo;
                for i in 0..n {
                    for j in 0..n {
                        let a = m[(i, j)];
                        if a == ZERO {
                            continue;
                        }
                        let (ri, rj) = (base + i * lo, base + j * lo);
                        for l in 0..lo {
                            out[ri + l] += a * x[rj + l];
                        }
                    }
                }
            }
            out
        }
    }
}

/// Kronecker product term `c · (F_d ⊗ … ⊗ F_1)`; `factors[0]` acts on the
/// fastest-varying index.
#[derive(Clone, Debug)]
pub struct KronTerm {
    pub coefficient: C64,
    pub factors: Vec<Factor>,
}

/// Sum of Kronecker product terms plus an optional diagonal.
///
/// For the 2D Helmholtz operator the terms are `I ⊗ (−Dxx)` and
/// `(−Dyy) ⊗ I`, and the diagonal is `−vec(K)`.
#[derive(Clone, Debug)]
pub struct KronSumOperator {
    dims: Vec<usize>,
    terms: Vec<KronTerm>,
    diagonal: Option<CVec>,
}

impl KronSumOperator {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims, terms: Vec::new(), diagonal: None }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn diagonal(&self) -> Option<&CVec> {
        self.diagonal.as_ref()
    }

    /// Adds `coefficient · (factors[d-1] ⊗ … ⊗ factors[0])`.
    pub fn add_term(&mut self, coefficient: C64, factors: Vec<Factor>) -> Result<()> {
        if factors.len() != self.dims.len() {
            return Err(Error::Shape(format!(
                "term has {} factors, operator has {} modes",
                factors.len(),
                self.dims.len()
            )));
        }
        for (k, f) in factors.iter().enumerate() {
            if !f.is_square() || f.dim() != self.dims[k] {
                return Err(Error::Shape(format!(
                    "factor {k} has dimension {}, expected square {}",
                    f.dim(),
                    self.dims[k]
                )));
            }
        }
        self.terms.push(KronTerm { coefficient, factors });
        Ok(())
    }

    /// Adds the 2D pair `left ⊗ right` (`right` acts on the row index).
    pub fn add_pair(&mut self, left: Factor, right: Factor) -> Result<()> {
        self.add_term(ONE, vec![right, left])
    }

    /// Adds `diag` to the diagonal part.
    pub fn add_diagonal(&mut self, diag: &CVec) -> Result<()> {
        if diag.len() != self.dim() {
            return Err(Error::Shape(format!(
                "diagonal of length {} for operator of dimension {}",
                diag.len(),
                self.dim()
            )));
        }
        match &mut self.diagonal {
            Some(d) => *d += diag,
            None => self.diagonal = Some(diag.clone()),
        }
        Ok(())
    }

    /// Operator action without forming any Kronecker product.
    pub fn apply(&self, x: &CVec) -> Result<CVec> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::Shape(format!("vector of length {} for operator of dimension {n}", x.len())));
        }
        let mut y = match &self.diagonal {
            Some(d) => d.component_mul(x),
            None => CVec::zeros(n),
        };
        for term in &self.terms {
            let mut cur: Vec<C64> = x.as_slice().to_vec();
            for (mode, f) in term.factors.iter().enumerate() {
                if !matches!(f, Factor::Identity(_)) {
                    cur = apply_along_mode(&cur, &self.dims, mode, f);
                }
            }
            for (yi, ci) in y.iter_mut().zip(cur) {
                *yi += term.coefficient * ci;
            }
        }
        Ok(y)
    }

    /// Coordinate-format entries, duplicates merged.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut all = Vec::new();
        for term in &self.terms {
            let mut acc: Vec<(usize, usize, C64)> = vec![(0, 0, term.coefficient)];
            let mut stride = 1;
            for (mode, f) in term.factors.iter().enumerate() {
                let ent = f.entries();
                let mut next = Vec::with_capacity(acc.len() * ent.len());
                for &(r, c, v) in &acc {
                    for &(fr, fc, fv) in &ent {
                        next.push((r + fr * stride, c + fc * stride, v * fv));
                    }
                }
                acc = next;
                stride *= self.dims[mode];
            }
            all.extend(acc);
        }
        if let Some(d) = &self.diagonal {
            all.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        }
        all.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(all.len());
        for (r, c, v) in all {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged
    }

    /// Explicit dense matrix; only for oracles.
    pub fn assemble_dense(&self, cap: usize) -> Result<CMat> {
        let n = self.dim();
        if n > cap {
            return Err(Error::DimensionCap { requested: n, cap, hint: "dense assembly is an oracle for small grids" });
        }
        let mut m = CMat::zeros(n, n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        Ok(m)
    }
}

/// Sparse direct solve of `op · x = rhs` on the full grid.
pub fn full_solve(op: &KronSumOperator, rhs: &CVec, cap: usize) -> Result<CVec> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::Shape(format!("right-hand side of length {} for dimension {n}", rhs.len())));
    }
    if n > cap {
        return Err(Error::DimensionCap {
            requested: n,
            cap,
            hint: "use the low-rank solvers for grids of this size",
        });
    }
    if rhs.iter().all(|v| *v == ZERO) {
        return Ok(CVec::zeros(n));
    }
    let trip: Vec<Triplet<usize, usize, C64>> =
        op.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Shape(format!("sparse assembly failed: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::Singular { context: format!("full_solve ({e:?})"), pivot: 0.0 })?;
    let b = Mat::<C64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let sol = CVec::from_fn(n, |i, _| x[(i, 0)]);
    let res = (op.apply(&sol)? - rhs).norm() / rhs.norm();
    if !res.is_finite() || res > 1e-8 {
        return Err(Error::Inaccurate { context: "full_solve".into(), residual: res });
    }
    Ok(sol)
}

// ---------------------------------------------------------------------------
// Dense LU

/// LU factorization with partial pivoting (faer) plus a pivot-size check.
pub struct DenseLu {
    lu: faer::linalg::solvers::PartialPivLu<C64>,
    n: usize,
}

impl DenseLu {
    pub fn new(a: &CMat, context: &str) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("{context}: LU of a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let lu = faer_ref(a).partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let p = u[(i, i)].norm();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if n > 0 && (!lo.is_finite() || !hi.is_finite() || lo <= hi * (n as f64) * f64::EPSILON || hi == 0.0) {
            return Err(Error::Singular { context: context.to_string(), pivot: lo });
        }
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        let rhs = Mat::<C64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        CVec::from_fn(self.n, |i, _| x[(i, 0)])
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        from_faer(self.lu.solve(faer_ref(b)).as_ref())
    }

    pub fn inverse(&self) -> CMat {
        from_faer(self.lu.inverse().as_ref())
    }
}

/// Solves `a · x = b` by LU with partial pivoting.
pub fn solve_dense(a: &CMat, b: &CVec) -> Result<CVec> {
    if b.len() != a.nrows() {
        return Err(Error::Shape(format!("rhs of length {} for a {}x{} matrix", b.len(), a.nrows(), a.ncols())));
    }
    Ok(DenseLu::new(a, "solve_dense")?.solve(b))
}

// ---------------------------------------------------------------------------
// Banded LU

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill created by partial pivoting.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, data: vec![ZERO; ld * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + self.kl + self.ku + i - j
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n || i > j + self.kl || j > i + self.ku {
            return Err(Error::Band { row: i, col: j, lower: self.kl, upper: self.ku });
        }
        Ok(())
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        self.check(i, j)?;
        let k = self.idx(i, j);
        self.data[k] = v;
        Ok(())
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        self.check(i, j)?;
        let k = self.idx(i, j);
        self.data[k] += v;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.check(i, j).is_err() {
            ZERO
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Largest `|i − j|` over nonzero entries.
    pub fn measured_bandwidth(&self) -> usize {
        let mut w = 0;
        for j in 0..self.n {
            for i in j.saturating_sub(self.ku)..(j + self.kl + 1).min(self.n) {
                if self.data[self.idx(i, j)] != ZERO {
                    w = w.max(i.abs_diff(j));
                }
            }
        }
        w
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.n);
        for j in 0..self.n {
            for i in j.saturating_sub(self.ku)..(j + self.kl + 1).min(self.n) {
                y[i] += self.data[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    /// In-place LU with partial pivoting; cost O(n·kl·(kl+ku)).
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.idx(j, j)].norm();
            for i in j + 1..=last {
                let v = self.data[self.idx(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = p;
            max_pivot = max_pivot.max(best);
            min_pivot = min_pivot.min(best);
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { context: "banded LU".into(), pivot: best });
            }
            let cend = (j + kl + ku + 1).min(n);
            if p != j {
                for c in j..cend {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(j, j)];
            for i in j + 1..=last {
                let k = self.idx(i, j);
                let l = self.data[k] / d;
                self.data[k] = l;
                if l == ZERO {
                    continue;
                }
                for c in j + 1..cend {
                    let u = self.data[self.idx(j, c)];
                    let t = self.idx(i, c);
                    self.data[t] -= l * u;
                }
            }
        }
        if min_pivot <= max_pivot * (n as f64) * f64::EPSILON {
            return Err(Error::Singular { context: "banded LU".into(), pivot: min_pivot });
        }
        Ok(BandedLu { lu: self, piv })
    }
}

/// Factorized banded matrix.
#[derive(Clone, Debug)]
pub struct BandedLu {
    lu: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &CVec) -> Result<CVec> {
        let a = &self.lu;
        let n = a.n;
        if b.len() != n {
            return Err(Error::Shape(format!("rhs of length {} for banded system of size {n}", b.len())));
        }
        let mut x = b.clone();
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                x.swap_rows(j, p);
            }
            let xj = x[j];
            if xj != ZERO {
                for i in j + 1..(j + a.kl + 1).min(n) {
                    x[i] -= a.data[a.idx(i, j)] * xj;
                }
            }
        }
        let w = a.kl + a.ku;
        for j in (0..n).rev() {
            let xj = x[j] / a.data[a.idx(j, j)];
            x[j] = xj;
            for i in j.saturating_sub(w)..j {
                x[i] -= a.data[a.idx(i, j)] * xj;
            }
        }
        Ok(x)
    }
}

/// Solves a banded system.
pub fn solve_banded(a: &BandedMatrix, b: &CVec) -> Result<CVec> {
    a.clone().factor()?.solve(b)
}

// ---------------------------------------------------------------------------
// Block tridiagonal systems

/// Block tridiagonal matrix whose off-diagonal blocks are scalar multiples of
/// the identity: block `(i+1, i)` is `lower[i]·I` and `(i, i+1)` is
/// `upper[i]·I`. This is the shape of every interleaved factor system, where
/// the off-diagonal coupling comes from one tridiagonal derivative matrix.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    pub diag: Vec<CMat>,
    pub lower: Vec<C64>,
    pub upper: Vec<C64>,
}

impl BlockTridiagonal {
    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |b| b.nrows())
    }

    pub fn to_dense(&self) -> CMat {
        let (nb, b) = (self.diag.len(), self.block_size());
        let mut m = CMat::zeros(nb * b, nb * b);
        for (k, d) in self.diag.iter().enumerate() {
            m.view_mut((k * b, k * b), (b, b)).copy_from(d);
            if k + 1 < nb {
                for t in 0..b {
                    m[((k + 1) * b + t, k * b + t)] = self.lower[k];
                    m[(k * b + t, (k + 1) * b + t)] = self.upper[k];
                }
            }
        }
        m
    }

    /// Block Thomas elimination; the Schur complements stay dense.
    pub fn solve(&self, rhs: &CVec, context: &str) -> Result<CVec> {
        let (nb, b) = (self.diag.len(), self.block_size());
        if rhs.len() != nb * b || self.lower.len() + 1 != nb || self.upper.len() + 1 != nb {
            return Err(Error::Shape(format!("{context}: block system layout does not match rhs")));
        }
        let mut inverses: Vec<CMat> = Vec::with_capacity(nb);
        let mut y: Vec<CVec> = Vec::with_capacity(nb);
        for k in 0..nb {
            let mut s = self.diag[k].clone();
            let mut yk = CVec::from_column_slice(&rhs.as_slice()[k * b..(k + 1) * b]);
            if k > 0 {
                let prev = &inverses[k - 1];
                s.zip_apply(prev, |a, p| *a -= self.lower[k - 1] * self.upper[k - 1] * p);
                let t = prev * &y[k - 1];
                yk.axpy(-self.lower[k - 1], &t, ONE);
            }
            let lu = DenseLu::new(&s, &format!("{context}, block {k}"))?;
            inverses.push(lu.inverse());
            y.push(yk);
        }
        let mut x = CVec::zeros(nb * b);
        let mut next: Option<CVec> = None;
        for k in (0..nb).rev() {
            let mut yk = y[k].clone();
            if let Some(xn) = &next {
                yk.axpy(-self.upper[k], xn, ONE);
            }
            let xk = &inverses[k] * yk;
            x.rows_mut(k * b, b).copy_from(&xk);
            next = Some(xk);
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------------------
// QR

/// Thin QR factorization with diagnostics.
#[derive(Clone, Debug)]
pub struct Qr {
    pub q: CMat,
    pub r: CMat,
    /// Smallest `|R(k,k)|` relative to the largest.
    pub min_relative_diag: f64,
    pub rank_deficient: bool,
}

const RANK_TOL: f64 = 1e-10;

/// Householder reflector `H = I − τ v vᴴ` with `Hᴴ x = β e₁`, `β` real and
/// `v[0] = 1` (the LAPACK `zlarfg` convention).
fn householder(x: &[C64]) -> (Vec<C64>, C64, C64) {
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 {
        return (v, ZERO, ZERO);
    }
    let x0 = x[0];
    let beta = C64::from(if x0.re >= 0.0 { -norm } else { norm });
    let scale = ONE / (x0 - beta);
    for vi in v.iter_mut().skip(1) {
        *vi *= scale;
    }
    v[0] = ONE;
    (v, (beta - x0) / beta, beta)
}

fn householder_qr(a: &CMat, pivot: bool) -> (CMat, CMat, Vec<usize>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut refl: Vec<(Vec<C64>, C64)> = Vec::with_capacity(k);
    for j in 0..k {
        if pivot {
            let mut best = j;
            let mut bnorm = -1.0;
            for c in j..n {
                let s: f64 = (j..m).map(|i| w[(i, c)].norm_sqr()).sum();
                if s > bnorm {
                    bnorm = s;
                    best = c;
                }
            }
            if best != j {
                w.swap_columns(j, best);
                perm.swap(j, best);
            }
        }
        let x: Vec<C64> = (j..m).map(|i| w[(i, j)]).collect();
        let (v, tau, beta) = householder(&x);
        if tau != ZERO {
            for c in j + 1..n {
                let mut s = ZERO;
                for (t, vi) in v.iter().enumerate() {
                    s += vi.conj() * w[(j + t, c)];
                }
                s *= tau.conj();
                for (t, vi) in v.iter().enumerate() {
                    w[(j + t, c)] -= *vi * s;
                }
            }
            w[(j, j)] = beta;
            for i in j + 1..m {
                w[(i, j)] = ZERO;
            }
        }
        refl.push((v, tau));
    }
    let r = CMat::from_fn(k, n, |i, j| if i <= j { w[(i, j)] } else { ZERO });
    let mut q = CMat::identity(m, k);
    for (j, (v, tau)) in refl.iter().enumerate().rev() {
        if *tau == ZERO {
            continue;
        }
        for c in 0..k {
            let mut s = ZERO;
            for (t, vi) in v.iter().enumerate() {
                s += vi.conj() * q[(j + t, c)];
            }
            s *= *tau;
            for (t, vi) in v.iter().enumerate() {
                q[(j + t, c)] -= *vi * s;
            }
        }
    }
    (q, r, perm)
}

/// Makes the diagonal of `r` real and nonnegative by moving phases into `q`.
fn normalize_phases(q: &mut CMat, r: &mut CMat) {
    for k in 0..r.nrows().min(r.ncols()) {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            q.column_mut(k).scale_mut_complex(ph);
            r.row_mut(k).scale_mut_complex(ph.conj());
        }
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: C64);
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::StorageMut<C64, R, C>> ScaleComplex
    for nalgebra::Matrix<C64, R, C, S>
{
    fn scale_mut_complex(&mut self, s: C64) {
        for v in self.iter_mut() {
            *v *= s;
        }
    }
}

/// Thin Householder QR of an `n×r` matrix with `n ≥ r`. Rank deficiency is
/// reported in the diagnostics, never as an error; `Q` is orthonormal even for
/// zero columns.
pub fn thin_qr(a: &CMat) -> Result<Qr> {
    if a.nrows() < a.ncols() {
        return Err(param("a", format!("thin QR needs rows >= cols, got {}x{}", a.nrows(), a.ncols())));
    }
    let (mut q, mut r, _) = householder_qr(a, false);
    normalize_phases(&mut q, &mut r);
    let diag: Vec<f64> = (0..r.ncols()).map(|k| r[(k, k)].norm()).collect();
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let rel = if hi > 0.0 { lo / hi } else if diag.is_empty() { 1.0 } else { 0.0 };
    Ok(Qr { q, r, min_relative_diag: rel, rank_deficient: rel < RANK_TOL })
}

/// Column-pivoted QR keeping the `keep` dominant pivot columns: returns an
/// orthonormal `n×keep` basis and the chosen column indices.
pub fn pivoted_qr_basis(a: &CMat, keep: usize) -> Result<(CMat, Vec<usize>)> {
    if keep > a.nrows().min(a.ncols()) {
        return Err(param("keep", format!("cannot keep {keep} columns of a {}x{} matrix", a.nrows(), a.ncols())));
    }
    let (q, _, perm) = householder_qr(a, true);
    Ok((q.columns(0, keep).into_owned(), perm[..keep].to_vec()))
}

// ---------------------------------------------------------------------------
// SVD

/// Singular value decomposition `A = U Σ Vᴴ` with `σ` sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    /// Best rank-`r` approximation.
    pub fn truncate(&self, r: usize) -> CMat {
        let r = r.min(self.s.len());
        let mut us = self.u.columns(0, r).into_owned();
        for (k, mut c) in us.column_iter_mut().enumerate() {
            c *= C64::from(self.s[k]);
        }
        matmul(&us, &self.v.columns(0, r).adjoint())
    }
}

/// Thin SVD of any complex matrix.
pub fn svd(a: &CMat) -> Result<Svd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Svd { u: CMat::zeros(m, 0), s: vec![], v: CMat::zeros(n, 0) });
    }
    let dec = faer_ref(a)
        .thin_svd()
        .map_err(|e| Error::Inaccurate { context: format!("svd ({e:?})"), residual: f64::NAN })?;
    let s_raw = dec.S().column_vector();
    let k = m.min(n);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s_raw[j].re.partial_cmp(&s_raw[i].re).unwrap_or(std::cmp::Ordering::Equal));
    let (fu, fv) = (dec.U(), dec.V());
    let u = CMat::from_fn(m, k, |i, j| fu[(i, order[j])]);
    let v = CMat::from_fn(n, k, |i, j| fv[(i, order[j])]);
    let s = order.iter().map(|&j| s_raw[j].re.max(0.0)).collect();
    Ok(Svd { u, s, v })
}
