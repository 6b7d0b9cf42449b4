//! Dense complex linear algebra at desk scale.
//!
//! Everything here is plain row-major storage over [`Complex`] with no
//! external BLAS. The Hermitian eigensolver is a cyclic Jacobi method with a
//! fixed row-cyclic sweep order, so results are reproducible bit for bit.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

/// Default relative tolerance for Hermitian checks at ingest.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default relative tolerance for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-8;
/// Default relative off-diagonal threshold for the Jacobi sweeps.
pub const EIG_TOL: f64 = 1e-12;
/// Sweep budget for the Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 100;

pub(crate) const ZERO: Complex = Complex::new(0.0, 0.0);
pub(crate) const ONE: Complex = Complex::new(1.0, 0.0);

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn all_finite(xs: &[Complex]) -> bool {
    xs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CVector {
    entries: Vec<Complex>,
}

impl CVector {
    pub fn new(entries: Vec<Complex>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if !all_finite(&entries) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self { entries })
    }

    pub fn from_real(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self {
            entries: vec![ZERO; dim],
        }
    }

    /// Standard basis vector `e_index` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[index] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex] {
        &self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(c(1.0 / n, 0.0)))
    }

    pub fn scale(&self, s: Complex) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: Complex, x: &CVector) {
        assert_eq!(self.dim(), x.dim(), "axpy dimension mismatch");
        for (y, xi) in self.entries.iter_mut().zip(&x.entries) {
            *y += a * xi;
        }
    }

    pub fn distance(&self, other: &CVector) -> f64 {
        (self - other).norm()
    }

    /// Entry of largest modulus; the first one wins ties.
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in self.entries.iter().enumerate() {
            let a = z.norm();
            if a > best_abs * (1.0 + 1e-12) {
                best = i;
                best_abs = a;
            }
        }
        best
    }

    pub(crate) fn dot_unchecked(&self, other: &CVector) -> Complex {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b.conj())
            .sum()
    }
}

impl Index<usize> for CVector {
    type Output = Complex;
    fn index(&self, i: usize) -> &Complex {
        &self.entries[i]
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        CVector {
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        CVector {
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Scalar product `Σ_i u_i conj(v_i)`, conjugate-linear in the second slot.
pub fn inner(u: &CVector, v: &CVector) -> Result<Complex> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(u.dot_unchecked(v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex>>) -> Result<Self> {
        let r = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != ncols) {
            return Err(Error::DimensionMismatch {
                expected: ncols,
                found: bad.len(),
            });
        }
        Self::new(r, ncols, rows.into_iter().flatten().collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&x| c(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = c(d, 0.0);
        }
        m
    }

    /// `u v*`
    pub fn outer(u: &CVector, v: &CVector) -> Self {
        let mut m = Self::zeros(u.dim(), v.dim());
        for i in 0..u.dim() {
            for j in 0..v.dim() {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector {
            entries: (0..self.rows).map(|i| self[(i, j)]).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        CVector {
            entries: (0..self.rows)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(v.entries())
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Entrywise max norm `‖M‖_max`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |M_ij − conj(M_ji)|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex;
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// A square matrix equal to its adjoint.
///
/// Construction symmetrizes `M ← (M + M*)/2` after checking that the input was
/// Hermitian to within [`HERMITIAN_TOL`] relative to its largest entry.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tol(m, HERMITIAN_TOL)
    }

    pub fn with_tol(m: CMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let deviation = m.hermitian_deviation();
        if deviation > tol * m.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrize without a tolerance check. Callers guarantee the input is
    /// Hermitian up to rounding.
    pub(crate) fn symmetrized(mut m: CMatrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            m[(i, i)] = c(m[(i, i)].re, 0.0);
            for j in i + 1..n {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        Self(m)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self(CMatrix::from_diag(diag))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    /// Orthogonal projection `P_[v]` onto the span of a nonzero vector.
    pub fn projector(v: &CVector) -> Result<Self> {
        let u = v
            .normalized()
            .ok_or(Error::Empty("projector of zero vector"))?;
        Ok(Self::symmetrized(CMatrix::outer(&u, &u)))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(self, EIG_TOL)?.values[0])
    }
}

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<CVector>,
}

impl Eigen {
    /// `V diag(λ) V*`
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.vectors[0].dim();
        let mut m = CMatrix::zeros(n, n);
        for (&lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                let vi = v[i] * lambda;
                for j in 0..n {
                    m[(i, j)] += vi * v[j].conj();
                }
            }
        }
        m
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Sweeps run in row-cyclic order until the off-diagonal Frobenius norm drops
/// below `tol · ‖M‖_F`. Each rotation first removes the phase of `a_pq` with a
/// diagonal unitary, then applies the real symmetric Jacobi rotation.
pub fn hermitian_eig(m: &HermitianMatrix, tol: f64) -> Result<Eigen> {
    let n = m.dim();
    let mut a = m.0.clone();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius();

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let threshold = tol * scale;
    let mut converged = scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        if sweeps == MAX_SWEEPS {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / b;
                let e = phase.conj();
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b);
                let t = if tau == 0.0 {
                    1.0
                } else if tau.abs() > 1e150 {
                    0.5 / tau
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // J = [[c, s], [-s e, c e]] on the (p, q) plane.
                let j_pp = c(cs, 0.0);
                let j_pq = c(sn, 0.0);
                let j_qp = e * (-sn);
                let j_qq = e * cs;
                for r in 0..n {
                    let x = a[(r, p)];
                    let y = a[(r, q)];
                    a[(r, p)] = x * j_pp + y * j_qp;
                    a[(r, q)] = x * j_pq + y * j_qq;
                    let x = v[(r, p)];
                    let y = v[(r, q)];
                    v[(r, p)] = x * j_pp + y * j_qp;
                    v[(r, q)] = x * j_pq + y * j_qq;
                }
                for r in 0..n {
                    let x = a[(p, r)];
                    let y = a[(q, r)];
                    a[(p, r)] = j_pp.conj() * x + j_qp.conj() * y;
                    a[(q, r)] = j_pq.conj() * x + j_qq.conj() * y;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = c(a[(p, p)].re, 0.0);
                a[(q, q)] = c(a[(q, q)].re, 0.0);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps,
            off_norm: off_norm(&a),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    Ok(Eigen {
        values: order.iter().map(|&i| a[(i, i)].re).collect(),
        vectors: order.iter().map(|&i| v.column(i)).collect(),
    })
}

fn check_same_dim(vs: &[CVector]) -> Result<usize> {
    let d = vs.first().ok_or(Error::Empty("vector list"))?.dim();
    for v in vs {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.dim(),
            });
        }
    }
    Ok(d)
}

/// `G[j][k] = ⟨v_j, v_k⟩`. The lower triangle is written as the conjugate of
/// the upper one, so the result is exactly Hermitian.
pub fn gram_matrix(vs: &[CVector]) -> Result<CMatrix> {
    check_same_dim(vs)?;
    let n = vs.len();
    let mut g = CMatrix::zeros(n, n);
    for j in 0..n {
        g[(j, j)] = c(vs[j].norm_sqr(), 0.0);
        for k in j + 1..n {
            let z = vs[j].dot_unchecked(&vs[k]);
            g[(j, k)] = z;
            g[(k, j)] = z.conj();
        }
    }
    Ok(g)
}

/// Number of Gram eigenvalues above `tol · max(1, λ_max)`.
pub fn numerical_rank(vs: &[CVector], tol: f64) -> Result<usize> {
    if vs.is_empty() {
        return Ok(0);
    }
    let g = HermitianMatrix(gram_matrix(vs)?);
    let eig = hermitian_eig(&g, EIG_TOL)?;
    let top = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    Ok(eig.values.iter().filter(|&&l| l > tol * top).count())
}

/// Orthonormalized vectors together with the triangular coefficient table
/// `ortho[n] = Σ_{j≤n} coeffs[(n, j)] · input[j]`.
#[derive(Clone, Debug)]
pub struct GramSchmidt {
    pub ortho: Vec<CVector>,
    pub coeffs: CMatrix,
}

/// Classical Gram-Schmidt with one re-orthogonalization pass.
///
/// A vector whose residual norm falls below `tol` times its own norm is
/// treated as dependent and reported by index.
pub fn gram_schmidt(vs: &[CVector], tol: f64) -> Result<GramSchmidt> {
    check_same_dim(vs)?;
    let n = vs.len();
    let mut ortho: Vec<CVector> = Vec::with_capacity(n);
    let mut coeffs = CMatrix::zeros(n, n);
    for (idx, v) in vs.iter().enumerate() {
        let mut w = v.clone();
        let mut row = vec![ZERO; n];
        row[idx] = ONE;
        for _pass in 0..2 {
            for (j, xi) in ortho.iter().enumerate() {
                let h = w.dot_unchecked(xi);
                w.axpy(-h, xi);
                for (i, r) in row.iter_mut().enumerate().take(j + 1) {
                    *r -= h * coeffs[(j, i)];
                }
            }
        }
        let r = w.norm();
        if r <= tol * v.norm() || r == 0.0 {
            return Err(Error::RankDeficient { index: idx });
        }
        let inv = c(1.0 / r, 0.0);
        for (i, z) in row.into_iter().enumerate() {
            coeffs[(idx, i)] = z * inv;
        }
        ortho.push(w.scale(inv));
    }
    Ok(GramSchmidt { ortho, coeffs })
}

/// Nearest positive semidefinite matrix in Frobenius norm: negative
/// eigenvalues are clipped to zero.
pub fn psd_project(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let mut eig = hermitian_eig(m, EIG_TOL)?;
    for l in &mut eig.values {
        *l = l.max(0.0);
    }
    Ok(HermitianMatrix::symmetrized(eig.reconstruct()))
}

/// Moore-Penrose pseudo-inverse of a real `rows × cols` matrix stored
/// row-major, via `A⁺ = Aᵀ (A Aᵀ)⁺`.
pub(crate) fn real_pseudo_inverse(a: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mut aat = CMatrix::zeros(rows, rows);
    for i in 0..rows {
        for j in i..rows {
            let s: f64 = (0..cols).map(|k| a[i * cols + k] * a[j * cols + k]).sum();
            aat[(i, j)] = c(s, 0.0);
            aat[(j, i)] = c(s, 0.0);
        }
    }
    let eig = hermitian_eig(&HermitianMatrix(aat), EIG_TOL)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let cutoff = 1e-12 * top.max(f64::MIN_POSITIVE);
    // (A Aᵀ)⁺ = Σ v vᵀ / λ over the retained spectrum.
    let mut inv = vec![0.0; rows * rows];
    for (&l, v) in eig.values.iter().zip(&eig.vectors) {
        if l <= cutoff {
            continue;
        }
        for i in 0..rows {
            for j in 0..rows {
                inv[i * rows + j] += (v[i] * v[j].conj()).re / l;
            }
        }
    }
    let mut out = vec![0.0; cols * rows];
    for k in 0..cols {
        for j in 0..rows {
            out[k * rows + j] = (0..rows).map(|i| a[i * cols + k] * inv[i * rows + j]).sum();
        }
    }
    Ok(out)
}
