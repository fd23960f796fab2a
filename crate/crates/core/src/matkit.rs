//! Dense complex matrix kernel.
//!
//! Everything here works on [`CMatrix`], a heap-allocated complex matrix. The
//! hermitian eigendecomposition [`eigh`] is the workhorse: square roots,
//! operator norms and positivity checks all go through it. Rank decisions use
//! singular-value cutoffs relative to the largest singular value.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;

/// Default relative tolerance for hermiticity and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Tolerance on the Gram matrix of a [`Frame`].
pub const FRAME_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Builds a real diagonal matrix.
pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    let mut m = zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = c64(*v, 0.0);
    }
    m
}

/// Builds a matrix from real row-major rows.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    CMatrix::from_fn(r, c, |i, j| c64(rows[i][j], 0.0))
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c64(0.5, 0.0)
}

/// Largest absolute entry of `a - a*`.
pub fn asymmetry(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && asymmetry(a) <= tol * max_abs(a).max(1.0)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_square(a: &CMatrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() })
    }
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Commutator `ab - ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Integer power by repeated squaring; `k = 0` gives the identity.
pub fn matrix_power(a: &CMatrix, k: usize) -> CMatrix {
    let mut result = identity(a.nrows());
    let mut base = a.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Hermitian eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Rebuilds `V f(Λ) V*`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let s = c64(f(lambda), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition of the hermitian part of `a`.
///
/// Eigenvalues come out in descending order; each eigenvector has its first
/// non-negligible component rotated to be real and positive.
pub fn eigh(a: &CMatrix) -> Eigh {
    let n = a.nrows();
    if n == 0 {
        return Eigh { values: vec![], vectors: zeros(0, 0) };
    }
    let h = hermitian_part(a);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let mut vectors = zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let v = eig.eigenvectors.column(src);
        let vmax = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let phase = v
            .iter()
            .find(|z| z.norm() > 1e-10 * vmax.max(f64::MIN_POSITIVE))
            .map(|z| z.conj() / z.norm())
            .unwrap_or(c64(1.0, 0.0));
        for i in 0..n {
            vectors[(i, col)] = v[i] * phase;
        }
    }
    Eigh { values, vectors }
}

fn psd_scale(eigen: &Eigh) -> f64 {
    eigen.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

fn is_real_diagonal(a: &CMatrix) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| if i == j { a[(i, i)].im == 0.0 } else { a[(i, j)] == c64(0.0, 0.0) }))
}

/// Minimum eigenvalue of the hermitian part of `a`.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    eigh(a).min()
}

/// Checks positivity: hermitian within `tol` and eigenvalues `>= -tol` (relative).
pub fn is_psd(a: &CMatrix, tol: f64) -> bool {
    if !is_hermitian(a, tol) {
        return false;
    }
    let e = eigh(a);
    e.min() >= -tol * psd_scale(&e)
}

/// Eigenvalues at or below this (relative) are treated as zero before taking
/// square roots, so rounding noise of size `ε` does not become `√ε`.
pub const SQRT_FLOOR: f64 = 1e-13;

/// Square root of a hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-tol, SQRT_FLOOR·scale]` are clipped to zero. Real
/// diagonal inputs are handled entrywise, so `psd_sqrt(I) == I` bit for bit.
pub fn psd_sqrt(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    ensure_square(a)?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    if !is_hermitian(a, tol) {
        return Err(Error::NotHermitian { asymmetry: asymmetry(a) });
    }
    if is_real_diagonal(a) {
        let scale = (0..a.nrows()).fold(1.0_f64, |m, i| m.max(a[(i, i)].re.abs()));
        let mut r = a.clone();
        for i in 0..a.nrows() {
            let v = a[(i, i)].re;
            if v < -tol * scale {
                return Err(Error::NotPsd { min_eigenvalue: v });
            }
            r[(i, i)] = c64(v.max(0.0).sqrt(), 0.0);
        }
        return Ok(r);
    }
    let e = eigh(a);
    if e.min() < -tol * psd_scale(&e) {
        return Err(Error::NotPsd { min_eigenvalue: e.min() });
    }
    let floor = SQRT_FLOOR * psd_scale(&e);
    Ok(hermitian_part(&e.reconstruct_with(|v| if v > floor { v.sqrt() } else { 0.0 })))
}

/// Absolute value `|a| = (a* a)^{1/2}`.
pub fn abs(a: &CMatrix) -> CMatrix {
    let p = a.adjoint() * a;
    let e = eigh(&p);
    let floor = SQRT_FLOOR * psd_scale(&e);
    hermitian_part(&e.reconstruct_with(|v| if v > floor { v.sqrt() } else { 0.0 }))
}

/// Largest singular value, computed from the top eigenvalue of `a* a`.
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let g = if a.nrows() >= a.ncols() { a.adjoint() * a } else { a * a.adjoint() };
    eigh(&g).max().max(0.0).sqrt()
}

/// Singular value decomposition with singular values sorted descending.
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided Jacobi; accurate on rank-deficient input.
pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = (a.nrows(), a.ncols());
    if m.min(n) == 0 {
        return Svd { u: zeros(m, 0), singular_values: vec![], v: zeros(n, 0) };
    }
    if m < n {
        let t = svd(&a.adjoint());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let mut w = a.clone();
    let mut v = identity(n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s, phase);
                rotate_columns(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let top = norms[order[0]];
    let cutoff = top * f64::EPSILON * (m.max(n) as f64);
    let kept = order.iter().take_while(|&&j| norms[j] > cutoff && norms[j] > 0.0).count();
    let mut u = CMatrix::from_fn(m, kept, |i, c| w[(i, order[c])] / norms[order[c]]);
    if kept < n {
        let extra = orthonormal_completion(&u);
        u = concat_columns(&u, &extra.columns(0, n - kept).into_owned());
    }
    Svd { u, singular_values: order.iter().map(|&j| norms[j]).collect(), v: CMatrix::from_fn(n, n, |i, c| v[(i, order[c])]) }
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Columns `p, q` of `x` become `c x_p − s e^{-iφ} x_q` and `s x_p + c e^{-iφ} x_q`.
fn rotate_columns(x: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for i in 0..x.nrows() {
        let (xp, xq) = (x[(i, p)], x[(i, q)] * phase);
        x[(i, p)] = xp * c - xq * s;
        x[(i, q)] = xp * s + xq * c;
    }
}

/// Numerical rank with cutoff `rel_tol * sigma_max`.
pub fn rank(a: &CMatrix, rel_tol: f64) -> usize {
    let s = svd(a);
    let top = s.singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.singular_values.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Extends the orthonormal columns of `q` to a basis, drawing candidates from
/// the standard basis in order (Gram-Schmidt, two passes).
pub fn orthonormal_completion(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let missing = n.saturating_sub(q.ncols());
    let mut basis = q.clone();
    let mut added = zeros(n, 0);
    let threshold = 0.5 / (n.max(1) as f64).sqrt();
    for i in 0..n {
        if added.ncols() == missing {
            break;
        }
        let mut v = zeros(n, 1);
        v[(i, 0)] = c64(1.0, 0.0);
        for _ in 0..2 {
            let proj = &basis * (basis.adjoint() * &v);
            v -= proj;
        }
        let norm = v.norm();
        if norm > threshold {
            v /= c64(norm, 0.0);
            basis = concat_columns(&basis, &v);
            added = concat_columns(&added, &v);
        }
    }
    added
}

pub(crate) fn concat_columns(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.nrows().max(b.nrows());
    let mut out = zeros(n, a.ncols() + b.ncols());
    if a.ncols() > 0 {
        out.columns_mut(0, a.ncols()).copy_from(a);
    }
    if b.ncols() > 0 {
        out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    }
    out
}

/// Polar factors `a = u p`.
#[derive(Debug, Clone)]
pub struct Polar {
    pub unitary: CMatrix,
    pub positive: CMatrix,
}

/// Polar decomposition of a square matrix.
///
/// On the kernel of `a` the unitary factor maps the kernel's right singular
/// vectors onto a Gram-Schmidt completion of the range.
pub fn polar_decompose(a: &CMatrix) -> Result<Polar> {
    ensure_square(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Polar { unitary: zeros(0, 0), positive: zeros(0, 0) });
    }
    let s = svd(a);
    let top = s.singular_values[0];
    let r = if top == 0.0 { 0 } else { s.singular_values.iter().filter(|&&v| v > 1e-12 * top).count() };
    let w_r = s.u.columns(0, r).into_owned();
    let v_r = s.v.columns(0, r).into_owned();
    let v_c = s.v.columns(r, n - r).into_owned();
    let completion = orthonormal_completion(&w_r);
    let unitary = &w_r * v_r.adjoint() + &completion * v_c.adjoint();
    let positive = hermitian_part(
        &(&s.v
            * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, s.singular_values.iter().map(|&x| c64(x, 0.0))))
            * s.v.adjoint()),
    );
    Ok(Polar { unitary, positive })
}

/// Orthonormal basis of a subspace of `C^n`, stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    ambient_dim: usize,
    columns: CMatrix,
}

impl Frame {
    /// Wraps columns that are already orthonormal (Gram error at most 1e-10).
    pub fn from_orthonormal(columns: CMatrix) -> Result<Frame> {
        let k = columns.ncols();
        let gram = columns.adjoint() * &columns;
        let err = max_abs(&(gram - identity(k)));
        if err > FRAME_TOL {
            return Err(Error::CertificateInfeasible(format!("frame columns are not orthonormal (gram error {err:.3e})")));
        }
        Ok(Frame { ambient_dim: columns.nrows(), columns })
    }

    /// Orthonormal basis for the column span of `vectors`, keeping singular
    /// directions above `rel_tol * sigma_max`.
    pub fn span(vectors: &CMatrix, rel_tol: f64) -> Frame {
        let n = vectors.nrows();
        let s = svd(vectors);
        let top = s.singular_values.first().copied().unwrap_or(0.0);
        let k = if top == 0.0 { 0 } else { s.singular_values.iter().filter(|&&v| v > rel_tol * top).count() };
        Frame { ambient_dim: n, columns: s.u.columns(0, k).into_owned() }
    }

    pub fn full(n: usize) -> Frame {
        Frame { ambient_dim: n, columns: identity(n) }
    }

    pub fn empty(n: usize) -> Frame {
        Frame { ambient_dim: n, columns: zeros(n, 0) }
    }

    /// Span of the given standard basis vectors.
    pub fn coordinate(n: usize, indices: &[usize]) -> Frame {
        let mut columns = zeros(n, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            columns[(i, j)] = c64(1.0, 0.0);
        }
        Frame { ambient_dim: n, columns }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    /// Orthogonal projection onto the frame.
    pub fn projector(&self) -> CMatrix {
        &self.columns * self.columns.adjoint()
    }

    /// Orthonormal basis of `self ⊖ sub`, assuming `sub ⊆ self`.
    pub fn complement_of(&self, sub: &Frame) -> Frame {
        let n = self.ambient_dim;
        let k = self.dim().saturating_sub(sub.dim());
        if k == 0 {
            return Frame::empty(n);
        }
        let mut r = self.columns.clone();
        for _ in 0..2 {
            let proj = sub.columns() * (sub.columns().adjoint() * &r);
            r -= proj;
        }
        let s = svd(&r);
        Frame { ambient_dim: n, columns: s.u.columns(0, k.min(s.u.ncols())).into_owned() }
    }
}

/// Smallest `z`-invariant subspace containing `m`.
///
/// Grows an orthonormal basis block by block: apply `z` to the newest
/// directions, orthogonalize against the basis, and keep residual singular
/// directions above `tol * ||z||`.
pub fn invariant_hull(z: &CMatrix, m: &Frame, tol: f64) -> Result<Frame> {
    ensure_square(z)?;
    let n = z.nrows();
    if m.ambient_dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.ambient_dim() });
    }
    let znorm = operator_norm(z);
    if znorm == 0.0 || m.dim() == 0 {
        return Ok(m.clone());
    }
    let cutoff = tol * znorm;
    let mut basis = m.columns().clone();
    let mut frontier = basis.clone();
    while frontier.ncols() > 0 && basis.ncols() < n {
        let mut w = z * &frontier;
        for _ in 0..2 {
            let proj = &basis * (basis.adjoint() * &w);
            w -= proj;
        }
        let s = svd(&w);
        let room = n - basis.ncols();
        let keep = s.singular_values.iter().filter(|&&v| v > cutoff).count().min(room);
        frontier = s.u.columns(0, keep).into_owned();
        basis = concat_columns(&basis, &frontier);
    }
    Ok(Frame { ambient_dim: n, columns: basis })
}
