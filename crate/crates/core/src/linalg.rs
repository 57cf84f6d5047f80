//! Dense linear algebra for small symmetric problems.
//!
//! Everything here works on [`Matrix`], a row-major `f64` matrix. The sizes
//! in this crate stay in the low hundreds, so the eigensolver is a cyclic
//! Jacobi method: slow asymptotically, but it returns orthonormal
//! eigenvectors to machine precision without any special handling of
//! clustered eigenvalues.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{out_of_range, Error, Result};

/// Default absolute gap below which neighbouring eigenvalues form one cluster.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

const JACOBI_REL_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Frobenius (Hilbert–Schmidt) norm.
    pub fn norm_hs(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mat_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetric_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && self.asymmetry() <= tol
    }

    fn check_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Errors unless the matrix is square and symmetric up to `1e-12` relative
    /// to its largest entry.
    pub fn check_symmetric(&self) -> Result<()> {
        self.check_square()?;
        let asym = self.asymmetry();
        if asym > 1e-12 * self.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(pos) => Err(Error::NonFinite {
                row: pos / self.cols.max(1),
                col: pos % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }

    fn same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            })
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "mul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(l);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }
}

impl Mul<f64> for &Matrix {
    type Output = Matrix;
    fn mul(self, c: f64) -> Matrix {
        self.scale(c)
    }
}

/// Hilbert–Schmidt inner product `tr(A Bᵀ) = Σ aᵢⱼ bᵢⱼ`.
pub fn hs_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues in non-increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let v = &self.eigenvectors;
        let d = self.dim();
        Matrix::from_fn(d, d, |i, j| {
            (0..d).map(|m| v[(i, m)] * self.eigenvalues[m] * v[(j, m)]).sum()
        })
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps until the off-diagonal Frobenius mass drops below
/// `1e-14 · ‖S‖_F` or 100 sweeps have run. Eigenvectors are sign-normalised
/// (first non-negligible entry positive) and equal eigenvalues are ordered
/// by their eigenvectors, so the output is deterministic.
pub fn symmetric_eigh(s: &Matrix) -> Result<SymmetricEigen> {
    s.check_finite()?;
    s.check_symmetric()?;
    let d = s.rows();
    let mut a = s.symmetric_part();
    let mut v = Matrix::identity(d);
    let total = a.norm_hs();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_mass(&a);
        if off <= JACOBI_REL_TOL * total {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
    }

    let mut order: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|i| {
            let mut col = v.column(i);
            normalize_sign(&mut col);
            (a[(i, i)], col)
        })
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    // Within runs of (numerically) equal eigenvalues order by the vectors.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (order[end - 1].0 - order[end].0).abs() <= TIE_TOL {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|x, y| lex_cmp_desc(&x.1, &y.1));
        }
        start = end;
    }

    let eigenvalues = order.iter().map(|(l, _)| *l).collect();
    let eigenvectors = Matrix::from_fn(d, d, |i, j| order[j].1[i]);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_mass(a: &Matrix) -> f64 {
    let d = a.rows();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

// A <- Pᵀ A P, V <- V P with the plane rotation in coordinates (p, q).
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let d = a.rows();
    for k in 0..d {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..d {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..d {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn normalize_sign(x: &mut [f64]) {
    if let Some(first) = x.iter().find(|c| c.abs() > TIE_TOL) {
        if *first < 0.0 {
            x.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

fn lex_cmp_desc(x: &[f64], y: &[f64]) -> std::cmp::Ordering {
    for (a, b) in x.iter().zip(y) {
        if (a - b).abs() > TIE_TOL {
            return b.total_cmp(a);
        }
    }
    std::cmp::Ordering::Equal
}

/// Groups of numerically equal eigenvalues.
///
/// `boundaries` holds `N₁ < … < N_m = d` (the leading `N₀ = 0` is implicit):
/// cluster `j` covers indices `N_{j-1}..N_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenClusters {
    pub boundaries: Vec<usize>,
    pub cluster_values: Vec<f64>,
}

impl EigenClusters {
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    /// Index range of cluster `j` (0-based).
    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        let start = if j == 0 { 0 } else { self.boundaries[j - 1] };
        start..self.boundaries[j]
    }

    /// Cluster index owning eigenvalue index `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= i)
    }

    /// Number of clusters whose eigenvalues all lie within the top `p`,
    /// if `p` is a boundary.
    pub fn boundary_index(&self, p: usize) -> Option<usize> {
        self.boundaries.iter().position(|&b| b == p).map(|j| j + 1)
    }

    pub fn dim(&self) -> usize {
        self.boundaries.last().copied().unwrap_or(0)
    }
}

/// Merges consecutive eigenvalues whose difference is at most `gap_tol`.
pub fn cluster_eigenvalues(eigenvalues: &[f64], gap_tol: f64) -> Result<EigenClusters> {
    if gap_tol.is_nan() || gap_tol <= 0.0 {
        return Err(out_of_range("gap_tol", gap_tol, "> 0"));
    }
    if let Some(i) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::Unsorted { index: i + 1 });
    }
    let mut boundaries = Vec::new();
    let mut cluster_values = Vec::new();
    let mut start = 0;
    for i in 0..eigenvalues.len() {
        let last = i + 1 == eigenvalues.len();
        if last || eigenvalues[i] - eigenvalues[i + 1] > gap_tol {
            let members = &eigenvalues[start..=i];
            cluster_values.push(members.iter().sum::<f64>() / members.len() as f64);
            boundaries.push(i + 1);
            start = i + 1;
        }
    }
    Ok(EigenClusters {
        boundaries,
        cluster_values,
    })
}

/// Orthogonal projection matrix with known rank.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    matrix: Matrix,
    rank: usize,
}

impl ProjectionMatrix {
    /// Validates symmetry (1e-10), idempotence (1e-9) and `tr = rank` (1e-9).
    pub fn new(matrix: Matrix, rank: usize) -> Result<Self> {
        matrix.check_square()?;
        let asym = matrix.asymmetry();
        if asym > 1e-10 {
            return Err(Error::InvalidProjection(format!(
                "asymmetry {asym:e} exceeds 1e-10"
            )));
        }
        let idem = (&(&matrix * &matrix) - &matrix).max_abs();
        if idem > 1e-9 {
            return Err(Error::InvalidProjection(format!(
                "idempotence defect {idem:e} exceeds 1e-9"
            )));
        }
        let tr = matrix.trace();
        if (tr - rank as f64).abs() > 1e-9 {
            return Err(Error::InvalidProjection(format!(
                "trace {tr} does not match rank {rank}"
            )));
        }
        Ok(ProjectionMatrix { matrix, rank })
    }

    /// `Σ uᵢuᵢᵀ` over the given orthonormal vectors.
    pub fn from_orthonormal(vectors: &[Vec<f64>], d: usize) -> Self {
        let mut m = Matrix::zeros(d, d);
        for v in vectors {
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += v[i] * v[j];
                }
            }
        }
        ProjectionMatrix {
            matrix: m.symmetric_part(),
            rank: vectors.len(),
        }
    }

    pub fn identity(d: usize) -> Self {
        ProjectionMatrix {
            matrix: Matrix::identity(d),
            rank: d,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn complement(&self) -> ProjectionMatrix {
        ProjectionMatrix {
            matrix: &Matrix::identity(self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mat_vec(x)
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// Projection onto the span of the leading `p` eigenvectors.
///
/// `p = d` returns the identity exactly rather than a rounded sum.
pub fn top_p_projection(eigen: &SymmetricEigen, p: usize) -> Result<ProjectionMatrix> {
    let d = eigen.dim();
    if p < 1 || p > d {
        return Err(out_of_range("p", p, format!("1..={d}")));
    }
    if p == d {
        return Ok(ProjectionMatrix::identity(d));
    }
    let vectors: Vec<Vec<f64>> = (0..p).map(|i| eigen.vector(i)).collect();
    Ok(ProjectionMatrix::from_orthonormal(&vectors, d))
}

/// Matrix exponential by scaling and squaring with a degree-12 Taylor polynomial.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    m.check_square()?;
    m.check_finite()?;
    let d = m.rows();
    let norm = m.norm_1();
    let squarings = norm.max(1.0).log2().ceil() as i32 + 3;
    let scaled = m.scale(0.5f64.powi(squarings));

    // Horner: I + X(I + X/2(I + X/3(... (I + X/12))))
    let id = Matrix::identity(d);
    let mut acc = id.clone();
    for order in (1..=12).rev() {
        acc = &id + &(&scaled * &acc).scale(1.0 / order as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

/// Plane rotation by `phi` in coordinates `(i, j)`: `G[i][i] = G[j][j] = cos φ`,
/// `G[i][j] = -sin φ`, `G[j][i] = sin φ`.
pub fn givens_rotation(d: usize, i: usize, j: usize, phi: f64) -> Result<Matrix> {
    if i == j {
        return Err(out_of_range("j", j, format!("!= i = {i}")));
    }
    if i >= d || j >= d {
        return Err(out_of_range("axis", i.max(j), format!("< d = {d}")));
    }
    let mut g = Matrix::identity(d);
    let (s, c) = phi.sin_cos();
    g[(i, i)] = c;
    g[(j, j)] = c;
    g[(i, j)] = -s;
    g[(j, i)] = s;
    Ok(g)
}

/// Applies the rotation of [`givens_rotation`] to a vector in place.
pub fn apply_givens(x: &mut [f64], i: usize, j: usize, phi: f64) {
    let (s, c) = phi.sin_cos();
    let (xi, xj) = (x[i], x[j]);
    x[i] = c * xi - s * xj;
    x[j] = s * xi + c * xj;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn orthonormality_defect(v: &Matrix) -> f64 {
        (&(&v.transpose() * v) - &Matrix::identity(v.rows())).max_abs()
    }

    fn determinant(m: &Matrix) -> f64 {
        let d = m.rows();
        let mut a = m.clone();
        let mut det = 1.0;
        for c in 0..d {
            let piv = (c..d).max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs())).unwrap();
            if a[(piv, c)] == 0.0 {
                return 0.0;
            }
            if piv != c {
                for j in 0..d {
                    let t = a[(c, j)];
                    a[(c, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                det = -det;
            }
            det *= a[(c, c)];
            for r in (c + 1)..d {
                let f = a[(r, c)] / a[(c, c)];
                for j in c..d {
                    a[(r, j)] -= f * a[(c, j)];
                }
            }
        }
        det
    }

    fn random_symmetric(d: usize, entries: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(d, d);
        let mut it = entries.iter().cycle();
        for i in 0..d {
            for j in i..d {
                let x = *it.next().unwrap();
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn eigh_identity() {
        let e = symmetric_eigh(&Matrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert!(orthonormality_defect(&e.eigenvectors) < 1e-14);
    }

    #[test]
    fn eigh_diagonal_sorts_descending() {
        let e = symmetric_eigh(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vector(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.vector(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.vector(2), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn eigh_two_by_two() {
        let s = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigh(&s).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let v = e.vector(0);
        assert!((v[0] - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((v[1] - FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn eigh_rejects_bad_input() {
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(symmetric_eigh(&s), Err(Error::NotSymmetric { .. })));
        let mut t = Matrix::identity(2);
        t[(0, 0)] = f64::NAN;
        assert!(matches!(symmetric_eigh(&t), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn top_projection_examples() {
        let e = symmetric_eigh(&Matrix::diag(&[3.0, 2.0, 1.0])).unwrap();
        let p1 = top_p_projection(&e, 1).unwrap();
        assert_eq!(p1.matrix(), &Matrix::diag(&[1.0, 0.0, 0.0]));
        assert_eq!(top_p_projection(&e, 3).unwrap().matrix(), &Matrix::identity(3));
        assert!(top_p_projection(&e, 0).is_err());
        assert!(top_p_projection(&e, 4).is_err());

        let s = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let p = top_p_projection(&symmetric_eigh(&s).unwrap(), 1).unwrap();
        let want = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!((p.matrix() - &want).max_abs() < 1e-14);
    }

    #[test]
    fn clustering_examples() {
        let c = cluster_eigenvalues(&[1.0, 1.0, 0.5], 1e-8).unwrap();
        assert_eq!(c.boundaries, vec![2, 3]);
        assert_eq!(c.cluster_values, vec![1.0, 0.5]);
        let c = cluster_eigenvalues(&[3.0, 2.0, 1.0], 1e-8).unwrap();
        assert_eq!(c.boundaries, vec![1, 2, 3]);
        let c = cluster_eigenvalues(&[0.7, 0.7 - 5e-9, 0.3], 1e-8).unwrap();
        assert_eq!(c.boundaries, vec![2, 3]);
        assert_eq!(c.cluster_of(0), 0);
        assert_eq!(c.cluster_of(1), 0);
        assert_eq!(c.cluster_of(2), 1);
        assert_eq!(c.range(1), 2..3);
        assert!(matches!(
            cluster_eigenvalues(&[1.0, 2.0], 1e-8),
            Err(Error::Unsorted { index: 1 })
        ));
        assert!(cluster_eigenvalues(&[1.0], 0.0).is_err());
    }

    #[test]
    fn hs_inner_examples() {
        let i3 = Matrix::identity(3);
        assert_eq!(hs_inner(&i3, &i3).unwrap(), 3.0);
        let a = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]);
        assert_eq!(hs_inner(&a, &a).unwrap(), 1.0 + 4.0 + 9.0 + 0.25);
        let swap = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(hs_inner(&Matrix::diag(&[1.0, 2.0]), &swap).unwrap(), 0.0);
        assert!(hs_inner(&i3, &Matrix::identity(2)).is_err());
    }

    #[test]
    fn expm_examples() {
        assert_eq!(expm(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3));
        let phi = 0.7;
        let m = Matrix::from_rows(&[vec![0.0, -phi], vec![phi, 0.0]]);
        let r = expm(&m).unwrap();
        let want = givens_rotation(2, 0, 1, phi).unwrap();
        assert!((&r - &want).max_abs() < 1e-14);
        assert!(expm(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn givens_examples() {
        assert_eq!(givens_rotation(4, 1, 3, 0.0).unwrap(), Matrix::identity(4));
        let g = givens_rotation(2, 0, 1, PI / 2.0).unwrap();
        let want = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        assert!((&g - &want).max_abs() < 1e-15);
        assert!(givens_rotation(3, 1, 1, 0.3).is_err());
        assert!(givens_rotation(3, 0, 3, 0.3).is_err());

        let g = givens_rotation(5, 1, 4, 1.1).unwrap();
        assert!(orthonormality_defect(&g) < 1e-12);
        let mut x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let gx = g.mat_vec(&x);
        apply_givens(&mut x, 1, 4, 1.1);
        for (a, b) in x.iter().zip(&gx) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn eigh_reconstructs(d in 2usize..9, entries in prop::collection::vec(-5.0f64..5.0, 36)) {
            let s = random_symmetric(d, &entries);
            let e = symmetric_eigh(&s).unwrap();
            prop_assert!(orthonormality_defect(&e.eigenvectors) <= 1e-10);
            let scale = s.max_abs().max(1e-300);
            prop_assert!((&e.reconstruct() - &s).max_abs() <= 1e-10 * scale);
            prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn projections_are_idempotent(d in 2usize..8, p_frac in 0.0f64..1.0, entries in prop::collection::vec(-1.0f64..1.0, 28)) {
            let s = random_symmetric(d, &entries);
            let e = symmetric_eigh(&s).unwrap();
            let p = 1 + ((d - 1) as f64 * p_frac) as usize;
            let pm = top_p_projection(&e, p).unwrap();
            let m = pm.matrix();
            prop_assert!(m.asymmetry() <= 1e-10);
            prop_assert!((&(m * m) - m).max_abs() <= 1e-9);
            prop_assert!((m.trace() - p as f64).abs() <= 1e-9);
            prop_assert!(ProjectionMatrix::new(m.clone(), p).is_ok());
        }

        #[test]
        fn hs_inner_symmetric_and_positive(a in prop::collection::vec(-3.0f64..3.0, 9), b in prop::collection::vec(-3.0f64..3.0, 9)) {
            let a = Matrix::from_row_major(3, 3, a).unwrap();
            let b = Matrix::from_row_major(3, 3, b).unwrap();
            prop_assert_eq!(hs_inner(&a, &b).unwrap(), hs_inner(&b, &a).unwrap());
            let aa = hs_inner(&a, &a).unwrap();
            prop_assert!(aa >= 0.0);
            prop_assert_eq!(aa == 0.0, a.max_abs() == 0.0);
        }

        #[test]
        fn expm_of_skew_is_rotation(entries in prop::collection::vec(-1.5f64..1.5, 15)) {
            let d = 5;
            let mut m = Matrix::zeros(d, d);
            let mut it = entries.iter();
            for i in 0..d {
                for j in (i + 1)..d {
                    let x = *it.next().unwrap();
                    m[(i, j)] = x;
                    m[(j, i)] = -x;
                }
            }
            let q = expm(&m).unwrap();
            prop_assert!(orthonormality_defect(&q) <= 1e-10);
            let qi = expm(&-&m).unwrap();
            prop_assert!((&(&q * &qi) - &Matrix::identity(d)).max_abs() <= 1e-10);
            prop_assert!(determinant(&q) > 0.0);
        }

        #[test]
        fn clusters_partition_indices(raw in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let mut l = raw.clone();
            l.sort_by(|a, b| b.total_cmp(a));
            let c = cluster_eigenvalues(&l, 0.05).unwrap();
            prop_assert_eq!(c.dim(), l.len());
            prop_assert!(c.boundaries.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(c.cluster_values.windows(2).all(|w| w[0] > w[1]));
            let mut covered = 0;
            for j in 0..c.len() {
                covered += c.range(j).len();
            }
            prop_assert_eq!(covered, l.len());
        }
    }
}
