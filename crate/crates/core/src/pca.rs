//! PCA of extreme angles and the local geometry of the projection manifold
//! around the optimal projection.
//!
//! Most maps here act blockwise in the eigenbasis of `Σ`: writing
//! `Πᵢ = vᵢvᵢᵀ`, one has `ΠᵢAΠⱼ = (vᵢᵀAvⱼ) vᵢvⱼᵀ`, so a weighted double sum
//! `Σ cᵢⱼ ΠᵢAΠⱼ` is `V (c ∘ VᵀAV) Vᵀ`.

use crate::error::{out_of_range, Error, Result};
use crate::extremes::MomentMatrix;
use crate::linalg::{
    cluster_eigenvalues, expm, hs_inner, symmetric_eigh, top_p_projection, EigenClusters, Matrix,
    ProjectionMatrix, SymmetricEigen, DEFAULT_GAP_TOL,
};

/// Smallest admissible gap `λ_p − λ_{p+1}` for an [`EigenFrame`].
pub const SPLIT_TOL: f64 = 1e-10;

const CLASS_TOL: f64 = 1e-10;

/// Rank-`p` PCA of a moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaFit {
    pub eigen: SymmetricEigen,
    pub p: usize,
    pub projection: ProjectionMatrix,
    /// `λ̂₁ + … + λ̂_p`.
    pub captured: f64,
}

impl PcaFit {
    pub fn from_eigen(eigen: SymmetricEigen, p: usize) -> Result<Self> {
        let projection = top_p_projection(&eigen, p)?;
        let captured = eigen.eigenvalues[..p].iter().sum();
        Ok(PcaFit {
            eigen,
            p,
            projection,
            captured,
        })
    }

    /// Refit at another rank without recomputing the eigendecomposition.
    pub fn with_rank(&self, p: usize) -> Result<Self> {
        Self::from_eigen(self.eigen.clone(), p)
    }
}

pub fn fit_pca(sigma: &MomentMatrix, p: usize) -> Result<PcaFit> {
    let d = sigma.dim();
    if p < 1 || p > d {
        return Err(out_of_range("p", p, format!("1..={d}")));
    }
    PcaFit::from_eigen(symmetric_eigh(&sigma.matrix)?, p)
}

/// One projection per eigenvalue cluster; together they resolve the identity.
pub fn cluster_projections(
    eigen: &SymmetricEigen,
    clusters: &EigenClusters,
) -> Result<Vec<ProjectionMatrix>> {
    let d = eigen.dim();
    if clusters.dim() != d || clusters.boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ShapeMismatch {
            expected: format!("strictly increasing cluster boundaries ending at {d}"),
            actual: format!("{:?}", clusters.boundaries),
        });
    }
    Ok((0..clusters.len())
        .map(|j| {
            let vectors: Vec<Vec<f64>> = clusters.range(j).map(|i| eigen.vector(i)).collect();
            ProjectionMatrix::from_orthonormal(&vectors, d)
        })
        .collect())
}

/// `⟨Σ, Π*⟩ − ⟨Σ, Π̂⟩` with `Π*` the rank-`p` PCA projection of `Σ`.
pub fn excess_risk(sigma: &MomentMatrix, estimate: &ProjectionMatrix, p: usize) -> Result<f64> {
    if estimate.rank() != p {
        return Err(Error::ShapeMismatch {
            expected: format!("projection of rank {p}"),
            actual: format!("rank {}", estimate.rank()),
        });
    }
    let best = fit_pca(sigma, p)?;
    Ok(hs_inner(&sigma.matrix, best.projection.matrix())?
        - hs_inner(&sigma.matrix, estimate.matrix())?)
}

/// A skew-symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix(Matrix);

impl SkewMatrix {
    /// Accepts `A` when `‖A + Aᵀ‖_max ≤ 1e-12·max(1, ‖A‖_max)` and stores
    /// its exact skew part.
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        matrix.check_finite()?;
        let d = matrix.rows();
        let dev = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| (matrix[(i, j)] + matrix[(j, i)]).abs())
            .fold(0.0, f64::max);
        if dev > 1e-12 * matrix.max_abs().max(1.0) {
            return Err(Error::NotSkew { deviation: dev });
        }
        Ok(Self::skew_part(&matrix))
    }

    /// `(M − Mᵀ)/2`.
    pub fn skew_part(m: &Matrix) -> Self {
        let d = m.rows();
        SkewMatrix(Matrix::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] - m[(j, i)])))
    }

    pub fn zeros(d: usize) -> Self {
        SkewMatrix(Matrix::zeros(d, d))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn scale(&self, c: f64) -> Self {
        SkewMatrix(self.0.scale(c))
    }

    pub fn add(&self, other: &SkewMatrix) -> Self {
        SkewMatrix(&self.0 + &other.0)
    }
}

/// Eigenstructure of a (limit) moment matrix split at rank `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFrame {
    sigma: Matrix,
    eigen: SymmetricEigen,
    clusters: EigenClusters,
    p: usize,
    pi_star: ProjectionMatrix,
    pi_perp: ProjectionMatrix,
}

impl EigenFrame {
    pub fn from_matrix(sigma: &Matrix, p: usize) -> Result<Self> {
        let eigen = symmetric_eigh(sigma)?;
        Self::build(sigma.symmetric_part(), eigen, p)
    }

    /// Frame with prescribed eigenvalues (non-increasing) and orthogonal
    /// eigenvector matrix.
    pub fn from_eigen(eigen: SymmetricEigen, p: usize) -> Result<Self> {
        if let Some(i) = eigen.eigenvalues.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::Unsorted { index: i + 1 });
        }
        let sigma = eigen.reconstruct().symmetric_part();
        Self::build(sigma, eigen, p)
    }

    fn build(sigma: Matrix, eigen: SymmetricEigen, p: usize) -> Result<Self> {
        let d = eigen.dim();
        if p < 1 || p >= d {
            return Err(out_of_range("p", p, format!("1..={}", d - 1)));
        }
        let gap = eigen.eigenvalues[p - 1] - eigen.eigenvalues[p];
        if gap <= SPLIT_TOL {
            return Err(Error::DegenerateSplit { p, gap });
        }
        let clusters = cluster_eigenvalues(&eigen.eigenvalues, DEFAULT_GAP_TOL)?;
        let pi_star = top_p_projection(&eigen, p)?;
        let pi_perp = pi_star.complement();
        Ok(EigenFrame {
            sigma,
            eigen,
            clusters,
            p,
            pi_star,
            pi_perp,
        })
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.eigenvalues
    }

    pub fn clusters(&self) -> &EigenClusters {
        &self.clusters
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.eigen.dim()
    }

    pub fn pi_star(&self) -> &ProjectionMatrix {
        &self.pi_star
    }

    pub fn pi_perp(&self) -> &ProjectionMatrix {
        &self.pi_perp
    }

    /// `VᵀMV`.
    fn to_eigen(&self, m: &Matrix) -> Matrix {
        let v = &self.eigen.eigenvectors;
        &(&v.transpose() * m) * v
    }

    /// `VMVᵀ`.
    fn eigen_coords_to_ambient(&self, m: &Matrix) -> Matrix {
        let v = &self.eigen.eigenvectors;
        &(v * m) * &v.transpose()
    }

    /// `Σᵢ≤p Σⱼ>p w(i, j) ΠᵢMΠⱼ`.
    fn cross_block(&self, m: &Matrix, w: impl Fn(usize, usize) -> f64) -> Matrix {
        let c = self.to_eigen(m);
        let d = self.dim();
        let p = self.p;
        let out = Matrix::from_fn(d, d, |i, j| {
            if i < p && j >= p {
                w(i, j) * c[(i, j)]
            } else {
                0.0
            }
        });
        self.eigen_coords_to_ambient(&out)
    }

    fn check_shape(&self, m: &Matrix) -> Result<()> {
        let d = self.dim();
        if m.shape() != (d, d) {
            return Err(Error::ShapeMismatch {
                expected: format!("{d}x{d}"),
                actual: format!("{}x{}", m.rows(), m.cols()),
            });
        }
        Ok(())
    }

    fn tol(m: &Matrix) -> f64 {
        CLASS_TOL * m.norm_hs().max(1.0)
    }

    /// Skew with `Π*AΠ* = 0` and `Π⊥AΠ⊥ = 0`.
    pub fn in_restricted_skew(&self, a: &SkewMatrix) -> bool {
        self.restricted_skew_defect(a.matrix()) <= Self::tol(a.matrix())
    }

    fn restricted_skew_defect(&self, a: &Matrix) -> f64 {
        let ps = self.pi_star.matrix();
        let pp = self.pi_perp.matrix();
        let top = (&(ps * a) * ps).norm_hs();
        let bottom = (&(pp * a) * pp).norm_hs();
        top.max(bottom)
    }

    /// `BV* = 0` and `BV⊥ ⊂ V*`, i.e. `Π⊥B = 0` and `BΠ* = 0`.
    pub fn in_m_star(&self, b: &Matrix) -> bool {
        self.m_star_defect(b) <= Self::tol(b)
    }

    fn m_star_defect(&self, b: &Matrix) -> f64 {
        let left = (self.pi_perp.matrix() * b).norm_hs();
        let right = (b * self.pi_star.matrix()).norm_hs();
        left.max(right)
    }

    fn require_restricted_skew(&self, a: &SkewMatrix) -> Result<()> {
        self.check_shape(a.matrix())?;
        let defect = self.restricted_skew_defect(a.matrix());
        if defect > Self::tol(a.matrix()) {
            return Err(Error::NotInClass(format!(
                "diagonal blocks of A have norm {defect:e}; A must map V* into V⊥ and back"
            )));
        }
        Ok(())
    }

    /// Limit process `2⟨U, Π*A⟩ + ⟨Σ, A²(Π* − Π⊥)⟩`.
    pub fn limit_process(&self, u: &Matrix, a: &SkewMatrix) -> Result<f64> {
        self.check_shape(u)?;
        self.check_shape(a.matrix())?;
        let am = a.matrix();
        let lin = hs_inner(u, &(self.pi_star.matrix() * am))?;
        let diff = self.pi_star.matrix() - self.pi_perp.matrix();
        let quad = hs_inner(&self.sigma, &(&(am * am) * &diff))?;
        Ok(2.0 * lin + quad)
    }

    /// `⟨Σ, A²(Π* − Π⊥)⟩`, the local risk limit.
    pub fn local_risk(&self, a: &SkewMatrix) -> Result<f64> {
        self.limit_process(&Matrix::zeros(self.dim(), self.dim()), a)
    }
}

/// `Π⊥BΠ* + Π*BΠ⊥`: the part of `B` that moves `V*` and `V⊥` into each other.
pub fn project_to_restricted_skew(b: &SkewMatrix, frame: &EigenFrame) -> Result<SkewMatrix> {
    frame.check_shape(b.matrix())?;
    let ps = frame.pi_star.matrix();
    let pp = frame.pi_perp.matrix();
    let bm = b.matrix();
    let out = &(&(pp * bm) * ps) + &(&(ps * bm) * pp);
    Ok(SkewMatrix::skew_part(&out))
}

/// `e^{−A/√k} Π* e^{A/√k}`.
pub fn local_projection(frame: &EigenFrame, a: &SkewMatrix, k: usize) -> Result<ProjectionMatrix> {
    if k < 1 {
        return Err(out_of_range("k", k, ">= 1"));
    }
    frame.check_shape(a.matrix())?;
    let q = expm(&a.matrix().scale(1.0 / (k as f64).sqrt()))?;
    let conj = &(&q.transpose() * frame.pi_star.matrix()) * &q;
    ProjectionMatrix::new(conj.symmetric_part(), frame.p)
}

/// Second-order expansion
/// `Π* + k^{−1/2}(Π*A − AΠ*) + k^{−1}((Π*A² + A²Π*)/2 − AΠ*A)`.
pub fn local_projection_expansion(frame: &EigenFrame, a: &SkewMatrix, k: usize) -> Result<Matrix> {
    if k < 1 {
        return Err(out_of_range("k", k, ">= 1"));
    }
    frame.check_shape(a.matrix())?;
    let ps = frame.pi_star.matrix();
    let am = a.matrix();
    let a2 = am * am;
    let first = &(ps * am) - &(am * ps);
    let second = &(&(ps * &a2) + &(&a2 * ps)).scale(0.5) - &(&(am * ps) * am);
    let kf = k as f64;
    Ok(&(ps + &first.scale(kf.powf(-0.5))) + &second.scale(1.0 / kf))
}

/// `S_λ(A) = Σᵢ≤p Σⱼ>p √(λᵢ−λⱼ) ΠᵢAΠⱼ`.
pub fn s_lambda(a: &SkewMatrix, frame: &EigenFrame) -> Result<Matrix> {
    frame.require_restricted_skew(a)?;
    let l = frame.eigenvalues();
    Ok(frame.cross_block(a.matrix(), |i, j| (l[i] - l[j]).sqrt()))
}

/// `T_λ(B) = Σᵢ≤p Σⱼ>p ΠᵢBΠⱼ / √(λᵢ−λⱼ)`.
pub fn t_lambda(b: &Matrix, frame: &EigenFrame) -> Result<Matrix> {
    frame.check_shape(b)?;
    let l = frame.eigenvalues();
    Ok(frame.cross_block(b, |i, j| 1.0 / (l[i] - l[j]).sqrt()))
}

/// `T̄_λ(B) = T_λ(B) − T_λ(B)ᵀ`, the inverse of [`s_lambda`].
pub fn tbar_lambda(b: &Matrix, frame: &EigenFrame) -> Result<SkewMatrix> {
    frame.check_shape(b)?;
    let defect = frame.m_star_defect(b);
    if defect > EigenFrame::tol(b) {
        return Err(Error::NotInClass(format!(
            "B must vanish on V* and map into V* (defect {defect:e})"
        )));
    }
    let t = t_lambda(b, frame)?;
    Ok(SkewMatrix(&t - &t.transpose()))
}

/// `A* = Σᵢ≤p Σⱼ>p (ΠᵢUΠⱼ − ΠⱼUΠᵢ)/(λᵢ−λⱼ)`, the maximiser of the limit process.
pub fn local_maximizer(u: &Matrix, frame: &EigenFrame) -> Result<SkewMatrix> {
    frame.check_shape(u)?;
    let l = frame.eigenvalues();
    let upper = frame.cross_block(u, |i, j| 1.0 / (l[i] - l[j]));
    Ok(SkewMatrix(&upper - &upper.transpose()))
}

/// Cluster-level weights over the split at `p`: returns, for eigen-indices
/// `a < p ≤ b`, the gap `μ_{c(a)} − μ_{c(b)}`.
fn cluster_gaps(frame: &EigenFrame, p: usize) -> Result<impl Fn(usize, usize) -> f64 + '_> {
    let clusters = frame.clusters();
    if clusters.boundary_index(p).is_none() || p >= frame.dim() {
        return Err(Error::NotClusterBoundary {
            p,
            boundaries: clusters.boundaries.clone(),
        });
    }
    Ok(move |a: usize, b: usize| {
        clusters.cluster_values[clusters.cluster_of(a)] - clusters.cluster_values[clusters.cluster_of(b)]
    })
}

/// Limit of `√k(Π̂ − Π*)`:
/// `Σ_{j≤J_p} Σ_{ℓ>J_p} (Π_{W_ℓ}UΠ_{W_j} + Π_{W_j}UΠ_{W_ℓ})/(μ_j − μ_ℓ)`.
pub fn limit_projection_deviation(u: &Matrix, frame: &EigenFrame, p: usize) -> Result<Matrix> {
    frame.check_shape(u)?;
    let gap = cluster_gaps(frame, p)?;
    let c = frame.to_eigen(u);
    let d = frame.dim();
    let out = Matrix::from_fn(d, d, |i, j| match (i < p, j < p) {
        (true, false) => c[(i, j)] / gap(i, j),
        (false, true) => c[(i, j)] / gap(j, i),
        _ => 0.0,
    });
    Ok(frame.eigen_coords_to_ambient(&out))
}

/// Limit of `k(M(Π*) − M(Π̂))`:
/// `Σ_{j≤J_p} Σ_{m>J_p} ‖Π_{W_j}UΠ_{W_m}‖²_HS/(μ_j − μ_m)`.
pub fn limit_excess_risk(u: &Matrix, frame: &EigenFrame, p: usize) -> Result<f64> {
    frame.check_shape(u)?;
    let gap = cluster_gaps(frame, p)?;
    let c = frame.to_eigen(u);
    let d = frame.dim();
    let mut total = 0.0;
    for a in 0..p {
        for b in p..d {
            total += c[(a, b)] * c[(a, b)] / gap(a, b);
        }
    }
    Ok(total)
}

/// Deterministic part of the excess-risk bound:
/// `min_{1≤i≤p<j≤d+1} k⁻¹(1/(λ_{i−1}−λ_{p+1}) + 1/(λ_p−λ_j)) + λᵢ − λ_{j−1}`
/// with `λ₀ = +∞`, `λ_{d+1} = −∞` and `1/0 = +∞`.
pub fn excess_risk_bound(eigenvalues: &[f64], p: usize, k: usize) -> Result<f64> {
    let d = eigenvalues.len();
    if p < 1 || p >= d {
        return Err(out_of_range("p", p, format!("1..={}", d.saturating_sub(1))));
    }
    if k < 1 {
        return Err(out_of_range("k", k, ">= 1"));
    }
    if let Some(i) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::Unsorted { index: i + 1 });
    }
    // 1-based access with the infinite conventions at both ends.
    let lam = |i: usize| -> f64 {
        if i == 0 {
            f64::INFINITY
        } else if i > d {
            f64::NEG_INFINITY
        } else {
            eigenvalues[i - 1]
        }
    };
    let recip = |g: f64| if g == 0.0 { f64::INFINITY } else { 1.0 / g };
    let kf = k as f64;
    let mut best = f64::INFINITY;
    for i in 1..=p {
        for j in (p + 1)..=(d + 1) {
            let stochastic = (recip(lam(i - 1) - lam(p + 1)) + recip(lam(p) - lam(j))) / kf;
            let v = stochastic + lam(i) - lam(j - 1);
            if v.is_finite() && v < best {
                best = v;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    fn moment(m: Matrix) -> MomentMatrix {
        MomentMatrix::new(m, 1).unwrap()
    }

    #[test]
    fn fit_examples() {
        let fit = fit_pca(&moment(Matrix::diag(&[0.6, 0.3, 0.1])), 2).unwrap();
        assert!((fit.captured - 0.9).abs() < 1e-15);
        assert!(close(fit.projection.matrix(), &Matrix::diag(&[1.0, 1.0, 0.0]), 1e-15));
        let s = Matrix::from_rows(&[vec![0.5, 0.1, 0.0], vec![0.1, 0.3, 0.05], vec![0.0, 0.05, 0.2]]);
        let fit = fit_pca(&moment(s.clone()), 3).unwrap();
        assert!((fit.captured - s.trace()).abs() < 1e-14);
        assert_eq!(fit.projection.matrix(), &Matrix::identity(3));
        let one = fit_pca(&moment(s.clone()), 1).unwrap();
        let e = symmetric_eigh(&s).unwrap();
        assert!((one.captured - e.eigenvalues[0]).abs() < 1e-15);
        assert!(fit_pca(&moment(s), 0).is_err());
    }

    #[test]
    fn cluster_projection_examples() {
        let e = symmetric_eigh(&Matrix::identity(3)).unwrap();
        let c = cluster_eigenvalues(&e.eigenvalues, DEFAULT_GAP_TOL).unwrap();
        let ps = cluster_projections(&e, &c).unwrap();
        assert_eq!(ps.len(), 1);
        assert!(close(ps[0].matrix(), &Matrix::identity(3), 1e-14));

        let e = symmetric_eigh(&Matrix::diag(&[3.0, 2.0, 1.0])).unwrap();
        let c = cluster_eigenvalues(&e.eigenvalues, DEFAULT_GAP_TOL).unwrap();
        let ps = cluster_projections(&e, &c).unwrap();
        for (k, p) in ps.iter().enumerate() {
            let mut diag = [0.0; 3];
            diag[k] = 1.0;
            assert!(close(p.matrix(), &Matrix::diag(&diag), 1e-15));
        }
        let bad = EigenClusters {
            boundaries: vec![1, 2],
            cluster_values: vec![3.0, 2.0],
        };
        assert!(cluster_projections(&e, &bad).is_err());
    }

    #[test]
    fn excess_risk_examples() {
        let sigma = moment(Matrix::diag(&[0.6, 0.4]));
        let best = fit_pca(&sigma, 1).unwrap().projection;
        assert_eq!(excess_risk(&sigma, &best, 1).unwrap(), 0.0);
        let wrong = ProjectionMatrix::from_orthonormal(&[vec![0.0, 1.0]], 2);
        assert!((excess_risk(&sigma, &wrong, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!(excess_risk(&sigma, &wrong, 2).is_err());
    }

    #[test]
    fn frame_rejects_degenerate_split() {
        let err = EigenFrame::from_matrix(&Matrix::diag(&[0.5, 0.5, 0.0]), 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateSplit { p: 1, .. }));
        assert!(EigenFrame::from_matrix(&Matrix::diag(&[0.5, 0.5, 0.0]), 2).is_ok());
        assert!(EigenFrame::from_matrix(&Matrix::diag(&[0.5, 0.5]), 2).is_err());
    }

    #[test]
    fn restricted_skew_examples() {
        let f = EigenFrame::from_matrix(&Matrix::diag(&[0.5, 0.3, 0.2]), 1).unwrap();
        let inside = SkewMatrix::new(Matrix::from_rows(&[
            vec![0.0, -1.0, 2.0],
            vec![1.0, 0.0, 0.0],
            vec![-2.0, 0.0, 0.0],
        ]))
        .unwrap();
        assert_eq!(project_to_restricted_skew(&inside, &f).unwrap(), inside);
        let block = SkewMatrix::new(Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0],
            vec![0.0, -3.0, 0.0],
        ]))
        .unwrap();
        assert_eq!(
            project_to_restricted_skew(&block, &f).unwrap().into_matrix(),
            Matrix::zeros(3, 3)
        );
        assert!(s_lambda(&block, &f).is_err());
        assert!(SkewMatrix::new(Matrix::identity(2)).is_err());
    }

    #[test]
    fn s_lambda_two_by_two() {
        let (l1, l2, a) = (0.7, 0.3, 0.9);
        let f = EigenFrame::from_matrix(&Matrix::diag(&[l1, l2]), 1).unwrap();
        let am = SkewMatrix::new(Matrix::from_rows(&[vec![0.0, -a], vec![a, 0.0]])).unwrap();
        let s = s_lambda(&am, &f).unwrap();
        assert!((s[(0, 1)] + a * (l1 - l2).sqrt()).abs() < 1e-15);
        assert_eq!(s[(1, 0)], 0.0);
        assert_eq!(s_lambda(&SkewMatrix::zeros(2), &f).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(t_lambda(&Matrix::zeros(2, 2), &f).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(tbar_lambda(&Matrix::zeros(2, 2), &f).unwrap(), SkewMatrix::zeros(2));
        // top-left block only
        assert_eq!(t_lambda(&Matrix::diag(&[4.0, 0.0]), &f).unwrap(), Matrix::zeros(2, 2));
        assert!(tbar_lambda(&Matrix::diag(&[1.0, 0.0]), &f).is_err());
    }

    #[test]
    fn limit_examples() {
        let f = EigenFrame::from_matrix(&Matrix::diag(&[0.5, 0.3, 0.2]), 1).unwrap();
        let zero = Matrix::zeros(3, 3);
        assert_eq!(limit_excess_risk(&zero, &f, 1).unwrap(), 0.0);
        assert_eq!(limit_projection_deviation(&zero, &f, 1).unwrap(), zero);
        assert_eq!(local_maximizer(&zero, &f).unwrap(), SkewMatrix::zeros(3));

        // single cross entry between the first and last coordinate
        let u = 0.4;
        let mut um = Matrix::zeros(3, 3);
        um[(0, 2)] = u;
        um[(2, 0)] = u;
        let v = limit_excess_risk(&um, &f, 1).unwrap();
        assert!((v - u * u / (0.5 - 0.2)).abs() < 1e-15);
        assert!((limit_excess_risk(&um, &f, 2).unwrap() - u * u / 0.3).abs() < 1e-15);

        let block = Matrix::diag(&[1.0, 2.0, 3.0]);
        assert!(limit_projection_deviation(&block, &f, 1).unwrap().max_abs() < 1e-15);

        let clustered = EigenFrame::from_matrix(&Matrix::diag(&[0.4, 0.4, 0.2]), 2).unwrap();
        assert!(matches!(
            limit_excess_risk(&um, &clustered, 1),
            Err(Error::NotClusterBoundary { .. })
        ));
    }

    #[test]
    fn bound_examples() {
        let b = excess_risk_bound(&[0.6, 0.4], 1, 100).unwrap();
        assert!((b - 0.05).abs() < 1e-15);
        let lam = [0.5, 0.3, 0.2];
        let b1 = excess_risk_bound(&lam, 1, 1_000).unwrap();
        let b2 = excess_risk_bound(&lam, 1, 10_000).unwrap();
        assert!((b1 / b2 - 10.0).abs() < 1e-9);
        let tied = excess_risk_bound(&[0.4, 0.4, 0.2], 1, 100).unwrap();
        assert!(tied.is_finite() && tied >= 0.0);
        assert!(excess_risk_bound(&lam, 3, 10).is_err());
    }

    #[test]
    fn local_projection_identities() {
        let f = EigenFrame::from_matrix(&Matrix::diag(&[0.5, 0.3, 0.2]), 1).unwrap();
        let zero = SkewMatrix::zeros(3);
        assert_eq!(local_projection(&f, &zero, 10).unwrap().matrix(), f.pi_star().matrix());
        assert_eq!(&local_projection_expansion(&f, &zero, 10).unwrap(), f.pi_star().matrix());
        let a = SkewMatrix::skew_part(&Matrix::from_rows(&[
            vec![0.0, 1.0, -0.5],
            vec![0.3, 0.0, 0.8],
            vec![0.2, -0.4, 0.0],
        ]));
        let dev: Vec<f64> = [100usize, 10_000, 1_000_000]
            .iter()
            .map(|&k| (local_projection(&f, &a, k).unwrap().matrix() - f.pi_star().matrix()).norm_hs())
            .collect();
        assert!((dev[0] / dev[1] - 10.0).abs() < 0.5);
        assert!((dev[1] / dev[2] - 10.0).abs() < 0.05);
    }

    fn arb_frame() -> impl Strategy<Value = EigenFrame> {
        (3usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec(0.0f64..1.0, d),
                prop::collection::vec(-1.0f64..1.0, d * d),
                1..d,
            )
                .prop_map(move |(mut lam, raw, p)| {
                    lam.sort_by(|a, b| b.total_cmp(a));
                    // force a usable spectral gap at the split
                    for l in lam.iter_mut().take(p) {
                        *l += 0.1;
                    }
                    let skew = SkewMatrix::skew_part(&Matrix::from_row_major(d, d, raw).unwrap());
                    let q = expm(skew.matrix()).unwrap();
                    EigenFrame::from_eigen(
                        SymmetricEigen {
                            eigenvalues: lam,
                            eigenvectors: q,
                        },
                        p,
                    )
                    .unwrap()
                })
        })
    }

    fn arb_case() -> impl Strategy<Value = (EigenFrame, SkewMatrix, Matrix)> {
        arb_frame().prop_flat_map(|f| {
            let d = f.dim();
            (
                prop::collection::vec(-2.0f64..2.0, d * d),
                prop::collection::vec(-2.0f64..2.0, d * d),
            )
                .prop_map(move |(a, u)| {
                    let raw = SkewMatrix::skew_part(&Matrix::from_row_major(d, d, a).unwrap());
                    let a = project_to_restricted_skew(&raw, &f).unwrap();
                    let u = Matrix::from_row_major(d, d, u).unwrap().symmetric_part();
                    (f.clone(), a, u)
                })
        })
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #[test]
        fn round_trips((f, a, _u) in arb_case()) {
            prop_assert!(f.in_restricted_skew(&a));
            let s = s_lambda(&a, &f).unwrap();
            prop_assert!(f.in_m_star(&s));
            let back = tbar_lambda(&s, &f).unwrap();
            prop_assert!(close(back.matrix(), a.matrix(), 1e-10));
            let again = s_lambda(&back, &f).unwrap();
            prop_assert!(close(&again, &s, 1e-10));
        }

        #[test]
        fn risk_identities((f, a, u) in arb_case()) {
            let s = s_lambda(&a, &f).unwrap();
            let quad = f.local_risk(&a).unwrap();
            prop_assert!(rel(quad, -hs_inner(&s, &s).unwrap()) <= 1e-10);
            let t = t_lambda(&u, &f).unwrap();
            let lin = hs_inner(&u, &(f.pi_star().matrix() * a.matrix())).unwrap();
            prop_assert!(rel(lin, hs_inner(&t, &s).unwrap()) <= 1e-10);
        }

        #[test]
        fn maximiser_identities((f, b, u) in arb_case()) {
            let a_star = local_maximizer(&u, &f).unwrap();
            let t = t_lambda(&u, &f).unwrap();
            let via_maps = tbar_lambda(&t, &f).unwrap();
            prop_assert!(close(a_star.matrix(), via_maps.matrix(), 1e-10));
            let best = f.limit_process(&u, &a_star).unwrap();
            let t2 = hs_inner(&t, &t).unwrap();
            prop_assert!(rel(best, t2) <= 1e-10);
            for eps in [1e-3, 0.1, 1.0] {
                let comp = a_star.add(&b.scale(eps));
                prop_assert!(f.limit_process(&u, &comp).unwrap() <= best + 1e-9);
            }
            // clusters are simple here, so the cluster formula agrees
            prop_assert!(rel(limit_excess_risk(&u, &f, f.p()).unwrap(), t2) <= 1e-10);
            let w = limit_projection_deviation(&u, &f, f.p()).unwrap();
            let pa = f.pi_star().matrix() * a_star.matrix();
            let ap = a_star.matrix() * f.pi_star().matrix();
            prop_assert!(close(&w, &(&pa - &ap), 1e-10));
            let ps = f.pi_star().matrix();
            let pp = f.pi_perp().matrix();
            prop_assert!((&(ps * &w) * ps).max_abs() <= 1e-10);
            prop_assert!((&(pp * &w) * pp).max_abs() <= 1e-10);
        }

        #[test]
        fn local_projection_is_conjugate((f, a, _u) in arb_case(), k in 1usize..10_000) {
            let pr = local_projection(&f, &a, k).unwrap();
            prop_assert_eq!(pr.rank(), f.p());
            let e = symmetric_eigh(pr.matrix()).unwrap();
            for (i, l) in e.eigenvalues.iter().enumerate() {
                let target = if i < f.p() { 1.0 } else { 0.0 };
                prop_assert!((l - target).abs() <= 1e-10);
            }
        }

        #[test]
        fn excess_is_nonnegative((f, a, u) in arb_case(), k in 1usize..1000) {
            prop_assert!(limit_excess_risk(&u, &f, f.p()).unwrap() >= 0.0);
            let sigma = moment(f.sigma().clone());
            let pr = local_projection(&f, &a, k).unwrap();
            prop_assert!(excess_risk(&sigma, &pr, f.p()).unwrap() >= -1e-10);
        }
    }
}
