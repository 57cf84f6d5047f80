//! Peaks-over-threshold machinery on the unit sphere.
//!
//! Observations are mapped to `(‖x‖, x/‖x‖)`; the `k` observations with the
//! largest radius (strictly above the `(k+1)`-th largest radius) form the
//! angular sample on which PCA operates.

use crate::error::{out_of_range, Error, Result};
use crate::linalg::{hs_inner, Matrix, ProjectionMatrix};
use crate::numeric::euclidean_norm;

/// `n × d` observations, row-major. Rows must be finite and non-zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(out_of_range("n", n, ">= 1"));
        }
        if d < 2 {
            return Err(out_of_range("d", d, ">= 2"));
        }
        if data.len() != n * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", n * d),
                actual: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        let zero_rows: Vec<usize> = (0..n)
            .filter(|&i| data[i * d..(i + 1) * d].iter().all(|&x| x == 0.0))
            .collect();
        if !zero_rows.is_empty() {
            return Err(Error::ZeroRows { rows: zero_rows });
        }
        Ok(DataMatrix { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::ShapeMismatch {
                expected: format!("{d} columns"),
                actual: format!("{} columns in row {bad}", rows[bad].len()),
            });
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn radii(&self) -> Vec<f64> {
        self.rows().map(euclidean_norm).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.d, self.data.iter().map(|x| x * c).collect())
    }

    /// Applies `f` to every row in place (row index, row).
    pub fn map_rows(&self, mut f: impl FnMut(usize, &mut [f64])) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, row) in data.chunks_exact_mut(self.d).enumerate() {
            f(i, row);
        }
        Self::new(self.n, self.d, data)
    }
}

/// Polar coordinates `(‖x‖, x/‖x‖)`.
pub fn polar_transform(x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let r = euclidean_norm(x);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((r, x.iter().map(|v| v / r).collect()))
}

/// The `(k+1)`-th largest radius.
pub fn threshold_select(radii: &[f64], k: usize) -> Result<f64> {
    let n = radii.len();
    if k < 1 || k >= n {
        return Err(out_of_range("k", k, format!("1..={}", n.saturating_sub(1))));
    }
    let mut r = radii.to_vec();
    let (_, kth, _) = r.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    Ok(*kth)
}

/// Angles and radii of the observations whose radius strictly exceeds the
/// threshold, in row order.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularSample {
    pub threshold: f64,
    pub k: usize,
    d: usize,
    angles: Vec<f64>,
    pub radii: Vec<f64>,
    /// Row indices of the exceedances in the source data.
    pub indices: Vec<usize>,
}

impl AngularSample {
    /// Builds a sample from explicit angles; each angle is renormalised to
    /// unit length and radii are set to infinity above a zero threshold.
    pub fn from_angles(angles: &[Vec<f64>], k: usize) -> Result<Self> {
        if k < 1 {
            return Err(out_of_range("k", k, ">= 1"));
        }
        let d = angles.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(angles.len() * d);
        for a in angles {
            if a.len() != d {
                return Err(Error::ShapeMismatch {
                    expected: format!("{d} coordinates"),
                    actual: format!("{}", a.len()),
                });
            }
            flat.extend(polar_transform(a)?.1);
        }
        Ok(AngularSample {
            threshold: 0.0,
            k,
            d,
            radii: vec![f64::INFINITY; angles.len()],
            indices: (0..angles.len()).collect(),
            angles: flat,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn angle(&self, i: usize) -> &[f64] {
        &self.angles[i * self.d..(i + 1) * self.d]
    }

    pub fn angles(&self) -> impl Iterator<Item = &[f64]> {
        self.angles.chunks_exact(self.d.max(1))
    }
}

/// Selects the observations with radius strictly above the `(k+1)`-th
/// largest radius. Ties at the threshold yield fewer than `k` angles.
pub fn extract_exceedances(data: &DataMatrix, k: usize) -> Result<AngularSample> {
    let radii = data.radii();
    let threshold = threshold_select(&radii, k)?;
    let d = data.d();
    let mut angles = Vec::with_capacity(k * d);
    let mut kept = Vec::with_capacity(k);
    let mut indices = Vec::with_capacity(k);
    for (i, (row, &r)) in data.rows().zip(&radii).enumerate() {
        if r > threshold {
            angles.extend(row.iter().map(|v| v / r));
            kept.push(r);
            indices.push(i);
        }
    }
    Ok(AngularSample {
        threshold,
        k,
        d,
        angles,
        radii: kept,
        indices,
    })
}

/// Mixed second moments `(1/k) Σ ΘΘᵀ` of the exceedance angles.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    pub matrix: Matrix,
    pub k: usize,
}

impl MomentMatrix {
    pub fn new(matrix: Matrix, k: usize) -> Result<Self> {
        matrix.check_finite()?;
        matrix.check_symmetric()?;
        Ok(MomentMatrix { matrix, k })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// `(1/k) Σ ΘᵢΘᵢᵀ` over the stored angles; the divisor is always `k`.
pub fn empirical_moment_matrix(sample: &AngularSample) -> Result<MomentMatrix> {
    if sample.k < 1 {
        return Err(out_of_range("k", sample.k, ">= 1"));
    }
    let d = sample.d();
    let mut m = Matrix::zeros(d, d);
    for a in sample.angles() {
        for i in 0..d {
            if a[i] == 0.0 {
                continue;
            }
            for j in i..d {
                m[(i, j)] += a[i] * a[j];
            }
        }
    }
    let inv_k = 1.0 / sample.k as f64;
    for i in 0..d {
        for j in i..d {
            let v = m[(i, j)] * inv_k;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(MomentMatrix {
        matrix: m,
        k: sample.k,
    })
}

/// `⟨Σ, Π⟩`, the average captured squared norm `(1/k) Σ ΘᵢᵀΠΘᵢ`.
pub fn empirical_risk(sigma: &MomentMatrix, projection: &ProjectionMatrix) -> Result<f64> {
    hs_inner(&sigma.matrix, projection.matrix())
}

/// Weighted atoms on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteAngularMeasure {
    d: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    /// Mass removed because an atom could not be placed on the sphere.
    pub mass_deficit: f64,
}

impl DiscreteAngularMeasure {
    pub fn new(d: usize, atoms: Vec<f64>, weights: Vec<f64>, mass_deficit: f64) -> Result<Self> {
        if atoms.len() != weights.len() * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coordinates", weights.len() * d),
                actual: format!("{}", atoms.len()),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(out_of_range("weight", w, ">= 0"));
        }
        Ok(DiscreteAngularMeasure {
            d,
            atoms,
            weights,
            mass_deficit,
        })
    }

    pub fn empty(d: usize) -> Self {
        DiscreteAngularMeasure {
            d,
            atoms: Vec::new(),
            weights: Vec::new(),
            mass_deficit: 0.0,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.d..(i + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms
            .chunks_exact(self.d.max(1))
            .zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        crate::numeric::pairwise_sum(&self.weights)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DiscreteAngularMeasure {
            d: self.d,
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
            mass_deficit: self.mass_deficit * c,
        }
    }
}

/// Empirical measure of the exceedance angles, each with weight `1/k`.
pub fn empirical_angular_measure(sample: &AngularSample) -> DiscreteAngularMeasure {
    let w = 1.0 / sample.k as f64;
    DiscreteAngularMeasure {
        d: sample.d(),
        atoms: sample.angles.clone(),
        weights: vec![w; sample.len()],
        mass_deficit: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{symmetric_eigh, top_p_projection};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn polar_examples() {
        let (r, a) = polar_transform(&[3.0, 4.0, 0.0]).unwrap();
        assert_eq!(r, 5.0);
        assert_eq!(a, vec![0.6, 0.8, 0.0]);
        assert_eq!(polar_transform(&[1.0, 0.0]).unwrap(), (1.0, vec![1.0, 0.0]));
        assert_eq!(polar_transform(&[0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_select(&[5.0, 4.0, 3.0, 2.0, 1.0], 2).unwrap(), 3.0);
        assert_eq!(threshold_select(&[1.0, 1.0, 1.0], 1).unwrap(), 1.0);
        let ten: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        assert_eq!(threshold_select(&ten, 9).unwrap(), 1.0);
        assert!(threshold_select(&ten, 10).is_err());
        assert!(threshold_select(&ten, 0).is_err());
    }

    #[test]
    fn exceedance_examples() {
        let data = DataMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let s = extract_exceedances(&data, 1).unwrap();
        assert_eq!(s.threshold, 0.5);
        assert_eq!(s.len(), 1);
        assert_eq!(s.angle(0), &[1.0, 0.0]);
        assert_eq!(s.indices, vec![0]);

        let tied = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let s = extract_exceedances(&tied, 1).unwrap();
        assert!(s.is_empty());
        let m = empirical_moment_matrix(&s).unwrap();
        assert_eq!(m.matrix, Matrix::zeros(2, 2));
    }

    #[test]
    fn zero_rows_are_reported() {
        let err = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert_eq!(err, Error::ZeroRows { rows: vec![1, 2] });
        assert!(DataMatrix::new(1, 1, vec![1.0]).is_err());
    }

    #[test]
    fn moment_matrix_examples() {
        let s = AngularSample::from_angles(&[vec![1.0, 0.0]], 1).unwrap();
        assert_eq!(empirical_moment_matrix(&s).unwrap().matrix, Matrix::diag(&[1.0, 0.0]));

        let s = AngularSample::from_angles(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(empirical_moment_matrix(&s).unwrap().matrix, Matrix::diag(&[0.5, 0.5]));

        // (1,1)/√2 and (1,-1)/√2: outer products are [[.5,.5],[.5,.5]] and
        // [[.5,-.5],[-.5,.5]]; their mean over k=2 is diag(1/2, 1/2).
        let s = AngularSample::from_angles(
            &[vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2]],
            2,
        )
        .unwrap();
        let m = empirical_moment_matrix(&s).unwrap().matrix;
        assert!((&m - &Matrix::diag(&[0.5, 0.5])).max_abs() < 1e-15);
    }

    #[test]
    fn risk_examples() {
        let sigma = MomentMatrix::new(Matrix::diag(&[0.5, 0.5]), 2).unwrap();
        assert_eq!(empirical_risk(&sigma, &ProjectionMatrix::identity(2)).unwrap(), 1.0);
        let e1 = ProjectionMatrix::from_orthonormal(&[vec![1.0, 0.0]], 2);
        assert_eq!(empirical_risk(&sigma, &e1).unwrap(), 0.5);
        let wrong = ProjectionMatrix::identity(3);
        assert!(empirical_risk(&sigma, &wrong).is_err());
    }

    #[test]
    fn angular_measure_examples() {
        let s = AngularSample::from_angles(&[vec![1.0, 0.0]], 1).unwrap();
        let h = empirical_angular_measure(&s);
        assert_eq!(h.len(), 1);
        assert_eq!(h.weights(), &[1.0]);
        let s = AngularSample::from_angles(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(empirical_angular_measure(&s).weights(), &[0.5, 0.5]);
        let s = AngularSample::from_angles(&[], 5).unwrap();
        let h = empirical_angular_measure(&s);
        assert!(h.is_empty());
        assert_eq!(h.total_mass(), 0.0);
    }

    fn arb_data() -> impl Strategy<Value = DataMatrix> {
        (3usize..40, 2usize..5).prop_flat_map(|(n, d)| {
            prop::collection::vec(0.01f64..10.0, n * d)
                .prop_map(move |v| DataMatrix::new(n, d, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn trace_is_one_with_distinct_radii(data in arb_data(), kf in 0.0f64..1.0) {
            let k = 1 + ((data.n() - 2) as f64 * kf) as usize;
            let s = extract_exceedances(&data, k).unwrap();
            prop_assert!(s.len() <= k);
            for a in s.angles() {
                prop_assert!((euclidean_norm(a) - 1.0).abs() <= 1e-12);
            }
            for r in &s.radii {
                prop_assert!(*r > s.threshold);
            }
            let m = empirical_moment_matrix(&s).unwrap();
            let expect = s.len() as f64 / k as f64;
            prop_assert!((m.matrix.trace() - expect).abs() <= 1e-12);
        }

        #[test]
        fn pca_projection_maximises_risk(data in arb_data(), seed in 0u64..1000) {
            let k = data.n() - 1;
            let s = extract_exceedances(&data, k).unwrap();
            let m = empirical_moment_matrix(&s).unwrap();
            let e = symmetric_eigh(&m.matrix).unwrap();
            let d = data.d();
            let p = 1 + (seed as usize) % (d - 1);
            let best = empirical_risk(&m, &top_p_projection(&e, p).unwrap()).unwrap();
            prop_assert!(best <= m.matrix.trace() + 1e-12);
            // competitor: projection onto the first p coordinates after a
            // rotation of the eigenbasis.
            let rot = crate::linalg::expm(&Matrix::from_fn(d, d, |i, j| {
                let t = ((i * 7 + j * 3 + seed as usize) % 11) as f64 / 11.0 - 0.5;
                if i < j { t } else if i > j { -(((j * 7 + i * 3 + seed as usize) % 11) as f64 / 11.0 - 0.5) } else { 0.0 }
            })).unwrap();
            let vecs: Vec<Vec<f64>> = (0..p).map(|c| rot.column(c)).collect();
            let comp = ProjectionMatrix::from_orthonormal(&vecs, d);
            let r = empirical_risk(&m, &comp).unwrap();
            prop_assert!(r >= -1e-12);
            prop_assert!(r <= best + 1e-12);
        }

        #[test]
        fn threshold_permutation_invariant(mut radii in prop::collection::vec(0.0f64..100.0, 2..50), k in 1usize..10, shift in 0usize..50) {
            let k = k.min(radii.len() - 1);
            let t = threshold_select(&radii, k).unwrap();
            let len = radii.len();
            radii.rotate_left(shift % len);
            radii.reverse();
            prop_assert_eq!(threshold_select(&radii, k).unwrap(), t);
        }

        #[test]
        fn scaling_leaves_angles(data in arb_data(), c in 0.1f64..50.0) {
            let k = data.n() / 2;
            let a = extract_exceedances(&data, k).unwrap();
            let b = extract_exceedances(&data.scaled(c).unwrap(), k).unwrap();
            prop_assert_eq!(&a.indices, &b.indices);
            for (x, y) in a.angles().zip(b.angles()) {
                for (u, v) in x.iter().zip(y) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }
}
