//! PCA-based angular-measure estimators and four tail functionals.

use crate::dimension::{select_dimension_from_eigen, DimensionSelection};
use crate::error::{out_of_range, Error, Result};
use crate::extremes::{
    empirical_moment_matrix, extract_exceedances, polar_transform, DataMatrix,
    DiscreteAngularMeasure,
};
use crate::linalg::{symmetric_eigh, top_p_projection};
use crate::numeric::pairwise_sum;

/// Parameters of the tail functionals (i)–(iv).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFunctionalParams {
    pub alpha: f64,
    /// Number of leading coordinates the functionals (i)–(ii) refer to.
    pub p_model: usize,
    pub t_i: f64,
}

impl TailFunctionalParams {
    pub fn new(alpha: f64, p_model: usize, t_i: f64) -> Result<Self> {
        let prm = TailFunctionalParams {
            alpha,
            p_model,
            t_i,
        };
        prm.validate()?;
        Ok(prm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(out_of_range("alpha", self.alpha, "> 0"));
        }
        if self.p_model < 1 {
            return Err(out_of_range("p_model", self.p_model, ">= 1"));
        }
        let upper = 1.0 / (self.p_model as f64).sqrt();
        if !(self.t_i > 0.0 && self.t_i < upper) {
            return Err(out_of_range("t_i", self.t_i, format!("in (0, {upper})")));
        }
        Ok(())
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.p_model > d {
            return Err(out_of_range("p_model", self.p_model, format!("<= d = {d}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DimMode {
    Fixed(usize),
    Auto { tau: f64, beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Exceedances used for the measure.
    pub k: usize,
    /// Exceedances used to fit the subspace and the dimension.
    pub k_tilde: usize,
    pub dim_mode: DimMode,
}

impl EstimatorConfig {
    pub fn fixed(k: usize, k_tilde: usize, p: usize) -> Self {
        EstimatorConfig {
            k,
            k_tilde,
            dim_mode: DimMode::Fixed(p),
        }
    }

    pub fn auto(k: usize, k_tilde: usize, tau: f64, beta: f64) -> Self {
        EstimatorConfig {
            k,
            k_tilde,
            dim_mode: DimMode::Auto { tau, beta },
        }
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.k_tilde < 1 || self.k_tilde > self.k {
            return Err(out_of_range("k_tilde", self.k_tilde, format!("1..={}", self.k)));
        }
        if n < 2 || self.k > n - 1 {
            return Err(out_of_range("k", self.k, format!("1..={}", n.saturating_sub(1))));
        }
        match self.dim_mode {
            DimMode::Fixed(p) if p < 1 || p > d => Err(out_of_range("p", p, format!("1..={d}"))),
            DimMode::Auto { .. } if self.k_tilde < 2 => {
                Err(out_of_range("k_tilde", self.k_tilde, ">= 2 for automatic dimension"))
            }
            DimMode::Auto { tau, .. } if !(tau > 0.0 && tau < 1.0) => {
                Err(out_of_range("tau", tau, "in (0, 1)"))
            }
            DimMode::Auto { beta, .. } if !(beta > 0.0 && beta < 1.0) => {
                Err(out_of_range("beta", beta, "in (0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaMeasureEstimate {
    pub measure: DiscreteAngularMeasure,
    /// Projection dimension used.
    pub p: usize,
    pub selection: Option<DimensionSelection>,
}

/// Fits the PCA subspace on the `k̃` largest observations and projects the
/// `k` largest onto it; atoms are the renormalised projections with weight
/// `1/k`. Zero projections are dropped and their mass recorded as deficit.
pub fn pca_angular_measure(data: &DataMatrix, cfg: &EstimatorConfig) -> Result<PcaMeasureEstimate> {
    let d = data.d();
    cfg.validate(data.n(), d)?;
    let fit_sample = extract_exceedances(data, cfg.k_tilde)?;
    let eigen = symmetric_eigh(&empirical_moment_matrix(&fit_sample)?.matrix)?;
    let (p, selection) = match cfg.dim_mode {
        DimMode::Fixed(p) => (p, None),
        DimMode::Auto { tau, beta } => {
            let sel = select_dimension_from_eigen(&fit_sample, &eigen, tau, beta)?;
            (sel.p_hat, Some(sel))
        }
    };
    let projection = top_p_projection(&eigen, p)?;
    let sample = extract_exceedances(data, cfg.k)?;
    let w = 1.0 / cfg.k as f64;
    let mut atoms = Vec::with_capacity(sample.len() * d);
    let mut weights = Vec::with_capacity(sample.len());
    let mut dropped = 0usize;
    for &i in &sample.indices {
        match polar_transform(&projection.apply(data.row(i))) {
            Ok((_, angle)) => {
                atoms.extend(angle);
                weights.push(w);
            }
            Err(_) => dropped += 1,
        }
    }
    if weights.is_empty() && dropped > 0 {
        return Err(Error::AllProjectionsVanish);
    }
    let measure = DiscreteAngularMeasure::new(d, atoms, weights, dropped as f64 * w)?;
    Ok(PcaMeasureEstimate {
        measure,
        p,
        selection,
    })
}

fn weighted_sum(h: &DiscreteAngularMeasure, f: impl Fn(&[f64]) -> f64) -> f64 {
    let terms: Vec<f64> = h.iter().map(|(x, w)| w * f(x)).collect();
    pairwise_sum(&terms)
}

fn pos_pow(x: f64, alpha: f64) -> f64 {
    x.max(0.0).powf(alpha)
}

/// Per-atom integrands `[(i), (ii), (iii) numerator, (iii) denominator, (iv)]`.
pub fn integrands(x: &[f64], prm: &TailFunctionalParams) -> [f64; 5] {
    let p = prm.p_model;
    let a = prm.alpha;
    let mean_top = x[..p].iter().sum::<f64>() / p as f64;
    let min_top = x[..p].iter().copied().fold(f64::INFINITY, f64::min);
    let max_rest = x[p..].iter().copied().fold(0.0, f64::max);
    let max_all = x.iter().copied().fold(0.0, f64::max);
    let min_all = x.iter().copied().fold(f64::INFINITY, f64::min);
    [
        if mean_top > prm.t_i { 1.0 } else { 0.0 },
        (pos_pow(min_top, a) - pos_pow(max_rest, a)).max(0.0),
        pos_pow(x[0], a),
        pos_pow(max_all, a),
        pos_pow(min_all, a),
    ]
}

/// `H{x | p⁻¹ Σⱼ≤p xʲ > t}`.
pub fn functional_i(h: &DiscreteAngularMeasure, prm: &TailFunctionalParams) -> Result<f64> {
    prm.check_dim(h.d())?;
    Ok(weighted_sum(h, |x| integrands(x, prm)[0]))
}

/// `∫ ((minⱼ≤p xʲ)^α − (maxⱼ>p xʲ)^α)⁺ H(dx)`, negatives clamped at 0.
pub fn functional_ii(h: &DiscreteAngularMeasure, prm: &TailFunctionalParams) -> Result<f64> {
    prm.check_dim(h.d())?;
    Ok(weighted_sum(h, |x| integrands(x, prm)[1]))
}

/// `∫ (x¹)^α H(dx) / ∫ (maxⱼ≤d xʲ)^α H(dx)`.
pub fn functional_iii(h: &DiscreteAngularMeasure, prm: &TailFunctionalParams) -> Result<f64> {
    prm.check_dim(h.d())?;
    let num = weighted_sum(h, |x| integrands(x, prm)[2]);
    let den = weighted_sum(h, |x| integrands(x, prm)[3]);
    if den == 0.0 {
        return Err(Error::ZeroDenominator("functional (iii)"));
    }
    Ok(num / den)
}

/// `∫ (minⱼ≤d xʲ)^α H(dx)`, negatives clamped at 0.
pub fn functional_iv(h: &DiscreteAngularMeasure, prm: &TailFunctionalParams) -> Result<f64> {
    prm.check_dim(h.d())?;
    Ok(weighted_sum(h, |x| integrands(x, prm)[4]))
}

/// `[(i), (ii), (iii), (iv)]`; (iii) is NaN when its denominator vanishes.
pub fn all_functionals(h: &DiscreteAngularMeasure, prm: &TailFunctionalParams) -> Result<[f64; 4]> {
    let iii = match functional_iii(h, prm) {
        Err(Error::ZeroDenominator(_)) => f64::NAN,
        other => other?,
    };
    Ok([
        functional_i(h, prm)?,
        functional_ii(h, prm)?,
        iii,
        functional_iv(h, prm)?,
    ])
}

/// Per column, replaces values by `−1/ln(rank/(n+1))`; ties are ranked in
/// input order.
pub fn rank_frechet_standardize(data: &DataMatrix) -> Result<DataMatrix> {
    let (n, d) = (data.n(), data.d());
    if n < 2 {
        return Err(out_of_range("n", n, ">= 2"));
    }
    let mut out = vec![0.0; n * d];
    let mut order: Vec<usize> = (0..n).collect();
    for col in 0..d {
        let value = |i: usize| data.row(i)[col];
        let first = value(0);
        if (1..n).all(|i| value(i) == first) {
            return Err(Error::ConstantColumn { col });
        }
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        for (rank0, &i) in order.iter().enumerate() {
            let u = (rank0 + 1) as f64 / (n + 1) as f64;
            out[i * d + col] = -1.0 / u.ln();
        }
        order.sort_unstable();
    }
    DataMatrix::new(n, d, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremes::{empirical_angular_measure, AngularSample};
    use crate::models::{sample_frechet, sample_model, ModelSpec, RngStream};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn atoms(points: &[Vec<f64>], k: usize) -> DiscreteAngularMeasure {
        empirical_angular_measure(&AngularSample::from_angles(points, k).unwrap())
    }

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn functional_examples() {
        let prm = TailFunctionalParams::new(1.0, 2, 0.65).unwrap();
        let diag = atoms(&[vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]], 1);
        assert_eq!(functional_i(&diag, &prm).unwrap(), 1.0);
        assert!((functional_ii(&diag, &prm).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(functional_i(&atoms(&[e(4, 2)], 1), &prm).unwrap(), 0.0);
        assert_eq!(functional_ii(&atoms(&[e(4, 0)], 1), &prm).unwrap(), 0.0);

        let p = 3;
        let uniform = atoms(&(0..p).map(|i| e(5, i)).collect::<Vec<_>>(), p);
        let prm3 = TailFunctionalParams::new(2.0, p, 0.3).unwrap();
        assert!((functional_iii(&uniform, &prm3).unwrap() - 1.0 / p as f64).abs() < 1e-15);
        assert_eq!(functional_iv(&uniform, &prm3).unwrap(), 0.0);

        let d = 4;
        let centre = atoms(&[vec![1.0 / (d as f64).sqrt(); d]], 1);
        let prm2 = TailFunctionalParams::new(2.0, 2, 0.5).unwrap();
        assert!((functional_iv(&centre, &prm2).unwrap() - 1.0 / d as f64).abs() < 1e-15);
        let neg = atoms(&[vec![0.5, 0.5, 0.5, -0.5]], 1);
        assert_eq!(functional_iv(&neg, &prm2).unwrap(), 0.0);

        assert!(matches!(
            functional_iii(&DiscreteAngularMeasure::empty(4), &prm2),
            Err(Error::ZeroDenominator(_))
        ));
        assert!(all_functionals(&DiscreteAngularMeasure::empty(4), &prm2).unwrap()[2].is_nan());
        assert!(TailFunctionalParams::new(1.0, 2, 0.71).is_err());
        assert!(functional_i(&atoms(&[e(2, 0)], 1), &prm3).is_err());
    }

    #[test]
    fn pca_measure_examples() {
        // data inside span(e1, e2): projection is the identity on it
        let rows: Vec<Vec<f64>> = (1..=50)
            .map(|i| {
                let t = i as f64 * 0.1;
                vec![i as f64 * t.cos().abs() + 0.1, i as f64 * t.sin().abs() + 0.1, 0.0]
            })
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let plain = empirical_angular_measure(&extract_exceedances(&data, 20).unwrap());
        let est = pca_angular_measure(&data, &EstimatorConfig::fixed(20, 20, 2)).unwrap();
        assert_eq!(est.measure.len(), plain.len());
        for ((a, wa), (b, wb)) in est.measure.iter().zip(plain.iter()) {
            assert_eq!(wa, wb);
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let full = pca_angular_measure(&data, &EstimatorConfig::fixed(20, 5, 3)).unwrap();
        assert_eq!(full.measure, plain);

        assert!(EstimatorConfig::fixed(20, 21, 2).validate(50, 3).is_err());
        assert!(EstimatorConfig::fixed(50, 10, 2).validate(50, 3).is_err());
        assert!(EstimatorConfig::fixed(20, 10, 4).validate(50, 3).is_err());
        assert!(EstimatorConfig::auto(20, 1, 0.9, 0.9).validate(50, 3).is_err());
    }

    #[test]
    fn zero_projections_are_dropped() {
        // the fit sample spans e1 only; later exceedances along e2 vanish
        let rows = vec![
            vec![10.0, 0.0],
            vec![0.0, 5.0],
            vec![4.0, 0.0],
            vec![1.0, 1.0],
        ];
        let data = DataMatrix::from_rows(&rows).unwrap();
        let est = pca_angular_measure(&data, &EstimatorConfig::fixed(3, 1, 1)).unwrap();
        assert_eq!(est.measure.len(), 2);
        assert!((est.measure.mass_deficit - 1.0 / 3.0).abs() < 1e-15);
        let only = DataMatrix::from_rows(&[vec![10.0, 0.0], vec![0.0, 5.0], vec![0.0, 1.0]]).unwrap();
        // k = 2 keeps e1 and e2; rank-1 fit on k̃ = 1 keeps e1: not all vanish
        assert!(pca_angular_measure(&only, &EstimatorConfig::fixed(2, 1, 1)).is_ok());
        let flipped = DataMatrix::from_rows(&[vec![10.0, 0.0], vec![0.0, 5.0], vec![0.0, 4.0], vec![0.0, 1.0]]).unwrap();
        let est = pca_angular_measure(&flipped, &EstimatorConfig::fixed(3, 1, 1)).unwrap();
        assert_eq!(est.measure.len(), 1);
    }

    #[test]
    fn auto_dimension_on_subspace_model() {
        let spec = ModelSpec::dirichlet(6, 2, 1.0).with_noise(0.0);
        let data = sample_model(RngStream::new(11, 0), &spec, 2000).unwrap();
        let est = pca_angular_measure(&data, &EstimatorConfig::auto(100, 50, 0.95, 0.95)).unwrap();
        assert_eq!(est.p, 2);
        assert!(est.selection.is_some());
    }

    #[test]
    fn rank_standardisation() {
        let mut rng = RngStream::new(12, 0).rng();
        let n = 10_000;
        let col0 = sample_frechet(&mut rng, 1.0, n);
        let col1 = sample_frechet(&mut rng, 1.0, n);
        let flat: Vec<f64> = col0.iter().zip(&col1).flat_map(|(a, b)| [*a, *b]).collect();
        let data = DataMatrix::new(n, 2, flat).unwrap();
        let z = rank_frechet_standardize(&data).unwrap();
        let mut xs: Vec<f64> = z.rows().map(|r| r[0]).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((-1.0 / x).exp() - (i + 1) as f64 / n as f64).abs())
            .fold(0.0, f64::max);
        assert!(ks <= 0.05);

        let monotone = data.map_rows(|_, r| r[0] = r[0].ln() * 3.0 + 7.0).unwrap();
        assert_eq!(rank_frechet_standardize(&monotone).unwrap(), z);

        let tied = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0], vec![2.0, 1.0]]).unwrap();
        let s = rank_frechet_standardize(&tied).unwrap();
        assert!(s.row(0)[0] < s.row(1)[0]);
        let constant = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(rank_frechet_standardize(&constant), Err(Error::ConstantColumn { col: 0 }));
        let single = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(rank_frechet_standardize(&single).is_err());
    }

    fn arb_measure() -> impl Strategy<Value = DiscreteAngularMeasure> {
        (1usize..20, 3usize..6).prop_flat_map(|(m, d)| {
            (
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), m),
                prop::collection::vec(0.01f64..1.0, m),
            )
                .prop_map(move |(pts, w)| {
                    let mut atoms = Vec::new();
                    for mut p in pts {
                        p[0] += 0.01;
                        atoms.extend(polar_transform(&p).unwrap().1);
                    }
                    DiscreteAngularMeasure::new(d, atoms, w, 0.0).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn functional_scaling(h in arb_measure(), c in 0.1f64..10.0, alpha in 0.5f64..3.0) {
            let prm = TailFunctionalParams::new(alpha, 2, 0.5).unwrap();
            let a = all_functionals(&h, &prm).unwrap();
            let b = all_functionals(&h.scaled(c), &prm).unwrap();
            for idx in [0, 1, 3] {
                prop_assert!((b[idx] - c * a[idx]).abs() <= 1e-12 * (1.0 + c * a[idx].abs()));
            }
            prop_assert!((b[2] - a[2]).abs() <= 1e-12);
            prop_assert!(a[0] >= 0.0 && a[0] <= h.total_mass() + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a[2]));
        }

        #[test]
        fn estimator_scale_invariance(seed in 0u64..50, c in 0.1f64..100.0) {
            let spec = ModelSpec::dirichlet(4, 2, 1.0);
            let data = sample_model(RngStream::new(seed, 0), &spec, 300).unwrap();
            let scaled = data.scaled(c).unwrap();
            for cfg in [EstimatorConfig::fixed(50, 10, 2), EstimatorConfig::auto(50, 10, 0.9, 0.9)] {
                let a = pca_angular_measure(&data, &cfg).unwrap();
                let b = pca_angular_measure(&scaled, &cfg).unwrap();
                prop_assert_eq!(a.p, b.p);
                prop_assert_eq!(a.measure.len(), b.measure.len());
                for ((x, _), (y, _)) in a.measure.iter().zip(b.measure.iter()) {
                    for (u, v) in x.iter().zip(y) {
                        prop_assert!((u - v).abs() <= 1e-10);
                    }
                }
            }
        }
    }
}
