//! Data-driven choice of the projection dimension.
//!
//! `p̂` is the smallest `p` whose captured spectral mass `λ̂₁ + … + λ̂_p`
//! exceeds `τ + k^{−1/2} z_β σ̂_p`, where `σ̂_p²` is the sample variance of
//! the captured squared norms `‖Π_{V̂}Θ‖²` over the exceedances.

use crate::error::{out_of_range, Result};
use crate::extremes::{AngularSample, MomentMatrix};
use crate::linalg::{symmetric_eigh, SymmetricEigen};
use crate::pca::PcaFit;

/// Inverse of the standard normal CDF.
///
/// Rational approximation (Acklam) refined by one Halley step on the
/// forward CDF.
pub fn normal_quantile(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(out_of_range("beta", beta, "in (0, 1)"));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let mut x = if beta < LOW {
        tail(beta)
    } else if beta > 1.0 - LOW {
        -tail(1.0 - beta)
    } else {
        let q = beta - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - beta;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

/// Squared norms of the angles after projection on each leading eigenspace:
/// entry `[l][p-1]` is `‖Π_p Θ_l‖²`.
fn cumulative_squared_norms(sample: &AngularSample, eigen: &SymmetricEigen) -> Vec<Vec<f64>> {
    let d = eigen.dim();
    let v = &eigen.eigenvectors;
    sample
        .angles()
        .map(|theta| {
            let mut acc = 0.0;
            (0..d)
                .map(|m| {
                    let c: f64 = (0..d).map(|i| v[(i, m)] * theta[i]).sum();
                    acc += c * c;
                    acc
                })
                .collect()
        })
        .collect()
}

fn variance_about(values: impl Iterator<Item = f64>, centre: f64, k: usize) -> f64 {
    let ss: f64 = values.map(|x| (x - centre) * (x - centre)).sum();
    ss / (k - 1) as f64
}

/// `σ̂_p = sqrt((1/(k−1)) Σ_l (‖Π_{V̂}Θ_l‖² − Σᵢ≤p λ̂ᵢ)²)`, summed over the
/// exceedances only.
pub fn sigma_hat_p(sample: &AngularSample, fit: &PcaFit) -> Result<f64> {
    if sample.k < 2 {
        return Err(out_of_range("k", sample.k, ">= 2"));
    }
    let norms = sample
        .angles()
        .map(|theta| {
            let proj = fit.projection.apply(theta);
            proj.iter().map(|x| x * x).sum::<f64>()
        });
    Ok(variance_about(norms, fit.captured, sample.k).sqrt())
}

/// One row of the selection table.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionRow {
    pub p: usize,
    pub captured: f64,
    pub sigma_hat: f64,
    pub threshold: f64,
}

impl DimensionRow {
    pub fn accepted(&self) -> bool {
        self.captured > self.threshold
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionSelection {
    pub p_hat: usize,
    pub tau: f64,
    pub beta: f64,
    pub k: usize,
    pub per_p: Vec<DimensionRow>,
}

impl DimensionSelection {
    /// Re-runs the decision for another `τ`, keeping each `σ̂_p`.
    pub fn p_hat_for_tau(&self, tau: f64) -> usize {
        let z = normal_quantile(self.beta).unwrap_or(0.0);
        let scale = z / (self.k as f64).sqrt();
        first_accepted(
            self.per_p
                .iter()
                .map(|r| r.captured > tau + scale * r.sigma_hat),
            self.per_p.len(),
        )
    }
}

fn first_accepted(decisions: impl Iterator<Item = bool>, d: usize) -> usize {
    decisions
        .enumerate()
        .find(|(_, ok)| *ok)
        .map_or(d, |(i, _)| i + 1)
}

fn check_levels(tau: f64, beta: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(out_of_range("tau", tau, "in (0, 1)"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(out_of_range("beta", beta, "in (0, 1)"));
    }
    Ok(())
}

/// `p̂ = min{p ≤ d | Σᵢ≤p λ̂ᵢ > τ + k^{−1/2} z_β σ̂_p}`; `p̂ = d` if no row
/// passes (the full-rank row passes analytically).
pub fn select_dimension(
    sample: &AngularSample,
    sigma: &MomentMatrix,
    tau: f64,
    beta: f64,
) -> Result<DimensionSelection> {
    check_levels(tau, beta)?;
    let eigen = symmetric_eigh(&sigma.matrix)?;
    select_dimension_from_eigen(sample, &eigen, tau, beta)
}

/// As [`select_dimension`] with a precomputed eigendecomposition of `Σ̂`.
pub fn select_dimension_from_eigen(
    sample: &AngularSample,
    eigen: &SymmetricEigen,
    tau: f64,
    beta: f64,
) -> Result<DimensionSelection> {
    check_levels(tau, beta)?;
    let k = sample.k;
    if k < 2 {
        return Err(out_of_range("k", k, ">= 2"));
    }
    let d = eigen.dim();
    let z = normal_quantile(beta)?;
    let scale = z / (k as f64).sqrt();
    let norms = cumulative_squared_norms(sample, eigen);
    let mut captured = 0.0;
    let per_p: Vec<DimensionRow> = (1..=d)
        .map(|p| {
            captured += eigen.eigenvalues[p - 1];
            let s = variance_about(norms.iter().map(|r| r[p - 1]), captured, k).sqrt();
            DimensionRow {
                p,
                captured,
                sigma_hat: s,
                threshold: tau + scale * s,
            }
        })
        .collect();
    let p_hat = first_accepted(per_p.iter().map(DimensionRow::accepted), d);
    Ok(DimensionSelection {
        p_hat,
        tau,
        beta,
        k,
        per_p,
    })
}
