//! Verification suites for the asymptotic laws.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::oracle::{mean_se, GaussianMatrixSampler, OracleTruth};
use super::report::VerificationReport;
use crate::error::{out_of_range, Error, Result};
use crate::extremes::{empirical_moment_matrix, extract_exceedances};
use crate::linalg::{expm, hs_inner, symmetric_eigh, top_p_projection, Matrix};
use crate::models::{sample_model, ModelSpec, RngStream};
use crate::numeric::{linear_fit, mean};
use crate::pca::{
    limit_excess_risk, limit_projection_deviation, local_maximizer, local_projection,
    local_projection_expansion, project_to_restricted_skew, s_lambda, t_lambda, tbar_lambda,
    EigenFrame, SkewMatrix,
};

const IDENTITY_TOL: f64 = 1e-10;

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Symmetric matrix with independent standard normal entries on and above
/// the diagonal.
pub fn random_symmetric(rng: &mut impl Rng, d: usize) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = gaussian(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn random_skew(rng: &mut impl Rng, d: usize) -> SkewMatrix {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = gaussian(rng);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    SkewMatrix::skew_part(&m)
}

/// `QΛQᵀ` with eigenvalue gaps uniform in `[0.05, 0.3]` and a random
/// rotation `Q = exp(B)`.
pub fn random_frame(rng: &mut impl Rng, d: usize, p: usize) -> Result<EigenFrame> {
    let mut lambda = vec![0.0; d];
    let mut level = rng.random_range(0.0..0.1);
    for l in lambda.iter_mut().rev() {
        *l = level;
        level += rng.random_range(0.05..=0.3);
    }
    let q = expm(random_skew(rng, d).matrix())?;
    let sigma = &(&q * &Matrix::diag(&lambda)) * &q.transpose();
    EigenFrame::from_matrix(&sigma.symmetric_part(), p)
}

/// Random element of the restricted skew space of `frame`, unit HS norm.
pub fn random_restricted_skew(rng: &mut impl Rng, frame: &EigenFrame) -> Result<SkewMatrix> {
    let a = project_to_restricted_skew(&random_skew(rng, frame.dim()), frame)?;
    let norm = a.matrix().norm_hs();
    Ok(a.scale(1.0 / norm))
}

/// A random frame and `count` restricted skew matrices with HS norm uniform
/// in `(0.5, 2]`, preceded by `A = 0`.
pub fn expansion_inputs(stream: RngStream, d: usize, p: usize, count: usize) -> Result<(EigenFrame, Vec<SkewMatrix>)> {
    let mut rng = stream.rng();
    let frame = random_frame(&mut rng, d, p)?;
    let mut a_set = vec![SkewMatrix::zeros(d)];
    for _ in 0..count {
        let norm = 2.0 - 1.5 * rng.random::<f64>();
        a_set.push(random_restricted_skew(&mut rng, &frame)?.scale(norm));
    }
    Ok((frame, a_set))
}

fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / 1f64.max(x.abs()).max(y.abs())
}

fn rel_err_matrix(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).max_abs() / 1f64.max(a.max_abs()).max(b.max_abs())
}

/// `√k(Σ̂ₙ,ₖ − Σₙ,ₖ)` over `replicates` samples of size `n`: entry means
/// against 4 standard errors and three second moments against `Cov∞`
/// (relative tolerance 15%). Replicate `r` uses stream `r` of `seed`.
pub fn verify_clt(
    spec: &ModelSpec,
    n: usize,
    k: usize,
    replicates: usize,
    truth: &OracleTruth,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    if replicates < 500 {
        return Err(out_of_range("replicates", replicates, ">= 500"));
    }
    if k < 1 || k >= n {
        return Err(out_of_range("k", k, format!("1..{n}")));
    }
    let th = truth
        .threshold
        .as_ref()
        .ok_or_else(|| Error::Config("oracle lacks a finite-threshold moment matrix".into()))?;
    let q = k as f64 / n as f64;
    if rel_err(th.k_over_n, q) > 1e-12 {
        return Err(Error::Config(format!("oracle computed at k/n = {}, run uses {q}", th.k_over_n)));
    }
    let cov = truth
        .cov4
        .as_ref()
        .ok_or_else(|| Error::Config("oracle lacks fourth moments".into()))?;
    let d = spec.d;
    if th.sigma_nk.dim() != d {
        return Err(Error::ShapeMismatch {
            expected: format!("{d}x{d} oracle"),
            actual: format!("{0}x{0}", th.sigma_nk.dim()),
        });
    }
    let sk = (k as f64).sqrt();
    let deltas: Vec<Matrix> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = sample_model(RngStream::new(seed, r as u64), spec, n)?;
            let sigma = empirical_moment_matrix(&extract_exceedances(&data, k)?)?;
            Ok((&sigma.matrix - &th.sigma_nk.matrix).scale(sk))
        })
        .collect::<Result<_>>()?;

    let entry = |i: usize, j: usize| -> Vec<f64> { deltas.iter().map(|m| m[(i, j)]).collect() };
    let mut worst = 0.0f64;
    let mut worst_at = (0, 0);
    for i in 0..d {
        for j in i..d {
            let (m, se) = mean_se(&entry(i, j));
            let z = if se > 0.0 {
                m.abs() / se
            } else if m == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if z > worst {
                worst = z;
                worst_at = (i, j);
            }
        }
    }
    let mut reports = vec![VerificationReport::at_most(
        "clt entry means",
        worst,
        4.0,
        format!("max |mean|/se at {worst_at:?}, {replicates} replicates, n = {n}, k = {k}"),
    )];

    let covariance = |a: &[f64], b: &[f64]| -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        s / (a.len() - 1) as f64
    };
    let checks = [((0, 0), (0, 0)), ((0, 1), (0, 1)), ((0, 0), (1, 1))];
    for ((i, j), (l, m)) in checks {
        let emp = covariance(&entry(i, j), &entry(l, m));
        let oracle = cov.get(i, j, l, m);
        let stat = if oracle == 0.0 {
            if emp == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (emp / oracle - 1.0).abs()
        };
        reports.push(VerificationReport::at_most(
            format!("clt covariance ({i},{j})x({l},{m})"),
            stat,
            0.15,
            format!("empirical {emp:.6e}, oracle {oracle:.6e}"),
        ));
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessRateConfig {
    pub n: usize,
    pub k_grid: Vec<usize>,
    /// Rank of the fitted projection; must be a cluster boundary of `Σₙ,ₖ`.
    pub p: usize,
    pub replicates: usize,
    /// Gaussian draws for the limit expectations.
    pub gaussian_draws: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessRateResult {
    /// Per k: mean excess risk and its standard error.
    pub mean_excess: Vec<(usize, f64, f64)>,
    /// Per k: mean of `k‖Π̂ − Π*‖²_HS`.
    pub mean_deviation: Vec<(usize, f64, f64)>,
    pub limit_excess_mean: (f64, f64),
    pub limit_deviation_mean: (f64, f64),
    pub reports: Vec<VerificationReport>,
}

/// Excess risk of the rank-`p` PCA projection measured under `Σₙ,ₖ`, over
/// a grid of `k` on common samples. Reports the log-log slope (pass band
/// `[−1.25, −0.75]`) and, at the largest `k`, `k·E[excess]` and
/// `E‖√k(Π̂ − Π*)‖²` against their Gaussian limits (20%).
///
/// The oracle must carry an exact `Σₙ,ₖ` (independent of `k`) and `Cov∞`.
pub fn verify_excess_rate(spec: &ModelSpec, cfg: &ExcessRateConfig, truth: &OracleTruth, seed: u64) -> Result<ExcessRateResult> {
    let grid = &cfg.k_grid;
    let (kmin, kmax) = match (grid.iter().min(), grid.iter().max()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Config("empty k grid".into())),
    };
    if kmin < 1 || kmax >= cfg.n {
        return Err(out_of_range("k", kmax, format!("1..{}", cfg.n)));
    }
    if (kmax as f64) < 10.0 * kmin as f64 {
        return Err(Error::Config(format!("k grid must span a decade, got {kmin}..{kmax}")));
    }
    if cfg.replicates < 2 || cfg.gaussian_draws < 2 {
        return Err(Error::Config("need at least two replicates and two Gaussian draws".into()));
    }
    let th = truth
        .threshold
        .as_ref()
        .filter(|t| t.exact)
        .ok_or_else(|| Error::Config("excess-rate check needs an exact oracle moment matrix".into()))?;
    // exactness at k/n carries over to every smaller fraction
    if th.k_over_n * (1.0 + 1e-12) < kmax as f64 / cfg.n as f64 {
        return Err(Error::Config(format!(
            "oracle is exact up to k/n = {}, grid reaches {}",
            th.k_over_n,
            kmax as f64 / cfg.n as f64
        )));
    }
    let cov = truth
        .cov4
        .as_ref()
        .ok_or_else(|| Error::Config("oracle lacks fourth moments".into()))?;
    let sigma = &th.sigma_nk.matrix;
    let frame = EigenFrame::from_matrix(sigma, cfg.p)?;
    let pi_star = frame.pi_star().matrix().clone();
    let best = hs_inner(sigma, &pi_star)?;

    let per_rep: Vec<Vec<(f64, f64)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let data = sample_model(RngStream::new(seed, r as u64), spec, cfg.n)?;
            grid.iter()
                .map(|&k| {
                    let sample = extract_exceedances(&data, k)?;
                    let eig = symmetric_eigh(&empirical_moment_matrix(&sample)?.matrix)?;
                    let pi_hat = top_p_projection(&eig, cfg.p)?;
                    let excess = best - hs_inner(sigma, pi_hat.matrix())?;
                    let dev = (pi_hat.matrix() - &pi_star).norm_hs();
                    Ok((excess, k as f64 * dev * dev))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let column = |g: usize, pick: fn(&(f64, f64)) -> f64| -> Vec<f64> { per_rep.iter().map(|v| pick(&v[g])).collect() };
    let mut mean_excess = Vec::new();
    let mut mean_deviation = Vec::new();
    for (g, &k) in grid.iter().enumerate() {
        let (m, se) = mean_se(&column(g, |x| x.0));
        mean_excess.push((k, m, se));
        let (m, se) = mean_se(&column(g, |x| x.1));
        mean_deviation.push((k, m, se));
    }
    if mean_excess.iter().any(|&(_, m, _)| m.is_nan() || m <= 0.0) {
        return Err(Error::Config("degenerate regression: mean excess risk is not positive".into()));
    }
    let xs: Vec<f64> = mean_excess.iter().map(|&(k, _, _)| (k as f64).ln()).collect();
    let ys: Vec<f64> = mean_excess.iter().map(|&(_, m, _)| m.ln()).collect();
    let (_, slope, slope_se) =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Config("degenerate regression".into()))?;

    let sampler = GaussianMatrixSampler::new(cov)?;
    let mut rng = RngStream::new(seed, 0).derive(0x6a05).rng();
    let mut lim_excess = Vec::with_capacity(cfg.gaussian_draws);
    let mut lim_dev = Vec::with_capacity(cfg.gaussian_draws);
    for _ in 0..cfg.gaussian_draws {
        let u = sampler.draw(&mut rng);
        lim_excess.push(limit_excess_risk(&u, &frame, cfg.p)?);
        let w = limit_projection_deviation(&u, &frame, cfg.p)?.norm_hs();
        lim_dev.push(w * w);
    }
    let limit_excess_mean = mean_se(&lim_excess);
    let limit_deviation_mean = mean_se(&lim_dev);

    let last = grid.iter().position(|&k| k == kmax).expect("kmax is in the grid");
    let scaled_excess = kmax as f64 * mean_excess[last].1;
    let dev = mean_deviation[last].1;
    let reports = vec![
        VerificationReport::within(
            "excess risk log-log slope",
            slope,
            -1.25,
            -0.75,
            format!(
                "95% CI [{:.3}, {:.3}], k grid {grid:?}, {} replicates",
                slope - 1.96 * slope_se,
                slope + 1.96 * slope_se,
                cfg.replicates
            ),
        ),
        VerificationReport::at_most(
            "excess risk limit mean",
            (scaled_excess / limit_excess_mean.0 - 1.0).abs(),
            0.2,
            format!(
                "k*mean {scaled_excess:.6e} at k = {kmax}, Gaussian limit {:.6e} (se {:.1e})",
                limit_excess_mean.0, limit_excess_mean.1
            ),
        ),
        VerificationReport::at_most(
            "projection deviation limit mean",
            (dev / limit_deviation_mean.0 - 1.0).abs(),
            0.2,
            format!(
                "E k|P_hat - P*|^2 {dev:.6e} at k = {kmax}, Gaussian limit {:.6e} (se {:.1e})",
                limit_deviation_mean.0, limit_deviation_mean.1
            ),
        ),
    ];
    Ok(ExcessRateResult {
        mean_excess,
        mean_deviation,
        limit_excess_mean,
        limit_deviation_mean,
        reports,
    })
}

/// Remainder `r(k) = ‖Π̃ₖ,A − expansion‖_HS` of the second-order expansion:
/// `r(k)k^{3/2}` must vary by less than a factor 2 over `k_grid` and stay
/// below `10‖A‖³k^{−3/2}`, for every `A` in `a_set`.
pub fn verify_local_expansion(frame: &EigenFrame, a_set: &[SkewMatrix], k_grid: &[usize]) -> Result<Vec<VerificationReport>> {
    if k_grid.is_empty() {
        return Err(Error::Config("empty k grid".into()));
    }
    let mut worst_ratio = 1.0f64;
    let mut worst_cubic = 0.0f64;
    let mut zero_residual = 0.0f64;
    for a in a_set {
        let norm = a.matrix().norm_hs();
        if norm > 5.0 {
            return Err(out_of_range("|A|_HS", norm, "<= 5"));
        }
        let scaled: Vec<f64> = k_grid
            .iter()
            .map(|&k| {
                let exact = local_projection(frame, a, k)?;
                let approx = local_projection_expansion(frame, a, k)?;
                let r = (exact.matrix() - &approx).norm_hs();
                Ok(r * (k as f64).powf(1.5))
            })
            .collect::<Result<_>>()?;
        if norm == 0.0 {
            zero_residual = zero_residual.max(scaled.iter().copied().fold(0.0, f64::max));
            continue;
        }
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        worst_ratio = worst_ratio.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
        worst_cubic = worst_cubic.max(hi / norm.powi(3));
    }
    Ok(vec![
        VerificationReport::at_most(
            "expansion remainder order",
            worst_ratio,
            2.0,
            format!("max over A of max/min r(k)k^1.5, k grid {k_grid:?}, {} matrices", a_set.len()),
        ),
        VerificationReport::at_most(
            "expansion remainder cubic bound",
            worst_cubic,
            10.0,
            "max r(k)k^1.5/|A|^3".into(),
        ),
        VerificationReport::at_most("expansion remainder at A = 0", zero_residual, 0.0, String::new()),
    ])
}

/// Exact algebraic identities of the local limit over random frames:
/// (a) `T̄S = id`, (b) `⟨Σ,A²(Π*−Π⊥)⟩ = −‖S(A)‖²`,
/// (c) `⟨U,Π*A⟩ = ⟨T(U),S(A)⟩`, (d) `A* = T̄(T(U))` and no competitor
/// beats it, (e) the maximum equals `‖T(U)‖²`.
///
/// Each trial draws `d` from `dims` and `p` uniformly from `1..d` unless
/// given. The first trial uses `U = 0`.
pub fn verify_local_identities(
    dims: &[usize],
    p: Option<usize>,
    trials: usize,
    competitors: usize,
    stream: RngStream,
) -> Result<Vec<VerificationReport>> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(Error::Config(format!("dimensions must be >= 2, got {dims:?}")));
    }
    if let Some(p) = p {
        if dims.iter().any(|&d| p < 1 || p >= d) {
            return Err(out_of_range("p", p, "1..d-1 for every d"));
        }
    }
    let mut rng = stream.rng();
    let mut err = [0.0f64; 6];
    for trial in 0..trials {
        let d = dims[rng.random_range(0..dims.len())];
        let p = p.unwrap_or_else(|| rng.random_range(1..d));
        let frame = random_frame(&mut rng, d, p)?;
        let u = if trial == 0 {
            Matrix::zeros(d, d)
        } else {
            random_symmetric(&mut rng, d)
        };
        let a = random_restricted_skew(&mut rng, &frame)?.scale(rng.random_range(0.1..3.0));

        let s = s_lambda(&a, &frame)?;
        err[0] = err[0].max(rel_err_matrix(tbar_lambda(&s, &frame)?.matrix(), a.matrix()));
        err[1] = err[1].max(rel_err(frame.local_risk(&a)?, -hs_inner(&s, &s)?));
        let tu = t_lambda(&u, &frame)?;
        let lhs = hs_inner(&u, &(frame.pi_star().matrix() * a.matrix()))?;
        err[2] = err[2].max(rel_err(lhs, hs_inner(&tu, &s)?));

        let a_star = local_maximizer(&u, &frame)?;
        err[3] = err[3].max(rel_err_matrix(a_star.matrix(), tbar_lambda(&tu, &frame)?.matrix()));
        let best = frame.limit_process(&u, &a_star)?;
        for _ in 0..competitors {
            let eps = 10f64.powf(rng.random_range(-3.0..0.5));
            let b = random_restricted_skew(&mut rng, &frame)?.scale(eps);
            let value = frame.limit_process(&u, &a_star.add(&b))?;
            err[4] = err[4].max(value - best);
        }
        err[5] = err[5].max(rel_err(best, hs_inner(&tu, &tu)?));
    }
    let names = [
        "identity (a) tbar(S(A)) = A",
        "identity (b) local risk = -|S(A)|^2",
        "identity (c) <U, P*A> = <T(U), S(A)>",
        "identity (d) A* = tbar(T(U))",
        "identity (d) A* maximises the limit",
        "identity (e) maximum = |T(U)|^2",
    ];
    Ok(names
        .iter()
        .zip(err)
        .enumerate()
        .map(|(i, (name, e))| {
            let (tol, what) = if i == 4 {
                (1e-9, "max competitor excess over the value at A*")
            } else {
                (IDENTITY_TOL, "max relative error")
            };
            VerificationReport::at_most(*name, e, tol, format!("{what}, {trials} trials, dims {dims:?}"))
        })
        .collect())
}
