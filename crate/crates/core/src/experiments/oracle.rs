//! Monte Carlo ground truth for the simulation models.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{out_of_range, Error, Result};
use crate::extremes::{threshold_select, MomentMatrix};
use crate::functionals::{integrands, TailFunctionalParams};
use crate::linalg::{symmetric_eigh, Matrix};
use crate::models::{sample_model_rows, Family, LimitSampler, ModelSpec, RngStream};
use crate::numeric::{mean, sample_variance};

pub const MIN_MC_SIZE: usize = 100_000;
const BATCHES: usize = 20;
const MIN_TAIL: usize = 1000;
/// Rows generated per call in the finite-threshold pass.
const CHUNK: usize = 8192;

/// What to compute besides the limit-law quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Draws from the limit law (and from the model, when a finite threshold
    /// is requested and no exact shortcut applies).
    pub mc_size: usize,
    /// Exceedance fraction `k/n` for `Σₙ,ₖ` and `tₙ,ₖ`.
    pub k_over_n: Option<f64>,
    pub cov4: bool,
}

/// Fourth mixed moments `Cov∞(θᵢθⱼ, θₗθₘ)`, indexed by pairs `i ≤ j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cov4 {
    d: usize,
    matrix: Matrix,
}

impl Cov4 {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Covariance of the half-vectorisation `(Uᵢⱼ)_{i≤j}`, row-wise order.
    pub fn vech_covariance(&self) -> &Matrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize, l: usize, m: usize) -> f64 {
        self.matrix[(vech_index(self.d, i, j), vech_index(self.d, l, m))]
    }
}

fn vech_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

/// `Σₙ,ₖ` at a finite threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdOracle {
    pub k_over_n: f64,
    pub t_nk: f64,
    pub sigma_nk: MomentMatrix,
    pub sigma_nk_se: Matrix,
    /// The conditional law above `t_nk` equals the limit law, so `Σₙ,ₖ = Σ∞`.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleTruth {
    pub sigma_inf: MomentMatrix,
    pub sigma_inf_se: Matrix,
    pub threshold: Option<ThresholdOracle>,
    pub params: TailFunctionalParams,
    /// `[(i), (ii), (iii), (iv)]` under the limit angular measure.
    pub functional_truths: [f64; 4],
    pub functional_se: [f64; 4],
    pub cov4: Option<Cov4>,
    pub mc_size: usize,
}

struct Batch {
    w: f64,
    f: [f64; 5],
    m2: Vec<f64>,
    m4: Vec<f64>,
}

impl Batch {
    fn new(d: usize, cov4: bool) -> Self {
        let m = d * (d + 1) / 2;
        Batch {
            w: 0.0,
            f: [0.0; 5],
            m2: vec![0.0; d * d],
            m4: if cov4 { vec![0.0; m * m] } else { Vec::new() },
        }
    }

    fn add(&mut self, d: usize, theta: &[f64], w: f64, f: Option<[f64; 5]>, nz: &mut Vec<usize>, pairs: &mut Vec<(usize, f64)>) {
        self.w += w;
        if let Some(f) = f {
            for (acc, v) in self.f.iter_mut().zip(f) {
                *acc += w * v;
            }
        }
        nz.clear();
        nz.extend((0..d).filter(|&i| theta[i] != 0.0));
        pairs.clear();
        for (a, &i) in nz.iter().enumerate() {
            for &j in &nz[a..] {
                let v = theta[i] * theta[j];
                self.m2[i * d + j] += w * v;
                pairs.push((vech_index(d, i, j), v));
            }
        }
        if !self.m4.is_empty() {
            let m = d * (d + 1) / 2;
            for (a, &(u, x)) in pairs.iter().enumerate() {
                for &(v, y) in &pairs[a..] {
                    let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
                    self.m4[lo * m + hi] += w * x * y;
                }
            }
        }
    }

    fn sigma(&self, d: usize) -> Matrix {
        Matrix::from_fn(d, d, |i, j| {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            self.m2[i * d + j] / self.w
        })
    }
}

fn split_sizes(total: usize) -> Vec<usize> {
    (0..BATCHES)
        .map(|b| total / BATCHES + usize::from(b < total % BATCHES))
        .collect()
}

fn limit_batch(spec: &ModelSpec, prm: &TailFunctionalParams, stream: RngStream, size: usize, cov4: bool) -> Result<Batch> {
    let d = spec.d;
    let sampler = LimitSampler::new(spec)?;
    let mut rng = stream.rng();
    let mut acc = Batch::new(d, cov4);
    let (mut y, mut theta) = (vec![0.0; d], vec![0.0; d]);
    let (mut nz, mut pairs) = (Vec::new(), Vec::new());
    for _ in 0..size {
        let w = sampler.draw(&mut rng, &mut y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (t, v) in theta.iter_mut().zip(&y) {
            *t = v / norm;
        }
        acc.add(d, &theta, w, Some(integrands(&theta, prm)), &mut nz, &mut pairs);
    }
    Ok(acc)
}

fn chunk_stream(stream: RngStream, batch: usize, chunk: usize) -> RngStream {
    stream.derive((1 << 40) | ((batch as u64) << 24) | chunk as u64)
}

/// Visits the model rows of one batch, chunk by chunk, with their radii.
fn for_model_rows(spec: &ModelSpec, stream: RngStream, batch: usize, size: usize, mut f: impl FnMut(&[f64], f64)) -> Result<()> {
    let d = spec.d;
    let mut done = 0;
    let mut chunk = 0;
    while done < size {
        let len = CHUNK.min(size - done);
        let rows = sample_model_rows(chunk_stream(stream, batch, chunk), spec, len)?;
        for row in rows.chunks_exact(d) {
            f(row, row.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        done += len;
        chunk += 1;
    }
    Ok(())
}

fn entrywise_se(d: usize, batches: &[Matrix]) -> Matrix {
    let scale = 1.0 / (batches.len() as f64).sqrt();
    Matrix::from_fn(d, d, |i, j| {
        let xs: Vec<f64> = batches.iter().map(|m| m[(i, j)]).collect();
        sample_variance(&xs).sqrt() * scale
    })
}

fn moment_from_batches(d: usize, batches: &[Batch]) -> Matrix {
    let w: f64 = batches.iter().map(|b| b.w).sum();
    Matrix::from_fn(d, d, |i, j| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        batches.iter().map(|b| b.m2[i * d + j]).sum::<f64>() / w
    })
}

/// Maximum radius of the noiseless Dirichlet generator's angular part,
/// `‖W/E[W]‖ ≤ maxⱼ Σa / aⱼ`.
fn dirichlet_radius_bound(spec: &ModelSpec) -> f64 {
    let total: f64 = spec.dirichlet_params.iter().sum();
    spec.dirichlet_params.iter().map(|a| total / a).fold(0.0, f64::max)
}

fn finite_threshold(spec: &ModelSpec, k_over_n: f64, mc_size: usize, stream: RngStream) -> Result<(f64, Matrix, Matrix, usize)> {
    let d = spec.d;
    let tail = (k_over_n * mc_size as f64).round() as usize;
    if tail < MIN_TAIL || tail >= mc_size {
        return Err(Error::TooFewExceedances {
            count: tail,
            needed: MIN_TAIL,
        });
    }
    let sizes = split_sizes(mc_size);
    let radii: Vec<Vec<f64>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut r = Vec::with_capacity(sizes[b]);
            for_model_rows(spec, stream, b, sizes[b], |_, radius| r.push(radius))?;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = radii.into_iter().flatten().collect();
    let t = threshold_select(&all, tail)?;
    let batches: Vec<Batch> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut acc = Batch::new(d, false);
            let mut theta = vec![0.0; d];
            let (mut nz, mut pairs) = (Vec::new(), Vec::new());
            for_model_rows(spec, stream, b, sizes[b], |row, radius| {
                if radius > t {
                    for (th, v) in theta.iter_mut().zip(row) {
                        *th = v / radius;
                    }
                    acc.add(d, &theta, 1.0, None, &mut nz, &mut pairs);
                }
            })?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let count = batches.iter().map(|b| b.w).sum::<f64>() as usize;
    let per_batch: Vec<Matrix> = batches.iter().filter(|b| b.w > 0.0).map(|b| b.sigma(d)).collect();
    Ok((t, moment_from_batches(d, &batches), entrywise_se(d, &per_batch), count))
}

/// Ground truth for `spec`: `Σ∞`, the functionals (i)–(iv) and optionally
/// `Cov∞` from `mc_size` weighted draws of the limit law, and optionally
/// `Σₙ,ₖ` at the `(1 − k/n)`-quantile of the radius.
///
/// Standard errors come from 20 batches on independent streams. `Σₙ,ₖ` is
/// taken equal to `Σ∞` for the noiseless Dirichlet families once `tₙ,ₖ`
/// exceeds the largest radius of the angular part; otherwise it is estimated
/// from `mc_size` model rows.
pub fn compute_oracle(spec: &ModelSpec, params: &TailFunctionalParams, cfg: &OracleConfig, stream: RngStream) -> Result<OracleTruth> {
    spec.validate()?;
    params.validate()?;
    if params.p_model > spec.d {
        return Err(out_of_range("p_model", params.p_model, format!("<= d = {}", spec.d)));
    }
    if cfg.mc_size < MIN_MC_SIZE {
        return Err(out_of_range("mc_size", cfg.mc_size, format!(">= {MIN_MC_SIZE}")));
    }
    if let Some(q) = cfg.k_over_n {
        if !(q > 0.0 && q < 1.0) {
            return Err(out_of_range("k_over_n", q, "in (0, 1)"));
        }
    }
    let d = spec.d;
    let sizes = split_sizes(cfg.mc_size);
    let batches: Vec<Batch> = (0..BATCHES)
        .into_par_iter()
        .map(|b| limit_batch(spec, params, stream.derive(b as u64), sizes[b], cfg.cov4))
        .collect::<Result<_>>()?;

    let total_w: f64 = batches.iter().map(|b| b.w).sum();
    let sigma = moment_from_batches(d, &batches);
    let per_batch: Vec<Matrix> = batches.iter().map(|b| b.sigma(d)).collect();
    let sigma_inf_se = entrywise_se(d, &per_batch);

    let ratio = |b: &Batch, r: usize| -> f64 {
        if r == 2 {
            b.f[2] / b.f[3]
        } else {
            b.f[r] / b.w
        }
    };
    let mut functional_truths = [0.0; 4];
    let mut functional_se = [0.0; 4];
    for (out, r) in [0usize, 1, 2, 4].into_iter().enumerate() {
        let total = |idx: usize| batches.iter().map(|b| b.f[idx]).sum::<f64>();
        functional_truths[out] = if r == 2 {
            total(2) / total(3)
        } else {
            total(r) / total_w
        };
        let xs: Vec<f64> = batches.iter().map(|b| ratio(b, r)).collect();
        functional_se[out] = (sample_variance(&xs) / BATCHES as f64).sqrt();
    }

    let cov4 = cfg.cov4.then(|| {
        let m = d * (d + 1) / 2;
        let vech: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let matrix = Matrix::from_fn(m, m, |u, v| {
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            let e4 = batches.iter().map(|b| b.m4[lo * m + hi]).sum::<f64>() / total_w;
            let ((i, j), (l, q)) = (vech[u], vech[v]);
            e4 - sigma[(i, j)] * sigma[(l, q)]
        });
        Cov4 { d, matrix }
    });

    let threshold = match cfg.k_over_n {
        None => None,
        Some(q) => {
            let mean_w = total_w / cfg.mc_size as f64;
            let t_exact = (mean_w / q).powf(1.0 / spec.alpha);
            let exact_family = matches!(spec.family, Family::Dirichlet | Family::DirichletRotated);
            if exact_family && spec.noise_sigma == 0.0 && t_exact >= dirichlet_radius_bound(spec) {
                Some(ThresholdOracle {
                    k_over_n: q,
                    t_nk: t_exact,
                    sigma_nk: MomentMatrix::new(sigma.clone(), cfg.mc_size)?,
                    sigma_nk_se: sigma_inf_se.clone(),
                    exact: true,
                })
            } else {
                let (t, m, se, count) = finite_threshold(spec, q, cfg.mc_size, stream.derive(1000))?;
                Some(ThresholdOracle {
                    k_over_n: q,
                    t_nk: t,
                    sigma_nk: MomentMatrix::new(m, count)?,
                    sigma_nk_se: se,
                    exact: false,
                })
            }
        }
    };

    Ok(OracleTruth {
        sigma_inf: MomentMatrix::new(sigma, cfg.mc_size)?,
        sigma_inf_se,
        threshold,
        params: *params,
        functional_truths,
        functional_se,
        cov4,
        mc_size: cfg.mc_size,
    })
}

/// Functional parameters used for `spec` in the simulations.
pub fn model_functional_params(spec: &ModelSpec) -> Result<TailFunctionalParams> {
    TailFunctionalParams::new(spec.alpha, spec.p, spec.default_t_i())
}

/// Centered Gaussian symmetric matrices with `Cov(Uᵢⱼ, Uₗₘ)` from a [`Cov4`].
pub struct GaussianMatrixSampler {
    d: usize,
    factor: Matrix,
}

impl GaussianMatrixSampler {
    pub fn new(cov: &Cov4) -> Result<Self> {
        let eig = symmetric_eigh(cov.vech_covariance())?;
        let m = eig.dim();
        let factor = Matrix::from_fn(m, m, |i, j| {
            eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt()
        });
        Ok(GaussianMatrixSampler { d: cov.d, factor })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Matrix {
        let m = self.factor.rows();
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let v = self.factor.mat_vec(&z);
        let d = self.d;
        Matrix::from_fn(d, d, |i, j| v[vech_index(d, i, j)])
    }
}

/// Sample mean and its standard error.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), (sample_variance(xs) / xs.len() as f64).sqrt())
}
