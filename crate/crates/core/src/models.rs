//! Seeded samplers for the simulation models.
//!
//! All randomness comes from [`RngStream`]: a ChaCha8 generator keyed by a
//! 64-bit seed with a 64-bit stream id, so `(seed, stream)` pins the output
//! bit-for-bit and distinct replicates use distinct streams.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{out_of_range, Error, Result};
use crate::extremes::DataMatrix;
use crate::linalg::apply_givens;

/// `(seed, stream)` pair identifying an independent random sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A stream keyed by the same seed, for a different purpose. Tags are
    /// mixed into the high bits so they never collide with replicate ids.
    pub fn derive(&self, tag: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream: self.stream ^ (tag.rotate_right(16) | (1 << 63)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gumbel,
    Dirichlet,
    DirichletRotated,
}

impl Family {
    pub const NAMES: [&'static str; 3] = ["gumbel", "dirichlet", "dirichlet_rotated"];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gumbel => "gumbel",
            Family::Dirichlet => "dirichlet",
            Family::DirichletRotated => "dirichlet_rotated",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gumbel" => Ok(Family::Gumbel),
            "dirichlet" => Ok(Family::Dirichlet),
            "dirichlet_rotated" => Ok(Family::DirichletRotated),
            other => Err(Error::Config(format!(
                "unknown model family '{other}' (expected one of {})",
                Family::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub d: usize,
    pub p: usize,
    pub alpha: f64,
    /// Gumbel dependence parameter, ignored by the Dirichlet families.
    pub theta: f64,
    /// Dirichlet parameters for the first `p` coordinates.
    pub dirichlet_params: Vec<f64>,
    pub noise_sigma: f64,
    pub rotation_angle_bound: f64,
}

impl ModelSpec {
    fn base(family: Family, d: usize, p: usize, alpha: f64) -> Self {
        ModelSpec {
            family,
            d,
            p,
            alpha,
            theta: 2.0,
            dirichlet_params: vec![3.0; p],
            noise_sigma: 1.0,
            rotation_angle_bound: PI / 10.0,
        }
    }

    pub fn gumbel(d: usize, p: usize, alpha: f64, theta: f64) -> Self {
        ModelSpec {
            theta,
            ..Self::base(Family::Gumbel, d, p, alpha)
        }
    }

    pub fn dirichlet(d: usize, p: usize, alpha: f64) -> Self {
        Self::base(Family::Dirichlet, d, p, alpha)
    }

    pub fn dirichlet_rotated(d: usize, p: usize, alpha: f64) -> Self {
        Self::base(Family::DirichletRotated, d, p, alpha)
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        self.dirichlet_params = params;
        self
    }

    pub fn with_rotation_bound(mut self, bound: f64) -> Self {
        self.rotation_angle_bound = bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(out_of_range("d", self.d, ">= 2"));
        }
        if self.p < 1 || self.p >= self.d {
            return Err(out_of_range("p", self.p, format!("1..={}", self.d - 1)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(out_of_range("alpha", self.alpha, "> 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(out_of_range("noise_sigma", self.noise_sigma, ">= 0"));
        }
        match self.family {
            Family::Gumbel => {
                if !(self.theta >= 1.0 && self.theta.is_finite()) {
                    return Err(out_of_range("theta", self.theta, ">= 1"));
                }
            }
            Family::Dirichlet | Family::DirichletRotated => {
                if self.dirichlet_params.len() != self.p {
                    return Err(Error::Config(format!(
                        "dirichlet_params has {} entries, expected p = {}",
                        self.dirichlet_params.len(),
                        self.p
                    )));
                }
                if let Some(a) = self
                    .dirichlet_params
                    .iter()
                    .find(|a| !(**a > 0.0 && a.is_finite()))
                {
                    return Err(out_of_range("dirichlet_params", a, "> 0"));
                }
                if !(self.rotation_angle_bound >= 0.0 && self.rotation_angle_bound.is_finite()) {
                    return Err(out_of_range(
                        "rotation_angle_bound",
                        self.rotation_angle_bound,
                        ">= 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Threshold of functional (i) used for this model in the simulations.
    pub fn default_t_i(&self) -> f64 {
        match (self.family, self.p) {
            (Family::Gumbel, 2) => 0.7,
            (Family::Gumbel, 5) => 0.44,
            (_, 2) => 0.65,
            (_, 5) => 0.4,
            (_, p) => 0.9 / (p as f64).sqrt(),
        }
    }
}

pub(crate) fn uniform(rng: &mut impl Rng) -> f64 {
    rng.sample(Open01)
}

/// Unit exponential draw.
pub(crate) fn exponential(rng: &mut impl Rng) -> f64 {
    -uniform(rng).ln()
}

/// Fréchet(α) quantile at `u`: `(−ln u)^{−1/α}`.
pub fn frechet_quantile(u: f64, alpha: f64) -> f64 {
    (-u.ln()).powf(-1.0 / alpha)
}

pub fn sample_frechet(rng: &mut impl Rng, alpha: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| frechet_quantile(uniform(rng), alpha)).collect()
}

/// Positive stable draw with Laplace transform `exp(−t^a)`, `0 < a ≤ 1`
/// (Kanter's representation).
pub fn sample_positive_stable(rng: &mut impl Rng, a: f64) -> f64 {
    if a >= 1.0 {
        return 1.0;
    }
    let u = PI * uniform(rng);
    let e = exponential(rng);
    let lead = (a * u).sin() / u.sin().powf(1.0 / a);
    lead * (((1.0 - a) * u).sin() / e).powf((1.0 - a) / a)
}

/// One draw of the Gumbel model's first `p` coordinates, Fréchet(α) margins.
fn gumbel_point(rng: &mut impl Rng, spec: &ModelSpec, out: &mut [f64]) {
    let inv_theta = 1.0 / spec.theta;
    let s = sample_positive_stable(rng, inv_theta);
    for x in out.iter_mut().take(spec.p) {
        // (S/E)^{1/ϑ} is unit Fréchet with logistic dependence across j
        let z = (s / exponential(rng)).powf(inv_theta);
        *x = z.powf(1.0 / spec.alpha);
    }
}

pub fn sample_dirichlet(rng: &mut impl Rng, params: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = params
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

fn dirichlet_point(rng: &mut impl Rng, spec: &ModelSpec, gammas: &[Gamma<f64>], out: &mut [f64]) {
    let total_param: f64 = spec.dirichlet_params.iter().sum();
    let mut sum = 0.0;
    for (x, g) in out.iter_mut().zip(gammas) {
        *x = g.sample(rng);
        sum += *x;
    }
    let r = uniform(rng).powf(-1.0 / spec.alpha);
    for (x, a) in out.iter_mut().zip(&spec.dirichlet_params) {
        // W_j / E[W_j] with E[W_j] = a_j / Σa
        *x = r * (*x / sum) * (total_param / a);
    }
    if spec.family == Family::DirichletRotated {
        rotate(rng, spec, out);
    }
}

fn rotate(rng: &mut impl Rng, spec: &ModelSpec, x: &mut [f64]) {
    let i = rng.random_range(0..spec.p);
    let j = rng.random_range(spec.p..spec.d);
    let phi = spec.rotation_angle_bound * (2.0 * uniform(rng) - 1.0);
    apply_givens(x, i, j, phi);
}

/// Adds `|N(0, σ²)|` to every entry.
pub fn apply_noise_in_place(rng: &mut impl Rng, data: &mut [f64], sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    for x in data {
        let z: f64 = StandardNormal.sample(rng);
        *x += sigma * z.abs();
    }
}

pub fn apply_noise(rng: &mut impl Rng, data: &DataMatrix, sigma: f64) -> Result<DataMatrix> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(out_of_range("sigma", sigma, ">= 0"));
    }
    let mut flat = data.as_slice().to_vec();
    apply_noise_in_place(rng, &mut flat, sigma);
    DataMatrix::new(data.n(), data.d(), flat)
}

/// `n` rows of the model, row-major, noise included.
pub fn sample_model_rows(stream: RngStream, spec: &ModelSpec, n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = stream.rng();
    let d = spec.d;
    let mut data = vec![0.0; n * d];
    match spec.family {
        Family::Gumbel => {
            for row in data.chunks_exact_mut(d) {
                gumbel_point(&mut rng, spec, row);
            }
        }
        Family::Dirichlet | Family::DirichletRotated => {
            let gammas: Vec<Gamma<f64>> = spec
                .dirichlet_params
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("validated shape"))
                .collect();
            for row in data.chunks_exact_mut(d) {
                dirichlet_point(&mut rng, spec, &gammas, row);
            }
        }
    }
    apply_noise_in_place(&mut rng, &mut data, spec.noise_sigma);
    Ok(data)
}

pub fn sample_model(stream: RngStream, spec: &ModelSpec, n: usize) -> Result<DataMatrix> {
    DataMatrix::new(n, spec.d, sample_model_rows(stream, spec, n)?)
}

pub fn sample_gumbel_model(stream: RngStream, spec: &ModelSpec, n: usize) -> Result<DataMatrix> {
    if spec.family != Family::Gumbel {
        return Err(Error::Config(format!("expected gumbel family, got {}", spec.family)));
    }
    sample_model(stream, spec, n)
}

pub fn sample_dirichlet_model(stream: RngStream, spec: &ModelSpec, n: usize) -> Result<DataMatrix> {
    if spec.family == Family::Gumbel {
        return Err(Error::Config("expected a dirichlet family, got gumbel".into()));
    }
    sample_model(stream, spec, n)
}

/// Draws `(angle, weight)` such that `E[w f(Θ)] / E[w]` is the integral of
/// `f` against the limit angular measure of the noise-free model.
///
/// Dirichlet families: `Y = W/E[W]`, weight `‖Y‖^α`. Gumbel: spectral
/// vector `F` with iid Fréchet(ϑ) entries, `Y = F^{1/α}`, weight `‖Y‖^α`,
/// sampled with size bias on `ΣFⱼ` (one coordinate from the size-biased law,
/// weight divided by `ΣFⱼ`), which keeps the weights bounded for `α ≤ 2`.
pub struct LimitSampler<'a> {
    spec: &'a ModelSpec,
    gammas: Vec<Gamma<f64>>,
    size_bias: Option<Gamma<f64>>,
}

impl<'a> LimitSampler<'a> {
    pub fn new(spec: &'a ModelSpec) -> Result<Self> {
        spec.validate()?;
        let gammas = match spec.family {
            Family::Gumbel => Vec::new(),
            _ => spec
                .dirichlet_params
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("validated shape"))
                .collect(),
        };
        let size_bias = if spec.family == Family::Gumbel && spec.theta > 1.0 {
            Some(Gamma::new(1.0 - 1.0 / spec.theta, 1.0).expect("shape in (0,1)"))
        } else {
            None
        };
        Ok(LimitSampler {
            spec,
            gammas,
            size_bias,
        })
    }

    /// Writes the (unnormalised) limit point into `y` and returns its weight
    /// such that `y/‖y‖` is the angle.
    pub fn draw(&self, rng: &mut impl Rng, y: &mut [f64]) -> f64 {
        let spec = self.spec;
        y.iter_mut().for_each(|v| *v = 0.0);
        let p = spec.p;
        match spec.family {
            Family::Gumbel => {
                let pick = rng.random_range(0..p);
                let Some(g) = &self.size_bias else {
                    // independence: atoms at the unit vectors
                    y[pick] = 1.0;
                    return 1.0;
                };
                let mut sum_f = 0.0;
                for (j, v) in y.iter_mut().take(p).enumerate() {
                    let f = if j == pick {
                        g.sample(rng).powf(-1.0 / spec.theta)
                    } else {
                        frechet_quantile(uniform(rng), spec.theta)
                    };
                    sum_f += f;
                    *v = f.powf(1.0 / spec.alpha);
                }
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                norm.powf(spec.alpha) / sum_f
            }
            Family::Dirichlet | Family::DirichletRotated => {
                let total_param: f64 = spec.dirichlet_params.iter().sum();
                let mut sum = 0.0;
                for (v, g) in y.iter_mut().zip(&self.gammas) {
                    *v = g.sample(rng);
                    sum += *v;
                }
                for (v, a) in y.iter_mut().zip(&spec.dirichlet_params) {
                    *v = *v / sum * (total_param / a);
                }
                if spec.family == Family::DirichletRotated {
                    rotate(rng, spec, y);
                }
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                norm.powf(spec.alpha)
            }
        }
    }
}
