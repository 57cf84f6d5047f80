//! RMSE of the angular-measure estimators over replicated samples.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;

use super::report::{svg_line_chart, Series};
use crate::error::{Error, Result};
use crate::extremes::{empirical_angular_measure, extract_exceedances, DataMatrix};
use crate::functionals::{all_functionals, pca_angular_measure, EstimatorConfig, TailFunctionalParams};
use crate::io::{fmt_f64, write_table};
use crate::models::{sample_model, ModelSpec, RngStream};
use crate::numeric::pairwise_sum;

pub const FUNCTIONAL_NAMES: [&str; 4] = ["i", "ii", "iii", "iv"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Empirical angular measure of the `k` exceedances.
    Direct,
    /// PCA fitted on the same `k` exceedances, fixed `p`.
    PcaFixed,
    /// As `PcaFixed` with `p̂` from the selector.
    PcaAuto,
    /// PCA fitted on the `k̃` largest, fixed `p`.
    AltFixed,
    AltAuto,
    /// Returns the supplied truths; its RMSE is zero.
    Truth,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Direct,
        EstimatorKind::PcaFixed,
        EstimatorKind::PcaAuto,
        EstimatorKind::AltFixed,
        EstimatorKind::AltAuto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Direct => "direct",
            EstimatorKind::PcaFixed => "pca-fixed",
            EstimatorKind::PcaAuto => "pca-auto",
            EstimatorKind::AltFixed => "alt-fixed",
            EstimatorKind::AltAuto => "alt-auto",
            EstimatorKind::Truth => "truth",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .chain([EstimatorKind::Truth])
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown estimator '{s}' (expected one of direct, pca-fixed, pca-auto, alt-fixed, alt-auto, truth)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmseConfig {
    pub n: usize,
    pub k_grid: Vec<usize>,
    pub k_tilde: usize,
    pub replicates: usize,
    pub estimators: Vec<EstimatorKind>,
    /// Projection dimension of the fixed variants.
    pub p: usize,
    pub tau: f64,
    pub beta: f64,
    pub params: TailFunctionalParams,
}

impl RmseConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k_grid.is_empty() || self.estimators.is_empty() {
            return Err(Error::Config("k grid and estimator set must be nonempty".into()));
        }
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        self.params.validate()?;
        if self.params.p_model > d {
            return Err(Error::Config(format!("p_model = {} exceeds d = {d}", self.params.p_model)));
        }
        for &e in &self.estimators {
            for &k in &self.k_grid {
                if let Some(cfg) = self.estimator_config(e, k) {
                    cfg.validate(self.n, d)?;
                } else if k < 1 || k >= self.n {
                    return Err(Error::Config(format!("k = {k} outside 1..{}", self.n)));
                }
            }
        }
        Ok(())
    }

    fn estimator_config(&self, e: EstimatorKind, k: usize) -> Option<EstimatorConfig> {
        match e {
            EstimatorKind::PcaFixed => Some(EstimatorConfig::fixed(k, k, self.p)),
            EstimatorKind::PcaAuto => Some(EstimatorConfig::auto(k, k, self.tau, self.beta)),
            EstimatorKind::AltFixed => Some(EstimatorConfig::fixed(k, self.k_tilde, self.p)),
            EstimatorKind::AltAuto => Some(EstimatorConfig::auto(k, self.k_tilde, self.tau, self.beta)),
            EstimatorKind::Direct | EstimatorKind::Truth => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmseRow {
    pub estimator: EstimatorKind,
    /// 0-based index into (i)–(iv).
    pub functional: usize,
    pub k: usize,
    pub rmse: f64,
    pub mean_estimate: f64,
    pub truth: f64,
    /// Average projection dimension (d for the direct estimator).
    pub mean_p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmseTable {
    pub spec: ModelSpec,
    pub config: RmseConfig,
    pub truths: [f64; 4],
    pub rows: Vec<RmseRow>,
    /// `estimates[r][e][g]`: functionals of replicate `r`, estimator `e`,
    /// grid point `g`.
    estimates: Vec<Vec<Vec<[f64; 4]>>>,
    dims: Vec<Vec<Vec<usize>>>,
}

/// Per estimator and grid point: functional values and the dimension used.
type ReplicateOutput = (Vec<Vec<[f64; 4]>>, Vec<Vec<usize>>);

fn replicate(spec: &ModelSpec, cfg: &RmseConfig, truths: &[f64; 4], data: &DataMatrix) -> Result<ReplicateOutput> {
    let mut values = Vec::with_capacity(cfg.estimators.len());
    let mut dims = Vec::with_capacity(cfg.estimators.len());
    for &e in &cfg.estimators {
        let mut per_k = Vec::with_capacity(cfg.k_grid.len());
        let mut per_k_p = Vec::with_capacity(cfg.k_grid.len());
        for &k in &cfg.k_grid {
            let (f, p) = match (e, cfg.estimator_config(e, k)) {
                (EstimatorKind::Truth, _) => (*truths, spec.p),
                (_, Some(ec)) => {
                    let est = pca_angular_measure(data, &ec)?;
                    (all_functionals(&est.measure, &cfg.params)?, est.p)
                }
                (_, None) => {
                    let h = empirical_angular_measure(&extract_exceedances(data, k)?);
                    (all_functionals(&h, &cfg.params)?, data.d())
                }
            };
            per_k.push(f);
            per_k_p.push(p);
        }
        values.push(per_k);
        dims.push(per_k_p);
    }
    Ok((values, dims))
}

/// Runs `cfg.replicates` samples of size `n` from `spec` (replicate `r` on
/// stream `r` of `seed`) and tabulates the RMSE of every estimator and
/// functional at every `k` against `truths`.
pub fn rmse_study(spec: &ModelSpec, cfg: &RmseConfig, truths: [f64; 4], seed: u64) -> Result<RmseTable> {
    spec.validate()?;
    cfg.validate(spec.d)?;
    let results: Vec<ReplicateOutput> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let data = sample_model(RngStream::new(seed, r as u64), spec, cfg.n)?;
            replicate(spec, cfg, &truths, &data)
        })
        .collect::<Result<_>>()?;
    let (estimates, dims): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut table = RmseTable {
        spec: spec.clone(),
        config: cfg.clone(),
        truths,
        rows: Vec::new(),
        estimates,
        dims,
    };
    let all = 0..cfg.replicates;
    for (e, &est) in cfg.estimators.iter().enumerate() {
        for f in 0..4 {
            for (g, &k) in cfg.k_grid.iter().enumerate() {
                let vals: Vec<f64> = table.estimates.iter().map(|r| r[e][g][f]).collect();
                let ps: Vec<f64> = table.dims.iter().map(|r| r[e][g] as f64).collect();
                table.rows.push(RmseRow {
                    estimator: est,
                    functional: f,
                    k,
                    rmse: table.rmse_over(e, f, g, all.clone()),
                    mean_estimate: pairwise_sum(&vals) / vals.len() as f64,
                    truth: truths[f],
                    mean_p: pairwise_sum(&ps) / ps.len() as f64,
                });
            }
        }
    }
    Ok(table)
}

impl RmseTable {
    /// RMSE over a subrange of replicates, by estimator/grid position.
    pub fn rmse_over(&self, estimator: usize, functional: usize, grid: usize, replicates: Range<usize>) -> f64 {
        let truth = self.truths[functional];
        let sq: Vec<f64> = self.estimates[replicates]
            .iter()
            .map(|r| {
                let e = r[estimator][grid][functional] - truth;
                e * e
            })
            .collect();
        (pairwise_sum(&sq) / sq.len() as f64).sqrt()
    }

    pub fn row(&self, estimator: EstimatorKind, functional: usize, k: usize) -> Option<&RmseRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.functional == functional && r.k == k)
    }

    pub fn rmse(&self, estimator: EstimatorKind, functional: usize, k: usize) -> Option<f64> {
        self.row(estimator, functional, k).map(|r| r.rmse)
    }

    /// Per-replicate functionals of `estimator` at grid point `k`.
    pub fn estimates(&self, estimator: EstimatorKind, k: usize) -> Option<Vec<[f64; 4]>> {
        let e = self.config.estimators.iter().position(|&x| x == estimator)?;
        let g = self.config.k_grid.iter().position(|&x| x == k)?;
        Some(self.estimates.iter().map(|r| r[e][g]).collect())
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_table(
            writer,
            &["estimator", "functional", "k", "rmse", "mean_estimate", "truth", "mean_p", "replicates"],
            self.rows.iter().map(|r| {
                vec![
                    r.estimator.name().to_string(),
                    FUNCTIONAL_NAMES[r.functional].to_string(),
                    r.k.to_string(),
                    fmt_f64(r.rmse),
                    fmt_f64(r.mean_estimate),
                    fmt_f64(r.truth),
                    fmt_f64(r.mean_p),
                    self.config.replicates.to_string(),
                ]
            }),
        )
    }

    /// RMSE against `k`, one polyline per estimator.
    pub fn svg(&self, functional: usize) -> String {
        let series: Vec<Series> = self
            .config
            .estimators
            .iter()
            .map(|&e| Series {
                name: e.name().to_string(),
                points: self
                    .rows
                    .iter()
                    .filter(|r| r.estimator == e && r.functional == functional)
                    .map(|r| (r.k as f64, r.rmse))
                    .collect(),
            })
            .collect();
        let title = format!(
            "RMSE of functional ({}), {} d={} p={}, n={}",
            FUNCTIONAL_NAMES[functional], self.spec.family, self.spec.d, self.spec.p, self.config.n
        );
        svg_line_chart(&title, "k", "RMSE", &series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(spec: &ModelSpec, estimators: Vec<EstimatorKind>, replicates: usize) -> RmseConfig {
        RmseConfig {
            n: 400,
            k_grid: vec![20, 40],
            k_tilde: 10,
            replicates,
            estimators,
            p: spec.p,
            tau: 0.95,
            beta: 0.95,
            params: TailFunctionalParams::new(spec.alpha, spec.p, spec.default_t_i()).unwrap(),
        }
    }

    #[test]
    fn truth_estimator_has_zero_rmse() {
        let spec = ModelSpec::dirichlet(4, 2, 1.0);
        let cfg = small(&spec, vec![EstimatorKind::Truth, EstimatorKind::Direct], 5);
        let t = rmse_study(&spec, &cfg, [0.6, 0.4, 0.7, 0.0], 1).unwrap();
        for r in t.rows.iter().filter(|r| r.estimator == EstimatorKind::Truth) {
            assert_eq!(r.rmse, 0.0);
        }
        assert!(t.rows.iter().all(|r| r.rmse >= 0.0));
        assert_eq!(t.rows.len(), 2 * 4 * 2);
    }

    #[test]
    fn identity_projection_matches_direct() {
        let spec = ModelSpec::dirichlet(4, 2, 1.0);
        let mut cfg = small(&spec, vec![EstimatorKind::Direct, EstimatorKind::PcaFixed], 4);
        cfg.p = 4;
        let t = rmse_study(&spec, &cfg, [0.5; 4], 7).unwrap();
        for &k in &cfg.k_grid {
            let a = t.estimates(EstimatorKind::Direct, k).unwrap();
            let b = t.estimates(EstimatorKind::PcaFixed, k).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_replicate_rmse_is_absolute_error() {
        let spec = ModelSpec::gumbel(4, 2, 2.0, 2.0);
        let cfg = small(&spec, vec![EstimatorKind::Direct], 1);
        let truths = [0.3, 0.3, 0.7, 0.0];
        let t = rmse_study(&spec, &cfg, truths, 3).unwrap();
        let est = t.estimates(EstimatorKind::Direct, 20).unwrap();
        for f in 0..4 {
            assert_eq!(t.rmse(EstimatorKind::Direct, f, 20).unwrap(), (est[0][f] - truths[f]).abs());
        }
    }

    #[test]
    fn same_seed_same_csv() {
        let spec = ModelSpec::dirichlet(4, 2, 1.0);
        let cfg = small(&spec, EstimatorKind::ALL.to_vec(), 6);
        let run = || {
            let mut buf = Vec::new();
            rmse_study(&spec, &cfg, [0.6, 0.4, 0.7, 0.0], 11).unwrap().write_csv(&mut buf).unwrap();
            buf
        };
        let a = run();
        assert_eq!(a, run());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("estimator,functional,k,rmse,mean_estimate,truth,mean_p,replicates\n"));
        assert_eq!(text.lines().count(), 1 + 5 * 4 * 2);
    }

    #[test]
    fn config_errors() {
        let spec = ModelSpec::dirichlet(4, 2, 1.0);
        let mut cfg = small(&spec, vec![EstimatorKind::AltFixed], 2);
        cfg.k_grid = vec![5];
        assert!(rmse_study(&spec, &cfg, [0.0; 4], 1).is_err());
        cfg.k_grid = vec![];
        assert!(rmse_study(&spec, &cfg, [0.0; 4], 1).is_err());
        assert!("pca".parse::<EstimatorKind>().is_err());
        assert_eq!("alt-auto".parse::<EstimatorKind>().unwrap(), EstimatorKind::AltAuto);
    }

    #[test]
    fn svg_has_a_line_per_estimator() {
        let spec = ModelSpec::dirichlet(4, 2, 1.0);
        let cfg = small(&spec, vec![EstimatorKind::Direct, EstimatorKind::AltFixed], 2);
        let t = rmse_study(&spec, &cfg, [0.6, 0.4, 0.7, 0.0], 1).unwrap();
        assert_eq!(t.svg(0).matches("<polyline").count(), 2);
    }
}
