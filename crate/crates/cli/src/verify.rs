use expca::experiments::{
    compute_oracle, expansion_inputs, model_functional_params, verify_clt, verify_excess_rate,
    verify_local_expansion, verify_local_identities, write_reports_csv, ExcessRateConfig,
    OracleConfig, VerificationReport,
};
use expca::io::{fmt_f64, write_table};
use expca::{ModelSpec, RngStream};

use crate::settings::{Outputs, Settings};
use crate::{push, CliError, Suite, VerifyArgs};

const KEYS: [&str; 18] = [
    "seed",
    "output",
    "oracle.mc_size",
    "clt.n",
    "clt.k",
    "clt.replicates",
    "rate.n",
    "rate.k_grid",
    "rate.p",
    "rate.replicates",
    "rate.gaussian_draws",
    "identities.trials",
    "identities.dims",
    "identities.competitors",
    "expansion.d",
    "expansion.p",
    "expansion.matrices",
    "expansion.k_grid",
];

const DEFAULTS: [(&str, &str); 5] = [
    ("model.family", "dirichlet"),
    ("model.d", "4"),
    ("model.p", "2"),
    ("model.alpha", "1"),
    ("model.noise_sigma", "0"),
];

// Tags for the streams not indexed by replicate.
const CLT_ORACLE: u64 = 0xc17;
const RATE_ORACLE: u64 = 0x4a7e;
const IDENTITIES: u64 = 0x1de;
const EXPANSION: u64 = 0xe4a;

struct Plan {
    spec: Option<ModelSpec>,
    mc_size: usize,
    clt: Option<(usize, usize, usize)>,
    rate: Option<ExcessRateConfig>,
    identities: Option<(usize, Vec<usize>, usize)>,
    expansion: Option<(usize, usize, usize, Vec<usize>)>,
}

fn plan(suite: Suite, s: &mut Settings) -> Result<Plan, CliError> {
    let wants = |x: Suite| suite == x || suite == Suite::All;
    let needs_model = wants(Suite::Clt) || wants(Suite::Rate);
    let spec = if needs_model { Some(s.model()?) } else { None };
    let mc_size = if needs_model { s.value("oracle.mc_size", 1_000_000)? } else { 0 };
    let clt = if wants(Suite::Clt) {
        Some((
            s.value("clt.n", 100_000)?,
            s.value("clt.k", 200)?,
            s.value("clt.replicates", 1000)?,
        ))
    } else {
        None
    };
    let rate = if wants(Suite::Rate) {
        Some(ExcessRateConfig {
            n: s.value("rate.n", 10_000)?,
            k_grid: s.list("rate.k_grid", &[50, 100, 200, 400, 800])?,
            p: s.value("rate.p", 1)?,
            replicates: s.value("rate.replicates", 1000)?,
            gaussian_draws: s.value("rate.gaussian_draws", 20_000)?,
        })
    } else {
        None
    };
    let identities = if wants(Suite::LocalIdentities) {
        Some((
            s.value("identities.trials", 1000)?,
            s.list("identities.dims", &[3, 4, 5, 6, 7, 8])?,
            s.value("identities.competitors", 500)?,
        ))
    } else {
        None
    };
    let expansion = if wants(Suite::LocalExpansion) {
        Some((
            s.value("expansion.d", 6)?,
            s.value("expansion.p", 2)?,
            s.value("expansion.matrices", 20)?,
            s.list("expansion.k_grid", &[1000, 10_000, 100_000])?,
        ))
    } else {
        None
    };
    Ok(Plan {
        spec,
        mc_size,
        clt,
        rate,
        identities,
        expansion,
    })
}

pub fn run(args: VerifyArgs) -> Result<(), CliError> {
    let mut over = Vec::new();
    args.model.push(&mut over);
    push(&mut over, "seed", &args.seed);
    push(&mut over, "output", &args.out.as_ref().map(|p| p.display().to_string()));
    if let Some(r) = args.replicates {
        over.push(("clt.replicates".into(), r.to_string()));
        over.push(("rate.replicates".into(), r.to_string()));
    }
    push(&mut over, "identities.trials", &args.trials);
    over.extend(args.common.set);

    let mut s = Settings::load(&DEFAULTS, args.common.config.as_deref(), &over, &KEYS, true)?;
    let seed: u64 = s.required("seed", "--seed")?;
    let out = s.path("output", "--out")?;
    let plan = plan(args.suite, &mut s)?;

    let mut reports: Vec<VerificationReport> = Vec::new();
    let mut outputs = Outputs::default();
    let root = RngStream::new(seed, 0);
    if let (Some((n, k, replicates)), Some(spec)) = (plan.clt, &plan.spec) {
        if k < 1 || k >= n {
            return Err(CliError::Usage(format!("clt.k = {k} outside 1..{n}")));
        }
        let params = model_functional_params(spec).map_err(CliError::usage)?;
        let oc = OracleConfig {
            mc_size: plan.mc_size,
            k_over_n: Some(k as f64 / n as f64),
            cov4: true,
        };
        let truth = compute_oracle(spec, &params, &oc, root.derive(CLT_ORACLE)).map_err(CliError::runtime)?;
        reports.extend(verify_clt(spec, n, k, replicates, &truth, seed).map_err(CliError::runtime)?);
    }
    if let (Some(cfg), Some(spec)) = (&plan.rate, &plan.spec) {
        let kmax = cfg.k_grid.iter().copied().max().unwrap_or(0);
        if kmax < 1 || kmax >= cfg.n {
            return Err(CliError::Usage(format!("rate.k_grid must lie in 1..{}", cfg.n)));
        }
        let params = model_functional_params(spec).map_err(CliError::usage)?;
        let oc = OracleConfig {
            mc_size: plan.mc_size,
            k_over_n: Some(kmax as f64 / cfg.n as f64),
            cov4: true,
        };
        let truth = compute_oracle(spec, &params, &oc, root.derive(RATE_ORACLE)).map_err(CliError::runtime)?;
        let res = verify_excess_rate(spec, cfg, &truth, seed).map_err(CliError::runtime)?;
        let mut curve = Vec::new();
        write_table(
            &mut curve,
            &["k", "mean_excess", "mean_excess_se", "mean_k_deviation_sq", "mean_k_deviation_sq_se"],
            res.mean_excess.iter().zip(&res.mean_deviation).map(|(e, d)| {
                vec![e.0.to_string(), fmt_f64(e.1), fmt_f64(e.2), fmt_f64(d.1), fmt_f64(d.2)]
            }),
        )
        .map_err(CliError::runtime)?;
        outputs.add(out.join("rate_curve.csv"), curve);
        reports.extend(res.reports);
    }
    if let Some((trials, dims, competitors)) = &plan.identities {
        reports.extend(
            verify_local_identities(dims, None, *trials, *competitors, root.derive(IDENTITIES))
                .map_err(CliError::runtime)?,
        );
    }
    if let Some((d, p, count, k_grid)) = &plan.expansion {
        let (frame, a_set) = expansion_inputs(root.derive(EXPANSION), *d, *p, *count).map_err(CliError::runtime)?;
        reports.extend(verify_local_expansion(&frame, &a_set, k_grid).map_err(CliError::runtime)?);
    }

    let mut csv = Vec::new();
    write_reports_csv(&mut csv, &reports).map_err(CliError::runtime)?;
    outputs.add(out.join("verify.csv"), csv);
    outputs.add(out.join("config.txt"), s.resolved().into_bytes());
    outputs.write()?;
    for r in &reports {
        println!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(failed));
    }
    Ok(())
}
