use expca::experiments::{
    compute_oracle, rmse_study, EstimatorKind, OracleConfig, RmseConfig, FUNCTIONAL_NAMES,
    MIN_MC_SIZE,
};
use expca::io::{fmt_f64, write_table};
use expca::{RngStream, TailFunctionalParams};

use crate::settings::{Outputs, Settings};
use crate::{push, CliError, RmseArgs};

const KEYS: [&str; 16] = [
    "seed",
    "output",
    "n",
    "k_grid",
    "k_tilde",
    "replicates",
    "estimators",
    "estimator.p",
    "tau",
    "beta",
    "functional.alpha",
    "functional.t_i",
    "functional.p_model",
    "truths",
    "oracle.mc_size",
    "svg",
];

const TRUTH_STREAM: u64 = 0x7275_7468;

pub fn run(args: RmseArgs) -> Result<(), CliError> {
    let mut over = Vec::new();
    args.model.push(&mut over);
    push(&mut over, "seed", &args.seed);
    push(&mut over, "output", &args.out.as_ref().map(|p| p.display().to_string()));
    push(&mut over, "n", &args.n);
    push(&mut over, "k_grid", &args.k_grid);
    push(&mut over, "k_tilde", &args.k_tilde);
    push(&mut over, "replicates", &args.replicates);
    push(&mut over, "estimators", &args.estimators);
    push(&mut over, "estimator.p", &args.fixed_p);
    push(&mut over, "tau", &args.tau);
    push(&mut over, "beta", &args.beta);
    push(&mut over, "functional.t_i", &args.t_i);
    push(&mut over, "truths", &args.truths);
    push(&mut over, "oracle.mc_size", &args.mc_size);
    if args.no_svg {
        over.push(("svg".into(), "false".into()));
    }
    over.extend(args.common.set);

    let mut s = Settings::load(&[], args.common.config.as_deref(), &over, &KEYS, true)?;
    let spec = s.model()?;
    let seed: u64 = s.required("seed", "--seed")?;
    let out = s.path("output", "--out")?;
    let n: usize = s.value("n", 1000)?;
    let k_grid: Vec<usize> = s.list("k_grid", &[20, 50, 100, 150, 200, 250, 300])?;
    let k_tilde: usize = s.value("k_tilde", 10)?;
    let replicates: usize = s.value("replicates", 200)?;
    let estimators: Vec<EstimatorKind> = s.list("estimators", &EstimatorKind::ALL)?;
    let p: usize = s.value("estimator.p", spec.p)?;
    let tau: f64 = s.value("tau", 0.95)?;
    let beta: f64 = s.value("beta", 0.95)?;
    let alpha: f64 = s.value("functional.alpha", spec.alpha)?;
    let p_model: usize = s.value("functional.p_model", spec.p)?;
    let t_i: f64 = s.value("functional.t_i", spec.default_t_i())?;
    let given_truths: Option<Vec<f64>> = match s.optional::<String>("truths")? {
        None => None,
        Some(_) => Some(s.list("truths", &[])?),
    };
    let mc_size: usize = s.value("oracle.mc_size", 10_000_000)?;
    let svg: bool = s.value("svg", true)?;

    let params = TailFunctionalParams::new(alpha, p_model, t_i).map_err(CliError::usage)?;
    let cfg = RmseConfig {
        n,
        k_grid,
        k_tilde,
        replicates,
        estimators,
        p,
        tau,
        beta,
        params,
    };
    cfg.validate(spec.d).map_err(CliError::usage)?;
    let (truths, truth_se) = match given_truths {
        Some(t) => {
            let t: [f64; 4] = t
                .try_into()
                .map_err(|t: Vec<f64>| CliError::Usage(format!("truths needs 4 values, got {}", t.len())))?;
            (t, [f64::NAN; 4])
        }
        None => {
            if mc_size < MIN_MC_SIZE {
                return Err(CliError::Usage(format!("oracle.mc_size must be >= {MIN_MC_SIZE}")));
            }
            let oc = OracleConfig {
                mc_size,
                k_over_n: None,
                cov4: false,
            };
            let o = compute_oracle(&spec, &params, &oc, RngStream::new(seed, 0).derive(TRUTH_STREAM))
                .map_err(CliError::runtime)?;
            (o.functional_truths, o.functional_se)
        }
    };

    let table = rmse_study(&spec, &cfg, truths, seed).map_err(CliError::runtime)?;
    let mut outputs = Outputs::default();
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(CliError::runtime)?;
    outputs.add(out.join("rmse.csv"), csv);
    let mut tcsv = Vec::new();
    write_table(
        &mut tcsv,
        &["functional", "truth", "se"],
        (0..4).map(|f| vec![FUNCTIONAL_NAMES[f].to_string(), fmt_f64(truths[f]), fmt_f64(truth_se[f])]),
    )
    .map_err(CliError::runtime)?;
    outputs.add(out.join("truths.csv"), tcsv);
    if svg {
        for (f, name) in FUNCTIONAL_NAMES.iter().enumerate() {
            outputs.add(out.join(format!("rmse_{name}.svg")), table.svg(f).into_bytes());
        }
    }
    outputs.add(out.join("config.txt"), s.resolved().into_bytes());
    outputs.write()?;
    println!(
        "{} rows for {} estimators, {} replicates; truths {:?}",
        table.rows.len(),
        cfg.estimators.len(),
        replicates,
        truths
    );
    Ok(())
}
