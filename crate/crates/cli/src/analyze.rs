use std::fs::File;
use std::io::BufReader;

use expca::dimension::select_dimension_from_eigen;
use expca::functionals::rank_frechet_standardize;
use expca::io::{fmt_f64, read_data_csv, write_measure_csv, write_table};
use expca::linalg::symmetric_eigh;
use expca::{
    all_functionals, empirical_moment_matrix, extract_exceedances, pca_angular_measure, DimMode,
    EstimatorConfig, TailFunctionalParams,
};

use crate::settings::{Outputs, Settings};
use crate::{push, AnalyzeArgs, CliError};

const KEYS: [&str; 11] = [
    "input",
    "output",
    "k",
    "k_tilde",
    "p",
    "tau",
    "beta",
    "standardize",
    "functional.alpha",
    "functional.p_model",
    "functional.t_i",
];

pub fn run(args: AnalyzeArgs) -> Result<(), CliError> {
    let mut over = Vec::new();
    push(&mut over, "input", &args.input.as_ref().map(|p| p.display().to_string()));
    push(&mut over, "output", &args.out.as_ref().map(|p| p.display().to_string()));
    push(&mut over, "k", &args.k);
    push(&mut over, "k_tilde", &args.k_tilde);
    push(&mut over, "p", &args.p);
    push(&mut over, "tau", &args.tau);
    push(&mut over, "beta", &args.beta);
    if args.standardize {
        over.push(("standardize".into(), "true".into()));
    }
    push(&mut over, "functional.alpha", &args.alpha);
    push(&mut over, "functional.p_model", &args.p_model);
    push(&mut over, "functional.t_i", &args.t_i);
    over.extend(args.common.set);

    let mut s = Settings::load(&[], args.common.config.as_deref(), &over, &KEYS, false)?;
    let input = s.path("input", "--input")?;
    let out = s.path("output", "--out")?;
    let k: usize = s.required("k", "--k")?;
    if k < 1 {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    let k_tilde: usize = s.value("k_tilde", k)?;
    let p_raw: String = s.value("p", "auto".to_string())?;
    let tau: f64 = s.value("tau", 0.95)?;
    let beta: f64 = s.value("beta", 0.95)?;
    let standardize: bool = s.value("standardize", false)?;
    let alpha: f64 = s.value("functional.alpha", 1.0)?;
    let p_model: usize = s.value("functional.p_model", 2)?;
    let t_i: f64 = s.value("functional.t_i", 0.9 / (p_model as f64).sqrt())?;
    let params = TailFunctionalParams::new(alpha, p_model, t_i).map_err(CliError::usage)?;
    let dim_mode = match p_raw.as_str() {
        "auto" => DimMode::Auto { tau, beta },
        v => DimMode::Fixed(
            v.parse()
                .map_err(|_| CliError::Usage(format!("p = '{v}': expected an integer or 'auto'")))?,
        ),
    };
    let cfg = EstimatorConfig { k, k_tilde, dim_mode };

    let file = File::open(&input).map_err(|e| CliError::io(&input, e))?;
    let mut data = read_data_csv(BufReader::new(file)).map_err(CliError::runtime)?;
    if standardize {
        data = rank_frechet_standardize(&data).map_err(CliError::runtime)?;
    }
    let d = data.d();
    if p_model > d {
        return Err(CliError::Runtime(format!("functional.p_model = {p_model} exceeds d = {d}")));
    }
    cfg.validate(data.n(), d).map_err(CliError::runtime)?;

    let fit_sample = extract_exceedances(&data, k_tilde).map_err(CliError::runtime)?;
    let sigma = empirical_moment_matrix(&fit_sample).map_err(CliError::runtime)?;
    let eigen = symmetric_eigh(&sigma.matrix).map_err(CliError::runtime)?;
    let estimate = pca_angular_measure(&data, &cfg).map_err(CliError::runtime)?;
    let selection = match &estimate.selection {
        Some(sel) => Some(sel.clone()),
        None if k_tilde >= 2 => {
            Some(select_dimension_from_eigen(&fit_sample, &eigen, tau, beta).map_err(CliError::runtime)?)
        }
        None => None,
    };
    let functionals = all_functionals(&estimate.measure, &params).map_err(CliError::runtime)?;

    let mut outputs = Outputs::default();
    let total = eigen.eigenvalues.iter().sum::<f64>();
    let mut cum = 0.0;
    let eig_rows: Vec<Vec<String>> = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| {
            cum += l;
            vec![(i + 1).to_string(), fmt_f64(*l), fmt_f64(cum / total)]
        })
        .collect();
    outputs.add(out.join("eigenvalues.csv"), table(&["index", "eigenvalue", "captured_fraction"], eig_rows)?);
    if let Some(sel) = &selection {
        let rows = sel.per_p.iter().map(|r| {
            vec![
                r.p.to_string(),
                fmt_f64(r.captured),
                fmt_f64(r.sigma_hat),
                fmt_f64(r.threshold),
                r.accepted().to_string(),
            ]
        });
        outputs.add(
            out.join("dimension.csv"),
            table(&["p", "captured", "sigma_hat", "threshold", "accepted"], rows)?,
        );
    }
    let mut measure = Vec::new();
    write_measure_csv(&mut measure, &estimate.measure).map_err(CliError::runtime)?;
    outputs.add(out.join("measure.csv"), measure);
    let names = ["i", "ii", "iii", "iv"];
    let rows = names.iter().zip(functionals).map(|(n, v)| vec![n.to_string(), fmt_f64(v)]);
    outputs.add(out.join("functionals.csv"), table(&["functional", "value"], rows)?);
    outputs.add(out.join("config.txt"), s.resolved().into_bytes());
    outputs.write()?;

    println!("n = {}, d = {d}, k = {k}, k_tilde = {k_tilde}", data.n());
    if let Some(sel) = &selection {
        println!("p_hat = {} (tau = {tau}, beta = {beta})", sel.p_hat);
    }
    println!("p used = {}", estimate.p);
    for (n, v) in names.iter().zip(functionals) {
        println!("functional ({n}) = {v:.6}");
    }
    Ok(())
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows).map_err(CliError::runtime)?;
    Ok(buf)
}
