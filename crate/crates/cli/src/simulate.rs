use expca::io::write_data_csv;
use expca::models::sample_model_rows;
use expca::RngStream;

use crate::settings::{Outputs, Settings};
use crate::{push, CliError, SimulateArgs};

const KEYS: [&str; 3] = ["n", "seed", "output"];

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let mut over = Vec::new();
    args.model.push(&mut over);
    push(&mut over, "n", &args.n);
    push(&mut over, "seed", &args.seed);
    push(&mut over, "output", &args.out.as_ref().map(|p| p.display().to_string()));
    over.extend(args.common.set);

    let mut s = Settings::load(&[], args.common.config.as_deref(), &over, &KEYS, true)?;
    let spec = s.model()?;
    let n: usize = s.value("n", 1000)?;
    let out = s.path("output", "--out")?;
    let seed = match s.optional::<u64>("seed")? {
        Some(seed) => seed,
        None => {
            let seed: u64 = rand::random();
            eprintln!("seed = {seed}");
            s.value("seed", seed)?
        }
    };

    let rows = sample_model_rows(RngStream::new(seed, 0), &spec, n).map_err(CliError::runtime)?;
    let mut csv = Vec::new();
    write_data_csv(&mut csv, spec.d, &rows).map_err(CliError::runtime)?;
    let mut outputs = Outputs::default();
    let mut config_path = out.clone().into_os_string();
    config_path.push(".config");
    outputs.add(out, csv);
    outputs.add(config_path.into(), s.resolved().into_bytes());
    outputs.write()
}
