//! Monte Carlo harness: oracle truths, RMSE studies and verification suites.

mod oracle;
mod report;
mod rmse;
mod verify;

pub use oracle::{
    compute_oracle, model_functional_params, Cov4, GaussianMatrixSampler, OracleConfig, OracleTruth,
    ThresholdOracle, MIN_MC_SIZE,
};
pub use report::{svg_line_chart, write_reports_csv, Series, VerificationReport};
pub use rmse::{rmse_study, EstimatorKind, RmseConfig, RmseRow, RmseTable, FUNCTIONAL_NAMES};
pub use verify::{
    expansion_inputs, random_frame, random_restricted_skew, random_symmetric, verify_clt, verify_excess_rate,
    verify_local_expansion, verify_local_identities, ExcessRateConfig, ExcessRateResult,
};
