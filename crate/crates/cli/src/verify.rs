use std::fmt::Write as _;

use dualflat::identities::{Measure, ResidualReport, SampleConfig};
use dualflat::ConjugateMode;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct VerifyOutput<'a> {
    pub family: String,
    pub conjugate: ConjugateMode,
    pub config: &'a SampleConfig,
    pub passed: bool,
    pub reports: &'a [ResidualReport],
}

pub fn table(family: &str, config: &SampleConfig, reports: &[ResidualReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "family {family}  seed {}  samples {}  tol-closed {:e}  tol-quad {:e}",
        config.seed, config.samples, config.tol_closed, config.tol_quad
    );
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>12}  {:>12}  {:>9}  result",
        "identity", "samples", "max rel res", "min slack", "tolerance"
    );
    for r in reports {
        let (residual, slack) = match r.measure {
            Measure::Residual => (format!("{:.3e}", r.max_rel_residual), "-".to_string()),
            Measure::Slack => ("-".to_string(), r.min_slack.map_or("-".to_string(), |s| format!("{s:.3e}"))),
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>12}  {:>12}  {:>9.1e}  {}",
            r.name,
            r.samples,
            residual,
            slack,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    let _ = writeln!(out, "{passed}/{} identities passed", reports.len());
    out
}
