//! `compute`: evaluate divergence tasks from a JSON problem file.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dualflat::divergences::{
    affine, canonical, dual_inner_product, phi_divergence, psi_divergence, renyi, skew_combination,
};
use dualflat::geodesics::{affine_via_metric_integral, canonical_via_weighted_integral, GeodesicSpec};
use dualflat::{Chart, ConjugateMode, CoordinatePair, Error, Family, FamilyKind, NaturalParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub family: FamilySpec,
    pub points: BTreeMap<String, PointSpec>,
    pub tasks: Vec<Task>,
}

/// `{"kind": "binomial", "trials": 10}`; mixtures take a row-major
/// `components` table.
#[derive(Debug, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub kind: FamilyKind,
    #[serde(default)]
    pub conjugate: ConjugateMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PointSpec {
    Theta(Vec<f64>),
    Eta(Vec<f64>),
    Params(NaturalParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Canonical,
    Affine,
    DualInnerProduct,
    PsiDivergence,
    PhiDivergence,
    SkewCombination,
    Renyi,
    AffineViaMetricIntegral,
    CanonicalViaWeightedIntegral,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Canonical => "canonical",
            Op::Affine => "affine",
            Op::DualInnerProduct => "dual_inner_product",
            Op::PsiDivergence => "psi_divergence",
            Op::PhiDivergence => "phi_divergence",
            Op::SkewCombination => "skew_combination",
            Op::Renyi => "renyi",
            Op::AffineViaMetricIntegral => "affine_via_metric_integral",
            Op::CanonicalViaWeightedIntegral => "canonical_via_weighted_integral",
        }
    }

    fn arity(self) -> usize {
        if self == Op::DualInnerProduct {
            3
        } else {
            2
        }
    }

    fn takes_alpha(self) -> bool {
        matches!(self, Op::PsiDivergence | Op::PhiDivergence | Op::Renyi)
    }

    fn takes_chart(self) -> bool {
        matches!(self, Op::SkewCombination | Op::AffineViaMetricIntegral | Op::CanonicalViaWeightedIntegral)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub op: Op,
    pub args: Vec<String>,
    pub alpha: Option<f64>,
    pub weights: Option<[f64; 2]>,
    pub chart: Option<Chart>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    DomainError,
    Unsupported,
}

impl Status {
    fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::DomainError => "domain_error",
            Status::Unsupported => "unsupported",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<Chart>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub op: Op,
    pub args: Vec<String>,
    pub parameters: Parameters,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum PointOutput {
    Valid { theta: Vec<f64>, eta: Vec<f64>, psi: f64, phi: f64 },
    Invalid { status: Status, message: String },
}

#[derive(Debug, Serialize)]
pub struct ComputeOutput {
    pub family: String,
    pub points: BTreeMap<String, PointOutput>,
    pub results: Vec<ResultRecord>,
}

impl ComputeOutput {
    pub fn all_ok(&self) -> bool {
        self.results.iter().all(|r| r.status == Status::Ok)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("op,args,alpha,weights,chart,value,status\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.results {
            let p = &r.parameters;
            let weights = p.weights.map(|[a, b]| format!("{a};{b}")).unwrap_or_default();
            let chart = p.chart.map(|c| c.name()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.op.name(),
                r.args.join(";"),
                opt(p.alpha),
                weights,
                chart,
                opt(r.value),
                r.status.name()
            );
        }
        out
    }
}

pub fn parse_problem(text: &str) -> CliResult<ProblemFile> {
    let problem: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    for (i, task) in problem.tasks.iter().enumerate() {
        validate_task(&problem, task).map_err(|msg| CliError::Input(format!("tasks[{i}] ({}): {msg}", task.op.name())))?;
    }
    Ok(problem)
}

fn validate_task(problem: &ProblemFile, task: &Task) -> Result<(), String> {
    if task.args.len() != task.op.arity() {
        return Err(format!("expected {} point names, got {}", task.op.arity(), task.args.len()));
    }
    if let Some(name) = task.args.iter().find(|a| !problem.points.contains_key(*a)) {
        return Err(format!("undefined point {name:?}"));
    }
    match (task.op.takes_alpha(), task.alpha) {
        (true, None) => return Err("missing alpha".into()),
        (false, Some(_)) => return Err("alpha does not apply".into()),
        _ => {}
    }
    match (task.op == Op::SkewCombination, task.weights) {
        (true, None) => return Err("missing weights [a, b]".into()),
        (false, Some(_)) => return Err("weights do not apply".into()),
        _ => {}
    }
    if !task.op.takes_chart() && task.chart.is_some() {
        return Err("chart does not apply".into());
    }
    Ok(())
}

fn build_point(family: &Family, spec: &PointSpec) -> dualflat::Result<CoordinatePair> {
    match spec {
        PointSpec::Theta(v) => family.point(Chart::Theta, v.clone()),
        PointSpec::Eta(v) => family.point(Chart::Eta, v.clone()),
        PointSpec::Params(p) => family.point_from_params(p),
    }
}

fn status_of(err: &Error) -> Status {
    match err {
        Error::Unsupported(_) => Status::Unsupported,
        _ => Status::DomainError,
    }
}

fn evaluate(family: &Family, task: &Task, pts: &[&CoordinatePair]) -> dualflat::Result<f64> {
    let chart = task.chart.unwrap_or(Chart::Theta);
    let alpha = task.alpha.unwrap_or(f64::NAN);
    match task.op {
        Op::Canonical => Ok(canonical(family, pts[0], pts[1])?.value),
        Op::Affine => Ok(affine(family, pts[0], pts[1])?.value),
        Op::DualInnerProduct => dual_inner_product(family, pts[0], pts[1], pts[2]),
        Op::PsiDivergence => Ok(psi_divergence(family, pts[0], pts[1], alpha)?.value),
        Op::PhiDivergence => Ok(phi_divergence(family, pts[0], pts[1], alpha)?.value),
        Op::Renyi => Ok(renyi(family, pts[0], pts[1], alpha)?.value),
        Op::SkewCombination => {
            let [a, b] = task.weights.unwrap_or([f64::NAN; 2]);
            Ok(skew_combination(family, pts[0], pts[1], a, b, chart)?.value())
        }
        Op::AffineViaMetricIntegral => {
            affine_via_metric_integral(family, &GeodesicSpec::through(family, pts[0], pts[1], chart)?)
        }
        Op::CanonicalViaWeightedIntegral => {
            canonical_via_weighted_integral(family, &GeodesicSpec::through(family, pts[0], pts[1], chart)?)
        }
    }
}

/// Builds every point and evaluates every task. Malformed input (bad family
/// configuration, wrong coordinate dimension) is an error; domain violations
/// become per-record statuses.
pub fn run_problem(problem: &ProblemFile) -> CliResult<ComputeOutput> {
    let family = Family::new(problem.family.kind.clone())
        .map_err(|e| CliError::Input(format!("family: {e}")))?
        .with_conjugate_mode(problem.family.conjugate);

    let mut built: BTreeMap<&str, Result<CoordinatePair, Error>> = BTreeMap::new();
    for (name, spec) in &problem.points {
        let point = match build_point(&family, spec) {
            Err(e @ (Error::Dimension { .. } | Error::Config(_))) => {
                return Err(CliError::Input(format!("points.{name}: {e}")));
            }
            other => other,
        };
        built.insert(name, point);
    }

    let results = problem
        .tasks
        .iter()
        .map(|task| {
            let parameters = Parameters {
                alpha: task.alpha,
                weights: task.weights,
                chart: task.op.takes_chart().then(|| task.chart.unwrap_or(Chart::Theta)),
            };
            let mut pts = Vec::with_capacity(task.args.len());
            let mut failure = None;
            for name in &task.args {
                match &built[name.as_str()] {
                    Ok(p) => pts.push(p),
                    Err(e) => {
                        failure.get_or_insert((status_of(e), format!("point {name}: {e}")));
                    }
                }
            }
            let outcome = match failure {
                Some(f) => Err(f),
                None => evaluate(&family, task, &pts).map_err(|e| (status_of(&e), e.to_string())),
            };
            let (value, status, message) = match outcome {
                Ok(v) => (Some(v), Status::Ok, None),
                Err((status, msg)) => (None, status, Some(msg)),
            };
            ResultRecord { op: task.op, args: task.args.clone(), parameters, value, status, message }
        })
        .collect();

    let points = built
        .into_iter()
        .map(|(name, point)| {
            let out = match point {
                Ok(p) => PointOutput::Valid {
                    theta: p.theta().as_slice().to_vec(),
                    eta: p.eta().as_slice().to_vec(),
                    psi: p.psi(),
                    phi: p.phi(),
                },
                Err(e) => PointOutput::Invalid { status: status_of(&e), message: e.to_string() },
            };
            (name.to_string(), out)
        })
        .collect();

    Ok(ComputeOutput { family: family.label(), points, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSSIAN: &str = r#"{
        "family": {"kind": "gaussian1d"},
        "points": {"P": {"params": {"mu": 0, "sigma": 1}}, "Q": {"params": {"mu": 1, "sigma": 2}}},
        "tasks": [
            {"op": "affine", "args": ["P", "Q"]},
            {"op": "canonical", "args": ["P", "P"]},
            {"op": "psi_divergence", "args": ["P", "Q"], "alpha": 0.3},
            {"op": "affine_via_metric_integral", "args": ["P", "Q"], "chart": "eta"}
        ]
    }"#;

    #[test]
    fn gaussian_problem() {
        let out = run_problem(&parse_problem(GAUSSIAN).unwrap()).unwrap();
        assert!(out.all_ok());
        assert!((out.results[0].value.unwrap() - 1.75).abs() < 1e-12);
        assert_eq!(out.results[1].value, Some(0.0));
        assert!((out.results[3].value.unwrap() - 1.75).abs() < 1e-9);
        assert_eq!(out.results[3].parameters.chart, Some(Chart::Eta));
    }

    #[test]
    fn family_configs_parse() {
        let spec: FamilySpec = serde_json::from_str(r#"{"kind": "binomial", "trials": 10}"#).unwrap();
        assert_eq!(spec.kind, FamilyKind::Binomial { trials: 10 });
        let spec: FamilySpec =
            serde_json::from_str(r#"{"kind": "mixture", "components": [[0.5, 0.5], [0.9, 0.1]], "conjugate": "numerical"}"#)
                .unwrap();
        assert!(matches!(spec.kind, FamilyKind::Mixture { .. }));
        assert_eq!(spec.conjugate, ConjugateMode::Numerical);
        let bad = serde_json::from_str::<FamilySpec>(r#"{"kind": "mixture", "components": [[0.5, 0.5], [0.9, 0.2]]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn invalid_tasks_are_input_errors() {
        let base = |task: &str| {
            format!(
                r#"{{"family": {{"kind": "selfdual", "dimension": 1}}, "points": {{"P": {{"theta": [0]}}}}, "tasks": [{task}]}}"#
            )
        };
        for task in [
            r#"{"op": "canonical", "args": ["P"]}"#,
            r#"{"op": "canonical", "args": ["P", "X"]}"#,
            r#"{"op": "psi_divergence", "args": ["P", "P"]}"#,
            r#"{"op": "affine", "args": ["P", "P"], "alpha": 0.5}"#,
            r#"{"op": "skew_combination", "args": ["P", "P"]}"#,
            r#"{"op": "bregman", "args": ["P", "P"]}"#,
        ] {
            assert!(matches!(parse_problem(&base(task)), Err(CliError::Input(_))), "{task}");
        }
    }

    #[test]
    fn domain_errors_become_statuses() {
        let text = r#"{
            "family": {"kind": "gaussian1d"},
            "points": {"P": {"params": {"mu": 0, "sigma": -1}}, "Q": {"params": {"mu": 0, "sigma": 1}}},
            "tasks": [{"op": "canonical", "args": ["P", "Q"]}, {"op": "canonical", "args": ["Q", "Q"]}]
        }"#;
        let out = run_problem(&parse_problem(text).unwrap()).unwrap();
        assert_eq!(out.results[0].status, Status::DomainError);
        assert_eq!(out.results[0].value, None);
        assert_eq!(out.results[1].status, Status::Ok);
        assert!(!out.all_ok());
    }

    #[test]
    fn csv_layout() {
        let out = run_problem(&parse_problem(GAUSSIAN).unwrap()).unwrap();
        let csv = out.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "op,args,alpha,weights,chart,value,status");
        assert_eq!(lines[1], "affine,P;Q,,,,1.75,ok");
        assert!(!csv.contains('\r'));
    }
}
