//! `geodesic`: divergence profile along a chart geodesic, as CSV.

use std::fmt::Write as _;

use dualflat::geodesics::GeodesicProfile;
use dualflat::{Chart, CoordinatePair, Family, NaturalParams};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Endpoint given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum EndpointSpec {
    Coords(Chart, Vec<f64>),
    Params(NaturalParams),
}

const VECTOR_PARAMS: [&str; 3] = ["probs", "weights", "values"];

fn numbers(text: &str, sep: char) -> Result<Vec<f64>, String> {
    text.split(sep)
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}")))
        .collect()
}

/// Parses `theta:x1,x2`, `eta:x1,x2` or `params:key=value,...`; list-valued
/// parameters separate entries with `;`, e.g. `params:probs=0.2;0.3;0.5`.
pub fn parse_endpoint(text: &str) -> Result<EndpointSpec, String> {
    let (kind, body) = text
        .split_once(':')
        .ok_or_else(|| format!("expected theta:..., eta:... or params:..., got {text:?}"))?;
    match kind {
        "theta" => Ok(EndpointSpec::Coords(Chart::Theta, numbers(body, ',')?)),
        "eta" => Ok(EndpointSpec::Coords(Chart::Eta, numbers(body, ',')?)),
        "params" => {
            let mut object = Map::new();
            for pair in body.split(',') {
                let (key, value) = pair.split_once('=').ok_or_else(|| format!("expected key=value, got {pair:?}"))?;
                let key = key.trim();
                let value = if VECTOR_PARAMS.contains(&key) {
                    Value::from(numbers(value, ';')?)
                } else {
                    Value::from(numbers(value, ';')?.first().copied().unwrap_or(f64::NAN))
                };
                object.insert(key.to_string(), value);
            }
            serde_json::from_value(Value::Object(object))
                .map(EndpointSpec::Params)
                .map_err(|_| format!("unrecognized parameter set in {text:?}"))
        }
        other => Err(format!("unknown endpoint kind {other:?}")),
    }
}

pub fn build_endpoint(family: &Family, spec: &EndpointSpec) -> CliResult<CoordinatePair> {
    let point = match spec {
        EndpointSpec::Coords(chart, coords) => family.point(*chart, coords.clone()),
        EndpointSpec::Params(params) => family.point_from_params(params),
    };
    point.map_err(classify)
}

/// Dimension and configuration mistakes are bad input; everything else means
/// the requested segment does not fit in the domain.
pub fn classify(err: dualflat::Error) -> CliError {
    match err {
        dualflat::Error::Dimension { .. } | dualflat::Error::Config(_) => CliError::Input(err.to_string()),
        other => CliError::Domain(other),
    }
}

pub fn profile_csv(profile: &GeodesicProfile) -> String {
    let n = profile.rows.first().map_or(0, |r| r.point.theta().len());
    let mut out = String::from("t");
    for prefix in ["theta", "eta"] {
        for i in 1..=n {
            let _ = write!(out, ",{prefix}{i}");
        }
    }
    out.push_str(",canonical,affine\n");
    for row in &profile.rows {
        let _ = write!(out, "{}", row.t);
        for v in row.point.theta().as_slice().iter().chain(row.point.eta().as_slice()) {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{}", row.canonical, row.affine);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use dualflat::geodesics::divergence_profile;
    use dualflat::FamilyKind;

    #[test]
    fn endpoint_forms() {
        assert_eq!(parse_endpoint("theta:-0.5,0").unwrap(), EndpointSpec::Coords(Chart::Theta, vec![-0.5, 0.0]));
        assert_eq!(
            parse_endpoint("params:mu=1,sigma=2").unwrap(),
            EndpointSpec::Params(NaturalParams::Gaussian { mu: 1.0, sigma: 2.0 })
        );
        assert_eq!(
            parse_endpoint("params:weights=0.3").unwrap(),
            EndpointSpec::Params(NaturalParams::Mixture { weights: vec![0.3] })
        );
        assert_eq!(
            parse_endpoint("params:probs=0.2;0.8").unwrap(),
            EndpointSpec::Params(NaturalParams::Categorical { probs: vec![0.2, 0.8] })
        );
        assert!(parse_endpoint("zeta:1").is_err());
        assert!(parse_endpoint("theta:1,x").is_err());
        assert!(parse_endpoint("params:colour=3").is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let family = Family::new(FamilyKind::Gaussian1d).unwrap();
        let p = build_endpoint(&family, &parse_endpoint("params:mu=0,sigma=1").unwrap()).unwrap();
        let r = build_endpoint(&family, &parse_endpoint("params:mu=1,sigma=2").unwrap()).unwrap();
        let csv = profile_csv(&divergence_profile(&family, &p, &r, Chart::Theta, 11).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,theta1,theta2,eta1,eta2,canonical,affine");
        assert_eq!(lines.len(), 12);
        assert!(lines[1].starts_with("0,-0.5,0,1,0,0,0"));
        let last: f64 = lines[11].rsplit(',').next().unwrap().parse().unwrap();
        assert!((last - 1.75).abs() < 1e-12);
    }
}
