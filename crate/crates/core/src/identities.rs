//! Randomized residual checks of the dual-geometry identities.
//!
//! Each check draws points from the family's sampling box and evaluates one or
//! more identities per draw. Sample `i` of a check uses a ChaCha8 stream keyed
//! by (seed, check name) with stream number `i`, so every sample can be
//! replayed alone and results do not depend on thread count.
//!
//! An equality is scored by its relative residual |lhs − rhs| / (1 + Σ|terms|)
//! and passes when the worst one is within tolerance. An inequality is scored
//! by its slack (larger side minus smaller side) and passes when the smallest
//! slack is at least −1e-10.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::divergences::{affine, canonical, dual_inner_product, phi_divergence, psi_divergence, renyi, skew_combination};
use crate::error::{Error, Result};
use crate::families::{dot, Family, FamilyKind};
use crate::geodesics::{
    affine_via_metric_integral, canonical_via_weighted_integral, interpolate, min_relative_increment, profile_rows,
    GeodesicSpec,
};
use crate::manifold::{finite_difference_gradient, finite_difference_jacobian, Chart, CoordinatePair};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_TOL_CLOSED: f64 = 1e-9;
pub const DEFAULT_TOL_QUAD: f64 = 1e-6;
/// Inequalities pass when every slack is at least −SLACK_TOL.
pub const SLACK_TOL: f64 = 1e-10;
/// Attempts at drawing an in-domain configuration before giving up.
pub const MAX_RESAMPLES: usize = 10;
/// Geodesic segments per family in the quadrature check (fewer if the sample
/// budget is smaller).
pub const QUADRATURE_SEGMENTS: usize = 50;
pub const PROFILE_GRID: usize = 101;

const FD_TOL: f64 = 1e-5;
const METRIC_PRODUCT_TOL: f64 = 1e-8;
const FISHER_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-8;
/// Retry k pulls Q and S toward P by these factors. At ½ the fourth vertex
/// is the midpoint of two sampled points, inside any convex chart domain.
const PARALLELOGRAM_SHRINK: [f64; 5] = [1.0, 0.875, 0.75, 0.625, 0.5];
const ALPHA_RANGE: (f64, f64) = (0.02, 0.98);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub samples: usize,
    pub tol_closed: f64,
    pub tol_quad: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            seed: 0,
            samples: DEFAULT_SAMPLES,
            tol_closed: DEFAULT_TOL_CLOSED,
            tol_quad: DEFAULT_TOL_QUAD,
        }
    }
}

impl SampleConfig {
    pub fn new(seed: u64, samples: usize) -> Result<Self> {
        let config = SampleConfig { seed, samples, ..Default::default() };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tolerances(mut self, tol_closed: f64, tol_quad: f64) -> Result<Self> {
        self.tol_closed = tol_closed;
        self.tol_quad = tol_quad;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        for (name, tol) in [("closed-form", self.tol_closed), ("quadrature", self.tol_quad)] {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Config(format!("{name} tolerance must be positive and finite, got {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Residual,
    Slack,
}

/// Enough to replay the worst sample: `sample_rng(seed, check, index)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub seed: u64,
    pub check: String,
    pub index: usize,
    /// θ coordinates of the sampled points, in the order the check draws them.
    pub points: Vec<Vec<f64>>,
    /// Geodesic parameter t or skew parameter α, when the check draws one.
    pub parameter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub family: String,
    pub measure: Measure,
    /// Samples on which this identity was evaluated.
    pub samples: usize,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    /// Smallest slack, for inequalities.
    pub min_slack: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_case: Option<WorstCase>,
}

/// The per-sample random stream of a check.
pub fn sample_rng(seed: u64, check: &str, index: usize) -> ChaCha8Rng {
    // FNV-1a keeps the key stable across platforms and releases.
    let tag = check
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy)]
enum Observation {
    Residual { value: f64, magnitude: f64 },
    Slack(f64),
    Skipped,
}

impl Observation {
    fn relative(self) -> f64 {
        match self {
            Observation::Residual { value, magnitude } => {
                let rel = value.abs() / (1.0 + magnitude);
                if rel.is_nan() {
                    f64::INFINITY
                } else {
                    rel
                }
            }
            _ => 0.0,
        }
    }

    /// The observation with the larger relative residual.
    fn worse(self, other: Observation) -> Observation {
        if other.relative() > self.relative() {
            other
        } else {
            self
        }
    }
}

/// lhs = rhs, as a residual over the magnitude of all terms.
fn balance(lhs: &[f64], rhs: &[f64]) -> Observation {
    let value = lhs.iter().sum::<f64>() - rhs.iter().sum::<f64>();
    let magnitude = lhs.iter().chain(rhs).map(|x| x.abs()).sum();
    Observation::Residual { value, magnitude }
}

struct Draw {
    points: Vec<Vec<f64>>,
    parameter: Option<f64>,
    observations: Vec<Observation>,
}

impl Draw {
    fn new(points: &[&CoordinatePair], parameter: Option<f64>, observations: Vec<Observation>) -> Self {
        Draw {
            points: points.iter().map(|p| p.theta().as_slice().to_vec()).collect(),
            parameter,
            observations,
        }
    }
}

struct Entry {
    name: String,
    measure: Measure,
    tolerance: f64,
}

fn residual(name: impl Into<String>, tolerance: f64) -> Entry {
    Entry { name: name.into(), measure: Measure::Residual, tolerance }
}

fn slack(name: impl Into<String>) -> Entry {
    Entry { name: name.into(), measure: Measure::Slack, tolerance: SLACK_TOL }
}

fn run<F>(
    family: &Family,
    config: &SampleConfig,
    check: &str,
    samples: usize,
    entries: Vec<Entry>,
    sample: F,
) -> Result<Vec<ResidualReport>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Draw> + Sync,
{
    config.validate()?;
    let draws = (0..samples)
        .into_par_iter()
        .map(|i| sample(&mut sample_rng(config.seed, check, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(k, entry)| reduce(family, config, check, &draws, k, entry))
        .collect())
}

fn reduce(family: &Family, config: &SampleConfig, check: &str, draws: &[Draw], k: usize, entry: Entry) -> ResidualReport {
    let mut count = 0;
    let mut max_abs = 0.0_f64;
    let mut max_rel = 0.0_f64;
    let mut min_slack = f64::INFINITY;
    let mut worst: Option<usize> = None;
    for (i, draw) in draws.iter().enumerate() {
        let obs = draw.observations[k];
        match obs {
            Observation::Skipped => continue,
            Observation::Residual { value, .. } => {
                let rel = obs.relative();
                max_abs = max_abs.max(if value.is_nan() { f64::INFINITY } else { value.abs() });
                if worst.is_none() || rel > max_rel {
                    max_rel = rel;
                    worst = Some(i);
                }
            }
            Observation::Slack(s) => {
                let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
                if worst.is_none() || s < min_slack {
                    min_slack = s;
                    worst = Some(i);
                }
            }
        }
        count += 1;
    }
    let (min_slack, passed) = match entry.measure {
        Measure::Residual => (None, max_rel <= entry.tolerance),
        Measure::Slack => {
            let deficit = if count == 0 { 0.0 } else { (-min_slack).max(0.0) };
            max_abs = deficit;
            max_rel = deficit;
            ((count > 0).then_some(min_slack), count == 0 || min_slack >= -entry.tolerance)
        }
    };
    ResidualReport {
        name: entry.name,
        family: family.label(),
        measure: entry.measure,
        samples: count,
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        min_slack,
        tolerance: entry.tolerance,
        passed,
        worst_case: worst.map(|i| WorstCase {
            seed: config.seed,
            check: check.to_string(),
            index: i,
            points: draws[i].points.clone(),
            parameter: draws[i].parameter,
        }),
    }
}

/// Retries `draw` on domain errors, up to [`MAX_RESAMPLES`] attempts.
fn resample<T>(
    rng: &mut ChaCha8Rng,
    what: &str,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<T>,
) -> Result<T> {
    for _ in 0..MAX_RESAMPLES {
        match draw(rng) {
            Err(Error::Domain(_)) => continue,
            other => return other,
        }
    }
    Err(Error::SamplingExhausted(format!(
        "{what}: no in-domain configuration after {MAX_RESAMPLES} draws"
    )))
}

fn d(family: &Family, p: &CoordinatePair, q: &CoordinatePair) -> Result<f64> {
    Ok(canonical(family, p, q)?.value)
}

fn da(family: &Family, p: &CoordinatePair, q: &CoordinatePair) -> Result<f64> {
    Ok(affine(family, p, q)?.value)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn tagged(name: &str, chart: Chart) -> String {
    format!("{name}[{}]", chart.name())
}

fn draw_alpha(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(ALPHA_RANGE.0..=ALPHA_RANGE.1)
}

/// A point R with η(R) − η(Q) orthogonal to θ(P) − θ(Q), so that the dual
/// geodesic QR meets the geodesic PQ at a right angle.
fn orthogonal_completion(
    family: &Family,
    rng: &mut ChaCha8Rng,
    p: &CoordinatePair,
    q: &CoordinatePair,
) -> Result<CoordinatePair> {
    let w = diff(p.theta().as_slice(), q.theta().as_slice());
    let mut v: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let ww = dot(&w, &w);
    if ww > 0.0 {
        let c = dot(&v, &w) / ww;
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi -= c * wi);
    }
    let mut scale = 1.0;
    for _ in 0..60 {
        let eta = q.eta().as_slice().iter().zip(&v).map(|(e, vi)| e + scale * vi).collect();
        match family.point(Chart::Eta, eta) {
            Err(Error::Domain(_)) => scale *= 0.5,
            other => return other,
        }
    }
    Err(Error::Domain("no orthogonal step stays inside the η-domain".into()))
}

/// Triangular relation, law of cosines, and the Pythagorean relation on
/// orthogonally completed triangles.
pub fn check_triangle_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let tol = config.tol_closed;
    let entries = vec![
        residual("triangular_relation", tol),
        residual("law_of_cosines", tol),
        residual("pythagorean_relation", tol),
    ];
    run(family, config, "triangle", config.samples, entries, |rng| {
        let (p, q, r, s) = resample(rng, "triangle", |rng| {
            let p = family.sample_point(rng)?;
            let q = family.sample_point(rng)?;
            let r = family.sample_point(rng)?;
            let s = orthogonal_completion(family, rng, &p, &q)?;
            Ok((p, q, r, s))
        })?;
        let cross = dot(
            &diff(r.eta().as_slice(), q.eta().as_slice()),
            &diff(p.theta().as_slice(), q.theta().as_slice()),
        );
        let triangle = balance(&[d(family, &p, &q)?, d(family, &q, &r)?], &[d(family, &p, &r)?, cross]);
        let cosines = balance(
            &[da(family, &p, &r)?],
            &[da(family, &p, &q)?, da(family, &q, &r)?, -2.0 * dual_inner_product(family, &p, &r, &q)?],
        );
        let pythagorean = balance(&[d(family, &p, &q)?, d(family, &q, &s)?], &[d(family, &p, &s)?]);
        Ok(Draw::new(&[&p, &q, &r, &s], None, vec![triangle, cosines, pythagorean]))
    })
}

/// Expansion formulas, parallelogram law, polarization identity and
/// interior-angle sum on quadrilaterals PQRS with x(R) = x(Q) + x(S) − x(P)
/// in each chart.
pub fn check_vector_sum_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let mut reports = Vec::new();
    for chart in [Chart::Theta, Chart::Eta] {
        let tol = config.tol_closed;
        let entries = vec![
            residual(tagged("expansion_formula", chart), tol),
            residual(tagged("parallelogram_law", chart), tol),
            residual(tagged("polarization_identity", chart), tol),
            residual(tagged("interior_angle_sum", chart), tol),
        ];
        let check = tagged("vector_sum", chart);
        reports.extend(run(family, config, &check, config.samples, entries, |rng| {
            let mut attempt = 0;
            let (p, q, r, s) = resample(rng, &check, |rng| {
                let shrink = PARALLELOGRAM_SHRINK[attempt.min(PARALLELOGRAM_SHRINK.len() - 1)];
                attempt += 1;
                let p = family.sample_point(rng)?;
                let q = interpolate(family, &p, &family.sample_point(rng)?, shrink, chart)?;
                let s = interpolate(family, &p, &family.sample_point(rng)?, shrink, chart)?;
                let coords = (0..family.dimension())
                    .map(|i| q.coords(chart)[i] + s.coords(chart)[i] - p.coords(chart)[i])
                    .collect();
                let r = family.point(chart, coords)?;
                Ok((p, q, r, s))
            })?;
            let ip = |a: &CoordinatePair, b: &CoordinatePair, base: &CoordinatePair| dual_inner_product(family, a, b, base);
            let pr = da(family, &p, &r)?;
            let qs = da(family, &q, &s)?;
            let expansion = balance(&[pr], &[da(family, &p, &q)?, da(family, &p, &s)?, 2.0 * ip(&q, &s, &r)?]).worse(
                balance(&[pr], &[da(family, &r, &q)?, da(family, &r, &s)?, 2.0 * ip(&q, &s, &p)?]),
            );
            let parallelogram = balance(
                &[da(family, &p, &q)?, da(family, &q, &r)?, da(family, &r, &s)?, da(family, &s, &p)?],
                &[pr, qs],
            );
            let polarization = balance(&[2.0 * ip(&q, &s, &p)?, 2.0 * ip(&q, &s, &r)?], &[pr, -qs]);
            let angles = balance(&[ip(&q, &s, &p)?, ip(&q, &s, &r)?, ip(&p, &r, &q)?, ip(&p, &r, &s)?], &[]);
            Ok(Draw::new(&[&p, &q, &r, &s], None, vec![expansion, parallelogram, polarization, angles]))
        })?);
    }
    Ok(reports)
}

fn draw_division_parameter(rng: &mut ChaCha8Rng) -> f64 {
    // [0.05, 0.95] ∪ [1.05, 1.5], uniform over the union.
    let u = rng.random_range(0.0..1.35);
    if u < 0.9 {
        0.05 + u
    } else {
        1.05 + (u - 0.9)
    }
}

/// Division lemma, its corollary, the division theorem, and the
/// D(P‖R) ≥ D(P‖Q) + D(Q‖R) bound for Q between P and R, on both charts.
pub fn check_division_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let mut reports = Vec::new();
    for chart in [Chart::Theta, Chart::Eta] {
        let tol = config.tol_closed;
        let entries = vec![
            residual(tagged("division_lemma", chart), tol),
            residual(tagged("division_corollary", chart), tol),
            residual(tagged("division_theorem", chart), tol),
            slack(tagged("division_bound", chart)),
        ];
        let check = tagged("division", chart);
        reports.extend(run(family, config, &check, config.samples, entries, |rng| {
            let (p, q, r, t) = resample(rng, &check, |rng| {
                let p = family.sample_point(rng)?;
                let r = family.sample_point(rng)?;
                let t = draw_division_parameter(rng);
                let q = interpolate(family, &p, &r, t, chart)?;
                Ok((p, q, r, t))
            })?;
            let (pr, pq, qr) = (d(family, &p, &r)?, d(family, &p, &q)?, d(family, &q, &r)?);
            let (rp, qp, rq) = (d(family, &r, &p)?, d(family, &q, &p)?, d(family, &r, &q)?);
            let (a_pq, a_qr) = (da(family, &p, &q)?, da(family, &q, &r)?);
            let near = t / (1.0 - t);
            let far = (1.0 - t) / t;
            let (lemma, corollary) = match chart {
                Chart::Theta => (balance(&[pr], &[pq, qr, near * a_qr]), balance(&[rp], &[qp, rq, far * a_pq])),
                Chart::Eta => (balance(&[pr], &[pq, qr, far * a_pq]), balance(&[rp], &[qp, rq, near * a_qr])),
            };
            let theorem = balance(&[da(family, &p, &r)?], &[a_pq / t, a_qr / (1.0 - t)]);
            let bound = if t < 1.0 { Observation::Slack(pr - pq - qr) } else { Observation::Skipped };
            Ok(Draw::new(&[&p, &q, &r], Some(t), vec![lemma, corollary, theorem, bound]))
        })?);
    }
    Ok(reports)
}

/// Sampled inequalities: α(1−α)D_A bounds both skew divergences; α(1−α)D_J
/// bounds skew Jensen-Shannon (mixture families) and skew Bhattacharyya
/// (exponential families); αD_J bounds Rényi of order α.
pub fn check_inequalities_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let js = family.is_mixture();
    let bhattacharyya = family.is_exponential() && matches!(
        family.kind(),
        FamilyKind::Gaussian1d | FamilyKind::Binomial { .. } | FamilyKind::Categorical { .. }
    );
    let renyi_bound = family.is_exponential();
    let mut entries = vec![slack("affine_bounds_psi_divergence"), slack("affine_bounds_phi_divergence")];
    if js {
        entries.push(slack("jeffreys_bounds_jensen_shannon"));
    }
    if bhattacharyya {
        entries.push(slack("jeffreys_bounds_bhattacharyya"));
    }
    if renyi_bound {
        entries.push(slack("jeffreys_bounds_renyi"));
    }
    run(family, config, "inequalities", config.samples, entries, |rng| {
        let p = family.sample_point(rng)?;
        let q = family.sample_point(rng)?;
        let alpha = draw_alpha(rng);
        let w = alpha * (1.0 - alpha);
        let a = da(family, &p, &q)?;
        let mut obs = vec![
            Observation::Slack(w * a - psi_divergence(family, &p, &q, alpha)?.value),
            Observation::Slack(w * a - phi_divergence(family, &p, &q, alpha)?.value),
        ];
        if js || bhattacharyya || renyi_bound {
            let jeffreys = family.reference_kl(&p, &q)? + family.reference_kl(&q, &p)?;
            if js {
                obs.push(Observation::Slack(w * jeffreys - family.reference_js(&p, &q, alpha)?));
            }
            if bhattacharyya {
                obs.push(Observation::Slack(w * jeffreys - family.reference_bhattacharyya(&p, &q, alpha)?));
            }
            if renyi_bound {
                obs.push(Observation::Slack(alpha * jeffreys - renyi(family, &p, &q, alpha)?.value));
            }
        }
        Ok(Draw::new(&[&p, &q], Some(alpha), obs))
    })
}

/// Geodesic integral forms against the closed-form divergences, and
/// monotonicity of both divergences along a 101-point profile.
pub fn check_quadrature_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let samples = config.samples.min(QUADRATURE_SEGMENTS);
    let mut reports = Vec::new();
    for chart in [Chart::Theta, Chart::Eta] {
        let tol = config.tol_quad;
        let entries = vec![
            residual(tagged("affine_integral", chart), tol),
            residual(tagged("canonical_integral", chart), tol),
            slack(tagged("profile_monotonicity", chart)),
        ];
        let check = tagged("quadrature", chart);
        reports.extend(run(family, config, &check, samples, entries, |rng| {
            let (p, r, spec) = resample(rng, &check, |rng| {
                let p = family.sample_point(rng)?;
                let r = family.sample_point(rng)?;
                let spec = GeodesicSpec::through(family, &p, &r, chart)?;
                Ok((p, r, spec))
            })?;
            let affine_obs = balance(&[affine_via_metric_integral(family, &spec)?], &[da(family, &p, &r)?]);
            let canonical_obs = balance(&[canonical_via_weighted_integral(family, &spec)?], &[d(family, &p, &r)?]);
            let rows = profile_rows(family, &p, &r, chart, PROFILE_GRID)?;
            let monotone = Observation::Slack(min_relative_increment(&rows));
            Ok(Draw::new(&[&p, &r], None, vec![affine_obs, canonical_obs, monotone]))
        })?);
    }
    Ok(reports)
}

/// Family-level consistency: Legendre duality, chart round trips, gradients
/// and metric against finite differences, and the divergences against
/// independent distribution-level references.
pub fn check_consistency_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let tol = config.tol_closed;
    let bhattacharyya = family.is_exponential()
        && matches!(
            family.kind(),
            FamilyKind::Gaussian1d | FamilyKind::Binomial { .. } | FamilyKind::Categorical { .. }
        );
    let mixture = family.is_mixture();
    let fisher = matches!(family.kind(), FamilyKind::Binomial { .. } | FamilyKind::Categorical { .. });
    let mut entries = vec![
        residual("duality_residual", tol),
        residual("coordinate_round_trip", ROUND_TRIP_TOL),
        residual("potential_gradients", FD_TOL),
        residual("metric_vs_hessian", FD_TOL),
        residual("metric_inverse_product", METRIC_PRODUCT_TOL),
        slack("metric_positive_definite"),
        residual("affine_symmetry", tol),
        residual("affine_splits_canonical", tol),
        residual("affine_equals_jeffreys", tol),
        residual("canonical_equals_kl", tol),
        residual(tagged("skew_combination", Chart::Theta), tol),
        residual(tagged("skew_combination", Chart::Eta), tol),
    ];
    if bhattacharyya {
        entries.push(residual("psi_divergence_equals_bhattacharyya", tol));
    }
    if mixture {
        entries.push(residual("phi_divergence_equals_jensen_shannon", tol));
        entries.push(residual("phi_equals_negative_entropy", tol));
    }
    if fisher {
        entries.push(residual("metric_equals_fisher", FISHER_TOL));
    }
    run(family, config, "consistency", config.samples, entries, |rng| {
        let p = family.sample_point(rng)?;
        let q = family.sample_point(rng)?;
        let alpha = draw_alpha(rng);
        let (theta, eta) = (p.theta().as_slice(), p.eta().as_slice());
        let cross = dot(theta, eta);
        let mut obs = vec![balance(&[p.psi() + p.phi()], &[cross])];

        let back = family.point(Chart::Eta, family.point(Chart::Theta, theta.to_vec())?.eta().as_slice().to_vec())?;
        obs.push(Observation::Residual {
            value: max_abs_diff(back.theta().as_slice(), theta),
            magnitude: max_abs(theta),
        });

        let psi = |x: &[f64]| Ok(family.point(Chart::Theta, x.to_vec())?.psi());
        let phi = |x: &[f64]| Ok(family.point(Chart::Eta, x.to_vec())?.phi());
        let grad_psi = finite_difference_gradient(psi, theta)?;
        let grad_phi = finite_difference_gradient(phi, eta)?;
        let gradient_error = (max_abs_diff(&grad_psi, eta) / (1.0 + max_abs(eta)))
            .max(max_abs_diff(&grad_phi, theta) / (1.0 + max_abs(theta)));
        obs.push(Observation::Residual { value: gradient_error, magnitude: 0.0 });

        let g = family.metric(&p, Chart::Theta)?;
        let g_inv = family.metric(&p, Chart::Eta)?;
        let jacobian = finite_difference_jacobian(
            |x: &[f64]| Ok(family.point(Chart::Theta, x.to_vec())?.eta().as_slice().to_vec()),
            theta,
        )?;
        obs.push(Observation::Residual {
            value: (g.entries() - &jacobian).abs().max(),
            magnitude: g.entries().abs().max(),
        });
        obs.push(Observation::Residual { value: g.product_deviation(&g_inv), magnitude: 0.0 });
        obs.push(Observation::Slack(g.min_eigenvalue()));

        let (pq, qp) = (d(family, &p, &q)?, d(family, &q, &p)?);
        let a = da(family, &p, &q)?;
        let (kl_pq, kl_qp) = (family.reference_kl(&p, &q)?, family.reference_kl(&q, &p)?);
        obs.push(balance(&[a], &[da(family, &q, &p)?]));
        obs.push(balance(&[a], &[pq, qp]));
        obs.push(balance(&[a], &[kl_pq, kl_qp]));
        obs.push(balance(&[pq], &[kl_qp]));

        for side in [Chart::Theta, Chart::Eta] {
            let combination = resample(rng, "skew combination", |rng| {
                let (wa, wb) = (rng.random_range(0.1..=0.9), rng.random_range(0.1..=0.9));
                skew_combination(family, &p, &q, wa, wb, side)
            });
            obs.push(match combination {
                Ok(c) => balance(&[c.divergence_form], &[c.potential_form]),
                Err(Error::SamplingExhausted(_)) => Observation::Skipped,
                Err(e) => return Err(e),
            });
        }

        if bhattacharyya {
            obs.push(balance(
                &[psi_divergence(family, &p, &q, alpha)?.value],
                &[family.reference_bhattacharyya(&p, &q, alpha)?],
            ));
        }
        if mixture {
            obs.push(balance(&[phi_divergence(family, &p, &q, alpha)?.value], &[family.reference_js(&p, &q, alpha)?]));
            obs.push(balance(&[p.phi()], &[-family.reference_entropy(&p)?]));
        }
        if fisher {
            let exact = family.reference_fisher(&p)?;
            obs.push(Observation::Residual {
                value: (g.entries() - &exact).abs().max(),
                magnitude: exact.abs().max(),
            });
        }
        Ok(Draw::new(&[&p, &q], Some(alpha), obs))
    })
}

/// Every check, in a fixed order.
pub fn verify_family(family: &Family, config: &SampleConfig) -> Result<Vec<ResidualReport>> {
    let checks: [fn(&Family, &SampleConfig) -> Result<Vec<ResidualReport>>; 6] = [
        check_consistency_family,
        check_triangle_family,
        check_vector_sum_family,
        check_division_family,
        check_inequalities_family,
        check_quadrature_family,
    ];
    let mut reports = Vec::new();
    for check in checks {
        reports.extend(check(family, config)?);
    }
    Ok(reports)
}
