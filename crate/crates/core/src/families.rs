//! Concrete dually flat families.
//!
//! | kind | θ | η | ψ(θ) | φ(η) |
//! |------|---|---|------|------|
//! | `gaussian1d` | (−1/(2σ²), μ/σ²) | (σ²+μ², μ) | μ²/(2σ²) + ½ln(2πσ²) | −½ln(2πeσ²) |
//! | `binomial:n` | ln(p/(1−p)) | np | n·ln(1+e^θ) | n(p ln p + (1−p)ln(1−p)) |
//! | `categorical:m` | ln(pᵢ/pₘ), i < m | pᵢ, i < m | ln(1+Σe^θ) | Σ p ln p |
//! | `mixture` | Σₓ (pᵢ−p₀) ln p_η | mixing weights | numerical conjugate | Σ p_η ln p_η |
//! | `selfdual:n` | x | x | ½‖θ‖² | ½‖η‖² |
//!
//! The categorical family uses the last outcome as its reference. The
//! self-dual family is the unit-covariance Gaussian N(θ, I), whose log
//! partition is exactly ½‖θ‖².
//!
//! For every family the canonical divergence D(P‖Q) = ψ(P) + φ(Q) − θ(P)·η(Q)
//! equals KL(p_Q ‖ p_P): the second argument is the distribution under which
//! the expectation is taken.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{CoordinatePair, EtaCoord, ThetaCoord};

/// Mixture weights below this bound are treated as leaving the η-domain.
pub const MIXTURE_FLOOR: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-12;
const SAMPLE_FLOOR: f64 = 0.05;

/// Component table p₀..pₙ of a mixture family, each row a probability vector
/// over the same finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MixtureComponents {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for MixtureComponents {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        MixtureComponents::new(rows)
    }
}

impl From<MixtureComponents> for Vec<Vec<f64>> {
    fn from(components: MixtureComponents) -> Self {
        components.rows
    }
}

impl MixtureComponents {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Config(format!(
                "mixture needs at least 2 components, got {}",
                rows.len()
            )));
        }
        let support = rows[0].len();
        if support < 2 {
            return Err(Error::Config("mixture support needs at least 2 outcomes".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != support {
                return Err(Error::Config(format!(
                    "component {i} has {} outcomes, expected {support}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::Config(format!(
                    "component {i} has a non-positive entry {v}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("component {i} sums to {sum}, not 1")));
            }
        }
        let n = rows.len() - 1;
        let diffs = DMatrix::from_fn(n, support, |i, x| rows[i + 1][x] - rows[0][x]);
        let smallest = diffs
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(smallest > 1e-9) {
            return Err(Error::Config(
                "component differences p_i − p_0 are linearly dependent".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn support_size(&self) -> usize {
        self.rows[0].len()
    }

    /// Number of mixing weights (components minus one).
    pub fn dimension(&self) -> usize {
        self.rows.len() - 1
    }

    /// p_η(x) = p₀(x) + Σᵢ ηᵢ (pᵢ(x) − p₀(x)).
    pub fn density(&self, eta: &[f64]) -> Vec<f64> {
        let p0 = &self.rows[0];
        (0..self.support_size())
            .map(|x| {
                p0[x]
                    + eta
                        .iter()
                        .zip(&self.rows[1..])
                        .map(|(w, row)| w * (row[x] - p0[x]))
                        .sum::<f64>()
            })
            .collect()
    }

    fn difference(&self, i: usize, x: usize) -> f64 {
        self.rows[i + 1][x] - self.rows[0][x]
    }
}

/// Family kind together with its kind-specific configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian1d,
    Binomial { trials: u32 },
    Categorical { outcomes: usize },
    Mixture { components: MixtureComponents },
    #[serde(rename = "selfdual")]
    SelfDual { dimension: usize },
}

impl FamilyKind {
    /// Three components on a four-point support; the default for `mixture`
    /// without an explicit table.
    pub fn default_mixture() -> Self {
        FamilyKind::Mixture {
            components: MixtureComponents::new(vec![
                vec![0.4, 0.3, 0.2, 0.1],
                vec![0.1, 0.2, 0.3, 0.4],
                vec![0.1, 0.4, 0.4, 0.1],
            ])
            .expect("default mixture table is valid"),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Gaussian1d => write!(f, "gaussian1d"),
            FamilyKind::Binomial { trials } => write!(f, "binomial:{trials}"),
            FamilyKind::Categorical { outcomes } => write!(f, "categorical:{outcomes}"),
            FamilyKind::SelfDual { dimension } => write!(f, "selfdual:{dimension}"),
            FamilyKind::Mixture { components } => {
                let rows: Vec<String> = components
                    .rows()
                    .iter()
                    .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                    .collect();
                write!(f, "mixture:{}", rows.join(";"))
            }
        }
    }
}

/// Parses `kind[:config]`, e.g. `binomial:10`, `selfdual:2`,
/// `mixture:0.5,0.5;0.9,0.1`. Configuration invariants are checked by
/// [`Family::new`], not here.
impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, config) = match s.split_once(':') {
            Some((k, c)) => (k.trim(), Some(c.trim())),
            None => (s.trim(), None),
        };
        let count = |what: &str| -> Result<usize> {
            let c = config.ok_or_else(|| Error::Config(format!("{kind} needs :<{what}>")))?;
            c.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad {what} for {kind}: {c:?}")))
        };
        match kind {
            "gaussian1d" | "gaussian" => match config {
                None => Ok(FamilyKind::Gaussian1d),
                Some(c) => Err(Error::Config(format!("gaussian1d takes no config, got {c:?}"))),
            },
            "binomial" => Ok(FamilyKind::Binomial {
                trials: u32::try_from(count("trials")?)
                    .map_err(|_| Error::Config("binomial trial count too large".into()))?,
            }),
            "categorical" => Ok(FamilyKind::Categorical { outcomes: count("outcomes")? }),
            "selfdual" => Ok(FamilyKind::SelfDual { dimension: count("dimension")? }),
            "mixture" => match config {
                None => Ok(FamilyKind::default_mixture()),
                Some(c) => {
                    let rows = c
                        .split(';')
                        .map(|row| {
                            row.split(',')
                                .map(|v| {
                                    v.trim().parse::<f64>().map_err(|_| {
                                        Error::Config(format!("bad mixture entry {v:?}"))
                                    })
                                })
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(FamilyKind::Mixture { components: MixtureComponents::new(rows)? })
                }
            },
            other => Err(Error::Config(format!("unknown family kind {other:?}"))),
        }
    }
}

/// How the Legendre dual of ψ is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConjugateMode {
    /// Use the family's closed-form φ and ∇φ.
    #[default]
    ClosedForm,
    /// Route φ and θ-from-η through the damped Newton conjugate solver even
    /// when closed forms exist.
    Numerical,
}

/// Immutable descriptor of one dually flat family.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    kind: FamilyKind,
    conjugate: ConjugateMode,
}

/// User-facing parameters for constructing points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NaturalParams {
    Gaussian { mu: f64, sigma: f64 },
    Binomial { p: f64 },
    Categorical { probs: Vec<f64> },
    Mixture { weights: Vec<f64> },
    SelfDual { values: Vec<f64> },
}

/// An outcome at which to evaluate a density.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Real(f64),
    Index(usize),
    Vector(Vec<f64>),
}

impl Family {
    /// Validates the kind invariants and builds the descriptor.
    pub fn new(kind: FamilyKind) -> Result<Self> {
        match &kind {
            FamilyKind::Binomial { trials } if *trials < 1 => {
                return Err(Error::Config("binomial needs n ≥ 1 trials".into()));
            }
            FamilyKind::Categorical { outcomes } if *outcomes < 2 => {
                return Err(Error::Config("categorical needs m ≥ 2 outcomes".into()));
            }
            FamilyKind::SelfDual { dimension } if *dimension < 1 => {
                return Err(Error::Config("selfdual needs dimension ≥ 1".into()));
            }
            _ => {}
        }
        Ok(Self { kind, conjugate: ConjugateMode::ClosedForm })
    }

    pub fn with_conjugate_mode(mut self, mode: ConjugateMode) -> Self {
        self.conjugate = mode;
        self
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn conjugate_mode(&self) -> ConjugateMode {
        self.conjugate
    }

    pub fn label(&self) -> String {
        self.kind.to_string()
    }

    pub fn dimension(&self) -> usize {
        match &self.kind {
            FamilyKind::Gaussian1d => 2,
            FamilyKind::Binomial { .. } => 1,
            FamilyKind::Categorical { outcomes } => outcomes - 1,
            FamilyKind::Mixture { components } => components.dimension(),
            FamilyKind::SelfDual { dimension } => *dimension,
        }
    }

    /// Exponential families: ψ is the log partition and ψ-divergences are
    /// skew Bhattacharyya distances.
    pub fn is_exponential(&self) -> bool {
        !matches!(self.kind, FamilyKind::Mixture { .. })
    }

    /// Families affine in η over fixed components, where φ = −H.
    /// The categorical family is both exponential and mixture.
    pub fn is_mixture(&self) -> bool {
        matches!(self.kind, FamilyKind::Mixture { .. } | FamilyKind::Categorical { .. })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::Binomial { .. } | FamilyKind::Categorical { .. } | FamilyKind::Mixture { .. }
        )
    }

    pub fn contains_theta(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dimension() || theta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            FamilyKind::Gaussian1d => theta[0] < 0.0,
            _ => true,
        }
    }

    pub fn contains_eta(&self, eta: &[f64]) -> bool {
        if eta.len() != self.dimension() || eta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            FamilyKind::Gaussian1d => eta[0] - eta[1] * eta[1] > 0.0,
            FamilyKind::Binomial { trials } => eta[0] > 0.0 && eta[0] < f64::from(*trials),
            FamilyKind::Categorical { .. } => {
                eta.iter().all(|v| *v > 0.0) && 1.0 - eta.iter().sum::<f64>() > 0.0
            }
            FamilyKind::Mixture { components } => components
                .density(eta)
                .iter()
                .all(|p| *p > MIXTURE_FLOOR),
            FamilyKind::SelfDual { .. } => true,
        }
    }

    pub(crate) fn require_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), got: theta.len() });
        }
        if !self.contains_theta(theta) {
            return Err(Error::Domain(format!("θ = {theta:?} outside the θ-domain of {}", self.label())));
        }
        Ok(())
    }

    pub(crate) fn require_eta(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), got: eta.len() });
        }
        if !self.contains_eta(eta) {
            return Err(Error::Domain(format!("η = {eta:?} outside the η-domain of {}", self.label())));
        }
        Ok(())
    }

    // ---- closed forms; callers have already validated the domain ----

    pub(crate) fn closed_psi(&self, t: &[f64]) -> Option<f64> {
        Some(match &self.kind {
            FamilyKind::Gaussian1d => -t[1] * t[1] / (4.0 * t[0]) + 0.5 * (PI / -t[0]).ln(),
            FamilyKind::Binomial { trials } => f64::from(*trials) * softplus(t[0]),
            FamilyKind::Categorical { .. } => log1p_sum_exp(t),
            FamilyKind::Mixture { .. } => return None,
            FamilyKind::SelfDual { .. } => 0.5 * dot(t, t),
        })
    }

    pub(crate) fn closed_grad_psi(&self, t: &[f64]) -> Option<Vec<f64>> {
        Some(match &self.kind {
            FamilyKind::Gaussian1d => {
                let (a, b) = (t[0], t[1]);
                vec![b * b / (4.0 * a * a) - 1.0 / (2.0 * a), -b / (2.0 * a)]
            }
            FamilyKind::Binomial { trials } => vec![f64::from(*trials) * logistic(t[0])],
            FamilyKind::Categorical { .. } => softmax_with_reference(t),
            FamilyKind::Mixture { .. } => return None,
            FamilyKind::SelfDual { .. } => t.to_vec(),
        })
    }

    pub(crate) fn closed_hess_psi(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(match &self.kind {
            FamilyKind::Gaussian1d => {
                let (a, b) = (t[0], t[1]);
                let off = b / (2.0 * a * a);
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[-b * b / (2.0 * a * a * a) + 1.0 / (2.0 * a * a), off, off, -1.0 / (2.0 * a)],
                )
            }
            FamilyKind::Binomial { trials } => {
                let s = logistic(t[0]);
                DMatrix::from_element(1, 1, f64::from(*trials) * s * (1.0 - s))
            }
            FamilyKind::Categorical { .. } => {
                let p = softmax_with_reference(t);
                let p = DVector::from_vec(p);
                DMatrix::from_diagonal(&p) - &p * p.transpose()
            }
            FamilyKind::Mixture { .. } => return None,
            FamilyKind::SelfDual { dimension } => DMatrix::identity(*dimension, *dimension),
        })
    }

    pub(crate) fn closed_phi(&self, e: &[f64]) -> f64 {
        match &self.kind {
            FamilyKind::Gaussian1d => -0.5 * (2.0 * PI * E * (e[0] - e[1] * e[1])).ln(),
            FamilyKind::Binomial { trials } => {
                let n = f64::from(*trials);
                let p = e[0] / n;
                n * (xlnx(p) + xlnx(1.0 - p))
            }
            FamilyKind::Categorical { .. } => {
                let rest = 1.0 - e.iter().sum::<f64>();
                e.iter().map(|v| xlnx(*v)).sum::<f64>() + xlnx(rest)
            }
            FamilyKind::Mixture { components } => {
                components.density(e).iter().map(|p| xlnx(*p)).sum()
            }
            FamilyKind::SelfDual { .. } => 0.5 * dot(e, e),
        }
    }

    pub(crate) fn closed_grad_phi(&self, e: &[f64]) -> Vec<f64> {
        match &self.kind {
            FamilyKind::Gaussian1d => {
                let var = e[0] - e[1] * e[1];
                vec![-1.0 / (2.0 * var), e[1] / var]
            }
            FamilyKind::Binomial { trials } => {
                let p = e[0] / f64::from(*trials);
                vec![(p / (1.0 - p)).ln()]
            }
            FamilyKind::Categorical { .. } => {
                let rest = 1.0 - e.iter().sum::<f64>();
                e.iter().map(|v| (v / rest).ln()).collect()
            }
            FamilyKind::Mixture { components } => {
                let logp: Vec<f64> = components.density(e).iter().map(|p| p.ln()).collect();
                (0..components.dimension())
                    .map(|i| {
                        logp.iter()
                            .enumerate()
                            .map(|(x, lp)| components.difference(i, x) * lp)
                            .sum()
                    })
                    .collect()
            }
            FamilyKind::SelfDual { .. } => e.to_vec(),
        }
    }

    /// Closed-form η-form metric where it is simpler than inverting g_ij.
    pub(crate) fn closed_hess_phi(&self, e: &[f64]) -> Option<DMatrix<f64>> {
        match &self.kind {
            FamilyKind::Mixture { components } => {
                let p = components.density(e);
                let n = components.dimension();
                Some(DMatrix::from_fn(n, n, |i, j| {
                    p.iter()
                        .enumerate()
                        .map(|(x, px)| components.difference(i, x) * components.difference(j, x) / px)
                        .sum()
                }))
            }
            _ => None,
        }
    }

    /// Family-specific starting point for the conjugate solvers: the θ of a
    /// reference distribution (standard normal, fair coin, uniform).
    pub(crate) fn initial_theta(&self) -> Vec<f64> {
        match &self.kind {
            FamilyKind::Gaussian1d => vec![-0.5, 0.0],
            _ => vec![0.0; self.dimension()],
        }
    }

    /// Centroid of the component simplex.
    pub(crate) fn initial_eta(&self) -> Vec<f64> {
        match &self.kind {
            FamilyKind::Mixture { components } => {
                vec![1.0 / (components.dimension() + 1) as f64; components.dimension()]
            }
            FamilyKind::Gaussian1d => vec![1.0, 0.0],
            FamilyKind::Binomial { trials } => vec![f64::from(*trials) / 2.0],
            FamilyKind::Categorical { outcomes } => vec![1.0 / *outcomes as f64; outcomes - 1],
            FamilyKind::SelfDual { dimension } => vec![0.0; *dimension],
        }
    }

    // ---- parameters ----

    /// Builds a point from user-facing parameters.
    pub fn point_from_params(&self, params: &NaturalParams) -> Result<CoordinatePair> {
        match (&self.kind, params) {
            (FamilyKind::Gaussian1d, NaturalParams::Gaussian { mu, sigma }) => {
                if !(sigma.is_finite() && *sigma > 0.0 && mu.is_finite()) {
                    return Err(Error::Domain(format!("need finite μ and σ > 0, got μ={mu}, σ={sigma}")));
                }
                let var = sigma * sigma;
                self.point_from_theta(&ThetaCoord::new(vec![-1.0 / (2.0 * var), mu / var])?)
            }
            (FamilyKind::Binomial { trials }, NaturalParams::Binomial { p }) => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::Domain(format!("need p ∈ (0,1), got {p}")));
                }
                self.point_from_eta(&EtaCoord::new(vec![f64::from(*trials) * p])?)
            }
            (FamilyKind::Categorical { outcomes }, NaturalParams::Categorical { probs }) => {
                if probs.len() != *outcomes {
                    return Err(Error::Dimension { expected: *outcomes, got: probs.len() });
                }
                let sum: f64 = probs.iter().sum();
                if probs.iter().any(|p| !(*p > 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "need a strictly positive probability vector, got {probs:?}"
                    )));
                }
                self.point_from_eta(&EtaCoord::new(probs[..outcomes - 1].to_vec())?)
            }
            (FamilyKind::Mixture { .. }, NaturalParams::Mixture { weights }) => {
                self.point_from_eta(&EtaCoord::new(weights.clone())?)
            }
            (FamilyKind::SelfDual { .. }, NaturalParams::SelfDual { values }) => {
                self.point_from_theta(&ThetaCoord::new(values.clone())?)
            }
            (_, p) => Err(Error::Domain(format!(
                "parameters {p:?} do not match family {}",
                self.label()
            ))),
        }
    }

    /// Inverse of [`Family::point_from_params`].
    pub fn params_of(&self, point: &CoordinatePair) -> NaturalParams {
        let e = point.eta().as_slice();
        match &self.kind {
            FamilyKind::Gaussian1d => NaturalParams::Gaussian {
                mu: e[1],
                sigma: (e[0] - e[1] * e[1]).sqrt(),
            },
            FamilyKind::Binomial { trials } => NaturalParams::Binomial { p: e[0] / f64::from(*trials) },
            FamilyKind::Categorical { .. } => NaturalParams::Categorical {
                probs: categorical_probs(e),
            },
            FamilyKind::Mixture { .. } => NaturalParams::Mixture { weights: e.to_vec() },
            FamilyKind::SelfDual { .. } => NaturalParams::SelfDual {
                values: point.theta().as_slice().to_vec(),
            },
        }
    }

    /// Probability mass function over the finite support, from the
    /// distribution parameters (never from the potentials).
    pub fn pmf(&self, point: &CoordinatePair) -> Result<Vec<f64>> {
        let e = point.eta().as_slice();
        match &self.kind {
            FamilyKind::Binomial { trials } => {
                let p = e[0] / f64::from(*trials);
                Ok((0..=*trials).map(|k| binomial_pmf(*trials, k, p)).collect())
            }
            FamilyKind::Categorical { .. } => Ok(categorical_probs(e)),
            FamilyKind::Mixture { components } => Ok(components.density(e)),
            _ => Err(Error::Unsupported(format!("{} is not discrete", self.label()))),
        }
    }

    /// ln p(outcome) via the exponential form C(x) + θ·F(x) − ψ(θ), or the
    /// mixture density for mixture families.
    pub fn log_density(&self, point: &CoordinatePair, outcome: &Outcome) -> Result<f64> {
        let t = point.theta().as_slice();
        let psi = point.psi();
        match (&self.kind, outcome) {
            (FamilyKind::Gaussian1d, Outcome::Real(x)) if x.is_finite() => {
                Ok(t[0] * x * x + t[1] * x - psi)
            }
            (FamilyKind::Binomial { trials }, Outcome::Index(k)) if *k as u64 <= u64::from(*trials) => {
                Ok(ln_choose(*trials, *k as u32) + t[0] * *k as f64 - psi)
            }
            (FamilyKind::Categorical { outcomes }, Outcome::Index(k)) if k < outcomes => {
                let stat = if *k + 1 < *outcomes { t[*k] } else { 0.0 };
                Ok(stat - psi)
            }
            (FamilyKind::Mixture { components }, Outcome::Index(k)) if *k < components.support_size() => {
                Ok(components.density(point.eta().as_slice())[*k].ln())
            }
            (FamilyKind::SelfDual { dimension }, Outcome::Vector(x))
                if x.len() == *dimension && x.iter().all(|v| v.is_finite()) =>
            {
                let n = *dimension as f64;
                Ok(-0.5 * dot(x, x) - 0.5 * n * (2.0 * PI).ln() + dot(t, x) - psi)
            }
            (_, o) => Err(Error::Domain(format!(
                "outcome {o:?} is not in the support of {}",
                self.label()
            ))),
        }
    }

    // ---- reference oracles ----

    /// Entropy (differential for continuous families) computed by direct
    /// summation or the Gaussian closed form.
    pub fn reference_entropy(&self, point: &CoordinatePair) -> Result<f64> {
        match (&self.kind, self.params_of(point)) {
            (FamilyKind::Gaussian1d, NaturalParams::Gaussian { sigma, .. }) => {
                Ok(0.5 * (2.0 * PI * E * sigma * sigma).ln())
            }
            (FamilyKind::SelfDual { dimension }, _) => {
                Ok(0.5 * *dimension as f64 * (2.0 * PI * E).ln())
            }
            _ => Ok(entropy(&self.pmf(point)?)),
        }
    }

    /// KL(p_P ‖ p_Q) by exact summation or the Gaussian closed form.
    pub fn reference_kl(&self, p: &CoordinatePair, q: &CoordinatePair) -> Result<f64> {
        match (&self.kind, self.params_of(p), self.params_of(q)) {
            (
                FamilyKind::Gaussian1d,
                NaturalParams::Gaussian { mu: mp, sigma: sp },
                NaturalParams::Gaussian { mu: mq, sigma: sq },
            ) => Ok((sq / sp).ln() + (sp * sp + (mp - mq) * (mp - mq)) / (2.0 * sq * sq) - 0.5),
            (
                FamilyKind::SelfDual { .. },
                NaturalParams::SelfDual { values: a },
                NaturalParams::SelfDual { values: b },
            ) => Ok(0.5 * a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()),
            _ => Ok(kl(&self.pmf(p)?, &self.pmf(q)?)),
        }
    }

    /// −ln ∫ p_P^{1−α} p_Q^α, by exact summation on discrete supports and by
    /// adaptive quadrature for the Gaussian.
    pub fn reference_bhattacharyya(
        &self,
        p: &CoordinatePair,
        q: &CoordinatePair,
        alpha: f64,
    ) -> Result<f64> {
        check_alpha(alpha)?;
        match (&self.kind, self.params_of(p), self.params_of(q)) {
            (
                FamilyKind::Gaussian1d,
                NaturalParams::Gaussian { mu: mp, sigma: sp },
                NaturalParams::Gaussian { mu: mq, sigma: sq },
            ) => {
                let width = 12.0 * sp.max(sq);
                let (lo, hi) = (mp.min(mq) - width, mp.max(mq) + width);
                let log_normal = |x: f64, m: f64, s: f64| {
                    -0.5 * (2.0 * PI * s * s).ln() - (x - m) * (x - m) / (2.0 * s * s)
                };
                let integrand =
                    |x: f64| ((1.0 - alpha) * log_normal(x, mp, sp) + alpha * log_normal(x, mq, sq)).exp();
                // The integrand peaks at the precision-weighted mean with
                // width 1/√precision, which can be far narrower than the
                // window; panels graded around the peak keep the rule
                // from stepping over it.
                let precision = (1.0 - alpha) / (sp * sp) + alpha / (sq * sq);
                let peak = ((1.0 - alpha) * mp / (sp * sp) + alpha * mq / (sq * sq)) / precision;
                let spread = precision.sqrt().recip();
                let mut cuts: Vec<f64> = [-12.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 12.0]
                    .iter()
                    .map(|k| peak + k * spread)
                    .filter(|x| *x > lo && *x < hi)
                    .collect();
                cuts.insert(0, lo);
                cuts.push(hi);
                let integral: f64 = cuts
                    .windows(2)
                    .map(|w| quadrature::double_exponential::integrate(integrand, w[0], w[1], 1e-10).integral)
                    .sum();
                if !(integral.is_finite() && integral > 0.0) {
                    return Err(Error::Quadrature(format!(
                        "Bhattacharyya coefficient quadrature returned {integral}"
                    )));
                }
                Ok(-integral.ln())
            }
            _ if self.is_discrete() => {
                let (a, b) = (self.pmf(p)?, self.pmf(q)?);
                let coefficient: f64 = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| x.powf(1.0 - alpha) * y.powf(alpha))
                    .sum();
                Ok(-coefficient.ln())
            }
            _ => Err(Error::Unsupported(format!(
                "no Bhattacharyya reference for {}",
                self.label()
            ))),
        }
    }

    /// α-skew Jensen-Shannon divergence, as (KL form, entropy form). Both are
    /// computed by pointwise mixing on the discrete support.
    pub fn reference_js_forms(
        &self,
        p: &CoordinatePair,
        q: &CoordinatePair,
        alpha: f64,
    ) -> Result<(f64, f64)> {
        check_alpha(alpha)?;
        if !self.is_discrete() {
            return Err(Error::Unsupported(format!(
                "skew JS reference needs a discrete support; {} is continuous",
                self.label()
            )));
        }
        let (a, b) = (self.pmf(p)?, self.pmf(q)?);
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - alpha) * x + alpha * y).collect();
        let kl_form = (1.0 - alpha) * kl(&a, &m) + alpha * kl(&b, &m);
        let entropy_form = entropy(&m) - (1.0 - alpha) * entropy(&a) - alpha * entropy(&b);
        Ok((kl_form, entropy_form))
    }

    pub fn reference_js(&self, p: &CoordinatePair, q: &CoordinatePair, alpha: f64) -> Result<f64> {
        self.reference_js_forms(p, q, alpha).map(|(kl_form, _)| kl_form)
    }

    /// Fisher information E[∂ᵢl ∂ⱼl] by exact summation over the support.
    pub fn reference_fisher(&self, point: &CoordinatePair) -> Result<DMatrix<f64>> {
        match &self.kind {
            FamilyKind::Binomial { trials } => {
                let eta = point.eta()[0];
                let pmf = self.pmf(point)?;
                let v: f64 = (0..=*trials)
                    .map(|k| pmf[k as usize] * (k as f64 - eta).powi(2))
                    .sum();
                Ok(DMatrix::from_element(1, 1, v))
            }
            FamilyKind::Categorical { outcomes } => {
                let pmf = self.pmf(point)?;
                let eta = point.eta().as_slice();
                let n = outcomes - 1;
                let score = |x: usize, i: usize| f64::from(u8::from(x == i)) - eta[i];
                Ok(DMatrix::from_fn(n, n, |i, j| {
                    (0..*outcomes).map(|x| pmf[x] * score(x, i) * score(x, j)).sum()
                }))
            }
            _ => Err(Error::Unsupported(format!(
                "exact Fisher summation needs an exponential family on a finite support; got {}",
                self.label()
            ))),
        }
    }

    // ---- sampling ----

    /// Draws parameters from the verification box: μ ∈ [−3,3], σ ∈ [0.3,3],
    /// p ∈ [0.05,0.95], probabilities and mixing weights ≥ 0.05, self-dual
    /// coordinates in [−3,3].
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> NaturalParams {
        match &self.kind {
            FamilyKind::Gaussian1d => NaturalParams::Gaussian {
                mu: rng.random_range(-3.0..=3.0),
                sigma: rng.random_range(0.3..=3.0),
            },
            FamilyKind::Binomial { .. } => NaturalParams::Binomial { p: rng.random_range(0.05..=0.95) },
            FamilyKind::Categorical { outcomes } => NaturalParams::Categorical {
                probs: shrunk_simplex(rng, *outcomes),
            },
            FamilyKind::Mixture { components } => NaturalParams::Mixture {
                weights: shrunk_simplex(rng, components.dimension() + 1)[1..].to_vec(),
            },
            FamilyKind::SelfDual { dimension } => NaturalParams::SelfDual {
                values: (0..*dimension).map(|_| rng.random_range(-3.0..=3.0)).collect(),
            },
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CoordinatePair> {
        let params = self.sample_params(rng);
        self.point_from_params(&params)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("skew parameter α must lie in (0,1), got {alpha}")))
    }
}

/// Uniform point of the probability simplex with every coordinate at least
/// `min(0.05, 0.5/len)`.
fn shrunk_simplex<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let floor = SAMPLE_FLOOR.min(0.5 / len as f64);
    let spacings: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = spacings.iter().sum();
    let free = 1.0 - floor * len as f64;
    spacings.iter().map(|s| floor + free * s / total).collect()
}

fn categorical_probs(eta: &[f64]) -> Vec<f64> {
    let mut probs = eta.to_vec();
    probs.push(1.0 - eta.iter().sum::<f64>());
    probs
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|v| xlnx(*v)).sum::<f64>()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + Σ e^{tᵢ}).
fn log1p_sum_exp(t: &[f64]) -> f64 {
    let m = t.iter().cloned().fold(0.0_f64, f64::max);
    m + ((-m).exp() + t.iter().map(|v| (v - m).exp()).sum::<f64>()).ln()
}

/// Probabilities of the first m−1 outcomes when the last has θ = 0.
fn softmax_with_reference(t: &[f64]) -> Vec<f64> {
    let m = t.iter().cloned().fold(0.0_f64, f64::max);
    let denom = (-m).exp() + t.iter().map(|v| (v - m).exp()).sum::<f64>();
    t.iter().map(|v| (v - m).exp() / denom).collect()
}

fn ln_choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| (f64::from(n - k + i) / f64::from(i)).ln()).sum()
}

fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    (ln_choose(n, k) + f64::from(k) * p.ln() + f64::from(n - k) * (1.0 - p).ln()).exp()
}
