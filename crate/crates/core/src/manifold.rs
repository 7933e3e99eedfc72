//! Dual affine coordinates, Legendre-dual potentials, and the Riemannian
//! metric of a dually flat family.
//!
//! Every point is carried as a [`CoordinatePair`] holding θ, η, ψ(θ) and
//! φ(η), all computed when the point is built. Divergences mix the θ of one
//! point with the η of another, so both charts are always at hand.

use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{dot, ConjugateMode, Family};

/// Newton iteration cap for the conjugate solvers.
pub const MAX_NEWTON_STEPS: usize = 100;
/// Gradient tolerance of the conjugate solvers, relative to 1 + ‖target‖.
pub const CONJUGATE_GRAD_TOL: f64 = 1e-10;

const MAX_HALVINGS: usize = 60;

/// The two affine charts of a dually flat space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Theta,
    Eta,
}

impl Chart {
    pub fn name(self) -> &'static str {
        match self {
            Chart::Theta => "theta",
            Chart::Eta => "eta",
        }
    }
}

impl std::str::FromStr for Chart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" | "θ" => Ok(Chart::Theta),
            "eta" | "η" => Ok(Chart::Eta),
            other => Err(Error::Config(format!("unknown chart {other:?}; expected theta or eta"))),
        }
    }
}

macro_rules! coord_newtype {
    ($name:ident, $what:literal) => {
        #[doc = concat!("A finite ", $what, " coordinate vector.")]
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!(
                        concat!("non-finite ", $what, " coordinate {}"),
                        v
                    )));
                }
                Ok(Self(values))
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Index<usize> for $name {
            type Output = f64;

            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

coord_newtype!(ThetaCoord, "θ");
coord_newtype!(EtaCoord, "η");

/// A manifold point in both charts, with both potentials cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatePair {
    theta: ThetaCoord,
    eta: EtaCoord,
    psi: f64,
    phi: f64,
}

impl CoordinatePair {
    pub fn theta(&self) -> &ThetaCoord {
        &self.theta
    }

    pub fn eta(&self) -> &EtaCoord {
        &self.eta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn coords(&self, chart: Chart) -> &[f64] {
        match chart {
            Chart::Theta => self.theta.as_slice(),
            Chart::Eta => self.eta.as_slice(),
        }
    }

    /// |ψ(θ) + φ(η) − θ·η|.
    pub fn duality_residual(&self) -> f64 {
        (self.psi + self.phi - dot(self.theta.as_slice(), self.eta.as_slice())).abs()
    }
}

/// g_ij (θ-form, Hessian of ψ) or g^ij (η-form, Hessian of φ).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    entries: DMatrix<f64>,
    form: Chart,
}

impl MetricMatrix {
    /// Checks symmetry and positive definiteness.
    pub fn new(entries: DMatrix<f64>, form: Chart) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Conditioning(format!(
                "metric is {}×{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning("metric has non-finite entries".into()));
        }
        let scale = 1.0 + entries.amax();
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Conditioning(format!("asymmetry {asym:e}")));
        }
        let entries = (&entries + entries.transpose()) * 0.5;
        if entries.clone().cholesky().is_none() {
            return Err(Error::Conditioning("Cholesky factorization failed".into()));
        }
        Ok(Self { entries, form })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn form(&self) -> Chart {
        self.form
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    /// aᵀ G a.
    pub fn quadratic_form(&self, a: &[f64]) -> f64 {
        let v = DVector::from_column_slice(a);
        (v.transpose() * &self.entries * &v)[(0, 0)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }

    /// The metric in the other chart.
    pub fn inverse(&self) -> Result<MetricMatrix> {
        let inv = self
            .entries
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Conditioning("Cholesky factorization failed".into()))?
            .inverse();
        let other = match self.form {
            Chart::Theta => Chart::Eta,
            Chart::Eta => Chart::Theta,
        };
        MetricMatrix::new(inv, other)
    }

    /// max |(G·H − I)ᵢⱼ|.
    pub fn product_deviation(&self, other: &MetricMatrix) -> f64 {
        let n = self.dimension();
        (&self.entries * &other.entries - DMatrix::<f64>::identity(n, n)).amax()
    }
}

/// Smooth convex potential evaluated together with gradient and Hessian.
type PotentialEval<'a> = dyn Fn(&[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)> + 'a;

/// Maximizes target·x − F(x) over the open convex domain by damped Newton.
/// Returns the maximizer and the maximum, i.e. the Legendre conjugate F*(target).
fn legendre_newton(
    target: &[f64],
    start: Vec<f64>,
    potential: &PotentialEval<'_>,
    contains: &dyn Fn(&[f64]) -> bool,
) -> Result<(Vec<f64>, f64)> {
    if !contains(&start) {
        return Err(Error::Domain(format!("initial guess {start:?} outside the domain")));
    }
    let tol = CONJUGATE_GRAD_TOL * (1.0 + dot(target, target).sqrt());
    let mut x = start;
    for _ in 0..MAX_NEWTON_STEPS {
        let (f, grad, hess) = potential(&x)
            .ok_or_else(|| Error::Domain(format!("potential not finite at {x:?}")))?;
        let objective = dot(target, &x) - f;
        let g: Vec<f64> = target.iter().zip(&grad).map(|(t, d)| t - d).collect();
        let gnorm = dot(&g, &g).sqrt();
        let step = newton_direction(&hess, &g)?;
        if gnorm <= tol {
            // one undamped polishing step, kept only if it helps
            let polished: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + d).collect();
            if contains(&polished) {
                if let Some((pf, pgrad, _)) = potential(&polished) {
                    let pg = target.iter().zip(&pgrad).map(|(t, d)| (t - d) * (t - d)).sum::<f64>();
                    if pg.sqrt() < gnorm {
                        let value = dot(target, &polished) - pf;
                        return Ok((polished, value));
                    }
                }
            }
            return Ok((x, objective));
        }
        // rounding noise of target·x − F(x) scales with its terms, not
        // with the (possibly much smaller) difference
        let slack = 1e-14 * (1.0 + dot(target, &x).abs() + f.abs());
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            if contains(&trial) {
                if let Some((tf, _, _)) = potential(&trial) {
                    if dot(target, &trial) - tf >= objective - slack {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        x = match accepted {
            Some(next) => next,
            None => {
                return Err(Error::Domain(format!(
                    "Newton iterates cannot stay in the domain near {x:?} (gradient norm {gnorm:e})"
                )))
            }
        };
    }
    Err(Error::Convergence(format!(
        "no convergence after {MAX_NEWTON_STEPS} damped Newton steps for target {target:?}"
    )))
}

fn newton_direction(hess: &DMatrix<f64>, g: &[f64]) -> Result<Vec<f64>> {
    let chol = hess
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning("Hessian not positive definite in Newton step".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(g)).iter().cloned().collect())
}

/// Central-difference gradient with per-coordinate step cbrt(ε)·(1+|xᵢ|).
pub fn finite_difference_gradient<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let base = f64::EPSILON.cbrt();
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = base * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let up = f(&probe)?;
            probe[i] = x[i] - h;
            let down = f(&probe)?;
            probe[i] = x[i];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Central-difference Jacobian J[i][j] = ∂fᵢ/∂xⱼ.
pub fn finite_difference_jacobian<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let base = f64::EPSILON.cbrt();
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = base * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        let up = f(&probe)?;
        probe[j] = x[j] - h;
        let down = f(&probe)?;
        probe[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

impl Family {
    /// ψ(θ). For the mixture family this goes through the dual conjugate solve.
    pub fn potential_psi(&self, theta: &ThetaCoord) -> Result<f64> {
        let t = theta.as_slice();
        self.require_theta(t)?;
        let value = match self.closed_psi(t) {
            Some(v) => v,
            None => self.dual_conjugate_solve(theta, None)?.1,
        };
        finite(value, "ψ")
    }

    /// φ(η), closed form unless the family is in numerical-conjugate mode.
    pub fn potential_phi(&self, eta: &EtaCoord) -> Result<f64> {
        let e = eta.as_slice();
        self.require_eta(e)?;
        let value = match self.conjugate_mode() {
            ConjugateMode::Numerical if self.is_exponential() => self.conjugate_solve(eta, None)?.1,
            _ => self.closed_phi(e),
        };
        finite(value, "φ")
    }

    /// η = ∇ψ(θ).
    pub fn eta_from_theta(&self, theta: &ThetaCoord) -> Result<EtaCoord> {
        let t = theta.as_slice();
        self.require_theta(t)?;
        let eta = match self.closed_grad_psi(t) {
            Some(e) => EtaCoord::new(e)?,
            None => self.dual_conjugate_solve(theta, None)?.0,
        };
        self.require_eta(eta.as_slice())?;
        Ok(eta)
    }

    /// θ = ∇φ(η).
    pub fn theta_from_eta(&self, eta: &EtaCoord) -> Result<ThetaCoord> {
        let e = eta.as_slice();
        self.require_eta(e)?;
        let theta = match self.conjugate_mode() {
            ConjugateMode::Numerical if self.is_exponential() => self.conjugate_solve(eta, None)?.0,
            _ => ThetaCoord::new(self.closed_grad_phi(e))?,
        };
        self.require_theta(theta.as_slice())?;
        Ok(theta)
    }

    /// Builds the full pair from θ.
    pub fn point_from_theta(&self, theta: &ThetaCoord) -> Result<CoordinatePair> {
        let t = theta.as_slice();
        self.require_theta(t)?;
        let (eta, psi, phi) = match (self.closed_psi(t), self.closed_grad_psi(t)) {
            (Some(psi), Some(eta)) => {
                let eta = EtaCoord::new(eta)?;
                self.require_eta(eta.as_slice())?;
                let phi = self.potential_phi(&eta)?;
                (eta, psi, phi)
            }
            _ => {
                let (eta, psi) = self.dual_conjugate_solve(theta, None)?;
                let phi = self.closed_phi(eta.as_slice());
                (eta, psi, phi)
            }
        };
        Ok(CoordinatePair {
            theta: theta.clone(),
            eta,
            psi: finite(psi, "ψ")?,
            phi: finite(phi, "φ")?,
        })
    }

    /// Builds the full pair from η.
    pub fn point_from_eta(&self, eta: &EtaCoord) -> Result<CoordinatePair> {
        let e = eta.as_slice();
        self.require_eta(e)?;
        let (theta, phi) = match self.conjugate_mode() {
            ConjugateMode::Numerical if self.is_exponential() => self.conjugate_solve(eta, None)?,
            _ => (ThetaCoord::new(self.closed_grad_phi(e))?, self.closed_phi(e)),
        };
        self.require_theta(theta.as_slice())?;
        let psi = match self.closed_psi(theta.as_slice()) {
            Some(v) => v,
            None => dot(theta.as_slice(), e) - phi,
        };
        Ok(CoordinatePair {
            theta,
            eta: eta.clone(),
            psi: finite(psi, "ψ")?,
            phi: finite(phi, "φ")?,
        })
    }

    pub fn point(&self, chart: Chart, coords: Vec<f64>) -> Result<CoordinatePair> {
        match chart {
            Chart::Theta => self.point_from_theta(&ThetaCoord::new(coords)?),
            Chart::Eta => self.point_from_eta(&EtaCoord::new(coords)?),
        }
    }

    /// g_ij = ∂ᵢ∂ⱼψ (θ-form) or its inverse g^ij = ∂ⁱ∂ʲφ (η-form).
    pub fn metric(&self, point: &CoordinatePair, form: Chart) -> Result<MetricMatrix> {
        let t = point.theta().as_slice();
        let e = point.eta().as_slice();
        self.require_theta(t)?;
        if let Some(h) = self.closed_hess_psi(t) {
            let g = MetricMatrix::new(h, Chart::Theta)?;
            return match form {
                Chart::Theta => Ok(g),
                Chart::Eta => g.inverse(),
            };
        }
        let h = self
            .closed_hess_phi(e)
            .ok_or_else(|| Error::Unsupported(format!("no metric available for {}", self.label())))?;
        let g = MetricMatrix::new(h, Chart::Eta)?;
        match form {
            Chart::Eta => Ok(g),
            Chart::Theta => g.inverse(),
        }
    }

    /// Numerical Legendre transform: argmax_θ θ·η − ψ(θ) and its value φ(η).
    /// Needs closed-form ψ, so the mixture family is unsupported here.
    pub fn conjugate_solve(
        &self,
        eta: &EtaCoord,
        initial_theta: Option<&ThetaCoord>,
    ) -> Result<(ThetaCoord, f64)> {
        let e = eta.as_slice();
        self.require_eta(e)?;
        if !self.is_exponential() {
            return Err(Error::Unsupported(format!(
                "{} has no closed-form ψ; use the dual solve",
                self.label()
            )));
        }
        let start = match initial_theta {
            Some(t) => t.as_slice().to_vec(),
            None => self.initial_theta(),
        };
        let potential = |t: &[f64]| -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
            let v = self.closed_psi(t)?;
            v.is_finite()
                .then(|| Some((v, self.closed_grad_psi(t)?, self.closed_hess_psi(t)?)))
                .flatten()
        };
        let (theta, value) = legendre_newton(e, start, &potential, &|t| self.contains_theta(t))?;
        Ok((ThetaCoord::new(theta)?, value))
    }

    /// Mirror of [`Family::conjugate_solve`]: argmax_η θ·η − φ(η) and its
    /// value ψ(θ). Used where ψ has no closed form.
    pub fn dual_conjugate_solve(
        &self,
        theta: &ThetaCoord,
        initial_eta: Option<&EtaCoord>,
    ) -> Result<(EtaCoord, f64)> {
        let t = theta.as_slice();
        self.require_theta(t)?;
        let start = match initial_eta {
            Some(e) => e.as_slice().to_vec(),
            None => self.initial_eta(),
        };
        let potential = |e: &[f64]| -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
            let v = self.closed_phi(e);
            if !v.is_finite() {
                return None;
            }
            let hess = match self.closed_hess_phi(e) {
                Some(h) => h,
                None => {
                    let theta = self.closed_grad_phi(e);
                    self.closed_hess_psi(&theta)?.try_inverse()?
                }
            };
            Some((v, self.closed_grad_phi(e), hess))
        };
        let (eta, value) = legendre_newton(t, start, &potential, &|e| self.contains_eta(e))?;
        Ok((EtaCoord::new(eta)?, value))
    }

    /// |ψ(θ) + φ(η) − θ·η| of a point.
    pub fn duality_residual(&self, point: &CoordinatePair) -> Result<f64> {
        self.require_theta(point.theta().as_slice())?;
        self.require_eta(point.eta().as_slice())?;
        Ok(point.duality_residual())
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} evaluates to {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyKind, MixtureComponents, NaturalParams};

    fn gaussian() -> Family {
        Family::new(FamilyKind::Gaussian1d).unwrap()
    }

    fn binomial(n: u32) -> Family {
        Family::new(FamilyKind::Binomial { trials: n }).unwrap()
    }

    fn selfdual(n: usize) -> Family {
        Family::new(FamilyKind::SelfDual { dimension: n }).unwrap()
    }

    fn coin_mixture() -> Family {
        Family::new(FamilyKind::Mixture {
            components: MixtureComponents::new(vec![vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap(),
        })
        .unwrap()
    }

    fn theta(v: &[f64]) -> ThetaCoord {
        ThetaCoord::new(v.to_vec()).unwrap()
    }

    fn eta(v: &[f64]) -> EtaCoord {
        EtaCoord::new(v.to_vec()).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert!((gaussian().potential_psi(&theta(&[-0.5, 0.0])).unwrap() - 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((binomial(1).potential_psi(&theta(&[0.0])).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(selfdual(2).potential_psi(&theta(&[3.0, 4.0])).unwrap(), 12.5);
        assert!(matches!(gaussian().potential_psi(&theta(&[0.5, 0.0])), Err(Error::Domain(_))));
        assert!(matches!(
            gaussian().potential_psi(&theta(&[-0.5])),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn phi_examples() {
        assert!((gaussian().potential_phi(&eta(&[1.0, 0.0])).unwrap() + 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((coin_mixture().potential_phi(&eta(&[1.0])).unwrap() + 0.325_082_973_391_448_24).abs() < 1e-12);
        assert_eq!(selfdual(1).potential_phi(&eta(&[2.0])).unwrap(), 2.0);
        // σ² = η₁ − η₂² = 0 is on the boundary
        assert!(matches!(gaussian().potential_phi(&eta(&[1.0, 1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn coordinate_map_examples() {
        let e = gaussian().eta_from_theta(&theta(&[-0.125, 0.25])).unwrap();
        assert!((e[0] - 5.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
        assert_eq!(binomial(10).eta_from_theta(&theta(&[0.0])).unwrap().as_slice(), &[5.0]);
        assert_eq!(selfdual(2).eta_from_theta(&theta(&[1.5, -2.0])).unwrap().as_slice(), &[1.5, -2.0]);

        let t = binomial(1).theta_from_eta(&eta(&[0.8])).unwrap();
        assert!((t[0] - 4f64.ln()).abs() < 1e-12);
        let t = gaussian().theta_from_eta(&eta(&[1.0, 0.0])).unwrap();
        assert_eq!(t.as_slice(), &[-0.5, 0.0]);
        assert_eq!(selfdual(1).theta_from_eta(&eta(&[0.7])).unwrap().as_slice(), &[0.7]);
        assert!(matches!(binomial(1).theta_from_eta(&eta(&[1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn metric_examples_against_finite_differences() {
        let g = gaussian();
        let p = g.point_from_theta(&theta(&[-0.5, 0.0])).unwrap();
        let fd = finite_difference_jacobian(|t| Ok(g.closed_grad_psi(t).unwrap()), &[-0.5, 0.0]).unwrap();
        // FD oracle gives [[2, 0], [0, 1]] (Var x² = 2 under N(0,1))
        assert!((fd[(0, 0)] - 2.0).abs() < 1e-6 && fd[(0, 1)].abs() < 1e-6 && (fd[(1, 1)] - 1.0).abs() < 1e-6);
        let m = g.metric(&p, Chart::Theta).unwrap();
        assert!((m.entries() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).amax() < 1e-12);

        let b = binomial(1);
        let p = b.point_from_theta(&theta(&[0.0])).unwrap();
        assert!((b.metric(&p, Chart::Theta).unwrap().entries()[(0, 0)] - 0.25).abs() < 1e-15);

        let s = selfdual(2);
        let p = s.point_from_theta(&theta(&[0.3, -1.0])).unwrap();
        assert_eq!(s.metric(&p, Chart::Theta).unwrap().entries(), &DMatrix::identity(2, 2));
        assert_eq!(s.metric(&p, Chart::Eta).unwrap().entries(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn metric_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(MetricMatrix::new(m, Chart::Theta), Err(Error::Conditioning(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(MetricMatrix::new(m, Chart::Theta), Err(Error::Conditioning(_))));
    }

    #[test]
    fn conjugate_solve_examples() {
        let (t, phi) = binomial(1).conjugate_solve(&eta(&[0.8]), None).unwrap();
        assert!((t[0] - 4f64.ln()).abs() < 1e-10);
        // 0.8·ln4 − ln5
        assert!((phi + 0.500_402_423_538_187_9).abs() < 1e-12);

        let (t, phi) = selfdual(2).conjugate_solve(&eta(&[2.0, 3.0]), None).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-12 && (t[1] - 3.0).abs() < 1e-12);
        assert!((phi - 6.5).abs() < 1e-12);

        let (t, _) = gaussian().conjugate_solve(&eta(&[5.0, 1.0]), None).unwrap();
        assert!((t[0] + 0.125).abs() < 1e-10 && (t[1] - 0.25).abs() < 1e-10);

        assert!(matches!(
            coin_mixture().conjugate_solve(&eta(&[0.5]), None),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            gaussian().conjugate_solve(&eta(&[5.0, 1.0]), Some(&theta(&[1.0, 0.0]))),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn conjugate_solve_reaches_gradient_tolerance() {
        let g = gaussian();
        for target in [[5.0, 1.0], [0.2, -0.3], [12.0, 3.3]] {
            let (t, _) = g.conjugate_solve(&eta(&target), None).unwrap();
            let grad = g.closed_grad_psi(t.as_slice()).unwrap();
            let res: f64 = grad.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale = 1.0 + target.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(res < CONJUGATE_GRAD_TOL * scale, "{res:e}");
        }
    }

    #[test]
    fn duality_residual_examples() {
        let s = selfdual(2);
        let p = s.point_from_theta(&theta(&[1.0, 1.0])).unwrap();
        assert_eq!((p.psi(), p.phi()), (1.0, 1.0));
        assert_eq!(s.duality_residual(&p).unwrap(), 0.0);

        let g = gaussian();
        let p = g.point_from_params(&NaturalParams::Gaussian { mu: 1.3, sigma: 0.4 }).unwrap();
        assert!(g.duality_residual(&p).unwrap() < 1e-9);

        let gn = gaussian().with_conjugate_mode(ConjugateMode::Numerical);
        let p = gn.point_from_eta(&eta(&[5.0, 1.0])).unwrap();
        let closed = g.closed_phi(&[5.0, 1.0]) + g.closed_psi(p.theta().as_slice()).unwrap()
            - dot(p.theta().as_slice(), &[5.0, 1.0]);
        assert!(closed.abs() < 1e-6);
    }

    #[test]
    fn mixture_dual_solve_round_trip() {
        let m = Family::new(FamilyKind::default_mixture()).unwrap();
        let p = m.point_from_params(&NaturalParams::Mixture { weights: vec![0.2, 0.5] }).unwrap();
        let back = m.point_from_theta(p.theta()).unwrap();
        for (a, b) in back.eta().as_slice().iter().zip(p.eta().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((back.psi() - p.psi()).abs() < 1e-12);
        let m_theta = m.metric(&p, Chart::Theta).unwrap();
        let m_eta = m.metric(&p, Chart::Eta).unwrap();
        assert!(m_theta.product_deviation(&m_eta) < 1e-10);
    }
}
