//! Divergence functionals built from cached coordinate pairs.
//!
//! * canonical: D(P‖Q) = ψ(P) + φ(Q) − θ(P)·η(Q)
//! * affine: D_A(P,Q) = (η(Q)−η(P))·(θ(Q)−θ(P)) = D(P‖Q) + D(Q‖P)
//! * α-skew ψ-divergence: (1−α)ψ(P) + αψ(Q) − ψ(R), θ(R) = (1−α)θ(P) + αθ(Q)
//! * α-skew φ-divergence: (1−α)φ(P) + αφ(Q) − φ(R), η(R) = (1−α)η(P) + αη(Q)
//!
//! On exponential and mixture families the affine divergence is the Jeffreys
//! divergence; there is no separate Jeffreys routine.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{check_alpha, dot, Family};
use crate::manifold::{Chart, CoordinatePair};

/// Rounding slack for nonnegative quantities, scaled by 1 + Σ|terms|.
pub const NONNEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Canonical,
    Affine,
    PsiSkew,
    PhiSkew,
    Renyi,
    Combination,
}

impl DivergenceKind {
    fn nonnegative(self) -> bool {
        !matches!(self, DivergenceKind::Combination)
    }
}

/// A divergence value with the parameters that produced it. `value` has
/// already been clamped to 0 when it fell within rounding slack below 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceValue {
    pub kind: DivergenceKind,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 2]>,
}

impl DivergenceValue {
    fn new(kind: DivergenceKind, raw: f64, scale: f64) -> Result<Self> {
        let value = if kind.nonnegative() { clamp_nonnegative(kind, raw, scale)? } else { raw };
        Ok(Self { kind, value, alpha: None, weights: None })
    }

    fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }
}

fn clamp_nonnegative(kind: DivergenceKind, raw: f64, scale: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::Numerical(format!("{kind:?} divergence is {raw}")));
    }
    if raw >= 0.0 {
        Ok(raw)
    } else if raw >= -NONNEGATIVE_SLACK * (1.0 + scale) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "{kind:?} divergence {raw:e} is negative beyond rounding slack"
        )))
    }
}

fn check_points(family: &Family, points: &[&CoordinatePair]) -> Result<()> {
    let n = family.dimension();
    for p in points {
        if p.theta().len() != n || p.eta().len() != n {
            return Err(Error::Dimension { expected: n, got: p.theta().len() });
        }
    }
    Ok(())
}

/// ψ(P) + φ(Q) − θ(P)·η(Q) without clamping, and the magnitude of its terms.
pub(crate) fn canonical_terms(p: &CoordinatePair, q: &CoordinatePair) -> (f64, f64) {
    let cross = dot(p.theta().as_slice(), q.eta().as_slice());
    (p.psi() + q.phi() - cross, p.psi().abs() + q.phi().abs() + cross.abs())
}

/// Canonical divergence D(P‖Q). On the built-in families this is
/// KL(p_Q ‖ p_P).
pub fn canonical(family: &Family, p: &CoordinatePair, q: &CoordinatePair) -> Result<DivergenceValue> {
    check_points(family, &[p, q])?;
    if p == q {
        // the formula would return the duality residual of P
        return DivergenceValue::new(DivergenceKind::Canonical, 0.0, 0.0);
    }
    let (raw, scale) = canonical_terms(p, q);
    DivergenceValue::new(DivergenceKind::Canonical, raw, scale)
}

fn affine_terms(p: &CoordinatePair, q: &CoordinatePair) -> (f64, f64) {
    let (pt, pe) = (p.theta().as_slice(), p.eta().as_slice());
    let (qt, qe) = (q.theta().as_slice(), q.eta().as_slice());
    let terms = (0..pt.len()).map(|i| (qe[i] - pe[i]) * (qt[i] - pt[i]));
    terms.fold((0.0, 0.0), |(sum, mag), v| (sum + v, mag + v.abs()))
}

/// Affine divergence D_A(P,Q) = (η(Q)−η(P))·(θ(Q)−θ(P)); exactly symmetric.
pub fn affine(family: &Family, p: &CoordinatePair, q: &CoordinatePair) -> Result<DivergenceValue> {
    check_points(family, &[p, q])?;
    let (raw, scale) = affine_terms(p, q);
    DivergenceValue::new(DivergenceKind::Affine, raw, scale)
}

/// ⟨Q,R⟩_P = ½(θ(Q)−θ(P))·(η(R)−η(P)) + ½(θ(R)−θ(P))·(η(Q)−η(P)).
pub fn dual_inner_product(
    family: &Family,
    q: &CoordinatePair,
    r: &CoordinatePair,
    base: &CoordinatePair,
) -> Result<f64> {
    check_points(family, &[q, r, base])?;
    let (bt, be) = (base.theta().as_slice(), base.eta().as_slice());
    let (qt, qe) = (q.theta().as_slice(), q.eta().as_slice());
    let (rt, re) = (r.theta().as_slice(), r.eta().as_slice());
    Ok((0..bt.len())
        .map(|i| 0.5 * (qt[i] - bt[i]) * (re[i] - be[i]) + 0.5 * (rt[i] - bt[i]) * (qe[i] - be[i]))
        .sum())
}

/// Point with chart coordinates a·x(P) + b·x(Q).
pub fn combine(
    family: &Family,
    p: &CoordinatePair,
    q: &CoordinatePair,
    a: f64,
    b: f64,
    chart: Chart,
) -> Result<CoordinatePair> {
    let coords = p
        .coords(chart)
        .iter()
        .zip(q.coords(chart))
        .map(|(x, y)| a * x + b * y)
        .collect();
    family.point(chart, coords)
}

/// α-skew ψ-divergence (1−α)ψ(P) + αψ(Q) − ψ(R) with R the θ-midpoint.
/// On exponential families this is the α-skew Bhattacharyya distance.
pub fn psi_divergence(
    family: &Family,
    p: &CoordinatePair,
    q: &CoordinatePair,
    alpha: f64,
) -> Result<DivergenceValue> {
    check_alpha(alpha)?;
    check_points(family, &[p, q])?;
    let r = combine(family, p, q, 1.0 - alpha, alpha, Chart::Theta)?;
    let raw = (1.0 - alpha) * p.psi() + alpha * q.psi() - r.psi();
    let scale = p.psi().abs() + q.psi().abs() + r.psi().abs();
    Ok(DivergenceValue::new(DivergenceKind::PsiSkew, raw, scale)?.with_alpha(alpha))
}

/// α-skew φ-divergence (1−α)φ(P) + αφ(Q) − φ(R) with R the η-midpoint.
/// On mixture families this is the α-skew Jensen-Shannon divergence.
pub fn phi_divergence(
    family: &Family,
    p: &CoordinatePair,
    q: &CoordinatePair,
    alpha: f64,
) -> Result<DivergenceValue> {
    check_alpha(alpha)?;
    check_points(family, &[p, q])?;
    let r = combine(family, p, q, 1.0 - alpha, alpha, Chart::Eta)?;
    let raw = (1.0 - alpha) * p.phi() + alpha * q.phi() - r.phi();
    let scale = p.phi().abs() + q.phi().abs() + r.phi().abs();
    Ok(DivergenceValue::new(DivergenceKind::PhiSkew, raw, scale)?.with_alpha(alpha))
}

/// Both sides of the weighted-combination identity for R = aP + bQ in one
/// chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewCombination {
    /// θ-side: a·D(P‖R) + b·D(Q‖R); η-side: a·D(R‖P) + b·D(R‖Q).
    pub divergence_form: f64,
    /// θ-side: (a+b−1)φ(R) + aψ(P) + bψ(Q) − ψ(R);
    /// η-side: (a+b−1)ψ(R) + aφ(P) + bφ(Q) − φ(R).
    pub potential_form: f64,
    pub midpoint: CoordinatePair,
}

impl SkewCombination {
    pub fn value(&self) -> f64 {
        self.divergence_form
    }
}

pub fn skew_combination(
    family: &Family,
    p: &CoordinatePair,
    q: &CoordinatePair,
    a: f64,
    b: f64,
    side: Chart,
) -> Result<SkewCombination> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("weights must be finite, got a={a}, b={b}")));
    }
    check_points(family, &[p, q])?;
    let r = combine(family, p, q, a, b, side)?;
    let ((dp, sp), (dq, sq)) = match side {
        Chart::Theta => (canonical_terms(p, &r), canonical_terms(q, &r)),
        Chart::Eta => (canonical_terms(&r, p), canonical_terms(&r, q)),
    };
    let divergence_form = a * dp + b * dq;
    let potential_form = match side {
        Chart::Theta => (a + b - 1.0) * r.phi() + a * p.psi() + b * q.psi() - r.psi(),
        Chart::Eta => (a + b - 1.0) * r.psi() + a * p.phi() + b * q.phi() - r.phi(),
    };
    if a >= 0.0 && b >= 0.0 {
        clamp_nonnegative(DivergenceKind::Combination, divergence_form, a.abs() * sp + b.abs() * sq)?;
    }
    Ok(SkewCombination { divergence_form, potential_form, midpoint: r })
}

/// Rényi divergence of order α between exponential-family members,
/// D_R^(α)(p_P‖p_Q) = 1/(α−1)·ln∫p_P^α p_Q^{1−α} = D_ψ^(1−α)(P‖Q) / (1−α).
pub fn renyi(
    family: &Family,
    p: &CoordinatePair,
    q: &CoordinatePair,
    alpha: f64,
) -> Result<DivergenceValue> {
    check_alpha(alpha)?;
    if !family.is_exponential() {
        return Err(Error::Unsupported(format!(
            "Rényi divergence via ψ needs an exponential family; {} is a mixture family",
            family.label()
        )));
    }
    let skew = psi_divergence(family, p, q, 1.0 - alpha)?;
    Ok(DivergenceValue {
        kind: DivergenceKind::Renyi,
        value: skew.value / (1.0 - alpha),
        alpha: Some(alpha),
        weights: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyKind, MixtureComponents, NaturalParams};

    fn gaussian() -> Family {
        Family::new(FamilyKind::Gaussian1d).unwrap()
    }

    fn normal(f: &Family, mu: f64, sigma: f64) -> CoordinatePair {
        f.point_from_params(&NaturalParams::Gaussian { mu, sigma }).unwrap()
    }

    fn coin(f: &Family, p: f64) -> CoordinatePair {
        f.point_from_params(&NaturalParams::Binomial { p }).unwrap()
    }

    fn selfdual(values: &[f64]) -> (Family, CoordinatePair) {
        let f = Family::new(FamilyKind::SelfDual { dimension: values.len() }).unwrap();
        let p = f.point_from_params(&NaturalParams::SelfDual { values: values.to_vec() }).unwrap();
        (f, p)
    }

    fn coin_mixture() -> Family {
        Family::new(FamilyKind::Mixture {
            components: MixtureComponents::new(vec![vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap(),
        })
        .unwrap()
    }

    #[test]
    fn canonical_examples() {
        let g = gaussian();
        let (p, q) = (normal(&g, 0.0, 1.0), normal(&g, 1.0, 2.0));
        let d = canonical(&g, &p, &q).unwrap().value;
        // ψ(P) + φ(Q) − θ(P)·η(Q) = 0.9189385 − 2.1120857 + 2.5
        assert!((d - 1.306_852_819_440_054_7).abs() < 1e-12);
        assert!((d - g.reference_kl(&q, &p).unwrap()).abs() < 1e-12);
        assert_eq!(canonical(&g, &p, &p).unwrap().value, 0.0);

        let (s, a) = selfdual(&[0.0, 0.0]);
        let (_, b) = selfdual(&[3.0, 4.0]);
        assert_eq!(canonical(&s, &a, &b).unwrap().value, 12.5);
    }

    #[test]
    fn affine_examples() {
        let g = gaussian();
        let (p, q) = (normal(&g, 0.0, 1.0), normal(&g, 1.0, 2.0));
        assert!((affine(&g, &p, &q).unwrap().value - 1.75).abs() < 1e-12);

        let b = Family::new(FamilyKind::Binomial { trials: 1 }).unwrap();
        let d = affine(&b, &coin(&b, 0.2), &coin(&b, 0.8)).unwrap().value;
        assert!((d - 0.6 * 16f64.ln()).abs() < 1e-12);

        let (s, a) = selfdual(&[0.0, 0.0]);
        let (_, c) = selfdual(&[3.0, 4.0]);
        assert_eq!(affine(&s, &a, &c).unwrap().value, 25.0);
    }

    #[test]
    fn dual_inner_product_examples() {
        let g = gaussian();
        let (p, q) = (normal(&g, 0.0, 1.0), normal(&g, 1.0, 2.0));
        let ip = dual_inner_product(&g, &q, &q, &p).unwrap();
        assert!((ip - affine(&g, &p, &q).unwrap().value).abs() < 1e-14);

        let (s, o) = selfdual(&[0.0, 0.0]);
        let (_, e1) = selfdual(&[1.0, 0.0]);
        let (_, e2) = selfdual(&[0.0, 1.0]);
        assert_eq!(dual_inner_product(&s, &e1, &e2, &o).unwrap(), 0.0);

        let (p, q, r) = (normal(&g, 0.0, 1.0), normal(&g, 1.0, 1.0), normal(&g, 0.0, 2.0));
        let lhs = affine(&g, &q, &p).unwrap().value + affine(&g, &p, &r).unwrap().value
            - 2.0 * dual_inner_product(&g, &q, &r, &p).unwrap();
        assert!((lhs - affine(&g, &q, &r).unwrap().value).abs() < 1e-10);
    }

    #[test]
    fn psi_divergence_examples() {
        let b = Family::new(FamilyKind::Binomial { trials: 1 }).unwrap();
        let (p, q) = (coin(&b, 0.2), coin(&b, 0.8));
        let d = psi_divergence(&b, &p, &q, 0.5).unwrap();
        assert!((d.value - 0.223_143_551_314_209_76).abs() < 1e-12);
        assert_eq!(d.alpha, Some(0.5));
        assert_eq!(psi_divergence(&b, &p, &p, 0.3).unwrap().value, 0.0);

        let (s, a) = selfdual(&[0.0]);
        let (_, c) = selfdual(&[2.0]);
        assert!((psi_divergence(&s, &a, &c, 0.5).unwrap().value - 0.5).abs() < 1e-15);
        assert!(matches!(psi_divergence(&s, &a, &c, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_divergence_equals_weighted_canonicals() {
        let g = gaussian();
        let (p, q) = (normal(&g, -1.0, 0.5), normal(&g, 2.0, 1.7));
        let alpha = 0.3;
        let r = combine(&g, &p, &q, 1.0 - alpha, alpha, Chart::Theta).unwrap();
        let weighted = (1.0 - alpha) * canonical(&g, &p, &r).unwrap().value
            + alpha * canonical(&g, &q, &r).unwrap().value;
        assert!((psi_divergence(&g, &p, &q, alpha).unwrap().value - weighted).abs() < 1e-12);
    }

    #[test]
    fn phi_divergence_examples() {
        let m = coin_mixture();
        let p = m.point_from_params(&NaturalParams::Mixture { weights: vec![0.0] }).unwrap();
        let q = m.point_from_params(&NaturalParams::Mixture { weights: vec![1.0] }).unwrap();
        let d = phi_divergence(&m, &p, &q, 0.5).unwrap().value;
        assert!((d - 0.101_749_225_079_196_69).abs() < 1e-12);
        assert_eq!(phi_divergence(&m, &p, &p, 0.5).unwrap().value, 0.0);

        let (s, a) = selfdual(&[0.0]);
        let (_, c) = selfdual(&[2.0]);
        assert!((phi_divergence(&s, &a, &c, 0.5).unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn skew_combination_examples() {
        let g = gaussian();
        let (p, q) = (normal(&g, 0.4, 0.8), normal(&g, -1.0, 2.0));
        let c = skew_combination(&g, &p, &q, 0.7, 0.3, Chart::Theta).unwrap();
        assert!((c.value() - psi_divergence(&g, &p, &q, 0.3).unwrap().value).abs() < 1e-12);

        let c = skew_combination(&g, &p, &q, 1.0, 0.0, Chart::Theta).unwrap();
        assert!(c.value().abs() < 1e-12);

        let (p, q) = (normal(&g, 0.0, 1.0), normal(&g, 0.0, 2.0));
        let c = skew_combination(&g, &p, &q, 1.0, 1.0, Chart::Theta).unwrap();
        assert!((c.divergence_form - c.potential_form).abs() < 1e-10);
        let c = skew_combination(&g, &p, &q, 0.6, 0.9, Chart::Eta).unwrap();
        assert!((c.divergence_form - c.potential_form).abs() < 1e-10);

        // θ(R) = 2θ(P) − θ(Q) has θ₁ = −1 + 0.125 < 0, still a valid normal
        assert!(skew_combination(&g, &p, &q, 2.0, -1.0, Chart::Theta).is_ok());
        // θ₁ = −1·(−0.5) + 0.5·(−0.125) > 0 leaves the domain
        assert!(matches!(
            skew_combination(&g, &p, &q, -1.0, 0.5, Chart::Theta),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn renyi_examples() {
        let b = Family::new(FamilyKind::Binomial { trials: 1 }).unwrap();
        let (p, q) = (coin(&b, 0.2), coin(&b, 0.8));
        let d = renyi(&b, &p, &q, 0.5).unwrap().value;
        assert!((d - 2.0 * 0.223_143_551_314_209_76).abs() < 1e-12);
        assert_eq!(renyi(&b, &p, &p, 0.2).unwrap().value, 0.0);
        let m = coin_mixture();
        let x = m.point_from_params(&NaturalParams::Mixture { weights: vec![0.2] }).unwrap();
        assert!(matches!(renyi(&m, &x, &x, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn renyi_matches_direct_order_alpha_sum() {
        let b = Family::new(FamilyKind::Binomial { trials: 4 }).unwrap();
        let (p, q) = (coin(&b, 0.3), coin(&b, 0.65));
        let (pp, qq) = (b.pmf(&p).unwrap(), b.pmf(&q).unwrap());
        for alpha in [0.1, 0.5, 0.8] {
            let s: f64 = pp.iter().zip(&qq).map(|(x, y)| x.powf(alpha) * y.powf(1.0 - alpha)).sum();
            let direct = s.ln() / (alpha - 1.0);
            assert!((renyi(&b, &p, &q, alpha).unwrap().value - direct).abs() < 1e-12);
        }
    }

    /// With the 1/α prefactor (instead of 1/(1−α)) the bound αD_J ≥ D_R fails
    /// for small α on nearby points.
    #[test]
    fn one_over_alpha_prefactor_breaks_the_jeffreys_bound() {
        let b = Family::new(FamilyKind::Binomial { trials: 1 }).unwrap();
        let (p, q) = (coin(&b, 0.5), coin(&b, 0.55));
        let alpha = 0.1;
        let jeffreys = affine(&b, &p, &q).unwrap().value;
        let skew = psi_divergence(&b, &p, &q, 1.0 - alpha).unwrap().value;
        assert!(alpha * jeffreys < skew / alpha);
        assert!(alpha * jeffreys >= renyi(&b, &p, &q, alpha).unwrap().value);
    }
}
