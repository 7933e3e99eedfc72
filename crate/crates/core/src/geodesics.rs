//! θ- and η-geodesics (straight lines in one affine chart) and the integral
//! representations of the divergences along them.
//!
//! For a θ-geodesic θ(t) = θ(P) + a·t:
//!
//! ```text
//! D_A(P, Q(T)) = T ∫₀ᵀ aᵀ g(t) a dt        D(P‖Q(T)) = ∫₀ᵀ t · aᵀ g(t) a dt
//! ```
//!
//! and for an η-geodesic the same with g replaced by its inverse, except that
//! the canonical form becomes ∫₀ᵀ (T − t) · aᵀ g⁻¹(t) a dt (the double
//! integral reduced by swapping the order of integration).
//!
//! Integrals use a composite 64-node Gauss-Legendre rule on [0, T]. The
//! panel count doubles from one until two successive estimates agree to
//! 1e-12 relative; near the edge of the η-domain the Gaussian integrand has a
//! pole just outside [0, T] that a single panel resolves only to ~1e-5.

use std::cell::RefCell;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;

use crate::divergences::{affine, canonical};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::manifold::{Chart, CoordinatePair};

pub const QUADRATURE_NODES: usize = 64;
/// Relative agreement between successive composite estimates.
pub const PANEL_TOL: f64 = 1e-12;
pub const MAX_PANELS: usize = 256;
/// Grid on which a geodesic's domain validity is certified.
pub const CERTIFICATION_POINTS: usize = 65;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).unwrap()))
}

/// A chart-affine line x(t) = x(P) + t·a for t ∈ [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSpec {
    base: CoordinatePair,
    direction: Vec<f64>,
    chart: Chart,
    t_max: f64,
}

impl GeodesicSpec {
    /// Validates the direction and certifies every grid point in the domain.
    /// Domains of the built-in families are convex in their own chart, so a
    /// certified grid means a valid segment.
    pub fn new(
        family: &Family,
        base: CoordinatePair,
        direction: Vec<f64>,
        chart: Chart,
        t_max: f64,
    ) -> Result<Self> {
        let n = family.dimension();
        if direction.len() != n {
            return Err(Error::Dimension { expected: n, got: direction.len() });
        }
        if !t_max.is_finite() || direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("geodesic direction and T must be finite".into()));
        }
        let spec = Self { base, direction, chart, t_max };
        for k in 0..CERTIFICATION_POINTS {
            let t = t_max * k as f64 / (CERTIFICATION_POINTS - 1) as f64;
            let coords = spec.coords_at(t);
            let inside = match chart {
                Chart::Theta => family.contains_theta(&coords),
                Chart::Eta => family.contains_eta(&coords),
            };
            if !inside {
                return Err(Error::Domain(format!(
                    "geodesic leaves the {}-domain at t = {t}",
                    chart.name()
                )));
            }
        }
        Ok(spec)
    }

    /// The segment from P to R: direction x(R) − x(P), T = 1.
    pub fn through(family: &Family, p: &CoordinatePair, r: &CoordinatePair, chart: Chart) -> Result<Self> {
        let direction = r.coords(chart).iter().zip(p.coords(chart)).map(|(b, a)| b - a).collect();
        Self::new(family, p.clone(), direction, chart, 1.0)
    }

    pub fn base(&self) -> &CoordinatePair {
        &self.base
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    fn coords_at(&self, t: f64) -> Vec<f64> {
        self.base
            .coords(self.chart)
            .iter()
            .zip(&self.direction)
            .map(|(x, a)| x + a * t)
            .collect()
    }

    pub fn point_at(&self, family: &Family, t: f64) -> Result<CoordinatePair> {
        if t == 0.0 || self.direction.iter().all(|a| *a == 0.0) {
            return Ok(self.base.clone());
        }
        family.point(self.chart, self.coords_at(t))
    }

    /// aᵀ G(t) a with G the metric in this geodesic's chart.
    fn speed_squared(&self, family: &Family, t: f64) -> Result<f64> {
        let point = self.point_at(family, t)?;
        Ok(family.metric(&point, self.chart)?.quadratic_form(&self.direction))
    }
}

fn integrate<F>(t_max: f64, integrand: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = RefCell::new(None);
    let composite = |panels: usize| -> f64 {
        let h = t_max / panels as f64;
        (0..panels)
            .map(|k| {
                let hi = if k + 1 == panels { t_max } else { (k + 1) as f64 * h };
                rule().integrate(k as f64 * h, hi, |t| match integrand(t) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                })
            })
            .sum()
    };
    let mut panels = 1;
    let mut previous = composite(panels);
    loop {
        panels *= 2;
        let current = composite(panels);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(Error::Quadrature(e.to_string()));
        }
        if (current - previous).abs() <= PANEL_TOL * current.abs() {
            return Ok(current);
        }
        if panels >= MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "composite estimates still differ by {:e} with {panels} panels",
                (current - previous).abs()
            )));
        }
        previous = current;
    }
}

/// Point with chart coordinates (1−t)·x(P) + t·x(R).
pub fn interpolate(
    family: &Family,
    p: &CoordinatePair,
    r: &CoordinatePair,
    t: f64,
    chart: Chart,
) -> Result<CoordinatePair> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("interpolation parameter {t}")));
    }
    let coords = p
        .coords(chart)
        .iter()
        .zip(r.coords(chart))
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    family.point(chart, coords)
}

/// T ∫₀ᵀ aᵀ G(t) a dt: the affine divergence D_A(P, Q(T)).
pub fn affine_via_metric_integral(family: &Family, spec: &GeodesicSpec) -> Result<f64> {
    if spec.t_max == 0.0 {
        return Ok(0.0);
    }
    Ok(spec.t_max * integrate(spec.t_max, |t| spec.speed_squared(family, t))?)
}

/// The canonical divergence D(P‖Q(T)) by its weighted metric integral:
/// ∫₀ᵀ t·aᵀg a dt on θ-geodesics, ∫₀ᵀ (T−t)·aᵀg⁻¹a dt on η-geodesics.
pub fn canonical_via_weighted_integral(family: &Family, spec: &GeodesicSpec) -> Result<f64> {
    if spec.t_max == 0.0 {
        return Ok(0.0);
    }
    let t_max = spec.t_max;
    integrate(t_max, |t| {
        let weight = match spec.chart {
            Chart::Theta => t,
            Chart::Eta => t_max - t,
        };
        Ok(weight * spec.speed_squared(family, t)?)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub t: f64,
    pub point: CoordinatePair,
    /// D(P‖Q(t))
    pub canonical: f64,
    /// D_A(P, Q(t))
    pub affine: f64,
}

/// Both divergences from P sampled along a geodesic segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicProfile {
    pub chart: Chart,
    pub rows: Vec<ProfileRow>,
}

/// Profile rows on a uniform grid of `grid_size` points in t ∈ [0, 1], with
/// no monotonicity check.
pub(crate) fn profile_rows(
    family: &Family,
    p: &CoordinatePair,
    r: &CoordinatePair,
    chart: Chart,
    grid_size: usize,
) -> Result<Vec<ProfileRow>> {
    if grid_size < 2 {
        return Err(Error::Domain(format!("profile grid needs at least 2 points, got {grid_size}")));
    }
    let spec = GeodesicSpec::through(family, p, r, chart)?;
    (0..grid_size)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 / (grid_size - 1) as f64;
            let point = if k + 1 == grid_size { r.clone() } else { spec.point_at(family, t)? };
            Ok(ProfileRow {
                t,
                canonical: canonical(family, p, &point)?.value,
                affine: affine(family, p, &point)?.value,
                point,
            })
        })
        .collect()
}

/// Smallest step-to-step increment of either column, scaled by
/// 1 + |previous value|. Negative means the profile decreased.
pub(crate) fn min_relative_increment(rows: &[ProfileRow]) -> f64 {
    rows.windows(2)
        .flat_map(|w| {
            [
                (w[1].canonical - w[0].canonical) / (1.0 + w[0].canonical.abs()),
                (w[1].affine - w[0].affine) / (1.0 + w[0].affine.abs()),
            ]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Profile on a uniform grid of `grid_size` points in t ∈ [0, 1] along the
/// chart geodesic from P to R. Fails if either column decreases.
pub fn divergence_profile(
    family: &Family,
    p: &CoordinatePair,
    r: &CoordinatePair,
    chart: Chart,
    grid_size: usize,
) -> Result<GeodesicProfile> {
    let rows = profile_rows(family, p, r, chart, grid_size)?;
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for (name, lo, hi) in [("canonical", a.canonical, b.canonical), ("affine", a.affine, b.affine)] {
            if hi < lo - 1e-12 * (1.0 + lo.abs()) {
                return Err(Error::Numerical(format!(
                    "{name} divergence decreases from {lo} to {hi} between t = {} and t = {}",
                    a.t, b.t
                )));
            }
        }
    }
    Ok(GeodesicProfile { chart, rows })
}
