//! Dually flat statistical manifolds.
//!
//! A dually flat family carries two affine charts, θ and η, linked by the
//! Legendre-dual potentials ψ(θ) and φ(η):
//!
//! ```text
//! φ(η) = θ·η − ψ(θ),   η = ∇ψ(θ),   θ = ∇φ(η),   g = ∇²ψ = (∇²φ)⁻¹
//! ```
//!
//! On top of these the crate provides the canonical divergence, the
//! symmetric affine divergence (η(Q)−η(P))·(θ(Q)−θ(P)), skew ψ/φ Jensen
//! divergences, geodesic integral forms, and a randomized residual harness
//! ([`identities`]) that checks the dual-geometry identities numerically on
//! concrete families.

pub mod error;
pub mod divergences;
pub mod families;
pub mod geodesics;
pub mod identities;
pub mod manifold;

pub use error::{Error, Result};
pub use families::{ConjugateMode, Family, FamilyKind, MixtureComponents, NaturalParams, Outcome};
pub use manifold::{Chart, CoordinatePair, EtaCoord, MetricMatrix, ThetaCoord};
