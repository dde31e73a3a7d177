//! Weighted norms, the degenerate model operator, multiplier energy checks
//! and least-squares solvers for the closed Dirichlet and mixed problems.

pub mod dirichlet;
pub mod energy;
pub mod grid;
pub mod mixed;
pub mod operator;
pub mod problem;
pub mod quadrature;

pub use dirichlet::{illposedness_diagnostic, solve_closed_dirichlet, DiscreteSolution, IllposednessPoint};
pub use energy::{verify_energy_inequality, EnergyReport, MultiplierSpec, Regime};
pub use grid::{BoundarySegment, Domain, Grid2D, NodeKind, Rect};
pub use mixed::{boundary_admissible, solve_mixed, MixedMultiplierSpec, MixedSolution};
pub use operator::{apply_l, apply_l_adjoint};
pub use quadrature::{weighted_norms, weighted_norms_excluding, CutQuadrature, WeightedNorms};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeakError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dual norm singular: support meets the sonic curve on cells of area {measure}")]
    DualNormSingular { measure: f64 },
    #[error("multiplier spec invalid: {0}")]
    SpecInvalid(String),
    #[error("field does not vanish on the boundary")]
    NotCompactlySupported,
    #[error("factorization failed (condition estimate {condition})")]
    FactorizationFailure { condition: f64 },
    #[error("inadmissible boundary: {0}")]
    InadmissibleBoundary(String),
    #[error("need at least 3 refinement levels, got {got}")]
    InsufficientLevels { got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown boundary segment {0}")]
    UnknownSegment(usize),
    #[error("kappa {kappa} outside [{lo}, {hi}]")]
    InvalidKappa { kappa: f64, lo: f64, hi: f64 },
}

pub(crate) fn check_kappa(kappa: f64, lo: f64, hi: f64) -> Result<(), WeakError> {
    if kappa.is_finite() && (lo..=hi).contains(&kappa) {
        Ok(())
    } else {
        Err(WeakError::InvalidKappa { kappa, lo, hi })
    }
}

/// Extremes of `x - y²` over the domain as (min, max).
pub(crate) fn type_change_range(domain: &Domain) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in &domain.rects {
        let ymin2 = if r.y0 <= 0.0 && r.y1 >= 0.0 { 0.0 } else { (r.y0 * r.y0).min(r.y1 * r.y1) };
        let ymax2 = (r.y0 * r.y0).max(r.y1 * r.y1);
        hi = hi.max(r.x1 - ymin2);
        lo = lo.min(r.x0 - ymax2);
    }
    (lo, hi)
}
