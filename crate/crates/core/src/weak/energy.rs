//! Multiplier coefficients `(a, b, c)` for `M u = a u + b u_x + c u_y` and a
//! discrete check of `(Mu, Lu) ≥ δ ‖u‖²` on compactly supported fields.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grid::{Domain, Grid2D, NodeKind};
use super::operator::{apply_l, gradient};
use super::quadrature::{CutQuadrature, Side};
use super::{check_kappa, type_change_range, WeakError};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_DELTA_TILDE: f64 = 0.05;
/// Allowed relative shortfall of the discrete ratio below `δ`.
pub const QUADRATURE_ALLOWANCE: f64 = 0.1;
const SAMPLES_PER_AXIS: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `κ ∈ [1, 2]`: exponential `b`.
    KappaHigh,
    /// `κ ∈ [0, 1)`: `b = ∓N(x - y²)`.
    KappaLow,
}

impl Regime {
    pub fn for_kappa(kappa: f64) -> Result<Self, WeakError> {
        check_kappa(kappa, 0.0, 2.0)?;
        Ok(if kappa >= 1.0 { Regime::KappaHigh } else { Regime::KappaLow })
    }
}

/// Values and first derivatives of the multiplier at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierValues {
    pub a: f64,
    pub b: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub c: f64,
    pub c_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierSpec {
    pub regime: Regime,
    pub kappa: f64,
    pub delta: f64,
    pub delta_tilde: f64,
    /// Only used by `KappaLow`.
    pub n: f64,
    /// `max(x - y²)` over the elliptic part, or 0.
    pub mu1: f64,
    /// `min(x - y²)` over the hyperbolic part, or 0.
    pub mu2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecReport {
    pub coercivity: f64,
    pub n_range: Option<(f64, f64)>,
    /// `b ≤ Q₁` on the elliptic part and `b > Q₂` on the hyperbolic part.
    pub b_bounds_hold: Option<bool>,
    pub valid: bool,
}

/// Admissible open interval for `N` in the low regime.
pub fn n_range(kappa: f64, delta_tilde: f64) -> (f64, f64) {
    ((1.0 + delta_tilde) / (3.0 - kappa), (1.0 - delta_tilde) / (kappa + 1.0))
}

impl MultiplierSpec {
    /// Defaults `δ = δ̃ = 0.05` and `N` at the midpoint of its interval.
    pub fn new(kappa: f64, domain: &Domain) -> Result<Self, WeakError> {
        Self::with_params(kappa, domain, DEFAULT_DELTA, DEFAULT_DELTA_TILDE, None)
    }

    pub fn with_params(kappa: f64, domain: &Domain, delta: f64, delta_tilde: f64, n: Option<f64>) -> Result<Self, WeakError> {
        let regime = Regime::for_kappa(kappa)?;
        if !(delta > 0.0 && delta.is_finite()) || !(delta_tilde > 0.0 && delta_tilde < 1.0) {
            return Err(WeakError::SpecInvalid(format!("delta {delta} and delta_tilde {delta_tilde} must be small and positive")));
        }
        let (lo, hi) = n_range(kappa, delta_tilde);
        let (kmin, kmax) = type_change_range(domain);
        Ok(MultiplierSpec {
            regime,
            kappa,
            delta,
            delta_tilde,
            n: n.unwrap_or(0.5 * (lo + hi)),
            mu1: kmax.max(0.0),
            mu2: kmin.min(0.0),
        })
    }

    pub fn q1(&self) -> f64 {
        (2.0 * self.delta * self.mu1).exp()
    }

    pub fn q2(&self) -> f64 {
        self.mu2.exp()
    }

    pub fn values(&self, x: f64, y: f64, side: Side) -> MultiplierValues {
        let k = x - y * y;
        match self.regime {
            Regime::KappaHigh => {
                let rate = match side {
                    Side::Elliptic => 2.0 * self.delta / self.q1(),
                    Side::Hyperbolic => 6.0 * self.delta / self.q2(),
                };
                let b = (rate * k).exp();
                let c_y = 2.0 * (2.0 * self.delta - 1.0);
                MultiplierValues { a: -1.0, b, b_x: rate * b, b_y: -2.0 * y * rate * b, c: c_y * y, c_y }
            }
            Regime::KappaLow => {
                let sign = match side {
                    Side::Elliptic => -1.0,
                    Side::Hyperbolic => 1.0,
                };
                let n = self.n;
                MultiplierValues { a: -1.0, b: sign * n * k, b_x: sign * n, b_y: -2.0 * y * sign * n, c: -4.0 * n * y, c_y: -4.0 * n }
            }
        }
    }

    /// Pointwise quadratic form `(α, β, γ)` with
    /// `(Mu, Lu) = ∫ α u_x² + 2β u_x u_y + γ u_y²` for fields vanishing near the boundary.
    pub fn identity_form(&self, x: f64, y: f64, side: Side) -> (f64, f64, f64) {
        let v = self.values(x, y, side);
        let k = x - y * y;
        let kappa = self.kappa;
        let alpha = (0.5 * v.c_y - v.a - 0.5 * v.b_x) * k + (kappa - 0.5) * v.b - v.c * y;
        let beta = 0.5 * (v.c * (kappa - 1.0) - v.b_y);
        let gamma = 0.5 * (v.b_x - v.c_y) - v.a;
        (alpha, beta, gamma)
    }

    /// Smallest eigenvalue of the form relative to `diag(|x - y²|, 1)` over
    /// cell centres of the bounding box inside the domain.
    pub fn coercivity(&self, domain: &Domain) -> f64 {
        let b = domain.bounds();
        let mut worst = f64::INFINITY;
        for j in 0..SAMPLES_PER_AXIS {
            for i in 0..SAMPLES_PER_AXIS {
                let x = b.x0 + (b.x1 - b.x0) * (i as f64 + 0.5) / SAMPLES_PER_AXIS as f64;
                let y = b.y0 + (b.y1 - b.y0) * (j as f64 + 0.5) / SAMPLES_PER_AXIS as f64;
                let k = x - y * y;
                if !domain.contains(x, y) || k.abs() < 1e-12 {
                    continue;
                }
                let side = if k > 0.0 { Side::Elliptic } else { Side::Hyperbolic };
                let (alpha, beta, gamma) = self.identity_form(x, y, side);
                let w = k.abs();
                let p = alpha / w;
                let q = beta / w.sqrt();
                let r = gamma;
                let mean = 0.5 * (p + r);
                let radius = (0.25 * (p - r) * (p - r) + q * q).sqrt();
                worst = worst.min(mean - radius);
            }
        }
        worst
    }

    pub fn report(&self, domain: &Domain) -> SpecReport {
        let coercivity = self.coercivity(domain);
        match self.regime {
            Regime::KappaHigh => {
                let (kmin, kmax) = type_change_range(domain);
                let (q1, q2) = (self.q1(), self.q2());
                let upper = self.values(kmax.max(0.0), 0.0, Side::Elliptic).b;
                let lower = self.values(kmin.min(0.0), 0.0, Side::Hyperbolic).b;
                SpecReport {
                    coercivity,
                    n_range: None,
                    b_bounds_hold: Some(upper <= q1 && lower > q2),
                    valid: coercivity >= self.delta,
                }
            }
            Regime::KappaLow => {
                let (lo, hi) = n_range(self.kappa, self.delta_tilde);
                let in_range = lo < self.n && self.n < hi;
                SpecReport { coercivity, n_range: Some((lo, hi)), b_bounds_hold: None, valid: in_range && coercivity >= self.delta }
            }
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<SpecReport, WeakError> {
        if let Regime::KappaLow = self.regime {
            let (lo, hi) = n_range(self.kappa, self.delta_tilde);
            if !(lo < self.n && self.n < hi) {
                return Err(WeakError::SpecInvalid(format!("N = {} outside ({lo}, {hi})", self.n)));
            }
        }
        let report = self.report(domain);
        if !report.valid {
            return Err(WeakError::SpecInvalid(format!(
                "sampled coercivity {} below delta {}",
                report.coercivity, self.delta
            )));
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `(Mu, Lu)`
    pub lhs: f64,
    /// `‖u‖²` in the weighted H¹₀ seminorm.
    pub rhs: f64,
    /// `None` when `rhs` vanishes.
    pub ratio: Option<f64>,
}

fn check_support(grid: &Grid2D, u: &[f64]) -> Result<(), WeakError> {
    if u.len() != grid.len() {
        return Err(WeakError::LengthMismatch { expected: grid.len(), got: u.len() });
    }
    let clean = (0..grid.len()).all(|k| grid.kind(k) == NodeKind::Interior || u[k] == 0.0);
    if clean {
        Ok(())
    } else {
        Err(WeakError::NotCompactlySupported)
    }
}

/// Discrete `(Mu, Lu)` against `∫ |x - y²| u_x² + u_y²` on the cut quadrature.
/// The multiplier is validated against `domain` first.
pub fn verify_energy_inequality(
    grid: &Grid2D,
    quad: &CutQuadrature,
    domain: &Domain,
    u: &[f64],
    spec: &MultiplierSpec,
) -> Result<EnergyReport, WeakError> {
    spec.validate(domain)?;
    energy_pairing(grid, quad, u, spec)
}

/// The pairing without validating the multiplier.
pub fn energy_pairing(grid: &Grid2D, quad: &CutQuadrature, u: &[f64], spec: &MultiplierSpec) -> Result<EnergyReport, WeakError> {
    check_support(grid, u)?;
    let lu = apply_l(grid, u, spec.kappa);
    let (ux, uy) = gradient(grid, u);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for p in &quad.points {
        let v = spec.values(p.x, p.y, p.side);
        let (s, gx, gy) = (p.interp(u), p.interp(&ux), p.interp(&uy));
        let mu = v.a * s + v.b * gx + v.c * gy;
        lhs += p.weight * mu * p.interp(&lu);
        rhs += p.weight * (p.type_change().abs() * gx * gx + gy * gy);
    }
    let ratio = if rhs > 0.0 { Some(lhs / rhs) } else { None };
    Ok(EnergyReport { lhs, rhs, ratio })
}

/// `∫ α u_x² + 2β u_x u_y + γ u_y²` with nodal gradients.
pub fn identity_integral(grid: &Grid2D, quad: &CutQuadrature, u: &[f64], spec: &MultiplierSpec) -> f64 {
    let (ux, uy) = gradient(grid, u);
    quad.integrate(|p| {
        let (alpha, beta, gamma) = spec.identity_form(p.x, p.y, p.side);
        let (gx, gy) = (p.interp(&ux), p.interp(&uy));
        alpha * gx * gx + 2.0 * beta * gx * gy + gamma * gy * gy
    })
}

/// `amplitude · (1 - ρ²)³` with `ρ = |p - centre| / radius`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let rho2 = ((x - self.cx).powi(2) + (y - self.cy).powi(2)) / (self.radius * self.radius);
        if rho2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - rho2).powi(3)
        }
    }
}

pub fn eval_bumps(bumps: &[Bump], x: f64, y: f64) -> f64 {
    bumps.iter().map(|b| b.eval(x, y)).sum()
}

/// One to three bumps kept at distance 0.05 from the edges of `[-1, 1]²`.
pub fn random_bumps<R: Rng>(rng: &mut R) -> Vec<Bump> {
    let count = rng.gen_range(1..=3);
    (0..count)
        .map(|_| {
            let radius = rng.gen_range(0.2..0.6);
            let reach = 0.95 - radius;
            let cx = rng.gen_range(-reach..reach);
            let cy = rng.gen_range(-reach..reach);
            let magnitude = rng.gen_range(0.5..1.5);
            let amplitude = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
            Bump { cx, cy, radius, amplitude }
        })
        .collect()
}

/// `count` bump combinations from a seeded ChaCha8 stream.
pub fn seeded_trials(seed: u64, count: usize) -> Vec<Vec<Bump>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_bumps(&mut rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certification {
    pub ratio_coarse: f64,
    pub ratio_fine: f64,
    /// `|fine - coarse| / 3`
    pub error_estimate: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Evaluates at two resolutions on `[-1, 1]²` and passes when the fine ratio
/// clears `δ(1 - allowance)` and the Richardson estimate stays within
/// `allowance · δ`.
pub struct EnergyCheck {
    pub spec: MultiplierSpec,
    domain: Domain,
    grids: [(Grid2D, CutQuadrature); 2],
}

impl EnergyCheck {
    pub const COARSE_NODES: usize = 81;
    pub const FINE_NODES: usize = 161;

    pub fn new(spec: MultiplierSpec) -> Result<Self, WeakError> {
        let domain = Domain::rectangle(-1.0, 1.0, -1.0, 1.0)?;
        spec.validate(&domain)?;
        let build = |n: usize| -> Result<(Grid2D, CutQuadrature), WeakError> {
            let g = Grid2D::new(&domain, n, n)?;
            let q = CutQuadrature::new(&g);
            Ok((g, q))
        };
        let grids = [build(Self::COARSE_NODES)?, build(Self::FINE_NODES)?];
        Ok(EnergyCheck { spec, domain, grids })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn certify(&self, bumps: &[Bump]) -> Result<Certification, WeakError> {
        let mut ratios = [0.0; 2];
        for (slot, (grid, quad)) in ratios.iter_mut().zip(&self.grids) {
            let u = grid.sample(|x, y| eval_bumps(bumps, x, y));
            let report = energy_pairing(grid, quad, &u, &self.spec)?;
            *slot = report.ratio.unwrap_or(f64::NAN);
        }
        let [ratio_coarse, ratio_fine] = ratios;
        let error_estimate = (ratio_fine - ratio_coarse).abs() / 3.0;
        let bound = self.spec.delta * (1.0 - QUADRATURE_ALLOWANCE);
        let pass = ratio_fine - error_estimate >= bound;
        Ok(Certification { ratio_coarse, ratio_fine, error_estimate, bound, pass })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Domain {
        Domain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_field_has_no_ratio() {
        let d = square();
        let g = Grid2D::new(&d, 21, 21).unwrap();
        let q = CutQuadrature::new(&g);
        let spec = MultiplierSpec::new(1.0, &d).unwrap();
        let r = verify_energy_inequality(&g, &q, &d, &vec![0.0; g.len()], &spec).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio), (0.0, 0.0, None));
    }

    #[test]
    fn polynomial_bump_examples() {
        let d = square();
        for (kappa, bound) in [(1.0, 0.045), (0.5, 0.0)] {
            let spec = MultiplierSpec::new(kappa, &d).unwrap();
            let mut ratios = Vec::new();
            for n in [41, 81] {
                let g = Grid2D::new(&d, n, n).unwrap();
                let q = CutQuadrature::new(&g);
                let u = g.sample(|x, y| (1.0 - x * x).powi(2) * (1.0 - y * y).powi(2));
                let u: Vec<f64> = (0..g.len()).map(|k| if g.kind(k) == NodeKind::Interior { u[k] } else { 0.0 }).collect();
                ratios.push(verify_energy_inequality(&g, &q, &d, &u, &spec).unwrap().ratio.unwrap());
            }
            assert!(ratios[1] > bound, "kappa {kappa}: {ratios:?}");
            assert!((ratios[1] - ratios[0]).abs() / 3.0 < 0.005, "kappa {kappa}: {ratios:?}");
        }
    }

    #[test]
    fn invalid_specs() {
        let d = square();
        let mut spec = MultiplierSpec::new(0.5, &d).unwrap();
        spec.n = 2.0;
        assert!(matches!(spec.validate(&d), Err(WeakError::SpecInvalid(_))));
        let big = MultiplierSpec::with_params(1.0, &d, 5.0, 0.05, None).unwrap();
        assert!(matches!(big.validate(&d), Err(WeakError::SpecInvalid(_))));
        assert!(MultiplierSpec::new(3.0, &d).is_err());
    }

    #[test]
    fn bumps_vanish_near_the_edge() {
        for bumps in seeded_trials(7, 50) {
            for t in [-1.0, -0.96, 0.96, 1.0] {
                for s in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                    assert_eq!(eval_bumps(&bumps, t, s), 0.0);
                    assert_eq!(eval_bumps(&bumps, s, t), 0.0);
                }
            }
        }
    }
}
