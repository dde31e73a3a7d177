//! Sonic-point classification, characteristics of
//! `(x - y²) u_xx + u_yy`, and the principal symbols of the curl-curl and
//! Coulomb-gauge operators.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fields::Field2D;
use crate::format::sci;
use crate::plasma::DielectricTensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("start ({x}, {y}) is not strictly hyperbolic (y² - x = {gap:e})")]
    StartNotHyperbolic { x: f64, y: f64, gap: f64 },
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
}

/// A function whose zero set is the sonic line, with its gradient.
#[derive(Clone, Copy)]
pub struct TypeChangeField {
    pub value: fn(f64, f64) -> f64,
    pub gradient: fn(f64, f64) -> (f64, f64),
}

impl TypeChangeField {
    /// `x - y²`.
    pub fn canonical() -> Self {
        TypeChangeField { value: |x, y| x - y * y, gradient: |_, y| (1.0, -2.0 * y) }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.value)(x, y)
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        (self.gradient)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SonicPointClass {
    TricomiPoint,
    KeldyshPoint,
    NotOnSonic,
}

impl SonicPointClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SonicPointClass::TricomiPoint => "tricomi_point",
            SonicPointClass::KeldyshPoint => "keldysh_point",
            SonicPointClass::NotOnSonic => "not_on_sonic",
        }
    }
}

pub fn canonical_case_classify(xi: &dyn Field2D, x: f64, z: f64) -> SonicPointClass {
    let v = xi.value(x, z).re;
    let dz = xi.dz(x, z).re;
    let dx = xi.dx(x, z).re;
    let tol = 1e-10 * (1.0 + dx.hypot(dz));
    if v.abs() > tol {
        SonicPointClass::NotOnSonic
    } else if dz.abs() <= tol {
        SonicPointClass::KeldyshPoint
    } else {
        SonicPointClass::TricomiPoint
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CharacteristicDirections {
    /// Elliptic point.
    None,
    /// Sonic point: the two directions merge into `dx = 0`.
    Degenerate([f64; 2]),
    /// Unit vectors for `dx/dy = +√(y² - x)` and `-√(y² - x)`.
    Two([f64; 2], [f64; 2]),
}

impl CharacteristicDirections {
    pub fn count(&self) -> usize {
        match self {
            CharacteristicDirections::None => 0,
            CharacteristicDirections::Degenerate(_) => 1,
            CharacteristicDirections::Two(..) => 2,
        }
    }
}

pub const SONIC_TOL: f64 = 1e-12;

pub fn characteristic_directions(x: f64, y: f64) -> CharacteristicDirections {
    let gap = y * y - x;
    if gap.abs() <= SONIC_TOL * (1.0 + x.abs()) {
        CharacteristicDirections::Degenerate([0.0, 1.0])
    } else if gap < 0.0 {
        CharacteristicDirections::None
    } else {
        let slope = gap.sqrt();
        let norm = slope.hypot(1.0);
        CharacteristicDirections::Two([slope / norm, 1.0 / norm], [-slope / norm, 1.0 / norm])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

/// Whether `|y|` decreases or increases along the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDirection {
    Inward,
    Outward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedSonic,
    ReachedBoundary,
    ReachedOriginBall,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub step: f64,
    pub direction: TraceDirection,
    pub max_steps: usize,
    /// `(x0, x1, y0, y1)`; leaving it ends the trace.
    pub bounds: (f64, f64, f64, f64),
}

impl TraceOptions {
    pub fn new(step: f64, direction: TraceDirection) -> Self {
        TraceOptions { step, direction, max_steps: 10_000_000, bounds: (-10.0, 10.0, -10.0, 10.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    pub points: Vec<(f64, f64)>,
    pub branch: Branch,
    pub termination: Termination,
}

impl CharacteristicPath {
    /// Largest `x - y²` along the path.
    pub fn max_type_change(&self) -> f64 {
        self.points.iter().map(|&(x, y)| x - y * y).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn slope(sign: f64, x: f64, y: f64) -> f64 {
    sign * (y * y - x).max(0.0).sqrt()
}

fn rk4_step(sign: f64, x: f64, y: f64, dy: f64) -> f64 {
    let k1 = slope(sign, x, y);
    let k2 = slope(sign, x + 0.5 * dy * k1, y + 0.5 * dy);
    let k3 = slope(sign, x + 0.5 * dy * k2, y + 0.5 * dy);
    let k4 = slope(sign, x + dy * k3, y + dy);
    x + dy / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates `dx/dy = ±√(y² - x)` in `y`, shrinking the step where a full
/// step would cross the sonic line.
pub fn trace_characteristic(start: (f64, f64), branch: Branch, opts: &TraceOptions) -> Result<CharacteristicPath, GeometryError> {
    let h = opts.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidStep(h));
    }
    let (mut x, mut y) = start;
    let gap = y * y - x;
    if !(gap > 0.0) {
        return Err(GeometryError::StartNotHyperbolic { x, y, gap });
    }
    let toward = match opts.direction {
        TraceDirection::Inward => -1.0,
        TraceDirection::Outward => 1.0,
    };
    let dy_sign = if y == 0.0 { toward } else { toward * y.signum() };
    let sign = branch.sign();
    let (bx0, bx1, by0, by1) = opts.bounds;
    let min_step = h * f64::powi(2.0, -30);

    let mut points = vec![(x, y)];
    let mut termination = Termination::StepLimit;
    for _ in 0..opts.max_steps {
        if x.hypot(y) < 10.0 * h {
            termination = Termination::ReachedOriginBall;
            break;
        }
        if y * y - x < h * h && points.len() > 1 {
            termination = Termination::ReachedSonic;
            break;
        }
        let mut dy = dy_sign * h;
        let mut next = rk4_step(sign, x, y, dy);
        while (y + dy) * (y + dy) - next < 0.0 && dy.abs() > min_step {
            dy *= 0.5;
            next = rk4_step(sign, x, y, dy);
        }
        if (y + dy) * (y + dy) - next < 0.0 {
            termination = Termination::ReachedSonic;
            break;
        }
        x = next;
        y += dy;
        if x < bx0 || x > bx1 || y < by0 || y > by1 {
            termination = Termination::ReachedBoundary;
            break;
        }
        points.push((x, y));
    }
    Ok(CharacteristicPath { points, branch, termination })
}

/// `4λ² + λ - 1 = 0` from substituting `x = λ y²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginCharacteristics {
    pub coefficients: [f64; 3],
    pub discriminant: f64,
    /// Positive root first.
    pub roots: [f64; 2],
    pub count: usize,
}

pub fn origin_characteristics() -> OriginCharacteristics {
    let (a, b, c) = (4.0, 1.0, -1.0);
    let discriminant: f64 = b * b - 4.0 * a * c;
    let q = -0.5 * (b + discriminant.sqrt());
    let negative = q / a;
    let positive = c / q;
    // each root gives one curve for y > 0 and one for y < 0
    OriginCharacteristics { coefficients: [a, b, c], discriminant, roots: [positive, negative], count: 4 }
}

/// Least-squares `λ` in `x = λ y²`.
pub fn fit_parabola(points: &[(f64, f64)]) -> f64 {
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(x, y)| {
        let y2 = y * y;
        (n + x * y2, d + y2 * y2)
    });
    num / den
}

/// The branch on which `x = λ y²` is a characteristic for `y > 0`.
pub fn parabola_branch(lambda: f64) -> Branch {
    if lambda >= 0.0 {
        Branch::Plus
    } else {
        Branch::Minus
    }
}

/// A characteristic through the origin recovered numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginFit {
    pub lambda: f64,
    pub fitted: f64,
    pub error: f64,
    pub path: CharacteristicPath,
}

const FIT_OFFSET: f64 = 0.1;
const FIT_WINDOW: (f64, f64) = (0.5, 1.0);

/// Starts just outside the origin ball on `x = (1 + 0.1) λ y²`, traces
/// outward to `y = 1` and fits `x = λ y²` on `y ∈ [0.5, 1]`. Neighbouring
/// characteristics converge onto the parabola in this direction.
pub fn fit_origin_characteristic(lambda: f64, step: f64) -> Result<OriginFit, GeometryError> {
    if !(step > 0.0 && 11.0 * step < FIT_WINDOW.0) {
        return Err(GeometryError::InvalidStep(step));
    }
    let y0 = 11.0 * step;
    let start = ((1.0 + FIT_OFFSET) * lambda * y0 * y0, y0);
    let mut opts = TraceOptions::new(step, TraceDirection::Outward);
    opts.bounds = (-10.0, 10.0, -10.0, FIT_WINDOW.1 + 0.5 * step);
    let path = trace_characteristic(start, parabola_branch(lambda), &opts)?;
    let tail: Vec<(f64, f64)> = path.points.iter().copied().filter(|p| p.1 >= FIT_WINDOW.0).collect();
    let fitted = fit_parabola(&tail);
    Ok(OriginFit { lambda, fitted, error: (fitted - lambda).abs(), path })
}

pub const CHARACTERISTIC_HEADER: &str = "branch,step,x,y";

pub fn write_characteristics_csv<W: Write>(paths: &[CharacteristicPath], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CHARACTERISTIC_HEADER}")?;
    for path in paths {
        for (k, (x, y)) in path.points.iter().enumerate() {
            writeln!(out, "{},{},{},{}", path.branch.as_str(), k, sci(*x), sci(*y))?;
        }
    }
    Ok(())
}

pub type Matrix3 = [[f64; 3]; 3];

pub fn det3(m: &Matrix3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Symbol `k kᵀ - |k|² I` of curl curl, and its determinant.
pub fn curl_curl_symbol(k: [f64; 3]) -> (Matrix3, f64) {
    let [k1, k2, k3] = k;
    let m = [
        [-(k2 * k2 + k3 * k3), k1 * k2, k1 * k3],
        [k2 * k1, -(k1 * k1 + k3 * k3), k2 * k3],
        [k3 * k1, k3 * k2, -(k1 * k1 + k2 * k2)],
    ];
    let det = det3(&m);
    (m, det)
}

/// `-|k|⁴ (K k)·k`, homogeneous of degree six in `k`.
pub fn coulomb_gauge_symbol(tensor: &DielectricTensor, k: [f64; 3]) -> Complex64 {
    let kc = k.map(|v| Complex64::new(v, 0.0));
    let kk = tensor.apply(&kc);
    let quad: Complex64 = kk.iter().zip(&k).map(|(a, b)| a * b).sum();
    let k2 = k.iter().map(|v| v * v).sum::<f64>();
    -(k2 * k2) * quad
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolReport {
    pub k: [f64; 3],
    pub det: f64,
    pub sigma: f64,
    pub pass: bool,
}

/// Curl-curl degeneracy check plus the Coulomb-gauge symbol at `k`.
pub fn symbol_check(tensor: &DielectricTensor, k: [f64; 3]) -> SymbolReport {
    let (_, det) = curl_curl_symbol(k);
    let norm2 = k.iter().map(|v| v * v).sum::<f64>();
    let bound = 1e-12 * norm2.powi(3).max(1.0);
    SymbolReport { k, det, sigma: coulomb_gauge_symbol(tensor, k).re, pass: det.abs() <= bound }
}
