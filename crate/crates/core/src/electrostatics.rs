//! Electrostatic-wave coefficients: the plane-layered equation, the 2D PDE
//! coefficients and type, sonic conditions, tangency points on the sonic
//! line, and the scaled local model.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{central_dx, central_dz, Constant, Field2D, FieldError, FieldSpec, DIFFERENCE_STEP};
use crate::format::sci;
use crate::plasma::DielectricTensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElectrostaticsError {
    #[error("K11 vanishes near x = {at:e}")]
    SingularCoefficient { at: f64 },
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("integration did not converge after {steps} steps (relative change {change:e})")]
    NoConvergence { steps: usize, change: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Tensor entries as fields over `(x, z)`; `K22` does not enter.
pub struct TensorField2D {
    pub k11: Box<dyn Field2D>,
    pub k12: Box<dyn Field2D>,
    pub k13: Box<dyn Field2D>,
    pub k21: Box<dyn Field2D>,
    pub k23: Box<dyn Field2D>,
    pub k31: Box<dyn Field2D>,
    pub k32: Box<dyn Field2D>,
    pub k33: Box<dyn Field2D>,
}

impl TensorField2D {
    pub fn zero() -> Self {
        let z = || Box::new(Constant::zero()) as Box<dyn Field2D>;
        TensorField2D { k11: z(), k12: z(), k13: z(), k21: z(), k23: z(), k31: z(), k32: z(), k33: z() }
    }

    /// Spatially uniform tensor.
    pub fn uniform(k: &DielectricTensor) -> Self {
        let c = |i: usize, j: usize| Box::new(Constant(k.get(i, j))) as Box<dyn Field2D>;
        TensorField2D { k11: c(0, 0), k12: c(0, 1), k13: c(0, 2), k21: c(1, 0), k23: c(1, 2), k31: c(2, 0), k32: c(2, 1), k33: c(2, 2) }
    }

    pub fn with_k11(mut self, f: impl Field2D + 'static) -> Self {
        self.k11 = Box::new(f);
        self
    }

    pub fn with_k33(mut self, f: impl Field2D + 'static) -> Self {
        self.k33 = Box::new(f);
        self
    }
}

/// JSON form of a tensor field; omitted entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    #[serde(rename = "K11", default, skip_serializing_if = "Option::is_none")]
    pub k11: Option<FieldSpec>,
    #[serde(rename = "K12", default, skip_serializing_if = "Option::is_none")]
    pub k12: Option<FieldSpec>,
    #[serde(rename = "K13", default, skip_serializing_if = "Option::is_none")]
    pub k13: Option<FieldSpec>,
    #[serde(rename = "K21", default, skip_serializing_if = "Option::is_none")]
    pub k21: Option<FieldSpec>,
    #[serde(rename = "K23", default, skip_serializing_if = "Option::is_none")]
    pub k23: Option<FieldSpec>,
    #[serde(rename = "K31", default, skip_serializing_if = "Option::is_none")]
    pub k31: Option<FieldSpec>,
    #[serde(rename = "K32", default, skip_serializing_if = "Option::is_none")]
    pub k32: Option<FieldSpec>,
    #[serde(rename = "K33", default, skip_serializing_if = "Option::is_none")]
    pub k33: Option<FieldSpec>,
}

impl TensorSpec {
    pub fn build(&self) -> Result<TensorField2D, FieldError> {
        let entry = |spec: &Option<FieldSpec>| -> Result<Box<dyn Field2D>, FieldError> {
            match spec {
                Some(s) => s.build(),
                None => Ok(Box::new(Constant::zero())),
            }
        };
        Ok(TensorField2D {
            k11: entry(&self.k11)?,
            k12: entry(&self.k12)?,
            k13: entry(&self.k13)?,
            k21: entry(&self.k21)?,
            k23: entry(&self.k23)?,
            k31: entry(&self.k31)?,
            k32: entry(&self.k32)?,
            k33: entry(&self.k33)?,
        })
    }
}

/// `σ0 = k3 (K13 + K31) + k2 (K12 + K21)` at `(x, 0)`.
pub fn layered_sigma0(k2: f64, k3: f64, tensor: &TensorField2D, x: f64) -> Complex64 {
    k3 * (tensor.k13.value(x, 0.0) + tensor.k31.value(x, 0.0)) + k2 * (tensor.k12.value(x, 0.0) + tensor.k21.value(x, 0.0))
}

/// `K11 ψ' + (K11' + i σ0) ψ = 0` on an interval where `K11` keeps its sign.
pub struct LayeredProblem {
    pub k11: Box<dyn Field2D>,
    pub sigma0: f64,
    pub x_range: (f64, f64),
}

const SIGN_SAMPLES: usize = 1024;

fn nonvanishing(k11: &dyn Field2D, a: f64, b: f64) -> Result<(), ElectrostaticsError> {
    let scale = (0..=SIGN_SAMPLES)
        .map(|i| k11.value(a + (b - a) * i as f64 / SIGN_SAMPLES as f64, 0.0).re.abs())
        .fold(0.0, f64::max);
    let mut prev: Option<f64> = None;
    for i in 0..=SIGN_SAMPLES {
        let x = a + (b - a) * i as f64 / SIGN_SAMPLES as f64;
        let v = k11.value(x, 0.0).re;
        if v.abs() <= 1e-12 * scale || !v.is_finite() || prev.is_some_and(|p| p * v < 0.0) {
            return Err(ElectrostaticsError::SingularCoefficient { at: x });
        }
        prev = Some(v);
    }
    Ok(())
}

impl LayeredProblem {
    pub fn new(k11: Box<dyn Field2D>, sigma0: f64, x_range: (f64, f64)) -> Result<Self, ElectrostaticsError> {
        let (a, b) = x_range;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(ElectrostaticsError::InvalidInterval(a, b));
        }
        nonvanishing(k11.as_ref(), a, b)?;
        Ok(LayeredProblem { k11, sigma0, x_range })
    }

    fn rhs(&self, x: f64, psi: Complex64) -> Complex64 {
        let k = self.k11.value(x, 0.0).re;
        let dk = self.k11.dx(x, 0.0).re;
        -(Complex64::new(dk, self.sigma0) / k) * psi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSolution {
    pub xs: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub steps: usize,
}

fn rk4(problem: &LayeredProblem, psi0: Complex64, x0: f64, x1: f64, steps: usize) -> (Vec<f64>, Vec<Complex64>) {
    let h = (x1 - x0) / steps as f64;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut y = psi0;
    xs.push(x0);
    ys.push(y);
    for k in 0..steps {
        let x = x0 + k as f64 * h;
        let k1 = problem.rhs(x, y);
        let k2 = problem.rhs(x + 0.5 * h, y + 0.5 * h * k1);
        let k3 = problem.rhs(x + 0.5 * h, y + 0.5 * h * k2);
        let k4 = problem.rhs(x + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        xs.push(if k + 1 == steps { x1 } else { x + h });
        ys.push(y);
    }
    (xs, ys)
}

pub const LAYERED_TOL: f64 = 1e-9;
const MAX_STEPS: usize = 1 << 20;

/// Fixed-step RK4 with the step halved until the solution changes by less
/// than `LAYERED_TOL` relative at every shared node.
pub fn integrate_layered(problem: &LayeredProblem, psi0: Complex64, x0: f64, x1: f64) -> Result<LayeredSolution, ElectrostaticsError> {
    if !(x0.is_finite() && x1.is_finite()) || x0 == x1 {
        return Err(ElectrostaticsError::InvalidInterval(x0, x1));
    }
    let (lo, hi) = (x0.min(x1), x0.max(x1));
    nonvanishing(problem.k11.as_ref(), lo, hi)?;
    if psi0 == Complex64::new(0.0, 0.0) {
        return Ok(LayeredSolution { xs: vec![x0, x1], psi: vec![psi0, psi0], steps: 1 });
    }

    let mut steps = 32;
    let (_, mut ys) = rk4(problem, psi0, x0, x1, steps);
    let mut change = f64::INFINITY;
    while steps < MAX_STEPS {
        let (fx, fy) = rk4(problem, psi0, x0, x1, 2 * steps);
        change = ys
            .iter()
            .enumerate()
            .map(|(k, y)| (fy[2 * k] - y).norm() / fy[2 * k].norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        steps *= 2;
        if change < LAYERED_TOL {
            return Ok(LayeredSolution { xs: fx, psi: fy, steps });
        }
        ys = fy;
    }
    Err(ElectrostaticsError::NoConvergence { steps, change })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients {
    pub sigma: Complex64,
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub k11: Complex64,
    pub k33: Complex64,
}

pub fn pde_coefficients(tensor: &TensorField2D, k2: f64, x: f64, z: f64) -> PdeCoefficients {
    let ik2 = Complex64::new(0.0, k2);
    let t = tensor;
    PdeCoefficients {
        sigma: 0.5 * (t.k13.value(x, z) + t.k31.value(x, z)),
        alpha1: t.k11.dx(x, z) + ik2 * (t.k12.value(x, z) + t.k21.value(x, z)) + t.k31.dz(x, z),
        alpha2: t.k13.dx(x, z) + ik2 * (t.k23.value(x, z) + t.k32.value(x, z)) + t.k33.dz(x, z),
        k11: t.k11.value(x, z),
        k33: t.k33.value(x, z),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeType {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

impl PdeType {
    pub fn as_str(self) -> &'static str {
        match self {
            PdeType::Elliptic => "elliptic",
            PdeType::Hyperbolic => "hyperbolic",
            PdeType::Parabolic => "parabolic",
        }
    }
}

pub const TYPE_TOL: f64 = 1e-14;

pub fn type_from_product(k11: f64, k33: f64) -> PdeType {
    let product = k11 * k33;
    if product.abs() <= TYPE_TOL {
        PdeType::Parabolic
    } else if product > 0.0 {
        PdeType::Elliptic
    } else {
        PdeType::Hyperbolic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SonicKind {
    SonicK,
    SonicAngle,
    None,
}

pub const SONIC_TOL: f64 = 1e-12;

pub fn sonic_condition(k: f64, eta: f64, theta: f64) -> SonicKind {
    let (sin, cos) = theta.sin_cos();
    if k.abs() <= SONIC_TOL {
        SonicKind::SonicK
    } else if (k * sin * sin + eta * cos * cos).abs() <= SONIC_TOL {
        SonicKind::SonicAngle
    } else {
        SonicKind::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub x: (f64, f64),
    pub z: (f64, f64),
    pub nx: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SingularPoints {
    pub points: Vec<(f64, f64)>,
    /// `∂z K11` vanishes identically on the box, so the whole sonic line
    /// satisfies both equations.
    pub degenerate: bool,
}

pub const SINGULAR_RESIDUAL: f64 = 1e-8;

/// Simultaneous zeros of `K11` and `∂z K11`, seeded from grid cells where
/// both change sign and refined by damped Newton iteration.
pub fn singular_points_on_sonic_line(k11: &dyn Field2D, search: &SearchBox) -> SingularPoints {
    let (nx, nz) = (search.nx.max(1), search.nz.max(1));
    let hx = (search.x.1 - search.x.0) / nx as f64;
    let hz = (search.z.1 - search.z.0) / nz as f64;
    let node = |i: usize, j: usize| (search.x.0 + i as f64 * hx, search.z.0 + j as f64 * hz);

    let mut k = vec![0.0; (nx + 1) * (nz + 1)];
    let mut kz = vec![0.0; (nx + 1) * (nz + 1)];
    let mut gradient_scale: f64 = 0.0;
    for i in 0..=nx {
        for j in 0..=nz {
            let (x, z) = node(i, j);
            k[i * (nz + 1) + j] = k11.value(x, z).re;
            kz[i * (nz + 1) + j] = k11.dz(x, z).re;
            gradient_scale = gradient_scale.max(k11.dx(x, z).re.abs()).max(kz[i * (nz + 1) + j].abs());
        }
    }
    let changes_sign = |v: &[f64], i: usize, j: usize| {
        let c = [v[i * (nz + 1) + j], v[(i + 1) * (nz + 1) + j], v[i * (nz + 1) + j + 1], v[(i + 1) * (nz + 1) + j + 1]];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    };

    let crosses = (0..nx).any(|i| (0..nz).any(|j| changes_sign(&k, i, j)));
    let flat = kz.iter().all(|v| v.abs() <= 1e-12 * (1.0 + gradient_scale));
    if flat {
        return SingularPoints { points: Vec::new(), degenerate: crosses };
    }

    let tol_x = 1e-9 * (search.x.1 - search.x.0).abs().max(1.0);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for i in 0..nx {
        for j in 0..nz {
            if !(changes_sign(&k, i, j) && changes_sign(&kz, i, j)) {
                continue;
            }
            let (x, z) = node(i, j);
            if let Some(p) = newton(k11, x + 0.5 * hx, z + 0.5 * hz) {
                let inside = p.0 >= search.x.0 - hx && p.0 <= search.x.1 + hx && p.1 >= search.z.0 - hz && p.1 <= search.z.1 + hz;
                let fresh = points.iter().all(|q| (q.0 - p.0).abs() > hx.max(tol_x) || (q.1 - p.1).abs() > hz.max(tol_x));
                if inside && fresh {
                    points.push(p);
                }
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    SingularPoints { points, degenerate: false }
}

fn newton(k11: &dyn Field2D, mut x: f64, mut z: f64) -> Option<(f64, f64)> {
    let h = DIFFERENCE_STEP * k11.scale();
    let residual = |x: f64, z: f64| (k11.value(x, z).re, k11.dz(x, z).re);
    let norm = |r: (f64, f64)| r.0.hypot(r.1);
    let mut r = residual(x, z);
    for _ in 0..100 {
        if r.0.abs() < 1e-12 && r.1.abs() < 1e-12 {
            break;
        }
        let j11 = k11.dx(x, z).re;
        let j12 = r.1;
        let j21 = central_dx(|x, z| k11.dz(x, z), x, z, h).re;
        let j22 = central_dz(|x, z| k11.dz(x, z), x, z, h).re;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (r.0 * j22 - r.1 * j12) / det;
        let dz = (j11 * r.1 - j21 * r.0) / det;
        let mut t = 1.0;
        loop {
            let trial = residual(x - t * dx, z - t * dz);
            if norm(trial) < norm(r) || t < 1e-6 {
                x -= t * dx;
                z -= t * dz;
                r = trial;
                break;
            }
            t *= 0.5;
        }
    }
    (r.0.abs() < SINGULAR_RESIDUAL && r.1.abs() < SINGULAR_RESIDUAL).then_some((x, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Standard,
    Flipped,
}

/// Parameters of the local model near a tangency point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFormModel {
    pub a: f64,
    pub b: f64,
    pub eta0: f64,
    /// Free constant weighting `z̃²` in the scaled equation.
    pub a_const: f64,
    pub orientation: Orientation,
}

/// `(cx·x + cy·y²) u_xx + u_yy + drift·u_x` in scaled variables, plus the
/// scaling that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalForm {
    pub model: NormalFormModel,
    pub cx: f64,
    pub cy: f64,
    pub drift: f64,
}

impl NormalFormModel {
    pub fn validate(&self) -> Result<(), ElectrostaticsError> {
        if self.a == 0.0 || !self.a.is_finite() {
            return Err(ElectrostaticsError::InvalidModel("a must be nonzero".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(ElectrostaticsError::InvalidModel("eta0 must be positive".into()));
        }
        Ok(())
    }

    fn x_sign(&self) -> f64 {
        match self.orientation {
            Orientation::Standard => 1.0,
            Orientation::Flipped => -1.0,
        }
    }

    pub fn to_scaled(&self, x: f64, z: f64) -> (f64, f64) {
        (self.x_sign() * x / self.a, z / (self.a * self.eta0.sqrt()))
    }

    pub fn from_scaled(&self, xs: f64, zs: f64) -> (f64, f64) {
        (self.x_sign() * xs * self.a, zs * self.a * self.eta0.sqrt())
    }
}

pub fn normal_form(model: &NormalFormModel) -> Result<NormalForm, ElectrostaticsError> {
    model.validate()?;
    // -(x + A z²) u_xx + u_zz - u_x, and its image under x → -x
    let (cx, drift) = match model.orientation {
        Orientation::Standard => (-1.0, -1.0),
        Orientation::Flipped => (1.0, 1.0),
    };
    Ok(NormalForm { model: *model, cx, cy: -model.a_const, drift })
}

impl NormalForm {
    pub fn apply<F: Fn(f64, f64) -> (f64, f64, f64)>(&self, x: f64, y: f64, derivs: F) -> f64 {
        let (uxx, uyy, ux) = derivs(x, y);
        (self.cx * x + self.cy * y * y) * uxx + uyy + self.drift * ux
    }

    pub fn describe(&self) -> String {
        let term = |c: f64, v: &str| {
            if c == 1.0 {
                format!("+{v}")
            } else if c == -1.0 {
                format!("-{v}")
            } else {
                format!("{c:+}*{v}")
            }
        };
        format!(
            "({}{})u_xx + u_yy {} u_x",
            term(self.cx, "x").trim_start_matches('+'),
            term(self.cy, "y^2"),
            if self.drift >= 0.0 { "+" } else { "-" }
        )
    }
}

pub const TYPEMAP_HEADER: &str = "x,z,K11,K33,type";

#[derive(Debug, Clone, PartialEq)]
pub struct TypeMapRow {
    pub x: f64,
    pub z: f64,
    pub k11: f64,
    pub k33: f64,
    pub kind: PdeType,
}

/// Type of the 2D equation sampled on a box, plus a warning for each node
/// where `K33 ≤ 0`.
pub fn type_map(tensor: &TensorField2D, search: &SearchBox) -> (Vec<TypeMapRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let (nx, nz) = (search.nx.max(1), search.nz.max(1));
    for i in 0..=nx {
        let x = search.x.0 + (search.x.1 - search.x.0) * i as f64 / nx as f64;
        for j in 0..=nz {
            let z = search.z.0 + (search.z.1 - search.z.0) * j as f64 / nz as f64;
            let k11 = tensor.k11.value(x, z).re;
            let k33 = tensor.k33.value(x, z).re;
            if k33 <= 0.0 {
                warnings.push(format!("K33 = {k33:e} is not positive at ({x:e}, {z:e})"));
            }
            rows.push(TypeMapRow { x, z, k11, k33, kind: type_from_product(k11, k33) });
        }
    }
    (rows, warnings)
}

pub fn write_type_map_csv<W: Write>(rows: &[TypeMapRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TYPEMAP_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", sci(r.x), sci(r.z), sci(r.k11), sci(r.k33), r.kind.as_str())?;
    }
    Ok(())
}
