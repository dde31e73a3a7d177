//! Scalar coefficient fields over the `(x, z)` plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative step of the central-difference fallback.
pub const DIFFERENCE_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid field definition: {0}")]
    Invalid(String),
}

/// A deterministic complex field with partial derivatives.
///
/// Fields without analytic derivatives inherit second-order central
/// differences with step `DIFFERENCE_STEP * scale()`; the truncation error is
/// `O(h²)` times the third derivative.
pub trait Field2D: Send + Sync {
    fn value(&self, x: f64, z: f64) -> Complex64;

    /// Length scale used to size the difference step.
    fn scale(&self) -> f64 {
        1.0
    }

    fn dx(&self, x: f64, z: f64) -> Complex64 {
        let h = DIFFERENCE_STEP * self.scale();
        central_dx(|x, z| self.value(x, z), x, z, h)
    }

    fn dz(&self, x: f64, z: f64) -> Complex64 {
        let h = DIFFERENCE_STEP * self.scale();
        central_dz(|x, z| self.value(x, z), x, z, h)
    }
}

pub fn central_dx<F: Fn(f64, f64) -> Complex64>(f: F, x: f64, z: f64, h: f64) -> Complex64 {
    (f(x + h, z) - f(x - h, z)) / (2.0 * h)
}

pub fn central_dz<F: Fn(f64, f64) -> Complex64>(f: F, x: f64, z: f64, h: f64) -> Complex64 {
    (f(x, z + h) - f(x, z - h)) / (2.0 * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub Complex64);

impl Constant {
    pub fn real(v: f64) -> Self {
        Constant(Complex64::new(v, 0.0))
    }

    pub fn zero() -> Self {
        Constant::real(0.0)
    }
}

impl Field2D for Constant {
    fn value(&self, _: f64, _: f64) -> Complex64 {
        self.0
    }
    fn dx(&self, _: f64, _: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn dz(&self, _: f64, _: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

/// `(x - x0)/a + (z - z0)²/b`, the local model of a sonic line with a
/// tangency point at `(x0, z0)`. An infinite `b` drops the `z` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineQuadratic {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub z0: f64,
}

impl AffineQuadratic {
    pub fn new(a: f64, b: f64) -> Self {
        AffineQuadratic { a, b, x0: 0.0, z0: 0.0 }
    }

    pub fn centered(a: f64, b: f64, x0: f64, z0: f64) -> Self {
        AffineQuadratic { a, b, x0, z0 }
    }

    fn inv_b(&self) -> f64 {
        if self.b.is_infinite() {
            0.0
        } else {
            1.0 / self.b
        }
    }
}

impl Field2D for AffineQuadratic {
    fn value(&self, x: f64, z: f64) -> Complex64 {
        let dz = z - self.z0;
        Complex64::new((x - self.x0) / self.a + dz * dz * self.inv_b(), 0.0)
    }
    fn dx(&self, _: f64, _: f64) -> Complex64 {
        Complex64::new(1.0 / self.a, 0.0)
    }
    fn dz(&self, _: f64, z: f64) -> Complex64 {
        Complex64::new(2.0 * (z - self.z0) * self.inv_b(), 0.0)
    }
}

type Eval = Box<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Closure-backed field, optionally with analytic derivatives.
pub struct FnField {
    value: Eval,
    dx: Option<Eval>,
    dz: Option<Eval>,
    scale: f64,
}

impl FnField {
    pub fn new(f: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static) -> Self {
        FnField { value: Box::new(f), dx: None, dz: None, scale: 1.0 }
    }

    pub fn real(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        FnField::new(move |x, z| Complex64::new(f(x, z), 0.0))
    }

    pub fn with_derivatives(
        mut self,
        dx: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
        dz: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        self.dx = Some(Box::new(dx));
        self.dz = Some(Box::new(dz));
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

impl Field2D for FnField {
    fn value(&self, x: f64, z: f64) -> Complex64 {
        (self.value)(x, z)
    }
    fn scale(&self) -> f64 {
        self.scale
    }
    fn dx(&self, x: f64, z: f64) -> Complex64 {
        match &self.dx {
            Some(d) => d(x, z),
            None => central_dx(|x, z| self.value(x, z), x, z, DIFFERENCE_STEP * self.scale),
        }
    }
    fn dz(&self, x: f64, z: f64) -> Complex64 {
        match &self.dz {
            Some(d) => d(x, z),
            None => central_dz(|x, z| self.value(x, z), x, z, DIFFERENCE_STEP * self.scale),
        }
    }
}

/// Bilinear interpolation of samples on a rectilinear grid; constant
/// extrapolation outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    xs: Vec<f64>,
    zs: Vec<f64>,
    /// Row-major, `values[i * zs.len() + j]` at `(xs[i], zs[j])`.
    values: Vec<f64>,
}

impl Tabulated {
    pub fn new(xs: Vec<f64>, zs: Vec<f64>, values: Vec<f64>) -> Result<Self, FieldError> {
        if xs.len() < 2 || zs.len() < 2 {
            return Err(FieldError::Invalid("table needs at least two nodes per axis".into()));
        }
        if values.len() != xs.len() * zs.len() {
            return Err(FieldError::Invalid(format!(
                "table has {} values for a {}x{} grid",
                values.len(),
                xs.len(),
                zs.len()
            )));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&zs) {
            return Err(FieldError::Invalid("table axes must be strictly increasing".into()));
        }
        Ok(Tabulated { xs, zs, values })
    }

    fn locate(axis: &[f64], v: f64) -> (usize, f64) {
        let v = v.clamp(axis[0], axis[axis.len() - 1]);
        let k = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
        (k, (v - axis[k]) / (axis[k + 1] - axis[k]))
    }
}

impl Field2D for Tabulated {
    fn value(&self, x: f64, z: f64) -> Complex64 {
        let (i, tx) = Tabulated::locate(&self.xs, x);
        let (j, tz) = Tabulated::locate(&self.zs, z);
        let n = self.zs.len();
        let at = |i: usize, j: usize| self.values[i * n + j];
        let v = (1.0 - tx) * ((1.0 - tz) * at(i, j) + tz * at(i, j + 1)) + tx * ((1.0 - tz) * at(i + 1, j) + tz * at(i + 1, j + 1));
        Complex64::new(v, 0.0)
    }

    fn scale(&self) -> f64 {
        let span = |a: &[f64]| a[a.len() - 1] - a[0];
        span(&self.xs).max(span(&self.zs))
    }
}

/// JSON description of a scalar field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        value: f64,
        #[serde(default)]
        imag: f64,
    },
    AffineQuadratic {
        a: f64,
        #[serde(default = "infinite")]
        b: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        z0: f64,
    },
    #[serde(rename = "expression-table", alias = "table")]
    Table { x: Vec<f64>, z: Vec<f64>, values: Vec<Vec<f64>> },
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl FieldSpec {
    pub fn build(&self) -> Result<Box<dyn Field2D>, FieldError> {
        Ok(match self {
            FieldSpec::Constant { value, imag } => Box::new(Constant(Complex64::new(*value, *imag))),
            FieldSpec::AffineQuadratic { a, b, x0, z0 } => {
                if *a == 0.0 || !a.is_finite() || *b == 0.0 {
                    return Err(FieldError::Invalid("affine_quadratic needs finite nonzero a and nonzero b".into()));
                }
                Box::new(AffineQuadratic::centered(*a, *b, *x0, *z0))
            }
            FieldSpec::Table { x, z, values } => {
                if values.len() != x.len() || values.iter().any(|row| row.len() != z.len()) {
                    return Err(FieldError::Invalid("table values must be x.len() rows of z.len() entries".into()));
                }
                Box::new(Tabulated::new(x.clone(), z.clone(), values.concat())?)
            }
        })
    }
}
