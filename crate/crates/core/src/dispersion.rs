//! Wave-normal surface `A n⁴ - B n² + C = 0`, cutoffs, resonances and scans.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::format::sci;
use crate::plasma::{plasma_frequency_squared, cyclotron_frequency, stix_parameters, ChargeSign, PlasmaError, PlasmaState, StixParameters};
use crate::roots::{find_roots, BracketOptions, RootError};

/// `|A|` below this fraction of `|s| + |p|` selects the resonance branch.
pub const RESONANCE_TOL: f64 = 1e-12;
/// Relative slack on `F² ≥ 0` before roots are declared complex.
pub const DISCRIMINANT_TOL: f64 = 1e-12;

pub const SCAN_HEADER: &str = "omega,theta,A,B,C,F2,n2_plus,n2_minus,class_plus,class_minus,flag";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispersionError {
    #[error("degenerate quartic: A and B both vanish (A = {a:e}, B = {b:e})")]
    DegenerateQuartic { a: f64, b: f64 },
    #[error(transparent)]
    Plasma(#[from] PlasmaError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveNormalCoefficients {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "F2")]
    pub f_squared: f64,
    pub theta: f64,
    #[serde(skip)]
    scale: f64,
}

impl WaveNormalCoefficients {
    /// Reference magnitude `|s| + |p|` for the resonance test.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

pub fn wave_normal_coefficients(stix: &StixParameters, theta: f64) -> WaveNormalCoefficients {
    let (sin, cos) = theta.sin_cos();
    let (sin2, cos2) = (sin * sin, cos * cos);
    let rl = stix.s * stix.s - stix.d * stix.d;
    let a = stix.s * sin2 + stix.p * cos2;
    let b = rl * sin2 + stix.p * stix.s * (1.0 + cos2);
    let c = stix.p * rl;
    WaveNormalCoefficients { a, b, c, f_squared: f_squared_factored(stix, theta), theta, scale: stix.s.abs() + stix.p.abs() }
}

/// `B² - 4AC` written as `(RL - ps)² sin⁴θ + 4 p² d² cos²θ`, non-negative for real input.
pub fn f_squared_factored(stix: &StixParameters, theta: f64) -> f64 {
    let (sin, cos) = theta.sin_cos();
    let gap = stix.rl() - stix.p * stix.s;
    gap * gap * sin.powi(4) + 4.0 * stix.p * stix.p * stix.d * stix.d * cos * cos
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootClass {
    Propagating,
    Evanescent,
    Cutoff,
    Resonance,
    Complex,
}

impl RootClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RootClass::Propagating => "propagating",
            RootClass::Evanescent => "evanescent",
            RootClass::Cutoff => "cutoff",
            RootClass::Resonance => "resonance",
            RootClass::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexRoot {
    /// `n²`; infinite on the resonance branch.
    pub n_squared: Complex64,
    pub class: RootClass,
}

impl IndexRoot {
    pub fn is_finite(&self) -> bool {
        self.n_squared.re.is_finite() && self.n_squared.im.is_finite()
    }
}

/// The `(B + F)/2A` and `(B - F)/2A` branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSolution {
    pub plus: IndexRoot,
    pub minus: IndexRoot,
}

impl DispersionSolution {
    /// Finite roots, plus branch first.
    pub fn roots(&self) -> Vec<Complex64> {
        [self.plus, self.minus].iter().filter(|r| r.is_finite()).map(|r| r.n_squared).collect()
    }

    pub fn is_resonance(&self) -> bool {
        self.plus.class == RootClass::Resonance || self.minus.class == RootClass::Resonance
    }

    pub fn is_complex(&self) -> bool {
        self.plus.class == RootClass::Complex
    }
}

fn classify_real(r: f64, reference: f64) -> RootClass {
    if r.abs() <= 1e-12 * reference {
        RootClass::Cutoff
    } else if r > 0.0 {
        RootClass::Propagating
    } else {
        RootClass::Evanescent
    }
}

fn real_root(r: f64, reference: f64) -> IndexRoot {
    IndexRoot { n_squared: Complex64::new(r, 0.0), class: classify_real(r, reference) }
}

pub fn refractive_indices(coeffs: &WaveNormalCoefficients) -> Result<DispersionSolution, DispersionError> {
    let WaveNormalCoefficients { a, b, c, f_squared, .. } = *coeffs;
    let scale = coeffs.scale.max(f64::MIN_POSITIVE);

    if a.abs() < RESONANCE_TOL * scale {
        if b.abs() < RESONANCE_TOL * scale * scale {
            return Err(DispersionError::DegenerateQuartic { a, b });
        }
        let finite = real_root(c / b, 1.0_f64.max((c / b).abs()));
        let infinite = IndexRoot { n_squared: Complex64::new(f64::INFINITY, 0.0), class: RootClass::Resonance };
        // As A → 0 the branch (B + sign(B)|B|)/2A diverges.
        let (plus, minus) = if b > 0.0 { (infinite, finite) } else { (finite, infinite) };
        return Ok(DispersionSolution { plus, minus });
    }

    let reference = 1.0_f64.max(b.abs() / a.abs());
    if f_squared < -DISCRIMINANT_TOL * (b * b).max((4.0 * a * c).abs()) {
        let re = b / (2.0 * a);
        let im = (-f_squared).sqrt() / (2.0 * a.abs());
        return Ok(DispersionSolution {
            plus: IndexRoot { n_squared: Complex64::new(re, im), class: RootClass::Complex },
            minus: IndexRoot { n_squared: Complex64::new(re, -im), class: RootClass::Complex },
        });
    }

    let f = f_squared.max(0.0).sqrt();
    let q = 0.5 * (b + b.signum() * f);
    let (plus, minus) = if q == 0.0 {
        (0.0, 0.0)
    } else if b >= 0.0 {
        (q / a, c / q)
    } else {
        (c / q, q / a)
    };
    Ok(DispersionSolution { plus: real_root(plus, reference), minus: real_root(minus, reference) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CutoffKind {
    P,
    R,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub omega: f64,
    pub which: CutoffKind,
}

fn check_bracket(bracket: (f64, f64)) -> Result<(), DispersionError> {
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(DispersionError::InvalidBracket(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

fn bracket_options(plasma: &PlasmaState) -> BracketOptions {
    BracketOptions { pole_gap: (100.0 * plasma.resonance_tol).max(1e-9), ..BracketOptions::default() }
}

fn stix_or_nan(plasma: &PlasmaState, omega: f64) -> StixParameters {
    stix_parameters(plasma, omega).unwrap_or(StixParameters { r: f64::NAN, l: f64::NAN, s: f64::NAN, d: f64::NAN, p: f64::NAN })
}

/// Zeros of `p`, `R` and `L` inside the bracket, ascending in ω.
pub fn cutoff_frequencies(plasma: &PlasmaState, bracket: (f64, f64)) -> Result<Vec<Cutoff>, DispersionError> {
    check_bracket(bracket)?;
    let poles = plasma.cyclotron_frequencies();
    let opts = bracket_options(plasma);
    let mut out = Vec::new();
    let parts: [(CutoffKind, fn(&StixParameters) -> f64); 3] =
        [(CutoffKind::P, |s| s.p), (CutoffKind::R, |s| s.r), (CutoffKind::L, |s| s.l)];
    for (which, pick) in parts {
        let roots = find_roots(|w| pick(&stix_or_nan(plasma, w)), bracket.0, bracket.1, &poles, &opts)?;
        out.extend(roots.into_iter().map(|omega| Cutoff { omega, which }));
    }
    out.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.which.cmp(&b.which)));
    Ok(out)
}

/// Propagation angle with `tan²θ = -p/s`, when one exists.
pub fn resonance_angle(stix: &StixParameters) -> Option<f64> {
    let (s, p) = (stix.s, stix.p);
    if p == 0.0 && s != 0.0 {
        return Some(0.0);
    }
    if s == 0.0 {
        return if p == 0.0 { None } else { Some(std::f64::consts::FRAC_PI_2) };
    }
    let ratio = -p / s;
    if ratio > 0.0 {
        Some(ratio.sqrt().atan())
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridResonances {
    /// Zeros of `s(ω)` in the bracket.
    pub roots: Vec<f64>,
    /// `sqrt(Π_i² / (1 + Π_e²/Ω_e²))` for one-ion plasmas.
    pub lower_hybrid_estimate: Option<f64>,
}

pub fn lower_hybrid_estimate(plasma: &PlasmaState) -> Option<f64> {
    let electrons: Vec<_> = plasma.species.iter().filter(|s| s.charge_sign == ChargeSign::Negative).collect();
    let ions: Vec<_> = plasma.species.iter().filter(|s| s.charge_sign == ChargeSign::Positive).collect();
    if electrons.len() != 1 || ions.len() != 1 {
        return None;
    }
    let cyc_e = cyclotron_frequency(electrons[0], plasma.b0);
    if cyc_e == 0.0 {
        return None;
    }
    let ratio = plasma_frequency_squared(electrons[0]) / (cyc_e * cyc_e);
    Some((plasma_frequency_squared(ions[0]) / (1.0 + ratio)).sqrt())
}

pub fn hybrid_resonances(plasma: &PlasmaState, bracket: (f64, f64)) -> Result<HybridResonances, DispersionError> {
    check_bracket(bracket)?;
    let poles = plasma.cyclotron_frequencies();
    let roots = find_roots(|w| stix_or_nan(plasma, w).s, bracket.0, bracket.1, &poles, &bracket_options(plasma))?;
    Ok(HybridResonances { roots, lower_hybrid_estimate: lower_hybrid_estimate(plasma) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub omega: f64,
    pub theta: f64,
    pub coefficients: Option<WaveNormalCoefficients>,
    pub solution: Option<DispersionSolution>,
    pub flag: &'static str,
}

fn scan_point(plasma: &PlasmaState, omega: f64, theta: f64) -> ScanRow {
    let mut row = ScanRow { omega, theta, coefficients: None, solution: None, flag: "ok" };
    let stix = match stix_parameters(plasma, omega) {
        Ok(s) => s,
        Err(PlasmaError::CyclotronResonance { .. }) => {
            row.flag = "cyclotron_resonance";
            return row;
        }
        Err(_) => {
            row.flag = "invalid_omega";
            return row;
        }
    };
    let coeffs = wave_normal_coefficients(&stix, theta);
    row.coefficients = Some(coeffs);
    match refractive_indices(&coeffs) {
        Ok(sol) => {
            row.flag = if sol.is_complex() {
                "complex"
            } else if sol.is_resonance() {
                "resonance"
            } else {
                "ok"
            };
            row.solution = Some(sol);
        }
        Err(_) => row.flag = "degenerate",
    }
    row
}

/// One row per `(ω, θ)`, ω-major, evaluated in parallel.
pub fn dispersion_scan(plasma: &PlasmaState, omegas: &[f64], thetas: &[f64]) -> Vec<ScanRow> {
    let n = thetas.len();
    (0..omegas.len() * n)
        .into_par_iter()
        .map(|k| scan_point(plasma, omegas[k / n], thetas[k % n]))
        .collect()
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SCAN_HEADER}")?;
    let nan = f64::NAN;
    for row in rows {
        let (a, b, c, f2) = row.coefficients.map_or((nan, nan, nan, nan), |k| (k.a, k.b, k.c, k.f_squared));
        let (np, nm, cp, cm) = match &row.solution {
            Some(s) => (s.plus.n_squared.re, s.minus.n_squared.re, s.plus.class.as_str(), s.minus.class.as_str()),
            None => (nan, nan, "none", "none"),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            sci(row.omega),
            sci(row.theta),
            sci(a),
            sci(b),
            sci(c),
            sci(f2),
            sci(np),
            sci(nm),
            cp,
            cm,
            row.flag
        )?;
    }
    Ok(())
}
