//! Species-level and aggregate cold-plasma response.
//!
//! Conventions: fields vary as `exp(i(k·r - ωt))`, the background field is
//! `B0 ẑ`, and a species carries charge `q = Z δ e` with `δ = -1` for
//! electrons.

mod config;

pub use config::{MassSpec, PlasmaConfig, SpeciesConfig};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, PROTON_MASS, VACUUM_PERMITTIVITY};

/// Complex 3-vector (field, velocity, current).
pub type CVec3 = [Complex64; 3];

/// Default relative guard `|ω - Ω| / Ω` below which a frequency is treated as
/// a cyclotron resonance.
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlasmaError {
    #[error("invalid species `{name}`: {reason}")]
    InvalidSpecies { name: String, reason: String },
    #[error("invalid background field B0 = {0} T")]
    InvalidField(f64),
    #[error("frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("omega = {omega:e} rad/s is at the cyclotron resonance of `{species}` (Omega = {cyclotron:e} rad/s)")]
    CyclotronResonance { species: String, omega: f64, cyclotron: f64 },
    #[error("plasma has no electron species (charge_sign = -1)")]
    MissingElectrons,
    #[error("expected {expected} velocity vectors, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid plasma configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChargeSign {
    Negative,
    Positive,
}

impl ChargeSign {
    pub fn value(self) -> f64 {
        match self {
            ChargeSign::Negative => -1.0,
            ChargeSign::Positive => 1.0,
        }
    }

    pub fn from_int(v: i64) -> Option<Self> {
        match v {
            -1 => Some(ChargeSign::Negative),
            1 => Some(ChargeSign::Positive),
            _ => None,
        }
    }
}

/// One particle species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// kg
    pub mass: f64,
    pub charge_sign: ChargeSign,
    pub charge_number: u32,
    /// m^-3
    pub density: f64,
}

impl Species {
    pub fn new(
        name: impl Into<String>,
        mass: f64,
        charge_sign: ChargeSign,
        charge_number: u32,
        density: f64,
    ) -> Result<Self, PlasmaError> {
        let name = name.into();
        let bad = |reason: &str| PlasmaError::InvalidSpecies { name: name.clone(), reason: reason.to_string() };
        if !(mass.is_finite() && mass > 0.0) {
            return Err(bad("mass must be positive"));
        }
        if !(density.is_finite() && density >= 0.0) {
            return Err(bad("density must be non-negative"));
        }
        if charge_number == 0 {
            return Err(bad("charge number Z must be at least 1"));
        }
        Ok(Species { name, mass, charge_sign, charge_number, density })
    }

    pub fn electron(density: f64) -> Result<Self, PlasmaError> {
        Species::new("electron", ELECTRON_MASS, ChargeSign::Negative, 1, density)
    }

    pub fn proton(density: f64) -> Result<Self, PlasmaError> {
        Species::new("proton", PROTON_MASS, ChargeSign::Positive, 1, density)
    }

    /// δ as a float.
    pub fn delta(&self) -> f64 {
        self.charge_sign.value()
    }

    /// Signed charge `Z δ e`.
    pub fn charge(&self) -> f64 {
        self.charge_number as f64 * self.delta() * ELEMENTARY_CHARGE
    }
}

/// `Ω = |Z e B0 / m|`.
pub fn cyclotron_frequency(species: &Species, b0: f64) -> f64 {
    (species.charge() * b0 / species.mass).abs()
}

/// `Π² = n q² / (ε0 m)`.
pub fn plasma_frequency_squared(species: &Species) -> f64 {
    let q = species.charge();
    species.density * q * q / (VACUUM_PERMITTIVITY * species.mass)
}

/// Ordered species list plus the longitudinal background field.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasmaState {
    pub species: Vec<Species>,
    /// tesla
    pub b0: f64,
    /// Relative cyclotron-resonance guard.
    pub resonance_tol: f64,
}

impl PlasmaState {
    pub fn new(species: Vec<Species>, b0: f64) -> Result<Self, PlasmaError> {
        if !(b0.is_finite() && b0 >= 0.0) {
            return Err(PlasmaError::InvalidField(b0));
        }
        Ok(PlasmaState { species, b0, resonance_tol: DEFAULT_RESONANCE_TOL })
    }

    pub fn vacuum() -> Self {
        PlasmaState { species: Vec::new(), b0: 0.0, resonance_tol: DEFAULT_RESONANCE_TOL }
    }

    /// Quasineutral electron-proton plasma.
    pub fn hydrogen(electron_density: f64, b0: f64) -> Result<Self, PlasmaError> {
        PlasmaState::new(vec![Species::electron(electron_density)?, Species::proton(electron_density)?], b0)
    }

    pub fn with_resonance_tol(mut self, tol: f64) -> Self {
        self.resonance_tol = tol;
        self
    }

    pub fn cyclotron_frequencies(&self) -> Vec<f64> {
        self.species.iter().map(|s| cyclotron_frequency(s, self.b0)).collect()
    }

    /// Largest characteristic frequency, `max_ν(Ω_ν, Π_ν)`.
    pub fn max_frequency(&self) -> f64 {
        self.species
            .iter()
            .map(|s| cyclotron_frequency(s, self.b0).max(plasma_frequency_squared(s).sqrt()))
            .fold(0.0, f64::max)
    }

    fn check_frequency(&self, omega: f64) -> Result<(), PlasmaError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(PlasmaError::InvalidFrequency(omega));
        }
        for s in &self.species {
            check_resonance(s, cyclotron_frequency(s, self.b0), omega, self.resonance_tol)?;
        }
        Ok(())
    }

    /// Velocity response of every species to the same field.
    pub fn velocities(&self, e: &CVec3, omega: f64) -> Result<Vec<CVec3>, PlasmaError> {
        self.species
            .iter()
            .map(|s| velocity_response_with_tol(s, e, self.b0, omega, self.resonance_tol))
            .collect()
    }
}

fn check_resonance(species: &Species, cyclotron: f64, omega: f64, tol: f64) -> Result<(), PlasmaError> {
    if cyclotron > 0.0 && (omega - cyclotron).abs() / cyclotron < tol {
        return Err(PlasmaError::CyclotronResonance { species: species.name.clone(), omega, cyclotron });
    }
    Ok(())
}

/// The quintuple `(R, L, s, d, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StixParameters {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub s: f64,
    pub d: f64,
    pub p: f64,
}

impl StixParameters {
    /// Completes `s = (R + L)/2` and `d = (R - L)/2`.
    pub fn from_rlp(r: f64, l: f64, p: f64) -> Self {
        StixParameters { r, l, s: 0.5 * (r + l), d: 0.5 * (r - l), p }
    }

    pub fn vacuum() -> Self {
        StixParameters::from_rlp(1.0, 1.0, 1.0)
    }

    /// `R L`, identical to `s² - d²`.
    pub fn rl(&self) -> f64 {
        self.r * self.l
    }
}

pub fn stix_parameters(plasma: &PlasmaState, omega: f64) -> Result<StixParameters, PlasmaError> {
    plasma.check_frequency(omega)?;
    let mut r = 1.0;
    let mut l = 1.0;
    let mut p = 1.0;
    for s in &plasma.species {
        let pi2 = plasma_frequency_squared(s);
        let signed_cyclotron = s.delta() * cyclotron_frequency(s, plasma.b0);
        r -= pi2 / (omega * (omega + signed_cyclotron));
        l -= pi2 / (omega * (omega - signed_cyclotron));
        p -= pi2 / (omega * omega);
    }
    Ok(StixParameters::from_rlp(r, l, p))
}

/// Electron–ion approximation of `R` and `L` that drops the squared ion
/// cyclotron frequencies.
///
/// The first species with `δ = -1` is taken as the electrons; every `δ = +1`
/// species is an ion. Each ion term is weighted by its share `n_i Z_i / n_e`
/// of the electron density, which is 1 for a quasineutral single-ion plasma.
/// The electron cyclotron frequency enters with its sign, `δ_e Ω_e`.
pub fn stix_approximate_rl(plasma: &PlasmaState, omega: f64) -> Result<(f64, f64), PlasmaError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(PlasmaError::InvalidFrequency(omega));
    }
    Ok((approximate_sum(plasma, omega)?, approximate_sum(plasma, -omega)?))
}

// R at +ω; L is the same expression at -ω.
fn approximate_sum(plasma: &PlasmaState, omega: f64) -> Result<f64, PlasmaError> {
    let electron = plasma
        .species
        .iter()
        .find(|s| s.charge_sign == ChargeSign::Negative)
        .ok_or(PlasmaError::MissingElectrons)?;
    let pi2_e = plasma_frequency_squared(electron);
    let omega_e = electron.delta() * cyclotron_frequency(electron, plasma.b0);
    let mut value = 1.0;
    for ion in plasma.species.iter().filter(|s| s.charge_sign == ChargeSign::Positive) {
        let weight = if electron.density > 0.0 {
            ion.density * ion.charge_number as f64 / electron.density
        } else {
            0.0
        };
        let omega_i = cyclotron_frequency(ion, plasma.b0);
        value -= weight * pi2_e / (omega * omega + omega * omega_e + omega_e * omega_i);
    }
    Ok(value)
}

/// The cold-plasma dielectric tensor `[[s, -i d, 0], [i d, s, 0], [0, 0, p]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DielectricTensor {
    pub entries: [[Complex64; 3]; 3],
}

impl DielectricTensor {
    pub fn identity() -> Self {
        dielectric_tensor(&StixParameters::vacuum())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }

    pub fn apply(&self, v: &CVec3) -> CVec3 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (i, row) in self.entries.iter().enumerate() {
            out[i] = row.iter().zip(v).map(|(k, x)| k * x).sum();
        }
        out
    }

    pub fn conjugate_transpose(&self) -> Self {
        let mut entries = self.entries;
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.entries[j][i].conj();
            }
        }
        DielectricTensor { entries }
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let h = self.conjugate_transpose();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.entries[i][j] - h.entries[i][j]).norm());
            }
        }
        worst
    }
}

pub fn dielectric_tensor(stix: &StixParameters) -> DielectricTensor {
    let zero = Complex64::new(0.0, 0.0);
    let s = Complex64::new(stix.s, 0.0);
    let id = Complex64::new(0.0, stix.d);
    DielectricTensor {
        entries: [[s, -id, zero], [id, s, zero], [zero, zero, Complex64::new(stix.p, 0.0)]],
    }
}

/// Single-particle velocity amplitude driven by a constant field amplitude.
pub fn velocity_response(species: &Species, e: &CVec3, b0: f64, omega: f64) -> Result<CVec3, PlasmaError> {
    velocity_response_with_tol(species, e, b0, omega, DEFAULT_RESONANCE_TOL)
}

pub fn velocity_response_with_tol(
    species: &Species,
    e: &CVec3,
    b0: f64,
    omega: f64,
    tol: f64,
) -> Result<CVec3, PlasmaError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(PlasmaError::InvalidFrequency(omega));
    }
    let cyclotron = cyclotron_frequency(species, b0);
    check_resonance(species, cyclotron, omega, tol)?;
    let i = Complex64::i();
    let q = species.charge();
    let m = species.mass;
    let dc = species.delta() * cyclotron;
    let transverse = i * q / (m * (omega * omega - cyclotron * cyclotron));
    Ok([
        transverse * (omega * e[0] + i * dc * e[1]),
        transverse * (omega * e[1] - i * dc * e[0]),
        i * q / (m * omega) * e[2],
    ])
}

/// `j = Σ n_ν q_ν v_ν`.
pub fn plasma_current(plasma: &PlasmaState, velocities: &[CVec3]) -> Result<CVec3, PlasmaError> {
    if velocities.len() != plasma.species.len() {
        return Err(PlasmaError::LengthMismatch { expected: plasma.species.len(), got: velocities.len() });
    }
    let mut j = [Complex64::new(0.0, 0.0); 3];
    for (s, v) in plasma.species.iter().zip(velocities) {
        let nq = s.density * s.charge();
        for (jk, vk) in j.iter_mut().zip(v) {
            *jk += nq * vk;
        }
    }
    Ok(j)
}

/// `D = ε0 E + (i/ω) j`.
pub fn displacement(e: &CVec3, j: &CVec3, omega: f64) -> CVec3 {
    let factor = Complex64::i() / omega;
    [
        VACUUM_PERMITTIVITY * e[0] + factor * j[0],
        VACUUM_PERMITTIVITY * e[1] + factor * j[1],
        VACUUM_PERMITTIVITY * e[2] + factor * j[2],
    ]
}

/// Coefficient functions ξ, ζ, μ of the axisymmetric lower-hybrid operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerHybridCoefficients {
    pub xi: f64,
    pub zeta: f64,
    pub mu: f64,
    /// The operator is elliptic only where ξ < 0.
    pub elliptic: bool,
}

pub fn lower_hybrid_coefficients(plasma: &PlasmaState, omega: f64) -> Result<LowerHybridCoefficients, PlasmaError> {
    plasma.check_frequency(omega)?;
    let mut xi = 1.0;
    let mut plasma_sum = 0.0;
    let mut mu = 0.0;
    for s in &plasma.species {
        let pi2 = plasma_frequency_squared(s);
        let cyc = cyclotron_frequency(s, plasma.b0);
        let denom = cyc * cyc - omega * omega;
        xi += pi2 / denom;
        plasma_sum += pi2 / (omega * omega);
        mu += pi2 * cyc / (omega * denom);
    }
    let zeta = xi + plasma_sum - 1.0;
    Ok(LowerHybridCoefficients { xi, zeta, mu, elliptic: xi < 0.0 })
}
