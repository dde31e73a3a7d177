use serde::{Deserialize, Serialize};

use super::{ChargeSign, PlasmaError, PlasmaState, Species};
use crate::constants::{ELECTRON_MASS, PROTON_MASS};

/// `mass_kg` may be a number or the name of a built-in species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassSpec {
    Kg(f64),
    Alias(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<MassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge_sign: Option<i64>,
    #[serde(rename = "Z", default, skip_serializing_if = "Option::is_none")]
    pub charge_number: Option<i64>,
    pub density_m3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasmaConfig {
    #[serde(rename = "B0")]
    pub b0: f64,
    #[serde(default)]
    pub species: Vec<SpeciesConfig>,
}

struct Alias {
    mass: f64,
    sign: ChargeSign,
    z: u32,
}

fn lookup_alias(name: &str) -> Option<Alias> {
    match name.to_ascii_lowercase().as_str() {
        "electron" | "e" | "e-" => Some(Alias { mass: ELECTRON_MASS, sign: ChargeSign::Negative, z: 1 }),
        "proton" | "p" | "h+" => Some(Alias { mass: PROTON_MASS, sign: ChargeSign::Positive, z: 1 }),
        _ => None,
    }
}

impl SpeciesConfig {
    fn alias(&self) -> Option<Alias> {
        match &self.mass_kg {
            Some(MassSpec::Alias(a)) => lookup_alias(a),
            _ => lookup_alias(&self.name),
        }
    }

    pub fn resolve(&self) -> Result<Species, PlasmaError> {
        let bad = |reason: String| PlasmaError::InvalidSpecies { name: self.name.clone(), reason };
        let alias = self.alias();
        let mass = match (&self.mass_kg, &alias) {
            (Some(MassSpec::Kg(m)), _) => *m,
            (Some(MassSpec::Alias(a)), None) => return Err(bad(format!("unknown mass alias `{a}`"))),
            (_, Some(al)) => al.mass,
            (None, None) => return Err(bad("mass_kg is required".into())),
        };
        let sign = match (self.charge_sign, &alias) {
            (Some(v), _) => ChargeSign::from_int(v).ok_or_else(|| bad(format!("charge_sign must be -1 or 1, got {v}")))?,
            (None, Some(al)) => al.sign,
            (None, None) => return Err(bad("charge_sign is required".into())),
        };
        let z = match (self.charge_number, &alias) {
            (Some(v), _) if v >= 1 && v <= u32::MAX as i64 => v as u32,
            (Some(v), _) => return Err(bad(format!("Z must be a positive integer, got {v}"))),
            (None, Some(al)) => al.z,
            (None, None) => return Err(bad("Z is required".into())),
        };
        Species::new(self.name.clone(), mass, sign, z, self.density_m3)
    }
}

impl PlasmaConfig {
    pub fn from_json(text: &str) -> Result<Self, PlasmaError> {
        serde_json::from_str(text).map_err(|e| PlasmaError::Config(e.to_string()))
    }

    pub fn to_state(&self) -> Result<PlasmaState, PlasmaError> {
        let species = self.species.iter().map(SpeciesConfig::resolve).collect::<Result<Vec<_>, _>>()?;
        PlasmaState::new(species, self.b0)
    }

    /// Every problem found, rather than the first.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.b0.is_finite() && self.b0 >= 0.0) {
            out.push(format!("B0 must be non-negative, got {}", self.b0));
        }
        for s in &self.species {
            if s.density_m3 < 0.0 || !s.density_m3.is_finite() {
                out.push(format!("species `{}`: negative density {}", s.name, s.density_m3));
            } else if let Err(e) = s.resolve() {
                out.push(e.to_string());
            }
        }
        out
    }
}

impl From<&PlasmaState> for PlasmaConfig {
    fn from(state: &PlasmaState) -> Self {
        PlasmaConfig {
            b0: state.b0,
            species: state
                .species
                .iter()
                .map(|s| SpeciesConfig {
                    name: s.name.clone(),
                    mass_kg: Some(MassSpec::Kg(s.mass)),
                    charge_sign: Some(s.delta() as i64),
                    charge_number: Some(s.charge_number as i64),
                    density_m3: s.density,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_fill_missing_fields() {
        let cfg = PlasmaConfig::from_json(
            r#"{"B0": 1.0, "species": [
                {"name": "electron", "density_m3": 1e19},
                {"name": "ion", "mass_kg": "proton", "density_m3": 1e19},
                {"name": "He++", "mass_kg": 6.6446573357e-27, "charge_sign": 1, "Z": 2, "density_m3": 1e18}
            ]}"#,
        )
        .unwrap();
        let state = cfg.to_state().unwrap();
        assert_eq!(state.species[0].mass, ELECTRON_MASS);
        assert_eq!(state.species[0].charge_sign, ChargeSign::Negative);
        assert_eq!(state.species[1].mass, PROTON_MASS);
        assert_eq!(state.species[2].charge_number, 2);
        let back = PlasmaConfig::from(&state).to_state().unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn diagnostics_report_problems() {
        let vacuum = PlasmaConfig::from_json(r#"{"B0": 0.0, "species": []}"#).unwrap();
        assert!(vacuum.diagnostics().is_empty());
        let bad = PlasmaConfig::from_json(
            r#"{"B0": 1.0, "species": [{"name": "electron", "density_m3": -1.0},
                                       {"name": "x", "density_m3": 1.0}]}"#,
        )
        .unwrap();
        let d = bad.diagnostics();
        assert_eq!(d.len(), 2);
        assert!(d[0].contains("negative density"));
        assert!(bad.to_state().is_err());
    }
}
