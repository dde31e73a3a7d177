//! Problem description files and solution/diagnostic writers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dirichlet::{solve_closed_dirichlet, DiscreteSolution, IllposednessPoint};
use super::grid::{Domain, Grid2D, Rect};
use super::mixed::{solve_mixed, MixedMultiplierSpec, MixedSolution};
use super::WeakError;
use crate::format::{json_number, sci};

pub const SOLUTION_HEADER: &str = "x,y,u";
pub const MIXED_SOLUTION_HEADER: &str = "x,y,u1,u2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub rects: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryCondition {
    ClosedDirichlet,
    Mixed {
        #[serde(rename = "G", default)]
        g: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Scalar(Vec<f64>),
    Pairs(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingConfig {
    ExprId { id: String },
    /// Row-major nodal values, `i + nx * j`.
    Samples { values: Samples },
}

/// Named forcings available through `expr_id`.
pub const FORCING_IDS: [&str; 4] = ["zero", "one", "smooth", "manufactured"];

/// `sin(π(x - 1.5)) sin(π(y + 0.4)/0.8)`, vanishing on the edges of `[1.5, 2.5] × [-0.4, 0.4]`.
pub fn manufactured_solution(x: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    (PI * (x - 1.5)).sin() * (PI * (y + 0.4) / 0.8).sin()
}

/// `L` applied analytically to [`manufactured_solution`].
pub fn manufactured_forcing(x: f64, y: f64, kappa: f64) -> f64 {
    use std::f64::consts::PI;
    let (ax, ay) = (PI, PI / 0.8);
    let (sx, cx) = (ax * (x - 1.5)).sin_cos();
    let sy = (ay * (y + 0.4)).sin();
    let uxx = -ax * ax * sx * sy;
    let uyy = -ay * ay * sx * sy;
    let ux = ax * cx * sy;
    (x - y * y) * uxx + uyy + kappa * ux
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kappa: f64,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub bc: BoundaryCondition,
    pub forcing: ForcingConfig,
}

pub enum ProblemSolution {
    Dirichlet(DiscreteSolution),
    Mixed(MixedSolution),
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn domain(&self) -> Result<Domain, WeakError> {
        Domain::new(self.domain.rects.iter().map(|r| Rect::new(r[0], r[1], r[2], r[3])).collect())
    }

    pub fn build_grid(&self) -> Result<Grid2D, WeakError> {
        Grid2D::new(&self.domain()?, self.grid.nx, self.grid.ny)
    }

    /// Range and schema checks that do not need a solve.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=2.0).contains(&self.kappa) {
            out.push(format!("kappa out of range [0, 2]: {}", self.kappa));
        } else if matches!(self.bc, BoundaryCondition::Mixed { .. }) && self.kappa > 1.0 {
            out.push(format!("kappa out of range [0, 1] for the mixed problem: {}", self.kappa));
        }
        if self.grid.nx < 8 || self.grid.ny < 8 {
            out.push(format!("grid too small: nx and ny must be at least 8, got {}x{}", self.grid.nx, self.grid.ny));
        }
        if let Err(e) = self.domain() {
            out.push(e.to_string());
        }
        match &self.forcing {
            ForcingConfig::ExprId { id } if !FORCING_IDS.contains(&id.as_str()) => {
                out.push(format!("unknown forcing id {id:?}; expected one of {FORCING_IDS:?}"));
            }
            ForcingConfig::Samples { values } => {
                let want = self.grid.nx * self.grid.ny;
                let (len, pairs) = match values {
                    Samples::Scalar(v) => (v.len(), false),
                    Samples::Pairs(v) => (v.len(), true),
                };
                if len != want {
                    out.push(format!("forcing has {len} samples, grid has {want} nodes"));
                }
                let mixed = matches!(self.bc, BoundaryCondition::Mixed { .. });
                if mixed != pairs && len > 0 {
                    out.push("forcing samples must be pairs for the mixed problem and scalars otherwise".into());
                }
            }
            _ => {}
        }
        out
    }

    fn forcing_pair(&self, grid: &Grid2D) -> Result<(Vec<f64>, Vec<f64>), WeakError> {
        let kappa = self.kappa;
        match &self.forcing {
            ForcingConfig::ExprId { id } => {
                let f: Box<dyn Fn(f64, f64) -> (f64, f64)> = match id.as_str() {
                    "zero" => Box::new(|_, _| (0.0, 0.0)),
                    "one" => Box::new(|_, _| (1.0, 1.0)),
                    "smooth" => Box::new(|x, y| ((x + 2.0 * y).sin() + 1.0, (3.0 * x - y).cos())),
                    "manufactured" => Box::new(move |x, y| (manufactured_forcing(x, y, kappa), 0.0)),
                    other => return Err(WeakError::InvalidDomain(format!("unknown forcing id {other:?}"))),
                };
                let pairs: Vec<(f64, f64)> = (0..grid.len()).map(|k| {
                    let (x, y) = grid.coords(k);
                    f(x, y)
                }).collect();
                Ok(pairs.into_iter().unzip())
            }
            ForcingConfig::Samples { values } => {
                let (a, b): (Vec<f64>, Vec<f64>) = match values {
                    Samples::Scalar(v) => (v.clone(), vec![0.0; v.len()]),
                    Samples::Pairs(v) => v.iter().map(|p| (p[0], p[1])).unzip(),
                };
                if a.len() != grid.len() {
                    return Err(WeakError::LengthMismatch { expected: grid.len(), got: a.len() });
                }
                Ok((a, b))
            }
        }
    }

    pub fn solve(&self) -> Result<(Grid2D, ProblemSolution), WeakError> {
        let domain = self.domain()?;
        let grid = Grid2D::new(&domain, self.grid.nx, self.grid.ny)?;
        let (f1, f2) = self.forcing_pair(&grid)?;
        let solution = match &self.bc {
            BoundaryCondition::ClosedDirichlet => ProblemSolution::Dirichlet(solve_closed_dirichlet(&grid, self.kappa, &f1)?),
            BoundaryCondition::Mixed { g } => {
                let spec = MixedMultiplierSpec::new(&domain)?;
                ProblemSolution::Mixed(solve_mixed(&grid, self.kappa, g, &spec, &f1, &f2)?)
            }
        };
        Ok((grid, solution))
    }
}

/// One line per domain node in index order.
pub fn write_solution_csv<W: Write>(out: &mut W, grid: &Grid2D, u: &[f64]) -> std::io::Result<()> {
    writeln!(out, "{SOLUTION_HEADER}")?;
    for k in grid.domain_nodes() {
        let (x, y) = grid.coords(k);
        writeln!(out, "{},{},{}", sci(x), sci(y), sci(u[k]))?;
    }
    Ok(())
}

pub fn write_mixed_solution_csv<W: Write>(out: &mut W, grid: &Grid2D, u1: &[f64], u2: &[f64]) -> std::io::Result<()> {
    writeln!(out, "{MIXED_SOLUTION_HEADER}")?;
    for k in grid.domain_nodes() {
        let (x, y) = grid.coords(k);
        writeln!(out, "{},{},{},{}", sci(x), sci(y), sci(u1[k]), sci(u2[k]))?;
    }
    Ok(())
}

/// `[{"h": ..., "cond": ...}, ...]`
pub fn diagnostic_json(points: &[IllposednessPoint]) -> serde_json::Value {
    serde_json::Value::Array(
        points
            .iter()
            .map(|p| serde_json::json!({ "h": json_number(p.h), "cond": json_number(p.cond) }))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_boundary_kinds() {
        let d: ProblemConfig = ProblemConfig::from_json(
            r#"{"kappa":0.5,"domain":{"rects":[[-1,1,-1,1]]},"grid":{"nx":9,"ny":9},
                "bc":{"type":"closed_dirichlet"},"forcing":{"kind":"expr_id","id":"smooth"}}"#,
        )
        .unwrap();
        assert!(d.diagnostics().is_empty());
        assert_eq!(d.bc, BoundaryCondition::ClosedDirichlet);
        let m = ProblemConfig::from_json(
            r#"{"kappa":0,"domain":{"rects":[[0,1,0,1]]},"grid":{"nx":9,"ny":9},
                "bc":{"type":"mixed","G":[2,3]},"forcing":{"kind":"samples","values":[[0,0]]}}"#,
        )
        .unwrap();
        assert_eq!(m.bc, BoundaryCondition::Mixed { g: vec![2, 3] });
        assert_eq!(m.diagnostics().len(), 1);
    }

    #[test]
    fn kappa_and_grid_diagnostics() {
        let mut d = ProblemConfig::from_json(
            r#"{"kappa":3,"domain":{"rects":[[-1,1,-1,1]]},"grid":{"nx":4,"ny":9},
                "bc":{"type":"closed_dirichlet"},"forcing":{"kind":"expr_id","id":"zero"}}"#,
        )
        .unwrap();
        let diags = d.diagnostics();
        assert!(diags.iter().any(|m| m.contains("kappa out of range")));
        assert!(diags.iter().any(|m| m.contains("at least 8")));
        d.kappa = 1.0;
        d.grid.nx = 9;
        assert!(d.diagnostics().is_empty());
    }

    #[test]
    fn manufactured_forcing_matches_operator() {
        let g = Grid2D::new(&Domain::rectangle(1.5, 2.5, -0.4, 0.4).unwrap(), 41, 41).unwrap();
        let u = g.sample(manufactured_solution);
        let lu = super::super::operator::apply_l(&g, &u, 0.5);
        let k = g.index(20, 20);
        let (x, y) = g.coords(k);
        assert!((lu[k] / manufactured_forcing(x, y, 0.5) - 1.0).abs() < 1e-2);
    }
}
