//! Cellwise quadrature cut along `x = y²`.
//!
//! Each cell is split into two triangles; a triangle crossed by the zero
//! line of the linear interpolant of `x - y²` is clipped into a piece on
//! each side. Every piece is integrated with the edge-midpoint rule, which
//! is exact for quadratics. Nodal fields enter through their linear
//! interpolant on the parent triangle.

use serde::Serialize;

use super::grid::Grid2D;
use super::operator::gradient;
use super::WeakError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `x - y² > 0`
    Elliptic,
    /// `x - y² < 0`
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub side: Side,
    pub nodes: [usize; 3],
    pub bary: [f64; 3],
    pub cell: usize,
}

impl QuadPoint {
    pub fn interp(&self, f: &[f64]) -> f64 {
        self.bary[0] * f[self.nodes[0]] + self.bary[1] * f[self.nodes[1]] + self.bary[2] * f[self.nodes[2]]
    }

    pub fn type_change(&self) -> f64 {
        self.x - self.y * self.y
    }
}

#[derive(Debug, Clone)]
pub struct CutQuadrature {
    pub points: Vec<QuadPoint>,
    /// Cells whose corners see both signs of `x - y²`.
    pub straddling: Vec<bool>,
    cell_area: f64,
}

fn det2(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    // barycentric triangles: signed area ratio from the first two coordinates
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn clip(phi: [f64; 3]) -> Vec<(Side, Vec<[f64; 3]>)> {
    let e = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let pos = phi.iter().all(|&v| v >= 0.0);
    let neg = phi.iter().all(|&v| v <= 0.0);
    if pos || neg {
        let side = if pos && !neg || phi.iter().sum::<f64>() > 0.0 { Side::Elliptic } else { Side::Hyperbolic };
        return vec![(side, e.to_vec())];
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for k in 0..3 {
        let n = (k + 1) % 3;
        let (a, b) = (phi[k], phi[n]);
        if a >= 0.0 {
            plus.push(e[k]);
        }
        if a <= 0.0 {
            minus.push(e[k]);
        }
        if a * b < 0.0 {
            let t = a / (a - b);
            let p = [0, 1, 2].map(|m| (1.0 - t) * e[k][m] + t * e[n][m]);
            plus.push(p);
            minus.push(p);
        }
    }
    vec![(Side::Elliptic, plus), (Side::Hyperbolic, minus)]
}

impl CutQuadrature {
    pub fn new(grid: &Grid2D) -> Self {
        let mut points = Vec::new();
        let ncx = grid.nx - 1;
        let mut straddling = vec![false; ncx * (grid.ny - 1)];
        let cell_area = grid.hx * grid.hy;
        let k_at = |n: usize| {
            let (x, y) = grid.coords(n);
            x - y * y
        };
        for j in 0..grid.ny - 1 {
            for i in 0..ncx {
                if !grid.cell_in(i, j) {
                    continue;
                }
                let cell = i + ncx * j;
                let a = grid.index(i, j);
                let b = grid.index(i + 1, j);
                let c = grid.index(i + 1, j + 1);
                let d = grid.index(i, j + 1);
                let corner = [a, b, c, d].map(k_at);
                let lo = corner.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = corner.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                straddling[cell] = lo < 0.0 && hi > 0.0;
                for tri in [[a, b, c], [a, c, d]] {
                    let phi = tri.map(k_at);
                    let verts = tri.map(|n| grid.coords(n));
                    for (side, poly) in clip(phi) {
                        for f in 1..poly.len().saturating_sub(1) {
                            let sub = [poly[0], poly[f], poly[f + 1]];
                            let ratio = det2(sub[0], sub[1], sub[2]).abs();
                            if ratio <= 0.0 {
                                continue;
                            }
                            let weight = 0.5 * cell_area * ratio / 3.0;
                            for (p, q) in [(0, 1), (1, 2), (2, 0)] {
                                let bary = [0, 1, 2].map(|m| 0.5 * (sub[p][m] + sub[q][m]));
                                let x = bary[0] * verts[0].0 + bary[1] * verts[1].0 + bary[2] * verts[2].0;
                                let y = bary[0] * verts[0].1 + bary[1] * verts[1].1 + bary[2] * verts[2].1;
                                points.push(QuadPoint { x, y, weight, side, nodes: tri, bary, cell });
                            }
                        }
                    }
                }
            }
        }
        CutQuadrature { points, straddling, cell_area }
    }

    pub fn integrate(&self, f: impl Fn(&QuadPoint) -> f64) -> f64 {
        self.points.iter().map(|p| p.weight * f(p)).sum()
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }
}

/// Square roots of `∫|K|u²`, `∫u²/|K|` and `∫(|K|u_x² + u_y²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorms {
    pub l2_weighted: f64,
    pub l2_dual_weighted: f64,
    pub h1_weighted: f64,
    /// Area of cells left out of the dual integral.
    pub excluded_measure: f64,
}

fn support_cells(grid: &Grid2D, quad: &CutQuadrature, u: &[f64]) -> Vec<bool> {
    let ncx = grid.nx - 1;
    (0..quad.straddling.len())
        .map(|cell| {
            let (i, j) = (cell % ncx, cell / ncx);
            [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].iter().any(|&(a, b)| u[grid.index(a, b)] != 0.0)
        })
        .collect()
}

fn norms(grid: &Grid2D, quad: &CutQuadrature, u: &[f64], strict: bool) -> Result<WeightedNorms, WeakError> {
    if u.len() != grid.len() {
        return Err(WeakError::LengthMismatch { expected: grid.len(), got: u.len() });
    }
    let support = support_cells(grid, quad, u);
    let excluded: Vec<bool> = support.iter().zip(&quad.straddling).map(|(s, t)| *s && *t).collect();
    let excluded_measure = excluded.iter().filter(|&&e| e).count() as f64 * quad.cell_area;
    if strict && excluded_measure > 0.0 {
        return Err(WeakError::DualNormSingular { measure: excluded_measure });
    }
    let (ux, uy) = gradient(grid, u);
    let mut l2 = 0.0;
    let mut dual = 0.0;
    let mut h1 = 0.0;
    for p in &quad.points {
        let w = p.type_change().abs();
        let v = p.interp(u);
        let gx = p.interp(&ux);
        let gy = p.interp(&uy);
        l2 += p.weight * w * v * v;
        h1 += p.weight * (w * gx * gx + gy * gy);
        if !excluded[p.cell] && v != 0.0 {
            dual += p.weight * v * v / w;
        }
    }
    Ok(WeightedNorms { l2_weighted: l2.sqrt(), l2_dual_weighted: dual.sqrt(), h1_weighted: h1.sqrt(), excluded_measure })
}

/// Fails with `DualNormSingular` when `u` is nonzero on a cell crossed by
/// the sonic curve.
pub fn weighted_norms(grid: &Grid2D, quad: &CutQuadrature, u: &[f64]) -> Result<WeightedNorms, WeakError> {
    norms(grid, quad, u, true)
}

/// Drops crossed cells from the dual integral and reports their area.
pub fn weighted_norms_excluding(grid: &Grid2D, quad: &CutQuadrature, u: &[f64]) -> Result<WeightedNorms, WeakError> {
    norms(grid, quad, u, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::grid::Domain;

    #[test]
    fn quadrature_is_exact_for_quadratics() {
        let g = Grid2D::new(&Domain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap(), 9, 9).unwrap();
        let q = CutQuadrature::new(&g);
        let area = q.integrate(|_| 1.0);
        assert!((area - 4.0).abs() < 1e-13);
        let second = q.integrate(|p| p.x * p.x + p.x * p.y + 3.0 * p.y * p.y);
        assert!((second - (4.0 / 3.0 + 4.0)).abs() < 1e-12);
        // |x - y²| with the cut matches the interpolated cut up to O(h²)
        let signed = q.integrate(|p| p.type_change());
        assert!((signed - (-4.0 / 3.0)).abs() < 1e-12);
        let sides: f64 = q.integrate(|p| if p.side == Side::Elliptic { 1.0 } else { 0.0 });
        // area of x > y² within the square is 4/3
        assert!((sides - 4.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn norm_examples() {
        let g = Grid2D::new(&Domain::rectangle(1.0, 2.0, 0.0, 1.0).unwrap(), 11, 11).unwrap();
        let q = CutQuadrature::new(&g);
        let zero = vec![0.0; g.len()];
        let n0 = weighted_norms(&g, &q, &zero).unwrap();
        assert_eq!((n0.l2_weighted, n0.l2_dual_weighted, n0.h1_weighted), (0.0, 0.0, 0.0));
        let one = g.sample(|_, _| 1.0);
        let n1 = weighted_norms(&g, &q, &one).unwrap();
        assert!((n1.l2_weighted.powi(2) - 7.0 / 6.0).abs() < 1e-12);
        let u = g.sample(|x, y| (x * y).sin() + y);
        let a = weighted_norms(&g, &q, &u).unwrap();
        let b = weighted_norms(&g, &q, &u.iter().map(|v| 2.0 * v).collect::<Vec<_>>()).unwrap();
        assert!((b.l2_weighted - 2.0 * a.l2_weighted).abs() < 1e-13);
        assert!((b.l2_dual_weighted - 2.0 * a.l2_dual_weighted).abs() < 1e-12);
        assert!((b.h1_weighted - 2.0 * a.h1_weighted).abs() < 1e-13);
    }

    #[test]
    fn dual_norm_singular_on_crossed_support() {
        let g = Grid2D::new(&Domain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap(), 9, 9).unwrap();
        let q = CutQuadrature::new(&g);
        let one = g.sample(|_, _| 1.0);
        assert!(matches!(weighted_norms(&g, &q, &one), Err(WeakError::DualNormSingular { .. })));
        let n = weighted_norms_excluding(&g, &q, &one).unwrap();
        assert!(n.excluded_measure > 0.0 && n.l2_dual_weighted.is_finite());
    }
}
