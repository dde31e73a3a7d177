//! First-order system `𝒦 ∂x u₁ + ∂y u₂ + κ u₁ = f₁`, `∂y u₁ - ∂x u₂ = f₂`
//! with `u₁ = 0` on `G` and `u₂ = 0` on the rest of the boundary.

use serde::Serialize;

use super::grid::{BoundarySegment, Domain, Grid2D};
use super::operator::{dx_stencil, dy_stencil};
use super::quadrature::CutQuadrature;
use super::{check_kappa, WeakError};

pub const DEFAULT_MU: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const SIGN_TOL: f64 = -1e-12;
const SAMPLES_PER_AXIS: usize = 201;
/// Relative size below which a Givens pivot counts as zero.
pub const PIVOT_TOL: f64 = 1e-10;
const MAX_REFACTOR: usize = 16;

/// Multiplier `M = [[b, c], [-𝒦 c, b]]` with `b = m𝒦 + s_const`, `c = μy - t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedMultiplierSpec {
    pub mu: f64,
    pub t: f64,
    pub delta: f64,
    pub s_const: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min_b: f64,
    pub min_shifted_cy: f64,
    pub min_determinant: f64,
    pub t_ok: bool,
    pub holds: bool,
}

fn samples(domain: &Domain) -> impl Iterator<Item = (f64, f64)> + '_ {
    let b = domain.bounds();
    let last = (SAMPLES_PER_AXIS - 1) as f64;
    (0..SAMPLES_PER_AXIS * SAMPLES_PER_AXIS).filter_map(move |idx| {
        let (i, j) = (idx % SAMPLES_PER_AXIS, idx / SAMPLES_PER_AXIS);
        let x = b.x0 + (b.x1 - b.x0) * i as f64 / last;
        let y = b.y0 + (b.y1 - b.y0) * j as f64 / last;
        domain.contains(x, y).then_some((x, y))
    })
}

impl MixedMultiplierSpec {
    /// `t = μ y_max + 1` and an automatic `s_const`.
    pub fn new(domain: &Domain) -> Result<Self, WeakError> {
        let t = DEFAULT_MU * domain.bounds().y1.max(0.0) + 1.0;
        Self::with_params(domain, DEFAULT_MU, t, DEFAULT_DELTA)
    }

    pub fn with_params(domain: &Domain, mu: f64, t: f64, delta: f64) -> Result<Self, WeakError> {
        if !(mu > 0.0 && t > 0.0 && delta > 0.0) {
            return Err(WeakError::SpecInvalid(format!("mu {mu}, t {t} and delta {delta} must be positive")));
        }
        let mut spec = MixedMultiplierSpec { mu, t, delta, s_const: 0.0 };
        let mut need: f64 = 0.0;
        for (x, y) in samples(domain) {
            let k = x - y * y;
            let mk = (spec.slope(k) * k).abs();
            let c = spec.c(y);
            need = need.max(mk).max((2.0 * c * y).abs()).max(mk + c.abs() * k.abs().sqrt());
        }
        spec.s_const = 1.0 + 2.0 * need;
        spec.validate(domain)?;
        Ok(spec)
    }

    pub fn slope(&self, k: f64) -> f64 {
        if k > 0.0 {
            0.5 * (self.mu + self.delta)
        } else {
            0.5 * (self.mu - self.delta)
        }
    }

    pub fn b(&self, x: f64, y: f64) -> f64 {
        let k = x - y * y;
        self.slope(k) * k + self.s_const
    }

    pub fn c(&self, y: f64) -> f64 {
        self.mu * y - self.t
    }

    /// `Mᵀ f`
    pub fn transpose_apply(&self, x: f64, y: f64, f: (f64, f64)) -> (f64, f64) {
        let k = x - y * y;
        let (b, c) = (self.b(x, y), self.c(y));
        (b * f.0 - k * c * f.1, c * f.0 + b * f.1)
    }

    pub fn positivity(&self, domain: &Domain) -> PositivityReport {
        let mut r = PositivityReport {
            min_b: f64::INFINITY,
            min_shifted_cy: f64::INFINITY,
            min_determinant: f64::INFINITY,
            t_ok: true,
            holds: true,
        };
        for (x, y) in samples(domain) {
            let k = x - y * y;
            let (b, c) = (self.b(x, y), self.c(y));
            r.min_b = r.min_b.min(b);
            r.min_shifted_cy = r.min_shifted_cy.min(2.0 * c * y + self.s_const);
            r.min_determinant = r.min_determinant.min(b * b + k * c * c);
            r.t_ok &= c < 0.0;
        }
        r.holds = r.min_b > 0.0 && r.min_shifted_cy > 0.0 && r.min_determinant > 0.0 && r.t_ok;
        r
    }

    pub fn validate(&self, domain: &Domain) -> Result<PositivityReport, WeakError> {
        let r = self.positivity(domain);
        if r.holds {
            Ok(r)
        } else {
            Err(WeakError::SpecInvalid(format!("positivity conditions fail: {r:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub id: usize,
    pub on_g: bool,
    /// Extremes of `b dy - c dx` on `G`, or of `𝒦 (b dy - c dx)` off `G`.
    pub min: f64,
    pub max: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub segments: Vec<SegmentReport>,
    pub admissible: bool,
}

impl AdmissibilityReport {
    pub fn failures(&self) -> Vec<usize> {
        self.segments.iter().filter(|s| !s.admissible).map(|s| s.id).collect()
    }
}

/// Evaluates the boundary sign conditions at the nodes and edge midpoints of
/// each segment. On `G` the value must be `≤ 0`, elsewhere `≥ 0`.
pub fn boundary_admissible(segments: &[BoundarySegment], g: &[usize], spec: &MixedMultiplierSpec) -> Result<AdmissibilityReport, WeakError> {
    for &id in g {
        if !segments.iter().any(|s| s.id == id) {
            return Err(WeakError::UnknownSegment(id));
        }
    }
    let mut reports = Vec::with_capacity(segments.len());
    for seg in segments {
        let on_g = g.contains(&seg.id);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let edges = seg.nodes.len().saturating_sub(1).max(1);
        let (dx, dy) = seg.delta();
        let (dx, dy) = (dx / edges as f64, dy / edges as f64);
        for step in 0..=2 * edges {
            let s = 0.5 * step as f64;
            let x = seg.start.0 + s * dx;
            let y = seg.start.1 + s * dy;
            let flux = spec.b(x, y) * dy - spec.c(y) * dx;
            let v = if on_g { flux } else { (x - y * y) * flux };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let admissible = if on_g { -hi >= SIGN_TOL } else { lo >= SIGN_TOL };
        reports.push(SegmentReport { id: seg.id, on_g, min: lo, max: hi, admissible });
    }
    let admissible = reports.iter().all(|r| r.admissible);
    Ok(AdmissibilityReport { segments: reports, admissible })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    /// `∫ |(Mᵀf)₁|² / 𝒦² + |(Mᵀf)₂|²` over cells away from the sonic curve.
    pub weighted_square: f64,
    pub excluded_measure: f64,
    pub finite: bool,
}

/// Samples `𝔎⁻¹ Mᵀ f` with `𝔎 = diag(|𝒦|, 1)`, skipping cells crossed by `𝒦 = 0`.
pub fn integrability(grid: &Grid2D, spec: &MixedMultiplierSpec, f1: &[f64], f2: &[f64]) -> IntegrabilityReport {
    let quad = CutQuadrature::new(grid);
    let excluded_measure = quad.straddling.iter().filter(|&&s| s).count() as f64 * quad.cell_area();
    let weighted_square = quad.integrate(|p| {
        if quad.straddling[p.cell] {
            return 0.0;
        }
        let (g1, g2) = spec.transpose_apply(p.x, p.y, (p.interp(f1), p.interp(f2)));
        let k = p.type_change();
        g1 * g1 / (k * k) + g2 * g2
    });
    IntegrabilityReport { weighted_square, excluded_measure, finite: weighted_square.is_finite() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedSolution {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub condition_estimate: f64,
    pub equations: usize,
    pub unknowns: usize,
    pub rank: usize,
    pub admissibility: AdmissibilityReport,
    pub integrability: IntegrabilityReport,
}

/// Which component is pinned to zero at each node.
fn constraints(grid: &Grid2D, segments: &[BoundarySegment], g: &[usize]) -> (Vec<bool>, Vec<bool>) {
    let mut fix1 = vec![false; grid.len()];
    let mut fix2 = vec![false; grid.len()];
    for seg in segments {
        let target = if g.contains(&seg.id) { &mut fix1 } else { &mut fix2 };
        for &p in &seg.nodes {
            target[p] = true;
        }
    }
    (fix1, fix2)
}

/// Sparse rows solved by sequential Givens rotations into a banded `R`.
struct BandedQr {
    width: usize,
    r: Vec<f64>,
    filled: Vec<bool>,
    qtb: Vec<f64>,
}

impl BandedQr {
    fn new(n: usize, width: usize) -> Self {
        BandedQr { width, r: vec![0.0; n * width], filled: vec![false; n], qtb: vec![0.0; n] }
    }

    /// Rows must arrive in nondecreasing order of their first column.
    fn push(&mut self, row: &[(usize, f64)], mut beta: f64) {
        let w = self.width;
        let c0 = row.iter().map(|e| e.0).min().expect("empty row");
        let mut buf = vec![0.0; w];
        for &(c, v) in row {
            buf[c - c0] += v;
        }
        for p in 0..w {
            let col = c0 + p;
            if buf[p] == 0.0 || col >= self.filled.len() {
                continue;
            }
            let base = col * w;
            if !self.filled[col] {
                self.r[base..base + w - p].copy_from_slice(&buf[p..]);
                self.filled[col] = true;
                self.qtb[col] = beta;
                return;
            }
            let (a, b) = (self.r[base], buf[p]);
            let rho = a.hypot(b);
            let (cs, sn) = (a / rho, b / rho);
            for k in 0..w - p {
                let (ri, bi) = (self.r[base + k], buf[p + k]);
                self.r[base + k] = cs * ri + sn * bi;
                buf[p + k] = -sn * ri + cs * bi;
            }
            buf[p] = 0.0;
            let q = self.qtb[col];
            self.qtb[col] = cs * q + sn * beta;
            beta = -sn * q + cs * beta;
        }
    }

    /// Positions whose pivot is missing or below `PIVOT_TOL` times the largest.
    fn weak_pivots(&self) -> Vec<usize> {
        let w = self.width;
        let hi = (0..self.filled.len()).filter(|&i| self.filled[i]).map(|i| self.r[i * w].abs()).fold(0.0, f64::max);
        (0..self.filled.len()).filter(|&i| !self.filled[i] || self.r[i * w].abs() <= PIVOT_TOL * hi).collect()
    }

    fn back_substitute(&self) -> (Vec<f64>, f64) {
        let n = self.filled.len();
        let w = self.width;
        let diag = (0..n).map(|i| self.r[i * w].abs());
        let hi = diag.clone().fold(0.0, f64::max);
        let lo = diag.fold(f64::INFINITY, f64::min);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let base = i * w;
            let mut acc = self.qtb[i];
            for k in 1..w.min(n - i) {
                acc -= self.r[base + k] * x[i + k];
            }
            x[i] = acc / self.r[base];
        }
        (x, if n == 0 { 1.0 } else { hi / lo })
    }
}

type SparseRow = (Vec<(usize, f64)>, f64);

/// Basic least-squares solution. Columns with vanishing pivots are removed
/// and the reduced system refactored until every pivot is significant.
fn banded_least_squares(rows: &[SparseRow], n: usize) -> Result<(Vec<f64>, f64, usize), WeakError> {
    let mut keep = vec![true; n];
    for _ in 0..MAX_REFACTOR {
        let mut map = vec![usize::MAX; n];
        let mut m = 0;
        for (c, slot) in map.iter_mut().enumerate() {
            if keep[c] {
                *slot = m;
                m += 1;
            }
        }
        let mut reduced: Vec<SparseRow> = rows
            .iter()
            .map(|(row, beta)| (row.iter().filter(|e| keep[e.0]).map(|&(c, v)| (map[c], v)).collect(), *beta))
            .collect();
        reduced.sort_by_key(|r| r.0.iter().map(|e| e.0).min().unwrap_or(usize::MAX));
        let width = reduced
            .iter()
            .filter_map(|r| {
                let lo = r.0.iter().map(|e| e.0).min()?;
                let hi = r.0.iter().map(|e| e.0).max()?;
                Some(hi - lo + 1)
            })
            .max()
            .unwrap_or(1);
        let mut qr = BandedQr::new(m, width);
        for (row, beta) in &reduced {
            if !row.is_empty() {
                qr.push(row, *beta);
            }
        }
        let weak = qr.weak_pivots();
        if weak.is_empty() {
            let (y, condition) = qr.back_substitute();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(WeakError::FactorizationFailure { condition });
            }
            let mut x = vec![0.0; n];
            for c in 0..n {
                if keep[c] {
                    x[c] = y[map[c]];
                }
            }
            return Ok((x, condition, m));
        }
        let inverse: Vec<usize> = (0..n).filter(|&c| keep[c]).collect();
        for i in weak {
            keep[inverse[i]] = false;
        }
    }
    Err(WeakError::FactorizationFailure { condition: f64::INFINITY })
}

/// Least-squares solve after checking the boundary signs for `G`.
pub fn solve_mixed(
    grid: &Grid2D,
    kappa: f64,
    g: &[usize],
    spec: &MixedMultiplierSpec,
    f1: &[f64],
    f2: &[f64],
) -> Result<MixedSolution, WeakError> {
    check_kappa(kappa, 0.0, 1.0)?;
    for f in [f1, f2] {
        if f.len() != grid.len() {
            return Err(WeakError::LengthMismatch { expected: grid.len(), got: f.len() });
        }
    }
    let segments = grid.boundary_segments();
    let admissibility = boundary_admissible(&segments, g, spec)?;
    if !admissibility.admissible {
        return Err(WeakError::InadmissibleBoundary(format!("segments {:?} violate the sign conditions", admissibility.failures())));
    }
    let (fix1, fix2) = constraints(grid, &segments, g);
    let nodes = grid.domain_nodes();
    let mut column = vec![[usize::MAX; 2]; grid.len()];
    let mut n = 0;
    for &k in &nodes {
        for (comp, fixed) in [(0, fix1[k]), (1, fix2[k])] {
            if !fixed {
                column[k][comp] = n;
                n += 1;
            }
        }
    }
    let mut rows: Vec<SparseRow> = Vec::with_capacity(n);
    for &k in &nodes {
        let (x, y) = grid.coords(k);
        let weight = x - y * y;
        let dx = dx_stencil(grid, k);
        let dy = dy_stencil(grid, k);
        let mut push = |terms: Vec<(usize, usize, f64)>, rhs: f64| {
            let row: Vec<(usize, f64)> = terms
                .into_iter()
                .filter(|&(node, comp, _)| column[node][comp] != usize::MAX)
                .map(|(node, comp, v)| (column[node][comp], v))
                .collect();
            rows.push((row, rhs));
        };
        if !fix1[k] {
            let mut t: Vec<(usize, usize, f64)> = dx.iter().map(|&(m, v)| (m, 0, weight * v)).collect();
            t.extend(dy.iter().map(|&(m, v)| (m, 1, v)));
            t.push((k, 0, kappa));
            push(t, f1[k]);
        }
        if !fix2[k] {
            let mut t: Vec<(usize, usize, f64)> = dy.iter().map(|&(m, v)| (m, 0, v)).collect();
            t.extend(dx.iter().map(|&(m, v)| (m, 1, -v)));
            push(t, f2[k]);
        }
    }
    let rhs_norm = rows.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt();
    let (x, condition_estimate, rank) = banded_least_squares(&rows, n)?;
    let residual_norm = rows
        .iter()
        .map(|(row, beta)| (row.iter().map(|&(c, v)| v * x[c]).sum::<f64>() - beta).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut u1 = vec![0.0; grid.len()];
    let mut u2 = vec![0.0; grid.len()];
    for &k in &nodes {
        if column[k][0] != usize::MAX {
            u1[k] = x[column[k][0]];
        }
        if column[k][1] != usize::MAX {
            u2[k] = x[column[k][1]];
        }
    }
    Ok(MixedSolution {
        u1,
        u2,
        residual_norm,
        rhs_norm,
        condition_estimate,
        equations: rows.len(),
        unknowns: n,
        rank,
        admissibility,
        integrability: integrability(grid, spec, f1, f2),
    })
}
