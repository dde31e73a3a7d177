//! Least-squares solve of `L u = f` with `u = 0` on the whole boundary.
//!
//! One equation per domain node (one-sided stencils on the boundary), one
//! unknown per interior node. The dense system is factored with a column
//! pivoted QR and the basic solution is returned.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::qr::col_pivoting::factor as cpqr;
use faer::linalg::qr::no_pivoting::factor::recommended_blocksize;
use faer::{Conj, Mat, Par};
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{Domain, Grid2D, NodeKind};
use super::operator::operator_row;
use super::quadrature::{weighted_norms_excluding, CutQuadrature};
use super::{check_kappa, WeakError};

/// Relative threshold on `|R_ii| / |R_00|` for the numerical rank.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSolution {
    pub values: Vec<f64>,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub condition_estimate: f64,
    pub rank: usize,
    pub unknowns: usize,
    pub l2_weighted: f64,
    pub h1_weighted: f64,
}

/// Result of a rank-revealing least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub rank: usize,
    pub condition_estimate: f64,
}

/// Basic solution of `min ‖A x - b‖` via column-pivoted Householder QR,
/// single threaded. Columns beyond the numerical rank are set to zero.
pub fn pivoted_least_squares(a: &Mat<f64>, b: &[f64]) -> Result<LeastSquares, WeakError> {
    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(b.len(), m);
    if n == 0 {
        return Ok(LeastSquares { x: Vec::new(), rank: 0, condition_estimate: 1.0 });
    }
    if m < n {
        return Err(WeakError::InvalidGrid(format!("{m} equations for {n} unknowns")));
    }
    if a.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) || b.iter().any(|v| !v.is_finite()) {
        return Err(WeakError::FactorizationFailure { condition: f64::NAN });
    }
    let size = m.min(n);
    let blocksize = recommended_blocksize::<f64>(m, n);
    let mut qr = a.clone();
    let mut coeff = Mat::<f64>::zeros(blocksize, size);
    let mut fwd = vec![0usize; n];
    let mut bwd = vec![0usize; n];
    {
        let req = cpqr::qr_in_place_scratch::<usize, f64>(m, n, blocksize, Par::Seq, Default::default());
        let mut buf = MemBuffer::new(req);
        cpqr::qr_in_place(qr.as_mut(), coeff.as_mut(), &mut fwd, &mut bwd, Par::Seq, MemStack::new(&mut buf), Default::default());
    }
    let diag: Vec<f64> = (0..size).map(|i| qr[(i, i)].abs()).collect();
    let top = diag[0];
    if top == 0.0 {
        return Ok(LeastSquares { x: vec![0.0; n], rank: 0, condition_estimate: f64::INFINITY });
    }
    let rank = diag.iter().take_while(|&&d| d > RANK_TOL * top).count();
    let condition_estimate = top / diag[rank - 1];

    let mut basis = Mat::<f64>::zeros(m, size);
    for j in 0..size {
        basis[(j, j)] = 1.0;
        for i in j + 1..m {
            basis[(i, j)] = qr[(i, j)];
        }
    }
    let mut rhs = Mat::<f64>::from_fn(m, 1, |i, _| b[i]);
    {
        let req = householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(m, blocksize, 1);
        let mut buf = MemBuffer::new(req);
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            basis.as_ref(),
            coeff.as_ref(),
            Conj::No,
            rhs.as_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
        );
    }
    let mut y = vec![0.0; n];
    for i in (0..rank).rev() {
        let mut acc = rhs[(i, 0)];
        for j in i + 1..rank {
            acc -= qr[(i, j)] * y[j];
        }
        y[i] = acc / qr[(i, i)];
    }
    let mut x = vec![0.0; n];
    for (j, &col) in fwd.iter().enumerate() {
        x[col] = y[j];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(WeakError::FactorizationFailure { condition: condition_estimate });
    }
    Ok(LeastSquares { x, rank, condition_estimate })
}

struct Assembly {
    matrix: Mat<f64>,
    rows: Vec<usize>,
    unknowns: Vec<usize>,
}

fn assemble(grid: &Grid2D, kappa: f64) -> Assembly {
    let rows = grid.domain_nodes();
    let unknowns = grid.interior_nodes();
    let mut column = vec![usize::MAX; grid.len()];
    for (c, &k) in unknowns.iter().enumerate() {
        column[k] = c;
    }
    let stencils: Vec<Vec<(usize, f64)>> = rows
        .par_iter()
        .map(|&k| {
            operator_row(grid, k, kappa)
                .into_iter()
                .filter(|&(n, _)| column[n] != usize::MAX)
                .map(|(n, w)| (column[n], w))
                .collect()
        })
        .collect();
    let mut matrix = Mat::<f64>::zeros(rows.len(), unknowns.len());
    for (r, st) in stencils.iter().enumerate() {
        for &(c, w) in st {
            matrix[(r, c)] += w;
        }
    }
    Assembly { matrix, rows, unknowns }
}

fn residual(a: &Mat<f64>, x: &[f64], b: &[f64]) -> f64 {
    (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let row: f64 = (0..a.ncols()).filter(|&j| x[j] != 0.0).map(|j| a[(i, j)] * x[j]).sum();
            (row - b[i]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// `forcing` holds nodal values of `f`; entries off the domain are ignored.
pub fn solve_closed_dirichlet(grid: &Grid2D, kappa: f64, forcing: &[f64]) -> Result<DiscreteSolution, WeakError> {
    check_kappa(kappa, 0.0, 2.0)?;
    if forcing.len() != grid.len() {
        return Err(WeakError::LengthMismatch { expected: grid.len(), got: forcing.len() });
    }
    let asm = assemble(grid, kappa);
    let b: Vec<f64> = asm.rows.iter().map(|&k| forcing[k]).collect();
    let ls = pivoted_least_squares(&asm.matrix, &b)?;
    let mut values = vec![0.0; grid.len()];
    for (c, &k) in asm.unknowns.iter().enumerate() {
        values[k] = ls.x[c];
    }
    let quad = CutQuadrature::new(grid);
    let norms = weighted_norms_excluding(grid, &quad, &values)?;
    Ok(DiscreteSolution {
        values,
        residual_norm: residual(&asm.matrix, &ls.x, &b),
        rhs_norm: b.iter().map(|v| v * v).sum::<f64>().sqrt(),
        condition_estimate: ls.condition_estimate,
        rank: ls.rank,
        unknowns: asm.unknowns.len(),
        l2_weighted: norms.l2_weighted,
        h1_weighted: norms.h1_weighted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IllposednessPoint {
    pub h: f64,
    pub cond: f64,
}

/// Condition estimates of the closed Dirichlet system at each level, where a
/// level is the number of nodes per axis.
pub fn illposedness_diagnostic(domain: &Domain, levels: &[usize], kappa: f64) -> Result<Vec<IllposednessPoint>, WeakError> {
    if levels.len() < 3 {
        return Err(WeakError::InsufficientLevels { got: levels.len() });
    }
    check_kappa(kappa, 0.0, 2.0)?;
    levels
        .iter()
        .map(|&n| {
            let grid = Grid2D::new(domain, n, n)?;
            let asm = assemble(&grid, kappa);
            let b = vec![0.0; asm.rows.len()];
            let ls = pivoted_least_squares(&asm.matrix, &b)?;
            Ok(IllposednessPoint { h: grid.h(), cond: ls.condition_estimate })
        })
        .collect()
}

/// Discrete L² distance `h_x h_y Σ (u - v)²` over domain nodes, square rooted.
pub fn nodal_l2_distance(grid: &Grid2D, u: &[f64], v: &[f64]) -> f64 {
    let sum: f64 = (0..grid.len()).filter(|&k| grid.kind(k) != NodeKind::Outside).map(|k| (u[k] - v[k]).powi(2)).sum();
    (sum * grid.hx * grid.hy).sqrt()
}
