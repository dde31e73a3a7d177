//! Finite differences for `(x - y²) ∂xx + ∂yy + κ ∂x`.
//!
//! Centered three-point stencils wherever both neighbours lie in the domain,
//! second-order one-sided stencils otherwise. All stencils are exact on
//! quadratics.

use super::grid::Grid2D;

pub type Stencil = Vec<(usize, f64)>;

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn offsets(grid: &Grid2D, k: usize, axis: Axis) -> (isize, isize, f64, impl Fn(isize) -> (isize, isize)) {
    let (i, j) = grid.ij(k);
    let (i, j) = (i as isize, j as isize);
    let h = match axis {
        Axis::X => grid.hx,
        Axis::Y => grid.hy,
    };
    let at = move |d: isize| match axis {
        Axis::X => (i + d, j),
        Axis::Y => (i, j + d),
    };
    (i, j, h, at)
}

fn node(grid: &Grid2D, p: (isize, isize)) -> usize {
    grid.index(p.0 as usize, p.1 as usize)
}

fn second(grid: &Grid2D, k: usize, axis: Axis) -> Stencil {
    let (_, _, h, at) = offsets(grid, k, axis);
    let ok = |d: isize| {
        let p = at(d);
        grid.in_domain(p.0, p.1)
    };
    let h2 = h * h;
    let weights: &[(isize, f64)] = if ok(-1) && ok(1) {
        &[(-1, 1.0), (0, -2.0), (1, 1.0)]
    } else if ok(1) && ok(2) && ok(3) {
        &[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if ok(-1) && ok(-2) && ok(-3) {
        &[(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
    } else if ok(1) && ok(2) {
        &[(0, 1.0), (1, -2.0), (2, 1.0)]
    } else if ok(-1) && ok(-2) {
        &[(0, 1.0), (-1, -2.0), (-2, 1.0)]
    } else {
        &[]
    };
    weights.iter().map(|&(d, w)| (node(grid, at(d)), w / h2)).collect()
}

fn first(grid: &Grid2D, k: usize, axis: Axis) -> Stencil {
    let (_, _, h, at) = offsets(grid, k, axis);
    let ok = |d: isize| {
        let p = at(d);
        grid.in_domain(p.0, p.1)
    };
    let weights: &[(isize, f64)] = if ok(-1) && ok(1) {
        &[(-1, -0.5), (1, 0.5)]
    } else if ok(1) && ok(2) {
        &[(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if ok(-1) && ok(-2) {
        &[(0, 1.5), (-1, -2.0), (-2, 0.5)]
    } else if ok(1) {
        &[(0, -1.0), (1, 1.0)]
    } else if ok(-1) {
        &[(-1, -1.0), (0, 1.0)]
    } else {
        &[]
    };
    weights.iter().map(|&(d, w)| (node(grid, at(d)), w / h)).collect()
}

pub fn dx_stencil(grid: &Grid2D, k: usize) -> Stencil {
    first(grid, k, Axis::X)
}

pub fn dy_stencil(grid: &Grid2D, k: usize) -> Stencil {
    first(grid, k, Axis::Y)
}

pub fn dxx_stencil(grid: &Grid2D, k: usize) -> Stencil {
    second(grid, k, Axis::X)
}

pub fn dyy_stencil(grid: &Grid2D, k: usize) -> Stencil {
    second(grid, k, Axis::Y)
}

/// Row of `(x - y²) ∂xx + ∂yy + drift ∂x` at node `k`.
pub fn operator_row(grid: &Grid2D, k: usize, drift: f64) -> Stencil {
    let (x, y) = grid.coords(k);
    let weight = x - y * y;
    let mut row: Stencil = dxx_stencil(grid, k).into_iter().map(|(n, w)| (n, weight * w)).collect();
    row.extend(dyy_stencil(grid, k));
    row.extend(dx_stencil(grid, k).into_iter().map(|(n, w)| (n, drift * w)));
    row
}

fn apply_with(grid: &Grid2D, u: &[f64], drift: f64) -> Vec<f64> {
    assert_eq!(u.len(), grid.len(), "field size does not match the grid");
    (0..grid.len())
        .map(|k| {
            if grid.in_domain(grid.ij(k).0 as isize, grid.ij(k).1 as isize) {
                operator_row(grid, k, drift).iter().map(|&(n, w)| w * u[n]).sum()
            } else {
                0.0
            }
        })
        .collect()
}

/// `L u` at every domain node; zero elsewhere.
pub fn apply_l(grid: &Grid2D, u: &[f64], kappa: f64) -> Vec<f64> {
    apply_with(grid, u, kappa)
}

/// `L* u`, the same operator with drift `2 - κ`.
pub fn apply_l_adjoint(grid: &Grid2D, u: &[f64], kappa: f64) -> Vec<f64> {
    apply_with(grid, u, 2.0 - kappa)
}

fn apply_stencil(grid: &Grid2D, u: &[f64], stencil: fn(&Grid2D, usize) -> Stencil) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            if grid.in_domain(i as isize, j as isize) {
                stencil(grid, k).iter().map(|&(n, w)| w * u[n]).sum()
            } else {
                0.0
            }
        })
        .collect()
}

/// Nodal `(u_x, u_y)`.
pub fn gradient(grid: &Grid2D, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (apply_stencil(grid, u, dx_stencil), apply_stencil(grid, u, dy_stencil))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::grid::Domain;

    fn grid() -> Grid2D {
        Grid2D::new(&Domain::rectangle(-1.0, 1.0, -0.5, 1.5).unwrap(), 11, 9).unwrap()
    }

    #[test]
    fn polynomial_examples() {
        let g = grid();
        let kappa = 0.7;
        let one = g.sample(|_, _| 1.0);
        assert!(apply_l(&g, &one, kappa).iter().all(|v| v.abs() < 1e-12));
        let x = g.sample(|x, _| x);
        assert!(apply_l(&g, &x, kappa).iter().all(|v| (v - kappa).abs() < 1e-12));
        let half_square = g.sample(|x, _| 0.5 * x * x);
        let lu = apply_l(&g, &half_square, kappa);
        for k in 0..g.len() {
            let (x, y) = g.coords(k);
            assert!((lu[k] - ((x - y * y) + kappa * x)).abs() < 1e-11, "{k}");
        }
        let mixed = g.sample(|x, y| x * y + y * y);
        let lu = apply_l(&g, &mixed, kappa);
        for k in 0..g.len() {
            let (_, y) = g.coords(k);
            assert!((lu[k] - (2.0 + kappa * y)).abs() < 1e-11);
        }
    }

    #[test]
    fn adjoint_examples() {
        let g = grid();
        let u = g.sample(|x, y| (x * 3.0).sin() * (y + 0.2).cos());
        assert_eq!(apply_l(&g, &u, 1.0), apply_l_adjoint(&g, &u, 1.0));
        let x = g.sample(|x, _| x);
        assert!(apply_l_adjoint(&g, &x, 0.0).iter().all(|v| (v - 2.0).abs() < 1e-12));
        let back = 2.0 - (2.0 - 0.3);
        assert_eq!(apply_l_adjoint(&g, &u, 2.0 - 0.3), apply_l(&g, &u, back));
    }
}
