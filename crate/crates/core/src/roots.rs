//! Bracketed bisection for functions with known poles.
//!
//! The bracket is cut at every known pole, each piece is sampled on a grid
//! that is doubled until the number of sign changes stops growing, and every
//! sign change is refined by bisection. A sign change whose bisection limit
//! does not shrink `|f|` is a pole, not a root.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("sign change near {at:e} is a pole after {cells} cells; subdivide the bracket [{lo:e}, {hi:e}]")]
    BracketTooWide { lo: f64, hi: f64, at: f64, cells: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketOptions {
    /// Bisection stops when the bracket width is below `rel_tol * |x|`.
    pub rel_tol: f64,
    pub initial_cells: usize,
    pub max_cells: usize,
    /// Relative gap kept on either side of each known pole.
    pub pole_gap: f64,
}

impl Default for BracketOptions {
    fn default() -> Self {
        BracketOptions { rel_tol: 1e-12, initial_cells: 1 << 10, max_cells: 1 << 16, pole_gap: 1e-7 }
    }
}

/// All roots of `f` in `[lo, hi]`, ascending.
pub fn find_roots<F>(f: F, lo: f64, hi: f64, poles: &[f64], opts: &BracketOptions) -> Result<Vec<f64>, RootError>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(RootError::InvalidBracket { lo, hi });
    }
    let mut cuts: Vec<f64> = poles.iter().copied().filter(|p| *p > lo && *p < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut pieces = Vec::with_capacity(cuts.len() + 1);
    let mut left = lo;
    for pole in &cuts {
        let gap = opts.pole_gap * pole.abs().max(f64::MIN_POSITIVE);
        if pole - gap > left {
            pieces.push((left, pole - gap));
        }
        left = pole + gap;
    }
    if left < hi {
        pieces.push((left, hi));
    }

    let mut roots = Vec::new();
    for (a, b) in pieces {
        roots.extend(roots_in_piece(&f, a, b, opts)?);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 4.0 * opts.rel_tol * x.abs().max(y.abs()));
    Ok(roots)
}

fn grid(a: f64, b: f64, cells: usize) -> Vec<f64> {
    let logarithmic = a > 0.0 && b / a > 100.0;
    (0..=cells)
        .map(|k| {
            let t = k as f64 / cells as f64;
            if k == cells {
                b
            } else if logarithmic {
                a * (b / a).powf(t)
            } else {
                a + (b - a) * t
            }
        })
        .collect()
}

fn sign_cells<F: Fn(f64) -> f64>(f: &F, xs: &[f64]) -> (Vec<f64>, Vec<(f64, f64, f64, f64)>) {
    let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut exact = Vec::new();
    let mut cells = Vec::new();
    for k in 0..xs.len() {
        if values[k] == 0.0 {
            exact.push(xs[k]);
        }
        if k + 1 < xs.len() {
            let (fa, fb) = (values[k], values[k + 1]);
            if fa.is_finite() && fb.is_finite() && fa * fb < 0.0 {
                cells.push((xs[k], xs[k + 1], fa, fb));
            }
        }
    }
    (exact, cells)
}

fn roots_in_piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: &BracketOptions) -> Result<Vec<f64>, RootError> {
    let mut cells = opts.initial_cells.clamp(1, opts.max_cells);
    let (mut exact, mut changes) = sign_cells(f, &grid(a, b, cells));
    let mut stable = 0;
    while cells < opts.max_cells && stable < 2 {
        cells *= 2;
        let (e, c) = sign_cells(f, &grid(a, b, cells));
        if c.len() + e.len() == changes.len() + exact.len() {
            stable += 1;
        } else {
            stable = 0;
        }
        exact = e;
        changes = c;
    }

    let mut out = exact;
    for (lo, hi, flo, fhi) in changes {
        let x = bisect(f, lo, hi, flo, opts.rel_tol);
        let fx = f(x);
        if !(fx.abs() <= flo.abs().min(fhi.abs())) {
            return Err(RootError::BracketTooWide { lo: a, hi: b, at: x, cells });
        }
        out.push(x);
    }
    Ok(out)
}

/// Plain bisection on a sign-change bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, mut flo: f64, rel_tol: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * mid.abs() || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
