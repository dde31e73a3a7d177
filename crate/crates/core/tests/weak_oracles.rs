use coldwave_core::weak::dirichlet::nodal_l2_distance;
use coldwave_core::weak::energy::{energy_pairing, eval_bumps, identity_integral, seeded_trials, MultiplierSpec};
use coldwave_core::weak::mixed::{solve_mixed, MixedMultiplierSpec};
use coldwave_core::weak::problem::{manufactured_forcing, manufactured_solution};
use coldwave_core::weak::{illposedness_diagnostic, solve_closed_dirichlet, CutQuadrature, Domain, Grid2D, WeakError};

fn square() -> Domain {
    Domain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap()
}

#[test]
fn pairing_agrees_with_integrated_identity() {
    let d = square();
    let g = Grid2D::new(&d, 161, 161).unwrap();
    let q = CutQuadrature::new(&g);
    for kappa in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let spec = MultiplierSpec::new(kappa, &d).unwrap();
        for bumps in seeded_trials(3, 4) {
            let u = g.sample(|x, y| eval_bumps(&bumps, x, y));
            let direct = energy_pairing(&g, &q, &u, &spec).unwrap().lhs;
            let identity = identity_integral(&g, &q, &u, &spec);
            assert!((direct - identity).abs() < 2e-2 * identity.abs(), "kappa {kappa}: {direct} vs {identity}");
        }
    }
}

#[test]
fn elliptic_manufactured_solution_converges() {
    let d = Domain::rectangle(1.5, 2.5, -0.4, 0.4).unwrap();
    let kappa = 0.5;
    let errors: Vec<f64> = [9, 17, 33]
        .iter()
        .map(|&n| {
            let g = Grid2D::new(&d, n, n).unwrap();
            let f = g.sample(|x, y| manufactured_forcing(x, y, kappa));
            let s = solve_closed_dirichlet(&g, kappa, &f).unwrap();
            nodal_l2_distance(&g, &s.values, &g.sample(manufactured_solution))
        })
        .collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.0, "{errors:?}");
    }
}

#[test]
fn condition_grows_faster_through_the_origin() {
    let levels = [9, 13, 17];
    let origin = illposedness_diagnostic(&square(), &levels, 0.5).unwrap();
    let elliptic = illposedness_diagnostic(&Domain::rectangle(1.5, 2.5, -0.4, 0.4).unwrap(), &levels, 0.5).unwrap();
    assert!(origin.windows(2).all(|w| w[1].cond >= w[0].cond), "{origin:?}");
    let growth = |p: &[coldwave_core::weak::IllposednessPoint]| p[2].cond / p[1].cond;
    assert!(growth(&origin) > growth(&elliptic), "{origin:?} {elliptic:?}");
    assert!(matches!(illposedness_diagnostic(&square(), &[9, 17], 0.5), Err(WeakError::InsufficientLevels { got: 2 })));
}

#[test]
fn mixed_residual_is_small_on_the_quadrant_box() {
    let d = Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
    let g = Grid2D::new(&d, 33, 33).unwrap();
    let spec = MixedMultiplierSpec::new(&d).unwrap();
    let f1 = g.sample(|x, y| (x + 2.0 * y).sin() + 1.0);
    let f2 = g.sample(|x, y| (3.0 * x - y).cos());
    let s = solve_mixed(&g, 0.0, &[2, 3], &spec, &f1, &f2).unwrap();
    assert!(s.residual_norm < 1e-6 * s.rhs_norm);
    assert!(s.integrability.finite && s.integrability.excluded_measure > 0.0);
}

#[test]
fn dirichlet_solution_honours_boundary() {
    let g = Grid2D::new(&square(), 13, 13).unwrap();
    let f = g.sample(|x, y| (x * y).cos());
    let s = solve_closed_dirichlet(&g, 1.0, &f).unwrap();
    for k in g.boundary_nodes() {
        assert_eq!(s.values[k], 0.0);
    }
    assert!(s.condition_estimate.is_finite() && s.residual_norm <= s.rhs_norm);
}
