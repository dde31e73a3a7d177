//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero when any of them fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use coldwave_core::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, PROTON_MASS, VACUUM_PERMITTIVITY};
use coldwave_core::dispersion::{f_squared_factored, hybrid_resonances, refractive_indices, wave_normal_coefficients};
use coldwave_core::electrostatics::{integrate_layered, ElectrostaticsError, LayeredProblem};
use coldwave_core::fields::{AffineQuadratic, FnField};
use coldwave_core::plasma::{
    dielectric_tensor, displacement, plasma_current, stix_parameters, ChargeSign, PlasmaState, Species, StixParameters,
};
use coldwave_core::typegeometry::{
    canonical_case_classify, coulomb_gauge_symbol, curl_curl_symbol, fit_origin_characteristic, origin_characteristics,
    SonicPointClass,
};
use coldwave_core::weak::dirichlet::nodal_l2_distance;
use coldwave_core::weak::energy::{seeded_trials, EnergyCheck, MultiplierSpec};
use coldwave_core::weak::mixed::{boundary_admissible, solve_mixed, MixedMultiplierSpec};
use coldwave_core::weak::problem::{manufactured_forcing, manufactured_solution};
use coldwave_core::weak::{illposedness_diagnostic, solve_closed_dirichlet, Domain, Grid2D};
use coldwave_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Roots of `a t² + b t + c`, avoiding cancellation between `b` and the root
/// of the discriminant.
fn quadratic(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
    let q = if b >= 0.0 { -0.5 * (b + disc) } else { -0.5 * (b - disc) };
    [q / a, c / q]
}

fn same_pair(got: &[Complex64], want: [f64; 2], tol: f64) -> bool {
    let close = |z: Complex64, w: f64| (z - w).norm() <= tol * w.abs().max(1e-300);
    got.len() == 2 && ((close(got[0], want[0]) && close(got[1], want[1])) || (close(got[0], want[1]) && close(got[1], want[0])))
}

fn random_stix(rng: &mut ChaCha8Rng) -> StixParameters {
    loop {
        let stix = StixParameters::from_rlp(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if stix.s.abs() > 1e-3 && stix.p.abs() > 1e-3 {
            return stix;
        }
    }
}

fn vacuum_dispersion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stix = stix_parameters(&PlasmaState::vacuum(), 1e9).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let theta = rng.gen_range(0.0..PI);
        let sol = refractive_indices(&wave_normal_coefficients(&stix, theta)).unwrap();
        for z in sol.roots() {
            worst = worst.max((z - 1.0).norm());
        }
        if sol.roots().len() != 2 {
            return outcome(false, format!("theta {theta}: {} finite roots", sol.roots().len()));
        }
    }
    outcome(worst <= 1e-12, format!("max |n^2 - 1| = {worst:.2e}"))
}

fn principal_angles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let stix = random_stix(&mut rng);
        for (theta, want) in [(0.0, [stix.r, stix.l]), (FRAC_PI_2, [stix.r * stix.l / stix.s, stix.p])] {
            let c = wave_normal_coefficients(&stix, theta);
            let got = refractive_indices(&c).unwrap().roots();
            let (sin2, cos2) = (theta.sin().powi(2), theta.cos().powi(2));
            let a = stix.s * sin2 + stix.p * cos2;
            let b = stix.r * stix.l * sin2 + stix.p * stix.s * (1.0 + cos2);
            let oracle = quadratic(a, -b, stix.p * stix.r * stix.l);
            let oracle_matches = same_pair(&oracle, want, 1e-8);
            if !same_pair(&got, want, 1e-8) || !oracle_matches {
                return outcome(false, format!("{stix:?} theta {theta}: got {got:?}, oracle {oracle:?}, want {want:?}"));
            }
        }
    }
    outcome(true, "1000 tuples at 0 and pi/2")
}

fn discriminant_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let stix = random_stix(&mut rng);
        let theta = rng.gen_range(0.0..PI);
        let (sin2, cos2) = (theta.sin().powi(2), theta.cos().powi(2));
        let a = stix.s * sin2 + stix.p * cos2;
        let b = stix.r * stix.l * sin2 + stix.p * stix.s * (1.0 + cos2);
        let c = stix.p * stix.r * stix.l;
        let direct = b * b - 4.0 * a * c;
        let factored = (stix.r * stix.l - stix.p * stix.s).powi(2) * sin2 * sin2 + 4.0 * stix.p.powi(2) * stix.d.powi(2) * cos2;
        let scale = b * b + (4.0 * a * c).abs();
        worst = worst.max((direct - factored).abs() / scale.max(f64::MIN_POSITIVE));
        worst = worst.max((f_squared_factored(&stix, theta) - factored).abs() / scale.max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-10, format!("max relative defect {worst:.2e}"))
}

fn stix_spot_value() -> Outcome {
    let b0 = 1.0;
    let cyclotron = ELEMENTARY_CHARGE * b0 / ELECTRON_MASS;
    let density = VACUUM_PERMITTIVITY * ELECTRON_MASS * cyclotron * cyclotron / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE);
    let plasma = PlasmaState::new(vec![Species::electron(density).unwrap()], b0).unwrap();
    let s = stix_parameters(&plasma, 2.0 * cyclotron).unwrap();
    let want = [0.5, 5.0 / 6.0, 2.0 / 3.0, -1.0 / 6.0, 0.75];
    let got = [s.r, s.l, s.s, s.d, s.p];
    let worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    outcome(worst <= 1e-14, format!("max deviation {worst:.2e}"))
}

fn consistency_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut states = 0;
    while states < 100 {
        let (mass, sign) = if rng.gen_bool(0.5) {
            (ELECTRON_MASS, ChargeSign::Negative)
        } else {
            (PROTON_MASS * rng.gen_range(1.0..4.0), ChargeSign::Positive)
        };
        let species = Species::new("s", mass, sign, rng.gen_range(1..3), 10f64.powf(rng.gen_range(16.0..20.0))).unwrap();
        let plasma = PlasmaState::new(vec![species], rng.gen_range(0.1..5.0)).unwrap();
        let omega = plasma.max_frequency() * 10f64.powf(rng.gen_range(-1.0..1.0));
        let Ok(stix) = stix_parameters(&plasma, omega) else { continue };
        let e = [(); 3].map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let ke = dielectric_tensor(&stix).apply(&e).map(|z| VACUUM_PERMITTIVITY * z);
        let j = plasma_current(&plasma, &plasma.velocities(&e, omega).unwrap()).unwrap();
        let d = displacement(&e, &j, omega);
        let norm = ke.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff = ke.iter().zip(&d).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
        states += 1;
    }
    outcome(worst < 1e-8, format!("max relative error {worst:.2e} over {states} states"))
}

fn lower_hybrid_root() -> Outcome {
    let plasma = PlasmaState::hydrogen(1e19, 1.0).unwrap();
    let ion = ELEMENTARY_CHARGE / PROTON_MASS;
    let electron = ELEMENTARY_CHARGE / ELECTRON_MASS;
    let res = hybrid_resonances(&plasma, (1.01 * ion, 0.99 * electron)).unwrap();
    let Some(estimate) = res.lower_hybrid_estimate else { return outcome(false, "no closed-form estimate") };
    let Some(&root) = res.roots.iter().min_by(|a, b| rel(**a, estimate).total_cmp(&rel(**b, estimate))) else {
        return outcome(false, "no resonance located");
    };
    let s = |w: f64| stix_parameters(&plasma, w).unwrap().s;
    let flips = s(root * (1.0 - 1e-6)) * s(root * (1.0 + 1e-6)) < 0.0;
    let err = rel(estimate, root);
    outcome(err < 0.01 && flips, format!("root {root:.6e}, estimate {estimate:.6e}, relative {err:.2e}, sign change {flips}"))
}

fn curl_curl_degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let k = [(); 3].map(|_| scale * rng.gen_range(-1.0..1.0));
        let (_, det) = curl_curl_symbol(k);
        let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(det.abs() / norm.powi(6).max(1.0));
    }
    outcome(worst <= 1e-12, format!("max |det| / max(1, |k|^6) = {worst:.2e}"))
}

fn coulomb_homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let tensor = dielectric_tensor(&random_stix(&mut rng));
        let k = [(); 3].map(|_| rng.gen_range(-3.0..3.0));
        let t = rng.gen_range(0.1..10.0);
        let base = coulomb_gauge_symbol(&tensor, k);
        let scaled = coulomb_gauge_symbol(&tensor, k.map(|v| t * v));
        let want = base * t.powi(6);
        worst = worst.max((scaled - want).norm() / want.norm().max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-10, format!("max relative defect {worst:.2e}"))
}

fn origin_characteristic_lines() -> Outcome {
    let o = origin_characteristics();
    let exact = [(-1.0 + 17f64.sqrt()) / 8.0, (-1.0 - 17f64.sqrt()) / 8.0];
    let root_err = o.roots.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut fit_err: f64 = 0.0;
    for &lambda in &o.roots {
        match fit_origin_characteristic(lambda, 1e-4) {
            Ok(fit) => fit_err = fit_err.max(fit.error),
            Err(e) => return outcome(false, format!("tracing lambda {lambda}: {e}")),
        }
    }
    let pass = root_err <= 1e-14 && fit_err <= 1e-3 && o.count == 4;
    outcome(pass, format!("root error {root_err:.1e}, fit error {fit_err:.2e}, count {}", o.count))
}

fn sonic_classification() -> Outcome {
    let xi = AffineQuadratic::new(1.0, -1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    if canonical_case_classify(&xi, 0.0, 0.0) != SonicPointClass::KeldyshPoint {
        return outcome(false, "origin not keldysh_point");
    }
    for _ in 0..50 {
        let z = rng.gen_range(0.05..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if canonical_case_classify(&xi, z * z, z) != SonicPointClass::TricomiPoint {
            return outcome(false, format!("({}, {z}) not tricomi_point", z * z));
        }
        let off = z * z + rng.gen_range(0.05..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if canonical_case_classify(&xi, off, z) != SonicPointClass::NotOnSonic {
            return outcome(false, format!("({off}, {z}) not not_on_sonic"));
        }
    }
    outcome(true, "origin keldysh_point, 50 tricomi_point, 50 not_on_sonic")
}

fn energy_inequality() -> Outcome {
    let delta = 0.05;
    let trials = seeded_trials(42, 100);
    let domain = Domain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap();
    let mut summary = Vec::new();
    let mut pass = true;
    for kappa in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let spec = match MultiplierSpec::with_params(kappa, &domain, delta, 0.05, None) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("kappa {kappa}: {e}")),
        };
        let check = EnergyCheck::new(spec).unwrap();
        let mut min = f64::INFINITY;
        for bumps in &trials {
            let c = check.certify(bumps).unwrap();
            pass &= c.pass && c.ratio_fine >= 0.9 * delta;
            min = min.min(c.ratio_fine);
        }
        summary.push(format!("{kappa}: {min:.3}"));
    }
    outcome(pass, format!("min ratio per kappa [{}], bound {:.3}", summary.join(", "), 0.9 * delta))
}

fn manufactured_convergence() -> Outcome {
    let domain = Domain::rectangle(1.5, 2.5, -0.4, 0.4).unwrap();
    let kappa = 0.5;
    let errors: Vec<f64> = [17, 33, 65]
        .iter()
        .map(|&n| {
            let g = Grid2D::new(&domain, n, n).unwrap();
            let f = g.sample(|x, y| manufactured_forcing(x, y, kappa));
            let s = solve_closed_dirichlet(&g, kappa, &f).unwrap();
            nodal_l2_distance(&g, &s.values, &g.sample(manufactured_solution))
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    outcome(orders.iter().all(|&p| p >= 1.0), format!("errors {:?}, orders {orders:.2?}", errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()))
}

fn illposedness_signature() -> Outcome {
    let levels = [9, 17, 33];
    let origin = illposedness_diagnostic(&Domain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap(), &levels, 0.5).unwrap();
    let elliptic = illposedness_diagnostic(&Domain::rectangle(1.5, 2.5, -0.4, 0.4).unwrap(), &levels, 0.5).unwrap();
    let nondecreasing = origin.windows(2).all(|w| w[1].cond >= w[0].cond);
    let growth = |p: &[coldwave_core::weak::IllposednessPoint]| p[2].cond / p[1].cond;
    let pass = nondecreasing && growth(&origin) > growth(&elliptic);
    let conds = |p: &[coldwave_core::weak::IllposednessPoint]| p.iter().map(|q| format!("{:.2e}", q.cond)).collect::<Vec<_>>().join(" ");
    outcome(pass, format!("origin [{}], elliptic [{}]", conds(&origin), conds(&elliptic)))
}

fn mixed_plumbing() -> Outcome {
    let domain = Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
    let g = Grid2D::new(&domain, 65, 65).unwrap();
    let spec = MixedMultiplierSpec::new(&domain).unwrap();
    let segments = g.boundary_segments();
    let flipped: Vec<_> = segments.iter().map(|s| s.reversed()).collect();
    let admissible = boundary_admissible(&segments, &[2, 3], &spec).unwrap().admissible;
    let flipped_admissible = boundary_admissible(&flipped, &[2, 3], &spec).unwrap().admissible;
    let f1 = g.sample(|x, y| (x + 2.0 * y).sin() + 1.0);
    let f2 = g.sample(|x, y| (3.0 * x - y).cos());
    let s = match solve_mixed(&g, 0.0, &[2, 3], &spec, &f1, &f2) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let ratio = s.residual_norm / s.rhs_norm;
    let pass = admissible && !flipped_admissible && ratio < 1e-6;
    outcome(pass, format!("admissible {admissible}, flipped admissible {flipped_admissible}, residual/rhs {ratio:.2e}"))
}

/// `ψ0 K(x0)/K(x) exp(-iσ0 ∫ 1/K)` by composite Simpson on a fine grid.
fn integrating_factor(k: &dyn Fn(f64) -> f64, sigma0: f64, psi0: f64, x0: f64, x: f64) -> Complex64 {
    let n = 4000;
    let h = (x - x0) / n as f64;
    let mut sum = 1.0 / k(x0) + 1.0 / k(x);
    for i in 1..n {
        sum += (if i % 2 == 1 { 4.0 } else { 2.0 }) / k(x0 + i as f64 * h);
    }
    let integral = sum * h / 3.0;
    psi0 * k(x0) / k(x) * Complex64::new(0.0, -sigma0 * integral).exp()
}

fn layered_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mean = sign * rng.gen_range(0.5..3.0);
        let amp = rng.gen_range(0.0..0.8) * mean;
        let freq = rng.gen_range(0.2..3.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let kf = move |x: f64| mean + amp * (freq * x + phase).sin();
        let dkf = move |x: f64| amp * freq * (freq * x + phase).cos();
        let field = FnField::real(move |x, _| kf(x)).with_derivatives(
            move |x, _| Complex64::new(dkf(x), 0.0),
            |_, _| Complex64::new(0.0, 0.0),
        );
        let sigma0 = rng.gen_range(-3.0..3.0);
        let (x0, x1) = (rng.gen_range(-1.0..0.0), rng.gen_range(0.5..2.0));
        let psi0 = rng.gen_range(0.5..2.0);
        let problem = LayeredProblem::new(Box::new(field), sigma0, (x0, x1)).unwrap();
        let sol = match integrate_layered(&problem, Complex64::new(psi0, 0.0), x0, x1) {
            Ok(s) => s,
            Err(e) => return outcome(false, e.to_string()),
        };
        let stride = (sol.xs.len() / 16).max(1);
        for (x, psi) in sol.xs.iter().zip(&sol.psi).step_by(stride).chain([(sol.xs.last().unwrap(), sol.psi.last().unwrap())]) {
            let want = integrating_factor(&kf, sigma0, psi0, x0, *x);
            worst = worst.max((psi - want).norm() / want.norm());
        }
    }
    let vanishing = AffineQuadratic::new(1.0, f64::INFINITY);
    let singular = matches!(
        LayeredProblem::new(Box::new(vanishing), 1.0, (-1.0, 1.0)),
        Err(ElectrostaticsError::SingularCoefficient { .. })
    );
    outcome(worst <= 1e-8 && singular, format!("max relative error {worst:.2e}, vanishing K11 rejected {singular}"))
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_coldwave")).args(args).output().expect("spawn coldwave");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let plasma = dir.path().join("plasma.json");
    std::fs::write(&plasma, r#"{"B0": 1.0, "species": [{"name": "electron", "density_m3": 1e19}, {"name": "proton", "density_m3": 1e19}]}"#)
        .unwrap();
    let problem = dir.path().join("problem.json");
    std::fs::write(
        &problem,
        r#"{"kappa": 0.5, "domain": {"rects": [[1.5, 2.5, -0.4, 0.4]]}, "grid": {"nx": 17, "ny": 17},
            "bc": {"type": "closed_dirichlet"}, "forcing": {"kind": "expr_id", "id": "manufactured"}}"#,
    )
    .unwrap();
    let p = plasma.to_str().unwrap();
    let q = problem.to_str().unwrap();
    let runs: [&[&str]; 5] = [
        &["energy-check", "--kappa", "0.5", "--trials", "5", "--seed", "9"],
        &["stix", "--plasma", p, "--omega", "5e9"],
        &["dispersion", "--plasma", p, "--omega-min", "1e8", "--omega-max", "1e11", "--omega-steps", "20", "--log"],
        &["solve", "--problem", q],
        &["origin-chars", "--step", "1e-3"],
    ];
    for args in runs {
        let (c1, o1) = run_cli(args);
        let (c2, o2) = run_cli(args);
        if c1 != 0 || c1 != c2 || o1 != o2 || o1.is_empty() {
            return outcome(false, format!("{args:?}: exit codes {c1}/{c2}, identical {}", o1 == o2));
        }
    }
    outcome(true, "5 commands byte-identical across repeated runs")
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 16] = [
        ("vacuum dispersion", vacuum_dispersion, secs(1)),
        ("principal-angle factorization", principal_angles, secs(5)),
        ("discriminant identity", discriminant_identity, None),
        ("stix spot value", stix_spot_value, None),
        ("tensor and velocity consistency", consistency_chain, None),
        ("lower-hybrid root", lower_hybrid_root, secs(1)),
        ("curl-curl degeneracy", curl_curl_degeneracy, None),
        ("coulomb-gauge homogeneity", coulomb_homogeneity, None),
        ("origin characteristics", origin_characteristic_lines, secs(10)),
        ("sonic point classification", sonic_classification, None),
        ("multiplier energy inequality", energy_inequality, secs(60)),
        ("manufactured elliptic solve", manufactured_convergence, secs(60)),
        ("ill-posedness signature", illposedness_signature, secs(120)),
        ("mixed problem plumbing", mixed_plumbing, None),
        ("layered closed form", layered_closed_form, None),
        ("cli determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        let budget = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
        println!(
            "[{}] {:>2} {name}: {} in {:.2}s{budget}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64(),
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
