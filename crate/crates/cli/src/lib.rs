//! Command-line front end for coldwave.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use coldwave_core::dispersion::{self, DispersionError};
use coldwave_core::electrostatics::{integrate_layered, ElectrostaticsError, LayeredProblem, SearchBox, TensorSpec};
use coldwave_core::fields::FieldSpec;
use coldwave_core::format::{json_number, sci};
use coldwave_core::plasma::PlasmaConfig;
use coldwave_core::plasma::{dielectric_tensor, stix_approximate_rl, stix_parameters, PlasmaError, PlasmaState, StixParameters};
use coldwave_core::typegeometry::{
    fit_origin_characteristic, origin_characteristics, symbol_check, trace_characteristic, write_characteristics_csv, Branch,
    GeometryError, TraceDirection, TraceOptions,
};
use coldwave_core::weak::energy::{seeded_trials, EnergyCheck, MultiplierSpec};
use coldwave_core::weak::problem::{
    diagnostic_json, write_mixed_solution_csv, write_solution_csv, BoundaryCondition, ProblemConfig, ProblemSolution,
};
use coldwave_core::weak::{illposedness_diagnostic, Domain, WeakError};
use coldwave_core::Complex64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "coldwave", version, about = "Cold-plasma waves and the degenerate model operator (x - y^2) u_xx + u_yy")]
pub struct Cli {
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format where a command supports both.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Relative cyclotron-resonance guard for plasma commands.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PlasmaArgs {
    /// Plasma configuration JSON.
    #[arg(long)]
    pub plasma: PathBuf,
}

#[derive(Debug, Args)]
pub struct BracketArgs {
    #[arg(long)]
    pub omega_min: f64,
    #[arg(long)]
    pub omega_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Inward,
    Outward,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stix parameters at one frequency.
    Stix {
        #[command(flatten)]
        plasma: PlasmaArgs,
        #[arg(long)]
        omega: f64,
        /// Use the mass-ratio approximation for R and L.
        #[arg(long)]
        approximate: bool,
    },
    /// Refractive-index scan over a frequency and angle grid.
    Dispersion {
        #[command(flatten)]
        plasma: PlasmaArgs,
        #[command(flatten)]
        bracket: BracketArgs,
        #[arg(long, default_value_t = 64)]
        omega_steps: usize,
        /// Space the frequencies logarithmically.
        #[arg(long)]
        log: bool,
        #[arg(long, default_value = "0deg")]
        theta_min: String,
        #[arg(long, default_value = "90deg")]
        theta_max: String,
        #[arg(long, default_value_t = 16)]
        theta_steps: usize,
    },
    /// Zeros of p, R and L.
    Cutoffs {
        #[command(flatten)]
        plasma: PlasmaArgs,
        #[command(flatten)]
        bracket: BracketArgs,
    },
    /// Zeros of s, with the closed-form lower-hybrid estimate.
    Resonances {
        #[command(flatten)]
        plasma: PlasmaArgs,
        #[command(flatten)]
        bracket: BracketArgs,
    },
    /// Type of the 2D electrostatic equation on a box.
    Typemap {
        /// Tensor field JSON with entries K11 ... K33.
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_max: f64,
        #[arg(long, default_value_t = 32)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        nz: usize,
    },
    /// Trace characteristics of the model operator from a hyperbolic point.
    Characteristics {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, value_enum, default_value_t = DirectionArg::Inward)]
        direction: DirectionArg,
        #[arg(long, value_enum, default_value_t = BranchArg::Both)]
        branch: BranchArg,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: usize,
    },
    /// Parabolic characteristics through the origin.
    OriginChars {
        /// Also trace and fit each parabola with this step.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Curl-curl and Coulomb-gauge symbol check at a wave vector.
    SymbolCheck {
        /// Comma-separated wave vector.
        #[arg(long, allow_hyphen_values = true)]
        k: String,
        /// Comma-separated R,L,p; vacuum when neither this nor --plasma is given.
        #[arg(long, allow_hyphen_values = true)]
        stix: Option<String>,
        #[arg(long)]
        plasma: Option<PathBuf>,
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Plane-layered potential equation along x.
    Layered {
        /// K11 field JSON, or a file containing it.
        #[arg(long)]
        k11: String,
        #[arg(long, allow_hyphen_values = true)]
        sigma0: f64,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        psi0: f64,
    },
    /// Closed Dirichlet problem from a problem JSON.
    Solve {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Mixed problem from a problem JSON.
    SolveMixed {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Seeded multiplier energy check on [-1, 1]^2.
    EnergyCheck {
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        delta_tilde: f64,
        /// Multiplier constant for kappa < 1; midpoint of its range by default.
        #[arg(long)]
        n: Option<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Condition estimates of the closed Dirichlet system under refinement.
    Illposedness {
        /// x0,x1,y0,y1
        #[arg(long, default_value = "-1,1,-1,1", allow_hyphen_values = true)]
        domain: String,
        /// Nodes per axis at each level.
        #[arg(long, default_value = "9,17,33")]
        levels: String,
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
    },
    /// Report configuration problems without running anything.
    Validate {
        #[arg(long)]
        plasma: Option<PathBuf>,
        #[arg(long)]
        problem: Option<PathBuf>,
    },
}

/// Error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INVALID, message: message.into() }
    }
    fn numerical(message: impl Into<String>) -> Self {
        Failure { code: EXIT_NUMERICAL, message: message.into() }
    }
    fn check(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CHECK, message: message.into() }
    }
}

impl From<PlasmaError> for Failure {
    fn from(e: PlasmaError) -> Self {
        match e {
            PlasmaError::CyclotronResonance { .. } => Failure::numerical(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<DispersionError> for Failure {
    fn from(e: DispersionError) -> Self {
        match e {
            DispersionError::Plasma(p) => p.into(),
            DispersionError::InvalidBracket(_) => Failure::invalid(e.to_string()),
            _ => Failure::numerical(e.to_string()),
        }
    }
}

impl From<ElectrostaticsError> for Failure {
    fn from(e: ElectrostaticsError) -> Self {
        match e {
            ElectrostaticsError::SingularCoefficient { .. } | ElectrostaticsError::NoConvergence { .. } => Failure::numerical(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<WeakError> for Failure {
    fn from(e: WeakError) -> Self {
        match e {
            WeakError::FactorizationFailure { .. } | WeakError::DualNormSingular { .. } => Failure::numerical(e.to_string()),
            WeakError::InadmissibleBoundary(_) => Failure::check(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::invalid(e.to_string())
    }
}

/// Parses `90deg`, `1.5708rad` or a bare number of radians.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (number, scale) = if let Some(v) = t.strip_suffix("deg") {
        (v, std::f64::consts::PI / 180.0)
    } else if let Some(v) = t.strip_suffix("rad") {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = number.trim().parse().map_err(|_| format!("invalid angle `{text}`"))?;
    if !v.is_finite() {
        return Err(format!("invalid angle `{text}`"));
    }
    Ok(v * scale)
}

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Failure::invalid(format!("invalid number `{p}` in `{text}`"))))
        .collect()
}

fn parse_vec3(text: &str) -> Result<[f64; 3], Failure> {
    let v = parse_list(text)?;
    <[f64; 3]>::try_from(v).map_err(|_| Failure::invalid(format!("expected three comma-separated numbers, got `{text}`")))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

fn load_plasma_config(path: &Path) -> Result<PlasmaConfig, Failure> {
    Ok(PlasmaConfig::from_json(&read(path)?)?)
}

fn load_problem(path: &Path) -> Result<ProblemConfig, Failure> {
    ProblemConfig::from_json(&read(path)?).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Schema and range checks for the inputs of a command. Empty when the
/// command can run.
pub fn validate(cli: &Cli) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            out.push(format!("tolerance must be positive, got {t}"));
        }
    }
    let plasma = |path: &Path, out: &mut Vec<String>| match read(path).map(|t| PlasmaConfig::from_json(&t)) {
        Ok(Ok(cfg)) => {
            out.extend(cfg.diagnostics());
            if out.is_empty() {
                if let Err(e) = cfg.to_state() {
                    out.push(e.to_string());
                }
            }
        }
        Ok(Err(e)) => out.push(e.to_string()),
        Err(f) => out.push(f.message),
    };
    let problem = |path: &Path, out: &mut Vec<String>| match load_problem(path) {
        Ok(cfg) => out.extend(cfg.diagnostics()),
        Err(f) => out.push(f.message),
    };
    let bracket = |b: &BracketArgs, out: &mut Vec<String>| {
        if !(b.omega_min > 0.0 && b.omega_max.is_finite() && b.omega_min < b.omega_max) {
            out.push(format!("bracket must satisfy 0 < omega_min < omega_max, got [{}, {}]", b.omega_min, b.omega_max));
        }
    };
    match &cli.command {
        Command::Stix { plasma: p, omega, .. } => {
            plasma(&p.plasma, &mut out);
            if !(*omega > 0.0 && omega.is_finite()) {
                out.push(format!("omega must be positive, got {omega}"));
            }
        }
        Command::Dispersion { plasma: p, bracket: b, omega_steps, theta_min, theta_max, theta_steps, .. } => {
            plasma(&p.plasma, &mut out);
            bracket(b, &mut out);
            if *omega_steps < 1 || *theta_steps < 1 {
                out.push("omega_steps and theta_steps must be at least 1".into());
            }
            for a in [theta_min, theta_max] {
                if let Err(e) = parse_angle(a) {
                    out.push(e);
                }
            }
        }
        Command::Cutoffs { plasma: p, bracket: b } | Command::Resonances { plasma: p, bracket: b } => {
            plasma(&p.plasma, &mut out);
            bracket(b, &mut out);
        }
        Command::Typemap { tensor, x_min, x_max, z_min, z_max, nx, nz } => {
            match read(tensor).map(|t| serde_json::from_str::<TensorSpec>(&t)) {
                Ok(Ok(spec)) => {
                    if let Err(e) = spec.build() {
                        out.push(e.to_string());
                    }
                }
                Ok(Err(e)) => out.push(format!("tensor: {e}")),
                Err(f) => out.push(f.message),
            }
            if !(x_min < x_max && z_min < z_max) {
                out.push("box bounds must satisfy x_min < x_max and z_min < z_max".into());
            }
            if *nx < 1 || *nz < 1 {
                out.push("nx and nz must be at least 1".into());
            }
        }
        Command::Characteristics { step, .. } | Command::OriginChars { step: Some(step) } => {
            if !(*step > 0.0 && step.is_finite()) {
                out.push(format!("step must be positive, got {step}"));
            }
        }
        Command::SymbolCheck { k, stix, plasma: p, omega } => {
            if let Err(f) = parse_vec3(k) {
                out.push(f.message);
            }
            if let Some(s) = stix {
                if let Err(f) = parse_vec3(s) {
                    out.push(f.message);
                }
            }
            if let Some(path) = p {
                plasma(path, &mut out);
                if omega.is_none() {
                    out.push("--plasma needs --omega".into());
                }
            }
        }
        Command::Layered { x0, x1, .. } => {
            if x0 == x1 {
                out.push("x0 and x1 must differ".into());
            }
        }
        Command::Solve { problem: path } | Command::SolveMixed { problem: path } => problem(path, &mut out),
        Command::EnergyCheck { kappa, delta, delta_tilde, trials, .. } => {
            if !(0.0..=2.0).contains(kappa) {
                out.push(format!("kappa out of range [0, 2]: {kappa}"));
            }
            if !(*delta > 0.0) || !(*delta_tilde > 0.0 && *delta_tilde < 1.0) {
                out.push("delta and delta_tilde must be small positive numbers".into());
            }
            if *trials == 0 {
                out.push("trials must be at least 1".into());
            }
        }
        Command::Illposedness { domain, levels, kappa } => {
            match parse_list(domain) {
                Ok(v) if v.len() == 4 && v[0] < v[1] && v[2] < v[3] => {}
                _ => out.push(format!("domain must be x0,x1,y0,y1 with x0 < x1 and y0 < y1, got `{domain}`")),
            }
            match parse_list(levels) {
                Ok(v) if v.iter().all(|&n| n >= 8.0 && n.fract() == 0.0) => {}
                _ => out.push(format!("levels must be integers of at least 8, got `{levels}`")),
            }
            if !(0.0..=2.0).contains(kappa) {
                out.push(format!("kappa out of range [0, 2]: {kappa}"));
            }
        }
        Command::Validate { plasma: p, problem: q } => {
            if let Some(path) = p {
                plasma(path, &mut out);
            }
            if let Some(path) = q {
                problem(path, &mut out);
            }
        }
        Command::OriginChars { step: None } => {}
    }
    out
}

struct Output {
    text: String,
}

impl Output {
    fn json(v: &Value) -> Self {
        Output { text: serde_json::to_string_pretty(v).expect("serializable") + "\n" }
    }
    fn bytes(buf: Vec<u8>) -> Self {
        Output { text: String::from_utf8(buf).expect("utf-8 output") }
    }
}

fn csv_buffer(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<Output, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(Output::bytes(buf))
}

fn plasma_state(cli: &Cli, path: &Path) -> Result<PlasmaState, Failure> {
    let state = load_plasma_config(path)?.to_state()?;
    Ok(match cli.tol {
        Some(t) => state.with_resonance_tol(t),
        None => state,
    })
}

fn stix_json(s: &StixParameters) -> Value {
    json!({ "R": json_number(s.r), "L": json_number(s.l), "s": json_number(s.s), "d": json_number(s.d), "p": json_number(s.p) })
}

fn grid_values(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if log {
                (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect()
}

fn warn(cli: &Cli, message: &str) {
    if !cli.quiet {
        eprintln!("warning: {message}");
    }
}

fn execute(cli: &Cli) -> Result<(Output, i32), Failure> {
    let format = cli.format;
    let ok = |o: Output| Ok((o, EXIT_OK));
    match &cli.command {
        Command::Stix { plasma, omega, approximate } => {
            let state = plasma_state(cli, &plasma.plasma)?;
            let stix = if *approximate {
                let (r, l) = stix_approximate_rl(&state, *omega)?;
                StixParameters::from_rlp(r, l, stix_parameters(&state, *omega)?.p)
            } else {
                stix_parameters(&state, *omega)?
            };
            match format {
                Some(Format::Csv) => ok(Output {
                    text: format!("R,L,s,d,p\n{},{},{},{},{}\n", sci(stix.r), sci(stix.l), sci(stix.s), sci(stix.d), sci(stix.p)),
                }),
                _ => ok(Output::json(&stix_json(&stix))),
            }
        }
        Command::Dispersion { plasma, bracket, omega_steps, log, theta_min, theta_max, theta_steps } => {
            let state = plasma_state(cli, &plasma.plasma)?;
            let omegas = grid_values(bracket.omega_min, bracket.omega_max, *omega_steps, *log);
            let (t0, t1) = (parse_angle(theta_min).map_err(Failure::invalid)?, parse_angle(theta_max).map_err(Failure::invalid)?);
            let thetas = grid_values(t0, t1, *theta_steps, false);
            let rows = dispersion::dispersion_scan(&state, &omegas, &thetas);
            csv_buffer(|b| dispersion::write_scan_csv(&rows, b)).map(|o| (o, EXIT_OK))
        }
        Command::Cutoffs { plasma, bracket } => {
            let state = plasma_state(cli, &plasma.plasma)?;
            let cutoffs = dispersion::cutoff_frequencies(&state, (bracket.omega_min, bracket.omega_max))?;
            match format {
                Some(Format::Csv) => {
                    let mut text = String::from("omega,which\n");
                    for c in &cutoffs {
                        text += &format!("{},{:?}\n", sci(c.omega), c.which);
                    }
                    ok(Output { text })
                }
                _ => ok(Output::json(&Value::Array(
                    cutoffs.iter().map(|c| json!({ "omega": json_number(c.omega), "which": format!("{:?}", c.which) })).collect(),
                ))),
            }
        }
        Command::Resonances { plasma, bracket } => {
            let state = plasma_state(cli, &plasma.plasma)?;
            let res = dispersion::hybrid_resonances(&state, (bracket.omega_min, bracket.omega_max))?;
            ok(Output::json(&json!({
                "roots": res.roots.iter().map(|&r| json_number(r)).collect::<Vec<_>>(),
                "lower_hybrid_estimate": res.lower_hybrid_estimate.map(json_number),
            })))
        }
        Command::Typemap { tensor, x_min, x_max, z_min, z_max, nx, nz } => {
            let spec: TensorSpec = serde_json::from_str(&read(tensor)?).map_err(|e| Failure::invalid(format!("tensor: {e}")))?;
            let field = spec.build().map_err(|e| Failure::invalid(e.to_string()))?;
            let search = SearchBox { x: (*x_min, *x_max), z: (*z_min, *z_max), nx: *nx, nz: *nz };
            let (rows, warnings) = coldwave_core::electrostatics::type_map(&field, &search);
            if let Some(first) = warnings.first() {
                warn(cli, &format!("{first} ({} nodes in total)", warnings.len()));
            }
            csv_buffer(|b| coldwave_core::electrostatics::write_type_map_csv(&rows, b)).map(|o| (o, EXIT_OK))
        }
        Command::Characteristics { x, y, step, direction, branch, max_steps } => {
            let dir = match direction {
                DirectionArg::Inward => TraceDirection::Inward,
                DirectionArg::Outward => TraceDirection::Outward,
            };
            let opts = TraceOptions { max_steps: *max_steps, ..TraceOptions::new(*step, dir) };
            let branches = match branch {
                BranchArg::Plus => vec![Branch::Plus],
                BranchArg::Minus => vec![Branch::Minus],
                BranchArg::Both => vec![Branch::Plus, Branch::Minus],
            };
            let paths = branches
                .into_iter()
                .map(|b| trace_characteristic((*x, *y), b, &opts))
                .collect::<Result<Vec<_>, _>>()?;
            csv_buffer(|b| write_characteristics_csv(&paths, b)).map(|o| (o, EXIT_OK))
        }
        Command::OriginChars { step } => {
            let o = origin_characteristics();
            let mut v = json!({
                "coefficients": o.coefficients.to_vec(),
                "discriminant": o.discriminant,
                "roots": o.roots.to_vec(),
                "count": o.count,
            });
            if let Some(h) = step {
                let fits = o
                    .roots
                    .iter()
                    .map(|&l| fit_origin_characteristic(l, *h).map(|f| json!({ "lambda": f.lambda, "fitted": f.fitted, "error": f.error })))
                    .collect::<Result<Vec<_>, _>>()?;
                v["fits"] = Value::Array(fits);
                v["step"] = json!(h);
            }
            ok(Output::json(&v))
        }
        Command::SymbolCheck { k, stix, plasma, omega } => {
            let k = parse_vec3(k)?;
            let params = match (stix, plasma) {
                (Some(s), _) => {
                    let [r, l, p] = parse_vec3(s)?;
                    StixParameters::from_rlp(r, l, p)
                }
                (None, Some(path)) => {
                    let state = plasma_state(cli, path)?;
                    let w = omega.ok_or_else(|| Failure::invalid("--plasma needs --omega"))?;
                    stix_parameters(&state, w)?
                }
                (None, None) => StixParameters::vacuum(),
            };
            let report = symbol_check(&dielectric_tensor(&params), k);
            let code = if report.pass { EXIT_OK } else { EXIT_CHECK };
            let v = json!({
                "k": report.k.iter().map(|&x| json_number(x)).collect::<Vec<_>>(),
                "det": json_number(report.det),
                "sigma": json_number(report.sigma),
                "pass": report.pass,
            });
            Ok((Output::json(&v), code))
        }
        Command::Layered { k11, sigma0, x0, x1, psi0 } => {
            let text = if k11.trim_start().starts_with('{') { k11.clone() } else { read(Path::new(k11))? };
            let spec: FieldSpec = serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("k11: {e}")))?;
            let field = spec.build().map_err(|e| Failure::invalid(e.to_string()))?;
            let range = (x0.min(*x1), x0.max(*x1));
            let problem = LayeredProblem::new(field, *sigma0, range)?;
            let sol = integrate_layered(&problem, Complex64::new(*psi0, 0.0), *x0, *x1)?;
            csv_buffer(|b| {
                writeln!(b, "x,psi_re,psi_im")?;
                for (x, p) in sol.xs.iter().zip(&sol.psi) {
                    writeln!(b, "{},{},{}", sci(*x), sci(p.re), sci(p.im))?;
                }
                Ok(())
            })
            .map(|o| (o, EXIT_OK))
        }
        Command::Solve { problem } | Command::SolveMixed { problem } => {
            let cfg = load_problem(problem)?;
            let want_mixed = matches!(cli.command, Command::SolveMixed { .. });
            let is_mixed = matches!(cfg.bc, BoundaryCondition::Mixed { .. });
            if want_mixed != is_mixed {
                return Err(Failure::invalid(if want_mixed {
                    "solve-mixed needs bc.type = \"mixed\""
                } else {
                    "solve needs bc.type = \"closed_dirichlet\"; use solve-mixed for mixed problems"
                }));
            }
            let (grid, solution) = cfg.solve()?;
            match (solution, format) {
                (ProblemSolution::Dirichlet(s), Some(Format::Json)) => ok(Output::json(&json!({
                    "residual_norm": json_number(s.residual_norm),
                    "rhs_norm": json_number(s.rhs_norm),
                    "condition_estimate": json_number(s.condition_estimate),
                    "rank": s.rank,
                    "unknowns": s.unknowns,
                    "l2_weighted": json_number(s.l2_weighted),
                    "h1_weighted": json_number(s.h1_weighted),
                }))),
                (ProblemSolution::Dirichlet(s), _) => csv_buffer(|b| write_solution_csv(b, &grid, &s.values)).map(|o| (o, EXIT_OK)),
                (ProblemSolution::Mixed(s), Some(Format::Json)) => ok(Output::json(&json!({
                    "residual_norm": json_number(s.residual_norm),
                    "rhs_norm": json_number(s.rhs_norm),
                    "condition_estimate": json_number(s.condition_estimate),
                    "rank": s.rank,
                    "unknowns": s.unknowns,
                    "equations": s.equations,
                    "admissibility": serde_json::to_value(&s.admissibility).expect("serializable"),
                    "integrability": {
                        "weighted_square": json_number(s.integrability.weighted_square),
                        "excluded_measure": json_number(s.integrability.excluded_measure),
                        "finite": s.integrability.finite,
                    },
                }))),
                (ProblemSolution::Mixed(s), _) => csv_buffer(|b| write_mixed_solution_csv(b, &grid, &s.u1, &s.u2)).map(|o| (o, EXIT_OK)),
            }
        }
        Command::EnergyCheck { kappa, delta, delta_tilde, n, trials } => {
            let domain = Domain::rectangle(-1.0, 1.0, -1.0, 1.0)?;
            let spec = MultiplierSpec::with_params(*kappa, &domain, *delta, *delta_tilde, *n)?;
            let check = EnergyCheck::new(spec)?;
            let results = seeded_trials(cli.seed, *trials)
                .iter()
                .map(|b| check.certify(b))
                .collect::<Result<Vec<_>, _>>()?;
            let pass = results.iter().all(|c| c.pass);
            let code = if pass { EXIT_OK } else { EXIT_CHECK };
            let out = match format {
                Some(Format::Csv) => {
                    let mut text = String::from("trial,ratio_coarse,ratio_fine,error_estimate,bound,pass\n");
                    for (i, c) in results.iter().enumerate() {
                        text += &format!("{i},{},{},{},{},{}\n", sci(c.ratio_coarse), sci(c.ratio_fine), sci(c.error_estimate), sci(c.bound), c.pass);
                    }
                    Output { text }
                }
                _ => {
                    let min = results.iter().map(|c| c.ratio_fine).fold(f64::INFINITY, f64::min);
                    Output::json(&json!({
                        "kappa": kappa,
                        "delta": delta,
                        "seed": cli.seed,
                        "bound": json_number(delta * 0.9),
                        "min_ratio": json_number(min),
                        "pass": pass,
                        "trials": results.iter().map(|c| json!({
                            "ratio_coarse": json_number(c.ratio_coarse),
                            "ratio_fine": json_number(c.ratio_fine),
                            "error_estimate": json_number(c.error_estimate),
                            "pass": c.pass,
                        })).collect::<Vec<_>>(),
                    }))
                }
            };
            Ok((out, code))
        }
        Command::Illposedness { domain, levels, kappa } => {
            let d = parse_list(domain)?;
            let domain = Domain::rectangle(d[0], d[1], d[2], d[3])?;
            let levels: Vec<usize> = parse_list(levels)?.into_iter().map(|v| v as usize).collect();
            let points = illposedness_diagnostic(&domain, &levels, *kappa)?;
            if points.windows(2).any(|w| w[1].cond < w[0].cond) {
                warn(cli, "condition estimates decrease under refinement");
            }
            match format {
                Some(Format::Csv) => {
                    let mut text = String::from("h,cond\n");
                    for p in &points {
                        text += &format!("{},{}\n", sci(p.h), sci(p.cond));
                    }
                    ok(Output { text })
                }
                _ => ok(Output::json(&diagnostic_json(&points))),
            }
        }
        Command::Validate { .. } => ok(Output { text: String::new() }),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("COLDWAVE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    configure_threads();
    let diagnostics = validate(cli);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("error: {d}");
        }
        return EXIT_INVALID;
    }
    let (output, code) = match execute(cli) {
        Ok(v) => v,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, output.text.as_bytes()),
        None => io::stdout().lock().write_all(output.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return EXIT_INVALID;
    }
    code
}
