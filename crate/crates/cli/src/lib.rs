//! `magnhom` command line.
//!
//! Exit codes: 0 success, 1 invalid input or a failed check, 2 solver
//! non-convergence, 3 I/O error, 64 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use magnhom::cellsolve::{homogenize, solve_exchange_correctors, HomogenizedModel, ScalarCellField};
use magnhom::converge::{
    continuous_convergence_sweep, gamma_exchange_check, minima_convergence, riemann_lebesgue_check, MinimaOptions,
    SweepReport, STANDARD_LADDER,
};
use magnhom::demag::DomainGrid;
use magnhom::energy::{minimize, AppliedField, EnergyModel, Evaluator, MagnetizationField, MinimizeOptions};
use magnhom::material::{load_cell, load_cell_unvalidated, parse_cell_at, validate, UnitCellMaterial};
use magnhom::suite::{verify_cell, VerifyOptions};
use magnhom::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "MAGNHOM_THREADS";

static QUIET: AtomicBool = AtomicBool::new(false);

macro_rules! say {
    ($($t:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            println!($($t)*);
        }
    };
}

#[derive(Parser, Debug)]
#[command(
    name = "magnhom",
    version,
    about = "Homogenized micromagnetic energies of periodic composites"
)]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this value.
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    threads: usize,
    /// Suppress the summary on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Check the material hypotheses of a cell file.
    Validate(ValidateArgs),
    /// Solve the cell problems and write the homogenized model.
    Homogenize(HomogenizeArgs),
    /// Evaluate the fine or homogenized energy of a field.
    Energy(EnergyArgs),
    /// Projected-gradient descent from a field or a seeded random start.
    Minimize(MinimizeArgs),
    /// Epsilon sweeps of the convergence statements.
    Sweep(SweepArgs),
    /// Tiled-cube ladder, tangential decoupling and model invariants.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    cell: PathBuf,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct HomogenizeArgs {
    #[arg(long)]
    cell: PathBuf,
    /// Cell resolution; generator cells are rebuilt, voxel maps resampled.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    /// Cell file for the fine-scale energy (with --epsilon).
    #[arg(long, conflicts_with = "model", requires = "epsilon")]
    cell: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Homogenized model file.
    #[arg(long, required_unless_present = "cell")]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    mu0: f64,
    /// Applied field `hx,hy,hz`.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    h_a: [f64; 3],
}

#[derive(Args, Debug, Serialize)]
struct EnergyArgs {
    #[arg(long)]
    field: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct MinimizeArgs {
    /// Starting field; omit to start from a random field.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Resolution of the random start on a cube.
    #[arg(long, default_value_t = 16)]
    resolution: usize,
    /// Edge length of the random-start cube.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    step_size: f64,
    /// Output field (`.bin` for the binary format); the trace goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SweepKind {
    /// Riemann-Lebesgue, continuous convergence and exchange recovery.
    All,
    RiemannLebesgue,
    Continuous,
    Gamma,
    Minima,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    cell: PathBuf,
    #[arg(long, value_enum, default_value_t = SweepKind::All)]
    kind: SweepKind,
    /// Voxels per axis of the unit-cube domain.
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Decreasing periods, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = STANDARD_LADDER.to_vec())]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    mu0: f64,
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1", allow_hyphen_values = true)]
    h_a: [f64; 3],
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Descent steps per start of the minima sweep.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    step_size: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    cell: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    pairs: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got '{s}'"));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(v)
}

/// Failure of one command with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `argv` (including the program name) and runs one command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    QUIET.store(cli.quiet, Ordering::Relaxed);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} threads: {e}", cli.threads);
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Validate(a) => cmd_validate(cmd, a),
        Command::Homogenize(a) => cmd_homogenize(cmd, a),
        Command::Energy(a) => cmd_energy(cmd, a),
        Command::Minimize(a) => cmd_minimize(cmd, a),
        Command::Sweep(a) => cmd_sweep(cmd, a),
        Command::Verify(a) => cmd_verify(cmd, a),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Command,
    outputs: Vec<String>,
    diagnostics: serde_json::Value,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("outputs serialize") + "\n"
}

fn write_manifest(
    path: &Path,
    cmd: &Command,
    outputs: &[&Path],
    diagnostics: serde_json::Value,
) -> Result<(), Failure> {
    let manifest = Manifest {
        tool: "magnhom",
        version: env!("CARGO_PKG_VERSION"),
        config: cmd,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or(p.as_os_str()).to_string_lossy().into_owned())
            .collect(),
        diagnostics,
    };
    write_file(path, to_json(&manifest))
}

/// `dir/stem.manifest.json` next to a single output file.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn cmd_validate(cmd: &Command, a: &ValidateArgs) -> CmdResult {
    let cell = load_cell_unvalidated(&a.cell)?;
    let report = validate(&cell);
    if let Some(out) = &a.out {
        write_file(out, to_json(&report))?;
        write_manifest(
            &sibling(out, "manifest.json"),
            cmd,
            &[out],
            serde_json::json!({ "pass": report.pass }),
        )?;
    }
    if report.pass {
        say!(
            "ok: {} phases, N = {}, c_ex = {}, C_ex = {}, C_s = {}, C_an = {}",
            cell.phases().len(),
            cell.resolution(),
            report.c_ex,
            report.big_c_ex,
            report.c_s,
            report.c_an
        );
        Ok(EXIT_OK)
    } else {
        for issue in &report.issues {
            eprintln!("invalid: {}", issue.message);
        }
        Ok(EXIT_INVALID)
    }
}

fn load_cell_with(path: &Path, n: Option<usize>) -> Result<UnitCellMaterial, Failure> {
    match n {
        Some(n) => Ok(parse_cell_at(&read_text(path)?, n)?),
        None => Ok(load_cell(path)?),
    }
}

fn cmd_homogenize(cmd: &Command, a: &HomogenizeArgs) -> CmdResult {
    let cell = load_cell_with(&a.cell, a.n)?;
    let model = homogenize(&cell, a.tol)?;
    model.save(&a.out)?;
    write_manifest(
        &sibling(&a.out, "manifest.json"),
        cmd,
        &[&a.out],
        serde_json::to_value(&model.diagnostics).expect("diagnostics serialize"),
    )?;
    let d = |m: &[[f64; 3]; 3]| format!("[{:?}, {:?}, {:?}]", m[0], m[1], m[2]);
    say!("A_hom = {}", d(&model.a_hom));
    say!("B = {}", d(&model.b_demag));
    say!("<M_s> = {}", model.mean_ms);
    Ok(EXIT_OK)
}

/// Loaded inputs of an energy functional.
enum Loaded {
    Fine(UnitCellMaterial, f64),
    Hom(Box<HomogenizedModel>),
}

impl Loaded {
    fn from_args(a: &ModelArgs) -> Result<Self, Failure> {
        match (&a.cell, &a.model) {
            (Some(cell), _) => Ok(Loaded::Fine(
                load_cell(cell)?,
                a.epsilon.ok_or_else(|| fail(EXIT_USAGE, "--cell needs --epsilon"))?,
            )),
            (None, Some(model)) => Ok(Loaded::Hom(Box::new(HomogenizedModel::load(model)?))),
            (None, None) => Err(fail(EXIT_USAGE, "give --cell with --epsilon, or --model")),
        }
    }

    fn evaluator(&self, grid: &DomainGrid, a: &ModelArgs) -> Result<Evaluator, Failure> {
        let h = AppliedField::new(a.h_a)?;
        let model = match self {
            Loaded::Fine(cell, epsilon) => EnergyModel::Fine {
                cell,
                epsilon: *epsilon,
            },
            Loaded::Hom(m) => EnergyModel::Homogenized(m),
        };
        Ok(Evaluator::new(model, grid, h, a.mu0)?)
    }
}

fn cmd_energy(cmd: &Command, a: &EnergyArgs) -> CmdResult {
    let m = MagnetizationField::load(&a.field)?;
    let loaded = Loaded::from_args(&a.model)?;
    let energy = loaded.evaluator(m.grid(), &a.model)?.energy(m.values())?;
    let text = to_json(&energy);
    if !QUIET.load(Ordering::Relaxed) {
        print!("{text}");
    }
    if let Some(out) = &a.out {
        write_file(out, &text)?;
        write_manifest(&sibling(out, "manifest.json"), cmd, &[out], serde_json::Value::Null)?;
    }
    Ok(EXIT_OK)
}

fn cmd_minimize(cmd: &Command, a: &MinimizeArgs) -> CmdResult {
    let m0 = match &a.field {
        Some(p) => MagnetizationField::load(p)?,
        None => {
            let grid = DomainGrid::new([a.extent; 3], [a.resolution; 3])?;
            MagnetizationField::random(grid, &mut ChaCha8Rng::seed_from_u64(a.seed))
        }
    };
    if !(a.step_size.is_finite() && a.step_size > 0.0) {
        return Err(fail(EXIT_USAGE, "--step-size must be positive"));
    }
    let loaded = Loaded::from_args(&a.model)?;
    let eval = loaded.evaluator(m0.grid(), &a.model)?;
    let out = minimize(&eval, &m0, MinimizeOptions::new(a.steps, a.step_size))?;
    out.field.save(&a.out)?;
    let trace_path = sibling(&a.out, "trace.csv");
    let mut trace = String::from("step,energy\n");
    for (k, e) in out.trace.iter().enumerate() {
        trace.push_str(&format!("{k},{e}\n"));
    }
    write_file(&trace_path, trace)?;
    let final_energy = eval.energy(out.field.values())?;
    write_manifest(
        &sibling(&a.out, "manifest.json"),
        cmd,
        &[&a.out, &trace_path],
        serde_json::json!({ "accepted_steps": out.accepted_steps, "energy": final_energy }),
    )?;
    say!(
        "accepted {} steps, final energy {}",
        out.accepted_steps,
        final_energy.total
    );
    Ok(EXIT_OK)
}

/// Smooth test fields of the sweeps, all varying along `e1`.
fn tilt_field(grid: DomainGrid) -> Result<MagnetizationField, Failure> {
    Ok(MagnetizationField::from_fn(grid, |x| {
        let a = std::f64::consts::PI * x[0] / 3.0;
        [a.sin(), 0.0, a.cos()]
    })?)
}

fn rotation_field(grid: DomainGrid) -> Result<MagnetizationField, Failure> {
    Ok(MagnetizationField::from_fn(grid, |x| {
        let a = 0.5 * std::f64::consts::PI * x[0];
        [a.cos(), a.sin(), 0.0]
    })?)
}

fn cmd_sweep(cmd: &Command, a: &SweepArgs) -> CmdResult {
    let cell = load_cell(&a.cell)?;
    let grid = DomainGrid::cube(1.0, a.resolution);
    let h = AppliedField::new(a.h_a)?;
    create_dir(&a.out_dir)?;
    let kinds: Vec<SweepKind> = match a.kind {
        SweepKind::All => vec![SweepKind::RiemannLebesgue, SweepKind::Continuous, SweepKind::Gamma],
        k => vec![k],
    };
    let needs_model = kinds.iter().any(|k| *k != SweepKind::RiemannLebesgue);
    let model = if needs_model {
        Some(homogenize(&cell, a.tol)?)
    } else {
        None
    };
    let mut reports: Vec<(SweepReport, serde_json::Value)> = Vec::new();
    for kind in kinds {
        let report = match kind {
            SweepKind::RiemannLebesgue => {
                let u = ScalarCellField::new(cell.resolution(), cell.a_field(), false)?;
                let r = riemann_lebesgue_check(&u, |x| (std::f64::consts::PI * x[0]).sin(), &grid, &a.epsilons)?;
                (r, serde_json::Value::Null)
            }
            SweepKind::Continuous => {
                let m = tilt_field(grid)?;
                let r = continuous_convergence_sweep(&cell, model.as_ref().unwrap(), &m, h, a.mu0, &a.epsilons)?;
                (r, serde_json::Value::Null)
            }
            SweepKind::Gamma => {
                let set = solve_exchange_correctors(&cell, a.tol)?;
                let m0 = rotation_field(grid)?;
                let g = gamma_exchange_check(&cell, &set, model.as_ref().unwrap(), &m0, &a.epsilons, 0.05)?;
                let extra = serde_json::json!({
                    "e_hom": g.e_hom,
                    "e_mean": g.e_mean,
                    "control": g.control,
                });
                (g.report, extra)
            }
            SweepKind::Minima => {
                let opts = MinimaOptions {
                    minimize: MinimizeOptions::new(a.steps, a.step_size),
                    starts: 3,
                    seed: a.seed,
                };
                let r = minima_convergence(&cell, model.as_ref().unwrap(), &grid, h, a.mu0, &a.epsilons, opts)?;
                (r, serde_json::Value::Null)
            }
            SweepKind::All => unreachable!("expanded above"),
        };
        reports.push(report);
    }
    let mut outputs = Vec::new();
    let mut pass = true;
    let mut diag = serde_json::Map::new();
    for (r, extra) in &reports {
        let csv = a.out_dir.join(format!("{}.csv", r.name));
        let verdict = a.out_dir.join(format!("{}.verdict.json", r.name));
        write_file(&csv, r.to_csv())?;
        write_file(&verdict, r.verdict_json() + "\n")?;
        outputs.push(csv);
        outputs.push(verdict);
        pass &= r.verdict.pass;
        say!("{}: {}", r.name, if r.verdict.pass { "pass" } else { "FAIL" });
        for t in &r.verdict.terms {
            say!("  {}: {}", t.term, t.detail);
        }
        if !extra.is_null() {
            diag.insert(r.name.clone(), extra.clone());
        }
    }
    if let Some(m) = &model {
        diag.insert(
            "model".into(),
            serde_json::to_value(&m.diagnostics).expect("diagnostics serialize"),
        );
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        &a.out_dir.join("manifest.json"),
        cmd,
        &refs,
        serde_json::Value::Object(diag),
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_INVALID })
}

fn cmd_verify(cmd: &Command, a: &VerifyArgs) -> CmdResult {
    let cell = load_cell(&a.cell)?;
    let opts = VerifyOptions {
        tol: a.tol,
        seed: a.seed,
        pairs: a.pairs,
        ..VerifyOptions::default()
    };
    let report = verify_cell(&cell, opts)?;
    for c in &report.checks {
        say!("{} {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        let out = dir.join("verify.json");
        write_file(&out, to_json(&report))?;
        write_manifest(
            &dir.join("manifest.json"),
            cmd,
            &[&out],
            serde_json::json!({ "pass": report.pass }),
        )?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_INVALID })
}
