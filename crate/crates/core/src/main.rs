use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use vcrit::io::{self, ManifestEntry, ReadOptions, ResultRecord, SummaryRow};
use vcrit::lp::{build_lp, verify_lhv_model, CERTIFICATE_TOL};
use vcrit::quantum::{make_state, StateParams, FAMILIES};
use vcrit::search::{evaluate_at, minimize_vcrit, SearchOptions};
use vcrit::{probability_tensor, AngleConfiguration, DensityMatrix, Error, LhvSolution, Scenario, StateSpec};

const EXIT_FAILURE: u8 = 1;
/// An expectation or verification was not met.
const EXIT_MISSED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NO_INPUT: u8 = 66;

/// Critical white-noise visibility of multiqubit states under local
/// realism.
#[derive(Parser, Debug)]
#[command(name = "vcrit", version)]
struct Cli {
    /// Log verbosity; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Worker threads (defaults to all cores).
    #[arg(long, env = "VCRIT_JOBS", global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the critical visibility over measurement angles.
    Solve(SolveArgs),
    /// Critical visibility at fixed angles.
    Eval(EvalArgs),
    /// Check a local model file, or re-verify a results file.
    Verify(VerifyArgs),
    /// Run the entries of a manifest and summarize them as CSV.
    Reproduce(ReproduceArgs),
    /// List state families, or inspect a density matrix file.
    States(StatesArgs),
}

#[derive(Args, Debug)]
struct StateArgs {
    /// State family; see `vcrit states`.
    #[arg(long)]
    state: String,
    /// Qubit count; defaults to the number of observers in --settings.
    #[arg(long)]
    qubits: Option<usize>,
    /// GHZ angle, radians (`pi/4` style accepted).
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Dicke excitation number.
    #[arg(long)]
    k: Option<usize>,
    /// Dur state phase, radians.
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    phase: Option<f64>,
    /// Density matrix file for `--state file`.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Clip small negative eigenvalues of a density matrix file.
    #[arg(long)]
    repair: bool,
    /// Settings per observer, as `2,2,3` or `2x2x3`.
    #[arg(long)]
    settings: Scenario,
}

impl StateArgs {
    fn spec(&self) -> Result<StateSpec, Error> {
        let observers = self.settings.num_observers();
        let qubits = match (self.state.as_str(), self.qubits) {
            (_, Some(q)) => Some(q),
            ("file", None) => None,
            (_, None) => Some(observers),
        };
        let params = StateParams {
            alpha: self.alpha,
            k: self.k,
            phase: self.phase,
            file: self.file.clone(),
            repair: self.repair,
        };
        let spec = StateSpec::from_parts(&self.state, qubits, &params)?;
        if let Some(q) = spec.qubits() {
            if q != observers {
                return Err(Error::Config(format!(
                    "--settings {} has {observers} observers but the state has {q} qubits",
                    self.settings
                )));
            }
        }
        Ok(spec)
    }

    fn load(&self) -> Result<(StateSpec, DensityMatrix), Error> {
        let spec = self.spec()?;
        let rho = make_state(&spec)?;
        if rho.qubits() != self.settings.num_observers() {
            return Err(Error::Config(format!(
                "--settings {} does not match the {}-qubit state",
                self.settings,
                rho.qubits()
            )));
        }
        Ok((spec, rho))
    }
}

#[derive(Args, Debug)]
struct Expectation {
    /// Expected value; exit with status 2 if missed.
    #[arg(long)]
    expect: Option<f64>,
    /// Tolerance for --expect.
    #[arg(long, requires = "expect", default_value_t = 5e-4)]
    tol: f64,
}

impl Expectation {
    fn check(&self, v: f64) -> Option<bool> {
        self.expect.map(|x| (v - x).abs() <= self.tol)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Random restarts (default 20, or 50 above eight settings in total).
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simplex iterations per restart (default 2000 per search dimension).
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Initial simplex edge of the final descent, radians.
    #[arg(long, value_parser = angle_arg)]
    initial_step: Option<f64>,
    #[command(flatten)]
    expectation: Expectation,
    /// Write the full result record (TOML) here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the optimal angles here, in angle file format.
    #[arg(long)]
    save_angles: Option<PathBuf>,
    /// Print the local model found at the optimum.
    #[arg(long)]
    emit_model: bool,
    /// Write the linear program at the optimal angles in CPLEX LP format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Angle file: `observer setting theta phi` per line, 1-based.
    #[arg(long)]
    angles: PathBuf,
    #[command(flatten)]
    expectation: Expectation,
    /// Print the local model after the visibility.
    #[arg(long)]
    emit_model: bool,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the linear program in CPLEX LP format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["results", "model"]))]
struct VerifyArgs {
    /// Results file whose records are recomputed.
    #[arg(long, conflicts_with_all = ["state", "settings", "angles", "visibility"])]
    results: Option<PathBuf>,
    /// Model file to check against --state at --angles.
    #[arg(long, requires_all = ["state", "settings", "angles"])]
    model: Option<PathBuf>,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    phase: Option<f64>,
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    repair: bool,
    #[arg(long)]
    settings: Option<Scenario>,
    #[arg(long)]
    angles: Option<PathBuf>,
    /// Visibility to check at; defaults to the one stored in the model file.
    #[arg(long)]
    visibility: Option<f64>,
    #[arg(long, default_value_t = CERTIFICATE_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    manifest: PathBuf,
    /// Comma-separated entry ids.
    #[arg(long, value_delimiter = ',')]
    rows: Option<Vec<String>>,
    /// Also run entries marked opt-in.
    #[arg(long)]
    include_opt_in: bool,
    /// Override every entry's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override every entry's restart count.
    #[arg(long)]
    restarts: Option<usize>,
    /// Write the CSV summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write full result records (TOML) here, updated as entries finish.
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatesArgs {
    /// Density matrix file to validate.
    #[arg(long)]
    inspect: Option<PathBuf>,
    /// Clip small negative eigenvalues of the inspected file.
    #[arg(long, requires = "inspect")]
    repair: bool,
    /// Write the validated (possibly repaired) matrix here.
    #[arg(long, requires = "inspect")]
    out: Option<PathBuf>,
}

fn angle_arg(s: &str) -> Result<f64, String> {
    io::parse_angle(s)
}

/// Command failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidState(_) | Error::Visibility(_) | Error::Config(_) | Error::Index(_) => EXIT_USAGE,
            Error::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_NO_INPUT,
            Error::Parse { .. } | Error::Unphysical(_) => EXIT_DATA,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Verify(a) => verify(a),
        Command::Reproduce(a) => reproduce(a),
        Command::States(a) => states(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Prints to stdout, or writes atomically to `out`.
fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()).map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn expectation_code(check: Option<bool>, v: f64, exp: &Expectation) -> u8 {
    match check {
        Some(false) => {
            eprintln!(
                "expectation missed: {} differs from {} by more than {}",
                io::format_visibility(v),
                exp.expect.unwrap_or(f64::NAN),
                exp.tol
            );
            EXIT_MISSED
        }
        _ => 0,
    }
}

fn export_lp(rho: &DensityMatrix, angles: &AngleConfiguration, scenario: &Scenario, path: &Path) -> Result<(), Failure> {
    let p = probability_tensor(rho, angles, scenario)?;
    let lp = build_lp(&p, scenario)?;
    let mut buf = Vec::new();
    lp.write_cplex_lp(&mut buf).map_err(Error::from)?;
    io::write_atomic(path, &buf)?;
    Ok(())
}

fn certified(sol: &LhvSolution) -> Result<(), Failure> {
    if sol.is_certified() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_FAILURE,
            message: format!(
                "no certified solution: {}",
                sol.diagnostics.as_deref().unwrap_or("numerical failure")
            ),
        })
    }
}

fn solve(a: &SolveArgs) -> CmdResult {
    let (spec, rho) = a.state.load()?;
    let scenario = &a.state.settings;
    let mut opts = SearchOptions::for_scenario(scenario);
    opts.seed = a.seed;
    opts.max_iterations = a.max_iterations;
    if let Some(r) = a.restarts {
        opts.restarts = r;
    }
    if let Some(s) = a.initial_step {
        opts.initial_step = s;
    }
    opts.validate()?;
    let r = minimize_vcrit(&rho, scenario, &opts)?;

    let mut text = String::new();
    let _ = writeln!(text, "state      {spec}");
    let _ = writeln!(text, "scenario   {scenario}");
    let _ = writeln!(text, "v_crit     {}", io::format_visibility(r.v_crit));
    let _ = writeln!(text, "residual   {:.3e}", r.model.residual);
    let _ = writeln!(text, "restarts   {}", opts.restarts);
    let _ = writeln!(text, "seed       {}", opts.seed);
    let _ = writeln!(text, "lp_solves  {}", r.lp_solves);
    let _ = writeln!(text, "seconds    {:.3}", r.wall_time);
    text.push_str(&io::format_angles(&r.best_angles));
    if a.emit_model {
        text.push_str(&io::format_model(&r.model.atoms, Some(r.v_crit)));
    }
    print!("{text}");

    let record = ResultRecord::new("solve", &spec, scenario, &r, opts.seed, a.expectation.expect, Some(a.expectation.tol));
    if let Some(path) = &a.out {
        io::write_results(&[record], path)?;
    }
    if let Some(path) = &a.save_angles {
        io::write_atomic(path, io::format_angles(&r.best_angles).as_bytes())?;
    }
    if let Some(path) = &a.export_lp {
        export_lp(&rho, &r.best_angles, scenario, path)?;
    }
    Ok(expectation_code(a.expectation.check(r.v_crit), r.v_crit, &a.expectation))
}

fn eval(a: &EvalArgs) -> CmdResult {
    let scenario = &a.state.settings;
    let angles = io::read_angles(&a.angles, Some(scenario))?;
    let (_, rho) = a.state.load()?;
    let started = Instant::now();
    let sol = evaluate_at(&rho, scenario, &angles)?;
    certified(&sol)?;
    let mut text = String::new();
    let _ = writeln!(text, "v          {}", io::format_visibility(sol.visibility));
    let _ = writeln!(text, "residual   {:.3e}", sol.residual);
    let _ = writeln!(text, "iterations {}", sol.stats.iterations);
    let _ = writeln!(text, "seconds    {:.3}", started.elapsed().as_secs_f64());
    if a.emit_model {
        text.push_str(&io::format_model(&sol.atoms, Some(sol.visibility)));
    }
    emit(&text, a.out.as_deref())?;
    if let Some(path) = &a.export_lp {
        export_lp(&rho, &angles, scenario, path)?;
    }
    Ok(expectation_code(a.expectation.check(sol.visibility), sol.visibility, &a.expectation))
}

fn verify(a: &VerifyArgs) -> CmdResult {
    if let Some(path) = &a.results {
        let records = io::read_results(path)?;
        let mut code = 0;
        for r in &records {
            match r.reverify() {
                Ok(v) => println!("{} ok {}", r.id, io::format_visibility(v)),
                Err(e) => {
                    println!("{} FAIL {e}", r.id);
                    code = EXIT_MISSED;
                }
            }
        }
        return Ok(code);
    }
    let (Some(model_path), Some(state), Some(settings), Some(angles_path)) = (&a.model, &a.state, &a.settings, &a.angles)
    else {
        return Err(Error::Config("--model needs --state, --settings and --angles".into()).into());
    };
    let state_args = StateArgs {
        state: state.clone(),
        qubits: a.qubits,
        alpha: a.alpha,
        k: a.k,
        phase: a.phase,
        file: a.file.clone(),
        repair: a.repair,
        settings: settings.clone(),
    };
    let angles = io::read_angles(angles_path, Some(settings))?;
    let model = io::read_model(model_path)?;
    let v = a
        .visibility
        .or(model.visibility)
        .ok_or_else(|| Error::Config("model file has no visibility line; pass --visibility".into()))?;
    let (_, rho) = state_args.load()?;
    let p = probability_tensor(&rho, &angles, settings)?;
    let report = verify_lhv_model(&model.atoms, v, &p, a.tol)?;
    println!("visibility     {}", io::format_visibility(v));
    println!("max_residual   {:.3e}", report.max_residual);
    println!("normalization  {:.3e}", report.normalization_error);
    println!("bounds         {:.3e}", report.bound_violation);
    println!("result         {}", if report.pass { "pass" } else { "FAIL" });
    Ok(if report.pass { 0 } else { EXIT_MISSED })
}

fn run_entry(e: &ManifestEntry, seed: Option<u64>, restarts: Option<usize>) -> Result<ResultRecord, Error> {
    let mut opts = e.options.clone();
    if let Some(s) = seed {
        opts.seed = s;
    }
    if let Some(r) = restarts {
        opts.restarts = r;
    }
    let rho = make_state(&e.state)?;
    let r = minimize_vcrit(&rho, &e.scenario, &opts)?;
    Ok(ResultRecord::new(&e.id, &e.state, &e.scenario, &r, opts.seed, e.expected, Some(e.tolerance)))
}

fn reproduce(a: &ReproduceArgs) -> CmdResult {
    let manifest = io::load_manifest(&a.manifest)?;
    let selected = manifest.select(a.rows.as_deref(), a.include_opt_in)?;
    if let Some(r) = a.restarts {
        if r == 0 {
            return Err(Error::Config("--restarts must be at least 1".into()).into());
        }
    }
    let finished: Mutex<Vec<ResultRecord>> = Mutex::new(Vec::new());
    let outcomes: Vec<(usize, Result<ResultRecord, Error>)> = selected
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            log::info!("entry {}: {} {}", e.id, e.state, e.scenario);
            let out = run_entry(e, a.seed, a.restarts);
            if let (Ok(rec), Some(path)) = (&out, &a.results) {
                let mut done = finished.lock().unwrap_or_else(|p| p.into_inner());
                done.push(rec.clone());
                if let Err(err) = io::write_results(&done, path) {
                    log::error!("cannot update {}: {err}", path.display());
                }
            }
            (i, out)
        })
        .collect();

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut records = Vec::new();
    let (mut errors, mut missed, mut passed) = (0, 0, 0);
    for ((_, out), e) in outcomes.into_iter().zip(&selected) {
        match out {
            Ok(rec) => {
                let row = SummaryRow::from(&rec);
                match rec.passed() {
                    Some(true) => passed += 1,
                    Some(false) => missed += 1,
                    None => {}
                }
                rows.push(row);
                records.push(rec);
            }
            Err(err) => {
                errors += 1;
                eprintln!("entry {}: {err}", e.id);
                rows.push(SummaryRow {
                    id: e.id.clone(),
                    state: e.state.to_string(),
                    scenario: e.scenario.to_string(),
                    v_crit: None,
                    expected: e.expected,
                    residual: None,
                    seconds: 0.0,
                    status: "error",
                });
            }
        }
    }
    if let Some(path) = &a.results {
        io::write_results(&records, path)?;
    }
    let mut csv = Vec::new();
    io::write_csv(&rows, &mut csv, true)?;
    emit(&String::from_utf8_lossy(&csv), a.out.as_deref())?;
    let with_expectation = rows.iter().filter(|r| r.expected.is_some()).count();
    eprintln!("{passed}/{with_expectation} expectations met, {errors} errors");
    Ok(if errors > 0 {
        EXIT_FAILURE
    } else if missed > 0 {
        EXIT_MISSED
    } else {
        0
    })
}

fn states(a: &StatesArgs) -> CmdResult {
    let Some(path) = &a.inspect else {
        for (name, description) in FAMILIES {
            println!("{name:<8} {description}");
        }
        return Ok(0);
    };
    let f = io::read_density_matrix(path, &ReadOptions { repair: a.repair })?;
    let eig = f.matrix.eigenvalues();
    println!("qubits        {}", f.num_qubits());
    println!("min_eigen     {:.3e}", eig[0]);
    println!("purity        {:.6}", f.matrix.purity());
    for (k, v) in &f.metadata {
        println!("meta.{k} = {v}");
    }
    if let Some(out) = &a.out {
        io::write_density_matrix(out, &f.matrix, &f.metadata)?;
    }
    Ok(0)
}
