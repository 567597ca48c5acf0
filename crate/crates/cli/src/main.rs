use clap::{Args, Parser, Subcommand};
use dbarlab::commands::{list_weights, run};
use dbarlab::config::{parse_radii, Command, RunConfig, Settings, SolveMode};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 1;

#[derive(Parser)]
#[command(name = "dbarlab", version, about = "Weighted d-bar complex: Levi criteria, Kohn-Morrey checks and discrete spectra")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sampled Levi-eigenvalue criterion across radii
    Analyze(RunArgs),
    /// Kohn-Morrey identity residuals on seeded bump forms
    Verify(RunArgs),
    /// Low-lying spectrum of the discrete complex Laplacian across radii
    Spectrum(RunArgs),
    /// Neumann or canonical solve for a seeded right-hand side
    Solve(RunArgs),
    /// Built-in weights
    ListWeights,
}

#[derive(Args)]
struct RunArgs {
    /// INI file with [weight], [grid] and [run] sections
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in weight name
    #[arg(long, conflicts_with = "expr")]
    weight: Option<String>,
    /// Weight expression, e.g. "modsq(z1)^2 + modsq(z2)"
    #[arg(long)]
    expr: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Box half-width for verify and solve
    #[arg(long)]
    radius: Option<f64>,
    /// Grid points per real axis for verify and solve
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated increasing radii for analyze and spectrum
    #[arg(long, value_parser = parse_radii_arg)]
    radii: Option<Radii>,
    /// Grid points per unit radius in spectrum
    #[arg(long)]
    m_per_r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Accepted rel_err for verify, solver tolerance otherwise
    #[arg(long)]
    tol: Option<f64>,
    /// Number of eigenvalues per radius
    #[arg(long)]
    k: Option<usize>,
    /// Number of bump forms in verify
    #[arg(long)]
    trials: Option<usize>,
    /// Sampled sphere directions per radius in analyze
    #[arg(long)]
    directions: Option<usize>,
    /// Solve mode
    #[arg(long, value_parser = ["neumann", "canonical"])]
    mode: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// CSV destination (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Binary file for the solution form in solve
    #[arg(long)]
    form_out: Option<PathBuf>,
    /// Matrix Market file for the box at the largest radius in spectrum
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone)]
struct Radii(Vec<f64>);

fn parse_radii_arg(s: &str) -> Result<Radii, String> {
    parse_radii(s).map(Radii)
}

impl RunArgs {
    fn settings(self) -> (Option<PathBuf>, Settings) {
        let s = Settings {
            weight: self.weight,
            expr: self.expr,
            n: self.n,
            q: self.q,
            radius: self.radius,
            m: self.m,
            radii: self.radii.map(|r| r.0),
            m_per_r: self.m_per_r,
            seed: self.seed,
            tol: self.tol,
            k: self.k,
            trials: self.trials,
            directions: self.directions,
            mode: self.mode.map(|m| m.parse::<SolveMode>().expect("clap restricts the values")),
            max_iter: self.max_iter,
            out: self.out,
            form_out: self.form_out,
            matrix_out: self.matrix_out,
            threads: self.threads,
        };
        (self.config, s)
    }
}

/// Exit code and captured streams of one invocation.
struct Execution {
    code: u8,
    stdout: String,
    stderr: String,
}

impl Execution {
    fn usage_error(reason: &str, detail: impl std::fmt::Display) -> Self {
        Execution { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error,{reason},{detail}\n") }
    }
}

fn execute<I, T>(args: I) -> Execution
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => return Execution { code: 0, stdout: e.render().to_string(), stderr: String::new() },
        Err(e) => return Execution { code: EXIT_USAGE, stdout: String::new(), stderr: e.render().to_string() },
    };
    let (command, args) = match cli.command {
        Cmd::ListWeights => return Execution { code: 0, stdout: list_weights(), stderr: String::new() },
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Solve(a) => (Command::Solve, a),
    };
    let (config_path, flags) = args.settings();
    let file = match config_path {
        Some(p) => match Settings::from_ini_file(&p) {
            Ok(s) => s,
            Err(e) => return Execution::usage_error("config", e),
        },
        None => Settings::default(),
    };
    let cfg = match RunConfig::resolve(command, file.overridden_by(flags)) {
        Ok(c) => c,
        Err(e) => return Execution::usage_error("config", e),
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return Execution::usage_error("threads", e);
        }
    }
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return Execution::usage_error("run", e),
    };
    let mut text = cfg.comment_header();
    text.push_str(&outcome.body);
    match &outcome.failure {
        None => text.push_str("# status = pass\n"),
        Some(r) => text.push_str(&format!("# status = fail: {r}\n")),
    }
    let stdout = match &cfg.out {
        Some(p) => match std::fs::write(p, &text) {
            Ok(()) => String::new(),
            Err(e) => return Execution::usage_error("output", e),
        },
        None => text,
    };
    match outcome.failure {
        None => Execution { code: 0, stdout, stderr: String::new() },
        Some(reason) => Execution { code: EXIT_CHECK_FAILED, stdout, stderr: format!("check_failed,{},{reason}\n", cfg.command.name()) },
    }
}

fn main() -> ExitCode {
    let ex = execute(std::env::args_os());
    let _ = std::io::stdout().lock().write_all(ex.stdout.as_bytes());
    let _ = std::io::stderr().lock().write_all(ex.stderr.as_bytes());
    ExitCode::from(ex.code)
}
