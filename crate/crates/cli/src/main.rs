use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchsel::ess::{solve_ess, EssKind, EssOptions};
use patchsel::sim::{
    simulate_dimorphic, simulate_dispersal, simulate_linearized_invasion, simulate_monomorphic,
    Scheme, SimConfig, Trajectory,
};
use patchsel::sweep::{
    ess_sweep, ess_table, pair_sweep, pair_table, provenance, Axis, SweepParam, SweepTable,
};
use patchsel::{classify_outcome, DispersalMatrix, Error, Landscape, Strategy, SEED_ENV, TOL_ZERO};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "patchsel",
    version,
    about = "Patch selection in stochastic landscapes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invasion rates and competitive outcome of two strategies.
    Analyze(AnalyzeArgs),
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Solve for an evolutionarily stable strategy.
    Ess(EssArgs),
    /// Grid evaluations written as CSV.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Check a landscape file.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    landscape: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Vec<f64>,
    #[arg(long, default_value_t = TOL_ZERO)]
    tol_zero: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    /// One population playing `--alpha`.
    Mono,
    /// Populations playing `--alpha` and `--beta`.
    Di,
    /// Resident `--alpha` with a rare, non-self-limiting invader `--beta`.
    Linear,
    /// Explicit movement between patches with `--dispersal` and `--delta`.
    Dispersal,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    LogEuler,
    Euler,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1000.0)]
    t_max: f64,
    /// Defaults to 10% of the horizon.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    replicates: usize,
    /// Replicate whose path is written out.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    #[arg(long, value_enum, default_value_t = SchemeArg::LogEuler)]
    scheme: SchemeArg,
    /// Store every k-th grid point.
    #[arg(long, default_value_t = 1)]
    record_every: usize,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        let mut cfg = SimConfig::new(self.dt, self.t_max)
            .with_seed(self.seed)
            .with_replicates(self.replicates)
            .with_record_every(self.record_every)
            .with_scheme(match self.scheme {
                SchemeArg::LogEuler => Scheme::LogEuler,
                SchemeArg::Euler => Scheme::Euler,
            });
        if let Some(b) = self.burn_in {
            cfg = cfg.with_burn_in(b);
        }
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    landscape: PathBuf,
    #[arg(long, value_enum, default_value_t = Model::Mono)]
    model: Model,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long, default_value_t = 1.0)]
    y0: f64,
    /// Initial patch abundances for the dispersal model (default: all `x0`).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0_patches: Vec<f64>,
    /// Dispersal rates, rows separated by `;`, e.g. `-1,1;1,-1`.
    #[arg(long, allow_hyphen_values = true)]
    dispersal: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[command(flatten)]
    sim: SimArgs,
    /// Trajectory CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct EssArgs {
    #[arg(long)]
    landscape: PathBuf,
    /// Add this to the diagonal of the covariance before solving.
    #[arg(long)]
    regularize: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Outcome of (a, 1-a) against (b, 1-b) over a grid; two-patch landscapes only.
    Pairs(PairSweepArgs),
    /// ESS along one landscape parameter.
    Ess(EssSweepArgs),
}

#[derive(Args)]
struct PairSweepArgs {
    #[arg(long)]
    landscape: PathBuf,
    /// `lo:hi:resolution` for the first component of the resident.
    #[arg(long, default_value = "0:1:101")]
    alpha: String,
    /// `lo:hi:resolution` for the first component of the invader.
    #[arg(long, default_value = "0:1:101")]
    beta: String,
    /// Override every diagonal entry of the covariance.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = TOL_ZERO)]
    tol_zero: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EssSweepArgs {
    #[arg(long)]
    landscape: PathBuf,
    /// `mu:i`, `kappa:i`, `sigma:i` (1-based) or `sigma2`.
    #[arg(long)]
    param: String,
    /// `lo:hi:resolution`.
    #[arg(long, allow_hyphen_values = true)]
    range: String,
    #[arg(long)]
    regularize: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    landscape: PathBuf,
}

enum Failure {
    Usage(String),
    Domain(Error),
    FileNotFound(PathBuf),
    /// Output was written but the result is a domain failure.
    NotFound,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::FileNotFound(p)) => {
            eprintln!("error: FileNotFound: {}", p.display());
            ExitCode::from(1)
        }
        Err(Failure::NotFound) => {
            eprintln!("error: NotFound: no candidate passed certification; best candidate printed");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Ess(a) => ess(a),
        Command::Sweep(SweepCommand::Pairs(a)) => sweep_pairs(a),
        Command::Sweep(SweepCommand::Ess(a)) => sweep_ess(a),
        Command::Validate(a) => validate(a),
    }
}

fn load(path: &Path) -> Result<Landscape, Failure> {
    if !path.exists() {
        return Err(Failure::FileNotFound(path.to_path_buf()));
    }
    Ok(Landscape::load(path)?)
}

fn strategy(name: &str, v: &[f64]) -> Result<Strategy, Failure> {
    if v.is_empty() {
        return Err(Failure::Usage(format!("--{name} is required")));
    }
    Ok(Strategy::new(v.to_vec())?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(v: &Value) -> CliResult {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(v).expect("json value serialises")
    )?;
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let l = load(&a.landscape)?;
    let (alpha, beta) = (strategy("alpha", &a.alpha)?, strategy("beta", &a.beta)?);
    let report = classify_outcome(&l, &alpha, &beta, a.tol_zero)?;
    match a.format {
        Format::Json => {
            let mut v = serde_json::to_value(report).expect("report serialises");
            v["alpha"] = json!(alpha);
            v["beta"] = json!(beta);
            print_json(&v)
        }
        Format::Csv => {
            let table = SweepTable {
                header: patchsel::InvasionReport::CSV_HEADER
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                rows: vec![report.csv_record()],
            };
            let label = format!("analyze tol_zero={:e}", a.tol_zero);
            table.write_csv(
                &provenance(&label, &SimConfig::default(), &[]),
                io::stdout().lock(),
            )?;
            Ok(())
        }
    }
}

fn parse_dispersal(text: &str, delta: f64) -> Result<DispersalMatrix, Failure> {
    let rows: Result<Vec<Vec<f64>>, _> = text
        .split(';')
        .map(|r| r.split(',').map(|v| v.trim().parse::<f64>()).collect())
        .collect();
    let rows = rows.map_err(|e| Failure::Usage(format!("--dispersal: {e}")))?;
    Ok(DispersalMatrix::new(rows, delta)?)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let l = load(&a.landscape)?;
    let cfg = a.sim.config();
    cfg.validate()?;
    let run_cfg = cfg.with_stream(a.sim.replicate);
    let mut extra = serde_json::Map::new();
    let traj: Trajectory = match a.model {
        Model::Mono => simulate_monomorphic(&l, &strategy("alpha", &a.alpha)?, a.x0, &run_cfg)?,
        Model::Di => {
            let (alpha, beta) = (strategy("alpha", &a.alpha)?, strategy("beta", &a.beta)?);
            simulate_dimorphic(&l, &alpha, &beta, a.x0, a.y0, &run_cfg)?
        }
        Model::Linear => {
            let (alpha, beta) = (strategy("alpha", &a.alpha)?, strategy("beta", &a.beta)?);
            let est = simulate_linearized_invasion(&l, &alpha, &beta, a.x0, a.y0, &cfg)?;
            extra.insert("invader_slope".into(), json!(est.slope));
            extra.insert("invader_slope_std_error".into(), json!(est.std_error));
            extra.insert("invader_slopes".into(), json!(est.slopes));
            let pick = a.sim.replicate as usize;
            if pick == 0 {
                est.trajectory
            } else {
                simulate_linearized_invasion(
                    &l,
                    &alpha,
                    &beta,
                    a.x0,
                    a.y0,
                    &run_cfg.clone().with_replicates(1),
                )?
                .trajectory
            }
        }
        Model::Dispersal => {
            let text = a.dispersal.as_deref().ok_or_else(|| {
                Failure::Usage("--dispersal is required for the dispersal model".into())
            })?;
            let d = parse_dispersal(text, a.delta)?;
            let x0 = if a.x0_patches.is_empty() {
                vec![a.x0; l.n()]
            } else {
                a.x0_patches.clone()
            };
            simulate_dispersal(&l, &d, &x0, &run_cfg)?
        }
    };
    let model = a
        .model
        .to_possible_value()
        .expect("value enum")
        .get_name()
        .to_string();
    let prov = provenance(
        &format!("simulate model={model}"),
        &cfg,
        &[("replicate", a.sim.replicate.to_string())],
    );
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "# {prov}")?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    if let Some(p) = a.stats.as_deref() {
        let mut v = serde_json::to_value(&traj.stats).expect("stats serialise");
        if let Value::Object(m) = &mut v {
            m.extend(extra);
            m.insert("provenance".into(), json!(prov));
        }
        std::fs::write(
            p,
            serde_json::to_string_pretty(&v).expect("json value serialises") + "\n",
        )?;
    }
    Ok(())
}

fn ess(a: EssArgs) -> CliResult {
    let l = load(&a.landscape)?;
    let opts = EssOptions {
        regularization: a.regularize,
        certify_samples: a.samples,
        seed: a.seed,
        ..EssOptions::default()
    };
    let res = solve_ess(&l, &opts)?;
    let mut v = serde_json::to_value(&res).expect("ess result serialises");
    v["provenance"] = json!(provenance(
        "ess",
        &SimConfig::default().with_seed(a.seed),
        &[("samples", a.samples.to_string())]
    ));
    print_json(&v)?;
    if res.kind == EssKind::NotFound {
        return Err(Failure::NotFound);
    }
    Ok(())
}

fn sweep_pairs(a: PairSweepArgs) -> CliResult {
    let mut l = load(&a.landscape)?;
    if let Some(s2) = a.sigma2 {
        l = SweepParam::Sigma2.apply(&l, s2)?;
    }
    let (alpha, beta): (Axis, Axis) = (a.alpha.parse()?, a.beta.parse()?);
    let cells = pair_sweep(&l, alpha, beta, a.tol_zero)?;
    let mut extra = vec![("alpha", a.alpha.clone()), ("beta", a.beta.clone())];
    if let Some(s2) = a.sigma2 {
        extra.push(("sigma2", s2.to_string()));
    }
    let mut out = output(a.out.as_deref())?;
    pair_table(&cells).write_csv(
        &provenance("sweep pairs", &SimConfig::default(), &extra),
        &mut out,
    )?;
    out.flush()?;
    Ok(())
}

fn sweep_ess(a: EssSweepArgs) -> CliResult {
    let l = load(&a.landscape)?;
    let param: SweepParam = a.param.parse()?;
    let axis: Axis = a.range.parse()?;
    let opts = EssOptions {
        regularization: a.regularize,
        certify_samples: a.samples,
        seed: a.seed,
        ..EssOptions::default()
    };
    let cells = ess_sweep(&l, param, axis, &opts)?;
    let mut extra = vec![("param", param.to_string()), ("range", a.range.clone())];
    if let Some(eps) = a.regularize {
        extra.push(("regularize", eps.to_string()));
    }
    let cfg = SimConfig::default().with_seed(a.seed);
    let mut out = output(a.out.as_deref())?;
    ess_table(&cells, l.n()).write_csv(&provenance("sweep ess", &cfg, &extra), &mut out)?;
    out.flush()?;
    Ok(())
}

fn validate(a: ValidateArgs) -> CliResult {
    let l = load(&a.landscape)?;
    print_json(&json!({
        "valid": true,
        "n": l.n(),
        "min_eigenvalue": l.min_eigenvalue(),
        "positive_definite": l.is_positive_definite(),
    }))
}
