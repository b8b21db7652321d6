use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flexenv_core::disagg::{monte_carlo_verify, samples_csv, DisaggError, SamplerConfig};
use flexenv_core::envelope::{
    solve_envelope, EnvelopeError, EnvelopeKind, EnvelopeOptions, EnvelopeSolution, SocMode,
};
use flexenv_core::market::{solve_market, MarketError, MarketOptions, MarketPrices};
use flexenv_core::netmodel::{load_case, CaseError, NetworkError, Scenario, UncertaintySpec};
use flexenv_core::{assets, lp};
use lp::{ExternalSolver, LpError, LpModel, LpSolution, LpSolver, SimplexSolver};

use flexenv_cli::sweep;

#[derive(Parser)]
#[command(name = "flexenv", version, about = "Flexibility envelopes at the grid connection point")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an envelope and write envelope.json and gcp_envelope.csv.
    Envelope(Common),
    /// Sample trajectories inside an envelope and check disaggregation.
    Verify(VerifyArgs),
    /// Co-optimize a base schedule and envelope under market prices.
    Market(MarketArgs),
    /// Run a parameter study and write one CSV row per grid point.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Case JSON; the bundled 33-bus case when omitted.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Profiles CSV replacing the case's own profiles.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long, default_value = "baseline", value_parser = parse_kind)]
    model: EnvelopeKind,
    #[arg(long, default_value = "strict", value_parser = parse_mode)]
    mode: SocMode,
    /// Relative load forecast error.
    #[arg(long, default_value_t = 0.0, value_parser = fraction)]
    robust_alpha: f64,
    /// Relative PV forecast error.
    #[arg(long, default_value_t = 0.0, value_parser = fraction)]
    robust_beta: f64,
    /// Include reactive load error in the voltage margins.
    #[arg(long)]
    robust_reactive: bool,
    /// Use 2r, 2x in the voltage sensitivities.
    #[arg(long)]
    factor2: bool,
    /// Do not ramp-limit the first step against p_init.
    #[arg(long)]
    no_initial_ramp: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// `bundled` or `external:<program>`.
    #[arg(long, default_value = "bundled", value_parser = parse_solver)]
    solver: SolverChoice,
    /// Write each LP model in text form to this path before solving.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Envelope JSON from a previous `envelope` run; solved afresh when omitted.
    #[arg(long)]
    envelope: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    vertices: usize,
    #[arg(long, default_value_t = 4000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct MarketArgs {
    #[command(flatten)]
    common: Common,
    /// Price CSV; the bundled prices when omitted.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Allow negative FRP quantities instead of constraining them to be >= 0.
    #[arg(long)]
    frp_signed: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    EssScale,
    Alpha,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated grid; defaults to 1,2,3,5 or 0,0.03,0.05,0.1.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
enum SolverChoice {
    Bundled,
    External(PathBuf),
}

fn parse_kind(s: &str) -> Result<EnvelopeKind, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<SocMode, String> {
    s.parse()
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    match s {
        "bundled" => Ok(SolverChoice::Bundled),
        _ => match s.strip_prefix("external:") {
            Some(p) if !p.is_empty() => Ok(SolverChoice::External(p.into())),
            _ => Err(format!("expected `bundled` or `external:<program>`, got `{s}`")),
        },
    }
}

/// Exit status plus the message printed to stderr.
struct Failure {
    code: u8,
    msg: String,
}

type CmdResult = Result<ExitCode, Failure>;

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        msg: format!("{}: {e}", path.display()),
    }
}

impl From<CaseError> for Failure {
    fn from(e: CaseError) -> Self {
        Failure { code: 2, msg: e.to_string() }
    }
}

impl From<EnvelopeError> for Failure {
    fn from(e: EnvelopeError) -> Self {
        let code = match &e {
            EnvelopeError::Lp(LpError::Io(_)) | EnvelopeError::Lp(LpError::External(_)) => 2,
            EnvelopeError::Network(NetworkError::Dimension { .. }) => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<MarketError> for Failure {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Envelope(e) => e.into(),
            other => Failure { code: 2, msg: other.to_string() },
        }
    }
}

impl From<DisaggError> for Failure {
    fn from(e: DisaggError) -> Self {
        Failure { code: 2, msg: e.to_string() }
    }
}

/// Wraps a solver so every model it sees is first written out as LP text.
struct Dumping<'a> {
    inner: &'a dyn LpSolver,
    path: PathBuf,
}

impl LpSolver for Dumping<'_> {
    fn solve(&self, model: &LpModel) -> Result<LpSolution, LpError> {
        fs::write(&self.path, lp::write_lp_text(model))?;
        self.inner.solve(model)
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

impl Common {
    fn scenario(&self) -> Result<Scenario, Failure> {
        match &self.case {
            Some(p) => Ok(load_case(p, self.profiles.as_deref())?),
            None => {
                let mut sc = assets::case33();
                if let Some(p) = &self.profiles {
                    let text = fs::read_to_string(p).map_err(|e| io_fail(p, e))?;
                    sc = flexenv_core::netmodel::parse_case_with_profiles(&sc.to_case_json(), &text)?;
                }
                Ok(sc)
            }
        }
    }

    fn options(&self) -> EnvelopeOptions {
        let mut o = EnvelopeOptions::new(self.model);
        o.soc_mode = self.mode;
        o.initial_ramp = !self.no_initial_ramp;
        o.factor2 = self.factor2;
        o.uncertainty = UncertaintySpec {
            reactive: self.robust_reactive,
            ..UncertaintySpec::new(self.robust_alpha, self.robust_beta)
        };
        o
    }

    fn with_solver<T>(&self, f: impl FnOnce(&dyn LpSolver) -> T) -> T {
        let bundled = SimplexSolver::default();
        let external;
        let base: &dyn LpSolver = match &self.solver {
            SolverChoice::Bundled => &bundled,
            SolverChoice::External(p) => {
                external = ExternalSolver::new(p);
                &external
            }
        };
        match &self.dump_lp {
            Some(path) => f(&Dumping {
                inner: base,
                path: path.clone(),
            }),
            None => f(base),
        }
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out).map_err(|e| io_fail(&self.out, e))?;
        Ok(self.out.join(name))
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.out_file(name)?;
        fs::write(&path, contents).map_err(|e| io_fail(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

fn cmd_envelope(c: &Common) -> CmdResult {
    let sc = c.scenario()?;
    let env = c.with_solver(|s| solve_envelope(&sc, &c.options(), s))?;
    c.write("envelope.json", &env.to_json())?;
    c.write("gcp_envelope.csv", &env.gcp_csv())?;
    println!("{:.6}", env.area_kwh);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    let c = &a.common;
    let sc = c.scenario()?;
    let env = match &a.envelope {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_fail(p, e))?;
            EnvelopeSolution::from_json(&text).map_err(|e| Failure {
                code: 2,
                msg: format!("{}: {e}", p.display()),
            })?
        }
        None => c.with_solver(|s| solve_envelope(&sc, &c.options(), s))?,
    };
    let cfg = SamplerConfig {
        n_vertex: a.vertices,
        n_uniform: a.samples,
        seed: a.seed,
    };
    let (summary, outcomes) = monte_carlo_verify(&env, &sc, &cfg)?;
    c.write("verify_report.json", &summary.to_json())?;
    c.write("verify_samples.csv", &samples_csv(&outcomes, env.steps))?;
    println!("{}/{} feasible", summary.n_feasible, summary.n_total);
    if summary.all_feasible() {
        return Ok(ExitCode::SUCCESS);
    }
    for (family, count) in &summary.histogram {
        println!("  {family}: {count}");
    }
    if let Some(w) = summary.worst.first() {
        println!(
            "worst: sample {} {} element {} step {} by {:.6}",
            w.sample, w.violation.family, w.violation.element, w.violation.step, w.violation.magnitude
        );
    }
    Ok(ExitCode::from(3))
}

fn cmd_market(a: &MarketArgs) -> CmdResult {
    let c = &a.common;
    let sc = c.scenario()?;
    let prices = match &a.prices {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_fail(p, e))?;
            MarketPrices::from_csv(&text)?
        }
        None => assets::case33_prices(),
    };
    let mopts = MarketOptions {
        frp_nonnegative: !a.frp_signed,
    };
    let m = c.with_solver(|s| solve_market(&sc, &prices, &c.options(), &mopts, s))?;
    c.write("market.json", &m.to_json())?;
    println!("{:<10} {:>14} {:>14} {:>14}", "model", "energy_cost", "revenue", "objective");
    println!(
        "{:<10} {:>14.2} {:>14.2} {:>14.2}",
        c.model.name(),
        m.cost_energy,
        m.revenue(),
        m.objective
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let c = &a.common;
    let sc = c.scenario()?;
    let opts = c.options();
    let (name, csv) = c.with_solver(|s| match a.param {
        SweepParam::EssScale => {
            let grid = a.grid.clone().unwrap_or_else(|| vec![1.0, 2.0, 3.0, 5.0]);
            ("sweep_ess_scale.csv", sweep::ess_scale(&sc, &opts, &grid, s).to_csv())
        }
        SweepParam::Alpha => {
            let grid = a.grid.clone().unwrap_or_else(|| vec![0.0, 0.03, 0.05, 0.10]);
            ("sweep_alpha.csv", sweep::alpha(&sc, &opts, &grid, s).to_csv())
        }
    });
    c.write(name, &csv)?;
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLEXENV_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Envelope(c) => cmd_envelope(c),
        Command::Verify(a) => cmd_verify(a),
        Command::Market(a) => cmd_market(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
