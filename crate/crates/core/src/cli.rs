//! Command-line front end.
//!
//! Every subcommand accepts `--config file.json`; keys in the file use the
//! long flag names with dashes replaced by underscores, and flags given on
//! the command line win over the file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analysis::tv::default_bin_width;
use crate::analysis::{
    empirical_decay_rate, scaling_limit_check, tv_curve, EstimateWithCI, ScalingCheck,
};
use crate::coupling::{coupling_batch, default_horizon, write_batch_csv, CouplingSpec};
use crate::error::{Error, Result};
use crate::excursions::{
    excursion_records, hitting_samples, regenerative_estimate, write_records_csv, Integrand,
};
use crate::model::{LaplaceValue, ModelParams, Process};
use crate::path::{State, Velocity};
use crate::rng::RngStream;
use crate::simulate::{simulate_reflected, simulate_unreflected};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_GATE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "telegraph",
    version,
    about = "Exact simulation and coupling of the origin-attracted telegraph process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path and print it as CSV.
    Simulate(Invocation<SimulateArgs>),
    /// Sample excursions from (0, +1).
    Excursions(Invocation<ExcursionArgs>),
    /// Regenerative estimate of an invariant expectation.
    Invariant(Invocation<InvariantArgs>),
    /// Hitting times of the origin for the reflected process.
    Hitting(Invocation<HittingArgs>),
    /// Batch of coalescent couplings.
    Couple(Invocation<CoupleArgs>),
    /// Coupling survival, binned TV and bound on a time grid.
    Tvcurve(Invocation<TvArgs>),
    /// Rescaled telegraph endpoints against the SDE oracle.
    Scaling(Invocation<ScalingArgs>),
    /// Closed-form quantities.
    Formulas(Invocation<FormulaArgs>),
}

#[derive(Args, Debug)]
struct Invocation<T: Args> {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    args: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProcessArg {
    Reflected,
    Unreflected,
}

impl From<ProcessArg> for Process {
    fn from(p: ProcessArg) -> Process {
        match p {
            ProcessArg::Reflected => Process::Reflected,
            ProcessArg::Unreflected => Process::Unreflected,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum IntegrandArg {
    /// 1{x <= param}
    Indicator,
    /// exp(param * x)
    Exponential,
    /// x^param
    Moment,
    /// 1{v = +1}
    Velocity,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct Common {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    /// Worker threads (falls back to TELEGRAPH_THREADS, then all cores).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    /// Turn the subcommand's reference comparison into a pass/fail gate.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    check: bool,
    /// JSON file with default values for any of the flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    process: Option<ProcessArg>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
    /// Initial velocity, 1 or -1.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    v0: Option<i8>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct ExcursionArgs {}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct InvariantArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    integrand: Option<IntegrandArg>,
    /// Threshold, exponent rate or moment order, depending on the integrand.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct HittingArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    v: Option<i8>,
    /// Transform argument; defaults to half the critical rate.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct CoupleArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    process: Option<ProcessArg>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    v1: Option<i8>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    v2: Option<i8>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct TvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    starts: CoupleArgs,
    /// Comma-separated increasing times (default 1,2,...,20).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<String>,
    /// Position bin width (default 0.05/(b-a)).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct ScalingArgs {
    /// Comma-separated scales N (default 4,16,100).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scales: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    xi0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FormulaArgs {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x_tilde: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
}

/// Failure modes of a CLI run, mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
    Gate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidRates { .. } | Error::Degenerate(_) | Error::InvalidArgument(_) => {
                Failure::Invalid(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Resolved shared settings.
struct Ctx {
    p: ModelParams,
    seed: u64,
    n: Option<usize>,
    format: Option<Format>,
    output: Option<PathBuf>,
    check: bool,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            EXIT_INVALID
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
        Err(Failure::Gate(m)) => {
            eprintln!("check failed: {m}");
            EXIT_GATE
        }
    }
}

/// Overlays the flags given on the command line onto the config file.
fn merge<T: Serialize + DeserializeOwned>(file: &Map<String, Value>, flags: &T) -> Outcome<T> {
    let mut merged = file.clone();
    if let Value::Object(m) =
        serde_json::to_value(flags).map_err(|e| Failure::Invalid(e.to_string()))?
    {
        merged.extend(m);
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Failure::Invalid(format!("config: {e}")))
}

fn load_config(path: &Option<PathBuf>) -> Outcome<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::Invalid(
            "config file must hold a JSON object".into(),
        )),
        Err(e) => Err(Failure::Invalid(format!("{}: {e}", path.display()))),
    }
}

fn resolve<T: Args + Serialize + DeserializeOwned>(
    inv: Invocation<T>,
) -> Outcome<(Ctx, T, Option<usize>)> {
    let file = load_config(&inv.common.config)?;
    let common: Common = merge(&file, &inv.common)?;
    let args: T = merge(&file, &inv.args)?;
    let threads =
        match common.threads {
            Some(t) => Some(t),
            None => match std::env::var("TELEGRAPH_THREADS") {
                Ok(s) => Some(s.trim().parse().map_err(|_| {
                    Failure::Invalid(format!("TELEGRAPH_THREADS={s} is not a count"))
                })?),
                Err(_) => None,
            },
        };
    if threads == Some(0) {
        return Err(Failure::Invalid("thread count must be >= 1".into()));
    }
    if common.n == Some(0) {
        return Err(Failure::Invalid("n must be >= 1".into()));
    }
    let p = ModelParams::new(common.a.unwrap_or(1.0), common.b.unwrap_or(2.0))?;
    let ctx = Ctx {
        p,
        seed: common.seed.unwrap_or(0),
        n: common.n,
        format: common.format,
        output: common.output,
        check: common.check,
    };
    Ok((ctx, args, threads))
}

fn dispatch(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Simulate(i) => with_pool(i, simulate),
        Command::Excursions(i) => with_pool(i, excursions),
        Command::Invariant(i) => with_pool(i, invariant),
        Command::Hitting(i) => with_pool(i, hitting),
        Command::Couple(i) => with_pool(i, couple),
        Command::Tvcurve(i) => with_pool(i, tvcurve),
        Command::Scaling(i) => with_pool(i, scaling),
        Command::Formulas(i) => with_pool(i, formulas),
    }
}

fn with_pool<T, F>(inv: Invocation<T>, f: F) -> Outcome<()>
where
    T: Args + Serialize + DeserializeOwned + Send,
    F: FnOnce(&Ctx, T) -> Outcome<()> + Send,
{
    let (ctx, args, threads) = resolve(inv)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    pool.install(|| f(&ctx, args))
}

fn velocity(v: Option<i8>, default: Velocity) -> Outcome<Velocity> {
    v.map_or(Ok(default), |v| Velocity::from_i8(v).map_err(Failure::from))
}

fn sink(ctx: &Ctx) -> Outcome<Box<dyn Write>> {
    Ok(match &ctx.output {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|e| {
                Failure::Runtime(format!("{}: {e}", path.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn meta(ctx: &Ctx) -> Value {
    json!({
        "seed": ctx.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "params": { "a": ctx.p.a(), "b": ctx.p.b() },
    })
}

/// Writes a flat JSON object of scalars plus `meta`.
fn emit_json(ctx: &Ctx, fields: Value) -> Outcome<()> {
    let mut obj = match fields {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    obj.insert("meta".into(), meta(ctx));
    let mut out = sink(ctx)?;
    serde_json::to_writer_pretty(&mut out, &Value::Object(obj))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn emit_csv(ctx: &Ctx, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Outcome<()> {
    let mut out = sink(ctx)?;
    write(&mut out)?;
    out.flush()?;
    Ok(())
}

fn gate(ctx: &Ctx, ok: bool, what: String) -> Outcome<()> {
    if ctx.check {
        eprintln!("{} {what}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            return Err(Failure::Gate(what));
        }
    }
    Ok(())
}

fn simulate(ctx: &Ctx, args: SimulateArgs) -> Outcome<()> {
    let process: Process = args.process.unwrap_or(ProcessArg::Reflected).into();
    let x0 = args.x0.unwrap_or(0.0);
    let v0 = velocity(args.v0, Velocity::Pos)?;
    let horizon = args.horizon.unwrap_or(10.0);
    let mut rng = RngStream::new(
        ctx.seed,
        crate::rng::task_stream_id(crate::rng::domain::SIMULATE, 0),
    );
    let path = match process {
        Process::Reflected => simulate_reflected(x0, v0, horizon, &ctx.p, &mut rng)?,
        Process::Unreflected => simulate_unreflected(x0, v0, horizon, &ctx.p, &mut rng)?,
    };
    match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(ctx, |w| path.write_csv(w))?,
        Format::Json => {
            let end = path.final_state();
            emit_json(
                ctx,
                json!({
                    "events": path.events().len(),
                    "horizon": horizon,
                    "final_position": end.position,
                    "final_velocity": end.velocity.as_i8(),
                }),
            )?
        }
    }
    let valid = path.validate(1e-9);
    gate(
        ctx,
        valid.is_ok(),
        format!(
            "path structure: {}",
            valid.err().unwrap_or_else(|| "valid".into())
        ),
    )
}

fn excursions(ctx: &Ctx, _args: ExcursionArgs) -> Outcome<()> {
    let n = ctx.n.unwrap_or(10_000);
    let records = excursion_records(n, &ctx.p, ctx.seed)?;
    let lengths: Vec<f64> = records.iter().map(|r| r.length).collect();
    let est = EstimateWithCI::from_samples(&lengths)?;
    let jumps = records.iter().map(|r| r.jump_count as f64).sum::<f64>() / n as f64;
    let target = ctx.p.mean_excursion_length()?;
    match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(ctx, |w| write_records_csv(&records, w))?,
        Format::Json => emit_json(
            ctx,
            json!({
                "n": n,
                "mean_length": est.mean,
                "mean_length_se": est.std_error,
                "expected_length": target,
                "mean_jump_count": jumps,
            }),
        )?,
    }
    gate(
        ctx,
        est.within(target, 3.0),
        format!(
            "mean excursion length {} vs {target} (se {})",
            est.mean, est.std_error
        ),
    )
}

fn invariant(ctx: &Ctx, args: InvariantArgs) -> Outcome<()> {
    let n = ctx.n.unwrap_or(100_000);
    let kind = args.integrand.unwrap_or(IntegrandArg::Exponential);
    let param = args.param;
    let f = match kind {
        IntegrandArg::Indicator => Integrand::PositionAtMost(param.unwrap_or(1.0)),
        IntegrandArg::Exponential => Integrand::ExpPosition(param.unwrap_or(0.5)),
        IntegrandArg::Moment => {
            let k = param.unwrap_or(1.0);
            if !(k >= 0.0 && k.fract() == 0.0 && k <= 32.0) {
                return Err(Failure::Invalid(format!(
                    "moment order must be an integer in [0, 32], got {k}"
                )));
            }
            Integrand::Moment(k as u32)
        }
        IntegrandArg::Velocity => Integrand::VelocityIs(Velocity::Pos),
    };
    let est = regenerative_estimate(&f, n, &ctx.p, ctx.seed)?;
    let exact = f.invariant_mean(&ctx.p);
    match ctx.format.unwrap_or(Format::Json) {
        Format::Csv => emit_csv(ctx, |w| {
            writeln!(w, "integrand,param,estimate,std_error,n,exact")?;
            writeln!(
                w,
                "{:?},{},{},{},{},{}",
                kind,
                param.map_or(String::new(), |v| v.to_string()),
                est.mean,
                est.std_error,
                n,
                exact.map_or(String::new(), |v| v.to_string())
            )?;
            Ok(())
        })?,
        Format::Json => emit_json(
            ctx,
            json!({
                "estimate": est.mean,
                "std_error": est.std_error,
                "n": n,
                "exact": exact,
            }),
        )?,
    }
    match exact {
        Some(e) => gate(
            ctx,
            est.within(e, 3.0),
            format!("invariant mean {} vs {e} (se {})", est.mean, est.std_error),
        ),
        None => gate(
            ctx,
            false,
            "no closed form for this integrand (moment generating function diverges)".into(),
        ),
    }
}

fn hitting(ctx: &Ctx, args: HittingArgs) -> Outcome<()> {
    let n = ctx.n.unwrap_or(10_000);
    let x = args.x.unwrap_or(2.0);
    let v = velocity(args.v, Velocity::Neg)?;
    let lambda = match args.lambda {
        Some(l) => l,
        None => 0.5 * ctx.p.lambda_c()?,
    };
    let samples = hitting_samples(x, v, n, &ctx.p, ctx.seed)?;
    let transformed: Vec<f64> = samples.iter().map(|s| (lambda * s).exp()).collect();
    let est = EstimateWithCI::from_samples(&transformed)?;
    let exact = ctx.p.hitting_laplace(x, v, lambda)?;
    match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(ctx, |w| {
            writeln!(w, "hitting_time")?;
            for s in &samples {
                writeln!(w, "{s}")?;
            }
            Ok(())
        })?,
        Format::Json => emit_json(
            ctx,
            json!({
                "n": n,
                "lambda": lambda,
                "mean_hitting_time": samples.iter().sum::<f64>() / n as f64,
                "laplace_estimate": est.mean,
                "laplace_std_error": est.std_error,
                "laplace_exact": exact.finite(),
            }),
        )?,
    }
    match exact {
        LaplaceValue::Finite(e) => gate(
            ctx,
            est.within(e, 3.0),
            format!(
                "hitting transform {} vs {e} (se {})",
                est.mean, est.std_error
            ),
        ),
        LaplaceValue::Infinite => gate(
            ctx,
            false,
            format!("transform infinite at lambda = {lambda}"),
        ),
    }
}

fn couple_spec(ctx: &Ctx, args: &CoupleArgs, horizon: f64) -> Outcome<CouplingSpec> {
    let process: Process = args.process.unwrap_or(ProcessArg::Reflected).into();
    let (d1, d2) = match process {
        Process::Reflected => (1.0, 0.0),
        Process::Unreflected => (1.0, -1.0),
    };
    let start_1 = State::new(args.x1.unwrap_or(d1), velocity(args.v1, Velocity::Pos)?);
    let default_v2 = if process == Process::Unreflected {
        Velocity::Neg
    } else {
        Velocity::Pos
    };
    let start_2 = State::new(args.x2.unwrap_or(d2), velocity(args.v2, default_v2)?);
    let _ = ctx;
    Ok(CouplingSpec {
        process,
        start_1,
        start_2,
        horizon,
    })
}

fn couple(ctx: &Ctx, args: CoupleArgs) -> Outcome<()> {
    let n = ctx.n.unwrap_or(10_000);
    let horizon = match args.horizon {
        Some(h) => h,
        None => default_horizon(&ctx.p)?,
    };
    let spec = couple_spec(ctx, &args, horizon)?;
    let runs = coupling_batch(&spec, n, &ctx.p, ctx.seed)?;
    let coalesced = runs.iter().filter(|r| r.coalescence_time.is_some()).count();
    let times: Vec<f64> = runs.iter().filter_map(|r| r.coalescence_time).collect();
    match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(ctx, |w| write_batch_csv(&runs, w))?,
        Format::Json => emit_json(
            ctx,
            json!({
                "n": n,
                "horizon": horizon,
                "coalesced": coalesced,
                "mean_coalescence_time": if times.is_empty() { None } else { Some(times.iter().sum::<f64>() / times.len() as f64) },
            }),
        )?,
    }
    if ctx.check {
        let (x1, x2) = (spec.start_1.position.abs(), spec.start_2.position.abs());
        for t in [5.0, 10.0, 15.0, 20.0] {
            let surv =
                EstimateWithCI::proportion(runs.iter().filter(|r| r.survives(t)).count(), n)?;
            let bound = ctx.p.tv_bound(t, x1, x2, spec.process)?;
            gate(
                ctx,
                surv.mean <= bound + 3.0 * surv.std_error,
                format!("P(T > {t}) = {} vs bound {bound}", surv.mean),
            )?;
        }
    }
    Ok(())
}

fn parse_list(s: &str, what: &str) -> Outcome<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Invalid(format!("bad {what} entry '{x}'")))
        })
        .collect()
}

fn tvcurve(ctx: &Ctx, args: TvArgs) -> Outcome<()> {
    let n = ctx.n.unwrap_or(10_000);
    let grid = match &args.grid {
        Some(g) => parse_list(g, "grid")?,
        None => (1..=20).map(f64::from).collect(),
    };
    let h = match args.h {
        Some(h) => h,
        None => default_bin_width(&ctx.p)?,
    };
    let spec = couple_spec(ctx, &args.starts, 1.0)?;
    let curve = tv_curve(
        spec.start_1,
        spec.start_2,
        spec.process,
        &grid,
        n,
        h,
        &ctx.p,
        ctx.seed,
    )?;
    match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(ctx, |w| curve.write_csv(w))?,
        Format::Json => emit_json(
            ctx,
            json!({
                "n": n,
                "h": h,
                "points": grid.len(),
                "decay_rate": empirical_decay_rate(&curve).ok(),
                "lambda_c": ctx.p.lambda_c()?,
            }),
        )?,
    }
    if ctx.check {
        for (i, &t) in grid.iter().enumerate() {
            let (s, tv) = (
                curve.empirical_coupling_survival[i],
                curve.empirical_binned_tv[i],
            );
            let slack = 3.0 * (curve.survival_std_error[i] + curve.binned_tv_std_error[i]);
            gate(
                ctx,
                tv <= s + slack,
                format!("t = {t}: binned TV {tv} <= survival {s} + {slack}"),
            )?;
            let bound = curve.theoretical_bound[i].min(1.0);
            let se = 3.0 * curve.survival_std_error[i];
            gate(
                ctx,
                s <= bound + se,
                format!("t = {t}: survival {s} <= bound {bound} + {se}"),
            )?;
        }
    }
    Ok(())
}

fn scaling(ctx: &Ctx, args: ScalingArgs) -> Outcome<()> {
    let n = ctx.n.unwrap_or(10_000);
    let scales = match &args.scales {
        Some(s) => parse_list(s, "scales")?,
        None => vec![4.0, 16.0, 100.0],
    };
    let c = args.c.unwrap_or(1.0);
    let t = args.t.unwrap_or(1.0);
    let xi0 = args.xi0.unwrap_or(0.0);
    let dt = args
        .dt
        .unwrap_or_else(|| crate::analysis::sde::default_dt(c));
    let rows = scales
        .iter()
        .map(|&big_n| scaling_limit_check(big_n, c, t, n, xi0, dt, ctx.seed))
        .collect::<Result<Vec<_>>>()?;
    match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(ctx, |w| ScalingCheck::write_csv(&rows, w))?,
        Format::Json => {
            let last = rows.last().copied();
            emit_json(
                ctx,
                json!({
                    "n": n,
                    "c": c,
                    "t": t,
                    "N": last.map(|r| r.n_scale),
                    "ks_stat": last.map(|r| r.ks_stat),
                    "p_value": last.map(|r| r.p_value),
                }),
            )?
        }
    }
    if ctx.check {
        if let Some(last) = rows.last() {
            gate(
                ctx,
                last.p_value > 1e-3,
                format!("N = {}: KS p-value {} > 0.001", last.n_scale, last.p_value),
            )?;
        }
        let inversions = rows
            .windows(2)
            .filter(|w| w[1].ks_stat >= w[0].ks_stat)
            .count();
        let shrinks = rows.len() < 2 || rows[rows.len() - 1].ks_stat < rows[0].ks_stat;
        gate(
            ctx,
            inversions <= 1 && shrinks,
            format!("KS statistic trend over N ({inversions} inversions)"),
        )?;
    }
    Ok(())
}

fn formulas(ctx: &Ctx, args: FormulaArgs) -> Outcome<()> {
    let p = &ctx.p;
    let lambda = args.lambda.unwrap_or(0.0);
    let x = args.x.unwrap_or(1.0);
    let xt = args.x_tilde.unwrap_or(0.0);
    let t = args.t.unwrap_or(10.0);
    let mut fields = json!({
        "lambda": lambda,
        "psi": p.psi(lambda).finite(),
        "c_lambda": p.c_lambda(lambda).finite(),
    });
    if !p.is_degenerate() {
        let k = p.bound_constants()?;
        let extra = json!({
            "lambda_c": p.lambda_c()?,
            "C": k.c,
            "r": k.r,
            "C_reflected": k.c_refl,
            "mean_excursion_length": p.mean_excursion_length()?,
            "x": x,
            "x_tilde": xt,
            "t": t,
            "tv_bound_reflected": p.tv_bound(t, x, xt, Process::Reflected)?,
            "tv_bound_unreflected": p.tv_bound(t, x, xt, Process::Unreflected)?,
            "tbar_laplace": if x >= xt { p.tbar_laplace(lambda, x, xt)?.finite() } else { p.tbar_laplace(lambda, xt, x)?.finite() },
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut fields, extra) {
            m.extend(e);
        }
    }
    match ctx.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(ctx, fields),
        Format::Csv => emit_csv(ctx, |w| {
            writeln!(w, "name,value")?;
            if let Value::Object(m) = &fields {
                for (k, v) in m {
                    writeln!(
                        w,
                        "{k},{}",
                        if v.is_null() {
                            String::new()
                        } else {
                            v.to_string()
                        }
                    )?;
                }
            }
            Ok(())
        }),
    }?;
    if ctx.check {
        let psi = p.psi(lambda);
        if let (LaplaceValue::Finite(s), LaplaceValue::Finite(c)) = (psi, p.c_lambda(lambda)) {
            let (a, b) = (p.a(), p.b());
            let fixed = a * s * s - (a + b - 2.0 * lambda) * s + b;
            let link = c - (lambda + a * (s - 1.0));
            let ok = fixed.abs() <= 1e-10 * (b * s * s + b).max(1.0)
                && link.abs() <= 1e-10 * (1.0 + c.abs());
            gate(
                ctx,
                ok,
                format!("fixed-point residual {fixed}, c-link residual {link}"),
            )?;
        }
    }
    Ok(())
}
