//! The `relmean` command-line front end.
//!
//! Exit status: 0 on success, 2 for unusable input or parameters, 3 when
//! `estimate --strict` is given fewer samples than the plan requires, 4 when
//! `coverage --check` sees a failure rate above the acceptance band, and 1
//! for internal failures.
//!
//! Data files hold one decimal number per line; blank lines and everything
//! after a `#` are ignored.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::distributions::{Family, SourceSpec, GENERATOR_ID};
use crate::error::Error;
use crate::experiments::{
    coverage_threshold, run_coverage, run_interpolation_table, run_timing, ExperimentKind,
    TrialReport, SCHEMA_VERSION,
};
use crate::planner::{
    improvement_factor, normal_limit_factor, plan, plan_all, validate_parameters, EstimatorPlan,
    PlanRule,
};
use crate::psi::SampleSet;
use crate::solver::{default_tolerance, solve_bisection, solve_exact, RootResult, SolverMethod};
use crate::weights::WeightKind;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INSUFFICIENT: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;

/// Environment variable supplying the default seed; `--seed` wins.
pub const SEED_ENV: &str = "RELMEAN_SEED";
const DEFAULT_SEED: &str = "1";

#[derive(Debug, Parser)]
#[command(
    name = "relmean",
    version,
    about = "Mean estimation for nonnegative data with bounded relative standard deviation"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    pub format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare sample sizes and scale factors across planning rules.
    Plan(PlanArgs),
    /// Estimate the mean of a data file.
    Estimate(EstimateArgs),
    /// Write seeded draws in the data format.
    Simulate(SimulateArgs),
    /// Measure the empirical failure rate of the tail-balanced plan.
    Coverage(CoverageArgs),
    /// Tabulate sample mean, sample median and smooth estimates across lambda.
    Interpolate(InterpolateArgs),
    /// Time the prior rule against the tail-balanced rule on the drift workload.
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct Tolerances {
    /// Relative error bound.
    #[arg(long)]
    pub epsilon: f64,
    /// Failure probability bound.
    #[arg(long)]
    pub delta: f64,
    /// Bound on the relative standard deviation.
    #[arg(long, short = 'c', default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Data file, or `-` for standard input.
    #[arg(default_value = "-")]
    pub input: String,
    /// Scale factor; excludes --epsilon/--delta/-c.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Relative standard deviation bound (default 1)
    #[arg(long, short = 'c')]
    pub c: Option<f64>,
    /// Use the exact window/cubic solver (smooth weight only).
    #[arg(long)]
    pub exact: bool,
    /// Bisection bracket width (default 1e-12 times the largest sample).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = WeightKind::Smooth)]
    pub weight: WeightKind,
    /// Fail with status 3 when fewer samples than planned are supplied.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyName {
    Exponential,
    HalfCauchy,
    SdeDrift,
    Constant,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(value_enum, default_value_t = FamilyName::Exponential)]
    pub family: FamilyName,
    /// Exponential mean.
    #[arg(long, default_value_t = 1.0)]
    pub mean: f64,
    /// Half-Cauchy scale.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Drift horizon.
    #[arg(long = "horizon", default_value_t = 1.0)]
    pub horizon: f64,
    /// Drift step size.
    #[arg(long = "step", default_value_t = 0.001)]
    pub step: f64,
    /// Constant value.
    #[arg(long, default_value_t = 1.0)]
    pub value: f64,
    #[arg(long, env = SEED_ENV, default_value = DEFAULT_SEED)]
    pub seed: u64,
}

impl SourceArgs {
    pub fn spec(&self) -> crate::Result<SourceSpec> {
        let family = match self.family {
            FamilyName::Exponential => Family::Exponential { mean: self.mean },
            FamilyName::HalfCauchy => Family::HalfCauchy { scale: self.scale },
            FamilyName::SdeDrift => Family::SdeDrift {
                t: self.horizon,
                h: self.step,
            },
            FamilyName::Constant => Family::Constant { value: self.value },
        };
        SourceSpec::new(family, self.seed)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Number of draws.
    #[arg(long, short = 'n')]
    pub n: u64,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub tolerances: Tolerances,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Exit with status 4 if the failure rate exceeds delta + 3 binomial sd.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Samples per trial.
    #[arg(long, short = 'n', default_value_t = 100)]
    pub n: u64,
    #[arg(long, default_value_t = 5)]
    pub trials: u64,
    /// Comma-separated scale factors.
    #[arg(long = "lambda", value_delimiter = ',', default_values_t = vec![0.1, 1.0, 5.0])]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    /// Comma-separated relative error bounds.
    #[arg(long = "epsilon", value_delimiter = ',', default_values_t = vec![0.1, 0.05])]
    pub epsilons: Vec<f64>,
    /// Comma-separated failure probabilities, one per epsilon.
    #[arg(long = "delta", value_delimiter = ',', default_values_t = vec![1e-6, 1e-6])]
    pub deltas: Vec<f64>,
    #[arg(long, short = 'c', default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, env = SEED_ENV, default_value = DEFAULT_SEED)]
    pub seed: u64,
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct CliFailure {
    pub code: u8,
    pub message: String,
}

impl CliFailure {
    fn input(message: impl Into<String>) -> Self {
        CliFailure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        };
        CliFailure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliFailure>;

/// What a command produced: the report text plus its exit status and any
/// warnings for standard error.
struct Outcome {
    text: String,
    code: u8,
    warnings: Vec<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            code: EXIT_OK,
            warnings: Vec::new(),
        }
    }
}

/// Parse arguments and run, returning the exit status.
pub fn main_with<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    run(&cli, stdin, stdout, stderr)
}

pub fn run(cli: &Cli, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a, cli.format),
        Command::Estimate(a) => cmd_estimate(a, cli.format, stdin),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Coverage(a) => cmd_coverage(a, cli.format),
        Command::Interpolate(a) => cmd_interpolate(a, cli.format),
        Command::Timing(a) => cmd_timing(a, cli.format),
    };
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let written = match &cli.output {
                Some(path) => std::fs::write(path, &outcome.text)
                    .map_err(|e| format!("{}: {e}", path.display())),
                None => stdout
                    .write_all(outcome.text.as_bytes())
                    .map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => outcome.code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_INPUT
                }
            }
        }
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

/// Parse the data format. Errors name the 1-based line.
pub fn parse_data(text: &str) -> CliResult<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let value: f64 = content.parse().map_err(|_| {
            CliFailure::input(format!(
                "line {line_no}: cannot parse `{content}` as a number"
            ))
        })?;
        if !value.is_finite() {
            return Err(CliFailure::input(format!(
                "line {line_no}: value `{content}` is not finite"
            )));
        }
        if value < 0.0 {
            return Err(CliFailure::input(format!(
                "line {line_no}: negative value {value}"
            )));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliFailure::input("input contains no data"));
    }
    Ok(values)
}

fn read_input(path: &str, stdin: &mut dyn Read) -> CliResult<String> {
    let mut text = String::new();
    if path == "-" {
        stdin
            .read_to_string(&mut text)
            .map_err(|e| CliFailure::input(format!("standard input: {e}")))?;
    } else {
        text =
            std::fs::read_to_string(path).map_err(|e| CliFailure::input(format!("{path}: {e}")))?;
    }
    Ok(text)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

#[derive(Serialize)]
struct PlanReport {
    schema_version: u32,
    epsilon: f64,
    delta: f64,
    c: f64,
    plans: Vec<EstimatorPlan>,
    improvement_factor: f64,
    normal_limit_factor: f64,
}

fn cmd_plan(args: &PlanArgs, format: Format) -> CliResult<Outcome> {
    let Tolerances { epsilon, delta, c } = args.tolerances;
    let plans = plan_all(epsilon, delta, c)?;
    let factor = improvement_factor(epsilon, c)?;
    let limit = normal_limit_factor(epsilon)?;
    let prior_n = plans
        .iter()
        .find(|p| p.rule == PlanRule::Prior)
        .map(|p| p.n)
        .unwrap_or(1) as f64;
    let text = match format {
        Format::Json => {
            let report = PlanReport {
                schema_version: SCHEMA_VERSION,
                epsilon,
                delta,
                c,
                plans,
                improvement_factor: factor,
                normal_limit_factor: limit,
            };
            serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("rule,lambda,n,n_unrounded,gap,n_over_prior\n");
            for p in &plans {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    p.rule,
                    opt(p.lambda),
                    p.n,
                    p.n_unrounded(),
                    opt(p.gap),
                    p.n as f64 / prior_n
                );
            }
            s
        }
        Format::Human => {
            let mut s = format!("epsilon = {epsilon}, delta = {delta}, c = {c}\n\n");
            let _ = writeln!(
                s,
                "{:<18} {:>12} {:>14} {:>12} {:>10}",
                "rule", "lambda", "n", "gap", "n/prior"
            );
            for p in &plans {
                let _ = writeln!(
                    s,
                    "{:<18} {:>12} {:>14} {:>12} {:>10.4}",
                    p.rule.label(),
                    p.lambda.map_or("-".into(), |l| format!("{l:.6}")),
                    p.n,
                    p.gap.map_or("-".into(), |g| format!("{g:.4e}")),
                    p.n as f64 / prior_n
                );
            }
            let _ = writeln!(
                s,
                "\nimprovement factor (tail-balanced / prior): {factor:.6}"
            );
            let _ = writeln!(s, "normal-data limit 1/(1+eps)^2:              {limit:.6}");
            s
        }
    };
    Ok(Outcome::ok(text))
}

#[derive(Serialize)]
struct EstimateReport {
    schema_version: u32,
    estimate: f64,
    method: SolverMethod,
    weight: WeightKind,
    lambda: f64,
    n_provided: usize,
    n_required: Option<u64>,
    bracket: [f64; 2],
    residual: f64,
    evaluations: usize,
    sample_mean: f64,
    sample_median: f64,
}

fn cmd_estimate(args: &EstimateArgs, format: Format, stdin: &mut dyn Read) -> CliResult<Outcome> {
    let triple = (args.epsilon, args.delta, args.c);
    let any_triple = args.epsilon.is_some() || args.delta.is_some() || args.c.is_some();
    let (lambda, required) = match (args.lambda, triple) {
        (Some(_), _) if any_triple => {
            return Err(CliFailure::input(
                "--lambda cannot be combined with --epsilon/--delta/-c",
            ));
        }
        (Some(lambda), _) => {
            crate::psi::validate_lambda(lambda)?;
            (lambda, None)
        }
        (None, (Some(epsilon), Some(delta), c)) => {
            let c = c.unwrap_or(1.0);
            validate_parameters(epsilon, delta, c)?;
            let p = plan(epsilon, delta, c, PlanRule::TailBalanced)?;
            (
                p.lambda.expect("tail-balanced plans carry lambda"),
                Some(p.n),
            )
        }
        (None, _) => {
            return Err(CliFailure::input(
                "give either --lambda or both --epsilon and --delta",
            ));
        }
    };
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliFailure::input(format!(
                "--tol must be positive and finite, got {tol}"
            )));
        }
    }
    if args.exact && args.weight != WeightKind::Smooth {
        return Err(CliFailure::input("--exact supports only the smooth weight"));
    }

    let text = read_input(&args.input, stdin)?;
    let samples = SampleSet::new(parse_data(&text)?)?;

    let mut warnings = Vec::new();
    if let Some(required) = required {
        if (samples.len() as u64) < required {
            let msg = format!(
                "{} samples provided but the plan requires {required}",
                samples.len()
            );
            if args.strict {
                return Err(CliFailure {
                    code: EXIT_INSUFFICIENT,
                    message: msg,
                });
            }
            warnings.push(msg);
        }
    }

    let root: RootResult = if args.exact {
        solve_exact(&samples, lambda)?
    } else {
        let tol = args.tol.unwrap_or_else(|| default_tolerance(&samples));
        solve_bisection(&samples, lambda, args.weight, tol)?
    };

    let report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        estimate: root.estimate,
        method: root.method,
        weight: args.weight,
        lambda,
        n_provided: samples.len(),
        n_required: required,
        bracket: [root.bracket_lo, root.bracket_hi],
        residual: root.residual,
        evaluations: root.evaluations,
        sample_mean: samples.mean(),
        sample_median: samples.median(),
    };
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
        Format::Csv => format!(
            "estimate,method,weight,lambda,n_provided,n_required,bracket_lo,bracket_hi,residual\n{},{},{},{},{},{},{},{},{}\n",
            report.estimate,
            method_label(report.method),
            report.weight,
            report.lambda,
            report.n_provided,
            report.n_required.map_or("-".into(), |n| n.to_string()),
            report.bracket[0],
            report.bracket[1],
            report.residual
        ),
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(s, "estimate     {}", report.estimate);
            let _ = writeln!(s, "method       {} ({} weight)", method_label(report.method), report.weight);
            let _ = writeln!(s, "lambda       {}", report.lambda);
            match report.n_required {
                Some(req) => {
                    let _ = writeln!(s, "samples      {} provided, {} required", report.n_provided, req);
                }
                None => {
                    let _ = writeln!(s, "samples      {}", report.n_provided);
                }
            }
            let _ = writeln!(s, "bracket      [{}, {}]", report.bracket[0], report.bracket[1]);
            let _ = writeln!(s, "residual     {:e}", report.residual);
            let _ = writeln!(s, "sample mean  {}", report.sample_mean);
            let _ = writeln!(s, "sample median {}", report.sample_median);
            s
        }
    };
    Ok(Outcome {
        text,
        code: EXIT_OK,
        warnings,
    })
}

fn method_label(m: SolverMethod) -> &'static str {
    match m {
        SolverMethod::Bisection => "bisection",
        SolverMethod::ExactCubic => "exact-cubic",
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<Outcome> {
    let spec = args.source.spec()?;
    if args.n == 0 {
        return Err(CliFailure::input("--n must be at least 1"));
    }
    let draws = crate::distributions::generate(&spec, args.n as usize)?;
    let mut s = format!(
        "# {} seed={} generator={GENERATOR_ID}\n",
        spec.family, spec.seed
    );
    for x in draws {
        let _ = writeln!(s, "{x}");
    }
    Ok(Outcome::ok(s))
}

fn cmd_coverage(args: &CoverageArgs, format: Format) -> CliResult<Outcome> {
    let spec = args.source.spec()?;
    let Tolerances { epsilon, delta, c } = args.tolerances;
    let report = run_coverage(&spec, epsilon, delta, c, args.trials)?;
    let mut outcome = Outcome::ok(render_report(&report, format)?);
    if args.check && !report.coverage_passes() {
        outcome.code = EXIT_CHECK_FAILED;
        outcome.warnings.push(format!(
            "failure rate {} exceeds {}",
            report.aggregate.methods[0].failure_rate.unwrap_or(f64::NAN),
            coverage_threshold(delta, args.trials)
        ));
    }
    Ok(outcome)
}

fn cmd_interpolate(args: &InterpolateArgs, format: Format) -> CliResult<Outcome> {
    let spec = args.source.spec()?;
    let report = run_interpolation_table(&spec, args.n, args.trials, &args.lambdas)?;
    Ok(Outcome::ok(render_report(&report, format)?))
}

fn cmd_timing(args: &TimingArgs, format: Format) -> CliResult<Outcome> {
    for (&e, &d) in args.epsilons.iter().zip(&args.deltas) {
        validate_parameters(e, d, args.c)?;
    }
    let report = run_timing(args.seed, &args.epsilons, &args.deltas, args.c, args.trials)?;
    Ok(Outcome::ok(render_report(&report, format)?))
}

/// Per-trial rows are shown in the human table only up to this many trials.
const HUMAN_TRIAL_ROWS: usize = 20;

pub fn render_report(report: &TrialReport, format: Format) -> crate::Result<String> {
    Ok(match format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => {
            let mut s = String::from("trial");
            for m in &report.methods {
                let _ = write!(s, ",{}", csv_field(&m.label));
            }
            for m in &report.methods {
                let _ = write!(s, ",{}", csv_field(&format!("{} wall_ms", m.label)));
            }
            s.push('\n');
            for row in &report.per_trial {
                let _ = write!(s, "{}", row.trial);
                for e in row.estimates.iter().chain(&row.wall_ms) {
                    let _ = write!(s, ",{e}");
                }
                s.push('\n');
            }
            s
        }
        Format::Human => human_report(report),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn human_report(report: &TrialReport) -> String {
    let cfg = &report.config;
    let mut s = String::new();
    let kind = match cfg.kind {
        ExperimentKind::Interpolation => "interpolation",
        ExperimentKind::Coverage => "coverage",
        ExperimentKind::Timing => "timing",
    };
    let _ = writeln!(
        s,
        "{kind}: {} seed={} trials={}",
        cfg.source.family, cfg.source.seed, cfg.trials
    );

    if cfg.kind != ExperimentKind::Timing && report.per_trial.len() <= HUMAN_TRIAL_ROWS {
        let _ = write!(s, "\n{:>6}", "trial");
        for m in &report.methods {
            let _ = write!(s, " {:>14}", m.label);
        }
        s.push('\n');
        for row in &report.per_trial {
            let _ = write!(s, "{:>6}", row.trial);
            for e in &row.estimates {
                let _ = write!(s, " {:>14.6}", e);
            }
            s.push('\n');
        }
    }

    let _ = writeln!(
        s,
        "\n{:<32} {:>8} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "method", "n", "mean", "median", "max", "fail rate", "wall ms"
    );
    for (m, a) in report.methods.iter().zip(&report.aggregate.methods) {
        let _ = writeln!(
            s,
            "{:<32} {:>8} {:>12.6} {:>12.6} {:>12.6} {:>12} {:>10.3}",
            m.label,
            m.n,
            a.mean_estimate,
            a.median_estimate,
            a.max_estimate,
            a.failure_rate.map_or("-".into(), |r| format!("{r:.4}")),
            a.mean_wall_ms
        );
    }
    if let Some(a) = report.aggregate.methods.first() {
        if let (ExperimentKind::Coverage, Some([lo, hi])) = (cfg.kind, a.failure_interval) {
            let _ = writeln!(s, "failure rate 95% interval: [{lo:.4}, {hi:.4}]");
        }
    }
    if !report.aggregate.comparisons.is_empty() {
        let _ = writeln!(
            s,
            "\n{:>8} {:>10} {:>12} {:>12} {:>10} {:>10} {:>12}",
            "epsilon", "delta", "old ms", "new ms", "n ratio", "factor", "rel change"
        );
        for c in &report.aggregate.comparisons {
            let _ = writeln!(
                s,
                "{:>8} {:>10} {:>12.3} {:>12.3} {:>10.4} {:>10.4} {:>12.4}",
                c.epsilon,
                c.delta,
                c.mean_wall_ms_old,
                c.mean_wall_ms_new,
                c.n_ratio,
                c.improvement_factor,
                c.relative_change
            );
        }
    }
    s
}
