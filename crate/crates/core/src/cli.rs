//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or other error, 2 invalid metric file,
//! 3 k >= n, 4 LP too large, 5 unknown point name, 6 epsilon <= 0.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::algorithms::{compute_bounds, simulate, BoundsError, Greedy, WorkFunctionAlgorithm};
use crate::game::opt_det_ratio;
use crate::lp::{expected_step_costs, opt_rand_ratio, LpError, RandomizedPolicy, DEFAULT_VAR_CAP};
use crate::metric::{ConfigSpace, Metric};
use crate::offline::opt_cost;
use crate::par::{self, Execution};
use crate::rational::{format_rational, parse_rational, ExtRatio, Rational};
use crate::report::{emit, sweep_horizons, Format, ReportError, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "kserver-lab", version, about = "Exact finite-horizon competitive ratios for k-server")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Metric file (JSON).
    #[arg(long, global = true)]
    metric: Option<PathBuf>,
    /// Number of servers.
    #[arg(long, global = true, default_value_t = 2)]
    k: usize,
    /// Initial configuration as comma-separated point names (default: first k points).
    #[arg(long, global = true)]
    c0: Option<String>,
    #[arg(long, global = true, default_value_t = 2)]
    horizon: usize,
    #[arg(long, global = true, default_value = "1/1024")]
    tolerance: String,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// Assumed competitive ratio for `bounds` (default 2k-1).
    #[arg(long, global = true)]
    c: Option<String>,
    #[arg(long, global = true, default_value = "0")]
    alpha: String,
    #[arg(long = "var-cap", global = true, default_value_t = DEFAULT_VAR_CAP)]
    var_cap: usize,
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include wall-clock timings in the output.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal deterministic strict ratio at the horizon.
    OptDet,
    /// Optimal randomized strict ratio bracket; writes the extracted policy.
    OptRand {
        #[arg(long = "policy-out", default_value = "policy.json")]
        policy_out: PathBuf,
        /// Also write the LP at the upper threshold in LP text format.
        #[arg(long = "lp-out")]
        lp_out: Option<PathBuf>,
    },
    /// Run an algorithm (greedy, wfa, policy:<file>) on a request sequence.
    Simulate {
        #[arg(long)]
        algorithm: String,
        /// Comma-separated point names.
        #[arg(long)]
        sequence: String,
    },
    /// Phase-length constants for a D-resetting algorithm.
    Bounds,
    /// Deterministic and randomized optima for every horizon up to --horizon.
    Sweep,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::new(1, e.to_string())
}

fn rational_arg(name: &str, s: &str) -> CliResult<Rational> {
    parse_rational(s).map_err(|e| CliError::new(1, format!("--{name}: {e}")))
}

struct RunConfig {
    space: ConfigSpace,
    c0: usize,
}

fn load_metric(common: &CommonArgs) -> CliResult<Metric> {
    let path = common.metric.as_ref().ok_or_else(|| CliError::new(1, "--metric is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(2, format!("cannot read {}: {e}", path.display())))?;
    Metric::from_json(&text).map_err(|e| CliError::new(2, format!("{}: {e}", path.display())))
}

fn names_to_indices(metric: &Metric, list: &str) -> CliResult<Vec<usize>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            metric.index_of(name).ok_or_else(|| CliError::new(5, format!("unknown point {name:?}")))
        })
        .collect()
}

fn config(common: &CommonArgs, require_k_below_n: bool) -> CliResult<RunConfig> {
    let metric = load_metric(common)?;
    let n = metric.n();
    if common.k == 0 || common.k > n || (require_k_below_n && common.k == n) {
        return Err(CliError::new(3, format!("k = {} but the metric has n = {n} points (need 1 <= k < n)", common.k)));
    }
    let k = common.k;
    let space = ConfigSpace::new(metric, k).map_err(|e| CliError::new(3, e.to_string()))?;
    let c0 = match &common.c0 {
        None => space
            .index_of(&crate::metric::Configuration::new((0..k).collect()))
            .expect("first k points form a configuration"),
        Some(list) => {
            let names: Vec<&str> = list.split(',').map(str::trim).collect();
            for name in &names {
                if space.metric().index_of(name).is_none() {
                    return Err(CliError::new(5, format!("unknown point {name:?}")));
                }
            }
            space.parse_config(&names).map_err(|e| CliError::new(1, format!("--c0: {e}")))?
        }
    };
    Ok(RunConfig { space, c0 })
}

fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let common = &cli.common;
    if let Some(t) = common.threads {
        par::set_threads(t.max(1)).map_err(|e| CliError::new(1, e))?;
    }
    match &cli.command {
        Command::OptDet => cmd_opt_det(common, out),
        Command::OptRand { policy_out, lp_out } => cmd_opt_rand(common, policy_out, lp_out.as_ref(), out),
        Command::Simulate { algorithm, sequence } => cmd_simulate(common, algorithm, sequence, out),
        Command::Bounds => cmd_bounds(common, out),
        Command::Sweep => cmd_sweep(common, out),
    }
}

fn names(metric: &Metric, seq: &[usize]) -> String {
    seq.iter().map(|&p| metric.names()[p].as_str()).collect::<Vec<_>>().join(",")
}

fn cmd_opt_det(common: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = config(common, true)?;
    let start = Instant::now();
    let res = opt_det_ratio(&cfg.space, cfg.c0, common.horizon).map_err(|e| CliError::new(3, e.to_string()))?;
    writeln!(out, "value: {}", format_rational(&res.value)).map_err(io_err)?;
    writeln!(out, "witness_adversary: {}", names(cfg.space.metric(), &res.witness_adversary)).map_err(io_err)?;
    writeln!(out, "strategy_entries: {}", res.witness_strategy.answers.len()).map_err(io_err)?;
    if common.timing {
        writeln!(out, "runtime_ms: {}", start.elapsed().as_millis()).map_err(io_err)?;
    }
    Ok(())
}

/// Serialized [`RandomizedPolicy`]. History keys are `"ρ|σ"`: request names
/// joined by `,`, then answer configurations (names joined by `+`) joined by `,`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub points: Vec<String>,
    pub k: usize,
    pub c0: Vec<String>,
    pub horizon: usize,
    pub tau_high: String,
    pub conditionals: BTreeMap<String, Vec<PolicyEntry>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub configuration: Vec<String>,
    pub probability: String,
}

fn config_names(space: &ConfigSpace, c: usize) -> Vec<String> {
    space.config(c).points().iter().map(|&p| space.metric().names()[p].clone()).collect()
}

impl PolicyFile {
    pub fn from_policy(space: &ConfigSpace, policy: &RandomizedPolicy, tau_high: &Rational) -> Self {
        let metric = space.metric();
        let conditionals = policy
            .conditionals
            .iter()
            .map(|((rho, sigma), dist)| {
                let answers: Vec<String> = sigma.iter().map(|&c| config_names(space, c).join("+")).collect();
                let key = format!("{}|{}", names(metric, rho), answers.join(","));
                let entries = dist
                    .iter()
                    .map(|(c, p)| PolicyEntry { configuration: config_names(space, *c), probability: format_rational(p) })
                    .collect();
                (key, entries)
            })
            .collect();
        PolicyFile {
            points: metric.names().to_vec(),
            k: space.k(),
            c0: config_names(space, policy.c0),
            horizon: policy.horizon,
            tau_high: format_rational(tau_high),
            conditionals,
        }
    }

    pub fn to_policy(&self, space: &ConfigSpace) -> Result<RandomizedPolicy, String> {
        if self.points != space.metric().names() || self.k != space.k() {
            return Err("policy file was written for a different metric or k".into());
        }
        let metric = space.metric();
        let point = |name: &str| metric.index_of(name).ok_or_else(|| format!("unknown point {name:?}"));
        let config = |names: &[&str]| space.parse_config(names);
        let c0 = config(&self.c0.iter().map(String::as_str).collect::<Vec<_>>())?;
        let mut conditionals = BTreeMap::new();
        for (key, entries) in &self.conditionals {
            let (rho, sigma) = key.split_once('|').ok_or_else(|| format!("bad history key {key:?}"))?;
            let rho = rho.split(',').map(point).collect::<Result<Vec<_>, _>>()?;
            let sigma = sigma
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|c| config(&c.split('+').collect::<Vec<_>>()))
                .collect::<Result<Vec<_>, _>>()?;
            let dist = entries
                .iter()
                .map(|e| {
                    let c = config(&e.configuration.iter().map(String::as_str).collect::<Vec<_>>())?;
                    let p = parse_rational(&e.probability).map_err(|e| e.to_string())?;
                    Ok((c, p))
                })
                .collect::<Result<Vec<_>, String>>()?;
            conditionals.insert((rho, sigma), dist);
        }
        Ok(RandomizedPolicy { c0, horizon: self.horizon, conditionals })
    }
}

fn lp_code(e: &LpError) -> i32 {
    match e {
        LpError::InstanceTooLarge { .. } => 4,
        LpError::DegenerateKEqualsN => 3,
        _ => 1,
    }
}

fn cmd_opt_rand(
    common: &CommonArgs,
    policy_out: &PathBuf,
    lp_out: Option<&PathBuf>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let cfg = config(common, true)?;
    let tolerance = rational_arg("tolerance", &common.tolerance)?;
    let start = Instant::now();
    let res = opt_rand_ratio(&cfg.space, cfg.c0, common.horizon, &tolerance, common.var_cap)
        .map_err(|e| CliError::new(lp_code(&e), e.to_string()))?;
    let elapsed = start.elapsed();
    let file = PolicyFile::from_policy(&cfg.space, &res.policy, &res.tau_high);
    let json = serde_json::to_string_pretty(&file).expect("policy serializes");
    std::fs::write(policy_out, json + "\n").map_err(io_err)?;
    if let Some(path) = lp_out {
        let inst = crate::lp::build_lp(&cfg.space, cfg.c0, common.horizon, &res.tau_high, common.var_cap)
            .map_err(|e| CliError::new(lp_code(&e), e.to_string()))?;
        std::fs::write(path, inst.dump()).map_err(io_err)?;
    }
    writeln!(out, "tau_low: {}", format_rational(&res.tau_low)).map_err(io_err)?;
    writeln!(out, "tau_high: {}", format_rational(&res.tau_high)).map_err(io_err)?;
    writeln!(out, "probes: {}", res.probes).map_err(io_err)?;
    writeln!(out, "policy: {}", policy_out.display()).map_err(io_err)?;
    if common.timing {
        writeln!(out, "runtime_ms: {}", elapsed.as_millis()).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, algorithm: &str, sequence: &str, out: &mut dyn Write) -> CliResult<()> {
    let cfg = config(common, false)?;
    let space = &cfg.space;
    let metric = space.metric();
    let requests = names_to_indices(metric, sequence)?;

    if let Some(path) = algorithm.strip_prefix("policy:") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::new(1, format!("{path}: {e}")))?;
        let file: PolicyFile = serde_json::from_str(&text).map_err(|e| CliError::new(1, format!("{path}: {e}")))?;
        let policy = file.to_policy(space).map_err(|e| CliError::new(1, format!("{path}: {e}")))?;
        if requests.len() > policy.horizon {
            return Err(CliError::new(1, format!("sequence longer than the policy horizon {}", policy.horizon)));
        }
        let steps = expected_step_costs(&policy, space, &requests);
        for (i, (r, c)) in requests.iter().zip(&steps).enumerate() {
            writeln!(out, "step {}: request {} expected_cost {}", i + 1, metric.names()[*r], format_rational(c))
                .map_err(io_err)?;
        }
        let total: Rational = steps.iter().sum();
        let opt = opt_cost(space, policy.c0, &requests);
        writeln!(out, "expected_total: {}", format_rational(&total)).map_err(io_err)?;
        writeln!(out, "opt: {}", format_rational(&opt)).map_err(io_err)?;
        writeln!(out, "expected_ratio: {}", ExtRatio::of(&total, &opt)).map_err(io_err)?;
        return Ok(());
    }

    let outcome = match algorithm {
        "greedy" => simulate(&mut Greedy::default(), space, cfg.c0, &requests),
        "wfa" => simulate(&mut WorkFunctionAlgorithm::new(space, cfg.c0), space, cfg.c0, &requests),
        other => return Err(CliError::new(1, format!("unknown algorithm {other:?} (greedy, wfa, policy:<file>)"))),
    };
    for (i, ((r, c), cost)) in requests.iter().zip(&outcome.answers).zip(&outcome.costs).enumerate() {
        writeln!(
            out,
            "step {}: request {} -> {} cost {}",
            i + 1,
            metric.names()[*r],
            space.config(*c).display(metric),
            format_rational(cost)
        )
        .map_err(io_err)?;
    }
    let opt = opt_cost(space, cfg.c0, &requests);
    writeln!(out, "total: {}", format_rational(&outcome.total)).map_err(io_err)?;
    writeln!(out, "opt: {}", format_rational(&opt)).map_err(io_err)?;
    writeln!(out, "ratio: {}", ExtRatio::of(&outcome.total, &opt)).map_err(io_err)?;
    Ok(())
}

fn cmd_bounds(common: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let metric = load_metric(common)?;
    if common.k == 0 || common.k > metric.n() {
        return Err(CliError::new(3, format!("k = {} but the metric has n = {} points", common.k, metric.n())));
    }
    let epsilon = common.epsilon.as_deref().ok_or_else(|| CliError::new(1, "--epsilon is required"))?;
    let epsilon = rational_arg("epsilon", epsilon)?;
    let c = match &common.c {
        Some(c) => rational_arg("c", c)?,
        None => Rational::from_integer((2 * common.k as i64 - 1).into()),
    };
    let alpha = rational_arg("alpha", &common.alpha)?;
    let b = compute_bounds(&metric, common.k, &c, &alpha, &epsilon).map_err(|e| match e {
        BoundsError::NonPositiveEpsilon => CliError::new(6, e.to_string()),
        _ => CliError::new(1, e.to_string()),
    })?;
    let mut lines = vec![
        ("gamma".to_string(), format_rational(&b.gamma)),
        ("B".to_string(), format_rational(&b.b)),
        ("opt_threshold".to_string(), format_rational(&b.opt_threshold)),
        ("phi".to_string(), format_rational(&b.phi)),
        ("D".to_string(), b.d.to_string()),
    ];
    for (i, xi) in b.xi.iter().enumerate() {
        lines.push((format!("xi_{}", i + 2), format_rational(xi)));
    }
    for (key, value) in lines {
        writeln!(out, "{key}: {value}").map_err(io_err)?;
    }
    Ok(())
}

fn cmd_sweep(common: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = config(common, true)?;
    let format: Format = common.format.parse().map_err(|e: ReportError| CliError::new(1, e.to_string()))?;
    let opts = SweepOptions {
        tolerance: rational_arg("tolerance", &common.tolerance)?,
        var_cap: common.var_cap,
        timing: common.timing,
        exec: Execution::default(),
    };
    let table = sweep_horizons(&cfg.space, cfg.c0, common.horizon, &opts).map_err(|e| match &e {
        ReportError::Lp { source, .. } => CliError::new(lp_code(source), e.to_string()),
        _ => CliError::new(1, e.to_string()),
    })?;
    out.write_all(&emit(&table, format)).map_err(io_err)
}
