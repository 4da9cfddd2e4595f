//! Command-line front end of the `ptc` binary.

mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{approximate_ber_with, cell_likelihoods, enumerate_paths, PairMetric, PuProfile};
use crate::channel::Occupancy;
use crate::convolutional::Trellis;
use crate::error::{Error, Result};
use crate::simulator::{
    self, crossover, run_multi_pu_ber, run_throughput, write_csv, CurvePoint, ExperimentConfig, MultiPuScenario,
    Scheme, WORKERS_ENV,
};

pub use validate::{markov_on_fraction, run_validation, CheckResult, Fault, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ptc", version, about = "Permutation trellis coded H-FSK: simulation, bounds and validation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Run even where the primary receiver's SINR floor would be violated.
    #[arg(long, global = true)]
    pub override_sinr_guard: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo BER of the H-FSK chain.
    BerSim {
        #[command(flatten)]
        common: Common,
    },
    /// Truncated union-bound BER for z = 0..=z_max.
    BerApprox {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        z_max: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Literal)]
        metric: MetricArg,
    },
    /// Throughput of H-FSK and both baselines over the sweep.
    Throughput {
        #[command(flatten)]
        common: Common,
    },
    /// H-FSK BER with one to three primary users for H = 2, 3, 4.
    MultiPu {
        #[command(flatten)]
        common: Common,
        /// On fraction of the dynamic users.
        #[arg(long, default_value_t = 0.35)]
        dynamic_p_on: f64,
        /// `r + p` of the dynamic users.
        #[arg(long, default_value_t = 0.01)]
        transition_rate: f64,
    },
    /// Lists the lowest-weight error events of a trellis.
    EnumeratePaths {
        #[command(flatten)]
        common: Common,
        /// Band count of the standard code; ignored with --config.
        #[arg(long, default_value_t = 3)]
        h: usize,
        #[arg(long, default_value_t = 3)]
        z: usize,
    },
    /// Runs the self-checks.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Level::Quick)]
        level: Level,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Literal,
    Pairwise,
}

impl From<MetricArg> for PairMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Literal => PairMetric::Literal,
            MetricArg::Pairwise => PairMetric::Pairwise,
        }
    }
}

#[derive(Debug, Serialize)]
struct OutputFile {
    path: String,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    arguments: Vec<String>,
    seed: u64,
    workers: usize,
    config: ExperimentConfig,
    config_toml: String,
    outputs: Vec<OutputFile>,
    timings_ms: Value,
    results: Value,
}

struct Context {
    command: &'static str,
    arguments: Vec<String>,
    config: ExperimentConfig,
    out: PathBuf,
    outputs: Vec<OutputFile>,
}

impl Context {
    fn new(command: &'static str, arguments: Vec<String>, common: &Common) -> Result<Self> {
        let mut config = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => default_config(command),
        };
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(workers) = common.workers {
            config.workers = workers;
        }
        if common.override_sinr_guard {
            config.override_sinr_guard = true;
        }
        config.validate()?;
        std::fs::create_dir_all(&common.out)?;
        Ok(Self { command, arguments, config, out: common.out.clone(), outputs: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_points(&mut self, name: &str, points: &[CurvePoint]) -> Result<()> {
        let path = self.path(name);
        write_csv(std::fs::File::create(&path)?, points)?;
        self.outputs.push(OutputFile { path: path.display().to_string(), rows: points.len() });
        Ok(())
    }

    fn write_rows(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.outputs.push(OutputFile { path: path.display().to_string(), rows: rows.len() });
        Ok(())
    }

    fn finish(self, timings_ms: Value, results: Value) -> Result<()> {
        let manifest = Manifest {
            tool: "ptc",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.to_string(),
            arguments: self.arguments,
            seed: self.config.seed,
            workers: simulator::resolve_workers(self.config.workers),
            config_toml: self.config.to_toml(),
            config: self.config,
            outputs: self.outputs,
            timings_ms,
            results,
        };
        let path = self.out.join(format!("{}.manifest.json", manifest.command));
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Configuration used when no file is given. The throughput comparison
/// needs four bands and an occupancy sweep.
pub fn default_config(command: &str) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    if command == "throughput" {
        config.link.h = 4;
        config.sweep = simulator::Sweep {
            axis: simulator::SweepAxis::POn,
            values: (0..=10).map(|i| i as f64 / 10.0).collect(),
            ..Default::default()
        };
    }
    config
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn cmd_ber_sim(ctx: &mut Context) -> Result<Value> {
    let mut config = ctx.config.clone();
    config.scheme = Scheme::Hfsk;
    let points = simulator::run_hfsk_ber(&config)?;
    ctx.write_points("ber_sim.csv", &points)?;
    Ok(json!({ "points": points }))
}

/// Union-bound BER of the configured H-FSK code at every grid point.
pub fn approximate_curve(config: &ExperimentConfig, z_max: usize, metric: PairMetric) -> Result<Vec<(f64, Vec<f64>)>> {
    let trellis = config.trellis()?;
    let spectrum = enumerate_paths(&trellis, z_max)?;
    let h = config.h();
    config
        .sweep
        .values
        .iter()
        .map(|&x| {
            let users = config.primary_users(x)?;
            let mut probs = vec![0.0; h];
            for u in &users {
                probs[u.band] = u.activity.on_probability()?;
            }
            let band = users.first().map_or(1, |u| u.band);
            let energies = config.link.energies_at_snr(config.snr_at(x), band)?;
            let lik = cell_likelihoods(energies.es_r, energies.i_pu, config.link.n0, h)?;
            let profile = PuProfile::per_band(probs)?;
            let values = (0..=spectrum.z)
                .map(|z| Ok(approximate_ber_with(&spectrum.truncated(z), &lik, &profile, metric)?.value))
                .collect::<Result<Vec<_>>>()?;
            Ok((x, values))
        })
        .collect()
}

fn cmd_ber_approx(ctx: &mut Context, z_max: usize, metric: PairMetric) -> Result<Value> {
    let start = Instant::now();
    let trellis = ctx.config.trellis()?;
    let spectrum = enumerate_paths(&trellis, z_max)?;
    let curve = approximate_curve(&ctx.config, z_max, metric)?;
    let elapsed = millis(start);
    let mut header = vec!["H".to_string(), "x_value".to_string()];
    header.extend((0..=spectrum.z).map(|z| format!("ber_z{z}")));
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|(x, values)| {
            let mut row = vec![ctx.config.h().to_string(), x.to_string()];
            row.extend(values.iter().map(|v| format!("{v:e}")));
            row
        })
        .collect();
    ctx.write_rows("ber_approx.csv", &header, &rows)?;
    let coefficients: Vec<Value> = spectrum.counts().iter().map(|(d, a)| json!({ "d": d, "a_d": a })).collect();
    Ok(json!({
        "transfer_function": coefficients,
        "d_free_star": spectrum.d_free_star,
        "metric": metric,
        "approximation_ms": elapsed,
    }))
}

fn cmd_throughput(ctx: &mut Context) -> Result<Value> {
    let mut all: Vec<CurvePoint> = Vec::new();
    let mut curves = Vec::new();
    let mut analytic = Vec::new();
    for scheme in [Scheme::Hfsk, Scheme::OpportunisticMfsk, Scheme::CodedBpskOfdm] {
        let config = ExperimentConfig { scheme, ..ctx.config.clone() };
        let points = run_throughput(&config)?;
        if scheme == Scheme::Hfsk {
            analytic = points.iter().map(|p| p.analytic.unwrap_or(f64::NAN)).collect();
        }
        curves.push(points.iter().map(|p| p.point.throughput).collect::<Vec<f64>>());
        all.extend(points.into_iter().map(|p| p.point));
    }
    ctx.write_points("throughput.csv", &all)?;
    let x = ctx.config.sweep.values.clone();
    let header: Vec<String> = ["x_value", "hfsk", "opportunistic_mfsk", "coded_bpsk_ofdm", "hfsk_analytic"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..x.len())
        .map(|i| {
            vec![
                x[i].to_string(),
                curves[0][i].to_string(),
                curves[1][i].to_string(),
                curves[2][i].to_string(),
                format!("{:e}", analytic[i]),
            ]
        })
        .collect();
    ctx.write_rows("throughput_wide.csv", &header, &rows)?;
    // H-FSK overtakes a baseline where its curve crosses from below
    let p1 = crossover(&x, &curves[1], &curves[0]);
    let p2 = crossover(&x, &curves[2], &curves[0]);
    Ok(json!({ "p1_star": p1, "p2_star": p2 }))
}

/// The standard multi-user scenarios: 1 to 3 users (as far as H allows),
/// always on and dynamic, for H = 2, 3, 4.
pub fn standard_scenarios(dynamic: Occupancy) -> Result<Vec<MultiPuScenario>> {
    let mut out = Vec::new();
    for h in [2, 3, 4] {
        for count in 1..=3.min(h) {
            out.push(MultiPuScenario::standard(h, count, Occupancy::AlwaysOn, "on")?);
            out.push(MultiPuScenario::standard(h, count, dynamic, "dynamic")?);
        }
    }
    Ok(out)
}

fn cmd_multi_pu(ctx: &mut Context, p_on: f64, rate: f64) -> Result<Value> {
    let dynamic = Occupancy::with_on_fraction(p_on, rate)?;
    let scenarios = standard_scenarios(dynamic)?;
    let mut config = ctx.config.clone();
    config.sweep.axis = simulator::SweepAxis::Snr;
    let curves = run_multi_pu_ber(&config, &scenarios)?;
    let header: Vec<String> = ["scenario", "scheme", "H", "x_value", "ber", "ber_ci_lo", "ber_ci_hi", "throughput", "packets", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![
                    c.scenario.label.clone(),
                    p.scheme.label().to_string(),
                    p.h.to_string(),
                    p.x_value.to_string(),
                    format!("{:e}", p.ber),
                    format!("{:e}", p.ber_ci_lo),
                    format!("{:e}", p.ber_ci_hi),
                    p.throughput.to_string(),
                    p.packets.to_string(),
                    p.seed.to_string(),
                ]
            })
        })
        .collect();
    ctx.write_rows("multi_pu.csv", &header, &rows)?;
    Ok(json!({ "scenarios": scenarios }))
}

fn cmd_enumerate(ctx: &mut Context, h: usize, z: usize, from_config: bool) -> Result<Value> {
    let trellis = if from_config { ctx.config.trellis()? } else { Trellis::standard(h)? };
    let spectrum = enumerate_paths(&trellis, z)?;
    let mapping = trellis.mapping().expect("mapped trellis");
    let header: Vec<String> = ["d", "inputs", "input_weight", "matrices"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for class in &spectrum.entries {
        println!("d = {:>3}  a_d = {}", class.d, class.paths.len());
        for e in &class.paths {
            let inputs: Vec<String> = e.inputs.iter().map(usize::to_string).collect();
            let matrices: Vec<String> = e.symbols.iter().map(|&s| mapping.matrices()[s].to_string()).collect();
            rows.push(vec![class.d.to_string(), inputs.join(" "), e.input_weight.to_string(), matrices.join(" ")]);
        }
    }
    ctx.write_rows("enumerate_paths.csv", &header, &rows)?;
    let counts: Vec<Value> = spectrum.counts().iter().map(|(d, a)| json!({ "d": d, "a_d": a })).collect();
    Ok(json!({ "h": mapping.h(), "transfer_function": counts, "d_free_star": spectrum.d_free_star }))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Domain(_) | Error::Io(_) | Error::SinrGuard { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn execute(cli: Cli, arguments: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let (ctx, results) = match cli.command {
        Command::BerSim { common } => {
            let mut ctx = Context::new("ber_sim", arguments, &common)?;
            let r = cmd_ber_sim(&mut ctx)?;
            (ctx, r)
        }
        Command::BerApprox { common, z_max, metric } => {
            let mut ctx = Context::new("ber_approx", arguments, &common)?;
            let r = cmd_ber_approx(&mut ctx, z_max, metric.into())?;
            (ctx, r)
        }
        Command::Throughput { common } => {
            let mut ctx = Context::new("throughput", arguments, &common)?;
            let r = cmd_throughput(&mut ctx)?;
            (ctx, r)
        }
        Command::MultiPu { common, dynamic_p_on, transition_rate } => {
            let mut ctx = Context::new("multi_pu", arguments, &common)?;
            let r = cmd_multi_pu(&mut ctx, dynamic_p_on, transition_rate)?;
            (ctx, r)
        }
        Command::EnumeratePaths { common, h, z } => {
            let from_config = common.config.is_some();
            let mut ctx = Context::new("enumerate_paths", arguments, &common)?;
            let r = cmd_enumerate(&mut ctx, h, z, from_config)?;
            (ctx, r)
        }
        Command::Validate { common, level, inject_fault } => {
            let ctx = Context::new("validate", arguments, &common)?;
            let checks = run_validation(level, inject_fault, simulator::resolve_workers(ctx.config.workers));
            let mut failed = 0;
            for c in &checks {
                if c.passed {
                    println!("PASS {:<28} {}", c.name, c.detail);
                } else {
                    failed += 1;
                    println!("FAIL {:<28} {}", c.name, c.detail);
                }
            }
            println!("{} checks, {} failed", checks.len(), failed);
            let results = json!({ "checks": checks });
            ctx.finish(json!({ "total": millis(start) }), results)?;
            return Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE });
        }
    };
    ctx.finish(json!({ "total": millis(start) }), results)?;
    Ok(EXIT_OK)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let arguments = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, arguments) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

/// Whether `path` holds a readable configuration.
pub fn check_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}
