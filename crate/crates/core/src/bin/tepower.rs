use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use tepower::channel::{ChannelKind, InstanceConfig};
use tepower::dtmc::{self, DtmcParams, Target};
use tepower::game::Oracle;
use tepower::sim::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "tepower", version, about = "Trial-and-error power allocation: simulation and chain analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the reduced chain: transition rates, bounds, exact first passage, occupancy.
    Analyze(AnalyzeArgs),
    /// Run a Monte-Carlo experiment and write occupancy.csv and passage.csv.
    Simulate(SimulateArgs),
    /// Simulate a grid of Q values and channel models around one base config.
    Sweep(SweepArgs),
    /// Satisfaction and power-ratio curves averaged over trials.
    Curves(SimulateArgs),
    /// Join a simulation CSV with an `analyze` CSV on K, C, Q, eps and target.
    Compare(CompareArgs),
    /// Print the instance of a config and optionally dump its gains.
    Instance(InstanceArgs),
    /// Exhaustive equilibrium report of the config's instance, as JSON.
    Equilibria(InstanceArgs),
    /// Per-player state trace of one trial as CSV.
    Trace(TraceArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long = "K", value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long = "C", value_delimiter = ',', required = true)]
    c: Vec<usize>,
    #[arg(long = "Q", value_delimiter = ',', required = true)]
    q: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.02")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = tepower::channel::DEFAULT_SINR_THRESHOLD)]
    gamma: f64,
    #[arg(long, default_value_t = tepower::channel::DEFAULT_MAX_POWER)]
    pmax: f64,
    #[arg(long, default_value_t = tepower::channel::DEFAULT_NOISE_POWER)]
    noise: f64,
    /// ne, se, or both.
    #[arg(long, default_value = "ne")]
    target: String,
    #[arg(long, default_value_t = 0.0)]
    du: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: SimulateArgs,
    #[arg(long = "Q", value_delimiter = ',')]
    q: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    channel: Vec<ChannelKind>,
}

#[derive(Args)]
struct CompareArgs {
    /// occupancy.csv or passage.csv from `simulate`.
    #[arg(long)]
    sim: PathBuf,
    /// Output of `analyze`.
    #[arg(long)]
    analysis: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the gain tensor as CSV here.
    #[arg(long)]
    gains: Option<PathBuf>,
    /// Load gains from CSV instead of generating them.
    #[arg(long)]
    load_gains: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn targets(list: &str) -> Result<Vec<Target>> {
    Ok(match list {
        "both" => vec![Target::Nash, Target::Satisfaction],
        other => vec![other.parse()?],
    })
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record([
        "K", "C", "Q", "eps", "gamma", "pmax", "noise", "target", "du", "q_s", "p_eq_d", "p_d_eq", "t_lower",
        "t_upper", "t_exact", "occupancy",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for &k in &args.k {
        for &c in &args.c {
            for &q in &args.q {
                for &eps in &args.eps {
                    let qs = dtmc::count_satisfying_levels(q, args.pmax, args.noise, args.gamma)?;
                    let params = DtmcParams::new(k, c, q, qs, eps).with_delta_u(args.du);
                    if let Err(e) = params.validate() {
                        eprintln!("skipping K={k} C={c} Q={q} eps={eps}: {e}");
                        continue;
                    }
                    for target in targets(&args.target)? {
                        let p = sim::predict(&params, target);
                        w.write_record([
                            k.to_string(),
                            c.to_string(),
                            q.to_string(),
                            eps.to_string(),
                            args.gamma.to_string(),
                            args.pmax.to_string(),
                            args.noise.to_string(),
                            target.to_string(),
                            args.du.to_string(),
                            qs.to_string(),
                            params.leave_equilibrium().to_string(),
                            params.discontent_to_equilibrium(target).to_string(),
                            opt(p.bounds.map(|b| b.0)),
                            opt(p.bounds.map(|b| b.1)),
                            opt(p.exact),
                            opt(p.occupancy),
                        ])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn load_experiment(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(n) = args.iters {
        cfg.iterations = n;
    }
    if let Some(s) = args.seed {
        cfg.instance.seed = Some(s);
    }
    Ok(cfg)
}

fn write_tables(rows: &[sim::SweepRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    sim::write_occupancy_csv(rows, File::create(dir.join("occupancy.csv"))?)?;
    sim::write_passage_csv(rows, File::create(dir.join("passage.csv"))?)?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_experiment(args)?;
    let rows = sim::sweep(std::slice::from_ref(&cfg))?;
    write_tables(&rows, &args.out)?;
    for r in &rows {
        println!(
            "{} target={} sim_occupancy={:.4} dtmc_occupancy={} sim_first={}",
            r.channel,
            r.target,
            r.sim_occupancy,
            r.dtmc_occupancy.map_or("-".into(), |v| format!("{v:.4}")),
            r.sim_mean.map_or("-".into(), |v| format!("{v:.1}")),
        );
    }
    Ok(())
}

fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let base = load_experiment(&args.base)?;
    let qs = if args.q.is_empty() { vec![base.instance.num_power_levels] } else { args.q.clone() };
    let channels = if args.channel.is_empty() { vec![base.instance.channel] } else { args.channel.clone() };
    let mut configs = Vec::new();
    for &channel in &channels {
        for &q in &qs {
            let mut cfg = base.clone();
            cfg.instance.num_power_levels = q;
            cfg.instance.channel = channel;
            configs.push(cfg);
        }
    }
    let rows = sim::sweep(&configs)?;
    write_tables(&rows, &args.base.out)?;
    sim::write_sweep_csv(&rows, File::create(args.base.out.join("sweep.csv"))?)?;
    println!("{} rows written to {}", rows.len(), args.base.out.display());
    Ok(())
}

fn curves(args: &SimulateArgs) -> Result<()> {
    let cfg = load_experiment(args)?;
    let curves = sim::curves_protocol(&cfg)?;
    fs::create_dir_all(&args.out)?;
    curves.write_csv(File::create(args.out.join("curves.csv"))?)?;
    let show = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.1}"));
    println!(
        "trials={} first_all_satisfied={} ({} reached) first_optimal={} ({} reached)",
        curves.trials,
        show(curves.mean_first_all_satisfied),
        curves.trials_all_satisfied,
        show(curves.mean_first_optimal),
        curves.trials_optimal
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Keyed {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "C")]
    c: usize,
    #[serde(rename = "Q")]
    q: usize,
    eps: f64,
    target: String,
}

type Key = (usize, usize, usize, u64, String);

fn key_of(row: &csv::StringRecord, headers: &csv::StringRecord) -> Result<Key> {
    let k: Keyed = row.deserialize(Some(headers))?;
    Ok((k.k, k.c, k.q, k.eps.to_bits(), k.target))
}

fn compare(args: &CompareArgs) -> Result<()> {
    let mut analysis = csv::Reader::from_path(&args.analysis)?;
    let a_headers = analysis.headers()?.clone();
    let mut by_key: HashMap<Key, csv::StringRecord> = HashMap::new();
    for row in analysis.records() {
        let row = row?;
        by_key.insert(key_of(&row, &a_headers)?, row);
    }
    let mut simulated = csv::Reader::from_path(&args.sim)?;
    let s_headers = simulated.headers()?.clone();
    let key_cols = ["K", "C", "Q", "eps", "target"];
    let extra: Vec<usize> = (0..a_headers.len()).filter(|&i| !key_cols.contains(&&a_headers[i])).collect();
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    let mut header: Vec<String> = s_headers.iter().map(String::from).collect();
    header.extend(extra.iter().map(|&i| format!("analysis_{}", &a_headers[i])));
    w.write_record(&header)?;
    let mut matched = 0;
    for row in simulated.records() {
        let row = row?;
        let Some(a) = by_key.get(&key_of(&row, &s_headers)?) else { continue };
        let mut out: Vec<String> = row.iter().map(String::from).collect();
        out.extend(extra.iter().map(|&i| a[i].to_string()));
        w.write_record(&out)?;
        matched += 1;
    }
    w.flush()?;
    if matched == 0 {
        bail!("no rows matched on K, C, Q, eps, target");
    }
    Ok(())
}

fn build_instance(args: &InstanceArgs) -> Result<(InstanceConfig, tepower::NetworkInstance)> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = InstanceConfig::from_toml(&text)?;
    let inst = match &args.load_gains {
        Some(path) => tepower::NetworkInstance::simplified(cfg.params())?.with_gains_csv(File::open(path)?)?,
        None => cfg.build()?,
    };
    Ok((cfg, inst))
}

fn instance(args: &InstanceArgs) -> Result<()> {
    let (cfg, inst) = build_instance(args)?;
    write!(io::stdout().lock(), "{}", inst.config(cfg.seed).to_toml()?)?;
    if let Some(path) = &args.gains {
        inst.write_gains_csv(File::create(path)?)?;
    }
    Ok(())
}

fn equilibria(args: &InstanceArgs) -> Result<()> {
    let (_, inst) = build_instance(args)?;
    let report = Oracle::new(&inst).report()?;
    writeln!(io::stdout().lock(), "{}", report.to_json(&inst))?;
    Ok(())
}

fn trace(args: &TraceArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let inst = cfg.instance.build()?;
    let seed = args.seed.unwrap_or(cfg.master_seed());
    sim::write_trace(&inst, cfg.eps, args.iters, seed, output(args.out.as_deref())?)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Curves(a) => curves(a),
        Command::Compare(a) => compare(a),
        Command::Instance(a) => instance(a),
        Command::Equilibria(a) => equilibria(a),
        Command::Trace(a) => trace(a),
    };
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    match result {
        Err(e) if is_broken_pipe(&e) => Ok(()),
        other => other,
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().or_else(|| match c.downcast_ref::<tepower::Error>() {
            Some(tepower::Error::Io(io)) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}
