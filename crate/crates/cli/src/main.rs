use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use starnet::config::{read_json, DataConfig, ExperimentSpec, NetworkConfig, TargetConfig};
use starnet::experiment::{
    default_workers, fmt_float, run_approx, run_convergence, run_design, run_gamma, simulate_hyperbolic,
    simulate_parabolic, DesignMode, SweepInputs,
};
use starnet::{CouplingMatrix, Error, StarNetwork};

#[derive(Parser, Debug)]
#[command(name = "starnet", version, about = "Transport on star networks: transmission coefficients, design, viscous limit")]
struct Cli {
    /// Network JSON (for `converge`: the experiment description).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV outputs and the run manifest; stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recorded in the manifest; no subcommand draws random numbers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Proportional,
    TwoOut,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SimMode {
    Hyperbolic,
    Parabolic,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmission coefficients of the limit problem.
    Gamma,
    /// Couplings realizing a target set of transmission coefficients.
    Design {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum, default_value = "proportional")]
        mode: Mode,
    },
    /// Sampled fields of the limit or of one viscous run.
    Simulate {
        #[arg(long, value_enum)]
        mode: SimMode,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        /// Spatial samples per arc (limit mode).
        #[arg(long, default_value_t = 100)]
        nx: usize,
        /// Time samples (limit mode) or snapshots (viscous mode).
        #[arg(long, default_value_t = 10)]
        nt: usize,
    },
    /// Vanishing-viscosity sweep described by `--config`.
    Converge,
    /// Norms of the lifted initial data over `ε_n = 2^-n`.
    ApproxData {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "3:10")]
        n_range: String,
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
    },
}

struct Outputs {
    files: Vec<(String, String)>,
    notes: Vec<String>,
    inputs: Value,
}

fn network(cli: &Cli) -> Result<(NetworkConfig, StarNetwork, CouplingMatrix), Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let cfg: NetworkConfig = read_json(path)?;
    let (net, k) = cfg.build()?;
    Ok((cfg, net, k))
}

fn parse_range(s: &str) -> Result<(u32, u32), Error> {
    let bad = || Error::InvalidConfig(format!("--n-range expects LO:HI, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn execute(cli: &Cli) -> Result<Outputs, Error> {
    match &cli.command {
        Command::Gamma => {
            let (cfg, net, k) = network(cli)?;
            let (csv, summary) = run_gamma(&net, &k)?;
            Ok(Outputs {
                files: vec![("gamma.csv".into(), csv)],
                notes: vec![summary],
                inputs: json!({ "network": cfg }),
            })
        }
        Command::Design { target, mode } => {
            let (cfg, net, _) = network(cli)?;
            let t: TargetConfig = read_json(target)?;
            let mode = match mode {
                Mode::Proportional => DesignMode::Proportional,
                Mode::TwoOut => DesignMode::TwoOut,
            };
            let out = run_design(&net, &t.gamma, mode)?;
            let designed = NetworkConfig::from_parts(&net, &out.coupling);
            let designed_json = serde_json::to_string_pretty(&designed).map_err(|e| Error::Io(e.to_string()))?;
            Ok(Outputs {
                files: vec![("k.csv".into(), out.csv), ("network.json".into(), designed_json + "\n")],
                notes: vec![format!("roundtrip_error={}", fmt_float(out.roundtrip_error))],
                inputs: json!({ "network": cfg, "target": t, "mode": format!("{mode:?}") }),
            })
        }
        Command::Simulate {
            mode,
            data,
            epsilon,
            horizon,
            theta,
            nx,
            nt,
        } => {
            let (cfg, net, k) = network(cli)?;
            let d: DataConfig = read_json(data)?;
            let (u0, b) = d.build(&net)?;
            let inputs = json!({
                "network": cfg, "data": d, "mode": format!("{mode:?}"), "epsilon": epsilon,
                "horizon": horizon, "theta": theta, "nx": nx, "nt": nt,
            });
            let files = match mode {
                SimMode::Hyperbolic => vec![("fields.csv".into(), simulate_hyperbolic(&net, &k, &u0, &b, *horizon, *nx, *nt)?)],
                SimMode::Parabolic => {
                    let eps = epsilon.ok_or_else(|| Error::InvalidConfig("--epsilon is required in parabolic mode".into()))?;
                    let (fields, diag) = simulate_parabolic(&net, &k, &u0, &b, eps, *horizon, *theta, *nt)?;
                    vec![("fields.csv".into(), fields), ("diagnostics.csv".into(), diag)]
                }
            };
            Ok(Outputs {
                files,
                notes: Vec::new(),
                inputs,
            })
        }
        Command::Converge => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
            let spec: ExperimentSpec = read_json(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let resolved = spec.resolve(base)?;
            let inputs = SweepInputs::from_resolved(&resolved)?;
            let workers = cli.workers.unwrap_or_else(default_workers);
            let report = run_convergence(&inputs, &resolved.epsilons, workers);
            let failed = report.rows.iter().filter(|r| !r.is_ok()).count();
            Ok(Outputs {
                files: vec![
                    ("convergence.csv".into(), report.to_csv()?),
                    ("timing.csv".into(), report.timing_csv()?),
                ],
                notes: vec![format!("rows={} failed={failed}", report.rows.len())],
                inputs: json!({ "experiment": resolved }),
            })
        }
        Command::ApproxData { data, n_range, theta } => {
            let (cfg, net, k) = network(cli)?;
            let d: DataConfig = read_json(data)?;
            let (u0, b) = d.build(&net)?;
            let range = parse_range(n_range)?;
            Ok(Outputs {
                files: vec![("approx.csv".into(), run_approx(&net, &k, &u0, &b, range, *theta)?)],
                notes: Vec::new(),
                inputs: json!({ "network": cfg, "data": d, "n_range": [range.0, range.1], "theta": theta }),
            })
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gamma => "gamma",
        Command::Design { .. } => "design",
        Command::Simulate { .. } => "simulate",
        Command::Converge => "converge",
        Command::ApproxData { .. } => "approx-data",
    }
}

fn emit(cli: &Cli, out: Outputs) -> Result<(), Error> {
    let Some(dir) = &cli.out else {
        let mut w = std::io::stdout().lock();
        let many = out.files.len() > 1;
        let res = (|| {
            for (name, text) in &out.files {
                if many {
                    writeln!(w, "# {name}")?;
                }
                write!(w, "{text}")?;
            }
            for n in &out.notes {
                writeln!(w, "# {n}")?;
            }
            w.flush()
        })();
        return match res {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::Io(format!("stdout: {e}"))),
            _ => Ok(()),
        };
    };
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, text) in &out.files {
        fs::write(dir.join(name), text).map_err(io)?;
    }
    let manifest = json!({
        "command": command_name(&cli.command),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cli.seed,
        "workers": cli.workers,
        "config": cli.config,
        "inputs": out.inputs,
        "outputs": out.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "notes": out.notes,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n").map_err(io)?;
    for n in &out.notes {
        println!("{n}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|out| emit(&cli, out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
