use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergoharris::experiment::{emit, run, EmitFormat, ExperimentConfig, ExperimentError, RunReport};

#[derive(Parser)]
#[command(
    name = "ergoharris",
    version,
    about = "Coupling and weak Harris diagnostics for Markov chains and delay equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// `report.json` path, or a directory for the JSON and CSV bundle.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the weak Harris contraction of a finite kernel.
    Certify {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        distance: PathBuf,
        #[arg(long)]
        lyapunov: PathBuf,
        #[arg(long)]
        t_star: usize,
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Coupled paths, envelope and excursion checks on a finite kernel.
    Couple {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        distance: PathBuf,
        /// Starting pairs as `x:y;x:y`.
        #[arg(long, default_value = "0:1")]
        pairs: String,
        /// Excursion envelope `c*q^n`.
        #[arg(long, default_value = "0.9*0.8^n")]
        rho: String,
        #[arg(long)]
        alpha_tilde: Option<f64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Number of sample paths per pair to dump as CSV.
        #[arg(long, default_value_t = 0)]
        traces: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Delay-equation experiments on a builtin system.
    Sdde {
        #[arg(long, default_value = "linear")]
        system: String,
        /// Comma-separated `key=value` parameters.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base(name: &str, c: &Common) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(name, c.seed, c.samples);
    cfg.out_dir = c.out.clone();
    cfg
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn build(cmd: Command) -> Result<ExperimentConfig, ExperimentError> {
    Ok(match cmd {
        Command::Certify {
            kernel,
            distance,
            lyapunov,
            t_star,
            horizon,
            common,
        } => {
            let mut c = base("harris-certify", &common)
                .with_param("kernel", path_str(&kernel))
                .with_param("distance", path_str(&distance))
                .with_param("lyapunov", path_str(&lyapunov))
                .with_param("t_star", t_star);
            if let Some(h) = horizon {
                c = c.with_param("horizon", h);
            }
            c
        }
        Command::Couple {
            kernel,
            distance,
            pairs,
            rho,
            alpha_tilde,
            steps,
            traces,
            common,
        } => {
            let mut c = base("couple", &common)
                .with_param("kernel", path_str(&kernel))
                .with_param("distance", path_str(&distance))
                .with_param("pairs", pairs)
                .with_param("rho", rho)
                .with_param("steps", steps)
                .with_param("dump_traces", traces);
            if let Some(a) = alpha_tilde {
                c = c.with_param("alpha_tilde", a);
            }
            c
        }
        Command::Sdde {
            system,
            params,
            experiment,
            dt,
            t_end,
            common,
        } => {
            let mut c = base(&experiment, &common).with_param("system", system);
            for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| ExperimentError::InvalidConfig {
                        key: kv.to_string(),
                        msg: "expected key=value".into(),
                    })?;
                c = c.with_param(k.trim(), v.trim());
            }
            if let Some(dt) = dt {
                c = c.with_param("dt", dt);
            }
            if let Some(t) = t_end {
                c = c.with_param("T", t);
            }
            c
        }
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", config.display())))?;
            let mut c = ExperimentConfig::parse(&text)?;
            if out.is_some() {
                c.out_dir = out;
            }
            c
        }
    })
}

fn write(report: &RunReport, out: &Path) -> Result<(), ExperimentError> {
    if out.extension().is_some_and(|e| e == "json") {
        let dir = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(e.to_string()))?;
        std::fs::write(out, report.to_json()).map_err(|e| ExperimentError::Io(e.to_string()))?;
        for t in &report.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())
                .map_err(|e| ExperimentError::Io(e.to_string()))?;
        }
        Ok(())
    } else {
        emit(report, out, EmitFormat::CsvBundle).map(|_| ())
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("ERGOHARRIS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let cli = Cli::parse();
    let result = build(cli.command).and_then(|cfg| {
        let report = run(&cfg)?;
        match &cfg.out_dir {
            Some(out) => write(&report, out)?,
            None => print!("{}", report.to_json()),
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            for c in &report.checks {
                eprintln!("{} {} {}", c.verdict, c.name, c.detail);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
