mod config;
mod error;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Config, Method};
use error::CliResult;

/// MR fingerprinting reconstruction pipeline.
///
/// Stages exchange container files inside the output directory
/// (`out.dir`): dict.mrfq, phantom.mrfq, acq.mrfq, recon_<method>.mrfq.
/// Exit codes: 1 configuration, 2 I/O, 3 numeric failure.
#[derive(Parser, Debug)]
#[command(name = "mrfdiph", version)]
struct Cli {
    /// Experiment config (`key = value` lines, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `out.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dictionary operations.
    Dict {
        #[command(subcommand)]
        action: DictAction,
    },
    /// Phantom operations.
    Phantom {
        #[command(subcommand)]
        action: PhantomAction,
    },
    /// Simulates undersampled multi-coil k-space of the phantom.
    Acquire {
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long)]
        c: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Relative measurement noise level.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Reconstructs maps; prints the output and trace CSV paths.
    Recon {
        #[command(flatten)]
        method: MethodArg,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        estimator: Option<String>,
        #[arg(long)]
        cg_iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Writes metrics_<method>.csv with MAPE_T1, MAPE_T2, NRMSE_TSMI and
    /// NRMSE_KSPACE rows against the phantom.
    Eval {
        #[command(flatten)]
        method: MethodArg,
    },
    /// Writes grayscale PGM images into report_<method>/.
    ///
    /// t1.pgm and t1_ref.pgm map T1 in [0, 4500] ms linearly onto 0..255;
    /// t2.pgm and t2_ref.pgm map T2 in [0, 2500] ms. t1_ape.pgm and
    /// t2_ape.pgm show the absolute percentage error in [0, APE_MAX] %.
    /// Values outside a window are clamped; background voxels are black.
    Report {
        #[command(flatten)]
        method: MethodArg,
        #[arg(long, default_value_t = report::DEFAULT_APE_MAX)]
        ape_max: f64,
    },
}

#[derive(Subcommand, Debug)]
enum DictAction {
    /// Simulates the dictionary and its temporal subspace.
    Build {
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum PhantomAction {
    /// Generates ground-truth T1, T2 and proton-density maps.
    Make {
        #[arg(long)]
        h: Option<usize>,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Snaps tissue values onto the dictionary grid.
        #[arg(long)]
        on_grid: Option<bool>,
    },
}

#[derive(Args, Debug)]
struct MethodArg {
    /// Overrides `recon.method`.
    #[arg(long, value_enum)]
    method: Option<MethodName>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodName {
    Svdmrf,
    Admm,
    Diph,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Svdmrf => Method::Svdmrf,
            MethodName::Admm => Method::Admm,
            MethodName::Diph => Method::Diph,
        }
    }
}

fn put<T: ToString>(cfg: &mut Config, key: &str, v: Option<T>) -> CliResult<()> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn put_method(cfg: &mut Config, m: &MethodArg) -> CliResult<()> {
    put(cfg, "recon.method", m.method.map(|m| Method::from(m).name()))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.set("out.dir", &std::path::absolute(dir).unwrap_or_else(|_| dir.clone()).to_string_lossy())?;
    }
    match cli.command {
        Command::Dict { action: DictAction::Build { l, s } } => {
            put(&mut cfg, "seq.l", l)?;
            put(&mut cfg, "dict.s", s)?;
            println!("{}", pipeline::dict_build(&cfg)?.display());
        }
        Command::Phantom { action: PhantomAction::Make { h, w, seed, on_grid } } => {
            put(&mut cfg, "phantom.h", h)?;
            put(&mut cfg, "phantom.w", w)?;
            put(&mut cfg, "phantom.seed", seed)?;
            put(&mut cfg, "phantom.on_grid", on_grid)?;
            println!("{}", pipeline::phantom_make(&cfg)?.display());
        }
        Command::Acquire { r, c, seed, noise } => {
            put(&mut cfg, "acq.R", r)?;
            put(&mut cfg, "acq.c", c)?;
            put(&mut cfg, "acq.seed", seed)?;
            put(&mut cfg, "acq.noise", noise)?;
            println!("{}", pipeline::acquire(&cfg)?.display());
        }
        Command::Recon { method, k, xi, mode, estimator, cg_iters, seed } => {
            put_method(&mut cfg, &method)?;
            put(&mut cfg, "sampler.K", k)?;
            put(&mut cfg, "sampler.xi", xi)?;
            put(&mut cfg, "sampler.mode", mode)?;
            put(&mut cfg, "sampler.estimator.kind", estimator)?;
            put(&mut cfg, "sampler.cg_iters", cg_iters)?;
            put(&mut cfg, "sampler.seed", seed)?;
            let out = pipeline::recon(&cfg)?;
            println!("{}", out.container.display());
            if let Some(trace) = out.trace {
                println!("{}", trace.display());
            }
        }
        Command::Eval { method } => {
            put_method(&mut cfg, &method)?;
            let (path, metrics) = pipeline::eval(&cfg)?;
            print!("{}", metrics.to_csv());
            eprintln!("{}", path.display());
        }
        Command::Report { method, ape_max } => {
            put_method(&mut cfg, &method)?;
            for p in pipeline::report(&cfg, ape_max)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrfdiph: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
