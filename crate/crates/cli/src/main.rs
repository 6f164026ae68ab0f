//! `sgl`: criticality, Green functions, spectra and heat kernels of
//! Schrödinger operators on weighted graphs.
//!
//! Exit codes: 0 on success (any verdict), 2 on input errors, 3 on
//! computation errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Parser)]
#[command(name = "sgl", version, about = "Criticality toolkit for Schrödinger operators on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Graph file or generator spec (JSON).
    pub input: PathBuf,
    /// Largest exhaustion level.
    #[arg(long, default_value_t = 20)]
    pub levels: usize,
    /// Anchor vertex, e.g. `0` or `[0,0,0]`; defaults to the model's anchor.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Clone)]
pub struct RuleArgs {
    /// Relative change across the last quarter counted as a plateau.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Capacity ratio first/last counted as sustained decay.
    #[arg(long, default_value_t = 5.0)]
    pub decay_floor: f64,
    /// Agreement of the 1/n extrapolant with the last value counted as a plateau.
    #[arg(long, default_value_t = 0.05)]
    pub extrapolation_tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Critical/subcritical verdict from the capacity series (JSON report).
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// Green function series G_n(anchor, target); CSV columns level,value.
    Green {
        #[command(flatten)]
        common: Common,
        /// Second argument of G; defaults to the anchor.
        #[arg(long)]
        target: Option<String>,
    },
    /// Capacity series 1/G_n(anchor, anchor); CSV columns level,value.
    Capacity {
        #[command(flatten)]
        common: Common,
    },
    /// Ground-state estimate at the last level; CSV columns vertex,value.
    Groundstate {
        #[command(flatten)]
        common: Common,
        /// Verdict deciding the method; `auto` runs the classifier first.
        #[arg(long, value_enum, default_value_t = commands::VerdictArg::Auto)]
        verdict: commands::VerdictArg,
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// Bottom of the spectrum per level; CSV columns level,value.
    Lambda0 {
        #[command(flatten)]
        common: Common,
        /// Hole levels for the essential-spectrum probe (JSON output).
        #[arg(long, value_delimiter = ',')]
        holes: Vec<usize>,
    },
    /// Heat kernel p_t(x, y) on one level; CSV columns t,p_t.
    Heat {
        #[command(flatten)]
        common: Common,
        /// First argument; defaults to the anchor.
        #[arg(long)]
        x: Option<String>,
        /// Second argument; defaults to the anchor.
        #[arg(long)]
        y: Option<String>,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
    },
    /// Local Harnack constant of a connected vertex window (JSON).
    Harnack {
        #[command(flatten)]
        common: Common,
        /// Window vertex; repeat for each vertex.
        #[arg(long = "vertex", required = true)]
        vertices: Vec<String>,
        /// Constant f in (H − f)u ≥ 0.
        #[arg(long, default_value_t = 0.0)]
        f: f64,
        /// Largest window handled by path enumeration.
        #[arg(long, default_value_t = 16)]
        cap: usize,
    },
    /// Generalized bottom eigenvalue inf h(φ)/Σwφ² per level; CSV columns level,gen_lambda_min.
    Hardy {
        #[command(flatten)]
        common: Common,
        /// Weight: constant:c, inverse-square:c, geometric:r or indicator:v.
        #[arg(long)]
        weight: String,
    },
    /// Consolidated JSON report.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rule: RuleArgs,
        /// Optional weight for weight criticality or the Hardy series.
        #[arg(long)]
        weight: Option<String>,
        /// Add essential-spectrum probes and random-walk cross-checks.
        #[arg(long)]
        full: bool,
        /// Seed for the random-walk cross-check.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("SGL_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Classify { common, rule } => commands::classify(&common, &rule),
        Command::Green { common, target } => commands::green(&common, target.as_deref()),
        Command::Capacity { common } => commands::capacity(&common),
        Command::Groundstate { common, verdict, rule } => commands::groundstate(&common, verdict, &rule),
        Command::Lambda0 { common, holes } => commands::lambda0(&common, &holes),
        Command::Heat { common, x, y, times } => commands::heat(&common, x.as_deref(), y.as_deref(), &times),
        Command::Harnack {
            common,
            vertices,
            f,
            cap,
        } => commands::harnack(&common, &vertices, f, cap),
        Command::Hardy { common, weight } => commands::hardy(&common, &weight),
        Command::Report {
            common,
            rule,
            weight,
            full,
            seed,
        } => commands::report(&common, &rule, weight.as_deref(), full, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
