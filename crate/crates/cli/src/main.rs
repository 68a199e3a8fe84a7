//! `cascade` — simulate cascade dynamical systems on circle/line products
//! and certify their stability hypotheses from sampled evidence.
//!
//! Exit codes: 0 PASS/success, 1 FAIL, 2 INCONCLUSIVE, 3 usage or config
//! error.

use std::path::PathBuf;
use std::process::exit;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cascade_cli::commands::{self, EXIT_FAIL, EXIT_USAGE};
use cascade_cli::config::{parse_config, RunConfig, SystemSelector};
use cascade_cli::systems::resolve_system;
use cascade_core::error::CoreError;

#[derive(Parser)]
#[command(
    name = "cascade",
    version,
    about = "Simulation and stability certification of cascade dynamical systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Built-in system name (overrides the config's system selector).
    system: Option<String>,
    /// JSON config document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts (default: config `out_dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for all stochastic components.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one trajectory; writes trajectory_*.csv and *.svg.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial condition, comma separated chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Option<Vec<f64>>,
        /// End time.
        #[arg(long)]
        t: Option<f64>,
        /// Integration tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Number of output samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Projection axes for the plot, e.g. 0,2.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<usize>>,
    },
    /// Locate and classify equilibria; writes equilibria.json.
    Equilibria {
        #[command(flatten)]
        common: Common,
        /// Newton seeds per dimension.
        #[arg(long)]
        grid: Option<usize>,
        /// Newton convergence tolerance.
        #[arg(long)]
        newton_tol: Option<f64>,
    },
    /// Approximate the chain recurrent set; writes chainrec.json and
    /// recurrent_boxes.csv/.svg.
    Chainrec {
        #[command(flatten)]
        common: Common,
        /// Subdivision depth (2^depth boxes per dimension).
        #[arg(long)]
        depth: Option<u32>,
        /// Chain hop slack (default: box diameter).
        #[arg(long)]
        eps: Option<f64>,
        /// Chain hop time.
        #[arg(long)]
        t_flow: Option<f64>,
        /// Refinement rounds.
        #[arg(long)]
        refine_rounds: Option<usize>,
        /// Integration tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Monte Carlo basin estimate; writes basin.json.
    Basin {
        #[command(flatten)]
        common: Common,
        /// Number of samples.
        #[arg(long)]
        n: Option<usize>,
        /// Integration horizon per sample.
        #[arg(long)]
        horizon: Option<f64>,
        /// Convergence distance to the target.
        #[arg(long)]
        conv_tol: Option<f64>,
        /// Target point, comma separated (default: the system's attractor).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Option<Vec<f64>>,
        /// Fraction required for a PASS.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run the full cascade certification; writes report.json.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo samples for the subsystem basins.
        #[arg(long)]
        n_basin: Option<usize>,
        /// Box-cover depth for the recurrence check.
        #[arg(long)]
        depth: Option<u32>,
        /// Keep running conditions after the first failure.
        #[arg(long)]
        no_fail_fast: bool,
    },
    /// List the built-in example systems.
    ListExamples,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text)?
        }
        None => {
            let name = common.system.as_deref().ok_or_else(|| {
                anyhow::anyhow!("no system given: pass a built-in name or --config <path>")
            })?;
            RunConfig::builtin(name)
        }
    };
    if common.config.is_some() {
        if let Some(name) = &common.system {
            cfg.system = SystemSelector::Builtin(name.clone());
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}


fn effective_out(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Cmd::ListExamples => Ok(commands::list_examples()),
        Cmd::Simulate {
            common,
            from,
            t,
            tol,
            samples,
            axes,
        } => {
            let mut cfg = load_config(&common)?;
            let block = cfg.simulate.get_or_insert_with(Default::default);
            if from.is_some() {
                block.from = from;
            }
            if let Some(v) = t {
                block.t_end = Some(v);
            }
            if let Some(v) = tol {
                block.tol = Some(v);
            }
            if let Some(v) = samples {
                block.samples = Some(v);
            }
            if let Some(axes) = axes {
                anyhow::ensure!(axes.len() == 2, "--axes needs exactly two indices");
                block.axes = Some([axes[0], axes[1]]);
            }
            let resolved = resolve_system(&cfg)?;
            let out = effective_out(&common, &cfg);
            commands::simulate(&cfg, &resolved, &out)
        }
        Cmd::Equilibria {
            common,
            grid,
            newton_tol,
        } => {
            let mut cfg = load_config(&common)?;
            let block = cfg.equilibria.get_or_insert_with(Default::default);
            if let Some(v) = grid {
                block.grid_per_dim = Some(v);
            }
            if let Some(v) = newton_tol {
                block.newton_tol = Some(v);
            }
            let resolved = resolve_system(&cfg)?;
            let out = effective_out(&common, &cfg);
            commands::equilibria(&cfg, &resolved, &out)
        }
        Cmd::Chainrec {
            common,
            depth,
            eps,
            t_flow,
            refine_rounds,
            tol,
        } => {
            let mut cfg = load_config(&common)?;
            let block = cfg.chainrec.get_or_insert_with(Default::default);
            if let Some(v) = depth {
                block.depth = Some(v);
            }
            if let Some(v) = eps {
                block.eps = Some(v);
            }
            if let Some(v) = t_flow {
                block.t_flow = Some(v);
            }
            if let Some(v) = refine_rounds {
                block.refine_rounds = Some(v);
            }
            if let Some(v) = tol {
                block.tol = Some(v);
            }
            let resolved = resolve_system(&cfg)?;
            let out = effective_out(&common, &cfg);
            commands::chainrec(&cfg, &resolved, &out)
        }
        Cmd::Basin {
            common,
            n,
            horizon,
            conv_tol,
            target,
            threshold,
        } => {
            let mut cfg = load_config(&common)?;
            let block = cfg.basin.get_or_insert_with(Default::default);
            if let Some(v) = n {
                block.n = Some(v);
            }
            if let Some(v) = horizon {
                block.horizon = Some(v);
            }
            if let Some(v) = conv_tol {
                block.conv_tol = Some(v);
            }
            if target.is_some() {
                block.target = target;
            }
            if let Some(v) = threshold {
                block.threshold = Some(v);
            }
            let resolved = resolve_system(&cfg)?;
            let out = effective_out(&common, &cfg);
            commands::basin(&cfg, &resolved, &out)
        }
        Cmd::Certify {
            common,
            n_basin,
            depth,
            no_fail_fast,
        } => {
            let mut cfg = load_config(&common)?;
            let block = cfg.certify.get_or_insert_with(Default::default);
            if let Some(v) = n_basin {
                block.n_basin = Some(v);
            }
            if let Some(v) = depth {
                block.depth = Some(v);
            }
            if no_fail_fast {
                block.fail_fast = Some(false);
            }
            let resolved = resolve_system(&cfg)?;
            let out = effective_out(&common, &cfg);
            commands::certify(&cfg, &resolved, &out)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            exit(code);
        }
    };
    match run(cli) {
        Ok(code) => exit(code),
        Err(e) => {
            // A diverging trajectory is a finding, not a usage error.
            let code = if e.downcast_ref::<CoreError>().map(CoreError::is_divergence) == Some(true)
            {
                EXIT_FAIL
            } else {
                EXIT_USAGE
            };
            eprintln!("error: {e:#}");
            exit(code);
        }
    }
}
