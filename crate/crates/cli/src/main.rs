use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracecorpus::codec::TierPrefix;

mod commands;
mod config;
mod error;
mod seeds;

use config::PipelineConfig;
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "tracecorpus", version, about = "Build and score execution-trace corpora for Python programs")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Root seed for every random choice.
    #[arg(long = "rng", global = true)]
    pub rng: Option<u64>,
    /// Trace hook script.
    #[arg(long, global = true)]
    pub hook: Option<PathBuf>,
    /// Python interpreter.
    #[arg(long, global = true)]
    pub python: Option<String>,
    /// Per-execution time limit in seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// Maximum recorded trace lines per execution.
    #[arg(long, global = true)]
    pub max_trace_lines: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate mutants for every seed program in a directory.
    Mutate {
        #[arg(long)]
        seed_dir: PathBuf,
        /// Mutants per seed.
        #[arg(long)]
        n: Option<usize>,
        /// Only perturb numeric literals.
        #[arg(long)]
        constants_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute programs under the trace hook and keep successful traces.
    Trace {
        #[arg(long)]
        seed_dir: Option<PathBuf>,
        /// Mutant records; each inherits its parent seed's stdin.
        #[arg(long)]
        mutants: Option<PathBuf>,
        /// Program records `{id, problem_id, source, test_input}`.
        #[arg(long)]
        programs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble a curriculum stage plus held-out splits.
    BuildDataset {
        #[arg(long)]
        singleline: Option<PathBuf>,
        #[arg(long)]
        tutorial: Option<PathBuf>,
        #[arg(long)]
        codenetmut: Option<PathBuf>,
        /// Curriculum stage: S1, S2 or S3.
        #[arg(long)]
        stage: Option<String>,
        /// Share of single-line records kept as the hard subset.
        #[arg(long)]
        hard_fraction: Option<f64>,
        /// Per-record losses `{id, loss}` used to rank single-line difficulty.
        #[arg(long)]
        losses: Option<PathBuf>,
        /// Flag single-line records whose final state disagrees with the hook.
        #[arg(long)]
        verify_singleline: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Encode a source file, or traced programs into dataset records.
    Encode {
        #[arg(long, conflicts_with = "traced", required_unless_present = "traced")]
        source: Option<PathBuf>,
        #[arg(long)]
        traced: Option<PathBuf>,
        /// SINGLELINE, TUTORIAL or CODENETMUT.
        #[arg(long, default_value = "CODENETMUT")]
        tier: TierPrefix,
        #[arg(long, requires = "traced")]
        out: Option<PathBuf>,
    },
    /// Score predicted traces and outputs against gold records.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Accumulate scores as exact rationals.
        #[arg(long)]
        exact: bool,
    },
    /// Code-to-code search by output similarity, scored with MAP.
    SearchEval {
        #[arg(long)]
        corpus: PathBuf,
        /// Predicted outputs `{function_id, output}`; without it outputs come from the hook.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Rank candidate solutions by output similarity and report pass@k.
    RankEval {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value_t = 50)]
        top_m: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        k: Vec<u64>,
    },
    /// Per-tier code length, trace length and state count averages.
    Stats {
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
}

fn settings(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::load(g.config.as_deref())?;
    if let Some(w) = g.workers {
        c.workers = w;
    }
    if let Some(r) = g.rng {
        c.rng_seed = r;
    }
    if let Some(h) = &g.hook {
        c.hook = Some(h.clone());
    }
    if let Some(p) = &g.python {
        c.python = p.clone();
    }
    if let Some(t) = g.time_limit {
        if t.is_nan() || t <= 0.0 {
            return Err(CliError::usage("--time-limit must be positive"));
        }
        c.limits.time_s = t;
    }
    if let Some(m) = g.max_trace_lines {
        c.limits.max_trace_lines = m;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = settings(&cli.global)?;
    match cli.command {
        Command::Mutate { seed_dir, n, constants_only, out } => {
            if let Some(n) = n {
                cfg.mutants_per_seed = n;
            }
            commands::mutate(&cfg, &seed_dir, constants_only, &out)
        }
        Command::Trace { seed_dir, mutants, programs, out } => {
            commands::trace(&cfg, seed_dir.as_deref(), mutants.as_deref(), programs.as_deref(), &out)
        }
        Command::BuildDataset {
            singleline,
            tutorial,
            codenetmut,
            stage,
            hard_fraction,
            losses,
            verify_singleline,
            out_dir,
        } => {
            if let Some(s) = stage {
                cfg.stage = s;
            }
            if let Some(f) = hard_fraction {
                cfg.hard_fraction = f;
            }
            commands::build_dataset(
                &cfg,
                commands::DatasetInputs {
                    singleline: singleline.as_deref(),
                    tutorial: tutorial.as_deref(),
                    codenetmut: codenetmut.as_deref(),
                    losses: losses.as_deref(),
                    verify_singleline,
                },
                &out_dir,
            )
        }
        Command::Encode { source, traced, tier, out } => {
            commands::encode(source.as_deref(), traced.as_deref(), tier, out.as_deref())
        }
        Command::Evaluate { pred, gold, exact } => commands::evaluate(&pred, &gold, exact),
        Command::SearchEval { corpus, predictions } => commands::search_eval(&cfg, &corpus, predictions.as_deref()),
        Command::RankEval { instances, top_m, k } => commands::rank_eval(&instances, top_m, &k),
        Command::Stats { records } => commands::stats(&records),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.render().to_string().trim_end());
            eprintln!("{}", err.record());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
