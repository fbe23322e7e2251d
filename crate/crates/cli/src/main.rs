use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use skewlaw_cli::config::parse_steps;
use skewlaw_cli::{run, write_artifact, CliError, Command, RunConfig, Suite};
use skewlaw_core::montecarlo::{default_set, parse_set, DensitySpec, Indicator};
use skewlaw_core::numerics::Backend;

/// Exact tables, wandering rates and Monte Carlo occupation-time laws for
/// random interval maps with an indifferent-in-average fixed point.
///
/// Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "skewlaw", version)]
struct Cli {
    /// What to run; optional with --config.
    #[arg(value_enum)]
    command: Option<Command>,
    /// hata, pelikan, mbgi, or a JSON system description (*.json).
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    seed: Option<u64>,
    /// Step counts N, comma separated (e.g. 1e3,1e4,1e5).
    #[arg(long)]
    steps: Option<String>,
    /// Ensemble size M.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Truncation index K.
    #[arg(long)]
    truncate: Option<u32>,
    /// Occupation set "a,b;c,d" of disjoint dyadic intervals (e.g. "1/2^2,3/2^2").
    #[arg(long)]
    set: Option<String>,
    /// above-half, junction (the system's default set) or in-set(a,b;...).
    #[arg(long)]
    indicator: Option<String>,
    /// Initial density uniform(a,b).
    #[arg(long)]
    density: Option<DensitySpec>,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    /// CSV output; the JSON sidecar goes to <out>.json. Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism). Never changes results.
    #[arg(long)]
    threads: Option<usize>,
    /// Start from the config embedded in an artifact (CSV, sidecar or report).
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match (&cli.config, cli.command) {
        (Some(path), command) => {
            let mut c = RunConfig::from_artifact(&std::fs::read_to_string(path)?)?;
            if let Some(command) = command {
                c.command = command;
            }
            c
        }
        (None, Some(command)) => RunConfig::new(command),
        (None, None) => return Err(CliError::Usage("a command or --config is required".into())),
    };
    if let Some(s) = &cli.system {
        config.system = s.clone();
    }
    if let Some(b) = cli.backend {
        config.backend = b;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(s) = &cli.steps {
        config.steps = parse_steps(s)?;
    }
    if let Some(m) = cli.trajectories {
        config.trajectories = m;
    }
    if let Some(k) = cli.truncate {
        config.truncate = k;
    }
    if let Some(d) = &cli.density {
        config.density = d.clone();
    }
    if let Some(s) = cli.suite {
        config.suite = s;
    }
    match (&cli.indicator, &cli.set) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --indicator or --set".into())),
        (None, Some(set)) => config.indicator = Indicator::in_set(parse_set(set)?)?,
        (Some(name), None) if name == "junction" => {
            let kind = config.load_system()?.kind;
            let set = default_set(kind).ok_or_else(|| CliError::Usage("custom systems have no junction set".into()))?;
            config.indicator = Indicator::InSet(set);
        }
        (Some(text), None) => config.indicator = text.parse()?,
        (None, None) => {}
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|config| {
        let artifact = run(&config, cli.threads)?;
        write_artifact(&artifact, cli.out.as_deref(), cli.threads)?;
        for m in &artifact.messages {
            // Keep stdout clean when it carries the artifact.
            if cli.out.is_some() {
                println!("{m}");
            } else {
                eprintln!("{m}");
            }
        }
        Ok(artifact.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
