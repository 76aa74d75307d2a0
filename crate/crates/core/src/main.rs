use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlslab::checkpoint::Checkpoint;
use nlslab::config::{Expectation, RunConfig};
use nlslab::detector::VerdictKind;
use nlslab::evolve::{cutoffs_for, ground_state_for};
use nlslab::experiment::{
    checks_json, ground_state_csv, ground_state_report, run, run_thresholds, summarize, sweep,
    sweep_csv, verify, write_run, RunContext,
};
use nlslab::ground_state::thresholds_with_rho;
use nlslab::series::TimeSeries;
use nlslab::NlsError;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "nlslab", version, about = "Radial cubic NLS laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; results go to `<out>/<name>/`. NLSLAB_OUT takes precedence.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel work.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the ground state and its threshold constants.
    GroundState(Common),
    /// Evolve the configured initial data.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint instead of the initial data.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Summarize a series and run the scattering detector on it.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Series CSV; defaults to `<out>/<name>/series.csv`.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Also write the sampled cutoff tables.
        #[arg(long)]
        dump_cutoffs: bool,
    },
    /// Run the configuration once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config key, e.g. `initial.amplitude`.
        #[arg(long)]
        param: String,
        /// Comma separated values; may be empty.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        values: String,
    },
    /// Check the numerical invariants on the configuration.
    Verify(Common),
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance(String),
}

impl From<NlsError> for Failure {
    fn from(e: NlsError) -> Self {
        match e {
            NlsError::Config { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

impl Common {
    fn load(&self) -> std::result::Result<RunConfig, Failure> {
        let cfg = match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        };
        cfg.and_then(|c| c.validate().map(|_| c))
            .map_err(|e| Failure::Config(e.to_string()))
    }

    fn run_dir(&self, cfg: &RunConfig) -> PathBuf {
        let root = std::env::var_os("NLSLAB_OUT")
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out.clone());
        root.join(&cfg.name)
    }
}

fn write(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn ground_state(common: &Common) -> Outcome {
    let cfg = common.load()?;
    let gs = ground_state_for(&cfg)?;
    let tc = thresholds_with_rho(&gs, cfg.delta_prime, cfg.rho)?;
    let dir = common.run_dir(&cfg);
    let report = ground_state_report(&gs, &tc);
    write(&dir.join("ground_state.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write(&dir.join("ground_state.csv"), &ground_state_csv(&gs))
}

fn evolve(common: &Common, resume: Option<&Path>) -> Outcome {
    let cfg = common.load()?;
    let checkpoint = resume.map(Checkpoint::load).transpose()?;
    let ctx = RunContext::for_config(&cfg, true)?;
    let art = run(&cfg, &ctx, checkpoint.as_ref())?;
    for p in write_run(&common.run_dir(&cfg), &art)? {
        println!("wrote {}", p.display());
    }
    let kind = art.summary.verdict.kind;
    println!("termination {:?}, verdict {}", art.output.series.termination, kind.name());
    match (cfg.expect, kind) {
        (Expectation::Scattering, VerdictKind::Blowup) => Err(Failure::Runtime(
            "expected scattering but the run blew up".into(),
        )),
        (Expectation::Blowup, VerdictKind::ScatteringConsistent) => Err(Failure::Runtime(
            "expected blowup but the run is consistent with scattering".into(),
        )),
        _ => Ok(()),
    }
}

fn diagnose(common: &Common, series: Option<&Path>, dump_cutoffs: bool) -> Outcome {
    let cfg = common.load()?;
    let dir = common.run_dir(&cfg);
    if dump_cutoffs {
        write(&dir.join("cutoffs.csv"), &cutoffs_for(&cfg)?.to_csv())?;
    }
    let path = series.map_or_else(|| dir.join("series.csv"), Path::to_path_buf);
    let ts = TimeSeries::read_csv(&path)?;
    let gs = ground_state_for(&cfg)?;
    let tc = run_thresholds(&cfg, &gs)?;
    let summary = summarize(&ts, &cfg, Some(&tc));
    write(&dir.join("verdict.json"), &(serde_json::to_string_pretty(&summary.verdict)? + "\n"))?;
    write(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!("verdict {}", summary.verdict.kind.name());
    Ok(())
}

fn run_sweep(common: &Common, param: &str, values: &str) -> Outcome {
    let cfg = common.load()?;
    let values: Vec<String> = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    let rows = sweep(&cfg, param, &values, common.workers)?;
    write(&common.run_dir(&cfg).join("sweep.csv"), &sweep_csv(&rows))
}

fn run_verify(common: &Common) -> Outcome {
    let cfg = common.load()?;
    let checks = verify(&cfg, common.seed)?;
    for c in &checks {
        println!(
            "{} {:<24} {:.3e} (tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    write(
        &common.run_dir(&cfg).join("verify.json"),
        &(serde_json::to_string_pretty(&checks_json(&checks))? + "\n"),
    )?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Acceptance(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GroundState(c) => ground_state(c),
        Command::Evolve { common, resume } => evolve(common, resume.as_deref()),
        Command::Diagnose {
            common,
            series,
            dump_cutoffs,
        } => diagnose(common, series.as_deref(), *dump_cutoffs),
        Command::Sweep {
            common,
            param,
            values,
        } => run_sweep(common, param, values),
        Command::Verify(c) => run_verify(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
    }
}
