use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use munsc_core::harness::bench::rows_to_csv;
use munsc_core::harness::{
    generate_gaussian_mixture, run_bench, run_experiment, BenchSettings, BenchSuite, ExperimentConfig, ExperimentReport,
    MixtureSpec, OracleChoice,
};
use munsc_core::io::{read_dataset, write_dataset};
use munsc_core::validation;
use munsc_core::{Profile, SolverKind};

#[derive(Parser)]
#[command(name = "munsc", version, about = "No-substitution k-median clustering on random-order streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian mixture with uniform outliers as CSV.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k_true: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 20.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        #[arg(long, env = "MUNSC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a dataset over one random permutation and write a JSON report.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "desk", value_parser = ["paper", "desk"])]
        profile: String,
        #[arg(long, default_value = "local-search", value_parser = ["exhaustive", "local-search"])]
        solver: String,
        #[arg(long, env = "MUNSC_SEED", default_value_t = 0)]
        perm_seed: u64,
        #[arg(long, default_value_t = 0)]
        solver_seed: u64,
        #[arg(long, default_value = "auto", value_parser = ["auto", "exact", "local-search", "none"])]
        oracle: String,
        /// Seed the dataset was generated with, echoed into the report.
        #[arg(long)]
        dataset_seed: Option<u64>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite and write one CSV row per trial.
    Bench {
        #[arg(long, value_parser = ["ratio", "centers", "lemmas"])]
        suite: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, env = "MUNSC_SEED", default_value_t = 0)]
        seed: u64,
        /// Points per instance; defaults to the suite's standard size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance criteria; exits non-zero if any fails.
    Validate {
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also write the outcomes as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Flatten JSON reports into CSV rows.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn set_jobs(jobs: usize) -> Result<()> {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("configuring worker threads")?;
    }
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report_rows(inputs: &[PathBuf]) -> Result<String> {
    let mut out = String::from(
        "file,n,k,delta,profile,solver,perm_seed,solver_seed,dataset_seed,copies,centers,risk,oracle,oracle_risk,ratio,ratio_ceiling,warnings,wall_time_secs\n",
    );
    for path in inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r = ExperimentReport::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        let c = &r.config;
        let fields = [
            csv_field(&path.display().to_string()),
            r.n.to_string(),
            c.k.to_string(),
            c.delta.to_string(),
            c.profile.name().to_string(),
            serde_json::to_value(c.solver)?.as_str().unwrap_or_default().to_string(),
            c.perm_seed.to_string(),
            c.solver_seed.to_string(),
            c.dataset_seed.map(|s| s.to_string()).unwrap_or_default(),
            r.copies.len().to_string(),
            r.num_centers.to_string(),
            r.risk.to_string(),
            csv_field(r.oracle.as_ref().map(|o| o.label.as_str()).unwrap_or_default()),
            r.oracle.as_ref().map(|o| o.risk.to_string()).unwrap_or_default(),
            r.ratio.map(|x| if x.is_finite() { x.to_string() } else { "inf".into() }).unwrap_or_default(),
            r.ratio_ceiling.to_string(),
            r.warnings.len().to_string(),
            r.wall_time_secs.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { n, k_true, dim, separation, outliers, seed, out } => {
            let spec = MixtureSpec { n, k_true, dim, separation, outlier_fraction: outliers, seed };
            let mixture = generate_gaussian_mixture(&spec)?;
            write_dataset(&mixture.dataset, &out)?;
            eprintln!("wrote {n} points to {}", out.display());
        }
        Command::Run { data, k, delta, profile, solver, perm_seed, solver_seed, oracle, dataset_seed, out } => {
            let dataset = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let profile = Profile::by_name(&profile).ok_or_else(|| anyhow!("unknown profile {profile}"))?;
            let solver = SolverKind::by_name(&solver).ok_or_else(|| anyhow!("unknown solver {solver}"))?;
            let oracle = OracleChoice::by_name(&oracle).ok_or_else(|| anyhow!("unknown oracle {oracle}"))?;
            let config = ExperimentConfig { solver_seed, perm_seed, oracle, dataset_seed, ..ExperimentConfig::new(k, delta, profile, solver) };
            let report = run_experiment(&dataset, &config)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(&(report.to_json()? + "\n"), out.as_deref())?;
        }
        Command::Bench { suite, trials, jobs, seed, n, delta, out } => {
            set_jobs(jobs)?;
            let suite = BenchSuite::by_name(&suite).ok_or_else(|| anyhow!("unknown suite {suite}"))?;
            let mut settings = BenchSettings::new(suite, trials, seed);
            settings.delta = delta;
            if let Some(n) = n {
                settings.n = n;
            }
            let rows = run_bench(&settings)?;
            fs::write(&out, rows_to_csv(&rows)?).with_context(|| format!("writing {}", out.display()))?;
            let failed = rows.iter().filter(|r| r.passed == Some(false)).count();
            eprintln!("{} rows written to {}; {failed} flagged as failing", rows.len(), out.display());
        }
        Command::Validate { jobs, json } => {
            set_jobs(jobs)?;
            let outcomes = validation::run_with(|o| eprintln!("finished criterion {} in {:.1}s", o.id, o.elapsed_secs));
            for o in &outcomes {
                println!("{}", o.line());
            }
            if let Some(path) = json {
                fs::write(&path, serde_json::to_string_pretty(&outcomes)?)?;
            }
            if outcomes.iter().any(|o| !o.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { inputs, out } => {
            if inputs.is_empty() {
                bail!("no reports given");
            }
            emit(&report_rows(&inputs)?, out.as_deref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
