use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use crowdmean_cli::example1::DEFAULT_TOLERANCE;
use crowdmean_cli::reports::{render_assumptions, DEFAULT_DELTA};
use crowdmean_cli::{run_assumptions, run_example1, run_lipman, run_recover, run_sweep, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "crowdmean", version, about = "Belief aggregation experiments and reproductions")]
struct Cli {
    /// Output file; defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Directory for `<command>.<ext>` when `--out` is not given.
    #[arg(long, global = true, env = "CROWDMEAN_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the three-state worked example against its published tables.
    Example1 {
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Run a seeded Monte Carlo sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Build the Lipman model pair for order m and check the identification failure.
    Lipman {
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Check the aggregation assumptions on a structure file.
    Assumptions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
    /// Recover pooled posteriors from hierarchies in a partition-model file.
    Recover {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Example1 { .. } => "example1",
            Command::Sweep { .. } => "sweep",
            Command::Lipman { .. } => "lipman",
            Command::Assumptions { .. } => "assumptions",
            Command::Recover { .. } => "recover",
        }
    }
}

fn emit(doc: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, doc).with_context(|| format!("writing {}", path.display()))
        }
        None => Ok(stdout.write_all(doc.as_bytes())?),
    }
}

/// Runs one command. Returns whether every comparison or assertion held.
fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<bool> {
    let name = cli.command.name();
    let mut format = cli.format.unwrap_or_default();
    let mut out = cli.out.clone();
    let passed = match cli.command {
        Command::Example1 { tolerance } => {
            let report = run_example1(tolerance)?;
            let doc = report.render(format);
            for c in report.failures() {
                writeln!(
                    stderr,
                    "mismatch {}[{}][{}]: expected {}, computed {}",
                    c.table, c.row, c.col, c.expected, c.computed
                )?;
            }
            emit_default(&doc, out, cli.out_dir.as_deref(), name, format, stdout)?;
            report.passed()
        }
        Command::Sweep { config, seed, trials } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("config {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(trials) = trials {
                cfg = cfg.with_trials(trials)?;
            }
            format = cli.format.unwrap_or(cfg.format);
            out = out.or(cfg.output.clone());
            let result = run_sweep(&cfg)?;
            let summary = result.summary_table().to_csv();
            let to_stdout = out.is_none() && cli.out_dir.is_none();
            emit_default(&result.render(format), out, cli.out_dir.as_deref(), name, format, stdout)?;
            if to_stdout {
                stderr.write_all(summary.as_bytes())?;
            } else {
                stdout.write_all(summary.as_bytes())?;
            }
            true
        }
        Command::Lipman { order } => {
            let report = run_lipman(order)?;
            emit_default(&report.render(format), out, cli.out_dir.as_deref(), name, format, stdout)?;
            if !report.identification_fails() {
                writeln!(stderr, "order {order}: hierarchies do not exhibit the identification failure")?;
            }
            report.identification_fails()
        }
        Command::Assumptions { config, delta } => {
            let report = run_assumptions(&config, delta).with_context(|| format!("structure {}", config.display()))?;
            emit_default(&render_assumptions(&report, format), out, cli.out_dir.as_deref(), name, format, stdout)?;
            report.satisfied()
        }
        Command::Recover { config } => {
            let report = run_recover(&config).with_context(|| format!("partition model {}", config.display()))?;
            emit_default(&report.render(format), out, cli.out_dir.as_deref(), name, format, stdout)?;
            report.all_match()
        }
    };
    Ok(passed)
}

fn emit_default(
    doc: &str,
    out: Option<PathBuf>,
    out_dir: Option<&Path>,
    name: &str,
    format: Format,
    stdout: &mut dyn Write,
) -> Result<()> {
    let path = out.or_else(|| out_dir.map(|d| d.join(format!("{name}.{}", format.extension()))));
    emit(doc, path.as_deref(), stdout)
}

fn main() -> ExitCode {
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    match run(Cli::parse(), &mut out, &mut err) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    struct Run {
        passed: Option<bool>,
        error: String,
        stdout: String,
        stderr: String,
    }

    fn crowdmean(args: &[&str]) -> Run {
        let cli = Cli::try_parse_from(std::iter::once("crowdmean").chain(args.iter().copied())).unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let res = run(cli, &mut out, &mut err);
        Run {
            error: res.as_ref().err().map(|e| format!("{e:#}")).unwrap_or_default(),
            passed: res.ok(),
            stdout: String::from_utf8(out).unwrap(),
            stderr: String::from_utf8(err).unwrap(),
        }
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    const SWEEP: &str = "\
binary_symmetric = 0.7
procedure = \"pmba_binary\"
population_sizes = [100, 1000, 10000]
trials = 200
seed = 11
true_state = \"w1\"
";

    #[test]
    fn example1_passes_and_fails_on_tolerance() {
        let ok = crowdmean(&["example1"]);
        assert_eq!(ok.passed, Some(true));
        assert!(ok.stdout.starts_with("table,row,col,expected,computed,abs_diff,pass\n"));
        assert!(!ok.stdout.contains(",false\n"));

        let tight = crowdmean(&["example1", "--tolerance", "1e-9"]);
        assert_eq!(tight.passed, Some(false));
        assert!(tight.stdout.contains("mean,w1,w1,0.431000,"));
        assert!(tight.stderr.contains("mismatch mean"));
    }

    #[test]
    fn sweep_is_byte_identical_and_improves_with_n() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "sweep.toml", SWEEP);
        let a = crowdmean(&["sweep", "--config", &cfg]);
        let b = crowdmean(&["sweep", "--config", &cfg]);
        assert_eq!(a.passed, Some(true), "{}", a.error);
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(a.stderr, b.stderr);
        assert_eq!(a.stdout.lines().count(), 1 + 3 * 200);

        // the summary goes to stderr when the document goes to stdout
        let rates: Vec<f64> = a
            .stderr
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        assert_eq!(rates.len(), 3);
        assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
        assert!(rates[2] >= 0.99);

        assert_ne!(crowdmean(&["sweep", "--config", &cfg, "--seed", "12"]).stdout, b.stdout);
    }

    #[test]
    fn zero_trials_is_a_line_anchored_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "bad.toml", &SWEEP.replace("trials = 200", "trials = 0"));
        let out = crowdmean(&["sweep", "--config", &cfg]);
        assert_eq!(out.passed, None);
        assert!(out.error.contains("line 4"), "{}", out.error);

        let good = write(dir.path(), "good.toml", SWEEP);
        assert_eq!(crowdmean(&["sweep", "--config", &good, "--trials", "0"]).passed, None);
    }

    #[test]
    fn out_dir_names_the_file_after_the_command() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let run = crowdmean(&["lipman", "--order", "3", "--format", "kv", "--out-dir", d]);
        assert_eq!(run.passed, Some(true));
        assert!(run.stdout.is_empty());
        let doc = std::fs::read_to_string(dir.path().join("lipman.txt")).unwrap();
        assert!(doc.contains("x = 1/20\n"));
        assert!(doc.contains("posterior_shifted = 0 1\n"));
        assert!(doc.contains("identification_fails = true\n"));
    }

    #[test]
    fn assumptions_and_recover_read_files() {
        let dir = tempfile::tempdir().unwrap();
        let structure = write(
            dir.path(),
            "s.toml",
            "states = [\"rain\", \"dry\"]\nsignals = [\"cloudy\", \"clear\"]\nprior = [\"0.5\", \"0.5\"]\n\
             likelihood = [[\"0.7\", \"0.3\"], [\"0.3\", \"0.7\"]]\n",
        );
        let a = crowdmean(&["assumptions", "--config", &structure, "--format", "kv"]);
        assert_eq!(a.passed, Some(true), "{}", a.error);
        assert!(a.stdout.contains("posterior_rank = 2\nsatisfied = true\n"));

        let model = write(
            dir.path(),
            "m.toml",
            "payoff_states = [\"w1\", \"w2\"]\n\
             [[state]]\nname = \"a\"\npayoff = \"w1\"\nprior = \"1/4\"\n\
             [[state]]\nname = \"b\"\npayoff = \"w2\"\nprior = \"1/4\"\n\
             [[state]]\nname = \"c\"\npayoff = \"w2\"\nprior = \"1/2\"\n\
             [[player]]\ncells = [[\"a\", \"b\"], [\"c\"]]\n\
             [[player]]\ncells = [[\"a\"], [\"b\", \"c\"]]\n",
        );
        let r = crowdmean(&["recover", "--config", &model]);
        assert_eq!(r.passed, Some(true), "{}", r.error);
        assert!(r.stdout.contains("\n1-2,"), "{}", r.stdout);
        assert!(!r.stdout.contains(",false\n"));
    }

    #[test]
    fn env_var_feeds_out_dir() {
        let cli = Cli::command();
        let arg = cli.get_arguments().find(|a| a.get_id() == "out_dir").unwrap();
        assert_eq!(arg.get_env().and_then(|e| e.to_str()), Some("CROWDMEAN_OUT_DIR"));
    }
}
