use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use frfid_cli::config::Method;
use frfid_cli::{compare_methods, load_bundle, run_excite, run_identify, run_montecarlo, run_simulate, validate_config, ExperimentConfig, ExternalData, HarnessError};

#[derive(Parser)]
#[command(name = "frfid", version, about = "Frequency response identification beyond the slow Nyquist frequency")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of lpm, sparse, etfe.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and list every violated constraint.
    Validate(Common),
    /// Write the excitation records.
    Excite(Common),
    /// Write excitation and simulated output records.
    Simulate(Common),
    /// Run the full identification pipeline.
    Identify {
        #[command(flatten)]
        common: Common,
        /// Fast input record (`sample_index,time_s,value`) instead of simulation.
        #[arg(long, requires = "output_csv")]
        input_csv: Option<PathBuf>,
        /// Slow output record matching `--input-csv`.
        #[arg(long, requires = "input_csv")]
        output_csv: Option<PathBuf>,
    },
    /// Monte Carlo study of the analytic FRF variance.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Per-band error comparison of one or more identify bundles.
    Compare {
        /// Bundle directories written by `identify`.
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(methods) = &self.methods {
            cfg.methods = methods.clone();
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("frfid-out"));
        Ok((cfg, out))
    }
}

fn report(out: &Path) {
    println!("wrote {}", out.display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate(c) => {
            let (cfg, _) = c.load()?;
            let setup = validate_config(&cfg)?;
            println!(
                "ok: N = {}, M = {}, F = {}, {} equations for {} parameters",
                setup.grid.n(),
                setup.grid.m(),
                setup.grid.factor(),
                setup.lpm.equations(),
                setup.lpm.parameters()
            );
        }
        Command::Excite(c) => {
            let (cfg, out) = c.load()?;
            run_excite(&cfg, &out)?;
            report(&out);
        }
        Command::Simulate(c) => {
            let (cfg, out) = c.load()?;
            run_simulate(&cfg, &out)?;
            report(&out);
        }
        Command::Identify {
            common,
            input_csv,
            output_csv,
        } => {
            let (cfg, out) = common.load()?;
            let external = match (input_csv, output_csv) {
                (Some(i), Some(o)) => Some(ExternalData::load(&i, &o)?),
                _ => None,
            };
            let result = run_identify(&cfg, &out, external.as_ref())?;
            for e in &result.errors {
                let s = e.summary();
                println!(
                    "{:<7} median rel err {:.3e}, above slow Nyquist {:.3e}",
                    e.method.name(),
                    s.median_rel_err.unwrap_or(f64::NAN),
                    s.median_rel_err_above_slow_nyquist.unwrap_or(f64::NAN)
                );
            }
            report(&out);
        }
        Command::Montecarlo { common, runs } => {
            let (mut cfg, out) = common.load()?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            let result = run_montecarlo(&cfg, &out)?;
            let s = &result.summary;
            println!(
                "median analytic/empirical ratio: F {:.3}, F^2 {:.3}; winner {}",
                s.median_ratio_f,
                s.median_ratio_f2,
                s.winner.as_deref().unwrap_or("none")
            );
            report(&out);
        }
        Command::Compare { bundles, out } => {
            let mut all = Vec::new();
            for b in &bundles {
                all.extend(load_bundle(b)?);
            }
            let cmp = compare_methods(&all)?;
            let text = cmp.text();
            print!("{text}");
            if let Some(out) = out {
                std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
                let mut buf = Vec::new();
                cmp.write_csv(&mut buf)?;
                std::fs::write(out.join("comparison.csv"), buf)?;
                std::fs::write(out.join("comparison.txt"), text)?;
                report(&out);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(2, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
