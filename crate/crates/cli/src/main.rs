use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inoutwave_cli::config::RunConfig;
use inoutwave_cli::output::{num, opt_num, OUTPUT_ROOT_ENV};
use inoutwave_cli::verify::{format_line, verify, VerifyConfig};
use inoutwave_cli::{report, simulate, sweep, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "inoutwave", version, about = "Radial defocusing wave runs and inward/outward energy diagnostics")]
struct Cli {
    /// Base directory for relative output paths.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one config (or a manifest.json) and write its reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite; exit status 1 if any check fails.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Lower resolutions, no runtime budgets.
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a template config over the product of the given axes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `d=3,4,5`, `p=2.5,pc+0.1,pe-0.05`, `kappa=...` or `amplitude=...`.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        /// Worker threads (default: all hardware threads).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute estimates from a run directory's traces.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(root) = &cli.output_root {
        std::env::set_var(OUTPUT_ROOT_ENV, root);
    }
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let res = simulate::simulate(&cfg, out.as_deref())?;
            println!("wrote {}", res.dir.display());
            for (k, v) in &res.scalars {
                println!("  {k:<28} {}", num(*v));
            }
        }
        Command::Verify { config, fast, out } => {
            let mut cfg = match config {
                Some(p) => VerifyConfig::from_path(&p)?,
                None => VerifyConfig::default(),
            };
            cfg.fast |= fast;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let summary = verify(&cfg)?;
            for c in &summary.checks {
                println!("{}", format_line(c));
                if !c.note.is_empty() {
                    println!("    {}", c.note);
                }
            }
            let failed = summary.failures();
            if failed > 0 {
                return Err(CliError::CheckFailed(failed));
            }
        }
        Command::Sweep { config, axes, jobs, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let axes = axes.iter().map(|a| sweep::parse_axis(a)).collect::<CliResult<Vec<_>>>()?;
            let rows = sweep::sweep(&cfg, &axes, jobs, out.as_deref())?;
            for (i, r) in rows.iter().enumerate() {
                match &r.outcome {
                    Ok(o) => println!(
                        "point {i}: d={} p={} E={} decay_slope={} -> {}",
                        r.config.model.d,
                        r.config.model.p,
                        opt_num(o.scalars.get("E").copied()),
                        opt_num(r.decay_slope()),
                        o.dir.display()
                    ),
                    Err(e) => println!("point {i}: d={} p={} failed: {e}", r.config.model.d, r.config.model.p),
                }
            }
        }
        Command::Report { dir } => {
            let rep = report::report(&dir)?;
            for (k, v) in &rep.scalars {
                println!("{k:<28} {}", num(*v));
            }
            println!(
                "{} scalars match manifest.json to {:.1e} (relative)",
                rep.compared, rep.max_manifest_gap
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
