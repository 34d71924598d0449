use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use metaporous_cli::config::RunConfig;
use metaporous_cli::render::{heatmap_svg, spectrum_csv, spectrum_svg, Surface, Table};
use metaporous_cli::reproduce::{reproduce, Figure};
use metaporous_cli::sweep::run_sweep;
use metaporous_cli::{validate, CliError};

#[derive(Parser)]
#[command(name = "metaporous", version, about = "Rigid-metaporous absorber simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[sweep] workers`.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `[sweep] out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pinned sweeps behind one figure.
    Reproduce {
        figure: Figure,
        #[arg(long, default_value = "reproduce")]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Quick oracle, PML and convergence checks.
    Validate,
    /// Plot a sweep table.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Output SVG; defaults to the input path with a new extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Heatmap,
    Spectrum,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { config, workers, out } => {
            let mut spec = RunConfig::load(&config)?.resolve()?;
            if let Some(w) = workers {
                spec.workers = w;
            }
            if let Some(o) = out {
                spec.out = o;
            }
            let report = run_sweep(&spec)?;
            let failed = report.failures().count();
            println!(
                "{} points, {failed} failed; table {}, manifest {}",
                report.results.len(),
                report.table.display(),
                report.manifest.display()
            );
            Ok(u8::from(failed > 0))
        }
        Command::Reproduce { figure, out, workers } => {
            let failed = reproduce(figure, &out, workers)?;
            println!("outputs under {}; {failed} failed point(s)", out.display());
            Ok(u8::from(failed > 0))
        }
        Command::Validate => {
            let checks = validate::run_all();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(u8::from(checks.iter().any(|c| !c.passed)))
        }
        Command::Render { input, kind, out } => {
            let surface = Surface::from_table(&Table::parse(&fs::read_to_string(&input)?)?)?;
            let svg_path = out.unwrap_or_else(|| input.with_extension(match kind {
                Kind::Heatmap => "heatmap.svg",
                Kind::Spectrum => "spectrum.svg",
            }));
            match kind {
                Kind::Heatmap => fs::write(&svg_path, heatmap_svg(&surface))?,
                Kind::Spectrum => {
                    fs::write(&svg_path, spectrum_svg(&surface))?;
                    fs::write(svg_path.with_extension("csv"), spectrum_csv(&surface))?;
                }
            }
            println!("wrote {}", svg_path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
