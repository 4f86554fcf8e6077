use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cyleig::cli;
use cyleig::plot::PlotSpec;

#[derive(Parser)]
#[command(name = "cyleig", version, about = "Eigenvalue experiments for elliptic operators on long and short cylinders")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments selected by a config file.
    Run { config: PathBuf },
    /// Plot CSV columns as an SVG line chart.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        /// One or more y columns, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        logy: bool,
        /// Draw one line per distinct value of this column.
        #[arg(long)]
        group: Option<String>,
    },
    /// Summarize the CSVs of an output directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_ERROR as u8 } else { 0 });
        }
    };
    let code = match args.command {
        Command::Run { config } => cli::run(&config),
        Command::Plot { csv, x, y, out, logy, group } => cli::plot(&csv, &PlotSpec { x, y, logy, group }, &out),
        Command::Report { dir } => cli::report(&dir),
    };
    ExitCode::from(code as u8)
}
