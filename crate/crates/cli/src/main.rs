//! `texnet`: extract texture signatures, evaluate them with leave-one-out
//! LDA, render measure maps and run parameter sweeps.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "texnet", version, about = "Texture signatures from directed pixel networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute signatures for every image of a dataset directory.
    Extract {
        /// Dataset root laid out as <root>/<class>/<image>.
        root: PathBuf,
        #[command(flatten)]
        params: ExtractArgs,
        /// Output CSV; the sidecar is written to <out>.json.
        #[arg(long, default_value = "features.csv")]
        out: PathBuf,
    },
    /// Leave-one-out LDA accuracy of a feature CSV.
    Eval {
        /// CSV written by `extract`.
        csv: PathBuf,
        #[arg(long, default_value_t = texnet_core::eval::DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long)]
        threads: Option<usize>,
        /// Report prefix; writes <out>.json and <out>.txt.
        /// Defaults to the CSV path without its extension plus `.eval`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one measure map of an image.
    Render {
        image: PathBuf,
        #[arg(long, short = 'r', default_value_t = 1)]
        radius: u32,
        /// k, ks or ke.
        #[arg(long, default_value = "k")]
        measure: String,
        #[arg(long, default_value = "measure.png")]
        out: PathBuf,
    },
    /// Evaluate a grid of radius or hidden-size combinations.
    Sweep {
        root: PathBuf,
        #[command(flatten)]
        params: ExtractArgs,
        /// theta-pairs or psi-triples.
        #[arg(long, default_value = "theta-pairs")]
        mode: String,
        #[arg(long, default_value_t = texnet_core::eval::DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 9])]
    radii: Vec<u32>,
    /// Comma-separated hidden-layer sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 19, 29])]
    qs: Vec<usize>,
    #[arg(long, default_value_t = texnet_core::signature::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Train on raw out-degree labels instead of labels scaled to [0, 1].
    #[arg(long)]
    no_label_norm: bool,
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err
                .downcast_ref::<texnet_core::Error>()
                .is_some_and(texnet_core::Error::is_usage);
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}
