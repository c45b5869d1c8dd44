use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tpm_cli::bench::{run_bench, DEFAULT_MAX_PATH_LEN, DEFAULT_SEED, DEFAULT_SIZES};
use tpm_cli::commands::{self, parse_time, Format};
use tpm_cli::error::{CliError, Result};
use tpm_cli::repl;

#[derive(Parser)]
#[command(name = "tpm", version, about = "Temporal provenance graphs: load, convert, query")]
struct Cli {
    /// Directory holding the graph, materialized nodes and agent state.
    #[arg(long, global = true, default_value = "tpm-workspace")]
    workspace: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an OPM graph (`.opm`) or a native TPM graph (`.tpm`).
    Load { file: PathBuf },
    /// Convert the loaded OPM graph to a TPM graph.
    Convert {
        #[arg(long)]
        force: bool,
    },
    /// Run statements from a file, from standard input (`-`) or inline.
    Query {
        query: String,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
        #[arg(long)]
        max_path_len: Option<usize>,
    },
    /// Interactive shell.
    Repl {
        #[arg(long)]
        max_path_len: Option<usize>,
    },
    /// Write the graph or a materialized node as Graphviz DOT.
    ExportDot {
        #[arg(default_value = "graph")]
        target: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Synthetic benchmark comparing TPM and OPM queries.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_PATH_LEN)]
        max_path_len: usize,
    },
    /// Advance the workspace clock and run the pull agents that are due.
    Tick { time: String },
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let dir = cli.workspace.as_path();
    match cli.command {
        Command::Load { file } => commands::load(dir, &file, &mut out),
        Command::Convert { force } => commands::convert(dir, force, &mut out),
        Command::Query {
            query,
            format,
            max_path_len,
        } => commands::query(dir, &query, format, max_path_len, &mut out),
        Command::Repl { max_path_len } => {
            let stdin = std::io::stdin();
            repl::run(dir, max_path_len, &mut stdin.lock(), &mut out)
        }
        Command::ExportDot { target, out: file } => commands::export_dot(dir, &target, file.as_deref(), &mut out),
        Command::Bench {
            sizes,
            seed,
            max_path_len,
        } => {
            let report = run_bench(&sizes, seed, max_path_len);
            out.write_all(report.render().as_bytes())
                .map_err(|e| CliError::io("output", e))
        }
        Command::Tick { time } => commands::tick(dir, parse_time(&time)?, &mut out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
