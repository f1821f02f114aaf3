mod design;
mod extract;
mod plan;
mod selftest;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trevisan_core::Error;

#[derive(Parser)]
#[command(name = "trevisan", version, about = "Seeded randomness extraction over weak designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract every n-bit block of a file.
    Extract(extract::ExtractArgs),
    /// Print the parameters of a preset.
    Params(plan::ParamsArgs),
    /// Generate, verify, export or import weak designs.
    Design {
        #[command(subcommand)]
        action: design::DesignCmd,
    },
    /// Run the exact micro-scale checks.
    Selftest(selftest::SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Machine,
}

pub const EXIT_PARAMETER: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;
pub const EXIT_IO: u8 = 4;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::Unsupported(_) | Error::NotImplemented(_) | Error::SizeGuard(_) => {
            EXIT_PARAMETER
        }
        Error::Verification { .. } | Error::Internal { .. } => EXIT_VERIFICATION,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract::run(&a),
        Command::Params(a) => plan::run(&a),
        Command::Design { action } => design::run(&action),
        Command::Selftest(a) => selftest::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
