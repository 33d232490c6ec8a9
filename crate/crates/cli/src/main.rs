//! `morphvault` command-line tool.
//!
//! Exit status is 0 on success, 1 when an operation fails (the error name is
//! printed on standard error) and 2 on a usage error.

mod morph_cmd;
mod vault_cmd;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "morphvault", version, about = "Repackage apps under a new name and icon; keep files in a PIN-locked vault")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inspect, rename, re-icon, align and sign application packages.
    Morph {
        #[command(subcommand)]
        command: morph_cmd::MorphCommand,
    },
    /// Encrypted per-file vault.
    Vault(vault_cmd::VaultArgs),
}

/// A failed command: either a domain error carrying the owning module's
/// error name, or bad usage.
#[derive(Debug)]
pub enum Failure {
    Domain { name: &'static str, message: String },
    Usage(String),
}

impl Failure {
    pub fn domain(name: &'static str, message: impl Into<String>) -> Self {
        Self::Domain {
            name,
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Domain { .. } => 1,
            Self::Usage(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Domain { name, message } if message.starts_with(name) => f.write_str(message),
            Self::Domain { name, message } => write!(f, "{name}: {message}"),
            Self::Usage(m) => f.write_str(m),
        }
    }
}

macro_rules! domain_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::domain(e.name(), e.to_string())
            }
        }
    )*};
}

domain_errors!(
    morphvault::morph::MorphError,
    morphvault::apkzip::ZipError,
    morphvault::axml::AxmlError,
    morphvault::signer::SignError,
    morphvault::vault::VaultError
);

pub fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::domain("Io", format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the destination directory, so `path`
/// only ever holds complete output.
pub fn write_file(path: &Path, data: &[u8]) -> Result<(), Failure> {
    use std::io::Write;
    let io = |e: std::io::Error| Failure::domain("Io", format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(data).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Morph { command } => morph_cmd::run(command),
        Command::Vault(args) => vault_cmd::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
