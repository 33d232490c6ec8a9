use std::io::IsTerminal;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use morphvault::vault::{validate_pin, Direction, KdfParams, QueuedTask, Vault};

use crate::{print_json, Failure};

#[derive(Args, Debug)]
pub struct VaultArgs {
    /// Vault directory.
    #[arg(long = "vault", env = "DSV_DIR", global = true)]
    dir: Option<PathBuf>,
    /// PIN (4-16 digits). Prompted for when absent and stdin is a terminal.
    #[arg(long, env = "DSV_PIN", global = true, hide_env_values = true)]
    pin: Option<String>,
    #[command(subcommand)]
    command: VaultCommand,
}

#[derive(Args, Debug)]
pub struct WaitArgs {
    /// Report tasks as soon as they are queued. The process still finishes
    /// them before exiting, since it owns the worker.
    #[arg(long)]
    no_wait: bool,
}

#[derive(Subcommand, Debug)]
pub enum VaultCommand {
    /// Create a new vault.
    Init {
        #[arg(long, default_value_t = KdfParams::default().t)]
        kdf_t: u32,
        #[arg(long, default_value_t = KdfParams::default().m_kib)]
        kdf_m: u32,
        #[arg(long, default_value_t = KdfParams::default().p)]
        kdf_p: u32,
    },
    /// Move files into the vault, encrypted.
    Lock {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        wait: WaitArgs,
    },
    /// Decrypt entries into the vault's open/ directory.
    Unlock {
        #[arg(required = true)]
        names: Vec<String>,
        #[command(flatten)]
        wait: WaitArgs,
    },
    /// Lock every unlocked entry.
    LockAll {
        #[command(flatten)]
        wait: WaitArgs,
    },
    /// Discard queued tasks. Each invocation owns its own queue, so this
    /// finds nothing to discard from another process.
    Cancel,
    /// List entries and their states.
    Status {
        #[arg(long)]
        json: bool,
    },
    /// Delete a locked entry for good.
    Destroy { name: String },
}

fn pin(args: &VaultArgs, confirm: bool) -> Result<String, Failure> {
    let pin = match &args.pin {
        Some(p) => p.clone(),
        None if std::io::stdin().is_terminal() => {
            let io = |e: std::io::Error| Failure::domain("Io", e.to_string());
            let p = rpassword::prompt_password("PIN: ").map_err(io)?;
            if confirm && rpassword::prompt_password("Repeat PIN: ").map_err(io)? != p {
                return Err(Failure::Usage("PINs do not match".into()));
            }
            p
        }
        None => return Err(Failure::Usage("no PIN: pass --pin or set DSV_PIN".into())),
    };
    validate_pin(&pin)?;
    Ok(pin)
}

fn direction(d: Direction) -> &'static str {
    match d {
        Direction::Lock => "lock",
        Direction::Unlock => "unlock",
    }
}

fn announce(tasks: &[QueuedTask]) {
    for t in tasks {
        println!("queued #{} {} {}", t.id, direction(t.direction), t.name);
    }
}

/// Waits for the queue to drain and reports every finished task. Any
/// failure makes the command fail with the first error.
fn finish(vault: Vault, tasks: &[QueuedTask], wait: &WaitArgs) -> Result<(), Failure> {
    if wait.no_wait {
        announce(tasks);
    }
    let mut first_error = None;
    for outcome in vault.close() {
        let t = &outcome.task;
        match outcome.result {
            Ok(()) => println!("{} {}: done", direction(t.direction), t.name),
            Err(e) => {
                println!("{} {}: {e}", direction(t.direction), t.name);
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), |e| Err(e.into()))
}

pub fn run(args: VaultArgs) -> Result<(), Failure> {
    let dir = args
        .dir
        .clone()
        .ok_or_else(|| Failure::Usage("no vault directory: pass --vault or set DSV_DIR".into()))?;
    if let VaultCommand::Init { kdf_t, kdf_m, kdf_p } = args.command {
        let pin = pin(&args, true)?;
        let kdf = KdfParams {
            t: kdf_t,
            m_kib: kdf_m,
            p: kdf_p,
        };
        Vault::init(&dir, &pin, kdf)?;
        println!("vault created at {}", dir.display());
        return Ok(());
    }
    let vault = Vault::open(&dir, &pin(&args, false)?)?;
    match &args.command {
        VaultCommand::Init { .. } => unreachable!("handled above"),
        VaultCommand::Lock { files, wait } => {
            let mut tasks = Vec::new();
            for f in files {
                tasks.push(vault.lock_file(f)?);
            }
            finish(vault, &tasks, wait)
        }
        VaultCommand::Unlock { names, wait } => {
            let mut tasks = Vec::new();
            for n in names {
                tasks.push(vault.unlock_file(n)?);
            }
            finish(vault, &tasks, wait)
        }
        VaultCommand::LockAll { wait } => {
            let n = vault.lock_all();
            let tasks = vault.pending();
            println!("{n} entr{} queued for locking", if n == 1 { "y" } else { "ies" });
            finish(vault, &tasks, wait)
        }
        VaultCommand::Cancel => {
            println!("{} pending task(s) discarded", vault.cancel());
            Ok(())
        }
        VaultCommand::Status { json } => {
            let status = vault.status();
            if *json {
                print_json(&status);
            } else {
                for row in &status.entries {
                    let state = row.state.map_or("Queued".to_string(), |s| format!("{s:?}"));
                    match row.pending {
                        Some(d) => println!("{}\t{state}\tpending {}", row.original_name, direction(d)),
                        None => println!("{}\t{state}", row.original_name),
                    }
                }
                println!(
                    "{} locked, {} unlocked, {} processing",
                    status.locked, status.unlocked, status.processing
                );
            }
            Ok(())
        }
        VaultCommand::Destroy { name } => {
            vault.destroy_entry(name)?;
            println!("destroyed {name}");
            Ok(())
        }
    }
}
