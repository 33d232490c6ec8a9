use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use morphvault::apkzip::{align_archive, check_alignment, DEFAULT_ALIGNMENT};
use morphvault::axml::LabelMode;
use morphvault::morph::{apply_morph, inspect, Label, MorphReport, MorphSpec, ALL_DENSITIES};
use morphvault::signer::{verify_v1, SigningMaterial};

use crate::{print_json, read_file, write_file, Failure};

const DENSITIES: &[&str] = &["ldpi", "mdpi", "hdpi", "xhdpi", "xxhdpi", "xxxhdpi", ALL_DENSITIES];

#[derive(Subcommand, Debug)]
pub enum MorphCommand {
    /// Show package name, label, icon files, signature and alignment.
    Inspect {
        apk: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a renamed and/or re-iconed, aligned and signed copy.
    Apply(ApplyArgs),
    /// Check the v1 signature.
    Verify {
        apk: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a copy whose stored entries start on 4-byte boundaries.
    Align {
        apk: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LabelModeArg {
    Inplace,
    Rebuild,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ApplyArgs {
    apk: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// New application label.
    #[arg(long)]
    name: Option<String>,
    /// Image used for every density.
    #[arg(long, conflicts_with = "icon_density")]
    icon: Option<PathBuf>,
    /// Image for one density, as DENSITY=FILE. Repeatable.
    #[arg(long, value_name = "DENSITY=FILE", value_parser = parse_density_icon)]
    icon_density: Vec<(String, PathBuf)>,
    #[arg(long, value_enum, default_value = "rebuild")]
    label_mode: LabelModeArg,
    /// PEM private key (PKCS#8 or PKCS#1). Defaults to the bundled test key.
    #[arg(long, requires = "cert")]
    key: Option<PathBuf>,
    /// PEM certificate matching --key.
    #[arg(long, requires = "key")]
    cert: Option<PathBuf>,
}

fn parse_density_icon(s: &str) -> Result<(String, PathBuf), String> {
    let (d, f) = s.split_once('=').ok_or("expected DENSITY=FILE")?;
    if !DENSITIES.contains(&d) {
        return Err(format!("unknown density {d:?}; expected one of {}", DENSITIES.join(", ")));
    }
    Ok((d.to_owned(), PathBuf::from(f)))
}

fn print_report(r: &MorphReport) {
    println!("package: {}", r.package_name);
    match &r.label {
        Label::Text { value } => println!("label: {value}"),
        Label::Reference { id, resolved } => {
            println!("label: @{id:08x} ({})", resolved.as_deref().unwrap_or("unresolved"))
        }
        Label::Missing => println!("label: (none)"),
    }
    match r.icon_resource_id {
        Some(id) => println!("icon: @{id:08x}"),
        None => println!("icon: (no resource)"),
    }
    for p in &r.icon_paths {
        println!("  {} {}", p.density, p.path);
    }
    println!("signed: {}", if r.signed { "yes" } else { "no" });
    println!("aligned: {}", if r.aligned { "yes" } else { "no" });
}

pub fn run(cmd: MorphCommand) -> Result<(), Failure> {
    match cmd {
        MorphCommand::Inspect { apk, json } => {
            let report = inspect(&read_file(&apk)?)?;
            if json {
                print_json(&report);
            } else {
                print_report(&report);
            }
            Ok(())
        }
        MorphCommand::Apply(args) => apply(args),
        MorphCommand::Verify { apk, json } => {
            let report = verify_v1(&read_file(&apk)?)?;
            if json {
                print_json(&report);
            } else {
                for f in &report.failures {
                    println!("{}: {}", f.entry, f.reason);
                }
                if report.ok {
                    println!("verified, signer {}", report.signer.as_deref().unwrap_or("?"));
                }
            }
            if report.ok {
                Ok(())
            } else {
                Err(Failure::domain(
                    "VerificationFailed",
                    format!("{} problem(s) found", report.failures.len()),
                ))
            }
        }
        MorphCommand::Align { apk, output } => {
            let bytes = read_file(&apk)?;
            let before = check_alignment(&bytes, DEFAULT_ALIGNMENT)?;
            for (path, offset) in &before.violations {
                println!("{offset} {path} (misaligned)");
            }
            let aligned = align_archive(&bytes, DEFAULT_ALIGNMENT)?;
            let after = check_alignment(&aligned, DEFAULT_ALIGNMENT)?;
            write_file(&output, &aligned)?;
            println!("{} violation(s) after alignment", after.violations.len());
            Ok(())
        }
    }
}

fn apply(args: ApplyArgs) -> Result<(), Failure> {
    let apk = read_file(&args.apk)?;
    let mut icons = BTreeMap::new();
    if let Some(path) = &args.icon {
        icons.insert(ALL_DENSITIES.to_owned(), read_file(path)?);
    }
    for (density, path) in &args.icon_density {
        icons.insert(density.clone(), read_file(path)?);
    }
    let spec = MorphSpec {
        new_name: args.name,
        icons,
        label_mode: match args.label_mode {
            LabelModeArg::Inplace => LabelMode::InPlace,
            LabelModeArg::Rebuild => LabelMode::Rebuild,
        },
    };
    let material = match (&args.key, &args.cert) {
        (Some(k), Some(c)) => SigningMaterial::from_files(k, c)?,
        _ => SigningMaterial::test_key(),
    };
    let out = apply_morph(&apk, &spec, &material)?;
    write_file(&args.output, &out)?;
    println!("wrote {}", args.output.display());
    Ok(())
}
