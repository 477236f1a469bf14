//! Manifest-driven batch runner and the builtin gallery.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on errors
//! (including manifest schema errors).

pub mod gallery;
pub mod manifest;
pub mod report;
pub mod run;
pub mod spec;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

pub use manifest::Manifest;
pub use report::{Check, Report};
pub use run::{run_manifest, RunOptions, RunOutput};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "confpair", about = "Conformal and isometric pairs of submanifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a manifest.
    Analyze {
        manifest: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Builtin immersions and example manifests.
    Gallery {
        #[command(subcommand)]
        command: GalleryCommand,
    },
}

#[derive(Debug, Subcommand)]
enum GalleryCommand {
    /// Print the catalog of builtin immersions and the example manifests.
    List,
    /// Run an example manifest by name.
    Run {
        name: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Print an example manifest as JSON.
    Show { name: String },
}

#[derive(Debug, Args)]
struct Flags {
    /// Override the manifest tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Override the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-point rows as CSV.
    #[arg(long)]
    csv_dump: Option<PathBuf>,
    /// Restrict region summaries and CSV rows to one region.
    #[arg(long)]
    region: Option<usize>,
    /// Write the report here instead of the manifest's output path or stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Exit code for a finished report.
pub fn exit_code(report: &Report) -> i32 {
    if report.pass {
        0
    } else {
        2
    }
}

fn execute(m: &Manifest, bytes: &[u8], flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    let opts = RunOptions {
        tolerance: flags.tolerance,
        seed: flags.seed,
        region: flags.region,
    };
    let RunOutput { report, table } = run_manifest(m, bytes, &opts)?;
    let json = report.to_json();
    match flags.report.as_ref().or(m.outputs.report.as_ref()) {
        Some(path) => {
            fs::write(path, &json)?;
            writeln!(out, "report written to {}", path.display())?;
        }
        None => out.write_all(json.as_bytes())?,
    }
    if let Some(path) = flags.csv_dump.as_ref().or(m.outputs.csv.as_ref()) {
        fs::write(path, table.to_csv())?;
    }
    for c in report.failed_checks() {
        eprintln!("check failed: {} = {:e} (threshold {:e})", c.name, c.value, c.threshold);
    }
    Ok(exit_code(&report))
}

fn list(out: &mut dyn Write) -> Result<()> {
    writeln!(out, "immersions:")?;
    for e in gallery::catalog() {
        let params: Vec<String> = e.params.iter().map(|(p, r)| format!("{p}: {r}")).collect();
        let kind = if e.wrapper { "wrapper" } else { "immersion" };
        writeln!(out, "  {:<18} {:<9} {}", e.name, kind, e.description)?;
        if !params.is_empty() {
            writeln!(out, "  {:<18} {:<9} [{}]", "", "", params.join("; "))?;
        }
    }
    writeln!(out, "manifests:")?;
    for m in gallery::manifests() {
        writeln!(out, "  {:<18} {}", m.name.as_deref().unwrap_or(""), m.kind())?;
    }
    Ok(())
}

/// Canonical bytes of a gallery manifest (what its provenance hash covers).
pub fn canonical_bytes(m: &Manifest) -> Vec<u8> {
    serde_json::to_vec_pretty(m).expect("manifest serializes")
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Analyze { manifest, flags } => {
            let bytes = fs::read(&manifest)?;
            let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Manifest {
                field: "file".into(),
                message: e.to_string(),
            })?;
            let m = Manifest::from_json(&text)?;
            execute(&m, &bytes, &flags, out)
        }
        Command::Gallery { command } => match command {
            GalleryCommand::List => {
                list(out)?;
                Ok(0)
            }
            GalleryCommand::Run { name, flags } => {
                let m = gallery::find(&name).ok_or_else(|| Error::InvalidInput(format!("no gallery manifest named `{name}`")))?;
                execute(&m, &canonical_bytes(&m), &flags, out)
            }
            GalleryCommand::Show { name } => {
                let m = gallery::find(&name).ok_or_else(|| Error::InvalidInput(format!("no gallery manifest named `{name}`")))?;
                out.write_all(&canonical_bytes(&m))?;
                writeln!(out)?;
                Ok(0)
            }
        },
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    static VERSION: OnceLock<String> = OnceLock::new();
    let cmd = Cli::command().version(VERSION.get_or_init(report::version_string).as_str());
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
