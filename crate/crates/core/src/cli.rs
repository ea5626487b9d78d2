//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid or malformed input (including a trace
//! that does not reproduce its report), 2 I/O failure or bad usage.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::engine::run;
use crate::report::RunReport;
use crate::scenario::{Scenario, ValidationError};
use crate::trace::{self, TraceRecord};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ndmlnr", version, about = "Stability-gated multipath routing simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and run a scenario file.
    Run {
        scenario: PathBuf,
        /// Trace output (JSON lines); standard output when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Run report output (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the bundled nine-node example and print a summary.
    Example,
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Check that a report is exactly recomputable from a trace.
    Verify { trace: PathBuf, report: PathBuf },
}

pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            trace,
            report,
            seed,
        } => cmd_run(&scenario, trace.as_deref(), report.as_deref(), seed),
        Command::Example => {
            print!("{}", example_summary());
            EXIT_OK
        }
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Verify { trace, report } => cmd_verify(&trace, &report),
    }
}

enum LoadError {
    Io(String),
    Invalid(Vec<ValidationError>),
}

fn load(path: &Path) -> Result<Scenario, LoadError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LoadError::Io(format!("cannot read {}: {e}", path.display())))?;
    let scenario = Scenario::from_json(&text).map_err(|e| LoadError::Invalid(vec![e]))?;
    scenario.validate().map_err(LoadError::Invalid)?;
    Ok(scenario)
}

fn report_load_error(path: &Path, e: LoadError) -> u8 {
    match e {
        LoadError::Io(msg) => {
            eprintln!("error: {msg}");
            EXIT_IO
        }
        LoadError::Invalid(errors) => {
            eprintln!("error: {} is invalid ({} problems)", path.display(), errors.len());
            for e in errors {
                eprintln!("  - {e}");
            }
            EXIT_INVALID
        }
    }
}

pub fn cmd_run(path: &Path, trace_out: Option<&Path>, report_out: Option<&Path>, seed: Option<u64>) -> u8 {
    let mut scenario = match load(path) {
        Ok(s) => s,
        Err(e) => return report_load_error(path, e),
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let output = match run(&scenario) {
        Ok(o) => o,
        Err(errors) => return report_load_error(path, LoadError::Invalid(errors)),
    };
    let text = output.trace_text();
    let written = match trace_out {
        Some(p) => fs::write(p, &text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write trace: {e}")),
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return EXIT_IO;
    }
    if let Some(p) = report_out {
        let json = serde_json::to_string_pretty(&output.report).expect("report serializes");
        if let Err(e) = fs::write(p, json + "\n") {
            eprintln!("error: cannot write {}: {e}", p.display());
            return EXIT_IO;
        }
    }
    EXIT_OK
}

pub fn cmd_validate(path: &Path) -> u8 {
    match load(path) {
        Ok(_) => {
            println!("OK");
            EXIT_OK
        }
        Err(e) => report_load_error(path, e),
    }
}

pub fn cmd_verify(trace_path: &Path, report_path: &Path) -> u8 {
    let (trace_text, report_text) = match (fs::read_to_string(trace_path), fs::read_to_string(report_path)) {
        (Ok(t), Ok(r)) => (t, r),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    let records = match trace::parse(&trace_text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let stored: RunReport = match serde_json::from_str(&report_text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: malformed report: {e}");
            return EXIT_INVALID;
        }
    };
    if RunReport::from_trace(&records) == stored {
        println!("OK");
        EXIT_OK
    } else {
        eprintln!("error: report does not match the trace");
        EXIT_INVALID
    }
}

fn events<'a>(trace: &'a [TraceRecord], event: &'a str) -> impl Iterator<Item = &'a TraceRecord> + 'a {
    trace.iter().filter(move |r| r.event == event)
}

/// Human-readable walkthrough of the bundled example run.
pub fn example_summary() -> String {
    let scenario = Scenario::figure4();
    let out = run(&scenario).expect("bundled scenario is valid");
    let p = &scenario.protocol;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} nodes, LSD threshold {}, wait {} s, destination window {} s",
        scenario.nodes.len(),
        p.lsd_threshold,
        p.wait_period,
        p.dest_window()
    );

    let _ = writeln!(s, "\nNIT selections:");
    for sel in events(&out.trace, "NIT_SELECT") {
        let node = sel.node.expect("NIT_SELECT has a node");
        let d = &sel.detail;
        let entries: Vec<String> = events(&out.trace, "RREQ_RECV")
            .filter(|r| r.node == Some(node) && r.time <= sel.time)
            .map(|r| {
                format!(
                    "(from {} hops={} LSD={} bw={})",
                    r.detail.i64("from").unwrap_or(-1),
                    r.detail.i64("hops").unwrap_or(-1),
                    r.detail.f64("lsd").unwrap_or(f64::NAN),
                    r.detail.f64("bw").unwrap_or(f64::NAN)
                )
            })
            .collect();
        let _ = writeln!(
            s,
            "  t={:.0} node {}: picked from {} LSD={} hops={} bw={} among {}",
            sel.time,
            node,
            d.i64("from").unwrap_or(-1),
            d.f64("lsd").unwrap_or(f64::NAN),
            d.i64("hops").unwrap_or(-1),
            d.f64("bw").unwrap_or(f64::NAN),
            entries.join(" ")
        );
    }

    let _ = writeln!(s, "\nCandidates at the destination:");
    for c in events(&out.trace, "CANDIDATE") {
        let _ = writeln!(
            s,
            "  {} bw={}",
            c.detail.str("path").unwrap_or("?"),
            c.detail.f64("bw").unwrap_or(f64::NAN)
        );
    }
    let _ = writeln!(s, "\nSelection:");
    for a in events(&out.trace, "ROUTE_ACCEPT") {
        let _ = writeln!(
            s,
            "  accepted {} bw={} ({})",
            a.detail.str("path").unwrap_or("?"),
            a.detail.f64("bw").unwrap_or(f64::NAN),
            a.detail.str("status").unwrap_or("?")
        );
    }
    for r in events(&out.trace, "ROUTE_REJECT") {
        let _ = writeln!(
            s,
            "  rejected {} bw={} (shares node {})",
            r.detail.str("path").unwrap_or("?"),
            r.detail.f64("bw").unwrap_or(f64::NAN),
            r.detail.i64("shared").unwrap_or(-1)
        );
    }
    let _ = writeln!(s, "\nInstalled at the source:");
    for i in events(&out.trace, "ROUTE_INSTALL") {
        let _ = writeln!(
            s,
            "  t={:.0} {} bw={} {}",
            i.time,
            i.detail.str("path").unwrap_or("?"),
            i.detail.f64("bw").unwrap_or(f64::NAN),
            i.detail.str("status").unwrap_or("?")
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_mentions_the_outcome() {
        let s = example_summary();
        assert!(s.contains("1-2-3-6 bw=17"), "{s}");
        assert!(s.contains("1-4-8-9-6 bw=28"), "{s}");
        assert!(s.contains("rejected 1-4-5-6 bw=19 (shares node 4)"), "{s}");
        assert!(s.contains("node 4: picked from 1 LSD=20"), "{s}");
    }

    #[test]
    fn usage_errors() {
        assert_eq!(main_with(["ndmlnr"]), EXIT_IO);
        assert_eq!(main_with(["ndmlnr", "bogus"]), EXIT_IO);
        assert_eq!(main_with(["ndmlnr", "--help"]), EXIT_OK);
    }
}
