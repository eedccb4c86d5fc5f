use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hcsp::job::{exit, run, Job};

#[derive(Parser)]
#[command(name = "hcsp", version, about = "Specification generation and synchronization for HCSP processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification job and write its report.
    Verify {
        job: PathBuf,
        /// Output directory for report.txt, obligations/, index.json and stats.json.
        #[arg(long, default_value = "hcsp-out")]
        out: PathBuf,
        /// Number of oracle runs.
        #[arg(long)]
        oracle: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// SMT-LIB solver command, e.g. "z3 -smt2".
        #[arg(long)]
        smt: Option<String>,
        /// Loop iterations per process in oracle runs.
        #[arg(long)]
        unroll: Option<usize>,
    },
}

fn main() -> ExitCode {
    let Cmd::Verify { job, out, oracle, seed, smt, unroll } = Cli::parse().cmd;
    let text = match std::fs::read_to_string(&job) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", job.display());
            return ExitCode::from(exit::ERROR as u8);
        }
    };
    let mut j = match Job::from_json(&text) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {}: {e}", job.display());
            return ExitCode::from(exit::ERROR as u8);
        }
    };
    if let Some(n) = oracle {
        j.options.oracle = n;
    }
    if let Some(s) = seed {
        j.options.seed = s;
    }
    if smt.is_some() {
        j.options.smt = smt;
    }
    if let Some(k) = unroll {
        j.options.unroll = k;
    }
    let report = match run(&j) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::ERROR as u8);
        }
    };
    if let Err(e) = report.write(&out) {
        eprintln!("error: writing {}: {e}", out.display());
        return ExitCode::from(exit::ERROR as u8);
    }
    print!("{}", report.text());
    ExitCode::from(report.exit_code() as u8)
}
