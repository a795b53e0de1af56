//! Runs the 17 acceptance criteria and prints one PASS/FAIL line for each,
//! followed by its checks (computed, expected, tolerance).
//!
//! Criteria marked as known failures print FAIL with the reason but do not
//! fail the run; set OCONNELL_ACCEPTANCE_STRICT=1 to fail on them too.
//! Criterion 17 is additionally checked across processes by running the
//! binary under OCONNELL_THREADS=1, 4 and 8.

use oconnell::verify::{criteria, Check};
use std::process::{Command, ExitCode};

const STRICT_ENV: &str = "OCONNELL_ACCEPTANCE_STRICT";

fn across_processes() -> Check {
    let args = [
        "simulate", "fk", "--n", "2", "--t", "1", "--x", "0,2", "--paths", "100000", "--dt", "0.001", "--seed", "42",
    ];
    let outputs: Vec<Vec<u8>> = ["1", "4", "8"]
        .iter()
        .map(|threads| {
            let out = Command::new(env!("CARGO_BIN_EXE_oconnell"))
                .args(args)
                .env("OCONNELL_THREADS", threads)
                .output()
                .expect("binary runs");
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            out.stdout
        })
        .collect();
    let same = outputs.windows(2).all(|p| p[0] == p[1]);
    Check::flag("binary output identical under OCONNELL_THREADS=1/4/8", same)
}

fn main() -> ExitCode {
    let strict = std::env::var(STRICT_ENV).is_ok_and(|v| v == "1");
    let mut unexpected = Vec::new();
    let mut known = Vec::new();
    for c in criteria() {
        let mut r = c.run();
        if c.id == 17 {
            let extra = across_processes();
            r.passed &= extra.passed;
            r.checks.push(extra);
        }
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2} {} ({:.1} s)", r.id, r.title, r.wall_time_s);
        for k in &r.checks {
            println!(
                "       {} {}: computed {:.10e}, expected {:.10e}, tolerance {:.3e}",
                if k.passed { "ok  " } else { "FAIL" },
                k.name,
                k.computed,
                k.expected,
                k.tolerance
            );
        }
        if !r.passed {
            match c.known_failure {
                Some(why) => {
                    println!("       known failure: {why}");
                    known.push(r.id);
                }
                None => unexpected.push(r.id),
            }
        }
    }
    println!("known failures: {known:?}; unexpected failures: {unexpected:?}");
    if !unexpected.is_empty() || (strict && !known.is_empty()) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
