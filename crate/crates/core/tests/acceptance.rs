//! Acceptance criteria 1-10. Prints one line per criterion and exits non-zero
//! if any fails.

use std::process::ExitCode;

use munsc_core::validation::run_all;

fn main() -> ExitCode {
    // libtest flags such as --list or name filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let outcomes = run_all();
    println!();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("\nacceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
