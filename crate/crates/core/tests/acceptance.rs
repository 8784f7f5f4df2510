//! Acceptance criteria 1 to 9 at their default sizes; one PASS/FAIL line each.
//! Runs without the libtest harness so the lines always reach the console.

use flagsim::suite::{run_criterion, CheckConfig, CRITERIA};

fn main() {
    let cfg = CheckConfig::default();
    let mut failed = vec![];
    for (id, _) in CRITERIA {
        let report = run_criterion(id, &cfg);
        println!("{}", report.summary_line());
        for f in &report.failures {
            println!("    {f}");
        }
        if !report.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", CRITERIA.len());
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
