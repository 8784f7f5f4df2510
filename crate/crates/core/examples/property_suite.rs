//! Run the property suite on a few seeds and print the per-criterion summary.

use flagsim::suite::{run, CheckConfig, Suite};

fn main() -> flagsim::Result<()> {
    let cfg = CheckConfig { seeds: Some((0..4).collect()), ..CheckConfig::default() };
    for suite in [Suite::Homology, Suite::Transport, Suite::Criterion(8)] {
        let report = run(suite, &cfg)?;
        for line in report.summary_lines() {
            println!("{line}");
        }
    }
    Ok(())
}
