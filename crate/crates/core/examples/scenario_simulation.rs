//! Run a shipped scenario file and summarize its trajectory and diagnostics.

use flagsim::scenario::{simulate, Scenario};
use std::path::Path;

fn main() -> flagsim::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    for name in ["scenario_pointed_loop.json", "scenario_torus.json"] {
        let sc = Scenario::load(&data.join(name))?;
        let flag = sc.build_flag()?;
        let run = simulate(&flag, &sc.hamiltonian, sc.t, sc.dt, sc.scheme, sc.record_every)?;
        let rows = run.trajectory_csv.lines().count() - 1;
        println!("{name}: {:?}, {} steps, {rows} trajectory rows", sc.scheme, run.diagnostics.steps);
        println!("  final nesting residual {:.2e}", run.diagnostics.final_nesting_residual);
        let worst = run.diagnostics.drift.iter().max_by(|a, b| a.relative_drift.total_cmp(&b.relative_drift));
        if let Some(d) = worst {
            println!("  largest drift: {} {:.3e}", d.name, d.relative_drift);
        }
        // reruns are bit-identical
        let again = simulate(&flag, &sc.hamiltonian, sc.t, sc.dt, sc.scheme, sc.record_every)?;
        assert_eq!(again.trajectory_csv, run.trajectory_csv);
    }
    Ok(())
}
