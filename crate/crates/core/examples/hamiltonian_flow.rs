//! Transport a pointed loop by a Hamiltonian flow and report the drift of its invariants.

use flagsim::flow::{self, LinearField};
use flagsim::random::{gentle_hamiltonian, LoopRecipe};
use flagsim::{action_integral, flow_flag, Scheme};

fn main() -> flagsim::Result<()> {
    let flag = LoopRecipe::random(3, 2, 3).flag(256)?;
    let f = gentle_hamiltonian(3, 2);
    for scheme in [Scheme::Rk4, Scheme::Midpoint] {
        let (_, diag) = flow_flag(&flag, &f, 1.0, 1e-3, scheme)?;
        println!("{scheme:?}: {} steps", diag.steps);
        for d in &diag.drift {
            println!("  {:<18} {:>22.15} -> {:>22.15}  drift {:.2e}", d.name, d.initial, d.final_value, d.relative_drift);
        }
    }

    // a non-Hamiltonian scaling field changes the enclosed area by e^{2 rate}
    let field = LinearField::scaling(2, 1.1_f64.ln());
    let (scaled, _) = flow::transport(&flag, &field, 1.0, 1e-3, Scheme::Rk4, usize::MAX, |_, _, _| {})?;
    let ratio = action_integral(scaled.curve().expect("loop")) / action_integral(flag.curve().expect("loop"));
    println!("scaling control: area ratio {ratio:.12} (expected 1.21)");
    Ok(())
}
