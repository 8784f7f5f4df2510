//! Leafwise symplectic form on isodrastic tangents and its reparametrization kernel.

use flagsim::isodrast::{
    generator, ham_generator, isodrast_defect, kernel_residual, moment_identity_residual, omega_leafwise,
    pairing_residual, random_tangent, reparametrization_tangent,
};
use flagsim::random::{gentle_hamiltonian, LoopRecipe, SpeedRecipe};

fn main() -> flagsim::Result<()> {
    let recipe = LoopRecipe::random(5, 2, 3);
    let flag = recipe.flag(256)?;

    let f = gentle_hamiltonian(5, 2);
    let xi = ham_generator(&flag, &f)?;
    let eta = random_tangent(&flag, 1)?;
    println!("isodrast defect of a random tangent: {:.2e}", isodrast_defect(&flag, &eta)?);
    println!("omega(X_f, eta) = {:.9}", omega_leafwise(&flag, &xi, &eta)?);
    println!("moment identity residual: {:.3e}", moment_identity_residual(&flag, &f, &eta, 1e-5)?);

    // reparametrizations fixing the marks pair to zero up to O(h^2)
    let speed = SpeedRecipe::random(5, &recipe.slots);
    let mut last = None;
    for n in [64, 128, 256, 512] {
        let r = kernel_residual(&recipe.flag(n)?, &speed.sample(n)?, 5, 0)?;
        let ratio = last.map_or(String::new(), |p: f64| format!(", ratio {:.3}", p / r));
        println!("kernel residual at {n:>3}: {r:.3e}{ratio}");
        last = Some(r);
    }

    // a constant speed moves the marks, so it is not a generator and pairs nontrivially
    let ones = vec![1.0; 256];
    println!("constant speed accepted as generator: {}", generator(&flag, &ones).is_ok());
    let slide = reparametrization_tangent(&flag, &ones)?;
    println!("pairing residual of the sliding tangent: {:.3e}", pairing_residual(&flag, &slide, 5, 0)?);
    Ok(())
}
