//! Symplectic form, Hamiltonian fields and action integrals on loops and tori.

use flagsim::symplectic::{isotropy_residual, meridian_action_pair};
use flagsim::{action_integral, hamiltonian_vf, omega_eval, DiscreteLoop, DiscreteTorusGrid, TestFunction};

fn main() -> flagsim::Result<()> {
    let e1 = [1.0, 0.0, 0.0, 0.0];
    let f1 = [0.0, 1.0, 0.0, 0.0];
    let e2 = [0.0, 0.0, 1.0, 0.0];
    println!("omega(e1, f1) = {}, omega(f1, e1) = {}, omega(e1, e2) = {}", omega_eval(&e1, &f1)?, omega_eval(&f1, &e1)?, omega_eval(&e1, &e2)?);

    // X_f for f = (x^2 + y^2) / 2 rotates clockwise
    let f = TestFunction::rotation(2);
    println!("X_f at (1, 0) = {:?}", hamiltonian_vf(&f, &[1.0, 0.0])?);

    // the enclosed area converges to pi r^2 at second order
    for n in [32, 64, 128, 256] {
        let c = DiscreteLoop::circle(2, n, 1.5, |_| 1.0, vec![])?;
        let err = (action_integral(&c) - std::f64::consts::PI * 2.25).abs();
        println!("circle r = 1.5 at {n:>3} vertices: area error {err:.3e}");
    }

    // a product torus is Lagrangian and its meridians carry actions pi r1^2, pi r2^2
    let torus = DiscreteTorusGrid::product(1.0, 0.5, 32, 32, 1.0, vec![])?;
    let (a1, a2) = meridian_action_pair(&torus);
    println!("product torus: isotropy residual {:.2e}, meridian actions ({a1:.6}, {a2:.6})", isotropy_residual(&torus));
    Ok(())
}
