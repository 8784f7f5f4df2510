//! Build the mark-fixing circle map that pushes one density onto another.

use flagsim::moser::{self, arc_masses, moser_map_circle, push_density};
use flagsim::scenario::DensityDoc;
use std::path::Path;

fn main() -> flagsim::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let mu = DensityDoc::load(&data.join("mu.json"))?;
    let nu = DensityDoc::load(&data.join("nu.json"))?;
    println!("arc masses: source {:?}", arc_masses(&mu.values, &mu.marked));
    println!("            target {:?}", arc_masses(&nu.values, &nu.marked));

    let map = moser_map_circle(&mu.values, &nu.values, &mu.marked, moser::DEFAULT_TOL)?;
    map.check_monotone()?;
    let pushed = push_density(&map, &mu.values)?;
    let err = pushed.iter().zip(&nu.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    println!("map fixes marks {:?}, max pushforward error {err:.3e}", map.fixed());

    // the linear path between the densities keeps every arc mass
    for t in [0.25, 0.5, 0.75] {
        let path = moser::interpolation_path(&mu.values, &nu.values, &mu.marked, t)?;
        println!("t = {t}: arc masses {:?}", arc_masses(&path, &mu.marked));
    }

    // unequal arc masses have no mark-fixing transport
    let unequal = DensityDoc::load(&data.join("nu_unequal.json"))?;
    match moser_map_circle(&mu.values, &unequal.values, &mu.marked, moser::DEFAULT_TOL) {
        Ok(_) => println!("unexpected: unequal masses accepted"),
        Err(e) => println!("unequal masses rejected: {e}"),
    }
    Ok(())
}
