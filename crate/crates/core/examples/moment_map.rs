//! Pair flags with test functions and separate flags that differ by a small weight change.

use flagsim::isodrast::ham_generator;
use flagsim::moment::{pair, pair_directional, separate};
use flagsim::scenario::load_flag;
use flagsim::TestFunction;
use std::path::Path;

fn main() -> flagsim::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let flag = load_flag(&data.join("pointed_loop.json"))?;
    let heavier = load_flag(&data.join("pointed_loop_heavier.json"))?;

    let one = TestFunction::constant(2, 1.0);
    let x = TestFunction::coordinate(2, 0);
    let r = TestFunction::rotation(2);
    println!("<J, 1> = {:.12} (total mass)", pair(&flag, &one)?);
    println!("<J, x> = {:.12}", pair(&flag, &x)?);
    println!("<J, |z|^2/2> = {:.12}", pair(&flag, &r)?);

    // derivative of <J, f> along the flow of g equals the Poisson pairing <J, {f, g}>
    let g = TestFunction::coordinate(2, 1);
    let tan = ham_generator(&flag, &g)?;
    println!("d/ds <J, x> along X_y = {:.9}", pair_directional(&flag, &tan, &x, 1e-5)?);

    match separate(&flag, &heavier, 4096)? {
        Some(s) => println!("separating bump at {:?}, width {:.4}, gap {:.3e}", s.center, s.width, s.gap),
        None => println!("no separating bump found"),
    }
    println!("self separation: {:?}", separate(&flag, &flag, 4096)?.map(|s| s.gap));
    Ok(())
}
