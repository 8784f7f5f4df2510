//! Build weighted flags, inspect their mass signatures and round-trip them through JSON.

use flagsim::random::LoopRecipe;
use flagsim::{
    component_masses, nesting_residual, resample_loop, DiscreteLoop, DiscreteTorusGrid, WeightedFlag,
    WeightedPointSet,
};

fn main() -> flagsim::Result<()> {
    // three weighted points riding on marked vertices of an ellipse
    let curve = DiscreteLoop::sample(2, 96, |t| vec![2.0 * t.cos(), t.sin()], |t| 1.0 + 0.3 * t.cos(), vec![])?;
    let marks = [0, 30, 61];
    let positions: Vec<Vec<f64>> = marks.iter().map(|&m| curve.vertex(m).to_vec()).collect();
    let points = WeightedPointSet::new(2, &positions, vec![1.0, 0.5, 2.0])?;
    let flag = WeightedFlag::points_in_loop(points, curve, 1e-12)?;
    println!("pointed ellipse: levels {:?}, nesting residual {}", flag.level_dimensions(), nesting_residual(&flag));
    println!("  mass signature {:?}", component_masses(&flag).levels);

    // refinement keeps marked vertices and per-arc masses
    let fine = resample_loop(flag.curve().expect("loop level"), 384)?;
    println!("  arc masses at 96: {:?}", flag.curve().expect("loop level").arc_masses());
    println!("  arc masses at 384: {:?}", fine.arc_masses());

    // JSON round trip is bit-exact
    let text = flag.to_json();
    assert_eq!(WeightedFlag::from_json(&text)?, flag);
    println!("  JSON: {} bytes, round trip exact", text.len());

    // meridian loops nested in a product torus of R^4
    let torus = DiscreteTorusGrid::product(1.0, 0.5, 24, 24, 1.0, vec![0, 12])?;
    let meridians = WeightedFlag::meridians_in_torus(vec![vec![1.0; 24], vec![3.0; 24]], torus)?;
    println!("meridians in torus: levels {:?}", meridians.level_dimensions());
    println!("  mass signature {:?}", component_masses(&meridians).levels);

    // seeded random pointed loops are reproducible at any resolution
    let recipe = LoopRecipe::random(42, 2, 3);
    let a = recipe.flag(64)?;
    assert_eq!(a, recipe.flag(64)?);
    println!("random pointed loop (seed 42): masses {:?}", component_masses(&a).levels);
    Ok(())
}
