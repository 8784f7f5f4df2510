//! Classify mass and period signatures up to their symmetry groups.

use flagsim::homology::{
    dihedral_canonicalize, hyperoct_canonicalize, same_orbit, sl2_equivalent, sl2_invariant, RationalPair, SymmetryGroup,
};
use flagsim::random::LoopRecipe;
use flagsim::{component_masses, MassSignature};

fn main() -> flagsim::Result<()> {
    // a necklace of arc masses and point weights, read up to rotation and reflection
    let gammas = [1.0, 2.0, 1.0, 3.0];
    let ws = [0.5, 0.5, 1.0, 1.0];
    let ((cg, cw), orbit) = dihedral_canonicalize(&gammas, &ws)?;
    println!("necklace {gammas:?} / {ws:?}: canonical {cg:?} / {cw:?}, orbit size {orbit}");

    // meridian pairs up to swaps within each pair and permutations of pairs
    let pairs = [(1.0, 2.0), (3.0, 3.0), (0.5, 0.25)];
    let (canon, orbit) = hyperoct_canonicalize(&pairs);
    println!("pairs {pairs:?}: canonical {canon:?}, orbit size {orbit}");

    // rational periods up to SL(2, Z): the invariant is the generator of the subgroup they span
    let a = RationalPair::from_integers(6, 10)?;
    let b = RationalPair::from_integers(2, 0)?;
    let (same, witness) = sl2_equivalent(&a, &b, 8);
    println!("gcd invariant {} vs {}: same orbit {same}, witness {witness:?}", sl2_invariant(&a), sl2_invariant(&b));

    // signatures computed from flags
    let flag = LoopRecipe::random(11, 2, 3).flag(128)?;
    let sig = component_masses(&flag);
    let mut rotated = sig.levels.clone();
    rotated.iter_mut().for_each(|l| l.rotate_left(1));
    let shifted = MassSignature::new(rotated);
    println!("flag signature vs rotated copy: same orbit {}", same_orbit(&sig, &shifted, SymmetryGroup::Dihedral)?);
    Ok(())
}
