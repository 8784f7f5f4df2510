//! Serialization round trips for every file format.

use flagsim::homology::{RationalSignature, Signature};
use flagsim::random::{gentle_hamiltonian, LoopRecipe};
use flagsim::scenario::{DensityDoc, Scenario};
use flagsim::{build_flag, DiscreteLoop, DiscreteTorusGrid, FlagDoc, MassSignature, TestFunction, WeightedFlag, WeightedPointSet};
use num_rational::Ratio;
use proptest::prelude::*;

fn assert_roundtrip(flag: &WeightedFlag) {
    let text = flag.to_json();
    let back = WeightedFlag::from_json(&text).unwrap();
    assert_eq!(&back, flag);
    assert_eq!(back.to_json(), text);
    assert_eq!(build_flag(&FlagDoc::from_json(&text).unwrap()).unwrap(), *flag);
}

#[test]
fn every_flag_shape_roundtrips() {
    let pts = WeightedPointSet::new(2, &[vec![0.1, 0.2], vec![-1.0, 3.5]], vec![1.0, 2.5]).unwrap();
    assert_roundtrip(&WeightedFlag::points(pts));
    let circle = DiscreteLoop::circle(4, 32, 1.3, |t| 1.0 + 0.2 * t.sin(), vec![0, 9]).unwrap();
    assert_roundtrip(&WeightedFlag::single_loop(circle));
    assert_roundtrip(&LoopRecipe::random(3, 2, 3).flag(64).unwrap());
    assert_roundtrip(&LoopRecipe::random(4, 4, 2).flag(48).unwrap());
    let torus = DiscreteTorusGrid::product(1.0, 0.5, 8, 12, 0.7, vec![]).unwrap();
    assert_roundtrip(&WeightedFlag::torus(torus));
    let torus = DiscreteTorusGrid::product(1.0, 0.5, 8, 12, 0.7, vec![2, 7]).unwrap();
    assert_roundtrip(&WeightedFlag::meridians_in_torus(vec![vec![1.0; 8], vec![3.0; 8]], torus).unwrap());
}

#[test]
fn signatures_roundtrip_exactly() {
    let float = Signature::Float(MassSignature::new(vec![vec![0.1, 1.0 / 3.0], vec![2.0]]));
    assert_eq!(Signature::from_json(&float.to_json()).unwrap(), float);
    let exact = Signature::Rational(RationalSignature {
        levels: vec![vec![Ratio::new(2, 3), Ratio::from_integer(-4)], vec![Ratio::new(7, 11)]],
    });
    let text = exact.to_json();
    assert!(text.contains("\"2/3\""));
    assert_eq!(Signature::from_json(&text).unwrap(), exact);
    assert!(Signature::from_json(r#"{"levels": [["1/0"]], "rational": true}"#).is_err());
    assert!(Signature::from_json(r#"{"levels": [[0.5]], "rational": true}"#).is_err());
}

#[test]
fn test_functions_and_scenarios_roundtrip() {
    let f = gentle_hamiltonian(5, 4).with_bump(vec![0.0; 4], 0.3, -1.0);
    let text = serde_json::to_string(&f).unwrap();
    assert_eq!(serde_json::from_str::<TestFunction>(&text).unwrap(), f);

    let flag = LoopRecipe::random(1, 2, 2).flag(32).unwrap();
    let planar = serde_json::to_string(&gentle_hamiltonian(5, 2)).unwrap();
    let sc = Scenario::from_json(&format!(r#"{{"flag": {}, "hamiltonian": {planar}, "dt": 0.002}}"#, flag.to_json())).unwrap();
    assert_eq!((sc.t, sc.dt, sc.record_every), (1.0, 0.002, 0));
    assert_eq!(sc.build_flag().unwrap(), flag);
    // a 4-d function on a planar flag is rejected when the flag is built
    let sc = Scenario::from_json(&format!(r#"{{"flag": {}, "hamiltonian": {text}}}"#, flag.to_json())).unwrap();
    assert!(sc.build_flag().is_err());
    assert!(Scenario::from_json(r#"{"flag": "f.json", "hamiltonian": {"poly": [], "bumps": []}, "typo": 1}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_point_flags_roundtrip_bit_exactly(
        coords in prop::collection::vec(-1e6f64..1e6, 2..40),
        weight in 1e-9f64..1e9,
    ) {
        let n = coords.len() / 2;
        let positions: Vec<Vec<f64>> = coords.chunks(2).take(n).map(<[f64]>::to_vec).collect();
        let weights: Vec<f64> = (0..n).map(|i| weight * (1.0 + i as f64 / 7.0)).collect();
        let flag = WeightedFlag::points(WeightedPointSet::new(2, &positions, weights).unwrap());
        let back = WeightedFlag::from_json(&flag.to_json()).unwrap();
        prop_assert_eq!(back, flag);
    }

    #[test]
    fn densities_roundtrip_bit_exactly(values in prop::collection::vec(1e-6f64..1e3, 8..64)) {
        let doc = DensityDoc::new(values, vec![0]);
        prop_assert_eq!(DensityDoc::from_json(&doc.to_json()).unwrap(), doc);
    }
}
