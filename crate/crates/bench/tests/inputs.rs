//! The benchmark inputs build and give sane results.

use ust_core::collision::DEFAULT_EXACT_CAP;
use ust_core::wilson::sample_ball_tree;
use ust_core::{exact_moments, intrinsic_ball, loop_erase, resistance_tree, srw_until, LatticePoint, RngStream, WilsonConfig};

#[test]
fn walk_input_erases_to_a_simple_path() {
    let mut rng = RngStream::new(1, 16);
    let walk = srw_until(LatticePoint::ORIGIN, |p| p.norm_sq() >= 256, &mut rng, u64::MAX).unwrap();
    let path = loop_erase(&walk);
    assert!(path.is_simple());
    assert_eq!(path.last(), walk.last());
}

#[test]
fn ball_input_has_finite_moments() {
    let r = 25;
    let tree = sample_ball_tree(&WilsonConfig::default(), r, RngStream::new(3, 0)).unwrap();
    let region = intrinsic_ball(&tree, LatticePoint::ORIGIN, r).unwrap().region;
    assert!(resistance_tree(&region, 0) <= (r + 1) as f64);
    assert!(exact_moments(&region, DEFAULT_EXACT_CAP).unwrap().ez >= 1.0);
}
