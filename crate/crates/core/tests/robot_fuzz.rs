mod support;

use gestibot_core::geometry::translation_increment;
use gestibot_core::robot::{Command, Reply, RobotSim};
use gestibot_core::Vec3;
use proptest::prelude::*;
use support::fuzz::fuzz;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn invariants_hold_under_random_interleavings(seed in any::<u64>()) {
        let r = fuzz(seed, 2000);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}

#[test]
fn the_fuzzer_exercises_motion() {
    assert!(fuzz(3, 5000).unwrap() > 100);
}

#[test]
fn boundary_move_ends_at_the_backed_off_point() {
    let mut sim = RobotSim::with_defaults();
    let w = *sim.workspace();
    let inc = translation_increment(&sim.pose(), Vec3::new(1.0, 0.0, 0.0), &w).unwrap();
    assert_eq!(sim.apply(&Command::imov(inc.scaled(w.backoff()))), Reply::Ok);
    for _ in 0..1000 {
        sim.tick(0.01);
    }
    assert!(!sim.state().moving());
    assert!((sim.pose().position.x - 1000.0 - 999.0).abs() < 1e-9);
}
