use gestibot_core::geometry::{translation_increment, Axis};
use gestibot_core::robot::{Command, Reply, RobotSim};
use gestibot_core::{Pose, PoseIncrement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_command(rng: &mut ChaCha8Rng, pose: &Pose, sim: &RobotSim) -> Command {
    let w = sim.workspace();
    match rng.random_range(0..10) {
        0 => Command::Stop { reason: None },
        1 => Command::Getpos,
        2 => {
            // Straight to the boundary, as the session commands it.
            let d = Axis::ALL[rng.random_range(0..3)].unit() * if rng.random() { 1.0 } else { -1.0 };
            match translation_increment(pose, d, w) {
                Ok(inc) => Command::imov(inc.scaled(w.backoff())),
                Err(_) => Command::Getpos,
            }
        }
        3 => {
            let mut inc = [0.0; 6];
            inc[rng.random_range(0..6)] = f64::NAN;
            Command::Imov { inc }
        }
        4 => {
            let mut inc = [0.0; 6];
            inc[rng.random_range(0..3)] = rng.random_range(-100.0..100.0);
            inc[3 + rng.random_range(0..3)] = rng.random_range(-10.0..10.0);
            Command::Imov { inc }
        }
        5 | 6 => {
            let mut inc = [0.0; 6];
            inc[rng.random_range(3..6)] = rng.random_range(-400.0..400.0);
            Command::Imov { inc }
        }
        _ => {
            let mut inc = [0.0; 6];
            inc[rng.random_range(0..3)] = rng.random_range(-4000.0..4000.0);
            Command::Imov { inc }
        }
    }
}

/// Runs `steps` random commands and ticks, checking the invariants after
/// every one. Returns the number of accepted moves.
pub fn fuzz(seed: u64, steps: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = RobotSim::with_defaults();
    let mut accepted = 0;
    for step in 0..steps {
        let before = sim.pose();
        if rng.random_bool(0.4) {
            let cmd = random_command(&mut rng, &before, &sim);
            let reply = sim.apply(&cmd);
            match (&cmd, &reply) {
                (Command::Stop { .. }, _) => {
                    if sim.state().moving() {
                        return Err(format!("step {step}: still moving after STOP"));
                    }
                    sim.tick(rng.random_range(0.0..0.5));
                    if sim.pose() != before {
                        return Err(format!("step {step}: moved after STOP"));
                    }
                }
                (Command::Imov { inc }, Reply::Ok) => {
                    let inc = PoseIncrement(*inc);
                    if inc.nonzero_count() > 1 || !inc.is_finite() {
                        return Err(format!("step {step}: accepted {inc:?}"));
                    }
                    accepted += 1;
                }
                (Command::Getpos, Reply::Pose(p)) if *p != before => {
                    return Err(format!("step {step}: GETPOS disagrees with state"));
                }
                _ => {}
            }
        } else {
            let seg = sim.state().segment_start.zip(sim.state().target);
            sim.tick(rng.random_range(0.0..0.2));
            let now = sim.pose();
            if !sim.workspace().contains_with_tolerance(now.position) {
                return Err(format!("step {step}: left the workspace at {:?}", now.position));
            }
            if let Some((start, target)) = seg {
                let full = target.position - start.position;
                let done = now.position - start.position;
                let along = if full.norm() > 0.0 {
                    done.dot(full) / full.norm()
                } else {
                    0.0
                };
                let off_line = (done - full * (along / full.norm().max(1e-300))).norm();
                if along > full.norm() + 1e-9 || along < -1e-9 || off_line > 1e-6 {
                    return Err(format!("step {step}: overshoot or off-line ({along}, {off_line})"));
                }
                for i in 0..3 {
                    let (lo, hi) = (
                        start.rotation[i].min(target.rotation[i]),
                        start.rotation[i].max(target.rotation[i]),
                    );
                    if now.rotation[i] < lo - 1e-9 || now.rotation[i] > hi + 1e-9 {
                        return Err(format!("step {step}: rotation overshoot on axis {i}"));
                    }
                }
            }
        }
    }
    Ok(accepted)
}
