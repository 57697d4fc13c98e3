//! Planar car with fixed forward speed and three arc actions (left,
//! straight, right). State is (x, y, heading); the adapter unrolls the
//! heading into cos/sin channels.

use crate::lift::{AdapterRegistry, ObsAdapter};

use super::Dynamics;

const SPEED: f64 = 0.05;
const TURN: f64 = 0.5;
const STEP_REWARD: f64 = -0.01;
const GOAL_REWARD: f64 = 1.0;
const GOAL: (f64, f64) = (0.8, 0.8);
const GOAL_RADIUS: f64 = 0.07;

#[derive(Debug, Clone)]
pub struct DubinsReacher {
    tag: String,
}

impl DubinsReacher {
    pub fn new() -> Self {
        Self { tag: "dubins_reacher".to_string() }
    }

    /// Canonical heading in [-pi, pi).
    fn wrap(theta: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let t = theta.rem_euclid(two_pi);
        if t >= std::f64::consts::PI {
            t - two_pi
        } else {
            t
        }
    }
}

impl Default for DubinsReacher {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for DubinsReacher {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn action_count(&self) -> usize {
        3
    }

    fn fixed_start(&self) -> Vec<f64> {
        vec![0.2, 0.2, 0.0]
    }

    fn sample_start(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        use rand::Rng;
        loop {
            let x = rng.random_range(0.1..0.9);
            let y = rng.random_range(0.1..0.9);
            let theta = Self::wrap(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            if (x - GOAL.0).hypot(y - GOAL.1) > GOAL_RADIUS {
                return vec![x, y, theta];
            }
        }
    }

    fn transition(&self, obs: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
        let (x, y, theta) = (obs[0], obs[1], obs[2]);
        let dtheta = match action {
            0 => TURN,
            1 => 0.0,
            _ => -TURN,
        };
        let nt = Self::wrap(theta + dtheta);
        let nx = (x + SPEED * nt.cos()).clamp(0.0, 1.0);
        let ny = (y + SPEED * nt.sin()).clamp(0.0, 1.0);
        if (nx - GOAL.0).hypot(ny - GOAL.1) <= GOAL_RADIUS {
            (vec![nx, ny, nt], GOAL_REWARD, true)
        } else {
            (vec![nx, ny, nt], STEP_REWARD, false)
        }
    }

    fn register_adapter(&self, reg: &mut AdapterRegistry) {
        reg.register(&self.tag, ObsAdapter::PlanarPose, 1.0);
    }
}
