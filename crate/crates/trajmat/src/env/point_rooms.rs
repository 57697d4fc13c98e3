//! Continuous 2-D point mass in four rooms on the unit square, with two
//! interior walls (doorway gaps at their midpoints) and reflecting
//! boundaries. Eight discretized velocity actions at 45-degree headings.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::lift::{AdapterRegistry, ObsAdapter};

use super::Dynamics;

const SPEED: f64 = 0.07;
const STEP_REWARD: f64 = -0.01;
const GOAL_REWARD: f64 = 1.0;
const GOAL: (f64, f64) = (0.85, 0.85);
const GOAL_RADIUS: f64 = 0.08;
/// Interior walls sit at x = 0.5 and y = 0.5 with doorways on
/// [0.5 - DOOR, 0.5 + DOOR] of the cross coordinate.
const WALL: f64 = 0.5;
const DOOR: f64 = 0.07;

#[derive(Debug, Clone)]
pub struct PointRooms {
    tag: String,
}

impl PointRooms {
    pub fn new() -> Self {
        Self { tag: "point_rooms".to_string() }
    }

    fn reflect_axis(p: f64, q: f64, cross_p: f64, cross_q: f64) -> (f64, f64) {
        // Moving from p to q along one axis while the cross coordinate moves
        // from cross_p to cross_q; reflect about the wall plane unless the
        // crossing point lies inside the doorway.
        if (p - WALL).signum() == (q - WALL).signum() || p == q {
            return (q, cross_q);
        }
        let t = (WALL - p) / (q - p);
        let cross_at = cross_p + t * (cross_q - cross_p);
        if (cross_at - WALL).abs() <= DOOR {
            (q, cross_q)
        } else {
            (2.0 * WALL - q, cross_q)
        }
    }

    fn clamp_reflect(v: f64) -> f64 {
        let v = if v < 0.0 { -v } else { v };
        if v > 1.0 {
            2.0 - v
        } else {
            v
        }
    }
}

impl Default for PointRooms {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for PointRooms {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn action_count(&self) -> usize {
        8
    }

    fn fixed_start(&self) -> Vec<f64> {
        vec![0.15, 0.15]
    }

    fn sample_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let x = rng.random_range(0.05..0.95);
            let y = rng.random_range(0.05..0.95);
            let near_wall = ((x - WALL).abs() < 0.02 && (y - WALL).abs() > DOOR)
                || ((y - WALL).abs() < 0.02 && (x - WALL).abs() > DOOR);
            let in_goal = (x - GOAL.0).hypot(y - GOAL.1) <= GOAL_RADIUS;
            if !near_wall && !in_goal {
                return vec![x, y];
            }
        }
    }

    fn transition(&self, obs: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
        let (x, y) = (obs[0], obs[1]);
        let angle = std::f64::consts::FRAC_PI_4 * action as f64;
        let qx = x + SPEED * angle.cos();
        let qy = y + SPEED * angle.sin();
        // Vertical wall (x = WALL), then horizontal wall (y = WALL).
        let (nx, ny) = Self::reflect_axis(x, qx, y, qy);
        let (ny, nx) = Self::reflect_axis(y, ny, x, nx);
        let nx = Self::clamp_reflect(nx);
        let ny = Self::clamp_reflect(ny);
        if (nx - GOAL.0).hypot(ny - GOAL.1) <= GOAL_RADIUS {
            (vec![nx, ny], GOAL_REWARD, true)
        } else {
            (vec![nx, ny], STEP_REWARD, false)
        }
    }

    fn register_adapter(&self, reg: &mut AdapterRegistry) {
        reg.register(&self.tag, ObsAdapter::Identity, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_move_is_straight() {
        let env = PointRooms::new();
        let (next, r, done) = env.transition(&[0.2, 0.2], 0);
        assert!((next[0] - 0.27).abs() < 1e-12);
        assert!((next[1] - 0.2).abs() < 1e-12);
        assert_eq!(r, STEP_REWARD);
        assert!(!done);
    }

    #[test]
    fn wall_reflects_outside_door() {
        let env = PointRooms::new();
        // Heading right into the x-wall well below the doorway.
        let (next, _, _) = env.transition(&[0.47, 0.2], 0);
        assert!(next[0] < WALL, "should reflect back off the wall");
        // Through the doorway the move goes straight.
        let (next, _, _) = env.transition(&[0.47, 0.5], 0);
        assert!(next[0] > WALL, "doorway should let the point through");
    }

    #[test]
    fn boundary_reflects() {
        let env = PointRooms::new();
        let (next, _, _) = env.transition(&[0.03, 0.2], 4); // heading left
        assert!(next[0] >= 0.0);
    }

    #[test]
    fn goal_disc_terminates() {
        let env = PointRooms::new();
        let (_, r, done) = env.transition(&[0.80, 0.85], 0);
        assert_eq!(r, GOAL_REWARD);
        assert!(done);
    }
}
