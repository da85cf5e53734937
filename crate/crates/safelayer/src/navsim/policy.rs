//! Goal-seeking heuristic policy. The framework wraps any action proposer;
//! a shortest-path heuristic isolates the safety layer's contribution from
//! policy training.

use crate::core::SplitRng;
use crate::navsim::world::{GridWorld, MoveAction};
use crate::Scalar;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    /// Probability of proposing a shuffled preference order instead of the
    /// greedy one.
    pub explore: Scalar,
}

impl Default for GreedyPolicy {
    fn default() -> Self {
        GreedyPolicy { explore: 0.1 }
    }
}

impl GreedyPolicy {
    /// Candidate actions in preference order (most preferred first): moves
    /// sorted by resulting Manhattan distance to the goal, holding position
    /// last. Exploration shuffles the order.
    pub fn ranked_actions(&self, world: &GridWorld, rng: &mut SplitRng) -> Vec<MoveAction> {
        let mut moves: Vec<MoveAction> = MoveAction::ALL.to_vec();
        if rng.gen::<Scalar>() < self.explore {
            moves.shuffle(rng);
            return moves;
        }
        let dist_after = |a: &MoveAction| {
            let (dx, dy) = a.delta();
            let x = (world.agent.0 + dx).clamp(0, world.width - 1);
            let y = (world.agent.1 + dy).clamp(0, world.height - 1);
            // holding position ranks behind an equally good move
            let stay_penalty = i32::from(matches!(a, MoveAction::Stay));
            ((world.goal.0 - x).abs() + (world.goal.1 - y).abs()) * 2 + stay_penalty
        };
        moves.sort_by_key(dist_after);
        moves
    }
}
