//! Grid world with hazards, noisy hazard sensing, and ground-truth safety
//! labels.

use crate::core::SplitRng;
use crate::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Index of the "safe" state/class.
pub const SAFE: usize = 0;
/// Index of the "unsafe" state/class.
pub const UNSAFE: usize = 1;

/// The five grid moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl MoveAction {
    pub const ALL: [MoveAction; 5] = [
        MoveAction::Up,
        MoveAction::Down,
        MoveAction::Left,
        MoveAction::Right,
        MoveAction::Stay,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            MoveAction::Up => (0, -1),
            MoveAction::Down => (0, 1),
            MoveAction::Left => (-1, 0),
            MoveAction::Right => (1, 0),
            MoveAction::Stay => (0, 0),
        }
    }

    pub fn index(self) -> usize {
        match self {
            MoveAction::Up => 0,
            MoveAction::Down => 1,
            MoveAction::Left => 2,
            MoveAction::Right => 3,
            MoveAction::Stay => 4,
        }
    }

    /// One-hot encoding appended to measurements for the classifier.
    pub fn one_hot(self) -> [Scalar; 5] {
        let mut v = [0.0; 5];
        v[self.index()] = 1.0;
        v
    }
}

/// Grid world state. The agent holds position as its fallback, so the
/// default action never enters a hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub width: i32,
    pub height: i32,
    pub agent: (i32, i32),
    pub goal: (i32, i32),
    hazards: Vec<bool>,
    /// Probability that one hazard reading flips.
    pub sensor_noise: Scalar,
    /// Lookahead steps for the unsafe label.
    pub horizon: usize,
}

impl GridWorld {
    pub fn new(
        width: i32,
        height: i32,
        hazard_cells: &[(i32, i32)],
        agent: (i32, i32),
        goal: (i32, i32),
        sensor_noise: Scalar,
        horizon: usize,
    ) -> crate::Result<Self> {
        let mut hazards = vec![false; (width * height) as usize];
        for &(x, y) in hazard_cells {
            hazards[(y * width + x) as usize] = true;
        }
        let world = GridWorld {
            width,
            height,
            agent,
            goal,
            hazards,
            sensor_noise,
            horizon,
        };
        if world.is_hazard(agent) {
            return Err(crate::Error::validation("agent starts on a hazard"));
        }
        if world.is_hazard(goal) {
            return Err(crate::Error::validation("goal sits on a hazard"));
        }
        if !(0.0..0.5).contains(&sensor_noise) {
            return Err(crate::Error::validation("sensor noise outside [0, 0.5)"));
        }
        Ok(world)
    }

    pub fn is_hazard(&self, (x, y): (i32, i32)) -> bool {
        if x < 0 || y < 0 || x >= self.width || y >= self.height {
            return false; // walls clamp movement and carry no hazard
        }
        self.hazards[(y * self.width + x) as usize]
    }

    fn clamp(&self, (x, y): (i32, i32)) -> (i32, i32) {
        (x.clamp(0, self.width - 1), y.clamp(0, self.height - 1))
    }

    /// Cell the agent would occupy after `action`.
    pub fn target(&self, action: MoveAction) -> (i32, i32) {
        let (dx, dy) = action.delta();
        self.clamp((self.agent.0 + dx, self.agent.1 + dy))
    }

    /// Executes one move. Reward is −0.01 per step and +1 on reaching the
    /// goal (which then relocates); entering a hazard resets the agent to a
    /// fresh free cell.
    pub fn step(&mut self, action: MoveAction, rng: &mut SplitRng) -> (Scalar, bool) {
        let next = self.target(action);
        let mut reward = -0.01;
        if self.is_hazard(next) {
            self.agent = self.random_free_cell(rng, true);
            return (reward, true);
        }
        self.agent = next;
        if self.agent == self.goal {
            reward += 1.0;
            self.goal = self.random_free_cell(rng, false);
        }
        (reward, false)
    }

    fn random_free_cell(&self, rng: &mut SplitRng, avoid_goal: bool) -> (i32, i32) {
        loop {
            let cell = (rng.gen_range(0..self.width), rng.gen_range(0..self.height));
            if self.is_hazard(cell) {
                continue;
            }
            if avoid_goal && cell == self.goal {
                continue;
            }
            if !avoid_goal && cell == self.agent {
                continue;
            }
            return cell;
        }
    }

    /// Ground-truth safety label of an action: unsafe iff executing it and
    /// then holding position (the default policy) for up to `horizon` further
    /// steps enters a hazard. Noise-free by construction.
    pub fn label_action(&self, action: MoveAction) -> usize {
        let mut pos = self.target(action);
        if self.is_hazard(pos) {
            return UNSAFE;
        }
        for _ in 0..self.horizon {
            pos = self.default_move(pos);
            if self.is_hazard(pos) {
                return UNSAFE;
            }
        }
        SAFE
    }

    /// The default policy holds position.
    fn default_move(&self, pos: (i32, i32)) -> (i32, i32) {
        pos
    }

    /// Measurement dimension: eight neighbor readings plus the goal offset.
    pub const MEASUREMENT_DIM: usize = 10;

    /// Noisy hazard readings of the 8-neighborhood (row-major, skipping the
    /// agent cell) plus the relative goal offset scaled to [-1, 1].
    pub fn measurement(&self, rng: &mut SplitRng) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(Self::MEASUREMENT_DIM);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let truth = self.is_hazard((self.agent.0 + dx, self.agent.1 + dy));
                let flipped = rng.gen::<Scalar>() < self.sensor_noise;
                out.push(if truth != flipped { 1.0 } else { 0.0 });
            }
        }
        out.push((self.goal.0 - self.agent.0) as Scalar / self.width as Scalar);
        out.push((self.goal.1 - self.agent.1) as Scalar / self.height as Scalar);
        out
    }

    /// Classifier input for one candidate: measurement plus the action's
    /// one-hot code.
    pub fn classifier_input(measurement: &[Scalar], action: MoveAction) -> Vec<Scalar> {
        let mut input = measurement.to_vec();
        input.extend_from_slice(&action.one_hot());
        input
    }

    pub const INPUT_DIM: usize = Self::MEASUREMENT_DIM + 5;
}

/// Seeded random world source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldGen {
    pub width: i32,
    pub height: i32,
    pub hazard_density: Scalar,
    pub sensor_noise: Scalar,
    pub horizon: usize,
}

impl Default for WorldGen {
    fn default() -> Self {
        WorldGen {
            width: 11,
            height: 11,
            hazard_density: 0.12,
            sensor_noise: 0.15,
            horizon: 3,
        }
    }
}

impl WorldGen {
    /// Draws a world whose agent and goal sit on free cells. The default
    /// action (hold position) cannot be forced into a hazard within the
    /// horizon, so no generated world is rejected for fallback safety.
    pub fn sample(&self, rng: &mut SplitRng) -> GridWorld {
        loop {
            let mut hazards = vec![false; (self.width * self.height) as usize];
            for h in hazards.iter_mut() {
                *h = rng.gen::<Scalar>() < self.hazard_density;
            }
            let mut free = Vec::new();
            for y in 0..self.height {
                for x in 0..self.width {
                    if !hazards[(y * self.width + x) as usize] {
                        free.push((x, y));
                    }
                }
            }
            if free.len() < 2 {
                continue;
            }
            let agent = free[rng.gen_range(0..free.len())];
            let goal = loop {
                let g = free[rng.gen_range(0..free.len())];
                if g != agent {
                    break g;
                }
            };
            let world = GridWorld {
                width: self.width,
                height: self.height,
                agent,
                goal,
                hazards,
                sensor_noise: self.sensor_noise,
                horizon: self.horizon,
            };
            debug_assert!(self.default_holds_safe(&world));
            return world;
        }
    }

    /// The fallback-safety invariant: holding position from the agent's cell
    /// never enters a hazard within the horizon.
    fn default_holds_safe(&self, world: &GridWorld) -> bool {
        let mut pos = world.agent;
        for _ in 0..world.horizon {
            pos = world.default_move(pos);
            if world.is_hazard(pos) {
                return false;
            }
        }
        true
    }
}
