//! Adversarial fuel-collection gridworld: seeded placement, agent kinematics,
//! a stochastic chasing adversary, reward bookkeeping, and termination rules.
//!
//! A step resolves in a fixed sub-move order: the agent moves first (captures,
//! fuel pickups, and goal arrival are resolved immediately), then the adversary
//! samples its move, then time advances and the timeout check runs.

use std::cell::Cell as StdCell;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static STEP_CALLS: StdCell<u64> = const { StdCell::new(0) };
}

/// Number of true-environment [`Gridworld::step`] calls made on this thread.
///
/// Imagined rollouts must leave this counter untouched; tests read it before
/// and after to prove purity.
pub fn step_calls() -> u64 {
    STEP_CALLS.with(|c| c.get())
}

/// A grid coordinate. `x` grows rightward, `y` grows upward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: u8,
    pub y: u8,
}

impl Cell {
    pub fn new(x: u8, y: u8) -> Self {
        Cell { x, y }
    }

    /// Manhattan distance to `other`.
    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) as u32 + self.y.abs_diff(other.y) as u32
    }

    /// Row-major index: `y * grid_size + x`.
    pub fn index(self, grid_size: u8) -> usize {
        self.y as usize * grid_size as usize + self.x as usize
    }

    pub fn from_index(index: usize, grid_size: u8) -> Self {
        let g = grid_size as usize;
        Cell::new((index % g) as u8, (index / g) as u8)
    }

    /// Offset by `(dx, dy)`, or `None` if that leaves the grid.
    pub fn offset(self, dx: i16, dy: i16, grid_size: u8) -> Option<Cell> {
        let nx = self.x as i16 + dx;
        let ny = self.y as i16 + dy;
        if nx < 0 || ny < 0 || nx >= grid_size as i16 || ny >= grid_size as i16 {
            None
        } else {
            Some(Cell::new(nx as u8, ny as u8))
        }
    }

    pub fn in_bounds(self, grid_size: u8) -> bool {
        self.x < grid_size && self.y < grid_size
    }
}

/// The four agent actions. Declaration order (`Up < Down < Left < Right`) is
/// the tie-break order used everywhere ties between actions are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    /// Displacement `(dx, dy)` of the action.
    pub fn delta(self) -> (i16, i16) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }

    /// Single-letter code used in episode files.
    pub fn code(self) -> char {
        match self {
            Action::Up => 'U',
            Action::Down => 'D',
            Action::Left => 'L',
            Action::Right => 'R',
        }
    }

    pub fn from_code(code: char) -> Option<Action> {
        match code {
            'U' => Some(Action::Up),
            'D' => Some(Action::Down),
            'L' => Some(Action::Left),
            'R' => Some(Action::Right),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
        }
    }
}

/// One adversary sub-move: a unit step or standing still.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdversaryMove {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl AdversaryMove {
    pub const ALL: [AdversaryMove; 5] = [
        AdversaryMove::Up,
        AdversaryMove::Down,
        AdversaryMove::Left,
        AdversaryMove::Right,
        AdversaryMove::Stay,
    ];

    pub fn delta(self) -> (i16, i16) {
        match self {
            AdversaryMove::Up => (0, 1),
            AdversaryMove::Down => (0, -1),
            AdversaryMove::Left => (-1, 0),
            AdversaryMove::Right => (1, 0),
            AdversaryMove::Stay => (0, 0),
        }
    }

    fn is_directional(self) -> bool {
        !matches!(self, AdversaryMove::Stay)
    }
}

/// Probabilities over [`AdversaryMove::ALL`], in that order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveDistribution {
    pub probs: [f64; 5],
}

impl MoveDistribution {
    pub fn prob(&self, mv: AdversaryMove) -> f64 {
        let idx = AdversaryMove::ALL.iter().position(|m| *m == mv).expect("all moves listed");
        self.probs[idx]
    }

    /// Sample a move with a single uniform draw walked through the
    /// cumulative distribution in `ALL` order.
    pub fn sample(&self, rng: &mut impl Rng) -> AdversaryMove {
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        for (i, mv) in AdversaryMove::ALL.iter().enumerate() {
            acc += self.probs[i];
            if draw < acc {
                return *mv;
            }
        }
        // Rounding can leave the accumulated mass a hair under 1.0; fall back
        // to the last move with positive probability.
        for (i, mv) in AdversaryMove::ALL.iter().enumerate().rev() {
            if self.probs[i] > 0.0 {
                return *mv;
            }
        }
        AdversaryMove::Stay
    }
}

/// One fuel pickup: its cell and whether the agent has collected it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fuel {
    pub cell: Cell,
    pub collected: bool,
}

/// Full environment state at one time step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridState {
    pub agent: Cell,
    pub adversary: Cell,
    pub goal: Cell,
    pub fuels: Vec<Fuel>,
    pub t: u32,
}

impl GridState {
    /// Terminal status of this state, if it is terminal. Capture dominates
    /// goal arrival when both would apply; timeout is checked last.
    pub fn terminal_status(&self, config: &EnvConfig) -> Option<Status> {
        if self.agent == self.adversary {
            Some(Status::Caught)
        } else if self.agent == self.goal {
            Some(Status::GoalReached)
        } else if self.t >= config.t_max {
            Some(Status::TimedOut)
        } else {
            None
        }
    }

    pub fn all_fuels_collected(&self) -> bool {
        self.fuels.iter().all(|f| f.collected)
    }

    /// Static per-episode layout (goal and fuel cells).
    pub fn layout(&self) -> EpisodeLayout {
        EpisodeLayout {
            goal: self.goal,
            fuel_cells: self.fuels.iter().map(|f| f.cell).collect(),
        }
    }

    /// Compact view of the mutable part of the state.
    pub fn sim(&self) -> SimState {
        let mut collected = FuelMask::default();
        for (i, fuel) in self.fuels.iter().enumerate() {
            if fuel.collected {
                collected.set(i);
            }
        }
        SimState {
            agent: self.agent,
            adversary: self.adversary,
            collected,
            t: self.t,
        }
    }

    /// Rebuild a full state from a compact one, keeping this state's layout.
    pub fn with_sim(&self, sim: SimState) -> GridState {
        let fuels = self
            .fuels
            .iter()
            .enumerate()
            .map(|(i, f)| Fuel {
                cell: f.cell,
                collected: sim.collected.is_collected(i),
            })
            .collect();
        GridState {
            agent: sim.agent,
            adversary: sim.adversary,
            goal: self.goal,
            fuels,
            t: sim.t,
        }
    }
}

/// How an episode ended (or that it has not).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    GoalReached,
    Caught,
    TimedOut,
}

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: GridState,
    pub reward: f64,
    pub status: Status,
}

/// Environment parameters. All fields have working defaults; a config file
/// only needs to override what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub grid_size: u8,
    pub n_fuels: usize,
    /// Probability mass the adversary spends on uniform exploration instead
    /// of chasing.
    pub eps_adv: f64,
    pub r_fuel: f64,
    pub r_goal_base: f64,
    /// Goal reward once every fuel has been collected.
    pub r_goal_boosted: f64,
    pub r_capture: f64,
    pub t_max: u32,
    pub min_initial_agent_adversary_distance: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            grid_size: 8,
            n_fuels: 3,
            eps_adv: 0.25,
            r_fuel: 1.0,
            r_goal_base: 1.5,
            r_goal_boosted: 10.0,
            r_capture: -10.0,
            t_max: 60,
            min_initial_agent_adversary_distance: 3,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::Config(format!(
                "grid_size must be at least 2, got {}",
                self.grid_size
            )));
        }
        let cells = (self.grid_size as usize).pow(2);
        if 3 + self.n_fuels > cells {
            return Err(Error::Config(format!(
                "cannot place {} entities on a {}x{} grid",
                3 + self.n_fuels,
                self.grid_size,
                self.grid_size
            )));
        }
        if self.n_fuels > 8 {
            return Err(Error::Config(format!(
                "n_fuels must be at most 8, got {}",
                self.n_fuels
            )));
        }
        if !(0.0..=1.0).contains(&self.eps_adv) {
            return Err(Error::Config(format!(
                "eps_adv must lie in [0, 1], got {}",
                self.eps_adv
            )));
        }
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be positive".into()));
        }
        let max_distance = 2 * (self.grid_size as u32 - 1);
        if self.min_initial_agent_adversary_distance > max_distance {
            return Err(Error::Config(format!(
                "min_initial_agent_adversary_distance {} exceeds the grid diameter {}",
                self.min_initial_agent_adversary_distance, max_distance
            )));
        }
        for (name, value) in [
            ("r_fuel", self.r_fuel),
            ("r_goal_base", self.r_goal_base),
            ("r_goal_boosted", self.r_goal_boosted),
            ("r_capture", self.r_capture),
        ] {
            if !value.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {value}")));
            }
        }
        Ok(())
    }
}

/// Bitmask over fuel indices; bit `i` set means fuel `i` is collected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FuelMask(u8);

impl FuelMask {
    pub fn is_collected(self, fuel: usize) -> bool {
        self.0 & (1 << fuel) != 0
    }

    pub fn set(&mut self, fuel: usize) {
        self.0 |= 1 << fuel;
    }

    pub fn all_collected(self, n_fuels: usize) -> bool {
        self.0.count_ones() as usize == n_fuels
    }
}

/// The per-episode constants a rollout needs besides [`SimState`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeLayout {
    pub goal: Cell,
    pub fuel_cells: Vec<Cell>,
}

/// Compact mutable state, cheap to copy in planner search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimState {
    pub agent: Cell,
    pub adversary: Cell,
    pub collected: FuelMask,
    pub t: u32,
}

/// Step bookkeeping shared by the true environment, the planner's internal
/// rollouts, and imagined rollouts. Only next positions come from outside;
/// captures, pickups, goal rewards, and timeout all resolve here so the three
/// consumers can never drift apart.
pub struct StepSim<'a> {
    pub config: &'a EnvConfig,
    pub layout: &'a EpisodeLayout,
}

impl StepSim<'_> {
    /// Resolve the agent's sub-move to `next_agent`.
    /// Returns the updated state, the reward earned, and a terminal status if
    /// the sub-move ended the episode.
    pub fn agent_submove(&self, mut sim: SimState, next_agent: Cell) -> (SimState, f64, Option<Status>) {
        if next_agent == sim.adversary {
            sim.agent = next_agent;
            return (sim, self.config.r_capture, Some(Status::Caught));
        }
        sim.agent = next_agent;
        for (i, fuel_cell) in self.layout.fuel_cells.iter().enumerate() {
            if *fuel_cell == next_agent && !sim.collected.is_collected(i) {
                sim.collected.set(i);
                return (sim, self.config.r_fuel, None);
            }
        }
        if next_agent == self.layout.goal {
            let reward = if sim.collected.all_collected(self.layout.fuel_cells.len()) {
                self.config.r_goal_boosted
            } else {
                self.config.r_goal_base
            };
            return (sim, reward, Some(Status::GoalReached));
        }
        (sim, 0.0, None)
    }

    /// Resolve the adversary's sub-move to `next_adversary`. Call only when
    /// the agent sub-move left the episode running.
    pub fn adversary_submove(&self, mut sim: SimState, next_adversary: Cell) -> (SimState, f64, Option<Status>) {
        sim.adversary = next_adversary;
        if next_adversary == sim.agent {
            (sim, self.config.r_capture, Some(Status::Caught))
        } else {
            (sim, 0.0, None)
        }
    }

    /// Advance time and apply the timeout check.
    pub fn tick(&self, mut sim: SimState, status: Option<Status>) -> (SimState, Status) {
        sim.t += 1;
        match status {
            Some(s) => (sim, s),
            None if sim.t >= self.config.t_max => (sim, Status::TimedOut),
            None => (sim, Status::Running),
        }
    }

    /// Full step from externally supplied next positions (used by planner and
    /// imagined rollouts). `next_adversary` is ignored when the agent
    /// sub-move already ended the episode — the adversary does not move then.
    pub fn resolve(&self, sim: SimState, next_agent: Cell, next_adversary: Cell) -> (SimState, f64, Status) {
        let (sim, reward, status) = self.agent_submove(sim, next_agent);
        let (sim, reward, status) = if status.is_none() {
            let (sim, extra, status) = self.adversary_submove(sim, next_adversary);
            (sim, reward + extra, status)
        } else {
            (sim, reward, status)
        };
        let (sim, status) = self.tick(sim, status);
        (sim, reward, status)
    }
}

const MAX_PLACEMENT_ATTEMPTS: u32 = 10_000;

/// The gridworld simulator. Holds a validated [`EnvConfig`].
#[derive(Clone, Debug)]
pub struct Gridworld {
    config: EnvConfig,
}

impl Gridworld {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Gridworld { config })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Sample an initial state: agent, adversary, goal, and fuels placed on
    /// distinct cells, redrawn until the agent and adversary are at least the
    /// configured distance apart.
    pub fn new_episode(&self, seed: u64) -> Result<GridState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.config.grid_size;
        let n_entities = 3 + self.config.n_fuels;
        let mut cells: Vec<Cell> = (0..(g as usize).pow(2)).map(|i| Cell::from_index(i, g)).collect();
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            // Partial Fisher-Yates: the first n_entities slots become a
            // uniform draw of distinct cells.
            for k in 0..n_entities {
                let j = rng.random_range(k..cells.len());
                cells.swap(k, j);
            }
            if cells[0].manhattan(cells[1]) < self.config.min_initial_agent_adversary_distance {
                continue;
            }
            return Ok(GridState {
                agent: cells[0],
                adversary: cells[1],
                goal: cells[2],
                fuels: cells[3..3 + self.config.n_fuels]
                    .iter()
                    .map(|&cell| Fuel { cell, collected: false })
                    .collect(),
                t: 0,
            });
        }
        Err(Error::Config(format!(
            "no initial placement with agent-adversary distance >= {} found in {} attempts",
            self.config.min_initial_agent_adversary_distance, MAX_PLACEMENT_ATTEMPTS
        )))
    }

    /// Where the agent ends up applying `action` from `pos`: unit move,
    /// off-grid attempts are a no-op.
    pub fn agent_kinematics(&self, pos: Cell, action: Action) -> Cell {
        let (dx, dy) = action.delta();
        pos.offset(dx, dy, self.config.grid_size).unwrap_or(pos)
    }

    /// The adversary's move distribution in `state`: `1 - eps_adv` mass split
    /// uniformly over in-bounds moves that strictly reduce Manhattan distance
    /// to the agent (just `Stay` when it already sits on the agent), plus
    /// `eps_adv` mass split uniformly over all in-bounds directional moves.
    pub fn adversary_move_distribution(&self, state: &GridState) -> MoveDistribution {
        self.adversary_move_distribution_at(state.agent, state.adversary)
    }

    /// Same distribution for explicit positions; `agent` is where the agent
    /// stands when the adversary moves (i.e. after the agent sub-move).
    pub fn adversary_move_distribution_at(&self, agent: Cell, adversary: Cell) -> MoveDistribution {
        let g = self.config.grid_size;
        let eps = self.config.eps_adv;
        let current = adversary.manhattan(agent);

        let mut greedy = [false; 5];
        let mut n_greedy = 0usize;
        if current == 0 {
            greedy[4] = true; // Stay
            n_greedy = 1;
        } else {
            for (i, mv) in AdversaryMove::ALL.iter().enumerate() {
                if !mv.is_directional() {
                    continue;
                }
                let (dx, dy) = mv.delta();
                if let Some(next) = adversary.offset(dx, dy, g) {
                    if next.manhattan(agent) < current {
                        greedy[i] = true;
                        n_greedy += 1;
                    }
                }
            }
        }

        let mut random = [false; 5];
        let mut n_random = 0usize;
        for (i, mv) in AdversaryMove::ALL.iter().enumerate() {
            if !mv.is_directional() {
                continue;
            }
            let (dx, dy) = mv.delta();
            if adversary.offset(dx, dy, g).is_some() {
                random[i] = true;
                n_random += 1;
            }
        }

        let mut probs = [0.0f64; 5];
        for i in 0..5 {
            if greedy[i] {
                probs[i] += (1.0 - eps) / n_greedy as f64;
            }
            if random[i] && n_random > 0 {
                probs[i] += eps / n_random as f64;
            }
        }
        MoveDistribution { probs }
    }

    /// Advance one time step: agent sub-move, then (if still running) a
    /// sampled adversary sub-move, then the timeout check. Rewards from both
    /// sub-moves add up. Stepping a terminal state is a usage error.
    pub fn step(&self, state: &GridState, action: Action, rng: &mut impl Rng) -> Result<StepResult> {
        if let Some(status) = state.terminal_status(&self.config) {
            return Err(Error::Usage(format!(
                "cannot step an episode that already ended with {status:?}"
            )));
        }
        STEP_CALLS.with(|c| c.set(c.get() + 1));

        let layout = state.layout();
        let sim = state.sim();
        let step_sim = StepSim { config: &self.config, layout: &layout };

        let next_agent = self.agent_kinematics(state.agent, action);
        let (sim, reward, status) = step_sim.agent_submove(sim, next_agent);
        let (sim, reward, status) = if status.is_none() {
            // The adversary reacts to where the agent now stands.
            let dist = self.adversary_move_distribution_at(sim.agent, sim.adversary);
            let mv = dist.sample(rng);
            let (dx, dy) = mv.delta();
            let next_adversary = sim
                .adversary
                .offset(dx, dy, self.config.grid_size)
                .expect("sampled adversary moves stay on the grid");
            let (sim, extra, status) = step_sim.adversary_submove(sim, next_adversary);
            (sim, reward + extra, status)
        } else {
            (sim, reward, status)
        };
        let (sim, status) = step_sim.tick(sim, status);

        Ok(StepResult {
            next_state: state.with_sim(sim),
            reward,
            status,
        })
    }

    /// Binary channel encoding: four `grid_size x grid_size` planes (agent,
    /// adversary, goal, uncollected fuels), each row-major with index
    /// `y * grid_size + x`.
    pub fn to_channels(&self, state: &GridState) -> Vec<u8> {
        let g = self.config.grid_size;
        let plane = (g as usize).pow(2);
        let mut out = vec![0u8; 4 * plane];
        out[state.agent.index(g)] = 1;
        out[plane + state.adversary.index(g)] = 1;
        out[2 * plane + state.goal.index(g)] = 1;
        for fuel in &state.fuels {
            if !fuel.collected {
                out[3 * plane + fuel.cell.index(g)] = 1;
            }
        }
        out
    }
}
