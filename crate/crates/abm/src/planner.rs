//! Model-predictive planning: exhaustive search over all action sequences of
//! a fixed horizon through a deterministic dynamics provider, replanned every
//! step with only the first action executed.
//!
//! Returns are undiscounted reward sums under the shared step bookkeeping
//! ([`crate::env::StepSim`]); the provider only supplies next positions.

use crate::env::{Action, Cell, EnvConfig, GridState, SimState, Status, StepSim};
use crate::error::{Error, Result};
use crate::model::EnsembleModel;

/// Deterministic one-step position dynamics used inside planner rollouts
/// and imagined rollouts' action selection.
pub trait DynamicsProvider {
    /// Next (agent, adversary) positions when `action` is taken from the
    /// given positions. Fuel, goal, capture, and timeout bookkeeping is not
    /// the provider's concern.
    fn next(&self, agent: Cell, adversary: Cell, action: Action) -> (Cell, Cell);
}

/// Most-likely transition of a learned ensemble, precomputed for every
/// (agent, adversary, action) triple so planner rollouts are table lookups.
pub struct ModeTable {
    grid_size: u8,
    table: Vec<(Cell, Cell)>,
}

impl ModeTable {
    pub fn new(model: &EnsembleModel) -> Result<ModeTable> {
        let g = model.grid_size();
        let cells = (g as usize).pow(2);
        let mut table = Vec::with_capacity(cells * cells * 4);
        for agent_idx in 0..cells {
            let agent = Cell::from_index(agent_idx, g);
            for adv_idx in 0..cells {
                let adversary = Cell::from_index(adv_idx, g);
                for action in Action::ALL {
                    let dist = model.predict_mean(agent, adversary, action)?;
                    table.push(dist.mode(g));
                }
            }
        }
        Ok(ModeTable { grid_size: g, table })
    }

    pub fn grid_size(&self) -> u8 {
        self.grid_size
    }
}

impl DynamicsProvider for ModeTable {
    fn next(&self, agent: Cell, adversary: Cell, action: Action) -> (Cell, Cell) {
        let cells = (self.grid_size as usize).pow(2);
        let idx = (agent.index(self.grid_size) * cells + adversary.index(self.grid_size)) * 4 + action.index();
        self.table[idx]
    }
}

/// Reference provider backed by the true environment: exact agent kinematics
/// and the adversary's most probable move (move-order tie-break). For
/// analysis and tests; real collection plans through the learned model.
pub struct TrueDynamicsOracle<'a> {
    gridworld: &'a crate::env::Gridworld,
}

impl<'a> TrueDynamicsOracle<'a> {
    pub fn new(gridworld: &'a crate::env::Gridworld) -> Self {
        TrueDynamicsOracle { gridworld }
    }
}

impl DynamicsProvider for TrueDynamicsOracle<'_> {
    fn next(&self, agent: Cell, adversary: Cell, action: Action) -> (Cell, Cell) {
        let next_agent = self.gridworld.agent_kinematics(agent, action);
        let dist = self.gridworld.adversary_move_distribution_at(next_agent, adversary);
        let mut best = 0;
        for i in 1..5 {
            if dist.probs[i] > dist.probs[best] {
                best = i;
            }
        }
        let mv = crate::env::AdversaryMove::ALL[best];
        let (dx, dy) = mv.delta();
        let next_adversary = adversary
            .offset(dx, dy, self.gridworld.config().grid_size)
            .expect("positive-probability adversary moves stay on the grid");
        (next_agent, next_adversary)
    }
}

/// Provider with true agent kinematics and an adversary that never moves.
/// Used to study planning with the chase switched off.
pub struct FrozenAdversary {
    pub grid_size: u8,
}

impl DynamicsProvider for FrozenAdversary {
    fn next(&self, agent: Cell, adversary: Cell, action: Action) -> (Cell, Cell) {
        let (dx, dy) = action.delta();
        let next_agent = agent.offset(dx, dy, self.grid_size).unwrap_or(agent);
        (next_agent, adversary)
    }
}

/// A full plan: every sequence evaluated, ranked by return.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// Highest-return sequence; exact return ties go to the
    /// lexicographically smallest sequence in action order.
    pub best_sequence: Vec<Action>,
    pub best_return: f64,
    /// All `4^horizon` sequences, sorted by return descending; ties keep
    /// lexicographic order.
    pub ranked_returns: Vec<(Vec<Action>, f64)>,
}

/// Exhaustive fixed-horizon planner.
#[derive(Clone, Copy, Debug)]
pub struct Mpc {
    pub horizon: u32,
    /// Maximum number of sequences one plan may evaluate.
    pub max_sequences: u64,
}

impl Mpc {
    pub fn new(horizon: u32, max_sequences: u64) -> Result<Mpc> {
        if horizon == 0 {
            return Err(Error::Config("planning horizon must be at least 1".into()));
        }
        let sequences = 4u64.checked_pow(horizon);
        match sequences {
            Some(s) if s <= max_sequences => Ok(Mpc { horizon, max_sequences }),
            _ => Err(Error::Config(format!(
                "horizon {horizon} needs {} sequences, over the budget of {max_sequences}",
                sequences.map_or("more than 2^64".to_string(), |s| s.to_string()),
            ))),
        }
    }

    fn check_state(&self, config: &EnvConfig, state: &GridState) -> Result<()> {
        if let Some(status) = state.terminal_status(config) {
            return Err(Error::Usage(format!(
                "cannot plan from a state that already ended with {status:?}"
            )));
        }
        Ok(())
    }

    /// Evaluate every sequence of `horizon` actions from `state` and rank
    /// them. Sequences that end the simulated episode early keep their
    /// return over all completions.
    pub fn plan(
        &self,
        config: &EnvConfig,
        state: &GridState,
        provider: &(impl DynamicsProvider + ?Sized),
    ) -> Result<PlanResult> {
        self.check_state(config, state)?;
        let layout = state.layout();
        let sim = StepSim { config, layout: &layout };
        let mut ranked = Vec::with_capacity(4usize.pow(self.horizon));
        let mut seq = Vec::with_capacity(self.horizon as usize);
        self.walk(&sim, provider, state.sim(), 0.0, false, &mut seq, &mut ranked);
        // Stable sort: the walk emits sequences in lexicographic order, so
        // equal returns stay lexicographically sorted.
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("returns are finite"));
        let (best_sequence, best_return) = ranked[0].clone();
        Ok(PlanResult { best_sequence, best_return, ranked_returns: ranked })
    }

    fn walk(
        &self,
        sim: &StepSim,
        provider: &(impl DynamicsProvider + ?Sized),
        state: SimState,
        ret: f64,
        terminated: bool,
        seq: &mut Vec<Action>,
        out: &mut Vec<(Vec<Action>, f64)>,
    ) {
        if seq.len() == self.horizon as usize {
            out.push((seq.clone(), ret));
            return;
        }
        for action in Action::ALL {
            seq.push(action);
            if terminated {
                self.walk(sim, provider, state, ret, true, seq, out);
            } else {
                let (next_agent, next_adversary) = provider.next(state.agent, state.adversary, action);
                let (next, reward, status) = sim.resolve(state, next_agent, next_adversary);
                self.walk(sim, provider, next, ret + reward, status != Status::Running, seq, out);
            }
            seq.pop();
        }
    }

    /// First action of the best sequence, without materializing the ranking.
    pub fn act(
        &self,
        config: &EnvConfig,
        state: &GridState,
        provider: &(impl DynamicsProvider + ?Sized),
    ) -> Result<Action> {
        self.check_state(config, state)?;
        let layout = state.layout();
        let sim = StepSim { config, layout: &layout };
        let mut best: Option<(f64, Action)> = None;
        let mut seq = Vec::with_capacity(self.horizon as usize);
        self.walk_best(&sim, provider, state.sim(), 0.0, &mut seq, &mut best);
        Ok(best.expect("horizon >= 1 always yields a candidate").1)
    }

    /// Depth-first best-return search. Identical tie behavior to [`plan`]:
    /// candidates arrive in lexicographic sequence order and only a strictly
    /// greater return replaces the incumbent. A terminated prefix stands for
    /// all its completions, whose lexicographically first member is the one
    /// the full enumeration would keep.
    fn walk_best(
        &self,
        sim: &StepSim,
        provider: &(impl DynamicsProvider + ?Sized),
        state: SimState,
        ret: f64,
        seq: &mut Vec<Action>,
        best: &mut Option<(f64, Action)>,
    ) {
        if seq.len() == self.horizon as usize {
            offer(best, ret, seq[0]);
            return;
        }
        for action in Action::ALL {
            seq.push(action);
            let (next_agent, next_adversary) = provider.next(state.agent, state.adversary, action);
            let (next, reward, status) = sim.resolve(state, next_agent, next_adversary);
            if status == Status::Running {
                self.walk_best(sim, provider, next, ret + reward, seq, best);
            } else {
                offer(best, ret + reward, seq[0]);
            }
            seq.pop();
        }
    }
}

fn offer(best: &mut Option<(f64, Action)>, ret: f64, first: Action) {
    match best {
        Some((incumbent, _)) if ret <= *incumbent => {}
        _ => *best = Some((ret, first)),
    }
}
