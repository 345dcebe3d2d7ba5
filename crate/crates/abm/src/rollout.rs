//! Episode collection and storage: random-policy exploration, planner-driven
//! real episodes, model-sampled imagined episodes, and a line-oriented JSONL
//! format that round-trips every episode bit for bit.
//!
//! Seeding is hierarchical: each episode derives its own seed from the master
//! seed, and placement, environment stepping, policy, and imagination draws
//! each get an independent stream of that episode seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    Action, Cell, EnvConfig, Fuel, GridState, Gridworld, Status, StepSim,
};
use crate::error::{Error, Result};
use crate::model::{Displacement, EnsembleModel, Transition};
use crate::planner::{ModeTable, Mpc};
use crate::seeding::{derive_seed, fmt_f64, stream_rng};

/// Where an episode's transitions came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Real,
    Imagined,
}

impl Source {
    fn code(self) -> &'static str {
        match self {
            Source::Real => "real",
            Source::Imagined => "imagined",
        }
    }
}

/// How the initial state was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Seeded placement sampling.
    Random,
    /// Hand-crafted states supplied by the caller.
    ByHand,
    /// States observed in real environment episodes.
    FromEnvObservation,
}

impl InitMode {
    fn code(self) -> &'static str {
        match self {
            InitMode::Random => "random",
            InitMode::ByHand => "by_hand",
            InitMode::FromEnvObservation => "from_env",
        }
    }
}

/// One recorded step: the state the action was taken in, the action, and the
/// reward the step paid.
#[derive(Clone, Debug, PartialEq)]
pub struct EpStep {
    pub state: GridState,
    pub action: Action,
    pub reward: f64,
}

/// A completed episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub source: Source,
    pub seed: u64,
    pub init_mode: InitMode,
    pub status: Status,
    pub steps: Vec<EpStep>,
    pub final_state: GridState,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The state after step `t`: the next step's state, or the final state.
    pub fn state_after(&self, t: usize) -> &GridState {
        self.steps.get(t + 1).map(|s| &s.state).unwrap_or(&self.final_state)
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// For each fuel, the step index during which it was collected, or `None`
    /// if it stayed uncollected (or was already collected on entry).
    pub fn fuel_collected_at(&self) -> Vec<Option<u32>> {
        let n = self.final_state.fuels.len();
        (0..n)
            .map(|i| {
                (0..self.steps.len()).find_map(|t| {
                    let before = self.steps[t].state.fuels[i].collected;
                    let after = self.state_after(t).fuels[i].collected;
                    (!before && after).then_some(t as u32)
                })
            })
            .collect()
    }

    /// Structural validity: consistent layout, unit displacements, monotone
    /// fuel flags, a contiguous clock, and a status matching the final state.
    pub fn validate(&self, config: &EnvConfig) -> Result<()> {
        let fail = |msg: String| Err(Error::Data(msg));
        if self.steps.is_empty() {
            return fail("episode has no steps".into());
        }
        if self.status == Status::Running {
            return fail("episode status is still Running".into());
        }
        let g = config.grid_size;
        let t0 = self.steps[0].state.t;
        let states: Vec<&GridState> = self.steps.iter().map(|s| &s.state).chain([&self.final_state]).collect();
        let layout = states[0].layout();
        if layout.fuel_cells.len() != config.n_fuels {
            return fail(format!(
                "episode has {} fuels, config expects {}",
                layout.fuel_cells.len(),
                config.n_fuels
            ));
        }
        for (i, s) in states.iter().enumerate() {
            if s.t != t0 + i as u32 {
                return fail(format!("state {i} has t={} instead of {}", s.t, t0 + i as u32));
            }
            let cells_ok = s.agent.in_bounds(g)
                && s.adversary.in_bounds(g)
                && s.goal.in_bounds(g)
                && s.fuels.iter().all(|f| f.cell.in_bounds(g));
            if !cells_ok {
                return fail(format!("state {i} has a cell outside the {g}x{g} grid"));
            }
            if s.layout() != layout {
                return fail(format!("state {i} changed the goal or fuel layout"));
            }
        }
        if self.final_state.t > config.t_max {
            return fail(format!("episode runs past t_max={}", config.t_max));
        }
        for (t, pair) in states.windows(2).enumerate() {
            if Displacement::between(pair[0].agent, pair[1].agent).is_none() {
                return fail(format!("agent moved more than one cell at step {t}"));
            }
            if Displacement::between(pair[0].adversary, pair[1].adversary).is_none() {
                return fail(format!("adversary moved more than one cell at step {t}"));
            }
            for (i, (before, after)) in pair[0].fuels.iter().zip(&pair[1].fuels).enumerate() {
                if before.collected && !after.collected {
                    return fail(format!("fuel {i} flipped back to uncollected at step {t}"));
                }
                if !before.collected && after.collected && pair[1].agent != before.cell {
                    return fail(format!("fuel {i} collected at step {t} without the agent on it"));
                }
            }
        }
        for (t, step) in self.steps.iter().enumerate() {
            if !step.reward.is_finite() {
                return fail(format!("step {t} has a non-finite reward"));
            }
        }
        // Intermediate states must be live; the initial state may be terminal
        // only in the degenerate one-step form imagined rollouts emit.
        for (i, s) in states[..states.len() - 1].iter().enumerate() {
            if let Some(status) = s.terminal_status(config) {
                let degenerate = i == 0 && self.steps.len() == 1 && status == self.status;
                if !degenerate {
                    return fail(format!("state {i} is already terminal ({status:?})"));
                }
            }
        }
        let final_ok = match self.status {
            Status::GoalReached => self.final_state.agent == self.final_state.goal,
            Status::Caught => self.final_state.agent == self.final_state.adversary,
            Status::TimedOut => {
                self.final_state.t == config.t_max
                    && self.final_state.terminal_status(config) == Some(Status::TimedOut)
            }
            Status::Running => false,
        };
        if !final_ok {
            return fail(format!("final state does not match status {:?}", self.status));
        }
        Ok(())
    }
}

/// A batch of episodes plus the provenance needed to reuse them safely.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSet {
    pub episodes: Vec<Episode>,
    pub env_config: EnvConfig,
    pub config_hash: String,
    pub created_at: String,
    pub tool_version: String,
}

#[derive(Serialize, Deserialize)]
struct SetMeta {
    config_hash: String,
    created_at: String,
    tool_version: String,
    episodes: usize,
    env_config: EnvConfig,
}

impl EpisodeSet {
    pub fn new(episodes: Vec<Episode>, env_config: EnvConfig, config_hash: impl Into<String>) -> Self {
        EpisodeSet {
            episodes,
            env_config,
            config_hash: config_hash.into(),
            created_at: now_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn meta_path(path: &Path) -> PathBuf {
        let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        path.with_file_name(format!("{name}.meta.json"))
    }

    /// Write one JSON line per episode, plus a `<name>.meta.json` sidecar
    /// with the config snapshot. The JSONL bytes depend only on the episodes,
    /// never on when they were written.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for ep in &self.episodes {
            ep.validate(&self.env_config)?;
            out.push_str(&episode_to_json(ep)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))?;
        let meta = SetMeta {
            config_hash: self.config_hash.clone(),
            created_at: self.created_at.clone(),
            tool_version: self.tool_version.clone(),
            episodes: self.episodes.len(),
            env_config: self.env_config.clone(),
        };
        let meta_path = Self::meta_path(path);
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
        Ok(())
    }

    /// Read a set saved by [`save`], validating every episode. Parse errors
    /// carry the 1-based line number.
    pub fn load(path: &Path) -> Result<EpisodeSet> {
        let meta_path = Self::meta_path(path);
        let meta_text = match fs::read_to_string(&meta_path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::Data(format!(
                    "episode sidecar {} is missing; episode files travel with their .meta.json",
                    meta_path.display()
                )));
            }
            Err(e) => return Err(Error::io(&meta_path, e)),
        };
        let meta: SetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut episodes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let ep = episode_from_json(line).map_err(|msg| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            })?;
            ep.validate(&meta.env_config).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            episodes.push(ep);
        }
        if episodes.len() != meta.episodes {
            return Err(Error::Data(format!(
                "{} declares {} episodes but {} holds {}",
                meta_path.display(),
                meta.episodes,
                path.display(),
                episodes.len()
            )));
        }
        Ok(EpisodeSet {
            episodes,
            env_config: meta.env_config,
            config_hash: meta.config_hash,
            created_at: meta.created_at,
            tool_version: meta.tool_version,
        })
    }
}

fn status_code(status: Status) -> Result<&'static str> {
    match status {
        Status::GoalReached => Ok("goal"),
        Status::Caught => Ok("caught"),
        Status::TimedOut => Ok("timeout"),
        Status::Running => Err(Error::Usage("cannot serialize an unfinished episode".into())),
    }
}

fn cell_json(c: Cell) -> String {
    format!("[{},{}]", c.x, c.y)
}

/// Serialize one episode as a single JSON line with a fixed field order.
/// Rewards are written with 17 significant digits so they parse back to the
/// same bits.
fn episode_to_json(ep: &Episode) -> Result<String> {
    let mut s = String::with_capacity(256 + 96 * ep.steps.len());
    s.push_str("{\"source\":\"");
    s.push_str(ep.source.code());
    s.push_str("\",\"seed\":");
    s.push_str(&ep.seed.to_string());
    s.push_str(",\"init_mode\":\"");
    s.push_str(ep.init_mode.code());
    s.push_str("\",\"status\":\"");
    s.push_str(status_code(ep.status)?);
    s.push_str("\",\"steps\":[");
    for (i, step) in ep.steps.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str("{\"agent\":");
        s.push_str(&cell_json(step.state.agent));
        s.push_str(",\"adversary\":");
        s.push_str(&cell_json(step.state.adversary));
        s.push_str(",\"action\":\"");
        s.push(step.action.code());
        s.push_str("\",\"reward\":");
        s.push_str(&fmt_f64(step.reward));
        s.push('}');
    }
    s.push_str("],\"goal\":");
    s.push_str(&cell_json(ep.final_state.goal));
    s.push_str(",\"fuels\":[");
    for (i, fuel) in ep.final_state.fuels.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&cell_json(fuel.cell));
    }
    s.push_str("],\"fuel_collected_at\":[");
    for (i, t) in ep.fuel_collected_at().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        match t {
            Some(t) => s.push_str(&t.to_string()),
            None => s.push_str("null"),
        }
    }
    // The trailing object carries what the per-step records cannot: terminal
    // positions, the initial clock, and fuels already collected on entry.
    // Without them a loaded episode would not reconstruct exactly.
    s.push_str("],\"final\":{\"agent\":");
    s.push_str(&cell_json(ep.final_state.agent));
    s.push_str(",\"adversary\":");
    s.push_str(&cell_json(ep.final_state.adversary));
    s.push_str(",\"t0\":");
    s.push_str(&ep.steps[0].state.t.to_string());
    s.push_str(",\"collected0\":[");
    for (i, fuel) in ep.steps[0].state.fuels.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push(if fuel.collected { '1' } else { '0' });
    }
    s.push_str("]}}");
    Ok(s)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineJson {
    source: String,
    seed: u64,
    init_mode: String,
    status: String,
    steps: Vec<StepJson>,
    goal: [u8; 2],
    fuels: Vec<[u8; 2]>,
    fuel_collected_at: Vec<Option<u32>>,
    #[serde(rename = "final")]
    fin: FinalJson,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepJson {
    agent: [u8; 2],
    adversary: [u8; 2],
    action: String,
    reward: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalJson {
    agent: [u8; 2],
    adversary: [u8; 2],
    t0: u32,
    collected0: Vec<u8>,
}

fn episode_from_json(line: &str) -> std::result::Result<Episode, String> {
    let raw: LineJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let source = match raw.source.as_str() {
        "real" => Source::Real,
        "imagined" => Source::Imagined,
        other => return Err(format!("unknown source {other:?}")),
    };
    let init_mode = match raw.init_mode.as_str() {
        "random" => InitMode::Random,
        "by_hand" => InitMode::ByHand,
        "from_env" => InitMode::FromEnvObservation,
        other => return Err(format!("unknown init_mode {other:?}")),
    };
    let status = match raw.status.as_str() {
        "goal" => Status::GoalReached,
        "caught" => Status::Caught,
        "timeout" => Status::TimedOut,
        other => return Err(format!("unknown status {other:?}")),
    };
    if raw.steps.is_empty() {
        return Err("episode has no steps".into());
    }
    if raw.fuel_collected_at.len() != raw.fuels.len() {
        return Err("fuel_collected_at length does not match fuels".into());
    }
    if raw.fin.collected0.len() != raw.fuels.len() {
        return Err("collected0 length does not match fuels".into());
    }
    for flag in &raw.fin.collected0 {
        if *flag > 1 {
            return Err(format!("collected0 entries must be 0 or 1, got {flag}"));
        }
    }
    let cell = |xy: [u8; 2]| Cell::new(xy[0], xy[1]);
    // A fuel's flag at time t: collected on entry, or collected during an
    // earlier step.
    let fuels_at = |t: usize| -> Vec<Fuel> {
        raw.fuels
            .iter()
            .zip(raw.fin.collected0.iter().zip(&raw.fuel_collected_at))
            .map(|(&fc, (&c0, collected_at))| Fuel {
                cell: cell(fc),
                collected: c0 == 1 || collected_at.is_some_and(|tc| (tc as usize) < t),
            })
            .collect()
    };
    let goal = cell(raw.goal);
    let mut steps = Vec::with_capacity(raw.steps.len());
    for (t, step) in raw.steps.iter().enumerate() {
        let action = step
            .action
            .chars()
            .next()
            .filter(|_| step.action.len() == 1)
            .and_then(Action::from_code)
            .ok_or_else(|| format!("unknown action {:?}", step.action))?;
        steps.push(EpStep {
            state: GridState {
                agent: cell(step.agent),
                adversary: cell(step.adversary),
                goal,
                fuels: fuels_at(t),
                t: raw.fin.t0 + t as u32,
            },
            action,
            reward: step.reward,
        });
    }
    let final_state = GridState {
        agent: cell(raw.fin.agent),
        adversary: cell(raw.fin.adversary),
        goal,
        fuels: fuels_at(raw.steps.len()),
        t: raw.fin.t0 + raw.steps.len() as u32,
    };
    Ok(Episode { source, seed: raw.seed, init_mode, status, steps, final_state })
}

/// Roll one episode in the true environment under `policy`.
fn run_real_episode(
    gw: &Gridworld,
    episode_seed: u64,
    init_mode: InitMode,
    initial: GridState,
    mut policy: impl FnMut(&GridState) -> Result<Action>,
) -> Result<Episode> {
    let mut env_rng = stream_rng(episode_seed, "env-steps", 0);
    let mut state = initial;
    let mut steps = Vec::new();
    loop {
        let action = policy(&state)?;
        let result = gw.step(&state, action, &mut env_rng)?;
        steps.push(EpStep { state, action, reward: result.reward });
        if result.status != Status::Running {
            return Ok(Episode {
                source: Source::Real,
                seed: episode_seed,
                init_mode,
                status: result.status,
                steps,
                final_state: result.next_state,
            });
        }
        state = result.next_state;
    }
}

/// Collect `n` random-policy exploration episodes in the true environment.
pub fn collect_random_policy(
    gw: &Gridworld,
    n: usize,
    master_seed: u64,
    config_hash: &str,
) -> Result<EpisodeSet> {
    let mut episodes = Vec::with_capacity(n);
    for i in 0..n {
        let episode_seed = derive_seed(master_seed, "episode", i as u64);
        let initial = gw.new_episode(episode_seed)?;
        let mut policy_rng = stream_rng(episode_seed, "policy", 0);
        let ep = run_real_episode(gw, episode_seed, InitMode::Random, initial, |_| {
            Ok(Action::ALL[policy_rng.random_range(0..4)])
        })?;
        episodes.push(ep);
    }
    Ok(EpisodeSet::new(episodes, gw.config().clone(), config_hash))
}

/// Collect `n` planner-controlled episodes in the true environment, planning
/// through the learned model's mode table and replanning every step.
pub fn collect_real(
    gw: &Gridworld,
    model: &EnsembleModel,
    mpc: &Mpc,
    n: usize,
    master_seed: u64,
    config_hash: &str,
) -> Result<EpisodeSet> {
    let table = ModeTable::new(model)?;
    let mut episodes = Vec::with_capacity(n);
    for i in 0..n {
        let episode_seed = derive_seed(master_seed, "episode", i as u64);
        let initial = gw.new_episode(episode_seed)?;
        let ep = run_real_episode(gw, episode_seed, InitMode::Random, initial, |state| {
            mpc.act(gw.config(), state, &table)
        })?;
        episodes.push(ep);
    }
    Ok(EpisodeSet::new(episodes, gw.config().clone(), config_hash))
}

/// Initial states for imagined rollouts.
pub enum ImagineInit<'a> {
    /// Fresh seeded placements, like real episodes.
    Random,
    /// Supplied states, cycled round-robin, recorded as `by_hand`.
    ByHand(&'a [GridState]),
    /// Supplied states observed in the environment, cycled round-robin.
    FromEnvObservation(&'a [GridState]),
}

/// Roll `n` episodes entirely inside the learned model: the planner picks
/// actions through the ensemble-mean mode table, one uniformly drawn member
/// samples each transition, and the shared step bookkeeping assigns rewards
/// and termination. Never calls the true environment's step.
///
/// An initial state that is already position-terminal (on the goal or on the
/// adversary) produces a degenerate one-step episode: a stand-still record
/// with zero reward and the matching status.
pub fn imagine(
    gw: &Gridworld,
    model: &EnsembleModel,
    mpc: &Mpc,
    n: usize,
    init: ImagineInit,
    master_seed: u64,
    config_hash: &str,
) -> Result<EpisodeSet> {
    let config = gw.config();
    let (init_mode, init_states) = match init {
        ImagineInit::Random => (InitMode::Random, None),
        ImagineInit::ByHand(states) => (InitMode::ByHand, Some(states)),
        ImagineInit::FromEnvObservation(states) => (InitMode::FromEnvObservation, Some(states)),
    };
    if let Some(states) = init_states {
        if states.is_empty() {
            return Err(Error::Usage("imagine needs at least one initial state".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if s.t >= config.t_max {
                return Err(Error::Usage(format!(
                    "initial state {i} has already timed out (t={} >= t_max={})",
                    s.t, config.t_max
                )));
            }
        }
    }
    let table = ModeTable::new(model)?;
    let mut episodes = Vec::with_capacity(n);
    for i in 0..n {
        let episode_seed = derive_seed(master_seed, "episode", i as u64);
        let initial = match init_states {
            None => gw.new_episode(episode_seed)?,
            Some(states) => states[i % states.len()].clone(),
        };
        episodes.push(imagine_episode(config, model, mpc, &table, episode_seed, init_mode, initial)?);
    }
    Ok(EpisodeSet::new(episodes, config.clone(), config_hash))
}

fn imagine_episode(
    config: &EnvConfig,
    model: &EnsembleModel,
    mpc: &Mpc,
    table: &ModeTable,
    episode_seed: u64,
    init_mode: InitMode,
    initial: GridState,
) -> Result<Episode> {
    if let Some(status) = initial.terminal_status(config) {
        let mut final_state = initial.clone();
        final_state.t += 1;
        return Ok(Episode {
            source: Source::Imagined,
            seed: episode_seed,
            init_mode,
            status,
            steps: vec![EpStep { state: initial, action: Action::Up, reward: 0.0 }],
            final_state,
        });
    }
    let mut rng = stream_rng(episode_seed, "imagine", 0);
    let layout = initial.layout();
    let sim_rules = StepSim { config, layout: &layout };
    let mut state = initial;
    let mut steps = Vec::new();
    loop {
        let action = mpc.act(config, &state, table)?;
        let member = rng.random_range(0..model.k());
        let dist = model.predict(member, state.agent, state.adversary, action)?;
        let (next_agent, next_adversary) = dist.sample(&mut rng, config.grid_size);
        let (next_sim, reward, status) = sim_rules.resolve(state.sim(), next_agent, next_adversary);
        let next_state = state.with_sim(next_sim);
        steps.push(EpStep { state, action, reward });
        if status != Status::Running {
            return Ok(Episode {
                source: Source::Imagined,
                seed: episode_seed,
                init_mode,
                status,
                steps,
                final_state: next_state,
            });
        }
        state = next_state;
    }
}

/// Re-run a real, randomly initialized episode from its recorded seed and
/// actions. The reconstruction must match what was recorded.
pub fn replay_real(gw: &Gridworld, episode: &Episode) -> Result<Episode> {
    if episode.source != Source::Real || episode.init_mode != InitMode::Random {
        return Err(Error::Usage(
            "replay needs a real episode with a randomly placed initial state".into(),
        ));
    }
    let initial = gw.new_episode(episode.seed)?;
    let mut actions = episode.steps.iter().map(|s| s.action);
    let ep = run_real_episode(gw, episode.seed, InitMode::Random, initial, |_| {
        actions.next().ok_or_else(|| Error::Data("replay ran out of recorded actions".into()))
    })?;
    Ok(ep)
}

/// Extract model-fitting transitions from real episodes. Steps the agent
/// ended (goal arrival or capture by walk-in) keep `next_adversary = None`:
/// the adversary never moved there.
pub fn transitions_from_episodes(set: &EpisodeSet) -> Vec<Transition> {
    let mut out = Vec::new();
    for ep in &set.episodes {
        for t in 0..ep.len() {
            let s = &ep.steps[t].state;
            let next = ep.state_after(t);
            let adversary_moved = next.adversary != s.adversary;
            out.push(Transition {
                agent: s.agent,
                adversary: s.adversary,
                action: ep.steps[t].action,
                next_agent: next.agent,
                next_adversary: adversary_moved.then_some(next.adversary),
            });
        }
    }
    out
}

/// Current UTC time as RFC 3339 with second precision.
pub fn now_rfc3339() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = (secs / 86_400) as i64;
    let tod = secs % 86_400;
    let (year, month, day) = civil_from_days(days);
    format!(
        "{year:04}-{month:02}-{day:02}T{:02}:{:02}:{:02}Z",
        tod / 3600,
        (tod % 3600) / 60,
        tod % 60
    )
}

/// Gregorian date for a day count since 1970-01-01.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1_460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let year = yoe as i64 + era * 400 + if month <= 2 { 1 } else { 0 };
    (year, month, day)
}
