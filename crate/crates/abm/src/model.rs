//! Learned world model: an ensemble of factored categorical dynamics tables.
//!
//! Each member holds smoothed displacement counts for the agent (conditioned
//! on action and wall contact) and for the adversary (conditioned on the sign
//! of its offset to where the agent just moved, and wall contact). Members
//! are fit on bootstrap resamples of the same transitions, so their
//! disagreement reflects how little data a context has.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, AdversaryMove, Cell};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, fmt_f64};

/// One unit displacement or standing still. Declaration order is the
/// tie-break order whenever a most-likely displacement is selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Displacement {
    Stay,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Displacement {
    pub const ALL: [Displacement; 5] = [
        Displacement::Stay,
        Displacement::PlusX,
        Displacement::MinusX,
        Displacement::PlusY,
        Displacement::MinusY,
    ];

    pub fn delta(self) -> (i16, i16) {
        match self {
            Displacement::Stay => (0, 0),
            Displacement::PlusX => (1, 0),
            Displacement::MinusX => (-1, 0),
            Displacement::PlusY => (0, 1),
            Displacement::MinusY => (0, -1),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Displacement::Stay => 0,
            Displacement::PlusX => 1,
            Displacement::MinusX => 2,
            Displacement::PlusY => 3,
            Displacement::MinusY => 4,
        }
    }

    /// The displacement taking `from` to `to`, if they are equal or adjacent.
    pub fn between(from: Cell, to: Cell) -> Option<Displacement> {
        let dx = to.x as i16 - from.x as i16;
        let dy = to.y as i16 - from.y as i16;
        Displacement::ALL.into_iter().find(|d| d.delta() == (dx, dy))
    }

    pub fn apply(self, from: Cell, grid_size: u8) -> Option<Cell> {
        let (dx, dy) = self.delta();
        from.offset(dx, dy, grid_size)
    }

    /// The displacement an adversary move produces.
    pub fn from_move(mv: AdversaryMove) -> Displacement {
        match mv {
            AdversaryMove::Stay => Displacement::Stay,
            AdversaryMove::Right => Displacement::PlusX,
            AdversaryMove::Left => Displacement::MinusX,
            AdversaryMove::Up => Displacement::PlusY,
            AdversaryMove::Down => Displacement::MinusY,
        }
    }
}

/// Which walls a cell touches: bit 0 = left edge, bit 1 = right edge,
/// bit 2 = bottom edge, bit 3 = top edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryProfile(u8);

impl BoundaryProfile {
    pub fn of(cell: Cell, grid_size: u8) -> Self {
        let mut bits = 0u8;
        if cell.x == 0 {
            bits |= 1;
        }
        if cell.x == grid_size - 1 {
            bits |= 2;
        }
        if cell.y == 0 {
            bits |= 4;
        }
        if cell.y == grid_size - 1 {
            bits |= 8;
        }
        BoundaryProfile(bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits < 16 {
            Ok(BoundaryProfile(bits))
        } else {
            Err(Error::Data(format!("boundary profile out of range: {bits}")))
        }
    }

    /// Whether a displacement keeps the entity on the grid.
    pub fn allows(self, d: Displacement) -> bool {
        match d {
            Displacement::Stay => true,
            Displacement::PlusX => self.0 & 2 == 0,
            Displacement::MinusX => self.0 & 1 == 0,
            Displacement::PlusY => self.0 & 8 == 0,
            Displacement::MinusY => self.0 & 4 == 0,
        }
    }
}

/// Conditioning context for the agent factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AgentContext {
    pub action: Action,
    pub boundary: BoundaryProfile,
}

impl AgentContext {
    pub fn of(action: Action, agent: Cell, grid_size: u8) -> Self {
        AgentContext { action, boundary: BoundaryProfile::of(agent, grid_size) }
    }
}

/// Conditioning context for the adversary factor: the sign of the offset
/// from the adversary to the agent's post-move position, plus wall contact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AdversaryContext {
    pub sign_x: i8,
    pub sign_y: i8,
    pub boundary: BoundaryProfile,
}

impl AdversaryContext {
    pub fn of(agent_after_move: Cell, adversary: Cell, grid_size: u8) -> Self {
        AdversaryContext {
            sign_x: (agent_after_move.x as i16 - adversary.x as i16).signum() as i8,
            sign_y: (agent_after_move.y as i16 - adversary.y as i16).signum() as i8,
            boundary: BoundaryProfile::of(adversary, grid_size),
        }
    }
}

/// One observed environment step.
///
/// `next_adversary` is `None` for steps the agent ended (capture by walk-in
/// or goal arrival), where the adversary never moved; those steps still train
/// the agent factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub agent: Cell,
    pub adversary: Cell,
    pub action: Action,
    pub next_agent: Cell,
    pub next_adversary: Option<Cell>,
}

/// Count tables of one bootstrap member.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DynamicsMember {
    agent_counts: BTreeMap<AgentContext, [u64; 5]>,
    adversary_counts: BTreeMap<AdversaryContext, [u64; 5]>,
}

impl DynamicsMember {
    fn record(&mut self, t: &Transition, grid_size: u8) {
        let agent_ctx = AgentContext::of(t.action, t.agent, grid_size);
        let agent_d = Displacement::between(t.agent, t.next_agent).expect("validated transition");
        self.agent_counts.entry(agent_ctx).or_default()[agent_d.index()] += 1;
        if let Some(next_adversary) = t.next_adversary {
            let ctx = AdversaryContext::of(t.next_agent, t.adversary, grid_size);
            let d = Displacement::between(t.adversary, next_adversary).expect("validated transition");
            self.adversary_counts.entry(ctx).or_default()[d.index()] += 1;
        }
    }
}

/// Categorical distribution over the five displacement targets of `base`.
/// `probs` is aligned to [`Displacement::ALL`]; off-grid targets have
/// probability zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellDist {
    pub base: Cell,
    pub probs: [f64; 5],
}

impl CellDist {
    pub fn cell(&self, i: usize, grid_size: u8) -> Option<Cell> {
        Displacement::ALL[i].apply(self.base, grid_size)
    }

    /// Most likely target; displacement order breaks exact ties.
    pub fn mode(&self, grid_size: u8) -> Cell {
        let mut best = 0;
        for i in 1..5 {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        self.cell(best, grid_size).expect("mode has positive probability")
    }

    /// Sample a target with one uniform draw.
    pub fn sample(&self, rng: &mut impl Rng, grid_size: u8) -> Cell {
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = None;
        for i in 0..5 {
            if self.probs[i] <= 0.0 {
                continue;
            }
            last_positive = Some(i);
            acc += self.probs[i];
            if draw < acc {
                return self.cell(i, grid_size).expect("positive-probability cells are on the grid");
            }
        }
        let i = last_positive.expect("distribution has positive mass");
        self.cell(i, grid_size).expect("positive-probability cells are on the grid")
    }
}

/// Factored next-state distribution: independent agent and adversary factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NextStateDist {
    pub agent: CellDist,
    pub adversary: CellDist,
}

impl NextStateDist {
    /// Sample next positions: agent first, then adversary.
    pub fn sample(&self, rng: &mut impl Rng, grid_size: u8) -> (Cell, Cell) {
        let agent = self.agent.sample(rng, grid_size);
        let adversary = self.adversary.sample(rng, grid_size);
        (agent, adversary)
    }

    /// Most likely next positions under each factor.
    pub fn mode(&self, grid_size: u8) -> (Cell, Cell) {
        (self.agent.mode(grid_size), self.adversary.mode(grid_size))
    }
}

/// Ensemble of bootstrap-fit dynamics members.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    grid_size: u8,
    alpha: f64,
    member_seeds: Vec<u64>,
    members: Vec<DynamicsMember>,
}

impl EnsembleModel {
    /// Fit `k` members, each on an independent bootstrap resample of
    /// `transitions` drawn from a seed derived from `seed`.
    pub fn fit(transitions: &[Transition], k: usize, alpha: f64, grid_size: u8, seed: u64) -> Result<EnsembleModel> {
        if k == 0 {
            return Err(Error::Config("ensemble size k must be positive".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Config(format!("smoothing alpha must be >= 0, got {alpha}")));
        }
        if grid_size < 2 {
            return Err(Error::Config(format!("grid_size must be at least 2, got {grid_size}")));
        }
        for (i, t) in transitions.iter().enumerate() {
            let cells_ok = t.agent.in_bounds(grid_size)
                && t.adversary.in_bounds(grid_size)
                && t.next_agent.in_bounds(grid_size)
                && t.next_adversary.map_or(true, |c| c.in_bounds(grid_size));
            if !cells_ok {
                return Err(Error::Data(format!("transition {i}: cell outside the {grid_size}x{grid_size} grid")));
            }
            if Displacement::between(t.agent, t.next_agent).is_none() {
                return Err(Error::Data(format!("transition {i}: agent moved more than one cell")));
            }
            if let Some(next) = t.next_adversary {
                if Displacement::between(t.adversary, next).is_none() {
                    return Err(Error::Data(format!("transition {i}: adversary moved more than one cell")));
                }
            }
        }

        let mut members = Vec::with_capacity(k);
        let mut member_seeds = Vec::with_capacity(k);
        for m in 0..k {
            let member_seed = derive_seed(seed, "model.member", m as u64);
            member_seeds.push(member_seed);
            let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
            let mut member = DynamicsMember::default();
            let n = transitions.len();
            for _ in 0..n {
                let t = &transitions[rng.random_range(0..n)];
                member.record(t, grid_size);
            }
            members.push(member);
        }
        Ok(EnsembleModel { grid_size, alpha, member_seeds, members })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn grid_size(&self) -> u8 {
        self.grid_size
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn member_seeds(&self) -> &[u64] {
        &self.member_seeds
    }

    fn check_member(&self, member: usize) -> Result<()> {
        if member >= self.members.len() {
            return Err(Error::Usage(format!(
                "member index {member} out of range for ensemble of {}",
                self.members.len()
            )));
        }
        Ok(())
    }

    /// Smoothed displacement distribution: Laplace `alpha` over the in-bounds
    /// displacements, off-grid displacements masked to zero. A context with
    /// no counts and `alpha == 0` falls back to uniform over in-bounds moves.
    fn conditional(counts: Option<&[u64; 5]>, boundary: BoundaryProfile, alpha: f64) -> [f64; 5] {
        let zero = [0u64; 5];
        let counts = counts.unwrap_or(&zero);
        let mut allowed = [false; 5];
        let mut n_allowed = 0u32;
        let mut total = 0u64;
        for (i, d) in Displacement::ALL.into_iter().enumerate() {
            if boundary.allows(d) {
                allowed[i] = true;
                n_allowed += 1;
                total += counts[i];
            }
        }
        let denom = total as f64 + alpha * n_allowed as f64;
        let mut probs = [0.0f64; 5];
        if denom == 0.0 {
            for i in 0..5 {
                if allowed[i] {
                    probs[i] = 1.0 / n_allowed as f64;
                }
            }
        } else {
            for i in 0..5 {
                if allowed[i] {
                    probs[i] = (counts[i] as f64 + alpha) / denom;
                }
            }
        }
        probs
    }

    /// One member's agent-factor conditional.
    pub fn agent_conditional(&self, member: usize, ctx: &AgentContext) -> Result<[f64; 5]> {
        self.check_member(member)?;
        Ok(Self::conditional(self.members[member].agent_counts.get(ctx), ctx.boundary, self.alpha))
    }

    /// One member's adversary-factor conditional.
    pub fn adversary_conditional(&self, member: usize, ctx: &AdversaryContext) -> Result<[f64; 5]> {
        self.check_member(member)?;
        Ok(Self::conditional(self.members[member].adversary_counts.get(ctx), ctx.boundary, self.alpha))
    }

    /// One member's factored next-state distribution. The adversary context
    /// is built against the member's most likely next agent position.
    pub fn predict(&self, member: usize, agent: Cell, adversary: Cell, action: Action) -> Result<NextStateDist> {
        self.check_member(member)?;
        if !agent.in_bounds(self.grid_size) || !adversary.in_bounds(self.grid_size) {
            return Err(Error::Usage("predict called with a cell outside the grid".into()));
        }
        let agent_ctx = AgentContext::of(action, agent, self.grid_size);
        let agent_probs = Self::conditional(
            self.members[member].agent_counts.get(&agent_ctx),
            agent_ctx.boundary,
            self.alpha,
        );
        let agent_dist = CellDist { base: agent, probs: agent_probs };
        let presumed_agent = agent_dist.mode(self.grid_size);
        let adv_ctx = AdversaryContext::of(presumed_agent, adversary, self.grid_size);
        let adv_probs = Self::conditional(
            self.members[member].adversary_counts.get(&adv_ctx),
            adv_ctx.boundary,
            self.alpha,
        );
        Ok(NextStateDist {
            agent: agent_dist,
            adversary: CellDist { base: adversary, probs: adv_probs },
        })
    }

    /// Ensemble-averaged next-state distribution (uniform over members).
    pub fn predict_mean(&self, agent: Cell, adversary: Cell, action: Action) -> Result<NextStateDist> {
        let mut agent_probs = [0.0f64; 5];
        let mut adv_probs = [0.0f64; 5];
        for m in 0..self.members.len() {
            let d = self.predict(m, agent, adversary, action)?;
            for i in 0..5 {
                agent_probs[i] += d.agent.probs[i];
                adv_probs[i] += d.adversary.probs[i];
            }
        }
        let k = self.members.len() as f64;
        for i in 0..5 {
            agent_probs[i] /= k;
            adv_probs[i] /= k;
        }
        Ok(NextStateDist {
            agent: CellDist { base: agent, probs: agent_probs },
            adversary: CellDist { base: adversary, probs: adv_probs },
        })
    }

    /// Write the ensemble as a line-based text artifact. Counts are exact
    /// integers, so `load` recovers the model bit for bit.
    pub fn save(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut out = String::new();
        out.push_str("abm-dynamics v1\n");
        out.push_str(&format!("config_hash {config_hash}\n"));
        out.push_str(&format!("grid_size {}\n", self.grid_size));
        out.push_str(&format!("k {}\n", self.members.len()));
        out.push_str(&format!("alpha {}\n", fmt_f64(self.alpha)));
        for (m, member) in self.members.iter().enumerate() {
            out.push_str(&format!("member {m} seed {}\n", self.member_seeds[m]));
            for (ctx, counts) in &member.agent_counts {
                out.push_str(&format!("a {} {}", ctx.action.code(), ctx.boundary.bits()));
                for c in counts {
                    out.push_str(&format!(" {c}"));
                }
                out.push('\n');
            }
            for (ctx, counts) in &member.adversary_counts {
                out.push_str(&format!("v {} {} {}", ctx.sign_x, ctx.sign_y, ctx.boundary.bits()));
                for c in counts {
                    out.push_str(&format!(" {c}"));
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Read a saved ensemble; returns the model and the config hash stamped
    /// into the file.
    pub fn load(path: &Path) -> Result<(EnsembleModel, String)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };

        let mut lines = text.lines().enumerate();
        let mut next_line = |expected: &str| {
            lines
                .next()
                .ok_or_else(|| parse_err(0, format!("file ended before {expected}")))
        };

        let (n, header) = next_line("the format header")?;
        if header != "abm-dynamics v1" {
            return Err(parse_err(n + 1, format!("unrecognized header {header:?}")));
        }
        let mut read_field = |name: &str| -> Result<(usize, String)> {
            let (n, line) = next_line(name)?;
            let rest = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| parse_err(n + 1, format!("expected `{name} ...`, got {line:?}")))?;
            Ok((n, rest.to_string()))
        };
        let (_, config_hash) = read_field("config_hash")?;
        let (n, g) = read_field("grid_size")?;
        let grid_size: u8 = g.parse().map_err(|_| parse_err(n + 1, format!("bad grid_size {g:?}")))?;
        let (n, k_text) = read_field("k")?;
        let k: usize = k_text.parse().map_err(|_| parse_err(n + 1, format!("bad k {k_text:?}")))?;
        let (n, alpha_text) = read_field("alpha")?;
        let alpha: f64 = alpha_text.parse().map_err(|_| parse_err(n + 1, format!("bad alpha {alpha_text:?}")))?;

        let mut members: Vec<DynamicsMember> = Vec::new();
        let mut member_seeds: Vec<u64> = Vec::new();
        let mut saw_end = false;
        for (n, line) in lines {
            let line_no = n + 1;
            if line == "end" {
                saw_end = true;
                continue;
            }
            if saw_end && !line.is_empty() {
                return Err(parse_err(line_no, "content after end marker".into()));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.first().copied() {
                Some("member") => {
                    if fields.len() != 4 || fields[2] != "seed" {
                        return Err(parse_err(line_no, format!("malformed member line {line:?}")));
                    }
                    let idx: usize = fields[1]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad member index {:?}", fields[1])))?;
                    if idx != members.len() {
                        return Err(parse_err(line_no, format!("member {idx} out of order")));
                    }
                    let seed: u64 = fields[3]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad member seed {:?}", fields[3])))?;
                    members.push(DynamicsMember::default());
                    member_seeds.push(seed);
                }
                Some("a") => {
                    let member = members
                        .last_mut()
                        .ok_or_else(|| parse_err(line_no, "count line before any member header".into()))?;
                    if fields.len() != 8 {
                        return Err(parse_err(line_no, format!("malformed agent count line {line:?}")));
                    }
                    let action = fields[1]
                        .chars()
                        .next()
                        .and_then(Action::from_code)
                        .filter(|_| fields[1].len() == 1)
                        .ok_or_else(|| parse_err(line_no, format!("bad action code {:?}", fields[1])))?;
                    let bits: u8 = fields[2]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad boundary bits {:?}", fields[2])))?;
                    let boundary = BoundaryProfile::from_bits(bits)
                        .map_err(|e| parse_err(line_no, e.to_string()))?;
                    let counts = parse_counts(&fields[3..])
                        .map_err(|msg| parse_err(line_no, msg))?;
                    let ctx = AgentContext { action, boundary };
                    if member.agent_counts.insert(ctx, counts).is_some() {
                        return Err(parse_err(line_no, "duplicate agent context".into()));
                    }
                }
                Some("v") => {
                    let member = members
                        .last_mut()
                        .ok_or_else(|| parse_err(line_no, "count line before any member header".into()))?;
                    if fields.len() != 9 {
                        return Err(parse_err(line_no, format!("malformed adversary count line {line:?}")));
                    }
                    let sign_x: i8 = fields[1]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad sign {:?}", fields[1])))?;
                    let sign_y: i8 = fields[2]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad sign {:?}", fields[2])))?;
                    if !(-1..=1).contains(&sign_x) || !(-1..=1).contains(&sign_y) {
                        return Err(parse_err(line_no, "signs must be -1, 0, or 1".into()));
                    }
                    let bits: u8 = fields[3]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad boundary bits {:?}", fields[3])))?;
                    let boundary = BoundaryProfile::from_bits(bits)
                        .map_err(|e| parse_err(line_no, e.to_string()))?;
                    let counts = parse_counts(&fields[4..])
                        .map_err(|msg| parse_err(line_no, msg))?;
                    let ctx = AdversaryContext { sign_x, sign_y, boundary };
                    if member.adversary_counts.insert(ctx, counts).is_some() {
                        return Err(parse_err(line_no, "duplicate adversary context".into()));
                    }
                }
                Some(other) => {
                    return Err(parse_err(line_no, format!("unrecognized record {other:?}")));
                }
                None => {}
            }
        }
        if !saw_end {
            return Err(parse_err(text.lines().count(), "missing end marker (truncated file?)".into()));
        }
        if members.len() != k {
            return Err(Error::Data(format!(
                "model file declares k={k} but contains {} members",
                members.len()
            )));
        }
        Ok((EnsembleModel { grid_size, alpha, member_seeds, members }, config_hash))
    }
}

fn parse_counts(fields: &[&str]) -> std::result::Result<[u64; 5], String> {
    let mut counts = [0u64; 5];
    for (i, f) in fields.iter().enumerate() {
        counts[i] = f.parse().map_err(|_| format!("bad count {f:?}"))?;
    }
    Ok(counts)
}
