//! Post-hoc behavior labels: each step of an episode is tagged with the
//! milestone the agent reaches next (a fuel pickup, the goal, or capture)
//! and, for fuel pickups, with the role that fuel plays relative to the
//! agent, the goal, and the adversary at the labeled step.

use crate::env::Status;
use crate::features::assign_roles;
use crate::rollout::Episode;

/// Strategy label values.
pub const LABEL_REACH_GOAL: u32 = 1;
pub const LABEL_GET_CAUGHT: u32 = 2;
pub const LABEL_UNTERMINATED: u32 = 3;
pub const LABEL_FUEL_OTHER: u32 = 4;
pub const LABEL_FUEL_CLOSEST_AGENT: u32 = 5;
pub const LABEL_FUEL_CLOSEST_GOAL: u32 = 6;
pub const LABEL_FUEL_FURTHEST_ADVERSARY: u32 = 7;

pub const STRATEGY_LABELS: [u32; 7] = [1, 2, 3, 4, 5, 6, 7];

/// Outcome label values.
pub const OUTCOME_FAILURE: u32 = 0;
pub const OUTCOME_SUCCESS: u32 = 1;

/// Human-readable name for a strategy label.
pub fn strategy_label_name(label: u32) -> &'static str {
    match label {
        LABEL_REACH_GOAL => "reach_goal",
        LABEL_GET_CAUGHT => "get_caught",
        LABEL_UNTERMINATED => "unterminated",
        LABEL_FUEL_OTHER => "collect_fuel",
        LABEL_FUEL_CLOSEST_AGENT => "collect_fuel_closest_to_agent",
        LABEL_FUEL_CLOSEST_GOAL => "collect_fuel_closest_to_goal",
        LABEL_FUEL_FURTHEST_ADVERSARY => "collect_fuel_furthest_from_adversary",
        _ => "unknown",
    }
}

/// Human-readable name for an outcome label.
pub fn outcome_label_name(label: u32) -> &'static str {
    match label {
        OUTCOME_SUCCESS => "success",
        _ => "failure",
    }
}

/// An event the labeling keys on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Milestone {
    /// Fuel `i` was collected during the step.
    Fuel(usize),
    /// The episode ended with the agent on the goal.
    Goal,
    /// The episode ended with the agent captured.
    Caught,
}

impl Milestone {
    /// Rank among milestones firing at the same step: capture dominates the
    /// goal, which dominates fuel pickups.
    fn priority(self) -> usize {
        match self {
            Milestone::Caught => 0,
            Milestone::Goal => 1,
            Milestone::Fuel(i) => 2 + i,
        }
    }
}

/// All milestones of an episode as `(step, milestone)`, sorted by step and
/// then priority. A capture on a fuel-pickup step lists the capture first.
pub fn milestones(ep: &Episode) -> Vec<(usize, Milestone)> {
    let mut out = Vec::new();
    for (i, at) in ep.fuel_collected_at().iter().enumerate() {
        if let Some(t) = at {
            out.push((*t as usize, Milestone::Fuel(i)));
        }
    }
    let last = ep.len() - 1;
    match ep.status {
        Status::GoalReached => out.push((last, Milestone::Goal)),
        Status::Caught => out.push((last, Milestone::Caught)),
        Status::TimedOut | Status::Running => {}
    }
    out.sort_by_key(|&(t, m)| (t, m.priority()));
    out
}

/// One strategy label per step.
///
/// Step `t` is labeled by the next milestone: the earliest milestone firing
/// at some step `t* >= t`, with capture dominating the goal dominating fuel
/// at equal `t*`. A goal milestone labels the step `reach_goal`, a capture
/// `get_caught`, and a fuel pickup is named by the role that fuel holds at
/// step `t` itself — closest to the agent, else closest to the goal, else
/// furthest from the adversary, else plain fuel collection. The role is
/// re-evaluated at every step, so a long approach to one fuel may switch
/// names mid-window as the other pieces move. Steps with no milestone ahead
/// of them are `unterminated`.
pub fn strategy_labels(ep: &Episode) -> Vec<u32> {
    let events = milestones(ep);
    let mut out = Vec::with_capacity(ep.len());
    for t in 0..ep.len() {
        let next = events.iter().find(|&&(at, _)| at >= t);
        let label = match next {
            None => LABEL_UNTERMINATED,
            Some(&(_, Milestone::Caught)) => LABEL_GET_CAUGHT,
            Some(&(_, Milestone::Goal)) => LABEL_REACH_GOAL,
            Some(&(_, Milestone::Fuel(i))) => {
                let roles = assign_roles(&ep.steps[t].state);
                if roles.fuel_ca == Some(i) {
                    LABEL_FUEL_CLOSEST_AGENT
                } else if roles.fuel_cg == Some(i) {
                    LABEL_FUEL_CLOSEST_GOAL
                } else if roles.fuel_fa == Some(i) {
                    LABEL_FUEL_FURTHEST_ADVERSARY
                } else {
                    LABEL_FUEL_OTHER
                }
            }
        };
        out.push(label);
    }
    out
}

/// The episode-level outcome: success exactly when the goal was reached.
/// Every step of the episode inherits it.
pub fn outcome_label(ep: &Episode) -> u32 {
    if ep.status == Status::GoalReached {
        OUTCOME_SUCCESS
    } else {
        OUTCOME_FAILURE
    }
}
