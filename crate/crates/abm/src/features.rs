//! Per-state feature extraction: raw coordinates, pairwise Manhattan
//! distances, and binary distance comparisons over six role entities.
//!
//! The three fuel roles (closest to agent, closest to goal, furthest from
//! adversary) are recomputed from the uncollected fuels each step, so the
//! same schema describes every state regardless of which fuels remain.

use std::sync::OnceLock;

use crate::env::{Cell, GridState};
use crate::seeding::short_hash;

/// Coordinate written for a role that has no entity (all fuels collected).
pub const NULL_COORD: f64 = -1.0;
/// Distance written for a pair involving a null role.
pub const NULL_DISTANCE: f64 = 99.0;

/// Number of features in the schema.
pub const FEATURE_COUNT: usize = 132;

const ENTITY_NAMES: [&str; 6] = ["agent", "adversary", "goal", "fuel_ca", "fuel_cg", "fuel_fa"];

/// What a feature measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    /// Raw x or y of one entity.
    Coordinate,
    /// Manhattan distance between two entities.
    Distance,
    /// 1.0 when one pairwise distance strictly exceeds another, else 0.0.
    Comparison,
}

/// Ordered feature names and kinds; identical for every state.
#[derive(Debug)]
pub struct FeatureSchema {
    entries: Vec<(String, FeatureKind)>,
    /// Entity index pairs behind each distance feature.
    distance_pairs: Vec<(usize, usize)>,
    /// Distance index pairs behind each comparison feature.
    comparison_pairs: Vec<(usize, usize)>,
}

impl FeatureSchema {
    fn build() -> FeatureSchema {
        let mut entries = Vec::with_capacity(FEATURE_COUNT);
        for name in ENTITY_NAMES {
            entries.push((format!("{name}_x"), FeatureKind::Coordinate));
            entries.push((format!("{name}_y"), FeatureKind::Coordinate));
        }
        let mut distance_pairs = Vec::new();
        let mut distance_names = Vec::new();
        for i in 0..ENTITY_NAMES.len() {
            for j in (i + 1)..ENTITY_NAMES.len() {
                let name = format!("d_{}_{}", ENTITY_NAMES[i], ENTITY_NAMES[j]);
                distance_names.push(name.clone());
                entries.push((name, FeatureKind::Distance));
                distance_pairs.push((i, j));
            }
        }
        let mut comparison_pairs = Vec::new();
        for a in 0..distance_names.len() {
            for b in (a + 1)..distance_names.len() {
                let name = format!("{}_gt_{}", distance_names[a], distance_names[b]);
                entries.push((name, FeatureKind::Comparison));
                comparison_pairs.push((a, b));
            }
        }
        debug_assert_eq!(entries.len(), FEATURE_COUNT);
        FeatureSchema { entries, distance_pairs, comparison_pairs }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn kind(&self, index: usize) -> FeatureKind {
        self.entries[index].1
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    /// Fingerprint of the ordered feature names; stamped into tree artifacts
    /// so a tree is never applied to a matrix with a different layout.
    pub fn hash(&self) -> String {
        let joined = self.entries.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join("\n");
        short_hash(joined.as_bytes())
    }
}

/// The shared schema instance.
pub fn schema() -> &'static FeatureSchema {
    static SCHEMA: OnceLock<FeatureSchema> = OnceLock::new();
    SCHEMA.get_or_init(FeatureSchema::build)
}

/// Which fuel (index into `state.fuels`) currently fills each fuel role.
/// `None` when no uncollected fuel remains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoleAssignment {
    pub fuel_ca: Option<usize>,
    pub fuel_cg: Option<usize>,
    pub fuel_fa: Option<usize>,
}

/// Assign the three fuel roles over the uncollected fuels of `state`.
/// Distances are Manhattan; ties go to the lowest fuel index.
pub fn assign_roles(state: &GridState) -> RoleAssignment {
    let mut fuel_ca = None;
    let mut fuel_cg = None;
    let mut fuel_fa = None;
    let mut best_ca = u32::MAX;
    let mut best_cg = u32::MAX;
    let mut best_fa = 0u32;
    for (i, fuel) in state.fuels.iter().enumerate() {
        if fuel.collected {
            continue;
        }
        let d_agent = fuel.cell.manhattan(state.agent);
        let d_goal = fuel.cell.manhattan(state.goal);
        let d_adversary = fuel.cell.manhattan(state.adversary);
        if d_agent < best_ca {
            best_ca = d_agent;
            fuel_ca = Some(i);
        }
        if d_goal < best_cg {
            best_cg = d_goal;
            fuel_cg = Some(i);
        }
        if fuel_fa.is_none() || d_adversary > best_fa {
            best_fa = d_adversary;
            fuel_fa = Some(i);
        }
    }
    RoleAssignment { fuel_ca, fuel_cg, fuel_fa }
}

/// Extract the full feature vector for one state, in schema order.
pub fn extract(state: &GridState) -> Vec<f64> {
    let roles = assign_roles(state);
    let fuel_cell = |role: Option<usize>| role.map(|i| state.fuels[i].cell);
    let entities: [Option<Cell>; 6] = [
        Some(state.agent),
        Some(state.adversary),
        Some(state.goal),
        fuel_cell(roles.fuel_ca),
        fuel_cell(roles.fuel_cg),
        fuel_cell(roles.fuel_fa),
    ];

    let schema = schema();
    let mut out = Vec::with_capacity(FEATURE_COUNT);
    for entity in &entities {
        match entity {
            Some(cell) => {
                out.push(cell.x as f64);
                out.push(cell.y as f64);
            }
            None => {
                out.push(NULL_COORD);
                out.push(NULL_COORD);
            }
        }
    }
    let mut distances = Vec::with_capacity(schema.distance_pairs.len());
    for &(i, j) in &schema.distance_pairs {
        let d = match (entities[i], entities[j]) {
            (Some(a), Some(b)) => a.manhattan(b) as f64,
            _ => NULL_DISTANCE,
        };
        distances.push(d);
        out.push(d);
    }
    for &(a, b) in &schema.comparison_pairs {
        out.push(if distances[a] > distances[b] { 1.0 } else { 0.0 });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Fuel;
    use proptest::prelude::*;

    fn state(agent: (u8, u8), adversary: (u8, u8), goal: (u8, u8), fuels: &[(u8, u8)]) -> GridState {
        GridState {
            agent: Cell::new(agent.0, agent.1),
            adversary: Cell::new(adversary.0, adversary.1),
            goal: Cell::new(goal.0, goal.1),
            fuels: fuels
                .iter()
                .map(|&(x, y)| Fuel { cell: Cell::new(x, y), collected: false })
                .collect(),
            t: 0,
        }
    }

    fn get(values: &[f64], name: &str) -> f64 {
        values[schema().index_of(name).unwrap_or_else(|| panic!("no feature {name}"))]
    }

    #[test]
    fn schema_has_132_uniquely_named_entries() {
        let s = schema();
        assert_eq!(s.len(), FEATURE_COUNT);
        assert_eq!(s.name(0), "agent_x");
        assert_eq!(s.kind(0), FeatureKind::Coordinate);
        let mut names: Vec<&str> = s.names().collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), FEATURE_COUNT);
        // 12 coordinates, 15 distances, 105 comparisons.
        let count = |kind| (0..s.len()).filter(|&i| s.kind(i) == kind).count();
        assert_eq!(count(FeatureKind::Coordinate), 12);
        assert_eq!(count(FeatureKind::Distance), 15);
        assert_eq!(count(FeatureKind::Comparison), 105);
    }

    #[test]
    fn schema_hash_is_stable() {
        assert_eq!(schema().hash(), schema().hash());
        assert_eq!(schema().hash().len(), 16);
    }

    #[test]
    fn one_fuel_can_hold_all_three_roles() {
        let s = state((0, 0), (7, 7), (0, 7), &[(0, 1), (4, 4), (7, 0)]);
        // Distances to agent: 1, 8, 7 -> closest is fuel 0.
        // Distances to goal: 6, 7, 14 -> closest is fuel 0.
        // Distances to adversary: 13, 6, 7 -> furthest is fuel 0.
        let roles = assign_roles(&s);
        assert_eq!(roles.fuel_ca, Some(0));
        assert_eq!(roles.fuel_cg, Some(0));
        assert_eq!(roles.fuel_fa, Some(0));

        let v = extract(&s);
        assert_eq!(v.len(), FEATURE_COUNT);
        assert_eq!(get(&v, "agent_x"), 0.0);
        assert_eq!(get(&v, "agent_y"), 0.0);
        assert_eq!(get(&v, "fuel_ca_x"), 0.0);
        assert_eq!(get(&v, "fuel_ca_y"), 1.0);
        assert_eq!(get(&v, "d_agent_adversary"), 14.0);
        assert_eq!(get(&v, "d_agent_goal"), 7.0);
        assert_eq!(get(&v, "d_agent_fuel_ca"), 1.0);
        assert_eq!(get(&v, "d_fuel_ca_fuel_cg"), 0.0); // same fuel
        assert_eq!(get(&v, "d_agent_adversary_gt_d_agent_goal"), 1.0);
        // Comparisons exist only for distance pairs in schema order.
        assert_eq!(schema().index_of("d_agent_goal_gt_d_agent_adversary"), None);
    }

    #[test]
    fn roles_skip_collected_fuels() {
        let mut s = state((0, 0), (7, 7), (0, 7), &[(0, 1), (4, 4), (7, 0)]);
        s.fuels[0].collected = true;
        let roles = assign_roles(&s);
        assert_eq!(roles.fuel_ca, Some(2)); // distances to agent: 8 vs 7
        assert_eq!(roles.fuel_cg, Some(1)); // distances to goal: 7 vs 14
        assert_eq!(roles.fuel_fa, Some(2)); // distances to adversary: 6 vs 7
    }

    #[test]
    fn role_ties_go_to_the_lowest_fuel_index() {
        // Fuels 0 and 1 both at distance 2 from the agent.
        let s = state((3, 3), (0, 7), (7, 7), &[(3, 5), (5, 3), (0, 0)]);
        let roles = assign_roles(&s);
        assert_eq!(roles.fuel_ca, Some(0));
        // Furthest from adversary at (0,7): distances 5, 9, 7 -> fuel 1.
        assert_eq!(roles.fuel_fa, Some(1));
    }

    #[test]
    fn null_roles_use_sentinel_coordinates_and_distances() {
        let mut s = state((2, 2), (6, 6), (0, 7), &[(1, 1), (3, 3), (5, 5)]);
        for fuel in &mut s.fuels {
            fuel.collected = true;
        }
        let roles = assign_roles(&s);
        assert_eq!(roles, RoleAssignment { fuel_ca: None, fuel_cg: None, fuel_fa: None });

        let v = extract(&s);
        assert_eq!(get(&v, "fuel_ca_x"), NULL_COORD);
        assert_eq!(get(&v, "fuel_fa_y"), NULL_COORD);
        assert_eq!(get(&v, "d_agent_fuel_ca"), NULL_DISTANCE);
        assert_eq!(get(&v, "d_fuel_ca_fuel_cg"), NULL_DISTANCE);
        // Distances between present entities are unaffected.
        assert_eq!(get(&v, "d_agent_adversary"), 8.0);
        // 99 > 99 is false; a real distance never exceeds the sentinel.
        assert_eq!(get(&v, "d_agent_fuel_ca_gt_d_fuel_ca_fuel_cg"), 0.0);
        assert_eq!(get(&v, "d_agent_adversary_gt_d_agent_fuel_ca"), 0.0);
    }

    #[test]
    fn extraction_is_deterministic() {
        let s = state((1, 2), (5, 6), (7, 0), &[(2, 2), (3, 4), (6, 1)]);
        assert_eq!(extract(&s), extract(&s));
    }

    proptest! {
        #[test]
        fn comparisons_agree_with_distances(
            coords in proptest::collection::vec((0u8..8, 0u8..8), 6),
            collected in proptest::collection::vec(any::<bool>(), 3),
        ) {
            let mut s = state(
                (coords[0].0, coords[0].1),
                (coords[1].0, coords[1].1),
                (coords[2].0, coords[2].1),
                &[
                    (coords[3].0, coords[3].1),
                    (coords[4].0, coords[4].1),
                    (coords[5].0, coords[5].1),
                ],
            );
            for (fuel, &c) in s.fuels.iter_mut().zip(&collected) {
                fuel.collected = c;
            }
            let v = extract(&s);
            prop_assert_eq!(v.len(), FEATURE_COUNT);
            let sch = schema();
            // Recheck every comparison against the two distances it names.
            for i in 0..sch.len() {
                if sch.kind(i) != FeatureKind::Comparison {
                    continue;
                }
                let name = sch.name(i);
                let split_at = name.find("_gt_").unwrap();
                let left = &name[..split_at];
                let right = &name[split_at + 4..];
                let expected = if v[sch.index_of(left).unwrap()] > v[sch.index_of(right).unwrap()] {
                    1.0
                } else {
                    0.0
                };
                prop_assert_eq!(v[i], expected, "feature {}", name);
            }
        }
    }
}
