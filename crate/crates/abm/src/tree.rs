//! Decision-tree fitting for behavior prediction: Gini-impurity CART over a
//! tabular dataset, grouped train/test splitting, accuracy metrics, and the
//! rule-list and Graphviz views a fitted tree explains itself with.
//!
//! The fit is deterministic down to tie-breaking. Candidate splits are
//! scanned feature-ascending, then threshold-ascending, and a candidate
//! replaces the incumbent only when its impurity decrease is strictly
//! greater, so the first of any tied set wins. All impurities are computed
//! fresh from integer label counts in ascending label order as
//! `1 - sum((count/n)^2)`, and a split's decrease is evaluated exactly as
//! `gini(parent) - (n_left/n)*gini(left) - (n_right/n)*gini(right)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major tabular data with one label and one group id per row. Groups
/// tie rows to their source episode so splits never leak an episode across
/// the train/test boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    width: usize,
    features: Vec<f64>,
    labels: Vec<u32>,
    groups: Vec<u64>,
}

impl Dataset {
    pub fn new(width: usize) -> Dataset {
        Dataset { width, features: Vec::new(), labels: Vec::new(), groups: Vec::new() }
    }

    pub fn push_row(&mut self, row: &[f64], label: u32, group: u64) {
        assert_eq!(row.len(), self.width, "row width mismatch");
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.groups.push(group);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.width + feature]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn group(&self, i: usize) -> u64 {
        self.groups[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Stopping and quality thresholds for tree growth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: u32,
    pub min_impurity_decrease: f64,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> TreeParams {
        TreeParams {
            max_depth: 5,
            min_impurity_decrease: 0.005,
            min_samples_leaf: 20,
            min_samples_split: 40,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if !(self.min_impurity_decrease > 0.0) {
            return Err(Error::Config("min_impurity_decrease must be positive".into()));
        }
        Ok(())
    }
}

/// One node of a fitted tree, stored in preorder: children always follow
/// their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        gini: f64,
    },
    Leaf {
        label: u32,
        samples: usize,
        counts: Vec<(u32, usize)>,
        depth: u32,
    },
}

/// A fitted classification tree. Rows with `value <= threshold` go left.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub params: TreeParams,
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

fn gini(counts: &BTreeMap<u32, usize>, n: usize) -> f64 {
    let n = n as f64;
    let mut sum = 0.0;
    for &c in counts.values() {
        let p = c as f64 / n;
        sum += p * p;
    }
    1.0 - sum
}

fn majority_label(counts: &BTreeMap<u32, usize>) -> u32 {
    let mut best = None;
    let mut best_count = 0;
    for (&label, &count) in counts {
        if count > best_count {
            best = Some(label);
            best_count = count;
        }
    }
    best.expect("leaf has rows")
}

impl Tree {
    /// Fit a tree on the given rows of `data`. The result depends only on
    /// the multiset of rows, never on their order.
    pub fn fit(data: &Dataset, rows: &[usize], params: &TreeParams) -> Result<Tree> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::Data("cannot fit a tree on zero rows".into()));
        }
        if data.width() == 0 {
            return Err(Error::Data("cannot fit a tree on zero features".into()));
        }
        let mut nodes = Vec::new();
        build(data, rows.to_vec(), 0, params, &mut nodes);
        Ok(Tree { params: params.clone(), n_features: data.width(), nodes })
    }

    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, .. } => return *label,
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, data: &Dataset, rows: &[usize]) -> Vec<u32> {
        rows.iter().map(|&r| self.predict_row(data.row(r))).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> u32 {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { depth, .. } => Some(*depth),
                Node::Split { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// One rule per leaf: the conjunction of edge predicates from the root,
    /// the leaf's prediction, and how many training rows of which labels
    /// landed there.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk_conditions(0, &mut path, &mut out);
        out
    }

    fn walk_conditions(&self, at: usize, path: &mut Vec<Predicate>, out: &mut Vec<Condition>) {
        match &self.nodes[at] {
            Node::Leaf { label, samples, counts, .. } => {
                let on_label = counts
                    .iter()
                    .find(|(l, _)| l == label)
                    .map(|&(_, c)| c)
                    .unwrap_or(0);
                out.push(Condition {
                    predicates: path.clone(),
                    label: *label,
                    support: *samples,
                    counts: counts.clone(),
                    purity: on_label as f64 / *samples as f64,
                });
            }
            Node::Split { feature, threshold, left, right, .. } => {
                path.push(Predicate { feature: *feature, op: Op::Le, threshold: *threshold });
                self.walk_conditions(*left, path, out);
                path.pop();
                path.push(Predicate { feature: *feature, op: Op::Gt, threshold: *threshold });
                self.walk_conditions(*right, path, out);
                path.pop();
            }
        }
    }

    /// Graphviz rendering with yes/no edges; `class_name` maps labels to
    /// display names.
    pub fn to_dot(&self, feature_names: &[String], class_name: &dyn Fn(u32) -> String) -> String {
        let mut s = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { feature, threshold, samples, gini, .. } => {
                    let name = feature_names
                        .get(*feature)
                        .cloned()
                        .unwrap_or_else(|| format!("f{feature}"));
                    s.push_str(&format!(
                        "  n{i} [label=\"{name} <= {threshold:.2}\\nsamples = {samples}\\ngini = {gini:.3}\"];\n"
                    ));
                }
                Node::Leaf { label, samples, counts, .. } => {
                    let on_label = counts
                        .iter()
                        .find(|(l, _)| l == label)
                        .map(|&(_, c)| c)
                        .unwrap_or(0);
                    let purity = on_label as f64 / *samples as f64;
                    s.push_str(&format!(
                        "  n{i} [label=\"{}\\nsamples = {samples}\\npurity = {purity:.3}\"];\n",
                        class_name(*label)
                    ));
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                s.push_str(&format!("  n{i} -> n{left} [label=\"yes\"];\n"));
                s.push_str(&format!("  n{i} -> n{right} [label=\"no\"];\n"));
            }
        }
        s.push_str("}\n");
        s
    }
}

fn build(
    data: &Dataset,
    rows: Vec<usize>,
    depth: u32,
    params: &TreeParams,
    nodes: &mut Vec<Node>,
) -> usize {
    let n = rows.len();
    let mut counts = BTreeMap::new();
    for &r in &rows {
        *counts.entry(data.label(r)).or_insert(0usize) += 1;
    }
    let node_gini = gini(&counts, n);

    let idx = nodes.len();
    nodes.push(Node::Leaf {
        label: majority_label(&counts),
        samples: n,
        counts: counts.iter().map(|(&l, &c)| (l, c)).collect(),
        depth,
    });

    if depth >= params.max_depth || n < params.min_samples_split {
        return idx;
    }
    let Some(best) = best_split(data, &rows, &counts, node_gini, params) else {
        return idx;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| data.value(r, best.feature) <= best.threshold);
    let left = build(data, left_rows, depth + 1, params, nodes);
    let right = build(data, right_rows, depth + 1, params, nodes);
    nodes[idx] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
        samples: n,
        gini: node_gini,
    };
    idx
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
}

/// The best admissible split of these rows, or `None`. Admissible means both
/// children hold at least `min_samples_leaf` rows and the impurity decrease
/// reaches `min_impurity_decrease`. Thresholds are midpoints between
/// consecutive distinct values, `(lo + hi) / 2`.
fn best_split(
    data: &Dataset,
    rows: &[usize],
    counts: &BTreeMap<u32, usize>,
    node_gini: f64,
    params: &TreeParams,
) -> Option<SplitChoice> {
    let n = rows.len();
    let mut best: Option<SplitChoice> = None;
    let mut best_delta = f64::NEG_INFINITY;
    let mut sorted: Vec<(f64, u32)> = Vec::with_capacity(n);
    for feature in 0..data.width() {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data.value(r, feature), data.label(r))));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut left: BTreeMap<u32, usize> = BTreeMap::new();
        let mut right = counts.clone();
        for i in 0..n - 1 {
            let (value, label) = sorted[i];
            *left.entry(label).or_insert(0) += 1;
            let r = right.get_mut(&label).expect("label present on the right");
            *r -= 1;
            if *r == 0 {
                right.remove(&label);
            }
            let next_value = sorted[i + 1].0;
            if value >= next_value {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < params.min_samples_leaf || n_right < params.min_samples_leaf {
                continue;
            }
            let threshold = (value + next_value) / 2.0;
            let w_left = n_left as f64 / n as f64;
            let w_right = n_right as f64 / n as f64;
            let delta = node_gini - w_left * gini(&left, n_left) - w_right * gini(&right, n_right);
            if delta > best_delta {
                best_delta = delta;
                best = Some(SplitChoice { feature, threshold });
            }
        }
    }
    (best_delta >= params.min_impurity_decrease).then_some(()).and(best)
}

/// A comparison a tree edge applies to one feature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Le,
    Gt,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Predicate {
    pub feature: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Predicate {
    pub fn matches(&self, row: &[f64]) -> bool {
        match self.op {
            Op::Le => row[self.feature] <= self.threshold,
            Op::Gt => row[self.feature] > self.threshold,
        }
    }

    pub fn render(&self, feature_names: &[String]) -> String {
        let name = self
            .feature_name(feature_names)
            .unwrap_or_else(|| format!("f{}", self.feature));
        let op = match self.op {
            Op::Le => "<=",
            Op::Gt => ">",
        };
        format!("{name} {op} {:.2}", self.threshold)
    }

    fn feature_name(&self, feature_names: &[String]) -> Option<String> {
        feature_names.get(self.feature).cloned()
    }
}

/// A leaf rule: if every predicate holds, predict `label`. `support` and
/// `counts` describe exactly the training rows the leaf absorbed.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub predicates: Vec<Predicate>,
    pub label: u32,
    pub support: usize,
    pub counts: Vec<(u32, usize)>,
    pub purity: f64,
}

impl Condition {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.predicates.iter().all(|p| p.matches(row))
    }
}

/// Classification quality: raw accuracy and the mean of per-class recalls
/// over the classes that actually occur.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
}

pub fn metrics(predicted: &[u32], actual: &[u32]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Usage("metrics need equally many predictions and labels".into()));
    }
    if actual.is_empty() {
        return Err(Error::Usage("metrics need at least one sample".into()));
    }
    let n = actual.len() as f64;
    let correct = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    let mut totals: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&p, &a) in predicted.iter().zip(actual) {
        let entry = totals.entry(a).or_insert((0, 0));
        entry.0 += 1;
        if p == a {
            entry.1 += 1;
        }
    }
    let recall_sum: f64 = totals.values().map(|&(t, c)| c as f64 / t as f64).sum();
    Ok(Metrics {
        accuracy: correct as f64 / n,
        balanced_accuracy: recall_sum / totals.len() as f64,
    })
}

/// A train/test partition that keeps every group (episode) wholly on one
/// side.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSplit {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub train_groups: Vec<u64>,
    pub test_groups: Vec<u64>,
}

/// Split by group id: the unique ids are shuffled with the given seed and
/// `test_fraction` of them (rounded, at least one, never all) become the
/// test side.
pub fn group_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<GroupSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let unique: BTreeSet<u64> = (0..data.len()).map(|i| data.group(i)).collect();
    let mut ids: Vec<u64> = unique.into_iter().collect();
    if ids.len() < 2 {
        return Err(Error::Data("group split needs at least two groups".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..ids.len()).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let mut n_test = (ids.len() as f64 * test_fraction).round() as usize;
    n_test = n_test.clamp(1, ids.len() - 1);
    let test_groups: BTreeSet<u64> = ids[..n_test].iter().copied().collect();
    let mut split = GroupSplit {
        train_rows: Vec::new(),
        test_rows: Vec::new(),
        train_groups: ids[n_test..].to_vec(),
        test_groups: test_groups.iter().copied().collect(),
    };
    split.train_groups.sort_unstable();
    for i in 0..data.len() {
        if test_groups.contains(&data.group(i)) {
            split.test_rows.push(i);
        } else {
            split.train_rows.push(i);
        }
    }
    Ok(split)
}

/// The on-disk form of a fitted tree plus the provenance needed to interpret
/// it: which task, which data source, and the config and feature-schema
/// fingerprints it was built under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeArtifact {
    pub format: String,
    pub version: u32,
    pub task: String,
    pub trained_on: String,
    pub config_hash: String,
    pub schema_hash: String,
    pub params: TreeParams,
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

pub const TREE_FORMAT: &str = "abm-tree";
pub const TREE_VERSION: u32 = 1;

impl TreeArtifact {
    pub fn from_tree(
        tree: &Tree,
        task: &str,
        trained_on: &str,
        config_hash: &str,
        schema_hash: &str,
    ) -> TreeArtifact {
        TreeArtifact {
            format: TREE_FORMAT.to_string(),
            version: TREE_VERSION,
            task: task.to_string(),
            trained_on: trained_on.to_string(),
            config_hash: config_hash.to_string(),
            schema_hash: schema_hash.to_string(),
            params: tree.params.clone(),
            n_features: tree.n_features,
            nodes: tree.nodes.clone(),
        }
    }

    pub fn tree(&self) -> Tree {
        Tree { params: self.params.clone(), n_features: self.n_features, nodes: self.nodes.clone() }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("tree serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TreeArtifact> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: TreeArtifact = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if artifact.format != TREE_FORMAT || artifact.version != TREE_VERSION {
            return Err(Error::Data(format!(
                "{} is not a {TREE_FORMAT} v{TREE_VERSION} file",
                path.display()
            )));
        }
        if artifact.nodes.is_empty() {
            return Err(Error::Data(format!("{} holds an empty tree", path.display())));
        }
        for (i, node) in artifact.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                let ordered = *left > i && *right > i;
                if !ordered || *left >= artifact.nodes.len() || *right >= artifact.nodes.len() {
                    return Err(Error::Data(format!(
                        "{} has a malformed node reference at node {i}",
                        path.display()
                    )));
                }
            }
        }
        Ok(artifact)
    }
}
