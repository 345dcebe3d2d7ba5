//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N ...: PASS` line with its measured values. Run with
//! `cargo test --test acceptance -- --nocapture` to see them all.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use abm::behavior::{outcome_label, strategy_labels};
use abm::env::{Action, Cell, EnvConfig, Fuel, GridState, Gridworld, Status};
use abm::features::{self, FEATURE_COUNT};
use abm::model::{AdversaryContext, Displacement, EnsembleModel};
use abm::pipeline::{self, PipelineConfig, Report};
use abm::planner::{FrozenAdversary, Mpc};
use abm::rollout::{
    collect_random_policy, imagine, transitions_from_episodes, EpStep, Episode, ImagineInit,
    InitMode, Source,
};
use abm::tree::{Dataset, Node, Tree, TreeParams};

/// The master seed every full-scale measurement in this suite uses.
const ACCEPTANCE_SEED: u64 = 7;

#[test]
fn criterion_1_feature_schema_has_exactly_132_features() {
    let schema = features::schema();
    assert_eq!(schema.len(), 132);
    assert_eq!(FEATURE_COUNT, 132);
    assert_eq!(schema.names().count(), 132);
    let state = Gridworld::new(EnvConfig::default()).unwrap().new_episode(1).unwrap();
    assert_eq!(features::extract(&state).len(), 132);
    println!("criterion 1 (feature count): PASS — schema and vectors have exactly 132 features");
}

#[test]
fn criterion_2_accuracy_bands_on_the_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig::default()
        .resolve(Some(ACCEPTANCE_SEED), Some(dir.path()))
        .unwrap();
    assert_eq!(config.data.n_real, 2000);
    assert_eq!(config.data.n_imagined, 2000);
    assert_eq!(config.planner.horizon, 5);

    let start = Instant::now();
    pipeline::run_all(&config).unwrap();
    let elapsed = start.elapsed();

    let report: Report = serde_json::from_str(
        &fs::read_to_string(dir.path().join(pipeline::REPORT_JSON_FILE)).unwrap(),
    )
    .unwrap();
    let r = &report.results;
    let checks = [
        ("outcome-real accuracy >= 0.80", r.outcome_real.accuracy, 0.80),
        ("outcome-imagined accuracy >= 0.78", r.outcome_imagined.accuracy, 0.78),
        ("strategy-real accuracy >= 0.68", r.strategy_real.accuracy, 0.68),
        ("strategy-imagined accuracy >= 0.65", r.strategy_imagined.accuracy, 0.65),
    ];
    for (what, got, floor) in checks {
        assert!(got >= floor, "{what}, got {got:.4}");
    }
    let gap_real = r.strategy_real.accuracy - r.strategy_real.balanced_accuracy;
    let gap_imagined = r.strategy_imagined.accuracy - r.strategy_imagined.balanced_accuracy;
    assert!(
        gap_real >= 0.15,
        "strategy-real balanced accuracy must sit at least 15 points under raw; gap {gap_real:.4}"
    );
    assert!(
        gap_imagined >= 0.15,
        "strategy-imagined balanced accuracy must sit at least 15 points under raw; gap {gap_imagined:.4}"
    );
    assert!(
        elapsed.as_secs() <= 900,
        "full pipeline took {}s, budget is 900s",
        elapsed.as_secs()
    );
    println!(
        "criterion 2 (accuracy bands): PASS — outcome real {:.4}/imagined {:.4}, strategy real \
         {:.4} (balanced {:.4})/imagined {:.4} (balanced {:.4}), {}s",
        r.outcome_real.accuracy,
        r.outcome_imagined.accuracy,
        r.strategy_real.accuracy,
        r.strategy_real.balanced_accuracy,
        r.strategy_imagined.accuracy,
        r.strategy_imagined.balanced_accuracy,
        elapsed.as_secs()
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: an independent exhaustive CART oracle.

/// Oracle tree node, grown by re-filtering full row copies at every step —
/// deliberately naive, sharing no code with the production fit.
enum ONode {
    Leaf { label: u32, counts: Vec<(u32, usize)> },
    Split { feature: usize, threshold: f64, left: Box<ONode>, right: Box<ONode> },
}

fn oracle_gini(rows: &[(Vec<f64>, u32)]) -> f64 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for (_, label) in rows {
        *counts.entry(*label).or_insert(0) += 1;
    }
    let n = rows.len() as f64;
    let mut sum = 0.0;
    for &c in counts.values() {
        let p = c as f64 / n;
        sum += p * p;
    }
    1.0 - sum
}

fn oracle_grow(rows: Vec<(Vec<f64>, u32)>, depth: u32, params: &TreeParams) -> ONode {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for (_, label) in &rows {
        *counts.entry(*label).or_insert(0) += 1;
    }
    let mut majority = None;
    let mut majority_count = 0;
    for (&label, &c) in &counts {
        if c > majority_count {
            majority = Some(label);
            majority_count = c;
        }
    }
    let leaf = || ONode::Leaf {
        label: majority.unwrap(),
        counts: counts.iter().map(|(&l, &c)| (l, c)).collect(),
    };
    if depth >= params.max_depth || rows.len() < params.min_samples_split {
        return leaf();
    }

    let n = rows.len();
    let parent = oracle_gini(&rows);
    let width = rows[0].0.len();
    let mut best: Option<(usize, f64)> = None;
    let mut best_delta = f64::NEG_INFINITY;
    for feature in 0..width {
        let mut values: Vec<f64> = rows.iter().map(|(r, _)| r[feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let left: Vec<(Vec<f64>, u32)> =
                rows.iter().filter(|(r, _)| r[feature] <= threshold).cloned().collect();
            let right: Vec<(Vec<f64>, u32)> =
                rows.iter().filter(|(r, _)| r[feature] > threshold).cloned().collect();
            if left.len() < params.min_samples_leaf || right.len() < params.min_samples_leaf {
                continue;
            }
            let w_left = left.len() as f64 / n as f64;
            let w_right = right.len() as f64 / n as f64;
            let delta = parent - w_left * oracle_gini(&left) - w_right * oracle_gini(&right);
            if delta > best_delta {
                best_delta = delta;
                best = Some((feature, threshold));
            }
        }
    }
    if best_delta < params.min_impurity_decrease {
        return leaf();
    }
    let (feature, threshold) = best.unwrap();
    let (left, right): (Vec<_>, Vec<_>) =
        rows.into_iter().partition(|(r, _)| r[feature] <= threshold);
    ONode::Split {
        feature,
        threshold,
        left: Box::new(oracle_grow(left, depth + 1, params)),
        right: Box::new(oracle_grow(right, depth + 1, params)),
    }
}

fn assert_same_tree(case: usize, tree: &Tree, at: usize, oracle: &ONode) {
    match (&tree.nodes[at], oracle) {
        (
            Node::Leaf { label, counts, .. },
            ONode::Leaf { label: o_label, counts: o_counts },
        ) => {
            assert_eq!(label, o_label, "case {case}: leaf label differs at node {at}");
            assert_eq!(counts, o_counts, "case {case}: leaf histogram differs at node {at}");
        }
        (
            Node::Split { feature, threshold, left, right, .. },
            ONode::Split { feature: o_f, threshold: o_t, left: o_l, right: o_r },
        ) => {
            assert_eq!(feature, o_f, "case {case}: split feature differs at node {at}");
            assert_eq!(
                threshold.to_bits(),
                o_t.to_bits(),
                "case {case}: split threshold differs at node {at}: {threshold} vs {o_t}"
            );
            assert_same_tree(case, tree, *left, o_l);
            assert_same_tree(case, tree, *right, o_r);
        }
        (got, _) => panic!("case {case}: node {at} shape differs from the oracle: {got:?}"),
    }
}

#[test]
fn criterion_3_cart_matches_an_exhaustive_oracle() {
    let palette = [-2.0, 0.0, 0.5, 1.0, 3.0, 7.5, 10.0];
    let param_sets = [
        TreeParams {
            max_depth: 5,
            min_impurity_decrease: 1e-12,
            min_samples_leaf: 1,
            min_samples_split: 2,
        },
        TreeParams {
            max_depth: 5,
            min_impurity_decrease: 1e-12,
            min_samples_leaf: 2,
            min_samples_split: 6,
        },
        TreeParams {
            max_depth: 3,
            min_impurity_decrease: 0.01,
            min_samples_leaf: 5,
            min_samples_split: 12,
        },
        TreeParams::default(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut splits_checked = 0usize;
    for case in 0..100 {
        let width = 1 + rng.random_range(0..6);
        let n = 2 + rng.random_range(0..199);
        let n_labels = 2 + rng.random_range(0..3) as u32;
        let pool = 2 + rng.random_range(0..palette.len() - 1);
        let params = &param_sets[case % param_sets.len()];

        let mut data = Dataset::new(width);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<f64> =
                (0..width).map(|_| palette[rng.random_range(0..pool)]).collect();
            let label = rng.random_range(0..n_labels);
            data.push_row(&row, label, i as u64);
            rows.push((row, label));
        }
        let all: Vec<usize> = (0..n).collect();
        let tree = Tree::fit(&data, &all, params).unwrap();
        let oracle = oracle_grow(rows, 0, params);
        assert_same_tree(case, &tree, 0, &oracle);
        splits_checked += tree.nodes.len() - tree.n_leaves();
    }
    println!(
        "criterion 3 (CART oracle): PASS — 100 random datasets, {splits_checked} splits matched \
         the exhaustive oracle exactly"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: planner against brute-force recursion on adversary-free states.

/// Independent return recursion: agent kinematics only, static adversary,
/// every fuel already collected so the only rewards are capture and the
/// boosted goal.
fn oracle_return(config: &EnvConfig, agent: Cell, state: &GridState, steps_left: u32) -> f64 {
    if steps_left == 0 {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    for action in Action::ALL {
        let (dx, dy) = action.delta();
        let next = agent.offset(dx, dy, config.grid_size).unwrap_or(agent);
        let value = if next == state.adversary {
            config.r_capture
        } else if next == state.goal {
            config.r_goal_boosted
        } else {
            oracle_return(config, next, state, steps_left - 1)
        };
        best = best.max(value);
    }
    best
}

#[test]
fn criterion_4_planner_equals_brute_force_and_walks_shortest_paths() {
    let config = EnvConfig::default();
    let gw = Gridworld::new(config.clone()).unwrap();
    let provider = FrozenAdversary { grid_size: config.grid_size };
    let mut rng = ChaCha8Rng::seed_from_u64(0x9A);
    let mut checked = 0;
    while checked < 50 {
        let cell = |rng: &mut ChaCha8Rng| {
            Cell::new(rng.random_range(0..8) as u8, rng.random_range(0..8) as u8)
        };
        let agent = cell(&mut rng);
        let goal = cell(&mut rng);
        let adversary = cell(&mut rng);
        let d = agent.manhattan(goal);
        if d == 0 || d > 4 || adversary.manhattan(agent) < 5 || adversary == goal {
            continue;
        }
        let mut state = gw.new_episode(1000 + checked as u64).unwrap();
        state.agent = agent;
        state.goal = goal;
        state.adversary = adversary;
        for fuel in &mut state.fuels {
            fuel.collected = true;
        }
        state.t = 0;

        // Plan at horizon exactly d: the best return is the boosted goal
        // reward, matching the recursion bit for bit.
        let mpc = Mpc::new(d, 4096).unwrap();
        let plan = mpc.plan(&config, &state, &provider).unwrap();
        let expect = oracle_return(&config, agent, &state, d);
        assert_eq!(
            plan.best_return.to_bits(),
            expect.to_bits(),
            "state {checked}: planner return {} differs from brute force {expect}",
            plan.best_return
        );
        assert_eq!(plan.best_return.to_bits(), config.r_goal_boosted.to_bits());

        // Replanning with the remaining distance as horizon reaches the
        // goal in exactly d moves.
        let mut current = state.clone();
        let mut steps = 0;
        while current.agent != current.goal {
            let remaining = current.agent.manhattan(current.goal);
            let mpc = Mpc::new(remaining, 4096).unwrap();
            let action = mpc.act(&config, &current, &provider).unwrap();
            let (dx, dy) = action.delta();
            current.agent = current.agent.offset(dx, dy, config.grid_size).unwrap_or(current.agent);
            current.t += 1;
            steps += 1;
            assert!(steps <= d, "state {checked}: agent exceeded {d} steps");
        }
        assert_eq!(steps, d, "state {checked}: agent took {steps} steps instead of {d}");
        checked += 1;
    }
    println!(
        "criterion 4 (planner oracle): PASS — 50 adversary-free states, returns match brute \
         force exactly and every walk takes exactly d steps"
    );
}

#[test]
fn criterion_5_world_model_calibration_on_frequent_contexts() {
    let gw = Gridworld::new(EnvConfig::default()).unwrap();
    // Random-policy episodes average about nine steps, so 1,400 of them
    // comfortably cover the 10,000 transitions the experiment calls for.
    let set = collect_random_policy(&gw, 1400, ACCEPTANCE_SEED, "calibration").unwrap();
    let mut transitions = transitions_from_episodes(&set);
    assert!(
        transitions.len() >= 10_000,
        "need at least 10,000 transitions, got {}",
        transitions.len()
    );
    transitions.truncate(10_000);
    let model = EnsembleModel::fit(&transitions, 5, 1.0, 8, ACCEPTANCE_SEED).unwrap();

    // Count adversary contexts over the same transitions and keep one
    // representative position pair per context; the true conditional
    // depends only on the context.
    let mut contexts: BTreeMap<AdversaryContext, (usize, Cell, Cell)> = BTreeMap::new();
    for t in &transitions {
        if t.next_adversary.is_some() {
            let ctx = AdversaryContext::of(t.next_agent, t.adversary, 8);
            let entry = contexts.entry(ctx).or_insert((0, t.next_agent, t.adversary));
            entry.0 += 1;
        }
    }

    let mut qualifying = 0;
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    for (ctx, (count, agent_after, adversary)) in contexts {
        if count < 200 {
            continue;
        }
        qualifying += 1;
        let true_dist = gw.adversary_move_distribution_at(agent_after, adversary);
        let mut truth = [0.0f64; 5];
        for mv in abm::env::AdversaryMove::ALL {
            truth[Displacement::from_move(mv).index()] = true_dist.prob(mv);
        }
        for member in 0..model.k() {
            let probs = model.adversary_conditional(member, &ctx).unwrap();
            let tv: f64 =
                0.5 * probs.iter().zip(&truth).map(|(p, q)| (p - q).abs()).sum::<f64>();
            worst = worst.max(tv);
            if tv > 0.05 {
                violations.push(format!(
                    "context (sign_x {}, sign_y {}, walls {:04b}) with {count} samples: member \
                     {member} at TV {tv:.4}",
                    ctx.sign_x,
                    ctx.sign_y,
                    ctx.boundary.bits()
                ));
            }
        }
    }
    assert!(qualifying >= 4, "only {qualifying} contexts reached 200 samples");
    if violations.is_empty() {
        println!(
            "criterion 5 (model calibration): PASS — {qualifying} contexts with >= 200 samples, \
             worst member TV {worst:.4} <= 0.05"
        );
    } else {
        println!(
            "criterion 5 (model calibration): FAIL — {} of {} member-context pairs over TV \
             0.05, worst {worst:.4}",
            violations.len(),
            qualifying * model.k()
        );
        panic!(
            "member tables out of tolerance:\n  {}\nThis bound is statistically marginal for \
             this experiment: members are fit on bootstrap resamples, which doubles the \
             sampling variance of each count table, and all members share one base sample of \
             the data, so their deviations from the true conditional are correlated. Measured \
             across twenty collection seeds, the worst member TV exceeds 0.05 on roughly \
             seventy percent of runs (range 0.042-0.135), including contexts with well over \
             1,000 samples. The tolerance is kept as stated rather than widened to make the \
             suite pass.",
            violations.join("\n  ")
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 6: the three crafted labeling episodes.

fn craft(
    goal: (u8, u8),
    fuels: [(u8, u8); 3],
    agent_track: &[(u8, u8)],
    adversary_track: &[(u8, u8)],
    actions: &[Action],
    rewards: &[f64],
    status: Status,
) -> Episode {
    let n = actions.len();
    assert_eq!(agent_track.len(), n + 1);
    assert_eq!(adversary_track.len(), n + 1);
    let mut collected = [false; 3];
    let mut states = Vec::new();
    for (t, (&(ax, ay), &(vx, vy))) in agent_track.iter().zip(adversary_track).enumerate() {
        for (i, &(fx, fy)) in fuels.iter().enumerate() {
            if t > 0 && (ax, ay) == (fx, fy) {
                collected[i] = true;
            }
        }
        states.push(GridState {
            agent: Cell::new(ax, ay),
            adversary: Cell::new(vx, vy),
            goal: Cell::new(goal.0, goal.1),
            fuels: fuels
                .iter()
                .zip(collected)
                .map(|(&(fx, fy), c)| Fuel { cell: Cell::new(fx, fy), collected: c })
                .collect(),
            t: t as u32,
        });
    }
    let final_state = states.pop().unwrap();
    Episode {
        source: Source::Real,
        seed: 0,
        init_mode: InitMode::ByHand,
        status,
        steps: states
            .into_iter()
            .zip(actions.iter().zip(rewards))
            .map(|(state, (&action, &reward))| EpStep { state, action, reward })
            .collect(),
        final_state,
    }
}

#[test]
fn criterion_6_crafted_episodes_label_exactly_as_stated() {
    use Action::{Down, Left, Right, Up};

    // Fuel approach, then goal approach.
    let ep = craft(
        (3, 4),
        [(3, 1), (0, 7), (7, 7)],
        &[(0, 1), (1, 1), (2, 1), (3, 1), (3, 2), (3, 3), (3, 4)],
        &[(7, 0), (6, 0), (5, 0), (4, 0), (4, 1), (4, 2), (4, 2)],
        &[Right, Right, Right, Up, Up, Up],
        &[0.0, 0.0, 1.0, 0.0, 0.0, 1.5],
        Status::GoalReached,
    );
    ep.validate(&EnvConfig::default()).unwrap();
    assert_eq!(strategy_labels(&ep), vec![5, 5, 5, 1, 1, 1]);

    // Aimless oscillation into the time limit.
    let short = EnvConfig { t_max: 4, ..EnvConfig::default() };
    let ep = craft(
        (7, 0),
        [(3, 3), (4, 4), (6, 2)],
        &[(0, 0), (1, 0), (0, 0), (1, 0), (0, 0)],
        &[(7, 7), (6, 7), (6, 6), (5, 6), (5, 5)],
        &[Right, Left, Right, Left],
        &[0.0; 4],
        Status::TimedOut,
    );
    ep.validate(&short).unwrap();
    assert_eq!(strategy_labels(&ep), vec![3, 3, 3, 3]);

    // A backtracking fuel approach whose window name switches mid-way: the
    // target fuel is closest-to-agent at steps 0 and 2 but only
    // furthest-from-adversary at step 1.
    let ep = craft(
        (0, 0),
        [(2, 2), (0, 3), (4, 4)],
        &[(4, 3), (4, 2), (4, 3), (4, 4), (4, 5)],
        &[(1, 1), (2, 1), (3, 1), (3, 2), (3, 3)],
        &[Down, Up, Up, Up],
        &[0.0, 0.0, 1.0, 0.0],
        Status::TimedOut,
    );
    ep.validate(&short).unwrap();
    let labels = strategy_labels(&ep);
    assert_eq!(labels, vec![5, 7, 5, 3]);
    assert_eq!((labels[0], labels[1]), (5, 7), "the mid-window role switch must appear");
    println!(
        "criterion 6 (labeling hand-traces): PASS — sequences [5,5,5,1,1,1], [3,3,3,3], \
         [5,7,5,3] reproduced exactly"
    );
}

#[test]
fn criterion_7_imagination_never_steps_the_true_environment() {
    let gw = Gridworld::new(EnvConfig::default()).unwrap();
    let set = collect_random_policy(&gw, 80, 11, "imagination-purity").unwrap();
    let model =
        EnsembleModel::fit(&transitions_from_episodes(&set), 5, 1.0, 8, 11).unwrap();
    let mpc = Mpc::new(3, 4096).unwrap();

    let before = abm::env::step_calls();
    let imagined =
        imagine(&gw, &model, &mpc, 50, ImagineInit::Random, 12, "imagination-purity").unwrap();
    let after = abm::env::step_calls();
    assert_eq!(after - before, 0, "imagine invoked the true environment step");
    assert_eq!(imagined.episodes.len(), 50);
    println!(
        "criterion 7 (imagination purity): PASS — 50 imagined episodes, 0 true-environment \
         step calls"
    );
}

#[test]
fn criterion_8_one_seed_means_identical_bytes() {
    let smoke = |dir: &Path| -> PipelineConfig {
        let text = r#"
            [model]
            n_explore = 60
            [planner]
            horizon = 3
            [data]
            n_real = 50
            n_imagined = 40
            [tree.outcome]
            min_samples_leaf = 2
            min_samples_split = 4
            [tree.strategy]
            min_samples_leaf = 5
            min_samples_split = 10
        "#;
        let config: PipelineConfig = toml::from_str(text).unwrap();
        config.resolve(Some(ACCEPTANCE_SEED), Some(dir)).unwrap()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    pipeline::run_all(&smoke(dir_a.path())).unwrap();
    pipeline::run_all(&smoke(dir_b.path())).unwrap();

    let deterministic = [
        pipeline::EXPLORE_FILE,
        pipeline::MODEL_FILE,
        pipeline::REAL_FILE,
        pipeline::IMAGINED_FILE,
        pipeline::FEATURES_REAL_FILE,
        pipeline::FEATURES_IMAGINED_FILE,
        pipeline::OUTCOME_REAL_FILE,
        pipeline::OUTCOME_IMAGINED_FILE,
        pipeline::STRATEGY_REAL_FILE,
        pipeline::STRATEGY_IMAGINED_FILE,
        pipeline::SPLIT_FILE,
        pipeline::TREE_OUTCOME_REAL_FILE,
        pipeline::TREE_OUTCOME_IMAGINED_FILE,
        pipeline::TREE_STRATEGY_REAL_FILE,
        pipeline::TREE_STRATEGY_IMAGINED_FILE,
        "tree_outcome_real.dot",
        "tree_outcome_imagined.dot",
        "tree_strategy_real.dot",
        "tree_strategy_imagined.dot",
        pipeline::REPORT_JSON_FILE,
        pipeline::REPORT_TEXT_FILE,
    ];
    for name in deterministic {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between identically seeded runs");
    }
    println!(
        "criterion 8 (determinism): PASS — {} artifacts byte-identical across two runs",
        deterministic.len()
    );
}

#[test]
fn criterion_9_conditions_reproduce_their_training_leaves() {
    let gw = Gridworld::new(EnvConfig::default()).unwrap();
    let set = collect_random_policy(&gw, 120, 23, "conditions").unwrap();

    // Outcome rows: one per episode from its initial state. Strategy rows:
    // every step of each successful episode.
    let mut outcome = Dataset::new(FEATURE_COUNT);
    let mut strategy = Dataset::new(FEATURE_COUNT);
    for ep in &set.episodes {
        outcome.push_row(&features::extract(&ep.steps[0].state), outcome_label(ep), ep.seed);
        if ep.status == Status::GoalReached {
            let labels = strategy_labels(ep);
            for (t, step) in ep.steps.iter().enumerate() {
                strategy.push_row(&features::extract(&step.state), labels[t], ep.seed);
            }
        }
    }

    let params = TreeParams {
        max_depth: 5,
        min_impurity_decrease: 0.005,
        min_samples_leaf: 5,
        min_samples_split: 10,
    };
    let mut conditions_checked = 0;
    for data in [&outcome, &strategy] {
        assert!(data.len() >= params.min_samples_split);
        let rows: Vec<usize> = (0..data.len()).collect();
        let tree = Tree::fit(data, &rows, &params).unwrap();
        let mut support_total = 0;
        for cond in tree.conditions() {
            let matching: Vec<usize> =
                (0..data.len()).filter(|&i| cond.matches(data.row(i))).collect();
            assert_eq!(
                matching.len(),
                cond.support,
                "condition support mismatch: {} predicates",
                cond.predicates.len()
            );
            let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in &matching {
                *hist.entry(data.label(i)).or_insert(0) += 1;
            }
            let hist: Vec<(u32, usize)> = hist.into_iter().collect();
            assert_eq!(hist, cond.counts, "condition histogram mismatch");
            support_total += cond.support;
            conditions_checked += 1;
        }
        assert_eq!(support_total, data.len(), "leaves must partition the training set");
    }
    println!(
        "criterion 9 (condition faithfulness): PASS — {conditions_checked} leaf conditions \
         reproduce their supports and histograms exactly"
    );
}
