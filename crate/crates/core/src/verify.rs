//! Property checks on a built tree and the report that collects them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::approx::{outspread, visual_core, visuality_certificate};
use crate::boundary::BoundaryModel;
use crate::doubling::dist_to_member;
use crate::graph::HypGraphSpace;
use crate::length::{format_length, Length};
use crate::metric::compute_beta;
use crate::rtree::{
    fiber_bound, share_bound, stage_violations, star_bookkeeping, track_connections, AttachCase, RTree,
    ScaleSchedule,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Exhaustive triple scans run up to this many vertices; larger inputs are sampled.
pub const EXHAUSTIVE_LIMIT: usize = 500;
pub const SAMPLED_TRIPLES: usize = 10_000;
const SAMPLE_SEED: u64 = 0x5eed;
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub witnesses: Vec<String>,
    pub measured: serde_json::Value,
}

impl CheckResult {
    fn new(name: &'static str, witnesses: Vec<String>, detail: String, measured: serde_json::Value) -> Self {
        let status = if witnesses.is_empty() { Status::Pass } else { Status::Fail };
        Self { name, status, detail, witnesses, measured }
    }

    fn not_applicable(name: &'static str, detail: String, measured: serde_json::Value) -> Self {
        Self { name, status: Status::NotApplicable, detail, witnesses: Vec::new(), measured }
    }
}

/// Constants measured while checking, in exact form where the quantity is exact.
#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub delta: String,
    pub delta_eff: String,
    pub n: usize,
    pub initial_n: usize,
    pub retries: usize,
    pub stages: usize,
    pub saturated: bool,
    pub beta: f64,
    pub q_big: Option<String>,
    pub q_small: Option<String>,
    pub kappa_measured: String,
    pub kappa_budget: f64,
    pub visuality_d: String,
    pub coverage_delta: String,
    pub core_coverage_delta: String,
    pub max_fiber: usize,
    pub fiber_bound: f64,
    pub max_stretch: String,
    pub stretch_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub fingerprint: String,
    pub constants: Constants,
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// True when no check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::NotApplicable => "n/a",
            };
            let _ = writeln!(s, "{:<width$}  {:<4}  {}", c.name, status, c.detail);
        }
        let k = &self.constants;
        let _ = writeln!(
            s,
            "delta={} delta_eff={} N={} beta={:.3} kappa={} D={} Delta={} M={}",
            k.delta, k.delta_eff, k.n, k.beta, k.kappa_measured, k.visuality_d, k.coverage_delta, k.max_fiber
        );
        s
    }
}

fn fmt_bound(x: f64) -> String {
    if x < 1e9 { format!("{x}") } else { format!("{x:.3e}") }
}

/// SHA-256 over the JSON of the space and the boundary.
pub fn fingerprint(space: &HypGraphSpace, boundary: &BoundaryModel) -> String {
    let mut h = Sha256::new();
    h.update(space.to_json().to_string());
    h.update(boundary.to_json().to_string());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Tree distances via parent pointers.
struct TreeMetric {
    depth: Vec<i64>,
    level: Vec<usize>,
    parent: Vec<Option<(usize, i64)>>,
}

impl TreeMetric {
    fn new(tree: &RTree, n: usize) -> Self {
        let mut depth = vec![0; n];
        let mut level = vec![0; n];
        let mut parent = vec![None; n];
        for &v in tree.nodes() {
            if let (Some(p), Some(w)) = (tree.parent(v), tree.parent_length(v)) {
                parent[v] = Some((p, w));
                depth[v] = depth[p] + w;
                level[v] = level[p] + 1;
            }
        }
        Self { depth, level, parent }
    }

    fn dist(&self, mut u: usize, mut v: usize) -> i64 {
        let total = self.depth[u] + self.depth[v];
        while self.level[u] > self.level[v] {
            u = self.parent[u].expect("non-root").0;
        }
        while self.level[v] > self.level[u] {
            v = self.parent[v].expect("non-root").0;
        }
        while u != v {
            u = self.parent[u].expect("non-root").0;
            v = self.parent[v].expect("non-root").0;
        }
        total - 2 * self.depth[u]
    }
}

fn tree_degrees(tree: &RTree, n: usize) -> Vec<usize> {
    let mut deg = vec![0; n];
    for (c, p) in tree.edges() {
        deg[c] += 1;
        deg[p] += 1;
    }
    deg
}

/// Connected, acyclic, built from edges of the space, four-point constant
/// zero; also extracts the branch-point skeleton.
pub fn check_tree_validity(tree: &RTree, space: &HypGraphSpace) -> CheckResult {
    let n = space.len();
    let mut bad = Vec::new();
    let nodes = tree.nodes();
    if tree.edges().len() + 1 != nodes.len() {
        bad.push(format!("{} edges on {} nodes", tree.edges().len(), nodes.len()));
    }
    for &v in nodes {
        let mut cur = v;
        let mut steps = 0;
        while let Some(p) = tree.parent(cur) {
            if !tree.contains(p) {
                bad.push(format!("parent of `{}` is outside the tree", space.id(cur)));
                break;
            }
            if space.is_adjacent(cur, p) != tree.parent_length(cur) {
                bad.push(format!("`{}`–`{}` is not an edge of the space", space.id(cur), space.id(p)));
            }
            cur = p;
            steps += 1;
            if steps > nodes.len() {
                bad.push(format!("parent chain from `{}` cycles", space.id(v)));
                break;
            }
        }
        if cur != tree.root() && bad.len() < 10 {
            bad.push(format!("`{}` does not reach the root", space.id(v)));
        }
    }
    if !bad.is_empty() {
        return CheckResult::new("tree_validity", bad, "structure broken".into(), serde_json::Value::Null);
    }

    let metric = TreeMetric::new(tree, n);
    let root = tree.root();
    let k = nodes.len();
    let gp = |x: usize, y: usize| metric.depth[x] + metric.depth[y] - metric.dist(x, y);
    let four_point = |x: usize, y: usize, z: usize| -> i64 {
        // doubled products at the root
        gp(x, z).min(gp(y, z)) - gp(x, y)
    };
    let exhaustive = k <= EXHAUSTIVE_LIMIT / 2;
    let worst = if exhaustive {
        (0..k)
            .into_par_iter()
            .map(|a| {
                let mut w = 0i64;
                for b in 0..k {
                    for c in 0..k {
                        w = w.max(four_point(nodes[a], nodes[b], nodes[c]));
                    }
                }
                w
            })
            .max()
            .unwrap_or(0)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        (0..SAMPLED_TRIPLES * 100)
            .map(|_| {
                let (a, b, c) = (rng.gen_range(0..k), rng.gen_range(0..k), rng.gen_range(0..k));
                four_point(nodes[a], nodes[b], nodes[c])
            })
            .max()
            .unwrap_or(0)
    };
    if worst > 0 {
        bad.push(format!("four-point defect {}", Length::new(worst, 2 * space.den())));
    }

    let deg = tree_degrees(tree, n);
    let is_skel = |v: usize| v == root || deg[v] == 1 || deg[v] >= 3;
    let skel: Vec<usize> = nodes.iter().copied().filter(|&v| is_skel(v)).collect();
    let mut skel_edges = 0;
    for &v in &skel {
        if v == root {
            continue;
        }
        let mut cur = tree.parent(v).expect("non-root has a parent");
        while !is_skel(cur) {
            cur = tree.parent(cur).expect("root is a skeleton node");
        }
        skel_edges += 1;
    }
    if skel_edges + 1 != skel.len() {
        bad.push(format!("skeleton has {} nodes and {skel_edges} edges", skel.len()));
    }
    let branch = nodes.iter().filter(|&&v| deg[v] >= 3).count();
    let leaves = nodes.iter().filter(|&&v| v != root && deg[v] == 1).count();
    CheckResult::new(
        "tree_validity",
        bad,
        format!(
            "{} nodes, skeleton {} nodes / {skel_edges} edges, four-point 0 ({})",
            k,
            skel.len(),
            if exhaustive { "exhaustive" } else { "sampled" }
        ),
        serde_json::json!({
            "nodes": k,
            "skeleton_nodes": skel.len(),
            "skeleton_edges": skel_edges,
            "branch_points": branch,
            "leaves": leaves,
            "four_point_exhaustive": exhaustive,
        }),
    )
}

pub fn check_stage_invariants(tree: &RTree, boundary: &BoundaryModel) -> CheckResult {
    let schedule = tree.schedule();
    let mut bad = Vec::new();
    for w in schedule.epsilons.windows(2) {
        if !(w[1] < w[0]) || w[0] / w[1] != ScaleSchedule::ratio(schedule.n) {
            bad.push(format!("scale ratio {} / {}", w[0], w[1]));
        }
    }
    for s in tree.stages() {
        for v in stage_violations(boundary, schedule, &s.state) {
            bad.push(format!("stage {}: {}: {}", v.stage, v.check, v.detail));
        }
    }
    let sizes: Vec<usize> = tree.stages().iter().map(|s| s.state.s.len()).collect();
    CheckResult::new(
        "stage_invariants",
        bad,
        format!("{} stages, |S_j| = {sizes:?}", tree.stages().len()),
        serde_json::json!({ "set_sizes": sizes }),
    )
}

/// Each record adds only new vertices, hangs them from an older tree vertex,
/// and follows its ray (case A) or its ray and connector (case B).
pub fn check_attach_records(tree: &RTree, space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let n = space.len();
    let mut seq = vec![usize::MAX; n];
    for (i, &v) in tree.nodes().iter().enumerate() {
        seq[v] = i;
    }
    let mut bad = Vec::new();
    let mut counts = BTreeMap::new();
    for r in tree.log() {
        *counts.entry(format!("{:?}", r.case)).or_insert(0usize) += 1;
        let name = boundary.label(r.target);
        if seq[r.attach_point] >= r.tree_size_before {
            bad.push(format!("{name}: attach point was not in the tree"));
        }
        if r.branch.iter().any(|&v| seq[v] < r.tree_size_before || seq[v] == usize::MAX) {
            bad.push(format!("{name}: branch reuses an older vertex"));
        }
        let mut chain = r.branch.clone();
        chain.push(r.attach_point);
        if chain.windows(2).any(|w| tree.parent(w[0]) != Some(w[1])) {
            bad.push(format!("{name}: branch is not a parent chain"));
        }
        if r.branch.first().is_some_and(|&v| v != boundary.vertex(r.target)) {
            bad.push(format!("{name}: branch does not start at the target"));
        }
        match r.case {
            AttachCase::Root | AttachCase::A => {
                if !r.ray.is_empty() && r.case == AttachCase::A && !r.ray.starts_with(&chain) {
                    bad.push(format!("{name}: branch leaves the ray"));
                }
            }
            AttachCase::B => {
                let y = r.connector[0];
                let y_idx = r.ray.iter().position(|&v| v == y);
                match y_idx {
                    Some(i) if r.branch[..=i] == r.ray[..=i] => {
                        if r.connector[1..r.connector.len() - 1].iter().any(|v| r.ray.contains(v)) {
                            bad.push(format!("{name}: connector is not minimal"));
                        }
                    }
                    _ => bad.push(format!("{name}: connector does not start on the ray")),
                }
            }
        }
    }
    CheckResult::new(
        "attach_records",
        bad,
        format!("{} records {counts:?}", tree.log().len()),
        serde_json::json!(counts),
    )
}

/// Case-B connectors have length at most `δ_eff`, measured in the tree.
pub fn check_connector_length(tree: &RTree, space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let metric = TreeMetric::new(tree, space.len());
    let limit = tree.delta_eff_scaled();
    let mut bad = Vec::new();
    let mut longest = 0i64;
    let mut count = 0;
    for r in tree.log().iter().filter(|r| r.case == AttachCase::B) {
        count += 1;
        let y = r.connector[0];
        let in_tree = metric.dist(y, r.attach_point);
        longest = longest.max(in_tree);
        let sum: i64 = r.connector.windows(2).map(|w| space.is_adjacent(w[0], w[1]).unwrap_or(i64::MAX / 4)).sum();
        if in_tree > limit || sum != r.connector_length || in_tree != sum {
            bad.push(format!("{}: connector {} vs budget {}", boundary.label(r.target), space.to_length(in_tree), tree.delta_eff()));
        }
    }
    let detail = if count == 0 {
        "no connectors were needed".to_string()
    } else {
        format!("{count} connectors, longest {} <= {}", space.to_length(longest), tree.delta_eff())
    };
    CheckResult::new(
        "connector_length",
        bad,
        detail,
        serde_json::json!({ "connectors": count, "longest": format_length(&space.to_length(longest)) }),
    )
}

/// Points of one class within `8ε_{j−1}` of each other see the same balls of
/// the previous cover at radius `8nε_{j−1}`.
pub fn check_class_consistency(tree: &RTree, boundary: &BoundaryModel) -> CheckResult {
    let mut bad = Vec::new();
    let mut pairs = 0usize;
    let stages = tree.stages();
    for j in 1..stages.len() {
        let eps_prev = tree.schedule().epsilon(j - 1);
        let prev = &stages[j - 1].state.cover;
        let new = &stages[j].state.ordered_new;
        for (a, p) in new.iter().enumerate() {
            for q in &new[a + 1..] {
                if p.class != q.class || boundary.d(p.pos, q.pos) > 8.0 * eps_prev {
                    continue;
                }
                pairs += 1;
                let r = 8.0 * p.class as f64 * eps_prev;
                for m in &prev.members {
                    let dp = dist_to_member(boundary, p.pos, m) <= r;
                    let dq = dist_to_member(boundary, q.pos, m) <= r;
                    if dp != dq {
                        bad.push(format!(
                            "stage {j}: {} and {} disagree on a ball",
                            boundary.label(p.pos),
                            boundary.label(q.pos)
                        ));
                        break;
                    }
                }
            }
        }
    }
    CheckResult::new(
        "class_consistency",
        bad,
        format!("{pairs} same-class close pairs"),
        serde_json::json!({ "pairs": pairs }),
    )
}

/// Eventual targets are recomputed, lie in `S_{j−1}`, and are within
/// `16N²ε_{j−1}` of the new point.
pub fn check_connection_distance(tree: &RTree, boundary: &BoundaryModel) -> CheckResult {
    let n = tree.n();
    let mut bad = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for (j, s) in tree.stages().iter().enumerate().skip(1) {
        let eps_prev = tree.schedule().epsilon(j - 1);
        let records: Vec<_> = tree.log().iter().filter(|r| r.stage == j).cloned().collect();
        let eventual = match track_connections(&records, &s.state.s_prev) {
            Ok(e) => e,
            Err(e) => {
                bad.push(format!("stage {j}: {e}"));
                continue;
            }
        };
        let bound = 16.0 * (n * n) as f64 * eps_prev;
        for (r, e) in records.iter().zip(eventual) {
            if e != r.eventually_connected_to {
                bad.push(format!("{}: logged eventual target differs", boundary.label(r.target)));
            }
            let d = boundary.d(e, r.target);
            worst_ratio = worst_ratio.max(d / bound);
            if d > bound * (1.0 + SLACK) {
                bad.push(format!("{}: d = {d} > {bound}", boundary.label(r.target)));
            }
        }
    }
    CheckResult::new(
        "connection_distance",
        bad,
        format!("worst distance / bound = {worst_ratio:.4}"),
        serde_json::json!({ "worst_ratio": worst_ratio }),
    )
}

/// Per ball of `B_j`: eventual targets fall in at most `N²` balls of
/// `B_{j−1}`, and at most `N^{log2(8N²)}` new points share one target.
pub fn check_connection_bookkeeping(tree: &RTree, boundary: &BoundaryModel) -> CheckResult {
    let n = tree.n();
    let mut bad = Vec::new();
    let mut rows = Vec::new();
    let stages = tree.stages();
    for j in 1..stages.len() {
        let b = star_bookkeeping(boundary, &stages[j - 1].state, &stages[j].state, tree.log());
        if b.max_target_balls > n * n || b.max_shared_target as f64 > share_bound(n) {
            bad.push(format!(
                "stage {j}: {} target balls, {} shared (at {})",
                b.max_target_balls,
                b.max_shared_target,
                b.witness.map_or("-", |w| boundary.label(w))
            ));
        }
        if stages[j].bookkeeping.as_ref() != Some(&b) {
            bad.push(format!("stage {j}: logged bookkeeping differs"));
        }
        rows.push(serde_json::json!({
            "stage": j,
            "max_target_balls": b.max_target_balls,
            "max_shared_target": b.max_shared_target,
        }));
    }
    CheckResult::new(
        "connection_bookkeeping",
        bad,
        format!("bounds {} balls, {} shared", n * n, fmt_bound(share_bound(n))),
        serde_json::json!(rows),
    )
}

fn stage_beta(tree: &RTree, boundary: &BoundaryModel) -> f64 {
    tree.stages()
        .iter()
        .filter_map(|s| s.beta)
        .fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))))
        .unwrap_or_else(|| {
            compute_beta(ScaleSchedule::ratio(tree.n()), boundary.params()).unwrap_or(0.0)
        })
}

/// `Q − q ≤ β` at every stage with a qualifying proxy pair.
pub fn check_annulus_spread(tree: &RTree, space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let mut bad = Vec::new();
    let mut rows = Vec::new();
    for (j, s) in tree.stages().iter().enumerate().skip(1) {
        let sched = tree.schedule();
        let fresh = crate::rtree::compute_q_q(space, boundary, sched.epsilon(j), sched.epsilon(j - 1));
        if !s.state.ordered_new.is_empty() && fresh != s.q_range {
            bad.push(format!("stage {j}: logged Q, q differ from a fresh scan"));
        }
        if let (Some((qb, qs)), Some(beta)) = (fresh, s.beta) {
            let spread = (qb - qs) as f64 / space.den() as f64;
            if spread > beta + SLACK {
                bad.push(format!("stage {j}: Q - q = {spread} > beta = {beta}"));
            }
            rows.push(serde_json::json!({
                "stage": j,
                "Q": format_length(&space.to_length(qb)),
                "q": format_length(&space.to_length(qs)),
                "beta": beta,
            }));
        }
    }
    let detail = if rows.is_empty() { "no annulus pairs".into() } else { format!("{} stages scanned", rows.len()) };
    CheckResult::new("annulus_spread", bad, detail, serde_json::json!(rows))
}

/// The part of every root ray at radius `≥ Q` is a geodesic of the space.
pub fn check_eventually_geodesic(tree: &RTree, space: &HypGraphSpace) -> CheckResult {
    let q = tree.stages().iter().filter_map(|s| s.q_range.map(|x| x.0)).max().unwrap_or(0);
    let metric = TreeMetric::new(tree, space.len());
    let root = tree.root();
    let mut bad = Vec::new();
    for &(v, _) in tree.terminals() {
        let ray = tree.ray(v);
        let Some(i) = ray.iter().position(|&u| space.scaled(root, u) >= q) else {
            continue;
        };
        let start = ray[i];
        if metric.dist(start, v) != space.scaled(start, v) {
            bad.push(format!("ray to `{}` bends beyond radius {}", space.id(v), space.to_length(q)));
        }
    }
    CheckResult::new(
        "eventually_geodesic",
        bad,
        format!("{} rays, tails beyond radius {}", tree.terminals().len(), space.to_length(q)),
        serde_json::json!({ "radius": format_length(&space.to_length(q)) }),
    )
}

struct RayStats {
    max_stretch: i64,
    kappa: i64,
    worst_gamma2: Length,
}

fn ray_stats(tree: &RTree, space: &HypGraphSpace) -> RayStats {
    let per: Vec<(i64, i64, Length)> = tree
        .terminals()
        .par_iter()
        .map(|&(v, _)| {
            let ray = tree.ray(v);
            let stretch = space.scale_up(space.additive_stretch(&ray).expect("tree rays follow edges"));
            let haus = space.scale_up(space.hausdorff_to_geodesic(&ray).expect("non-empty ray"));
            let qg = space.quasi_geodesic_constants(&ray).expect("tree rays follow edges");
            (stretch, haus, qg.gamma2)
        })
        .collect();
    RayStats {
        max_stretch: per.iter().map(|p| p.0).max().unwrap_or(0),
        kappa: per.iter().map(|p| p.1).max().unwrap_or(0),
        worst_gamma2: per.iter().map(|p| p.2).max().unwrap_or_else(|| Length::from_integer(0)),
    }
}

fn stretch_bound(tree: &RTree, space: &HypGraphSpace, beta: f64) -> f64 {
    let delta = crate::length::to_f64(&space.delta());
    (fiber_bound(tree.n()) + 1.0) * (75.0 * delta + 4.0 * beta)
}

/// Additive stretch of every root ray against `(M+1)(75δ+4β)`; zero when `δ = 0`.
fn ray_quasigeodesy(tree: &RTree, space: &HypGraphSpace, stats: &RayStats, beta: f64) -> CheckResult {
    let bound = stretch_bound(tree, space, beta);
    let c = space.to_length(stats.max_stretch);
    let mut bad = Vec::new();
    if space.delta() == Length::from_integer(0) && stats.max_stretch != 0 {
        bad.push(format!("stretch {c} on a tree space"));
    }
    if crate::length::to_f64(&c) > bound {
        bad.push(format!("stretch {c} > {bound}"));
    }
    CheckResult::new(
        "ray_quasigeodesy",
        bad,
        format!("C* = {c} <= {bound:.3e}"),
        serde_json::json!({
            "max_stretch": format_length(&c),
            "bound": bound,
            "worst_gamma2_at_2": format_length(&stats.worst_gamma2),
            "max_hausdorff": format_length(&space.to_length(stats.kappa)),
        }),
    )
}

pub fn check_ray_quasigeodesy(tree: &RTree, space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let stats = ray_stats(tree, space);
    ray_quasigeodesy(tree, space, &stats, stage_beta(tree, boundary))
}

fn fiber_sizes(tree: &RTree, boundary: &BoundaryModel) -> Vec<usize> {
    let mut fiber = vec![0usize; boundary.len()];
    for &(_, p) in tree.terminals() {
        fiber[p] += 1;
    }
    fiber
}

/// Every tree leaf ends a ray with a target.
pub fn check_boundary_rays(tree: &RTree, space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let deg = tree_degrees(tree, space.len());
    let mut bad = Vec::new();
    for &v in tree.nodes() {
        if v != tree.root() && deg[v] == 1 && !tree.terminals().iter().any(|t| t.0 == v) {
            bad.push(format!("leaf `{}` has no target", space.id(v)));
        }
    }
    for &(v, p) in tree.terminals() {
        if boundary.vertex(p) != v || !tree.contains(v) {
            bad.push(format!("ray end `{}` does not sit on its target", space.id(v)));
        }
    }
    CheckResult::new("boundary_rays", bad, format!("{} ray ends", tree.terminals().len()), serde_json::Value::Null)
}

/// Every proxy is a target at saturation, otherwise within `ε_J` of one.
pub fn check_boundary_surjectivity(tree: &RTree, boundary: &BoundaryModel) -> CheckResult {
    let fiber = fiber_sizes(tree, boundary);
    let sched = tree.schedule();
    let saturated = tree.stages().last().is_some_and(|s| s.state.s.len() == boundary.len());
    let eps = sched.epsilon(sched.stages());
    let targets: Vec<usize> = (0..boundary.len()).filter(|&p| fiber[p] > 0).collect();
    let mut bad = Vec::new();
    for p in 0..boundary.len() {
        let hit = if saturated {
            fiber[p] > 0
        } else {
            targets.iter().any(|&t| boundary.d(p, t) < eps)
        };
        if !hit {
            bad.push(boundary.label(p).to_string());
        }
    }
    let detail = if saturated {
        format!("{} of {} proxies hit (saturated)", targets.len(), boundary.len())
    } else {
        format!("{} proxies hit, rest within eps_{} = {eps}", targets.len(), sched.stages())
    };
    CheckResult::new("boundary_surjectivity", bad, detail, serde_json::json!({ "saturated": saturated }))
}

/// Rays per proxy against `N^{2+log2(8N²)}`.
pub fn check_fiber_bound(tree: &RTree, boundary: &BoundaryModel) -> CheckResult {
    let m = fiber_sizes(tree, boundary).into_iter().max().unwrap_or(0);
    let bound = fiber_bound(tree.n());
    let bad = if m as f64 > bound { vec![format!("M = {m} > {bound}")] } else { Vec::new() };
    CheckResult::new("fiber_bound", bad, format!("M = {m} <= {}", fmt_bound(bound)), serde_json::json!({ "max_fiber": m, "bound": bound }))
}

pub fn check_visual_sandwich(space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let bad: Vec<String> = boundary
        .sandwich_violations(space)
        .iter()
        .map(|&(a, b)| format!("({}, {})", boundary.label(a), boundary.label(b)))
        .collect();
    let k = boundary.len();
    CheckResult::new("visual_sandwich", bad, format!("{} proxy pairs", k * k.saturating_sub(1) / 2), serde_json::Value::Null)
}

/// `(x,y)_z ≤ d(z,[x,y]) ≤ (x,y)_z + 2δ` on the canonical geodesic, all
/// triples up to [`EXHAUSTIVE_LIMIT`] vertices and sampled above.
pub fn check_gromov_bracketing(space: &HypGraphSpace) -> CheckResult {
    let n = space.len();
    let metric = space.metric();
    let two_delta = 2 * space.scale_up(space.delta()) * 2;
    // doubled units: 2·d(z,[x,y]) against gromov_twice
    let check = |x: usize, y: usize, geo: &[usize], z: usize| -> Option<String> {
        let twice = metric.gromov_twice(x, y, z);
        let d2 = 2 * space.scaled_dist_to_path(z, geo);
        (d2 < twice || d2 > twice + two_delta).then(|| format!("({}, {}, {})", space.id(x), space.id(y), space.id(z)))
    };
    let exhaustive = n <= EXHAUSTIVE_LIMIT;
    let bad: Vec<String> = if exhaustive {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|x| {
                let mut out = Vec::new();
                for y in x..n {
                    let geo = space.canonical_geodesic(x, y).vertices;
                    out.extend((0..n).filter_map(|z| check(x, y, &geo, z)));
                }
                out
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let triples: Vec<(usize, usize, usize)> =
            (0..SAMPLED_TRIPLES).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        triples
            .par_iter()
            .filter_map(|&(x, y, z)| check(x, y, &space.canonical_geodesic(x, y).vertices, z))
            .collect()
    };
    let mut bad = bad;
    bad.truncate(20);
    CheckResult::new(
        "gromov_bracketing",
        bad,
        if exhaustive { format!("all triples of {n} vertices") } else { format!("{SAMPLED_TRIPLES} sampled triples") },
        serde_json::json!({ "exhaustive": exhaustive }),
    )
}

/// `(η,μ)_r ≤ d(r, [η,μ]) ≤ (η,μ)_r + 4δ` for every proxy pair.
pub fn check_double_ray_bracketing(space: &HypGraphSpace, boundary: &BoundaryModel) -> CheckResult {
    let k = boundary.len();
    let root = space.root();
    let four_delta2 = 8 * space.scale_up(space.delta());
    let metric = space.metric();
    let mut bad: Vec<String> = (0..k)
        .into_par_iter()
        .flat_map_iter(|a| ((a + 1)..k).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let (x, y) = (boundary.vertex(a), boundary.vertex(b));
            let geo = space.canonical_geodesic(x, y).vertices;
            let twice = metric.gromov_twice(x, y, root);
            let d2 = 2 * space.scaled_dist_to_path(root, &geo);
            (d2 < twice || d2 > twice + four_delta2).then(|| format!("({}, {})", boundary.label(a), boundary.label(b)))
        })
        .collect();
    bad.truncate(20);
    CheckResult::new("double_ray_bracketing", bad, format!("{} proxy pairs", k * k.saturating_sub(1) / 2), serde_json::Value::Null)
}

/// Scaled distance from every vertex to the tree.
pub fn distance_to_tree(tree: &RTree, space: &HypGraphSpace) -> Vec<i64> {
    space.scaled_dist_to_set(tree.nodes())
}

/// Runs every check.
pub fn verify(space: &HypGraphSpace, boundary: &BoundaryModel, tree: &RTree) -> VerificationReport {
    let beta = stage_beta(tree, boundary);
    let delta_f = crate::length::to_f64(&space.delta());
    let stats = ray_stats(tree, space);
    let kappa = space.to_length(stats.kappa);
    let kappa_budget = 10.0 * (delta_f + beta);
    let cert = visuality_certificate(space);
    let to_tree = distance_to_tree(tree, space);
    let coverage = to_tree.iter().copied().max().unwrap_or(0);
    let mut notes = Vec::new();

    let shortest = space.edges().iter().map(|e| e.2).min().unwrap_or_else(|| Length::from_integer(0));
    let visual = cert.d <= Length::from_integer(2) * shortest;
    let coverage_check = if visual {
        let limit = kappa_budget + crate::length::to_f64(&cert.d);
        let c = crate::length::to_f64(&space.to_length(coverage));
        let bad = if c > limit + SLACK { vec![format!("Delta = {c} > {limit}")] } else { Vec::new() };
        CheckResult::new(
            "visual_coverage",
            bad,
            format!("Delta = {} <= {limit:.3}", space.to_length(coverage)),
            serde_json::json!({ "delta_measured": format_length(&space.to_length(coverage)), "limit": limit }),
        )
    } else {
        CheckResult::not_applicable(
            "visual_coverage",
            format!("not visual: D = {} exceeds twice the shortest edge", cert.d),
            serde_json::json!({ "delta_measured": format_length(&space.to_length(coverage)) }),
        )
    };

    let (core_delta, outspread_check) = match visual_core(space, kappa) {
        Ok(core) => {
            let core_delta = core.kept.iter().map(|&v| to_tree[v]).max().unwrap_or(0);
            let avoid: Vec<bool> = to_tree.iter().map(|&d| d <= core_delta).collect();
            let (spread, path) = outspread(space, &avoid);
            let mut in_core = vec![false; space.len()];
            for &v in &core.kept {
                in_core[v] = true;
            }
            let mut bad = Vec::new();
            if let Some(&v) = tree.nodes().iter().find(|&&v| !in_core[v]) {
                bad.push(format!("tree vertex `{}` lies outside the visual core", space.id(v)));
            }
            if spread > core.complement_outspread {
                bad.push(format!("out-spread {spread} > core complement {}", core.complement_outspread));
            }
            let check = CheckResult::new(
                "outspread",
                bad,
                format!("out-spread {spread} <= {} (core complement)", core.complement_outspread),
                serde_json::json!({
                    "outspread": format_length(&spread),
                    "core_complement_outspread": format_length(&core.complement_outspread),
                    "core_vertices": core.kept.len(),
                    "path": path.map(|p| p.vertices.iter().map(|&v| space.id(v).to_string()).collect::<Vec<_>>()),
                }),
            );
            (core_delta, check)
        }
        Err(e) => (0, CheckResult::new("outspread", vec![e.to_string()], "visual core failed".into(), serde_json::Value::Null)),
    };

    let fiber = fiber_sizes(tree, boundary).into_iter().max().unwrap_or(0);
    notes.push(format!("every fiber has at most M = {fiber} rays, so the boundary has topological dimension at most {}", fiber.saturating_sub(1)));
    if tree.delta_eff_scaled() != tree.delta_scaled() {
        notes.push(format!("connector budget rounded from delta = {} up to {}", space.delta(), tree.delta_eff()));
    }
    if tree.schedule().truncated {
        notes.push("requested stage count exceeds saturation; schedule truncated".into());
    }
    if tree.retries() > 0 {
        notes.push(format!("N doubled {} time(s) from {} after cover bounds failed", tree.retries(), tree.initial_n()));
    }

    let q_big = tree.stages().iter().filter_map(|s| s.q_range.map(|x| x.0)).max();
    let q_small = tree.stages().iter().filter_map(|s| s.q_range.map(|x| x.1)).min();
    let constants = Constants {
        delta: format_length(&space.delta()),
        delta_eff: format_length(&tree.delta_eff()),
        n: tree.n(),
        initial_n: tree.initial_n(),
        retries: tree.retries(),
        stages: tree.schedule().stages(),
        saturated: tree.stages().last().is_some_and(|s| s.state.s.len() == boundary.len()),
        beta,
        q_big: q_big.map(|q| format_length(&space.to_length(q))),
        q_small: q_small.map(|q| format_length(&space.to_length(q))),
        kappa_measured: format_length(&kappa),
        kappa_budget,
        visuality_d: format_length(&cert.d),
        coverage_delta: format_length(&space.to_length(coverage)),
        core_coverage_delta: format_length(&space.to_length(core_delta)),
        max_fiber: fiber,
        fiber_bound: fiber_bound(tree.n()),
        max_stretch: format_length(&space.to_length(stats.max_stretch)),
        stretch_bound: stretch_bound(tree, space, beta),
    };

    let checks = vec![
        check_tree_validity(tree, space),
        check_stage_invariants(tree, boundary),
        check_attach_records(tree, space, boundary),
        check_connector_length(tree, space, boundary),
        check_class_consistency(tree, boundary),
        check_connection_distance(tree, boundary),
        check_connection_bookkeeping(tree, boundary),
        check_annulus_spread(tree, space, boundary),
        check_eventually_geodesic(tree, space),
        ray_quasigeodesy(tree, space, &stats, beta),
        check_boundary_rays(tree, space, boundary),
        check_boundary_surjectivity(tree, boundary),
        check_fiber_bound(tree, boundary),
        check_visual_sandwich(space, boundary),
        check_gromov_bracketing(space),
        check_double_ray_bracketing(space, boundary),
        coverage_check,
        outspread_check,
    ];
    VerificationReport {
        schema_version: SCHEMA_VERSION,
        fingerprint: fingerprint(space, boundary),
        constants,
        checks,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtree::build_tree;

    fn path_space(len: usize) -> HypGraphSpace {
        let ids = (0..=len).map(|i| format!("v{i}")).collect();
        let one = Length::from_integer(1);
        let edges = (0..len).map(|i| (i, i + 1, one)).collect();
        HypGraphSpace::from_indexed(ids, edges, 0, Length::from_integer(len as i64), vec![len]).unwrap()
    }

    fn tripod() -> HypGraphSpace {
        let ids = ["r", "m", "a", "b"].map(String::from).to_vec();
        let one = Length::from_integer(1);
        HypGraphSpace::from_indexed(ids, vec![(0, 1, one), (1, 2, one), (1, 3, one)], 0, Length::from_integer(2), vec![2, 3])
            .unwrap()
    }

    #[test]
    fn single_ray() {
        let g = path_space(3);
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let t = build_tree(&g, &b, None).unwrap();
        let r = verify(&g, &b, &t);
        assert!(r.passed(), "{}", r.summary_table());
        let v = r.check("tree_validity").unwrap();
        assert_eq!(v.measured["skeleton_nodes"], 2);
        assert_eq!(v.measured["skeleton_edges"], 1);
        assert_eq!(r.constants.max_stretch, "0/1");
        assert_eq!(r.constants.max_fiber, 1);
        assert_eq!(r.constants.coverage_delta, "0/1");
        assert_eq!(r.checks.len(), 18);
    }

    #[test]
    fn tripod_skeleton() {
        let g = tripod();
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let t = build_tree(&g, &b, None).unwrap();
        let r = verify(&g, &b, &t);
        assert!(r.passed(), "{}", r.summary_table());
        // root, branch point m, leaves a and b
        assert_eq!(r.check("tree_validity").unwrap().measured["skeleton_nodes"], 4);
        assert_eq!(r.check("outspread").unwrap().measured["outspread"], "0/1");
    }

    #[test]
    fn check_names_are_unique() {
        let g = tripod();
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let t = build_tree(&g, &b, None).unwrap();
        let r = verify(&g, &b, &t);
        let mut names: Vec<_> = r.checks.iter().map(|c| c.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), r.checks.len());
    }
}
