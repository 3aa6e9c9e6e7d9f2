//! Staged construction of a rooted tree whose root rays reach every
//! boundary proxy.
//!
//! Stage `j` picks an `ε_j`-separated set `S_j` of proxies and attaches a
//! ray to each new point, either along the geodesic towards a nearby old
//! point or through a short connector to that point's ray.

pub mod attach;
pub mod schedule;
pub mod stage;

use std::fmt::Write as _;

use crate::boundary::BoundaryModel;
use crate::doubling::doubling_constant;
use crate::error::{Error, Result};
use crate::graph::HypGraphSpace;
use crate::length::{format_length, Length};
use crate::metric::compute_beta;

pub use attach::{star_bookkeeping, track_connections, AttachCase, AttachRecord, StarBookkeeping};
pub use schedule::{make_schedule, ScaleSchedule};
pub use stage::{compute_q_q, order_new_points, stage_sets, stage_violations, NewPoint, StageState, StageViolation};

pub(crate) const SLACK: f64 = 1e-9;

/// Times `N` is doubled after a cover bound fails.
pub const MAX_RETRIES: usize = 3;

/// `N^{log2(8N)}`, the cap on the multiplicity of `S_j`.
pub fn net_bound(n: usize) -> f64 {
    let n = n as f64;
    n.powf((8.0 * n).log2())
}

/// `N^{log2(8N²)}`, the cap on new points of one ball sharing an eventual target.
pub fn share_bound(n: usize) -> f64 {
    let n = n as f64;
    n.powf((8.0 * n * n).log2())
}

/// `N^{2+log2(8N²)}`, the cap on rays per boundary point.
pub fn fiber_bound(n: usize) -> f64 {
    (n * n) as f64 * share_bound(n)
}

/// Per-stage measurements kept next to the stage sets.
#[derive(Debug, Clone)]
pub struct StageData {
    pub state: StageState,
    /// Scaled `(Q, q)`, absent when no proxy pair lies in the stage's annulus.
    pub q_range: Option<(i64, i64)>,
    pub beta: Option<f64>,
    pub bookkeeping: Option<StarBookkeeping>,
}

#[derive(Debug, Clone)]
pub struct RTree {
    root: usize,
    /// `(parent, scaled edge length)` per vertex.
    parent: Vec<Option<(usize, i64)>>,
    in_tree: Vec<bool>,
    order: Vec<usize>,
    edge_stage: Vec<usize>,
    /// Proxy position whose attachment added the vertex.
    owner: Vec<usize>,
    /// `(vertex, proxy position)` for every ray end.
    terminals: Vec<(usize, usize)>,
    log: Vec<AttachRecord>,
    stages: Vec<StageData>,
    schedule: ScaleSchedule,
    initial_n: usize,
    retries: usize,
    delta: i64,
    delta_eff: i64,
    den: i64,
}

impl RTree {
    fn new(space: &HypGraphSpace, schedule: ScaleSchedule, delta: i64, delta_eff: i64) -> Self {
        let n = space.len();
        let mut t = Self {
            root: space.root(),
            parent: vec![None; n],
            in_tree: vec![false; n],
            order: Vec::new(),
            edge_stage: vec![0; n],
            owner: vec![0; n],
            terminals: Vec::new(),
            log: Vec::new(),
            stages: Vec::new(),
            initial_n: schedule.n,
            schedule,
            retries: 0,
            delta,
            delta_eff,
            den: space.den(),
        };
        t.insert(space.root(), None, 0, 0);
        t
    }

    fn insert(&mut self, v: usize, parent: Option<(usize, i64)>, stage: usize, owner: usize) {
        self.parent[v] = parent;
        self.in_tree[v] = true;
        self.order.push(v);
        self.edge_stage[v] = stage;
        self.owner[v] = owner;
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Tree vertices in insertion order.
    pub fn nodes(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.in_tree.get(v).copied().unwrap_or(false)
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v].map(|p| p.0)
    }

    /// Scaled length of the edge from `v` to its parent.
    pub fn parent_length(&self, v: usize) -> Option<i64> {
        self.parent[v].map(|p| p.1)
    }

    /// Stage that added the edge above `v`.
    pub fn edge_stage(&self, v: usize) -> usize {
        self.edge_stage[v]
    }

    pub fn owner(&self, v: usize) -> usize {
        self.owner[v]
    }

    /// `(child, parent)` pairs in insertion order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.order.iter().filter_map(|&v| self.parent(v).map(|p| (v, p))).collect()
    }

    /// `(vertex, proxy position)` for every ray end, in attachment order.
    pub fn terminals(&self) -> &[(usize, usize)] {
        &self.terminals
    }

    pub fn log(&self) -> &[AttachRecord] {
        &self.log
    }

    pub fn stages(&self) -> &[StageData] {
        &self.stages
    }

    pub fn schedule(&self) -> &ScaleSchedule {
        &self.schedule
    }

    /// Doubling count the construction finished with.
    pub fn n(&self) -> usize {
        self.schedule.n
    }

    /// Doubling count measured on the boundary before any retry.
    pub fn initial_n(&self) -> usize {
        self.initial_n
    }

    pub fn retries(&self) -> usize {
        self.retries
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn delta_scaled(&self) -> i64 {
        self.delta
    }

    /// Smallest realised distance that is at least `δ`, the connector budget.
    pub fn delta_eff(&self) -> Length {
        Length::new(self.delta_eff, self.den)
    }

    pub fn delta_eff_scaled(&self) -> i64 {
        self.delta_eff
    }

    /// Vertices from the root to `v`.
    pub fn ray(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn to_json(&self, space: &HypGraphSpace, boundary: &BoundaryModel) -> serde_json::Value {
        let id = |v: usize| space.id(v).to_string();
        let stages: Vec<serde_json::Value> = self
            .stages
            .iter()
            .map(|s| {
                let mut v = s.state.to_json(boundary);
                v["q_range"] = match s.q_range {
                    Some((qb, qs)) => serde_json::json!([
                        format_length(&Length::new(qb, self.den)),
                        format_length(&Length::new(qs, self.den)),
                    ]),
                    None => serde_json::Value::Null,
                };
                v["beta"] = serde_json::json!(s.beta);
                v["bookkeeping"] = serde_json::json!(s.bookkeeping);
                v
            })
            .collect();
        serde_json::json!({
            "root": id(self.root),
            "nodes": self.order.iter().map(|&v| id(v)).collect::<Vec<_>>(),
            "edges": self.edges().iter().map(|&(c, p)| serde_json::json!([
                id(c),
                id(p),
                format_length(&Length::new(self.parent_length(c).unwrap_or(0), self.den)),
                self.edge_stage(c),
            ])).collect::<Vec<_>>(),
            "leaf_targets": self.terminals.iter().map(|&(v, p)| serde_json::json!([id(v), boundary.label(p)])).collect::<Vec<_>>(),
            "schedule": self.schedule,
            "initial_n": self.initial_n,
            "retries": self.retries,
            "delta_eff": format_length(&self.delta_eff()),
            "stages": stages,
            "attach_log": self.log.iter().map(|r| r.to_json(space, boundary)).collect::<Vec<_>>(),
        })
    }

    /// Graphviz description with edges colored by the stage that added them.
    pub fn to_dot(&self, space: &HypGraphSpace) -> String {
        const PALETTE: [&str; 8] =
            ["black", "red", "blue", "darkgreen", "orange", "purple", "brown", "deeppink"];
        let mut s = String::from("graph rtree {\n  node [shape=point];\n");
        let _ = writeln!(s, "  \"{}\" [shape=doublecircle, label=\"\"];", space.id(self.root));
        for &(v, _) in &self.terminals {
            let _ = writeln!(s, "  \"{}\" [shape=circle, width=0.1, label=\"\"];", space.id(v));
        }
        for (c, p) in self.edges() {
            let stage = self.edge_stage(c);
            let _ = writeln!(
                s,
                "  \"{}\" -- \"{}\" [color={}, label=\"{}\"];",
                space.id(p),
                space.id(c),
                PALETTE[stage % PALETTE.len()],
                stage
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Smallest pairwise distance of `space` that is at least its `δ`, scaled.
pub fn delta_eff(space: &HypGraphSpace) -> i64 {
    let delta = space.scale_up(space.delta());
    if delta == 0 {
        return 0;
    }
    let n = space.len();
    (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| space.scaled(a, b))
        .filter(|&d| d >= delta)
        .min()
        .unwrap_or(delta)
}

/// Builds the tree with `N` taken from the boundary's doubling constant,
/// doubling `N` up to [`MAX_RETRIES`] times when a cover bound fails.
/// `stages = None` runs to saturation.
pub fn build_tree(space: &HypGraphSpace, boundary: &BoundaryModel, stages: Option<usize>) -> Result<RTree> {
    let n0 = doubling_constant(boundary).n.max(1);
    let mut n = n0;
    let mut attempt = 0;
    loop {
        match build_with(space, boundary, n, stages) {
            Ok(mut t) => {
                t.initial_n = n0;
                t.retries = attempt;
                return Ok(t);
            }
            Err(e) if e.is_bound_violation() && attempt < MAX_RETRIES => {
                n *= 2;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Builds the tree for a fixed doubling count `n`.
pub fn build_with(space: &HypGraphSpace, boundary: &BoundaryModel, n: usize, stages: Option<usize>) -> Result<RTree> {
    if boundary.proxies() != space.proxies() {
        return Err(Error::InvalidArgument("boundary proxies differ from the space's".into()));
    }
    let schedule = make_schedule(boundary, n, stages)?;
    let delta = space.scale_up(space.delta());
    let mut tree = RTree::new(space, schedule.clone(), delta, delta_eff(space));
    let root_rec = tree.attach_root(space, boundary)?;
    tree.log.push(root_rec);
    let mut prev = StageState::initial(boundary, &schedule);
    tree.stages.push(StageData { state: prev.clone(), q_range: None, beta: None, bookkeeping: None });

    for j in 1..=schedule.stages() {
        let state = stage_sets(boundary, &schedule, j, &prev)?;
        let eps_prev = schedule.epsilon(j - 1);
        let eps = schedule.epsilon(j);
        let q_range = if state.ordered_new.is_empty() { None } else { compute_q_q(space, boundary, eps, eps_prev) };
        let beta = compute_beta(eps_prev / eps, boundary.params())?;
        if !state.ordered_new.is_empty() && q_range.is_none() {
            return Err(Error::Stage { stage: j, reason: "new points but no proxy pair in the annulus".into() });
        }
        let q_big = q_range.map_or(0, |q| q.0);
        let start = tree.log.len();
        for p in &state.ordered_new {
            let anchor = state
                .s_prev
                .iter()
                .copied()
                .min_by(|&a, &b| boundary.d(p.pos, a).total_cmp(&boundary.d(p.pos, b)).then(a.cmp(&b)))
                .expect("S_{j-1} is non-empty");
            if boundary.d(p.pos, anchor) > eps_prev * (1.0 + SLACK) {
                return Err(Error::Stage {
                    stage: j,
                    reason: format!("{} has no anchor within eps_{}", boundary.label(p.pos), j - 1),
                });
            }
            let rec = tree.attach_ray(space, boundary, j, p.pos, anchor, p.class, q_big, delta)?;
            tree.log.push(rec);
        }
        let eventual = track_connections(&tree.log[start..], &state.s_prev)?;
        for (r, e) in tree.log[start..].iter_mut().zip(eventual) {
            r.eventually_connected_to = e;
        }
        let bookkeeping = star_bookkeeping(boundary, &prev, &state, &tree.log[start..]);
        tree.stages.push(StageData { state: state.clone(), q_range, beta: Some(beta), bookkeeping: Some(bookkeeping) });
        prev = state;
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_space(len: usize) -> HypGraphSpace {
        let ids = (0..=len).map(|i| format!("v{i}")).collect();
        let one = Length::from_integer(1);
        let edges = (0..len).map(|i| (i, i + 1, one)).collect();
        HypGraphSpace::from_indexed(ids, edges, 0, Length::from_integer(len as i64), vec![len]).unwrap()
    }

    /// Root with three spokes: `a` (tree ray to `A`), `b` (to the target `T`)
    /// and `a'`, plus the bridge `b2–a'2` and the rung `a'5–a5`.
    fn theta() -> HypGraphSpace {
        let mut ids = vec!["r".to_string()];
        ids.extend((1..=5).map(|i| format!("a{i}")));
        ids.push("A".into());
        ids.extend((1..=5).map(|i| format!("b{i}")));
        ids.push("T".into());
        ids.extend((1..=5).map(|i| format!("c{i}")));
        let one = Length::from_integer(1);
        let mut edges = Vec::new();
        for chain in [[0, 1, 2, 3, 4, 5, 6], [0, 7, 8, 9, 10, 11, 12], [0, 13, 14, 15, 16, 17, 6]] {
            for w in chain.windows(2) {
                edges.push((w[0], w[1], one));
            }
        }
        edges.push((8, 14, one));
        edges.push((17, 5, one));
        HypGraphSpace::from_indexed(ids, edges, 0, Length::from_integer(6), vec![6, 12]).unwrap()
    }

    #[test]
    fn connector_case_picks_the_short_rung() {
        let g = theta();
        let b = BoundaryModel::visual(&g, crate::metric::auto_epsilon(g.delta())).unwrap();
        let sched = ScaleSchedule::geometric(1.0, 1, 1);
        let mut t = RTree::new(&g, sched, 1, 1);
        t.attach_root(&g, &b).unwrap();
        // Q = 0 and δ = 1 put the only common vertex `A` outside radius 5
        let rec = t.attach_ray(&g, &b, 1, 1, 0, 1, 0, 1).unwrap();
        assert_eq!(rec.ray, vec![12, 11, 10, 9, 8, 14, 15, 16, 17, 6]);
        assert_eq!(rec.case, AttachCase::B);
        assert_eq!(rec.connector, vec![17, 5]);
        assert_eq!(rec.connector_length, 1);
        assert_eq!(rec.attach_point, 5);
        assert_eq!(rec.branch, vec![12, 11, 10, 9, 8, 14, 15, 16, 17]);
        assert_eq!(t.len(), 16);
        assert_eq!(t.parent(17), Some(5));
    }

    #[test]
    fn connector_case_fails_without_a_short_path() {
        let g = theta();
        let b = BoundaryModel::visual(&g, crate::metric::auto_epsilon(g.delta())).unwrap();
        let mut t = RTree::new(&g, ScaleSchedule::geometric(1.0, 1, 1), 0, 0);
        t.attach_root(&g, &b).unwrap();
        let err = t.attach_ray(&g, &b, 1, 1, 0, 1, 0, 0).unwrap_err();
        assert!(matches!(err, Error::Attach { .. }));
    }

    #[test]
    fn bounds_for_n_two() {
        assert_eq!(net_bound(2), 16.0);
        assert_eq!(share_bound(2), 32.0);
        assert_eq!(fiber_bound(2), 128.0);
    }

    #[test]
    fn single_proxy_gives_one_geodesic() {
        let g = path_space(4);
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let t = build_tree(&g, &b, None).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.ray(4), vec![0, 1, 2, 3, 4]);
        assert_eq!(t.terminals(), &[(4, 0)]);
        assert_eq!(t.log().len(), 1);
        assert_eq!(t.log()[0].case, AttachCase::Root);
    }

    #[test]
    fn star_attaches_everything_in_case_a() {
        let ids = ["r", "a", "b", "c"].map(String::from).to_vec();
        let one = Length::from_integer(1);
        let g = HypGraphSpace::from_indexed(ids, vec![(0, 1, one), (0, 2, one), (0, 3, one)], 0, one, vec![1, 2, 3])
            .unwrap();
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let t = build_tree(&g, &b, None).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.log()[1..].iter().all(|r| r.case == AttachCase::A && r.connector.is_empty()));
        let mut targets: Vec<usize> = t.terminals().iter().map(|x| x.1).collect();
        targets.sort_unstable();
        assert_eq!(targets, vec![0, 1, 2]);
        assert!(t.to_dot(&g).starts_with("graph rtree {"));
    }
}
