//! Ray attachment and the connection bookkeeping between boundary points.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;

use crate::boundary::BoundaryModel;
use crate::error::{Error, Result};
use crate::graph::HypGraphSpace;

use super::stage::StageState;
use super::RTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttachCase {
    /// The initial geodesic from the root.
    Root,
    /// The ray meets the tree near the root; its outer part is attached.
    A,
    /// A short connector joins the ray to the anchor's tree ray.
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachRecord {
    pub stage: usize,
    /// Proxy positions.
    pub target: usize,
    pub anchor: usize,
    pub class: usize,
    pub case: AttachCase,
    /// Canonical geodesic from the target's vertex to the anchor's vertex.
    pub ray: Vec<usize>,
    /// Tree vertex the new branch hangs from (`x`, or `x_P` in case B).
    pub attach_point: usize,
    /// New vertices, from the target inwards.
    pub branch: Vec<usize>,
    /// Connector from the ray to `attach_point`, both ends included.
    pub connector: Vec<usize>,
    /// Scaled length of `connector`.
    pub connector_length: i64,
    /// Number of tree vertices before this attachment.
    pub tree_size_before: usize,
    pub connected_to: usize,
    pub eventually_connected_to: usize,
}

impl AttachRecord {
    pub fn to_json(&self, space: &HypGraphSpace, boundary: &BoundaryModel) -> serde_json::Value {
        let ids = |v: &[usize]| v.iter().map(|&x| space.id(x).to_string()).collect::<Vec<_>>();
        serde_json::json!({
            "stage": self.stage,
            "target": boundary.label(self.target),
            "anchor": boundary.label(self.anchor),
            "class": self.class,
            "case": self.case,
            "ray": ids(&self.ray),
            "attach_point": space.id(self.attach_point),
            "branch": ids(&self.branch),
            "connector": ids(&self.connector),
            "connector_length": crate::length::format_length(&space.to_length(self.connector_length)),
            "connected_to": boundary.label(self.connected_to),
            "eventually_connected_to": boundary.label(self.eventually_connected_to),
        })
    }
}

const INF: i64 = i64::MAX;

/// Dijkstra from `start` through vertices passing `pass`; vertices passing
/// `stop` get a distance but are not expanded. Distances above `limit` are
/// dropped.
fn restricted_dijkstra(
    space: &HypGraphSpace,
    start: usize,
    limit: i64,
    pass: &dyn Fn(usize) -> bool,
    stop: &dyn Fn(usize) -> bool,
) -> Vec<i64> {
    let mut dist = vec![INF; space.len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0;
    heap.push(Reverse((0i64, start)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] || (u != start && !pass(u)) {
            continue;
        }
        for &(v, w) in space.neighbors(u) {
            let nd = d + w;
            if nd <= limit && nd < dist[v] && (pass(v) || stop(v)) {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

impl RTree {
    /// Hangs `path` from its last vertex, which must already be in the tree.
    fn add_path(&mut self, space: &HypGraphSpace, path: &[usize], stage: usize, owner: usize) -> Result<()> {
        let last = *path.last().expect("non-empty path");
        if !self.in_tree[last] {
            return Err(Error::Attach {
                target: space.id(path[0]).to_string(),
                reason: format!("branch end `{}` is not in the tree", space.id(last)),
            });
        }
        for i in (0..path.len() - 1).rev() {
            let v = path[i];
            if self.in_tree[v] {
                return Err(Error::Attach {
                    target: space.id(path[0]).to_string(),
                    reason: format!("branch revisits tree vertex `{}`", space.id(v)),
                });
            }
            let w = space.is_adjacent(v, path[i + 1]).ok_or_else(|| Error::Attach {
                target: space.id(path[0]).to_string(),
                reason: "branch steps along a non-edge".into(),
            })?;
            self.insert(v, Some((path[i + 1], w)), stage, owner);
        }
        Ok(())
    }

    pub(super) fn attach_root(&mut self, space: &HypGraphSpace, boundary: &BoundaryModel) -> Result<AttachRecord> {
        let root = space.root();
        let t = boundary.vertex(0);
        let mut path = space.canonical_geodesic(root, t).vertices;
        path.reverse();
        let before = self.order.len();
        self.add_path(space, &path, 0, 0)?;
        self.terminals.push((t, 0));
        Ok(AttachRecord {
            stage: 0,
            target: 0,
            anchor: 0,
            class: 1,
            case: AttachCase::Root,
            ray: path.clone(),
            attach_point: root,
            branch: path[..path.len() - 1].to_vec(),
            connector: Vec::new(),
            connector_length: 0,
            tree_size_before: before,
            connected_to: 0,
            eventually_connected_to: 0,
        })
    }

    /// Attaches a ray to proxy `target` using the canonical geodesic `R` from
    /// it to `anchor`. `q_big` and `delta` are scaled lengths.
    #[allow(clippy::too_many_arguments)]
    pub(super) fn attach_ray(
        &mut self,
        space: &HypGraphSpace,
        boundary: &BoundaryModel,
        stage: usize,
        target: usize,
        anchor: usize,
        class: usize,
        q_big: i64,
        delta: i64,
    ) -> Result<AttachRecord> {
        let t = boundary.vertex(target);
        let a = boundary.vertex(anchor);
        let root = space.root();
        let before = self.order.len();
        let mut rec = AttachRecord {
            stage,
            target,
            anchor,
            class,
            case: AttachCase::A,
            ray: Vec::new(),
            attach_point: t,
            branch: Vec::new(),
            connector: Vec::new(),
            connector_length: 0,
            tree_size_before: before,
            connected_to: 0,
            eventually_connected_to: 0,
        };
        if self.in_tree[t] {
            rec.connected_to = self.owner[t];
            self.terminals.push((t, target));
            return Ok(rec);
        }
        let ray = space.double_ray_proxy(t, a)?.vertices;
        let x_idx = ray.iter().position(|&v| self.in_tree[v]).expect("anchor lies on the tree");
        let lim5 = q_big + 5 * delta;
        let lim6 = q_big + 6 * delta;
        let near = ray.iter().any(|&v| self.in_tree[v] && space.scaled(root, v) <= lim5);
        if near {
            let x = ray[x_idx];
            rec.attach_point = x;
            rec.branch = ray[..x_idx].to_vec();
            rec.connected_to = self.owner[x];
            self.add_path(space, &ray[..=x_idx], stage, target)?;
        } else {
            let fail = |reason: String| Error::Attach { target: boundary.label(target).to_string(), reason };
            let mut window = vec![false; space.len()];
            let mut any_window = false;
            let mut v = Some(a);
            while let Some(u) = v {
                let du = space.scaled(root, u);
                if du >= lim5 && du <= lim6 {
                    window[u] = true;
                    any_window = true;
                }
                v = self.parent[u].map(|p| p.0);
            }
            if !any_window {
                return Err(fail(format!(
                    "the anchor ray has no vertex between radius {} and {}",
                    space.to_length(lim5),
                    space.to_length(lim6)
                )));
            }
            let mut on_ray = vec![false; space.len()];
            for &v in &ray {
                on_ray[v] = true;
            }
            let allowed = |u: usize| !self.in_tree[u] && !on_ray[u] && space.scaled(root, u) <= lim6;
            let is_window = |u: usize| window[u];
            let arc = space.arc_lengths(&ray)?;
            let near_q: Vec<usize> = (0..ray.len()).filter(|&i| space.scaled(root, ray[i]) <= q_big).collect();
            let limit = self.delta_eff;

            let mut best: Option<(i64, i64, usize, usize)> = None;
            for y_idx in 0..x_idx {
                let y = ray[y_idx];
                if space.scaled(root, y) > lim6 {
                    continue;
                }
                let along_ray = near_q.iter().map(|&i| (arc[y_idx] - arc[i]).abs()).min().unwrap_or(0);
                let dist = restricted_dijkstra(space, y, limit, &allowed, &is_window);
                for (w, &d) in dist.iter().enumerate() {
                    if window[w] && d != INF {
                        let key = (d, along_ray + d, y_idx, w);
                        if best.is_none_or(|b| key < b) {
                            best = Some(key);
                        }
                    }
                }
            }
            let Some((len, _, y_idx, x_p)) = best else {
                return Err(fail(format!(
                    "no connector of length at most {} inside radius {}",
                    space.to_length(limit),
                    space.to_length(lim6)
                )));
            };
            let y = ray[y_idx];
            let back = restricted_dijkstra(space, x_p, limit, &allowed, &|u| u == y);
            let mut connector = vec![y];
            let mut u = y;
            while u != x_p {
                let next = space
                    .neighbors(u)
                    .iter()
                    .find(|&&(v, w)| (v == x_p || allowed(v)) && back[v] != INF && w + back[v] == back[u])
                    .map(|&(v, _)| v)
                    .expect("connector reconstruction follows the distance labels");
                connector.push(next);
                u = next;
            }
            let mut path = ray[..=y_idx].to_vec();
            path.extend_from_slice(&connector[1..]);
            rec.case = AttachCase::B;
            rec.attach_point = x_p;
            rec.branch = path[..path.len() - 1].to_vec();
            rec.connector = connector;
            rec.connector_length = len;
            rec.connected_to = self.owner[x_p];
            self.add_path(space, &path, stage, target)?;
        }
        rec.ray = ray;
        self.terminals.push((t, target));
        Ok(rec)
    }
}

/// Follows `connected_to` through the records of one stage until it reaches
/// a point of `s_prev`. Returns the eventual target of each record, in order.
pub fn track_connections(records: &[AttachRecord], s_prev: &[usize]) -> Result<Vec<usize>> {
    let by_target: BTreeMap<usize, usize> = records.iter().enumerate().map(|(i, r)| (r.target, i)).collect();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let mut seen = BTreeSet::new();
        let mut cur = r.connected_to;
        while !s_prev.contains(&cur) {
            if !seen.insert(cur) {
                return Err(Error::ConnectionCycle(cur.to_string()));
            }
            match by_target.get(&cur) {
                Some(&i) => cur = records[i].connected_to,
                None => return Err(Error::ConnectionCycle(cur.to_string())),
            }
        }
        out.push(cur);
    }
    Ok(out)
}

/// Per-ball counts for one stage: how many balls of the previous cover the
/// eventual targets of a ball's new points fall into, and how many of those
/// new points share one eventual target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StarBookkeeping {
    pub stage: usize,
    pub max_target_balls: usize,
    pub max_shared_target: usize,
    /// Center of the ball attaining the larger ratio to its bound.
    pub witness: Option<usize>,
}

pub fn star_bookkeeping(
    boundary: &BoundaryModel,
    previous: &StageState,
    stage: &StageState,
    records: &[AttachRecord],
) -> StarBookkeeping {
    let eventual: BTreeMap<usize, usize> = records
        .iter()
        .filter(|r| r.stage == stage.j)
        .map(|r| (r.target, r.eventually_connected_to))
        .collect();
    let prev_centers = &previous.cover.centers;
    let ball_of = |p: usize| {
        (0..prev_centers.len())
            .min_by(|&a, &b| boundary.d(p, prev_centers[a]).total_cmp(&boundary.d(p, prev_centers[b])))
            .expect("non-empty cover")
    };
    let mut out = StarBookkeeping { stage: stage.j, max_target_balls: 0, max_shared_target: 0, witness: None };
    for (c, members) in stage.cover.centers.iter().zip(&stage.cover.members) {
        let mut balls = BTreeSet::new();
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for p in members {
            if let Some(&e) = eventual.get(p) {
                balls.insert(ball_of(e));
                *shared.entry(e).or_default() += 1;
            }
        }
        let share = shared.values().copied().max().unwrap_or(0);
        if balls.len() > out.max_target_balls || share > out.max_shared_target {
            out.witness = Some(*c);
        }
        out.max_target_balls = out.max_target_balls.max(balls.len());
        out.max_shared_target = out.max_shared_target.max(share);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(target: usize, connected_to: usize) -> AttachRecord {
        AttachRecord {
            stage: 1,
            target,
            anchor: 0,
            class: 1,
            case: AttachCase::A,
            ray: Vec::new(),
            attach_point: 0,
            branch: Vec::new(),
            connector: Vec::new(),
            connector_length: 0,
            tree_size_before: 0,
            connected_to,
            eventually_connected_to: 0,
        }
    }

    #[test]
    fn direct_connection() {
        assert_eq!(track_connections(&[rec(1, 0)], &[0]).unwrap(), vec![0]);
    }

    #[test]
    fn chained_connection() {
        // 3 -> 2 -> 0 with 0 old
        let log = [rec(2, 0), rec(3, 2)];
        assert_eq!(track_connections(&log, &[0]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn cycle_is_an_error() {
        let log = [rec(2, 3), rec(3, 2)];
        assert!(matches!(track_connections(&log, &[0]), Err(Error::ConnectionCycle(_))));
    }
}
