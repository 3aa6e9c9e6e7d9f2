//! Rooted weighted graphs viewed as geodesic spaces: shortest-path metric,
//! canonical geodesics, the thin-triangle constant, boundary proxies and
//! quasi-geodesic measurements.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::length::{self, Length};
use crate::metric::FiniteMetricSpace;

#[derive(Debug, Clone)]
pub struct HypGraphSpace {
    adj: Vec<Vec<(usize, i64)>>,
    edges: Vec<(usize, usize, Length)>,
    metric: FiniteMetricSpace,
    root: usize,
    horizon: Length,
    proxies: Vec<usize>,
    delta: Length,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<String>,
    edges: Vec<(String, String, String)>,
    root: String,
    horizon: String,
    proxies: Vec<String>,
}

/// A shortest path, stored as vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub vertices: Vec<usize>,
    #[serde(with = "crate::length")]
    pub length: Length,
}

/// Multiplicative factors probed by [`HypGraphSpace::quasi_geodesic_constants`].
pub const GAMMA1_GRID: [(i64, i64); 5] = [(1, 1), (5, 4), (3, 2), (2, 1), (3, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiGeodesicConstants {
    /// `(γ1, least γ2)` for every factor in [`GAMMA1_GRID`].
    pub frontier: Vec<(String, String)>,
    #[serde(with = "crate::length")]
    pub gamma1: Length,
    #[serde(with = "crate::length")]
    pub gamma2: Length,
}

impl HypGraphSpace {
    pub fn new(
        ids: Vec<String>,
        edges: Vec<(String, String, Length)>,
        root: &str,
        horizon: Length,
        proxies: &[String],
    ) -> Result<Self> {
        let index: std::collections::HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::UnknownPoint(s.to_string()))
        };
        let mut indexed = Vec::with_capacity(edges.len());
        for (u, v, l) in &edges {
            indexed.push((lookup(u)?, lookup(v)?, *l));
        }
        let root = lookup(root)?;
        let proxies = proxies.iter().map(|p| lookup(p)).collect::<Result<Vec<_>>>()?;
        Self::from_indexed(ids, indexed, root, horizon, proxies)
    }

    pub fn from_indexed(
        ids: Vec<String>,
        edges: Vec<(usize, usize, Length)>,
        root: usize,
        horizon: Length,
        mut proxies: Vec<usize>,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::InvalidArgument("graph has no vertices".into()));
        }
        if root >= n {
            return Err(Error::InvalidArgument("root out of range".into()));
        }
        let den = length::common_denominator(edges.iter().map(|e| &e.2))?;
        let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        for &(u, v, l) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument("edge endpoint out of range".into()));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at `{}`", ids[u])));
            }
            if l <= Length::from_integer(0) {
                return Err(Error::InvalidArgument(format!(
                    "edge {}-{} must have positive length",
                    ids[u], ids[v]
                )));
            }
            if adj[u].iter().any(|&(w, _)| w == v) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge {}-{}",
                    ids[u], ids[v]
                )));
            }
            let w = length::scale_to(&l, den)?;
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        for row in &mut adj {
            row.sort_unstable();
        }

        let rows: Vec<Vec<i64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
        if let Some(v) = rows[root].iter().position(|&d| d == i64::MAX) {
            return Err(Error::Disconnected(ids[v].clone(), ids[root].clone()));
        }
        let num: Vec<i64> = rows.into_iter().flatten().collect();
        let metric = FiniteMetricSpace::from_scaled(ids, num, den)?;

        proxies.sort_unstable();
        proxies.dedup();
        for &p in &proxies {
            if p >= n {
                return Err(Error::InvalidArgument("proxy out of range".into()));
            }
            if metric.dist(root, p) < horizon {
                return Err(Error::InvalidArgument(format!(
                    "proxy `{}` lies inside the horizon",
                    metric.id(p)
                )));
            }
        }

        let mut space = Self {
            adj,
            edges,
            metric,
            root,
            horizon,
            proxies,
            delta: Length::from_integer(0),
        };
        space.delta = space.delta_thin_triangles();
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn metric(&self) -> &FiniteMetricSpace {
        &self.metric
    }

    pub fn id(&self, v: usize) -> &str {
        self.metric.id(v)
    }

    pub fn ids(&self) -> &[String] {
        self.metric.ids()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn horizon(&self) -> Length {
        self.horizon
    }

    pub fn proxies(&self) -> &[usize] {
        &self.proxies
    }

    pub fn is_proxy(&self, v: usize) -> bool {
        self.proxies.binary_search(&v).is_ok()
    }

    pub fn delta(&self) -> Length {
        self.delta
    }

    pub fn edges(&self) -> &[(usize, usize, Length)] {
        &self.edges
    }

    /// Neighbours with edge weights scaled by [`Self::den`], sorted by index.
    pub fn neighbors(&self, v: usize) -> &[(usize, i64)] {
        &self.adj[v]
    }

    pub fn den(&self) -> i64 {
        self.metric.den()
    }

    #[inline]
    pub fn scaled(&self, u: usize, v: usize) -> i64 {
        self.metric.scaled(u, v)
    }

    pub fn dist(&self, u: usize, v: usize) -> Length {
        self.metric.dist(u, v)
    }

    pub fn to_length(&self, scaled: i64) -> Length {
        Length::new(scaled, self.den())
    }

    /// Numerator of `l` over [`Self::den`], rounded up.
    pub fn scale_up(&self, l: Length) -> i64 {
        (l * Length::from_integer(self.den())).ceil().to_integer()
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Largest edge length.
    pub fn max_edge(&self) -> Length {
        self.edges
            .iter()
            .map(|e| e.2)
            .max()
            .unwrap_or_else(|| Length::from_integer(0))
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> Option<i64> {
        self.adj[u]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| self.adj[u][i].1)
    }

    /// Lexicographically least shortest path from `x` to `y`.
    pub fn canonical_geodesic(&self, x: usize, y: usize) -> GeodesicPath {
        let mut vertices = vec![x];
        let mut cur = x;
        while cur != y {
            let rest = self.scaled(cur, y);
            let next = self.adj[cur]
                .iter()
                .find(|&&(u, w)| w + self.scaled(u, y) == rest)
                .map(|&(u, _)| u)
                .expect("a connected graph always has a next geodesic step");
            vertices.push(next);
            cur = next;
        }
        GeodesicPath { vertices, length: self.dist(x, y) }
    }

    /// Truncation of the double ray between two distinct boundary proxies.
    pub fn double_ray_proxy(&self, eta: usize, mu: usize) -> Result<GeodesicPath> {
        for p in [eta, mu] {
            if !self.is_proxy(p) {
                return Err(Error::InvalidArgument(format!(
                    "`{}` is not a boundary proxy",
                    self.id(p)
                )));
            }
        }
        if eta == mu {
            return Err(Error::InvalidArgument(
                "a double ray needs two distinct boundary proxies".into(),
            ));
        }
        Ok(self.canonical_geodesic(eta, mu))
    }

    /// Distance from `z` to the vertices of `path`.
    pub fn dist_to_path(&self, z: usize, path: &[usize]) -> Length {
        self.to_length(self.scaled_dist_to_path(z, path))
    }

    pub(crate) fn scaled_dist_to_path(&self, z: usize, path: &[usize]) -> i64 {
        path.iter().map(|&v| self.scaled(z, v)).min().unwrap_or(i64::MAX)
    }

    /// Scaled distance from every vertex to the nearest member of `set`.
    pub fn scaled_dist_to_set(&self, set: &[usize]) -> Vec<i64> {
        let n = self.len();
        (0..n)
            .map(|v| set.iter().map(|&s| self.scaled(v, s)).min().unwrap_or(i64::MAX))
            .collect()
    }

    /// Arc-length prefix sums of a vertex sequence; errors on a non-edge step.
    pub(crate) fn arc_lengths(&self, path: &[usize]) -> Result<Vec<i64>> {
        let mut s = Vec::with_capacity(path.len());
        let mut acc = 0i64;
        for (i, &v) in path.iter().enumerate() {
            if i > 0 {
                let w = self.is_adjacent(path[i - 1], v).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "`{}` and `{}` are not adjacent",
                        self.id(path[i - 1]),
                        self.id(v)
                    ))
                })?;
                acc += w;
            }
            s.push(acc);
        }
        Ok(s)
    }

    /// Least additive constants per multiplicative factor for the path's
    /// lower quasi-isometry bound; the headline pair is taken at `γ1 = 2`.
    pub fn quasi_geodesic_constants(&self, path: &[usize]) -> Result<QuasiGeodesicConstants> {
        let s = self.arc_lengths(path)?;
        let den = self.den();
        let mut frontier = Vec::with_capacity(GAMMA1_GRID.len());
        let mut headline = None;
        for &(p, q) in &GAMMA1_GRID {
            // γ2 = max(0, max_{i<j} (Δs·q/p − d)), all over den.
            let mut best = Length::from_integer(0);
            for i in 0..path.len() {
                for j in (i + 1)..path.len() {
                    let gap = Length::new((s[j] - s[i]) * q, p * den)
                        - Length::new(self.scaled(path[i], path[j]), den);
                    if gap > best {
                        best = gap;
                    }
                }
            }
            let gamma1 = Length::new(p, q);
            frontier.push((length::format_length(&gamma1), length::format_length(&best)));
            if (p, q) == (2, 1) {
                headline = Some((gamma1, best));
            }
        }
        let (gamma1, gamma2) = headline.expect("grid contains γ1 = 2");
        Ok(QuasiGeodesicConstants { frontier, gamma1, gamma2 })
    }

    /// Least `γ2` at `γ1 = 1`: the additive stretch of the path.
    pub fn additive_stretch(&self, path: &[usize]) -> Result<Length> {
        let s = self.arc_lengths(path)?;
        let mut best = 0i64;
        for i in 0..path.len() {
            for j in (i + 1)..path.len() {
                best = best.max(s[j] - s[i] - self.scaled(path[i], path[j]));
            }
        }
        Ok(self.to_length(best))
    }

    /// Symmetric Hausdorff distance between the path's vertices and the
    /// canonical geodesic joining its endpoints.
    pub fn hausdorff_to_geodesic(&self, path: &[usize]) -> Result<Length> {
        let (Some(&first), Some(&last)) = (path.first(), path.last()) else {
            return Err(Error::InvalidArgument("empty path".into()));
        };
        let geo = self.canonical_geodesic(first, last).vertices;
        let one = path
            .iter()
            .map(|&v| self.scaled_dist_to_path(v, &geo))
            .max()
            .unwrap_or(0);
        let other = geo
            .iter()
            .map(|&v| self.scaled_dist_to_path(v, path))
            .max()
            .unwrap_or(0);
        Ok(self.to_length(one.max(other)))
    }

    /// Thin-triangle constant over all vertex triples and all geodesics.
    ///
    /// For a fixed vertex `p`, `far[x][y]` is the largest distance from `p`
    /// to any geodesic from `x` to `y` (a bottleneck dynamic program over the
    /// shortest-path DAG, so geodesics are never enumerated). A triple then
    /// contributes `min(far[y][x], far[y][z])` for each `p` on some `[x,z]`.
    pub fn delta_thin_triangles(&self) -> Length {
        if self.is_tree() {
            return Length::from_integer(0);
        }
        let n = self.len();
        let orders: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut o: Vec<usize> = (0..n).collect();
                o.sort_by_key(|&y| (self.scaled(x, y), y));
                o
            })
            .collect();

        let worst = (0..n)
            .into_par_iter()
            .map(|p| {
                let far = self.farthest_geodesic_table(p, &orders);
                let mut best = 0i64;
                for x in 0..n {
                    let dpx = self.scaled(p, x);
                    if dpx <= best {
                        continue;
                    }
                    for z in x..n {
                        let dpz = self.scaled(p, z);
                        if dpz <= best || dpx + dpz != self.scaled(x, z) {
                            continue;
                        }
                        for y in 0..n {
                            let v = far[y * n + x].min(far[y * n + z]);
                            if v > best {
                                best = v;
                            }
                        }
                    }
                }
                best
            })
            .max()
            .unwrap_or(0);
        self.to_length(worst)
    }

    fn farthest_geodesic_table(&self, p: usize, orders: &[Vec<usize>]) -> Vec<i64> {
        let n = self.len();
        let mut far = vec![0i64; n * n];
        for x in 0..n {
            let row = &mut far[x * n..(x + 1) * n];
            for &y in &orders[x] {
                let own = self.scaled(p, y);
                if y == x {
                    row[y] = own;
                    continue;
                }
                let dxy = self.scaled(x, y);
                let mut via = i64::MIN;
                for &(u, w) in &self.adj[y] {
                    if self.scaled(x, u) + w == dxy {
                        via = via.max(row[u]);
                    }
                }
                row[y] = own.min(via);
            }
        }
        far
    }

    /// Induced subgraph on `keep` (indices into this space), with the same
    /// root, horizon and the proxies that survive.
    pub fn induced(&self, keep: &[usize]) -> Result<(HypGraphSpace, Vec<usize>)> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut new_index = vec![usize::MAX; self.len()];
        for (i, &v) in keep.iter().enumerate() {
            new_index[v] = i;
        }
        if new_index[self.root] == usize::MAX {
            return Err(Error::InvalidArgument("induced subgraph must keep the root".into()));
        }
        let ids = keep.iter().map(|&v| self.id(v).to_string()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|(u, v, _)| new_index[*u] != usize::MAX && new_index[*v] != usize::MAX)
            .map(|&(u, v, l)| (new_index[u], new_index[v], l))
            .collect();
        let proxies = self
            .proxies
            .iter()
            .filter(|&&p| new_index[p] != usize::MAX)
            .map(|&p| new_index[p])
            .collect();
        let sub = HypGraphSpace::from_indexed(ids, edges, new_index[self.root], self.horizon, proxies)?;
        Ok((sub, keep))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = GraphJson {
            vertices: self.ids().to_vec(),
            edges: self
                .edges
                .iter()
                .map(|&(u, v, l)| {
                    (self.id(u).to_string(), self.id(v).to_string(), length::format_length(&l))
                })
                .collect(),
            root: self.id(self.root).to_string(),
            horizon: length::format_length(&self.horizon),
            proxies: self.proxies.iter().map(|&p| self.id(p).to_string()).collect(),
        };
        serde_json::to_value(raw).expect("graph json is always serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: GraphJson = serde_json::from_value(value.clone())?;
        let edges = raw
            .edges
            .into_iter()
            .map(|(u, v, l)| Ok((u, v, length::parse_length(&l)?)))
            .collect::<Result<Vec<_>>>()?;
        let horizon = length::parse_length(&raw.horizon)?;
        Self::new(raw.vertices, edges, &raw.root, horizon, &raw.proxies)
    }
}

fn dijkstra(adj: &[Vec<(usize, i64)>], source: usize) -> Vec<i64> {
    let mut dist = vec![i64::MAX; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0;
    heap.push(Reverse((0i64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}
