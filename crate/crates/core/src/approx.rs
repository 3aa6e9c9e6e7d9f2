//! Instance generators: hyperbolic approximations of finite metric spaces,
//! classical graphs, and visual cores.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundaryModel;
use crate::doubling::separated_net;
use crate::error::{Error, Result};
use crate::graph::{GeodesicPath, HypGraphSpace};
use crate::length::{self, Length};
use crate::metric::FiniteMetricSpace;

/// Left endpoints of the `2^depth` intervals kept after `depth` rounds of
/// removing the middle `1 − 2·ratio` of every interval of `[0, 1]`.
pub fn cantor(depth: u32, ratio: Length) -> Result<FiniteMetricSpace> {
    let zero = Length::from_integer(0);
    if !(ratio > zero && ratio < Length::new(1, 2)) {
        return Err(Error::InvalidArgument("cantor ratio must lie in (0, 1/2)".into()));
    }
    if depth > 12 {
        return Err(Error::InvalidArgument("cantor depth above 12".into()));
    }
    let mut points = vec![(String::from("c"), zero)];
    let mut len = Length::from_integer(1);
    for _ in 0..depth {
        let child = len * ratio;
        points = points
            .into_iter()
            .flat_map(|(id, a)| [(format!("{id}0"), a), (format!("{id}1"), a + len - child)])
            .collect();
        len = child;
    }
    line_space(points)
}

/// `n` equally spaced points of `[0, 1]`.
pub fn interval(n: usize) -> Result<FiniteMetricSpace> {
    if n == 0 {
        return Err(Error::InvalidArgument("interval needs at least one point".into()));
    }
    let step = if n == 1 { 0 } else { n as i64 - 1 };
    line_space(
        (0..n)
            .map(|k| {
                let x = if step == 0 { Length::from_integer(0) } else { Length::new(k as i64, step) };
                (format!("i{k}"), x)
            })
            .collect(),
    )
}

fn line_space(points: Vec<(String, Length)>) -> Result<FiniteMetricSpace> {
    let ids = points.iter().map(|p| p.0.clone()).collect();
    let dist = points
        .iter()
        .map(|(_, a)| {
            points
                .iter()
                .map(|(_, b)| if a > b { a - b } else { b - a })
                .collect()
        })
        .collect();
    FiniteMetricSpace::new(ids, dist)
}

/// `n × n` grid of the unit square with the ℓ1 metric.
pub fn grid_points(n: usize) -> Result<FiniteMetricSpace> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid needs n ≥ 1".into()));
    }
    let step = (n as i64 - 1).max(1);
    let coords: Vec<(i64, i64)> = (0..n as i64).flat_map(|i| (0..n as i64).map(move |j| (i, j))).collect();
    let ids = coords.iter().map(|(i, j)| format!("g{i}_{j}")).collect();
    let dist = coords
        .iter()
        .map(|a| {
            coords
                .iter()
                .map(|b| Length::new((a.0 - b.0).abs() + (a.1 - b.1).abs(), step))
                .collect()
        })
        .collect();
    FiniteMetricSpace::new(ids, dist)
}

/// Unit grid graph rooted at a corner; proxies are the vertices at distance
/// at least `n − 1` from the root.
pub fn grid_graph(n: usize) -> Result<HypGraphSpace> {
    if n < 2 {
        return Err(Error::InvalidArgument("grid graph needs n ≥ 2".into()));
    }
    let id = |i: usize, j: usize| i * n + j;
    let ids = (0..n).flat_map(|i| (0..n).map(move |j| format!("g{i}_{j}"))).collect();
    let one = Length::from_integer(1);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                edges.push((id(i, j), id(i + 1, j), one));
            }
            if j + 1 < n {
                edges.push((id(i, j), id(i, j + 1), one));
            }
        }
    }
    let proxies = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i + j >= n - 1)
        .map(|(i, j)| id(i, j))
        .collect();
    HypGraphSpace::from_indexed(ids, edges, 0, Length::from_integer(n as i64 - 1), proxies)
}

/// Ball of the given radius in the Cayley graph of the free group on `rank`
/// generators; the sphere is the proxy set.
pub fn free_group_ball(rank: usize, radius: usize) -> Result<HypGraphSpace> {
    if rank == 0 || rank > 26 {
        return Err(Error::InvalidArgument("rank must lie in 1..=26".into()));
    }
    if radius == 0 || radius > 12 {
        return Err(Error::InvalidArgument("radius must lie in 1..=12".into()));
    }
    let letters: Vec<char> = (0..rank)
        .flat_map(|i| {
            let c = (b'a' + i as u8) as char;
            [c, c.to_ascii_uppercase()]
        })
        .collect();
    let inverse = |c: char| {
        if c.is_ascii_lowercase() { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() }
    };
    let mut words = vec![String::new()];
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &w in &frontier {
            let last = words[w].chars().last();
            for &c in &letters {
                if last.map(inverse) == Some(c) {
                    continue;
                }
                let word = format!("{}{c}", words[w]);
                words.push(word);
                let v = words.len() - 1;
                edges.push((w, v, Length::from_integer(1)));
                next.push(v);
            }
        }
        frontier = next;
    }
    let ids = words
        .iter()
        .map(|w| if w.is_empty() { "e".to_string() } else { w.clone() })
        .collect();
    HypGraphSpace::from_indexed(ids, edges, 0, Length::from_integer(radius as i64), frontier)
}

#[derive(Debug, Clone)]
pub struct HyperbolicApproximation {
    pub base: FiniteMetricSpace,
    /// Scale unit `s = diam(X)`.
    pub scale: Length,
    /// Nested nets `V_0 ⊆ … ⊆ V_J`, as point indices of `base`.
    pub nets: Vec<Vec<usize>>,
    pub graph: HypGraphSpace,
    /// `(level, point)` of every graph vertex.
    pub vertex_level: Vec<(usize, usize)>,
    /// Point of `base` under each proxy, in proxy order.
    pub identification: Vec<usize>,
}

/// Smallest level count `J` with `2^{−J}·s < (min separation)/2`.
pub fn default_levels(base: &FiniteMetricSpace) -> usize {
    let Some(min) = base.min_separation() else {
        return 1;
    };
    let s = base.diameter();
    let mut j = 0;
    let mut scale = s;
    while scale * Length::from_integer(2) >= min {
        scale /= Length::from_integer(2);
        j += 1;
    }
    j
}

/// Level graph over nested nets: vertices `(k, v)` for `v ∈ V_k`, where
/// `V_k` is a maximal `2^{−k}s`-separated extension of `V_{k−1}`;
/// horizontal edges join points within `4·2^{−k}s`, vertical edges join
/// levels `k, k+1` within `3·2^{−k−1}s`. All edges have unit length.
pub fn build_hyperbolic_approximation(
    base: &FiniteMetricSpace,
    levels: usize,
) -> Result<HyperbolicApproximation> {
    if base.is_empty() {
        return Err(Error::InvalidArgument("cannot approximate an empty space".into()));
    }
    let s = base.diameter();
    let mut nets: Vec<Vec<usize>> = Vec::with_capacity(levels + 1);
    let mut radius = s;
    for k in 0..=levels {
        let seed = if k == 0 { Vec::new() } else { nets[k - 1].clone() };
        let mut net = separated_net(base, radius, &seed)?;
        net.sort_unstable();
        nets.push(net);
        radius /= Length::from_integer(2);
    }

    let mut vertex_level = Vec::new();
    let mut level_start = Vec::with_capacity(levels + 1);
    for (k, net) in nets.iter().enumerate() {
        level_start.push(vertex_level.len());
        vertex_level.extend(net.iter().map(|&v| (k, v)));
    }
    let ids: Vec<String> = vertex_level
        .iter()
        .map(|&(k, v)| format!("L{k}:{}", base.id(v)))
        .collect();

    let one = Length::from_integer(1);
    let mut edges = Vec::new();
    let mut step = s;
    for k in 0..=levels {
        let horizontal = step * Length::from_integer(4);
        let vertical = step * Length::new(3, 2);
        let here = &nets[k];
        for a in 0..here.len() {
            for b in (a + 1)..here.len() {
                if base.dist(here[a], here[b]) <= horizontal {
                    edges.push((level_start[k] + a, level_start[k] + b, one));
                }
            }
        }
        if k < levels {
            let below = &nets[k + 1];
            for a in 0..here.len() {
                for b in 0..below.len() {
                    if base.dist(here[a], below[b]) <= vertical {
                        edges.push((level_start[k] + a, level_start[k + 1] + b, one));
                    }
                }
            }
        }
        step /= Length::from_integer(2);
    }

    let proxies: Vec<usize> = (level_start[levels]..vertex_level.len()).collect();
    let identification = proxies.iter().map(|&p| vertex_level[p].1).collect();
    let graph = HypGraphSpace::from_indexed(
        ids,
        edges,
        0,
        Length::from_integer(levels as i64),
        proxies,
    )?;
    Ok(HyperbolicApproximation {
        base: base.clone(),
        scale: s,
        nets,
        graph,
        vertex_level,
        identification,
    })
}

impl HyperbolicApproximation {
    pub fn levels(&self) -> usize {
        self.nets.len() - 1
    }

    /// Boundary model; `transported` selects the base metric over the
    /// visual one.
    pub fn boundary_model(&self, epsilon: f64, transported: bool) -> Result<BoundaryModel> {
        if transported {
            BoundaryModel::transported(&self.graph, epsilon, &self.base, &self.identification)
        } else {
            BoundaryModel::visual(&self.graph, epsilon)
        }
    }

    /// Vertices below the deepest level without a vertical edge downwards.
    pub fn dead_ends(&self) -> Vec<usize> {
        let levels = self.levels();
        (0..self.graph.len())
            .filter(|&v| {
                let (k, _) = self.vertex_level[v];
                k < levels
                    && !self
                        .graph
                        .neighbors(v)
                        .iter()
                        .any(|&(u, _)| self.vertex_level[u].0 == k + 1)
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "base": self.base.to_json(),
            "scale": length::format_length(&self.scale),
            "levels": self.levels(),
            "nets": self.nets.iter().map(|n| n.iter().map(|&v| self.base.id(v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "graph": self.graph.to_json(),
            "identification": self.identification.iter().map(|&v| self.base.id(v)).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VisualityCertificate {
    #[serde(with = "crate::length")]
    pub d: Length,
    /// Per vertex, the proxy vertex maximizing `(x,η)_o` (`None` without proxies).
    pub witnesses: Vec<Option<usize>>,
}

/// `D = max(0, max_x (d(o,x) − max_η (x,η)_o))`.
pub fn visuality_certificate(space: &HypGraphSpace) -> VisualityCertificate {
    let o = space.root();
    let metric = space.metric();
    let per_vertex: Vec<(i64, Option<usize>)> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let best = space
                .proxies()
                .iter()
                .map(|&eta| (metric.gromov_twice(x, eta, o), eta))
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            match best {
                Some((twice, eta)) => (2 * metric.scaled(o, x) - twice, Some(eta)),
                None => (2 * metric.scaled(o, x), None),
            }
        })
        .collect();
    let worst = per_vertex.iter().map(|p| p.0).max().unwrap_or(0).max(0);
    VisualityCertificate {
        d: Length::new(worst, 2 * space.den()),
        witnesses: per_vertex.into_iter().map(|p| p.1).collect(),
    }
}

/// Longest canonical geodesic that stays outside `avoid` except possibly at
/// its first vertex. Such geodesics are limits of geodesics lying in the
/// open complement, so this is the out-spread of the complement.
pub fn outspread(space: &HypGraphSpace, avoid: &[bool]) -> (Length, Option<GeodesicPath>) {
    let n = space.len();
    let best = (0..n)
        .into_par_iter()
        .filter_map(|u| {
            let mut local: Option<(i64, usize)> = None;
            for v in 0..n {
                if v == u || avoid[v] {
                    continue;
                }
                let d = space.scaled(u, v);
                if local.is_some_and(|(b, _)| b >= d) {
                    continue;
                }
                let geo = space.canonical_geodesic(u, v);
                if geo.vertices[1..].iter().all(|&w| !avoid[w]) {
                    local = Some((d, v));
                }
            }
            local.map(|(d, v)| (d, u, v))
        })
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)));
    match best {
        Some((d, u, v)) => (space.to_length(d), Some(space.canonical_geodesic(u, v))),
        None => (Length::from_integer(0), None),
    }
}

#[derive(Debug, Clone)]
pub struct VisualCore {
    pub space: HypGraphSpace,
    /// Original indices of the kept vertices, ascending.
    pub kept: Vec<usize>,
    /// Longest geodesic of the complement (see [`outspread`]).
    pub complement_outspread: Length,
}

/// Subgraph induced by the vertices within `budget` of a canonical
/// root-to-proxy geodesic.
pub fn visual_core(space: &HypGraphSpace, budget: Length) -> Result<VisualCore> {
    if budget < Length::from_integer(0) {
        return Err(Error::InvalidArgument("budget must be nonnegative".into()));
    }
    let budget_scaled = (budget * Length::from_integer(space.den())).floor().to_integer();
    let mut on_geodesic = vec![false; space.len()];
    for &p in space.proxies() {
        for v in space.canonical_geodesic(space.root(), p).vertices {
            on_geodesic[v] = true;
        }
    }
    if space.proxies().is_empty() {
        on_geodesic[space.root()] = true;
    }
    let seeds: Vec<usize> = (0..space.len()).filter(|&v| on_geodesic[v]).collect();
    let near = space.scaled_dist_to_set(&seeds);
    let keep: Vec<usize> = (0..space.len()).filter(|&v| near[v] <= budget_scaled).collect();
    let mut avoid = vec![false; space.len()];
    for &v in &keep {
        avoid[v] = true;
    }
    let (complement_outspread, _) = outspread(space, &avoid);
    let (core, kept) = space.induced(&keep)?;
    Ok(VisualCore { space: core, kept, complement_outspread })
}

/// Appends a path of `len` unit edges hanging off `at`; the new vertices
/// are not proxies.
pub fn with_pendant(space: &HypGraphSpace, at: usize, len: usize) -> Result<(HypGraphSpace, Vec<usize>)> {
    with_pendant_path(space, at, &vec![Length::from_integer(1); len])
}

/// Appends a path with the given edge lengths hanging off `at`.
pub fn with_pendant_path(space: &HypGraphSpace, at: usize, lengths: &[Length]) -> Result<(HypGraphSpace, Vec<usize>)> {
    let n = space.len();
    let mut ids = space.ids().to_vec();
    let mut edges = space.edges().to_vec();
    let mut prev = at;
    let mut added = Vec::with_capacity(lengths.len());
    for (i, &l) in lengths.iter().enumerate() {
        ids.push(format!("pendant{i}"));
        edges.push((prev, n + i, l));
        prev = n + i;
        added.push(n + i);
    }
    let g = HypGraphSpace::from_indexed(ids, edges, space.root(), space.horizon(), space.proxies().to_vec())?;
    Ok((g, added))
}
