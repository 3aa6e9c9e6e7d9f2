//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use hyptree::approx::{self, HyperbolicApproximation};
use hyptree::boundary::BoundaryModel;
use hyptree::graph::HypGraphSpace;
use hyptree::metric::{auto_epsilon, FiniteMetricSpace, GromovProductTable};
use hyptree::Length;

/// Every shortest path from `x` to `y`, as vertex lists.
pub fn all_geodesics(g: &HypGraphSpace, x: usize, y: usize) -> Vec<Vec<usize>> {
    fn walk(g: &HypGraphSpace, cur: usize, y: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur == y {
            out.push(path.clone());
            return;
        }
        for &(u, w) in g.neighbors(cur) {
            if w + g.scaled(u, y) == g.scaled(cur, y) {
                path.push(u);
                walk(g, u, y, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, x, y, &mut vec![x], &mut out);
    out
}

/// Thin-triangle constant over vertex triangles, by listing every geodesic.
pub fn delta_by_enumeration(g: &HypGraphSpace) -> Length {
    let n = g.len();
    let geos: Vec<Vec<Vec<Vec<usize>>>> =
        (0..n).map(|x| (0..n).map(|y| all_geodesics(g, x, y)).collect()).collect();
    // far[p][x][y]: worst distance from p to a geodesic [x, y].
    let far: Vec<Vec<Vec<i64>>> = (0..n)
        .map(|p| {
            (0..n)
                .map(|x| {
                    (0..n)
                        .map(|y| {
                            geos[x][y]
                                .iter()
                                .map(|path| path.iter().map(|&v| g.scaled(p, v)).min().unwrap())
                                .max()
                                .unwrap()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut worst = 0;
    for x in 0..n {
        for z in 0..n {
            for path in &geos[x][z] {
                for &p in path {
                    for y in 0..n {
                        worst = worst.max(far[p][x][y].min(far[p][y][z]));
                    }
                }
            }
        }
    }
    g.to_length(worst)
}

/// Chain infimum over every ordered sequence of distinct intermediate points.
pub fn chain_infimum(products: &GromovProductTable, epsilon: f64, support: &[usize], a: usize, b: usize) -> f64 {
    let w = |x: usize, y: usize| (-epsilon * products.get_f64(support[x], support[y])).exp();
    fn extend(w: &dyn Fn(usize, usize) -> f64, cur: usize, b: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        *best = best.min(acc + w(cur, b));
        for m in 0..used.len() {
            if !used[m] && m != b {
                used[m] = true;
                extend(w, m, b, used, acc + w(cur, m), best);
                used[m] = false;
            }
        }
    }
    if a == b {
        return 0.0;
    }
    let mut used = vec![false; support.len()];
    used[a] = true;
    let mut best = f64::INFINITY;
    extend(&w, a, b, &mut used, 0.0, &mut best);
    best
}

/// Largest subset with all pairwise distances in `[alpha, beta]`, by plain
/// include/exclude branching with a size bound.
pub fn packing_by_branching(space: &FiniteMetricSpace, alpha: Length, beta: Length) -> usize {
    fn go(space: &FiniteMetricSpace, alpha: Length, beta: Length, next: usize, chosen: &mut Vec<usize>, best: &mut usize) {
        let n = space.len();
        if chosen.len() + (n - next) <= *best {
            return;
        }
        if next == n {
            *best = chosen.len();
            return;
        }
        let ok = chosen.iter().all(|&c| {
            let d = space.dist(c, next);
            d >= alpha && d <= beta
        });
        if ok {
            chosen.push(next);
            go(space, alpha, beta, next + 1, chosen, best);
            chosen.pop();
        }
        go(space, alpha, beta, next + 1, chosen, best);
    }
    let mut best = 0;
    go(space, alpha, beta, 0, &mut Vec::new(), &mut best);
    best
}

pub fn cycle(n: usize) -> HypGraphSpace {
    let ids = (0..n).map(|i| format!("c{i}")).collect();
    let edges = (0..n).map(|i| (i, (i + 1) % n, Length::from_integer(1))).collect();
    HypGraphSpace::from_indexed(ids, edges, 0, Length::from_integer(0), vec![n / 2]).unwrap()
}

pub struct Instance {
    pub name: String,
    pub space: HypGraphSpace,
    pub boundary: BoundaryModel,
    pub approximation: Option<HyperbolicApproximation>,
}

pub fn approximation_instance(name: &str, base: FiniteMetricSpace, levels: Option<usize>) -> Instance {
    let levels = levels.unwrap_or_else(|| approx::default_levels(&base));
    let a = approx::build_hyperbolic_approximation(&base, levels).unwrap();
    let boundary = a.boundary_model(auto_epsilon(a.graph.delta()), true).unwrap();
    Instance { name: name.to_string(), space: a.graph.clone(), boundary, approximation: Some(a) }
}

pub fn graph_instance(name: &str, space: HypGraphSpace) -> Instance {
    let boundary = BoundaryModel::visual(&space, auto_epsilon(space.delta())).unwrap();
    Instance { name: name.to_string(), space, boundary, approximation: None }
}

/// Interval 5 and 17, Cantor depth 2 to 4, the 8×8 grid and free-group
/// balls of radius 1 to 6.
pub fn corpus() -> Vec<Instance> {
    let third = Length::new(1, 3);
    let mut out = Vec::new();
    for n in [5, 17] {
        out.push(approximation_instance(&format!("interval-{n}"), approx::interval(n).unwrap(), None));
    }
    for d in [2, 3, 4] {
        out.push(approximation_instance(&format!("cantor-{d}"), approx::cantor(d, third).unwrap(), None));
    }
    out.push(graph_instance("grid-8", approx::grid_graph(8).unwrap()));
    for r in 1..=6 {
        out.push(graph_instance(&format!("free-2-{r}"), approx::free_group_ball(2, r).unwrap()));
    }
    out
}
