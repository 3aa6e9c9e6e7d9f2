//! Exact finite metric spaces, Gromov products and hyperbolicity constants,
//! plus the visual metric and the β bound built on top of them.
//!
//! Distances are stored as `i64` numerators over one common denominator, so
//! every comparison in this module is exact integer arithmetic. Only the
//! visual metric and β involve `exp`/`ln` and live in `f64`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::length::{self, Length};

/// Absolute slack used when comparing floating-point visual-metric values.
pub const FLOAT_SLACK: f64 = 1e-9;

/// Above this many points the triangle inequality is sampled, not exhausted.
const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 1000;
const SAMPLED_TRIANGLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    num: Vec<i64>,
    den: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricJson {
    points: Vec<String>,
    dist: Vec<Vec<String>>,
}

impl FiniteMetricSpace {
    /// Builds a space from an exact distance table, checking every metric
    /// axiom (triangle inequality exhaustively up to 1000 points).
    pub fn new(ids: Vec<String>, dist: Vec<Vec<Length>>) -> Result<Self> {
        let n = ids.len();
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMetric(format!(
                "distance table must be {n}x{n}"
            )));
        }
        let den = length::common_denominator(dist.iter().flatten())?;
        let mut num = Vec::with_capacity(n * n);
        for row in &dist {
            for l in row {
                num.push(length::scale_to(l, den)?);
            }
        }
        let space = Self::from_scaled(ids, num, den)?;
        space.check_axioms()?;
        Ok(space)
    }

    /// Builds a space from numerators over `den` without the triangle scan.
    /// Used for shortest-path metrics, which satisfy it by construction.
    pub(crate) fn from_scaled(ids: Vec<String>, num: Vec<i64>, den: i64) -> Result<Self> {
        let n = ids.len();
        assert_eq!(num.len(), n * n);
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidMetric(format!("duplicate point id `{id}`")));
            }
        }
        let space = Self { ids, index, num, den };
        space.check_basic()?;
        Ok(space)
    }

    fn check_basic(&self) -> Result<()> {
        let n = self.len();
        for x in 0..n {
            if self.num[x * n + x] != 0 {
                return Err(Error::InvalidMetric(format!(
                    "d({0},{0}) is not zero",
                    self.ids[x]
                )));
            }
            for y in (x + 1)..n {
                let a = self.num[x * n + y];
                if a != self.num[y * n + x] {
                    return Err(Error::InvalidMetric(format!(
                        "d({},{}) is not symmetric",
                        self.ids[x], self.ids[y]
                    )));
                }
                if a <= 0 {
                    return Err(Error::InvalidMetric(format!(
                        "d({},{}) must be positive",
                        self.ids[x], self.ids[y]
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_axioms(&self) -> Result<()> {
        let n = self.len();
        let violates = |x: usize, y: usize, z: usize| {
            self.num[x * n + z] > self.num[x * n + y] + self.num[y * n + z]
        };
        let witness = if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            (0..n).into_par_iter().find_map_first(|x| {
                for y in 0..n {
                    for z in 0..n {
                        if violates(x, y, z) {
                            return Some((x, y, z));
                        }
                    }
                }
                None
            })
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..SAMPLED_TRIANGLES).find_map(|_| {
                let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                violates(x, y, z).then_some((x, y, z))
            })
        };
        match witness {
            Some((x, y, z)) => Err(Error::InvalidMetric(format!(
                "triangle inequality fails for ({}, {}, {})",
                self.ids[x], self.ids[y], self.ids[z]
            ))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    /// Common denominator of the stored numerators.
    pub fn den(&self) -> i64 {
        self.den
    }

    /// Distance numerator over [`Self::den`].
    #[inline]
    pub fn scaled(&self, x: usize, y: usize) -> i64 {
        self.num[x * self.len() + y]
    }

    pub fn dist(&self, x: usize, y: usize) -> Length {
        Length::new(self.scaled(x, y), self.den)
    }

    pub fn dist_f64(&self, x: usize, y: usize) -> f64 {
        self.scaled(x, y) as f64 / self.den as f64
    }

    pub fn diameter(&self) -> Length {
        Length::new(self.num.iter().copied().max().unwrap_or(0), self.den)
    }

    /// Smallest distance between distinct points, `None` for fewer than two.
    pub fn min_separation(&self) -> Option<Length> {
        let n = self.len();
        (0..n)
            .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
            .map(|(x, y)| self.scaled(x, y))
            .min()
            .map(|m| Length::new(m, self.den))
    }

    /// Restriction to `indices`, in the given order.
    pub fn subspace(&self, indices: &[usize]) -> FiniteMetricSpace {
        let ids: Vec<String> = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let mut num = Vec::with_capacity(indices.len() * indices.len());
        for &x in indices {
            for &y in indices {
                num.push(self.scaled(x, y));
            }
        }
        let index = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        FiniteMetricSpace { ids, index, num, den: self.den }
    }

    /// Twice the Gromov product, as a numerator over [`Self::den`].
    #[inline]
    pub fn gromov_twice(&self, x: usize, y: usize, o: usize) -> i64 {
        self.scaled(x, o) + self.scaled(y, o) - self.scaled(x, y)
    }

    /// `(x,y)_o = ½(d(x,o) + d(y,o) − d(x,y))`.
    pub fn gromov_product(&self, x: usize, y: usize, o: usize) -> Length {
        Length::new(self.gromov_twice(x, y, o), 2 * self.den)
    }

    pub fn gromov_product_by_id(&self, x: &str, y: &str, o: &str) -> Result<Length> {
        Ok(self.gromov_product(self.index_of(x)?, self.index_of(y)?, self.index_of(o)?))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.len();
        let dist = (0..n)
            .map(|x| (0..n).map(|y| length::format_length(&self.dist(x, y))).collect())
            .collect();
        serde_json::to_value(MetricJson { points: self.ids.clone(), dist })
            .expect("metric json is always serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: MetricJson = serde_json::from_value(value.clone())?;
        let dist = raw
            .dist
            .iter()
            .map(|row| row.iter().map(|s| length::parse_length(s)).collect())
            .collect::<Result<Vec<Vec<Length>>>>()?;
        Self::new(raw.points, dist)
    }
}

/// All Gromov products `(x,y)_o` for one basepoint.
#[derive(Debug, Clone)]
pub struct GromovProductTable {
    basepoint: usize,
    n: usize,
    twice: Vec<i64>,
    den: i64,
}

impl GromovProductTable {
    pub fn new(space: &FiniteMetricSpace, basepoint: usize) -> Self {
        let n = space.len();
        let mut twice = vec![0; n * n];
        for x in 0..n {
            for y in 0..n {
                twice[x * n + y] = space.gromov_twice(x, y, basepoint);
            }
        }
        Self { basepoint, n, twice, den: space.den() }
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, x: usize, y: usize) -> Length {
        Length::new(self.twice[x * self.n + y], 2 * self.den)
    }

    pub fn get_f64(&self, x: usize, y: usize) -> f64 {
        self.twice[x * self.n + y] as f64 / (2 * self.den) as f64
    }

    pub fn to_json(&self, space: &FiniteMetricSpace) -> serde_json::Value {
        let values: Vec<Vec<String>> = (0..self.n)
            .map(|x| (0..self.n).map(|y| length::format_length(&self.get(x, y))).collect())
            .collect();
        serde_json::json!({
            "basepoint": space.id(self.basepoint),
            "points": space.ids(),
            "values": values,
        })
    }
}

/// Smallest `δ4` with `(x,y)_o ≥ min((x,z)_o, (y,z)_o) − δ4` over all triples.
pub fn delta_four_point(space: &FiniteMetricSpace, basepoint: usize) -> Length {
    let n = space.len();
    let g = |x: usize, y: usize| space.gromov_twice(x, y, basepoint);
    let worst = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = 0i64;
            for y in x..n {
                let gxy = g(x, y);
                for z in 0..n {
                    let m = g(x, z).min(g(y, z));
                    best = best.max(m - gxy);
                }
            }
            best
        })
        .max()
        .unwrap_or(0);
    Length::new(worst, 2 * space.den())
}

/// Visual parameter ε together with its derived `ε′ = exp(εδ) − 1`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VisualParams {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    #[serde(with = "crate::length")]
    pub delta: Length,
}

/// Accepts `epsilon` iff `exp(εδ) ≤ √2` (within [`FLOAT_SLACK`]).
pub fn check_epsilon_admissible(epsilon: f64, delta: Length) -> Result<VisualParams> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let lhs = (epsilon * length::to_f64(&delta)).exp();
    if lhs > std::f64::consts::SQRT_2 + FLOAT_SLACK {
        return Err(Error::NotAdmissible {
            epsilon,
            delta: length::format_length(&delta),
            lhs,
        });
    }
    Ok(VisualParams {
        epsilon,
        epsilon_prime: (lhs - 1.0).min(std::f64::consts::SQRT_2 - 1.0),
        delta,
    })
}

/// Largest admissible ε for `delta`; `1` when `delta` is zero and every ε is
/// admissible.
pub fn auto_epsilon(delta: Length) -> f64 {
    if delta == Length::from_integer(0) {
        1.0
    } else {
        std::f64::consts::SQRT_2.ln() / length::to_f64(&delta)
    }
}

/// Symmetric table of visual distances over a support set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisualTable {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl VisualTable {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.support.len() + b]
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Chain-infimum visual metric restricted to chains inside `support`:
/// all-pairs shortest paths on the complete graph with weights
/// `exp(−ε (x,y)_o)`.
pub fn visual_metric(
    products: &GromovProductTable,
    params: &VisualParams,
    support: &[usize],
) -> Result<VisualTable> {
    if let Some(&bad) = support.iter().find(|&&s| s >= products.len()) {
        return Err(Error::InvalidArgument(format!(
            "support index {bad} outside product table"
        )));
    }
    let k = support.len();
    let mut d = vec![0.0f64; k * k];
    for a in 0..k {
        for b in 0..k {
            if a != b {
                d[a * k + b] = (-params.epsilon * products.get_f64(support[a], support[b])).exp();
            }
        }
    }
    // Floyd-Warshall; row updates for a fixed pivot are independent.
    for m in 0..k {
        let pivot_row: Vec<f64> = d[m * k..(m + 1) * k].to_vec();
        d.par_chunks_mut(k).for_each(|row| {
            let via = row[m];
            for b in 0..k {
                let cand = via + pivot_row[b];
                if cand < row[b] {
                    row[b] = cand;
                }
            }
        });
    }
    Ok(VisualTable { support: support.to_vec(), values: d })
}

/// Pairs `(a, b)` (support positions) where the sandwich
/// `ε′ exp(−ε(x,y)) ≤ d_ε(x,y) ≤ exp(−ε(x,y))` fails beyond [`FLOAT_SLACK`].
pub fn sandwich_violations(
    table: &VisualTable,
    products: &GromovProductTable,
    params: &VisualParams,
) -> Vec<(usize, usize)> {
    let k = table.len();
    let mut bad = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let upper = (-params.epsilon * products.get_f64(table.support[a], table.support[b])).exp();
            let lower = params.epsilon_prime * upper;
            let v = table.get(a, b);
            if v < lower - FLOAT_SLACK || v > upper + FLOAT_SLACK {
                bad.push((a, b));
            }
        }
    }
    bad
}

/// `β = (1/ε) ln(q/ε′) + 4δ`; for `δ = 0` the exact tree identity replaces
/// the logarithmic bound and `β = (1/ε) ln q`.
pub fn compute_beta(q: f64, params: &VisualParams) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must be positive, got {q}")));
    }
    let delta = length::to_f64(&params.delta);
    if params.delta == Length::from_integer(0) || params.epsilon_prime <= 0.0 {
        return Ok(q.ln() / params.epsilon);
    }
    Ok((q / params.epsilon_prime).ln() / params.epsilon + 4.0 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: i64) -> Length {
        Length::from_integer(v)
    }

    fn line(points: &[i64]) -> FiniteMetricSpace {
        let ids = (0..points.len()).map(|i| format!("p{i}")).collect();
        let dist = points
            .iter()
            .map(|a| points.iter().map(|b| int((a - b).abs())).collect())
            .collect();
        FiniteMetricSpace::new(ids, dist).unwrap()
    }

    #[test]
    fn gromov_product_on_path() {
        // o - a - b with unit edges.
        let s = line(&[0, 1, 2]);
        assert_eq!(s.gromov_product(1, 2, 0), int(1));
        assert_eq!(s.gromov_product(1, 1, 0), int(1));
    }

    #[test]
    fn gromov_product_star() {
        // center c, leaves x, y, o at distance 1.
        let ids = ["c", "x", "y", "o"].map(String::from).to_vec();
        let d = |a: usize, b: usize| if a == b { 0 } else if a == 0 || b == 0 { 1 } else { 2 };
        let dist = (0..4).map(|a| (0..4).map(|b| int(d(a, b))).collect()).collect();
        let s = FiniteMetricSpace::new(ids, dist).unwrap();
        assert_eq!(s.gromov_product_by_id("x", "y", "o").unwrap(), int(1));
        assert!(matches!(
            s.gromov_product_by_id("x", "q", "o"),
            Err(Error::UnknownPoint(_))
        ));
    }

    #[test]
    fn gromov_product_grid_corner() {
        // l1 distances on a 5x5 grid: o=(0,0), x=(4,0), y=(0,4).
        let pts = [(0i64, 0i64), (4, 0), (0, 4)];
        let ids = (0..3).map(|i| i.to_string()).collect();
        let dist = pts
            .iter()
            .map(|a| pts.iter().map(|b| int((a.0 - b.0).abs() + (a.1 - b.1).abs())).collect())
            .collect();
        let s = FiniteMetricSpace::new(ids, dist).unwrap();
        assert_eq!(s.gromov_product(1, 2, 0), int(0));
    }

    #[test]
    fn rejects_broken_metrics() {
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let tri = |ab, bc, ac| {
            vec![
                vec![int(0), int(ab), int(ac)],
                vec![int(ab), int(0), int(bc)],
                vec![int(ac), int(bc), int(0)],
            ]
        };
        assert!(FiniteMetricSpace::new(ids.clone(), tri(1, 1, 3)).is_err());
        assert!(FiniteMetricSpace::new(ids.clone(), tri(0, 1, 1)).is_err());
        assert!(FiniteMetricSpace::new(ids, tri(1, 1, 2)).is_ok());
    }

    #[test]
    fn four_point_trivial_cases() {
        assert_eq!(delta_four_point(&line(&[0]), 0), int(0));
        // a line is a tree
        assert_eq!(delta_four_point(&line(&[0, 1, 3, 7]), 2), int(0));
    }

    #[test]
    fn admissibility() {
        let p = check_epsilon_admissible(1.0, int(0)).unwrap();
        assert_eq!(p.epsilon_prime, 0.0);
        let p = check_epsilon_admissible(std::f64::consts::SQRT_2.ln(), int(1)).unwrap();
        assert!((p.epsilon_prime - (std::f64::consts::SQRT_2 - 1.0)).abs() < 1e-12);
        assert!(matches!(
            check_epsilon_admissible(0.5, int(1)),
            Err(Error::NotAdmissible { .. })
        ));
        assert!(check_epsilon_admissible(0.0, int(1)).is_err());
    }

    #[test]
    fn beta_values() {
        let tree = check_epsilon_admissible(1.0, int(0)).unwrap();
        assert_eq!(compute_beta(1.0, &tree).unwrap(), 0.0);

        let p = check_epsilon_admissible(0.3, int(1)).unwrap();
        let b = compute_beta(p.epsilon_prime, &p).unwrap();
        assert!((b - 4.0).abs() < 1e-12);

        // closed form evaluated independently
        let expected = (1.0 / 0.3) * (2.0 / (0.3f64.exp() - 1.0)).ln() + 4.0;
        assert!((compute_beta(2.0, &p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn two_point_visual_metric_is_single_step() {
        let s = line(&[0, 3, 5]);
        let t = GromovProductTable::new(&s, 0);
        let p = check_epsilon_admissible(0.5, int(0)).unwrap();
        let v = visual_metric(&t, &p, &[1, 2]).unwrap();
        let expected = (-0.5 * length::to_f64(&t.get(1, 2))).exp();
        assert!((v.get(0, 1) - expected).abs() < 1e-15);
        assert!(visual_metric(&t, &p, &[7]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = line(&[0, 1, 4]);
        let back = FiniteMetricSpace::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }
}
