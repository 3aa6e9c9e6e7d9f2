//! Boundary proxies of a rooted graph, with the metric used on them.

use serde::{Deserialize, Serialize};

use crate::doubling::MetricView;
use crate::error::{Error, Result};
use crate::graph::HypGraphSpace;
use crate::length::{self, Length};
use crate::metric::{
    check_epsilon_admissible, sandwich_violations, visual_metric, FiniteMetricSpace,
    GromovProductTable, VisualParams, VisualTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Metric of the underlying space carried over to the proxies.
    Transported,
    /// Visual metric built from Gromov products at the root.
    Visual,
}

#[derive(Debug, Clone)]
pub struct BoundaryModel {
    proxies: Vec<usize>,
    labels: Vec<String>,
    mode: BoundaryMode,
    params: VisualParams,
    /// Gromov products at the root between proxies, `k × k`.
    products: Vec<Length>,
    dist: Vec<f64>,
    visual: VisualTable,
    /// Point of the underlying space for each proxy (transported mode).
    identification: Option<Vec<String>>,
}

impl BoundaryModel {
    /// Visual-metric boundary of `space` for visual parameter `epsilon`.
    pub fn visual(space: &HypGraphSpace, epsilon: f64) -> Result<Self> {
        let (params, products, visual) = Self::visual_parts(space, epsilon)?;
        let dist = visual.values.clone();
        Ok(Self {
            proxies: space.proxies().to_vec(),
            labels: space.proxies().iter().map(|&p| space.id(p).to_string()).collect(),
            mode: BoundaryMode::Visual,
            params,
            products,
            dist,
            visual,
            identification: None,
        })
    }

    /// Boundary whose metric is `base` transported through
    /// `identification[i]`, the point of `base` under the `i`-th proxy.
    pub fn transported(
        space: &HypGraphSpace,
        epsilon: f64,
        base: &FiniteMetricSpace,
        identification: &[usize],
    ) -> Result<Self> {
        let k = space.proxies().len();
        if identification.len() != k {
            return Err(Error::InvalidArgument(
                "identification must name one point per proxy".into(),
            ));
        }
        let (params, products, visual) = Self::visual_parts(space, epsilon)?;
        let mut dist = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                dist[a * k + b] = base.dist_f64(identification[a], identification[b]);
            }
        }
        Ok(Self {
            proxies: space.proxies().to_vec(),
            labels: space.proxies().iter().map(|&p| space.id(p).to_string()).collect(),
            mode: BoundaryMode::Transported,
            params,
            products,
            dist,
            visual,
            identification: Some(identification.iter().map(|&i| base.id(i).to_string()).collect()),
        })
    }

    fn visual_parts(
        space: &HypGraphSpace,
        epsilon: f64,
    ) -> Result<(VisualParams, Vec<Length>, VisualTable)> {
        let params = check_epsilon_admissible(epsilon, space.delta())?;
        let table = GromovProductTable::new(space.metric(), space.root());
        let proxies = space.proxies();
        let products = proxies
            .iter()
            .flat_map(|&a| proxies.iter().map(move |&b| (a, b)))
            .map(|(a, b)| table.get(a, b))
            .collect();
        let visual = visual_metric(&table, &params, proxies)?;
        Ok((params, products, visual))
    }

    pub fn len(&self) -> usize {
        self.proxies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proxies.is_empty()
    }

    /// Graph vertex of the proxy at `pos`.
    pub fn vertex(&self, pos: usize) -> usize {
        self.proxies[pos]
    }

    pub fn proxies(&self) -> &[usize] {
        &self.proxies
    }

    pub fn label(&self, pos: usize) -> &str {
        &self.labels[pos]
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn params(&self) -> &VisualParams {
        &self.params
    }

    pub fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.len() + b]
    }

    pub fn product(&self, a: usize, b: usize) -> Length {
        self.products[a * self.len() + b]
    }

    pub fn visual_table(&self) -> &VisualTable {
        &self.visual
    }

    pub fn identification(&self) -> Option<&[String]> {
        self.identification.as_deref()
    }

    /// Smallest distance between distinct proxies.
    pub fn min_separation(&self) -> Option<f64> {
        let k = self.len();
        (0..k)
            .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
            .map(|(a, b)| self.d(a, b))
            .min_by(|x, y| x.total_cmp(y))
    }

    /// Proxy pairs violating the visual sandwich bound.
    pub fn sandwich_violations(&self, space: &HypGraphSpace) -> Vec<(usize, usize)> {
        let table = GromovProductTable::new(space.metric(), space.root());
        sandwich_violations(&self.visual, &table, &self.params)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let k = self.len();
        let rows: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| self.d(a, b)).collect()).collect();
        serde_json::json!({
            "mode": self.mode,
            "epsilon": self.params.epsilon,
            "epsilon_prime": self.params.epsilon_prime,
            "delta": length::format_length(&self.params.delta),
            "proxies": self.labels,
            "identification": self.identification,
            "dist": rows,
        })
    }
}

impl MetricView for BoundaryModel {
    type S = f64;
    fn size(&self) -> usize {
        self.len()
    }
    fn distance(&self, x: usize, y: usize) -> f64 {
        self.d(x, y)
    }
    fn label(&self, x: usize) -> String {
        self.labels[x].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> HypGraphSpace {
        let ids = ["r", "a", "b", "c"].map(String::from).to_vec();
        let one = Length::from_integer(1);
        HypGraphSpace::from_indexed(ids, vec![(0, 1, one), (0, 2, one), (0, 3, one)], 0, one, vec![1, 2, 3])
            .unwrap()
    }

    #[test]
    fn visual_boundary_of_star() {
        let g = star();
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        assert_eq!(b.len(), 3);
        // distinct leaves meet at the root: product 0, distance exp(0) = 1
        assert!((b.d(0, 1) - 1.0).abs() < 1e-15);
        assert!(b.sandwich_violations(&g).is_empty());
    }

    #[test]
    fn transported_uses_base_metric() {
        let g = star();
        let ids = ["x", "y", "z"].map(String::from).to_vec();
        let l = |v| Length::from_integer(v);
        let base = FiniteMetricSpace::new(
            ids,
            vec![vec![l(0), l(1), l(2)], vec![l(1), l(0), l(1)], vec![l(2), l(1), l(0)]],
        )
        .unwrap();
        let b = BoundaryModel::transported(&g, 1.0, &base, &[0, 1, 2]).unwrap();
        assert_eq!(b.d(0, 2), 2.0);
        assert!(BoundaryModel::transported(&g, 1.0, &base, &[0, 1]).is_err());
    }
}
