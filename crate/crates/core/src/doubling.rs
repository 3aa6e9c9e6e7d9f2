//! Packing and covering machinery: packing numbers, the doubling constant,
//! separated nets and colored ball covers with bounded multiplicity.
//!
//! Everything here is generic over [`MetricView`], so the same code runs on
//! exact rational spaces and on floating-point boundary metrics.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::length::{self, Length};
use crate::metric::FiniteMetricSpace;

/// Largest space on which [`packing_number`] runs the exact search.
pub const EXACT_PACKING_LIMIT: usize = 40;

pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + Debug
{
    fn from_int(v: i64) -> Self;
    fn as_f64(self) -> f64;
    fn to_json(self) -> serde_json::Value;
}

impl Scalar for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn to_json(self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

impl Scalar for Length {
    fn from_int(v: i64) -> Self {
        Length::from_integer(v)
    }
    fn as_f64(self) -> f64 {
        length::to_f64(&self)
    }
    fn to_json(self) -> serde_json::Value {
        serde_json::json!(length::format_length(&self))
    }
}

/// Read access to a finite metric, whatever its number type.
pub trait MetricView: Sync {
    type S: Scalar;
    fn size(&self) -> usize;
    fn distance(&self, x: usize, y: usize) -> Self::S;
    fn label(&self, x: usize) -> String;
}

impl MetricView for FiniteMetricSpace {
    type S = Length;
    fn size(&self) -> usize {
        self.len()
    }
    fn distance(&self, x: usize, y: usize) -> Length {
        self.dist(x, y)
    }
    fn label(&self, x: usize) -> String {
        self.id(x).to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Packing {
    pub count: usize,
    /// False when only the greedy lower bound was computed.
    pub exact: bool,
}

/// Largest subset whose pairwise distances all lie in `[alpha, beta]`.
pub fn packing_number<M: MetricView>(space: &M, alpha: M::S, beta: M::S) -> Result<Packing> {
    let zero = M::S::from_int(0);
    if !(alpha > zero) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    if alpha > beta {
        return Err(Error::InvalidArgument("alpha must not exceed beta".into()));
    }
    let n = space.size();
    let compatible = |x: usize, y: usize| {
        let d = space.distance(x, y);
        d >= alpha && d <= beta
    };
    if n <= EXACT_PACKING_LIMIT {
        let mut adj = vec![0u64; n];
        for x in 0..n {
            for y in 0..n {
                if x != y && compatible(x, y) {
                    adj[x] |= 1 << y;
                }
            }
        }
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut best = 0;
        max_clique(&adj, 0, all, &mut best);
        return Ok(Packing { count: best, exact: true });
    }
    let mut chosen: Vec<usize> = Vec::new();
    for x in 0..n {
        if chosen.iter().all(|&c| compatible(x, c)) {
            chosen.push(x);
        }
    }
    Ok(Packing { count: chosen.len(), exact: false })
}

fn max_clique(adj: &[u64], size: usize, mut candidates: u64, best: &mut usize) {
    if candidates == 0 {
        *best = (*best).max(size);
        return;
    }
    while candidates != 0 {
        if size + candidates.count_ones() as usize <= *best {
            return;
        }
        let v = candidates.trailing_zeros() as usize;
        candidates &= !(1u64 << v);
        max_clique(adj, size + 1, candidates & adj[v], best);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingConstant {
    pub kappa: f64,
    /// `2^⌈κ⌉`.
    pub n: usize,
    pub max_cover: usize,
    pub witness: Option<usize>,
}

/// Greedy doubling estimate: every ball `B̄_r(x)` at every realized radius
/// is covered by `r/2`-balls centered at its uncovered points.
pub fn doubling_constant<M: MetricView>(space: &M) -> DoublingConstant {
    let n = space.size();
    let two = M::S::from_int(2);
    let (max_cover, witness) = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                space
                    .distance(x, a)
                    .partial_cmp(&space.distance(x, b))
                    .expect("distances are comparable")
                    .then(a.cmp(&b))
            });
            let mut best = 1usize;
            let mut end = 1;
            while end < n {
                let r = space.distance(x, order[end]);
                while end < n && space.distance(x, order[end]) <= r {
                    end += 1;
                }
                let mut ball: Vec<usize> = order[..end].to_vec();
                ball.sort_unstable();
                let mut covered = vec![false; ball.len()];
                let mut count = 0;
                for i in 0..ball.len() {
                    if covered[i] {
                        continue;
                    }
                    count += 1;
                    for j in i..ball.len() {
                        if !covered[j] && space.distance(ball[i], ball[j]) * two <= r {
                            covered[j] = true;
                        }
                    }
                }
                best = best.max(count);
            }
            (best, x)
        })
        .reduce(|| (1, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let kappa = (max_cover as f64).log2();
    let n_out = 1usize << (kappa - 1e-12).ceil().max(0.0) as u32;
    DoublingConstant {
        kappa,
        n: n_out,
        max_cover,
        witness: (witness != usize::MAX).then_some(witness),
    }
}

/// Extends `seed` greedily in index order. A candidate is added when its
/// distance to every chosen point is `> r` (`strict`) or `≥ r` (not strict)
/// and `accept` agrees.
pub(crate) fn grow_separated<M: MetricView>(
    space: &M,
    r: M::S,
    seed: &[usize],
    strict: bool,
    mut accept: impl FnMut(&[usize], usize) -> bool,
) -> Vec<usize> {
    let n = space.size();
    let mut chosen = seed.to_vec();
    let mut in_set = vec![false; n];
    for &s in seed {
        in_set[s] = true;
    }
    for p in 0..n {
        if in_set[p] {
            continue;
        }
        let far = chosen.iter().all(|&c| {
            let d = space.distance(p, c);
            if strict { d > r } else { d >= r }
        });
        if far && accept(&chosen, p) {
            chosen.push(p);
            in_set[p] = true;
        }
    }
    chosen
}

/// Maximal `r`-separated set (pairwise `> r`) containing `seed`.
pub fn separated_net<M: MetricView>(space: &M, r: M::S, seed: &[usize]) -> Result<Vec<usize>> {
    for (i, &a) in seed.iter().enumerate() {
        if a >= space.size() {
            return Err(Error::InvalidArgument(format!("seed index {a} out of range")));
        }
        for &b in &seed[i + 1..] {
            if !(space.distance(a, b) > r) {
                return Err(Error::InvalidArgument(format!(
                    "seed is not separated: `{}` and `{}`",
                    space.label(a),
                    space.label(b)
                )));
            }
        }
    }
    Ok(grow_separated(space, r, seed, true, |_, _| true))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityProfile {
    pub family_multiplicity: usize,
    pub per_center_multiplicity_3r: usize,
}

#[derive(Debug, Clone)]
pub struct CoverFamily<S: Scalar> {
    pub radius: S,
    pub centers: Vec<usize>,
    /// Closed ball of each center, as sorted point indices.
    pub members: Vec<Vec<usize>>,
    /// Partition of member indices.
    pub color_classes: Vec<Vec<usize>>,
    pub profile: MultiplicityProfile,
}

/// Distance from point `x` to a member (point set).
pub fn dist_to_member<M: MetricView>(space: &M, x: usize, member: &[usize]) -> M::S {
    let mut best = space.distance(x, member[0]);
    for &m in &member[1..] {
        let d = space.distance(x, m);
        if d < best {
            best = d;
        }
    }
    best
}

/// Members of `family` meeting `B̄_t(x)`, for every point `x`.
pub fn members_meeting<M: MetricView>(space: &M, family: &[Vec<usize>], t: M::S) -> Vec<Vec<usize>> {
    (0..space.size())
        .into_par_iter()
        .map(|x| {
            family
                .iter()
                .enumerate()
                .filter(|(_, m)| dist_to_member(space, x, m) <= t)
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Point `t`-multiplicity of a family: the most members any closed
/// `t`-ball around a point meets. Returns the value and a witness point.
pub fn family_multiplicity<M: MetricView>(space: &M, family: &[Vec<usize>], t: M::S) -> (usize, usize) {
    members_meeting(space, family, t)
        .iter()
        .enumerate()
        .map(|(x, m)| (m.len(), x))
        .fold((0, 0), |a, b| if b.0 > a.0 { b } else { a })
}

/// Closed-ball cover around a maximal separated net extending `seed`,
/// greedily colored so that each class has point `r`-multiplicity at most 1.
/// Every multiplicity and the class count are checked against `N²`.
pub fn ls23_cover<M: MetricView>(
    space: &M,
    r: M::S,
    seed: &[usize],
    n_doubling: usize,
) -> Result<CoverFamily<M::S>> {
    let centers = separated_net(space, r, seed)?;
    let n = space.size();
    let members: Vec<Vec<usize>> = centers
        .iter()
        .map(|&c| (0..n).filter(|&y| space.distance(c, y) <= r).collect())
        .collect();
    let bound = n_doubling * n_doubling;

    let meeting = members_meeting(space, &members, r);
    let mut conflicts: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    for list in &meeting {
        for &a in list {
            for &b in list {
                if a != b {
                    conflicts[a].push(b);
                }
            }
        }
    }
    let mut color = vec![usize::MAX; members.len()];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for m in 0..members.len() {
        let mut used: Vec<usize> = conflicts[m]
            .iter()
            .map(|&o| color[o])
            .filter(|&c| c != usize::MAX)
            .collect();
        used.sort_unstable();
        used.dedup();
        let c = (0..).find(|c| used.binary_search(c).is_err()).expect("unbounded");
        color[m] = c;
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(m);
    }

    let (family_mult, witness) = meeting
        .iter()
        .enumerate()
        .map(|(x, m)| (m.len(), x))
        .fold((0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let three_r = r * M::S::from_int(3);
    let (per_center, center_witness) = centers
        .par_iter()
        .map(|&c| {
            let k = members
                .iter()
                .filter(|m| dist_to_member(space, c, m) <= three_r)
                .count();
            (k, c)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0, 0), |a, b| if b.0 > a.0 { b } else { a });

    let check = |what: &'static str, value: usize, witness: usize| {
        if value > bound {
            Err(Error::CoverBound { what, witness: space.label(witness), value, bound })
        } else {
            Ok(())
        }
    };
    check("family r-multiplicity", family_mult, witness)?;
    check("per-center 3r-multiplicity", per_center, center_witness)?;
    check("color classes", classes.len(), centers[0])?;
    for class in &classes {
        let fam: Vec<Vec<usize>> = class.iter().map(|&m| members[m].clone()).collect();
        let (k, w) = family_multiplicity(space, &fam, r);
        if k > 1 {
            return Err(Error::CoverBound { what: "class r-multiplicity", witness: space.label(w), value: k, bound: 1 });
        }
    }

    Ok(CoverFamily {
        radius: r,
        centers,
        members,
        color_classes: classes,
        profile: MultiplicityProfile {
            family_multiplicity: family_mult,
            per_center_multiplicity_3r: per_center,
        },
    })
}

impl<S: Scalar> CoverFamily<S> {
    pub fn to_json<M: MetricView<S = S>>(&self, space: &M) -> serde_json::Value {
        let label = |v: &Vec<usize>| v.iter().map(|&i| space.label(i)).collect::<Vec<_>>();
        serde_json::json!({
            "radius": self.radius.to_json(),
            "centers": label(&self.centers),
            "members": self.members.iter().map(label).collect::<Vec<_>>(),
            "classes": self.color_classes.iter().map(|c| {
                c.iter().map(|&m| space.label(self.centers[m])).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "multiplicity": self.profile,
        })
    }
}

/// Least-squares slope of `ln S(α,β)` against `ln(β/α)`.
pub fn assouad_estimate<M: MetricView>(space: &M, scales: &[(M::S, M::S)]) -> Result<f64> {
    if scales.len() < 3 {
        return Err(Error::InvalidArgument("need at least three scale pairs".into()));
    }
    let mut xs = Vec::with_capacity(scales.len());
    let mut ys = Vec::with_capacity(scales.len());
    for &(a, b) in scales {
        let p = packing_number(space, a, b)?;
        xs.push((b.as_f64() / a.as_f64()).ln());
        ys.push((p.count.max(1) as f64).ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-15 {
        return Err(Error::InvalidArgument("all scale ratios are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn line(points: &[Length]) -> FiniteMetricSpace {
        let ids = (0..points.len()).map(|i| format!("p{i}")).collect();
        let dist = points
            .iter()
            .map(|a| points.iter().map(|b| (a - b).abs()).collect())
            .collect();
        FiniteMetricSpace::new(ids, dist).unwrap()
    }

    fn tenths() -> FiniteMetricSpace {
        line(&(0..=10).map(|i| Length::new(i, 10)).collect::<Vec<_>>())
    }

    #[test]
    fn packing_basics() {
        let one = line(&[Length::from_integer(0)]);
        let p = packing_number(&one, Length::from_integer(1), Length::from_integer(2)).unwrap();
        assert_eq!(p, Packing { count: 1, exact: true });

        let five = line(&(0..5).map(Length::from_integer).collect::<Vec<_>>());
        let p = packing_number(&five, Length::from_integer(1), Length::from_integer(4)).unwrap();
        assert_eq!(p.count, 5);
        assert!(packing_number(&five, Length::from_integer(2), Length::from_integer(1)).is_err());
    }

    #[test]
    fn doubling_single_point() {
        let d = doubling_constant(&line(&[Length::from_integer(3)]));
        assert_eq!(d.kappa, 0.0);
        assert_eq!(d.n, 1);
    }

    #[test]
    fn net_examples() {
        let s = tenths();
        // hand trace: 0 covers up to 0.3, then 0.4 up to 0.7, then 0.8
        let net = separated_net(&s, Length::new(35, 100), &[0]).unwrap();
        assert_eq!(net, vec![0, 4, 8]);
        assert_eq!(separated_net(&s, Length::from_integer(2), &[]).unwrap(), vec![0]);
        assert_eq!(separated_net(&s, Length::new(1, 20), &[]).unwrap().len(), 11);
        assert!(separated_net(&s, Length::new(35, 100), &[0, 1]).is_err());
    }

    #[test]
    fn cover_on_interval() {
        let s = tenths();
        let d = doubling_constant(&s);
        let cover = ls23_cover(&s, Length::new(35, 100), &[0], d.n).unwrap();
        assert_eq!(cover.centers.len(), 3);
        // overlap of the balls themselves is 2; closed r-balls around 0.4
        // meet all three members
        assert_eq!(family_multiplicity(&s, &cover.members, Length::from_integer(0)).0, 2);
        assert_eq!(cover.profile.family_multiplicity, 3);
        assert!(cover.profile.family_multiplicity <= d.n * d.n);
        let covered: std::collections::BTreeSet<usize> = cover.members.iter().flatten().copied().collect();
        assert_eq!(covered.len(), s.len());
    }

    #[test]
    fn cover_single_point() {
        let s = line(&[Length::from_integer(0)]);
        let cover = ls23_cover(&s, Length::from_integer(1), &[], 1).unwrap();
        assert_eq!(cover.members, vec![vec![0]]);
        assert_eq!(cover.color_classes.len(), 1);
    }

    #[test]
    fn cover_bound_violation_reports_witness() {
        // N = 1 allows a single color class, the interval needs two.
        let s = tenths();
        let err = ls23_cover(&s, Length::new(35, 100), &[0], 1).unwrap_err();
        assert!(matches!(err, Error::CoverBound { .. }));
    }

    #[test]
    fn assouad_degenerate() {
        let s = line(&[Length::from_integer(0)]);
        let a = Length::new(1, 10);
        let one = Length::from_integer(1);
        assert!(assouad_estimate(&s, &[(a, one), (a, one), (a, one)]).is_err());
        assert!(assouad_estimate(&s, &[(a, one)]).is_err());
        let slope = assouad_estimate(
            &s,
            &[(Length::new(1, 2), one), (Length::new(1, 4), one), (Length::new(1, 8), one)],
        )
        .unwrap();
        assert_eq!(slope, 0.0);
    }
}
