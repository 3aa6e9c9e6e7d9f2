//! Stage sets: separated sets `S_j`, colored covers `B_j`, and the order in
//! which the new points of a stage receive their rays.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundaryModel;
use crate::doubling::{dist_to_member, family_multiplicity, grow_separated, ls23_cover, CoverFamily, MultiplicityProfile};
use crate::error::{Error, Result};
use crate::graph::HypGraphSpace;

use super::schedule::ScaleSchedule;
use super::{net_bound, SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NewPoint {
    /// Proxy position.
    pub pos: usize,
    /// Attachment class, `1..=N²`.
    pub class: usize,
}

#[derive(Debug, Clone)]
pub struct StageState {
    pub j: usize,
    pub s_prev: Vec<usize>,
    /// Centers of `cover`.
    pub y: Vec<usize>,
    /// `y` followed by the points added at scale `ε_j`.
    pub s: Vec<usize>,
    pub cover: CoverFamily<f64>,
    pub ordered_new: Vec<NewPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageViolation {
    pub stage: usize,
    pub check: &'static str,
    pub detail: String,
}

impl StageState {
    /// `S_0 = {μ⁰}` with the single ball `B̄(μ⁰, ε_0)`, which holds every proxy.
    pub fn initial(boundary: &BoundaryModel, schedule: &ScaleSchedule) -> Self {
        let k = boundary.len();
        Self {
            j: 0,
            s_prev: Vec::new(),
            y: vec![0],
            s: vec![0],
            cover: CoverFamily {
                radius: schedule.epsilon(0),
                centers: vec![0],
                members: vec![(0..k).collect()],
                color_classes: vec![vec![0]],
                profile: MultiplicityProfile { family_multiplicity: 1, per_center_multiplicity_3r: 1 },
            },
            ordered_new: vec![NewPoint { pos: 0, class: 1 }],
        }
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.s.contains(&pos)
    }

    pub fn to_json(&self, boundary: &BoundaryModel) -> serde_json::Value {
        let label = |v: &[usize]| v.iter().map(|&p| boundary.label(p).to_string()).collect::<Vec<_>>();
        serde_json::json!({
            "j": self.j,
            "s": label(&self.s),
            "y": label(&self.y),
            "cover": self.cover.to_json(boundary),
            "ordered_new": self.ordered_new.iter().map(|p| serde_json::json!({
                "point": boundary.label(p.pos),
                "class": p.class,
            })).collect::<Vec<_>>(),
        })
    }
}

fn point_multiplicity(boundary: &BoundaryModel, set: &[usize], t: f64) -> (usize, usize) {
    let family: Vec<Vec<usize>> = set.iter().map(|&s| vec![s]).collect();
    family_multiplicity(boundary, &family, t)
}

/// Stage `j` from stage `j − 1`: the cover at radius `ε_{j−1}/64` around a
/// net extending `S_{j−1}`, then `S_j` grown from its centers at scale
/// `ε_j`, skipping points that would break the `ε_{j−1}/16`-multiplicity cap.
pub fn stage_sets(
    boundary: &BoundaryModel,
    schedule: &ScaleSchedule,
    j: usize,
    previous: &StageState,
) -> Result<StageState> {
    if j == 0 || j > schedule.stages() || previous.j + 1 != j {
        return Err(Error::InvalidArgument(format!("no stage {j} after stage {}", previous.j)));
    }
    let n = schedule.n;
    let eps_prev = schedule.epsilon(j - 1);
    let eps = schedule.epsilon(j);
    let cover = ls23_cover(boundary, eps_prev / 64.0, &previous.s, n)?;
    let y = cover.centers.clone();

    let t = eps_prev / 16.0;
    let cap = net_bound(n);
    let k = boundary.len();
    let (m, w) = point_multiplicity(boundary, &y, t);
    if m as f64 > cap {
        return Err(Error::CoverBound {
            what: "net multiplicity",
            witness: boundary.label(w).to_string(),
            value: m,
            bound: cap as usize,
        });
    }
    let mut counts: Vec<usize> = (0..k)
        .map(|x| y.iter().filter(|&&c| boundary.d(x, c) <= t).count())
        .collect();
    let mut rejected: Vec<(usize, usize)> = Vec::new();
    let s = grow_separated(boundary, eps, &y, false, |_, p| {
        let worst = (0..k)
            .filter(|&x| boundary.d(x, p) <= t)
            .map(|x| counts[x] + 1)
            .max()
            .unwrap_or(0);
        if worst as f64 > cap {
            rejected.push((p, worst));
            return false;
        }
        for (x, c) in counts.iter_mut().enumerate() {
            if boundary.d(x, p) <= t {
                *c += 1;
            }
        }
        true
    });
    if let Some(x) = (0..k).find(|&x| !s.iter().any(|&c| boundary.d(x, c) < eps)) {
        let value = rejected.iter().find(|r| r.0 == x).map_or(0, |r| r.1);
        return Err(Error::CoverBound {
            what: "net multiplicity (uncoverable point)",
            witness: boundary.label(x).to_string(),
            value,
            bound: cap as usize,
        });
    }

    let new: Vec<usize> = s.iter().copied().filter(|p| !previous.s.contains(p)).collect();
    let ordered_new = order_new_points(boundary, &new, &previous.cover, eps_prev, n)?;
    let state = StageState { j, s_prev: previous.s.clone(), y, s, cover, ordered_new };
    let bad = stage_violations(boundary, schedule, &state);
    if let Some(v) = bad.first() {
        return Err(Error::Stage { stage: j, reason: format!("{}: {}", v.check, v.detail) });
    }
    Ok(state)
}

/// Class of each new point: the least `i ≤ N²` such that at most `i` balls of
/// the previous cover lie within `8iε_{j−1}` of it. Sorted by class, then by
/// position.
pub fn order_new_points(
    boundary: &BoundaryModel,
    new: &[usize],
    previous_cover: &CoverFamily<f64>,
    eps_prev: f64,
    n: usize,
) -> Result<Vec<NewPoint>> {
    let max_class = n * n;
    let mut out = Vec::with_capacity(new.len());
    for &p in new {
        let dists: Vec<f64> = previous_cover
            .members
            .iter()
            .map(|m| dist_to_member(boundary, p, m))
            .collect();
        let class = (1..=max_class).find(|&i| {
            let r = 8.0 * i as f64 * eps_prev;
            dists.iter().filter(|&&d| d <= r).count() <= i
        });
        match class {
            Some(class) => out.push(NewPoint { pos: p, class }),
            None => {
                let r = 8.0 * max_class as f64 * eps_prev;
                return Err(Error::CoverBound {
                    what: "attachment class",
                    witness: boundary.label(p).to_string(),
                    value: dists.iter().filter(|&&d| d <= r).count(),
                    bound: max_class,
                });
            }
        }
    }
    out.sort_by_key(|p| (p.class, p.pos));
    Ok(out)
}

/// Scans every structural requirement on a stage. Empty means all hold.
pub fn stage_violations(
    boundary: &BoundaryModel,
    schedule: &ScaleSchedule,
    stage: &StageState,
) -> Vec<StageViolation> {
    let j = stage.j;
    let mut out = Vec::new();
    let mut fail = |check: &'static str, detail: String| {
        out.push(StageViolation { stage: j, check, detail });
    };
    if j == 0 {
        if stage.s != [0] {
            fail("initial", "S_0 must be the first proxy".into());
        }
        return out;
    }
    let n = schedule.n;
    let nn = n * n;
    let eps_prev = schedule.epsilon(j - 1);
    let eps = schedule.epsilon(j);
    let r = eps_prev / 64.0;
    let k = boundary.len();
    let label = |p: usize| boundary.label(p).to_string();

    if eps_prev / eps != ScaleSchedule::ratio(n) {
        fail("scale ratio", format!("eps_{}/eps_{j} = {}", j - 1, eps_prev / eps));
    }
    if let Some(&p) = stage.s_prev.iter().find(|p| !stage.y.contains(p)) {
        fail("nested", format!("{} in S_{} but not a cover center", label(p), j - 1));
    }
    if let Some(&p) = stage.y.iter().find(|p| !stage.s.contains(p)) {
        fail("nested", format!("cover center {} missing from S_{j}", label(p)));
    }
    let pairs = |set: &[usize], min: f64| {
        set.iter()
            .enumerate()
            .flat_map(|(i, &a)| set[i + 1..].iter().map(move |&b| (a, b)))
            .find(|&(a, b)| boundary.d(a, b) < min)
    };
    if let Some((a, b)) = pairs(&stage.s, eps) {
        fail("separated", format!("d({}, {}) < eps_{j}", label(a), label(b)));
    }
    if let Some((a, b)) = pairs(&stage.y, r) {
        fail("centers separated", format!("d({}, {}) < eps_{}/64", label(a), label(b), j - 1));
    }
    let (m, w) = point_multiplicity(boundary, &stage.s, eps_prev / 16.0);
    if m as f64 > net_bound(n) {
        fail("net multiplicity", format!("{m} points of S_{j} near {}", label(w)));
    }
    let uncovered = (0..k).into_par_iter().find_first(|&x| !stage.s.iter().any(|&c| boundary.d(x, c) < eps));
    if let Some(x) = uncovered {
        fail("open cover", format!("{} is not within eps_{j} of S_{j}", label(x)));
    }
    let cover = &stage.cover;
    if (cover.radius - r).abs() > SLACK * r.max(1.0) || cover.centers != stage.y {
        fail("cover balls", "cover radius or centers do not match the stage".into());
    }
    for (c, m) in cover.centers.iter().zip(&cover.members) {
        let want: Vec<usize> = (0..k).filter(|&x| boundary.d(*c, x) <= cover.radius).collect();
        if &want != m {
            fail("cover balls", format!("ball around {} is not the closed ball", label(*c)));
        }
    }
    if let Some(x) = (0..k).find(|&x| !cover.members.iter().any(|m| m.contains(&x))) {
        fail("cover balls", format!("{} lies in no ball", label(x)));
    }
    let (fm, fw) = family_multiplicity(boundary, &cover.members, cover.radius);
    if fm > nn {
        fail("cover multiplicity", format!("{fm} balls meet the ball around {}", label(fw)));
    }
    let three = 3.0 * cover.radius;
    for &c in &cover.centers {
        let hits = cover.members.iter().filter(|m| dist_to_member(boundary, c, m) <= three).count();
        if hits > nn {
            fail("center multiplicity", format!("{hits} balls within 3r of {}", label(c)));
        }
    }
    if cover.color_classes.len() > nn {
        fail("color classes", format!("{} classes", cover.color_classes.len()));
    }
    for class in &cover.color_classes {
        let fam: Vec<Vec<usize>> = class.iter().map(|&m| cover.members[m].clone()).collect();
        let (cm, cw) = family_multiplicity(boundary, &fam, cover.radius);
        if cm > 1 {
            fail("color classes", format!("{cm} balls of one class meet near {}", label(cw)));
        }
    }
    let mut new: Vec<usize> = stage.ordered_new.iter().map(|p| p.pos).collect();
    new.sort_unstable();
    let mut want: Vec<usize> = stage.s.iter().copied().filter(|p| !stage.s_prev.contains(p)).collect();
    want.sort_unstable();
    if new != want {
        fail("new points", "ordered points differ from S_j minus S_{j-1}".into());
    }
    if let Some(p) = stage.ordered_new.iter().find(|p| p.class == 0 || p.class > nn) {
        fail("new points", format!("{} has class {}", label(p.pos), p.class));
    }
    out
}

/// Largest and smallest distance from the root to the canonical geodesic
/// between proxies whose boundary distance lies in `[lo, hi]`, scaled by the
/// space's denominator. `None` when no pair qualifies.
pub fn compute_q_q(space: &HypGraphSpace, boundary: &BoundaryModel, lo: f64, hi: f64) -> Option<(i64, i64)> {
    let k = boundary.len();
    let root = space.root();
    (0..k)
        .into_par_iter()
        .flat_map_iter(|a| ((a + 1)..k).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            let d = boundary.d(a, b);
            d >= lo && d <= hi
        })
        .map(|(a, b)| {
            let path = space.canonical_geodesic(boundary.vertex(a), boundary.vertex(b));
            let v = space.scaled_dist_to_path(root, &path.vertices);
            (v, v)
        })
        .reduce_with(|x, y| (x.0.max(y.0), x.1.min(y.1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::length::Length;

    fn star(k: usize) -> HypGraphSpace {
        let mut ids = vec!["r".to_string()];
        ids.extend((0..k).map(|i| format!("l{i}")));
        let one = Length::from_integer(1);
        let edges = (1..=k).map(|i| (0, i, one)).collect();
        HypGraphSpace::from_indexed(ids, edges, 0, one, (1..=k).collect()).unwrap()
    }

    #[test]
    fn two_proxies_saturate_at_stage_one() {
        let g = star(2);
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let sched = super::super::schedule::make_schedule(&b, 2, None).unwrap();
        assert_eq!(sched.stages(), 1);
        let s0 = StageState::initial(&b, &sched);
        let s1 = stage_sets(&b, &sched, 1, &s0).unwrap();
        assert_eq!(s1.s, vec![0, 1]);
        assert_eq!(s1.cover.members, vec![vec![0], vec![1]]);
        assert_eq!(s1.ordered_new, vec![NewPoint { pos: 1, class: 1 }]);
        assert!(stage_violations(&b, &sched, &s1).is_empty());
    }

    #[test]
    fn empty_and_far_apart_orderings() {
        let g = star(3);
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let cover = CoverFamily {
            radius: 0.0,
            centers: vec![0, 1, 2],
            members: vec![vec![0], vec![1], vec![2]],
            color_classes: vec![vec![0, 1, 2]],
            profile: MultiplicityProfile { family_multiplicity: 1, per_center_multiplicity_3r: 1 },
        };
        assert!(order_new_points(&b, &[], &cover, 0.01, 2).unwrap().is_empty());
        let got = order_new_points(&b, &[2, 1], &cover, 0.01, 2).unwrap();
        assert_eq!(got, vec![NewPoint { pos: 1, class: 1 }, NewPoint { pos: 2, class: 1 }]);
    }

    #[test]
    fn class_overflow_is_reported() {
        let g = star(3);
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        let cover = CoverFamily {
            radius: 0.0,
            centers: vec![0, 1, 2],
            members: vec![vec![0], vec![1], vec![2]],
            color_classes: vec![vec![0, 1, 2]],
            profile: MultiplicityProfile { family_multiplicity: 1, per_center_multiplicity_3r: 1 },
        };
        // every ball is within 8ε of every point, and N² = 1 allows one
        let err = order_new_points(&b, &[0], &cover, 1.0, 1).unwrap_err();
        assert!(err.is_bound_violation());
    }

    #[test]
    fn q_on_a_tree_is_the_gromov_spread() {
        let g = star(3);
        let b = BoundaryModel::visual(&g, 1.0).unwrap();
        assert_eq!(compute_q_q(&g, &b, 0.5, 1.0), Some((0, 0)));
        assert_eq!(compute_q_q(&g, &b, 2.0, 3.0), None);
    }
}
