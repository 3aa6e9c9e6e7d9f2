//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use hyptree::approx::{self, visual_core, with_pendant_path};
use hyptree::boundary::BoundaryModel;
use hyptree::doubling::packing_number;
use hyptree::graph::HypGraphSpace;
use hyptree::length::{parse_length, to_f64};
use hyptree::metric::{auto_epsilon, check_epsilon_admissible, visual_metric, GromovProductTable};
use hyptree::rtree::{build_tree, fiber_bound, RTree};
use hyptree::verify::{distance_to_tree, verify, Status, VerificationReport};
use hyptree::Length;

const TIME_LIMIT: Duration = Duration::from_secs(300);

struct Run {
    inst: Instance,
    tree: RTree,
    report: VerificationReport,
    elapsed: Duration,
}

fn run(inst: Instance) -> Result<Run, String> {
    let start = Instant::now();
    let tree = build_tree(&inst.space, &inst.boundary, None).map_err(|e| format!("{}: {e}", inst.name))?;
    let report = verify(&inst.space, &inst.boundary, &tree);
    Ok(Run { inst, tree, report, elapsed: start.elapsed() })
}

fn len(s: &str) -> Length {
    parse_length(s).unwrap()
}

/// Names of the runs on which `check` did not pass.
fn failing(runs: &[Run], check: &str) -> Vec<String> {
    runs.iter()
        .filter(|r| r.report.check(check).map(|c| c.status) != Some(Status::Pass))
        .map(|r| format!("{}:{check}", r.inst.name))
        .collect()
}

fn verdict(bad: Vec<String>, ok: String) -> Result<String, String> {
    if bad.is_empty() {
        Ok(ok)
    } else {
        Err(bad.join(", "))
    }
}

fn soundness(runs: &[Run]) -> Result<String, String> {
    let mut bad = failing(runs, "tree_validity");
    bad.extend(runs.iter().filter(|r| r.elapsed > TIME_LIMIT).map(|r| format!("{} took {:?}", r.inst.name, r.elapsed)));
    bad.extend(runs.iter().filter(|r| r.inst.space.len() > 20_000).map(|r| format!("{} too large", r.inst.name)));
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap_or_default();
    verdict(bad, format!("{} instances, slowest {:.1}s", runs.len(), slowest.as_secs_f64()))
}

fn fibers(runs: &[Run]) -> Result<String, String> {
    let mut bad: Vec<String> = runs
        .iter()
        .filter(|r| r.report.constants.max_fiber as f64 > fiber_bound(r.tree.n()))
        .map(|r| format!("{} M = {}", r.inst.name, r.report.constants.max_fiber))
        .collect();
    if fiber_bound(2) != 128.0 {
        bad.push(format!("bound for N = 2 is {}", fiber_bound(2)));
    }
    let cantor3 = runs.iter().find(|r| r.inst.name == "cantor-3").unwrap();
    if cantor3.report.constants.max_fiber > 16 {
        bad.push(format!("cantor-3 M = {}", cantor3.report.constants.max_fiber));
    }
    let worst = runs.iter().map(|r| r.report.constants.max_fiber).max().unwrap_or(0);
    verdict(bad, format!("max M = {worst}, cantor-3 M = {}", cantor3.report.constants.max_fiber))
}

fn surjectivity(runs: &[Run]) -> Result<String, String> {
    let mut bad = failing(runs, "boundary_surjectivity");
    bad.extend(runs.iter().filter(|r| !r.report.constants.saturated).map(|r| format!("{} not saturated", r.inst.name)));
    verdict(bad, "every proxy is a ray end at saturation".into())
}

fn quasi_geodesy(runs: &[Run]) -> Result<String, String> {
    let mut bad = failing(runs, "ray_quasigeodesy");
    let mut trees = 0;
    for r in runs {
        let c = &r.report.constants;
        let stretch = to_f64(&len(&c.max_stretch));
        let delta = to_f64(&len(&c.delta));
        let bound = (c.max_fiber as f64 + 1.0) * (75.0 * delta + 4.0 * c.beta);
        if stretch > bound + 1e-9 {
            bad.push(format!("{} C* = {stretch} > {bound}", r.inst.name));
        }
        if delta == 0.0 {
            trees += 1;
            if len(&c.max_stretch) != Length::from_integer(0) {
                bad.push(format!("{} C* = {} on a tree", r.inst.name, c.max_stretch));
            }
        }
    }
    let worst = runs.iter().map(|r| to_f64(&len(&r.report.constants.max_stretch))).fold(0.0, f64::max);
    verdict(bad, format!("max C* = {worst}, C* = 0 on {trees} delta-0 instances"))
}

fn stage_invariants(runs: &[Run]) -> Result<String, String> {
    let checks = [
        "stage_invariants",
        "attach_records",
        "connector_length",
        "class_consistency",
        "connection_distance",
        "connection_bookkeeping",
        "annulus_spread",
        "eventually_geodesic",
    ];
    let bad: Vec<String> = checks.iter().flat_map(|c| failing(runs, c)).collect();
    let records: usize = runs.iter().map(|r| r.tree.log().len()).sum();
    let stages: usize = runs.iter().map(|r| r.tree.stages().len()).sum();
    verdict(bad, format!("{stages} stages, {records} attach records"))
}

fn sandwich(runs: &[Run]) -> Result<String, String> {
    let bad = failing(runs, "visual_sandwich");
    let pairs: usize = runs.iter().map(|r| r.inst.boundary.len() * r.inst.boundary.len().saturating_sub(1) / 2).sum();
    verdict(bad, format!("{pairs} proxy pairs"))
}

fn bracketing(runs: &[Run]) -> Result<String, String> {
    let mut bad = failing(runs, "gromov_bracketing");
    bad.extend(failing(runs, "double_ray_bracketing"));
    let exhaustive = runs.iter().filter(|r| r.inst.space.len() <= 500).count();
    verdict(bad, format!("{exhaustive} exhaustive, {} sampled", runs.len() - exhaustive))
}

fn oracles() -> Result<String, String> {
    let mut bad = Vec::new();
    for (name, g, pinned) in [("C6", cycle(6), 1), ("grid-5", approx::grid_graph(5).unwrap(), 4)] {
        let oracle = delta_by_enumeration(&g);
        if oracle != Length::from_integer(pinned) || g.delta_thin_triangles() != oracle {
            bad.push(format!("{name} delta {} vs oracle {oracle}", g.delta_thin_triangles()));
        }
    }

    let base = approx::cantor(3, Length::new(1, 3)).unwrap();
    let a = approx::build_hyperbolic_approximation(&base, approx::default_levels(&base)).unwrap();
    let products = GromovProductTable::new(a.graph.metric(), a.graph.root());
    let eps = auto_epsilon(a.graph.delta());
    let params = check_epsilon_admissible(eps, a.graph.delta()).unwrap();
    let proxies = a.graph.proxies();
    let mut supports = 0;
    for mask in 1u32..(1 << proxies.len()) {
        let support: Vec<usize> = (0..proxies.len()).filter(|i| mask >> i & 1 == 1).map(|i| proxies[i]).collect();
        let table = visual_metric(&products, &params, &support).unwrap();
        for x in 0..support.len() {
            for y in 0..support.len() {
                if (table.get(x, y) - chain_infimum(&products, eps, &support, x, y)).abs() > 1e-12 {
                    bad.push(format!("visual metric on {support:?}"));
                }
            }
        }
        supports += 1;
    }

    let line = approx::interval(40).unwrap();
    let mut packings = 0;
    for alpha in 1..=8 {
        for beta in [alpha, 2 * alpha, 39] {
            let (al, be) = (Length::new(alpha, 39), Length::new(beta.max(alpha), 39));
            let got = packing_number(&line, al, be).unwrap();
            if !got.exact || got.count != packing_by_branching(&line, al, be) {
                bad.push(format!("packing at [{al}, {be}]"));
            }
            packings += 1;
        }
    }
    verdict(bad, format!("deltas pinned, {supports} supports, {packings} packings"))
}

fn coverage(runs: &[Run]) -> Result<String, String> {
    let mut bad = Vec::new();
    let mut seen = Vec::new();
    for r in runs.iter().filter(|r| r.inst.approximation.is_some()) {
        let c = &r.report.constants;
        let shortest = r.inst.space.edges().iter().map(|e| e.2).min().unwrap();
        let d = len(&c.visuality_d);
        if d > Length::from_integer(2) * shortest {
            bad.push(format!("{} D = {d}", r.inst.name));
        }
        let limit = 10.0 * (to_f64(&len(&c.delta)) + c.beta) + to_f64(&d);
        let delta_j = len(&c.coverage_delta);
        if to_f64(&delta_j) > limit + 1e-9 {
            bad.push(format!("{} Delta = {delta_j} > {limit}", r.inst.name));
        }
        if r.report.check("visual_coverage").map(|c| c.status) != Some(Status::Pass) {
            bad.push(format!("{}:visual_coverage", r.inst.name));
        }

        let a = r.inst.approximation.as_ref().unwrap();
        let deeper = approximation_instance(&r.inst.name, a.base.clone(), Some(a.levels() + 1));
        let next = run(deeper)?;
        let delta_next = len(&next.report.constants.coverage_delta);
        let two = Length::from_integer(2);
        if delta_next > two * delta_j || delta_j > two * delta_next {
            bad.push(format!("{} Delta {delta_j} at J, {delta_next} at J+1", r.inst.name));
        }
        seen.push(format!("{} {delta_j}/{delta_next}", r.inst.name));
    }
    verdict(bad, format!("Delta at J/J+1: {}", seen.join(", ")))
}

/// Hangs `pendant` unit edges from the core vertex farthest from the tree, on
/// a stem just longer than the measured κ.
fn pendant_fixture(r: &Run, pendant: usize) -> Result<String, String> {
    let a = r.inst.approximation.as_ref().unwrap();
    let kappa = len(&r.report.constants.kappa_measured);
    let to_tree = distance_to_tree(&r.tree, &r.inst.space);
    let core = visual_core(&r.inst.space, Length::from_integer(0)).map_err(|e| e.to_string())?;
    let at = *core.kept.iter().max_by_key(|&&v| (to_tree[v], std::cmp::Reverse(v))).unwrap();
    let mut lengths = vec![kappa + Length::from_integer(1)];
    lengths.extend(vec![Length::from_integer(1); pendant]);
    let (g, added): (HypGraphSpace, Vec<usize>) = with_pendant_path(&r.inst.space, at, &lengths).map_err(|e| e.to_string())?;
    let boundary = BoundaryModel::transported(&g, auto_epsilon(g.delta()), &a.base, &a.identification).map_err(|e| e.to_string())?;
    let tree = build_tree(&g, &boundary, None).map_err(|e| e.to_string())?;
    let report = verify(&g, &boundary, &tree);
    let check = report.check("outspread").unwrap();
    let spread = len(check.measured["outspread"].as_str().unwrap_or("0"));
    let core = visual_core(&g, len(&report.constants.kappa_measured)).map_err(|e| e.to_string())?;
    let excluded = added.iter().all(|v| core.kept.binary_search(v).is_err());
    let mut bad = Vec::new();
    if spread < Length::from_integer(pendant as i64) {
        bad.push(format!("out-spread {spread} < {pendant}"));
    }
    if !excluded {
        bad.push("pendant inside the visual core".into());
    }
    if check.status != Status::Pass {
        bad.push(check.detail.clone());
    }
    if bad.is_empty() {
        Ok(format!("{} L={pendant}: {spread}", r.inst.name))
    } else {
        Err(format!("{} L={pendant}: {}", r.inst.name, bad.join("; ")))
    }
}

fn outspread(runs: &[Run]) -> Result<String, String> {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for name in ["interval-5", "cantor-3"] {
        let r = runs.iter().find(|r| r.inst.name == name).unwrap();
        for pendant in [3, 6] {
            match pendant_fixture(r, pendant) {
                Ok(s) => ok.push(s),
                Err(e) => bad.push(e),
            }
        }
    }
    verdict(bad, format!("out-spread {}", ok.join(", ")))
}

fn artifacts(inst: &Instance) -> Result<String, String> {
    let tree = build_tree(&inst.space, &inst.boundary, None).map_err(|e| e.to_string())?;
    let report = verify(&inst.space, &inst.boundary, &tree);
    let mut out = serde_json::to_string_pretty(&inst.space.to_json()).unwrap();
    out += &serde_json::to_string_pretty(&inst.boundary.to_json()).unwrap();
    out += &serde_json::to_string_pretty(&tree.to_json(&inst.space, &inst.boundary)).unwrap();
    out += &serde_json::to_string_pretty(&report.to_json()).unwrap();
    Ok(out)
}

fn determinism() -> Result<String, String> {
    let make = || {
        vec![
            approximation_instance("cantor-3", approx::cantor(3, Length::new(1, 3)).unwrap(), None),
            graph_instance("free-2-3", approx::free_group_ball(2, 3).unwrap()),
            graph_instance("grid-5", approx::grid_graph(5).unwrap()),
        ]
    };
    let mut bad = Vec::new();
    let mut bytes = 0;
    for (a, b) in make().iter().zip(make().iter()) {
        let (x, y) = (artifacts(a)?, artifacts(b)?);
        bytes += x.len();
        if x != y {
            bad.push(a.name.clone());
        }
    }
    verdict(bad, format!("{bytes} bytes identical across two runs"))
}

fn main() {
    let runs: Vec<Run> = match corpus().into_iter().map(run).collect() {
        Ok(runs) => runs,
        Err(e) => {
            println!("criterion 1 FAIL: build failed: {e}");
            std::process::exit(1);
        }
    };
    let results = [
        ("R-tree soundness", soundness(&runs)),
        ("fiber bound", fibers(&runs)),
        ("surjectivity", surjectivity(&runs)),
        ("quasi-geodesy", quasi_geodesy(&runs)),
        ("stage invariants", stage_invariants(&runs)),
        ("visual sandwich", sandwich(&runs)),
        ("Gromov bracketing", bracketing(&runs)),
        ("oracle equivalences", oracles()),
        ("visual coverage", coverage(&runs)),
        ("out-spread", outspread(&runs)),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, result)) in results.iter().enumerate() {
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
