//! `hyptree`: generate instances, build trees, verify and export them.
//!
//! An instance directory holds `instance.json` (generator and boundary
//! settings), `space.json`, `boundary.json` and, for hyperbolic
//! approximations, `base.json`. `build` adds `tree.json`, `verify` adds
//! `report.json`, `export` adds `tree.dot`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hyptree::approx::{self, HyperbolicApproximation};
use hyptree::boundary::BoundaryModel;
use hyptree::graph::HypGraphSpace;
use hyptree::length::parse_length;
use hyptree::metric::{auto_epsilon, FiniteMetricSpace};
use hyptree::rtree::{build_tree, RTree};
use hyptree::verify::verify;

#[derive(Parser)]
#[command(name = "hyptree", version, about = "Rooted R-trees in finite hyperbolic graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance directory.
    Generate(GenerateArgs),
    /// Build the tree of an instance.
    Build(BuildArgs),
    /// Check the built tree and write `report.json`.
    Verify(DirArgs),
    /// Write the tree as Graphviz DOT.
    Export(ExportArgs),
    /// Print the summary of an existing report.
    Report(DirArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Generator {
    Interval,
    Cantor,
    Grid,
    FreeGroup,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Base metric carried to the proxies.
    Transported,
    /// Visual metric from Gromov products at the root.
    Visual,
}

#[derive(Args)]
struct GenerateArgs {
    generator: Generator,
    /// Points (interval) or side length (grid).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    /// Cantor contraction ratio.
    #[arg(long, default_value = "1/3")]
    ratio: String,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    #[arg(long)]
    radius: Option<usize>,
    /// Approximation levels; defaults to the first level finer than half the minimum separation.
    #[arg(long)]
    levels: Option<usize>,
    /// Visual parameter, or `auto` for the largest admissible one.
    #[arg(long, default_value = "auto")]
    epsilon: String,
    /// Boundary metric; approximations default to `transported`, graphs are always `visual`.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DirArgs {
    /// Instance directory.
    dir: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    dir: PathBuf,
    /// Stage count, or `saturate`.
    #[arg(long, default_value = "saturate")]
    stages: String,
}

#[derive(Args)]
struct ExportArgs {
    dir: PathBuf,
    /// Output file; defaults to `tree.dot` in the instance directory.
    #[arg(long)]
    dot: Option<PathBuf>,
}

struct Instance {
    space: HypGraphSpace,
    boundary: BoundaryModel,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("missing --{flag}"))
}

fn epsilon_for(spec: &str, space: &HypGraphSpace) -> Result<f64> {
    if spec == "auto" {
        return Ok(auto_epsilon(space.delta()));
    }
    spec.parse().with_context(|| format!("bad --epsilon `{spec}`"))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let base = match args.generator {
        Generator::Interval => Some(approx::interval(required(args.n, "n")?)?),
        Generator::Cantor => Some(approx::cantor(required(args.depth, "depth")?, parse_length(&args.ratio)?)?),
        Generator::Grid | Generator::FreeGroup => None,
    };
    let (space, approximation) = match &base {
        Some(b) => {
            let levels = args.levels.unwrap_or_else(|| approx::default_levels(b));
            let a = approx::build_hyperbolic_approximation(b, levels)?;
            (a.graph.clone(), Some(a))
        }
        None => {
            if args.mode == Some(Mode::Transported) {
                bail!("graph generators have no base space to transport");
            }
            let g = match args.generator {
                Generator::Grid => approx::grid_graph(required(args.n, "n")?)?,
                _ => approx::free_group_ball(args.rank, required(args.radius, "radius")?)?,
            };
            (g, None)
        }
    };
    let mode = args.mode.unwrap_or(if approximation.is_some() { Mode::Transported } else { Mode::Visual });
    let epsilon = epsilon_for(&args.epsilon, &space)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let params = json!({
        "n": args.n, "depth": args.depth, "ratio": args.ratio, "rank": args.rank,
        "radius": args.radius, "levels": approximation.as_ref().map(HyperbolicApproximation::levels),
    });
    let manifest = json!({
        "generator": args.generator.to_possible_value().map(|v| v.get_name().to_string()),
        "params": params,
        "epsilon": epsilon,
        "mode": if mode == Mode::Transported { "transported" } else { "visual" },
        "identification": approximation.as_ref().map(|a| {
            a.identification.iter().map(|&i| a.base.id(i).to_string()).collect::<Vec<_>>()
        }),
    });
    write_json(&args.out.join("space.json"), &space.to_json())?;
    if let Some(a) = &approximation {
        write_json(&args.out.join("base.json"), &a.base.to_json())?;
    }
    write_json(&args.out.join("instance.json"), &manifest)?;
    let inst = load(&args.out)?;
    write_json(&args.out.join("boundary.json"), &inst.boundary.to_json())?;
    println!(
        "{}: {} vertices, {} boundary points, delta = {}, epsilon = {epsilon}",
        args.out.display(),
        inst.space.len(),
        inst.boundary.len(),
        inst.space.delta()
    );
    Ok(())
}

fn load(dir: &Path) -> Result<Instance> {
    let manifest = read_json(&dir.join("instance.json"))?;
    let space = HypGraphSpace::from_json(&read_json(&dir.join("space.json"))?)?;
    let epsilon = manifest["epsilon"].as_f64().context("instance.json: epsilon")?;
    let boundary = match manifest["mode"].as_str() {
        Some("visual") => BoundaryModel::visual(&space, epsilon)?,
        Some("transported") => {
            let base = FiniteMetricSpace::from_json(&read_json(&dir.join("base.json"))?)?;
            let ids = manifest["identification"].as_array().context("instance.json: identification")?;
            let ident = ids
                .iter()
                .map(|v| base.index_of(v.as_str().unwrap_or_default()))
                .collect::<hyptree::Result<Vec<_>>>()?;
            BoundaryModel::transported(&space, epsilon, &base, &ident)?
        }
        other => bail!("instance.json: unknown mode {other:?}"),
    };
    Ok(Instance { space, boundary })
}

fn parse_stages(spec: &str) -> Result<Option<usize>> {
    if spec == "saturate" {
        Ok(None)
    } else {
        Ok(Some(spec.parse().with_context(|| format!("bad --stages `{spec}`"))?))
    }
}

fn build(inst: &Instance, stages: Option<usize>) -> Result<RTree> {
    Ok(build_tree(&inst.space, &inst.boundary, stages)?)
}

/// Rebuilds the tree recorded in `tree.json` and insists it is unchanged.
fn load_tree(dir: &Path, inst: &Instance) -> Result<RTree> {
    let stored = read_json(&dir.join("tree.json")).context("run `hyptree build` first")?;
    let stages = stored["schedule"]["requested"].as_u64().map(|s| s as usize);
    let tree = build(inst, stages)?;
    if tree.to_json(&inst.space, &inst.boundary) != stored {
        bail!("tree.json does not match the instance; rebuild it");
    }
    Ok(tree)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => generate(args)?,
        Command::Build(args) => {
            let inst = load(&args.dir)?;
            let tree = build(&inst, parse_stages(&args.stages)?)?;
            write_json(&args.dir.join("tree.json"), &tree.to_json(&inst.space, &inst.boundary))?;
            println!(
                "tree: {} nodes, {} rays, {} stages, N = {}",
                tree.len(),
                tree.terminals().len(),
                tree.schedule().stages(),
                tree.n()
            );
        }
        Command::Verify(args) => {
            let inst = load(&args.dir)?;
            let tree = load_tree(&args.dir, &inst)?;
            let report = verify(&inst.space, &inst.boundary, &tree);
            let path = args.dir.join("report.json");
            write_json(&path, &report.to_json())?;
            print!("{}", report.summary_table());
            if !report.passed() {
                eprintln!("checks failed; see {}", path.display());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Export(args) => {
            let inst = load(&args.dir)?;
            let tree = load_tree(&args.dir, &inst)?;
            let path = args.dot.unwrap_or_else(|| args.dir.join("tree.dot"));
            fs::write(&path, tree.to_dot(&inst.space)).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
        }
        Command::Report(args) => {
            let value = read_json(&args.dir.join("report.json"))?;
            let report: ReportView = ReportView::from_json(&value)?;
            print!("{}", report.table);
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Summary rebuilt from a stored report.
struct ReportView {
    table: String,
    passed: bool,
}

impl ReportView {
    fn from_json(v: &Value) -> Result<Self> {
        let checks = v["checks"].as_array().context("report.json: checks")?;
        let width = checks.iter().filter_map(|c| c["name"].as_str()).map(str::len).max().unwrap_or(0);
        let mut table = String::new();
        let mut passed = true;
        for c in checks {
            let status = match c["status"].as_str() {
                Some("pass") => "pass",
                Some("not_applicable") => "n/a",
                _ => {
                    passed = false;
                    "FAIL"
                }
            };
            table.push_str(&format!(
                "{:<width$}  {:<4}  {}\n",
                c["name"].as_str().unwrap_or("?"),
                status,
                c["detail"].as_str().unwrap_or("")
            ));
        }
        Ok(Self { table, passed })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
