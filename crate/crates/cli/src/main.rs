//! `ramseylab` command-line front end.
//!
//! Exit status: 0 when every check passes, 1 on a domain failure, 2 on a
//! usage or parse error.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramseylab::coding::{
    build_coding_coloring, decode_membership, random_approximation, CEApproximation,
};
use ramseylab::coloring::{check_homogeneity, random_stable_coloring, Coloring, Homogeneity, Kind};
use ramseylab::forcing::{validate_condition, Condition, ForcingError};
use ramseylab::functional::{check_consistency, Axiom, FunctionalFile, OracleFunctional};
use ramseylab::reduction::{relation_matrix, translate, Notion, Principle};
use ramseylab::runner::{
    from_jsonl, run_stages, schedule_from_json_str, to_jsonl, verify, Event, Inputs,
};
use ramseylab::tree::{
    build_tree, compute_sort, label_tree, labeled_subtree, Arity, LabeledTree, Theta, TreeParams,
    Variant,
};

#[derive(Parser)]
#[command(
    name = "ramseylab",
    version,
    about = "Finite-horizon experiments on stable 2-colorings of pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Homogeneity of a set, validity of a condition, consistency of a functional.
    Check(CheckArgs),
    /// Translate a solution between principles.
    Reduce(ReduceArgs),
    /// Coding colorings from approximations, and membership decoding.
    #[command(subcommand)]
    Code(CodeCommand),
    /// Build, label and prune a diagonalization tree.
    Tree(TreeArgs),
    /// Execute a schedule and write its transcript.
    Run(RunArgs),
    /// The reduction table between the four principles.
    Relations(RelationsArgs),
    /// Random instances, deterministic in the seed.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    coloring: Option<PathBuf>,
    /// JSON array of elements, or of joined codes for the p-kinds.
    #[arg(long, requires = "coloring")]
    set: Option<PathBuf>,
    #[arg(long, default_value = "homog", value_parser = parse_from_str::<Kind>)]
    kind: Kind,
    #[arg(long)]
    condition: Option<PathBuf>,
    /// Allow elements without a limit.
    #[arg(long)]
    partial: bool,
    #[arg(long)]
    functional: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    coloring: PathBuf,
    #[arg(long, value_parser = parse_from_str::<Principle>)]
    from: Principle,
    #[arg(long, value_parser = parse_from_str::<Principle>)]
    to: Principle,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CodeCommand {
    /// Emit the coding coloring of an approximation.
    Encode {
        #[arg(long)]
        approx: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode memberships from an increasing p-homogeneous joined set.
    Decode {
        #[arg(long)]
        approx: PathBuf,
        #[arg(long)]
        set: PathBuf,
        /// Elements to decode; every domain element by default.
        #[arg(long, value_delimiter = ',')]
        z: Vec<usize>,
    },
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long)]
    functional: PathBuf,
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// `a..b` (inclusive) or a comma-separated list.
    #[arg(long, value_parser = parse_reservoir)]
    reservoir: Reservoir,
    /// Joined segment codes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    segment: Vec<usize>,
    #[arg(long, default_value = "2", value_parser = parse_from_str::<Arity>)]
    arity: Arity,
    #[arg(long, default_value = "plain", value_parser = parse_from_str::<Variant>)]
    variant: Variant,
    #[arg(long, default_value_t = 4)]
    depth_cap: usize,
    #[arg(long, env = "RAMSEYLAB_THETA", default_value = "majority", value_parser = parse_from_str::<Theta>)]
    theta: Theta,
    /// Keep only the labeled subtree.
    #[arg(long)]
    labeled: bool,
    /// Compute sort values (three labels only).
    #[arg(long)]
    sort: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Verify this transcript instead of executing the schedule.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verify: bool,
    #[arg(long, env = "RAMSEYLAB_THETA", default_value = "majority", value_parser = parse_from_str::<Theta>)]
    theta: Theta,
}

#[derive(Args)]
struct RelationsArgs {
    #[arg(long)]
    json: bool,
    /// `LHS RHS NOTION`, e.g. `SRT SPT sc`.
    #[arg(long, num_args = 3, value_names = ["LHS", "RHS", "NOTION"])]
    query: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum GenCommand {
    Coloring {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        stab_bound: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Approx {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        domain: usize,
        #[arg(long)]
        stages: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A valid condition read off a random stable coloring.
    Condition {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A functional whose axioms all output 1.
    Functional {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        axioms: usize,
        /// Inputs are drawn below this bound.
        #[arg(long, default_value_t = 12)]
        inputs: usize,
        /// Queried codes are drawn below this bound.
        #[arg(long, default_value_t = 16)]
        codes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// The inputs were well formed and a check failed.
    Domain(String),
    Usage(String),
}

type Outcome = Result<bool, Failure>;

fn parse_from_str<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

#[derive(Clone)]
struct Reservoir(Vec<usize>);

fn parse_reservoir(s: &str) -> Result<Reservoir, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => Ok(Reservoir((num(a)?..=num(b)?).collect())),
        None => s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect::<Result<_, _>>()
            .map(Reservoir),
    }
}

fn usage(path: &Path, e: impl Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(path, e))
}

fn read_set(path: &Path) -> Result<BTreeSet<usize>, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| usage(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn set_json(set: &BTreeSet<usize>) -> String {
    serde_json::to_string(set).expect("sets serialize")
}

fn cmd_check(a: &CheckArgs) -> Outcome {
    if a.coloring.is_none() && a.condition.is_none() && a.functional.is_none() {
        return Err(Failure::Usage(
            "nothing to check: give --coloring, --condition or --functional".into(),
        ));
    }
    let mut ok = true;
    if let Some(path) = &a.coloring {
        let f = Coloring::from_json_str(&read(path)?).map_err(|e| usage(path, e))?;
        let bad = f.violations();
        match bad.first() {
            None => println!("coloring: limits consistent"),
            Some((x, u)) => {
                ok = false;
                println!("coloring: limit of {x} fails at {u}");
            }
        }
        if let Some(set_path) = &a.set {
            let set = read_set(set_path)?;
            let h =
                check_homogeneity(&f, &set, a.kind).map_err(|e| Failure::Domain(e.to_string()))?;
            let noun = match a.kind {
                Kind::Homog => "homogeneous",
                Kind::PHomog => "p-homogeneous",
                Kind::IncrPHomog => "increasing p-homogeneous",
                Kind::LimitHomog => "limit homogeneous",
            };
            match h {
                Homogeneity::Color(c) => println!("{noun} color {c}"),
                Homogeneity::Vacuous => println!("{noun} (vacuously)"),
                Homogeneity::Fails { x, y } => {
                    ok = false;
                    println!("not {noun}: counterexample ({x}, {y})");
                }
            }
        }
    }
    if let Some(path) = &a.condition {
        match Condition::from_json_str(&read(path)?, true) {
            Ok(p) => {
                let bad: Vec<_> = if a.partial {
                    p.partial_violations()
                } else {
                    validate_condition(&p)
                };
                if bad.is_empty() {
                    println!("condition: valid (n = {})", p.len());
                } else {
                    ok = false;
                    println!("condition: invalid: {bad:?}");
                }
            }
            Err(ForcingError::Invalid(bad)) => {
                ok = false;
                println!("condition: invalid: {bad:?}");
            }
            Err(e) => return Err(usage(path, e)),
        }
    }
    if let Some(path) = &a.functional {
        let file: FunctionalFile =
            serde_json::from_str(&read(path)?).map_err(|e| usage(path, e))?;
        let clashes = check_consistency(&file.axioms);
        if clashes.is_empty() {
            println!("functional: consistent ({} axioms)", file.axioms.len());
        } else {
            ok = false;
            println!("functional: inconsistent axiom pairs {clashes:?}");
        }
    }
    Ok(ok)
}

fn cmd_reduce(a: &ReduceArgs) -> Outcome {
    let f = Coloring::from_json_str(&read(&a.coloring)?).map_err(|e| usage(&a.coloring, e))?;
    let sol = read_set(&a.solution)?;
    let out = translate(&f, a.from, a.to, &sol).map_err(|e| Failure::Domain(e.to_string()))?;
    if a.out.is_some() {
        println!("{} solution: {}", a.to, set_json(&out));
    }
    emit(a.out.as_deref(), &set_json(&out))?;
    Ok(true)
}

fn load_approx(path: &Path) -> Result<CEApproximation, Failure> {
    CEApproximation::from_json_str(&read(path)?).map_err(|e| usage(path, e))
}

fn cmd_code(c: &CodeCommand) -> Outcome {
    match c {
        CodeCommand::Encode {
            approx,
            horizon,
            out,
        } => {
            let a = load_approx(approx)?;
            let f =
                build_coding_coloring(&a, *horizon).map_err(|e| Failure::Domain(e.to_string()))?;
            emit(out.as_deref(), &f.to_json_string())?;
            Ok(true)
        }
        CodeCommand::Decode { approx, set, z } => {
            let a = load_approx(approx)?;
            let zset = read_set(set)?;
            let queries: Vec<usize> = if z.is_empty() {
                (0..a.domain()).collect()
            } else {
                z.clone()
            };
            let mut ok = true;
            for &q in &queries {
                let got =
                    decode_membership(&a, &zset, q).map_err(|e| Failure::Domain(e.to_string()))?;
                let truth = a.final_set().contains(&q);
                let word = |b: bool| if b { "member" } else { "absent" };
                let mark = if got == truth { "" } else { " MISMATCH" };
                ok &= got == truth;
                println!("{q}: {} (final set: {}){mark}", word(got), word(truth));
            }
            Ok(ok)
        }
    }
}

fn cmd_tree(a: &TreeArgs) -> Outcome {
    let gamma = OracleFunctional::from_json_str(&read(&a.functional)?)
        .map_err(|e| usage(&a.functional, e))?;
    let params = TreeParams {
        k: a.k,
        gamma,
        segment: a.segment.iter().copied().collect(),
        reservoir: a.reservoir.0.clone(),
        arity: a.arity,
        variant: a.variant,
        depth_cap: a.depth_cap,
    };
    let domain = |e: ramseylab::tree::TreeError| Failure::Domain(e.to_string());
    let mut tree: LabeledTree = build_tree(&params).map_err(domain)?;
    match label_tree(&tree, a.theta) {
        Ok(t) => tree = t,
        Err(e) if a.labeled || a.sort => return Err(domain(e)),
        Err(e) => println!("unlabeled: {e}"),
    }
    if a.labeled {
        tree = labeled_subtree(&tree, a.theta).map_err(domain)?;
    }
    if a.sort {
        tree = compute_sort(&tree, a.theta).map_err(domain)?;
    }
    for n in &tree.nodes {
        let s: Vec<String> = n.string.iter().map(usize::to_string).collect();
        let label = n
            .label
            .as_ref()
            .map_or_else(|| "-".into(), |l| l.to_string());
        println!("⟨{}⟩ {} {label}", s.join(","), n.kind);
    }
    if let Some(p) = &a.out {
        let json = serde_json::to_string_pretty(&tree.to_json()).expect("trees serialize");
        std::fs::write(p, json).map_err(|e| usage(p, e))?;
    }
    if let Some(p) = &a.dot {
        std::fs::write(p, tree.to_dot()).map_err(|e| usage(p, e))?;
    }
    Ok(true)
}

fn cmd_run(a: &RunArgs) -> Outcome {
    let inputs = Inputs::from_json_str(&read(&a.inputs)?).map_err(|e| usage(&a.inputs, e))?;
    let schedule =
        schedule_from_json_str(&read(&a.schedule)?).map_err(|e| usage(&a.schedule, e))?;
    let events = match &a.transcript {
        Some(p) => from_jsonl(&read(p)?).map_err(|e| usage(p, e))?,
        None => {
            let run = run_stages(&inputs, &schedule, a.theta)
                .map_err(|e| Failure::Domain(e.to_string()))?;
            if let Some(h) = &run.halted {
                println!("halted: {h}");
            }
            run.events
        }
    };
    for e in &events {
        if let Event::Stage(r) = e {
            println!("stage {}: {} ({})", r.stage, r.outcome.kind(), r.rationale);
        }
    }
    if a.transcript.is_none() {
        if let Some(p) = &a.out {
            std::fs::write(p, to_jsonl(&events)).map_err(|e| usage(p, e))?;
        }
    }
    if !a.verify && a.transcript.is_none() {
        return Ok(true);
    }
    let v = verify(&inputs, &schedule, &events, a.theta);
    for f in &v.failures {
        println!("verification failure: {f}");
    }
    println!(
        "verified {} events: {}",
        v.events,
        if v.ok() { "ok" } else { "FAILED" }
    );
    Ok(v.ok())
}

fn cmd_relations(a: &RelationsArgs) -> Outcome {
    let m = relation_matrix();
    if let Some(q) = &a.query {
        let p = |s: &str| s.parse::<Principle>().map_err(Failure::Usage);
        let notion = q[2].parse::<Notion>().map_err(Failure::Usage)?;
        let r = m.get(p(&q[0])?, p(&q[1])?, notion);
        if a.json {
            println!(
                "{}",
                serde_json::to_string_pretty(r).expect("relations serialize")
            );
        } else {
            println!("{r}");
        }
        return Ok(true);
    }
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&m).expect("relations serialize")
        );
        return Ok(true);
    }
    for notion in Notion::ALL {
        println!(
            "{:<6}{}",
            format!("<={notion}"),
            Principle::ALL.map(|p| format!("{:>6}", p.name())).join("")
        );
        for lhs in Principle::ALL {
            let row: Vec<String> = Principle::ALL
                .iter()
                .map(|&rhs| {
                    format!(
                        "{:>6}",
                        if m.get(lhs, rhs, notion).holds {
                            "yes"
                        } else {
                            "no"
                        }
                    )
                })
                .collect();
            println!("{:<6}{}", lhs.name(), row.join(""));
        }
        println!();
    }
    for r in m.entries.iter().filter(|r| r.lhs != r.rhs) {
        println!("{r}");
    }
    Ok(true)
}

fn cmd_gen(g: &GenCommand) -> Outcome {
    let domain = |e: &dyn Display| Failure::Domain(e.to_string());
    match g {
        GenCommand::Coloring {
            seed,
            horizon,
            stab_bound,
            out,
        } => {
            let f = random_stable_coloring(*seed, *horizon, *stab_bound).map_err(|e| domain(&e))?;
            emit(out.as_deref(), &f.to_json_string())?;
        }
        GenCommand::Approx {
            seed,
            domain: d,
            stages,
            out,
        } => {
            let a = random_approximation(*seed, *d, *stages);
            emit(
                out.as_deref(),
                &serde_json::to_string(&a).expect("approximations serialize"),
            )?;
        }
        GenCommand::Condition { seed, n, out } => {
            let f = random_stable_coloring(*seed, (*n).max(2), 0).map_err(|e| domain(&e))?;
            let p = Condition::from_parts(
                *n,
                |x, y| f.color(x, y),
                (0..*n).map(|x| f.annotation(x)).collect(),
            );
            emit(
                out.as_deref(),
                &serde_json::to_string(&p).expect("conditions serialize"),
            )?;
        }
        GenCommand::Functional {
            seed,
            axioms,
            inputs,
            codes,
            out,
        } => {
            if *inputs == 0 || *codes == 0 {
                return Err(Failure::Usage(
                    "--inputs and --codes must be positive".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let list: Vec<Axiom> = (0..*axioms)
                .map(|_| {
                    let pos: Vec<usize> = (0..rng.gen_range(0..=2))
                        .map(|_| rng.gen_range(0..*codes))
                        .collect();
                    let neg: Vec<usize> = (0..rng.gen_range(0..=1))
                        .map(|_| rng.gen_range(0..*codes))
                        .filter(|c| !pos.contains(c))
                        .collect();
                    Axiom::new(rng.gen_range(0..*inputs), &pos, &neg, 1)
                })
                .collect();
            let f = OracleFunctional::new(list, false).map_err(|e| domain(&e))?;
            emit(
                out.as_deref(),
                &serde_json::to_string(&f.to_file()).expect("functionals serialize"),
            )?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Code(c) => cmd_code(c),
        Command::Tree(a) => cmd_tree(a),
        Command::Run(a) => cmd_run(a),
        Command::Relations(a) => cmd_relations(a),
        Command::Gen(g) => cmd_gen(g),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
