//! Acceptance suite. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero if any criterion fails or overruns its limit.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramseylab::coding::{build_coding_coloring, decode_membership, random_approximation};
use ramseylab::coloring::{
    check_homogeneity, decode_join, random_stable_coloring, Coloring, Homogeneity, JoinedSet, Kind,
    Limit,
};
use ramseylab::forcing::{
    assemble_coloring, complete, extend_pressing, extends, press_check, ButtonTriple, Completion,
    Condition, ForcingError,
};
use ramseylab::functional::{Axiom, OracleFunctional};
use ramseylab::reduction::{
    forward_chain, ipt_to_homogeneous, is_solution, limit_to_homogeneous, Principle,
};
use ramseylab::runner::{from_jsonl, run_stages, to_jsonl, verify, Event, Outcome, WalkCase};
use ramseylab::tree::{
    build_tree, label_tree, labeled_subtree, transition_nodes, Arity, Entry, LabeledTree, NodeKind,
    Theta, TreeParams, Variant,
};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn subsets(elements: &[usize]) -> impl Iterator<Item = BTreeSet<usize>> + '_ {
    (0u64..1 << elements.len()).map(move |m| {
        elements
            .iter()
            .enumerate()
            .filter(|(i, _)| m >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect()
    })
}

fn subsets_up_to(elements: &[usize], max: usize) -> Vec<BTreeSet<usize>> {
    fn go(elements: &[usize], max: usize, cur: &mut Vec<usize>, out: &mut Vec<BTreeSet<usize>>) {
        out.push(cur.iter().copied().collect());
        if cur.len() == max {
            return;
        }
        for (i, &e) in elements.iter().enumerate() {
            cur.push(e);
            go(&elements[i + 1..], max, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(elements, max, &mut Vec::new(), &mut out);
    out
}

/// Colors `c` such that every listed pair has color `c`.
fn admissible(f: &Coloring, pairs: impl Iterator<Item = (usize, usize)>) -> [bool; 2] {
    let mut ok = [true, true];
    for (x, y) in pairs {
        ok[1 - f.color(x, y) as usize] = false;
    }
    ok
}

fn agrees(h: Homogeneity, brute: [bool; 2]) -> bool {
    h.admits(0) == brute[0] && h.admits(1) == brute[1] && h.holds() == (brute[0] || brute[1])
}

fn homogeneity_oracle() -> Verdict {
    let elements: Vec<usize> = (0..8).collect();
    let plain: Vec<BTreeSet<usize>> = subsets(&elements).collect();
    let codes: Vec<usize> = (0..16).collect();
    let joined = subsets_up_to(&codes, 6);
    let mut checks = 0usize;
    for seed in 0..100u64 {
        let f = random_stable_coloring(seed, 8, (seed % 8) as usize).map_err(|e| e.to_string())?;
        ensure!(
            f.violations().is_empty(),
            "seed {seed}: generated coloring breaks its limits"
        );
        for s in &plain {
            let v: Vec<usize> = s.iter().copied().collect();
            let pairs = v
                .iter()
                .flat_map(|&x| v.iter().filter(move |&&y| x < y).map(move |&y| (x, y)));
            let h = check_homogeneity(&f, s, Kind::Homog).map_err(|e| e.to_string())?;
            ensure!(
                agrees(h, admissible(&f, pairs)),
                "seed {seed}: homogeneity of {s:?} gives {h:?}"
            );
            let mut limit = [true, true];
            for &x in s {
                limit[1 - f.annotation(x).expect("every row is annotated").color as usize] = false;
            }
            let h = check_homogeneity(&f, s, Kind::LimitHomog).map_err(|e| e.to_string())?;
            ensure!(
                agrees(h, limit),
                "seed {seed}: limit homogeneity of {s:?} gives {h:?}"
            );
            checks += 2;
        }
        for z in &joined {
            let left: Vec<usize> = z.iter().filter(|c| *c % 2 == 0).map(|c| c / 2).collect();
            let right: Vec<usize> = z.iter().filter(|c| *c % 2 == 1).map(|c| c / 2).collect();
            let cross = || {
                left.iter()
                    .flat_map(|&x| right.iter().map(move |&y| (x, y)))
            };
            let any = cross()
                .filter(|&(x, y)| x != y)
                .map(|(x, y)| (x.min(y), x.max(y)));
            let h = check_homogeneity(&f, z, Kind::PHomog).map_err(|e| e.to_string())?;
            ensure!(
                agrees(h, admissible(&f, any)),
                "seed {seed}: p-homogeneity of {z:?} gives {h:?}"
            );
            let up = cross().filter(|&(x, y)| x < y);
            let h = check_homogeneity(&f, z, Kind::IncrPHomog).map_err(|e| e.to_string())?;
            ensure!(
                agrees(h, admissible(&f, up)),
                "seed {seed}: increasing p-homogeneity of {z:?} gives {h:?}"
            );
            checks += 2;
        }
    }
    Ok(format!("{checks} checks over 100 colorings"))
}

fn random_subset(rng: &mut ChaCha8Rng, from: &[usize], p: f64) -> BTreeSet<usize> {
    from.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

fn reduction_soundness() -> Verdict {
    let (mut limit_runs, mut ipt_runs, mut chains) = (0usize, 0usize, 0usize);
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=40);
        let stab = rng.gen_range(0..=10usize.min(n - 1));
        let f = random_stable_coloring(seed, n, stab).map_err(|e| e.to_string())?;
        let color_of = |x: usize| f.annotation(x).expect("every row is annotated").color;
        let mut i: u8 = rng.gen_range(0..2);
        if !(0..n).any(|x| color_of(x) == i) {
            i = 1 - i;
        }
        let candidates: Vec<usize> = (0..n).filter(|&x| color_of(x) == i).collect();
        let mut l = random_subset(&mut rng, &candidates, 0.7);
        l.insert(candidates[rng.gen_range(0..candidates.len())]);

        let g = limit_to_homogeneous(&f, &l, i).map_err(|e| format!("seed {seed}: {e}"))?;
        let h = g.set();
        ensure!(
            h.is_subset(&l) && !h.is_empty(),
            "seed {seed}: picks {h:?} not a nonempty subset of {l:?}"
        );
        let hom = check_homogeneity(&f, &h, Kind::Homog).map_err(|e| e.to_string())?;
        ensure!(
            hom.admits(i),
            "seed {seed}: picks {h:?} are {hom:?}, predicted color {i}"
        );
        limit_runs += 1;

        // Columns drawn from a homogeneous set of color i give an
        // increasing p-homogeneous set of color i.
        let hv: Vec<usize> = h.iter().copied().collect();
        let left = random_subset(&mut rng, &hv, 0.6);
        let right = random_subset(&mut rng, &hv, 0.6);
        let z = JoinedSet::from_columns(&left, &right).0;
        let has_pair = left
            .first()
            .is_some_and(|&x| right.range(x + 1..).next().is_some());
        if has_pair {
            ensure!(
                is_solution(&f, Principle::Sipt, &z).unwrap(),
                "seed {seed}: generated {z:?} is not a solution"
            );
            let g = ipt_to_homogeneous(&f, &z).map_err(|e| format!("seed {seed}: {e}"))?;
            let out = g.set();
            ensure!(
                !out.is_empty(),
                "seed {seed}: empty homogeneous set from {z:?}"
            );
            let hom = check_homogeneity(&f, &out, Kind::Homog).map_err(|e| e.to_string())?;
            ensure!(
                hom.admits(i),
                "seed {seed}: {out:?} from {z:?} is {hom:?}, predicted color {i}"
            );
            ipt_runs += 1;
        }

        let solutions = [
            (Principle::Srt, h.clone()),
            (Principle::Spt, JoinedSet::from_columns(&left, &right).0),
            (Principle::Sipt, z.clone()),
            (Principle::D, l.clone()),
        ];
        for (from, sol) in &solutions {
            ensure!(
                is_solution(&f, *from, sol).unwrap(),
                "seed {seed}: input {sol:?} is not a {from:?} solution"
            );
            for to in Principle::ALL.into_iter().filter(|to| to <= from) {
                let out = forward_chain(*from, to, sol).map_err(|e| e.to_string())?;
                ensure!(
                    is_solution(&f, to, &out).unwrap(),
                    "seed {seed}: {from:?} -> {to:?} maps {sol:?} to non-solution {out:?}"
                );
                chains += 1;
            }
        }
    }
    Ok(format!(
        "{limit_runs} limit reductions, {ipt_runs} increasing reductions, {chains} chains"
    ))
}

fn coding_round_trip() -> Verdict {
    const HORIZON: usize = 60;
    let mut decoded = 0usize;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let domain = rng.gen_range(1..=20);
        let stages = rng.gen_range(1..=30);
        let a = random_approximation(seed, domain, stages);
        let f = build_coding_coloring(&a, HORIZON).map_err(|e| e.to_string())?;
        for x in 0..HORIZON {
            let l = f
                .annotation(x)
                .ok_or(format!("seed {seed}: row {x} has no limit"))?;
            ensure!(
                l.color == 1,
                "seed {seed}: row {x} has limit color {}",
                l.color
            );
            ensure!(
                (l.point..HORIZON)
                    .filter(|&u| u != x)
                    .all(|u| f.color(x, u) == 1),
                "seed {seed}: row {x} leaves color 1 after {}",
                l.point
            );
        }
        let bound: Vec<usize> = (0..HORIZON).map(|x| a.modulus_bound(x)).collect();
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 200 {
            attempts += 1;
            ensure!(
                attempts < 100_000,
                "seed {seed}: only {accepted} rich sets sampled"
            );
            let density = rng.gen_range(0.05..0.5);
            let mut left: BTreeSet<usize> =
                (0..HORIZON).filter(|_| rng.gen_bool(density)).collect();
            left.insert(rng.gen_range(domain - 1..HORIZON));
            let fits = |y: usize| left.range(..y).all(|&x| y - x > bound[x]);
            let room: Vec<usize> = (0..HORIZON).filter(|&y| fits(y)).collect();
            let p = rng.gen_range(0.1..0.9);
            let right = random_subset(&mut rng, &room, p);
            let rich = (0..domain).all(|z| {
                left.range(z..)
                    .next()
                    .is_some_and(|&x| right.range(x + 1..).next().is_some())
            });
            if !rich {
                continue;
            }
            let zset = JoinedSet::from_columns(&left, &right).0;
            let h = check_homogeneity(&f, &zset, Kind::IncrPHomog).map_err(|e| e.to_string())?;
            ensure!(h.admits(1), "seed {seed}: sampled set {zset:?} is {h:?}");
            for z in 0..domain {
                let got =
                    decode_membership(&a, &zset, z).map_err(|e| format!("seed {seed}: {e}"))?;
                ensure!(
                    got == a.final_set().contains(&z),
                    "seed {seed}: decoding {z} from {zset:?} gives {got}"
                );
                decoded += 1;
            }
            accepted += 1;
        }
    }
    Ok(format!(
        "{decoded} memberships decoded from 10000 rich sets"
    ))
}

/// Least value tuple `≥ k` witnessed by some split of `range`, by
/// enumerating every split and every increasing tuple of values below 12.
fn brute_witness(p: &TreeParams, range: &[usize]) -> Option<Vec<usize>> {
    let arity = p.arity.len();
    let mut best: Option<Vec<usize>> = None;
    for left in subsets(range) {
        for right in subsets(range) {
            let mut oracle = p.segment.clone();
            oracle.extend(left.iter().map(|x| 2 * x));
            oracle.extend(right.iter().map(|x| 2 * x + 1));
            let ones: Vec<Vec<usize>> = (0..arity)
                .map(|pos| {
                    (p.k..12)
                        .filter(|&v| {
                            p.gamma.evaluate(&oracle, p.variant.query(pos, v)).unwrap() == Some(1)
                        })
                        .collect()
                })
                .collect();
            let mut tuples: Vec<Vec<usize>> = vec![vec![]];
            for vals in &ones {
                let mut next = Vec::new();
                for t in &tuples {
                    for &v in vals.iter().filter(|&&v| t.last().is_none_or(|&l| v > l)) {
                        let mut t = t.clone();
                        t.push(v);
                        next.push(t);
                    }
                }
                tuples = next;
            }
            if let Some(t) = tuples.into_iter().min() {
                if best.as_ref().is_none_or(|b| &t < b) {
                    best = Some(t);
                }
            }
        }
    }
    best
}

fn increasing_strings(res: &[usize], cap: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..cap {
        let mut next = Vec::new();
        for s in &frontier {
            for &x in res.iter().filter(|&&x| s.last().is_none_or(|&l| x > l)) {
                let mut t: Vec<usize> = s.clone();
                t.push(x);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

struct TreeCase {
    params: TreeParams,
    tree: LabeledTree,
}

/// With `terminating`, every axiom outputs 1 on a query of some label
/// position and reads at most one code, so most trees are well founded.
fn random_tree_params(
    rng: &mut ChaCha8Rng,
    arity: Arity,
    variant: Variant,
    terminating: bool,
) -> TreeParams {
    loop {
        let size = rng.gen_range(1..=6);
        let lo = rng.gen_range(0..=3);
        let reservoir: Vec<usize> = (lo..lo + size + 2)
            .filter(|_| rng.gen_bool(0.8))
            .take(size)
            .collect();
        if reservoir.is_empty() {
            continue;
        }
        let segment: BTreeSet<usize> = (0..2 * lo).filter(|_| rng.gen_bool(0.3)).collect();
        // Codes of reservoir elements mostly, so that many trees terminate.
        let code = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.8) {
                2 * reservoir[rng.gen_range(0..reservoir.len())] + rng.gen_range(0..2)
            } else {
                rng.gen_range(0..2 * reservoir.last().unwrap() + 2)
            }
        };
        let count = if terminating { 4 } else { rng.gen_range(0..=4) };
        let axioms: Vec<Axiom> = (0..count)
            .map(|_| {
                if terminating {
                    let n = variant.query(rng.gen_range(0..arity.len()), rng.gen_range(0..6));
                    let pos: Vec<usize> = (0..rng.gen_range(0..=1)).map(|_| code(rng)).collect();
                    return Axiom::new(n, &pos, &[], 1);
                }
                let pos: Vec<usize> = (0..rng.gen_range(0..=2)).map(|_| code(rng)).collect();
                let neg: Vec<usize> = (0..rng.gen_range(0..=1))
                    .map(|_| code(rng))
                    .filter(|c| !pos.contains(c))
                    .collect();
                Axiom::new(
                    rng.gen_range(0..12),
                    &pos,
                    &neg,
                    u8::from(rng.gen_bool(0.85)),
                )
            })
            .collect();
        let Ok(gamma) = OracleFunctional::new(axioms, false) else {
            continue;
        };
        return TreeParams {
            k: rng.gen_range(0..=2),
            gamma,
            segment,
            reservoir,
            arity,
            variant,
            depth_cap: rng.gen_range(1..=4),
        };
    }
}

fn label_ok(label: &[Entry], arity: usize, k: usize) -> bool {
    let finite: Vec<usize> = label.iter().map_while(|e| e.finite()).collect();
    label.len() == arity
        && label[finite.len()..].iter().all(|e| *e == Entry::Inf)
        && finite.windows(2).all(|w| w[0] < w[1])
        && finite.iter().all(|&v| v >= k)
}

const THETAS: [Theta; 3] = [Theta::Majority, Theta::Count(1), Theta::Count(2)];

fn tree_corpus() -> Vec<TreeCase> {
    let mut out = Vec::new();
    for (a, arity) in [Arity::Two, Arity::Three].into_iter().enumerate() {
        for (v, variant) in [Variant::Plain, Variant::Shifted].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(7 + 10 * a as u64 + v as u64);
            for i in 0..400 {
                let params = random_tree_params(&mut rng, arity, variant, i % 2 == 1);
                let tree = build_tree(&params).expect("consistent functional");
                out.push(TreeCase { params, tree });
            }
        }
    }
    out
}

fn tree_oracle(corpus: &[TreeCase]) -> Verdict {
    let (mut nodes, mut labeled) = (0usize, 0usize);
    for (c, case) in corpus.iter().enumerate() {
        let p = &case.params;
        let t = &case.tree;
        let mut memo: BTreeMap<Vec<usize>, Option<Vec<usize>>> = BTreeMap::new();
        let mut witness = |s: &[usize]| {
            memo.entry(s.to_vec())
                .or_insert_with(|| brute_witness(p, s))
                .clone()
        };
        let expected: BTreeSet<Vec<usize>> = increasing_strings(&p.reservoir, p.depth_cap)
            .into_iter()
            .filter(|s| s.is_empty() || witness(&s[..s.len() - 1]).is_none())
            .collect();
        let got: BTreeSet<Vec<usize>> = t.nodes.iter().map(|n| n.string.clone()).collect();
        ensure!(
            got == expected,
            "case {c}: tree {got:?} but brute force gives {expected:?}"
        );
        for node in &t.nodes {
            let w = witness(&node.string);
            ensure!(
                (node.kind == NodeKind::WitnessTerminal) == w.is_some(),
                "case {c}: node {:?} is {} but brute witness is {w:?}",
                node.string,
                node.kind
            );
            if let (Some(values), Some(tw)) = (&w, &node.witness) {
                ensure!(
                    &tw.values == values,
                    "case {c}: node {:?} values {:?}, brute {values:?}",
                    node.string,
                    tw.values
                );
                let mut oracle = p.segment.clone();
                oracle.extend(tw.joined().0);
                let all_one = values.iter().enumerate().all(|(pos, &v)| {
                    p.gamma.evaluate(&oracle, p.variant.query(pos, v)).unwrap() == Some(1)
                });
                ensure!(
                    all_one,
                    "case {c}: witness of {:?} does not converge to 1",
                    node.string
                );
            }
            nodes += 1;
        }
        if t.exhausted_leaves().next().is_some() {
            continue;
        }
        for theta in THETAS {
            let l = label_tree(t, theta).map_err(|e| format!("case {c}: {e}"))?;
            for node in &l.nodes {
                let label = node
                    .label
                    .as_ref()
                    .ok_or(format!("case {c}: node {:?} unlabeled", node.string))?;
                ensure!(
                    label_ok(&label.0, p.arity.len(), p.k),
                    "case {c}: label {label} of {:?} breaks an invariant",
                    node.string
                );
                if let Some(values) = witness(&node.string) {
                    ensure!(
                        label.0 == values.iter().map(|&v| Entry::Fin(v)).collect::<Vec<_>>(),
                        "case {c}: terminal {:?} labeled {label}, least tuple {values:?}",
                        node.string
                    );
                }
            }
            labeled += 1;
        }
    }
    ensure!(labeled > 0, "no labelable tree in the corpus");
    Ok(format!(
        "{} trees, {nodes} nodes, {labeled} labelings",
        corpus.len()
    ))
}

fn subtree_properties(corpus: &[TreeCase]) -> Verdict {
    let (mut subtrees, mut transitions) = (0usize, 0usize);
    for (c, case) in corpus.iter().enumerate() {
        if case.tree.exhausted_leaves().next().is_some() {
            continue;
        }
        for theta in THETAS {
            let t = label_tree(&case.tree, theta).map_err(|e| e.to_string())?;
            let tl = labeled_subtree(&t, theta).map_err(|e| e.to_string())?;
            for (id, node) in tl.nodes.iter().enumerate() {
                let orig = t.get(&node.string).map_err(|e| format!("case {c}: {e}"))?;
                ensure!(
                    orig.label == node.label,
                    "case {c}: label of {:?} changed in the subtree",
                    node.string
                );
                if orig.kind == NodeKind::WitnessTerminal {
                    ensure!(
                        node.kind == NodeKind::WitnessTerminal && tl.children(id).is_empty(),
                        "case {c}: terminal {:?} is not terminal in the subtree",
                        node.string
                    );
                }
            }
            let revised = transition_nodes(&tl, true);
            let plain = transition_nodes(&tl, false);
            ensure!(
                revised.is_subset(&plain),
                "case {c}: revised transitions {revised:?} not within {plain:?}"
            );
            transitions += revised.len();
            subtrees += 1;
        }
    }
    Ok(format!(
        "{subtrees} labeled subtrees, {transitions} revised transition nodes"
    ))
}

fn random_condition(rng: &mut ChaCha8Rng, n: usize) -> Condition {
    match n {
        0 => Condition::empty(),
        1 => Condition::from_parts(
            1,
            |_, _| 0,
            vec![Some(Limit {
                color: rng.gen_range(0..2),
                point: 0,
            })],
        ),
        _ => {
            let f = random_stable_coloring(rng.gen(), n, rng.gen_range(0..n))
                .expect("stab bound below horizon");
            Condition::from_parts(
                n,
                |x, y| f.color(x, y),
                (0..n).map(|x| f.annotation(x)).collect(),
            )
        }
    }
}

/// Conditions related by restriction, prolongation and forgetting limits.
fn condition_family(rng: &mut ChaCha8Rng) -> Vec<Condition> {
    let n = rng.gen_range(0..=12);
    let base = random_condition(rng, n);
    let mut out = vec![base.clone()];
    for _ in 0..5 {
        let from = out[rng.gen_range(0..out.len())].clone();
        let next = match rng.gen_range(0..3) {
            0 => from.restrict(rng.gen_range(0..=from.len())),
            1 => {
                let spec = Completion {
                    target: rng.gen_range(from.len()..=12),
                    default_color: rng.gen_range(0..2),
                    eager: rng.gen(),
                    ..Completion::default()
                };
                complete(&from, &spec).expect("an unconstrained completion exists")
            }
            _ => {
                let mut file = from.to_file();
                file.l.retain(|_| rng.gen_bool(0.7));
                Condition::from_file(&file, true)
                    .expect("dropping limits keeps a partial condition")
            }
        };
        out.push(next);
    }
    out
}

/// Whether some valid prolongation of `q` to `target` presses `t`. A row
/// without a limit may take point `target`, which any `σ` satisfies, so
/// only its color is enumerated.
fn brute_pressable(q: &Condition, t: &ButtonTriple, target: usize) -> bool {
    let n = q.len();
    let new: Vec<(usize, usize)> = (0..target)
        .flat_map(|y| (0..y).map(move |x| (x, y)))
        .filter(|&(_, y)| y >= n)
        .collect();
    let sigma = |bits: u64, x: usize, y: usize| -> u8 {
        match q.sigma(x, y) {
            Some(c) if y < n => c,
            _ => (bits >> new.iter().position(|&p| p == (x, y)).expect("new pair") & 1) as u8,
        }
    };
    for bits in 0u64..1 << new.len() {
        let rows_ok = (0..n).all(|x| {
            let l = q.limit(x).expect("full condition");
            (l.point..target)
                .filter(|&y| y != x)
                .all(|y| sigma(bits, x.min(y), x.max(y)) == l.color)
        });
        if !rows_ok {
            continue;
        }
        let colors = |e: usize| -> Vec<u8> { q.limit_color(e).map_or(vec![0, 1], |c| vec![c]) };
        let s = sigma(bits, t.a, t.b);
        if colors(t.a)
            .iter()
            .any(|&ca| colors(t.b).iter().any(|&cb| !(s == ca && ca == cb)))
        {
            return true;
        }
    }
    false
}

fn forcing_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut related, mut persisted, mut pressed, mut blocked) = (0usize, 0usize, 0usize, 0usize);
    let ext = |a: &Condition, b: &Condition| {
        extends(a, b).expect("family members are valid up to absent limits")
    };
    for round in 0..1000 {
        let fam = condition_family(&mut rng);
        let pick = |rng: &mut ChaCha8Rng| fam[rng.gen_range(0..fam.len())].clone();
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        ensure!(ext(&a, &a), "round {round}: extension is not reflexive");
        if ext(&a, &b) && ext(&b, &a) {
            ensure!(a == b, "round {round}: mutual extensions differ");
        }
        if ext(&a, &b) && ext(&b, &c) {
            ensure!(ext(&a, &c), "round {round}: extension is not transitive");
            related += 1;
        }
        for x in [&a, &b, &c] {
            if x.is_valid() {
                for m in 0..=x.len() {
                    let r = x.restrict(m);
                    ensure!(
                        r.is_valid() && ext(x, &r),
                        "round {round}: restriction to {m} is invalid"
                    );
                }
            }
        }
        if ext(&a, &b) {
            for hi in 1..b.len() {
                for lo in 0..hi {
                    let t = ButtonTriple::new(0, lo, hi).map_err(|e| e.to_string())?;
                    if press_check(&b, &t) {
                        ensure!(
                            press_check(&a, &t),
                            "round {round}: button ({lo}, {hi}) released by extension"
                        );
                        persisted += 1;
                    }
                }
            }
        }

        let n = rng.gen_range(0..=12);
        let q = random_condition(&mut rng, n);
        let hi = rng.gen_range(1..=11);
        let lo = rng.gen_range(0..hi);
        let t = ButtonTriple::new(0, lo, hi).map_err(|e| e.to_string())?;
        let target = rng.gen_range(q.len().max(hi + 1)..=12);
        match extend_pressing(&q, &t, target) {
            Ok(r) => {
                ensure!(
                    r.len() == target && r.is_valid() && ext(&r, &q) && press_check(&r, &t),
                    "round {round}: pressing ({lo}, {hi}) to {target} broke a postcondition"
                );
                pressed += 1;
            }
            Err(ForcingError::PressBlocked { .. }) | Err(ForcingError::Infeasible { .. }) => {
                if target <= 6 {
                    ensure!(
                        !brute_pressable(&q, &t, target),
                        "round {round}: ({lo}, {hi}) reported unpressable but a completion presses it"
                    );
                    blocked += 1;
                }
            }
            Err(e) => return Err(format!("round {round}: unexpected error {e}")),
        }
    }
    ensure!(blocked > 0, "no blocked press was confirmed by brute force");
    Ok(format!(
        "{related} related triples, {persisted} persisted presses, {pressed} presses, {blocked} blocked presses confirmed"
    ))
}

fn transcripts() -> Verdict {
    let corpus = common::corpus();
    ensure!(
        corpus.len() >= 10,
        "corpus has only {} schedules",
        corpus.len()
    );
    let mut cases: BTreeSet<String> = BTreeSet::new();
    let mut outcomes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut rebases = 0usize;
    for s in &corpus {
        let run = run_stages(&s.inputs, &s.schedule, Theta::Majority)
            .map_err(|e| format!("{}: {e}", s.name))?;
        let again =
            run_stages(&s.inputs, &s.schedule, Theta::Majority).map_err(|e| e.to_string())?;
        let jsonl = to_jsonl(&run.events);
        ensure!(
            jsonl == to_jsonl(&again.events),
            "{}: rerun differs",
            s.name
        );
        ensure!(
            from_jsonl(&jsonl).map_err(|e| e.to_string())? == run.events,
            "{}: transcript does not parse back",
            s.name
        );
        let v = verify(&s.inputs, &s.schedule, &run.events, Theta::Majority);
        ensure!(v.ok(), "{}: replay failed: {:?}", s.name, v.failures);

        let mut seen = Vec::new();
        let mut last = None;
        for e in &run.events {
            match e {
                Event::Move(m) => {
                    seen.push(m.case);
                    rebases += usize::from(m.rebase.is_some());
                    ensure!(
                        s.rebase || m.rebase.is_none(),
                        "{}: unexpected rebase",
                        s.name
                    );
                }
                Event::Stage(r) => {
                    if let Outcome::Diagonalized { pairs, .. } = &r.outcome {
                        for &[a, b] in pairs {
                            let vals = [
                                r.condition.sigma(a.min(b), a.max(b)),
                                r.condition.limit_color(a),
                                r.condition.limit_color(b),
                            ];
                            ensure!(
                                vals.iter().all(Option::is_some)
                                    && !(vals[0] == vals[1] && vals[1] == vals[2]),
                                "{}: pair ({a}, {b}) is not separated: {vals:?}",
                                s.name
                            );
                        }
                    }
                    last = Some(r.outcome.kind());
                }
            }
        }
        ensure!(
            last == Some(s.outcome),
            "{}: final outcome {last:?}, expected {}",
            s.name,
            s.outcome
        );
        for c in &s.cases {
            ensure!(
                seen.contains(c),
                "{}: case {c:?} not reached ({seen:?})",
                s.name
            );
        }
        ensure!(
            !s.rebase
                || run
                    .events
                    .iter()
                    .any(|e| matches!(e, Event::Move(m) if m.rebase.is_some())),
            "{}: no rebase",
            s.name
        );
        *outcomes.entry(s.outcome).or_default() += 1;
        cases.extend(seen.iter().map(|c| format!("{c:?}")));

        // Segments of an identity transformer are segments of the coloring itself.
        if s.name == "mixed-identity" {
            let f = assemble_coloring(&[run.state.condition.clone()]).map_err(|e| e.to_string())?;
            for j in 0..2u8 {
                let seg = run.state.segment("identity", j);
                let (l, r) = decode_join(&seg);
                ensure!(
                    l.len() >= 2 && r.len() >= 2,
                    "{}: segment {j} did not grow: {seg:?}",
                    s.name
                );
                let h = check_homogeneity(&f, &seg, Kind::PHomog).map_err(|e| e.to_string())?;
                ensure!(h.admits(j), "{}: segment {j} is {h:?}", s.name);
            }
        }
    }
    let required = [
        WalkCase::LimitSearch,
        WalkCase::PairDiagonalize,
        WalkCase::EarlyPair,
        WalkCase::LatePair,
        WalkCase::ColumnPair,
        WalkCase::ColumnDeferred,
        WalkCase::DeferredPair,
    ];
    for c in required {
        ensure!(
            cases.contains(&format!("{c:?}")),
            "no schedule reaches {c:?}"
        );
    }
    ensure!(
        outcomes.get("path-reservoir").copied().unwrap_or(0) >= 2,
        "path reservoirs not reached for both walks"
    );
    ensure!(
        outcomes.contains_key("reserved-set-added"),
        "no reserved set added"
    );
    ensure!(rebases > 0, "no rebase exercised");
    Ok(format!(
        "{} schedules, cases {}",
        corpus.len(),
        cases.into_iter().collect::<Vec<_>>().join(",")
    ))
}

fn main() {
    type Criterion = (
        &'static str,
        Option<u64>,
        Box<dyn FnOnce() -> Verdict + Send>,
    );
    let started = Instant::now();
    let trees = std::sync::Arc::new(tree_corpus());
    let build = started.elapsed();
    let (t1, t2) = (trees.clone(), trees.clone());
    let criteria: Vec<Criterion> = vec![
        (
            "homogeneity oracle equivalence",
            Some(60),
            Box::new(homogeneity_oracle),
        ),
        (
            "reduction soundness",
            Some(120),
            Box::new(reduction_soundness),
        ),
        ("coding round-trip", Some(180), Box::new(coding_round_trip)),
        (
            "tree-labeling oracle equivalence",
            Some(300),
            Box::new(move || tree_oracle(&t1)),
        ),
        (
            "labeled-subtree and transition properties",
            None,
            Box::new(move || subtree_properties(&t2)),
        ),
        ("forcing algebra", None, Box::new(forcing_algebra)),
        ("construction transcripts", Some(120), Box::new(transcripts)),
    ];
    let results: Vec<(&str, Option<u64>, Verdict, Duration)> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria
            .into_iter()
            .map(|(name, limit, run)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
                        .unwrap_or_else(|_| Err("panicked".into()));
                    (name, limit, verdict, t.elapsed())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("criterion thread"))
            .collect()
    });
    let mut failed = 0;
    for (name, limit, verdict, took) in results {
        let took = if name.starts_with("tree") {
            took + build
        } else {
            took
        };
        let secs = took.as_secs_f64();
        let verdict = match verdict {
            Ok(_) if limit.is_some_and(|l| secs > l as f64) => {
                Err(format!("took {secs:.1}s, limit {}s", limit.unwrap_or(0)))
            }
            v => v,
        };
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
