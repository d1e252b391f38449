//! Regression corpus of schedules shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ramseylab::functional::{Axiom, Builtin, FunctionalFile, OracleFunctional};
use ramseylab::runner::{Inputs, Mode, Step, WalkCase};
use ramseylab::tree::Variant;

pub struct Scenario {
    pub name: &'static str,
    pub inputs: Inputs,
    pub schedule: Vec<Step>,
    /// Outcome kind of the last stage.
    pub outcome: &'static str,
    /// Walk cases the run must contain.
    pub cases: Vec<WalkCase>,
    pub rebase: bool,
}

fn ax(n: usize, pos: &[usize], neg: &[usize]) -> Axiom {
    Axiom::new(n, pos, neg, 1)
}

fn inputs(horizon: usize, reservoir: Vec<usize>) -> Inputs {
    Inputs {
        horizon,
        reservoir,
        transformers: BTreeMap::new(),
        functionals: BTreeMap::new(),
        slack: None,
        initial: None,
    }
}

fn with_gamma(mut inp: Inputs, id: &str, g: OracleFunctional) -> Inputs {
    inp.functionals.insert(id.to_string(), g.to_file());
    inp
}

/// Reservoir `1, 4, 7, ...` so that each button `[x, x+1, x+2]` sits
/// between consecutive reservoir elements.
pub fn interleaved(n: usize) -> Vec<usize> {
    (0..n).map(|i| 1 + 3 * i).collect()
}

fn button_walk(mut inp: Inputs, mode: Mode) -> (Inputs, Step) {
    let triples: Vec<[usize; 3]> = inp.reservoir.iter().map(|&x| [x, x + 1, x + 2]).collect();
    let file = FunctionalFile {
        builtin: Some(Builtin::Button {
            triples: triples.clone(),
            color: 1,
        }),
        ..Default::default()
    };
    inp.transformers.insert("b".into(), file);
    let step = Step::ButtonWalk {
        phi: "b".into(),
        delta: "g".into(),
        mode,
        triples,
        i: 1,
        theta: None,
        depth_cap: Some(4),
    };
    (inp, step)
}

fn limit_walk(phi: &str, mode: Mode, depth_cap: usize) -> Step {
    Step::LimitWalk {
        phi: phi.into(),
        gamma: "g".into(),
        mode,
        theta: None,
        depth_cap: Some(depth_cap),
    }
}

/// Every element alone terminates with its own increasing values starting
/// at `base`, so every successor of the root is finite.
pub fn singleton_gamma(res: &[usize], arity: usize, base: usize, v: Variant) -> OracleFunctional {
    let mut axioms = Vec::new();
    for (i, &u) in res.iter().enumerate() {
        for k in 0..arity {
            axioms.push(ax(v.query(k, base + arity * i + k), &[2 * u], &[]));
        }
    }
    OracleFunctional::new(axioms, false).unwrap()
}

/// Every element alone terminates with the same `values`, so the root
/// label is finite.
pub fn uniform_gamma(res: &[usize], values: &[usize], v: Variant) -> OracleFunctional {
    let mut axioms = Vec::new();
    for &u in res {
        for (k, &value) in values.iter().enumerate() {
            axioms.push(ax(v.query(k, value), &[2 * u], &[]));
        }
    }
    OracleFunctional::new(axioms, false).unwrap()
}

/// First entry `0` always; the other two are per-element values, so the
/// root reads `⟨0,∞,∞⟩` above all-finite successors.
pub fn late_gamma(res: &[usize], base: usize, v: Variant) -> OracleFunctional {
    let mut axioms = vec![ax(v.query(0, 0), &[], &[])];
    for (i, &u) in res.iter().enumerate() {
        axioms.push(ax(v.query(1, base + 2 * i), &[2 * u], &[]));
        axioms.push(ax(v.query(2, base + 2 * i + 1), &[2 * u], &[]));
    }
    OracleFunctional::new(axioms, false).unwrap()
}

/// First entry `0` always, second from the least left-only element, third
/// from the least right-only element. The top element stops alone.
pub fn column_gamma(res: &[usize], base: [usize; 2], v: Variant) -> OracleFunctional {
    let mut axioms = vec![ax(v.query(0, 0), &[], &[])];
    let n = res.len();
    for (i, &u) in res[..n - 1].iter().enumerate() {
        let mut neg: Vec<usize> = res[..i].iter().map(|t| 2 * t).collect();
        neg.push(2 * u + 1);
        axioms.push(ax(v.query(1, base[0] + i), &[2 * u], &neg));
        let mut neg: Vec<usize> = res[..i].iter().map(|t| 2 * t + 1).collect();
        neg.push(2 * u);
        axioms.push(ax(v.query(2, base[1] + i), &[2 * u + 1], &neg));
    }
    let top = res[n - 1];
    axioms.push(ax(v.query(1, base[1] + 6), &[2 * top], &[]));
    axioms.push(ax(v.query(2, base[1] + 7), &[2 * top], &[]));
    OracleFunctional::new(axioms, false).unwrap()
}

/// First entry from the least left-only element, second from the least
/// right-only element, third from a second element in the column of
/// `third_right`. The top element stops alone.
pub fn positional_gamma(
    res: &[usize],
    base: [usize; 3],
    third_right: bool,
    v: Variant,
) -> OracleFunctional {
    let mut axioms = Vec::new();
    let n = res.len();
    for (i, &u) in res[..n - 1].iter().enumerate() {
        let mut neg: Vec<usize> = res[..i].iter().map(|t| 2 * t).collect();
        neg.push(2 * u + 1);
        axioms.push(ax(v.query(0, base[0] + i), &[2 * u], &neg));
        let mut neg: Vec<usize> = res[..i].iter().map(|t| 2 * t + 1).collect();
        neg.push(2 * u);
        axioms.push(ax(v.query(1, base[1] + i), &[2 * u + 1], &neg));
        for &t in &res[..i] {
            let others = res[..i].iter().filter(|&&r| r != t);
            if third_right {
                let mut neg: Vec<usize> = others.map(|r| 2 * r + 1).collect();
                neg.push(2 * u);
                axioms.push(ax(v.query(2, base[2] + i), &[2 * t + 1, 2 * u + 1], &neg));
            } else {
                let neg: Vec<usize> = others.map(|r| 2 * r).collect();
                axioms.push(ax(v.query(2, base[2] + i), &[2 * t, 2 * u], &neg));
            }
        }
    }
    let top = res[n - 1];
    for k in 0..3 {
        axioms.push(ax(v.query(k, base[2] + 6 + k), &[2 * top], &[]));
    }
    OracleFunctional::new(axioms, false).unwrap()
}

/// The least right-only element fixes the first entry with values falling
/// along the reservoir; the least left-only element fixes the second. The
/// top element stops alone.
pub fn falling_gamma(res: &[usize], v: Variant) -> OracleFunctional {
    let mut axioms = Vec::new();
    let n = res.len();
    for (i, &u) in res[..n - 1].iter().enumerate() {
        let mut neg: Vec<usize> = res[..i].iter().map(|t| 2 * t + 1).collect();
        neg.push(2 * u);
        axioms.push(ax(v.query(0, 10 - i), &[2 * u + 1], &neg));
        let mut neg: Vec<usize> = res[..i].iter().map(|t| 2 * t).collect();
        neg.push(2 * u + 1);
        axioms.push(ax(v.query(1, 12 + i), &[2 * u], &neg));
    }
    let top = res[n - 1];
    axioms.push(ax(v.query(0, 20), &[2 * top], &[]));
    axioms.push(ax(v.query(1, 21), &[2 * top], &[]));
    OracleFunctional::new(axioms, false).unwrap()
}

pub fn corpus() -> Vec<Scenario> {
    use WalkCase::*;
    let mut out = Vec::new();

    let spt = Mode::Spt;
    let sipt = Mode::Sipt;

    out.push(Scenario {
        name: "segments-identity",
        inputs: inputs(16, (2..10).collect()),
        schedule: vec![Step::Segments {
            phi: "identity".into(),
            mode: spt,
        }],
        outcome: "extended-segments",
        cases: vec![],
        rebase: false,
    });
    out.push(Scenario {
        name: "segments-flip-increasing",
        inputs: inputs(16, (2..10).collect()),
        schedule: vec![Step::Segments {
            phi: "flip".into(),
            mode: sipt,
        }],
        outcome: "extended-segments",
        cases: vec![],
        rebase: false,
    });
    out.push(Scenario {
        name: "segments-constant-reserves",
        inputs: inputs(16, (2..10).collect()),
        schedule: vec![Step::Segments {
            phi: "constant1".into(),
            mode: spt,
        }],
        outcome: "reserved-set-added",
        cases: vec![],
        rebase: false,
    });

    let res: Vec<usize> = (1..7).collect();
    out.push(Scenario {
        name: "limit-walk-constant-reserves",
        inputs: with_gamma(
            inputs(16, res.clone()),
            "g",
            singleton_gamma(&res, 2, 1, Variant::Plain),
        ),
        schedule: vec![limit_walk("constant1", spt, 3)],
        outcome: "reserved-set-added",
        cases: vec![],
        rebase: false,
    });
    out.push(Scenario {
        name: "limit-walk-path-reservoir",
        inputs: with_gamma(inputs(16, res.clone()), "g", OracleFunctional::empty()),
        schedule: vec![limit_walk("identity", spt, 3)],
        outcome: "path-reservoir",
        cases: vec![],
        rebase: false,
    });
    out.push(Scenario {
        name: "limit-walk-singletons",
        inputs: with_gamma(
            inputs(24, res.clone()),
            "g",
            singleton_gamma(&res, 2, 1, Variant::Plain),
        ),
        schedule: vec![limit_walk("identity", spt, 3)],
        outcome: "diagonalized",
        cases: vec![PairDiagonalize],
        rebase: false,
    });
    out.push(Scenario {
        name: "limit-walk-falling",
        inputs: with_gamma(
            inputs(28, res.clone()),
            "g",
            falling_gamma(&res, Variant::Plain),
        ),
        schedule: vec![limit_walk("identity", spt, 3)],
        outcome: "diagonalized",
        cases: vec![LimitSearch, PairDiagonalize],
        rebase: false,
    });
    out.push(Scenario {
        name: "limit-walk-falling-increasing",
        inputs: with_gamma(
            inputs(28, res.clone()),
            "g",
            falling_gamma(&res, Variant::Shifted),
        ),
        schedule: vec![limit_walk("identity", sipt, 3)],
        outcome: "diagonalized",
        cases: vec![LimitSearch, PairDiagonalize],
        rebase: false,
    });

    let res = interleaved(5);
    let (inp, step) = button_walk(inputs(40, res.clone()), spt);
    out.push(Scenario {
        name: "button-walk-path-reservoir",
        inputs: with_gamma(inp, "g", OracleFunctional::empty()),
        schedule: vec![step],
        outcome: "path-reservoir",
        cases: vec![],
        rebase: false,
    });
    let (inp, step) = button_walk(inputs(40, res.clone()), spt);
    out.push(Scenario {
        name: "button-walk-early-pair",
        inputs: with_gamma(inp, "g", singleton_gamma(&res, 3, 20, Variant::Plain)),
        schedule: vec![step],
        outcome: "diagonalized",
        cases: vec![EarlyPair],
        rebase: false,
    });
    let (inp, step) = button_walk(inputs(40, res.clone()), spt);
    out.push(Scenario {
        name: "button-walk-late-pair",
        inputs: with_gamma(inp, "g", late_gamma(&res, 20, Variant::Plain)),
        schedule: vec![step],
        outcome: "diagonalized",
        cases: vec![LatePair],
        rebase: false,
    });
    // Buttons past the first sit above the separated pair.
    let spaced = vec![1, 19, 22, 25, 28];
    let (inp, step) = button_walk(inputs(40, spaced.clone()), spt);
    out.push(Scenario {
        name: "button-walk-column-pair",
        inputs: with_gamma(inp, "g", column_gamma(&spaced, [4, 30], Variant::Plain)),
        schedule: vec![step],
        outcome: "diagonalized",
        cases: vec![ColumnPair, Press],
        rebase: false,
    });
    let (inp, step) = button_walk(inputs(40, res.clone()), spt);
    out.push(Scenario {
        name: "button-walk-deferred",
        inputs: with_gamma(
            inp,
            "g",
            positional_gamma(&res, [0, 4, 28], false, Variant::Plain),
        ),
        schedule: vec![step],
        outcome: "diagonalized",
        cases: vec![Press, ColumnDeferred, DeferredPair],
        rebase: true,
    });
    let (inp, step) = button_walk(inputs(40, res.clone()), sipt);
    out.push(Scenario {
        name: "button-walk-deferred-increasing",
        inputs: with_gamma(
            inp,
            "g",
            positional_gamma(&res, [0, 4, 28], true, Variant::Shifted),
        ),
        schedule: vec![step],
        outcome: "diagonalized",
        cases: vec![Press, ColumnDeferred, DeferredPair],
        rebase: true,
    });

    let res: Vec<usize> = (1..30).collect();
    out.push(Scenario {
        name: "mixed-identity",
        inputs: with_gamma(
            inputs(40, res.clone()),
            "g",
            uniform_gamma(&res, &[12, 13], Variant::Plain),
        ),
        schedule: vec![
            Step::Segments {
                phi: "identity".into(),
                mode: spt,
            },
            Step::Generic,
            limit_walk("identity", spt, 3),
            Step::Segments {
                phi: "identity".into(),
                mode: spt,
            },
        ],
        outcome: "extended-segments",
        cases: vec![RootPair],
        rebase: false,
    });
    out
}
