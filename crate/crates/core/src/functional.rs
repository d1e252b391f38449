//! Finite axiom lists standing in for Turing functionals on set oracles.
//!
//! An axiom `(n, pos, neg, out)` fires on an oracle `X` when `pos ⊆ X`
//! and `neg ∩ X = ∅`, and then yields `out` on input `n`. A consistent
//! list never lets two compatible axioms for one input disagree.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{pair_code, pair_decode, pairs_below, Coloring, ColoringError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FunctionalError {
    #[error("inconsistent axioms: {pairs:?}")]
    Inconsistent { pairs: Vec<(usize, usize)> },
    #[error("axiom {axiom} has a negative condition but the functional is declared monotone")]
    NotMonotone { axiom: usize },
    #[error("axiom {axiom} queries code {code} beyond its use bound")]
    UseBound { axiom: usize, code: usize },
    #[error("axiom {axiom} has output {out}; outputs are 0 or 1")]
    BadOutput { axiom: usize, out: u8 },
    #[error("unknown builtin transformer `{0}`")]
    UnknownBuiltin(String),
    #[error("malformed functional document: {0}")]
    Json(String),
    #[error(transparent)]
    Coloring(#[from] ColoringError),
}

/// Read access to a possibly partial oracle; `None` means undetermined.
pub trait Oracle {
    fn query(&self, code: usize) -> Option<bool>;
}

impl Oracle for BTreeSet<usize> {
    fn query(&self, code: usize) -> Option<bool> {
        Some(self.contains(&code))
    }
}

/// The oracle set `{code(x, y) : f(x, y) = 1}` of a total coloring.
pub struct ColoringOracle<'a>(pub &'a Coloring);

impl Oracle for ColoringOracle<'_> {
    fn query(&self, code: usize) -> Option<bool> {
        let (x, y) = pair_decode(code);
        (y < self.0.horizon()).then(|| self.0.color(x, y) == 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Axiom {
    pub n: usize,
    #[serde(default)]
    pub pos: BTreeSet<usize>,
    #[serde(default)]
    pub neg: BTreeSet<usize>,
    pub out: u8,
}

impl Axiom {
    pub fn new(n: usize, pos: &[usize], neg: &[usize], out: u8) -> Self {
        Axiom {
            n,
            pos: pos.iter().copied().collect(),
            neg: neg.iter().copied().collect(),
            out,
        }
    }

    /// `Some(true)` if the axiom fires on every completion of the oracle,
    /// `Some(false)` if on none, `None` otherwise.
    pub fn fires<O: Oracle + ?Sized>(&self, oracle: &O) -> Option<bool> {
        let mut open = false;
        for &c in &self.pos {
            match oracle.query(c) {
                Some(false) => return Some(false),
                None => open = true,
                Some(true) => {}
            }
        }
        for &c in &self.neg {
            match oracle.query(c) {
                Some(true) => return Some(false),
                None => open = true,
                Some(false) => {}
            }
        }
        if open {
            None
        } else {
            Some(true)
        }
    }

    fn compatible(&self, other: &Axiom) -> bool {
        self.pos.is_disjoint(&other.neg) && other.pos.is_disjoint(&self.neg)
    }

    pub fn queries(&self) -> impl Iterator<Item = usize> + '_ {
        self.pos.iter().chain(self.neg.iter()).copied()
    }
}

/// Every pair of axiom indices with a common input, compatible firing
/// conditions and different outputs.
pub fn check_consistency(axioms: &[Axiom]) -> Vec<(usize, usize)> {
    let mut by_input: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, a) in axioms.iter().enumerate() {
        by_input.entry(a.n).or_default().push(i);
    }
    let mut out = Vec::new();
    for ids in by_input.values() {
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                if axioms[i].out != axioms[j].out && axioms[i].compatible(&axioms[j]) {
                    out.push((i, j));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleFunctional {
    axioms: Vec<Axiom>,
    monotone: bool,
    by_input: BTreeMap<usize, Vec<usize>>,
}

impl OracleFunctional {
    pub fn new(axioms: Vec<Axiom>, monotone: bool) -> Result<Self, FunctionalError> {
        for (i, a) in axioms.iter().enumerate() {
            if a.out > 1 {
                return Err(FunctionalError::BadOutput {
                    axiom: i,
                    out: a.out,
                });
            }
            if monotone && !a.neg.is_empty() {
                return Err(FunctionalError::NotMonotone { axiom: i });
            }
        }
        let pairs = check_consistency(&axioms);
        if !pairs.is_empty() {
            return Err(FunctionalError::Inconsistent { pairs });
        }
        let mut by_input: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, a) in axioms.iter().enumerate() {
            by_input.entry(a.n).or_default().push(i);
        }
        Ok(OracleFunctional {
            axioms,
            monotone,
            by_input,
        })
    }

    pub fn empty() -> Self {
        OracleFunctional {
            axioms: Vec::new(),
            monotone: true,
            by_input: BTreeMap::new(),
        }
    }

    pub fn axioms(&self) -> &[Axiom] {
        &self.axioms
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn inputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_input.keys().copied()
    }

    /// Output on input `n` with oracle `x`; `None` is divergence.
    pub fn evaluate(&self, x: &BTreeSet<usize>, n: usize) -> Result<Option<u8>, FunctionalError> {
        let mut value: Option<(usize, u8)> = None;
        for &i in self.by_input.get(&n).into_iter().flatten() {
            if self.axioms[i].fires(x) == Some(true) {
                match value {
                    Some((j, v)) if v != self.axioms[i].out => {
                        return Err(FunctionalError::Inconsistent {
                            pairs: vec![(j, i)],
                        })
                    }
                    None => value = Some((i, self.axioms[i].out)),
                    _ => {}
                }
            }
        }
        Ok(value.map(|(_, v)| v))
    }

    /// Output fixed by the determined part of a partial oracle. By
    /// consistency, no completion can make another axiom disagree.
    pub fn evaluate_partial<O: Oracle + ?Sized>(&self, oracle: &O, n: usize) -> Option<u8> {
        self.by_input
            .get(&n)?
            .iter()
            .find(|&&i| self.axioms[i].fires(oracle) == Some(true))
            .map(|&i| self.axioms[i].out)
    }

    /// All inputs on which the functional converges to `value` with oracle `x`.
    pub fn converging_to(&self, x: &BTreeSet<usize>, value: u8) -> BTreeSet<usize> {
        self.axioms
            .iter()
            .filter(|a| a.out == value && a.fires(x) == Some(true))
            .map(|a| a.n)
            .collect()
    }

    /// Largest oracle element queried by an axiom for `n` that fires on `x`.
    pub fn use_of(&self, x: &BTreeSet<usize>, n: usize) -> Option<usize> {
        self.by_input
            .get(&n)?
            .iter()
            .filter(|&&i| self.axioms[i].fires(x) == Some(true))
            .map(|&i| self.axioms[i].queries().max().unwrap_or(0))
            .max()
    }

    pub fn to_file(&self) -> FunctionalFile {
        FunctionalFile {
            axioms: self.axioms.clone(),
            monotone: self.monotone,
            use_bound: None,
            builtin: None,
        }
    }

    pub fn from_file(file: &FunctionalFile) -> Result<Self, FunctionalError> {
        Self::new(file.axioms.clone(), file.monotone)
    }

    pub fn from_json_str(s: &str) -> Result<Self, FunctionalError> {
        let file: FunctionalFile =
            serde_json::from_str(s).map_err(|e| FunctionalError::Json(e.to_string()))?;
        Self::from_file(&file)
    }
}

/// On-disk form: `{"axioms": [{"n", "pos", "neg", "out"}], "monotone": bool}`,
/// plus `"use_bound"` for transformers. A transformer may instead name a
/// builtin family (`identity`, `flip`, `constant0`, `constant1`,
/// `button`), materialized below a horizon chosen by the caller.
impl Serialize for OracleFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OracleFunctional {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = FunctionalFile::deserialize(d)?;
        OracleFunctional::from_file(&file).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalFile {
    #[serde(default)]
    pub axioms: Vec<Axiom>,
    #[serde(default)]
    pub monotone: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Builtin {
    Identity,
    Flip,
    Constant0,
    Constant1,
    /// Row `x` of a triple `(x, a, b)` converges to `color` exactly when
    /// `f(a, b)` and the limit colors of `a` and `b` are not all equal.
    Button {
        triples: Vec<[usize; 3]>,
        color: u8,
    },
}

/// A functional read on coloring oracles: its input `pair_code(x, y)`
/// is the value at `{x, y}`, and it may only query pairs below
/// `(max(x, y) + 1) * use_bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoringTransformer {
    functional: OracleFunctional,
    use_bound: usize,
}

/// Result of applying a transformer to a total coloring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Applied {
    /// `Φ^f` on the largest horizon where every pair is decided.
    pub coloring: Coloring,
    /// The first pair, in code order, left undecided.
    pub first_undecided: Option<(usize, usize)>,
}

impl ColoringTransformer {
    pub fn new(functional: OracleFunctional, use_bound: usize) -> Result<Self, FunctionalError> {
        for (i, a) in functional.axioms().iter().enumerate() {
            let (x, y) = pair_decode(a.n);
            let limit = pairs_below((x.max(y) + 1) * use_bound);
            if let Some(code) = a.queries().find(|&c| c >= limit) {
                return Err(FunctionalError::UseBound { axiom: i, code });
            }
        }
        Ok(ColoringTransformer {
            functional,
            use_bound,
        })
    }

    pub fn functional(&self) -> &OracleFunctional {
        &self.functional
    }

    pub fn use_bound(&self) -> usize {
        self.use_bound
    }

    /// Elements `m` such that every query for a pair below `m` lies
    /// below `horizon`: the pair `{x, y}` needs `(max + 1) * B <= horizon`.
    pub fn decidable_below(&self, horizon: usize) -> usize {
        if self.use_bound == 0 {
            horizon
        } else {
            (horizon / self.use_bound).min(horizon)
        }
    }

    pub fn value_at<O: Oracle + ?Sized>(&self, oracle: &O, x: usize, y: usize) -> Option<u8> {
        self.functional.evaluate_partial(oracle, pair_code(x, y))
    }

    pub fn apply(&self, f: &Coloring) -> Applied {
        let oracle = ColoringOracle(f);
        let top = self.decidable_below(f.horizon());
        let mut first_undecided = None;
        let mut values = Vec::new();
        'outer: for y in 1..f.horizon() {
            for x in 0..y {
                let v = if y < top {
                    self.value_at(&oracle, x, y)
                } else {
                    None
                };
                match v {
                    Some(v) => values.push(v),
                    None => {
                        first_undecided = Some((x, y));
                        break 'outer;
                    }
                }
            }
        }
        let reach = first_undecided.map_or(f.horizon(), |(_, y)| y);
        let coloring = Coloring::from_fn(reach, |x, y| values[pair_code(x, y)]);
        Applied {
            coloring,
            first_undecided,
        }
    }

    pub fn identity(horizon: usize) -> Self {
        Self::copy(horizon, false)
    }

    pub fn flip(horizon: usize) -> Self {
        Self::copy(horizon, true)
    }

    fn copy(horizon: usize, flip: bool) -> Self {
        let mut axioms = Vec::with_capacity(2 * pairs_below(horizon));
        for code in 0..pairs_below(horizon) {
            axioms.push(Axiom::new(code, &[code], &[], u8::from(!flip)));
            axioms.push(Axiom::new(code, &[], &[code], u8::from(flip)));
        }
        Self::new(
            OracleFunctional::new(axioms, false).expect("copy axioms are consistent"),
            1,
        )
        .expect("copy axioms respect the use bound")
    }

    pub fn constant(horizon: usize, c: u8) -> Self {
        let axioms = (0..pairs_below(horizon))
            .map(|code| Axiom::new(code, &[], &[], c))
            .collect();
        Self::new(
            OracleFunctional::new(axioms, true).expect("constant axioms are consistent"),
            1,
        )
        .expect("constant axioms query nothing")
    }

    pub fn button(horizon: usize, triples: &[[usize; 3]], color: u8) -> Self {
        let buttons: BTreeMap<usize, (usize, usize)> =
            triples.iter().map(|&[x, a, b]| (x, (a, b))).collect();
        let mut axioms = Vec::new();
        for y in 1..horizon {
            for x in 0..y {
                let n = pair_code(x, y);
                match buttons.get(&x) {
                    Some(&(a, b)) if a < b && b < y => {
                        let codes = [pair_code(a, b), pair_code(a, y), pair_code(b, y)];
                        for mask in 0u8..8 {
                            let (mut pos, mut neg) = (Vec::new(), Vec::new());
                            for (k, &c) in codes.iter().enumerate() {
                                if mask >> k & 1 == 1 {
                                    pos.push(c);
                                } else {
                                    neg.push(c);
                                }
                            }
                            let pressed = mask != 0 && mask != 7;
                            let out = if pressed { color } else { 1 - color };
                            axioms.push(Axiom::new(n, &pos, &neg, out));
                        }
                    }
                    _ => axioms.push(Axiom::new(n, &[], &[], 1 - color)),
                }
            }
        }
        Self::new(
            OracleFunctional::new(axioms, false).expect("button axioms are consistent"),
            1,
        )
        .expect("button axioms query pairs below the larger element")
    }

    pub fn to_file(&self) -> FunctionalFile {
        FunctionalFile {
            use_bound: Some(self.use_bound),
            ..self.functional.to_file()
        }
    }

    /// Loads a transformer; builtins are materialized below `horizon`.
    pub fn from_file(file: &FunctionalFile, horizon: usize) -> Result<Self, FunctionalError> {
        match &file.builtin {
            Some(Builtin::Identity) => Ok(Self::identity(horizon)),
            Some(Builtin::Flip) => Ok(Self::flip(horizon)),
            Some(Builtin::Constant0) => Ok(Self::constant(horizon, 0)),
            Some(Builtin::Constant1) => Ok(Self::constant(horizon, 1)),
            Some(Builtin::Button { triples, color }) => {
                Ok(Self::button(horizon, triples, *color & 1))
            }
            None => Self::new(
                OracleFunctional::from_file(file)?,
                file.use_bound.unwrap_or(1),
            ),
        }
    }

    pub fn from_json_str(s: &str, horizon: usize) -> Result<Self, FunctionalError> {
        let file: FunctionalFile =
            serde_json::from_str(s).map_err(|e| FunctionalError::Json(e.to_string()))?;
        Self::from_file(&file, horizon)
    }
}
