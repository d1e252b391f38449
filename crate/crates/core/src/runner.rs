//! Desk-scale stage constructions.
//!
//! A stage extends both segments of a transformer by one left and one
//! right element, reserves a tail of the reservoir, or walks a labeled tree
//! toward a witness-terminal node while extending the condition. Every move
//! is logged with enough data to re-check it from the inputs alone.
//!
//! A condition `q` forces `lim_u Φ^f(x, u) = j` when every `u` from
//! `max(|q|, x + 1)` below the transformer's decidable bound has
//! `Φ^f(x, u) = j` determined by `q`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{decode_join, JoinedSet, Limit};
use crate::forcing::{
    complete, extends_unchecked, press_check, ButtonTriple, Completion, Condition, ForcingError,
};
use crate::functional::{ColoringTransformer, FunctionalError, FunctionalFile, OracleFunctional};
use crate::tree::{
    build_tree, compute_sort, configuration, is_transition, label_tree, labeled_subtree, prune,
    share_column, Arity, Configuration, Label, LabeledTree, NodeKind, Theta, TreeParams, Variant,
    ROOT,
};

pub const DEFAULT_SLACK: usize = 2;
pub const DEFAULT_DEPTH_CAP: usize = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("unknown transformer `{0}`")]
    UnknownTransformer(String),
    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),
    #[error("reservoir must be strictly increasing")]
    UnsortedReservoir,
    #[error("initial condition is invalid")]
    InvalidInitial,
    #[error("malformed document: {0}")]
    Json(String),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// Which p-homogeneity a stage builds toward. Increasing mode only
/// constrains cross pairs whose left element is smaller, and walks
/// parity-shifted trees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    #[serde(rename = "SPT", alias = "plain")]
    Spt,
    #[serde(rename = "SIPT", alias = "shifted")]
    Sipt,
}

impl Mode {
    pub fn variant(self) -> Variant {
        match self {
            Mode::Spt => Variant::Plain,
            Mode::Sipt => Variant::Shifted,
        }
    }

    pub fn increasing(self) -> bool {
        self == Mode::Sipt
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step")]
pub enum Step {
    #[serde(rename = "q")]
    Segments {
        phi: String,
        #[serde(default)]
        mode: Mode,
    },
    #[serde(rename = "rA")]
    LimitWalk {
        phi: String,
        gamma: String,
        #[serde(default)]
        mode: Mode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Theta>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth_cap: Option<usize>,
    },
    #[serde(rename = "rB")]
    ButtonWalk {
        phi: String,
        delta: String,
        #[serde(default)]
        mode: Mode,
        #[serde(rename = "Q")]
        triples: Vec<[usize; 3]>,
        i: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Theta>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth_cap: Option<usize>,
    },
    #[serde(rename = "p")]
    Generic,
}

/// Horizon, starting reservoir and the named transformers and functionals
/// a schedule refers to. Transformer ids `identity`, `flip`, `constant0`
/// and `constant1` resolve to builtins when not listed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inputs {
    pub horizon: usize,
    pub reservoir: Vec<usize>,
    #[serde(default)]
    pub transformers: BTreeMap<String, FunctionalFile>,
    #[serde(default)]
    pub functionals: BTreeMap<String, FunctionalFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Condition>,
}

/// Inputs with every id a schedule mentions materialized.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub horizon: usize,
    pub slack: usize,
    pub transformers: BTreeMap<String, ColoringTransformer>,
    pub functionals: BTreeMap<String, OracleFunctional>,
}

impl Inputs {
    pub fn from_json_str(s: &str) -> Result<Self, RunError> {
        serde_json::from_str(s).map_err(|e| RunError::Json(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<StageState, RunError> {
        if self.reservoir.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RunError::UnsortedReservoir);
        }
        let condition = self.initial.clone().unwrap_or_else(Condition::empty);
        if !condition.is_valid() {
            return Err(RunError::InvalidInitial);
        }
        Ok(StageState {
            condition,
            segments: BTreeMap::new(),
            reservoir: self.reservoir.clone(),
            family: Vec::new(),
            horizon: self.horizon,
        })
    }

    fn transformer(&self, id: &str) -> Result<ColoringTransformer, RunError> {
        let h = self.horizon;
        if let Some(file) = self.transformers.get(id) {
            return Ok(ColoringTransformer::from_file(file, h)?);
        }
        match id {
            "identity" => Ok(ColoringTransformer::identity(h)),
            "flip" => Ok(ColoringTransformer::flip(h)),
            "constant0" => Ok(ColoringTransformer::constant(h, 0)),
            "constant1" => Ok(ColoringTransformer::constant(h, 1)),
            _ => Err(RunError::UnknownTransformer(id.to_string())),
        }
    }

    pub fn resolve(&self, schedule: &[Step]) -> Result<Resolved, RunError> {
        let mut out = Resolved {
            horizon: self.horizon,
            slack: self.slack.unwrap_or(DEFAULT_SLACK),
            transformers: BTreeMap::new(),
            functionals: BTreeMap::new(),
        };
        for step in schedule {
            let (phi, other) = match step {
                Step::Segments { phi, .. } => (phi, None),
                Step::LimitWalk { phi, gamma, .. } => (phi, Some(gamma)),
                Step::ButtonWalk { phi, delta, .. } => (phi, Some(delta)),
                Step::Generic => continue,
            };
            if !out.transformers.contains_key(phi) {
                out.transformers.insert(phi.clone(), self.transformer(phi)?);
            }
            if let Some(g) = other {
                if !out.functionals.contains_key(g) {
                    let file = self
                        .functionals
                        .get(g)
                        .ok_or_else(|| RunError::UnknownFunctional(g.clone()))?;
                    out.functionals
                        .insert(g.clone(), OracleFunctional::from_file(file)?);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageState {
    pub condition: Condition,
    /// Joined segments per transformer id, indexed by color.
    pub segments: BTreeMap<String, [BTreeSet<usize>; 2]>,
    pub reservoir: Vec<usize>,
    pub family: Vec<Vec<usize>>,
    pub horizon: usize,
}

impl StageState {
    pub fn segment(&self, phi: &str, j: u8) -> BTreeSet<usize> {
        self.segments
            .get(phi)
            .map(|s| s[j as usize].clone())
            .unwrap_or_default()
    }

    fn set_segment(&mut self, phi: &str, j: u8, seg: BTreeSet<usize>) {
        self.segments.entry(phi.to_string()).or_default()[j as usize] = seg;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    /// `tuple` is `[x00, x01, x10, x11]`: segment `j` gained `2·xj0` and
    /// `2·xj1 + 1`.
    ExtendedSegments {
        phi: String,
        tuple: [usize; 4],
    },
    /// No canonical extension forces limit `color` at any element of `set`.
    ReservedSetAdded {
        set: Vec<usize>,
        color: u8,
    },
    PathReservoir {
        path: Vec<usize>,
    },
    Diagonalized {
        phi: String,
        segment: u8,
        node: Vec<usize>,
        left: Vec<usize>,
        right: Vec<usize>,
        values: Vec<usize>,
        pairs: Vec<[usize; 2]>,
        use_code: usize,
    },
    NoOp,
    Blocked {
        reason: String,
    },
}

impl Outcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Outcome::ExtendedSegments { .. } => "extended-segments",
            Outcome::ReservedSetAdded { .. } => "reserved-set-added",
            Outcome::PathReservoir { .. } => "path-reservoir",
            Outcome::Diagonalized { .. } => "diagonalized",
            Outcome::NoOp => "no-op",
            Outcome::Blocked { .. } => "blocked",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub outcome: Outcome,
    pub rationale: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkCase {
    /// The root label already holds a finite pair.
    RootPair,
    /// Force the limit of one successor.
    LimitSearch,
    /// Force a limit and separate the successor's finite pair.
    PairDiagonalize,
    /// Press one successor's button.
    Press,
    /// Press and separate the first two label entries below an all-∞ node.
    EarlyPair,
    /// Press and separate the last two entries of an all-finite successor.
    LatePair,
    /// Press and separate the first two entries next to a column partner.
    ColumnPair,
    /// No successor shares a column; press and wait for the next transition.
    ColumnDeferred,
    /// Press and separate the last two entries after a deferral.
    DeferredPair,
}

/// A limit point moved upward with its color kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rebase {
    pub element: usize,
    pub old: Limit,
    pub new: Limit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub stage: usize,
    pub case: WalkCase,
    /// Node reached by the move.
    pub node: Vec<usize>,
    /// Limit color every element of the walk is forced to.
    pub color: u8,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub press: Option<ButtonTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rebase: Option<Rebase>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub step: Step,
    pub outcome: Outcome,
    pub rationale: String,
    /// Condition and reservoir after the stage.
    pub condition: Condition,
    pub reservoir: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Move(Move),
    Stage(StageRecord),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepResult {
    pub state: StageState,
    pub outcome: StepOutcome,
    pub moves: Vec<Move>,
}

fn result(state: StageState, outcome: Outcome, rationale: &str, moves: Vec<Move>) -> StepResult {
    StepResult {
        state,
        outcome: StepOutcome {
            outcome,
            rationale: rationale.to_string(),
        },
        moves,
    }
}

fn blocked(state: &StageState, reason: impl Into<String>, moves: Vec<Move>) -> StepResult {
    result(
        state.clone(),
        Outcome::Blocked {
            reason: reason.into(),
        },
        "the step could not be completed at this horizon",
        moves,
    )
}

pub fn forces_limit(
    phi: &ColoringTransformer,
    q: &Condition,
    x: usize,
    j: u8,
    horizon: usize,
) -> bool {
    let top = phi.decidable_below(horizon);
    let start = q.len().max(x + 1);
    start < top && (start..top).all(|u| phi.value_at(q, x, u) == Some(j))
}

/// Least `m > x` with `Φ^f(x, u) = j` determined for every `u` from `m`
/// below the decidable bound, when `q` forces that limit.
pub fn stabilization(
    phi: &ColoringTransformer,
    q: &Condition,
    x: usize,
    j: u8,
    horizon: usize,
) -> Option<usize> {
    if !forces_limit(phi, q, x, j, horizon) {
        return None;
    }
    let start = q.len().max(x + 1);
    Some(
        (x + 1..start)
            .rev()
            .find(|&u| phi.value_at(q, x, u) != Some(j))
            .map_or(x + 1, |u| u + 1),
    )
}

/// Cross pairs of `seg` all have `Φ^f = j` under `q`; increasing mode
/// only checks pairs whose left element is smaller.
pub fn segment_holds(
    phi: &ColoringTransformer,
    q: &Condition,
    seg: &BTreeSet<usize>,
    j: u8,
    mode: Mode,
    horizon: usize,
) -> bool {
    let top = phi.decidable_below(horizon);
    let (left, right) = decode_join(seg);
    left.iter().all(|&l| {
        right.iter().all(|&r| {
            l == r
                || (mode.increasing() && l > r)
                || (l.max(r) < top && phi.value_at(q, l, r) == Some(j))
        })
    })
}

/// Every pin assignment of `elements`, in binary counting order.
fn pin_sets(elements: &[usize]) -> Vec<BTreeMap<usize, u8>> {
    (0u32..1 << elements.len())
        .map(|mask| {
            elements
                .iter()
                .enumerate()
                .map(|(k, &v)| (v, (mask >> k & 1) as u8))
                .collect()
        })
        .collect()
}

/// Canonical extensions of `q`: target length from `base` to `slack` more,
/// then pin sets in order, then default color, then eager before zero fill.
fn extensions<'a>(
    q: &'a Condition,
    base: usize,
    pins: &'a [BTreeMap<usize, u8>],
    nae: &'a [(usize, usize)],
    horizon: usize,
    slack: usize,
) -> impl Iterator<Item = Condition> + 'a {
    let base = base.max(q.len());
    let top = (base + slack).min(horizon);
    (base..=top).flat_map(move |t| {
        pins.iter().flat_map(move |pinned| {
            [(0u8, true), (0, false), (1, true), (1, false)]
                .into_iter()
                .filter_map(move |(d, eager)| {
                    let spec = Completion {
                        target: t,
                        not_all_equal: nae.to_vec(),
                        pinned: pinned.clone(),
                        default_color: d,
                        eager,
                    };
                    complete(q, &spec).ok()
                })
        })
    })
}

/// Whether some canonical extension of `q` forces limit `j` at `x`.
pub fn limit_forceable(
    phi: &ColoringTransformer,
    q: &Condition,
    x: usize,
    j: u8,
    horizon: usize,
    slack: usize,
) -> bool {
    let pins = pin_sets(&[x]);
    let found = extensions(q, x + 1, &pins, &[], horizon, slack)
        .any(|r| forces_limit(phi, &r, x, j, horizon));
    found
}

fn decoded(seg: &BTreeSet<usize>) -> BTreeSet<usize> {
    seg.iter().map(|c| c / 2).collect()
}

/// Elements of `reservoir` at or beyond every stabilization point of the
/// segments of `phi`, and above every segment element.
fn cut_reservoir(
    phi: &ColoringTransformer,
    q: &Condition,
    segments: &[BTreeSet<usize>; 2],
    reservoir: &[usize],
    above: usize,
    horizon: usize,
) -> Result<Vec<usize>, String> {
    let mut floor = above;
    for (j, seg) in segments.iter().enumerate() {
        for e in decoded(seg) {
            let m = stabilization(phi, q, e, j as u8, horizon)
                .ok_or_else(|| format!("limit {j} at {e} is not forced"))?;
            floor = floor.max(m).max(e + 1);
        }
    }
    Ok(reservoir.iter().copied().filter(|&x| x >= floor).collect())
}

/// One left and one right element per color, or a reserved tail.
pub fn q_step(
    state: &StageState,
    phi_id: &str,
    phi: &ColoringTransformer,
    mode: Mode,
    slack: usize,
) -> StepResult {
    let h = state.horizon;
    let p = &state.condition;
    let res = &state.reservoir;
    if res.is_empty() {
        return blocked(state, "empty reservoir", Vec::new());
    }
    let forceable: [Vec<usize>; 2] = [0u8, 1].map(|j| {
        res.iter()
            .copied()
            .filter(|&x| limit_forceable(phi, p, x, j, h, slack))
            .collect()
    });
    for j in 0..2u8 {
        let tail: Vec<usize> = match forceable[j as usize].last() {
            Some(&m) => res.iter().copied().filter(|&v| v > m).collect(),
            None => res.clone(),
        };
        if tail.len() >= 2 {
            let mut next = state.clone();
            next.family.push(tail.clone());
            return result(
                next,
                Outcome::ReservedSetAdded {
                    set: tail,
                    color: j,
                },
                "no canonical extension forces this limit color anywhere on the reservoir tail",
                Vec::new(),
            );
        }
    }
    let old = [state.segment(phi_id, 0), state.segment(phi_id, 1)];
    let pairs = |j: usize| -> Vec<(usize, usize)> {
        let xs = &forceable[j];
        let mut out = Vec::new();
        for &a in xs {
            for &b in xs {
                if a != b && (!mode.increasing() || a < b) {
                    out.push((a, b));
                }
            }
        }
        out
    };
    let grown = |j: usize, (a, b): (usize, usize)| -> BTreeSet<usize> {
        let mut s = old[j].clone();
        s.insert(2 * a);
        s.insert(2 * b + 1);
        s
    };
    for (x00, x01) in pairs(0) {
        for (x10, x11) in pairs(1) {
            let tuple = [x00, x01, x10, x11];
            if [x10, x11].iter().any(|x| *x == x00 || *x == x01) {
                continue;
            }
            let segs = [grown(0, (x00, x01)), grown(1, (x10, x11))];
            let pins = pin_sets(&tuple);
            let base = tuple.iter().max().expect("four elements") + 1;
            let ok = |q: &Condition| {
                (0..2).all(|j| {
                    segment_holds(phi, q, &segs[j], j as u8, mode, h)
                        && decoded(&segs[j])
                            .iter()
                            .all(|&e| forces_limit(phi, q, e, j as u8, h))
                })
            };
            let found = extensions(p, base, &pins, &[], h, slack).find(|q| ok(q));
            if let Some(q) = found {
                let above = tuple.iter().max().expect("four elements") + 1;
                let reservoir = match cut_reservoir(phi, &q, &segs, res, above, h) {
                    Ok(r) => r,
                    Err(reason) => return blocked(state, reason, Vec::new()),
                };
                let mut next = state.clone();
                next.condition = q;
                let [s0, s1] = segs;
                next.set_segment(phi_id, 0, s0);
                next.set_segment(phi_id, 1, s1);
                next.reservoir = reservoir;
                return result(
                    next,
                    Outcome::ExtendedSegments {
                        phi: phi_id.to_string(),
                        tuple,
                    },
                    "both segments gained one left and one right element with forced limits",
                    Vec::new(),
                );
            }
        }
    }
    blocked(
        state,
        "no four-element extension within the horizon",
        Vec::new(),
    )
}

#[derive(Clone, Debug)]
pub struct WalkParams {
    pub theta: Theta,
    pub depth_cap: usize,
    pub slack: usize,
}

enum Prepared {
    Tree(LabeledTree),
    Path(Vec<usize>),
    Blocked(String),
}

fn prepare(params: &TreeParams, theta: Theta, sorted: bool) -> Prepared {
    let tree = match build_tree(params) {
        Ok(t) => t,
        Err(e) => return Prepared::Blocked(e.to_string()),
    };
    if let Some(leaf) = tree.deepest_exhausted_leaf() {
        let s = tree.node(leaf).string.clone();
        return if s.len() >= params.depth_cap {
            Prepared::Path(s)
        } else {
            Prepared::Blocked(format!("leaf {s:?} ran out of reservoir without a witness"))
        };
    }
    let staged = label_tree(&tree, theta)
        .and_then(|t| labeled_subtree(&t, theta))
        .and_then(|t| {
            if sorted {
                compute_sort(&t, theta)
            } else {
                Ok(t)
            }
        });
    match staged {
        Ok(t) => Prepared::Tree(t),
        Err(e) => Prepared::Blocked(e.to_string()),
    }
}

fn path_outcome(state: &StageState, path: Vec<usize>) -> StepResult {
    let mut next = state.clone();
    next.reservoir = path.clone();
    result(
        next,
        Outcome::PathReservoir { path },
        "the tree survives to the depth cap along this path",
        Vec::new(),
    )
}

struct Walk<'a> {
    phi: &'a ColoringTransformer,
    horizon: usize,
    slack: usize,
    color: u8,
    q: Condition,
    tree: LabeledTree,
    path: Vec<usize>,
    moves: Vec<Move>,
    pairs: Vec<[usize; 2]>,
}

impl Walk<'_> {
    fn id(&self) -> usize {
        self.tree
            .find(&self.path)
            .expect("the current node survives pruning")
    }

    fn label_of(&self, id: usize) -> &Label {
        self.tree.label(id).expect("labeled")
    }

    /// Largest stabilization point over the current range.
    fn stab_bound(&self) -> Result<usize, String> {
        let mut m = 0;
        for &x in &self.path {
            let s = stabilization(self.phi, &self.q, x, self.color, self.horizon)
                .ok_or_else(|| format!("limit {} at {x} is not forced", self.color))?;
            m = m.max(s);
        }
        Ok(m)
    }

    fn successors(&self, m: usize) -> Vec<(usize, usize)> {
        self.tree
            .children(self.id())
            .iter()
            .map(|&c| {
                (
                    c,
                    *self
                        .tree
                        .node(c)
                        .string
                        .last()
                        .expect("successors are nonempty"),
                )
            })
            .filter(|&(_, x)| x >= m)
            .collect()
    }

    fn advance(
        &mut self,
        case: WalkCase,
        x: usize,
        condition: Condition,
        mv: (Option<ButtonTriple>, Option<[usize; 2]>, Option<Rebase>),
    ) {
        let (press, pair, rebase) = mv;
        self.path.push(x);
        if let Some(p) = pair {
            self.pairs.push(p);
        }
        self.moves.push(Move {
            stage: 0,
            case,
            node: self.path.clone(),
            color: self.color,
            condition: condition.clone(),
            forced: Some(x),
            press,
            pair,
            rebase,
        });
        self.q = condition;
    }

    fn root_pair(&mut self, a: usize, b: usize) -> Result<(), String> {
        let nae = [(a, b)];
        let none = [BTreeMap::new()];
        let r = extensions(&self.q, b + 1, &none, &nae, self.horizon, self.slack)
            .next()
            .ok_or_else(|| format!("no extension separates ({a}, {b})"))?;
        self.pairs.push([a, b]);
        self.moves.push(Move {
            stage: 0,
            case: WalkCase::RootPair,
            node: Vec::new(),
            color: self.color,
            condition: r.clone(),
            forced: None,
            press: None,
            pair: Some([a, b]),
            rebase: None,
        });
        self.q = r;
        Ok(())
    }

    /// First canonical extension of `q` meeting `nae` under pins that
    /// forces the walk color at `x`.
    fn search(
        &self,
        q: &Condition,
        x: usize,
        pins: &[BTreeMap<usize, u8>],
        nae: &[(usize, usize)],
    ) -> Option<Condition> {
        let base = nae.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0).max(x) + 1;
        extensions(q, base, pins, nae, self.horizon, self.slack)
            .find(|r| forces_limit(self.phi, r, x, self.color, self.horizon))
    }

    /// No successor's limit can be forced to the walk color.
    fn reserve(self, state: &StageState, kids: &[(usize, usize)]) -> StepResult {
        let set: Vec<usize> = kids.iter().map(|&(_, x)| x).collect();
        let mut next = state.clone();
        next.condition = self.q;
        next.family.push(set.clone());
        result(
            next,
            Outcome::ReservedSetAdded {
                set,
                color: self.color,
            },
            "no canonical extension forces the walk color at any successor",
            self.moves,
        )
    }

    /// Stage completion at a witness-terminal node.
    fn finish(self, state: &StageState, phi_id: &str, segment: u8) -> StepResult {
        let id = self.id();
        let node = self.tree.node(id);
        let w = node
            .witness
            .clone()
            .expect("terminal nodes carry witnesses");
        let moves = self.moves;
        if self.pairs.is_empty() {
            return blocked(
                state,
                "walk reached a terminal node without separating a pair",
                moves,
            );
        }
        if let Some(p) = self
            .pairs
            .iter()
            .find(|p| !p.iter().all(|v| w.values.contains(v)))
        {
            return blocked(
                state,
                format!("separated pair {p:?} is not among the terminal values"),
                moves,
            );
        }
        let joined = w.joined();
        let mut seg = state.segment(phi_id, segment);
        seg.extend(joined.0.iter().copied());
        let mut floor = w.use_code + 1;
        for &x in &node.string {
            match stabilization(self.phi, &self.q, x, segment, self.horizon) {
                Some(m) => floor = floor.max(m),
                None => {
                    return blocked(
                        state,
                        format!("limit {segment} at {x} is not forced at the end of the walk"),
                        moves,
                    )
                }
            }
        }
        let mut next = state.clone();
        next.condition = self.q;
        next.set_segment(phi_id, segment, seg);
        next.reservoir = state
            .reservoir
            .iter()
            .copied()
            .filter(|&x| x >= floor)
            .collect();
        result(
            next,
            Outcome::Diagonalized {
                phi: phi_id.to_string(),
                segment,
                node: node.string.clone(),
                left: w.left.iter().copied().collect(),
                right: w.right.iter().copied().collect(),
                values: w.values.clone(),
                pairs: self.pairs,
                use_code: w.use_code,
            },
            "every computed set through the terminal split contains a separated pair",
            moves,
        )
    }
}

/// Walk of a two-label tree keeping every limit at 0.
pub fn r_step_case_a(
    state: &StageState,
    phi_id: &str,
    phi: &ColoringTransformer,
    gamma: &OracleFunctional,
    mode: Mode,
    walk: &WalkParams,
) -> StepResult {
    let params = TreeParams {
        k: state.condition.len(),
        gamma: gamma.clone(),
        segment: state.segment(phi_id, 0),
        reservoir: state.reservoir.clone(),
        arity: Arity::Two,
        variant: mode.variant(),
        depth_cap: walk.depth_cap,
    };
    let tree = match prepare(&params, walk.theta, false) {
        Prepared::Tree(t) => t,
        Prepared::Path(p) => return path_outcome(state, p),
        Prepared::Blocked(reason) => return blocked(state, reason, Vec::new()),
    };
    let mut w = Walk {
        phi,
        horizon: state.horizon,
        slack: walk.slack,
        color: 0,
        q: state.condition.clone(),
        tree,
        path: Vec::new(),
        moves: Vec::new(),
        pairs: Vec::new(),
    };
    let root = w.label_of(ROOT).clone();
    if let (Some(a), Some(b)) = (root.get(0), root.get(1)) {
        if let Err(reason) = w.root_pair(a, b) {
            return blocked(state, reason, w.moves);
        }
    }
    loop {
        let id = w.id();
        if w.tree.node(id).kind == NodeKind::WitnessTerminal {
            return w.finish(state, phi_id, 0);
        }
        let m = match w.stab_bound() {
            Ok(m) => m,
            Err(reason) => return blocked(state, reason, w.moves),
        };
        let kids = w.successors(m);
        if kids.is_empty() {
            return blocked(
                state,
                format!("no successor of {:?} at or beyond {m}", w.path),
                w.moves,
            );
        }
        let all_finite = kids.iter().all(|&(c, _)| w.label_of(c).is_finite());
        if is_transition(&w.tree, id, false) && all_finite {
            let n = w.q.len();
            let mut found = None;
            for &(c, x) in &kids {
                let l = w.label_of(c);
                let (a, b) = (l.get(0).expect("finite"), l.get(1).expect("finite"));
                if b <= n {
                    continue;
                }
                if let Some(r) = w.search(&w.q, x, &pin_sets(&[x]), &[(a, b)]) {
                    found = Some((x, r, [a, b]));
                    break;
                }
            }
            match found {
                Some((x, r, pair)) => {
                    w.advance(WalkCase::PairDiagonalize, x, r, (None, Some(pair), None))
                }
                None if kids
                    .iter()
                    .all(|&(_, x)| !limit_forceable(w.phi, &w.q, x, 0, w.horizon, w.slack)) =>
                {
                    return w.reserve(state, &kids);
                }
                None => {
                    return blocked(
                        state,
                        "no successor admits a forcing extension that separates its pair",
                        w.moves,
                    )
                }
            }
        } else {
            let found = kids
                .iter()
                .find_map(|&(_, x)| w.search(&w.q, x, &pin_sets(&[x]), &[]).map(|r| (x, r)));
            match found {
                Some((x, r)) => w.advance(WalkCase::LimitSearch, x, r, (None, None, None)),
                None => return w.reserve(state, &kids),
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Partner {
    /// Keep extensions where the two elements may share a column.
    Share,
    /// Increasing mode: drop extensions placing the first left, the second right.
    NotLeftRight,
    /// Increasing mode: keep extensions with a same-column placement.
    SameColumn,
    /// Increasing mode: keep extensions placing the first right, the second left.
    RightLeft,
}

fn partner_holds(tree: &LabeledTree, string: &[usize], x: usize, y: usize, rule: Partner) -> bool {
    match rule {
        Partner::Share => share_column(tree, string, x, y).unwrap_or(false),
        Partner::NotLeftRight => {
            configuration(tree, string, x, y).is_ok_and(|c| !c.contains(&Configuration::LeftRight))
        }
        Partner::SameColumn => {
            configuration(tree, string, x, y).is_ok_and(|c| c.contains(&Configuration::SameColumn))
        }
        Partner::RightLeft => {
            configuration(tree, string, x, y).is_ok_and(|c| c.contains(&Configuration::RightLeft))
        }
    }
}

/// Walk of a three-label tree pressing the button of every element.
#[allow(clippy::too_many_arguments)]
pub fn r_step_case_b(
    state: &StageState,
    phi_id: &str,
    phi: &ColoringTransformer,
    delta: &OracleFunctional,
    triples: &[[usize; 3]],
    i: u8,
    mode: Mode,
    walk: &WalkParams,
) -> StepResult {
    let mut buttons: BTreeMap<usize, ButtonTriple> = BTreeMap::new();
    let mut thirds = BTreeSet::new();
    for &[x, a, b] in triples {
        let t = match ButtonTriple::new(x, a, b) {
            Ok(t) => t,
            Err(e) => return blocked(state, format!("button set: {e}"), Vec::new()),
        };
        if buttons.insert(x, t).is_some() || !thirds.insert(b) {
            return blocked(
                state,
                "button set needs one triple per element and distinct third entries",
                Vec::new(),
            );
        }
    }
    if i > 1 {
        return blocked(state, "button color must be 0 or 1", Vec::new());
    }
    let params = TreeParams {
        k: state.condition.len(),
        gamma: delta.clone(),
        segment: state.segment(phi_id, i),
        reservoir: state
            .reservoir
            .iter()
            .copied()
            .filter(|x| buttons.contains_key(x))
            .collect(),
        arity: Arity::Three,
        variant: mode.variant(),
        depth_cap: walk.depth_cap,
    };
    let tree = match prepare(&params, walk.theta, true) {
        Prepared::Tree(t) => t,
        Prepared::Path(p) => return path_outcome(state, p),
        Prepared::Blocked(reason) => return blocked(state, reason, Vec::new()),
    };
    let mut w = Walk {
        phi,
        horizon: state.horizon,
        slack: walk.slack,
        color: i,
        q: state.condition.clone(),
        tree,
        path: Vec::new(),
        moves: Vec::new(),
        pairs: Vec::new(),
    };
    let root = w.label_of(ROOT).clone();
    if let (Some(a), Some(b)) = (root.get(0), root.get(1)) {
        if let Err(reason) = w.root_pair(a, b) {
            return blocked(state, reason, w.moves);
        }
    }
    let none = [BTreeMap::new()];
    let mut history: Vec<Label> = vec![root];
    let mut deferred = false;
    loop {
        let id = w.id();
        if w.tree.node(id).kind == NodeKind::WitnessTerminal {
            return w.finish(state, phi_id, i);
        }
        let m = match w.stab_bound() {
            Ok(m) => m,
            Err(reason) => return blocked(state, reason, w.moves),
        };
        let n = w.q.len();
        let kids: Vec<(usize, usize)> = w
            .successors(m)
            .into_iter()
            .filter(|&(_, x)| buttons[&x].b > n)
            .collect();
        if kids.is_empty() {
            return blocked(
                state,
                format!("no successor of {:?} has a free button", w.path),
                w.moves,
            );
        }
        let pressed_b: Vec<usize> = w.path.iter().map(|x| buttons[x].b).collect();
        let above = |v: usize| v > n && pressed_b.iter().all(|&b| v > b);
        let label = w.label_of(id).clone();
        let inf = label.infinities();
        let all_finite = kids.iter().all(|&(c, _)| w.label_of(c).is_finite());
        let transition = is_transition(&w.tree, id, true);
        let first_with = |count: usize| history.iter().position(|l| l.infinities() == count);

        // Candidates: (child, element, extra pair, rebase target, case).
        let mut plan: Option<(
            WalkCase,
            Vec<(usize, usize, Option<[usize; 2]>)>,
            Option<Partner>,
            Option<usize>,
        )> = None;
        if transition && inf == 3 {
            let c: Vec<_> = kids
                .iter()
                .filter_map(|&(c, x)| {
                    let l = w.label_of(c);
                    let (a, b) = (l.get(0)?, l.get(1)?);
                    (above(a) && above(b)).then_some((c, x, Some([a, b])))
                })
                .collect();
            plan = Some((WalkCase::EarlyPair, c, None, None));
        } else if transition && inf == 2 && all_finite {
            let c: Vec<_> = kids
                .iter()
                .filter_map(|&(c, x)| {
                    let l = w.label_of(c);
                    let (b, cc) = (l.get(1)?, l.get(2)?);
                    (above(b) && above(cc)).then_some((c, x, Some([b, cc])))
                })
                .collect();
            plan = Some((WalkCase::LatePair, c, None, None));
        } else if transition && inf == 2 {
            let c: Vec<_> = kids
                .iter()
                .filter_map(|&(c, x)| {
                    let l = w.label_of(c);
                    let (a, b) = (l.get(0)?, l.get(1)?);
                    above(b).then_some((c, x, Some([a, b])))
                })
                .collect();
            let k = first_with(2).expect("the current node has two infinities");
            if k == 0 {
                plan = Some((WalkCase::ColumnPair, c, None, None));
            } else {
                let xs = w.path[k - 1];
                let rule = if mode.increasing() {
                    None
                } else {
                    Some(Partner::Share)
                };
                let sharing: Vec<_> = c
                    .into_iter()
                    .filter(|&(cid, y, _)| {
                        let s = &w.tree.node(cid).string;
                        match rule {
                            Some(r) => partner_holds(&w.tree, s, xs, y, r),
                            None => configuration(&w.tree, s, xs, y).is_ok_and(|cf| {
                                cf.contains(&Configuration::RightLeft)
                                    || cf.contains(&Configuration::SameColumn)
                            }),
                        }
                    })
                    .collect();
                if sharing.is_empty() {
                    deferred = true;
                    plan = Some((
                        WalkCase::ColumnDeferred,
                        kids.iter().map(|&(c, x)| (c, x, None)).collect(),
                        None,
                        None,
                    ));
                } else {
                    let prune_rule = if mode.increasing() {
                        Partner::NotLeftRight
                    } else {
                        Partner::Share
                    };
                    plan = Some((WalkCase::ColumnPair, sharing, Some(prune_rule), Some(xs)));
                }
            }
        } else if transition && inf == 1 && all_finite && deferred {
            let c: Vec<_> = kids
                .iter()
                .filter_map(|&(c, x)| {
                    let l = w.label_of(c);
                    let (b, cc) = (l.get(1)?, l.get(2)?);
                    above(cc).then_some((c, x, Some([b, cc])))
                })
                .collect();
            let xs = w.path[first_with(2).expect("a deferral follows a two-infinity node") - 1];
            let ys = w.path[first_with(1).expect("the current node has one infinity") - 1];
            let (second, first) = if mode.increasing() {
                (Partner::SameColumn, Partner::RightLeft)
            } else {
                (Partner::Share, Partner::Share)
            };
            let with = |partner: usize, rule: Partner| -> Vec<(usize, usize, Option<[usize; 2]>)> {
                c.iter()
                    .copied()
                    .filter(|&(cid, z, _)| {
                        partner_holds(&w.tree, &w.tree.node(cid).string, partner, z, rule)
                    })
                    .collect()
            };
            let (p2, p1) = (with(ys, second), with(xs, first));
            plan = if !p2.is_empty() {
                Some((WalkCase::DeferredPair, p2, Some(second), Some(ys)))
            } else if !p1.is_empty() {
                Some((WalkCase::DeferredPair, p1, Some(first), Some(xs)))
            } else {
                return blocked(
                    state,
                    "no successor shares a column with either earlier transition element",
                    w.moves,
                );
            };
            deferred = false;
        }
        let (case, candidates, prune_rule, partner) = plan.unwrap_or((
            WalkCase::Press,
            kids.iter().map(|&(c, x)| (c, x, None)).collect(),
            None,
            None,
        ));

        // Separation through σ against a committed limit, with rebase, only
        // where a column partner makes that pair's color irrelevant.
        let mut chosen = None;
        for (c, x, pair) in candidates {
            let t = buttons[&x];
            let mut nae = vec![(t.a, t.b)];
            if let Some([a, b]) = pair {
                nae.push((a, b));
            }
            let via_sigma = partner.is_some();
            let attempt = |q: &Condition| -> Option<Condition> {
                match pair.filter(|_| via_sigma) {
                    Some([a, b]) => {
                        let pins: Vec<BTreeMap<usize, u8>> = match q.limit_color(a) {
                            Some(col) => vec![BTreeMap::from([(b, col)])],
                            None => (0..2u8)
                                .map(|col| BTreeMap::from([(a, col), (b, col)]))
                                .collect(),
                        };
                        w.search(q, x, &pins, &nae)
                    }
                    None => w.search(q, x, &none, &nae),
                }
            };
            let mut rebase = None;
            let mut base = w.q.clone();
            if let (true, Some([a, b])) = (via_sigma, pair) {
                if let Some(old) = base.limit(a).filter(|l| l.point <= b) {
                    let new = Limit {
                        color: old.color,
                        point: b + 1,
                    };
                    base.set_limit(a, new);
                    rebase = Some(Rebase {
                        element: a,
                        old,
                        new,
                    });
                }
            }
            if let Some(r) = attempt(&base) {
                chosen = Some((c, x, r, t, pair, rebase));
                break;
            }
        }
        let Some((c, x, r, t, pair, rebase)) = chosen else {
            return blocked(
                state,
                format!("no successor of {:?} admits a pressing extension", w.path),
                w.moves,
            );
        };
        history.push(w.label_of(c).clone());
        w.advance(case, x, r, (Some(t), pair, rebase));
        if let (Some(rule), Some(p)) = (prune_rule, partner) {
            let keep = |tree: &LabeledTree, node: &crate::tree::Node| {
                partner_holds(tree, &node.string, p, x, rule)
            };
            let keep_rule = |tree: &LabeledTree, node: &crate::tree::Node| match rule {
                // Dropping on a left/right placement keeps everything else.
                Partner::NotLeftRight => partner_holds(tree, &node.string, p, x, rule),
                _ => keep(tree, node),
            };
            match prune(&w.tree, &w.path, keep_rule) {
                Ok(t) => w.tree = t,
                Err(e) => return blocked(state, e.to_string(), w.moves),
            }
        }
    }
}

/// A finished or halted run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub events: Vec<Event>,
    pub state: StageState,
    pub halted: Option<String>,
}

pub fn run_stages(
    inputs: &Inputs,
    schedule: &[Step],
    default_theta: Theta,
) -> Result<Run, RunError> {
    let resolved = inputs.resolve(schedule)?;
    let mut state = inputs.initial_state()?;
    let mut events = Vec::new();
    for (s, step) in schedule.iter().enumerate() {
        let res = execute(&resolved, &state, step, default_theta);
        for mut mv in res.moves {
            mv.stage = s;
            events.push(Event::Move(mv));
        }
        let halted = match &res.outcome.outcome {
            Outcome::Blocked { reason } => Some(format!("stage {s}: {reason}")),
            _ => None,
        };
        state = res.state;
        events.push(Event::Stage(StageRecord {
            stage: s,
            step: step.clone(),
            outcome: res.outcome.outcome,
            rationale: res.outcome.rationale,
            condition: state.condition.clone(),
            reservoir: state.reservoir.clone(),
        }));
        if halted.is_some() {
            return Ok(Run {
                events,
                state,
                halted,
            });
        }
    }
    Ok(Run {
        events,
        state,
        halted: None,
    })
}

fn walk_params(
    r: &Resolved,
    theta: Option<Theta>,
    depth_cap: Option<usize>,
    default_theta: Theta,
) -> WalkParams {
    WalkParams {
        theta: theta.unwrap_or(default_theta),
        depth_cap: depth_cap.unwrap_or(DEFAULT_DEPTH_CAP),
        slack: r.slack,
    }
}

fn execute(r: &Resolved, state: &StageState, step: &Step, default_theta: Theta) -> StepResult {
    match step {
        Step::Segments { phi, mode } => q_step(state, phi, &r.transformers[phi], *mode, r.slack),
        Step::LimitWalk {
            phi,
            gamma,
            mode,
            theta,
            depth_cap,
        } => r_step_case_a(
            state,
            phi,
            &r.transformers[phi],
            &r.functionals[gamma],
            *mode,
            &walk_params(r, *theta, *depth_cap, default_theta),
        ),
        Step::ButtonWalk {
            phi,
            delta,
            mode,
            triples,
            i,
            theta,
            depth_cap,
        } => r_step_case_b(
            state,
            phi,
            &r.transformers[phi],
            &r.functionals[delta],
            triples,
            *i,
            *mode,
            &walk_params(r, *theta, *depth_cap, default_theta),
        ),
        Step::Generic => result(
            state.clone(),
            Outcome::NoOp,
            "genericity requirements are not simulated",
            Vec::new(),
        ),
    }
}

pub fn to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(s: &str) -> Result<Vec<Event>, RunError> {
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunError::Json(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn schedule_from_json_str(s: &str) -> Result<Vec<Step>, RunError> {
    serde_json::from_str(s).map_err(|e| RunError::Json(e.to_string()))
}

/// Result of re-checking a transcript against its inputs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub events: usize,
    pub failures: Vec<String>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn nae_holds(q: &Condition, [a, b]: [usize; 2]) -> bool {
    match (
        q.sigma(a.min(b), a.max(b)),
        q.limit_color(a),
        q.limit_color(b),
    ) {
        (Some(s), Some(ca), Some(cb)) => !(s == ca && ca == cb),
        _ => false,
    }
}

/// Re-checks every claim of a transcript from the inputs, without
/// repeating any search except the bounded exhaustive ones behind
/// reserved sets.
pub fn verify(
    inputs: &Inputs,
    schedule: &[Step],
    events: &[Event],
    default_theta: Theta,
) -> Verification {
    let mut v = Verification {
        events: events.len(),
        failures: Vec::new(),
    };
    let resolved = match inputs.resolve(schedule) {
        Ok(r) => r,
        Err(e) => {
            v.failures.push(e.to_string());
            return v;
        }
    };
    let mut state = match inputs.initial_state() {
        Ok(s) => s,
        Err(e) => {
            v.failures.push(e.to_string());
            return v;
        }
    };
    let h = inputs.horizon;
    let mut fail = |s: usize, msg: String| v.failures.push(format!("stage {s}: {msg}"));
    let mut moves: Vec<&Move> = Vec::new();
    let mut expected_stage = 0;
    for e in events {
        let rec = match e {
            Event::Move(m) => {
                moves.push(m);
                continue;
            }
            Event::Stage(rec) => rec,
        };
        let s = rec.stage;
        if s != expected_stage {
            fail(s, format!("expected stage {expected_stage}"));
        }
        expected_stage = s + 1;
        if schedule.get(s) != Some(&rec.step) {
            fail(s, "step differs from the schedule".into());
        }
        let entry = state.condition.clone();
        let phi_id = match &rec.step {
            Step::Segments { phi, .. }
            | Step::LimitWalk { phi, .. }
            | Step::ButtonWalk { phi, .. } => Some(phi.clone()),
            Step::Generic => None,
        };
        let phi = phi_id.as_ref().and_then(|p| resolved.transformers.get(p));

        // Moves: chain discipline, presses, separations, forced limits.
        let mut prev = entry.clone();
        let mut presses: Vec<ButtonTriple> = Vec::new();
        let mut pairs: Vec<[usize; 2]> = Vec::new();
        let mut walked: Vec<usize> = Vec::new();
        for (k, m) in moves.drain(..).enumerate() {
            if m.stage != s {
                fail(s, format!("move logged for stage {}", m.stage));
            }
            // Each move descends one level along reservoir elements.
            let depth_ok = if k == 0 {
                m.node.len() <= 1
            } else {
                m.node.len() == walked.len() + 1
            };
            let step_ok = m.node.starts_with(&walked)
                && m.node.windows(2).all(|w| w[0] < w[1])
                && m.node.iter().all(|x| state.reservoir.contains(x));
            if !depth_ok || !step_ok {
                fail(
                    s,
                    format!(
                        "{:?} move to {:?} does not continue the walk",
                        m.case, m.node
                    ),
                );
            }
            walked = m.node.clone();
            let q = &m.condition;
            if !q.is_valid() {
                fail(s, format!("{:?} move condition is invalid", m.case));
            }
            let mut base = prev.clone();
            if let Some(rb) = m.rebase {
                if base.limit(rb.element) != Some(rb.old)
                    || rb.new.color != rb.old.color
                    || rb.new.point <= rb.old.point
                {
                    fail(
                        s,
                        format!(
                            "rebase of {} does not move a committed point upward",
                            rb.element
                        ),
                    );
                }
                base.set_limit(rb.element, rb.new);
                if !extends_unchecked(q, &entry) {
                    fail(
                        s,
                        "rebased condition does not extend the stage-entry condition".into(),
                    );
                }
            }
            if !extends_unchecked(q, &base) {
                fail(
                    s,
                    format!("{:?} move does not extend its predecessor", m.case),
                );
            }
            if let Some(t) = m.press {
                presses.push(t);
            }
            if let Some(p) = m.pair {
                pairs.push(p);
            }
            for t in &presses {
                if !press_check(q, t) {
                    fail(
                        s,
                        format!("button of {} is not pressed after a {:?} move", t.x, m.case),
                    );
                }
            }
            for &p in &pairs {
                if !nae_holds(q, p) {
                    fail(
                        s,
                        format!("pair {p:?} is not separated after a {:?} move", m.case),
                    );
                }
            }
            if let (Some(x), Some(phi)) = (m.forced, phi) {
                if !forces_limit(phi, q, x, m.color, h) {
                    fail(
                        s,
                        format!(
                            "limit {} at {x} is not forced after a {:?} move",
                            m.color, m.case
                        ),
                    );
                }
            }
            prev = q.clone();
        }

        let after = &rec.condition;
        if !after.is_valid() || !extends_unchecked(after, &entry) {
            fail(
                s,
                "stage condition does not extend the stage-entry condition".into(),
            );
        }
        if !rec.reservoir.iter().all(|x| state.reservoir.contains(x))
            || rec.reservoir.windows(2).any(|w| w[0] >= w[1])
        {
            fail(
                s,
                "reservoir is not an increasing subset of the previous one".into(),
            );
        }
        let mut next = state.clone();
        next.condition = after.clone();
        next.reservoir = rec.reservoir.clone();
        match (&rec.outcome, &rec.step) {
            (Outcome::ExtendedSegments { phi: id, tuple }, Step::Segments { mode, .. }) => {
                let phi = &resolved.transformers[id];
                let [x00, x01, x10, x11] = *tuple;
                for j in 0..2u8 {
                    let (l, r) = if j == 0 { (x00, x01) } else { (x10, x11) };
                    let mut seg = state.segment(id, j);
                    let before = seg.len();
                    seg.insert(2 * l);
                    seg.insert(2 * r + 1);
                    if seg.len() != before + 2
                        || !state.reservoir.contains(&l)
                        || !state.reservoir.contains(&r)
                    {
                        fail(
                            s,
                            format!("segment {j} does not grow by two reservoir codes"),
                        );
                    }
                    if mode.increasing() && l >= r {
                        fail(s, format!("segment {j} additions are not increasing"));
                    }
                    if !segment_holds(phi, after, &seg, j, *mode, h) {
                        fail(s, format!("segment {j} is not p-homogeneous for color {j}"));
                    }
                    for e in decoded(&seg) {
                        match stabilization(phi, after, e, j, h) {
                            Some(m) if rec.reservoir.iter().all(|&x| x >= m && x > e) => {}
                            _ => fail(s, format!("reservoir is not past the stabilization of {e}")),
                        }
                    }
                    next.set_segment(id, j, seg);
                }
            }
            (Outcome::ReservedSetAdded { set, color }, step) => {
                let Some(phi) = phi else {
                    fail(s, "reserved set without a transformer".into());
                    continue;
                };
                if set.is_empty() || !set.iter().all(|x| state.reservoir.contains(x)) {
                    fail(
                        s,
                        "reserved set is not a nonempty part of the reservoir".into(),
                    );
                }
                let from = match step {
                    Step::Segments { .. } => &entry,
                    _ => after,
                };
                if let Some(x) = set
                    .iter()
                    .find(|&&x| limit_forceable(phi, from, x, *color, h, resolved.slack))
                {
                    fail(s, format!("limit {color} at {x} is forceable after all"));
                }
                if !matches!(step, Step::Segments { .. }) && Some(after) != Some(&prev) {
                    fail(s, "stage condition is not the last walk condition".into());
                }
                next.family.push(set.clone());
            }
            (Outcome::PathReservoir { path }, step) => {
                let (gamma, seg_color, arity, mode, cap, triples) = match step {
                    Step::LimitWalk {
                        gamma,
                        mode,
                        depth_cap,
                        ..
                    } => (gamma, 0, Arity::Two, *mode, *depth_cap, None),
                    Step::ButtonWalk {
                        delta,
                        mode,
                        depth_cap,
                        i,
                        triples,
                        ..
                    } => (delta, *i, Arity::Three, *mode, *depth_cap, Some(triples)),
                    _ => {
                        fail(s, "path reservoir from a non-walk step".into());
                        continue;
                    }
                };
                let cap = cap.unwrap_or(DEFAULT_DEPTH_CAP);
                let params = TreeParams {
                    k: entry.len(),
                    gamma: resolved.functionals[gamma].clone(),
                    segment: state.segment(phi_id.as_deref().unwrap_or_default(), seg_color),
                    reservoir: state.reservoir.clone(),
                    arity,
                    variant: mode.variant(),
                    depth_cap: cap,
                };
                let in_pool = |x: &usize| {
                    state.reservoir.contains(x)
                        && triples.is_none_or(|t| t.iter().any(|tr| tr[0] == *x))
                };
                if path.len() != cap
                    || !path.iter().all(in_pool)
                    || path.windows(2).any(|w| w[0] >= w[1])
                {
                    fail(
                        s,
                        "path is not an increasing reservoir string at the depth cap".into(),
                    );
                }
                if let Some(n) = (0..=path.len()).find(|&n| params.witness(&path[..n]).is_some()) {
                    fail(s, format!("path prefix of length {n} has a witness"));
                }
                if rec.reservoir != *path {
                    fail(s, "reservoir is not the path range".into());
                }
            }
            (
                Outcome::Diagonalized {
                    phi: id,
                    segment,
                    node,
                    left,
                    right,
                    values,
                    pairs: claimed,
                    use_code,
                },
                step,
            ) => {
                let (gamma, mode) = match step {
                    Step::LimitWalk { gamma, mode, .. } => (gamma, *mode),
                    Step::ButtonWalk { delta, mode, .. } => (delta, *mode),
                    _ => {
                        fail(s, "diagonalization from a non-walk step".into());
                        continue;
                    }
                };
                let phi = &resolved.transformers[id];
                let gamma = &resolved.functionals[gamma];
                if Some(after) != Some(&prev) {
                    fail(s, "stage condition is not the last walk condition".into());
                }
                if *claimed != pairs {
                    fail(s, "separated pairs differ from the walk".into());
                }
                for p in claimed {
                    if !nae_holds(after, *p) || !p.iter().all(|x| values.contains(x)) {
                        fail(
                            s,
                            format!("pair {p:?} is not a separated pair of terminal values"),
                        );
                    }
                }
                if !walked.is_empty() && *node != walked {
                    fail(s, "terminal node is not where the walk ended".into());
                }
                let ran: BTreeSet<usize> = node.iter().copied().collect();
                if !left.iter().chain(right).all(|x| ran.contains(x)) {
                    fail(s, "split is not inside the terminal range".into());
                }
                let joined = JoinedSet::from_columns(left.iter(), right.iter());
                let old = state.segment(id, *segment);
                let oracle: BTreeSet<usize> = old.union(&joined.0).copied().collect();
                let variant = mode.variant();
                for (pos, &val) in values.iter().enumerate() {
                    let query = variant.query(pos, val);
                    if gamma.evaluate(&oracle, query) != Ok(Some(1)) {
                        fail(
                            s,
                            format!("query {query} does not converge to 1 on the extended segment"),
                        );
                    }
                    if gamma.use_of(&oracle, query).is_some_and(|u| u > *use_code) {
                        fail(s, format!("use of query {query} exceeds the claimed use"));
                    }
                }
                if values.iter().any(|&v| v < entry.len())
                    || values.windows(2).any(|w| w[0] >= w[1])
                {
                    fail(
                        s,
                        "terminal values are not increasing above the entry length".into(),
                    );
                }
                if !segment_holds(phi, after, &oracle, *segment, mode, h) {
                    fail(
                        s,
                        format!("extended segment is not p-homogeneous for color {segment}"),
                    );
                }
                if rec
                    .reservoir
                    .iter()
                    .any(|&x| x <= *use_code || ran.iter().any(|&e| x <= e))
                {
                    fail(
                        s,
                        "reservoir is not past the use and the terminal range".into(),
                    );
                }
                next.set_segment(id, *segment, oracle);
            }
            (Outcome::NoOp, Step::Generic) => {}
            (Outcome::Blocked { .. }, _) => {}
            (o, _) => fail(s, format!("{} outcome does not match its step", o.kind())),
        }
        state = next;
    }
    if !moves.is_empty() {
        v.failures.push("moves after the last stage record".into());
    }
    let _ = default_theta;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::Axiom;

    fn inputs(horizon: usize, reservoir: std::ops::Range<usize>) -> Inputs {
        Inputs {
            horizon,
            reservoir: reservoir.collect(),
            transformers: BTreeMap::new(),
            functionals: BTreeMap::new(),
            slack: None,
            initial: None,
        }
    }

    #[test]
    fn identity_forces_the_limit_of_its_row() {
        let phi = ColoringTransformer::identity(12);
        let q = complete(
            &Condition::empty(),
            &Completion {
                target: 4,
                default_color: 1,
                eager: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(forces_limit(&phi, &q, 2, 1, 12));
        assert!(!forces_limit(&phi, &q, 2, 0, 12));
        assert!(!forces_limit(&phi, &q, 6, 1, 12));
        assert_eq!(stabilization(&phi, &q, 2, 1, 12), Some(3));
    }

    #[test]
    fn q_step_identity_extends_both_segments() {
        let inp = inputs(16, 2..10);
        let st = inp.initial_state().unwrap();
        let phi = ColoringTransformer::identity(16);
        let r = q_step(&st, "phi", &phi, Mode::Spt, DEFAULT_SLACK);
        let Outcome::ExtendedSegments { tuple, .. } = r.outcome.outcome else {
            panic!("{:?}", r.outcome)
        };
        for j in 0..2u8 {
            let seg = r.state.segment("phi", j);
            let (l, rr) = decode_join(&seg);
            assert_eq!((l.len(), rr.len()), (1, 1));
            assert!(segment_holds(
                &phi,
                &r.state.condition,
                &seg,
                j,
                Mode::Spt,
                16
            ));
        }
        assert!(r
            .state
            .reservoir
            .iter()
            .all(|&x| x > *tuple.iter().max().unwrap()));
    }

    #[test]
    fn q_step_constant_reserves_the_tail() {
        let st = inputs(16, 2..10).initial_state().unwrap();
        let r = q_step(
            &st,
            "phi",
            &ColoringTransformer::constant(16, 1),
            Mode::Spt,
            DEFAULT_SLACK,
        );
        assert_eq!(
            r.outcome.outcome,
            Outcome::ReservedSetAdded {
                set: (2..10).collect(),
                color: 0
            }
        );
        assert_eq!(r.state.family, vec![(2..10).collect::<Vec<_>>()]);
    }

    #[test]
    fn q_step_empty_reservoir_blocks() {
        let st = inputs(16, 0..0).initial_state().unwrap();
        let r = q_step(
            &st,
            "phi",
            &ColoringTransformer::identity(16),
            Mode::Spt,
            DEFAULT_SLACK,
        );
        assert!(matches!(r.outcome.outcome, Outcome::Blocked { .. }));
    }

    fn params() -> WalkParams {
        WalkParams {
            theta: Theta::Majority,
            depth_cap: 3,
            slack: DEFAULT_SLACK,
        }
    }

    #[test]
    fn empty_gamma_gives_a_path_reservoir() {
        let st = inputs(16, 1..7).initial_state().unwrap();
        let r = r_step_case_a(
            &st,
            "phi",
            &ColoringTransformer::identity(16),
            &OracleFunctional::empty(),
            Mode::Spt,
            &params(),
        );
        assert_eq!(
            r.outcome.outcome,
            Outcome::PathReservoir {
                path: vec![1, 2, 3]
            }
        );
        assert_eq!(r.state.reservoir, vec![1, 2, 3]);
    }

    #[test]
    fn constant_one_reserves_at_the_first_search() {
        // Every single element terminates the tree, so the root searches.
        let gamma = OracleFunctional::new(
            (1..7)
                .flat_map(|e| {
                    [
                        Axiom::new(e, &[2 * e], &[], 1),
                        Axiom::new(e + 10, &[2 * e], &[], 1),
                    ]
                })
                .collect(),
            false,
        )
        .unwrap();
        let st = inputs(16, 1..7).initial_state().unwrap();
        let r = r_step_case_a(
            &st,
            "phi",
            &ColoringTransformer::constant(16, 1),
            &gamma,
            Mode::Spt,
            &params(),
        );
        assert_eq!(
            r.outcome.outcome,
            Outcome::ReservedSetAdded {
                set: (1..7).collect(),
                color: 0
            }
        );
    }

    #[test]
    fn empty_schedule_is_empty() {
        let inp = inputs(16, 1..7);
        let run = run_stages(&inp, &[], Theta::Majority).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.state, inp.initial_state().unwrap());
    }

    #[test]
    fn schedule_json_round_trip() {
        let s = r#"[{"step":"q","phi":"identity"},{"step":"rA","phi":"identity","gamma":"g","theta":2},
                    {"step":"rB","phi":"b","delta":"d","mode":"SIPT","Q":[[3,0,1]],"i":1},{"step":"p"}]"#;
        let steps = schedule_from_json_str(s).unwrap();
        assert_eq!(steps.len(), 4);
        assert!(matches!(
            &steps[1],
            Step::LimitWalk {
                theta: Some(Theta::Count(2)),
                ..
            }
        ));
        let back = schedule_from_json_str(&serde_json::to_string(&steps).unwrap()).unwrap();
        assert_eq!(back, steps);
    }
}
