//! Diagonalization trees over a finite reservoir.
//!
//! A node is an increasing string over the reservoir. A child `α*x` is in
//! the tree when no split `F_L, F_R ⊆ ran(α)` of the parent's range makes
//! the functional output 1 on every query of some increasing value tuple
//! `≥ k`. Membership of every child of `α` thus depends on `ran(α)`
//! alone, and `α` is witness-terminal exactly when `ran(α)` itself has a
//! witness.
//!
//! "Infinitely many successors" becomes "at least θ successors" and
//! "cofinitely many" becomes "all but fewer than θ".

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::JoinedSet;
use crate::functional::{FunctionalError, OracleFunctional};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("reservoir must be strictly increasing")]
    UnsortedReservoir,
    #[error("segment element {element} is not below the reservoir minimum {min}")]
    SegmentAboveReservoir { element: usize, min: usize },
    #[error("leaf {0:?} is depth-exhausted; the tree cannot be labeled")]
    Unlabelable(Vec<usize>),
    #[error("node {0:?} is not in the tree")]
    NoSuchNode(Vec<usize>),
    #[error("{x} is not in the range of {node:?}")]
    NotInRange { node: Vec<usize>, x: usize },
    #[error("sort values are only defined on three-label trees")]
    SortNeedsThreeLabels,
    #[error("node {0:?} has no sort value")]
    NoSort(Vec<usize>),
    #[error("tree is not labeled")]
    Unlabeled,
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Two,
    Three,
}

impl Arity {
    pub fn len(self) -> usize {
        match self {
            Arity::Two => 2,
            Arity::Three => 3,
        }
    }
}

impl FromStr for Arity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" | "two" => Ok(Arity::Two),
            "3" | "three" => Ok(Arity::Three),
            _ => Err(format!("arity must be 2 or 3, got `{s}`")),
        }
    }
}

/// Plain queries the values themselves. Shifted queries `2a+1, 2b, 2c+1`:
/// the computed set holds `a` and `c` in its right column and `b` in its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Shifted,
}

impl Variant {
    pub fn query(self, position: usize, value: usize) -> usize {
        match self {
            Variant::Plain => value,
            Variant::Shifted if position % 2 == 0 => 2 * value + 1,
            Variant::Shifted => 2 * value,
        }
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Variant::Plain),
            "shifted" => Ok(Variant::Shifted),
            _ => Err(format!("variant must be plain or shifted, got `{s}`")),
        }
    }
}

/// Frequency threshold standing in for "infinitely many". Serialized as
/// `"majority"` or a bare count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Theta {
    /// Strict majority of the successors at hand.
    Majority,
    Count(usize),
}

impl Theta {
    pub fn threshold(self, successors: usize) -> usize {
        match self {
            Theta::Majority => successors / 2 + 1,
            Theta::Count(n) => n.max(1),
        }
    }
}

impl Serialize for Theta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Theta::Majority => s.serialize_str("majority"),
            Theta::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Theta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Theta::Count(n)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Default for Theta {
    fn default() -> Self {
        Theta::Majority
    }
}

impl FromStr for Theta {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(Theta::Majority),
            _ => s
                .parse()
                .map(Theta::Count)
                .map_err(|_| format!("theta must be `majority` or a count, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entry {
    Fin(usize),
    Inf,
}

impl Entry {
    pub fn finite(self) -> Option<usize> {
        match self {
            Entry::Fin(v) => Some(v),
            Entry::Inf => None,
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Fin(v) => write!(f, "{v}"),
            Entry::Inf => f.write_str("∞"),
        }
    }
}

impl Serialize for Entry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Entry::Fin(v) => s.serialize_u64(*v as u64),
            Entry::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(Entry::Fin(v)),
            Raw::S(s) if s == "inf" || s == "∞" => Ok(Entry::Inf),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad label entry `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub Vec<Entry>);

impl Label {
    pub fn finite(values: &[usize]) -> Self {
        Label(values.iter().map(|&v| Entry::Fin(v)).collect())
    }

    pub fn infinities(&self) -> usize {
        self.0.iter().filter(|e| **e == Entry::Inf).count()
    }

    pub fn finite_prefix(&self) -> &[Entry] {
        let f = self.0.iter().take_while(|e| **e != Entry::Inf).count();
        &self.0[..f]
    }

    pub fn is_finite(&self) -> bool {
        self.infinities() == 0
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.0.get(i).and_then(|e| e.finite())
    }

    /// Infinite entries form a suffix, finite entries increase, and every
    /// finite entry is at least `k`.
    pub fn well_formed(&self, k: usize) -> bool {
        let prefix = self.finite_prefix();
        self.0[prefix.len()..].iter().all(|e| *e == Entry::Inf)
            && prefix.windows(2).all(|w| w[0] < w[1])
            && prefix.iter().all(|e| e.finite().is_some_and(|v| v >= k))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("⟩")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    WitnessTerminal,
    /// A leaf without a witness: at the depth cap, or out of reservoir.
    DepthExhausted,
    Internal,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::WitnessTerminal => "witness-terminal",
            NodeKind::DepthExhausted => "depth-exhausted",
            NodeKind::Internal => "internal",
        })
    }
}

/// A split of a node's range realizing its least value tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Witness {
    pub left: BTreeSet<usize>,
    pub right: BTreeSet<usize>,
    pub values: Vec<usize>,
    /// Largest oracle code queried by the converging computations.
    pub use_code: usize,
}

impl Witness {
    pub fn joined(&self) -> JoinedSet {
        JoinedSet::from_columns(&self.left, &self.right)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub string: Vec<usize>,
    pub kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sort: Option<BTreeSet<JoinedSet>>,
    #[serde(skip)]
    pub parent: Option<usize>,
    #[serde(skip)]
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub k: usize,
    pub gamma: OracleFunctional,
    /// Joined segment the split is added to.
    pub segment: BTreeSet<usize>,
    pub reservoir: Vec<usize>,
    pub arity: Arity,
    pub variant: Variant,
    pub depth_cap: usize,
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.reservoir.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TreeError::UnsortedReservoir);
        }
        if let Some(&min) = self.reservoir.first() {
            if let Some(element) = self.segment.iter().map(|c| c / 2).find(|&e| e >= min) {
                return Err(TreeError::SegmentAboveReservoir { element, min });
            }
        }
        Ok(())
    }

    /// Least value tuple `≥ k` whose queries all converge to 1 on `inputs`.
    pub fn least_tuple(&self, ones: &BTreeSet<usize>) -> Option<Vec<usize>> {
        let mut values = Vec::with_capacity(self.arity.len());
        let mut lo = self.k;
        for pos in 0..self.arity.len() {
            let v = match self.variant {
                Variant::Plain => ones.range(lo..).next().copied(),
                Variant::Shifted => {
                    let parity = self.variant.query(pos, 0) % 2;
                    ones.range(self.variant.query(pos, lo)..)
                        .find(|&&q| q % 2 == parity)
                        .map(|q| q / 2)
                }
            }?;
            values.push(v);
            lo = v + 1;
        }
        Some(values)
    }

    /// Least witness over splits of `range`: least value tuple first, then
    /// the split with the fewest codes, then the lexicographically least.
    pub fn witness(&self, range: &[usize]) -> Option<Witness> {
        let r = range.len();
        let mut best: Option<(Vec<usize>, usize, Vec<usize>, Witness)> = None;
        for mask in 0u64..1 << (2 * r) {
            let mut left = BTreeSet::new();
            let mut right = BTreeSet::new();
            for (i, &x) in range.iter().enumerate() {
                if mask >> (2 * i) & 1 == 1 {
                    left.insert(x);
                }
                if mask >> (2 * i + 1) & 1 == 1 {
                    right.insert(x);
                }
            }
            let joined = JoinedSet::from_columns(&left, &right);
            let oracle: BTreeSet<usize> = self.segment.union(&joined.0).copied().collect();
            let ones = self.gamma.converging_to(&oracle, 1);
            let Some(values) = self.least_tuple(&ones) else {
                continue;
            };
            let codes: Vec<usize> = joined.0.iter().copied().collect();
            let better = match &best {
                None => true,
                Some((v, size, c, _)) => (&values, codes.len(), &codes) < (v, *size, c),
            };
            if better {
                let use_code = values
                    .iter()
                    .enumerate()
                    .filter_map(|(pos, &v)| self.gamma.use_of(&oracle, self.variant.query(pos, v)))
                    .max()
                    .unwrap_or(0);
                let w = Witness {
                    left,
                    right,
                    values: values.clone(),
                    use_code,
                };
                best = Some((values, codes.len(), codes, w));
            }
        }
        best.map(|(_, _, _, w)| w)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTree {
    pub params: TreeParams,
    pub nodes: Vec<Node>,
    #[serde(skip)]
    index: HashMap<Vec<usize>, usize>,
}

pub const ROOT: usize = 0;

impl LabeledTree {
    fn from_nodes(params: TreeParams, nodes: Vec<Node>) -> Self {
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.string.clone(), i))
            .collect();
        LabeledTree {
            params,
            nodes,
            index,
        }
    }

    pub fn find(&self, string: &[usize]) -> Option<usize> {
        self.index.get(string).copied()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn get(&self, string: &[usize]) -> Result<&Node, TreeError> {
        self.find(string)
            .map(|i| &self.nodes[i])
            .ok_or_else(|| TreeError::NoSuchNode(string.to_vec()))
    }

    pub fn label(&self, id: usize) -> Option<&Label> {
        self.nodes[id].label.as_ref()
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.nodes.iter().all(|n| n.label.is_some())
    }

    /// Depth-exhausted leaves in preorder.
    pub fn exhausted_leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == NodeKind::DepthExhausted)
    }

    /// Deepest depth-exhausted leaf, lexicographically least among ties.
    pub fn deepest_exhausted_leaf(&self) -> Option<usize> {
        self.exhausted_leaves().min_by(|&a, &b| {
            let (sa, sb) = (&self.nodes[a].string, &self.nodes[b].string);
            sb.len().cmp(&sa.len()).then(sa.cmp(sb))
        })
    }

    fn add(&mut self, parent: Option<usize>, mut node: Node) -> usize {
        let id = self.nodes.len();
        node.parent = parent;
        node.children.clear();
        self.index.insert(node.string.clone(), id);
        self.nodes.push(node);
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    /// A new tree on `keep` (closed under prefixes), preserving node data.
    fn restricted(&self, keep: &[bool]) -> LabeledTree {
        let mut out = LabeledTree::from_nodes(self.params.clone(), Vec::new());
        let mut stack = vec![(ROOT, None)];
        while let Some((id, parent)) = stack.pop() {
            let new = out.add(parent, self.nodes[id].clone());
            for &c in self.nodes[id].children.iter().rev() {
                if keep[c] {
                    stack.push((c, Some(new)));
                }
            }
        }
        out
    }

    /// Graphviz rendering: one node per string, labeled `α | label | kind`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let s: Vec<String> = n.string.iter().map(usize::to_string).collect();
            let label = n
                .label
                .as_ref()
                .map_or_else(|| "-".to_string(), Label::to_string);
            let style = if n.kind == NodeKind::WitnessTerminal {
                ", style=bold"
            } else {
                ""
            };
            out.push_str(&format!(
                "  n{i} [label=\"⟨{}⟩ | {} | {}\"{style}];\n",
                s.join(","),
                label,
                n.kind
            ));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                out.push_str(&format!("  n{i} -> n{c};\n"));
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": {
                "k": self.params.k,
                "segment": self.params.segment,
                "reservoir": self.params.reservoir,
                "arity": self.params.arity,
                "variant": self.params.variant,
                "depth_cap": self.params.depth_cap,
            },
            "nodes": self.nodes,
        })
    }
}

/// Builds the tree down to `depth_cap`. Leaves without a witness are
/// depth-exhausted.
pub fn build_tree(params: &TreeParams) -> Result<LabeledTree, TreeError> {
    params.validate()?;
    let mut tree = LabeledTree::from_nodes(params.clone(), Vec::new());
    let root = Node {
        string: Vec::new(),
        kind: NodeKind::Internal,
        label: None,
        witness: None,
        sort: None,
        parent: None,
        children: Vec::new(),
    };
    let mut stack = vec![tree.add(None, root)];
    while let Some(id) = stack.pop() {
        let string = tree.nodes[id].string.clone();
        if let Some(w) = params.witness(&string) {
            tree.nodes[id].kind = NodeKind::WitnessTerminal;
            tree.nodes[id].witness = Some(w);
            continue;
        }
        let next: Vec<usize> = match string.last() {
            Some(&last) => params
                .reservoir
                .iter()
                .copied()
                .filter(|&x| x > last)
                .collect(),
            None => params.reservoir.clone(),
        };
        if string.len() >= params.depth_cap || next.is_empty() {
            tree.nodes[id].kind = NodeKind::DepthExhausted;
            continue;
        }
        let mut kids = Vec::with_capacity(next.len());
        for x in next {
            let mut s = string.clone();
            s.push(x);
            let child = Node {
                string: s,
                kind: NodeKind::Internal,
                label: None,
                witness: None,
                sort: None,
                parent: None,
                children: Vec::new(),
            };
            kids.push(tree.add(Some(id), child));
        }
        stack.extend(kids.into_iter().rev());
    }
    let all = vec![true; tree.nodes.len()];
    Ok(tree.restricted(&all))
}

/// Entry `pos` and everything left of it, for the labels in `class`.
/// With `must_be_finite` only a finite completion is acceptable.
fn determine(
    class: &[&Label],
    pos: usize,
    theta: usize,
    must_be_finite: bool,
) -> Option<Vec<Entry>> {
    let mut values: BTreeMap<usize, Vec<&Label>> = BTreeMap::new();
    for l in class {
        if let Entry::Fin(v) = l.0[pos] {
            values.entry(v).or_default().push(l);
        }
    }
    for (v, sub) in values {
        if sub.len() < theta {
            continue;
        }
        if pos == 0 {
            return Some(vec![Entry::Fin(v)]);
        }
        if let Some(mut head) = determine(&sub, pos - 1, theta, true) {
            head.push(Entry::Fin(v));
            return Some(head);
        }
    }
    if must_be_finite {
        return None;
    }
    let mut head = if pos == 0 {
        Vec::new()
    } else {
        determine(class, pos - 1, theta, false)?
    };
    head.push(Entry::Inf);
    Some(head)
}

/// Label of an internal node from its successors' labels, right to left.
pub fn combine_labels(successors: &[&Label], arity: usize, theta: Theta) -> Label {
    let t = theta.threshold(successors.len());
    Label(
        determine(successors, arity - 1, t, false)
            .expect("an unconstrained entry can always be infinite"),
    )
}

pub fn label_tree(tree: &LabeledTree, theta: Theta) -> Result<LabeledTree, TreeError> {
    if let Some(leaf) = tree.exhausted_leaves().next() {
        return Err(TreeError::Unlabelable(tree.nodes[leaf].string.clone()));
    }
    let mut out = tree.clone();
    let arity = tree.params.arity.len();
    // Children always follow their parent in the node order.
    for id in (0..out.nodes.len()).rev() {
        let label = match &out.nodes[id].witness {
            Some(w) => Label::finite(&w.values),
            None => {
                let kids: Vec<&Label> = out.nodes[id]
                    .children
                    .iter()
                    .map(|&c| out.nodes[c].label.as_ref().expect("labeled"))
                    .collect();
                combine_labels(&kids, arity, theta)
            }
        };
        out.nodes[id].label = Some(label);
    }
    Ok(out)
}

/// Successors of a node kept in the labeled subtree.
pub fn select_successors(tree: &LabeledTree, id: usize, theta: Theta) -> Vec<usize> {
    let label = tree.label(id).expect("labeled");
    let kids = tree.children(id);
    let same = || {
        kids.iter()
            .copied()
            .filter(|&c| tree.label(c) == Some(label))
            .collect()
    };
    if label.is_finite() {
        return same();
    }
    let s = kids.len();
    let t = theta.threshold(s);
    let prefix = label.finite_prefix();
    let arity = label.0.len();
    for finite in (prefix.len() + 1..=arity).rev() {
        let group: Vec<usize> = kids
            .iter()
            .copied()
            .filter(|&c| {
                let l = tree.label(c).expect("labeled");
                l.0.starts_with(prefix) && l.finite_prefix().len() == finite
            })
            .collect();
        let selected = if finite == arity {
            group.len() >= t
        } else {
            group.len() + t > s
        };
        if selected {
            let mut seen = BTreeSet::new();
            // Children are in increasing order of their last element.
            return group
                .into_iter()
                .filter(|&c| seen.insert(tree.label(c).cloned()))
                .collect();
        }
    }
    same()
}

pub fn labeled_subtree(tree: &LabeledTree, theta: Theta) -> Result<LabeledTree, TreeError> {
    if !tree.is_labeled() {
        return Err(TreeError::Unlabeled);
    }
    let mut keep = vec![false; tree.nodes.len()];
    keep[ROOT] = true;
    let mut stack = vec![ROOT];
    while let Some(id) = stack.pop() {
        if tree.nodes[id].kind != NodeKind::Internal {
            continue;
        }
        for c in select_successors(tree, id, theta) {
            keep[c] = true;
            stack.push(c);
        }
    }
    Ok(tree.restricted(&keep))
}

pub fn is_transition(tree: &LabeledTree, id: usize, revised: bool) -> bool {
    let Some(label) = tree.label(id) else {
        return false;
    };
    let inf = label.infinities();
    let kids = tree.children(id);
    inf > 0
        && !kids.is_empty()
        && kids.iter().all(|&c| {
            let ci = tree.label(c).map_or(usize::MAX, Label::infinities);
            ci < inf && (!revised || ci <= 1)
        })
}

pub fn transition_nodes(tree: &LabeledTree, revised: bool) -> BTreeSet<usize> {
    (0..tree.nodes.len())
        .filter(|&i| is_transition(tree, i, revised))
        .collect()
}

/// Sort values: a terminal node records its split; an internal node
/// collects every sort value carried by at least θ of its successors.
pub fn compute_sort(tree: &LabeledTree, theta: Theta) -> Result<LabeledTree, TreeError> {
    if tree.params.arity != Arity::Three {
        return Err(TreeError::SortNeedsThreeLabels);
    }
    let mut out = tree.clone();
    for id in (0..out.nodes.len()).rev() {
        let sort = match &out.nodes[id].witness {
            Some(w) => BTreeSet::from([w.joined()]),
            None => {
                let kids = &out.nodes[id].children;
                let t = theta.threshold(kids.len());
                let mut counts: BTreeMap<&BTreeSet<JoinedSet>, usize> = BTreeMap::new();
                for &c in kids {
                    *counts
                        .entry(out.nodes[c].sort.as_ref().expect("children first"))
                        .or_default() += 1;
                }
                counts
                    .into_iter()
                    .filter(|&(_, n)| n >= t)
                    .flat_map(|(s, _)| s.iter().cloned())
                    .collect()
            }
        };
        out.nodes[id].sort = Some(sort);
    }
    Ok(out)
}

/// How two elements sit across the columns of a sort value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    /// `x` on the right, `y` on the left.
    RightLeft,
    /// Both in one column, or one of them absent.
    SameColumn,
    /// `x` on the left, `y` on the right.
    LeftRight,
}

fn sort_at<'t>(
    tree: &'t LabeledTree,
    string: &[usize],
    x: usize,
    y: usize,
) -> Result<&'t BTreeSet<JoinedSet>, TreeError> {
    let node = tree.get(string)?;
    for e in [x, y] {
        if !string.contains(&e) {
            return Err(TreeError::NotInRange {
                node: string.to_vec(),
                x: e,
            });
        }
    }
    node.sort
        .as_ref()
        .ok_or_else(|| TreeError::NoSort(string.to_vec()))
}

fn same_column(f: &JoinedSet, x: usize, y: usize) -> bool {
    let placed = |e| f.in_left(e) || f.in_right(e);
    (f.in_left(x) && f.in_left(y)) || (f.in_right(x) && f.in_right(y)) || !placed(x) || !placed(y)
}

pub fn share_column(
    tree: &LabeledTree,
    string: &[usize],
    x: usize,
    y: usize,
) -> Result<bool, TreeError> {
    Ok(sort_at(tree, string, x, y)?
        .iter()
        .any(|f| same_column(f, x, y)))
}

pub fn configuration(
    tree: &LabeledTree,
    string: &[usize],
    x: usize,
    y: usize,
) -> Result<BTreeSet<Configuration>, TreeError> {
    let mut out = BTreeSet::new();
    for f in sort_at(tree, string, x, y)? {
        if f.in_right(x) && f.in_left(y) {
            out.insert(Configuration::RightLeft);
        }
        if same_column(f, x, y) {
            out.insert(Configuration::SameColumn);
        }
        if f.in_left(x) && f.in_right(y) {
            out.insert(Configuration::LeftRight);
        }
    }
    Ok(out)
}

/// Removes every proper extension of `string` that is not witness-terminal
/// and fails `keep`, along with everything above it.
pub fn prune(
    tree: &LabeledTree,
    string: &[usize],
    mut keep: impl FnMut(&LabeledTree, &Node) -> bool,
) -> Result<LabeledTree, TreeError> {
    let start = tree
        .find(string)
        .ok_or_else(|| TreeError::NoSuchNode(string.to_vec()))?;
    let mut alive = vec![true; tree.nodes.len()];
    let mut stack: Vec<usize> = tree.children(start).to_vec();
    while let Some(id) = stack.pop() {
        let node = &tree.nodes[id];
        if node.kind != NodeKind::WitnessTerminal && !keep(tree, node) {
            let mut doomed = vec![id];
            while let Some(d) = doomed.pop() {
                alive[d] = false;
                doomed.extend_from_slice(tree.children(d));
            }
            continue;
        }
        stack.extend_from_slice(tree.children(id));
    }
    Ok(tree.restricted(&alive))
}
