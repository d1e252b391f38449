//! Uniform translations between solutions of the four principles, and
//! the registry of which reductions hold.
//!
//! Solutions are finite prefixes. A prefix counts as a solution when it
//! could still be an initial segment of an infinite one given the limit
//! annotations of `f`: see [`is_solution`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{
    check_homogeneity, decode_join, Coloring, ColoringError, Homogeneity, JoinedSet, Kind,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("no right element above the least left element {left:?}")]
    InsufficientWitness { left: Option<usize> },
    #[error("input is not a valid {principle} solution: {reason}")]
    Precondition {
        principle: Principle,
        reason: String,
    },
    #[error("no translation from {from} solutions to {to} solutions")]
    UnknownPair { from: Principle, to: Principle },
    #[error(transparent)]
    Coloring(#[from] ColoringError),
}

/// Ordered from weakest to strongest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Principle {
    #[serde(rename = "D")]
    D,
    #[serde(rename = "SIPT")]
    Sipt,
    #[serde(rename = "SPT")]
    Spt,
    #[serde(rename = "SRT")]
    Srt,
}

impl Principle {
    pub const ALL: [Principle; 4] = [
        Principle::D,
        Principle::Sipt,
        Principle::Spt,
        Principle::Srt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Principle::D => "D",
            Principle::Sipt => "SIPT",
            Principle::Spt => "SPT",
            Principle::Srt => "SRT",
        }
    }
}

impl fmt::Display for Principle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Principle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().trim_end_matches("22") {
            "D" => Ok(Principle::D),
            "SIPT" => Ok(Principle::Sipt),
            "SPT" => Ok(Principle::Spt),
            "SRT" => Ok(Principle::Srt),
            _ => Err(format!("unknown principle `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Notion {
    #[serde(rename = "c")]
    Computable,
    #[serde(rename = "W")]
    Weihrauch,
    #[serde(rename = "sc")]
    StrongComputable,
    #[serde(rename = "sW")]
    StrongWeihrauch,
}

impl Notion {
    pub const ALL: [Notion; 4] = [
        Notion::Computable,
        Notion::Weihrauch,
        Notion::StrongComputable,
        Notion::StrongWeihrauch,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Notion::Computable => "c",
            Notion::Weihrauch => "W",
            Notion::StrongComputable => "sc",
            Notion::StrongWeihrauch => "sW",
        }
    }

    /// Notions directly implied by this one.
    pub fn implies(self) -> &'static [Notion] {
        match self {
            Notion::StrongWeihrauch => &[Notion::StrongComputable, Notion::Weihrauch],
            Notion::StrongComputable | Notion::Weihrauch => &[Notion::Computable],
            Notion::Computable => &[],
        }
    }
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Notion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches("<=").trim_start_matches('≤') {
            "c" => Ok(Notion::Computable),
            "W" | "w" => Ok(Notion::Weihrauch),
            "sc" => Ok(Notion::StrongComputable),
            "sW" | "sw" => Ok(Notion::StrongWeihrauch),
            _ => Err(format!("unknown reduction notion `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Reflexive,
    Direct,
    /// Obtained from direct entries by transitivity.
    Composition,
    /// Obtained from another notion through the implication diagram.
    Implication,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub lhs: Principle,
    pub rhs: Principle,
    pub notion: Notion,
    pub holds: bool,
    pub basis: Basis,
    pub citation: String,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.holds { "holds" } else { "fails" };
        write!(
            f,
            "{} <={} {}: {} ({})",
            self.lhs, self.notion, self.rhs, verdict, self.citation
        )
    }
}

/// Entry `(P, Q, notion)` records whether `P <=notion Q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMatrix {
    pub entries: Vec<Relation>,
}

const EASY_CHAIN: &str = "solution translation D <=sW SIPT <=sW SPT <=sW SRT";
const IPT_TO_HOMOG: &str =
    "uniform homogeneous set from an increasing p-homogeneous set and the coloring";
const EQUIVALENT_C: &str = "computable equivalence of the four principles (literature)";
const SRT_NOT_W_D: &str = "SRT not W-reducible to D (literature)";
const SIPT_NOT_SC_D: &str =
    "coding coloring whose every increasing p-homogeneous set computes the halting set";
const SRT_NOT_SC_SPT: &str = "forcing and three-label tree diagonalization against SPT";
const SPT_NOT_SC_SIPT: &str = "forcing and parity-shifted tree diagonalization against SIPT";

impl RelationMatrix {
    pub fn get(&self, lhs: Principle, rhs: Principle, notion: Notion) -> &Relation {
        self.entries
            .iter()
            .find(|r| r.lhs == lhs && r.rhs == rhs && r.notion == notion)
            .expect("matrix is total")
    }

    /// Entries that break the implication diagram: a holding entry whose
    /// implied entry fails.
    pub fn closure_violations(&self) -> Vec<(Relation, Relation)> {
        let mut out = Vec::new();
        for r in self.entries.iter().filter(|r| r.holds) {
            for &weaker in r.notion.implies() {
                let w = self.get(r.lhs, r.rhs, weaker);
                if !w.holds {
                    out.push((r.clone(), w.clone()));
                }
            }
        }
        out
    }
}

fn entry(lhs: Principle, rhs: Principle, notion: Notion) -> Relation {
    let make = |holds: bool, basis: Basis, citation: &str| Relation {
        lhs,
        rhs,
        notion,
        holds,
        basis,
        citation: citation.to_string(),
    };
    if lhs == rhs {
        return make(true, Basis::Reflexive, "identity");
    }
    let adjacent = (lhs as usize).abs_diff(rhs as usize) == 1;
    let chained = if adjacent {
        Basis::Direct
    } else {
        Basis::Composition
    };
    if lhs < rhs {
        return make(true, chained, EASY_CHAIN);
    }
    match notion {
        Notion::Computable => make(true, Basis::Implication, EQUIVALENT_C),
        Notion::Weihrauch if rhs == Principle::D => {
            if lhs == Principle::Srt {
                make(false, Basis::Direct, SRT_NOT_W_D)
            } else {
                make(false, Basis::Composition, SRT_NOT_W_D)
            }
        }
        Notion::Weihrauch => make(true, chained, IPT_TO_HOMOG),
        Notion::StrongComputable | Notion::StrongWeihrauch => {
            let cite = match (lhs, rhs) {
                (Principle::Sipt, Principle::D) => SIPT_NOT_SC_D,
                (Principle::Spt, Principle::Sipt) => SPT_NOT_SC_SIPT,
                (Principle::Srt, Principle::Spt) => SRT_NOT_SC_SPT,
                (_, Principle::D) => SIPT_NOT_SC_D,
                _ => SRT_NOT_SC_SPT,
            };
            let basis = match (notion, adjacent) {
                (Notion::StrongWeihrauch, _) => Basis::Implication,
                (_, true) => Basis::Direct,
                (_, false) => Basis::Composition,
            };
            make(false, basis, cite)
        }
    }
}

pub fn relation_matrix() -> RelationMatrix {
    let mut entries = Vec::with_capacity(64);
    for lhs in Principle::ALL {
        for rhs in Principle::ALL {
            for notion in Notion::ALL {
                entries.push(entry(lhs, rhs, notion));
            }
        }
    }
    RelationMatrix { entries }
}

/// Result of the greedy enumeration of a homogeneous subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Greedy {
    pub picks: Vec<usize>,
    /// Some element of `L` was rejected; at a finite horizon this means
    /// its row had not yet stabilized, not that the input was invalid.
    pub exhausted: bool,
}

impl Greedy {
    pub fn set(&self) -> BTreeSet<usize> {
        self.picks.iter().copied().collect()
    }
}

/// Scans `l` upwards, keeping each element that leaves the picks
/// homogeneous with color `i`.
pub fn limit_to_homogeneous(
    f: &Coloring,
    l: &BTreeSet<usize>,
    i: u8,
) -> Result<Greedy, ReductionError> {
    match check_homogeneity(f, l, Kind::LimitHomog)? {
        h if h.admits(i) => {}
        h => {
            return Err(ReductionError::Precondition {
                principle: Principle::D,
                reason: format!("not limit homogeneous with color {i}: {h:?}"),
            })
        }
    }
    let mut picks: Vec<usize> = Vec::new();
    let mut exhausted = false;
    for &x in l {
        if picks.iter().all(|&h| f.color(h, x) == i) {
            picks.push(x);
        } else {
            exhausted = true;
        }
    }
    Ok(Greedy { picks, exhausted })
}

pub fn homogeneous_to_p(h: &BTreeSet<usize>) -> JoinedSet {
    JoinedSet::from_columns(h, h)
}

/// Homogeneous set from an increasing p-homogeneous one: the color of the
/// least increasing cross pair is the limit color of the left column.
pub fn ipt_to_homogeneous(f: &Coloring, z: &BTreeSet<usize>) -> Result<Greedy, ReductionError> {
    let (left, right) = decode_join(z);
    let i0 = *left
        .first()
        .ok_or(ReductionError::InsufficientWitness { left: None })?;
    let i1 = *right
        .range(i0 + 1..)
        .next()
        .ok_or(ReductionError::InsufficientWitness { left: Some(i0) })?;
    if !is_solution(f, Principle::Sipt, z)? {
        return Err(ReductionError::Precondition {
            principle: Principle::Sipt,
            reason: "not increasing p-homogeneous with matching left limits".into(),
        });
    }
    limit_to_homogeneous(f, &left, f.try_color(i0, i1)?)
}

fn limits_agree(f: &Coloring, xs: &BTreeSet<usize>, c: u8) -> Result<bool, ReductionError> {
    Ok(check_homogeneity(f, xs, Kind::LimitHomog)?.admits(c))
}

/// Whether `set` can be a prefix of an infinite solution of `principle`
/// for `f`. Beyond the homogeneity predicate this asks that every element
/// whose limit an infinite solution determines has the witnessing color.
pub fn is_solution(
    f: &Coloring,
    principle: Principle,
    set: &BTreeSet<usize>,
) -> Result<bool, ReductionError> {
    let (left, right) = decode_join(set);
    let ok = match principle {
        Principle::D => check_homogeneity(f, set, Kind::LimitHomog)?.holds(),
        Principle::Srt => match check_homogeneity(f, set, Kind::Homog)? {
            Homogeneity::Color(c) => limits_agree(f, set, c)?,
            h => h.holds(),
        },
        Principle::Spt => match check_homogeneity(f, set, Kind::PHomog)? {
            Homogeneity::Color(c) => limits_agree(f, &left.union(&right).copied().collect(), c)?,
            h => h.holds(),
        },
        Principle::Sipt => match check_homogeneity(f, set, Kind::IncrPHomog)? {
            Homogeneity::Color(c) => limits_agree(f, &left, c)?,
            h => h.holds(),
        },
    };
    Ok(ok)
}

/// Translates a solution for a stronger principle into one for a weaker
/// principle without consulting `f`.
pub fn forward_chain(
    from: Principle,
    to: Principle,
    solution: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, ReductionError> {
    if from < to {
        return Err(ReductionError::UnknownPair { from, to });
    }
    let mut cur = solution.clone();
    let mut at = from;
    while at > to {
        cur = match at {
            Principle::Srt => homogeneous_to_p(&cur).0,
            Principle::Spt => cur,
            Principle::Sipt => decode_join(&cur).0,
            Principle::D => unreachable!("D is the weakest principle"),
        };
        at = Principle::ALL[at as usize - 1];
    }
    Ok(cur)
}

/// Translates any solution into a solution of `to`, using `f` where the
/// translation goes upwards.
pub fn translate(
    f: &Coloring,
    from: Principle,
    to: Principle,
    solution: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, ReductionError> {
    if from >= to {
        return forward_chain(from, to, solution);
    }
    let homogeneous = match from {
        Principle::D => {
            let c = match check_homogeneity(f, solution, Kind::LimitHomog)? {
                Homogeneity::Color(c) => c,
                Homogeneity::Vacuous => return Ok(solution.clone()),
                Homogeneity::Fails { .. } => {
                    return Err(ReductionError::Precondition {
                        principle: Principle::D,
                        reason: "not limit homogeneous".into(),
                    })
                }
            };
            limit_to_homogeneous(f, solution, c)?.set()
        }
        Principle::Sipt | Principle::Spt => ipt_to_homogeneous(f, solution)?.set(),
        Principle::Srt => unreachable!("SRT is the strongest principle"),
    };
    forward_chain(Principle::Srt, to, &homogeneous)
}
