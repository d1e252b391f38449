//! Forcing conditions: a finite coloring `σ` of pairs below `n` with a
//! limit promise `l(x) = (i, z)` per element.
//!
//! `l(x) = (i, z)` requires `σ(x, y) = i` for every `y != x` with
//! `z <= y < n`. Extension is prolongation: the longer condition keeps
//! every `σ` value and every `l` value of the shorter one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{pair_code, pair_decode, pairs_below, Coloring, ColoringError, Limit};
use crate::functional::Oracle;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForcingError {
    #[error("condition is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("button ({a}, {b}) cannot be pressed: all three values are already fixed and equal")]
    PressBlocked { a: usize, b: usize },
    #[error("no completion of length {target} satisfies the requested constraints")]
    Infeasible { target: usize },
    #[error("target length {target} must exceed {needed}")]
    TargetTooShort { target: usize, needed: usize },
    #[error("condition {index} of the chain does not extend its predecessor")]
    NotAChain { index: usize },
    #[error("empty chain")]
    EmptyChain,
    #[error("button triple needs a < b, got ({a}, {b})")]
    BadTriple { a: usize, b: usize },
    #[error("malformed condition document: {0}")]
    Json(String),
    #[error(transparent)]
    Coloring(#[from] ColoringError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Violation {
    /// `σ(x, y)` contradicts `l(x)`.
    Pair {
        x: usize,
        y: usize,
    },
    MissingLimit {
        x: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    n: usize,
    sigma: Vec<u8>,
    l: Vec<Option<Limit>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ButtonTriple {
    pub x: usize,
    pub a: usize,
    pub b: usize,
}

impl ButtonTriple {
    pub fn new(x: usize, a: usize, b: usize) -> Result<Self, ForcingError> {
        if a >= b {
            return Err(ForcingError::BadTriple { a, b });
        }
        Ok(ButtonTriple { x, a, b })
    }
}

impl Condition {
    pub fn empty() -> Self {
        Condition {
            n: 0,
            sigma: Vec::new(),
            l: Vec::new(),
        }
    }

    /// Builds a condition without validating it.
    pub fn from_parts(
        n: usize,
        mut sigma: impl FnMut(usize, usize) -> u8,
        l: Vec<Option<Limit>>,
    ) -> Self {
        assert_eq!(l.len(), n, "one limit slot per element");
        let mut table = vec![0; pairs_below(n)];
        for y in 1..n {
            for x in 0..y {
                table[pair_code(x, y)] = sigma(x, y);
            }
        }
        Condition { n, sigma: table, l }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sigma(&self, x: usize, y: usize) -> Option<u8> {
        (x != y && x.max(y) < self.n).then(|| self.sigma[pair_code(x, y)])
    }

    pub fn limit(&self, x: usize) -> Option<Limit> {
        self.l.get(x).copied().flatten()
    }

    pub fn limit_color(&self, x: usize) -> Option<u8> {
        self.limit(x).map(|l| l.color)
    }

    pub(crate) fn set_limit(&mut self, x: usize, limit: Limit) {
        self.l[x] = Some(limit);
    }

    /// Color of `{x, y}` in every generic coloring through this condition,
    /// when that is already determined.
    pub fn determined(&self, x: usize, y: usize) -> Option<u8> {
        if x == y {
            return None;
        }
        if x.max(y) < self.n {
            return self.sigma(x, y);
        }
        let v = x.min(y);
        let w = x.max(y);
        self.limit(v).filter(|l| l.point <= w).map(|l| l.color)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for x in 0..self.n {
            match self.limit(x) {
                None => out.push(Violation::MissingLimit { x }),
                Some(l) => out.extend(self.row_violations(x, l)),
            }
        }
        out
    }

    fn row_violations(&self, x: usize, l: Limit) -> impl Iterator<Item = Violation> + '_ {
        (l.point..self.n)
            .filter(move |&y| y != x && self.sigma[pair_code(x, y)] != l.color)
            .map(move |y| Violation::Pair { x, y })
    }

    /// As [`Condition::violations`], but an absent limit is allowed.
    pub fn partial_violations(&self) -> Vec<Violation> {
        self.violations()
            .into_iter()
            .filter(|v| !matches!(v, Violation::MissingLimit { .. }))
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    /// Both values of button `t` once committed.
    pub fn press_values(&self, t: &ButtonTriple) -> Option<[u8; 3]> {
        Some([
            self.sigma(t.a, t.b)?,
            self.limit_color(t.a)?,
            self.limit_color(t.b)?,
        ])
    }

    pub fn restrict(&self, m: usize) -> Condition {
        let m = m.min(self.n);
        Condition {
            n: m,
            sigma: self.sigma[..pairs_below(m)].to_vec(),
            l: self.l[..m].to_vec(),
        }
    }

    pub fn to_file(&self) -> ConditionFile {
        let mut sigma = Vec::with_capacity(self.sigma.len());
        for y in 1..self.n {
            for x in 0..y {
                sigma.push([x, y, self.sigma[pair_code(x, y)] as usize]);
            }
        }
        let l = (0..self.n)
            .filter_map(|x| self.limit(x).map(|l| [x, l.color as usize, l.point]))
            .collect();
        ConditionFile {
            n: self.n,
            sigma,
            l,
        }
    }

    /// Loads a condition; with `partial` the limit map may have gaps.
    pub fn from_file(file: &ConditionFile, partial: bool) -> Result<Self, ForcingError> {
        let n = file.n;
        let mut table: Vec<Option<u8>> = vec![None; pairs_below(n)];
        for &[x, y, c] in &file.sigma {
            if x >= y {
                return Err(ColoringError::Unordered { x, y }.into());
            }
            if y >= n {
                return Err(ColoringError::OutOfHorizon {
                    element: y,
                    horizon: n,
                }
                .into());
            }
            if c > 1 {
                return Err(ColoringError::BadColor { color: c as u64 }.into());
            }
            let slot = &mut table[pair_code(x, y)];
            if slot.replace(c as u8).is_some() {
                return Err(ColoringError::DuplicateEntry { x, y }.into());
            }
        }
        if let Some(code) = table.iter().position(Option::is_none) {
            let (x, y) = pair_decode(code);
            return Err(ColoringError::MissingEntry { x, y }.into());
        }
        let mut l = vec![None; n];
        for &[x, i, z] in &file.l {
            if x >= n {
                return Err(ColoringError::OutOfHorizon {
                    element: x,
                    horizon: n,
                }
                .into());
            }
            if i > 1 {
                return Err(ColoringError::BadColor { color: i as u64 }.into());
            }
            if l[x]
                .replace(Limit {
                    color: i as u8,
                    point: z,
                })
                .is_some()
            {
                return Err(ColoringError::DuplicateLimit { element: x }.into());
            }
        }
        let p = Condition {
            n,
            sigma: table.into_iter().map(|c| c.unwrap_or(0)).collect(),
            l,
        };
        let bad = if partial {
            p.partial_violations()
        } else {
            p.violations()
        };
        if bad.is_empty() {
            Ok(p)
        } else {
            Err(ForcingError::Invalid(bad))
        }
    }

    pub fn from_json_str(s: &str, partial: bool) -> Result<Self, ForcingError> {
        let file: ConditionFile =
            serde_json::from_str(s).map_err(|e| ForcingError::Json(e.to_string()))?;
        Self::from_file(&file, partial)
    }
}

impl Oracle for Condition {
    fn query(&self, code: usize) -> Option<bool> {
        let (x, y) = pair_decode(code);
        self.determined(x, y).map(|c| c == 1)
    }
}

/// On-disk form: `{"n": int, "sigma": [[x, y, c]], "l": [[x, i, z]]}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionFile {
    pub n: usize,
    #[serde(default)]
    pub sigma: Vec<[usize; 3]>,
    #[serde(default)]
    pub l: Vec<[usize; 3]>,
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = ConditionFile::deserialize(d)?;
        Condition::from_file(&file, true).map_err(serde::de::Error::custom)
    }
}

pub fn validate_condition(p: &Condition) -> Vec<Violation> {
    p.violations()
}

/// Whether `q` prolongs `p`. Both must be valid up to absent limits.
pub fn extends(q: &Condition, p: &Condition) -> Result<bool, ForcingError> {
    for c in [q, p] {
        let bad = c.partial_violations();
        if !bad.is_empty() {
            return Err(ForcingError::Invalid(bad));
        }
    }
    Ok(extends_unchecked(q, p))
}

pub(crate) fn extends_unchecked(q: &Condition, p: &Condition) -> bool {
    q.n >= p.n
        && q.sigma[..p.sigma.len()] == p.sigma[..]
        && (0..p.n).all(|x| p.l[x].is_none() || p.l[x] == q.l[x])
}

/// `σ(a, b)` and the limit colors of `a` and `b` are committed and not
/// all equal. Uncommitted values mean not pressed.
pub fn press_check(q: &Condition, t: &ButtonTriple) -> bool {
    q.press_values(t)
        .is_some_and(|[s, la, lb]| !(s == la && la == lb))
}

/// Least stabilization point for color `c` on the row of `v` in a
/// condition of length `t`.
fn least_point(sigma: &[u8], v: usize, c: u8, t: usize) -> usize {
    (0..t)
        .rev()
        .find(|&w| w != v && sigma[pair_code(v, w)] != c)
        .map_or(0, |w| w + 1)
}

/// Constraints for [`complete`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Completion {
    pub target: usize,
    /// Pairs `(a, b)` whose `σ(a, b)`, `l(a)₀`, `l(b)₀` must not be all equal.
    pub not_all_equal: Vec<(usize, usize)>,
    /// Required limit colors.
    pub pinned: BTreeMap<usize, u8>,
    /// First color tried for every other uncommitted limit.
    pub default_color: u8,
    /// Decide limit colors first and try each row's limit color before 0
    /// for its new pairs.
    pub eager: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Sigma(usize),
    Color(usize),
}

/// The lexicographically least valid prolongation of `q` to
/// `spec.target` meeting `spec`: new `σ` values in `(x, y)` order with 0
/// first, then uncommitted limit colors with the default first. An eager
/// spec reverses the two passes. Each new limit takes the least point its
/// row allows.
pub fn complete(q: &Condition, spec: &Completion) -> Result<Condition, ForcingError> {
    let t = spec.target;
    let n = q.n;
    if t < n {
        return Err(ForcingError::TargetTooShort {
            target: t,
            needed: n,
        });
    }
    if let Some(&(a, b)) = spec
        .not_all_equal
        .iter()
        .find(|&&(a, b)| a.max(b) >= t || a == b)
    {
        return Err(ForcingError::TargetTooShort {
            target: t,
            needed: a.max(b) + 1,
        });
    }
    let mut sigma = vec![None::<u8>; pairs_below(t)];
    for (code, &c) in q.sigma.iter().enumerate() {
        sigma[code] = Some(c);
    }
    let mut colors: Vec<Option<u8>> = (0..t).map(|v| q.limit_color(v)).collect();
    for (&v, &c) in &spec.pinned {
        if v >= t {
            return Err(ForcingError::TargetTooShort {
                target: t,
                needed: v + 1,
            });
        }
        match colors[v] {
            Some(d) if d != c => return Err(ForcingError::Infeasible { target: t }),
            _ => colors[v] = Some(c),
        }
    }
    for y in n..t {
        for x in 0..y {
            if let Some(l) = q.limit(x).filter(|l| l.point <= y) {
                sigma[pair_code(x, y)] = Some(l.color);
            }
        }
    }
    let feasible = |sigma: &[Option<u8>], colors: &[Option<u8>]| -> bool {
        let mut free: BTreeSet<Var> = BTreeSet::new();
        for &(a, b) in &spec.not_all_equal {
            let code = pair_code(a, b);
            if sigma[code].is_none() {
                free.insert(Var::Sigma(code));
            }
            for v in [a, b] {
                if colors[v].is_none() {
                    free.insert(Var::Color(v));
                }
            }
        }
        let free: Vec<Var> = free.into_iter().collect();
        (0u64..1 << free.len()).any(|mask| {
            let value = |var: Var| -> u8 {
                match free.iter().position(|&f| f == var) {
                    Some(k) => (mask >> k & 1) as u8,
                    None => match var {
                        Var::Sigma(code) => sigma[code].expect("fixed"),
                        Var::Color(v) => colors[v].expect("fixed"),
                    },
                }
            };
            spec.not_all_equal.iter().all(|&(a, b)| {
                let vals = [
                    value(Var::Sigma(pair_code(a, b))),
                    value(Var::Color(a)),
                    value(Var::Color(b)),
                ];
                !(vals[0] == vals[1] && vals[1] == vals[2])
            })
        })
    };
    if !feasible(&sigma, &colors) {
        return Err(match spec.not_all_equal.as_slice() {
            [(a, b)] => ForcingError::PressBlocked { a: *a, b: *b },
            _ => ForcingError::Infeasible { target: t },
        });
    }
    let mut order: Vec<(usize, usize)> = (n..t).flat_map(|y| (0..y).map(move |x| (x, y))).collect();
    order.sort_unstable();
    let assign_colors = |sigma: &[Option<u8>], colors: &mut Vec<Option<u8>>| {
        for v in 0..t {
            if colors[v].is_none() {
                colors[v] = Some(spec.default_color);
                if !feasible(sigma, colors) {
                    colors[v] = Some(1 - spec.default_color);
                }
            }
        }
    };
    if spec.eager {
        assign_colors(&sigma, &mut colors);
    }
    for (x, y) in order {
        let code = pair_code(x, y);
        if sigma[code].is_none() {
            let first = if spec.eager {
                colors[x].unwrap_or(0)
            } else {
                0
            };
            sigma[code] = Some(first);
            if !feasible(&sigma, &colors) {
                sigma[code] = Some(1 - first);
            }
        }
    }
    assign_colors(&sigma, &mut colors);
    let sigma: Vec<u8> = sigma
        .into_iter()
        .map(|c| c.expect("every pair assigned"))
        .collect();
    let l = (0..t)
        .map(|v| match q.limit(v) {
            Some(l) => Some(l),
            None => {
                let c = colors[v].expect("every color assigned");
                Some(Limit {
                    color: c,
                    point: least_point(&sigma, v, c, t),
                })
            }
        })
        .collect();
    Ok(Condition { n: t, sigma, l })
}

/// The least prolongation of `q` to `target` that presses `t`.
pub fn extend_pressing(
    q: &Condition,
    t: &ButtonTriple,
    target: usize,
) -> Result<Condition, ForcingError> {
    extend_not_all_equal(q, &[(t.a, t.b)], target)
}

/// The least prolongation of `q` to `target` in which every listed pair
/// has `σ(a, b)`, `l(a)₀`, `l(b)₀` not all equal.
pub fn extend_not_all_equal(
    q: &Condition,
    pairs: &[(usize, usize)],
    target: usize,
) -> Result<Condition, ForcingError> {
    let spec = Completion {
        target,
        not_all_equal: pairs.to_vec(),
        ..Completion::default()
    };
    complete(q, &spec)
}

/// The coloring given by the last condition of a descending chain.
pub fn assemble_coloring(chain: &[Condition]) -> Result<Coloring, ForcingError> {
    let last = chain.last().ok_or(ForcingError::EmptyChain)?;
    for (i, w) in chain.windows(2).enumerate() {
        if !extends(&w[1], &w[0])? {
            return Err(ForcingError::NotAChain { index: i + 1 });
        }
    }
    let mut f = Coloring::from_fn(last.n, |x, y| last.sigma[pair_code(x, y)]);
    for x in 0..last.n {
        if let Some(l) = last.limit(x) {
            if last.row_violations(x, l).next().is_none() {
                f.annotate(x, l)?;
            }
        }
    }
    Ok(f)
}
