//! Finite 2-colorings of pairs and the four homogeneity predicates.
//!
//! A [`Coloring`] is total on unordered pairs below its horizon. Limit
//! annotations record a color and a stabilization point per row; an
//! annotation `(i, z)` claims `f(x, u) = i` for every `u != x` with
//! `z <= u < horizon`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum constant tail length for empirical limit detection.
pub const DEFAULT_MIN_TAIL: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColoringError {
    #[error("element {element} is outside the horizon {horizon}")]
    OutOfHorizon { element: usize, horizon: usize },
    #[error("no limit annotation for element {element}")]
    MissingLimit { element: usize },
    #[error("pair ({x}, {y}) is not a pair of distinct elements")]
    Diagonal { x: usize, y: usize },
    #[error("entry ({x}, {y}) must satisfy x < y")]
    Unordered { x: usize, y: usize },
    #[error("duplicate entry for pair ({x}, {y})")]
    DuplicateEntry { x: usize, y: usize },
    #[error("missing entry for pair ({x}, {y})")]
    MissingEntry { x: usize, y: usize },
    #[error("duplicate limit annotation for element {element}")]
    DuplicateLimit { element: usize },
    #[error("color {color} is not 0 or 1")]
    BadColor { color: u64 },
    #[error("limit annotation of {x} is contradicted at u = {u}")]
    LimitViolation { x: usize, u: usize },
    #[error("stabilization bound {stab_bound} must be below the horizon {horizon}")]
    StabBound { stab_bound: usize, horizon: usize },
    #[error("malformed coloring document: {0}")]
    Json(String),
}

/// Code of the unordered pair `{x, y}`; pairs are enumerated by their
/// larger element, so every pair below `m` has code below `m(m-1)/2`.
pub fn pair_code(x: usize, y: usize) -> usize {
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    hi * (hi - 1) / 2 + lo
}

/// Inverse of [`pair_code`], returning `(lo, hi)` with `lo < hi`.
pub fn pair_decode(code: usize) -> (usize, usize) {
    let mut hi = ((1.0 + (1.0 + 8.0 * code as f64).sqrt()) / 2.0) as usize;
    while hi * (hi - 1) / 2 > code {
        hi -= 1;
    }
    while (hi + 1) * hi / 2 <= code {
        hi += 1;
    }
    (code - hi * (hi - 1) / 2, hi)
}

/// Number of unordered pairs below `m`.
pub fn pairs_below(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Limit {
    pub color: u8,
    pub point: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    horizon: usize,
    table: Vec<u8>,
    limits: Vec<Option<Limit>>,
}

impl Coloring {
    /// Builds the coloring `f(x, y) = color(min, max)` below `horizon`.
    pub fn from_fn(horizon: usize, mut color: impl FnMut(usize, usize) -> u8) -> Self {
        let mut table = vec![0u8; pairs_below(horizon)];
        for y in 1..horizon {
            for x in 0..y {
                table[pair_code(x, y)] = color(x, y) & 1;
            }
        }
        Coloring {
            horizon,
            table,
            limits: vec![None; horizon],
        }
    }

    pub fn constant(horizon: usize, c: u8) -> Self {
        Self::from_fn(horizon, |_, _| c)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Color of the pair `{x, y}`; panics on the diagonal or outside the horizon.
    pub fn color(&self, x: usize, y: usize) -> u8 {
        assert!(
            x != y && x < self.horizon && y < self.horizon,
            "pair ({x}, {y}) not in coloring"
        );
        self.table[pair_code(x, y)]
    }

    pub fn try_color(&self, x: usize, y: usize) -> Result<u8, ColoringError> {
        if x == y {
            return Err(ColoringError::Diagonal { x, y });
        }
        self.check_element(x)?;
        self.check_element(y)?;
        Ok(self.table[pair_code(x, y)])
    }

    pub fn set_color(&mut self, x: usize, y: usize, c: u8) {
        assert!(x != y && x < self.horizon && y < self.horizon);
        self.table[pair_code(x, y)] = c & 1;
    }

    fn check_element(&self, element: usize) -> Result<(), ColoringError> {
        if element < self.horizon {
            Ok(())
        } else {
            Err(ColoringError::OutOfHorizon {
                element,
                horizon: self.horizon,
            })
        }
    }

    pub fn annotation(&self, x: usize) -> Option<Limit> {
        self.limits.get(x).copied().flatten()
    }

    pub fn has_total_limits(&self) -> bool {
        self.limits.iter().all(Option::is_some)
    }

    /// Adds a limit annotation after checking it against the table.
    pub fn annotate(&mut self, x: usize, limit: Limit) -> Result<(), ColoringError> {
        self.check_element(x)?;
        if limit.color > 1 {
            return Err(ColoringError::BadColor {
                color: limit.color as u64,
            });
        }
        for u in limit.point..self.horizon {
            if u != x && self.color(x, u) != limit.color {
                return Err(ColoringError::LimitViolation { x, u });
            }
        }
        self.limits[x] = Some(limit);
        Ok(())
    }

    /// Drops all annotations.
    pub fn clear_limits(&mut self) {
        self.limits.iter_mut().for_each(|l| *l = None);
    }

    /// All violations of the annotation invariant, as `(x, u)` pairs.
    pub fn violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for x in 0..self.horizon {
            if let Some(l) = self.annotation(x) {
                for u in l.point..self.horizon {
                    if u != x && self.color(x, u) != l.color {
                        out.push((x, u));
                    }
                }
            }
        }
        out
    }

    /// Limit of row `x`: the annotation when present, otherwise the
    /// empirical tail using [`DEFAULT_MIN_TAIL`].
    pub fn limit_color(&self, x: usize) -> Result<Option<Limit>, ColoringError> {
        self.limit_color_with_tail(x, DEFAULT_MIN_TAIL)
    }

    pub fn limit_color_with_tail(
        &self,
        x: usize,
        min_tail: usize,
    ) -> Result<Option<Limit>, ColoringError> {
        self.check_element(x)?;
        if let Some(l) = self.annotation(x) {
            return Ok(Some(l));
        }
        Ok(self.empirical_limit(x, min_tail))
    }

    /// Least `z` such that the row of `x` is constant on `[z, horizon)`,
    /// provided that tail holds at least `min_tail` entries.
    pub fn empirical_limit(&self, x: usize, min_tail: usize) -> Option<Limit> {
        let last = (0..self.horizon).rev().find(|&u| u != x)?;
        let c = self.color(x, last);
        let z = (0..last)
            .rev()
            .find(|&u| u != x && self.color(x, u) != c)
            .map_or(0, |u| u + 1);
        let len = (z..self.horizon).filter(|&u| u != x).count();
        (len >= min_tail.max(1)).then_some(Limit { color: c, point: z })
    }

    pub fn to_file(&self) -> ColoringFile {
        let mut entries = Vec::with_capacity(self.table.len());
        for y in 1..self.horizon {
            for x in 0..y {
                entries.push([x as u64, y as u64, self.color(x, y) as u64]);
            }
        }
        entries.sort_unstable();
        let limits = (0..self.horizon)
            .filter_map(|x| {
                self.annotation(x)
                    .map(|l| [x as u64, l.color as u64, l.point as u64])
            })
            .collect();
        ColoringFile {
            horizon: self.horizon as u64,
            entries,
            limits,
        }
    }

    pub fn from_file(file: &ColoringFile) -> Result<Self, ColoringError> {
        let horizon = file.horizon as usize;
        let mut seen = vec![false; pairs_below(horizon)];
        let mut coloring = Coloring::constant(horizon, 0);
        for &[x, y, c] in &file.entries {
            let (x, y) = (x as usize, y as usize);
            if x >= y {
                return Err(ColoringError::Unordered { x, y });
            }
            coloring.check_element(y)?;
            if c > 1 {
                return Err(ColoringError::BadColor { color: c });
            }
            let code = pair_code(x, y);
            if seen[code] {
                return Err(ColoringError::DuplicateEntry { x, y });
            }
            seen[code] = true;
            coloring.table[code] = c as u8;
        }
        if let Some(code) = seen.iter().position(|s| !s) {
            let (x, y) = pair_decode(code);
            return Err(ColoringError::MissingEntry { x, y });
        }
        for &[x, c, z] in &file.limits {
            let x = x as usize;
            coloring.check_element(x)?;
            if coloring.annotation(x).is_some() {
                return Err(ColoringError::DuplicateLimit { element: x });
            }
            if c > 1 {
                return Err(ColoringError::BadColor { color: c });
            }
            coloring.annotate(
                x,
                Limit {
                    color: c as u8,
                    point: z as usize,
                },
            )?;
        }
        Ok(coloring)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ColoringError> {
        let file: ColoringFile =
            serde_json::from_str(s).map_err(|e| ColoringError::Json(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("coloring serializes")
    }
}

/// On-disk form: `{"horizon": N, "entries": [[x, y, c], ...], "limits": [[x, i, z], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringFile {
    pub horizon: u64,
    pub entries: Vec<[u64; 3]>,
    #[serde(default)]
    pub limits: Vec<[u64; 3]>,
}

/// A finite set read through the join coding: `2x` is `x` in the left
/// column, `2y + 1` is `y` in the right column.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JoinedSet(pub BTreeSet<usize>);

impl JoinedSet {
    pub fn new(elements: impl IntoIterator<Item = usize>) -> Self {
        JoinedSet(elements.into_iter().collect())
    }

    pub fn from_columns<'a>(
        left: impl IntoIterator<Item = &'a usize>,
        right: impl IntoIterator<Item = &'a usize>,
    ) -> Self {
        let mut s: BTreeSet<usize> = left.into_iter().map(|x| 2 * x).collect();
        s.extend(right.into_iter().map(|y| 2 * y + 1));
        JoinedSet(s)
    }

    pub fn decode(&self) -> (BTreeSet<usize>, BTreeSet<usize>) {
        decode_join(&self.0)
    }

    pub fn left(&self) -> BTreeSet<usize> {
        self.0
            .iter()
            .filter(|c| *c % 2 == 0)
            .map(|c| c / 2)
            .collect()
    }

    pub fn right(&self) -> BTreeSet<usize> {
        self.0
            .iter()
            .filter(|c| *c % 2 == 1)
            .map(|c| c / 2)
            .collect()
    }

    pub fn in_left(&self, x: usize) -> bool {
        self.0.contains(&(2 * x))
    }

    pub fn in_right(&self, x: usize) -> bool {
        self.0.contains(&(2 * x + 1))
    }

    pub fn union(&self, other: &JoinedSet) -> JoinedSet {
        JoinedSet(self.0.union(&other.0).copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn decode_join(z: &BTreeSet<usize>) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let left = z.iter().filter(|c| *c % 2 == 0).map(|c| c / 2).collect();
    let right = z.iter().filter(|c| *c % 2 == 1).map(|c| c / 2).collect();
    (left, right)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Homog,
    PHomog,
    IncrPHomog,
    LimitHomog,
}

impl std::str::FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "homog" => Ok(Kind::Homog),
            "p-homog" => Ok(Kind::PHomog),
            "incr-p-homog" => Ok(Kind::IncrPHomog),
            "limit-homog" => Ok(Kind::LimitHomog),
            other => Err(format!("unknown homogeneity kind `{other}`")),
        }
    }
}

/// Outcome of a homogeneity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Homogeneity {
    Color(u8),
    /// No pair to inspect; holds with no witnessing color.
    Vacuous,
    /// The first pair (or pair of elements, for limits) that disagrees
    /// with the color of the first inspected one.
    Fails {
        x: usize,
        y: usize,
    },
}

impl Homogeneity {
    pub fn color(self) -> Option<u8> {
        match self {
            Homogeneity::Color(c) => Some(c),
            _ => None,
        }
    }

    pub fn holds(self) -> bool {
        !matches!(self, Homogeneity::Fails { .. })
    }

    /// True when the set is homogeneous with color `c` or vacuously so.
    pub fn admits(self, c: u8) -> bool {
        match self {
            Homogeneity::Color(d) => d == c,
            Homogeneity::Vacuous => true,
            Homogeneity::Fails { .. } => false,
        }
    }
}

fn constant_over(f: &Coloring, pairs: impl Iterator<Item = (usize, usize)>) -> Homogeneity {
    let mut first = None;
    for (x, y) in pairs {
        let c = f.color(x, y);
        match first {
            None => first = Some(c),
            Some(d) if d != c => return Homogeneity::Fails { x, y },
            _ => {}
        }
    }
    first.map_or(Homogeneity::Vacuous, Homogeneity::Color)
}

/// Decides `kind` for `set`. For the two p-kinds `set` is read as a
/// joined set; otherwise it is a plain set of elements.
pub fn check_homogeneity(
    f: &Coloring,
    set: &BTreeSet<usize>,
    kind: Kind,
) -> Result<Homogeneity, ColoringError> {
    match kind {
        Kind::Homog => {
            for &x in set {
                f.check_element(x)?;
            }
            let v: Vec<usize> = set.iter().copied().collect();
            let pairs = (0..v.len()).flat_map(|i| (i + 1..v.len()).map(move |j| (i, j)));
            Ok(constant_over(f, pairs.map(|(i, j)| (v[i], v[j]))))
        }
        Kind::PHomog | Kind::IncrPHomog => {
            let (left, right) = decode_join(set);
            for &x in left.iter().chain(right.iter()) {
                f.check_element(x)?;
            }
            let increasing = kind == Kind::IncrPHomog;
            let pairs = left
                .iter()
                .flat_map(|&x| right.iter().map(move |&y| (x, y)));
            Ok(constant_over(
                f,
                pairs.filter(|&(x, y)| if increasing { x < y } else { x != y }),
            ))
        }
        Kind::LimitHomog => {
            let mut first: Option<(usize, u8)> = None;
            for &x in set {
                f.check_element(x)?;
                let l = f
                    .annotation(x)
                    .ok_or(ColoringError::MissingLimit { element: x })?;
                match first {
                    None => first = Some((x, l.color)),
                    Some((x0, c)) if c != l.color => return Ok(Homogeneity::Fails { x: x0, y: x }),
                    _ => {}
                }
            }
            Ok(first.map_or(Homogeneity::Vacuous, |(_, c)| Homogeneity::Color(c)))
        }
    }
}

/// A random coloring whose rows all carry limit annotations with
/// stabilization points at most `stab_bound`. Deterministic in `seed`.
pub fn random_stable_coloring(
    seed: u64,
    horizon: usize,
    stab_bound: usize,
) -> Result<Coloring, ColoringError> {
    if stab_bound >= horizon {
        return Err(ColoringError::StabBound {
            stab_bound,
            horizon,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = stab_bound;
    let tail_color: u8 = rng.gen_range(0..2);
    let mut limits = Vec::with_capacity(horizon);
    // Rows below s stabilize strictly after themselves, so two such rows
    // never constrain the same pair.
    for x in 0..s {
        let color = rng.gen_range(0..2);
        let point = rng.gen_range(x + 1..=s);
        limits.push(Limit { color, point });
    }
    // Rows at or above s share one color; their stabilization point must
    // clear every lower row whose limit color differs.
    let clear = (0..s)
        .filter(|&x| limits[x].color != tail_color)
        .map(|x| x + 1)
        .max()
        .unwrap_or(0);
    for _ in s..horizon {
        let point = rng.gen_range(clear..=s);
        limits.push(Limit {
            color: tail_color,
            point,
        });
    }
    let mut f = Coloring::from_fn(horizon, |_, _| rng.gen_range(0..2));
    for y in 1..horizon {
        for x in 0..y {
            if y >= limits[x].point {
                f.set_color(x, y, limits[x].color);
            } else if x >= limits[y].point {
                f.set_color(x, y, limits[y].color);
            }
        }
    }
    for (x, l) in limits.into_iter().enumerate() {
        f.annotate(x, l)?;
    }
    Ok(f)
}
