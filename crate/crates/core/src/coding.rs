//! Coding a staged enumeration into a coloring whose increasing
//! p-homogeneous sets of color 1 recover the enumerated set.
//!
//! Row `x` is colored 0 on pairs closer than the largest modulus at or
//! below `x`, and 1 beyond, so a color-1 pair `(x, y)` certifies that
//! stage `y - x` is already correct below `x`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{decode_join, Coloring, ColoringError, Limit};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodingError {
    #[error("{z} is outside the domain {domain}")]
    OutOfDomain { z: usize, domain: usize },
    #[error("stage {stage} drops element {element}")]
    NotMonotone { stage: usize, element: usize },
    #[error("stage {stage} lists {element}, outside the domain {domain}")]
    StageElement {
        stage: usize,
        element: usize,
        domain: usize,
    },
    #[error("an approximation needs at least one stage")]
    NoStages,
    #[error("horizon {0} is too small; at least 2 is required")]
    DegenerateHorizon(usize),
    #[error("solution has no {missing} for z = {z}")]
    InsufficientSolution { z: usize, missing: &'static str },
    #[error("malformed approximation document: {0}")]
    Json(String),
    #[error(transparent)]
    Coloring(#[from] ColoringError),
}

/// A monotone staged enumeration `X_0 ⊆ X_1 ⊆ ... ⊆ X_S` of a subset of
/// `{0, ..., domain - 1}`; the last stage is the final set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ApproximationFile", into = "ApproximationFile")]
pub struct CEApproximation {
    domain: usize,
    stages: Vec<BTreeSet<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproximationFile {
    pub domain: usize,
    pub stages: Vec<Vec<usize>>,
}

impl TryFrom<ApproximationFile> for CEApproximation {
    type Error = CodingError;
    fn try_from(file: ApproximationFile) -> Result<Self, CodingError> {
        CEApproximation::new(
            file.domain,
            file.stages
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        )
    }
}

impl From<CEApproximation> for ApproximationFile {
    fn from(a: CEApproximation) -> Self {
        ApproximationFile {
            domain: a.domain,
            stages: a
                .stages
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        }
    }
}

impl CEApproximation {
    pub fn new(domain: usize, stages: Vec<BTreeSet<usize>>) -> Result<Self, CodingError> {
        if stages.is_empty() {
            return Err(CodingError::NoStages);
        }
        for (s, stage) in stages.iter().enumerate() {
            if let Some(&element) = stage.range(domain..).next() {
                return Err(CodingError::StageElement {
                    stage: s,
                    element,
                    domain,
                });
            }
            if s > 0 {
                if let Some(&element) = stages[s - 1].difference(stage).next() {
                    return Err(CodingError::NotMonotone { stage: s, element });
                }
            }
        }
        Ok(CEApproximation { domain, stages })
    }

    pub fn from_json_str(s: &str) -> Result<Self, CodingError> {
        let file: ApproximationFile =
            serde_json::from_str(s).map_err(|e| CodingError::Json(e.to_string()))?;
        file.try_into()
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn stages(&self) -> &[BTreeSet<usize>] {
        &self.stages
    }

    pub fn last_stage(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn final_set(&self) -> &BTreeSet<usize> {
        &self.stages[self.last_stage()]
    }

    /// Stage `s`, clamped to the last stage.
    pub fn stage(&self, s: usize) -> &BTreeSet<usize> {
        &self.stages[s.min(self.last_stage())]
    }

    /// Least stage after which membership below `z + 1` never changes.
    pub fn least_modulus(&self, z: usize) -> Result<usize, CodingError> {
        if z >= self.domain {
            return Err(CodingError::OutOfDomain {
                z,
                domain: self.domain,
            });
        }
        let window = |s: &BTreeSet<usize>| s.range(..=z).count();
        let last = window(self.final_set());
        // Monotone stages: the window is settled once its size is final.
        Ok(self
            .stages
            .iter()
            .position(|s| window(s) == last)
            .expect("the final stage matches itself"))
    }

    /// `max{μ(z) : z <= x}`, with `z` ranging over the domain only.
    pub fn modulus_bound(&self, x: usize) -> usize {
        if self.domain == 0 {
            return 0;
        }
        let top = x.min(self.domain - 1);
        (0..=top)
            .map(|z| self.least_modulus(z).expect("z is inside the domain"))
            .max()
            .unwrap_or(0)
    }
}

/// Coding coloring below `horizon`, annotated with its limits: row `x`
/// settles on color 1 from `x + bound(x) + 1` on.
pub fn build_coding_coloring(a: &CEApproximation, horizon: usize) -> Result<Coloring, CodingError> {
    if horizon < 2 {
        return Err(CodingError::DegenerateHorizon(horizon));
    }
    let bounds: Vec<usize> = (0..horizon).map(|x| a.modulus_bound(x)).collect();
    let mut f = Coloring::from_fn(horizon, |x, y| u8::from(y - x > bounds[x]));
    for (x, &m) in bounds.iter().enumerate() {
        f.annotate(
            x,
            Limit {
                color: 1,
                point: x + m + 1,
            },
        )?;
    }
    Ok(f)
}

/// Reads membership of `z` off a color-1 increasing p-homogeneous set.
pub fn decode_membership(
    a: &CEApproximation,
    z_set: &BTreeSet<usize>,
    z: usize,
) -> Result<bool, CodingError> {
    if z >= a.domain() {
        return Err(CodingError::OutOfDomain {
            z,
            domain: a.domain(),
        });
    }
    let (left, right) = decode_join(z_set);
    let x = *left
        .range(z..)
        .next()
        .ok_or(CodingError::InsufficientSolution {
            z,
            missing: "left element",
        })?;
    let y = *right
        .range(x + 1..)
        .next()
        .ok_or(CodingError::InsufficientSolution {
            z,
            missing: "right element",
        })?;
    Ok(a.stage(y - x).contains(&z))
}

/// A random monotone approximation with `stages` stages over `domain`.
pub fn random_approximation(seed: u64, domain: usize, stages: usize) -> CEApproximation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entry: Vec<Option<usize>> = (0..domain)
        .map(|_| rng.gen_bool(0.5).then(|| rng.gen_range(0..stages.max(1))))
        .collect();
    let stages = (0..stages.max(1))
        .map(|s| {
            (0..domain)
                .filter(|&z| entry[z].is_some_and(|e| e <= s))
                .collect()
        })
        .collect();
    CEApproximation::new(domain, stages).expect("entry stages are monotone")
}
