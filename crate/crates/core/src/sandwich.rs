//! One-dimensional insertion of a function between a lower and an upper bound.
//!
//! The staged construction works in four layers: indicator separation, simple
//! functions on a finite value grid, dyadic approximation of bounded functions,
//! and truncation of unbounded ones. Separation always picks the smallest
//! admissible set, so every stage is a deterministic function of its inputs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Values of a function on a finite, ordered parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteFunction<S> {
    pub ids: Vec<String>,
    pub values: Vec<S>,
}

impl<S: Scalar> FiniteFunction<S> {
    pub fn new(ids: Vec<String>, values: Vec<S>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: values.len(),
            });
        }
        Ok(FiniteFunction { ids, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How a set `B` with `A ⊆ B ⊆ C` is chosen. Only the lower choice exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparationChoice {
    #[default]
    Lower,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SandwichMode {
    #[default]
    Midpoint,
    Staged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichConfig {
    pub mode: SandwichMode,
    pub depth: u32,
}

impl SandwichConfig {
    pub const DEFAULT_DEPTH: u32 = 24;
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            mode: SandwichMode::Midpoint,
            depth: Self::DEFAULT_DEPTH,
        }
    }
}

/// Picks `B` with `A ⊆ B ⊆ C`; subsets are membership masks over the same domain.
pub fn separate(a: &[bool], c: &[bool]) -> Result<Vec<bool>> {
    separate_with(a, c, SeparationChoice::Lower)
}

pub fn separate_with(a: &[bool], c: &[bool], choice: SeparationChoice) -> Result<Vec<bool>> {
    if a.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: c.len(),
        });
    }
    if let Some(index) = a.iter().zip(c).position(|(&in_a, &in_c)| in_a && !in_c) {
        return Err(Error::SeparationViolated { index });
    }
    match choice {
        SeparationChoice::Lower => Ok(a.to_vec()),
    }
}

fn grid_index<S: Scalar>(grid: &[S], v: &S) -> Option<usize> {
    if S::EXACT {
        grid.binary_search_by(|g| g.total_cmp(v)).ok()
    } else {
        grid.iter().position(|g| g.coord_eq(v))
    }
}

/// Inserts a grid-valued function between grid-valued `u <= l`.
///
/// With `A_i = {u >= y_i}` and `C_i = {l >= y_i}`, separates each pair, forms the
/// tail unions `B'_k`, and returns `sum_i y_i 1_{D_i}` with `D_i = B'_i \ B'_{i+1}`.
pub fn insert_simple<S: Scalar>(u: &[S], l: &[S], grid: &[S]) -> Result<Vec<S>> {
    if u.len() != l.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: l.len(),
        });
    }
    if grid
        .windows(2)
        .any(|w| w[0].total_cmp(&w[1]) != Ordering::Less)
    {
        return Err(Error::UnsortedGrid);
    }
    let levels = |f: &[S]| -> Result<Vec<usize>> {
        f.iter()
            .enumerate()
            .map(|(index, v)| grid_index(grid, v).ok_or(Error::OffGrid { index }))
            .collect()
    };
    let ul = levels(u)?;
    let ll = levels(l)?;
    if let Some(i) = ul.iter().zip(&ll).position(|(a, b)| a > b) {
        return Err(Error::BracketViolated {
            x: format!("x#{i}"),
        });
    }

    let n = grid.len();
    let m = u.len();
    // Tail unions, built from the top level down.
    let mut tails: Vec<Vec<bool>> = vec![vec![false; m]; n + 1];
    for k in (0..n).rev() {
        let a_k: Vec<bool> = ul.iter().map(|&t| t >= k).collect();
        let c_k: Vec<bool> = ll.iter().map(|&t| t >= k).collect();
        let b_k = separate(&a_k, &c_k)?;
        tails[k] = tails[k + 1]
            .iter()
            .zip(&b_k)
            .map(|(&above, &here)| above || here)
            .collect();
    }
    let mut f = vec![S::zero(); m];
    for (i, y) in grid.iter().enumerate() {
        for x in 0..m {
            if tails[i][x] && !tails[i + 1][x] {
                f[x] = y.clone();
            }
        }
    }
    Ok(f)
}

fn check_unit<S: Scalar>(u: &[S]) -> Result<()> {
    let (zero, one) = (S::zero(), S::one());
    match u.iter().position(|v| {
        v.total_cmp(&zero) == Ordering::Less || v.total_cmp(&one) == Ordering::Greater
    }) {
        Some(index) => Err(Error::OutsideUnitInterval { index }),
        None => Ok(()),
    }
}

/// Largest `t / 2^depth` not exceeding each value of a `[0, 1]`-valued function.
pub fn dyadic_lower<S: Scalar>(u: &[S], depth: u32) -> Result<Vec<S>> {
    check_unit(u)?;
    let scale = S::pow2(depth);
    Ok(u.iter()
        .map(|v| {
            let t = (v.clone() * scale.clone()).floor().min_of(scale.clone());
            t / scale.clone()
        })
        .collect())
}

/// Smallest `t / 2^depth` not below each value of a `[0, 1]`-valued function.
pub fn dyadic_upper<S: Scalar>(l: &[S], depth: u32) -> Result<Vec<S>> {
    check_unit(l)?;
    let scale = S::pow2(depth);
    Ok(l.iter()
        .map(|v| {
            let t = (v.clone() * scale.clone()).ceil().max_of(S::zero());
            t / scale.clone()
        })
        .collect())
}

/// `max(-level, min(u, level))` pointwise.
pub fn truncate<S: Scalar>(u: &[S], level: &S) -> Vec<S> {
    u.iter()
        .map(|v| v.clone().min_of(level.clone()).max_of(-level.clone()))
        .collect()
}

/// Result of a sandwich run, with the range used by the staged rescale.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichOutcome<S> {
    pub values: Vec<S>,
    /// Width of the interval mapped onto `[0, 1]` by the staged mode; 1 in midpoint mode.
    pub range: S,
}

fn check_bracket<S: Scalar>(u: &[S], l: &[S]) -> Result<()> {
    if u.len() != l.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: l.len(),
        });
    }
    match u.iter().zip(l).position(|(a, b)| !a.at_most(b)) {
        Some(i) => Err(Error::BracketViolated {
            x: format!("x#{i}"),
        }),
        None => Ok(()),
    }
}

/// Returns `f` with `u <= f <= l` (midpoint) or its staged approximation.
pub fn sandwich<S: Scalar>(u: &[S], l: &[S], config: SandwichConfig) -> Result<SandwichOutcome<S>> {
    check_bracket(u, l)?;
    match config.mode {
        SandwichMode::Midpoint => {
            let two = S::from_int(2);
            Ok(SandwichOutcome {
                values: u
                    .iter()
                    .zip(l)
                    .map(|(a, b)| (a.clone() + b.clone()) / two.clone())
                    .collect(),
                range: S::one(),
            })
        }
        SandwichMode::Staged => staged(u, l, config.depth),
    }
}

/// Same as [`sandwich`] but errors name parameters by id.
pub fn sandwich_functions<S: Scalar>(
    u: &FiniteFunction<S>,
    l: &FiniteFunction<S>,
    config: SandwichConfig,
) -> Result<(FiniteFunction<S>, S)> {
    if u.ids != l.ids {
        return Err(Error::InvalidInput(
            "lower and upper functions have different domains".into(),
        ));
    }
    let out = sandwich(&u.values, &l.values, config).map_err(|e| match e {
        Error::BracketViolated { x } => {
            let i: usize = x.trim_start_matches("x#").parse().unwrap_or(0);
            Error::BracketViolated {
                x: u.ids.get(i).cloned().unwrap_or(x),
            }
        }
        other => other,
    })?;
    Ok((
        FiniteFunction {
            ids: u.ids.clone(),
            values: out.values,
        },
        out.range,
    ))
}

fn staged<S: Scalar>(u: &[S], l: &[S], depth: u32) -> Result<SandwichOutcome<S>> {
    if u.is_empty() {
        return Ok(SandwichOutcome {
            values: Vec::new(),
            range: S::one(),
        });
    }
    // Truncation at `level` is the identity once level >= max |value|, so the
    // truncated sequence is constant from there on and that stage is its limit.
    let level = u
        .iter()
        .chain(l)
        .map(|v| v.abs())
        .fold(S::one(), S::max_of)
        .ceil();
    let u = truncate(u, &level);
    let l = truncate(l, &level);

    let lo = u.iter().chain(&l).cloned().fold(u[0].clone(), S::min_of);
    let hi = u.iter().chain(&l).cloned().fold(u[0].clone(), S::max_of);
    let in_unit =
        lo.total_cmp(&S::zero()) != Ordering::Less && hi.total_cmp(&S::one()) != Ordering::Greater;
    let (offset, range) = if in_unit {
        (S::zero(), S::one())
    } else {
        (lo.clone(), hi - lo)
    };
    if range.is_zero_exact() {
        return Ok(SandwichOutcome {
            values: u,
            range: S::zero(),
        });
    }
    let to_unit = |f: &[S]| -> Vec<S> {
        f.iter()
            .map(|v| {
                ((v.clone() - offset.clone()) / range.clone())
                    .max_of(S::zero())
                    .min_of(S::one())
            })
            .collect()
    };
    let (u01, l01) = (to_unit(&u), to_unit(&l));

    let mut best: Option<Vec<S>> = None;
    for n in 1..=depth.max(1) {
        let un = dyadic_lower(&u01, n)?;
        let ln = dyadic_upper(&l01, n)?;
        let mut grid: Vec<S> = un.iter().chain(&ln).cloned().collect();
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
        let fn_ = insert_simple(&un, &ln, &grid)?;
        best = Some(match best {
            None => fn_,
            Some(prev) => prev
                .into_iter()
                .zip(fn_)
                .map(|(a, b)| a.max_of(b))
                .collect(),
        });
    }
    let values = best
        .expect("at least one stage")
        .into_iter()
        .map(|v| offset.clone() + v * range.clone())
        .collect();
    Ok(SandwichOutcome { values, range })
}

/// Smallest positive integer not below each value: `max(1, ceil(u))`.
pub fn ceiling_cover<S: Scalar>(u: &[S]) -> Vec<S> {
    u.iter().map(|v| v.ceil().max_of(S::one())).collect()
}
