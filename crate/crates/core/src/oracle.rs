//! Independent checks: slack of a dominator on the sample, and exact
//! feasibility of the domination system by Fourier–Motzkin elimination.

use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::hyperplane::{AffineSelector, Instance, RecursionTrace};
use crate::numerics::{Point, PointSet, Rational, Scalar};

/// `coeffs · v >= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

/// Nonnegative multipliers of original constraints whose combination has all
/// coefficients zero and a positive right-hand side, i.e. `0 >= bound > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub multipliers: Vec<(usize, Rational)>,
    pub bound: Rational,
}

impl Certificate {
    /// Recombines `rows` and returns the constant `c < 0` of the contradiction
    /// `0 <= c`, or `None` if the certificate does not replay.
    pub fn replay(&self, rows: &[Constraint]) -> Option<Rational> {
        let nv = rows.first().map_or(0, |r| r.coeffs.len());
        let mut coeffs = vec![<Rational as Zero>::zero(); nv];
        let mut rhs = <Rational as Zero>::zero();
        for (i, lambda) in &self.multipliers {
            if lambda.is_negative() {
                return None;
            }
            let row = rows.get(*i)?;
            for (acc, c) in coeffs.iter_mut().zip(&row.coeffs) {
                *acc += lambda * c;
            }
            rhs += lambda * &row.rhs;
        }
        if coeffs.iter().all(Zero::is_zero) && rhs.is_positive() && rhs == self.bound {
            Some(-rhs)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness: Option<Vec<Rational>>,
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<Rational>,
    rhs: Rational,
    mult: Vec<Rational>,
}

impl Row {
    fn support(&self) -> usize {
        self.mult.iter().filter(|m| !m.is_zero()).count()
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Scales so the first nonzero coefficient has absolute value 1.
    fn normalize(mut self) -> Self {
        if let Some(lead) = self.coeffs.iter().find(|c| !c.is_zero()).map(Signed::abs) {
            if !lead.is_one() {
                for c in self.coeffs.iter_mut().chain(self.mult.iter_mut()) {
                    *c /= &lead;
                }
                self.rhs /= &lead;
            }
        }
        self
    }

    fn certificate(&self) -> Certificate {
        Certificate {
            multipliers: self
                .mult
                .iter()
                .enumerate()
                .filter(|(_, m)| !m.is_zero())
                .map(|(i, m)| (i, m.clone()))
                .collect(),
            bound: self.rhs.clone(),
        }
    }
}

fn cmp_coeffs(a: &[Rational], b: &[Rational]) -> Ordering {
    a.iter().cmp(b.iter())
}

/// Drops trivially satisfied constant rows; returns a certificate on a violated one.
fn screen(rows: Vec<Row>) -> std::result::Result<Vec<Row>, Certificate> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.is_constant() {
            if row.rhs.is_positive() {
                return Err(row.certificate());
            }
        } else {
            out.push(row);
        }
    }
    Ok(out)
}

/// Among rows with equal coefficients, drops a row when another one has a
/// right-hand side at least as large and a history (support of the
/// multipliers) contained in its own. Keeping histories minimal is what makes
/// the support bound below safe.
fn prune_duplicates(mut rows: Vec<Row>) -> Vec<Row> {
    rows.sort_by(|a, b| {
        cmp_coeffs(&a.coeffs, &b.coeffs)
            .then_with(|| b.rhs.cmp(&a.rhs))
            .then_with(|| a.support().cmp(&b.support()))
    });
    let history_within = |small: &Row, big: &Row| {
        small
            .mult
            .iter()
            .zip(&big.mult)
            .all(|(s, b)| s.is_zero() || !b.is_zero())
    };
    let mut out: Vec<Row> = Vec::with_capacity(rows.len());
    let mut group_start = 0;
    for row in rows {
        if out.last().is_none_or(|last| last.coeffs != row.coeffs) {
            group_start = out.len();
        }
        let dominated = out[group_start..]
            .iter()
            .any(|kept| kept.rhs >= row.rhs && history_within(kept, &row));
        if !dominated {
            out.push(row);
        }
    }
    out
}

/// Decides `exists v: coeffs·v >= rhs for every row` and returns a witness or a certificate.
///
/// Variables are eliminated from last to first. Besides duplicate pruning,
/// a row combining more than `e + 1` originals after `e` eliminations is
/// dropped (Chernikov's rule); such rows are implied by the others.
pub fn solve_system(rows: &[Constraint]) -> FeasibilityResult {
    let nv = rows.first().map_or(0, |r| r.coeffs.len());
    let m = rows.len();
    let initial: Vec<Row> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut mult = vec![<Rational as Zero>::zero(); m];
            mult[i] = <Rational as One>::one();
            Row {
                coeffs: r.coeffs.clone(),
                rhs: r.rhs.clone(),
                mult,
            }
            .normalize()
        })
        .collect();
    let infeasible = |cert: Certificate| FeasibilityResult {
        feasible: false,
        witness: None,
        certificate: Some(cert),
    };
    let mut current = match screen(initial) {
        Ok(rows) => prune_duplicates(rows),
        Err(cert) => return infeasible(cert),
    };

    let mut stages: Vec<Vec<Row>> = vec![Vec::new(); nv];
    for j in (0..nv).rev() {
        let eliminated = nv - j;
        let (mut pos, mut neg, mut next) = (Vec::new(), Vec::new(), Vec::new());
        for row in &current {
            match row.coeffs[j].cmp(&<Rational as Zero>::zero()) {
                Ordering::Greater => pos.push(row),
                Ordering::Less => neg.push(row),
                Ordering::Equal => next.push(row.clone()),
            }
        }
        for p in &pos {
            for q in &neg {
                let lp = -q.coeffs[j].clone();
                let lq = p.coeffs[j].clone();
                let combine = |a: &[Rational], b: &[Rational]| -> Vec<Rational> {
                    a.iter().zip(b).map(|(x, y)| &lp * x + &lq * y).collect()
                };
                let mut coeffs = combine(&p.coeffs, &q.coeffs);
                coeffs[j] = <Rational as Zero>::zero();
                let row = Row {
                    coeffs,
                    rhs: &lp * &p.rhs + &lq * &q.rhs,
                    mult: combine(&p.mult, &q.mult),
                }
                .normalize();
                if row.support() <= eliminated + 1 {
                    next.push(row);
                }
            }
        }
        stages[j] = std::mem::take(&mut current);
        current = match screen(next) {
            Ok(rows) => prune_duplicates(rows),
            Err(cert) => return infeasible(cert),
        };
    }

    let mut witness: Vec<Rational> = Vec::with_capacity(nv);
    for (j, stage) in stages.iter().enumerate() {
        let mut lo: Option<Rational> = None;
        let mut hi: Option<Rational> = None;
        for row in stage {
            let c = &row.coeffs[j];
            if c.is_zero() {
                continue;
            }
            let rest: Rational = row.coeffs[..j]
                .iter()
                .zip(&witness)
                .map(|(a, v)| a * v)
                .sum();
            let bound = (&row.rhs - rest) / c;
            if c.is_positive() {
                lo = Some(lo.map_or(bound.clone(), |v| v.max(bound)));
            } else {
                hi = Some(hi.map_or(bound.clone(), |v| v.min(bound)));
            }
        }
        let v = match (lo, hi) {
            (Some(a), Some(b)) => {
                debug_assert!(a <= b, "empty residual interval");
                (a + b) / Rational::from_int(2)
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => <Rational as Zero>::zero(),
        };
        witness.push(v);
    }
    FeasibilityResult {
        feasible: true,
        witness: Some(witness),
        certificate: None,
    }
}

fn exact_values<S: Scalar>(values: &[S]) -> Result<Vec<Rational>> {
    values
        .iter()
        .map(|v| v.to_rational().ok_or(Error::RequiresExact))
        .collect()
}

/// Rows `b·y + c >= f(y)` (unknowns `b_1..b_n, c`) or `a·y >= f(y)` when homogeneous.
pub fn domination_constraints<S: Scalar>(
    points: &PointSet<S>,
    values: &[S],
    homogeneous: bool,
) -> Result<Vec<Constraint>> {
    if !S::EXACT {
        return Err(Error::RequiresExact);
    }
    if values.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: values.len(),
        });
    }
    let vals = exact_values(values)?;
    let mut rows: Vec<Constraint> = points
        .iter()
        .zip(vals)
        .map(|(p, v)| {
            let mut coeffs = exact_values(p.coords())?;
            if !homogeneous {
                coeffs.push(<Rational as One>::one());
            }
            Ok(Constraint { coeffs, rhs: v })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| cmp_coeffs(&a.coeffs, &b.coeffs).then_with(|| a.rhs.cmp(&b.rhs)));
    Ok(rows)
}

/// Per-parameter feasibility of affine (or, if `homogeneous`, linear) domination.
pub fn fm_feasible<S: Scalar>(
    points: &PointSet<S>,
    values: &[Vec<S>],
    homogeneous: bool,
) -> Result<Vec<FeasibilityResult>> {
    values
        .iter()
        .map(|row| {
            let rows = domination_constraints(points, row, homogeneous)?;
            if rows.is_empty() {
                let nv = points.dim() + usize::from(!homogeneous);
                return Ok(FeasibilityResult {
                    feasible: true,
                    witness: Some(vec![<Rational as Zero>::zero(); nv]),
                    certificate: None,
                });
            }
            Ok(solve_system(&rows))
        })
        .collect()
}

/// Deterministic exact linear dominator `A(x)` per parameter.
pub fn exact_linear_select<S: Scalar>(inst: &Instance<S>) -> Result<Vec<Point<S>>> {
    let results = fm_feasible(&inst.y, &inst.f, true)?;
    let mut bad = Vec::new();
    let mut out = Vec::with_capacity(results.len());
    for (x, res) in results.into_iter().enumerate() {
        match (res.feasible, res.witness, res.certificate) {
            (true, Some(w), _) => out.push(Point(w.iter().map(S::from_rational).collect())),
            (_, _, cert) => {
                let bound = cert.map_or_else(|| "?".to_string(), |c| (-c.bound).to_string());
                bad.push(format!("{} (0 <= {})", inst.x_ids[x], bound));
            }
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::Infeasible(bad))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominationKind {
    Affine,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlackSummary<S> {
    /// `None` when the sample is empty.
    pub min_slack: Option<S>,
    pub argmin: Option<usize>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport<S> {
    pub kind: DominationKind,
    pub per_x: Vec<SlackSummary<S>>,
    pub passed: bool,
}

/// Checks `f(x, y) <= coeffs(x)·y + offset(x)` on the whole sample.
///
/// `offset` is `C` for affine selectors and the residual `ε` for linear ones.
pub fn verify_domination<S: Scalar>(
    inst: &Instance<S>,
    coeffs: &[Point<S>],
    offset: &[S],
    kind: DominationKind,
) -> Result<DominationReport<S>> {
    verify_points(&inst.y, &inst.f, coeffs, offset, kind)
}

pub fn verify_affine<S: Scalar>(
    inst: &Instance<S>,
    sel: &AffineSelector<S>,
) -> Result<DominationReport<S>> {
    verify_domination(inst, &sel.b, &sel.c, DominationKind::Affine)
}

/// Same check on an arbitrary point set with `values[x][i]`.
pub fn verify_points<S: Scalar>(
    points: &PointSet<S>,
    values: &[Vec<S>],
    coeffs: &[Point<S>],
    offset: &[S],
    kind: DominationKind,
) -> Result<DominationReport<S>> {
    if coeffs.len() != values.len() || offset.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: coeffs.len().min(offset.len()),
        });
    }
    if let Some(b) = coeffs.iter().find(|b| b.dim() != points.dim()) {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            found: b.dim(),
        });
    }
    let per_x: Vec<SlackSummary<S>> = values
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let mut summary = SlackSummary {
                min_slack: None,
                argmin: None,
                passed: true,
            };
            for (i, y) in points.iter().enumerate() {
                let rhs = y.dot(coeffs[x].coords()) + offset[x].clone();
                if !row[i].at_most(&rhs) {
                    summary.passed = false;
                }
                let slack = rhs - row[i].clone();
                let better = summary
                    .min_slack
                    .as_ref()
                    .is_none_or(|m| slack.total_cmp(m) == Ordering::Less);
                if better {
                    summary.min_slack = Some(slack);
                    summary.argmin = Some(i);
                }
            }
            summary
        })
        .collect();
    let passed = per_x.iter().all(|s| s.passed);
    Ok(DominationReport {
        kind,
        per_x,
        passed,
    })
}

/// Outcome of checking a selector against every recorded working table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkingCheck {
    pub points_checked: usize,
    pub violations: usize,
}

/// Checks `F_k(x, w) <= Σ_{i<=k} B_i(x) w_i + C(x)` on every recorded level table.
///
/// The trace must have been produced with `record_tables` set.
pub fn verify_working_tables<S: Scalar>(
    sel: &AffineSelector<S>,
    trace: &RecursionTrace<S>,
) -> Result<WorkingCheck> {
    let mut check = WorkingCheck {
        points_checked: 0,
        violations: 0,
    };
    let tables = trace
        .levels
        .iter()
        .map(|lv| lv.table.as_ref())
        .chain(std::iter::once(trace.base_table.as_ref()));
    for table in tables {
        let table =
            table.ok_or_else(|| Error::InvalidInput("trace has no recorded tables".into()))?;
        let k = table.dim();
        for (x, row) in table.values.iter().enumerate() {
            for (i, w) in table.points.iter().enumerate() {
                let rhs = w.dot(&sel.b[x].coords()[..k]) + sel.c[x].clone();
                check.points_checked += 1;
                if !row[i].at_most(&rhs) {
                    check.violations += 1;
                }
            }
        }
    }
    Ok(check)
}
