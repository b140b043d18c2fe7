//! Per-parameter affine dominators `f(x, y) <= B(x)·y + C(x)` by induction on
//! the dimension.
//!
//! Each level splits the working points by the sign of the last coordinate,
//! pushes every chord between a positive and a negative point down onto the
//! hyperplane `y_k = 0`, solves the `(k-1)`-dimensional problem there, and then
//! picks the last coefficient inside the bracket `[U(x), L(x)]` that the
//! lower-dimensional solution leaves open.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    drop_last, split_by_last_coordinate, LastCoordinateSplit, Point, PointSet, PointTable, Scalar,
};
use crate::sandwich::{ceiling_cover, sandwich, SandwichConfig, SandwichMode};

/// A finite selection problem: parameters `X`, sample `Y ⊂ Q^n` and the value
/// table `f(x, y)`, optionally with a feature map and per-parameter base points.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<S> {
    pub n: usize,
    pub x_ids: Vec<String>,
    pub y: PointSet<S>,
    /// `f[x][i]` is the value at parameter `x` and point `y.get(i)`.
    pub f: Vec<Vec<S>>,
    /// Feature image of each point of `y`, aligned with its order.
    pub phi: Option<Vec<Point<S>>>,
    /// Base point per parameter.
    pub y0: Option<Vec<Point<S>>>,
}

impl<S: Scalar> Instance<S> {
    /// Canonicalizes `points` (sorted, duplicates merged by max) and reorders
    /// the value rows accordingly. Rows are aligned with the input order.
    pub fn new(
        n: usize,
        x_ids: Vec<String>,
        points: Vec<Point<S>>,
        rows: Vec<Vec<S>>,
    ) -> Result<Self> {
        Self::with_extras(n, x_ids, points, rows, None, None)
    }

    pub fn with_extras(
        n: usize,
        x_ids: Vec<String>,
        points: Vec<Point<S>>,
        rows: Vec<Vec<S>>,
        phi: Option<Vec<Point<S>>>,
        y0: Option<Vec<Point<S>>>,
    ) -> Result<Self> {
        if rows.len() != x_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: x_ids.len(),
                found: rows.len(),
            });
        }
        for row in &rows {
            if row.len() != points.len() {
                return Err(Error::DimensionMismatch {
                    expected: points.len(),
                    found: row.len(),
                });
            }
        }
        if let Some(phi) = &phi {
            if phi.len() != points.len() {
                return Err(Error::PhiNotTotal(format!(
                    "{} images for {} points",
                    phi.len(),
                    points.len()
                )));
            }
            if let Some(m) = phi.first().map(Point::dim) {
                if phi.iter().any(|z| z.dim() != m) {
                    return Err(Error::PhiNotTotal("images of mixed dimension".into()));
                }
            }
        }
        if let Some(y0) = &y0 {
            if y0.len() != x_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: x_ids.len(),
                    found: y0.len(),
                });
            }
            if let Some(p) = y0.iter().find(|p| p.dim() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                });
            }
        }

        let mut order: Vec<usize> = (0..points.len()).collect();
        for p in &points {
            if p.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                });
            }
        }
        order.sort_by(|&a, &b| points[a].cmp_lex(&points[b]));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match groups.last_mut() {
                Some(g) if points[g[0]].same_as(&points[i]) => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let canon: Vec<Point<S>> = groups.iter().map(|g| points[g[0]].clone()).collect();
        let f = rows
            .iter()
            .map(|row| {
                groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(|&i| row[i].clone())
                            .reduce(S::max_of)
                            .expect("non-empty group")
                    })
                    .collect()
            })
            .collect();
        let phi = match phi {
            None => None,
            Some(phi) => {
                let mut out = Vec::with_capacity(groups.len());
                for g in &groups {
                    let z = &phi[g[0]];
                    if g.iter().any(|&i| !phi[i].same_as(z)) {
                        return Err(Error::PhiNotTotal(
                            "duplicate sample points with different images".into(),
                        ));
                    }
                    out.push(z.clone());
                }
                Some(out)
            }
        };
        let y = PointSet::from_points(n, canon)?;
        Ok(Instance {
            n,
            x_ids,
            y,
            f,
            phi,
            y0,
        })
    }

    pub fn nx(&self) -> usize {
        self.x_ids.len()
    }

    /// Instance restricted to the listed parameters, in the given order.
    pub fn select_parameters(&self, xs: &[usize]) -> Self {
        Instance {
            n: self.n,
            x_ids: xs.iter().map(|&x| self.x_ids[x].clone()).collect(),
            y: self.y.clone(),
            f: xs.iter().map(|&x| self.f[x].clone()).collect(),
            phi: self.phi.clone(),
            y0: self
                .y0
                .as_ref()
                .map(|v| xs.iter().map(|&x| v[x].clone()).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointOrigin {
    Original,
    Generated,
}

/// Point cloud of one recursion level with its values. Points outside the
/// table evaluate to `-‖w‖²` in the level's own coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkingTable<S> {
    pub points: PointSet<S>,
    /// `values[x][i]`.
    pub values: Vec<Vec<S>>,
    pub origin: Vec<PointOrigin>,
}

impl<S: Scalar> WorkingTable<S> {
    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn nx(&self) -> usize {
        self.values.len()
    }

    /// Extended evaluation: stored value, or `-‖w‖²` off the table.
    pub fn eval(&self, x: usize, w: &Point<S>) -> S {
        match self.points.position(w) {
            Some(i) => self.values[x][i].clone(),
            None => -w.norm_sq(),
        }
    }
}

/// Working table of the top level: `W = Y` with the instance values.
pub fn extend_domain<S: Scalar>(inst: &Instance<S>) -> WorkingTable<S> {
    WorkingTable {
        points: inst.y.clone(),
        values: inst.f.clone(),
        origin: vec![PointOrigin::Original; inst.y.len()],
    }
}

fn check_signs<S: Scalar>(y: &Point<S>, yp: &Point<S>) -> Result<(S, S)> {
    if y.dim() != yp.dim() {
        return Err(Error::DimensionMismatch {
            expected: y.dim(),
            found: yp.dim(),
        });
    }
    let (Some(a), Some(b)) = (y.last(), yp.last()) else {
        return Err(Error::NoLastCoordinate);
    };
    if a.sign() != Ordering::Greater || b.sign() != Ordering::Less {
        return Err(Error::SignPrecondition);
    }
    Ok((a.clone(), b.clone()))
}

/// Where the segment from `y'` (`y'_k < 0`) to `y` (`y_k > 0`) crosses `y_k = 0`.
pub fn intersection_point<S: Scalar>(y: &Point<S>, yp: &Point<S>) -> Result<Point<S>> {
    let (a, b) = check_signs(y, yp)?;
    let denom = a.clone() - b.clone();
    let k = y.dim();
    let mut coords: Vec<S> = y.0[..k - 1]
        .iter()
        .zip(&yp.0[..k - 1])
        .map(|(yi, ypi)| (a.clone() * ypi.clone() - b.clone() * yi.clone()) / denom.clone())
        .collect();
    coords.push(S::zero());
    Ok(Point(coords))
}

/// Value at the crossing point of the chord through `(y, f_y)` and `(y', f_y')`.
pub fn chord_value<S: Scalar>(f_y: &S, f_yp: &S, y: &Point<S>, yp: &Point<S>) -> Result<S> {
    let (a, b) = check_signs(y, yp)?;
    Ok((a.clone() * f_yp.clone() - b.clone() * f_y.clone()) / (a - b))
}

/// Maximum over straddling pairs of the chord value at 0, for points of the line.
///
/// `ts` is strictly increasing, has no zero entry, and has entries of both signs.
/// The maximum is attained on the upper hull edge that spans 0.
pub(crate) fn max_chord_at_zero<S: Scalar>(ts: &[S], vs: &[S]) -> S {
    let cross = |o: usize, a: usize, b: usize| {
        (ts[a].clone() - ts[o].clone()) * (vs[b].clone() - vs[o].clone())
            - (vs[a].clone() - vs[o].clone()) * (ts[b].clone() - ts[o].clone())
    };
    let mut hull: Vec<usize> = Vec::with_capacity(ts.len());
    for p in 0..ts.len() {
        while hull.len() >= 2
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], p).sign() != Ordering::Less
        {
            hull.pop();
        }
        hull.push(p);
    }
    let edge = hull
        .windows(2)
        .find(|w| ts[w[0]].sign() == Ordering::Less && ts[w[1]].sign() == Ordering::Greater)
        .expect("hull spans both signs");
    let (a, b) = (edge[0], edge[1]);
    (ts[b].clone() * vs[a].clone() - ts[a].clone() * vs[b].clone())
        / (ts[b].clone() - ts[a].clone())
}

/// The merged table `F` on `T ∪ W₀` for the next level down.
#[derive(Clone, Debug)]
pub struct Envelope<S> {
    pub table: WorkingTable<S>,
    /// `|T|`, the number of distinct crossing points.
    pub generated: usize,
    /// Number of `(y, y')` pairs quoted.
    pub pairs: usize,
}

pub fn build_envelope<S: Scalar>(table: &WorkingTable<S>) -> Result<Envelope<S>> {
    let split = split_by_last_coordinate(&table.points)?;
    envelope_with_split(table, &split)
}

struct Crossing<S> {
    point: Point<S>,
    /// `(index in W₊, index in W₋, weight of f(y), weight of f(y'))`.
    pairs: Vec<(usize, usize, S, S)>,
}

fn envelope_with_split<S: Scalar>(
    table: &WorkingTable<S>,
    split: &LastCoordinateSplit<S>,
) -> Result<Envelope<S>> {
    let k = table.dim();
    let nx = table.nx();
    let pts = &table.points;
    let pairs = split.plus.len() * split.minus.len();

    // h values per crossing point, x-major.
    let (crossings, h): (Vec<Point<S>>, Vec<Vec<S>>) = if pairs == 0 {
        (Vec::new(), vec![Vec::new(); nx])
    } else if k == 1 {
        // Every chord crosses at the origin of R^0.
        let mut idx: Vec<usize> = split.plus.iter().chain(&split.minus).copied().collect();
        idx.sort_unstable();
        let ts: Vec<S> = idx.iter().map(|&i| pts.get(i).0[0].clone()).collect();
        let h = (0..nx)
            .into_par_iter()
            .map(|x| {
                let vs: Vec<S> = idx.iter().map(|&i| table.values[x][i].clone()).collect();
                vec![max_chord_at_zero(&ts, &vs)]
            })
            .collect();
        (vec![Point(Vec::new())], h)
    } else {
        let mut raw: Vec<(Point<S>, usize, usize, S, S)> = Vec::with_capacity(pairs);
        for &i in &split.plus {
            for &j in &split.minus {
                let (y, yp) = (pts.get(i), pts.get(j));
                let crossing = drop_last(&intersection_point(y, yp)?)?;
                let a = y.last().expect("k >= 1").clone();
                let b = yp.last().expect("k >= 1").clone();
                let denom = a.clone() - b.clone();
                let w_y = -b / denom.clone();
                let w_yp = a / denom;
                raw.push((crossing, i, j, w_y, w_yp));
            }
        }
        raw.sort_by(|p, q| p.0.cmp_lex(&q.0));
        let mut groups: Vec<Crossing<S>> = Vec::new();
        for (point, i, j, w_y, w_yp) in raw {
            match groups.last_mut() {
                Some(g) if g.point.same_as(&point) => g.pairs.push((i, j, w_y, w_yp)),
                _ => groups.push(Crossing {
                    point,
                    pairs: vec![(i, j, w_y, w_yp)],
                }),
            }
        }
        let h = (0..nx)
            .into_par_iter()
            .map(|x| {
                let row = &table.values[x];
                groups
                    .iter()
                    .map(|g| {
                        g.pairs
                            .iter()
                            .map(|(i, j, w_y, w_yp)| {
                                w_y.clone() * row[*i].clone() + w_yp.clone() * row[*j].clone()
                            })
                            .reduce(S::max_of)
                            .expect("non-empty group")
                    })
                    .collect()
            })
            .collect();
        (groups.into_iter().map(|g| g.point).collect(), h)
    };

    let zero_set =
        PointSet::from_points(k - 1, split.zero.iter().map(|(_, p)| p.clone()).collect())?;
    let zero_source = |p: &Point<S>| -> Option<usize> {
        zero_set.position(p).map(|_| {
            split
                .zero
                .iter()
                .find(|(_, q)| q.same_as(p))
                .expect("present")
                .0
        })
    };

    let mut entries: Vec<(Point<S>, Vec<S>)> =
        Vec::with_capacity(crossings.len() + split.zero.len());
    let mut origins: Vec<(Point<S>, PointOrigin)> = Vec::new();
    for (t, p) in crossings.iter().enumerate() {
        let source = zero_source(p);
        let vals = (0..nx)
            .map(|x| {
                let ext = match source {
                    Some(i) => table.values[x][i].clone(),
                    None => -p.norm_sq(),
                };
                h[x][t].clone().max_of(ext)
            })
            .collect();
        entries.push((p.clone(), vals));
        let origin = source.map_or(PointOrigin::Generated, |i| table.origin[i]);
        origins.push((p.clone(), origin));
    }
    for (i, p) in &split.zero {
        if crossings.iter().any(|c| c.same_as(p)) {
            continue;
        }
        entries.push((
            p.clone(),
            (0..nx).map(|x| table.values[x][*i].clone()).collect(),
        ));
        origins.push((p.clone(), table.origin[*i]));
    }
    let generated = crossings.len();
    let (points, values) = PointTable::from_entries(k - 1, nx, entries)?.into_parts();
    origins.sort_by(|a, b| a.0.cmp_lex(&b.0));
    let origin = origins.into_iter().map(|(_, o)| o).collect();
    Ok(Envelope {
        table: WorkingTable {
            points,
            values,
            origin,
        },
        generated,
        pairs,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseRule {
    /// `C(x) = max(1, ceil(f(x, ())))`.
    #[default]
    Novikov,
    /// `C(x) = f(x, ())`.
    Tight,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineConfig {
    pub sandwich: SandwichConfig,
    pub base: BaseRule,
    /// Keep every level's working table in the trace.
    pub record_tables: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineSelector<S> {
    pub b: Vec<Point<S>>,
    pub c: Vec<S>,
}

impl<S: Scalar> AffineSelector<S> {
    pub fn eval(&self, x: usize, y: &Point<S>) -> S {
        y.dot(self.b[x].coords()) + self.c[x].clone()
    }
}

/// Bracket for the last coefficient. `None` stands for `-∞` (u) or `+∞` (l).
#[derive(Clone, Debug, PartialEq)]
pub struct Bracket<S> {
    pub u: Option<S>,
    pub l: Option<S>,
}

#[derive(Clone, Debug)]
pub struct LevelTrace<S> {
    pub dim: usize,
    pub plus: usize,
    pub minus: usize,
    pub zero: usize,
    pub generated: usize,
    pub pairs: usize,
    pub brackets: Vec<Bracket<S>>,
    pub last_coefficient: Vec<S>,
    pub table: Option<WorkingTable<S>>,
}

#[derive(Clone, Debug)]
pub struct RecursionTrace<S> {
    /// Top level first; `levels[i].dim == n - i`.
    pub levels: Vec<LevelTrace<S>>,
    pub base: Vec<S>,
    pub base_rule: BaseRule,
    pub sandwich_mode: SandwichMode,
    /// Level-0 table, when recorded.
    pub base_table: Option<WorkingTable<S>>,
}

impl<S: Scalar> RecursionTrace<S> {
    /// Number of recorded nodes where `U(x) > L(x)` with both finite.
    pub fn bracket_violations(&self) -> usize {
        self.levels
            .iter()
            .flat_map(|lv| &lv.brackets)
            .filter(|b| matches!((&b.u, &b.l), (Some(u), Some(l)) if !u.at_most(l)))
            .count()
    }
}

/// Affine dominators for every parameter, with the recursion trace.
pub fn select_affine<S: Scalar>(
    inst: &Instance<S>,
    config: &AffineConfig,
) -> Result<(AffineSelector<S>, RecursionTrace<S>)> {
    let top = extend_domain(inst);
    let mut trace = RecursionTrace {
        levels: Vec::with_capacity(inst.n),
        base: Vec::new(),
        base_rule: config.base,
        sandwich_mode: config.sandwich.mode,
        base_table: None,
    };
    let (b, c) = solve_level(top, &inst.x_ids, config, &mut trace)?;
    Ok((
        AffineSelector {
            b: b.into_iter().map(Point).collect(),
            c,
        },
        trace,
    ))
}

type LevelSolution<S> = (Vec<Vec<S>>, Vec<S>);

fn solve_level<S: Scalar>(
    table: WorkingTable<S>,
    ids: &[String],
    config: &AffineConfig,
    trace: &mut RecursionTrace<S>,
) -> Result<LevelSolution<S>> {
    let nx = table.nx();
    let k = table.dim();
    if k == 0 {
        let origin = Point(Vec::new());
        let vals: Vec<S> = (0..nx).map(|x| table.eval(x, &origin)).collect();
        let c = match config.base {
            BaseRule::Novikov => ceiling_cover(&vals),
            BaseRule::Tight => vals,
        };
        trace.base = c.clone();
        if config.record_tables {
            trace.base_table = Some(table);
        }
        return Ok((vec![Vec::new(); nx], c));
    }

    let split = split_by_last_coordinate(&table.points)?;
    let envelope = envelope_with_split(&table, &split)?;
    let slot = trace.levels.len();
    trace.levels.push(LevelTrace {
        dim: k,
        plus: split.plus.len(),
        minus: split.minus.len(),
        zero: split.zero.len(),
        generated: envelope.generated,
        pairs: envelope.pairs,
        brackets: Vec::new(),
        last_coefficient: Vec::new(),
        table: None,
    });
    let (mut b, c) = solve_level(envelope.table, ids, config, trace)?;

    let pts = &table.points;
    let residual = |x: usize, i: usize| -> S {
        let y = pts.get(i);
        let head = y.0[..k - 1]
            .iter()
            .zip(&b[x])
            .fold(S::zero(), |acc, (yi, bi)| acc + yi.clone() * bi.clone());
        (table.values[x][i].clone() - head - c[x].clone()) / y.0[k - 1].clone()
    };
    let brackets: Vec<Bracket<S>> = (0..nx)
        .into_par_iter()
        .map(|x| Bracket {
            u: split.plus.iter().map(|&i| residual(x, i)).reduce(S::max_of),
            l: split
                .minus
                .iter()
                .map(|&i| residual(x, i))
                .reduce(S::min_of),
        })
        .collect();
    for (x, br) in brackets.iter().enumerate() {
        if let (Some(u), Some(l)) = (&br.u, &br.l) {
            if !u.at_most(l) {
                return Err(Error::InvariantBreach {
                    level: k,
                    x: ids[x].clone(),
                    upper: u.render(),
                    lower: l.render(),
                });
            }
        }
    }

    let both: Vec<usize> = (0..nx)
        .filter(|&x| brackets[x].u.is_some() && brackets[x].l.is_some())
        .collect();
    let us: Vec<S> = both
        .iter()
        .map(|&x| brackets[x].u.clone().expect("finite"))
        .collect();
    let ls: Vec<S> = both
        .iter()
        .map(|&x| brackets[x].l.clone().expect("finite"))
        .collect();
    let mut inserted = sandwich(&us, &ls, config.sandwich)?.values;
    if config.sandwich.mode == SandwichMode::Staged {
        // The staged value can sit up to 2^-depth·R below U; keep the bracket exact.
        inserted = inserted
            .into_iter()
            .zip(us.iter().zip(&ls))
            .map(|(v, (u, l))| v.max_of(u.clone()).min_of(l.clone()))
            .collect();
    }
    let mut last = vec![S::zero(); nx];
    for (&x, v) in both.iter().zip(inserted) {
        last[x] = v;
    }
    for (x, br) in brackets.iter().enumerate() {
        match (&br.u, &br.l) {
            (None, Some(l)) => last[x] = l.clone(),
            (Some(u), None) => last[x] = u.clone(),
            _ => {}
        }
    }
    for (row, v) in b.iter_mut().zip(&last) {
        row.push(v.clone());
    }

    let level = &mut trace.levels[slot];
    level.brackets = brackets;
    level.last_coefficient = last;
    if config.record_tables {
        level.table = Some(table);
    }
    Ok((b, c))
}
