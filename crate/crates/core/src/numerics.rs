//! Scalars, points and the point-set plumbing shared by every recursion level.
//!
//! Two scalar modes exist. [`Rational`] is exact and is what every guarantee in
//! this crate is stated for. [`Float`] is an `f64` wrapper whose comparisons
//! against bounds accept a relative slack of [`Float::REL_TOL`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Arithmetic required by the selection pipeline.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic and comparisons are error-free.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    fn from_rational(r: &Rational) -> Self;
    /// `None` for values that have no exact rational meaning in this mode.
    fn to_rational(&self) -> Option<Rational>;
    fn to_f64(&self) -> f64;
    fn floor(&self) -> Self;
    fn ceil(&self) -> Self;
    fn abs(&self) -> Self;
    /// Sign relative to zero, computed without tolerance.
    fn sign(&self) -> Ordering;
    /// Strict total order used for canonical sorting.
    fn total_cmp(&self, other: &Self) -> Ordering;
    /// `self <= bound` under the mode's comparison policy.
    fn at_most(&self, bound: &Self) -> bool;
    /// Equality used when merging coordinates of stored points.
    fn coord_eq(&self, other: &Self) -> bool;
    /// Canonical text form: `p/q` or `p` for rationals.
    fn render(&self) -> String;

    fn is_zero_exact(&self) -> bool {
        self.sign() == Ordering::Equal
    }

    fn max_of(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    fn pow2(exp: u32) -> Self {
        let two = Self::from_int(2);
        (0..exp).fold(Self::one(), |acc, _| acc * two.clone())
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn floor(&self) -> Self {
        Rational::floor(self)
    }
    fn ceil(&self) -> Self {
        Rational::ceil(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn sign(&self) -> Ordering {
        self.numer().sign().cmp(&num_bigint::Sign::NoSign)
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn at_most(&self, bound: &Self) -> bool {
        self <= bound
    }
    fn coord_eq(&self, other: &Self) -> bool {
        self == other
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

/// Binary floating point scalar with tolerant bound comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Float(pub f64);

impl Float {
    pub const REL_TOL: f64 = 1e-9;
    pub const COORD_TOL: f64 = 1e-12;
}

macro_rules! float_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Float {
            type Output = Float;
            fn $m(self, rhs: Float) -> Float {
                Float(self.0 $op rhs.0)
            }
        }
    };
}
float_binop!(Add, add, +);
float_binop!(Sub, sub, -);
float_binop!(Mul, mul, *);
float_binop!(Div, div, /);

impl Neg for Float {
    type Output = Float;
    fn neg(self) -> Float {
        Float(-self.0)
    }
}

impl Scalar for Float {
    const EXACT: bool = false;

    fn zero() -> Self {
        Float(0.0)
    }
    fn one() -> Self {
        Float(1.0)
    }
    fn from_int(v: i64) -> Self {
        Float(v as f64)
    }
    fn from_rational(r: &Rational) -> Self {
        Float(ToPrimitive::to_f64(r).unwrap_or(f64::NAN))
    }
    fn to_rational(&self) -> Option<Rational> {
        None
    }
    fn to_f64(&self) -> f64 {
        self.0
    }
    fn floor(&self) -> Self {
        Float(self.0.floor())
    }
    fn ceil(&self) -> Self {
        Float(self.0.ceil())
    }
    fn abs(&self) -> Self {
        Float(self.0.abs())
    }
    fn sign(&self) -> Ordering {
        self.0.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        // -0.0 and 0.0 must compare equal for canonical ordering.
        (self.0 + 0.0).total_cmp(&(other.0 + 0.0))
    }
    fn at_most(&self, bound: &Self) -> bool {
        self.0 <= bound.0 + Self::REL_TOL * (1.0 + bound.0.abs())
    }
    fn coord_eq(&self, other: &Self) -> bool {
        (self.0 - other.0).abs() <= Self::COORD_TOL
    }
    fn render(&self) -> String {
        format!("{:?}", self.0 + 0.0)
    }
}

/// Parses `p/q` or `p` (optionally signed) into a normalized rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Parse(format!("not a rational: {text:?}"));
    let (num, den) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(num, den))
}

/// Exact rational value of a finite `f64`.
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    Rational::from_f64(v)
}

/// A point of `Q^k` (or `R^k` in float mode). `k = 0` is the empty tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<S>(pub Vec<S>);

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![S::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[S] {
        &self.0
    }

    pub fn last(&self) -> Option<&S> {
        self.0.last()
    }

    pub fn norm_sq(&self) -> S {
        self.0
            .iter()
            .fold(S::zero(), |acc, c| acc + c.clone() * c.clone())
    }

    /// Inner product with the first `self.dim()` entries of `coeffs`.
    pub fn dot(&self, coeffs: &[S]) -> S {
        self.0
            .iter()
            .zip(coeffs)
            .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }

    pub fn scale(&self, factor: &S) -> Self {
        Point(self.0.iter().map(|c| c.clone() * factor.clone()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        )
    }

    pub fn cmp_lex(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.coord_eq(b))
    }

    pub fn render(&self) -> Vec<String> {
        self.0.iter().map(S::render).collect()
    }
}

/// Drops the last coordinate of a point lying on the hyperplane `y_k = 0`.
pub fn drop_last<S: Scalar>(y: &Point<S>) -> Result<Point<S>> {
    match y.last() {
        None => Err(Error::NoLastCoordinate),
        Some(last) if !last.is_zero_exact() => Err(Error::NonzeroLastCoordinate),
        Some(_) => Ok(Point(y.0[..y.dim() - 1].to_vec())),
    }
}

/// Duplicate-free, lexicographically sorted list of points of one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<S> {
    dim: usize,
    points: Vec<Point<S>>,
}

impl<S: Scalar> PointSet<S> {
    pub fn empty(dim: usize) -> Self {
        PointSet {
            dim,
            points: Vec::new(),
        }
    }

    /// Sorts and deduplicates. Fails if any point has the wrong dimension.
    pub fn from_points(dim: usize, points: Vec<Point<S>>) -> Result<Self> {
        let table = PointTable::from_entries(dim, 0, points.into_iter().map(|p| (p, Vec::new())))?;
        Ok(table.points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point<S>] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &Point<S> {
        &self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point<S>> {
        self.points.iter()
    }

    /// Index of a stored point equal to `y`, if any.
    pub fn position(&self, y: &Point<S>) -> Option<usize> {
        if y.dim() != self.dim {
            return None;
        }
        if S::EXACT {
            self.points.binary_search_by(|p| p.cmp_lex(y)).ok()
        } else {
            self.points.iter().position(|p| p.same_as(y))
        }
    }

    pub fn contains(&self, y: &Point<S>) -> bool {
        self.position(y).is_some()
    }
}

/// Index lists of the three parts of a working set split by the sign of the
/// last coordinate. Zero-part points are also given with the coordinate dropped.
#[derive(Clone, Debug)]
pub struct LastCoordinateSplit<S> {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub zero: Vec<(usize, Point<S>)>,
}

impl<S: Scalar> LastCoordinateSplit<S> {
    pub fn total(&self) -> usize {
        self.plus.len() + self.minus.len() + self.zero.len()
    }
}

pub fn split_by_last_coordinate<S: Scalar>(w: &PointSet<S>) -> Result<LastCoordinateSplit<S>> {
    if w.dim() == 0 {
        return Err(Error::NoLastCoordinate);
    }
    let mut split = LastCoordinateSplit {
        plus: Vec::new(),
        minus: Vec::new(),
        zero: Vec::new(),
    };
    for (i, y) in w.iter().enumerate() {
        match y.last().expect("dim >= 1").sign() {
            Ordering::Greater => split.plus.push(i),
            Ordering::Less => split.minus.push(i),
            Ordering::Equal => split.zero.push((i, drop_last(y)?)),
        }
    }
    Ok(split)
}

/// Point set with one value per parameter attached to each point.
///
/// Inserting an existing point keeps the pointwise maximum of the old and new
/// values, so the table always stores the supremum over colliding sources.
#[derive(Clone, Debug)]
pub struct PointTable<S> {
    points: PointSet<S>,
    /// `values[i][x]` belongs to point `i`.
    values: Vec<Vec<S>>,
    width: usize,
}

impl<S: Scalar> PointTable<S> {
    pub fn new(dim: usize, width: usize) -> Self {
        PointTable {
            points: PointSet::empty(dim),
            values: Vec::new(),
            width,
        }
    }

    /// Builds a table from unsorted entries; colliding points merge by max.
    pub fn from_entries<I>(dim: usize, width: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Point<S>, Vec<S>)>,
    {
        let mut entries: Vec<(Point<S>, Vec<S>)> = entries.into_iter().collect();
        for (p, v) in &entries {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if v.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: v.len(),
                });
            }
        }
        entries.sort_by(|a, b| a.0.cmp_lex(&b.0));
        let mut points: Vec<Point<S>> = Vec::with_capacity(entries.len());
        let mut values: Vec<Vec<S>> = Vec::with_capacity(entries.len());
        for (p, v) in entries {
            match points.last() {
                Some(prev) if prev.same_as(&p) => {
                    let slot = values.last_mut().expect("parallel vectors");
                    merge_max(slot, v);
                }
                _ => {
                    points.push(p);
                    values.push(v);
                }
            }
        }
        Ok(PointTable {
            points: PointSet { dim, points },
            values,
            width,
        })
    }

    /// Inserts `y` with per-parameter values, keeping the max on collision.
    pub fn dedup_insert(&mut self, y: Point<S>, vals: Vec<S>) -> Result<()> {
        if y.dim() != self.points.dim {
            return Err(Error::DimensionMismatch {
                expected: self.points.dim,
                found: y.dim(),
            });
        }
        if vals.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: vals.len(),
            });
        }
        if let Some(i) = self.points.position(&y) {
            merge_max(&mut self.values[i], vals);
            return Ok(());
        }
        let at = self
            .points
            .points
            .partition_point(|p| p.cmp_lex(&y) == Ordering::Less);
        self.points.points.insert(at, y);
        self.values.insert(at, vals);
        Ok(())
    }

    pub fn points(&self) -> &PointSet<S> {
        &self.points
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn value(&self, point: usize, x: usize) -> &S {
        &self.values[point][x]
    }

    pub fn lookup(&self, y: &Point<S>) -> Option<&[S]> {
        self.points.position(y).map(|i| self.values[i].as_slice())
    }

    /// Returns the points and parameter-major value rows (`rows[x][i]`).
    pub fn into_parts(self) -> (PointSet<S>, Vec<Vec<S>>) {
        let mut rows: Vec<Vec<S>> = (0..self.width)
            .map(|_| Vec::with_capacity(self.values.len()))
            .collect();
        for vals in self.values {
            for (row, v) in rows.iter_mut().zip(vals) {
                row.push(v);
            }
        }
        (self.points, rows)
    }
}

fn merge_max<S: Scalar>(slot: &mut [S], incoming: Vec<S>) {
    for (old, new) in slot.iter_mut().zip(incoming) {
        if new.total_cmp(old) == Ordering::Greater {
            *old = new;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn pt(cs: &[&str]) -> Point<Rational> {
        Point(cs.iter().map(|c| q(c)).collect())
    }

    #[test]
    fn split_examples() {
        let w = PointSet::from_points(2, vec![pt(&["1", "1"]), pt(&["1", "-1"]), pt(&["2", "0"])])
            .unwrap();
        let s = split_by_last_coordinate(&w).unwrap();
        assert_eq!(
            s.plus.iter().map(|&i| w.get(i).clone()).collect::<Vec<_>>(),
            vec![pt(&["1", "1"])]
        );
        assert_eq!(
            s.minus
                .iter()
                .map(|&i| w.get(i).clone())
                .collect::<Vec<_>>(),
            vec![pt(&["1", "-1"])]
        );
        assert_eq!(s.zero.len(), 1);
        assert_eq!(s.zero[0].1, pt(&["2"]));

        let w = PointSet::from_points(1, vec![pt(&["3"])]).unwrap();
        let s = split_by_last_coordinate(&w).unwrap();
        assert_eq!((s.plus.len(), s.minus.len(), s.zero.len()), (1, 0, 0));

        let w = PointSet::from_points(2, vec![pt(&["0", "0"])]).unwrap();
        let s = split_by_last_coordinate(&w).unwrap();
        assert_eq!(s.zero[0].1, pt(&["0"]));
        assert!(s.plus.is_empty() && s.minus.is_empty());
    }

    #[test]
    fn split_rejects_dimension_zero() {
        let w = PointSet::<Rational>::from_points(0, vec![Point(vec![])]).unwrap();
        assert!(matches!(
            split_by_last_coordinate(&w),
            Err(Error::NoLastCoordinate)
        ));
    }

    #[test]
    fn drop_last_examples() {
        assert_eq!(drop_last(&pt(&["2", "0"])).unwrap(), pt(&["2"]));
        assert_eq!(drop_last(&pt(&["0"])).unwrap().dim(), 0);
        assert_eq!(drop_last(&pt(&["1", "-3", "0"])).unwrap(), pt(&["1", "-3"]));
        assert!(matches!(
            drop_last(&pt(&["1", "2"])),
            Err(Error::NonzeroLastCoordinate)
        ));
    }

    #[test]
    fn dedup_insert_keeps_max() {
        let mut t = PointTable::new(2, 1);
        t.dedup_insert(pt(&["1", "0"]), vec![q("3")]).unwrap();
        t.dedup_insert(pt(&["1", "0"]), vec![q("5")]).unwrap();
        assert_eq!(t.lookup(&pt(&["1", "0"])).unwrap(), &[q("5")]);

        let mut t = PointTable::new(2, 1);
        t.dedup_insert(pt(&["1", "0"]), vec![q("3")]).unwrap();
        t.dedup_insert(pt(&["1", "0"]), vec![q("2")]).unwrap();
        assert_eq!(t.lookup(&pt(&["1", "0"])).unwrap(), &[q("3")]);

        let mut t = PointTable::new(2, 1);
        t.dedup_insert(pt(&["1/3", "0"]), vec![q("1")]).unwrap();
        t.dedup_insert(pt(&["2/6", "0"]), vec![q("1")]).unwrap();
        assert_eq!(t.points().len(), 1);

        assert!(matches!(
            t.dedup_insert(pt(&["1"]), vec![q("1")]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn float_comparison_policy() {
        assert!(Float(1.0 + 1e-10).at_most(&Float(1.0)));
        assert!(!Float(1.0 + 1e-6).at_most(&Float(1.0)));
        assert!(Float(0.3).coord_eq(&Float(0.1 + 0.2)));
        assert_eq!(Float(-0.0).total_cmp(&Float(0.0)), Ordering::Equal);
    }

    #[test]
    fn rational_parsing_normalizes() {
        assert_eq!(q("2/6").render(), "1/3");
        assert_eq!(q("-4/2").render(), "-2");
        assert_eq!(q("3/-9").render(), "-1/3");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_q() -> impl Strategy<Value = Rational> {
            (-40i64..=40, 1i64..=8).prop_map(|(p, d)| Rational::new(p.into(), d.into()))
        }

        proptest! {
            #[test]
            fn render_parse_roundtrip(r in small_q()) {
                prop_assert_eq!(parse_rational(&r.render()).unwrap(), r);
            }

            #[test]
            fn split_is_a_partition(pts in prop::collection::vec(prop::collection::vec(small_q(), 2), 0..12)) {
                let w = PointSet::from_points(2, pts.into_iter().map(Point).collect()).unwrap();
                let s = split_by_last_coordinate(&w).unwrap();
                prop_assert_eq!(s.total(), w.len());
            }

            #[test]
            fn dedup_insert_is_order_independent(
                entries in prop::collection::vec((prop::collection::vec(-2i64..=2, 2), small_q()), 0..16),
                seed in any::<u64>(),
            ) {
                let mk = |es: &[(Vec<i64>, Rational)]| {
                    let mut t = PointTable::new(2, 1);
                    for (c, v) in es {
                        let p = Point(c.iter().map(|&v| Rational::from_int(v)).collect());
                        t.dedup_insert(p, vec![v.clone()]).unwrap();
                    }
                    t.into_parts()
                };
                let mut shuffled = entries.clone();
                // Deterministic permutation derived from the seed.
                let n = shuffled.len();
                for i in (1..n).rev() {
                    let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % (i as u64 + 1)) as usize;
                    shuffled.swap(i, j);
                }
                let a = mk(&entries);
                let b = mk(&shuffled);
                prop_assert_eq!(a.0, b.0);
                prop_assert_eq!(a.1, b.1);
                // Batch construction agrees with incremental insertion.
                let batch = PointTable::from_entries(2, 1, entries.iter().map(|(c, v)| {
                    (Point(c.iter().map(|&v| Rational::from_int(v)).collect()), vec![v.clone()])
                })).unwrap().into_parts();
                prop_assert_eq!(batch.1, mk(&entries).1);
            }
        }
    }
}
