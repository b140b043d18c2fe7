//! Subgradients at a base point for convex sections `g(x, ·)`.
//!
//! With `f = -g`, a linear dominator `f(x, y) <= A(x)·y + ε(x)` is the same as
//! `g(x, y) >= p(x)·y - ε(x)` for `p = -A`, i.e. an ε-subgradient of `g(x, ·)`
//! at the origin over the sample.

use serde::{Deserialize, Serialize};

use crate::conelift::{select_linear, LinearConfig};
use crate::error::{Error, Result};
use crate::hyperplane::Instance;
use crate::numerics::{Point, Scalar};
use crate::oracle::{exact_linear_select, verify_domination, DominationKind, SlackSummary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubgradientBackend {
    /// Fourier–Motzkin witness, `ε = 0`.
    #[default]
    Exact,
    /// Cone lift and linear selection of `-g`.
    Cone,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgradientConfig {
    pub backend: SubgradientBackend,
    /// Move each parameter's base point `y0(x)` to the origin first.
    pub shift: bool,
    pub linear: LinearConfig,
}

/// Parameters sharing one base point, with the sample translated so that the
/// base point sits at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftGroup<S> {
    /// Indices into the original parameter list.
    pub members: Vec<usize>,
    pub base: Point<S>,
    pub instance: Instance<S>,
}

/// Domain `{y - y0(x)}` and values `g(x, y) - g(x, y0(x))`, one group per
/// distinct base point. Without `y0` every parameter is based at the origin
/// and the data are left untouched.
pub fn shift_to_origin<S: Scalar>(inst: &Instance<S>) -> Result<Vec<ShiftGroup<S>>> {
    let Some(y0) = &inst.y0 else {
        return Ok(vec![ShiftGroup {
            members: (0..inst.nx()).collect(),
            base: Point::origin(inst.n),
            instance: inst.clone(),
        }]);
    };
    let mut groups: Vec<(Point<S>, Vec<usize>)> = Vec::new();
    for (x, base) in y0.iter().enumerate() {
        match groups.iter_mut().find(|(b, _)| b.same_as(base)) {
            Some((_, members)) => members.push(x),
            None => groups.push((base.clone(), vec![x])),
        }
    }
    groups
        .into_iter()
        .map(|(base, members)| {
            let at = inst
                .y
                .position(&base)
                .ok_or_else(|| Error::BasePointMissing {
                    x: inst.x_ids[members[0]].clone(),
                })?;
            let points = inst.y.iter().map(|y| y.sub(&base)).collect();
            let rows = members
                .iter()
                .map(|&x| {
                    let g0 = inst.f[x][at].clone();
                    inst.f[x].iter().map(|v| v.clone() - g0.clone()).collect()
                })
                .collect();
            let ids = members.iter().map(|&x| inst.x_ids[x].clone()).collect();
            Ok(ShiftGroup {
                instance: Instance::new(inst.n, ids, points, rows)?,
                members,
                base,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientSelection<S> {
    pub p: Vec<Point<S>>,
    pub epsilon: Vec<S>,
}

fn negated<S: Scalar>(inst: &Instance<S>) -> Instance<S> {
    Instance {
        f: inst
            .f
            .iter()
            .map(|row| row.iter().map(|v| -v.clone()).collect())
            .collect(),
        ..inst.clone()
    }
}

fn check_normalized<S: Scalar>(inst: &Instance<S>) -> Result<()> {
    let origin = Point::origin(inst.n);
    let at = inst.y.position(&origin);
    for x in 0..inst.nx() {
        let ok = at.is_some_and(|i| inst.f[x][i].coord_eq(&S::zero()));
        if !ok {
            return Err(Error::NotNormalized {
                x: inst.x_ids[x].clone(),
            });
        }
    }
    Ok(())
}

fn groups_for<S: Scalar>(inst: &Instance<S>, shift: bool) -> Result<Vec<ShiftGroup<S>>> {
    if shift {
        shift_to_origin(inst)
    } else {
        Ok(vec![ShiftGroup {
            members: (0..inst.nx()).collect(),
            base: Point::origin(inst.n),
            instance: inst.clone(),
        }])
    }
}

pub fn select_subgradient<S: Scalar>(
    inst: &Instance<S>,
    config: &SubgradientConfig,
) -> Result<SubgradientSelection<S>> {
    let nx = inst.nx();
    let mut p = vec![Point::origin(inst.n); nx];
    let mut epsilon = vec![S::zero(); nx];
    for group in groups_for(inst, config.shift)? {
        check_normalized(&group.instance)?;
        let f = negated(&group.instance);
        let (a, eps) = match config.backend {
            SubgradientBackend::Exact => {
                let a = exact_linear_select(&f)?;
                let eps = vec![S::zero(); a.len()];
                (a, eps)
            }
            SubgradientBackend::Cone => {
                let sel = select_linear(&f, &config.linear)?;
                (sel.a, sel.epsilon)
            }
        };
        for ((x, a), e) in group.members.iter().zip(a).zip(eps) {
            p[*x] = a.scale(&-S::one());
            epsilon[*x] = e;
        }
    }
    Ok(SubgradientSelection { p, epsilon })
}

/// Slack of `g(x, y) - p(x)·y + ε(x) >= 0` per parameter, on the shifted
/// sample when `shift` is set.
pub fn subgradient_slack<S: Scalar>(
    inst: &Instance<S>,
    sel: &SubgradientSelection<S>,
    shift: bool,
) -> Result<Vec<SlackSummary<S>>> {
    let mut out: Vec<Option<SlackSummary<S>>> = vec![None; inst.nx()];
    for group in groups_for(inst, shift)? {
        let f = negated(&group.instance);
        let a: Vec<Point<S>> = group
            .members
            .iter()
            .map(|&x| sel.p[x].scale(&-S::one()))
            .collect();
        let eps: Vec<S> = group
            .members
            .iter()
            .map(|&x| sel.epsilon[x].clone())
            .collect();
        let rep = verify_domination(&f, &a, &eps, DominationKind::Linear)?;
        for (x, s) in group.members.iter().zip(rep.per_x) {
            out[*x] = Some(s);
        }
    }
    Ok(out
        .into_iter()
        .map(|s| s.expect("every parameter is in a group"))
        .collect())
}

/// Midpoint convexity on collinear triples `(a, (a+b)/2, b)` of the sample.
/// Returns `(x, a, b)` index triples where `g(x, (a+b)/2) > (g(x, a) + g(x, b))/2`.
pub fn check_midpoint_convexity<S: Scalar>(inst: &Instance<S>) -> Vec<(usize, usize, usize)> {
    let two = S::from_int(2);
    let half = S::one() / two.clone();
    let mut bad = Vec::new();
    let pts = inst.y.points();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let mid = pts[i].add(&pts[j]).scale(&half);
            let Some(m) = inst.y.position(&mid) else {
                continue;
            };
            for x in 0..inst.nx() {
                let chord = (inst.f[x][i].clone() + inst.f[x][j].clone()) / two.clone();
                if !inst.f[x][m].at_most(&chord) {
                    bad.push((x, i, j));
                }
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{parse_rational, Rational};

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn pt(cs: &[&str]) -> Point<Rational> {
        Point(cs.iter().map(|c| q(c)).collect())
    }

    fn quick(backend: SubgradientBackend) -> SubgradientConfig {
        SubgradientConfig {
            backend,
            shift: false,
            linear: LinearConfig {
                lambda_max_log2: 6,
                doublings: 1,
                ..LinearConfig::default()
            },
        }
    }

    fn abs_instance() -> Instance<Rational> {
        Instance::new(
            1,
            vec!["x".into()],
            vec![pt(&["-1"]), pt(&["0"]), pt(&["1"])],
            vec![vec![q("1"), q("0"), q("1")]],
        )
        .unwrap()
    }

    #[test]
    fn absolute_value() {
        let inst = abs_instance();
        let sel = select_subgradient(&inst, &quick(SubgradientBackend::Exact)).unwrap();
        let p = &sel.p[0].0[0];
        assert!(*p >= q("-1") && *p <= q("1"));
        assert_eq!(sel.epsilon[0], q("0"));
        assert!(subgradient_slack(&inst, &sel, false).unwrap()[0].passed);
        assert!(check_midpoint_convexity(&inst).is_empty());

        let cone = select_subgradient(&inst, &quick(SubgradientBackend::Cone)).unwrap();
        assert!(subgradient_slack(&inst, &cone, false).unwrap()[0].passed);
    }

    #[test]
    fn linear_section_is_recovered() {
        let mut pts = Vec::new();
        for a in -1..=1 {
            for b in -1..=1 {
                pts.push(Point(vec![
                    Rational::from_integer(a.into()),
                    Rational::from_integer(b.into()),
                ]));
            }
        }
        let vals = pts.iter().map(|p| p.dot(&[q("3"), q("-2")])).collect();
        let inst = Instance::new(2, vec!["x".into()], pts, vec![vals]).unwrap();
        let sel = select_subgradient(&inst, &quick(SubgradientBackend::Exact)).unwrap();
        assert_eq!(sel.p[0], pt(&["3", "-2"]));
    }

    #[test]
    fn shift_example() {
        let inst = Instance::with_extras(
            1,
            vec!["x".into()],
            vec![pt(&["0"]), pt(&["1"])],
            vec![vec![q("0"), q("2")]],
            None,
            Some(vec![pt(&["1"])]),
        )
        .unwrap();
        let groups = shift_to_origin(&inst).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].instance.y.points(), &[pt(&["-1"]), pt(&["0"])]);
        assert_eq!(groups[0].instance.f[0], vec![q("-2"), q("0")]);

        let origin = Instance::with_extras(
            1,
            vec!["x".into()],
            vec![pt(&["0"]), pt(&["1"])],
            vec![vec![q("0"), q("2")]],
            None,
            Some(vec![pt(&["0"])]),
        )
        .unwrap();
        let groups = shift_to_origin(&origin).unwrap();
        assert_eq!(groups[0].instance.y, origin.y);
        assert_eq!(groups[0].instance.f, origin.f);

        let missing = Instance::with_extras(
            1,
            vec!["x".into()],
            vec![pt(&["0"]), pt(&["1"])],
            vec![vec![q("0"), q("2")]],
            None,
            Some(vec![pt(&["5"])]),
        )
        .unwrap();
        assert!(matches!(
            shift_to_origin(&missing),
            Err(Error::BasePointMissing { .. })
        ));
    }

    #[test]
    fn shifted_matches_preshifted() {
        // g(y) = |y - 1| + 3 based at y0 = 1, against the same data moved by hand.
        let pts = ["-1", "0", "1", "2", "3"];
        let vals = ["5", "4", "3", "4", "5"];
        let shifted = Instance::with_extras(
            1,
            vec!["a".into(), "b".into()],
            pts.iter().map(|p| pt(&[p])).collect(),
            vec![
                vals.iter().map(|v| q(v)).collect(),
                vals.iter().map(|v| q(v)).collect(),
            ],
            None,
            Some(vec![pt(&["1"]), pt(&["1"])]),
        )
        .unwrap();
        let moved = Instance::new(
            1,
            vec!["a".into(), "b".into()],
            ["-2", "-1", "0", "1", "2"]
                .iter()
                .map(|p| pt(&[p]))
                .collect(),
            vec![
                ["2", "1", "0", "1", "2"].iter().map(|v| q(v)).collect(),
                ["2", "1", "0", "1", "2"].iter().map(|v| q(v)).collect(),
            ],
        )
        .unwrap();
        for backend in [SubgradientBackend::Exact, SubgradientBackend::Cone] {
            let mut cfg = quick(backend);
            let plain = select_subgradient(&moved, &cfg).unwrap();
            cfg.shift = true;
            let via_shift = select_subgradient(&shifted, &cfg).unwrap();
            assert_eq!(plain, via_shift);
            assert!(subgradient_slack(&shifted, &via_shift, true)
                .unwrap()
                .iter()
                .all(|s| s.passed));
        }
    }

    #[test]
    fn unnormalized_is_rejected() {
        let inst = Instance::new(
            1,
            vec!["x".into()],
            vec![pt(&["0"]), pt(&["1"])],
            vec![vec![q("1"), q("2")]],
        )
        .unwrap();
        let err = select_subgradient(&inst, &quick(SubgradientBackend::Exact)).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
        let no_origin =
            Instance::new(1, vec!["x".into()], vec![pt(&["1"])], vec![vec![q("1")]]).unwrap();
        assert!(select_subgradient(&no_origin, &quick(SubgradientBackend::Exact)).is_err());
    }

    #[test]
    fn nonconvex_sample_is_reported() {
        let inst = Instance::new(
            1,
            vec!["x".into()],
            vec![pt(&["-1"]), pt(&["0"]), pt(&["1"])],
            vec![vec![q("-1"), q("0"), q("-1")]],
        )
        .unwrap();
        assert_eq!(check_midpoint_convexity(&inst), vec![(0, 0, 2)]);
        let err = select_subgradient(&inst, &quick(SubgradientBackend::Exact)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }
}
