//! Linear dominators `f(x, y) <= A(x)·y + ε(x)` through an affine problem on the
//! cone spanned by the sample.
//!
//! Every sample point is scaled by each rung of a geometric ladder
//! `1, 2, 4, …, λ_max` and carries the scaled value `λ·f(x, y)`. An affine
//! dominator `(B, C)` of the lifted table gives `f(x, y) <= B(x)·y + C(x)/λ_max`
//! at the top rung, so `A = B` with the certified residual
//! `ε = max(0, C) / λ_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperplane::{select_affine, AffineConfig, Instance};
use crate::numerics::{Point, PointTable, Scalar};

/// Rungs `2^0, 2^1, …, 2^log2_max`.
pub fn power_ladder<S: Scalar>(log2_max: u32) -> Vec<S> {
    (0..=log2_max).map(S::pow2).collect()
}

/// Lifted instance on the sampled cone `Z = {λ·y}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeInstance<S> {
    pub ladder: Vec<S>,
    /// Points `Z` with values `H(x, z) = max{λ f(x, y) : λ y = z}`.
    pub lifted: Instance<S>,
}

pub fn lift_to_cone<S: Scalar>(inst: &Instance<S>, ladder: &[S]) -> Result<ConeInstance<S>> {
    let valid = ladder
        .first()
        .is_some_and(|l| l.total_cmp(&S::one()).is_eq())
        && ladder.iter().all(|l| l.sign().is_gt())
        && ladder.windows(2).all(|w| w[0].total_cmp(&w[1]).is_lt());
    if !valid {
        return Err(Error::InvalidLadder);
    }
    let nx = inst.nx();
    let entries = ladder.iter().flat_map(|lambda| {
        inst.y.iter().enumerate().map(move |(i, y)| {
            let vals = (0..nx)
                .map(|x| lambda.clone() * inst.f[x][i].clone())
                .collect();
            (y.scale(lambda), vals)
        })
    });
    let (points, f) = PointTable::from_entries(inst.n, nx, entries)?.into_parts();
    Ok(ConeInstance {
        ladder: ladder.to_vec(),
        lifted: Instance {
            n: inst.n,
            x_ids: inst.x_ids.clone(),
            y: points,
            f,
            phi: None,
            y0: None,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConfig {
    /// `λ_max = 2^lambda_max_log2` on the first attempt.
    pub lambda_max_log2: u32,
    /// Extra attempts, each doubling `λ_max`, while some parameter is inexact.
    pub doublings: u32,
    pub affine: AffineConfig,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            lambda_max_log2: 20,
            doublings: 3,
            affine: AffineConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearAttempt {
    pub lambda_max_log2: u32,
    pub exact: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSelector<S> {
    pub a: Vec<Point<S>>,
    pub epsilon: Vec<S>,
    /// Whether `f(x, y) <= A(x)·y` holds with zero slack.
    pub exact: Vec<bool>,
    /// Constant term of the lifted affine dominator.
    pub lifted_c: Vec<S>,
    pub lambda_max: S,
    pub attempts: Vec<LinearAttempt>,
}

fn exact_flags<S: Scalar>(inst: &Instance<S>, a: &[Point<S>]) -> Vec<bool> {
    (0..inst.nx())
        .map(|x| {
            inst.y
                .iter()
                .enumerate()
                .all(|(i, y)| inst.f[x][i].at_most(&y.dot(a[x].coords())))
        })
        .collect()
}

pub fn select_linear<S: Scalar>(
    inst: &Instance<S>,
    config: &LinearConfig,
) -> Result<LinearSelector<S>> {
    let mut attempts = Vec::new();
    let mut step = 0;
    loop {
        let log2 = config.lambda_max_log2 + step;
        let ladder = power_ladder::<S>(log2);
        let lambda_max = ladder.last().expect("non-empty ladder").clone();
        let cone = lift_to_cone(inst, &ladder)?;
        let (sel, _) = select_affine(&cone.lifted, &config.affine)?;
        let epsilon: Vec<S> = sel
            .c
            .iter()
            .map(|c| c.clone().max_of(S::zero()) / lambda_max.clone())
            .collect();
        let exact = exact_flags(inst, &sel.b);
        attempts.push(LinearAttempt {
            lambda_max_log2: log2,
            exact: exact.clone(),
        });
        if exact.iter().all(|&e| e) || step >= config.doublings {
            return Ok(LinearSelector {
                a: sel.b,
                epsilon,
                exact,
                lifted_c: sel.c,
                lambda_max,
                attempts,
            });
        }
        step += 1;
    }
}

/// The sample pushed through the feature map: `G(x, z) = max{f(x, y) : φ(y) = z}`.
pub fn push_forward<S: Scalar>(inst: &Instance<S>) -> Result<Instance<S>> {
    let phi = inst
        .phi
        .as_ref()
        .ok_or_else(|| Error::PhiNotTotal("instance has no feature map".into()))?;
    if phi.len() != inst.y.len() {
        return Err(Error::PhiNotTotal(format!(
            "{} images for {} points",
            phi.len(),
            inst.y.len()
        )));
    }
    let m = phi.first().map_or(0, Point::dim);
    let nx = inst.nx();
    let entries = phi
        .iter()
        .enumerate()
        .map(|(i, z)| (z.clone(), (0..nx).map(|x| inst.f[x][i].clone()).collect()));
    let (points, f) = PointTable::from_entries(m, nx, entries)?.into_parts();
    Ok(Instance {
        n: m,
        x_ids: inst.x_ids.clone(),
        y: points,
        f,
        phi: None,
        y0: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSelection<S> {
    pub pushed: Instance<S>,
    pub selector: LinearSelector<S>,
}

/// Linear dominator over features: `f(x, y) <= A(x)·φ(y) + ε(x)`.
pub fn feature_select<S: Scalar>(
    inst: &Instance<S>,
    config: &LinearConfig,
) -> Result<FeatureSelection<S>> {
    let pushed = push_forward(inst)?;
    let selector = select_linear(&pushed, config)?;
    Ok(FeatureSelection { pushed, selector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{parse_rational, Rational};
    use crate::oracle::{fm_feasible, verify_domination, DominationKind};

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn pt(cs: &[&str]) -> Point<Rational> {
        Point(cs.iter().map(|c| q(c)).collect())
    }

    fn one_d(pts: &[&str], rows: &[&[&str]]) -> Instance<Rational> {
        Instance::new(
            1,
            (0..rows.len()).map(|i| format!("x{i}")).collect(),
            pts.iter().map(|p| pt(&[p])).collect(),
            rows.iter()
                .map(|r| r.iter().map(|s| q(s)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn quick() -> LinearConfig {
        LinearConfig {
            lambda_max_log2: 6,
            doublings: 2,
            ..LinearConfig::default()
        }
    }

    #[test]
    fn lift_examples() {
        let c = lift_to_cone(&one_d(&["1"], &[&["5"]]), &[q("1"), q("4")]).unwrap();
        assert_eq!(c.lifted.y.points(), &[pt(&["1"]), pt(&["4"])]);
        assert_eq!(c.lifted.f[0], vec![q("5"), q("20")]);

        let c = lift_to_cone(&one_d(&["1", "2"], &[&["3", "10"]]), &[q("1"), q("2")]).unwrap();
        assert_eq!(c.lifted.y.points(), &[pt(&["1"]), pt(&["2"]), pt(&["4"])]);
        assert_eq!(c.lifted.f[0], vec![q("3"), q("10"), q("20")]);

        let base = one_d(&["-1", "2"], &[&["0", "1"]]);
        let c = lift_to_cone(&base, &[q("1")]).unwrap();
        assert_eq!(c.lifted.y, base.y);
        assert_eq!(c.lifted.f, base.f);

        assert!(matches!(
            lift_to_cone(&base, &[q("1"), q("-2")]),
            Err(Error::InvalidLadder)
        ));
        assert!(matches!(
            lift_to_cone(&base, &[q("2")]),
            Err(Error::InvalidLadder)
        ));
    }

    #[test]
    fn homogeneous_on_distinct_rays() {
        let inst = Instance::new(
            2,
            vec!["x".into()],
            vec![pt(&["1", "2"]), pt(&["-1", "1"]), pt(&["3", "-1"])],
            vec![vec![q("1/2"), q("-3"), q("2")]],
        )
        .unwrap();
        let ladder = power_ladder::<Rational>(4);
        let c = lift_to_cone(&inst, &ladder).unwrap();
        for (i, y) in inst.y.iter().enumerate() {
            for l in &ladder {
                let at = c.lifted.y.position(&y.scale(l)).unwrap();
                assert_eq!(c.lifted.f[0][at], l * &inst.f[0][i]);
            }
        }
    }

    #[test]
    fn linear_example_certified() {
        let inst = one_d(&["-1", "2"], &[&["-2", "4"]]);
        let sel = select_linear(&inst, &quick()).unwrap();
        let rep = verify_domination(&inst, &sel.a, &sel.epsilon, DominationKind::Linear).unwrap();
        assert!(rep.passed);
        for (e, c) in sel.epsilon.iter().zip(&sel.lifted_c) {
            assert_eq!(e * &sel.lambda_max, c.clone().max(q("0")));
        }
        assert!(fm_feasible(&inst.y, &inst.f, true).unwrap()[0].feasible);
    }

    #[test]
    fn positive_origin_is_never_exact() {
        let inst = one_d(&["-1", "0", "1"], &[&["0", "1", "0"]]);
        let sel = select_linear(&inst, &quick()).unwrap();
        assert_eq!(sel.attempts.len(), 3);
        assert!(sel.attempts.iter().all(|a| !a.exact[0]));
        let rep = verify_domination(&inst, &sel.a, &sel.epsilon, DominationKind::Linear).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn zero_function() {
        let inst = one_d(&["-1", "3"], &[&["0", "0"]]);
        let sel = select_linear(&inst, &quick()).unwrap();
        assert!(
            verify_domination(&inst, &sel.a, &sel.epsilon, DominationKind::Linear)
                .unwrap()
                .passed
        );
        assert!(sel.epsilon[0] >= q("0"));
    }

    #[test]
    fn feature_map_examples() {
        // φ(y) = (y, 1): the linear dominator over features is an affine one.
        let base = one_d(&["-1", "2"], &[&["0", "1"]]);
        let phi: Vec<Point<Rational>> = base
            .y
            .iter()
            .map(|y| Point(vec![y.0[0].clone(), q("1")]))
            .collect();
        let inst = Instance::with_extras(
            1,
            base.x_ids.clone(),
            base.y.points().to_vec(),
            base.f.clone(),
            Some(phi.clone()),
            None,
        )
        .unwrap();
        let fs = feature_select(&inst, &quick()).unwrap();
        let a = &fs.selector.a[0];
        for (i, z) in phi.iter().enumerate() {
            assert!(inst.f[0][i] <= z.dot(a.coords()) + fs.selector.epsilon[0].clone());
        }

        // Injective φ: same selector as on the pushed instance directly.
        let direct = select_linear(&fs.pushed, &quick()).unwrap();
        assert_eq!(direct, fs.selector);

        // Constant φ ≡ 2: G = max f, feasible iff some scalar a has G <= 2a.
        let phi = vec![pt(&["2"]); 2];
        let inst = Instance::with_extras(
            1,
            vec!["x".into()],
            vec![pt(&["-1"]), pt(&["2"])],
            vec![vec![q("3"), q("-1")]],
            Some(phi),
            None,
        )
        .unwrap();
        let pushed = push_forward(&inst).unwrap();
        assert_eq!(pushed.y.len(), 1);
        assert_eq!(pushed.f[0], vec![q("3")]);
        let res = fm_feasible(&pushed.y, &pushed.f, true).unwrap();
        assert_eq!(res[0].witness, Some(vec![q("3/2")]));

        assert!(matches!(push_forward(&base), Err(Error::PhiNotTotal(_))));
    }
}
