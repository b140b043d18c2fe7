//! JSON instance files and seeded generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hyperplane::Instance;
use crate::numerics::{parse_rational, Point, Rational, Scalar};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub n: usize,
    #[serde(rename = "X")]
    pub x: Vec<String>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<String>>,
    /// One row per parameter, aligned with `Y`.
    pub f: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

fn parse_point<S: Scalar>(coords: &[String], dim: usize) -> Result<Point<S>> {
    if coords.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: coords.len(),
        });
    }
    coords
        .iter()
        .map(|c| parse_rational(c).map(|r| S::from_rational(&r)))
        .collect::<Result<_>>()
        .map(Point)
}

fn render_point<S: Scalar>(p: &Point<S>) -> Vec<String> {
    p.render()
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported schema_version {}",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance files always serialize");
        s.push('\n');
        s
    }

    pub fn to_instance<S: Scalar>(&self) -> Result<Instance<S>> {
        let points = self
            .y
            .iter()
            .map(|p| parse_point(p, self.n))
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .f
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| parse_rational(v).map(|r| S::from_rational(&r)))
                    .collect::<Result<Vec<S>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = match &self.phi {
            Some(table) => {
                let m = table.first().map_or(0, Vec::len);
                Some(
                    table
                        .iter()
                        .map(|z| parse_point(z, m))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        let y0 = match &self.y0 {
            Some(table) => Some(
                table
                    .iter()
                    .map(|p| parse_point(p, self.n))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Instance::with_extras(self.n, self.x.clone(), points, rows, phi, y0)
    }

    /// Canonical file for an instance: sorted `Y`, normalized rationals.
    pub fn from_instance<S: Scalar>(inst: &Instance<S>, meta: Option<Value>) -> Self {
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            n: inst.n,
            x: inst.x_ids.clone(),
            y: inst.y.iter().map(render_point).collect(),
            f: inst
                .f
                .iter()
                .map(|row| row.iter().map(Scalar::render).collect())
                .collect(),
            phi: inst
                .phi
                .as_ref()
                .map(|t| t.iter().map(render_point).collect()),
            y0: inst
                .y0
                .as_ref()
                .map(|t| t.iter().map(render_point).collect()),
            meta,
        }
    }

    /// Re-renders through the exact instance, keeping `meta`.
    pub fn canonical(&self) -> Result<Self> {
        Ok(Self::from_instance(
            &self.to_instance::<Rational>()?,
            self.meta.clone(),
        ))
    }
}

/// Common generator knobs. `k` is the number of affine pieces for convex sections.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub seed: u64,
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub k: usize,
    /// Affine family: plant every slack as zero.
    pub zero_slack: bool,
    /// Number of trailing parameters whose rows copy earlier ones.
    pub duplicates: usize,
    /// Meager family: add the origin with `f(x, 0) > 0`.
    pub origin_bump: bool,
    /// Convex family: draw a base point per parameter and shift the sections.
    pub shift: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            n: 1,
            nx: 1,
            ny: 4,
            k: 2,
            zero_slack: false,
            duplicates: 0,
            origin_bump: false,
            shift: false,
        }
    }
}

const COORD_BOUND: i64 = 5;
const MAX_DEN: i64 = 8;

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    let den = rng.gen_range(1..=MAX_DEN);
    let num = rng.gen_range(-COORD_BOUND * den..=COORD_BOUND * den);
    Rational::new(num.into(), den.into())
}

fn nonneg_rational(rng: &mut ChaCha8Rng, bound: i64) -> Rational {
    let den = rng.gen_range(1..=MAX_DEN);
    Rational::new(rng.gen_range(0..=bound * den).into(), den.into())
}

fn small_point(rng: &mut ChaCha8Rng, n: usize) -> Point<Rational> {
    Point((0..n).map(|_| small_rational(rng)).collect())
}

/// Up to `count` distinct points; `n = 0` has only the empty point.
fn distinct_points(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Point<Rational>> {
    let mut out: Vec<Point<Rational>> = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < count * 50 {
        tries += 1;
        let p = small_point(rng, n);
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn ids(nx: usize) -> Vec<String> {
    (0..nx).map(|i| format!("x{i}")).collect()
}

fn render(r: &Rational) -> String {
    r.render()
}

/// Rows for `p.nx` parameters where the last `p.duplicates` copy earlier ones.
/// Returns the source index of each row.
fn duplicate_sources(rng: &mut ChaCha8Rng, p: &GenParams) -> Vec<usize> {
    let fresh = p.nx.saturating_sub(p.duplicates).max(1);
    (0..p.nx)
        .map(|x| {
            if x < fresh {
                x
            } else {
                rng.gen_range(0..fresh)
            }
        })
        .collect()
}

fn params_json(p: &GenParams) -> Value {
    serde_json::to_value(p).expect("params serialize")
}

fn duplicate_pairs(sources: &[usize]) -> Value {
    let pairs: Vec<[usize; 2]> = sources
        .iter()
        .enumerate()
        .filter(|(x, s)| *x != **s)
        .map(|(x, s)| [*s, x])
        .collect();
    json!(pairs)
}

/// `f(x, y) = b(x)·y + c(x) - s(x, y)` with planted `(b, c)` and slack `s >= 0`.
pub fn gen_affine_dominated(p: &GenParams) -> Result<InstanceFile> {
    if p.nx == 0 || p.ny == 0 {
        return Err(Error::InvalidInput("sizes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let points = distinct_points(&mut rng, p.n, p.ny);
    let sources = duplicate_sources(&mut rng, p);
    let mut witnesses: Vec<(Point<Rational>, Rational)> = Vec::new();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for &src in &sources {
        if src < rows.len() {
            witnesses.push(witnesses[src].clone());
            rows.push(rows[src].clone());
            continue;
        }
        let b = small_point(&mut rng, p.n);
        let c = small_rational(&mut rng);
        let row = points
            .iter()
            .map(|y| {
                let slack = if p.zero_slack || rng.gen_bool(0.3) {
                    Rational::from_integer(0.into())
                } else {
                    nonneg_rational(&mut rng, 3)
                };
                y.dot(b.coords()) + c.clone() - slack
            })
            .collect();
        rows.push(row);
        witnesses.push((b, c));
    }
    let meta = json!({
        "generator": "affine",
        "seed": p.seed,
        "params": params_json(p),
        "witness": witnesses
            .iter()
            .map(|(b, c)| json!({"B": b.render(), "C": render(c)}))
            .collect::<Vec<_>>(),
        "duplicates": duplicate_pairs(&sources),
    });
    let inst = Instance::new(p.n, ids(p.nx), points, rows)?;
    Ok(InstanceFile::from_instance(&inst, Some(meta)))
}

/// `f(x, y) = α(x)·y`, optionally with the origin added at a positive value.
pub fn gen_meager_linear(p: &GenParams) -> Result<InstanceFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut points = distinct_points(&mut rng, p.n, p.ny);
    let origin = Point::origin(p.n);
    if p.origin_bump && !points.contains(&origin) {
        points.push(origin.clone());
    }
    let sources = duplicate_sources(&mut rng, p);
    let mut alphas: Vec<Point<Rational>> = Vec::new();
    let mut bumps: Vec<Rational> = Vec::new();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for &src in &sources {
        if src < rows.len() {
            alphas.push(alphas[src].clone());
            bumps.push(bumps[src].clone());
            rows.push(rows[src].clone());
            continue;
        }
        let alpha = small_point(&mut rng, p.n);
        let bump = Rational::from_integer(rng.gen_range(1..=3).into());
        let row = points
            .iter()
            .map(|y| {
                if p.origin_bump && *y == origin {
                    bump.clone()
                } else {
                    y.dot(alpha.coords())
                }
            })
            .collect();
        rows.push(row);
        alphas.push(alpha);
        bumps.push(bump);
    }
    let mut meta = json!({
        "generator": "meager",
        "seed": p.seed,
        "params": params_json(p),
        "witness": alphas.iter().map(|a| json!({"A": a.render()})).collect::<Vec<_>>(),
        "duplicates": duplicate_pairs(&sources),
    });
    if p.origin_bump {
        meta["origin_values"] = json!(bumps.iter().map(render).collect::<Vec<_>>());
    }
    let inst = Instance::new(p.n, ids(p.nx), points, rows)?;
    Ok(InstanceFile::from_instance(&inst, Some(meta)))
}

/// `g(x, y) = max_j p_j(x)·y`, or with `shift`,
/// `g(x, y) = max_j p_j(x)·(y - y0(x)) + d(x)` for a base point `y0(x) ∈ Y`.
pub fn gen_convex_sections(p: &GenParams) -> Result<InstanceFile> {
    if p.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut points = distinct_points(&mut rng, p.n, p.ny);
    let origin = Point::origin(p.n);
    if !points.contains(&origin) {
        points.push(origin);
    }
    let sources = duplicate_sources(&mut rng, p);
    let mut slopes: Vec<Vec<Point<Rational>>> = Vec::new();
    let mut bases: Vec<(Point<Rational>, Rational)> = Vec::new();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for &src in &sources {
        if src < rows.len() {
            slopes.push(slopes[src].clone());
            bases.push(bases[src].clone());
            rows.push(rows[src].clone());
            continue;
        }
        let pieces: Vec<Point<Rational>> = (0..p.k).map(|_| small_point(&mut rng, p.n)).collect();
        let (base, offset) = if p.shift {
            let base = points.choose(&mut rng).expect("non-empty sample").clone();
            (base, small_rational(&mut rng))
        } else {
            (Point::origin(p.n), Rational::from_integer(0.into()))
        };
        let row = points
            .iter()
            .map(|y| {
                let d = y.sub(&base);
                pieces
                    .iter()
                    .map(|s| d.dot(s.coords()))
                    .max()
                    .expect("k >= 1")
                    + offset.clone()
            })
            .collect();
        rows.push(row);
        slopes.push(pieces);
        bases.push((base, offset));
    }
    let meta = json!({
        "generator": "convex",
        "seed": p.seed,
        "params": params_json(p),
        "witness": slopes
            .iter()
            .map(|s| json!({"slopes": s.iter().map(Point::render).collect::<Vec<_>>()}))
            .collect::<Vec<_>>(),
        "offsets": bases.iter().map(|(_, d)| render(d)).collect::<Vec<_>>(),
        "duplicates": duplicate_pairs(&sources),
    });
    let y0 = p
        .shift
        .then(|| bases.iter().map(|(b, _)| b.clone()).collect());
    let inst = Instance::with_extras(p.n, ids(p.nx), points, rows, None, y0)?;
    Ok(InstanceFile::from_instance(&inst, Some(meta)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Affine,
    Meager,
    Convex,
}

pub fn generate(family: Family, p: &GenParams) -> Result<InstanceFile> {
    match family {
        Family::Affine => gen_affine_dominated(p),
        Family::Meager => gen_meager_linear(p),
        Family::Convex => gen_convex_sections(p),
    }
}

/// Index pairs `(source, copy)` recorded by a generator.
pub fn recorded_duplicates(file: &InstanceFile) -> Vec<(usize, usize)> {
    file.meta
        .as_ref()
        .and_then(|m| m.get("duplicates"))
        .and_then(Value::as_array)
        .map(|pairs| {
            pairs
                .iter()
                .filter_map(|p| Some((p.get(0)?.as_u64()? as usize, p.get(1)?.as_u64()? as usize)))
                .collect()
        })
        .unwrap_or_default()
}

/// Planted per-parameter witness points under `meta.witness[x][key]`.
pub fn recorded_witness(file: &InstanceFile, key: &str) -> Result<Vec<Vec<Rational>>> {
    let list = file
        .meta
        .as_ref()
        .and_then(|m| m.get("witness"))
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("no witness recorded".into()))?;
    list.iter()
        .map(|w| {
            let v = w
                .get(key)
                .ok_or_else(|| Error::InvalidInput(format!("witness has no {key}")))?;
            let items: Vec<Value> = match v {
                Value::Array(a) => a.clone(),
                other => vec![other.clone()],
            };
            items
                .iter()
                .map(|c| {
                    c.as_str()
                        .ok_or_else(|| Error::Parse("witness entries must be strings".into()))
                        .and_then(parse_rational)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fm_feasible, verify_domination, DominationKind};
    use proptest::prelude::*;

    fn params(seed: u64, n: usize) -> GenParams {
        GenParams {
            seed,
            n,
            nx: 4,
            ny: 6,
            k: 3,
            ..GenParams::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        for family in [Family::Affine, Family::Meager, Family::Convex] {
            let a = generate(family, &params(7, 2)).unwrap().to_json();
            let b = generate(family, &params(7, 2)).unwrap().to_json();
            assert_eq!(a, b);
            assert_ne!(a, generate(family, &params(8, 2)).unwrap().to_json());
        }
    }

    #[test]
    fn planted_affine_witness_verifies() {
        for seed in 0..20 {
            let file = gen_affine_dominated(&params(seed, (seed % 4) as usize)).unwrap();
            let inst = file.to_instance::<Rational>().unwrap();
            let b: Vec<Point<Rational>> = recorded_witness(&file, "B")
                .unwrap()
                .into_iter()
                .map(Point)
                .collect();
            let c: Vec<Rational> = recorded_witness(&file, "C")
                .unwrap()
                .into_iter()
                .map(|v| v[0].clone())
                .collect();
            assert!(
                verify_domination(&inst, &b, &c, DominationKind::Affine)
                    .unwrap()
                    .passed
            );
            assert!(fm_feasible(&inst.y, &inst.f, false)
                .unwrap()
                .iter()
                .all(|r| r.feasible));
        }
    }

    #[test]
    fn zero_slack_is_exactly_affine() {
        let file = gen_affine_dominated(&GenParams {
            zero_slack: true,
            ..params(3, 2)
        })
        .unwrap();
        let inst = file.to_instance::<Rational>().unwrap();
        let b = recorded_witness(&file, "B").unwrap();
        let c = recorded_witness(&file, "C").unwrap();
        for x in 0..inst.nx() {
            for (i, y) in inst.y.iter().enumerate() {
                assert_eq!(inst.f[x][i], y.dot(&b[x]) + c[x][0].clone());
            }
        }
    }

    #[test]
    fn meager_families() {
        let file = gen_meager_linear(&params(11, 2)).unwrap();
        let inst = file.to_instance::<Rational>().unwrap();
        if let Some(i) = inst.y.position(&Point::origin(2)) {
            assert!(inst
                .f
                .iter()
                .all(|row| row[i] == Rational::from_integer(0.into())));
        }
        assert!(fm_feasible(&inst.y, &inst.f, true)
            .unwrap()
            .iter()
            .all(|r| r.feasible));

        let bumped = gen_meager_linear(&GenParams {
            origin_bump: true,
            ..params(11, 2)
        })
        .unwrap();
        let inst = bumped.to_instance::<Rational>().unwrap();
        let i = inst.y.position(&Point::origin(2)).unwrap();
        assert!(inst
            .f
            .iter()
            .all(|row| row[i] > Rational::from_integer(0.into())));
        assert!(fm_feasible(&inst.y, &inst.f, true)
            .unwrap()
            .iter()
            .all(|r| !r.feasible));
    }

    #[test]
    fn convex_examples() {
        let file = gen_convex_sections(&GenParams {
            k: 1,
            ..params(5, 2)
        })
        .unwrap();
        let inst = file.to_instance::<Rational>().unwrap();
        let meta = file.meta.as_ref().unwrap();
        for (x, row) in inst.f.iter().enumerate() {
            let s = &meta["witness"][x]["slopes"][0];
            let slope: Vec<Rational> = (0..2)
                .map(|j| parse_rational(s[j].as_str().unwrap()).unwrap())
                .collect();
            for (i, y) in inst.y.iter().enumerate() {
                assert_eq!(row[i], y.dot(&slope));
            }
        }
        let o = inst.y.position(&Point::origin(2)).unwrap();
        assert!(inst
            .f
            .iter()
            .all(|row| row[o] == Rational::from_integer(0.into())));

        let shifted = gen_convex_sections(&GenParams {
            shift: true,
            ..params(5, 2)
        })
        .unwrap();
        let inst = shifted.to_instance::<Rational>().unwrap();
        let y0 = inst.y0.as_ref().unwrap();
        assert!(y0.iter().all(|b| inst.y.contains(b)));
    }

    #[test]
    fn duplicates_copy_rows() {
        let file = gen_affine_dominated(&GenParams {
            duplicates: 2,
            ..params(9, 1)
        })
        .unwrap();
        let pairs = recorded_duplicates(&file);
        assert_eq!(pairs.len(), 2);
        for (s, c) in pairs {
            assert_eq!(file.f[s], file.f[c]);
        }
    }

    #[test]
    fn bare_integers_and_normalization() {
        let text = r#"{"schema_version":1,"n":1,"X":["a"],"Y":[["4/2"],["-1"]],"f":[["0","2/4"]]}"#;
        let file = InstanceFile::parse(text).unwrap();
        let canon = file.canonical().unwrap();
        assert_eq!(canon.y, vec![vec!["-1".to_string()], vec!["2".to_string()]]);
        assert_eq!(canon.f, vec![vec!["1/2".to_string(), "0".to_string()]]);
        assert!(InstanceFile::parse(r#"{"schema_version":2,"n":0,"X":[],"Y":[],"f":[]}"#).is_err());
        assert!(InstanceFile::parse(
            r#"{"schema_version":1,"n":1,"X":["a"],"Y":[["1/0"]],"f":[["0"]]}"#
        )
        .and_then(|f| f.to_instance::<Rational>())
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn parse_serialize_parse_is_identity(seed in 0u64..10_000, n in 0usize..4, fam in 0usize..3) {
            let family = [Family::Affine, Family::Meager, Family::Convex][fam];
            let file = generate(family, &GenParams { seed, n, nx: 3, ny: 5, k: 2, shift: seed % 2 == 0, ..GenParams::default() }).unwrap();
            let text = file.to_json();
            let back = InstanceFile::parse(&text).unwrap();
            prop_assert_eq!(&back, &file);
            prop_assert_eq!(back.to_json(), text);
            prop_assert_eq!(back.canonical().unwrap(), file);
        }
    }
}
