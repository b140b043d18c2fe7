//! Command-line front end. Every invocation prints one JSON report to stdout.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conelift::{feature_select, select_linear, LinearConfig, LinearSelector};
use crate::error::{Error, Result};
use crate::hyperplane::{select_affine, AffineConfig, BaseRule, Instance, RecursionTrace};
use crate::instances::{generate, Family, GenParams, InstanceFile};
use crate::numerics::{parse_rational, rational_from_f64, Float, Point, Rational, Scalar};
use crate::oracle::{
    verify_affine, verify_domination, verify_working_tables, DominationKind, DominationReport,
    SlackSummary,
};
use crate::sandwich::{sandwich_functions, FiniteFunction, SandwichConfig, SandwichMode};
use crate::subgradient::{
    check_midpoint_convexity, select_subgradient, subgradient_slack, SubgradientBackend,
    SubgradientConfig,
};

pub const THREADS_ENV: &str = "AFFSEL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "affsel",
    version,
    about = "Parameter-wise affine, linear and subgradient selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded random instance.
    Gen(GenArgs),
    /// Compute a selector for an instance file.
    #[command(subcommand)]
    Select(SelectCommand),
    /// Sandwich a function between two finite functions u <= l.
    Sandwich(SandwichArgs),
    /// Check a stored selector against an instance.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
enum SelectCommand {
    /// Affine dominators B(x)·y + C(x).
    Affine(AffineArgs),
    /// Linear dominators A(x)·y + ε(x) through the cone lift.
    Linear(LinearArgs),
    /// Linear dominators over the feature map phi.
    Feature(LinearArgs),
    /// Subgradients at the base point.
    Subgradient(SubgradientArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FamilyArg {
    Affine,
    Meager,
    Convex,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    #[default]
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SandwichArg {
    #[default]
    Midpoint,
    Staged,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BaseArg {
    #[default]
    Novikov,
    Tight,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendArg {
    #[default]
    Exact,
    Cone,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Affine,
    Linear,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value_t = 8)]
    ny: usize,
    /// Affine pieces per convex section.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    zero_slack: bool,
    /// Trailing parameters that copy an earlier row.
    #[arg(long, default_value_t = 0)]
    duplicates: usize,
    /// Meager family: add the origin with a positive value.
    #[arg(long)]
    origin_bump: bool,
    /// Convex family: random base point per parameter.
    #[arg(long)]
    shift: bool,
    /// Output file; the instance is embedded in the report when omitted.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RecursionArgs {
    #[arg(long, value_enum, default_value_t)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t)]
    sandwich: SandwichArg,
    #[arg(long, default_value_t = SandwichConfig::DEFAULT_DEPTH)]
    depth: u32,
    #[arg(long, value_enum, default_value_t)]
    base: BaseArg,
}

impl RecursionArgs {
    fn affine_config(&self, record_tables: bool) -> AffineConfig {
        AffineConfig {
            sandwich: SandwichConfig {
                mode: match self.sandwich {
                    SandwichArg::Midpoint => SandwichMode::Midpoint,
                    SandwichArg::Staged => SandwichMode::Staged,
                },
                depth: self.depth,
            },
            base: match self.base {
                BaseArg::Novikov => BaseRule::Novikov,
                BaseArg::Tight => BaseRule::Tight,
            },
            record_tables,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct AffineArgs {
    file: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    recursion: RecursionArgs,
    #[arg(long)]
    verify: bool,
    /// Include per-node brackets in the trace summary.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args, Serialize)]
struct LadderArgs {
    /// Largest rung of the scale ladder, a power of two such as 2^20.
    #[arg(long, default_value = "2^20")]
    lambda_max: String,
    #[arg(long, default_value_t = 3)]
    doublings: u32,
}

#[derive(Debug, Args, Serialize)]
struct LinearArgs {
    file: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    ladder: LadderArgs,
    #[command(flatten)]
    #[serde(flatten)]
    recursion: RecursionArgs,
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Args, Serialize)]
struct SubgradientArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    backend: BackendArg,
    /// Move each base point y0(x) to the origin first.
    #[arg(long)]
    shift: bool,
    /// Test midpoint convexity on collinear triples of the sample.
    #[arg(long)]
    check_convexity: bool,
    #[command(flatten)]
    #[serde(flatten)]
    ladder: LadderArgs,
    #[command(flatten)]
    #[serde(flatten)]
    recursion: RecursionArgs,
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Args, Serialize)]
struct SandwichArgs {
    file_u: PathBuf,
    file_l: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    mode: SandwichArg,
    #[arg(long, default_value_t = SandwichConfig::DEFAULT_DEPTH)]
    depth: u32,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    file: PathBuf,
    selector_file: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum, default_value_t)]
    mode: ModeArg,
}

/// One parameter's output. Fields depend on the selector kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectorEntry {
    pub x: String,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorFile {
    pub kind: String,
    pub entries: Vec<SelectorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackEntry {
    pub x: String,
    pub min_slack: Option<String>,
    pub argmin: Option<Vec<String>>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub kind: String,
    pub passed: bool,
    pub per_x: Vec<SlackEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub working_points: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    pub wall_time_ms: f64,
}

impl RunReport {
    fn new(command: &str, config: Value) -> Self {
        RunReport {
            command: command.to_string(),
            config,
            selector: None,
            output: None,
            verification: None,
            trace: None,
            error: None,
            exit_code: 0,
            wall_time_ms: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

/// What the process writes and returns.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn parse_log2(text: &str) -> Result<u32> {
    let bad = || Error::InvalidInput(format!("lambda-max must be a power of two, got {text:?}"));
    let t = text.trim();
    if let Some(exp) = t.strip_prefix("2^") {
        return exp.parse().map_err(|_| bad());
    }
    let v: u64 = t.parse().map_err(|_| bad())?;
    if v.is_power_of_two() {
        Ok(v.trailing_zeros())
    } else {
        Err(bad())
    }
}

impl LadderArgs {
    fn linear_config(&self, affine: AffineConfig) -> Result<LinearConfig> {
        Ok(LinearConfig {
            lambda_max_log2: parse_log2(&self.lambda_max)?,
            doublings: self.doublings,
            affine,
        })
    }
}

/// Rationals as `p/q`, plus decimal or exponent notation from float-mode reports.
fn parse_scalar<S: Scalar>(text: &str) -> Result<S> {
    if let Ok(r) = parse_rational(text) {
        return Ok(S::from_rational(&r));
    }
    text.trim()
        .parse::<f64>()
        .ok()
        .and_then(rational_from_f64)
        .map(|r| S::from_rational(&r))
        .ok_or_else(|| Error::Parse(format!("not a number: {text:?}")))
}

fn parse_coords<S: Scalar>(coords: &[String]) -> Result<Point<S>> {
    coords
        .iter()
        .map(|c| parse_scalar(c))
        .collect::<Result<_>>()
        .map(Point)
}

fn slack_entries<S: Scalar>(inst: &Instance<S>, per_x: &[SlackSummary<S>]) -> Vec<SlackEntry> {
    per_x
        .iter()
        .enumerate()
        .map(|(x, s)| SlackEntry {
            x: inst.x_ids[x].clone(),
            min_slack: s.min_slack.as_ref().map(Scalar::render),
            argmin: s.argmin.map(|i| inst.y.get(i).render()),
            passed: s.passed,
        })
        .collect()
}

fn domination_summary<S: Scalar>(inst: &Instance<S>, rep: &DominationReport<S>) -> Verification {
    Verification {
        kind: match rep.kind {
            DominationKind::Affine => "affine".into(),
            DominationKind::Linear => "linear".into(),
        },
        passed: rep.passed,
        per_x: slack_entries(inst, &rep.per_x),
        working_points: None,
    }
}

fn trace_summary<S: Scalar>(
    inst: &Instance<S>,
    trace: &RecursionTrace<S>,
    detailed: bool,
) -> Value {
    let levels: Vec<Value> = trace
        .levels
        .iter()
        .map(|lv| {
            let mut v = json!({
                "dim": lv.dim,
                "plus": lv.plus,
                "minus": lv.minus,
                "zero": lv.zero,
                "generated": lv.generated,
                "pairs": lv.pairs,
            });
            if detailed {
                v["brackets"] = lv
                    .brackets
                    .iter()
                    .zip(&lv.last_coefficient)
                    .enumerate()
                    .map(|(x, (b, coef))| {
                        json!({
                            "x": inst.x_ids[x],
                            "U": b.u.as_ref().map(Scalar::render),
                            "L": b.l.as_ref().map(Scalar::render),
                            "B": coef.render(),
                        })
                    })
                    .collect();
            }
            v
        })
        .collect();
    let mut out = json!({
        "levels": levels,
        "bracket_violations": trace.bracket_violations(),
    });
    if detailed {
        out["base"] = trace.base.iter().map(Scalar::render).collect();
    }
    out
}

fn load_instance<S: Scalar>(path: &Path) -> Result<Instance<S>> {
    InstanceFile::read(path)?.to_instance()
}

fn select_affine_cmd<S: Scalar>(args: &AffineArgs, report: &mut RunReport) -> Result<()> {
    let inst = load_instance::<S>(&args.file)?;
    let config = args.recursion.affine_config(args.verify);
    let (sel, trace) = select_affine(&inst, &config)?;
    report.selector = Some(SelectorFile {
        kind: "affine".into(),
        entries: (0..inst.nx())
            .map(|x| SelectorEntry {
                x: inst.x_ids[x].clone(),
                b: Some(sel.b[x].render()),
                c: Some(sel.c[x].render()),
                ..SelectorEntry::default()
            })
            .collect(),
    });
    report.trace = Some(trace_summary(&inst, &trace, args.trace));
    if args.verify {
        let rep = verify_affine(&inst, &sel)?;
        let mut summary = domination_summary(&inst, &rep);
        let work = verify_working_tables(&sel, &trace)?;
        summary.passed &= work.violations == 0;
        summary.working_points = Some(json!({
            "checked": work.points_checked,
            "violations": work.violations,
        }));
        report.verification = Some(summary);
    }
    Ok(())
}

fn linear_entries<S: Scalar>(inst: &Instance<S>, sel: &LinearSelector<S>) -> SelectorFile {
    SelectorFile {
        kind: "linear".into(),
        entries: (0..inst.nx())
            .map(|x| SelectorEntry {
                x: inst.x_ids[x].clone(),
                a: Some(sel.a[x].render()),
                epsilon: Some(sel.epsilon[x].render()),
                exact: Some(sel.exact[x]),
                ..SelectorEntry::default()
            })
            .collect(),
    }
}

fn linear_output<S: Scalar>(sel: &LinearSelector<S>) -> Value {
    json!({
        "lambda_max": sel.lambda_max.render(),
        "lifted_C": sel.lifted_c.iter().map(Scalar::render).collect::<Vec<_>>(),
        "attempts": sel
            .attempts
            .iter()
            .map(|a| json!({"lambda_max_log2": a.lambda_max_log2, "exact": a.exact}))
            .collect::<Vec<_>>(),
    })
}

fn select_linear_cmd<S: Scalar>(
    args: &LinearArgs,
    feature: bool,
    report: &mut RunReport,
) -> Result<()> {
    let inst = load_instance::<S>(&args.file)?;
    let config = args
        .ladder
        .linear_config(args.recursion.affine_config(false))?;
    if feature {
        let fs = feature_select(&inst, &config)?;
        report.selector = Some(linear_entries(&inst, &fs.selector));
        let mut out = linear_output(&fs.selector);
        out["features"] = json!(fs.pushed.n);
        out["feature_points"] = json!(fs.pushed.y.len());
        report.output = Some(out);
        if args.verify {
            // Check on the original sample through φ, not on the pushed table.
            let phi = inst.phi.as_ref().expect("feature_select checked phi");
            let mut per_x = Vec::with_capacity(inst.nx());
            for x in 0..inst.nx() {
                let points = crate::numerics::PointSet::from_points(fs.pushed.n, phi.clone())?;
                let values: Vec<S> = points
                    .iter()
                    .map(|z| {
                        phi.iter()
                            .zip(&inst.f[x])
                            .filter(|(w, _)| w.same_as(z))
                            .map(|(_, v)| v.clone())
                            .reduce(Scalar::max_of)
                            .expect("image of some point")
                    })
                    .collect();
                let rep = crate::oracle::verify_points(
                    &points,
                    &[values],
                    &fs.selector.a[x..=x],
                    &fs.selector.epsilon[x..=x],
                    DominationKind::Linear,
                )?;
                per_x.push(SlackEntry {
                    x: inst.x_ids[x].clone(),
                    min_slack: rep.per_x[0].min_slack.as_ref().map(Scalar::render),
                    argmin: rep.per_x[0].argmin.map(|i| points.get(i).render()),
                    passed: rep.passed,
                });
            }
            report.verification = Some(Verification {
                kind: "feature".into(),
                passed: per_x.iter().all(|e| e.passed),
                per_x,
                working_points: None,
            });
        }
    } else {
        let sel = select_linear(&inst, &config)?;
        report.selector = Some(linear_entries(&inst, &sel));
        report.output = Some(linear_output(&sel));
        if args.verify {
            let rep = verify_domination(&inst, &sel.a, &sel.epsilon, DominationKind::Linear)?;
            report.verification = Some(domination_summary(&inst, &rep));
        }
    }
    Ok(())
}

fn select_subgradient_cmd<S: Scalar>(args: &SubgradientArgs, report: &mut RunReport) -> Result<()> {
    let inst = load_instance::<S>(&args.file)?;
    let config = SubgradientConfig {
        backend: match args.backend {
            BackendArg::Exact => SubgradientBackend::Exact,
            BackendArg::Cone => SubgradientBackend::Cone,
        },
        shift: args.shift,
        linear: args
            .ladder
            .linear_config(args.recursion.affine_config(false))?,
    };
    let mut convexity_ok = true;
    if args.check_convexity {
        let bad = check_midpoint_convexity(&inst);
        convexity_ok = bad.is_empty();
        report.output = Some(json!({
            "convexity_violations": bad
                .iter()
                .map(|&(x, a, b)| json!({
                    "x": inst.x_ids[x],
                    "a": inst.y.get(a).render(),
                    "b": inst.y.get(b).render(),
                }))
                .collect::<Vec<_>>(),
        }));
    }
    let sel = select_subgradient(&inst, &config)?;
    report.selector = Some(SelectorFile {
        kind: "subgradient".into(),
        entries: (0..inst.nx())
            .map(|x| SelectorEntry {
                x: inst.x_ids[x].clone(),
                p: Some(sel.p[x].render()),
                epsilon: Some(sel.epsilon[x].render()),
                ..SelectorEntry::default()
            })
            .collect(),
    });
    if args.verify || args.check_convexity {
        let per_x = if args.verify {
            slack_entries(&inst, &subgradient_slack(&inst, &sel, args.shift)?)
        } else {
            Vec::new()
        };
        report.verification = Some(Verification {
            kind: "subgradient".into(),
            passed: convexity_ok && per_x.iter().all(|e| e.passed),
            per_x,
            working_points: None,
        });
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct FunctionFile {
    #[serde(rename = "X")]
    x: Vec<String>,
    values: Vec<String>,
}

fn load_function(path: &Path) -> Result<FiniteFunction<Rational>> {
    let file: FunctionFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let values = file
        .values
        .iter()
        .map(|v| parse_rational(v))
        .collect::<Result<_>>()?;
    FiniteFunction::new(file.x, values)
}

fn sandwich_cmd(args: &SandwichArgs, report: &mut RunReport) -> Result<()> {
    let u = load_function(&args.file_u)?;
    let l = load_function(&args.file_l)?;
    let config = SandwichConfig {
        mode: match args.mode {
            SandwichArg::Midpoint => SandwichMode::Midpoint,
            SandwichArg::Staged => SandwichMode::Staged,
        },
        depth: args.depth,
    };
    let (f, range) = sandwich_functions(&u, &l, config)?;
    report.output = Some(json!({
        "X": f.ids,
        "values": f.values.iter().map(Scalar::render).collect::<Vec<_>>(),
        "range": range.render(),
    }));
    Ok(())
}

fn load_selector(path: &Path) -> Result<SelectorFile> {
    let value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let inner = value.get("selector").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner)?)
}

fn verify_cmd<S: Scalar>(args: &VerifyArgs, report: &mut RunReport) -> Result<()> {
    let inst = load_instance::<S>(&args.file)?;
    let sel = load_selector(&args.selector_file)?;
    let mut coeffs = Vec::with_capacity(inst.nx());
    let mut offsets = Vec::with_capacity(inst.nx());
    for id in &inst.x_ids {
        let entry = sel
            .entries
            .iter()
            .find(|e| &e.x == id)
            .ok_or_else(|| Error::InvalidInput(format!("selector has no entry for {id}")))?;
        let missing = |field: &str| Error::InvalidInput(format!("entry {id} has no {field}"));
        let (coeff, offset) = match args.kind {
            KindArg::Affine => (
                entry.b.as_ref().ok_or_else(|| missing("B"))?,
                entry.c.as_deref().ok_or_else(|| missing("C"))?,
            ),
            KindArg::Linear => (
                entry.a.as_ref().ok_or_else(|| missing("A"))?,
                entry.epsilon.as_deref().unwrap_or("0"),
            ),
        };
        coeffs.push(parse_coords::<S>(coeff)?);
        offsets.push(parse_scalar::<S>(offset)?);
    }
    let kind = match args.kind {
        KindArg::Affine => DominationKind::Affine,
        KindArg::Linear => DominationKind::Linear,
    };
    let rep = verify_domination(&inst, &coeffs, &offsets, kind)?;
    report.verification = Some(domination_summary(&inst, &rep));
    Ok(())
}

fn gen_cmd(args: &GenArgs, report: &mut RunReport) -> Result<()> {
    let family = match args.family {
        FamilyArg::Affine => Family::Affine,
        FamilyArg::Meager => Family::Meager,
        FamilyArg::Convex => Family::Convex,
    };
    let params = GenParams {
        seed: args.seed,
        n: args.n,
        nx: args.nx,
        ny: args.ny,
        k: args.k,
        zero_slack: args.zero_slack,
        duplicates: args.duplicates,
        origin_bump: args.origin_bump,
        shift: args.shift,
    };
    let file = generate(family, &params)?;
    let mut out = json!({
        "n": file.n,
        "nx": file.x.len(),
        "ny": file.y.len(),
    });
    match &args.output {
        Some(path) => {
            std::fs::write(path, file.to_json())?;
            out["file"] = json!(path);
        }
        None => out["instance"] = serde_json::to_value(&file)?,
    }
    report.output = Some(out);
    Ok(())
}

fn dispatch(command: &Command, report: &mut RunReport) -> Result<()> {
    match command {
        Command::Gen(a) => gen_cmd(a, report),
        Command::Sandwich(a) => sandwich_cmd(a, report),
        Command::Verify(a) => match a.mode {
            ModeArg::Exact => verify_cmd::<Rational>(a, report),
            ModeArg::Float => verify_cmd::<Float>(a, report),
        },
        Command::Select(SelectCommand::Affine(a)) => match a.recursion.mode {
            ModeArg::Exact => select_affine_cmd::<Rational>(a, report),
            ModeArg::Float => select_affine_cmd::<Float>(a, report),
        },
        Command::Select(SelectCommand::Linear(a)) => match a.recursion.mode {
            ModeArg::Exact => select_linear_cmd::<Rational>(a, false, report),
            ModeArg::Float => select_linear_cmd::<Float>(a, false, report),
        },
        Command::Select(SelectCommand::Feature(a)) => match a.recursion.mode {
            ModeArg::Exact => select_linear_cmd::<Rational>(a, true, report),
            ModeArg::Float => select_linear_cmd::<Float>(a, true, report),
        },
        Command::Select(SelectCommand::Subgradient(a)) => match a.recursion.mode {
            ModeArg::Exact => select_subgradient_cmd::<Rational>(a, report),
            ModeArg::Float => select_subgradient_cmd::<Float>(a, report),
        },
    }
}

fn describe(command: &Command) -> (&'static str, Value) {
    let cfg = |v: std::result::Result<Value, serde_json::Error>| v.unwrap_or(Value::Null);
    match command {
        Command::Gen(a) => ("gen", cfg(serde_json::to_value(a))),
        Command::Sandwich(a) => ("sandwich", cfg(serde_json::to_value(a))),
        Command::Verify(a) => ("verify", cfg(serde_json::to_value(a))),
        Command::Select(SelectCommand::Affine(a)) => {
            ("select affine", cfg(serde_json::to_value(a)))
        }
        Command::Select(SelectCommand::Linear(a)) => {
            ("select linear", cfg(serde_json::to_value(a)))
        }
        Command::Select(SelectCommand::Feature(a)) => {
            ("select feature", cfg(serde_json::to_value(a)))
        }
        Command::Select(SelectCommand::Subgradient(a)) => {
            ("select subgradient", cfg(serde_json::to_value(a)))
        }
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run(argv: &[String]) -> RunOutput {
    let start = Instant::now();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return RunOutput {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                };
            }
            let mut report =
                RunReport::new("", json!({ "argv": argv.get(1..).unwrap_or_default() }));
            report.error = Some(e.kind().to_string());
            report.exit_code = 1;
            report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            return RunOutput {
                code: 1,
                stdout: report.to_json(),
                stderr: text,
            };
        }
    };
    let (name, config) = describe(&cli.command);
    let mut report = RunReport::new(name, config);
    let mut stderr = String::new();
    let code = match dispatch(&cli.command, &mut report) {
        Ok(()) if report.verification.as_ref().is_some_and(|v| !v.passed) => {
            stderr.push_str("verification failed\n");
            2
        }
        Ok(()) => 0,
        Err(e) => {
            stderr.push_str(&format!("error: {e}\n"));
            report.error = Some(e.to_string());
            1
        }
    };
    report.exit_code = code;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    RunOutput {
        code,
        stdout: report.to_json(),
        stderr,
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        _ => eprintln!("ignoring {THREADS_ENV}={raw:?}: expected a positive integer"),
    }
}

/// Entry point for the binary: runs, prints, and returns the exit code.
pub fn main_with_args(argv: &[String]) -> i32 {
    configure_threads();
    let out = run(argv);
    eprint!("{}", out.stderr);
    print!("{}", out.stdout);
    out.code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("affsel")
            .chain(args.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn lambda_max_forms() {
        assert_eq!(parse_log2("2^20").unwrap(), 20);
        assert_eq!(parse_log2("1024").unwrap(), 10);
        assert!(parse_log2("1000").is_err());
        assert!(parse_log2("two").is_err());
    }

    #[test]
    fn unknown_flag_is_exit_one_with_usage() {
        let out = run(&argv(&["select", "affine", "x.json", "--bogus"]));
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("Usage"));
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["exit_code"], 1);
    }

    #[test]
    fn help_is_exit_zero() {
        let out = run(&argv(&["--help"]));
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("select"));
    }

    #[test]
    fn missing_file_is_exit_one() {
        let out = run(&argv(&["select", "affine", "/nonexistent/affsel.json"]));
        assert_eq!(out.code, 1);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert!(v["error"].is_string());
    }

    #[test]
    fn scalar_parsing_accepts_float_renderings() {
        assert_eq!(
            parse_scalar::<Rational>("0.5").unwrap(),
            parse_rational("1/2").unwrap()
        );
        assert_eq!(
            parse_scalar::<Rational>("-3/6").unwrap(),
            parse_rational("-1/2").unwrap()
        );
        assert!(parse_scalar::<Rational>("abc").is_err());
    }
}
