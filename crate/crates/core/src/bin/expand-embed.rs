//! Batch front end over the embedding library. Every run prints a single
//! JSON report to stdout with the resolved configuration embedded, so a
//! report regenerates itself. Exit code 0 means success with no
//! violations, 1 means violations were found, 2 means a usage or input
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use expand_embed::constructor::{build_sard_witness, schedule_from_f64, BoxFamily};
use expand_embed::geometry::grid::GridSet;
use expand_embed::geometry::perimeter::{
    check_key, check_peri, default_sweep, p0_estimate, p_estimate, seeded_box_unions,
};
use expand_embed::geometry::properties::{
    assemble_property_family, check_k_conditions, check_properties,
};
use expand_embed::index_tree::DistanceModel;
use expand_embed::modulus::ModulusSpec;
use expand_embed::rational::{rat_to_f64, rat_to_string};
use expand_embed::verifier::{cross_check, verify_embedding, verify_modulus, Mode};
use expand_embed::{Error, Result};

#[derive(Parser)]
#[command(name = "expand-embed", version, about = "tree-distance embedding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyKind {
    Power,
    Powerlog,
    Table,
    /// geometric scale sequence r_n = base^n with exact gap boxes
    Cantor,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value_t = FamilyKind::Power)]
    family: FamilyKind,
    /// power exponent
    #[arg(long)]
    p: Option<f64>,
    /// logarithmic correction exponent (powerlog only)
    #[arg(long)]
    a: Option<f64>,
    /// CSV file of r,omega samples (table only)
    #[arg(long)]
    table: Option<PathBuf>,
    /// ambient dimension
    #[arg(long, default_value_t = 2)]
    d: u32,
    /// geometric base for the cantor family
    #[arg(long, default_value_t = 0.25)]
    base: f64,
}

impl FamilyArgs {
    fn spec(&self) -> Result<ModulusSpec> {
        let spec = match self.family {
            FamilyKind::Power => {
                let p = self.p.ok_or_else(|| Error::InvalidInput("--p required".into()))?;
                ModulusSpec::power(p, self.d)
            }
            FamilyKind::Powerlog => {
                let p = self.p.ok_or_else(|| Error::InvalidInput("--p required".into()))?;
                let a = self.a.ok_or_else(|| Error::InvalidInput("--a required".into()))?;
                ModulusSpec::power_log(p, a, self.d)
            }
            FamilyKind::Table => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("--table required".into()))?;
                ModulusSpec::table_from_csv(&std::fs::read_to_string(path)?, self.d)?
            }
            FamilyKind::Cantor => {
                return Err(Error::InvalidInput(
                    "the cantor family has no modulus; use a power/powerlog/table family".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    fn describe(&self) -> Value {
        let name = match self.family {
            FamilyKind::Power => "power",
            FamilyKind::Powerlog => "powerlog",
            FamilyKind::Table => "table",
            FamilyKind::Cantor => "cantor",
        };
        let mut m = Map::new();
        m.insert("family".into(), json!(name));
        m.insert("d".into(), json!(self.d));
        if let Some(p) = self.p {
            m.insert("p".into(), json!(p));
        }
        if let Some(a) = self.a {
            m.insert("a".into(), json!(a));
        }
        if let Some(t) = &self.table {
            m.insert("table".into(), json!(t.display().to_string()));
        }
        if self.family == FamilyKind::Cantor {
            m.insert("base".into(), json!(self.base));
        }
        Value::Object(m)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Structural,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Exhaustive => Mode::Exhaustive,
            ModeArg::Structural => Mode::Structural,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KLaw {
    /// k_{n,m} = 2^{m-n}
    Pow2,
    /// k_{n,m} = 4^{m-n}
    Pow4,
}

impl KLaw {
    fn eval(&self, n: usize, m: usize) -> f64 {
        match self {
            KLaw::Pow2 => 2f64.powi((m - n) as i32),
            KLaw::Pow4 => 4f64.powi((m - n) as i32),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            KLaw::Pow2 => "pow2",
            KLaw::Pow4 => "pow4",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide convergence of the embedding series for a modulus family
    Classify {
        #[command(flatten)]
        fam: FamilyArgs,
        /// number of series terms to inspect
        #[arg(long, default_value_t = 16)]
        depth: usize,
    },
    /// Check monotonicity, convexity, and doubling of a modulus
    Admissibility {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Build the box family and pointwise witness for a gap schedule
    Construct {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// also write the report to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the non-contraction inequality on the constructed boxes
    VerifyEmbedding {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
    },
    /// Full pipeline: construct, verify the embedding, verify the witness
    /// modulus bound, and cross-check both verifier modes
    SardVerify {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
    },
    /// Partial sums of the axis bounding-box growth
    Growth {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long = "K", default_value_t = 40)]
        k_stages: usize,
    },
    /// Perimeter quotient estimates; fixed square/disk cases by default,
    /// a seeded random corpus with --random
    Perimeter {
        #[arg(long, default_value_t = false)]
        random: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// corpus size in random mode
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0.005)]
        h: f64,
        /// dilation radius scale
        #[arg(long, default_value_t = 0.05)]
        r: f64,
        /// relative tolerance for the inequality checks
        #[arg(long, default_value_t = 0.10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the covering family and measure its structural properties
    Properties {
        #[command(flatten)]
        fam: FamilyArgs,
        /// coarse level
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// fine level m
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// ancestor trim depth
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// rounding constant
        #[arg(long, default_value_t = 0.125)]
        c: f64,
        #[arg(long, value_enum, default_value_t = KLaw::Pow4)]
        k_law: KLaw,
        /// comparability constant in the gap condition
        #[arg(long = "C", default_value_t = 1.0)]
        c_big: f64,
        /// grid resolution override (power/powerlog families)
        #[arg(long)]
        h: Option<f64>,
    },
}

fn main() -> ExitCode {
    if let Ok(s) = std::env::var("EXPAND_EMBED_THREADS") {
        if let Ok(n) = s.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((report, clean)) => {
            println!("{}", canonical_json(&report));
            if clean {
                ExitCode::from(0)
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns the report plus whether the run is violation-free.
fn run(cmd: Command) -> Result<(Value, bool)> {
    match cmd {
        Command::Classify { fam, depth } => {
            let spec = fam.spec()?;
            let cls = spec.classify(depth)?;
            let report = json!({
                "command": "classify",
                "config": { "modulus": fam.describe(), "depth": depth },
                "classification": cls,
            });
            Ok((report, true))
        }
        Command::Admissibility { fam, grid } => {
            let spec = fam.spec()?;
            let rep = spec.check_admissibility(grid)?;
            let clean = rep.monotone_ok && rep.doubling_constant.is_finite();
            let report = json!({
                "command": "admissibility",
                "config": { "modulus": fam.describe(), "grid": grid },
                "admissibility": rep,
            });
            Ok((report, clean))
        }
        Command::Construct { fam, depth, out } => {
            let (schedule, spec) = build_schedule(&fam, depth)?;
            let family = BoxFamily::build(schedule.clone(), depth)?;
            let mut report = json!({
                "command": "construct",
                "config": { "modulus": fam.describe(), "depth": depth },
                "boxes": family.to_json(),
            });
            if spec.is_some() {
                let witness = build_sard_witness(&schedule, depth)?;
                report["witness"] = witness.to_json();
            }
            let text = canonical_json(&report);
            if let Some(path) = out {
                std::fs::write(path, &text)?;
            }
            Ok((report, true))
        }
        Command::VerifyEmbedding { fam, depth, mode } => {
            let (schedule, spec) = build_schedule(&fam, depth)?;
            let family = BoxFamily::build(schedule, depth)?;
            let model = match (&fam.family, spec) {
                (FamilyKind::Cantor, _) => {
                    DistanceModel::cantor_geometric(fam.base, depth)?
                }
                (_, Some(spec)) => DistanceModel::sard(spec, depth)?,
                _ => unreachable!(),
            };
            let rep = verify_embedding(&family, &model, depth, mode.into())?;
            let clean = rep.passed();
            let report = json!({
                "command": "verify-embedding",
                "config": { "modulus": fam.describe(), "depth": depth,
                            "mode": mode_name(mode) },
                "verification": rep,
            });
            Ok((report, clean))
        }
        Command::SardVerify { fam, depth, mode } => {
            let (schedule, spec) = build_schedule(&fam, depth)?;
            let spec = spec.ok_or_else(|| {
                Error::InvalidInput("sard-verify needs a modulus family".into())
            })?;
            let family = BoxFamily::build(schedule.clone(), depth)?;
            let model = DistanceModel::sard(spec.clone(), depth)?;
            let emb = verify_embedding(&family, &model, depth, mode.into())?;
            let witness = build_sard_witness(&schedule, depth)?;
            let wit = verify_modulus(&witness, &spec, mode.into())?;
            let agree = cross_check(&family, &model, Some(&spec), depth.min(8))?;
            let clean = emb.passed() && wit.passed() && agree;
            let report = json!({
                "command": "sard-verify",
                "config": { "modulus": fam.describe(), "depth": depth,
                            "mode": mode_name(mode) },
                "embedding": emb,
                "witness": wit,
                "modes_agree": agree,
            });
            Ok((report, clean))
        }
        Command::Growth { fam, k_stages } => {
            let spec = fam.spec()?;
            let ell = expand_embed::constructor::bounding_growth(&spec, fam.d as usize, k_stages)?;
            let report = json!({
                "command": "growth",
                "config": { "modulus": fam.describe(), "K": k_stages },
                "ell0": ell.iter().map(rat_to_string).collect::<Vec<_>>(),
                "ell0_float": ell.iter().map(rat_to_f64).collect::<Vec<_>>(),
            });
            Ok((report, true))
        }
        Command::Perimeter { random, seed, count, h, r, tol, out } => {
            let (report, clean) = if random {
                perimeter_corpus(seed, count, h, r, tol)?
            } else {
                perimeter_fixed(h, r, tol)?
            };
            let text = canonical_json(&report);
            if let Some(path) = out {
                std::fs::write(path, &text)?;
            }
            Ok((report, clean))
        }
        Command::Properties { fam, n, depth: m, q, c, k_law, c_big, h } => {
            let (family, model) = match fam.family {
                FamilyKind::Cantor => {
                    let r: Vec<f64> = (1..=m as i32).map(|i| fam.base.powi(i)).collect();
                    let schedule = schedule_from_f64(&r, fam.d as usize, m)?;
                    (BoxFamily::build(schedule, m)?, DistanceModel::cantor(r)?)
                }
                _ => {
                    let spec = fam.spec()?;
                    let cs = spec.critical_sequence(m)?;
                    let schedule = schedule_from_f64(&cs.r_star, fam.d as usize, m)?;
                    (BoxFamily::build(schedule, m)?, DistanceModel::sard(spec, m)?)
                }
            };
            let k_nm = k_law.eval(n, m) as u64;
            let pf = assemble_property_family(&family, &model, c, n, m, k_nm, q, h)?;
            let props = check_properties(&pf)?;
            let kc = check_k_conditions(|a, b| k_law.eval(a, b), fam.d, c_big, 40)?;
            let clean = props.p3_ok && props.p6_ok && props.p7_ok;
            let report = json!({
                "command": "properties",
                "config": { "modulus": fam.describe(), "n": n, "m": m, "q": q,
                            "c": c, "k_law": k_law.name(), "C": c_big, "k_nm": k_nm },
                "properties": props,
                "k_conditions": kc,
            });
            Ok((report, clean))
        }
    }
}

fn mode_name(m: ModeArg) -> &'static str {
    match m {
        ModeArg::Exhaustive => "exhaustive",
        ModeArg::Structural => "structural",
    }
}

/// Gap schedule for the family: critical r_star for modulus families,
/// geometric r for the cantor family. The modulus comes along when there
/// is one.
fn build_schedule(
    fam: &FamilyArgs,
    depth: usize,
) -> Result<(expand_embed::constructor::GapSchedule, Option<ModulusSpec>)> {
    match fam.family {
        FamilyKind::Cantor => {
            let r: Vec<f64> = (1..=depth as i32).map(|i| fam.base.powi(i)).collect();
            Ok((schedule_from_f64(&r, fam.d as usize, depth)?, None))
        }
        _ => {
            let spec = fam.spec()?;
            let cs = spec.critical_sequence(depth)?;
            Ok((schedule_from_f64(&cs.r_star, fam.d as usize, depth)?, Some(spec)))
        }
    }
}

fn perimeter_fixed(h: f64, r: f64, tol: f64) -> Result<(Value, bool)> {
    let n = (1.0 / h).round() as usize;
    let square = GridSet::from_predicate(2, h, [0, 0, 0], [n, n, 1], |_| true)?;
    let p0_square = p0_estimate(&square, r, r)?;

    let rad = 1.0f64;
    let o = (-(rad + 0.1) / h).floor() as i64;
    let nn = ((2.0 * (rad + 0.1)) / h).ceil() as usize;
    let disk = GridSet::from_predicate(2, h, [o, o, 0], [nn, nn, 1], |p| {
        p[0] * p[0] + p[1] * p[1] <= rad * rad
    })?;
    let est_disk = p_estimate(&disk, &default_sweep(&disk, r), r)?;

    let pair = check_peri(&square, &disk, r, tol)?;
    let clean = pair.subadd_ok && pair.diff_ok && pair.key_ok;
    let report = json!({
        "command": "perimeter",
        "config": { "random": false, "h": h, "r": r, "tol": tol },
        "square_p0": p0_square,
        "disk": est_disk,
        "pair_check": pair,
    });
    Ok((report, clean))
}

fn perimeter_corpus(seed: u64, count: usize, h: f64, r: f64, tol: f64) -> Result<(Value, bool)> {
    let unions = seeded_box_unions(seed, count, 4, 2);
    let sets: Vec<GridSet> = unions
        .iter()
        .map(|boxes| GridSet::from_boxes(2, h, boxes))
        .collect::<Result<_>>()?;
    let mut instances = Vec::new();
    let mut clean = true;
    for s in &sets {
        let est = p_estimate(s, &default_sweep(s, r), r)?;
        let iso_ok = 0.9 * est.iso_lower <= est.p_hat;
        clean &= iso_ok;
        instances.push(json!({ "estimate": est, "iso_ok": iso_ok }));
    }
    let mut pair_checks = Vec::new();
    for pair in sets.chunks(2) {
        if let [a, b] = pair {
            let rep = check_peri(a, b, r, tol)?;
            clean &= rep.subadd_ok && rep.diff_ok && rep.key_ok;
            pair_checks.push(rep);
        }
    }
    let mut key_checks = Vec::new();
    for group in sets.chunks(8) {
        if group.len() > 1 {
            let others: Vec<&GridSet> = group[1..].iter().collect();
            let (ok, margin) = check_key(&group[0], &others, r, tol)?;
            clean &= ok;
            key_checks.push(json!({ "ok": ok, "margin": margin }));
        }
    }
    let report = json!({
        "command": "perimeter",
        "config": { "random": true, "seed": seed, "count": count,
                    "h": h, "r": r, "tol": tol },
        "instances": instances,
        "pair_checks": pair_checks,
        "key_checks": key_checks,
    });
    Ok((report, clean))
}

// ---------------------------------------------------------------------------
// canonical output: sorted keys (serde_json default map), floats rounded to
// 12 significant digits so identical configs print byte-identical reports

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - mag);
    (x * scale).round() / scale
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !n.is_i64() && !n.is_u64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(f)) {
                        *v = Value::Number(r);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn canonical_json(v: &Value) -> String {
    let mut v = v.clone();
    round_floats(&mut v);
    serde_json::to_string_pretty(&v).expect("json serialization")
}
