//! Certifies the separation contract dist(R_I, R_J) >= rho(I, J) and the
//! modulus contract |f(a) - f(b)| <= omega(|a - b|), either pair by pair at
//! small depth or structurally per first-difference level at large depth.
//! Certification runs in exact rational arithmetic whenever the modulus has
//! a small rational exponent; floats appear only in reported slacks.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::constructor::{BoxFamily, RatBox, SardWitness};
use crate::error::{Error, Result};
use crate::index_tree::{Code, DistanceModel, Relation};
use crate::modulus::{Family, ModulusSpec};
use crate::rational::{pow2, rat_from_f64, rat_to_f64, Rat};

/// Largest depth accepted for pairwise enumeration (~8.4M pairs).
pub const MAX_EXHAUSTIVE_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Exhaustive,
    Structural,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub code_a: Code,
    pub code_b: Code,
    pub required: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checked_pairs: u64,
    pub violations: Vec<Violation>,
    /// min over checks of actual - required; certified checks clamp the
    /// float value to the certified sign.
    pub min_slack: f64,
    pub mode: Mode,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The exponent of a power modulus as an exact small fraction, when the f64
/// value is one (e.g. 1.5 -> 3/2). Denominators are capped so the exact
/// comparison path stays cheap.
fn power_exponent_rational(p: f64) -> Option<(u32, u32)> {
    for den in 1..=16u32 {
        let scaled = p * den as f64;
        if scaled.fract() == 0.0 && scaled > 0.0 && scaled <= 64.0 * den as f64 {
            let num = scaled as u32;
            if num as f64 == scaled {
                return Some((num, den));
            }
        }
    }
    None
}

/// Does omega(sqrt(dist_sq)) >= g hold? Exact (no square roots) for power
/// moduli with small rational exponent: r^p >= g iff (r^2)^num >= g^(2 den).
/// Other families fall back to floats.
pub fn omega_dist_ge(spec: &ModulusSpec, dist_sq: &Rat, g: &Rat) -> Result<bool> {
    if !g.is_positive() {
        return Ok(true);
    }
    if dist_sq.is_zero() {
        return Ok(false);
    }
    if let Family::Power { p } = spec.family {
        if let Some((num, den)) = power_exponent_rational(p) {
            let lhs = pow_rat(dist_sq, num);
            let rhs = pow_rat(g, 2 * den);
            return Ok(lhs >= rhs);
        }
    }
    let dist = rat_to_f64(dist_sq).sqrt();
    let capped = dist.min(spec.domain_max());
    Ok(spec.eval(capped)? >= rat_to_f64(g))
}

fn pow_rat(x: &Rat, e: u32) -> Rat {
    let mut acc = Rat::one();
    let mut base = x.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

/// Does sqrt(dist_sq) >= r hold? Exact.
pub fn dist_ge(dist_sq: &Rat, r: &Rat) -> bool {
    if !r.is_positive() {
        return true;
    }
    dist_sq >= &(r * r)
}

/// Slack consistent with a certificate: the float difference, sign-corrected
/// to agree with the exact verdict.
fn certified_slack(actual: f64, required: f64, certified_ok: bool) -> f64 {
    let slack = actual - required;
    if certified_ok {
        slack.max(0.0)
    } else if slack < 0.0 {
        slack
    } else {
        -f64::EPSILON * required.abs().max(f64::MIN_POSITIVE)
    }
}

struct CheckAccum {
    checked: u64,
    violations: Vec<Violation>,
    min_slack: f64,
}

impl CheckAccum {
    fn new() -> Self {
        CheckAccum { checked: 0, violations: Vec::new(), min_slack: f64::INFINITY }
    }

    fn record(&mut self, a: Code, b: Code, required: f64, actual: f64, ok: bool) {
        self.checked += 1;
        let slack = certified_slack(actual, required, ok);
        self.min_slack = self.min_slack.min(slack);
        if !ok {
            self.violations.push(Violation { code_a: a, code_b: b, required, actual });
        }
    }

    fn merge(mut self, other: CheckAccum) -> CheckAccum {
        self.checked += other.checked;
        self.violations.extend(other.violations);
        self.min_slack = self.min_slack.min(other.min_slack);
        self
    }

    fn into_report(self, mode: Mode) -> VerificationReport {
        VerificationReport {
            checked_pairs: self.checked,
            violations: self.violations,
            min_slack: if self.checked == 0 { 0.0 } else { self.min_slack },
            mode,
        }
    }
}

/// The exact separation requirement rho(a, b) for a disjoint same-depth
/// pair, as (required rho for reporting, certifier closure input). For the
/// Sard model the certified quantity is the dyadic gap g with requirement
/// omega(dist) >= g; for Cantor it is r_k with requirement dist >= r_k.
fn check_pair(
    model: &DistanceModel,
    a: &Code,
    b: &Code,
    box_a: &RatBox,
    box_b: &RatBox,
    acc: &mut CheckAccum,
) -> Result<()> {
    let k = match a.relate(b) {
        Relation::Disjoint { k } => k,
        _ => return Ok(()),
    };
    let dist_sq = box_a.dist_sq(box_b);
    let dist = rat_to_f64(&dist_sq).sqrt();
    // disjointness of the boxes themselves
    if dist_sq.is_zero() {
        acc.record(*a, *b, f64::MIN_POSITIVE, 0.0, false);
        return Ok(());
    }
    match model {
        DistanceModel::Cantor { r } => {
            if k > r.len() {
                return Err(Error::InvalidInput(format!(
                    "Cantor sequence too short for level {k}"
                )));
            }
            let rk = r[k - 1];
            let ok = dist_ge(&dist_sq, &rat_from_f64(rk)?);
            acc.record(*a, *b, rk, dist, ok);
        }
        DistanceModel::Sard { spec, .. } => {
            let (la, ra) = a.dyadic_interval();
            let (lb, rb) = b.dyadic_interval();
            let g = if la < lb { lb - ra } else { la - rb };
            let required = if g.is_positive() {
                spec.invert(rat_to_f64(&g))?
            } else {
                0.0
            };
            let ok = omega_dist_ge(spec, &dist_sq, &g)?;
            acc.record(*a, *b, required, dist, ok);
        }
    }
    Ok(())
}

/// Checks nesting for every non-root code and the full separation contract
/// over depth-N pairs (Exhaustive: all 2^{N-1}(2^N - 1) unordered pairs;
/// Structural: one per-level certificate from the routed axis gaps, sound
/// because the first-difference axis separation is at least the stage gap).
pub fn verify_embedding(
    family: &BoxFamily,
    model: &DistanceModel,
    n: usize,
    mode: Mode,
) -> Result<VerificationReport> {
    if n > family.depth {
        return Err(Error::InvalidInput(format!(
            "family depth {} < requested {n}",
            family.depth
        )));
    }
    if n == 0 {
        return Ok(CheckAccum::new().into_report(mode));
    }
    let mut acc = CheckAccum::new();

    // nesting: each box inside its parent, as a slack check
    for d in 1..=n {
        for code in Code::all_at_depth(d) {
            let parent = code.parent().unwrap();
            let pb = family.get(&parent)?;
            let cb = family.get(&code)?;
            let mut slack = f64::INFINITY;
            for i in 0..pb.lo.len() {
                slack = slack.min(rat_to_f64(&(&cb.lo[i] - &pb.lo[i])));
                slack = slack.min(rat_to_f64(&(&pb.hi[i] - &cb.hi[i])));
            }
            let nested = pb.contains(cb);
            acc.record(parent, code, 0.0, slack, nested);
        }
    }
    let nesting = acc;

    let pair_acc = match mode {
        Mode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_DEPTH {
                return Err(Error::Precondition(format!(
                    "exhaustive depth {n} > cap {MAX_EXHAUSTIVE_DEPTH}"
                )));
            }
            let boxes: Vec<(Code, &RatBox)> = Code::all_at_depth(n)
                .map(|c| Ok((c, family.get(&c)?)))
                .collect::<Result<_>>()?;
            let shards: Vec<CheckAccum> = (0..boxes.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = CheckAccum::new();
                    for j in i + 1..boxes.len() {
                        check_pair(model, &boxes[i].0, &boxes[j].0, boxes[i].1, boxes[j].1, &mut acc)?;
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            shards.into_iter().fold(CheckAccum::new(), CheckAccum::merge)
        }
        Mode::Structural => structural_embedding(family, model, n)?,
    };

    Ok(nesting.merge(pair_acc).into_report(mode))
}

/// Worst-case representative pair at first-difference level k and depth n:
/// common prefix of zeros, then 0 1^{n-k} against 1 0^{n-k} — the dyadic
/// intervals with the largest gap among such pairs.
fn representative_pair(k: usize, n: usize) -> (Code, Code) {
    let low = (1u64 << (n - k)) - 1; // 0 followed by ones
    let high = 1u64 << (n - k); // 1 followed by zeros
    (
        Code::from_value(low, n).unwrap(),
        Code::from_value(high, n).unwrap(),
    )
}

fn structural_embedding(
    family: &BoxFamily,
    model: &DistanceModel,
    n: usize,
) -> Result<CheckAccum> {
    let mut acc = CheckAccum::new();
    let v = &family.schedule.v;
    if v.len() < n {
        return Err(Error::InvalidInput("schedule shorter than depth".into()));
    }
    for k in 1..=n {
        // certified: any pair with first difference at k is separated by at
        // least v_k on axis (k-1) mod d
        let sep = &v[k - 1];
        let sep_sq = sep * sep;
        let actual = rat_to_f64(sep);
        let (code_a, code_b) = representative_pair(k, n);
        match model {
            DistanceModel::Cantor { r } => {
                if k > r.len() {
                    return Err(Error::InvalidInput(format!(
                        "Cantor sequence too short for level {k}"
                    )));
                }
                let rk = r[k - 1];
                let ok = dist_ge(&sep_sq, &rat_from_f64(rk)?);
                acc.record(code_a, code_b, rk, actual, ok);
            }
            DistanceModel::Sard { spec, .. } => {
                // worst dyadic gap over depth <= n pairs with first diff k:
                // 2^-(k-1) minus the two extreme depth-n intervals
                let g = pow2(1 - (k as i64)) - pow2(1 - (n as i64));
                let required = if g.is_positive() {
                    spec.invert(rat_to_f64(&g))?
                } else {
                    0.0
                };
                let ok = omega_dist_ge(spec, &sep_sq, &g)?;
                acc.record(code_a, code_b, required, actual, ok);
            }
        }
    }
    Ok(acc)
}

/// Checks |f(a) - f(b)| <= omega(|a - b|) over the witness. Exhaustive: every
/// unordered pair of entries. Structural: per level k, the certified axis
/// separation v_k must satisfy omega(v_k) >= 2^-(k-1) - 2^-N, the largest
/// value difference among pairs with first difference at k.
pub fn verify_modulus(
    witness: &SardWitness,
    spec: &ModulusSpec,
    mode: Mode,
) -> Result<VerificationReport> {
    spec.validate()?;
    let n = witness.depth;
    if witness.gaps.len() < n {
        return Err(Error::InvalidInput("witness gaps shorter than depth".into()));
    }
    let mut acc = CheckAccum::new();
    match mode {
        Mode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_DEPTH {
                return Err(Error::Precondition(format!(
                    "exhaustive depth {n} > cap {MAX_EXHAUSTIVE_DEPTH}"
                )));
            }
            let entries = &witness.entries;
            let shards: Vec<CheckAccum> = (0..entries.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = CheckAccum::new();
                    let (code_a, pa, fa) = &entries[i];
                    for (code_b, pb, fb) in &entries[i + 1..] {
                        let df = (fa - fb).abs();
                        let mut dist_sq = Rat::zero();
                        for (x, y) in pa.iter().zip(pb) {
                            let d = x - y;
                            dist_sq += &d * &d;
                        }
                        let ok = omega_dist_ge(spec, &dist_sq, &df)?;
                        let dist = rat_to_f64(&dist_sq).sqrt();
                        let omega_dist =
                            spec.eval(dist.min(spec.domain_max())).unwrap_or(f64::NAN);
                        acc.record(*code_a, *code_b, rat_to_f64(&df), omega_dist, ok);
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            acc = shards.into_iter().fold(acc, CheckAccum::merge);
        }
        Mode::Structural => {
            for k in 1..=n {
                let sep = &witness.gaps[k - 1];
                let sep_sq = sep * sep;
                let df_max = pow2(1 - (k as i64)) - pow2(-(n as i64));
                let ok = omega_dist_ge(spec, &sep_sq, &df_max)?;
                let omega_sep = spec
                    .eval(rat_to_f64(sep).min(spec.domain_max()))
                    .unwrap_or(f64::NAN);
                let (code_a, code_b) = representative_pair(k, n);
                acc.record(code_a, code_b, rat_to_f64(&df_max), omega_sep, ok);
            }
        }
    }
    Ok(acc.into_report(mode))
}

/// Levels (first-difference positions) at which a report has violations.
fn violation_levels(report: &VerificationReport) -> Vec<usize> {
    let mut levels: Vec<usize> = report
        .violations
        .iter()
        .filter_map(|v| match v.code_a.relate(&v.code_b) {
            Relation::Disjoint { k } => Some(k),
            _ => None,
        })
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}

/// Agreement of Structural and Exhaustive at small depth: both modes must
/// flag the same first-difference levels (Structural cannot name individual
/// pairs, so the comparison is level-granular), for the separation contract
/// and, when a modulus is supplied, for the witness contract.
pub fn cross_check(
    family: &BoxFamily,
    model: &DistanceModel,
    spec: Option<&ModulusSpec>,
    n_small: usize,
) -> Result<bool> {
    if n_small > 8 {
        return Err(Error::Precondition(format!("cross-check depth {n_small} > 8")));
    }
    let ex = verify_embedding(family, model, n_small, Mode::Exhaustive)?;
    let st = verify_embedding(family, model, n_small, Mode::Structural)?;
    if violation_levels(&ex) != violation_levels(&st) {
        return Ok(false);
    }
    if let Some(spec) = spec {
        let witness = crate::constructor::build_sard_witness(&family.schedule, n_small)?;
        let ex = verify_modulus(&witness, spec, Mode::Exhaustive)?;
        let st = verify_modulus(&witness, spec, Mode::Structural)?;
        if violation_levels(&ex) != violation_levels(&st) {
            return Ok(false);
        }
    }
    Ok(true)
}
