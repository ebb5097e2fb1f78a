//! The product-of-Cantor-sets construction: a gap sequence is split across
//! the d axes, each axis carries an exact-rational Cantor recursion, and the
//! per-code rectangles R_I assemble into the finite-depth witness map.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::index_tree::Code;
use crate::modulus::ModulusSpec;
use crate::rational::{pow2, rat_from_str, rat_to_f64, rat_to_string, rat_floor_bits, Rat};

/// Precision (bits) used when snapping float gap values down to rationals.
pub const SNAP_BITS: u32 = 128;

/// One axis of the construction: nested closed intervals with lengths
/// l[k] = 2 l[k+1] + g[k+1] and l[K] = 0 (depth-K intervals are points).
#[derive(Debug, Clone)]
pub struct CantorAxis {
    pub gaps: Vec<Rat>,
    /// l[0..=K]
    pub lengths: Vec<Rat>,
}

impl CantorAxis {
    pub fn stages(&self) -> usize {
        self.gaps.len()
    }

    /// Interval of the axis code given as bits (left-to-right stages).
    pub fn interval(&self, bits: &[u8]) -> (Rat, Rat) {
        debug_assert!(bits.len() <= self.stages());
        let mut left = Rat::zero();
        for (k, &b) in bits.iter().enumerate() {
            if b != 0 {
                left += &self.lengths[k + 1] + &self.gaps[k];
            }
        }
        let right = &left + &self.lengths[bits.len()];
        (left, right)
    }
}

/// Builds a Cantor axis from its per-stage gap lengths.
pub fn build_axis(gaps: &[Rat]) -> Result<CantorAxis> {
    if gaps.iter().any(|g| !g.is_positive()) {
        return Err(Error::InvalidInput("axis gaps must be positive".into()));
    }
    let k = gaps.len();
    let mut lengths = vec![Rat::zero(); k + 1];
    for i in (0..k).rev() {
        lengths[i] = &lengths[i + 1] * pow2(1) + &gaps[i];
    }
    Ok(CantorAxis { gaps: gaps.to_vec(), lengths })
}

/// The gap sequence routed across axes: bit position j (1-based) of a code
/// goes to axis (j-1) mod d, stage ceil(j/d), carrying gap v_j. The first
/// differing bit position k of two codes therefore yields a separation of at
/// least v_k on axis (k-1) mod d.
#[derive(Debug, Clone)]
pub struct GapSchedule {
    pub dim: usize,
    pub depth: usize,
    pub v: Vec<Rat>,
    pub axes: Vec<CantorAxis>,
}

pub fn schedule(v: &[Rat], dim: usize, depth: usize) -> Result<GapSchedule> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dimension {dim} < 2")));
    }
    if v.len() < depth {
        return Err(Error::InvalidInput(format!(
            "need {depth} gap entries, got {}",
            v.len()
        )));
    }
    let v = &v[..depth];
    if v.iter().any(|g| !g.is_positive()) {
        return Err(Error::InvalidInput("gaps must be positive".into()));
    }
    if v.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("gap sequence must be nonincreasing".into()));
    }
    let mut per_axis: Vec<Vec<Rat>> = vec![Vec::new(); dim];
    for (j0, g) in v.iter().enumerate() {
        per_axis[j0 % dim].push(g.clone());
    }
    let axes = per_axis
        .iter()
        .map(|gaps| build_axis(gaps))
        .collect::<Result<Vec<_>>>()?;
    Ok(GapSchedule { dim, depth, v: v.to_vec(), axes })
}

/// Same routing for float-valued gaps, snapped down to SNAP_BITS-bit
/// rationals so separation certificates stay conservative.
pub fn schedule_from_f64(v: &[f64], dim: usize, depth: usize) -> Result<GapSchedule> {
    let rats = v
        .iter()
        .map(|&x| rat_floor_bits(x, SNAP_BITS))
        .collect::<Result<Vec<_>>>()?;
    schedule(&rats, dim, depth)
}

/// An axis-aligned box with exact rational corners.
#[derive(Debug, Clone, PartialEq)]
pub struct RatBox {
    pub lo: Vec<Rat>,
    pub hi: Vec<Rat>,
}

impl RatBox {
    pub fn dist_sq(&self, other: &RatBox) -> Rat {
        crate::rational::box_dist_sq(&self.lo, &self.hi, &other.lo, &other.hi)
    }

    pub fn contains(&self, other: &RatBox) -> bool {
        (0..self.lo.len())
            .all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }
}

impl GapSchedule {
    /// Per-axis bit subsequences of a code.
    pub fn split_bits(&self, code: &Code) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new(); self.dim];
        for j in 1..=code.depth() {
            out[(j - 1) % self.dim].push(code.bit(j));
        }
        out
    }

    /// The rectangle R_I: product of the per-axis intervals selected by I's
    /// bit subsequences.
    pub fn rect(&self, code: &Code) -> Result<RatBox> {
        if code.depth() > self.depth {
            return Err(Error::Precondition(format!(
                "code depth {} exceeds schedule depth {}",
                code.depth(),
                self.depth
            )));
        }
        let split = self.split_bits(code);
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for (axis, bits) in self.axes.iter().zip(&split) {
            let (l, r) = axis.interval(bits);
            lo.push(l);
            hi.push(r);
        }
        Ok(RatBox { lo, hi })
    }
}

/// All rectangles up to a depth, keyed by code.
#[derive(Debug, Clone)]
pub struct BoxFamily {
    pub schedule: GapSchedule,
    pub depth: usize,
    pub boxes: BTreeMap<Code, RatBox>,
}

impl BoxFamily {
    pub fn build(schedule: GapSchedule, depth: usize) -> Result<Self> {
        if depth > schedule.depth {
            return Err(Error::Precondition(format!(
                "family depth {depth} exceeds schedule depth {}",
                schedule.depth
            )));
        }
        let mut boxes = BTreeMap::new();
        for d in 0..=depth {
            for code in Code::all_at_depth(d) {
                boxes.insert(code, schedule.rect(&code)?);
            }
        }
        Ok(BoxFamily { schedule, depth, boxes })
    }

    pub fn get(&self, code: &Code) -> Result<&RatBox> {
        self.boxes
            .get(code)
            .ok_or_else(|| Error::InvalidInput(format!("family missing code {code}")))
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .boxes
            .iter()
            .map(|(code, b)| {
                json!({
                    "code": code.to_string(),
                    "lo": b.lo.iter().map(rat_to_string).collect::<Vec<_>>(),
                    "hi": b.hi.iter().map(rat_to_string).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "dim": self.schedule.dim,
            "depth": self.depth,
            "bit_routing": "axis = (position - 1) mod dim, 1-based positions",
            "gaps": self.schedule.v.iter().map(rat_to_string).collect::<Vec<_>>(),
            "boxes": entries,
        })
    }
}

/// One (point, value) pair per depth-N code: the minimal corner of R_I and
/// the left endpoint of the dyadic interval I. Carries the routed gaps so
/// structural verification is self-contained.
#[derive(Debug, Clone)]
pub struct SardWitness {
    pub dim: usize,
    pub depth: usize,
    /// v_k by 1-based bit position, the certified per-position separation.
    pub gaps: Vec<Rat>,
    pub entries: Vec<(Code, Vec<Rat>, Rat)>,
}

pub fn build_sard_witness(schedule: &GapSchedule, depth: usize) -> Result<SardWitness> {
    if depth > schedule.depth {
        return Err(Error::Precondition(format!(
            "witness depth {depth} exceeds schedule depth {}",
            schedule.depth
        )));
    }
    let mut entries = Vec::with_capacity(1usize << depth);
    for code in Code::all_at_depth(depth) {
        let rect = schedule.rect(&code)?;
        let (value, _) = code.dyadic_interval();
        entries.push((code, rect.lo, value));
    }
    Ok(SardWitness {
        dim: schedule.dim,
        depth,
        gaps: schedule.v[..depth].to_vec(),
        entries,
    })
}

impl SardWitness {
    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "depth": self.depth,
            "gaps": self.gaps.iter().map(rat_to_string).collect::<Vec<_>>(),
            "entries": self.entries.iter().map(|(code, point, value)| json!({
                "code": code.to_string(),
                "point": point.iter().map(rat_to_string).collect::<Vec<_>>(),
                "value": rat_to_string(value),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::InvalidInput("witness JSON must be an object".into()))?;
        let dim = obj
            .get("dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidInput("missing dim".into()))? as usize;
        let depth = obj
            .get("depth")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidInput("missing depth".into()))? as usize;
        let gaps = obj
            .get("gaps")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("missing gaps".into()))?
            .iter()
            .map(|g| rat_from_str(g.as_str().unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::new();
        for e in obj
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("missing entries".into()))?
        {
            let code: Code = e
                .get("code")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::InvalidInput("entry missing code".into()))?
                .parse()?;
            let point = e
                .get("point")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::InvalidInput("entry missing point".into()))?
                .iter()
                .map(|p| rat_from_str(p.as_str().unwrap_or_default()))
                .collect::<Result<Vec<_>>>()?;
            let value = rat_from_str(
                e.get("value")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::InvalidInput("entry missing value".into()))?,
            )?;
            entries.push((code, point, value));
        }
        Ok(SardWitness { dim, depth, gaps, entries })
    }

    /// CSV export: code, corner coordinates, value (floats for plotting).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("code");
        for i in 0..self.dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",value\n");
        for (code, point, value) in &self.entries {
            out.push_str(&code.to_string());
            for p in point {
                out.push_str(&format!(",{}", rat_to_f64(p)));
            }
            out.push_str(&format!(",{}\n", rat_to_f64(value)));
        }
        out
    }
}

/// Axis-0 root lengths of the truncated recursion when the gaps come from
/// r_star: l_0(k) = sum_{j<=k} 2^{j-1} v_{d j}, the every-d-th
/// subsequence that lands on axis 0. Bounded iff the series criterion
/// converges.
pub fn bounding_growth(spec: &ModulusSpec, dim: usize, stages: usize) -> Result<Vec<Rat>> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dimension {dim} < 2")));
    }
    let mut out = Vec::with_capacity(stages + 1);
    out.push(Rat::zero());
    if stages == 0 {
        return Ok(out);
    }
    let cs = spec.critical_sequence(dim * stages)?;
    let mut acc = Rat::zero();
    for k in 1..=stages {
        let v = rat_floor_bits(cs.r_star_n(dim * k), SNAP_BITS)?;
        acc += v * pow2(k as i64 - 1);
        out.push(acc.clone());
    }
    Ok(out)
}
