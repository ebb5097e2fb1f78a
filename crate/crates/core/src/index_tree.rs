//! The dyadic index set: 0/1 codes, their interval geometry, and the two
//! concrete distance models on codes (Sard via a modulus, Cantor via a
//! decreasing sequence).

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::modulus::{CriticalSequences, ModulusSpec};
use crate::rational::{pow2, Rat};

pub const MAX_DEPTH: usize = 63;

/// A finite 0/1 string indexing a node of the dyadic tree. Bit positions are
/// 1-based; bit 1 is the coarsest split.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Code {
    bits: u64,
    depth: u8,
}

impl Code {
    pub fn root() -> Self {
        Code { bits: 0, depth: 0 }
    }

    /// Builds a code of the given depth from the low `depth` bits of `value`,
    /// most significant bit first.
    pub fn from_value(value: u64, depth: usize) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::InvalidInput(format!("depth {depth} > {MAX_DEPTH}")));
        }
        if depth < 64 && value >> depth != 0 {
            return Err(Error::InvalidInput(format!(
                "value {value} does not fit in {depth} bits"
            )));
        }
        Ok(Code { bits: value, depth: depth as u8 })
    }

    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    /// Left-to-right rank among codes of the same depth.
    pub fn value(&self) -> u64 {
        self.bits
    }

    /// Bit at 1-based position i (1 = coarsest).
    pub fn bit(&self, i: usize) -> u8 {
        debug_assert!(i >= 1 && i <= self.depth());
        ((self.bits >> (self.depth() - i)) & 1) as u8
    }

    pub fn child(&self, bit: u8) -> Result<Self> {
        if self.depth() >= MAX_DEPTH {
            return Err(Error::InvalidInput("depth cap exceeded".into()));
        }
        Ok(Code { bits: (self.bits << 1) | (bit as u64 & 1), depth: self.depth + 1 })
    }

    pub fn parent(&self) -> Option<Self> {
        if self.depth == 0 {
            None
        } else {
            Some(Code { bits: self.bits >> 1, depth: self.depth - 1 })
        }
    }

    /// Truncation to the first `depth` bits.
    pub fn prefix(&self, depth: usize) -> Self {
        debug_assert!(depth <= self.depth());
        Code { bits: self.bits >> (self.depth() - depth), depth: depth as u8 }
    }

    /// All codes of a given depth in dyadic (left-to-right) order.
    pub fn all_at_depth(depth: usize) -> impl Iterator<Item = Code> {
        let depth = depth.min(MAX_DEPTH);
        (0u64..(1u64 << depth)).map(move |v| Code { bits: v, depth: depth as u8 })
    }

    /// Is `self` an ancestor of `other` (proper prefix)? As dyadic intervals
    /// this is `other` being a subinterval of `self`.
    pub fn is_ancestor_of(&self, other: &Code) -> bool {
        self.depth < other.depth && other.prefix(self.depth()).bits == self.bits
    }

    pub fn relate(&self, other: &Code) -> Relation {
        let common = self.depth().min(other.depth());
        let a = self.prefix(common);
        let b = other.prefix(common);
        if a.bits == b.bits {
            return match self.depth().cmp(&other.depth()) {
                std::cmp::Ordering::Equal => Relation::Equal,
                std::cmp::Ordering::Less => Relation::Ancestor,
                std::cmp::Ordering::Greater => Relation::Descendant,
            };
        }
        let diff = a.bits ^ b.bits;
        // highest differing bit within the common prefix
        let k = common - diff.ilog2() as usize;
        Relation::Disjoint { k }
    }

    /// The closed dyadic interval [left, left + 2^-depth] in [0, 1].
    pub fn dyadic_interval(&self) -> (Rat, Rat) {
        let left = Rat::from_integer(self.bits.into()) * pow2(-(self.depth() as i64));
        let right = &left + pow2(-(self.depth() as i64));
        (left, right)
    }
}

/// Outcome of comparing two codes. `Disjoint { k }` carries the first
/// (1-based) position at which the bits differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ancestor,
    Descendant,
    Equal,
    Disjoint { k: usize },
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=self.depth() {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Code({self})")
    }
}

impl FromStr for Code {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.len() > MAX_DEPTH {
            return Err(Error::InvalidInput(format!("code longer than {MAX_DEPTH}")));
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidInput(format!("bad code char {c:?}"))),
                };
        }
        Ok(Code { bits, depth: s.len() as u8 })
    }
}

impl PartialOrd for Code {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Code {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.depth, self.bits).cmp(&(other.depth, other.bits))
    }
}

impl Serialize for Code {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Code {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A distance function on codes: zero on nested pairs, symmetric, monotone
/// under refinement. Not assumed to satisfy the triangle inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DistanceModel {
    Sard {
        spec: ModulusSpec,
        #[serde(skip)]
        critical: Option<CriticalSequences>,
    },
    Cantor {
        r: Vec<f64>,
    },
}

impl DistanceModel {
    /// Sard model with critical sequences cached to `depth`.
    pub fn sard(spec: ModulusSpec, depth: usize) -> Result<Self> {
        let critical = spec.critical_sequence(depth)?;
        Ok(DistanceModel::Sard { spec, critical: Some(critical) })
    }

    /// Cantor model given the positive decreasing sequence r_1, r_2, ...
    pub fn cantor(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() || r.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidInput("r must be positive".into()));
        }
        if r.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("r must be decreasing".into()));
        }
        Ok(DistanceModel::Cantor { r })
    }

    /// Cantor model with r_n = base^n for n = 1..=depth.
    pub fn cantor_geometric(base: f64, depth: usize) -> Result<Self> {
        if !(base > 0.0 && base < 1.0) {
            return Err(Error::InvalidInput(format!("base {base} not in (0,1)")));
        }
        Self::cantor((1..=depth).map(|n| base.powi(n as i32)).collect())
    }

    pub fn spec(&self) -> Option<&ModulusSpec> {
        match self {
            DistanceModel::Sard { spec, .. } => Some(spec),
            DistanceModel::Cantor { .. } => None,
        }
    }

    fn cantor_r(r: &[f64], k: usize) -> Result<f64> {
        if k == 0 || k > r.len() {
            return Err(Error::InvalidInput(format!(
                "Cantor sequence has {} entries, need r_{k}",
                r.len()
            )));
        }
        Ok(r[k - 1])
    }

    /// rho(I, J): 0 on nested pairs; Cantor: r_k at first difference k;
    /// Sard: omega^{-1} of the Euclidean gap between the dyadic intervals.
    pub fn rho(&self, a: &Code, b: &Code) -> Result<f64> {
        match a.relate(b) {
            Relation::Ancestor | Relation::Descendant | Relation::Equal => Ok(0.0),
            Relation::Disjoint { k } => match self {
                DistanceModel::Cantor { r } => Self::cantor_r(r, k),
                DistanceModel::Sard { spec, .. } => {
                    let (la, ra) = a.dyadic_interval();
                    let (lb, rb) = b.dyadic_interval();
                    let gap = if la < lb { lb - ra } else { la - rb };
                    if gap <= Rat::zero() {
                        Ok(0.0)
                    } else {
                        spec.invert(crate::rational::rat_to_f64(&gap))
                    }
                }
            },
        }
    }

    /// rho_{J,I} = inf { rho(J, K) : K disjoint from I }, for J inside I.
    pub fn rho_inner(&self, inner: &Code, outer: &Code) -> Result<f64> {
        match outer.relate(inner) {
            Relation::Ancestor | Relation::Equal => {}
            _ => {
                return Err(Error::Precondition(format!(
                    "{inner} is not inside {outer}"
                )))
            }
        }
        match self {
            DistanceModel::Cantor { r } => Self::cantor_r(r, outer.depth()),
            DistanceModel::Sard { spec, .. } => {
                let (lo, ro) = outer.dyadic_interval();
                let (lj, rj) = inner.dyadic_interval();
                let dist = std::cmp::min(lj - lo, ro - rj);
                if dist <= Rat::zero() {
                    Ok(0.0)
                } else {
                    spec.invert(crate::rational::rat_to_f64(&dist))
                }
            }
        }
    }

    /// rho_I = sup_{J in I} rho_{J,I}; depends only on depth(I). Sard:
    /// omega^{-1}(2^-(depth+1)), attained by deep central subintervals.
    pub fn rho_sup(&self, code: &Code) -> Result<f64> {
        match self {
            DistanceModel::Cantor { r } => Self::cantor_r(r, code.depth()),
            DistanceModel::Sard { spec, critical } => {
                let n = code.depth();
                if let Some(cs) = critical {
                    if n >= 1 && n <= cs.depth {
                        return Ok(cs.r_n(n));
                    }
                }
                spec.invert(2f64.powi(-(n as i32 + 1)))
            }
        }
    }
}
