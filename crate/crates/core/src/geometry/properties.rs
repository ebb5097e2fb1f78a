//! The covering-family property suite: the sets C_I, their expansions
//! E_{I,j} and annuli D_{I,j}, the seven structural properties the
//! minimal-perimeter argument consumes, and the k_{n,m} summability
//! conditions.
//!
//! Two realizations share one report format. The Cantor recipe produces
//! single rounded boxes (C_I = B(R_I, c r_n)), so every predicate reduces
//! to exact rational comparisons of box distances against radii sums — no
//! grids. The Sard recipe produces unions of rounded boxes indexed by
//! dyadic subintervals; those are materialized as windowed grid bitmaps
//! through their exact union distance field.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::constructor::{BoxFamily, RatBox};
use crate::error::{Error, Result};
use crate::geometry::grid::{GridSet, MAX_DIM};
use crate::index_tree::{Code, DistanceModel, Relation};
use crate::modulus::ModulusSpec;
use crate::rational::{rat_from_f64, rat_to_f64, Rat};

/// Measured constants for the property suite. Booleans are exact
/// containment/implication checks; counts and ratios are reported for the
/// caller to judge against its own thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    /// max over I in level n of disjoint I' in level m whose c r_m
    /// neighborhoods of C meet
    pub p1_disjoint_count: usize,
    /// min over I of (inscribed ball radius of C_I) / r_n
    pub p2_ball_ratio: f64,
    /// C_I contained in every E_{I,j}
    pub p3_ok: bool,
    /// max over J in level m of pairs (I, j) with D_{I,j} meeting C_J
    pub p4_count: usize,
    /// sup_x of the annulus indicator sum, divided by k r_m / r_n
    pub p5_constant: f64,
    /// every trimmed annulus inside the ancestor's C
    pub p6_ok: bool,
    /// annuli of trimmed I' meet only C_{I''} with I'' in the trimmed level-m set
    pub p7_ok: bool,
    pub n: usize,
    pub m: usize,
    pub k_nm: u64,
    pub q: usize,
    pub c: f64,
    pub recipe: String,
}

pub enum PropertyFamily {
    Cantor(CantorPropertyFamily),
    Sard(SardPropertyFamily),
}

pub fn assemble_property_family(
    family: &BoxFamily,
    model: &DistanceModel,
    c: f64,
    n: usize,
    m: usize,
    k_nm: u64,
    q: usize,
    h: Option<f64>,
) -> Result<PropertyFamily> {
    if m < n {
        return Err(Error::Precondition(format!("m = {m} < n = {n}")));
    }
    if family.depth < m {
        return Err(Error::Precondition(format!(
            "family depth {} < m = {m}",
            family.depth
        )));
    }
    if k_nm == 0 {
        return Err(Error::Precondition("k_nm must be positive".into()));
    }
    match model {
        DistanceModel::Cantor { r } => {
            CantorPropertyFamily::assemble(family, r, c, n, m, k_nm, q).map(PropertyFamily::Cantor)
        }
        DistanceModel::Sard { spec, .. } => {
            SardPropertyFamily::assemble(family, spec, c, n, m, k_nm, q, h)
                .map(PropertyFamily::Sard)
        }
    }
}

pub fn check_properties(pf: &PropertyFamily) -> Result<PropertyReport> {
    match pf {
        PropertyFamily::Cantor(f) => f.check(),
        PropertyFamily::Sard(f) => f.check(),
    }
}

// ---------------------------------------------------------------------------
// exact predicates on boxes

/// max over points of `from` of squared distance to `to` (attained at a
/// corner, separable per axis).
fn max_corner_dist_sq(from: &RatBox, to: &RatBox) -> Rat {
    let mut acc = Rat::zero();
    for a in 0..from.lo.len() {
        let d_lo = point_interval_dist(&from.lo[a], &to.lo[a], &to.hi[a]);
        let d_hi = point_interval_dist(&from.hi[a], &to.lo[a], &to.hi[a]);
        let d = if d_lo > d_hi { d_lo } else { d_hi };
        acc += &d * &d;
    }
    acc
}

fn point_interval_dist(x: &Rat, lo: &Rat, hi: &Rat) -> Rat {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        Rat::zero()
    }
}

/// sqrt(dist_sq) <= t, exactly.
fn dist_le(dist_sq: &Rat, t: &Rat) -> bool {
    !t.is_negative() && *dist_sq <= t * t
}

// ---------------------------------------------------------------------------
// Cantor recipe: exact closed forms

/// C_I = B(R_I, c r_n); E_{I,j} = B(C_I, c j r_n / k) is the rounded box of
/// radius a_j = c r_n + c j r_n / k; D_{I,j} is the shell a_j < dist <= a_j
/// + c r_m around R_I.
pub struct CantorPropertyFamily {
    dim: usize,
    c: Rat,
    /// r_1.. as exact rationals (1-based via index - 1)
    r: Vec<Rat>,
    n: usize,
    m: usize,
    k: u64,
    q: usize,
    level_n: Vec<(Code, RatBox)>,
    level_m: Vec<(Code, RatBox)>,
    ancestors: Vec<(Code, RatBox)>,
}

impl CantorPropertyFamily {
    fn assemble(
        family: &BoxFamily,
        r: &[f64],
        c: f64,
        n: usize,
        m: usize,
        k: u64,
        q: usize,
    ) -> Result<Self> {
        if !(c > 0.0 && c < 1.0 / 6.0) {
            return Err(Error::Precondition(format!("c = {c} not in (0, 1/6)")));
        }
        if n <= q {
            return Err(Error::Precondition(format!(
                "need n > q for the ancestor level (n = {n}, q = {q})"
            )));
        }
        if r.len() < m {
            return Err(Error::Precondition(format!(
                "scale sequence has {} entries, need {m}",
                r.len()
            )));
        }
        let r_rat = r
            .iter()
            .map(|&x| rat_from_f64(x))
            .collect::<Result<Vec<_>>>()?;
        // k_{n,m} must be at least of order r_n / r_m
        let ratio = &r_rat[n - 1] / &r_rat[m - 1];
        if Rat::from_integer(k.into()) < ratio.clone() / Rat::from_integer(4.into()) {
            return Err(Error::Precondition(format!(
                "k_nm = {k} too small for r_n/r_m = {}",
                rat_to_f64(&ratio)
            )));
        }
        let level = |d: usize| -> Result<Vec<(Code, RatBox)>> {
            Code::all_at_depth(d)
                .map(|code| Ok((code, family.get(&code)?.clone())))
                .collect()
        };
        Ok(CantorPropertyFamily {
            dim: family.schedule.dim,
            c: rat_from_f64(c)?,
            r: r_rat,
            n,
            m,
            k,
            q,
            level_n: level(n)?,
            level_m: level(m)?,
            ancestors: level(n - q)?,
        })
    }

    fn r_n(&self, n: usize) -> &Rat {
        &self.r[n - 1]
    }

    /// a_j = c r_n (1 + j/k)
    fn radius_e(&self, j: u64) -> Rat {
        let jk = Rat::new(j.into(), self.k.into());
        &self.c * self.r_n(self.n) * (Rat::from_integer(1.into()) + jk)
    }

    /// outer radius of the outermost annulus
    fn radius_out(&self) -> Rat {
        self.radius_e(self.k - 1) + &self.c * self.r_n(self.m)
    }

    fn check(&self) -> Result<PropertyReport> {
        let c = &self.c;
        let crn = c * self.r_n(self.n);
        let crm = c * self.r_n(self.m);
        let t_out = self.radius_out();

        // P1: disjoint I in level n vs I' in level m with
        // dist(R_I, R_I') <= c r_n + 3 c r_m
        let p1_reach = &crn + &crm * Rat::from_integer(3.into());
        let mut p1_disjoint_count = 0usize;
        for (ci, bi) in &self.level_n {
            let mut count = 0usize;
            for (cj, bj) in &self.level_m {
                if let Relation::Disjoint { .. } = ci.relate(cj) {
                    if dist_le(&bi.dist_sq(bj), &p1_reach) {
                        count += 1;
                    }
                }
            }
            p1_disjoint_count = p1_disjoint_count.max(count);
        }

        // P2: inscribed ball radius = c r_n + half the smallest box side
        let mut p2_ball_ratio = f64::INFINITY;
        for (_, b) in &self.level_n {
            let mut half_min = f64::INFINITY;
            for a in 0..self.dim {
                half_min = half_min.min(rat_to_f64(&(&b.hi[a] - &b.lo[a])) / 2.0);
            }
            let inradius = rat_to_f64(&crn) + half_min;
            p2_ball_ratio = p2_ball_ratio.min(inradius / rat_to_f64(self.r_n(self.n)));
        }

        // P3: radii a_j are nondecreasing in j, so C_I = E_{I,0} sits inside
        // every E_{I,j}
        let p3_ok = (1..self.k).all(|j| self.radius_e(j) >= self.radius_e(j - 1));

        // P4: count pairs (I, j) whose annulus meets C_J = B(R_J, c r_m).
        // Points of C_J are at distance [max(0, dist - c r_m),
        // corner_max + c r_m] from R_I; annulus j covers (a_j, a_j + c r_m].
        let mut p4_count = 0usize;
        for (cj, bj) in &self.level_m {
            let mut count = 0usize;
            for (_, bi) in &self.level_n {
                let dist_sq = bj.dist_sq(bi);
                let far_sq = max_corner_dist_sq(bj, bi);
                for j in 0..self.k {
                    let a_j = self.radius_e(j);
                    // a_j < dmax = corner_max + c r_m, i.e. corner_max > a_j - c r_m
                    let near_enough = !dist_le(&far_sq, &(&a_j - &crm));
                    // dmin = max(0, dist - c r_m) <= a_j + c r_m
                    let reaches = dist_le(&dist_sq, &(&a_j + &crm + &crm));
                    if near_enough && reaches {
                        count += 1;
                    }
                }
            }
            let _ = cj;
            p4_count = p4_count.max(count);
        }

        // P5: per-I annuli at a point: a_j within a half-open window of
        // width c r_m, step c r_n / k; cross-I overlaps need two shells of
        // outer radius t_out to reach the same point.
        let step = c * self.r_n(self.n) / Rat::from_integer(self.k.into());
        let per_i = (rat_to_f64(&crm) / rat_to_f64(&step)).floor() as usize + 1;
        let reach = &t_out + &t_out;
        let mut cross = 0usize;
        for (i, (_, bi)) in self.level_n.iter().enumerate() {
            let mut neighbors = 0usize;
            for (j, (_, bj)) in self.level_n.iter().enumerate() {
                if i != j && dist_le(&bi.dist_sq(bj), &reach) {
                    neighbors += 1;
                }
            }
            cross = cross.max(neighbors);
        }
        let sup_count = per_i * (1 + cross);
        let norm = self.k as f64 * rat_to_f64(self.r_n(self.m)) / rat_to_f64(self.r_n(self.n));
        let p5_constant = sup_count as f64 / norm;

        // P6: outermost annulus radius within the ancestor's C radius
        let anc_r = c * self.r_n(self.n - self.q);
        let mut p6_ok = t_out <= anc_r;
        for (ca, ba) in &self.ancestors {
            for (ci, bi) in &self.level_n {
                if ca.is_ancestor_of(ci) && !ba.contains(bi) {
                    p6_ok = false;
                }
            }
        }

        // P7: if an annulus of I' under ancestor A meets C_{I''}, then I''
        // descends from A (no trimming in this recipe)
        let mut p7_ok = true;
        for (ca, _) in &self.ancestors {
            for (ci, bi) in &self.level_n {
                if !ca.is_ancestor_of(ci) {
                    continue;
                }
                for (cj, bj) in &self.level_m {
                    let dist_sq = bj.dist_sq(bi);
                    let far_sq = max_corner_dist_sq(bj, bi);
                    let near = dist_le(&dist_sq, &(&t_out + &crm));
                    let deep_enough = !dist_le(&far_sq, &(&crn - &crm));
                    if near && deep_enough && !(ca.is_ancestor_of(cj) || ca == cj) {
                        p7_ok = false;
                    }
                }
            }
        }

        Ok(PropertyReport {
            p1_disjoint_count,
            p2_ball_ratio,
            p3_ok,
            p4_count,
            p5_constant,
            p6_ok,
            p7_ok,
            n: self.n,
            m: self.m,
            k_nm: self.k,
            q: self.q,
            c: rat_to_f64(&self.c),
            recipe: "cantor-exact".into(),
        })
    }
}

// ---------------------------------------------------------------------------
// Sard recipe: unions of rounded boxes on windowed grids

/// A finite union of rounded boxes with its exact distance field:
/// dist(x, union) = max(0, min over parts of (dist(x, box) - radius)).
#[derive(Debug, Clone)]
pub struct RoundedUnion {
    pub d: usize,
    /// (lo, hi, radius)
    pub parts: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

impl RoundedUnion {
    /// Signed field: <= 0 inside the union, else the distance to it.
    pub fn field(&self, p: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for (lo, hi, rad) in &self.parts {
            let mut acc = 0.0;
            for a in 0..self.d {
                let g = if p[a] < lo[a] {
                    lo[a] - p[a]
                } else if p[a] > hi[a] {
                    p[a] - hi[a]
                } else {
                    0.0
                };
                acc += g * g;
            }
            best = best.min(acc.sqrt() - rad);
        }
        best
    }

    fn bounds(&self, extra: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for (blo, bhi, rad) in &self.parts {
            for a in 0..self.d {
                lo[a] = lo[a].min(blo[a] - rad - extra);
                hi[a] = hi[a].max(bhi[a] + rad + extra);
            }
        }
        (lo, hi)
    }

    /// Cells whose centers satisfy lo_t < field <= hi_t, over a fitted
    /// window aligned to the global cell lattice.
    pub fn band_grid(&self, h: f64, lo_t: f64, hi_t: f64) -> Result<GridSet> {
        if self.parts.is_empty() {
            return GridSet::empty(self.d, h);
        }
        let (lo, hi) = self.bounds(hi_t.max(0.0) + 2.0 * h);
        let mut origin = [0i64; MAX_DIM];
        let mut dims = [1usize; MAX_DIM];
        for a in 0..self.d {
            origin[a] = (lo[a] / h).floor() as i64;
            dims[a] = ((hi[a] / h).ceil() as i64 - origin[a]).max(1) as usize;
        }
        GridSet::from_predicate(self.d, h, origin, dims, |p| {
            let f = self.field(p);
            f > lo_t && f <= hi_t
        })
    }

    /// The sublevel set field <= t.
    pub fn grid(&self, h: f64, t: f64) -> Result<GridSet> {
        self.band_grid(h, f64::NEG_INFINITY, t)
    }
}

/// The Sard recipe over real intervals: C of an interval (a, b) is the
/// union over dyadic J inside it of B(R_J, c omega^{-1}(gap to the
/// complement)); E_{I,j} enlarges the interval by j 2^{-m}.
pub struct SardPropertyFamily {
    h: f64,
    c: f64,
    n: usize,
    m: usize,
    k: u64,
    q: usize,
    /// critical scales r_1..r_m
    r: Vec<f64>,
    c_n: Vec<(Code, GridSet)>,
    c_n_expanded: Vec<(Code, GridSet)>,
    c_n_unions: Vec<(Code, RoundedUnion)>,
    c_m: Vec<(Code, GridSet)>,
    c_m_expanded: Vec<(Code, GridSet)>,
    ancestors: Vec<(Code, GridSet)>,
    /// E and D for every I at level n and j < k
    e_sets: Vec<((Code, u64), GridSet)>,
    d_sets: Vec<((Code, u64), GridSet)>,
}

impl SardPropertyFamily {
    /// Rounded-box parts of C for the real interval (a, b).
    fn c_union(
        family: &BoxFamily,
        spec: &ModulusSpec,
        c: f64,
        a: f64,
        b: f64,
        max_depth: usize,
    ) -> Result<RoundedUnion> {
        let d = family.schedule.dim;
        let mut parts = Vec::new();
        for depth in 0..=max_depth {
            for code in Code::all_at_depth(depth) {
                let (l, r) = code.dyadic_interval();
                let (l, r) = (rat_to_f64(&l), rat_to_f64(&r));
                if l < a - 1e-12 || r > b + 1e-12 {
                    continue;
                }
                let gap = (l - a).min(b - r).max(0.0);
                let rad = if gap > 0.0 {
                    c * spec.invert(gap.min(spec.range_max()))?
                } else {
                    0.0
                };
                let rect = family.get(&code)?;
                parts.push((
                    rect.lo.iter().map(rat_to_f64).collect(),
                    rect.hi.iter().map(rat_to_f64).collect(),
                    rad,
                ));
            }
        }
        let _ = d;
        Ok(RoundedUnion { d, parts })
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        family: &BoxFamily,
        spec: &ModulusSpec,
        c: f64,
        n: usize,
        m: usize,
        k: u64,
        q: usize,
        h: Option<f64>,
    ) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Precondition(format!("c = {c} not in (0, 1)")));
        }
        if n < q {
            return Err(Error::Precondition(format!("n = {n} < q = {q}")));
        }
        let cs = spec.critical_sequence(m)?;
        let r_m = cs.r_n(m);
        let h = h.unwrap_or(c * r_m / 4.0);
        if h > c * r_m / 4.0 + 1e-15 {
            return Err(Error::Resolution(format!(
                "h = {h} exceeds c r_m / 4 = {}",
                c * r_m / 4.0
            )));
        }
        let delta = 2f64.powi(-(m as i32));
        let crm = c * r_m;

        let interval = |code: &Code| {
            let (l, r) = code.dyadic_interval();
            (rat_to_f64(&l), rat_to_f64(&r))
        };

        // C fields for the three levels
        let build_level = |depth: usize| -> Result<Vec<(Code, RoundedUnion)>> {
            Code::all_at_depth(depth)
                .map(|code| {
                    let (l, r) = interval(&code);
                    Ok((code, Self::c_union(family, spec, c, l, r, m)?))
                })
                .collect()
        };
        let un_n = build_level(n)?;
        let un_m = build_level(m)?;
        let un_anc = build_level(n - q)?;

        let to_grids = |unions: &[(Code, RoundedUnion)], t: f64| -> Result<Vec<(Code, GridSet)>> {
            unions
                .par_iter()
                .map(|(code, u)| Ok((*code, u.grid(h, t)?)))
                .collect()
        };
        let c_n = to_grids(&un_n, 0.0)?;
        let c_n_expanded = to_grids(&un_n, crm)?;
        let c_m = to_grids(&un_m, 0.0)?;
        let c_m_expanded = to_grids(&un_m, crm)?;
        let ancestors = to_grids(&un_anc, 0.0)?;

        // E_{I,j} = C of the interval enlarged by j 2^{-m}; D is the band
        // 0 < field <= c r_m of the same union
        let jobs: Vec<(Code, u64)> = Code::all_at_depth(n)
            .flat_map(|code| (0..k).map(move |j| (code, j)))
            .collect();
        let built: Vec<((Code, u64), GridSet, GridSet)> = jobs
            .par_iter()
            .map(|&(code, j)| {
                let (l, r) = interval(&code);
                let grow = j as f64 * delta;
                let u = Self::c_union(family, spec, c, l - grow, r + grow, m)?;
                let e = u.grid(h, 0.0)?;
                let d_band = u.band_grid(h, 0.0, crm)?;
                Ok(((code, j), e, d_band))
            })
            .collect::<Result<_>>()?;
        let mut e_sets = Vec::with_capacity(built.len());
        let mut d_sets = Vec::with_capacity(built.len());
        for (key, e, d_band) in built {
            e_sets.push((key, e));
            d_sets.push((key, d_band));
        }

        Ok(SardPropertyFamily {
            h,
            c,
            n,
            m,
            k,
            q,
            r: cs.r,
            c_n,
            c_n_expanded,
            c_n_unions: un_n,
            c_m,
            c_m_expanded,
            ancestors,
            e_sets,
            d_sets,
        })
    }

    /// Descendants of `anc` at `depth`, dyadic order, first and last two
    /// dropped.
    fn trimmed(anc: &Code, depth: usize) -> Vec<Code> {
        let all: Vec<Code> = Code::all_at_depth(depth)
            .filter(|c| anc.is_ancestor_of(c) || anc == c)
            .collect();
        if all.len() <= 4 {
            return Vec::new();
        }
        all[2..all.len() - 2].to_vec()
    }

    fn check(&self) -> Result<PropertyReport> {
        let r_n = self.r[self.n - 1];

        // P1 over disjoint pairs, via the c r_m expansions
        let mut p1_disjoint_count = 0usize;
        for (ci, gi) in &self.c_n_expanded {
            let mut count = 0usize;
            for (cj, gj) in &self.c_m_expanded {
                if let Relation::Disjoint { .. } = ci.relate(cj) {
                    if gi.intersects(gj)? {
                        count += 1;
                    }
                }
            }
            p1_disjoint_count = p1_disjoint_count.max(count);
        }

        // P2: inscribed ball per part: radius + half the smallest box side
        let mut p2_ball_ratio = f64::INFINITY;
        for (_, u) in &self.c_n_unions {
            let mut best = 0.0f64;
            for (lo, hi, rad) in &u.parts {
                let mut half = f64::INFINITY;
                for a in 0..u.d {
                    half = half.min((hi[a] - lo[a]) / 2.0);
                }
                best = best.max(rad + half);
            }
            p2_ball_ratio = p2_ball_ratio.min(best / r_n);
        }

        // P3: C_I inside each E_{I,j}
        let mut p3_ok = true;
        for ((code, _), e) in &self.e_sets {
            let c_i = &self
                .c_n
                .iter()
                .find(|(ci, _)| ci == code)
                .expect("level n set")
                .1;
            if !c_i.is_subset_of(e)? {
                p3_ok = false;
            }
        }

        // P4: annuli meeting C_J
        let mut p4_count = 0usize;
        for (_, gj) in &self.c_m {
            let mut count = 0usize;
            for (_, d) in &self.d_sets {
                if d.intersects(gj)? {
                    count += 1;
                }
            }
            p4_count = p4_count.max(count);
        }

        // P5: per-cell sum of annulus indicators
        let mut counts: HashMap<[i64; MAX_DIM], u32> = HashMap::new();
        for (_, d) in &self.d_sets {
            for cell in d.iter_cells() {
                *counts.entry(cell).or_insert(0) += 1;
            }
        }
        let sup = counts.values().copied().max().unwrap_or(0) as f64;
        let norm = self.k as f64 * self.r[self.m - 1] / r_n;
        let p5_constant = sup / norm;

        // P6/P7 per ancestor over the trimmed level-n set
        let mut p6_ok = true;
        let mut p7_ok = true;
        for (anc, g_anc) in &self.ancestors {
            let keep_n = Self::trimmed(anc, self.n);
            let keep_m = Self::trimmed(anc, self.m);
            for ((code, _j), d) in &self.d_sets {
                if !keep_n.contains(code) {
                    continue;
                }
                if !d.is_subset_of(g_anc)? {
                    p6_ok = false;
                }
                for (cj, gj) in &self.c_m {
                    if d.intersects(gj)? && !keep_m.contains(cj) {
                        p7_ok = false;
                    }
                }
            }
        }

        Ok(PropertyReport {
            p1_disjoint_count,
            p2_ball_ratio,
            p3_ok,
            p4_count,
            p5_constant,
            p6_ok,
            p7_ok,
            n: self.n,
            m: self.m,
            k_nm: self.k,
            q: self.q,
            c: self.c,
            recipe: format!("sard-grid h={}", self.h),
        })
    }
}

// ---------------------------------------------------------------------------
// (k1) / (k2)

#[derive(Debug, Clone, Serialize)]
pub struct KConditionReport {
    /// sup over n of the row sums of 2^{(m-n)/d} / k_{n,m}
    pub k1_sup: f64,
    /// partial sums of the n = 1 row, for growth inspection
    pub k1_partial_sums: Vec<f64>,
    /// least gap from which every term is <= 1/(4C); None if no such gap in
    /// the tested range
    pub k2_threshold: Option<usize>,
}

pub fn check_k_conditions<F: Fn(usize, usize) -> f64>(
    k: F,
    d: u32,
    c_big: f64,
    n_max: usize,
) -> Result<KConditionReport> {
    if d == 0 || n_max < 2 {
        return Err(Error::Precondition(format!("d = {d}, n_max = {n_max}")));
    }
    if !(c_big > 0.0) {
        return Err(Error::Precondition(format!("C = {c_big} must be positive")));
    }
    let term = |n: usize, m: usize| -> Result<f64> {
        let knm = k(n, m);
        if !(knm > 0.0) {
            return Err(Error::InvalidInput(format!("k({n},{m}) = {knm}")));
        }
        Ok(2f64.powf((m - n) as f64 / d as f64) / knm)
    };
    let mut k1_sup = 0.0f64;
    let mut k1_partial_sums = Vec::new();
    for n in 1..=n_max {
        let mut acc = 0.0;
        for m in n..=n_max {
            acc += term(n, m)?;
            if n == 1 {
                k1_partial_sums.push(acc);
            }
        }
        k1_sup = k1_sup.max(acc);
    }
    // non-strict with a relative tolerance: the threshold cases sit exactly
    // on 1/(4C)
    let bound = (1.0 / (4.0 * c_big)) * (1.0 + 1e-12);
    let gap_ok = |g: usize| -> Result<bool> {
        for n in 1..=n_max {
            for gg in g..=(n_max.saturating_sub(n)) {
                if term(n, n + gg)? > bound {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    let mut k2_threshold = None;
    for g in 0..n_max {
        if gap_ok(g)? {
            k2_threshold = Some(g);
            break;
        }
    }
    Ok(KConditionReport { k1_sup, k1_partial_sums, k2_threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructor::schedule_from_f64;

    fn cantor_setup(depth: usize) -> (BoxFamily, Vec<f64>) {
        let r: Vec<f64> = (1..=depth).map(|i| 0.25f64.powi(i as i32)).collect();
        let s = schedule_from_f64(&r, 2, depth).unwrap();
        (BoxFamily::build(s, depth).unwrap(), r)
    }

    fn cantor_family(n: usize, m: usize, k: u64, q: usize) -> PropertyFamily {
        let (fam, r) = cantor_setup(m.max(6));
        let model = DistanceModel::cantor(r).unwrap();
        assemble_property_family(&fam, &model, 0.125, n, m, k, q, None).unwrap()
    }

    #[test]
    fn cantor_small_all_clean() {
        let pf = cantor_family(2, 3, 16, 1);
        let rep = check_properties(&pf).unwrap();
        assert_eq!(rep.p1_disjoint_count, 0);
        assert!(rep.p2_ball_ratio >= 0.125);
        assert!(rep.p3_ok);
        assert_eq!(rep.p4_count, 0, "annuli must miss every deeper C");
        assert!(rep.p5_constant <= 4.0);
        assert!(rep.p6_ok);
        assert!(rep.p7_ok);
    }

    #[test]
    fn cantor_depth_range() {
        for n in 2..=4usize {
            for m in n..=6usize {
                let k = 4u64.pow((m - n) as u32);
                let rep = check_properties(&cantor_family(n, m, k, 1)).unwrap();
                assert_eq!(rep.p1_disjoint_count, 0, "n={n} m={m}");
                assert_eq!(rep.p4_count, 0, "n={n} m={m}");
                assert!(rep.p3_ok && rep.p6_ok && rep.p7_ok, "n={n} m={m}");
                assert!(rep.p5_constant <= 4.0, "n={n} m={m}: {}", rep.p5_constant);
            }
        }
    }

    #[test]
    fn cantor_rejects_big_c() {
        let (fam, r) = cantor_setup(4);
        let model = DistanceModel::cantor(r).unwrap();
        assert!(assemble_property_family(&fam, &model, 0.2, 2, 3, 16, 1, None).is_err());
    }

    #[test]
    fn k_conditions_pow2_d2() {
        let rep = check_k_conditions(|n, m| 2f64.powi((m - n) as i32), 2, 1.0, 40).unwrap();
        let expect = 1.0 / (1.0 - 2f64.powf(-0.5));
        assert!(rep.k1_sup <= expect);
        assert!(rep.k1_sup > expect - 1e-4);
        assert_eq!(rep.k2_threshold, Some(4));
    }

    #[test]
    fn k_conditions_pow2_d1_diverges() {
        let rep = check_k_conditions(|n, m| 2f64.powi((m - n) as i32), 1, 1.0, 40).unwrap();
        // every term is 1: linear growth, no usable gap
        assert!((rep.k1_sup - 40.0).abs() < 1e-9);
        for (i, s) in rep.k1_partial_sums.iter().enumerate() {
            assert!((s - (i + 1) as f64).abs() < 1e-9);
        }
        assert_eq!(rep.k2_threshold, None);
    }

    #[test]
    fn k_conditions_pow4_d2() {
        let rep = check_k_conditions(|n, m| 4f64.powi((m - n) as i32), 2, 1.0, 40).unwrap();
        let expect = 1.0 / (1.0 - 2f64.powf(-1.5));
        assert!((rep.k1_sup - expect).abs() < 1e-4);
        // 2^{-3g/2}: 0.354 at g = 1, 0.125 at g = 2
        assert_eq!(rep.k2_threshold, Some(2));
    }

    #[test]
    fn rounded_union_field_values() {
        let u = RoundedUnion {
            d: 2,
            parts: vec![
                (vec![0.0, 0.0], vec![1.0, 1.0], 0.25),
                (vec![3.0, 0.0], vec![4.0, 1.0], 0.0),
            ],
        };
        assert!(u.field(&[0.5, 0.5]) < 0.0);
        assert!((u.field(&[1.5, 0.5]) - 0.25).abs() < 1e-12);
        assert!((u.field(&[2.5, 0.5]) - 0.5).abs() < 1e-12);
        // corner distance
        let corner = u.field(&[2.0, 2.0]);
        assert!((corner - (2f64).sqrt() - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn sard_family_builds_and_reports() {
        let spec = ModulusSpec::power(1.5, 2);
        let cs = spec.critical_sequence(5).unwrap();
        let s = schedule_from_f64(&cs.r_star, 2, 5).unwrap();
        let fam = BoxFamily::build(s, 5).unwrap();
        let model = DistanceModel::sard(spec, 5).unwrap();
        let pf = assemble_property_family(&fam, &model, 0.125, 2, 5, 8, 2, None).unwrap();
        let rep = check_properties(&pf).unwrap();
        assert!(rep.p3_ok);
        assert!(rep.p2_ball_ratio > 0.0);
        assert!(rep.p4_count < 64);
        assert!(rep.p5_constant.is_finite());
    }

    #[test]
    fn sard_rejects_coarse_grid() {
        let spec = ModulusSpec::power(1.5, 2);
        let cs = spec.critical_sequence(4).unwrap();
        let s = schedule_from_f64(&cs.r_star, 2, 4).unwrap();
        let fam = BoxFamily::build(s, 4).unwrap();
        let model = DistanceModel::sard(spec, 4).unwrap();
        let r4 = cs.r_n(4);
        let res = assemble_property_family(&fam, &model, 0.125, 2, 4, 4, 2, Some(r4));
        assert!(matches!(res, Err(Error::Resolution(_))));
    }
}
