//! Moduli of continuity: evaluation, bisection inversion, admissibility
//! diagnostics, critical sequences and the series convergence verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for bisection inversion. The bracket is narrowed well
/// past this in practice (we iterate to f64 resolution).
pub const INVERT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// w(r) = r^p on (0, 1].
    Power { p: f64 },
    /// w(r) = r^p * ln(e/r)^a on (0, 1]. The ln(e/r) factor is >= 1 there,
    /// matching r^p |log r| asymptotically as r -> 0.
    PowerLog { p: f64, a: f64 },
    /// Strictly increasing samples, interpolated linearly in (ln r, ln w).
    Table { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusSpec {
    #[serde(flatten)]
    pub family: Family,
    pub dim: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub monotone_ok: bool,
    pub convex_ok: bool,
    pub ratio_decreasing_ok: bool,
    pub doubling_constant: f64,
    pub lipschitz_constant: f64,
    pub grid: String,
}

/// r[n] solves w(r) = 2^-(n+1); r_star[n] solves w(r) = 2^-(n-1).
/// Both are 1-based via the accessors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSequences {
    pub r: Vec<f64>,
    pub r_star: Vec<f64>,
    pub depth: usize,
}

impl CriticalSequences {
    pub fn r_n(&self, n: usize) -> f64 {
        self.r[n - 1]
    }
    pub fn r_star_n(&self, n: usize) -> f64 {
        self.r_star[n - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Unknown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub partial_sums: Vec<f64>,
    pub term_ratio_estimate: f64,
}

impl ModulusSpec {
    pub fn power(p: f64, dim: u32) -> Self {
        ModulusSpec { family: Family::Power { p }, dim }
    }

    pub fn power_log(p: f64, a: f64, dim: u32) -> Self {
        ModulusSpec { family: Family::PowerLog { p, a }, dim }
    }

    pub fn table(samples: Vec<(f64, f64)>, dim: u32) -> Result<Self> {
        let spec = ModulusSpec { family: Family::Table { samples }, dim };
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a Table spec from CSV with header `r,omega`.
    pub fn table_from_csv(text: &str, dim: u32) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty table CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["r", "omega"] {
            return Err(Error::InvalidInput(format!(
                "expected header `r,omega`, got {header:?}"
            )));
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::InvalidInput(format!("row {}: {line:?}", i + 2)));
            }
            let r: f64 = parts[0]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("row {}: {e}", i + 2)))?;
            let w: f64 = parts[1]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("row {}: {e}", i + 2)))?;
            samples.push((r, w));
        }
        Self::table(samples, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidSpec(format!("dim {} < 2", self.dim)));
        }
        match &self.family {
            Family::Power { p } => {
                if !(*p > 0.0) {
                    return Err(Error::InvalidSpec(format!("Power exponent {p} <= 0")));
                }
            }
            Family::PowerLog { p, a } => {
                if !(*p > 0.0) {
                    return Err(Error::InvalidSpec(format!("PowerLog exponent {p} <= 0")));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidSpec(format!("PowerLog log exponent {a}")));
                }
            }
            Family::Table { samples } => {
                if samples.len() < 2 {
                    return Err(Error::InvalidSpec("table needs >= 2 samples".into()));
                }
                for w in samples.windows(2) {
                    if !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1) {
                        return Err(Error::InvalidSpec(format!(
                            "table not strictly increasing near r={}",
                            w[1].0
                        )));
                    }
                }
                if samples.iter().any(|&(r, w)| r <= 0.0 || w <= 0.0) {
                    return Err(Error::InvalidSpec("table entries must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Upper end of the domain: 1 for closed-form families, table max otherwise.
    pub fn domain_max(&self) -> f64 {
        match &self.family {
            Family::Power { .. } | Family::PowerLog { .. } => 1.0,
            Family::Table { samples } => samples.last().map(|s| s.0).unwrap_or(1.0),
        }
    }

    fn domain_min_hint(&self) -> f64 {
        match &self.family {
            Family::Power { .. } | Family::PowerLog { .. } => 0.0,
            Family::Table { samples } => samples.first().map(|s| s.0).unwrap_or(0.0),
        }
    }

    /// w(r). Defined as 0 at r = 0.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("negative radius {r}")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let max = self.domain_max();
        if r > max * (1.0 + 1e-15) {
            return Err(Error::Domain(format!("r={r} above domain max {max}")));
        }
        match &self.family {
            Family::Power { p } => Ok(r.powf(*p)),
            Family::PowerLog { p, a } => Ok(r.powf(*p) * (1.0 - r.ln()).powf(*a)),
            Family::Table { samples } => Ok(table_eval(samples, r)),
        }
    }

    /// w(max): the largest invertible target.
    pub fn range_max(&self) -> f64 {
        self.eval(self.domain_max()).unwrap_or(f64::NAN)
    }

    /// Inverse of w by bisection; only monotonicity is assumed.
    pub fn invert(&self, y: f64) -> Result<f64> {
        self.validate()?;
        if !(y > 0.0) {
            return Err(Error::Range(format!("target {y} not positive")));
        }
        let range_max = self.range_max();
        if y > range_max * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "target {y} above range max {range_max}"
            )));
        }
        let mut hi = self.domain_max();
        let mut lo = f64::min(1e-15, self.domain_min_hint().max(f64::MIN_POSITIVE));
        // extend the bracket downward for very small targets
        let mut w_lo = self.eval(lo)?;
        while w_lo > y && lo > 1e-300 {
            lo *= 1e-4;
            w_lo = self.eval(lo)?;
        }
        if w_lo > y {
            return Err(Error::Range(format!("target {y} below range")));
        }
        let mut w_hi = self.eval(hi)?;
        if w_hi < w_lo {
            return Err(Error::InvalidSpec("non-monotone modulus in bracket".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let w_mid = self.eval(mid)?;
            if w_mid < y {
                lo = mid;
                w_lo = w_mid;
            } else {
                hi = mid;
                w_hi = w_mid;
            }
        }
        let _ = (w_lo, w_hi);
        Ok(0.5 * (lo + hi))
    }

    /// Grid diagnostics for the hypotheses behind the characterization:
    /// monotone, midpoint-convex, w(r)/r^d decreasing, doubling and the
    /// Lipschitz-type quotient. All findings refer to the sampled grid only.
    pub fn check_admissibility(&self, grid_size: usize) -> Result<AdmissibilityReport> {
        self.validate()?;
        if grid_size < 16 {
            return Err(Error::Precondition(format!("grid_size {grid_size} < 16")));
        }
        let r_max = self.domain_max();
        let r_min = match &self.family {
            Family::Table { samples } => samples[0].0,
            _ => 1e-6 * r_max,
        };
        let g = grid_size;
        let grid: Vec<f64> = (0..g)
            .map(|i| r_min * (r_max / r_min).powf(i as f64 / (g - 1) as f64))
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&r| self.eval(r)).collect::<Result<_>>()?;

        let monotone_ok = vals.windows(2).all(|w| w[1] > w[0]);

        let mut convex_ok = true;
        for i in 0..g - 2 {
            let (x, z) = (grid[i], grid[i + 2]);
            let mid = 0.5 * (x + z);
            let w_mid = self.eval(mid)?;
            if w_mid > 0.5 * (vals[i] + vals[i + 2]) * (1.0 + 1e-9) {
                convex_ok = false;
            }
        }

        let d = self.dim as f64;
        let mut ratio_decreasing_ok = true;
        let mut prev_ratio = f64::INFINITY;
        for i in 0..g {
            let u = vals[i] / grid[i].powf(d);
            if u > prev_ratio * (1.0 + 1e-9) {
                ratio_decreasing_ok = false;
            }
            prev_ratio = u;
        }

        let mut doubling_constant: f64 = 0.0;
        for i in 0..g {
            if 2.0 * grid[i] <= r_max {
                doubling_constant = doubling_constant.max(self.eval(2.0 * grid[i])? / vals[i]);
            }
        }

        let alphas = [0.125, 0.25, 0.5, 1.0];
        let step = (g / 24).max(1);
        let mut lipschitz_constant: f64 = 0.0;
        for i in (0..g).step_by(step) {
            for j in (i..g).step_by(step) {
                let (r, rr) = (grid[i], grid[j]);
                for &alpha in &alphas {
                    let arg = r + alpha * rr;
                    if arg > r_max {
                        continue;
                    }
                    let q = (self.eval(arg)? - self.eval(r)?) / (alpha * self.eval(rr)?);
                    lipschitz_constant = lipschitz_constant.max(q);
                }
            }
        }

        Ok(AdmissibilityReport {
            monotone_ok,
            convex_ok,
            ratio_decreasing_ok,
            doubling_constant,
            lipschitz_constant,
            grid: format!("{g} geometric points on [{r_min:.3e}, {r_max:.3e}]"),
        })
    }

    /// r[n] and r_star[n] for n = 1..=depth.
    pub fn critical_sequence(&self, depth: usize) -> Result<CriticalSequences> {
        if depth < 1 {
            return Err(Error::Precondition("depth must be >= 1".into()));
        }
        let mut r = Vec::with_capacity(depth);
        let mut r_star = Vec::with_capacity(depth);
        for n in 1..=depth {
            r.push(self.invert(2f64.powi(-(n as i32 + 1)))?);
            r_star.push(self.invert(2f64.powi(-(n as i32 - 1)))?);
        }
        Ok(CriticalSequences { r, r_star, depth })
    }

    /// Convergence of sum 2^{n/d} r_n. Closed-form families get the analytic
    /// verdict; tables get Unknown plus partial sums as heuristic evidence.
    pub fn classify(&self, n_terms: usize) -> Result<Classification> {
        self.validate()?;
        if n_terms < 8 {
            return Err(Error::Precondition(format!("N {n_terms} < 8")));
        }
        let d = self.dim as f64;
        let verdict = match &self.family {
            Family::Power { p } => {
                if *p < d {
                    Verdict::Convergent
                } else {
                    Verdict::Divergent
                }
            }
            Family::PowerLog { p, a } => {
                if *p < d {
                    Verdict::Convergent
                } else if *p > d {
                    Verdict::Divergent
                } else if *a > d {
                    Verdict::Convergent
                } else {
                    Verdict::Divergent
                }
            }
            Family::Table { .. } => Verdict::Unknown,
        };
        // Partial sums S_k = sum_{n<=k} 2^{n/d} r_n, indexed from n = 1.
        let mut partial_sums = Vec::with_capacity(n_terms);
        let mut terms = Vec::with_capacity(n_terms);
        let mut acc = 0.0;
        for n in 1..=n_terms {
            let target = 2f64.powi(-(n as i32 + 1));
            let rn = match self.invert(target) {
                Ok(v) => v,
                // table ran out of range; stop the evidence early
                Err(Error::Range(_)) => break,
                Err(e) => return Err(e),
            };
            let t = 2f64.powf(n as f64 / d) * rn;
            acc += t;
            terms.push(t);
            partial_sums.push(acc);
        }
        let term_ratio_estimate = if terms.len() >= 2 {
            terms[terms.len() - 1] / terms[terms.len() - 2]
        } else {
            f64::NAN
        };
        Ok(Classification { verdict, partial_sums, term_ratio_estimate })
    }
}

fn table_eval(samples: &[(f64, f64)], r: f64) -> f64 {
    let n = samples.len();
    // segment selection; below the first sample we extrapolate the first
    // segment log-linearly toward 0
    let seg = match samples.iter().position(|&(x, _)| x >= r) {
        Some(0) | None if r <= samples[0].0 => 0,
        Some(i) => i - 1,
        None => n - 2,
    };
    let (r0, w0) = samples[seg.min(n - 2)];
    let (r1, w1) = samples[seg.min(n - 2) + 1];
    let t = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
    (w0.ln() + t * (w1.ln() - w0.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_power_exact() {
        let spec = ModulusSpec::power(2.0, 2);
        assert_eq!(spec.eval(0.25).unwrap(), 0.0625);
        assert_eq!(spec.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_powerlog_direct_substitution() {
        // w(e^-1) = e^-2 * ln(e * e)^1 = 2 e^-2
        let spec = ModulusSpec::power_log(2.0, 1.0, 2);
        let got = spec.eval((-1.0f64).exp()).unwrap();
        let expect = 2.0 * (-2.0f64).exp();
        assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
        assert!((got - 0.27067).abs() < 1e-5);
    }

    #[test]
    fn eval_domain_error() {
        let spec = ModulusSpec::power(2.0, 2);
        assert!(matches!(spec.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(spec.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn invert_square_root() {
        let spec = ModulusSpec::power(2.0, 2);
        let r = spec.invert(1.0 / 16.0).unwrap();
        assert!((r - 0.25).abs() < 1e-12);
    }

    #[test]
    fn invert_power_three_halves_closed_form() {
        // y^(2/3) cross-check
        let spec = ModulusSpec::power(1.5, 2);
        let y = 2f64.powi(-5);
        let r = spec.invert(y).unwrap();
        let expect = y.powf(2.0 / 3.0);
        assert!((r - expect).abs() < 1e-12 * expect);
        assert!((r - 0.09921).abs() < 1e-5);
    }

    #[test]
    fn invert_round_trips_powerlog() {
        let spec = ModulusSpec::power_log(2.0, 1.0, 2);
        let y = 2.0 * (-2.0f64).exp();
        let r = spec.invert(y).unwrap();
        assert!((r - (-1.0f64).exp()).abs() < 1e-10);
        let back = spec.eval(r).unwrap();
        assert!((back - y).abs() <= 1e-10 * y);
    }

    #[test]
    fn invert_range_error() {
        let spec = ModulusSpec::power(2.0, 2);
        assert!(matches!(spec.invert(2.0), Err(Error::Range(_))));
        assert!(matches!(spec.invert(0.0), Err(Error::Range(_))));
    }

    #[test]
    fn admissibility_power_two() {
        let spec = ModulusSpec::power(2.0, 2);
        let rep = spec.check_admissibility(64).unwrap();
        assert!(rep.monotone_ok && rep.convex_ok && rep.ratio_decreasing_ok);
        assert!((rep.doubling_constant - 4.0).abs() < 1e-9);
        assert!(rep.doubling_constant <= 4.0 + 1e-9);
        assert!(rep.lipschitz_constant <= 2.0 * rep.doubling_constant + 1e-6);
    }

    #[test]
    fn admissibility_power_three_ratio_fails() {
        // r^3 / r^2 = r is increasing
        let spec = ModulusSpec::power(3.0, 2);
        let rep = spec.check_admissibility(64).unwrap();
        assert!(!rep.ratio_decreasing_ok);
    }

    #[test]
    fn admissibility_powerlog() {
        let spec = ModulusSpec::power_log(2.0, 1.0, 2);
        let rep = spec.check_admissibility(96).unwrap();
        assert!(rep.monotone_ok && rep.ratio_decreasing_ok);
        // r^2 ln(e/r) is concave for r > e^{-1/2}; the grid must notice
        assert!(!rep.convex_ok);
        assert!(rep.doubling_constant <= 4.0 + 1e-9);
    }

    #[test]
    fn critical_sequence_power_two() {
        let spec = ModulusSpec::power(2.0, 2);
        let cs = spec.critical_sequence(3).unwrap();
        let expect_r = [0.5, 2f64.powf(-1.5), 0.25];
        let expect_star = [1.0, 2f64.powf(-0.5), 0.5];
        for n in 1..=3 {
            assert!((cs.r_n(n) - expect_r[n - 1]).abs() < 1e-10);
            assert!((cs.r_star_n(n) - expect_star[n - 1]).abs() < 1e-10);
            assert!(cs.r_n(n) <= cs.r_star_n(n));
        }
    }

    #[test]
    fn critical_sequence_power_three_halves_entry() {
        let spec = ModulusSpec::power(1.5, 2);
        let cs = spec.critical_sequence(4).unwrap();
        assert!((cs.r_n(4) - 2f64.powf(-10.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn classify_verdicts() {
        let d = 2;
        let cases = [
            (ModulusSpec::power(2.0, d), Verdict::Divergent),
            (ModulusSpec::power(1.5, d), Verdict::Convergent),
            (ModulusSpec::power_log(2.0, 1.0, d), Verdict::Divergent),
            (ModulusSpec::power_log(2.0, 3.0, d), Verdict::Convergent),
        ];
        for (spec, expect) in cases {
            let c = spec.classify(16).unwrap();
            assert_eq!(c.verdict, expect, "{:?}", spec.family);
            // verdict invariant under N
            assert_eq!(spec.classify(32).unwrap().verdict, expect);
        }
    }

    #[test]
    fn classify_power_two_constant_terms() {
        let spec = ModulusSpec::power(2.0, 2);
        let c = spec.classify(16).unwrap();
        // every term is 2^{n/2} * 2^{-(n+1)/2} = 2^{-1/2}
        let t1 = c.partial_sums[0];
        assert!((t1 - 2f64.powf(-0.5)).abs() < 1e-10);
        assert!((c.term_ratio_estimate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn classify_power_three_halves_geometric() {
        let spec = ModulusSpec::power(1.5, 2);
        let c = spec.classify(16).unwrap();
        assert!((c.term_ratio_estimate - 2f64.powf(-1.0 / 6.0)).abs() < 1e-9);
    }

    #[test]
    fn table_from_csv_and_classify_unknown() {
        let csv = "r,omega\n0.001,0.000002\n0.01,0.0002\n0.1,0.02\n1.0,1.0\n";
        let spec = ModulusSpec::table_from_csv(csv, 2).unwrap();
        assert!(spec.eval(0.05).unwrap() > 0.0);
        let c = spec.classify(8).unwrap();
        assert_eq!(c.verdict, Verdict::Unknown);
        assert!(!c.partial_sums.is_empty());
    }

    #[test]
    fn table_rejects_non_monotone() {
        let csv = "r,omega\n0.1,0.5\n0.2,0.4\n";
        assert!(matches!(
            ModulusSpec::table_from_csv(csv, 2),
            Err(Error::InvalidSpec(_))
        ));
    }
}
