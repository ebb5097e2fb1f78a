//! Exact rational helpers. All certified geometry runs on `BigRational`;
//! floats only enter through explicit, directionally rounded conversions.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// 2^k as an exact rational, k may be negative.
pub fn pow2(k: i64) -> Rat {
    let one = BigInt::one();
    if k >= 0 {
        Rat::from_integer(one << (k as usize))
    } else {
        Rat::new(one.clone(), one << ((-k) as usize))
    }
}

/// Exact rational value of a finite f64.
pub fn rat_from_f64(x: f64) -> Result<Rat> {
    Rat::from_float(x).ok_or_else(|| Error::InvalidInput(format!("non-finite value {x}")))
}

/// Largest multiple of 2^-bits that is <= x. Gap sequences coming from
/// floating-point inversion are snapped down so separation certificates
/// stay conservative.
pub fn rat_floor_bits(x: f64, bits: u32) -> Result<Rat> {
    let exact = rat_from_f64(x)?;
    let scale = pow2(bits as i64);
    let scaled = &exact * &scale;
    Ok(Rat::from_integer(scaled.floor().to_integer()) / scale)
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // fall back through a quotient of scaled integers
        let num = x.numer().to_f64().unwrap_or(f64::INFINITY);
        let den = x.denom().to_f64().unwrap_or(f64::INFINITY);
        num / den
    })
}

/// Prints as "p/q" (or "p" for integers), the wire format for rationals.
pub fn rat_to_string(x: &Rat) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rat_from_str(s: &str) -> Result<Rat> {
    let parse_int = |t: &str| -> Result<BigInt> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| Error::InvalidInput(format!("bad rational {s:?}: {e}")))
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let den = parse_int(q)?;
            if den.is_zero() {
                return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
            }
            Ok(Rat::new(parse_int(p)?, den))
        }
        None => Ok(Rat::from_integer(parse_int(s)?)),
    }
}

/// Squared Euclidean distance between two axis-aligned boxes given as
/// per-axis closed intervals; zero when they touch or overlap.
pub fn box_dist_sq(lo_a: &[Rat], hi_a: &[Rat], lo_b: &[Rat], hi_b: &[Rat]) -> Rat {
    let mut acc = Rat::zero();
    for i in 0..lo_a.len() {
        let gap_ab = &lo_b[i] - &hi_a[i];
        let gap_ba = &lo_a[i] - &hi_b[i];
        let gap = if gap_ab.is_positive() {
            gap_ab
        } else if gap_ba.is_positive() {
            gap_ba
        } else {
            continue;
        };
        acc += &gap * &gap;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_signs() {
        assert_eq!(pow2(3), Rat::from_integer(BigInt::from(8)));
        assert_eq!(pow2(-2), Rat::new(BigInt::one(), BigInt::from(4)));
    }

    #[test]
    fn floor_bits_rounds_down() {
        let x = 0.70710678118654752_f64;
        let snapped = rat_floor_bits(x, 128).unwrap();
        let exact = rat_from_f64(x).unwrap();
        assert!(snapped <= exact);
        let diff = &exact - &snapped;
        assert!(diff < pow2(-120));
    }

    #[test]
    fn string_round_trip() {
        let x = Rat::new(BigInt::from(-5), BigInt::from(8));
        assert_eq!(rat_to_string(&x), "-5/8");
        assert_eq!(rat_from_str("-5/8").unwrap(), x);
        assert_eq!(rat_from_str("7").unwrap(), Rat::from_integer(BigInt::from(7)));
    }

    #[test]
    fn box_distance_touching_is_zero() {
        let a = (vec![pow2(0) * Rat::zero()], vec![pow2(-1)]);
        let b = (vec![pow2(-1)], vec![pow2(0)]);
        assert!(box_dist_sq(&a.0, &a.1, &b.0, &b.1).is_zero());
    }
}
