//! Exact number helpers shared by the other modules.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a plain decimal such as `0.25` or `-1.5`.
///
/// Decimals are converted exactly (`0.1` is `1/10`, not the nearest double).
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_bigint(num)?;
        let den = parse_bigint(den)?;
        if den.is_zero() {
            return Err(format!("zero denominator in `{text}`"));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int_part, frac_part)) = text.split_once('.') {
        let negative = int_part.trim_start().starts_with('-');
        let int_digits = int_part.trim().trim_start_matches(['-', '+']);
        if frac_part.is_empty() && int_digits.is_empty() {
            return Err(format!("malformed decimal `{text}`"));
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("malformed decimal `{text}`"));
        }
        let whole = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            parse_bigint(int_digits)?
        };
        if whole.is_negative() {
            return Err(format!("malformed decimal `{text}`"));
        }
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = if frac_part.is_empty() {
            BigInt::zero()
        } else {
            parse_bigint(frac_part)?
        };
        let magnitude = Rational::new(whole * &scale + frac, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    Ok(Rational::from_integer(parse_bigint(text)?))
}

pub fn parse_bigint(text: &str) -> Result<BigInt, String> {
    let t = text.trim();
    let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("not an integer: `{t}`"));
    }
    t.parse::<BigInt>().map_err(|e| format!("not an integer: `{t}` ({e})"))
}

/// Parses a real number written as a fraction (`2/3`, converted through
/// exact rational arithmetic) or as anything `f64::from_str` accepts.
pub fn parse_real(text: &str) -> Result<f64, String> {
    let t = text.trim();
    if t.contains('/') {
        return parse_rational(t).map(|r| to_f64(&r));
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("not a finite real number: `{t}`")),
    }
}

/// Formats as `num/den`, also for integers (`1/1`).
pub fn fmt_fraction(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Exact decimal when the denominator has no prime factors other than 2
/// and 5 (`1/4` is `0.25`, `3` is `3`), otherwise `num/den`.
pub fn fmt_decimal(r: &Rational) -> String {
    let mut den = r.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return fmt_fraction(r);
    }
    let digits = twos.max(fives);
    if digits == 0 {
        return r.numer().to_string();
    }
    let scaled = (r * Rational::from_integer(BigInt::from(10).pow(digits))).to_integer();
    let sign = if scaled.is_negative() { "-" } else { "" };
    let mag = scaled.abs().to_string();
    let mag = format!("{mag:0>width$}", width = digits as usize + 1);
    let (int, frac) = mag.split_at(mag.len() - digits as usize);
    format!("{sign}{int}.{frac}")
}

/// Lossy conversion used only for reporting.
pub fn to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Huge numerator/denominator: shift both down to the top 64 bits.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n - shift_d).clamp(-2000, 2000) as i32)
}

/// The exact rational value of a finite double.
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

pub fn is_probability(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}

pub fn ceil_to_biguint(r: &Rational) -> Option<BigUint> {
    r.ceil().to_integer().to_biguint()
}
