//! C99-style hexadecimal floating point text (`0x1.8p+1`), used where a file
//! must carry an `f64` bit-exactly.

use crate::error::{Error, Result};

const MANTISSA_BITS: u32 = 52;
const MANTISSA_MASK: u64 = (1 << MANTISSA_BITS) - 1;

/// Formats `v` as `[-]0x1.<hex>p<exp>` (or `0x0.<hex>p-1022` when subnormal),
/// dropping trailing zero hex digits.
pub fn format_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_owned();
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = v.to_bits();
    let biased = ((bits >> MANTISSA_BITS) & 0x7ff) as i32;
    let mantissa = bits & MANTISSA_MASK;
    if biased == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - 1023) };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{exp:+}")
    }
}

/// Parses hexadecimal float text. Values that cannot be represented exactly
/// as an `f64` are rejected rather than rounded.
pub fn parse_hex(text: &str) -> Result<f64> {
    let bad = |why: &str| Error::format(format!("bad hex float {text:?}: {why}"));
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let signed = |v: f64| if negative { -v } else { v };
    match body {
        "inf" => return Ok(signed(f64::INFINITY)),
        "nan" if !negative => return Ok(f64::NAN),
        _ => {}
    }
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(|| bad("missing 0x prefix"))?;
    let (digits, exp) = body
        .split_once(['p', 'P'])
        .ok_or_else(|| bad("missing binary exponent"))?;
    let exp_digits = exp.strip_prefix(['+', '-']).unwrap_or(exp);
    if exp_digits.is_empty() || !exp_digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad("malformed exponent"));
    }
    let exp: i64 = exp.parse().map_err(|_| bad("exponent out of range"))?;

    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no mantissa digits"));
    }
    let mut mantissa: u128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(16).ok_or_else(|| bad("non-hex digit"))?;
        if mantissa >> 120 != 0 {
            return Err(bad("too many mantissa digits"));
        }
        mantissa = (mantissa << 4) | u128::from(d);
    }
    let mut exp = exp - 4 * frac_part.len() as i64;
    if mantissa == 0 {
        return Ok(signed(0.0));
    }
    let tz = mantissa.trailing_zeros();
    mantissa >>= tz;
    exp += i64::from(tz);

    let width = 128 - i64::from(mantissa.leading_zeros());
    let top = exp + width - 1;
    if top > 1023 {
        return Err(bad("overflows f64"));
    }
    let bits = if top >= -1022 {
        if width - 1 > i64::from(MANTISSA_BITS) {
            return Err(bad("not exactly representable"));
        }
        let frac = ((mantissa << (i64::from(MANTISSA_BITS) - (width - 1))) as u64) & MANTISSA_MASK;
        (((top + 1023) as u64) << MANTISSA_BITS) | frac
    } else {
        if exp < -1074 {
            return Err(bad("not exactly representable"));
        }
        (mantissa << (exp + 1074)) as u64
    };
    Ok(signed(f64::from_bits(bits)))
}
