//! Hexadecimal float text (`0x1.8p+1`) for bit-exact round trips.

use crate::error::{Error, Result};

pub fn to_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{exp:+}")
    }
}

pub fn from_hex(s: &str) -> Result<f64> {
    let err = || Error::Parse(format!("not a hex float: {s:?}"));
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x").ok_or_else(err)?;
    let (mant_s, exp_s) = rest.split_once('p').ok_or_else(err)?;
    let exp: i64 = exp_s.parse().map_err(|_| err())?;
    let (lead_s, frac_s) = mant_s.split_once('.').unwrap_or((mant_s, ""));
    let lead: u64 = lead_s.parse().map_err(|_| err())?;
    if lead > 1 || frac_s.len() > 13 {
        return Err(err());
    }
    let frac = if frac_s.is_empty() {
        0
    } else {
        u64::from_str_radix(frac_s, 16).map_err(|_| err())? << (4 * (13 - frac_s.len()))
    };
    let bits = if lead == 0 {
        if frac != 0 && exp != -1022 {
            return Err(err());
        }
        frac
    } else {
        let e = exp + 1023;
        if !(1..=2046).contains(&e) {
            return Err(err());
        }
        ((e as u64) << 52) | frac
    };
    let v = f64::from_bits(bits);
    Ok(if neg { -v } else { v })
}

/// Serde adapters writing `f64` values as hex strings.
pub mod serde_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_hex(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        super::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(to_hex(std::f64::consts::PI), "0x1.921fb54442d18p+1");
        assert_eq!(to_hex(1.0), "0x1p+0");
        assert_eq!(to_hex(-0.5), "-0x1p-1");
        assert_eq!(from_hex("0x1.8p+1").unwrap(), 3.0);
    }

    proptest! {
        #[test]
        fn round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            let back = from_hex(&to_hex(x)).unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), x.to_bits());
            }
        }
    }
}
