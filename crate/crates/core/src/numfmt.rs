//! Round-trip-exact number formatting and serde helpers for values that may be
//! infinite (the truncation level and the budget of a noiseless run).

use serde::{de, Deserialize, Deserializer, Serializer};

/// 17 significant digits in scientific notation; parses back to the same bits.
pub(crate) fn exact(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        ext_to_string(v)
    }
}

fn ext_to_string(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub(crate) fn parse_ext(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        other => other.parse().ok(),
    }
}

/// Finite values as JSON numbers, infinities as the strings `"inf"`/`"-inf"`.
pub(crate) mod ext_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&ext_to_string(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => parse_ext(&s)
                .ok_or_else(|| de::Error::custom(format!("not a number: {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(exact(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(parse_ext(&exact(f64::INFINITY)), Some(f64::INFINITY));
    }
}
