//! Serde for Lebesgue exponents: numbers, or the string `"inf"` for `p = ∞`.

use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub fn label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{}", p)
    }
}

pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

pub fn parse(text: &str) -> Option<f64> {
    match text.trim() {
        "inf" | "infinity" | "∞" => Some(f64::INFINITY),
        t => t.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

struct PVisitor;

impl<'de> Visitor<'de> for PVisitor {
    type Value = f64;
    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("a number or \"inf\"")
    }
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }
    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse(v).ok_or_else(|| E::custom(format!("invalid exponent {:?}", v)))
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(PVisitor)
}

/// For `Vec<f64>` fields.
pub mod list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct P(#[serde(with = "super")] f64);

    pub fn serialize<S: Serializer>(ps: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(ps.iter().map(|&p| P(p)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<P>::deserialize(d)?.into_iter().map(|p| p.0).collect())
    }
}
