//! JSON output with 17 significant digits per number.

use std::io;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Compact formatter writing every float as `d.dddddddddddddddde±x`.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser).expect("in-memory JSON serialization cannot fail");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

/// A nonnegative extended real: a number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ext(pub f64);

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ext(v)),
            Raw::Text(t) if t == "inf" => Ok(Ext(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip_bits() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, 5e-324, f64::MAX, 0.0, 2.0f64.sqrt()] {
            let s = to_string(&v);
            assert_eq!(s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count(), 17, "{s}");
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn infinity_is_a_string() {
        assert_eq!(to_string(&Ext(f64::INFINITY)), "\"inf\"");
        let back: Ext = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, Ext(f64::INFINITY));
        assert!(serde_json::from_str::<Ext>("\"nan\"").is_err());
        let v: Ext = serde_json::from_str(&to_string(&Ext(0.25))).unwrap();
        assert_eq!(v.0, 0.25);
    }
}
