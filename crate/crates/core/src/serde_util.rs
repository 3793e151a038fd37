//! Serde helpers: big integers travel as decimal strings in every JSON
//! document this crate emits, so values survive readers without 128-bit
//! (or arbitrary-precision) number support.

use num_bigint::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};
use std::collections::BTreeMap;
use std::str::FromStr;

pub mod dec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let raw = String::deserialize(d)?;
        BigInt::from_str(&raw).map_err(|_| D::Error::custom(format!("invalid integer `{raw}`")))
    }
}

pub mod dec_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|x| BigInt::from_str(x).map_err(|_| D::Error::custom(format!("invalid integer `{x}`"))))
            .collect()
    }
}

/// `BTreeMap<BigInt, BigInt>` keyed and valued by decimal strings.
pub mod dec_map {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BTreeMap<BigInt, BigInt>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(v.iter().map(|(k, x)| (k.to_string(), x.to_string())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<BigInt, BigInt>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (k, x) in raw {
            let key = BigInt::from_str(&k)
                .map_err(|_| D::Error::custom(format!("invalid integer key `{k}`")))?;
            let val = BigInt::from_str(&x)
                .map_err(|_| D::Error::custom(format!("invalid integer `{x}`")))?;
            out.insert(key, val);
        }
        Ok(out)
    }
}

/// `BTreeMap<usize, BigInt>` as `{"index": "value", ...}`.
pub mod sparse {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BTreeMap<usize, BigInt>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(v.iter().map(|(k, x)| (k.to_string(), x.to_string())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, BigInt>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (k, x) in raw {
            let key: usize = k
                .parse()
                .map_err(|_| D::Error::custom(format!("invalid column index `{k}`")))?;
            let val = BigInt::from_str(&x)
                .map_err(|_| D::Error::custom(format!("invalid integer `{x}`")))?;
            out.insert(key, val);
        }
        Ok(out)
    }
}

/// `Vec<(usize, BigInt)>` as `[[index, "coefficient"], ...]`.
pub mod dec_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[(usize, BigInt)], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|(i, c)| (*i, c.to_string())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, BigInt)>, D::Error> {
        let raw = Vec::<(usize, String)>::deserialize(d)?;
        raw.into_iter()
            .map(|(i, c)| {
                BigInt::from_str(&c)
                    .map(|c| (i, c))
                    .map_err(|_| D::Error::custom(format!("invalid integer `{c}`")))
            })
            .collect()
    }
}
