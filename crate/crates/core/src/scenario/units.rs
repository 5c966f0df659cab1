//! Unit-carrying numbers for scenario files.
//!
//! A frequency is written as a bare number in MHz or as a string with an
//! explicit unit (`"0.25 rad/ns"`, `"2 MHz"`); a time as a bare number in μs,
//! `"inf"`, or a string with unit (`"750 ns"`, `"10 us"`). On output the
//! human unit is used whenever it converts back to the exact same value, and
//! the internal unit otherwise, so echoed files reproduce runs bit for bit.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::protocol::{mhz_to_rad_per_ns, rad_per_ns_to_mhz};

/// Angular frequency stored in rad/ns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Freq(pub f64);

/// Duration stored in ns; may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Time(pub f64);

impl Serialize for Freq {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mhz = rad_per_ns_to_mhz(self.0);
        if mhz_to_rad_per_ns(mhz) == self.0 {
            s.serialize_f64(mhz)
        } else {
            s.serialize_str(&format!("{:?} rad/ns", self.0))
        }
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            return s.serialize_str("inf");
        }
        let us = self.0 / 1000.0;
        if us * 1000.0 == self.0 {
            s.serialize_f64(us)
        } else {
            s.serialize_str(&format!("{:?} ns", self.0))
        }
    }
}

fn split_unit(v: &str) -> Result<(f64, &str), String> {
    let v = v.trim();
    let cut = v.find(|c: char| c.is_alphabetic() && c != 'e' && c != 'E').unwrap_or(v.len());
    let (num, unit) = v.split_at(cut);
    let x = num.trim().parse::<f64>().map_err(|e| format!("bad number `{}`: {e}", num.trim()))?;
    Ok((x, unit.trim()))
}

pub(crate) fn parse_freq(v: &str) -> Result<f64, String> {
    let (x, unit) = split_unit(v)?;
    match unit {
        "" | "MHz" | "mhz" => Ok(mhz_to_rad_per_ns(x)),
        "rad/ns" => Ok(x),
        other => Err(format!("unknown frequency unit `{other}` (use MHz or rad/ns)")),
    }
}

pub(crate) fn parse_time(v: &str) -> Result<f64, String> {
    let t = v.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    let (x, unit) = split_unit(t)?;
    match unit {
        "" | "us" | "μs" => Ok(x * 1000.0),
        "ns" => Ok(x),
        other => Err(format!("unknown time unit `{other}` (use us or ns)")),
    }
}

struct UnitVisitor {
    what: &'static str,
    from_number: fn(f64) -> f64,
    from_str: fn(&str) -> Result<f64, String>,
}

impl Visitor<'_> for UnitVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a {} as a number or a string with unit", self.what)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok((self.from_number)(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok((self.from_number)(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok((self.from_number)(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        (self.from_str)(v).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Freq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(UnitVisitor { what: "frequency", from_number: mhz_to_rad_per_ns, from_str: parse_freq }).map(Freq)
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(UnitVisitor { what: "time", from_number: |x| x * 1000.0, from_str: parse_time }).map(Time)
    }
}
