//! Pipeline parameters and their flat `key = value` text form.

use std::fmt::Write as _;

use crate::error::{FdbError, Result};
use crate::filterbank::{BandpassSpec, DirectionalSpec};
use crate::segmentation::MorphologySpec;

/// All tunables of the segmentation pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdbParams {
    /// Relative shrinkage / binarization threshold.
    pub c: f64,
    /// Order of the directional Hilbert transform.
    pub n: u32,
    /// Number of directions.
    pub l: usize,
    /// Butterworth order.
    pub gamma: u32,
    /// Block side of the vote morphology.
    pub s: usize,
    /// Block count threshold divisor (`s²/t`).
    pub t: f64,
    /// Required number of passing blocks.
    pub b: usize,
    pub omega_low: f64,
    pub omega_high: f64,
    pub pad_margin: usize,
}

impl Default for FdbParams {
    fn default() -> Self {
        Self {
            c: 0.06,
            n: 20,
            l: 16,
            gamma: 1,
            s: 9,
            t: 5.0,
            b: 6,
            omega_low: 0.3,
            omega_high: 1.0,
            pad_margin: 15,
        }
    }
}

/// Learned `(C, γ, t)` per FVC database (year, db number 1..=4).
type TrainedRow = ((u32, u32), (f64, u32, f64));

const TRAINED: [TrainedRow; 12] = [
    ((2000, 1), (0.06, 4, 5.0)),
    ((2000, 2), (0.07, 2, 5.0)),
    ((2000, 3), (0.06, 4, 4.0)),
    ((2000, 4), (0.03, 1, 5.0)),
    ((2002, 1), (0.04, 1, 4.0)),
    ((2002, 2), (0.05, 1, 7.0)),
    ((2002, 3), (0.09, 1, 5.0)),
    ((2002, 4), (0.03, 1, 6.0)),
    ((2004, 1), (0.04, 1, 7.0)),
    ((2004, 2), (0.08, 2, 5.0)),
    ((2004, 3), (0.07, 1, 6.0)),
    ((2004, 4), (0.05, 1, 5.0)),
];

/// Keys accepted in a parameter file, in serialization order.
pub const PARAM_KEYS: [&str; 10] = [
    "C", "n", "L", "gamma", "s", "t", "b", "omega_low", "omega_high", "pad_margin",
];

impl FdbParams {
    /// Published parameters for an FVC database, e.g. `for_database(2004, 2)`.
    pub fn for_database(year: u32, db: u32) -> Option<Self> {
        TRAINED
            .iter()
            .find(|(key, _)| *key == (year, db))
            .map(|&(_, (c, gamma, t))| Self {
                c,
                gamma,
                t,
                ..Self::default()
            })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(FdbError::invalid("C", format!("must be finite and >= 0, got {}", self.c)));
        }
        self.bandpass()?;
        self.directional()?;
        self.morphology()?;
        Ok(())
    }

    pub fn bandpass(&self) -> Result<BandpassSpec> {
        BandpassSpec::new(self.omega_low, self.omega_high, self.gamma)
    }

    pub fn directional(&self) -> Result<DirectionalSpec> {
        DirectionalSpec::new(self.l, self.n)
    }

    pub fn morphology(&self) -> Result<MorphologySpec> {
        MorphologySpec::new(self.s, self.t, self.b)
    }

    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(name: &'static str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| FdbError::invalid(name, format!("cannot parse `{v}`")))
        }
        match key {
            "C" => self.c = parse("C", value)?,
            "n" => self.n = parse("n", value)?,
            "L" => self.l = parse("L", value)?,
            "gamma" => self.gamma = parse("gamma", value)?,
            "s" => self.s = parse("s", value)?,
            "t" => self.t = parse("t", value)?,
            "b" => self.b = parse("b", value)?,
            "omega_low" => self.omega_low = parse("omega_low", value)?,
            "omega_high" => self.omega_high = parse("omega_high", value)?,
            "pad_margin" => self.pad_margin = parse("pad_margin", value)?,
            _ => {
                return Err(FdbError::Config {
                    line: 0,
                    reason: format!("unknown parameter `{key}`"),
                })
            }
        }
        Ok(())
    }

    /// Serializes to the flat config format; [`parse_config`] reads it back.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "C = {}", self.c);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "L = {}", self.l);
        let _ = writeln!(out, "gamma = {}", self.gamma);
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(out, "t = {}", self.t);
        let _ = writeln!(out, "b = {}", self.b);
        let _ = writeln!(out, "omega_low = {}", self.omega_low);
        let _ = writeln!(out, "omega_high = {}", self.omega_high);
        let _ = writeln!(out, "pad_margin = {}", self.pad_margin);
        out
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| FdbError::Config {
            line: i + 1,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(FdbError::Config {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = FdbParams::default();
        p.validate().unwrap();
        assert_eq!((p.n, p.l, p.s, p.b, p.pad_margin), (20, 16, 9, 6, 15));
        assert_eq!((p.omega_low, p.omega_high), (0.3, 1.0));
    }

    #[test]
    fn trained_presets() {
        let p = FdbParams::for_database(2000, 1).unwrap();
        assert_eq!((p.c, p.gamma, p.t), (0.06, 4, 5.0));
        let p = FdbParams::for_database(2004, 2).unwrap();
        assert_eq!((p.c, p.gamma, p.t), (0.08, 2, 5.0));
        assert!(FdbParams::for_database(2006, 1).is_none());
        for year in [2000, 2002, 2004] {
            for db in 1..=4 {
                FdbParams::for_database(year, db).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn config_roundtrip() {
        let p = FdbParams::for_database(2002, 2).unwrap();
        let mut q = FdbParams::default();
        for (k, v) in parse_config(&p.to_config_string()).unwrap() {
            q.set(&k, &v).unwrap();
        }
        assert_eq!(p, q);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(parse_config("C 0.1"), Err(FdbError::Config { line: 1, .. })));
        let pairs = parse_config("# header\n\nC = 0.2 # trailing\n").unwrap();
        assert_eq!(pairs, vec![("C".to_string(), "0.2".to_string())]);
        let mut p = FdbParams::default();
        assert!(p.set("bogus", "1").is_err());
        assert!(p.set("gamma", "two").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            FdbParams { c: -0.1, ..Default::default() },
            FdbParams { gamma: 0, ..Default::default() },
            FdbParams { omega_low: 1.5, ..Default::default() },
            FdbParams { s: 8, ..Default::default() },
            FdbParams { b: 10, ..Default::default() },
            FdbParams { t: 0.0, ..Default::default() },
            FdbParams { l: 0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
