//! Run configuration: defaults, a key=value or JSON file, then flag overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use cmv_core::coeffs::{
    extend_two_sided, make_constant, make_explicit, make_sturmian, Support, VerblunskySequence,
    GOLDEN_FREQUENCY,
};
use cmv_core::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Constant,
    Sturmian,
    Explicit,
}

impl FromStr for ModelKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(ModelKind::Constant),
            "sturmian" | "fibonacci" => Ok(ModelKind::Sturmian),
            "explicit" => Ok(ModelKind::Explicit),
            other => bail!("unknown model '{other}' (constant | sturmian | explicit)"),
        }
    }
}

/// Complex number printed as `re+imi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cx(pub C64);

impl Serialize for Cx {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl fmt::Display for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Every parameter of a run, after defaults, file and flags are merged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Value of the constant model.
    pub constant: Cx,
    /// Sturmian letters `(alpha, beta)`; `alpha` sits where the indicator is 1.
    pub alphabet: (Cx, Cx),
    pub omega: f64,
    pub support: Support,
    /// Coefficient list for the explicit model, one `re im` or complex per line.
    pub explicit_file: Option<PathBuf>,
    pub theta_count: usize,
    pub r: Vec<f64>,
    pub eps: Vec<f64>,
    /// Trace-map level.
    pub depth: usize,
    /// Index window for coefficient output.
    pub window: usize,
    /// Walk length.
    pub steps: usize,
    pub snapshot_every: usize,
    /// Angles for the Hölder command; empty selects spectrum points.
    pub holder_theta: Vec<f64>,
    pub holder_points: usize,
    /// Longest solution used by transfer fits.
    pub l_max: usize,
    pub seed: u64,
    /// Include the soft check in `verify`.
    pub soft: bool,
    /// Check ids run by `verify`; empty runs all of them.
    pub criteria: Vec<u32>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Sturmian,
            constant: Cx(C64::new(0.0, 0.0)),
            alphabet: (Cx(C64::new(0.5, 0.0)), Cx(C64::new(-0.5, 0.0))),
            omega: GOLDEN_FREQUENCY,
            support: Support::TwoSided,
            explicit_file: None,
            theta_count: 512,
            r: vec![0.9, 0.99],
            eps: vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            depth: 10,
            window: 64,
            steps: 1000,
            snapshot_every: 100,
            holder_theta: Vec::new(),
            holder_points: 4,
            l_max: 10_000,
            seed: 7,
            soft: true,
            criteria: Vec::new(),
            out: PathBuf::from("runs"),
        }
    }
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    C64::from_str(&t).map_err(|_| anyhow!("cannot parse complex number '{s}'"))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    s.split([',', ';'])
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| anyhow!("'{p}': {e}")))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| anyhow!("{key}: cannot parse '{s}': {e}"))
}

impl RunConfig {
    /// Applies one `key = value` setting; keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "model" => self.model = v.parse()?,
            "constant" => self.constant = Cx(parse_complex(v)?),
            "alphabet" => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    bail!("alphabet needs two letters 'a,b', got '{v}'");
                }
                self.alphabet = (Cx(parse_complex(parts[0])?), Cx(parse_complex(parts[1])?));
            }
            "omega" => self.omega = parse_num(&key, v)?,
            "support" => {
                self.support = match v.to_ascii_lowercase().replace('_', "-").as_str() {
                    "one-sided" => Support::OneSided,
                    "two-sided" => Support::TwoSided,
                    other => bail!("support must be one-sided or two-sided, got '{other}'"),
                }
            }
            "explicit_file" => self.explicit_file = Some(PathBuf::from(v)),
            "theta_count" => self.theta_count = parse_num(&key, v)?,
            "r" => self.r = parse_list(v)?,
            "eps" => self.eps = parse_list(v)?,
            "depth" => self.depth = parse_num(&key, v)?,
            "window" => self.window = parse_num(&key, v)?,
            "steps" => self.steps = parse_num(&key, v)?,
            "snapshot_every" => self.snapshot_every = parse_num(&key, v)?,
            "holder_theta" => self.holder_theta = parse_list(v)?,
            "holder_points" => self.holder_points = parse_num(&key, v)?,
            "l_max" => self.l_max = parse_num(&key, v)?,
            "seed" => self.seed = parse_num(&key, v)?,
            "soft" => self.soft = parse_num(&key, v)?,
            "criteria" => self.criteria = parse_list(v)?,
            "out" => self.out = PathBuf::from(v),
            other => bail!("unknown configuration key '{other}'"),
        }
        Ok(())
    }

    /// Reads settings from a file: a JSON object, or `key = value` lines with
    /// `#` comments.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (k, v) in parse_settings(&text)? {
            self.set(&k, &v).with_context(|| format!("in {}", path.display()))?;
        }
        Ok(())
    }

    /// Checks every parameter against the preconditions of the numerical code.
    pub fn validate(&self) -> Result<()> {
        let in_disk = |name: &str, a: C64| -> Result<()> {
            if !(a.norm() < 1.0) {
                bail!("{name} = {a} must lie in the open unit disk");
            }
            Ok(())
        };
        in_disk("constant", self.constant.0)?;
        in_disk("alphabet letter a", self.alphabet.0 .0)?;
        in_disk("alphabet letter b", self.alphabet.1 .0)?;
        if !(self.omega > 0.0 && self.omega < 1.0) {
            bail!("omega = {} must lie in (0, 1)", self.omega);
        }
        if self.model == ModelKind::Explicit && self.explicit_file.is_none() {
            bail!("the explicit model needs explicit_file");
        }
        if self.theta_count < 8 {
            bail!("theta_count = {} must be at least 8", self.theta_count);
        }
        for &r in &self.r {
            if !(r > 0.0 && r < 1.0) {
                bail!("r = {r} must lie in (0, 1)");
            }
        }
        for &e in &self.eps {
            if !(e > 0.0 && e < 1.0) {
                bail!("eps = {e} must lie in (0, 1)");
            }
        }
        if !(1..=40).contains(&self.depth) {
            bail!("depth = {} must lie in 1 ..= 40", self.depth);
        }
        if self.window == 0 {
            bail!("window must be positive");
        }
        if self.snapshot_every == 0 {
            bail!("snapshot_every must be positive");
        }
        let known = cmv_core::verify::criterion_ids();
        if let Some(id) = self.criteria.iter().find(|id| !known.contains(id)) {
            bail!("unknown criterion {id}; ids are 1 ..= {}", known.len());
        }
        if self.l_max < 100 {
            bail!("l_max = {} must be at least 100", self.l_max);
        }
        Ok(())
    }

    pub fn alphabet_pair(&self) -> (C64, C64) {
        (self.alphabet.0 .0, self.alphabet.1 .0)
    }

    /// Letters of the trace map: the Sturmian alphabet, or the constant twice.
    pub fn trace_alphabet(&self) -> (C64, C64) {
        match self.model {
            ModelKind::Constant => (self.constant.0, self.constant.0),
            _ => self.alphabet_pair(),
        }
    }

    /// The configured sequence with the configured support.
    pub fn sequence(&self) -> Result<VerblunskySequence> {
        self.sequence_with(self.support)
    }

    pub fn sequence_with(&self, support: Support) -> Result<VerblunskySequence> {
        Ok(match self.model {
            ModelKind::Constant => make_constant(self.constant.0, support)?,
            ModelKind::Sturmian => {
                let (a, b) = self.alphabet_pair();
                make_sturmian(a, b, self.omega, support)?
            }
            ModelKind::Explicit => {
                let path = self.explicit_file.as_ref().expect("validated");
                let right = make_explicit(read_coefficients(path)?)?;
                match support {
                    Support::OneSided => right,
                    Support::TwoSided => {
                        extend_two_sided(right, make_constant(C64::new(0.0, 0.0), Support::OneSided)?)?
                    }
                }
            }
        })
    }
}

/// Splits a config file into ordered `(key, value)` pairs.
pub fn parse_settings(text: &str) -> Result<Vec<(String, String)>> {
    if text.trim_start().starts_with('{') {
        let map: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(text).context("parsing JSON config")?;
        return map
            .into_iter()
            .map(|(k, v)| Ok((k, json_scalar(&v)?)))
            .collect();
    }
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn json_scalar(v: &serde_json::Value) -> Result<String> {
    use serde_json::Value;
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items
            .iter()
            .map(json_scalar)
            .collect::<Result<Vec<_>>>()?
            .join(","),
        other => bail!("unsupported JSON value {other}"),
    })
}

/// One coefficient per line: `re im`, `re,im`, or a complex literal.
pub fn read_coefficients(path: &Path) -> Result<Vec<C64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading coefficients {}", path.display()))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let parts: Vec<&str> = l.split([' ', '\t', ',']).filter(|p| !p.is_empty()).collect();
            match parts.as_slice() {
                [re, im] => Ok(C64::new(parse_num("re", re)?, parse_num("im", im)?)),
                [one] => parse_complex(one),
                _ => bail!("cannot parse coefficient line '{l}'"),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = "model = sturmian\nalphabet = 0.3, -0.2+0.1i  # letters\nr = 0.9,0.95\ndepth=8\n";
        let json = r#"{"model": "sturmian", "alphabet": "0.3,-0.2+0.1i", "r": [0.9, 0.95], "depth": 8}"#;
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        for (k, v) in parse_settings(kv).unwrap() {
            a.set(&k, &v).unwrap();
        }
        for (k, v) in parse_settings(json).unwrap() {
            b.set(&k, &v).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(a.alphabet.1 .0, C64::new(-0.2, 0.1));
        assert_eq!(a.r, vec![0.9, 0.95]);
        assert_eq!(a.depth, 8);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = RunConfig::default();
        c.set("constant", "1.2").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("r", "0.5, 1.0").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("r = 1"));
        let mut c = RunConfig::default();
        assert!(c.set("nonsense", "1").is_err());
        assert!(c.set("alphabet", "0.1").is_err());
        c.set("model", "explicit").unwrap();
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex(" -0.2 + 0.1i").unwrap(), C64::new(-0.2, 0.1));
        assert!(parse_complex("abc").is_err());
    }
}
