//! Run configuration and its plain-text `key = value` form.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use alsharp_core::{Ablation, EqOracle, WpParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleKind {
    #[default]
    Wp,
    Perfect,
}

impl FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wp" | "random-wp" => Ok(OracleKind::Wp),
            "perfect" => Ok(OracleKind::Perfect),
            _ => Err(format!("unknown oracle `{s}` (expected wp or perfect)")),
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Wp => "wp",
            OracleKind::Perfect => "perfect",
        })
    }
}

/// Seeds as an explicit list; `a..b` in text expands to a half-open range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

impl Seeds {
    pub fn count(n: u64) -> Self {
        Seeds((0..n).collect())
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds(vec![0])
    }
}

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: u64 = a.trim().parse().map_err(|e| format!("`{part}`: {e}"))?;
                let b: u64 = b.trim().parse().map_err(|e| format!("`{part}`: {e}"))?;
                out.extend(a..b);
            } else {
                out.push(part.parse().map_err(|e| format!("`{part}`: {e}"))?);
            }
        }
        if out.is_empty() {
            return Err("no seeds".into());
        }
        Ok(Seeds(out))
    }
}

impl fmt::Display for Seeds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // contiguous runs print as ranges
        let mut parts = Vec::new();
        let mut k = 0;
        while k < self.0.len() {
            let start = self.0[k];
            let mut end = k;
            while end + 1 < self.0.len() && self.0[end + 1] == self.0[end].wrapping_add(1) {
                end += 1;
            }
            if end > k {
                parts.push(format!("{}..{}", start, self.0[end] + 1));
            } else {
                parts.push(start.to_string());
            }
            k = end + 1;
        }
        f.write_str(&parts.join(","))
    }
}

/// Everything one `learn` invocation needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub sul: PathBuf,
    pub refs: Vec<PathBuf>,
    pub algorithm: Ablation,
    pub oracle: OracleKind,
    pub minimal_size: usize,
    pub random_length: usize,
    /// Tests per equivalence query; `None` runs until a counterexample.
    pub bound: Option<u64>,
    pub seeds: Seeds,
    pub input_order: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub verbosity: u8,
}

impl RunConfig {
    pub fn new(sul: impl Into<PathBuf>) -> Self {
        let wp = WpParams::default();
        RunConfig {
            sul: sul.into(),
            refs: Vec::new(),
            algorithm: Ablation::Full,
            oracle: OracleKind::Wp,
            minimal_size: wp.minimal_size,
            random_length: wp.random_length,
            bound: wp.bound,
            seeds: Seeds::default(),
            input_order: None,
            output: None,
            verbosity: 0,
        }
    }

    /// The teacher's equivalence oracle for one seed.
    pub fn eq_oracle(&self, seed: u64) -> EqOracle {
        match self.oracle {
            OracleKind::Perfect => EqOracle::Perfect,
            OracleKind::Wp => EqOracle::RandomWp(WpParams {
                minimal_size: self.minimal_size,
                random_length: self.random_length,
                bound: self.bound,
                seed,
            }),
        }
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[String]| v.join(",");
        let mut lines = vec![
            format!("sul = {}", self.sul.display()),
            format!(
                "refs = {}",
                list(&self.refs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
            ),
            format!("algorithm = {}", self.algorithm),
            format!("oracle = {}", self.oracle),
            format!("minimal_size = {}", self.minimal_size),
            format!("random_length = {}", self.random_length),
            format!("bound = {}", self.bound.map_or("none".to_string(), |b| b.to_string())),
            format!("seeds = {}", self.seeds),
        ];
        if let Some(order) = &self.input_order {
            lines.push(format!("input_order = {}", list(order)));
        }
        if let Some(out) = &self.output {
            lines.push(format!("output = {}", out.display()));
        }
        lines.push(format!("verbosity = {}", self.verbosity));
        lines.join("\n") + "\n"
    }

    /// Parses the text form. Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::new("");
        let mut have_sul = false;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Malformed { line })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|e| match e {
                SetError::Unknown => ConfigError::UnknownKey { line, key: key.into() },
                SetError::Bad(msg) => ConfigError::BadValue { line, key: key.into(), msg },
            })?;
            have_sul |= key == "sul";
        }
        if !have_sul {
            return Err(ConfigError::Missing("sul"));
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        let bad = |e: &dyn fmt::Display| SetError::Bad(e.to_string());
        let items = |v: &str| -> Vec<String> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
        };
        match key {
            "sul" => self.sul = value.into(),
            "refs" => self.refs = items(value).into_iter().map(PathBuf::from).collect(),
            "algorithm" => self.algorithm = value.parse().map_err(|e: String| bad(&e))?,
            "oracle" => self.oracle = value.parse().map_err(|e: String| bad(&e))?,
            "minimal_size" => self.minimal_size = value.parse().map_err(|e| bad(&e))?,
            "random_length" => self.random_length = value.parse().map_err(|e| bad(&e))?,
            "bound" => {
                self.bound = match value {
                    "none" | "" => None,
                    v => Some(v.parse().map_err(|e| bad(&e))?),
                }
            }
            "seeds" => self.seeds = value.parse().map_err(|e: String| bad(&e))?,
            "input_order" => self.input_order = Some(items(value)),
            "output" => self.output = Some(value.into()),
            "verbosity" => self.verbosity = value.parse().map_err(|e| bad(&e))?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }
}

enum SetError {
    Unknown,
    Bad(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_text() {
        let s: Seeds = "0..3, 7, 9..11".parse().unwrap();
        assert_eq!(s.0, vec![0, 1, 2, 7, 9, 10]);
        assert_eq!(s.to_string(), "0..3,7,9..11");
        assert!("x".parse::<Seeds>().is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::new("models/sul.dot");
        c.refs = vec!["a.dot".into(), "b.dot".into()];
        c.algorithm = Ablation::RExact;
        c.oracle = OracleKind::Perfect;
        c.bound = Some(500);
        c.seeds = Seeds::count(30);
        c.input_order = Some(vec!["b".into(), "a".into()]);
        c.output = Some("out.csv".into());
        c.verbosity = 2;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        let d = RunConfig::new("x.dot");
        assert_eq!(RunConfig::from_text(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn text_errors() {
        assert_eq!(RunConfig::from_text("refs = a.dot\n"), Err(ConfigError::Missing("sul")));
        assert_eq!(
            RunConfig::from_text("sul = a\nfoo = 1\n"),
            Err(ConfigError::UnknownKey { line: 2, key: "foo".into() })
        );
        assert!(matches!(
            RunConfig::from_text("sul = a\nalgorithm = nope"),
            Err(ConfigError::BadValue { line: 2, .. })
        ));
        assert_eq!(RunConfig::from_text("sul a"), Err(ConfigError::Malformed { line: 1 }));
    }
}
