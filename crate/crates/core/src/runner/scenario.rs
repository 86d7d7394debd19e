use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{FlowError, Result};
use crate::flow_solver::{InitialData, RunOptions};
use crate::speed_calculus::Speed;

/// One diagnostic with its `key=value` parameters, written
/// `name:key=value:key=value`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

pub const DIAGNOSTICS: &[&str] = &[
    "type1",
    "extinction",
    "envelope",
    "umbilicity",
    "inner-ball",
    "lower-speed",
    "interior",
    "sphere-error",
    "certify",
    "barrier",
];

impl DiagnosticSpec {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or("").trim().to_string();
        if !DIAGNOSTICS.contains(&name.as_str()) {
            return Err(format!("unknown diagnostic `{name}`"));
        }
        let mut params = BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| format!("diagnostic parameter `{p}` is not key=value"))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { name, params })
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        self.params
            .get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    FlowError::Domain(format!("{}: parameter {key} = `{v}` is not a number", self.name))
                })
            })
            .transpose()
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }
}

impl std::fmt::Display for DiagnosticSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, v) in &self.params {
            write!(f, ":{k}={v}")?;
        }
        Ok(())
    }
}

/// A parsed scenario file: one `key = value` per line, `#` comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub speed: String,
    pub n: usize,
    pub initial: InitialData,
    pub grid: usize,
    pub options: RunOptions,
    pub diagnostics: Vec<DiagnosticSpec>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "speed",
    "initial",
    "solver.n",
    "solver.grid",
    "solver.cfl",
    "solver.stop_radius",
    "solver.stride",
    "solver.max_steps",
    "diagnostics",
    "output.dir",
    "seed",
];

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> FlowError {
    FlowError::Parse {
        line,
        column,
        message: message.into(),
    }
}

impl Scenario {
    /// Parses scenario text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, (String, usize, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                let col = content.len() - content.trim_start().len() + 1;
                return Err(parse_err(line, col, "expected `key = value`"));
            };
            let key = content[..eq].trim();
            let key_col = content.len() - content.trim_start().len() + 1;
            if !KEYS.contains(&key) {
                return Err(parse_err(line, key_col, format!("unknown key `{key}`")));
            }
            let rest = &content[eq + 1..];
            let value_col = eq + 2 + (rest.len() - rest.trim_start().len());
            if entries.contains_key(key) {
                return Err(parse_err(line, key_col, format!("duplicate key `{key}`")));
            }
            entries.insert(key.to_string(), (rest.trim().to_string(), line, value_col));
        }
        Self::from_entries(&entries, base)
    }

    /// Reads and parses a scenario file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Rebuilds a scenario from the canonical map stored in a manifest.
    pub fn from_map(map: &BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let entries = map
            .iter()
            .enumerate()
            .map(|(i, (k, v))| (k.clone(), (v.clone(), i + 1, k.len() + 4)))
            .collect();
        Self::from_entries(&entries, base)
    }

    fn from_entries(entries: &BTreeMap<String, (String, usize, usize)>, base: &Path) -> Result<Self> {
        let get = |k: &str| entries.get(k);
        let required = |k: &str| {
            get(k).ok_or_else(|| parse_err(entries.len() + 1, 1, format!("missing key `{k}`")))
        };
        fn num<V: std::str::FromStr>(e: &(String, usize, usize), what: &str) -> Result<V> {
            e.0.parse::<V>()
                .map_err(|_| parse_err(e.1, e.2, format!("expected {what}, got `{}`", e.0)))
        }

        let n_entry = required("solver.n")?;
        let n: usize = num(n_entry, "a dimension")?;
        if n == 0 {
            return Err(parse_err(n_entry.1, n_entry.2, "dimension must be positive"));
        }
        let speed_entry = required("speed")?;
        Speed::<f64>::from_id(&speed_entry.0, n)
            .map_err(|e| parse_err(speed_entry.1, speed_entry.2, e.to_string()))?;
        let init_entry = required("initial")?;
        let mut initial: InitialData = init_entry
            .0
            .parse()
            .map_err(|e: FlowError| parse_err(init_entry.1, init_entry.2, e.to_string()))?;
        if let InitialData::SupportFile(p) = &initial {
            if p.is_relative() {
                initial = InitialData::SupportFile(base.join(p));
            }
        }
        let defaults = RunOptions::default();
        let mut options = defaults;
        let grid = match get("solver.grid") {
            Some(e) => num(e, "a grid size")?,
            None => 256,
        };
        if grid < 8 {
            let line = get("solver.grid").map_or(1, |e| e.1);
            return Err(parse_err(line, 1, "solver.grid must be at least 8"));
        }
        if let Some(e) = get("solver.cfl") {
            options.cfl = num(e, "a number")?;
            if !(options.cfl > 0.0) {
                return Err(parse_err(e.1, e.2, "solver.cfl must be positive"));
            }
        }
        if let Some(e) = get("solver.stop_radius") {
            options.stop_radius = num(e, "a number")?;
        }
        if let Some(e) = get("solver.stride") {
            options.stride = num(e, "an integer")?;
        }
        if let Some(e) = get("solver.max_steps") {
            options.max_steps = num(e, "an integer")?;
        }
        let mut diagnostics = Vec::new();
        if let Some(e) = get("diagnostics") {
            for item in e.0.split(',').filter(|s| !s.trim().is_empty()) {
                let col = e.2 + e.0.find(item.trim()).unwrap_or(0);
                diagnostics.push(DiagnosticSpec::parse(item).map_err(|m| parse_err(e.1, col, m))?);
            }
        }
        let output_dir = match get("output.dir") {
            Some(e) => base.join(&e.0),
            None => base.join("out"),
        };
        let seed = match get("seed") {
            Some(e) => num(e, "an integer seed")?,
            None => 0,
        };
        Ok(Self {
            speed: speed_entry.0.clone(),
            n,
            initial,
            grid,
            options,
            diagnostics,
            output_dir,
            seed,
        })
    }

    /// Every key with defaults filled in, as stored in manifests.
    pub fn canonical_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let o = &self.options;
        m.insert("speed".into(), self.speed.clone());
        m.insert("initial".into(), self.initial.to_string());
        m.insert("solver.n".into(), self.n.to_string());
        m.insert("solver.grid".into(), self.grid.to_string());
        m.insert("solver.cfl".into(), format!("{:?}", o.cfl));
        m.insert("solver.stop_radius".into(), format!("{:?}", o.stop_radius));
        m.insert("solver.stride".into(), o.stride.to_string());
        m.insert("solver.max_steps".into(), o.max_steps.to_string());
        let diags: Vec<String> = self.diagnostics.iter().map(|d| d.to_string()).collect();
        m.insert("diagnostics".into(), diags.join(", "));
        m.insert("seed".into(), self.seed.to_string());
        m
    }

    /// Hex SHA-256 of the canonical map (output directory excluded).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical_map() {
            hasher.update(format!("{k} = {v}\n").as_bytes());
        }
        format!("{:x}", hasher.finalize())
    }

    pub fn speed_fn(&self) -> Result<Speed<f64>> {
        Speed::from_id(&self.speed, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# unit sphere\nspeed = mean\ninitial = sphere:1\nsolver.n = 2\nsolver.grid = 64\ndiagnostics = type1, envelope:k=2\n";

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::parse(SAMPLE, Path::new("/tmp")).unwrap();
        assert_eq!(s.grid, 64);
        assert_eq!(s.diagnostics[1].number("k").unwrap(), Some(2.0));
        let back = Scenario::from_map(&s.canonical_map(), Path::new("/tmp")).unwrap();
        assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn reports_line_and_column() {
        let err = Scenario::parse("speed = mean\n  bogus = 3\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, FlowError::Parse { line: 2, column: 3, .. }), "{err}");
        let err = Scenario::parse("speed = mean\nsolver.n = x\ninitial = sphere:1\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, FlowError::Parse { line: 2, column: 12, .. }), "{err}");
    }
}
