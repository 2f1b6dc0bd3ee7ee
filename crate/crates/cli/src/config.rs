//! Scenario configuration.
//!
//! Grammar (TOML subset):
//!
//! ```toml
//! name = "minus-0.8"          # optional
//!
//! [grid]
//! n = 512                     # required, power of two >= 64
//!
//! [[pole]]                   # zero or more
//! x = 0.5
//! y = 0.5
//! nu = 0.8
//! sign = "minus"              # "plus" or "minus"
//!
//! [flow]
//! t_end = 1.0                 # in (0, 1]
//! depth = 10                  # ladder t_end·2^-k, k = 0..=depth
//! levels = [4, 6, 8]          # truncation levels
//!
//! [checks]
//! names = ["all"]             # or a subset of the verify check names
//!
//! [sampling]
//! seed = 11
//!
//! [output]
//! dir = "out"
//! ```

use std::fmt;
use std::path::PathBuf;

use krflow::potentials::{check_no_cusp, validate_poles, PoleSpec, Sign};
use krflow::TorusGrid;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub poles: Vec<PoleSpec>,
    pub t_end: f64,
    pub depth: u32,
    pub levels: Vec<u32>,
    pub checks: Vec<String>,
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const SECTIONS: [&str; 6] = ["grid", "pole", "flow", "checks", "sampling", "output"];

/// 1-based line of `key` inside `[section]` (or of the section header when
/// `key` is empty); `nth` picks among repeated `[[section]]` tables.
fn locate(src: &str, section: Option<&str>, nth: usize, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut seen = 0usize;
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            if Some(name.as_str()) == section {
                if line.starts_with("[[") {
                    seen += 1;
                    if seen != nth + 1 {
                        current = None;
                        continue;
                    }
                }
                header_line = Some(i + 1);
                if key.is_empty() {
                    return header_line;
                }
            }
            current = Some(name);
            continue;
        }
        if current.as_deref() == section || (section.is_none() && current.is_none()) {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    if key.is_empty() {
        None
    } else {
        header_line
    }
}

struct Reader<'a> {
    src: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, section: Option<&str>, nth: usize, key: &str, message: String) -> ConfigError {
        ConfigError {
            line: locate(self.src, section, nth, key),
            message,
        }
    }

    fn path(section: Option<&str>, key: &str) -> String {
        match section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        }
    }

    fn get<'t>(
        &self,
        table: &'t Table,
        section: Option<&str>,
        nth: usize,
        key: &str,
        required: bool,
    ) -> Result<Option<&'t Value>, ConfigError> {
        match table.get(key) {
            Some(v) => Ok(Some(v)),
            None if required => Err(self.err(
                section,
                nth,
                "",
                format!("missing key \"{}\"", Self::path(section, key)),
            )),
            None => Ok(None),
        }
    }

    fn float(
        &self,
        v: &Value,
        section: Option<&str>,
        nth: usize,
        key: &str,
    ) -> Result<f64, ConfigError> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(self.err(
                section,
                nth,
                key,
                format!(
                    "key \"{}\" must be a number, got {}",
                    Self::path(section, key),
                    other.type_str()
                ),
            )),
        }
    }

    fn integer(
        &self,
        v: &Value,
        section: Option<&str>,
        nth: usize,
        key: &str,
    ) -> Result<u64, ConfigError> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            other => Err(self.err(
                section,
                nth,
                key,
                format!(
                    "key \"{}\" must be a non-negative integer, got {other}",
                    Self::path(section, key)
                ),
            )),
        }
    }

    fn string(
        &self,
        v: &Value,
        section: Option<&str>,
        nth: usize,
        key: &str,
    ) -> Result<String, ConfigError> {
        v.as_str().map(str::to_string).ok_or_else(|| {
            self.err(
                section,
                nth,
                key,
                format!("key \"{}\" must be a string", Self::path(section, key)),
            )
        })
    }

    fn section(&self, root: &'a Table, name: &str) -> Result<Option<&'a Table>, ConfigError> {
        match root.get(name) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(_) => Err(self.err(None, 0, name, format!("\"{name}\" must be a table"))),
        }
    }

    fn no_unknown(
        &self,
        table: &Table,
        section: Option<&str>,
        nth: usize,
        known: &[&str],
    ) -> Result<(), ConfigError> {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                return Err(self.err(
                    section,
                    nth,
                    key,
                    format!("unknown key \"{}\"", Self::path(section, key)),
                ));
            }
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let root: Table = src.parse().map_err(|e: toml::de::Error| ConfigError {
            line: e.span().map(|s| src[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        let r = Reader { src };
        let mut known = SECTIONS.to_vec();
        known.push("name");
        r.no_unknown(&root, None, 0, &known)?;

        let name = match root.get("name") {
            Some(v) => r.string(v, None, 0, "name")?,
            None => "scenario".to_string(),
        };

        let grid = r.section(&root, "grid")?.ok_or_else(|| ConfigError {
            line: None,
            message: "missing key \"grid.n\" (no [grid] section)".into(),
        })?;
        r.no_unknown(grid, Some("grid"), 0, &["n"])?;
        let nv = r.get(grid, Some("grid"), 0, "n", true)?.expect("required");
        let n = r.integer(nv, Some("grid"), 0, "n")? as usize;
        let grid_obj = TorusGrid::new(n).map_err(|e| r.err(Some("grid"), 0, "n", e.to_string()))?;

        let mut poles = Vec::new();
        match root.get("pole") {
            None => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let t = item.as_table().ok_or_else(|| {
                        r.err(Some("pole"), i, "", "each pole must be a table".into())
                    })?;
                    let s = Some("pole");
                    r.no_unknown(t, s, i, &["x", "y", "nu", "sign"])?;
                    let x = r.float(r.get(t, s, i, "x", true)?.unwrap(), s, i, "x")?;
                    let y = r.float(r.get(t, s, i, "y", true)?.unwrap(), s, i, "y")?;
                    let nu = r.float(r.get(t, s, i, "nu", true)?.unwrap(), s, i, "nu")?;
                    let sign: Sign = r
                        .string(r.get(t, s, i, "sign", true)?.unwrap(), s, i, "sign")?
                        .parse()
                        .map_err(|e: krflow::Error| r.err(s, i, "sign", e.to_string()))?;
                    if !((0.0..1.0).contains(&x) && (0.0..1.0).contains(&y)) {
                        return Err(r.err(
                            s,
                            i,
                            "x",
                            format!("pole ({x}, {y}) must lie in [0,1)²"),
                        ));
                    }
                    poles.push(PoleSpec::new(x, y, nu, sign));
                }
            }
            Some(_) => {
                return Err(r.err(
                    None,
                    0,
                    "pole",
                    "pole must be an array of tables ([[pole]])".into(),
                ))
            }
        }
        check_no_cusp(&poles).map_err(|e| r.err(Some("pole"), 0, "", e.to_string()))?;
        validate_poles(&poles, &grid_obj).map_err(|e| r.err(Some("pole"), 0, "", e.to_string()))?;

        let (mut t_end, mut depth, mut levels) = (1.0, 10u32, vec![4u32, 6, 8]);
        if let Some(flow) = r.section(&root, "flow")? {
            let s = Some("flow");
            r.no_unknown(flow, s, 0, &["t_end", "depth", "levels"])?;
            if let Some(v) = r.get(flow, s, 0, "t_end", false)? {
                t_end = r.float(v, s, 0, "t_end")?;
            }
            if let Some(v) = r.get(flow, s, 0, "depth", false)? {
                depth = r.integer(v, s, 0, "depth")? as u32;
            }
            if let Some(v) = r.get(flow, s, 0, "levels", false)? {
                let arr = v.as_array().ok_or_else(|| {
                    r.err(
                        s,
                        0,
                        "levels",
                        "key \"flow.levels\" must be an array".into(),
                    )
                })?;
                levels = arr
                    .iter()
                    .map(|x| r.integer(x, s, 0, "levels").map(|v| v as u32))
                    .collect::<Result<_, _>>()?;
            }
            if !(t_end > 0.0 && t_end <= 1.0) {
                return Err(r.err(
                    s,
                    0,
                    "t_end",
                    format!("flow.t_end = {t_end} must lie in (0, 1]"),
                ));
            }
            if depth > 20 {
                return Err(r.err(s, 0, "depth", format!("flow.depth = {depth} exceeds 20")));
            }
            if levels.is_empty() || levels.iter().any(|&l| l == 0 || l > 30) {
                return Err(r.err(
                    s,
                    0,
                    "levels",
                    "flow.levels must be non-empty with entries in 1..=30".into(),
                ));
            }
        }

        let mut checks = vec!["all".to_string()];
        if let Some(c) = r.section(&root, "checks")? {
            let s = Some("checks");
            r.no_unknown(c, s, 0, &["names"])?;
            if let Some(v) = r.get(c, s, 0, "names", false)? {
                let arr = v.as_array().ok_or_else(|| {
                    r.err(
                        s,
                        0,
                        "names",
                        "key \"checks.names\" must be an array".into(),
                    )
                })?;
                checks = arr
                    .iter()
                    .map(|x| r.string(x, s, 0, "names"))
                    .collect::<Result<_, _>>()?;
            }
        }

        let mut seed = 11u64;
        if let Some(c) = r.section(&root, "sampling")? {
            r.no_unknown(c, Some("sampling"), 0, &["seed"])?;
            if let Some(v) = r.get(c, Some("sampling"), 0, "seed", false)? {
                seed = r.integer(v, Some("sampling"), 0, "seed")?;
            }
        }

        let mut output = PathBuf::from("out");
        if let Some(c) = r.section(&root, "output")? {
            r.no_unknown(c, Some("output"), 0, &["dir"])?;
            if let Some(v) = r.get(c, Some("output"), 0, "dir", false)? {
                output = PathBuf::from(r.string(v, Some("output"), 0, "dir")?);
            }
        }

        Ok(ScenarioConfig {
            name,
            n,
            poles,
            t_end,
            depth,
            levels,
            checks,
            seed,
            output,
        })
    }

    /// Canonical text; parses back to an equal config.
    pub fn to_toml(&self) -> String {
        let mut s = format!("name = {:?}\n\n[grid]\nn = {}\n", self.name, self.n);
        for p in &self.poles {
            s.push_str(&format!(
                "\n[[pole]]\nx = {:?}\ny = {:?}\nnu = {:?}\nsign = \"{}\"\n",
                p.location.x, p.location.y, p.lelong, p.sign
            ));
        }
        let levels: Vec<String> = self.levels.iter().map(|l| l.to_string()).collect();
        let checks: Vec<String> = self.checks.iter().map(|c| format!("{c:?}")).collect();
        s.push_str(&format!(
            "\n[flow]\nt_end = {:?}\ndepth = {}\nlevels = [{}]\n\n[checks]\nnames = [{}]\n\n[sampling]\nseed = {}\n\n[output]\ndir = {:?}\n",
            self.t_end,
            self.depth,
            levels.join(", "),
            checks.join(", "),
            self.seed,
            self.output.display().to_string()
        ));
        s
    }

    /// Hash of everything except the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        short_hash(c.to_toml().as_bytes())
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.n).expect("validated at load")
    }

    pub fn wants(&self, check: &str) -> bool {
        self.checks.iter().any(|c| c == "all" || c == check)
    }
}

/// First 8 bytes of the SHA-256 digest, in hex.
pub fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"name = "minus-0.8"

[grid]
n = 512

[[pole]]
x = 0.5
y = 0.5
nu = 0.8
sign = "minus"

[flow]
t_end = 1.0
depth = 10
levels = [4, 6, 8]

[sampling]
seed = 7
"#;

    #[test]
    fn reference_parses() {
        let c = ScenarioConfig::parse(REFERENCE).unwrap();
        assert_eq!(c.n, 512);
        assert_eq!(c.poles, vec![PoleSpec::new(0.5, 0.5, 0.8, Sign::Minus)]);
        assert_eq!(c.levels, vec![4, 6, 8]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.checks, vec!["all"]);
    }

    #[test]
    fn round_trip() {
        let mut c = ScenarioConfig::parse(REFERENCE).unwrap();
        c.poles.push(PoleSpec::new(0.1, 0.2, 1.0 / 3.0, Sign::Plus));
        c.checks = vec!["area".into(), "ricci-l1-final".into()];
        c.output = PathBuf::from("some dir/x");
        let back = ScenarioConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn missing_grid_size_names_key_and_line() {
        let src = "name = \"x\"\n\n[grid]\n\n[flow]\ndepth = 3\n";
        let e = ScenarioConfig::parse(src).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("\"grid.n\""), "{e}");
        let e = ScenarioConfig::parse("[flow]\ndepth = 3\n").unwrap_err();
        assert!(e.to_string().contains("grid.n"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = ScenarioConfig::parse("[grid]\nn = 512\n[flow]\nt_end = \"soon\"\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = ScenarioConfig::parse("[grid]\nn = 512\nm = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("grid.m"));
        let e = ScenarioConfig::parse("[grid]\nn = = 512\n").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn cusp_is_rejected_at_load() {
        let src = "[grid]\nn = 256\n\n[[pole]]\nx = 0.5\ny = 0.5\nnu = 2.1\nsign = \"minus\"\n";
        let e = ScenarioConfig::parse(src).unwrap_err();
        assert!(e.to_string().contains("cusp"), "{e}");
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn second_pole_errors_point_at_it() {
        let src = "[grid]\nn = 256\n\n[[pole]]\nx = 0.5\ny = 0.5\nnu = 1\nsign = \"minus\"\n\n[[pole]]\nx = 0.2\ny = 0.5\nnu = 1\nsign = \"sideways\"\n";
        let e = ScenarioConfig::parse(src).unwrap_err();
        assert_eq!(e.line, Some(14));
    }

    #[test]
    fn shipped_scenarios_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        let mut count = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let src = std::fs::read_to_string(&path).unwrap();
            let c =
                ScenarioConfig::parse(&src).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(ScenarioConfig::parse(&c.to_toml()).unwrap(), c);
            count += 1;
        }
        assert!(count >= 4);
    }
}
