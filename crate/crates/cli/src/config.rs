use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use wgflow::measures::{random_measure, InstanceSeed};
use wgflow::{Functional, Measure};

/// Bad flag, bad config file, or a value that does not parse. Exit code 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($arg:tt)*) => { UsageError(format!($($arg)*)) };
}
pub(crate) use usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Flow,
    Expformula,
    Verify,
    Prox,
    Geodesic,
}

impl Command {
    pub const ALL: [Command; 5] = [Command::Flow, Command::Expformula, Command::Verify, Command::Prox, Command::Geodesic];

    pub fn name(self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Expformula => "expformula",
            Command::Verify => "verify",
            Command::Prox => "prox",
            Command::Geodesic => "geodesic",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Flow => "Run a discrete gradient flow and write its trace",
            Command::Expformula => "Compare discrete flows with the reference flow against the exponential-formula bound",
            Command::Verify => "Sweep the inequality harness over seeded instances",
            Command::Prox => "Compute one certified proximal step",
            Command::Geodesic => "Check the geometry identities on a seeded instance",
        }
    }

    /// `(key, default, help)` for every key this command reads.
    pub fn keys(self) -> &'static [(&'static str, &'static str, &'static str)] {
        const MEASURE: [(&str, &str, &str); 5] = [
            ("measure", "random", "initial measure: 'random', 'line:x1,x2,...' or a measure CSV path"),
            ("seed", "1", "instance seed"),
            ("atoms", "4", "number of atoms for random measures"),
            ("dim", "2", "dimension for random measures"),
            ("radius", "1.5", "box half-width for random measures"),
        ];
        match self {
            Command::Flow => &[
                ("functional", "potential:quadratic", "energy descriptor"),
                MEASURE[0], MEASURE[1], MEASURE[2], MEASURE[3], MEASURE[4],
                ("schedule", "fixed", "'fixed' (tau, n) or 'varying' (random steps partitioning [0,t], at most hmax)"),
                ("tau", "0.1", "step size for the fixed schedule"),
                ("n", "10", "number of steps for the fixed schedule"),
                ("t", "1", "horizon for the varying schedule"),
                ("hmax", "0.1", "largest step of the varying schedule"),
            ],
            Command::Expformula => &[
                ("functional", "potential:quadratic", "energy descriptor"),
                ("measure", "line:1", "initial measure: 'random', 'line:x1,x2,...' or a measure CSV path"),
                MEASURE[1], MEASURE[2], MEASURE[3], MEASURE[4],
                ("t", "1", "time horizon"),
                ("n", "4,16,64", "comma-separated step counts"),
            ],
            Command::Verify => &[
                ("kinds", "all", "comma-separated inequality kinds, or 'all'"),
                ("seeds", "1..1000", "seed range 'a..b' (inclusive) or comma-separated list"),
                ("sizes", "default", "'default' (N<=8, d<=3) or comma-separated NxD pairs"),
                ("functionals", "default", "'default' or semicolon-separated descriptors"),
            ],
            Command::Prox => &[
                ("functional", "potential:quadratic", "energy descriptor"),
                MEASURE[0], MEASURE[1], MEASURE[2], MEASURE[3], MEASURE[4],
                ("tau", "0.5", "step size"),
            ],
            Command::Geodesic => &[
                ("seed", "1", "instance seed"),
                ("atoms", "4", "number of atoms"),
                ("dim", "2", "dimension"),
                ("radius", "1.5", "box half-width"),
                ("alpha", "0,0.25,0.5,0.75,1", "comma-separated interpolation parameters"),
                ("tolerance", "1e-10", "largest accepted residual"),
            ],
        }
    }
}

impl FromStr for Command {
    type Err = UsageError;
    fn from_str(s: &str) -> Result<Self, UsageError> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| usage!("unknown command '{s}'"))
    }
}

/// Fully resolved configuration of one run: every key of the command with its value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| usage!("config line {}: expected 'key = value'", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(usage!("config line {}: empty key", i + 1));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(usage!("config line {}: duplicate key '{k}'", i + 1));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let values = command.keys().iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        Self { command, values }
    }

    /// Overrides values; unknown keys are rejected.
    pub fn apply(&mut self, overrides: &BTreeMap<String, String>) -> Result<(), UsageError> {
        for (k, v) in overrides {
            match self.values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => return Err(usage!("key '{k}' is not used by '{}'", self.command.name())),
            }
        }
        Ok(())
    }

    pub fn load(command: Command, path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage!("cannot read config {}: {e}", path.display()))?;
        let mut cfg = Self::defaults(command);
        cfg.apply(&parse_config_text(&text)?)?;
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key declared for command")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, UsageError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| usage!("invalid value '{raw}' for {key}: {e}"))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, UsageError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        let items: Vec<T> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| usage!("invalid entry '{s}' in {key}: {e}")))
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return Err(usage!("{key} must not be empty"));
        }
        Ok(items)
    }

    pub fn positive(&self, key: &str) -> Result<f64, UsageError> {
        let x: f64 = self.get(key)?;
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(usage!("{key} must be positive and finite, got {x}"))
        }
    }

    pub fn functional(&self) -> Result<Functional, UsageError> {
        self.get("functional")
    }

    pub fn seed(&self) -> Result<u64, UsageError> {
        self.get("seed")
    }

    /// Inclusive range `a..b` or a comma-separated list.
    pub fn seeds(&self) -> Result<Vec<u64>, UsageError> {
        let raw = self.raw("seeds");
        if let Some((a, b)) = raw.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|e| usage!("invalid seed range start '{a}': {e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| usage!("invalid seed range end '{b}': {e}"))?;
            if a > b {
                return Err(usage!("empty seed range {raw}"));
            }
            return Ok((a..=b).collect());
        }
        self.list("seeds")
    }

    pub fn sizes(&self) -> Result<Option<Vec<(usize, usize)>>, UsageError> {
        let raw = self.raw("sizes");
        if raw == "default" {
            return Ok(None);
        }
        raw.split(',')
            .map(|p| {
                let (n, d) = p.trim().split_once('x').ok_or_else(|| usage!("size '{p}' is not NxD"))?;
                let n: usize = n.parse().map_err(|_| usage!("size '{p}' is not NxD"))?;
                let d: usize = d.parse().map_err(|_| usage!("size '{p}' is not NxD"))?;
                if n == 0 || d == 0 {
                    return Err(usage!("size '{p}' must have N, d >= 1"));
                }
                Ok((n, d))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn functionals(&self) -> Result<Option<Vec<Functional>>, UsageError> {
        let raw = self.raw("functionals");
        if raw == "default" {
            return Ok(None);
        }
        raw.split(';')
            .map(|s| s.trim().parse().map_err(|e| usage!("invalid functional '{s}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Random measure with the configured seed and shape, drawn from `salt`.
    pub fn random_measure(&self, salt: u64) -> Result<Measure, UsageError> {
        let atoms: usize = self.get("atoms")?;
        let dim: usize = self.get("dim")?;
        let radius = self.positive("radius")?;
        random_measure(&InstanceSeed::new(self.seed()?).derive(salt), atoms, dim, radius).map_err(|e| usage!("{e}"))
    }

    pub fn measure(&self) -> Result<Measure, UsageError> {
        let raw = self.raw("measure");
        if raw == "random" {
            return self.random_measure(0);
        }
        if let Some(xs) = raw.strip_prefix("line:") {
            let xs: Vec<f64> = xs
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| usage!("invalid atom '{s}': {e}")))
                .collect::<Result<_, _>>()?;
            return Measure::from_line(&xs).map_err(|e| usage!("{e}"));
        }
        let text = std::fs::read_to_string(raw).map_err(|e| usage!("cannot read measure {raw}: {e}"))?;
        Measure::from_csv(&text).map_err(|e| usage!("measure {raw}: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# run\ntau = 0.25\n\nn=8 # steps\n").unwrap();
        assert_eq!(m["tau"], "0.25");
        assert_eq!(m["n"], "8");
        assert!(parse_config_text("tau").is_err());
        assert!(parse_config_text("n=1\nn=2").is_err());
        assert!(parse_config_text(" = 3").is_err());
    }

    #[test]
    fn overrides_and_typed_access() {
        let mut c = RunConfig::defaults(Command::Flow);
        assert_eq!(c.get::<usize>("n").unwrap(), 10);
        c.apply(&BTreeMap::from([("n".to_string(), "-1".to_string())])).unwrap();
        assert!(c.get::<usize>("n").is_err());
        assert!(c.apply(&BTreeMap::from([("kinds".to_string(), "all".to_string())])).is_err());
        let mut v = RunConfig::defaults(Command::Verify);
        assert_eq!(v.seeds().unwrap().len(), 1000);
        v.apply(&BTreeMap::from([("seeds".into(), "3,5".into()), ("sizes".into(), "2x1,3x3".into())])).unwrap();
        assert_eq!(v.seeds().unwrap(), vec![3, 5]);
        assert_eq!(v.sizes().unwrap(), Some(vec![(2, 1), (3, 3)]));
        v.apply(&BTreeMap::from([("seeds".into(), "5..3".into())])).unwrap();
        assert!(v.seeds().is_err());
    }

    #[test]
    fn measure_specs() {
        let mut c = RunConfig::defaults(Command::Prox);
        assert_eq!(c.measure().unwrap().len(), 4);
        c.values.insert("measure".into(), "line:1,2.5".into());
        assert_eq!(c.measure().unwrap().coords(), &[1.0, 2.5]);
        c.values.insert("measure".into(), "/nonexistent/mu.csv".into());
        assert!(c.measure().is_err());
    }
}
