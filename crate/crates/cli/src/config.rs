//! Experiment configuration: per-command defaults, then a JSON config file,
//! then flag overrides, in that order. Flags win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use iclab_core::{Error, Result};
use serde_json::{json, Value};

/// Resolved configuration for one run. Every field is echoed into the run
/// record so an output file identifies the run that produced it.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: &'static str,
    /// Sweep sizes for thresholds-lb; a single size for ic-solve.
    pub n: Vec<u32>,
    /// Sample size (per factor for direct-sum).
    pub m: usize,
    /// Threshold sizes of the direct-sum factors.
    pub factors: Vec<u32>,
    /// leftmost | rightmost | uniform-consistent | path to a channel file.
    pub learner: String,
    /// Pool file for ic-solve; the default is the realizable grid net.
    pub pool: Option<PathBuf>,
    /// Grid resolution for the default pool, rounding, and the oracle.
    pub grid: usize,
    pub tol: f64,
    pub iters: usize,
    pub trials: u64,
    /// Suite names for invariants; ["all"] selects every suite.
    pub suites: Vec<String>,
    pub seed: Option<u64>,
    /// Output stem; the run writes `<out>.csv` and `<out>.json`.
    pub out: PathBuf,
    /// External oracle store; the committed store is the default.
    pub oracle: Option<PathBuf>,
    /// Compute and store the brute-force value when the key is missing.
    pub pin_oracle: bool,
}

/// Flag overrides shared by every subcommand; `None` keeps the file or
/// default value.
#[derive(Debug, Default)]
pub struct Overrides {
    pub n: Option<Vec<u32>>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub factors: Option<Vec<u32>>,
    pub learner: Option<String>,
    pub pool: Option<PathBuf>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub iters: Option<usize>,
    pub trials: Option<u64>,
    pub suites: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub oracle: Option<PathBuf>,
    pub pin_oracle: bool,
}

impl ExperimentConfig {
    fn defaults(command: &'static str) -> Self {
        ExperimentConfig {
            command,
            n: match command {
                "thresholds-lb" => vec![2, 3, 4],
                _ => vec![1],
            },
            m: match command {
                "ic-solve" => 1,
                _ => 2,
            },
            factors: vec![1, 2],
            learner: "leftmost".to_string(),
            pool: None,
            grid: 64,
            tol: match command {
                "direct-sum" => 2e-2,
                _ => 1e-3,
            },
            iters: match command {
                "direct-sum" => 600,
                _ => 10_000,
            },
            trials: 1000,
            suites: vec!["all".to_string()],
            seed: None,
            out: PathBuf::from(format!("iclab-{command}")),
            oracle: None,
            pin_oracle: false,
        }
    }

    /// Resolves defaults, the optional config file, and flag overrides.
    pub fn resolve(
        command: &'static str,
        config_file: Option<&Path>,
        flags: Overrides,
    ) -> Result<Self> {
        let mut cfg = Self::defaults(command);
        if let Some(path) = config_file {
            cfg.apply_file(path)?;
        }
        cfg.apply_flags(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let v = read_json(path)?;
        let map = v
            .as_object()
            .ok_or_else(|| Error::Parse(format!("{}: config must be a JSON object", path.display())))?;
        for (key, value) in map {
            match key.as_str() {
                "command" => {
                    let c = field_str(value, "command")?;
                    if c != self.command {
                        return Err(Error::Contract(format!(
                            "config file is for `{c}`, but the `{}` command was invoked",
                            self.command
                        )));
                    }
                }
                "n" => self.n = field_u32_list(value, "n")?,
                "m" => self.m = field_u64(value, "m")? as usize,
                "factors" => self.factors = field_u32_list(value, "factors")?,
                "learner" => self.learner = field_str(value, "learner")?,
                "pool" => self.pool = Some(PathBuf::from(field_str(value, "pool")?)),
                "grid" => self.grid = field_u64(value, "grid")? as usize,
                "tol" => self.tol = field_f64(value, "tol")?,
                "iters" => self.iters = field_u64(value, "iters")? as usize,
                "trials" => self.trials = field_u64(value, "trials")?,
                "suites" => self.suites = field_str_list(value, "suites")?,
                "seed" => self.seed = Some(field_u64(value, "seed")?),
                "out" => self.out = PathBuf::from(field_str(value, "out")?),
                "oracle" => self.oracle = Some(PathBuf::from(field_str(value, "oracle")?)),
                "pin_oracle" => {
                    self.pin_oracle = value.as_bool().ok_or_else(|| {
                        Error::Parse("field `pin_oracle` must be a boolean".to_string())
                    })?
                }
                other => {
                    return Err(Error::Parse(format!(
                        "{}: unknown config field `{other}`",
                        path.display()
                    )))
                }
            }
        }
        Ok(())
    }

    fn apply_flags(&mut self, f: Overrides) {
        if let Some(n) = f.n {
            self.n = n;
        }
        if let Some(m) = f.m {
            self.m = m;
        }
        if let Some(d) = f.d {
            // --d resizes the factor list, padding with threshold size 1.
            self.factors.resize(d, 1);
        }
        if let Some(factors) = f.factors {
            self.factors = factors;
        }
        if let Some(learner) = f.learner {
            self.learner = learner;
        }
        if let Some(pool) = f.pool {
            self.pool = Some(pool);
        }
        if let Some(grid) = f.grid {
            self.grid = grid;
        }
        if let Some(tol) = f.tol {
            self.tol = tol;
        }
        if let Some(iters) = f.iters {
            self.iters = iters;
        }
        if let Some(trials) = f.trials {
            self.trials = trials;
        }
        if let Some(suites) = f.suites {
            self.suites = suites;
        }
        if let Some(seed) = f.seed {
            self.seed = Some(seed);
        }
        if let Some(out) = f.out {
            self.out = out;
        }
        if let Some(oracle) = f.oracle {
            self.oracle = Some(oracle);
        }
        if f.pin_oracle {
            self.pin_oracle = true;
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::Contract(
                "a seed is mandatory; pass --seed or set `seed` in the config file".to_string(),
            ));
        }
        if self.n.is_empty() {
            return Err(Error::Contract("the size sweep must be nonempty".to_string()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Contract("the tolerance must be positive".to_string()));
        }
        if self.iters == 0 {
            return Err(Error::Contract("need at least one iteration".to_string()));
        }
        match self.command {
            "thresholds-lb" => {
                if self.m < 2 {
                    return Err(Error::Contract(
                        "the threshold bound needs sample size m >= 2".to_string(),
                    ));
                }
                if self.is_file_learner() && self.n.len() != 1 {
                    return Err(Error::Contract(
                        "a learner file fixes one class; give a single n".to_string(),
                    ));
                }
            }
            "ic-solve" => {
                if self.n.len() != 1 {
                    return Err(Error::Contract("ic-solve takes a single n".to_string()));
                }
                if self.m == 0 {
                    return Err(Error::Contract("need sample size m >= 1".to_string()));
                }
            }
            "direct-sum" => {
                if self.factors.is_empty() {
                    return Err(Error::Contract("need at least one factor".to_string()));
                }
                if self.m < 2 {
                    return Err(Error::Contract(
                        "the per-factor sample budget must be at least 2".to_string(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn is_file_learner(&self) -> bool {
        !matches!(self.learner.as_str(), "leftmost" | "rightmost" | "uniform-consistent")
    }

    /// Full echo of the resolved configuration, embedded in every record.
    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "n": self.n,
            "m": self.m,
            "factors": self.factors,
            "learner": self.learner,
            "pool": self.pool.as_ref().map(|p| p.display().to_string()),
            "grid": self.grid,
            "tol": self.tol,
            "iters": self.iters,
            "trials": self.trials,
            "suites": self.suites,
            "seed": self.seed(),
            "out": self.out.display().to_string(),
            "oracle": self.oracle.as_ref().map(|p| p.display().to_string()),
            "pin_oracle": self.pin_oracle,
        })
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Contract(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Parses a comma-separated list of sizes from a flag value.
pub fn parse_u32_list(raw: &str) -> Result<Vec<u32>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::Contract(format!("`{part}` is not a size")))
        })
        .collect()
}

fn field_str(v: &Value, name: &str) -> Result<String> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::Parse(format!("field `{name}` must be a string")))
}

fn field_u64(v: &Value, name: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::Parse(format!("field `{name}` must be a nonnegative integer")))
}

fn field_f64(v: &Value, name: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Parse(format!("field `{name}` must be a number")))
}

fn field_u32_list(v: &Value, name: &str) -> Result<Vec<u32>> {
    if let Some(one) = v.as_u64() {
        return Ok(vec![one as u32]);
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("field `{name}` must be an integer or a list")))?;
    arr.iter().map(|x| field_u64(x, name).map(|u| u as u32)).collect()
}

fn field_str_list(v: &Value, name: &str) -> Result<Vec<String>> {
    if let Some(one) = v.as_str() {
        return Ok(vec![one.to_string()]);
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("field `{name}` must be a string or a list")))?;
    arr.iter().map(|x| field_str(x, name)).collect()
}
