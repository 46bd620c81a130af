//! Sweep parameters from flags and an optional `key=value` file.
//!
//! Keys in the file use the flag names without the leading dashes, with `-`
//! and `_` interchangeable. Blank lines and lines starting with `#` are
//! skipped. A flag given on the command line always wins over the file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use photoswitch_core::gibbslp::N_MAX;

use crate::error::{config_err, CliResult};

/// Largest number of grid points a single sweep may request.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Uncorrelated,
    Correlated,
    Td,
    Asymptotic,
    Coherence,
    Fivelevel,
    Single,
    Mutualinfo,
    Advantage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Raw sweep flags. Every field is optional so that the config file can
/// supply it.
#[derive(Args, Clone, Debug, Default)]
pub struct SweepArgs {
    /// Quantity to sweep.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// First gap on the grid [default: the step]
    #[arg(long, allow_negative_numbers = true)]
    pub delta_min: Option<f64>,
    /// Last gap on the grid [default: W]
    #[arg(long, allow_negative_numbers = true)]
    pub delta_max: Option<f64>,
    /// Grid spacing [default: 0.05]
    #[arg(long, allow_negative_numbers = true)]
    pub delta_step: Option<f64>,
    /// Excitation probability [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Energy of the excited level [default: 30]
    #[arg(long, allow_negative_numbers = true)]
    pub w: Option<f64>,
    /// Number of molecules [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// Smallest molecule count of an N range
    #[arg(long)]
    pub n_min: Option<u32>,
    /// Largest molecule count of an N range
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Coherence modulus [default: q(1-q)]
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Ground sublevel spacing [default: 0.1]
    #[arg(long, allow_negative_numbers = true)]
    pub omega0: Option<f64>,
    /// Switched sublevel spacing [default: 0.1]
    #[arg(long, allow_negative_numbers = true)]
    pub omega_delta: Option<f64>,
    /// Inverse temperature of the ground manifold [default: 100]
    #[arg(long, allow_negative_numbers = true)]
    pub beta0: Option<f64>,
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads, 0 for all cores [default: 0]
    #[arg(long)]
    pub threads: Option<usize>,
    /// File of key=value defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// A validated sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub mode: Mode,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_step: f64,
    pub q: f64,
    pub w: f64,
    /// Molecule counts, ascending.
    pub n_values: Vec<u32>,
    pub alpha: f64,
    pub omega0: f64,
    pub omega_delta: f64,
    pub beta0: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
}

const KNOWN_KEYS: [&str; 16] = [
    "mode",
    "delta_min",
    "delta_max",
    "delta_step",
    "q",
    "w",
    "n",
    "n_min",
    "n_max",
    "alpha",
    "omega0",
    "omega_delta",
    "beta0",
    "out",
    "format",
    "threads",
];

/// Parses a flat `key=value` file.
pub fn read_config_file(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> CliResult<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(config_err(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(config_err(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
    }
    Ok(map)
}

fn from_file<T: FromStr>(file: &HashMap<String, String>, key: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|e| config_err(format!("{key} = {v:?}: {e}"))))
        .transpose()
}

fn enum_from_file<T: ValueEnum>(file: &HashMap<String, String>, key: &str) -> CliResult<Option<T>> {
    file.get(key)
        .map(|v| T::from_str(v, true).map_err(|e| config_err(format!("{key} = {v:?}: {e}"))))
        .transpose()
}

impl SweepArgs {
    /// Fills every unset flag from the config file, if one was given.
    pub fn merged(&self) -> CliResult<SweepArgs> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let file = read_config_file(path)?;
        self.merged_with(&file)
    }

    pub fn merged_with(&self, file: &HashMap<String, String>) -> CliResult<SweepArgs> {
        Ok(SweepArgs {
            mode: self.mode.or(enum_from_file(file, "mode")?),
            delta_min: self.delta_min.or(from_file(file, "delta_min")?),
            delta_max: self.delta_max.or(from_file(file, "delta_max")?),
            delta_step: self.delta_step.or(from_file(file, "delta_step")?),
            q: self.q.or(from_file(file, "q")?),
            w: self.w.or(from_file(file, "w")?),
            n: self.n.or(from_file(file, "n")?),
            n_min: self.n_min.or(from_file(file, "n_min")?),
            n_max: self.n_max.or(from_file(file, "n_max")?),
            alpha: self.alpha.or(from_file(file, "alpha")?),
            omega0: self.omega0.or(from_file(file, "omega0")?),
            omega_delta: self.omega_delta.or(from_file(file, "omega_delta")?),
            beta0: self.beta0.or(from_file(file, "beta0")?),
            out: self.out.clone().or(from_file(file, "out")?),
            format: self.format.or(enum_from_file(file, "format")?),
            threads: self.threads.or(from_file(file, "threads")?),
            config: None,
        })
    }
}

impl SweepConfig {
    /// Merges the config file, applies defaults and validates.
    pub fn from_args(args: &SweepArgs) -> CliResult<Self> {
        let a = args.merged()?;
        let mode = a.mode.ok_or_else(|| config_err("--mode is required"))?;
        let q = a.q.unwrap_or(0.5);
        let w = a.w.unwrap_or(30.0);
        let delta_step = a.delta_step.unwrap_or(0.05);
        let delta_min = a.delta_min.unwrap_or(delta_step);
        let delta_max = a.delta_max.unwrap_or(w);

        let finite = [q, w, delta_step, delta_min, delta_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err(config_err("numeric parameters must be finite"));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(config_err(format!("q must lie in [0, 1], got {q}")));
        }
        if w <= 0.0 {
            return Err(config_err(format!("W must be positive, got {w}")));
        }
        if delta_step <= 0.0 {
            return Err(config_err(format!("delta-step must be positive, got {delta_step}")));
        }
        if delta_min <= 0.0 {
            return Err(config_err(format!("delta-min must be positive, got {delta_min}")));
        }
        if delta_max < delta_min {
            return Err(config_err(format!("delta-max {delta_max} is below delta-min {delta_min}")));
        }

        let n_values = match (a.n, a.n_min, a.n_max) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(config_err("give either --n or --n-min/--n-max, not both"));
            }
            (None, Some(lo), Some(hi)) => {
                if lo == 0 || hi < lo {
                    return Err(config_err(format!("invalid N range {lo}..={hi}")));
                }
                (lo..=hi).collect()
            }
            (None, Some(_), None) | (None, None, Some(_)) => {
                return Err(config_err("--n-min and --n-max must be given together"));
            }
            (n, None, None) => {
                let n = n.unwrap_or(2);
                if n == 0 {
                    return Err(config_err("n must be at least 1"));
                }
                vec![n]
            }
        };
        let n_hi = *n_values.last().expect("nonempty range");
        let n_lo = n_values[0];
        match mode {
            Mode::Coherence | Mode::Mutualinfo if n_values != [2] => {
                return Err(config_err(format!("mode {mode:?} is defined for n = 2 only")));
            }
            Mode::Fivelevel if n_hi > 2 => {
                return Err(config_err("fivelevel mode supports n = 1 or 2"));
            }
            Mode::Correlated | Mode::Advantage if n_hi > N_MAX => {
                return Err(config_err(format!("correlated yields support n <= {N_MAX}")));
            }
            Mode::Advantage if n_lo < 2 => {
                return Err(config_err("advantage mode needs n >= 2"));
            }
            _ => {}
        }

        let alpha = a.alpha.unwrap_or(q * (1.0 - q));
        let omega0 = a.omega0.unwrap_or(0.1);
        let omega_delta = a.omega_delta.unwrap_or(0.1);
        let beta0 = a.beta0.unwrap_or(100.0);
        if mode == Mode::Coherence && !(alpha >= 0.0 && alpha <= q * (1.0 - q) + 1e-15) {
            return Err(config_err(format!("alpha must lie in [0, q(1-q)], got {alpha}")));
        }
        if mode == Mode::Fivelevel {
            if !(omega0 > 0.0 && omega_delta > 0.0 && omega0 < w && omega_delta < w) {
                return Err(config_err("sublevel spacings must lie in (0, W)"));
            }
            if !(beta0 > 0.0 && beta0.is_finite()) {
                return Err(config_err(format!("beta0 must be positive, got {beta0}")));
            }
        }

        let cfg = SweepConfig {
            mode,
            delta_min,
            delta_max,
            delta_step,
            q,
            w,
            n_values,
            alpha,
            omega0,
            omega_delta,
            beta0,
            out: a.out,
            format: a.format.unwrap_or_default(),
            threads: a.threads.unwrap_or(0),
        };
        let points = cfg.grid_len().saturating_mul(cfg.n_values.len());
        if points > MAX_GRID_POINTS {
            return Err(config_err(format!("sweep has {points} points, limit is {MAX_GRID_POINTS}")));
        }
        Ok(cfg)
    }

    fn grid_len(&self) -> usize {
        let span = (self.delta_max - self.delta_min) / self.delta_step;
        if span > MAX_GRID_POINTS as f64 {
            return usize::MAX;
        }
        (span + 1e-9).floor() as usize + 1
    }

    /// `delta_min + k * delta_step` up to `delta_max`, rounded to twelve
    /// decimals so that the grid prints cleanly.
    pub fn delta_grid(&self) -> Vec<f64> {
        (0..self.grid_len())
            .map(|k| {
                let v = self.delta_min + k as f64 * self.delta_step;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(mode: Mode) -> SweepArgs {
        SweepArgs {
            mode: Some(mode),
            ..Default::default()
        }
    }

    #[test]
    fn defaults() {
        let c = SweepConfig::from_args(&args(Mode::Correlated)).unwrap();
        assert_eq!(c.q, 0.5);
        assert_eq!(c.w, 30.0);
        assert_eq!(c.n_values, vec![2]);
        assert_eq!(c.alpha, 0.25);
        let g = c.delta_grid();
        assert_eq!(g.len(), 600);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[2], 0.15);
        assert_eq!(*g.last().unwrap(), 30.0);
    }

    #[test]
    fn file_values_are_overridden_by_flags() {
        let file = parse_config_text("# sweep\nmode = td\nq=0.3\ndelta-max = 5\n\nformat=json\n").unwrap();
        let flags = SweepArgs {
            q: Some(0.7),
            ..Default::default()
        };
        let merged = flags.merged_with(&file).unwrap();
        assert_eq!(merged.mode, Some(Mode::Td));
        assert_eq!(merged.q, Some(0.7));
        assert_eq!(merged.delta_max, Some(5.0));
        assert_eq!(merged.format, Some(Format::Json));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_config_text("bogus = 1").is_err());
        assert!(parse_config_text("q 0.5").is_err());
        assert!(parse_config_text("q=1\nq=2").is_err());
        assert!(SweepArgs::default().merged_with(&parse_config_text("q=abc").unwrap()).is_err());
        assert!(SweepConfig::from_args(&SweepArgs::default()).is_err());

        let bad = [
            SweepArgs { q: Some(1.5), ..args(Mode::Td) },
            SweepArgs { delta_step: Some(0.0), ..args(Mode::Td) },
            SweepArgs { delta_min: Some(5.0), delta_max: Some(1.0), ..args(Mode::Td) },
            SweepArgs { n: Some(3), ..args(Mode::Mutualinfo) },
            SweepArgs { n: Some(3), n_min: Some(2), ..args(Mode::Uncorrelated) },
            SweepArgs { n_min: Some(2), ..args(Mode::Uncorrelated) },
            SweepArgs { n: Some(500), ..args(Mode::Correlated) },
            SweepArgs { alpha: Some(0.3), ..args(Mode::Coherence) },
            SweepArgs { delta_step: Some(1e-12), ..args(Mode::Td) },
        ];
        for a in bad {
            let err = SweepConfig::from_args(&a).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{a:?}");
        }
    }

    #[test]
    fn n_range() {
        let a = SweepArgs {
            n_min: Some(2),
            n_max: Some(5),
            ..args(Mode::Advantage)
        };
        assert_eq!(SweepConfig::from_args(&a).unwrap().n_values, vec![2, 3, 4, 5]);
    }
}
