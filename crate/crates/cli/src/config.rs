//! Run configuration: defaults, `key = value` files and flag overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use caputo::{GridConfig, MlOrder, ProblemSpec, RhsModel, Scheme};

use crate::CliError;

/// Parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Gamma,
    A,
    P,
    U0,
    K,
    Horizon,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Gamma => "gamma",
            Param::A => "A",
            Param::P => "p",
            Param::U0 => "u0",
            Param::K => "k",
            Param::Horizon => "horizon",
        }
    }
}

impl FromStr for Param {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "gamma" => Param::Gamma,
            "A" => Param::A,
            "p" => Param::P,
            "u0" => Param::U0,
            "k" => Param::K,
            "horizon" => Param::Horizon,
            other => {
                return Err(CliError::config(
                    "sweep",
                    format!("cannot sweep over {other:?}"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: Param,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = CliError;

    /// `NAME=v1,v2,...`
    fn from_str(s: &str) -> Result<Self, CliError> {
        let (name, list) = s.split_once('=').ok_or_else(|| {
            CliError::config("sweep", format!("expected NAME=v1,v2,..., got {s:?}"))
        })?;
        let param: Param = name.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| parse_f64(param.name(), v))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(CliError::config("sweep", "empty value list"));
        }
        Ok(Sweep { param, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub a: f64,
    pub p: f64,
    pub u0: f64,
    pub horizon: f64,
    pub k: f64,
    pub n_max: Option<usize>,
    pub scheme: Scheme,
    pub out: Option<PathBuf>,
    pub sweeps: Vec<Sweep>,
}

impl Default for RunConfig {
    /// `D^0.6 u = u^2`, `u0 = 0.12` on `[0, 12]`, implicit scheme, `k = 1e-4`.
    fn default() -> Self {
        Self {
            gamma: 0.6,
            a: 1.0,
            p: 2.0,
            u0: 0.12,
            horizon: 12.0,
            k: 1e-4,
            n_max: None,
            scheme: Scheme::DiffImplicit,
            out: None,
            sweeps: Vec::new(),
        }
    }
}

fn parse_f64(field: &str, raw: &str) -> Result<f64, CliError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| CliError::config(field, format!("not a number: {:?}", raw.trim())))
}

impl RunConfig {
    /// Sets one field from its textual form. Keys are the flag names without `--`.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let raw = raw.trim();
        match key {
            "gamma" => self.gamma = parse_f64(key, raw)?,
            "A" => self.a = parse_f64(key, raw)?,
            "p" => self.p = parse_f64(key, raw)?,
            "u0" => self.u0 = parse_f64(key, raw)?,
            "horizon" => self.horizon = parse_f64(key, raw)?,
            "k" => self.k = parse_f64(key, raw)?,
            "n-max" | "n_max" => {
                let n = raw
                    .parse::<usize>()
                    .map_err(|_| CliError::config("n-max", format!("not a step count: {raw:?}")))?;
                self.n_max = Some(n);
            }
            "scheme" => {
                self.scheme = raw
                    .parse()
                    .map_err(|e| CliError::config("scheme", format!("{e}")))?
            }
            "out" => self.out = Some(PathBuf::from(raw)),
            "sweep" => self.push_sweep(raw.parse()?),
            other => return Err(CliError::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Adds a sweep axis, replacing an earlier one over the same parameter.
    pub fn push_sweep(&mut self, sweep: Sweep) {
        self.sweeps.retain(|s| s.param != sweep.param);
        self.sweeps.push(sweep);
    }

    /// Applies a `key = value` file (`#` starts a comment).
    pub fn apply_file_contents(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config("config", format!("line {}: expected key = value", i + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        self.apply_file_contents(&text)
    }

    fn with_value(&self, param: Param, v: f64) -> Self {
        let mut c = self.clone();
        match param {
            Param::Gamma => c.gamma = v,
            Param::A => c.a = v,
            Param::P => c.p = v,
            Param::U0 => c.u0 = v,
            Param::K => c.k = v,
            Param::Horizon => c.horizon = v,
        }
        c
    }

    /// One configuration per point of the sweep grid (cartesian product, first
    /// axis slowest), each paired with its coordinates.
    pub fn expand(&self) -> Vec<(Vec<(Param, f64)>, RunConfig)> {
        let mut points = vec![(Vec::new(), self.clone())];
        for sweep in &self.sweeps {
            points = points
                .into_iter()
                .flat_map(|(coords, cfg)| {
                    sweep.values.iter().map(move |&v| {
                        let mut c = coords.clone();
                        c.push((sweep.param, v));
                        (c, cfg.with_value(sweep.param, v))
                    })
                })
                .collect();
        }
        points
    }

    pub fn order(&self) -> Result<MlOrder, CliError> {
        MlOrder::new(self.gamma).map_err(|e| CliError::config("gamma", e.to_string()))
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let gamma = self.order()?;
        let rhs = RhsModel::power_law(self.a, self.p)
            .map_err(|e| CliError::config("A", e.to_string()))?;
        if !(self.u0 > 0.0) || !self.u0.is_finite() {
            return Err(CliError::config(
                "u0",
                format!("must be finite and positive, got {}", self.u0),
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(CliError::config(
                "horizon",
                format!("must be finite and positive, got {}", self.horizon),
            ));
        }
        ProblemSpec::new(gamma, self.u0, rhs, self.horizon)
            .map_err(|e| CliError::config("u0", e.to_string()))
    }

    pub fn grid(&self) -> Result<GridConfig, CliError> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(CliError::config(
                "k",
                format!("must be finite and positive, got {}", self.k),
            ));
        }
        let mut grid = GridConfig::for_horizon(self.k, self.horizon, self.scheme)
            .map_err(|e| CliError::config("k", e.to_string()))?;
        if let Some(n) = self.n_max {
            if n == 0 {
                return Err(CliError::config("n-max", "must be at least 1"));
            }
            grid.n_max = grid.n_max.min(n);
        }
        grid.validate(&self.problem()?)
            .map_err(|e| CliError::config("k", e.to_string()))?;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_file_contents(
            "# fig 1\ngamma = 0.3\nu0=1.2  # large\n\nscheme = diff-ex\nsweep = p=1,2\n",
        )
        .unwrap();
        assert_eq!((c.gamma, c.u0, c.scheme), (0.3, 1.2, Scheme::DiffExplicit));
        c.set("gamma", "0.9").unwrap();
        assert_eq!(c.gamma, 0.9);
        assert_eq!(
            c.sweeps,
            vec![Sweep {
                param: Param::P,
                values: vec![1.0, 2.0]
            }]
        );
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = RunConfig::default();
        let e = c.set("u0", "abc").unwrap_err();
        assert!(e.to_string().contains("u0"), "{e}");
        let e = c.apply_file_contents("colour = red").unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        c.k = -1.0;
        assert!(c.grid().unwrap_err().to_string().contains('k'));
        let c = RunConfig {
            gamma: 1.5,
            ..RunConfig::default()
        };
        assert!(c.problem().unwrap_err().to_string().contains("gamma"));
    }

    #[test]
    fn sweep_expansion_order() {
        let mut c = RunConfig::default();
        c.push_sweep("gamma=0.2,0.4".parse().unwrap());
        c.push_sweep("u0=1,2,3".parse().unwrap());
        let pts = c.expand();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].0, vec![(Param::Gamma, 0.2), (Param::U0, 2.0)]);
        assert_eq!((pts[5].1.gamma, pts[5].1.u0), (0.4, 3.0));
    }

    #[test]
    fn n_max_caps_the_grid() {
        let c = RunConfig {
            n_max: Some(10),
            ..RunConfig::default()
        };
        assert_eq!(c.grid().unwrap().n_max, 10);
    }
}
