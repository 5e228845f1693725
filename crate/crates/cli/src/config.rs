//! Run configuration: a TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use deltadual::experiment::{Experiment, ExperimentKind, GridSpec};
use deltadual::forward::{ForwardConfig, Propagator};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Local volatility table in spot units; the bundled table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<PathBuf>,
    pub sigma: f64,
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub n_space: usize,
    pub n_time: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub density: f64,
    pub tolerance: f64,
    pub smoothing: bool,
    pub propagator: Propagator,
    /// Sample stability reports every this many Picard iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<usize>,
    pub out: PathBuf,
}

/// Same fields, all optional, as read from a file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub experiment: Option<ExperimentKind>,
    pub surface: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub spot: Option<f64>,
    pub strike: Option<f64>,
    pub maturity: Option<f64>,
    pub n_space: Option<usize>,
    pub n_time: Option<usize>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub density: Option<f64>,
    pub tolerance: Option<f64>,
    pub smoothing: Option<bool>,
    pub propagator: Option<Propagator>,
    pub diagnostics: Option<usize>,
    pub out: Option<PathBuf>,
}

impl PartialConfig {
    /// Reads a config file. A manifest written by a previous run works too:
    /// its `[run]` table is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let body = match table.remove("run") {
            Some(toml::Value::Table(run)) => run,
            Some(_) => return Err(CliError::Config("`run` must be a table".into())),
            None => table,
        };
        body.try_into()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: PartialConfig) -> PartialConfig {
        PartialConfig {
            experiment: other.experiment.or(self.experiment),
            surface: other.surface.or(self.surface),
            sigma: other.sigma.or(self.sigma),
            spot: other.spot.or(self.spot),
            strike: other.strike.or(self.strike),
            maturity: other.maturity.or(self.maturity),
            n_space: other.n_space.or(self.n_space),
            n_time: other.n_time.or(self.n_time),
            x_lo: other.x_lo.or(self.x_lo),
            x_hi: other.x_hi.or(self.x_hi),
            density: other.density.or(self.density),
            tolerance: other.tolerance.or(self.tolerance),
            smoothing: other.smoothing.or(self.smoothing),
            propagator: other.propagator.or(self.propagator),
            diagnostics: other.diagnostics.or(self.diagnostics),
            out: other.out.or(self.out),
        }
    }

    /// Missing fields come from the defaults of the chosen experiment.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let kind = self.experiment.unwrap_or(ExperimentKind::Table1);
        let e = Experiment::of_kind(kind);
        let fc = ForwardConfig::<f64>::default();
        let cfg = RunConfig {
            experiment: kind,
            surface: self.surface,
            sigma: self.sigma.unwrap_or(e.sigma),
            spot: self.spot.unwrap_or(e.spot),
            strike: self.strike.unwrap_or(e.strike),
            maturity: self.maturity.unwrap_or(e.maturity),
            n_space: self.n_space.unwrap_or(e.grid.n_space),
            n_time: self.n_time.unwrap_or(e.n_time),
            x_lo: self.x_lo.unwrap_or(e.grid.lo),
            x_hi: self.x_hi.unwrap_or(e.grid.hi),
            density: self.density.unwrap_or(e.grid.density),
            tolerance: self.tolerance.unwrap_or(fc.tolerance),
            smoothing: self.smoothing.unwrap_or(fc.smoothing),
            propagator: self.propagator.unwrap_or(fc.propagator),
            diagnostics: self.diagnostics,
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.forward().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.spot > 0.0) {
            return Err(CliError::Config(format!("spot must be positive, got {}", self.spot)));
        }
        if let Some(p) = &self.surface {
            if !p.is_file() {
                return Err(CliError::Config(format!("surface file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            kind: self.experiment,
            spot: self.spot,
            strike: self.strike,
            maturity: self.maturity,
            n_time: self.n_time,
            grid: GridSpec {
                n_space: self.n_space,
                lo: self.x_lo,
                hi: self.x_hi,
                density: self.density,
            },
            sigma: self.sigma,
        }
    }

    pub fn forward(&self) -> ForwardConfig<f64> {
        ForwardConfig {
            tolerance: self.tolerance,
            smoothing: self.smoothing,
            propagator: self.propagator,
            diagnostics: self.diagnostics,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_experiment() {
        let c = PartialConfig::default().resolve().unwrap();
        assert_eq!(c.experiment().grid, Experiment::table1().grid);
        let d = PartialConfig {
            experiment: Some(ExperimentKind::Displaced),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(d.sigma, 0.5);
        assert_eq!(d.x_hi, 1000.0);
    }

    #[test]
    fn overrides_win() {
        let file = PartialConfig {
            n_time: Some(50),
            tolerance: Some(1e-6),
            ..Default::default()
        };
        let flags = PartialConfig {
            n_time: Some(20),
            ..Default::default()
        };
        let c = file.merge(flags).resolve().unwrap();
        assert_eq!(c.n_time, 20);
        assert_eq!(c.tolerance, 1e-6);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for p in [
            PartialConfig { tolerance: Some(0.0), ..Default::default() },
            PartialConfig { n_space: Some(1), ..Default::default() },
            PartialConfig { surface: Some("/nonexistent/vol.csv".into()), ..Default::default() },
        ] {
            assert!(matches!(p.resolve(), Err(CliError::Config(_))));
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let c = PartialConfig::default().resolve().unwrap();
        let text = toml::to_string(&c).unwrap();
        let back: PartialConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.resolve().unwrap(), c);
    }
}
