//! Standard experiment setups: the tabulated-surface run and the displaced
//! lognormal run with its closed-form oracle.

use serde::{Deserialize, Serialize};

use crate::analytic::DisplacedParams;
use crate::backward::{solve_backward, PdeSolution};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::legendre::{frame_from_solution, DualOptions, LegendreFrame};
use crate::volatility::{parse_surface, VolSurface};

/// The local volatility table shipped with the crate, in spot units.
pub const TABLE1_CSV: &str = include_str!("../../../data/table1_local_vol.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Table1,
    Displaced,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Self::Table1),
            "displaced" => Ok(Self::Displaced),
            other => Err(Error::InvalidParameter {
                name: "experiment",
                reason: format!("unknown experiment `{other}` (expected table1 or displaced)"),
            }),
        }
    }
}

/// Spot grid in payoff coordinates `x = S - K`, clustered at the strike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of intervals; the grid has `n_space + 1` nodes.
    pub n_space: usize,
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid<f64>> {
        Grid::clustered(self.n_space + 1, self.lo, self.hi, 0.0, self.density)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub n_time: usize,
    pub grid: GridSpec,
    /// Lognormal volatility of the displaced run; unused for the table.
    pub sigma: f64,
}

impl Experiment {
    /// Spot 100, strike 100, one year, 400 intervals and 100 steps.
    pub fn table1() -> Self {
        Self {
            kind: ExperimentKind::Table1,
            spot: 100.0,
            strike: 100.0,
            maturity: 1.0,
            n_time: 100,
            grid: GridSpec {
                n_space: 400,
                lo: -5.0,
                hi: 5.0,
                density: 1.0,
            },
            sigma: 0.0,
        }
    }

    /// `dS = σ (S - K') dW` read in payoff coordinates, σ = 0.5.
    pub fn displaced() -> Self {
        Self {
            kind: ExperimentKind::Displaced,
            spot: 100.0,
            strike: 100.0,
            maturity: 1.0,
            n_time: 100,
            grid: GridSpec {
                n_space: 400,
                lo: -100.0,
                hi: 1000.0,
                density: 30.0,
            },
            sigma: 0.5,
        }
    }

    pub fn of_kind(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Table1 => Self::table1(),
            ExperimentKind::Displaced => Self::displaced(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("strike", self.strike),
            ("maturity", self.maturity),
            ("density", self.grid.density),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.n_time == 0 || self.grid.n_space < 2 {
            return Err(Error::InvalidParameter {
                name: "n_space",
                reason: "need at least 2 space intervals and 1 time step".into(),
            });
        }
        if self.kind == ExperimentKind::Displaced && !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be positive, got {}", self.sigma),
            });
        }
        if !(self.grid.lo < 0.0 && self.grid.hi > 0.0) {
            return Err(Error::CenterOutsideDomain {
                center: 0.0,
                lo: self.grid.lo,
                hi: self.grid.hi,
            });
        }
        Ok(())
    }

    /// Bundled table for the tabulated run, lognormal otherwise; both in
    /// payoff coordinates.
    pub fn default_surface(&self) -> Result<VolSurface<f64>> {
        let s = match self.kind {
            ExperimentKind::Table1 => parse_surface(TABLE1_CSV.as_bytes())?,
            ExperimentKind::Displaced => VolSurface::lognormal(self.sigma)?,
        };
        Ok(s.recentered(self.strike))
    }

    pub fn displaced_params(&self) -> Result<DisplacedParams<f64>> {
        DisplacedParams::new(self.sigma, self.strike, self.maturity)
    }

    pub fn backward(&self, s: &VolSurface<f64>) -> Result<PdeSolution<f64>> {
        self.validate()?;
        solve_backward(s, &self.grid.build()?, self.maturity, self.n_time)
    }
}

/// Conjugate frame at `t = 0` on the delta grid of the backward solution.
pub fn initial_frame(sol: &PdeSolution<f64>) -> Result<LegendreFrame<f64>> {
    frame_from_solution(sol, 0, DualOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setups_are_valid() {
        for e in [Experiment::table1(), Experiment::displaced()] {
            e.validate().unwrap();
            let g = e.grid.build().unwrap();
            assert_eq!(g.len(), 401);
            assert!(g.nodes().contains(&0.0));
        }
        assert_eq!("displaced".parse::<ExperimentKind>().unwrap(), ExperimentKind::Displaced);
        assert!("fig9".parse::<ExperimentKind>().is_err());
        let mut bad = Experiment::table1();
        bad.maturity = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn bundled_surface_is_recentered() {
        let e = Experiment::table1();
        let s = e.default_surface().unwrap();
        assert_eq!(s.offset(), 100.0);
        assert!((s.vol_at(0.0, 0.1) - 0.462).abs() < 1e-12);
    }
}
