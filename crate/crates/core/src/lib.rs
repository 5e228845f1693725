//! Option pricing in spot space and in delta space.
//!
//! The backward pricing equation is solved on a nonuniform spot grid, its
//! Legendre–Fenchel transform gives the conjugate price `c*(p, t)` on a
//! grid of deltas, and the forward equations for `c*` are solved with an
//! exponential (or Padé) propagator plus Picard iteration.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod analytic;
pub mod backward;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod interp;
pub mod legendre;
pub mod scalar;
pub mod validation;
pub mod volatility;

pub use backward::{solve_backward, PdeSolution};
pub use error::{Error, Result};
pub use forward::{
    solve_forward_linear, solve_forward_nonlinear, ForwardConfig, ForwardError, ForwardTrajectory,
    IterationReport, Propagator,
};
pub use grid::{Grid, TridiagonalOperator};
pub use legendre::{to_dual, LegendreFrame};
pub use scalar::Real;
pub use volatility::VolSurface;

pub type Grid64 = Grid<f64>;
pub type Operator64 = TridiagonalOperator<f64>;
pub type Surface64 = VolSurface<f64>;
pub type Solution64 = PdeSolution<f64>;
pub type Frame64 = LegendreFrame<f64>;
pub type ForwardConfig64 = ForwardConfig<f64>;
pub type Trajectory64 = ForwardTrajectory<f64>;

pub type Grid32 = Grid<f32>;
pub type Surface32 = VolSurface<f32>;
pub type Frame32 = LegendreFrame<f32>;
