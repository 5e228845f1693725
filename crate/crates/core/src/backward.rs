//! Backward pricing equation `c_t + ½ a²(x, t) c_xx = 0`, `c(x, T) = x⁺`.
//!
//! The grid lives in the payoff variable, so the kink sits at `x = 0` and a
//! surface quoted in spot units has to be [`VolSurface::recentered`] at the
//! strike first. Boundary values are frozen: `c = 0` at the lower end and
//! `c = x` at the upper end.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{first_derivative, implicit_step, pade11_step, second_derivative, Grid, TridiagonalOperator};
use crate::scalar::Real;
use crate::volatility::VolSurface;

/// Values, deltas and gammas on the full lattice, times ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution<T> {
    pub grid: Grid<T>,
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    pub deltas: Vec<Vec<T>>,
    pub gammas: Vec<Vec<T>>,
}

/// Crank–Nicolson march from `maturity` to 0.
///
/// The first step is split into two fully implicit half steps so that the
/// payoff kink does not leave undamped oscillations in the gammas.
pub fn solve_backward<T: Real>(s: &VolSurface<T>, g: &Grid<T>, maturity: T, steps: usize) -> Result<PdeSolution<T>> {
    if !(maturity > T::zero()) || !maturity.is_finite() {
        return Err(Error::InvalidParameter {
            name: "maturity",
            reason: format!("must be positive, got {maturity}"),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "need at least one time step".into(),
        });
    }
    let op = TridiagonalOperator::second_derivative(g);
    let dt = maturity / T::from_usize_lossy(steps);
    let times: Vec<T> = (0..=steps)
        .map(|k| {
            if k == steps {
                maturity
            } else {
                dt * T::from_usize_lossy(k)
            }
        })
        .collect();
    let x = g.nodes();
    let scale_at = |t: T, tau: T| -> Vec<T> {
        x.iter()
            .map(|&xi| {
                let a = s.vol_at(xi, t);
                T::half() * tau * a * a
            })
            .collect()
    };

    let mut values = vec![Vec::new(); steps + 1];
    let mut v: Vec<T> = x.iter().map(|&xi| xi.max(T::zero())).collect();
    values[steps] = v.clone();
    for k in (0..steps).rev() {
        let (t0, t1) = (times[k], times[k + 1]);
        if k + 1 == steps {
            let h = T::half() * (t1 - t0);
            let q = T::lit(0.25) * (t1 - t0);
            v = implicit_step(&op, &scale_at(t1 - q, h), &v)?;
            v = implicit_step(&op, &scale_at(t0 + q, h), &v)?;
        } else {
            v = pade11_step(&op, &scale_at(T::half() * (t0 + t1), t1 - t0), &v)?;
        }
        values[k] = v.clone();
    }

    let mut deltas = Vec::with_capacity(steps + 1);
    let mut gammas = Vec::with_capacity(steps + 1);
    for level in &values {
        deltas.push(first_derivative(g, level)?);
        gammas.push(second_derivative(g, level)?);
    }
    Ok(PdeSolution {
        grid: g.clone(),
        times,
        values,
        deltas,
        gammas,
    })
}

impl<T: Real> PdeSolution<T> {
    pub fn levels(&self) -> usize {
        self.times.len()
    }

    pub fn maturity(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// Gammas at time `t`, linear in time between stored levels.
    pub fn gamma_at(&self, t: T) -> Vec<T> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.gammas[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.gammas[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.gammas[k]
            .iter()
            .zip(&self.gammas[k + 1])
            .map(|(&a, &b)| a * (T::one() - w) + b * w)
            .collect()
    }

    /// Writes `t,x,value,delta,gamma`, one row per lattice point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "value", "delta", "gamma"])?;
        for (k, &t) in self.times.iter().enumerate() {
            for (i, &x) in self.grid.nodes().iter().enumerate() {
                w.write_record(&[
                    t.to_string(),
                    x.to_string(),
                    self.values[k][i].to_string(),
                    self.deltas[k][i].to_string(),
                    self.gammas[k][i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Recomputes delta and gamma of one stored level.
pub fn delta_gamma<T: Real>(sol: &PdeSolution<T>, level: usize) -> Result<(Vec<T>, Vec<T>)> {
    let v = sol.values.get(level).ok_or(Error::LevelOutOfRange {
        level,
        levels: sol.levels(),
    })?;
    Ok((first_derivative(&sol.grid, v)?, second_derivative(&sol.grid, v)?))
}

/// Default admissibility floor for gammas in [`residual_dual`].
pub const RESIDUAL_GAMMA_FLOOR: f64 = 1e-8;

/// Per-level sup norm of `c_τ c₁₁ - ½ v²(c₁, t)` over interior nodes whose
/// gamma exceeds the floor, with `τ = T - t` and `c_τ` by differences in time
/// (central inside, one-sided at the ends).
pub fn residual_dual<T: Real, F: Fn(T, T) -> T>(sol: &PdeSolution<T>, v_of: F) -> Vec<T> {
    let m = sol.levels();
    let n = sol.grid.len();
    let floor = T::lit(RESIDUAL_GAMMA_FLOOR);
    (0..m)
        .map(|k| {
            let (a, b) = if m == 1 {
                return T::zero();
            } else if k == 0 {
                (0, 1)
            } else if k == m - 1 {
                (m - 2, m - 1)
            } else {
                (k - 1, k + 1)
            };
            let dt = sol.times[b] - sol.times[a];
            let t = sol.times[k];
            let mut worst = T::zero();
            for i in 1..n - 1 {
                let g = sol.gammas[k][i];
                if !(g > floor) {
                    continue;
                }
                // time to maturity runs opposite to calendar time
                let c_tau = -(sol.values[b][i] - sol.values[a][i]) / dt;
                let v = v_of(sol.deltas[k][i], t);
                let r = (c_tau * g - T::half() * v * v).abs();
                worst = worst.max(r);
            }
            worst
        })
        .collect()
}
