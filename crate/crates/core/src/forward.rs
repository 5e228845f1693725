//! Forward equations in delta space.
//!
//! Both forward problems have the form `c*₂ = ½ D(p, t) c*₁₁` with frozen
//! endpoints. For the nonlinear equation `c*₂ c*₁₁ = ½ â²(c*₁, t)` the
//! coefficient is `D = (â / c*₁₁)²`; for the linear dual equation it is the
//! squared delta volatility `v²` rebuilt from the backward gammas. Each step
//! uses the averaged scheme
//!
//! ```text
//! C⁽¹⁾ = exp{½Δt D(t) △} C(t)
//! C⁽ᵏ⁾ = exp{¼Δt [D(t) + D⁽ᵏ⁻¹⁾(t+Δt)] △} C(t)
//! ```
//!
//! iterated until successive iterates agree to `tolerance` in the sup norm.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backward::PdeSolution;
use crate::diagnostics::{stability_report, StabilityReport};
use crate::error::{Error, Result};
use crate::grid::{expm_apply, pade11_step, Grid, TridiagonalOperator};
use crate::interp::pchip;
use crate::legendre::{dual_gamma, x_of_p, LegendreFrame, GAMMA_FLOOR};
use crate::scalar::{sup_distance, Real};
use crate::volatility::VolSurface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagator {
    Pade,
    Expm,
}

impl std::str::FromStr for Propagator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pade" => Ok(Self::Pade),
            "expm" => Ok(Self::Expm),
            other => Err(Error::InvalidParameter {
                name: "propagator",
                reason: format!("unknown propagator `{other}` (expected pade or expm)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardConfig<T> {
    pub tolerance: T,
    /// Differentiate a least-squares quartic instead of the raw values.
    pub smoothing: bool,
    pub propagator: Propagator,
    pub max_iter: usize,
    pub gamma_floor: T,
    /// Sample stability diagnostics every `k`-th iteration.
    pub diagnostics: Option<usize>,
}

impl<T: Real> Default for ForwardConfig<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-8),
            smoothing: true,
            propagator: Propagator::Pade,
            max_iter: 1000,
            gamma_floor: T::lit(GAMMA_FLOOR),
            diagnostics: None,
        }
    }
}

impl<T: Real> ForwardConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("must be positive, got {}", self.tolerance),
            });
        }
        if !(self.gamma_floor > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "gamma_floor",
                reason: format!("must be positive, got {}", self.gamma_floor),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if self.diagnostics == Some(0) {
            return Err(Error::InvalidParameter {
                name: "diagnostics",
                reason: "sampling period must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-step Picard statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport<T> {
    pub counts: Vec<usize>,
    /// Sup-norm change between successive iterates, per step.
    pub residuals: Vec<Vec<T>>,
    pub tolerance: T,
    pub smoothing: bool,
}

impl<T: Real> IterationReport<T> {
    fn new(tolerance: T, smoothing: bool) -> Self {
        Self {
            counts: Vec::new(),
            residuals: Vec::new(),
            tolerance,
            smoothing,
        }
    }

    /// Median count over the steps after the first five, or over all steps
    /// when there are fewer.
    pub fn steady_state(&self) -> usize {
        let tail = if self.counts.len() > 5 { &self.counts[5..] } else { &self.counts[..] };
        if tail.is_empty() {
            return 0;
        }
        let mut v = tail.to_vec();
        v.sort_unstable();
        v[v.len() / 2]
    }
}

/// One sampled stability check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationDiagnostic {
    pub step: usize,
    pub iteration: usize,
    pub report: StabilityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrajectory<T> {
    pub frames: Vec<LegendreFrame<T>>,
    /// Delta volatility `v(p, t)` per level; zero at the frame endpoints.
    pub delta_vol: Vec<Vec<T>>,
    pub report: IterationReport<T>,
    pub diagnostics: Vec<IterationDiagnostic>,
}

impl<T: Real> ForwardTrajectory<T> {
    pub fn times(&self) -> Vec<T> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Writes `p,c_star,x_map,v` for one level.
    pub fn write_level_csv<W: Write>(&self, level: usize, out: W) -> Result<()> {
        let f = self.frames.get(level).ok_or(Error::LevelOutOfRange {
            level,
            levels: self.frames.len(),
        })?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "c_star", "x_map", "v"])?;
        for i in 0..f.len() {
            w.write_record(&[
                f.p.nodes()[i].to_string(),
                f.c_star[i].to_string(),
                f.x_map[i].to_string(),
                self.delta_vol[level][i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_level_csv(&self, level: usize, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_level_csv(level, std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForwardError<T: Real> {
    #[error("Picard iteration diverged at step {step} after {iterations} iterations (last change {last})")]
    Diverged {
        step: usize,
        iterations: usize,
        last: f64,
        history: Vec<T>,
        partial: Box<ForwardTrajectory<T>>,
    },
    #[error(transparent)]
    Core(#[from] Error),
}

/// Second derivative of the least-squares quartic through `(p, c_star)`,
/// sampled at the nodes and floored at `gamma_floor`.
///
/// The fit is done by QR in the variable `u ∈ [-1, 1]` that maps the grid
/// onto a fixed interval.
pub fn smooth_gamma_poly4<T: Real>(p: &Grid<T>, c_star: &[T], gamma_floor: T) -> Result<Vec<T>> {
    let n = p.len();
    if n < 6 {
        return Err(Error::FitTooSmall { needed: 6, actual: n });
    }
    if c_star.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: c_star.len(),
        });
    }
    let mid = (p.lo() + p.hi()).as_f64() * 0.5;
    let half = (p.hi() - p.lo()).as_f64() * 0.5;
    let u: Vec<f64> = p.nodes().iter().map(|&x| (x.as_f64() - mid) / half).collect();
    let a = DMatrix::from_fn(n, 5, |i, j| u[i].powi(j as i32));
    let b = DVector::from_iterator(n, c_star.iter().map(|x| x.as_f64()));
    let qr = a.qr();
    let rhs = qr.q().transpose() * b;
    let coef = match qr.r().solve_upper_triangular(&rhs) {
        Some(c) => c,
        None => return Ok(vec![gamma_floor; n]),
    };
    let scale = 1.0 / (half * half);
    Ok(u.iter()
        .map(|&x| {
            let g = (2.0 * coef[2] + 6.0 * coef[3] * x + 12.0 * coef[4] * x * x) * scale;
            T::lit(g).max(gamma_floor)
        })
        .collect())
}

/// Dual gamma of `c_star` on `p`, smoothed or by the raw stencil.
pub fn frame_gamma<T: Real>(p: &Grid<T>, c_star: &[T], smoothing: bool, gamma_floor: T) -> Result<Vec<T>> {
    if smoothing {
        smooth_gamma_poly4(p, c_star, gamma_floor)
    } else {
        let op = TridiagonalOperator::second_derivative(p);
        let mut g = op.apply(c_star)?;
        let n = g.len();
        g[0] = g[1];
        g[n - 1] = g[n - 2];
        Ok(g.into_iter().map(|x| x.max(gamma_floor)).collect())
    }
}

/// `D = (â(x(p), t) / c*₁₁)²` with the map recomputed from the frame and
/// the frame's dual gamma floored.
pub fn diffusion_coefficient<T: Real>(f: &LegendreFrame<T>, s: &VolSurface<T>, t: T, gamma_floor: T) -> Vec<T> {
    let a = s.vol_hat(&x_of_p(f), t);
    a.iter()
        .zip(&f.c_star_gamma)
        .map(|(&a, &g)| {
            let r = a / g.max(gamma_floor);
            r * r
        })
        .collect()
}

fn propagate<T: Real>(
    op: &TridiagonalOperator<T>,
    scale: &[T],
    v: &[T],
    prop: Propagator,
) -> Result<Vec<T>> {
    match prop {
        Propagator::Pade => pade11_step(op, scale, v),
        Propagator::Expm => expm_apply(op, scale, v),
    }
}

/// Outcome of one Picard solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub c_star: Vec<T>,
    pub iterations: usize,
    pub history: Vec<T>,
    pub converged: bool,
    pub diagnostics: Vec<(usize, Vec<T>)>,
}

/// Picard iteration for one step of `c*₂ = ½ D c*₁₁`.
///
/// `coef(c, t)` returns `D` at time `t` for conjugate values `c`; `d_old`
/// is the coefficient at the start of the step. The iterate `C⁽⁰⁾` is the
/// old level, so a fixed point of the propagator converges in one iteration.
pub fn picard_iterate<T: Real, F>(
    op: &TridiagonalOperator<T>,
    c_old: &[T],
    d_old: &[T],
    dt: T,
    t_new: T,
    cfg: &ForwardConfig<T>,
    mut coef: F,
) -> Result<StepResult<T>>
where
    F: FnMut(&[T], T) -> Result<Vec<T>>,
{
    let n = c_old.len();
    let sanitize = |d: T| if d.is_finite() && d > T::zero() { d } else { T::zero() };
    let mut scale: Vec<T> = d_old.iter().map(|&d| T::half() * dt * sanitize(d)).collect();
    let mut diags = Vec::new();
    let sample = |k: usize, scale: &[T], diags: &mut Vec<(usize, Vec<T>)>| {
        if let Some(every) = cfg.diagnostics {
            if k == 1 || k % every == 0 {
                diags.push((k, scale.to_vec()));
            }
        }
    };
    let mut prev = c_old.to_vec();
    let mut cur = propagate(op, &scale, c_old, cfg.propagator)?;
    sample(1, &scale, &mut diags);
    let mut history = vec![sup_distance(&cur[1..n - 1], &prev[1..n - 1])];
    let mut k = 1;
    loop {
        let last = history[history.len() - 1];
        if !last.is_finite() {
            break;
        }
        if last < cfg.tolerance {
            return Ok(StepResult {
                c_star: cur,
                iterations: k,
                history,
                converged: true,
                diagnostics: diags,
            });
        }
        if k >= cfg.max_iter {
            break;
        }
        let d_new = coef(&cur, t_new)?;
        for i in 0..n {
            scale[i] = T::lit(0.25) * dt * (sanitize(d_old[i]) + sanitize(d_new[i]));
        }
        prev = cur;
        cur = propagate(op, &scale, c_old, cfg.propagator)?;
        k += 1;
        sample(k, &scale, &mut diags);
        history.push(sup_distance(&cur[1..n - 1], &prev[1..n - 1]));
    }
    Ok(StepResult {
        c_star: prev,
        iterations: k,
        history,
        converged: false,
        diagnostics: diags,
    })
}

/// Nonlinear coefficient for conjugate values `c` on `p` at time `t`.
fn nonlinear_coef<T: Real>(p: &Grid<T>, c: &[T], s: &VolSurface<T>, t: T, cfg: &ForwardConfig<T>) -> Result<Vec<T>> {
    let g = frame_gamma(p, c, cfg.smoothing, cfg.gamma_floor)?;
    let x = crate::grid::first_derivative(p, c)?;
    Ok(s.vol_hat(&x, t)
        .iter()
        .zip(&g)
        .map(|(&a, &g)| (a / g) * (a / g))
        .collect())
}

/// One nonlinear step from `f.t` to `f.t + dt`; returns the new frame and
/// the iteration count.
pub fn picard_solve_step<T: Real>(
    f: &LegendreFrame<T>,
    s: &VolSurface<T>,
    dt: T,
    cfg: &ForwardConfig<T>,
) -> Result<(LegendreFrame<T>, StepResult<T>)> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    cfg.validate()?;
    let op = TridiagonalOperator::second_derivative(&f.p);
    let d_old = nonlinear_coef(&f.p, &f.c_star, s, f.t, cfg)?;
    let t_new = f.t + dt;
    let step = picard_iterate(&op, &f.c_star, &d_old, dt, t_new, cfg, |c, t| {
        nonlinear_coef(&f.p, c, s, t, cfg)
    })?;
    let mut next = f.with_values(step.c_star.clone(), t_new, cfg.gamma_floor);
    next.c_star_gamma = frame_gamma(&next.p, &next.c_star, cfg.smoothing, cfg.gamma_floor)?;
    Ok((next, step))
}

/// `v = √D` with entries at the floor masked to zero and zero endpoints.
fn delta_vol_from_coef<T: Real>(d: &[T], gamma: &[T], floor: T) -> Vec<T> {
    let n = d.len();
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 || gamma[i] <= floor || !d[i].is_finite() {
                T::zero()
            } else {
                d[i].max(T::zero()).sqrt()
            }
        })
        .collect()
}

fn collect_diagnostics<T: Real>(
    out: &mut Vec<IterationDiagnostic>,
    step: usize,
    op: &TridiagonalOperator<T>,
    samples: &[(usize, Vec<T>)],
    a_max: f64,
    h: f64,
    dt: f64,
) -> Result<()> {
    for (k, scale) in samples {
        out.push(IterationDiagnostic {
            step,
            iteration: *k,
            report: stability_report(op, scale, a_max, h, dt)?,
        });
    }
    Ok(())
}

/// Largest `â` seen along a map.
fn vol_max<T: Real>(s: &VolSurface<T>, x: &[T], t: T) -> f64 {
    s.vol_hat(x, t).iter().fold(0.0, |m, a| m.max(a.as_f64()))
}

fn check_march<T: Real>(maturity: T, steps: usize) -> Result<T> {
    if !(maturity > T::zero()) || steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "need a positive horizon and at least one step".into(),
        });
    }
    Ok(maturity / T::from_usize_lossy(steps))
}

/// Solves `c*₂ c*₁₁ = ½ â²(c*₁, t)` forward from `frame0` to `maturity`.
pub fn solve_forward_nonlinear<T: Real>(
    frame0: &LegendreFrame<T>,
    s: &VolSurface<T>,
    maturity: T,
    steps: usize,
    cfg: &ForwardConfig<T>,
) -> std::result::Result<ForwardTrajectory<T>, ForwardError<T>> {
    cfg.validate()?;
    let dt = check_march(maturity - frame0.t, steps)?;
    let op = TridiagonalOperator::second_derivative(&frame0.p);
    let h = frame0.p.max_step().as_f64();
    let mut first = frame0.clone();
    first.c_star_gamma = frame_gamma(&first.p, &first.c_star, cfg.smoothing, cfg.gamma_floor)?;
    let d0 = nonlinear_coef(&first.p, &first.c_star, s, first.t, cfg)?;
    let mut traj = ForwardTrajectory {
        delta_vol: vec![delta_vol_from_coef(&d0, &first.c_star_gamma, cfg.gamma_floor)],
        frames: vec![first],
        report: IterationReport::new(cfg.tolerance, cfg.smoothing),
        diagnostics: Vec::new(),
    };
    for k in 0..steps {
        let f = &traj.frames[k];
        let (next, step) = picard_solve_step(f, s, dt, cfg)?;
        if cfg.diagnostics.is_some() {
            let a_max = vol_max(s, &x_of_p(f), f.t);
            collect_diagnostics(&mut traj.diagnostics, k, &op, &step.diagnostics, a_max, h, dt.as_f64())?;
        }
        if !step.converged {
            let last = step.history.last().map(|x| x.as_f64()).unwrap_or(f64::NAN);
            return Err(ForwardError::Diverged {
                step: k,
                iterations: step.iterations,
                last,
                history: step.history,
                partial: Box::new(traj),
            });
        }
        traj.report.counts.push(step.iterations);
        traj.report.residuals.push(step.history);
        let d = nonlinear_coef(&next.p, &next.c_star, s, next.t, cfg)?;
        traj.delta_vol.push(delta_vol_from_coef(&d, &next.c_star_gamma, cfg.gamma_floor));
        traj.frames.push(next);
    }
    Ok(traj)
}

/// Delta volatility `v² = c₁₁(x(p), t) a²(x(p), t) / c*₁₁(p, t)`, with the
/// backward gammas taken at time `t` (linear in time between levels) and
/// re-interpolated in spot onto the frame's recomputed map.
pub fn delta_vol_from_backward<T: Real>(
    sol: &PdeSolution<T>,
    f: &LegendreFrame<T>,
    s: &VolSurface<T>,
    t: T,
    gamma_floor: T,
) -> Vec<T> {
    let d = linear_coef(sol, &f.p, &f.c_star, s, t, false, gamma_floor).expect("frame arrays match its grid");
    let g = dual_gamma(f, gamma_floor);
    delta_vol_from_coef(&d, &g, gamma_floor)
}

fn linear_coef<T: Real>(
    sol: &PdeSolution<T>,
    p: &Grid<T>,
    c: &[T],
    s: &VolSurface<T>,
    t: T,
    smoothing: bool,
    gamma_floor: T,
) -> Result<Vec<T>> {
    let x = crate::grid::first_derivative(p, c)?;
    let gam = pchip(sol.grid.nodes(), &sol.gamma_at(t), &x);
    let a = s.vol_hat(&x, t);
    let g = frame_gamma(p, c, smoothing, gamma_floor)?;
    Ok((0..p.len())
        .map(|i| (gam[i] * a[i] * a[i] / g[i]).max(T::zero()))
        .collect())
}

/// One step of the linear dual equation with a given delta volatility
/// (`D = v²`, no iteration).
pub fn step_linear_dual<T: Real>(f: &LegendreFrame<T>, v: &[T], dt: T, cfg: &ForwardConfig<T>) -> Result<LegendreFrame<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let op = TridiagonalOperator::second_derivative(&f.p);
    let scale: Vec<T> = v.iter().map(|&v| T::half() * dt * v * v).collect();
    let c = propagate(&op, &scale, &f.c_star, cfg.propagator)?;
    Ok(f.with_values(c, f.t + dt, cfg.gamma_floor))
}

/// Solves `c*₂ = ½ v² c*₁₁` forward with `v` rebuilt at every iteration from
/// the backward gammas along the evolving map `x = c*₁`.
pub fn solve_forward_linear<T: Real>(
    frame0: &LegendreFrame<T>,
    sol: &PdeSolution<T>,
    s: &VolSurface<T>,
    maturity: T,
    steps: usize,
    cfg: &ForwardConfig<T>,
) -> std::result::Result<ForwardTrajectory<T>, ForwardError<T>> {
    cfg.validate()?;
    let dt = check_march(maturity - frame0.t, steps)?;
    let op = TridiagonalOperator::second_derivative(&frame0.p);
    let h = frame0.p.max_step().as_f64();
    let p = frame0.p.clone();
    let coef = |c: &[T], t: T| linear_coef(sol, &p, c, s, t, cfg.smoothing, cfg.gamma_floor);
    let mut first = frame0.with_values(frame0.c_star.clone(), frame0.t, cfg.gamma_floor);
    first.c_star_gamma = frame_gamma(&p, &first.c_star, cfg.smoothing, cfg.gamma_floor)?;
    let d0 = coef(&first.c_star, first.t)?;
    let mut traj = ForwardTrajectory {
        delta_vol: vec![delta_vol_from_coef(&d0, &first.c_star_gamma, cfg.gamma_floor)],
        frames: vec![first],
        report: IterationReport::new(cfg.tolerance, cfg.smoothing),
        diagnostics: Vec::new(),
    };
    let mut d_old = d0;
    for k in 0..steps {
        let f = &traj.frames[k];
        let t_new = f.t + dt;
        let step = picard_iterate(&op, &f.c_star, &d_old, dt, t_new, cfg, coef)?;
        if cfg.diagnostics.is_some() {
            let a_max = vol_max(s, &x_of_p(f), f.t);
            collect_diagnostics(&mut traj.diagnostics, k, &op, &step.diagnostics, a_max, h, dt.as_f64())?;
        }
        if !step.converged {
            let last = step.history.last().map(|x| x.as_f64()).unwrap_or(f64::NAN);
            return Err(ForwardError::Diverged {
                step: k,
                iterations: step.iterations,
                last,
                history: step.history,
                partial: Box::new(traj),
            });
        }
        let mut next = f.with_values(step.c_star, t_new, cfg.gamma_floor);
        next.c_star_gamma = frame_gamma(&p, &next.c_star, cfg.smoothing, cfg.gamma_floor)?;
        d_old = coef(&next.c_star, t_new)?;
        traj.report.counts.push(step.iterations);
        traj.report.residuals.push(step.history);
        traj.delta_vol.push(delta_vol_from_coef(&d_old, &next.c_star_gamma, cfg.gamma_floor));
        traj.frames.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quad_frame(kappa: f64) -> LegendreFrame<f64> {
        let p = Grid::uniform(41, 0.01, 0.99).unwrap();
        let c: Vec<f64> = p.nodes().iter().map(|&p| 0.5 * kappa * (p * p - p)).collect();
        LegendreFrame {
            p: p.clone(),
            c_star: c,
            x_map: vec![0.0; 41],
            c_star_gamma: vec![kappa; 41],
            t: 0.0,
        }
    }

    #[test]
    fn diffusion_coefficient_scaling() {
        let s = VolSurface::constant(0.4).unwrap();
        let f = quad_frame(2.0);
        let d = diffusion_coefficient(&f, &s, 0.0, 1e-8);
        assert!(d.iter().all(|&d| (d - 0.04).abs() < 1e-14));
        let mut g = quad_frame(2.0);
        g.c_star_gamma = vec![4.0; 41];
        let d2 = diffusion_coefficient(&g, &s, 0.0, 1e-8);
        for (a, b) in d.iter().zip(&d2) {
            assert_relative_eq!(*a, 4.0 * b, max_relative = 1e-14);
        }
        // ½ D c*₁₁ = ½ â² / c*₁₁
        for (&di, &gi) in d.iter().zip(&f.c_star_gamma) {
            assert_relative_eq!(0.5 * di * gi, 0.5 * 0.16 / gi, max_relative = 1e-14);
        }
    }

    #[test]
    fn quartic_fit_is_exact() {
        let p = Grid::clustered(30, 0.001, 0.999, 0.5, 3.0).unwrap();
        let c: Vec<f64> = p.nodes().iter().map(|&p: &f64| -0.3 + p - 2.0 * p * p + 0.7 * p.powi(3) + 1.1 * p.powi(4)).collect();
        let g = smooth_gamma_poly4(&p, &c, 1e-8).unwrap();
        for (&x, &gi) in p.nodes().iter().zip(&g) {
            let want = (-4.0 + 4.2 * x + 13.2 * x * x).max(1e-8);
            assert!((gi - want).abs() < 1e-10, "{gi} vs {want}");
        }
        let q: Vec<f64> = p.nodes().iter().map(|&p| 3.0 * p * p).collect();
        assert!(smooth_gamma_poly4(&p, &q, 1e-8).unwrap().iter().all(|&g| (g - 6.0).abs() < 1e-10));
        assert!(smooth_gamma_poly4(&p, &[1.0; 30], 1e-8).unwrap().iter().all(|&g| g == 1e-8));
        let small = Grid::uniform(5, 0.0, 1.0).unwrap();
        assert!(matches!(smooth_gamma_poly4(&small, &[0.0; 5], 1e-8), Err(Error::FitTooSmall { .. })));
    }

    #[test]
    fn quartic_fit_filters_noise() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(3);
        let p = Grid::uniform(200, 0.0, 1.0).unwrap();
        let c: Vec<f64> = p
            .nodes()
            .iter()
            .map(|&p| 0.8 * p * p + 1e-6 * (rng.gen::<f64>() - 0.5))
            .collect();
        let g = smooth_gamma_poly4(&p, &c, 1e-8).unwrap();
        assert!(g.iter().all(|&g| (g - 1.6).abs() < 1e-3));
    }

    #[test]
    fn zero_frame_is_a_fixed_point() {
        let s = VolSurface::constant(0.5).unwrap();
        let mut f = quad_frame(1.0);
        f.c_star = vec![0.0; 41];
        let cfg = ForwardConfig::default();
        let (next, step) = picard_solve_step(&f, &s, 0.01, &cfg).unwrap();
        assert_eq!(step.iterations, 1);
        assert!(next.c_star.iter().all(|&c| c == 0.0));
        let traj = solve_forward_nonlinear(&f, &s, 0.1, 5, &cfg).unwrap();
        assert!(traj.frames.iter().all(|f| f.c_star.iter().all(|&c| c == 0.0)));
        assert_eq!(traj.frames.len(), 6);
    }

    #[test]
    fn linear_step_properties() {
        let f = quad_frame(2.0);
        let cfg = ForwardConfig::default();
        let same = step_linear_dual(&f, &[0.0; 41], 0.01, &cfg).unwrap();
        assert_eq!(same.c_star, f.c_star);
        let mut z = f.clone();
        z.c_star = vec![0.0; 41];
        let zz = step_linear_dual(&z, &[0.3; 41], 0.01, &cfg).unwrap();
        assert!(zz.c_star.iter().all(|&c| c == 0.0));
        let up = step_linear_dual(&f, &[0.3; 41], 0.01, &cfg).unwrap();
        for i in 1..40 {
            assert!(up.c_star[i] >= f.c_star[i]);
            assert!(up.c_star[i] <= 0.0);
        }
    }

    #[test]
    fn steady_state_median() {
        let r = IterationReport {
            counts: vec![50, 20, 9, 7, 6, 3, 2, 3, 4, 3],
            residuals: vec![],
            tolerance: 1e-8,
            smoothing: true,
        };
        assert_eq!(r.steady_state(), 3);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ForwardConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.tolerance = 0.0;
        assert!(cfg.validate().is_err());
    }
}
