//! The acceptance checks, runnable from tests and from the command line.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::analytic::{displaced_call, displaced_cstar_of_p, lipton_solution, residual_fk, residual_nl1, LiptonParams};
use crate::backward::PdeSolution;
use crate::diagnostics::{check_metzler, laplacian_norm, spectral_contraction, stability_bounds, sup_contraction};
use crate::error::Result;
use crate::experiment::{initial_frame, Experiment};
use crate::forward::{solve_forward_linear, solve_forward_nonlinear, ForwardConfig, ForwardError, ForwardTrajectory};
use crate::grid::{expm_apply, Grid, TridiagonalOperator};
use crate::interp::pchip;
use crate::legendre::{fenchel_conjugate, from_dual, LegendreFrame};
use crate::volatility::VolSurface;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub seconds: f64,
    pub time_limit: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2}s, limit {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.seconds,
            self.time_limit
        )
    }
}

fn timed<F: FnOnce() -> (bool, String)>(id: usize, name: &'static str, time_limit: f64, f: F) -> CheckResult {
    let start = Instant::now();
    let (ok, measured) = f();
    let seconds = start.elapsed().as_secs_f64();
    CheckResult {
        id,
        name,
        passed: ok && seconds < time_limit,
        measured,
        seconds,
        time_limit,
    }
}

fn failed(e: impl std::fmt::Display) -> (bool, String) {
    (false, format!("error: {e}"))
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Second-difference error on `sin(πp)` at h = 1/100 and 1/200.
pub fn stencil_order() -> CheckResult {
    timed(1, "stencil order", 1.0, || {
        let err = |n: usize| -> f64 {
            let g = Grid::uniform(n + 1, 0.0, 1.0).expect("valid grid");
            let pi = std::f64::consts::PI;
            let f: Vec<f64> = g.nodes().iter().map(|&p| (pi * p).sin()).collect();
            let d = TridiagonalOperator::second_derivative(&g).apply(&f).expect("sizes match");
            (1..n)
                .map(|i| (d[i] + pi * pi * f[i]).abs())
                .fold(0.0, f64::max)
        };
        let q = order(err(100), err(200));
        (q >= 1.9, format!("order {q:.4} (need >= 1.9)"))
    })
}

/// Random positive scales on random 50-node grids.
pub fn metzler_contraction() -> CheckResult {
    timed(2, "Metzler and contraction", 10.0, || {
        let mut rng = StdRng::seed_from_u64(2024);
        let (mut metzler, mut contract, mut sign) = (0, 0, 0);
        let (mut worst_two, mut worst_sup) = (0.0f64, 0.0f64);
        let cases = 100;
        for _ in 0..cases {
            let center = rng.gen_range(0.1..0.9);
            let density = rng.gen_range(0.05..2.0);
            let g = Grid::clustered(50, 0.0, 1.0, center, density).expect("valid grid");
            let op = TridiagonalOperator::second_derivative(&g);
            let mag = 10f64.powf(rng.gen_range(-6.0..-2.0));
            let scale: Vec<f64> = (0..50).map(|_| rng.gen_range(1e-3..1.0) * mag).collect();
            match check_metzler(&op, &scale) {
                Ok(true) => metzler += 1,
                Ok(false) => {}
                Err(e) => return failed(e),
            }
            let (two, sup) = match (spectral_contraction(&op, &scale), sup_contraction(&op, &scale)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return failed(e),
            };
            worst_two = worst_two.max(two);
            worst_sup = worst_sup.max(sup);
            if two < 1.0 {
                contract += 1;
            }
            let v: Vec<f64> = (0..50).map(|_| -rng.gen::<f64>()).collect();
            match expm_apply(&op, &scale, &v) {
                Ok(w) if w.iter().all(|&x| x <= 0.0) => sign += 1,
                Ok(_) => {}
                Err(e) => return failed(e),
            }
        }
        (
            metzler == cases && contract == cases && sign == cases,
            format!(
                "metzler {metzler}/{cases}, 2-norm < 1 in {contract}/{cases} (max {worst_two:.6}), \
                 sign kept {sign}/{cases}; sup-norm max {worst_sup:.15}"
            ),
        )
    })
}

/// Closed form against the dense symmetric eigensolver.
pub fn laplacian_formula() -> CheckResult {
    timed(3, "Laplacian norm formula", 5.0, || {
        let mut worst = 0.0f64;
        for n in [3usize, 10, 50] {
            let h = 1.0 / (n + 1) as f64;
            let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
                0 => -2.0 / (h * h),
                1 => 1.0 / (h * h),
                _ => 0.0,
            });
            let top = m.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            worst = worst.max((laplacian_norm(h, n) - top).abs() / top);
        }
        (worst <= 1e-10, format!("max relative deviation {worst:.3e} (need <= 1e-10)"))
    })
}

fn displaced_backward() -> Result<(Experiment, VolSurface<f64>, PdeSolution<f64>)> {
    let e = Experiment::displaced();
    let s = e.default_surface()?;
    let sol = e.backward(&s)?;
    Ok((e, s, sol))
}

/// Error relative to `max(c, 1e-3 K)` at interior nodes with `|x| > 0.05 K`.
pub fn displaced_backward_check() -> CheckResult {
    timed(4, "displaced backward", 30.0, || {
        let (e, _, sol) = match displaced_backward() {
            Ok(r) => r,
            Err(err) => return failed(err),
        };
        let prm = match e.displaced_params() {
            Ok(p) => p,
            Err(err) => return failed(err),
        };
        let x = sol.grid.nodes();
        let mut worst = 0.0f64;
        let mut at = 0.0;
        for i in 1..x.len() - 1 {
            if x[i].abs() <= 0.05 * e.strike {
                continue;
            }
            let exact = match displaced_call(x[i], 0.0, &prm) {
                Ok(c) => c,
                Err(err) => return failed(err),
            };
            let r = (sol.values[0][i] - exact).abs() / exact.max(1e-3 * e.strike);
            if r > worst {
                worst = r;
                at = x[i];
            }
        }
        (worst <= 1e-3, format!("max relative error {worst:.3e} at x = {at:.2} (need <= 1e-3)"))
    })
}

/// Residual of the pricing equation on the closed form under h-halving.
pub fn feynman_kac_order() -> CheckResult {
    timed(5, "Feynman-Kac residual order", 5.0, || {
        let prm = match Experiment::displaced().displaced_params() {
            Ok(p) => p,
            Err(err) => return failed(err),
        };
        let mut worst = f64::INFINITY;
        for &(x, t) in &[(-30.0, 0.5), (-10.0, 0.2), (25.0, 0.5), (60.0, 0.8)] {
            let r = |h: f64| residual_fk(x, t, h, h * 1e-3, &prm).map(f64::abs);
            match (r(2.0), r(1.0)) {
                (Ok(c), Ok(f)) => worst = worst.min(order(c, f)),
                (Err(e), _) | (_, Err(e)) => return failed(e),
            }
        }
        (worst >= 1.9, format!("smallest observed order {worst:.4} (need >= 1.9)"))
    })
}

/// 20x20 lattice with λ = 1, μ̄ = 0.5.
pub fn lipton_check() -> CheckResult {
    timed(6, "Lipton closed form", 1.0, || {
        let prm = LiptonParams { lambda: 1.0, mu_bar: 0.5 };
        let j = |xi: f64, pi: f64| lipton_solution(xi, pi, &prm);
        let mut worst = 0.0f64;
        let mut initial = 0.0f64;
        for a in 0..20 {
            let xi = 0.05 + 0.95 * a as f64 / 19.0;
            for b in 0..20 {
                let pi = -2.0 + 5.0 * b as f64 / 19.0;
                let r = match residual_nl1(j, xi, pi, prm.mu_bar, 1e-4) {
                    Ok(r) => r,
                    Err(e) => return failed(e),
                };
                let g = (prm.mu_bar * prm.mu_bar * xi).exp();
                let scale = (prm.mu_bar * prm.mu_bar * g * (pi - 0.5).powi(2)).max(1e-8);
                worst = worst.max(r / scale);
                initial = initial.max((j(0.0, pi) - (pi * pi - prm.lambda * pi)).abs());
            }
        }
        (
            worst < 1e-6 && initial == 0.0,
            format!("max relative residual {worst:.3e} (need < 1e-6), initial mismatch {initial:e}"),
        )
    })
}

fn table1_backward() -> Result<(Experiment, VolSurface<f64>, PdeSolution<f64>)> {
    let e = Experiment::table1();
    let s = e.default_surface()?;
    let sol = e.backward(&s)?;
    Ok((e, s, sol))
}

/// Roundtrip, Fenchel inequality and reciprocal gammas on the table run.
pub fn legendre_check() -> CheckResult {
    timed(7, "Legendre machinery", 10.0, || {
        let (_, _, sol) = match table1_backward() {
            Ok(r) => r,
            Err(e) => return failed(e),
        };
        let f = match initial_frame(&sol) {
            Ok(f) => f,
            Err(e) => return failed(e),
        };
        let n_x = sol.grid.len();
        let first = sol.grid.nodes().iter().position(|&x| x == f.x_map[0]).expect("map nodes come from the grid");
        let back = from_dual(&f);
        let roundtrip = back
            .iter()
            .enumerate()
            .map(|(i, &c)| (c - sol.values[0][first + i]).abs())
            .fold(0.0, f64::max);
        let x = sol.grid.nodes();
        let c = &sol.values[0];
        let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut fenchel_bad = 0usize;
        for (i, &p) in f.p.nodes().iter().enumerate() {
            for j in 0..n_x {
                if p * x[j] > c[j] + f.c_star[i] + 1e-10 * scale {
                    fenchel_bad += 1;
                }
            }
            let brute = fenchel_conjugate(x, c, p);
            if brute > f.c_star[i] + 1e-10 * scale {
                fenchel_bad += 1;
            }
        }
        let recip = reciprocal_gamma_error(&f, &sol);
        (
            roundtrip <= 1e-12 && fenchel_bad == 0 && recip <= 0.05,
            format!(
                "roundtrip {roundtrip:.2e} (need <= 1e-12), Fenchel violations {fenchel_bad}, \
                 reciprocal gamma error {recip:.4} on the middle 80% (need <= 0.05)"
            ),
        )
    })
}

/// `|c*₁₁ · c₁₁(x(p)) - 1|` with the stencil dual gamma, middle 80% of nodes.
fn reciprocal_gamma_error(f: &LegendreFrame<f64>, sol: &PdeSolution<f64>) -> f64 {
    let dual = crate::legendre::dual_gamma(f, crate::legendre::GAMMA_FLOOR);
    let primal = pchip(sol.grid.nodes(), &sol.gammas[0], &f.x_map);
    let n = f.len();
    let cut = n / 10;
    (cut.max(1)..n - cut.max(1))
        .map(|i| (dual[i] * primal[i] - 1.0).abs())
        .fold(0.0, f64::max)
}

fn ratio_and_shape(tr: &ForwardTrajectory<f64>) -> (f64, f64, f64) {
    let m0 = tr.frames[0].max_abs();
    let ratio = tr.frames.last().map(|f| f.max_abs()).unwrap_or(f64::NAN) / m0;
    let positive = tr
        .frames
        .iter()
        .flat_map(|f| f.c_star.iter())
        .fold(f64::NEG_INFINITY, |m, &c| m.max(c));
    let growth = tr
        .frames
        .windows(2)
        .flat_map(|w| w[0].c_star.iter().zip(&w[1].c_star).map(|(a, b)| b.abs() - a.abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    (ratio, positive, growth)
}

fn table1_forward(smoothing: bool, tolerance: f64) -> std::result::Result<ForwardTrajectory<f64>, String> {
    let (e, s, sol) = table1_backward().map_err(|e| e.to_string())?;
    let f0 = initial_frame(&sol).map_err(|e| e.to_string())?;
    let cfg = ForwardConfig {
        smoothing,
        tolerance,
        ..ForwardConfig::default()
    };
    solve_forward_nonlinear(&f0, &s, e.maturity, e.n_time, &cfg).map_err(|e| e.to_string())
}

/// Terminal decay, negativity and per-node monotone decay.
pub fn nonlinear_terminal() -> CheckResult {
    timed(8, "nonlinear forward terminal condition", 120.0, || {
        let tr = match table1_forward(true, 1e-8) {
            Ok(t) => t,
            Err(e) => return failed(e),
        };
        let (ratio, positive, growth) = ratio_and_shape(&tr);
        (
            ratio <= 0.01 && positive <= 1e-12 && growth <= 1e-12,
            format!(
                "max|c*(T)|/max|c*(0)| = {ratio:.4} (need <= 0.01), max c* = {positive:.3e}, \
                 max per-node growth of |c*| = {growth:.3e}"
            ),
        )
    })
}

/// Steady-state Picard counts with smoothing, first-step blow-up without.
pub fn iteration_counts() -> CheckResult {
    timed(9, "Picard iteration counts", 300.0, || {
        let on = match table1_forward(true, 1e-8) {
            Ok(t) => t.report,
            Err(e) => return failed(e),
        };
        let (off_first, off_steady, off_note) = match table1_forward(false, 1e-5) {
            Ok(t) => (t.report.counts[0], t.report.steady_state(), String::new()),
            Err(e) => (0, 0, format!(" ({e})")),
        };
        let steady = on.steady_state();
        let ratio = off_first as f64 / off_steady.max(1) as f64;
        (
            steady <= 5 && off_steady > 0 && ratio >= 10.0,
            format!(
                "smoothing on: steady {steady} (need <= 5); smoothing off: first {off_first}, \
                 steady {off_steady}, ratio {ratio:.2} (need >= 10){off_note}"
            ),
        )
    })
}

/// Number of sign changes in the discrete slope, ignoring flat segments.
pub fn slope_sign_changes(v: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for w in v.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && d.signum() != last.signum() {
            changes += 1;
        }
        last = d;
    }
    changes
}

fn shape_violations(tr: &ForwardTrajectory<f64>, horizon: f64) -> (usize, usize, usize) {
    let (mut ends, mut negative, mut peaks) = (0, 0, 0);
    for (f, v) in tr.frames.iter().zip(&tr.delta_vol) {
        if f.t > horizon + 1e-12 {
            continue;
        }
        if v[0] != 0.0 || v[v.len() - 1] != 0.0 {
            ends += 1;
        }
        if v.iter().any(|&x| x < 0.0) {
            negative += 1;
        }
        if slope_sign_changes(v) > 1 {
            peaks += 1;
        }
    }
    (ends, negative, peaks)
}

/// Delta volatility vanishes at the ends, is nonnegative and single-peaked.
pub fn delta_vol_shape() -> CheckResult {
    timed(10, "delta-vol shape", 120.0, || {
        let (e, s, sol) = match table1_backward() {
            Ok(r) => r,
            Err(err) => return failed(err),
        };
        let f0 = match initial_frame(&sol) {
            Ok(f) => f,
            Err(err) => return failed(err),
        };
        let cfg = ForwardConfig::default();
        let horizon = 0.9 * e.maturity;
        let mut parts = Vec::new();
        let mut ok = true;
        let runs: [(&str, std::result::Result<ForwardTrajectory<f64>, ForwardError<f64>>); 2] = [
            ("linear", solve_forward_linear(&f0, &sol, &s, e.maturity, e.n_time, &cfg)),
            ("nonlinear", solve_forward_nonlinear(&f0, &s, e.maturity, e.n_time, &cfg)),
        ];
        for (label, run) in runs {
            let (run, note) = match run {
                Ok(tr) => (Ok(tr), String::new()),
                // levels before a late divergence still describe the run
                Err(ForwardError::Diverged { step, partial, .. }) => {
                    (Ok(*partial), format!(" (diverged at step {step}, partial trajectory)"))
                }
                Err(err) => (Err(err), String::new()),
            };
            match run {
                Ok(tr) => {
                    let levels = tr.frames.iter().filter(|f| f.t <= horizon + 1e-12).count();
                    let (ends, neg, peaks) = shape_violations(&tr, horizon);
                    ok &= ends == 0 && neg == 0 && peaks == 0;
                    parts.push(format!(
                        "{label}: {levels} levels, nonzero ends {ends}, negative {neg}, multi-peaked {peaks}{note}"
                    ));
                    ok &= tr.frames.last().map_or(false, |f| f.t >= horizon - 1e-12);
                }
                Err(err) => {
                    ok = false;
                    parts.push(format!("{label}: {err}"));
                }
            }
        }
        (ok, parts.join("; "))
    })
}

/// Nonlinear forward run under the displaced model against its closed form.
pub fn displaced_forward() -> CheckResult {
    timed(11, "nonlinear forward vs closed form", 120.0, || {
        let (e, s, sol) = match displaced_backward() {
            Ok(r) => r,
            Err(err) => return failed(err),
        };
        let prm = match e.displaced_params() {
            Ok(p) => p,
            Err(err) => return failed(err),
        };
        let f0 = match initial_frame(&sol) {
            Ok(f) => f,
            Err(err) => return failed(err),
        };
        let tr = match solve_forward_nonlinear(&f0, &s, e.maturity, e.n_time, &ForwardConfig::default()) {
            Ok(t) => t,
            Err(err) => return failed(err),
        };
        let cut = 1e-3 * e.strike;
        let mut worst = 0.0f64;
        let mut at = (0.0, 0.0);
        for f in &tr.frames {
            for (&p, &c) in f.p.nodes().iter().zip(&f.c_star) {
                let exact = displaced_cstar_of_p(p, f.t, &prm);
                if exact.abs() > cut {
                    let r = (c - exact).abs() / exact.abs();
                    if r > worst {
                        worst = r;
                        at = (p, f.t);
                    }
                }
            }
        }
        (
            worst <= 0.01,
            format!("max relative error {worst:.4} at p = {:.4}, t = {:.2} (need <= 0.01)", at.0, at.1),
        )
    })
}

/// Relaxed time-step bound on the table run's delta grid.
pub fn stability_margin() -> CheckResult {
    timed(12, "stability bound", 1.0, || {
        let e = Experiment::table1();
        let s = match e.default_surface() {
            Ok(s) => s,
            Err(err) => return failed(err),
        };
        let sol = match e.backward(&s) {
            Ok(s) => s,
            Err(err) => return failed(err),
        };
        let f0 = match initial_frame(&sol) {
            Ok(f) => f,
            Err(err) => return failed(err),
        };
        let a_max = s.max_value().unwrap_or(f64::NAN);
        let h = f0.p.max_step();
        let dt = e.maturity / e.n_time as f64;
        let b = stability_bounds(a_max, h, f0.len() - 2, dt);
        (
            b.relaxed_ok && b.margin >= 1e4,
            format!("relaxed_ok {} with margin {:.3e} (need >= 1e4), a_max {a_max}, h {h:.4e}", b.relaxed_ok, b.margin),
        )
    })
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        stencil_order(),
        metzler_contraction(),
        laplacian_formula(),
        displaced_backward_check(),
        feynman_kac_order(),
        lipton_check(),
        legendre_check(),
        nonlinear_terminal(),
        iteration_counts(),
        delta_vol_shape(),
        displaced_forward(),
        stability_margin(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_change_counter() {
        assert_eq!(slope_sign_changes(&[0.0, 1.0, 2.0, 2.0, 1.0, 0.0]), 1);
        assert_eq!(slope_sign_changes(&[0.0, 1.0, 0.5, 1.0, 0.0]), 3);
        assert_eq!(slope_sign_changes(&[0.0, 0.0, 0.0]), 0);
    }
}
