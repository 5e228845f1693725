//! Discrete Legendre transform between spot space and delta space.
//!
//! For a convex price `c(x)` the conjugate at delta `p = c₁(x)` is
//! `c*(p) = p x - c(x)`, with `∂c*/∂p = x` and `∂²c*/∂p² = 1 / c₁₁`.

use std::io::Write;
use std::path::Path;

use crate::backward::PdeSolution;
use crate::error::{Error, Result};
use crate::grid::{first_derivative, second_derivative, Grid};
use crate::scalar::Real;

/// Deltas closer than this to 0 or 1 are dropped from the delta grid.
pub const P_MIN: f64 = 1e-4;

/// Default floor for dual gammas.
pub const GAMMA_FLOOR: f64 = 1e-8;

/// Conjugate representation at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreFrame<T> {
    pub p: Grid<T>,
    pub c_star: Vec<T>,
    /// `x(p, t)`; the spot nodes the deltas came from, or a recomputed map.
    pub x_map: Vec<T>,
    pub c_star_gamma: Vec<T>,
    pub t: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions<T> {
    pub p_min: T,
    pub gamma_floor: T,
}

impl<T: Real> Default for DualOptions<T> {
    fn default() -> Self {
        Self {
            p_min: T::lit(P_MIN),
            gamma_floor: T::lit(GAMMA_FLOOR),
        }
    }
}

/// Builds the conjugate frame from one level of a primal solution using the
/// deltas themselves as the delta grid.
///
/// Only interior nodes with `p_min <= c₁ <= 1 - p_min` are kept. The kept
/// deltas must be strictly increasing. Where the primal gamma is above the
/// floor the dual gamma is its reciprocal, elsewhere it falls back to the
/// difference stencil on `c*`.
pub fn to_dual<T: Real>(
    x: &Grid<T>,
    values: &[T],
    deltas: &[T],
    gammas: &[T],
    t: T,
    opts: DualOptions<T>,
) -> Result<LegendreFrame<T>> {
    let n = x.len();
    for len in [values.len(), deltas.len(), gammas.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let lo = opts.p_min;
    let hi = T::one() - opts.p_min;
    let keep: Vec<usize> = (1..n - 1).filter(|&i| deltas[i] >= lo && deltas[i] <= hi).collect();
    if keep.len() < 3 {
        return Err(Error::DegenerateMap(keep.len()));
    }
    for w in keep.windows(2) {
        if !(deltas[w[1]] > deltas[w[0]]) {
            return Err(Error::NonMonotoneDelta(w[1]));
        }
    }
    // a monotone run that skips nodes would silently drop a fold
    if let Some(w) = keep.windows(2).find(|w| w[1] != w[0] + 1) {
        return Err(Error::NonMonotoneDelta(w[0] + 1));
    }
    let p = Grid::from_nodes(keep.iter().map(|&i| deltas[i]).collect())?;
    let x_map: Vec<T> = keep.iter().map(|&i| x.nodes()[i]).collect();
    let c_star: Vec<T> = keep
        .iter()
        .map(|&i| deltas[i] * x.nodes()[i] - values[i])
        .collect();
    let stencil = second_derivative(&p, &c_star)?;
    let c_star_gamma = keep
        .iter()
        .zip(&stencil)
        .map(|(&i, &s)| {
            if gammas[i] > opts.gamma_floor {
                T::one() / gammas[i]
            } else {
                s.max(opts.gamma_floor)
            }
        })
        .collect();
    Ok(LegendreFrame {
        p,
        c_star,
        x_map,
        c_star_gamma,
        t,
    })
}

/// [`to_dual`] applied to a stored level of a backward solution.
pub fn frame_from_solution<T: Real>(sol: &PdeSolution<T>, level: usize, opts: DualOptions<T>) -> Result<LegendreFrame<T>> {
    if level >= sol.levels() {
        return Err(Error::LevelOutOfRange {
            level,
            levels: sol.levels(),
        });
    }
    to_dual(
        &sol.grid,
        &sol.values[level],
        &sol.deltas[level],
        &sol.gammas[level],
        sol.times[level],
        opts,
    )
}

/// Primal values at the frame's map: `c = p x - c*`.
pub fn from_dual<T: Real>(f: &LegendreFrame<T>) -> Vec<T> {
    f.p.nodes()
        .iter()
        .zip(&f.x_map)
        .zip(&f.c_star)
        .map(|((&p, &x), &cs)| p * x - cs)
        .collect()
}

/// Map `x(p) = ∂c*/∂p` recomputed from `c*` by differences on the delta grid.
pub fn x_of_p<T: Real>(f: &LegendreFrame<T>) -> Vec<T> {
    first_derivative(&f.p, &f.c_star).expect("frame arrays match its grid")
}

/// Unfloored difference stencil `∂²c*/∂p²`.
pub fn dual_gamma_raw<T: Real>(f: &LegendreFrame<T>) -> Vec<T> {
    second_derivative(&f.p, &f.c_star).expect("frame arrays match its grid")
}

/// `∂²c*/∂p²` by the three-point stencil, floored at `gamma_floor`.
pub fn dual_gamma<T: Real>(f: &LegendreFrame<T>, gamma_floor: T) -> Vec<T> {
    dual_gamma_raw(f).into_iter().map(|g| g.max(gamma_floor)).collect()
}

/// Brute-force conjugate `sup_j (p x_j - c_j)` over sampled points.
pub fn fenchel_conjugate<T: Real>(x: &[T], c: &[T], p: T) -> T {
    x.iter()
        .zip(c)
        .fold(T::neg_infinity(), |m, (&xj, &cj)| m.max(p * xj - cj))
}

impl<T: Real> LegendreFrame<T> {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Largest `|c*|` on the frame.
    pub fn max_abs(&self) -> T {
        crate::scalar::sup_norm(&self.c_star)
    }

    /// Same delta grid with new conjugate values; the map and dual gamma are
    /// recomputed by differences.
    pub fn with_values(&self, c_star: Vec<T>, t: T, gamma_floor: T) -> Self {
        let mut f = Self {
            p: self.p.clone(),
            c_star,
            x_map: Vec::new(),
            c_star_gamma: Vec::new(),
            t,
        };
        f.x_map = x_of_p(&f);
        f.c_star_gamma = dual_gamma(&f, gamma_floor);
        f
    }

    /// Writes `p,c_star,x_map,c_star_gamma,t`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "c_star", "x_map", "c_star_gamma", "t"])?;
        for i in 0..self.len() {
            w.write_record(&[
                self.p.nodes()[i].to_string(),
                self.c_star[i].to_string(),
                self.x_map[i].to_string(),
                self.c_star_gamma[i].to_string(),
                self.t.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Sampled map `x ↦ p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMap<T> {
    pub x: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> DeltaMap<T> {
    pub fn is_monotone(&self) -> bool {
        self.p.windows(2).all(|w| w[1] >= w[0])
    }

    /// `x(p)` by linear inversion of the sampled monotone map.
    pub fn inverse(&self, p: T) -> T {
        crate::interp::linear(&self.p, &self.x, p)
    }
}

/// Half-width of the neighbourhood of `x = 0` skipped by [`p_of_x_integral`],
/// relative to the strike scale.
pub const EXCLUSION: f64 = 1e-6;

/// Recovers deltas from a conjugate given as a function of spot,
/// `p = c*(x)/x + ∫ c*(x)/x² dx`.
///
/// Above zero the constant is fixed by `p → 1` as `x → ∞`:
/// `p(x) = 1 + c*(x)/x - ∫_0^{1/x} c*(1/s) ds`. Below zero it is fixed by
/// `p(x_lo) = 0` at the lower end of the domain. Inside `|x| < EXCLUSION·k`
/// the map is continued flat from the edge of the zone.
pub fn p_of_x_integral<T: Real, F: Fn(T) -> T>(c_star_of_x: F, x_lo: T, k: T, xs: &[T]) -> Result<DeltaMap<T>> {
    let eps = T::lit(EXCLUSION) * k.abs();
    let tol = T::lit(1e-10) * k.abs().max(T::one());
    let fail = || Error::QuadratureFailed {
        excluded: eps.as_f64(),
    };
    let tiny = T::min_positive_value().sqrt();
    let upper = |x: T| -> Result<T> {
        let f = |s: T| c_star_of_x(T::one() / s.max(tiny));
        let integral = adaptive_simpson(&f, T::zero(), T::one() / x, tol).ok_or_else(fail)?;
        Ok(T::one() + c_star_of_x(x) / x - integral)
    };
    let lower = |x: T| -> Result<T> {
        let f = |u: T| c_star_of_x(u) / (u * u);
        let integral = adaptive_simpson(&f, x_lo, x, tol).ok_or_else(fail)?;
        Ok(c_star_of_x(x) / x - c_star_of_x(x_lo) / x_lo + integral)
    };
    let mut p = Vec::with_capacity(xs.len());
    for &x in xs {
        let v = if x >= eps {
            upper(x)?
        } else if x <= -eps {
            lower(x)?
        } else if x >= T::zero() {
            upper(eps)?
        } else {
            lower(-eps)?
        };
        p.push(v);
    }
    Ok(DeltaMap { x: xs.to_vec(), p })
}

fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> Option<T> {
    if a == b {
        return Some(T::zero());
    }
    let m = T::half() * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> Option<T> {
    let m = T::half() * (a + b);
    let (lm, rm) = (T::half() * (a + m), T::half() * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let err = left + right - whole;
    if !err.is_finite() {
        return None;
    }
    if err.abs() <= T::lit(15.0) * tol || (b - a).abs() <= T::epsilon() * a.abs().max(b.abs()) {
        return Some(left + right + err / T::lit(15.0));
    }
    if depth == 0 {
        return None;
    }
    let half = T::half() * tol;
    Some(
        simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{displaced_cstar, displaced_delta, DisplacedParams};
    use crate::backward::solve_backward;
    use crate::volatility::VolSurface;
    use approx::assert_relative_eq;

    fn displaced_solution() -> PdeSolution<f64> {
        let g = Grid::clustered(201, -100.0, 400.0, 0.0, 10.0).unwrap();
        let s = VolSurface::lognormal(0.5).unwrap().recentered(100.0);
        solve_backward(&s, &g, 1.0, 50).unwrap()
    }

    #[test]
    fn payoff_conjugate_is_zero() {
        let g = Grid::uniform(11, -1.0, 1.0).unwrap();
        let x = g.nodes();
        // deltas of a slightly smoothed payoff so they are strictly increasing
        let deltas: Vec<f64> = x.iter().map(|&x| 0.5 + 0.45 * x).collect();
        let values: Vec<f64> = x.iter().zip(&deltas).map(|(&x, &p)| p * x).collect();
        let f = to_dual(&g, &values, &deltas, &[1.0; 11], 0.0, DualOptions::default()).unwrap();
        assert!(f.c_star.iter().all(|&c| c == 0.0));
        let back = from_dual(&f);
        for (b, &x) in back.iter().zip(&f.x_map) {
            assert_eq!(*b, x * f.p.nodes()[f.x_map.iter().position(|&y| y == x).unwrap()]);
        }
    }

    #[test]
    fn linear_price_is_degenerate() {
        let g = Grid::uniform(11, -1.0, 1.0).unwrap();
        let values = g.nodes().to_vec();
        let r = to_dual(&g, &values, &[1.0; 11], &[0.0; 11], 0.0, DualOptions::default());
        assert_eq!(r, Err(Error::DegenerateMap(0)));
    }

    #[test]
    fn non_monotone_deltas_rejected() {
        let g = Grid::uniform(7, 0.0, 1.0).unwrap();
        let deltas = [0.1, 0.2, 0.3, 0.25, 0.4, 0.5, 0.6];
        let r = to_dual(&g, &[0.0; 7], &deltas, &[1.0; 7], 0.0, DualOptions::default());
        assert_eq!(r, Err(Error::NonMonotoneDelta(3)));
    }

    #[test]
    fn roundtrip_and_young_inequality() {
        let sol = displaced_solution();
        let f = frame_from_solution(&sol, 0, DualOptions::default()).unwrap();
        let back = from_dual(&f);
        let x = sol.grid.nodes();
        for (i, &xm) in f.x_map.iter().enumerate() {
            let j = x.iter().position(|&y| y == xm).unwrap();
            assert!((back[i] - sol.values[0][j]).abs() < 1e-12);
        }
        assert!(f.c_star.iter().all(|&c| c <= 0.0));
        for (i, &p) in f.p.nodes().iter().enumerate() {
            let sup = fenchel_conjugate(x, &sol.values[0], p);
            assert!(sup >= f.c_star[i] - 1e-12);
            for (j, &xj) in x.iter().enumerate() {
                assert!(p * xj <= sol.values[0][j] + f.c_star[i] + 1e-10 * 100.0);
            }
        }
        let raw = dual_gamma_raw(&f);
        let gmax = raw.iter().fold(0.0f64, |m, &g| m.max(g.abs()));
        assert!(raw.iter().all(|&g| g >= -1e-8 * gmax));
    }

    #[test]
    fn derivatives_on_quadratic_conjugate() {
        let p = Grid::uniform(21, 0.05, 0.95).unwrap();
        let c_star: Vec<f64> = p.nodes().iter().map(|&p| 0.5 * (p * p - p)).collect();
        let f = LegendreFrame {
            p: p.clone(),
            c_star,
            x_map: vec![0.0; 21],
            c_star_gamma: vec![1.0; 21],
            t: 0.0,
        };
        for (x, &p) in x_of_p(&f).iter().zip(p.nodes()) {
            assert!((x - (p - 0.5)).abs() < 1e-12);
        }
        assert!(dual_gamma(&f, 1e-8).iter().all(|&g| (g - 1.0).abs() < 1e-9));
        let zero = f.with_values(vec![0.0; 21], 0.0, 1e-8);
        assert!(zero.x_map.iter().all(|&x| x == 0.0));
        assert!(zero.c_star_gamma.iter().all(|&g| g == 1e-8));
    }

    #[test]
    fn map_and_reciprocal_gamma_on_solution() {
        let sol = displaced_solution();
        let f = frame_from_solution(&sol, 0, DualOptions::default()).unwrap();
        let xr = x_of_p(&f);
        let stencil = dual_gamma(&f, 1e-8);
        let n = f.len();
        for i in n / 10..n - n / 10 {
            assert!((xr[i] - f.x_map[i]).abs() < 0.05 * (1.0 + f.x_map[i].abs()));
            assert_relative_eq!(stencil[i] * (1.0 / f.c_star_gamma[i]), 1.0, max_relative = 0.05);
        }
    }

    #[test]
    fn integral_map_recovers_displaced_deltas() {
        let prm = DisplacedParams::new(0.5, 100.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..60).map(|i| -95.0 + 5.0 * i as f64).collect();
        let map = p_of_x_integral(|x| displaced_cstar(x, 0.0, &prm).unwrap(), -100.0, 100.0, &xs).unwrap();
        assert!(map.is_monotone());
        for (&x, &p) in map.x.iter().zip(&map.p) {
            assert!((0.0..=1.0).contains(&p));
            let want = displaced_delta(x, 0.0, &prm).unwrap();
            // flat continuation across the excluded zone costs about slope * zone width
            let tol = if x == 0.0 { 1e-5 } else { 1e-7 };
            assert!((p - want).abs() < tol, "x={x}: {p} vs {want}");
        }
        let inv = map.inverse(0.5);
        assert!((displaced_delta(inv, 0.0, &prm).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn integral_map_constant_on_zero_region() {
        let xs = [1.0, 10.0, 100.0];
        let map = p_of_x_integral(|_| 0.0, -100.0, 100.0, &xs).unwrap();
        assert_eq!(map.p, vec![1.0; 3]);
        let map = p_of_x_integral(|_| 0.0, -100.0, 100.0, &[0.0, 1e-9, -1e-9]).unwrap();
        assert_eq!(map.p, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn frame_csv_columns() {
        let sol = displaced_solution();
        let f = frame_from_solution(&sol, 0, DualOptions::default()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p,c_star,x_map,c_star_gamma,t\n"));
        assert_eq!(text.lines().count(), f.len() + 1);
    }
}
