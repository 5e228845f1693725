//! Stability diagnostics for the exponential propagators: Metzler structure,
//! norms of `exp(M)`, the discrete Laplacian norm and time-step bounds.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{expm_dense, TridiagonalOperator, DENSE_LIMIT};
use crate::scalar::Real;

/// Whether `diag(scale) * op` has a nonpositive diagonal and nonnegative
/// off-diagonal entries. Negative or non-finite scales are rejected.
pub fn check_metzler<T: Real>(op: &TridiagonalOperator<T>, scale: &[T]) -> Result<bool> {
    for (index, &s) in scale.iter().enumerate() {
        if !s.is_finite() || s < T::zero() {
            return Err(Error::InvalidScale {
                index,
                value: s.as_f64(),
            });
        }
    }
    Ok(op.scaled(scale)?.is_metzler())
}

/// Largest eigenvalue magnitude of the Dirichlet second difference with `n`
/// interior nodes and spacing `h`: `(4/h²) sin²(nπ / (2(n+1)))`.
pub fn laplacian_norm(h: f64, n: usize) -> f64 {
    let s = (n as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
    4.0 / (h * h) * s * s
}

/// Interior block of `exp(diag(scale) * op)` in double precision.
///
/// Boundary rows are zero, so the exponential is block triangular and its
/// interior block is the exponential of the interior block of the matrix.
fn interior_exp<T: Real>(op: &TridiagonalOperator<T>, scale: &[T]) -> Result<DMatrix<f64>> {
    let n = op.len();
    let op64 = TridiagonalOperator::from_bands(
        op.lower().iter().map(|x| x.as_f64()).collect(),
        op.main().iter().map(|x| x.as_f64()).collect(),
        op.upper().iter().map(|x| x.as_f64()).collect(),
    )?;
    let s64: Vec<f64> = scale.iter().map(|x| x.as_f64()).collect();
    let e = expm_dense(&op64, &s64)?;
    Ok(e.view((1, 1), (n - 2, n - 2)).into_owned())
}

/// Spectral norm of the interior block of `exp(diag(scale) * op)`.
///
/// This is the norm governing homogeneous boundary data. It equals 1 at
/// zero scale and is below 1 for constant positive scale on a uniform grid,
/// but for scales that vary across the grid the matrix is not normal and its
/// 2-norm can exceed 1. See [`sup_contraction`] for the norm that is always
/// bounded by 1.
pub fn spectral_contraction<T: Real>(op: &TridiagonalOperator<T>, scale: &[T]) -> Result<f64> {
    let e = interior_exp(op, scale)?;
    Ok(e.singular_values().max())
}

/// Maximum row sum of the interior block of `exp(diag(scale) * op)`.
/// For a Metzler operator with zero row sums this never exceeds 1.
pub fn sup_contraction<T: Real>(op: &TridiagonalOperator<T>, scale: &[T]) -> Result<f64> {
    let e = interior_exp(op, scale)?;
    Ok(e.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Time-step restrictions for a diffusion with coefficient `½ a_max²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBounds {
    /// Explicit Euler limit `h² / a_max²`.
    pub euler_dt: f64,
    /// Relaxed limit `1 / (h a_max)²`.
    pub relaxed_dt: f64,
    pub relaxed_ok: bool,
    /// `relaxed_dt / dt`.
    pub margin: f64,
    /// Fréchet-derivative bound `a_max² dt / ‖Δ‖`.
    pub frechet: f64,
}

pub fn stability_bounds(a_max: f64, h: f64, n: usize, dt: f64) -> StabilityBounds {
    let a2 = a_max * a_max;
    let euler_dt = if a2 > 0.0 { h * h / a2 } else { f64::INFINITY };
    let relaxed_dt = if a2 > 0.0 { 1.0 / (h * h * a2) } else { f64::INFINITY };
    StabilityBounds {
        euler_dt,
        relaxed_dt,
        relaxed_ok: dt < relaxed_dt,
        margin: relaxed_dt / dt,
        frechet: a2 * dt / laplacian_norm(h, n),
    }
}

/// Everything the diagnostics know about one propagator matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub metzler_ok: bool,
    /// `None` when the operator is too large for the dense path.
    pub spectral_norm_exp_m: Option<f64>,
    pub sup_norm_exp_m: Option<f64>,
    pub laplacian_norm: f64,
    pub frechet_bound: f64,
    pub euler_bound_dt: f64,
    pub relaxed_bound_dt: f64,
    pub relaxed_ok: bool,
    pub relaxed_margin: f64,
}

/// Full report for `exp(diag(scale) * op)` with `scale = ½ dt a²`-type
/// entries, `a_max` the largest volatility and `h` the largest grid step.
pub fn stability_report<T: Real>(
    op: &TridiagonalOperator<T>,
    scale: &[T],
    a_max: f64,
    h: f64,
    dt: f64,
) -> Result<StabilityReport> {
    let metzler_ok = check_metzler(op, scale)?;
    let (spectral, sup) = if op.len() <= DENSE_LIMIT {
        (Some(spectral_contraction(op, scale)?), Some(sup_contraction(op, scale)?))
    } else {
        (None, None)
    };
    let interior = op.len().saturating_sub(2).max(1);
    let b = stability_bounds(a_max, h, interior, dt);
    Ok(StabilityReport {
        metzler_ok,
        spectral_norm_exp_m: spectral,
        sup_norm_exp_m: sup,
        laplacian_norm: laplacian_norm(h, interior),
        frechet_bound: b.frechet,
        euler_bound_dt: b.euler_dt,
        relaxed_bound_dt: b.relaxed_dt,
        relaxed_ok: b.relaxed_ok,
        relaxed_margin: b.margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    #[test]
    fn metzler_checks() {
        let g = Grid::clustered(21, 0.0, 1.0, 0.3, 4.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        assert!(check_metzler(&op, &[0.7; 21]).unwrap());
        let mut main = op.main().to_vec();
        main[4] = 1.0;
        let bad = TridiagonalOperator::from_bands(op.lower().to_vec(), main, op.upper().to_vec()).unwrap();
        assert!(!check_metzler(&bad, &[0.7; 21]).unwrap());
        let mut s = vec![0.7; 21];
        s[3] = -0.1;
        assert!(matches!(check_metzler(&op, &s), Err(Error::InvalidScale { index: 3, .. })));
    }

    #[test]
    fn laplacian_norm_formula() {
        assert_relative_eq!(laplacian_norm(1.0, 1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(laplacian_norm(0.5, 1_000_000), 16.0, max_relative = 1e-10);
        for n in [3usize, 10, 50] {
            let h = 1.0 / (n + 1) as f64;
            let g = Grid::uniform(n + 2, 0.0, 1.0).unwrap();
            let op = TridiagonalOperator::second_derivative(&g).to_dense();
            let inner = op.view((1, 1), (n, n)).into_owned();
            let eig = inner.symmetric_eigen().eigenvalues;
            let top = eig.iter().fold(0.0f64, |m: f64, e: &f64| m.max(e.abs()));
            assert_relative_eq!(laplacian_norm(h, n), top, max_relative = 1e-10);
        }
    }

    #[test]
    fn contraction_for_constant_scale() {
        let g = Grid::uniform(52, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        assert_relative_eq!(spectral_contraction(&op, &[0.0; 52]).unwrap(), 1.0, max_relative = 1e-14);
        let mut last = 1.0;
        for s in [1e-5, 1e-4, 1e-3, 1e-2] {
            let norm = spectral_contraction(&op, &[s; 52]).unwrap();
            assert!(norm < last);
            last = norm;
            assert!(sup_contraction(&op, &[s; 52]).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn variable_scale_can_expand_in_two_norm() {
        // strongly varying scale makes exp(M) non-normal
        let g = Grid::uniform(52, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let s: Vec<f64> = (0..52).map(|i| if i % 2 == 0 { 1e-2 } else { 1e-6 }).collect();
        let two = spectral_contraction(&op, &s).unwrap();
        let sup = sup_contraction(&op, &s).unwrap();
        assert!(sup <= 1.0 + 1e-12, "sup {sup}");
        assert!(two > 1.0, "two-norm {two} sup {sup}");
    }

    #[test]
    fn stability_bound_examples() {
        let b = stability_bounds(0.5, 0.0025, 400, 0.01);
        assert_relative_eq!(b.relaxed_dt, 640_000.0, max_relative = 1e-12);
        assert!(b.relaxed_ok);
        let edge = stability_bounds(0.5, 0.0025, 400, 640_000.0);
        assert!(!edge.relaxed_ok);
        let flat = stability_bounds(0.0, 0.0025, 400, 1e6);
        assert!(flat.relaxed_ok && flat.euler_dt.is_infinite());
    }

    #[test]
    fn dense_size_limit() {
        let g = Grid::uniform(600, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        assert!(matches!(
            spectral_contraction(&op, &[1e-6; 600]),
            Err(Error::TooLarge { .. })
        ));
        let r = stability_report(&op, &[1e-6; 600], 0.5, 1.0 / 599.0, 0.01).unwrap();
        assert!(r.spectral_norm_exp_m.is_none() && r.metzler_ok);
    }
}
