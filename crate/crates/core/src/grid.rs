//! One-dimensional grids and the three-point operators built on them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest operator size accepted by the dense exponential.
pub const DENSE_LIMIT: usize = 512;

/// Relative tolerance of the truncated Taylor series inside [`expm_apply`].
pub const EXPM_TOL: f64 = 1e-12;

/// Strictly increasing node set with at least three nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    nodes: Vec<T>,
    steps: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::TooFewNodes(nodes.len()));
        }
        let mut steps = Vec::with_capacity(nodes.len() - 1);
        for i in 1..nodes.len() {
            let h = nodes[i] - nodes[i - 1];
            if !nodes[i].is_finite() || !(h > T::zero()) {
                return Err(Error::NonMonotoneGrid(i));
            }
            steps.push(h);
        }
        if !nodes[0].is_finite() {
            return Err(Error::NonMonotoneGrid(0));
        }
        Ok(Self { nodes, steps })
    }

    /// `n` equally spaced nodes on `[lo, hi]`, endpoints included exactly.
    pub fn uniform(n: usize, lo: T, hi: T) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewNodes(n));
        }
        check_bounds(lo, hi)?;
        let m = T::from_usize_lossy(n - 1);
        let nodes = (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * T::from_usize_lossy(i) / m
                }
            })
            .collect();
        Self::from_nodes(nodes)
    }

    /// Nodes concentrated around `center` by a sinh stretching
    /// `x = center + α sinh(u)`, `α = (hi - lo) / density`.
    ///
    /// The auxiliary variable is uniform on each side of the center, so
    /// `center`, `lo` and `hi` are all nodes. Larger `density` gives
    /// stronger clustering.
    pub fn clustered(n: usize, lo: T, hi: T, center: T, density: T) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewNodes(n));
        }
        check_bounds(lo, hi)?;
        if !(center > lo && center < hi) {
            return Err(Error::CenterOutsideDomain {
                center: center.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        if !(density > T::zero()) || !density.is_finite() {
            return Err(Error::InvalidDensity(density.as_f64()));
        }
        let alpha = (hi - lo) / density;
        let a = ((lo - center) / alpha).asinh();
        let b = ((hi - center) / alpha).asinh();
        // share of intervals left of the center, at least one on each side
        let frac = (-a / (b - a)).as_f64();
        let left = ((frac * (n - 1) as f64).round() as usize).clamp(1, n - 2);
        let right = n - 1 - left;

        let mut nodes = Vec::with_capacity(n);
        for i in 0..left {
            let u = a * (T::one() - T::from_usize_lossy(i) / T::from_usize_lossy(left));
            nodes.push(center + alpha * u.sinh());
        }
        nodes[0] = lo;
        nodes.push(center);
        for j in 1..=right {
            let u = b * T::from_usize_lossy(j) / T::from_usize_lossy(right);
            nodes.push(center + alpha * u.sinh());
        }
        nodes[n - 1] = hi;
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Interval lengths; `steps()[i] = nodes[i + 1] - nodes[i]`.
    pub fn steps(&self) -> &[T] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lo(&self) -> T {
        self.nodes[0]
    }

    pub fn hi(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn max_step(&self) -> T {
        self.steps.iter().fold(T::zero(), |m, &h| m.max(h))
    }

    pub fn min_step(&self) -> T {
        self.steps.iter().fold(T::infinity(), |m, &h| m.min(h))
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: T) -> usize {
        let mut best = 0;
        for (i, &p) in self.nodes.iter().enumerate() {
            if (p - x).abs() < (self.nodes[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

fn check_bounds<T: Real>(lo: T, hi: T) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidBounds {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    Ok(())
}

/// What the first and last rows of an operator do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRows {
    /// Zero rows: boundary values are frozen by every propagator.
    Frozen,
}

/// Three-band matrix stored by full-length bands.
///
/// `lower[0]` and `upper[n - 1]` are unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator<T> {
    lower: Vec<T>,
    main: Vec<T>,
    upper: Vec<T>,
    boundary: BoundaryRows,
}

impl<T: Real> TridiagonalOperator<T> {
    /// Three-point second difference on a nonuniform grid, zero boundary rows.
    pub fn second_derivative(g: &Grid<T>) -> Self {
        let n = g.len();
        let h = g.steps();
        let two = T::two();
        let mut lower = vec![T::zero(); n];
        let mut main = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        for i in 1..n - 1 {
            let (hl, hr) = (h[i - 1], h[i]);
            lower[i] = two / (hl * (hl + hr));
            main[i] = -two / (hl * hr);
            upper[i] = two / (hr * (hl + hr));
        }
        Self {
            lower,
            main,
            upper,
            boundary: BoundaryRows::Frozen,
        }
    }

    /// Builds an operator from raw bands. No sign structure is enforced, so
    /// this is also the way to construct deliberately broken matrices.
    pub fn from_bands(mut lower: Vec<T>, main: Vec<T>, mut upper: Vec<T>) -> Result<Self> {
        let n = main.len();
        if n < 3 {
            return Err(Error::TooFewNodes(n));
        }
        for len in [lower.len(), upper.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        lower[0] = T::zero();
        upper[n - 1] = T::zero();
        Ok(Self {
            lower,
            main,
            upper,
            boundary: BoundaryRows::Frozen,
        })
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn main(&self) -> &[T] {
        &self.main
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn boundary(&self) -> BoundaryRows {
        self.boundary
    }

    /// Diagonal entries nonpositive, off-diagonal entries nonnegative.
    pub fn is_metzler(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| {
            self.main[i] <= T::zero()
                && (i == 0 || self.lower[i] >= T::zero())
                && (i == n - 1 || self.upper[i] >= T::zero())
        })
    }

    /// Row-scaled copy `diag(scale) * self`.
    pub fn scaled(&self, scale: &[T]) -> Result<Self> {
        check_len(self.len(), scale.len())?;
        let row = |band: &[T]| band.iter().zip(scale).map(|(&a, &s)| a * s).collect();
        Ok(Self {
            lower: row(&self.lower),
            main: row(&self.main),
            upper: row(&self.upper),
            boundary: self.boundary,
        })
    }

    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.len(), v.len())?;
        Ok(self.apply_unchecked(v))
    }

    fn apply_unchecked(&self, v: &[T]) -> Vec<T> {
        let n = v.len();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = self.main[i] * v[i];
            if i > 0 {
                acc += self.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.len();
        let mut m = DMatrix::from_element(n, n, T::zero());
        for i in 0..n {
            m[(i, i)] = self.main[i];
            if i > 0 {
                m[(i, i - 1)] = self.lower[i];
            }
            if i + 1 < n {
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn check_scale<T: Real>(scale: &[T]) -> Result<()> {
    for (index, &s) in scale.iter().enumerate() {
        if !s.is_finite() || s < T::zero() {
            return Err(Error::InvalidScale {
                index,
                value: s.as_f64(),
            });
        }
    }
    Ok(())
}

/// Solves a tridiagonal system with full-length bands by elimination
/// without pivoting.
pub fn solve_tridiagonal<T: Real>(lower: &[T], main: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = main.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = main[0];
    if denom == T::zero() {
        return Err(Error::SingularSystem(0));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = main[i] - lower[i] * c[i - 1];
        if denom == T::zero() || !denom.is_finite() {
            return Err(Error::SingularSystem(i));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { T::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

/// One Crank–Nicolson step: solves `(I - M/2) w = (I + M/2) v`
/// with `M = diag(scale) * op`.
pub fn pade11_step<T: Real>(op: &TridiagonalOperator<T>, scale: &[T], v: &[T]) -> Result<Vec<T>> {
    check_len(op.len(), scale.len())?;
    check_len(op.len(), v.len())?;
    check_scale(scale)?;
    let m = op.scaled(scale)?;
    let half = T::half();
    let mv = m.apply_unchecked(v);
    let rhs: Vec<T> = v.iter().zip(&mv).map(|(&a, &b)| a + half * b).collect();
    let lower: Vec<T> = m.lower.iter().map(|&a| -half * a).collect();
    let main: Vec<T> = m.main.iter().map(|&a| T::one() - half * a).collect();
    let upper: Vec<T> = m.upper.iter().map(|&a| -half * a).collect();
    let w = solve_tridiagonal(&lower, &main, &upper, &rhs);
    // diagonally dominant for Metzler rows with scale >= 0
    debug_assert!(w.is_ok() || !op.is_metzler());
    w
}

/// Fully implicit step `(I - M) w = v`, used for damping the first step
/// after a nonsmooth initial condition.
pub fn implicit_step<T: Real>(op: &TridiagonalOperator<T>, scale: &[T], v: &[T]) -> Result<Vec<T>> {
    check_len(op.len(), scale.len())?;
    check_len(op.len(), v.len())?;
    check_scale(scale)?;
    let m = op.scaled(scale)?;
    let lower: Vec<T> = m.lower.iter().map(|&a| -a).collect();
    let main: Vec<T> = m.main.iter().map(|&a| T::one() - a).collect();
    let upper: Vec<T> = m.upper.iter().map(|&a| -a).collect();
    solve_tridiagonal(&lower, &main, &upper, v)
}

/// Action `exp(diag(scale) * op) v`.
///
/// With `c = max |M_ii|` the shifted matrix `A = M + cI` is entrywise
/// nonnegative for Metzler `M`, and `exp(M) = e^{-c} exp(A)`. The action of
/// `exp(A)` is taken in substeps of norm at most 4, each by a Taylor series
/// with nonnegative terms, so nonpositive input stays nonpositive exactly.
/// Very stiff operators up to [`DENSE_LIMIT`] nodes go through
/// [`expm_dense`] instead, which is entrywise nonnegative as well.
pub fn expm_apply<T: Real>(op: &TridiagonalOperator<T>, scale: &[T], v: &[T]) -> Result<Vec<T>> {
    check_len(op.len(), scale.len())?;
    check_len(op.len(), v.len())?;
    check_scale(scale)?;
    let m = op.scaled(scale)?;
    let shift = m.main.iter().fold(T::zero(), |acc, &d| acc.max(d.abs()));
    if shift == T::zero() && m.lower.iter().chain(&m.upper).all(|&a| a == T::zero()) {
        return Ok(v.to_vec());
    }
    let theta = 4.0;
    let substeps = ((shift.as_f64() / theta).ceil() as usize).max(1);
    let n = op.len();
    if substeps > 4 * n && n <= DENSE_LIMIT {
        // stiff: squaring the dense exponential is cheaper than the substeps
        let e = expm_dense(op, scale)?;
        return Ok((0..n).map(|i| (0..n).fold(T::zero(), |acc, j| acc + e[(i, j)] * v[j])).collect());
    }
    let sub = T::from_usize_lossy(substeps);
    let mut a = m;
    for d in a.main.iter_mut() {
        *d += shift;
    }
    let a = {
        let inv = T::one() / sub;
        let s = vec![inv; a.len()];
        a.scaled(&s)?
    };
    let damp = (-shift / sub).exp();
    let tol = T::lit(EXPM_TOL).max(T::epsilon());
    let mut w = v.to_vec();
    for _ in 0..substeps {
        let mut term = w.clone();
        let mut sum = w.clone();
        for k in 1..200 {
            let next = a.apply_unchecked(&term);
            let kk = T::from_usize_lossy(k);
            term = next.into_iter().map(|x| x / kk).collect();
            for (s, &t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            if crate::scalar::sup_norm(&term) <= tol * crate::scalar::sup_norm(&sum) {
                break;
            }
        }
        w = sum.into_iter().map(|x| x * damp).collect();
    }
    // rows of exp(M) for empty rows of M are unit vectors
    for i in 0..n {
        let lo = if i > 0 { op.lower[i] } else { T::zero() };
        let up = if i + 1 < n { op.upper[i] } else { T::zero() };
        if op.main[i] == T::zero() && lo == T::zero() && up == T::zero() {
            w[i] = v[i];
        }
    }
    Ok(w)
}

/// Dense `exp(diag(scale) * op)` by scaling and squaring of the shifted,
/// entrywise nonnegative Taylor series. Limited to [`DENSE_LIMIT`] nodes.
pub fn expm_dense<T: Real>(op: &TridiagonalOperator<T>, scale: &[T]) -> Result<DMatrix<T>> {
    let n = op.len();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: DENSE_LIMIT,
        });
    }
    check_len(n, scale.len())?;
    check_scale(scale)?;
    let m = op.scaled(scale)?;
    let shift = m.main.iter().fold(T::zero(), |acc, &d| acc.max(d.abs()));
    // conservative generators have exp(M) 1 = 1; repeated squaring drifts off it
    let conservative = (0..n).all(|i| {
        let lo = if i > 0 { m.lower[i] } else { T::zero() };
        let up = if i + 1 < n { m.upper[i] } else { T::zero() };
        (lo + m.main[i] + up).abs() <= T::lit(1e-10) * m.main[i].abs().max(T::min_positive_value())
    });
    let mut a = m.to_dense();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    // bring the norm of the shifted matrix below 1/2
    let norm = shift.as_f64() * 2.0;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let factor = T::lit(2f64.powi(-(squarings as i32)));
    a *= factor;
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..100 {
        term = &term * &a * (T::one() / T::from_usize_lossy(k));
        sum += &term;
        if dense_amax(&term) <= T::epsilon() * dense_amax(&sum) {
            break;
        }
    }
    sum *= (-shift * factor).exp();
    for _ in 0..squarings {
        sum = &sum * &sum;
        if conservative {
            for mut row in sum.row_iter_mut() {
                let r = row.iter().fold(T::zero(), |acc, &x| acc + x);
                if r > T::zero() {
                    row /= r;
                }
            }
        }
    }
    Ok(sum)
}

fn dense_amax<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Second-order first derivative on a nonuniform grid: central three-point
/// formula inside, one-sided three-point formula at the ends.
pub fn first_derivative<T: Real>(g: &Grid<T>, v: &[T]) -> Result<Vec<T>> {
    let n = g.len();
    check_len(n, v.len())?;
    let h = g.steps();
    let mut d = vec![T::zero(); n];
    for i in 1..n - 1 {
        let (hl, hr) = (h[i - 1], h[i]);
        d[i] = -hr / (hl * (hl + hr)) * v[i - 1]
            + (hr - hl) / (hl * hr) * v[i]
            + hl / (hr * (hl + hr)) * v[i + 1];
    }
    let (h1, h2) = (h[0], h[1]);
    d[0] = -(T::two() * h1 + h2) / (h1 * (h1 + h2)) * v[0] + (h1 + h2) / (h1 * h2) * v[1]
        - h1 / (h2 * (h1 + h2)) * v[2];
    let (h1, h2) = (h[n - 2], h[n - 3]);
    d[n - 1] = (T::two() * h1 + h2) / (h1 * (h1 + h2)) * v[n - 1] - (h1 + h2) / (h1 * h2) * v[n - 2]
        + h1 / (h2 * (h1 + h2)) * v[n - 3];
    Ok(d)
}

/// Three-point second derivative at interior nodes; end values are copied
/// from the nearest interior node.
pub fn second_derivative<T: Real>(g: &Grid<T>, v: &[T]) -> Result<Vec<T>> {
    let n = g.len();
    let mut d = TridiagonalOperator::second_derivative(g).apply(v)?;
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_nodes() {
        let g = Grid::uniform(3, 0.0, 1.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
        let g = Grid::uniform(5, 0.0, 1.0).unwrap();
        assert!(g.steps().iter().all(|&h| h == 0.25));
        let g = Grid::uniform(401, 0.0, 1.0).unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g.hi(), 1.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(Grid::uniform(2, 0.0, 1.0), Err(Error::TooFewNodes(2)));
        assert!(matches!(Grid::uniform(5, 1.0, 1.0), Err(Error::InvalidBounds { .. })));
        assert_eq!(Grid::from_nodes(vec![0.0, 1.0, 1.0]), Err(Error::NonMonotoneGrid(2)));
        assert!(matches!(
            Grid::clustered(11, 0.0, 200.0, 200.0, 5.0),
            Err(Error::CenterOutsideDomain { .. })
        ));
        assert!(matches!(
            Grid::clustered(11, 0.0, 200.0, 100.0, 0.0),
            Err(Error::InvalidDensity(_))
        ));
    }

    #[test]
    fn clustered_contains_center() {
        let g = Grid::clustered(11, 0.0, 200.0, 100.0, 5.0).unwrap();
        assert_eq!(g.lo(), 0.0);
        assert_eq!(g.hi(), 200.0);
        let k = g.nodes().iter().position(|&x| x == 100.0).expect("center node");
        let h = g.steps();
        let hmin = g.min_step();
        assert!(h[k - 1] == hmin || h[k] == hmin);

        let g = Grid::clustered(401, -100.0, 400.0, 0.0, 2.0).unwrap();
        let total: f64 = g.steps().iter().sum();
        assert_relative_eq!(total, 500.0, max_relative = 1e-12);
        assert!(g.nodes().contains(&0.0));
    }

    #[test]
    fn clustering_sharpens_with_density() {
        let ratio = |d: f64| {
            let g = Grid::clustered(101, 0.0, 200.0, 100.0, d).unwrap();
            g.min_step() / g.max_step()
        };
        let (r1, r2, r3) = (ratio(1.0), ratio(20.0), ratio(1000.0));
        assert!(r1 > r2 && r2 > r3);
        assert!(r3 < 0.01);
    }

    #[test]
    fn stencil_rows() {
        let g = Grid::uniform(11, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        assert_relative_eq!(op.lower()[3], 100.0, max_relative = 1e-12);
        assert_relative_eq!(op.main()[3], -200.0, max_relative = 1e-12);
        assert_relative_eq!(op.upper()[3], 100.0, max_relative = 1e-12);
        assert_eq!(op.main()[0], 0.0);
        assert_eq!(op.upper()[0], 0.0);
        assert!(op.is_metzler());
    }

    #[test]
    fn stencil_cubic_uniform() {
        let g = Grid::uniform(11, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let v: Vec<f64> = g.nodes().iter().map(|&p| p * p * p).collect();
        let d = op.apply(&v).unwrap();
        assert_relative_eq!(d[5], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn apply_length_mismatch() {
        let g = Grid::uniform(5, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        assert_eq!(
            op.apply(&[1.0, 2.0]),
            Err(Error::LengthMismatch {
                expected: 5,
                actual: 2
            })
        );
    }

    #[test]
    fn zero_scale_is_identity() {
        let g = Grid::<f64>::uniform(9, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let v: Vec<f64> = g.nodes().iter().map(|&p| (3.0 * p).sin()).collect();
        let z = vec![0.0; 9];
        assert_eq!(expm_apply(&op, &z, &v).unwrap(), v);
        assert_eq!(pade11_step(&op, &z, &v).unwrap(), v);
    }

    #[test]
    fn negative_scale_rejected() {
        let g = Grid::uniform(5, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let s = [0.0, 1.0, -1.0, 0.0, 0.0];
        assert!(matches!(
            expm_apply(&op, &s, &[0.0; 5]),
            Err(Error::InvalidScale { index: 2, .. })
        ));
        let s = [0.0, f64::NAN, 1.0, 0.0, 0.0];
        assert!(pade11_step(&op, &s, &[0.0; 5]).is_err());
    }

    #[test]
    fn expm_matches_sine_modes() {
        // Dirichlet Laplacian on the interior: eigenvectors sin(k pi x_j)
        let n = 41;
        let g = Grid::uniform(n, 0.0, 1.0).unwrap();
        let h = 1.0 / (n - 1) as f64;
        let op = TridiagonalOperator::second_derivative(&g);
        let s = 3e-4;
        let scale = vec![s; n];
        let v: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&x| (std::f64::consts::PI * x).sin() + 0.3 * (5.0 * std::f64::consts::PI * x).sin())
            .collect();
        let lam = |k: f64| -4.0 / (h * h) * (k * std::f64::consts::PI * h / 2.0f64).sin().powi(2);
        let exact: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&x| {
                (s * lam(1.0)).exp() * (std::f64::consts::PI * x).sin()
                    + 0.3 * (s * lam(5.0)).exp() * (5.0 * std::f64::consts::PI * x).sin()
            })
            .collect();
        let got = expm_apply(&op, &scale, &v).unwrap();
        let dense = expm_dense(&op, &scale).unwrap();
        let got_dense = &dense * nalgebra::DVector::from_vec(v.clone());
        for i in 1..n - 1 {
            assert!((got[i] - exact[i]).abs() < 1e-12);
            assert!((got_dense[i] - exact[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pade_agrees_to_third_order() {
        let n = 31;
        let g = Grid::clustered(n, 0.0, 1.0, 0.4, 3.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let v: Vec<f64> = g.nodes().iter().map(|&x: &f64| (x * (1.0 - x)).powi(2)).collect();
        let gap = |s: f64| {
            let sc: Vec<f64> = g.nodes().iter().map(|&x| s * (1.0 + x)).collect();
            let a = expm_apply(&op, &sc, &v).unwrap();
            let b = pade11_step(&op, &sc, &v).unwrap();
            crate::scalar::sup_distance(&a, &b)
        };
        let (e1, e2) = (gap(1e-4), gap(5e-5));
        assert!(e1 / e2 > 7.0 && e1 / e2 < 9.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn pade_keeps_constants() {
        let g = Grid::clustered(21, -1.0, 2.0, 0.0, 4.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let scale: Vec<f64> = (0..21).map(|i| 0.01 * i as f64).collect();
        let w = pade11_step(&op, &scale, &[2.5; 21]).unwrap();
        for x in w {
            assert_relative_eq!(x, 2.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let g = Grid::clustered(25, -3.0, 5.0, 1.0, 6.0).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|&x| 2.0 * x * x - x + 1.0).collect();
        let d1 = first_derivative(&g, &v).unwrap();
        let d2 = second_derivative(&g, &v).unwrap();
        for (i, &x) in g.nodes().iter().enumerate() {
            assert!((d1[i] - (4.0 * x - 1.0)).abs() < 1e-9);
            assert!((d2[i] - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::uniform(11, 0.0, 1.0).unwrap();
        let op = TridiagonalOperator::second_derivative(&g);
        let v: Vec<f32> = g.nodes().iter().map(|&p| p * p).collect();
        let d = op.apply(&v).unwrap();
        assert!((d[4] - 2.0).abs() < 1e-3);
        let w = expm_apply(&op, &[1e-3f32; 11], &v).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
    }
}
