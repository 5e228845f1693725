//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson slopes).

use crate::scalar::Real;

/// Slopes of the shape-preserving cubic through `(xs, ys)`.
fn pchip_slopes<T: Real>(xs: &[T], ys: &[T]) -> Vec<T> {
    let n = xs.len();
    let h: Vec<T> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<T> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut d = vec![T::zero(); n];
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    let two = T::two();
    let three = T::lit(3.0);
    for i in 1..n - 1 {
        if del[i - 1] * del[i] > T::zero() {
            let w1 = two * h[i] + h[i - 1];
            let w2 = h[i] + two * h[i - 1];
            d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    let end = |h0: T, h1: T, d0: T, d1: T| {
        let s = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            T::zero()
        } else if d0.signum() != d1.signum() && s.abs() > (three * d0).abs() {
            three * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

/// Evaluates the PCHIP interpolant of `(xs, ys)` at `xq`, constant beyond
/// the data range. `xs` must be strictly increasing with at least 2 points.
pub fn pchip<T: Real>(xs: &[T], ys: &[T], xq: &[T]) -> Vec<T> {
    assert!(xs.len() >= 2 && xs.len() == ys.len());
    let d = pchip_slopes(xs, ys);
    let n = xs.len();
    xq.iter()
        .map(|&x| {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[n - 1] {
                return ys[n - 1];
            }
            let i = xs.partition_point(|&k| k <= x) - 1;
            let h = xs[i + 1] - xs[i];
            let s = (x - xs[i]) / h;
            let s2 = s * s;
            let s3 = s2 * s;
            let two = T::two();
            let three = T::lit(3.0);
            let h00 = two * s3 - three * s2 + T::one();
            let h10 = s3 - two * s2 + s;
            let h01 = -two * s3 + three * s2;
            let h11 = s3 - s2;
            h00 * ys[i] + h10 * h * d[i] + h01 * ys[i + 1] + h11 * h * d[i + 1]
        })
        .collect()
}

/// Piecewise linear interpolation, constant beyond the data range.
pub fn linear<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&k| k <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (T::one() - w) + ys[i + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_cubics_shape() {
        let xs = [0.0, 1.0, 2.5, 3.0, 5.0];
        let ys = [0.0, 0.5, 0.6, 2.0, 2.1];
        let got = pchip(&xs, &ys, &xs);
        assert_eq!(got, ys.to_vec());
        let q: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let v = pchip(&xs, &ys, &q);
        for w in v.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
    }

    #[test]
    fn linear_data_is_exact() {
        let xs = [0.0, 0.3, 1.0, 1.7];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let q = [0.1, 0.65, 1.5];
        for (x, y) in q.iter().zip(pchip(&xs, &ys, &q)) {
            assert!((y - (2.0 * x - 1.0)).abs() < 1e-14);
        }
        assert_eq!(linear(&xs, &ys, -3.0), -1.0);
        assert!((linear(&xs, &ys, 0.65) - 0.3).abs() < 1e-14);
    }
}
