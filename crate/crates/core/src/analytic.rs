//! Closed-form solutions used as oracles: normal distribution, Black–Scholes,
//! the displaced lognormal model and the quadratic solution of the
//! consumption problem `J_ξ = ½ μ̄² J_Π² / J_ΠΠ`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `e^{-z²/2} / √(2π)`
pub fn norm_pdf<T: Real>(z: T) -> T {
    (-z * z * T::half()).exp() / (T::two() * T::pi()).sqrt()
}

/// Standard normal distribution function, absolute error below 1e-15 in
/// double precision.
pub fn norm_cdf<T: Real>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    let x = z.abs() / T::two().sqrt();
    if z.abs() < T::lit(3.0) {
        T::half() + T::half() * z.signum() * erf_series(x)
    } else {
        let tail = T::half() * erfc_cf(x);
        if z < T::zero() {
            tail
        } else {
            T::one() - tail
        }
    }
}

/// `erf(x) = 2/√π e^{-x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!`, all terms positive.
fn erf_series<T: Real>(x: T) -> T {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 0..200 {
        term = term * T::two() * x2 / T::from_usize_lossy(2 * n + 3);
        sum += term;
        if term <= T::epsilon() * sum {
            break;
        }
    }
    T::two() / T::pi().sqrt() * (-x2).exp() * sum
}

/// Continued fraction `erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`
/// by the modified Lentz method; used for x ≥ 3/√2.
fn erfc_cf<T: Real>(x: T) -> T {
    let tiny = T::min_positive_value().sqrt();
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    for n in 1..500 {
        let a = T::from_usize_lossy(n) * T::half();
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    (-x * x).exp() / T::pi().sqrt() / f
}

/// Inverse of [`norm_cdf`] by safeguarded Newton iteration.
/// Returns ∓∞ at 0 and 1 and NaN outside [0, 1].
pub fn norm_inv<T: Real>(p: T) -> T {
    if !(p >= T::zero() && p <= T::one()) {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    // rational starting point, error around 5e-4
    let q = p.min(T::one() - p);
    let t = (-T::two() * q.ln()).sqrt();
    let num = T::lit(2.515517) + T::lit(0.802853) * t + T::lit(0.010328) * t * t;
    let den = T::one() + T::lit(1.432788) * t + T::lit(0.189269) * t * t + T::lit(0.001308) * t * t * t;
    let mut z = t - num / den;
    if p < T::half() {
        z = -z;
    }
    let (mut lo, mut hi) = (T::lit(-40.0), T::lit(40.0));
    for _ in 0..100 {
        let f = norm_cdf(z) - p;
        if f == T::zero() {
            break;
        }
        if f > T::zero() {
            hi = hi.min(z);
        } else {
            lo = lo.max(z);
        }
        let pdf = norm_pdf(z);
        let mut next = z - f / pdf;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = T::half() * (lo + hi);
        }
        if (next - z).abs() <= T::lit(4.0) * T::epsilon() * z.abs().max(T::one()) {
            z = next;
            break;
        }
        z = next;
    }
    z
}

/// Undiscounted Black–Scholes call at spot `s`, time `t`, strike `k`,
/// volatility `sigma`, maturity `maturity`.
pub fn bs_call<T: Real>(s: T, t: T, k: T, sigma: T, maturity: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    if k <= T::zero() {
        return s - k;
    }
    let tau = maturity - t;
    let sd = sigma * tau.max(T::zero()).sqrt();
    if !(sd > T::zero()) {
        return (s - k).max(T::zero());
    }
    let d1 = (s / k).ln() / sd + T::half() * sd;
    s * norm_cdf(d1) - k * norm_cdf(d1 - sd)
}

/// Black–Scholes call delta `N(d₁)`.
pub fn bs_delta<T: Real>(s: T, t: T, k: T, sigma: T, maturity: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    let sd = sigma * (maturity - t).max(T::zero()).sqrt();
    if k <= T::zero() {
        return T::one();
    }
    if !(sd > T::zero()) {
        return if s > k { T::one() } else { T::zero() };
    }
    norm_cdf((s / k).ln() / sd + T::half() * sd)
}

/// Displaced lognormal model written in the shifted variable `x = S - K`,
/// where the underlying is lognormal with `a(x) = σ (x + K)` on `x > -K` and
/// the claim pays `x⁺` at maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacedParams<T> {
    pub sigma: T,
    pub k: T,
    pub maturity: T,
}

impl<T: Real> DisplacedParams<T> {
    pub fn new(sigma: T, k: T, maturity: T) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("k", k), ("maturity", maturity)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self { sigma, k, maturity })
    }

    /// `σ √(T - t)`, zero at and after maturity.
    pub fn total_sd(&self, t: T) -> T {
        self.sigma * (self.maturity - t).max(T::zero()).sqrt()
    }

    fn check(&self, x: T) -> Result<()> {
        if x < -self.k || !x.is_finite() {
            return Err(Error::OutsideDomain {
                x: x.as_f64(),
                lower: (-self.k).as_f64(),
            });
        }
        Ok(())
    }
}

/// Price `c(x, t)`; zero at `x = -K`, `x⁺` at maturity.
pub fn displaced_call<T: Real>(x: T, t: T, prm: &DisplacedParams<T>) -> Result<T> {
    prm.check(x)?;
    Ok(bs_call(x + prm.k, t, prm.k, prm.sigma, prm.maturity))
}

/// Delta `c₁(x, t)`.
pub fn displaced_delta<T: Real>(x: T, t: T, prm: &DisplacedParams<T>) -> Result<T> {
    prm.check(x)?;
    Ok(bs_delta(x + prm.k, t, prm.k, prm.sigma, prm.maturity))
}

/// Conjugate value at the delta of `x`: `c* = x c₁ - c = -K [N(d₁) - N(d₂)]`.
pub fn displaced_cstar<T: Real>(x: T, t: T, prm: &DisplacedParams<T>) -> Result<T> {
    prm.check(x)?;
    let sd = prm.total_sd(t);
    if x <= -prm.k || !(sd > T::zero()) {
        return Ok(T::zero());
    }
    let d1 = ((x + prm.k) / prm.k).ln() / sd + T::half() * sd;
    Ok(-prm.k * (norm_cdf(d1) - norm_cdf(d1 - sd)))
}

/// `c*(p, t) = -K [p - N(N⁻¹(p) - σ√τ)]` for `p ∈ (0, 1)`.
pub fn displaced_cstar_of_p<T: Real>(p: T, t: T, prm: &DisplacedParams<T>) -> T {
    let sd = prm.total_sd(t);
    if !(p > T::zero() && p < T::one()) || !(sd > T::zero()) {
        return T::zero();
    }
    -prm.k * (p - norm_cdf(norm_inv(p) - sd))
}

/// Dual delta `x(p, t) = ∂c*/∂p = K exp(σ√τ N⁻¹(p) - σ²τ/2) - K`.
pub fn displaced_x_of_p<T: Real>(p: T, t: T, prm: &DisplacedParams<T>) -> T {
    let sd = prm.total_sd(t);
    prm.k * (sd * norm_inv(p) - T::half() * sd * sd).exp() - prm.k
}

/// Dual gamma `∂²c*/∂p² = 1 / c₁₁(x(p, t), t)`.
pub fn displaced_dual_gamma<T: Real>(p: T, t: T, prm: &DisplacedParams<T>) -> T {
    let sd = prm.total_sd(t);
    let z = norm_inv(p);
    prm.k * sd * (sd * z - T::half() * sd * sd).exp() / norm_pdf(z)
}

/// Central-difference residual of `c_t + ½ a² c_xx` for [`displaced_call`],
/// with `a = σ (x + K)`, spatial step `h` and time step `ht`.
pub fn residual_fk<T: Real>(x: T, t: T, h: T, ht: T, prm: &DisplacedParams<T>) -> Result<T> {
    let c = |x: T, t: T| displaced_call(x, t, prm);
    let ct = (c(x, t + ht)? - c(x, t - ht)?) / (T::two() * ht);
    let cxx = (c(x + h, t)? - T::two() * c(x, t)? + c(x - h, t)?) / (h * h);
    let a = prm.sigma * (x + prm.k);
    Ok(ct + T::half() * a * a * cxx)
}

/// Parameters of the consumption problem; `mu_bar = μ / σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiptonParams<T> {
    pub lambda: T,
    pub mu_bar: T,
}

/// Quadratic solution `J(ξ, Π) = e^{μ̄² ξ} (Π - λ/2)² - λ²/4`, which starts
/// from `J(0, Π) = Π² - λΠ`.
///
/// With `J = aΠ² + bΠ + c` the equation splits into `a' = μ̄² a`,
/// `b' = μ̄² b`, `c' = μ̄² b² / (4a)`.
pub fn lipton_solution<T: Real>(xi: T, pi: T, prm: &LiptonParams<T>) -> T {
    if xi == T::zero() {
        return pi * pi - prm.lambda * pi;
    }
    let g = (prm.mu_bar * prm.mu_bar * xi).exp();
    let half_l = T::half() * prm.lambda;
    let d = pi - half_l;
    g * d * d - half_l * half_l
}

/// Smallest admissible `J_ΠΠ` in [`residual_nl1`].
pub const NL1_CURVATURE_FLOOR: f64 = 1e-10;

/// `|J_ξ - ½ μ̄² J_Π² / J_ΠΠ|` with central differences of step `h`.
pub fn residual_nl1<T: Real, F: Fn(T, T) -> T>(j: F, xi: T, pi: T, mu_bar: T, h: T) -> Result<T> {
    let two = T::two();
    let j_xi = (j(xi + h, pi) - j(xi - h, pi)) / (two * h);
    let j0 = j(xi, pi);
    let (jp, jm) = (j(xi, pi + h), j(xi, pi - h));
    let j_p = (jp - jm) / (two * h);
    let j_pp = (jp - two * j0 + jm) / (h * h);
    let floor = T::lit(NL1_CURVATURE_FLOOR);
    if !(j_pp > floor) {
        return Err(Error::CurvatureBelowFloor {
            value: j_pp.as_f64(),
            floor: floor.as_f64(),
        });
    }
    Ok((j_xi - T::half() * mu_bar * mu_bar * j_p * j_p / j_pp).abs())
}
