//! Local volatility surfaces a(x, t).
//!
//! Tabulated surfaces are interpolated bilinearly inside the knot hull and
//! held flat outside it, in both directions. Times before the first knot use
//! the first row. Parametric surfaces bypass tabulation.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
enum Kind<T> {
    Tabulated {
        t_knots: Vec<T>,
        x_knots: Vec<T>,
        /// `values[j][i] = a(x_knots[i], t_knots[j])`
        values: Vec<Vec<T>>,
    },
    /// `a(x) = sigma * x` for x > 0, zero otherwise.
    Lognormal { sigma: T },
    Constant { a: T },
}

/// Local volatility in absolute units; `a` multiplies `dW` directly.
///
/// A surface may carry a coordinate offset: [`VolSurface::recentered`]
/// returns the same surface seen from the variable `x - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSurface<T> {
    kind: Kind<T>,
    offset: T,
}

impl<T: Real> VolSurface<T> {
    pub fn tabulated(t_knots: Vec<T>, x_knots: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        check_knots(&t_knots, "t")?;
        check_knots(&x_knots, "x")?;
        if values.len() != t_knots.len() {
            return Err(Error::LengthMismatch {
                expected: t_knots.len(),
                actual: values.len(),
            });
        }
        for (j, row) in values.iter().enumerate() {
            if row.len() != x_knots.len() {
                return Err(Error::LengthMismatch {
                    expected: x_knots.len(),
                    actual: row.len(),
                });
            }
            for (i, &a) in row.iter().enumerate() {
                if !(a > T::zero()) || !a.is_finite() {
                    return Err(Error::SurfaceValue {
                        row: j + 2,
                        column: i + 2,
                        value: a.as_f64(),
                    });
                }
            }
        }
        Ok(Self {
            kind: Kind::Tabulated {
                t_knots,
                x_knots,
                values,
            },
            offset: T::zero(),
        })
    }

    pub fn lognormal(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be positive and finite, got {sigma}"),
            });
        }
        Ok(Self {
            kind: Kind::Lognormal { sigma },
            offset: T::zero(),
        })
    }

    pub fn constant(a: T) -> Result<Self> {
        if !(a >= T::zero()) || !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("must be nonnegative and finite, got {a}"),
            });
        }
        Ok(Self {
            kind: Kind::Constant { a },
            offset: T::zero(),
        })
    }

    /// Same surface in the shifted coordinate `x - k`, so that
    /// `recentered(k).vol_at(x - k, t) == vol_at(x, t)`.
    pub fn recentered(&self, k: T) -> Self {
        Self {
            kind: self.kind.clone(),
            offset: self.offset + k,
        }
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, Kind::Tabulated { .. })
    }

    pub fn t_knots(&self) -> &[T] {
        match &self.kind {
            Kind::Tabulated { t_knots, .. } => t_knots,
            _ => &[],
        }
    }

    pub fn x_knots(&self) -> &[T] {
        match &self.kind {
            Kind::Tabulated { x_knots, .. } => x_knots,
            _ => &[],
        }
    }

    /// NaN coordinates give NaN.
    pub fn vol_at(&self, x: T, t: T) -> T {
        let s = x + self.offset;
        if s.is_nan() || t.is_nan() {
            return T::nan();
        }
        match &self.kind {
            Kind::Constant { a } => *a,
            Kind::Lognormal { sigma } => *sigma * s.max(T::zero()),
            Kind::Tabulated {
                t_knots,
                x_knots,
                values,
            } => {
                let (j, wt) = bracket(t_knots, t);
                let (i, wx) = bracket(x_knots, s);
                let row = |r: &[T]| {
                    if wx == T::zero() {
                        r[i]
                    } else {
                        r[i] * (T::one() - wx) + r[i + 1] * wx
                    }
                };
                if wt == T::zero() {
                    row(&values[j])
                } else {
                    row(&values[j]) * (T::one() - wt) + row(&values[j + 1]) * wt
                }
            }
        }
    }

    /// `a(x(p), t)` along a delta-space map.
    pub fn vol_hat(&self, x_of_p: &[T], t: T) -> Vec<T> {
        x_of_p.iter().map(|&x| self.vol_at(x, t)).collect()
    }

    /// Largest tabulated value; `None` for unbounded parametric surfaces.
    pub fn max_value(&self) -> Option<T> {
        match &self.kind {
            Kind::Constant { a } => Some(*a),
            Kind::Lognormal { .. } => None,
            Kind::Tabulated { values, .. } => Some(
                values
                    .iter()
                    .flatten()
                    .fold(T::zero(), |m, &a| m.max(a)),
            ),
        }
    }
}

/// Left knot index and weight of the right neighbour; weight 0 off the hull.
fn bracket<T: Real>(knots: &[T], x: T) -> (usize, T) {
    let n = knots.len();
    if n == 1 || x <= knots[0] {
        return (0, T::zero());
    }
    if x >= knots[n - 1] {
        return (n - 1, T::zero());
    }
    let i = knots.partition_point(|&k| k <= x) - 1;
    let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
    (i, w)
}

fn check_knots<T: Real>(k: &[T], axis: &'static str) -> Result<()> {
    if k.is_empty() {
        return Err(Error::SurfaceKnots { axis, index: 0 });
    }
    for i in 0..k.len() {
        if !k[i].is_finite() || (i > 0 && !(k[i] > k[i - 1])) {
            return Err(Error::SurfaceKnots { axis, index: i });
        }
    }
    Ok(())
}

/// Reads a surface from CSV: header `t,x1,x2,...`, then one row per time
/// knot. Rows and columns in errors are 1-based and count the header.
pub fn parse_surface<T: Real, R: Read>(reader: R) -> Result<VolSurface<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse = |s: &str, row: usize, column: usize| -> Result<T> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(T::lit)
            .ok_or_else(|| Error::SurfaceParse {
                row,
                column,
                message: format!("expected a number, found `{s}`"),
            })
    };

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::SurfaceParse {
                row: 1,
                column: 1,
                message: "empty file".into(),
            })
        }
    };
    if header.get(0) != Some("t") {
        return Err(Error::SurfaceParse {
            row: 1,
            column: 1,
            message: "first header cell must be `t`".into(),
        });
    }
    let mut x_knots = Vec::new();
    for (c, cell) in header.iter().enumerate().skip(1) {
        x_knots.push(parse(cell, 1, c + 1)?);
    }
    if x_knots.is_empty() {
        return Err(Error::SurfaceParse {
            row: 1,
            column: 2,
            message: "no spot knots in header".into(),
        });
    }

    let mut t_knots = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        let row = r + 2;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if rec.len() != x_knots.len() + 1 {
            return Err(Error::SurfaceParse {
                row,
                column: rec.len().min(x_knots.len() + 1) + 1,
                message: format!("expected {} cells, found {}", x_knots.len() + 1, rec.len()),
            });
        }
        t_knots.push(parse(&rec[0], row, 1)?);
        let mut line = Vec::with_capacity(x_knots.len());
        for c in 1..rec.len() {
            line.push(parse(&rec[c], row, c + 1)?);
        }
        values.push(line);
    }
    VolSurface::tabulated(t_knots, x_knots, values)
}

pub fn load_surface<T: Real>(path: impl AsRef<Path>) -> Result<VolSurface<T>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_surface(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TABLE: &str = include_str!("../../../data/table1_local_vol.csv");

    fn table() -> VolSurface<f64> {
        parse_surface(TABLE.as_bytes()).unwrap()
    }

    #[test]
    fn parses_table() {
        let s = table();
        assert_eq!(s.t_knots(), &[0.1, 0.2, 0.4, 0.6, 0.8]);
        assert_eq!(s.x_knots().len(), 9);
        assert_eq!(s.vol_at(100.0, 0.1), 0.462);
        assert_eq!(s.vol_at(70.0, 0.8), 0.632);
        assert_relative_eq!(s.vol_at(75.0, 0.1), 0.451, max_relative = 1e-14);
    }

    #[test]
    fn flat_outside_hull() {
        let s = table();
        assert_eq!(s.vol_at(10.0, 0.1), 0.447);
        assert_eq!(s.vol_at(500.0, 0.8), 0.650);
        assert_eq!(s.vol_at(100.0, 0.0), 0.462);
        assert_eq!(s.vol_at(100.0, 2.0), 0.643);
    }

    #[test]
    fn vol_hat_rows() {
        let s = table();
        assert!(s.vol_hat(&[100.0; 4], 0.1).iter().all(|&a| a == 0.462));
        let row = s.vol_hat(s.x_knots(), 0.2);
        assert_eq!(row[0], 0.500);
        assert_eq!(row[8], 0.522);
        assert!(s.vol_hat(&[], 0.3).is_empty());
    }

    #[test]
    fn reports_bad_cells() {
        let bad = TABLE.replace("0.514", "0");
        match parse_surface::<f64, _>(bad.as_bytes()) {
            Err(Error::SurfaceValue { row, column, .. }) => assert_eq!((row, column), (3, 5)),
            other => panic!("unexpected {other:?}"),
        }
        let bad = TABLE.replace("0.554", "abc");
        match parse_surface::<f64, _>(bad.as_bytes()) {
            Err(Error::SurfaceParse { row, column, .. }) => assert_eq!((row, column), (4, 3)),
            other => panic!("unexpected {other:?}"),
        }
        let bad = TABLE.replace("0.6,", "0.3,");
        assert!(matches!(
            parse_surface::<f64, _>(bad.as_bytes()),
            Err(Error::SurfaceKnots { axis: "t", index: 3 })
        ));
        let bad = TABLE.replace("t,", "time,");
        assert!(matches!(
            parse_surface::<f64, _>(bad.as_bytes()),
            Err(Error::SurfaceParse { row: 1, column: 1, .. })
        ));
    }

    #[test]
    fn recentered_and_parametric() {
        let s = table().recentered(100.0);
        assert_eq!(s.vol_at(0.0, 0.1), 0.462);
        let ln = VolSurface::lognormal(0.5).unwrap().recentered(100.0);
        assert_relative_eq!(ln.vol_at(-50.0, 0.3), 25.0);
        assert_eq!(ln.vol_at(-150.0, 0.3), 0.0);
        assert_eq!(ln.max_value(), None);
        assert!(VolSurface::lognormal(-1.0).is_err());
        assert_eq!(VolSurface::constant(0.3).unwrap().vol_at(7.0, 9.0), 0.3);
        assert_eq!(table().max_value(), Some(0.650));
    }
}
