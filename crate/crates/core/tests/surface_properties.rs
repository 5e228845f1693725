use deltadual::experiment::TABLE1_CSV;
use deltadual::volatility::{parse_surface, VolSurface};
use proptest::prelude::*;

fn table() -> VolSurface<f64> {
    parse_surface(TABLE1_CSV.as_bytes()).unwrap()
}

#[test]
fn knots_are_reproduced() {
    let s = table();
    let t = s.t_knots().to_vec();
    let x = s.x_knots().to_vec();
    let rows: Vec<Vec<f64>> = TABLE1_CSV
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    for (j, &tj) in t.iter().enumerate() {
        for (i, &xi) in x.iter().enumerate() {
            let got = s.vol_at(xi, tj);
            assert!((got - rows[j][i]).abs() <= 1e-15 * rows[j][i]);
        }
    }
}

#[test]
fn nan_coordinates_give_nan() {
    let s = table();
    assert!(s.vol_at(f64::NAN, 0.5).is_nan());
    assert!(s.vol_at(100.0, f64::NAN).is_nan());
}

proptest! {
    #[test]
    fn continuous_across_knots(i in 1usize..8, t in 0.1f64..0.8) {
        let s = table();
        let k = s.x_knots()[i];
        let left = s.vol_at(k - 1e-10, t);
        let right = s.vol_at(k + 1e-10, t);
        prop_assert!((left - right).abs() < 1e-10);
        prop_assert!((left - s.vol_at(k, t)).abs() < 1e-10);
    }

    #[test]
    fn flat_beyond_the_hull(x in 150.0f64..1e4, t in 0.0f64..3.0, y in 70.0f64..150.0) {
        let s = table();
        let tc = t.clamp(0.1, 0.8);
        prop_assert_eq!(s.vol_at(x, t), s.vol_at(150.0, tc));
        prop_assert_eq!(s.vol_at(-x, t), s.vol_at(70.0, tc));
        let lo = s.vol_at(y, tc);
        prop_assert!(lo >= 0.447 - 1e-12 && lo <= 0.650 + 1e-12);
    }

    #[test]
    fn recentering_shifts_the_argument(k in 80.0f64..120.0, x in -30.0f64..30.0, t in 0.1f64..0.8) {
        let s = table();
        prop_assert_eq!(s.recentered(k).vol_at(x, t), s.vol_at(x + k, t));
    }
}
