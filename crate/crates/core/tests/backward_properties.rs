use deltadual::backward::solve_backward;
use deltadual::grid::Grid;
use deltadual::legendre::{fenchel_conjugate, frame_from_solution, from_dual, x_of_p, DualOptions};
use deltadual::volatility::VolSurface;
use proptest::prelude::*;

fn solve(a: f64, maturity: f64, steps: usize) -> deltadual::PdeSolution<f64> {
    let g = Grid::clustered(121, -80.0, 80.0, 0.0, 8.0).unwrap();
    solve_backward(&VolSurface::constant(a).unwrap(), &g, maturity, steps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prices_are_bounded_convex_and_monotone(a in 2.0f64..15.0, maturity in 0.1f64..1.0) {
        let sol = solve(a, maturity, 20);
        let x = sol.grid.nodes();
        let n = x.len();
        for k in 0..sol.levels() {
            let c = &sol.values[k];
            prop_assert_eq!(c[0], 0.0);
            prop_assert_eq!(c[n - 1], x[n - 1]);
            for i in 0..n {
                prop_assert!(c[i] >= x[i].max(0.0) - 1e-10);
                prop_assert!(c[i] <= x[i].max(0.0) + x[n - 1] + 1e-10);
            }
            prop_assert!(sol.gammas[k][1..n - 1].iter().all(|&g| g >= -1e-10));
            let d = &sol.deltas[k];
            prop_assert!(d[1..n - 1].windows(2).all(|w| w[1] >= w[0] - 1e-10));
            prop_assert!(d[1..n - 1].iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v)));
        }
    }

    #[test]
    fn young_inequality_and_involution(a in 2.0f64..15.0, level in 0usize..10) {
        let sol = solve(a, 1.0, 20);
        let f = frame_from_solution(&sol, level, DualOptions::default()).unwrap();
        let x = sol.grid.nodes();
        let c = &sol.values[level];
        for (&p, &cs) in f.p.nodes().iter().zip(&f.c_star) {
            for (&xi, &ci) in x.iter().zip(c) {
                prop_assert!(ci + cs >= p * xi - 1e-9);
            }
            prop_assert!((fenchel_conjugate(x, c, p) - cs).abs() <= 1e-9 * (1.0 + cs.abs()) + 1e-12);
        }
        let back = from_dual(&f);
        for (i, &xm) in f.x_map.iter().enumerate() {
            let j = x.iter().position(|&xi| xi == xm).unwrap();
            prop_assert!((back[i] - c[j]).abs() <= 1e-11 * (1.0 + c[j].abs()));
        }
    }

    #[test]
    fn recovered_map_is_monotone(a in 2.0f64..15.0, level in 0usize..10) {
        let sol = solve(a, 1.0, 20);
        let f = frame_from_solution(&sol, level, DualOptions::default()).unwrap();
        let xm = x_of_p(&f);
        prop_assert!(f.x_map.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(xm.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{xm:?}");
    }
}

#[test]
fn halving_the_step_converges_faster_than_first_order() {
    let at_money = |steps: usize| {
        let sol = solve(10.0, 1.0, steps);
        let i = sol.grid.nodes().iter().position(|&x| x == 0.0).unwrap();
        sol.values[0][i]
    };
    let (a, b, c) = (at_money(40), at_money(80), at_money(160));
    let ratio = (a - b).abs() / (b - c).abs();
    assert!(ratio >= 3.5, "ratio {ratio}");
}

#[test]
fn single_precision_pipeline() {
    let g = Grid::<f32>::clustered(81, -40.0, 40.0, 0.0, 6.0).unwrap();
    let sol = solve_backward(&VolSurface::constant(8.0f32).unwrap(), &g, 1.0, 20).unwrap();
    let f = frame_from_solution(&sol, 0, DualOptions::default()).unwrap();
    assert!(f.c_star.iter().all(|&v| v <= 1e-4));
    let mid = sol.grid.nodes().iter().position(|&x| x == 0.0).unwrap();
    let exact = 8.0f32 / (2.0 * std::f32::consts::PI).sqrt();
    assert!((sol.values[0][mid] - exact).abs() < 0.05, "{}", sol.values[0][mid]);
}
