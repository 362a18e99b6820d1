use proptest::prelude::*;
use wind_esn_core::esn::*;
use wind_esn_core::field::*;
use wind_esn_core::forecast::*;
use wind_esn_core::lorenz::{integrate_from, LorenzConfig};
use wind_esn_core::power::*;
use wind_esn_core::spatial::*;
use wind_esn_core::{Matrix, Vector};

fn locations(n: usize) -> Vec<Location> {
    (0..n).map(|i| Location::new(format!("s{i}"), i as f64 * 0.7, (i % 3) as f64)).collect()
}

fn positive_field(n_loc: usize, n_t: usize) -> impl Strategy<Value = SpaceTimeField> {
    prop::collection::vec(0.05f64..30.0, n_loc * n_t)
        .prop_map(move |v| SpaceTimeField::new(locations(n_loc), 3, Matrix::from_vec(n_t, n_loc, v)).unwrap())
}

fn spd2() -> impl Strategy<Value = Spd2> {
    (0.05f64..3.0, -0.9f64..0.9, 0.05f64..3.0).prop_map(|(a, r, b)| Spd2::new(a, r * (a * b).sqrt(), b).unwrap())
}

fn curve() -> PowerCurve {
    PowerCurve::new(3.0, 12.5, 25.0, 2750.0, vec![(4.0, 80.0), (6.0, 450.0), (8.0, 1150.0), (10.0, 2050.0), (12.0, 2700.0)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detrend_round_trip_and_unit_variance(f in positive_field(3, 60)) {
        let periods = [24.0, 12.0];
        let model = fit_harmonics(&f, &periods).unwrap();
        let res = detrend(&f, &model).unwrap();
        let back = retrend(&res, &model).unwrap();
        prop_assert_eq!(back.truncated, 0);
        for (a, b) in back.field.values().iter().zip(f.values().iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        for j in 0..3 {
            let v = wind_esn_core::stats::sample_variance(&res.column(j));
            prop_assert!((v - 1.0).abs() < 1e-10, "variance {}", v);
        }
    }

    #[test]
    fn ols_residuals_orthogonal_to_design(f in positive_field(2, 80)) {
        let periods = [24.0, 8.0];
        let model = fit_harmonics(&f, &periods).unwrap();
        let x = harmonic_design(&periods, f.start(), f.n_times());
        for j in 0..2 {
            let r = regression_residual(&f, &model, j);
            let g = x.transpose() * r;
            prop_assert!(g.amax() < 1e-8, "{}", g.amax());
        }
    }

    #[test]
    fn periodogram_parseval(v in prop::collection::vec(-5.0f64..5.0, 2..200)) {
        let amp = periodogram(&v).unwrap();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let ss: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
        let sa: f64 = amp.iter().map(|(_, a)| a * a).sum();
        prop_assert!((ss - sa).abs() < 1e-8 * (1.0 + ss));
    }

    #[test]
    fn reservoir_states_bounded_and_deterministic(
        seed in 0u64..1000,
        delta in 0.1f64..1.5,
        inputs in prop::collection::vec(-50.0f64..50.0, 40),
    ) {
        let spec = EsnSpec { reservoir_size: 30, lags: 1, leak_rate: 1.0, spectral_scale: delta, input_scale: 0.5, input_density: 0.5, seed, ..EsnSpec::default() };
        let mats = ReservoirMatrices::generate(&spec, 3);
        let xs: Vec<Vector> = inputs.chunks(2).map(|c| Vector::from_vec(vec![1.0, c[0], c[1]])).collect();
        let a = run_reservoir(&xs, &mats, &spec, None).unwrap();
        let b = run_reservoir(&xs, &ReservoirMatrices::generate(&spec, 3), &spec, None).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|s| s.h.iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn ridge_solution_is_penalised_minimum(
        data in prop::collection::vec(-1.0f64..1.0, 30 * 6 + 30 * 2),
        lambda in 0.01f64..5.0,
        dir in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let h = Matrix::from_vec(30, 6, data[..180].to_vec());
        let y = Matrix::from_vec(30, 2, data[180..].to_vec());
        let b = ridge_fit(&h, &y, lambda).unwrap();
        let obj = |b: &Matrix| (&y - &h * b).norm_squared() + lambda * b.norm_squared();
        let d = Matrix::from_vec(6, 2, dir);
        prop_assume!(d.norm() > 1e-6);
        let d = &d / d.norm() * 1e-3;
        let best = obj(b.matrix());
        prop_assert!(obj(&(b.matrix() + &d)) > best);
        prop_assert!(obj(&(b.matrix() - &d)) > best);
    }

    #[test]
    fn covariance_symmetric(
        sig in spd2(), sig2 in spd2(),
        nu in 0.2f64..4.0,
        p in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let comp = |c: [f64; 2], s: Spd2, sill: f64| MixtureComponent { center: c, partial_sill: sill, smoothness: nu, anisotropy: s, nugget: 0.1 };
        let model = CovarianceModel::new(vec![comp([0.0, 0.0], sig, 1.0), comp([2.0, 1.0], sig2, 2.0)], 1.0).unwrap();
        let a = Location::new("a", p[0], p[1]);
        let b = Location::new("b", p[2], p[3]);
        prop_assert_eq!(covariance(&a, &b, &model).unwrap(), covariance(&b, &a, &model).unwrap());
    }

    #[test]
    fn identical_components_reduce_to_stationary(
        sig in spd2(),
        nu in 0.2f64..4.0,
        p in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let comp = |c: [f64; 2]| MixtureComponent { center: c, partial_sill: 1.7, smoothness: nu, anisotropy: sig, nugget: 0.0 };
        let model = CovarianceModel::new(vec![comp([0.0, 0.0]), comp([2.0, 1.0]), comp([-1.0, 3.0])], 1.0).unwrap();
        let a = Location::new("a", p[0], p[1]);
        let b = Location::new("b", p[2], p[3]);
        let c = covariance(&a, &b, &model).unwrap();
        let s = 1.7 * matern_stationary([p[0] - p[2], p[1] - p[3]], &sig, nu).unwrap();
        prop_assert!((c - s).abs() < 1e-12, "{} vs {}", c, s);
    }

    #[test]
    fn matern_decreasing_along_rays(sig in spd2(), nu in 0.1f64..6.0, angle in 0.0f64..6.3) {
        let dir = [angle.cos(), angle.sin()];
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let r = 0.05 * k as f64;
            let v = matern_stationary([r * dir[0], r * dir[1]], &sig, nu).unwrap();
            prop_assert!(v <= prev, "r {} v {} prev {}", r, v, prev);
            prev = v;
        }
    }

    #[test]
    fn ensemble_mean_permutation_invariant(v in prop::collection::vec(-3.0f64..3.0, 4 * 6), shift in 1usize..4) {
        let members: Vec<Vec<Matrix>> = v.chunks(6).map(|c| vec![Matrix::from_vec(3, 2, c.to_vec())]).collect();
        let mut rotated = members.clone();
        rotated.rotate_left(shift);
        let a = ForecastEnsemble::from_members(members).unwrap();
        let b = ForecastEnsemble::from_members(rotated).unwrap();
        prop_assert!((&a.mean[0] - &b.mean[0]).amax() < 1e-14);
    }

    #[test]
    fn calibrated_intervals_nested(e in prop::collection::vec(-4.0f64..4.0, 60 * 2 * 2)) {
        let levels = interval_levels(&[0.95, 0.8, 0.6]);
        let truth: Vec<Matrix> = (0..2).map(|h| Matrix::from_vec(60, 2, e[h * 120..(h + 1) * 120].to_vec())).collect();
        let zero: Vec<Matrix> = (0..2).map(|_| Matrix::zeros(60, 2)).collect();
        let q = calibrate(&truth, &zero, &levels).unwrap();
        for h in 1..=2 {
            for loc in 0..2 {
                let (a0, a1) = q.interval(h, loc, 0.6).unwrap();
                let (b0, b1) = q.interval(h, loc, 0.8).unwrap();
                let (c0, c1) = q.interval(h, loc, 0.95).unwrap();
                prop_assert!(c0 <= b0 && b0 <= a0 && a0 <= a1 && a1 <= b1 && b1 <= c1);
            }
        }
    }

    #[test]
    fn power_monotone_and_zero_outside(mut v in prop::collection::vec(0.0f64..24.99, 2..40)) {
        let c = curve();
        v.sort_by(f64::total_cmp);
        let p: Vec<f64> = v.iter().map(|s| to_power(*s, &c)).collect();
        for w in p.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for (s, p) in v.iter().zip(&p) {
            if *s < c.cut_in() {
                prop_assert_eq!(*p, 0.0);
            }
        }
        prop_assert_eq!(to_power(25.0 + v[0] + 1e-9, &c), 0.0);
    }

    #[test]
    fn energy_error_is_metric_like(a in prop::collection::vec(0.0f64..3000.0, 1..30), d in prop::collection::vec(-100.0f64..100.0, 30)) {
        let b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
        let ab = energy_error(&a, &b, 1.0).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, energy_error(&b, &a, 1.0).unwrap());
        prop_assert_eq!(energy_error(&a, &a, 1.0).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn lorenz_cyclic_symmetry(y0 in prop::collection::vec(-3.0f64..3.0, 6), shift in 1usize..6) {
        let cfg = LorenzConfig { sites: 6, t_start: 0.0, t_end: 2.0, burn_in_steps: 0, noise_sd: 0.0, ..Default::default() };
        let mut rot = y0.clone();
        rot.rotate_right(shift);
        let a = integrate_from(&cfg, &y0).unwrap();
        let b = integrate_from(&cfg, &rot).unwrap();
        for t in 0..a.truth.nrows() {
            for j in 0..6 {
                prop_assert_eq!(a.truth[(t, j)], b.truth[(t, (j + shift) % 6)]);
            }
        }
    }
}
