use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wind_esn_core::esn::*;
use wind_esn_core::lorenz::{run_study, study_grid, Method, StudyConfig};
use wind_esn_core::baselines::ArimaOrder;
use wind_esn_core::{Matrix, Vector};

fn qr_ridge(h: &Matrix, y: &Matrix, lambda: f64) -> Matrix {
    let (n, p) = h.shape();
    let aug_h = Matrix::from_fn(n + p, p, |r, c| {
        if r < n {
            h[(r, c)]
        } else if r - n == c {
            lambda.sqrt()
        } else {
            0.0
        }
    });
    let aug_y = Matrix::from_fn(n + p, y.ncols(), |r, c| if r < n { y[(r, c)] } else { 0.0 });
    let qr = aug_h.qr();
    let qty = qr.q().transpose() * aug_y;
    qr.r().solve_upper_triangular(&qty).unwrap()
}

#[test]
fn ridge_matches_qr_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for instance in 0..20 {
        let n = rng.random_range(60..=200);
        let p = 2 * rng.random_range(1..=25);
        let k = rng.random_range(1..=4);
        let h = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = Matrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        for lambda in [0.0, 0.37] {
            let b = ridge_fit(&h, &y, lambda).unwrap_or_else(|e| panic!("instance {instance} n {n} p {p} λ {lambda}: {e}"));
            let err = (b.matrix() - qr_ridge(&h, &y, lambda)).amax();
            assert!(err < 1e-8, "instance {instance} λ {lambda}: {err}");
        }
    }
}

#[test]
fn echo_state_contraction() {
    for delta in [0.5, 0.9] {
        for seed in 0..5 {
            let spec = EsnSpec {
                reservoir_size: 100,
                lags: 1,
                leak_rate: 1.0,
                spectral_scale: delta,
                input_scale: 0.1,
                input_density: 0.3,
                seed,
                ..EsnSpec::default()
            };
            let mats = ReservoirMatrices::generate(&spec, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let inputs: Vec<Vector> = (0..500)
                .map(|t| Vector::from_vec(vec![1.0, (t as f64 / 7.0).sin(), rng.random_range(-1.0..1.0)]))
                .collect();
            let start = |rng: &mut ChaCha8Rng| ReservoirState {
                h: Vector::from_fn(100, |_, _| rng.random_range(-1.0..1.0)),
                t: 0,
            };
            let (a0, b0) = (start(&mut rng), start(&mut rng));
            let a = run_reservoir(&inputs, &mats, &spec, Some(&a0)).unwrap();
            let b = run_reservoir(&inputs, &mats, &spec, Some(&b0)).unwrap();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (&x.h - &y.h).amax()).collect();
            assert!(d[499] < 1e-6, "δ {delta} seed {seed}: final distance {}", d[499]);
            let first_small = d.iter().position(|v| *v < 1e-6).unwrap();
            assert!(first_small < 500);
        }
    }
}

#[test]
fn lorenz_horizon_ordering_small_study() {
    let mut grid = study_grid();
    grid.reservoir_size = vec![50];
    grid.spectral_scale = vec![0.9];
    grid.leak_rate = vec![1.0];
    let cfg = StudyConfig {
        etas: vec![1.0],
        replicates: 2,
        esn_grid: grid,
        cv_members: 2,
        members: 4,
        arima_orders: vec![ArimaOrder::new(1, 0, 0), ArimaOrder::new(2, 0, 0), ArimaOrder::new(0, 1, 1)],
        ..Default::default()
    };
    let (rows, _) = run_study(&cfg).unwrap();
    for m in Method::ALL {
        let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.mse_mean).collect();
        assert_eq!(v.len(), 3);
        assert!(v[0] <= v[1] && v[1] <= v[2], "{}: {v:?}", m.name());
    }
}
