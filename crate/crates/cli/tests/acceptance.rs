//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on failure.
//! Not part of the default test run: `cargo test -p wind-esn --test acceptance --release`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use wind_esn::artifacts::{read_json, MetricsFile};
use wind_esn_core::baselines::*;
use wind_esn_core::esn::*;
use wind_esn_core::field::{fit_harmonics, Location, SpaceTimeField};
use wind_esn_core::forecast::{calibrate, coverage, interval_levels};
use wind_esn_core::lorenz::{aggregate, run_replicate, Method, StudyConfig, StudyRow};
use wind_esn_core::power::{to_power, PowerCurve};
use wind_esn_core::rng::seeded;
use wind_esn_core::spatial::*;
use wind_esn_core::{Matrix, Vector};

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn lorenz(r: &mut Report) {
    let cfg = StudyConfig {
        etas: vec![0.2, 0.8, 1.4],
        replicates: 10,
        ..StudyConfig::default()
    };
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..3).flat_map(|e| (0..10).map(move |k| (e, k))).collect();
    let results = match jobs.par_iter().map(|&(e, k)| run_replicate(&cfg, e, k)).collect::<Result<Vec<_>, _>>() {
        Ok(v) => v,
        Err(e) => {
            r.check("lorenz study", false, format!("study failed: {e}"));
            return;
        }
    };
    let rows = aggregate(&cfg, &results);
    let secs = start.elapsed().as_secs_f64();
    let get = |m: Method, eta: f64, h: usize| -> f64 {
        rows.iter()
            .find(|x: &&StudyRow| x.method == m && (x.eta - eta).abs() < 1e-12 && x.horizon == h)
            .map(|x| x.mse_mean)
            .unwrap_or(f64::NAN)
    };
    for &eta in &cfg.etas {
        let line: Vec<String> = Method::ALL
            .iter()
            .map(|&m| format!("{} {:.3}/{:.3}/{:.3}", m.name(), get(m, eta, 1), get(m, eta, 2), get(m, eta, 3)))
            .collect();
        println!("     η={eta}: {}", line.join(", "));
    }
    let mut bad = Vec::new();
    for &eta in &cfg.etas {
        for m in Method::ALL {
            let v = [get(m, eta, 1), get(m, eta, 2), get(m, eta, 3)];
            if !(v[0] <= v[1] && v[1] <= v[2]) {
                bad.push(format!("{} η={eta} {v:?}", m.name()));
            }
        }
    }
    r.check(
        "lorenz (a) MSE nondecreasing in horizon",
        bad.is_empty(),
        if bad.is_empty() { format!("all 12 method/η curves, {secs:.0} s") } else { bad.join("; ") },
    );
    let mut detail = Vec::new();
    let mut ok = true;
    for h in [2, 3] {
        let esn = get(Method::Esn, 1.4, h);
        for m in [Method::Var, Method::Arima, Method::Persistence] {
            let o = get(m, 1.4, h);
            ok &= esn <= o;
            detail.push(format!("h{h} esn {esn:.3} vs {} {o:.3}", m.name()));
        }
    }
    r.check("lorenz (b) ESN best at η=1.4, h=2,3", ok, detail.join(", "));
    let margin = |eta: f64| (1..=3).map(|h| get(Method::Var, eta, h) - get(Method::Esn, eta, h)).collect::<Vec<_>>();
    let (lo, hi) = (margin(0.2), margin(1.4));
    r.check(
        "lorenz (c) ESN-over-VAR margin grows with η",
        (0..3).all(|k| hi[k] > lo[k]),
        format!("VAR−ESN per horizon at η=0.2: {lo:.3?}, at η=1.4: {hi:.3?}"),
    );
}

fn qr_ridge(h: &Matrix, y: &Matrix, lambda: f64) -> Matrix {
    let (n, p) = h.shape();
    let aug_h = Matrix::from_fn(n + p, p, |r, c| if r < n { h[(r, c)] } else if r - n == c { lambda.sqrt() } else { 0.0 });
    let aug_y = Matrix::from_fn(n + p, y.ncols(), |r, c| if r < n { y[(r, c)] } else { 0.0 });
    let qr = aug_h.qr();
    qr.r().solve_upper_triangular(&(qr.q().transpose() * aug_y)).unwrap()
}

fn ridge(r: &mut Report) {
    let mut rng = seeded(41);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(60..=200);
        let p = 2 * rng.random_range(1..=25);
        let k = rng.random_range(1..=5);
        let lambda = if rng.random_range(0..4) == 0 { 0.0 } else { rng.random_range(0.01..5.0) };
        let h = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = Matrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        let err = match ridge_fit(&h, &y, lambda) {
            Ok(b) => (b.matrix() - qr_ridge(&h, &y, lambda)).amax(),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    r.check("ridge matches augmented QR oracle", worst < 1e-8, format!("max-norm error {worst:.2e} over 20 instances (tol 1e-8)"));
}

fn echo_state(r: &mut Report) {
    let mut worst: f64 = 0.0;
    for delta in [0.5, 0.9] {
        for seed in 0..5 {
            let spec = EsnSpec {
                reservoir_size: 100,
                leak_rate: 1.0,
                spectral_scale: delta,
                input_scale: 0.1,
                input_density: 0.3,
                seed,
                ..EsnSpec::default()
            };
            let mats = ReservoirMatrices::generate(&spec, 3);
            let mut rng = seeded(seed + 500);
            let inputs: Vec<Vector> = (0..500)
                .map(|t| Vector::from_vec(vec![1.0, (t as f64 / 9.0).sin(), rng.random_range(-1.0..1.0)]))
                .collect();
            let mut start = || ReservoirState {
                h: Vector::from_fn(100, |_, _| rng.random_range(-1.0..1.0)),
                t: 0,
            };
            let (a0, b0) = (start(), start());
            let a = run_reservoir(&inputs, &mats, &spec, Some(&a0)).unwrap();
            let b = run_reservoir(&inputs, &mats, &spec, Some(&b0)).unwrap();
            worst = worst.max((&a[499].h - &b[499].h).amax());
        }
    }
    r.check("echo-state property", worst < 1e-6, format!("max final distance {worst:.2e} for δ∈{{0.5,0.9}} × 5 seeds (tol 1e-6)"));
}

fn kriging(r: &mut Report) {
    let mut rng = seeded(7);
    let locs: Vec<Location> = (0..40)
        .map(|i| Location::new(format!("p{i}"), rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)))
        .collect();
    let model = CovarianceModel::new(
        vec![
            MixtureComponent {
                center: [1.0, 1.0],
                partial_sill: 1.2,
                smoothness: 0.8,
                anisotropy: Spd2::new(0.8, 0.2, 0.5).unwrap(),
                nugget: 0.0,
            },
            MixtureComponent {
                center: [4.0, 4.0],
                partial_sill: 0.6,
                smoothness: 2.0,
                anisotropy: Spd2::isotropic(1.5),
                nugget: 0.0,
            },
        ],
        1.5,
    )
    .unwrap();
    let idx: Vec<usize> = (0..40).step_by(4).collect();
    let knots = KnotSet::new(idx.clone(), vec![KnotTag::Grid; idx.len()], 40).unwrap();
    let w = kriging_weights(&locs, &knots, &model).unwrap();
    let vals = Vector::from_fn(idx.len(), |_, _| rng.random_range(-2.0..2.0));
    let pred = w.predict(&vals).unwrap();
    let exact = idx.iter().enumerate().map(|(k, &i)| (pred[i] - vals[k]).abs()).fold(0.0, f64::max);
    r.check("kriging exact at knots (τ²=0)", exact < 1e-8, format!("max error {exact:.2e} at 10 knots (tol 1e-8)"));

    let (sill, nugget, range2) = (1.7, 0.3, 0.64);
    let stat = CovarianceModel::stationary(sill, 0.5, Spd2::isotropic(range2), nugget).unwrap();
    let knot = 3;
    let w = kriging_weights(&locs, &KnotSet::new(vec![knot], vec![KnotTag::Grid], 40).unwrap(), &stat).unwrap();
    let y = 1.3;
    let pred = w.predict(&Vector::from_vec(vec![y])).unwrap();
    let mut worst: f64 = 0.0;
    for (i, l) in locs.iter().enumerate() {
        let expect = if i == knot {
            y
        } else {
            let q = (((l.x - locs[knot].x).powi(2) + (l.y - locs[knot].y).powi(2)) / range2).sqrt();
            sill * (-q).exp() / (sill + nugget) * y
        };
        worst = worst.max((pred[i] - expect).abs());
    }
    r.check("kriging scalar closed form", worst < 1e-10, format!("max error {worst:.2e} over 40 locations (tol 1e-10)"));
}

fn matern(r: &mut Report) {
    let mut worst: f64 = 0.0;
    for q in [0.01, 0.1, 1.0, 5.0] {
        worst = worst.max((matern_correlation(q, 0.5) - (-q).exp()).abs());
        worst = worst.max((matern_correlation(q, 1.5) - (1.0 + q) * (-q).exp()).abs());
    }
    r.check("Matérn ν=0.5, 1.5 closed forms", worst < 1e-10, format!("max error {worst:.2e} (tol 1e-10)"));
}

fn calibration(r: &mut Report) {
    let mut rng = seeded(99);
    let n_loc = 20;
    let sds: Vec<f64> = (0..n_loc).map(|j| 0.5 + 0.1 * j as f64).collect();
    let mut draw = |n: usize| Matrix::from_fn(n, n_loc, |_, j| sds[j] * Distribution::<f64>::sample(&StandardNormal, &mut rng));
    let (cal, eval) = (draw(10_000), draw(10_000));
    let zero = Matrix::zeros(10_000, n_loc);
    let q = calibrate(&[cal], &[zero.clone()], &interval_levels(&[0.95, 0.8, 0.6])).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (c, tol) in [(0.95, 0.02), (0.8, 0.03), (0.6, 0.03)] {
        let cov = coverage(&eval, &zero, &q, 1, c).unwrap();
        let dev = cov.per_location.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
        ok &= dev <= tol;
        detail.push(format!("{:.0}%: mean {:.2}%, worst deviation {:.2} pp (tol {:.0})", c * 100.0, cov.mean * 100.0, dev * 100.0, tol * 100.0));
    }
    r.check("calibration coverage", ok, detail.join("; "));
}

fn harmonic_field(n: usize, noise: f64, seed: u64) -> (SpaceTimeField, [f64; 5]) {
    let beta = [20.0, 1.5, -0.7, 0.4, 0.25];
    let periods = [8760.0, 24.0];
    let mut rng = seeded(seed);
    let v = Matrix::from_fn(n, 1, |t, _| {
        let t = t as f64;
        let w1 = std::f64::consts::TAU * t / periods[0];
        let w2 = std::f64::consts::TAU * t / periods[1];
        let root = beta[0] + beta[1] * w1.cos() + beta[2] * w1.sin() + beta[3] * w2.cos() + beta[4] * w2.sin()
            + noise * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        root * root
    });
    (SpaceTimeField::new(vec![Location::new("a", 0.0, 0.0)], 0, v).unwrap(), beta)
}

fn harmonics(r: &mut Report) {
    // Column order β0, then (cos, sin) per period.
    let err = |noise: f64| {
        let (f, beta) = harmonic_field(17_520, noise, 3);
        let m = fit_harmonics(&f, &[8760.0, 24.0]).unwrap();
        (0..5).map(|k| (m.coefficients()[(0, k)] - beta[k]).abs()).fold(0.0, f64::max)
    };
    let clean = err(0.0);
    r.check("harmonic recovery, noiseless", clean < 1e-8, format!("max coefficient error {clean:.2e} (tol 1e-8)"));
    let noisy = err(1.0);
    r.check("harmonic recovery, unit noise, 17,520 steps", noisy < 0.05, format!("max coefficient error {noisy:.4} (tol 0.05)"));
}

fn baselines(r: &mut Report) {
    let mut rng = seeded(12);
    let n = 300;
    let mut walk = Matrix::zeros(n, 3);
    for j in 0..3 {
        for t in 1..n {
            walk[(t, j)] = walk[(t - 1, j)] + Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
    }
    let train = walk.rows(0, 200).into_owned();
    let eval = walk.rows(200, 100).into_owned();
    let models: Vec<ArimaModel> = (0..3)
        .map(|j| fit_arima(&train.column(j).iter().copied().collect::<Vec<_>>(), ArimaOrder::new(0, 1, 0)).unwrap())
        .collect();
    let a = rolling_arima(&models, &train, &eval, 3).unwrap();
    let p = rolling_persistence(&train, &eval, 3).unwrap();
    let same = a == p;
    r.check("ARIMA(0,1,0) equals persistence", same, format!("3 horizons × 3 series × 100 issues, exact: {same}"));

    let diag = [[0.6, -0.2], [0.3, 0.1], [-0.4, 0.25]];
    let c = [0.5, -1.0, 0.2];
    let a_mats: Vec<Matrix> = (0..2).map(|l| Matrix::from_fn(3, 3, |i, k| if i == k { diag[i][l] } else { 0.0 })).collect();
    let var = VarModel::new(Vector::from_row_slice(&c), a_mats).unwrap();
    let hist = Matrix::from_fn(50, 3, |_, _| rng.random_range(-2.0..2.0));
    let fv = forecast_var(&var, &hist, 4).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let ar = ArimaModel {
            order: ArimaOrder::new(2, 0, 0),
            constant: c[j],
            ar: diag[j].to_vec(),
            ma: vec![],
            sigma2: 1.0,
        };
        let fa = forecast_arima(&ar, &hist.column(j).iter().copied().collect::<Vec<_>>(), 4).unwrap();
        for h in 0..4 {
            worst = worst.max((fv[h][j] - fa[h]).abs());
        }
    }
    r.check("diagonal VAR equals per-series AR", worst < 1e-6, format!("max difference {worst:.2e} (tol 1e-6)"));

    let field = Matrix::from_fn(80, 12, |_, _| rng.random_range(-1.0..1.0));
    let basis = eof_basis(&field, 12).unwrap();
    let back = eof_reconstruct(&eof_project(&field, &basis).unwrap(), &basis).unwrap();
    let err = (back - &field).amax();
    r.check("full-rank EOF round trip", err < 1e-8, format!("max error {err:.2e} (tol 1e-8)"));
}

fn power(r: &mut Report) {
    let c = PowerCurve::new(3.0, 12.0, 25.0, 3000.0, vec![(6.0, 500.0), (9.0, 1800.0)]).unwrap();
    let eps = 1e-9;
    let interp = |s: f64| {
        let pts = [(3.0, 0.0), (6.0, 500.0), (9.0, 1800.0), (12.0, 3000.0)];
        let k = pts.windows(2).position(|w| s >= w[0].0 && s < w[1].0).unwrap();
        let (a, b) = (pts[k], pts[k + 1]);
        a.1 + (s - a.0) / (b.0 - a.0) * (b.1 - a.1)
    };
    let probes = [
        (3.0 - eps, 0.0, "cut_in−ε"),
        (3.0 + eps, interp(3.0 + eps), "cut_in+ε"),
        (12.0 - eps, interp(12.0 - eps), "rated−ε"),
        (12.0 + eps, 3000.0, "rated+ε"),
        (25.0 - eps, 3000.0, "cut_out−ε"),
        (25.0 + eps, 0.0, "cut_out+ε"),
    ];
    let mut bad = Vec::new();
    for (s, expect, name) in probes {
        let got = to_power(s, &c);
        let ok = if expect == 0.0 || expect == 3000.0 { got == expect } else { (got - expect).abs() <= 1e-9 * expect.max(1.0) && got > 0.0 && got < 3000.0 };
        if !ok {
            bad.push(format!("{name}: {got} vs {expect}"));
        }
    }
    r.check(
        "power curve zones at boundary probes",
        bad.is_empty(),
        if bad.is_empty() { "6 probes at ±1e-9".to_string() } else { bad.join("; ") },
    );
}

fn end_to_end(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let exe = env!("CARGO_BIN_EXE_wind-esn");
    let start = Instant::now();
    let steps: &[&[&str]] = &[
        &["demo-data", "--out", "."],
        &["--config", "config.toml", "fit-mean"],
        &["--config", "config.toml", "select-knots"],
        &["--config", "config.toml", "fit-cov"],
        &["--config", "config.toml", "cv"],
        &["--config", "config.toml", "train-esn"],
        &["--config", "config.toml", "forecast"],
        &["--config", "config.toml", "calibrate"],
        &["--config", "config.toml", "evaluate", "--quantiles", "run/quantiles.json"],
        &["--config", "config.toml", "baseline", "persistence"],
        &["--config", "config.toml", "evaluate", "--forecasts", "run/baseline_persistence"],
    ];
    for s in steps {
        let out = Command::new(exe).current_dir(d).args(*s).output().unwrap();
        if !out.status.success() {
            r.check("end-to-end pipeline", false, format!("{s:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
            return;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mse = |f: &str, h: usize| {
        let m: MetricsFile = read_json(&Path::new(d).join("run").join(f)).unwrap();
        m.records.iter().find(|x| x.horizon == h).map(|x| x.mse).unwrap_or(f64::NAN)
    };
    let (esn, pers) = (mse("metrics_s-esn.json", 2), mse("metrics_persistence.json", 2));
    r.check("end-to-end pipeline under 10 minutes", secs < 600.0, format!("{secs:.1} s"));
    r.check("end-to-end S-ESN beats persistence at h=2", esn < pers, format!("S-ESN {esn:.4} vs persistence {pers:.4}"));
}

fn main() {
    let mut r = Report { failures: 0 };
    ridge(&mut r);
    echo_state(&mut r);
    kriging(&mut r);
    matern(&mut r);
    calibration(&mut r);
    harmonics(&mut r);
    baselines(&mut r);
    power(&mut r);
    end_to_end(&mut r);
    lorenz(&mut r);
    if r.failures > 0 {
        println!("{} criteria failed", r.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
