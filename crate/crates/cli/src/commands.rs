//! Command implementations. Each reads its declared inputs, writes its
//! outputs and a manifest next to the primary output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use wind_esn_core::baselines::{eof_basis, eof_project, eof_reconstruct, rolling_arima, rolling_persistence, rolling_var, select_arima, select_var};
use wind_esn_core::esn::{EsnModel, EsnSpec, ReservoirMatrices};
use wind_esn_core::field::{detrend, fit_harmonics, retrend, Location, SpaceTimeField};
use wind_esn_core::forecast::{calibrate, coverage, interval_levels, mse, roll, run_member, ForecastEnsemble, Forecaster};
use wind_esn_core::lorenz::{aggregate, run_replicate, StudyConfig};
use wind_esn_core::power::{energy_error, quantile_energy_error, site_power, PowerCurve, TurbineSite};
use wind_esn_core::spatial::{assemble, fit_center, kriging_weights, select_knots, FitOptions, KnotSet, KrigingWeights};
use wind_esn_core::tuning::{evaluate_group, finish, grid_groups};
use wind_esn_core::{Error, Matrix};

use crate::artifacts::*;
use crate::config::ExperimentConfig;
use crate::demo::{self, DemoConfig};
use crate::error::{usage, CliError, Result};
use crate::format::{read_field, write_field};
use crate::manifest::ManifestBuilder;

/// Validate the split against a field and return the test end.
pub fn check_split(cfg: &ExperimentConfig, field: &SpaceTimeField) -> Result<usize> {
    let s = &cfg.split;
    let end = s.test_end.unwrap_or(field.end());
    if s.train_end <= field.start() || end > field.end() || s.validation_end >= end {
        usage!(
            "split train_end={} validation_end={} test_end={end} does not fit field times [{}, {})",
            s.train_end,
            s.validation_end,
            field.start(),
            field.end()
        );
    }
    Ok(end)
}

fn knot_ids(field: &SpaceTimeField, knots: &KnotSet) -> Vec<String> {
    knots.indices().iter().map(|&i| field.locations()[i].id.clone()).collect()
}

fn load_knots(path: &Path, field: &SpaceTimeField) -> Result<KnotSet> {
    read_json::<KnotsFile>(path)?.to_knots(path, field)
}

fn ids(field: &SpaceTimeField) -> Vec<String> {
    field.locations().iter().map(|l| l.id.clone()).collect()
}

pub fn horizon_file(dir: &Path, h: usize) -> PathBuf {
    dir.join(format!("h{h}.wsf"))
}

/// Horizon files `h1.wsf, h2.wsf, ...` present in `dir`.
pub fn read_forecast_dir(dir: &Path) -> Result<Vec<SpaceTimeField>> {
    let mut out = Vec::new();
    while horizon_file(dir, out.len() + 1).is_file() {
        out.push(read_field(&horizon_file(dir, out.len() + 1))?);
    }
    if out.is_empty() {
        return Err(CliError::format(dir, "no h1.wsf forecast file found"));
    }
    Ok(out)
}

/// Write per-horizon matrices whose rows start at target time `first + h − 1`.
fn write_forecasts(dir: &Path, prefix: &str, locs: &[Location], first: usize, per_h: &[Matrix]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (k, m) in per_h.iter().enumerate() {
        let f = SpaceTimeField::new(locs.to_vec(), first + k, m.clone())?;
        let p = dir.join(format!("{prefix}h{}.wsf", k + 1));
        write_field(&p, &f)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Common window of two fields intersected with `[from, to)`.
fn overlap(a: &SpaceTimeField, b: &SpaceTimeField, from: usize, to: usize) -> Option<(usize, usize)> {
    let lo = a.start().max(b.start()).max(from);
    let hi = a.end().min(b.end()).min(to);
    (lo < hi).then_some((lo, hi))
}

pub fn demo_data(cfg: &ExperimentConfig, out: &Path, demo: DemoConfig) -> Result<()> {
    let field = demo::generate(&DemoConfig { seed: cfg.seed, ..demo })?;
    let data = out.join("data.wsf");
    write_field(&data, &field)?;
    let config = out.join("config.toml");
    write_bytes(&config, demo::demo_config_toml(cfg.seed).as_bytes())?;
    let curve = out.join("curve_synthetic.csv");
    write_bytes(&curve, encode_power_curve(&demo::synthetic_curve()).as_bytes())?;
    let sites = out.join("sites.toml");
    write_bytes(&sites, demo::demo_sites_toml().as_bytes())?;
    ManifestBuilder::new("demo-data", cfg).output(&data).output(&config).output(&curve).output(&sites).write()?;
    Ok(())
}

pub fn fit_mean(cfg: &ExperimentConfig, data_path: &Path, mean_out: &Path, residuals_out: &Path) -> Result<()> {
    let data = read_field(data_path)?;
    check_split(cfg, &data)?;
    let train = data.window(data.start(), cfg.split.train_end)?;
    let model = fit_harmonics(&train, &cfg.harmonics.periods)?;
    let residuals = detrend(&data, &model)?;
    write_json(mean_out, &MeanModelFile::from_model(&model))?;
    write_field(residuals_out, &residuals)?;
    ManifestBuilder::new("fit-mean", cfg).input(data_path).output(mean_out).output(residuals_out).write()?;
    Ok(())
}

pub fn select_knots_cmd(cfg: &ExperimentConfig, data_path: &Path, out: &Path) -> Result<()> {
    let data = read_field(data_path)?;
    check_split(cfg, &data)?;
    let train = data.window(data.start(), cfg.split.train_end)?;
    let k = &cfg.knots;
    let knots = select_knots(&train, k.grid_step, k.speed_threshold, k.min_separation)?;
    write_json(out, &KnotsFile::new(&knots, &data, k.grid_step, k.speed_threshold, k.min_separation))?;
    ManifestBuilder::new("select-knots", cfg).input(data_path).output(out).write()?;
    Ok(())
}

/// Mixture-component centers on a regular grid of spacing `step` over the
/// bounding box of `locs`.
pub fn center_grid(locs: &[Location], step: f64) -> Vec<Location> {
    let (x0, x1) = locs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l.x), b.max(l.x)));
    let (y0, y1) = locs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l.y), b.max(l.y)));
    let count = |lo: f64, hi: f64| (((hi - lo) / step).ceil() as usize).max(1);
    let (nx, ny) = (count(x0, x1), count(y0, y1));
    let mut out = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            let x = x0 + (x1 - x0) * (c as f64 + 0.5) / nx as f64;
            let y = y0 + (y1 - y0) * (r as f64 + 0.5) / ny as f64;
            out.push(Location::new(format!("c{r}_{c}"), x, y));
        }
    }
    out
}

pub fn fit_cov(cfg: &ExperimentConfig, residuals_path: &Path, out: &Path) -> Result<()> {
    let res = read_field(residuals_path)?;
    check_split(cfg, &res)?;
    let train = res.window(res.start(), cfg.split.train_end)?;
    let c = &cfg.covariance;
    let opts = FitOptions {
        restarts: c.restarts,
        max_evals: c.max_evals,
        max_locations: c.max_locations,
        seed: cfg.seed,
    };
    let centers = center_grid(train.locations(), c.center_step);
    let fits: Vec<_> = centers
        .par_iter()
        .enumerate()
        .map(|(k, center)| fit_center(&train, center, k, c.radius, &opts))
        .collect();
    let mut kept = Vec::new();
    let mut kept_fits = Vec::new();
    let mut skipped = Vec::new();
    for (center, fit) in centers.iter().zip(fits) {
        match fit {
            Ok(f) => {
                kept.push(center.clone());
                kept_fits.push(f);
            }
            Err(Error::InsufficientData(m)) => skipped.push(m),
            Err(e) => return Err(e.into()),
        }
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!("no covariance center has enough neighbours: {}", skipped.join("; "))).into());
    }
    let fit = assemble(&kept, &kept_fits, c.bandwidth)?;
    let mut file = CovarianceFile::from_fit(&fit);
    file.warnings.extend(skipped.into_iter().map(|m| format!("skipped: {m}")));
    for w in &file.warnings {
        eprintln!("warning: {w}");
    }
    write_toml(out, &file)?;
    ManifestBuilder::new("fit-cov", cfg).input(residuals_path).output(out).write()?;
    Ok(())
}

/// Knot series split into training and validation matrices.
fn knot_splits(cfg: &ExperimentConfig, res: &SpaceTimeField, knots: &KnotSet) -> Result<(Matrix, Matrix)> {
    let k = res.select(knots.indices())?;
    let train = k.window(k.start(), cfg.split.train_end)?.into_values();
    let val = k.window(cfg.split.train_end, cfg.split.validation_end)?.into_values();
    Ok((train, val))
}

pub fn cv(cfg: &ExperimentConfig, residuals_path: &Path, knots_path: &Path, out: &Path) -> Result<()> {
    let res = read_field(residuals_path)?;
    check_split(cfg, &res)?;
    let knots = load_knots(knots_path, &res)?;
    let (train, val) = knot_splits(cfg, &res, &knots)?;
    let base = cfg.esn.to_spec(cfg.seed)?;
    let groups = grid_groups(&cfg.cv.grid()?, &base, cfg.cv.budget)?;
    let table = groups
        .par_iter()
        .map(|g| evaluate_group(g, &train, &val, cfg.cv.members))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let outcome = finish(table.into_iter().flatten().collect())?;
    write_json(out, &CvFile::new(&outcome, cfg.cv.members, cfg.cv.budget))?;
    ManifestBuilder::new("cv", cfg).input(residuals_path).input(knots_path).output(out).write()?;
    Ok(())
}

pub fn train_esn(cfg: &ExperimentConfig, residuals_path: &Path, knots_path: &Path, cv_path: Option<&Path>, out: &Path) -> Result<()> {
    let res = read_field(residuals_path)?;
    check_split(cfg, &res)?;
    let knots = load_knots(knots_path, &res)?;
    let spec = match cv_path {
        Some(p) => read_json::<CvFile>(p)?.best.spec.to_spec()?,
        None => cfg.esn.to_spec(cfg.seed)?,
    };
    let spec = EsnSpec { seed: cfg.seed, ..spec };
    let (train, _) = knot_splits(cfg, &res, &knots)?;
    let members = (0..cfg.ensemble.members)
        .into_par_iter()
        .map(|i| {
            let seed = spec.seed.wrapping_add(i as u64);
            let t = EsnModel::train(&EsnSpec { seed, ..spec }, &train)?;
            Ok(MemberEntry {
                seed,
                readout: MatrixEntry::from_matrix(t.model.readout().matrix()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let file = EsnModelFile {
        spec: (&spec).into(),
        knot_ids: knot_ids(&res, &knots),
        train_window: [res.start(), cfg.split.train_end],
        members,
    };
    write_json(out, &file)?;
    let mut m = ManifestBuilder::new("train-esn", cfg).input(residuals_path).input(knots_path);
    if let Some(p) = cv_path {
        m = m.input(p);
    }
    m.output(out).write()?;
    Ok(())
}

fn weights(res: &SpaceTimeField, knots: &KnotSet, cov_path: &Path) -> Result<KrigingWeights> {
    let model = CovarianceFile::read(cov_path)?;
    Ok(kriging_weights(res.locations(), knots, &model)?)
}

pub struct ForecastPaths<'a> {
    pub model: &'a Path,
    pub residuals: &'a Path,
    pub knots: &'a Path,
    pub covariance: &'a Path,
    pub out: &'a Path,
}

pub fn forecast(cfg: &ExperimentConfig, p: ForecastPaths) -> Result<()> {
    let res = read_field(p.residuals)?;
    let knots = load_knots(p.knots, &res)?;
    let file: EsnModelFile = read_json(p.model)?;
    if file.knot_ids != knot_ids(&res, &knots) {
        return Err(CliError::format(p.model, "model was trained on a different knot set"));
    }
    let [a, b] = file.train_window;
    let ks = res.select(knots.indices())?;
    let history = ks.window(a, b)?.into_values();
    let evaluation = ks.window(b, ks.end())?.into_values();
    let spec = file.spec.to_spec()?;
    let horizons = cfg.ensemble.horizons;
    let members = file
        .members
        .par_iter()
        .map(|m| {
            let s = EsnSpec { seed: m.seed, ..spec };
            let mats = ReservoirMatrices::generate(&s, s.input_dim(knots.len()));
            let model = EsnModel::new(s, mats, m.readout.to_readout(p.model)?)?;
            let mut f = Forecaster::from_history(model, &history)?;
            Ok(roll(&mut f, &evaluation, horizons)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ens = ForecastEnsemble::from_members(members)?;
    let full = ens.reconstruct(&weights(&res, &knots, p.covariance)?)?.to_vec();
    write_forecasts(p.out, "", res.locations(), b, &full)?;
    write_forecasts(p.out, "knots_", ks.locations(), b, &ens.mean)?;
    ManifestBuilder::new("forecast", cfg)
        .input(p.model)
        .input(p.residuals)
        .input(p.knots)
        .input(p.covariance)
        .output(p.out)
        .write()?;
    Ok(())
}

pub fn calibrate_cmd(cfg: &ExperimentConfig, forecasts: &Path, residuals_path: &Path, out: &Path) -> Result<()> {
    let res = read_field(residuals_path)?;
    let fcs = read_forecast_dir(forecasts)?;
    let (from, to) = (cfg.split.train_end, cfg.split.validation_end);
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (k, f) in fcs.iter().enumerate() {
        check_ids(&horizon_file(forecasts, k + 1), &ids(f), &res)?;
        let Some((lo, hi)) = overlap(f, &res, from, to) else {
            usage!("horizon {} forecasts do not cover the validation window [{from}, {to})", k + 1);
        };
        truth.push(res.window(lo, hi)?.into_values());
        pred.push(f.window(lo, hi)?.into_values());
    }
    let q = calibrate(&truth, &pred, &interval_levels(&cfg.calibration.coverages))?;
    write_json(out, &QuantilesFile::new(&q, ids(&res)))?;
    ManifestBuilder::new("calibrate", cfg).input(forecasts).input(residuals_path).output(out).write()?;
    Ok(())
}

pub struct EvaluateArgs<'a> {
    pub forecasts: &'a Path,
    pub truth: &'a Path,
    pub quantiles: Option<&'a Path>,
    pub method: String,
    /// Horizon of a single forecast file.
    pub horizon: usize,
    pub window: Option<(usize, usize)>,
    pub out: &'a Path,
}

pub fn evaluate(cfg: &ExperimentConfig, a: EvaluateArgs) -> Result<MetricsFile> {
    let truth = read_field(a.truth)?;
    let fcs: Vec<(usize, SpaceTimeField)> = if a.forecasts.is_dir() {
        read_forecast_dir(a.forecasts)?.into_iter().enumerate().map(|(k, f)| (k + 1, f)).collect()
    } else {
        vec![(a.horizon, read_field(a.forecasts)?)]
    };
    let (from, to) = match a.window {
        Some(w) => w,
        None => (cfg.split.validation_end, cfg.split.test_end.unwrap_or(truth.end())),
    };
    let q = match a.quantiles {
        Some(p) => {
            let f: QuantilesFile = read_json(p)?;
            check_ids(p, &f.location_ids, &truth)?;
            Some(f.to_quantiles(p)?)
        }
        None => None,
    };
    let mut records = Vec::new();
    for (h, f) in &fcs {
        check_ids(a.forecasts, &ids(f), &truth)?;
        let Some((lo, hi)) = overlap(f, &truth, from, to) else {
            usage!("horizon {h} forecasts and truth share no target times in [{from}, {to})");
        };
        let t = truth.window(lo, hi)?.into_values();
        let p = f.window(lo, hi)?.into_values();
        let mut cov = Vec::new();
        if let Some(q) = q.as_ref().filter(|q| *h <= q.horizons()) {
            for &c in &cfg.calibration.coverages {
                let r = coverage(&t, &p, q, *h, c)?;
                cov.push(CoverageRecord {
                    nominal: c,
                    mean: r.mean,
                    sd: r.sd,
                });
            }
        }
        records.push(MetricRecord {
            method: a.method.clone(),
            horizon: *h,
            mse: mse(&t, &p)?,
            targets: hi - lo,
            coverage: cov,
        });
    }
    let file = MetricsFile { records };
    write_json(a.out, &file)?;
    let mut m = ManifestBuilder::new("evaluate", cfg).input(a.forecasts).input(a.truth);
    if let Some(p) = a.quantiles {
        m = m.input(p);
    }
    m.output(a.out).write()?;
    Ok(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Persistence,
    Arima,
    Var,
    EofEsn,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Persistence => "persistence",
            Self::Arima => "arima",
            Self::Var => "var",
            Self::EofEsn => "eof-esn",
        }
    }
}

pub struct BaselinePaths<'a> {
    pub residuals: &'a Path,
    pub knots: &'a Path,
    pub covariance: &'a Path,
    pub out: &'a Path,
}

pub fn baseline(cfg: &ExperimentConfig, method: BaselineMethod, p: BaselinePaths) -> Result<()> {
    let res = read_field(p.residuals)?;
    check_split(cfg, &res)?;
    let (b, v) = (cfg.split.train_end, cfg.split.validation_end);
    let h = cfg.ensemble.horizons;
    let train = res.window(res.start(), b)?.into_values();
    let eval = res.window(b, res.end())?.into_values();
    let mut inputs = vec![p.residuals];
    let forecasts = match method {
        BaselineMethod::Persistence => rolling_persistence(&train, &eval, h)?,
        BaselineMethod::Arima => {
            let orders = cfg.baselines.orders();
            let val = res.window(b, v)?.into_values();
            let models = (0..res.n_locations())
                .into_par_iter()
                .map(|j| {
                    let tr: Vec<f64> = train.column(j).iter().copied().collect();
                    let va: Vec<f64> = val.column(j).iter().copied().collect();
                    Ok(select_arima(&tr, &va, &orders)?.model)
                })
                .collect::<Result<Vec<_>>>()?;
            rolling_arima(&models, &train, &eval, h)?
        }
        BaselineMethod::Var => {
            inputs.extend([p.knots, p.covariance]);
            let knots = load_knots(p.knots, &res)?;
            let ks = res.select(knots.indices())?;
            let kt = ks.window(ks.start(), b)?.into_values();
            let kv = ks.window(b, v)?.into_values();
            let ke = ks.window(b, ks.end())?.into_values();
            let (model, _) = select_var(&kt, &kv, cfg.baselines.var_max_order)?;
            let w = weights(&res, &knots, p.covariance)?;
            rolling_var(&model, &kt, &ke, h)?.iter().map(|m| w.apply(m)).collect::<std::result::Result<Vec<_>, _>>()?
        }
        BaselineMethod::EofEsn => {
            let basis = eof_basis(&train, cfg.baselines.eof_count)?;
            let ct = eof_project(&train, &basis)?;
            let ce = eof_project(&eval, &basis)?;
            let spec = cfg.esn.to_spec(cfg.seed)?;
            let members = (0..cfg.ensemble.members)
                .into_par_iter()
                .map(|i| run_member(&spec, spec.seed.wrapping_add(i as u64), &ct, &ce, h))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let ens = ForecastEnsemble::from_members(members)?;
            ens.mean.iter().map(|m| eof_reconstruct(m, &basis)).collect::<std::result::Result<Vec<_>, _>>()?
        }
    };
    write_forecasts(p.out, "", res.locations(), b, &forecasts)?;
    let mut m = ManifestBuilder::new(method.name(), cfg);
    for i in inputs {
        m = m.input(i);
    }
    m.output(p.out).write()?;
    Ok(())
}

pub fn study_config(cfg: &ExperimentConfig) -> Result<StudyConfig> {
    let l = &cfg.lorenz;
    Ok(StudyConfig {
        etas: l.etas.clone(),
        replicates: l.replicates,
        methods: l.methods()?,
        members: l.members,
        cv_members: l.cv_members,
        arima_orders: cfg.baselines.orders(),
        var_max_order: cfg.baselines.var_max_order.max(1),
        seed: cfg.seed,
        ..StudyConfig::default()
    })
}

pub fn lorenz_study(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let sc = study_config(cfg)?;
    if sc.etas.is_empty() || sc.replicates == 0 || sc.methods.is_empty() {
        usage!("lorenz study needs at least one η, replicate and method");
    }
    let jobs: Vec<(usize, usize)> = (0..sc.etas.len()).flat_map(|e| (0..sc.replicates).map(move |r| (e, r))).collect();
    let results = jobs
        .par_iter()
        .map(|&(e, r)| run_replicate(&sc, e, r))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let rows = aggregate(&sc, &results);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::format(out, e.to_string());
    w.write_record(["method", "eta", "horizon", "mse_mean", "mse_sd"]).map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.method.name().to_string(),
            r.eta.to_string(),
            r.horizon.to_string(),
            r.mse_mean.to_string(),
            r.mse_sd.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::format(out, e.to_string()))?;
    write_bytes(out, &bytes)?;
    ManifestBuilder::new("lorenz-study", cfg).output(out).write()?;
    Ok(())
}

pub struct PowerArgs<'a> {
    pub forecasts: &'a Path,
    pub mean: &'a Path,
    pub data: &'a Path,
    pub quantiles: Option<&'a Path>,
    pub sites: &'a Path,
    pub out: &'a Path,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerReport {
    pub step_hours: f64,
    pub levels: Vec<f64>,
    pub horizons: Vec<PowerHorizon>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerHorizon {
    pub horizon: usize,
    /// Target-time window `[start, end)`.
    pub window: [usize; 2],
    pub energy_error: f64,
    /// Per level, summed over sites; empty without quantiles.
    pub quantile_energy_error: Vec<f64>,
    /// Forecast values clamped at zero speed.
    pub truncated: usize,
    pub sites: Vec<SitePower>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SitePower {
    pub location: String,
    pub energy_error: f64,
    pub quantile_energy_error: Vec<f64>,
}

fn load_sites(path: &Path) -> Result<(Vec<TurbineSite>, BTreeMap<String, PowerCurve>)> {
    let file: SitesFile = read_toml(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut curves = BTreeMap::new();
    let mut sites = Vec::new();
    for e in &file.site {
        let site = e.to_site(path)?;
        if !curves.contains_key(&site.curve) {
            let p = base.join(&site.curve);
            curves.insert(site.curve.clone(), parse_power_curve(&read_text(&p)?, &p)?);
        }
        sites.push(site);
    }
    Ok((sites, curves))
}

pub fn power(cfg: &ExperimentConfig, a: PowerArgs) -> Result<PowerReport> {
    let model = MeanModelFile::read(a.mean)?;
    let data = read_field(a.data)?;
    let fcs = read_forecast_dir(a.forecasts)?;
    let (sites, curves) = load_sites(a.sites)?;
    let q = match a.quantiles {
        Some(p) => Some(read_json::<QuantilesFile>(p)?.to_quantiles(p)?),
        None => None,
    };
    let (from, to) = (cfg.split.validation_end, cfg.split.test_end.unwrap_or(data.end()));
    let step = cfg.power.step_hours;
    let mut horizons = Vec::new();
    for (k, f) in fcs.iter().enumerate() {
        let h = k + 1;
        check_ids(&horizon_file(a.forecasts, h), &ids(f), &data)?;
        let Some((lo, hi)) = overlap(f, &data, from, to) else {
            usage!("horizon {h} forecasts do not cover the test window [{from}, {to})");
        };
        let residual = f.window(lo, hi)?;
        let speed = retrend(&residual, &model)?;
        let mut truncated = speed.truncated;
        let truth = data.window(lo, hi)?;
        let mut level_fields = Vec::new();
        if let Some(q) = q.as_ref().filter(|q| h <= q.horizons()) {
            for l in 0..q.levels.len() {
                let mut shifted = residual.values().clone();
                for j in 0..shifted.ncols() {
                    let off = q.quantiles[k][j][l];
                    shifted.column_mut(j).iter_mut().for_each(|v| *v += off);
                }
                let r = retrend(&SpaceTimeField::new(residual.locations().to_vec(), lo, shifted)?, &model)?;
                truncated += r.truncated;
                level_fields.push(r.field);
            }
        }
        let mut per_site = Vec::new();
        for s in &sites {
            let Some(j) = location_index(data.locations(), &s.location) else {
                return Err(CliError::format(a.sites, format!("site location '{}' is not in the field", s.location)));
            };
            let curve = &curves[&s.curve];
            let t = truth.column(j);
            let p_true = site_power(&t, s, curve)?;
            let p_fc = site_power(&speed.field.column(j), s, curve)?;
            let qs: Vec<Vec<f64>> = level_fields.iter().map(|f| f.column(j)).collect();
            per_site.push(SitePower {
                location: s.location.clone(),
                energy_error: energy_error(&p_true, &p_fc, step)?,
                quantile_energy_error: quantile_energy_error(&t, &qs, s, curve, step)?,
            });
        }
        let nl = level_fields.len();
        horizons.push(PowerHorizon {
            horizon: h,
            window: [lo, hi],
            energy_error: per_site.iter().map(|s| s.energy_error).sum(),
            quantile_energy_error: (0..nl).map(|l| per_site.iter().map(|s| s.quantile_energy_error[l]).sum()).collect(),
            truncated,
            sites: per_site,
        });
    }
    let report = PowerReport {
        step_hours: step,
        levels: q.map(|q| q.levels).unwrap_or_default(),
        horizons,
    };
    write_json(a.out, &report)?;
    let mut m = ManifestBuilder::new("power", cfg).input(a.forecasts).input(a.mean).input(a.data).input(a.sites);
    if let Some(p) = a.quantiles {
        m = m.input(p);
    }
    m.output(a.out).write()?;
    Ok(report)
}
