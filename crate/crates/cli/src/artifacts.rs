//! JSON, TOML and CSV artifacts passed between commands.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wind_esn_core::esn::{Activation, EsnSpec, ReadoutMap};
use wind_esn_core::field::{HarmonicModel, Location, SpaceTimeField};
use wind_esn_core::forecast::CalibrationQuantiles;
use wind_esn_core::power::{PowerCurve, Shear, TurbineSite};
use wind_esn_core::spatial::{CovarianceFit, CovarianceModel, KnotSet, KnotTag, MixtureComponent, Spd2};
use wind_esn_core::tuning::CvOutcome;
use wind_esn_core::Matrix;

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serialises");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, toml::to_string(value).expect("artifact serialises").as_bytes())
}

fn location_ids(field: &SpaceTimeField) -> Vec<String> {
    field.locations().iter().map(|l| l.id.clone()).collect()
}

/// Fails unless `ids` equals the location ids of `field`, in order.
pub fn check_ids(path: &Path, ids: &[String], field: &SpaceTimeField) -> Result<()> {
    let have = location_ids(field);
    if ids != have.as_slice() {
        let first = ids.iter().zip(&have).position(|(a, b)| a != b).unwrap_or(ids.len().min(have.len()));
        return Err(CliError::format(
            path,
            format!(
                "location table does not match the field ({} vs {} locations, first difference at position {first})",
                ids.len(),
                have.len()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanModelFile {
    pub periods: Vec<f64>,
    pub locations: Vec<MeanLocation>,
}

/// `coefficients = [β0, β11, β12, β21, β22, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanLocation {
    pub id: String,
    pub coefficients: Vec<f64>,
    pub gamma: f64,
}

impl MeanModelFile {
    pub fn from_model(m: &HarmonicModel) -> Self {
        let c = m.coefficients();
        Self {
            periods: m.periods().to_vec(),
            locations: m
                .location_ids()
                .iter()
                .enumerate()
                .map(|(i, id)| MeanLocation {
                    id: id.clone(),
                    coefficients: c.row(i).iter().copied().collect(),
                    gamma: m.gamma()[i],
                })
                .collect(),
        }
    }

    pub fn to_model(&self, path: &Path) -> Result<HarmonicModel> {
        let width = 2 * self.periods.len() + 1;
        if let Some(l) = self.locations.iter().find(|l| l.coefficients.len() != width) {
            return Err(CliError::format(path, format!("location {} has {} coefficients, expected {width}", l.id, l.coefficients.len())));
        }
        let coef = Matrix::from_fn(self.locations.len(), width, |i, j| self.locations[i].coefficients[j]);
        Ok(HarmonicModel::new(
            self.periods.clone(),
            self.locations.iter().map(|l| l.id.clone()).collect(),
            coef,
            self.locations.iter().map(|l| l.gamma).collect(),
        )?)
    }

    pub fn read(path: &Path) -> Result<HarmonicModel> {
        read_json::<Self>(path)?.to_model(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotsFile {
    pub grid_step: f64,
    pub speed_threshold: f64,
    pub min_separation: f64,
    pub n_locations: usize,
    pub knots: Vec<KnotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotEntry {
    pub index: usize,
    pub id: String,
    pub tag: String,
}

impl KnotsFile {
    pub fn new(knots: &KnotSet, field: &SpaceTimeField, grid_step: f64, speed_threshold: f64, min_separation: f64) -> Self {
        Self {
            grid_step,
            speed_threshold,
            min_separation,
            n_locations: field.n_locations(),
            knots: knots
                .indices()
                .iter()
                .zip(knots.tags())
                .map(|(&i, t)| KnotEntry {
                    index: i,
                    id: field.locations()[i].id.clone(),
                    tag: t.name().to_string(),
                })
                .collect(),
        }
    }

    /// Knot set checked against the locations of `field`.
    pub fn to_knots(&self, path: &Path, field: &SpaceTimeField) -> Result<KnotSet> {
        if self.n_locations != field.n_locations() {
            return Err(CliError::format(path, format!("knots were selected on {} locations, field has {}", self.n_locations, field.n_locations())));
        }
        let mut tags = Vec::with_capacity(self.knots.len());
        for k in &self.knots {
            let tag = KnotTag::from_name(&k.tag).ok_or_else(|| CliError::format(path, format!("unknown knot tag '{}'", k.tag)))?;
            match field.locations().get(k.index) {
                Some(l) if l.id == k.id => {}
                _ => return Err(CliError::format(path, format!("knot {} ({}) does not match the field's location table", k.index, k.id))),
            }
            tags.push(tag);
        }
        Ok(KnotSet::new(self.knots.iter().map(|k| k.index).collect(), tags, field.n_locations())?)
    }

    pub fn ids(&self) -> Vec<String> {
        self.knots.iter().map(|k| k.id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceFile {
    pub bandwidth: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub component: Vec<ComponentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentEntry {
    pub center: [f64; 2],
    pub partial_sill: f64,
    pub smoothness: f64,
    /// `[Σxx, Σxy, Σyy]`.
    pub anisotropy: [f64; 3],
    pub nugget: f64,
}

impl CovarianceFile {
    pub fn from_fit(fit: &CovarianceFit) -> Self {
        Self {
            bandwidth: fit.model.bandwidth(),
            warnings: fit.warnings.iter().map(|w| w.message.clone()).collect(),
            component: fit
                .model
                .components()
                .iter()
                .map(|c| ComponentEntry {
                    center: c.center,
                    partial_sill: c.partial_sill,
                    smoothness: c.smoothness,
                    anisotropy: [c.anisotropy.xx, c.anisotropy.xy, c.anisotropy.yy],
                    nugget: c.nugget,
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<CovarianceModel> {
        let comps = self
            .component
            .iter()
            .map(|c| {
                Ok(MixtureComponent {
                    center: c.center,
                    partial_sill: c.partial_sill,
                    smoothness: c.smoothness,
                    anisotropy: Spd2::new(c.anisotropy[0], c.anisotropy[1], c.anisotropy[2])?,
                    nugget: c.nugget,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CovarianceModel::new(comps, self.bandwidth)?)
    }

    pub fn read(path: &Path) -> Result<CovarianceModel> {
        read_toml::<Self>(path)?.to_model()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEntry {
    pub reservoir_size: usize,
    pub lags: usize,
    pub leak_rate: f64,
    pub spectral_scale: f64,
    pub recurrent_scale: f64,
    pub input_scale: f64,
    pub recurrent_density: f64,
    pub input_density: f64,
    pub ridge: f64,
    pub washout: usize,
    pub seed: u64,
    pub activation: ActivationName,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Tanh,
    Relu,
    Identity,
}

impl From<Activation> for ActivationName {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Tanh => Self::Tanh,
            Activation::Relu => Self::Relu,
            Activation::Identity => Self::Identity,
        }
    }
}

impl From<ActivationName> for Activation {
    fn from(a: ActivationName) -> Self {
        match a {
            ActivationName::Tanh => Self::Tanh,
            ActivationName::Relu => Self::Relu,
            ActivationName::Identity => Self::Identity,
        }
    }
}

impl From<&EsnSpec> for SpecEntry {
    fn from(s: &EsnSpec) -> Self {
        Self {
            reservoir_size: s.reservoir_size,
            lags: s.lags,
            leak_rate: s.leak_rate,
            spectral_scale: s.spectral_scale,
            recurrent_scale: s.recurrent_scale,
            input_scale: s.input_scale,
            recurrent_density: s.recurrent_density,
            input_density: s.input_density,
            ridge: s.ridge,
            washout: s.washout,
            seed: s.seed,
            activation: s.activation.into(),
        }
    }
}

impl SpecEntry {
    pub fn to_spec(&self) -> Result<EsnSpec> {
        let s = EsnSpec {
            reservoir_size: self.reservoir_size,
            lags: self.lags,
            leak_rate: self.leak_rate,
            spectral_scale: self.spectral_scale,
            recurrent_scale: self.recurrent_scale,
            input_scale: self.input_scale,
            recurrent_density: self.recurrent_density,
            input_density: self.input_density,
            ridge: self.ridge,
            washout: self.washout,
            seed: self.seed,
            activation: self.activation.into(),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvFile {
    pub members: usize,
    pub budget: Option<usize>,
    pub best: CvRow,
    pub table: Vec<CvRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvRow {
    pub index: usize,
    pub mse: f64,
    pub spec: SpecEntry,
}

impl CvFile {
    pub fn new(outcome: &CvOutcome, members: usize, budget: Option<usize>) -> Self {
        let row = |r: &wind_esn_core::tuning::CvResult| CvRow {
            index: r.index,
            mse: r.mse,
            spec: (&r.spec).into(),
        };
        Self {
            members,
            budget,
            best: row(&outcome.best),
            table: outcome.table.iter().map(row).collect(),
        }
    }
}

/// Trained ensemble. Reservoir matrices are regenerated from spec and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnModelFile {
    pub spec: SpecEntry,
    pub knot_ids: Vec<String>,
    /// Absolute time window `[start, end)` of the training data.
    pub train_window: [usize; 2],
    pub members: Vec<MemberEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberEntry {
    pub seed: u64,
    pub readout: MatrixEntry,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixEntry {
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect(),
        }
    }

    pub fn to_matrix(&self, path: &Path) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::format(path, format!("matrix declares {}×{} but holds {} values", self.rows, self.cols, self.data.len())));
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn to_readout(&self, path: &Path) -> Result<ReadoutMap> {
        Ok(ReadoutMap::new(self.to_matrix(path)?)?)
    }
}

/// Quantiles of `truth − forecast`, `quantiles[h−1][location][level]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantilesFile {
    pub location_ids: Vec<String>,
    pub levels: Vec<f64>,
    pub quantiles: Vec<Vec<Vec<f64>>>,
}

impl QuantilesFile {
    pub fn new(q: &CalibrationQuantiles, ids: Vec<String>) -> Self {
        Self {
            location_ids: ids,
            levels: q.levels.clone(),
            quantiles: q.quantiles.clone(),
        }
    }

    pub fn to_quantiles(&self, path: &Path) -> Result<CalibrationQuantiles> {
        for (h, per_h) in self.quantiles.iter().enumerate() {
            if per_h.len() != self.location_ids.len() || per_h.iter().any(|q| q.len() != self.levels.len()) {
                return Err(CliError::format(path, format!("horizon {} quantile table has the wrong shape", h + 1)));
            }
        }
        Ok(CalibrationQuantiles {
            levels: self.levels.clone(),
            quantiles: self.quantiles.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub records: Vec<MetricRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub method: String,
    pub horizon: usize,
    pub mse: f64,
    /// Number of scored target times.
    pub targets: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coverage: Vec<CoverageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageRecord {
    pub nominal: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Power curve CSV: a `# cut_in=.. rated_speed=.. cut_out=.. rated_power=..`
/// header line followed by `speed,power` rows on the rising segment.
pub fn parse_power_curve(text: &str, path: &Path) -> Result<PowerCurve> {
    let bad = |m: String| CliError::format(path, m);
    let mut header: Option<[f64; 4]> = None;
    let mut points = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut vals = [f64::NAN; 4];
            let mut any = false;
            for kv in rest.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else { continue };
                let slot = match k {
                    "cut_in" => 0,
                    "rated_speed" => 1,
                    "cut_out" => 2,
                    "rated_power" => 3,
                    _ => continue,
                };
                vals[slot] = v.parse().map_err(|_| bad(format!("line {}: '{kv}' is not a number", n + 1)))?;
                any = true;
            }
            if any {
                if vals.iter().any(|v| v.is_nan()) {
                    return Err(bad("header must set cut_in, rated_speed, cut_out and rated_power".into()));
                }
                header = Some(vals);
            }
            continue;
        }
        if line.eq_ignore_ascii_case("speed,power") {
            continue;
        }
        let (s, p) = line.split_once(',').ok_or_else(|| bad(format!("line {}: expected 'speed,power'", n + 1)))?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(format!("line {}: '{}' is not a number", n + 1, x.trim())));
        points.push((parse(s)?, parse(p)?));
    }
    let [ci, rs, co, rp] = header.ok_or_else(|| bad("missing '# cut_in= rated_speed= cut_out= rated_power=' header".into()))?;
    Ok(PowerCurve::new(ci, rs, co, rp, points)?)
}

pub fn encode_power_curve(c: &PowerCurve) -> String {
    let mut s = format!(
        "# cut_in={} rated_speed={} cut_out={} rated_power={}\nspeed,power\n",
        c.cut_in(),
        c.rated_speed(),
        c.cut_out(),
        c.rated_power()
    );
    for (v, p) in c.points() {
        s.push_str(&format!("{v},{p}\n"));
    }
    s
}

/// Site registry: `[[site]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SitesFile {
    pub site: Vec<SiteEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteEntry {
    /// Location id in the wind field.
    pub location: String,
    pub hub_height: f64,
    /// Power curve file, relative to the registry.
    pub curve: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Per-time shear exponents aligned with the forecast target times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_series: Option<Vec<f64>>,
}

impl SiteEntry {
    pub fn to_site(&self, path: &Path) -> Result<TurbineSite> {
        let shear = match (&self.alpha, &self.alpha_series) {
            (Some(_), Some(_)) => return Err(CliError::format(path, format!("site {} sets both alpha and alpha_series", self.location))),
            (Some(a), None) => Shear::Constant(*a),
            (None, Some(s)) => Shear::Series(s.clone()),
            (None, None) => Shear::default(),
        };
        let site = TurbineSite {
            location: self.location.clone(),
            hub_height: self.hub_height,
            curve: self.curve.clone(),
            shear,
        };
        site.validate()?;
        Ok(site)
    }
}

/// Index of location `id` in `locations`.
pub fn location_index(locations: &[Location], id: &str) -> Option<usize> {
    locations.iter().position(|l| l.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wind_esn_core::field::fit_harmonics;

    fn field() -> SpaceTimeField {
        let locs = (0..3).map(|i| Location::new(format!("L{i}"), i as f64, 0.5)).collect();
        SpaceTimeField::new(locs, 7, Matrix::from_fn(60, 3, |t, j| 4.0 + (t as f64 * 0.3 + j as f64).sin() + 0.1 * j as f64)).unwrap()
    }

    #[test]
    fn mean_model_round_trip() {
        let f = field();
        let m = fit_harmonics(&f, &[24.0, 12.0]).unwrap();
        let file = MeanModelFile::from_model(&m);
        let text = serde_json::to_string(&file).unwrap();
        let back: MeanModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_model(Path::new("m")).unwrap(), m);
    }

    #[test]
    fn knots_checked_against_field() {
        let f = field();
        let ks = KnotSet::new(vec![0, 2], vec![KnotTag::Grid, KnotTag::HighWind], 3).unwrap();
        let file = KnotsFile::new(&ks, &f, 0.25, 6.0, 0.005);
        assert_eq!(file.to_knots(Path::new("k"), &f).unwrap(), ks);
        let mut wrong = file.clone();
        wrong.knots[1].id = "elsewhere".into();
        assert!(wrong.to_knots(Path::new("k"), &f).is_err());
    }

    #[test]
    fn covariance_toml_round_trip() {
        let m = CovarianceModel::stationary(1.3, 0.7, Spd2::new(0.5, 0.1, 0.4).unwrap(), 0.05).unwrap();
        let fit = CovarianceFit { model: m.clone(), warnings: vec![] };
        let text = toml::to_string(&CovarianceFile::from_fit(&fit)).unwrap();
        let back: CovarianceFile = toml::from_str(&text).unwrap();
        let m2 = back.to_model().unwrap();
        assert_eq!(m2.bandwidth(), m.bandwidth());
        assert_eq!(m2.components(), m.components());
    }

    #[test]
    fn matrix_row_major() {
        let m = Matrix::from_fn(2, 3, |i, j| (10 * i + j) as f64);
        let e = MatrixEntry::from_matrix(&m);
        assert_eq!(e.data, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(e.to_matrix(Path::new("x")).unwrap(), m);
    }

    #[test]
    fn power_curve_text() {
        let c = PowerCurve::new(3.0, 12.0, 25.0, 2000.0, vec![(6.0, 500.0), (9.0, 1400.0)]).unwrap();
        let back = parse_power_curve(&encode_power_curve(&c), Path::new("c")).unwrap();
        assert_eq!(back, c);
        assert!(parse_power_curve("speed,power\n5,1\n", Path::new("c")).is_err());
    }

    #[test]
    fn spec_entry_activation_is_lowercase() {
        let s = EsnSpec::default();
        let json = serde_json::to_string(&SpecEntry::from(&s)).unwrap();
        assert!(json.contains("\"activation\":\"tanh\""));
        let back: SpecEntry = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_spec().unwrap(), s);
    }
}
