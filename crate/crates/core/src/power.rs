//! Wind speed to hub height and electric power, and energy error totals.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{bail, Result};

/// Reference height of the near-surface wind speed, in metres.
pub const REFERENCE_HEIGHT: f64 = 10.0;
pub const DEFAULT_SHEAR: f64 = 1.0 / 7.0;

/// Manufacturer power curve with cut-in, rated and cut-out speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    cut_in: f64,
    rated_speed: f64,
    cut_out: f64,
    rated_power: f64,
    /// Interpolation knots on `[cut_in, rated_speed]`, both ends included.
    points: Vec<(f64, f64)>,
}

impl PowerCurve {
    /// `points` are `(speed m/s, power kW)` with strictly increasing speeds in
    /// `[cut_in, rated_speed]` and nondecreasing powers in `[0, rated_power]`.
    /// Missing end points are filled with `(cut_in, 0)` and
    /// `(rated_speed, rated_power)`.
    pub fn new(cut_in: f64, rated_speed: f64, cut_out: f64, rated_power: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        if !(cut_in > 0.0 && cut_in < rated_speed && rated_speed < cut_out && cut_out.is_finite()) {
            bail!(Config, "power curve needs 0 < cut-in < rated < cut-out, got {cut_in}, {rated_speed}, {cut_out}");
        }
        if !(rated_power > 0.0 && rated_power.is_finite()) {
            bail!(Config, "rated power must be positive, got {rated_power}");
        }
        let mut knots = Vec::with_capacity(points.len() + 2);
        for (i, &(v, p)) in points.iter().enumerate() {
            if !(v >= cut_in && v <= rated_speed) {
                bail!(Config, "curve point {i} speed {v} outside [{cut_in}, {rated_speed}]");
            }
            if !(p >= 0.0 && p <= rated_power) {
                bail!(Config, "curve point {i} power {p} outside [0, {rated_power}]");
            }
            if let Some(&(pv, pp)) = knots.last() {
                if v <= pv {
                    bail!(Config, "curve speeds must increase strictly (point {i})");
                }
                if p < pp {
                    bail!(Config, "curve powers must be nondecreasing (point {i})");
                }
            }
            knots.push((v, p));
        }
        if knots.first().is_none_or(|k| k.0 > cut_in) {
            knots.insert(0, (cut_in, 0.0));
        }
        if knots.last().is_none_or(|k| k.0 < rated_speed) {
            knots.push((rated_speed, rated_power));
        }
        Ok(Self {
            cut_in,
            rated_speed,
            cut_out,
            rated_power,
            points: knots,
        })
    }

    pub fn cut_in(&self) -> f64 {
        self.cut_in
    }

    pub fn rated_speed(&self) -> f64 {
        self.rated_speed
    }

    pub fn cut_out(&self) -> f64 {
        self.cut_out
    }

    pub fn rated_power(&self) -> f64 {
        self.rated_power
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Shear exponent of the power law, constant or one value per time step.
#[derive(Debug, Clone, PartialEq)]
pub enum Shear {
    Constant(f64),
    Series(Vec<f64>),
}

impl Shear {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Shear::Constant(a) => *a,
            Shear::Series(v) => v[t],
        }
    }
}

impl Default for Shear {
    fn default() -> Self {
        Shear::Constant(DEFAULT_SHEAR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurbineSite {
    pub location: String,
    pub hub_height: f64,
    /// Name of the power curve in the registry.
    pub curve: String,
    pub shear: Shear,
}

impl TurbineSite {
    pub fn validate(&self) -> Result<()> {
        if !(self.hub_height > REFERENCE_HEIGHT) || !self.hub_height.is_finite() {
            bail!(Config, "site {}: hub height {} must exceed 10 m", self.location, self.hub_height);
        }
        let finite = match &self.shear {
            Shear::Constant(a) => a.is_finite(),
            Shear::Series(v) => v.iter().all(|a| a.is_finite()),
        };
        if !finite {
            bail!(Config, "site {}: shear exponent must be finite", self.location);
        }
        Ok(())
    }
}

/// `Z (h / 10)^α`.
pub fn to_hub_height(speed: f64, hub_height: f64, alpha: f64) -> f64 {
    speed * (hub_height / REFERENCE_HEIGHT).powf(alpha)
}

/// Four zones: 0 below cut-in, interpolated up to the rated speed, rated
/// power up to cut-out, 0 beyond.
pub fn to_power(speed: f64, curve: &PowerCurve) -> f64 {
    if !(speed >= curve.cut_in) || speed > curve.cut_out {
        return 0.0;
    }
    if speed >= curve.rated_speed {
        return curve.rated_power;
    }
    let k = curve.points.partition_point(|p| p.0 <= speed);
    let (v0, p0) = curve.points[k - 1];
    let (v1, p1) = curve.points[k];
    p0 + (p1 - p0) * (speed - v0) / (v1 - v0)
}

/// Power series at a site from near-surface speeds.
pub fn site_power(speeds: &[f64], site: &TurbineSite, curve: &PowerCurve) -> Result<Vec<f64>> {
    site.validate()?;
    if let Shear::Series(v) = &site.shear {
        if v.len() != speeds.len() {
            bail!(Schema, "site {}: {} shear values for {} time steps", site.location, v.len(), speeds.len());
        }
    }
    Ok(speeds
        .iter()
        .enumerate()
        .map(|(t, &z)| to_power(to_hub_height(z, site.hub_height, site.shear.at(t)), curve))
        .collect())
}

/// `Σ_t |forecast − truth| · step` in kW·h for `step` in hours.
pub fn energy_error(truth: &[f64], forecast: &[f64], step: f64) -> Result<f64> {
    if truth.len() != forecast.len() {
        bail!(Schema, "power series lengths differ: {} and {}", truth.len(), forecast.len());
    }
    Ok(truth.iter().zip(forecast).map(|(a, b)| (b - a).abs()).sum::<f64>() * step)
}

/// Energy error of each quantile level's speed forecast (`quantiles[level][t]`)
/// against the truth, both converted through the site's hub height and curve.
pub fn quantile_energy_error(
    truth: &[f64],
    quantiles: &[Vec<f64>],
    site: &TurbineSite,
    curve: &PowerCurve,
    step: f64,
) -> Result<Vec<f64>> {
    let p_true = site_power(truth, site, curve)?;
    quantiles
        .iter()
        .map(|q| energy_error(&p_true, &site_power(q, site, curve)?, step))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn curve() -> PowerCurve {
        PowerCurve::new(3.0, 12.0, 25.0, 3300.0, vec![(3.0, 0.0), (6.0, 600.0), (9.0, 2000.0), (12.0, 3300.0)]).unwrap()
    }

    fn site() -> TurbineSite {
        TurbineSite {
            location: "s1".into(),
            hub_height: 84.0,
            curve: "n131".into(),
            shear: Shear::default(),
        }
    }

    #[test]
    fn power_law() {
        assert_eq!(to_hub_height(6.0, 10.0, 0.3), 6.0);
        assert_eq!(to_hub_height(6.0, 80.0, 0.0), 6.0);
        let v = to_hub_height(6.0, 80.0, 1.0 / 7.0);
        assert!((v - 8.075_401_155_794_136).abs() < 1e-12, "{v}");
    }

    #[test]
    fn four_zones() {
        let c = curve();
        assert_eq!(to_power(1.5, &c), 0.0);
        assert_eq!(to_power(2.999, &c), 0.0);
        assert_eq!(to_power(3.0, &c), 0.0);
        assert_eq!(to_power(7.5, &c), 1300.0);
        assert_eq!(to_power(12.0, &c), 3300.0);
        assert_eq!(to_power(20.0, &c), 3300.0);
        assert_eq!(to_power(25.0, &c), 3300.0);
        assert_eq!(to_power(26.0, &c), 0.0);
        assert_eq!(to_power(-1.0, &c), 0.0);
        assert_eq!(to_power(f64::NAN, &c), 0.0);
    }

    #[test]
    fn missing_end_points_filled() {
        let c = PowerCurve::new(3.0, 12.0, 25.0, 3300.0, vec![(6.0, 600.0)]).unwrap();
        assert_eq!(c.points().len(), 3);
        assert_eq!(to_power(4.5, &c), 300.0);
        assert_eq!(to_power(11.0, &c), 600.0 + 2700.0 * 5.0 / 6.0);
    }

    #[test]
    fn invalid_curves() {
        assert!(PowerCurve::new(0.0, 12.0, 25.0, 1.0, vec![]).is_err());
        assert!(PowerCurve::new(3.0, 2.0, 25.0, 1.0, vec![]).is_err());
        assert!(PowerCurve::new(3.0, 12.0, 11.0, 1.0, vec![]).is_err());
        assert!(PowerCurve::new(3.0, 12.0, 25.0, 100.0, vec![(5.0, 50.0), (4.0, 60.0)]).is_err());
        assert!(PowerCurve::new(3.0, 12.0, 25.0, 100.0, vec![(4.0, 50.0), (5.0, 40.0)]).is_err());
        assert!(PowerCurve::new(3.0, 12.0, 25.0, 100.0, vec![(13.0, 50.0)]).is_err());
    }

    #[test]
    fn site_checks() {
        let mut s = site();
        s.hub_height = 10.0;
        assert!(s.validate().is_err());
        let mut s = site();
        s.shear = Shear::Series(vec![0.1, 0.2]);
        assert!(site_power(&[5.0], &s, &curve()).is_err());
        assert_eq!(site_power(&[5.0, 5.0], &s, &curve()).unwrap().len(), 2);
    }

    #[test]
    fn energy_totals() {
        let a = [100.0; 10];
        assert_eq!(energy_error(&a, &a, 1.0).unwrap(), 0.0);
        assert_eq!(energy_error(&a, &[200.0; 10], 1.0).unwrap(), 1000.0);
        assert!(energy_error(&a, &[1.0], 1.0).is_err());
    }

    #[test]
    fn quantile_totals() {
        let s = TurbineSite { hub_height: 10.000_001, shear: Shear::Constant(0.0), ..site() };
        let c = curve();
        let truth = [1.0];
        let out = quantile_energy_error(&truth, &[vec![1.0], vec![15.0]], &s, &c, 1.0).unwrap();
        assert_eq!(out, vec![0.0, 3300.0]);
        let truth = [4.0, 8.0, 13.0];
        let same = quantile_energy_error(&truth, &[truth.to_vec(), truth.to_vec()], &site(), &c, 1.0).unwrap();
        assert_eq!(same, vec![0.0, 0.0]);
    }
}
