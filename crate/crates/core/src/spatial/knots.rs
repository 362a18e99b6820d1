//! Knot selection: one location per grid cell plus high-wind locations.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{bail, Result};
use crate::field::SpaceTimeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KnotTag {
    Grid,
    HighWind,
}

impl KnotTag {
    pub fn name(self) -> &'static str {
        match self {
            KnotTag::Grid => "grid-knot",
            KnotTag::HighWind => "high-wind-knot",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "grid-knot" => Some(KnotTag::Grid),
            "high-wind-knot" => Some(KnotTag::HighWind),
            _ => None,
        }
    }
}

/// Knot indices into a location list, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSet {
    indices: Vec<usize>,
    tags: Vec<KnotTag>,
}

impl KnotSet {
    pub fn new(indices: Vec<usize>, tags: Vec<KnotTag>, n_locations: usize) -> Result<Self> {
        if indices.len() != tags.len() {
            bail!(Schema, "{} knot indices but {} tags", indices.len(), tags.len());
        }
        let mut pairs: Vec<(usize, KnotTag)> = indices.into_iter().zip(tags).collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                bail!(InvalidData, "knot index {} appears twice", w[0].0);
            }
        }
        if let Some(&(i, _)) = pairs.iter().find(|p| p.0 >= n_locations) {
            bail!(InvalidData, "knot index {i} out of range for {n_locations} locations");
        }
        Ok(Self {
            indices: pairs.iter().map(|p| p.0).collect(),
            tags: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn tags(&self) -> &[KnotTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn count(&self, tag: KnotTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }
}

pub const DEFAULT_GRID_STEP: f64 = 0.25;
pub const DEFAULT_SPEED_THRESHOLD: f64 = 6.0;
pub const DEFAULT_MIN_SEPARATION: f64 = 0.005;

/// Select knots from a (training-window) wind-speed field.
pub fn select_knots(field: &SpaceTimeField, grid_step: f64, speed_threshold: f64, min_sep: f64) -> Result<KnotSet> {
    if field.n_locations() == 0 || field.n_times() == 0 {
        bail!(InvalidData, "knot selection needs a nonempty field");
    }
    if !(grid_step > 0.0) || !(speed_threshold > 0.0) || !(min_sep > 0.0) {
        bail!(Config, "grid step, speed threshold and separation must be positive");
    }
    let locs = field.locations();
    let x0 = locs.iter().map(|l| l.x).fold(f64::INFINITY, f64::min);
    let y0 = locs.iter().map(|l| l.y).fold(f64::INFINITY, f64::min);

    // Cell -> (distance², index); strict comparison keeps the earliest
    // location on ties.
    let mut cells: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
    for (i, l) in locs.iter().enumerate() {
        let cx = ((l.x - x0) / grid_step).floor();
        let cy = ((l.y - y0) / grid_step).floor();
        let center = (x0 + (cx + 0.5) * grid_step, y0 + (cy + 0.5) * grid_step);
        let d2 = (l.x - center.0).powi(2) + (l.y - center.1).powi(2);
        let key = (cx as i64, cy as i64);
        match cells.get(&key) {
            Some(&(d, _)) if d <= d2 => {}
            _ => {
                cells.insert(key, (d2, i));
            }
        }
    }
    let mut tagged: BTreeMap<usize, KnotTag> = cells.values().map(|&(_, i)| (i, KnotTag::Grid)).collect();

    let means = field.location_means();
    let mut candidates: Vec<usize> = (0..locs.len()).filter(|&i| means[i] > speed_threshold).collect();
    candidates.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        let far = kept
            .iter()
            .all(|&k| (locs[k].x - locs[i].x).abs() >= min_sep || (locs[k].y - locs[i].y).abs() >= min_sep);
        if far {
            kept.push(i);
            tagged.insert(i, KnotTag::HighWind);
        }
    }
    if tagged.is_empty() {
        bail!(Config, "knot selection produced no knots");
    }
    let (indices, tags) = tagged.into_iter().unzip();
    KnotSet::new(indices, tags, locs.len())
}
