//! Map rendering to binary PPM (P6) and elementwise map differences.

use thiserror::Error;

use crate::coverage::{MapError, MapMode, PathLossMap};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("min_db ({min}) must be below max_db ({max})")]
    Range { min: f64, max: f64 },
    #[error("palette needs at least two stops")]
    TooFewStops,
}

/// Linear dB → color mapping over evenly spaced palette stops.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorScale {
    min_db: f64,
    max_db: f64,
    palette: Vec<Rgb>,
    sentinel_color: Rgb,
}

/// Low loss (good coverage) is yellow, high loss is dark purple.
pub const DEFAULT_PALETTE: [Rgb; 5] = [
    [253, 231, 37],
    [94, 201, 98],
    [33, 145, 140],
    [59, 82, 139],
    [68, 1, 84],
];
pub const DEFAULT_SENTINEL: Rgb = [255, 0, 255];
pub const DEFAULT_MIN_DB: f64 = 60.0;
pub const DEFAULT_MAX_DB: f64 = 160.0;

impl Default for ColorScale {
    fn default() -> Self {
        Self::new(
            DEFAULT_MIN_DB,
            DEFAULT_MAX_DB,
            DEFAULT_PALETTE.to_vec(),
            DEFAULT_SENTINEL,
        )
        .expect("default scale is valid")
    }
}

impl ColorScale {
    pub fn new(min_db: f64, max_db: f64, palette: Vec<Rgb>, sentinel_color: Rgb) -> Result<Self, ScaleError> {
        if !(min_db.is_finite() && max_db.is_finite() && min_db < max_db) {
            return Err(ScaleError::Range {
                min: min_db,
                max: max_db,
            });
        }
        if palette.len() < 2 {
            return Err(ScaleError::TooFewStops);
        }
        Ok(Self {
            min_db,
            max_db,
            palette,
            sentinel_color,
        })
    }

    /// Default palette over a custom range.
    pub fn with_range(min_db: f64, max_db: f64) -> Result<Self, ScaleError> {
        Self::new(min_db, max_db, DEFAULT_PALETTE.to_vec(), DEFAULT_SENTINEL)
    }

    pub fn sentinel_color(&self) -> Rgb {
        self.sentinel_color
    }

    pub fn color(&self, value: f64) -> Rgb {
        if !value.is_finite() {
            return self.sentinel_color;
        }
        let t = ((value - self.min_db) / (self.max_db - self.min_db)).clamp(0.0, 1.0);
        let span = (self.palette.len() - 1) as f64;
        let pos = t * span;
        let k = (pos.floor() as usize).min(self.palette.len() - 2);
        let frac = pos - k as f64;
        let (a, b) = (self.palette[k], self.palette[k + 1]);
        let mix = |i: usize| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * frac).round() as u8;
        [mix(0), mix(1), mix(2)]
    }
}

/// One pixel per grid cell, row y=0 at the top.
pub fn render_map(m: &PathLossMap, scale: &ColorScale) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", m.nx(), m.ny()).into_bytes();
    out.reserve(m.values().len() * 3);
    for v in m.values() {
        out.extend_from_slice(&scale.color(*v));
    }
    out
}

/// Elementwise `a − b`; non-finite wherever either input is.
pub fn diff_map(a: &PathLossMap, b: &PathLossMap) -> Result<PathLossMap, MapError> {
    a.check_compatible(b)?;
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            if x.is_finite() && y.is_finite() {
                x - y
            } else {
                f64::INFINITY
            }
        })
        .collect();
    PathLossMap::new(
        a.nx(),
        a.ny(),
        a.resolution(),
        MapMode::Diff,
        a.scenario_fingerprint().to_owned(),
        values,
        vec![None; a.nx() * a.ny()],
    )
}
