//! Path-loss models: urban-macro LOS/NLOS (TR 38.901), the RIS far-field
//! beamforming model, and the downlink link budget.
//!
//! All path-loss values exclude antenna gains and system margins; those are
//! applied once, in [`received_power`].

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::geometry::{dist2d, dist3d, Point3};
use crate::scenario::{CellPattern, CellSite, RisPanel};

/// Propagation speed used by TR 38.901 for the breakpoint distance.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Effective environment height for the UMa breakpoint.
pub const UMA_ENVIRONMENT_HEIGHT: f64 = 1.0;
pub const UMA_MIN_D2D: f64 = 10.0;
pub const UMA_MAX_D2D: f64 = 5000.0;
pub const UMA_NLOS_MIN_UT: f64 = 1.5;
pub const UMA_NLOS_MAX_UT: f64 = 22.5;

/// Far-field factor: both legs must be at least this many panel extents.
pub const FAR_FIELD_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("horizontal distance {d2d:.3} m exceeds the {max} m model limit")]
    TooFar { d2d: f64, max: f64 },
    #[error("receiver height {h} m outside [{min}, {max}] m")]
    ReceiverHeight { h: f64, min: f64, max: f64 },
    #[error("panel {panel}: leg of {distance:.3} m is inside the {limit:.3} m near-field zone")]
    NearField { panel: String, distance: f64, limit: f64 },
    #[error("panel {panel}: angle {theta:.4} rad is outside the servable half-space")]
    NotServable { panel: String, theta: f64 },
    #[error("invalid link input: {0}")]
    Invalid(&'static str),
}

/// Distances, heights and carrier for a direct link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub d2d: f64,
    pub d3d: f64,
    pub tx_height: f64,
    pub rx_height: f64,
    pub frequency_ghz: f64,
}

impl LinkGeometry {
    pub fn from_points(tx: Point3, rx: Point3, frequency_ghz: f64) -> Self {
        Self {
            d2d: dist2d(tx, rx),
            d3d: dist3d(tx, rx),
            tx_height: tx.z,
            rx_height: rx.z,
            frequency_ghz,
        }
    }

    /// Geometry at horizontal distance `d2d` for the given heights.
    pub fn at_distance(d2d: f64, tx_height: f64, rx_height: f64, frequency_ghz: f64) -> Self {
        Self {
            d2d,
            d3d: d2d.hypot(tx_height - rx_height),
            tx_height,
            rx_height,
            frequency_ghz,
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        let all_finite = [self.d2d, self.d3d, self.tx_height, self.rx_height, self.frequency_ghz]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ModelError::Invalid("non-finite value"));
        }
        if self.frequency_ghz <= 0.0 {
            return Err(ModelError::Invalid("frequency must be > 0"));
        }
        if self.tx_height <= 0.0 || self.rx_height <= 0.0 {
            return Err(ModelError::Invalid("heights must be > 0"));
        }
        if self.d2d < 0.0 || self.d3d + 1e-9 < self.d2d {
            return Err(ModelError::Invalid("need d3d >= d2d >= 0"));
        }
        if self.d2d > UMA_MAX_D2D {
            return Err(ModelError::TooFar {
                d2d: self.d2d,
                max: UMA_MAX_D2D,
            });
        }
        Ok(())
    }

    /// Raises `d2d` to the model's 10 m floor, recomputing `d3d`.
    fn clamped(&self) -> Self {
        if self.d2d < UMA_MIN_D2D {
            Self::at_distance(UMA_MIN_D2D, self.tx_height, self.rx_height, self.frequency_ghz)
        } else {
            *self
        }
    }
}

/// UMa breakpoint distance `4·h'_BS·h'_UT·f/c`.
pub fn breakpoint_distance(tx_height: f64, rx_height: f64, frequency_ghz: f64) -> f64 {
    4.0 * (tx_height - UMA_ENVIRONMENT_HEIGHT) * (rx_height - UMA_ENVIRONMENT_HEIGHT) * frequency_ghz * 1e9
        / SPEED_OF_LIGHT
}

fn uma_los_near(d3d: f64, f_ghz: f64) -> f64 {
    28.0 + 22.0 * d3d.log10() + 20.0 * f_ghz.log10()
}

fn uma_los_far(d3d: f64, f_ghz: f64, d_bp: f64, dh: f64) -> f64 {
    28.0 + 40.0 * d3d.log10() + 20.0 * f_ghz.log10() - 9.0 * (d_bp * d_bp + dh * dh).log10()
}

/// Urban-macro line-of-sight path loss, dual slope around the breakpoint.
pub fn uma_los_pl(g: &LinkGeometry) -> Result<f64, ModelError> {
    g.check()?;
    let g = g.clamped();
    let d_bp = breakpoint_distance(g.tx_height, g.rx_height, g.frequency_ghz);
    Ok(if g.d2d <= d_bp {
        uma_los_near(g.d3d, g.frequency_ghz)
    } else {
        uma_los_far(g.d3d, g.frequency_ghz, d_bp, g.tx_height - g.rx_height)
    })
}

/// Urban-macro non-line-of-sight path loss, never below the LOS value.
pub fn uma_nlos_pl(g: &LinkGeometry) -> Result<f64, ModelError> {
    if !(UMA_NLOS_MIN_UT..=UMA_NLOS_MAX_UT).contains(&g.rx_height) {
        return Err(ModelError::ReceiverHeight {
            h: g.rx_height,
            min: UMA_NLOS_MIN_UT,
            max: UMA_NLOS_MAX_UT,
        });
    }
    let los = uma_los_pl(g)?;
    let c = g.clamped();
    let nlos = 13.54 + 39.08 * c.d3d.log10() + 20.0 * c.frequency_ghz.log10() - 0.6 * (c.rx_height - 1.5);
    Ok(los.max(nlos))
}

/// Geometry of a cell → panel → receiver reflection.
#[derive(Debug, Clone, Copy)]
pub struct RisLinkGeometry<'a> {
    /// Cell to panel distance.
    pub d1: f64,
    /// Panel to receiver distance.
    pub d2: f64,
    /// Departure angle from the panel normal towards the cell.
    pub theta_t: f64,
    /// Arrival angle from the panel normal towards the receiver.
    pub theta_r: f64,
    pub panel: &'a RisPanel,
    pub frequency_ghz: f64,
}

impl<'a> RisLinkGeometry<'a> {
    /// Angles are measured in 3-D against the panel's horizontal normal.
    pub fn from_points(tx: Point3, panel: &'a RisPanel, rx: Point3, frequency_ghz: f64) -> Self {
        let c = panel.center();
        Self {
            d1: dist3d(tx, c),
            d2: dist3d(c, rx),
            theta_t: angle_from_normal(panel, tx),
            theta_r: angle_from_normal(panel, rx),
            panel,
            frequency_ghz,
        }
    }
}

/// Angle between the panel's facing normal and the direction to `target`.
pub fn angle_from_normal(panel: &RisPanel, target: Point3) -> f64 {
    let c = panel.center();
    let n = panel.normal();
    let v = [target.x - c.x, target.y - c.y, target.z - c.z];
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if len == 0.0 {
        return FRAC_PI_2;
    }
    let cos = ((n.x * v[0] + n.y * v[1]) / len).clamp(-1.0, 1.0);
    cos.acos()
}

/// Normalized unit-cell power pattern.
pub fn cell_pattern(pattern: CellPattern, theta: f64) -> f64 {
    match pattern {
        CellPattern::Isotropic => 1.0,
        CellPattern::Cosine if theta >= FRAC_PI_2 => 0.0,
        CellPattern::Cosine => theta.cos(),
    }
}

/// Linear unit-cell gain: the configured value, or `4π·d_m·d_n/λ²`.
pub fn unit_cell_gain(panel: &RisPanel, wavelength: f64) -> f64 {
    match panel.element_gain_dbi {
        Some(dbi) => 10f64.powf(dbi / 10.0),
        None => 4.0 * PI * panel.element_width * panel.element_height / (wavelength * wavelength),
    }
}

/// Minimum leg length for the far-field model to apply to `panel`.
pub fn far_field_distance(panel: &RisPanel) -> f64 {
    FAR_FIELD_FACTOR * panel.aperture_extent()
}

/// Far-field beamforming path loss through an M×N reflecting panel,
/// terminal antenna gains taken as unity.
pub fn ris_ffbc_pl(g: &RisLinkGeometry<'_>) -> Result<f64, ModelError> {
    let panel = g.panel;
    if !(g.frequency_ghz.is_finite() && g.frequency_ghz > 0.0) {
        return Err(ModelError::Invalid("frequency must be > 0"));
    }
    for theta in [g.theta_t, g.theta_r] {
        if !(0.0..FRAC_PI_2).contains(&theta) {
            return Err(ModelError::NotServable {
                panel: panel.id.clone(),
                theta,
            });
        }
    }
    let limit = far_field_distance(panel);
    for distance in [g.d1, g.d2] {
        if !(distance >= limit) {
            return Err(ModelError::NearField {
                panel: panel.id.clone(),
                distance,
                limit,
            });
        }
    }
    let f_t = cell_pattern(panel.pattern, g.theta_t);
    let f_r = cell_pattern(panel.pattern, g.theta_r);
    if f_t <= 0.0 || f_r <= 0.0 {
        let theta = if f_t <= 0.0 { g.theta_t } else { g.theta_r };
        return Err(ModelError::NotServable {
            panel: panel.id.clone(),
            theta,
        });
    }

    let wavelength = SPEED_OF_LIGHT / (g.frequency_ghz * 1e9);
    let gain = unit_cell_gain(panel, wavelength);
    let db = |x: f64| 10.0 * x.log10();
    Ok(db(64.0 * PI.powi(3)) + 2.0 * db(g.d1) + 2.0 * db(g.d2)
        - db(gain)
        - 2.0 * db(panel.rows as f64)
        - 2.0 * db(panel.cols as f64)
        - db(panel.element_width)
        - db(panel.element_height)
        - 2.0 * db(wavelength)
        - db(f_t)
        - db(f_r)
        - 2.0 * db(panel.reflection_amplitude))
}

/// Downlink received power for `cell` after `pl_db` of path loss.
pub fn received_power(cell: &CellSite, pl_db: f64) -> f64 {
    cell.tx_power_dbm + cell.antenna_gain_dbi
        - cell.feeder_loss_db
        - pl_db
        - cell.interference_margin_db
        - cell.doppler_margin_db
        - cell.fade_margin_db
        - cell.shadow_margin_db
        - cell.implementation_loss_db
}
