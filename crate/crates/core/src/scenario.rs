//! The immutable world description: evaluation grid, buildings, cells and
//! RIS panels.
//!
//! A [`Scenario`] can only be obtained through [`Scenario::new`] or the JSON
//! loaders, all of which run the full validation pass and resolve optional
//! fields. Everything downstream relies on those invariants.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{self, Point2, Point3};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}` (line {line}, column {column}): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {entity}: {message}")]
    Validation { entity: String, message: String },
    #[error("height offset {offset} m puts panel {panel} at non-positive height")]
    Domain { panel: String, offset: f64 },
}

fn invalid(entity: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        entity: entity.into(),
        message: message.into(),
    }
}

fn default_rx_height() -> f64 {
    1.5
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Rectangular evaluation area sampled at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: f64,
    pub height: f64,
    pub resolution: f64,
    #[serde(default = "default_rx_height")]
    pub rx_height: f64,
}

impl AreaGrid {
    pub fn nx(&self) -> usize {
        (self.width / self.resolution).floor() as usize
    }

    pub fn ny(&self) -> usize {
        (self.height / self.resolution).floor() as usize
    }

    /// Receiver location at the center of grid cell `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> Point3 {
        Point3::new(
            self.origin_x + (ix as f64 + 0.5) * self.resolution,
            self.origin_y + (iy as f64 + 0.5) * self.resolution,
            self.rx_height,
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.origin_x
            && p.x <= self.origin_x + self.width
            && p.y >= self.origin_y
            && p.y <= self.origin_y + self.height
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let fields = [
            self.origin_x,
            self.origin_y,
            self.width,
            self.height,
            self.resolution,
            self.rx_height,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid", "all fields must be finite"));
        }
        if self.width <= 0.0 || self.height <= 0.0 || self.resolution <= 0.0 {
            return Err(invalid("grid", "width, height and resolution must be > 0"));
        }
        if self.nx() < 1 || self.ny() < 1 {
            return Err(invalid("grid", "resolution larger than the area"));
        }
        if self.rx_height <= 0.0 {
            return Err(invalid("grid", "rx_height must be > 0"));
        }
        Ok(())
    }
}

/// Extruded footprint with a flat roof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    pub id: String,
    pub footprint: Vec<Point2>,
    pub roof_height: f64,
}

impl Building {
    fn validate(&self) -> Result<(), ScenarioError> {
        let who = || format!("building {}", self.id);
        let fp = &self.footprint;
        if fp.len() < 3 {
            return Err(invalid(who(), "footprint needs at least 3 vertices"));
        }
        if !fp.iter().all(|p| p.is_finite()) {
            return Err(invalid(who(), "non-finite vertex"));
        }
        if !(self.roof_height.is_finite() && self.roof_height > 0.0) {
            return Err(invalid(who(), "roof_height must be > 0"));
        }
        for i in 0..fp.len() {
            for j in i + 1..fp.len() {
                if fp[i] == fp[j] {
                    return Err(invalid(who(), format!("repeated vertex {i} and {j}")));
                }
            }
        }
        let n = fp.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if geometry::segments_intersect(fp[i], fp[(i + 1) % n], fp[j], fp[(j + 1) % n]) {
                    return Err(invalid(who(), format!("edges {i} and {j} intersect")));
                }
            }
        }
        if geometry::signed_area2(fp).abs() <= geometry::EPS {
            return Err(invalid(who(), "degenerate footprint"));
        }
        Ok(())
    }

    /// Outward unit normal of edge `i` (from vertex `i` to `i + 1`).
    pub fn outward_normal(&self, i: usize) -> Point2 {
        let fp = &self.footprint;
        let e = fp[(i + 1) % fp.len()].sub(fp[i]);
        let len = e.norm();
        // Right-hand normal points out of a counter-clockwise ring.
        let sign = if geometry::signed_area2(fp) > 0.0 { 1.0 } else { -1.0 };
        Point2::new(sign * e.y / len, -sign * e.x / len)
    }
}

/// One radiating cell. Three cells (one per band) usually share a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSite {
    pub id: String,
    pub position: Point2,
    pub antenna_height: f64,
    pub frequency_mhz: f64,
    pub tx_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub feeder_loss_db: f64,
    pub noise_figure_db: f64,
    pub interference_margin_db: f64,
    pub doppler_margin_db: f64,
    pub fade_margin_db: f64,
    pub shadow_margin_db: f64,
    pub implementation_loss_db: f64,
    pub antenna_elements: u32,
    // Carried verbatim; no computation reads these.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcarriers_used: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcarriers_total: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reuse_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_bandwidth_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_duty_cycle_pct: Option<f64>,
}

impl CellSite {
    pub fn antenna_point(&self) -> Point3 {
        self.position.with_z(self.antenna_height)
    }

    pub fn frequency_ghz(&self) -> f64 {
        self.frequency_mhz / 1000.0
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let who = || format!("cell {}", self.id);
        if !self.position.is_finite() {
            return Err(invalid(who(), "non-finite position"));
        }
        if !(self.frequency_mhz.is_finite() && self.frequency_mhz > 0.0) {
            return Err(invalid(who(), "frequency_mhz must be > 0"));
        }
        if !(1.0..=200.0).contains(&self.antenna_height) {
            return Err(invalid(who(), "antenna_height must lie in [1, 200] m"));
        }
        if !self.tx_power_dbm.is_finite() || !self.antenna_gain_dbi.is_finite() {
            return Err(invalid(who(), "tx_power_dbm and antenna_gain_dbi must be finite"));
        }
        let losses = [
            ("feeder_loss_db", self.feeder_loss_db),
            ("noise_figure_db", self.noise_figure_db),
            ("interference_margin_db", self.interference_margin_db),
            ("doppler_margin_db", self.doppler_margin_db),
            ("fade_margin_db", self.fade_margin_db),
            ("shadow_margin_db", self.shadow_margin_db),
            ("implementation_loss_db", self.implementation_loss_db),
        ];
        for (name, v) in losses {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(who(), format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Unit-cell radiation pattern used by the reflected-path model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellPattern {
    /// `F(θ) = cos θ`, zero at and beyond grazing.
    #[default]
    Cosine,
    /// `F(θ) = 1`.
    Isotropic,
}

fn is_default_pattern(p: &CellPattern) -> bool {
    *p == CellPattern::Cosine
}

/// Passive reflecting panel mounted on a wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisPanel {
    pub id: String,
    pub position: Point2,
    pub default_height: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub height_offset: f64,
    pub rows: u32,
    pub cols: u32,
    pub element_width: f64,
    pub element_height: f64,
    pub reflection_amplitude: f64,
    /// Unit-cell gain; `None` selects the aperture-matched gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_gain_dbi: Option<f64>,
    /// Resolved during validation when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facing_normal: Option<Point2>,
    #[serde(default, skip_serializing_if = "is_default_pattern")]
    pub pattern: CellPattern,
}

impl RisPanel {
    pub fn current_height(&self) -> f64 {
        self.default_height + self.height_offset
    }

    pub fn center(&self) -> Point3 {
        self.position.with_z(self.current_height())
    }

    pub fn normal(&self) -> Point2 {
        self.facing_normal
            .expect("facing normal is resolved when the scenario is validated")
    }

    /// Largest side of the reflecting aperture, in meters.
    pub fn aperture_extent(&self) -> f64 {
        (self.rows as f64 * self.element_width).max(self.cols as f64 * self.element_height)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let who = || format!("ris panel {}", self.id);
        if !self.position.is_finite() {
            return Err(invalid(who(), "non-finite position"));
        }
        if self.rows < 1 || self.cols < 1 {
            return Err(invalid(who(), "rows and cols must be >= 1"));
        }
        if !(self.element_width > 0.0 && self.element_height > 0.0)
            || !self.element_width.is_finite()
            || !self.element_height.is_finite()
        {
            return Err(invalid(who(), "element dimensions must be > 0"));
        }
        if !(self.reflection_amplitude > 0.0 && self.reflection_amplitude <= 1.0) {
            return Err(invalid(who(), "reflection_amplitude must lie in (0, 1]"));
        }
        if !(self.default_height.is_finite() && self.default_height > 0.0) {
            return Err(invalid(who(), "default_height must be > 0"));
        }
        if !self.height_offset.is_finite() || self.current_height() <= 0.0 {
            return Err(invalid(who(), "default_height + height_offset must be > 0"));
        }
        if let Some(g) = self.element_gain_dbi {
            if !g.is_finite() {
                return Err(invalid(who(), "element_gain_dbi must be finite"));
            }
        }
        Ok(())
    }
}

/// Descriptive metadata; not part of the world fingerprint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// On-disk document layout.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    meta: Option<ScenarioMeta>,
    grid: AreaGrid,
    #[serde(default)]
    buildings: Vec<Building>,
    cells: Vec<CellSite>,
    #[serde(default)]
    ris_panels: Vec<RisPanel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<ScenarioMeta>,
    grid: AreaGrid,
    buildings: Vec<Building>,
    cells: Vec<CellSite>,
    ris_panels: Vec<RisPanel>,
}

fn check_id(kind: &str, id: &str, seen: &mut HashSet<String>) -> Result<(), ScenarioError> {
    let ok = !id.is_empty()
        && id != "-"
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !ok {
        return Err(invalid(
            format!("{kind} {id:?}"),
            "ids must be non-empty and use only [A-Za-z0-9_.-]",
        ));
    }
    if !seen.insert(id.to_owned()) {
        return Err(invalid(format!("{kind} {id}"), "duplicate id"));
    }
    Ok(())
}

impl Scenario {
    /// Validates every invariant and resolves panel normals.
    pub fn new(
        grid: AreaGrid,
        buildings: Vec<Building>,
        cells: Vec<CellSite>,
        ris_panels: Vec<RisPanel>,
    ) -> Result<Self, ScenarioError> {
        Self::with_meta(None, grid, buildings, cells, ris_panels)
    }

    pub fn with_meta(
        meta: Option<ScenarioMeta>,
        grid: AreaGrid,
        buildings: Vec<Building>,
        cells: Vec<CellSite>,
        mut ris_panels: Vec<RisPanel>,
    ) -> Result<Self, ScenarioError> {
        grid.validate()?;

        let mut seen = HashSet::new();
        for b in &buildings {
            check_id("building", &b.id, &mut seen)?;
            b.validate()?;
        }
        seen.clear();
        for c in &cells {
            check_id("cell", &c.id, &mut seen)?;
            c.validate()?;
            if !grid.contains(c.position) {
                return Err(invalid(format!("cell {}", c.id), "position outside the grid extent"));
            }
        }
        seen.clear();
        for p in ris_panels.iter_mut() {
            check_id("ris panel", &p.id, &mut seen)?;
            p.validate()?;
            if !grid.contains(p.position) {
                return Err(invalid(
                    format!("ris panel {}", p.id),
                    "position outside the grid extent",
                ));
            }
            let normal = match p.facing_normal {
                Some(n) => n,
                None => nearest_edge_normal(p.position, &buildings).ok_or_else(|| {
                    invalid(
                        format!("ris panel {}", p.id),
                        "facing_normal omitted and no building edge to derive it from",
                    )
                })?,
            };
            let len = normal.norm();
            if !(len.is_finite() && len > 0.0) {
                return Err(invalid(format!("ris panel {}", p.id), "facing_normal must be non-zero"));
            }
            // Already-unit normals are kept bit-for-bit so reloading is stable.
            p.facing_normal = Some(if (len - 1.0).abs() <= 1e-12 {
                normal
            } else {
                Point2::new(normal.x / len, normal.y / len)
            });
        }

        Ok(Self {
            meta,
            grid,
            buildings,
            cells,
            ris_panels,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        Self::with_meta(doc.meta, doc.grid, doc.buildings, doc.cells, doc.ris_panels)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn grid(&self) -> &AreaGrid {
        &self.grid
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn cells(&self) -> &[CellSite] {
        &self.cells
    }

    pub fn ris_panels(&self) -> &[RisPanel] {
        &self.ris_panels
    }

    pub fn meta(&self) -> Option<&ScenarioMeta> {
        self.meta.as_ref()
    }

    /// Same world with every panel set to the absolute `offset` above its
    /// default height.
    pub fn apply_ris_offset(&self, offset: f64) -> Result<Scenario, ScenarioError> {
        let mut out = self.clone();
        for p in out.ris_panels.iter_mut() {
            p.height_offset = offset;
            if !offset.is_finite() || p.current_height() <= 0.0 {
                return Err(ScenarioError::Domain {
                    panel: p.id.clone(),
                    offset,
                });
            }
        }
        Ok(out)
    }

    /// Copy with all panels removed.
    pub fn without_panels(&self) -> Scenario {
        Scenario {
            ris_panels: Vec::new(),
            ..self.clone()
        }
    }

    /// Hash of the world with panel offsets reset, so it identifies the
    /// scenario independently of the current panel heights.
    pub fn fingerprint(&self) -> String {
        let mut base = Scenario {
            meta: None,
            ..self.clone()
        };
        for p in base.ris_panels.iter_mut() {
            p.height_offset = 0.0;
        }
        let bytes = serde_json::to_vec(&base).expect("scenario serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    /// The panels' common offset, or `None` when they differ (or there are
    /// no panels).
    pub fn uniform_offset(&self) -> Option<f64> {
        let first = self.ris_panels.first()?.height_offset;
        self.ris_panels
            .iter()
            .all(|p| p.height_offset == first)
            .then_some(first)
    }
}

/// Outward normal of the building edge closest to `p`.
fn nearest_edge_normal(p: Point2, buildings: &[Building]) -> Option<Point2> {
    let mut best: Option<(f64, Point2)> = None;
    for b in buildings {
        let n = b.footprint.len();
        for i in 0..n {
            let d = geometry::point_segment_distance(p, b.footprint[i], b.footprint[(i + 1) % n]);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, b.outward_normal(i)));
            }
        }
    }
    best.map(|(_, n)| n)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    Scenario::from_json_str(&text)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, scenario.to_json_string())
}
