//! [`PathLossMap`] and its CSV encoding.
//!
//! Values file:
//!
//! ```text
//! # <X>,<Y>,<resolution>,<mode>,<fingerprint>
//! <Y rows of X comma-separated dB values, row y=0 first>
//! ```
//!
//! The winner layer is a sibling file (`name.winner.csv`) with the same
//! header and `cellid|mech|risid` tokens; uncoverable points hold `-` in the
//! winner layer and `inf` in the values file. Floats use Rust's shortest
//! round-trip formatting so a write/read/write cycle is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{LinkTag, Mechanism, RisMode};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("maps are not comparable: {0}")]
    Mismatch(String),
    #[error("invalid map: {0}")]
    Invalid(String),
}

/// What a map holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    WithRis,
    WithoutRis,
    /// Elementwise difference of two maps.
    Diff,
}

impl MapMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MapMode::WithRis => "with-ris",
            MapMode::WithoutRis => "without-ris",
            MapMode::Diff => "diff",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "with-ris" => Some(MapMode::WithRis),
            "without-ris" => Some(MapMode::WithoutRis),
            "diff" => Some(MapMode::Diff),
            _ => None,
        }
    }
}

impl From<RisMode> for MapMode {
    fn from(m: RisMode) -> Self {
        match m {
            RisMode::WithRis => MapMode::WithRis,
            RisMode::WithoutRis => MapMode::WithoutRis,
        }
    }
}

/// Configuration fingerprint: the scenario hash, plus `@<offset>` for maps
/// that depend on panel heights. Offsets that differ between panels are
/// summarized by a hash of their values.
pub fn map_fingerprint(s: &Scenario, mode: RisMode) -> String {
    let base = s.fingerprint();
    if mode == RisMode::WithoutRis || s.ris_panels().is_empty() {
        return base;
    }
    match s.uniform_offset() {
        Some(off) => format!("{base}@{off}"),
        None => {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            for p in s.ris_panels() {
                h.update(p.height_offset.to_le_bytes());
            }
            format!("{base}@x{}", hex::encode(&h.finalize()[..4]))
        }
    }
}

/// Sibling path of the winner layer: `m5.csv` → `m5.winner.csv`.
pub fn winner_path(values: &Path) -> PathBuf {
    let stem = values
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    values.with_file_name(format!("{stem}.winner.csv"))
}

/// X×Y grid of minimum path loss with the winning link per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossMap {
    nx: usize,
    ny: usize,
    resolution: f64,
    mode: MapMode,
    fingerprint: String,
    values: Vec<f64>,
    winners: Vec<Option<LinkTag>>,
}

impl PathLossMap {
    pub fn new(
        nx: usize,
        ny: usize,
        resolution: f64,
        mode: MapMode,
        fingerprint: String,
        values: Vec<f64>,
        winners: Vec<Option<LinkTag>>,
    ) -> Result<Self, MapError> {
        if nx == 0 || ny == 0 || values.len() != nx * ny || winners.len() != nx * ny {
            return Err(MapError::Invalid(format!(
                "{nx}x{ny} map with {} values and {} winners",
                values.len(),
                winners.len()
            )));
        }
        if fingerprint.is_empty() || fingerprint.contains([',', '\n']) {
            return Err(MapError::Invalid("bad fingerprint".into()));
        }
        for (v, w) in values.iter().zip(&winners) {
            if let Some(t) = w {
                if t.mechanism == Mechanism::Ris && t.ris_id.is_none()
                    || t.mechanism != Mechanism::Ris && t.ris_id.is_some()
                {
                    return Err(MapError::Invalid(format!("inconsistent winner {t:?}")));
                }
                if !v.is_finite() {
                    return Err(MapError::Invalid("winner on a non-finite point".into()));
                }
            }
            if v.is_nan() {
                return Err(MapError::Invalid("NaN value".into()));
            }
        }
        Ok(Self {
            nx,
            ny,
            resolution,
            mode,
            fingerprint,
            values,
            winners,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Fingerprint of the underlying scenario, without the offset part.
    pub fn scenario_fingerprint(&self) -> &str {
        self.fingerprint.split('@').next().unwrap_or_default()
    }

    /// Row-major values (`iy * nx + ix`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn winners(&self) -> &[Option<LinkTag>] {
        &self.winners
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn winner(&self, ix: usize, iy: usize) -> Option<&LinkTag> {
        self.winners[iy * self.nx + ix].as_ref()
    }

    /// Fails unless both maps share dimensions and scenario fingerprint.
    pub fn check_compatible(&self, other: &PathLossMap) -> Result<(), MapError> {
        if (self.nx, self.ny) != (other.nx, other.ny) {
            return Err(MapError::Mismatch(format!(
                "{}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        if self.resolution != other.resolution {
            return Err(MapError::Mismatch(format!(
                "resolution {} vs {}",
                self.resolution, other.resolution
            )));
        }
        if self.scenario_fingerprint() != other.scenario_fingerprint() {
            return Err(MapError::Mismatch(format!(
                "scenario {} vs {}",
                self.scenario_fingerprint(),
                other.scenario_fingerprint()
            )));
        }
        Ok(())
    }

    fn header(&self) -> String {
        format!(
            "# {},{},{},{},{}\n",
            self.nx,
            self.ny,
            self.resolution,
            self.mode.as_str(),
            self.fingerprint
        )
    }

    pub fn values_csv(&self) -> String {
        let mut out = self.header();
        for row in self.values.chunks(self.nx) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn winners_csv(&self) -> String {
        let mut out = self.header();
        for row in self.winners.chunks(self.nx) {
            for (i, w) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match w {
                    Some(t) => write!(
                        out,
                        "{}|{}|{}",
                        t.cell_id,
                        t.mechanism.as_str(),
                        t.ris_id.as_deref().unwrap_or("")
                    )
                    .unwrap(),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes the values file and its winner sibling.
    pub fn write_csv(&self, path: &Path) -> Result<PathBuf, MapError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| MapError::Io { path, source }
        };
        fs::write(path, self.values_csv()).map_err(io(path))?;
        let wpath = winner_path(path);
        fs::write(&wpath, self.winners_csv()).map_err(io(&wpath))?;
        Ok(wpath)
    }

    /// Parses a values file; winners are all empty.
    pub fn from_values_csv(text: &str, origin: &str) -> Result<Self, MapError> {
        let (hdr, rows) = parse_body(text, origin)?;
        let mut values = Vec::with_capacity(hdr.nx * hdr.ny);
        for (line, row) in rows {
            for tok in row.split(',') {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| fmt_err(origin, line, format!("bad value {tok:?}")))?;
                if v.is_nan() {
                    return Err(fmt_err(origin, line, "NaN value"));
                }
                values.push(v);
            }
            if values.len() % hdr.nx != 0 {
                return Err(fmt_err(origin, line, format!("expected {} columns", hdr.nx)));
            }
        }
        if values.len() != hdr.nx * hdr.ny {
            return Err(fmt_err(origin, 0, format!("expected {} rows", hdr.ny)));
        }
        let winners = vec![None; values.len()];
        Self::new(
            hdr.nx,
            hdr.ny,
            hdr.resolution,
            hdr.mode,
            hdr.fingerprint,
            values,
            winners,
        )
    }

    /// Merges a winner layer into a map read from its values file.
    pub fn with_winners_csv(mut self, text: &str, origin: &str) -> Result<Self, MapError> {
        let (hdr, rows) = parse_body(text, origin)?;
        if (hdr.nx, hdr.ny, hdr.mode, hdr.fingerprint.as_str())
            != (self.nx, self.ny, self.mode, self.fingerprint.as_str())
            || hdr.resolution != self.resolution
        {
            return Err(fmt_err(origin, 1, "winner header does not match the values file"));
        }
        let mut winners = Vec::with_capacity(self.values.len());
        for (line, row) in rows {
            for tok in row.split(',') {
                winners.push(parse_tag(tok).ok_or_else(|| fmt_err(origin, line, format!("bad token {tok:?}")))?);
            }
            if winners.len() % self.nx != 0 {
                return Err(fmt_err(origin, line, format!("expected {} columns", self.nx)));
            }
        }
        if winners.len() != self.values.len() {
            return Err(fmt_err(origin, 0, format!("expected {} rows", self.ny)));
        }
        self.winners = winners;
        Self::new(
            self.nx,
            self.ny,
            self.resolution,
            self.mode,
            self.fingerprint,
            self.values,
            self.winners,
        )
    }

    /// Reads a values file, plus its winner sibling when one exists.
    pub fn read_csv(path: &Path) -> Result<Self, MapError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| MapError::Io {
                path: p.to_owned(),
                source,
            })
        };
        let origin = path.display().to_string();
        let map = Self::from_values_csv(&read(path)?, &origin)?;
        let wpath = winner_path(path);
        if wpath.exists() {
            map.with_winners_csv(&read(&wpath)?, &wpath.display().to_string())
        } else {
            Ok(map)
        }
    }
}

struct Header {
    nx: usize,
    ny: usize,
    resolution: f64,
    mode: MapMode,
    fingerprint: String,
}

fn fmt_err(origin: &str, line: usize, message: impl Into<String>) -> MapError {
    MapError::Format {
        path: origin.to_owned(),
        line,
        message: message.into(),
    }
}

fn parse_body<'t>(text: &'t str, origin: &str) -> Result<(Header, Vec<(usize, &'t str)>), MapError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| fmt_err(origin, 1, "empty file"))?;
    let body = first
        .strip_prefix("# ")
        .ok_or_else(|| fmt_err(origin, 1, "missing `# X,Y,resolution,mode,fingerprint` header"))?;
    let f: Vec<&str> = body.split(',').collect();
    if f.len() != 5 {
        return Err(fmt_err(origin, 1, "header needs 5 fields"));
    }
    let bad = |what: &str| fmt_err(origin, 1, format!("bad {what} in header"));
    let hdr = Header {
        nx: f[0].parse().map_err(|_| bad("X"))?,
        ny: f[1].parse().map_err(|_| bad("Y"))?,
        resolution: f[2].parse().map_err(|_| bad("resolution"))?,
        mode: MapMode::parse(f[3]).ok_or_else(|| bad("mode"))?,
        fingerprint: f[4].to_owned(),
    };
    if hdr.nx == 0 || hdr.ny == 0 {
        return Err(bad("dimensions"));
    }
    Ok((hdr, lines.collect()))
}

fn parse_tag(tok: &str) -> Option<Option<LinkTag>> {
    if tok == "-" {
        return Some(None);
    }
    let mut parts = tok.split('|');
    let (cell, mech, ris) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || cell.is_empty() {
        return None;
    }
    let mechanism = Mechanism::parse(mech)?;
    let ris_id = match (mechanism, ris) {
        (Mechanism::Ris, "") => return None,
        (Mechanism::Ris, r) => Some(r.to_owned()),
        (_, "") => None,
        _ => return None,
    };
    Some(Some(LinkTag {
        cell_id: cell.to_owned(),
        mechanism,
        ris_id,
    }))
}
