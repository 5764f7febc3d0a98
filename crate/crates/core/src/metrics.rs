//! Height-sweep metrics: mean panel height change, visibility-weighted
//! cell–panel height difference, and mean path-loss gain.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{compute_map, MapError, PathLossMap, RisMode};
use crate::geometry::{visibility_matrix, VisibilityMatrix};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("scenario has no RIS panels")]
    NoPanels,
    #[error("visibility matrix is {got:?}, expected {expected:?}")]
    Shape {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("no cell sees any panel")]
    NoVisiblePair,
    #[error("maps share no finite points")]
    NoFinitePoints,
    #[error("sweep needs at least one offset")]
    NoOffsets,
    #[error("offsets must be strictly increasing ({prev} then {next})")]
    OffsetOrder { prev: f64, next: f64 },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("offset {offset} m: {source}")]
    Offset {
        offset: f64,
        #[source]
        source: ScenarioError,
    },
}

/// Mean of `xs` written as `first + mean(x - first)`, which is exact when
/// every element is equal.
fn anchored_mean(xs: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let first = xs.clone().next()?;
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + (x - first), n + 1));
    Some(first + sum / n as f64)
}

/// Mean panel height above default, in meters.
pub fn delta_h_ris(s: &Scenario) -> Result<f64, MetricsError> {
    // current − default is by definition the stored offset.
    anchored_mean(s.ris_panels().iter().map(|p| p.height_offset)).ok_or(MetricsError::NoPanels)
}

/// Visibility-weighted mean of (cell antenna height − current panel height).
pub fn delta_h_bs_ris(s: &Scenario, chi: &VisibilityMatrix) -> Result<f64, MetricsError> {
    let expected = (s.cells().len(), s.ris_panels().len());
    if chi.shape() != expected {
        return Err(MetricsError::Shape {
            got: chi.shape(),
            expected,
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, cell) in s.cells().iter().enumerate() {
        for (j, panel) in s.ris_panels().iter().enumerate() {
            if chi.get(i, j) {
                sum += cell.antenna_height - panel.current_height();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(MetricsError::NoVisiblePair);
    }
    Ok(sum / count as f64)
}

/// `100·(1 − Σ with_ris / Σ baseline)` over points finite in both maps.
pub fn mean_pl_gain(baseline: &PathLossMap, with_ris: &PathLossMap) -> Result<f64, MetricsError> {
    baseline.check_compatible(with_ris)?;
    let (mut num, mut den) = (0.0, 0.0);
    let mut any = false;
    for (&b, &r) in baseline.values().iter().zip(with_ris.values()) {
        if b.is_finite() && r.is_finite() {
            num += r;
            den += b;
            any = true;
        }
    }
    if !any || den == 0.0 {
        return Err(MetricsError::NoFinitePoints);
    }
    Ok(100.0 * (1.0 - num / den))
}

/// One column of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// Uniform panel offset, equal to the mean height change.
    pub offset: f64,
    /// `None` when no cell sees any panel.
    pub delta_h_bs_ris: Option<f64>,
    pub mean_pl_gain_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub scenario_fingerprint: String,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Three-row table, one column per offset, values to 2 decimals.
    pub fn to_table(&self) -> String {
        let label_w = 11;
        let col_w = 10;
        let fmt_row = |label: &str, cells: Vec<String>| {
            let mut line = format!("{label:<label_w$}");
            for c in cells {
                write!(line, " | {c:>col_w$}").unwrap();
            }
            line.push('\n');
            line
        };
        let mut out = format!("{:<label_w$} | Value\n", "Parameter");
        let rule_len = label_w + self.entries.len() * (col_w + 3);
        out.push_str(&"-".repeat(rule_len));
        out.push('\n');
        out.push_str(&fmt_row(
            "Δh_RIS",
            self.entries.iter().map(|e| format!("{:.2} m", e.offset)).collect(),
        ));
        out.push_str(&fmt_row(
            "Δh_BS-RIS",
            self.entries
                .iter()
                .map(|e| match e.delta_h_bs_ris {
                    Some(v) => format!("{v:.2} m"),
                    None => "n/a".to_owned(),
                })
                .collect(),
        ));
        out.push_str(&fmt_row(
            "ΔPL (mean)",
            self.entries
                .iter()
                .map(|e| format!("{:.2} %", e.mean_pl_gain_pct))
                .collect(),
        ));
        out
    }
}

/// Evaluates the metric triple at each offset.
///
/// Visibility is computed once as the union over all offsets, and the
/// baseline map (which ignores panels) once for the whole sweep.
pub fn run_sweep(s: &Scenario, offsets: &[f64]) -> Result<SweepReport, MetricsError> {
    if offsets.is_empty() {
        return Err(MetricsError::NoOffsets);
    }
    for w in offsets.windows(2) {
        if !(w[1] > w[0]) {
            return Err(MetricsError::OffsetOrder { prev: w[0], next: w[1] });
        }
    }
    let chi = visibility_matrix(s, offsets).map_err(|source| MetricsError::Offset {
        offset: offsets[0],
        source,
    })?;
    let baseline = compute_map(s, RisMode::WithoutRis);

    let mut entries = Vec::with_capacity(offsets.len());
    for &offset in offsets {
        let shifted = s
            .apply_ris_offset(offset)
            .map_err(|source| MetricsError::Offset { offset, source })?;
        let delta_h_bs_ris = match delta_h_bs_ris(&shifted, &chi) {
            Ok(v) => Some(v),
            Err(MetricsError::NoVisiblePair) => None,
            Err(e) => return Err(e),
        };
        let with_ris = compute_map(&shifted, RisMode::WithRis);
        entries.push(SweepEntry {
            offset,
            delta_h_bs_ris,
            mean_pl_gain_pct: mean_pl_gain(&baseline, &with_ris)?,
        });
    }
    Ok(SweepReport {
        entries,
        scenario_fingerprint: s.fingerprint(),
    })
}
