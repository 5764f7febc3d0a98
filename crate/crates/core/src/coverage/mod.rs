//! Per-point minimum path loss over direct and RIS-reflected links, and the
//! whole-grid maps built from it.

mod map;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{ObstacleIndex, Point3, VisibilityMatrix};
use crate::propagation::{self, LinkGeometry, ModelError, RisLinkGeometry};
use crate::scenario::Scenario;

pub use map::{map_fingerprint, winner_path, MapError, MapMode, PathLossMap};

/// Propagation mechanism of a candidate link. Declaration order is the
/// tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mechanism {
    Los,
    Nlos,
    Ris,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Los => "LOS",
            Mechanism::Nlos => "NLOS",
            Mechanism::Ris => "RIS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "LOS" => Some(Mechanism::Los),
            "NLOS" => Some(Mechanism::Nlos),
            "RIS" => Some(Mechanism::Ris),
            _ => None,
        }
    }
}

/// Identifies the link that produced a point's minimum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkTag {
    pub cell_id: String,
    pub mechanism: Mechanism,
    pub ris_id: Option<String>,
}

impl LinkTag {
    pub fn direct(cell_id: &str, mechanism: Mechanism) -> Self {
        debug_assert!(mechanism != Mechanism::Ris);
        Self {
            cell_id: cell_id.to_owned(),
            mechanism,
            ris_id: None,
        }
    }

    pub fn reflected(cell_id: &str, ris_id: &str) -> Self {
        Self {
            cell_id: cell_id.to_owned(),
            mechanism: Mechanism::Ris,
            ris_id: Some(ris_id.to_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverageError {
    #[error("no cell can serve ({x:.3}, {y:.3}) within model validity")]
    Uncoverable { x: f64, y: f64 },
    #[error("point ({x:.3}, {y:.3}) lies outside the grid")]
    OutsideGrid { x: f64, y: f64 },
    #[error("unknown link {0:?}")]
    UnknownLink(LinkTag),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Whether reflected paths are part of the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisMode {
    WithRis,
    WithoutRis,
}

/// Running minimum with the declared tie-break: value, then mechanism,
/// then cell id, then panel id.
struct Best<'s> {
    value: f64,
    mechanism: Mechanism,
    cell: &'s str,
    ris: Option<&'s str>,
}

impl<'s> Best<'s> {
    fn beats(&self, other: &Best<'_>) -> bool {
        (self.value, self.mechanism, self.cell, self.ris)
            .partial_cmp(&(other.value, other.mechanism, other.cell, other.ris))
            .is_some_and(|o| o.is_lt())
    }

    fn tag(&self) -> LinkTag {
        LinkTag {
            cell_id: self.cell.to_owned(),
            mechanism: self.mechanism,
            ris_id: self.ris.map(str::to_owned),
        }
    }
}

/// Precomputed per-configuration state for evaluating many points.
///
/// Holds the building index and the cell → panel feed matrix for the
/// scenario's current panel heights.
pub struct Evaluator<'s> {
    scenario: &'s Scenario,
    obstacles: ObstacleIndex<'s>,
    cell_points: Vec<Point3>,
    /// Index into the distinct antenna points; co-sited cells share one.
    site_of: Vec<usize>,
    sites: usize,
    /// Cell sees the panel and lies in front of it.
    feeds: VisibilityMatrix,
}

impl<'s> Evaluator<'s> {
    pub fn new(scenario: &'s Scenario) -> Self {
        let obstacles = ObstacleIndex::new(scenario.buildings());
        let cell_points: Vec<Point3> = scenario.cells().iter().map(|c| c.antenna_point()).collect();
        let panels = scenario.ris_panels();
        let mut distinct: Vec<Point3> = Vec::new();
        let site_of = cell_points
            .iter()
            .map(|&cp| match distinct.iter().position(|&q| q == cp) {
                Some(k) => k,
                None => {
                    distinct.push(cp);
                    distinct.len() - 1
                }
            })
            .collect();
        let mut feeds = VisibilityMatrix::new(cell_points.len(), panels.len());
        for (i, &cp) in cell_points.iter().enumerate() {
            for (j, panel) in panels.iter().enumerate() {
                let in_front = propagation::angle_from_normal(panel, cp) < std::f64::consts::FRAC_PI_2;
                if in_front && obstacles.is_visible(cp, panel.center()) {
                    feeds.set(i, j, true);
                }
            }
        }
        Self {
            scenario,
            obstacles,
            cell_points,
            site_of,
            sites: distinct.len(),
            feeds,
        }
    }

    pub fn scenario(&self) -> &'s Scenario {
        self.scenario
    }

    /// Matrix of cell → panel pairs that can feed a reflection.
    pub fn feeds(&self) -> &VisibilityMatrix {
        &self.feeds
    }

    /// Minimum path loss at `p` and the link that achieves it.
    pub fn point(&self, p: Point3, mode: RisMode) -> Result<(f64, LinkTag), CoverageError> {
        let mut best: Option<Best<'s>> = None;
        let mut offer = |cand: Best<'s>| {
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        };

        let mut site_visible: Vec<Option<bool>> = vec![None; self.sites];
        for (i, (cell, &cp)) in self.scenario.cells().iter().zip(&self.cell_points).enumerate() {
            let g = LinkGeometry::from_points(cp, p, cell.frequency_ghz());
            let visible = *site_visible[self.site_of[i]].get_or_insert_with(|| self.obstacles.is_visible(cp, p));
            let (mechanism, pl) = if visible {
                (Mechanism::Los, propagation::uma_los_pl(&g))
            } else {
                (Mechanism::Nlos, propagation::uma_nlos_pl(&g))
            };
            if let Ok(value) = pl {
                offer(Best {
                    value,
                    mechanism,
                    cell: &cell.id,
                    ris: None,
                });
            }
        }

        if mode == RisMode::WithRis {
            for (j, panel) in self.scenario.ris_panels().iter().enumerate() {
                let theta_r = propagation::angle_from_normal(panel, p);
                if theta_r >= std::f64::consts::FRAC_PI_2 || !self.obstacles.is_visible(panel.center(), p) {
                    continue;
                }
                for (i, cell) in self.scenario.cells().iter().enumerate() {
                    if !self.feeds.get(i, j) {
                        continue;
                    }
                    let g = RisLinkGeometry::from_points(self.cell_points[i], panel, p, cell.frequency_ghz());
                    if let Ok(value) = propagation::ris_ffbc_pl(&g) {
                        offer(Best {
                            value,
                            mechanism: Mechanism::Ris,
                            cell: &cell.id,
                            ris: Some(&panel.id),
                        });
                    }
                }
            }
        }

        best.map(|b| (b.value, b.tag()))
            .ok_or(CoverageError::Uncoverable { x: p.x, y: p.y })
    }

    /// Path loss of one specific link at `p`, as used by [`Evaluator::point`].
    pub fn link_pl(&self, p: Point3, tag: &LinkTag) -> Result<f64, CoverageError> {
        let unknown = || CoverageError::UnknownLink(tag.clone());
        let i = self
            .scenario
            .cells()
            .iter()
            .position(|c| c.id == tag.cell_id)
            .ok_or_else(unknown)?;
        let cell = &self.scenario.cells()[i];
        let cp = self.cell_points[i];
        match (tag.mechanism, &tag.ris_id) {
            (Mechanism::Los, None) => Ok(propagation::uma_los_pl(&LinkGeometry::from_points(
                cp,
                p,
                cell.frequency_ghz(),
            ))?),
            (Mechanism::Nlos, None) => Ok(propagation::uma_nlos_pl(&LinkGeometry::from_points(
                cp,
                p,
                cell.frequency_ghz(),
            ))?),
            (Mechanism::Ris, Some(rid)) => {
                let panel = self
                    .scenario
                    .ris_panels()
                    .iter()
                    .find(|r| &r.id == rid)
                    .ok_or_else(unknown)?;
                let g = RisLinkGeometry::from_points(cp, panel, p, cell.frequency_ghz());
                Ok(propagation::ris_ffbc_pl(&g)?)
            }
            _ => Err(unknown()),
        }
    }
}

fn check_in_grid(s: &Scenario, p: Point3) -> Result<(), CoverageError> {
    if s.grid().contains(p.xy()) {
        Ok(())
    } else {
        Err(CoverageError::OutsideGrid { x: p.x, y: p.y })
    }
}

/// Minimum over direct links only.
pub fn point_pl_no_ris(s: &Scenario, p: Point3) -> Result<(f64, LinkTag), CoverageError> {
    check_in_grid(s, p)?;
    Evaluator::new(s).point(p, RisMode::WithoutRis)
}

/// Minimum over direct links and every servable reflection.
pub fn point_pl_with_ris(s: &Scenario, p: Point3) -> Result<(f64, LinkTag), CoverageError> {
    check_in_grid(s, p)?;
    Evaluator::new(s).point(p, RisMode::WithRis)
}

/// Evaluates every grid center. Rows are computed in parallel on the
/// current rayon pool; the result does not depend on the worker count.
pub fn compute_map(s: &Scenario, mode: RisMode) -> PathLossMap {
    let eval = Evaluator::new(s);
    let grid = s.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let rows: Vec<Vec<(f64, Option<LinkTag>)>> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            (0..nx)
                .map(|ix| match eval.point(grid.point(ix, iy), mode) {
                    Ok((v, tag)) => (v, Some(tag)),
                    Err(_) => (f64::INFINITY, None),
                })
                .collect()
        })
        .collect();
    let (values, winners) = rows.into_iter().flatten().unzip();
    PathLossMap::new(
        nx,
        ny,
        grid.resolution,
        mode.into(),
        map_fingerprint(s, mode),
        values,
        winners,
    )
    .expect("dimensions match the grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::scenario::{AreaGrid, Building, CellPattern, CellSite, RisPanel};

    fn grid(n: f64) -> AreaGrid {
        AreaGrid {
            origin_x: 0.0,
            origin_y: 0.0,
            width: n * 10.0,
            height: n * 10.0,
            resolution: 10.0,
            rx_height: 1.5,
        }
    }

    fn cell(id: &str, x: f64, y: f64, f_mhz: f64) -> CellSite {
        CellSite {
            id: id.into(),
            position: Point2::new(x, y),
            antenna_height: 30.0,
            frequency_mhz: f_mhz,
            tx_power_dbm: 46.0,
            antenna_gain_dbi: 16.0,
            feeder_loss_db: 2.0,
            noise_figure_db: 8.0,
            interference_margin_db: 2.0,
            doppler_margin_db: 3.0,
            fade_margin_db: 10.0,
            shadow_margin_db: 12.8,
            implementation_loss_db: 0.0,
            antenna_elements: 1,
            bandwidth_mhz: None,
            subcarriers_used: None,
            subcarriers_total: None,
            sampling_factor: None,
            reuse_factor: None,
            coherence_time_ms: None,
            coherence_bandwidth_mhz: None,
            spatial_duty_cycle_pct: None,
        }
    }

    fn wall(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, roof: f64) -> Building {
        Building {
            id: id.into(),
            footprint: vec![
                Point2::new(x0, y0),
                Point2::new(x1, y0),
                Point2::new(x1, y1),
                Point2::new(x0, y1),
            ],
            roof_height: roof,
        }
    }

    fn panel(id: &str, x: f64, y: f64, h: f64, n: Point2) -> RisPanel {
        RisPanel {
            id: id.into(),
            position: Point2::new(x, y),
            default_height: h,
            height_offset: 0.0,
            rows: 102,
            cols: 100,
            element_width: 0.01,
            element_height: 0.01,
            reflection_amplitude: 0.9,
            element_gain_dbi: None,
            facing_normal: Some(n),
            pattern: CellPattern::Cosine,
        }
    }

    #[test]
    fn single_cell_open_field() {
        let s = Scenario::new(grid(10.0), vec![], vec![cell("c", 0.0, 0.0, 3500.0)], vec![]).unwrap();
        let p = s.grid().point(4, 7);
        let (v, tag) = point_pl_no_ris(&s, p).unwrap();
        assert_eq!(tag, LinkTag::direct("c", Mechanism::Los));
        let g = LinkGeometry::from_points(s.cells()[0].antenna_point(), p, 3.5);
        assert_eq!(v, propagation::uma_los_pl(&g).unwrap());

        let m = compute_map(&s, RisMode::WithRis);
        assert_eq!(m.values().len(), 100);
        assert!(m.values().iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(m
            .winners()
            .iter()
            .all(|w| w.as_ref().unwrap().mechanism == Mechanism::Los));
    }

    #[test]
    fn tie_goes_to_lower_cell_id() {
        let s = Scenario::new(
            grid(10.0),
            vec![],
            vec![cell("b", 0.0, 50.0, 2100.0), cell("a", 100.0, 50.0, 2100.0)],
            vec![],
        )
        .unwrap();
        let (_, tag) = point_pl_no_ris(&s, Point3::new(50.0, 50.0, 1.5)).unwrap();
        assert_eq!(tag.cell_id, "a");
    }

    #[test]
    fn blocked_point_is_nlos() {
        let s = Scenario::new(
            grid(10.0),
            vec![wall("w", 40.0, 0.0, 45.0, 100.0, 40.0)],
            vec![cell("c", 10.0, 50.0, 3500.0)],
            vec![],
        )
        .unwrap();
        let (_, tag) = point_pl_no_ris(&s, Point3::new(80.0, 50.0, 1.5)).unwrap();
        assert_eq!(tag.mechanism, Mechanism::Nlos);
    }

    #[test]
    fn panel_serves_shadowed_point() {
        // Cell west of a tall wall; panel north of the wall facing south-east
        // can see both the cell and the shadowed region.
        let s = Scenario::new(
            grid(20.0),
            vec![wall("w", 90.0, 0.0, 100.0, 150.0, 60.0)],
            vec![cell("c", 40.0, 100.0, 3500.0)],
            vec![panel("r", 95.0, 180.0, 20.0, Point2::new(0.0, -1.0))],
        )
        .unwrap();
        let p = Point3::new(120.0, 150.0, 1.5);
        let (no, no_tag) = point_pl_no_ris(&s, p).unwrap();
        assert_eq!(no_tag.mechanism, Mechanism::Nlos);
        let (with, tag) = point_pl_with_ris(&s, p).unwrap();
        assert_eq!(tag, LinkTag::reflected("c", "r"));
        assert!(with < no);

        // The panel cannot serve points behind it.
        let behind = Point3::new(120.0, 195.0, 1.5);
        let (_, tag) = point_pl_with_ris(&s, behind).unwrap();
        assert_ne!(tag.mechanism, Mechanism::Ris);
    }

    #[test]
    fn outside_grid_and_uncoverable() {
        let s = Scenario::new(grid(10.0), vec![], vec![cell("c", 0.0, 0.0, 3500.0)], vec![]).unwrap();
        assert!(matches!(
            point_pl_no_ris(&s, Point3::new(500.0, 0.0, 1.5)),
            Err(CoverageError::OutsideGrid { .. })
        ));
        let mut g = grid(10.0);
        g.width = 6000.0;
        let far = Scenario::new(g, vec![], vec![cell("c", 0.0, 0.0, 3500.0)], vec![]).unwrap();
        assert!(matches!(
            point_pl_no_ris(&far, Point3::new(5990.0, 50.0, 1.5)),
            Err(CoverageError::Uncoverable { .. })
        ));
    }

    #[test]
    fn without_ris_equals_with_ris_minus_panels() {
        let s = Scenario::new(
            grid(20.0),
            vec![wall("w", 90.0, 0.0, 100.0, 150.0, 60.0)],
            vec![cell("c", 40.0, 100.0, 3500.0)],
            vec![panel("r", 95.0, 180.0, 20.0, Point2::new(0.0, -1.0))],
        )
        .unwrap();
        let a = compute_map(&s, RisMode::WithoutRis);
        let b = compute_map(&s.without_panels(), RisMode::WithRis);
        assert_eq!(a.values(), b.values());
        assert_eq!(a.winners(), b.winners());
    }

    #[test]
    fn link_pl_rejects_unknown_tags() {
        let s = Scenario::new(grid(10.0), vec![], vec![cell("c", 0.0, 0.0, 3500.0)], vec![]).unwrap();
        let e = Evaluator::new(&s);
        let p = Point3::new(50.0, 50.0, 1.5);
        assert!(e.link_pl(p, &LinkTag::direct("zz", Mechanism::Los)).is_err());
        assert!(e.link_pl(p, &LinkTag::reflected("c", "nope")).is_err());
    }
}
