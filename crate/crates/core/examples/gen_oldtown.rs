//! Generates the packaged `synthetic_oldtown.json` scenario.
//!
//! A 1.6 km × 1.6 km old-town layout: 100 m street pitch, 20 m streets, a
//! market square with a town hall in the middle, 8 rooftop sites with three
//! cells each (800/2100/3500 MHz) and 15 wall-mounted RIS panels, each fed
//! by at least one cell at its default height. Panel sites are picked
//! greedily by how much they would undercut the direct links nearby.
//!
//! ```text
//! cargo run -p ris-coverage --example gen_oldtown -- crates/core/data/synthetic_oldtown.json
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::f64::consts::FRAC_PI_2;

use ris_coverage::coverage::{Evaluator, RisMode};
use ris_coverage::geometry::{dist2d, ObstacleIndex, Point2};
use ris_coverage::propagation::{angle_from_normal, ris_ffbc_pl, RisLinkGeometry};
use ris_coverage::scenario::{AreaGrid, Building, CellPattern, CellSite, RisPanel, Scenario, ScenarioMeta};

const SEED: u64 = 20240461;
const AREA: f64 = 1600.0;
const BLOCKS: usize = 16;
const PITCH: f64 = 100.0;
const STREET: f64 = 20.0;
const PANELS: usize = 15;
const PANEL_SPACING: f64 = 120.0;
/// Candidate scoring samples every STRIDE-th grid point.
const STRIDE: usize = 4;

struct Band {
    mhz: f64,
    bandwidth: f64,
    elements: u32,
    gain: f64,
    feeder: f64,
    power: f64,
    nf: f64,
    shadow: f64,
    impl_loss: f64,
    duty: f64,
}

const BANDS: [Band; 3] = [
    Band {
        mhz: 800.0,
        bandwidth: 80.0,
        elements: 1,
        gain: 16.0,
        feeder: 2.0,
        power: 46.0,
        nf: 8.0,
        shadow: 12.8,
        impl_loss: 0.0,
        duty: 0.0,
    },
    Band {
        mhz: 2100.0,
        bandwidth: 120.0,
        elements: 1,
        gain: 18.0,
        feeder: 2.0,
        power: 49.0,
        nf: 8.0,
        shadow: 15.2,
        impl_loss: 0.0,
        duty: 0.0,
    },
    Band {
        mhz: 3500.0,
        bandwidth: 120.0,
        elements: 64,
        gain: 24.0,
        feeder: 3.0,
        power: 53.0,
        nf: 7.0,
        shadow: 10.0,
        impl_loss: 3.0,
        duty: 25.0,
    },
];

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn quad(rng: &mut ChaCha8Rng, x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
    let mut j = || round2(rng.random_range(-1.5..1.5));
    vec![
        Point2::new(x0 + j(), y0 + j()),
        Point2::new(x1 + j(), y0 + j()),
        Point2::new(x1 + j(), y1 + j()),
        Point2::new(x0 + j(), y1 + j()),
    ]
}

fn centroid(poly: &[Point2]) -> Point2 {
    let n = poly.len() as f64;
    Point2::new(
        round2(poly.iter().map(|p| p.x).sum::<f64>() / n),
        round2(poly.iter().map(|p| p.y).sum::<f64>() / n),
    )
}

fn buildings(rng: &mut ChaCha8Rng) -> Vec<Building> {
    let mut out = Vec::new();
    let half = STREET / 2.0;
    let square = BLOCKS / 2 - 1..=BLOCKS / 2;
    for bx in 0..BLOCKS {
        for by in 0..BLOCKS {
            if square.contains(&bx) && square.contains(&by) {
                continue; // market square
            }
            let (x0, y0) = (bx as f64 * PITCH + half, by as f64 * PITCH + half);
            let (x1, y1) = (x0 + PITCH - STREET, y0 + PITCH - STREET);
            let parts = rng.random_range(2..=3);
            let along_x = rng.random_bool(0.5);
            let span = (PITCH - STREET - 2.0 * (parts as f64 - 1.0)) / parts as f64;
            for k in 0..parts {
                let a = k as f64 * (span + 2.0);
                let fp = if along_x {
                    quad(rng, x0 + a, y0, x0 + a + span, y1)
                } else {
                    quad(rng, x0, y0 + a, x1, y0 + a + span)
                };
                out.push(Building {
                    id: format!("b{bx:02}-{by:02}-{k}"),
                    footprint: fp,
                    roof_height: round2(rng.random_range(18.5..36.0)),
                });
            }
        }
    }
    out.push(Building {
        id: "townhall".into(),
        footprint: vec![
            Point2::new(770.0, 780.0),
            Point2::new(830.0, 780.0),
            Point2::new(830.0, 820.0),
            Point2::new(770.0, 820.0),
        ],
        roof_height: 31.0,
    });
    out
}

fn cells(rng: &mut ChaCha8Rng, buildings: &mut [Building]) -> Vec<CellSite> {
    let targets = [
        (0.2, 0.2),
        (0.5, 0.17),
        (0.8, 0.2),
        (0.17, 0.5),
        (0.83, 0.5),
        (0.2, 0.8),
        (0.5, 0.83),
        (0.8, 0.8),
    ];
    let mut out = Vec::new();
    for (s, (tx, ty)) in targets.into_iter().enumerate() {
        let target = Point2::new(tx * AREA, ty * AREA).with_z(0.0);
        let host = buildings
            .iter_mut()
            .min_by(|a, b| {
                let da = dist2d(centroid(&a.footprint).with_z(0.0), target);
                let db = dist2d(centroid(&b.footprint).with_z(0.0), target);
                da.total_cmp(&db)
            })
            .expect("buildings exist");
        let height = round2(rng.random_range(32.0..46.0));
        host.roof_height = host.roof_height.min(round2(height - 8.0));
        let position = centroid(&host.footprint);
        for band in &BANDS {
            out.push(CellSite {
                id: format!("bs{}-{}", s + 1, band.mhz),
                position,
                antenna_height: height,
                frequency_mhz: band.mhz,
                tx_power_dbm: band.power,
                antenna_gain_dbi: band.gain,
                feeder_loss_db: band.feeder,
                noise_figure_db: band.nf,
                interference_margin_db: 2.0,
                doppler_margin_db: 3.0,
                fade_margin_db: 10.0,
                shadow_margin_db: band.shadow,
                implementation_loss_db: band.impl_loss,
                antenna_elements: band.elements,
                bandwidth_mhz: Some(band.bandwidth),
                subcarriers_used: Some(320),
                subcarriers_total: Some(512),
                sampling_factor: Some(1.536),
                reuse_factor: Some(1.0),
                coherence_time_ms: Some(50.0),
                coherence_bandwidth_mhz: Some(1.0),
                spatial_duty_cycle_pct: Some(band.duty),
            });
        }
    }
    out
}

fn panel_candidates(buildings: &[Building]) -> Vec<RisPanel> {
    let mut out = Vec::new();
    for b in buildings {
        let n = b.footprint.len();
        for i in 0..n {
            let (u, v) = (b.footprint[i], b.footprint[(i + 1) % n]);
            let normal = b.outward_normal(i);
            let mid = Point2::new((u.x + v.x) / 2.0, (u.y + v.y) / 2.0);
            out.push(RisPanel {
                id: format!("{}-e{i}", b.id),
                position: Point2::new(round2(mid.x + 0.5 * normal.x), round2(mid.y + 0.5 * normal.y)),
                default_height: round2(b.roof_height - 0.5),
                height_offset: 0.0,
                rows: 102,
                cols: 100,
                element_width: 0.01,
                element_height: 0.01,
                reflection_amplitude: 0.9,
                element_gain_dbi: None,
                facing_normal: Some(Point2::new(
                    (normal.x * 1e6).round() / 1e6,
                    (normal.y * 1e6).round() / 1e6,
                )),
                pattern: CellPattern::Cosine,
            });
        }
    }
    out
}

/// Total dB by which each candidate panel would undercut the direct-only
/// minimum, summed over a coarse sample of the grid.
fn reflection_scores(probe: &Scenario, ev: &Evaluator<'_>) -> Vec<f64> {
    let grid = probe.grid();
    let obstacles = ObstacleIndex::new(probe.buildings());
    let panels = probe.ris_panels();
    let mut score = vec![0.0; panels.len()];
    for iy in (0..grid.ny()).step_by(STRIDE) {
        for ix in (0..grid.nx()).step_by(STRIDE) {
            let p = grid.point(ix, iy);
            let Ok((direct, _)) = ev.point(p, RisMode::WithoutRis) else {
                continue;
            };
            for (j, panel) in panels.iter().enumerate() {
                if angle_from_normal(panel, p) >= FRAC_PI_2 || !obstacles.is_visible(panel.center(), p) {
                    continue;
                }
                let best = probe
                    .cells()
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| ev.feeds().get(i, j))
                    .filter_map(|(_, c)| {
                        ris_ffbc_pl(&RisLinkGeometry::from_points(
                            c.antenna_point(),
                            panel,
                            p,
                            c.frequency_ghz(),
                        ))
                        .ok()
                    })
                    .fold(f64::INFINITY, f64::min);
                score[j] += (direct - best).max(0.0);
            }
        }
    }
    score
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synthetic_oldtown.json".into());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let grid = AreaGrid {
        origin_x: 0.0,
        origin_y: 0.0,
        width: AREA,
        height: AREA,
        resolution: 8.0,
        rx_height: 1.5,
    };
    let mut blds = buildings(&mut rng);
    let cells = cells(&mut rng, &mut blds);

    let candidates = panel_candidates(&blds);
    let probe = Scenario::new(grid.clone(), blds.clone(), cells.clone(), candidates.clone())
        .expect("candidate scenario is valid");
    let ev = Evaluator::new(&probe);
    let feeds = ev.feeds();
    let mut order: Vec<usize> = (0..candidates.len())
        .filter(|&j| (0..cells.len()).any(|i| feeds.get(i, j)))
        .collect();
    order.shuffle(&mut rng);
    let score = reflection_scores(&probe, &ev);
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));

    let mut chosen: Vec<RisPanel> = Vec::new();
    for j in order {
        let c = &candidates[j];
        let spaced = chosen.iter().all(|p| dist2d(p.center(), c.center()) >= PANEL_SPACING);
        if spaced {
            chosen.push(c.clone());
        }
        if chosen.len() == PANELS {
            break;
        }
    }
    assert_eq!(chosen.len(), PANELS, "not enough fed panel positions");
    chosen.sort_by(|a, b| a.id.cmp(&b.id));
    for (k, p) in chosen.iter_mut().enumerate() {
        p.id = format!("ris{:02}", k + 1);
    }

    let meta = ScenarioMeta {
        name: Some("synthetic_oldtown".into()),
        description: Some(
            "Synthetic old-town layout: 8 sites x 3 bands, 15 RIS panels. \
             Geometry and heights are generated, not surveyed."
                .into(),
        ),
        seed: Some(SEED),
    };
    let s = Scenario::with_meta(Some(meta), grid, blds, cells, chosen).expect("scenario is valid");
    std::fs::write(&out, s.to_json_string()).expect("write scenario");
    eprintln!(
        "wrote {out}: {} buildings, {} cells, {} panels",
        s.buildings().len(),
        s.cells().len(),
        s.ris_panels().len()
    );
}
