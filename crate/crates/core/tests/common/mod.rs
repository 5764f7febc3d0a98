//! Shared test support: random micro-scenarios and an exhaustive
//! per-point enumeration oracle.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_coverage::geometry::{line_of_sight, Point2, Point3};
use ris_coverage::propagation::{uma_los_pl, uma_nlos_pl, LinkGeometry};
use ris_coverage::scenario::{AreaGrid, Building, CellPattern, CellSite, RisPanel, Scenario};
use ris_coverage::{load_scenario, Mechanism};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn oldtown_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_oldtown.json")
}

pub fn oldtown() -> Scenario {
    load_scenario(oldtown_path()).expect("packaged scenario loads")
}

pub fn cell(id: &str, x: f64, y: f64, h: f64, mhz: f64) -> CellSite {
    CellSite {
        id: id.into(),
        position: Point2::new(x, y),
        antenna_height: h,
        frequency_mhz: mhz,
        tx_power_dbm: 53.0,
        antenna_gain_dbi: 24.0,
        feeder_loss_db: 3.0,
        noise_figure_db: 7.0,
        interference_margin_db: 2.0,
        doppler_margin_db: 3.0,
        fade_margin_db: 10.0,
        shadow_margin_db: 10.0,
        implementation_loss_db: 3.0,
        antenna_elements: 64,
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

pub fn panel(id: &str, x: f64, y: f64, h: f64, normal: Option<Point2>) -> RisPanel {
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
        facing_normal: normal,
        pattern: CellPattern::Cosine,
    }
}

pub fn rect(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, roof: f64) -> Building {
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

pub fn grid(nx: usize, ny: usize, res: f64) -> AreaGrid {
    AreaGrid {
        origin_x: 0.0,
        origin_y: 0.0,
        width: nx as f64 * res,
        height: ny as f64 * res,
        resolution: res,
        rx_height: 1.5,
    }
}

/// Star-shaped polygon around `c`: vertices at sorted angles, so it is
/// always simple.
fn star(rng: &mut ChaCha8Rng, c: Point2, r: f64) -> Vec<Point2> {
    let k = rng.random_range(3..=8);
    let mut angles: Vec<f64> = (0..k)
        .map(|i| (i as f64 + rng.random_range(0.1..0.9)) * 2.0 * PI / k as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|a| {
            let rr = r * rng.random_range(0.4..1.0);
            Point2::new(c.x + rr * a.cos(), c.y + rr * a.sin())
        })
        .collect()
}

/// A random scenario within the micro bounds: ≤ 5 cells, ≤ 8 buildings,
/// ≤ 4 panels, ≤ 40×40 grid.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(4..=40);
    let ny = rng.random_range(4..=40);
    let res = [2.0, 5.0, 8.0][rng.random_range(0..3)];
    let g = grid(nx, ny, res);
    let (w, h) = (g.width, g.height);

    let mut buildings = Vec::new();
    for k in 0..rng.random_range(0..=8) {
        let c = Point2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        let r = rng.random_range(0.05..0.25) * w.min(h);
        buildings.push(Building {
            id: format!("b{k}"),
            footprint: star(&mut rng, c, r.max(1.0)),
            roof_height: rng.random_range(3.0..40.0),
        });
    }

    let mut cells = Vec::new();
    for k in 0..rng.random_range(1..=5) {
        let mhz = [800.0, 2100.0, 3500.0][rng.random_range(0..3)];
        cells.push(cell(
            &format!("c{k}"),
            rng.random_range(0.0..w),
            rng.random_range(0.0..h),
            rng.random_range(10.0..50.0),
            mhz,
        ));
    }

    let mut panels = Vec::new();
    for k in 0..rng.random_range(0..=4) {
        let mut p = if !buildings.is_empty() && rng.random_bool(0.6) {
            // Mounted on a building edge, facing out.
            let b: &Building = &buildings[rng.random_range(0..buildings.len())];
            let i = rng.random_range(0..b.footprint.len());
            let (u, v) = (b.footprint[i], b.footprint[(i + 1) % b.footprint.len()]);
            let n = b.outward_normal(i);
            let x = ((u.x + v.x) / 2.0 + 0.5 * n.x).clamp(0.0, w);
            let y = ((u.y + v.y) / 2.0 + 0.5 * n.y).clamp(0.0, h);
            panel(&format!("r{k}"), x, y, (b.roof_height - 0.5).max(2.0), Some(n))
        } else {
            let a = rng.random_range(0.0..2.0 * PI);
            panel(
                &format!("r{k}"),
                rng.random_range(0.0..w),
                rng.random_range(0.0..h),
                rng.random_range(3.0..40.0),
                Some(Point2::new(a.cos(), a.sin())),
            )
        };
        p.height_offset = [0.0, 0.0, 5.0, 10.0][rng.random_range(0..4)];
        p.reflection_amplitude = rng.random_range(0.3..=1.0);
        if rng.random_bool(0.2) {
            p.pattern = CellPattern::Isotropic;
        }
        if rng.random_bool(0.2) {
            p.element_gain_dbi = Some(rng.random_range(0.0..8.0));
        }
        if rng.random_bool(0.3) {
            p.rows = rng.random_range(4..=60);
            p.cols = rng.random_range(4..=60);
        }
        panels.push(p);
    }
    Scenario::new(g, buildings, cells, panels).expect("random scenario is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub value: f64,
    pub mechanism: Mechanism,
    pub cell_id: String,
    pub ris_id: Option<String>,
}

/// Reflected path loss evaluated in the linear domain as one expression.
pub fn ffbc_linear(tx: Point3, p: &RisPanel, rx: Point3, f_ghz: f64) -> Option<f64> {
    let c = Point3 {
        x: p.position.x,
        y: p.position.y,
        z: p.default_height + p.height_offset,
    };
    let n = p.normal();
    let leg = |q: Point3| {
        let v = (q.x - c.x, q.y - c.y, q.z - c.z);
        let d = (v.0 * v.0 + v.1 * v.1 + v.2 * v.2).sqrt();
        (d, (n.x * v.0 + n.y * v.1) / d)
    };
    let (d1, cos_t) = leg(tx);
    let (d2, cos_r) = leg(rx);
    if cos_t <= 0.0 || cos_r <= 0.0 {
        return None;
    }
    let extent = (p.rows as f64 * p.element_width).max(p.cols as f64 * p.element_height);
    if d1 < 10.0 * extent || d2 < 10.0 * extent {
        return None;
    }
    let lambda = 3.0e8 / (f_ghz * 1e9);
    let g = match p.element_gain_dbi {
        Some(dbi) => 10f64.powf(dbi / 10.0),
        None => 4.0 * PI * p.element_width * p.element_height / (lambda * lambda),
    };
    let (ft, fr) = match p.pattern {
        CellPattern::Isotropic => (1.0, 1.0),
        CellPattern::Cosine => (cos_t, cos_r),
    };
    let (m, nn, a) = (p.rows as f64, p.cols as f64, p.reflection_amplitude);
    let ratio = 64.0 * PI.powi(3) * (d1 * d2).powi(2)
        / (g * m * m * nn * nn * p.element_width * p.element_height * lambda * lambda * ft * fr * a * a);
    Some(10.0 * ratio.log10())
}

/// Plain line-of-sight over only the buildings whose bounding box overlaps
/// the segment's; keeps the oracle fast on large scenes.
fn oracle_los(a: Point3, b: Point3, buildings: &[Building]) -> bool {
    !buildings.iter().any(|bl| {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &bl.footprint {
            (x0, y0, x1, y1) = (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y));
        }
        let near = a.x.min(b.x) <= x1 + 1e-6
            && a.x.max(b.x) >= x0 - 1e-6
            && a.y.min(b.y) <= y1 + 1e-6
            && a.y.max(b.y) >= y0 - 1e-6;
        near && !line_of_sight(a, b, std::slice::from_ref(bl)).is_visible()
    })
}

/// Every (cell, mechanism, panel) candidate at `p`, in no particular order.
pub fn enumerate_candidates(s: &Scenario, p: Point3, with_ris: bool) -> Vec<Candidate> {
    let mut out = Vec::new();
    for c in s.cells() {
        let a = Point3 {
            x: c.position.x,
            y: c.position.y,
            z: c.antenna_height,
        };
        let g = LinkGeometry::from_points(a, p, c.frequency_mhz / 1000.0);
        let visible = oracle_los(a, p, s.buildings());
        let (mechanism, v) = if visible {
            (Mechanism::Los, uma_los_pl(&g))
        } else {
            (Mechanism::Nlos, uma_nlos_pl(&g))
        };
        if let Ok(value) = v {
            out.push(Candidate {
                value,
                mechanism,
                cell_id: c.id.clone(),
                ris_id: None,
            });
        }
        if !with_ris {
            continue;
        }
        for r in s.ris_panels() {
            let center = Point3 {
                x: r.position.x,
                y: r.position.y,
                z: r.default_height + r.height_offset,
            };
            if !oracle_los(a, center, s.buildings()) || !oracle_los(center, p, s.buildings()) {
                continue;
            }
            if let Some(value) = ffbc_linear(a, r, p, c.frequency_mhz / 1000.0) {
                out.push(Candidate {
                    value,
                    mechanism: Mechanism::Ris,
                    cell_id: c.id.clone(),
                    ris_id: Some(r.id.clone()),
                });
            }
        }
    }
    out
}

/// The minimum candidate, plus the runner-up value (for tie awareness).
pub fn oracle_point(s: &Scenario, p: Point3, with_ris: bool) -> Option<(Candidate, f64)> {
    let mut all = enumerate_candidates(s, p, with_ris);
    all.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.mechanism.cmp(&b.mechanism))
            .then(a.cell_id.cmp(&b.cell_id))
            .then(a.ris_id.cmp(&b.ris_id))
    });
    let runner_up = all.get(1).map_or(f64::INFINITY, |c| c.value);
    all.into_iter().next().map(|c| (c, runner_up))
}

/// Compares a computed map against the oracle at every point. Returns the
/// largest absolute difference; panics on structural mismatch.
pub fn check_against_oracle(s: &Scenario, m: &ris_coverage::PathLossMap, with_ris: bool) -> f64 {
    let g = s.grid();
    let all: Vec<(usize, usize)> = (0..g.ny()).flat_map(|iy| (0..g.nx()).map(move |ix| (ix, iy))).collect();
    check_points_against_oracle(s, m, with_ris, &all)
}

/// As [`check_against_oracle`], restricted to the given grid indices.
pub fn check_points_against_oracle(
    s: &Scenario,
    m: &ris_coverage::PathLossMap,
    with_ris: bool,
    points: &[(usize, usize)],
) -> f64 {
    let g = s.grid();
    let mut worst: f64 = 0.0;
    for &(ix, iy) in points {
        let p = g.point(ix, iy);
        let got = m.get(ix, iy);
        match oracle_point(s, p, with_ris) {
            None => assert!(got.is_infinite(), "({ix},{iy}) should be uncoverable, got {got}"),
            Some((best, runner_up)) => {
                worst = worst.max((got - best.value).abs());
                if runner_up - best.value > 1e-9 {
                    let tag = m.winner(ix, iy).expect("finite point has a winner");
                    assert_eq!(tag.cell_id, best.cell_id, "({ix},{iy})");
                    assert_eq!(tag.mechanism, best.mechanism, "({ix},{iy})");
                    assert_eq!(tag.ris_id, best.ris_id, "({ix},{iy})");
                }
            }
        }
    }
    worst
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
