mod common;

use common::*;
use ris_coverage::geometry::VisibilityMatrix;
use ris_coverage::metrics::{delta_h_bs_ris, delta_h_ris, MetricsError};
use ris_coverage::Scenario;

fn scene(cell_heights: &[f64], panel_heights: &[f64]) -> Scenario {
    let cells = cell_heights
        .iter()
        .enumerate()
        .map(|(k, &h)| cell(&format!("c{k}"), 10.0 + 20.0 * k as f64, 10.0, h, 3500.0))
        .collect();
    let panels = panel_heights
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            panel(
                &format!("r{k}"),
                20.0 + 20.0 * k as f64,
                80.0,
                h,
                Some(ris_coverage::Point2::new(0.0, -1.0)),
            )
        })
        .collect();
    Scenario::new(grid(20, 20, 5.0), vec![], cells, panels).unwrap()
}

#[test]
fn delta_h_ris_averages_per_panel_offsets() {
    let s = scene(&[40.0], &[20.0, 20.0, 20.0]);
    let mut text: serde_json::Value = serde_json::from_str(&s.to_json_string()).unwrap();
    for (k, d) in [2.0, 5.0, 11.0].into_iter().enumerate() {
        text["ris_panels"][k]["height_offset"] = d.into();
    }
    let s = Scenario::from_json_str(&text.to_string()).unwrap();
    assert_eq!(delta_h_ris(&s).unwrap(), 6.0);
    assert_eq!(delta_h_ris(&s.apply_ris_offset(4.0).unwrap()).unwrap(), 4.0);
}

#[test]
fn delta_h_bs_ris_worked_examples() {
    let one = scene(&[40.0], &[30.0]);
    assert_eq!(
        delta_h_bs_ris(&one, &VisibilityMatrix::from_rows(vec![vec![true]])).unwrap(),
        10.0
    );

    let two = scene(&[40.0, 40.0], &[30.0, 35.0]);
    let all = VisibilityMatrix::from_rows(vec![vec![true, true], vec![true, true]]);
    assert_eq!(delta_h_bs_ris(&two, &all).unwrap(), 7.5);
    let partial = VisibilityMatrix::from_rows(vec![vec![true, false], vec![false, false]]);
    assert_eq!(delta_h_bs_ris(&two, &partial).unwrap(), 10.0);
}

#[test]
fn degenerate_inputs_are_errors() {
    let s = scene(&[40.0], &[30.0]);
    assert!(matches!(
        delta_h_bs_ris(&s, &VisibilityMatrix::from_rows(vec![vec![false]])),
        Err(MetricsError::NoVisiblePair)
    ));
    assert!(matches!(
        delta_h_bs_ris(&s, &VisibilityMatrix::new(2, 1)),
        Err(MetricsError::Shape { .. })
    ));
    assert!(matches!(delta_h_ris(&scene(&[40.0], &[])), Err(MetricsError::NoPanels)));
}
