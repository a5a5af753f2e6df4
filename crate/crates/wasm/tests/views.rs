use munsc_wasm::views::{bins_json, flat_points, run_view, schedule_json, schedule_view};
use munsc_wasm::Playground;
use serde_json::Value;

#[test]
fn points_are_flattened_pairs() {
    let p = Playground::generate(120, 3, 15.0, 0.05, 1).unwrap();
    let flat = flat_points(p.dataset());
    assert_eq!(flat.len(), 240);
    assert_eq!(p.labels().iter().filter(|&&l| l < 0).count(), 6);
}

#[test]
fn run_view_is_consistent() {
    let p = Playground::generate(300, 2, 20.0, 0.02, 2).unwrap();
    let view = run_view(p.dataset(), 2, 0.2, "desk", 5).unwrap();
    assert_eq!(view.selections.len(), view.centers.len());
    assert!(view.selections.windows(2).all(|w| w[0].index < w[1].index));
    assert_eq!(view.copies.len(), 3);
    assert!(view.risk.is_finite());
}

#[test]
fn bins_cover_every_point() {
    let p = Playground::generate(200, 2, 20.0, 0.0, 3).unwrap();
    let bins: Vec<Vec<usize>> = serde_json::from_str(&bins_json(p.dataset(), &[0, 1], 4).unwrap()).unwrap();
    assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), 200);
    assert!(bins_json(p.dataset(), &[999], 4).is_err());
}

#[test]
fn schedule_matches_worked_example() {
    let s = schedule_view(2, 0.1, 1200, "desk").unwrap();
    assert_eq!(s.doublings, 3);
    assert_eq!(s.copies.last().unwrap().phases, [120, 240, 1200]);
    let v: Value = serde_json::from_str(&schedule_json(2, 0.9, 1200, "paper").unwrap()).unwrap();
    assert_eq!(v["copies"].as_array().unwrap().len(), 1);
    assert!(schedule_json(2, 0.1, 1200, "nope").is_err());
}
