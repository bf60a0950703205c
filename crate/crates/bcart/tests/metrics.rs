//! Evaluation metrics on a hand-computed fixture, and ARI against brute-force
//! pair counting.

mod common;

use bcart::data_model::{CovariateSpec, Dataset, PolicyRecord};
use bcart::prediction_eval::{metrics, CellEstimates, MetricKind};
use bcart::tree::{ari, PartitionLabels};
use common::{brute_force_ari, set_partitions};

/// Six records in two cells, aggregate kind (`y = S`, `d = v`):
///
/// * cell A: `ΣS = 400`, `Σv = 2.5` → empirical 160; prediction 150, variance 2500;
/// * cell B: `ΣS = 50`, `Σv = 2` → empirical 25; prediction 40, variance 900.
///
/// SE = 10² + 15² = 325, DS = 100/2500 + 225/900 = 0.29, Lift = 160/25 = 6.4.
/// Per-record predictions are `pred · v`, so the residuals are
/// −150, 25, 150, −40, 30, −20 and RSS = 48525.
pub fn fixture() -> CellEstimates {
    let raw = [(1.0, 0, 0.0, 0), (0.5, 1, 100.0, 0), (1.0, 2, 300.0, 0), (1.0, 0, 0.0, 1), (0.5, 1, 50.0, 1), (0.5, 0, 0.0, 1)];
    let records = raw.iter().map(|&(v, n, s, _)| PolicyRecord { x: vec![0.0], v, n, s }).collect();
    let ds = Dataset::new(vec![CovariateSpec::numeric("x")], records).unwrap();
    let labels = PartitionLabels::from_keys(&raw.iter().map(|r| r.3).collect::<Vec<_>>());
    let cell = [(150.0, 2500.0), (40.0, 900.0)];
    let preds = raw.iter().map(|&(v, _, _, c)| cell[c].0 * v).collect();
    CellEstimates::from_labels(MetricKind::Aggregate, &ds, &labels, preds, |i| {
        let (p, var) = cell[raw[i].3];
        (format!("cell {}", raw[i].3), p, Some(var))
    })
}

#[test]
fn hand_computed_fixture() {
    let r = metrics("fixture", &fixture()).unwrap();
    assert!((r.rss - 48525.0).abs() < 1e-12);
    assert!((r.se - 325.0).abs() < 1e-12);
    assert!((r.ds.unwrap() - 0.29).abs() < 1e-12);
    assert!((r.lift.unwrap() - 6.4).abs() < 1e-12);
    assert_eq!(r.n_cells, 2);
}

#[test]
fn missing_variance_leaves_ds_undefined() {
    let mut est = fixture();
    est.cells[1].var = None;
    assert_eq!(metrics("m", &est).unwrap().ds, None);
}

#[test]
fn ari_matches_pair_counting_exhaustively_up_to_six_points() {
    for n in 1..=6 {
        let parts = set_partitions(n);
        let labels: Vec<PartitionLabels> = parts.iter().map(|p| PartitionLabels::from_keys(p)).collect();
        for (a, la) in parts.iter().zip(&labels) {
            for (b, lb) in parts.iter().zip(&labels) {
                let (x, y) = (ari(la, lb), brute_force_ari(a, b));
                assert!((x - y).abs() < 1e-12, "{a:?} {b:?}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn partition_counts_are_bell_numbers() {
    let bell = [1, 1, 2, 5, 15, 52, 203, 877];
    for (n, &b) in bell.iter().enumerate() {
        assert_eq!(set_partitions(n).len(), b);
    }
}
