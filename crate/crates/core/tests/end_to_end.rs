//! Public-API runs from CSV text to centers.

use munsc_core::harness::{generate_gaussian_mixture, random_permutation, MixtureSpec};
use munsc_core::io::{dataset_to_csv, parse_dataset};
use munsc_core::metric::{nearest_center, risk};
use munsc_core::oracle::exact_opt;
use munsc_core::params::ratio_ceiling;
use munsc_core::{compute_schedule, run_stream, Error, LocalSearch, PointId, Profile};

#[test]
fn csv_round_trip_then_cluster() {
    let spec = MixtureSpec { n: 500, k_true: 3, dim: 2, separation: 25.0, outlier_fraction: 0.02, seed: 8 };
    let mixture = generate_gaussian_mixture(&spec).unwrap();
    let data = parse_dataset(&dataset_to_csv(&mixture.dataset).unwrap()).unwrap();
    assert_eq!(data, mixture.dataset);

    let schedule = compute_schedule(3, 0.2, data.len(), Profile::DESK).unwrap();
    let result = run_stream(&random_permutation(data.len(), 1), &schedule, &data, &LocalSearch::new(1)).unwrap();
    assert!(!result.centers.is_empty());
    assert_eq!(result.copies.len(), schedule.num_copies());
    // Every blob mean has a selected center within a few standard deviations.
    for mean in &mixture.means {
        let closest = result
            .centers
            .ids()
            .iter()
            .map(|&c| {
                let x = data.coords(c).unwrap();
                ((x[0] - mean[0]).powi(2) + (x[1] - mean[1]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(closest < 3.0, "blob at {mean:?} has no nearby center");
    }
}

#[test]
fn matrix_input_runs_end_to_end() {
    let n = 40;
    let mut text = String::from("# matrix\n");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| ((i as f64) - (j as f64)).abs().to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let data = parse_dataset(&text).unwrap();
    assert!(data.is_matrix());
    let schedule = compute_schedule(2, 0.3, n, Profile::DESK).unwrap();
    let result = run_stream(&random_permutation(n, 2), &schedule, &data, &LocalSearch::new(0)).unwrap();
    let all = data.point_ids();
    let opt = exact_opt(&data, 2).unwrap();
    let achieved = risk(&all, &result.centers, &data).unwrap();
    assert!(achieved <= ratio_ceiling(5.0).unwrap() * opt.risk);
    for &x in &all {
        assert!(nearest_center(x, &result.centers, &data).is_ok());
    }
}

#[test]
fn stream_must_be_a_permutation() {
    let data = parse_dataset("0\n1\n2\n3\n4\n5\n").unwrap();
    let schedule = compute_schedule(2, 0.2, 6, Profile::DESK).unwrap();
    let mut stream = random_permutation(6, 0);
    stream[0] = stream[1];
    let err = run_stream(&stream, &schedule, &data, &LocalSearch::new(0)).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)));
    let err = run_stream(&[PointId(0)], &schedule, &data, &LocalSearch::new(0)).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)));
}
