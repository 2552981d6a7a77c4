use std::io::Write;
use std::path::PathBuf;

use realshare::experiment::{load_csv, parse_csv, run_grid, ExperimentSpec};
use realshare::solver::Method;
use realshare::Error;

fn boston() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/boston_housing.csv")
}

#[test]
fn reference_dataset_shape() {
    let data = load_csv(&boston()).unwrap();
    assert_eq!(data.rows(), 506);
    assert_eq!(data.num_features(), 13);
    assert_eq!(data.target_name, "MEDV");
}

#[test]
fn single_row_and_empty_files() {
    let header = "a,b,c,y\n";
    let data = parse_csv(format!("{header}1,1,1,2\n").as_bytes()).unwrap();
    assert_eq!(data.features, vec![vec![1.0, 1.0, 1.0]]);
    assert_eq!(data.targets, vec![2.0]);
    assert!(matches!(parse_csv("".as_bytes()), Err(Error::Data(_) | Error::EmptyDataset)));
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "{header}1,2,x,4").unwrap();
    let err = load_csv(file.path()).unwrap_err().to_string();
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn three_party_gauss_agrees_with_plaintext() {
    let mut spec = ExperimentSpec::new(boston());
    spec.parties = 3;
    spec.threshold = 2;
    spec.lambdas = vec![100.0];
    spec.methods = vec![Method::SecureGauss, Method::InsecureGauss];
    let report = run_grid(&spec).unwrap();
    let mean = |m| report.cell(m, 100.0, 1e4).unwrap().mean_mse.unwrap();
    assert!((mean(Method::SecureGauss) - mean(Method::InsecureGauss)).abs() < 0.002);
}

#[test]
fn larger_lambda_fits_better_for_every_method() {
    let mut spec = ExperimentSpec::new(boston());
    spec.lambdas = vec![0.01, 1000.0];
    spec.repeats = 3;
    let report = run_grid(&spec).unwrap();
    for method in Method::ALL {
        let mean = |l| report.cell(method, l, 1e4).unwrap().mean_mse.unwrap();
        assert!(mean(1000.0) < mean(0.01), "{method}");
        assert!((0.12..=0.22).contains(&mean(0.01)), "{method}: {}", mean(0.01));
    }
}

#[test]
fn reports_are_reproducible_and_labelled() {
    let mut spec = ExperimentSpec::new(boston());
    spec.lambdas = vec![1.0];
    spec.repeats = 2;
    spec.seed = 17;
    let a = run_grid(&spec).unwrap();
    let b = run_grid(&spec).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
    let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
    assert!(json["sigma_convention"].as_str().unwrap().contains("variances"));
    assert!(a.to_csv().contains("variances"));
    let cell = a.cell(Method::SecureInverse, 1.0, 1e4).unwrap();
    assert_eq!(cell.openings_per_solve, Some(6090));
    assert!(cell.leakage_bound_nats.unwrap() > 0.0);
}
