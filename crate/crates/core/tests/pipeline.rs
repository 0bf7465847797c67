use mixmech::divergence::{hellinger_sq, DivergenceConfig};
use mixmech::io::{read_dataset, read_measure, write_dataset, write_measure};
use mixmech::langevin::{evolve, LangevinConfig};
use mixmech::npmle::{fit, SolverConfig};
use mixmech::{Dataset, GmmDensity, MixingMeasure};

fn truth() -> GmmDensity {
    GmmDensity::new(MixingMeasure::new(&[vec![-2.0], vec![2.0]], vec![0.5, 0.5]).unwrap())
}

#[test]
fn files_round_trip_through_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = truth().sample(400, 21).unwrap();
    let data_path = dir.path().join("data.csv");
    write_dataset(&data_path, &data).unwrap();
    let back = read_dataset(&data_path).unwrap();
    assert_eq!(back, data);

    let res = fit(&back, &SolverConfig::default()).unwrap();
    let m_path = dir.path().join("fit.json");
    write_measure(&m_path, &res.measure).unwrap();
    let m = read_measure(&m_path).unwrap();
    assert_eq!(m, res.measure);

    let h2 = hellinger_sq(&truth(), &GmmDensity::new(m), &DivergenceConfig::quadrature()).unwrap();
    assert!(h2.value < 0.05, "H2 = {}", h2.value);
}

#[test]
fn perturbed_data_refits_close_to_the_original() {
    let f = truth();
    let data = f.sample(800, 3).unwrap();
    let moved = evolve(&data, &f, &LangevinConfig::new(0.05, 4)).unwrap();
    assert_eq!(moved.len(), data.len());
    let a = fit(&data, &SolverConfig::default()).unwrap().density();
    let b = fit(&moved, &SolverConfig::default()).unwrap().density();
    let h2 = hellinger_sq(&a, &b, &DivergenceConfig::quadrature()).unwrap().value;
    assert!(h2 < 0.02, "H2 between fits = {h2}");
}

#[test]
fn malformed_dataset_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x1\n0.5\nnot-a-number\n").unwrap();
    assert!(matches!(read_dataset(&path), Err(mixmech::Error::Parse { .. })));
    let ok = Dataset::new(1, vec![0.5], 0, "t").unwrap();
    assert_eq!(ok.len(), 1);
}
