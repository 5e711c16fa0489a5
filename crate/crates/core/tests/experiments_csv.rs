use cxsplit::experiments::{emit_csv, read_csv, run_truncation, CSV_COLUMNS};
use cxsplit::{run_convergence, ExperimentConfig};

fn small_config(extra: &str) -> ExperimentConfig {
    let text = format!(
        "[mesh]\nx_max = 4.0\ny_max = 4.0\nelements = 4\ndegree = 3\n[run]\nn_list = [1, 2, 4]\ntiming = false\n{extra}"
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

#[test]
fn harness_csv_parses_back_losslessly() {
    let cfg = small_config("");
    let report = run_convergence(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conv.csv");
    emit_csv(&report.records, &path).unwrap();
    let header = std::fs::read_to_string(&path).unwrap();
    assert_eq!(header.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(read_csv(&path).unwrap(), report.records);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = small_config("workers = 2\n");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_convergence(&cfg).unwrap().records, &a).unwrap();
    emit_csv(&run_convergence(&cfg).unwrap().records, &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn records_are_ordered_by_n_with_consistent_steps() {
    let report = run_convergence(&small_config("workers = 3\n")).unwrap();
    let ns: Vec<usize> = report.records.iter().map(|r| r.n).collect();
    assert_eq!(ns, vec![1, 2, 4]);
    for r in &report.records {
        assert_eq!(r.dt, 1.0 / r.n as f64);
        assert!(r.err_weighted >= 0.0 && r.err_pointwise_region >= 0.0);
        assert_eq!(r.cutoff, 4.0);
    }
    assert!(report.slope.is_some());
}

#[test]
fn truncation_keeps_element_width() {
    let cfg = small_config("[truncation]\ncutoffs = [2.0, 4.0, 6.0]\nn = 2\n");
    let t = run_truncation(&cfg).unwrap();
    assert_eq!(t.element_widths, vec![1.0, 1.0, 1.0]);
    assert_eq!(t.records.iter().map(|r| r.cutoff).collect::<Vec<_>>(), vec![2.0, 4.0, 6.0]);
    assert!(t.records.iter().all(|r| r.err_weighted.is_finite()));
}
