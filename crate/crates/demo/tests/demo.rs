use qds_demo::{decompose_qubit_report, dropout_curve_values, sticking_curve_values};

#[test]
fn dropout_curve_layout_and_conservation() {
    let points = 5;
    let v = dropout_curve_values(60, 0.2, 6.0, 1.0, false, 2.0, points).unwrap();
    assert_eq!(v.len(), 4 * points);
    let (times, rest) = v.split_at(points);
    let (sink, rest) = rest.split_at(points);
    let (oracle, trace) = rest.split_at(points);
    assert_eq!(times[0], 0.0);
    assert_eq!(times[points - 1], 2.0);
    assert!(sink[0].abs() < 1e-12);
    assert!(oracle[0].abs() < 1e-12);
    assert!(sink.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(trace.iter().all(|t| (t - 1.0).abs() < 1e-9));
}

#[test]
fn upwind_curve_loses_trace() {
    let v = dropout_curve_values(60, 0.2, 6.0, 1.0, true, 2.0, 3).unwrap();
    assert!(v[3 * 3 + 2] < 1.0 - 1e-4);
}

#[test]
fn sticking_curve_is_unitary_for_real_w() {
    let v = sticking_curve_values(40, 0.25, 0.5, 0.0, 5.0, 1.0, -1.0, 1.0, 3).unwrap();
    assert_eq!(v.len(), 9);
    assert!(v[3..6].iter().all(|s| s.abs() < 1e-12));
    assert!(v[6..].iter().all(|t| (t - 1.0).abs() < 1e-9));
}

#[test]
fn sticking_curve_absorbs_for_positive_imaginary_w() {
    let v = sticking_curve_values(40, 0.25, 0.0, 1.0, 3.0, 1.0, -1.0, 3.0, 3).unwrap();
    assert!(v[5] > 1e-3);
}

#[test]
fn rejects_bad_inputs() {
    assert!(dropout_curve_values(1000, 0.1, 5.0, 1.0, false, 1.0, 3).is_err());
    assert!(dropout_curve_values(50, 0.1, 5.0, 1.0, false, -1.0, 3).is_err());
    assert!(dropout_curve_values(50, 0.1, 5.0, 1.0, false, 1.0, 1).is_err());
    assert!(sticking_curve_values(40, 0.25, 0.0, -1.0, 5.0, 1.0, 0.0, 1.0, 3).is_err());
    assert!(decompose_qubit_report(1.0, -0.1, 0.0, 0.0, 0).is_err());
    assert!(decompose_qubit_report(1.0, 0.1, 0.0, 0.0, 2).is_err());
}

#[test]
fn qubit_report_counts_kraus_operators() {
    let report = decompose_qubit_report(1.0, 0.3, 0.2, 0.1, 0).unwrap();
    assert!(report.contains("3 generalized Kraus operator(s)"), "{report}");
    let pure = decompose_qubit_report(1.0, 0.0, 0.0, 0.0, 1).unwrap();
    assert!(pure.contains("0 generalized Kraus operator(s)"), "{pure}");
}
