use varmuon_demo::{loss_curve, ns_transfer, nsr_gate, polar_sample};

#[test]
fn transfer_matches_one_quintic_step() {
    let pts = ns_transfer(1, false, 5);
    assert_eq!(pts.len(), 10);
    // x = 1: 3.4445 - 4.7750 + 2.0315
    assert!((pts[8] - 1.0).abs() < 1e-15);
    assert!((pts[9] - 0.701).abs() < 1e-12);
}

#[test]
fn cubic_transfer_fixes_one() {
    let pts = ns_transfer(10, true, 101);
    let (x, y) = (pts[2 * 100], pts[2 * 100 + 1]);
    assert_eq!(x, 1.0);
    assert!((y - 1.0).abs() < 1e-12);
}

#[test]
fn polar_sample_reports_band() {
    let s = polar_sample(12, 20, 30.0, 5, 7).unwrap();
    assert_eq!(s.input().len(), 12);
    assert!(s.gap() > 0.0 && s.gap() < 0.35);
    assert!(s.output().iter().all(|&v| (0.6..=1.4).contains(&v)));
    let norm_sq: f64 = s.input().iter().map(|x| x * x).sum();
    assert!((norm_sq - 1.0).abs() < 1e-12);
    assert!(polar_sample(0, 3, 2.0, 5, 0).is_err());
    assert!(polar_sample(3, 3, 0.5, 5, 0).is_err());
}

#[test]
fn loss_curve_decreases_and_is_seeded() {
    let a = loss_curve("muon_nsr", 10.0, 0.1, 300, 0.5, 4.0, 1).unwrap();
    let b = loss_curve("muon_nsr", 10.0, 0.1, 300, 0.5, 4.0, 1).unwrap();
    assert_eq!(a.len(), 301);
    assert_eq!(a, b);
    assert!(a[300] < 0.01 * a[0]);
    assert!(loss_curve("lion", 1.0, 0.1, 10, 0.0, 1.0, 0).is_err());
    assert!(loss_curve("adamw", 1.0, -1.0, 10, 0.0, 1.0, 0).is_err());
}

#[test]
fn gate_is_half_where_signal_matches_scaled_noise() {
    // r / sqrt(r^2 + γ) = 1/√2 at r = √γ
    let pts = nsr_gate(4.0, 2.0, 8.0, 3).unwrap();
    assert_eq!(pts[0], 2.0);
    assert!((pts[1] - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(pts.chunks(2).all(|p| p[1] > 0.0 && p[1] < 1.0));
    assert!(nsr_gate(1.0, 0.0, 1.0, 5).is_err());
}
