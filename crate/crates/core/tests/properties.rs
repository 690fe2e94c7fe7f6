use nalgebra::DMatrix;
use proptest::prelude::*;
use varmuon::linalg::{newton_schulz, svd_small, Matrix};
use varmuon::moments::MomentState;
use varmuon::optim::{precondition_nsr, precondition_vs};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0..10.0f64, r * c)
            .prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn variance_surrogate_stays_nonnegative(
        stream in prop::collection::vec(-1e3..1e3f64, 1..200),
        beta in 0.0..0.999f64,
    ) {
        let mut s = MomentState::zeros(1, 1);
        for g in stream {
            s.update(&Matrix::filled(1, 1, g), beta).unwrap();
            prop_assert!(s.gamma[(0, 0)] >= 0.0);
        }
    }

    #[test]
    fn nsr_keeps_sign_and_stays_below_one(
        m in prop::collection::vec(-1e3..1e3f64, 1..64),
        v in prop::collection::vec(1e-12..1e3f64, 64),
        gamma in 1e-3..1e3f64,
    ) {
        let n = m.len();
        let mt = Matrix::from_vec(1, n, m.clone()).unwrap();
        let gh = Matrix::from_vec(1, n, v[..n].to_vec()).unwrap();
        let p = precondition_nsr(&mt, &gh, gamma, 1e-8).unwrap();
        for (x, y) in m.iter().zip(p.as_slice()) {
            prop_assert!(y.abs() < 1.0);
            prop_assert_eq!(x.signum() == y.signum() || *y == 0.0, true);
            if *x != 0.0 {
                prop_assert!(*y != 0.0);
            }
        }
        let q = precondition_vs(&mt, &gh, 1e-8).unwrap();
        for (x, y) in m.iter().zip(q.as_slice()) {
            prop_assert!(*x == 0.0 || x.signum() == y.signum());
        }
    }

    #[test]
    fn newton_schulz_ignores_positive_scale(a in matrix(12, 12), log_c in -6.0..6.0f64) {
        prop_assume!(a.frobenius_norm() > 1e-6);
        let c = 10f64.powf(log_c);
        let x = newton_schulz(&a, 5).unwrap();
        let y = newton_schulz(&a.scale(c), 5).unwrap();
        let rel = x.sub(&y).unwrap().frobenius_norm() / x.frobenius_norm().max(1e-300);
        prop_assert!(rel <= 1e-10, "relative gap {rel}");
    }

    #[test]
    fn svd_reconstructs_input(a in matrix(10, 10)) {
        let s = svd_small(&a).unwrap();
        let err = s.reconstruct().sub(&a).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-11 * (1.0 + a.frobenius_norm()), "reconstruction error {err}");
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.singular_values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn singular_values_agree_with_nalgebra(a in matrix(10, 10)) {
        let ours = svd_small(&a).unwrap().singular_values;
        let na = DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
        let mut theirs: Vec<f64> = na.singular_values().iter().copied().collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        prop_assert_eq!(ours.len(), theirs.len());
        let top = theirs[0].max(1.0);
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-11 * top, "{x} vs {y}");
        }
    }
}
