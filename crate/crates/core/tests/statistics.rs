use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use varmuon::linalg::Matrix;
use varmuon::moments::MomentState;
use varmuon::problems::{make_problem, NoiseSigma, ProblemKind, ProblemSpec};

#[test]
fn moments_track_mean_and_variance_of_a_stationary_stream() {
    // N(3, 4) with beta = 0.99, averaged over independent chains
    let dist = Normal::new(3.0, 2.0).unwrap();
    let chains = 64;
    let (mut m_sum, mut g_sum) = (0.0, 0.0);
    for c in 0..chains {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + c);
        let mut s = MomentState::zeros(1, 1);
        for _ in 0..2000 {
            s.update(&Matrix::filled(1, 1, dist.sample(&mut rng)), 0.99)
                .unwrap();
        }
        let (m_hat, g_hat) = s.bias_corrected(0.99).unwrap();
        m_sum += m_hat[(0, 0)];
        g_sum += g_hat[(0, 0)];
    }
    let (m, g) = (m_sum / chains as f64, g_sum / chains as f64);
    assert!((m - 3.0).abs() <= 0.05 * 3.0, "mean estimate {m}");
    assert!((g - 4.0).abs() <= 0.15 * 4.0, "variance estimate {g}");
}

fn noisy(sigma: NoiseSigma) -> varmuon::problems::Problem {
    let mut p = make_problem(&ProblemSpec {
        rows: 10,
        cols: 10,
        condition: 4.0,
        noise_sigma: Some(sigma),
        ..ProblemSpec::new(ProblemKind::NoisyQuadratic)
    })
    .unwrap();
    p.set_noise_seed(77);
    p
}

/// Noise residuals `sample - exact` over `steps` draws, flattened.
fn residuals(p: &varmuon::problems::Problem, steps: u64) -> Vec<f64> {
    let w = p.initial_params(5);
    let exact = p.exact_gradient(&w).unwrap();
    (1..=steps)
        .flat_map(|t| {
            let s = p.sample_gradient(&w, t).unwrap();
            s.iter()
                .zip(&exact)
                .flat_map(|(a, b)| a.sub(b).unwrap().into_vec())
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn gradient_noise_is_unbiased_with_configured_variance() {
    let p = noisy(NoiseSigma::Uniform(1.5));
    let r = residuals(&p, 100);
    assert_eq!(r.len(), 10_000);
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 2.25).abs() <= 0.05 * 2.25, "variance {var}");
    let se = (var / n).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean {mean} vs 3 se {}", 3.0 * se);
}

#[test]
fn per_coordinate_noise_levels_are_respected() {
    let p = noisy(NoiseSigma::PerCoordinate(vec![0.5, 2.0]));
    let r = residuals(&p, 200);
    for (k, sigma) in [0.5f64, 2.0].into_iter().enumerate() {
        let xs: Vec<f64> = r.iter().skip(k).step_by(2).copied().collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        let want = sigma * sigma;
        assert!(
            (var - want).abs() <= 0.05 * want,
            "coordinate class {k}: {var} vs {want}"
        );
    }
}

#[test]
fn noise_is_a_pure_function_of_seed_and_step() {
    let p = noisy(NoiseSigma::Uniform(1.0));
    let w = p.initial_params(5);
    assert_eq!(
        p.sample_gradient(&w, 3).unwrap(),
        p.sample_gradient(&w, 3).unwrap()
    );
    assert_ne!(
        p.sample_gradient(&w, 3).unwrap(),
        p.sample_gradient(&w, 4).unwrap()
    );
}
