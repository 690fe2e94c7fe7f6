//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export is also a plain Rust function, so the native tests exercise the
//! same code the page calls.

use varmuon::linalg::{svd_small, NsCoefficients};
use varmuon::optim::{
    clip_global_norm, partition_params, precondition_nsr, Optimizer, OptimizerConfig, Schedule,
    Variant,
};
use varmuon::problems::{make_problem, NoiseSigma, ProblemKind, ProblemSpec};
use varmuon::verify::{conditioned_matrix, measure_polar};
use varmuon::Matrix;
use wasm_bindgen::prelude::*;

/// Scalar Newton–Schulz map applied `iters` times, sampled on a log grid of
/// normalized singular values in `[1e-4, 1]`. Returns `[x0, y0, x1, y1, ...]`.
#[wasm_bindgen]
pub fn ns_transfer(iters: usize, cubic: bool, samples: usize) -> Vec<f64> {
    let coeffs = if cubic {
        NsCoefficients::CUBIC
    } else {
        NsCoefficients::MUON_QUINTIC
    };
    let samples = samples.max(2);
    (0..samples)
        .flat_map(|i| {
            let x = 10f64.powf(-4.0 + 4.0 * i as f64 / (samples - 1) as f64);
            let y = (0..iters).fold(x, |v, _| coeffs.apply_scalar(v));
            [x, y]
        })
        .collect()
}

/// Newton–Schulz against the exact polar factor on one random matrix.
#[wasm_bindgen]
pub struct PolarSample {
    gap: f64,
    input: Vec<f64>,
    output: Vec<f64>,
}

#[wasm_bindgen]
impl PolarSample {
    /// `‖NS(A) − polar(A)‖_F / √min(m, n)`.
    #[wasm_bindgen(getter)]
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Singular values of `A / ‖A‖_F`, descending.
    #[wasm_bindgen(getter)]
    pub fn input(&self) -> Vec<f64> {
        self.input.clone()
    }

    /// Singular values of `NS(A)`, in the same order as `input`.
    #[wasm_bindgen(getter)]
    pub fn output(&self) -> Vec<f64> {
        self.output.clone()
    }
}

#[wasm_bindgen]
pub fn polar_sample(
    rows: usize,
    cols: usize,
    cond: f64,
    iters: usize,
    seed: u32,
) -> Result<PolarSample, String> {
    if !(1..=128).contains(&rows) || !(1..=128).contains(&cols) {
        return Err("rows and cols must lie in 1..=128".into());
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err("condition number must be >= 1".into());
    }
    if iters == 0 {
        return Err("iterations must be >= 1".into());
    }
    let a = conditioned_matrix(rows, cols, cond, seed as u64);
    let meas = measure_polar(&a, iters);
    let norm = a.frobenius_norm();
    let input = svd_small(&a.scale(1.0 / norm))
        .map_err(|e| e.to_string())?
        .singular_values;
    // NS acts on each singular value separately, so map them in the same order
    let coeffs = NsCoefficients::MUON_QUINTIC;
    let output = input
        .iter()
        .map(|&x| (0..iters).fold(x, |v, _| coeffs.apply_scalar(v)))
        .collect();
    Ok(PolarSample {
        gap: meas.gap,
        input,
        output,
    })
}

/// Training loss after each step (index 0 is the initial loss) of one
/// optimizer on a noisy 16×16 quadratic with a cosine schedule and global
/// clipping at 1.
#[wasm_bindgen]
pub fn loss_curve(
    variant: &str,
    gamma: f64,
    lr: f64,
    steps: u32,
    noise: f64,
    condition: f64,
    seed: u32,
) -> Result<Vec<f64>, String> {
    let variant: Variant = variant
        .parse()
        .map_err(|e: varmuon::optim::OptimError| e.to_string())?;
    let spec = ProblemSpec {
        condition,
        noise_sigma: Some(NoiseSigma::Uniform(noise)),
        seed: seed as u64,
        ..ProblemSpec::new(ProblemKind::NoisyQuadratic)
    };
    let mut problem = make_problem(&spec).map_err(|e| e.to_string())?;
    problem.set_noise_seed(seed as u64);
    let params = problem.initial_params(seed as u64);
    let cfg = OptimizerConfig::new(variant).with_lr(lr).with_gamma(gamma);
    let slots = problem
        .named_params(&params)
        .map_err(|e| e.to_string())
        .and_then(|named| partition_params(named).map_err(|e| e.to_string()))?;
    let mut opt = Optimizer::new(cfg, slots).map_err(|e| e.to_string())?;
    let schedule = Schedule::default();
    let total = steps as u64;

    let mut losses = Vec::with_capacity(steps as usize + 1);
    losses.push(problem.evaluate_loss(&params).map_err(|e| e.to_string())?);
    for t in 1..=total {
        let mut grads = problem
            .sample_gradient(&opt.weights(), t)
            .map_err(|e| e.to_string())?;
        clip_global_norm(&mut grads, 1.0);
        opt.step(&grads, schedule.lr_at(t, total, lr))
            .map_err(|e| e.to_string())?;
        let loss = problem
            .evaluate_loss(&opt.weights())
            .map_err(|e| e.to_string())?;
        if !loss.is_finite() {
            return Err(format!("loss diverged at step {t}"));
        }
        losses.push(loss);
    }
    Ok(losses)
}

/// Per-coordinate magnitude of the NSR preconditioner `m / √(m² + γσ²)` with
/// `σ = 1`, for signal-to-noise ratios on a log grid in `[lo, hi]`.
/// Returns `[r0, g0, r1, g1, ...]`. Variance scaling would give `r` and the
/// sign map 1.
#[wasm_bindgen]
pub fn nsr_gate(gamma: f64, lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>, String> {
    if !(lo > 0.0 && hi > lo) {
        return Err("need 0 < lo < hi".into());
    }
    let samples = samples.max(2);
    let ratios: Vec<f64> = (0..samples)
        .map(|i| lo * (hi / lo).powf(i as f64 / (samples - 1) as f64))
        .collect();
    let m = Matrix::from_vec(1, samples, ratios.clone()).map_err(|e| e.to_string())?;
    let var = Matrix::filled(1, samples, 1.0);
    let gate = precondition_nsr(&m, &var, gamma, 0.0).map_err(|e| e.to_string())?;
    Ok(ratios
        .iter()
        .zip(gate.as_slice())
        .flat_map(|(&r, &g)| [r, g])
        .collect())
}
