//! Desk-scale test problems with analytic losses, exact gradients, and
//! seeded stochastic gradient oracles.
//!
//! Parameters are passed as `&[Matrix]` in [`Problem::layout`] order; vectors
//! are `1 × n` matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::optim::NamedParam;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),
    #[error("expected {expected} parameter tensors, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("parameter `{name}` has shape {got:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    NoisyQuadratic,
    Logistic,
    LowrankFactorization,
    Mlp2,
}

/// Gradient noise standard deviation: one value for every coordinate, or a
/// per-coordinate list tiled cyclically over the flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSigma {
    Uniform(f64),
    PerCoordinate(Vec<f64>),
}

impl NoiseSigma {
    fn at(&self, flat_index: usize) -> f64 {
        match self {
            NoiseSigma::Uniform(s) => *s,
            NoiseSigma::PerCoordinate(v) => v[flat_index % v.len()],
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            NoiseSigma::Uniform(s) => *s == 0.0,
            NoiseSigma::PerCoordinate(v) => v.iter().all(|&s| s == 0.0),
        }
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        let valid = match self {
            NoiseSigma::Uniform(s) => ok(*s),
            NoiseSigma::PerCoordinate(v) => !v.is_empty() && v.iter().all(|&s| ok(s)),
        };
        if valid {
            Ok(())
        } else {
            Err(ProblemError::InvalidSpec(
                "noise_sigma must be finite, >= 0 and non-empty".into(),
            ))
        }
    }
}

/// Construction recipe. Fields not used by `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Matrix rows for quadratics and factorization.
    pub rows: usize,
    pub cols: usize,
    /// Ratio of largest to smallest diagonal curvature (quadratics).
    pub condition: f64,
    /// Multiplier on the whole curvature diagonal (quadratics).
    pub curvature: f64,
    /// Standard deviation of the optimum's entries (quadratics); 0 puts it at the origin.
    pub target_scale: f64,
    pub rank: usize,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// Defaults to 1.0 for `noisy_quadratic`, 0 otherwise.
    pub noise_sigma: Option<NoiseSigma>,
    pub seed: u64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Quadratic,
            rows: 16,
            cols: 16,
            condition: 1.0,
            curvature: 1.0,
            target_scale: 1.0,
            rank: 4,
            samples: 128,
            features: 8,
            classes: 3,
            hidden: 8,
            outputs: 2,
            noise_sigma: None,
            seed: 0,
        }
    }
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn effective_noise(&self) -> NoiseSigma {
        self.noise_sigma.clone().unwrap_or(match self.kind {
            ProblemKind::NoisyQuadratic => NoiseSigma::Uniform(1.0),
            _ => NoiseSigma::Uniform(0.0),
        })
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |m: &str| Err(ProblemError::InvalidSpec(m.to_string()));
        self.effective_noise().validate()?;
        match self.kind {
            ProblemKind::Quadratic | ProblemKind::NoisyQuadratic => {
                if self.rows == 0 || self.cols == 0 {
                    return bad("rows and cols must be positive");
                }
                if !(self.condition.is_finite() && self.condition >= 1.0) {
                    return bad("condition must be >= 1");
                }
                if !(self.curvature.is_finite() && self.curvature > 0.0) {
                    return bad("curvature must be > 0");
                }
                if !(self.target_scale.is_finite() && self.target_scale >= 0.0) {
                    return bad("target_scale must be >= 0");
                }
            }
            ProblemKind::Logistic => {
                if self.samples == 0 || self.features == 0 || self.classes < 2 {
                    return bad("logistic needs samples > 0, features > 0, classes >= 2");
                }
            }
            ProblemKind::LowrankFactorization => {
                if self.rows == 0 || self.cols == 0 || self.rank == 0 {
                    return bad("rows, cols and rank must be positive");
                }
                if self.rank > self.rows.min(self.cols) {
                    return bad("rank exceeds min(rows, cols)");
                }
            }
            ProblemKind::Mlp2 => {
                if self.samples == 0 || self.features == 0 || self.hidden == 0 || self.outputs == 0
                {
                    return bad("mlp2 needs positive samples, features, hidden and outputs");
                }
            }
        }
        Ok(())
    }
}

/// Name, shape and partition tag of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub dims: Vec<usize>,
    pub is_embedding: bool,
}

impl ParamInfo {
    fn matrix(name: &str, m: usize, n: usize) -> Self {
        Self {
            name: name.into(),
            dims: vec![m, n],
            is_embedding: false,
        }
    }

    fn vector(name: &str, n: usize) -> Self {
        Self {
            name: name.into(),
            dims: vec![n],
            is_embedding: false,
        }
    }

    pub fn storage(&self) -> (usize, usize) {
        match self.dims[..] {
            [n] => (1, n),
            [m, n] => (m, n),
            _ => unreachable!("layouts only hold 1-D and 2-D tensors"),
        }
    }
}

#[derive(Debug, Clone)]
enum Data {
    Quadratic {
        curvature: Matrix,
        target: Matrix,
    },
    Logistic {
        x: Matrix,
        labels: Vec<usize>,
        teacher: Matrix,
    },
    LowRank {
        target: Matrix,
        u: Matrix,
        v: Matrix,
    },
    Mlp2 {
        x: Matrix,
        y: Matrix,
        teacher: Vec<Matrix>,
    },
}

/// An instantiated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    layout: Vec<ParamInfo>,
    noise: NoiseSigma,
    noise_seed: u64,
    data: Data,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> Matrix {
    Matrix::from_fn(m, n, |_, _| scale * normal(rng))
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Counter-based stream for `(seed, step, param)`: ChaCha keyed on the
/// seed and parameter name, with the step as the stream id. Any triple can be
/// generated independently, in any order, on any thread.
fn noise_stream(seed: u64, step: u64, param: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&mix(seed).to_le_bytes());
    key[8..16].copy_from_slice(&mix(seed ^ 0xA5A5_A5A5).to_le_bytes());
    key[16..24].copy_from_slice(&fnv1a(param).to_le_bytes());
    key[24..32].copy_from_slice(&mix(fnv1a(param)).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(step);
    rng
}

fn data_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed) ^ mix(salt))
}

/// Builds a problem from its spec; all data are drawn from `spec.seed`.
pub fn make_problem(spec: &ProblemSpec) -> Result<Problem, ProblemError> {
    spec.validate()?;
    let mut rng = data_rng(spec.seed, 1);
    let (layout, data) = match spec.kind {
        ProblemKind::Quadratic | ProblemKind::NoisyQuadratic => {
            let (m, n) = (spec.rows, spec.cols);
            let count = m * n;
            // log-spaced curvatures in [c, c·κ], randomly placed
            let mut diag: Vec<f64> = (0..count)
                .map(|k| {
                    let frac = if count > 1 {
                        k as f64 / (count - 1) as f64
                    } else {
                        0.0
                    };
                    spec.curvature * spec.condition.powf(frac)
                })
                .collect();
            for i in (1..count).rev() {
                let j = rng.random_range(0..=i);
                diag.swap(i, j);
            }
            let curvature = Matrix::from_vec(m, n, diag)?;
            let target = gaussian_matrix(&mut rng, m, n, spec.target_scale);
            (
                vec![ParamInfo::matrix("w", m, n)],
                Data::Quadratic { curvature, target },
            )
        }
        ProblemKind::Logistic => {
            let (d, c) = (spec.features, spec.classes);
            let teacher = gaussian_matrix(&mut rng, c, d, 1.0);
            let mut rows = Vec::with_capacity(spec.samples * d);
            let mut labels = Vec::with_capacity(spec.samples);
            // keep only points with a clear margin so the data are separable
            let margin = 0.5;
            let mut attempts = 0usize;
            while labels.len() < spec.samples {
                attempts += 1;
                if attempts > 1000 * spec.samples {
                    return Err(ProblemError::InvalidSpec(
                        "could not sample separable logistic data".into(),
                    ));
                }
                let x: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
                let mut scores: Vec<(usize, f64)> = (0..c)
                    .map(|k| (k, (0..d).map(|j| teacher[(k, j)] * x[j]).sum()))
                    .collect();
                scores.sort_by(|a, b| b.1.total_cmp(&a.1));
                if scores[0].1 - scores[1].1 >= margin {
                    rows.extend_from_slice(&x);
                    labels.push(scores[0].0);
                }
            }
            let x = Matrix::from_vec(spec.samples, d, rows)?;
            (
                vec![
                    ParamInfo::matrix("logistic.weight", c, d),
                    ParamInfo::vector("logistic.bias", c),
                ],
                Data::Logistic { x, labels, teacher },
            )
        }
        ProblemKind::LowrankFactorization => {
            let (m, n, r) = (spec.rows, spec.cols, spec.rank);
            let s = 1.0 / (r as f64).sqrt().sqrt();
            let u = gaussian_matrix(&mut rng, m, r, s);
            let v = gaussian_matrix(&mut rng, n, r, s);
            let target = u.matmul(&v.transpose())?;
            (
                vec![
                    ParamInfo::matrix("left", m, r),
                    ParamInfo::matrix("right", n, r),
                ],
                Data::LowRank { target, u, v },
            )
        }
        ProblemKind::Mlp2 => {
            let (d, h, o) = (spec.features, spec.hidden, spec.outputs);
            let teacher = vec![
                gaussian_matrix(&mut rng, h, d, 1.0 / (d as f64).sqrt()),
                gaussian_matrix(&mut rng, 1, h, 0.1),
                gaussian_matrix(&mut rng, o, h, 1.0 / (h as f64).sqrt()),
                gaussian_matrix(&mut rng, 1, o, 0.1),
            ];
            let x = gaussian_matrix(&mut rng, spec.samples, d, 1.0);
            let (_, y) = mlp_forward(&teacher, &x)?;
            (
                vec![
                    ParamInfo::matrix("fc1.weight", h, d),
                    ParamInfo::vector("fc1.bias", h),
                    ParamInfo::matrix("fc2.weight", o, h),
                    ParamInfo::vector("fc2.bias", o),
                ],
                Data::Mlp2 { x, y, teacher },
            )
        }
    };
    Ok(Problem {
        noise: spec.effective_noise(),
        noise_seed: spec.seed,
        spec: spec.clone(),
        layout,
        data,
    })
}

/// Returns `(hidden activations, outputs)` for a batch `x` (samples × features).
fn mlp_forward(p: &[Matrix], x: &Matrix) -> Result<(Matrix, Matrix), ProblemError> {
    let (w1, b1, w2, b2) = (&p[0], &p[1], &p[2], &p[3]);
    let mut hidden = x.matmul(&w1.transpose())?;
    for i in 0..hidden.rows() {
        for j in 0..hidden.cols() {
            hidden[(i, j)] = (hidden[(i, j)] + b1[(0, j)]).tanh();
        }
    }
    let mut out = hidden.matmul(&w2.transpose())?;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            out[(i, j)] += b2[(0, j)];
        }
    }
    Ok((hidden, out))
}

/// Per-sample log-softmax cross entropy and its logits gradient.
fn softmax_xent(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

impl Problem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn layout(&self) -> &[ParamInfo] {
        &self.layout
    }

    pub fn noise(&self) -> &NoiseSigma {
        &self.noise
    }

    /// Reseeds only the gradient-noise stream; the data and the loss surface
    /// are unchanged.
    pub fn set_noise_seed(&mut self, seed: u64) {
        self.noise_seed = seed;
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// Whether gradients are exact (no injected noise).
    pub fn is_deterministic(&self) -> bool {
        self.noise.is_zero()
    }

    /// The layout as [`NamedParam`]s holding `params`, ready for partitioning.
    pub fn named_params(&self, params: &[Matrix]) -> Result<Vec<NamedParam>, ProblemError> {
        self.check_params(params)?;
        Ok(self
            .layout
            .iter()
            .zip(params)
            .map(|(info, p)| NamedParam {
                name: info.name.clone(),
                dims: info.dims.clone(),
                is_embedding: info.is_embedding,
                values: p.as_slice().to_vec(),
            })
            .collect())
    }

    /// Minimum loss value when known in closed form.
    pub fn optimum_value(&self) -> Option<f64> {
        match self.data {
            Data::Logistic { .. } => None,
            _ => Some(0.0),
        }
    }

    /// A parameter set attaining [`Problem::optimum_value`], when known.
    pub fn optimum_params(&self) -> Option<Vec<Matrix>> {
        match &self.data {
            Data::Quadratic { target, .. } => Some(vec![target.clone()]),
            Data::LowRank { u, v, .. } => Some(vec![u.clone(), v.clone()]),
            Data::Mlp2 { teacher, .. } => Some(teacher.clone()),
            Data::Logistic { .. } => None,
        }
    }

    /// Parameters that separate the logistic data with margin scaled by `scale`.
    pub fn separating_params(&self, scale: f64) -> Option<Vec<Matrix>> {
        match &self.data {
            Data::Logistic { teacher, .. } => {
                Some(vec![teacher.scale(scale), Matrix::zeros(1, teacher.rows())])
            }
            _ => None,
        }
    }

    /// Starting point. Quadratics and logistic start at zero; factorization
    /// and the MLP draw small Gaussian weights from `seed`.
    pub fn initial_params(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = data_rng(seed, 2);
        self.layout
            .iter()
            .map(|info| {
                let (r, c) = info.storage();
                match (&self.data, info.dims.len()) {
                    (Data::LowRank { .. }, _) => gaussian_matrix(&mut rng, r, c, 0.1),
                    (Data::Mlp2 { .. }, 2) => {
                        gaussian_matrix(&mut rng, r, c, 1.0 / (c as f64).sqrt())
                    }
                    _ => Matrix::zeros(r, c),
                }
            })
            .collect()
    }

    fn check_params(&self, params: &[Matrix]) -> Result<(), ProblemError> {
        if params.len() != self.layout.len() {
            return Err(ProblemError::ParamCount {
                expected: self.layout.len(),
                got: params.len(),
            });
        }
        for (info, p) in self.layout.iter().zip(params) {
            if p.shape() != info.storage() {
                return Err(ProblemError::ParamShape {
                    name: info.name.clone(),
                    expected: info.storage(),
                    got: p.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn evaluate_loss(&self, params: &[Matrix]) -> Result<f64, ProblemError> {
        self.check_params(params)?;
        Ok(match &self.data {
            Data::Quadratic { curvature, target } => {
                let w = &params[0];
                w.as_slice()
                    .iter()
                    .zip(target.as_slice())
                    .zip(curvature.as_slice())
                    .map(|((&wi, &ti), &hi)| 0.5 * hi * (wi - ti) * (wi - ti))
                    .sum()
            }
            Data::Logistic { x, labels, .. } => {
                let logits = self.logistic_logits(params, x)?;
                let c = logits.cols();
                let total: f64 = labels
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| softmax_xent(&logits.as_slice()[i * c..(i + 1) * c], y).0)
                    .sum();
                total / labels.len() as f64
            }
            Data::LowRank { target, .. } => {
                let resid = params[0].matmul(&params[1].transpose())?.sub(target)?;
                0.5 * resid.frobenius_norm_sq()
            }
            Data::Mlp2 { x, y, .. } => {
                let (_, out) = mlp_forward(params, x)?;
                0.5 * out.sub(y)?.frobenius_norm_sq() / x.rows() as f64
            }
        })
    }

    fn logistic_logits(&self, params: &[Matrix], x: &Matrix) -> Result<Matrix, ProblemError> {
        let mut logits = x.matmul(&params[0].transpose())?;
        let b = &params[1];
        for i in 0..logits.rows() {
            for k in 0..logits.cols() {
                logits[(i, k)] += b[(0, k)];
            }
        }
        Ok(logits)
    }

    pub fn exact_gradient(&self, params: &[Matrix]) -> Result<Vec<Matrix>, ProblemError> {
        self.check_params(params)?;
        Ok(match &self.data {
            Data::Quadratic { curvature, target } => {
                let diff = params[0].sub(target)?;
                vec![diff.zip_map(curvature, |d, h| h * d)?]
            }
            Data::Logistic { x, labels, .. } => {
                let logits = self.logistic_logits(params, x)?;
                let (nsamp, c) = logits.shape();
                let mut dlogits = Matrix::zeros(nsamp, c);
                for (i, &y) in labels.iter().enumerate() {
                    let (_, g) = softmax_xent(&logits.as_slice()[i * c..(i + 1) * c], y);
                    for k in 0..c {
                        dlogits[(i, k)] = g[k] / nsamp as f64;
                    }
                }
                let dw = dlogits.transpose().matmul(x)?;
                let db = Matrix::from_fn(1, c, |_, k| (0..nsamp).map(|i| dlogits[(i, k)]).sum());
                vec![dw, db]
            }
            Data::LowRank { target, .. } => {
                let (l, r) = (&params[0], &params[1]);
                let resid = l.matmul(&r.transpose())?.sub(target)?;
                vec![resid.matmul(r)?, resid.transpose().matmul(l)?]
            }
            Data::Mlp2 { x, y, .. } => {
                let nsamp = x.rows() as f64;
                let (hidden, out) = mlp_forward(params, x)?;
                let dout = out.sub(y)?.scale(1.0 / nsamp);
                let dw2 = dout.transpose().matmul(&hidden)?;
                let db2 = Matrix::from_fn(1, dout.cols(), |_, k| {
                    (0..dout.rows()).map(|i| dout[(i, k)]).sum()
                });
                let dhidden = dout.matmul(&params[2])?;
                let dpre = dhidden.zip_map(&hidden, |d, h| d * (1.0 - h * h))?;
                let dw1 = dpre.transpose().matmul(x)?;
                let db1 = Matrix::from_fn(1, dpre.cols(), |_, k| {
                    (0..dpre.rows()).map(|i| dpre[(i, k)]).sum()
                });
                vec![dw1, db1, dw2, db2]
            }
        })
    }

    /// Exact gradient plus Gaussian noise drawn from the counter-based stream
    /// keyed on `(noise seed, step, parameter name)`.
    pub fn sample_gradient(
        &self,
        params: &[Matrix],
        step: u64,
    ) -> Result<Vec<Matrix>, ProblemError> {
        let mut grads = self.exact_gradient(params)?;
        if self.noise.is_zero() {
            return Ok(grads);
        }
        let mut offset = 0;
        for (info, g) in self.layout.iter().zip(grads.iter_mut()) {
            let mut rng = noise_stream(self.noise_seed, step, &info.name);
            for (k, v) in g.as_mut_slice().iter_mut().enumerate() {
                let z: f64 = normal(&mut rng);
                *v += self.noise.at(offset + k) * z;
            }
            offset += g.len();
        }
        Ok(grads)
    }
}
