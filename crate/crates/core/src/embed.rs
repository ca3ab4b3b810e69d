//! Exact t-SNE projection of document-topic vectors to two dimensions.
//!
//! No tree approximation: affinities and gradients are the full O(D²)
//! computation, single-threaded, so a fixed seed gives bit-identical
//! output on any platform. Desk-scale inputs (thousands of points) take
//! seconds to minutes.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TsneError {
    #[error("got {ids} ids for {rows} input rows")]
    IdCountMismatch { ids: usize, rows: usize },
    #[error("duplicate id \"{0}\"")]
    DuplicateId(String),
    #[error("input rows have inconsistent dimensions: {first} vs {other} (row {row})")]
    RaggedInput { first: usize, other: usize, row: usize },
    #[error("input must have at least one dimension")]
    EmptyDimension,
    #[error("perplexity must be positive, got {0}")]
    BadPerplexity(f64),
    #[error("need at least 3·perplexity = {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite value in input row {row}")]
    NonFiniteInput { row: usize },
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("iteration count must be at least 1")]
    NoIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

/// 2-D coordinates per case plus the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub ids: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    /// KL divergence of the un-exaggerated P against Q, one value per
    /// iteration.
    pub kl_trace: Vec<f64>,
    pub final_kl: f64,
    pub params: TsneConfig,
}

impl Embedding2D {
    pub fn coord_of(&self, id: &str) -> Option<(f64, f64)> {
        self.ids.iter().position(|i| i == id).map(|i| self.coords[i])
    }
}

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH: usize = 250;
const EARLY_MOMENTUM: f64 = 0.5;
const LATE_MOMENTUM: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const ENTROPY_TOLERANCE: f64 = 1e-5;
const BISECTION_STEPS: usize = 64;

/// Exact t-SNE. Per-point Gaussian bandwidths are bisected until each
/// conditional distribution's entropy matches ln(perplexity) within 1e-5;
/// affinities are symmetrized to p_ij = (p_{j|i} + p_{i|j}) / 2n; descent
/// runs with early exaggeration 12 and momentum 0.5 for the first 250
/// iterations, then momentum 0.8, with per-coordinate gain adaptation and
/// recentering every iteration.
pub fn tsne(
    ids: &[String],
    rows: &[Vec<f64>],
    config: &TsneConfig,
) -> Result<Embedding2D, TsneError> {
    let n = rows.len();
    if ids.len() != n {
        return Err(TsneError::IdCountMismatch {
            ids: ids.len(),
            rows: n,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(TsneError::DuplicateId(id.clone()));
        }
    }
    if !(config.perplexity > 0.0) {
        return Err(TsneError::BadPerplexity(config.perplexity));
    }
    if !(config.learning_rate > 0.0) {
        return Err(TsneError::BadLearningRate(config.learning_rate));
    }
    if config.iterations == 0 {
        return Err(TsneError::NoIterations);
    }
    let needed = (3.0 * config.perplexity).ceil() as usize;
    if n < needed {
        return Err(TsneError::TooFewPoints { needed, got: n });
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(TsneError::EmptyDimension);
    }
    for (row_idx, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(TsneError::RaggedInput {
                first: dim,
                other: row.len(),
                row: row_idx,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(TsneError::NonFiniteInput { row: row_idx });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // duplicate rows get a vanishing jitter so their conditional
    // distributions are well defined
    let mut data: Vec<Vec<f64>> = rows.to_vec();
    {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for i in 0..n {
            let bits: Vec<u64> = data[i].iter().map(|v| v.to_bits()).collect();
            if index.insert(bits, i).is_some() {
                for v in data[i].iter_mut() {
                    *v += rng.random::<f64>() * 1e-10;
                }
            }
        }
    }

    // squared Euclidean distances
    let mut d2 = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist: f64 = data[i]
                .iter()
                .zip(&data[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[i][j] = dist;
            d2[j][i] = dist;
        }
    }

    // conditional affinities by bisection on precision beta_i
    let target_entropy = config.perplexity.ln();
    let mut p_cond = vec![vec![0f64; n]; n];
    for i in 0..n {
        let mut beta = 1.0f64;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        for _ in 0..BISECTION_STEPS {
            let (entropy, row) = conditional_row(&d2[i], i, beta);
            let diff = entropy - target_entropy;
            if diff.abs() < ENTROPY_TOLERANCE {
                p_cond[i] = row;
                break;
            }
            if diff > 0.0 {
                beta_min = beta;
                beta = if beta_max.is_finite() {
                    (beta + beta_max) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
            }
            p_cond[i] = row;
        }
    }

    // symmetrize; the full matrix sums to 1
    let mut p = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = (p_cond[i][j] + p_cond[j][i]) / (2.0 * n as f64);
        }
    }

    // seeded Gaussian init, sigma 1e-4, via Box-Muller
    let mut y: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let (a, b) = gaussian_pair(&mut rng);
            (a * 1e-4, b * 1e-4)
        })
        .collect();
    let mut velocity = vec![(0f64, 0f64); n];
    let mut gain = vec![(1f64, 1f64); n];

    let mut kl_trace = Vec::with_capacity(config.iterations);
    let mut q = vec![vec![0f64; n]; n];
    let mut grad = vec![(0f64, 0f64); n];

    for iter in 0..config.iterations {
        // Student-t kernel and its normalization
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i].0 - y[j].0;
                let dy = y[i].1 - y[j].1;
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i][j] = w;
                q[j][i] = w;
                q_sum += 2.0 * w;
            }
        }

        let exaggeration = if iter < EXAGGERATION_ITERS {
            EXAGGERATION
        } else {
            1.0
        };
        for g in grad.iter_mut() {
            *g = (0.0, 0.0);
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q_ij = (q[i][j] / q_sum).max(1e-12);
                let mult = (exaggeration * p[i][j] - q_ij) * q[i][j];
                let dx = y[i].0 - y[j].0;
                let dy = y[i].1 - y[j].1;
                grad[i].0 += 4.0 * mult * dx;
                grad[i].1 += 4.0 * mult * dy;
            }
        }

        let momentum = if iter < MOMENTUM_SWITCH {
            EARLY_MOMENTUM
        } else {
            LATE_MOMENTUM
        };
        for i in 0..n {
            gain[i].0 = update_gain(gain[i].0, grad[i].0, velocity[i].0);
            gain[i].1 = update_gain(gain[i].1, grad[i].1, velocity[i].1);
            velocity[i].0 =
                momentum * velocity[i].0 - config.learning_rate * gain[i].0 * grad[i].0;
            velocity[i].1 =
                momentum * velocity[i].1 - config.learning_rate * gain[i].1 * grad[i].1;
            y[i].0 += velocity[i].0;
            y[i].1 += velocity[i].1;
        }

        // recenter
        let mean_x: f64 = y.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mean_y: f64 = y.iter().map(|p| p.1).sum::<f64>() / n as f64;
        for p in y.iter_mut() {
            p.0 -= mean_x;
            p.1 -= mean_y;
        }

        // KL of the true (un-exaggerated) P against Q
        let mut kl = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j && p[i][j] > 0.0 {
                    let q_ij = (q[i][j] / q_sum).max(1e-12);
                    kl += p[i][j] * (p[i][j] / q_ij).ln();
                }
            }
        }
        kl_trace.push(kl);
    }

    let final_kl = *kl_trace.last().expect("at least one iteration");
    Ok(Embedding2D {
        ids: ids.to_vec(),
        coords: y,
        kl_trace,
        final_kl,
        params: config.clone(),
    })
}

/// Entropy (nats) and the normalized affinity row for one point at
/// precision `beta`.
fn conditional_row(d2_row: &[f64], i: usize, beta: f64) -> (f64, Vec<f64>) {
    let n = d2_row.len();
    let mut row = vec![0f64; n];
    // subtract the minimum distance before exponentiating; at large beta
    // exp(-beta d2) underflows to a uniformly zero row otherwise
    let min_d2 = d2_row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        if j == i {
            continue;
        }
        let w = (-beta * (d2_row[j] - min_d2)).exp();
        row[j] = w;
        sum += w;
    }
    let mut entropy = 0.0;
    for j in 0..n {
        if j == i {
            continue;
        }
        row[j] /= sum;
        if row[j] > 0.0 {
            entropy -= row[j] * row[j].ln();
        }
    }
    (entropy, row)
}

fn update_gain(gain: f64, grad: f64, velocity: f64) -> f64 {
    let next = if (grad > 0.0) != (velocity > 0.0) {
        gain + 0.2
    } else {
        gain * 0.8
    };
    next.max(MIN_GAIN)
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box-Muller; u1 is kept away from zero so ln is finite
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (r * angle.cos(), r * angle.sin())
}
