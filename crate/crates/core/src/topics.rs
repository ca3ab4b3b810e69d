//! LDA by collapsed Gibbs sampling, UMass topic coherence, and the
//! topic-count sweep.
//!
//! Sampling is organized for corpus permutation equivariance: documents
//! are visited in sorted key order and every document draws from its own
//! RNG stream seeded from its key, so reordering the input reorders theta
//! rows and changes nothing else.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::textprep::BowVector;

#[derive(Debug, thiserror::Error)]
pub enum TopicsError {
    #[error("topic count must be at least 1, got {0}")]
    BadTopicCount(usize),
    #[error("iterations ({iterations}) must exceed burn_in ({burn_in})")]
    BadIterations { iterations: usize, burn_in: usize },
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("beta must be positive, got {0}")]
    BadBeta(f64),
    #[error("corpus has no tokens; nothing to model")]
    EmptyCorpus,
    #[error("topic count {k} exceeds the total token count {tokens}")]
    TooManyTopics { k: usize, tokens: usize },
    #[error("got {bows} documents but {keys} document keys")]
    KeyCountMismatch { bows: usize, keys: usize },
    #[error("duplicate document key \"{0}\"")]
    DuplicateKey(String),
    #[error("word id {word} is outside the vocabulary (V = {vocab})")]
    WordOutOfRange { word: usize, vocab: usize },
    #[error("topic {topic} is out of range (K = {k})")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("coherence needs at least 2 top words, got {0}")]
    TopNTooSmall(usize),
    #[error("sweep range is empty: {from}..={to}")]
    EmptySweep { from: usize, to: usize },
}

/// Gibbs sampler settings. `alpha = None` selects the 50/K default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// A fitted topic model.
///
/// phi and theta are posterior means of the final count state:
/// phi[k][w] = (n_kw[k][w] + beta) / (n_k[k] + V·beta) and
/// theta[d][k] = (n_dk[d][k] + alpha) / (len_d + K·alpha).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LdaModelRepr", from = "LdaModelRepr")]
pub struct LdaModel {
    pub k: usize,
    pub v: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub doc_keys: Vec<String>,
    pub n_kw: Vec<Vec<u32>>,
    pub n_dk: Vec<Vec<u32>>,
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

/// On-disk form: counts only; phi and theta are recomputed on load.
#[derive(Clone, Serialize, Deserialize)]
struct LdaModelRepr {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    iterations: usize,
    doc_keys: Vec<String>,
    n_kw: Vec<Vec<u32>>,
    n_dk: Vec<Vec<u32>>,
}

impl From<LdaModel> for LdaModelRepr {
    fn from(m: LdaModel) -> Self {
        Self {
            k: m.k,
            v: m.v,
            alpha: m.alpha,
            beta: m.beta,
            seed: m.seed,
            iterations: m.iterations,
            doc_keys: m.doc_keys,
            n_kw: m.n_kw,
            n_dk: m.n_dk,
        }
    }
}

impl From<LdaModelRepr> for LdaModel {
    fn from(r: LdaModelRepr) -> Self {
        let phi = compute_phi(&r.n_kw, r.v, r.beta);
        let theta = compute_theta(&r.n_dk, r.k, r.alpha);
        Self {
            k: r.k,
            v: r.v,
            alpha: r.alpha,
            beta: r.beta,
            seed: r.seed,
            iterations: r.iterations,
            doc_keys: r.doc_keys,
            n_kw: r.n_kw,
            n_dk: r.n_dk,
            phi,
            theta,
        }
    }
}

fn compute_phi(n_kw: &[Vec<u32>], v: usize, beta: f64) -> Vec<Vec<f64>> {
    n_kw.iter()
        .map(|row| {
            let n_k: u64 = row.iter().map(|&c| c as u64).sum();
            let denom = n_k as f64 + v as f64 * beta;
            row.iter().map(|&c| (c as f64 + beta) / denom).collect()
        })
        .collect()
}

fn compute_theta(n_dk: &[Vec<u32>], k: usize, alpha: f64) -> Vec<Vec<f64>> {
    n_dk.iter()
        .map(|row| {
            let len: u64 = row.iter().map(|&c| c as u64).sum();
            let denom = len as f64 + k as f64 * alpha;
            row.iter().map(|&c| (c as f64 + alpha) / denom).collect()
        })
        .collect()
}

impl LdaModel {
    /// Theta row for the document with this key.
    pub fn theta_for(&self, doc_key: &str) -> Option<&[f64]> {
        self.doc_keys
            .iter()
            .position(|k| k == doc_key)
            .map(|i| self.theta[i].as_slice())
    }

    /// Map from document key to its theta row.
    pub fn theta_map(&self) -> HashMap<String, Vec<f64>> {
        self.doc_keys
            .iter()
            .cloned()
            .zip(self.theta.iter().cloned())
            .collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(s: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Samples an index proportionally to `weights` (all positive).
fn sample_discrete(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut cum = 0.0;
    for (idx, &w) in weights.iter().enumerate() {
        cum += w;
        if target < cum {
            return idx;
        }
    }
    weights.len() - 1
}

/// Trains LDA by collapsed Gibbs sampling.
///
/// `doc_keys` names each document (one per bow, unique); keys decide the
/// sweep visit order and seed the per-document RNG streams, making the
/// result independent of input document order up to theta row placement.
pub fn train_lda(
    bows: &[BowVector],
    doc_keys: &[String],
    vocab_size: usize,
    config: &LdaConfig,
) -> Result<LdaModel, TopicsError> {
    let k = config.k;
    if k < 1 {
        return Err(TopicsError::BadTopicCount(k));
    }
    if config.iterations <= config.burn_in {
        return Err(TopicsError::BadIterations {
            iterations: config.iterations,
            burn_in: config.burn_in,
        });
    }
    let alpha = config.effective_alpha();
    if !(alpha > 0.0) {
        return Err(TopicsError::BadAlpha(alpha));
    }
    if !(config.beta > 0.0) {
        return Err(TopicsError::BadBeta(config.beta));
    }
    if bows.len() != doc_keys.len() {
        return Err(TopicsError::KeyCountMismatch {
            bows: bows.len(),
            keys: doc_keys.len(),
        });
    }
    let mut seen = HashSet::new();
    for key in doc_keys {
        if !seen.insert(key) {
            return Err(TopicsError::DuplicateKey(key.clone()));
        }
    }

    // expand bows to flat token lists once
    let mut docs: Vec<Vec<usize>> = Vec::with_capacity(bows.len());
    let mut total_tokens = 0usize;
    for bow in bows {
        let mut tokens = Vec::new();
        for &(word, count) in bow {
            if word >= vocab_size {
                return Err(TopicsError::WordOutOfRange {
                    word,
                    vocab: vocab_size,
                });
            }
            for _ in 0..count {
                tokens.push(word);
            }
        }
        total_tokens += tokens.len();
        docs.push(tokens);
    }
    if total_tokens == 0 {
        return Err(TopicsError::EmptyCorpus);
    }
    if k > total_tokens {
        return Err(TopicsError::TooManyTopics {
            k,
            tokens: total_tokens,
        });
    }

    // documents are processed in key order with per-document RNG streams
    let mut visit: Vec<usize> = (0..docs.len()).collect();
    visit.sort_by(|&a, &b| doc_keys[a].cmp(&doc_keys[b]));
    let mut rngs: Vec<ChaCha8Rng> = doc_keys
        .iter()
        .map(|key| ChaCha8Rng::seed_from_u64(config.seed ^ fnv1a64(key)))
        .collect();

    let beta = config.beta;
    let v_beta = vocab_size as f64 * beta;
    let mut n_kw = vec![vec![0u32; vocab_size]; k];
    let mut n_dk = vec![vec![0u32; k]; docs.len()];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = docs.iter().map(|d| vec![0usize; d.len()]).collect();

    for &d in &visit {
        let rng = &mut rngs[d];
        for (pos, &w) in docs[d].iter().enumerate() {
            let topic = rng.random_range(0..k);
            z[d][pos] = topic;
            n_kw[topic][w] += 1;
            n_dk[d][topic] += 1;
            n_k[topic] += 1;
        }
    }

    let mut weights = vec![0f64; k];
    for _sweep in 0..config.iterations {
        for &d in &visit {
            let rng = &mut rngs[d];
            for pos in 0..docs[d].len() {
                let w = docs[d][pos];
                let old = z[d][pos];
                n_kw[old][w] -= 1;
                n_dk[d][old] -= 1;
                n_k[old] -= 1;

                for t in 0..k {
                    weights[t] = (n_dk[d][t] as f64 + alpha)
                        * (n_kw[t][w] as f64 + beta)
                        / (n_k[t] as f64 + v_beta);
                }
                let new = sample_discrete(rng, &weights);

                z[d][pos] = new;
                n_kw[new][w] += 1;
                n_dk[d][new] += 1;
                n_k[new] += 1;
            }
        }
    }

    let phi = compute_phi(&n_kw, vocab_size, beta);
    let theta = compute_theta(&n_dk, k, alpha);
    Ok(LdaModel {
        k,
        v: vocab_size,
        alpha,
        beta,
        seed: config.seed,
        iterations: config.iterations,
        doc_keys: doc_keys.to_vec(),
        n_kw,
        n_dk,
        phi,
        theta,
    })
}

/// The `n` highest-probability words of a topic, ties to the lower word id.
/// `n` larger than the vocabulary returns all words.
pub fn top_words(
    model: &LdaModel,
    topic: usize,
    n: usize,
) -> Result<Vec<(usize, f64)>, TopicsError> {
    if topic >= model.k {
        return Err(TopicsError::TopicOutOfRange { topic, k: model.k });
    }
    let mut ranked: Vec<(usize, f64)> = model.phi[topic]
        .iter()
        .enumerate()
        .map(|(w, &p)| (w, p))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("phi is finite").then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    Ok(ranked)
}

/// Per-topic UMass coherence over the model's `top_n` words:
/// Σ_{i=2..N} Σ_{j<i} log((D(w_i, w_j) + 1) / D(w_j)), with D counting
/// documents in `bows` containing the word(s). A D(w_j) of zero is clamped
/// to 1 with a warning.
pub fn umass_coherence(
    model: &LdaModel,
    bows: &[BowVector],
    top_n: usize,
) -> Result<Vec<f64>, TopicsError> {
    if top_n < 2 {
        return Err(TopicsError::TopNTooSmall(top_n));
    }

    // document sets are only needed for words that appear in a top list
    let mut needed: HashSet<usize> = HashSet::new();
    let mut tops: Vec<Vec<usize>> = Vec::with_capacity(model.k);
    for topic in 0..model.k {
        let words: Vec<usize> = top_words(model, topic, top_n)?
            .into_iter()
            .map(|(w, _)| w)
            .collect();
        needed.extend(&words);
        tops.push(words);
    }

    let mut doc_sets: HashMap<usize, HashSet<usize>> = needed
        .iter()
        .map(|&w| (w, HashSet::new()))
        .collect();
    for (doc, bow) in bows.iter().enumerate() {
        for &(word, _) in bow {
            if let Some(set) = doc_sets.get_mut(&word) {
                set.insert(doc);
            }
        }
    }

    let mut scores = Vec::with_capacity(model.k);
    for (topic, words) in tops.iter().enumerate() {
        let mut score = 0.0;
        for i in 1..words.len() {
            for j in 0..i {
                let wi = &doc_sets[&words[i]];
                let wj = &doc_sets[&words[j]];
                let co = wi.intersection(wj).count() as f64;
                let mut d_j = wj.len() as f64;
                if d_j == 0.0 {
                    log::warn!(
                        "topic {topic}: word id {} appears in no document; \
                         clamping its document count to 1",
                        words[j]
                    );
                    d_j = 1.0;
                }
                score += ((co + 1.0) / d_j).ln();
            }
        }
        scores.push(score);
    }
    Ok(scores)
}

/// One sweep row: the model size, its per-topic coherences, and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// Coherence rows for every K in the inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTable {
    pub rows: Vec<SweepPoint>,
    pub top_n: usize,
}

impl CoherenceTable {
    /// K with the highest mean coherence, ties to the smaller K.
    pub fn best_k(&self) -> Option<usize> {
        self.rows
            .iter()
            .max_by(|a, b| {
                a.mean
                    .partial_cmp(&b.mean)
                    .expect("coherence is finite")
                    .then(b.k.cmp(&a.k))
            })
            .map(|row| row.k)
    }
}

/// Trains one model per K in `k_from..=k_to` and scores each by UMass
/// coherence. Each K trains with seed `base.seed + K` so that models in a
/// sweep are independent draws; alpha follows the 50/K default unless
/// pinned in `base`.
pub fn coherence_sweep(
    bows: &[BowVector],
    doc_keys: &[String],
    vocab_size: usize,
    k_from: usize,
    k_to: usize,
    base: &LdaConfig,
    top_n: usize,
) -> Result<CoherenceTable, TopicsError> {
    if k_from > k_to {
        return Err(TopicsError::EmptySweep {
            from: k_from,
            to: k_to,
        });
    }
    let mut rows = Vec::with_capacity(k_to - k_from + 1);
    for k in k_from..=k_to {
        let config = LdaConfig {
            k,
            seed: base.seed.wrapping_add(k as u64),
            ..base.clone()
        };
        let model = train_lda(bows, doc_keys, vocab_size, &config)?;
        let per_topic = umass_coherence(&model, bows, top_n)?;
        let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
        rows.push(SweepPoint { k, per_topic, mean });
    }
    Ok(CoherenceTable { rows, top_n })
}

/// Argmax of a theta row, ties to the lowest topic id.
pub fn primary_topic(theta_row: &[f64]) -> usize {
    let mut best = 0;
    for (idx, &p) in theta_row.iter().enumerate() {
        if p > theta_row[best] {
            best = idx;
        }
    }
    best
}

/// Folds a new document into a trained model: Gibbs sampling over the
/// document's assignments with the model's word-topic counts held fixed.
/// An empty document returns the uniform prior mean with a warning.
pub fn infer_theta(
    model: &LdaModel,
    bow: &BowVector,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>, TopicsError> {
    let k = model.k;
    let mut tokens = Vec::new();
    for &(word, count) in bow {
        if word >= model.v {
            return Err(TopicsError::WordOutOfRange {
                word,
                vocab: model.v,
            });
        }
        for _ in 0..count {
            tokens.push(word);
        }
    }
    if tokens.is_empty() {
        log::warn!("inferring theta for an empty document; returning the prior mean");
        return Ok(vec![1.0 / k as f64; k]);
    }

    let n_k: Vec<f64> = model
        .n_kw
        .iter()
        .map(|row| row.iter().map(|&c| c as f64).sum())
        .collect();
    let v_beta = model.v as f64 * model.beta;
    let alpha = model.alpha;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut local_dk = vec![0u32; k];
    let mut z = vec![0usize; tokens.len()];
    for (pos, _) in tokens.iter().enumerate() {
        let topic = rng.random_range(0..k);
        z[pos] = topic;
        local_dk[topic] += 1;
    }

    let mut weights = vec![0f64; k];
    for _sweep in 0..iterations {
        for pos in 0..tokens.len() {
            let w = tokens[pos];
            let old = z[pos];
            local_dk[old] -= 1;
            for t in 0..k {
                weights[t] = (local_dk[t] as f64 + alpha)
                    * (model.n_kw[t][w] as f64 + model.beta)
                    / (n_k[t] + v_beta);
            }
            let new = sample_discrete(&mut rng, &weights);
            z[pos] = new;
            local_dk[new] += 1;
        }
    }

    let denom = tokens.len() as f64 + k as f64 * alpha;
    Ok(local_dk
        .iter()
        .map(|&c| (c as f64 + alpha) / denom)
        .collect())
}
