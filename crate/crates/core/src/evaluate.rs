//! Community evaluation: label cross-tabulation, retrieval metrics,
//! partition agreement, and a synthetic corpus generator with planted
//! ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::corpus::{Corpus, CorpusError, DocType, Document, LabelSet, Language};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("partitions cover different node sets (first difference: \"{case_id}\")")]
    NodeSetMismatch { case_id: String },
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
    #[error("generated corpus failed to assemble: {0}")]
    Corpus(#[from] CorpusError),
}

/// One community's row in the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityRow {
    pub community: usize,
    pub size: usize,
    pub labelled: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub english: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominant_topic: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominant_share: Option<f64>,
}

/// Precision/recall/F1 of a candidate case set against the label set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub candidates: usize,
    pub relevant: usize,
    pub hits: usize,
    /// True when the candidate set was empty, making precision a
    /// convention (reported as 0) rather than a measurement.
    pub empty_candidates: bool,
}

/// Cross-tabulation of a partition against a label set, one row per
/// community, sorted by labelled count descending (ties by community id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub rows: Vec<CommunityRow>,
    /// Labelled cases that are not nodes of the evaluated partition.
    pub labelled_outside: usize,
    pub label_total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalMetrics>,
}

impl EvalReport {
    /// Renders the rows as an aligned text table.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let has_english = self.rows.iter().any(|r| r.english.is_some());
        let has_topics = self.rows.iter().any(|r| r.dominant_topic.is_some());

        let mut header = format!("{:>10} {:>6} {:>9}", "community", "size", "labelled");
        if has_english {
            header.push_str(&format!(" {:>8}", "english"));
        }
        if has_topics {
            header.push_str(&format!(" {:>6} {:>6}", "topic", "share"));
        }
        out.push_str(&header);
        out.push('\n');

        for row in &self.rows {
            let mut line = format!("{:>10} {:>6} {:>9}", row.community, row.size, row.labelled);
            if has_english {
                match row.english {
                    Some(e) => line.push_str(&format!(" {e:>8}")),
                    None => line.push_str(&format!(" {:>8}", "-")),
                }
            }
            if has_topics {
                match (row.dominant_topic, row.dominant_share) {
                    (Some(t), Some(s)) => line.push_str(&format!(" {t:>6} {s:>6.3}")),
                    _ => line.push_str(&format!(" {:>6} {:>6}", "-", "-")),
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&format!(
            "labelled cases outside the partition: {} (of {})\n",
            self.labelled_outside, self.label_total
        ));
        if let Some(r) = &self.retrieval {
            out.push_str(&format!(
                "retrieval: precision {:.3}, recall {:.3}, F1 {:.3} ({} candidates, {} hits)\n",
                r.precision, r.recall, r.f1, r.candidates, r.hits
            ));
        }
        out
    }

    /// Fills per-row English-member counts from corpus metadata.
    pub fn attach_languages(&mut self, partition: &Partition, corpus: &Corpus) {
        let mut english = vec![0usize; partition.community_count()];
        for doc in corpus.iter() {
            if doc.language == Language::En {
                if let Some(c) = partition.community_of_case(&doc.case_id) {
                    english[c] += 1;
                }
            }
        }
        for row in &mut self.rows {
            row.english = Some(english[row.community]);
        }
    }

    /// Fills per-row dominant topics from community topic profiles.
    pub fn attach_topics(&mut self, profiles: &[TopicProfile]) {
        let by_community: HashMap<usize, &TopicProfile> =
            profiles.iter().map(|p| (p.community, p)).collect();
        for row in &mut self.rows {
            if let Some(profile) = by_community.get(&row.community) {
                if let Some((topic, share)) = profile.dominant() {
                    row.dominant_topic = Some(topic);
                    row.dominant_share = Some(share);
                }
            }
        }
    }
}

/// Tabulates labelled members per community.
pub fn community_label_counts(partition: &Partition, labels: &LabelSet) -> EvalReport {
    let count = partition.community_count();
    let mut labelled = vec![0usize; count];
    let mut outside = 0usize;
    for id in labels.iter() {
        match partition.community_of_case(id) {
            Some(c) => labelled[c] += 1,
            None => outside += 1,
        }
    }
    let mut rows: Vec<CommunityRow> = (0..count)
        .map(|c| CommunityRow {
            community: c,
            size: partition.size(c),
            labelled: labelled[c],
            english: None,
            dominant_topic: None,
            dominant_share: None,
        })
        .collect();
    rows.sort_by(|a, b| b.labelled.cmp(&a.labelled).then(a.community.cmp(&b.community)));

    EvalReport {
        label: labels.label.clone(),
        rows,
        labelled_outside: outside,
        label_total: labels.len(),
        retrieval: None,
    }
}

/// Share of each primary topic within one community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicProfile {
    pub community: usize,
    pub size: usize,
    /// topic id → fraction of members whose primary topic it is
    pub shares: BTreeMap<usize, f64>,
    /// fraction of members with no topic vector
    pub unmodelled: f64,
}

impl TopicProfile {
    /// Most common primary topic, ties to the lower topic id. None when no
    /// member is topic-modelled.
    pub fn dominant(&self) -> Option<(usize, f64)> {
        self.shares
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("shares are finite").then(b.0.cmp(a.0)))
            .map(|(&t, &s)| (t, s))
    }
}

/// Per-community histogram of members' primary topics. Members missing
/// from `primary_topics` land in the unmodelled bucket.
pub fn community_topic_profile(
    partition: &Partition,
    primary_topics: &HashMap<String, usize>,
) -> Vec<TopicProfile> {
    let count = partition.community_count();
    let mut tallies: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); count];
    let mut unmodelled = vec![0usize; count];
    for (idx, case_id) in partition.node_ids().iter().enumerate() {
        let c = partition.community_of(idx);
        match primary_topics.get(case_id) {
            Some(&topic) => *tallies[c].entry(topic).or_insert(0) += 1,
            None => unmodelled[c] += 1,
        }
    }
    (0..count)
        .map(|c| {
            let size = partition.size(c);
            TopicProfile {
                community: c,
                size,
                shares: tallies[c]
                    .iter()
                    .map(|(&t, &n)| (t, n as f64 / size as f64))
                    .collect(),
                unmodelled: unmodelled[c] as f64 / size as f64,
            }
        })
        .collect()
}

/// Precision, recall, and F1 of `candidates` against the label set.
pub fn evaluate_retrieval(candidates: &BTreeSet<String>, labels: &LabelSet) -> RetrievalMetrics {
    let hits = candidates.iter().filter(|id| labels.contains(id)).count();
    let empty = candidates.is_empty();
    let precision = if empty {
        0.0
    } else {
        hits as f64 / candidates.len() as f64
    };
    let recall = if labels.is_empty() {
        0.0
    } else {
        hits as f64 / labels.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RetrievalMetrics {
        precision,
        recall,
        f1,
        candidates: candidates.len(),
        relevant: labels.len(),
        hits,
        empty_candidates: empty,
    }
}

/// Selects candidate cases the way an analyst would scan communities: every
/// community whose dominant-topic share for `target_topic` is at least
/// `threshold`, plus every community containing one of the `key_cases`.
/// Returns the union of their members and the chosen community ids.
pub fn select_candidates(
    partition: &Partition,
    profiles: &[TopicProfile],
    target_topic: usize,
    threshold: f64,
    key_cases: &[String],
) -> (BTreeSet<String>, Vec<usize>) {
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for profile in profiles {
        if profile
            .shares
            .get(&target_topic)
            .is_some_and(|&share| share >= threshold)
        {
            chosen.insert(profile.community);
        }
    }
    for key in key_cases {
        if let Some(c) = partition.community_of_case(key) {
            chosen.insert(c);
        }
    }
    let mut cases = BTreeSet::new();
    for &c in &chosen {
        cases.extend(partition.members(c).map(str::to_string));
    }
    (cases, chosen.into_iter().collect())
}

/// Normalized mutual information with arithmetic-mean normalization,
/// 2·I(p1;p2) / (H(p1)+H(p2)), in [0, 1]. Two zero-entropy partitions on
/// the same node set are identical and score 1.
pub fn nmi(p1: &Partition, p2: &Partition) -> Result<f64, EvalError> {
    if p1.len() != p2.len() {
        let case_id = p1
            .node_ids()
            .iter()
            .find(|id| p2.community_of_case(id).is_none())
            .cloned()
            .unwrap_or_else(|| p2.node_ids().first().cloned().unwrap_or_default());
        return Err(EvalError::NodeSetMismatch { case_id });
    }
    for id in p1.node_ids() {
        if p2.community_of_case(id).is_none() {
            return Err(EvalError::NodeSetMismatch {
                case_id: id.clone(),
            });
        }
    }

    let n = p1.len() as f64;
    if p1.is_empty() {
        return Ok(1.0);
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut left = vec![0usize; p1.community_count()];
    let mut right = vec![0usize; p2.community_count()];
    for (idx, id) in p1.node_ids().iter().enumerate() {
        let a = p1.community_of(idx);
        let b = p2.community_of_case(id).expect("node sets were checked");
        *joint.entry((a, b)).or_insert(0) += 1;
        left[a] += 1;
        right[b] += 1;
    }

    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h1 = entropy(&left);
    let h2 = entropy(&right);
    if h1 + h2 == 0.0 {
        return Ok(1.0);
    }

    let mut information = 0.0;
    for (&(a, b), &c) in &joint {
        let p_ab = c as f64 / n;
        let p_a = left[a] as f64 / n;
        let p_b = right[b] as f64 / n;
        information += p_ab * (p_ab / (p_a * p_b)).ln();
    }
    Ok((2.0 * information / (h1 + h2)).clamp(0.0, 1.0))
}

/// Generator settings for a corpus with planted topics and communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub doc_count: usize,
    /// Number of planted topics; communities map onto topics many-to-one.
    pub k_true: usize,
    pub vocab_per_topic: usize,
    pub words_per_doc: usize,
    /// Probability that a token comes from the document's topic vocabulary
    /// rather than the shared background vocabulary.
    pub separation: f64,
    pub communities: usize,
    /// Citation probability for same-community pairs.
    pub p_intra: f64,
    /// Citation probability for cross-community pairs.
    pub p_inter: f64,
    pub seed: u64,
}

/// The planted assignments behind a synthetic corpus, aligned with the
/// corpus document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub params: SynthParams,
    pub topic_of: Vec<usize>,
    pub community_of: Vec<usize>,
}

/// Spells an index with letters so generated words survive normalization
/// (digit-bearing tokens are filtered out).
fn letters(mut n: usize, width: usize) -> String {
    let mut out = vec![b'a'; width];
    for slot in out.iter_mut().rev() {
        *slot = b'a' + (n % 10) as u8;
        n /= 10;
    }
    String::from_utf8(out).expect("ascii by construction")
}

fn topic_word(topic: usize, j: usize) -> String {
    format!("zt{}{}", letters(topic, 2), letters(j, 3))
}

fn background_word(j: usize) -> String {
    format!("zbg{}", letters(j, 3))
}

/// Generates a corpus with planted topic vocabularies and community
/// structure. Documents are assigned round-robin to communities; community
/// c carries topic c mod k_true. Citations go from the later to the
/// earlier document of each drawn pair, so the corpus round-trips through
/// the standard format with no dangling references.
pub fn synth_corpus(params: &SynthParams) -> Result<(Corpus, SyntheticTruth), EvalError> {
    let check = |ok: bool, message: &str| {
        if ok {
            Ok(())
        } else {
            Err(EvalError::BadParameter(message.to_string()))
        }
    };
    check(params.doc_count >= 1, "doc_count must be at least 1")?;
    check(params.doc_count <= 99_999, "doc_count must be at most 99999")?;
    check(params.k_true >= 1, "k_true must be at least 1")?;
    check(params.k_true <= 99, "k_true must be at most 99")?;
    check(params.vocab_per_topic >= 1, "vocab_per_topic must be at least 1")?;
    check(params.vocab_per_topic <= 999, "vocab_per_topic must be at most 999")?;
    check(params.words_per_doc >= 1, "words_per_doc must be at least 1")?;
    check(params.communities >= 1, "communities must be at least 1")?;
    check(
        (0.0..=1.0).contains(&params.separation),
        "separation must lie in [0, 1]",
    )?;
    check(
        (0.0..=1.0).contains(&params.p_intra),
        "p_intra must lie in [0, 1]",
    )?;
    check(
        (0.0..=1.0).contains(&params.p_inter),
        "p_inter must lie in [0, 1]",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.doc_count;
    let community_of: Vec<usize> = (0..n).map(|d| d % params.communities).collect();
    let topic_of: Vec<usize> = community_of.iter().map(|&c| c % params.k_true).collect();
    let case_ids: Vec<String> = (0..n).map(|d| format!("syn-{d:05}")).collect();

    let mut texts = Vec::with_capacity(n);
    for d in 0..n {
        let mut words = Vec::with_capacity(params.words_per_doc);
        for _ in 0..params.words_per_doc {
            let from_topic = rng.random::<f64>() < params.separation;
            let j = rng.random_range(0..params.vocab_per_topic);
            if from_topic {
                words.push(topic_word(topic_of[d], j));
            } else {
                words.push(background_word(j));
            }
        }
        texts.push(words.join(" "));
    }

    let mut citations: Vec<Vec<String>> = vec![Vec::new(); n];
    for j in 1..n {
        for i in 0..j {
            let p = if community_of[i] == community_of[j] {
                params.p_intra
            } else {
                params.p_inter
            };
            if rng.random::<f64>() < p {
                citations[j].push(case_ids[i].clone());
            }
        }
    }

    let mut corpus = Corpus::new();
    for d in 0..n {
        corpus.push(Document {
            case_id: case_ids[d].clone(),
            title: String::new(),
            application_no: String::new(),
            doc_type: DocType::Judgment,
            language: Language::En,
            importance: None,
            date: None,
            cited_case_ids: std::mem::take(&mut citations[d]),
            text: std::mem::take(&mut texts[d]),
        })?;
    }
    Ok((
        corpus,
        SyntheticTruth {
            params: params.clone(),
            topic_of,
            community_of,
        },
    ))
}
