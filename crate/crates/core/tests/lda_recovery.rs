//! Planted-truth recovery: a synthetic corpus drawn from two disjoint topic
//! vocabularies must be recovered by Gibbs training, re-inference must agree
//! with training assignments, and detected communities must align with the
//! planted topics.

use std::collections::HashMap;
use std::sync::OnceLock;

use caselaw_core::{
    build_graph, build_vocabulary, community_topic_profile, documents_to_bows, infer_theta,
    louvain, normalize, primary_topic, synth_corpus, top_words, train_lda, BowVector, Corpus,
    DanglingPolicy, LdaConfig, LdaModel, NormalizeConfig, SynthParams, Vocabulary,
};

struct Fixture {
    corpus: Corpus,
    vocab: Vocabulary,
    bows: Vec<BowVector>,
    model: LdaModel,
    /// matched[planted topic] = model topic, from greedy overlap matching
    matched: [usize; 2],
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let params = SynthParams {
            doc_count: 500,
            k_true: 2,
            vocab_per_topic: 50,
            words_per_doc: 60,
            separation: 0.9,
            communities: 2,
            p_intra: 0.1,
            p_inter: 0.005,
            seed: 11,
        };
        let (corpus, _truth) = synth_corpus(&params).unwrap();
        let config = NormalizeConfig::empty();
        let token_lists: Vec<Vec<String>> =
            corpus.iter().map(|d| normalize(&d.text, &config)).collect();
        let vocab = build_vocabulary(&token_lists, 1, 1.0).unwrap();
        let bows = documents_to_bows(&token_lists, &vocab);
        let keys: Vec<String> = corpus.iter().map(|d| d.case_id.clone()).collect();
        let cfg = LdaConfig {
            k: 2,
            alpha: Some(0.5),
            beta: 0.01,
            iterations: 200,
            burn_in: 50,
            seed: 7,
        };
        let model = train_lda(&bows, &keys, vocab.len(), &cfg).unwrap();

        let overlap = overlap_matrix(&model, &vocab);
        let matched = if overlap[0][0] + overlap[1][1] >= overlap[0][1] + overlap[1][0] {
            [0, 1]
        } else {
            [1, 0]
        };
        Fixture {
            corpus,
            vocab,
            bows,
            model,
            matched,
        }
    })
}

/// overlap[model topic][planted topic] = how many of the model topic's ten
/// strongest words belong to that planted vocabulary. Generated topic words
/// carry the planted topic index in positions 2..4 ("ztaa…", "ztab…").
fn overlap_matrix(model: &LdaModel, vocab: &Vocabulary) -> [[usize; 2]; 2] {
    let mut overlap = [[0usize; 2]; 2];
    for k in 0..2 {
        for (id, _) in top_words(model, k, 10).unwrap() {
            let w = vocab.word(id).unwrap();
            if w.starts_with("ztaa") {
                overlap[k][0] += 1;
            } else if w.starts_with("ztab") {
                overlap[k][1] += 1;
            }
        }
    }
    overlap
}

#[test]
fn top_words_recover_the_planted_vocabularies() {
    let fx = fixture();
    let overlap = overlap_matrix(&fx.model, &fx.vocab);
    for planted in 0..2 {
        let k = fx.matched[planted];
        assert_eq!(
            overlap[k][planted], 10,
            "model topic {k} should draw its full top-10 from planted vocabulary {planted}"
        );
    }
}

#[test]
fn pure_topic_bow_infers_onto_the_matched_topic() {
    let fx = fixture();
    // 200 tokens drawn only from planted vocabulary 0
    let planted0: Vec<usize> = fx
        .vocab
        .words()
        .iter()
        .enumerate()
        .filter(|(_, w)| w.starts_with("ztaa"))
        .map(|(id, _)| id)
        .collect();
    assert_eq!(planted0.len(), 50);
    let bow: BowVector = planted0.iter().take(20).map(|&id| (id, 10)).collect();
    let theta = infer_theta(&fx.model, &bow, 100, 99).unwrap();
    let mass = theta[fx.matched[0]];
    assert!(mass > 0.9, "matched topic mass {mass} too small");
}

#[test]
fn reinference_agrees_with_training_assignments() {
    let fx = fixture();
    let mut agree = 0usize;
    for (i, bow) in fx.bows.iter().enumerate() {
        let inferred = infer_theta(&fx.model, bow, 100, 1000 + i as u64).unwrap();
        if primary_topic(&inferred) == primary_topic(&fx.model.theta[i]) {
            agree += 1;
        }
    }
    let share = agree as f64 / fx.bows.len() as f64;
    assert!(share >= 0.95, "only {agree}/{} documents agreed", fx.bows.len());
}

#[test]
fn detected_communities_are_topically_pure() {
    let fx = fixture();
    let (graph, _) = build_graph(&fx.corpus, DanglingPolicy::Drop);
    let result = louvain(&graph, 1.0, 0).unwrap();

    let primary: HashMap<String, usize> = fx
        .model
        .doc_keys
        .iter()
        .enumerate()
        .map(|(i, key)| (key.clone(), primary_topic(&fx.model.theta[i])))
        .collect();
    let profiles = community_topic_profile(&result.partition, &primary);

    // stray micro-communities (detached low-degree documents) are not
    // evidence about topic alignment, so the bar applies to real ones
    let mut checked = 0;
    for profile in &profiles {
        if profile.size < 10 {
            continue;
        }
        checked += 1;
        let (_, share) = profile.dominant().expect("community has modelled members");
        assert!(
            share >= 0.9,
            "community {} of size {} has dominant share {share}",
            profile.community,
            profile.size
        );
    }
    assert!(checked >= 2, "expected at least the two planted communities");
}
