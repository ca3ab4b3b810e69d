//! Subcommand implementations. Each loads its inputs, runs one pipeline
//! stage, writes artifacts plus a manifest into the output directory, and
//! fails fast when an upstream artifact is missing.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use caselaw_core::{
    build_graph_with_options, build_vocabulary, coherence_sweep, community_label_counts,
    community_topic_profile, components, corpus_census, evaluate_retrieval, filter_corpus,
    import_csv, load_annotations, load_corpus, louvain, normalize, primary_topic,
    select_candidates, subgraph, top_words, train_lda, tsne, weight_edges, BowVector,
    BuildSummary, CitationGraph, CoherenceTable, Corpus, CorpusFormat, DanglingPolicy, LabelSet,
    Language, LdaConfig, LdaModel, NormalizeConfig, Partition, TsneConfig, Vocabulary,
    WeightSummary,
};

use crate::artifacts::{write_atomic, write_json, Manifest};
use crate::config::{DanglingSetting, RunConfig};

/// Bag-of-words artifact: English document ids aligned with their vectors.
#[derive(Debug, Serialize, Deserialize)]
struct BowsArtifact {
    doc_ids: Vec<String>,
    bows: Vec<BowVector>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopicReport {
    k: usize,
    words_per_topic: usize,
    topics: Vec<TopicEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopicEntry {
    topic: usize,
    words: Vec<WordWeight>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WordWeight {
    word: String,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct CoherenceArtifact {
    #[serde(flatten)]
    table: CoherenceTable,
    best_k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct GraphSummary {
    build: BuildSummary,
    node_count: usize,
    edge_count: usize,
    component_count: usize,
    singleton_count: usize,
    giant_size: usize,
    sizes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct PartitionSummary {
    mode: &'static str,
    gamma: f64,
    seed: u64,
    community_count: usize,
    modularity: f64,
    levels: usize,
    passes: usize,
    sizes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct WeightArtifact {
    #[serde(flatten)]
    summary: WeightSummary,
    edge_count: usize,
}

#[derive(Debug, Serialize)]
struct EvalArtifact {
    mode: String,
    gamma: f64,
    target_topic: Option<usize>,
    dominant_topic_threshold: f64,
    key_cases: Vec<String>,
    selected_communities: Vec<usize>,
    report: caselaw_core::EvalReport,
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.paths.out_dir.join(name)
}

fn require_artifact(path: &Path, producer: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!(
            "missing artifact {}; run `caselaw {producer}` first",
            path.display()
        );
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("cannot parse {}", path.display()))
}

fn load_corpus_checked(config: &RunConfig) -> anyhow::Result<Corpus> {
    load_corpus(&config.paths.corpus, CorpusFormat::Jsonl)
        .with_context(|| format!("loading corpus {}", config.paths.corpus.display()))
}

/// Formats a resolution value for use in artifact file names.
fn gamma_tag(gamma: f64) -> String {
    if gamma.fract() == 0.0 && gamma.abs() < 1e9 {
        format!("{}", gamma as i64)
    } else {
        format!("{gamma}").replace('.', "p")
    }
}

fn mode_name(weighted: bool) -> &'static str {
    if weighted {
        "weighted"
    } else {
        "unweighted"
    }
}

fn partition_csv_name(weighted: bool, gamma: f64) -> String {
    format!("partition_{}_g{}.csv", mode_name(weighted), gamma_tag(gamma))
}

fn partition_json_name(weighted: bool, gamma: f64) -> String {
    format!("partition_{}_g{}.json", mode_name(weighted), gamma_tag(gamma))
}

pub fn ingest(config: &RunConfig) -> anyhow::Result<()> {
    let corpus = load_corpus_checked(config)?;
    let census = corpus_census(&corpus);

    println!("corpus census ({} documents)", census.total());
    println!("  language  judgments  decisions");
    println!("  en        {:>9}  {:>9}", census.en_judgments, census.en_decisions);
    println!("  fr        {:>9}  {:>9}", census.fr_judgments, census.fr_decisions);

    let census_path = out_path(config, "census.json");
    write_json(&census_path, &census)?;

    let mut manifest = Manifest::new(
        "ingest",
        serde_json::json!({ "total_documents": census.total() }),
    );
    manifest.record_input(&config.paths.corpus)?;
    manifest.record_output(&census_path)?;
    manifest.write(&config.paths.out_dir)
}

fn normalize_config(config: &RunConfig) -> anyhow::Result<NormalizeConfig> {
    let mut nc = NormalizeConfig::with_default_english();
    for path in &config.paths.stopwords {
        nc.add_stopwords_file(path)
            .with_context(|| format!("loading stopwords {}", path.display()))?;
    }
    for path in &config.paths.gazetteers {
        nc.add_gazetteer_file(path)
            .with_context(|| format!("loading gazetteer {}", path.display()))?;
    }
    if let Some(path) = &config.paths.lemmas {
        nc.add_lemmas_file(path)
            .with_context(|| format!("loading lemma dictionary {}", path.display()))?;
    }
    nc.strip_suffixes = config.textprep.strip_suffixes;
    Ok(nc)
}

pub fn preprocess(config: &RunConfig) -> anyhow::Result<()> {
    let corpus = load_corpus_checked(config)?;
    let english = filter_corpus(&corpus, Some(Language::En), None);
    if english.len() == 0 {
        bail!("corpus contains no English documents to model");
    }
    let nc = normalize_config(config)?;
    let token_lists: Vec<Vec<String>> =
        english.iter().map(|d| normalize(&d.text, &nc)).collect();
    let vocab = build_vocabulary(
        &token_lists,
        config.textprep.min_df,
        config.textprep.max_df_ratio,
    )?;
    let doc_ids: Vec<String> = english.iter().map(|d| d.case_id.clone()).collect();
    let bows: Vec<BowVector> = token_lists
        .iter()
        .map(|tokens| caselaw_core::to_bow(tokens, &vocab))
        .collect();
    log::info!(
        "normalized {} English documents into a {}-word vocabulary",
        doc_ids.len(),
        vocab.len()
    );

    let vocab_path = out_path(config, "vocabulary.json");
    let bows_path = out_path(config, "bows.json");
    write_json(&vocab_path, &vocab)?;
    write_json(&bows_path, &BowsArtifact { doc_ids, bows })?;

    let mut manifest = Manifest::new(
        "preprocess",
        serde_json::json!({
            "min_df": config.textprep.min_df,
            "max_df_ratio": config.textprep.max_df_ratio,
            "strip_suffixes": config.textprep.strip_suffixes,
            "vocabulary_size": vocab.len(),
        }),
    );
    manifest.record_input(&config.paths.corpus)?;
    for path in &config.paths.stopwords {
        manifest.record_input(path)?;
    }
    for path in &config.paths.gazetteers {
        manifest.record_input(path)?;
    }
    if let Some(path) = &config.paths.lemmas {
        manifest.record_input(path)?;
    }
    manifest.record_output(&vocab_path)?;
    manifest.record_output(&bows_path)?;
    manifest.write(&config.paths.out_dir)
}

fn load_preprocessed(config: &RunConfig) -> anyhow::Result<(Vocabulary, BowsArtifact)> {
    let vocab_path = out_path(config, "vocabulary.json");
    let bows_path = out_path(config, "bows.json");
    require_artifact(&vocab_path, "preprocess")?;
    require_artifact(&bows_path, "preprocess")?;
    Ok((read_json(&vocab_path)?, read_json(&bows_path)?))
}

fn lda_config(config: &RunConfig) -> LdaConfig {
    LdaConfig {
        k: config.lda.k,
        alpha: config.lda.alpha,
        beta: config.lda.beta,
        iterations: config.lda.iterations,
        burn_in: config.lda.burn_in,
        seed: config.lda.seed,
    }
}

pub fn lda_train(config: &RunConfig) -> anyhow::Result<()> {
    let (vocab, bows) = load_preprocessed(config)?;
    let cfg = lda_config(config);
    let model = train_lda(&bows.bows, &bows.doc_ids, vocab.len(), &cfg)?;

    let words_per_topic = 30.min(model.v);
    let topics = (0..model.k)
        .map(|k| {
            let words = top_words(&model, k, words_per_topic)?
                .into_iter()
                .map(|(id, p)| WordWeight {
                    word: vocab.word(id).expect("id from model vocabulary").to_string(),
                    probability: p,
                })
                .collect();
            Ok(TopicEntry { topic: k, words })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    log::info!("trained K={} model over {} documents", model.k, model.doc_keys.len());

    let model_path = out_path(config, "model.json");
    let report_path = out_path(config, "topic_report.json");
    write_json(&model_path, &model)?;
    write_json(
        &report_path,
        &TopicReport {
            k: model.k,
            words_per_topic,
            topics,
        },
    )?;

    let mut manifest = Manifest::new(
        "lda-train",
        serde_json::json!({
            "k": cfg.k,
            "alpha": cfg.effective_alpha(),
            "beta": cfg.beta,
            "iterations": cfg.iterations,
            "burn_in": cfg.burn_in,
            "seed": cfg.seed,
        }),
    );
    manifest.record_input(&out_path(config, "vocabulary.json"))?;
    manifest.record_input(&out_path(config, "bows.json"))?;
    manifest.record_output(&model_path)?;
    manifest.record_output(&report_path)?;
    manifest.write(&config.paths.out_dir)
}

pub fn lda_sweep(config: &RunConfig) -> anyhow::Result<()> {
    let (from, to) = match (config.lda.sweep_from, config.lda.sweep_to) {
        (Some(from), Some(to)) => (from, to),
        _ => bail!("lda.sweep_from and lda.sweep_to must be configured for lda-sweep"),
    };
    let (vocab, bows) = load_preprocessed(config)?;
    let base = lda_config(config);
    let table = coherence_sweep(
        &bows.bows,
        &bows.doc_ids,
        vocab.len(),
        from,
        to,
        &base,
        config.lda.coherence_top_n,
    )?;
    let best_k = table.best_k();
    for row in &table.rows {
        log::info!("K={}: mean UMass coherence {:.4}", row.k, row.mean);
    }
    if let Some(k) = best_k {
        log::info!("best K by mean coherence: {k}");
    }

    let path = out_path(config, "coherence.json");
    write_json(&path, &CoherenceArtifact { table, best_k })?;

    let mut manifest = Manifest::new(
        "lda-sweep",
        serde_json::json!({
            "k_from": from,
            "k_to": to,
            "top_n": config.lda.coherence_top_n,
            "beta": config.lda.beta,
            "iterations": config.lda.iterations,
            "burn_in": config.lda.burn_in,
            "base_seed": config.lda.seed,
            "best_k": best_k,
        }),
    );
    manifest.record_input(&out_path(config, "vocabulary.json"))?;
    manifest.record_input(&out_path(config, "bows.json"))?;
    manifest.record_output(&path)?;
    manifest.write(&config.paths.out_dir)
}

fn load_model(config: &RunConfig) -> anyhow::Result<LdaModel> {
    let model_path = out_path(config, "model.json");
    require_artifact(&model_path, "lda-train")?;
    read_json(&model_path)
}

fn load_label_set(config: &RunConfig) -> anyhow::Result<Option<LabelSet>> {
    match (&config.paths.annotations, &config.evaluation.label) {
        (Some(path), Some(label)) => {
            let set = load_annotations(path, label)
                .with_context(|| format!("loading annotations {}", path.display()))?;
            Ok(Some(set))
        }
        _ => Ok(None),
    }
}

pub fn embed(config: &RunConfig) -> anyhow::Result<()> {
    let model = load_model(config)?;
    let labels = load_label_set(config)?;

    let tsne_config = TsneConfig {
        perplexity: config.tsne.perplexity,
        iterations: config.tsne.iterations,
        learning_rate: config.tsne.learning_rate,
        seed: config.tsne.seed,
    };
    let embedding = tsne(&model.doc_keys, &model.theta, &tsne_config)?;
    log::info!(
        "embedded {} documents, final KL divergence {:.4}",
        embedding.ids.len(),
        embedding.final_kl
    );

    let mut csv_bytes = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut csv_bytes);
        writer.write_record(["case_id", "x", "y", "primary_topic", "label_flags"])?;
        for (i, id) in embedding.ids.iter().enumerate() {
            let (x, y) = embedding.coords[i];
            let topic = primary_topic(&model.theta[i]);
            let flag = labels
                .as_ref()
                .map(|set| if set.contains(id) { "1" } else { "0" })
                .unwrap_or("0");
            writer.write_record([
                id.as_str(),
                &format!("{x}"),
                &format!("{y}"),
                &format!("{topic}"),
                flag,
            ])?;
        }
        writer.flush()?;
    }
    let csv_path = out_path(config, "embedding.csv");
    write_atomic(&csv_path, &csv_bytes)?;

    let mut manifest = Manifest::new(
        "embed",
        serde_json::json!({
            "perplexity": tsne_config.perplexity,
            "iterations": tsne_config.iterations,
            "learning_rate": tsne_config.learning_rate,
            "seed": tsne_config.seed,
            "final_kl": embedding.final_kl,
        }),
    );
    manifest.record_input(&out_path(config, "model.json"))?;
    if let (Some(path), Some(_)) = (&config.paths.annotations, &config.evaluation.label) {
        manifest.record_input(path)?;
    }
    manifest.record_output(&csv_path)?;
    manifest.write(&config.paths.out_dir)
}

/// Writes a graph's node and edge CSVs atomically.
fn export_graph(graph: &CitationGraph, nodes_path: &Path, edges_path: &Path) -> anyhow::Result<()> {
    let tmp_nodes = nodes_path.with_extension("csv.tmp");
    let tmp_edges = edges_path.with_extension("csv.tmp");
    caselaw_core::export_csv(graph, &tmp_edges, &tmp_nodes)?;
    std::fs::rename(&tmp_nodes, nodes_path)
        .with_context(|| format!("cannot move {} into place", tmp_nodes.display()))?;
    std::fs::rename(&tmp_edges, edges_path)
        .with_context(|| format!("cannot move {} into place", tmp_edges.display()))?;
    Ok(())
}

pub fn graph_build(config: &RunConfig) -> anyhow::Result<()> {
    let corpus = load_corpus_checked(config)?;
    let policy = match config.graph.dangling {
        DanglingSetting::Drop => DanglingPolicy::Drop,
        DanglingSetting::Stub => DanglingPolicy::Stub,
    };
    let (graph, build) =
        build_graph_with_options(&corpus, policy, config.graph.accumulate_multiplicity);
    let census = components(&graph);
    let giant_id = census
        .giant()
        .ok_or_else(|| anyhow::anyhow!("citation graph is empty"))?;
    let giant = subgraph(&graph, &census, giant_id)?;
    log::info!(
        "{} nodes, {} components, giant holds {} nodes",
        graph.node_count(),
        census.count(),
        giant.node_count()
    );

    let nodes_path = out_path(config, "graph_nodes.csv");
    let edges_path = out_path(config, "graph_edges.csv");
    let giant_nodes_path = out_path(config, "giant_nodes.csv");
    let giant_edges_path = out_path(config, "giant_edges.csv");
    std::fs::create_dir_all(&config.paths.out_dir)?;
    export_graph(&graph, &nodes_path, &edges_path)?;
    export_graph(&giant, &giant_nodes_path, &giant_edges_path)?;

    let summary = GraphSummary {
        build,
        node_count: graph.node_count(),
        edge_count: graph.edges().count(),
        component_count: census.count(),
        singleton_count: census.singleton_count(),
        giant_size: giant.node_count(),
        sizes: census.sizes().to_vec(),
    };
    let summary_path = out_path(config, "graph_summary.json");
    write_json(&summary_path, &summary)?;

    let mut manifest = Manifest::new(
        "graph-build",
        serde_json::json!({
            "dangling": config.graph.dangling.to_string(),
            "accumulate_multiplicity": config.graph.accumulate_multiplicity,
        }),
    );
    manifest.record_input(&config.paths.corpus)?;
    for path in [&nodes_path, &edges_path, &giant_nodes_path, &giant_edges_path, &summary_path] {
        manifest.record_output(path)?;
    }
    manifest.write(&config.paths.out_dir)
}

fn load_giant(config: &RunConfig, weighted: bool) -> anyhow::Result<CitationGraph> {
    let (nodes, edges, producer) = if weighted {
        ("weighted_nodes.csv", "weighted_edges.csv", "weight")
    } else {
        ("giant_nodes.csv", "giant_edges.csv", "graph-build")
    };
    let nodes_path = out_path(config, nodes);
    let edges_path = out_path(config, edges);
    require_artifact(&nodes_path, producer)?;
    require_artifact(&edges_path, producer)?;
    Ok(import_csv(&edges_path, &nodes_path)?)
}

pub fn weight(config: &RunConfig) -> anyhow::Result<()> {
    let giant = load_giant(config, false)?;
    let model = load_model(config)?;
    let thetas: HashMap<String, Vec<f64>> = model.theta_map();
    let (weighted, summary) = weight_edges(&giant, &thetas)?;
    log::info!(
        "weighted {} edges by cosine, {} by the median fallback {:.4}",
        summary.cosine_edges,
        summary.fallback_edges,
        summary.median
    );

    let nodes_path = out_path(config, "weighted_nodes.csv");
    let edges_path = out_path(config, "weighted_edges.csv");
    export_graph(&weighted, &nodes_path, &edges_path)?;
    let summary_path = out_path(config, "weight_summary.json");
    write_json(
        &summary_path,
        &WeightArtifact {
            summary,
            edge_count: weighted.edges().count(),
        },
    )?;

    let mut manifest = Manifest::new("weight", serde_json::json!({}));
    manifest.record_input(&out_path(config, "giant_nodes.csv"))?;
    manifest.record_input(&out_path(config, "giant_edges.csv"))?;
    manifest.record_input(&out_path(config, "model.json"))?;
    manifest.record_output(&nodes_path)?;
    manifest.record_output(&edges_path)?;
    manifest.record_output(&summary_path)?;
    manifest.write(&config.paths.out_dir)
}

pub fn communities(config: &RunConfig, weighted: bool) -> anyhow::Result<()> {
    let graph = load_giant(config, weighted)?;
    let seed = config.louvain.seed;
    let mut manifest = Manifest::new(
        if weighted {
            "communities-weighted"
        } else {
            "communities"
        },
        serde_json::json!({
            "gammas": config.louvain.gammas,
            "seed": seed,
            "weighted": weighted,
        }),
    );
    if weighted {
        manifest.record_input(&out_path(config, "weighted_nodes.csv"))?;
        manifest.record_input(&out_path(config, "weighted_edges.csv"))?;
    } else {
        manifest.record_input(&out_path(config, "giant_nodes.csv"))?;
        manifest.record_input(&out_path(config, "giant_edges.csv"))?;
    }

    for &gamma in &config.louvain.gammas {
        let result = louvain(&graph, gamma, seed)?;
        log::info!(
            "{} gamma={gamma}: {} communities, Q={:.4}",
            mode_name(weighted),
            result.partition.community_count(),
            result.modularity
        );

        let mut rows: Vec<(String, usize)> = result
            .partition
            .node_ids()
            .iter()
            .enumerate()
            .map(|(idx, id)| (id.clone(), result.partition.community_of(idx)))
            .collect();
        rows.sort();
        let mut csv_bytes = Vec::new();
        {
            let mut writer = csv::Writer::from_writer(&mut csv_bytes);
            writer.write_record(["case_id", "community_id"])?;
            for (id, community) in &rows {
                writer.write_record([id.as_str(), &community.to_string()])?;
            }
            writer.flush()?;
        }
        let csv_path = out_path(config, &partition_csv_name(weighted, gamma));
        write_atomic(&csv_path, &csv_bytes)?;

        let summary = PartitionSummary {
            mode: mode_name(weighted),
            gamma,
            seed,
            community_count: result.partition.community_count(),
            modularity: result.modularity,
            levels: result.levels,
            passes: result.passes,
            sizes: result.partition.sizes().to_vec(),
        };
        let json_path = out_path(config, &partition_json_name(weighted, gamma));
        write_json(&json_path, &summary)?;
        manifest.record_output(&csv_path)?;
        manifest.record_output(&json_path)?;
    }
    manifest.write(&config.paths.out_dir)
}

/// Reads a partition CSV back onto the graph it was computed from.
fn load_partition(graph: &CitationGraph, path: &Path) -> anyhow::Result<Partition> {
    let mut by_case: HashMap<String, usize> = HashMap::new();
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    for record in reader.deserialize() {
        let (case_id, community): (String, usize) = record?;
        by_case.insert(case_id, community);
    }
    let raw: Vec<usize> = graph
        .nodes()
        .iter()
        .map(|node| {
            by_case.get(&node.case_id).copied().ok_or_else(|| {
                anyhow::anyhow!(
                    "{} does not cover node {}; partition and graph artifacts disagree",
                    path.display(),
                    node.case_id
                )
            })
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(Partition::new(graph, &raw)?)
}

/// The retrieval target topic: configured explicitly, or the modal primary
/// topic among labelled modelled documents.
fn derive_target_topic(
    config: &RunConfig,
    labels: &LabelSet,
    primary: &HashMap<String, usize>,
) -> Option<usize> {
    if let Some(t) = config.evaluation.target_topic {
        return Some(t);
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for id in labels.iter() {
        if let Some(&topic) = primary.get(id) {
            *counts.entry(topic).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(topic, _)| topic)
}

pub fn evaluate(config: &RunConfig) -> anyhow::Result<()> {
    let labels = load_label_set(config)?.ok_or_else(|| {
        anyhow::anyhow!("evaluate needs paths.annotations and evaluation.label configured")
    })?;
    let corpus = load_corpus_checked(config)?;
    let model = load_model(config)?;
    let primary: HashMap<String, usize> = model
        .doc_keys
        .iter()
        .enumerate()
        .map(|(i, key)| (key.clone(), primary_topic(&model.theta[i])))
        .collect();
    let target_topic = derive_target_topic(config, &labels, &primary);
    if target_topic.is_none() {
        log::warn!("no labelled document carries a topic vector; skipping retrieval metrics");
    }

    let mut manifest = Manifest::new(
        "evaluate",
        serde_json::json!({
            "label": labels.label,
            "dominant_topic_threshold": config.evaluation.dominant_topic_threshold,
            "key_cases": config.evaluation.key_cases,
            "target_topic": target_topic,
        }),
    );
    manifest.record_input(&config.paths.corpus)?;
    if let Some(path) = &config.paths.annotations {
        manifest.record_input(path)?;
    }
    manifest.record_input(&out_path(config, "model.json"))?;

    let mut evaluated = 0usize;
    for weighted in [false, true] {
        let graph = match load_giant(config, weighted) {
            Ok(g) => g,
            Err(_) => continue,
        };
        for &gamma in &config.louvain.gammas {
            let csv_path = out_path(config, &partition_csv_name(weighted, gamma));
            if !csv_path.is_file() {
                continue;
            }
            let partition = load_partition(&graph, &csv_path)?;
            let profiles = community_topic_profile(&partition, &primary);
            let mut report = community_label_counts(&partition, &labels);
            report.attach_languages(&partition, &corpus);
            report.attach_topics(&profiles);

            let mut selected_communities = Vec::new();
            if let Some(target) = target_topic {
                let (cases, communities) = select_candidates(
                    &partition,
                    &profiles,
                    target,
                    config.evaluation.dominant_topic_threshold,
                    &config.evaluation.key_cases,
                );
                report.retrieval = Some(evaluate_retrieval(&cases, &labels));
                selected_communities = communities;
            }

            let artifact = EvalArtifact {
                mode: mode_name(weighted).to_string(),
                gamma,
                target_topic,
                dominant_topic_threshold: config.evaluation.dominant_topic_threshold,
                key_cases: config.evaluation.key_cases.clone(),
                selected_communities,
                report,
            };
            let tag = gamma_tag(gamma);
            let json_path =
                out_path(config, &format!("eval_{}_g{tag}.json", mode_name(weighted)));
            write_json(&json_path, &artifact)?;
            let text = format!(
                "partition: {} gamma={gamma}\n{}",
                mode_name(weighted),
                artifact.report.to_text_table()
            );
            let text_path =
                out_path(config, &format!("eval_{}_g{tag}.txt", mode_name(weighted)));
            write_atomic(&text_path, text.as_bytes())?;
            manifest.record_input(&csv_path)?;
            manifest.record_output(&json_path)?;
            manifest.record_output(&text_path)?;
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        bail!("no partition artifacts found; run `caselaw communities` first");
    }
    manifest.write(&config.paths.out_dir)
}

pub fn report(config: &RunConfig) -> anyhow::Result<()> {
    let census_path = out_path(config, "census.json");
    let topics_path = out_path(config, "topic_report.json");
    let graph_path = out_path(config, "graph_summary.json");
    require_artifact(&census_path, "ingest")?;
    require_artifact(&topics_path, "lda-train")?;
    require_artifact(&graph_path, "graph-build")?;

    let census: serde_json::Value = read_json(&census_path)?;
    let topics: serde_json::Value = read_json(&topics_path)?;
    let graph: serde_json::Value = read_json(&graph_path)?;
    let mut manifest = Manifest::new("report", serde_json::json!({}));
    manifest.record_input(&census_path)?;
    manifest.record_input(&topics_path)?;
    manifest.record_input(&graph_path)?;

    let coherence_path = out_path(config, "coherence.json");
    let coherence: serde_json::Value = if coherence_path.is_file() {
        manifest.record_input(&coherence_path)?;
        read_json(&coherence_path)?
    } else {
        serde_json::Value::Null
    };
    let weight_path = out_path(config, "weight_summary.json");
    let weighting: serde_json::Value = if weight_path.is_file() {
        manifest.record_input(&weight_path)?;
        read_json(&weight_path)?
    } else {
        serde_json::Value::Null
    };

    let mut partitions = Vec::new();
    let mut evaluations = Vec::new();
    for weighted in [false, true] {
        for &gamma in &config.louvain.gammas {
            let summary_path = out_path(config, &partition_json_name(weighted, gamma));
            if summary_path.is_file() {
                manifest.record_input(&summary_path)?;
                partitions.push(read_json::<serde_json::Value>(&summary_path)?);
            }
            let eval_path = out_path(
                config,
                &format!("eval_{}_g{}.json", mode_name(weighted), gamma_tag(gamma)),
            );
            if eval_path.is_file() {
                manifest.record_input(&eval_path)?;
                evaluations.push(read_json::<serde_json::Value>(&eval_path)?);
            }
        }
    }
    if partitions.is_empty() {
        bail!("no partition summaries found; run `caselaw communities` first");
    }

    let bundle = serde_json::json!({
        "census": census,
        "coherence": coherence,
        "topics": topics,
        "graph": graph,
        "weighting": weighting,
        "partitions": partitions,
        "evaluations": evaluations,
    });
    let report_path = out_path(config, "report.json");
    write_json(&report_path, &bundle)?;
    manifest.record_output(&report_path)?;
    manifest.write(&config.paths.out_dir)
}

/// Runs every stage in dependency order. Sweep and evaluation run only when
/// configured; everything else always runs.
pub fn pipeline(config: &RunConfig) -> anyhow::Result<()> {
    ingest(config)?;
    preprocess(config)?;
    if config.lda.sweep_from.is_some() && config.lda.sweep_to.is_some() {
        lda_sweep(config)?;
    }
    lda_train(config)?;
    embed(config)?;
    graph_build(config)?;
    communities(config, false)?;
    weight(config)?;
    communities(config, true)?;
    if config.evaluation.label.is_some() && config.paths.annotations.is_some() {
        evaluate(config)?;
    }
    report(config)
}
