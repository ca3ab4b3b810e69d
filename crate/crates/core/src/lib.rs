//! Topic modelling, citation-network community detection, and retrieval
//! evaluation for court-decision corpora.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`corpus`] loads and filters the document collection.
//! 2. [`textprep`] normalizes text and builds the bag-of-words vocabulary.
//! 3. [`topics`] fits LDA by collapsed Gibbs sampling and scores topic
//!    coherence.
//! 4. [`citegraph`] builds the citation network and weights its edges by
//!    topic-vector similarity.
//! 5. [`community`] detects communities by Louvain modularity optimization.
//! 6. [`embed`] projects document topic vectors to 2-D for inspection.
//! 7. [`evaluate`] scores detected communities against ground-truth labels.
//!
//! Every randomized stage takes an explicit seed and is deterministic given
//! that seed, on any platform.

pub mod citegraph;
pub mod community;
pub mod corpus;
pub mod embed;
pub mod evaluate;
pub mod textprep;
pub mod topics;

pub use citegraph::{
    build_graph, build_graph_with_options, components, cosine, export_csv, import_csv, subgraph,
    weight_edges, BuildSummary, CitationGraph, ComponentCensus, DanglingPolicy, GraphError,
    NodeInfo, WeightSummary,
};
pub use community::{
    aggregate, louvain, modularity, CommunityError, LouvainResult, Partition,
};
pub use corpus::{
    corpus_census, filter_corpus, load_annotations, load_corpus, write_corpus, CensusCounts,
    Corpus, CorpusError, CorpusFormat, DocType, Document, Language, LabelSet,
};
pub use embed::{tsne, Embedding2D, TsneConfig, TsneError};
pub use evaluate::{
    community_label_counts, community_topic_profile, evaluate_retrieval, nmi, select_candidates,
    synth_corpus, CommunityRow, EvalError, EvalReport, RetrievalMetrics, SynthParams,
    SyntheticTruth, TopicProfile,
};
pub use textprep::{
    build_vocabulary, documents_to_bows, normalize, to_bow, BowVector, NormalizeConfig,
    TextPrepError, Vocabulary,
};
pub use topics::{
    coherence_sweep, infer_theta, primary_topic, top_words, train_lda, umass_coherence,
    CoherenceTable, LdaConfig, LdaModel, SweepPoint, TopicsError,
};
