//! Citation network construction, component census, and topic-similarity
//! edge weighting.
//!
//! Citations are directed in the source documents but the network is built
//! undirected: community detection treats a citation in either direction as
//! one link. Multiple citations between the same pair collapse to a single
//! edge of weight 1 unless multiplicity accumulation is requested.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{Corpus, DocType, Language};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("duplicate node \"{case_id}\"")]
    DuplicateNode { case_id: String },
    #[error("unknown node \"{case_id}\"")]
    UnknownNode { case_id: String },
    #[error("edge weight must be non-negative, got {weight} on {a}–{b}")]
    NegativeWeight { a: String, b: String, weight: f64 },
    #[error("component {id} does not exist ({count} components)")]
    UnknownComponent { id: usize, count: usize },
    #[error("vectors have different lengths: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("topic vector for \"{case_id}\" is all zeros")]
    ZeroTopicVector { case_id: String },
    #[error("{} English nodes have no topic vector: {}", case_ids.len(), case_ids.join(", "))]
    MissingTopicVectors { case_ids: Vec<String> },
    #[error("no edge joins two topic-modelled documents, so the fallback median is undefined")]
    NoVectoredEdges,
    #[error("edge list {path} line {line} references \"{case_id}\" absent from the node list")]
    EdgeListUnknownNode {
        path: String,
        line: usize,
        case_id: String,
    },
    #[error("adjacency index inconsistent with edge set: {detail}")]
    CorruptAdjacency { detail: String },
}

/// Per-node attributes. Stub nodes (citation targets outside the corpus)
/// and aggregated super-nodes have no language or document type.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub case_id: String,
    pub language: Option<Language>,
    pub doc_type: Option<DocType>,
    pub has_topic_vector: bool,
}

/// Undirected weighted graph over case ids.
///
/// No parallel edges; self-loops never arise from [`build_graph`] but do
/// arise from community aggregation, where a community's internal weight
/// becomes a self-loop on its super-node. A self-loop of weight w counts
/// once in the total weight and adds 2w to its node's weighted degree.
#[derive(Debug, Clone, Default)]
pub struct CitationGraph {
    nodes: Vec<NodeInfo>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), f64>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl CitationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(
        &mut self,
        case_id: impl Into<String>,
        language: Option<Language>,
        doc_type: Option<DocType>,
    ) -> Result<usize, GraphError> {
        let case_id = case_id.into();
        if self.index.contains_key(&case_id) {
            return Err(GraphError::DuplicateNode { case_id });
        }
        let idx = self.nodes.len();
        self.index.insert(case_id.clone(), idx);
        self.nodes.push(NodeInfo {
            case_id,
            language,
            doc_type,
            has_topic_vector: false,
        });
        self.adj.push(Vec::new());
        Ok(idx)
    }

    /// Inserts or updates the undirected edge {a, b}. Returns true when the
    /// edge did not exist. An existing edge keeps its weight unless
    /// `accumulate` is set, in which case weights add.
    pub fn add_edge(
        &mut self,
        a: usize,
        b: usize,
        weight: f64,
        accumulate: bool,
    ) -> Result<bool, GraphError> {
        if weight < 0.0 {
            return Err(GraphError::NegativeWeight {
                a: self.nodes[a].case_id.clone(),
                b: self.nodes[b].case_id.clone(),
                weight,
            });
        }
        let key = (a.min(b), a.max(b));
        match self.edges.get_mut(&key) {
            Some(w) => {
                if accumulate {
                    *w += weight;
                    let w = *w;
                    self.set_adj_weight(key, w);
                }
                Ok(false)
            }
            None => {
                self.edges.insert(key, weight);
                let (u, v) = key;
                self.adj[u].push((v, weight));
                if u != v {
                    self.adj[v].push((u, weight));
                }
                Ok(true)
            }
        }
    }

    /// Overwrites the weight of an existing edge.
    pub fn set_weight(&mut self, a: usize, b: usize, weight: f64) -> Result<(), GraphError> {
        if weight < 0.0 {
            return Err(GraphError::NegativeWeight {
                a: self.nodes[a].case_id.clone(),
                b: self.nodes[b].case_id.clone(),
                weight,
            });
        }
        let key = (a.min(b), a.max(b));
        match self.edges.get_mut(&key) {
            Some(w) => {
                *w = weight;
                self.set_adj_weight(key, weight);
                Ok(())
            }
            None => Err(GraphError::UnknownNode {
                case_id: format!(
                    "edge {}–{}",
                    self.nodes[a].case_id, self.nodes[b].case_id
                ),
            }),
        }
    }

    fn set_adj_weight(&mut self, (u, v): (usize, usize), weight: f64) {
        for slot in self.adj[u].iter_mut() {
            if slot.0 == v {
                slot.1 = weight;
            }
        }
        if u != v {
            for slot in self.adj[v].iter_mut() {
                if slot.0 == u {
                    slot.1 = weight;
                }
            }
        }
    }

    pub fn set_has_topic_vector(&mut self, idx: usize, value: bool) {
        self.nodes[idx].has_topic_vector = value;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &NodeInfo {
        &self.nodes[idx]
    }

    pub fn node_index(&self, case_id: &str) -> Option<usize> {
        self.index.get(case_id).copied()
    }

    pub fn case_id(&self, idx: usize) -> &str {
        &self.nodes[idx].case_id
    }

    /// Edges as (u, v, weight) with u ≤ v, ordered by (u, v).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&(a.min(b), a.max(b))).copied()
    }

    /// Incident (neighbor, weight) pairs; a self-loop appears once.
    pub fn neighbors(&self, idx: usize) -> &[(usize, f64)] {
        &self.adj[idx]
    }

    /// Total edge weight m. Self-loops count once.
    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Weighted degree; a self-loop of weight w contributes 2w.
    pub fn weighted_degree(&self, idx: usize) -> f64 {
        self.adj[idx]
            .iter()
            .map(|&(j, w)| if j == idx { 2.0 * w } else { w })
            .sum()
    }

    pub fn self_loop(&self, idx: usize) -> f64 {
        self.edges.get(&(idx, idx)).copied().unwrap_or(0.0)
    }

    /// Checks that the adjacency index matches the edge set exactly.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut from_adj: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, w) in list {
                let key = (u.min(v), u.max(v));
                if let Some(prev) = from_adj.insert(key, w) {
                    if prev != w {
                        return Err(GraphError::CorruptAdjacency {
                            detail: format!(
                                "edge {}–{} listed with weights {prev} and {w}",
                                self.nodes[key.0].case_id, self.nodes[key.1].case_id
                            ),
                        });
                    }
                }
            }
        }
        if from_adj != self.edges {
            return Err(GraphError::CorruptAdjacency {
                detail: format!(
                    "adjacency lists describe {} edges, edge set has {}",
                    from_adj.len(),
                    self.edges.len()
                ),
            });
        }
        for (&(u, v), &w) in &self.edges {
            let count_u = self.adj[u].iter().filter(|&&(j, _)| j == v).count();
            if count_u != 1 {
                return Err(GraphError::CorruptAdjacency {
                    detail: format!(
                        "edge {}–{} appears {count_u} times in one adjacency list",
                        self.nodes[u].case_id, self.nodes[v].case_id
                    ),
                });
            }
            if w < 0.0 {
                return Err(GraphError::CorruptAdjacency {
                    detail: format!("negative weight {w}"),
                });
            }
        }
        Ok(())
    }
}

/// What to do with citations whose target is not in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DanglingPolicy {
    /// Ignore the citation (default).
    Drop,
    /// Materialize the target as a text-less stub node.
    Stub,
}

/// Counts reported alongside the built graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct BuildSummary {
    pub dropped_citations: usize,
    pub stub_nodes: usize,
    pub self_citations_dropped: usize,
    pub duplicate_citations_collapsed: usize,
}

/// Builds the undirected citation graph: one node per document, one edge
/// per cited pair. `accumulate_multiplicity` turns repeat citations into
/// added weight instead of collapsing them.
pub fn build_graph_with_options(
    corpus: &Corpus,
    dangling: DanglingPolicy,
    accumulate_multiplicity: bool,
) -> (CitationGraph, BuildSummary) {
    let mut graph = CitationGraph::new();
    let mut summary = BuildSummary::default();

    for doc in corpus.iter() {
        graph
            .add_node(
                doc.case_id.clone(),
                Some(doc.language),
                Some(doc.doc_type),
            )
            .expect("corpus case ids are unique");
    }

    for doc in corpus.iter() {
        let src = graph.node_index(&doc.case_id).expect("node added above");
        for cited in &doc.cited_case_ids {
            if *cited == doc.case_id {
                summary.self_citations_dropped += 1;
                continue;
            }
            let dst = match graph.node_index(cited) {
                Some(idx) => idx,
                None => match dangling {
                    DanglingPolicy::Drop => {
                        summary.dropped_citations += 1;
                        continue;
                    }
                    DanglingPolicy::Stub => {
                        summary.stub_nodes += 1;
                        graph
                            .add_node(cited.clone(), None, None)
                            .expect("id was absent")
                    }
                },
            };
            let inserted = graph
                .add_edge(src, dst, 1.0, accumulate_multiplicity)
                .expect("weight 1.0 is non-negative");
            if !inserted {
                summary.duplicate_citations_collapsed += 1;
            }
        }
    }
    (graph, summary)
}

pub fn build_graph(corpus: &Corpus, dangling: DanglingPolicy) -> (CitationGraph, BuildSummary) {
    build_graph_with_options(corpus, dangling, false)
}

/// Connected-component labelling.
///
/// Components are numbered canonically: by size descending, ties by the
/// smallest case id they contain. The giant component is therefore id 0.
#[derive(Debug, Clone)]
pub struct ComponentCensus {
    component_of: Vec<usize>,
    sizes: Vec<usize>,
}

impl ComponentCensus {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Sizes in canonical order (descending).
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn component_of(&self, node_idx: usize) -> usize {
        self.component_of[node_idx]
    }

    /// Id of the giant component, None on an empty graph.
    pub fn giant(&self) -> Option<usize> {
        if self.sizes.is_empty() {
            None
        } else {
            Some(0)
        }
    }

    pub fn singleton_count(&self) -> usize {
        self.sizes.iter().filter(|&&s| s == 1).count()
    }
}

pub fn components(graph: &CitationGraph) -> ComponentCensus {
    let n = graph.node_count();
    let mut raw = vec![usize::MAX; n];
    let mut count = 0;
    for start in 0..n {
        if raw[start] != usize::MAX {
            continue;
        }
        let id = count;
        count += 1;
        let mut stack = vec![start];
        raw[start] = id;
        while let Some(u) = stack.pop() {
            for &(v, _) in graph.neighbors(u) {
                if raw[v] == usize::MAX {
                    raw[v] = id;
                    stack.push(v);
                }
            }
        }
    }

    // canonical order: size descending, then smallest member case_id
    let mut sizes = vec![0usize; count];
    let mut min_id: Vec<Option<&str>> = vec![None; count];
    for (node, &c) in raw.iter().enumerate() {
        sizes[c] += 1;
        let case = graph.case_id(node);
        if min_id[c].map_or(true, |m| case < m) {
            min_id[c] = Some(case);
        }
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| {
        sizes[b]
            .cmp(&sizes[a])
            .then_with(|| min_id[a].cmp(&min_id[b]))
    });
    let mut rank = vec![0usize; count];
    for (new_id, &old_id) in order.iter().enumerate() {
        rank[old_id] = new_id;
    }

    ComponentCensus {
        component_of: raw.iter().map(|&c| rank[c]).collect(),
        sizes: order.iter().map(|&old| sizes[old]).collect(),
    }
}

/// Induced subgraph of one component, weights preserved.
pub fn subgraph(
    graph: &CitationGraph,
    census: &ComponentCensus,
    component: usize,
) -> Result<CitationGraph, GraphError> {
    if component >= census.count() {
        return Err(GraphError::UnknownComponent {
            id: component,
            count: census.count(),
        });
    }
    let mut out = CitationGraph::new();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    for (idx, info) in graph.nodes().iter().enumerate() {
        if census.component_of(idx) == component {
            let new_idx = out
                .add_node(info.case_id.clone(), info.language, info.doc_type)
                .expect("source ids are unique");
            out.set_has_topic_vector(new_idx, info.has_topic_vector);
            remap.insert(idx, new_idx);
        }
    }
    for (u, v, w) in graph.edges() {
        if let (Some(&nu), Some(&nv)) = (remap.get(&u), remap.get(&v)) {
            out.add_edge(nu, nv, w, false)?;
        }
    }
    Ok(out)
}

/// Cosine similarity dot(u,v)/(‖u‖‖v‖). Errors on zero vectors.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, GraphError> {
    if u.len() != v.len() {
        return Err(GraphError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(GraphError::ZeroVector);
    }
    Ok(dot / (nu * nv))
}

/// What [`weight_edges`] did: the fallback median and how many edges got
/// cosine vs. fallback weights.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightSummary {
    pub median: f64,
    pub cosine_edges: usize,
    pub fallback_edges: usize,
}

/// Reweights every edge by the cosine similarity of its endpoints' topic
/// vectors, in two passes: edges between two topic-modelled documents get
/// their cosine, then edges touching at least one unmodelled document get
/// the median of those cosines.
///
/// Every English node must have a topic vector. Topology is untouched.
/// For reference, running this over the complete case-law archive puts the
/// fallback median near 0.755; the bundled fixtures are far smaller and
/// land elsewhere.
pub fn weight_edges(
    graph: &CitationGraph,
    thetas: &HashMap<String, Vec<f64>>,
) -> Result<(CitationGraph, WeightSummary), GraphError> {
    let mut missing: Vec<String> = graph
        .nodes()
        .iter()
        .filter(|n| n.language == Some(Language::En) && !thetas.contains_key(&n.case_id))
        .map(|n| n.case_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(GraphError::MissingTopicVectors { case_ids: missing });
    }

    let mut out = graph.clone();
    for idx in 0..out.node_count() {
        let has = thetas.contains_key(out.case_id(idx));
        out.set_has_topic_vector(idx, has);
    }

    // pass 1: cosine for edges whose endpoints are both modelled
    let mut cosines: Vec<f64> = Vec::new();
    let mut vectorless: Vec<(usize, usize)> = Vec::new();
    let edge_list: Vec<(usize, usize)> = graph.edges().map(|(u, v, _)| (u, v)).collect();
    for &(u, v) in &edge_list {
        let tu = thetas.get(graph.case_id(u));
        let tv = thetas.get(graph.case_id(v));
        match (tu, tv) {
            (Some(tu), Some(tv)) => {
                let c = cosine(tu, tv).map_err(|e| match e {
                    GraphError::ZeroVector => GraphError::ZeroTopicVector {
                        case_id: graph.case_id(u).to_string(),
                    },
                    other => other,
                })?;
                out.set_weight(u, v, c)?;
                cosines.push(c);
            }
            _ => vectorless.push((u, v)),
        }
    }
    if cosines.is_empty() {
        return Err(GraphError::NoVectoredEdges);
    }
    let median = median_of(&mut cosines);

    // pass 2: the median is the stand-in weight where a cosine is undefined
    for &(u, v) in &vectorless {
        out.set_weight(u, v, median)?;
    }

    Ok((
        out,
        WeightSummary {
            median,
            cosine_edges: edge_list.len() - vectorless.len(),
            fallback_edges: vectorless.len(),
        },
    ))
}

/// Median; an even count takes the mean of the two central values.
fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("weights are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Writes `src,dst,weight` edges and `case_id,language,doc_type,has_topic_vector`
/// nodes, both in deterministic order.
pub fn export_csv(
    graph: &CitationGraph,
    edges_path: impl AsRef<Path>,
    nodes_path: impl AsRef<Path>,
) -> Result<(), GraphError> {
    let nodes_path = nodes_path.as_ref();
    let mut nodes = csv::Writer::from_path(nodes_path).map_err(|source| GraphError::Csv {
        path: nodes_path.display().to_string(),
        source,
    })?;
    let write_node_err = |source| GraphError::Csv {
        path: nodes_path.display().to_string(),
        source,
    };
    nodes
        .write_record(["case_id", "language", "doc_type", "has_topic_vector"])
        .map_err(write_node_err)?;
    for info in graph.nodes() {
        nodes
            .write_record([
                info.case_id.as_str(),
                info.language.map_or("", |l| l.as_str()),
                info.doc_type.map_or("", |t| t.as_str()),
                if info.has_topic_vector { "true" } else { "false" },
            ])
            .map_err(write_node_err)?;
    }
    nodes.flush().map_err(|source| GraphError::Io {
        path: nodes_path.display().to_string(),
        source,
    })?;

    let edges_path = edges_path.as_ref();
    let mut edges = csv::Writer::from_path(edges_path).map_err(|source| GraphError::Csv {
        path: edges_path.display().to_string(),
        source,
    })?;
    let write_edge_err = |source| GraphError::Csv {
        path: edges_path.display().to_string(),
        source,
    };
    edges
        .write_record(["src", "dst", "weight"])
        .map_err(write_edge_err)?;
    for (u, v, w) in graph.edges() {
        edges
            .write_record([graph.case_id(u), graph.case_id(v), &format!("{w}")])
            .map_err(write_edge_err)?;
    }
    edges.flush().map_err(|source| GraphError::Io {
        path: edges_path.display().to_string(),
        source,
    })
}

/// Reads a graph written by [`export_csv`].
pub fn import_csv(
    edges_path: impl AsRef<Path>,
    nodes_path: impl AsRef<Path>,
) -> Result<CitationGraph, GraphError> {
    let nodes_path = nodes_path.as_ref();
    let mut graph = CitationGraph::new();
    let mut reader = csv::Reader::from_path(nodes_path).map_err(|source| GraphError::Csv {
        path: nodes_path.display().to_string(),
        source,
    })?;
    for record in reader.records() {
        let record = record.map_err(|source| GraphError::Csv {
            path: nodes_path.display().to_string(),
            source,
        })?;
        let case_id = record.get(0).unwrap_or("").to_string();
        let language = match record.get(1).unwrap_or("") {
            "en" => Some(Language::En),
            "fr" => Some(Language::Fr),
            _ => None,
        };
        let doc_type = match record.get(2).unwrap_or("") {
            "judgment" => Some(DocType::Judgment),
            "decision" => Some(DocType::Decision),
            _ => None,
        };
        let has_vector = record.get(3) == Some("true");
        let idx = graph.add_node(case_id, language, doc_type)?;
        graph.set_has_topic_vector(idx, has_vector);
    }

    let edges_path = edges_path.as_ref();
    let mut reader = csv::Reader::from_path(edges_path).map_err(|source| GraphError::Csv {
        path: edges_path.display().to_string(),
        source,
    })?;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| GraphError::Csv {
            path: edges_path.display().to_string(),
            source,
        })?;
        let src = record.get(0).unwrap_or("");
        let dst = record.get(1).unwrap_or("");
        let weight: f64 = record
            .get(2)
            .unwrap_or("")
            .parse()
            .unwrap_or(f64::NAN);
        let resolve = |id: &str| {
            graph.node_index(id).ok_or_else(|| GraphError::EdgeListUnknownNode {
                path: edges_path.display().to_string(),
                line: row + 2,
                case_id: id.to_string(),
            })
        };
        let u = resolve(src)?;
        let v = resolve(dst)?;
        if !weight.is_finite() {
            return Err(GraphError::NegativeWeight {
                a: src.to_string(),
                b: dst.to_string(),
                weight,
            });
        }
        graph.add_edge(u, v, weight, false)?;
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document};

    fn doc(case_id: &str, language: Language, cited: &[&str]) -> Document {
        Document {
            case_id: case_id.to_string(),
            title: String::new(),
            application_no: String::new(),
            doc_type: DocType::Judgment,
            language,
            importance: None,
            date: None,
            cited_case_ids: cited.iter().map(|c| c.to_string()).collect(),
            text: String::new(),
        }
    }

    fn corpus_of(docs: Vec<Document>) -> Corpus {
        let mut corpus = Corpus::new();
        for d in docs {
            corpus.push(d).unwrap();
        }
        corpus
    }

    #[test]
    fn mutual_citations_collapse_to_one_edge() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B"]),
            doc("B", Language::En, &["A"]),
        ]);
        let (graph, summary) = build_graph(&corpus, DanglingPolicy::Drop);
        assert_eq!(graph.node_count(), 2);
        assert_eq!(graph.edge_count(), 1);
        assert_eq!(summary.duplicate_citations_collapsed, 1);
        graph.validate().unwrap();
    }

    #[test]
    fn self_loops_and_duplicates_are_removed() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["A", "B", "B"]),
            doc("B", Language::En, &[]),
        ]);
        let (graph, summary) = build_graph(&corpus, DanglingPolicy::Drop);
        assert_eq!(graph.edge_count(), 1);
        assert_eq!(summary.self_citations_dropped, 1);
        assert_eq!(summary.duplicate_citations_collapsed, 1);
    }

    #[test]
    fn dangling_drop_counts_and_stub_materializes() {
        let corpus = corpus_of(vec![doc("A", Language::En, &["X"])]);

        let (graph, summary) = build_graph(&corpus, DanglingPolicy::Drop);
        assert_eq!(graph.node_count(), 1);
        assert_eq!(graph.edge_count(), 0);
        assert_eq!(summary.dropped_citations, 1);

        let (graph, summary) = build_graph(&corpus, DanglingPolicy::Stub);
        assert_eq!(graph.node_count(), 2);
        assert_eq!(graph.edge_count(), 1);
        assert_eq!(summary.stub_nodes, 1);
        let stub = graph.node(graph.node_index("X").unwrap());
        assert_eq!(stub.language, None);
        assert_eq!(stub.doc_type, None);
    }

    #[test]
    fn multiplicity_accumulates_behind_flag() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B", "B"]),
            doc("B", Language::En, &["A"]),
        ]);
        let (graph, _) = build_graph_with_options(&corpus, DanglingPolicy::Drop, true);
        let (u, v) = (
            graph.node_index("A").unwrap(),
            graph.node_index("B").unwrap(),
        );
        assert_eq!(graph.edge_weight(u, v), Some(3.0));
    }

    fn five_node_fixture() -> CitationGraph {
        // edges {1-2, 3-4}, node 5 isolated
        let corpus = corpus_of(vec![
            doc("1", Language::En, &["2"]),
            doc("2", Language::En, &[]),
            doc("3", Language::En, &["4"]),
            doc("4", Language::En, &[]),
            doc("5", Language::En, &[]),
        ]);
        build_graph(&corpus, DanglingPolicy::Drop).0
    }

    #[test]
    fn component_census_sizes_and_giant_tiebreak() {
        let graph = five_node_fixture();
        let census = components(&graph);
        assert_eq!(census.count(), 3);
        assert_eq!(census.sizes(), [2, 2, 1]);
        assert_eq!(census.singleton_count(), 1);
        // two components of size 2; the one holding "1" wins the tie
        let giant = census.giant().unwrap();
        assert_eq!(giant, 0);
        assert_eq!(census.component_of(graph.node_index("1").unwrap()), giant);
        assert_eq!(census.component_of(graph.node_index("2").unwrap()), giant);
    }

    #[test]
    fn empty_graph_has_no_components() {
        let census = components(&CitationGraph::new());
        assert_eq!(census.count(), 0);
        assert_eq!(census.giant(), None);
    }

    #[test]
    fn component_sizes_sum_to_node_count() {
        let graph = five_node_fixture();
        let census = components(&graph);
        assert_eq!(census.sizes().iter().sum::<usize>(), graph.node_count());
        for (u, v, _) in graph.edges() {
            assert_eq!(census.component_of(u), census.component_of(v));
        }
    }

    #[test]
    fn subgraph_of_giant_and_singleton() {
        let graph = five_node_fixture();
        let census = components(&graph);

        let giant = subgraph(&graph, &census, 0).unwrap();
        assert_eq!(giant.node_count(), 2);
        assert_eq!(giant.edge_count(), 1);
        giant.validate().unwrap();

        let singleton = subgraph(&graph, &census, 2).unwrap();
        assert_eq!(singleton.node_count(), 1);
        assert_eq!(singleton.edge_count(), 0);

        assert!(matches!(
            subgraph(&graph, &census, 7),
            Err(GraphError::UnknownComponent { id: 7, count: 3 })
        ));
    }

    #[test]
    fn subgraph_of_single_component_graph_is_identity() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B"]),
            doc("B", Language::En, &["C"]),
            doc("C", Language::En, &[]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let census = components(&graph);
        let sub = subgraph(&graph, &census, 0).unwrap();
        assert_eq!(sub.node_count(), graph.node_count());
        let orig: Vec<_> = graph
            .edges()
            .map(|(u, v, w)| (graph.case_id(u).to_string(), graph.case_id(v).to_string(), w))
            .collect();
        let copied: Vec<_> = sub
            .edges()
            .map(|(u, v, w)| (sub.case_id(u).to_string(), sub.case_id(v).to_string(), w))
            .collect();
        assert_eq!(orig, copied);
    }

    #[test]
    fn cosine_identity_orthogonal_and_half() {
        assert!((cosine(&[0.2, 0.8], &[0.2, 0.8]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatched_vectors() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(GraphError::ZeroVector)
        ));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(GraphError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    fn theta(pairs: &[(&str, Vec<f64>)]) -> HashMap<String, Vec<f64>> {
        pairs
            .iter()
            .map(|(id, v)| (id.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn weight_edges_median_fallback() {
        // three vectored edges with cosines {1.0, 0.5, 0.0}; D-E touches
        // vectorless French node E and must get the median 0.5
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B", "C", "D"]),
            doc("B", Language::En, &[]),
            doc("C", Language::En, &[]),
            doc("D", Language::En, &["E"]),
            doc("E", Language::Fr, &[]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let thetas = theta(&[
            ("A", vec![1.0, 1.0, 0.0]),
            ("B", vec![1.0, 1.0, 0.0]),
            ("C", vec![0.0, 1.0, 1.0]),
            ("D", vec![0.0, 1.0, 0.0]),
        ]);
        // cosines: A-B = 1.0, A-C = 0.5, A-D = 1/sqrt(2) ~ 0.707
        let (weighted, summary) = weight_edges(&graph, &thetas).unwrap();
        assert_eq!(summary.cosine_edges, 3);
        assert_eq!(summary.fallback_edges, 1);
        let expected_median = 1.0 / 2f64.sqrt();
        assert!((summary.median - expected_median).abs() < 1e-12);
        let (d, e) = (
            weighted.node_index("D").unwrap(),
            weighted.node_index("E").unwrap(),
        );
        assert!((weighted.edge_weight(d, e).unwrap() - expected_median).abs() < 1e-12);
        assert!(weighted.node(d).has_topic_vector);
        assert!(!weighted.node(e).has_topic_vector);
    }

    #[test]
    fn weight_edges_even_median_is_mean_of_central_pair() {
        let mut vals = vec![0.8, 0.2, 0.6, 0.4];
        assert!((median_of(&mut vals) - 0.5).abs() < 1e-12);
        let mut odd = vec![0.9, 0.755, 0.3];
        assert!((median_of(&mut odd) - 0.755).abs() < 1e-12);
    }

    #[test]
    fn weight_edges_all_vectored_uses_no_fallback() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B"]),
            doc("B", Language::En, &[]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let thetas = theta(&[("A", vec![0.3, 0.7]), ("B", vec![0.3, 0.7])]);
        let (weighted, summary) = weight_edges(&graph, &thetas).unwrap();
        assert_eq!(summary.fallback_edges, 0);
        let (a, b) = (
            weighted.node_index("A").unwrap(),
            weighted.node_index("B").unwrap(),
        );
        assert!((weighted.edge_weight(a, b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_edges_requires_thetas_for_english_nodes() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B"]),
            doc("B", Language::En, &[]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let thetas = theta(&[("A", vec![1.0, 0.0])]);
        match weight_edges(&graph, &thetas).unwrap_err() {
            GraphError::MissingTopicVectors { case_ids } => {
                assert_eq!(case_ids, vec!["B".to_string()])
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn weight_edges_with_no_vectored_edge_is_an_error() {
        // only edge joins an English doc to a French one
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B"]),
            doc("B", Language::Fr, &[]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let thetas = theta(&[("A", vec![1.0, 0.0])]);
        assert!(matches!(
            weight_edges(&graph, &thetas).unwrap_err(),
            GraphError::NoVectoredEdges
        ));
    }

    #[test]
    fn weight_edges_preserves_topology() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B", "C"]),
            doc("B", Language::En, &["C"]),
            doc("C", Language::Fr, &[]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let thetas = theta(&[("A", vec![0.9, 0.1]), ("B", vec![0.2, 0.8])]);
        let (weighted, _) = weight_edges(&graph, &thetas).unwrap();
        assert_eq!(weighted.node_count(), graph.node_count());
        let before: Vec<_> = graph.edges().map(|(u, v, _)| (u, v)).collect();
        let after: Vec<_> = weighted.edges().map(|(u, v, _)| (u, v)).collect();
        assert_eq!(before, after);
        for (_, _, w) in weighted.edges() {
            assert!((0.0..=1.0).contains(&w));
        }
        weighted.validate().unwrap();
    }

    #[test]
    fn csv_roundtrip_preserves_graph() {
        let corpus = corpus_of(vec![
            doc("A", Language::En, &["B"]),
            doc("B", Language::Fr, &[]),
            doc("C", Language::En, &["A"]),
        ]);
        let (graph, _) = build_graph(&corpus, DanglingPolicy::Drop);
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("edges.csv");
        let nodes = dir.path().join("nodes.csv");
        export_csv(&graph, &edges, &nodes).unwrap();
        let back = import_csv(&edges, &nodes).unwrap();
        assert_eq!(back.node_count(), graph.node_count());
        assert_eq!(back.edge_count(), graph.edge_count());
        for (u, v, w) in graph.edges() {
            let bu = back.node_index(graph.case_id(u)).unwrap();
            let bv = back.node_index(graph.case_id(v)).unwrap();
            assert_eq!(back.edge_weight(bu, bv), Some(w));
        }
        for info in graph.nodes() {
            let b = back.node(back.node_index(&info.case_id).unwrap());
            assert_eq!(b.language, info.language);
            assert_eq!(b.doc_type, info.doc_type);
        }
        back.validate().unwrap();
    }
}
