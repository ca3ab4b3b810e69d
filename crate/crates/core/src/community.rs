//! Resolution-parameterized modularity and Louvain community detection.
//!
//! Modularity here is Q = Σ_c [ W_in(c)/m − γ·(S(c)/2m)² ], where m is the
//! total edge weight (self-loops counted once), W_in(c) the weight of edges
//! inside community c (self-loops counted once), and S(c) the summed
//! weighted degree of its members (a self-loop of weight w adds 2w). Under
//! this convention collapsing a partition into super-nodes preserves both
//! m and Q, which is what makes the Louvain aggregation phase sound.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::citegraph::CitationGraph;

#[derive(Debug, thiserror::Error)]
pub enum CommunityError {
    #[error("modularity is undefined on a graph with zero total edge weight")]
    EmptyGraph,
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("partition covers {got} nodes but the graph has {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("partition node set does not match the graph (first difference: \"{case_id}\")")]
    NodeSetMismatch { case_id: String },
}

/// Node-to-community assignment with per-community tallies.
///
/// Community ids are canonical: id 0 is the community containing the
/// smallest case id, id 1 the community with the next-smallest case id not
/// yet covered, and so on. Tallies are computed from the graph the
/// partition was built against.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    node_ids: Vec<String>,
    id_index: HashMap<String, usize>,
    assignment: Vec<usize>,
    sizes: Vec<usize>,
    internal_weight: Vec<f64>,
    incident_weight: Vec<f64>,
}

impl Partition {
    /// Canonicalizes `raw` (arbitrary community labels, one per graph node
    /// in node order) and computes the tallies.
    pub fn new(graph: &CitationGraph, raw: &[usize]) -> Result<Self, CommunityError> {
        if raw.len() != graph.node_count() {
            return Err(CommunityError::AssignmentLength {
                expected: graph.node_count(),
                got: raw.len(),
            });
        }

        // canonical order: sort communities by their smallest member case_id
        let mut min_case: BTreeMap<usize, &str> = BTreeMap::new();
        for (node, &c) in raw.iter().enumerate() {
            let case = graph.case_id(node);
            min_case
                .entry(c)
                .and_modify(|m| {
                    if case < *m {
                        *m = case;
                    }
                })
                .or_insert(case);
        }
        let mut order: Vec<(usize, &str)> = min_case.into_iter().collect();
        order.sort_by(|a, b| a.1.cmp(b.1));
        let relabel: HashMap<usize, usize> = order
            .iter()
            .enumerate()
            .map(|(new, &(old, _))| (old, new))
            .collect();

        let count = relabel.len();
        let assignment: Vec<usize> = raw.iter().map(|c| relabel[c]).collect();
        let mut sizes = vec![0usize; count];
        let mut internal_weight = vec![0f64; count];
        let mut incident_weight = vec![0f64; count];
        for (node, &c) in assignment.iter().enumerate() {
            sizes[c] += 1;
            incident_weight[c] += graph.weighted_degree(node);
        }
        for (u, v, w) in graph.edges() {
            if assignment[u] == assignment[v] {
                internal_weight[assignment[u]] += w;
            }
        }

        let node_ids: Vec<String> = graph.nodes().iter().map(|n| n.case_id.clone()).collect();
        let id_index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Self {
            node_ids,
            id_index,
            assignment,
            sizes,
            internal_weight,
            incident_weight,
        })
    }

    pub fn singletons(graph: &CitationGraph) -> Result<Self, CommunityError> {
        let raw: Vec<usize> = (0..graph.node_count()).collect();
        Self::new(graph, &raw)
    }

    pub fn community_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Community of the node at graph position `node_idx`.
    pub fn community_of(&self, node_idx: usize) -> usize {
        self.assignment[node_idx]
    }

    pub fn community_of_case(&self, case_id: &str) -> Option<usize> {
        self.id_index.get(case_id).map(|&i| self.assignment[i])
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, community: usize) -> usize {
        self.sizes[community]
    }

    pub fn internal_weight(&self, community: usize) -> f64 {
        self.internal_weight[community]
    }

    pub fn incident_weight(&self, community: usize) -> f64 {
        self.incident_weight[community]
    }

    pub fn members(&self, community: usize) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .zip(&self.node_ids)
            .filter_map(move |(&c, id)| (c == community).then_some(id.as_str()))
    }
}

fn check_partition(graph: &CitationGraph, partition: &Partition) -> Result<(), CommunityError> {
    if partition.len() != graph.node_count() {
        return Err(CommunityError::AssignmentLength {
            expected: graph.node_count(),
            got: partition.len(),
        });
    }
    for info in graph.nodes() {
        if !partition.id_index.contains_key(&info.case_id) {
            return Err(CommunityError::NodeSetMismatch {
                case_id: info.case_id.clone(),
            });
        }
    }
    Ok(())
}

/// Modularity of `partition` on `graph` at resolution `gamma`, recomputed
/// from scratch (the stored tallies are not trusted).
pub fn modularity(
    graph: &CitationGraph,
    partition: &Partition,
    gamma: f64,
) -> Result<f64, CommunityError> {
    if gamma <= 0.0 {
        return Err(CommunityError::BadResolution(gamma));
    }
    check_partition(graph, partition)?;
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(CommunityError::EmptyGraph);
    }

    let community = |idx: usize| {
        partition
            .community_of_case(graph.case_id(idx))
            .expect("node sets were checked")
    };
    let count = partition.community_count();
    let mut w_in = vec![0f64; count];
    let mut s = vec![0f64; count];
    for (u, v, w) in graph.edges() {
        if community(u) == community(v) {
            w_in[community(u)] += w;
        }
    }
    for idx in 0..graph.node_count() {
        s[community(idx)] += graph.weighted_degree(idx);
    }

    let q = (0..count)
        .map(|c| w_in[c] / m - gamma * (s[c] / (2.0 * m)).powi(2))
        .sum();
    Ok(q)
}

/// Collapses each community to a super-node named after its smallest member
/// case id. Internal edge weight (self-loops included) becomes the
/// super-node's self-loop; cross-community weights sum into super-edges.
pub fn aggregate(
    graph: &CitationGraph,
    partition: &Partition,
) -> Result<CitationGraph, CommunityError> {
    check_partition(graph, partition)?;
    let community = |idx: usize| {
        partition
            .community_of_case(graph.case_id(idx))
            .expect("node sets were checked")
    };

    let count = partition.community_count();
    let mut min_case: Vec<Option<&str>> = vec![None; count];
    for idx in 0..graph.node_count() {
        let c = community(idx);
        let case = graph.case_id(idx);
        if min_case[c].map_or(true, |m| case < m) {
            min_case[c] = Some(case);
        }
    }

    let mut out = CitationGraph::new();
    for c in 0..count {
        out.add_node(
            min_case[c].expect("every community has a member").to_string(),
            None,
            None,
        )
        .expect("community representatives are distinct");
    }
    for (u, v, w) in graph.edges() {
        out.add_edge(community(u), community(v), w, true)
            .expect("weights are non-negative");
    }
    Ok(out)
}

/// What a Louvain run produced: the flat partition, the incrementally
/// tracked modularity, and how much work it took.
#[derive(Debug, Clone)]
pub struct LouvainResult {
    pub partition: Partition,
    pub modularity: f64,
    pub levels: usize,
    pub passes: usize,
}

/// Backstop against a pathological non-terminating pass sequence; in
/// practice Louvain converges in a handful of passes.
const MAX_PASSES_PER_LEVEL: usize = 10_000;

/// Louvain community detection at resolution `gamma`.
///
/// Phase 1 visits nodes in a seed-shuffled order (reshuffled every pass)
/// and greedily moves each node to the neighbouring community with the
/// largest strictly positive modularity gain, lowest community id on ties.
/// Phase 2 collapses the result via [`aggregate`]. The two phases repeat
/// until a full phase 1 makes no move. Identical (graph, gamma, seed)
/// always yields the identical partition.
pub fn louvain(
    graph: &CitationGraph,
    gamma: f64,
    seed: u64,
) -> Result<LouvainResult, CommunityError> {
    if gamma <= 0.0 {
        return Err(CommunityError::BadResolution(gamma));
    }
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(CommunityError::EmptyGraph);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = graph.clone();
    // node_of[original node] = index of its super-node in `work`
    let mut node_of: Vec<usize> = (0..graph.node_count()).collect();

    // Q of the all-singletons start
    let mut q = {
        let mut q0 = 0.0;
        for idx in 0..work.node_count() {
            let k = work.weighted_degree(idx);
            q0 += work.self_loop(idx) / m - gamma * (k / (2.0 * m)).powi(2);
        }
        q0
    };

    let mut levels = 0;
    let mut passes_total = 0;
    loop {
        let (moves, delta_q, passes, comm) = local_moves(&work, gamma, m, &mut rng);
        passes_total += passes;
        if moves == 0 {
            break;
        }
        q += delta_q;
        levels += 1;

        let partition = Partition::new(&work, &comm)?;
        for slot in node_of.iter_mut() {
            *slot = partition.community_of(*slot);
        }
        // aggregate orders super-nodes by community id, so community ids
        // become node indices of the next level
        work = aggregate(&work, &partition)?;
    }

    let partition = Partition::new(graph, &node_of)?;
    Ok(LouvainResult {
        partition,
        modularity: q,
        levels,
        passes: passes_total,
    })
}

/// One Louvain phase 1 on `graph`. Returns (move count, total modularity
/// gain, passes run, final community per node).
fn local_moves(
    graph: &CitationGraph,
    gamma: f64,
    m: f64,
    rng: &mut ChaCha8Rng,
) -> (usize, f64, usize, Vec<usize>) {
    let n = graph.node_count();
    let mut comm: Vec<usize> = (0..n).collect();
    let degree: Vec<f64> = (0..n).map(|i| graph.weighted_degree(i)).collect();
    let mut s: Vec<f64> = degree.clone();

    let mut order: Vec<usize> = (0..n).collect();
    let mut total_moves = 0;
    let mut total_gain = 0.0;
    let mut passes = 0;

    loop {
        passes += 1;
        order.shuffle(rng);
        let mut moved_this_pass = false;

        for &i in &order {
            let old = comm[i];
            s[old] -= degree[i];

            // w_link[c] = weight from i to community c, self-loop excluded
            let mut w_link: BTreeMap<usize, f64> = BTreeMap::new();
            w_link.insert(old, 0.0);
            for &(j, w) in graph.neighbors(i) {
                if j != i {
                    *w_link.entry(comm[j]).or_insert(0.0) += w;
                }
            }

            let gain_of = |c: usize, w_ic: f64| {
                w_ic / m - gamma * degree[i] * s[c] / (2.0 * m * m)
            };
            let stay_gain = gain_of(old, w_link[&old]);

            let mut best_c = old;
            let mut best_gain = stay_gain;
            for (&c, &w_ic) in &w_link {
                let g = gain_of(c, w_ic);
                if g > best_gain || (g == best_gain && c < best_c) {
                    best_c = c;
                    best_gain = g;
                }
            }

            if best_c != old && best_gain > stay_gain {
                comm[i] = best_c;
                s[best_c] += degree[i];
                total_moves += 1;
                total_gain += best_gain - stay_gain;
                moved_this_pass = true;
            } else {
                s[old] += degree[i];
            }
        }

        if !moved_this_pass {
            break;
        }
        if passes >= MAX_PASSES_PER_LEVEL {
            log::warn!("local move phase hit the {MAX_PASSES_PER_LEVEL}-pass cap");
            break;
        }
    }
    (total_moves, total_gain, passes, comm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citegraph::GraphError;
    use crate::corpus::Language;

    fn graph_of(nodes: &[&str], edges: &[(&str, &str, f64)]) -> CitationGraph {
        let mut g = CitationGraph::new();
        for n in nodes {
            g.add_node(n.to_string(), Some(Language::En), None).unwrap();
        }
        for (a, b, w) in edges {
            let (u, v) = (g.node_index(a).unwrap(), g.node_index(b).unwrap());
            g.add_edge(u, v, *w, false).unwrap();
        }
        g
    }

    fn triangle() -> CitationGraph {
        graph_of(
            &["a", "b", "c"],
            &[("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)],
        )
    }

    #[test]
    fn one_community_has_zero_modularity() {
        let g = triangle();
        let p = Partition::new(&g, &[0, 0, 0]).unwrap();
        assert!(modularity(&g, &p, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn triangle_singletons_modularity() {
        let g = triangle();
        let p = Partition::singletons(&g).unwrap();
        let q = modularity(&g, &p, 1.0).unwrap();
        assert!((q - (-1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn two_triangles_with_bridge_modularity() {
        let g = graph_of(
            &["a", "b", "c", "d", "e", "f"],
            &[
                ("a", "b", 1.0),
                ("b", "c", 1.0),
                ("a", "c", 1.0),
                ("d", "e", 1.0),
                ("e", "f", 1.0),
                ("d", "f", 1.0),
                ("c", "d", 1.0),
            ],
        );
        let p = Partition::new(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        let q = modularity(&g, &p, 1.0).unwrap();
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn modularity_rejects_empty_graph_and_bad_gamma() {
        let mut g = CitationGraph::new();
        g.add_node("a", Some(Language::En), None).unwrap();
        let p = Partition::singletons(&g).unwrap();
        assert!(matches!(
            modularity(&g, &p, 1.0),
            Err(CommunityError::EmptyGraph)
        ));

        let g = triangle();
        let p = Partition::singletons(&g).unwrap();
        assert!(matches!(
            modularity(&g, &p, 0.0),
            Err(CommunityError::BadResolution(_))
        ));
    }

    #[test]
    fn modularity_rejects_partition_from_other_graph() {
        let g = triangle();
        let other = graph_of(&["x", "y"], &[("x", "y", 1.0)]);
        let p = Partition::singletons(&other).unwrap();
        assert!(matches!(
            modularity(&g, &p, 1.0),
            Err(CommunityError::AssignmentLength { .. })
        ));
    }

    #[test]
    fn partition_canonical_ids_follow_smallest_member() {
        let g = graph_of(&["d", "a", "c", "b"], &[("d", "a", 1.0), ("c", "b", 1.0)]);
        // raw labels: {d,a} -> 7, {c,b} -> 3
        let p = Partition::new(&g, &[7, 7, 3, 3]).unwrap();
        // community containing "a" must get id 0, the one with "b" id 1
        assert_eq!(p.community_of_case("a"), Some(0));
        assert_eq!(p.community_of_case("d"), Some(0));
        assert_eq!(p.community_of_case("b"), Some(1));
        assert_eq!(p.community_of_case("c"), Some(1));
        assert_eq!(p.sizes(), [2, 2]);
    }

    #[test]
    fn partition_tallies_match_hand_counts() {
        let g = graph_of(
            &["a", "b", "c"],
            &[("a", "b", 2.0), ("b", "c", 1.0)],
        );
        let p = Partition::new(&g, &[0, 0, 1]).unwrap();
        assert!((p.internal_weight(0) - 2.0).abs() < 1e-12);
        assert!((p.internal_weight(1) - 0.0).abs() < 1e-12);
        // degrees: a=2, b=3, c=1
        assert!((p.incident_weight(0) - 5.0).abs() < 1e-12);
        assert!((p.incident_weight(1) - 1.0).abs() < 1e-12);
        assert_eq!(p.members(0).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn aggregate_triangle_to_self_loop() {
        let g = triangle();
        let p = Partition::new(&g, &[0, 0, 0]).unwrap();
        let agg = aggregate(&g, &p).unwrap();
        assert_eq!(agg.node_count(), 1);
        assert_eq!(agg.edge_count(), 1);
        assert_eq!(agg.case_id(0), "a");
        assert!((agg.self_loop(0) - 3.0).abs() < 1e-12);
        // self-loop counts once in m, twice in degree
        assert!((agg.total_weight() - 3.0).abs() < 1e-12);
        assert!((agg.weighted_degree(0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_two_singletons_keeps_edge() {
        let g = graph_of(&["a", "b"], &[("a", "b", 2.0)]);
        let p = Partition::singletons(&g).unwrap();
        let agg = aggregate(&g, &p).unwrap();
        assert_eq!(agg.node_count(), 2);
        let (u, v) = (agg.node_index("a").unwrap(), agg.node_index("b").unwrap());
        assert_eq!(agg.edge_weight(u, v), Some(2.0));
    }

    #[test]
    fn aggregate_of_singleton_partition_is_isomorphic() {
        let g = graph_of(
            &["a", "b", "c"],
            &[("a", "b", 1.0), ("b", "c", 2.0)],
        );
        let p = Partition::singletons(&g).unwrap();
        let agg = aggregate(&g, &p).unwrap();
        assert_eq!(agg.node_count(), g.node_count());
        for (u, v, w) in g.edges() {
            let au = agg.node_index(g.case_id(u)).unwrap();
            let av = agg.node_index(g.case_id(v)).unwrap();
            assert_eq!(agg.edge_weight(au, av), Some(w));
        }
    }

    #[test]
    fn aggregate_preserves_total_weight_and_modularity() {
        let g = graph_of(
            &["a", "b", "c", "d", "e"],
            &[
                ("a", "b", 1.0),
                ("b", "c", 2.0),
                ("c", "a", 1.0),
                ("c", "d", 1.0),
                ("d", "e", 3.0),
            ],
        );
        let raw = [0, 0, 0, 1, 1];
        let p = Partition::new(&g, &raw).unwrap();
        let agg = aggregate(&g, &p).unwrap();
        assert!((agg.total_weight() - g.total_weight()).abs() < 1e-12);

        let coarse = Partition::singletons(&agg).unwrap();
        for gamma in [0.5, 1.0, 3.0] {
            let q_flat = modularity(&g, &p, gamma).unwrap();
            let q_coarse = modularity(&agg, &coarse, gamma).unwrap();
            assert!(
                (q_flat - q_coarse).abs() < 1e-9,
                "gamma {gamma}: {q_flat} vs {q_coarse}"
            );
        }
    }

    #[test]
    fn louvain_merges_single_edge_at_gamma_one() {
        let g = graph_of(&["a", "b"], &[("a", "b", 1.0)]);
        let result = louvain(&g, 1.0, 0).unwrap();
        assert_eq!(result.partition.community_count(), 1);
        assert!(result.modularity.abs() < 1e-12);
    }

    #[test]
    fn louvain_splits_single_edge_at_gamma_three() {
        let g = graph_of(&["a", "b"], &[("a", "b", 1.0)]);
        let result = louvain(&g, 3.0, 0).unwrap();
        assert_eq!(result.partition.community_count(), 2);
        assert!((result.modularity - (-1.5)).abs() < 1e-12);
    }

    #[test]
    fn louvain_recovers_ring_of_cliques() {
        // 4 cliques of 5 nodes, ring-connected by single bridges
        let mut g = CitationGraph::new();
        for i in 0..20 {
            g.add_node(format!("n{i:02}"), Some(Language::En), None)
                .unwrap();
        }
        for c in 0..4 {
            let base = c * 5;
            for i in base..base + 5 {
                for j in (i + 1)..base + 5 {
                    g.add_edge(i, j, 1.0, false).unwrap();
                }
            }
        }
        for c in 0..4 {
            let from = c * 5 + 4;
            let to = ((c + 1) % 4) * 5;
            g.add_edge(from, to, 1.0, false).unwrap();
        }

        for seed in 0..3 {
            let result = louvain(&g, 1.0, seed).unwrap();
            assert_eq!(result.partition.community_count(), 4, "seed {seed}");
            for c in 0..4 {
                let communities: std::collections::HashSet<usize> = (c * 5..c * 5 + 5)
                    .map(|i| result.partition.community_of(i))
                    .collect();
                assert_eq!(communities.len(), 1, "clique {c} split at seed {seed}");
            }
        }
    }

    #[test]
    fn louvain_tracked_q_matches_recompute() {
        let g = graph_of(
            &["a", "b", "c", "d", "e", "f", "g"],
            &[
                ("a", "b", 1.0),
                ("b", "c", 1.0),
                ("a", "c", 1.0),
                ("d", "e", 2.0),
                ("e", "f", 1.0),
                ("d", "f", 1.0),
                ("c", "d", 0.5),
                ("f", "g", 1.0),
            ],
        );
        for gamma in [0.7, 1.0, 2.0] {
            for seed in 0..4 {
                let result = louvain(&g, gamma, seed).unwrap();
                let q = modularity(&g, &result.partition, gamma).unwrap();
                assert!(
                    (q - result.modularity).abs() < 1e-9,
                    "gamma {gamma} seed {seed}: tracked {} vs recomputed {q}",
                    result.modularity
                );
                assert!(result.modularity >= -1e-12 + singleton_q(&g, gamma));
            }
        }
    }

    fn singleton_q(g: &CitationGraph, gamma: f64) -> f64 {
        let p = Partition::singletons(g).unwrap();
        modularity(g, &p, gamma).unwrap()
    }

    #[test]
    fn louvain_is_deterministic() {
        let g = graph_of(
            &["a", "b", "c", "d", "e"],
            &[
                ("a", "b", 1.0),
                ("b", "c", 1.0),
                ("c", "d", 1.0),
                ("d", "e", 1.0),
                ("e", "a", 1.0),
            ],
        );
        let r1 = louvain(&g, 1.0, 42).unwrap();
        let r2 = louvain(&g, 1.0, 42).unwrap();
        assert_eq!(r1.partition.assignment(), r2.partition.assignment());
        assert_eq!(r1.modularity, r2.modularity);
    }

    #[test]
    fn louvain_on_weighted_self_loop_graph() {
        // aggregated graphs carry self-loops; louvain must handle them
        let mut g = graph_of(&["a", "b"], &[("a", "b", 1.0)]);
        let a = g.node_index("a").unwrap();
        g.add_edge(a, a, 3.0, false).unwrap();
        let result = louvain(&g, 1.0, 1).unwrap();
        let q = modularity(&g, &result.partition, 1.0).unwrap();
        assert!((q - result.modularity).abs() < 1e-9);
    }

    #[test]
    fn louvain_rejects_edgeless_graph() {
        let mut g = CitationGraph::new();
        g.add_node("a", Some(Language::En), None).unwrap();
        assert!(matches!(louvain(&g, 1.0, 0), Err(CommunityError::EmptyGraph)));
    }

    #[test]
    fn higher_resolution_never_coarsens_the_fixture() {
        let g = graph_of(
            &["a", "b", "c", "d", "e", "f"],
            &[
                ("a", "b", 1.0),
                ("b", "c", 1.0),
                ("a", "c", 1.0),
                ("d", "e", 1.0),
                ("e", "f", 1.0),
                ("d", "f", 1.0),
                ("c", "d", 1.0),
            ],
        );
        let at = |gamma: f64| louvain(&g, gamma, 0).unwrap().partition.community_count();
        assert!(at(3.0) >= at(1.0));
    }

    #[test]
    fn negative_weights_are_rejected_upstream() {
        let mut g = graph_of(&["a", "b"], &[]);
        assert!(matches!(
            g.add_edge(0, 1, -1.0, false),
            Err(GraphError::NegativeWeight { .. })
        ));
    }
}
