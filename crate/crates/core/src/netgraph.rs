//! Acyclic directed multigraph model of a coded network: sources, receivers,
//! per-node in/out edge sets, the line-graph incidence that shapes the local
//! mixing matrix, unit-capacity min-cut, and the complete-DAG generator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("graph contains a cycle")]
    CycleDetected,
    #[error("no source nodes given")]
    NoSources,
    #[error("no receiver nodes given")]
    NoReceivers,
    #[error("receiver {node} is not reachable from any source")]
    UnreachableReceiver { node: NodeId },
    #[error("need at least {min} nodes, got {n}")]
    TooFewNodes { n: usize, min: usize },
    #[error("order labels must be a permutation of 1..={n}")]
    BadOrderLabels { n: usize },
    #[error("min-cut endpoints must be distinct nodes")]
    SameEndpoints,
}

/// A directed edge `tail -> head`. The edge's position in the edge list is
/// its id and is the canonical row/column index of every coding matrix.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
}

/// JSON graph file. Field order and edge order are preserved exactly.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(NodeId, NodeId)>,
    pub sources: Vec<NodeId>,
    pub receivers: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    /// Maps source process l to the source node emitting it; needed only
    /// when there is more than one source node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_map: Option<Vec<NodeId>>,
}

/// Validated acyclic directed multigraph with designated sources and
/// receivers. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Network {
    node_count: usize,
    edges: Vec<Edge>,
    sources: Vec<NodeId>,
    receivers: Vec<NodeId>,
    orders: Option<Vec<usize>>,
    process_map: Option<Vec<NodeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
    topo_position: Vec<usize>,
}

impl Network {
    pub fn build(
        n: usize,
        edges: Vec<(NodeId, NodeId)>,
        sources: Vec<NodeId>,
        receivers: Vec<NodeId>,
    ) -> Result<Self, GraphError> {
        Self::build_full(n, edges, sources, receivers, None, None)
    }

    pub fn build_full(
        n: usize,
        edge_pairs: Vec<(NodeId, NodeId)>,
        sources: Vec<NodeId>,
        receivers: Vec<NodeId>,
        orders: Option<Vec<usize>>,
        process_map: Option<Vec<NodeId>>,
    ) -> Result<Self, GraphError> {
        if edge_pairs.is_empty() {
            return Err(GraphError::EmptyEdgeList);
        }
        if sources.is_empty() {
            return Err(GraphError::NoSources);
        }
        if receivers.is_empty() {
            return Err(GraphError::NoReceivers);
        }
        let check_node = |node: NodeId| {
            if node >= n {
                Err(GraphError::NodeOutOfRange { node, n })
            } else {
                Ok(())
            }
        };
        for &(t, h) in &edge_pairs {
            check_node(t)?;
            check_node(h)?;
        }
        for &v in sources
            .iter()
            .chain(&receivers)
            .chain(process_map.iter().flatten())
        {
            check_node(v)?;
        }
        if let Some(ref ord) = orders {
            let mut seen = vec![false; n + 1];
            let ok = ord.len() == n
                && ord
                    .iter()
                    .all(|&o| (1..=n).contains(&o) && !std::mem::replace(&mut seen[o], true));
            if !ok {
                return Err(GraphError::BadOrderLabels { n });
            }
        }

        let edges: Vec<Edge> = edge_pairs
            .into_iter()
            .map(|(tail, head)| Edge { tail, head })
            .collect();
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out_edges[e.tail].push(id);
            in_edges[e.head].push(id);
        }

        // Kahn's algorithm: both the acyclicity proof and the topological
        // certificate used to order matrix computations.
        let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
        let mut queue: Vec<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = queue.pop() {
            topo.push(v);
            for &e in &out_edges[v] {
                let h = edges[e].head;
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    queue.push(h);
                }
            }
        }
        if topo.len() != n {
            return Err(GraphError::CycleDetected);
        }
        let mut topo_position = vec![0; n];
        for (pos, &v) in topo.iter().enumerate() {
            topo_position[v] = pos;
        }

        // every receiver reachable from some source
        let mut reach = vec![false; n];
        let mut stack: Vec<NodeId> = sources.clone();
        for &s in &sources {
            reach[s] = true;
        }
        while let Some(v) = stack.pop() {
            for &e in &out_edges[v] {
                let h = edges[e].head;
                if !reach[h] {
                    reach[h] = true;
                    stack.push(h);
                }
            }
        }
        if let Some(&r) = receivers.iter().find(|&&r| !reach[r]) {
            return Err(GraphError::UnreachableReceiver { node: r });
        }

        Ok(Self {
            node_count: n,
            edges,
            sources,
            receivers,
            orders,
            process_map,
            in_edges,
            out_edges,
            topo_position,
        })
    }

    /// Complete acyclic directed graph on `n` nodes: assign random order
    /// labels 1..=n (a seeded shuffle of the node ids), then connect every
    /// node to every node of higher order. The unique only-outgoing node is
    /// the source and the unique only-incoming node is the sink/receiver.
    pub fn complete_dag(n: usize, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes { n, min: 2 });
        }
        let mut by_order: Vec<NodeId> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        by_order.shuffle(&mut rng);
        let mut orders = vec![0; n];
        for (idx, &v) in by_order.iter().enumerate() {
            orders[v] = idx + 1;
        }
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push((by_order[i], by_order[j]));
            }
        }
        Self::build_full(
            n,
            edges,
            vec![by_order[0]],
            vec![by_order[n - 1]],
            Some(orders),
            None,
        )
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn receivers(&self) -> &[NodeId] {
        &self.receivers
    }

    /// Incoming edge ids of `v` in ascending edge order.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn delta_in(&self, v: NodeId) -> usize {
        self.in_edges[v].len()
    }

    pub fn delta_out(&self, v: NodeId) -> usize {
        self.out_edges[v].len()
    }

    pub fn order(&self, v: NodeId) -> Option<usize> {
        self.orders.as_ref().map(|o| o[v])
    }

    pub fn orders(&self) -> Option<&[usize]> {
        self.orders.as_deref()
    }

    pub fn process_map(&self) -> Option<&[NodeId]> {
        self.process_map.as_deref()
    }

    /// A relaying node: at least one incoming and one outgoing edge, and
    /// neither a source nor a receiver. These are the eavesdroppers the
    /// security report ranges over.
    pub fn is_intermediate(&self, v: NodeId) -> bool {
        self.delta_in(v) >= 1
            && self.delta_out(v) >= 1
            && !self.sources.contains(&v)
            && !self.receivers.contains(&v)
    }

    pub fn intermediate_nodes(&self) -> Vec<NodeId> {
        (0..self.node_count)
            .filter(|&v| self.is_intermediate(v))
            .collect()
    }

    /// Edge ids sorted so that every edge appears after all edges feeding it
    /// (tail's topological position, then id). This is the order in which
    /// transfer-matrix columns can be computed by forward substitution.
    pub fn topo_edge_order(&self) -> Vec<EdgeId> {
        let mut ids: Vec<EdgeId> = (0..self.edges.len()).collect();
        ids.sort_by_key(|&e| (self.topo_position[self.edges[e].tail], e));
        ids
    }

    /// The line-graph incidence relation: ordered pairs (e', e) with
    /// head(e') = tail(e), exactly the allowed support of the mixing matrix F.
    pub fn line_graph_adjacency(&self) -> LineGraphAdjacency {
        let mut pairs = Vec::new();
        for (e, edge) in self.edges.iter().enumerate() {
            for &ep in &self.in_edges[edge.tail] {
                pairs.push((ep, e));
            }
        }
        pairs.sort_unstable();
        LineGraphAdjacency {
            pairs,
            topo_edges: self.topo_edge_order(),
        }
    }

    /// Value of a maximum flow (= minimum edge cut) from `source` to `sink`
    /// with unit capacity per edge. Parallel edges add capacity. Returns 0
    /// for disconnected pairs.
    pub fn min_cut(&self, source: NodeId, sink: NodeId) -> Result<usize, GraphError> {
        if source >= self.node_count {
            return Err(GraphError::NodeOutOfRange {
                node: source,
                n: self.node_count,
            });
        }
        if sink >= self.node_count {
            return Err(GraphError::NodeOutOfRange {
                node: sink,
                n: self.node_count,
            });
        }
        if source == sink {
            return Err(GraphError::SameEndpoints);
        }
        let arcs: Vec<(usize, usize, u64)> =
            self.edges.iter().map(|e| (e.tail, e.head, 1)).collect();
        Ok(max_flow(self.node_count, &arcs, source, sink) as usize)
    }

    /// Largest feasible number of source processes: the minimum over
    /// receivers of the min-cut from the source set. Multiple sources are
    /// joined through a virtual super-source.
    pub fn feasible_rate(&self) -> usize {
        let (n, arcs, s) = if self.sources.len() == 1 {
            (
                self.node_count,
                self.edges
                    .iter()
                    .map(|e| (e.tail, e.head, 1u64))
                    .collect::<Vec<_>>(),
                self.sources[0],
            )
        } else {
            let virt = self.node_count;
            let mut arcs: Vec<(usize, usize, u64)> =
                self.edges.iter().map(|e| (e.tail, e.head, 1)).collect();
            let inf = self.edges.len() as u64 + 1;
            for &s in &self.sources {
                arcs.push((virt, s, inf));
            }
            (self.node_count + 1, arcs, virt)
        };
        self.receivers
            .iter()
            .map(|&r| max_flow(n, &arcs, s, r) as usize)
            .min()
            .unwrap_or(0)
    }

    pub fn to_graph_file(&self) -> GraphFile {
        GraphFile {
            n: self.node_count,
            edges: self.edges.iter().map(|e| (e.tail, e.head)).collect(),
            sources: self.sources.clone(),
            receivers: self.receivers.clone(),
            orders: self.orders.clone(),
            process_map: self.process_map.clone(),
        }
    }

    pub fn from_graph_file(file: GraphFile) -> Result<Self, GraphError> {
        Self::build_full(
            file.n,
            file.edges,
            file.sources,
            file.receivers,
            file.orders,
            file.process_map,
        )
    }
}

/// Sparsity pattern of the mixing matrix F plus the topological edge order
/// certifying that the relation is acyclic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineGraphAdjacency {
    pairs: Vec<(EdgeId, EdgeId)>,
    topo_edges: Vec<EdgeId>,
}

impl LineGraphAdjacency {
    /// Ordered pairs (feeder e', fed e), sorted.
    pub fn pairs(&self) -> &[(EdgeId, EdgeId)] {
        &self.pairs
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn topo_edges(&self) -> &[EdgeId] {
        &self.topo_edges
    }

    pub fn contains(&self, feeder: EdgeId, fed: EdgeId) -> bool {
        self.pairs.binary_search(&(feeder, fed)).is_ok()
    }
}

/// Edmonds-Karp max flow on a directed arc list with integer capacities.
fn max_flow(n: usize, arcs: &[(usize, usize, u64)], source: usize, sink: usize) -> u64 {
    // forward arc 2i, residual arc 2i+1
    let mut to = Vec::with_capacity(arcs.len() * 2);
    let mut cap = Vec::with_capacity(arcs.len() * 2);
    let mut adj = vec![Vec::new(); n];
    for &(t, h, c) in arcs {
        adj[t].push(to.len());
        to.push(h);
        cap.push(c);
        adj[h].push(to.len());
        to.push(t);
        cap.push(0);
    }
    let mut flow = 0;
    loop {
        let mut prev_arc = vec![usize::MAX; n];
        let mut visited = vec![false; n];
        visited[source] = true;
        let mut queue = std::collections::VecDeque::from([source]);
        'bfs: while let Some(v) = queue.pop_front() {
            for &a in &adj[v] {
                let w = to[a];
                if !visited[w] && cap[a] > 0 {
                    visited[w] = true;
                    prev_arc[w] = a;
                    if w == sink {
                        break 'bfs;
                    }
                    queue.push_back(w);
                }
            }
        }
        if !visited[sink] {
            return flow;
        }
        let mut bottleneck = u64::MAX;
        let mut v = sink;
        while v != source {
            let a = prev_arc[v];
            bottleneck = bottleneck.min(cap[a]);
            v = to[a ^ 1];
        }
        let mut v = sink;
        while v != source {
            let a = prev_arc[v];
            cap[a] -= bottleneck;
            cap[a ^ 1] += bottleneck;
            v = to[a ^ 1];
        }
        flow += bottleneck;
    }
}
