//! Undirected simple graphs with symmetric-arc indexing, the graph families
//! used throughout the crate, and the wedge composite that marks a component.
//!
//! Every undirected edge `{u, v}` is stored as the ordered arc pair
//! `u -> v`, `v -> u` at consecutive indices `2e`, `2e + 1`, so the inverse
//! of arc `a` is always `a ^ 1`. Walk states live on arcs; the coin acts on
//! arcs grouped by terminus, so the constructor precomputes that grouping
//! together with the gather permutation used by the shift.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// Optional per-vertex labels attached by the structured builders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexLabels {
    /// Sorted `k`-subsets of `{0, .., n-1}`, one per vertex, in vertex order.
    Subsets {
        /// Size of the ground set the subsets are drawn from.
        n: u32,
        /// The subsets themselves, each strictly increasing.
        sets: Vec<Vec<u32>>,
    },
    /// Hypercube coordinates as bit patterns, one per vertex.
    Bits(Vec<u64>),
}

/// A connected simple graph with symmetric-arc indexing.
///
/// Arcs `2e` and `2e + 1` are the two orientations of edge `e`; the inverse
/// arc is obtained by flipping the lowest index bit. Incoming arcs are
/// pre-grouped by terminus because the Grover coin mixes exactly those
/// groups.
#[derive(Debug, Clone)]
pub struct Graph {
    vertex_count: usize,
    /// Origin vertex per arc.
    origins: Vec<u32>,
    /// Terminus vertex per arc.
    termini: Vec<u32>,
    /// Arc ids grouped by terminus: the block for vertex `v` is
    /// `in_arcs[in_offsets[v]..in_offsets[v + 1]]`.
    in_arcs: Vec<u32>,
    /// Block boundaries into `in_arcs`, length `vertex_count + 1`.
    in_offsets: Vec<u32>,
    /// For arc `b`, the position of `b^{-1}` inside `in_arcs`; the shift
    /// reads the coined amplitude of `b^{-1}` from exactly that slot.
    shift_gather: Vec<u32>,
    labels: Option<VertexLabels>,
}

impl Graph {
    /// Builds a graph from an explicit edge list.
    ///
    /// Rejects self-loops, duplicate edges, out-of-range endpoints, empty
    /// edge lists, and disconnected graphs. Edge order is preserved, which
    /// fixes the arc indexing.
    pub fn from_edges(
        vertex_count: usize,
        edges: &[(usize, usize)],
        labels: Option<VertexLabels>,
    ) -> Result<Graph> {
        if vertex_count == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        if edges.is_empty() {
            return Err(Error::invalid("graph needs at least one edge"));
        }
        if vertex_count > u32::MAX as usize / 2 || edges.len() > u32::MAX as usize / 2 {
            return Err(Error::SizeCap(format!(
                "graph with {} vertices / {} edges exceeds the 32-bit arc index space",
                vertex_count,
                edges.len()
            )));
        }
        if let Some(labels) = &labels {
            let len = match labels {
                VertexLabels::Subsets { sets, .. } => sets.len(),
                VertexLabels::Bits(bits) => bits.len(),
            };
            if len != vertex_count {
                return Err(Error::invalid(format!(
                    "label count {len} does not match vertex count {vertex_count}"
                )));
            }
        }

        let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{vertex_count}"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate edge in edge list"));
        }

        let arc_count = 2 * edges.len();
        let mut origins = vec![0u32; arc_count];
        let mut termini = vec![0u32; arc_count];
        for (e, &(u, v)) in edges.iter().enumerate() {
            origins[2 * e] = u as u32;
            termini[2 * e] = v as u32;
            origins[2 * e + 1] = v as u32;
            termini[2 * e + 1] = u as u32;
        }

        // Group incoming arcs by terminus with a counting sort; within a
        // group arcs appear in increasing arc id, which keeps everything
        // downstream deterministic.
        let mut in_offsets = vec![0u32; vertex_count + 1];
        for &t in &termini {
            in_offsets[t as usize + 1] += 1;
        }
        for v in 0..vertex_count {
            in_offsets[v + 1] += in_offsets[v];
        }
        let mut cursor: Vec<u32> = in_offsets[..vertex_count].to_vec();
        let mut in_arcs = vec![0u32; arc_count];
        let mut position = vec![0u32; arc_count];
        for (a, &t) in termini.iter().enumerate() {
            let slot = cursor[t as usize];
            in_arcs[slot as usize] = a as u32;
            position[a] = slot;
            cursor[t as usize] += 1;
        }
        let shift_gather: Vec<u32> = (0..arc_count).map(|a| position[a ^ 1]).collect();

        let graph = Graph {
            vertex_count,
            origins,
            termini,
            in_arcs,
            in_offsets,
            shift_gather,
            labels,
        };
        if graph.in_offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("graph has an isolated vertex"));
        }
        if !graph.is_connected() {
            return Err(Error::invalid("graph is not connected"));
        }
        Ok(graph)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count];
        let mut queue = vec![0usize];
        seen[0] = true;
        let mut reached = 1usize;
        while let Some(v) = queue.pop() {
            for &a in self.arcs_into(v) {
                let u = self.origins[a as usize] as usize;
                if !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    queue.push(u);
                }
            }
        }
        reached == self.vertex_count
    }

    /// Number of vertices.
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Number of symmetric arcs (twice the edge count).
    pub fn arc_count(&self) -> usize {
        self.origins.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.origins.len() / 2
    }

    /// Origin vertex of an arc.
    #[inline]
    pub fn origin(&self, arc: usize) -> usize {
        self.origins[arc] as usize
    }

    /// Terminus vertex of an arc.
    #[inline]
    pub fn terminus(&self, arc: usize) -> usize {
        self.termini[arc] as usize
    }

    /// The reversed arc.
    #[inline]
    pub fn inverse(arc: usize) -> usize {
        arc ^ 1
    }

    /// Degree of a vertex.
    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        (self.in_offsets[v + 1] - self.in_offsets[v]) as usize
    }

    /// Arc ids whose terminus is `v`, in increasing arc id.
    #[inline]
    pub fn arcs_into(&self, v: usize) -> &[u32] {
        &self.in_arcs[self.in_offsets[v] as usize..self.in_offsets[v + 1] as usize]
    }

    /// Neighbours of `v` (unordered; one entry per incident edge).
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.arcs_into(v).iter().map(|&a| self.origins[a as usize] as usize)
    }

    /// Flat terminus-grouped arc array; block `v` spans
    /// `in_offsets()[v]..in_offsets()[v + 1]`. Low-level walk plumbing.
    pub fn in_arcs_flat(&self) -> &[u32] {
        &self.in_arcs
    }

    /// Block boundaries for [`Graph::in_arcs_flat`].
    pub fn in_offsets(&self) -> &[u32] {
        &self.in_offsets
    }

    /// For each arc `b`, the position of `b^{-1}` in the terminus-grouped
    /// order. Low-level walk plumbing.
    pub fn shift_gather(&self) -> &[u32] {
        &self.shift_gather
    }

    /// Vertex labels, if the builder attached any.
    pub fn labels(&self) -> Option<&VertexLabels> {
        self.labels.as_ref()
    }

    /// Writes the edge list as one `u v` pair per line (`u < v`), in edge
    /// order.
    pub fn write_edge_list(&self, out: &mut impl Write) -> io::Result<()> {
        for e in 0..self.edge_count() {
            let (u, v) = (self.origins[2 * e], self.termini[2 * e]);
            writeln!(out, "{} {}", u.min(v), u.max(v))?;
        }
        Ok(())
    }
}

/// Exact binomial coefficient, or an error if it exceeds `u64`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Multiply first, divide after: the running product of `i + 1`
        // consecutive ratios is always an integer.
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::SizeCap(format!("binomial({n}, {k}) overflows")))?
            / (i as u128 + 1);
    }
    u64::try_from(acc).map_err(|_| Error::SizeCap(format!("binomial({n}, {k}) overflows")))
}

/// Position of a sorted subset in colexicographic order:
/// `rank(s) = sum_i C(s[i], i + 1)`.
fn colex_rank(set: &[u32]) -> u64 {
    set.iter()
        .enumerate()
        .map(|(i, &s)| binomial(s as u64, i as u64 + 1).expect("rank below C(n, k)"))
        .sum()
}

/// All `k`-subsets of `{0, .., n-1}` in colexicographic order.
fn combinations_colex(n: usize, k: usize) -> Vec<Vec<u32>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for top in (k - 1)..n {
        for mut set in combinations_colex(top, k - 1) {
            set.push(top as u32);
            out.push(set);
        }
    }
    out
}

/// Builds the Johnson graph: vertices are the `k`-subsets of an `n`-element
/// ground set, adjacent exactly when the subsets share `k - 1` elements.
///
/// Accepts `1 <= k <= n - 1`; `k = 1` gives the complete graph on `n`
/// vertices. Vertices are ordered colexicographically and carry their subset
/// as a label.
pub fn johnson(n: usize, k: usize) -> Result<Graph> {
    if k < 1 || n < k + 1 {
        return Err(Error::invalid(format!(
            "Johnson graph needs 1 <= k <= n - 1, got n = {n}, k = {k}"
        )));
    }
    let count = binomial(n as u64, k as u64)?;
    let vertex_count = usize::try_from(count)
        .map_err(|_| Error::SizeCap(format!("Johnson graph on C({n}, {k}) vertices")))?;

    let sets = combinations_colex(n, k);
    debug_assert_eq!(sets.len(), vertex_count);
    debug_assert!(sets.iter().enumerate().all(|(r, s)| colex_rank(s) == r as u64));

    let degree = k * (n - k);
    let mut edges = Vec::with_capacity(vertex_count * degree / 2);
    let mut in_set = vec![false; n];
    for (r, set) in sets.iter().enumerate() {
        for &x in set {
            in_set[x as usize] = true;
        }
        // Swap one element out and one in; rank the neighbour directly from
        // the modified sorted subset.
        let mut scratch = set.clone();
        for drop_pos in 0..k {
            for add in 0..n as u32 {
                if in_set[add as usize] {
                    continue;
                }
                let dropped = scratch[drop_pos];
                scratch[drop_pos] = add;
                scratch.sort_unstable();
                let other = colex_rank(&scratch) as usize;
                if r < other {
                    edges.push((r, other));
                }
                scratch.copy_from_slice(set);
                let _ = dropped;
            }
        }
        for &x in set {
            in_set[x as usize] = false;
        }
    }
    edges.sort_unstable();

    Graph::from_edges(
        vertex_count,
        &edges,
        Some(VertexLabels::Subsets { n: n as u32, sets }),
    )
}

/// Builds the star with `m >= 1` leaves; vertex `0` is the centre.
pub fn star(m: usize) -> Result<Graph> {
    if m < 1 {
        return Err(Error::invalid("star needs at least one leaf"));
    }
    let edges: Vec<(usize, usize)> = (1..=m).map(|leaf| (0, leaf)).collect();
    Graph::from_edges(m + 1, &edges, None)
}

/// Builds the `dim`-dimensional hypercube on `2^dim` vertices; vertex ids are
/// the coordinate bit patterns.
pub fn hypercube(dim: usize) -> Result<Graph> {
    if dim < 1 || dim >= 20 {
        return Err(Error::invalid(format!(
            "hypercube dimension must be in 1..20, got {dim}"
        )));
    }
    let vertex_count = 1usize << dim;
    let mut edges = Vec::with_capacity(vertex_count * dim / 2);
    for v in 0..vertex_count {
        for bit in 0..dim {
            if v & (1 << bit) == 0 {
                edges.push((v, v | (1 << bit)));
            }
        }
    }
    let labels = VertexLabels::Bits((0..vertex_count as u64).collect());
    Graph::from_edges(vertex_count, &edges, Some(labels))
}

/// Builds the complete graph on `n >= 2` vertices.
pub fn complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid("complete graph needs at least two vertices"));
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, &edges, None)
}

/// Which component of a wedge an arc came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcSide {
    /// The base component (where the walker starts).
    Base,
    /// The attached, marked component (where it is detected).
    Target,
}

/// Johnson-star parameters recorded by [`WedgeGraph::johnson_star`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JohnsonParams {
    /// Ground-set size of the Johnson base.
    pub n: usize,
    /// Subset size of the Johnson base.
    pub k: usize,
    /// Number of star leaves attached at the join vertex.
    pub m: usize,
}

/// A wedge (one-vertex identification) of two graphs, with the attached
/// component marked as the detection target.
///
/// The base keeps its vertex and arc ids; attached vertices follow, and the
/// join vertex of the attachment is identified with the chosen base vertex.
/// All vertices that came from the attachment except the join itself form
/// the marked set, where the walk's coin acts as `-I`.
#[derive(Debug, Clone)]
pub struct WedgeGraph {
    graph: Graph,
    join_vertex: Option<usize>,
    /// Arcs below this index belong to the base component.
    split: usize,
    is_target: Vec<bool>,
    target_vertices: Vec<u32>,
    base_labels: Option<VertexLabels>,
    johnson: Option<JohnsonParams>,
}

impl WedgeGraph {
    /// Glues `attach` onto `base` by identifying `attach_vertex` with
    /// `base_vertex`, marking the rest of `attach` as the target set.
    pub fn wedge(
        base: Graph,
        base_vertex: usize,
        attach: Graph,
        attach_vertex: usize,
    ) -> Result<WedgeGraph> {
        if base_vertex >= base.vertex_count() {
            return Err(Error::invalid(format!(
                "join vertex {base_vertex} outside the base graph"
            )));
        }
        if attach_vertex >= attach.vertex_count() {
            return Err(Error::invalid(format!(
                "join vertex {attach_vertex} outside the attached graph"
            )));
        }

        let base_n = base.vertex_count();
        // Attached vertex w maps to base_vertex if it is the join, else to a
        // fresh id; ids stay compact by skipping the join slot.
        let map = |w: usize| -> usize {
            use std::cmp::Ordering::*;
            match w.cmp(&attach_vertex) {
                Equal => base_vertex,
                Less => base_n + w,
                Greater => base_n + w - 1,
            }
        };

        let vertex_count = base_n + attach.vertex_count() - 1;
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(base.edge_count() + attach.edge_count());
        for e in 0..base.edge_count() {
            edges.push((base.origin(2 * e), base.terminus(2 * e)));
        }
        for e in 0..attach.edge_count() {
            edges.push((map(attach.origin(2 * e)), map(attach.terminus(2 * e))));
        }
        let split = 2 * base.edge_count();

        let mut is_target = vec![false; vertex_count];
        for v in base_n..vertex_count {
            is_target[v] = true;
        }
        let target_vertices: Vec<u32> = (base_n..vertex_count).map(|v| v as u32).collect();

        let base_labels = base.labels;
        let graph = Graph::from_edges(vertex_count, &edges, None)?;
        Ok(WedgeGraph {
            graph,
            join_vertex: Some(base_vertex),
            split,
            is_target,
            target_vertices,
            base_labels,
            johnson: None,
        })
    }

    /// Wraps a plain graph as a wedge with an empty target set, so the same
    /// walk engine runs closed (undisturbed) evolutions.
    pub fn from_graph(graph: Graph) -> WedgeGraph {
        let vertex_count = graph.vertex_count();
        let split = graph.arc_count();
        let base_labels = graph.labels.clone();
        WedgeGraph {
            graph,
            join_vertex: None,
            split,
            is_target: vec![false; vertex_count],
            target_vertices: Vec::new(),
            base_labels,
            johnson: None,
        }
    }

    /// The Johnson-star composite: a star with `m` leaves glued to the
    /// Johnson graph at the vertex labelled `{0, .., k-1}`.
    pub fn johnson_star(n: usize, k: usize, m: usize) -> Result<WedgeGraph> {
        if m < 1 {
            return Err(Error::invalid("johnson_star needs m >= 1"));
        }
        let base = johnson(n, k)?;
        let mut wedge = WedgeGraph::wedge(base, 0, star(m)?, 0)?;
        wedge.johnson = Some(JohnsonParams { n, k, m });
        Ok(wedge)
    }

    /// A star with `m` leaves glued to the `dim`-dimensional hypercube at the
    /// all-zero vertex.
    pub fn hypercube_star(dim: usize, m: usize) -> Result<WedgeGraph> {
        if m < 1 {
            return Err(Error::invalid("hypercube_star needs m >= 1"));
        }
        WedgeGraph::wedge(hypercube(dim)?, 0, star(m)?, 0)
    }

    /// Two complete graphs sharing a single vertex.
    pub fn complete_wedge(base_n: usize, attach_n: usize) -> Result<WedgeGraph> {
        WedgeGraph::wedge(complete(base_n)?, 0, complete(attach_n)?, 0)
    }

    /// The merged graph.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Number of vertices of the merged graph.
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Number of symmetric arcs of the merged graph.
    pub fn arc_count(&self) -> usize {
        self.graph.arc_count()
    }

    /// The identified vertex, when built as a genuine wedge.
    pub fn join_vertex(&self) -> Option<usize> {
        self.join_vertex
    }

    /// True when `v` belongs to the marked (attached) component.
    #[inline]
    pub fn is_target(&self, v: usize) -> bool {
        self.is_target[v]
    }

    /// Marker flags for all vertices, indexed by vertex id.
    pub fn target_flags(&self) -> &[bool] {
        &self.is_target
    }

    /// The marked vertices.
    pub fn target_vertices(&self) -> &[u32] {
        &self.target_vertices
    }

    /// Arc ids of the attached component (both orientations of its edges).
    pub fn target_arcs(&self) -> std::ops::Range<usize> {
        self.split..self.graph.arc_count()
    }

    /// Arc ids of the base component.
    pub fn base_arcs(&self) -> std::ops::Range<usize> {
        0..self.split
    }

    /// Which component an arc belongs to.
    pub fn arc_side(&self, arc: usize) -> ArcSide {
        if arc < self.split {
            ArcSide::Base
        } else {
            ArcSide::Target
        }
    }

    /// Labels of the base component's vertices (ids are preserved by the
    /// wedge, so base vertex `v` is merged vertex `v`).
    pub fn base_labels(&self) -> Option<&VertexLabels> {
        self.base_labels.as_ref()
    }

    /// Johnson-star parameters when built by [`WedgeGraph::johnson_star`].
    pub fn johnson_params(&self) -> Option<JohnsonParams> {
        self.johnson
    }

    /// Writes the merged graph's edge list, one `u v` per line.
    pub fn write_edge_list(&self, out: &mut impl Write) -> io::Result<()> {
        self.graph.write_edge_list(out)
    }
}
