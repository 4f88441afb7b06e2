//! Single-relation directed graphs: tree construction, transitive closure,
//! the three evaluation partitions, complement sampling, and edge-list files.
//!
//! A knowledge base with one relation is just a directed graph over a dense
//! vertex range `[0, V)`. Closing it transitively turns the relation into a
//! strict partial order; everything downstream (training sets, 0-1
//! evaluation) is phrased in terms of the closed edge set `E`, its complement
//! `E^c` over all ordered pairs (self-pairs included), and the reversal set
//! `E^rev`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense entity index in `[0, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for EntityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// The two relation slots every experiment uses: an ordered pair is either
/// related (`Present`) or explicitly unrelated (`Absent`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Absent,
    Present,
}

impl Relation {
    pub const ALL: [Relation; 2] = [Relation::Absent, Relation::Present];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Relation::Absent => 0,
            Relation::Present => 1,
        }
    }
}

/// A (subject, relation, object) fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub sub: EntityId,
    pub rel: Relation,
    pub obj: EntityId,
}

impl Triple {
    /// Presence triples must connect two distinct entities.
    pub fn new(sub: EntityId, rel: Relation, obj: EntityId) -> Result<Self> {
        if rel == Relation::Present && sub == obj {
            return Err(Error::InvalidArgument(format!(
                "presence triple with identical endpoints ({sub})"
            )));
        }
        Ok(Self { sub, rel, obj })
    }
}

/// A directed graph over `[0, V)` with no self-loops and no duplicate edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    num_vertices: usize,
    edges: BTreeSet<(EntityId, EntityId)>,
}

impl DirectedGraph {
    pub fn new(num_vertices: usize) -> Result<Self> {
        if num_vertices == 0 || num_vertices > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "vertex count must be in [1, {}], got {num_vertices}",
                u32::MAX
            )));
        }
        Ok(Self {
            num_vertices,
            edges: BTreeSet::new(),
        })
    }

    pub fn from_edges<I>(num_vertices: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (EntityId, EntityId)>,
    {
        let mut g = Self::new(num_vertices)?;
        for (sub, obj) in edges {
            g.add_edge(sub, obj)?;
        }
        Ok(g)
    }

    /// Inserts an edge; returns `false` if it was already present.
    pub fn add_edge(&mut self, sub: EntityId, obj: EntityId) -> Result<bool> {
        if sub == obj {
            return Err(Error::InvalidArgument(format!("self-loop at vertex {sub}")));
        }
        if sub.index() >= self.num_vertices || obj.index() >= self.num_vertices {
            return Err(Error::InvalidArgument(format!(
                "edge ({sub},{obj}) out of range for V={}",
                self.num_vertices
            )));
        }
        Ok(self.edges.insert((sub, obj)))
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn has_edge(&self, sub: EntityId, obj: EntityId) -> bool {
        self.edges.contains(&(sub, obj))
    }

    /// Edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_set(&self) -> &BTreeSet<(EntityId, EntityId)> {
        &self.edges
    }

    /// Out-neighbor lists, sorted, one per vertex.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_vertices];
        for &(s, o) in &self.edges {
            out[s.index()].push(o.0);
        }
        out
    }

    /// In-neighbor lists, sorted, one per vertex.
    pub fn reverse_adjacency(&self) -> Vec<Vec<u32>> {
        let mut inn = vec![Vec::new(); self.num_vertices];
        for &(s, o) in &self.edges {
            inn[o.index()].push(s.0);
        }
        for list in &mut inn {
            list.sort_unstable();
        }
        inn
    }

    /// Kahn topological sort; `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<u32>> {
        let out = self.adjacency();
        let mut indeg = vec![0usize; self.num_vertices];
        for list in &out {
            for &o in list {
                indeg[o as usize] += 1;
            }
        }
        let mut queue: Vec<u32> = (0..self.num_vertices as u32)
            .filter(|&v| indeg[v as usize] == 0)
            .collect();
        let mut order = Vec::with_capacity(self.num_vertices);
        while let Some(v) = queue.pop() {
            order.push(v);
            for &o in &out[v as usize] {
                indeg[o as usize] -= 1;
                if indeg[o as usize] == 0 {
                    queue.push(o);
                }
            }
        }
        (order.len() == self.num_vertices).then_some(order)
    }
}

/// Complete balanced binary tree with `2^depth - 1` vertices in level order
/// (root is vertex 0, children of `i` are `2i+1` and `2i+2`), edges directed
/// parent -> child.
pub fn build_complete_binary_tree(depth: u32) -> Result<DirectedGraph> {
    if depth == 0 {
        return Err(Error::InvalidArgument("tree depth must be >= 1".into()));
    }
    if depth > 31 {
        return Err(Error::InvalidArgument(format!(
            "tree depth {depth} exceeds the supported maximum of 31"
        )));
    }
    let v = (1usize << depth) - 1;
    let mut g = DirectedGraph::new(v)?;
    for parent in 0..v {
        for child in [2 * parent + 1, 2 * parent + 2] {
            if child < v {
                g.add_edge(EntityId(parent as u32), EntityId(child as u32))?;
            }
        }
    }
    Ok(g)
}

/// Transitive closure of an acyclic graph: the result has an edge `(u, w)`
/// exactly when a directed path of length >= 1 runs from `u` to `w`.
///
/// Per-vertex reachability (a DFS from every vertex) keeps the computation
/// exact at `O(V * (V + E))`.
pub fn transitive_closure(g: &DirectedGraph) -> Result<DirectedGraph> {
    if g.topological_order().is_none() {
        return Err(Error::CyclicGraph);
    }
    let v = g.num_vertices();
    let out = g.adjacency();
    let mut closed = BTreeSet::new();
    let mut stamp = vec![u32::MAX; v];
    let mut stack = Vec::new();
    for s in 0..v as u32 {
        stack.extend_from_slice(&out[s as usize]);
        while let Some(t) = stack.pop() {
            if stamp[t as usize] == s {
                continue;
            }
            stamp[t as usize] = s;
            closed.insert((EntityId(s), EntityId(t)));
            stack.extend_from_slice(&out[t as usize]);
        }
    }
    Ok(DirectedGraph {
        num_vertices: v,
        edges: closed,
    })
}

/// The three evaluation sets derived from a transitively closed graph:
/// `E` (the closed edges), `E^c` (every other ordered pair, self-pairs
/// included), and `E^rev` (the reversals of `E`).
///
/// `E^c` is deliberately left implicit: it is defined by `V` and `E`, and at
/// benchmark scale it holds millions of pairs. [`EdgePartitions::ec_pairs`]
/// streams it and [`EdgePartitions::sample_ec`] draws from it without ever
/// materializing the whole set.
#[derive(Debug, Clone)]
pub struct EdgePartitions {
    num_vertices: usize,
    e: BTreeSet<(EntityId, EntityId)>,
    erev: BTreeSet<(EntityId, EntityId)>,
}

/// Builds the partitions, verifying that the input is transitively closed.
///
/// Closed self-loop-free graphs are strict partial orders, so `E^rev` is
/// automatically disjoint from `E` and contained in `E^c`.
pub fn edge_partitions(g_closed: &DirectedGraph) -> Result<EdgePartitions> {
    let out = g_closed.adjacency();
    for &(u, w1) in &g_closed.edges {
        for &w2 in &out[w1.index()] {
            if u.0 != w2 && !g_closed.has_edge(u, EntityId(w2)) {
                return Err(Error::NotClosed(u.0, w1.0, w2));
            }
            if u.0 == w2 {
                // (u,w1) and (w1,u) both present would force the self-pair.
                return Err(Error::CyclicGraph);
            }
        }
    }
    let erev = g_closed.edges.iter().map(|&(s, o)| (o, s)).collect();
    Ok(EdgePartitions {
        num_vertices: g_closed.num_vertices,
        e: g_closed.edges.clone(),
        erev,
    })
}

impl EdgePartitions {
    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn e(&self) -> &BTreeSet<(EntityId, EntityId)> {
        &self.e
    }

    pub fn erev(&self) -> &BTreeSet<(EntityId, EntityId)> {
        &self.erev
    }

    /// `|E^c| = V^2 - |E|`; counts self-pairs.
    #[inline]
    pub fn ec_len(&self) -> usize {
        self.num_vertices * self.num_vertices - self.e.len()
    }

    #[inline]
    pub fn ec_contains(&self, pair: (EntityId, EntityId)) -> bool {
        pair.0.index() < self.num_vertices
            && pair.1.index() < self.num_vertices
            && !self.e.contains(&pair)
    }

    /// Streams `E^c` in row-major order.
    pub fn ec_pairs(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        let out = self.out_lists();
        let v = self.num_vertices as u32;
        (0..v).flat_map(move |u| {
            let row = out[u as usize].clone();
            let mut next = 0usize;
            (0..v).filter_map(move |w| {
                if next < row.len() && row[next] == w {
                    next += 1;
                    None
                } else {
                    Some((EntityId(u), EntityId(w)))
                }
            })
        })
    }

    /// Uniform sample of `n` distinct pairs from `E^c`, deterministic for a
    /// fixed seed. Works by sampling positions in the row-major enumeration
    /// of `E^c`, so nothing is materialized.
    pub fn sample_ec(&self, n: usize, seed: u64) -> Result<Vec<(EntityId, EntityId)>> {
        let total = self.ec_len();
        if n > total {
            return Err(Error::InvalidArgument(format!(
                "cannot sample {n} pairs from a complement of size {total}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, total, n).into_vec();
        picks.sort_unstable();

        let out = self.out_lists();
        let v = self.num_vertices as u32;
        let mut result = Vec::with_capacity(n);
        let mut row_start = 0usize; // position of (u, 0) in the E^c enumeration
        let mut u = 0u32;
        for pick in picks {
            // advance to the row containing this position
            while row_start + (v as usize - out[u as usize].len()) <= pick {
                row_start += v as usize - out[u as usize].len();
                u += 1;
            }
            let mut offset = pick - row_start; // offset among non-neighbors of u
            let mut w = 0u32;
            for &nb in &out[u as usize] {
                if (nb - w) as usize > offset {
                    break;
                }
                offset -= (nb - w) as usize;
                w = nb + 1;
            }
            result.push((EntityId(u), EntityId(w + offset as u32)));
        }
        Ok(result)
    }

    fn out_lists(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_vertices];
        for &(s, o) in &self.e {
            out[s.index()].push(o.0);
        }
        out
    }
}

/// Uniform `n`-subset of an explicit edge set, deterministic for a fixed
/// seed; returned in sorted order.
pub fn sample_edges(
    edges: &BTreeSet<(EntityId, EntityId)>,
    n: usize,
    seed: u64,
) -> Result<Vec<(EntityId, EntityId)>> {
    if n > edges.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} edges from a set of size {}",
            edges.len()
        )));
    }
    let all: Vec<_> = edges.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, all.len(), n).into_vec();
    picks.sort_unstable();
    Ok(picks.into_iter().map(|i| all[i]).collect())
}

/// Bijective map between external string names and dense entity ids.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity vocabulary `"0", "1", ..` for graphs born without names.
    pub fn numeric(n: usize) -> Self {
        let mut v = Self::new();
        for i in 0..n {
            v.intern(&i.to_string());
        }
        v
    }

    pub fn intern(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.ids.get(name) {
            return EntityId(id);
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        EntityId(id)
    }

    pub fn id(&self, name: &str) -> Option<EntityId> {
        self.ids.get(name).map(|&i| EntityId(i))
    }

    pub fn name(&self, id: EntityId) -> Option<&str> {
        self.names.get(id.index()).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Result of reading an edge-list file.
#[derive(Debug)]
pub struct Ingested {
    pub graph: DirectedGraph,
    pub vocab: Vocab,
    /// Number of duplicate lines that were dropped.
    pub duplicates: usize,
}

/// Reads a `subject<TAB>object` edge list. Names get dense ids in first
/// appearance order; duplicate lines are dropped and counted.
pub fn ingest_edge_list(path: &Path) -> Result<Ingested> {
    let text = std::fs::read_to_string(path)?;
    ingest_edge_list_str(&text, path)
}

fn ingest_edge_list_str(text: &str, path: &Path) -> Result<Ingested> {
    let mut vocab = Vocab::new();
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let lineno = lineno + 1;
        let (sub, obj) = line.split_once('\t').ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            line: lineno,
            msg: "expected `subject<TAB>object`".into(),
        })?;
        if sub.is_empty() || obj.is_empty() {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: lineno,
                msg: "empty subject or object".into(),
            });
        }
        if sub == obj {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("self-loop on `{sub}`"),
            });
        }
        let s = vocab.intern(sub);
        let o = vocab.intern(obj);
        edges.push((s, o));
    }
    if vocab.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 0,
            msg: "empty edge list".into(),
        });
    }
    let mut graph = DirectedGraph::new(vocab.len())?;
    let mut duplicates = 0usize;
    for (s, o) in edges {
        if !graph.add_edge(s, o)? {
            duplicates += 1;
        }
    }
    Ok(Ingested {
        graph,
        vocab,
        duplicates,
    })
}

/// Writes the graph in the ingestion format, edges sorted by id pair.
pub fn export_edge_list(path: &Path, graph: &DirectedGraph, vocab: &Vocab) -> Result<()> {
    std::fs::write(path, format_edge_list(graph, vocab)?)?;
    Ok(())
}

pub fn format_edge_list(graph: &DirectedGraph, vocab: &Vocab) -> Result<String> {
    let mut out = String::new();
    for (s, o) in graph.edges() {
        let sub = vocab
            .name(s)
            .ok_or_else(|| Error::InvalidArgument(format!("no name for vertex {s}")))?;
        let obj = vocab
            .name(o)
            .ok_or_else(|| Error::InvalidArgument(format!("no name for vertex {o}")))?;
        let _ = writeln!(out, "{sub}\t{obj}");
    }
    Ok(out)
}
