//! Time-varying directed communication graphs and their weight matrices.
//!
//! Nodes are indexed from 0. An edge `(i, j)` means agent `i` receives
//! from agent `j`, so `in_neighbors(i)` lists every `j` whose state `i`
//! pulls. Every graph fed to the solver carries a self-loop on each node.

use std::borrow::Cow;
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {node} has no self-loop")]
    MissingSelfLoop { node: usize },
    #[error("edge ({i}, {j}) references a node outside 0..{n}")]
    NodeOutOfRange { i: usize, j: usize, n: usize },
    #[error("graphs disagree on node count: expected {expected}, found {found}")]
    MismatchedNodes { expected: usize, found: usize },
    #[error("a graph needs at least one node")]
    NoNodes,
    #[error("empty graph list")]
    EmptyList,
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("no jointly connected draw within {attempts} attempts (window <= {max_window}, probe horizon {probe_horizon})")]
    NoConnectedDraw {
        attempts: u32,
        max_window: usize,
        probe_horizon: usize,
    },
}

/// Directed graph on nodes `0..n`, stored as sorted in-neighbor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    in_neighbors: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a graph from `(receiver, sender)` pairs. Duplicates are merged.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut in_neighbors = vec![Vec::new(); n_nodes];
        for (i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(GraphError::NodeOutOfRange { i, j, n: n_nodes });
            }
            in_neighbors[i].push(j);
        }
        for list in &mut in_neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Digraph { in_neighbors })
    }

    /// Like [`Digraph::new`] but adds the self-loop of every node.
    pub fn with_self_loops(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(n_nodes, edges.into_iter().chain((0..n_nodes).map(|i| (i, i))))
    }

    pub fn self_loops_only(n_nodes: usize) -> Result<Self, GraphError> {
        Self::with_self_loops(n_nodes, std::iter::empty())
    }

    pub fn complete(n_nodes: usize) -> Result<Self, GraphError> {
        Self::new(
            n_nodes,
            (0..n_nodes).flat_map(|i| (0..n_nodes).map(move |j| (i, j))),
        )
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0` plus self-loops.
    pub fn cycle(n_nodes: usize) -> Result<Self, GraphError> {
        Self::with_self_loops(n_nodes, (0..n_nodes).map(|j| ((j + 1) % n_nodes, j)))
    }

    pub fn n_nodes(&self) -> usize {
        self.in_neighbors.len()
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_neighbors[i].len()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_nodes()];
        for list in &self.in_neighbors {
            for &j in list {
                out[j] += 1;
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.in_neighbors
            .get(i)
            .is_some_and(|list| list.binary_search(&j).is_ok())
    }

    /// All `(receiver, sender)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().map(move |&j| (i, j)))
    }

    pub fn missing_self_loop(&self) -> Option<usize> {
        (0..self.n_nodes()).find(|&i| !self.contains(i, i))
    }

    pub fn has_all_self_loops(&self) -> bool {
        self.missing_self_loop().is_none()
    }

    /// True iff every ordered node pair is joined by a directed path.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut out_neighbors = vec![Vec::new(); n];
        for (i, j) in self.edges() {
            out_neighbors[j].push(i);
        }
        reaches_all(&out_neighbors) && reaches_all(&self.in_neighbors)
    }
}

/// BFS from node 0 along `adjacency`.
fn reaches_all(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adjacency.len()
}

pub fn is_strongly_connected(g: &Digraph) -> bool {
    g.is_strongly_connected()
}

/// Edge-set union of graphs sharing a node count.
pub fn union_graph(graphs: &[Digraph]) -> Result<Digraph, GraphError> {
    let first = graphs.first().ok_or(GraphError::EmptyList)?;
    let n = first.n_nodes();
    let mut in_neighbors = vec![Vec::new(); n];
    for g in graphs {
        if g.n_nodes() != n {
            return Err(GraphError::MismatchedNodes {
                expected: n,
                found: g.n_nodes(),
            });
        }
        for (i, list) in g.in_neighbors.iter().enumerate() {
            in_neighbors[i].extend_from_slice(list);
        }
    }
    for list in &mut in_neighbors {
        list.sort_unstable();
        list.dedup();
    }
    Ok(Digraph { in_neighbors })
}

/// One nonzero of the weight pair: `A[i][col]` and `B[i][col]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightEntry {
    pub col: usize,
    pub a: f64,
    pub b: f64,
}

/// Row-stochastic `A` and column-stochastic `B` sharing the sparsity of a graph.
///
/// Row `i` holds one entry per in-neighbor of `i`, sorted by column, which
/// fixes the reduction order of every weighted sum.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightPair {
    rows: Vec<Vec<WeightEntry>>,
}

impl WeightPair {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[WeightEntry] {
        &self.rows[i]
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.lookup(i, j).map_or(0.0, |e| e.a)
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.lookup(i, j).map_or(0.0, |e| e.b)
    }

    fn lookup(&self, i: usize, j: usize) -> Option<&WeightEntry> {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |e| e.col).ok().map(|k| &row[k])
    }

    pub fn dense_a(&self) -> Vec<Vec<f64>> {
        self.dense(|e| e.a)
    }

    pub fn dense_b(&self) -> Vec<Vec<f64>> {
        self.dense(|e| e.b)
    }

    fn dense(&self, pick: impl Fn(&WeightEntry) -> f64) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for e in row {
                m[i][e.col] = pick(e);
            }
        }
        m
    }

    pub fn a_row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|e| e.a).sum())
            .collect()
    }

    pub fn b_column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n()];
        for row in &self.rows {
            for e in row {
                sums[e.col] += e.b;
            }
        }
        sums
    }
}

/// `A_ij = 1/|in-neighbors of i|`, `B_ij = 1/|out-neighbors of j|` on edges.
pub fn build_weights(g: &Digraph) -> Result<WeightPair, GraphError> {
    if let Some(node) = g.missing_self_loop() {
        return Err(GraphError::MissingSelfLoop { node });
    }
    let out_deg = g.out_degrees();
    let rows = g
        .in_neighbors
        .iter()
        .map(|list| {
            let a = 1.0 / list.len() as f64;
            list.iter()
                .map(|&j| WeightEntry {
                    col: j,
                    a,
                    b: 1.0 / out_deg[j] as f64,
                })
                .collect()
        })
        .collect();
    Ok(WeightPair { rows })
}

/// Independent per-step random graphs: every node adds each possible
/// out-edge with probability `edge_prob`, on top of its self-loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomEdgeRule {
    pub n_nodes: usize,
    /// Seed actually used for draws (after any redraws).
    pub seed: u64,
    pub edge_prob: f64,
}

impl RandomEdgeRule {
    /// Graph at step `t`; each `t` reads its own ChaCha stream, so any
    /// step can be regenerated without replaying earlier ones.
    pub fn draw(&self, t: u64) -> Digraph {
        let n = self.n_nodes;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        let candidates = n.saturating_sub(1) as u64;
        if self.edge_prob >= 1.0 {
            for j in 0..n {
                edges.extend((0..n).filter(|&i| i != j).map(|i| (i, j)));
            }
        } else if self.edge_prob > 0.0 {
            // Gaps between successes of a Bernoulli(p) sequence are geometric.
            let gap = Geometric::new(self.edge_prob).expect("probability checked on construction");
            for j in 0..n {
                let mut pos = gap.sample(&mut rng);
                while pos < candidates {
                    let k = pos as usize;
                    let i = if k >= j { k + 1 } else { k };
                    edges.push((i, j));
                    pos = pos.saturating_add(1).saturating_add(gap.sample(&mut rng));
                }
            }
        }
        Digraph::new(n, edges).expect("indices in range by construction")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    Static(Digraph),
    /// Graph at `t` is `graphs[t mod len]`.
    Rotating(Vec<Digraph>),
    SeededRandom(RandomEdgeRule),
}

/// A rule mapping iteration `t` to a communication graph, with the claimed
/// joint-connectivity window.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSchedule {
    kind: ScheduleKind,
    window: usize,
    /// Horizon over which `window` is already known to hold.
    verified_horizon: usize,
}

impl GraphSchedule {
    pub fn new_static(g: Digraph) -> Result<Self, GraphError> {
        if let Some(node) = g.missing_self_loop() {
            return Err(GraphError::MissingSelfLoop { node });
        }
        Ok(GraphSchedule {
            kind: ScheduleKind::Static(g),
            window: 1,
            verified_horizon: 0,
        })
    }

    /// Rotating list; the window defaults to the list length.
    pub fn rotating(graphs: Vec<Digraph>) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptyList)?;
        let n = first.n_nodes();
        for g in &graphs {
            if g.n_nodes() != n {
                return Err(GraphError::MismatchedNodes {
                    expected: n,
                    found: g.n_nodes(),
                });
            }
            if let Some(node) = g.missing_self_loop() {
                return Err(GraphError::MissingSelfLoop { node });
            }
        }
        let window = graphs.len();
        Ok(GraphSchedule {
            kind: ScheduleKind::Rotating(graphs),
            window,
            verified_horizon: 0,
        })
    }

    /// Random schedule whose window is found empirically.
    ///
    /// Draws with `seed`; if no window up to `max_window` makes every
    /// window of the first `probe_horizon` graphs connected, re-draws with
    /// a derived seed, up to `max_attempts` times.
    pub fn seeded_random(
        n_nodes: usize,
        seed: u64,
        edge_prob: f64,
        probe_horizon: usize,
        max_window: usize,
        max_attempts: u32,
    ) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::NoNodes);
        }
        if !(0.0..=1.0).contains(&edge_prob) {
            return Err(GraphError::BadProbability(edge_prob));
        }
        for attempt in 0..max_attempts {
            let rule = RandomEdgeRule {
                n_nodes,
                seed: derive_seed(seed, attempt),
                edge_prob,
            };
            let probe: Vec<Adjacency> = (0..probe_horizon as u64)
                .map(|t| Adjacency::new(&rule.draw(t)))
                .collect();
            let found = (1..=max_window.min(probe_horizon.max(1)))
                .find(|&h| windows_connected(&probe, h, probe_horizon));
            if let Some(window) = found {
                return Ok(GraphSchedule {
                    kind: ScheduleKind::SeededRandom(rule),
                    window,
                    verified_horizon: probe_horizon,
                });
            }
        }
        Err(GraphError::NoConnectedDraw {
            attempts: max_attempts,
            max_window,
            probe_horizon,
        })
    }

    /// Overrides the claimed window.
    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self.verified_horizon = 0;
        self
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn n_nodes(&self) -> usize {
        match &self.kind {
            ScheduleKind::Static(g) => g.n_nodes(),
            ScheduleKind::Rotating(gs) => gs[0].n_nodes(),
            ScheduleKind::SeededRandom(rule) => rule.n_nodes,
        }
    }

    pub fn graph_at(&self, t: u64) -> Cow<'_, Digraph> {
        match &self.kind {
            ScheduleKind::Static(g) => Cow::Borrowed(g),
            ScheduleKind::Rotating(gs) => Cow::Borrowed(&gs[(t % gs.len() as u64) as usize]),
            ScheduleKind::SeededRandom(rule) => Cow::Owned(rule.draw(t)),
        }
    }

    /// Stable textual identity, used for config hashing.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        match &self.kind {
            ScheduleKind::Static(g) => {
                let _ = write!(s, "static:{}", write_edge_list(g));
            }
            ScheduleKind::Rotating(gs) => {
                s.push_str("rotating");
                for g in gs {
                    let _ = write!(s, ":{}", write_edge_list(g));
                }
            }
            ScheduleKind::SeededRandom(rule) => {
                let _ = write!(
                    s,
                    "random:{}:{}:{:016x}",
                    rule.n_nodes,
                    rule.seed,
                    rule.edge_prob.to_bits()
                );
            }
        }
        let _ = write!(s, ":window={}", self.window);
        s
    }
}

fn derive_seed(seed: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        return seed;
    }
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(attempt as u64));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// In- and out-neighbor lists of one graph, for connectivity checks over
/// windows without materializing unions.
struct Adjacency {
    ins: Vec<Vec<usize>>,
    outs: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(g: &Digraph) -> Self {
        let mut outs = vec![Vec::new(); g.n_nodes()];
        for (i, js) in g.in_neighbors.iter().enumerate() {
            for &j in js {
                outs[j].push(i);
            }
        }
        Adjacency {
            ins: g.in_neighbors.clone(),
            outs,
        }
    }
}

/// Strong connectivity of the union of `window`, by searching from node 0
/// along out-edges and along in-edges.
fn union_strongly_connected<'a>(window: impl Iterator<Item = &'a Adjacency> + Clone) -> bool {
    let Some(n) = window.clone().next().map(|a| a.ins.len()) else {
        return false;
    };
    let reaches_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for adj in window.clone() {
                let next = if forward { &adj.outs[u] } else { &adj.ins[u] };
                for &v in next {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        stack.push(v);
                    }
                }
            }
        }
        count == n
    };
    reaches_all(true) && reaches_all(false)
}

/// Every window `t..t+window` with `t <= horizon - window` has a strongly
/// connected union; `graphs` must cover `0..horizon`.
fn windows_connected(graphs: &[Adjacency], window: usize, horizon: usize) -> bool {
    if horizon < window || window == 0 {
        return false;
    }
    (0..=horizon - window).all(|t| union_strongly_connected(graphs[t..t + window].iter()))
}

/// True iff every length-`window` union of graphs starting at
/// `t = 0..=horizon - window` is strongly connected.
pub fn verify_jointly_connected(schedule: &GraphSchedule, horizon: usize) -> bool {
    let window = schedule.window;
    if horizon < window {
        return false;
    }
    if horizon <= schedule.verified_horizon {
        return true;
    }
    let last_start = horizon - window;
    match &schedule.kind {
        ScheduleKind::Static(g) => g.is_strongly_connected(),
        ScheduleKind::Rotating(gs) => {
            // Windows repeat with the list period.
            let adj: Vec<Adjacency> = gs.iter().map(Adjacency::new).collect();
            let starts = (last_start + 1).min(gs.len());
            (0..starts).all(|t| {
                union_strongly_connected((t..t + window).map(|k| &adj[k % adj.len()]))
            })
        }
        ScheduleKind::SeededRandom(rule) => {
            let mut buffer: VecDeque<Adjacency> =
                (0..window as u64).map(|t| Adjacency::new(&rule.draw(t))).collect();
            for t in 0..=last_start {
                if !union_strongly_connected(buffer.iter()) {
                    return false;
                }
                if t < last_start {
                    buffer.pop_front();
                    buffer.push_back(Adjacency::new(&rule.draw((t + window) as u64)));
                }
            }
            true
        }
    }
}

/// Spread of the backward products at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRow {
    pub k: usize,
    /// Largest column range of `A(k)...A(0)`.
    pub spread_a: f64,
    /// Largest row range of `B(k)...B(0)`.
    pub spread_b: f64,
}

/// Product spreads for `k = 0..=k_max`, both tending to 0 under joint
/// connectivity.
pub fn product_decay_diagnostic(
    schedule: &GraphSchedule,
    k_max: usize,
) -> Result<Vec<DecayRow>, GraphError> {
    let n = schedule.n_nodes();
    let identity = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let mut prod_a = identity(n);
    let mut prod_b = identity(n);
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let w = build_weights(&schedule.graph_at(k as u64))?;
        prod_a = sparse_left_multiply(&w, &prod_a, |e| e.a);
        prod_b = sparse_left_multiply(&w, &prod_b, |e| e.b);
        let spread_a = (0..n)
            .map(|j| column_range(&prod_a, j))
            .fold(0.0, f64::max);
        let spread_b = prod_b.iter().map(|row| range(row.iter().copied())).fold(0.0, f64::max);
        rows.push(DecayRow {
            k,
            spread_a,
            spread_b,
        });
    }
    Ok(rows)
}

fn sparse_left_multiply(
    w: &WeightPair,
    m: &[Vec<f64>],
    pick: impl Fn(&WeightEntry) -> f64,
) -> Vec<Vec<f64>> {
    let n = m.len();
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            for e in w.row(i) {
                let weight = pick(e);
                for (r, v) in row.iter_mut().zip(&m[e.col]) {
                    *r += weight * v;
                }
            }
            row
        })
        .collect()
}

fn column_range(m: &[Vec<f64>], j: usize) -> f64 {
    range(m.iter().map(|row| row[j]))
}

fn range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// Four-graph rotating family on 8 nodes used by the Case-A experiment.
///
/// Graph `k` gives the nodes `j` with `j mod 4 == k` the out-edges
/// `j -> j+1` and `j -> j+3` (mod 8); everyone else only keeps a self-loop.
/// Every node sends in exactly one graph, so only the union of all four is
/// strongly connected.
pub fn case_a_schedule() -> GraphSchedule {
    let graphs = (0..4)
        .map(|k| chord_graph(8, &[1, 3], |j| j % 4 == k))
        .collect();
    GraphSchedule::rotating(graphs).expect("static family is valid")
}

/// `groups` graphs on an `n`-ring where graph `k` keeps only the ring edges
/// `j -> j+1` with `j mod groups == k`. Jointly connected with window
/// `groups`, but mixes slowly.
pub fn sliced_ring_schedule(n: usize, groups: usize) -> Result<GraphSchedule, GraphError> {
    let graphs = (0..groups)
        .map(|k| chord_graph(n, &[1], |j| j % groups == k))
        .collect();
    GraphSchedule::rotating(graphs)
}

fn chord_graph(n: usize, offsets: &[usize], sends: impl Fn(usize) -> bool) -> Digraph {
    let edges = (0..n)
        .filter(|&j| sends(j))
        .flat_map(|j| offsets.iter().map(move |&o| ((j + o) % n, j)))
        .collect::<Vec<_>>();
    Digraph::with_self_loops(n, edges).expect("indices in range")
}

/// Parses `n <N>` followed by `i j` lines ("i receives from j", 0-based).
/// Blank lines and `#` comments are ignored; self-loops are added.
pub fn parse_edge_list(text: &str) -> Result<Digraph, GraphError> {
    let mut n_nodes: Option<usize> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| GraphError::Parse {
            line: line_no,
            message,
        };
        let mut fields = line.split_whitespace();
        let first = fields.next().unwrap_or_default();
        match n_nodes {
            None => {
                if first != "n" {
                    return Err(parse_err(format!("expected `n <N>` header, found `{line}`")));
                }
                let count = fields
                    .next()
                    .ok_or_else(|| parse_err("missing node count".into()))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                n_nodes = Some(count);
            }
            Some(n) => {
                let second = fields
                    .next()
                    .ok_or_else(|| parse_err("expected two node indices".into()))?;
                if fields.next().is_some() {
                    return Err(parse_err("trailing fields".into()));
                }
                let i: usize = first
                    .parse()
                    .map_err(|e| parse_err(format!("bad node `{first}`: {e}")))?;
                let j: usize = second
                    .parse()
                    .map_err(|e| parse_err(format!("bad node `{second}`: {e}")))?;
                if i >= n || j >= n {
                    return Err(parse_err(format!("edge ({i}, {j}) outside 0..{n}")));
                }
                edges.push((i, j));
            }
        }
    }
    let n = n_nodes.ok_or(GraphError::Parse {
        line: 0,
        message: "missing `n <N>` header".into(),
    })?;
    Digraph::with_self_loops(n, edges)
}

pub fn load_edge_list(path: &Path) -> Result<Digraph, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_edge_list(&text)
}

/// Emits every edge, self-loops included.
pub fn write_edge_list(g: &Digraph) -> String {
    let mut s = format!("n {}\n", g.n_nodes());
    for (i, j) in g.edges() {
        let _ = writeln!(s, "{i} {j}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_matrix(actual: &[Vec<f64>], expected: &[&[f64]]) {
        assert_eq!(actual.len(), expected.len());
        for (r, e) in actual.iter().zip(expected) {
            assert_eq!(r.as_slice(), *e);
        }
    }

    #[test]
    fn weights_self_loops_only_is_identity() {
        let w = build_weights(&Digraph::self_loops_only(3).unwrap()).unwrap();
        let id: [&[f64]; 3] = [&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
        assert_matrix(&w.dense_a(), &id);
        assert_matrix(&w.dense_b(), &id);
    }

    #[test]
    fn weights_complete_two_nodes() {
        let w = build_weights(&Digraph::complete(2).unwrap()).unwrap();
        assert_matrix(&w.dense_a(), &[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_matrix(&w.dense_b(), &[&[0.5, 0.5], &[0.5, 0.5]]);
    }

    #[test]
    fn weights_one_way_edge() {
        // node 0 receives from node 1
        let g = Digraph::new(2, [(0, 0), (1, 1), (0, 1)]).unwrap();
        let w = build_weights(&g).unwrap();
        assert_matrix(&w.dense_a(), &[&[0.5, 0.5], &[0.0, 1.0]]);
        assert_matrix(&w.dense_b(), &[&[1.0, 0.5], &[0.0, 0.5]]);
        assert_eq!(w.b_column_sums(), vec![1.0, 1.0]);
    }

    #[test]
    fn weights_reject_missing_self_loop() {
        let g = Digraph::new(2, [(0, 0), (0, 1)]).unwrap();
        assert!(matches!(
            build_weights(&g),
            Err(GraphError::MissingSelfLoop { node: 1 })
        ));
    }

    #[test]
    fn connectivity_examples() {
        assert!(!Digraph::self_loops_only(3).unwrap().is_strongly_connected());
        assert!(Digraph::cycle(5).unwrap().is_strongly_connected());
        let two_pairs =
            Digraph::with_self_loops(4, [(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        assert!(!two_pairs.is_strongly_connected());
        assert!(Digraph::self_loops_only(1).unwrap().is_strongly_connected());
    }

    #[test]
    fn union_examples() {
        let g = Digraph::cycle(4).unwrap();
        assert_eq!(union_graph(std::slice::from_ref(&g)).unwrap(), g);

        let a = Digraph::with_self_loops(2, [(0, 1)]).unwrap();
        let b = Digraph::with_self_loops(2, [(1, 0)]).unwrap();
        let u = union_graph(&[a.clone(), b]).unwrap();
        assert!(u.contains(0, 1) && u.contains(1, 0));
        assert!(u.is_strongly_connected());

        let c = Digraph::self_loops_only(3).unwrap();
        assert!(matches!(
            union_graph(&[a, c]),
            Err(GraphError::MismatchedNodes { .. })
        ));
        assert!(matches!(union_graph(&[]), Err(GraphError::EmptyList)));
    }

    #[test]
    fn case_a_family_needs_all_four() {
        let sched = case_a_schedule();
        let ScheduleKind::Rotating(gs) = sched.kind() else {
            panic!("rotating expected")
        };
        assert_eq!(gs.len(), 4);
        for g in gs {
            assert!(!g.is_strongly_connected());
        }
        for skip in 0..4 {
            let three: Vec<_> = (0..4).filter(|&k| k != skip).map(|k| gs[k].clone()).collect();
            assert!(!union_graph(&three).unwrap().is_strongly_connected());
        }
        assert!(union_graph(gs).unwrap().is_strongly_connected());
        assert!(verify_jointly_connected(&sched, 100));
        assert!(!verify_jointly_connected(&sched.clone().with_window(3), 100));
    }

    #[test]
    fn rotating_verification_fails_when_a_graph_is_gutted() {
        let ScheduleKind::Rotating(mut gs) = case_a_schedule().kind().clone() else {
            unreachable!()
        };
        gs[2] = Digraph::self_loops_only(8).unwrap();
        let sched = GraphSchedule::rotating(gs).unwrap();
        assert!(!verify_jointly_connected(&sched, 64));
    }

    #[test]
    fn static_schedule_verification() {
        let s = GraphSchedule::new_static(Digraph::cycle(6).unwrap()).unwrap();
        for h in [1, 3, 7] {
            assert!(verify_jointly_connected(&s.clone().with_window(h), 50));
        }
        let lonely = GraphSchedule::new_static(Digraph::self_loops_only(3).unwrap()).unwrap();
        assert!(!verify_jointly_connected(&lonely, 10));
    }

    #[test]
    fn decay_complete_and_identity() {
        let complete = GraphSchedule::new_static(Digraph::complete(5).unwrap()).unwrap();
        let rows = product_decay_diagnostic(&complete, 3).unwrap();
        assert!(rows[0].spread_a.abs() < 1e-15);
        assert!(rows[0].spread_b.abs() < 1e-15);

        let id = GraphSchedule::new_static(Digraph::self_loops_only(4).unwrap()).unwrap();
        for row in product_decay_diagnostic(&id, 10).unwrap() {
            assert_eq!(row.spread_a, 1.0);
            assert_eq!(row.spread_b, 1.0);
        }
    }

    #[test]
    fn decay_case_a() {
        let rows = product_decay_diagnostic(&case_a_schedule(), 40).unwrap();
        for pick in [|r: &DecayRow| r.spread_a, |r: &DecayRow| r.spread_b] {
            assert!(pick(&rows[8]) < pick(&rows[4]));
            assert!(pick(&rows[4]) < pick(&rows[0]));
            assert!(pick(&rows[40]) < 1e-3);
        }
    }

    #[test]
    fn random_draws_are_reproducible_and_seed_dependent() {
        let rule = RandomEdgeRule {
            n_nodes: 30,
            seed: 9,
            edge_prob: 0.1,
        };
        assert_eq!(rule.draw(5), rule.draw(5));
        assert_ne!(rule.draw(5), rule.draw(6));
        let g = rule.draw(0);
        assert!(g.has_all_self_loops());
        // mean out-degree excluding self-loop is p * (n - 1) = 2.9
        let mean: f64 = (0..200)
            .map(|t| (rule.draw(t).n_edges() - 30) as f64 / 30.0)
            .sum::<f64>()
            / 200.0;
        assert!((mean - 2.9).abs() < 0.2, "mean out-degree {mean}");
    }

    #[test]
    fn random_extremes() {
        let none = RandomEdgeRule {
            n_nodes: 4,
            seed: 1,
            edge_prob: 0.0,
        };
        assert_eq!(none.draw(3), Digraph::self_loops_only(4).unwrap());
        let all = RandomEdgeRule {
            n_nodes: 4,
            seed: 1,
            edge_prob: 1.0,
        };
        assert_eq!(all.draw(3), Digraph::complete(4).unwrap());
    }

    #[test]
    fn seeded_random_finds_a_window() {
        let s = GraphSchedule::seeded_random(40, 3, 0.05, 200, 32, 8).unwrap();
        assert!(s.window() >= 1);
        assert!(verify_jointly_connected(&s, 200));
        assert!(matches!(
            GraphSchedule::seeded_random(10, 3, 0.0, 50, 4, 2),
            Err(GraphError::NoConnectedDraw { .. })
        ));
        assert!(matches!(
            GraphSchedule::seeded_random(10, 3, 1.5, 50, 4, 2),
            Err(GraphError::BadProbability(_))
        ));
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("# demo\nn 3\n1 0\n2 1 # comment\n\n0 2\n").unwrap();
        assert_eq!(g, Digraph::cycle(3).unwrap());
        assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);

        for (text, line) in [("n 3\n0 5\n", 2), ("0 1\n", 1), ("n 2\n0\n", 2), ("n x\n", 1)] {
            match parse_edge_list(text) {
                Err(GraphError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
