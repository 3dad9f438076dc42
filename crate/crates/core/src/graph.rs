//! Multi-source Dijkstra over implicitly defined weighted graphs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by node index for determinism
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest distances from a set of (node, initial distance) seeds.
/// `neighbors(u, emit)` must call `emit(v, w)` for every edge u → v of
/// nonnegative weight w.
pub fn dijkstra<F>(nodes: usize, seeds: &[(usize, f64)], mut neighbors: F) -> Vec<f64>
where
    F: FnMut(usize, &mut dyn FnMut(usize, f64)),
{
    let mut dist = vec![f64::INFINITY; nodes];
    let mut heap = BinaryHeap::new();
    for &(s, d) in seeds {
        if d < dist[s] {
            dist[s] = d;
            heap.push(Entry(d, s));
        }
    }
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        neighbors(u, &mut |v, w| {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        });
    }
    dist
}

/// Explicit undirected adjacency list.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    pub fn new(nodes: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) {
        if u == v || self.adj[u].iter().any(|(x, _)| *x == v) {
            return;
        }
        self.adj[u].push((v, w));
        self.adj[v].push((u, w));
    }

    pub fn distances(&self, seeds: &[(usize, f64)]) -> Vec<f64> {
        dijkstra(self.len(), seeds, |u, emit| {
            for &(v, w) in &self.adj[u] {
                emit(v, w);
            }
        })
    }

    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut count = 0;
        for s in 0..self.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adj[u] {
                    if !std::mem::replace(&mut seen[v], true) {
                        stack.push(v);
                    }
                }
            }
        }
        count
    }
}
