// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Tuple graph over masks and its minimum path cover.
//!
//! The cover is computed with the usual split-vertex reduction: every vertex
//! gets an out-side and an in-side, each edge `u -> v` links out(u) to in(v),
//! and a maximum bipartite matching `M` picks successor links. The number of
//! paths is `V - |M|`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::classifier::closed_form_bound;
use crate::chain::search_depth;
use crate::error::{Error, Result};
use crate::model::Mask;

/// Directed graph with an edge `a -> b` whenever `a < b`.
#[derive(Debug, Clone)]
pub struct TupleGraph {
    vertices: Vec<Mask>,
    adj: Vec<Vec<usize>>,
}

impl TupleGraph {
    /// Pairwise comparison of all masks, O(V^2).
    pub fn build(masks: Vec<Mask>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(masks.len());
        for m in &masks {
            if !seen.insert(m) {
                return Err(Error::Usage("duplicate mask in tuple graph".into()));
            }
        }
        let adj = masks
            .iter()
            .map(|a| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| a.less_than(b))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Ok(TupleGraph {
            vertices: masks,
            adj,
        })
    }

    /// A graph over `n` anonymous vertices with explicit edges. Used to run
    /// the cover on arbitrary DAGs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Usage(format!("edge ({a}, {b}) outside {n} vertices")));
            }
            if !adj[a].contains(&b) {
                adj[a].push(b);
            }
        }
        Ok(TupleGraph {
            vertices: Vec::new(),
            adj,
        })
    }

    pub fn vertices(&self) -> &[Mask] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.adj.len();
        let mut indeg = vec![0usize; n];
        for succ in &self.adj {
            for &b in succ {
                indeg[b] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut visited = 0;
        while let Some(v) = queue.pop_front() {
            visited += 1;
            for &b in &self.adj[v] {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    queue.push_back(b);
                }
            }
        }
        visited == n
    }

    /// Text edge list, one `a -> b` per line, for debugging.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (a, succ) in self.adj.iter().enumerate() {
            for b in succ {
                let _ = writeln!(out, "{a} -> {b}");
            }
        }
        out
    }
}

/// Vertex-disjoint paths covering a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCover {
    pub chains: Vec<Vec<usize>>,
}

impl PathCover {
    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.chains.iter().map(Vec::len).collect()
    }

    /// Disjoint, covering, and every consecutive pair joined by an edge.
    pub fn is_valid_for(&self, g: &TupleGraph) -> bool {
        let mut seen = vec![false; g.vertex_count()];
        for path in &self.chains {
            for &v in path {
                if v >= seen.len() || std::mem::replace(&mut seen[v], true) {
                    return false;
                }
            }
            if path.is_empty() || path.windows(2).any(|w| !g.has_edge(w[0], w[1])) {
                return false;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Minimum number of vertex-disjoint paths covering `g`.
pub fn min_path_cover(g: &TupleGraph) -> Result<PathCover> {
    if !g.is_acyclic() {
        return Err(Error::Usage("tuple graph has a cycle".into()));
    }
    let n = g.vertex_count();
    let succ = max_matching(&g.adj, n);
    let mut has_pred = vec![false; n];
    for s in succ.iter().flatten() {
        has_pred[*s] = true;
    }
    let chains = (0..n)
        .filter(|&v| !has_pred[v])
        .map(|start| {
            let mut path = vec![start];
            let mut at = start;
            while let Some(next) = succ[at] {
                path.push(next);
                at = next;
            }
            path
        })
        .collect();
    Ok(PathCover { chains })
}

/// Hopcroft-Karp. `adj[u]` lists right-side neighbours of left vertex `u`;
/// returns the matched right vertex of each left vertex.
fn max_matching(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    const FREE: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];

    loop {
        // BFS layers from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; left];
        for u in 0..left {
            if match_l[u] == FREE {
                augment(u, adj, &mut match_l, &mut match_r, &mut dist, &mut next);
            }
        }
    }
    match_l
        .into_iter()
        .map(|v| (v != FREE).then_some(v))
        .collect()
}

fn augment(
    root: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    const FREE: usize = usize::MAX;
    // Iterative DFS along the layered graph.
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        if next[u] == adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let v = adj[u][next[u]];
        let w = match_r[v];
        if w == FREE {
            // Flip the path root .. u -> v.
            let mut v = v;
            while let Some(u) = stack.pop() {
                let prev = match_l[u];
                match_l[u] = v;
                match_r[v] = u;
                v = prev;
            }
            return true;
        }
        if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
            stack.push(w);
        } else {
            next[u] += 1;
        }
    }
    false
}

/// Lookup-cost figures for a cover over `m` tuples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverQuality {
    pub chains: usize,
    pub tuples: usize,
    pub per_chain_bound: usize,
    pub closed_form_bound: f64,
    /// `l < m/2`: the regime where the bound is below a full tuple scan.
    pub below_half: bool,
}

pub fn cover_quality(pc: &PathCover, m: usize) -> CoverQuality {
    let l = pc.len();
    CoverQuality {
        chains: l,
        tuples: m,
        per_chain_bound: pc.chains.iter().map(|c| search_depth(c.len())).sum(),
        closed_form_bound: closed_form_bound(m, l),
        below_half: 2 * l < m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldSchema;
    use rand::{Rng, SeedableRng};

    /// Exhaustive minimum path cover: `path_ok[S]` says whether the vertex
    /// set S can be laid out as one path, then a subset DP partitions V.
    pub(crate) fn brute_force_cover(n: usize, edges: &[(usize, usize)]) -> usize {
        let full = (1usize << n) - 1;
        let has = |a: usize, b: usize| edges.contains(&(a, b));
        // ends[S] = bitset of vertices v such that some path over S ends at v.
        let mut ends = vec![0u32; 1 << n];
        for v in 0..n {
            ends[1 << v] = 1 << v;
        }
        for s in 1..=full {
            let e = ends[s];
            if e == 0 {
                continue;
            }
            for last in 0..n {
                if e >> last & 1 == 0 {
                    continue;
                }
                for v in 0..n {
                    if s >> v & 1 == 0 && has(last, v) {
                        ends[s | 1 << v] |= 1 << v;
                    }
                }
            }
        }
        let mut best = vec![usize::MAX; 1 << n];
        best[0] = 0;
        for s in 1..=full {
            let low = s & s.wrapping_neg();
            let rest = s ^ low;
            // Enumerate path sets containing the lowest vertex of s.
            let mut sub = rest;
            loop {
                let p = sub | low;
                if ends[p] != 0 && best[s ^ p] != usize::MAX {
                    best[s] = best[s].min(best[s ^ p] + 1);
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        best[full]
    }

    fn random_dag(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
        let perm: Vec<usize> = {
            let mut v: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(v.as_mut_slice(), rng);
            v
        };
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((perm[i], perm[j]));
                }
            }
        }
        edges
    }

    fn fig2_masks(s: &FieldSchema) -> Vec<Mask> {
        [
            [0x80, 0xC0],
            [0xC0, 0xF0],
            [0xC0, 0xFC],
            [0xE0, 0xF8],
            [0xF8, 0xFC],
            [0xFF, 0xFF],
        ]
        .iter()
        .map(|m| s.mask(m).unwrap())
        .collect()
    }

    #[test]
    fn two_field_example_graph() {
        let s = FieldSchema::uniform(2, 8).unwrap();
        let masks = fig2_masks(&s);
        let g = TupleGraph::build(masks.clone()).unwrap();
        assert!(g.has_edge(0, 1));
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(g.has_edge(a, b), masks[a].less_than(&masks[b]));
            }
        }
        let edges: Vec<(usize, usize)> = (0..6)
            .flat_map(|a| g.successors(a).iter().map(move |&b| (a, b)))
            .collect();
        let pc = min_path_cover(&g).unwrap();
        assert!(pc.is_valid_for(&g));
        assert_eq!(pc.len(), brute_force_cover(6, &edges));
        assert!(pc.len() <= 3);
    }

    #[test]
    fn single_mask_has_no_edges() {
        let s = FieldSchema::uniform(2, 8).unwrap();
        let g = TupleGraph::build(vec![s.full_mask()]).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(min_path_cover(&g).unwrap().chains, vec![vec![0]]);
    }

    #[test]
    fn duplicate_masks_rejected() {
        let s = FieldSchema::uniform(2, 8).unwrap();
        assert!(TupleGraph::build(vec![s.full_mask(), s.full_mask()]).is_err());
    }

    #[test]
    fn edgeless_and_total_orders() {
        let g = TupleGraph::from_edges(5, &[]).unwrap();
        assert_eq!(min_path_cover(&g).unwrap().len(), 5);
        let total: Vec<(usize, usize)> = (0..7).flat_map(|a| (a + 1..7).map(move |b| (a, b))).collect();
        let g = TupleGraph::from_edges(7, &total).unwrap();
        let pc = min_path_cover(&g).unwrap();
        assert_eq!(pc.chains, vec![(0..7).collect::<Vec<_>>()]);
    }

    #[test]
    fn cycles_rejected() {
        let g = TupleGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(min_path_cover(&g).is_err());
    }

    #[test]
    fn cover_matches_brute_force_on_random_dags() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..60 {
            let n = rng.gen_range(1..=9);
            let p = rng.gen_range(0.05..0.6);
            let edges = random_dag(&mut rng, n, p);
            let g = TupleGraph::from_edges(n, &edges).unwrap();
            let pc = min_path_cover(&g).unwrap();
            assert!(pc.is_valid_for(&g));
            assert_eq!(pc.len(), brute_force_cover(n, &edges), "edges {edges:?}");
        }
    }

    #[test]
    fn cover_quality_figures() {
        let one = PathCover { chains: vec![(0..8).collect()] };
        let q = cover_quality(&one, 8);
        assert_eq!(q.per_chain_bound, 4);
        assert_eq!(q.closed_form_bound, 4.0);
        assert!(q.below_half);

        let singles = PathCover { chains: (0..6).map(|v| vec![v]).collect() };
        let q = cover_quality(&singles, 6);
        assert_eq!(q.per_chain_bound, 6);
        assert_eq!(q.closed_form_bound, 6.0);
        assert!(!q.below_half);

        let mixed = PathCover { chains: vec![vec![0, 1, 2], vec![3, 4], vec![5]] };
        let q = cover_quality(&mixed, 6);
        assert_eq!(q.per_chain_bound, 2 + 2 + 1);
        assert!((q.closed_form_bound - 3.0 * (1.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn edge_list_dump() {
        let g = TupleGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(g.edge_list(), "0 -> 1\n0 -> 2\n");
    }
}
