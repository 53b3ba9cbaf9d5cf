//! Heavy-hex lattice generation.
//!
//! A heavy-hex graph is a honeycomb lattice with one extra vertex placed on
//! every honeycomb edge. The honeycomb vertices (degree at most 3) form `V3`,
//! the subdivision vertices (degree exactly 2) form `V2`, and every edge joins
//! one vertex of each class.
//!
//! The honeycomb patch follows the brick-wall layout: `cols + 1` vertical
//! zig-zag chains of `2 * rows + 2` vertices, joined by rungs at alternating
//! heights, with the two dangling corner vertices removed.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Degree-2 vertex `center` of `V2` together with its two neighbours
/// (`n1 < n2`, both in `V3`). Carrier of one geometrically local cubic term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WTriple {
    pub center: usize,
    pub n1: usize,
    pub n2: usize,
}

impl Serialize for WTriple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.center, self.n1, self.n2].serialize(s)
    }
}

impl<'de> Deserialize<'de> for WTriple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [center, n1, n2] = <[usize; 3]>::deserialize(d)?;
        Ok(WTriple { center, n1, n2 })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeavyHexGraph {
    pub n: usize,
    pub cell_rows: usize,
    pub cell_cols: usize,
    /// Undirected edges with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    #[serde(rename = "v2")]
    pub v2_set: Vec<usize>,
    #[serde(rename = "v3")]
    pub v3_set: Vec<usize>,
    #[serde(rename = "w")]
    pub w_set: Vec<WTriple>,
}

/// Number of honeycomb vertices in a `rows x cols` brick-wall patch.
pub fn honeycomb_vertex_count(rows: usize, cols: usize) -> usize {
    2 * (rows + 1) * (cols + 1) - 2
}

/// Number of honeycomb edges in a `rows x cols` brick-wall patch.
pub fn honeycomb_edge_count(rows: usize, cols: usize) -> usize {
    3 * rows * cols + 2 * rows + 2 * cols - 1
}

/// Node count of the heavy-hex graph built on a `rows x cols` patch.
pub fn heavy_hex_node_count(rows: usize, cols: usize) -> usize {
    honeycomb_vertex_count(rows, cols) + honeycomb_edge_count(rows, cols)
}

/// Honeycomb patch as (vertex count, edges over row-major vertex ids).
fn honeycomb(rows: usize, cols: usize) -> (usize, Vec<(usize, usize)>) {
    let height = 2 * rows + 2;
    let removed = [(0, 2 * rows + 1), (cols, (2 * rows + 1) * (cols % 2))];

    // row-major over (height position, column)
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    for j in 0..height {
        for i in 0..=cols {
            if !removed.contains(&(i, j)) {
                let next = ids.len();
                ids.insert((i, j), next);
            }
        }
    }

    let mut edges = Vec::new();
    let mut link = |a: (usize, usize), b: (usize, usize)| {
        if let (Some(&u), Some(&v)) = (ids.get(&a), ids.get(&b)) {
            edges.push((u.min(v), u.max(v)));
        }
    };
    for i in 0..=cols {
        for j in 0..height - 1 {
            link((i, j), (i, j + 1));
        }
    }
    for i in 0..cols {
        for j in (0..height).filter(|j| j % 2 == i % 2) {
            link((i, j), (i + 1, j));
        }
    }
    edges.sort_unstable();
    (ids.len(), edges)
}

/// Build the heavy-hex lattice of `cell_rows x cell_cols` hexagonal cells.
pub fn build_lattice(cell_rows: usize, cell_cols: usize) -> Result<HeavyHexGraph> {
    if cell_rows == 0 || cell_cols == 0 {
        return Err(Error::ZeroDimension {
            rows: cell_rows,
            cols: cell_cols,
        });
    }
    let (hex_n, hex_edges) = honeycomb(cell_rows, cell_cols);
    let n = hex_n + hex_edges.len();

    let mut edges = Vec::with_capacity(2 * hex_edges.len());
    let mut w_set = Vec::with_capacity(hex_edges.len());
    for (k, &(u, v)) in hex_edges.iter().enumerate() {
        let s = hex_n + k;
        edges.push((u, s));
        edges.push((v, s));
        w_set.push(WTriple {
            center: s,
            n1: u,
            n2: v,
        });
    }
    edges.sort_unstable();

    Ok(HeavyHexGraph {
        n,
        cell_rows,
        cell_cols,
        edges,
        v2_set: (hex_n..n).collect(),
        v3_set: (0..hex_n).collect(),
        w_set,
    })
}

/// Search approximately square grids (aspect ratio within `[0.5, 2]`) for the
/// lattice whose node count is closest to `target_nodes`.
///
/// Ties go to the smaller node count, then the squarer grid, then fewer rows.
pub fn build_lattice_for_target(target_nodes: usize) -> Result<HeavyHexGraph> {
    let (rows, cols) = grid_for_target(target_nodes)?;
    build_lattice(rows, cols)
}

/// Grid dimensions chosen by [`build_lattice_for_target`].
pub fn grid_for_target(target_nodes: usize) -> Result<(usize, usize)> {
    if target_nodes < 12 {
        return Err(Error::TargetTooSmall(target_nodes));
    }
    let mut best: Option<(usize, usize)> = None;
    let key = |r: usize, c: usize| {
        let n = heavy_hex_node_count(r, c);
        (n.abs_diff(target_nodes), n)
    };
    let squarer = |a: (usize, usize), b: (usize, usize)| {
        // max/min of a is smaller than max/min of b
        let (amax, amin) = (a.0.max(a.1), a.0.min(a.1));
        let (bmax, bmin) = (b.0.max(b.1), b.0.min(b.1));
        amax * bmin < bmax * amin
    };
    let mut rows: usize = 1;
    loop {
        let min_cols = rows.div_ceil(2);
        // smallest lattice for this row count already overshoots by more than
        // the best miss, and counts only grow with rows
        if heavy_hex_node_count(rows, min_cols) > target_nodes {
            let over = heavy_hex_node_count(rows, min_cols) - target_nodes;
            if best.is_some_and(|(r, c)| key(r, c).0 < over) {
                break;
            }
        }
        for cols in min_cols..=2 * rows {
            let better = match best {
                None => true,
                Some(b) => {
                    let (kc, kb) = (key(rows, cols), key(b.0, b.1));
                    kc < kb || (kc == kb && squarer((rows, cols), b))
                }
            };
            if better {
                best = Some((rows, cols));
            }
        }
        rows += 1;
    }
    Ok(best.expect("rows = 1 always yields a candidate"))
}

impl HeavyHexGraph {
    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.n
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Exact degree counts.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for d in self.degrees() {
            *hist.entry(d).or_insert(0) += 1;
        }
        hist
    }

    /// Canonical JSON text; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let graph: HeavyHexGraph = serde_json::from_str(text)?;
        graph.validate()?;
        Ok(graph)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Check every structural invariant of a heavy-hex graph.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::parse("heavy-hex graph", m));
        let mut class = vec![0u8; self.n];
        for &v in &self.v2_set {
            if v >= self.n || class[v] != 0 {
                return bad(format!("v2 node {v} out of range or repeated"));
            }
            class[v] = 2;
        }
        for &v in &self.v3_set {
            if v >= self.n || class[v] != 0 {
                return bad(format!("v3 node {v} out of range or repeated"));
            }
            class[v] = 3;
        }
        if class.contains(&0) {
            return bad("v2 and v3 do not cover every node".into());
        }
        for w in self.edges.windows(2) {
            if w[0] >= w[1] {
                return bad("edges not strictly sorted".into());
            }
        }
        for &(u, v) in &self.edges {
            if u >= v || v >= self.n {
                return bad(format!("edge ({u}, {v}) malformed"));
            }
            if class[u] == class[v] {
                return bad(format!("edge ({u}, {v}) inside one class"));
            }
        }
        let deg = self.degrees();
        for v in 0..self.n {
            let cap = if class[v] == 2 { 2 } else { 3 };
            if deg[v] > cap {
                return bad(format!("node {v} has degree {}", deg[v]));
            }
        }
        let adj = self.adjacency();
        let mut expected: Vec<WTriple> = self
            .v2_set
            .iter()
            .filter(|&&v| deg[v] == 2)
            .map(|&v| WTriple {
                center: v,
                n1: adj[v][0],
                n2: adj[v][1],
            })
            .collect();
        expected.sort_unstable();
        let mut got = self.w_set.clone();
        got.sort_unstable();
        if got != expected {
            return bad("w set does not match the degree-2 v2 nodes".into());
        }
        if !self.is_connected() {
            return bad("graph is disconnected".into());
        }
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hexagon() {
        let g = build_lattice(1, 1).unwrap();
        assert_eq!(g.n, 12);
        assert_eq!(g.edges.len(), 12);
        assert_eq!(g.w_set.len(), 6);
        assert_eq!(g.degree_histogram(), BTreeMap::from([(2, 12)]));
        g.validate().unwrap();
    }

    #[test]
    fn two_fused_hexagons() {
        for (r, c) in [(1, 2), (2, 1)] {
            let g = build_lattice(r, c).unwrap();
            assert_eq!(g.n, 21);
            assert_eq!(g.edges.len(), 22);
            assert_eq!(g.v3_set.len(), 10);
            g.validate().unwrap();
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(build_lattice(0, 3), Err(Error::ZeroDimension { .. })));
        assert!(build_lattice(2, 0).is_err());
    }

    #[test]
    fn two_by_two_degrees() {
        let g = build_lattice(2, 2).unwrap();
        let hist = g.degree_histogram();
        assert!(hist.keys().all(|d| (1..=3).contains(d)));
        assert_eq!(hist.values().sum::<usize>(), g.n);
        let deg = g.degrees();
        for v in g.nodes().filter(|&v| deg[v] == 3) {
            assert!(g.v3_set.contains(&v));
        }
    }

    #[test]
    fn target_search() {
        assert_eq!(build_lattice_for_target(12).unwrap().n, 12);
        assert!(matches!(
            build_lattice_for_target(11),
            Err(Error::TargetTooSmall(11))
        ));
    }

    #[test]
    fn target_100_matches_exhaustive_grid_search() {
        // oracle: scan every grid up to 10x10 by construction
        let mut best: Option<(usize, usize, usize)> = None;
        for r in 1..=10 {
            for c in 1..=10 {
                if 2 * r < c || 2 * c < r {
                    continue;
                }
                let n = build_lattice(r, c).unwrap().n;
                let cand = (n.abs_diff(100), n, r);
                if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                    best = Some(cand);
                }
            }
        }
        let (_, n, _) = best.unwrap();
        assert_eq!(build_lattice_for_target(100).unwrap().n, n);
    }

    #[test]
    fn json_layout() {
        let g = build_lattice(1, 1).unwrap();
        let text = g.to_json();
        assert!(text.starts_with(r#"{"n":12,"cell_rows":1,"cell_cols":1,"edges":[[0,6],"#));
        assert_eq!(HeavyHexGraph::from_json(&text).unwrap(), g);
    }
}
