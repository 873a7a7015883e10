//! Synthetic social network topologies: Erdős–Rényi, Barabási–Albert, and
//! the stochastic block model.
//!
//! Graphs are undirected and simple (no self-loops, no duplicate edges).
//! Generators are deterministic given their seed.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{self, PortableRng};
use crate::Result;

/// Undirected simple graph with per-node sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops and duplicate edges are
    /// rejected.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_nodes];
        for &(i, j) in edges {
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for (i, neighbors) in adjacency.iter_mut().enumerate() {
            neighbors.sort_unstable();
            if neighbors.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("duplicate edge at node {i}")));
            }
        }
        Ok(Graph { n_nodes, adjacency })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Edges as (i, j) pairs with i < j, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, neighbors) in self.adjacency.iter().enumerate() {
            for &j in neighbors {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Edge density 2E / (n(n-1)).
    pub fn density(&self) -> Result<f64> {
        if self.n_nodes < 2 {
            return Err(Error::invalid("density needs at least 2 nodes"));
        }
        let n = self.n_nodes as f64;
        Ok(2.0 * self.n_edges() as f64 / (n * (n - 1.0)))
    }

    /// Writes the edge-list format: header `n=<count>`, then one `i j` pair
    /// per line with i < j.
    pub fn write_edge_list<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "n={}", self.n_nodes)?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty edge-list file"))??;
        let n_nodes = header
            .strip_prefix("n=")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::invalid(format!("bad edge-list header: {header:?}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad edge line: {trimmed:?}")))
            };
            edges.push((parse(parts.next())?, parse(parts.next())?));
        }
        Graph::from_edges(n_nodes, &edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_edge_list(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_edge_list(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Topology family and its parameters; node count and seed live in
/// [`GraphSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case")]
pub enum Topology {
    ErdosRenyi { p: f64 },
    BarabasiAlbert { m: usize },
    Sbm { block_sizes: Vec<usize>, block_matrix: Vec<Vec<f64>> },
}

/// Full recipe for one graph: topology, size, and seed. Identical specs
/// yield identical edge sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub topology: Topology,
    pub n_nodes: usize,
    pub seed: u64,
}

impl GraphSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.topology {
            Topology::ErdosRenyi { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid(format!("erdos_renyi p={p} outside [0,1]")));
                }
            }
            Topology::BarabasiAlbert { m } => {
                if *m < 1 || self.n_nodes < m + 2 {
                    return Err(Error::invalid(format!(
                        "barabasi_albert needs 1 <= m < n-1 (m={m}, n={})",
                        self.n_nodes
                    )));
                }
            }
            Topology::Sbm { block_sizes, block_matrix } => {
                validate_sbm(block_sizes, block_matrix)?;
                let total: usize = block_sizes.iter().sum();
                if total != self.n_nodes {
                    return Err(Error::invalid(format!(
                        "block sizes sum to {total}, expected n={}",
                        self.n_nodes
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Graph> {
        self.validate()?;
        match &self.topology {
            Topology::ErdosRenyi { p } => erdos_renyi(self.n_nodes, *p, self.seed),
            Topology::BarabasiAlbert { m } => barabasi_albert(self.n_nodes, *m, self.seed),
            Topology::Sbm { block_sizes, block_matrix } => {
                sbm(block_sizes, block_matrix, self.seed)
            }
        }
    }

    /// Same spec with a different seed; the simulation engine uses this to
    /// give each replica its own graph drawing.
    pub fn with_seed(&self, seed: u64) -> Self {
        GraphSpec { seed, ..self.clone() }
    }
}

/// G(n, p): each unordered pair is an edge independently with probability p.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("erdos_renyi p={p} outside [0,1]")));
    }
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Preferential attachment starting from a complete graph on m+1 nodes;
/// every later node attaches to m distinct existing nodes with probability
/// proportional to current degree. Total edges are exactly
/// (m+1)m/2 + m(n-m-1).
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || n < m + 2 {
        return Err(Error::invalid(format!(
            "barabasi_albert needs 1 <= m < n-1 (m={m}, n={n})"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::with_capacity((m + 1) * m / 2 + m * (n - m - 1));
    // One entry per edge endpoint, so sampling an entry uniformly is a
    // degree-weighted node draw.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
    for i in 0..=m {
        for j in (i + 1)..=m {
            edges.push((i, j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in (m + 1)..n {
        // Draw against the degree snapshot before v attaches, discarding
        // duplicate targets.
        targets.clear();
        while targets.len() < m {
            let candidate = endpoints[rng.gen_range(0..endpoints.len())];
            if !targets.contains(&candidate) {
                targets.push(candidate);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    Graph::from_edges(n, &edges)
}

fn validate_sbm(block_sizes: &[usize], block_matrix: &[Vec<f64>]) -> Result<()> {
    let b = block_sizes.len();
    if b == 0 {
        return Err(Error::invalid("sbm needs at least one block"));
    }
    if block_matrix.len() != b || block_matrix.iter().any(|row| row.len() != b) {
        return Err(Error::invalid(format!(
            "block matrix must be {b}x{b} to match {b} block sizes"
        )));
    }
    for (a, row) in block_matrix.iter().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "block probability [{a}][{c}]={p} outside [0,1]"
                )));
            }
            if (p - block_matrix[c][a]).abs() > 0.0 {
                return Err(Error::invalid("block matrix must be symmetric"));
            }
        }
    }
    Ok(())
}

/// Stochastic block model: pair (i, j) in blocks (a, b) is an edge with
/// probability block_matrix[a][b].
pub fn sbm(block_sizes: &[usize], block_matrix: &[Vec<f64>], seed: u64) -> Result<Graph> {
    validate_sbm(block_sizes, block_matrix)?;
    let n: usize = block_sizes.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < block_matrix[block_of[i]][block_of[j]] {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Checks the undirectedness/simplicity invariants; used by tests on every
/// generator output.
pub fn check_invariants(graph: &Graph) -> Result<()> {
    for i in 0..graph.n_nodes() {
        let neighbors = graph.neighbors(i);
        if neighbors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("unsorted or duplicate adjacency at {i}")));
        }
        for &j in neighbors {
            if j == i {
                return Err(Error::invalid(format!("self-loop at {i}")));
            }
            if graph.neighbors(j).binary_search(&i).is_err() {
                return Err(Error::invalid(format!("asymmetric edge ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Degree-weighted node draw used by the BA generator, exposed for tests.
#[allow(dead_code)]
fn degree_weighted_draw(endpoints: &[usize], rng: &mut PortableRng) -> usize {
    endpoints[rng.gen_range(0..endpoints.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_forced_extremes() {
        assert_eq!(erdos_renyi(20, 0.0, 1).unwrap().n_edges(), 0);
        assert_eq!(erdos_renyi(20, 1.0, 1).unwrap().n_edges(), 190);
    }

    #[test]
    fn er_density_within_binomial_bound() {
        // n=100, p=0.1: mean 495 edges, sd sqrt(4950*0.09) ~ 21.1
        for seed in 0..5 {
            let g = erdos_renyi(100, 0.1, seed).unwrap();
            let mean = 495.0;
            let sd = (4950.0_f64 * 0.1 * 0.9).sqrt();
            let edges = g.n_edges() as f64;
            assert!((edges - mean).abs() < 4.0 * sd, "seed {seed}: {edges} edges");
        }
    }

    #[test]
    fn ba_edge_count_matches_closed_form() {
        let g = barabasi_albert(10, 2, 3).unwrap();
        assert_eq!(g.n_edges(), 17);
        for &(n, m) in &[(10usize, 1usize), (50, 3), (200, 5), (12, 4)] {
            let g = barabasi_albert(n, m, 9).unwrap();
            assert_eq!(g.n_edges(), (m + 1) * m / 2 + m * (n - m - 1));
        }
    }

    #[test]
    fn ba_hubs_emerge() {
        let mut hits = 0;
        for seed in 0..20 {
            let g = barabasi_albert(500, 3, seed).unwrap();
            let mut degrees: Vec<usize> = (0..500).map(|i| g.degree(i)).collect();
            degrees.sort_unstable();
            let median = degrees[250] as f64;
            let max = *degrees.last().unwrap() as f64;
            if max > 5.0 * median {
                hits += 1;
            }
        }
        assert!(hits >= 18, "hubs in only {hits}/20 seeds");
    }

    #[test]
    fn ba_m1_is_a_tree() {
        let g = barabasi_albert(40, 1, 5).unwrap();
        assert_eq!(g.n_edges(), 39);
        // connected with n-1 edges => tree
        let mut seen = vec![false; 40];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn ba_rejects_small_n() {
        assert!(barabasi_albert(3, 2, 0).is_err());
    }

    #[test]
    fn sbm_forced_cases() {
        let g = sbm(&[5, 5], &[vec![0.0, 0.0], vec![0.0, 0.0]], 1).unwrap();
        assert_eq!(g.n_edges(), 0);

        let g = sbm(&[10, 10], &[vec![0.5, 0.0], vec![0.0, 0.5]], 2).unwrap();
        for (i, j) in g.edges() {
            assert_eq!(i / 10, j / 10, "cross-block edge ({i}, {j})");
        }
    }

    #[test]
    fn sbm_single_block_matches_er_statistics() {
        // one block with prob p is distributionally G(n, p)
        let n = 100usize;
        let pairs = (n * (n - 1) / 2) as f64;
        let sd = (pairs * 0.2 * 0.8).sqrt();
        for seed in 0..5 {
            let g = sbm(&[n], &[vec![0.2]], seed).unwrap();
            assert!((g.n_edges() as f64 - pairs * 0.2).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn sbm_rejects_bad_inputs() {
        assert!(sbm(&[2, 2], &[vec![0.1, 0.2], vec![0.3, 0.1]], 0).is_err());
        assert!(sbm(&[2, 2], &[vec![0.1]], 0).is_err());
        assert!(sbm(&[2], &[vec![1.5]], 0).is_err());
    }

    #[test]
    fn density_examples() {
        let complete = erdos_renyi(6, 1.0, 0).unwrap();
        assert_eq!(complete.density().unwrap(), 1.0);
        let empty = erdos_renyi(6, 0.0, 0).unwrap();
        assert_eq!(empty.density().unwrap(), 0.0);
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.density().unwrap(), 0.5);
        let lone = Graph::from_edges(1, &[]).unwrap();
        assert!(lone.density().is_err());
    }

    #[test]
    fn generators_are_deterministic_and_simple() {
        let spec = GraphSpec {
            topology: Topology::BarabasiAlbert { m: 2 },
            n_nodes: 60,
            seed: 11,
        };
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a, b);
        check_invariants(&a).unwrap();
        check_invariants(&erdos_renyi(50, 0.3, 4).unwrap()).unwrap();
        check_invariants(&sbm(&[20, 20], &[vec![0.3, 0.05], vec![0.05, 0.3]], 4).unwrap()).unwrap();
    }

    #[test]
    fn edge_list_round_trip() {
        let g = barabasi_albert(30, 2, 7).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n=30\n"));
        let back = Graph::read_edge_list(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(Graph::from_edges(3, &[(1, 1)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
    }
}
