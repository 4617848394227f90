//! Undirected interaction graphs: torus mesh, bounded grid, complete graph and
//! connected Erdős–Rényi samples.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng::draw_unit;

/// Resamples allowed before an Erdős–Rényi request is reported as disconnected.
pub const ER_MAX_ATTEMPTS: usize = 100;

/// Symmetric graph without self-loops or duplicate edges, stored as sorted
/// neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from an edge list. Self-loops and duplicates are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid("edge", format!("({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::invalid("edge", format!("self-loop at {i}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for (i, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            let len = nbrs.len();
            nbrs.dedup();
            if nbrs.len() != len {
                return Err(Error::invalid("edge", format!("duplicate edge at {i}")));
            }
        }
        Ok(Topology { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == n
    }

    /// Writes one `i j` line per edge (0-indexed, `i < j`).
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }
}

/// `side × side` torus; every agent has exactly four neighbours.
///
/// Agent `(r, c)` has index `r * side + c`.
pub fn mesh(side: usize) -> Result<Topology> {
    if side < 3 {
        return Err(Error::invalid("side", format!("mesh needs side >= 3, got {side}")));
    }
    let idx = |r: usize, c: usize| (r % side) * side + (c % side);
    let mut edges = Vec::with_capacity(2 * side * side);
    for r in 0..side {
        for c in 0..side {
            edges.push((idx(r, c), idx(r + 1, c)));
            edges.push((idx(r, c), idx(r, c + 1)));
        }
    }
    Topology::from_edges(side * side, edges)
}

/// `side × side` lattice without wraparound.
pub fn grid(side: usize) -> Result<Topology> {
    if side < 2 {
        return Err(Error::invalid("side", format!("grid needs side >= 2, got {side}")));
    }
    let idx = |r: usize, c: usize| r * side + c;
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if r + 1 < side {
                edges.push((idx(r, c), idx(r + 1, c)));
            }
            if c + 1 < side {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
        }
    }
    Topology::from_edges(side * side, edges)
}

pub fn complete(n: usize) -> Result<Topology> {
    if n < 2 {
        return Err(Error::invalid("n", format!("complete graph needs n >= 2, got {n}")));
    }
    let adjacency = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
    Ok(Topology { adjacency })
}

/// Default edge probability `2 ln(n) / n`, capped at 1.
pub fn default_er_probability(n: usize) -> f64 {
    (2.0 * (n as f64).ln() / n as f64).min(1.0)
}

/// G(n, p) conditioned on connectivity by resampling, at most [`ER_MAX_ATTEMPTS`] times.
///
/// Each attempt draws exactly `n (n - 1) / 2` values, one per pair in
/// lexicographic order.
pub fn erdos_renyi<R: RngCore + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Topology> {
    if n < 2 {
        return Err(Error::invalid("n", format!("Erdős–Rényi graph needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    for _ in 0..ER_MAX_ATTEMPTS {
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if draw_unit(rng) < p {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        // Pairs are visited in order, so the lists are already sorted.
        let g = Topology { adjacency };
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Disconnected {
        n,
        p,
        attempts: ER_MAX_ATTEMPTS,
    })
}

/// Declarative description of a topology, resolved per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologySpec {
    Mesh {
        side: usize,
    },
    Grid {
        side: usize,
    },
    Complete {
        n: usize,
    },
    /// `p = None` selects [`default_er_probability`].
    ErdosRenyi {
        n: usize,
        p: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyKind {
    Mesh,
    Grid,
    Complete,
    ErdosRenyi,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 4] = [
        TopologyKind::Mesh,
        TopologyKind::Grid,
        TopologyKind::Complete,
        TopologyKind::ErdosRenyi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Mesh => "mesh",
            TopologyKind::Grid => "grid",
            TopologyKind::Complete => "complete",
            TopologyKind::ErdosRenyi => "er",
        }
    }

    /// Spec for `n` agents; mesh and grid need `n` to be a perfect square.
    pub fn with_agents(self, n: usize, er_p: Option<f64>) -> Result<TopologySpec> {
        let side = || {
            let s = (n as f64).sqrt().round() as usize;
            if s * s == n {
                Ok(s)
            } else {
                Err(Error::invalid(
                    "n",
                    format!("{} needs a square agent count, got {n}", self.name()),
                ))
            }
        };
        Ok(match self {
            TopologyKind::Mesh => TopologySpec::Mesh { side: side()? },
            TopologyKind::Grid => TopologySpec::Grid { side: side()? },
            TopologyKind::Complete => TopologySpec::Complete { n },
            TopologyKind::ErdosRenyi => TopologySpec::ErdosRenyi { n, p: er_p },
        })
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mesh" | "torus" => Ok(TopologyKind::Mesh),
            "grid" | "lattice" => Ok(TopologyKind::Grid),
            "complete" => Ok(TopologyKind::Complete),
            "er" | "erdos-renyi" | "erdos_renyi" => Ok(TopologyKind::ErdosRenyi),
            other => Err(Error::invalid("topology", format!("unknown topology '{other}'"))),
        }
    }
}

impl TopologySpec {
    pub fn kind(&self) -> TopologyKind {
        match self {
            TopologySpec::Mesh { .. } => TopologyKind::Mesh,
            TopologySpec::Grid { .. } => TopologyKind::Grid,
            TopologySpec::Complete { .. } => TopologyKind::Complete,
            TopologySpec::ErdosRenyi { .. } => TopologyKind::ErdosRenyi,
        }
    }

    pub fn agent_count(&self) -> usize {
        match *self {
            TopologySpec::Mesh { side } | TopologySpec::Grid { side } => side * side,
            TopologySpec::Complete { n } | TopologySpec::ErdosRenyi { n, .. } => n,
        }
    }

    /// Builds the graph; only Erdős–Rényi consumes randomness.
    pub fn build<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Topology> {
        match *self {
            TopologySpec::Mesh { side } => mesh(side),
            TopologySpec::Grid { side } => grid(side),
            TopologySpec::Complete { n } => complete(n),
            TopologySpec::ErdosRenyi { n, p } => erdos_renyi(n, p.unwrap_or_else(|| default_er_probability(n)), rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn assert_simple(g: &Topology) {
        for i in 0..g.n() {
            let nb = g.neighbors(i);
            assert!(nb.windows(2).all(|w| w[0] < w[1]), "sorted, no duplicates");
            assert!(!nb.contains(&i), "self-loop at {i}");
            for &j in nb {
                assert!(g.neighbors(j).contains(&i), "asymmetric edge {i}-{j}");
            }
        }
        assert!(g.is_connected());
    }

    #[test]
    fn mesh_is_four_regular() {
        for side in [3, 4, 10] {
            let g = mesh(side).unwrap();
            assert_eq!(g.n(), side * side);
            assert!((0..g.n()).all(|i| g.degree(i) == 4));
            assert_simple(&g);
        }
        assert!(mesh(2).is_err());
    }

    #[test]
    fn mesh_wraparound_neighbors() {
        let g = mesh(4).unwrap();
        // (1,0) -> 4, (3,0) -> 12, (0,1) -> 1, (0,3) -> 3
        assert_eq!(g.neighbors(0), &[1, 3, 4, 12]);
    }

    #[test]
    fn grid_degrees() {
        let g = grid(2).unwrap();
        assert!((0..4).all(|i| g.degree(i) == 2));
        assert_eq!(grid(3).unwrap().degree(4), 4);

        let g = grid(10).unwrap();
        let mut hist = [0usize; 5];
        for i in 0..g.n() {
            hist[g.degree(i)] += 1;
        }
        assert_eq!(hist, [0, 0, 4, 32, 64]);
        assert_simple(&g);
        assert!(grid(1).is_err());
    }

    #[test]
    fn complete_graph() {
        assert_eq!(complete(2).unwrap().edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(complete(3).unwrap().edge_count(), 3);
        let g = complete(100).unwrap();
        assert_eq!(g.edge_count(), 4950);
        assert!((0..100).all(|i| g.degree(i) == 99));
        assert_simple(&g);
        assert!(complete(1).is_err());
    }

    #[test]
    fn er_saturates_to_complete() {
        let mut rng = rng_from_seed(1);
        assert_eq!(erdos_renyi(12, 1.0, &mut rng).unwrap(), complete(12).unwrap());
    }

    #[test]
    fn er_mean_degree() {
        // Each degree is Binomial(99, 0.1); the mean over 100 agents of 100 graphs
        // has standard deviation sqrt(99 * 0.1 * 0.9 / 10^4) (ignoring the weak
        // dependence through shared edges and the connectivity conditioning).
        let mut rng = rng_from_seed(2024);
        let mut total = 0.0;
        for _ in 0..100 {
            let g = erdos_renyi(100, 0.1, &mut rng).unwrap();
            assert_simple(&g);
            total += 2.0 * g.edge_count() as f64 / 100.0;
        }
        let mean = total / 100.0;
        let sigma = (99.0 * 0.1 * 0.9 / 10_000.0f64).sqrt() * 2f64.sqrt();
        assert!((mean - 9.9).abs() < 3.0 * sigma, "mean degree {mean}");
    }

    #[test]
    fn er_errors() {
        let mut rng = rng_from_seed(3);
        assert!(matches!(
            erdos_renyi(100, 0.001, &mut rng),
            Err(Error::Disconnected {
                attempts: ER_MAX_ATTEMPTS,
                ..
            })
        ));
        assert!(erdos_renyi(1, 0.5, &mut rng).is_err());
        assert!(erdos_renyi(10, 0.0, &mut rng).is_err());
        assert!(erdos_renyi(10, 1.5, &mut rng).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = erdos_renyi(50, 0.2, &mut rng_from_seed(7)).unwrap();
        let b = erdos_renyi(50, 0.2, &mut rng_from_seed(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn edge_list_export() {
        let mut buf = Vec::new();
        complete(3).unwrap().write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 1\n0 2\n1 2\n");
    }

    #[test]
    fn spec_square_check() {
        assert_eq!(
            TopologyKind::Mesh.with_agents(100, None).unwrap(),
            TopologySpec::Mesh { side: 10 }
        );
        assert!(TopologyKind::Grid.with_agents(99, None).is_err());
        assert!((default_er_probability(100) - 0.0921034).abs() < 1e-6);
    }
}
