//! Simple undirected graphs and the single-walker tight-binding Hamiltonian.
//!
//! Simulations only ever use [`ring_graph`]. The Laplacian and Hamiltonian
//! builders accept any validated adjacency so small non-ring graphs can be
//! used in tests.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{real, CMat, ZERO};

/// Undirected graph without loops or multi-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u8>>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Validate a 0/1 adjacency matrix: square, symmetric, zero diagonal.
    pub fn from_adjacency(adjacency: Vec<Vec<u8>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::InvalidAdjacency("empty graph".into()));
        }
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidAdjacency(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0 {
                return Err(Error::InvalidAdjacency(format!("self loop at vertex {i}")));
            }
            for (j, &a) in row.iter().enumerate() {
                if a > 1 {
                    return Err(Error::InvalidAdjacency(format!("entry ({i},{j}) = {a} is not 0/1")));
                }
                if adjacency[j][i] != a {
                    return Err(Error::InvalidAdjacency(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        let degrees = adjacency.iter().map(|row| row.iter().map(|&a| a as usize).sum()).collect();
        Ok(Self { adjacency, degrees })
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j] == 1
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_vertices();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.is_adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Ring (cycle) graph on `n ≥ 3` vertices; vertex `i` is joined to `i ± 1 mod n`.
pub fn ring_graph(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::DegenerateRing(n));
    }
    let adjacency = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = (i + n - j) % n;
                    u8::from(d == 1 || d == n - 1)
                })
                .collect()
        })
        .collect();
    Graph::from_adjacency(adjacency)
}

/// `L = D − A`
pub fn laplacian(g: &Graph) -> CMat {
    let n = g.n_vertices();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            real(g.degrees()[i] as f64)
        } else if g.is_adjacent(i, j) {
            real(-1.0)
        } else {
            ZERO
        }
    })
}

/// Uniform hopping rate and per-vertex on-site potential for one walker.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingProfile {
    pub mu: f64,
    pub onsite: Vec<f64>,
}

impl HoppingProfile {
    /// `μ = 1` and `ε_i = d_i`, which makes the Hamiltonian equal to the Laplacian.
    pub fn from_degrees(g: &Graph) -> Self {
        Self { mu: 1.0, onsite: g.degrees().iter().map(|&d| d as f64).collect() }
    }

    pub fn new(mu: f64, onsite: Vec<f64>) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter(format!("hopping rate must be finite and ≥ 0, got {mu}")));
        }
        if onsite.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("on-site potentials must be finite".into()));
        }
        Ok(Self { mu, onsite })
    }
}

/// `H = Σ_i ε_i |i⟩⟨i| − μ Σ_⟨i,j⟩ (|i⟩⟨j| + |j⟩⟨i|)`
pub fn single_walker_hamiltonian(g: &Graph, p: &HoppingProfile) -> Result<CMat> {
    let n = g.n_vertices();
    if p.onsite.len() != n {
        return Err(Error::Shape(format!("{} on-site potentials for a graph with {n} vertices", p.onsite.len())));
    }
    Ok(Mat::from_fn(n, n, |i, j| {
        if i == j {
            real(p.onsite[i])
        } else if g.is_adjacent(i, j) {
            real(-p.mu)
        } else {
            ZERO
        }
    }))
}
