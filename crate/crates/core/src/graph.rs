//! Weighted directed networks.
//!
//! Entry `(i, j)` of the weight matrix is `g_ij`, the weight of the edge from
//! node `j` to node `i`; node `j` infects node `i` at rate `tau * g_ij`.
//! Node indices are 0-based in the API and 1-based in graph documents.

use std::collections::HashSet;
use std::path::Path;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense storage limit.
pub const MAX_GRAPH_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    weights: Vec<f64>,
}

/// One edge of a graph document, `from` and `to` 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// On-disk graph description: `n` plus either `edges` or a row-major `matrix`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInfo {
    /// Perron value of `G`.
    pub lambda_max: f64,
    /// Positive right eigenvector, unit 1-norm.
    pub eigvec: Vec<f64>,
    pub iterations: usize,
    /// `max_i |(G u)_i - lambda u_i|` at exit.
    pub residual: f64,
}

impl Graph {
    /// Builds a graph from a row-major `n x n` weight matrix.
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        if n > MAX_GRAPH_NODES {
            return Err(Error::InvalidGraph(format!(
                "{n} nodes exceeds the dense storage limit of {MAX_GRAPH_NODES}"
            )));
        }
        if weights.len() != n * n {
            return Err(Error::InvalidGraph(format!(
                "expected {} matrix entries, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() {
                    return Err(Error::InvalidGraph(format!(
                        "weight g[{}][{}] is not finite",
                        i + 1,
                        j + 1
                    )));
                }
                if w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "negative weight {w} on edge {} -> {}",
                        j + 1,
                        i + 1
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "self-loop on node {} with weight {w}",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { n, weights })
    }

    /// Builds a graph from `(from, to, weight)` triples with 0-based indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let docs: Vec<EdgeDoc> = edges
            .iter()
            .map(|&(from, to, weight)| EdgeDoc {
                from: from + 1,
                to: to + 1,
                weight,
            })
            .collect();
        Self::from_doc(&GraphDoc {
            n,
            edges: Some(docs),
            matrix: None,
        })
    }

    pub fn from_doc(doc: &GraphDoc) -> Result<Self> {
        let n = doc.n;
        if n == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        if n > MAX_GRAPH_NODES {
            return Err(Error::InvalidGraph(format!(
                "{n} nodes exceeds the dense storage limit of {MAX_GRAPH_NODES}"
            )));
        }
        match (&doc.edges, &doc.matrix) {
            (Some(_), Some(_)) => Err(Error::InvalidGraph(
                "document must give either `edges` or `matrix`, not both".into(),
            )),
            (None, None) => Err(Error::InvalidGraph(
                "document must give `edges` or `matrix`".into(),
            )),
            (None, Some(rows)) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidGraph(format!("matrix must be {n}x{n}")));
                }
                Self::from_dense(n, rows.iter().flatten().copied().collect())
            }
            (Some(edges), None) => {
                let mut weights = vec![0.0; n * n];
                let mut seen = HashSet::new();
                for e in edges {
                    if e.from == 0 || e.from > n || e.to == 0 || e.to > n {
                        return Err(Error::InvalidGraph(format!(
                            "edge {} -> {} has a node index outside 1..={n}",
                            e.from, e.to
                        )));
                    }
                    if !seen.insert((e.from, e.to)) {
                        return Err(Error::InvalidGraph(format!(
                            "duplicate edge {} -> {}",
                            e.from, e.to
                        )));
                    }
                    if !e.weight.is_finite() {
                        return Err(Error::InvalidGraph(format!(
                            "edge {} -> {} has non-finite weight",
                            e.from, e.to
                        )));
                    }
                    if e.weight < 0.0 {
                        return Err(Error::InvalidGraph(format!(
                            "negative weight {} on edge {} -> {}",
                            e.weight, e.from, e.to
                        )));
                    }
                    if e.from == e.to {
                        if e.weight != 0.0 {
                            return Err(Error::InvalidGraph(format!(
                                "self-loop on node {} with weight {}",
                                e.from, e.weight
                            )));
                        }
                        continue;
                    }
                    weights[(e.to - 1) * n + (e.from - 1)] = e.weight;
                }
                Self::from_dense(n, weights)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Dense document form, suitable for writing back out.
    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            n: self.n,
            edges: None,
            matrix: Some(self.weights.chunks(self.n).map(<[f64]>::to_vec).collect()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `g_ij`: weight of the edge from `j` to `i`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Row `i`: weights of all edges into node `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn transpose(&self) -> Graph {
        let n = self.n;
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                weights[j * n + i] = self.weights[i * n + j];
            }
        }
        Graph { n, weights }
    }

    /// Multiplies every weight by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Graph> {
        Graph::from_dense(self.n, self.weights.iter().map(|w| w * c).collect())
    }

    /// `(G x)_i`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(g, v)| g * v).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Complete graph with unit weights in both directions.
    pub fn complete(n: usize) -> Result<Graph> {
        let weights = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        Graph::from_dense(n, weights)
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0` with unit weights.
    pub fn directed_cycle(n: usize) -> Result<Graph> {
        let edges: Vec<_> = (0..n).map(|k| (k, (k + 1) % n, 1.0)).collect();
        Graph::from_edges(n, &edges)
    }

    /// Undirected star: node 0 is the hub, nodes `1..=leaves` the leaves.
    pub fn star(leaves: usize) -> Result<Graph> {
        let mut edges = Vec::with_capacity(2 * leaves);
        for leaf in 1..=leaves {
            edges.push((0, leaf, 1.0));
            edges.push((leaf, 0, 1.0));
        }
        Graph::from_edges(leaves + 1, &edges)
    }

    /// Directed Erdős–Rényi graph, each ordered pair present with probability
    /// `p`, weights uniform in `[w_min, w_max]`, resampled until strongly
    /// connected.
    pub fn random_strongly_connected<R: Rng + ?Sized>(
        rng: &mut R,
        n: usize,
        p: f64,
        w_min: f64,
        w_max: f64,
    ) -> Result<Graph> {
        if n >= 2 && p <= 0.0 {
            return Err(Error::Validation(
                "edge probability must be positive for n >= 2".into(),
            ));
        }
        loop {
            let mut weights = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(p.min(1.0)) {
                        weights[i * n + j] = rng.gen_range(w_min..=w_max);
                    }
                }
            }
            let g = Graph::from_dense(n, weights)?;
            if g.is_strongly_connected() {
                return Ok(g);
            }
        }
    }

    /// Strongly connected components over edges with strictly positive weight.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let mut dg = DiGraph::<(), ()>::with_capacity(self.n, 0);
        let nodes: Vec<_> = (0..self.n).map(|_| dg.add_node(())).collect();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.weight(i, j) > 0.0 {
                    dg.add_edge(nodes[j], nodes[i], ());
                }
            }
        }
        tarjan_scc(&dg)
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
                c.sort_unstable();
                c
            })
            .collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected_components().len() == 1
    }

    /// Perron value and right eigenvector by power iteration on `G + I`.
    ///
    /// The unit shift makes an irreducible nonnegative matrix primitive, so
    /// periodic graphs such as directed cycles still converge.
    pub fn spectral_radius(&self, tol: f64, max_iter: usize) -> Result<SpectralInfo> {
        if !(tol > 0.0) {
            return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
        }
        if !self.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        const SHIFT: f64 = 1.0;
        let n = self.n;
        let mut u = vec![1.0 / n as f64; n];
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            let gu = self.mul_vec(&u);
            let mut next: Vec<f64> = gu.iter().zip(&u).map(|(a, b)| a + SHIFT * b).collect();
            let norm: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= norm);
            u = next;

            let gu = self.mul_vec(&u);
            let lambda = norm - SHIFT;
            residual = gu
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - lambda * b).abs())
                .fold(0.0, f64::max);
            if residual <= tol {
                // Rayleigh-type estimate at the final vector: sum(Gu) with sum(u) = 1.
                let lambda = gu.iter().sum::<f64>();
                let residual = gu
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a - lambda * b).abs())
                    .fold(0.0, f64::max);
                return Ok(SpectralInfo {
                    lambda_max: lambda.max(0.0),
                    eigvec: u,
                    iterations: it,
                    residual,
                });
            }
        }
        Err(Error::SpectralNoConvergence {
            iterations: max_iter,
            residual,
        })
    }

    /// Perron data with library defaults (`tol = 1e-13`, 1e6 iterations).
    pub fn perron(&self) -> Result<SpectralInfo> {
        self.spectral_radius(1e-13, 1_000_000)
    }
}
