//! Firm-level and industry-level production networks.
//!
//! A [`Graph`] is a sparse weighted digraph stored twice, supplier-major and
//! buyer-major, so that both in-edges and out-edges of a node are contiguous.
//! Every node carries a category; for a [`FirmNetwork`] that is the industry
//! of the firm, for the graph of an [`IndustryNetwork`] it is the industry
//! itself.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Compressed sparse adjacency in both orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    category: Vec<usize>,
    categories: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    out_weights: Vec<f64>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
    in_weights: Vec<f64>,
}

impl Graph {
    /// Builds a graph from `(supplier, buyer, weight)` triples.
    ///
    /// Duplicate pairs are summed. Weights must be finite and strictly
    /// positive. Self-loops are rejected unless `allow_self_loops` is set.
    pub fn from_edges<I>(
        category: Vec<usize>,
        categories: usize,
        edges: I,
        allow_self_loops: bool,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = category.len();
        if let Some((i, &c)) = category.iter().enumerate().find(|(_, &c)| c >= categories) {
            return Err(Error::InvalidNetwork(format!(
                "node {i} has category {c} but only {categories} categories exist"
            )));
        }

        let mut triples: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j && !allow_self_loops {
                return Err(Error::InvalidNetwork(format!("self-loop on node {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({i}, {j}) has non-positive weight {w}"
                )));
            }
            triples.push((i, j, w));
        }
        triples.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triples.len());
        for (i, j, w) in triples {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => merged.push((i, j, w)),
            }
        }

        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(i, j, _) in &merged {
            out_offsets[i + 1] += 1;
            in_offsets[j + 1] += 1;
        }
        for v in 0..n {
            out_offsets[v + 1] += out_offsets[v];
            in_offsets[v + 1] += in_offsets[v];
        }
        let e = merged.len();
        let out_targets: Vec<usize> = merged.iter().map(|t| t.1).collect();
        let out_weights: Vec<f64> = merged.iter().map(|t| t.2).collect();

        // Buyer-major view, suppliers ascending within each buyer.
        let mut in_sources = vec![0usize; e];
        let mut in_weights = vec![0f64; e];
        let mut cursor = in_offsets.clone();
        for &(i, j, w) in &merged {
            in_sources[cursor[j]] = i;
            in_weights[cursor[j]] = w;
            cursor[j] += 1;
        }

        Ok(Graph {
            category,
            categories,
            out_offsets,
            out_targets,
            out_weights,
            in_offsets,
            in_sources,
            in_weights,
        })
    }

    pub fn node_count(&self) -> usize {
        self.category.len()
    }

    pub fn category_count(&self) -> usize {
        self.categories
    }

    pub fn category(&self, node: usize) -> usize {
        self.category[node]
    }

    pub fn categories(&self) -> &[usize] {
        &self.category
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    /// Customers of `node` with the sales volume to each.
    pub fn out_edges(&self, node: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let r = self.out_offsets[node]..self.out_offsets[node + 1];
        self.out_targets[r.clone()]
            .iter()
            .copied()
            .zip(self.out_weights[r].iter().copied())
    }

    /// Suppliers of `node` with the purchase volume from each.
    pub fn in_edges(&self, node: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let r = self.in_offsets[node]..self.in_offsets[node + 1];
        self.in_sources[r.clone()]
            .iter()
            .copied()
            .zip(self.in_weights[r].iter().copied())
    }

    pub(crate) fn in_range(&self, node: usize) -> std::ops::Range<usize> {
        self.in_offsets[node]..self.in_offsets[node + 1]
    }

    pub(crate) fn in_sources(&self) -> &[usize] {
        &self.in_sources
    }

    pub(crate) fn in_weights(&self) -> &[f64] {
        &self.in_weights
    }

    pub(crate) fn out_range(&self, node: usize) -> std::ops::Range<usize> {
        self.out_offsets[node]..self.out_offsets[node + 1]
    }

    pub(crate) fn out_targets(&self) -> &[usize] {
        &self.out_targets
    }

    pub(crate) fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    /// All edges, supplier-major, buyers ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |i| self.out_edges(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn total_weight(&self) -> f64 {
        self.out_weights.iter().sum()
    }

    pub fn in_strength(&self, node: usize) -> f64 {
        self.in_edges(node).map(|(_, w)| w).sum()
    }

    pub fn out_strength(&self, node: usize) -> f64 {
        self.out_edges(node).map(|(_, w)| w).sum()
    }

    pub fn strengths(&self) -> StrengthProfile {
        let n = self.node_count();
        let mut profile = StrengthProfile {
            s_in: vec![0.0; n],
            s_out: vec![0.0; n],
            k_in: vec![0; n],
            k_out: vec![0; n],
        };
        for v in 0..n {
            profile.s_out[v] = self.out_strength(v);
            profile.s_in[v] = self.in_strength(v);
            profile.k_out[v] = self.out_range(v).len();
            profile.k_in[v] = self.in_range(v).len();
        }
        profile
    }

    /// Nodes grouped by category, ascending within each group.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.categories];
        for (v, &c) in self.category.iter().enumerate() {
            groups[c].push(v);
        }
        groups
    }
}

/// Node strengths and degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthProfile {
    pub s_in: Vec<f64>,
    pub s_out: Vec<f64>,
    pub k_in: Vec<usize>,
    pub k_out: Vec<usize>,
}

/// The firm-level production network.
#[derive(Debug, Clone)]
pub struct FirmNetwork {
    graph: Graph,
    firm_ids: Vec<String>,
    index: HashMap<String, usize>,
    industry_labels: Vec<String>,
    residual: Option<usize>,
}

impl FirmNetwork {
    /// Assembles a network from external firm ids, dense industry indices and
    /// labels, and `(supplier, buyer, weight)` index triples. Duplicate pairs
    /// are summed; self-loops and non-positive weights are rejected.
    pub fn new(
        firm_ids: Vec<String>,
        industry: Vec<usize>,
        industry_labels: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if firm_ids.len() != industry.len() {
            return Err(Error::Dimension {
                expected: firm_ids.len(),
                actual: industry.len(),
            });
        }
        let mut index = HashMap::with_capacity(firm_ids.len());
        for (i, id) in firm_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate firm id `{id}`")));
            }
        }
        let graph = Graph::from_edges(industry, industry_labels.len(), edges, false)?;
        Ok(FirmNetwork {
            graph,
            firm_ids,
            index,
            industry_labels,
            residual: None,
        })
    }

    /// Network with ids `0..n` and industry labels `0..m`.
    pub fn from_indexed(
        industry: Vec<usize>,
        industry_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let ids = (0..industry.len()).map(|i| i.to_string()).collect();
        let labels = (0..industry_count).map(|k| k.to_string()).collect();
        Self::new(ids, industry, labels, edges)
    }

    /// Marks `industry` as the residual class for firms without a label.
    pub fn with_residual(mut self, industry: usize) -> Self {
        self.residual = Some(industry);
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn firm_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn industry_count(&self) -> usize {
        self.graph.category_count()
    }

    pub fn industry(&self, firm: usize) -> usize {
        self.graph.category(firm)
    }

    pub fn industries(&self) -> &[usize] {
        self.graph.categories()
    }

    pub fn industry_labels(&self) -> &[String] {
        &self.industry_labels
    }

    pub fn industry_label(&self, industry: usize) -> &str {
        &self.industry_labels[industry]
    }

    pub fn industry_index(&self, label: &str) -> Option<usize> {
        self.industry_labels.iter().position(|l| l == label)
    }

    /// Index of the residual industry (firms with no label), if any.
    pub fn residual_industry(&self) -> Option<usize> {
        self.residual
    }

    pub fn firm_ids(&self) -> &[String] {
        &self.firm_ids
    }

    pub fn firm_id(&self, firm: usize) -> &str {
        &self.firm_ids[firm]
    }

    pub fn firm_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn strengths(&self) -> StrengthProfile {
        self.graph.strengths()
    }

    /// Firms grouped by industry.
    pub fn members(&self) -> Vec<Vec<usize>> {
        self.graph.members()
    }

    /// Sums all flows between industries into the industry-level network.
    pub fn aggregate(&self) -> IndustryNetwork {
        let m = self.industry_count();
        let mut flows = vec![0.0; m * m];
        for (i, j, w) in self.graph.edges() {
            flows[self.industry(i) * m + self.industry(j)] += w;
        }
        let strengths = self.strengths();
        let mut s_in = vec![0.0; m];
        let mut s_out = vec![0.0; m];
        for (v, &k) in self.industries().iter().enumerate() {
            s_in[k] += strengths.s_in[v];
            s_out[k] += strengths.s_out[v];
        }
        IndustryNetwork {
            labels: self.industry_labels.clone(),
            flows,
            s_in,
            s_out,
        }
    }
}

/// Dense industry-by-industry flow matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustryNetwork {
    labels: Vec<String>,
    flows: Vec<f64>,
    s_in: Vec<f64>,
    s_out: Vec<f64>,
}

impl IndustryNetwork {
    /// Builds an industry network from a row-major `m x m` flow matrix.
    pub fn from_matrix(labels: Vec<String>, flows: Vec<f64>) -> Result<Self> {
        let m = labels.len();
        if flows.len() != m * m {
            return Err(Error::Dimension {
                expected: m * m,
                actual: flows.len(),
            });
        }
        if let Some(z) = flows.iter().find(|z| !(z.is_finite() && **z >= 0.0)) {
            return Err(Error::InvalidNetwork(format!(
                "negative or non-finite flow {z}"
            )));
        }
        let mut s_in = vec![0.0; m];
        let mut s_out = vec![0.0; m];
        for k in 0..m {
            for l in 0..m {
                s_out[k] += flows[k * m + l];
                s_in[l] += flows[k * m + l];
            }
        }
        Ok(IndustryNetwork {
            labels,
            flows,
            s_in,
            s_out,
        })
    }

    pub fn industry_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn flow(&self, from: usize, to: usize) -> f64 {
        self.flows[from * self.industry_count() + to]
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn in_strength(&self) -> &[f64] {
        &self.s_in
    }

    pub fn out_strength(&self) -> &[f64] {
        &self.s_out
    }

    pub fn total_flow(&self) -> f64 {
        self.flows.iter().sum()
    }

    /// Sparse view for propagation; self-flows become self-loops and every
    /// node is its own category.
    pub fn graph(&self) -> Graph {
        let m = self.industry_count();
        let edges = (0..m)
            .flat_map(|k| (0..m).map(move |l| (k, l)))
            .filter_map(|(k, l)| {
                let z = self.flow(k, l);
                (z > 0.0).then_some((k, l, z))
            });
        Graph::from_edges((0..m).collect(), m, edges, true)
            .expect("validated industry matrix is a valid graph")
    }
}

/// Inclusive degree interval; `upper = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeBin {
    pub lower: usize,
    pub upper: Option<usize>,
}

impl DegreeBin {
    pub fn new(lower: usize, upper: Option<usize>) -> Result<Self> {
        if lower == 0 {
            return Err(Error::Config("degree bins start at 1".into()));
        }
        if matches!(upper, Some(u) if u < lower) {
            return Err(Error::Config(format!(
                "degree bin upper bound below {lower}"
            )));
        }
        Ok(DegreeBin { lower, upper })
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.lower && self.upper.is_none_or(|u| k <= u)
    }
}

impl fmt::Display for DegreeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "{}-{}", self.lower, u),
            None => write!(f, "{}+", self.lower),
        }
    }
}

/// Sorted, disjoint degree bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeBins(Vec<DegreeBin>);

impl DegreeBins {
    pub fn new(bins: Vec<DegreeBin>) -> Result<Self> {
        for pair in bins.windows(2) {
            match pair[0].upper {
                Some(u) if u < pair[1].lower => {}
                _ => {
                    return Err(Error::Config(format!(
                        "degree bins {} and {} overlap or are unsorted",
                        pair[0], pair[1]
                    )))
                }
            }
        }
        Ok(DegreeBins(bins))
    }

    /// `[1,5]`, `[6,15]`, `[16,35]`, `[36,∞)`.
    pub fn canonical() -> Self {
        DegreeBins(vec![
            DegreeBin {
                lower: 1,
                upper: Some(5),
            },
            DegreeBin {
                lower: 6,
                upper: Some(15),
            },
            DegreeBin {
                lower: 16,
                upper: Some(35),
            },
            DegreeBin {
                lower: 36,
                upper: None,
            },
        ])
    }

    /// Index of the bin containing `k`; degree-0 nodes belong to no bin.
    pub fn assign(&self, k: usize) -> Option<usize> {
        self.0.iter().position(|b| b.contains(k))
    }

    pub fn bins(&self) -> &[DegreeBin] {
        &self.0
    }
}
