//! Multilayer node embeddings over neighborhood multisets.
//!
//! Layer `t` replaces every node's attribute by the FIE of the multiset of
//! its neighbors' layer `t−1` attributes. The final representation
//! concatenates the raw features and every layer's output, so the dot
//! product of two rows equals the sum of the per-layer inner products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FieError, Result};
use crate::fie::{em_estimate, fie_embed_distribution, AnchorSet, EstepConfig};
use crate::gmm::SampleSet;
use crate::matrix::DenseMatrix;

/// Undirected graph in CSR form with a node-feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: DenseMatrix,
}

impl SparseGraph {
    /// Validates a CSR structure. Neighbor lists must be sorted, free of
    /// self-loops and duplicates.
    pub fn new(offsets: Vec<usize>, targets: Vec<usize>, features: DenseMatrix) -> Result<Self> {
        let n = features.rows();
        if offsets.len() != n + 1 {
            return Err(FieError::DimensionMismatch {
                context: "CSR offsets",
                expected: n + 1,
                actual: offsets.len(),
            });
        }
        if offsets[0] != 0 || offsets[n] != targets.len() || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(FieError::invalid("CSR offsets must start at 0, be non-decreasing and end at the edge count"));
        }
        for v in 0..n {
            let nbrs = &targets[offsets[v]..offsets[v + 1]];
            for (k, &u) in nbrs.iter().enumerate() {
                if u >= n {
                    return Err(FieError::IndexOutOfRange {
                        what: "nodes",
                        index: u,
                        len: n,
                    });
                }
                if u == v {
                    return Err(FieError::invalid(format!("self-loop stored at node {v}")));
                }
                if k > 0 && nbrs[k - 1] >= u {
                    return Err(FieError::invalid(format!("neighbors of node {v} are not strictly sorted")));
                }
            }
        }
        if !features.is_finite() {
            return Err(FieError::NonFinite("node features"));
        }
        Ok(Self {
            offsets,
            targets,
            features,
        })
    }

    /// Builds the graph from an undirected edge list: edges are symmetrized,
    /// duplicates merged and self-loops dropped.
    pub fn from_edges(features: DenseMatrix, edges: &[(usize, usize)]) -> Result<Self> {
        let n = features.rows();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            for x in [a, b] {
                if x >= n {
                    return Err(FieError::IndexOutOfRange {
                        what: "nodes",
                        index: x,
                        len: n,
                    });
                }
            }
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            targets.extend(nbrs);
            offsets.push(targets.len());
        }
        Self::new(offsets, targets, features)
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Same structure with a different feature matrix.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(FieError::DimensionMismatch {
                context: "feature rows",
                expected: self.num_nodes(),
                actual: features.rows(),
            });
        }
        Self::new(self.offsets.clone(), self.targets.clone(), features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Identity,
    Relu,
}

impl Nonlinearity {
    fn apply(self, values: &mut [f64]) {
        if self == Nonlinearity::Relu {
            values.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub components: usize,
    pub em_iters: usize,
    pub estep: EstepConfig,
    pub include_self: bool,
    pub nonlinearity: Nonlinearity,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            components: 4,
            em_iters: 1,
            estep: EstepConfig::default(),
            include_self: true,
            nonlinearity: Nonlinearity::Identity,
        }
    }
}

/// One fitted layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FieLayer {
    pub config: LayerConfig,
    pub anchors: AnchorSet,
}

/// Per-layer anchors and settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FieModel {
    input_dim: usize,
    layers: Vec<FieLayer>,
}

impl FieModel {
    /// Checks the dimension chain: layer 1 anchors live in the input space,
    /// layer `t` anchors in layer `t−1`'s output space.
    pub fn new(input_dim: usize, layers: Vec<FieLayer>) -> Result<Self> {
        let mut dim = input_dim;
        for (t, layer) in layers.iter().enumerate() {
            let index = t + 1;
            if layer.config.components != layer.anchors.components() {
                return Err(FieError::Layer {
                    layer: index,
                    message: format!(
                        "config says {} components but {} anchors are given",
                        layer.config.components,
                        layer.anchors.components()
                    ),
                });
            }
            if layer.anchors.dim() != dim {
                return Err(FieError::Layer {
                    layer: index,
                    message: format!("anchor dimension {} does not match input width {dim}", layer.anchors.dim()),
                });
            }
            layer.config.estep.validate().map_err(|e| FieError::Layer {
                layer: index,
                message: e.to_string(),
            })?;
            dim *= layer.anchors.components();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[FieLayer] {
        &self.layers
    }

    /// Widths of the concatenated blocks, input block first.
    pub fn block_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.input_dim];
        let mut dim = self.input_dim;
        for layer in &self.layers {
            dim *= layer.anchors.components();
            widths.push(dim);
        }
        widths
    }

    pub fn output_width(&self) -> usize {
        self.block_widths().iter().sum()
    }
}

/// Concatenated per-layer node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    matrix: DenseMatrix,
    block_widths: Vec<usize>,
}

impl NodeEmbeddings {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    pub fn block_widths(&self) -> &[usize] {
        &self.block_widths
    }

    /// Block `t` (0 = raw features).
    pub fn block(&self, t: usize) -> DenseMatrix {
        let start: usize = self.block_widths[..t].iter().sum();
        self.matrix.column_block(start, start + self.block_widths[t])
    }

    /// Drops the raw-feature block.
    pub fn without_input_block(&self) -> NodeEmbeddings {
        let start = self.block_widths[0];
        NodeEmbeddings {
            matrix: self.matrix.column_block(start, self.matrix.cols()),
            block_widths: self.block_widths[1..].to_vec(),
        }
    }
}

/// The multiset `{h(u) : u ∈ N(v)}` (plus `v` itself when `include_self`),
/// rows in increasing node order. A node without neighbors and without
/// self inclusion falls back to its own row.
pub fn neighborhood_multiset(
    graph: &SparseGraph,
    node: usize,
    include_self: bool,
    layer_features: &DenseMatrix,
) -> Result<SampleSet> {
    let n = graph.num_nodes();
    if node >= n {
        return Err(FieError::IndexOutOfRange {
            what: "nodes",
            index: node,
            len: n,
        });
    }
    if layer_features.rows() != n {
        return Err(FieError::DimensionMismatch {
            context: "layer feature rows",
            expected: n,
            actual: layer_features.rows(),
        });
    }
    let nbrs = graph.neighbors(node);
    let mut ids: Vec<usize> = Vec::with_capacity(nbrs.len() + 1);
    let split = nbrs.partition_point(|&u| u < node);
    ids.extend_from_slice(&nbrs[..split]);
    if include_self || nbrs.is_empty() {
        ids.push(node);
    }
    ids.extend_from_slice(&nbrs[split..]);
    SampleSet::new(layer_features.select_rows(&ids))
}

/// Output of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub features: DenseMatrix,
    /// Nodes whose transport E-step hit its iteration cap.
    pub unconverged_nodes: Vec<usize>,
}

/// Applies one FIE layer to every node; nodes are processed in parallel.
pub fn embed_layer(
    graph: &SparseGraph,
    layer_features: &DenseMatrix,
    cfg: &LayerConfig,
    anchors: &AnchorSet,
) -> Result<LayerOutput> {
    if anchors.dim() != layer_features.cols() {
        return Err(FieError::DimensionMismatch {
            context: "anchor dimension vs layer features",
            expected: layer_features.cols(),
            actual: anchors.dim(),
        });
    }
    let width = anchors.components() * anchors.dim();
    let rows: Vec<(Vec<f64>, bool)> = (0..graph.num_nodes())
        .into_par_iter()
        .map(|v| {
            let node_result = || -> Result<(Vec<f64>, bool)> {
                let multiset = neighborhood_multiset(graph, v, cfg.include_self, layer_features)?;
                let est = em_estimate(&multiset, anchors, cfg.em_iters, &cfg.estep)?;
                let mut emb = fie_embed_distribution(&est.theta, anchors)?;
                cfg.nonlinearity.apply(&mut emb);
                Ok((emb, est.converged))
            };
            node_result().map_err(|e| FieError::Node {
                node: v,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut features = DenseMatrix::zeros(graph.num_nodes(), width);
    let mut unconverged_nodes = Vec::new();
    for (v, (emb, converged)) in rows.into_iter().enumerate() {
        features.row_mut(v).copy_from_slice(&emb);
        if !converged {
            unconverged_nodes.push(v);
        }
    }
    Ok(LayerOutput {
        features,
        unconverged_nodes,
    })
}

/// Result of a full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub embeddings: NodeEmbeddings,
    /// `(layer, node)` pairs whose transport E-step hit its cap.
    pub unconverged: Vec<(usize, usize)>,
}

/// Runs every layer of `model`; layer `t` consumes only layer `t−1`'s output.
pub fn embed_graph(graph: &SparseGraph, model: &FieModel) -> Result<GraphEmbedding> {
    if graph.feature_dim() != model.input_dim() {
        return Err(FieError::Layer {
            layer: 1,
            message: format!(
                "model expects {}-dimensional node features, graph has {}",
                model.input_dim(),
                graph.feature_dim()
            ),
        });
    }
    let mut blocks = vec![graph.features().clone()];
    let mut unconverged = Vec::new();
    for (t, layer) in model.layers().iter().enumerate() {
        let input = blocks.last().expect("input block present");
        let out = embed_layer(graph, input, &layer.config, &layer.anchors).map_err(|e| FieError::InLayer {
            layer: t + 1,
            source: Box::new(e),
        })?;
        unconverged.extend(out.unconverged_nodes.iter().map(|&v| (t + 1, v)));
        blocks.push(out.features);
    }
    let refs: Vec<&DenseMatrix> = blocks.iter().collect();
    let matrix = DenseMatrix::hconcat(&refs)?;
    if !matrix.is_finite() {
        return Err(FieError::NonFinite("node embeddings"));
    }
    Ok(GraphEmbedding {
        embeddings: NodeEmbeddings {
            matrix,
            block_widths: blocks.iter().map(DenseMatrix::cols).collect(),
        },
        unconverged,
    })
}
