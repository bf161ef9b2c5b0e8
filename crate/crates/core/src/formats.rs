//! On-disk formats.
//!
//! * edges: one `u<TAB>v` pair of 0-based node ids per line, undirected
//! * features and embeddings: headerless CSV, one row per node
//! * labels: `node_id,label` per line; nodes not listed are unlabeled
//! * splits: `train.txt`, `val.txt`, `test.txt` with one node id per line
//! * model directory: `model.json` plus one `anchors_<t>.csv` per layer
//!
//! Blank lines and lines starting with `#` are skipped everywhere. Floats
//! are written with 17 significant digits so they round-trip exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anchors::KMeansConfig;
use crate::error::{FieError, Result};
use crate::eval::LabeledSplit;
use crate::fie::AnchorSet;
use crate::graph::{FieLayer, FieModel, LayerConfig, SparseGraph};
use crate::matrix::DenseMatrix;

pub const MODEL_FILE: &str = "model.json";
const MODEL_FORMAT_VERSION: u32 = 1;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FieError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| FieError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> FieError {
    FieError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_node_id(path: &Path, line: usize, field: &str, num_nodes: Option<usize>) -> Result<usize> {
    let id: usize = field
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("expected a node id, found {field:?}")))?;
    if let Some(n) = num_nodes {
        if id >= n {
            return Err(parse_error(path, line, format!("node id {id} out of range for {n} nodes")));
        }
    }
    Ok(id)
}

/// Reads a headerless numeric CSV. Every row must have the same width.
pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = read_text(path)?;
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (line, content) in content_lines(&text) {
        let start = data.len();
        for field in content.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line, format!("expected a number, found {:?}", field.trim())))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, "non-finite value"));
            }
            data.push(v);
        }
        let width = data.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_error(path, line, format!("expected {c} columns, found {width}")));
            }
            _ => {}
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}

pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.rows() * (m.cols() * 24 + 1));
    for r in 0..m.rows() {
        let row = m.row(r);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

/// Reads an edge list, rejecting ids `>= num_nodes`.
pub fn read_edges(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (line, content) in content_lines(&text) {
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected two tab-separated node ids, found {} fields", fields.len()),
            ));
        }
        let u = parse_node_id(path, line, fields[0], Some(num_nodes))?;
        let v = parse_node_id(path, line, fields[1], Some(num_nodes))?;
        edges.push((u, v));
    }
    Ok(edges)
}

/// Features plus symmetrized, deduplicated edges.
pub fn load_graph(edges_path: &Path, features_path: &Path) -> Result<SparseGraph> {
    let features = read_matrix_csv(features_path)?;
    if features.rows() == 0 || features.cols() == 0 {
        return Err(parse_error(features_path, 1, "feature file has no rows"));
    }
    let edges = read_edges(edges_path, features.rows())?;
    SparseGraph::from_edges(features, &edges)
}

/// Labels indexed by node; unlisted nodes get −1.
pub fn read_labels(path: &Path, num_nodes: usize) -> Result<Vec<i64>> {
    let text = read_text(path)?;
    let mut labels = vec![-1i64; num_nodes];
    for (line, content) in content_lines(&text) {
        let (node, label) = content
            .split_once(',')
            .ok_or_else(|| parse_error(path, line, "expected node_id,label"))?;
        let node = parse_node_id(path, line, node, Some(num_nodes))?;
        let label: i64 = label
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line, format!("expected an integer label, found {:?}", label.trim())))?;
        if label < 0 {
            return Err(parse_error(path, line, "labels must be nonnegative"));
        }
        if labels[node] >= 0 {
            return Err(parse_error(path, line, format!("node {node} labeled twice")));
        }
        labels[node] = label;
    }
    Ok(labels)
}

pub fn read_node_list(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, content)| parse_node_id(path, line, content, Some(num_nodes)))
        .collect()
}

/// Reads `train.txt`, `val.txt` and `test.txt` from `dir`.
pub fn read_splits(dir: &Path, labels: Vec<i64>) -> Result<LabeledSplit> {
    let n = labels.len();
    let train = read_node_list(&dir.join("train.txt"), n)?;
    let val = read_node_list(&dir.join("val.txt"), n)?;
    let test = read_node_list(&dir.join("test.txt"), n)?;
    LabeledSplit::new(labels, train, val, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerManifest {
    pub anchors: String,
    pub components: usize,
    pub dim: usize,
    pub inertia: Option<f64>,
    pub config: LayerConfig,
}

/// Contents of `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format_version: u32,
    pub input_dim: usize,
    pub kmeans: Option<KMeansConfig>,
    pub layers: Vec<LayerManifest>,
}

pub fn anchors_file_name(layer: usize) -> String {
    format!("anchors_{layer}.csv")
}

/// Writes `model.json` and the anchor CSVs into `dir`, creating it if needed.
/// `inertia` is per layer and may be empty.
pub fn save_model(dir: &Path, model: &FieModel, kmeans: Option<&KMeansConfig>, inertia: &[f64]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| FieError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut layers = Vec::with_capacity(model.layers().len());
    for (t, layer) in model.layers().iter().enumerate() {
        let name = anchors_file_name(t + 1);
        write_matrix_csv(&dir.join(&name), layer.anchors.means())?;
        layers.push(LayerManifest {
            anchors: name,
            components: layer.anchors.components(),
            dim: layer.anchors.dim(),
            inertia: inertia.get(t).copied(),
            config: layer.config,
        });
    }
    let manifest = ModelManifest {
        format_version: MODEL_FORMAT_VERSION,
        input_dim: model.input_dim(),
        kmeans: kmeans.copied(),
        layers,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_text(&dir.join(MODEL_FILE), &json)
}

/// Loads a model written by [`save_model`]. Anchor paths resolve relative to `dir`.
pub fn load_model(dir: &Path) -> Result<FieModel> {
    let path = dir.join(MODEL_FILE);
    let text = read_text(&path)?;
    let manifest: ModelManifest =
        serde_json::from_str(&text).map_err(|e| parse_error(&path, e.line(), e.to_string()))?;
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(parse_error(
            &path,
            1,
            format!("unsupported format_version {}", manifest.format_version),
        ));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (t, lm) in manifest.layers.iter().enumerate() {
        let anchor_path: PathBuf = dir.join(&lm.anchors);
        let means = read_matrix_csv(&anchor_path)?;
        if means.shape() != (lm.components, lm.dim) {
            return Err(FieError::Layer {
                layer: t + 1,
                message: format!(
                    "{} holds a {}x{} matrix, manifest says {}x{}",
                    anchor_path.display(),
                    means.rows(),
                    means.cols(),
                    lm.components,
                    lm.dim
                ),
            });
        }
        layers.push(FieLayer {
            config: lm.config,
            anchors: AnchorSet::new(means)?,
        });
    }
    FieModel::new(manifest.input_dim, layers)
}
