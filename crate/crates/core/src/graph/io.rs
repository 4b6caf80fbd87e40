//! Plain-text dataset formats.
//!
//! * edge list: one `u v` pair per line, whitespace separated, 0-based ids
//!   (`#` starts a comment line);
//! * features: headerless CSV, one row of reals per node;
//! * labels: one class id per line, or a comma/space separated 0/1 row per
//!   line for multi-label data;
//! * manifest: one graph per line, `edges features labels role` with paths
//!   relative to the manifest and role one of `train`, `val`, `test`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

use super::{AttributedGraph, Labels, Topology};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Reads an undirected edge list. Node count is `num_nodes_hint` when given
/// (so trailing isolated nodes survive), otherwise one past the largest id.
/// With `one_based`, ids are shifted down by one. Self-loops are dropped.
pub fn load_edge_list(
    path: &Path,
    num_nodes_hint: Option<usize>,
    one_based: bool,
) -> Result<AttributedGraph> {
    let text = read(path)?;
    let mut edges = Vec::new();
    let mut max_id = None;
    let mut self_loops = 0usize;
    for (lineno, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, lineno, "expected two node ids"));
        };
        let parse = |s: &str| -> Result<usize> {
            let id: usize = s
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad node id {s:?}")))?;
            if one_based {
                id.checked_sub(1)
                    .ok_or_else(|| parse_err(path, lineno, "id 0 in a 1-based file"))
            } else {
                Ok(id)
            }
        };
        let (u, v) = (parse(a)?, parse(b)?);
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        if u == v {
            self_loops += 1;
            continue;
        }
        edges.push((u, v));
    }
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loops", path.display());
    }
    let num_nodes = match num_nodes_hint {
        Some(n) => {
            if let Some(m) = max_id.filter(|&m| m >= n) {
                return Err(Error::Bounds {
                    id: m,
                    num_nodes: n,
                });
            }
            n
        }
        None => max_id.map_or(0, |m| m + 1),
    };
    Ok(AttributedGraph::new(Topology::new(num_nodes, edges)?))
}

fn split_values(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

pub fn load_features(path: &Path, num_nodes: usize) -> Result<Matrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let row = split_values(line)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("bad feature value {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("{} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.len() != num_nodes {
        return Err(Error::Shape(format!(
            "{}: {} feature rows for {num_nodes} nodes",
            path.display(),
            rows.len()
        )));
    }
    let m = Matrix::from_rows(&rows)?;
    if !m.is_finite() {
        return Err(Error::Data(format!(
            "{}: non-finite feature",
            path.display()
        )));
    }
    Ok(m)
}

pub fn load_labels(path: &Path, num_nodes: usize) -> Result<Labels> {
    let text = read(path)?;
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let row = split_values(line)
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| parse_err(path, lineno, format!("bad label {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(path, lineno, "inconsistent label row width"));
            }
        }
        rows.push(row);
    }
    if rows.len() != num_nodes {
        return Err(Error::Shape(format!(
            "{}: {} label rows for {num_nodes} nodes",
            path.display(),
            rows.len()
        )));
    }
    let width = rows.first().map_or(1, Vec::len);
    if width == 1 {
        return Ok(Labels::single(rows.into_iter().map(|r| r[0]).collect()));
    }
    let mut m = Matrix::zeros(num_nodes, width);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if v > 1 {
                return Err(Error::Data(format!(
                    "{}: multi-label entry {v} is not 0/1",
                    path.display()
                )));
            }
            m.set(i, j, v as f64);
        }
    }
    Ok(Labels::Multi(m.into()))
}

/// Attaches features and labels to `graph`. Either path may be omitted.
pub fn load_features_labels(
    feat_path: Option<&Path>,
    label_path: Option<&Path>,
    graph: AttributedGraph,
) -> Result<AttributedGraph> {
    let n = graph.num_nodes();
    let mut g = graph;
    if let Some(p) = feat_path {
        g = g.with_features(load_features(p, n)?)?;
    }
    if let Some(p) = label_path {
        g = g.with_labels(load_labels(p, n)?)?;
    }
    Ok(g)
}

/// Loads an edge list with optional features and labels. The node count is
/// taken from the feature file, else the label file, else the edge list.
pub fn load_graph_files(
    edges: &Path,
    features: Option<&Path>,
    labels: Option<&Path>,
    one_based: bool,
) -> Result<AttributedGraph> {
    let hint = match features.or(labels) {
        Some(p) => Some(content_lines(&read(p)?).count()),
        None => None,
    };
    let g = load_edge_list(edges, hint, one_based)?;
    load_features_labels(features, labels, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphRole {
    Train,
    Val,
    Test,
}

impl FromStr for GraphRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(GraphRole::Train),
            "val" | "valid" | "validation" => Ok(GraphRole::Val),
            "test" => Ok(GraphRole::Test),
            other => Err(Error::Argument(format!("unknown graph role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub role: GraphRole,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [e, f, l, role] = fields[..] else {
            return Err(parse_err(
                path,
                lineno,
                "expected `edges features labels role`",
            ));
        };
        let role = role
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("unknown role {role:?}")))?;
        out.push(ManifestEntry {
            edges: base.join(e),
            features: base.join(f),
            labels: base.join(l),
            role,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MultiGraphDataset {
    pub graphs: Vec<(AttributedGraph, GraphRole)>,
}

impl MultiGraphDataset {
    pub fn with_role(&self, role: GraphRole) -> impl Iterator<Item = &AttributedGraph> {
        self.graphs
            .iter()
            .filter(move |(_, r)| *r == role)
            .map(|(g, _)| g)
    }
}

/// Loads every graph listed in a manifest. The node count of each graph is
/// taken from its feature file.
pub fn load_multi_graph(manifest: &Path, one_based: bool) -> Result<MultiGraphDataset> {
    let entries = load_manifest(manifest)?;
    let mut graphs = Vec::with_capacity(entries.len());
    for e in entries {
        let rows = content_lines(&read(&e.features)?).count();
        let g = load_edge_list(&e.edges, Some(rows), one_based)?;
        let g = load_features_labels(Some(&e.features), Some(&e.labels), g)?;
        graphs.push((g, e.role));
    }
    Ok(MultiGraphDataset { graphs })
}
