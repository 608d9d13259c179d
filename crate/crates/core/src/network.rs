//! Covariate co-occurrence network over a selected model set, and
//! equally weighted model averaging.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{predict, CoefVector, Estimator};
use crate::model::ModelIndexSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub name: String,
    /// Number of models containing the covariate.
    pub frequency: usize,
    /// Modal within-model frequency rank, 1 for hubs.
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Number of models containing both endpoints.
    pub weight: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    /// Ascending by id.
    pub nodes: Vec<Node>,
    /// Ascending by `(a, b)` with `a < b`.
    pub edges: Vec<Edge>,
}

impl Network {
    pub fn hubs(&self) -> Vec<&Node> {
        self.nodes.iter().filter(|n| n.position == 1).collect()
    }

    /// Nodes by decreasing frequency, ties by id.
    pub fn by_frequency(&self) -> Vec<&Node> {
        let mut v: Vec<&Node> = self.nodes.iter().collect();
        v.sort_by(|x, y| y.frequency.cmp(&x.frequency).then(x.id.cmp(&y.id)));
        v
    }

    pub fn node(&self, id: usize) -> Option<&Node> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }
}

/// Build the network over the covariates of `models` outside `m0`. Every
/// model must add the same number of covariates to `m0`.
pub fn build_network(
    models: &[ModelIndexSet],
    m0: &ModelIndexSet,
    names: &[String],
) -> Result<Network> {
    let members: Vec<Vec<usize>> = models.iter().map(|m| m.difference(m0)).collect();
    if let Some(first) = members.first() {
        if members.iter().any(|m| m.len() != first.len()) {
            return Err(Error::invalid("network models differ in dimension"));
        }
    }
    if let Some(&bad) = members.iter().flatten().find(|&&i| i >= names.len()) {
        return Err(Error::invalid(format!("covariate index {bad} has no name")));
    }

    let mut frequency: BTreeMap<usize, usize> = BTreeMap::new();
    let mut weight: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for m in &members {
        for (k, &i) in m.iter().enumerate() {
            *frequency.entry(i).or_insert(0) += 1;
            for &j in &m[k + 1..] {
                *weight.entry((i, j)).or_insert(0) += 1;
            }
        }
    }

    // rank_counts[i][r]: models in which covariate i has frequency rank r + 1
    let mut rank_counts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for m in &members {
        let mut ranked = m.clone();
        ranked.sort_by(|x, y| frequency[y].cmp(&frequency[x]).then(x.cmp(y)));
        for (r, &i) in ranked.iter().enumerate() {
            let counts = rank_counts.entry(i).or_insert_with(|| vec![0; m.len()]);
            counts[r] += 1;
        }
    }

    let nodes = frequency
        .iter()
        .map(|(&id, &f)| {
            let counts = &rank_counts[&id];
            let top = *counts.iter().max().expect("node appears in a model");
            let position = counts
                .iter()
                .position(|&c| c == top)
                .expect("max is present")
                + 1;
            Node {
                id,
                name: names[id].clone(),
                frequency: f,
                position,
            }
        })
        .collect();
    let edges = weight
        .into_iter()
        .map(|((a, b), weight)| Edge { a, b, weight })
        .collect();
    Ok(Network { nodes, edges })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Dot,
    Json,
    Csv,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(net: &Network) -> String {
    let max_f = net.nodes.iter().map(|n| n.frequency).max().unwrap_or(1) as f64;
    let max_w = net.edges.iter().map(|e| e.weight).max().unwrap_or(1) as f64;
    let mut s = String::from("graph network {\n  node [shape=circle, fixedsize=true];\n");
    for n in &net.nodes {
        let colour = match n.position {
            1 => "green",
            2 => "orange",
            _ => "lightgrey",
        };
        let _ = writeln!(
            s,
            "  n{} [label={}, width={:.4}, style=filled, fillcolor={}, frequency={}, position={}];",
            n.id,
            quote(&n.name),
            0.3 + 1.2 * n.frequency as f64 / max_f,
            colour,
            n.frequency,
            n.position
        );
    }
    for e in &net.edges {
        let _ = writeln!(
            s,
            "  n{} -- n{} [penwidth={:.4}, weight={}];",
            e.a,
            e.b,
            0.5 + 4.5 * e.weight as f64 / max_w,
            e.weight
        );
    }
    s.push_str("}\n");
    s
}

/// Node and edge tables, separated by a blank line.
pub fn to_csv(net: &Network) -> Result<String> {
    let mut nodes = csv::Writer::from_writer(Vec::new());
    nodes
        .write_record(["id", "name", "frequency", "position"])
        .map_err(csv_err)?;
    for n in &net.nodes {
        nodes
            .write_record([
                n.id.to_string(),
                n.name.clone(),
                n.frequency.to_string(),
                n.position.to_string(),
            ])
            .map_err(csv_err)?;
    }
    let mut edges = csv::Writer::from_writer(Vec::new());
    edges.write_record(["a", "b", "weight"]).map_err(csv_err)?;
    for e in &net.edges {
        edges
            .write_record([e.a.to_string(), e.b.to_string(), e.weight.to_string()])
            .map_err(csv_err)?;
    }
    let mut out = into_string(nodes)?;
    out.push('\n');
    out.push_str(&into_string(edges)?);
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv encoding failed: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render(net: &Network, format: ExportFormat) -> Result<String> {
    Ok(match format {
        ExportFormat::Dot => to_dot(net),
        ExportFormat::Json => serde_json::to_string_pretty(net)? + "\n",
        ExportFormat::Csv => to_csv(net)?,
    })
}

pub fn export_network(net: &Network, format: ExportFormat, path: &Path) -> Result<()> {
    let text = render(net, format)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub per_model: Vec<f64>,
    pub averaged: f64,
    pub label: Option<u8>,
}

/// Refit every model on the whole dataset.
pub fn fit_ensemble<E: Estimator + ?Sized>(
    dataset: &Dataset,
    models: &[ModelIndexSet],
    estimator: &E,
) -> Result<Vec<CoefVector>> {
    let rows: Vec<usize> = (0..dataset.n()).collect();
    models
        .iter()
        .map(|m| {
            let x = dataset.x().select(&rows, m.indices());
            estimator.fit(m, &x, dataset.y())
        })
        .collect()
}

/// Equally weighted mean of the models' predictions for the full covariate
/// row `x0`. Binary models average probabilities and label by `threshold`.
pub fn model_average_predict(
    coefs: &[CoefVector],
    x0: &[f64],
    threshold: f64,
) -> Result<EnsemblePrediction> {
    if coefs.is_empty() {
        return Err(Error::invalid("model averaging needs at least one model"));
    }
    let preds = coefs
        .iter()
        .map(|c| predict(c, x0, threshold))
        .collect::<Result<Vec<_>>>()?;
    let per_model: Vec<f64> = preds.iter().map(|p| p.value).collect();
    let averaged = per_model.iter().sum::<f64>() / per_model.len() as f64;
    let label = preds[0].label.map(|_| u8::from(averaged >= threshold));
    Ok(EnsemblePrediction {
        per_model,
        averaged,
        label,
    })
}
