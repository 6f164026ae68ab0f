//! Graph files and generator specs.
//!
//! An explicit graph is
//! `{"vertices": [...], "edges": [[u, v, b], ...], "q": {vertex: value}, "m": {vertex: value}}`
//! with `q` defaulting to 0 and `m` to 1; map keys are vertices written as
//! `"3"` or `"[1,2]"`. A generator spec is
//! `{"generator": "lattice" | "tree" | "halfline" | "halfline_dirichlet", "params": {...}}`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{BallShape, ExhaustionFamily, ExplicitGraph, Field, GraphModel, Topology, Vertex};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(Vertex, Vertex, f64)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub q: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub m: BTreeMap<String, f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// `"l1"` (graph balls, default) or `"linf"`; lattices only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<u32>,
    /// Constant potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Constant measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub generator: String,
    #[serde(default)]
    pub params: GeneratorParams,
}

/// A parsed input: the model plus the ball shape its exhaustion should use.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub model: GraphModel,
    pub shape: BallShape,
}

impl GraphInput {
    pub fn family(&self, anchor: Option<Vertex>) -> Result<ExhaustionFamily> {
        let family = match anchor {
            Some(a) => ExhaustionFamily::new(self.model.clone(), a)?,
            None => ExhaustionFamily::anchored(self.model.clone())?,
        };
        family.with_shape(self.shape)
    }
}

fn parse_key(key: &str) -> Result<Vertex> {
    key.parse::<Vertex>()
        .map_err(|_| Error::Parse(format!("invalid vertex key {key:?}")))
}

fn table(map: &BTreeMap<String, f64>, default: f64, name: &str) -> Result<Field> {
    let mut values = HashMap::new();
    for (k, v) in map {
        if !v.is_finite() {
            return Err(Error::Parse(format!("{name}[{k}] = {v} is not finite")));
        }
        values.insert(parse_key(k)?, *v);
    }
    Ok(if values.is_empty() {
        Field::Constant(default)
    } else {
        Field::Table { default, values }
    })
}

fn from_file(file: GraphFile) -> Result<GraphInput> {
    if file.vertices.is_empty() {
        return Err(Error::Parse("graph has no vertices".into()));
    }
    let graph = ExplicitGraph::new(file.vertices.iter().copied(), file.edges.iter().copied())
        .map_err(|e| Error::Parse(e.to_string()))?;
    for key in file.q.keys().chain(file.m.keys()) {
        let v = parse_key(key)?;
        if !graph.vertices().contains(&v) {
            return Err(Error::Parse(format!("value given for unknown vertex {v}")));
        }
    }
    if let Some((k, v)) = file.m.iter().find(|(_, v)| **v <= 0.0) {
        return Err(Error::Parse(format!("m[{k}] = {v} must be positive")));
    }
    let model = GraphModel::explicit(graph)
        .with_potential(table(&file.q, 0.0, "q")?)
        .with_measure(table(&file.m, 1.0, "m")?);
    Ok(GraphInput {
        model,
        shape: BallShape::Graph,
    })
}

fn from_generator(spec: GeneratorSpec) -> Result<GraphInput> {
    let p = spec.params;
    let misplaced = |what: &str| Error::Parse(format!("parameter {what} does not apply to {}", spec.generator));
    let mut model = match spec.generator.as_str() {
        "lattice" => {
            if p.arity.is_some() {
                return Err(misplaced("arity"));
            }
            GraphModel::lattice(p.dim.unwrap_or(1)).map_err(|e| Error::Parse(e.to_string()))?
        }
        "tree" => {
            if p.dim.is_some() || p.shape.is_some() {
                return Err(misplaced("dim/shape"));
            }
            GraphModel::tree(p.arity.unwrap_or(2)).map_err(|e| Error::Parse(e.to_string()))?
        }
        "halfline" | "halfline_dirichlet" => {
            if p.dim.is_some() || p.shape.is_some() || p.arity.is_some() {
                return Err(misplaced("dim/shape/arity"));
            }
            if spec.generator == "halfline" {
                GraphModel::half_line()
            } else {
                GraphModel::half_line_dirichlet()
            }
        }
        other => return Err(Error::Parse(format!("unknown generator {other:?}"))),
    };
    if let Some(q) = p.q {
        model = model.with_potential(Field::Constant(q));
    }
    if let Some(m) = p.m {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Parse(format!("measure {m} must be positive")));
        }
        model = model.with_measure(Field::Constant(m));
    }
    let shape = match p.shape.as_deref() {
        None | Some("l1") => BallShape::Graph,
        Some("linf") => BallShape::Linf,
        Some(other) => return Err(Error::Parse(format!("unknown ball shape {other:?}"))),
    };
    Ok(GraphInput { model, shape })
}

/// Parses a graph file or generator spec.
pub fn parse_input(text: &str) -> Result<GraphInput> {
    if text.trim().is_empty() {
        return Err(Error::Parse("empty input".into()));
    }
    let value: Value = serde_json::from_str(text)?;
    if value.get("generator").is_some() {
        from_generator(serde_json::from_value(value)?)
    } else {
        from_file(serde_json::from_value(value)?)
    }
}

pub fn read_input(path: &std::path::Path) -> Result<GraphInput> {
    parse_input(&std::fs::read_to_string(path)?)
}

/// Serializes an explicit model; generator models have no finite listing.
pub fn write_graph(model: &GraphModel) -> Result<String> {
    let Topology::Explicit(graph) = model.topology() else {
        return Err(Error::UnsupportedPresentation("only explicit graphs can be written".into()));
    };
    let mut edges: Vec<(Vertex, Vertex, f64)> = graph.directed_edges().into_iter().filter(|(u, v, _)| u < v).collect();
    edges.sort_by_key(|a| (a.0, a.1));
    let mut q = BTreeMap::new();
    let mut m = BTreeMap::new();
    for x in graph.vertices() {
        let qx = model.potential_field().eval(x);
        if qx != 0.0 {
            q.insert(x.to_string(), qx);
        }
        let mx = model.measure(x);
        if mx != 1.0 {
            m.insert(x.to_string(), mx);
        }
    }
    let file = GraphFile {
        vertices: graph.vertices().to_vec(),
        edges,
        q,
        m,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses a weight shorthand, with `|x|` the ℓ¹ norm of the vertex:
/// `constant:c`, `inverse-square:c` (`c/|x|²`, zero at the origin),
/// `geometric:r` (`r^|x|`) or `indicator:v` (`1_{v}`).
pub fn parse_weight(text: &str) -> Result<Field> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("weight {text:?} must look like kind:value")))?;
    let number = || {
        arg.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse(format!("invalid weight parameter {arg:?}")))
    };
    match kind {
        "constant" => Ok(Field::Constant(number()?)),
        "inverse-square" => {
            let c = number()?;
            Ok(Field::func(move |x| {
                let n = x.l1_norm() as f64;
                if n == 0.0 {
                    0.0
                } else {
                    c / (n * n)
                }
            }))
        }
        "geometric" => {
            let r = number()?;
            Ok(Field::func(move |x| r.powi(x.l1_norm() as i32)))
        }
        "indicator" => {
            let v = parse_key(arg)?;
            Ok(Field::Table {
                default: 0.0,
                values: [(v, 1.0)].into_iter().collect(),
            })
        }
        other => Err(Error::Parse(format!("unknown weight kind {other:?}"))),
    }
}
