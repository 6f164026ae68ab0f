//! Weighted graphs with potential and measure, and their finite exhaustions.
//!
//! A [`GraphModel`] couples a locally finite edge-weight function `b` with a
//! potential `q` and a strictly positive measure `m`. Infinite graphs are
//! presented by generators (lattices, trees, half-lines); finite graphs are
//! given explicitly. An [`ExhaustionFamily`] turns a model and an anchor
//! vertex into nested balls `K_0 ⊆ K_1 ⊆ …`, each materialized as a
//! [`FiniteRegion`] with a canonical vertex order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported coordinate dimension of a vertex.
pub const MAX_DIM: usize = 6;

/// A vertex: either a plain integer id (dimension 1) or a lattice point.
///
/// Vertices are `Copy` so that generators can enumerate neighbors without
/// allocating. Ordering is lexicographic within a dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Vertex {
    pub fn id(id: i64) -> Self {
        let mut coords = [0; MAX_DIM];
        coords[0] = id;
        Vertex { dim: 1, coords }
    }

    pub fn point(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Domain(format!(
                "vertex coordinates must have between 1 and {MAX_DIM} entries, got {}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Vertex {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    /// The origin of `ℤ^dim`.
    pub fn origin(dim: usize) -> Result<Self> {
        Self::point(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    /// First coordinate; the id for integer vertices.
    pub fn first(&self) -> i64 {
        self.coords[0]
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    fn shifted(&self, axis: usize, delta: i64) -> Self {
        let mut v = *self;
        v.coords[axis] += delta;
        v
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "{}", self.coords[0])
        } else {
            write!(f, "[")?;
            for (i, c) in self.coords().iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, "]")
        }
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Vertex {
    type Err = Error;

    /// Parses `"3"` or `"[1,-2,0]"`, the same text the `Display` impl writes.
    fn from_str(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s.trim())
            .map_err(|e| Error::Parse(format!("bad vertex {s:?}: {e}")))?;
        serde_json::from_value(value).map_err(|e| Error::Parse(format!("bad vertex {s:?}: {e}")))
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.dim == 1 {
            serializer.serialize_i64(self.coords[0])
        } else {
            let mut seq = serializer.serialize_seq(Some(self.dim()))?;
            for c in self.coords() {
                seq.serialize_element(c)?;
            }
            seq.end()
        }
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Id(i64),
            Point(Vec<i64>),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Id(id) => Ok(Vertex::id(id)),
            Repr::Point(c) => Vertex::point(&c).map_err(de::Error::custom),
        }
    }
}

/// A finite graph given by explicit vertex and edge lists.
///
/// Edge weights are stored per direction so that asymmetric input survives
/// until [`validate`] reports it.
#[derive(Clone, Debug)]
pub struct ExplicitGraph {
    vertices: Vec<Vertex>,
    adjacency: HashMap<Vertex, Vec<(Vertex, f64)>>,
}

impl ExplicitGraph {
    /// Builds the graph. An edge `(u, v, b)` sets both `b(u,v)` and `b(v,u)`
    /// unless the reverse direction is listed separately.
    pub fn new(
        vertices: impl IntoIterator<Item = Vertex>,
        edges: impl IntoIterator<Item = (Vertex, Vertex, f64)>,
    ) -> Result<Self> {
        let mut vertices: Vec<Vertex> = vertices.into_iter().collect();
        vertices.sort();
        vertices.dedup();
        if vertices.is_empty() {
            return Err(Error::Parse("graph has no vertices".into()));
        }
        let known: HashSet<Vertex> = vertices.iter().copied().collect();

        let mut directed: HashMap<(Vertex, Vertex), f64> = HashMap::new();
        for (u, v, b) in edges {
            for w in [u, v] {
                if !known.contains(&w) {
                    return Err(Error::UnknownVertex(w));
                }
            }
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Parse(format!("edge ({u}, {v}) has invalid weight {b}")));
            }
            if directed.insert((u, v), b).is_some() {
                return Err(Error::Parse(format!("edge ({u}, {v}) listed twice")));
            }
        }
        let mirrored: Vec<((Vertex, Vertex), f64)> = directed
            .iter()
            .filter(|((u, v), _)| u != v && !directed.contains_key(&(*v, *u)))
            .map(|(&(u, v), &b)| ((v, u), b))
            .collect();
        directed.extend(mirrored);

        let mut adjacency: HashMap<Vertex, Vec<(Vertex, f64)>> =
            vertices.iter().map(|&v| (v, Vec::new())).collect();
        for ((u, v), b) in directed {
            if b > 0.0 {
                adjacency.get_mut(&u).expect("checked above").push((v, b));
            }
        }
        for list in adjacency.values_mut() {
            list.sort_by_key(|a| a.0);
        }
        Ok(ExplicitGraph {
            vertices,
            adjacency,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Directed edge list `(u, v, b(u,v))` in canonical order.
    pub fn directed_edges(&self) -> Vec<(Vertex, Vertex, f64)> {
        let mut out = Vec::new();
        for u in &self.vertices {
            for &(v, b) in &self.adjacency[u] {
                out.push((*u, v, b));
            }
        }
        out
    }
}

/// How the edge structure is presented.
#[derive(Clone, Debug)]
pub enum Topology {
    /// `ℤ^dim` with unit nearest-neighbor weights.
    Lattice { dim: usize },
    /// Rooted `arity`-ary tree with unit weights; vertices are level-order
    /// ids, root `0`, children of `i` are `arity·i + 1 ..= arity·i + arity`.
    Tree { arity: u32 },
    /// `ℕ₀ = {0, 1, …}` with `b(n, n+1) = 1`.
    HalfLine,
    /// `ℕ = {1, 2, …}` with `b(n, n+1) = 1`; the edge to the removed vertex
    /// `0` is encoded by adding `1` to `q(1)`.
    HalfLineDirichlet,
    Explicit(ExplicitGraph),
}

/// A real function on vertices (potential or measure).
#[derive(Clone)]
pub enum Field {
    Constant(f64),
    Table {
        default: f64,
        values: HashMap<Vertex, f64>,
    },
    Func(Arc<dyn Fn(&Vertex) -> f64 + Send + Sync>),
}

impl Field {
    pub fn eval(&self, x: &Vertex) -> f64 {
        match self {
            Field::Constant(c) => *c,
            Field::Table { default, values } => values.get(x).copied().unwrap_or(*default),
            Field::Func(f) => f(x),
        }
    }

    pub fn func(f: impl Fn(&Vertex) -> f64 + Send + Sync + 'static) -> Self {
        Field::Func(Arc::new(f))
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Constant(c) => write!(f, "Constant({c})"),
            Field::Table { default, values } => {
                write!(f, "Table {{ default: {default}, entries: {} }}", values.len())
            }
            Field::Func(_) => write!(f, "Func(..)"),
        }
    }
}

/// Edge weights `b`, potential `q` and measure `m` over a vertex universe.
#[derive(Clone, Debug)]
pub struct GraphModel {
    topology: Topology,
    potential: Field,
    measure: Field,
}

impl GraphModel {
    pub fn new(topology: Topology) -> Self {
        GraphModel {
            topology,
            potential: Field::Constant(0.0),
            measure: Field::Constant(1.0),
        }
    }

    pub fn lattice(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedPresentation(format!(
                "lattice dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        Ok(Self::new(Topology::Lattice { dim }))
    }

    pub fn tree(arity: u32) -> Result<Self> {
        if arity < 1 {
            return Err(Error::UnsupportedPresentation("tree arity must be ≥ 1".into()));
        }
        Ok(Self::new(Topology::Tree { arity }))
    }

    pub fn half_line() -> Self {
        Self::new(Topology::HalfLine)
    }

    pub fn half_line_dirichlet() -> Self {
        Self::new(Topology::HalfLineDirichlet)
    }

    pub fn explicit(graph: ExplicitGraph) -> Self {
        Self::new(Topology::Explicit(graph))
    }

    pub fn with_potential(mut self, q: Field) -> Self {
        self.potential = q;
        self
    }

    pub fn with_measure(mut self, m: Field) -> Self {
        self.measure = m;
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn potential_field(&self) -> &Field {
        &self.potential
    }

    pub fn measure_field(&self) -> &Field {
        &self.measure
    }

    pub fn contains(&self, x: &Vertex) -> bool {
        match &self.topology {
            Topology::Lattice { dim } => x.dim() == *dim,
            Topology::Tree { .. } | Topology::HalfLine => x.dim() == 1 && x.first() >= 0,
            Topology::HalfLineDirichlet => x.dim() == 1 && x.first() >= 1,
            Topology::Explicit(g) => g.adjacency.contains_key(x),
        }
    }

    /// Vertex used as the exhaustion center when none is given.
    pub fn default_anchor(&self) -> Vertex {
        match &self.topology {
            Topology::Lattice { dim } => Vertex::origin(*dim).expect("dimension validated"),
            Topology::Tree { .. } | Topology::HalfLine => Vertex::id(0),
            Topology::HalfLineDirichlet => Vertex::id(1),
            Topology::Explicit(g) => g.vertices[0],
        }
    }

    /// Replaces the contents of `buf` with the neighbors `y` of `x` and the
    /// weights `b(x, y) > 0`. Includes `x` itself if a self-loop was given.
    pub fn neighbors_into(&self, x: &Vertex, buf: &mut Vec<(Vertex, f64)>) -> Result<()> {
        buf.clear();
        if !self.contains(x) {
            return Err(Error::UnknownVertex(*x));
        }
        match &self.topology {
            Topology::Lattice { dim } => {
                for axis in 0..*dim {
                    buf.push((x.shifted(axis, -1), 1.0));
                    buf.push((x.shifted(axis, 1), 1.0));
                }
            }
            Topology::Tree { arity } => {
                let id = x.first();
                let k = *arity as i64;
                if id > 0 {
                    buf.push((Vertex::id((id - 1) / k), 1.0));
                }
                let first_child = id
                    .checked_mul(k)
                    .and_then(|c| c.checked_add(k))
                    .ok_or_else(|| {
                        Error::UnsupportedPresentation(format!(
                            "tree vertex {id} has children beyond the id range"
                        ))
                    })?
                    - k
                    + 1;
                for c in 0..k {
                    buf.push((Vertex::id(first_child + c), 1.0));
                }
            }
            Topology::HalfLine => {
                let n = x.first();
                if n > 0 {
                    buf.push((Vertex::id(n - 1), 1.0));
                }
                buf.push((Vertex::id(n + 1), 1.0));
            }
            Topology::HalfLineDirichlet => {
                let n = x.first();
                if n > 1 {
                    buf.push((Vertex::id(n - 1), 1.0));
                }
                buf.push((Vertex::id(n + 1), 1.0));
            }
            Topology::Explicit(g) => buf.extend_from_slice(&g.adjacency[x]),
        }
        Ok(())
    }

    pub fn neighbors(&self, x: &Vertex) -> Result<Vec<(Vertex, f64)>> {
        let mut buf = Vec::new();
        self.neighbors_into(x, &mut buf)?;
        Ok(buf)
    }

    /// `b(x, y)`, zero for non-neighbors.
    pub fn weight(&self, x: &Vertex, y: &Vertex) -> Result<f64> {
        Ok(self
            .neighbors(x)?
            .into_iter()
            .find(|(z, _)| z == y)
            .map_or(0.0, |(_, b)| b))
    }

    /// `B(x) = Σ_y b(x, y)`.
    pub fn weighted_degree(&self, x: &Vertex) -> Result<f64> {
        Ok(self.neighbors(x)?.iter().map(|(_, b)| b).sum())
    }

    /// Potential `q(x)`, including the killed edge of the Dirichlet half-line.
    pub fn potential(&self, x: &Vertex) -> f64 {
        let killed = match self.topology {
            Topology::HalfLineDirichlet if x.first() == 1 => 1.0,
            _ => 0.0,
        };
        self.potential.eval(x) + killed
    }

    pub fn measure(&self, x: &Vertex) -> f64 {
        self.measure.eval(x)
    }

    /// True when every vertex has the same measure 1.
    pub fn has_counting_measure(&self) -> bool {
        matches!(self.measure, Field::Constant(c) if c == 1.0)
    }

    /// All vertices, for finite presentations.
    pub fn finite_vertices(&self) -> Option<&[Vertex]> {
        match &self.topology {
            Topology::Explicit(g) => Some(&g.vertices),
            _ => None,
        }
    }
}

/// Outcome of [`validate`]. Every defect is reported; nothing is thrown.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub unknown_vertices: Vec<Vertex>,
    /// `(x, y, b(x,y), b(y,x))` with `b(x,y) ≠ b(y,x)`.
    pub symmetry_violations: Vec<(Vertex, Vertex, f64, f64)>,
    pub diagonal_violations: Vec<(Vertex, f64)>,
    pub measure_violations: Vec<(Vertex, f64)>,
    pub nonfinite_potential: Vec<Vertex>,
    /// Number of connected components of the graph induced on the probes.
    pub probe_components: usize,
    pub connected: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.unknown_vertices.is_empty()
            && self.symmetry_violations.is_empty()
            && self.diagonal_violations.is_empty()
            && self.measure_violations.is_empty()
            && self.nonfinite_potential.is_empty()
            && self.connected
    }
}

/// Checks the standing assumptions on `probes` and whether the probes span a
/// connected subgraph.
pub fn validate(model: &GraphModel, probes: &[Vertex]) -> Result<ValidationReport> {
    if probes.is_empty() {
        return Err(Error::Precondition("probe set must be nonempty".into()));
    }
    let mut report = ValidationReport::default();
    let probe_set: HashSet<Vertex> = probes.iter().copied().collect();
    let mut buf = Vec::new();
    let mut back = Vec::new();
    let mut seen_pairs = HashSet::new();

    for x in &probe_set {
        if model.neighbors_into(x, &mut buf).is_err() {
            report.unknown_vertices.push(*x);
            continue;
        }
        let m = model.measure(x);
        if !(m.is_finite() && m > 0.0) {
            report.measure_violations.push((*x, m));
        }
        if !model.potential(x).is_finite() {
            report.nonfinite_potential.push(*x);
        }
        for &(y, b) in &buf {
            if y == *x {
                report.diagonal_violations.push((*x, b));
                continue;
            }
            let key = if *x < y { (*x, y) } else { (y, *x) };
            if !seen_pairs.insert(key) {
                continue;
            }
            let reverse = match model.neighbors_into(&y, &mut back) {
                Ok(()) => back.iter().find(|(z, _)| z == x).map_or(0.0, |(_, c)| *c),
                Err(_) => 0.0,
            };
            if reverse != b {
                report.symmetry_violations.push((*x, y, b, reverse));
            }
        }
    }

    // Components of the subgraph induced on the probes.
    let mut unvisited: HashSet<Vertex> = probe_set
        .iter()
        .filter(|v| !report.unknown_vertices.contains(v))
        .copied()
        .collect();
    let mut components = 0;
    let mut queue = VecDeque::new();
    let mut ordered: Vec<Vertex> = unvisited.iter().copied().collect();
    ordered.sort();
    for start in ordered {
        if !unvisited.remove(&start) {
            continue;
        }
        components += 1;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            model.neighbors_into(&v, &mut buf)?;
            for &(y, _) in &buf {
                if unvisited.remove(&y) {
                    queue.push_back(y);
                }
            }
        }
    }
    report.unknown_vertices.sort();
    report.probe_components = components;
    report.connected = components == 1 && report.unknown_vertices.is_empty();
    Ok(report)
}

/// Shape of the balls used by an exhaustion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallShape {
    /// Combinatorial (graph-distance) balls; on `ℤ^d` these are ℓ¹ balls.
    Graph,
    /// ℓ^∞ boxes, lattices only.
    Linf,
}

/// A finite vertex set `K` with its induced edges and boundary `∂K`.
#[derive(Clone, Debug)]
pub struct FiniteRegion {
    level: usize,
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    /// `(i, j, b)` with `i < j`, each inner edge once.
    induced_edges: Vec<(usize, usize, f64)>,
    /// `(i, y, b)` with `vertices[i] ∈ K`, `y ∉ K`.
    boundary_edges: Vec<(usize, Vertex, f64)>,
    interior: Vec<bool>,
    degree: Vec<f64>,
}

impl FiniteRegion {
    /// Materializes the region spanned by `vertices` (sorted canonically).
    ///
    /// Fails if a stored weight is asymmetric or a self-loop is present.
    pub fn build(model: &GraphModel, level: usize, vertices: Vec<Vertex>) -> Result<Self> {
        let mut vertices = vertices;
        vertices.sort();
        vertices.dedup();
        let index: HashMap<Vertex, usize> =
            vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();

        let mut induced = Vec::new();
        let mut pending: HashMap<(usize, usize), f64> = HashMap::new();
        let mut boundary = Vec::new();
        let mut interior = vec![true; vertices.len()];
        let mut degree = vec![0.0; vertices.len()];
        let mut buf = Vec::new();
        let mut back = Vec::new();

        for (i, x) in vertices.iter().enumerate() {
            model.neighbors_into(x, &mut buf)?;
            for &(y, b) in &buf {
                if y == *x {
                    return Err(Error::AssumptionViolation(format!(
                        "b({x},{x}) = {b} must vanish"
                    )));
                }
                degree[i] += b;
                match index.get(&y) {
                    Some(&j) => {
                        let key = (i.min(j), i.max(j));
                        match pending.remove(&key) {
                            Some(other) if other == b => induced.push((key.0, key.1, b)),
                            Some(other) => {
                                return Err(Error::AssumptionViolation(format!(
                                    "asymmetric weight between {x} and {y}: {b} vs {other}"
                                )))
                            }
                            None => {
                                pending.insert(key, b);
                            }
                        }
                    }
                    None => {
                        model.neighbors_into(&y, &mut back)?;
                        let reverse = back.iter().find(|(z, _)| z == x).map_or(0.0, |(_, c)| *c);
                        if reverse != b {
                            return Err(Error::AssumptionViolation(format!(
                                "asymmetric weight between {x} and {y}: {b} vs {reverse}"
                            )));
                        }
                        interior[i] = false;
                        boundary.push((i, y, b));
                    }
                }
            }
        }
        if let Some(((i, j), _)) = pending.into_iter().next() {
            return Err(Error::AssumptionViolation(format!(
                "edge between {} and {} is only stored in one direction",
                vertices[i], vertices[j]
            )));
        }
        induced.sort_by_key(|a| (a.0, a.1));
        Ok(FiniteRegion {
            level,
            vertices,
            index,
            induced_edges: induced,
            boundary_edges: boundary,
            interior,
            degree,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn index_of(&self, x: &Vertex) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &Vertex) -> bool {
        self.index.contains_key(x)
    }

    pub fn induced_edges(&self) -> &[(usize, usize, f64)] {
        &self.induced_edges
    }

    pub fn boundary_edges(&self) -> &[(usize, Vertex, f64)] {
        &self.boundary_edges
    }

    /// Whether vertex `i` has all of its neighbors inside the region.
    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    /// Full weighted degree `B(x)` of vertex `i`, boundary edges included.
    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    /// Graph distances from vertex `i` inside the induced subgraph
    /// (`usize::MAX` when unreachable).
    pub fn distances_from(&self, i: usize) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(a, b, _) in &self.induced_edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut dist = vec![usize::MAX; self.len()];
        dist[i] = 0;
        let mut queue = VecDeque::from([i]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// True if the induced subgraph is connected.
    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.distances_from(0).iter().all(|&d| d != usize::MAX)
    }
}

/// Nested balls `K_n` around an anchor vertex.
#[derive(Clone, Debug)]
pub struct ExhaustionFamily {
    model: Arc<GraphModel>,
    anchor: Vertex,
    shape: BallShape,
    first_level: usize,
}

impl ExhaustionFamily {
    /// Graph-distance balls around `anchor`. Level `n` is the ball of radius
    /// `n`, except on the Dirichlet half-line where level `n` is `{1..n}`.
    pub fn new(model: impl Into<Arc<GraphModel>>, anchor: Vertex) -> Result<Self> {
        let model = model.into();
        if !model.contains(&anchor) {
            return Err(Error::UnknownVertex(anchor));
        }
        let first_level = match model.topology() {
            Topology::HalfLineDirichlet => 1,
            _ => 0,
        };
        Ok(ExhaustionFamily {
            model,
            anchor,
            shape: BallShape::Graph,
            first_level,
        })
    }

    /// Family anchored at the model's default anchor.
    pub fn anchored(model: impl Into<Arc<GraphModel>>) -> Result<Self> {
        let model = model.into();
        let anchor = model.default_anchor();
        Self::new(model, anchor)
    }

    pub fn with_shape(mut self, shape: BallShape) -> Result<Self> {
        if shape == BallShape::Linf && !matches!(self.model.topology(), Topology::Lattice { .. }) {
            return Err(Error::UnsupportedPresentation(
                "ℓ^∞ balls are only defined on lattices".into(),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Shifts level numbering so that level `first_level` is the radius-0 ball.
    pub fn with_first_level(mut self, first_level: usize) -> Self {
        self.first_level = first_level;
        self
    }

    pub fn model(&self) -> &GraphModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<GraphModel> {
        Arc::clone(&self.model)
    }

    pub fn anchor(&self) -> Vertex {
        self.anchor
    }

    pub fn shape(&self) -> BallShape {
        self.shape
    }

    pub fn first_level(&self) -> usize {
        self.first_level
    }

    /// Vertices of `K_n` in canonical order.
    pub fn region_vertices(&self, n: usize) -> Result<Vec<Vertex>> {
        if n < self.first_level {
            return Err(Error::Domain(format!(
                "level {n} is below the first level {} of this family",
                self.first_level
            )));
        }
        let radius = n - self.first_level;
        let anchor = self.anchor;
        let in_box = |v: &Vertex| {
            v.coords()
                .iter()
                .zip(anchor.coords())
                .all(|(a, b)| (a - b).unsigned_abs() as usize <= radius)
        };
        let mut depth: HashMap<Vertex, usize> = HashMap::from([(anchor, 0)]);
        let mut queue = VecDeque::from([anchor]);
        let mut buf = Vec::new();
        while let Some(v) = queue.pop_front() {
            let d = depth[&v];
            if self.shape == BallShape::Graph && d == radius {
                continue;
            }
            self.model.neighbors_into(&v, &mut buf)?;
            for &(y, _) in &buf {
                if depth.contains_key(&y) {
                    continue;
                }
                if self.shape == BallShape::Linf && !in_box(&y) {
                    continue;
                }
                depth.insert(y, d + 1);
                queue.push_back(y);
            }
        }
        let mut vertices: Vec<Vertex> = depth.into_keys().collect();
        vertices.sort();
        Ok(vertices)
    }

    /// Materializes `K_n`.
    pub fn region(&self, n: usize) -> Result<Arc<FiniteRegion>> {
        let vertices = self.region_vertices(n)?;
        Ok(Arc::new(FiniteRegion::build(&self.model, n, vertices)?))
    }

    /// `K_n \ K_hole`, the truncation of the complement of a finite hole.
    pub fn region_minus(&self, n: usize, hole: usize) -> Result<Arc<FiniteRegion>> {
        let removed: HashSet<Vertex> = self.region_vertices(hole)?.into_iter().collect();
        let vertices = self
            .region_vertices(n)?
            .into_iter()
            .filter(|v| !removed.contains(v))
            .collect();
        Ok(Arc::new(FiniteRegion::build(&self.model, n, vertices)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_vertex() -> GraphModel {
        GraphModel::explicit(
            ExplicitGraph::new([Vertex::id(1), Vertex::id(2)], [(Vertex::id(1), Vertex::id(2), 1.0)])
                .unwrap(),
        )
    }

    #[test]
    fn weighted_degree_examples() {
        assert_eq!(GraphModel::half_line().weighted_degree(&Vertex::id(0)).unwrap(), 1.0);
        let z = GraphModel::lattice(1).unwrap();
        assert_eq!(z.weighted_degree(&Vertex::id(0)).unwrap(), 2.0);
        let z3 = GraphModel::lattice(3).unwrap();
        assert_eq!(z3.weighted_degree(&Vertex::origin(3).unwrap()).unwrap(), 6.0);
        assert!(matches!(
            GraphModel::half_line().weighted_degree(&Vertex::id(-1)),
            Err(Error::UnknownVertex(_))
        ));
    }

    #[test]
    fn validate_flags_defects() {
        let ok = validate(&two_vertex(), &[Vertex::id(1), Vertex::id(2)]).unwrap();
        assert!(ok.passed());

        let asym = GraphModel::explicit(
            ExplicitGraph::new(
                [Vertex::id(1), Vertex::id(2)],
                [
                    (Vertex::id(1), Vertex::id(2), 1.0),
                    (Vertex::id(2), Vertex::id(1), 2.0),
                ],
            )
            .unwrap(),
        );
        let r = validate(&asym, &[Vertex::id(1), Vertex::id(2)]).unwrap();
        assert_eq!(r.symmetry_violations.len(), 1);
        assert!(!r.passed());

        let ids: Vec<Vertex> = (1..=4).map(Vertex::id).collect();
        let split = GraphModel::explicit(
            ExplicitGraph::new(
                ids.clone(),
                [(ids[0], ids[1], 1.0), (ids[2], ids[3], 1.0)],
            )
            .unwrap(),
        );
        let r = validate(&split, &ids).unwrap();
        assert!(!r.connected);
        assert_eq!(r.probe_components, 2);
    }

    #[test]
    fn validate_flags_loops_and_measure() {
        let g = ExplicitGraph::new(
            [Vertex::id(1), Vertex::id(2)],
            [(Vertex::id(1), Vertex::id(1), 0.5), (Vertex::id(1), Vertex::id(2), 1.0)],
        )
        .unwrap();
        let model = GraphModel::explicit(g).with_measure(Field::Constant(0.0));
        let r = validate(&model, &[Vertex::id(1), Vertex::id(2)]).unwrap();
        assert_eq!(r.diagonal_violations, vec![(Vertex::id(1), 0.5)]);
        assert_eq!(r.measure_violations.len(), 2);
        assert!(validate(&model, &[]).is_err());
    }

    #[test]
    fn path_regions() {
        let z = ExhaustionFamily::anchored(GraphModel::lattice(1).unwrap()).unwrap();
        let k = z.region(2).unwrap();
        let ids: Vec<i64> = k.vertices().iter().map(|v| v.first()).collect();
        assert_eq!(ids, vec![-2, -1, 0, 1, 2]);
        let outer: Vec<(i64, i64)> = k
            .boundary_edges()
            .iter()
            .map(|(i, y, _)| (k.vertices()[*i].first(), y.first()))
            .collect();
        assert_eq!(outer, vec![(-2, -3), (2, 3)]);

        let n0 = ExhaustionFamily::anchored(GraphModel::half_line()).unwrap();
        let k = n0.region(3).unwrap();
        assert_eq!(k.len(), 4);
        assert_eq!(k.boundary_edges().len(), 1);
        assert_eq!(k.boundary_edges()[0].1, Vertex::id(4));

        let dirichlet = ExhaustionFamily::anchored(GraphModel::half_line_dirichlet()).unwrap();
        let k = dirichlet.region(3).unwrap();
        let ids: Vec<i64> = k.vertices().iter().map(|v| v.first()).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert!(dirichlet.region(0).is_err());
    }

    /// Brute-force count over the cube `[-3, 3]^3`, independent of the BFS.
    fn l1_ball_counts(radius: i64) -> (usize, usize) {
        let inside = |p: [i64; 3]| p.iter().map(|c| c.abs()).sum::<i64>() <= radius;
        let mut vertices = 0;
        let mut exits = 0;
        let r = radius + 1;
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let p = [x, y, z];
                    if !inside(p) {
                        continue;
                    }
                    vertices += 1;
                    for axis in 0..3 {
                        for d in [-1, 1] {
                            let mut q = p;
                            q[axis] += d;
                            if !inside(q) {
                                exits += 1;
                            }
                        }
                    }
                }
            }
        }
        (vertices, exits)
    }

    #[test]
    fn z3_l1_ball_matches_enumeration() {
        let fam = ExhaustionFamily::anchored(GraphModel::lattice(3).unwrap()).unwrap();
        for radius in 0..4 {
            let k = fam.region(radius as usize).unwrap();
            let (v, e) = l1_ball_counts(radius);
            assert_eq!((k.len(), k.boundary_edges().len()), (v, e));
        }
        let k = fam.region(1).unwrap();
        assert_eq!((k.len(), k.boundary_edges().len()), (7, 30));
    }

    #[test]
    fn linf_box() {
        let fam = ExhaustionFamily::anchored(GraphModel::lattice(2).unwrap())
            .unwrap()
            .with_shape(BallShape::Linf)
            .unwrap();
        assert_eq!(fam.region(2).unwrap().len(), 25);
        assert!(ExhaustionFamily::anchored(GraphModel::half_line())
            .unwrap()
            .with_shape(BallShape::Linf)
            .is_err());
    }

    #[test]
    fn tree_depth_balls() {
        let fam = ExhaustionFamily::anchored(GraphModel::tree(2).unwrap()).unwrap();
        let k = fam.region(3).unwrap();
        assert_eq!(k.len(), 15);
        // 8 leaves, each with 2 children outside.
        assert_eq!(k.boundary_edges().len(), 16);
        assert_eq!(k.degree(0), 2.0);
    }

    #[test]
    fn region_rejects_asymmetry() {
        let asym = GraphModel::explicit(
            ExplicitGraph::new(
                [Vertex::id(1), Vertex::id(2)],
                [
                    (Vertex::id(1), Vertex::id(2), 1.0),
                    (Vertex::id(2), Vertex::id(1), 2.0),
                ],
            )
            .unwrap(),
        );
        let fam = ExhaustionFamily::anchored(asym).unwrap();
        assert!(matches!(fam.region(1), Err(Error::AssumptionViolation(_))));
    }

    #[test]
    fn vertex_text_round_trip() {
        for v in [Vertex::id(-4), Vertex::point(&[1, -2, 3]).unwrap()] {
            let parsed: Vertex = v.to_string().parse().unwrap();
            assert_eq!(parsed, v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<Vertex>(&json).unwrap(), v);
        }
        assert!("[1,2,3,4,5,6,7]".parse::<Vertex>().is_err());
    }
}
