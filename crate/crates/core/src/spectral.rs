//! Bottom of the spectrum along exhaustions, hole probes for the essential
//! spectrum, positive-supersolution witnesses and local Harnack constants.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::criticality::{EvidenceSeries, Monotonicity};
use crate::error::{Error, Result};
use crate::forms::{apply_h, RegionFunction};
use crate::graph::{ExhaustionFamily, Field, FiniteRegion, GraphModel, Vertex};
use crate::solver::{assemble, DirichletSystem};

pub const WITNESS_TOLERANCE: f64 = 1e-8;
pub const HARNACK_CAP: usize = 16;

pub const INFINITE_GRAPH_CAVEAT: &str = "Truncation values bound the infinite-graph quantity from \
above; equality in the limit is not certified.";

fn level_range(family: &ExhaustionFamily, n_max: usize) -> Result<Vec<usize>> {
    let first = family.first_level();
    if n_max < first {
        return Err(Error::Domain(format!("level {n_max} is below the first level {first}")));
    }
    Ok((first..=n_max).collect())
}

/// `λ_min(K_n)` of `m^{-1} H` at the given levels.
pub fn lambda0_series_at(family: &ExhaustionFamily, levels: &[usize]) -> Result<EvidenceSeries> {
    let values = levels
        .par_iter()
        .map(|&n| Ok(assemble(family, n)?.lambda_min()?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvidenceSeries::new("lambda0", levels.to_vec(), values, Monotonicity::Decreasing))
}

pub fn lambda0_series(family: &ExhaustionFamily, n_max: usize) -> Result<EvidenceSeries> {
    lambda0_series_at(family, &level_range(family, n_max)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct HoleSeries {
    pub hole_level: usize,
    /// `λ_min(K_n \ K_hole)` for `n` above the hole.
    pub series: EvidenceSeries,
}

#[derive(Clone, Debug, Serialize)]
pub struct EssentialProbe {
    pub lambda0: EvidenceSeries,
    pub holes: Vec<HoleSeries>,
    /// Largest final value over all holes.
    pub lower_estimate: f64,
    pub caveat: String,
}

/// Bottom of the spectrum outside finite holes `K_k`, for each `k` in `hole_levels`.
pub fn lambda0_ess_probe(family: &ExhaustionFamily, hole_levels: &[usize], n_max: usize) -> Result<EssentialProbe> {
    if let Some(k) = hole_levels.iter().find(|k| **k >= n_max) {
        return Err(Error::Precondition(format!("hole level {k} must be below {n_max}")));
    }
    let lambda0 = lambda0_series(family, n_max)?;
    let model = family.model();
    let holes = hole_levels
        .iter()
        .map(|&k| {
            // Levels that add nothing outside the hole (finite graphs) are skipped.
            let pairs = (k + 1..=n_max)
                .into_par_iter()
                .map(|n| {
                    let region = family.region_minus(n, k)?;
                    if region.is_empty() {
                        return Ok(None);
                    }
                    Ok(Some((n, DirichletSystem::new(model, region)?.lambda_min()?.value)))
                })
                .collect::<Result<Vec<Option<(usize, f64)>>>>()?;
            let (levels, values) = pairs.into_iter().flatten().unzip();
            Ok(HoleSeries {
                hole_level: k,
                series: EvidenceSeries::new("lambda0-outside-hole", levels, values, Monotonicity::Decreasing),
            })
        })
        .collect::<Result<Vec<HoleSeries>>>()?;
    let lower_estimate = holes
        .iter()
        .filter_map(|h| h.series.last())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EssentialProbe {
        lambda0,
        holes,
        lower_estimate,
        caveat: INFINITE_GRAPH_CAVEAT.to_string(),
    })
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub lambda: f64,
    /// `u = (H_K − λm)^{-1} 1_x`.
    pub u: RegionFunction,
    pub min_value: f64,
    /// `max |(H − λm)u − 1_x|` over the interior of `K_N`.
    pub residual: f64,
    /// Smallest `(H − λm)u` over the interior.
    pub min_action: f64,
    pub passed: bool,
}

/// Positive supersolution of `H − λm` on the interior of `K_N`.
pub fn ap_witness(family: &ExhaustionFamily, lambda: f64, x: &Vertex, n: usize) -> Result<Witness> {
    let system = assemble(family, n)?;
    let model = family.model();
    let region = Arc::clone(system.region());
    let mut rhs = RegionFunction::indicator(Arc::clone(&region), x)?;
    let mx = model.measure(x);
    rhs = rhs.scaled(1.0 / mx);
    let u = system.resolvent_apply(lambda, &rhs)?;
    let min_value = u.values().iter().copied().fold(f64::INFINITY, f64::min);
    let (residual, min_action) = region
        .vertices()
        .par_iter()
        .enumerate()
        .filter(|(i, _)| region.is_interior(*i))
        .map(|(i, y)| {
            let action = apply_h(model, &u, y)? - lambda * model.measure(y) * u.values()[i];
            let target = if y == x { 1.0 } else { 0.0 };
            Ok(((action - target).abs(), action))
        })
        .try_fold(
            || (0.0f64, f64::INFINITY),
            |acc, r: Result<(f64, f64)>| r.map(|(res, act)| (acc.0.max(res), acc.1.min(act))),
        )
        .try_reduce(|| (0.0, f64::INFINITY), |a, b| Ok((a.0.max(b.0), a.1.min(b.1))))?;
    let passed = min_value > 0.0 && residual <= WITNESS_TOLERANCE && min_action >= -WITNESS_TOLERANCE;
    Ok(Witness {
        lambda,
        u,
        min_value,
        residual,
        min_action,
        passed,
    })
}

/// Connected finite set `W` with `d(x) = B(x) + q(x) − f(x)`.
#[derive(Clone, Debug)]
pub struct HarnackInstance {
    vertices: Vec<Vertex>,
    d: Vec<f64>,
    /// `(i, j, b)` for every ordered pair of adjacent vertices in `W`.
    arcs: Vec<Vec<(usize, f64)>>,
}

impl HarnackInstance {
    pub fn new(model: &GraphModel, vertices: &[Vertex], f: &Field) -> Result<Self> {
        Self::with_cap(model, vertices, f, HARNACK_CAP)
    }

    pub fn with_cap(model: &GraphModel, vertices: &[Vertex], f: &Field, cap: usize) -> Result<Self> {
        let mut vertices = vertices.to_vec();
        vertices.sort();
        vertices.dedup();
        if vertices.is_empty() {
            return Err(Error::Domain("empty vertex set".into()));
        }
        if vertices.len() > cap {
            return Err(Error::SizeLimit { size: vertices.len(), cap });
        }
        let region = FiniteRegion::build(model, 0, vertices.clone())?;
        if !region.is_connected() {
            return Err(Error::Disconnected);
        }
        let d = vertices
            .iter()
            .enumerate()
            .map(|(i, x)| region.degree(i) + model.potential(x) - f.eval(x))
            .collect();
        let mut arcs = vec![Vec::new(); vertices.len()];
        for &(i, j, b) in region.induced_edges() {
            arcs[i].push((j, b));
            arcs[j].push((i, b));
        }
        Ok(HarnackInstance { vertices, d, arcs })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnackBound {
    /// `None` when some `d(x) ≤ 0`: no finite constant is certified.
    pub constant: Option<f64>,
    /// Ordered pair `(a, z)` attaining the maximum.
    pub worst_pair: Option<(Vertex, Vertex)>,
}

/// Cheapest simple-path products from `source` to every vertex.
fn cheapest_products(inst: &HarnackInstance, source: usize) -> Vec<f64> {
    let n = inst.vertices.len();
    let min_factor = inst
        .arcs
        .iter()
        .enumerate()
        .flat_map(|(i, arcs)| arcs.iter().map(move |(_, b)| inst.d[i] / b))
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    let mut best = vec![f64::INFINITY; n];
    best[source] = 1.0;
    let mut on_path = vec![false; n];
    on_path[source] = true;

    fn visit(
        inst: &HarnackInstance,
        v: usize,
        product: f64,
        depth: usize,
        min_factor: f64,
        on_path: &mut [bool],
        best: &mut [f64],
    ) {
        let n = inst.vertices.len();
        // No extension of this path can beat every current best value.
        let remaining = (n - 1 - depth) as i32;
        let bound = product * min_factor.powi(remaining.max(0));
        let worst = (0..n).filter(|z| !on_path[*z]).map(|z| best[z]).fold(f64::NEG_INFINITY, f64::max);
        if bound >= worst {
            return;
        }
        for &(w, b) in &inst.arcs[v] {
            if on_path[w] {
                continue;
            }
            let next = product * inst.d[v] / b;
            if next < best[w] {
                best[w] = next;
            }
            on_path[w] = true;
            visit(inst, w, next, depth + 1, min_factor, on_path, best);
            on_path[w] = false;
        }
    }

    visit(inst, source, 1.0, 0, min_factor, &mut on_path, &mut best);
    best
}

/// `C = max_{(a,z)} min_{paths a→z} Π d(x_j)/b(x_j, x_{j+1})`, so that
/// `max_W u ≤ C min_W u` for every `u ≥ 0` with `(H − f)u ≥ 0` on `W`.
pub fn harnack_constant(inst: &HarnackInstance) -> HarnackBound {
    if inst.d.iter().any(|d| *d <= 0.0) {
        return HarnackBound {
            constant: None,
            worst_pair: None,
        };
    }
    let n = inst.vertices.len();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|a| cheapest_products(inst, a)).collect();
    let mut constant = 1.0;
    let mut worst = (inst.vertices[0], inst.vertices[0]);
    for (a, row) in rows.iter().enumerate() {
        for (z, c) in row.iter().enumerate() {
            if a != z && *c > constant {
                constant = *c;
                worst = (inst.vertices[a], inst.vertices[z]);
            }
        }
    }
    HarnackBound {
        constant: Some(constant),
        worst_pair: Some(worst),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ExplicitGraph;
    use std::f64::consts::PI;

    fn edge() -> GraphModel {
        GraphModel::explicit(
            ExplicitGraph::new([Vertex::id(1), Vertex::id(2)], [(Vertex::id(1), Vertex::id(2), 1.0)])
                .unwrap(),
        )
    }

    fn star() -> GraphModel {
        let v = [0, 1, 2].map(Vertex::id);
        GraphModel::explicit(ExplicitGraph::new(v, [(v[0], v[1], 1.0), (v[0], v[2], 1.0)]).unwrap())
    }

    fn single(q: f64) -> ExhaustionFamily {
        let model = GraphModel::explicit(ExplicitGraph::new([Vertex::id(1)], []).unwrap())
            .with_potential(Field::Constant(q));
        ExhaustionFamily::anchored(model).unwrap()
    }

    #[test]
    fn lambda0_examples() {
        let family = ExhaustionFamily::anchored(GraphModel::half_line_dirichlet()).unwrap();
        let s = lambda0_series(&family, 30).unwrap();
        for (n, v) in s.levels.iter().zip(&s.values) {
            let exact = 4.0 * (PI / (2.0 * (*n as f64 + 1.0))).sin().powi(2);
            assert!((v - exact).abs() < 1e-9);
        }
        assert_eq!(s.monotonicity_violation(1e-10), None);
        assert_eq!(lambda0_series(&single(5.0), 0).unwrap().values, vec![5.0]);

        let shifted = GraphModel::lattice(1).unwrap().with_potential(Field::Constant(1.0));
        let plain = lambda0_series(&ExhaustionFamily::anchored(GraphModel::lattice(1).unwrap()).unwrap(), 12).unwrap();
        let s = lambda0_series(&ExhaustionFamily::anchored(shifted).unwrap(), 12).unwrap();
        for (a, b) in s.values.iter().zip(&plain.values) {
            assert!((a - b - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hole_probes() {
        let z = ExhaustionFamily::anchored(GraphModel::lattice(1).unwrap()).unwrap();
        let p = lambda0_ess_probe(&z, &[0, 2], 20).unwrap();
        assert!(p.lower_estimate < 0.05);

        let bump = GraphModel::lattice(1)
            .unwrap()
            .with_potential(Field::func(|x| if x.first() == 0 { 5.0 } else { 0.0 }));
        let bumped = lambda0_ess_probe(&ExhaustionFamily::anchored(bump).unwrap(), &[0], 15).unwrap();
        let pure = lambda0_ess_probe(&z, &[0], 15).unwrap();
        for (a, b) in bumped.holes[0].series.values.iter().zip(&pure.holes[0].series.values) {
            assert!((a - b).abs() < 1e-12);
        }

        let dip = GraphModel::half_line().with_potential(Field::func(|x| if x.first() == 0 { -0.1 } else { 0.0 }));
        let p = lambda0_ess_probe(&ExhaustionFamily::anchored(dip).unwrap(), &[0], 25).unwrap();
        for (n, v) in p.holes[0].series.levels.iter().zip(&p.holes[0].series.values) {
            let i = p.lambda0.levels.iter().position(|m| m == n).unwrap();
            assert!(*v >= p.lambda0.values[i] - 1e-12);
        }
        assert!(lambda0_ess_probe(&z, &[5], 5).is_err());
    }

    #[test]
    fn witness_examples() {
        let z = ExhaustionFamily::anchored(GraphModel::lattice(1).unwrap()).unwrap();
        let w = ap_witness(&z, -0.5, &Vertex::id(0), 30).unwrap();
        assert!(w.passed);
        assert!(w.u.at(&Vertex::id(10)) < w.u.at(&Vertex::id(1)));

        let w = ap_witness(&single(2.0), 1.0, &Vertex::id(1), 0).unwrap();
        assert!((w.u.values()[0] - 1.0).abs() < 1e-15);

        let family = ExhaustionFamily::anchored(edge()).unwrap();
        let w = ap_witness(&family, -1.0, &Vertex::id(1), 1).unwrap();
        assert!((w.u.values()[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((w.u.values()[1] - 1.0 / 3.0).abs() < 1e-14);
        assert!(w.passed);
        assert!(matches!(
            ap_witness(&family, 0.5, &Vertex::id(1), 1),
            Err(Error::SpectralParameter { .. })
        ));
    }

    #[test]
    fn harnack_examples() {
        let zero = Field::Constant(0.0);
        let inst = HarnackInstance::new(&edge(), &[Vertex::id(1), Vertex::id(2)], &zero).unwrap();
        assert_eq!(harnack_constant(&inst).constant, Some(1.0));

        let w = [Vertex::id(0), Vertex::id(1)];
        let c = harnack_constant(&HarnackInstance::new(&star(), &w, &zero).unwrap());
        assert_eq!(c.constant, Some(2.0));
        assert_eq!(c.worst_pair, Some((Vertex::id(0), Vertex::id(1))));

        let minus = Field::Constant(-1.0);
        let shifted = harnack_constant(&HarnackInstance::new(&star(), &w, &minus).unwrap());
        assert!(shifted.constant.unwrap() >= c.constant.unwrap());
        let plus = Field::Constant(1.0);
        let raised = harnack_constant(&HarnackInstance::new(&star(), &w, &plus).unwrap());
        // d(leaf) = 0 here: no finite constant.
        assert_eq!(raised.constant, None);
    }

    #[test]
    fn harnack_errors() {
        let zero = Field::Constant(0.0);
        let z = GraphModel::lattice(1).unwrap();
        let far = [Vertex::id(0), Vertex::id(2)];
        assert!(matches!(HarnackInstance::new(&z, &far, &zero), Err(Error::Disconnected)));
        let big: Vec<Vertex> = (0..17).map(Vertex::id).collect();
        assert!(matches!(
            HarnackInstance::new(&z, &big, &zero),
            Err(Error::SizeLimit { size: 17, cap: 16 })
        ));
    }

    #[test]
    fn harnack_uses_cheapest_path() {
        // Square 0-1-2-3-0 with a heavy edge 0-1 and q large at 3.
        let v = [0, 1, 2, 3].map(Vertex::id);
        let g = ExplicitGraph::new(v, [(v[0], v[1], 4.0), (v[1], v[2], 1.0), (v[2], v[3], 1.0), (v[3], v[0], 1.0)]).unwrap();
        let model = GraphModel::explicit(g).with_potential(Field::func(|x| if x.first() == 3 { 10.0 } else { 0.0 }));
        let inst = HarnackInstance::new(&model, &v, &Field::Constant(0.0)).unwrap();
        let bound = harnack_constant(&inst);
        // d = (5, 5, 2, 12); brute force over the two simple paths of each pair.
        let d = [5.0, 5.0, 2.0, 12.0];
        let b = |i: usize, j: usize| match (i.min(j), i.max(j)) {
            (0, 1) => 4.0,
            _ => 1.0,
        };
        let cycle = [0usize, 1, 2, 3];
        let mut worst: f64 = 1.0;
        for a in 0..4 {
            for z in 0..4 {
                if a == z {
                    continue;
                }
                let mut best = f64::INFINITY;
                for dir in [1usize, 3] {
                    let mut p = 1.0;
                    let mut i = a;
                    while i != z {
                        let j = cycle[(i + dir) % 4];
                        p *= d[i] / b(i, j);
                        i = j;
                    }
                    best = best.min(p);
                }
                worst = worst.max(best);
            }
        }
        assert!((bound.constant.unwrap() - worst).abs() < 1e-12);
    }
}
