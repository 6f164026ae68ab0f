#![allow(dead_code)]

pub mod properties;

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use sgl_core::oracle::{random_connected_graph, RandomPotential};
use sgl_core::{ExhaustionFamily, FiniteRegion, GraphModel, RegionFunction, Vertex};

pub const SEED: u64 = 0x5347_4c00;

pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(SEED),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Parameters of one random connected graph.
#[derive(Clone, Copy, Debug)]
pub struct GraphCase {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    /// Signed potential shifted to a certified positive bottom eigenvalue.
    pub certified: bool,
}

impl GraphCase {
    pub fn model(&self) -> GraphModel {
        let potential = if self.certified {
            RandomPotential::Certified { margin: 0.05 }
        } else {
            RandomPotential::Nonnegative
        };
        random_connected_graph(self.n, self.p, potential, self.seed).unwrap()
    }

    pub fn family(&self) -> ExhaustionFamily {
        ExhaustionFamily::anchored(self.model()).unwrap()
    }
}

pub fn graph_case(max_n: usize) -> impl Strategy<Value = GraphCase> {
    (2..=max_n, 0.0f64..0.15, any::<u64>(), any::<bool>()).prop_map(|(n, p, seed, certified)| GraphCase {
        n,
        p,
        seed,
        certified,
    })
}

/// The whole vertex set of a finite model as a region.
pub fn whole(model: &GraphModel) -> Arc<FiniteRegion> {
    let vertices = model.finite_vertices().unwrap().to_vec();
    Arc::new(FiniteRegion::build(model, 0, vertices).unwrap())
}

/// Deterministic pseudo-random values in `[lo, hi)` from a seed.
pub fn values(seed: u64, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

pub fn function(region: &Arc<FiniteRegion>, seed: u64, lo: f64, hi: f64) -> RegionFunction {
    RegionFunction::new(Arc::clone(region), values(seed, region.len(), lo, hi)).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn lattice_family(dim: usize) -> ExhaustionFamily {
    ExhaustionFamily::anchored(GraphModel::lattice(dim).unwrap()).unwrap()
}

pub fn id(k: i64) -> Vertex {
    Vertex::id(k)
}
