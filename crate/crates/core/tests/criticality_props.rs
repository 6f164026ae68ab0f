mod common;

use std::sync::Arc;

use common::properties::{minimum_principle, series_monotone};
use common::{config, graph_case, id, values};
use proptest::prelude::*;
use sgl_core::criticality::{ground_state, weight_nonneg_series, Verdict};
use sgl_core::forms::apply_h;
use sgl_core::solver::{assemble, DirichletSystem};
use sgl_core::{ExhaustionFamily, Field, GraphModel, RegionFunction, Vertex};

/// `v(k) = 2^{-|k|}` is the ground state of this critical operator on ℤ;
/// the exhaustion is centred at `o`.
fn constructed_line(o: i64) -> ExhaustionFamily {
    let model = GraphModel::lattice(1)
        .unwrap()
        .with_potential(Field::func(|x| if x.first() == 0 { -1.0 } else { 0.5 }));
    ExhaustionFamily::new(model, id(o)).unwrap()
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn series_are_monotone_with_unit_product(case in graph_case(150)) {
        let family = case.family();
        let x = family.anchor();
        series_monotone(&family, &x, 6)?;
    }

    #[test]
    fn lattice_series_are_monotone(dim in 1usize..=3, q in 0.0f64..0.5, n in 2usize..8) {
        let model = GraphModel::lattice(dim).unwrap().with_potential(Field::Constant(q));
        let family = ExhaustionFamily::anchored(model).unwrap();
        let x = family.anchor();
        series_monotone(&family, &x, n)?;
    }

    #[test]
    fn minimum_principle_holds(case in graph_case(150), level in 0usize..4, zero_fraction in 0.0f64..1.0) {
        minimum_principle(case, level, zero_fraction)?;
    }

    #[test]
    fn lemma_bound_when_hardy_holds(case in graph_case(120), n in 1usize..5) {
        let family = case.family();
        let vertices = family.model().finite_vertices().unwrap().to_vec();
        let scale = if case.certified { 0.05 } else { 0.02 };
        let w_values = values(case.seed ^ 0x77, vertices.len(), 0.01, 1.0);
        let w = Field::Table {
            default: 0.0,
            values: vertices.iter().copied().zip(w_values.iter().map(|r| scale * r)).collect(),
        };
        let series = weight_nonneg_series(&family, &w, n).unwrap();
        prop_assume!(series.values.iter().all(|v| *v >= 1.0));
        for level in family.first_level()..=n {
            let region = family.region(level).unwrap();
            let system = DirichletSystem::new(family.model(), Arc::clone(&region)).unwrap();
            for x in region.vertices().iter().take(8) {
                let g = system.solve_green(x).unwrap().at(x);
                prop_assert!(w.eval(x) * g <= 1.0 + 1e-9, "w G = {}", w.eval(x) * g);
            }
        }
    }

    #[test]
    fn minimality_of_truncated_green(case in graph_case(150), n in 0usize..3, extra in 1usize..3, seed in any::<u64>()) {
        let family = case.family();
        let x = family.anchor();
        let small = assemble(&family, n).unwrap();
        let big = assemble(&family, n + extra).unwrap();
        let g_small = small.solve_green(&x).unwrap();
        // A positive supersolution on the bigger level: its Green column plus
        // a nonnegative potential.
        let mut rhs = values(seed, big.len(), 0.0, 1.0);
        let i = big.region().index_of(&x).unwrap();
        rhs[i] += 1.0;
        let u = RegionFunction::new(Arc::clone(big.region()), big.solve(&rhs).unwrap()).unwrap();
        for y in small.region().vertices() {
            let target = if *y == x { 1.0 } else { 0.0 };
            prop_assert!(apply_h(family.model(), &u, y).unwrap() >= target - 1e-10);
        }
        for y in small.region().vertices() {
            prop_assert!(u.at(y) >= g_small.at(y) * (1.0 - 1e-10), "{} < {}", u.at(y), g_small.at(y));
        }
    }

    #[test]
    fn critical_ground_state_is_unique(o in -3i64..=3, o2 in -3i64..=3) {
        let n = 30;
        let a = ground_state(&constructed_line(o), &id(o), n, Verdict::Critical).unwrap();
        let b = ground_state(&constructed_line(o2), &id(o2), n, Verdict::Critical).unwrap();
        let window: Vec<Vertex> = (-4..=4).map(id).collect();
        // Proportionality: a(y) / b(y) is the same constant for every y.
        let c = a.profile.at(&id(0)) / b.profile.at(&id(0));
        for y in &window {
            let ratio = a.profile.at(y) / b.profile.at(y);
            prop_assert!((ratio / c - 1.0).abs() <= 1e-6, "{y}: {ratio} vs {c}");
        }
    }
}
