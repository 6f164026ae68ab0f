mod common;

use std::sync::Arc;

use common::properties::{green_formula, gst_identity};
use common::{config, function, graph_case, whole};
use proptest::prelude::*;
use sgl_core::forms::{apply_h, gst_form, gst_identity_residual, quad_form};
use sgl_core::{ExhaustionFamily, Field, FiniteRegion, GraphModel, RegionFunction, Vertex};

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn green_formula_and_symmetry(case in graph_case(150), level in 0usize..4, seed in any::<u64>()) {
        green_formula(case, level, seed)?;
    }

    #[test]
    fn green_formula_on_lattices(dim in 1usize..=3, level in 0usize..4, seed in any::<u64>()) {
        let model = GraphModel::lattice(dim).unwrap().with_potential(Field::func(|x| 0.1 * x.first() as f64));
        let family = ExhaustionFamily::anchored(model).unwrap();
        let model = family.model();
        let region = family.region(level).unwrap();
        let phi = function(&region, seed, -1.0, 1.0);
        let psi = function(&region, seed ^ 1, -1.0, 1.0);
        let sum: f64 = region
            .vertices()
            .iter()
            .zip(psi.values())
            .map(|(x, p)| apply_h(model, &phi, x).unwrap() * p)
            .sum();
        let scale = region.len() as f64 * 16.0;
        prop_assert!((quad_form(model, &phi, &psi).unwrap() - sum).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gst_identity_with_bottom_eigenvector(case in graph_case(120), seed in any::<u64>()) {
        gst_identity(case, seed)?;
    }

    #[test]
    fn gst_form_vanishes_exactly_on_constants(case in graph_case(80), c in 0.1f64..5.0, seed in any::<u64>()) {
        let model = case.model();
        let region = whole(&model);
        let v = |x: &Vertex| 1.0 + 0.5 * ((x.first() % 7) as f64);
        let constant = RegionFunction::from_fn(Arc::clone(&region), |_| c).unwrap();
        prop_assert!(gst_form(&model, &v, &constant).unwrap().abs() <= 1e-12 * c * c);
        let bumpy = function(&region, seed, 0.0, 1.0);
        let spread = bumpy.values().iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
            - bumpy.values().iter().fold(f64::INFINITY, |a, b| a.min(*b));
        let value = gst_form(&model, &v, &bumpy).unwrap();
        prop_assert!(value >= 0.0);
        if region.len() > 1 && spread > 1e-6 {
            prop_assert!(value > 0.0);
        }
    }

    #[test]
    fn gst_identity_on_the_line(level in 0usize..12, seed in any::<u64>()) {
        // v(k) = 2^{-|k|} is H-harmonic for q = 1/2 off the origin, q(0) = -1.
        let model = GraphModel::lattice(1)
            .unwrap()
            .with_potential(Field::func(|x| if x.first() == 0 { -1.0 } else { 0.5 }));
        let family = ExhaustionFamily::anchored(model).unwrap();
        let region: Arc<FiniteRegion> = family.region(level).unwrap();
        let v = |x: &Vertex| 2f64.powi(-(x.first().abs() as i32));
        let phi = function(&region, seed, -1.0, 1.0);
        let residual = gst_identity_residual(family.model(), &v, &|_| 0.0, &phi, 1e-12).unwrap();
        prop_assert!(residual <= 1e-10);
        prop_assert!(quad_form(family.model(), &phi, &phi).unwrap() >= -residual - 1e-12);
    }
}
