use nalgebra::DMatrix;
use proptest::prelude::*;

use dirichlet_lab::dynamics::{
    c_from_radius, flow_lattice, flow_matrix, horizon_to_time, orbit_point, radius_from_c, time_to_horizon,
};
use dirichlet_lab::lattice::{enumerate_in_ball, first_minimum};
use dirichlet_lab::norms::random_unimodular;
use dirichlet_lab::rng::substream;
use dirichlet_lab::{Lattice, MatrixA, NormDescriptor, WeightVector};

fn side(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..1.0, k)
}

fn weight_vector() -> impl Strategy<Value = WeightVector> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(m, n)| (side(m), side(n)))
        .prop_map(|(a, b)| WeightVector::normalized(&a, &b).unwrap())
}

fn norms(d: usize) -> Vec<NormDescriptor> {
    vec![
        NormDescriptor::sup(d),
        NormDescriptor::euclidean(d),
        NormDescriptor::lp(3.0, d).unwrap(),
        NormDescriptor::parse("cyl:euclid", d).unwrap(),
    ]
}

/// `min ν(g v)` over nonzero `v ∈ Λ`, by Euclidean enumeration of `Λ` itself.
fn pulled_back_minimum(l: &Lattice, g: &DMatrix<f64>, nu: &NormDescriptor, upper: f64) -> f64 {
    let (c_lo, _) = nu.sandwich();
    let ginv = g.clone().try_inverse().unwrap().singular_values().max();
    let radius = upper / c_lo * ginv * (1.0 + 1e-6) + 1e-9;
    enumerate_in_ball(l, radius)
        .unwrap()
        .vectors
        .iter()
        .map(|v| {
            let x = g * nalgebra::DVector::from_column_slice(&v.point);
            nu.value(x.as_slice())
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn flow_is_unimodular(w in weight_vector(), s in -20.0f64..20.0) {
        let det = flow_matrix(&w, s).determinant();
        prop_assert!((det - 1.0).abs() < 1e-12, "det = {}", det);
    }

    #[test]
    fn flow_group_law(w in weight_vector(), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let lhs = flow_matrix(&w, s + t);
        let rhs = flow_matrix(&w, s) * flow_matrix(&w, t);
        prop_assert!((lhs - &rhs).abs().max() <= 1e-12 * rhs.abs().max());
    }

    #[test]
    fn horizon_round_trip(t in 1.01f64..1e4, c in 0.001f64..=1.0) {
        let s = horizon_to_time(t, c).unwrap();
        let back = time_to_horizon(s, c).unwrap();
        prop_assert!((back - t).abs() <= 1e-12 * t, "{} -> {} -> {}", t, s, back);
    }

    #[test]
    fn radius_round_trip(w in weight_vector(), c in 0.001f64..=1.0, r_nu in 0.5f64..2.0) {
        let r = radius_from_c(c, &w, r_nu).unwrap();
        let back = c_from_radius(r, &w, r_nu).unwrap();
        // c(r(c)) = c^{w_min/γ}, which is never below c
        let w_min = w.min_weight();
        let expected = c.powf(w_min / w.gamma());
        prop_assert!((back - expected).abs() < 1e-12, "{} vs {}", back, expected);
        prop_assert!(back >= c - 1e-12);
    }

    #[test]
    fn equal_weights_round_trip_exactly(m in 1usize..=3, c in 0.001f64..=1.0) {
        let w = WeightVector::uniform(m, m);
        let back = c_from_radius(radius_from_c(c, &w, 1.0).unwrap(), &w, 1.0).unwrap();
        prop_assert!((back - c).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn conjugation_identity(w in weight_vector(), seed in any::<u64>(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let d = w.d();
        let l = random_unimodular(d, &mut substream(seed, 0));
        let two_step = flow_lattice(&flow_lattice(&l, &w, s).unwrap(), &w, t).unwrap();
        let one_step = flow_lattice(&l, &w, s + t).unwrap();
        for nu in norms(d) {
            let a = first_minimum(&one_step, &nu).unwrap().value;
            let b = first_minimum(&two_step, &nu).unwrap().value;
            prop_assert!((a - b).abs() < 1e-9, "{:?}: {} vs {}", nu, a, b);
        }
    }

    #[test]
    fn pullback_identity(w in weight_vector(), seed in any::<u64>(), s in -1.5f64..1.5) {
        let d = w.d();
        let l = random_unimodular(d, &mut substream(seed, 1));
        let g = flow_matrix(&w, s);
        let moved = flow_lattice(&l, &w, s).unwrap();
        for nu in norms(d) {
            let direct = first_minimum(&moved, &nu).unwrap().value;
            let pulled = pulled_back_minimum(&l, &g, &nu, direct);
            prop_assert!((direct - pulled).abs() < 1e-9, "{:?}: {} vs {}", nu, direct, pulled);
        }
    }
}

#[test]
fn orbit_point_of_zero_matrix_is_flowed_identity() {
    let w = WeightVector::normalized(&[1.0, 2.0], &[1.0]).unwrap();
    let a = MatrixA::zeros(2, 1);
    let l = orbit_point(&a, &w, 0.7).unwrap();
    let expected = flow_lattice(&Lattice::identity(3), &w, 0.7).unwrap();
    assert!((l.basis() - expected.basis()).abs().max() < 1e-15);
}
