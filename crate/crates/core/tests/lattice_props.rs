use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;

use dirichlet_lab::lattice::{enumerate_in_ball, first_minimum, is_canonical, lll_reduce_with_transform};
use dirichlet_lab::norms::random_unimodular;
use dirichlet_lab::rng::substream;
use dirichlet_lab::{Lattice, NormDescriptor};

fn basis(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| DMatrix::from_column_slice(d, d, &v))
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Every canonical coefficient vector in `[-10, 10]^d` with norm below `radius`.
fn brute_force(l: &Lattice, radius: f64) -> (BTreeSet<Vec<i64>>, BTreeSet<Vec<i64>>) {
    let d = l.dim();
    let mut inside = BTreeSet::new();
    let mut near = BTreeSet::new();
    let mut c = vec![-10i64; d];
    loop {
        if is_canonical(&c) {
            let n = euclid(&l.point(&c));
            if (n - radius).abs() < 1e-9 {
                near.insert(c.clone());
            } else if n < radius {
                inside.insert(c.clone());
            }
        }
        let mut k = 0;
        while k < d && c[k] == 10 {
            c[k] = -10;
            k += 1;
        }
        if k == d {
            break;
        }
        c[k] += 1;
    }
    (inside, near)
}

/// `‖B⁻¹‖₂`, so that `|coeffs|∞ ≤ ‖B⁻¹‖₂·‖v‖₂`.
fn inverse_norm(l: &Lattice) -> f64 {
    let inv = l.basis().clone().try_inverse().unwrap();
    inv.singular_values().max()
}

fn check_completeness(b: DMatrix<f64>, radius: f64) -> Result<(), TestCaseError> {
    prop_assume!(b.determinant().abs() > 0.05);
    let l = Lattice::normalized(b).unwrap();
    prop_assume!(inverse_norm(&l) * radius < 9.5);
    let (inside, near) = brute_force(&l, radius);
    let got: BTreeSet<Vec<i64>> = enumerate_in_ball(&l, radius)
        .unwrap()
        .vectors
        .into_iter()
        .map(|v| v.coeffs)
        .filter(|c| !near.contains(c))
        .collect();
    prop_assert_eq!(got, inside);
    Ok(())
}

fn scaled(l: &Lattice, c: f64) -> Lattice {
    Lattice::with_det_tolerance(l.basis() * c, 1e6).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumeration_matches_brute_force_2d(b in basis(2), radius in 0.1f64..2.0) {
        check_completeness(b, radius)?;
    }

    #[test]
    fn enumeration_matches_brute_force_3d(b in basis(3), radius in 0.1f64..2.0) {
        check_completeness(b, radius)?;
    }

    #[test]
    fn first_minimum_scales(seed in any::<u64>(), d in 2usize..=4) {
        let l = random_unimodular(d, &mut substream(seed, 0));
        let nu = NormDescriptor::euclidean(d);
        let base = first_minimum(&l, &nu).unwrap().value;
        for c in [0.5, 2.0] {
            let v = first_minimum(&scaled(&l, c), &nu).unwrap().value;
            prop_assert!((v - c * base).abs() < 1e-9, "c = {}: {} vs {}", c, v, c * base);
        }
    }

    #[test]
    fn lll_is_a_change_of_basis(seed in any::<u64>(), d in 2usize..=5) {
        let l = random_unimodular(d, &mut substream(seed, 1));
        let red = lll_reduce_with_transform(&l, 0.99).unwrap();
        let u = l.basis().clone().try_inverse().unwrap() * red.lattice.basis();
        for x in u.iter() {
            prop_assert!((x - x.round()).abs() < 1e-6, "non-integral entry {}", x);
        }
        prop_assert!((u.determinant().abs() - 1.0).abs() < 1e-6);
        let t = red.transform.map(|v| v as f64);
        prop_assert!((&u - t).abs().max() < 1e-6, "reported transform disagrees");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sandwich_bounds_hold(seed in any::<u64>(), d in 2usize..=4) {
        let l = random_unimodular(d, &mut substream(seed, 2));
        let e = first_minimum(&l, &NormDescriptor::euclidean(d)).unwrap().value;
        let norms = [
            NormDescriptor::sup(d),
            NormDescriptor::euclidean(d),
            NormDescriptor::lp(1.2, d).unwrap(),
            NormDescriptor::lp(1.5, d).unwrap(),
            NormDescriptor::lp(3.0, d).unwrap(),
            NormDescriptor::parse("cyl:euclid", d).unwrap(),
            NormDescriptor::parse("cyl:sup", d).unwrap(),
        ];
        for nu in &norms {
            let (lo, hi) = nu.sandwich();
            let v = first_minimum(&l, nu).unwrap().value;
            prop_assert!(lo * e <= v + 1e-9 && v <= hi * e + 1e-9, "{:?}: {} not in [{}, {}]", nu, v, lo * e, hi * e);
        }
    }

    #[test]
    fn first_minimum_is_attained_by_its_witness(seed in any::<u64>(), d in 2usize..=4) {
        let l = random_unimodular(d, &mut substream(seed, 3));
        let nu = NormDescriptor::sup(d);
        let fm = first_minimum(&l, &nu).unwrap();
        prop_assert!(is_canonical(&fm.coeffs));
        let p = l.point(&fm.coeffs);
        prop_assert!((nu.value(&p) - fm.value).abs() < 1e-9);
    }
}
