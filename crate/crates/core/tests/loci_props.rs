use rand::seq::SliceRandom;
use rand::Rng as _;

use dirichlet_lab::dynamics::flow_lattice;
use dirichlet_lab::lattice::first_minimum;
use dirichlet_lab::loci::{
    divergence_direction, far_end_minimum, locus_membership, locus_membership_at, sample_locus, Direction,
    LocusDescriptor,
};
use dirichlet_lab::norms::{critical_radius_with, EstimateConfig};
use dirichlet_lab::rng::substream;
use dirichlet_lab::{Enumerator, NormDescriptor, WeightVector};

fn random_hajos(seed: u64) -> LocusDescriptor {
    let mut rng = substream(seed, 1);
    let d = rng.gen_range(2..=4);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    LocusDescriptor::hajos(d, perm).unwrap()
}

#[test]
fn hajos_samples_have_unit_minimum() {
    let en = Enumerator::default();
    for seed in 0..1000 {
        let desc = random_hajos(seed);
        let s = sample_locus(&desc, seed).unwrap();
        let nu = NormDescriptor::sup(desc.dim());
        let v = first_minimum(&s.lattice, &nu).unwrap().value;
        assert!((v - 1.0).abs() < 1e-9, "seed {seed}, {desc:?}: λ₁ = {v}");
        assert!(locus_membership(&s.lattice, &nu, &en).unwrap());
        assert!((s.lattice.basis().determinant() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn hexagonal_samples_attain_the_euclidean_radius() {
    let r = (4.0f64 / 3.0).powf(0.25);
    for seed in 0..200 {
        let s = sample_locus(&LocusDescriptor::HexagonalEuclid2, seed).unwrap();
        let v = first_minimum(&s.lattice, &NormDescriptor::euclidean(2)).unwrap().value;
        assert!((v - r).abs() < 1e-9, "seed {seed}: {v}");
    }
}

#[test]
fn hajos_divergence_is_realized() {
    let en = Enumerator::default();
    for seed in 0..300 {
        let desc = random_hajos(seed);
        let d = desc.dim();
        let s = sample_locus(&desc, seed).unwrap();
        let m = 1 + (seed as usize) % (d - 1);
        let w = WeightVector::uniform(m, d - m);
        let nu = NormDescriptor::sup(d);
        let dir = divergence_direction(&s.lattice, &w, &desc).unwrap();
        let far = far_end_minimum(&s.lattice, &w, &nu, dir, 10.0, &en).unwrap();
        assert!(far <= 0.05, "seed {seed}, {desc:?}, m = {m}, {dir:?}: λ₁ = {far}");
    }
}

#[test]
fn identity_lattice_diverges_forward() {
    let desc = LocusDescriptor::hajos_identity(3);
    let l = dirichlet_lab::Lattice::identity(3);
    for m in 1..3 {
        let w = WeightVector::uniform(m, 3 - m);
        assert_eq!(divergence_direction(&l, &w, &desc).unwrap(), Direction::Forward);
    }
}

#[test]
fn cylinder_samples_are_critical_and_diverge() {
    let nu = NormDescriptor::parse("cyl:euclid", 3).unwrap();
    let bound = critical_radius_with(
        &nu,
        &EstimateConfig {
            seed: 3,
            ..EstimateConfig::default()
        },
    )
    .unwrap();
    assert!(!bound.is_exact());
    let en = Enumerator::default();
    let w = WeightVector::uniform(2, 1);
    let r = (2.0 / 3f64.sqrt()).powf(1.0 / 3.0);
    for (desc, want) in [
        (LocusDescriptor::CylindricalZ1, Direction::Forward),
        (LocusDescriptor::CylindricalZ2, Direction::Backward),
    ] {
        for seed in 0..50 {
            let s = sample_locus(&desc, seed).unwrap();
            let v = first_minimum(&s.lattice, &nu).unwrap().value;
            assert!((v - r).abs() < 1e-9, "{desc:?} seed {seed}: {v}");
            assert!(locus_membership_at(&s.lattice, &nu, bound.value, &en).unwrap());
            let dir = divergence_direction(&s.lattice, &w, &desc).unwrap();
            assert_eq!(dir, want);
            assert!(far_end_minimum(&s.lattice, &w, &nu, dir, 10.0, &en).unwrap() <= 0.05);
        }
    }
}

#[test]
fn flow_escapes_the_locus() {
    let en = Enumerator::default();
    for k in 0..100 {
        let desc = random_hajos(10_000 + k);
        let d = desc.dim();
        let nu = NormDescriptor::sup(d);
        let w = WeightVector::uniform(1, d - 1);
        let l = sample_locus(&desc, 10_000 + k).unwrap().lattice;
        let moved = flow_lattice(&l, &w, 10.0).unwrap();
        let members = [&l, &moved]
            .iter()
            .filter(|x| locus_membership(x, &nu, &en).unwrap())
            .count();
        assert!(members <= 1, "pair {k}: both L and a_10 L are critical");
    }
}

#[test]
fn sampling_is_deterministic() {
    for desc in [
        LocusDescriptor::hajos(3, vec![2, 0, 1]).unwrap(),
        LocusDescriptor::CylindricalZ1,
        LocusDescriptor::CylindricalZ2,
        LocusDescriptor::HexagonalEuclid2,
    ] {
        let a = sample_locus(&desc, 77).unwrap();
        let b = sample_locus(&desc, 77).unwrap();
        let c = sample_locus(&desc, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.lattice, c.lattice);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<dirichlet_lab::loci::LocusSample>(&json).unwrap(), a);
    }
}
