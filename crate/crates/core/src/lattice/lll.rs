use nalgebra::DMatrix;

use super::Lattice;
use crate::error::{Error, Result};

const MAX_SWAPS: usize = 1_000_000;

/// Output of LLL: the reduced lattice and the integer matrix `U` with
/// `reduced = original · U`.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub lattice: Lattice,
    pub transform: DMatrix<i64>,
}

pub(super) struct Gso {
    pub(super) mu: Vec<Vec<f64>>,
    pub(super) norms: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(super) fn gram_schmidt(cols: &[Vec<f64>]) -> Result<Gso> {
    let k = cols.len();
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut mu = vec![vec![0.0; k]; k];
    let mut norms = vec![0.0; k];
    let scale = cols.iter().map(|c| dot(c, c)).fold(0.0f64, f64::max);
    for i in 0..k {
        let mut v = cols[i].clone();
        for j in 0..i {
            let m = dot(&cols[i], &star[j]) / norms[j];
            mu[i][j] = m;
            for (vt, st) in v.iter_mut().zip(&star[j]) {
                *vt -= m * st;
            }
        }
        norms[i] = dot(&v, &v);
        if !(norms[i] > scale * 1e-28) {
            return Err(Error::NumericalRank(format!(
                "Gram-Schmidt vector {i} vanishes"
            )));
        }
        mu[i][i] = 1.0;
        star.push(v);
    }
    Ok(Gso { mu, norms })
}

/// Textbook LLL with Lovász parameter `delta`.
pub fn lll_reduce(lattice: &Lattice, delta: f64) -> Result<Lattice> {
    lll_reduce_with_transform(lattice, delta).map(|r| r.lattice)
}

pub fn lll_reduce_with_transform(lattice: &Lattice, delta: f64) -> Result<Reduction> {
    if !(delta > 0.25 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "LLL delta must lie in (1/4, 1), got {delta}"
        )));
    }
    let d = lattice.dim();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| lattice.column(j)).collect();
    let mut unimod: Vec<Vec<i64>> = (0..d)
        .map(|j| (0..d).map(|i| i64::from(i == j)).collect())
        .collect();

    let mut gso = gram_schmidt(&cols)?;
    let mut k = 1;
    let mut swaps = 0;
    while k < d {
        // size-reduce column k against all earlier ones; repeat while the
        // float coefficients still move (large entries need several passes)
        loop {
            let mut changed = false;
            for j in (0..k).rev() {
                let r = gso.mu[k][j].round();
                if r != 0.0 {
                    changed = true;
                    let ri = r as i64;
                    let (head, tail) = cols.split_at_mut(k);
                    for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                        *x -= r * y;
                    }
                    let (uh, ut) = unimod.split_at_mut(k);
                    for (x, y) in ut[0].iter_mut().zip(&uh[j]) {
                        *x -= ri * y;
                    }
                    for i in 0..=j {
                        gso.mu[k][i] -= r * gso.mu[j][i];
                    }
                }
            }
            gso = gram_schmidt(&cols)?;
            if !changed || (0..k).all(|j| gso.mu[k][j].abs() <= 0.51) {
                break;
            }
        }
        let lhs = gso.norms[k];
        let rhs = (delta - gso.mu[k][k - 1].powi(2)) * gso.norms[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            unimod.swap(k, k - 1);
            swaps += 1;
            if swaps > MAX_SWAPS {
                return Err(Error::NumericalRank("LLL did not converge".into()));
            }
            gso = gram_schmidt(&cols)?;
            k = (k - 1).max(1);
        }
    }

    let flat: Vec<f64> = cols.concat();
    let mut basis = DMatrix::from_column_slice(d, d, &flat);
    let mut transform = DMatrix::from_column_slice(d, d, &unimod.concat());
    // swaps flip orientation; keep det = +1
    if basis.determinant() < 0.0 {
        basis.column_mut(0).neg_mut();
        transform.column_mut(0).neg_mut();
    }
    let lattice = Lattice::with_det_tolerance(basis, lattice.det_tolerance())?;
    Ok(Reduction { lattice, transform })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(cols: &[[f64; 2]]) -> Lattice {
        let flat: Vec<f64> = cols.iter().flatten().copied().collect();
        Lattice::normalized(DMatrix::from_column_slice(2, 2, &flat)).unwrap()
    }

    #[test]
    fn integer_lattice_is_fixed_up_to_signs() {
        for d in 2..6 {
            let r = lll_reduce(&Lattice::identity(d), 0.99).unwrap();
            for j in 0..d {
                let c = r.column(j);
                assert_eq!(c.iter().filter(|x| x.abs() == 1.0).count(), 1);
                assert_eq!(c.iter().filter(|x| **x == 0.0).count(), d - 1);
            }
        }
    }

    #[test]
    fn skewed_unipotent_collapses() {
        let l = lattice(&[[1.0, 0.0], [1e6, 1.0]]);
        let red = lll_reduce_with_transform(&l, 0.75).unwrap();
        for j in 0..2 {
            let c = red.lattice.column(j);
            assert!((c[0] * c[0] + c[1] * c[1]).sqrt() <= 2.0);
        }
        // reduced = original · U
        let prod = l.basis() * red.transform.map(|x| x as f64);
        assert!((prod - red.lattice.basis()).abs().max() < 1e-6);
        assert_eq!(red.transform.map(|x| x as f64).determinant().round(), 1.0);
    }

    #[test]
    fn rejects_bad_delta() {
        let l = Lattice::identity(2);
        assert!(lll_reduce(&l, 0.25).is_err());
        assert!(lll_reduce(&l, 1.0).is_err());
    }

    #[test]
    fn lovasz_condition_holds() {
        let l = lattice(&[[3.0, 1.0], [7.0, 2.666_666_666_666_667]]);
        let l = Lattice::normalized(l.basis().clone()).unwrap();
        let r = lll_reduce(&l, 0.99).unwrap();
        let cols: Vec<Vec<f64>> = (0..2).map(|j| r.column(j)).collect();
        let g = gram_schmidt(&cols).unwrap();
        assert!(g.mu[1][0].abs() <= 0.5 + 1e-9);
        assert!(g.norms[1] >= (0.99 - g.mu[1][0].powi(2)) * g.norms[0] - 1e-12);
    }
}
