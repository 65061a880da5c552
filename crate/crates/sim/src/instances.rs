//! Random irreducible constraint matrices for cross-checking the cone
//! projection against exhaustive face enumeration.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use shapemeans::constraints::{build_partial_order, check_irreducible, transitive_reduction, ConstraintMatrix};

fn normal_vector<R: Rng>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Rows `s_j (c + r u_j)` with `c` a unit axis, `u_j` unit vectors
/// orthogonal to `c`, a common radius `r` and positive scales `s_j`. All
/// rows lie on one circular cone around `c`, so none is a nonnegative
/// combination of the others and the origin is not reachable. Returns at
/// most `m` rows; fewer when the sphere in `c^⊥` cannot hold `m` separated
/// points (only two fit when `d = 2`).
pub fn random_cone_matrix<R: Rng>(rng: &mut R, d: usize, m: usize) -> ConstraintMatrix {
    assert!(d >= 2 && m >= 1);
    let c = normal_vector(rng, d).normalize();
    let radius = rng.random_range(0.3..2.0);
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut attempts = 0;
    while dirs.len() < m && attempts < 200 {
        attempts += 1;
        let mut u = normal_vector(rng, d);
        u -= &c * c.dot(&u);
        let norm = u.norm();
        if norm < 1e-8 {
            continue;
        }
        u /= norm;
        if dirs.iter().all(|v| (v - &u).norm() > 0.25) {
            dirs.push(u);
        }
    }
    let rows: Vec<DVector<f64>> = dirs
        .iter()
        .map(|u| (&c + u * radius) * rng.random_range(0.2..5.0))
        .collect();
    ConstraintMatrix::from_matrix(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])).expect("nonzero rows")
}

/// Covering pairs of a random acyclic order on `d` domains (at least one pair).
pub fn random_partial_order<R: Rng>(rng: &mut R, d: usize, density: f64) -> Vec<(usize, usize)> {
    assert!(d >= 2);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let mut pairs = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.random_bool(density) {
                pairs.push((perm[i], perm[j]));
            }
        }
    }
    if pairs.is_empty() {
        pairs.push((perm[0], perm[1]));
    }
    transitive_reduction(&pairs, d).expect("acyclic by construction")
}

/// A certified-irreducible matrix with `d` columns and at most `max_rows`
/// rows: alternately a circular-cone matrix or a partial order.
pub fn random_irreducible<R: Rng>(rng: &mut R, d: usize, max_rows: usize) -> ConstraintMatrix {
    loop {
        let a = if rng.random_bool(0.5) {
            let m = rng.random_range(1..=max_rows);
            random_cone_matrix(rng, d, m)
        } else {
            let density = rng.random_range(0.2..0.9);
            let pairs = random_partial_order(rng, d, density);
            if pairs.len() > max_rows {
                continue;
            }
            build_partial_order(&pairs, d).expect("valid pairs")
        };
        if check_irreducible(&a).is_irreducible() {
            return a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cone_matrices_are_irreducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = rng.random_range(2..=6);
            let a = random_cone_matrix(&mut rng, d, 12);
            assert!(check_irreducible(&a).is_irreducible());
            if d == 2 {
                assert!(a.n_constraints() <= 2);
            }
        }
    }

    #[test]
    fn cone_matrices_exceed_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_cone_matrix(&mut rng, 4, 10);
        assert_eq!(a.n_constraints(), 10);
    }

    #[test]
    fn partial_orders_are_irreducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let d = rng.random_range(2..=8);
            let pairs = random_partial_order(&mut rng, d, 0.5);
            assert!(check_irreducible(&build_partial_order(&pairs, d).unwrap()).is_irreducible());
        }
    }
}
