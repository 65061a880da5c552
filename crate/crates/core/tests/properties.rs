use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use shapemeans::cone::{project_cone, project_polar, valid_faces_oracle};
use shapemeans::constraints::{
    build_monotone, build_partial_order, build_tree_order, check_irreducible, transform_by_weights, transitive_reduction,
    AxisOrder, ConstraintMatrix, Direction, DomainGrid, IrreducibleConstraints, TreeDirection,
};
use shapemeans::estimation::{
    constrained_estimate, domain_estimates, maxmin_estimate, weighted_domain_estimates, DomainEstimates, JointDesign,
    SampleData,
};
use shapemeans::variance::{
    dagjk_replicates, face_jacobian, hajek_partials, linearized_variances, pooled_block_partials, replicate_variance,
};

/// A random acyclic order on `d` domains reduced to its covering pairs.
fn partial_order() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..=7)
        .prop_flat_map(|d| {
            let all: Vec<(usize, usize)> = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect();
            let n = all.len();
            (Just(d), Just(all), proptest::collection::vec(any::<bool>(), n), Just(()).prop_perturb(move |_, mut rng| {
                let mut perm: Vec<usize> = (0..d).collect();
                for i in (1..d).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                perm
            }))
        })
        .prop_map(|(d, all, keep, perm)| {
            let mut pairs: Vec<(usize, usize)> =
                all.iter().zip(&keep).filter(|(_, &k)| k).map(|(&(i, j), _)| (perm[i], perm[j])).collect();
            if pairs.is_empty() {
                pairs.push((perm[0], perm[1]));
            }
            (d, transitive_reduction(&pairs, d).unwrap())
        })
}

fn certified(a: ConstraintMatrix) -> IrreducibleConstraints {
    a.certify().expect("irreducible")
}

fn vec_of(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, len)
}

/// Domain count, covering pairs, Hájek means and positive sizes.
type OrderInstance = (usize, Vec<(usize, usize)>, Vec<f64>, Vec<f64>);

fn order_instance() -> impl Strategy<Value = OrderInstance> {
    partial_order().prop_flat_map(|(d, pairs)| (Just(d), Just(pairs), vec_of(d, -5.0, 5.0), vec_of(d, 0.1, 10.0)))
}

fn estimates(y: &[f64], n: &[f64]) -> DomainEstimates {
    let t: Vec<f64> = y.iter().zip(n).map(|(y, n)| y * n).collect();
    DomainEstimates::from_totals(DVector::from_vec(t), DVector::from_vec(n.to_vec())).unwrap()
}

fn w_norm2(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    v.iter().zip(w.iter()).map(|(v, w)| w * v * v).sum()
}

/// Stratified SRSWOR sample over `d` domains with every domain populated.
fn srswor_sample() -> impl Strategy<Value = (usize, SampleData)> {
    (2usize..=4, 2usize..=3, 3usize..=6).prop_flat_map(|(d, strata, per)| {
        let n = d * per * strata;
        (Just(d), Just(strata), vec_of(n, -3.0, 6.0), vec_of(strata, 0.05, 0.9)).prop_map(move |(d, h, y, fr)| {
            let domain: Vec<usize> = (0..n).map(|k| k % d).collect();
            let stratum: Vec<usize> = (0..n).map(|k| (k / d) % h).collect();
            let pi: Vec<f64> = stratum.iter().map(|&s| fr[s]).collect();
            let s = SampleData::new(y, pi, domain)
                .unwrap()
                .with_strata(stratum)
                .unwrap()
                .with_design(JointDesign::StratifiedSrswor)
                .unwrap();
            (d, s)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn moreau_decomposition((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let w = DVector::from_vec(n);
        let (_, edges) = transform_by_weights(&a, &w).unwrap();
        let z = DVector::from_vec(y).component_mul(&w.map(f64::sqrt));
        let r = project_polar(&z, &edges).unwrap();
        let tol = 1e-9 * (1.0 + z.norm());
        prop_assert!((&r.phi + &r.rho - &z).amax() <= tol);
        prop_assert!(r.phi.dot(&r.rho).abs() <= tol);
        prop_assert!(r.kkt_violation(&z, &edges) <= 1e-10 * (1.0 + z.norm()));
        // φ lies in the transformed constraint cone: ⟨φ, γ_j⟩ ≤ 0
        for j in 0..edges.len() {
            prop_assert!(edges.edge(j).dot(&r.phi) <= tol);
        }
        prop_assert!(r.coefficients.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn projection_is_idempotent((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let w = DVector::from_vec(n);
        let y = DVector::from_vec(y);
        let (theta, _) = project_cone(&y, &w, &a).unwrap();
        let (again, r) = project_cone(&theta, &w, &a).unwrap();
        prop_assert!((&again - &theta).amax() <= 1e-9 * (1.0 + theta.norm()));
        prop_assert!(r.rho.amax() <= 1e-9 * (1.0 + theta.norm()));
    }

    #[test]
    fn constrained_estimate_is_feasible_and_optimal((d, pairs, y, n) in order_instance(), probes in proptest::collection::vec(vec_of(7, -5.0, 5.0), 5)) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let est = estimates(&y, &n);
        let fit = constrained_estimate(&est, &a).unwrap();
        prop_assert!(a.apply(&fit.theta).iter().all(|&v| v >= -1e-8));
        let w = est.relative_sizes();
        let best = w_norm2(&(&fit.theta - &est.hajek), &w);
        for probe in probes {
            // a feasible competitor: the projection of an arbitrary point
            let (x, _) = project_cone(&DVector::from_column_slice(&probe[..d]), &w, &a).unwrap();
            prop_assert!(best <= w_norm2(&(&x - &est.hajek), &w) + 1e-9);
        }
    }

    #[test]
    fn weighted_mean_is_preserved((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        prop_assert!(a.rows_sum_to_zero());
        let est = estimates(&y, &n);
        let fit = constrained_estimate(&est, &a).unwrap();
        let w = est.relative_sizes();
        prop_assert!((fit.theta.dot(&w) - est.hajek.dot(&w)).abs() <= 1e-9 * (1.0 + est.hajek.amax()));
    }

    #[test]
    fn scale_equivariance((d, pairs, y, n) in order_instance(), c in 0.01f64..100.0) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let base = constrained_estimate(&estimates(&y, &n), &a).unwrap().theta;
        let scaled_y: Vec<f64> = y.iter().map(|v| c * v).collect();
        let scaled = constrained_estimate(&estimates(&scaled_y, &n), &a).unwrap().theta;
        prop_assert!((scaled - base * c).amax() <= 1e-9 * (1.0 + c) * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }

    #[test]
    fn feasible_input_is_returned_exactly((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let est = estimates(&y, &n);
        let fit = constrained_estimate(&est, &a).unwrap();
        let feasible = estimates(&fit.theta.iter().copied().collect::<Vec<_>>(), &n);
        if a.apply(&feasible.hajek).iter().all(|&v| v >= 0.0) {
            let again = constrained_estimate(&feasible, &a).unwrap();
            prop_assert_eq!(again.theta, feasible.hajek);
            prop_assert!(again.face.is_empty());
        }
    }

    #[test]
    fn agrees_with_maxmin((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let est = estimates(&y, &n);
        let fit = constrained_estimate(&est, &a).unwrap();
        let closed = maxmin_estimate(&est, &pairs).unwrap();
        prop_assert!((&fit.theta - &closed).amax() < 1e-8, "{} vs {}", fit.theta, closed);
    }

    #[test]
    fn pooled_blocks_partition_and_average((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let est = estimates(&y, &n);
        let fit = constrained_estimate(&est, &a).unwrap();
        let blocks = fit.pooled_blocks.unwrap();
        let mut all: Vec<usize> = blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d).collect::<Vec<_>>());
        for block in blocks {
            let nb: f64 = block.iter().map(|&i| est.n_hat[i]).sum();
            let mean = block.iter().map(|&i| est.t_hat[i]).sum::<f64>() / nb;
            for &i in &block {
                prop_assert!((fit.theta[i] - mean).abs() <= 1e-8 * (1.0 + mean.abs()));
            }
        }
    }

    #[test]
    fn projection_matches_face_oracle((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let w = DVector::from_vec(n);
        let (_, edges) = transform_by_weights(&a, &w).unwrap();
        let z = DVector::from_vec(y).component_mul(&w.map(f64::sqrt));
        let r = project_polar(&z, &edges).unwrap();
        let faces = valid_faces_oracle(&z, &edges).unwrap();
        prop_assert!(!faces.is_empty());
        for (_, rho) in &faces {
            prop_assert!((rho - &r.rho).amax() < 1e-8);
        }
    }

    #[test]
    fn monotone_builders_are_irreducible(
        sizes in proptest::collection::vec(2usize..=5, 1..=3),
        mask in 1u8..8,
        dirs in proptest::collection::vec(any::<bool>(), 3),
    ) {
        let grid = DomainGrid::new(sizes.clone()).unwrap();
        let axes: Vec<AxisOrder> = (0..sizes.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|axis| AxisOrder { axis, direction: if dirs[axis] { Direction::Increasing } else { Direction::Decreasing } })
            .collect();
        prop_assume!(!axes.is_empty());
        let a = build_monotone(&grid, &axes).unwrap();
        let expected: usize = axes.iter().map(|ax| grid.n_domains() / sizes[ax.axis] * (sizes[ax.axis] - 1)).sum();
        prop_assert_eq!(a.n_constraints(), expected);
        prop_assert!(a.rows_sum_to_zero());
        prop_assert!(check_irreducible(&a).is_irreducible());
    }

    #[test]
    fn tree_orders_are_irreducible(d in 2usize..=9, root in 0usize..9, smallest in any::<bool>()) {
        let root = root % d;
        let dir = if smallest { TreeDirection::RootSmallest } else { TreeDirection::RootLargest };
        let a = build_tree_order(d, root, dir).unwrap();
        prop_assert_eq!(a.n_constraints(), d - 1);
        prop_assert!(check_irreducible(&a).is_irreducible());
    }

    #[test]
    fn irreducibility_survives_diagonal_scaling((d, pairs) in partial_order(), cols in vec_of(7, 0.05, 20.0), rows in vec_of(21, 0.05, 20.0)) {
        let a = build_partial_order(&pairs, d).unwrap();
        prop_assert!(check_irreducible(&a).is_irreducible());
        let m = a.n_constraints();
        let scaled = DMatrix::from_fn(m, d, |i, j| rows[i] * a.matrix()[(i, j)] * cols[j]);
        prop_assert!(check_irreducible(&ConstraintMatrix::from_matrix(scaled).unwrap()).is_irreducible());
        // a duplicated row stays reducible after scaling
        let mut dup = a.to_rows();
        dup.push(dup[0].iter().map(|v| 3.0 * v).collect());
        let dup = ConstraintMatrix::from_rows(&dup).unwrap();
        let dup_scaled = DMatrix::from_fn(m + 1, d, |i, j| dup.matrix()[(i, j)] * cols[j]);
        prop_assert!(!check_irreducible(&ConstraintMatrix::from_matrix(dup_scaled).unwrap()).is_irreducible());
    }

    #[test]
    fn weight_transform_round_trips((d, pairs) in partial_order(), w in vec_of(7, 0.01, 50.0)) {
        let a = build_partial_order(&pairs, d).unwrap();
        let w = DVector::from_column_slice(&w[..d]);
        let (a_s, edges) = transform_by_weights(&a, &w).unwrap();
        for i in 0..a.n_constraints() {
            for j in 0..d {
                let back = a_s.matrix()[(i, j)] * w[j].sqrt();
                prop_assert!((back - a.matrix()[(i, j)]).abs() <= 1e-12);
                prop_assert_eq!(edges.edge(i)[j], -a_s.matrix()[(i, j)]);
            }
        }
    }

    #[test]
    fn common_weight_scaling_leaves_hajek_unchanged((d, s) in srswor_sample(), c in 0.01f64..100.0, k in -4i32..5) {
        let base = domain_estimates(&s, d, None).unwrap().hajek;
        // exact for powers of two, to rounding otherwise
        let p2 = 2f64.powi(k);
        let w: Vec<f64> = s.weights().iter().map(|w| w * p2).collect();
        let exact = weighted_domain_estimates(s.y(), &w, s.domain(), d).unwrap().hajek;
        prop_assert_eq!(&exact, &base);
        let w: Vec<f64> = s.weights().iter().map(|w| w * c).collect();
        let close = weighted_domain_estimates(s.y(), &w, s.domain(), d).unwrap().hajek;
        prop_assert!((close - &base).amax() <= 1e-12 * (1.0 + base.amax()));
    }

    #[test]
    fn constant_response_has_zero_variance((d, s) in srswor_sample(), c in -10.0f64..10.0) {
        let n = s.len();
        let s = SampleData::new(vec![c; n], s.pi().to_vec(), s.domain().to_vec())
            .unwrap()
            .with_strata(s.stratum().unwrap().to_vec())
            .unwrap()
            .with_design(JointDesign::StratifiedSrswor)
            .unwrap();
        let est = domain_estimates(&s, d, None).unwrap();
        let a = build_tree_order(d, 0, TreeDirection::RootSmallest).unwrap();
        let lv = linearized_variances(&s, &est, &[], &a).unwrap();
        prop_assert!(lv.variances.amax() <= 1e-12);
    }

    #[test]
    fn finite_differences_match_analytic_partials((d, pairs, y, n) in order_instance()) {
        let a = certified(build_partial_order(&pairs, d).unwrap());
        let est = estimates(&y, &n);
        let fit = constrained_estimate(&est, &a).unwrap();
        for face in [Vec::new(), fit.face.clone()] {
            let (alpha, beta) = face_jacobian(&est, &a, &face);
            for t in 0..d {
                let (ea, eb) = if face.is_empty() {
                    hajek_partials(&est, t)
                } else {
                    pooled_block_partials(&est, &a, &face, t).unwrap()
                };
                for i in 0..d {
                    prop_assert!((alpha[(t, i)] - ea[i]).abs() <= 1e-6 * ea[i].abs() + 1e-9, "alpha {} {} {}", t, i, face.len());
                    prop_assert!((beta[(t, i)] - eb[i]).abs() <= 1e-6 * eb[i].abs() + 1e-9, "beta {} {} {}", t, i, face.len());
                }
            }
        }
    }

    #[test]
    fn replicate_variance_ignores_order(reps in vec_of(12, -3.0, 3.0), c in 0.01f64..2.0, point in -1.0f64..1.0, seed in any::<u64>()) {
        let coefs = vec![c; reps.len()];
        let v = replicate_variance(point, &reps, &coefs).unwrap();
        let mut shuffled = reps.clone();
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let w = replicate_variance(point, &shuffled, &coefs).unwrap();
        prop_assert!((v - w).abs() <= 1e-12 * (1.0 + v));
    }

    #[test]
    fn dagjk_is_reproducible((_d, s) in srswor_sample(), seed in any::<u64>(), g in 2usize..=3) {
        let a = dagjk_replicates(&s, g, seed).unwrap();
        let b = dagjk_replicates(&s, g, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for rep in &a.weights {
            prop_assert_eq!(rep.len(), s.len());
        }
    }
}
