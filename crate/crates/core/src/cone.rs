//! Projection onto the constraint cone `Ω = {φ : A_s φ ≥ 0}` through its
//! polar cone `Ω⁰ = {Σ a_j γ_j : a ≥ 0}`.
//!
//! [`project_polar`] finds `ρ = Π(z | Ω⁰)` with an active-set iteration over
//! the edges `γ_j`; the cone projection is then `φ = z − ρ`. The terminal
//! active set `J` is a face for which `ρ` is the projection of `z` onto
//! `span{γ_j : j ∈ J}` with nonnegative coefficients, which is what the
//! linearization variance needs. [`enumerate_faces_oracle`] checks the same
//! answer by visiting all `2^m` edge subsets.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{check_weights, transform_by_weights, IrreducibleConstraints, PolarEdgeSet};
use crate::error::{Error, Result};
use crate::linalg::{select_columns, ColPivQr};

/// Coefficients at or below this are treated as leaving the active set.
pub const COEF_TOL: f64 = 1e-10;
/// Entering threshold on `⟨z − ρ, γ_j⟩`, relative to `1 + ‖z‖`.
pub const ADD_TOL: f64 = 1e-10;
/// Tolerance used when certifying an arbitrary face (reduction, oracle).
pub const FACE_TOL: f64 = 1e-9;
/// Largest edge count the brute-force oracle accepts.
pub const ORACLE_MAX_EDGES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProjectionResult {
    /// Projection onto the constraint cone.
    pub phi: DVector<f64>,
    /// Projection onto the polar cone; `phi + rho` is the input.
    pub rho: DVector<f64>,
    /// Sorted edge indices carrying `rho`.
    pub face: Vec<usize>,
    /// Nonnegative weight of each edge in `face`.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

impl ConeProjectionResult {
    /// Coefficients scattered into a length-`m` vector.
    pub fn coefficient_vector(&self, m: usize) -> DVector<f64> {
        let mut out = DVector::zeros(m);
        for (&j, &a) in self.face.iter().zip(&self.coefficients) {
            out[j] = a;
        }
        out
    }

    /// Largest violation of the polar optimality conditions
    /// `⟨z − ρ, ρ⟩ = 0` and `⟨z − ρ, γ_j⟩ ≤ 0`.
    pub fn kkt_violation(&self, z: &DVector<f64>, edges: &PolarEdgeSet) -> f64 {
        kkt_violation(z, edges.generators(), &self.rho)
    }
}

fn kkt_violation(z: &DVector<f64>, gens: &DMatrix<f64>, rho: &DVector<f64>) -> f64 {
    let r = z - rho;
    let mut worst = r.dot(rho).abs();
    for j in 0..gens.ncols() {
        worst = worst.max(r.dot(&gens.column(j)));
    }
    worst
}

/// `Π(z | Ω⁰)` for the cone generated by `edges`.
pub fn project_polar(z: &DVector<f64>, edges: &PolarEdgeSet) -> Result<ConeProjectionResult> {
    if z.len() != edges.dim() {
        return Err(Error::DimensionMismatch { expected: edges.dim(), got: z.len() });
    }
    project_generated(z, edges.generators())
}

/// Nonnegative least squares `min ‖z − G a‖, a ≥ 0` over the columns of `G`,
/// reported as a cone projection.
///
/// Lawson–Hanson active set. The entering edge maximises
/// `⟨z − ρ, γ_j⟩ / ‖γ_j‖` among edges with `⟨z − ρ, γ_j⟩ > ADD_TOL (1 + ‖z‖)`;
/// a refit with nonpositive coefficients steps back along the segment to the
/// previous iterate and drops the edge that hits zero first. Ties go to the
/// smallest index in both directions.
pub(crate) fn project_generated(z: &DVector<f64>, gens: &DMatrix<f64>) -> Result<ConeProjectionResult> {
    let (dim, m) = gens.shape();
    let norms: Vec<f64> = (0..m).map(|j| gens.column(j).norm()).collect();
    let add_tol = ADD_TOL * (1.0 + z.norm());
    let guard = 4 * m * dim;

    let mut face: Vec<usize> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();
    let mut rho = DVector::zeros(dim);
    let mut rejected = vec![false; m];
    let mut iterations = 0;

    loop {
        let resid = z - &rho;
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..m {
            if rejected[j] || face.binary_search(&j).is_ok() {
                continue;
            }
            let raw = resid.dot(&gens.column(j));
            if raw > add_tol {
                let score = raw / norms[j];
                if entering.is_none_or(|(_, best)| score > best) {
                    entering = Some((j, score));
                }
            }
        }
        let Some((j, _)) = entering else { break };

        iterations += 1;
        if iterations > guard {
            return Err(Error::Cycling(iterations));
        }

        let pos = face.binary_search(&j).unwrap_err();
        face.insert(pos, j);
        coef.insert(pos, 0.0);

        let mut first_fit = true;
        loop {
            let qr = ColPivQr::new(&select_columns(gens, &face));
            let fit = qr.solve(z);
            if first_fit && fit[pos] <= COEF_TOL {
                // Numerically dependent on the current face: the refit gives
                // the newcomer no weight. Skip it until the face changes.
                face.remove(pos);
                coef.remove(pos);
                rejected[j] = true;
                break;
            }
            first_fit = false;

            if fit.iter().all(|&b| b > COEF_TOL) {
                coef = fit.iter().copied().collect();
                rho = select_columns(gens, &face) * &fit;
                rejected.iter_mut().for_each(|r| *r = false);
                break;
            }

            let mut step = f64::INFINITY;
            let mut leaving = 0;
            for (k, (&b, &a)) in fit.iter().zip(&coef).enumerate() {
                if b <= COEF_TOL {
                    let t = if a - b > 0.0 { a / (a - b) } else { 0.0 };
                    if t < step {
                        step = t;
                        leaving = k;
                    }
                }
            }
            for (a, &b) in coef.iter_mut().zip(fit.iter()) {
                *a += step * (b - *a);
            }
            coef[leaving] = 0.0;
            let keep: Vec<bool> = coef.iter().map(|&a| a > COEF_TOL).collect();
            face = face.iter().zip(&keep).filter(|(_, &k)| k).map(|(&f, _)| f).collect();
            coef = coef.iter().zip(&keep).filter(|(_, &k)| k).map(|(&a, _)| a).collect();

            iterations += 1;
            if iterations > guard {
                return Err(Error::Cycling(iterations));
            }
            if face.is_empty() {
                rho = DVector::zeros(dim);
                rejected.iter_mut().for_each(|r| *r = false);
                break;
            }
        }
    }

    let phi = z - &rho;
    Ok(ConeProjectionResult { phi, rho, face, coefficients: coef, iterations })
}

/// Weighted projection of `y_tilde` onto `{θ : A θ ≥ 0}` in the metric
/// `diag(weights)`. Returns `θ` and the polar projection of the transformed
/// vector `z = W^{1/2} ỹ`.
pub fn project_cone(
    y_tilde: &DVector<f64>,
    weights: &DVector<f64>,
    a: &IrreducibleConstraints,
) -> Result<(DVector<f64>, ConeProjectionResult)> {
    check_weights(weights, a.n_domains())?;
    if y_tilde.len() != a.n_domains() {
        return Err(Error::DimensionMismatch { expected: a.n_domains(), got: y_tilde.len() });
    }
    let sqrt_w = weights.map(f64::sqrt);
    let z = y_tilde.component_mul(&sqrt_w);
    let (_, edges) = transform_by_weights(a, weights)?;
    let result = project_polar(&z, &edges)?;
    // θ = ỹ − W^{-1/2} ρ keeps feasible inputs bit-for-bit when ρ = 0.
    let theta = y_tilde - result.rho.component_div(&sqrt_w);
    Ok((theta, result))
}

/// Projection of `z` onto `span{γ_j : j ∈ face}` together with a nonnegative
/// representation, if `face` is a valid face for `z`: the projection lies in
/// the sub-cone spanned by the face and satisfies the polar optimality
/// conditions within `tol`.
pub fn face_projection(
    z: &DVector<f64>,
    edges: &PolarEdgeSet,
    face: &[usize],
    tol: f64,
) -> Option<(DVector<f64>, Vec<f64>)> {
    let gens = edges.generators();
    if face.is_empty() {
        let rho = DVector::zeros(z.len());
        return (kkt_violation(z, gens, &rho) <= tol).then(|| (rho, Vec::new()));
    }
    let sub = select_columns(gens, face);
    let rho = ColPivQr::new(&sub).project(z);
    let rep = project_generated(&rho, &sub).ok()?;
    if (&rho - &rep.rho).norm() > tol {
        return None;
    }
    if kkt_violation(z, gens, &rho) > tol {
        return None;
    }
    let coefs = rep.coefficient_vector(face.len()).iter().copied().collect();
    Some((rho, coefs))
}

/// Whether `face` belongs to the set of valid faces for `z`.
pub fn is_valid_face(z: &DVector<f64>, edges: &PolarEdgeSet, face: &[usize]) -> bool {
    face_projection(z, edges, face, FACE_TOL * (1.0 + z.norm())).is_some()
}

/// Shrinks a valid face to a linearly independent subset spanning the same
/// space and still valid for `z`.
pub fn reduce_face(face: &[usize], edges: &PolarEdgeSet, z: &DVector<f64>) -> Result<Vec<usize>> {
    let mut face = face.to_vec();
    face.sort_unstable();
    face.dedup();
    if face.iter().any(|&j| j >= edges.len()) {
        return Err(Error::InvalidFace);
    }
    let (_, coefs) = face_projection(z, edges, &face, FACE_TOL * (1.0 + z.norm())).ok_or(Error::InvalidFace)?;
    Ok(reduce_face_with_coefficients(&face, &coefs, edges))
}

/// Elimination on an explicit representation `ρ = Σ a_j γ_j`, `a ≥ 0`:
/// while the edges are dependent, take a null combination `Σ b_j γ_j = 0`
/// with some `b_j > 0`, remove an index minimising `a_j / b_j` over
/// `b_j > 0`, and shift `a ← a − (a_j0 / b_j0) b`. The survivors are then
/// topped up from the original face until they span the same space.
pub fn reduce_face_with_coefficients(face: &[usize], coefficients: &[f64], edges: &PolarEdgeSet) -> Vec<usize> {
    assert_eq!(face.len(), coefficients.len());
    let gens = edges.generators();
    let mut active: Vec<usize> = face.to_vec();
    let mut a: Vec<f64> = coefficients.iter().map(|&c| c.max(0.0)).collect();

    while !active.is_empty() {
        let qr = ColPivQr::new(&select_columns(gens, &active));
        let Some(mut b) = qr.null_vector() else { break };
        if !b.iter().any(|&v| v > 0.0) {
            b.neg_mut();
        }
        let scale = b.amax();
        let mut drop = None;
        for k in 0..active.len() {
            if b[k] > 1e-12 * scale {
                let ratio = a[k] / b[k];
                if drop.is_none_or(|(_, best)| ratio < best) {
                    drop = Some((k, ratio));
                }
            }
        }
        let (k0, t) = drop.expect("null vector has a positive entry");
        for (ak, bk) in a.iter_mut().zip(b.iter()) {
            *ak = (*ak - t * bk).max(0.0);
        }
        active.remove(k0);
        a.remove(k0);
    }

    let target_rank = ColPivQr::new(&select_columns(gens, face)).rank();
    let mut rank = if active.is_empty() { 0 } else { ColPivQr::new(&select_columns(gens, &active)).rank() };
    for &j in face {
        if rank == target_rank {
            break;
        }
        if active.contains(&j) {
            continue;
        }
        let mut trial = active.clone();
        trial.push(j);
        let r = ColPivQr::new(&select_columns(gens, &trial)).rank();
        if r > rank {
            active = trial;
            rank = r;
        }
    }
    active.sort_unstable();
    active
}

/// Every linearly independent valid face, by brute force over all subsets.
/// Dependent subsets are skipped: each has an independent valid sub-face
/// spanning the same space.
pub fn valid_faces_oracle(z: &DVector<f64>, edges: &PolarEdgeSet) -> Result<Vec<(Vec<usize>, DVector<f64>)>> {
    let m = edges.len();
    if m > ORACLE_MAX_EDGES {
        return Err(Error::TooManyEdges(m, ORACLE_MAX_EDGES));
    }
    if z.len() != edges.dim() {
        return Err(Error::DimensionMismatch { expected: edges.dim(), got: z.len() });
    }
    let tol = FACE_TOL * (1.0 + z.norm());
    let gens = edges.generators();
    let mut found = Vec::new();
    for mask in 0u32..(1u32 << m) {
        let face: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let rho = if face.is_empty() {
            DVector::zeros(z.len())
        } else {
            let sub = select_columns(gens, &face);
            let qr = ColPivQr::new(&sub);
            if qr.rank() < face.len() {
                continue;
            }
            let b = qr.solve(z);
            if b.iter().any(|&v| v < -tol) {
                continue;
            }
            sub * b
        };
        if kkt_violation(z, gens, &rho) <= tol {
            found.push((face, rho));
        }
    }
    Ok(found)
}

/// Brute-force reference for [`project_polar`]: the first independent
/// valid face in subset order.
pub fn enumerate_faces_oracle(z: &DVector<f64>, edges: &PolarEdgeSet) -> Result<ConeProjectionResult> {
    let m = edges.len();
    let faces = valid_faces_oracle(z, edges)?;
    let (face, rho) = faces.into_iter().next().ok_or(Error::InvalidFace)?;
    let coefficients = if face.is_empty() {
        Vec::new()
    } else {
        ColPivQr::new(&select_columns(edges.generators(), &face)).solve(z).iter().copied().collect()
    };
    Ok(ConeProjectionResult { phi: z - &rho, rho, face, coefficients, iterations: 1 << m })
}
