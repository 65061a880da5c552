//! Variance estimation for the unconstrained and constrained domain means.
//!
//! The linearization route treats the projection face `J` as fixed. With
//! `J` fixed the constrained estimator is a smooth function of the HT
//! totals `t̂` and estimated sizes `N̂`:
//!
//! `θ_J(t̂, N̂) = ỹ − W⁻¹ A_Jᵀ (A_J W⁻¹ A_Jᵀ)⁻¹ A_J ỹ`, with `ỹ = t̂ / N̂`, `W = diag(N̂)`,
//!
//! whose partials `α̂ = ∂θ/∂t̂`, `β̂ = ∂θ/∂N̂` (central differences) build
//! the linearized values `û_k = α̂_{d(k)} y_k + β̂_{d(k)}` fed to the design's
//! quadratic form. Replicate variances (delete-a-group jackknife or
//! externally supplied weights) bypass linearization entirely.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::estimation::{DomainEstimates, JointDesign, SampleData};

/// Relative central-difference step: `h = FD_STEP · max(1, |v|)`.
pub const FD_STEP: f64 = 1e-6;

/// The fixed-face estimator `θ_J` evaluated at totals `t` and sizes `n`.
pub fn theta_at_face(t: &DVector<f64>, n: &DVector<f64>, a: &ConstraintMatrix, face: &[usize]) -> DVector<f64> {
    let y = t.component_div(n);
    if face.is_empty() {
        return y;
    }
    let d = a.n_domains();
    let a_j = DMatrix::from_fn(face.len(), d, |r, c| a.matrix()[(face[r], c)]);
    // W⁻¹ A_Jᵀ
    let winv_at = DMatrix::from_fn(d, face.len(), |r, c| a_j[(c, r)] / n[r]);
    let gram = &a_j * &winv_at;
    let rhs = &a_j * &y;
    let lambda = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).expect("face rows are linearly independent"),
    };
    y - winv_at * lambda
}

/// Partials of every `θ_J,d` with respect to every `t̂_i` and `N̂_i`, by
/// central differences. Row `d` of each matrix holds the partials of `θ_d`.
pub fn face_jacobian(est: &DomainEstimates, a: &ConstraintMatrix, face: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = est.n_domains();
    let mut alpha = DMatrix::zeros(d, d);
    let mut beta = DMatrix::zeros(d, d);
    for i in 0..d {
        let h = FD_STEP * est.t_hat[i].abs().max(1.0);
        let (mut up, mut down) = (est.t_hat.clone(), est.t_hat.clone());
        up[i] += h;
        down[i] -= h;
        let diff = (theta_at_face(&up, &est.n_hat, a, face) - theta_at_face(&down, &est.n_hat, a, face)) / (2.0 * h);
        alpha.set_column(i, &diff);

        let h = FD_STEP * est.n_hat[i].abs().max(1.0);
        let (mut up, mut down) = (est.n_hat.clone(), est.n_hat.clone());
        up[i] += h;
        down[i] -= h;
        let diff = (theta_at_face(&est.t_hat, &up, a, face) - theta_at_face(&est.t_hat, &down, a, face)) / (2.0 * h);
        beta.set_column(i, &diff);
    }
    (alpha, beta)
}

/// Analytic partials of the Hájek mean of domain `d`.
pub fn hajek_partials(est: &DomainEstimates, d: usize) -> (DVector<f64>, DVector<f64>) {
    let n = est.n_domains();
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    alpha[d] = 1.0 / est.n_hat[d];
    beta[d] = -est.t_hat[d] / (est.n_hat[d] * est.n_hat[d]);
    (alpha, beta)
}

/// Domains joined to `d` through the order rows in `face`.
pub fn face_block(a: &ConstraintMatrix, face: &[usize], d: usize) -> Option<Vec<usize>> {
    let pairs = a.order_pairs()?;
    let mut block = vec![d];
    let mut grew = true;
    while grew {
        grew = false;
        for &j in face {
            let (lo, hi) = pairs[j];
            let (has_lo, has_hi) = (block.contains(&lo), block.contains(&hi));
            if has_lo != has_hi {
                block.push(if has_lo { hi } else { lo });
                grew = true;
            }
        }
    }
    block.sort_unstable();
    Some(block)
}

/// Analytic partials when the face pools domain `d` into the block `B`:
/// `θ_d = Σ_B t̂ / Σ_B N̂`. Only defined for order constraints.
pub fn pooled_block_partials(
    est: &DomainEstimates,
    a: &ConstraintMatrix,
    face: &[usize],
    d: usize,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let block = face_block(a, face, d)?;
    let total_n: f64 = block.iter().map(|&i| est.n_hat[i]).sum();
    let theta = block.iter().map(|&i| est.t_hat[i]).sum::<f64>() / total_n;
    let n = est.n_domains();
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    for &i in &block {
        alpha[i] = 1.0 / total_n;
        beta[i] = -theta / total_n;
    }
    Some((alpha, beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedVariance {
    /// Variance estimate per domain.
    pub variances: DVector<f64>,
    /// Linearized values `û_k` (one vector over units per target domain).
    pub u_hat: Vec<DVector<f64>>,
    /// Row `d`: `∂θ_d / ∂t̂_i`.
    pub alpha: DMatrix<f64>,
    /// Row `d`: `∂θ_d / ∂N̂_i`.
    pub beta: DMatrix<f64>,
    /// Domains whose quadratic form came out negative and was set to zero.
    pub clamped: usize,
}

/// Linearization variance of `θ_J,d` for a single target domain.
pub fn linearized_variance(
    s: &SampleData,
    est: &DomainEstimates,
    face: &[usize],
    a: &ConstraintMatrix,
    d: usize,
) -> Result<f64> {
    Ok(linearized_variances(s, est, face, a)?.variances[d])
}

/// Linearization variances for all domains with the face held fixed.
pub fn linearized_variances(
    s: &SampleData,
    est: &DomainEstimates,
    face: &[usize],
    a: &ConstraintMatrix,
) -> Result<LinearizedVariance> {
    let form = DesignForm::new(s)?;
    let (alpha, beta) = face_jacobian(est, a, face);
    let nd = est.n_domains();
    let mut variances = DVector::zeros(nd);
    let mut u_hat = Vec::with_capacity(nd);
    let mut clamped = 0;
    for d in 0..nd {
        let u = DVector::from_iterator(
            s.len(),
            s.y().iter().zip(s.domain()).map(|(&y, &i)| alpha[(d, i)] * y + beta[(d, i)]),
        );
        let x: Vec<f64> = u.iter().zip(s.pi()).map(|(u, p)| u / p).collect();
        let mut v = form.quadratic(&x)?;
        if v < 0.0 {
            clamped += 1;
            v = 0.0;
        }
        variances[d] = v;
        u_hat.push(u);
    }
    if clamped > 0 {
        warn!("{clamped} negative linearized variance(s) clamped to zero");
    }
    Ok(LinearizedVariance { variances, u_hat, alpha, beta, clamped })
}

/// `Σ_k Σ_l (Δ_kl / π_kl) x_k x_l` for the sample's design, `x_k = û_k / π_k`.
struct DesignForm<'a> {
    sample: &'a SampleData,
    /// SRSWOR strata: (member positions, π_h, n_h/π_h)
    strata: Vec<(Vec<usize>, f64, f64)>,
}

impl<'a> DesignForm<'a> {
    fn new(sample: &'a SampleData) -> Result<Self> {
        let design = sample.design().ok_or_else(|| {
            Error::MissingJointProbabilities("no design tag and no explicit joint probabilities".into())
        })?;
        let mut strata = Vec::new();
        if let JointDesign::StratifiedSrswor = design {
            let labels = sample.stratum().expect("SRSWOR samples carry strata");
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (k, &h) in labels.iter().enumerate() {
                groups.entry(h).or_default().push(k);
            }
            for (_, members) in groups {
                let pi = sample.pi()[members[0]];
                let pop = members.len() as f64 / pi;
                strata.push((members, pi, pop));
            }
        }
        Ok(DesignForm { sample, strata })
    }

    fn quadratic(&self, x: &[f64]) -> Result<f64> {
        let pi = self.sample.pi();
        match self.sample.design().expect("checked in new") {
            JointDesign::Poisson => Ok(x.iter().zip(pi).map(|(x, p)| (1.0 - p) * x * x).sum()),
            JointDesign::StratifiedSrswor => {
                let mut total = 0.0;
                for (members, p, pop) in &self.strata {
                    let n = members.len() as f64;
                    let sum: f64 = members.iter().map(|&k| x[k]).sum();
                    let sum_sq: f64 = members.iter().map(|&k| x[k] * x[k]).sum();
                    // Δ_kl / π_kl for k ≠ l within the stratum
                    let off = if n > 1.0 && *pop > 1.0 {
                        let joint = n * (n - 1.0) / (pop * (pop - 1.0));
                        1.0 - p * p / joint
                    } else {
                        0.0
                    };
                    total += (1.0 - p - off) * sum_sq + off * sum * sum;
                }
                Ok(total)
            }
            JointDesign::Explicit(joint) => {
                let n = x.len();
                let mut total = 0.0;
                for k in 0..n {
                    total += (1.0 - pi[k]) * x[k] * x[k];
                    for l in (k + 1)..n {
                        let pkl = joint.get(k, l).ok_or_else(|| {
                            Error::MissingJointProbabilities(format!("pair ({}, {}) not supplied", k + 1, l + 1))
                        })?;
                        total += 2.0 * (pkl - pi[k] * pi[l]) / pkl * x[k] * x[l];
                    }
                }
                Ok(total)
            }
        }
    }
}

/// Replicate weights (one row of unit weights per replicate) and the
/// coefficients `c_g` combining squared deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateScheme {
    pub weights: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
}

impl ReplicateScheme {
    pub fn new(weights: Vec<Vec<f64>>, coefficients: Vec<f64>) -> Result<Self> {
        if weights.len() != coefficients.len() {
            return Err(Error::InvalidReplicates(format!(
                "{} weight columns but {} coefficients",
                weights.len(),
                coefficients.len()
            )));
        }
        if let Some(first) = weights.first() {
            if weights.iter().any(|w| w.len() != first.len()) {
                return Err(Error::InvalidReplicates("replicates differ in unit count".into()));
            }
        }
        if weights.iter().flatten().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidReplicates("replicate weights must be finite and nonnegative".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidReplicates("non-finite coefficient".into()));
        }
        Ok(ReplicateScheme { weights, coefficients })
    }

    pub fn n_replicates(&self) -> usize {
        self.weights.len()
    }

    /// Reads a weights table (`unit_id` column followed by one column per
    /// replicate) and a coefficients table (one value per row, first column),
    /// both CSV with headers. Rows are matched to `unit_ids` by id.
    pub fn from_csv<W: Read, C: Read>(weights: W, coefficients: C, unit_ids: &[String]) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(weights);
        let n_cols = rdr.headers()?.len();
        if n_cols < 2 {
            return Err(Error::InvalidReplicates("weights table needs unit_id and replicate columns".into()));
        }
        let g = n_cols - 1;
        let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let id = rec.get(0).unwrap_or("").trim().to_string();
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::InvalidReplicates(format!("unit {id}: {e}")))?;
            if row.len() != g {
                return Err(Error::InvalidReplicates(format!("unit {id} has {} weights, expected {g}", row.len())));
            }
            if by_id.insert(id.clone(), row).is_some() {
                return Err(Error::InvalidReplicates(format!("unit {id} listed twice")));
            }
        }
        let mut columns = vec![Vec::with_capacity(unit_ids.len()); g];
        for id in unit_ids {
            let row = by_id
                .get(id)
                .ok_or_else(|| Error::InvalidReplicates(format!("no replicate weights for unit {id}")))?;
            for (col, &w) in columns.iter_mut().zip(row) {
                col.push(w);
            }
        }

        let mut crdr = csv::Reader::from_reader(coefficients);
        let mut coefs = Vec::new();
        for rec in crdr.records() {
            let rec = rec?;
            let v = rec.get(0).unwrap_or("").trim();
            coefs.push(v.parse::<f64>().map_err(|e| Error::InvalidReplicates(format!("coefficient {v}: {e}")))?);
        }
        ReplicateScheme::new(columns, coefs)
    }
}

/// `Σ_g c_g (θ^(g) − θ)²`.
pub fn replicate_variance(point: f64, replicates: &[f64], coefficients: &[f64]) -> Result<f64> {
    if replicates.len() < 2 {
        return Err(Error::TooFewReplicates(replicates.len()));
    }
    if coefficients.len() != replicates.len() {
        return Err(Error::DimensionMismatch { expected: replicates.len(), got: coefficients.len() });
    }
    Ok(replicates.iter().zip(coefficients).map(|(r, c)| c * (r - point).powi(2)).sum())
}

/// Delete-a-group jackknife: units of each stratum are shuffled and dealt
/// into `G` groups whose sizes differ by at most one. Replicate `g` zeroes
/// group `g` in every stratum and scales the survivors by `G / (G − 1)`;
/// every coefficient is `(G − 1) / G`. A sample without strata is one stratum.
pub fn dagjk_replicates(s: &SampleData, groups: usize, seed: u64) -> Result<ReplicateScheme> {
    if groups < 2 {
        return Err(Error::TooFewReplicates(groups));
    }
    let single = vec![0; s.len()];
    let labels = s.stratum().unwrap_or(&single);
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &h) in labels.iter().enumerate() {
        strata.entry(h).or_default().push(k);
    }
    let smallest = strata.values().map(Vec::len).min().unwrap_or(0);
    if groups > smallest {
        return Err(Error::TooManyGroups { groups, smallest });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut group_of = vec![0usize; s.len()];
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for (pos, &k) in members.iter().enumerate() {
            group_of[k] = pos % groups;
        }
    }

    let g = groups as f64;
    let base = s.weights();
    let weights = (0..groups)
        .map(|rep| {
            base.iter()
                .zip(&group_of)
                .map(|(&w, &grp)| if grp == rep { 0.0 } else { w * g / (g - 1.0) })
                .collect()
        })
        .collect();
    ReplicateScheme::new(weights, vec![(g - 1.0) / g; groups])
}

/// Two-sided normal-theory interval `θ ± z_{(1+level)/2} √variance`.
pub fn wald_interval(theta: f64, variance: f64, level: f64) -> (f64, f64) {
    debug_assert!(level > 0.0 && level < 1.0);
    let z = normal_quantile((1.0 + level) / 2.0);
    let half = z * variance.max(0.0).sqrt();
    (theta - half, theta + half)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
