//! Horvitz–Thompson and Hájek domain estimates, the cone-constrained
//! estimator built on them, and the max-min closed form for partial orders.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::cone::{self, ConeProjectionResult};
use crate::constraints::{transform_by_weights, IrreducibleConstraints};
use crate::error::{Error, Result};

/// Relative slack under which a constraint row counts as tight when pooling.
pub const POOLING_TOL: f64 = 1e-8;
/// Largest domain count accepted by [`maxmin_estimate`].
pub const MAXMIN_MAX_DOMAINS: usize = 12;

/// Second-order inclusion probabilities, or a design that determines them.
#[derive(Debug, Clone, PartialEq)]
pub enum JointDesign {
    /// Simple random sampling without replacement within strata. Stratum
    /// population sizes are recovered as `n_h / π`.
    StratifiedSrswor,
    /// Independent Bernoulli draws: `π_kl = π_k π_l`.
    Poisson,
    Explicit(JointInclusion),
}

/// Explicit `π_kl` for every pair of sampled units (0-based positions).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointInclusion {
    pairs: HashMap<(usize, usize), f64>,
}

impl JointInclusion {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `π_kl` (order of `k`, `l` is irrelevant).
    pub fn insert(&mut self, k: usize, l: usize, value: f64) -> Result<()> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::InvalidSample(format!("joint probability {value} for ({k}, {l}) outside (0, 1]")));
        }
        let key = (k.min(l), k.max(l));
        if let Some(&prev) = self.pairs.get(&key) {
            if prev != value {
                return Err(Error::InvalidSample(format!("asymmetric joint probability for ({k}, {l})")));
            }
        }
        self.pairs.insert(key, value);
        Ok(())
    }

    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.pairs.get(&(k.min(l), k.max(l))).copied()
    }
}

/// Unit-level sample: study variable, inclusion probabilities, 0-based
/// domain of each unit, optional strata and joint-probability design.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleData {
    y: Vec<f64>,
    pi: Vec<f64>,
    domain: Vec<usize>,
    stratum: Option<Vec<usize>>,
    design: Option<JointDesign>,
}

impl SampleData {
    pub fn new(y: Vec<f64>, pi: Vec<f64>, domain: Vec<usize>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidSample("no units".into()));
        }
        for (len, what) in [(pi.len(), "pi"), (domain.len(), "domain")] {
            if len != n {
                return Err(Error::InvalidSample(format!("{what} has {len} entries, y has {n}")));
            }
        }
        if let Some(k) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite y at unit {k}")));
        }
        if let Some(k) = pi.iter().position(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidSample(format!("inclusion probability {} at unit {k} outside (0, 1]", pi[k])));
        }
        Ok(SampleData { y, pi, domain, stratum: None, design: None })
    }

    pub fn with_strata(mut self, stratum: Vec<usize>) -> Result<Self> {
        if stratum.len() != self.len() {
            return Err(Error::InvalidSample(format!("stratum has {} entries, y has {}", stratum.len(), self.len())));
        }
        self.stratum = Some(stratum);
        if self.design == Some(JointDesign::StratifiedSrswor) {
            self.validate_srswor()?;
        }
        Ok(self)
    }

    pub fn with_design(mut self, design: JointDesign) -> Result<Self> {
        match &design {
            JointDesign::StratifiedSrswor => {
                self.design = Some(design);
                if self.stratum.is_none() {
                    self.stratum = Some(vec![0; self.len()]);
                }
                self.validate_srswor()?;
            }
            JointDesign::Poisson => self.design = Some(design),
            JointDesign::Explicit(joint) => {
                for k in 0..self.len() {
                    if let Some(pkk) = joint.get(k, k) {
                        if (pkk - self.pi[k]).abs() > 1e-12 {
                            return Err(Error::InvalidSample(format!("pi_kk != pi_k for unit {k}")));
                        }
                    }
                }
                self.design = Some(design);
            }
        }
        Ok(self)
    }

    fn validate_srswor(&self) -> Result<()> {
        let strata = self.stratum.as_ref().expect("strata set");
        let mut rate: HashMap<usize, f64> = HashMap::new();
        for (k, &h) in strata.iter().enumerate() {
            let p = *rate.entry(h).or_insert(self.pi[k]);
            if (p - self.pi[k]).abs() > 1e-12 * p {
                return Err(Error::InvalidSample(format!(
                    "inclusion probability varies within stratum {h}; not stratified SRSWOR"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    pub fn stratum(&self) -> Option<&[usize]> {
        self.stratum.as_deref()
    }

    pub fn design(&self) -> Option<&JointDesign> {
        self.design.as_ref()
    }

    /// Design weights `1 / π_k`.
    pub fn weights(&self) -> Vec<f64> {
        self.pi.iter().map(|p| 1.0 / p).collect()
    }
}

/// Per-domain HT totals, estimated sizes and means.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainEstimates {
    pub t_hat: DVector<f64>,
    pub n_hat: DVector<f64>,
    pub hajek: DVector<f64>,
    /// `t_hat / N_d` when population domain sizes are known.
    pub ht_mean: Option<DVector<f64>>,
    /// Units with positive weight per domain.
    pub sample_counts: Vec<usize>,
}

impl DomainEstimates {
    /// From totals and estimated sizes directly.
    pub fn from_totals(t_hat: DVector<f64>, n_hat: DVector<f64>) -> Result<Self> {
        if t_hat.len() != n_hat.len() {
            return Err(Error::DimensionMismatch { expected: t_hat.len(), got: n_hat.len() });
        }
        let empty: Vec<usize> = n_hat.iter().enumerate().filter(|(_, &n)| n.is_nan() || n <= 0.0).map(|(d, _)| d + 1).collect();
        if !empty.is_empty() {
            return Err(Error::EmptyDomains(empty));
        }
        let hajek = t_hat.component_div(&n_hat);
        let sample_counts = vec![0; t_hat.len()];
        Ok(DomainEstimates { t_hat, n_hat, hajek, ht_mean: None, sample_counts })
    }

    pub fn n_domains(&self) -> usize {
        self.hajek.len()
    }

    /// Relative estimated sizes `N̂_d / N̂`.
    pub fn relative_sizes(&self) -> DVector<f64> {
        &self.n_hat / self.n_hat.sum()
    }
}

/// HT totals and Hájek means for domains `0..n_domains`.
pub fn domain_estimates(s: &SampleData, n_domains: usize, population_sizes: Option<&[f64]>) -> Result<DomainEstimates> {
    let mut est = weighted_domain_estimates(s.y(), &s.weights(), s.domain(), n_domains)?;
    if let Some(sizes) = population_sizes {
        if sizes.len() != n_domains {
            return Err(Error::DimensionMismatch { expected: n_domains, got: sizes.len() });
        }
        est.ht_mean = Some(DVector::from_iterator(n_domains, est.t_hat.iter().zip(sizes).map(|(t, n)| t / n)));
    }
    Ok(est)
}

/// Domain estimates from arbitrary unit weights; zero-weight units drop out.
/// Replicate estimates use this with replicate weights.
pub fn weighted_domain_estimates(
    y: &[f64],
    weights: &[f64],
    domain: &[usize],
    n_domains: usize,
) -> Result<DomainEstimates> {
    if weights.len() != y.len() || domain.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: weights.len().min(domain.len()) });
    }
    let mut t = DVector::zeros(n_domains);
    let mut n = DVector::zeros(n_domains);
    let mut counts = vec![0usize; n_domains];
    for ((&yk, &wk), &d) in y.iter().zip(weights).zip(domain) {
        if d >= n_domains {
            return Err(Error::InvalidSample(format!("domain id {} exceeds {n_domains}", d + 1)));
        }
        if wk > 0.0 {
            t[d] += wk * yk;
            n[d] += wk;
            counts[d] += 1;
        }
    }
    let empty: Vec<usize> = counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(d, _)| d + 1).collect();
    if !empty.is_empty() {
        return Err(Error::EmptyDomains(empty));
    }
    let hajek = t.component_div(&n);
    Ok(DomainEstimates { t_hat: t, n_hat: n, hajek, ht_mean: None, sample_counts: counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedEstimate {
    pub theta: DVector<f64>,
    /// Linearly independent face carrying the projection; empty when the
    /// Hájek vector is already feasible.
    pub face: Vec<usize>,
    /// `N̂_d / N̂`.
    pub weights_used: DVector<f64>,
    /// Partition of the domains into pooled blocks, for partial-order constraints.
    pub pooled_blocks: Option<Vec<Vec<usize>>>,
    /// Cone projection details; `None` on the feasible fast path.
    pub projection: Option<ConeProjectionResult>,
}

impl ConstrainedEstimate {
    /// Block index of every domain, if blocks were extracted.
    pub fn block_ids(&self) -> Option<Vec<usize>> {
        let blocks = self.pooled_blocks.as_ref()?;
        let mut ids = vec![0; self.theta.len()];
        for (b, block) in blocks.iter().enumerate() {
            for &d in block {
                ids[d] = b;
            }
        }
        Some(ids)
    }
}

/// Weighted projection of the Hájek vector onto `{θ : A θ ≥ 0}` with weights
/// `N̂_d / N̂`.
pub fn constrained_estimate(est: &DomainEstimates, a: &IrreducibleConstraints) -> Result<ConstrainedEstimate> {
    let d = a.n_domains();
    if est.n_domains() != d {
        return Err(Error::DimensionMismatch { expected: d, got: est.n_domains() });
    }
    let weights = est.relative_sizes();

    let (theta, face, projection) = if a.apply(&est.hajek).iter().all(|&v| v >= 0.0) {
        (est.hajek.clone(), Vec::new(), None)
    } else {
        let (theta, result) = cone::project_cone(&est.hajek, &weights, a)?;
        let (_, edges) = transform_by_weights(a, &weights)?;
        let z = est.hajek.component_mul(&weights.map(f64::sqrt));
        let face = cone::reduce_face(&result.face, &edges, &z)?;
        (theta, face, Some(result))
    };

    let pooled_blocks = a.order_pairs().map(|pairs| pooled_blocks(&theta, &pairs));
    Ok(ConstrainedEstimate { theta, face, weights_used: weights, pooled_blocks, projection })
}

/// The constrained point estimate alone, without face reduction or pooled
/// blocks. Used for replicate estimates.
pub fn constrained_theta(est: &DomainEstimates, a: &IrreducibleConstraints) -> Result<DVector<f64>> {
    if est.n_domains() != a.n_domains() {
        return Err(Error::DimensionMismatch { expected: a.n_domains(), got: est.n_domains() });
    }
    if a.apply(&est.hajek).iter().all(|&v| v >= 0.0) {
        return Ok(est.hajek.clone());
    }
    Ok(cone::project_cone(&est.hajek, &est.relative_sizes(), a)?.0)
}

/// Connected components of the domains under tight order relations.
fn pooled_blocks(theta: &DVector<f64>, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let n = theta.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let tol = POOLING_TOL * (1.0 + theta.norm());
    for &(lo, hi) in pairs {
        if (theta[hi] - theta[lo]).abs() < tol {
            let (a, b) = (find(&mut parent, lo), find(&mut parent, hi));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for d in 0..n {
        let root = find(&mut parent, d);
        let b = *slot.entry(root).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(d);
    }
    blocks
}

/// Closed-form solution under a partial order (`θ_lower ≤ θ_upper` per
/// pair): the max over upper sets `U ∋ d` of the min over lower sets
/// `L ∋ d` of the `N̂`-weighted Hájek mean over `L ∩ U`. Exponential in `D`.
pub fn maxmin_estimate(est: &DomainEstimates, order: &[(usize, usize)]) -> Result<DVector<f64>> {
    let n = est.n_domains();
    if n > MAXMIN_MAX_DOMAINS {
        return Err(Error::TooManyDomains(n, MAXMIN_MAX_DOMAINS));
    }
    // reach[i] has bit j when i ≤ j in the transitive closure
    let mut reach = vec![0u32; n];
    for (i, r) in reach.iter_mut().enumerate() {
        *r = 1 << i;
    }
    for &(lo, hi) in order {
        if lo >= n || hi >= n {
            return Err(Error::DimensionMismatch { expected: n, got: lo.max(hi) + 1 });
        }
        reach[lo] |= 1 << hi;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i] & (1 << k) != 0 {
                reach[i] |= reach[k];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && reach[i] & (1 << j) != 0 && reach[j] & (1 << i) != 0 {
                return Err(Error::CyclicOrder(i + 1));
            }
        }
    }
    let below: Vec<u32> = (0..n).map(|i| (0..n).filter(|&j| reach[j] & (1 << i) != 0).fold(0, |m, j| m | (1 << j))).collect();

    let full = 1u32 << n;
    let is_upper = |s: u32| (0..n).all(|i| s & (1 << i) == 0 || reach[i] & !s == 0);
    let is_lower = |s: u32| (0..n).all(|i| s & (1 << i) == 0 || below[i] & !s == 0);
    let uppers: Vec<u32> = (1..full).filter(|&s| is_upper(s)).collect();
    let lowers: Vec<u32> = (1..full).filter(|&s| is_lower(s)).collect();

    let block_mean = |s: u32| {
        let (mut t, mut w) = (0.0, 0.0);
        for i in 0..n {
            if s & (1 << i) != 0 {
                t += est.t_hat[i];
                w += est.n_hat[i];
            }
        }
        t / w
    };

    let mut theta = DVector::zeros(n);
    for d in 0..n {
        let bit = 1u32 << d;
        let mut best = f64::NEG_INFINITY;
        for &u in uppers.iter().filter(|&&u| u & bit != 0) {
            let mut inner = f64::INFINITY;
            for &l in lowers.iter().filter(|&&l| l & bit != 0) {
                inner = inner.min(block_mean(l & u));
            }
            best = best.max(inner);
        }
        theta[d] = best;
    }
    Ok(theta)
}
