use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use shapemeans::cone::{valid_faces_oracle, ORACLE_MAX_EDGES};
use shapemeans::constraints::{build_monotone, transform_by_weights, AxisOrder, IrreducibleConstraints};
use shapemeans::estimation::{constrained_estimate, constrained_theta, domain_estimates, weighted_domain_estimates};
use shapemeans::variance::{dagjk_replicates, linearized_variances, replicate_variance, wald_interval};

use crate::design::{draw_sample, StratifiedDesign};
use crate::error::{Result, SimError};
use crate::population::{generate_population, Population, PopulationSpec};
use crate::report::{DomainSummary, EstimatorReport, FaceCount, FaceSummary, SimulationReport};

/// Stream of the population draw; replication `r` uses stream `r + 1`.
pub const POPULATION_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    DoubleMonotone,
    X1Monotone,
}

impl Shape {
    pub fn label(self) -> &'static str {
        match self {
            Shape::DoubleMonotone => "double_monotone",
            Shape::X1Monotone => "x1_monotone",
        }
    }

    pub fn constraints(self, spec: &PopulationSpec) -> Result<IrreducibleConstraints> {
        let axes = match self {
            Shape::DoubleMonotone => vec![AxisOrder::increasing(spec.x1_axis()), AxisOrder::increasing(spec.x2_axis())],
            Shape::X1Monotone => vec![AxisOrder::increasing(spec.x1_axis())],
        };
        let a = build_monotone(&spec.grid(), &axes)?;
        a.certify().map_err(|w| SimError::Core(shapemeans::Error::Reducible(w)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum VarianceMethod {
    Linearization,
    Dagjk { groups: usize },
}

impl VarianceMethod {
    pub fn label(self) -> String {
        match self {
            VarianceMethod::Linearization => "linearization".into(),
            VarianceMethod::Dagjk { groups } => format!("dagjk_{groups}"),
        }
    }
}

fn default_shapes() -> Vec<Shape> {
    vec![Shape::X1Monotone, Shape::DoubleMonotone]
}

fn default_variance() -> Vec<VarianceMethod> {
    vec![VarianceMethod::Linearization]
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub population: PopulationSpec,
    pub allocation: Vec<usize>,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<Shape>,
    #[serde(default = "default_variance")]
    pub variance: Vec<VarianceMethod>,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Replications when the caller does not override them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        if self.shapes.is_empty() {
            return Err(SimError::Config(format!("scenario {}: no shapes", self.name)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(SimError::Config(format!("scenario {}: level must lie in (0, 1)", self.name)));
        }
        for m in &self.variance {
            if let VarianceMethod::Dagjk { groups } = m {
                if *groups < 2 {
                    return Err(SimError::Config(format!("scenario {}: DAGJK needs at least 2 groups", self.name)));
                }
            }
        }
        Ok(())
    }
}

/// A study file holds either one scenario or `{"scenarios": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenarios: Vec<Scenario>,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Many(StudyConfig),
            One(Scenario),
        }
        let cfg = match serde_json::from_str::<Either>(text)? {
            Either::Many(c) => c,
            Either::One(s) => StudyConfig { scenarios: vec![s] },
        };
        if cfg.scenarios.is_empty() {
            return Err(SimError::Config("no scenarios".into()));
        }
        for s in &cfg.scenarios {
            s.validate()?;
        }
        Ok(cfg)
    }
}

pub fn population_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POPULATION_STREAM);
    rng
}

pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 + 1);
    rng
}

/// Monte-Carlo average of `(θ − ȳ_U)ᵀ W_U (θ − ȳ_U)`, `W_U = diag(N_d / N)`.
pub fn wmse(estimates: &[DVector<f64>], truth: &[f64], sizes: &[usize]) -> f64 {
    let n: f64 = sizes.iter().map(|&s| s as f64).sum();
    let total: f64 = estimates
        .iter()
        .map(|e| e.iter().zip(truth).zip(sizes).map(|((e, t), &s)| s as f64 / n * (e - t).powi(2)).sum::<f64>())
        .sum();
    total / estimates.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Context {
    pop: Population,
    design: StratifiedDesign,
    constraints: Vec<IrreducibleConstraints>,
    methods: Vec<VarianceMethod>,
}

/// Output of one replication. Estimator 0 is unconstrained, estimator
/// `i + 1` is shape `i`.
struct RepOutcome {
    estimates: Vec<DVector<f64>>,
    /// `[estimator][method]`; `None` when a jackknife replicate lost every
    /// sampled unit of some domain.
    variances: Vec<Vec<Option<DVector<f64>>>>,
    faces: Vec<Vec<usize>>,
    clamped: usize,
    violation: f64,
}

fn replicate(ctx: &Context, seed: u64, rep: usize) -> Result<RepOutcome> {
    let mut rng = replication_rng(seed, rep);
    let drawn = draw_sample(&ctx.pop, &ctx.design, &mut rng)?;
    let jk_seed = rng.next_u64();
    let s = &drawn.data;
    let nd = ctx.pop.sizes.len();
    let est = domain_estimates(s, nd, None)?;

    let mut estimates = vec![est.hajek.clone()];
    let mut faces = Vec::new();
    let mut violation = 0.0f64;
    for a in &ctx.constraints {
        let fit = constrained_estimate(&est, a)?;
        violation = violation.max(a.apply(&fit.theta).iter().fold(0.0, |m, &v| m.max(-v)));
        estimates.push(fit.theta);
        faces.push(fit.face);
    }

    let n_est = estimates.len();
    let mut variances = vec![Vec::with_capacity(ctx.methods.len()); n_est];
    let mut clamped = 0;
    for method in &ctx.methods {
        match *method {
            VarianceMethod::Linearization => {
                let lv = linearized_variances(s, &est, &[], &ctx.constraints[0])?;
                clamped += lv.clamped;
                variances[0].push(Some(lv.variances));
                for (i, a) in ctx.constraints.iter().enumerate() {
                    let lv = linearized_variances(s, &est, &faces[i], a)?;
                    clamped += lv.clamped;
                    variances[i + 1].push(Some(lv.variances));
                }
            }
            VarianceMethod::Dagjk { groups } => {
                let scheme = dagjk_replicates(s, groups, jk_seed)?;
                // replicates[estimator][g]
                let mut replicates: Vec<Vec<DVector<f64>>> = vec![Vec::with_capacity(groups); n_est];
                let mut emptied = false;
                for w in &scheme.weights {
                    let eg = match weighted_domain_estimates(s.y(), w, s.domain(), nd) {
                        Ok(eg) => eg,
                        Err(shapemeans::Error::EmptyDomains(_)) => {
                            emptied = true;
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    };
                    for (i, a) in ctx.constraints.iter().enumerate() {
                        replicates[i + 1].push(constrained_theta(&eg, a)?);
                    }
                    replicates[0].push(eg.hajek);
                }
                if emptied {
                    for v in variances.iter_mut() {
                        v.push(None);
                    }
                    continue;
                }
                for (e, reps) in replicates.iter().enumerate() {
                    let mut v = DVector::zeros(nd);
                    for d in 0..nd {
                        let values: Vec<f64> = reps.iter().map(|r| r[d]).collect();
                        v[d] = replicate_variance(estimates[e][d], &values, &scheme.coefficients)?;
                    }
                    variances[e].push(Some(v));
                }
            }
        }
    }
    Ok(RepOutcome { estimates, variances, faces, clamped, violation })
}

/// Runs `reps` replications of one scenario. Results do not depend on the
/// number of worker threads.
pub fn run_study(scenario: &Scenario, reps: usize, seed: u64, threads: Option<usize>) -> Result<SimulationReport> {
    scenario.validate()?;
    if reps == 0 {
        return Err(SimError::Config("reps must be at least 1".into()));
    }
    let pop = generate_population(&scenario.population, &mut population_rng(seed))?;
    let design = StratifiedDesign::new(&pop, &scenario.allocation)?;
    let constraints = scenario
        .shapes
        .iter()
        .map(|s| s.constraints(&scenario.population))
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context { pop, design, constraints, methods: scenario.variance.clone() };

    let run = || -> Result<Vec<RepOutcome>> {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                replicate(&ctx, seed, r).map_err(|e| match e {
                    SimError::Core(source) => SimError::Replication { rep: r, source },
                    other => other,
                })
            })
            .collect()
    };
    let outcomes = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(run)?,
        None => run()?,
    };
    Ok(summarise(scenario, reps, seed, &ctx, &outcomes))
}

/// Valid faces of the limiting means `μ` under `W = diag(N_d / N)`, when the
/// edge count allows enumeration.
fn limiting_faces(pop: &Population, a: &IrreducibleConstraints) -> Option<Vec<Vec<usize>>> {
    // with every constraint slack, no edge is orthogonal to μ and only the empty face is valid
    if a.apply(&DVector::from_vec(pop.mu.clone())).iter().all(|&v| v > 0.0) {
        return Some(vec![Vec::new()]);
    }
    enumerate_limiting_faces(pop, a)
}

fn enumerate_limiting_faces(pop: &Population, a: &IrreducibleConstraints) -> Option<Vec<Vec<usize>>> {
    if a.n_constraints() > ORACLE_MAX_EDGES {
        return None;
    }
    let r = DVector::from_vec(pop.relative_sizes());
    let (_, edges) = transform_by_weights(a, &r).ok()?;
    let z = DVector::from_vec(pop.mu.clone()).component_mul(&r.map(f64::sqrt));
    let faces = valid_faces_oracle(&z, &edges).ok()?;
    Some(faces.into_iter().map(|(f, _)| f).collect())
}

fn summarise(scenario: &Scenario, reps: usize, seed: u64, ctx: &Context, outcomes: &[RepOutcome]) -> SimulationReport {
    let pop = &ctx.pop;
    let nd = pop.sizes.len();
    let r = outcomes.len() as f64;
    let methods: Vec<String> = ctx.methods.iter().map(|m| m.label()).collect();
    let mut names = vec!["unconstrained".to_string()];
    names.extend(scenario.shapes.iter().map(|s| s.label().to_string()));

    let mut estimators = Vec::new();
    for (e, name) in names.iter().enumerate() {
        let est: Vec<DVector<f64>> = outcomes.iter().map(|o| o.estimates[e].clone()).collect();
        let mut domains = Vec::with_capacity(nd);
        for d in 0..nd {
            let mut values: Vec<f64> = est.iter().map(|v| v[d]).collect();
            let mean = values.iter().sum::<f64>() / r;
            let mc_variance = if outcomes.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            values.sort_by(f64::total_cmp);
            let mut variance = Vec::new();
            let mut coverage = Vec::new();
            for m in 0..methods.len() {
                let usable: Vec<(f64, f64)> = outcomes
                    .iter()
                    .filter_map(|o| o.variances[e][m].as_ref().map(|v| (o.estimates[e][d], v[d])))
                    .collect();
                let k = usable.len() as f64;
                variance.push(usable.iter().map(|(_, v)| v).sum::<f64>() / k);
                let hits = usable
                    .iter()
                    .filter(|&&(theta, v)| {
                        let (lo, hi) = wald_interval(theta, v, scenario.level);
                        lo <= pop.means[d] && pop.means[d] <= hi
                    })
                    .count();
                coverage.push(hits as f64 / k);
            }
            let (x1, x2) = pop.spec.levels(d);
            domains.push(DomainSummary {
                domain: d + 1,
                x1,
                x2,
                truth: pop.means[d],
                mu: pop.mu[d],
                mean,
                p025: quantile(&values, 0.025),
                p975: quantile(&values, 0.975),
                mc_variance,
                variance,
                coverage,
            });
        }
        let faces = (e > 0).then(|| {
            let a = &ctx.constraints[e - 1];
            let g_mu = limiting_faces(pop, a);
            let mut counts: std::collections::BTreeMap<Vec<usize>, usize> = Default::default();
            for o in outcomes {
                *counts.entry(o.faces[e - 1].clone()).or_default() += 1;
            }
            let empty = counts.get(&Vec::new()).copied().unwrap_or(0);
            let outside = g_mu.as_ref().map(|g| {
                outcomes.iter().filter(|o| !g.contains(&o.faces[e - 1])).count() as f64 / r
            });
            let mut table: Vec<FaceCount> = counts
                .into_iter()
                .map(|(f, count)| FaceCount { face: f.iter().map(|j| j + 1).collect(), count })
                .collect();
            table.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.face.cmp(&b.face)));
            FaceSummary {
                constraints: a.n_constraints(),
                distinct: table.len(),
                empty_rate: empty as f64 / r,
                outside_g_mu_rate: outside,
                g_mu: g_mu.map(|g| g.into_iter().map(|f| f.iter().map(|j| j + 1).collect()).collect()),
                table,
            }
        });
        estimators.push(EstimatorReport {
            name: name.clone(),
            wmse: wmse(&est, &pop.means, &pop.sizes),
            domains,
            faces,
        });
    }

    SimulationReport {
        schema_version: 1,
        scenario: scenario.clone(),
        reps,
        seed,
        methods,
        population_means: pop.means.clone(),
        mu: pop.mu.clone(),
        inclusion_probabilities: ctx.design.inclusion_probabilities(),
        estimators,
        skipped: (0..ctx.methods.len()).map(|m| outcomes.iter().filter(|o| o.variances[0][m].is_none()).count()).collect(),
        clamped_variances: outcomes.iter().map(|o| o.clamped).sum(),
        max_constraint_violation: outcomes.iter().fold(0.0, |m, o| m.max(o.violation)),
    }
}
