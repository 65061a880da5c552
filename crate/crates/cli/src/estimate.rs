use std::fs;

use anyhow::Context;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use shapemeans::constraints::{ConstraintMatrix, IrreducibleConstraints};
use shapemeans::estimation::{
    constrained_estimate, constrained_theta, domain_estimates, weighted_domain_estimates, ConstrainedEstimate,
    DomainEstimates, JointDesign, SampleData,
};
use shapemeans::variance::{
    dagjk_replicates, linearized_variances, replicate_variance, wald_interval, ReplicateScheme,
};

use crate::args::{DesignChoice, EstimateArgs, VarianceChoice};
use crate::check::load_constraints;
use crate::data::{read_sample, SampleTable};
use crate::error::SchemaError;
use crate::{read_input, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub variance: String,
    pub level: f64,
    pub n_units: usize,
    pub n_domains: usize,
    pub n_constraints: usize,
    pub rows_sum_to_zero: bool,
    /// 1-based constraint rows active at the constrained estimate.
    pub face: Vec<usize>,
    /// Negative linearization variances set to zero.
    pub clamped_variances: usize,
    pub domains: Vec<DomainRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    /// 1-based.
    pub domain: usize,
    pub n_d: usize,
    #[serde(rename = "N_hat")]
    pub n_hat: f64,
    pub unconstrained: f64,
    pub constrained: f64,
    pub se_unconstrained: f64,
    pub se_constrained: f64,
    /// Wald interval around the constrained estimate.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// 1-based pooled block, for partial-order constraints.
    pub pooled_block_id: Option<usize>,
    /// Active constraint rows (1-based) that involve this domain.
    #[serde(rename = "face_J")]
    pub face_j: Vec<usize>,
}

/// How variances are estimated, with everything loaded.
#[derive(Debug, Clone)]
pub enum VariancePlan {
    Linearization,
    Dagjk { groups: usize, seed: u64 },
    Replicate(ReplicateScheme),
}

pub struct Options {
    pub variance_label: String,
    pub plan: VariancePlan,
    pub level: f64,
    pub design: DesignChoice,
}

pub fn sample_data(table: &SampleTable, design: DesignChoice) -> shapemeans::Result<SampleData> {
    let mut s = SampleData::new(table.y.clone(), table.pi.clone(), table.domain.clone())?;
    if let Some(strata) = &table.stratum {
        s = s.with_strata(strata.clone())?;
    }
    match design {
        DesignChoice::Srswor => s.with_design(JointDesign::StratifiedSrswor),
        DesignChoice::Poisson => s.with_design(JointDesign::Poisson),
    }
}

/// Variances of the unconstrained and constrained estimates, plus the count
/// of clamped linearization variances.
fn variances(
    s: &SampleData,
    est: &DomainEstimates,
    fit: &ConstrainedEstimate,
    a: &IrreducibleConstraints,
    plan: &VariancePlan,
) -> shapemeans::Result<(Vec<f64>, Vec<f64>, usize)> {
    let scheme = match plan {
        VariancePlan::Linearization => {
            let u = linearized_variances(s, est, &[], a)?;
            let c = linearized_variances(s, est, &fit.face, a)?;
            return Ok((u.variances.iter().copied().collect(), c.variances.iter().copied().collect(), u.clamped + c.clamped));
        }
        VariancePlan::Dagjk { groups, seed } => dagjk_replicates(s, *groups, *seed)?,
        VariancePlan::Replicate(scheme) => scheme.clone(),
    };
    let nd = est.n_domains();
    let mut unconstrained = Vec::with_capacity(scheme.n_replicates());
    let mut constrained = Vec::with_capacity(scheme.n_replicates());
    for w in &scheme.weights {
        let eg = weighted_domain_estimates(s.y(), w, s.domain(), nd)?;
        constrained.push(constrained_theta(&eg, a)?);
        unconstrained.push(eg.hajek);
    }
    let combine = |point: &DVector<f64>, reps: &[DVector<f64>]| -> shapemeans::Result<Vec<f64>> {
        (0..nd)
            .map(|d| {
                let values: Vec<f64> = reps.iter().map(|r| r[d]).collect();
                replicate_variance(point[d], &values, &scheme.coefficients)
            })
            .collect()
    };
    Ok((combine(&est.hajek, &unconstrained)?, combine(&fit.theta, &constrained)?, 0))
}

/// The estimation pipeline on an already parsed sample and constraint matrix.
pub fn compute(table: &SampleTable, a: ConstraintMatrix, opts: &Options) -> anyhow::Result<EstimateReport> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(SchemaError(format!("level must lie in (0, 1), got {}", opts.level)).into());
    }
    let m = a.n_constraints();
    let rows_sum_to_zero = a.rows_sum_to_zero();
    let a = a.certify().map_err(shapemeans::Error::Reducible)?;
    let nd = a.n_domains();
    let s = sample_data(table, opts.design)?;
    let est = domain_estimates(&s, nd, None)?;
    let fit = constrained_estimate(&est, &a)?;
    let (var_u, var_c, clamped) = variances(&s, &est, &fit, &a, &opts.plan)?;
    let blocks = fit.block_ids();

    let domains = (0..nd)
        .map(|d| {
            let (ci_lo, ci_hi) = wald_interval(fit.theta[d], var_c[d], opts.level);
            DomainRecord {
                domain: d + 1,
                n_d: est.sample_counts[d],
                n_hat: est.n_hat[d],
                unconstrained: est.hajek[d],
                constrained: fit.theta[d],
                se_unconstrained: var_u[d].sqrt(),
                se_constrained: var_c[d].sqrt(),
                ci_lo,
                ci_hi,
                pooled_block_id: blocks.as_ref().map(|b| b[d] + 1),
                face_j: fit.face.iter().filter(|&&j| a.matrix()[(j, d)] != 0.0).map(|j| j + 1).collect(),
            }
        })
        .collect();
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        variance: opts.variance_label.clone(),
        level: opts.level,
        n_units: s.len(),
        n_domains: nd,
        n_constraints: m,
        rows_sum_to_zero,
        face: fit.face.iter().map(|j| j + 1).collect(),
        clamped_variances: clamped,
        domains,
    })
}

pub fn run(args: &EstimateArgs) -> anyhow::Result<()> {
    let a = load_constraints(&args.constraints)?;
    let table = read_sample(read_input(&args.data)?.as_bytes(), a.n_domains())
        .with_context(|| format!("reading {}", args.data.display()))?;
    let plan = match &args.variance {
        VarianceChoice::Linearization => VariancePlan::Linearization,
        VarianceChoice::Dagjk(groups) => {
            let seed = args.seed.ok_or_else(|| SchemaError("dagjk needs --seed".into()))?;
            VariancePlan::Dagjk { groups: *groups, seed }
        }
        VarianceChoice::Replicate(path) => {
            let coef = args
                .coefficients
                .as_ref()
                .ok_or_else(|| SchemaError("replicate weights need --coefficients".into()))?;
            let scheme = ReplicateScheme::from_csv(
                read_input(path)?.as_bytes(),
                read_input(coef)?.as_bytes(),
                &table.unit_ids,
            )
            .with_context(|| format!("reading replicate weights {}", path.display()))?;
            VariancePlan::Replicate(scheme)
        }
    };
    let opts = Options { variance_label: args.variance.label(), plan, level: args.level, design: args.design };
    let report = compute(&table, a, &opts)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{json}"),
    }
    Ok(())
}
